pub mod cluster;
pub mod embedder;
pub mod evalkit;
pub mod pipeline;
pub mod raster;
pub mod regions;
pub mod rng;
pub mod sampler;
pub mod selector;
pub mod texops;
