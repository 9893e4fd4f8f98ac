use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use reptex::embedder::{AugmentationSpec, EmbedderKind, TrainConfig};
use reptex::pipeline::{run_pipeline, ExtractionParams, PipelineConfig, RegionSource, EXIT_CONFIG};
use reptex::sampler::SamplerConfig;

/// Extract representative tileable textures from a repetitive image.
#[derive(Debug, Parser)]
#[command(name = "reptex", version)]
struct Args {
    /// Input image (PNG).
    #[arg(long, value_name = "PATH")]
    image: PathBuf,

    /// Label raster (PNG, one class value per pixel); enables subarea mode.
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,

    /// JSON object mapping label pixel values to class names.
    #[arg(long, value_name = "PATH")]
    class_map: Option<PathBuf>,

    /// Class name of the background (wall surface) in the label raster.
    #[arg(long, value_name = "NAME")]
    background_class: Option<String>,

    /// Classes reported as subarea separators, comma separated.
    #[arg(long, value_name = "NAME[,NAME...]", value_delimiter = ',')]
    separator_classes: Vec<String>,

    /// Binary background mask (PNG, nonzero = background).
    #[arg(long, value_name = "PATH")]
    mask: Option<PathBuf>,

    #[arg(long, value_name = "N", default_value_t = 10_000)]
    samples: usize,

    #[arg(long, value_name = "N", default_value_t = 16)]
    min_side: usize,

    #[arg(long, value_name = "N", default_value_t = 48)]
    max_side: usize,

    /// Minimum fraction of a crop that must lie on the mask.
    #[arg(long, value_name = "F", default_value_t = 0.9)]
    coverage: f64,

    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,

    #[arg(long, value_name = "autoencoder|descriptor", default_value = "autoencoder")]
    embedder: EmbedderKind,

    /// Autoencoder training epochs.
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,

    /// Candidate cluster counts, comma separated.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "3,4,5,6")]
    k_set: Vec<usize>,

    #[arg(long, value_name = "PATH", default_value = "out")]
    out_dir: PathBuf,

    /// Also write overlay_<id>.png with candidate centres and chosen crops.
    #[arg(long)]
    overlay: bool,

    /// Also write tiled_<id>.png: the weighted texture repeated to WxH.
    #[arg(long, value_name = "WxH", value_parser = parse_dims)]
    tile_preview: Option<(usize, usize)>,

    /// Ground-truth tile (PNG); adds NCC scores and corpus statistics.
    #[arg(long, value_name = "PATH")]
    eval_truth: Option<PathBuf>,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

fn build_config(args: Args) -> Result<PipelineConfig, String> {
    let source = match (args.labels, args.mask) {
        (Some(labels), _) => RegionSource::Labels {
            labels,
            class_map: args.class_map.ok_or("--labels needs --class-map")?,
            background_class: args.background_class.ok_or("--labels needs --background-class")?,
            separator_classes: args.separator_classes,
        },
        (None, Some(mask)) => RegionSource::Mask(mask),
        (None, None) => RegionSource::MaskFree,
    };
    let defaults = TrainConfig::default();
    let params = ExtractionParams {
        sampler: SamplerConfig {
            sample_count: args.samples,
            min_side: args.min_side,
            max_side: args.max_side,
            coverage_threshold: args.coverage,
            max_attempts: SamplerConfig::default().max_attempts.max(args.samples),
            seed: args.seed,
        },
        embedder: args.embedder,
        train: TrainConfig {
            epochs: args.epochs.unwrap_or(defaults.epochs),
            ..defaults
        },
        augmentation: AugmentationSpec::default(),
        k_set: args.k_set,
        seed: args.seed,
    };
    Ok(PipelineConfig {
        image: args.image,
        source,
        params,
        out_dir: args.out_dir,
        overlay: args.overlay,
        tile_preview: args.tile_preview,
        eval_truth: args.eval_truth,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("reptex: cannot set up {n} worker threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("reptex: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let summary = run_pipeline(&cfg);
    if let Some(err) = &summary.report.error {
        eprintln!("reptex: {} error: {}", err.stage, err.message);
    } else {
        for r in &summary.report.regions {
            if let (Some(files), Some(k)) = (&r.outputs, r.selected_k) {
                eprintln!(
                    "subarea {}: {} candidates, k = {k}, wrote {} and {}",
                    r.subarea_id, r.candidate_count, files.texture_plain, files.texture_weighted
                );
            }
        }
    }
    ExitCode::from(summary.exit_code as u8)
}
