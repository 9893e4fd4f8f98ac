//! End-to-end extraction: regions, sampling, embedding, clustering,
//! selection, and the files written for each region.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::cluster::{select_k_scored, ClusterError, KSelection};
use crate::embedder::{
    embed_all, train_on_patches, AugmentationSpec, EmbedderError, EmbedderKind, EmbedderModel, TrainConfig,
    TrainingLog,
};
use crate::evalkit::{corpus_stats, ncc_score, CorpusStats, EvalError};
use crate::raster::{
    load_class_map, load_image, load_labels, load_mask, save_image, MaskRaster, RasterError, RasterImage, Rect,
};
use crate::regions::{find_subareas, min_subarea_pixels, subarea_mask, RegionError};
use crate::rng::derive;
use crate::sampler::{sample_candidates, Candidate, SamplerConfig, SamplerError};
use crate::selector::{select, SelectionResult, SelectorError};
use crate::texops::{render_cluster_overlay, tile_texture};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Input(#[from] RasterError),
    #[error(transparent)]
    Regions(#[from] RegionError),
    #[error(transparent)]
    Sampling(#[from] SamplerError),
    #[error("training failed: {0}")]
    Training(EmbedderError),
    #[error("embedding failed: {0}")]
    Embedding(EmbedderError),
    #[error(transparent)]
    Clustering(#[from] ClusterError),
    #[error(transparent)]
    Selection(#[from] SelectorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Input(_) => "input",
            Self::Regions(_) => "regions",
            Self::Sampling(_) => "sampling",
            Self::Training(_) => "training",
            Self::Embedding(_) => "embedding",
            Self::Clustering(_) => "clustering",
            Self::Selection(_) => "selection",
            Self::Eval(_) => "evaluation",
            Self::Output(_) => "output",
        }
    }

    /// Variant name, used as the error kind in the report.
    pub fn kind(&self) -> String {
        let dbg = match self {
            Self::Config(_) => return "InvalidConfig".into(),
            Self::Output(_) => return "UnwritableOutput".into(),
            Self::Input(e) => format!("{e:?}"),
            Self::Regions(e) => format!("{e:?}"),
            Self::Sampling(e) => format!("{e:?}"),
            Self::Training(e) | Self::Embedding(e) => format!("{e:?}"),
            Self::Clustering(e) => format!("{e:?}"),
            Self::Selection(e) => format!("{e:?}"),
            Self::Eval(e) => format!("{e:?}"),
        };
        dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string()
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input(_) => EXIT_CONFIG,
            Self::Regions(RegionError::BackgroundIsSeparator(_)) => EXIT_CONFIG,
            _ => EXIT_PIPELINE,
        }
    }
}

/// Where the background mask comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionSource {
    /// Whole image is one region.
    MaskFree,
    Mask(PathBuf),
    Labels {
        labels: PathBuf,
        class_map: PathBuf,
        background_class: String,
        separator_classes: Vec<String>,
    },
}

/// Everything one region's extraction depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionParams {
    /// `seed` is ignored; each region derives its own from `seed` below.
    pub sampler: SamplerConfig,
    pub embedder: EmbedderKind,
    pub train: TrainConfig,
    pub augmentation: AugmentationSpec,
    pub k_set: Vec<usize>,
    pub seed: u64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            embedder: EmbedderKind::Autoencoder,
            train: TrainConfig::default(),
            augmentation: AugmentationSpec::default(),
            k_set: vec![3, 4, 5, 6],
            seed: 0,
        }
    }
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut probe = self.sampler.clone();
        probe.seed = 0;
        probe.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.augmentation.validate().map_err(PipelineError::Config)?;
        self.train.arch.validate().map_err(PipelineError::Config)?;
        if self.train.batch_size == 0 || !(self.train.learning_rate > 0.0) {
            return Err(PipelineError::Config("batch size and learning rate must be positive".into()));
        }
        if self.k_set.is_empty() || self.k_set.iter().any(|&k| k < 2) {
            return Err(PipelineError::Config("k_set needs at least one k >= 2".into()));
        }
        Ok(())
    }

    fn region_seed(&self, region: usize) -> u64 {
        derive(self.seed, region as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub image: PathBuf,
    pub source: RegionSource,
    pub params: ExtractionParams,
    pub out_dir: PathBuf,
    pub overlay: bool,
    pub tile_preview: Option<(usize, usize)>,
    pub eval_truth: Option<PathBuf>,
}

/// Everything produced for one region.
#[derive(Debug, Clone)]
pub struct RegionOutcome {
    pub region_id: usize,
    pub candidates: Vec<Candidate>,
    pub embeddings: Vec<Vec<f64>>,
    pub clustering: KSelection,
    pub selection: SelectionResult,
    pub training: Option<TrainingLog>,
    /// `(stage, seconds)` in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

impl RegionOutcome {
    pub fn chosen_plain(&self) -> &Candidate {
        &self.candidates[self.selection.chosen_plain]
    }

    pub fn chosen_weighted(&self) -> &Candidate {
        &self.candidates[self.selection.chosen_weighted]
    }
}

/// Runs sampling, embedding, model selection and the final pick on one
/// masked region. Deterministic in `(image, mask, region_id, params)`.
pub fn process_region(
    image: &RasterImage,
    mask: &MaskRaster,
    region_id: usize,
    params: &ExtractionParams,
) -> Result<RegionOutcome, PipelineError> {
    params.validate()?;
    let seed = params.region_seed(region_id);
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((stage, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let sampler = SamplerConfig {
        seed,
        ..params.sampler.clone()
    };
    let mut candidates = sample_candidates(image, mask, &sampler)?;
    for c in &mut candidates {
        c.subarea_id = region_id;
    }
    lap("sampling", &mut timings);

    let patches: Vec<&RasterImage> = candidates.iter().map(|c| &c.patch).collect();
    let (model, training) = match params.embedder {
        EmbedderKind::Descriptor => (EmbedderModel::descriptor(), None),
        EmbedderKind::Autoencoder => {
            let (m, log) =
                train_on_patches(&patches, &params.augmentation, &params.train, seed).map_err(PipelineError::Training)?;
            lap("training", &mut timings);
            (m, Some(log))
        }
    };
    let embeddings: Vec<Vec<f64>> = embed_all(&model, &patches)
        .map_err(PipelineError::Embedding)?
        .into_iter()
        .map(|e| e.0)
        .collect();
    lap("embedding", &mut timings);

    let clustering = select_k_scored(&embeddings, &params.k_set, seed)?;
    lap("clustering", &mut timings);
    let selection = select(&candidates, &embeddings, &clustering.model)?;
    lap("selection", &mut timings);

    Ok(RegionOutcome {
        region_id,
        candidates,
        embeddings,
        clustering,
        selection,
        training,
        timings,
    })
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub image: String,
    pub mode: &'static str,
    pub labels: Option<String>,
    pub class_map: Option<String>,
    pub background_class: Option<String>,
    pub separator_classes: Option<Vec<String>>,
    pub mask: Option<String>,
    pub samples: usize,
    pub min_side: usize,
    pub max_side: usize,
    pub coverage: f64,
    pub max_attempts: usize,
    pub seed: u64,
    pub embedder: EmbedderKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub canonical_size: usize,
    pub augmentation: AugmentationSpec,
    pub k_set: Vec<usize>,
    pub overlay: bool,
    pub tile_preview: Option<[usize; 2]>,
    pub eval_truth: Option<String>,
}

impl ConfigEcho {
    pub fn new(cfg: &PipelineConfig) -> Self {
        let p = &cfg.params;
        let show = |p: &Path| p.display().to_string();
        let (mode, labels, class_map, background_class, separator_classes, mask) = match &cfg.source {
            RegionSource::MaskFree => ("mask-free", None, None, None, None, None),
            RegionSource::Mask(m) => ("mask", None, None, None, None, Some(show(m))),
            RegionSource::Labels {
                labels,
                class_map,
                background_class,
                separator_classes,
            } => (
                "labels",
                Some(show(labels)),
                Some(show(class_map)),
                Some(background_class.clone()),
                Some(separator_classes.clone()),
                None,
            ),
        };
        Self {
            image: show(&cfg.image),
            mode,
            labels,
            class_map,
            background_class,
            separator_classes,
            mask,
            samples: p.sampler.sample_count,
            min_side: p.sampler.min_side,
            max_side: p.sampler.max_side,
            coverage: p.sampler.coverage_threshold,
            max_attempts: p.sampler.max_attempts,
            seed: p.seed,
            embedder: p.embedder,
            epochs: p.train.epochs,
            batch_size: p.train.batch_size,
            learning_rate: p.train.learning_rate,
            canonical_size: p.train.arch.canonical_size,
            augmentation: p.augmentation,
            k_set: p.k_set.clone(),
            overlay: cfg.overlay,
            tile_preview: cfg.tile_preview.map(|(w, h)| [w, h]),
            eval_truth: cfg.eval_truth.as_deref().map(show),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub stage: &'static str,
    pub kind: String,
    pub message: String,
    pub subarea: Option<usize>,
}

impl ErrorReport {
    pub fn new(e: &PipelineError, subarea: Option<usize>) -> Self {
        Self {
            stage: e.stage(),
            kind: e.kind(),
            message: e.to_string(),
            subarea,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KScore {
    pub k: usize,
    /// `null` when two centroids coincide.
    pub dbi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberReport {
    pub index: usize,
    pub center: [usize; 2],
    pub side: usize,
    pub d: f64,
    pub t: f64,
    pub b: f64,
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChosenReport {
    pub plain: usize,
    pub weighted: usize,
    pub median: usize,
    pub plain_rect: Rect,
    pub weighted_rect: Rect,
    pub median_rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NccReport {
    pub plain: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFiles {
    pub texture_plain: String,
    pub texture_weighted: String,
    pub overlay: Option<String>,
    pub tiled: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub subarea_id: usize,
    pub pixel_count: usize,
    pub bounding_box: Rect,
    pub adjacent_separators: Vec<String>,
    pub candidate_count: usize,
    pub training: Option<TrainingReport>,
    pub dbi: Vec<KScore>,
    pub selected_k: Option<usize>,
    pub cluster_sizes: Vec<usize>,
    pub largest_cluster: Option<usize>,
    pub members: Vec<MemberReport>,
    pub chosen: Option<ChosenReport>,
    pub ncc: Option<NccReport>,
    pub outputs: Option<OutputFiles>,
    pub error: Option<ErrorReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSubarea {
    pub subarea_id: usize,
    pub pixel_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: ConfigEcho,
    pub regions: Vec<RegionReport>,
    pub skipped_subareas: Vec<SkippedSubarea>,
    pub corpus_stats: Option<CorpusStats>,
    pub error: Option<ErrorReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn write_report(report: &Report, out_dir: &Path) -> Result<PathBuf, PipelineError> {
    let path = out_dir.join(REPORT_FILE);
    std::fs::write(&path, report.to_json()).map_err(|e| PipelineError::Output(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn region_report(outcome: &RegionOutcome, region: &RegionInfo) -> RegionReport {
    let sel = &outcome.selection;
    let model = &outcome.clustering.model;
    let members = sel
        .member_indices
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let c = &outcome.candidates[i];
            MemberReport {
                index: i,
                center: [c.center.0, c.center.1],
                side: c.side,
                d: sel.distances[j],
                t: sel.width_factors[j],
                b: sel.boundary_factors[j],
                v: sel.weights[j],
                w: sel.weighted_distances[j],
            }
        })
        .collect();
    RegionReport {
        subarea_id: region.id,
        pixel_count: region.pixel_count,
        bounding_box: region.bounding_box,
        adjacent_separators: region.adjacent_separators.clone(),
        candidate_count: outcome.candidates.len(),
        training: outcome.training.as_ref().map(|l| TrainingReport {
            initial_loss: l.initial_loss,
            final_loss: l.final_loss(),
            epoch_losses: l.epoch_losses.clone(),
        }),
        dbi: outcome
            .clustering
            .scores
            .iter()
            .map(|&(k, dbi)| KScore {
                k,
                dbi: dbi.is_finite().then_some(dbi),
            })
            .collect(),
        selected_k: Some(model.k),
        cluster_sizes: model.cluster_sizes(),
        largest_cluster: Some(sel.cluster_id),
        members,
        chosen: Some(ChosenReport {
            plain: sel.chosen_plain,
            weighted: sel.chosen_weighted,
            median: sel.chosen_median,
            plain_rect: outcome.candidates[sel.chosen_plain].rect(),
            weighted_rect: outcome.candidates[sel.chosen_weighted].rect(),
            median_rect: outcome.candidates[sel.chosen_median].rect(),
        }),
        ncc: None,
        outputs: None,
        error: None,
    }
}

fn failed_region_report(region: &RegionInfo, e: &PipelineError) -> RegionReport {
    RegionReport {
        subarea_id: region.id,
        pixel_count: region.pixel_count,
        bounding_box: region.bounding_box,
        adjacent_separators: region.adjacent_separators.clone(),
        candidate_count: 0,
        training: None,
        dbi: Vec::new(),
        selected_k: None,
        cluster_sizes: Vec::new(),
        largest_cluster: None,
        members: Vec::new(),
        chosen: None,
        ncc: None,
        outputs: None,
        error: Some(ErrorReport::new(e, Some(region.id))),
    }
}

// ---------------------------------------------------------------- running

struct RegionInfo {
    id: usize,
    mask: MaskRaster,
    pixel_count: usize,
    bounding_box: Rect,
    adjacent_separators: Vec<String>,
}

struct Inputs {
    image: RasterImage,
    regions: Vec<RegionInfo>,
    skipped: Vec<SkippedSubarea>,
    truth: Option<RasterImage>,
}

fn mask_bbox(mask: &MaskRaster) -> Rect {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for i in mask.true_indices() {
        let (x, y) = (i % mask.width(), i / mask.width());
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x0 == usize::MAX {
        return Rect::new(0, 0, 0, 0);
    }
    Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs, PipelineError> {
    cfg.params.validate()?;
    if let Some((w, h)) = cfg.tile_preview {
        if w == 0 || h == 0 {
            return Err(PipelineError::Config("tile preview dimensions must be positive".into()));
        }
    }
    let image = load_image(&cfg.image)?;
    let (w, h) = (image.width(), image.height());
    let truth = cfg.eval_truth.as_ref().map(load_image).transpose()?;
    let whole = |mask: MaskRaster| RegionInfo {
        id: 0,
        pixel_count: mask.count_true(),
        bounding_box: mask_bbox(&mask),
        adjacent_separators: Vec::new(),
        mask,
    };
    let mut skipped = Vec::new();
    let regions = match &cfg.source {
        RegionSource::MaskFree => vec![whole(MaskRaster::filled(w, h, true))],
        RegionSource::Mask(path) => {
            let mask = load_mask(path)?;
            if (mask.width(), mask.height()) != (w, h) {
                return Err(PipelineError::Config(format!(
                    "mask is {}x{} but image is {w}x{h}",
                    mask.width(),
                    mask.height()
                )));
            }
            vec![whole(mask)]
        }
        RegionSource::Labels {
            labels,
            class_map,
            background_class,
            separator_classes,
        } => {
            let map = load_class_map(class_map)?;
            let labels = load_labels(labels, &map)?;
            if (labels.width(), labels.height()) != (w, h) {
                return Err(PipelineError::Config(format!(
                    "labels are {}x{} but image is {w}x{h}",
                    labels.width(),
                    labels.height()
                )));
            }
            let bg = labels.class_id(background_class)?;
            let seps = separator_classes
                .iter()
                .map(|n| labels.class_id(n))
                .collect::<Result<Vec<_>, _>>()?;
            let floor = min_subarea_pixels(cfg.params.sampler.min_side);
            let mut kept = Vec::new();
            for sub in find_subareas(&labels, bg, &seps)? {
                if sub.pixel_count() < floor {
                    skipped.push(SkippedSubarea {
                        subarea_id: sub.id,
                        pixel_count: sub.pixel_count(),
                    });
                    continue;
                }
                kept.push(RegionInfo {
                    id: sub.id,
                    mask: subarea_mask(&sub, w, h)?,
                    pixel_count: sub.pixel_count(),
                    bounding_box: sub.bounding_box,
                    adjacent_separators: sub.adjacent_separators.iter().map(|&c| map[&c].clone()).collect(),
                });
            }
            kept
        }
    };
    Ok(Inputs {
        image,
        regions,
        skipped,
        truth,
    })
}

fn save(img: &RasterImage, dir: &Path, name: String) -> Result<String, PipelineError> {
    save_image(img, dir.join(&name)).map_err(|e| PipelineError::Output(e.to_string()))?;
    Ok(name)
}

fn write_region_files(
    cfg: &PipelineConfig,
    image: &RasterImage,
    outcome: &RegionOutcome,
) -> Result<OutputFiles, PipelineError> {
    let id = outcome.region_id;
    let dir = &cfg.out_dir;
    let texture_plain = save(&outcome.chosen_plain().patch, dir, format!("texture_plain_{id}.png"))?;
    let texture_weighted = save(&outcome.chosen_weighted().patch, dir, format!("texture_weighted_{id}.png"))?;
    let overlay = if cfg.overlay {
        let o = render_cluster_overlay(image, &outcome.candidates, &outcome.clustering.model, Some(&outcome.selection));
        Some(save(&o, dir, format!("overlay_{id}.png"))?)
    } else {
        None
    };
    let tiled = match cfg.tile_preview {
        Some((w, h)) => Some(save(
            &tile_texture(&outcome.chosen_weighted().patch, w, h),
            dir,
            format!("tiled_{id}.png"),
        )?),
        None => None,
    };
    Ok(OutputFiles {
        texture_plain,
        texture_weighted,
        overlay,
        tiled,
    })
}

#[derive(Debug, Clone, Serialize)]
struct TimingEntry {
    subarea_id: usize,
    stage: &'static str,
    seconds: f64,
}

/// Result of a full run: the report (also written to disk when possible)
/// and the process exit code.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: Report,
    pub exit_code: i32,
}

/// Runs the whole pipeline and writes textures, previews, `report.json` and
/// a `timings.json` sidecar into `cfg.out_dir`.
///
/// Wall-clock timings live in the sidecar so that the report itself is a
/// pure function of inputs, configuration and seed.
pub fn run_pipeline(cfg: &PipelineConfig) -> RunSummary {
    let mut report = Report {
        config: ConfigEcho::new(cfg),
        regions: Vec::new(),
        skipped_subareas: Vec::new(),
        corpus_stats: None,
        error: None,
    };
    let finish = |mut report: Report, code: i32| {
        let code = match write_report(&report, &cfg.out_dir) {
            Ok(_) => code,
            Err(e) => {
                report.error.get_or_insert(ErrorReport::new(&e, None));
                EXIT_PIPELINE
            }
        };
        RunSummary { report, exit_code: code }
    };

    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        let e = PipelineError::Output(format!("{}: {e}", cfg.out_dir.display()));
        report.error = Some(ErrorReport::new(&e, None));
        return RunSummary {
            report,
            exit_code: EXIT_CONFIG,
        };
    }
    let inputs = match load_inputs(cfg) {
        Ok(i) => i,
        Err(e) => {
            report.error = Some(ErrorReport::new(&e, None));
            return finish(report, e.exit_code());
        }
    };
    report.skipped_subareas = inputs.skipped;

    // regions run one after another; each one parallelizes internally
    let mut timings = Vec::new();
    let mut successes: Vec<(RegionOutcome, usize)> = Vec::new();
    let mut first_error: Option<PipelineError> = None;
    for region in &inputs.regions {
        match process_region(&inputs.image, &region.mask, region.id, &cfg.params) {
            Ok(outcome) => {
                timings.extend(outcome.timings.iter().map(|&(stage, seconds)| TimingEntry {
                    subarea_id: region.id,
                    stage,
                    seconds,
                }));
                let mut rr = region_report(&outcome, region);
                if let Some(truth) = &inputs.truth {
                    rr.ncc = Some(NccReport {
                        plain: ncc_score(&outcome.chosen_plain().patch, truth),
                        weighted: ncc_score(&outcome.chosen_weighted().patch, truth),
                    });
                }
                match write_region_files(cfg, &inputs.image, &outcome) {
                    Ok(files) => rr.outputs = Some(files),
                    Err(e) => {
                        rr.error = Some(ErrorReport::new(&e, Some(region.id)));
                        first_error.get_or_insert(e);
                    }
                }
                report.regions.push(rr);
                successes.push((outcome, report.regions.len() - 1));
            }
            Err(e) => {
                report.regions.push(failed_region_report(region, &e));
                first_error.get_or_insert(e);
            }
        }
    }

    if inputs.truth.is_some() && !successes.is_empty() {
        let entries: Vec<(&SelectionResult, &[Candidate])> =
            successes.iter().map(|(o, _)| (&o.selection, o.candidates.as_slice())).collect();
        report.corpus_stats = corpus_stats(&entries).ok();
    }
    let _ = std::fs::write(
        cfg.out_dir.join(TIMINGS_FILE),
        serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n",
    );

    let code = first_error.as_ref().map_or(EXIT_OK, PipelineError::exit_code);
    report.error = report.regions.iter().find_map(|r| r.error.clone());
    finish(report, code)
}
