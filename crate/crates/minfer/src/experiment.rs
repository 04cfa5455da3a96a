//! End-to-end experiment pipeline over an output directory.
//!
//! A run is five stages — generate data, train target and reference
//! models, train shadows, score attacks, evaluate — each of which can
//! also run on its own against the same directory. Every stage derives
//! its randomness from the config seed through fixed per-stage children,
//! so stages agree on the splits without passing state, reruns are
//! bit-identical, and the manifest's seed table is purely documentary.
//!
//! The data flow: the pool splits into a reserved calibration part
//! (training the reference model the parameter-difference attacks
//! compare against) and the evaluated world, which splits again into
//! target members and held-out non-members. Shadows train on the
//! evaluated world only, so their thresholds exist for exactly the
//! samples that get scored.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::attacks::{
    gaussian_optimal_score, malt_score, mast_score, matt_full_score, matt_score, write_scores_csv,
    zero_one_score, AttackKind, ScoreRecord, TauEstimate,
};
use crate::config::{DataConfig, ExperimentConfig};
use crate::data::{
    draw_split, draw_split_exact, gen_gaussian_dataset, gen_two_class_features, read_dataset_csv,
    write_dataset_csv, Dataset, SplitMode, SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_attack, write_report_json, write_summary_csv, AttackReport};
use crate::models::{
    load_params, save_params, total_hessian, train_gaussian_mean, train_logreg_with,
    HessianFactor, ModelKind, ModelParams, SymMatrix, TrainConfig,
};
use crate::rng::{stage, RngSeed};
use crate::shadow::{
    estimate_tau_global, estimate_tau_per_sample, load_ensemble, save_ensemble, train_shadows,
    ShadowTrainer,
};

/// Relative paths of everything a run writes under its output directory.
#[derive(Debug, Clone)]
pub struct OutLayout {
    root: PathBuf,
}

impl OutLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data.csv")
    }

    pub fn splits(&self) -> PathBuf {
        self.root.join("splits.json")
    }

    pub fn target(&self) -> PathBuf {
        self.root.join("target.json")
    }

    pub fn reference(&self) -> PathBuf {
        self.root.join("reference.json")
    }

    pub fn shadows_dir(&self) -> PathBuf {
        self.root.join("shadows")
    }

    pub fn taus(&self) -> PathBuf {
        self.root.join("taus.json")
    }

    pub fn score(&self, attack: AttackKind) -> PathBuf {
        self.root.join("scores").join(format!("{attack}.csv"))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

/// The seeds each stage derives from the config seed, recorded in the
/// manifest for transparency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub data: u64,
    pub reserve_split: u64,
    pub target_split: u64,
    pub shadows: u64,
    pub eval: u64,
}

impl StageSeeds {
    fn derive(seed: u64) -> Self {
        let root = RngSeed(seed);
        StageSeeds {
            data: root.child(stage::DATA).0,
            reserve_split: root.child(stage::SPLIT).child(0).0,
            target_split: root.child(stage::SPLIT).child(1).0,
            shadows: root.child(stage::SHADOWS).0,
            eval: root.child(stage::EVAL).0,
        }
    }
}

/// Everything needed to reproduce and audit a run. Timestamps live only
/// here, keeping score and report files byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub library_version: String,
    pub config: ExperimentConfig,
    pub seeds: StageSeeds,
    pub artifacts: Vec<String>,
    pub started_at_unix: u64,
    pub finished_at_unix: Option<u64>,
    /// False while the run is in flight or after a failure; artifacts
    /// next to an incomplete manifest are partial.
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|e| Error::format(&display, e.to_string()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Error::format(&display, e.to_string()))
}

/// Load a manifest written by [`run_experiment`].
pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    read_json(path)
}

// ---------------------------------------------------------------------------
// Split derivation (pure functions of the config)
// ---------------------------------------------------------------------------

/// The pool's division for one run: which rows are reserved for the
/// reference model, which rows form the evaluated world, and the target
/// membership split within that world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSplit {
    /// Mask over the full pool; members are the calibration reserve.
    pub reserve: Option<SplitSpec>,
    /// Original pool row of each evaluated sample, in pool order.
    pub eval_indices: Vec<usize>,
    /// Membership split over the evaluated world (positions follow
    /// `eval_indices`).
    pub target: SplitSpec,
}

fn split_with_mode(mode: SplitMode, n: usize, lambda: f64, seed: RngSeed) -> Result<SplitSpec> {
    match mode {
        SplitMode::Bernoulli => draw_split(n, lambda, seed),
        SplitMode::Exact => draw_split_exact(n, lambda, seed),
    }
}

/// Derive the run's splits from the config alone.
pub fn derive_world_split(config: &ExperimentConfig) -> Result<WorldSplit> {
    let n = config.data.n();
    let split_seed = RngSeed(config.seed).child(stage::SPLIT);
    let reserve = if config.split.calibration_fraction > 0.0 {
        Some(split_with_mode(
            config.split.mode,
            n,
            config.split.calibration_fraction,
            split_seed.child(0),
        )?)
    } else {
        None
    };
    let eval_indices: Vec<usize> = match &reserve {
        Some(r) => (0..n).filter(|&i| !r.is_member(i)).collect(),
        None => (0..n).collect(),
    };
    if eval_indices.len() < 2 {
        return Err(Error::Data(format!(
            "only {} samples left to evaluate after reserving calibration data",
            eval_indices.len()
        )));
    }
    let target = split_with_mode(
        config.split.mode,
        eval_indices.len(),
        config.split.lambda,
        split_seed.child(1),
    )?;
    Ok(WorldSplit {
        reserve,
        eval_indices,
        target,
    })
}

/// The evaluated world as its own dataset, rows ordered by
/// `eval_indices`.
pub fn eval_pool(data: &Dataset, world: &WorldSplit) -> Result<Dataset> {
    let samples = world
        .eval_indices
        .iter()
        .map(|&i| data.sample(i).clone())
        .collect();
    Dataset::new(samples, data.num_classes())
}

#[derive(Serialize, Deserialize)]
struct SplitsFile {
    lambda: f64,
    calibration_fraction: f64,
    reserve_mask: Option<String>,
    target_mask: String,
    eval_indices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TausFile {
    global: f64,
    ensemble_accuracy: f64,
    global_degenerate: bool,
    per_sample: Vec<f64>,
    mean_balanced_accuracy: f64,
    degenerate_count: usize,
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

fn load_pool(config: &ExperimentConfig, layout: &OutLayout) -> Result<Dataset> {
    let data = read_dataset_csv(&layout.data())?;
    if data.len() != config.data.n() || data.dim() != config.data.d() {
        return Err(Error::Data(format!(
            "{} holds {} samples of dimension {}, but the config says n = {}, d = {}",
            layout.data().display(),
            data.len(),
            data.dim(),
            config.data.n(),
            config.data.d()
        )));
    }
    Ok(data)
}

/// Generate the pool and write `data.csv`. Refuses to overwrite an
/// existing file unless `force` is set.
pub fn stage_gen_data(config: &ExperimentConfig, layout: &OutLayout, force: bool) -> Result<()> {
    config.validate()?;
    let path = layout.data();
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    std::fs::create_dir_all(layout.root())
        .map_err(|e| Error::io(layout.root().display().to_string(), e))?;
    let seed = RngSeed(config.seed).child(stage::DATA);
    let data = match &config.data {
        DataConfig::Gaussian { n, d, .. } => {
            gen_gaussian_dataset(*n, *d, &config.data.center(), seed)?
        }
        DataConfig::TwoClass { n, d, separation } => {
            gen_two_class_features(*n, *d, *separation, seed)?
        }
    };
    write_dataset_csv(&data, &path)
}

/// Derive splits, train the target model on the evaluated world's
/// members, and train the reference model on the reserve when one is
/// configured. Writes `splits.json`, `target.json`, `reference.json`.
pub fn stage_train(config: &ExperimentConfig, layout: &OutLayout) -> Result<()> {
    config.validate()?;
    let data = load_pool(config, layout)?;
    let world = derive_world_split(config)?;
    let pool = eval_pool(&data, &world)?;

    let trainer_config = TrainConfig {
        l2: config.model.l2,
        tol: config.model.tol,
        max_iter: config.model.max_iter,
    };
    let train = |data: &Dataset, split: &SplitSpec| -> Result<ModelParams> {
        match config.model.kind {
            ModelKind::GaussianMean => train_gaussian_mean(data, split),
            ModelKind::LogisticRegression => train_logreg_with(data, split, &trainer_config),
        }
    };

    let target = train(&pool, &world.target)?;
    save_params(&target, &layout.target())?;

    if let Some(reserve) = &world.reserve {
        let reference = train(&data, reserve)?;
        save_params(&reference, &layout.reference())?;
    }

    write_json(
        &SplitsFile {
            lambda: config.split.lambda,
            calibration_fraction: config.split.calibration_fraction,
            reserve_mask: world.reserve.as_ref().map(|r| r.mask_string()),
            target_mask: world.target.mask_string(),
            eval_indices: world.eval_indices.clone(),
        },
        &layout.splits(),
    )
}

/// Train the shadow ensemble on the evaluated world and estimate both
/// threshold families. Writes `shadows/` and `taus.json`; does nothing
/// when `shadows.k = 0`.
pub fn stage_shadow(config: &ExperimentConfig, layout: &OutLayout) -> Result<()> {
    config.validate()?;
    if config.shadows.k == 0 {
        return Ok(());
    }
    let data = load_pool(config, layout)?;
    let world = derive_world_split(config)?;
    let pool = eval_pool(&data, &world)?;
    let trainer = match config.model.kind {
        ModelKind::GaussianMean => ShadowTrainer::GaussianMean,
        ModelKind::LogisticRegression => ShadowTrainer::LogisticRegression {
            l2: config.model.l2,
            tol: config.model.tol,
        },
    };
    let ensemble = train_shadows(
        &pool,
        config.shadows.k,
        config.shadows.member_fraction,
        RngSeed(config.seed).child(stage::SHADOWS),
        trainer,
    )?;
    save_ensemble(&ensemble, &layout.shadows_dir())?;

    let global = estimate_tau_global(&ensemble)?;
    let per_sample = estimate_tau_per_sample(&ensemble)?;
    write_json(
        &TausFile {
            global: global.tau,
            ensemble_accuracy: global.ensemble_accuracy,
            global_degenerate: global.degenerate,
            per_sample: per_sample.taus,
            mean_balanced_accuracy: per_sample.mean_balanced_accuracy,
            degenerate_count: per_sample.degenerate_count,
        },
        &layout.taus(),
    )
}

/// Score every evaluated sample with every configured attack, one CSV
/// per attack under `scores/`.
pub fn stage_attack(config: &ExperimentConfig, layout: &OutLayout) -> Result<()> {
    config.validate()?;
    let data = load_pool(config, layout)?;
    let world = derive_world_split(config)?;
    let pool = eval_pool(&data, &world)?;
    let target = load_params(&layout.target())?;

    // lazily loaded prerequisites, shared across attacks
    let mut reference: Option<ModelParams> = None;
    let mut hessian: Option<HessianFactor> = None;
    let mut taus: Option<TauEstimate> = None;

    let scores_dir = layout.score(AttackKind::Malt);
    let scores_dir = scores_dir.parent().expect("score path has a parent");
    std::fs::create_dir_all(scores_dir)
        .map_err(|e| Error::io(scores_dir.display().to_string(), e))?;

    for &attack in &config.attacks {
        if matches!(attack, AttackKind::Matt | AttackKind::MattFull) && reference.is_none() {
            reference = Some(load_params(&layout.reference())?);
        }
        if attack == AttackKind::MattFull && hessian.is_none() {
            let reference = reference.as_ref().expect("reference loaded above");
            let matrix = match config.model.kind {
                // the quadratic loss has the identity as its Hessian
                ModelKind::GaussianMean => {
                    let mut eye = SymMatrix::zeros(pool.dim());
                    eye.add_diagonal(1.0);
                    eye
                }
                ModelKind::LogisticRegression => {
                    let reserve = world.reserve.as_ref().ok_or_else(|| {
                        Error::Calibration(
                            "matt_full needs the calibration reserve the reference model \
                             was trained on"
                                .into(),
                        )
                    })?;
                    total_hessian(reference, &data, reserve, config.model.l2)?
                }
            };
            hessian = Some(HessianFactor::new(&matrix)?);
        }
        if attack == AttackKind::Mast && taus.is_none() {
            let file: TausFile = read_json(&layout.taus()).map_err(|_| {
                Error::Calibration(
                    "mast needs per-sample thresholds; run the shadow stage first".into(),
                )
            })?;
            taus = Some(TauEstimate::per_sample(file.per_sample)?);
        }

        let mu = config.data.center();
        let n_prime = world.target.member_count();
        let records: Vec<ScoreRecord> = pool
            .samples()
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let score = match attack {
                    AttackKind::ZeroOne => zero_one_score(&target, z),
                    AttackKind::Malt => malt_score(&target, z),
                    AttackKind::Mast => {
                        mast_score(&target, z, i, taus.as_ref().expect("taus loaded above"))
                    }
                    AttackKind::GaussianOptimal => {
                        gaussian_optimal_score(&target, z, &mu, n_prime)
                    }
                    AttackKind::Matt => {
                        matt_score(&target, reference.as_ref().expect("loaded above"), z)
                    }
                    AttackKind::MattFull => matt_full_score(
                        &target,
                        reference.as_ref().expect("loaded above"),
                        z,
                        hessian.as_ref().expect("factored above"),
                    ),
                }?;
                ScoreRecord::new(world.eval_indices[i], score, world.target.is_member(i))
            })
            .collect::<Result<_>>()?;
        write_scores_csv(&layout.score(attack), attack, &records)?;
    }
    Ok(())
}

/// Evaluate every configured attack's score file into `report.json` and
/// `summary.csv`, returning the reports in config order.
pub fn stage_eval(config: &ExperimentConfig, layout: &OutLayout) -> Result<Vec<AttackReport>> {
    config.validate()?;
    let mut reports = Vec::with_capacity(config.attacks.len());
    for &attack in &config.attacks {
        let (kind, records) = crate::attacks::read_scores_csv(&layout.score(attack))?;
        if kind != attack {
            return Err(Error::Evaluation(format!(
                "{} holds {kind} scores, expected {attack}",
                layout.score(attack).display()
            )));
        }
        reports.push(evaluate_attack(
            attack,
            &records,
            RngSeed(config.seed).child(stage::EVAL),
            config.eval.cv_folds,
        )?);
    }
    write_report_json(&layout.report(), &reports)?;
    write_summary_csv(&layout.summary(), &reports)?;
    Ok(reports)
}

/// Run all stages into `out`, writing a manifest alongside the
/// artifacts. An existing manifest makes the directory refuse a rerun
/// without `force`; while stages run the manifest is marked incomplete,
/// and a failure leaves it that way with the error recorded.
pub fn run_experiment(
    config: &ExperimentConfig,
    out: &Path,
    force: bool,
) -> Result<(Vec<AttackReport>, RunManifest)> {
    config.validate()?;
    let layout = OutLayout::new(out);
    if layout.manifest().exists() && !force {
        return Err(Error::Config(format!(
            "{} already holds a run; pass --force to overwrite",
            out.display()
        )));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;

    let mut artifacts: Vec<String> = vec![
        "data.csv".into(),
        "splits.json".into(),
        "target.json".into(),
    ];
    if config.split.calibration_fraction > 0.0 {
        artifacts.push("reference.json".into());
    }
    if config.shadows.k > 0 {
        artifacts.push("shadows".into());
        artifacts.push("taus.json".into());
    }
    for &attack in &config.attacks {
        artifacts.push(format!("scores/{attack}.csv"));
    }
    artifacts.push("report.json".into());
    artifacts.push("summary.csv".into());

    let mut manifest = RunManifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seeds: StageSeeds::derive(config.seed),
        artifacts,
        started_at_unix: unix_now(),
        finished_at_unix: None,
        complete: false,
        error: None,
    };
    write_json(&manifest, &layout.manifest())?;

    let stages = || -> Result<Vec<AttackReport>> {
        stage_gen_data(config, &layout, true)?;
        stage_train(config, &layout)?;
        stage_shadow(config, &layout)?;
        stage_attack(config, &layout)?;
        stage_eval(config, &layout)
    };
    match stages() {
        Ok(reports) => {
            manifest.finished_at_unix = Some(unix_now());
            manifest.complete = true;
            write_json(&manifest, &layout.manifest())?;
            Ok((reports, manifest))
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            // best effort: the original failure matters more than a
            // manifest write error
            let _ = write_json(&manifest, &layout.manifest());
            Err(e)
        }
    }
}

/// Re-run the experiment a manifest describes. With identical library
/// version this reproduces the original reports bit for bit.
pub fn replay_manifest(
    manifest: &RunManifest,
    out: &Path,
    force: bool,
) -> Result<(Vec<AttackReport>, RunManifest)> {
    run_experiment(&manifest.config, out, force)
}

/// Load the shadow ensemble of a finished run (needed by callers that
/// want to inspect calibration quality after the fact).
pub fn load_run_ensemble(config: &ExperimentConfig, layout: &OutLayout) -> Result<crate::shadow::ShadowEnsemble> {
    let data = load_pool(config, layout)?;
    let world = derive_world_split(config)?;
    let pool = eval_pool(&data, &world)?;
    load_ensemble(&layout.shadows_dir(), &pool)
}
