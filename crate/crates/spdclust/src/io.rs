//! Dataset files, connectivity-matrix ingestion, experiment configuration,
//! the benchmark driver, and result emission.
//!
//! The dataset format is a single JSON header line followed by a raw
//! little-endian float64 payload (row-major matrices, then u64 labels when
//! present), so round trips are bit-exact and any language can parse it.
//!
//! An [`ExperimentConfig`] pins a generator, an algorithm and every
//! hyperparameter; [`run_experiment`] derives one seed per repetition from
//! the master seed, so repetitions are independent of execution order (they
//! run sequentially here — the numeric targets are single-core) and the
//! whole table is reproducible bitwise, wall-clock columns excepted.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    cluster_arc, cluster_fmc, cluster_irc, cluster_lec, KMeansConfig, KMeansInit, Partition,
};
use crate::embed::FrechetMapSpec;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, MeanMethod};
use crate::mean::{DispersionMetric, MeanInit, MeanSolverConfig};
use crate::refpoints::{select_principled, select_random, PrincipledParams};
use crate::rng::derive_seed;
use crate::spd::SpdMatrix;
use crate::synth::{gen_ball_config, gen_mirror_config, BallConfig, MirrorConfig};

/// Version written into and required from dataset headers.
pub const FORMAT_VERSION: u32 = 1;

/// JSON header line of a dataset file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    /// Matrix side length.
    pub n: usize,
    /// Number of matrices.
    #[serde(rename = "N")]
    pub count: usize,
    pub has_labels: bool,
    /// Free-form record of how the data was produced.
    pub provenance: String,
}

/// A parsed dataset file: validated matrices plus optional ground truth.
#[derive(Clone, Debug)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub points: Vec<SpdMatrix>,
    pub labels: Option<Vec<usize>>,
}

fn check_dataset_shape(points: &[SpdMatrix], labels: Option<&[usize]>) -> Result<usize> {
    let first = points.first().ok_or(Error::TooFewPoints { needed: 1, got: 0 })?;
    let n = first.dim();
    for (i, p) in points.iter().enumerate() {
        if p.dim() != n {
            return Err(Error::DimMismatch {
                expected: n,
                got: p.dim(),
            }
            .at_index(i));
        }
    }
    if let Some(labels) = labels {
        if labels.len() != points.len() {
            return Err(Error::DimMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
    }
    Ok(n)
}

/// Writes matrices (and labels, when given) to `path` in the header +
/// little-endian payload format. The byte stream is a pure function of the
/// inputs, so save → load → save reproduces the file exactly.
pub fn save_dataset(
    path: &Path,
    points: &[SpdMatrix],
    labels: Option<&[usize]>,
    provenance: &str,
) -> Result<()> {
    let n = check_dataset_shape(points, labels)?;
    let header = DatasetHeader {
        format_version: FORMAT_VERSION,
        n,
        count: points.len(),
        has_labels: labels.is_some(),
        provenance: provenance.to_string(),
    };
    let header_line = serde_json::to_string(&header)
        .map_err(|e| Error::Io(format!("header serialization failed: {e}")))?;
    let mut bytes = Vec::with_capacity(header_line.len() + 1 + points.len() * n * n * 8);
    bytes.extend_from_slice(header_line.as_bytes());
    bytes.push(b'\n');
    for p in points {
        // Row-major: walk the transpose's column-major storage.
        for &v in p.matrix().transpose().as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(labels) = labels {
        for &l in labels {
            bytes.extend_from_slice(&(l as u64).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Convenience wrapper saving a generated dataset with its labels.
pub fn save_labeled(
    path: &Path,
    points: &[SpdMatrix],
    labels: &[usize],
    provenance: &str,
) -> Result<()> {
    save_dataset(path, points, Some(labels), provenance)
}

fn parse_error(offset: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        detail: detail.into(),
    }
}

/// Loads and validates a dataset file. Every matrix must pass SPD
/// validation; a failure names the offending index. Malformed bytes are
/// reported with the offset at which parsing stopped.
pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_error(bytes.len(), "missing header line terminator"))?;
    let header: DatasetHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| parse_error(e.column().saturating_sub(1), format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(parse_error(
            0,
            format!(
                "unsupported format version {} (this build reads {FORMAT_VERSION})",
                header.format_version
            ),
        ));
    }
    if header.n == 0 || header.count == 0 {
        return Err(parse_error(0, "header declares an empty dataset"));
    }

    let payload_start = newline + 1;
    let matrix_bytes = header.n * header.n * 8;
    let label_bytes = if header.has_labels {
        header.count * 8
    } else {
        0
    };
    let expected = header.count * matrix_bytes + label_bytes;
    let actual = bytes.len() - payload_start;
    if actual < expected {
        return Err(parse_error(
            bytes.len(),
            format!("payload truncated: expected {expected} bytes after the header, found {actual}"),
        ));
    }
    if actual > expected {
        return Err(parse_error(
            payload_start + expected,
            format!("{} trailing bytes after the declared payload", actual - expected),
        ));
    }

    let mut points = Vec::with_capacity(header.count);
    for i in 0..header.count {
        let start = payload_start + i * matrix_bytes;
        let entries: Vec<f64> = bytes[start..start + matrix_bytes]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk is 8 bytes")))
            .collect();
        let mat = DMatrix::from_row_slice(header.n, header.n, &entries);
        points.push(SpdMatrix::new(mat).map_err(|e| e.at_index(i))?);
    }

    let labels = if header.has_labels {
        let start = payload_start + header.count * matrix_bytes;
        Some(
            bytes[start..]
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().expect("chunk is 8 bytes")) as usize)
                .collect(),
        )
    } else {
        None
    };

    Ok(DatasetFile {
        header,
        points,
        labels,
    })
}

/// Completes strict-upper-triangle connectivity entries (row-major order:
/// (0,1), (0,2), …, (n-2,n-1)) into an SPD matrix: unit diagonal, symmetric
/// mirror, then `(A + A^T)/2 + eps·I`. Fails with the measured smallest
/// eigenvalue if the jitter `eps` was not enough, so the caller can raise it.
pub fn complete_upper_triangular(entries: &[f64], n: usize, eps: f64) -> Result<SpdMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "matrix dimension must be at least 1".into(),
        ));
    }
    let expected = n * (n - 1) / 2;
    if entries.len() != expected {
        return Err(Error::DimMismatch {
            expected,
            got: entries.len(),
        });
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(
            "perturbation eps must be finite and non-negative".into(),
        ));
    }
    let mut a = DMatrix::identity(n, n);
    let mut next = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = entries[next];
            a[(j, i)] = entries[next];
            next += 1;
        }
    }
    let jittered = (&a + a.transpose()) * 0.5 + DMatrix::identity(n, n) * eps;
    SpdMatrix::new(jittered)
}

/// Which data source an experiment runs on. Generator seeds are injected
/// per repetition, so they are not part of the spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum GeneratorSpec {
    Ball {
        k: usize,
        n: usize,
        d_low: f64,
        d_up: f64,
        samples_per_ball: usize,
    },
    Mirror {
        n: usize,
        samples_per_ball: usize,
    },
    File {
        path: PathBuf,
    },
}

/// The five clustering pipelines under benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Irc,
    Arc,
    Lec,
    Fmc1,
    Fmc2,
}

impl Algorithm {
    /// Table name of the pipeline.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Irc => "IRC",
            Algorithm::Arc => "ARC",
            Algorithm::Lec => "LEC",
            Algorithm::Fmc1 => "1-FMC",
            Algorithm::Fmc2 => "2-FMC",
        }
    }

    /// Distance exponent of the embedding, for the two map pipelines.
    pub fn map_exponent(self) -> Option<u8> {
        match self {
            Algorithm::Fmc1 => Some(1),
            Algorithm::Fmc2 => Some(2),
            _ => None,
        }
    }
}

/// How the map pipelines choose their reference points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum RefStrategy {
    Random {
        count: usize,
    },
    Principled {
        t_close: f64,
        t_far: f64,
        n_rho: usize,
        eps_d: f64,
        quantile: f64,
    },
}

impl RefStrategy {
    fn describe(&self) -> String {
        match self {
            RefStrategy::Random { count } => format!("random(l={count})"),
            RefStrategy::Principled {
                t_close,
                t_far,
                n_rho,
                eps_d,
                quantile,
            } => format!(
                "principled(t_close={t_close},t_far={t_far},eps_d={eps_d},quantile={quantile},n_rho={n_rho})"
            ),
        }
    }
}

/// Serializable k-means controls; the seed is injected per repetition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KMeansSettings {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansSettings {
    pub fn new(k: usize) -> Self {
        let defaults = KMeansConfig::new(k, 0);
        Self {
            k,
            restarts: defaults.restarts,
            max_iter: defaults.max_iter,
        }
    }

    /// Full k-means configuration with the given seed injected.
    pub fn to_kmeans_config(&self, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            restarts: self.restarts,
            max_iter: self.max_iter,
            seed,
            init: KMeansInit::KMeansPP,
        }
    }
}

/// Serializable gradient-solver controls (first-point initialization).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanSettings {
    pub eta: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for MeanSettings {
    fn default() -> Self {
        let d = MeanSolverConfig::default();
        Self {
            eta: d.eta,
            grad_tol: d.grad_tol,
            max_iter: d.max_iter,
        }
    }
}

impl MeanSettings {
    /// Full gradient-solver configuration (first-point initialization).
    pub fn to_solver_config(&self) -> MeanSolverConfig {
        MeanSolverConfig {
            eta: self.eta,
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            init: MeanInit::default(),
        }
    }
}

/// How partitions are scored: the dispersion metric and the mean estimator
/// used to recompute centroids from labels.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalSettings {
    pub metric: DispersionMetric,
    pub mean_method: MeanMethod,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            metric: DispersionMetric::Affine,
            mean_method: MeanMethod::Icm,
        }
    }
}

/// Everything needed to reproduce one benchmark: data source, pipeline,
/// hyperparameters, repetitions and the master seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub algorithm: Algorithm,
    /// Required for the map pipelines, ignored by the rest.
    pub refs: Option<RefStrategy>,
    pub kmeans: KMeansSettings,
    pub mean: MeanSettings,
    pub eval: EvalSettings,
    pub repetitions: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::InvalidArgument(
                "at least one repetition is required".into(),
            ));
        }
        if self.algorithm.map_exponent().is_some() && self.refs.is_none() {
            return Err(Error::InvalidArgument(format!(
                "{} requires a reference-point strategy",
                self.algorithm.name()
            )));
        }
        Ok(())
    }
}

/// One repetition's outcome. Failed repetitions keep their row (status
/// "failed", numeric columns NaN) so a single bad draw cannot hide the rest
/// of the batch.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub repetition: usize,
    /// Per-repetition seed derived from the master seed; enough, together
    /// with the echoed hyperparameters, to re-run the row standalone.
    pub seed: u64,
    pub algorithm: String,
    pub ref_strategy: String,
    pub status: String,
    pub accuracy: f64,
    pub totdisp: f64,
    pub normalized_totdisp: f64,
    pub gen_seconds: f64,
    pub refs_seconds: f64,
    pub cluster_seconds: f64,
    pub eval_seconds: f64,
    pub total_seconds: f64,
    pub error: String,
}

/// Per-algorithm aggregate over a table's successful rows.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub repetitions: usize,
    pub failures: usize,
    pub accuracy_mean: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for a single row).
    pub accuracy_std: f64,
    pub accuracy_min: f64,
    /// Nearest-rank 10th percentile.
    pub accuracy_p10: f64,
    pub normalized_totdisp_mean: f64,
    /// Mean of refs + clustering wall-clock (the per-method work; data
    /// generation and scoring are shared overhead).
    pub runtime_mean_seconds: f64,
    /// IRC's mean runtime over this algorithm's; NaN when the table has no
    /// IRC rows, 1 for IRC itself.
    pub speedup_vs_irc: f64,
}

/// Result rows plus their per-algorithm summary.
#[derive(Clone, Debug, Serialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

impl ResultsTable {
    pub fn from_rows(rows: Vec<ResultRow>) -> Self {
        let summary = summarize(&rows);
        Self { rows, summary }
    }

    /// Concatenates tables (e.g. one per algorithm over a shared generator)
    /// and re-summarizes, which is what makes cross-algorithm speedups
    /// appear.
    pub fn merge(tables: Vec<ResultsTable>) -> Self {
        let rows = tables.into_iter().flat_map(|t| t.rows).collect();
        Self::from_rows(rows)
    }
}

fn method_runtime(row: &ResultRow) -> f64 {
    row.refs_seconds + row.cluster_seconds
}

fn nearest_rank(sorted: &[f64], quantile: f64) -> f64 {
    let rank = ((quantile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Groups rows by algorithm (first-appearance order) and computes the
/// summary statistics over successful rows.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for row in rows {
        if !order.contains(&row.algorithm.as_str()) {
            order.push(&row.algorithm);
        }
    }
    let mut summary: Vec<SummaryRow> = order
        .iter()
        .map(|&name| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| r.algorithm == name).collect();
            let ok: Vec<&ResultRow> = group.iter().copied().filter(|r| r.status == "ok").collect();
            let failures = group.len() - ok.len();
            let (mean, std, min, p10, norm_mean, runtime_mean) = if ok.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            } else {
                let count = ok.len() as f64;
                let mut accs: Vec<f64> = ok.iter().map(|r| r.accuracy).collect();
                accs.sort_by(|a, b| a.total_cmp(b));
                let mean = accs.iter().sum::<f64>() / count;
                let std = if ok.len() > 1 {
                    (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
                } else {
                    0.0
                };
                let norm_mean =
                    ok.iter().map(|r| r.normalized_totdisp).sum::<f64>() / count;
                let runtime_mean = ok.iter().map(|r| method_runtime(r)).sum::<f64>() / count;
                (
                    mean,
                    std,
                    accs[0],
                    nearest_rank(&accs, 0.10),
                    norm_mean,
                    runtime_mean,
                )
            };
            SummaryRow {
                algorithm: name.to_string(),
                repetitions: group.len(),
                failures,
                accuracy_mean: mean,
                accuracy_std: std,
                accuracy_min: min,
                accuracy_p10: p10,
                normalized_totdisp_mean: norm_mean,
                runtime_mean_seconds: runtime_mean,
                speedup_vs_irc: f64::NAN,
            }
        })
        .collect();
    let irc_runtime = summary
        .iter()
        .find(|s| s.algorithm == Algorithm::Irc.name())
        .map(|s| s.runtime_mean_seconds);
    if let Some(irc) = irc_runtime {
        for s in &mut summary {
            s.speedup_vs_irc = irc / s.runtime_mean_seconds;
        }
    }
    summary
}

struct PreparedData {
    points: Vec<SpdMatrix>,
    labels: Vec<usize>,
    k_true: usize,
}

fn build_dataset(generator: &GeneratorSpec, seed: u64) -> Result<PreparedData> {
    match generator {
        GeneratorSpec::Ball {
            k,
            n,
            d_low,
            d_up,
            samples_per_ball,
        } => {
            let cfg = BallConfig::new(*k, *n, *d_low, *d_up, *samples_per_ball, seed);
            let ds = gen_ball_config(&cfg)?;
            Ok(PreparedData {
                k_true: ds.k(),
                points: ds.points,
                labels: ds.labels,
            })
        }
        GeneratorSpec::Mirror { n, samples_per_ball } => {
            let cfg = MirrorConfig::new(*n, *samples_per_ball, seed);
            let ds = gen_mirror_config(&cfg)?;
            Ok(PreparedData {
                k_true: ds.k(),
                points: ds.points,
                labels: ds.labels,
            })
        }
        GeneratorSpec::File { path } => {
            let file = load_dataset(path)?;
            let labels = file.labels.ok_or_else(|| {
                Error::InvalidArgument(
                    "dataset file carries no labels; benchmark evaluation needs ground truth"
                        .into(),
                )
            })?;
            let k_true = labels.iter().max().map_or(0, |&m| m + 1);
            Ok(PreparedData {
                points: file.points,
                labels,
                k_true,
            })
        }
    }
}

fn select_references(
    strategy: &RefStrategy,
    data: &[SpdMatrix],
    k: usize,
    kmeans: &KMeansSettings,
    seed: u64,
) -> Result<Vec<SpdMatrix>> {
    match strategy {
        RefStrategy::Random { count } => select_random(data, *count, seed),
        RefStrategy::Principled {
            t_close,
            t_far,
            n_rho,
            eps_d,
            quantile,
        } => {
            let params = PrincipledParams {
                t_close: *t_close,
                t_far: *t_far,
                n_rho: *n_rho,
                eps_d: *eps_d,
                quantile: *quantile,
                seed,
            };
            let pre_cfg = kmeans.to_kmeans_config(derive_seed(seed, 1));
            select_principled(data, k, &params, &pre_cfg).map(|(refs, _)| refs)
        }
    }
}

// Stage-seed salts, distinct so no two stages consume the same stream.
const SALT_GEN: u64 = 1;
const SALT_REFS: u64 = 2;
const SALT_KMEANS: u64 = 3;
const SALT_ORDER: u64 = 4;

struct RepOutcome {
    report: EvalReport,
    gen_seconds: f64,
    refs_seconds: f64,
    cluster_seconds: f64,
    eval_seconds: f64,
}

fn cluster_with(
    cfg: &ExperimentConfig,
    data: &[SpdMatrix],
    refs: Option<Vec<SpdMatrix>>,
    seed: u64,
) -> Result<Partition> {
    let kcfg = cfg.kmeans.to_kmeans_config(derive_seed(seed, SALT_KMEANS));
    match cfg.algorithm {
        Algorithm::Irc => cluster_irc(data, &kcfg, &cfg.mean.to_solver_config()),
        Algorithm::Arc => cluster_arc(data, &kcfg, derive_seed(seed, SALT_ORDER)),
        Algorithm::Lec => cluster_lec(data, &kcfg, None),
        Algorithm::Fmc1 | Algorithm::Fmc2 => {
            let p = cfg.algorithm.map_exponent().expect("map pipeline");
            let refs = refs.expect("validated: map pipelines carry references");
            let spec = FrechetMapSpec::new(refs, p)?;
            cluster_fmc(data, &spec, &kcfg)
        }
    }
}

fn try_repetition(cfg: &ExperimentConfig, seed: u64) -> Result<RepOutcome> {
    let t = Instant::now();
    let data = build_dataset(&cfg.generator, derive_seed(seed, SALT_GEN))?;
    let gen_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let refs = match (&cfg.refs, cfg.algorithm.map_exponent()) {
        (Some(strategy), Some(_)) => Some(select_references(
            strategy,
            &data.points,
            cfg.kmeans.k,
            &cfg.kmeans,
            derive_seed(seed, SALT_REFS),
        )?),
        _ => None,
    };
    let refs_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let partition = cluster_with(cfg, &data.points, refs, seed)?;
    let cluster_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    // A single label range covering both sides, so a deliberate k mismatch
    // still evaluates (extra rows/columns stay empty).
    let k_eval = cfg.kmeans.k.max(data.k_true);
    let mut report = evaluate(
        &data.points,
        &data.labels,
        &partition.labels,
        k_eval,
        cfg.eval.metric,
        cfg.eval.mean_method,
    )?;
    let eval_seconds = t.elapsed().as_secs_f64();

    report.runtime_seconds.insert("generate".into(), gen_seconds);
    report.runtime_seconds.insert("refs".into(), refs_seconds);
    report
        .runtime_seconds
        .insert("cluster".into(), cluster_seconds);
    report.runtime_seconds.insert("evaluate".into(), eval_seconds);
    Ok(RepOutcome {
        report,
        gen_seconds,
        refs_seconds,
        cluster_seconds,
        eval_seconds,
    })
}

/// Runs every repetition of the configured experiment, one derived seed per
/// repetition. A failing repetition is recorded as a failed row rather than
/// aborting the batch; configuration errors still fail fast.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let ref_strategy = match (&cfg.refs, cfg.algorithm.map_exponent()) {
        (Some(s), Some(_)) => s.describe(),
        _ => "none".to_string(),
    };
    let mut rows = Vec::with_capacity(cfg.repetitions);
    for repetition in 0..cfg.repetitions {
        let seed = derive_seed(cfg.master_seed, repetition as u64);
        let row = match try_repetition(cfg, seed) {
            Ok(outcome) => ResultRow {
                repetition,
                seed,
                algorithm: cfg.algorithm.name().to_string(),
                ref_strategy: ref_strategy.clone(),
                status: "ok".to_string(),
                accuracy: outcome.report.accuracy,
                totdisp: outcome.report.totdisp,
                normalized_totdisp: outcome.report.normalized_totdisp,
                gen_seconds: outcome.gen_seconds,
                refs_seconds: outcome.refs_seconds,
                cluster_seconds: outcome.cluster_seconds,
                eval_seconds: outcome.eval_seconds,
                total_seconds: outcome.gen_seconds
                    + outcome.refs_seconds
                    + outcome.cluster_seconds
                    + outcome.eval_seconds,
                error: String::new(),
            },
            Err(e) => ResultRow {
                repetition,
                seed,
                algorithm: cfg.algorithm.name().to_string(),
                ref_strategy: ref_strategy.clone(),
                status: "failed".to_string(),
                accuracy: f64::NAN,
                totdisp: f64::NAN,
                normalized_totdisp: f64::NAN,
                gen_seconds: f64::NAN,
                refs_seconds: f64::NAN,
                cluster_seconds: f64::NAN,
                eval_seconds: f64::NAN,
                total_seconds: f64::NAN,
                error: e.to_string(),
            },
        };
        rows.push(row);
    }
    Ok(ResultsTable::from_rows(rows))
}

/// Output formats for [`emit_results`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Formats a float with six significant digits (CSV precision). NaN prints
/// as `NaN` so failed rows stay visible in the table.
fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

const ROW_COLUMNS: [&str; 14] = [
    "repetition",
    "seed",
    "algorithm",
    "ref_strategy",
    "status",
    "accuracy",
    "totdisp",
    "normalized_totdisp",
    "gen_seconds",
    "refs_seconds",
    "cluster_seconds",
    "eval_seconds",
    "total_seconds",
    "error",
];

const SUMMARY_COLUMNS: [&str; 10] = [
    "algorithm",
    "repetitions",
    "failures",
    "accuracy_mean",
    "accuracy_std",
    "accuracy_min",
    "accuracy_p10",
    "normalized_totdisp_mean",
    "runtime_mean_seconds",
    "speedup_vs_irc",
];

/// Writes the row table as CSV (header always present, floats at six
/// significant digits).
pub fn emit_rows_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    writer
        .write_record(ROW_COLUMNS)
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        writer
            .write_record([
                r.repetition.to_string(),
                r.seed.to_string(),
                r.algorithm.clone(),
                r.ref_strategy.clone(),
                r.status.clone(),
                sig6(r.accuracy),
                sig6(r.totdisp),
                sig6(r.normalized_totdisp),
                sig6(r.gen_seconds),
                sig6(r.refs_seconds),
                sig6(r.cluster_seconds),
                sig6(r.eval_seconds),
                sig6(r.total_seconds),
                r.error.clone(),
            ])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the summary table as CSV.
pub fn emit_summary_csv(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    writer
        .write_record(SUMMARY_COLUMNS)
        .map_err(|e| Error::Io(e.to_string()))?;
    for s in summary {
        writer
            .write_record([
                s.algorithm.clone(),
                s.repetitions.to_string(),
                s.failures.to_string(),
                sig6(s.accuracy_mean),
                sig6(s.accuracy_std),
                sig6(s.accuracy_min),
                sig6(s.accuracy_p10),
                sig6(s.normalized_totdisp_mean),
                sig6(s.runtime_mean_seconds),
                sig6(s.speedup_vs_irc),
            ])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(
        || "results".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let mut name = format!("{stem}_summary");
    if let Some(ext) = path.extension() {
        name.push('.');
        name.push_str(&ext.to_string_lossy());
    }
    path.with_file_name(name)
}

/// Writes a results table to `path`.
///
/// JSON emits one document with `rows` and `summary` sections; floats keep
/// their shortest round-trip form, which preserves the full 17-significant-
/// digit value (non-finite entries become `null`). CSV emits the row table
/// at `path` and, when the summary is nonempty, a companion
/// `<stem>_summary.<ext>` file, each a plain parseable table.
pub fn emit_results(table: &ResultsTable, format: OutputFormat, path: &Path) -> Result<()> {
    match format {
        OutputFormat::Json => {
            let json = serde_json::to_string_pretty(table)
                .map_err(|e| Error::Io(format!("result serialization failed: {e}")))?;
            fs::write(path, json.as_bytes())?;
            Ok(())
        }
        OutputFormat::Csv => {
            emit_rows_csv(&table.rows, path)?;
            if !table.summary.is_empty() {
                emit_summary_csv(&table.summary, &summary_path(path))?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn completion_of_zeros_is_scaled_identity() {
        let m = complete_upper_triangular(&[0.0, 0.0, 0.0], 3, 1e-6).unwrap();
        let expected = DMatrix::identity(3, 3) * (1.0 + 1e-6);
        assert_eq!(m.matrix(), &expected);
    }

    #[test]
    fn completion_of_valid_correlation_entries_is_spd() {
        let m = complete_upper_triangular(&[0.5, 0.5, 0.5], 3, 1e-6).unwrap();
        assert_eq!(m.matrix()[(0, 1)], 0.5);
        assert_eq!(m.matrix()[(2, 2)], 1.0 + 1e-6);
    }

    #[test]
    fn near_singular_completion_survives_on_the_jitter() {
        // Eigenvalues of the 2x2 completion are 1 + eps ± rho.
        let rho = 0.999999;
        let m = complete_upper_triangular(&[rho], 2, 1e-6).unwrap();
        let eigen = m.matrix().clone().symmetric_eigen();
        let min = eigen.eigenvalues.min();
        assert_relative_eq!(min, 1e-6 + (1.0 - rho), epsilon = 1e-12);
    }

    #[test]
    fn completion_rejects_wrong_entry_counts_and_hopeless_spectra() {
        assert!(matches!(
            complete_upper_triangular(&[0.1, 0.2], 3, 1e-6).unwrap_err(),
            Error::DimMismatch {
                expected: 3,
                got: 2
            }
        ));
        // rho = 1.5 drives an eigenvalue to 1 + eps - 1.5 < 0: jitter can't
        // save it and the caller learns the measured eigenvalue.
        let err = complete_upper_triangular(&[1.5], 2, 1e-6).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn six_significant_digit_formatting() {
        assert_eq!(sig6(0.9928), "0.992800");
        assert_eq!(sig6(14.3), "14.3000");
        assert_eq!(sig6(123456.0), "123456");
        assert_eq!(sig6(0.0001234567), "0.000123457");
        assert_eq!(sig6(f64::NAN), "NaN");
        assert_eq!(sig6(0.0), "0.00000");
        assert_eq!(sig6(-2.5), "-2.50000");
    }

    fn ok_row(algorithm: &str, accuracy: f64, cluster_seconds: f64) -> ResultRow {
        ResultRow {
            repetition: 0,
            seed: 0,
            algorithm: algorithm.to_string(),
            ref_strategy: "none".to_string(),
            status: "ok".to_string(),
            accuracy,
            totdisp: 1.0,
            normalized_totdisp: 1.0,
            gen_seconds: 0.0,
            refs_seconds: 0.0,
            cluster_seconds,
            eval_seconds: 0.0,
            total_seconds: cluster_seconds,
            error: String::new(),
        }
    }

    #[test]
    fn summaries_match_hand_computed_statistics() {
        let rows = vec![
            ok_row("IRC", 1.0, 2.0),
            ok_row("IRC", 0.9, 2.0),
            ok_row("IRC", 0.8, 2.0),
            ok_row("1-FMC", 0.95, 0.5),
            ok_row("1-FMC", 0.85, 0.5),
        ];
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 2);
        let irc = &summary[0];
        assert_eq!(irc.algorithm, "IRC");
        assert_relative_eq!(irc.accuracy_mean, 0.9, epsilon = 1e-15);
        assert_relative_eq!(irc.accuracy_std, 0.1, epsilon = 1e-12);
        assert_eq!(irc.accuracy_min, 0.8);
        assert_eq!(irc.accuracy_p10, 0.8);
        assert_relative_eq!(irc.speedup_vs_irc, 1.0);
        let fmc = &summary[1];
        assert_relative_eq!(fmc.accuracy_mean, 0.9, epsilon = 1e-15);
        assert_relative_eq!(fmc.speedup_vs_irc, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn summaries_isolate_failed_rows() {
        let mut failed = ok_row("LEC", f64::NAN, f64::NAN);
        failed.status = "failed".to_string();
        failed.error = "synthetic failure".to_string();
        let rows = vec![ok_row("LEC", 0.75, 1.0), failed];
        let summary = summarize(&rows);
        assert_eq!(summary[0].repetitions, 2);
        assert_eq!(summary[0].failures, 1);
        assert_eq!(summary[0].accuracy_mean, 0.75);
        assert!(summary[0].speedup_vs_irc.is_nan());
    }

    #[test]
    fn config_validation_catches_missing_pieces() {
        let mut cfg = ExperimentConfig {
            generator: GeneratorSpec::Mirror {
                n: 2,
                samples_per_ball: 5,
            },
            algorithm: Algorithm::Fmc1,
            refs: None,
            kmeans: KMeansSettings::new(4),
            mean: MeanSettings::default(),
            eval: EvalSettings::default(),
            repetitions: 1,
            master_seed: 7,
        };
        assert!(matches!(
            cfg.validate().unwrap_err(),
            Error::InvalidArgument(_)
        ));
        cfg.refs = Some(RefStrategy::Random { count: 2 });
        cfg.validate().unwrap();
        cfg.repetitions = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn summary_path_inserts_suffix_before_extension() {
        assert_eq!(
            summary_path(Path::new("/tmp/out.csv")),
            PathBuf::from("/tmp/out_summary.csv")
        );
        assert_eq!(
            summary_path(Path::new("results")),
            PathBuf::from("results_summary")
        );
    }
}
