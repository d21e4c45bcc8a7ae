//! Benchmark and diagnostics command line for SPD-matrix clustering.
//!
//! Subcommands: `generate` (synthetic datasets to file), `cluster` (one
//! pipeline over one dataset), `evaluate` (cluster + score against labels),
//! `bench` (seeded multi-algorithm repetition grids with CSV/JSON tables),
//! `refpoints` (principled reference selection report), and `diagnose`
//! (Euclidean-lab and manifold self-checks as JSON).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spdclust::cluster::{cluster_arc, cluster_fmc, cluster_irc, cluster_lec, Partition};
use spdclust::embed::FrechetMapSpec;
use spdclust::error::{Error, Result};
use spdclust::eval::{evaluate, MeanMethod};
use spdclust::io::{
    complete_upper_triangular, emit_results, load_dataset, run_experiment, save_dataset,
    Algorithm, EvalSettings, ExperimentConfig, GeneratorSpec, KMeansSettings, MeanSettings,
    OutputFormat, RefStrategy, ResultsTable,
};
use spdclust::mean::DispersionMetric;
use spdclust::refpoints::{select_principled, select_random};
use spdclust::rng::derive_seed;
use spdclust::spd::{
    dist_affine, dist_log_euclidean, exp_map, geodesic, log_map, project_to_det, SpdMatrix,
};
use spdclust::synth::sample_ball;

#[derive(Parser)]
#[command(
    name = "spdclust",
    version,
    about = "Clustering benchmarks for symmetric positive-definite matrix data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset and write it to a file.
    Generate(GenerateArgs),
    /// Run one clustering pipeline over a dataset file.
    Cluster(ClusterArgs),
    /// Run one pipeline and score it against the file's ground-truth labels.
    Evaluate(EvaluateArgs),
    /// Run a seeded repetition grid over one or more algorithms.
    Bench(BenchArgs),
    /// Report the principled reference selection for a dataset.
    Refpoints(RefpointsArgs),
    /// Self-check batteries, emitted as JSON.
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GeneratorKind {
    Ball,
    Mirror,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Irc,
    Arc,
    Lec,
    Fmc1,
    Fmc2,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Irc => Algorithm::Irc,
            AlgorithmArg::Arc => Algorithm::Arc,
            AlgorithmArg::Lec => Algorithm::Lec,
            AlgorithmArg::Fmc1 => Algorithm::Fmc1,
            AlgorithmArg::Fmc2 => Algorithm::Fmc2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RefStrategyArg {
    Random,
    Principled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Affine,
    LogEuclidean,
}

impl From<MetricArg> for DispersionMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Affine => DispersionMetric::Affine,
            MetricArg::LogEuclidean => DispersionMetric::LogEuclidean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MeanMethodArg {
    Gd,
    Icm,
}

impl From<MeanMethodArg> for MeanMethod {
    fn from(m: MeanMethodArg) -> Self {
        match m {
            MeanMethodArg::Gd => MeanMethod::Gd,
            MeanMethodArg::Icm => MeanMethod::Icm,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Generator flags shared by `generate` and `bench`.
#[derive(Args)]
struct GeneratorArgs {
    /// Synthetic configuration family.
    #[arg(long, value_enum, default_value = "ball")]
    generator: GeneratorKind,
    /// Number of balls (ball generator; the mirror family is always 4).
    #[arg(long, default_value_t = 2)]
    balls: usize,
    /// Matrix side length n.
    #[arg(long)]
    n: Option<usize>,
    /// Lower edge of the accepted separation band (ball generator).
    #[arg(long, default_value_t = 1.1)]
    d_low: f64,
    /// Upper edge of the accepted separation band (ball generator).
    #[arg(long, default_value_t = 3.0)]
    d_up: f64,
    /// Points sampled per ball.
    #[arg(long)]
    samples_per_ball: Option<usize>,
}

impl GeneratorArgs {
    fn to_spec(&self) -> Result<GeneratorSpec> {
        let n = self.n.ok_or_else(|| {
            Error::InvalidArgument("--n is required for synthetic generation".into())
        })?;
        let samples_per_ball = self.samples_per_ball.ok_or_else(|| {
            Error::InvalidArgument("--samples-per-ball is required for synthetic generation".into())
        })?;
        Ok(match self.generator {
            GeneratorKind::Ball => GeneratorSpec::Ball {
                k: self.balls,
                n,
                d_low: self.d_low,
                d_up: self.d_up,
                samples_per_ball,
            },
            GeneratorKind::Mirror => GeneratorSpec::Mirror { n, samples_per_ball },
        })
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    seed: u64,
    /// Output dataset file.
    #[arg(long)]
    out: PathBuf,
}

/// Reference-selection flags shared by the pipelines that embed.
#[derive(Args)]
struct RefArgs {
    /// Reference strategy for the map pipelines.
    #[arg(long, value_enum, default_value = "random")]
    ref_strategy: RefStrategyArg,
    /// Reference count for the random strategy.
    #[arg(long, default_value_t = 2)]
    ref_count: usize,
    #[arg(long, default_value_t = 2.0)]
    t_close: f64,
    #[arg(long, default_value_t = 0.35)]
    t_far: f64,
    #[arg(long, default_value_t = 50)]
    n_rho: usize,
    #[arg(long, default_value_t = 2.5)]
    eps_d: f64,
    #[arg(long, default_value_t = 0.9)]
    quantile: f64,
}

impl RefArgs {
    fn to_strategy(&self) -> RefStrategy {
        match self.ref_strategy {
            RefStrategyArg::Random => RefStrategy::Random {
                count: self.ref_count,
            },
            RefStrategyArg::Principled => RefStrategy::Principled {
                t_close: self.t_close,
                t_far: self.t_far,
                n_rho: self.n_rho,
                eps_d: self.eps_d,
                quantile: self.quantile,
            },
        }
    }
}

#[derive(Args)]
struct KMeansArgs {
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

impl KMeansArgs {
    fn to_settings(&self) -> KMeansSettings {
        KMeansSettings {
            k: self.k,
            restarts: self.restarts,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    /// Input dataset file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    #[command(flatten)]
    kmeans: KMeansArgs,
    #[command(flatten)]
    refs: RefArgs,
    #[arg(long)]
    seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    cluster: ClusterArgs,
    #[arg(long, value_enum, default_value = "affine")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "icm")]
    mean_method: MeanMethodArg,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Input file instead of a synthetic generator.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Pipelines to benchmark over the same per-repetition datasets.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    algorithms: Vec<AlgorithmArg>,
    #[command(flatten)]
    kmeans: KMeansArgs,
    #[command(flatten)]
    refs: RefArgs,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    /// Master seed (every repetition derives from it).
    #[arg(long, required = true)]
    seed: u64,
    #[arg(long, value_enum, default_value = "affine")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "icm")]
    mean_method: MeanMethodArg,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Output table path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RefpointsArgs {
    /// Input dataset file.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    kmeans: KMeansArgs,
    #[command(flatten)]
    refs: RefArgs,
    #[arg(long)]
    seed: u64,
    /// Also save the selected references as a dataset file.
    #[arg(long)]
    save_refs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DiagnoseCommand {
    /// Run the Euclidean laboratory suites (multilateration, convexity,
    /// coherence, separability).
    Euclid {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run manifold self-checks (closed forms, invariances, round trips).
    Spd {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text.as_bytes())?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(format!("serialization failed: {e}")))
}

fn run_generate(args: &GenerateArgs) -> Result<()> {
    let spec = args.generator.to_spec()?;
    let provenance = serde_json::to_string(&serde_json::json!({
        "generator": &spec,
        "seed": args.seed,
    }))
    .map_err(|e| Error::Io(e.to_string()))?;
    let (points, labels) = match &spec {
        GeneratorSpec::Ball {
            k,
            n,
            d_low,
            d_up,
            samples_per_ball,
        } => {
            let cfg = spdclust::synth::BallConfig::new(
                *k,
                *n,
                *d_low,
                *d_up,
                *samples_per_ball,
                args.seed,
            );
            let ds = spdclust::synth::gen_ball_config(&cfg)?;
            (ds.points, ds.labels)
        }
        GeneratorSpec::Mirror { n, samples_per_ball } => {
            let cfg = spdclust::synth::MirrorConfig::new(*n, *samples_per_ball, args.seed);
            let ds = spdclust::synth::gen_mirror_config(&cfg)?;
            (ds.points, ds.labels)
        }
        GeneratorSpec::File { .. } => unreachable!("generate never builds a file spec"),
    };
    save_dataset(&args.out, &points, Some(&labels), &provenance)?;
    eprintln!(
        "wrote {} matrices ({} balls) to {}",
        points.len(),
        labels.iter().max().map_or(0, |m| m + 1),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ClusterOutput {
    algorithm: String,
    k: usize,
    labels: Vec<usize>,
    totdisp: f64,
    iterations: usize,
    converged: bool,
}

fn run_pipeline(args: &ClusterArgs, data: &[SpdMatrix]) -> Result<Partition> {
    let algorithm: Algorithm = args.algorithm.into();
    let kcfg = args
        .kmeans
        .to_settings()
        .to_kmeans_config(derive_seed(args.seed, 3));
    match algorithm {
        Algorithm::Irc => cluster_irc(data, &kcfg, &MeanSettings::default().to_solver_config()),
        Algorithm::Arc => cluster_arc(data, &kcfg, derive_seed(args.seed, 4)),
        Algorithm::Lec => cluster_lec(data, &kcfg, None),
        Algorithm::Fmc1 | Algorithm::Fmc2 => {
            let p = algorithm.map_exponent().expect("map pipeline");
            let refs = match args.refs.to_strategy() {
                RefStrategy::Random { count } => {
                    select_random(data, count, derive_seed(args.seed, 2))?
                }
                RefStrategy::Principled {
                    t_close,
                    t_far,
                    n_rho,
                    eps_d,
                    quantile,
                } => {
                    let params = spdclust::refpoints::PrincipledParams {
                        t_close,
                        t_far,
                        n_rho,
                        eps_d,
                        quantile,
                        seed: derive_seed(args.seed, 2),
                    };
                    let pre_cfg = args
                        .kmeans
                        .to_settings()
                        .to_kmeans_config(derive_seed(args.seed, 5));
                    select_principled(data, args.kmeans.k, &params, &pre_cfg)?.0
                }
            };
            cluster_fmc(data, &FrechetMapSpec::new(refs, p)?, &kcfg)
        }
    }
}

fn run_cluster(args: &ClusterArgs) -> Result<()> {
    let file = load_dataset(&args.input)?;
    let partition = run_pipeline(args, &file.points)?;
    let output = ClusterOutput {
        algorithm: Algorithm::from(args.algorithm).name().to_string(),
        k: partition.k,
        labels: partition.labels,
        totdisp: partition.totdisp,
        iterations: partition.iterations,
        converged: partition.converged,
    };
    write_or_print(args.out.as_ref(), &to_json(&output)?)
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let file = load_dataset(&args.cluster.input)?;
    let truth = file.labels.clone().ok_or_else(|| {
        Error::InvalidArgument("evaluation needs a dataset file with labels".into())
    })?;
    let partition = run_pipeline(&args.cluster, &file.points)?;
    let k_true = truth.iter().max().map_or(0, |&m| m + 1);
    let report = evaluate(
        &file.points,
        &truth,
        &partition.labels,
        args.cluster.kmeans.k.max(k_true),
        args.metric.into(),
        args.mean_method.into(),
    )?;
    write_or_print(args.cluster.out.as_ref(), &to_json(&report)?)
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let generator = match &args.file {
        Some(path) => GeneratorSpec::File { path: path.clone() },
        None => args.generator.to_spec()?,
    };
    let mut tables = Vec::with_capacity(args.algorithms.len());
    for &algorithm in &args.algorithms {
        let cfg = ExperimentConfig {
            generator: generator.clone(),
            algorithm: algorithm.into(),
            refs: Some(args.refs.to_strategy()),
            kmeans: args.kmeans.to_settings(),
            mean: MeanSettings::default(),
            eval: EvalSettings {
                metric: args.metric.into(),
                mean_method: args.mean_method.into(),
            },
            repetitions: args.repetitions,
            master_seed: args.seed,
        };
        tables.push(run_experiment(&cfg)?);
    }
    let merged = ResultsTable::merge(tables);
    let format = match args.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    emit_results(&merged, format, &args.out)?;
    for s in &merged.summary {
        eprintln!(
            "{}: accuracy mean {:.4} min {:.4}, normalized dispersion {:.4}, runtime {:.3}s, speedup vs IRC {:.2}",
            s.algorithm,
            s.accuracy_mean,
            s.accuracy_min,
            s.normalized_totdisp_mean,
            s.runtime_mean_seconds,
            s.speedup_vs_irc
        );
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn run_refpoints(args: &RefpointsArgs) -> Result<()> {
    let file = load_dataset(&args.input)?;
    let params = spdclust::refpoints::PrincipledParams {
        t_close: args.refs.t_close,
        t_far: args.refs.t_far,
        n_rho: args.refs.n_rho,
        eps_d: args.refs.eps_d,
        quantile: args.refs.quantile,
        seed: derive_seed(args.seed, 2),
    };
    let pre_cfg = args
        .kmeans
        .to_settings()
        .to_kmeans_config(derive_seed(args.seed, 5));
    let (refs, report) = select_principled(&file.points, args.kmeans.k, &params, &pre_cfg)?;
    if let Some(path) = &args.save_refs {
        save_dataset(path, &refs, None, "principled reference points")?;
    }
    write_or_print(args.out.as_ref(), &to_json(&report)?)
}

#[derive(Serialize)]
struct SpdCheck {
    check: &'static str,
    worst_error: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SpdDiagnostics {
    seed: u64,
    checks: Vec<SpdCheck>,
    pass: bool,
}

/// Manifold self-checks against closed forms and exact invariances, using
/// only public entry points (ball samples provide the randomness).
fn spd_diagnostics(seed: u64) -> Result<SpdDiagnostics> {
    let mut checks = Vec::new();
    let mut record = |check: &'static str, worst_error: f64, tol: f64| {
        checks.push(SpdCheck {
            check,
            worst_error,
            pass: worst_error < tol,
        });
    };

    // Closed forms on commuting matrices.
    let e2 = std::f64::consts::E.powi(2);
    let id2 = SpdMatrix::identity(2);
    let far = SpdMatrix::from_diagonal(&[e2, e2])?;
    let d = dist_affine(&id2, &far)?;
    record(
        "dist_affine diagonal closed form",
        (d - 8.0_f64.sqrt()).abs() / 8.0_f64.sqrt(),
        1e-10,
    );
    let mid = geodesic(&id2, &far, 0.5)?;
    let e1 = std::f64::consts::E;
    record(
        "geodesic midpoint closed form",
        (mid.matrix() - SpdMatrix::from_diagonal(&[e1, e1])?.matrix()).norm() / e1,
        1e-10,
    );

    for &n in &[2usize, 3, 5] {
        let base = SpdMatrix::identity(n);
        let cloud = sample_ball(&base, 1.5, 6, derive_seed(seed, n as u64))?;

        let mut worst_round_trip = 0.0_f64;
        let mut worst_invariance = 0.0_f64;
        let mut worst_triangle = 0.0_f64;
        let mut worst_le_gap = 0.0_f64;
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                if i == j {
                    continue;
                }
                let (p, q) = (&cloud[i], &cloud[j]);
                let v = log_map(p, q)?;
                let back = exp_map(p, &v)?;
                let rel = (back.matrix() - q.matrix()).norm() / q.matrix().norm();
                worst_round_trip = worst_round_trip.max(rel);

                // Congruence by another sample (SPD, hence invertible).
                let a = &cloud[(i + j) % cloud.len()];
                let congr = |x: &SpdMatrix| -> Result<SpdMatrix> {
                    let m = a.matrix() * x.matrix() * a.matrix();
                    SpdMatrix::new((&m + m.transpose()) * 0.5)
                };
                let d0 = dist_affine(p, q)?;
                let d1 = dist_affine(&congr(p)?, &congr(q)?)?;
                worst_invariance = worst_invariance.max((d0 - d1).abs() / d0.max(1e-300));

                let r = &cloud[(i + 2 * j + 1) % cloud.len()];
                let excess = dist_affine(p, q)? - dist_affine(p, r)? - dist_affine(r, q)?;
                worst_triangle = worst_triangle.max(excess);

                // Log-Euclidean lower-bounds the affine distance (up to noise).
                let gap = dist_log_euclidean(p, q)? - d0;
                worst_le_gap = worst_le_gap.max(gap);
            }
        }
        let label: &'static str = match n {
            2 => "exp/log round trip, invariance, triangle (n=2)",
            3 => "exp/log round trip, invariance, triangle (n=3)",
            _ => "exp/log round trip, invariance, triangle (n=5)",
        };
        record(
            label,
            worst_round_trip
                .max(worst_invariance)
                .max(worst_triangle)
                .max(worst_le_gap),
            1e-8,
        );

        let scaled = project_to_det(&cloud[0], 2.5)?;
        record(
            match n {
                2 => "project_to_det determinant (n=2)",
                3 => "project_to_det determinant (n=3)",
                _ => "project_to_det determinant (n=5)",
            },
            (scaled.matrix().determinant() - 2.5).abs() / 2.5,
            1e-10,
        );
    }

    // Upper-triangular completion guardrail.
    let completed = complete_upper_triangular(&[0.0, 0.0, 0.0], 3, 1e-6)?;
    record(
        "connectivity completion of zeros",
        (completed.matrix() - nalgebra::DMatrix::identity(3, 3) * (1.0 + 1e-6)).norm(),
        1e-15,
    );

    let pass = checks.iter().all(|c| c.pass);
    Ok(SpdDiagnostics { seed, checks, pass })
}

fn run_diagnose(cmd: &DiagnoseCommand) -> Result<()> {
    match cmd {
        DiagnoseCommand::Euclid { seed, out } => {
            let report = spdclust::euclid::suites::run_all(*seed)?;
            write_or_print(out.as_ref(), &to_json(&report)?)
        }
        DiagnoseCommand::Spd { seed, out } => {
            let report = spd_diagnostics(*seed)?;
            let text = to_json(&report)?;
            write_or_print(out.as_ref(), &text)?;
            if !report.pass {
                return Err(Error::InvalidArgument(
                    "manifold self-checks failed; see the report".into(),
                ));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Cluster(args) => run_cluster(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Bench(args) => run_bench(args),
        Command::Refpoints(args) => run_refpoints(args),
        Command::Diagnose(cmd) => run_diagnose(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
