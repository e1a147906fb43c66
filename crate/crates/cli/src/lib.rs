//! The `tts` command line.
//!
//! [`run`] is the whole program minus process setup, so tests can drive it
//! in-process and capture its output.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use temporal_triangles::baseline::{match_probability, match_probability_frac};
use temporal_triangles::graph::{check_clean, parse_stream, preprocess};
use temporal_triangles::harness::{
    augment_bipartite, correlation, gen_random_with, run_trials, split_stream, AugmentParams, DEFAULT_ZIPF_EXPONENT,
};
use temporal_triangles::predictor::{build_threshold, learn_threshold, perfect_ranking, PredictorKind};
use temporal_triangles::step::run_step;
use temporal_triangles::triangle::{edge_weights, enumerate_exact};
use temporal_triangles::{
    EdgeStream, Error, EstimatorConfig, ExactCounts, PredictorRequest, PredictorSpec, StepRun64, TimeDelta,
    TriangleKind,
};

/// Version tag of every JSON document the tool writes.
pub const SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "tts", version, about = "Temporal triangle counting and estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sort, drop self-loops and duplicates, and relabel nodes.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact delta-instance counts per kind.
    Exact {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        delta: TimeDelta,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-edge triangle weights as "idx W W0 .. W7" lines.
    Weights {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        delta: TimeDelta,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One or more seeded estimator runs.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Seed of the first run; run r uses seed + r.
        #[arg(long, env = "TTS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Multi-seed accuracy and memory summary.
    Trials {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long, env = "TTS_SEED", default_value_t = 0)]
        base_seed: u64,
        #[arg(long, default_value_t = 10)]
        runs: u64,
        /// Exact counts as written by `exact`; computed when absent.
        #[arg(long)]
        exact: Option<PathBuf>,
        /// Report raw estimates only.
        #[arg(long, conflicts_with = "exact")]
        no_exact: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Baseline sampling rate with the same expected memory as (p, K).
    MatchP {
        #[arg(long)]
        p: f64,
        #[arg(long, required_unless_present = "k", conflicts_with_all = ["k", "m"])]
        k_frac: Option<f64>,
        #[arg(long, requires = "m")]
        k: Option<usize>,
        #[arg(long, requires = "k")]
        m: Option<usize>,
    },
    /// Materialize a predictor: heavy idx per line, or a "threshold Z" line.
    PredictBuild {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        delta: TimeDelta,
        /// A predictor spec, or `learn:K` to fit a min-degree threshold on the input.
        #[arg(long)]
        spec: BuildSpec,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement of a predictor with the perfect top-K.
    Correlate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        delta: TimeDelta,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Split a stream into a training prefix and a test suffix.
    Split {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.75)]
        fraction: f64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Random stream with skewed endpoints.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        horizon: i64,
        #[arg(long, env = "TTS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ZIPF_EXPONENT)]
        exponent: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Add wedge-closing edges to a bipartite stream.
    Augment {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, env = "TTS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        neighbors: usize,
        #[arg(long, default_value_t = 8)]
        second_hop: usize,
        #[arg(long, default_value_t = 16)]
        wedges: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Require the input to be preprocessed already instead of cleaning it.
    #[arg(long)]
    pub skip_preprocess: bool,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EstimatorArgs {
    #[arg(long)]
    pub delta: TimeDelta,
    #[arg(long)]
    pub p: f64,
    #[command(flatten)]
    pub predictor: PredictorArgs,
}

#[derive(Args, Debug)]
pub struct PredictorArgs {
    /// perfect:K, mindeg:K, static:K, hybrid:K, threshold:Z, noisy:K:A or never.
    #[arg(long, default_value = "never", conflicts_with = "predictor_file")]
    pub predictor: PredictorRequest,
    /// A file written by `predict-build`.
    #[arg(long)]
    pub predictor_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuildSpec {
    Request(PredictorRequest),
    Learn(usize),
}

impl std::str::FromStr for BuildSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.strip_prefix("learn:") {
            Some(k) => {
                k.parse().map(BuildSpec::Learn).map_err(|_| Error::InvalidArgument(format!("invalid K in {s:?}")))
            }
            None => s.parse().map(BuildSpec::Request),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct ExactDoc<'a> {
    kinds: &'a ExactCounts,
    total: u64,
}

#[derive(Serialize)]
struct RunDoc<'a> {
    estimates: &'a [f64; 8],
    peak_live_edges: usize,
    peak_heavy: usize,
    elapsed_ms: f64,
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `stdout` unless the command has `--out`.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<(), Error> {
    match command {
        Command::Preprocess { input, out } => {
            let raw = parse_stream(open(&input)?)?;
            let (clean, report) = preprocess(raw);
            info!("preprocess: {}", serde_json::to_string(&report).map_err(json_err)?);
            with_output(out.as_deref(), stdout, |w| clean.write_to(w))
        }
        Command::Exact { input, delta, output } => {
            let s = load(&input)?;
            let counts = enumerate_exact(&s, delta)?;
            with_output(output.out.as_deref(), stdout, |w| write_exact(w, &counts, output.format))
        }
        Command::Weights { input, delta, out } => {
            let s = load(&input)?;
            let weights = edge_weights(&s, delta)?;
            with_output(out.as_deref(), stdout, |w| {
                for ((idx, total), row) in weights.idx.iter().zip(&weights.total).zip(&weights.per_kind) {
                    write!(w, "{idx} {total}")?;
                    for c in row {
                        write!(w, " {c}")?;
                    }
                    writeln!(w)?;
                }
                Ok(())
            })
        }
        Command::Estimate { input, est, seed, runs, output } => {
            if runs == 0 {
                return Err(Error::InvalidArgument("runs must be at least 1".into()));
            }
            let s = load(&input)?;
            let predictor = resolve_predictor(&est.predictor, &s, est.delta)?;
            let cfg = EstimatorConfig::new(est.delta, est.p, seed, &predictor);
            let results = (0..runs)
                .map(|r| run_step::<f64>(&s, &cfg.with_seed(seed.wrapping_add(r))))
                .collect::<Result<Vec<StepRun64>, Error>>()?;
            with_output(output.out.as_deref(), stdout, |w| write_runs(w, &results, seed, output.format))
        }
        Command::Trials { input, est, base_seed, runs, exact, no_exact, output } => {
            let s = load(&input)?;
            let predictor = resolve_predictor(&est.predictor, &s, est.delta)?;
            let cfg = EstimatorConfig::new(est.delta, est.p, base_seed, &predictor);
            let truth = match (exact, no_exact) {
                (_, true) => None,
                (Some(path), false) => Some(read_exact(&path)?),
                (None, false) => Some(enumerate_exact(&s, est.delta)?),
            };
            let report = run_trials::<f64>(&s, &cfg, runs as usize, base_seed, truth.as_ref())?;
            with_output(output.out.as_deref(), stdout, |w| match output.format {
                Format::Json => write_json(w, &report),
                Format::Csv => {
                    writeln!(w, "kind,exact,mean_estimate,estimate_std,mae,std")?;
                    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                    for k in &report.per_kind {
                        let exact = k.exact.map(|v| v.to_string()).unwrap_or_default();
                        let kind = TriangleKind::from_code(k.kind).expect("valid kind");
                        writeln!(
                            w,
                            "{kind},{exact},{},{},{},{}",
                            k.mean_estimate,
                            k.estimate_std,
                            opt(k.mae),
                            opt(k.std)
                        )?;
                    }
                    Ok(())
                }
            })
        }
        Command::MatchP { p, k_frac, k, m } => {
            let p_tilde = match (k_frac, k, m) {
                (Some(f), ..) => match_probability_frac(p, f)?,
                (None, Some(k), Some(m)) => match_probability(p, k, m)?,
                _ => unreachable!("clap enforces one of --k-frac or --k with --m"),
            };
            writeln!(stdout, "{}", format_probability(p_tilde))?;
            Ok(())
        }
        Command::PredictBuild { input, delta, spec, noise_seed, out } => {
            let s = load(&input)?;
            let built = match spec {
                BuildSpec::Learn(k) => {
                    let zeta = learn_threshold(&s, delta, k)?;
                    PredictorSpec {
                        threshold: Some(zeta),
                        ..PredictorSpec::from_set(PredictorKind::Threshold, HashSet::new(), None)
                    }
                }
                BuildSpec::Request(req) => req.build(&s, delta, noise_seed)?,
            };
            with_output(out.as_deref(), stdout, |w| {
                match (built.kind, built.threshold) {
                    (PredictorKind::Threshold, Some(z)) => writeln!(w, "threshold {z}")?,
                    _ => {
                        for idx in built.sorted_heavy() {
                            writeln!(w, "{idx}")?;
                        }
                    }
                }
                Ok(())
            })
        }
        Command::Correlate { input, delta, k, predictor, output } => {
            let s = load(&input)?;
            let ranked = perfect_ranking(&edge_weights(&s, delta)?);
            let predicted = resolve_predictor(&predictor, &s, delta)?;
            let report = correlation(&ranked, &predicted.heavy, k)?;
            with_output(output.out.as_deref(), stdout, |w| match output.format {
                Format::Json => write_json(w, &report),
                Format::Csv => {
                    let v = report.v_metric.map(|v| v.to_string()).unwrap_or_default();
                    writeln!(w, "jaccard,v_metric,k_perfect,k_predicted")?;
                    writeln!(w, "{},{v},{},{}", report.jaccard, report.k_perfect, report.k_predicted)?;
                    Ok(())
                }
            })
        }
        Command::Split { input, fraction, train, test } => {
            let s = load(&input)?;
            let (a, b) = split_stream(&s, fraction)?;
            with_output(Some(&train), stdout, |w| a.write_to(w))?;
            with_output(Some(&test), stdout, |w| b.write_to(w))
        }
        Command::Gen { n, m, horizon, seed, exponent, out } => {
            let s = gen_random_with(n, m, horizon, seed, exponent)?;
            with_output(out.as_deref(), stdout, |w| s.write_to(w))
        }
        Command::Augment { input, seed, neighbors, second_hop, wedges, out } => {
            let s = load(&input)?;
            let aug = augment_bipartite(&s, seed, AugmentParams { neighbors, second_hop, wedges })?;
            with_output(out.as_deref(), stdout, |w| aug.write_to(w))
        }
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(io::Error::other(e))
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    Ok(BufReader::new(File::open(path)?))
}

/// Reads and cleans the input, or checks that it is already clean.
fn load(input: &InputArgs) -> Result<EdgeStream, Error> {
    let raw = parse_stream(open(&input.input)?)?;
    if input.skip_preprocess {
        check_clean(&raw)?;
        return Ok(raw);
    }
    let (clean, report) = preprocess(raw);
    if !report.is_noop() {
        info!(
            "{}: dropped {} self-loops and {} duplicates, relabeled {} nodes",
            input.input.display(),
            report.removed_self_loops,
            report.removed_duplicates,
            report.remapped_nodes
        );
    }
    Ok(clean)
}

fn resolve_predictor(args: &PredictorArgs, s: &EdgeStream, delta: TimeDelta) -> Result<PredictorSpec, Error> {
    match &args.predictor_file {
        Some(path) => read_predictor(path, s, delta),
        None => args.predictor.build(s, delta, args.noise_seed),
    }
}

/// Loads a `predict-build` file. Threshold files are applied to `s`.
pub fn read_predictor(path: &Path, s: &EdgeStream, delta: TimeDelta) -> Result<PredictorSpec, Error> {
    let mut heavy = HashSet::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        if let Some(z) = line.strip_prefix("threshold") {
            let z = z.trim().parse().map_err(|_| bad(format!("invalid threshold {line:?}")))?;
            return build_threshold(s, delta, z);
        }
        heavy.insert(line.parse::<u64>().map_err(|_| bad(format!("invalid edge idx {line:?}")))?);
    }
    let k = heavy.len();
    Ok(PredictorSpec::from_set(PredictorKind::Perfect, heavy, Some(k)))
}

/// Reads counts written by `exact` in JSON form.
pub fn read_exact(path: &Path) -> Result<ExactCounts, Error> {
    let doc: serde_json::Value = serde_json::from_reader(open(path)?).map_err(json_err)?;
    let kinds = doc
        .get("kinds")
        .and_then(|k| k.as_array())
        .filter(|k| k.len() == TriangleKind::COUNT)
        .ok_or_else(|| Error::Parse { line: 1, message: "expected a \"kinds\" array of 8 counts".into() })?;
    let mut counts = ExactCounts::default();
    for (slot, v) in counts.0.iter_mut().zip(kinds) {
        *slot = v.as_u64().ok_or_else(|| Error::Parse { line: 1, message: format!("bad count {v}") })?;
    }
    Ok(counts)
}

fn with_output<F>(path: Option<&Path>, stdout: &mut dyn Write, body: F) -> Result<(), Error>
where
    F: FnOnce(&mut dyn Write) -> Result<(), Error>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            body(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => {
            let mut w = BufWriter::new(stdout);
            body(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(w: &mut dyn Write, body: &T) -> Result<(), Error> {
    serde_json::to_writer(&mut *w, &Envelope { schema: SCHEMA, body }).map_err(json_err)?;
    writeln!(w)?;
    Ok(())
}

fn write_exact(w: &mut dyn Write, counts: &ExactCounts, format: Format) -> Result<(), Error> {
    match format {
        Format::Json => write_json(w, &ExactDoc { kinds: counts, total: counts.total() }),
        Format::Csv => {
            writeln!(w, "kind,count")?;
            for (kind, c) in counts.iter() {
                writeln!(w, "{kind},{c}")?;
            }
            writeln!(w, "total,{}", counts.total())?;
            Ok(())
        }
    }
}

fn write_runs(w: &mut dyn Write, runs: &[StepRun64], seed: u64, format: Format) -> Result<(), Error> {
    if format == Format::Csv {
        writeln!(w, "seed,T0,T1,T2,T3,T4,T5,T6,T7,peak_live_edges,peak_heavy,elapsed_ms")?;
    }
    for (r, run) in runs.iter().enumerate() {
        let elapsed_ms = run.stats.elapsed.as_secs_f64() * 1e3;
        match format {
            Format::Json => write_json(
                w,
                &RunDoc {
                    estimates: run.estimates.as_array(),
                    peak_live_edges: run.stats.peak_live_edges,
                    peak_heavy: run.stats.peak_heavy,
                    elapsed_ms,
                },
            )?,
            Format::Csv => {
                write!(w, "{}", seed.wrapping_add(r as u64))?;
                for c in run.estimates.iter() {
                    write!(w, ",{}", c.1)?;
                }
                writeln!(w, ",{},{},{elapsed_ms}", run.stats.peak_live_edges, run.stats.peak_heavy)?;
            }
        }
    }
    Ok(())
}

/// Shortest decimal form after rounding to 10 places, so `0.1 * 0.99 + 0.01`
/// prints as `0.109`.
pub fn format_probability(p: f64) -> String {
    let s = format!("{p:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}
