//! Command-line front end: generate synthetic corpora, fit minimum volume
//! topic models, evaluate them on held-out documents and inspect topics.
//!
//! Exit codes: 0 success, 1 runtime error, 2 fit stopped at the iteration
//! limit (model still written), 64 usage error.

mod manifest;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mvtm::corpus::{self, generate_lda_corpus, DocLengths};
use mvtm::model::{match_topics, match_topics_greedy};
use mvtm::projection::fit_subspace_with;
use mvtm::solver::Solver;
use mvtm::{BasisMode, GammaStep, LdaConfig, SolverConfig64, StopReason, TopicModel64};
use serde_json::json;

use manifest::Clock;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable capping the worker threads (0 = one per core).
pub const THREADS_ENV: &str = "MVTM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mvtm", version, about = "Minimum volume topic modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic LDA corpus with its ground truth.
    Generate(GenerateArgs),
    /// Fit a topic model to a bag-of-words corpus.
    Fit(FitArgs),
    /// Report held-out perplexity of a fitted model.
    Eval(EvalArgs),
    /// Print the top words of every topic.
    Topics(TopicsArgs),
    /// Align fitted topics with ground truth.
    Match(MatchArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 3, value_parser = at_least_2)]
    k: usize,
    #[arg(long, default_value_t = 1200, value_parser = positive_count)]
    vocab: usize,
    #[arg(long, default_value_t = 1000, value_parser = positive_count)]
    docs: usize,
    #[arg(long, default_value_t = 1000, value_parser = positive_count)]
    doc_len: usize,
    #[arg(long, default_value_t = 0.1, value_parser = positive_real)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1, value_parser = positive_real)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BasisArg {
    AffineHull,
    Covariance,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GammaStepArg {
    Exact,
    FrozenBasis,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Corpus in UCI bag-of-words format.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = at_least_2)]
    k: usize,
    #[arg(long, value_parser = positive_real)]
    rho: Option<f64>,
    #[arg(long, value_parser = nonnegative_real)]
    mu: Option<f64>,
    /// Spectral radius; defaults to twice the largest projected document norm.
    #[arg(long, value_parser = positive_real)]
    radius: Option<f64>,
    #[arg(long, value_parser = positive_count)]
    max_iters: Option<usize>,
    #[arg(long, value_parser = positive_real)]
    tol_primal: Option<f64>,
    #[arg(long, value_parser = nonnegative_real)]
    tol_change: Option<f64>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Fill the trace's wall-clock column (makes the trace nondeterministic).
    #[arg(long)]
    timing: bool,
    #[arg(long, value_enum, default_value = "affine-hull")]
    basis: BasisArg,
    #[arg(long, value_enum, default_value = "exact")]
    gamma_step: GammaStepArg,
    /// Model output path.
    #[arg(long, visible_alias = "model", default_value = "model.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Held-out corpus in UCI bag-of-words format.
    #[arg(long)]
    heldout: PathBuf,
}

#[derive(Debug, Args)]
struct TopicsArgs {
    #[arg(long)]
    model: PathBuf,
    /// One word per line; word indices are printed without it.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 10, value_parser = positive_count)]
    top: usize,
}

#[derive(Debug, Args)]
struct MatchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Ground-truth topics as written by `generate` (beta_true.csv).
    #[arg(long)]
    truth: PathBuf,
    /// Greedy nearest-unmatched assignment instead of exhaustive search.
    #[arg(long)]
    greedy: bool,
}

fn positive_real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be a positive number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn nonnegative_real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("must be a nonnegative number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_2(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        Ok(n) => Err(format!("must be at least 2, got {n}")),
        Err(e) => Err(e.to_string()),
    }
}

/// A bad flag combination the parser cannot see on its own.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Runs the CLI on `args` (program name first) with the process's stdout
/// and stderr, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`run`], writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a, err),
        Command::Eval(a) => eval(a, out),
        Command::Topics(a) => topics(a, out, err),
        Command::Match(a) => match_cmd(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_ERROR
            }
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| UsageError(format!("{THREADS_ENV} must be a thread count, got {raw:?}")))?;
    // fails only if the pool already exists, as in repeated in-process runs
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<i32> {
    let clock = Clock::start();
    let config = LdaConfig {
        k: a.k,
        vocab_size: a.vocab,
        docs: a.docs,
        doc_len: DocLengths::Constant(a.doc_len),
        alpha: a.alpha,
        eta: a.eta,
        seed: a.seed,
    };
    if let Err(e) = config.validate() {
        let flag = match e.to_string() {
            m if m.contains("vocab_size") => "--vocab",
            m if m.contains("docs") => "--docs",
            _ => "--k",
        };
        return Err(UsageError(format!("invalid {flag}: {e}")).into());
    }
    let data = generate_lda_corpus(&config)?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let outputs: Vec<PathBuf> = ["counts.bow", "beta_true.csv", "theta_true.csv"]
        .iter()
        .map(|f| a.out.join(f))
        .collect();
    corpus::save_bow(&data.corpus, &outputs[0])?;
    corpus::write_matrix_csv(&outputs[1], &data.beta_true)?;
    corpus::write_matrix_csv(&outputs[2], &data.theta_true)?;

    let manifest = clock.manifest(
        "generate",
        serde_json::to_value(&config)?,
        Vec::new(),
        outputs,
        Some(a.seed),
    );
    manifest.save(&a.out.join("manifest.json"))?;
    Ok(EXIT_OK)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn fit(a: FitArgs, err: &mut dyn Write) -> Result<i32> {
    let clock = Clock::start();
    let defaults = SolverConfig64::default();
    let config = SolverConfig64 {
        rho: a.rho.unwrap_or(defaults.rho),
        mu: a.mu.unwrap_or(defaults.mu),
        radius: a.radius,
        max_iters: a.max_iters.unwrap_or(defaults.max_iters),
        tol_primal: a.tol_primal.unwrap_or(defaults.tol_primal),
        tol_change: a.tol_change.unwrap_or(defaults.tol_change),
        gamma_step: match a.gamma_step {
            GammaStepArg::Exact => GammaStep::Exact,
            GammaStepArg::FrozenBasis => GammaStep::FrozenBasis,
        },
    };
    let mode = match a.basis {
        BasisArg::AffineHull => BasisMode::AffineHull,
        BasisArg::Covariance => BasisMode::Covariance,
    };

    let counts = corpus::load_bow(&a.input, None)?;
    let docs = corpus::normalize_counts::<f64>(&counts)?;
    let subspace = fit_subspace_with(&docs, a.k, mode)?;
    let projected = subspace.project(&docs)?;
    let result = Solver::new(&projected, config.clone())?.run()?;

    let mut outputs = vec![a.out.clone()];
    if let Some(path) = &a.trace {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        result.trace.write_csv(&mut w, a.timing)?;
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
        outputs.push(path.clone());
    }
    let model = TopicModel64::from_fit(subspace, &result, &config)?;
    model.save(&a.out)?;

    let code = match result.stop {
        StopReason::Converged => EXIT_OK,
        StopReason::MaxIterations => {
            let _ = writeln!(
                err,
                "warning: stopped after {} iterations without converging; model written to {}",
                result.trace.len(),
                a.out.display()
            );
            EXIT_NOT_CONVERGED
        }
    };
    let parameters = json!({
        "k": a.k,
        "basis": model.subspace.mode(),
        "solver": model.config,
        "timing": a.timing,
        "iterations": result.trace.len(),
        "stop": result.stop,
    });
    clock
        .manifest("fit", parameters, vec![a.input], outputs, None)
        .save(&sibling(&a.out, ".manifest.json"))?;
    Ok(code)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let model = TopicModel64::load(&a.model)?;
    let heldout = corpus::load_bow(&a.heldout, None)?;
    if heldout.num_words() != model.num_words() {
        bail!(
            "vocabulary mismatch: model has {} words, {} has {}",
            model.num_words(),
            a.heldout.display(),
            heldout.num_words()
        );
    }
    let (perplexity, mut lls) = model.evaluate(&heldout)?;
    lls.sort_by(|x, y| x.total_cmp(y));
    let n = lls.len();
    let median = if n % 2 == 1 {
        lls[n / 2]
    } else {
        (lls[n / 2 - 1] + lls[n / 2]) / 2.0
    };
    let report = json!({
        "perplexity": perplexity,
        "heldout_docs": heldout.num_docs(),
        "total_tokens": heldout.total_tokens(),
        "per_doc_median_loglik": median,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(EXIT_OK)
}

fn topics(a: TopicsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let model = TopicModel64::load(&a.model)?;
    let v = model.num_words();
    let vocab = match &a.vocab {
        Some(path) => {
            let words = corpus::load_vocab(path)?;
            if words.len() != v {
                bail!(
                    "vocabulary lists {} words but the model has {v}",
                    words.len()
                );
            }
            Some(words)
        }
        None => None,
    };
    let top = if a.top > v {
        let _ = writeln!(
            err,
            "warning: --top {} exceeds the vocabulary size; using {v}",
            a.top
        );
        v
    } else {
        a.top
    };

    let columns: Vec<Vec<usize>> = (0..model.k())
        .map(|t| {
            let row = model.beta.row(t);
            let mut order: Vec<usize> = (0..v).collect();
            // stable: equal weights keep the lower word index first
            order.sort_by(|&x, &y| row[y].total_cmp(&row[x]));
            order.truncate(top);
            order
        })
        .collect();
    for r in 0..top {
        let cells: Vec<String> = columns
            .iter()
            .map(|col| match &vocab {
                Some(words) => words[col[r]].clone(),
                None => col[r].to_string(),
            })
            .collect();
        writeln!(out, "{}", cells.join("\t"))?;
    }
    Ok(EXIT_OK)
}

fn match_cmd(a: MatchArgs, out: &mut dyn Write) -> Result<i32> {
    let model = TopicModel64::load(&a.model)?;
    let truth = corpus::read_matrix_csv(&a.truth)?;
    if truth.nrows() != model.k() {
        bail!(
            "topic count mismatch: model has K = {}, truth has K = {}",
            model.k(),
            truth.nrows()
        );
    }
    if truth.ncols() != model.num_words() {
        bail!(
            "vocabulary mismatch: model has {} words, truth has {}",
            model.num_words(),
            truth.ncols()
        );
    }
    let matched = if a.greedy {
        match_topics_greedy(&model.beta, &truth)?
    } else {
        match_topics(&model.beta, &truth)?
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&matched)?)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(
            std::iter::once("mvtm").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn value_parsers() {
        assert_eq!(positive_real("0.5"), Ok(0.5));
        assert!(positive_real("0").is_err());
        assert!(positive_real("inf").is_err());
        assert!(positive_real("x").is_err());
        assert_eq!(nonnegative_real("0"), Ok(0.0));
        assert!(nonnegative_real("-1").is_err());
        assert!(positive_count("0").is_err());
        assert_eq!(at_least_2("2"), Ok(2));
        assert!(at_least_2("1").is_err());
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run_capture(&[]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["fit", "--k", "3"]).0, EXIT_USAGE);
        assert_eq!(
            run_capture(&["topics", "--model", "m.json", "--top", "0"]).0,
            EXIT_USAGE
        );
        let (code, _, err) =
            run_capture(&["fit", "--input", "x.bow", "--k", "3", "--basis", "pca"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--basis"));
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("generate"));
    }

    #[test]
    fn runtime_errors_exit_1() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.json");
        let (code, _, err) = run_capture(&["topics", "--model", missing.to_str().unwrap()]);
        assert_eq!(code, EXIT_ERROR);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn manifest_sits_next_to_the_model() {
        assert_eq!(
            sibling(Path::new("out/fit.json"), ".manifest.json"),
            PathBuf::from("out/fit.manifest.json")
        );
        assert_eq!(
            sibling(Path::new("model"), ".manifest.json"),
            PathBuf::from("model.manifest.json")
        );
    }
}
