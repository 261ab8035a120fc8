//! The `ewens-mdp` command-line tool.
//!
//! Every subcommand writes one [`Envelope`] as JSON (default) or its result
//! rows as CSV. Exit codes: 0 success, 1 numerical failure, 2 usage or
//! domain error.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ewens_mdp::asymptotics::{leading_log_mgf, psi, rate};
use ewens_mdp::contour::{contour_log_mgf, NODE_TOLERANCE};
use ewens_mdp::mc::{estimate_tail, mdp_profile};
use ewens_mdp::mgf::{log_mgf, MlMode, ModerationScale};
use ewens_mdp::partition::{extend_sample, sample_partition, spectrum_of, EwensPitmanParams, PartitionState};
use ewens_mdp::roots::solve_singularities;
use ewens_mdp::verify::{run_suite, Suite};
use ewens_mdp::{Error, StatParams, Statistic};

pub mod output;

pub use output::Envelope;
use output::{write_csv, write_json};

/// Environment variable that caps the worker-thread count.
pub const THREADS_ENV: &str = "EWENS_MDP_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "ewens-mdp",
    version,
    about = "Moderate-deviation numerics for the Ewens-Pitman sampling model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Series,
    Contour,
    Asymptotic,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record the wall-clock runtime in the diagnostics (output is then no
    /// longer byte-identical across runs).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Seed of the random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allow running without `--seed`; a seed is drawn from the clock and recorded.
    #[arg(long)]
    pub ephemeral: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StatArgs {
    /// K, Ml, Kpost or Mlpost.
    #[arg(long, value_parser = parse_stat)]
    pub stat: Statistic,
    /// Sample size (base sample size for posterior statistics).
    #[arg(long)]
    pub n: u64,
    /// Extension size (posterior statistics).
    #[arg(long, default_value_t = 0)]
    pub m: u64,
    /// Blocks in the base sample (posterior statistics).
    #[arg(long, default_value_t = 1)]
    pub j: u64,
    /// Block size counted by Ml and Mlpost.
    #[arg(long, default_value_t = 1)]
    pub l: u64,
    #[arg(long)]
    pub alpha: f64,
}

impl StatArgs {
    fn params(&self) -> StatParams {
        StatParams {
            n: self.n,
            m: self.m,
            j: self.j,
            l: self.l,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random partition.
    Sample {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Continue a base sample for m draws and count extension-born blocks.
    Extend {
        /// Base block sizes, comma separated; defaults to n-j+1,1,...,1.
        #[arg(long, value_delimiter = ',')]
        base: Option<Vec<u64>>,
        #[arg(long, required_unless_present = "base")]
        n: Option<u64>,
        #[arg(long, default_value_t = 1)]
        j: u64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Log moment generating function of a statistic.
    Mgf {
        #[command(flatten)]
        stat: StatArgs,
        /// One or more comma-separated values of t.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        t: Vec<f64>,
        #[arg(long, value_enum, default_value = "series")]
        method: Method,
        /// Use the tilde series for Ml (the contour method always does).
        #[arg(long)]
        tilde: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Real roots of 1 - y xi^(alpha-l) (xi-1)^l.
    Roots {
        #[arg(long)]
        l: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rate function of the moderate deviations.
    Rate {
        #[arg(long, value_parser = parse_stat)]
        stat: Statistic,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        l: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Limiting log-Laplace transform.
    Psi {
        #[arg(long, value_parser = parse_stat)]
        stat: Statistic,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        l: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        lambda: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo estimate of P(S >= x N^alpha beta(N)).
    McTail {
        #[command(flatten)]
        stat: StatArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        trials: u64,
        /// beta(N) = c (ln N)^a N^b, given as c,a,b.
        #[arg(long, default_value = "1,0.25,0", value_parser = parse_beta)]
        beta: ModerationScale,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Tail estimates and normalised decay over grids of sizes and levels.
    MdpProfile {
        #[command(flatten)]
        stat: StatArgs,
        /// Normalising sizes (n, or m for posterior statistics).
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value = "1,0.25,0", value_parser = parse_beta)]
        beta: ModerationScale,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a self-check suite.
    Verify {
        #[arg(long, default_value = "all", value_parser = parse_suite)]
        suite: Suite,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn parse_stat(s: &str) -> Result<Statistic, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_beta(s: &str) -> Result<ModerationScale, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [c, a, b] => ModerationScale::new(*c, *a, *b).map_err(|e| e.to_string()),
        _ => Err("expected c,a,b".into()),
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
    Io(io::Error),
    /// Ran to completion but a check failed.
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_numerical() => 1,
            CliError::Lib(_) => 2,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage error: {s}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Failed(s) => write!(f, "{s}"),
        }
    }
}

fn resolve_seed(s: &SeedArgs) -> Result<u64, CliError> {
    match (s.seed, s.ephemeral) {
        (Some(seed), _) => Ok(seed),
        (None, true) => Ok(SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)),
        (None, false) => Err(CliError::Usage(
            "randomized commands need --seed N (or --ephemeral to draw one)".into(),
        )),
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                // fails harmlessly if the pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    configure_threads();
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(env: &mut Envelope, output: &OutputArgs, started: Instant, stdout: &mut dyn Write) -> Result<(), CliError> {
    if output.timing {
        env.diag("runtime_ms", started.elapsed().as_secs_f64() * 1e3);
    }
    let mut file;
    let sink: &mut dyn Write = match &output.out {
        Some(path) => {
            file = File::create(path)?;
            &mut file
        }
        None => stdout,
    };
    match output.format {
        Format::Json => write_json(env, sink)?,
        Format::Csv => write_csv(env, sink)?,
    }
    sink.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MgfRow {
    stat: Statistic,
    n: u64,
    m: u64,
    j: u64,
    l: u64,
    alpha: f64,
    t: f64,
    method: &'static str,
    variant: &'static str,
    log_value: f64,
    terms_used: Option<u64>,
    quadrature_nodes: Option<usize>,
    est_rel_error: Option<f64>,
}

fn mgf_rows(stat: Statistic, p: &StatParams, ts: &[f64], method: Method, tilde: bool) -> Result<Vec<MgfRow>, CliError> {
    p.validate(stat)?;
    let mode = if tilde { MlMode::Tilde } else { MlMode::Exact };
    let variant = if stat.needs_l() && (tilde || method == Method::Contour) {
        "tilde"
    } else {
        "exact"
    };
    let mut rows = Vec::new();
    for &t in ts {
        let base = |log_value| MgfRow {
            stat,
            n: p.n,
            m: p.m,
            j: p.j,
            l: p.l,
            alpha: p.alpha,
            t,
            method: "",
            variant,
            log_value,
            terms_used: None,
            quadrature_nodes: None,
            est_rel_error: None,
        };
        let row = match method {
            Method::Series => {
                let e = log_mgf(stat, p, t, mode)?;
                MgfRow {
                    method: "series",
                    terms_used: Some(e.terms),
                    ..base(e.log_value)
                }
            }
            Method::Contour => {
                let c = contour_log_mgf(stat, p, t)?;
                let rounding = (c.log_condition.exp() * f64::EPSILON).max(c.imag_ratio);
                MgfRow {
                    method: "contour",
                    quadrature_nodes: Some(c.contour.nodes),
                    est_rel_error: Some(rounding.max(NODE_TOLERANCE)),
                    ..base(c.log_value)
                }
            }
            Method::Asymptotic => {
                let lead = leading_log_mgf(stat, p, t)?;
                let exact = log_mgf(stat, p, t, mode)?.log_value;
                MgfRow {
                    method: "asymptotic",
                    est_rel_error: Some((lead - exact).exp_m1().abs()),
                    ..base(lead)
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn put_stat(env: &mut Envelope, stat: Statistic, p: &StatParams) {
    env.param("stat", stat.to_string())
        .param("n", p.n)
        .param("alpha", p.alpha);
    if stat.is_posterior() {
        env.param("m", p.m).param("j", p.j);
    }
    if stat.needs_l() {
        env.param("l", p.l);
    }
}

fn max_of<T: PartialOrd + Copy>(it: impl Iterator<Item = Option<T>>) -> Option<T> {
    it.flatten().fold(None, |acc, v| match acc {
        Some(a) if a >= v => Some(a),
        _ => Some(v),
    })
}

pub fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    match command {
        Command::Sample {
            n,
            alpha,
            theta,
            seed,
            output,
        } => {
            let seed = resolve_seed(&seed)?;
            let params = EwensPitmanParams::new(alpha, theta)?;
            let state = sample_partition(n, &params, seed);
            let mut env = Envelope::new("sample");
            env.param("n", n).param("alpha", alpha).param("theta", theta);
            env.seed = Some(seed);
            let spectrum: Vec<_> = spectrum_of(&state)
                .counts()
                .iter()
                .map(|(l, c)| json!({"l": l, "count": c}))
                .collect();
            env.push(json!({
                "n": state.n(),
                "num_blocks": state.num_blocks(),
                "block_sizes": state.block_sizes(),
                "spectrum": spectrum,
            }));
            emit(&mut env, &output, started, stdout)
        }
        Command::Extend {
            base,
            n,
            j,
            m,
            alpha,
            theta,
            seed,
            output,
        } => {
            let seed = resolve_seed(&seed)?;
            let params = EwensPitmanParams::new(alpha, theta)?;
            let state = match base {
                Some(sizes) => PartitionState::from_block_sizes(sizes)?,
                None => PartitionState::canonical(n.unwrap_or(0), j)?,
            };
            let s = extend_sample(&state, m, &params, seed)?;
            let mut env = Envelope::new("extend");
            env.param("base", state.block_sizes())
                .param("m", m)
                .param("alpha", alpha)
                .param("theta", theta);
            env.seed = Some(seed);
            let spectrum: Vec<_> = s
                .new_spectrum
                .counts()
                .iter()
                .map(|(l, c)| json!({"l": l, "count": c}))
                .collect();
            env.push(json!({
                "base_n": s.base_n,
                "base_blocks": s.base_blocks,
                "m": s.extension_m,
                "new_blocks": s.new_blocks,
                "new_spectrum": spectrum,
            }));
            emit(&mut env, &output, started, stdout)
        }
        Command::Mgf {
            stat,
            t,
            method,
            tilde,
            output,
        } => {
            let p = stat.params();
            let rows = mgf_rows(stat.stat, &p, &t, method, tilde)?;
            let mut env = Envelope::new("mgf");
            put_stat(&mut env, stat.stat, &p);
            env.param("t", &t)
                .param("method", format!("{method:?}").to_lowercase())
                .param("tilde", tilde);
            if let Some(v) = max_of(rows.iter().map(|r| r.terms_used)) {
                env.diag("terms_used", v);
            }
            if let Some(v) = max_of(rows.iter().map(|r| r.quadrature_nodes)) {
                env.diag("quadrature_nodes", v);
            }
            if let Some(v) = max_of(rows.iter().map(|r| r.est_rel_error)) {
                env.diag("est_rel_error", v);
            }
            for r in rows {
                env.push(r);
            }
            emit(&mut env, &output, started, stdout)
        }
        Command::Roots { l, alpha, y, output } => {
            let mut env = Envelope::new("roots");
            env.param("l", l).param("alpha", alpha).param("y", &y);
            for &yy in &y {
                let s = solve_singularities(l, alpha, yy)?;
                env.push(json!({
                    "y": yy,
                    "outer": s.outer,
                    "inner": s.inner,
                    "residual_outer": s.residual(s.outer),
                    "residual_inner": s.inner.map(|x| s.residual(x)),
                    "outside_lemma_regime": s.outside_lemma_regime,
                }));
            }
            emit(&mut env, &output, started, stdout)
        }
        Command::Rate {
            stat,
            alpha,
            l,
            x,
            output,
        } => {
            let mut env = Envelope::new("rate");
            env.param("stat", stat.to_string()).param("alpha", alpha).param("x", &x);
            if stat.needs_l() {
                env.param("l", l);
            }
            for &xx in &x {
                let r = rate(stat, xx, alpha, l)?;
                env.push(json!({"x": xx, "value": r.value, "infinite": r.value.is_infinite()}));
            }
            emit(&mut env, &output, started, stdout)
        }
        Command::Psi {
            stat,
            alpha,
            l,
            lambda,
            output,
        } => {
            let mut env = Envelope::new("psi");
            env.param("stat", stat.to_string())
                .param("alpha", alpha)
                .param("lambda", &lambda);
            if stat.needs_l() {
                env.param("l", l);
            }
            for &lam in &lambda {
                env.push(json!({"lambda": lam, "value": psi(stat, lam, alpha, l)?}));
            }
            emit(&mut env, &output, started, stdout)
        }
        Command::McTail {
            stat,
            theta,
            x,
            trials,
            beta,
            seed,
            output,
        } => {
            let seed = resolve_seed(&seed)?;
            let p = stat.params();
            let e = estimate_tail(stat.stat, &p, theta, &beta, x, trials, seed)?;
            let mut env = Envelope::new("mc-tail");
            put_stat(&mut env, stat.stat, &p);
            env.param("theta", theta)
                .param("x", x)
                .param("trials", trials)
                .param("beta", beta);
            env.seed = Some(seed);
            env.diag("theta_flagged", e.theta_flagged());
            env.push(json!({
                "threshold": e.threshold,
                "trials": e.trials,
                "hits": e.hits,
                "p_hat": e.p_hat,
                "stderr": e.stderr,
            }));
            emit(&mut env, &output, started, stdout)
        }
        Command::MdpProfile {
            stat,
            sizes,
            x,
            theta,
            trials,
            beta,
            seed,
            output,
        } => {
            let seed = resolve_seed(&seed)?;
            let p = stat.params();
            let prof = mdp_profile(stat.stat, &p, &sizes, &x, theta, &beta, trials, seed)?;
            let mut env = Envelope::new("mdp-profile");
            put_stat(&mut env, stat.stat, &p);
            env.param("sizes", &sizes)
                .param("x", &x)
                .param("theta", theta)
                .param("trials", trials)
                .param("beta", beta);
            env.seed = Some(seed);
            env.diag("theta_flagged", prof.theta_flagged);
            for r in &prof.rows {
                env.push(json!({
                    "size": r.size,
                    "x": r.x,
                    "beta": r.beta,
                    "speed": r.speed,
                    "threshold": r.estimate.threshold,
                    "trials": r.estimate.trials,
                    "hits": r.estimate.hits,
                    "p_hat": r.estimate.p_hat,
                    "stderr": r.estimate.stderr,
                    "normalized_decay": r.normalized_decay,
                    "zero_hits": r.estimate.hits == 0,
                    "decay_lower_bound": r.decay_lower_bound,
                    "rate_value": r.rate_value,
                    "rate_infinite": r.rate_value.is_infinite(),
                }));
            }
            emit(&mut env, &output, started, stdout)
        }
        Command::Verify { suite, output } => {
            let checks = run_suite(suite);
            let failed = checks.iter().filter(|c| !c.passed).count();
            let mut env = Envelope::new("verify");
            env.param("suite", suite.to_string());
            env.diag("checks", checks.len()).diag("failed", failed);
            for c in &checks {
                env.push(c);
            }
            emit(&mut env, &output, started, stdout)?;
            if failed > 0 {
                return Err(CliError::Failed(format!("{failed} check(s) failed")));
            }
            Ok(())
        }
    }
}
