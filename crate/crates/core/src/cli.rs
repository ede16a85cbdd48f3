//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error (message on stderr, nothing on
//! stdout), 2 numeric or validation failure (JSON error object on stderr).
//! Angles on the command line are in degrees.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{self, ExperimentConfig, REPORT_HEADER};
use crate::error::{Error, Result};
use crate::estimator::{auxiliary_estimate, product_estimate, UStatMode};
use crate::kernel::{Kernel, MOMENT_TOLERANCE};
use crate::model::{holder_certify, Sample};
use crate::risk::{rate_study, RiskReport};
use crate::rotation::{Point, Rotation, RotationNet};
use crate::selector::{minimax_select, AdaptiveRule, MinimaxOptions};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "STRUCTKDE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "structkde", version, about = "Structurally adaptive bivariate kernel density estimation")]
struct Cli {
    /// Worker threads (default: $STRUCTKDE_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel coefficients, norms and moment checks.
    Kernel {
        #[arg(long)]
        order: usize,
        /// Append the moment verification table; exit 2 if any row fails.
        #[arg(long)]
        check: bool,
    },
    /// Uniform rotation net with separation at least DELTA.
    Net {
        #[arg(long)]
        delta: f64,
    },
    /// Load a model file and optionally print its certification.
    Model {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        check: bool,
    },
    /// Evaluate one estimator at a point.
    Estimate(EstimateArgs),
    /// Run a selection rule.
    Select(SelectArgs),
    /// Monte Carlo risk study from an experiment file.
    Risk {
        #[arg(long)]
        config: PathBuf,
        /// Report CSV (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Naive,
    Pruned,
}

impl From<ModeArg> for UStatMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Naive => UStatMode::Naive,
            ModeArg::Pruned => UStatMode::Pruned,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Adaptive,
    Minimax,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Two-column CSV of points; a non-numeric first line is a header.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_point)]
    x: Point,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    theta_d: f64,
    /// Second rotation; the U-statistic is used when it differs from D.
    #[arg(long)]
    theta_q: Option<f64>,
    #[arg(long, value_enum, default_value = "pruned")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    kernel_order: usize,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_point)]
    x: Point,
    #[arg(long, value_enum)]
    rule: RuleArg,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    #[arg(long, conflicts_with = "b_mult")]
    a_mult: Option<f64>,
    #[arg(long)]
    b_mult: Option<f64>,
    #[arg(long)]
    no_split: bool,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    kernel_order: Option<usize>,
    #[arg(long, value_enum, default_value = "pruned")]
    mode: ModeArg,
    /// Per-cell diagnostics CSV.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0f64; 2];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("`{p}`: {e}"))?;
        if !o.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

/// Process-style entry point: parses `argv` (including the program name),
/// writes to the given streams and returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok()));
    let mut buf = String::new();
    let result = match threads {
        Some(0) => Err(Error::invalid("threads", "must be at least 1")),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, &mut buf)),
            Err(e) => Err(Error::Parse(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command, &mut buf),
    };
    match result {
        Ok(()) => {
            let _ = out.write_all(buf.as_bytes());
            0
        }
        Err(e) if e.is_usage() => {
            let _ = writeln!(err, "error: {e}");
            1
        }
        Err(e) => {
            let _ = writeln!(err, "{}", error_json(&e));
            2
        }
    }
}

/// Runs with the real process arguments and streams.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Machine-readable error object.
pub fn error_json(e: &Error) -> String {
    let kind = match e {
        Error::InvalidArgument { .. } => "invalid_argument",
        Error::QuadratureNotConverged { .. } => "quadrature",
        Error::Certification(_) => "certification",
        Error::SampleTooSmall { .. } => "sample_too_small",
        Error::Replication { .. } => "replication",
        Error::Config { .. } => "config",
        Error::Io(_) => "io",
        Error::Parse(_) => "parse",
    };
    let mut obj = serde_json::json!({ "error": kind, "message": e.to_string() });
    if let Error::Config { path, .. } = e {
        obj["path"] = serde_json::Value::String(path.clone());
    }
    if let Error::Replication { index, .. } = e {
        obj["replication"] = serde_json::json!(index);
    }
    obj.to_string()
}

fn dispatch(cmd: &Command, out: &mut String) -> Result<()> {
    match cmd {
        Command::Kernel { order, check } => kernel_cmd(*order, *check, out),
        Command::Net { delta } => net_cmd(*delta, out),
        Command::Model { config, check } => model_cmd(config, *check, out),
        Command::Estimate(a) => estimate_cmd(a, out),
        Command::Select(a) => select_cmd(a, out),
        Command::Risk { config, out: path, plot } => risk_cmd(config, path.as_deref(), plot.as_deref(), out),
    }
}

fn kernel_cmd(order: usize, check: bool, out: &mut String) -> Result<()> {
    if order > 12 {
        return Err(Error::invalid("order", format!("must be at most 12, got {order}")));
    }
    let k = Kernel::new(order);
    out.push_str("# coefficients of u^i\ni,coefficient\n");
    for (i, c) in k.coeffs().iter().enumerate() {
        let _ = writeln!(out, "{i},{c}");
    }
    out.push_str("# norms\nnorm,value\n");
    let _ = writeln!(out, "sup,{}", k.sup_norm());
    let _ = writeln!(out, "l1,{}", k.l1_norm());
    let _ = writeln!(out, "l2_squared,{}", k.l2_norm_sq());
    if check {
        out.push_str("# moments\nj,moment,tolerance,pass\n");
        let table = k.moment_table(MOMENT_TOLERANCE)?;
        for row in &table {
            let _ = writeln!(out, "{},{:e},{:e},{}", row.j, row.moment, row.tolerance, if row.pass { "pass" } else { "fail" });
        }
        if let Some(bad) = table.iter().find(|r| !r.pass) {
            return Err(Error::Certification(format!(
                "moment {} = {:e} misses target {} by more than {:e}",
                bad.j, bad.moment, bad.target, bad.tolerance
            )));
        }
    }
    Ok(())
}

fn net_cmd(delta: f64, out: &mut String) -> Result<()> {
    let net = RotationNet::build(delta)?;
    out.push_str("index,theta,q1,q2\n");
    for (i, q) in net.members().iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{}", q.theta().to_degrees(), q.q1(), q.q2());
    }
    let _ = writeln!(out, "# cardinality={} capacity={}", net.len(), net.capacity());
    Ok(())
}

fn model_cmd(path: &Path, check: bool, out: &mut String) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let cfg = config::load_model(&text)?;
    let (model, resolved) = cfg.build("")?;
    if !check {
        out.push_str(&serde_json::to_string(&resolved).expect("configs serialize"));
        out.push('\n');
        return Ok(());
    }
    out.push_str("marginal,quantity,value,location,bound,status\n");
    for i in 0..2 {
        let cert = holder_certify(model.marginal(i), model.beta(), model.l())?;
        let status = |v: f64| if v <= crate::model::HOLDER_SLACK * cert.l { "pass" } else { "fail" };
        for (j, &(v, y)) in cert.report.sup_derivatives.iter().enumerate() {
            let _ = writeln!(out, "marginal{},sup_derivative_{j},{v},{y},{},{}", i + 1, cert.l, status(v));
        }
        let (a, b) = cert.report.seminorm_pair;
        let s = cert.report.seminorm;
        let _ = writeln!(out, "marginal{},holder_seminorm,{s},{a}:{b},{},{}", i + 1, cert.l, status(s));
    }
    Ok(())
}

fn read_points(path: &Path) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("line {}: expected 2 columns, got {}", i + 1, rec.len())));
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => points.push([v[0], v[1]]),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", i + 1))),
        }
    }
    Sample::from_points(points)
}

fn estimate_cmd(a: &EstimateArgs, out: &mut String) -> Result<()> {
    if !(a.h > 0.0 && a.h.is_finite()) {
        return Err(Error::invalid("h", format!("must be positive, got {}", a.h)));
    }
    let s = read_points(&a.input)?;
    let k = Kernel::new(a.kernel_order);
    let d = Rotation::from_degrees(a.theta_d)?;
    let v = match a.theta_q {
        None => product_estimate(&k, &s, a.x, a.h, &d)?,
        Some(t) => auxiliary_estimate(&k, &s, a.x, a.h, &d, &Rotation::from_degrees(t)?, a.mode.into())?,
    };
    let _ = writeln!(out, "{v}");
    Ok(())
}

fn select_cmd(a: &SelectArgs, out: &mut String) -> Result<()> {
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {}", a.delta)));
    }
    if !(a.beta > 0.0 && a.l > 0.0) {
        return Err(Error::invalid("beta", "beta and L must be positive"));
    }
    let s = read_points(&a.input)?;
    let net = RotationNet::build(a.delta)?;
    let k = Kernel::new(a.kernel_order.unwrap_or_else(|| config::default_kernel_order(a.beta)));
    let mut diag = String::from("rule,stage,theta_q,h,r_value,criterion,chosen\n");
    let deg = |i: usize| net.members()[i].theta().to_degrees();
    let (rule_name, h, q, est) = match a.rule {
        RuleArg::Adaptive => {
            if a.b_mult.is_some() || a.no_split {
                return Err(Error::invalid("b_mult", "--b-mult and --no-split apply to the minimax rule"));
            }
            let mb = k.order_floor().max(1) as f64;
            let rule = AdaptiveRule::new(k, net.clone(), a.p, a.a_mult.unwrap_or(1.0), mb)?.with_mode(a.mode.into());
            let r = rule.select(&s, a.x)?;
            push_adaptive_rows(&mut diag, "adaptive", &r, &deg);
            ("adaptive", r.h_hat, r.q_index, r.estimate)
        }
        RuleArg::Minimax => {
            if a.a_mult.is_some() {
                return Err(Error::invalid("a_mult", "--a-mult applies to the adaptive rule"));
            }
            let opts = MinimaxOptions {
                b_mult: a.b_mult.unwrap_or(1.0),
                a_mult: 1.0,
                p: a.p,
                no_split: a.no_split,
                mode: a.mode.into(),
            };
            let r = minimax_select(&s, a.x, &net, &k, a.beta, a.l, opts)?;
            push_adaptive_rows(&mut diag, "minimax", &r.stage0, &deg);
            for st in &r.stages {
                for (qi, &rv) in st.r_values.iter().enumerate() {
                    let chosen = qi == st.q_index;
                    let _ = writeln!(diag, "minimax,{},{},{},{rv},{rv},{chosen}", st.stage, deg(qi), st.h);
                }
            }
            ("minimax", r.h_hat, r.q_index, r.estimate)
        }
    };
    if let Some(p) = &a.diagnostics {
        std::fs::write(p, diag)?;
    }
    let _ = writeln!(out, "rule,theta_q,h,estimate\n{rule_name},{},{h},{est}", deg(q));
    Ok(())
}

fn push_adaptive_rows(diag: &mut String, rule: &str, r: &crate::selector::SelectionResult, deg: &dyn Fn(usize) -> f64) {
    for (qi, (rrow, crow)) in r.r_surface.iter().zip(&r.criterion).enumerate() {
        for (j, (&rv, &cv)) in rrow.iter().zip(crow).enumerate() {
            let chosen = qi == r.q_index && r.grid[j] == r.h_hat;
            let _ = writeln!(diag, "{rule},0,{},{},{rv},{cv},{chosen}", deg(qi), r.grid[j]);
        }
    }
}

/// Report CSV: the config header, one row per sample size, slope footers.
pub fn report_csv(config: &ExperimentConfig, report: &RiskReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{REPORT_HEADER}{}", config.to_json());
    s.push_str("n,risk,stderr,reps,estimator_id\n");
    for p in &report.points {
        let _ = writeln!(s, "{},{},{},{},{}", p.n, p.risk, p.stderr, p.reps, report.estimator_id);
    }
    let fmt = |v: Option<f64>| v.map_or_else(|| "degenerate".to_string(), |x| x.to_string());
    let _ = writeln!(s, "slope,{}", fmt(report.slope));
    let _ = writeln!(s, "slope_stderr,{}", fmt(report.slope_stderr));
    s
}

/// Runs an experiment config and renders its report CSV.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentConfig, RiskReport, String)> {
    let exp = config.resolve()?;
    let est = exp.estimator()?;
    let c = &exp.config;
    let report = rate_study(&est, c.x, &c.n_grid, c.reps, c.seed)?;
    let csv = report_csv(c, &report);
    Ok((exp.config, report, csv))
}

fn risk_cmd(config_path: &Path, out_path: Option<&Path>, plot: Option<&Path>, out: &mut String) -> Result<()> {
    let cfg = ExperimentConfig::load(config_path)?;
    let (_, report, csv) = run_experiment(&cfg)?;
    match out_path {
        Some(p) => std::fs::write(p, &csv)?,
        None => out.push_str(&csv),
    }
    if let Some(p) = plot {
        std::fs::write(p, report_svg(&report))?;
    }
    Ok(())
}

/// Log-log plot of risk against `n` with the fitted line.
pub fn report_svg(report: &RiskReport) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const M: f64 = 48.0;
    let pts: Vec<(f64, f64)> = report
        .points
        .iter()
        .filter(|p| p.risk > 0.0)
        .map(|p| ((p.n as f64).ln(), p.risk.ln()))
        .collect();
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{M}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        xml_escape(&report.estimator_id)
    );
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (y0, y1) = pts.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let sx = |x: f64| M + (x - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0).max(1e-12) * (H - 2.0 * M);
    let _ = writeln!(
        s,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>",
        H - M,
        W - M,
        H - M,
        H - M
    );
    for &(x, y) in &pts {
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>", sx(x), sy(y));
    }
    if let Some(b) = report.slope {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let a = my - b * mx;
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"firebrick\"/>\n\
             <text x=\"{M}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">slope {b:.4}</text>",
            sx(x0),
            sy(a + b * x0),
            sx(x1),
            sy(a + b * x1),
            H - 12.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">ln n</text>\n\
         <text x=\"6\" y=\"{M}\" font-family=\"sans-serif\" font-size=\"11\">ln risk</text>",
        W - M,
        H - M + 16.0
    );
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
