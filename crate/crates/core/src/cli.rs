//! Command-line front end: single evaluations, convergence studies, kernel
//! dumps and rule dumps, all written as CSV.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::engine::{evaluate_on_grid, Stepper, TimeGrid};
use crate::error::Error;
use crate::fractional::{make_order, FractionalOrder};
use crate::oracle::{phi_direct, rl_direct, SourceFunction};
use crate::quadrature::build_diffusive_rule;
use crate::transform::{Endpoint, TransformSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Repetitions per convergence row; the fastest is reported.
const TIMING_REPEATS: usize = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fracint",
    version,
    about = "Riemann–Liouville fractional integrals via diffusive representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate J^alpha f on a uniform grid and print `t,value` rows.
    Eval(CommonArgs),
    /// Error and timing study over the N and M lists.
    Convergence(CommonArgs),
    /// Dump |phi(t, omega)| over an omega range.
    Kernel(CommonArgs),
    /// Dump the omega-space quadrature rule.
    Nodes(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// exp | square | power | tan | rational
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// const | zero | poly:<beta> | sin | exp | cos
    #[arg(long = "f")]
    f: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Half rule sizes M_half, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// be | trap | trap-plain
    #[arg(long)]
    stepper: Option<String>,
    /// Oracle tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time at which the kernel is dumped (defaults to b).
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega_max: Option<f64>,
    #[arg(long)]
    omega_count: Option<usize>,
}

/// Experiment settings as read from JSON; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha: Option<f64>,
    pub transform: Option<String>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    #[serde(alias = "f_tag")]
    pub f: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    #[serde(alias = "N_list")]
    pub n: Option<Vec<usize>>,
    #[serde(alias = "M_list")]
    pub m: Option<Vec<usize>>,
    pub stepper: Option<String>,
    pub tol: Option<f64>,
    #[serde(alias = "output_path")]
    pub out: Option<PathBuf>,
    pub t: Option<f64>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub omega_count: Option<usize>,
}

/// Validated experiment settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub order: FractionalOrder,
    pub transform: TransformSpec,
    pub f_tag: String,
    pub f: SourceFunction,
    pub a: f64,
    pub b: f64,
    pub n_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub stepper: Stepper,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub t: Option<f64>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub omega_count: usize,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ToleranceNotMet { .. } | Error::Convergence(_) | Error::Pole(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Numerical(format!("i/o error: {e}"))
    }
}

fn is_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ConfigFile {
    fn merge(mut self, args: CommonArgs) -> Self {
        macro_rules! take {
            ($($field:ident),*) => { $( if args.$field.is_some() { self.$field = args.$field; } )* };
        }
        take!(
            alpha,
            transform,
            sigma,
            rho,
            f,
            a,
            b,
            n,
            m,
            stepper,
            tol,
            out,
            t,
            omega_min,
            omega_max,
            omega_count
        );
        self
    }

    /// Applies defaults and checks every field.
    pub fn validate(self) -> Result<ExperimentConfig, String> {
        let alpha = self.alpha.unwrap_or(0.5);
        let order = make_order(alpha).map_err(|e| e.to_string())?;
        let transform = TransformSpec::from_cli(
            self.transform.as_deref().unwrap_or("exp"),
            alpha,
            self.sigma.unwrap_or(1.0),
            self.rho.unwrap_or(1.0),
        )
        .map_err(|e| e.to_string())?;
        let a = self.a.unwrap_or(0.0);
        let b = self.b.unwrap_or(1.0);
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(format!("need finite a < b, got a = {a}, b = {b}"));
        }
        let f_tag = self.f.unwrap_or_else(|| "const".to_string());
        let f = SourceFunction::from_tag(&f_tag, a).map_err(|e| e.to_string())?;
        let n_list = self.n.unwrap_or_else(|| vec![4096]);
        let m_list = self.m.unwrap_or_else(|| vec![40]);
        if n_list.is_empty() || n_list.contains(&0) || !is_increasing(&n_list) {
            return Err(format!(
                "--n must be a non-empty increasing list of positive sizes, got {n_list:?}"
            ));
        }
        if m_list.is_empty() || m_list.contains(&0) || !is_increasing(&m_list) {
            return Err(format!(
                "--m must be a non-empty increasing list of positive sizes, got {m_list:?}"
            ));
        }
        let stepper: Stepper = self
            .stepper
            .as_deref()
            .unwrap_or("trap")
            .parse()
            .map_err(|e: Error| e.to_string())?;
        let tol = self.tol.unwrap_or(1e-10);
        if !(tol > 0.0 && tol <= crate::oracle::MAX_TOLERANCE) {
            return Err(format!("--tol must lie in (0, 1e-3], got {tol}"));
        }
        let omega_count = self.omega_count.unwrap_or(49);
        if omega_count < 2 {
            return Err(format!("--omega-count must be at least 2, got {omega_count}"));
        }
        Ok(ExperimentConfig {
            order,
            transform,
            f_tag,
            f,
            a,
            b,
            n_list,
            m_list,
            stepper,
            tol,
            out: self.out,
            t: self.t,
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            omega_count,
        })
    }
}

/// Formats a float so that it parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:?}")
    }
}

/// Runs the CLI with explicit arguments and streams; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli) {
        Ok(csv) => match emit(&csv.0, csv.1.as_ref(), stdout) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_NUMERICAL
            }
        },
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Numerical(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_NUMERICAL
        }
    }
}

fn emit(csv: &str, out: Option<&PathBuf>, stdout: &mut dyn Write) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, csv),
        None => stdout.write_all(csv.as_bytes()),
    }
}

fn load(args: CommonArgs) -> Result<ExperimentConfig, Failure> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    file.merge(args).validate().map_err(Failure::Usage)
}

fn dispatch(cli: Cli) -> Result<(String, Option<PathBuf>), Failure> {
    let (cfg, body) = match cli.command {
        Command::Eval(a) => {
            let cfg = load(a)?;
            let body = cmd_eval(&cfg)?;
            (cfg, body)
        }
        Command::Convergence(a) => {
            let cfg = load(a)?;
            let body = cmd_convergence(&cfg)?;
            (cfg, body)
        }
        Command::Kernel(a) => {
            let cfg = load(a)?;
            let body = cmd_kernel(&cfg)?;
            (cfg, body)
        }
        Command::Nodes(a) => {
            let cfg = load(a)?;
            let body = cmd_nodes(&cfg)?;
            (cfg, body)
        }
    };
    Ok((body, cfg.out))
}

fn single(list: &[usize], name: &str) -> Result<usize, Failure> {
    match list {
        [v] => Ok(*v),
        _ => Err(Failure::Usage(format!(
            "{name} takes a single value here, got {list:?}"
        ))),
    }
}

/// `t,value` for every point of the uniform grid.
fn cmd_eval(cfg: &ExperimentConfig) -> Result<String, Failure> {
    let n = single(&cfg.n_list, "--n")?;
    let m = single(&cfg.m_list, "--m")?;
    let grid = TimeGrid::uniform(cfg.a, cfg.b, n)?;
    let values = evaluate_on_grid(&cfg.order, &cfg.transform, &cfg.f, &grid, m, cfg.stepper)?;
    let mut csv = String::from("t,value\n");
    for (t, v) in grid.points().iter().zip(&values) {
        csv.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*v)));
    }
    Ok(csv)
}

/// Reference values of the fractional integral on `grid`.
fn oracle_values(cfg: &ExperimentConfig, grid: &TimeGrid) -> Result<Vec<f64>, Failure> {
    grid.points()
        .iter()
        .map(|&t| match cfg.f.closed_form(&cfg.order, cfg.a, t) {
            Some(v) => v.map_err(Failure::from),
            None => rl_direct(&cfg.order, &cfg.f, cfg.a, t, cfg.tol)
                .map_err(|e| Failure::Numerical(format!("oracle failed: {e}"))),
        })
        .collect()
}

/// Largest relative error; absolute where the reference is below `1e-14`.
pub fn max_relative_error(approx: &[f64], exact: &[f64]) -> f64 {
    approx
        .iter()
        .zip(exact)
        .map(|(&a, &e)| relative_error(a, e))
        .fold(0.0, f64::max)
}

fn relative_error(a: f64, e: f64) -> f64 {
    let d = (a - e).abs();
    if e.abs() < 1e-14 {
        d
    } else {
        d / e.abs()
    }
}

/// `N,M,stepper,max_rel_error,eoc,runtime_ns`. The order column compares
/// the errors at `t = b` of consecutive rows.
fn cmd_convergence(cfg: &ExperimentConfig) -> Result<String, Failure> {
    if cfg.n_list.len() < 3 {
        return Err(Failure::Usage(format!(
            "convergence needs at least 3 grid sizes, got {:?}",
            cfg.n_list
        )));
    }
    let mut csv = String::from("N,M,stepper,max_rel_error,eoc,runtime_ns\n");
    let grids = cfg
        .n_list
        .iter()
        .map(|&n| TimeGrid::uniform(cfg.a, cfg.b, n).map_err(Failure::from))
        .collect::<Result<Vec<_>, _>>()?;
    let oracles = grids
        .iter()
        .map(|g| oracle_values(cfg, g))
        .collect::<Result<Vec<_>, _>>()?;
    for &m in &cfg.m_list {
        let mut prev: Option<(usize, f64)> = None;
        for ((grid, exact), &n) in grids.iter().zip(&oracles).zip(&cfg.n_list) {
            let mut best = u128::MAX;
            let mut values = Vec::new();
            for _ in 0..TIMING_REPEATS {
                let start = Instant::now();
                values = evaluate_on_grid(&cfg.order, &cfg.transform, &cfg.f, grid, m, cfg.stepper)?;
                best = best.min(start.elapsed().as_nanos());
            }
            let max_err = max_relative_error(&values, exact);
            let end_err = relative_error(values[values.len() - 1], exact[exact.len() - 1]);
            let eoc = match prev {
                Some((pn, pe)) if pe > 0.0 && end_err > 0.0 => (pe / end_err).ln() / (n as f64 / pn as f64).ln(),
                _ => f64::NAN,
            };
            prev = Some((n, end_err));
            csv.push_str(&format!(
                "{n},{m},{},{},{},{best}\n",
                cfg.stepper,
                fmt_f64(max_err),
                fmt_f64(eoc)
            ));
        }
    }
    Ok(csv)
}

fn default_omega_range(spec: &TransformSpec) -> (f64, f64) {
    let d = spec.domain();
    match (d.lo, d.hi) {
        (Endpoint::NegInfinity, Endpoint::PosInfinity) => (-12.0, 12.0),
        (Endpoint::Finite(lo), Endpoint::Finite(hi)) => {
            let w = hi - lo;
            (lo + 0.01 * w, hi - 0.01 * w)
        }
        (Endpoint::Finite(lo), _) => (lo + 0.01, lo + 100.0),
        (_, Endpoint::Finite(hi)) => (hi - 100.0, hi - 0.01),
        _ => (-12.0, 12.0),
    }
}

/// `omega,psi,phi_abs` on an evenly spaced omega range.
fn cmd_kernel(cfg: &ExperimentConfig) -> Result<String, Failure> {
    let t = cfg.t.unwrap_or(cfg.b);
    if !(t >= cfg.a && t <= cfg.b) {
        return Err(Failure::Usage(format!("--t must lie in [a, b], got {t}")));
    }
    let (dlo, dhi) = default_omega_range(&cfg.transform);
    let lo = cfg.omega_min.unwrap_or(dlo);
    let hi = cfg.omega_max.unwrap_or(dhi);
    if !(lo < hi) {
        return Err(Failure::Usage(format!("need omega-min < omega-max, got {lo}, {hi}")));
    }
    let count = cfg.omega_count;
    let mut csv = String::from("omega,psi,phi_abs\n");
    for i in 0..count {
        let w = if i + 1 == count {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / (count - 1) as f64)
        };
        let psi = cfg.transform.psi(w)?;
        let phi = phi_direct(&cfg.order, &cfg.transform, &cfg.f, cfg.a, t, w, cfg.tol)?;
        csv.push_str(&format!("{},{},{}\n", fmt_f64(w), fmt_f64(psi), fmt_f64(phi.abs())));
    }
    Ok(csv)
}

/// `m,omega,weight,psi,lambda_stiffness` for the rule serving `[a, b]`.
fn cmd_nodes(cfg: &ExperimentConfig) -> Result<String, Failure> {
    let m = single(&cfg.m_list, "--m")?;
    let rule = build_diffusive_rule(&cfg.order, &cfg.transform, m, cfg.b - cfg.a)?;
    let mut csv = String::from("m,omega,weight,psi,lambda_stiffness\n");
    for (i, (&w, &wt)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let psi = cfg.transform.psi(w)?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            fmt_f64(w),
            fmt_f64(wt),
            fmt_f64(psi),
            fmt_f64(psi)
        ));
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["fracint"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn float_format_round_trips() {
        assert_eq!(fmt_f64(1.0), "1.0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn eval_prints_grid() {
        let (code, out, _) = run_capture(&["eval", "--n", "4", "--m", "10"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "t,value");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("1.0,"));
    }

    #[test]
    fn validation_exit_codes() {
        let (code, _, err) = run_capture(&["eval", "--alpha", "1.0"]);
        assert_eq!(code, 2);
        assert!(err.contains("IntegerOrder"), "{err}");
        assert_eq!(run_capture(&["eval", "--n", "8,4"]).0, 2);
        assert_eq!(run_capture(&["eval", "--f", "tanh"]).0, 2);
        assert_eq!(run_capture(&["nodes", "--m", "0"]).0, 2);
        assert_eq!(
            run_capture(&[
                "kernel",
                "--transform",
                "square",
                "--omega-min",
                "-1",
                "--omega-max",
                "1"
            ])
            .0,
            2
        );
        assert_eq!(run_capture(&["convergence", "--n", "64,128"]).0, 2);
        assert_eq!(run_capture(&["bogus"]).0, 2);
    }

    #[test]
    fn nodes_dump() {
        let (code, out, _) = run_capture(&["nodes", "--m", "2"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "m,omega,weight,psi,lambda_stiffness");
        assert_eq!(lines.len(), 5);
        for l in &lines[1..] {
            let c: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            assert!(c[2] > 0.0);
            assert_eq!(c[3], c[1].exp());
            assert_eq!(c[4], c[3]);
        }
    }

    #[test]
    fn max_relative_error_uses_absolute_near_zero() {
        assert!((max_relative_error(&[1e-15, 2.2], &[0.0, 2.0]) - 0.1).abs() < 1e-15);
        assert_eq!(max_relative_error(&[3e-15], &[1e-15]), 3e-15 - 1e-15);
    }
}
