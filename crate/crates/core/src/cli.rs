//! Command-line front end: `fit`, `density` and `simulate`.
//!
//! Exit codes are 0 on success, 2 for invalid input or usage, 3 when the
//! numerics fail (optimizer, quadrature) or a fit ends without converging.
//! Every command that writes files also writes a JSON run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::densities::{Family, Layout, ModelParams};
use crate::error::Error;
use crate::fit::{fit, FitConfig, FitResult, GradMode};
use crate::geometry::CoreGeometry;
use crate::likelihood::{DataType, Dataset, ModelSpec};
use crate::optimize::Convergence;
use crate::quadrature::QuadratureConfig;
use crate::scales::{Part, Scale, ScaleDensity};
use crate::simulate::{sample, SimSpec};
use crate::summary::{summary_stats, ComponentSummary, Stat, SummaryStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Points per curve written by `fit`.
pub const CURVE_POINTS: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "fiberfit", version, about = "Fiber and fine length distributions from increment cores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model by maximum likelihood and write estimates, summary and curves.
    Fit(FitArgs),
    /// Evaluate a density on one scale.
    Density(DensityArgs),
    /// Simulate lengths on one scale.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Ggamma,
    Lognorm,
}

impl From<ModelArg> for Family {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ggamma => Family::GeneralizedGamma,
            ModelArg::Lognorm => Family::Lognormal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum DataTypeArg {
    Ofa,
    Microscopy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ScaleArg {
    W,
    Y,
    X,
    V,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::W => Scale::W,
            ScaleArg::Y => Scale::Y,
            ScaleArg::X => Scale::X,
            ScaleArg::V => Scale::V,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ComponentArg {
    Fines,
    Fibers,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GradArg {
    Analytic,
    Fd,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// Lengths in mm, one per line; lines starting with '#' are ignored.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "ofa")]
    data_type: DataTypeArg,
    #[arg(long, value_enum, default_value = "ggamma")]
    model: ModelArg,
    /// Core radius in mm.
    #[arg(long)]
    r: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lower: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    upper: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    par_start: Option<Vec<f64>>,
    /// Comma-separated T/F flags in parameter order.
    #[arg(long)]
    fixed: Option<String>,
    #[arg(long, value_enum, default_value = "analytic")]
    grad: GradArg,
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args, Serialize)]
struct DensityArgs {
    #[arg(long, value_enum, default_value = "ggamma")]
    model: ModelArg,
    #[arg(long, value_enum)]
    scale: ScaleArg,
    /// Defaults to mixture for mixture parameters and fibers otherwise.
    #[arg(long, value_enum)]
    component: Option<ComponentArg>,
    /// Parameters in print order: eps first for mixtures, fines before fibers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    par: Vec<f64>,
    /// Core radius in mm; needed on every scale except y.
    #[arg(long)]
    r: Option<f64>,
    /// Evenly spaced points "a:b:n".
    #[arg(long, conflicts_with = "at", allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    at: Option<Vec<f64>>,
    /// CSV output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Observed lengths drawn as a histogram behind the curve.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scale: ScaleArg,
    #[arg(long, value_enum, default_value = "ggamma")]
    model: ModelArg,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    par: Vec<f64>,
    /// Core radius in mm; needed on every scale except y.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

/// Provenance written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub options: serde_json::Value,
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub threads: usize,
    pub elapsed_seconds: f64,
    pub outputs: Vec<String>,
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub family: Family,
    pub data_type: DataType,
    pub r: f64,
    pub labels: Vec<String>,
    /// Original-scale estimates in print order.
    pub estimates: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub fixed: Vec<bool>,
    pub loglik: f64,
    pub convergence: Convergence,
    pub n: usize,
    pub summary: Option<SummaryStats>,
    pub fit: FitResult,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Optimizer(_) | Error::Quadrature { .. } => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let threads = match thread_count() {
        Ok(t) => t,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_NUMERIC;
        }
    };
    let outcome = pool.install(|| match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Density(a) => cmd_density(a),
        Command::Simulate(a) => cmd_simulate(a),
    });
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn thread_count() -> CliResult<usize> {
    match std::env::var("FIBERFIT_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::input(format!("FIBERFIT_THREADS must be a non-negative integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn claim_path(path: &Path, force: bool) -> CliResult<()> {
    if path.exists() && !force {
        return Err(Failure::input(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::numeric(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[allow(clippy::too_many_arguments)]
fn write_manifest<A: Serialize>(
    path: &Path,
    command: &str,
    args: &A,
    input: Option<&[u8]>,
    seed: Option<u64>,
    started: Instant,
    outputs: Vec<String>,
) -> CliResult<()> {
    let m = RunManifest {
        command: command.into(),
        options: serde_json::to_value(args).map_err(|e| Failure::numeric(e.to_string()))?,
        input_sha256: input.map(sha256_hex),
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
        threads: rayon::current_num_threads(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| Failure::numeric(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

fn geometry(r: Option<f64>, scale: Scale) -> CliResult<CoreGeometry> {
    match r {
        Some(r) => Ok(CoreGeometry::new(r)?),
        None if scale == Scale::Y => Ok(CoreGeometry::new(1.0)?),
        None => Err(Failure::input(format!("--r is required on scale {}", scale.label()))),
    }
}

/// Mixture when the count matches a mixture, a single component otherwise.
fn params_from_cli(family: Family, par: &[f64]) -> CliResult<ModelParams> {
    let layout = if par.len() == 1 + 2 * family.component_dim() {
        Layout::Mixture
    } else if par.len() == family.component_dim() {
        Layout::Single
    } else {
        return Err(Failure::input(format!(
            "--par for {} takes {} values (one component) or {} (eps, fines, fibers), got {}",
            family.label(),
            family.component_dim(),
            1 + 2 * family.component_dim(),
            par.len()
        )));
    };
    Ok(ModelParams::from_original(family, layout, par)?)
}

fn parse_flags(s: &str) -> CliResult<Vec<bool>> {
    s.split(',')
        .map(|t| match t.trim().to_ascii_lowercase().as_str() {
            "t" | "true" | "1" => Ok(true),
            "f" | "false" | "0" => Ok(false),
            other => Err(Failure::input(format!("--fixed entries are T or F, got '{other}'"))),
        })
        .collect()
}

/// Parses `"a:b:n"` into `n` evenly spaced points from `a` to `b`.
pub fn parse_grid(s: &str) -> Option<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return None;
    }
    let a: f64 = parts[0].trim().parse().ok()?;
    let b: f64 = parts[1].trim().parse().ok()?;
    let n: usize = parts[2].trim().parse().ok()?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return None;
    }
    if n == 1 {
        return Some(vec![a]);
    }
    Some((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn part_from(arg: ComponentArg) -> Part {
    match arg {
        ComponentArg::Fines => Part::Fines,
        ComponentArg::Fibers => Part::Fibers,
        ComponentArg::Mixture => Part::Mixture,
    }
}

/// `length,density` CSV with round-trip float formatting.
pub fn curve_csv(xs: &[f64], fs: &[f64]) -> String {
    let mut s = String::from("length,density\n");
    for (x, f) in xs.iter().zip(fs) {
        let _ = writeln!(s, "{x},{f}");
    }
    s
}

/// Midpoints of `n` equal cells over `(0, upper)`.
pub fn curve_grid(upper: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| upper * (i as f64 + 0.5) / n as f64).collect()
}

fn cmd_density(a: &DensityArgs) -> CliResult<i32> {
    let started = Instant::now();
    let family: Family = a.model.into();
    let scale: Scale = a.scale.into();
    let params = params_from_cli(family, &a.par)?;
    let geom = geometry(a.r, scale)?;
    let part = match a.component {
        Some(c) => part_from(c),
        None if params.layout() == Layout::Mixture => Part::Mixture,
        None => Part::Fibers,
    };
    let xs = match (&a.grid, &a.at) {
        (Some(g), None) => parse_grid(g).ok_or_else(|| Failure::input(format!("--grid expects a:b:n, got '{g}'")))?,
        (None, Some(at)) => at.clone(),
        _ => return Err(Failure::input("give exactly one of --grid or --at")),
    };
    if let Some(out) = &a.out {
        claim_path(out, a.force)?;
        claim_path(&manifest_path(out), a.force)?;
    }
    if let Some(svg) = &a.svg {
        claim_path(svg, a.force)?;
    }
    let density = ScaleDensity::new(scale, part, &params, geom, QuadratureConfig::default())?;
    let fs = density.eval_many(&xs)?;
    let csv = curve_csv(&xs, &fs);

    let mut data_bytes = None;
    let mut outputs = Vec::new();
    if let Some(svg) = &a.svg {
        let hist = match &a.data {
            Some(p) => {
                let text = read_file(p)?;
                let values = parse_lengths(&text)?;
                data_bytes = Some(text.into_bytes());
                Some(values)
            }
            None => None,
        };
        let title = format!("{} density on scale {} ({})", family, scale.label(), part.label());
        let pts: Vec<(f64, f64)> = xs.iter().copied().zip(fs.iter().copied()).collect();
        write_file(svg, &render_svg(&pts, hist.as_deref(), &title, "length (mm)"))?;
        outputs.push(svg.display().to_string());
    }
    match &a.out {
        Some(out) => {
            write_file(out, &csv)?;
            outputs.insert(0, out.display().to_string());
            write_manifest(&manifest_path(out), "density", a, data_bytes.as_deref(), None, started, outputs)?;
        }
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

/// Lengths from a data file without range checks, for plotting.
fn parse_lengths(text: &str) -> CliResult<Vec<f64>> {
    let mut v = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        v.push(
            t.parse::<f64>()
                .map_err(|_| Failure::input(format!("line {}: '{t}' is not a number", i + 1)))?,
        );
    }
    Ok(v)
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<i32> {
    let started = Instant::now();
    let family: Family = a.model.into();
    let scale: Scale = a.scale.into();
    let params = params_from_cli(family, &a.par)?;
    let geom = geometry(a.r, scale)?;
    let spec = SimSpec {
        scale,
        params,
        geom,
        n: a.n,
        seed: a.seed,
    };
    spec.validate()?;
    claim_path(&a.out, a.force)?;
    let mpath = manifest_path(&a.out);
    claim_path(&mpath, a.force)?;
    let values = sample(&spec)?;
    let mut text = String::with_capacity(values.len() * 20);
    for v in &values {
        let _ = writeln!(text, "{v}");
    }
    write_file(&a.out, &text)?;
    write_manifest(
        &mpath,
        "simulate",
        a,
        None,
        Some(a.seed),
        started,
        vec![a.out.display().to_string()],
    )?;
    Ok(EXIT_OK)
}

fn cmd_fit(a: &FitArgs) -> CliResult<i32> {
    let started = Instant::now();
    let family: Family = a.model.into();
    let data_type = match a.data_type {
        DataTypeArg::Ofa => DataType::Ofa,
        DataTypeArg::Microscopy => DataType::Microscopy,
    };
    let geom = CoreGeometry::new(a.r)?;
    let text = read_file(&a.data)?;
    let data = Dataset::parse(&text, data_type, &geom).map_err(|e| match e {
        Error::InvalidData { message, indices } => {
            let lines: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
            Failure::input(format!("{message}: {}", lines.join(", ")))
        }
        other => other.into(),
    })?;
    let model = ModelSpec {
        family,
        data_type,
        geom,
    };
    let fixed = a.fixed.as_deref().map(parse_flags).transpose()?;
    let cfg = FitConfig {
        lower: a.lower.clone(),
        upper: a.upper.clone(),
        par_start: a.par_start.clone(),
        fixed,
        n_starts: a.starts,
        grad_mode: match a.grad {
            GradArg::Analytic => GradMode::Analytic,
            GradArg::Fd => GradMode::FiniteDifference,
        },
        seed: a.seed,
        ..Default::default()
    };

    if a.out.exists() && !a.force {
        return Err(Failure::input(format!(
            "{} already exists; pass --force to overwrite",
            a.out.display()
        )));
    }
    let result = fit(&data, &model, &cfg)?;
    let summary = summary_stats(&result, &cfg.quadrature);
    if let Err(e) = &summary {
        eprintln!("warning: summary statistics unavailable: {e}");
    }
    let summary = summary.ok();

    fs::create_dir_all(&a.out)
        .map_err(|e| Failure::numeric(format!("cannot create {}: {e}", a.out.display())))?;
    let mut outputs = Vec::new();

    let file = FitFile {
        family,
        data_type,
        r: a.r,
        labels: result.labels.clone(),
        estimates: result.theta_tilde_hat.clone(),
        std_errors: result.se_tilde.clone(),
        fixed: result.theta_hat.fixed.clone(),
        loglik: result.loglik,
        convergence: result.convergence,
        n: result.n,
        summary: summary.clone(),
        fit: result.clone(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| Failure::numeric(e.to_string()))?;
    write_file(&a.out.join("fit.json"), &(json + "\n"))?;
    outputs.push("fit.json".to_string());

    write_file(&a.out.join("summary.txt"), &format_summary(&result, summary.as_ref()))?;
    outputs.push("summary.txt".to_string());

    let params = ModelParams::from_original(family, model.layout(), &result.theta_tilde_hat)?;
    for (scale, part) in fit_curves(model.layout()) {
        let d = ScaleDensity::new(scale, part, &params, geom, cfg.quadrature)?;
        let xs = curve_grid(curve_upper(&d, &geom), CURVE_POINTS);
        let fs = d.eval_many(&xs)?;
        let name = format!("density_{}_{}.csv", scale.label(), part.label());
        write_file(&a.out.join(&name), &curve_csv(&xs, &fs))?;
        outputs.push(name);
    }

    write_manifest(
        &a.out.join("manifest.json"),
        "fit",
        a,
        Some(text.as_bytes()),
        Some(a.seed),
        started,
        outputs,
    )?;

    if result.convergence != Convergence::Success {
        eprintln!("warning: {}", convergence_message(result.convergence));
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

/// Scale and part of every curve `fit` writes.
pub fn fit_curves(layout: Layout) -> Vec<(Scale, Part)> {
    match layout {
        Layout::Single => Scale::ALL.iter().map(|&s| (s, Part::Fibers)).collect(),
        Layout::Mixture => {
            let mut v = Vec::new();
            for s in Scale::ALL {
                for p in [Part::Fines, Part::Fibers, Part::Mixture] {
                    if s != Scale::V || p == Part::Fibers {
                        v.push((s, p));
                    }
                }
            }
            v
        }
    }
}

/// Upper end of a plotted curve: the core diameter on censored scales, and
/// on the others the negligible-tail point capped at twice the diameter.
pub fn curve_upper(d: &ScaleDensity, geom: &CoreGeometry) -> f64 {
    if d.scale().is_censored() {
        geom.diameter()
    } else {
        d.plot_upper().min(2.0 * geom.diameter())
    }
}

pub fn convergence_message(c: Convergence) -> &'static str {
    match c {
        Convergence::Success => "Successful completion",
        Convergence::MaxIter => "Iteration limit reached",
        Convergence::LineSearchFailure => "Line search could not improve the likelihood",
        Convergence::SingularHessian => "Hessian is singular at the optimum; standard errors unavailable",
    }
}

fn fmt_cell(v: Option<f64>, width: usize, digits: usize) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:>width$.digits$}"),
        _ => format!("{:>width$}", "NA"),
    }
}

fn table(out: &mut String, headers: &[String], est: &[f64], se: &[Option<f64>], digits: usize) {
    let widths: Vec<usize> = headers.iter().map(|h| h.len().max(digits + 4)).collect();
    let mut line = format!("{:10}", "");
    for (h, w) in headers.iter().zip(&widths) {
        let _ = write!(line, " {h:>w$}");
    }
    let _ = writeln!(out, "{line}");
    let mut line = format!("{:10}", "Estimate");
    for (v, w) in est.iter().zip(&widths) {
        let _ = write!(line, " {}", fmt_cell(Some(*v), *w, digits));
    }
    let _ = writeln!(out, "{line}");
    let mut line = format!("{:10}", "Std. Error");
    for (v, w) in se.iter().zip(&widths) {
        let _ = write!(line, " {}", fmt_cell(*v, *w, digits));
    }
    let _ = writeln!(out, "{line}");
}

fn stats_table(out: &mut String, title: &str, c: &ComponentSummary) {
    let _ = writeln!(out, "Summary statistics for {title} lengths in the standing tree:");
    let headers: Vec<String> = ["Mean", "Std.dev.", "Skewness", "Kurtosis"].iter().map(|s| s.to_string()).collect();
    let stats: [&Stat; 4] = [&c.mean, &c.sd, &c.skewness, &c.kurtosis];
    let est: Vec<f64> = stats.iter().map(|s| s.value).collect();
    let se: Vec<Option<f64>> = stats.iter().map(|s| s.se).collect();
    table(out, &headers, &est, &se, 5);
    out.push('\n');
}

/// Fixed-width text summary: parameter table (ε last), W-scale statistics
/// per component, proportion of fines, negative log likelihood and
/// convergence.
pub fn format_summary(fit: &FitResult, summary: Option<&SummaryStats>) -> String {
    let mut out = String::new();
    let heading = match fit.model.data_type {
        DataType::Ofa => "Increment core data (all fiber and fine lengths in the core)",
        DataType::Microscopy => "Microscopy data (uncut fibers in the core)",
    };
    let _ = writeln!(out, "{heading}\n");
    let _ = writeln!(out, "Model: {}   Method: ML\n", fit.model.family);
    let _ = writeln!(out, "Model parameters:");

    let n = fit.labels.len();
    let order: Vec<usize> = match fit.theta_hat.layout {
        Layout::Mixture => (1..n).chain([0]).collect(),
        Layout::Single => (0..n).collect(),
    };
    let headers: Vec<String> = order.iter().map(|&i| fit.labels[i].clone()).collect();
    let est: Vec<f64> = order.iter().map(|&i| fit.theta_tilde_hat[i]).collect();
    let se: Vec<Option<f64>> = order
        .iter()
        .map(|&i| {
            if fit.theta_hat.fixed[i] {
                None
            } else {
                fit.se_tilde.as_ref().map(|s| s[i])
            }
        })
        .collect();
    table(&mut out, &headers, &est, &se, 6);
    if fit.theta_hat.fixed.iter().any(|f| *f) {
        let names: Vec<&str> = (0..n)
            .filter(|&i| fit.theta_hat.fixed[i])
            .map(|i| fit.labels[i].as_str())
            .collect();
        let _ = writeln!(out, "Fixed: {}", names.join(" "));
    }
    out.push('\n');

    if let Some(s) = summary {
        stats_table(&mut out, "FIBER", &s.fibers);
        if let Some(f) = &s.fines {
            stats_table(&mut out, "FINE", f);
        }
        if let Some(e) = &s.eps_tilde {
            let se = e.se.map_or("NA".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(out, "Proportion of fines in the standing tree: {:.3} (Std.error = {se})\n", e.value);
        }
    } else {
        let _ = writeln!(out, "Summary statistics unavailable\n");
    }
    let _ = writeln!(out, "-Loglik = {:.3}   Sample size: n = {}\n", -fit.loglik, fit.n);
    let _ = writeln!(out, "Convergence: {}", convergence_message(fit.convergence));
    out
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let step = nice_step(hi - lo, 5);
    let mut t = (lo / step).ceil() * step;
    let mut v = Vec::new();
    while t <= hi + 1e-9 * step {
        v.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    v
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// A single-curve SVG line plot with axis ticks. When `data` is given, its
/// density-scaled histogram is drawn behind the curve.
pub fn render_svg(curve: &[(f64, f64)], data: Option<&[f64]>, title: &str, xlabel: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 36.0, 48.0);
    let finite: Vec<(f64, f64)> = curve.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let mut x_lo = finite.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut x_hi = finite.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
    }
    x_lo = x_lo.min(0.0);

    let mut bars = Vec::new();
    if let Some(d) = data {
        let d: Vec<f64> = d.iter().copied().filter(|v| v.is_finite() && *v >= x_lo && *v <= x_hi).collect();
        if !d.is_empty() {
            let bins = ((d.len() as f64).sqrt().round() as usize).clamp(10, 60);
            let width = (x_hi - x_lo) / bins as f64;
            let mut counts = vec![0usize; bins];
            for v in &d {
                let b = (((v - x_lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
            let total = data.map_or(d.len(), |all| all.len()) as f64;
            for (b, c) in counts.iter().enumerate() {
                bars.push((x_lo + b as f64 * width, width, *c as f64 / (total * width)));
            }
        }
    }
    let y_hi = finite
        .iter()
        .map(|p| p.1)
        .chain(bars.iter().map(|b| b.2))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1.05;
    let px = |x: f64| ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr);
    let py = |y: f64| h - mb - y / y_hi * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" font-size="14" text-anchor="middle" font-family="sans-serif">{}</text>"#, w / 2.0, escape(title));
    for (x0, bw, v) in &bars {
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#d0d8e8" stroke="#8090b0" stroke-width="0.5"/>"##,
            px(*x0),
            py(*v),
            px(x0 + bw) - px(*x0),
            py(0.0) - py(*v)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - mb,
        w - mr,
        h - mb
    );
    let _ = writeln!(s, r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#, h - mb);
    for t in ticks(x_lo, x_hi) {
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, h - mb, h - mb + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" font-size="11" text-anchor="middle" font-family="sans-serif">{}</text>"#,
            h - mb + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(0.0, y_hi) {
        let y = py(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="black"/>"#, ml - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end" font-family="sans-serif">{}</text>"#,
            ml - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle" font-family="sans-serif">{}</text>"#,
        (ml + w - mr) / 2.0,
        h - 10.0,
        escape(xlabel)
    );
    let pts: Vec<String> = finite.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
    let _ = writeln!(s, r##"<polyline fill="none" stroke="#b02020" stroke-width="1.5" points="{}"/>"##, pts.join(" "));
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
