//! Command-line front end. `main.rs` only forwards to [`run`].
//!
//! Exit codes: 0 success, 2 usage error, 3 data or format error, 4
//! numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{
    cis_fused_snr_curve, cis_snr_curve, dynamic_range, fused_snr_curve, histogram_fit, lmse, log_grid,
    per_exposure_snr_curves, SnrCurve, WeightRule,
};
use crate::cis::CisParams;
use crate::error::Error;
use crate::fusion::{
    cis_weight_rows, fuse_cis_weights, fuse_equal_weight, iterative_reconstruct, ldr_estimates, FusionConfig, Solver,
    WeightMap,
};
use crate::io;
use crate::sim::{simulate_stack, ExposureSchedule, RadianceMap};
use crate::stats::SensorParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qis-hdr", version, about = "Quanta image sensor simulation and HDR fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate a bracketed frame stack from a PFM radiance map.
    Simulate(SimulateArgs),
    /// Fuse a frame stack into a flux estimate.
    Fuse(FuseArgs),
    /// Evaluate SNR curves.
    Snr(SnrArgs),
    /// Dynamic range of a curve.
    Dr(DrArgs),
    /// Fit flux to photon-counting histogram samples.
    Histfit(HistfitArgs),
    /// Log-domain MSE between two PFM images.
    Eval(EvalArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SensorArgs {
    /// ADC bit depth; L = 2^bits - 1.
    #[arg(long, default_value_t = 1)]
    pub bits: u32,
    /// Read noise, electrons r.m.s.
    #[arg(long = "read-noise", default_value_t = 0.25)]
    pub read_noise: f64,
    /// Dark current, electrons per second.
    #[arg(long, default_value_t = 0.0)]
    pub dark: f64,
}

impl SensorArgs {
    fn params(&self) -> crate::Result<SensorParams> {
        SensorParams::with_bits(self.bits, self.read_noise, self.dark)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma list of `duration:count`, e.g. `75us:10,375us:10`.
    #[arg(long)]
    pub exposures: String,
    /// Frame period; defaults to the longest exposure.
    #[arg(long = "frame-period", value_parser = parse_seconds)]
    pub frame_period: Option<f64>,
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    Equal,
    Cis,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FuseArgs {
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Proposed)]
    pub method: Method,
    #[arg(long = "max-iter", default_value_t = 10)]
    pub max_iter: u32,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Update rule of the proposed method.
    #[arg(long, value_enum, default_value_t = SolverArg::FixedPoint)]
    #[serde(default)]
    pub solver: SolverArg,
    /// PFM holding the per-exposure weight planes stacked vertically.
    #[arg(long = "weights-out")]
    pub weights_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    #[default]
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Optimal,
    Equal,
    Cis,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub sensor: SensorArgs,
    #[arg(long, default_value = "1ms:1000")]
    pub exposures: String,
    /// Flux grid `lo:hi:n`, log-spaced, photons per second.
    #[arg(long, default_value = "1e-2:1e8:5121")]
    pub grid: String,
    /// Fuse all exposures (the default when more than one is given).
    #[arg(long, conflicts_with = "per_exposure")]
    pub fused: bool,
    /// One curve per exposure.
    #[arg(long = "per-exposure")]
    pub per_exposure: bool,
    /// Weighting of the fused curve.
    #[arg(long, value_enum, default_value_t = Rule::Optimal)]
    pub rule: Rule,
    /// Evaluate a conventional sensor with this full-well capacity instead.
    #[arg(long = "cis-full-well")]
    pub cis_full_well: Option<u32>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SnrArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Output CSV. With `--per-exposure` and several exposures, the
    /// exposure index is inserted before the extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DrArgs {
    /// Curve CSV; if absent the curve is computed from the inline options.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub inline: CurveArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub threshold: f64,
    /// Also write the report; `.json` gives JSON, anything else CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HistfitArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long = "read-noise")]
    pub read_noise: f64,
    /// Integration time.
    #[arg(long, value_parser = parse_seconds)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dark: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    crate::sim::parse_duration(s).map_err(|e| e.to_string())
}

/// What a run needs to be reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub argv: Vec<String>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_clock_seconds: f64,
}

/// `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) => EXIT_USAGE,
        Error::Format { .. } | Error::Unsupported(_) | Error::Io { .. } => EXIT_DATA,
        Error::Fit(_) | Error::Numerical(_) => EXIT_NUMERICAL,
    }
}

/// Parse `args` (including the program name) and execute, writing results
/// to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let argv: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, argv, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

struct Recorder {
    start: Instant,
    argv: Vec<String>,
    command: Command,
}

impl Recorder {
    fn finish(&self, inputs: Vec<PathBuf>, outputs: &[PathBuf], seed: Option<u64>) -> crate::Result<()> {
        let Some(primary) = outputs.first() else {
            return Ok(());
        };
        let parameters = serde_json::to_value(&self.command).map_err(|e| Error::Numerical(e.to_string()))?;
        let subcommand = parameters
            .as_object()
            .and_then(|o| o.keys().next().cloned())
            .unwrap_or_default();
        let manifest = RunManifest {
            subcommand,
            argv: self.argv.clone(),
            parameters,
            inputs,
            outputs: outputs.to_vec(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        };
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numerical(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn write_line(out: &mut dyn Write, text: impl std::fmt::Display) -> crate::Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn to_json<T: Serialize>(v: &T) -> crate::Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Numerical(e.to_string()))
}

fn execute(command: Command, argv: Vec<String>, out: &mut dyn Write) -> crate::Result<()> {
    let rec = Recorder {
        start: Instant::now(),
        argv,
        command: command.clone(),
    };
    match command {
        Command::Simulate(a) => simulate(&a, &rec, out),
        Command::Fuse(a) => fuse(&a, &rec, out),
        Command::Snr(a) => snr(&a, &rec, out),
        Command::Dr(a) => dr(&a, &rec, out),
        Command::Histfit(a) => {
            let samples = io::read_samples(&a.samples)?;
            let fit = histogram_fit(&samples, a.read_noise, a.dark, a.dt)?;
            write_line(out, to_json(&fit)?)
        }
        Command::Eval(a) => {
            let est = io::read_pfm(&a.estimate)?;
            let truth = io::read_pfm(&a.truth)?;
            if (est.width(), est.height()) != (truth.width(), truth.height()) {
                return Err(Error::format(
                    0,
                    format!(
                        "estimate is {}×{}, ground truth {}×{}",
                        est.width(),
                        est.height(),
                        truth.width(),
                        truth.height()
                    ),
                ));
            }
            let v = lmse(est.flux(), truth.flux())?;
            write_line(out, format!("{v:.16e}"))
        }
        Command::Replay(a) => {
            let text = std::fs::read_to_string(&a.manifest).map_err(|e| Error::io(&a.manifest, e))?;
            let manifest: RunManifest =
                serde_json::from_str(&text).map_err(|e| Error::format(0, format!("bad manifest: {e}")))?;
            if manifest.argv.first().map(String::as_str) == Some("replay") {
                return Err(Error::domain("a replay manifest cannot be replayed"));
            }
            let mut full = vec!["qis-hdr".to_string()];
            full.extend(manifest.argv);
            let cli = Cli::try_parse_from(&full).map_err(|e| Error::domain(format!("manifest arguments: {e}")))?;
            let argv = full.split_off(1);
            execute(cli.command, argv, out)
        }
    }
}

fn simulate(a: &SimulateArgs, rec: &Recorder, out: &mut dyn Write) -> crate::Result<()> {
    let params = a.sensor.params()?;
    let schedule = ExposureSchedule::parse(&a.exposures, a.frame_period)?;
    let scene = io::read_pfm(&a.scene)?;
    let stack = simulate_stack(&scene, &schedule, &params, a.seed)?;
    io::write_stack(&a.out, &stack)?;
    write_line(
        out,
        "group,exposure_s,frames,mean_code,zero_fraction,saturated_fraction",
    )?;
    for (m, (group, exp)) in stack.frames.iter().zip(&schedule.groups).enumerate() {
        let total = (group.len() * stack.pixels()) as f64;
        let (mut sum, mut zeros, mut full) = (0u64, 0u64, 0u64);
        for &c in group.iter().flatten() {
            sum += c as u64;
            zeros += (c == 0) as u64;
            full += (c as u32 == params.clip_level) as u64;
        }
        write_line(
            out,
            format!(
                "{m},{:e},{},{:.6},{:.6},{:.6}",
                exp.duration,
                exp.frames,
                sum as f64 / total,
                zeros as f64 / total,
                full as f64 / total
            ),
        )?;
    }
    rec.finish(vec![a.scene.clone()], std::slice::from_ref(&a.out), Some(a.seed))
}

fn fuse(a: &FuseArgs, rec: &Recorder, out: &mut dyn Write) -> crate::Result<()> {
    let stack = io::read_stack(&a.stack)?;
    let config = FusionConfig {
        max_iterations: a.max_iter,
        convergence_tol: a.tol,
        solver: match a.solver {
            SolverArg::FixedPoint => Solver::FixedPoint,
            SolverArg::Newton => Solver::Newton,
        },
        ..FusionConfig::default()
    };
    config.validate()?;
    let clip = stack.params.clip_level as f64;
    let (flux, weights, summary) = match a.method {
        Method::Proposed => {
            let r = iterative_reconstruct(&stack, &config)?;
            let summary = json!({
                "method": "proposed",
                "iterations": r.iterations,
                "converged": r.converged,
                "changes": r.changes,
                "degenerate_pixels": r.degenerate.iter().filter(|d| **d).count(),
            });
            (r.flux, r.weights, summary)
        }
        Method::Equal => {
            let ldrs = ldr_estimates(&stack)?;
            let flux = fuse_equal_weight(&ldrs)?;
            (
                flux,
                WeightMap::uniform(stack.pixels(), ldrs.len()),
                json!({"method": "equal"}),
            )
        }
        Method::Cis => {
            let ldrs = ldr_estimates(&stack)?;
            let flux = fuse_cis_weights(&ldrs, clip)?;
            let w = WeightMap::from_rows(&cis_weight_rows(&ldrs, clip)?)?;
            (flux, w, json!({"method": "cis"}))
        }
    };
    let map = RadianceMap::new(stack.width, stack.height, flux)
        .map_err(|e| Error::Numerical(format!("fused estimate is invalid: {e}")))?;
    io::write_pfm(&a.out, &map)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(path) = &a.weights_out {
        let planes: Vec<f64> = (0..weights.exposures()).flat_map(|m| weights.plane(m)).collect();
        io::write_pfm_values(path, stack.width, stack.height * weights.exposures(), &planes)?;
        outputs.push(path.clone());
    }
    write_line(out, to_json(&summary)?)?;
    rec.finish(vec![a.stack.clone()], &outputs, Some(stack.seed))
}

fn parse_grid(s: &str) -> crate::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::domain(format!("grid `{s}` is not `lo:hi:n`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(Error::domain("empty grid"));
    }
    log_grid(lo, hi, n)
}

fn curves(a: &CurveArgs) -> crate::Result<Vec<SnrCurve>> {
    let schedule = ExposureSchedule::parse(&a.exposures, None)?;
    let grid = parse_grid(&a.grid)?;
    let fused = !a.per_exposure && (a.fused || schedule.len() > 1);
    if let Some(full_well) = a.cis_full_well {
        let cis = CisParams::new(full_well, a.sensor.read_noise)?;
        return if fused {
            Ok(vec![cis_fused_snr_curve(&cis, &schedule, &grid)?])
        } else {
            schedule
                .groups
                .iter()
                .map(|g| cis_snr_curve(&cis, g.duration, g.frames, &grid))
                .collect()
        };
    }
    let params = a.sensor.params()?;
    if fused {
        let rule = match a.rule {
            Rule::Optimal => WeightRule::Optimal,
            Rule::Equal => WeightRule::Equal,
            Rule::Cis => WeightRule::CisIndicator,
        };
        Ok(vec![fused_snr_curve(&params, &schedule, &rule, &grid)?])
    } else {
        per_exposure_snr_curves(&params, &schedule, &grid)
    }
}

fn indexed_path(path: &Path, m: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{m}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{m}"),
    };
    path.with_file_name(name)
}

fn snr(a: &SnrArgs, rec: &Recorder, out: &mut dyn Write) -> crate::Result<()> {
    let curves = curves(&a.curve)?;
    let mut outputs = Vec::new();
    for (m, c) in curves.iter().enumerate() {
        let path = if curves.len() == 1 {
            a.out.clone()
        } else {
            indexed_path(&a.out, m)
        };
        io::write_curve_csv(&path, c)?;
        let (at, peak) = c.peak();
        write_line(out, format!("{}: peak {peak:.3} dB at {at:.6e}", path.display()))?;
        outputs.push(path);
    }
    rec.finish(Vec::new(), &outputs, None)
}

fn dr(a: &DrArgs, rec: &Recorder, out: &mut dyn Write) -> crate::Result<()> {
    let (curve, inputs) = match &a.curve {
        Some(path) => (io::read_curve_csv(path)?, vec![path.clone()]),
        None => {
            let mut cs = curves(&a.inline)?;
            if cs.len() != 1 {
                return Err(Error::domain("dynamic range needs a single curve; drop --per-exposure"));
            }
            (cs.remove(0), Vec::new())
        }
    };
    let report = dynamic_range(&curve, a.threshold).map_err(|e| Error::Numerical(e.to_string()))?;
    write_line(out, to_json(&report)?)?;
    if let Some(path) = &a.out {
        if path.extension().is_some_and(|e| e == "json") {
            io::write_report_json(path, &report)?;
        } else {
            io::write_report_csv(path, &report)?;
        }
        rec.finish(inputs, std::slice::from_ref(path), None)?;
    }
    Ok(())
}
