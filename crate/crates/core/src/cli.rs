//! Command-line drivers for the property report, the hydrogenic spin and
//! position data, the precession sweeps and the classical ensemble.
//!
//! Every command resolves its parameters from embedded defaults, then an
//! optional flat `key = value` file, then command-line flags, and validates
//! them before computing anything. Outputs are CSV and JSON with the resolved
//! parameters written into their headers.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::classical::{
    integrate_cycles, regime_ratio, summarize, uniform_ensemble, CancellationSummary, Ensemble, TorqueModel,
};
use crate::dynamics::{
    expected_rate, log_log_slope, log_uniform_amplitudes, precession_run, sweep_config, Backend, Integrator,
    PrecessionResult, PropagationConfig, SweepSettings,
};
use crate::error::{Error, Result};
use crate::hydrogenic::{ground_state_observables, spin_z_for_projection, GroundStateObservables, Projection};
use crate::laser::{omega_p, omega_prediction, LaserConfig};
use crate::position::PositionKind;
use crate::spin::{check_properties, PropertyReport, SpinOperatorKind, PROPERTY_NAMES, PROPERTY_TOLERANCE};
use crate::units::{field_to_si, intensity_to_w_per_cm2, length_from_si, length_to_si};

/// Version tag of every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "relspin", version, about = "Relativistic electron-spin experiments")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for sampled momenta.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Flat `key = value` parameter file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Reduced grids and sweeps.
    #[arg(long, global = true)]
    pub fast: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Property report for the seven spin operators.
    Table1(Table1Args),
    /// Hydrogenic spin expectations and position variances against Z.
    Fig1(Fig1Args),
    /// Spin precession frequency against field amplitude.
    Fig2(Fig2Args),
    /// Classical spin ensemble in the standing wave.
    Classical(ClassicalArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct Table1Args {
    /// Sampled momenta per operator.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Fig1Args {
    /// Atomic numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub z: Option<Vec<f64>>,
    /// Grid points per axis.
    #[arg(long)]
    pub points: Option<usize>,
    /// Spin operators to report, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Fig2Args {
    /// Field amplitudes in a.u., comma separated; overrides the log sweep.
    #[arg(long, value_delimiter = ',')]
    pub amplitudes: Option<Vec<f64>>,
    /// Top of the log sweep, a.u.
    #[arg(long)]
    pub max_amplitude: Option<f64>,
    /// Decades spanned below the top amplitude.
    #[arg(long)]
    pub decades: Option<f64>,
    /// Points in the log sweep.
    #[arg(long)]
    pub count: Option<usize>,
    /// Laser wavelength, nm.
    #[arg(long)]
    pub wavelength_nm: Option<f64>,
    /// dirac, relpauli, nrpauli or fw, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub backends: Option<Vec<String>>,
    /// sin^2 ramp length in optical periods.
    #[arg(long)]
    pub ramp_periods: Option<usize>,
    /// Pulses in the measured train.
    #[arg(long)]
    pub pulses: Option<usize>,
    /// Grid points per wavelength.
    #[arg(long)]
    pub points: Option<usize>,
    /// Rotation per pulse the flat top is sized for, rad.
    #[arg(long)]
    pub target_rotation: Option<f64>,
    /// strang or yoshida4.
    #[arg(long)]
    pub integrator: Option<String>,
    /// Repeat every point with half the time step.
    #[arg(long)]
    pub dt_check: bool,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ClassicalArgs {
    /// Field amplitude in a.u. for the trajectory data.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Extra amplitudes for the residual-rate scan, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub scan: Option<Vec<f64>>,
    /// Spins spread uniformly over one wavelength.
    #[arg(long)]
    pub particles: Option<usize>,
    /// Integration time in optical cycles.
    #[arg(long)]
    pub cycles: Option<usize>,
    /// RK4 steps per optical cycle.
    #[arg(long)]
    pub steps_per_cycle: Option<usize>,
    /// Laser wavelength, nm.
    #[arg(long)]
    pub wavelength_nm: Option<f64>,
}

/// Flat TOML parameter file: `key = value` lines, arrays for lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    entries: toml::Table,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let entries: toml::Table = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if let Some((k, _)) = entries.iter().find(|(_, v)| v.is_table()) {
            return Err(Error::InvalidConfig(format!("'{k}': nested tables are not supported")));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    fn take<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        self.entries
            .remove(key)
            .map(|v| {
                v.clone()
                    .try_into()
                    .map_err(|_| Error::InvalidConfig(format!("bad value {v} for '{key}'")))
            })
            .transpose()
    }

    fn take_list<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        self.take(key)
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            Some(k) => Err(Error::InvalidConfig(format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Config {
    pub samples: usize,
    pub seed: u64,
}

impl Table1Config {
    pub fn resolve(args: &Table1Args, mut file: ConfigFile, seed: u64, fast: bool) -> Result<Self> {
        let samples = pick(args.samples, file.take("samples")?, if fast { 100 } else { 200 });
        let seed = pick(None, file.take("seed")?, seed);
        file.finish()?;
        if samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        Ok(Table1Config { samples, seed })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig1Config {
    pub z: Vec<f64>,
    pub points: usize,
    pub kinds: Vec<SpinOperatorKind>,
}

pub fn default_z_list() -> Vec<f64> {
    let mut z = vec![1.0];
    z.extend((1..=9).map(|i| 10.0 * i as f64));
    z.push(92.0);
    z
}

impl Fig1Config {
    pub fn resolve(args: &Fig1Args, mut file: ConfigFile, fast: bool) -> Result<Self> {
        let z = pick(args.z.clone(), file.take_list("z")?, default_z_list());
        let points = pick(args.points, file.take("points")?, if fast { 96 } else { 128 });
        let kind_names: Option<Vec<String>> = args.kinds.clone().or(file.take_list("kinds")?);
        file.finish()?;
        let kinds = match kind_names {
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>>>()?,
            None => SpinOperatorKind::ALL.to_vec(),
        };
        for &zi in &z {
            positive("Z", zi)?;
            crate::hydrogenic::gamma_factor(zi)?;
        }
        crate::grid::GridSpec::cube(points, 1.0)?;
        Ok(Fig1Config { z, points, kinds })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig2Config {
    pub amplitudes: Vec<f64>,
    pub backends: Vec<Backend>,
    pub settings: SweepSettings,
    pub dt_check: bool,
    pub seed: u64,
}

impl Fig2Config {
    pub fn resolve(args: &Fig2Args, mut file: ConfigFile, seed: u64, fast: bool) -> Result<Self> {
        let max_amplitude = pick(args.max_amplitude, file.take("max_amplitude")?, 500.0);
        let decades = pick(args.decades, file.take("decades")?, 1.5);
        let count = pick(args.count, file.take("count")?, if fast { 4 } else { 6 });
        let listed = args.amplitudes.clone().or(file.take_list("amplitudes")?);
        let wavelength_nm = pick(args.wavelength_nm, file.take("wavelength_nm")?, 0.159);
        let backend_names = args.backends.clone().or(file.take_list("backends")?);
        let defaults = SweepSettings::default();
        let ramp_periods = pick(args.ramp_periods, file.take("ramp_periods")?, defaults.ramp_periods);
        let pulses = pick(args.pulses, file.take("pulses")?, defaults.pulses);
        let points = pick(args.points, file.take("points")?, defaults.points);
        let target_rotation = pick(args.target_rotation, file.take("target_rotation")?, defaults.target_rotation);
        let integrator: Integrator = match args.integrator.clone().or(file.take("integrator")?) {
            Some(s) => s.parse()?,
            None => defaults.integrator,
        };
        let dt_check = args.dt_check || file.take("dt_check")?.unwrap_or(false);
        file.finish()?;

        positive("max_amplitude", max_amplitude)?;
        positive("wavelength_nm", wavelength_nm)?;
        if !(target_rotation > 0.0 && target_rotation < 0.3) {
            return Err(Error::InvalidConfig(format!(
                "target_rotation must lie in (0, 0.3) rad to stay perturbative, got {target_rotation}"
            )));
        }
        if pulses < 10 {
            return Err(Error::InvalidConfig("at least 10 pulses are needed for the fit".into()));
        }
        if ramp_periods == 0 {
            return Err(Error::InvalidConfig("ramp_periods must be at least 1".into()));
        }
        crate::grid::GridSpec::line(points, 1.0)?;
        let amplitudes = match listed {
            Some(a) => a,
            None => {
                if count < 2 {
                    return Err(Error::InvalidConfig("count must be at least 2".into()));
                }
                log_uniform_amplitudes(max_amplitude, decades, count)
            }
        };
        for &a in &amplitudes {
            positive("amplitude", a)?;
        }
        let backends = match backend_names {
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>>>()?,
            None => vec![Backend::Dirac1D, Backend::RelativisticPauli, Backend::NonrelativisticPauli],
        };
        Ok(Fig2Config {
            amplitudes,
            backends,
            settings: SweepSettings {
                wavelength: length_from_si(wavelength_nm * 1e-9),
                ramp_periods,
                target_rotation,
                pulses,
                points,
                integrator,
                dt_fraction: 1.0,
            },
            dt_check,
            seed,
        })
    }

    /// Propagation config of every sweep point, validated.
    pub fn jobs(&self) -> Result<Vec<(Backend, usize, PropagationConfig)>> {
        let mut jobs = Vec::new();
        for &b in &self.backends {
            for (i, &a) in self.amplitudes.iter().enumerate() {
                let cfg = sweep_config(b, a, &self.settings)?;
                cfg.validate()?;
                jobs.push((b, i, cfg));
            }
        }
        Ok(jobs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalConfig {
    pub amplitude: f64,
    pub scan: Vec<f64>,
    pub particles: usize,
    pub cycles: usize,
    pub steps_per_cycle: usize,
    pub wavelength: f64,
}

impl ClassicalConfig {
    pub fn resolve(args: &ClassicalArgs, mut file: ConfigFile, fast: bool) -> Result<Self> {
        let amplitude = pick(args.amplitude, file.take("amplitude")?, 500.0);
        let scan = pick(args.scan.clone(), file.take_list("scan")?, vec![125.0, 250.0, 1000.0]);
        let particles = pick(args.particles, file.take("particles")?, 64);
        let cycles = pick(args.cycles, file.take("cycles")?, 50);
        let steps_per_cycle = pick(
            args.steps_per_cycle,
            file.take("steps_per_cycle")?,
            if fast { 128 } else { 256 },
        );
        let wavelength_nm = pick(args.wavelength_nm, file.take("wavelength_nm")?, 0.159);
        file.finish()?;
        positive("amplitude", amplitude)?;
        positive("wavelength_nm", wavelength_nm)?;
        for &a in &scan {
            positive("scan amplitude", a)?;
        }
        if particles == 0 || steps_per_cycle < 16 {
            return Err(Error::InvalidConfig("need particles >= 1 and steps_per_cycle >= 16".into()));
        }
        if cycles < 50 {
            return Err(Error::InvalidConfig("at least 50 optical cycles are needed for the secular fit".into()));
        }
        Ok(ClassicalConfig {
            amplitude,
            scan,
            particles,
            cycles,
            steps_per_cycle,
            wavelength: length_from_si(wavelength_nm * 1e-9),
        })
    }

    pub fn laser(&self, amplitude: f64) -> Result<LaserConfig> {
        // the envelope is not used by the classical model
        LaserConfig::new(amplitude, self.wavelength, std::f64::consts::PI / 2.0, 1.0, 0.5)
    }
}

/// 12 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.11e}")
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// CSV document: `#` comment lines with the tool, a timestamp and every
/// parameter, then the column row and the data rows.
fn csv_document(command: &str, config: &Value, columns: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut head = format!("# relspin {} {command}\n", env!("CARGO_PKG_VERSION"));
    head += &format!("# generated_unix = {}\n", timestamp());
    if let Value::Object(map) = config {
        for (k, v) in map {
            head += &format!("# {k} = {v}\n");
        }
    }
    let mut w = csv::Writer::from_writer(head.into_bytes());
    w.write_record(columns).map_err(csv_error)?;
    for r in rows {
        w.write_record(r).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn json_report(command: &str, config: &Value, body: Value) -> Value {
    let mut v = json!({
        "schema": SCHEMA_VERSION,
        "tool": format!("relspin {}", env!("CARGO_PKG_VERSION")),
        "command": command,
        "generated_unix": timestamp(),
        "config": config,
    });
    if let (Value::Object(m), Value::Object(b)) = (&mut v, body) {
        m.extend(b);
    }
    v
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(path.to_path_buf())
}

fn write_json(path: &Path, v: &Value) -> Result<PathBuf> {
    write_file(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

/// Result of a command: exit code, files written and a short console report.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

// ---------------------------------------------------------------- table1

#[derive(Clone, Debug, Serialize)]
pub struct Table1Row {
    pub report: PropertyReport,
    pub expected: [bool; 5],
    pub matches: bool,
}

pub fn compute_table1(cfg: &Table1Config) -> Result<Vec<Table1Row>> {
    SpinOperatorKind::ALL
        .par_iter()
        .map(|&kind| {
            let report = check_properties(kind, cfg.samples, cfg.seed)?;
            let expected = kind.expected_properties();
            Ok(Table1Row {
                matches: report.verdicts() == expected,
                report,
                expected,
            })
        })
        .collect()
}

pub fn cmd_table1(cfg: &Table1Config, out: &Path) -> Result<Outcome> {
    let rows = compute_table1(cfg)?;
    let config = serde_json::to_value(cfg)?;
    let mut outcome = Outcome::default();
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut props = serde_json::Map::new();
            for (name, (got, want)) in PROPERTY_NAMES.iter().zip(r.report.verdicts().iter().zip(r.expected)) {
                props.insert(name.to_string(), json!({ "computed": got, "expected": want }));
            }
            json!({
                "operator": r.report.kind.name(),
                "properties": props,
                "matches": r.matches,
                "max_violation": r.report.max_violation,
            })
        })
        .collect();
    let all = rows.iter().all(|r| r.matches);
    let body = json!({ "tolerance": PROPERTY_TOLERANCE, "rows": json_rows, "all_match": all });
    outcome.files.push(write_json(&out.join("table1.json"), &json_report("table1", &config, body))?);
    for r in &rows {
        let cells: Vec<String> = r.report.verdicts().iter().map(|b| if *b { "yes" } else { "no" }.to_string()).collect();
        outcome.summary.push(format!("{:<12} {}  {}", r.report.kind.name(), cells.join(" "), if r.matches { "ok" } else { "MISMATCH" }));
        if !r.matches {
            for (name, (got, want)) in PROPERTY_NAMES.iter().zip(r.report.verdicts().iter().zip(r.expected)) {
                if *got != want {
                    outcome.summary.push(format!("  {}: {name} computed {got}, expected {want}", r.report.kind.name()));
                }
            }
        }
    }
    outcome.code = if all { EXIT_OK } else { EXIT_MISMATCH };
    Ok(outcome)
}

// ---------------------------------------------------------------- fig1

#[derive(Clone, Debug, Serialize)]
pub struct Fig1Row {
    pub observables: GroundStateObservables,
    pub spin_z_down: Vec<(SpinOperatorKind, f64)>,
}

impl Fig1Row {
    pub fn spin(&self, kind: SpinOperatorKind) -> f64 {
        lookup(&self.observables.spin_z, kind)
    }

    pub fn spin_down(&self, kind: SpinOperatorKind) -> f64 {
        lookup(&self.spin_z_down, kind)
    }

    pub fn variance(&self, kind: PositionKind) -> f64 {
        self.observables
            .position_z
            .iter()
            .find(|(k, _, _)| *k == kind)
            .map(|(_, _, v)| *v)
            .unwrap_or(f64::NAN)
    }
}

fn lookup(list: &[(SpinOperatorKind, f64)], kind: SpinOperatorKind) -> f64 {
    list.iter().find(|(k, _)| *k == kind).map(|(_, v)| *v).unwrap_or(f64::NAN)
}

pub fn compute_fig1(cfg: &Fig1Config) -> Result<Vec<Fig1Row>> {
    cfg.z
        .par_iter()
        .map(|&z| {
            Ok(Fig1Row {
                observables: ground_state_observables(z, cfg.points)?,
                spin_z_down: spin_z_for_projection(z, cfg.points, Projection::Down)?,
            })
        })
        .collect()
}

/// Checks on the hydrogenic data that the figure text states.
#[derive(Clone, Debug, Serialize)]
pub struct Fig1Checks {
    pub pryce_max_relative_deviation: f64,
    pub max_sign_flip_defect: f64,
    pub pauli_oracle_max_error: f64,
    pub frenkel_above_half_at_92: Option<bool>,
}

pub fn fig1_checks(rows: &[Fig1Row]) -> Fig1Checks {
    let mut c = Fig1Checks {
        pryce_max_relative_deviation: 0.0,
        max_sign_flip_defect: 0.0,
        pauli_oracle_max_error: 0.0,
        frenkel_above_half_at_92: None,
    };
    for r in rows {
        let pryce = r.spin(SpinOperatorKind::Pryce);
        c.pryce_max_relative_deviation = c.pryce_max_relative_deviation.max((pryce - 0.5).abs() / 0.5);
        for kind in SpinOperatorKind::ALL {
            c.max_sign_flip_defect = c.max_sign_flip_defect.max((r.spin(kind) + r.spin_down(kind)).abs());
        }
        c.pauli_oracle_max_error = c
            .pauli_oracle_max_error
            .max((r.spin(SpinOperatorKind::Pauli) - r.observables.analytic_pauli_spin_z).abs());
        if r.observables.z == 92.0 {
            c.frenkel_above_half_at_92 = Some(r.spin(SpinOperatorKind::Frenkel) > 0.5);
        }
    }
    c
}

pub fn cmd_fig1(cfg: &Fig1Config, out: &Path) -> Result<Outcome> {
    let rows = compute_fig1(cfg)?;
    let config = serde_json::to_value(cfg)?;
    let mut outcome = Outcome::default();

    let mut spin = Vec::new();
    let mut pos = Vec::new();
    for r in &rows {
        let o = &r.observables;
        for &kind in &cfg.kinds {
            spin.push(vec![
                fmt_f64(o.z),
                fmt_f64(o.gamma),
                kind.name().to_string(),
                fmt_f64(r.spin(kind)),
                fmt_f64(r.spin_down(kind)),
                fmt_f64(o.analytic_pauli_spin_z),
                fmt_f64(o.norm_defect),
            ]);
        }
        for (kind, mean, var) in &o.position_z {
            pos.push(vec![
                fmt_f64(o.z),
                fmt_f64(o.gamma),
                kind.name().to_string(),
                fmt_f64(*mean),
                fmt_f64(*var),
                fmt_f64(var * o.z * o.z),
                fmt_f64(o.analytic_variance_pauli),
            ]);
        }
    }
    let spin = csv_document(
        "fig1",
        &config,
        &["z", "gamma", "operator", "spin_z_up", "spin_z_down", "analytic_pauli_spin_z", "norm_defect"],
        &spin,
    )?;
    let pos = csv_document(
        "fig1",
        &config,
        &["z", "gamma", "operator", "mean_z", "variance_z", "z2_variance_z", "analytic_variance_pauli"],
        &pos,
    )?;
    outcome.files.push(write_file(&out.join("fig1_spin.csv"), &spin)?);
    outcome.files.push(write_file(&out.join("fig1_position.csv"), &pos)?);
    let checks = fig1_checks(&rows);
    outcome.files.push(write_json(
        &out.join("fig1_summary.json"),
        &json_report("fig1", &config, json!({ "checks": checks })),
    )?);
    outcome.summary.push(format!(
        "Pryce max |S_z - 1/2|/(1/2) = {:.3e}; sign-flip defect {:.3e}; Pauli oracle error {:.3e}",
        checks.pryce_max_relative_deviation, checks.max_sign_flip_defect, checks.pauli_oracle_max_error
    ));
    Ok(outcome)
}

// ---------------------------------------------------------------- fig2

/// Outcome of one sweep point.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub backend: Backend,
    pub amplitude: f64,
    pub config: PropagationConfig,
    /// `None` when the fit was degenerate.
    pub result: Option<PrecessionResult>,
    pub status: String,
    /// Omega with half the time step, when requested.
    pub omega_half_dt: Option<f64>,
}

impl SweepPoint {
    pub fn omega(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.fit.omega)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BackendSlope {
    pub backend: Backend,
    pub slope: Option<f64>,
    pub expected: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig2Report {
    pub points: Vec<SweepPoint>,
    pub slopes: Vec<BackendSlope>,
    /// max |Omega_Dirac / Omega_formula - 1|.
    pub dirac_prediction_max_deviation: Option<f64>,
    /// max |Omega_Dirac / Omega_RelativisticPauli - 1|.
    pub dirac_pauli_max_deviation: Option<f64>,
    /// max |Omega(dt/2) / Omega(dt) - 1| over all checked points.
    pub dt_halving_max_change: Option<f64>,
    /// 2^slope for Dirac: Omega(2E) / Omega(E).
    pub dirac_doubling_ratio: Option<f64>,
}

fn run_point(cfg: &PropagationConfig) -> Result<Option<PrecessionResult>> {
    match precession_run(cfg) {
        Ok(r) => Ok(Some(r)),
        Err(Error::FitDegenerate { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn compute_fig2(cfg: &Fig2Config) -> Result<Fig2Report> {
    let jobs = cfg.jobs()?;
    let mut tasks: Vec<(usize, bool)> = (0..jobs.len()).map(|i| (i, false)).collect();
    if cfg.dt_check {
        tasks.extend((0..jobs.len()).map(|i| (i, true)));
    }
    let results: Vec<Option<PrecessionResult>> = tasks
        .par_iter()
        .map(|&(i, half)| {
            let mut c = jobs[i].2;
            if half {
                c.dt *= 0.5;
            }
            run_point(&c)
        })
        .collect::<Result<_>>()?;
    let n = jobs.len();
    let points: Vec<SweepPoint> = jobs
        .iter()
        .enumerate()
        .map(|(i, (b, _, c))| {
            let result = results[i].clone();
            let half = if cfg.dt_check { results[n + i].as_ref().map(|r| r.fit.omega) } else { None };
            SweepPoint {
                backend: *b,
                amplitude: c.laser.amplitude,
                config: *c,
                status: if result.is_some() { "ok" } else { "FitDegenerate" }.into(),
                result,
                omega_half_dt: half,
            }
        })
        .collect();

    let slopes = cfg
        .backends
        .iter()
        .map(|&b| {
            let pts: Vec<(f64, f64)> = points
                .iter()
                .filter(|p| p.backend == b)
                .filter_map(|p| p.omega().map(|o| (p.amplitude, o)))
                .collect();
            BackendSlope {
                backend: b,
                slope: (pts.len() >= 2).then(|| log_log_slope(&pts)),
                expected: b.scaling_power() as f64,
                points: pts.len(),
            }
        })
        .collect::<Vec<_>>();
    let omega_of = |b: Backend, a: f64| {
        points
            .iter()
            .find(|p| p.backend == b && p.amplitude == a)
            .and_then(SweepPoint::omega)
    };
    let max_dev = |f: &dyn Fn(&SweepPoint) -> Option<f64>| {
        points
            .iter()
            .filter_map(f)
            .map(f64::abs)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let dirac_prediction_max_deviation = max_dev(&|p| {
        (p.backend == Backend::Dirac1D)
            .then(|| p.omega().map(|o| o / omega_prediction(&p.config.laser) - 1.0))
            .flatten()
    });
    let dirac_pauli_max_deviation = max_dev(&|p| {
        (p.backend == Backend::Dirac1D)
            .then(|| Some(p.omega()? / omega_of(Backend::RelativisticPauli, p.amplitude)? - 1.0))
            .flatten()
    });
    let dt_halving_max_change = max_dev(&|p| Some(p.omega_half_dt? / p.omega()? - 1.0));
    let dirac_doubling_ratio = slopes
        .iter()
        .find(|s| s.backend == Backend::Dirac1D)
        .and_then(|s| s.slope)
        .map(|s| 2f64.powf(s));
    Ok(Fig2Report {
        points,
        slopes,
        dirac_prediction_max_deviation,
        dirac_pauli_max_deviation,
        dt_halving_max_change,
        dirac_doubling_ratio,
    })
}

fn run_manifest(p: &SweepPoint, seed: u64) -> Value {
    let c = &p.config;
    json!({
        "backend": c.backend,
        "laser": c.laser,
        "grid": { "points": c.points, "length": c.laser.wavelength },
        "dt": c.step(),
        "steps_per_period": c.steps_per_period(),
        "pulse_periods": c.pulse_periods(),
        "pulses": c.pulses,
        "integrator": c.integrator,
        "wave": c.mode,
        "terms": c.terms,
        "seed": seed,
        "status": p.status,
        "fit": p.result.as_ref().map(|r| r.fit),
        "max_norm_drift": p.result.as_ref().map(|r| r.max_norm_drift),
        "steps": p.result.as_ref().map(|r| r.steps),
    })
}

pub fn cmd_fig2(cfg: &Fig2Config, out: &Path) -> Result<Outcome> {
    let report = compute_fig2(cfg)?;
    let config = serde_json::to_value(cfg)?;
    let mut outcome = Outcome::default();
    let columns = [
        "backend",
        "amplitude",
        "field_v_per_m",
        "intensity_au",
        "intensity_w_per_cm2",
        "omega",
        "omega_prediction",
        "omega_p",
        "ratio_to_expected",
        "fit_residual",
        "total_rotation",
        "flat_periods",
        "omega_half_dt",
        "status",
    ];
    let mut sweep = Vec::new();
    for (idx, p) in report.points.iter().enumerate() {
        let laser = &p.config.laser;
        let (omega, residual, rotation) = match &p.result {
            Some(r) => (fmt_f64(r.fit.omega), fmt_f64(r.fit.residual), fmt_f64(r.fit.total_rotation)),
            None => Default::default(),
        };
        let ratio = p
            .omega()
            .map(|o| fmt_f64(o / expected_rate(p.backend, laser)))
            .unwrap_or_default();
        sweep.push(vec![
            p.backend.to_string(),
            fmt_f64(p.amplitude),
            fmt_f64(field_to_si(p.amplitude)),
            fmt_f64(laser.intensity()),
            fmt_f64(intensity_to_w_per_cm2(laser.intensity())),
            omega,
            fmt_f64(omega_prediction(laser)),
            fmt_f64(omega_p(laser)),
            ratio,
            residual,
            rotation,
            p.config.pulse_periods().map(|x| x.1).unwrap_or(0).to_string(),
            p.omega_half_dt.map(fmt_f64).unwrap_or_default(),
            p.status.to_string(),
        ]);
        let stem = format!("fig2_runs/{}_{idx:02}", p.backend);
        let series: Vec<Vec<String>> = p
            .result
            .iter()
            .flat_map(|r| &r.checkpoints)
            .map(|c| {
                vec![
                    c.pulse.to_string(),
                    fmt_f64(c.t),
                    fmt_f64(c.t_eff),
                    fmt_f64(c.spin[0]),
                    fmt_f64(c.spin[1]),
                    fmt_f64(c.spin[2]),
                    fmt_f64(c.norm),
                ]
            })
            .collect();
        let series = csv_document(
            "fig2",
            &run_manifest(p, cfg.seed),
            &["pulse", "t", "t_eff", "s_x", "s_y", "s_z", "norm"],
            &series,
        )?;
        outcome.files.push(write_file(&out.join(format!("{stem}.csv")), &series)?);
        outcome.files.push(write_json(
            &out.join(format!("{stem}.json")),
            &json_report("fig2", &config, json!({ "run": run_manifest(p, cfg.seed) })),
        )?);
    }
    let sweep = csv_document("fig2", &config, &columns, &sweep)?;
    outcome.files.push(write_file(&out.join("fig2_sweep.csv"), &sweep)?);
    let body = json!({
        "slopes": report.slopes,
        "dirac_prediction_max_deviation": report.dirac_prediction_max_deviation,
        "dirac_pauli_max_deviation": report.dirac_pauli_max_deviation,
        "dt_halving_max_change": report.dt_halving_max_change,
        "dirac_doubling_ratio": report.dirac_doubling_ratio,
    });
    outcome.files.push(write_json(&out.join("fig2_summary.json"), &json_report("fig2", &config, body))?);
    for s in &report.slopes {
        outcome.summary.push(format!(
            "{:<22} slope {} (expected {})",
            s.backend.name(),
            s.slope.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into()),
            s.expected
        ));
    }
    Ok(outcome)
}

// ---------------------------------------------------------------- classical

#[derive(Clone, Debug)]
pub struct ClassicalReport {
    pub ensembles: Vec<(Ensemble, LaserConfig)>,
    pub summaries: Vec<(CancellationSummary, f64, Option<String>)>,
}

pub fn compute_classical(cfg: &ClassicalConfig) -> Result<ClassicalReport> {
    let main = cfg.laser(cfg.amplitude)?;
    let spins = uniform_ensemble(cfg.particles, &main);
    let ensembles = TorqueModel::ALL
        .iter()
        .map(|&m| Ok((integrate_cycles(&spins, &main, m, cfg.cycles, cfg.steps_per_cycle)?, main)))
        .collect::<Result<Vec<_>>>()?;
    let mut summaries: Vec<_> = ensembles
        .iter()
        .map(|(e, l)| (summarize(e, l), regime_ratio(l), e.regime_warning.clone()))
        .collect();
    for &a in &cfg.scan {
        let l = cfg.laser(a)?;
        let e = integrate_cycles(&uniform_ensemble(cfg.particles, &l), &l, TorqueModel::Both, cfg.cycles, cfg.steps_per_cycle)?;
        summaries.push((summarize(&e, &l), regime_ratio(&l), e.regime_warning.clone()));
    }
    Ok(ClassicalReport { ensembles, summaries })
}

pub fn cmd_classical(cfg: &ClassicalConfig, out: &Path) -> Result<Outcome> {
    let report = compute_classical(cfg)?;
    let config = serde_json::to_value(cfg)?;
    let mut outcome = Outcome::default();
    let mut traj = Vec::new();
    for (e, _) in &report.ensembles {
        for (i, t) in e.trajectories.iter().enumerate() {
            for (time, s) in t.times.iter().zip(&t.spins) {
                traj.push(vec![
                    e.model.to_string(),
                    i.to_string(),
                    fmt_f64(t.x),
                    fmt_f64(*time),
                    fmt_f64(s[0]),
                    fmt_f64(s[1]),
                    fmt_f64(s[2]),
                ]);
            }
        }
    }
    let traj = csv_document("classical", &config, &["model", "particle", "x", "t", "s_x", "s_y", "s_z"], &traj)?;
    outcome.files.push(write_file(&out.join("classical_trajectories.csv"), &traj)?);
    let mut summary = Vec::new();
    for (s, ratio, warn) in &report.summaries {
        summary.push(vec![
            s.model.to_string(),
            fmt_f64(s.amplitude),
            fmt_f64(s.omega_p),
            fmt_f64(s.mean_rate),
            fmt_f64(s.mean_rate / s.omega_p),
            fmt_f64(s.max_pointwise_error),
            fmt_f64(*ratio),
            warn.clone().map(|w| format!("RegimeViolation: {w}")).unwrap_or_default(),
        ]);
        outcome.summary.push(format!(
            "{:<16} E = {:>8.2}  mean rate / Omega_P = {:+.5}",
            s.model.name(),
            s.amplitude,
            s.mean_rate / s.omega_p
        ));
    }
    let summary = csv_document(
        "classical",
        &config,
        &[
            "model",
            "amplitude",
            "omega_p",
            "mean_rate",
            "mean_rate_over_omega_p",
            "max_pointwise_error",
            "larmor_over_omega",
            "warning",
        ],
        &summary,
    )?;
    outcome.files.push(write_file(&out.join("classical_summary.csv"), &summary)?);
    let rows: Vec<Value> = report
        .summaries
        .iter()
        .map(|(s, r, w)| json!({ "summary": s, "larmor_over_omega": r, "warning": w }))
        .collect();
    outcome.files.push(write_json(
        &out.join("classical_summary.json"),
        &json_report("classical", &config, json!({ "rows": rows })),
    )?);
    Ok(outcome)
}

// ---------------------------------------------------------------- entry

/// Resolve, validate and run one command inside a worker pool.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let workers = cli.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    match &cli.command {
        Command::Table1(a) => {
            let cfg = Table1Config::resolve(a, file, cli.seed, cli.fast)?;
            pool.install(|| cmd_table1(&cfg, &cli.out))
        }
        Command::Fig1(a) => {
            let cfg = Fig1Config::resolve(a, file, cli.fast)?;
            pool.install(|| cmd_fig1(&cfg, &cli.out))
        }
        Command::Fig2(a) => {
            let cfg = Fig2Config::resolve(a, file, cli.seed, cli.fast)?;
            cfg.jobs()?;
            pool.install(|| cmd_fig2(&cfg, &cli.out))
        }
        Command::Classical(a) => {
            let cfg = ClassicalConfig::resolve(a, file, cli.fast)?;
            pool.install(|| cmd_classical(&cfg, &cli.out))
        }
    }
}

/// Metres to a.u. and back for a wavelength given in nm.
pub fn wavelength_round_trip(nm: f64) -> f64 {
    length_to_si(length_from_si(nm * 1e-9)) * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let mut f = ConfigFile::parse("# comment\nsamples = 12\nz = [1, 2.5, 3] # trailing\n\n").unwrap();
        assert_eq!(f.take::<usize>("samples").unwrap(), Some(12));
        assert_eq!(f.take_list::<f64>("z").unwrap(), Some(vec![1.0, 2.5, 3.0]));
        assert!(f.finish().is_ok());
        assert!(ConfigFile::parse("novalue").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2").is_err());
        assert!(ConfigFile::parse("[fig2]\npulses = 10").is_err());
        let mut bad = ConfigFile::parse("samples = \"x\"").unwrap();
        assert!(bad.take::<usize>("samples").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let f = ConfigFile::parse("sample = 3").unwrap();
        assert!(Table1Config::resolve(&Table1Args::default(), f, 1, false).is_err());
    }

    #[test]
    fn flags_override_file_and_defaults() {
        let f = ConfigFile::parse("samples = 50").unwrap();
        let cfg = Table1Config::resolve(&Table1Args { samples: Some(7) }, f, 3, false).unwrap();
        assert_eq!(cfg, Table1Config { samples: 7, seed: 3 });
        let f = ConfigFile::parse("samples = 50").unwrap();
        assert_eq!(Table1Config::resolve(&Table1Args::default(), f, 3, false).unwrap().samples, 50);
        assert_eq!(Table1Config::resolve(&Table1Args::default(), ConfigFile::default(), 3, true).unwrap().samples, 100);
    }

    #[test]
    fn fig1_validation() {
        let args = Fig1Args { z: Some(vec![140.0]), ..Default::default() };
        assert!(matches!(Fig1Config::resolve(&args, ConfigFile::default(), false), Err(Error::SupercriticalZ { .. })));
        let args = Fig1Args { points: Some(100), ..Default::default() };
        assert!(Fig1Config::resolve(&args, ConfigFile::default(), false).is_err());
        let cfg = Fig1Config::resolve(&Fig1Args::default(), ConfigFile::default(), true).unwrap();
        assert_eq!(cfg.points, 96);
        assert_eq!(cfg.z.len(), 11);
    }

    #[test]
    fn fig2_defaults_span_one_and_a_half_decades() {
        let cfg = Fig2Config::resolve(&Fig2Args::default(), ConfigFile::default(), 1, false).unwrap();
        let (hi, lo) = (cfg.amplitudes[0], *cfg.amplitudes.last().unwrap());
        assert!((hi / lo).log10() >= 1.5 - 1e-12);
        assert!((cfg.settings.wavelength - 3.0047).abs() < 1e-4);
        let bad = Fig2Args { target_rotation: Some(0.5), ..Default::default() };
        assert!(Fig2Config::resolve(&bad, ConfigFile::default(), 1, false).is_err());
        let bad = Fig2Args { backends: Some(vec!["nope".into()]), ..Default::default() };
        assert!(Fig2Config::resolve(&bad, ConfigFile::default(), 1, false).is_err());
    }

    #[test]
    fn number_format_has_twelve_significant_digits() {
        assert_eq!(fmt_f64(0.5), "5.00000000000e-1");
        assert_eq!(fmt_f64(-1234.56789012345), "-1.23456789012e3");
    }

    #[test]
    fn unit_round_trips() {
        assert!((wavelength_round_trip(0.159) - 0.159).abs() < 1e-12 * 0.159);
        let e = 1.234e12;
        assert!((field_to_si(crate::units::field_from_si(e)) - e).abs() < 1e-12 * e);
        assert!((length_from_si(0.159e-9) - 3.0047).abs() < 1e-4);
    }
}
