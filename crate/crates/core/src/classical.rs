//! Classical spin ensemble at fixed positions along the standing wave,
//! driven by the magnetic torque, the photonic spin-density torque or both.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laser::{omega_larmor, omega_p, traveling_wave, Direction, LaserConfig};
use crate::units::{ELECTRON_CHARGE, SPEED_OF_LIGHT};

/// Larmor-to-laser frequency ratio above which results are flagged.
pub const REGIME_LIMIT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSpin {
    pub x: f64,
    pub s: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TorqueModel {
    MagneticOnly,
    SpinDensityOnly,
    Both,
}

impl TorqueModel {
    pub const ALL: [TorqueModel; 3] = [TorqueModel::MagneticOnly, TorqueModel::SpinDensityOnly, TorqueModel::Both];

    pub fn name(self) -> &'static str {
        match self {
            TorqueModel::MagneticOnly => "MagneticOnly",
            TorqueModel::SpinDensityOnly => "SpinDensityOnly",
            TorqueModel::Both => "Both",
        }
    }

    fn magnetic(self) -> bool {
        self != TorqueModel::SpinDensityOnly
    }

    fn spin_density(self) -> bool {
        self != TorqueModel::MagneticOnly
    }
}

impl fmt::Display for TorqueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TorqueModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase().replace(['-', '_'], "");
        TorqueModel::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == k)
            .or(match k.as_str() {
                "magnetic" | "b" => Some(TorqueModel::MagneticOnly),
                "spindensity" | "exa" => Some(TorqueModel::SpinDensityOnly),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidConfig(format!("unknown torque model '{s}'")))
    }
}

fn check_circular(cfg: &LaserConfig) -> Result<()> {
    if (cfg.eta - PI / 2.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "classical model needs circular polarization (eta = pi/2), got {}",
            cfg.eta
        )));
    }
    Ok(())
}

/// Magnetic field of the continuous standing wave (no envelope).
pub fn standing_wave_b(x: f64, t: f64, cfg: &LaserConfig) -> Vector3<f64> {
    traveling_wave(Direction::Forward, x, t, cfg).b + traveling_wave(Direction::Backward, x, t, cfg).b
}

/// Coefficient K(x) of the spin-density torque -K s x e_x.
pub fn spin_density_coefficient(x: f64, cfg: &LaserConfig) -> f64 {
    let c = SPEED_OF_LIGHT;
    let qe = ELECTRON_CHARGE * cfg.amplitude;
    qe * qe * cfg.wavelength * (cfg.wavenumber() * x).cos().powi(2) / (PI * c.powi(3))
}

/// ds/dt for a spin at fixed position.
pub fn torque(spin: &ClassicalSpin, t: f64, cfg: &LaserConfig, model: TorqueModel) -> Vector3<f64> {
    torque_at(spin.x, &spin.s, t, cfg, model)
}

fn torque_at(x: f64, s: &Vector3<f64>, t: f64, cfg: &LaserConfig, model: TorqueModel) -> Vector3<f64> {
    let mut ds = Vector3::zeros();
    if model.magnetic() {
        ds += ELECTRON_CHARGE * s.cross(&standing_wave_b(x, t, cfg));
    }
    if model.spin_density() {
        ds -= spin_density_coefficient(x, cfg) * s.cross(&Vector3::x());
    }
    ds
}

/// Sampled trajectory of one spin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x: f64,
    pub times: Vec<f64>,
    pub spins: Vec<Vector3<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub model: TorqueModel,
    pub trajectories: Vec<Trajectory>,
    /// Set when Omega_L / omega exceeds the regime limit.
    pub regime_warning: Option<String>,
}

/// Spins of magnitude 1/2 along e_z at `count` evenly spaced positions
/// covering one wavelength.
pub fn uniform_ensemble(count: usize, cfg: &LaserConfig) -> Vec<ClassicalSpin> {
    (0..count)
        .map(|i| ClassicalSpin {
            x: (i as f64 + 0.5) * cfg.wavelength / count as f64,
            s: Vector3::new(0.0, 0.0, 0.5),
        })
        .collect()
}

/// Omega_L / omega.
pub fn regime_ratio(cfg: &LaserConfig) -> f64 {
    omega_larmor(cfg) / cfg.angular_frequency()
}

/// RK4 integration with renormalization of |s| after every step. Spins are
/// sampled every `sample_every` steps and at the end.
pub fn integrate_ensemble(
    spins: &[ClassicalSpin],
    cfg: &LaserConfig,
    model: TorqueModel,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Ensemble> {
    check_circular(cfg)?;
    if !(dt > 0.0) || !(t_end >= 0.0) || sample_every == 0 {
        return Err(Error::InvalidConfig("need dt > 0, t_end >= 0 and sample_every >= 1".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let ratio = regime_ratio(cfg);
    let regime_warning = (ratio > REGIME_LIMIT).then(|| format!("Omega_L/omega = {ratio:.4} exceeds {REGIME_LIMIT}"));
    let trajectories = spins
        .par_iter()
        .map(|spin| {
            let x = spin.x;
            let norm = spin.s.norm();
            let mut s = spin.s;
            let mut times = vec![0.0];
            let mut out = vec![s];
            let f = |s: &Vector3<f64>, t: f64| torque_at(x, s, t, cfg, model);
            for n in 0..steps {
                let t = n as f64 * dt;
                let k1 = f(&s, t);
                let k2 = f(&(s + 0.5 * dt * k1), t + 0.5 * dt);
                let k3 = f(&(s + 0.5 * dt * k2), t + 0.5 * dt);
                let k4 = f(&(s + dt * k3), t + dt);
                s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if norm > 0.0 {
                    s *= norm / s.norm();
                }
                if (n + 1) % sample_every == 0 || n + 1 == steps {
                    times.push((n + 1) as f64 * dt);
                    out.push(s);
                }
            }
            Trajectory { x, times, spins: out }
        })
        .collect();
    Ok(Ensemble {
        model,
        trajectories,
        regime_warning,
    })
}

/// Run `cycles` optical periods with `steps_per_cycle` RK4 steps each,
/// sampling once per cycle.
pub fn integrate_cycles(
    spins: &[ClassicalSpin],
    cfg: &LaserConfig,
    model: TorqueModel,
    cycles: usize,
    steps_per_cycle: usize,
) -> Result<Ensemble> {
    let period = cfg.period();
    integrate_ensemble(
        spins,
        cfg,
        model,
        cycles as f64 * period,
        period / steps_per_cycle as f64,
        steps_per_cycle,
    )
}

/// Secular rate of the angle atan2(s_y, s_z) from a least-squares line
/// through the samples.
pub fn secular_rate(traj: &Trajectory) -> f64 {
    let mut phis: Vec<f64> = Vec::with_capacity(traj.spins.len());
    for s in &traj.spins {
        let raw = s[1].atan2(s[2]);
        let phi = match phis.last() {
            Some(&prev) => prev + (raw - prev + PI).rem_euclid(2.0 * PI) - PI,
            None => raw,
        };
        phis.push(phi);
    }
    let n = phis.len() as f64;
    let tm = traj.times.iter().sum::<f64>() / n;
    let pm = phis.iter().sum::<f64>() / n;
    let sxy: f64 = traj.times.iter().zip(&phis).map(|(t, p)| (t - tm) * (p - pm)).sum();
    let sxx: f64 = traj.times.iter().map(|t| (t - tm) * (t - tm)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Mean secular rate over an ensemble covering one wavelength.
pub fn wavelength_averaged_rotation(trajectories: &[Trajectory]) -> f64 {
    trajectories.iter().map(secular_rate).sum::<f64>() / trajectories.len().max(1) as f64
}

/// Secular rate predicted at position x: 2 Omega_P sin^2 kx for the magnetic
/// torque, -2 Omega_P cos^2 kx for the spin-density torque.
pub fn predicted_rate(x: f64, cfg: &LaserConfig, model: TorqueModel) -> f64 {
    let kx = cfg.wavenumber() * x;
    let op = omega_p(cfg);
    let mut r = 0.0;
    if model.magnetic() {
        r += 2.0 * op * kx.sin().powi(2);
    }
    if model.spin_density() {
        r -= 2.0 * op * kx.cos().powi(2);
    }
    r
}

/// Summary row for one model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationSummary {
    pub model: TorqueModel,
    pub amplitude: f64,
    pub mean_rate: f64,
    pub omega_p: f64,
    /// Largest |rate(x) - predicted(x)| / (2 Omega_P) over the ensemble.
    pub max_pointwise_error: f64,
}

pub fn summarize(ensemble: &Ensemble, cfg: &LaserConfig) -> CancellationSummary {
    let op = omega_p(cfg);
    let max_err = ensemble
        .trajectories
        .iter()
        .map(|t| (secular_rate(t) - predicted_rate(t.x, cfg, ensemble.model)).abs() / (2.0 * op))
        .fold(0.0, f64::max);
    CancellationSummary {
        model: ensemble.model,
        amplitude: cfg.amplitude,
        mean_rate: wavelength_averaged_rotation(&ensemble.trajectories),
        omega_p: op,
        max_pointwise_error: max_err,
    }
}
