//! Time propagation of a zero-momentum electron in the standing wave on a
//! one-wavelength periodic grid along x, and extraction of the spin
//! precession frequency.
//!
//! Fields depend on x only, so transverse canonical momenta are conserved and
//! set to zero. Dirac and Pauli backends use split-operator steps with the
//! kinetic factor applied exactly per momentum mode and the interaction
//! factor exponentiated in closed form per grid point. The weakly
//! relativistic FW backend is propagated densely with fourth-order Magnus
//! steps.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dirac::{dirac_matrices, pauli_matrices, Axis, Matrix2c, Matrix4c, Momentum3};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, SpinorField, TwoSpinorField};
use crate::laser::{single_wave, standing_wave, FieldSample, LaserConfig};
use crate::spin::{spin_vector, SpinOperatorKind, ZeroMode};
use crate::units::SPEED_OF_LIGHT;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default number of grid points across the wavelength.
pub const DEFAULT_POINTS: usize = 16;
/// Norm drift allowed per 1000 steps before a run is declared unstable.
pub const MAX_DRIFT_PER_1000_STEPS: f64 = 1e-6;
/// Smallest total rotation angle the fit accepts.
pub const MIN_ROTATION: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    Dirac1D,
    RelativisticPauli,
    NonrelativisticPauli,
    WeakFW,
}

impl Backend {
    pub const ALL: [Backend; 4] = [
        Backend::Dirac1D,
        Backend::RelativisticPauli,
        Backend::NonrelativisticPauli,
        Backend::WeakFW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Dirac1D => "Dirac1D",
            Backend::RelativisticPauli => "RelativisticPauli",
            Backend::NonrelativisticPauli => "NonrelativisticPauli",
            Backend::WeakFW => "WeakFW",
        }
    }

    pub fn components(self) -> usize {
        match self {
            Backend::Dirac1D => 4,
            _ => 2,
        }
    }

    /// Power of the field amplitude with which the precession rate scales;
    /// also the power of the window used for the effective time.
    pub fn scaling_power(self) -> i32 {
        match self {
            Backend::NonrelativisticPauli => 2,
            _ => 4,
        }
    }

    /// Largest stable step: 0.05/(m c^2) for Dirac, 0.01/omega otherwise.
    pub fn max_dt(self, cfg: &LaserConfig) -> f64 {
        match self {
            Backend::Dirac1D => 0.05 / (SPEED_OF_LIGHT * SPEED_OF_LIGHT),
            _ => 0.01 / cfg.angular_frequency(),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase().replace(['-', '_'], "");
        Backend::ALL
            .into_iter()
            .find(|b| b.name().to_ascii_lowercase() == k)
            .or(match k.as_str() {
                "dirac" => Some(Backend::Dirac1D),
                "pauli" | "relpauli" => Some(Backend::RelativisticPauli),
                "nrpauli" => Some(Backend::NonrelativisticPauli),
                "fw" => Some(Backend::WeakFW),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidConfig(format!("unknown backend '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    /// Second order: kinetic/2, interaction at the midpoint, kinetic/2.
    Strang,
    /// Fourth-order symmetric composition of three Strang steps.
    #[default]
    Yoshida4,
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strang" => Ok(Integrator::Strang),
            "yoshida4" | "yoshida" => Ok(Integrator::Yoshida4),
            _ => Err(Error::InvalidConfig(format!("unknown integrator '{s}'"))),
        }
    }
}

const YOSHIDA_W1: f64 = 1.351_207_191_959_657_8;
const YOSHIDA_W0: f64 = -1.702_414_383_919_315_3;

impl Integrator {
    fn weights(self) -> &'static [f64] {
        match self {
            Integrator::Strang => &[1.0],
            Integrator::Yoshida4 => &[YOSHIDA_W1, YOSHIDA_W0, YOSHIDA_W1],
        }
    }
}

/// Which laser field drives the electron.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveMode {
    #[default]
    Standing,
    /// The forward-traveling wave alone.
    Traveling,
}

impl WaveMode {
    pub fn sample(self, x: f64, t: f64, cfg: &LaserConfig) -> FieldSample {
        match self {
            WaveMode::Standing => standing_wave(x, t, cfg),
            WaveMode::Traveling => single_wave(x, t, cfg),
        }
    }
}

/// Toggles for the terms of the weakly relativistic FW Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakFwTerms {
    pub kinetic: bool,
    pub zeeman: bool,
    pub scalar_potential: bool,
    pub mass_correction: bool,
    pub field_energy: bool,
    /// sigma . (E x p) part of the spin-orbit term.
    pub spin_orbit_gradient: bool,
    /// sigma . (E x A) part of the spin-orbit term.
    pub spin_orbit_field: bool,
    pub darwin: bool,
    pub anticommutator: bool,
}

impl WeakFwTerms {
    pub fn all() -> Self {
        WeakFwTerms {
            kinetic: true,
            zeeman: true,
            scalar_potential: true,
            mass_correction: true,
            field_energy: true,
            spin_orbit_gradient: true,
            spin_orbit_field: true,
            darwin: true,
            anticommutator: true,
        }
    }

    pub fn none() -> Self {
        WeakFwTerms {
            kinetic: false,
            zeeman: false,
            scalar_potential: false,
            mass_correction: false,
            field_energy: false,
            spin_orbit_gradient: false,
            spin_orbit_field: false,
            darwin: false,
            anticommutator: false,
        }
    }

    /// Kinetic, Zeeman and sigma . (E x A): the relativistic Pauli equation.
    pub fn relativistic_pauli() -> Self {
        WeakFwTerms {
            kinetic: true,
            zeeman: true,
            spin_orbit_field: true,
            ..Self::none()
        }
    }

    pub fn nonrelativistic_pauli() -> Self {
        WeakFwTerms {
            kinetic: true,
            zeeman: true,
            ..Self::none()
        }
    }

    pub fn is_enabled(&self, term: FwTerm) -> bool {
        match term {
            FwTerm::Kinetic => self.kinetic,
            FwTerm::Zeeman => self.zeeman,
            FwTerm::ScalarPotential => self.scalar_potential,
            FwTerm::MassCorrection => self.mass_correction,
            FwTerm::FieldEnergy => self.field_energy,
            FwTerm::SpinOrbitGradient => self.spin_orbit_gradient,
            FwTerm::SpinOrbitField => self.spin_orbit_field,
            FwTerm::Darwin => self.darwin,
            FwTerm::Anticommutator => self.anticommutator,
        }
    }
}

impl Default for WeakFwTerms {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FwTerm {
    Kinetic,
    Zeeman,
    ScalarPotential,
    MassCorrection,
    FieldEnergy,
    SpinOrbitGradient,
    SpinOrbitField,
    Darwin,
    Anticommutator,
}

impl FwTerm {
    pub const ALL: [FwTerm; 9] = [
        FwTerm::Kinetic,
        FwTerm::Zeeman,
        FwTerm::ScalarPotential,
        FwTerm::MassCorrection,
        FwTerm::FieldEnergy,
        FwTerm::SpinOrbitGradient,
        FwTerm::SpinOrbitField,
        FwTerm::Darwin,
        FwTerm::Anticommutator,
    ];
}

/// One Hamiltonian term as a sum of symmetrized products
/// (1/2){C_k(x), p_x^k}, with C_k a 2x2 matrix at the sample point.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTerm {
    pub term: FwTerm,
    pub pieces: Vec<(u32, Matrix2c)>,
}

impl HamiltonianTerm {
    pub fn coefficient(&self, power: u32) -> Matrix2c {
        self.pieces
            .iter()
            .filter(|(k, _)| *k == power)
            .fold(Matrix2c::zeros(), |acc, (_, m)| acc + m)
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|(_, m)| m.iter().all(|z| z.norm() == 0.0))
    }
}

fn pauli_dot3(v: &nalgebra::Vector3<f64>) -> Matrix2c {
    let s = pauli_matrices();
    s[0] * Complex64::from(v[0]) + s[1] * Complex64::from(v[1]) + s[2] * Complex64::from(v[2])
}

/// All terms of the weakly relativistic FW Hamiltonian at (x, t) for an
/// electron (q = -1) with zero transverse canonical momentum, so that
/// (p - qA)^2 = p_x^2 + A^2.
pub fn weak_fw_hamiltonian_terms(x: f64, t: f64, cfg: &LaserConfig, mode: WaveMode) -> Vec<HamiltonianTerm> {
    let c = SPEED_OF_LIGHT;
    let c2 = c * c;
    let f = mode.sample(x, t, cfg);
    let a2 = f.a.norm_squared();
    let id = Matrix2c::identity();
    let s = |v: f64| id * Complex64::from(v);
    let ex = nalgebra::Vector3::x();
    // d E_x / dx by a fourth-order stencil
    let h = 1e-4 * cfg.wavelength;
    let exf = |d: f64| mode.sample(x + d * h, t, cfg).e[0];
    let div_e = (exf(-2.0) - 8.0 * exf(-1.0) + 8.0 * exf(1.0) - exf(2.0)) / (12.0 * h);
    let sigma_b = pauli_dot3(&f.b);
    vec![
        HamiltonianTerm {
            term: FwTerm::Kinetic,
            pieces: vec![(2, s(0.5)), (0, s(0.5 * a2))],
        },
        HamiltonianTerm {
            term: FwTerm::Zeeman,
            pieces: vec![(0, sigma_b * Complex64::from(0.5))],
        },
        HamiltonianTerm {
            term: FwTerm::ScalarPotential,
            pieces: vec![(0, s(0.0))],
        },
        HamiltonianTerm {
            // -(p^4 + {p^2, A^2} + A^4) / (8 c^2)
            term: FwTerm::MassCorrection,
            pieces: vec![
                (4, s(-1.0 / (8.0 * c2))),
                (2, s(-2.0 * a2 / (8.0 * c2))),
                (0, s(-a2 * a2 / (8.0 * c2))),
            ],
        },
        HamiltonianTerm {
            term: FwTerm::FieldEnergy,
            pieces: vec![(0, s(-(c2 * f.b.norm_squared() - f.e.norm_squared()) / (8.0 * c2 * c2)))],
        },
        HamiltonianTerm {
            // (1/4c^2) sigma . (E x e_x) p_x, symmetrized
            term: FwTerm::SpinOrbitGradient,
            pieces: vec![(1, pauli_dot3(&f.e.cross(&ex)) * Complex64::from(2.0 / (4.0 * c2)))],
        },
        HamiltonianTerm {
            term: FwTerm::SpinOrbitField,
            pieces: vec![(0, pauli_dot3(&f.e.cross(&f.a)) * Complex64::from(1.0 / (4.0 * c2)))],
        },
        HamiltonianTerm {
            term: FwTerm::Darwin,
            pieces: vec![(0, s(div_e / (8.0 * c2)))],
        },
        HamiltonianTerm {
            // -(1/8c^2) {sigma.B, p^2 + A^2}
            term: FwTerm::Anticommutator,
            pieces: vec![
                (2, sigma_b * Complex64::from(-2.0 / (8.0 * c2))),
                (0, sigma_b * Complex64::from(-2.0 * a2 / (8.0 * c2))),
            ],
        },
    ]
}

/// Sum of the enabled terms' coefficients, per power of p.
fn enabled_coefficients(x: f64, t: f64, cfg: &LaserConfig, mode: WaveMode, terms: &WeakFwTerms) -> [Matrix2c; 5] {
    let mut out = [Matrix2c::zeros(); 5];
    for term in weak_fw_hamiltonian_terms(x, t, cfg, mode) {
        if terms.is_enabled(term.term) {
            for (k, m) in &term.pieces {
                out[*k as usize] += m;
            }
        }
    }
    out
}

/// Everything needed to run one propagation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    /// One pulse; the run is a train of identical pulses.
    pub laser: LaserConfig,
    pub backend: Backend,
    pub integrator: Integrator,
    /// Upper bound on the time step; the actual step divides the laser period.
    pub dt: f64,
    pub points: usize,
    pub pulses: usize,
    pub mode: WaveMode,
    pub terms: WeakFwTerms,
    /// Reuse the one-period propagator across the flat top.
    pub periodic_cache: bool,
}

impl PropagationConfig {
    pub fn new(laser: LaserConfig, backend: Backend) -> Self {
        PropagationConfig {
            laser,
            backend,
            integrator: Integrator::Yoshida4,
            dt: backend.max_dt(&laser),
            points: DEFAULT_POINTS,
            pulses: 10,
            mode: WaveMode::Standing,
            terms: match backend {
                Backend::RelativisticPauli => WeakFwTerms::relativistic_pauli(),
                Backend::NonrelativisticPauli => WeakFwTerms::nonrelativistic_pauli(),
                _ => WeakFwTerms::all(),
            },
            periodic_cache: true,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::line(self.points, self.laser.wavelength)
    }

    /// Steps per laser period.
    pub fn steps_per_period(&self) -> usize {
        (self.laser.period() / self.dt).ceil().max(1.0) as usize
    }

    pub fn step(&self) -> f64 {
        self.laser.period() / self.steps_per_period() as f64
    }

    /// (ramp, flat) lengths in whole periods, if the pulse is commensurate.
    pub fn pulse_periods(&self) -> Option<(usize, usize)> {
        let p = self.laser.period();
        let r = self.laser.ramp / p;
        let f = (self.laser.duration - 2.0 * self.laser.ramp) / p;
        let whole = |v: f64| (v - v.round()).abs() < 1e-9 * v.max(1.0);
        (whole(r) && whole(f)).then(|| (r.round() as usize, f.round() as usize))
    }

    pub fn validate(&self) -> Result<()> {
        self.laser.validate()?;
        self.grid()?;
        if !(self.dt > 0.0) || self.dt > self.backend.max_dt(&self.laser) * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "dt {} outside (0, {}] for {}",
                self.dt,
                self.backend.max_dt(&self.laser),
                self.backend
            )));
        }
        if self.pulses == 0 {
            return Err(Error::InvalidConfig("at least one pulse".into()));
        }
        Ok(())
    }
}

/// Pulse length in whole periods with the given ramp and flat top.
pub fn commensurate_pulse(amplitude: f64, wavelength: f64, eta: f64, ramp_periods: usize, flat_periods: usize) -> Result<LaserConfig> {
    let p = 2.0 * PI / (2.0 * PI / wavelength * SPEED_OF_LIGHT);
    let ramp = ramp_periods as f64 * p;
    LaserConfig::new(amplitude, wavelength, eta, 2.0 * ramp + flat_periods as f64 * p, ramp)
}

trait Stepper {
    fn dim(&self) -> usize;
    /// One symmetric second- or fourth-order step from t to t + h, applied to
    /// every column of `psi`.
    /// `count` consecutive steps of size h starting at t0.
    fn steps(&mut self, psi: &mut DMatrix<Complex64>, t0: f64, h: f64, count: usize);
}

/// Laser fields on the grid points, evaluated by angle addition from
/// precomputed spatial phases.
struct FieldTable {
    cos_kx: Vec<f64>,
    sin_kx: Vec<f64>,
    laser: LaserConfig,
    mode: WaveMode,
}

impl FieldTable {
    fn new(xs: &[f64], laser: &LaserConfig, mode: WaveMode) -> Self {
        let k = laser.wavenumber();
        FieldTable {
            cos_kx: xs.iter().map(|x| (k * x).cos()).collect(),
            sin_kx: xs.iter().map(|x| (k * x).sin()).collect(),
            laser: *laser,
            mode,
        }
    }

    /// Fields at every grid point at time t.
    fn sample(&self, t: f64, out: &mut Vec<FieldSample>) {
        let cfg = &self.laser;
        let (w, e0, eta) = (cfg.angular_frequency(), cfg.amplitude, cfg.eta);
        let c = SPEED_OF_LIGHT;
        let win = cfg.window(t);
        let dwin = cfg.window_derivative(t);
        let waves: &[f64] = match self.mode {
            WaveMode::Standing => &[1.0, -1.0],
            WaveMode::Traveling => &[1.0],
        };
        // phase offsets theta for cos/sin(kx + theta)
        let shifts: Vec<[(f64, f64); 2]> = waves
            .iter()
            .map(|&s| {
                let a = -s * w * t;
                let b = a + s * eta;
                [(a.cos(), a.sin()), (b.cos(), b.sin())]
            })
            .collect();
        out.clear();
        for i in 0..self.cos_kx.len() {
            let (ck, sk) = (self.cos_kx[i], self.sin_kx[i]);
            let mut e = nalgebra::Vector3::zeros();
            let mut b = nalgebra::Vector3::zeros();
            let mut a = nalgebra::Vector3::zeros();
            for (&s, sh) in waves.iter().zip(&shifts) {
                let cos0 = ck * sh[0].0 - sk * sh[0].1;
                let sin0 = sk * sh[0].0 + ck * sh[0].1;
                let cos1 = ck * sh[1].0 - sk * sh[1].1;
                let sin1 = sk * sh[1].0 + ck * sh[1].1;
                e += nalgebra::Vector3::new(0.0, e0 * cos0, e0 * cos1);
                b += nalgebra::Vector3::new(0.0, -s * e0 / c * cos1, s * e0 / c * cos0);
                a += nalgebra::Vector3::new(0.0, s * e0 / w * sin0, s * e0 / w * sin1);
            }
            out.push(FieldSample {
                e: e * win - a * dwin,
                b: b * win,
                a: a * win,
            });
        }
    }
}

/// Split-operator system with `C` components per grid point.
struct SplitSystem<const C: usize> {
    cfg: PropagationConfig,
    ps: Vec<f64>,
    table: FieldTable,
    fields: Vec<FieldSample>,
    potential: Vec<SMatrix<Complex64, C, C>>,
    alpha: [Matrix4c; 3],
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    kinetic_cache: Vec<(f64, Vec<SMatrix<Complex64, C, C>>)>,
    buffers: [Vec<Complex64>; C],
    scratch: Vec<Complex64>,
}

impl<const C: usize> SplitSystem<C> {
    fn new(cfg: &PropagationConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let n = cfg.points;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let scratch = vec![ZERO; fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len())];
        let xs: Vec<f64> = (0..n).map(|i| grid.coordinate(0, i)).collect();
        Ok(SplitSystem {
            cfg: *cfg,
            ps: (0..n).map(|i| grid.wavenumber(0, i)).collect(),
            table: FieldTable::new(&xs, &cfg.laser, cfg.mode),
            fields: Vec::with_capacity(n),
            potential: vec![SMatrix::identity(); n],
            alpha: dirac_matrices().alpha,
            fft,
            ifft,
            kinetic_cache: Vec::new(),
            buffers: std::array::from_fn(|_| vec![ZERO; n]),
            scratch,
        })
    }

    /// exp(-i tau K(p)).
    fn kinetic_exp(backend: Backend, p: f64, tau: f64) -> SMatrix<Complex64, C, C> {
        match backend {
            Backend::Dirac1D => {
                let d = dirac_matrices();
                let c = SPEED_OF_LIGHT;
                let e = (c * c * p * p + c.powi(4)).sqrt();
                let k = d.alpha[0] * Complex64::from(c * p) + d.beta * Complex64::from(c * c);
                let m = d.identity * Complex64::from((e * tau).cos()) - k * (I * ((e * tau).sin() / e));
                SMatrix::from_fn(|r, col| m[(r, col)])
            }
            _ => SMatrix::identity() * Complex64::from_polar(1.0, -0.5 * p * p * tau),
        }
    }

    /// exp(-i tau V) at every grid point, from the fields at time t.
    fn update_potential(&mut self, t: f64, tau: f64) {
        self.table.sample(t, &mut self.fields);
        let c = SPEED_OF_LIGHT;
        let backend = self.cfg.backend;
        for (m, f) in self.potential.iter_mut().zip(&self.fields) {
            *m = match backend {
                Backend::Dirac1D => {
                    // c alpha . A with (alpha . A)^2 = |A|^2
                    let a = f.a.norm();
                    if a == 0.0 {
                        SMatrix::identity()
                    } else {
                        let theta = tau * c * a;
                        let ad = self.alpha[1] * Complex64::from(f.a[1] / a) + self.alpha[2] * Complex64::from(f.a[2] / a);
                        let u = Matrix4c::identity() * Complex64::from(theta.cos()) - ad * (I * theta.sin());
                        SMatrix::from_fn(|r, col| u[(r, col)])
                    }
                }
                _ => {
                    let mut b = f.b * 0.5;
                    if backend == Backend::RelativisticPauli {
                        b += f.e.cross(&f.a) / (4.0 * c * c);
                    }
                    let scalar = Complex64::from_polar(1.0, -0.5 * f.a.norm_squared() * tau);
                    let bn = b.norm();
                    let u = if bn == 0.0 {
                        Matrix2c::identity()
                    } else {
                        let theta = tau * bn;
                        Matrix2c::identity() * Complex64::from(theta.cos()) - pauli_dot3(&(b / bn)) * (I * theta.sin())
                    };
                    SMatrix::from_fn(|r, col| u[(r, col)] * scalar)
                }
            };
        }
    }

    fn kinetic_index(&mut self, tau: f64) -> usize {
        match self.kinetic_cache.iter().position(|(t, _)| *t == tau) {
            Some(i) => i,
            None => {
                let mats = self.ps.iter().map(|&p| Self::kinetic_exp(self.cfg.backend, p, tau)).collect();
                self.kinetic_cache.push((tau, mats));
                self.kinetic_cache.len() - 1
            }
        }
    }

    fn apply_kinetic(&mut self, psi: &mut DMatrix<Complex64>, tau: f64) {
        let n = self.cfg.points;
        let idx = self.kinetic_index(tau);
        let rows = psi.nrows();
        let s = 1.0 / n as f64;
        for col in psi.as_mut_slice().chunks_mut(rows) {
            for (c, buf) in self.buffers.iter_mut().enumerate() {
                for i in 0..n {
                    buf[i] = col[i * C + c];
                }
                self.fft.process_with_scratch(buf, &mut self.scratch);
            }
            for (m, mat) in self.kinetic_cache[idx].1.iter().enumerate() {
                let v = SVector::<Complex64, C>::from_fn(|c, _| self.buffers[c][m]);
                let w = mat * v;
                for c in 0..C {
                    self.buffers[c][m] = w[c];
                }
            }
            for (c, buf) in self.buffers.iter_mut().enumerate() {
                self.ifft.process_with_scratch(buf, &mut self.scratch);
                for i in 0..n {
                    col[i * C + c] = buf[i] * s;
                }
            }
        }
    }

    fn apply_potential(&mut self, psi: &mut DMatrix<Complex64>, t: f64, tau: f64) {
        self.update_potential(t, tau);
        let rows = psi.nrows();
        for col in psi.as_mut_slice().chunks_mut(rows) {
            for (i, m) in self.potential.iter().enumerate() {
                let v = SVector::<Complex64, C>::from_fn(|c, _| col[i * C + c]);
                let w = m * v;
                for c in 0..C {
                    col[i * C + c] = w[c];
                }
            }
        }
    }
}

impl<const C: usize> Stepper for SplitSystem<C> {
    fn dim(&self) -> usize {
        self.cfg.points * C
    }

    fn steps(&mut self, psi: &mut DMatrix<Complex64>, t0: f64, h: f64, count: usize) {
        // adjacent kinetic half-steps are merged; K is time independent
        let weights = self.cfg.integrator.weights();
        let mut pending = 0.0;
        for s in 0..count {
            let mut t = t0 + s as f64 * h;
            for w in weights {
                let sub = w * h;
                self.apply_kinetic(psi, pending + 0.5 * sub);
                self.apply_potential(psi, t + 0.5 * sub, sub);
                pending = 0.5 * sub;
                t += sub;
            }
        }
        if count > 0 {
            self.apply_kinetic(psi, pending);
        }
    }
}

/// Dense weakly relativistic FW system in the position basis.
struct DenseFwSystem {
    cfg: PropagationConfig,
    xs: Vec<f64>,
    /// p^k in the position basis for k = 1..4.
    powers: Vec<DMatrix<Complex64>>,
}

impl DenseFwSystem {
    fn new(cfg: &PropagationConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let n = cfg.points;
        let xs: Vec<f64> = (0..n).map(|i| grid.coordinate(0, i)).collect();
        let ps: Vec<f64> = (0..n).map(|i| grid.wavenumber(0, i)).collect();
        let powers = (0..=4)
            .map(|k| {
                DMatrix::from_fn(n, n, |a, b| {
                    ps.iter()
                        .map(|&p| {
                            let ph = p * (xs[a] - xs[b]);
                            Complex64::from_polar(p.powi(k) / n as f64, ph)
                        })
                        .sum()
                })
            })
            .collect();
        Ok(DenseFwSystem { cfg: *cfg, xs, powers })
    }

    fn hamiltonian(&self, t: f64) -> DMatrix<Complex64> {
        let n = self.cfg.points;
        let coeffs: Vec<[Matrix2c; 5]> = self
            .xs
            .iter()
            .map(|&x| enabled_coefficients(x, t, &self.cfg.laser, self.cfg.mode, &self.cfg.terms))
            .collect();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for a in 0..n {
            for b in 0..n {
                for k in 0..5 {
                    let block = if k == 0 {
                        if a != b {
                            continue;
                        }
                        coeffs[a][0]
                    } else {
                        let d = self.powers[k][(a, b)];
                        (coeffs[a][k] + coeffs[b][k]) * (d * 0.5)
                    };
                    for r in 0..2 {
                        for s in 0..2 {
                            h[(2 * a + r, 2 * b + s)] += block[(r, s)];
                        }
                    }
                }
            }
        }
        h
    }
}

/// exp(-i H) for Hermitian H.
fn hermitian_exp(h: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = (&h + h.adjoint()) * Complex64::from(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

impl Stepper for DenseFwSystem {
    fn dim(&self) -> usize {
        2 * self.cfg.points
    }

    fn steps(&mut self, psi: &mut DMatrix<Complex64>, t0: f64, h: f64, count: usize) {
        for s in 0..count {
            self.dense_step(psi, t0 + s as f64 * h, h);
        }
    }
}

impl DenseFwSystem {
    fn dense_step(&mut self, psi: &mut DMatrix<Complex64>, t: f64, h: f64) {
        let u = match self.cfg.integrator {
            Integrator::Strang => hermitian_exp(self.hamiltonian(t + 0.5 * h) * Complex64::from(h)),
            Integrator::Yoshida4 => {
                // fourth-order Magnus with Gauss nodes
                let d = 3f64.sqrt() / 6.0;
                let h1 = self.hamiltonian(t + (0.5 - d) * h);
                let h2 = self.hamiltonian(t + (0.5 + d) * h);
                let comm = &h2 * &h1 - &h1 * &h2;
                let eff = (&h1 + &h2) * Complex64::from(0.5 * h) - comm * (I * (3f64.sqrt() * h * h / 12.0));
                hermitian_exp(eff)
            }
        };
        *psi = u * &*psi;
    }
}

/// Dirac or Pauli wave function on the 1D grid.
#[derive(Clone, Debug, PartialEq)]
pub enum WaveFunction {
    Dirac(SpinorField),
    Pauli(TwoSpinorField),
}

impl WaveFunction {
    /// Zero-momentum spin-up state: positive-energy FW spin-up for Dirac.
    pub fn initial(backend: Backend, grid: &GridSpec) -> Self {
        let amp = Complex64::from(1.0 / grid.lengths[0].sqrt());
        match backend {
            Backend::Dirac1D => WaveFunction::Dirac(SpinorField::from_fn(grid, |_| [amp, ZERO, ZERO, ZERO])),
            _ => WaveFunction::Pauli(TwoSpinorField::from_fn(grid, |_| [amp, ZERO])),
        }
    }

    fn components(&self) -> usize {
        match self {
            WaveFunction::Dirac(_) => 4,
            WaveFunction::Pauli(_) => 2,
        }
    }

    fn grid(&self) -> GridSpec {
        match self {
            WaveFunction::Dirac(f) => f.grid,
            WaveFunction::Pauli(f) => f.grid,
        }
    }

    fn to_vector(&self) -> DMatrix<Complex64> {
        let g = self.grid();
        let c = self.components();
        let n = g.len();
        DMatrix::from_fn(n * c, 1, |r, _| match self {
            WaveFunction::Dirac(f) => f.components[r % c][r / c],
            WaveFunction::Pauli(f) => f.components[r % c][r / c],
        })
    }

    fn from_vector(&self, v: &DMatrix<Complex64>) -> Self {
        let g = self.grid();
        match self {
            WaveFunction::Dirac(_) => {
                let mut f = SpinorField::zeros(&g);
                for (r, z) in v.column(0).iter().enumerate() {
                    f.components[r % 4][r / 4] = *z;
                }
                WaveFunction::Dirac(f)
            }
            WaveFunction::Pauli(_) => {
                let mut f = TwoSpinorField::zeros(&g);
                for (r, z) in v.column(0).iter().enumerate() {
                    f.components[r % 2][r / 2] = *z;
                }
                WaveFunction::Pauli(f)
            }
        }
    }

    pub fn norm_squared(&self) -> f64 {
        match self {
            WaveFunction::Dirac(f) => f.norm_squared(),
            WaveFunction::Pauli(f) => f.norm_squared(),
        }
    }

    /// FW spin for Dirac, sigma/2 for Pauli, normalized by the norm.
    pub fn spin(&self) -> [f64; 3] {
        match self {
            WaveFunction::Dirac(f) => Axis::ALL.map(|a| fw_spin_unchecked(f, a)),
            WaveFunction::Pauli(f) => {
                let s = pauli_matrices();
                let norm = f.norm_squared();
                [0, 1, 2].map(|k| {
                    let mut acc = ZERO;
                    for i in 0..f.grid.len() {
                        let v = f.at(i);
                        acc += v.dotc(&(s[k] * v));
                    }
                    0.5 * acc.re * f.grid.cell_volume() / norm
                })
            }
        }
    }
}

fn fw_spin_unchecked(field: &SpinorField, axis: Axis) -> f64 {
    let spec = field.spectrum();
    let e = spec
        .kernel_expectation(|p: &Momentum3| Ok(spin_vector(SpinOperatorKind::FoldyWouthuysen, p, ZeroMode::Reject)?[axis.index()]))
        .expect("FW spin kernel is regular");
    e.re / spec.norm_squared()
}

/// FW spin component of a 1D Dirac field at pulse-local time `t`. The laser
/// must be off there unless `allow_field_on` is set.
pub fn fw_spin_expectation(field: &SpinorField, axis: Axis, t: f64, cfg: &LaserConfig, allow_field_on: bool) -> Result<f64> {
    let w = cfg.window(t);
    if w != 0.0 && !allow_field_on {
        return Err(Error::FieldOn { t, w });
    }
    Ok(fw_spin_unchecked(field, axis))
}

/// Field-free measurement between pulses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub pulse: usize,
    pub t: f64,
    /// Accumulated integral of w^power over the pulses so far.
    pub t_eff: f64,
    pub spin: [f64; 3],
    pub norm: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: PropagationConfig,
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: WaveFunction,
    pub steps: u64,
    pub max_norm_drift: f64,
}

fn make_stepper(cfg: &PropagationConfig) -> Result<Box<dyn Stepper>> {
    Ok(match cfg.backend {
        Backend::Dirac1D => Box::new(SplitSystem::<4>::new(cfg)?),
        Backend::RelativisticPauli | Backend::NonrelativisticPauli => Box::new(SplitSystem::<2>::new(cfg)?),
        Backend::WeakFW => Box::new(DenseFwSystem::new(cfg)?),
    })
}

fn vector_norm(v: &DMatrix<Complex64>, dx: f64) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx
}

/// Nearest unitary matrix (polar factor).
fn unitarize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let svd = m.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

fn matrix_power(u: &DMatrix<Complex64>, mut e: usize) -> DMatrix<Complex64> {
    let mut result = DMatrix::identity(u.nrows(), u.ncols());
    let mut base = u.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = unitarize(&base * &result);
        }
        e >>= 1;
        if e > 0 {
            base = unitarize(&base * &base);
        }
    }
    result
}

struct Runner {
    stepper: Box<dyn Stepper>,
    h: f64,
    dx: f64,
    steps: u64,
    max_drift: f64,
}

impl Runner {
    /// Step a single state through `count` steps from pulse-local time `t0`,
    /// checking norm drift every 1000 steps.
    fn advance(&mut self, psi: &mut DMatrix<Complex64>, t0: f64, count: usize) -> Result<()> {
        let mut reference = vector_norm(psi, self.dx);
        let mut done = 0;
        while done < count {
            let chunk = (count - done).min(1000);
            self.stepper.steps(psi, t0 + done as f64 * self.h, self.h, chunk);
            done += chunk;
            self.steps += chunk as u64;
            let norm = vector_norm(psi, self.dx);
            let drift = (norm - reference).abs();
            self.max_drift = self.max_drift.max(drift);
            if drift > MAX_DRIFT_PER_1000_STEPS {
                return Err(Error::UnstableStep { drift, steps: self.steps as usize });
            }
            reference = norm;
        }
        Ok(())
    }

    /// Propagator over `count` steps from `t0`, built column by column.
    fn propagator(&mut self, t0: f64, count: usize) -> DMatrix<Complex64> {
        let dim = self.stepper.dim();
        let mut u = DMatrix::identity(dim, dim);
        self.stepper.steps(&mut u, t0, self.h, count);
        self.steps += count as u64;
        unitarize(u)
    }
}

/// Run a train of identical pulses and measure the spin after each one.
pub fn propagate(initial: &WaveFunction, cfg: &PropagationConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    if initial.grid() != grid || initial.components() != cfg.backend.components() {
        return Err(Error::InvalidConfig("initial state does not match backend and grid".into()));
    }
    let norm0 = initial.norm_squared();
    if (norm0 - 1.0).abs() > crate::grid::NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { norm: norm0 });
    }
    let mut runner = Runner {
        stepper: make_stepper(cfg)?,
        h: cfg.step(),
        dx: grid.spacing(0),
        steps: 0,
        max_drift: 0.0,
    };
    let m = cfg.steps_per_period();
    let laser = &cfg.laser;
    let periods = cfg.pulse_periods().filter(|_| cfg.periodic_cache);
    let flat = match periods {
        Some((ramp, flat)) if flat > 0 => Some((ramp, flat, matrix_power(&runner.propagator(ramp as f64 * laser.period(), m), flat))),
        _ => None,
    };
    let total_steps = (laser.duration / runner.h).round() as usize;
    let t_eff_pulse = laser.window_integral(cfg.backend.scaling_power());

    let mut psi = initial.to_vector();
    let mut checkpoints = vec![Checkpoint {
        pulse: 0,
        t: 0.0,
        t_eff: 0.0,
        spin: initial.spin(),
        norm: norm0,
    }];
    for pulse in 1..=cfg.pulses {
        match &flat {
            Some((ramp, nflat, u)) => {
                runner.advance(&mut psi, 0.0, ramp * m)?;
                psi = u * &psi;
                runner.steps += (nflat * m) as u64;
                runner.advance(&mut psi, (ramp + nflat) as f64 * laser.period(), ramp * m)?;
            }
            None => runner.advance(&mut psi, 0.0, total_steps)?,
        }
        let state = initial.from_vector(&psi);
        let norm = state.norm_squared();
        let drift = (norm - norm0).abs();
        runner.max_drift = runner.max_drift.max(drift);
        checkpoints.push(Checkpoint {
            pulse,
            t: pulse as f64 * laser.duration,
            t_eff: pulse as f64 * t_eff_pulse,
            spin: state.spin(),
            norm,
        });
    }
    Ok(RunOutput {
        config: *cfg,
        final_state: initial.from_vector(&psi),
        checkpoints,
        steps: runner.steps,
        max_norm_drift: runner.max_drift,
    })
}

/// Pulse-train settings shared by all points of an amplitude sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub wavelength: f64,
    pub ramp_periods: usize,
    /// Rotation per pulse the flat top is sized for, rad.
    pub target_rotation: f64,
    pub pulses: usize,
    pub points: usize,
    pub integrator: Integrator,
    /// Step as a fraction of the backend's largest stable step.
    pub dt_fraction: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            wavelength: crate::laser::default_wavelength(),
            ramp_periods: 46,
            target_rotation: 0.1,
            pulses: 10,
            points: DEFAULT_POINTS,
            integrator: Integrator::Yoshida4,
            dt_fraction: 1.0,
        }
    }
}

/// Rate each backend is expected to show: Omega_P for the nonrelativistic
/// Pauli equation, the spin-density formula otherwise.
pub fn expected_rate(backend: Backend, cfg: &LaserConfig) -> f64 {
    match backend {
        Backend::NonrelativisticPauli => crate::laser::omega_p(cfg),
        _ => crate::laser::omega_prediction(cfg),
    }
}

/// Circularly polarized pulse whose flat top gives about the target rotation.
pub fn sweep_config(backend: Backend, amplitude: f64, s: &SweepSettings) -> Result<PropagationConfig> {
    let probe = commensurate_pulse(amplitude, s.wavelength, PI / 2.0, s.ramp_periods, 1)?;
    let rate = expected_rate(backend, &probe);
    let per_period = rate * probe.period();
    let flat = if per_period > 0.0 {
        (s.target_rotation / per_period).ceil().clamp(1.0, 1e15) as usize
    } else {
        1
    };
    let laser = commensurate_pulse(amplitude, s.wavelength, PI / 2.0, s.ramp_periods, flat)?;
    let mut cfg = PropagationConfig::new(laser, backend);
    cfg.pulses = s.pulses;
    cfg.points = s.points;
    cfg.integrator = s.integrator;
    cfg.dt *= s.dt_fraction;
    Ok(cfg)
}

/// Log-uniform amplitudes from `max` down over `decades`.
pub fn log_uniform_amplitudes(max: f64, decades: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| max * 10f64.powf(-decades * i as f64 / (count - 1).max(1) as f64))
        .collect()
}

/// Linear fit of the transverse spin angle against effective time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecessionFit {
    /// |slope| of the unwrapped angle atan2(S_y, S_z).
    pub omega: f64,
    pub signed_omega: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the angle, rad.
    pub residual: f64,
    pub samples: usize,
    pub total_rotation: f64,
}

/// Fit phi(t) = atan2(S_y, S_z) linearly over (t_eff, spin) samples.
pub fn extract_precession_frequency(samples: &[(f64, [f64; 3])]) -> Result<PrecessionFit> {
    if samples.len() < 3 {
        return Err(Error::FitDegenerate { angle: 0.0 });
    }
    let mut phis: Vec<f64> = Vec::with_capacity(samples.len());
    for (_, s) in samples {
        let raw = s[1].atan2(s[2]);
        let phi = match phis.last() {
            Some(&prev) => prev + (raw - prev + PI).rem_euclid(2.0 * PI) - PI,
            None => raw,
        };
        phis.push(phi);
    }
    let total = phis.last().unwrap() - phis[0];
    if total.abs() < MIN_ROTATION {
        return Err(Error::FitDegenerate { angle: total.abs() });
    }
    let n = samples.len() as f64;
    let tm = samples.iter().map(|(t, _)| t).sum::<f64>() / n;
    let pm = phis.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for ((t, _), p) in samples.iter().zip(&phis) {
        sxy += (t - tm) * (p - pm);
        sxx += (t - tm) * (t - tm);
    }
    let slope = sxy / sxx;
    let intercept = pm - slope * tm;
    let residual = (samples
        .iter()
        .zip(&phis)
        .map(|((t, _), p)| (p - intercept - slope * t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PrecessionFit {
        omega: slope.abs(),
        signed_omega: slope,
        intercept,
        residual,
        samples: samples.len(),
        total_rotation: total,
    })
}

/// Result of one sweep point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrecessionResult {
    pub backend: Backend,
    pub laser: LaserConfig,
    pub fit: PrecessionFit,
    pub checkpoints: Vec<Checkpoint>,
    pub max_norm_drift: f64,
    pub steps: u64,
}

/// Propagate from the standard initial state and fit Omega.
pub fn precession_run(cfg: &PropagationConfig) -> Result<PrecessionResult> {
    let initial = WaveFunction::initial(cfg.backend, &cfg.grid()?);
    let out = propagate(&initial, cfg)?;
    let samples: Vec<(f64, [f64; 3])> = out.checkpoints.iter().map(|c| (c.t_eff, c.spin)).collect();
    let fit = extract_precession_frequency(&samples)?;
    Ok(PrecessionResult {
        backend: cfg.backend,
        laser: cfg.laser,
        fit,
        checkpoints: out.checkpoints,
        max_norm_drift: out.max_norm_drift,
        steps: out.steps,
    })
}

/// Least-squares slope of log(omega) against log(amplitude).
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    sxy / sxx
}
