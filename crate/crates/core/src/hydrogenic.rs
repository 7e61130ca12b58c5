//! Dirac-Coulomb ground states of hydrogen-like ions and their analytic
//! oracles.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::dirac::{h0_kernel, Spinor4};
use crate::error::{Error, Result};
use crate::grid::{check_normalized, FftPlans, GridSpec, SpinorField};
use crate::position::{position_moments, PositionKind};
use crate::spin::{spin_vector, SpinOperatorKind, ZeroMode};
use crate::units::{FINE_STRUCTURE, SPEED_OF_LIGHT};

/// Fraction of the analytic norm that must fall inside the box.
pub const MIN_CAPTURED_NORM: f64 = 0.999;

/// sqrt(1 - Z^2 alpha^2).
pub fn gamma_factor(z: f64) -> Result<f64> {
    let za = z * FINE_STRUCTURE;
    if !(za < 1.0) || z < 0.0 {
        return Err(Error::SupercriticalZ { z });
    }
    Ok((1.0 - za * za).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub n: u32,
    pub j: f64,
    pub z: f64,
    /// Total energy including the rest mass, a.u.
    pub energy: f64,
}

impl EnergyLevel {
    pub fn binding_energy(&self) -> f64 {
        SPEED_OF_LIGHT * SPEED_OF_LIGHT - self.energy
    }
}

/// Sommerfeld fine-structure energy
/// m c^2 [1 + (Z alpha / (n - j - 1/2 + sqrt((j + 1/2)^2 - Z^2 alpha^2)))^2]^(-1/2).
pub fn eigen_energy(n: u32, j: f64, z: f64) -> Result<EnergyLevel> {
    gamma_factor(z)?;
    let twice_j = 2.0 * j;
    if n == 0 || twice_j.fract() != 0.0 || (twice_j as i64) % 2 == 0 || j < 0.5 || j > n as f64 - 0.5 {
        return Err(Error::InvalidConfig(format!("no level with n = {n}, j = {j}")));
    }
    let za = z * FINE_STRUCTURE;
    let denom = n as f64 - j - 0.5 + ((j + 0.5).powi(2) - za * za).sqrt();
    let ratio = za / denom;
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    Ok(EnergyLevel {
        n,
        j,
        z,
        energy: c2 / (1.0 + ratio * ratio).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Projection {
    Up,
    Down,
}

impl Projection {
    pub fn m(self) -> f64 {
        match self {
            Projection::Up => 0.5,
            Projection::Down => -0.5,
        }
    }
}

/// A 1s_1/2 state. `kappa` is the label used with K = beta (Sigma.L + 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydrogenicState {
    pub z: f64,
    pub n: u32,
    pub kappa: i32,
    pub j: f64,
    pub projection: Projection,
    pub gamma: f64,
    pub normalization: f64,
}

pub fn ground_state(z: f64, projection: Projection) -> Result<HydrogenicState> {
    if z <= 0.0 {
        return Err(Error::InvalidConfig(format!("atomic number {z}")));
    }
    let g = gamma_factor(z)?;
    let normalization = (2.0 * z).powf(1.5) * ((1.0 + g) / (2.0 * gamma(1.0 + 2.0 * g))).sqrt();
    Ok(HydrogenicState {
        z,
        n: 1,
        kappa: 1,
        j: 0.5,
        projection,
        gamma: g,
        normalization,
    })
}

impl HydrogenicState {
    /// (1 - gamma) / (Z alpha), the lower-to-upper amplitude ratio.
    pub fn lower_amplitude(&self) -> f64 {
        (1.0 - self.gamma) / (self.z * FINE_STRUCTURE)
    }

    /// e^(-Zr) / (2Zr)^(1-gamma)
    pub fn radial(&self, r: f64) -> f64 {
        (-self.z * r).exp() * (2.0 * self.z * r).powf(self.gamma - 1.0)
    }

    /// The spinor at a Cartesian point (r != 0).
    pub fn eval(&self, r: &Vector3<f64>) -> Spinor4 {
        let rad = r.norm();
        let f = self.normalization * self.radial(rad);
        let y00 = (1.0 / (4.0 * PI)).sqrt();
        let cos_t = r[2] / rad;
        let y10 = (3.0 / (4.0 * PI)).sqrt() * cos_t;
        // sin(theta) e^(+-i phi) = (x +- i y) / r
        let s_plus = Complex64::new(r[0], r[1]) / rad;
        let y11 = -(3.0 / (8.0 * PI)).sqrt() * s_plus;
        let y1m1 = (3.0 / (8.0 * PI)).sqrt() * s_plus.conj();
        let ia = Complex64::new(0.0, self.lower_amplitude());
        let (third, two_thirds) = ((1.0f64 / 3.0).sqrt(), (2.0f64 / 3.0).sqrt());
        let v = match self.projection {
            Projection::Up => Spinor4::new(
                y00.into(),
                Complex64::from(0.0),
                ia * third * y10,
                -ia * two_thirds * y11,
            ),
            Projection::Down => Spinor4::new(
                Complex64::from(0.0),
                y00.into(),
                ia * two_thirds * y1m1,
                -ia * third * y10,
            ),
        };
        v * Complex64::from(f)
    }

    /// Spherical-coordinate evaluator.
    pub fn eval_spherical(&self, r: f64, theta: f64, phi: f64) -> Spinor4 {
        let v = Vector3::new(r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos());
        self.eval(&v)
    }

    /// Radial probability density 4 pi r^2 |psi|^2 (angle-independent).
    pub fn radial_density(&self, r: f64) -> f64 {
        let f = self.normalization * self.radial(r);
        let w = self.lower_amplitude().powi(2);
        f * f * (1.0 + w) * r * r
    }

    pub fn energy(&self) -> Result<EnergyLevel> {
        eigen_energy(self.n, self.j, self.z)
    }
}

/// (1 - gamma)^2 / (Z alpha)^2, the lower-component weight relative to the upper.
pub fn lower_weight(z: f64) -> Result<f64> {
    let g = gamma_factor(z)?;
    Ok((1.0 - g) / (1.0 + g))
}

/// <Sigma_3 / 2> on the m = +1/2 ground state.
pub fn analytic_pauli_spin_z(z: f64) -> Result<f64> {
    let w = lower_weight(z)?;
    Ok((0.5 - w / 6.0) / (1.0 + w))
}

/// <r^2> = (2 gamma + 1)(2 gamma + 2) / (4 Z^2).
pub fn analytic_mean_square_radius(z: f64) -> Result<f64> {
    let g = gamma_factor(z)?;
    Ok((2.0 * g + 1.0) * (2.0 * g + 2.0) / (4.0 * z * z))
}

/// Var(z) for the standard position operator, <r^2> / 3.
pub fn analytic_position_variance_pauli(z: f64) -> Result<f64> {
    Ok(analytic_mean_square_radius(z)? / 3.0)
}

/// Integral over r in (0, r_max) with Gauss-Legendre on s = ln r, in
/// panels spanning twenty decades below the decay length.
pub fn log_radial_integral<F: Fn(f64) -> f64>(z: f64, r_max: f64, f: F) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(48).unwrap());
    let lo = (1e-20 / z).ln();
    let hi = r_max.ln();
    let panels = 24;
    let h = (hi - lo) / panels as f64;
    (0..panels)
        .map(|k| {
            let a = lo + k as f64 * h;
            rule.integrate(a, a + h, |s| {
                let r = s.exp();
                f(r) * r
            })
        })
        .sum()
}

/// Norm within radius `r_max` by quadrature.
pub fn captured_norm(state: &HydrogenicState, r_max: f64) -> f64 {
    log_radial_integral(state.z, r_max, |r| state.radial_density(r))
}

/// <r^k> by quadrature.
pub fn radial_moment_quadrature(state: &HydrogenicState, k: i32) -> f64 {
    let r_max = 200.0 / state.z;
    log_radial_integral(state.z, r_max, |r| state.radial_density(r) * r.powi(k))
}

/// A ground state sampled on a 3D grid and renormalized.
#[derive(Clone, Debug)]
pub struct SampledState {
    pub state: HydrogenicState,
    pub field: SpinorField,
    /// |1 - norm| before renormalization.
    pub norm_defect: f64,
}

/// Evaluate at cell centers and renormalize. The norm captured inside the
/// inscribed sphere of the box must reach [`MIN_CAPTURED_NORM`].
pub fn sample_state(state: &HydrogenicState, grid: &GridSpec) -> Result<SampledState> {
    if grid.dimension != crate::grid::Dimension::Three {
        return Err(Error::InvalidGrid("hydrogenic states need a 3D grid".into()));
    }
    let half = 0.5 * grid.lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let captured = captured_norm(state, half);
    if captured < MIN_CAPTURED_NORM {
        return Err(Error::BoxTooSmall { captured });
    }
    let raw = SpinorField::from_fn(grid, |r| {
        let s = state.eval(r);
        [s[0], s[1], s[2], s[3]]
    });
    let norm = raw.norm_squared();
    Ok(SampledState {
        state: *state,
        norm_defect: (1.0 - norm).abs(),
        field: raw.scaled(Complex64::from(1.0 / norm.sqrt())),
    })
}

/// Default box for atomic number Z.
pub fn default_box_length(z: f64) -> f64 {
    40.0 / z
}

/// <h0> + <-Z/r> on a sampled field.
pub fn coulomb_energy(field: &SpinorField, z: f64) -> Result<f64> {
    check_normalized(field)?;
    let plans = FftPlans::new(&field.grid);
    let kinetic = field
        .to_spectrum(&plans)
        .kernel_expectation(|p| Ok(h0_kernel(p, SPEED_OF_LIGHT)))?;
    let density = field.density();
    let g = field.grid;
    let potential: f64 = density
        .iter()
        .enumerate()
        .map(|(i, d)| -z / g.position(i).norm() * d)
        .sum::<f64>()
        * g.cell_volume();
    Ok(kinetic.re + potential)
}

/// z-component spin expectations of all seven kinds, sharing one FFT. The
/// p = 0 mode uses the +z limit for kinds containing p/|p|.
pub fn spin_z_expectations(field: &SpinorField) -> Result<Vec<(SpinOperatorKind, f64)>> {
    check_normalized(field)?;
    let spec = field.to_spectrum(&FftPlans::new(&field.grid));
    SpinOperatorKind::ALL
        .iter()
        .map(|&kind| {
            let e = spec.kernel_expectation(|p| Ok(spin_vector(kind, p, ZeroMode::LimitAlongZ)?[2]))?;
            Ok((kind, e.re))
        })
        .collect()
}

/// Observables for one atomic number.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateObservables {
    pub z: f64,
    pub gamma: f64,
    pub points: usize,
    pub box_length: f64,
    pub norm_defect: f64,
    pub spin_z: Vec<(SpinOperatorKind, f64)>,
    /// (kind, mean, variance) of the z coordinate.
    pub position_z: Vec<(PositionKind, f64, f64)>,
    pub analytic_pauli_spin_z: f64,
    pub analytic_variance_pauli: f64,
}

/// Spin z-expectations of every operator for the ground state with the
/// given projection on the default box.
pub fn spin_z_for_projection(z: f64, points: usize, projection: Projection) -> Result<Vec<(SpinOperatorKind, f64)>> {
    let state = ground_state(z, projection)?;
    let grid = GridSpec::cube(points, default_box_length(z))?;
    spin_z_expectations(&sample_state(&state, &grid)?.field)
}

/// Spin and position observables of the m = +1/2 ground state on an n^3 grid
/// with the default box.
pub fn ground_state_observables(z: f64, points: usize) -> Result<GroundStateObservables> {
    let state = ground_state(z, Projection::Up)?;
    let box_length = default_box_length(z);
    let grid = GridSpec::cube(points, box_length)?;
    let sampled = sample_state(&state, &grid)?;
    let spin_z = spin_z_expectations(&sampled.field)?;
    let position_z = PositionKind::ALL
        .iter()
        .map(|&kind| {
            let m = position_moments(&sampled.field, kind)?[2];
            Ok((kind, m.mean, m.variance))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundStateObservables {
        z,
        gamma: state.gamma,
        points,
        box_length,
        norm_defect: sampled.norm_defect,
        spin_z,
        position_z,
        analytic_pauli_spin_z: analytic_pauli_spin_z(z)?,
        analytic_variance_pauli: analytic_position_variance_pauli(z)?,
    })
}
