//! Position operators induced by the Pauli, Foldy-Wouthuysen and Pryce spin
//! operators, r_X = T_X r T_X^-1, applied to sampled Dirac fields.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirac::{alpha_dot, dirac_matrices, from_blocks, p0_with, Axis, Matrix2c, Matrix4c, Momentum3};
use crate::error::{Error, Result};
use crate::grid::{apply_momentum_kernel_with, check_normalized, coordinate_moments, FftPlans, PositionMoments, SpinorField};
use crate::spin::{fw_transform, pryce_transform_with, ZeroMode};
use crate::units::SPEED_OF_LIGHT;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositionKind {
    Pauli,
    FoldyWouthuysen,
    Pryce,
}

impl PositionKind {
    pub const ALL: [PositionKind; 3] = [PositionKind::Pauli, PositionKind::FoldyWouthuysen, PositionKind::Pryce];

    pub fn name(self) -> &'static str {
        match self {
            PositionKind::Pauli => "Pauli",
            PositionKind::FoldyWouthuysen => "FoldyWouthuysen",
            PositionKind::Pryce => "Pryce",
        }
    }

    /// T_X at momentum p. The Pryce zero mode uses the +z limit.
    pub fn transform(self, p: &Momentum3) -> Result<Matrix4c> {
        match self {
            PositionKind::Pauli => Ok(Matrix4c::identity()),
            PositionKind::FoldyWouthuysen => Ok(fw_transform(p)),
            PositionKind::Pryce => pryce_transform_with(p, ZeroMode::LimitAlongZ),
        }
    }
}

/// T_X^-1 psi, the state whose plain coordinate moments are the moments of r_X.
pub fn untransform(kind: PositionKind, field: &SpinorField, plans: &FftPlans) -> Result<SpinorField> {
    if kind == PositionKind::Pauli {
        return Ok(field.clone());
    }
    apply_momentum_kernel_with(field, &|p: &Momentum3| Ok(kind.transform(p)?.adjoint()), plans)
}

fn require_3d(field: &SpinorField) -> Result<()> {
    if field.grid.dimension != crate::grid::Dimension::Three {
        return Err(Error::InvalidGrid("position operators need a 3D grid".into()));
    }
    Ok(())
}

/// r_X,axis psi via the sandwich T (r (T^-1 psi)).
pub fn position_kernel(kind: PositionKind, axis: Axis, field: &SpinorField) -> Result<SpinorField> {
    require_3d(field)?;
    let plans = FftPlans::new(&field.grid);
    let a = axis.index();
    let inner = untransform(kind, field, &plans)?.multiply_by(|r| r[a]);
    if kind == PositionKind::Pauli {
        return Ok(inner);
    }
    apply_momentum_kernel_with(&inner, &|p: &Momentum3| kind.transform(p), &plans)
}

/// Closed-form FW mean-position correction r_FW - r at momentum p:
/// i [ i (Sigma x p) / (2 p0 (p0 + mc)) - beta (alpha.p) p / (2 p0^2 (p0 + mc)) + beta alpha / (2 p0) ].
pub fn fw_position_correction(axis: Axis, p: &Momentum3) -> Matrix4c {
    let mc = SPEED_OF_LIGHT;
    let d = dirac_matrices();
    let (i, j, k) = (axis.index(), (axis.index() + 1) % 3, (axis.index() + 2) % 3);
    let pv = &p.0;
    let p0 = p0_with(p, mc);
    let sxp = d.sigma[j] * Complex64::from(pv[k]) - d.sigma[k] * Complex64::from(pv[j]);
    let t1 = sxp * (I / (2.0 * p0 * (p0 + mc)));
    let t2 = d.beta * alpha_dot(pv) * Complex64::from(pv[i] / (2.0 * p0 * p0 * (p0 + mc)));
    let t3 = d.beta * d.alpha[i] * Complex64::from(1.0 / (2.0 * p0));
    (t1 - t2 + t3) * I
}

/// Closed-form Pryce correction r_Pr - r = -diag(0, (sigma x p)/|p|^2).
pub fn pryce_position_correction(axis: Axis, p: &Momentum3) -> Result<Matrix4c> {
    if p.is_zero() {
        return Err(Error::DegenerateMomentum);
    }
    let s = crate::dirac::pauli_matrices();
    let (j, k) = ((axis.index() + 1) % 3, (axis.index() + 2) % 3);
    let pv = &p.0;
    let sxp = (s[j] * Complex64::from(pv[k]) - s[k] * Complex64::from(pv[j])) * Complex64::from(-1.0 / p.norm_squared());
    let z = Matrix2c::zeros();
    Ok(from_blocks(&z, &z, &z, &sxp))
}

/// r_FW,axis psi from the closed form: r psi plus the spectral correction.
pub fn fw_mean_position(axis: Axis, field: &SpinorField) -> Result<SpinorField> {
    require_3d(field)?;
    let plans = FftPlans::new(&field.grid);
    let a = axis.index();
    let local = field.multiply_by(|r| r[a]);
    let corr = apply_momentum_kernel_with(field, &|p: &Momentum3| Ok(fw_position_correction(axis, p)), &plans)?;
    Ok(local.combine(Complex64::from(1.0), &corr, Complex64::from(1.0)))
}

/// <r_X> and Var(r_X) along `axis` for a normalized field. Uses
/// <psi| T f(r) T^-1 |psi> = integral of f(r) |T^-1 psi|^2.
pub fn variance_of_position(field: &SpinorField, kind: PositionKind, axis: Axis) -> Result<PositionMoments> {
    require_3d(field)?;
    check_normalized(field)?;
    let plans = FftPlans::new(&field.grid);
    Ok(coordinate_moments(&untransform(kind, field, &plans)?, axis))
}

/// Moments along all three axes, sharing one transform.
pub fn position_moments(field: &SpinorField, kind: PositionKind) -> Result<[PositionMoments; 3]> {
    require_3d(field)?;
    check_normalized(field)?;
    let plans = FftPlans::new(&field.grid);
    let phi = untransform(kind, field, &plans)?;
    Ok(Axis::ALL.map(|a| coordinate_moments(&phi, a)))
}

/// i T d/dp_axis T^-1 by central differences, for checking closed forms.
pub fn sandwich_correction_numeric(kind: PositionKind, axis: Axis, p: &Momentum3, h: f64) -> Result<Matrix4c> {
    let t = kind.transform(p)?;
    let mut e = Vector3::zeros();
    e[axis.index()] = h;
    let plus = kind.transform(&Momentum3(p.0 + e))?.adjoint();
    let minus = kind.transform(&Momentum3(p.0 - e))?.adjoint();
    Ok(t * (plus - minus) * (I / (2.0 * h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::max_abs;
    use crate::grid::GridSpec;
    use crate::spin::sample_point;

    fn packet(g: &GridSpec) -> SpinorField {
        SpinorField::from_fn(g, |r| {
            let env = (-r.norm_squared() / 2.0).exp();
            let ph = Complex64::from_polar(env, 0.7 * r[0] - 0.3 * r[2]);
            [ph, ph * Complex64::new(0.3, -0.2), ph * 0.4 * (1.0 + r[1]), ph * Complex64::new(0.0, 0.5) * r[2]]
        })
        .normalized()
    }

    fn rel(a: &SpinorField, b: &SpinorField) -> f64 {
        let d = a.combine(Complex64::from(1.0), b, Complex64::from(-1.0));
        (d.norm_squared() / b.norm_squared()).sqrt()
    }

    #[test]
    fn closed_forms_match_numeric_sandwich() {
        for n in 0..40 {
            let s = sample_point(11, n);
            // keep |p| where central differences are well conditioned
            let p = Momentum3(s.p.0 * (1.0 / s.p.norm().max(1.0).sqrt()));
            let h = 1e-4 * p.norm().max(1.0);
            for axis in Axis::ALL {
                let fw = sandwich_correction_numeric(PositionKind::FoldyWouthuysen, axis, &p, h).unwrap();
                let scale = max_abs(&fw).max(1e-6);
                assert!(max_abs(&(fw - fw_position_correction(axis, &p))) / scale < 1e-6);
                let pr = sandwich_correction_numeric(PositionKind::Pryce, axis, &p, h).unwrap();
                let scale = max_abs(&pr).max(1e-6);
                assert!(max_abs(&(pr - pryce_position_correction(axis, &p).unwrap())) / scale < 1e-6);
            }
        }
    }

    #[test]
    fn corrections_are_hermitian() {
        let p = Momentum3::new(30.0, -120.0, 7.0);
        for axis in Axis::ALL {
            let m = fw_position_correction(axis, &p);
            assert!(max_abs(&(m - m.adjoint())) < 1e-15);
            let m = pryce_position_correction(axis, &p).unwrap();
            assert!(max_abs(&(m - m.adjoint())) < 1e-15);
        }
    }

    #[test]
    fn pauli_is_coordinate_multiplication() {
        let g = GridSpec::cube(16, 8.0).unwrap();
        let f = packet(&g);
        let out = position_kernel(PositionKind::Pauli, Axis::Y, &f).unwrap();
        assert_eq!(out, f.multiply_by(|r| r[1]));
    }

    #[test]
    fn fw_closed_form_matches_sandwich_on_grid() {
        let g = GridSpec::cube(64, 16.0).unwrap();
        let f = packet(&g);
        for axis in Axis::ALL {
            let sandwich = position_kernel(PositionKind::FoldyWouthuysen, axis, &f).unwrap();
            let closed = fw_mean_position(axis, &f).unwrap();
            assert!(rel(&closed, &sandwich) < 1e-10, "{}", rel(&closed, &sandwich));
        }
    }

    #[test]
    fn fw_position_of_positive_energy_state_matches_fw_representation() {
        use crate::dirac::{fw_basis_state, EnergySign, PlaneWaveLabel, SpinState};
        let g = GridSpec::cube(16, 12.0).unwrap();
        // FW-representation packet of positive-energy spin-up waves
        let fw_state = SpinorField::from_fn(&g, |r| {
            let env = (-r.norm_squared() / 4.0).exp();
            let w = fw_basis_state(&PlaneWaveLabel::new(EnergySign::Positive, Momentum3::zero(), SpinState::Up));
            let s = w.eval(r) * Complex64::from(env);
            [s[0], s[1], s[2], s[3]]
        })
        .normalized();
        let plans = FftPlans::new(&g);
        let dirac_state = apply_momentum_kernel_with(&fw_state, &|p: &Momentum3| Ok(fw_transform(p)), &plans).unwrap();
        for axis in Axis::ALL {
            let lhs = dirac_state.inner(&position_kernel(PositionKind::FoldyWouthuysen, axis, &dirac_state).unwrap());
            let rhs = fw_state.inner(&fw_state.multiply_by(|r| r[axis.index()]));
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn moments_match_kernel_expectations() {
        let g = GridSpec::cube(16, 10.0).unwrap();
        let f = packet(&g);
        for kind in PositionKind::ALL {
            let m = variance_of_position(&f, kind, Axis::X).unwrap();
            let rx = position_kernel(kind, Axis::X, &f).unwrap();
            let mean = f.inner(&rx);
            let second = rx.inner(&rx);
            assert!((mean.re - m.mean).abs() < 1e-10 && mean.im.abs() < 1e-10);
            assert!((second.re - m.second_moment).abs() < 1e-9);
        }
    }

    #[test]
    fn needs_3d_grid() {
        let g = GridSpec::line(16, 4.0).unwrap();
        let f = crate::grid::SpinorField::zeros(&g);
        assert!(matches!(position_kernel(PositionKind::Pauli, Axis::X, &f), Err(Error::InvalidGrid(_))));
    }
}
