//! Dirac-representation matrices, the free Dirac Hamiltonian in momentum
//! space and free plane-wave eigenstates.

use std::sync::LazyLock;

use nalgebra::{Matrix2, Matrix4, Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spin::fw_transform;
use crate::units::SPEED_OF_LIGHT;

pub type Matrix4c = Matrix4<Complex64>;
pub type Matrix2c = Matrix2<Complex64>;
pub type Spinor4 = Vector4<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Cartesian component selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i % 3]
    }
}

/// Canonical momentum eigenvalue in atomic units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Momentum3(pub Vector3<f64>);

impl Momentum3 {
    pub fn new(px: f64, py: f64, pz: f64) -> Self {
        Momentum3(Vector3::new(px, py, pz))
    }

    pub fn zero() -> Self {
        Momentum3(Vector3::zeros())
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn component(&self, axis: Axis) -> f64 {
        self.0[axis.index()]
    }
}

impl From<[f64; 3]> for Momentum3 {
    fn from(p: [f64; 3]) -> Self {
        Momentum3::new(p[0], p[1], p[2])
    }
}

/// The constant matrices of the Dirac algebra.
#[derive(Clone, Debug)]
pub struct DiracMatrices {
    pub sigma2x2: [Matrix2c; 3],
    pub alpha: [Matrix4c; 3],
    pub beta: Matrix4c,
    pub sigma: [Matrix4c; 3],
    pub identity: Matrix4c,
}

static DIRAC: LazyLock<DiracMatrices> = LazyLock::new(build_dirac_matrices);

/// Dirac-representation alpha_i, beta and Sigma_i.
pub fn dirac_matrices() -> &'static DiracMatrices {
    &DIRAC
}

pub fn pauli_matrices() -> [Matrix2c; 3] {
    [
        Matrix2::new(ZERO, ONE, ONE, ZERO),
        Matrix2::new(ZERO, -I, I, ZERO),
        Matrix2::new(ONE, ZERO, ZERO, -ONE),
    ]
}

/// Assemble a 4x4 matrix from four 2x2 blocks.
pub fn from_blocks(ul: &Matrix2c, ur: &Matrix2c, ll: &Matrix2c, lr: &Matrix2c) -> Matrix4c {
    let mut m = Matrix4c::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(ul);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(ur);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(ll);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(lr);
    m
}

/// Extract the 2x2 block at block position (row, col), each 0 or 1.
pub fn block(m: &Matrix4c, row: usize, col: usize) -> Matrix2c {
    m.fixed_view::<2, 2>(2 * row, 2 * col).into_owned()
}

fn build_dirac_matrices() -> DiracMatrices {
    let s = pauli_matrices();
    let z = Matrix2c::zeros();
    let e = Matrix2c::identity();
    DiracMatrices {
        sigma2x2: s,
        alpha: [0, 1, 2].map(|i| from_blocks(&z, &s[i], &s[i], &z)),
        beta: from_blocks(&e, &z, &z, &(-e)),
        sigma: [0, 1, 2].map(|i| from_blocks(&s[i], &z, &z, &s[i])),
        identity: Matrix4c::identity(),
    }
}

pub fn commutator(a: &Matrix4c, b: &Matrix4c) -> Matrix4c {
    a * b - b * a
}

pub fn anticommutator(a: &Matrix4c, b: &Matrix4c) -> Matrix4c {
    a * b + b * a
}

/// Largest entry modulus.
pub fn max_abs(m: &Matrix4c) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// max |M - M^dagger|
pub fn hermiticity_defect(m: &Matrix4c) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_defect(m: &Matrix4c) -> f64 {
    max_abs(&(m.adjoint() * m - Matrix4c::identity()))
}

/// alpha . v for a real 3-vector.
pub fn alpha_dot(v: &Vector3<f64>) -> Matrix4c {
    let d = dirac_matrices();
    d.alpha[0] * Complex64::from(v[0]) + d.alpha[1] * Complex64::from(v[1]) + d.alpha[2] * Complex64::from(v[2])
}

/// Sigma . v for a real 3-vector.
pub fn sigma_dot(v: &Vector3<f64>) -> Matrix4c {
    let d = dirac_matrices();
    d.sigma[0] * Complex64::from(v[0]) + d.sigma[1] * Complex64::from(v[1]) + d.sigma[2] * Complex64::from(v[2])
}

/// sigma . v with 2x2 Pauli matrices.
pub fn pauli_dot(v: &Vector3<f64>) -> Matrix2c {
    let s = pauli_matrices();
    s[0] * Complex64::from(v[0]) + s[1] * Complex64::from(v[1]) + s[2] * Complex64::from(v[2])
}

/// Free Dirac Hamiltonian c alpha.p + m0 c^2 beta at momentum `p`.
pub fn h0_kernel(p: &Momentum3, c: f64) -> Matrix4c {
    alpha_dot(&p.0) * Complex64::from(c) + dirac_matrices().beta * Complex64::from(c * c)
}

/// p0 = sqrt(m0^2 c^2 + p^2).
pub fn p0_value(p: &Momentum3) -> f64 {
    p0_with(p, SPEED_OF_LIGHT)
}

pub fn p0_with(p: &Momentum3, c: f64) -> f64 {
    (c * c + p.norm_squared()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnergySign {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinState {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWaveLabel {
    pub energy_sign: EnergySign,
    pub p: Momentum3,
    pub spin: SpinState,
}

impl PlaneWaveLabel {
    pub fn new(energy_sign: EnergySign, p: Momentum3, spin: SpinState) -> Self {
        PlaneWaveLabel { energy_sign, p, spin }
    }

    /// The four labels sharing momentum `p`, in FW basis order.
    pub fn all_at(p: Momentum3) -> [PlaneWaveLabel; 4] {
        use EnergySign::*;
        use SpinState::*;
        [
            PlaneWaveLabel::new(Positive, p, Up),
            PlaneWaveLabel::new(Positive, p, Down),
            PlaneWaveLabel::new(Negative, p, Up),
            PlaneWaveLabel::new(Negative, p, Down),
        ]
    }

    /// Slot of the unit spinor in the FW representation.
    pub fn slot(&self) -> usize {
        let e = match self.energy_sign {
            EnergySign::Positive => 0,
            EnergySign::Negative => 2,
        };
        let s = match self.spin {
            SpinState::Up => 0,
            SpinState::Down => 1,
        };
        e + s
    }
}

/// A spinor amplitude carrying the phase exp(i p.r).
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWave {
    pub p: Momentum3,
    pub amplitude: Spinor4,
}

impl PlaneWave {
    pub fn eval(&self, r: &Vector3<f64>) -> Spinor4 {
        let phase = Complex64::from_polar(1.0, self.p.0.dot(r));
        self.amplitude * phase
    }
}

/// Simultaneous eigenstate of H0, p and the FW spin, in FW representation.
pub fn fw_basis_state(label: &PlaneWaveLabel) -> PlaneWave {
    let mut amplitude = Spinor4::zeros();
    amplitude[label.slot()] = ONE;
    PlaneWave { p: label.p, amplitude }
}

/// The same eigenstate in the standard representation, T_FW(p) applied to the
/// FW basis spinor.
pub fn standard_rep_eigenstate(label: &PlaneWaveLabel) -> PlaneWave {
    let fw = fw_basis_state(label);
    PlaneWave {
        p: label.p,
        amplitude: fw_transform(&label.p) * fw.amplitude,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_momentum(rng: &mut ChaCha8Rng, scale: f64) -> Momentum3 {
        Momentum3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    #[test]
    fn clifford_algebra() {
        let d = dirac_matrices();
        let id = Matrix4c::identity();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { id * Complex64::from(2.0) } else { Matrix4c::zeros() };
                assert_eq!(anticommutator(&d.alpha[i], &d.alpha[k]), expect);
            }
            assert_eq!(anticommutator(&d.alpha[i], &d.beta), Matrix4c::zeros());
            assert_eq!(d.alpha[i] * d.alpha[i], id);
        }
        assert_eq!(d.beta * d.beta, id);
        assert_eq!(d.alpha[0] * d.alpha[1] + d.alpha[1] * d.alpha[0], Matrix4c::zeros());
    }

    #[test]
    fn sigma3_is_diagonal() {
        let s3 = dirac_matrices().sigma[2];
        let expect = Matrix4c::from_diagonal(&Spinor4::new(ONE, -ONE, ONE, -ONE));
        assert_eq!(s3, expect);
    }

    #[test]
    fn h0_rest_frame() {
        let c = SPEED_OF_LIGHT;
        let h = h0_kernel(&Momentum3::zero(), c);
        assert_eq!(h, dirac_matrices().beta * Complex64::from(c * c));
    }

    #[test]
    fn h0_eigenvalues_at_unit_momentum() {
        let c = 137.035999;
        let h = h0_kernel(&Momentum3::new(1.0, 0.0, 0.0), c);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let e = c * (c * c + 1.0).sqrt();
        let expect = [-e, -e, e, e];
        for (a, b) in ev.iter().zip(expect) {
            assert!(((a - b) / b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn h0_squared_is_scalar() {
        let c = SPEED_OF_LIGHT;
        let p = Momentum3::new(12.0, -40.0, 300.0);
        let h = h0_kernel(&p, c);
        let scalar = c * c * (c * c + p.norm_squared());
        let diff = h * h - Matrix4c::identity() * Complex64::from(scalar);
        assert!(max_abs(&diff) / scalar < 1e-15);
    }

    #[test]
    fn h0_hermitian_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = random_momentum(&mut rng, 500.0);
            assert!(hermiticity_defect(&h0_kernel(&p, SPEED_OF_LIGHT)) < 1e-13);
        }
    }

    #[test]
    fn p0_values() {
        assert_eq!(p0_value(&Momentum3::zero()), SPEED_OF_LIGHT);
        let p0 = p0_with(&Momentum3::new(3.0, 4.0, 0.0), 137.035999);
        assert!((p0 - (137.035999f64.powi(2) + 25.0).sqrt()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(p0_value(&random_momentum(&mut rng, 1e3)) >= SPEED_OF_LIGHT);
        }
    }

    #[test]
    fn fw_basis_slots() {
        let p = Momentum3::new(0.3, 0.0, 1.0);
        let up = fw_basis_state(&PlaneWaveLabel::new(EnergySign::Positive, p, SpinState::Up));
        assert_eq!(up.amplitude, Spinor4::new(ONE, ZERO, ZERO, ZERO));
        let down = fw_basis_state(&PlaneWaveLabel::new(EnergySign::Negative, p, SpinState::Down));
        assert_eq!(down.amplitude, Spinor4::new(ZERO, ZERO, ZERO, ONE));
        let r = Vector3::new(1.0, 2.0, 3.0);
        let phase = Complex64::from_polar(1.0, p.0.dot(&r));
        assert!((up.eval(&r)[0] - phase).norm() < 1e-15);
        let labels = PlaneWaveLabel::all_at(p);
        for (i, a) in labels.iter().enumerate() {
            for (j, b) in labels.iter().enumerate() {
                let ip = fw_basis_state(a).amplitude.dotc(&fw_basis_state(b).amplitude);
                assert_eq!(ip, if i == j { ONE } else { ZERO });
            }
        }
    }

    #[test]
    fn standard_rep_rest_frame() {
        let label = PlaneWaveLabel::new(EnergySign::Positive, Momentum3::zero(), SpinState::Up);
        let u = standard_rep_eigenstate(&label);
        assert_eq!(u.amplitude, Spinor4::new(ONE, ZERO, ZERO, ZERO));
    }

    #[test]
    fn standard_rep_eigenstates_diagonalize_h0() {
        let c = SPEED_OF_LIGHT;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = random_momentum(&mut rng, 400.0);
            let h = h0_kernel(&p, c);
            let labels = PlaneWaveLabel::all_at(p);
            let states: Vec<Spinor4> = labels.iter().map(|l| standard_rep_eigenstate(l).amplitude).collect();
            for (l, u) in labels.iter().zip(&states) {
                let sign = match l.energy_sign {
                    EnergySign::Positive => 1.0,
                    EnergySign::Negative => -1.0,
                };
                let e = sign * c * p0_value(&p);
                let residual = (h * u - u * Complex64::from(e)).norm() / e.abs();
                assert!(residual < 1e-12, "residual {residual}");
                assert!((u.norm() - 1.0).abs() < 1e-13);
            }
            for i in 0..4 {
                for j in 0..4 {
                    let g = states[i].dotc(&states[j]);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - Complex64::from(expect)).norm() < 1e-12);
                }
            }
        }
    }
}
