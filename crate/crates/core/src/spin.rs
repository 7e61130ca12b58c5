//! The seven candidate relativistic spin operators as momentum-space
//! kernels, the FW and Pryce unitary transforms, and a numerical checker
//! for their algebraic properties.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Schur, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac::{
    alpha_dot, commutator, dirac_matrices, from_blocks, h0_kernel, hermiticity_defect, max_abs,
    p0_with, pauli_dot, sigma_dot, unitarity_defect, Axis, Matrix2c, Matrix4c, Momentum3,
};
use crate::error::{Error, Result};
use crate::units::SPEED_OF_LIGHT;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on every property violation.
pub const PROPERTY_TOLERANCE: f64 = 1e-10;
/// Eigenvalues count as +-1/2 when all lie this close to one of them.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpinOperatorKind {
    Pauli,
    FoldyWouthuysen,
    Czachor,
    Frenkel,
    Chakrabarti,
    Pryce,
    FradkinGood,
}

impl SpinOperatorKind {
    pub const ALL: [SpinOperatorKind; 7] = [
        SpinOperatorKind::Pauli,
        SpinOperatorKind::FoldyWouthuysen,
        SpinOperatorKind::Czachor,
        SpinOperatorKind::Frenkel,
        SpinOperatorKind::Chakrabarti,
        SpinOperatorKind::Pryce,
        SpinOperatorKind::FradkinGood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpinOperatorKind::Pauli => "pauli",
            SpinOperatorKind::FoldyWouthuysen => "foldy-wouthuysen",
            SpinOperatorKind::Czachor => "czachor",
            SpinOperatorKind::Frenkel => "frenkel",
            SpinOperatorKind::Chakrabarti => "chakrabarti",
            SpinOperatorKind::Pryce => "pryce",
            SpinOperatorKind::FradkinGood => "fradkin-good",
        }
    }

    /// Kinds whose definition contains p/|p|.
    pub fn singular_at_rest(self) -> bool {
        matches!(self, SpinOperatorKind::Pryce | SpinOperatorKind::FradkinGood)
    }

    /// The literature verdicts for (hermitian, vector, commutes with H0,
    /// su(2) algebra, eigenvalues +-1/2).
    pub fn expected_properties(self) -> [bool; 5] {
        match self {
            SpinOperatorKind::Pauli => [true, true, false, true, true],
            SpinOperatorKind::FoldyWouthuysen => [true, true, true, true, true],
            SpinOperatorKind::Czachor => [true, true, true, false, false],
            SpinOperatorKind::Frenkel => [true, true, true, false, false],
            SpinOperatorKind::Chakrabarti => [false, true, false, true, true],
            SpinOperatorKind::Pryce => [true, true, true, true, true],
            SpinOperatorKind::FradkinGood => [true, true, true, false, true],
        }
    }
}

impl fmt::Display for SpinOperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpinOperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        SpinOperatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "fw" && *k == SpinOperatorKind::FoldyWouthuysen)
                || (s == "fg" && *k == SpinOperatorKind::FradkinGood))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown spin operator '{s}'")))
    }
}

/// How a kernel with a p/|p| factor is evaluated at p = 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroMode {
    /// Report `DegenerateMomentum`.
    #[default]
    Reject,
    /// Take the limit p -> 0 along +z for the direction-dependent factor.
    LimitAlongZ,
}

/// Unit vector along p, or the zero-mode substitute.
fn direction(p: &Momentum3, zero: ZeroMode) -> Result<Vector3<f64>> {
    if p.is_zero() {
        match zero {
            ZeroMode::Reject => Err(Error::DegenerateMomentum),
            ZeroMode::LimitAlongZ => Ok(Vector3::z()),
        }
    } else {
        Ok(p.0 / p.norm())
    }
}

fn scale(m: &Matrix4c, s: f64) -> Matrix4c {
    m * Complex64::from(s)
}

/// (p x alpha)_i for all i.
fn p_cross_alpha(p: &Vector3<f64>) -> [Matrix4c; 3] {
    let a = &dirac_matrices().alpha;
    [
        scale(&a[2], p[1]) - scale(&a[1], p[2]),
        scale(&a[0], p[2]) - scale(&a[2], p[0]),
        scale(&a[1], p[0]) - scale(&a[0], p[1]),
    ]
}

/// [p x (Sigma x p)]_i = Sigma_i p^2 - p_i (Sigma . p)
fn p_cross_sigma_cross_p(p: &Vector3<f64>) -> [Matrix4c; 3] {
    let s = &dirac_matrices().sigma;
    let sdp = sigma_dot(p);
    let p2 = p.norm_squared();
    [0, 1, 2].map(|i| scale(&s[i], p2) - scale(&sdp, p[i]))
}

/// All three components of a spin operator at momentum `p`.
pub fn spin_vector(kind: SpinOperatorKind, p: &Momentum3, zero: ZeroMode) -> Result<[Matrix4c; 3]> {
    spin_vector_with(kind, p, zero, SPEED_OF_LIGHT)
}

/// As [`spin_vector`] with an explicit m0 c (m0 = 1).
pub fn spin_vector_with(kind: SpinOperatorKind, p: &Momentum3, zero: ZeroMode, mc: f64) -> Result<[Matrix4c; 3]> {
    let d = dirac_matrices();
    let half_sigma = d.sigma.map(|s| scale(&s, 0.5));
    let pv = &p.0;
    let p0 = p0_with(p, mc);
    let ib = d.beta * I;
    Ok(match kind {
        SpinOperatorKind::Pauli => half_sigma,
        SpinOperatorKind::FoldyWouthuysen => {
            let pxa = p_cross_alpha(pv);
            let psp = p_cross_sigma_cross_p(pv);
            let c1 = 1.0 / (2.0 * p0);
            let c2 = 1.0 / (2.0 * p0 * (p0 + mc));
            [0, 1, 2].map(|i| half_sigma[i] + scale(&(ib * pxa[i]), c1) - scale(&psp[i], c2))
        }
        SpinOperatorKind::Czachor => {
            let pxa = p_cross_alpha(pv);
            let sdp = sigma_dot(pv);
            let q = 2.0 * p0 * p0;
            [0, 1, 2].map(|i| {
                scale(&d.sigma[i], mc * mc / q) + scale(&(ib * pxa[i]), mc / q) + scale(&sdp, pv[i] / q)
            })
        }
        SpinOperatorKind::Frenkel => {
            let pxa = p_cross_alpha(pv);
            [0, 1, 2].map(|i| half_sigma[i] + scale(&(ib * pxa[i]), 1.0 / (2.0 * mc)))
        }
        SpinOperatorKind::Chakrabarti => {
            // alpha x p = -(p x alpha)
            let pxa = p_cross_alpha(pv);
            let psp = p_cross_sigma_cross_p(pv);
            let c2 = 1.0 / (2.0 * mc * (mc + p0));
            [0, 1, 2].map(|i| half_sigma[i] - pxa[i] * (I / (2.0 * mc)) + scale(&psp[i], c2))
        }
        SpinOperatorKind::Pryce => {
            let n = direction(p, zero)?;
            let sdn = sigma_dot(&n);
            let proj = sdn * (d.identity - d.beta);
            [0, 1, 2].map(|i| scale(&(d.beta * d.sigma[i]), 0.5) + scale(&proj, 0.5 * n[i]))
        }
        SpinOperatorKind::FradkinGood => {
            let n = direction(p, zero)?;
            let sdn = sigma_dot(&n);
            let h_over = scale(&h0_kernel(p, mc), 1.0 / (mc * p0));
            let proj = sdn * (h_over - d.beta);
            [0, 1, 2].map(|i| scale(&(d.beta * d.sigma[i]), 0.5) + scale(&proj, 0.5 * n[i]))
        }
    })
}

/// One component of a spin operator, with p = 0 rejected for the kinds that
/// contain p/|p|.
pub fn spin_kernel(kind: SpinOperatorKind, axis: Axis, p: &Momentum3) -> Result<Matrix4c> {
    if kind.singular_at_rest() && p.is_zero() {
        return Err(Error::DegenerateMomentum);
    }
    Ok(spin_vector(kind, p, ZeroMode::Reject)?[axis.index()])
}

/// Foldy-Wouthuysen transform (p0 + m0c - beta alpha.p) / sqrt(2 p0 (p0 + m0c)).
pub fn fw_transform(p: &Momentum3) -> Matrix4c {
    fw_transform_with(p, SPEED_OF_LIGHT)
}

pub fn fw_transform_with(p: &Momentum3, mc: f64) -> Matrix4c {
    let d = dirac_matrices();
    let p0 = p0_with(p, mc);
    let num = scale(&d.identity, p0 + mc) - d.beta * alpha_dot(&p.0);
    scale(&num, 1.0 / (2.0 * p0 * (p0 + mc)).sqrt())
}

/// Pryce transform diag(1, i sigma.p/|p|).
pub fn pryce_transform(p: &Momentum3) -> Result<Matrix4c> {
    pryce_transform_with(p, ZeroMode::Reject)
}

pub fn pryce_transform_with(p: &Momentum3, zero: ZeroMode) -> Result<Matrix4c> {
    let n = direction(p, zero)?;
    let z = Matrix2c::zeros();
    Ok(from_blocks(&Matrix2c::identity(), &z, &z, &(pauli_dot(&n) * I)))
}

/// T_FW^-1 S T_FW.
pub fn fw_representation(kind: SpinOperatorKind, axis: Axis, p: &Momentum3) -> Result<Matrix4c> {
    let s = spin_kernel(kind, axis, p)?;
    let t = fw_transform(p);
    Ok(t.adjoint() * s * t)
}

/// The Newton-Wigner closed form of the FW spin operator.
pub fn newton_wigner_form(axis: Axis, p: &Momentum3) -> Matrix4c {
    let mc = SPEED_OF_LIGHT;
    let d = dirac_matrices();
    let i = axis.index();
    let p0 = p0_with(p, mc);
    let pv = &p.0;
    let h = h0_kernel(p, mc);
    let pxa = p_cross_alpha(pv);
    scale(&d.sigma[i], p0 / (2.0 * mc)) - scale(&sigma_dot(pv), pv[i] / (2.0 * mc * (mc + p0)))
        - pxa[i] * h * (I / (2.0 * mc * mc * p0))
}

/// Outcome of [`check_properties`] for one operator kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub kind: SpinOperatorKind,
    pub samples: usize,
    pub hermitian: bool,
    pub vector_under_rotations: bool,
    pub commutes_with_h0: bool,
    pub su2_algebra: bool,
    pub eigenvalues_half: bool,
    pub max_violation: Violations,
}

/// Largest observed violation of each property (dimensionless, normalized
/// by the operator scale where noted in [`check_properties`]).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub hermitian: f64,
    pub vector_under_rotations: f64,
    pub commutes_with_h0: f64,
    pub su2_algebra: f64,
    pub eigenvalues_half: f64,
}

impl Violations {
    fn max(self, o: Violations) -> Violations {
        Violations {
            hermitian: self.hermitian.max(o.hermitian),
            vector_under_rotations: self.vector_under_rotations.max(o.vector_under_rotations),
            commutes_with_h0: self.commutes_with_h0.max(o.commutes_with_h0),
            su2_algebra: self.su2_algebra.max(o.su2_algebra),
            eigenvalues_half: self.eigenvalues_half.max(o.eigenvalues_half),
        }
    }
}

impl PropertyReport {
    pub fn verdicts(&self) -> [bool; 5] {
        [
            self.hermitian,
            self.vector_under_rotations,
            self.commutes_with_h0,
            self.su2_algebra,
            self.eigenvalues_half,
        ]
    }

    pub fn matches_literature(&self) -> bool {
        self.verdicts() == self.kind.expected_properties()
    }
}

pub const PROPERTY_NAMES: [&str; 5] = [
    "hermitian",
    "vector_under_rotations",
    "commutes_with_h0",
    "su2_algebra",
    "eigenvalues_half",
];

/// A random test point: momentum and a rotation.
#[derive(Clone, Copy, Debug)]
pub struct SamplePoint {
    pub p: Momentum3,
    pub axis: Vector3<f64>,
    pub angle: f64,
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let cos_t: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let sin_t = (1.0 - cos_t * cos_t).sqrt();
    Vector3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
}

/// Sample `index` of the deterministic stream for `seed`: |p| log-uniform in
/// [1e-3, 1e3] m0c, uniform direction, uniform rotation axis and angle.
pub fn sample_point(seed: u64, index: u64) -> SamplePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let decades: f64 = rng.gen_range(-3.0..=3.0);
    let magnitude = SPEED_OF_LIGHT * 10f64.powf(decades);
    let p = Momentum3(unit_vector(&mut rng) * magnitude);
    SamplePoint {
        p,
        axis: unit_vector(&mut rng),
        angle: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    }
}

/// Active rotation matrix about unit `axis` by `angle`.
pub fn rotation_matrix(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle).into_inner()
}

/// Spinor representation exp(-i angle n.Sigma/2) of the same rotation.
pub fn spinor_rotation(axis: &Vector3<f64>, angle: f64) -> Matrix4c {
    let n = axis.normalize();
    scale(&dirac_matrices().identity, (angle / 2.0).cos()) - sigma_dot(&n) * (I * (angle / 2.0).sin())
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// max distance of any eigenvalue from the nearer of +-1/2.
pub fn half_spectrum_defect(m: &Matrix4c) -> f64 {
    let eig: Vec<Complex64> = if hermiticity_defect(m) <= 1e-12 * max_abs(m).max(1.0) {
        let h = (m + m.adjoint()) * Complex64::from(0.5);
        h.symmetric_eigenvalues().iter().map(|&x| Complex64::from(x)).collect()
    } else {
        match Schur::new(*m).eigenvalues() {
            Some(ev) => ev.iter().copied().collect(),
            None => return f64::INFINITY,
        }
    };
    eig.iter()
        .map(|z| (z - 0.5).norm().min((z + 0.5).norm()))
        .fold(0.0, f64::max)
}

/// Violations of the five properties at one sample point. Hermiticity and
/// rotation defects are divided by max(1, |S|), the su(2) defect by
/// max(1, |S|^2) and the H0 commutator by |H0| max(1, |S|); the eigenvalue
/// defect is absolute.
pub fn violations_at(kind: SpinOperatorKind, point: &SamplePoint) -> Result<Violations> {
    let mc = SPEED_OF_LIGHT;
    let s = spin_vector(kind, &point.p, ZeroMode::Reject)?;
    let s_scale = s.iter().map(max_abs).fold(1.0, f64::max);
    let h0 = h0_kernel(&point.p, mc);
    let h_scale = max_abs(&h0);

    let hermitian = s.iter().map(hermiticity_defect).fold(0.0, f64::max) / s_scale;
    let commutes = s.iter().map(|si| max_abs(&commutator(&h0, si))).fold(0.0, f64::max) / (h_scale * s_scale);

    let mut su2: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut rhs = Matrix4c::zeros();
            for k in 0..3 {
                let e = levi_civita(i, j, k);
                if e != 0.0 {
                    rhs += s[k] * (I * e);
                }
            }
            su2 = su2.max(max_abs(&(commutator(&s[i], &s[j]) - rhs)));
        }
    }
    su2 /= s_scale * s_scale;

    let rot = rotation_matrix(&point.axis, point.angle);
    let d = spinor_rotation(&point.axis, point.angle);
    let rotated = spin_vector(kind, &Momentum3(rot * point.p.0), ZeroMode::Reject)?;
    let mut vector: f64 = 0.0;
    for j in 0..3 {
        let lhs = d.adjoint() * rotated[j] * d;
        let mut rhs = Matrix4c::zeros();
        for k in 0..3 {
            rhs += scale(&s[k], rot[(j, k)]);
        }
        vector = vector.max(max_abs(&(lhs - rhs)));
    }
    vector /= s_scale;

    let eigen = s.iter().map(half_spectrum_defect).fold(0.0, f64::max);

    Ok(Violations {
        hermitian,
        vector_under_rotations: vector,
        commutes_with_h0: commutes,
        su2_algebra: su2,
        eigenvalues_half: eigen,
    })
}

/// Test the five algebraic properties of `kind` on `samples` random momenta.
pub fn check_properties(kind: SpinOperatorKind, samples: usize, seed: u64) -> Result<PropertyReport> {
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be >= 1".into()));
    }
    let worst = (0..samples as u64)
        .into_par_iter()
        .map(|i| violations_at(kind, &sample_point(seed, i)))
        .try_reduce(Violations::default, |a, b| Ok(a.max(b)))?;
    Ok(PropertyReport {
        kind,
        samples,
        hermitian: worst.hermitian < PROPERTY_TOLERANCE,
        vector_under_rotations: worst.vector_under_rotations < PROPERTY_TOLERANCE,
        commutes_with_h0: worst.commutes_with_h0 < PROPERTY_TOLERANCE,
        su2_algebra: worst.su2_algebra < PROPERTY_TOLERANCE,
        eigenvalues_half: worst.eigenvalues_half < EIGENVALUE_TOLERANCE,
        max_violation: worst,
    })
}

/// 2x2 matrix of <u_a|S_z|u_b> over the two positive-energy eigenstates at p.
pub fn positive_energy_block(kind: SpinOperatorKind, axis: Axis, p: &Momentum3) -> Result<Matrix2c> {
    let s = spin_kernel(kind, axis, p)?;
    let t = fw_transform(p);
    Ok((t.adjoint() * s * t).fixed_view::<2, 2>(0, 0).into_owned())
}

/// Largest pairwise deviation of the positive-energy blocks of `kinds`.
pub fn positive_energy_equivalence(kinds: &[SpinOperatorKind], p: &Momentum3) -> Result<f64> {
    if p.is_zero() {
        return Err(Error::DegenerateMomentum);
    }
    let blocks = kinds
        .iter()
        .map(|&k| positive_energy_block(k, Axis::Z, p))
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for (i, a) in blocks.iter().enumerate() {
        for b in &blocks[i + 1..] {
            worst = worst.max((a - b).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    Ok(worst)
}

/// Unitarity defect of both transforms at `p`.
pub fn transform_unitarity(p: &Momentum3) -> Result<(f64, f64)> {
    Ok((unitarity_defect(&fw_transform(p)), unitarity_defect(&pryce_transform(p)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::block;

    const ORTHO: [SpinOperatorKind; 4] = [
        SpinOperatorKind::FoldyWouthuysen,
        SpinOperatorKind::Chakrabarti,
        SpinOperatorKind::Pryce,
        SpinOperatorKind::FradkinGood,
    ];

    fn half_pauli(i: usize) -> Matrix2c {
        dirac_matrices().sigma2x2[i] * Complex64::from(0.5)
    }

    fn max2(m: &Matrix2c) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn pauli_kernel_is_half_sigma() {
        let p = Momentum3::new(100.0, -3.0, 7.0);
        let s = spin_kernel(SpinOperatorKind::Pauli, Axis::Z, &p).unwrap();
        assert_eq!(s, scale(&dirac_matrices().sigma[2], 0.5));
    }

    #[test]
    fn fw_kernel_at_rest() {
        let s = spin_kernel(SpinOperatorKind::FoldyWouthuysen, Axis::Z, &Momentum3::zero()).unwrap();
        assert!(max_abs(&(s - scale(&dirac_matrices().sigma[2], 0.5))) < 1e-15);
    }

    #[test]
    fn czachor_spectrum_is_not_half() {
        // transverse momentum; for p along z the z component is exactly Sigma_3/2
        let mc = SPEED_OF_LIGHT;
        let p = Momentum3::new(2.0 * mc, 0.0, 0.0);
        let s = spin_kernel(SpinOperatorKind::Czachor, Axis::Z, &p).unwrap();
        let expect = mc / (2.0 * p0_with(&p, mc));
        for x in s.symmetric_eigenvalues().iter() {
            assert!((x.abs() - expect).abs() < 1e-14, "{x}");
        }
        let along = spin_kernel(SpinOperatorKind::Czachor, Axis::Z, &Momentum3::new(0.0, 0.0, 2.0 * mc)).unwrap();
        assert!(half_spectrum_defect(&along) < 1e-14);
    }

    #[test]
    fn chakrabarti_is_not_hermitian() {
        let p = Momentum3::new(SPEED_OF_LIGHT, 0.0, 0.0);
        let s = spin_kernel(SpinOperatorKind::Chakrabarti, Axis::Z, &p).unwrap();
        assert!(hermiticity_defect(&s) > 0.1);
    }

    #[test]
    fn singular_kinds_reject_zero_momentum() {
        for kind in [SpinOperatorKind::Pryce, SpinOperatorKind::FradkinGood] {
            assert!(matches!(
                spin_kernel(kind, Axis::X, &Momentum3::zero()),
                Err(Error::DegenerateMomentum)
            ));
        }
        assert!(matches!(pryce_transform(&Momentum3::zero()), Err(Error::DegenerateMomentum)));
    }

    #[test]
    fn zero_mode_limit_along_z() {
        let d = dirac_matrices();
        let s = spin_vector(SpinOperatorKind::FradkinGood, &Momentum3::zero(), ZeroMode::LimitAlongZ).unwrap();
        assert!(max_abs(&(s[2] - scale(&(d.beta * d.sigma[2]), 0.5))) < 1e-15);
        let t = pryce_transform_with(&Momentum3::zero(), ZeroMode::LimitAlongZ).unwrap();
        let expect = pryce_transform(&Momentum3::new(0.0, 0.0, 1e-9)).unwrap();
        assert!(max_abs(&(t - expect)) < 1e-15);
    }

    #[test]
    fn fw_transform_at_rest_is_identity() {
        assert_eq!(fw_transform(&Momentum3::zero()), Matrix4c::identity());
    }

    #[test]
    fn fw_transform_diagonalizes_h0() {
        let c = SPEED_OF_LIGHT;
        for i in 0..50 {
            let p = sample_point(11, i).p;
            let t = fw_transform(&p);
            let h = t.adjoint() * h0_kernel(&p, c) * t;
            let expect = scale(&dirac_matrices().beta, c * p0_with(&p, c));
            assert!(max_abs(&(h - expect)) / max_abs(&expect) < 1e-13);
        }
    }

    #[test]
    fn pryce_transform_along_z() {
        let t = pryce_transform(&Momentum3::new(0.0, 0.0, 3.0)).unwrap();
        let s3 = dirac_matrices().sigma2x2[2];
        let z = Matrix2c::zeros();
        assert_eq!(t, from_blocks(&Matrix2c::identity(), &z, &z, &(s3 * I)));
    }

    #[test]
    fn transforms_are_unitary() {
        for i in 0..100 {
            let (fw, pr) = transform_unitarity(&sample_point(5, i).p).unwrap();
            assert!(fw < 1e-12 && pr < 1e-12, "{fw} {pr}");
        }
    }

    #[test]
    fn fw_representation_of_fw_spin() {
        for i in 0..100 {
            let p = sample_point(2, i).p;
            for axis in Axis::ALL {
                let m = fw_representation(SpinOperatorKind::FoldyWouthuysen, axis, &p).unwrap();
                let z = Matrix2c::zeros();
                let h = half_pauli(axis.index());
                assert!(max_abs(&(m - from_blocks(&h, &z, &z, &h))) < 1e-12);
            }
        }
    }

    #[test]
    fn fw_representation_of_fradkin_good() {
        for i in 0..50 {
            let p = sample_point(9, i).p;
            let m = fw_representation(SpinOperatorKind::FradkinGood, Axis::Z, &p).unwrap();
            let z = Matrix2c::zeros();
            let h = half_pauli(2);
            assert!(max_abs(&(m - from_blocks(&h, &z, &z, &(-h)))) < 1e-12);
        }
    }

    #[test]
    fn fw_representation_of_chakrabarti() {
        let mc = SPEED_OF_LIGHT;
        let s = dirac_matrices().sigma2x2;
        for i in 0..50 {
            let p = sample_point(4, i).p;
            let pv = p.0;
            let m = fw_representation(SpinOperatorKind::Chakrabarti, Axis::Z, &p).unwrap();
            // i (sigma x p)_z / (m0 c)
            let cross = (s[0] * Complex64::from(pv[1]) - s[1] * Complex64::from(pv[0])) * (I / mc);
            let scale_p = 1.0 + pv.norm() / mc;
            assert!(max2(&(block(&m, 0, 1) - cross)) / scale_p < 1e-12);
            assert!(max2(&(block(&m, 0, 0) - half_pauli(2))) / scale_p < 1e-12);
            assert!(max2(&block(&m, 1, 0)) / scale_p < 1e-12);
        }
    }

    #[test]
    fn fw_representation_of_pryce() {
        let s = dirac_matrices().sigma2x2;
        for i in 0..50 {
            let p = sample_point(8, i).p;
            let n = p.0 / p.norm();
            let m = fw_representation(SpinOperatorKind::Pryce, Axis::Z, &p).unwrap();
            let lower = -half_pauli(2) + pauli_dot(&n) * Complex64::from(n[2]);
            assert!(max2(&(block(&m, 0, 0) - half_pauli(2))) < 1e-12);
            assert!(max2(&(block(&m, 1, 1) - lower)) < 1e-12);
            assert!(max2(&block(&m, 0, 1)) < 1e-12);
            let _ = s;
        }
    }

    #[test]
    fn pryce_transform_maps_pauli_onto_pryce_upper_block() {
        for i in 0..50 {
            let p = sample_point(21, i).p;
            let t = pryce_transform(&p).unwrap();
            let m = t.adjoint() * spin_kernel(SpinOperatorKind::Pryce, Axis::Z, &p).unwrap() * t;
            assert!(max2(&(block(&m, 0, 0) - half_pauli(2))) < 1e-12);
        }
    }

    #[test]
    fn newton_wigner_equals_fw() {
        assert!(max_abs(&(newton_wigner_form(Axis::Z, &Momentum3::zero()) - scale(&dirac_matrices().sigma[2], 0.5))) < 1e-15);
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            let p = sample_point(17, i).p;
            for axis in Axis::ALL {
                let fw = spin_kernel(SpinOperatorKind::FoldyWouthuysen, axis, &p).unwrap();
                worst = worst.max(max_abs(&(newton_wigner_form(axis, &p) - fw)));
            }
        }
        assert!(worst < 1e-12, "{worst}");
        let p = Momentum3::new(0.0, 0.0, SPEED_OF_LIGHT);
        let fw = spin_kernel(SpinOperatorKind::FoldyWouthuysen, Axis::X, &p).unwrap();
        assert!(max_abs(&(newton_wigner_form(Axis::X, &p) - fw)) < 1e-12);
    }

    #[test]
    fn positive_energy_equivalence_of_orthogonal_kinds() {
        for i in 0..100 {
            let p = sample_point(23, i).p;
            let dev = positive_energy_equivalence(&ORTHO, &p).unwrap();
            assert!(dev < 1e-12, "{dev} at {:?}", p);
        }
    }

    #[test]
    fn czachor_breaks_positive_energy_equivalence() {
        let p = Momentum3::new(SPEED_OF_LIGHT / 3f64.sqrt(), SPEED_OF_LIGHT / 3f64.sqrt(), SPEED_OF_LIGHT / 3f64.sqrt());
        let mut kinds = ORTHO.to_vec();
        kinds.push(SpinOperatorKind::Czachor);
        assert!(positive_energy_equivalence(&kinds, &p).unwrap() > 1e-3);
    }

    #[test]
    fn all_kinds_agree_near_rest() {
        let p = Momentum3(Vector3::new(0.0, 0.6, 0.8) * (1e-6 * SPEED_OF_LIGHT));
        assert!(positive_energy_equivalence(&SpinOperatorKind::ALL, &p).unwrap() < 1e-8);
    }

    #[test]
    fn superpositions_agree_for_orthogonal_kinds() {
        for i in 0..20 {
            let pt = sample_point(31, i);
            let t = fw_transform(&pt.p);
            let a = Complex64::new(0.6, 0.1);
            let b = Complex64::new(-0.2, 0.77);
            let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let u = (t.column(0) * a + t.column(1) * b) / Complex64::from(norm);
            let values: Vec<Complex64> = ORTHO
                .iter()
                .map(|&k| u.dotc(&(spin_kernel(k, Axis::Z, &pt.p).unwrap() * u)))
                .collect();
            for v in &values {
                assert!((v - values[0]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn property_table_rows() {
        for kind in SpinOperatorKind::ALL {
            let report = check_properties(kind, 100, 0x5eed).unwrap();
            assert_eq!(
                report.verdicts(),
                kind.expected_properties(),
                "{kind}: {:?}",
                report.max_violation
            );
        }
    }

    #[test]
    fn verdicts_stable_under_seed_and_sample_count() {
        for kind in SpinOperatorKind::ALL {
            let a = check_properties(kind, 10, 1).unwrap();
            let b = check_properties(kind, 10, 99).unwrap();
            assert_eq!(a.verdicts(), b.verdicts(), "{kind}");
        }
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(check_properties(SpinOperatorKind::Pauli, 0, 1).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in SpinOperatorKind::ALL {
            assert_eq!(kind.name().parse::<SpinOperatorKind>().unwrap(), kind);
        }
        assert_eq!("FW".parse::<SpinOperatorKind>().unwrap(), SpinOperatorKind::FoldyWouthuysen);
        assert!("dirac".parse::<SpinOperatorKind>().is_err());
    }
}
