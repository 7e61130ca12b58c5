//! Periodic Cartesian grids carrying multi-component complex fields, with
//! spectral application of momentum-dependent matrix kernels.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{SMatrix, SVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dirac::{dirac_matrices, Axis, Matrix4c, Momentum3, Spinor4};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Expectations refuse fields whose norm deviates from 1 by more than this.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    One,
    Three,
}

/// Cell-centred periodic grid. Points sit at -L/2 + (i + 1/2) dx along each
/// used axis, so no point lands on the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dimension: Dimension,
    pub points: [usize; 3],
    pub lengths: [f64; 3],
}

fn check_axis(n: usize, length: f64) -> Result<()> {
    let smooth = n.is_power_of_two() || (n % 3 == 0 && (n / 3).is_power_of_two());
    if n < 16 || !smooth {
        return Err(Error::InvalidGrid(format!("{n} points per axis; need 2^k or 3*2^k, at least 16")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidGrid(format!("box length {length}")));
    }
    Ok(())
}

impl GridSpec {
    pub fn line(points: usize, length: f64) -> Result<Self> {
        check_axis(points, length)?;
        Ok(GridSpec {
            dimension: Dimension::One,
            points: [points, 1, 1],
            lengths: [length, 0.0, 0.0],
        })
    }

    pub fn cube(points: usize, length: f64) -> Result<Self> {
        check_axis(points, length)?;
        Ok(GridSpec {
            dimension: Dimension::Three,
            points: [points; 3],
            lengths: [length; 3],
        })
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if self.points[axis] > 1 {
            self.lengths[axis] / self.points[axis] as f64
        } else {
            1.0
        }
    }

    pub fn cell_volume(&self) -> f64 {
        (0..3).map(|a| self.spacing(a)).product()
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if self.points[axis] > 1 {
            -0.5 * self.lengths[axis] + (i as f64 + 0.5) * self.spacing(axis)
        } else {
            0.0
        }
    }

    /// Position of the first grid point along each axis.
    pub fn offsets(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.coordinate(a, 0))
    }

    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        let n = self.points[axis];
        if n == 1 {
            return 0.0;
        }
        let signed = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        TAU * signed / self.lengths[axis]
    }

    pub fn split_index(&self, flat: usize) -> [usize; 3] {
        let [_, ny, nz] = self.points;
        [flat / (ny * nz), (flat / nz) % ny, flat % nz]
    }

    pub fn position(&self, flat: usize) -> Vector3<f64> {
        let [i, j, k] = self.split_index(flat);
        Vector3::new(self.coordinate(0, i), self.coordinate(1, j), self.coordinate(2, k))
    }

    pub fn momentum(&self, flat: usize) -> Momentum3 {
        let [i, j, k] = self.split_index(flat);
        Momentum3::new(self.wavenumber(0, i), self.wavenumber(1, j), self.wavenumber(2, k))
    }

    pub fn max_momentum(&self) -> f64 {
        (0..3)
            .filter(|&a| self.points[a] > 1)
            .map(|a| std::f64::consts::PI / self.spacing(a))
            .fold(0.0, f64::max)
    }
}

/// Planned FFTs along each axis of a grid, unitary normalization.
#[derive(Clone)]
pub struct FftPlans {
    grid: GridSpec,
    forward: [Option<Arc<dyn Fft<f64>>>; 3],
    inverse: [Option<Arc<dyn Fft<f64>>>; 3],
}

impl FftPlans {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = [0, 1, 2].map(|a| (grid.points[a] > 1).then(|| planner.plan_fft_forward(grid.points[a])));
        let inverse = [0, 1, 2].map(|a| (grid.points[a] > 1).then(|| planner.plan_fft_inverse(grid.points[a])));
        FftPlans { grid: *grid, forward, inverse }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Option<Arc<dyn Fft<f64>>>; 3]) {
        assert_eq!(data.len(), self.grid.len());
        let [nx, ny, nz] = self.grid.points;
        if let Some(fft) = &plans[2] {
            data.par_chunks_mut(nz).for_each(|line| fft.process(line));
        }
        if let Some(fft) = &plans[1] {
            data.par_chunks_mut(ny * nz).for_each(|slab| {
                let mut line = vec![ZERO; ny];
                for k in 0..nz {
                    for j in 0..ny {
                        line[j] = slab[j * nz + k];
                    }
                    fft.process(&mut line);
                    for j in 0..ny {
                        slab[j * nz + k] = line[j];
                    }
                }
            });
        }
        if let Some(fft) = &plans[0] {
            let stride = ny * nz;
            let columns: Vec<Vec<Complex64>> = (0..stride)
                .into_par_iter()
                .map(|c| {
                    let mut line: Vec<Complex64> = (0..nx).map(|i| data[i * stride + c]).collect();
                    fft.process(&mut line);
                    line
                })
                .collect();
            for (c, line) in columns.iter().enumerate() {
                for (i, v) in line.iter().enumerate() {
                    data[i * stride + c] = *v;
                }
            }
        }
        let s = 1.0 / (self.grid.len() as f64).sqrt();
        data.par_iter_mut().for_each(|v| *v *= s);
    }
}

/// A `C`-component complex field sampled on a grid (position space).
#[derive(Clone, Debug, PartialEq)]
pub struct Field<const C: usize> {
    pub grid: GridSpec,
    pub components: [Vec<Complex64>; C],
}

/// Four-component Dirac field.
pub type SpinorField = Field<4>;
/// Two-component Pauli field.
pub type TwoSpinorField = Field<2>;

/// Expansion coefficients of a field on the momentum lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<const C: usize> {
    pub grid: GridSpec,
    pub components: [Vec<Complex64>; C],
}

fn sum_abs2<const C: usize>(components: &[Vec<Complex64>; C]) -> f64 {
    components.iter().map(|c| c.par_iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
}

impl<const C: usize> Field<C> {
    pub fn zeros(grid: &GridSpec) -> Self {
        Field {
            grid: *grid,
            components: std::array::from_fn(|_| vec![ZERO; grid.len()]),
        }
    }

    /// Sample `f` at every grid point.
    pub fn from_fn<F>(grid: &GridSpec, f: F) -> Self
    where
        F: Fn(&Vector3<f64>) -> [Complex64; C] + Sync,
    {
        let values: Vec<[Complex64; C]> = (0..grid.len()).into_par_iter().map(|i| f(&grid.position(i))).collect();
        let components = std::array::from_fn(|c| values.iter().map(|v| v[c]).collect());
        Field { grid: *grid, components }
    }

    pub fn at(&self, flat: usize) -> SVector<Complex64, C> {
        SVector::from_fn(|c, _| self.components[c][flat])
    }

    pub fn set(&mut self, flat: usize, v: &SVector<Complex64, C>) {
        for c in 0..C {
            self.components[c][flat] = v[c];
        }
    }

    /// Integral of |psi|^2 over the box.
    pub fn norm_squared(&self) -> f64 {
        sum_abs2(&self.components) * self.grid.cell_volume()
    }

    /// <self|other>
    pub fn inner(&self, other: &Field<C>) -> Complex64 {
        let s: Complex64 = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.par_iter().zip(b.par_iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>())
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: Complex64) {
        for c in self.components.iter_mut() {
            c.par_iter_mut().for_each(|v| *v *= s);
        }
    }

    /// a*self + b*other
    pub fn combine(&self, a: Complex64, other: &Field<C>, b: Complex64) -> Self {
        let components = std::array::from_fn(|c| {
            self.components[c]
                .par_iter()
                .zip(other.components[c].par_iter())
                .map(|(x, y)| a * x + b * y)
                .collect()
        });
        Field { grid: self.grid, components }
    }

    pub fn normalized(&self) -> Self {
        self.scaled(Complex64::from(1.0 / self.norm_squared().sqrt()))
    }

    /// Multiply pointwise by a real function of position.
    pub fn multiply_by<F>(&self, f: F) -> Self
    where
        F: Fn(&Vector3<f64>) -> f64 + Sync,
    {
        let weights: Vec<f64> = (0..self.grid.len()).into_par_iter().map(|i| f(&self.grid.position(i))).collect();
        let components = std::array::from_fn(|c| {
            self.components[c].par_iter().zip(weights.par_iter()).map(|(v, w)| v * w).collect()
        });
        Field { grid: self.grid, components }
    }

    pub fn to_spectrum(&self, plans: &FftPlans) -> Spectrum<C> {
        let mut components = self.components.clone();
        for c in components.iter_mut() {
            plans.forward(c);
        }
        Spectrum { grid: self.grid, components }
    }

    pub fn spectrum(&self) -> Spectrum<C> {
        self.to_spectrum(&FftPlans::new(&self.grid))
    }

    /// Pointwise probability density.
    pub fn density(&self) -> Vec<f64> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.components.iter().map(|c| c[i].norm_sqr()).sum())
            .collect()
    }
}

impl<const C: usize> Spectrum<C> {
    pub fn to_field(&self, plans: &FftPlans) -> Field<C> {
        let mut components = self.components.clone();
        for c in components.iter_mut() {
            plans.inverse(c);
        }
        Field { grid: self.grid, components }
    }

    pub fn field(&self) -> Field<C> {
        self.to_field(&FftPlans::new(&self.grid))
    }

    /// Momentum-space norm, equal to the position-space norm by Parseval.
    pub fn norm_squared(&self) -> f64 {
        sum_abs2(&self.components) * self.grid.cell_volume()
    }

    pub fn at(&self, flat: usize) -> SVector<Complex64, C> {
        SVector::from_fn(|c, _| self.components[c][flat])
    }

    /// Multiply every mode by the matrix `kernel(p)`.
    pub fn apply<F>(&self, kernel: F) -> Result<Spectrum<C>>
    where
        F: Fn(&Momentum3) -> Result<SMatrix<Complex64, C, C>> + Sync,
    {
        let grid = self.grid;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| Ok(kernel(&grid.momentum(i))? * self.at(i)))
            .collect::<Result<Vec<SVector<Complex64, C>>>>()?;
        let components = std::array::from_fn(|c| values.iter().map(|v| v[c]).collect());
        Ok(Spectrum { grid, components })
    }

    /// sum_p psi(p)^dagger K(p) psi(p) dV
    pub fn kernel_expectation<F>(&self, kernel: F) -> Result<Complex64>
    where
        F: Fn(&Momentum3) -> Result<SMatrix<Complex64, C, C>> + Sync,
    {
        let grid = self.grid;
        let total = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let v = self.at(i);
                Ok::<Complex64, Error>(v.dotc(&(kernel(&grid.momentum(i))? * v)))
            })
            .try_reduce(|| ZERO, |a, b| Ok(a + b))?;
        Ok(total * grid.cell_volume())
    }
}

/// A momentum-space operator: a 4x4 matrix per momentum.
pub trait MomentumKernel: Sync {
    fn eval(&self, p: &Momentum3) -> Result<Matrix4c>;
}

impl<F> MomentumKernel for F
where
    F: Fn(&Momentum3) -> Result<Matrix4c> + Sync,
{
    fn eval(&self, p: &Momentum3) -> Result<Matrix4c> {
        self(p)
    }
}

fn zero_mode_guard(r: Result<Matrix4c>) -> Result<Matrix4c> {
    r.map_err(|e| match e {
        Error::DegenerateMomentum => Error::KernelSingularAtZeroMode,
        other => other,
    })
}

/// FFT, per-mode 4x4 multiply, inverse FFT.
pub fn apply_momentum_kernel(field: &SpinorField, kernel: &dyn MomentumKernel) -> Result<SpinorField> {
    let plans = FftPlans::new(&field.grid);
    apply_momentum_kernel_with(field, kernel, &plans)
}

pub fn apply_momentum_kernel_with(field: &SpinorField, kernel: &dyn MomentumKernel, plans: &FftPlans) -> Result<SpinorField> {
    let spec = field.to_spectrum(plans);
    Ok(spec.apply(|p| zero_mode_guard(kernel.eval(p)))?.to_field(plans))
}

/// Operators that can act on a sampled Dirac field.
pub trait GridOperator: Sync {
    fn apply(&self, field: &SpinorField) -> Result<SpinorField>;
}

/// A constant 4x4 matrix acting pointwise.
pub struct LocalMatrix(pub Matrix4c);

impl GridOperator for LocalMatrix {
    fn apply(&self, field: &SpinorField) -> Result<SpinorField> {
        let mut out = SpinorField::zeros(&field.grid);
        for i in 0..field.grid.len() {
            out.set(i, &(self.0 * field.at(i)));
        }
        Ok(out)
    }
}

/// A momentum kernel used as a grid operator.
pub struct KernelOperator<K>(pub K);

impl<K: MomentumKernel> GridOperator for KernelOperator<K> {
    fn apply(&self, field: &SpinorField) -> Result<SpinorField> {
        apply_momentum_kernel(field, &self.0)
    }
}

/// Multiplication by a Cartesian coordinate.
pub struct Coordinate(pub Axis);

impl GridOperator for Coordinate {
    fn apply(&self, field: &SpinorField) -> Result<SpinorField> {
        let a = self.0.index();
        Ok(field.multiply_by(|r| r[a]))
    }
}

pub fn check_normalized<const C: usize>(field: &Field<C>) -> Result<()> {
    let norm = field.norm_squared();
    if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// <field|O|field> for a normalized field.
pub fn expectation(field: &SpinorField, op: &dyn GridOperator) -> Result<Complex64> {
    check_normalized(field)?;
    Ok(field.inner(&op.apply(field)?))
}

/// Spectral derivative d/d(axis).
pub fn derivative<const C: usize>(field: &Field<C>, axis: usize, plans: &FftPlans) -> Field<C> {
    let grid = field.grid;
    let mut spec = field.to_spectrum(plans);
    for c in spec.components.iter_mut() {
        c.par_iter_mut().enumerate().for_each(|(i, v)| {
            *v *= Complex64::new(0.0, grid.momentum(i).0[axis]);
        });
    }
    spec.to_field(plans)
}

/// Orbital angular momentum component (r x (-i grad))_axis applied spectrally.
pub fn orbital_angular_momentum(field: &SpinorField, axis: Axis, plans: &FftPlans) -> SpinorField {
    let a = axis.index();
    let (j, k) = ((a + 1) % 3, (a + 2) % 3);
    let dk = derivative(field, k, plans);
    let dj = derivative(field, j, plans);
    // -i (r_j d_k - r_k d_j)
    let t1 = dk.multiply_by(|r| r[j]);
    let t2 = dj.multiply_by(|r| r[k]);
    t1.combine(Complex64::new(0.0, -1.0), &t2, Complex64::new(0.0, 1.0))
}

fn apply_local(field: &SpinorField, m: &Matrix4c) -> SpinorField {
    let mut out = SpinorField::zeros(&field.grid);
    for i in 0..field.grid.len() {
        out.set(i, &(m * field.at(i)));
    }
    out
}

/// J_axis = L_axis + Sigma_axis / 2.
pub fn total_angular_momentum(field: &SpinorField, axis: Axis, plans: &FftPlans) -> SpinorField {
    let l = orbital_angular_momentum(field, axis, plans);
    let s = apply_local(field, &(dirac_matrices().sigma[axis.index()] * Complex64::from(0.5)));
    l.combine(Complex64::from(1.0), &s, Complex64::from(1.0))
}

/// Spin-orbit operator beta (Sigma . L + 1).
pub fn spin_orbit_operator(field: &SpinorField, plans: &FftPlans) -> SpinorField {
    let d = dirac_matrices();
    let mut acc = field.clone();
    for axis in Axis::ALL {
        let l = orbital_angular_momentum(field, axis, plans);
        let sl = apply_local(&l, &d.sigma[axis.index()]);
        acc = acc.combine(Complex64::from(1.0), &sl, Complex64::from(1.0));
    }
    apply_local(&acc, &d.beta)
}

/// Normalized spectrum of a field, for repeated momentum-space expectations.
pub fn normalized_spectrum(field: &SpinorField, plans: &FftPlans) -> Result<Spectrum<4>> {
    check_normalized(field)?;
    Ok(field.to_spectrum(plans))
}

/// First and second moment of a coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

/// Moments of `axis` under the density of `field` (normalized by its norm).
pub fn coordinate_moments(field: &SpinorField, axis: Axis) -> PositionMoments {
    let a = axis.index();
    let grid = field.grid;
    let density = field.density();
    let (w, m1, m2) = density
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let x = grid.position(i)[a];
            (d, d * x, d * x * x)
        })
        .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let mean = m1 / w;
    let second_moment = m2 / w;
    PositionMoments {
        mean,
        second_moment,
        variance: second_moment - mean * mean,
    }
}

const DUMP_MAGIC: &[u8; 4] = b"SPFD";
const DUMP_VERSION: u32 = 1;

/// Binary snapshot: magic, version, component count, dimension, points[3]
/// (u64), lengths[3], offsets[3] (f64), then for every point its components as
/// (re, im) f64 pairs. All little-endian.
pub fn write_dump<const C: usize, W: Write>(field: &Field<C>, mut w: W) -> Result<()> {
    let g = &field.grid;
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(C as u32).to_le_bytes())?;
    let dim: u32 = match g.dimension {
        Dimension::One => 1,
        Dimension::Three => 3,
    };
    w.write_all(&dim.to_le_bytes())?;
    for n in g.points {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for l in g.lengths {
        w.write_all(&l.to_le_bytes())?;
    }
    for o in g.offsets() {
        w.write_all(&o.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(g.len() * C * 16);
    for i in 0..g.len() {
        for c in &field.components {
            buf.extend_from_slice(&c[i].re.to_le_bytes());
            buf.extend_from_slice(&c[i].im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_dump<const C: usize, R: Read>(mut r: R) -> Result<Field<C>> {
    if &read_array::<4, _>(&mut r)? != DUMP_MAGIC {
        return Err(Error::MalformedDump("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != DUMP_VERSION {
        return Err(Error::MalformedDump(format!("version {version}")));
    }
    let ncomp = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if ncomp != C {
        return Err(Error::MalformedDump(format!("{ncomp} components, expected {C}")));
    }
    let dimension = match u32::from_le_bytes(read_array(&mut r)?) {
        1 => Dimension::One,
        3 => Dimension::Three,
        d => return Err(Error::MalformedDump(format!("dimension {d}"))),
    };
    let mut points = [0usize; 3];
    for p in points.iter_mut() {
        *p = u64::from_le_bytes(read_array(&mut r)?) as usize;
    }
    let mut lengths = [0.0; 3];
    for l in lengths.iter_mut() {
        *l = f64::from_le_bytes(read_array(&mut r)?);
    }
    for _ in 0..3 {
        read_array::<8, _>(&mut r)?;
    }
    let grid = GridSpec { dimension, points, lengths };
    let mut field = Field::<C>::zeros(&grid);
    let mut buf = vec![0u8; grid.len() * C * 16];
    r.read_exact(&mut buf)?;
    for (n, chunk) in buf.chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        field.components[n % C][n / C] = Complex64::new(re, im);
    }
    Ok(field)
}

/// A 4-spinor at a point, as a fixed array.
pub fn spinor_array(s: &Spinor4) -> [Complex64; 4] {
    [s[0], s[1], s[2], s[3]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{h0_kernel, standard_rep_eigenstate, EnergySign, PlaneWaveLabel, SpinState};
    use crate::spin::fw_transform;
    use crate::units::SPEED_OF_LIGHT;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &GridSpec, seed: u64) -> SpinorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpinorField::zeros(grid);
        for c in f.components.iter_mut() {
            for v in c.iter_mut() {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        f
    }

    fn gaussian(grid: &GridSpec, width: f64, k: [f64; 3]) -> SpinorField {
        SpinorField::from_fn(grid, |r| {
            let env = (-r.norm_squared() / (2.0 * width * width)).exp();
            let ph = Complex64::from_polar(env, k[0] * r[0] + k[1] * r[1] + k[2] * r[2]);
            [ph, ph * 0.5, ph * Complex64::new(0.0, 0.2), ph * 0.1]
        })
        .normalized()
    }

    fn rel_diff(a: &SpinorField, b: &SpinorField) -> f64 {
        let d = a.combine(Complex64::from(1.0), b, Complex64::from(-1.0));
        (d.norm_squared() / b.norm_squared()).sqrt()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::cube(8, 1.0).is_err());
        assert!(GridSpec::cube(40, 1.0).is_err());
        assert!(GridSpec::cube(96, 1.0).is_ok());
        assert!(GridSpec::line(32, 0.0).is_err());
        assert!(GridSpec::line(32, 1.0).is_ok());
    }

    #[test]
    fn no_point_at_origin() {
        let g = GridSpec::cube(16, 4.0).unwrap();
        assert!((0..g.len()).all(|i| g.position(i).norm() > 0.0));
        assert!((g.coordinate(0, 0) + 2.0 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn identity_kernel_leaves_field_unchanged() {
        let g = GridSpec::cube(16, 5.0).unwrap();
        let f = random_field(&g, 1);
        let out = apply_momentum_kernel(&f, &|_: &Momentum3| Ok(Matrix4c::identity())).unwrap();
        assert!(rel_diff(&out, &f) < 1e-13);
    }

    #[test]
    fn h0_on_plane_wave_eigenstate() {
        let g = GridSpec::cube(16, 10.0).unwrap();
        let k = [g.wavenumber(0, 2), g.wavenumber(1, 15), g.wavenumber(2, 1)];
        let label = PlaneWaveLabel::new(EnergySign::Negative, Momentum3::from(k), SpinState::Up);
        let wave = standard_rep_eigenstate(&label);
        let f = SpinorField::from_fn(&g, |r| spinor_array(&wave.eval(r)));
        let c = SPEED_OF_LIGHT;
        let out = apply_momentum_kernel(&f, &|p: &Momentum3| Ok(h0_kernel(p, c))).unwrap();
        let e = -c * (c * c + label.p.norm_squared()).sqrt();
        assert!(rel_diff(&out, &f.scaled(Complex64::from(e))) < 1e-10);
    }

    #[test]
    fn fw_transform_round_trip() {
        let g = GridSpec::cube(16, 3.0).unwrap();
        let f = random_field(&g, 2);
        let t = apply_momentum_kernel(&f, &|p: &Momentum3| Ok(fw_transform(p))).unwrap();
        let back = apply_momentum_kernel(&t, &|p: &Momentum3| Ok(fw_transform(p).adjoint())).unwrap();
        assert!(rel_diff(&back, &f) < 1e-12);
    }

    #[test]
    fn zero_mode_error_surfaces() {
        let g = GridSpec::line(16, 1.0).unwrap();
        let f = random_field(&g, 3);
        let r = apply_momentum_kernel(&f, &|p: &Momentum3| crate::spin::pryce_transform(p));
        assert!(matches!(r, Err(Error::KernelSingularAtZeroMode)));
    }

    #[test]
    fn identity_expectation_is_one() {
        let g = GridSpec::cube(16, 8.0).unwrap();
        let f = gaussian(&g, 1.0, [0.0; 3]);
        let e = expectation(&f, &LocalMatrix(Matrix4c::identity())).unwrap();
        assert!((e - Complex64::from(1.0)).norm() < 1e-12);
    }

    #[test]
    fn expectation_requires_normalization() {
        let g = GridSpec::cube(16, 8.0).unwrap();
        let f = gaussian(&g, 1.0, [0.0; 3]).scaled(Complex64::from(1.1));
        assert!(matches!(
            expectation(&f, &LocalMatrix(Matrix4c::identity())),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn hermitian_kernels_give_real_expectations() {
        let g = GridSpec::cube(16, 8.0).unwrap();
        let f = gaussian(&g, 1.2, [0.8, -0.4, 1.6]);
        let op = KernelOperator(|p: &Momentum3| {
            crate::spin::spin_kernel(crate::spin::SpinOperatorKind::FoldyWouthuysen, Axis::Y, p)
        });
        let e = expectation(&f, &op).unwrap();
        assert!(e.im.abs() < 1e-10);
    }

    #[test]
    fn coordinate_moments_of_centered_gaussian() {
        let g = GridSpec::cube(32, 16.0).unwrap();
        let f = gaussian(&g, 1.5, [0.0; 3]);
        let m = coordinate_moments(&f, Axis::Z);
        assert!(m.mean.abs() < 1e-12);
        // |psi|^2 ~ exp(-r^2 / w^2) has variance w^2 / 2
        assert!((m.variance - 1.125).abs() < 1e-8, "{}", m.variance);
    }

    #[test]
    fn angular_momentum_of_gaussian_is_zero() {
        let g = GridSpec::cube(64, 16.0).unwrap();
        let plans = FftPlans::new(&g);
        let f = gaussian(&g, 1.2, [0.0; 3]);
        let l = orbital_angular_momentum(&f, Axis::Z, &plans);
        assert!(l.norm_squared().sqrt() < 1e-8, "{}", l.norm_squared().sqrt());
    }

    #[test]
    fn dump_round_trip() {
        let g = GridSpec::cube(16, 2.0).unwrap();
        let f = random_field(&g, 4);
        let mut buf = Vec::new();
        write_dump(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 * 3 + 8 * 9 + g.len() * 4 * 16);
        let back: SpinorField = read_dump(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        assert!(read_dump::<2, _>(buf.as_slice()).is_err());
        assert!(read_dump::<4, _>(&buf[1..]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn parseval(seed in any::<u64>(), n in prop::sample::select(vec![16usize, 32, 64])) {
            let g = GridSpec::line(n, 7.0).unwrap();
            let f = random_field(&g, seed);
            let s = f.spectrum();
            prop_assert!(((s.norm_squared() - f.norm_squared()) / f.norm_squared()).abs() < 1e-12);
            let back = s.field();
            prop_assert!(rel_diff(&back, &f) < 1e-12);
        }

        #[test]
        fn kernel_linearity(seed in any::<u64>(), ar in -2.0..2.0f64, ai in -2.0..2.0f64, b in -2.0..2.0f64) {
            let g = GridSpec::cube(16, 4.0).unwrap();
            let f = random_field(&g, seed);
            let h = random_field(&g, seed.wrapping_add(1));
            let a = Complex64::new(ar, ai);
            let bb = Complex64::from(b);
            let kernel = |p: &Momentum3| Ok(h0_kernel(p, SPEED_OF_LIGHT));
            let lhs = apply_momentum_kernel(&f.combine(a, &h, bb), &kernel).unwrap();
            let rhs = apply_momentum_kernel(&f, &kernel).unwrap().combine(a, &apply_momentum_kernel(&h, &kernel).unwrap(), bb);
            prop_assert!(rel_diff(&lhs, &rhs) < 1e-12);
        }
    }
}
