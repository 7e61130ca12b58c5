//! Elliptically polarized counterpropagating laser fields and their
//! standing-wave superposition, in atomic units.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{length_from_si, EPSILON_0, FINE_STRUCTURE, SPEED_OF_LIGHT};

/// Wavelength used for the precession sweeps, 0.159 nm.
pub fn default_wavelength() -> f64 {
    length_from_si(0.159e-9)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserConfig {
    /// Electric field amplitude of each wave.
    pub amplitude: f64,
    pub wavelength: f64,
    /// Ellipticity parameter in (-pi, pi].
    pub eta: f64,
    /// Total interaction time of one pulse.
    pub duration: f64,
    /// Turn-on and turn-off time.
    pub ramp: f64,
}

impl LaserConfig {
    pub fn new(amplitude: f64, wavelength: f64, eta: f64, duration: f64, ramp: f64) -> Result<Self> {
        let cfg = LaserConfig { amplitude, wavelength, eta, duration, ramp };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Circular polarization at the default wavelength.
    pub fn circular(amplitude: f64, duration: f64, ramp: f64) -> Result<Self> {
        Self::new(amplitude, default_wavelength(), PI / 2.0, duration, ramp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!("field amplitude {}", self.amplitude)));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidConfig(format!("wavelength {}", self.wavelength)));
        }
        if !(self.eta > -PI && self.eta <= PI) {
            return Err(Error::InvalidConfig(format!("ellipticity {}", self.eta)));
        }
        if !(self.ramp > 0.0 && self.ramp <= 0.5 * self.duration) {
            return Err(Error::InvalidConfig(format!(
                "ramp {} must lie in (0, duration/2] with duration {}",
                self.ramp, self.duration
            )));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    pub fn angular_frequency(&self) -> f64 {
        self.wavenumber() * SPEED_OF_LIGHT
    }

    pub fn period(&self) -> f64 {
        TAU / self.angular_frequency()
    }

    /// I = eps0 c E^2 of each wave.
    pub fn intensity(&self) -> f64 {
        EPSILON_0 * SPEED_OF_LIGHT * self.amplitude * self.amplitude
    }

    /// sin^2 turn-on and turn-off envelope.
    pub fn window(&self, t: f64) -> f64 {
        let (dt, tt) = (self.ramp, self.duration);
        if t <= 0.0 || t >= tt {
            0.0
        } else if t < dt {
            (PI * t / (2.0 * dt)).sin().powi(2)
        } else if t <= tt - dt {
            1.0
        } else {
            (PI * (tt - t) / (2.0 * dt)).sin().powi(2)
        }
    }

    pub fn window_derivative(&self, t: f64) -> f64 {
        let (dt, tt) = (self.ramp, self.duration);
        let rate = PI / (2.0 * dt);
        if t <= 0.0 || t >= tt {
            0.0
        } else if t < dt {
            rate * (2.0 * rate * t).sin()
        } else if t <= tt - dt {
            0.0
        } else {
            -rate * (2.0 * rate * (tt - t)).sin()
        }
    }

    /// Integral of w(t)^power over one pulse.
    pub fn window_integral(&self, power: i32) -> f64 {
        // integral of sin^(2m) over a quarter period is (2m-1)!!/(2m)!! * pi/2
        let m = power as usize;
        let mut frac = 1.0;
        for k in 1..=m {
            frac *= (2 * k - 1) as f64 / (2 * k) as f64;
        }
        (self.duration - 2.0 * self.ramp) + 2.0 * self.ramp * frac
    }
}

/// E, B and A at one space-time point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub e: Vector3<f64>,
    pub b: Vector3<f64>,
    pub a: Vector3<f64>,
}

/// Direction of travel of a single wave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// One unwindowed traveling wave (upper signs: forward along +x).
pub fn traveling_wave(dir: Direction, x: f64, t: f64, cfg: &LaserConfig) -> FieldSample {
    let s = dir.sign();
    let (k, w, e0, eta) = (cfg.wavenumber(), cfg.angular_frequency(), cfg.amplitude, cfg.eta);
    let phase = k * x - s * w * t;
    let c = SPEED_OF_LIGHT;
    FieldSample {
        e: Vector3::new(0.0, e0 * phase.cos(), e0 * (phase + s * eta).cos()),
        b: Vector3::new(0.0, -s * e0 / c * (phase + s * eta).cos(), s * e0 / c * phase.cos()),
        a: Vector3::new(0.0, s * e0 / w * phase.sin(), s * e0 / w * (phase + s * eta).sin()),
    }
}

/// -(2 w E / omega) cos kx (sin wt e_y + sin(wt - eta) e_z)
pub fn standing_wave_a(x: f64, t: f64, cfg: &LaserConfig) -> Vector3<f64> {
    cfg.window(t) * unwindowed_standing_a(x, t, cfg)
}

fn unwindowed_standing_a(x: f64, t: f64, cfg: &LaserConfig) -> Vector3<f64> {
    let (k, w) = (cfg.wavenumber(), cfg.angular_frequency());
    let f = -2.0 * cfg.amplitude / w * (k * x).cos();
    Vector3::new(0.0, f * (w * t).sin(), f * (w * t - cfg.eta).sin())
}

/// Windowed standing wave. E = -dA/dt includes the envelope derivative.
pub fn standing_wave(x: f64, t: f64, cfg: &LaserConfig) -> FieldSample {
    let w = cfg.window(t);
    let a0 = unwindowed_standing_a(x, t, cfg);
    let f1 = traveling_wave(Direction::Forward, x, t, cfg);
    let f2 = traveling_wave(Direction::Backward, x, t, cfg);
    FieldSample {
        e: (f1.e + f2.e) * w - a0 * cfg.window_derivative(t),
        b: (f1.b + f2.b) * w,
        a: a0 * w,
    }
}

/// Windowed forward wave alone.
pub fn single_wave(x: f64, t: f64, cfg: &LaserConfig) -> FieldSample {
    let w = cfg.window(t);
    let f = traveling_wave(Direction::Forward, x, t, cfg);
    FieldSample {
        e: f.e * w - f.a * cfg.window_derivative(t),
        b: f.b * w,
        a: f.a * w,
    }
}

/// eps0 E x A of one traveling wave, (eps0 E^2 lambda sin eta / (2 pi c)) e_x.
pub fn photonic_spin_density(cfg: &LaserConfig) -> Vector3<f64> {
    Vector3::new(
        EPSILON_0 * cfg.amplitude.powi(2) * cfg.wavelength * cfg.eta.sin() / (TAU * SPEED_OF_LIGHT),
        0.0,
        0.0,
    )
}

/// Spin density of the standing wave, eps0 E^2 lambda sin eta / (pi c).
pub fn standing_wave_spin_density(cfg: &LaserConfig) -> f64 {
    2.0 * photonic_spin_density(cfg)[0]
}

/// Omega = rho I lambda^4 alpha^2 / (2 pi^2 m c^3), circular polarization.
pub fn omega_prediction(cfg: &LaserConfig) -> f64 {
    let c = SPEED_OF_LIGHT;
    let rho = EPSILON_0 * cfg.amplitude.powi(2) * cfg.wavelength / (PI * c);
    rho * cfg.intensity() * cfg.wavelength.powi(4) * FINE_STRUCTURE.powi(2) / (2.0 * PI * PI * c.powi(3))
}

/// Omega_P = E^2 lambda / (2 pi m^2 c^3), the single-term classical rate.
pub fn omega_p(cfg: &LaserConfig) -> f64 {
    cfg.amplitude.powi(2) * cfg.wavelength / (TAU * SPEED_OF_LIGHT.powi(3))
}

/// Omega_L = E / (m c), Larmor frequency in a static field E/c.
pub fn omega_larmor(cfg: &LaserConfig) -> f64 {
    cfg.amplitude / SPEED_OF_LIGHT
}

/// Ponderomotive coupling U0 / k^2 with U0 = E^2 / omega^2; the closed-form
/// Omega needs this small.
pub fn bunching_parameter(cfg: &LaserConfig) -> f64 {
    (cfg.amplitude / cfg.angular_frequency()).powi(2) / cfg.wavenumber().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(eta: f64) -> LaserConfig {
        LaserConfig::new(300.0, default_wavelength(), eta, 1.0, 0.2).unwrap()
    }

    #[test]
    fn wavelength_in_atomic_units() {
        assert!((default_wavelength() - 3.0047).abs() < 1e-4);
    }

    #[test]
    fn config_validation() {
        assert!(LaserConfig::new(-1.0, 1.0, 0.0, 1.0, 0.1).is_err());
        assert!(LaserConfig::new(1.0, 1.0, -PI, 1.0, 0.1).is_err());
        assert!(LaserConfig::new(1.0, 1.0, PI, 1.0, 0.6).is_err());
        assert!(LaserConfig::new(1.0, 1.0, PI, 1.0, 0.5).is_ok());
    }

    #[test]
    fn window_values() {
        let c = cfg(PI / 2.0);
        assert_eq!(c.window(0.0), 0.0);
        assert_relative_eq!(c.window(0.1), 0.5, epsilon = 1e-15);
        assert_eq!(c.window(0.2), 1.0);
        assert_eq!(c.window(0.8), 1.0);
        assert!(c.window(1.0).abs() < 1e-15);
        for t in [0.05, 0.5, 0.93] {
            let h = 1e-6;
            let fd = (c.window(t + h) - c.window(t - h)) / (2.0 * h);
            assert!((fd - c.window_derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn window_integrals() {
        let c = cfg(0.0);
        for p in [2, 4] {
            let n = 200_000;
            let h = c.duration / n as f64;
            let s: f64 = (0..n).map(|i| c.window((i as f64 + 0.5) * h).powi(p)).sum::<f64>() * h;
            assert_relative_eq!(s, c.window_integral(p), max_relative = 1e-8);
        }
    }

    #[test]
    fn a_zeros() {
        let c = cfg(0.7);
        assert_eq!(standing_wave_a(0.3, 0.0, &c).norm(), 0.0);
        for t in [0.1, 0.37, 0.6] {
            assert!(standing_wave_a(c.wavelength / 4.0, t, &c).norm() < 1e-12);
        }
    }

    #[test]
    fn circular_magnitude_is_constant() {
        let c = cfg(PI / 2.0);
        let x = 0.4;
        let m = 2.0 * c.amplitude / c.angular_frequency() * (c.wavenumber() * x).cos().abs();
        for t in [0.3, 0.31, 0.5, 0.77] {
            assert_relative_eq!(standing_wave_a(x, t, &c).norm(), m, max_relative = 1e-12);
        }
    }

    #[test]
    fn standing_wave_is_sum_of_traveling_waves() {
        let c = cfg(0.9);
        for (x, t) in [(0.1, 0.4), (1.7, 0.55), (2.9, 0.3)] {
            let a1 = traveling_wave(Direction::Forward, x, t, &c).a;
            let a2 = traveling_wave(Direction::Backward, x, t, &c).a;
            assert!((a1 + a2 - standing_wave_a(x, t, &c)).norm() < 1e-12);
        }
    }

    #[test]
    fn fields_from_potential_by_finite_differences() {
        for eta in [PI / 2.0, 0.3, PI] {
            let c = cfg(eta);
            for (x, t) in [(0.1, 0.1), (1.7, 0.55), (2.9, 0.93)] {
                let f = standing_wave(x, t, &c);
                let h = 1e-5;
                let a = |s: f64| standing_wave_a(x, t + s * h, &c);
                let e_fd = -(a(-2.0) - 8.0 * a(-1.0) + 8.0 * a(1.0) - a(2.0)) / (12.0 * h);
                let scale = c.amplitude;
                assert!((e_fd - f.e).norm() / scale < 1e-10);
                // B = curl A with A = A(x): (0, -dAz/dx, dAy/dx)
                let hx = 1e-6;
                let da = (standing_wave_a(x + hx, t, &c) - standing_wave_a(x - hx, t, &c)) / (2.0 * hx);
                let b_fd = Vector3::new(0.0, -da[2], da[1]);
                assert!((b_fd - f.b).norm() / (scale / SPEED_OF_LIGHT) < 1e-8);
            }
        }
    }

    #[test]
    fn traveling_wave_fields_match_potential() {
        let c = cfg(0.4);
        for dir in [Direction::Forward, Direction::Backward] {
            let (x, t) = (0.8, 0.2);
            let f = traveling_wave(dir, x, t, &c);
            let h = 1e-7;
            let e_fd = -(traveling_wave(dir, x, t + h, &c).a - traveling_wave(dir, x, t - h, &c).a) / (2.0 * h);
            assert!((e_fd - f.e).norm() / c.amplitude < 1e-7);
            let da = (traveling_wave(dir, x + h, t, &c).a - traveling_wave(dir, x - h, t, &c).a) / (2.0 * h);
            assert!((Vector3::new(0.0, -da[2], da[1]) - f.b).norm() * SPEED_OF_LIGHT / c.amplitude < 1e-7);
        }
    }

    #[test]
    fn spin_density_per_wave() {
        let c = cfg(PI / 2.0);
        let expected = photonic_spin_density(&c);
        for dir in [Direction::Forward, Direction::Backward] {
            for (x, t) in [(0.3, 0.1), (2.0, 0.77)] {
                let f = traveling_wave(dir, x, t, &c);
                let s = f.e.cross(&f.a) * EPSILON_0;
                assert!((s - expected).norm() < 1e-12 * expected.norm());
            }
        }
        assert_eq!(photonic_spin_density(&cfg(0.0)).norm(), 0.0);
        assert_relative_eq!(standing_wave_spin_density(&c), 2.0 * expected[0]);
    }

    #[test]
    fn omega_prediction_scaling() {
        let c = cfg(PI / 2.0);
        let closed = c.amplitude.powi(4) * c.wavelength.powi(5) / (32.0 * PI.powi(5) * SPEED_OF_LIGHT.powi(5));
        assert_relative_eq!(omega_prediction(&c), closed, max_relative = 1e-12);
        let mut d = c;
        d.amplitude *= 2.0;
        assert_relative_eq!(omega_prediction(&d), 16.0 * omega_prediction(&c), max_relative = 1e-12);
        d.amplitude = 0.0;
        assert_eq!(omega_prediction(&d), 0.0);
        // perturbative closed form: Omega = Omega_P * U0 / k^2
        assert_relative_eq!(omega_prediction(&c), omega_p(&c) * bunching_parameter(&c), max_relative = 1e-12);
    }
}
