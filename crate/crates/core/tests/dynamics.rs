use std::f64::consts::PI;

use relspin::dynamics::{
    commensurate_pulse, precession_run, propagate, sweep_config, Backend, PropagationConfig, SweepSettings, WaveFunction,
    WeakFwTerms,
};
use relspin::laser::{default_wavelength, omega_p, omega_prediction, LaserConfig};

fn pulse(amplitude: f64, ramp: usize, flat: usize) -> LaserConfig {
    commensurate_pulse(amplitude, default_wavelength(), PI / 2.0, ramp, flat).unwrap()
}

fn weak_fw(laser: LaserConfig, terms: WeakFwTerms) -> PropagationConfig {
    let mut cfg = PropagationConfig::new(laser, Backend::WeakFW);
    cfg.points = 16;
    cfg.terms = terms;
    cfg
}

fn final_angle(cfg: &PropagationConfig) -> (f64, [f64; 3]) {
    let out = propagate(&WaveFunction::initial(cfg.backend, &cfg.grid().unwrap()), cfg).unwrap();
    let s = out.checkpoints.last().unwrap().spin;
    (s[1].atan2(s[2]), s)
}

#[test]
fn spin_independent_terms_leave_spin_static() {
    let mut terms = WeakFwTerms::none();
    terms.kinetic = true;
    terms.scalar_potential = true;
    terms.field_energy = true;
    terms.mass_correction = true;
    let mut cfg = weak_fw(pulse(300.0, 4, 6), terms);
    cfg.pulses = 2;
    let (angle, s) = final_angle(&cfg);
    assert!(angle.abs() < 1e-12, "{angle}");
    assert!((s[2] - 0.5).abs() < 1e-12 && s[0].abs() < 1e-12, "{s:?}");
}

/// Rate from a short WeakFW train whose flat top is sized like the matching Pauli backend.
fn weak_fw_rate(amplitude: f64, sized_for: Backend, terms: WeakFwTerms) -> (f64, LaserConfig) {
    let settings = SweepSettings { ramp_periods: 12, pulses: 3, points: 16, ..SweepSettings::default() };
    let mut cfg = sweep_config(sized_for, amplitude, &settings).unwrap();
    cfg.backend = Backend::WeakFW;
    cfg.terms = terms;
    cfg.dt = Backend::WeakFW.max_dt(&cfg.laser);
    let r = precession_run(&cfg).unwrap();
    assert!(r.max_norm_drift < 1e-8);
    (r.fit.signed_omega, cfg.laser)
}

#[test]
fn zeeman_rotation_is_cancelled_by_spin_orbit_field_term() {
    let (zeeman, laser) = weak_fw_rate(100.0, Backend::NonrelativisticPauli, WeakFwTerms::nonrelativistic_pauli());
    let zeeman = zeeman / omega_p(&laser);
    let (both, laser) = weak_fw_rate(100.0, Backend::RelativisticPauli, WeakFwTerms::relativistic_pauli());
    let both = both / omega_prediction(&laser);
    // Zeeman alone precesses at Omega_P up to bunching of order U0/k^2 = 0.03
    assert!((zeeman - 1.0).abs() < 0.03, "{zeeman}");
    assert!((both - 1.0).abs() < 0.01, "{both}");
}

#[test]
fn rotation_stays_in_the_yz_plane() {
    for backend in [Backend::RelativisticPauli, Backend::NonrelativisticPauli] {
        let mut cfg = PropagationConfig::new(pulse(400.0, 6, 40), backend);
        cfg.points = 16;
        cfg.pulses = 3;
        let out = propagate(&WaveFunction::initial(backend, &cfg.grid().unwrap()), &cfg).unwrap();
        let last = out.checkpoints.last().unwrap().spin;
        assert!(last[1].abs() > 1e-4, "{backend} did not rotate: {last:?}");
        for c in &out.checkpoints {
            assert!(c.spin[0].abs() < 1e-9, "{backend} {:?}", c.spin);
            let len = c.spin[1].hypot(c.spin[2]);
            assert!(len <= 0.5 + 1e-12, "{backend} {len}");
        }
    }
}
