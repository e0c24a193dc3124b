use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use thz_umimo::wideband::{
    baseband_signal, delayed_baseband_signal, effective_wideband_gain, is_spatially_wideband, spatial_delays,
    squint_direction, squint_gain, squint_loss, WidebandSetup,
};

const C: f64 = 3e8;

/// `|Σ_m e^{j2π m d (f sinψ − f_c sinφ)/c}| / N`, term by term.
fn direct_gain(n: usize, d: f64, f_c: f64, phi: f64, psi: f64, f: f64) -> f64 {
    let step = 2.0 * PI * d * (f * psi.sin() - f_c * phi.sin()) / C;
    let s: Complex64 = (0..n).map(|m| Complex64::from_polar(1.0, step * m as f64)).sum();
    s.norm() / n as f64
}

#[test]
fn worked_delay() {
    let setup = WidebandSetup::new(0.3e12, 10e9, 2, 1e-3, 1e-10).unwrap();
    let tau = spatial_delays(&setup, FRAC_PI_2)[1];
    assert!((tau - 1e-3 / C).abs() < 1e-18);
    assert!((tau * 1e12 - 3.333).abs() < 1e-3);
    let half = WidebandSetup::half_wavelength(0.3e12, 10e9, 2, 1e-10).unwrap();
    assert!((spatial_delays(&half, FRAC_PI_2)[1] * 1e12 - 1.667).abs() < 1e-3);
}

#[test]
fn worked_squint() {
    let psi = squint_direction(30f64.to_radians(), 1.05, 1.0).unwrap();
    assert!((psi.to_degrees() - 31.67).abs() < 0.01);
    assert!(squint_direction(80f64.to_radians(), 1.1, 1.0).is_err());
}

#[test]
fn single_antenna_is_narrowband() {
    let setup = WidebandSetup::half_wavelength(0.3e12, 50e9, 1, 1e-12).unwrap();
    assert_eq!(is_spatially_wideband(&setup, 1.2), (0.0, false));
    assert_eq!(effective_wideband_gain(&setup, 1.2), 1.0);
}

#[test]
fn delay_ratio_doubles_with_aperture() {
    let a = WidebandSetup::half_wavelength(0.3e12, 10e9, 33, 1e-11).unwrap();
    let b = WidebandSetup::half_wavelength(0.3e12, 10e9, 65, 1e-11).unwrap();
    let (ra, _) = is_spatially_wideband(&a, 0.7);
    let (rb, _) = is_spatially_wideband(&b, 0.7);
    assert!((rb / ra - 2.0).abs() < 1e-12);
}

#[test]
fn loss_grows_with_fractional_bandwidth() {
    let mut last = -1.0;
    for b in [1e9, 5e9, 10e9, 20e9, 40e9] {
        let setup = WidebandSetup::half_wavelength(0.3e12, b, 64, 1e-10).unwrap();
        let loss = squint_loss(&setup, 1.0);
        assert!(loss > last);
        last = loss;
    }
}

proptest! {
    #[test]
    fn delays_are_affine(n in 2usize..40, aoa in -FRAC_PI_2..FRAC_PI_2) {
        let setup = WidebandSetup::half_wavelength(0.3e12, 10e9, n, 1e-10).unwrap();
        let d = spatial_delays(&setup, aoa);
        prop_assert_eq!(d[0], 0.0);
        for m in 1..n {
            prop_assert!(((d[m] - d[m - 1]) - d[1]).abs() < 1e-24);
        }
    }

    #[test]
    fn reference_element_undelayed(
        aoa in -FRAC_PI_2..FRAC_PI_2,
        t in 0.0..4e-10f64,
        syms in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4),
    ) {
        let setup = WidebandSetup::half_wavelength(0.3e12, 10e9, 16, 1e-10).unwrap();
        let s: Vec<Complex64> = syms.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let g = Complex64::new(0.5, -0.2);
        let y = delayed_baseband_signal(&setup, aoa, g, &s, 0, t, false).unwrap();
        prop_assert!((y - g * baseband_signal(&s, 1e-10, t)).norm() < 1e-15);
    }

    #[test]
    fn element_phase_follows_half_wave_ula(aoa in -FRAC_PI_2..FRAC_PI_2, m in 0usize..16) {
        // Constant symbols so only the phase term matters.
        let setup = WidebandSetup::half_wavelength(0.3e12, 10e9, 16, 1e-6).unwrap();
        let s = vec![Complex64::new(1.0, 0.0); 4];
        let y = delayed_baseband_signal(&setup, aoa, Complex64::new(1.0, 0.0), &s, m, 2e-6, false).unwrap();
        let want = Complex64::from_polar(1.0, -PI * m as f64 * aoa.sin());
        prop_assert!((y - want).norm() < 1e-9);
        let aligned = delayed_baseband_signal(&setup, aoa, Complex64::new(1.0, 0.0), &s, m, 2e-6, true).unwrap();
        prop_assert!((aligned - 1.0).norm() < 1e-15);
    }

    #[test]
    fn squint_closed_form_matches_sum(
        phi in -1.4..1.4f64,
        psi in -1.4..1.4f64,
        frac in -1.0..1.0f64,
    ) {
        let (f_c, b) = (0.3e12, 30e9);
        let setup = WidebandSetup::half_wavelength(f_c, b, 80, 1e-10).unwrap();
        let f = f_c + frac * b / 2.0;
        let got = squint_gain(&setup, phi, psi, f).unwrap();
        let want = direct_gain(80, setup.spacing(), f_c, phi, psi, f);
        prop_assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn squint_direction_is_maximizer(psi in -1.2..1.2f64, xi in 0.95..1.05f64) {
        let f_c = 0.3e12;
        let setup = WidebandSetup::half_wavelength(f_c, 0.1 * f_c, 32, 1e-10).unwrap();
        let phi = squint_direction(psi, xi * f_c, f_c).unwrap();
        prop_assert!((xi * psi.sin() - phi.sin()).abs() < 1e-12);
        let peak = squint_gain(&setup, phi, psi, xi * f_c).unwrap();
        prop_assert!((peak - 1.0).abs() < 1e-9);
    }

    #[test]
    fn squint_mirror_symmetry(phi in -1.4..1.4f64, psi in -1.4..1.4f64, frac in -1.0..1.0f64) {
        let f_c = 0.3e12;
        let setup = WidebandSetup::half_wavelength(f_c, 20e9, 24, 1e-10).unwrap();
        let f = f_c + frac * 10e9;
        let a = squint_gain(&setup, phi, psi, f).unwrap();
        let b = squint_gain(&setup, phi, PI - psi, f).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn effective_gain_is_band_edge_minimum(
        n in 2usize..64,
        phi in 0.0..1.4f64,
        frac_b in 0.001..0.2f64,
    ) {
        let f_c = 0.3e12;
        let setup = WidebandSetup::half_wavelength(f_c, frac_b * f_c, n, 1e-10).unwrap();
        let (lo, hi) = setup.band();
        let edge = squint_gain(&setup, phi, phi, lo).unwrap().min(squint_gain(&setup, phi, phi, hi).unwrap());
        prop_assert!((effective_wideband_gain(&setup, phi) - edge).abs() < 1e-9);
    }
}
