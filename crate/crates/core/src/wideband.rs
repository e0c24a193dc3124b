//! Spatial-wideband delays and frequency-wideband beam squint on a ULA.
//!
//! Element `m` (0-based) sees the wavefront `m·d·sinφ/c` later than the
//! reference element. Beam gains use the kernel of
//! [`array_gain_kernel`](crate::beamforming::array_gain_kernel) with argument
//! `(2d/λ_c)(ξ sinψ − sinφ)`, `ξ = f/f_c`.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::beamforming::array_gain_kernel;
use crate::linalg::{cis, Complex64};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Default `τ_max/T_s` ratio at which a link counts as spatially wideband.
pub const SPATIAL_WIDEBAND_THRESHOLD: f64 = 0.1;

/// Wideband ULA receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidebandSetup {
    carrier: f64,
    bandwidth: f64,
    n_antennas: usize,
    spacing: f64,
    symbol_period: f64,
}

impl WidebandSetup {
    pub fn new(carrier: f64, bandwidth: f64, n_antennas: usize, spacing: f64, symbol_period: f64) -> Result<Self> {
        const OP: &str = "WidebandSetup::new";
        for (name, v) in [
            ("carrier", carrier),
            ("bandwidth", bandwidth),
            ("spacing", spacing),
            ("symbol_period", symbol_period),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(OP, alloc::format!("{name} must be positive")));
            }
        }
        if n_antennas == 0 {
            return Err(Error::domain(OP, "n_antennas must be >= 1"));
        }
        if bandwidth >= 2.0 * carrier {
            return Err(Error::domain(OP, "bandwidth must be below twice the carrier"));
        }
        Ok(Self {
            carrier,
            bandwidth,
            n_antennas,
            spacing,
            symbol_period,
        })
    }

    /// Half-wavelength spacing at the carrier.
    pub fn half_wavelength(carrier: f64, bandwidth: f64, n_antennas: usize, symbol_period: f64) -> Result<Self> {
        Self::new(carrier, bandwidth, n_antennas, SPEED_OF_LIGHT / carrier / 2.0, symbol_period)
    }

    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn symbol_period(&self) -> f64 {
        self.symbol_period
    }

    /// Carrier wavelength.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier
    }

    /// Band edges `(f_c − B/2, f_c + B/2)`.
    pub fn band(&self) -> (f64, f64) {
        (self.carrier - self.bandwidth / 2.0, self.carrier + self.bandwidth / 2.0)
    }
}

/// Per-element delays `m·d·sinφ/c`.
pub fn spatial_delays(setup: &WidebandSetup, aoa: f64) -> Vec<f64> {
    let step = setup.spacing * aoa.sin() / SPEED_OF_LIGHT;
    (0..setup.n_antennas).map(|m| m as f64 * step).collect()
}

/// `(τ_max/T_s, ratio ≥ threshold)`.
pub fn is_spatially_wideband_with(setup: &WidebandSetup, aoa: f64, threshold: f64) -> (f64, bool) {
    let tau_max = (setup.n_antennas as f64 - 1.0) * setup.spacing * aoa.sin().abs() / SPEED_OF_LIGHT;
    let ratio = tau_max / setup.symbol_period;
    (ratio, ratio > 0.0 && ratio >= threshold)
}

/// [`is_spatially_wideband_with`] at [`SPATIAL_WIDEBAND_THRESHOLD`].
pub fn is_spatially_wideband(setup: &WidebandSetup, aoa: f64) -> (f64, bool) {
    is_spatially_wideband_with(setup, aoa, SPATIAL_WIDEBAND_THRESHOLD)
}

/// Rectangular-pulse baseband `s(t) = Σ sym[i]·g(t − iT_s)`, with `g` the
/// indicator of `[0, T_s)`.
pub fn baseband_signal(symbols: &[Complex64], symbol_period: f64, t: f64) -> Complex64 {
    if t < 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let i = (t / symbol_period).floor() as usize;
    symbols.get(i).copied().unwrap_or(Complex64::new(0.0, 0.0))
}

/// Sample of `α·s(t − τ̂_m)·e^{−j2π m d sinφ/λ}` at element `element`
/// (0-based). With `ttd` an ideal true-time-delay line aligns the element to
/// the reference, removing both the envelope delay and the phase term.
pub fn delayed_baseband_signal(
    setup: &WidebandSetup,
    aoa: f64,
    gain: Complex64,
    symbols: &[Complex64],
    element: usize,
    t: f64,
    ttd: bool,
) -> Result<Complex64> {
    if element >= setup.n_antennas {
        return Err(Error::dimension("delayed_baseband_signal", "element index out of range"));
    }
    if ttd {
        return Ok(gain * baseband_signal(symbols, setup.symbol_period, t));
    }
    let m = element as f64;
    let tau = m * setup.spacing * aoa.sin() / SPEED_OF_LIGHT;
    let phase = -2.0 * PI * m * setup.spacing * aoa.sin() / setup.wavelength();
    Ok(gain * baseband_signal(symbols, setup.symbol_period, t - tau) * cis(phase))
}

/// Gain at frequency `f` of the carrier-frequency combiner steered to `phi`
/// for a plane wave from `psi`.
pub fn squint_gain(setup: &WidebandSetup, phi: f64, psi: f64, f: f64) -> Result<f64> {
    let (lo, hi) = setup.band();
    let slack = 1e-12 * setup.carrier;
    if !(f >= lo - slack && f <= hi + slack) {
        return Err(Error::OutOfRange {
            op: "squint_gain",
            value: f,
            low: lo,
            high: hi,
        });
    }
    let xi = f / setup.carrier;
    let scale = 2.0 * setup.spacing / setup.wavelength();
    Ok(array_gain_kernel(setup.n_antennas, scale * (xi * psi.sin() - phi.sin())))
}

/// Combiner angle `arcsin(ξ·sinψ)` that is optimal at frequency `f`.
pub fn squint_direction(psi: f64, f: f64, f_c: f64) -> Result<f64> {
    if !(f > 0.0 && f_c > 0.0) {
        return Err(Error::domain("squint_direction", "frequencies must be positive"));
    }
    if f == f_c {
        return Ok(psi);
    }
    let arg = f / f_c * psi.sin();
    if arg.abs() > 1.0 {
        return Err(Error::BeamSplit {
            op: "squint_direction",
            argument: arg.abs(),
        });
    }
    Ok(arg.asin())
}

/// Worst in-band gain of a beam aligned at `phi_max`.
pub fn effective_wideband_gain(setup: &WidebandSetup, phi_max: f64) -> f64 {
    let scale = 2.0 * setup.spacing / setup.wavelength();
    let x = scale * setup.bandwidth / (2.0 * setup.carrier) * phi_max.sin();
    array_gain_kernel(setup.n_antennas, x)
}

/// `1 − effective_wideband_gain`.
pub fn squint_loss(setup: &WidebandSetup, phi_max: f64) -> f64 {
    1.0 - effective_wideband_gain(setup, phi_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{array_factor, Codeword};
    use crate::geometry::{response_vector, ArrayGeometry, Direction, Orientation};
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_PI_4;

    fn setup(n: usize) -> WidebandSetup {
        WidebandSetup::half_wavelength(0.3e12, 10e9, n, 1e-10).unwrap()
    }

    #[test]
    fn delays() {
        assert!(spatial_delays(&setup(8), 0.0).iter().all(|&d| d == 0.0));
        let d = spatial_delays(&setup(2), core::f64::consts::FRAC_PI_2);
        assert_relative_eq!(d[1], 1.6667e-12, max_relative = 1e-4);
        let d = spatial_delays(&setup(6), 0.4);
        for w in d.windows(3) {
            assert_relative_eq!(w[2] - w[1], w[1] - w[0], max_relative = 1e-12);
        }
    }

    #[test]
    fn wideband_flag() {
        assert_eq!(is_spatially_wideband(&setup(64), 0.0), (0.0, false));
        assert!(!is_spatially_wideband(&setup(1), 1.0).1);
        let a = is_spatially_wideband(&setup(11), 0.7).0;
        let b = is_spatially_wideband(&setup(21), 0.7).0;
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-12);
        let big = WidebandSetup::half_wavelength(0.3e12, 10e9, 1024, 1e-10).unwrap();
        assert!(is_spatially_wideband(&big, 1.0).1);
        assert!(WidebandSetup::new(1e9, 3e9, 4, 1e-3, 1e-9).is_err());
    }

    #[test]
    fn baseband_samples() {
        let s = setup(4);
        let syms = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)];
        let alpha = Complex64::new(0.5, 0.0);
        let t = 0.3e-10;
        assert_eq!(delayed_baseband_signal(&s, 0.6, alpha, &syms, 0, t, false).unwrap(), alpha * syms[0]);
        assert_eq!(delayed_baseband_signal(&s, 0.6, alpha, &syms, 0, -1e-12, false).unwrap(), Complex64::new(0.0, 0.0));
        // Spacing chosen so that τ̂₁ = T_s exactly.
        let ts = 1e-10;
        let wide = WidebandSetup::new(0.3e12, 10e9, 2, ts * SPEED_OF_LIGHT, ts).unwrap();
        let y = delayed_baseband_signal(&wide, core::f64::consts::FRAC_PI_2, alpha, &syms, 1, 1.5 * ts, false).unwrap();
        assert_relative_eq!(y.norm(), (alpha * syms[0]).norm(), epsilon = 1e-12);
        let phase = delayed_baseband_signal(&s, 0.6, Complex64::new(1.0, 0.0), &[Complex64::new(1.0, 0.0); 8], 3, 5e-10, false).unwrap();
        let g = ArrayGeometry::ula(4, s.wavelength()).unwrap();
        let a = response_vector(&g, Direction::horizontal(0.6), Orientation::Receive);
        assert_relative_eq!((phase - a[3] * 2.0).norm(), 0.0, epsilon = 1e-12);
        let ttd = delayed_baseband_signal(&s, 0.6, alpha, &syms, 3, t, true).unwrap();
        assert_eq!(ttd, alpha * syms[0]);
    }

    #[test]
    fn squint_reduces_to_array_factor() {
        let s = setup(32);
        for (phi, psi) in [(0.1, 0.2), (-0.7, 0.3), (1.2, 1.1)] {
            let g = squint_gain(&s, phi, psi, s.carrier()).unwrap();
            assert_relative_eq!(g, array_factor(&Codeword::steering(32, phi), psi), epsilon = 1e-12);
        }
        assert_eq!(squint_gain(&s, 0.3, 0.3, s.carrier()).unwrap(), 1.0);
        assert!(squint_gain(&s, 0.3, 0.3, 2.0 * s.carrier()).is_err());
    }

    #[test]
    fn squint_directions() {
        assert_eq!(squint_direction(0.4, 1e12, 1e12).unwrap(), 0.4);
        let d = squint_direction(30f64.to_radians(), 1.05, 1.0).unwrap();
        assert_relative_eq!(d.to_degrees(), 31.67, epsilon = 5e-3);
        let small = squint_direction(0.2, 1.05, 1.0).unwrap() - 0.2;
        let large = squint_direction(1.0, 1.05, 1.0).unwrap() - 1.0;
        assert!(large.abs() > small.abs());
        assert!(matches!(squint_direction(1.4, 1.2, 1.0), Err(Error::BeamSplit { .. })));
    }

    #[test]
    fn fig_configuration_straddles() {
        let s = WidebandSetup::half_wavelength(0.14e12, 10e9, 80, 1e-10).unwrap();
        let (lo, hi) = s.band();
        let peak = |f: f64| squint_direction(FRAC_PI_4, f, s.carrier()).unwrap();
        assert!(peak(hi) > FRAC_PI_4 && peak(lo) < FRAC_PI_4);
    }

    #[test]
    fn effective_gain() {
        let narrow = WidebandSetup::half_wavelength(0.3e12, 1.0, 64, 1e-9).unwrap();
        assert_relative_eq!(effective_wideband_gain(&narrow, 1.0), 1.0, epsilon = 1e-9);
        let s = setup(64);
        assert_eq!(effective_wideband_gain(&s, 0.0), 1.0);
        assert_eq!(squint_loss(&s, 0.0), 0.0);
        let (lo, hi) = s.band();
        let phi = 0.9;
        let m = squint_gain(&s, phi, phi, lo).unwrap().min(squint_gain(&s, phi, phi, hi).unwrap());
        assert_relative_eq!(effective_wideband_gain(&s, phi), m, epsilon = 1e-12);
    }
}
