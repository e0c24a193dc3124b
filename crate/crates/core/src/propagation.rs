//! Scalar link-budget physics at THz frequencies.
//!
//! Losses are returned as linear power factors `≥ 1`; use [`to_db`] for the
//! decibel view. Molecular absorption comes from a tabulated coefficient
//! `k(f)` given in dB (`10·log₁₀(k · 1 m)`), interpolated log-linearly in
//! frequency and never extrapolated.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, BOLTZMANN, PLANCK, SPEED_OF_LIGHT};

/// `10·log₁₀(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Inverse of [`to_db`].
pub fn from_db(db: f64) -> f64 {
    10.0_f64.powf(db / 10.0)
}

/// Absorption coefficients at the low-absorption window centers, 296 K and
/// 1 atm: `(frequency Hz, k dB)`.
pub const REFERENCE_WINDOWS: [(f64, f64); 6] = [
    (0.14e12, -42.2),
    (0.26e12, -38.5),
    (0.35e12, -27.8),
    (0.41e12, -22.4),
    (0.67e12, -18.5),
    (0.85e12, -20.9),
];

const MAX_TABLE_FREQUENCY: f64 = 10.0e12;

/// Tabulated absorption coefficient, `(frequency Hz, k dB)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionTable {
    points: Vec<(f64, f64)>,
}

impl AbsorptionTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        const OP: &str = "AbsorptionTable::new";
        if points.is_empty() {
            return Err(Error::domain(OP, "table is empty"));
        }
        for (i, &(f, k)) in points.iter().enumerate() {
            if !(f > 0.0 && f <= MAX_TABLE_FREQUENCY) {
                return Err(Error::domain(
                    OP,
                    alloc::format!("frequency {f} Hz at row {i} outside (0, 10 THz]"),
                ));
            }
            if !k.is_finite() {
                return Err(Error::domain(OP, alloc::format!("k_db at row {i} is not finite")));
            }
            if i > 0 && f <= points[i - 1].0 {
                return Err(Error::domain(
                    OP,
                    alloc::format!("frequencies not strictly increasing at row {i}"),
                ));
            }
        }
        Ok(Self { points })
    }

    /// The six-window reference table.
    pub fn reference() -> Self {
        Self {
            points: REFERENCE_WINDOWS.to_vec(),
        }
    }

    /// A table with `k = 0` everywhere in `[low, high]` (no absorption).
    pub fn vacuum(low: f64, high: f64) -> Result<Self> {
        if !(low > 0.0 && high > low && high <= MAX_TABLE_FREQUENCY) {
            return Err(Error::domain("AbsorptionTable::vacuum", "invalid frequency range"));
        }
        Ok(Self {
            points: alloc::vec![(low, f64::NEG_INFINITY), (high, f64::NEG_INFINITY)],
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Frequency hull `(low, high)`.
    pub fn hull(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Interpolated coefficient in dB at `f`.
    pub fn k_db(&self, f: f64) -> Result<f64> {
        let (low, high) = self.hull();
        if !(f >= low && f <= high) {
            return Err(Error::OutOfRange {
                op: "absorption_coefficient",
                value: f,
                low,
                high,
            });
        }
        match self
            .points
            .binary_search_by(|&(pf, _)| pf.partial_cmp(&f).unwrap())
        {
            Ok(i) => Ok(self.points[i].1),
            Err(i) => {
                let (f0, k0) = self.points[i - 1];
                let (f1, k1) = self.points[i];
                if k0 == f64::NEG_INFINITY || k1 == f64::NEG_INFINITY {
                    return Ok(k0.max(k1));
                }
                let t = (f / f0).ln() / (f1 / f0).ln();
                Ok(k0 + t * (k1 - k0))
            }
        }
    }
}

/// Propagation medium: temperature, pressure and its absorption table.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    temperature: f64,
    pressure: f64,
    table: AbsorptionTable,
}

impl Medium {
    pub fn new(temperature: f64, pressure: f64, table: AbsorptionTable) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::domain("Medium::new", "temperature must be > 0 K"));
        }
        if !(pressure > 0.0) {
            return Err(Error::domain("Medium::new", "pressure must be > 0 atm"));
        }
        Ok(Self {
            temperature,
            pressure,
            table,
        })
    }

    /// Standard atmosphere (296 K, 1 atm) with the reference window table.
    pub fn standard() -> Self {
        Self {
            temperature: 296.0,
            pressure: 1.0,
            table: AbsorptionTable::reference(),
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    pub fn table(&self) -> &AbsorptionTable {
        &self.table
    }
}

/// Geometry of one ray for the path-gain model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGeometry {
    pub frequency: f64,
    pub distance: f64,
    /// Cluster arrival time `T_i` (s); zero for the first cluster.
    pub cluster_arrival: f64,
    /// Ray arrival time within its cluster `T_ij` (s); zero for the first ray.
    pub ray_arrival: f64,
    /// Cluster decay constant `Γ_c` (s).
    pub gamma_cluster: f64,
    /// Ray decay constant `Γ_r` (s).
    pub gamma_ray: f64,
}

impl PathGeometry {
    /// First-cluster, first-ray geometry (no exponential decay).
    pub fn line_of_sight(frequency: f64, distance: f64) -> Self {
        Self {
            frequency,
            distance,
            cluster_arrival: 0.0,
            ray_arrival: 0.0,
            gamma_cluster: 1.0,
            gamma_ray: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        const OP: &str = "path_gain";
        positive(OP, "frequency", self.frequency)?;
        positive(OP, "distance", self.distance)?;
        positive(OP, "gamma_cluster", self.gamma_cluster)?;
        positive(OP, "gamma_ray", self.gamma_ray)?;
        if !(self.cluster_arrival >= 0.0 && self.ray_arrival >= 0.0) {
            return Err(Error::domain(OP, "arrival times must be >= 0"));
        }
        Ok(())
    }
}

fn positive(op: &'static str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, alloc::format!("{name} must be positive and finite, got {v}")))
    }
}

/// Friis spreading loss `(4πfd/c)²`.
pub fn spreading_loss(f: f64, d: f64) -> Result<f64> {
    positive("spreading_loss", "frequency", f)?;
    positive("spreading_loss", "distance", d)?;
    let x = 4.0 * core::f64::consts::PI * f * d / SPEED_OF_LIGHT;
    Ok(x * x)
}

/// Absorption coefficient `k(f)` in 1/m.
pub fn absorption_coefficient(medium: &Medium, f: f64) -> Result<f64> {
    let k_db = medium.table.k_db(f)?;
    Ok(from_db(k_db))
}

/// Molecular absorption loss `e^{k(f)·d}`.
pub fn absorption_loss(medium: &Medium, f: f64, d: f64) -> Result<f64> {
    positive("absorption_loss", "distance", d)?;
    let k = absorption_coefficient(medium, f)?;
    Ok((k * d).exp())
}

/// Path gain of one ray: decay terms over spreading and absorption loss.
pub fn path_gain(medium: &Medium, geom: &PathGeometry) -> Result<f64> {
    geom.validate()?;
    let spread = spreading_loss(geom.frequency, geom.distance)?;
    let abs = absorption_loss(medium, geom.frequency, geom.distance)?;
    let decay = (-geom.cluster_arrival / geom.gamma_cluster).exp()
        * (-geom.ray_arrival / geom.gamma_ray).exp();
    Ok(decay / (spread * abs))
}

/// Thermal background noise PSD `hf / (e^{hf/k_B T} − 1)` in W/Hz.
pub fn background_noise_psd(f: f64, temperature: f64) -> Result<f64> {
    positive("background_noise_psd", "frequency", f)?;
    positive("background_noise_psd", "temperature", temperature)?;
    let hf = PLANCK * f;
    Ok(hf / (hf / (BOLTZMANN * temperature)).exp_m1())
}

/// Re-radiation noise PSD `S_t / L_spread · (1 − 1/L_abs)`.
pub fn reradiation_noise_psd(signal_psd: f64, medium: &Medium, f: f64, d: f64) -> Result<f64> {
    if !(signal_psd >= 0.0) {
        return Err(Error::domain("reradiation_noise_psd", "signal PSD must be >= 0"));
    }
    let spread = spreading_loss(f, d)?;
    let k = absorption_coefficient(medium, f)?;
    // 1 − e^{−kd}, accurate for small kd.
    let absorbed = -(-k * d).exp_m1();
    Ok(signal_psd / spread * absorbed)
}

/// Background plus `Σ η·S_an` over the paths; each `η` must lie in `[0, 1]`.
pub fn total_noise_psd(background: f64, reradiation_terms: &[(f64, f64)]) -> Result<f64> {
    let mut total = background;
    for &(psd, eta) in reradiation_terms {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::domain(
                "total_noise_psd",
                alloc::format!("loss factor {eta} outside [0, 1]"),
            ));
        }
        total += eta * psd;
    }
    Ok(total)
}
