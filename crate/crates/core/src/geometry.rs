//! Array layouts and their far-field response vectors.
//!
//! Coordinates are in meters in the array's own frame. A direction with
//! azimuth `φ` and elevation `θ` (polar angle from +z) has unit vector
//! `u = (sinθ cosφ, sinθ sinφ, cosθ)`; the transmit response of an element at
//! `r` is `e^{+jk r·u}/√N` and the receive response is its conjugate.
//!
//! Layouts:
//!
//! - ULA on the y-axis, broadside along +x. Elevation is ignored, so the
//!   phase is `k·y·sinφ` and `φ` is measured from broadside.
//! - URPA in the yz-plane, row-major over `(m, n)` with `y = m·d_y`,
//!   `z = n·d_z`.
//! - UHPA in the xy-plane: rows `v = V, …, −V` at `y = v·d_y`,
//!   `d_y = √3/2·d_x`, each row holding `2V+1−|v|` elements centered on the
//!   y-axis and ordered by increasing x.
//! - UCPA in the xy-plane: center element first, then circle `c = 1..C` with
//!   `6c` elements at angles `2πn/(6c)`, counterclockwise from +x.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{cis, CVector};
use crate::{Error, Result};

/// Transmit (`e^{+j·}`) or receive (`e^{−j·}`) phase convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    Transmit,
    Receive,
}

/// Propagation direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    /// Wraps the azimuth into `[0, 2π)`; the elevation must lie in `[0, π]`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() {
            return Err(Error::domain("Direction::new", "azimuth is not finite"));
        }
        if !(0.0..=PI).contains(&elevation) {
            return Err(Error::domain(
                "Direction::new",
                alloc::format!("elevation {elevation} outside [0, π]"),
            ));
        }
        Ok(Self {
            azimuth: crate::linalg::wrap_phase(azimuth),
            elevation,
        })
    }

    /// A direction in the horizontal plane (`θ = π/2`).
    ///
    /// # Panics
    /// If `azimuth` is not finite.
    pub fn horizontal(azimuth: f64) -> Self {
        Self::new(azimuth, FRAC_PI_2).expect("finite azimuth")
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.elevation.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Array family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Ula,
    Urpa,
    Uhpa,
    Ucpa,
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    Ula { n: usize, d: f64 },
    Urpa { ny: usize, nz: usize, dy: f64, dz: f64 },
    Uhpa { rings: usize, dx: f64 },
    Ucpa { radii: Vec<f64> },
}

/// Element layout plus the wavelength it is operated at.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    layout: Layout,
    wavelength: f64,
}

fn check_spacing(op: &'static str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, alloc::format!("{name} must be positive, got {v}")))
    }
}

impl ArrayGeometry {
    /// `n`-element ULA with `λ/2` spacing.
    pub fn ula(n: usize, wavelength: f64) -> Result<Self> {
        Self::ula_with_spacing(n, wavelength / 2.0, wavelength)
    }

    pub fn ula_with_spacing(n: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        const OP: &str = "ArrayGeometry::ula";
        if n == 0 {
            return Err(Error::domain(OP, "element count must be >= 1"));
        }
        check_spacing(OP, "spacing", spacing)?;
        check_spacing(OP, "wavelength", wavelength)?;
        Ok(Self {
            layout: Layout::Ula { n, d: spacing },
            wavelength,
        })
    }

    pub fn urpa(ny: usize, nz: usize, dy: f64, dz: f64, wavelength: f64) -> Result<Self> {
        const OP: &str = "ArrayGeometry::urpa";
        if ny == 0 || nz == 0 {
            return Err(Error::domain(OP, "element counts must be >= 1"));
        }
        check_spacing(OP, "d_y", dy)?;
        check_spacing(OP, "d_z", dz)?;
        check_spacing(OP, "wavelength", wavelength)?;
        Ok(Self {
            layout: Layout::Urpa { ny, nz, dy, dz },
            wavelength,
        })
    }

    /// UHPA with `rings` hexagon rings around the center and horizontal
    /// spacing `dx`.
    pub fn uhpa(rings: usize, dx: f64, wavelength: f64) -> Result<Self> {
        const OP: &str = "ArrayGeometry::uhpa";
        check_spacing(OP, "d_x", dx)?;
        check_spacing(OP, "wavelength", wavelength)?;
        Ok(Self {
            layout: Layout::Uhpa { rings, dx },
            wavelength,
        })
    }

    /// UCPA with explicit strictly increasing circle radii.
    pub fn ucpa(radii: Vec<f64>, wavelength: f64) -> Result<Self> {
        const OP: &str = "ArrayGeometry::ucpa";
        check_spacing(OP, "wavelength", wavelength)?;
        for (i, &r) in radii.iter().enumerate() {
            check_spacing(OP, "radius", r)?;
            if i > 0 && r <= radii[i - 1] {
                return Err(Error::domain(OP, "radii must be strictly increasing"));
            }
        }
        Ok(Self {
            layout: Layout::Ucpa { radii },
            wavelength,
        })
    }

    /// UCPA with `circles` circles at radii `c·λ/2`.
    pub fn ucpa_uniform(circles: usize, wavelength: f64) -> Result<Self> {
        Self::ucpa(
            (1..=circles).map(|c| c as f64 * wavelength / 2.0).collect(),
            wavelength,
        )
    }

    pub fn kind(&self) -> ArrayKind {
        match self.layout {
            Layout::Ula { .. } => ArrayKind::Ula,
            Layout::Urpa { .. } => ArrayKind::Urpa,
            Layout::Uhpa { .. } => ArrayKind::Uhpa,
            Layout::Ucpa { .. } => ArrayKind::Ucpa,
        }
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Same layout operated at another wavelength.
    pub fn with_wavelength(&self, wavelength: f64) -> Result<Self> {
        check_spacing("ArrayGeometry::with_wavelength", "wavelength", wavelength)?;
        Ok(Self {
            layout: self.layout.clone(),
            wavelength,
        })
    }

    pub fn n_elements(&self) -> usize {
        match &self.layout {
            Layout::Ula { n, .. } => *n,
            Layout::Urpa { ny, nz, .. } => ny * nz,
            Layout::Uhpa { rings, .. } => 1 + 3 * rings * (rings + 1),
            Layout::Ucpa { radii } => 1 + 3 * radii.len() * (radii.len() + 1),
        }
    }

    /// ULA element spacing, if this is a ULA.
    pub fn ula_spacing(&self) -> Option<f64> {
        match self.layout {
            Layout::Ula { d, .. } => Some(d),
            _ => None,
        }
    }

    /// Element coordinates in storage order.
    pub fn element_positions(&self) -> Vec<[f64; 3]> {
        match &self.layout {
            Layout::Ula { n, d } => (0..*n).map(|i| [0.0, i as f64 * d, 0.0]).collect(),
            Layout::Urpa { ny, nz, dy, dz } => {
                let mut out = Vec::with_capacity(ny * nz);
                for m in 0..*ny {
                    for n in 0..*nz {
                        out.push([0.0, m as f64 * dy, n as f64 * dz]);
                    }
                }
                out
            }
            Layout::Uhpa { rings, dx } => {
                let v_max = *rings as i64;
                let dy = 3f64.sqrt() / 2.0 * dx;
                let mut out = Vec::with_capacity(self.n_elements());
                for v in (-v_max..=v_max).rev() {
                    let count = (2 * v_max + 1 - v.abs()) as usize;
                    let half = (count as f64 - 1.0) / 2.0;
                    for i in 0..count {
                        out.push([(i as f64 - half) * dx, v as f64 * dy, 0.0]);
                    }
                }
                out
            }
            Layout::Ucpa { radii } => {
                let mut out = Vec::with_capacity(self.n_elements());
                out.push([0.0; 3]);
                for (c, &r) in radii.iter().enumerate() {
                    let count = 6 * (c + 1);
                    for n in 0..count {
                        let a = 2.0 * PI * n as f64 / count as f64;
                        out.push([r * a.cos(), r * a.sin(), 0.0]);
                    }
                }
                out
            }
        }
    }

    /// Largest one-dimensional extent used for the Rayleigh distance.
    pub fn aperture(&self) -> f64 {
        match &self.layout {
            Layout::Ula { n, d } => (*n as f64 - 1.0) * d,
            Layout::Urpa { ny, nz, dy, dz } => {
                ((*ny as f64 - 1.0) * dy).max((*nz as f64 - 1.0) * dz)
            }
            Layout::Uhpa { rings, dx } => 2.0 * *rings as f64 * dx,
            Layout::Ucpa { radii } => 2.0 * radii.last().copied().unwrap_or(0.0),
        }
    }

    /// Unit normal of the array plane (the element boresight).
    pub fn boresight(&self) -> [f64; 3] {
        match self.layout {
            Layout::Ula { .. } | Layout::Urpa { .. } => [1.0, 0.0, 0.0],
            Layout::Uhpa { .. } | Layout::Ucpa { .. } => [0.0, 0.0, 1.0],
        }
    }

    /// `dir` re-expressed in the element frame, where elevation is the angle
    /// off the boresight. ULA directions are taken in the horizontal plane.
    pub fn local_direction(&self, dir: Direction) -> Direction {
        let u = match self.layout {
            Layout::Ula { .. } => Direction::horizontal(dir.azimuth).unit_vector(),
            _ => dir.unit_vector(),
        };
        // Rotate so that the boresight maps to +z.
        let (x, y, z) = match self.layout {
            Layout::Ula { .. } | Layout::Urpa { .. } => (u[1], u[2], u[0]),
            _ => (u[0], u[1], u[2]),
        };
        let elevation = z.clamp(-1.0, 1.0).acos();
        let azimuth = y.atan2(x);
        Direction::new(azimuth, elevation).expect("finite angles")
    }

    fn phase_of(&self, pos: &[f64; 3], dir: Direction) -> f64 {
        let k = 2.0 * PI / self.wavelength;
        match self.layout {
            Layout::Ula { .. } => k * pos[1] * dir.azimuth.sin(),
            _ => {
                let u = dir.unit_vector();
                k * (pos[0] * u[0] + pos[1] * u[1] + pos[2] * u[2])
            }
        }
    }
}

/// Unit-norm array response vector.
pub fn response_vector(geometry: &ArrayGeometry, dir: Direction, orientation: Orientation) -> CVector {
    let n = geometry.n_elements();
    let scale = 1.0 / (n as f64).sqrt();
    let sign = match orientation {
        Orientation::Transmit => 1.0,
        Orientation::Receive => -1.0,
    };
    let mut v = CVector::zeros(n);
    if let Layout::Ula { d, .. } = geometry.layout {
        // Integer multiples of one phase step keep long arrays accurate.
        let step = 2.0 * PI * d / geometry.wavelength * dir.azimuth.sin();
        for i in 0..n {
            v[i] = cis(sign * i as f64 * step) * scale;
        }
        return v;
    }
    for (i, pos) in geometry.element_positions().iter().enumerate() {
        v[i] = cis(sign * geometry.phase_of(pos, dir)) * scale;
    }
    v
}

/// `λ/2` ULA transmit response `e^{jπ n sinφ}/√N` without a geometry value.
pub fn ula_steering(n: usize, phi: f64) -> CVector {
    let s = phi.sin();
    let scale = 1.0 / (n as f64).sqrt();
    CVector::from_iterator(n, (0..n).map(|i| cis(PI * i as f64 * s) * scale))
}

/// `λ/2` ULA response at a sine-domain coordinate `u = sinφ`.
pub fn ula_steering_sine(n: usize, u: f64) -> CVector {
    let scale = 1.0 / (n as f64).sqrt();
    CVector::from_iterator(n, (0..n).map(|i| cis(PI * i as f64 * u) * scale))
}

/// Normalized element radiation pattern `F(φ, θ)` in the element frame.
#[derive(Debug, Clone, Copy, Default)]
pub enum ElementPattern {
    /// `F ≡ 1`.
    #[default]
    Isotropic,
    /// `cos²θ` on the front hemisphere, zero behind.
    CosineSquared,
    /// Arbitrary nonnegative pattern of `(azimuth, elevation)`.
    Custom(fn(f64, f64) -> f64),
}

impl ElementPattern {
    pub fn eval(&self, dir: Direction) -> f64 {
        match self {
            ElementPattern::Isotropic => 1.0,
            ElementPattern::CosineSquared => {
                if dir.elevation <= FRAC_PI_2 {
                    let c = dir.elevation.cos();
                    c * c
                } else {
                    0.0
                }
            }
            ElementPattern::Custom(f) => f(dir.azimuth, dir.elevation),
        }
    }

    /// Maximum directivity of the pattern.
    pub fn directivity(&self) -> Result<f64> {
        match self {
            ElementPattern::Isotropic => Ok(1.0),
            p => directivity(|az, el| p.eval(Direction { azimuth: az, elevation: el })),
        }
    }
}

const QUAD_AZIMUTH: usize = 720;
const QUAD_ELEVATION: usize = 360;

/// `4π / ∬ F sinθ dθ dφ`, trapezoidal rule on a 720×360 grid.
pub fn directivity<F: Fn(f64, f64) -> f64>(pattern: F) -> Result<f64> {
    const OP: &str = "directivity";
    let hp = 2.0 * PI / QUAD_AZIMUTH as f64;
    let ht = PI / QUAD_ELEVATION as f64;
    let mut total = 0.0;
    for i in 0..=QUAD_AZIMUTH {
        let wp = if i == 0 || i == QUAD_AZIMUTH { 0.5 } else { 1.0 };
        let az = i as f64 * hp;
        for j in 0..=QUAD_ELEVATION {
            let wt = if j == 0 || j == QUAD_ELEVATION { 0.5 } else { 1.0 };
            let el = j as f64 * ht;
            let f = pattern(az, el);
            if !(f >= 0.0) || !f.is_finite() {
                return Err(Error::domain(OP, "pattern must be finite and nonnegative"));
            }
            total += wp * wt * f * el.sin();
        }
    }
    total *= hp * ht;
    if !(total > 0.0) {
        return Err(Error::domain(OP, "pattern integrates to zero"));
    }
    Ok(4.0 * PI / total)
}

/// Element gain `ς·F(φ,θ)·D`.
pub fn element_gain(pattern: &ElementPattern, dir: Direction, efficiency: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::domain("element_gain", "efficiency outside [0, 1]"));
    }
    Ok(efficiency * pattern.eval(dir) * pattern.directivity()?)
}

/// Single-lobe directivity estimate `4π/(θˣ·θʸ)` from half-power widths in
/// radians.
pub fn hpbw_directivity(theta3db_x: f64, theta3db_y: f64) -> Result<f64> {
    for t in [theta3db_x, theta3db_y] {
        if !(t > 0.0 && t < PI) {
            return Err(Error::domain("hpbw_directivity", "beamwidths must lie in (0, π)"));
        }
    }
    Ok(4.0 * PI / (theta3db_x * theta3db_y))
}

/// Array antenna gain in dB: element gain plus `10·log₁₀N`.
pub fn antenna_gain_db(element_gain_db: f64, n_elements: usize) -> Result<f64> {
    if n_elements == 0 {
        return Err(Error::domain("antenna_gain_db", "n_elements must be >= 1"));
    }
    Ok(element_gain_db + 10.0 * (n_elements as f64).log10())
}

/// `2M²/λ` for an aperture `M` in meters.
pub fn rayleigh_distance(aperture: f64, wavelength: f64) -> Result<f64> {
    if !(aperture >= 0.0) {
        return Err(Error::domain("rayleigh_distance", "aperture must be >= 0"));
    }
    check_spacing("rayleigh_distance", "wavelength", wavelength)?;
    Ok(2.0 * aperture * aperture / wavelength)
}

/// Rayleigh distance of an array.
pub fn far_field_distance(geometry: &ArrayGeometry) -> f64 {
    let m = geometry.aperture();
    2.0 * m * m / geometry.wavelength
}

pub fn is_far_field(geometry: &ArrayGeometry, distance: f64) -> bool {
    distance > far_field_distance(geometry)
}

/// Brute-force phase of every element, for cross-checks.
#[doc(hidden)]
pub fn geometric_phases(geometry: &ArrayGeometry, dir: Direction) -> Vec<f64> {
    geometry
        .element_positions()
        .iter()
        .map(|p| geometry.phase_of(p, dir))
        .collect()
}
