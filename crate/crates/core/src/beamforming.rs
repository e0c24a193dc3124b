//! Codewords, codebooks and beam-gain analysis for `λ/2` ULAs, plus hybrid
//! precoder projection and spectral efficiency.
//!
//! Angles are radians measured from broadside. Codebook centers are stored
//! in the sine domain `u = sinφ ∈ [−1, 1)`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::ops::Range;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::ula_steering_sine;
use crate::linalg::{cis, frobenius_sq, log2_det_identity_plus, CMatrix, CVector, Complex64};
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-9;

/// Unit-norm complex weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    weights: CVector,
    constant_modulus: bool,
}

impl Codeword {
    /// Validates `‖w‖ = 1` and, when flagged, `|w_i| = 1/√N`.
    pub fn new(weights: CVector, constant_modulus: bool) -> Result<Self> {
        const OP: &str = "Codeword::new";
        let n = weights.len();
        if n == 0 {
            return Err(Error::domain(OP, "empty weight vector"));
        }
        if (weights.norm() - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(OP, "weights must have unit norm"));
        }
        if constant_modulus {
            let m = 1.0 / (n as f64).sqrt();
            if weights.iter().any(|z| (z.norm() - m).abs() > NORM_TOL) {
                return Err(Error::domain(OP, "entries are not constant modulus"));
            }
        }
        Ok(Self {
            weights,
            constant_modulus,
        })
    }

    /// Scales `weights` to unit norm.
    pub fn normalized(weights: CVector) -> Result<Self> {
        let norm = weights.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("Codeword::normalized", "zero or non-finite weights"));
        }
        let weights = weights / Complex64::new(norm, 0.0);
        let n = weights.len();
        let m = 1.0 / (n as f64).sqrt();
        let cm = weights.iter().all(|z| (z.norm() - m).abs() <= NORM_TOL);
        Ok(Self {
            weights,
            constant_modulus: cm,
        })
    }

    /// Transmit steering codeword toward `phi`.
    pub fn steering(n: usize, phi: f64) -> Self {
        Self::steering_sine(n, phi.sin())
    }

    /// Transmit steering codeword at sine coordinate `u`.
    pub fn steering_sine(n: usize, u: f64) -> Self {
        Self {
            weights: ula_steering_sine(n, u),
            constant_modulus: true,
        }
    }

    /// Single active element at full power.
    pub fn omni(n: usize) -> Self {
        let mut weights = CVector::zeros(n);
        weights[0] = Complex64::new(1.0, 0.0);
        Self {
            weights,
            constant_modulus: n == 1,
        }
    }

    pub fn weights(&self) -> &CVector {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_constant_modulus(&self) -> bool {
        self.constant_modulus
    }

    /// Entrywise conjugate: turns a transmit codeword into its receive twin.
    pub fn conjugate(&self) -> Self {
        Self {
            weights: self.weights.map(|z| z.conj()),
            constant_modulus: self.constant_modulus,
        }
    }
}

/// Ordered codeword list with sine-domain centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    codewords: Vec<Codeword>,
    centers: Vec<f64>,
}

impl Codebook {
    pub fn new(codewords: Vec<Codeword>, centers: Vec<f64>) -> Result<Self> {
        if codewords.is_empty() {
            return Err(Error::domain("Codebook::new", "empty codebook"));
        }
        if codewords.len() != centers.len() {
            return Err(Error::dimension("Codebook::new", "one center per codeword"));
        }
        let n = codewords[0].len();
        if codewords.iter().any(|c| c.len() != n) {
            return Err(Error::dimension("Codebook::new", "codeword lengths differ"));
        }
        Ok(Self { codewords, centers })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Number of antennas each codeword drives.
    pub fn n_antennas(&self) -> usize {
        self.codewords[0].len()
    }

    pub fn get(&self, i: usize) -> &Codeword {
        &self.codewords[i]
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    /// Sine-domain beam centers.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Center of codeword `i` as an angle in `[−π/2, π/2]`.
    pub fn center_angle(&self, i: usize) -> f64 {
        self.centers[i].clamp(-1.0, 1.0).asin()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Codeword> {
        self.codewords.iter()
    }

    /// Receive-oriented copy.
    pub fn conjugate(&self) -> Self {
        Self {
            codewords: self.codewords.iter().map(Codeword::conjugate).collect(),
            centers: self.centers.clone(),
        }
    }
}

/// `|sin(Nπx/2) / (N sin(πx/2))|`, well defined at the grating points.
pub fn array_gain_kernel(n: usize, x: f64) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let h = FRAC_PI_2 * x;
    let eps = h - PI * (h / PI).round();
    let nf = n as f64;
    if eps.abs() < 1e-7 {
        return (1.0 - (nf * nf - 1.0) * eps * eps / 6.0).abs();
    }
    ((nf * eps).sin() / (nf * eps.sin())).abs()
}

/// Closed-form normalized gain of a steering beam at `phi` toward `psi`.
pub fn steering_gain(n: usize, phi: f64, psi: f64) -> f64 {
    array_gain_kernel(n, psi.sin() - phi.sin())
}

/// `|cᴴ·a(ψ)|` with `a` the `λ/2` transmit response of the same length.
pub fn array_factor(codeword: &Codeword, probe_angle: f64) -> f64 {
    array_factor_sine(codeword, probe_angle.sin())
}

/// [`array_factor`] at sine coordinate `u`.
pub fn array_factor_sine(codeword: &Codeword, u: f64) -> f64 {
    let step = PI * u;
    let n = codeword.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, w) in codeword.weights.iter().enumerate() {
        acc += w.conj() * cis(step * i as f64);
    }
    acc.norm() / (n as f64).sqrt()
}

/// Probe-grid step for coverage scans.
pub const COVERAGE_RESOLUTION: f64 = PI / 16384.0;

/// Angle intervals in `[−π/2, π/2]` where a gain function reaches `rho`.
///
/// The gain is sampled on a [`COVERAGE_RESOLUTION`] grid, interval edges are
/// refined by bisection, and isolated peaks that touch `rho` between samples
/// are located by golden-section search and reported as degenerate intervals.
pub fn coverage_intervals<G: Fn(f64) -> f64>(gain: G, rho: f64) -> Result<Vec<(f64, f64)>> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::domain("beam_coverage", "rho must lie in (0, 1]"));
    }
    let steps = (PI / COVERAGE_RESOLUTION).round() as usize;
    let grid = |i: usize| -FRAC_PI_2 + i as f64 * COVERAGE_RESOLUTION;
    let values: Vec<f64> = (0..=steps).map(|i| gain(grid(i))).collect();
    let inside = |v: f64| v >= rho;
    let bisect = |mut lo: f64, mut hi: f64, lo_in: bool| {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if inside(gain(mid)) == lo_in {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo_in {
            lo
        } else {
            hi
        }
    };

    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..=steps {
        let now = inside(values[i]);
        match (start, now) {
            (None, true) => {
                start = Some(if i == 0 {
                    grid(0)
                } else {
                    bisect(grid(i - 1), grid(i), false)
                });
            }
            (Some(s), false) => {
                out.push((s, bisect(grid(i - 1), grid(i), true)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, FRAC_PI_2));
    }

    // Peaks that fall between samples.
    for i in 1..steps {
        let v = values[i];
        if inside(v) || v < values[i - 1] || v < values[i + 1] {
            continue;
        }
        let (p, g) = golden_max(&gain, grid(i - 1), grid(i + 1));
        if g >= rho - 1e-12 {
            out.push((p, p));
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

fn golden_max<G: Fn(f64) -> f64>(f: &G, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Coverage of a codeword at threshold `rho`.
pub fn beam_coverage(codeword: &Codeword, rho: f64) -> Result<Vec<(f64, f64)>> {
    coverage_intervals(|psi| array_factor(codeword, psi), rho)
}

/// Total measure of a set of intervals.
pub fn beamwidth(intervals: &[(f64, f64)]) -> f64 {
    intervals.iter().map(|(a, b)| b - a).sum()
}

/// One-side worst-case gain of an `n_beams` steering codebook on `n_antennas`.
pub fn coverage_threshold(n_antennas: usize, n_beams: usize) -> Result<f64> {
    let na = n_antennas as f64;
    if n_antennas == 0 {
        return Err(Error::domain("coverage_threshold", "n_antennas must be >= 1"));
    }
    if n_beams == n_antennas {
        Ok(1.0 / (na * (PI / (2.0 * na)).sin()))
    } else if n_beams == 2 * n_antennas {
        Ok(2f64.sqrt() / (2.0 * na * (PI / (4.0 * na)).sin()))
    } else {
        Err(Error::domain(
            "coverage_threshold",
            alloc::format!("n_beams must be N_a or 2N_a, got {n_beams} for N_a = {n_antennas}"),
        ))
    }
}

/// Sine-domain cell midpoints `−1 + (2i+1)/n`.
pub fn sector_centers(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + (2 * i + 1) as f64 / n as f64).collect()
}

/// `n_beams` transmit steering codewords centered on uniform sine cells.
pub fn steering_codebook(n_antennas: usize, n_beams: usize) -> Result<Codebook> {
    if n_antennas == 0 || n_beams == 0 {
        return Err(Error::domain("steering_codebook", "counts must be >= 1"));
    }
    let centers = sector_centers(n_beams);
    let codewords = centers
        .iter()
        .map(|&u| Codeword::steering_sine(n_antennas, u))
        .collect();
    Codebook::new(codewords, centers)
}

/// M-ary tree of codebooks; stage `s` (1-based) holds `Mˢ` beams.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalCodebook {
    m_ary: usize,
    stages: Vec<Codebook>,
    active: Vec<usize>,
}

impl HierarchicalCodebook {
    pub fn m_ary(&self) -> usize {
        self.m_ary
    }

    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    /// Codebook of stage `s ∈ 1..=depth`.
    pub fn stage(&self, s: usize) -> &Codebook {
        &self.stages[s - 1]
    }

    pub fn leaves(&self) -> &Codebook {
        self.stages.last().expect("depth >= 1")
    }

    /// Number of active elements in stage `s`.
    pub fn active_elements(&self, s: usize) -> usize {
        self.active[s - 1]
    }

    /// Coverage threshold of stage `s`: the [`array_factor`] of its beams at
    /// the sector edge. A sub-array beam on `n` of `N_a` elements peaks at
    /// `√(n/N_a)`, which scales the threshold accordingly.
    pub fn threshold(&self, s: usize) -> f64 {
        let sectors = self.m_ary.pow(s as u32) as f64;
        let n = self.active[s - 1];
        let peak = (n as f64 / self.n_antennas() as f64).sqrt();
        peak * array_gain_kernel(n, 1.0 / sectors)
    }

    /// Indices in stage `s + 1` of the children of node `index` in stage `s`.
    pub fn children(&self, index: usize) -> Range<usize> {
        index * self.m_ary..(index + 1) * self.m_ary
    }

    pub fn n_antennas(&self) -> usize {
        self.leaves().n_antennas()
    }

    /// Receive-oriented copy.
    pub fn conjugate(&self) -> Self {
        Self {
            m_ary: self.m_ary,
            stages: self.stages.iter().map(Codebook::conjugate).collect(),
            active: self.active.clone(),
        }
    }
}

/// Tree codebook over `Mˢ` leaves on `n_antennas` elements.
///
/// Stage `s` steers a contiguous sub-array of the first
/// `max(1, N_a / M^(S−s))` elements to each sector center and leaves the rest
/// silent, so its beams widen by the same factor the sectors do.
pub fn hierarchical_codebook(n_antennas: usize, m_ary: usize, depth: usize) -> Result<HierarchicalCodebook> {
    const OP: &str = "hierarchical_codebook";
    if m_ary < 2 {
        return Err(Error::domain(OP, "M must be >= 2"));
    }
    if depth == 0 {
        return Err(Error::domain(OP, "depth must be >= 1"));
    }
    if n_antennas == 0 {
        return Err(Error::domain(OP, "n_antennas must be >= 1"));
    }
    let mut stages = Vec::with_capacity(depth);
    let mut active = Vec::with_capacity(depth);
    for s in 1..=depth {
        let sectors = m_ary
            .checked_pow(s as u32)
            .ok_or_else(|| Error::domain(OP, "tree too large"))?;
        let shrink = m_ary.pow((depth - s) as u32);
        let n_active = (n_antennas / shrink).max(1);
        let centers = sector_centers(sectors);
        let codewords = centers
            .iter()
            .map(|&u| {
                let mut w = CVector::zeros(n_antennas);
                let sub = ula_steering_sine(n_active, u);
                w.rows_mut(0, n_active).copy_from(&sub);
                Codeword {
                    weights: w,
                    constant_modulus: n_active == n_antennas,
                }
            })
            .collect();
        stages.push(Codebook::new(codewords, centers)?);
        active.push(n_active);
    }
    Ok(HierarchicalCodebook {
        m_ary,
        stages,
        active,
    })
}

/// Hybrid precoder connection pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridKind {
    Fully,
    Partially,
    Dynamic,
}

/// Analog network layout: `N_t` antennas behind `N_RF` chains.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridArchitecture {
    kind: HybridKind,
    n_antennas: usize,
    n_rf: usize,
    /// Dynamic only: RF chain each antenna is switched to.
    switch: Option<Vec<usize>>,
}

impl HybridArchitecture {
    pub fn new(kind: HybridKind, n_antennas: usize, n_rf: usize) -> Result<Self> {
        const OP: &str = "HybridArchitecture::new";
        if n_rf == 0 || n_antennas == 0 {
            return Err(Error::domain(OP, "counts must be >= 1"));
        }
        if n_rf > n_antennas {
            return Err(Error::domain(OP, "more RF chains than antennas"));
        }
        if kind == HybridKind::Partially && n_antennas % n_rf != 0 {
            return Err(Error::domain(OP, "N_t must be divisible by N_RF"));
        }
        let switch = (kind == HybridKind::Dynamic)
            .then(|| (0..n_antennas).map(|i| i * n_rf / n_antennas).collect());
        Ok(Self {
            kind,
            n_antennas,
            n_rf,
            switch,
        })
    }

    /// Dynamic architecture from an `N_t × N_RF` Boolean switch matrix.
    pub fn dynamic_with_switch(switch_matrix: &[Vec<bool>]) -> Result<Self> {
        const OP: &str = "HybridArchitecture::dynamic_with_switch";
        let n_antennas = switch_matrix.len();
        let n_rf = switch_matrix.first().map(Vec::len).unwrap_or(0);
        let mut arch = Self::new(HybridKind::Dynamic, n_antennas, n_rf)?;
        let mut switch = Vec::with_capacity(n_antennas);
        for (i, row) in switch_matrix.iter().enumerate() {
            if row.len() != n_rf {
                return Err(Error::dimension(OP, "ragged switch matrix"));
            }
            let on: Vec<usize> = (0..n_rf).filter(|&k| row[k]).collect();
            if on.len() != 1 {
                return Err(Error::domain(
                    OP,
                    alloc::format!("switch row {i} must contain exactly one true entry"),
                ));
            }
            switch.push(on[0]);
        }
        arch.switch = Some(switch);
        Ok(arch)
    }

    pub fn kind(&self) -> HybridKind {
        self.kind
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    /// Boolean switch matrix `W_S` (dynamic only).
    pub fn switch_matrix(&self) -> Option<Vec<Vec<bool>>> {
        self.switch.as_ref().map(|s| {
            s.iter()
                .map(|&k| (0..self.n_rf).map(|j| j == k).collect())
                .collect()
        })
    }

    fn block_of(&self, antenna: usize) -> usize {
        antenna / (self.n_antennas / self.n_rf)
    }
}

/// Result of [`project_hybrid`].
#[derive(Debug, Clone)]
pub struct HybridSolution {
    /// `N_t × N_RF` analog precoder.
    pub analog: CMatrix,
    /// `N_RF × N_s` digital precoder.
    pub digital: CMatrix,
    /// `‖target − analog·digital‖_F`.
    pub residual: f64,
    /// Residual after initialization and after every iteration.
    pub trace: Vec<f64>,
    /// Dynamic only: final antenna-to-chain assignment.
    pub switch: Option<Vec<usize>>,
}

/// Options for [`project_hybrid`].
#[derive(Debug, Clone)]
pub struct HybridOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Warm start for the analog matrix; must satisfy the architecture.
    pub initial_analog: Option<CMatrix>,
}

impl Default for HybridOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-8,
            initial_analog: None,
        }
    }
}

fn least_squares(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * a.nrows().max(a.ncols()) as f64;
    svd.solve(b, eps).expect("U and V were computed")
}

fn residual_of(target: &CMatrix, a: &CMatrix, d: &CMatrix) -> f64 {
    frobenius_sq(&(target - a * d)).sqrt()
}

/// Column `k` of the unitary DFT matrix, scaled to modulus `c`.
fn dft_column(n: usize, k: usize, c: f64) -> impl Iterator<Item = Complex64> {
    (0..n).map(move |i| cis(2.0 * PI * (i * k) as f64 / n as f64) * c)
}

fn phase_of(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

fn initial_fully(target: &CMatrix, n_rf: usize, c: f64) -> CMatrix {
    let nt = target.nrows();
    let ns = target.ncols();
    let mut a = CMatrix::zeros(nt, n_rf);
    if n_rf == nt {
        for k in 0..n_rf {
            for (i, z) in dft_column(nt, k, c).enumerate() {
                a[(i, k)] = z;
            }
        }
        return a;
    }
    if n_rf >= 2 * ns {
        // Each target column is the sum of two constant-modulus vectors.
        for s in 0..ns {
            let col = target.column(s);
            let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let scale = if peak > 0.0 { 2.0 * c / peak } else { 1.0 };
            for i in 0..nt {
                let t = col[i] * scale;
                let mag = (t.norm() / (2.0 * c)).min(1.0);
                let delta = mag.acos();
                let base = t.arg();
                a[(i, 2 * s)] = cis(base + delta) * c;
                a[(i, 2 * s + 1)] = cis(base - delta) * c;
            }
        }
        for k in 2 * ns..n_rf {
            for (i, z) in dft_column(nt, k, c).enumerate() {
                a[(i, k)] = z;
            }
        }
        return a;
    }
    let svd = target.clone().svd(true, false);
    let u = svd.u.expect("requested");
    for k in 0..n_rf {
        if k < u.ncols() {
            for i in 0..nt {
                a[(i, k)] = phase_of(u[(i, k)]) * c;
            }
        } else {
            for (i, z) in dft_column(nt, k, c).enumerate() {
                a[(i, k)] = z;
            }
        }
    }
    a
}

fn initial_partial(target: &CMatrix, arch: &HybridArchitecture, c: f64) -> CMatrix {
    let nt = target.nrows();
    let mut a = CMatrix::zeros(nt, arch.n_rf);
    let svd = target.clone().svd(true, false);
    let u = svd.u.expect("requested");
    for i in 0..nt {
        let k = arch.block_of(i);
        a[(i, k)] = phase_of(u[(i, 0)]) * c;
    }
    a
}

fn check_structure(a: &CMatrix, arch: &HybridArchitecture, c: f64) -> Result<Option<Vec<usize>>> {
    const OP: &str = "project_hybrid";
    if a.nrows() != arch.n_antennas || a.ncols() != arch.n_rf {
        return Err(Error::dimension(OP, "initial analog matrix has the wrong shape"));
    }
    let mut assignment = Vec::with_capacity(a.nrows());
    for i in 0..a.nrows() {
        let nonzero: Vec<usize> = (0..a.ncols()).filter(|&k| a[(i, k)].norm() > 0.0).collect();
        let ok_mod = nonzero.iter().all(|&k| (a[(i, k)].norm() - c).abs() < 1e-9);
        let ok = match arch.kind {
            HybridKind::Fully => nonzero.len() == a.ncols(),
            HybridKind::Partially => nonzero == [arch.block_of(i)],
            HybridKind::Dynamic => nonzero.len() == 1,
        };
        if !ok || !ok_mod {
            return Err(Error::domain(OP, "initial analog matrix violates the architecture"));
        }
        assignment.push(nonzero[0]);
    }
    Ok((arch.kind == HybridKind::Dynamic).then_some(assignment))
}

/// Factor `target ≈ F_AB·F_DP` under the architecture's analog constraints.
///
/// Alternating minimization: `F_DP` by least squares, then an entrywise
/// phase update of `F_AB` (for the dynamic layout each antenna is also
/// switched to the chain that minimizes its row residual). Analog entries
/// have modulus `1/√N_t`.
pub fn project_hybrid(target: &CMatrix, arch: &HybridArchitecture, options: &HybridOptions) -> Result<HybridSolution> {
    const OP: &str = "project_hybrid";
    let nt = arch.n_antennas;
    let n_rf = arch.n_rf;
    if target.nrows() != nt {
        return Err(Error::dimension(
            OP,
            alloc::format!("target has {} rows, architecture has {nt} antennas", target.nrows()),
        ));
    }
    if target.ncols() == 0 {
        return Err(Error::domain(OP, "target has no streams"));
    }
    let c = 1.0 / (nt as f64).sqrt();

    let (mut a, mut switch) = match &options.initial_analog {
        Some(a0) => {
            let sw = check_structure(a0, arch, c)?;
            (a0.clone(), sw)
        }
        None => match arch.kind {
            HybridKind::Fully => (initial_fully(target, n_rf, c), None),
            HybridKind::Partially => (initial_partial(target, arch, c), None),
            HybridKind::Dynamic => {
                // Start from the best block-diagonal solution when it exists.
                let start = if nt % n_rf == 0 {
                    let part = HybridArchitecture::new(HybridKind::Partially, nt, n_rf)?;
                    let opts = HybridOptions {
                        max_iters: options.max_iters,
                        tol: options.tol,
                        initial_analog: None,
                    };
                    project_hybrid(target, &part, &opts)?
                    .analog
                } else {
                    let mut a = CMatrix::zeros(nt, n_rf);
                    let sw = arch.switch.as_ref().expect("dynamic");
                    let svd = target.clone().svd(true, false);
                    let u = svd.u.expect("requested");
                    for i in 0..nt {
                        a[(i, sw[i])] = phase_of(u[(i, 0)]) * c;
                    }
                    a
                };
                let sw = check_structure(&start, arch, c)?;
                (start, sw)
            }
        },
    };

    let mut d = least_squares(&a, target);
    let mut residual = residual_of(target, &a, &d);
    let mut trace = alloc::vec![residual];
    for _ in 0..options.max_iters {
        let mut a_next = a.clone();
        let mut switch_next = switch.clone();
        update_analog(target, &mut a_next, &d, arch, c, switch_next.as_mut());
        let d_next = least_squares(&a_next, target);
        let next = residual_of(target, &a_next, &d_next);
        if next > residual {
            // Only round-off can get here; keep the better iterate.
            break;
        }
        let improvement = residual - next;
        let previous = residual;
        a = a_next;
        d = d_next;
        switch = switch_next;
        residual = next;
        trace.push(residual);
        if residual == 0.0 || improvement <= options.tol * previous {
            break;
        }
    }
    Ok(HybridSolution {
        analog: a,
        digital: d,
        residual,
        trace,
        switch,
    })
}

fn update_analog(
    target: &CMatrix,
    a: &mut CMatrix,
    d: &CMatrix,
    arch: &HybridArchitecture,
    c: f64,
    switch: Option<&mut Vec<usize>>,
) {
    let nt = target.nrows();
    let n_rf = arch.n_rf;
    let ns = target.ncols();
    match arch.kind {
        HybridKind::Fully => {
            for i in 0..nt {
                // Running row residual r = T_i − A_i·D.
                let mut r: Vec<Complex64> = (0..ns)
                    .map(|s| target[(i, s)] - (0..n_rf).map(|k| a[(i, k)] * d[(k, s)]).sum::<Complex64>())
                    .collect();
                for k in 0..n_rf {
                    for s in 0..ns {
                        r[s] += a[(i, k)] * d[(k, s)];
                    }
                    let corr: Complex64 = (0..ns).map(|s| r[s] * d[(k, s)].conj()).sum();
                    let z = phase_of(corr) * c;
                    a[(i, k)] = z;
                    for s in 0..ns {
                        r[s] -= z * d[(k, s)];
                    }
                }
            }
        }
        HybridKind::Partially => {
            for i in 0..nt {
                let k = arch.block_of(i);
                let corr: Complex64 = (0..ns).map(|s| target[(i, s)] * d[(k, s)].conj()).sum();
                a[(i, k)] = phase_of(corr) * c;
            }
        }
        HybridKind::Dynamic => {
            let switch = switch.expect("dynamic layout carries a switch vector");
            for i in 0..nt {
                let row_energy: f64 = (0..ns).map(|s| target[(i, s)].norm_sqr()).sum();
                let mut best = (f64::INFINITY, 0usize, Complex64::new(0.0, 0.0));
                for k in 0..n_rf {
                    let corr: Complex64 = (0..ns).map(|s| target[(i, s)] * d[(k, s)].conj()).sum();
                    let dk: f64 = (0..ns).map(|s| d[(k, s)].norm_sqr()).sum();
                    let cost = row_energy - 2.0 * c * corr.norm() + c * c * dk;
                    if cost < best.0 {
                        best = (cost, k, phase_of(corr) * c);
                    }
                }
                // Keep the current connection unless another is strictly better.
                let cur = switch[i];
                let corr: Complex64 = (0..ns).map(|s| target[(i, s)] * d[(cur, s)].conj()).sum();
                let dk: f64 = (0..ns).map(|s| d[(cur, s)].norm_sqr()).sum();
                let cur_cost = row_energy - 2.0 * c * corr.norm() + c * c * dk;
                let (k, z) = if best.0 < cur_cost { (best.1, best.2) } else { (cur, phase_of(corr) * c) };
                for j in 0..n_rf {
                    a[(i, j)] = Complex64::new(0.0, 0.0);
                }
                a[(i, k)] = z;
                switch[i] = k;
            }
        }
    }
}

/// `log₂ det(I + P/(σ²N_s)·H F Fᴴ Hᴴ)` for a precoder with `‖F‖_F² = N_s`.
pub fn spectral_efficiency(h_eff: &CMatrix, f: &CMatrix, power: f64, noise_var: f64, n_streams: usize) -> Result<f64> {
    const OP: &str = "spectral_efficiency";
    if h_eff.ncols() != f.nrows() {
        return Err(Error::dimension(OP, "H and F do not chain"));
    }
    if n_streams == 0 || f.ncols() != n_streams {
        return Err(Error::dimension(OP, "F must have n_streams columns"));
    }
    if !(power >= 0.0) || !(noise_var > 0.0) {
        return Err(Error::domain(OP, "power must be >= 0 and noise variance > 0"));
    }
    let energy = frobenius_sq(f);
    if (energy - n_streams as f64).abs() > 1e-8 {
        return Err(Error::domain(
            OP,
            alloc::format!("‖F‖² = {energy}, expected {n_streams}"),
        ));
    }
    let hf = h_eff * f;
    Ok(log2_det_identity_plus(power / (noise_var * n_streams as f64), &hf))
}
