//! IRS-assisted links: effective channel, alternating optimization of the
//! precoder and reflection phases, reflection codewords, and the IRS beam
//! training protocols.
//!
//! The reflection matrix is `Θ = β·diag(e^{−jθ₁}, …)`. All arrays are `λ/2`
//! ULAs with transmit response `a(φ)_n = e^{jπ n sinφ}/√N`; receive responses
//! are conjugated. At the IRS a wave is described by its propagation
//! direction, so `Θ·a(φ_in) ∝ a(φ_out)` steers an incoming profile `a(φ_in)`
//! into an outgoing one. The reverse link is the transpose of the forward
//! link and is bridged by the same codeword.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::beamforming::{Codeword, HierarchicalCodebook};
use crate::geometry::{ula_steering, ArrayGeometry, ArrayKind};
use crate::linalg::{cis, complex_gaussian, log2_det_identity_plus, outer, wrap_phase, CMatrix, CVector, Complex64};
use crate::{Error, Result};

/// Reflection phases `θ_i ∈ [0, 2π)` and common amplitude `β ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsState {
    phases: Vec<f64>,
    amplitude: f64,
}

impl IrsState {
    /// Wraps the phases into `[0, 2π)`.
    pub fn new(phases: Vec<f64>, amplitude: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::domain("IrsState::new", "amplitude outside [0, 1]"));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("IrsState::new", "phases must be finite"));
        }
        Ok(Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
            amplitude,
        })
    }

    /// All-zero phases at amplitude `β`.
    pub fn uniform(n: usize, amplitude: f64) -> Result<Self> {
        Self::new(alloc::vec![0.0; n], amplitude)
    }

    /// An IRS that reflects nothing.
    pub fn off(n: usize) -> Self {
        Self {
            phases: alloc::vec![0.0; n],
            amplitude: 0.0,
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Diagonal of `Θ`: `β·e^{−jθ_i}`.
    pub fn coefficients(&self) -> CVector {
        CVector::from_iterator(
            self.phases.len(),
            self.phases.iter().map(|&t| cis(-t) * self.amplitude),
        )
    }

    /// `Θ` as a dense matrix.
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.coefficients())
    }

    /// `Θ·x`.
    pub fn apply(&self, x: &CVector) -> CVector {
        self.coefficients().component_mul(x)
    }
}

/// Channels of a point-to-point IRS-assisted link.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsScenario {
    /// `N_r × N_t` direct channel.
    pub h_los: CMatrix,
    /// `N_IRS × N_t` BS-to-IRS channel.
    pub m: CMatrix,
    /// `N_r × N_IRS` IRS-to-user channel.
    pub n: CMatrix,
    pub power: f64,
    pub noise_var: f64,
    pub n_streams: usize,
}

impl IrsScenario {
    pub fn validate(&self) -> Result<()> {
        const OP: &str = "IrsScenario";
        let (nr, nt) = self.h_los.shape();
        if self.m.ncols() != nt || self.n.nrows() != nr || self.n.ncols() != self.m.nrows() {
            return Err(Error::dimension(
                OP,
                alloc::format!(
                    "H is {nr}×{nt}, M is {}×{}, N is {}×{}",
                    self.m.nrows(),
                    self.m.ncols(),
                    self.n.nrows(),
                    self.n.ncols()
                ),
            ));
        }
        if self.n_streams == 0 || self.n_streams > nt.min(nr) {
            return Err(Error::domain(OP, "n_streams must lie in 1..=min(N_t, N_r)"));
        }
        if !(self.power >= 0.0) || !(self.noise_var > 0.0) {
            return Err(Error::domain(OP, "power must be >= 0 and noise variance > 0"));
        }
        Ok(())
    }

    pub fn n_irs(&self) -> usize {
        self.m.nrows()
    }

    /// `P/(σ²N_s)`.
    fn snr_scale(&self) -> f64 {
        self.power / (self.noise_var * self.n_streams as f64)
    }
}

/// `H_eff = N·Θ·M + H_LoS`.
pub fn effective_channel(scenario: &IrsScenario, irs: &IrsState) -> Result<CMatrix> {
    scenario.validate()?;
    if irs.len() != scenario.n_irs() {
        return Err(Error::dimension(
            "effective_channel",
            alloc::format!("IRS state has {} elements, channels have {}", irs.len(), scenario.n_irs()),
        ));
    }
    let mut h = scenario.h_los.clone();
    if irs.amplitude() > 0.0 && !irs.is_empty() {
        let coeffs = irs.coefficients();
        let scaled_n = CMatrix::from_fn(scenario.n.nrows(), scenario.n.ncols(), |r, c| scenario.n[(r, c)] * coeffs[c]);
        h += scaled_n * &scenario.m;
    }
    Ok(h)
}

/// Options for [`ao_joint_beamforming`].
#[derive(Debug, Clone, PartialEq)]
pub struct AoOptions {
    pub max_iters: usize,
    /// Stop once the relative objective gain of an iteration drops below this.
    pub tol: f64,
    /// Reflection amplitude `β`.
    pub amplitude: f64,
    /// Starting phases; zeros when absent.
    pub initial_phases: Option<Vec<f64>>,
    /// Coordinate sweeps over the IRS elements per outer iteration.
    pub sweeps: usize,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-9,
            amplitude: 1.0,
            initial_phases: None,
            sweeps: 2,
        }
    }
}

/// Result of [`ao_joint_beamforming`].
#[derive(Debug, Clone)]
pub struct AoSolution {
    /// `N_t × N_s` precoder with `‖F‖_F² = N_s`.
    pub precoder: CMatrix,
    pub irs: IrsState,
    /// Objective after the initial precoder step and after every iteration.
    pub trace: Vec<f64>,
}

/// Top-`N_s` right singular vectors of `h`.
pub fn eigen_precoder(h: &CMatrix, n_streams: usize) -> CMatrix {
    let nt = h.ncols();
    // Right singular vectors are the eigenvectors of HᴴH; a thin SVD of Hᴴ
    // gives them as left vectors even when N_r < N_t.
    let svd = h.adjoint().svd(true, false);
    let u = svd.u.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let mut f = CMatrix::zeros(nt, n_streams);
    for (s, &k) in order.iter().take(n_streams).enumerate() {
        f.set_column(s, &u.column(k));
    }
    // Fill missing directions (N_s > rank of the thin SVD) with an
    // orthonormal completion.
    if order.len() < n_streams {
        complete_orthonormal(&mut f, order.len());
    }
    f
}

fn complete_orthonormal(f: &mut CMatrix, filled: usize) {
    let nt = f.nrows();
    let mut col = filled;
    for e in 0..nt {
        if col == f.ncols() {
            break;
        }
        let mut v = CVector::zeros(nt);
        v[e] = Complex64::new(1.0, 0.0);
        for j in 0..col {
            let c = f.column(j).dotc(&v);
            v -= f.column(j) * c;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            f.set_column(col, &(v / Complex64::new(norm, 0.0)));
            col += 1;
        }
    }
}

/// `log₂det(I + P/(σ²N_s)·H_eff F Fᴴ H_effᴴ)`.
pub fn ao_objective(scenario: &IrsScenario, precoder: &CMatrix, irs: &IrsState) -> Result<f64> {
    let h = effective_channel(scenario, irs)?;
    Ok(log2_det_identity_plus(scenario.snr_scale(), &(h * precoder)))
}

/// Jointly optimizes the precoder and IRS phases.
///
/// Each iteration runs `sweeps` coordinate sweeps over the IRS elements, then
/// sets `F` to the top-`N_s` right singular vectors of `H_eff`. For a single
/// element the objective is `const + 2c·Re(z·p)` in `z = e^{−jθ_i}`, so the
/// best phase is closed form; an update is kept only if the objective does
/// not drop, which makes the trace monotone.
pub fn ao_joint_beamforming(scenario: &IrsScenario, options: &AoOptions) -> Result<AoSolution> {
    const OP: &str = "ao_joint_beamforming";
    scenario.validate()?;
    let n_irs = scenario.n_irs();
    let phases = match &options.initial_phases {
        Some(p) if p.len() != n_irs => {
            return Err(Error::dimension(OP, "initial phases do not match the IRS size"));
        }
        Some(p) => p.clone(),
        None => alloc::vec![0.0; n_irs],
    };
    let mut irs = IrsState::new(phases, options.amplitude)?;
    let c = scenario.snr_scale();
    let ns = scenario.n_streams;

    let mut h_eff = effective_channel(scenario, &irs)?;
    let mut f = eigen_precoder(&h_eff, ns);
    let mut objective = log2_det_identity_plus(c, &(&h_eff * &f));
    let mut trace = alloc::vec![objective];
    let nr = scenario.h_los.nrows();
    let beta = irs.amplitude;

    for _ in 0..options.max_iters {
        let start = objective;
        if beta > 0.0 {
            for _ in 0..options.sweeps {
                for i in 0..n_irs {
                    let n_i = scenario.n.column(i).into_owned();
                    let m_i = scenario.m.row(i).into_owned();
                    let z_old = cis(-irs.phases[i]);
                    let a = &h_eff - outer(&n_i, &m_i.adjoint()) * (z_old * beta);
                    let g = &a * &f;
                    let r = (&m_i * &f).transpose();
                    let u = &n_i * Complex64::new(beta, 0.0);
                    let x = &g * r.map(|v| v.conj());
                    let q = CMatrix::identity(nr, nr) + (&g * g.adjoint()) * Complex64::new(c, 0.0);
                    let chol = match q.clone().cholesky() {
                        Some(ch) => ch,
                        None => continue,
                    };
                    let qinv_u = chol.solve(&u);
                    let p21 = x.dotc(&qinv_u);
                    if p21.norm() == 0.0 {
                        continue;
                    }
                    let z = p21.conj() / p21.norm();
                    let theta = wrap_phase(-z.arg());
                    let candidate_h = &a + outer(&n_i, &m_i.adjoint()) * (z * beta);
                    let candidate = log2_det_identity_plus(c, &(&candidate_h * &f));
                    if candidate >= objective {
                        irs.phases[i] = theta;
                        h_eff = candidate_h;
                        objective = candidate;
                    }
                }
            }
        }
        let f_next = eigen_precoder(&h_eff, ns);
        let next = log2_det_identity_plus(c, &(&h_eff * &f_next));
        if next >= objective {
            f = f_next;
            objective = next;
        }
        trace.push(objective);
        let gain = objective - start;
        if gain <= options.tol * start.abs().max(1e-300) {
            break;
        }
    }
    Ok(AoSolution {
        precoder: f,
        irs,
        trace,
    })
}

fn ula_irs_check(op: &'static str, g: &ArrayGeometry) -> Result<(usize, f64)> {
    if g.kind() != ArrayKind::Ula {
        return Err(Error::domain(op, "IRS codewords need a ULA surface"));
    }
    let d = g.ula_spacing().expect("ULA");
    Ok((g.n_elements(), d / g.wavelength()))
}

/// Return-mode codeword: `θ_n = 2π n (d/λ)·2 sinφ_in`, so that
/// `Θ·a(φ_in) ∝ a(φ_in + π)`.
pub fn theta_return(phi_in: f64, irs_geometry: &ArrayGeometry) -> Result<IrsState> {
    let (n, ratio) = ula_irs_check("theta_return", irs_geometry)?;
    let s = phi_in.sin();
    IrsState::new((0..n).map(|i| 2.0 * PI * i as f64 * ratio * 2.0 * s).collect(), 1.0)
}

/// Direction-mode codeword: `θ_n = 2π n (d/λ)(sinφ_in − sinφ_out)`, so that
/// `Θ·a(φ_in) ∝ a(φ_out)`.
pub fn theta_direct(phi_in: f64, phi_out: f64, irs_geometry: &ArrayGeometry) -> Result<IrsState> {
    let (n, ratio) = ula_irs_check("theta_direct", irs_geometry)?;
    let ds = phi_in.sin() - phi_out.sin();
    IrsState::new((0..n).map(|i| 2.0 * PI * i as f64 * ratio * ds).collect(), 1.0)
}

/// Direction codeword for a sine difference `δ = sinφ_in − sinφ_out` on a
/// `λ/2` surface.
pub fn theta_direct_sine(n_irs: usize, delta: f64) -> IrsState {
    IrsState {
        phases: (0..n_irs).map(|i| wrap_phase(PI * i as f64 * delta)).collect(),
        amplitude: 1.0,
    }
}

/// The `2N+1` direction codewords `δ_k = 2k/N`, `k = −N, …, N`. Every sine
/// difference between two points of an `N`-point sector grid is among them.
pub fn irs_direction_codewords(n_irs: usize, n_grid: usize) -> Vec<IrsState> {
    let n = n_grid as i64;
    (-n..=n)
        .map(|k| theta_direct_sine(n_irs, 2.0 * k as f64 / n_grid as f64))
        .collect()
}

/// Sine difference of codeword `index` in [`irs_direction_codewords`].
pub fn irs_codeword_delta(index: usize, n_grid: usize) -> f64 {
    2.0 * (index as f64 - n_grid as f64) / n_grid as f64
}

/// Path angles of an IRS-assisted link (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrsPaths {
    /// BS departure toward the user.
    pub bs_h: f64,
    /// User arrival from the BS.
    pub user_h: f64,
    /// BS departure toward the IRS.
    pub bs_m: f64,
    /// Incoming profile at the IRS from the BS.
    pub irs_m: f64,
    /// Departure from the IRS toward the user.
    pub irs_n: f64,
    /// User arrival from the IRS.
    pub user_n: f64,
}

/// Single-path geometric IRS link between `λ/2` ULAs.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsLink {
    pub n_bs: usize,
    pub n_user: usize,
    pub n_irs: usize,
    pub paths: IrsPaths,
    pub alpha_h: Complex64,
    pub alpha_m: Complex64,
    pub alpha_n: Complex64,
}

fn rx(n: usize, phi: f64) -> CVector {
    ula_steering(n, phi).map(|z| z.conj())
}

impl IrsLink {
    /// `α_H·a_r,U(φ_UH)·a_t,B(φ_BH)ᴴ`.
    pub fn direct(&self) -> CMatrix {
        outer(&rx(self.n_user, self.paths.user_h), &ula_steering(self.n_bs, self.paths.bs_h)) * self.alpha_h
    }

    /// `α_M·a(φ_RM)·a_t,B(φ_BM)ᴴ`.
    pub fn bs_to_irs(&self) -> CMatrix {
        outer(&ula_steering(self.n_irs, self.paths.irs_m), &ula_steering(self.n_bs, self.paths.bs_m)) * self.alpha_m
    }

    /// `α_N·a_r,U(φ_UN)·a_t,R(φ_RN)ᴴ`.
    pub fn irs_to_user(&self) -> CMatrix {
        outer(&rx(self.n_user, self.paths.user_n), &ula_steering(self.n_irs, self.paths.irs_n)) * self.alpha_n
    }

    pub fn scenario(&self, power: f64, noise_var: f64, n_streams: usize) -> IrsScenario {
        IrsScenario {
            h_los: self.direct(),
            m: self.bs_to_irs(),
            n: self.irs_to_user(),
            power,
            noise_var,
            n_streams,
        }
    }
}

/// Codeword used by a terminal during one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamLabel {
    Omni,
    /// Stage (1-based; the leaf stage for narrow beams) and index.
    Beam { stage: usize, index: usize },
}

/// One protocol time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsSlot {
    pub phase: usize,
    pub slot: usize,
    /// Index into the IRS codeword sweep of this phase, if the IRS is on.
    pub irs_codeword: Option<usize>,
    pub tx_beam: BeamLabel,
    pub rx_beam: BeamLabel,
    pub power: f64,
}

/// Angles found by an IRS training protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrsAngleEstimates {
    pub bs_h: f64,
    pub user_h: f64,
    pub bs_m: f64,
    pub user_n: f64,
    /// Known only when the protocol resolves it (see the protocol docs).
    pub irs_m: Option<f64>,
    pub irs_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrsTrainingOutcome {
    pub angles: IrsAngleEstimates,
    /// Leaf indices of the BS and user narrow beams.
    pub bs_h_index: usize,
    pub user_h_index: usize,
    pub bs_m_index: usize,
    pub user_n_index: usize,
    /// Selected IRS codeword (index into the protocol's IRS sweep).
    pub irs_codeword: usize,
    /// Sine difference `sinφ_RM − sinφ_RN` bridged by that codeword.
    pub irs_delta: f64,
    pub tests_used: usize,
    pub trace: Vec<IrsSlot>,
}

/// Forward/reverse channels of a link under a given IRS state.
struct Medium<'a> {
    h: CMatrix,
    m: CMatrix,
    n: CMatrix,
    noise_var: f64,
    slots: Vec<IrsSlot>,
    rng: &'a mut dyn rand::RngCore,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// BS transmits, user receives.
    Down,
    /// User transmits, BS receives.
    Up,
}

impl Medium<'_> {
    fn channel(&self, irs: Option<&IrsState>, dir: Dir) -> CMatrix {
        let mut h = self.h.clone();
        if let Some(state) = irs {
            let coeffs = state.coefficients();
            let scaled = CMatrix::from_fn(self.n.nrows(), self.n.ncols(), |r, c| self.n[(r, c)] * coeffs[c]);
            h += scaled * &self.m;
        }
        match dir {
            Dir::Down => h,
            Dir::Up => h.transpose(),
        }
    }

    /// Complex received sample `wᴴ(Hf + n)`.
    fn sample(&mut self, h: &CMatrix, f: &CVector, w: &CVector) -> Complex64 {
        let mut y = w.dotc(&(h * f));
        if self.noise_var > 0.0 {
            let rng = &mut *self.rng;
            let n = CVector::from_fn(h.nrows(), |_, _| complex_gaussian(rng, self.noise_var));
            y += w.dotc(&n);
        }
        y
    }

    /// Downlink samples for every IRS state in `states`, without forming the
    /// cascade matrices: `wᴴHf + Σ_i θ_i (wᴴN)_i (Mf)_i`.
    fn irs_sweep(&mut self, states: &[IrsState], f: &CVector, w: &CVector) -> Vec<Complex64> {
        let direct = w.dotc(&(&self.h * f));
        let left = self.n.adjoint() * w;
        let right = &self.m * f;
        let weights: Vec<Complex64> = left.iter().zip(right.iter()).map(|(l, r)| l.conj() * r).collect();
        let mut out = Vec::with_capacity(states.len());
        for state in states {
            let mut y = direct;
            for (c, wt) in state.coefficients().iter().zip(&weights) {
                y += c * wt;
            }
            if self.noise_var > 0.0 {
                let rng = &mut *self.rng;
                let n = CVector::from_fn(w.len(), |_, _| complex_gaussian(rng, self.noise_var));
                y += w.dotc(&n);
            }
            out.push(y);
        }
        out
    }

    fn record(&mut self, phase: usize, irs: Option<usize>, tx: BeamLabel, rx: BeamLabel, power: f64) {
        let slot = self.slots.len();
        self.slots.push(IrsSlot {
            phase,
            slot,
            irs_codeword: irs,
            tx_beam: tx,
            rx_beam: rx,
            power,
        });
    }
}

fn omni(n: usize) -> CVector {
    Codeword::omni(n).weights().clone()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Predicted direct-path sample, subtracted before comparing powers.
#[derive(Clone)]
struct DirectEstimate {
    matrix: CMatrix,
}

impl DirectEstimate {
    /// Scales `model` (the direct path with unit gain) so that it reproduces
    /// the sample `y` measured with `(f, w)`.
    fn fit(model: CMatrix, dir: Dir, f: &CVector, w: &CVector, y: Complex64) -> Self {
        let unit = DirectEstimate { matrix: model };
        let reference = unit.predict(dir, f, w);
        let gain = if reference.norm() > 0.0 { y / reference } else { Complex64::new(0.0, 0.0) };
        DirectEstimate {
            matrix: unit.matrix * gain,
        }
    }

    fn predict(&self, dir: Dir, f: &CVector, w: &CVector) -> Complex64 {
        match dir {
            Dir::Down => w.dotc(&(&self.matrix * f)),
            Dir::Up => w.dotc(&(self.matrix.transpose() * f)),
        }
    }
}

/// Ternary (M-ary) descent below a stage-1 node with the other side fixed.
#[allow(clippy::too_many_arguments)]
fn descend(
    med: &mut Medium<'_>,
    phase: usize,
    dir: Dir,
    irs: Option<(&IrsState, usize)>,
    tree: &HierarchicalCodebook,
    sweeping_rx: bool,
    start: usize,
    fixed: (&CVector, BeamLabel),
    cancel: Option<&DirectEstimate>,
) -> (usize, Complex64) {
    let h = med.channel(irs.map(|x| x.0), dir);
    let mut node = start;
    let mut chosen = Complex64::new(0.0, 0.0);
    for s in 2..=tree.depth() {
        let children = tree.children(node);
        let mut powers = Vec::with_capacity(children.len());
        let mut samples = Vec::with_capacity(children.len());
        for i in children.clone() {
            let beam = tree.stage(s).get(i).weights();
            let label = BeamLabel::Beam { stage: s, index: i };
            let (f, w, tx, rxl) = if sweeping_rx {
                (fixed.0.clone(), beam.map(|z| z.conj()), fixed.1, label)
            } else {
                (beam.clone(), fixed.0.clone(), label, fixed.1)
            };
            let mut y = med.sample(&h, &f, &w);
            if let Some(c) = cancel {
                y -= c.predict(dir, &f, &w);
            }
            let p = y.norm_sqr();
            med.record(phase, irs.map(|x| x.1), tx, rxl, p);
            powers.push(p);
            samples.push(y);
        }
        let best = argmax(&powers);
        node = children.start + best;
        chosen = samples[best];
    }
    (node, chosen)
}

/// Options for [`cooperative_train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooperativeOptions {
    /// A slot is a pulse when its power exceeds this multiple of its
    /// interval's median.
    pub pulse_factor: f64,
    /// Known incoming angle `φ_RM` at the IRS (BS and IRS are fixed). A
    /// direction codeword only fixes `sinφ_RM − sinφ_RN`, so the IRS angles
    /// are reported only when this is given.
    pub irs_bs_reference: Option<f64>,
}

impl Default for CooperativeOptions {
    fn default() -> Self {
        Self {
            pulse_factor: 10.0,
            irs_bs_reference: None,
        }
    }
}

fn check_trees(op: &'static str, link: &IrsLink, bs: &HierarchicalCodebook, user: &HierarchicalCodebook) -> Result<()> {
    if bs.n_antennas() != link.n_bs || user.n_antennas() != link.n_user {
        return Err(Error::dimension(op, "codebooks do not match the array sizes"));
    }
    if bs.m_ary() != 3 || user.m_ary() != 3 || bs.depth() != user.depth() {
        return Err(Error::domain(op, "the protocol needs ternary trees of equal depth"));
    }
    Ok(())
}

/// Reduces a sine value into `[−1, 1)`.
fn reduce_sine(s: f64) -> f64 {
    s - 2.0 * ((s + 1.0) / 2.0).floor()
}

/// Cooperative three-phase IRS training.
///
/// - Phase 1: for each of the 3×3 stage-1 wide-beam pairs the IRS sweeps all
///   codewords of `irs_codewords`; the slot with the largest power excess
///   over its interval median that also exceeds `pulse_factor` times that
///   median marks the IRS codeword and the wide pair of the reflected path.
/// - Phase 2 (IRS off): the wide pair whose interval median was largest in
///   Phase 1 labels the direct path; a ternary descent below it finds the
///   user beam, then one at the BS with the user transmitting that beam.
/// - Phase 3 (IRS on with the Phase-1 codeword): the same two descents below
///   the Phase-1 pulse pair, subtracting the direct path estimated in
///   Phase 2.
///
/// `irs_codewords` is expected to be [`irs_direction_codewords`] for the
/// grid size `N` of the trees. Tests used: `9(2N+1) + 12(log₃N − 1)`.
pub fn cooperative_train<R: Rng>(
    link: &IrsLink,
    bs_tree: &HierarchicalCodebook,
    user_tree: &HierarchicalCodebook,
    irs_codewords: &[IrsState],
    noise_var: f64,
    options: &CooperativeOptions,
    rng: &mut R,
) -> Result<IrsTrainingOutcome> {
    const OP: &str = "cooperative_train";
    check_trees(OP, link, bs_tree, user_tree)?;
    if irs_codewords.is_empty() || irs_codewords.iter().any(|c| c.len() != link.n_irs) {
        return Err(Error::dimension(OP, "IRS codewords must match the IRS size"));
    }
    let n_grid = bs_tree.leaves().len();
    let mut med = Medium {
        h: link.direct(),
        m: link.bs_to_irs(),
        n: link.irs_to_user(),
        noise_var,
        slots: Vec::new(),
        rng,
    };

    // Phase 1.
    let mut interval_medians = [[0.0f64; 3]; 3];
    let mut pulse: Option<(f64, usize, usize, usize)> = None;
    for t in 0..3 {
        for r in 0..3 {
            let f = bs_tree.stage(1).get(t).weights().clone();
            let w = user_tree.stage(1).get(r).weights().map(|z| z.conj());
            let samples = med.irs_sweep(irs_codewords, &f, &w);
            let mut powers = Vec::with_capacity(irs_codewords.len());
            for (k, y) in samples.iter().enumerate() {
                let p = y.norm_sqr();
                med.record(
                    1,
                    Some(k),
                    BeamLabel::Beam { stage: 1, index: t },
                    BeamLabel::Beam { stage: 1, index: r },
                    p,
                );
                powers.push(p);
            }
            let m = median(&powers);
            interval_medians[t][r] = m;
            for (k, &p) in powers.iter().enumerate() {
                let excess = p - m;
                let is_pulse = p > options.pulse_factor * m && excess > 0.0;
                if is_pulse && pulse.map_or(true, |(e, ..)| excess > e) {
                    pulse = Some((excess, t, r, k));
                }
            }
        }
    }
    let (_, t_irs, r_irs, k_irs) = pulse.ok_or_else(|| Error::Protocol {
        op: OP,
        reason: "no energy pulse detected in Phase 1".into(),
    })?;

    // Phase 2.
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for t in 0..3 {
        for r in 0..3 {
            if interval_medians[t][r] > best.0 {
                best = (interval_medians[t][r], t, r);
            }
        }
    }
    let (_, t_h, r_h) = best;
    let f_wide = bs_tree.stage(1).get(t_h).weights().clone();
    let (user_h, _) = descend(
        &mut med,
        2,
        Dir::Down,
        None,
        user_tree,
        true,
        r_h,
        (&f_wide, BeamLabel::Beam { stage: 1, index: t_h }),
        None,
    );
    let depth = bs_tree.depth();
    let f_user = user_tree.leaves().get(user_h).weights().clone();
    let user_label = BeamLabel::Beam { stage: depth, index: user_h };
    let (bs_h, y_h) = descend(&mut med, 2, Dir::Up, None, bs_tree, true, t_h, (&f_user, user_label), None);
    // The winning slot of the last descent measured the chosen narrow pair;
    // its complex sample fixes the direct-path gain.
    let model = outer(
        &rx(link.n_user, user_tree.leaves().center_angle(user_h)),
        &ula_steering(link.n_bs, bs_tree.leaves().center_angle(bs_h)),
    );
    let w_bs = bs_tree.leaves().get(bs_h).weights().map(|z| z.conj());
    let direct = DirectEstimate::fit(model, Dir::Up, &f_user, &w_bs, y_h);

    // Phase 3.
    let cw = &irs_codewords[k_irs];
    let f_wide = bs_tree.stage(1).get(t_irs).weights().clone();
    let (user_n, _) = descend(
        &mut med,
        3,
        Dir::Down,
        Some((cw, k_irs)),
        user_tree,
        true,
        r_irs,
        (&f_wide, BeamLabel::Beam { stage: 1, index: t_irs }),
        Some(&direct),
    );
    let f_user = user_tree.leaves().get(user_n).weights().clone();
    let (bs_m, _) = descend(
        &mut med,
        3,
        Dir::Up,
        Some((cw, k_irs)),
        bs_tree,
        true,
        t_irs,
        (&f_user, BeamLabel::Beam { stage: depth, index: user_n }),
        Some(&direct),
    );

    let delta = irs_codeword_delta(k_irs, n_grid);
    let (irs_m, irs_n) = match options.irs_bs_reference {
        Some(phi) => (Some(phi), Some(reduce_sine(phi.sin() - delta).asin())),
        None => (None, None),
    };
    let slots = med.slots;
    Ok(IrsTrainingOutcome {
        angles: IrsAngleEstimates {
            bs_h: bs_tree.leaves().center_angle(bs_h),
            user_h: user_tree.leaves().center_angle(user_h),
            bs_m: bs_tree.leaves().center_angle(bs_m),
            user_n: user_tree.leaves().center_angle(user_n),
            irs_m,
            irs_n,
        },
        bs_h_index: bs_h,
        user_h_index: user_h,
        bs_m_index: bs_m,
        user_n_index: user_n,
        irs_codeword: k_irs,
        irs_delta: delta,
        tests_used: slots.len(),
        trace: slots,
    })
}

/// Closed-form test count of [`cooperative_train`].
pub fn cooperative_cost(n_grid: usize) -> Result<usize> {
    let s = crate::training::exact_log(n_grid, 3)
        .ok_or_else(|| Error::domain("cooperative_cost", "N must be a power of 3"))?;
    Ok(18 * n_grid + 12 * s - 3)
}

/// Exhaustive IRS-assisted training count `N² + N⁴`.
pub fn exhaustive_irs_cost(n_grid: usize) -> usize {
    n_grid * n_grid + n_grid.pow(4)
}

/// Three-phase training with omni modes and return-mode sweeps.
///
/// - Phase 1 (IRS off): BS omni while the user sweeps, then the reverse.
/// - Phase 2: the BS transmits and receives omni while the IRS sweeps the
///   return codewords of the `N` grid angles; the strongest slot gives
///   `φ_RM`. The same from the user side gives `φ_RN` (the user-side round
///   trip aligns with the opposite propagation direction).
/// - Phase 3: IRS in direction mode for `(φ_RM, φ_RN)`; omni/sweep pairs as
///   in Phase 1 with the direct path subtracted give `φ_UN` and `φ_BM`.
///
/// Tests used: `6N`. Omni beams carry no array gain, so the protocol is
/// SNR-limited.
pub fn primary_train<R: Rng>(
    link: &IrsLink,
    bs_codebook: &crate::beamforming::Codebook,
    user_codebook: &crate::beamforming::Codebook,
    noise_var: f64,
    rng: &mut R,
) -> Result<IrsTrainingOutcome> {
    const OP: &str = "primary_train";
    if bs_codebook.n_antennas() != link.n_bs || user_codebook.n_antennas() != link.n_user {
        return Err(Error::dimension(OP, "codebooks do not match the array sizes"));
    }
    if bs_codebook.len() != user_codebook.len() {
        return Err(Error::domain(OP, "BS and user codebooks must have the same size"));
    }
    let n_grid = bs_codebook.len();
    let grid: Vec<f64> = bs_codebook.centers().to_vec();
    let mut med = Medium {
        h: link.direct(),
        m: link.bs_to_irs(),
        n: link.irs_to_user(),
        noise_var,
        slots: Vec::new(),
        rng,
    };
    let omni_bs = omni(link.n_bs);
    let omni_user = omni(link.n_user);
    let leaf = |i: usize| BeamLabel::Beam { stage: 1, index: i };

    // Phase 1.
    let h_down = med.channel(None, Dir::Down);
    let mut powers = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let w = user_codebook.get(i).weights().map(|z| z.conj());
        let p = med.sample(&h_down, &omni_bs, &w).norm_sqr();
        med.record(1, None, BeamLabel::Omni, leaf(i), p);
        powers.push(p);
    }
    let user_h = argmax(&powers);
    let h_up = med.channel(None, Dir::Up);
    let mut powers = Vec::with_capacity(n_grid);
    let mut samples = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let w = bs_codebook.get(i).weights().map(|z| z.conj());
        let y = med.sample(&h_up, &omni_user, &w);
        med.record(1, None, BeamLabel::Omni, leaf(i), y.norm_sqr());
        powers.push(y.norm_sqr());
        samples.push(y);
    }
    let bs_h = argmax(&powers);
    let model = outer(
        &rx(link.n_user, user_codebook.center_angle(user_h)),
        &ula_steering(link.n_bs, bs_codebook.center_angle(bs_h)),
    );
    let w_bs = bs_codebook.get(bs_h).weights().map(|z| z.conj());
    let direct = DirectEstimate::fit(model, Dir::Up, &omni_user, &w_bs, samples[bs_h]);

    // Phase 2: round trips BS→IRS→BS (Mᵀ Θ M) and user→IRS→user (N Θ Nᵀ).
    let returns: Vec<IrsState> = grid.iter().map(|&u| theta_direct_sine(link.n_irs, 2.0 * u)).collect();
    let mut powers = Vec::with_capacity(n_grid);
    for (g, cw) in returns.iter().enumerate() {
        let round = med.m.transpose() * cw.matrix() * &med.m;
        let p = med.sample(&round, &omni_bs, &omni_bs.map(|z| z.conj())).norm_sqr();
        med.record(2, Some(g), BeamLabel::Omni, BeamLabel::Omni, p);
        powers.push(p);
    }
    let g_m = argmax(&powers);
    let mut powers = Vec::with_capacity(n_grid);
    for (g, cw) in returns.iter().enumerate() {
        let round = &med.n * cw.matrix() * med.n.transpose();
        let p = med.sample(&round, &omni_user, &omni_user.map(|z| z.conj())).norm_sqr();
        med.record(2, Some(g), BeamLabel::Omni, BeamLabel::Omni, p);
        powers.push(p);
    }
    let g_n = argmax(&powers);
    let s_m = grid[g_m];
    let s_n = -grid[g_n];
    let cw = theta_direct_sine(link.n_irs, s_m - s_n);

    // Phase 3.
    let h_down = med.channel(Some(&cw), Dir::Down);
    let mut powers = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let w = user_codebook.get(i).weights().map(|z| z.conj());
        let y = med.sample(&h_down, &omni_bs, &w) - direct.predict(Dir::Down, &omni_bs, &w);
        med.record(3, Some(0), BeamLabel::Omni, leaf(i), y.norm_sqr());
        powers.push(y.norm_sqr());
    }
    let user_n = argmax(&powers);
    let h_up = med.channel(Some(&cw), Dir::Up);
    let mut powers = Vec::with_capacity(n_grid);
    for i in 0..n_grid {
        let w = bs_codebook.get(i).weights().map(|z| z.conj());
        let y = med.sample(&h_up, &omni_user, &w) - direct.predict(Dir::Up, &omni_user, &w);
        med.record(3, Some(0), BeamLabel::Omni, leaf(i), y.norm_sqr());
        powers.push(y.norm_sqr());
    }
    let bs_m = argmax(&powers);

    let slots = med.slots;
    Ok(IrsTrainingOutcome {
        angles: IrsAngleEstimates {
            bs_h: bs_codebook.center_angle(bs_h),
            user_h: user_codebook.center_angle(user_h),
            bs_m: bs_codebook.center_angle(bs_m),
            user_n: user_codebook.center_angle(user_n),
            irs_m: Some(s_m.asin()),
            irs_n: Some(s_n.clamp(-1.0, 1.0).asin()),
        },
        bs_h_index: bs_h,
        user_h_index: user_h,
        bs_m_index: bs_m,
        user_n_index: user_n,
        irs_codeword: g_m,
        irs_delta: s_m - s_n,
        tests_used: slots.len(),
        trace: slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{hierarchical_codebook, sector_centers, steering_codebook};
    use crate::geometry::ArrayGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_angle(n: usize, i: usize) -> f64 {
        sector_centers(n)[i].asin()
    }

    fn link(n: usize, idx: [usize; 6]) -> IrsLink {
        IrsLink {
            n_bs: n,
            n_user: n,
            n_irs: n,
            paths: IrsPaths {
                bs_h: grid_angle(n, idx[0]),
                user_h: grid_angle(n, idx[1]),
                bs_m: grid_angle(n, idx[2]),
                irs_m: grid_angle(n, idx[3]),
                irs_n: grid_angle(n, idx[4]),
                user_n: grid_angle(n, idx[5]),
            },
            alpha_h: Complex64::from_polar(0.05, 0.3),
            alpha_m: Complex64::from_polar(1.0, -1.1),
            alpha_n: Complex64::from_polar(1.0, 2.0),
        }
    }

    #[test]
    fn direct_codeword_redirects_the_beam() {
        let g = ArrayGeometry::ula(16, 1.0).unwrap();
        let (a, b) = (0.4, -0.9);
        let out = theta_direct(a, b, &g).unwrap().apply(&ula_steering(16, a));
        assert!((out - ula_steering(16, b)).norm() < 1e-12);
    }

    #[test]
    fn return_codeword_reflects_backwards() {
        let g = ArrayGeometry::ula(16, 1.0).unwrap();
        let out = theta_return(0.7, &g).unwrap().apply(&ula_steering(16, 0.7));
        assert!((out - ula_steering(16, 0.7 + PI)).norm() < 1e-12);
    }

    #[test]
    fn phases_are_wrapped() {
        let s = IrsState::new(alloc::vec![-0.5, 7.0, 2.0 * PI], 0.5).unwrap();
        assert!(s.phases().iter().all(|&p| (0.0..2.0 * PI).contains(&p)));
        assert!(IrsState::new(alloc::vec![0.0], 1.5).is_err());
    }

    #[test]
    fn codeword_set_covers_grid_differences() {
        let n = 9;
        let set = irs_direction_codewords(n, n);
        assert_eq!(set.len(), 2 * n + 1);
        let c = sector_centers(n);
        for &a in &c {
            for &b in &c {
                let hit = (0..set.len()).any(|k| (irs_codeword_delta(k, n) - (a - b)).abs() < 1e-12);
                assert!(hit);
            }
        }
    }

    #[test]
    fn ao_trace_is_monotone_and_beats_zero_phase() {
        let l = IrsLink {
            n_irs: 32,
            ..link(8, [1, 2, 3, 4, 5, 6])
        };
        let sc = l.scenario(1.0, 0.1, 2);
        let sol = ao_joint_beamforming(&sc, &AoOptions::default()).unwrap();
        assert!(sol.trace.windows(2).all(|w| w[1] >= w[0]));
        let last = *sol.trace.last().unwrap();
        assert!(last > sol.trace[0]);
        let check = ao_objective(&sc, &sol.precoder, &sol.irs).unwrap();
        assert!((check - last).abs() < 1e-9);
        let fro: f64 = sol.precoder.iter().map(|z| z.norm_sqr()).sum();
        assert!((fro - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cooperative_recovers_on_grid_link() {
        for (n, depth) in [(9usize, 2usize), (27, 3)] {
            let bs = hierarchical_codebook(n, 3, depth).unwrap();
            let us = hierarchical_codebook(n, 3, depth).unwrap();
            let set = irs_direction_codewords(n, n);
            let l = link(n, [0, n - 1, n / 2, 1, n - 2, 2]);
            let opts = CooperativeOptions {
                irs_bs_reference: Some(l.paths.irs_m),
                ..Default::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let out = cooperative_train(&l, &bs, &us, &set, 0.0, &opts, &mut rng).unwrap();
            assert_eq!(out.tests_used, cooperative_cost(n).unwrap());
            assert_eq!((out.bs_h_index, out.user_h_index), (0, n - 1));
            assert_eq!((out.bs_m_index, out.user_n_index), (n / 2, 2));
            assert!((out.angles.irs_n.unwrap() - l.paths.irs_n).abs() < 1e-9);
        }
    }

    #[test]
    fn cooperative_without_irs_path_reports_no_pulse() {
        let n = 9;
        let bs = hierarchical_codebook(n, 3, 2).unwrap();
        let mut l = link(n, [0, 1, 2, 3, 4, 5]);
        l.alpha_m = Complex64::new(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = cooperative_train(&l, &bs, &bs, &irs_direction_codewords(n, n), 0.0, &Default::default(), &mut rng);
        assert!(matches!(err, Err(Error::Protocol { .. })));
    }

    #[test]
    fn primary_recovers_on_grid_link() {
        let n = 9;
        let cb = steering_codebook(n, n).unwrap();
        let l = link(n, [3, 5, 7, 0, 8, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = primary_train(&l, &cb, &cb, 0.0, &mut rng).unwrap();
        assert_eq!(out.tests_used, 6 * n);
        assert_eq!([out.bs_h_index, out.user_h_index, out.bs_m_index, out.user_n_index], [3, 5, 7, 4]);
        assert!((out.angles.irs_m.unwrap() - l.paths.irs_m).abs() < 1e-9);
        assert!((out.angles.irs_n.unwrap() - l.paths.irs_n).abs() < 1e-9);
    }
}
