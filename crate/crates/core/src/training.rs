//! Beam training over a simulated channel with exact test accounting.
//!
//! A *test* is one pilot time slot. Every method records the slots it used
//! in a trace; `tests_used` is the number of slots. In all methods except
//! parallel training a slot carries exactly one reading.
//!
//! Transmit codebooks are expected transmit-oriented and receive codebooks
//! receive-oriented (see [`Codebook::conjugate`]). Methods that take a single
//! codebook derive the receive side by conjugation. The omnidirectional mode
//! is a single active element. Ties in measured power go to the lowest index.

use alloc::vec::Vec;
use core::str::FromStr;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::beamforming::{Codebook, Codeword, HierarchicalCodebook};
use crate::channel::ChannelMatrix;
use crate::linalg::{complex_gaussian, CMatrix, CVector};
use crate::{Error, Result};

/// One power reading; `None` marks the omnidirectional codeword.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub tx: Option<usize>,
    pub rx: Option<usize>,
    pub power: f64,
}

/// Readings taken in one pilot slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSlot {
    pub stage: usize,
    pub readings: Vec<Reading>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    /// Selected transmit codeword (leaf index for tree searches).
    pub tx_codeword_index: usize,
    pub rx_codeword_index: usize,
    /// Noiseless `|wᴴHf|` of the selected pair.
    pub achieved_gain: f64,
    pub tests_used: usize,
    pub trace: Vec<TestSlot>,
}

/// Which side sweeps first in one-sided training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

/// Training procedures known to [`predict_cost`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMethod {
    Exhaustive,
    OneSided,
    Parallel,
    TreeOne,
    TreeBoth,
}

impl TrainingMethod {
    pub const ALL: [TrainingMethod; 5] = [
        TrainingMethod::Exhaustive,
        TrainingMethod::OneSided,
        TrainingMethod::Parallel,
        TrainingMethod::TreeOne,
        TrainingMethod::TreeBoth,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TrainingMethod::Exhaustive => "exhaustive",
            TrainingMethod::OneSided => "one_sided",
            TrainingMethod::Parallel => "parallel",
            TrainingMethod::TreeOne => "tree_one",
            TrainingMethod::TreeBoth => "tree_both",
        }
    }
}

impl FromStr for TrainingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainingMethod::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain("predict_cost", alloc::format!("unknown training method {s:?}")))
    }
}

/// `|wᴴHf·s + wᴴn|²` with unit pilot and `n ~ CN(0, σ²I)`.
pub fn measure<R: Rng + ?Sized>(h: &CMatrix, f: &Codeword, w: &Codeword, noise_var: f64, rng: &mut R) -> Result<f64> {
    if h.ncols() != f.len() || h.nrows() != w.len() {
        return Err(Error::dimension(
            "measure",
            alloc::format!("H is {}×{}, f has {}, w has {}", h.nrows(), h.ncols(), f.len(), w.len()),
        ));
    }
    let mut y = w.weights().dotc(&(h * f.weights()));
    if noise_var > 0.0 {
        let n = CVector::from_fn(h.nrows(), |_, _| complex_gaussian(rng, noise_var));
        y += w.weights().dotc(&n);
    }
    Ok(y.norm_sqr())
}

/// [`measure`] with `H·f` precomputed, so sweeps over many combiners do
/// not repeat the product. Noise is still drawn per test.
fn measure_projected<R: Rng + ?Sized>(hf: &CVector, w: &Codeword, noise_var: f64, rng: &mut R) -> f64 {
    let mut y = w.weights().dotc(hf);
    if noise_var > 0.0 {
        let n = CVector::from_fn(hf.len(), |_, _| complex_gaussian(rng, noise_var));
        y += w.weights().dotc(&n);
    }
    y.norm_sqr()
}

fn gain(h: &CMatrix, f: &Codeword, w: &Codeword) -> f64 {
    w.weights().dotc(&(h * f.weights())).norm()
}

fn check_sides(op: &'static str, h: &CMatrix, n_tx: usize, n_rx: usize) -> Result<()> {
    if h.ncols() != n_tx || h.nrows() != n_rx {
        return Err(Error::dimension(
            op,
            alloc::format!("channel is {}×{}, codebooks drive {n_rx}×{n_tx}", h.nrows(), h.ncols()),
        ));
    }
    Ok(())
}

/// Running argmax; ties keep the lexicographically lowest `(tx, rx)`.
#[derive(Default)]
struct Best {
    entry: Option<(f64, usize, usize)>,
}

impl Best {
    fn offer(&mut self, power: f64, tx: usize, rx: usize) {
        match self.entry {
            Some((p, t, r)) if power < p || (power == p && (t, r) <= (tx, rx)) => {}
            _ => self.entry = Some((power, tx, rx)),
        }
    }

    fn get(&self) -> (usize, usize) {
        let (_, t, r) = self.entry.expect("at least one reading");
        (t, r)
    }
}

/// Tests every pair; `N_tx·N_rx` slots.
pub fn exhaustive_train<R: Rng + ?Sized>(
    channel: &ChannelMatrix,
    tx_codebook: &Codebook,
    rx_codebook: &Codebook,
    noise_var: f64,
    rng: &mut R,
) -> Result<TrainingOutcome> {
    let h = channel.narrowband();
    check_sides("exhaustive_train", &h, tx_codebook.n_antennas(), rx_codebook.n_antennas())?;
    let mut trace = Vec::with_capacity(tx_codebook.len() * rx_codebook.len());
    let mut best = Best::default();
    for (t, f) in tx_codebook.iter().enumerate() {
        let hf = &h * f.weights();
        for (r, w) in rx_codebook.iter().enumerate() {
            let power = measure_projected(&hf, w, noise_var, rng);
            best.offer(power, t, r);
            trace.push(TestSlot {
                stage: 1,
                readings: alloc::vec![Reading { tx: Some(t), rx: Some(r), power }],
            });
        }
    }
    let (t, r) = best.get();
    Ok(TrainingOutcome {
        tx_codeword_index: t,
        rx_codeword_index: r,
        achieved_gain: gain(&h, tx_codebook.get(t), rx_codebook.get(r)),
        tests_used: trace.len(),
        trace,
    })
}

fn argmax(powers: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in powers.iter().enumerate() {
        if p > powers[best] {
            best = i;
        }
    }
    best
}

/// Each side sweeps `codebook` while the other stays omnidirectional; `2N`
/// slots. `first` picks the side that sweeps first.
pub fn one_sided_train<R: Rng + ?Sized>(
    channel: &ChannelMatrix,
    codebook: &Codebook,
    first: Side,
    noise_var: f64,
    rng: &mut R,
) -> Result<TrainingOutcome> {
    let h = channel.narrowband();
    let n = codebook.n_antennas();
    check_sides("one_sided_train", &h, n, n)?;
    let rx_book = codebook.conjugate();
    let omni = Codeword::omni(n);
    let mut trace = Vec::with_capacity(2 * codebook.len());
    let mut chosen = [0usize; 2];
    let order = match first {
        Side::Tx => [Side::Tx, Side::Rx],
        Side::Rx => [Side::Rx, Side::Tx],
    };
    for (stage, side) in order.iter().enumerate() {
        let mut powers = Vec::with_capacity(codebook.len());
        for i in 0..codebook.len() {
            let (f, w, reading) = match side {
                Side::Tx => (codebook.get(i), &omni, (Some(i), None)),
                Side::Rx => (&omni, rx_book.get(i), (None, Some(i))),
            };
            let power = measure(&h, f, w, noise_var, rng)?;
            powers.push(power);
            trace.push(TestSlot {
                stage: stage + 1,
                readings: alloc::vec![Reading { tx: reading.0, rx: reading.1, power }],
            });
        }
        let idx = match side {
            Side::Tx => 0,
            Side::Rx => 1,
        };
        chosen[idx] = argmax(&powers);
    }
    Ok(TrainingOutcome {
        tx_codeword_index: chosen[0],
        rx_codeword_index: chosen[1],
        achieved_gain: gain(&h, codebook.get(chosen[0]), rx_book.get(chosen[1])),
        tests_used: trace.len(),
        trace,
    })
}

/// Exhaustive pair search with `n_rf` transmit beams per slot;
/// `⌈N²/n_rf⌉` slots.
pub fn parallel_train<R: Rng + ?Sized>(
    channel: &ChannelMatrix,
    codebook: &Codebook,
    n_rf: usize,
    noise_var: f64,
    rng: &mut R,
) -> Result<TrainingOutcome> {
    if n_rf == 0 {
        return Err(Error::domain("parallel_train", "n_rf must be >= 1"));
    }
    let h = channel.narrowband();
    let n = codebook.n_antennas();
    check_sides("parallel_train", &h, n, n)?;
    let rx_book = codebook.conjugate();
    let pairs: Vec<(usize, usize)> = (0..codebook.len())
        .flat_map(|r| (0..codebook.len()).map(move |t| (t, r)))
        .collect();
    let projected: Vec<CVector> = codebook.iter().map(|f| &h * f.weights()).collect();
    let mut trace = Vec::with_capacity(pairs.len().div_ceil(n_rf));
    let mut best = Best::default();
    for chunk in pairs.chunks(n_rf) {
        let mut readings = Vec::with_capacity(chunk.len());
        for &(t, r) in chunk {
            let power = measure_projected(&projected[t], rx_book.get(r), noise_var, rng);
            best.offer(power, t, r);
            readings.push(Reading { tx: Some(t), rx: Some(r), power });
        }
        trace.push(TestSlot { stage: 1, readings });
    }
    let (t, r) = best.get();
    Ok(TrainingOutcome {
        tx_codeword_index: t,
        rx_codeword_index: r,
        achieved_gain: gain(&h, codebook.get(t), rx_book.get(r)),
        tests_used: trace.len(),
        trace,
    })
}

fn check_trees(op: &'static str, h: &CMatrix, tx: &HierarchicalCodebook, rx: &HierarchicalCodebook) -> Result<()> {
    check_sides(op, h, tx.n_antennas(), rx.n_antennas())?;
    if tx.m_ary() != rx.m_ary() || tx.depth() != rx.depth() {
        return Err(Error::domain(op, "transmit and receive trees differ in shape"));
    }
    Ok(())
}

/// Descends `tree` with the opposite side fixed; returns the leaf index.
fn descend<R: Rng + ?Sized>(
    h: &CMatrix,
    tree: &HierarchicalCodebook,
    side: Side,
    fixed: (&Codeword, Option<usize>),
    stage_offset: usize,
    noise_var: f64,
    rng: &mut R,
    trace: &mut Vec<TestSlot>,
) -> Result<usize> {
    let mut node = 0usize;
    for s in 1..=tree.depth() {
        let candidates = if s == 1 { 0..tree.m_ary() } else { tree.children(node) };
        let book = tree.stage(s);
        let mut powers = Vec::with_capacity(tree.m_ary());
        for i in candidates.clone() {
            let (f, w, tx, rx) = match side {
                Side::Tx => (book.get(i), fixed.0, Some(i), fixed.1),
                Side::Rx => (fixed.0, book.get(i), fixed.1, Some(i)),
            };
            let power = measure(h, f, w, noise_var, rng)?;
            powers.push(power);
            trace.push(TestSlot {
                stage: stage_offset + s,
                readings: alloc::vec![Reading { tx, rx, power }],
            });
        }
        node = candidates.start + argmax(&powers);
    }
    Ok(node)
}

/// Receive-side tree search against an omni transmitter, then transmit-side
/// search against the found receive beam; `2M·log_M N` slots. The omni root
/// is not tested.
pub fn tree_train_one_side<R: Rng + ?Sized>(
    channel: &ChannelMatrix,
    tree_tx: &HierarchicalCodebook,
    tree_rx: &HierarchicalCodebook,
    noise_var: f64,
    rng: &mut R,
) -> Result<TrainingOutcome> {
    let h = channel.narrowband();
    check_trees("tree_train_one_side", &h, tree_tx, tree_rx)?;
    let mut trace = Vec::new();
    let omni = Codeword::omni(tree_tx.n_antennas());
    let rx = descend(&h, tree_rx, Side::Rx, (&omni, None), 0, noise_var, rng, &mut trace)?;
    let w = tree_rx.leaves().get(rx);
    let tx = descend(&h, tree_tx, Side::Tx, (w, Some(rx)), tree_rx.depth(), noise_var, rng, &mut trace)?;
    Ok(TrainingOutcome {
        tx_codeword_index: tx,
        rx_codeword_index: rx,
        achieved_gain: gain(&h, tree_tx.leaves().get(tx), w),
        tests_used: trace.len(),
        trace,
    })
}

/// Stage-synchronized pair search: all `M×M` child pairs per stage;
/// `M²·log_M N` slots.
pub fn tree_train_both_side<R: Rng + ?Sized>(
    channel: &ChannelMatrix,
    tree_tx: &HierarchicalCodebook,
    tree_rx: &HierarchicalCodebook,
    noise_var: f64,
    rng: &mut R,
) -> Result<TrainingOutcome> {
    let h = channel.narrowband();
    check_trees("tree_train_both_side", &h, tree_tx, tree_rx)?;
    let m = tree_tx.m_ary();
    let mut trace = Vec::new();
    let (mut tx, mut rx) = (0usize, 0usize);
    for s in 1..=tree_tx.depth() {
        let (tx_range, rx_range) = if s == 1 {
            (0..m, 0..m)
        } else {
            (tree_tx.children(tx), tree_rx.children(rx))
        };
        let mut best = Best::default();
        for t in tx_range.clone() {
            for r in rx_range.clone() {
                let power = measure(&h, tree_tx.stage(s).get(t), tree_rx.stage(s).get(r), noise_var, rng)?;
                best.offer(power, t, r);
                trace.push(TestSlot {
                    stage: s,
                    readings: alloc::vec![Reading { tx: Some(t), rx: Some(r), power }],
                });
            }
        }
        (tx, rx) = best.get();
    }
    Ok(TrainingOutcome {
        tx_codeword_index: tx,
        rx_codeword_index: rx,
        achieved_gain: gain(&h, tree_tx.leaves().get(tx), tree_rx.leaves().get(rx)),
        tests_used: trace.len(),
        trace,
    })
}

/// `S` with `M^S = n`, if it exists.
pub fn exact_log(n: usize, m: usize) -> Option<usize> {
    if m < 2 || n == 0 {
        return None;
    }
    let (mut v, mut s) = (1usize, 0usize);
    while v < n {
        v = v.checked_mul(m)?;
        s += 1;
    }
    (v == n).then_some(s)
}

/// Closed-form slot count of a method.
pub fn predict_cost(method: TrainingMethod, n_beams: usize, m_ary: usize, n_rf: usize) -> Result<usize> {
    const OP: &str = "predict_cost";
    let n = n_beams;
    let tree_depth = || {
        exact_log(n, m_ary).ok_or_else(|| {
            Error::domain(OP, alloc::format!("{n} is not a power of M = {m_ary}"))
        })
    };
    match method {
        TrainingMethod::Exhaustive => Ok(n * n),
        TrainingMethod::OneSided => Ok(2 * n),
        TrainingMethod::Parallel => {
            if n_rf == 0 {
                return Err(Error::domain(OP, "n_rf must be >= 1"));
            }
            Ok((n * n).div_ceil(n_rf))
        }
        TrainingMethod::TreeOne => Ok(2 * m_ary * tree_depth()?),
        TrainingMethod::TreeBoth => Ok(m_ary * m_ary * tree_depth()?),
    }
}

/// [`predict_cost`] with the method given by name.
pub fn predict_cost_by_name(method: &str, n_beams: usize, m_ary: usize, n_rf: usize) -> Result<usize> {
    predict_cost(method.parse()?, n_beams, m_ary, n_rf)
}
