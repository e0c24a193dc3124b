use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thz_umimo::beamforming::{hierarchical_codebook, sector_centers, steering_codebook};
use thz_umimo::channel::{los_channel, ChannelMatrix};
use thz_umimo::geometry::ula_steering_sine;
use thz_umimo::training::{
    exhaustive_train, one_sided_train, parallel_train, predict_cost, predict_cost_by_name, tree_train_both_side,
    tree_train_one_side, Side, TrainingMethod, TrainingOutcome,
};

fn los(n: usize, ut: f64, ur: f64, phase: f64) -> ChannelMatrix {
    let a_r = ula_steering_sine(n, ur).map(|z| z.conj());
    let a_t = ula_steering_sine(n, ut);
    los_channel(Complex64::from_polar(1.0, phase), &a_r, &a_t).unwrap()
}

fn slot_count(o: &TrainingOutcome) -> usize {
    o.trace.len()
}

fn run_all(ch: &ChannelMatrix, n: usize, m: usize, s: usize, n_rf: usize, noise: f64, rng: &mut ChaCha8Rng) -> Vec<(TrainingMethod, TrainingOutcome)> {
    let cb = steering_codebook(n, n).unwrap();
    let tree = hierarchical_codebook(n, m, s).unwrap();
    let tree_rx = tree.conjugate();
    vec![
        (TrainingMethod::Exhaustive, exhaustive_train(ch, &cb, &cb.conjugate(), noise, rng).unwrap()),
        (TrainingMethod::OneSided, one_sided_train(ch, &cb, Side::Tx, noise, rng).unwrap()),
        (TrainingMethod::Parallel, parallel_train(ch, &cb, n_rf, noise, rng).unwrap()),
        (TrainingMethod::TreeOne, tree_train_one_side(ch, &tree, &tree_rx, noise, rng).unwrap()),
        (TrainingMethod::TreeBoth, tree_train_both_side(ch, &tree, &tree_rx, noise, rng).unwrap()),
    ]
}

#[test]
fn worked_counts() {
    assert_eq!(predict_cost(TrainingMethod::Exhaustive, 27, 3, 1).unwrap(), 729);
    assert_eq!(predict_cost(TrainingMethod::OneSided, 27, 3, 1).unwrap(), 54);
    assert_eq!(predict_cost(TrainingMethod::Parallel, 27, 3, 3).unwrap(), 243);
    assert_eq!(predict_cost(TrainingMethod::TreeOne, 27, 3, 1).unwrap(), 18);
    assert_eq!(predict_cost(TrainingMethod::TreeBoth, 27, 3, 1).unwrap(), 27);
    assert_eq!(predict_cost(TrainingMethod::TreeBoth, 81, 3, 1).unwrap(), 36);
    assert_eq!(predict_cost(TrainingMethod::Parallel, 5, 2, 2).unwrap(), 13);
}

#[test]
fn name_lookup() {
    assert_eq!(predict_cost_by_name("tree_one", 16, 2, 1).unwrap(), 16);
    assert!(predict_cost_by_name("simulated_annealing", 16, 2, 1).is_err());
    assert!(predict_cost(TrainingMethod::TreeOne, 10, 3, 1).is_err());
    assert!(predict_cost(TrainingMethod::Parallel, 10, 3, 0).is_err());
}

#[test]
fn success_rate_rises_with_snr() {
    let n = 8;
    let centers = sector_centers(n);
    let cb = steering_codebook(n, n).unwrap();
    let rx = cb.conjugate();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rates: Vec<f64> = [8.0, 2.0, 0.5]
        .iter()
        .map(|&noise| {
            let mut hits = 0;
            for _ in 0..500 {
                let (t, r) = (rng.gen_range(0..n), rng.gen_range(0..n));
                let ch = los(n, centers[t], centers[r], rng.gen_range(0.0..2.0 * PI));
                let o = exhaustive_train(&ch, &cb, &rx, noise, &mut rng).unwrap();
                if (o.tx_codeword_index, o.rx_codeword_index) == (t, r) {
                    hits += 1;
                }
            }
            hits as f64 / 500.0
        })
        .collect();
    assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn measured_cost_matches_prediction(
        (m, s) in prop_oneof![Just((2usize, 3usize)), Just((3, 2)), Just((2, 4)), Just((4, 2))],
        n_rf in 1usize..5,
        noise in prop_oneof![Just(0.0), 0.01..1.0f64],
        ut in -1.0..1.0f64,
        ur in -1.0..1.0f64,
        seed in 0u64..10_000,
    ) {
        let n = m.pow(s as u32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = los(n, ut, ur, 0.3);
        for (method, o) in run_all(&ch, n, m, s, n_rf, noise, &mut rng) {
            prop_assert_eq!(o.tests_used, predict_cost(method, n, m, n_rf).unwrap());
            prop_assert_eq!(o.tests_used, slot_count(&o));
            if method == TrainingMethod::Parallel {
                prop_assert!(o.trace.iter().all(|sl| sl.readings.len() <= n_rf));
            }
        }
    }

    #[test]
    fn noiseless_on_grid_methods_agree(
        t in 0usize..9,
        r in 0usize..9,
        phase in 0.0..2.0 * PI,
        seed in 0u64..10_000,
    ) {
        let n = 9;
        let centers = sector_centers(n);
        let ch = los(n, centers[t], centers[r], phase);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, o) in run_all(&ch, n, 3, 2, 2, 0.0, &mut rng) {
            prop_assert_eq!((o.tx_codeword_index, o.rx_codeword_index), (t, r));
        }
    }

    #[test]
    fn exhaustive_gain_dominates(ut in -1.0..1.0f64, ur in -1.0..1.0f64, seed in 0u64..10_000) {
        let n = 8;
        let ch = los(n, ut, ur, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outs = run_all(&ch, n, 2, 3, 2, 0.0, &mut rng);
        let best = outs[0].1.achieved_gain;
        for (_, o) in &outs {
            prop_assert!(o.achieved_gain <= best + 1e-12);
        }
    }
}
