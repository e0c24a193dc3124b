//! Predicted versus measured training cost table.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thz_umimo::beamforming::{hierarchical_codebook, steering_codebook};
use thz_umimo::training::{
    exact_log, exhaustive_train, one_sided_train, parallel_train, predict_cost, tree_train_both_side,
    tree_train_one_side, Side, TrainingMethod,
};

use crate::error::CliError;
use crate::formats::Csv;
use crate::run::random_los;

/// `method,N,predicted,measured` for every method and grid size. Measured
/// counts come from one noiseless run on a random on-grid LoS channel.
pub fn compare_costs(methods: &[TrainingMethod], sizes: &[usize], m_ary: usize, n_rf: usize, seed: u64) -> Result<String, CliError> {
    for &n in sizes {
        if n == 0 {
            return Err(CliError::Schema("--n: grid sizes must be >= 1".into()));
        }
        let tree = methods.iter().any(|m| matches!(m, TrainingMethod::TreeOne | TrainingMethod::TreeBoth));
        if tree && exact_log(n, m_ary).is_none() {
            return Err(CliError::Schema(format!("--n: {n} is not a power of --m {m_ary}, as tree methods need")));
        }
    }
    if n_rf == 0 {
        return Err(CliError::Schema("--n-rf must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = Csv::new(&["method", "N", "predicted", "measured"]);
    for &method in methods {
        for &n in sizes {
            let predicted = predict_cost(method, n, m_ary, n_rf)?;
            let (ch, _) = random_los(n, true, &mut rng);
            let cb = steering_codebook(n, n)?;
            let measured = match method {
                TrainingMethod::Exhaustive => exhaustive_train(&ch, &cb, &cb.conjugate(), 0.0, &mut rng)?,
                TrainingMethod::OneSided => one_sided_train(&ch, &cb, Side::Rx, 0.0, &mut rng)?,
                TrainingMethod::Parallel => parallel_train(&ch, &cb, n_rf, 0.0, &mut rng)?,
                TrainingMethod::TreeOne | TrainingMethod::TreeBoth => {
                    let depth = exact_log(n, m_ary).expect("checked above");
                    let tree = hierarchical_codebook(n, m_ary, depth)?;
                    let rx = tree.conjugate();
                    if method == TrainingMethod::TreeOne {
                        tree_train_one_side(&ch, &tree, &rx, 0.0, &mut rng)?
                    } else {
                        tree_train_both_side(&ch, &tree, &rx, 0.0, &mut rng)?
                    }
                }
            }
            .tests_used;
            csv.row(&[method.name().to_string(), n.to_string(), predicted.to_string(), measured.to_string()]);
        }
    }
    Ok(csv.into_string())
}
