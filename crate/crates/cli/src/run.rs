//! Scenario execution and the run manifest.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use thz_umimo::beamforming::{
    beam_coverage, beamwidth, coverage_threshold, hierarchical_codebook, sector_centers, steering_codebook,
};
use thz_umimo::channel::{los_channel, ChannelMatrix};
use thz_umimo::geometry::{response_vector, ula_steering_sine, ArrayGeometry, Direction, Orientation};
use thz_umimo::irs::{
    ao_joint_beamforming, ao_objective, cooperative_train, eigen_precoder, effective_channel, irs_direction_codewords,
    primary_train, AoOptions, CooperativeOptions, IrsLink, IrsPaths, IrsScenario, IrsState, IrsTrainingOutcome,
};
use thz_umimo::linalg::{complex_gaussian, CMatrix, Complex64};
use thz_umimo::propagation::{absorption_loss, spreading_loss, to_db};
use thz_umimo::training::{
    exact_log, exhaustive_train, one_sided_train, parallel_train, tree_train_both_side, tree_train_one_side, Side,
    TrainingOutcome,
};
use thz_umimo::wideband::{effective_wideband_gain, is_spatially_wideband, squint_direction, squint_gain, WidebandSetup};

use crate::config::{linspace, GeometryKind, GeometrySpec, Params, Scenario, WidebandCfg};
use crate::error::CliError;
use crate::formats::{export_codebook, export_tree, irs_trace, num, training_trace, Csv};

/// Environment variable that overrides the output directory.
pub const OUTPUT_ENV: &str = "UMIMO_OUTPUT_DIR";

/// Named output file contents, in write order.
type Outputs = Vec<(String, String)>;

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    kind: &'a str,
    config: String,
    config_sha256: String,
    seed: Option<u64>,
    outputs: Vec<OutputEntry>,
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Where a run writes: the env override, the config's `output`, or
/// `<stem>-out` next to the config.
pub fn output_dir(config_path: &Path, scenario: &Scenario) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    if let Some(out) = &scenario.output {
        return out.clone();
    }
    let stem = config_path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    config_path.parent().unwrap_or(Path::new(".")).join(format!("{stem}-out"))
}

/// Runs a validated scenario and writes its files plus `manifest.json`.
/// Returns the output directory.
pub fn run(config_path: &Path, config_text: &str, scenario: &Scenario) -> Result<PathBuf, CliError> {
    let outputs = execute(scenario)?;
    let dir = output_dir(config_path, scenario);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;
    let mut entries = Vec::with_capacity(outputs.len());
    for (name, body) in &outputs {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
        entries.push(OutputEntry {
            file: name.clone(),
            sha256: sha256_hex(body.as_bytes()),
        });
    }
    let manifest = Manifest {
        tool: "umimo",
        version: thz_umimo::VERSION,
        kind: scenario.kind.name(),
        config: config_path.file_name().map_or(String::new(), |n| n.to_string_lossy().into_owned()),
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed: scenario.seed,
        outputs: entries,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    let path = dir.join("manifest.json");
    std::fs::write(&path, json).map_err(io(&path))?;
    Ok(dir)
}

/// Computes every output file of a scenario in memory.
pub fn execute(scenario: &Scenario) -> Result<Outputs, CliError> {
    let seed = scenario.seed.unwrap_or(0);
    match &scenario.params {
        Params::Pathloss {
            medium,
            frequencies,
            distances,
        } => {
            let mut csv = Csv::new(&[
                "frequency_hz",
                "distance_m",
                "spreading_loss_db",
                "absorption_loss_db",
                "path_loss_db",
            ]);
            for &d in distances {
                for &f in frequencies {
                    let spread = to_db(spreading_loss(f, d)?);
                    let abs = to_db(absorption_loss(medium, f, d)?);
                    csv.row(&[num(f), num(d), num(spread), num(abs), num(spread + abs)]);
                }
            }
            Ok(vec![("pathloss.csv".into(), csv.into_string())])
        }
        Params::Pattern { geometry, steer, points } => pattern(geometry, *steer, *points),
        Params::Coverage { n_antennas, n_beams, rho } => coverage(*n_antennas, *n_beams, *rho),
        Params::Train {
            n,
            m_ary,
            methods,
            trials,
            noise_var,
            n_rf,
            on_grid,
        } => train(*n, *m_ary, methods, *trials, *noise_var, *n_rf, *on_grid, seed),
        Params::Squint(cfg) => squint(cfg),
        Params::IrsTrain {
            n,
            methods,
            trials,
            noise_var,
            pulse_factor,
            irs_reference,
            alphas,
        } => irs_train(*n, methods, *trials, *noise_var, *pulse_factor, *irs_reference, *alphas, seed),
        Params::IrsOpt { .. } => irs_opt(&scenario.params, seed),
    }
}

fn build_geometry(geom: &GeometrySpec, count: usize) -> Result<ArrayGeometry, CliError> {
    let (s, w) = (geom.spacing, geom.wavelength);
    let g = match geom.kind {
        GeometryKind::Ula => ArrayGeometry::ula_with_spacing(count, s, w)?,
        GeometryKind::Urpa => ArrayGeometry::urpa(geom.counts[0], geom.counts[1], s, s, w)?,
        GeometryKind::Uhpa => ArrayGeometry::uhpa(geom.counts[0], s, w)?,
        GeometryKind::Ucpa => ArrayGeometry::ucpa((1..=geom.counts[0]).map(|c| c as f64 * s).collect(), w)?,
    };
    Ok(g)
}

fn pattern(geom: &GeometrySpec, steer: f64, points: usize) -> Result<Outputs, CliError> {
    let mut csv = Csv::new(&["n_elements", "psi_rad", "gain"]);
    let counts = if geom.kind == GeometryKind::Ula { geom.counts.clone() } else { vec![0] };
    for count in counts {
        let g = build_geometry(geom, count)?;
        let w = response_vector(&g, Direction::horizontal(steer), Orientation::Transmit);
        for psi in linspace(-FRAC_PI_2, FRAC_PI_2, points) {
            let a = response_vector(&g, Direction::horizontal(psi), Orientation::Transmit);
            let gain = a.dotc(&w).norm();
            csv.row(&[g.n_elements().to_string(), num(psi), num(gain)]);
        }
    }
    Ok(vec![("pattern.csv".into(), csv.into_string())])
}

fn coverage(n_antennas: usize, n_beams: usize, rho: Option<f64>) -> Result<Outputs, CliError> {
    let cb = steering_codebook(n_antennas, n_beams)?;
    let rho = match rho {
        Some(r) => r,
        None => coverage_threshold(n_antennas, n_beams)?,
    };
    let mut csv = Csv::new(&["index", "center_rad", "start_rad", "end_rad"]);
    let mut total = 0.0;
    for (i, cw) in cb.iter().enumerate() {
        let intervals = beam_coverage(cw, rho)?;
        total += beamwidth(&intervals);
        for (a, b) in intervals {
            csv.row(&[i.to_string(), num(cb.center_angle(i)), num(a), num(b)]);
        }
    }
    let mut summary = Csv::new(&["n_antennas", "n_beams", "rho", "total_width_rad"]);
    summary.row(&[n_antennas.to_string(), n_beams.to_string(), num(rho), num(total)]);
    Ok(vec![
        ("coverage.csv".into(), csv.into_string()),
        ("coverage_summary.csv".into(), summary.into_string()),
        ("codebook.txt".into(), export_codebook(&cb)),
    ])
}

/// Random unit-gain LoS channel; on-grid draws return the true beam indices.
pub(crate) fn random_los(n: usize, on_grid: bool, rng: &mut ChaCha8Rng) -> (ChannelMatrix, Option<(usize, usize)>) {
    let centers = sector_centers(n);
    let (t, r) = (rng.gen_range(0..n), rng.gen_range(0..n));
    let (ut, ur, truth) = if on_grid {
        (centers[t], centers[r], Some((t, r)))
    } else {
        (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), None)
    };
    let a_r = ula_steering_sine(n, ur).map(|z| z.conj());
    let a_t = ula_steering_sine(n, ut);
    let gain = Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
    (los_channel(gain, &a_r, &a_t).expect("matching sizes"), truth)
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64))
}

fn opt_index(x: Option<usize>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

#[allow(clippy::too_many_arguments)]
fn train(
    n: usize,
    m_ary: Option<usize>,
    methods: &[String],
    trials: usize,
    noise_var: f64,
    n_rf: usize,
    on_grid: bool,
    seed: u64,
) -> Result<Outputs, CliError> {
    let cb = steering_codebook(n, n)?;
    let rx_cb = cb.conjugate();
    let tree = match m_ary {
        Some(m) if methods.iter().any(|x| x.starts_with("tree")) => {
            let depth = exact_log(n, m).ok_or_else(|| thz_umimo::Error::Domain {
                op: "hierarchical_codebook",
                reason: format!("{n} antennas is not a power of M = {m}"),
            })?;
            Some(hierarchical_codebook(n, m, depth)?)
        }
        _ => None,
    };
    let tree_rx = tree.as_ref().map(|t| t.conjugate());
    let mut rows = Csv::new(&[
        "trial",
        "method",
        "true_tx",
        "true_rx",
        "tx_index",
        "rx_index",
        "tests_used",
        "achieved_gain",
    ]);
    let mut hits = vec![0usize; methods.len()];
    let mut tests = vec![0usize; methods.len()];
    let mut traces: Vec<Option<String>> = vec![None; methods.len()];
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let (ch, truth) = random_los(n, on_grid, &mut rng);
        for (k, method) in methods.iter().enumerate() {
            let out: TrainingOutcome = match method.as_str() {
                "exhaustive" => exhaustive_train(&ch, &cb, &rx_cb, noise_var, &mut rng)?,
                "one_sided" => one_sided_train(&ch, &cb, Side::Rx, noise_var, &mut rng)?,
                "parallel" => parallel_train(&ch, &cb, n_rf, noise_var, &mut rng)?,
                "tree_one" => tree_train_one_side(&ch, tree.as_ref().expect("tree"), tree_rx.as_ref().expect("tree"), noise_var, &mut rng)?,
                "tree_both" => tree_train_both_side(&ch, tree.as_ref().expect("tree"), tree_rx.as_ref().expect("tree"), noise_var, &mut rng)?,
                other => unreachable!("method {other} passed validation"),
            };
            let chosen = (out.tx_codeword_index, out.rx_codeword_index);
            if truth == Some(chosen) {
                hits[k] += 1;
            }
            tests[k] += out.tests_used;
            rows.row(&[
                trial.to_string(),
                method.clone(),
                opt_index(truth.map(|t| t.0)),
                opt_index(truth.map(|t| t.1)),
                chosen.0.to_string(),
                chosen.1.to_string(),
                out.tests_used.to_string(),
                num(out.achieved_gain),
            ]);
            if trial == 0 {
                traces[k] = Some(training_trace(&out.trace));
            }
        }
    }
    let mut summary = Csv::new(&["method", "trials", "hits", "mean_tests"]);
    for (k, method) in methods.iter().enumerate() {
        let hit_field = if on_grid { hits[k].to_string() } else { String::new() };
        summary.row(&[method.clone(), trials.to_string(), hit_field, num(tests[k] as f64 / trials as f64)]);
    }
    let mut out: Outputs = vec![
        ("train.csv".into(), rows.into_string()),
        ("train_summary.csv".into(), summary.into_string()),
        ("codebook.txt".into(), export_codebook(&cb)),
    ];
    if let Some(t) = &tree {
        out.push(("tree_codebook.txt".into(), export_tree(t)));
    }
    for (method, trace) in methods.iter().zip(traces) {
        out.push((format!("trace_{method}.csv"), trace.expect("at least one trial")));
    }
    Ok(out)
}

fn squint(cfg: &WidebandCfg) -> Result<Outputs, CliError> {
    let spacing = cfg.spacing_m.unwrap_or(thz_umimo::wavelength(cfg.carrier) / 2.0);
    let symbol = cfg.symbol_period.unwrap_or(1.0 / cfg.bandwidth);
    let setup = WidebandSetup::new(cfg.carrier, cfg.bandwidth, cfg.n_antennas, spacing, symbol)?;
    if cfg.f_points == 0 || cfg.psi_points == 0 {
        return Err(thz_umimo::Error::Domain {
            op: "squint_gain",
            reason: "f_points and psi_points must be >= 1".into(),
        }
        .into());
    }
    let (lo, hi) = setup.band();
    let freqs = linspace(lo, hi, cfg.f_points);
    let mut csv = Csv::new(&["f_hz", "psi_rad", "gain"]);
    let mut peaks = Csv::new(&["f_hz", "peak_psi_rad"]);
    for &f in &freqs {
        for psi in linspace(-FRAC_PI_2, FRAC_PI_2, cfg.psi_points) {
            csv.row(&[num(f), num(psi), num(squint_gain(&setup, cfg.steer, psi, f)?)]);
        }
        // Arrival angle the combiner steered to `steer` at f_c favors at f.
        peaks.row(&[num(f), num(squint_direction(cfg.steer, setup.carrier(), f)?)]);
    }
    let (ratio, wide) = is_spatially_wideband(&setup, cfg.steer);
    let mut summary = Csv::new(&["carrier_hz", "bandwidth_hz", "n_antennas", "effective_gain", "delay_ratio", "spatially_wideband"]);
    summary.row(&[
        num(cfg.carrier),
        num(cfg.bandwidth),
        cfg.n_antennas.to_string(),
        num(effective_wideband_gain(&setup, cfg.steer)),
        num(ratio),
        wide.to_string(),
    ]);
    Ok(vec![
        ("squint.csv".into(), csv.into_string()),
        ("squint_peaks.csv".into(), peaks.into_string()),
        ("squint_summary.csv".into(), summary.into_string()),
    ])
}

fn grid_link(n: usize, alphas: [f64; 3], rng: &mut ChaCha8Rng) -> IrsLink {
    let centers = sector_centers(n);
    let mut pick = || centers[rng.gen_range(0..n)].asin();
    let paths = IrsPaths {
        bs_h: pick(),
        user_h: pick(),
        bs_m: pick(),
        irs_m: pick(),
        irs_n: pick(),
        user_n: pick(),
    };
    let mut gain = |a: f64| Complex64::from_polar(a, rng.gen_range(0.0..2.0 * PI));
    IrsLink {
        n_bs: n,
        n_user: n,
        n_irs: n,
        paths,
        alpha_h: gain(alphas[0]),
        alpha_m: gain(alphas[1]),
        alpha_n: gain(alphas[2]),
    }
}

#[allow(clippy::too_many_arguments)]
fn irs_train(
    n: usize,
    methods: &[String],
    trials: usize,
    noise_var: f64,
    pulse_factor: f64,
    irs_reference: bool,
    alphas: [f64; 3],
    seed: u64,
) -> Result<Outputs, CliError> {
    let cb = steering_codebook(n, n)?;
    let cooperative = methods.iter().any(|m| m == "cooperative");
    let tree = if cooperative {
        let depth = exact_log(n, 3).ok_or_else(|| thz_umimo::Error::Domain {
            op: "cooperative_train",
            reason: format!("grid size {n} is not a power of 3"),
        })?;
        Some(hierarchical_codebook(n, 3, depth)?)
    } else {
        None
    };
    let set = irs_direction_codewords(n, n);
    let angles = ["bs_h", "user_h", "bs_m", "user_n", "irs_m", "irs_n"];
    let mut header = vec!["trial", "method", "status", "tests_used", "success"];
    let true_cols: Vec<String> = angles.iter().map(|a| format!("true_{a}")).collect();
    header.extend(true_cols.iter().map(String::as_str));
    header.extend(angles);
    let mut rows = Csv::new(&header);
    let mut traces: Vec<Option<String>> = vec![None; methods.len()];
    let mut successes = vec![0usize; methods.len()];
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let link = grid_link(n, alphas, &mut rng);
        let p = link.paths;
        let truth = [p.bs_h, p.user_h, p.bs_m, p.user_n, p.irs_m, p.irs_n];
        for (k, method) in methods.iter().enumerate() {
            let result = match method.as_str() {
                "cooperative" => {
                    let opts = CooperativeOptions {
                        pulse_factor,
                        irs_bs_reference: irs_reference.then_some(p.irs_m),
                    };
                    let t = tree.as_ref().expect("tree");
                    cooperative_train(&link, t, t, &set, noise_var, &opts, &mut rng)
                }
                "primary" => primary_train(&link, &cb, &cb, noise_var, &mut rng),
                other => unreachable!("method {other} passed validation"),
            };
            let mut row = vec![trial.to_string(), method.clone()];
            match result {
                Ok(out) => {
                    let est = estimates(&out);
                    let success = est.iter().zip(&truth).all(|(e, t)| e.is_some_and(|e| (e - t).abs() < 1e-6));
                    successes[k] += usize::from(success);
                    row.extend(["ok".to_string(), out.tests_used.to_string(), success.to_string()]);
                    row.extend(truth.iter().map(|&t| num(t)));
                    row.extend(est.iter().map(|e| e.map_or(String::new(), num)));
                    if traces[k].is_none() {
                        traces[k] = Some(irs_trace(&out.trace));
                    }
                }
                // A protocol that cannot complete on a noisy draw is a failed
                // trial, not a failed run.
                Err(thz_umimo::Error::Protocol { .. }) => {
                    row.extend(["no_detection".to_string(), String::new(), "false".to_string()]);
                    row.extend(truth.iter().map(|&t| num(t)));
                    row.extend(std::iter::repeat_n(String::new(), 6));
                }
                Err(e) => return Err(e.into()),
            }
            rows.row(&row);
        }
    }
    let mut summary = Csv::new(&["method", "trials", "successes"]);
    for (k, m) in methods.iter().enumerate() {
        summary.row(&[m.clone(), trials.to_string(), successes[k].to_string()]);
    }
    let mut out: Outputs = vec![
        ("irs_train.csv".into(), rows.into_string()),
        ("irs_train_summary.csv".into(), summary.into_string()),
    ];
    for (m, t) in methods.iter().zip(traces) {
        if let Some(t) = t {
            out.push((format!("irs_trace_{m}.csv"), t));
        }
    }
    Ok(out)
}

fn estimates(out: &IrsTrainingOutcome) -> [Option<f64>; 6] {
    let a = &out.angles;
    [Some(a.bs_h), Some(a.user_h), Some(a.bs_m), Some(a.user_n), a.irs_m, a.irs_n]
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

fn irs_opt(params: &Params, seed: u64) -> Result<Outputs, CliError> {
    let Params::IrsOpt {
        n_bs,
        n_user,
        n_irs,
        power,
        noise_var,
        n_streams,
        los_variance,
        cascade_variance,
        amplitude,
        trials,
        max_iters,
        sweeps,
        tol,
    } = *params
    else {
        unreachable!("irs_opt called with other params")
    };
    let opts = AoOptions {
        max_iters,
        tol,
        amplitude,
        initial_phases: None,
        sweeps,
    };
    let mut trace = Csv::new(&["trial", "iteration", "objective"]);
    let mut summary = Csv::new(&["trial", "ao", "zero_phase", "random_phase"]);
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let scenario = IrsScenario {
            h_los: gaussian(&mut rng, n_user, n_bs, los_variance),
            m: gaussian(&mut rng, n_irs, n_bs, cascade_variance),
            n: gaussian(&mut rng, n_user, n_irs, cascade_variance),
            power,
            noise_var,
            n_streams,
        };
        let sol = ao_joint_beamforming(&scenario, &opts)?;
        for (i, v) in sol.trace.iter().enumerate() {
            trace.row(&[trial.to_string(), i.to_string(), num(*v)]);
        }
        let baseline = |irs: &IrsState| -> Result<f64, CliError> {
            let h = effective_channel(&scenario, irs)?;
            Ok(ao_objective(&scenario, &eigen_precoder(&h, n_streams), irs)?)
        };
        let zero = baseline(&IrsState::uniform(n_irs, amplitude)?)?;
        let random = IrsState::new((0..n_irs).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(), amplitude)?;
        let random = baseline(&random)?;
        let ao = ao_objective(&scenario, &sol.precoder, &sol.irs)?;
        summary.row(&[trial.to_string(), num(ao), num(zero), num(random)]);
    }
    Ok(vec![
        ("irs_opt_trace.csv".into(), trace.into_string()),
        ("irs_opt_summary.csv".into(), summary.into_string()),
    ])
}
