use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thz_umimo::channel::{
    beamspace_transform, dft_grid, dft_matrix, random_rays, select_beams, synthesize_channel, Decay, RandomRayParams,
    RaySpec,
};
use thz_umimo::geometry::{ArrayGeometry, Direction, ElementPattern};
use thz_umimo::linalg::CMatrix;
use thz_umimo::propagation::Medium;

const F: f64 = 0.35e12;
const C: f64 = 3e8;

fn ray(i: usize, j: usize, aod: f64, aoa: f64, d: f64, ti: f64, tij: f64) -> RaySpec {
    RaySpec {
        cluster_index: i,
        ray_index: j,
        aod: Direction::horizontal(aod),
        aoa: Direction::horizontal(aoa),
        distance: d,
        cluster_arrival: ti,
        ray_arrival: tij,
    }
}

/// Σ √(α·N_t·N_r)·a_r a_tᴴ with α from the spreading and absorption terms.
fn oracle(nt: usize, nr: usize, rays: &[RaySpec], decay: Decay) -> CMatrix {
    let k = 10f64.powf(-27.8 / 10.0);
    let mut h = CMatrix::zeros(nr, nt);
    for r in rays {
        let spread = (4.0 * PI * F * r.distance / C).powi(2);
        let alpha = (-r.cluster_arrival / decay.gamma_cluster - r.ray_arrival / decay.gamma_ray).exp()
            / (spread * (k * r.distance).exp());
        let amp = (alpha * nt as f64 * nr as f64).sqrt();
        for m in 0..nr {
            for n in 0..nt {
                let phase = -PI * m as f64 * r.aoa.azimuth().sin() - PI * n as f64 * r.aod.azimuth().sin();
                h[(m, n)] += Complex64::from_polar(amp / ((nt * nr) as f64).sqrt(), phase);
            }
        }
    }
    h
}

#[test]
fn taps_sorted_and_grouped() {
    let lambda = C / F;
    let tx = ArrayGeometry::ula(4, lambda).unwrap();
    let rx = ArrayGeometry::ula(3, lambda).unwrap();
    let rays = vec![
        ray(1, 0, 0.1, 0.2, 12.0, 2e-9, 0.0),
        ray(0, 0, 0.3, -0.2, 10.0, 0.0, 0.0),
        ray(0, 1, -0.5, 0.4, 10.5, 0.0, 1e-9),
        ray(1, 1, 0.7, 0.1, 12.3, 2e-9, 0.0),
    ];
    let ch = synthesize_channel(&Medium::standard(), &tx, &rx, &rays, &ElementPattern::Isotropic, Decay::default(), None)
        .unwrap();
    let delays: Vec<f64> = ch.taps().iter().map(|t| t.delay).collect();
    assert_eq!(delays, vec![0.0, 1e-9, 2e-9]);
}

#[test]
fn seeded_phases_are_reproducible() {
    let lambda = C / F;
    let g = ArrayGeometry::ula(4, lambda).unwrap();
    let rays = vec![ray(0, 0, 0.3, -0.2, 10.0, 0.0, 0.0), ray(0, 1, 0.1, 0.5, 11.0, 0.0, 1e-9)];
    let run = |seed| {
        synthesize_channel(&Medium::standard(), &g, &g, &rays, &ElementPattern::Isotropic, Decay::default(), seed)
            .unwrap()
            .narrowband()
    };
    assert_eq!(run(Some(7)), run(Some(7)));
    assert_ne!(run(Some(7)), run(Some(8)));
}

#[test]
fn dft_rejects_aliased_frequencies() {
    assert!(dft_matrix(2, &[0.0, 2.0]).is_err());
    assert!(dft_matrix(3, &dft_grid(3)).is_ok());
}

proptest! {
    #[test]
    fn synthesized_channel_matches_oracle(
        nt in 1usize..8,
        nr in 1usize..8,
        angles in proptest::collection::vec((-FRAC_PI_2..FRAC_PI_2, -FRAC_PI_2..FRAC_PI_2, 1.0..50.0f64), 1..5),
    ) {
        let lambda = C / F;
        let tx = ArrayGeometry::ula(nt, lambda).unwrap();
        let rx = ArrayGeometry::ula(nr, lambda).unwrap();
        let rays: Vec<RaySpec> = angles
            .iter()
            .enumerate()
            .map(|(j, &(aod, aoa, d))| ray(0, j, aod, aoa, d, 0.0, j as f64 * 0.5e-9))
            .collect();
        let decay = Decay::default();
        let ch = synthesize_channel(&Medium::standard(), &tx, &rx, &rays, &ElementPattern::Isotropic, decay, None).unwrap();
        let want = oracle(nt, nr, &rays, decay);
        let got = ch.narrowband();
        prop_assert!((got - &want).norm() <= 1e-9 * want.norm().max(1e-300));
    }

    #[test]
    fn beamspace_round_trip(n in 1usize..12, m in 1usize..12, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = CMatrix::from_fn(m, n, |_, _| Complex64::new(rng.gen(), rng.gen()));
        let ut = dft_matrix(n, &dft_grid(n)).unwrap();
        let ur = dft_matrix(m, &dft_grid(m)).unwrap();
        let hv = beamspace_transform(&h, &ur.adjoint(), &ut).unwrap();
        let back = &ur * hv * ut.adjoint();
        prop_assert!((back - &h).norm() < 1e-10 * h.norm().max(1.0));
    }

    #[test]
    fn captured_energy_monotone(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hv = CMatrix::from_fn(6, 5, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let mut last = 0.0;
        for k in 1..=5 {
            let e = select_beams(&hv, k, k).unwrap().captured_energy();
            prop_assert!(e >= last);
            last = e;
        }
        let all = select_beams(&hv, 5, 6).unwrap().captured_energy();
        prop_assert!((all - hv.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn random_rays_start_at_zero(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = RandomRayParams {
            n_clusters: 3,
            rays_per_cluster: 4,
            cluster_interarrival: 1e-9,
            ray_interarrival: 1e-10,
            base_distance: 10.0,
        };
        let rays = random_rays(&mut rng, &params).unwrap();
        prop_assert_eq!(rays.len(), 12);
        prop_assert_eq!(rays[0].cluster_arrival, 0.0);
        for r in &rays {
            if r.ray_index == 0 {
                prop_assert_eq!(r.ray_arrival, 0.0);
            }
            prop_assert!((r.distance - 10.0 - C * r.delay()).abs() < 1e-9);
        }
    }
}
