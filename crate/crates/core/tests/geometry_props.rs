use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use thz_umimo::geometry::{
    antenna_gain_db, far_field_distance, hpbw_directivity, is_far_field, response_vector, ArrayGeometry, Direction,
    ElementPattern, Orientation,
};

const LAMBDA: f64 = 1e-3;

fn geometries() -> Vec<ArrayGeometry> {
    vec![
        ArrayGeometry::ula(7, LAMBDA).unwrap(),
        ArrayGeometry::urpa(4, 3, LAMBDA / 2.0, 0.6 * LAMBDA, LAMBDA).unwrap(),
        ArrayGeometry::uhpa(2, LAMBDA / 2.0, LAMBDA).unwrap(),
        ArrayGeometry::ucpa_uniform(2, LAMBDA).unwrap(),
    ]
}

#[test]
fn element_counts() {
    let counts: Vec<usize> = geometries().iter().map(|g| g.n_elements()).collect();
    assert_eq!(counts, vec![7, 12, 19, 19]);
    for v in 0..5 {
        let g = ArrayGeometry::uhpa(v, LAMBDA / 2.0, LAMBDA).unwrap();
        assert_eq!(g.n_elements(), 1 + (1..=v).map(|i| 6 * i).sum::<usize>());
        assert_eq!(g.element_positions().len(), g.n_elements());
    }
}

#[test]
fn far_field_boundary_is_strict() {
    let g = ArrayGeometry::ula(101, LAMBDA).unwrap();
    let d = far_field_distance(&g);
    assert!(!is_far_field(&g, d));
    assert!(is_far_field(&g, d * (1.0 + 1e-12)));
}

#[test]
fn gain_helpers() {
    assert!((antenna_gain_db(3.0, 100).unwrap() - 23.0).abs() < 1e-12);
    assert!((hpbw_directivity(PI / 2.0, PI / 2.0).unwrap() - 16.0 / PI).abs() < 1e-12);
    assert!(hpbw_directivity(0.0, 1.0).is_err());
    let d = ElementPattern::CosineSquared.directivity().unwrap();
    // Closed form for cos²θ on the front hemisphere: 6.
    assert!((d - 6.0).abs() < 1e-3, "{d}");
}

/// URPA oracle: element (m, n) at (m·d_y, n·d_z) in the y–z plane.
fn urpa_oracle(ny: usize, nz: usize, dy: f64, dz: f64, dir: Direction) -> Vec<Complex64> {
    let (th, ph) = (dir.elevation(), dir.azimuth());
    let k = 2.0 * PI / LAMBDA;
    let scale = 1.0 / ((ny * nz) as f64).sqrt();
    let mut out = Vec::new();
    for m in 0..ny {
        for n in 0..nz {
            let phase = k * (m as f64 * dy * th.sin() * ph.sin() + n as f64 * dz * th.cos());
            out.push(Complex64::from_polar(scale, phase));
        }
    }
    out
}

proptest! {
    #[test]
    fn responses_have_unit_norm(az in 0.0..2.0 * PI, el in 0.0..PI) {
        let dir = Direction::new(az, el).unwrap();
        for g in geometries() {
            for o in [Orientation::Transmit, Orientation::Receive] {
                let v = response_vector(&g, dir, o);
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ula_matches_steering_formula(n in 1usize..64, az in -PI / 2.0..PI / 2.0) {
        let g = ArrayGeometry::ula(n, LAMBDA).unwrap();
        let v = response_vector(&g, Direction::horizontal(az), Orientation::Transmit);
        for i in 0..n {
            let want = Complex64::from_polar(1.0 / (n as f64).sqrt(), PI * i as f64 * az.sin());
            prop_assert!((v[i] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn urpa_matches_bruteforce(ny in 1usize..6, nz in 1usize..6, az in 0.0..2.0 * PI, el in 0.0..PI) {
        let (dy, dz) = (0.5 * LAMBDA, 0.7 * LAMBDA);
        let g = ArrayGeometry::urpa(ny, nz, dy, dz, LAMBDA).unwrap();
        let dir = Direction::new(az, el).unwrap();
        let v = response_vector(&g, dir, Orientation::Transmit);
        for (a, b) in v.iter().zip(urpa_oracle(ny, nz, dy, dz, dir)) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn receive_is_conjugate_of_transmit(az in 0.0..2.0 * PI, el in 0.0..PI) {
        let dir = Direction::new(az, el).unwrap();
        for g in geometries() {
            let t = response_vector(&g, dir, Orientation::Transmit);
            let r = response_vector(&g, dir, Orientation::Receive);
            prop_assert!((t.map(|z| z.conj()) - r).norm() < 1e-12);
        }
    }

    #[test]
    fn planar_arrays_see_mirror_elevations_equally(az in 0.0..2.0 * PI, el in 0.0..PI / 2.0) {
        // Elements of UHPA/UCPA lie in z = 0: θ and π − θ are indistinguishable.
        let a = Direction::new(az, el).unwrap();
        let b = Direction::new(az, PI - el).unwrap();
        for g in &geometries()[2..] {
            let va = response_vector(g, a, Orientation::Transmit);
            let vb = response_vector(g, b, Orientation::Transmit);
            prop_assert!((va - vb).norm() < 1e-9);
        }
    }

    #[test]
    fn azimuth_is_wrapped(az in -20.0..20.0f64) {
        let d = Direction::new(az, 1.0).unwrap();
        prop_assert!((0.0..2.0 * PI).contains(&d.azimuth()));
    }
}
