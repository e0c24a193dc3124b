//! Clustered multipath channels, LoS channels and the DFT beamspace.
//!
//! A channel is a list of taps keyed by exact delay. Each ray contributes
//! `√(α G_t G_r)·e^{jϑ}·a_r a_tᴴ` to the tap at `τ = T_i + T_ij`, where `α` is
//! the propagation path gain, `G` the element gain at the ray angle times the
//! element count, and `ϑ` an optional uniformly random ray phase.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp};

use crate::geometry::{response_vector, ArrayGeometry, Direction, ElementPattern, Orientation};
use crate::linalg::{cis, frobenius_sq, outer, unitarity_defect, CMatrix, CVector, Complex64};
use crate::propagation::{path_gain, Medium, PathGeometry};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// One propagation ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySpec {
    pub cluster_index: usize,
    pub ray_index: usize,
    pub aod: Direction,
    pub aoa: Direction,
    pub distance: f64,
    /// Cluster arrival `T_i` (s).
    pub cluster_arrival: f64,
    /// Ray arrival within the cluster `T_ij` (s).
    pub ray_arrival: f64,
}

impl RaySpec {
    pub fn delay(&self) -> f64 {
        self.cluster_arrival + self.ray_arrival
    }
}

/// Cluster and ray power-decay constants `Γ_c`, `Γ_r` (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay {
    pub gamma_cluster: f64,
    pub gamma_ray: f64,
}

impl Default for Decay {
    fn default() -> Self {
        Self {
            gamma_cluster: 1e-9,
            gamma_ray: 1e-9,
        }
    }
}

/// A ray together with its evaluated gains.
#[derive(Debug, Clone, PartialEq)]
pub struct RayContribution {
    pub ray: RaySpec,
    /// Path gain `α`.
    pub path_gain: f64,
    /// Linear transmit antenna gain `G_t`.
    pub tx_gain: f64,
    /// Linear receive antenna gain `G_r`.
    pub rx_gain: f64,
    /// Ray phase `ϑ` (zero when no seed was given).
    pub phase: f64,
}

impl RayContribution {
    /// Complex amplitude `√(α G_t G_r)·e^{jϑ}`.
    pub fn amplitude(&self) -> Complex64 {
        cis(self.phase) * (self.path_gain * self.tx_gain * self.rx_gain).sqrt()
    }
}

/// Channel matrix at one delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Tap {
    pub delay: f64,
    pub matrix: CMatrix,
}

/// `N_r × N_t` multipath channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    taps: Vec<Tap>,
    rays: Vec<RayContribution>,
}

impl ChannelMatrix {
    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn rays(&self) -> &[RayContribution] {
        &self.rays
    }

    pub fn n_rx(&self) -> usize {
        self.taps[0].matrix.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.taps[0].matrix.ncols()
    }

    /// Sum of all taps (the flat-fading view).
    pub fn narrowband(&self) -> CMatrix {
        let mut h = CMatrix::zeros(self.n_rx(), self.n_tx());
        for t in &self.taps {
            h += &t.matrix;
        }
        h
    }

    /// Single zero-delay channel from a matrix.
    pub fn from_matrix(matrix: CMatrix) -> Self {
        Self {
            taps: alloc::vec![Tap { delay: 0.0, matrix }],
            rays: Vec::new(),
        }
    }
}

fn linear_antenna_gain(geometry: &ArrayGeometry, pattern: &ElementPattern, dir: Direction, directivity: f64) -> f64 {
    pattern.eval(geometry.local_direction(dir)) * directivity * geometry.n_elements() as f64
}

/// Builds the multipath channel from explicit rays.
pub fn synthesize_channel(
    medium: &Medium,
    tx_geometry: &ArrayGeometry,
    rx_geometry: &ArrayGeometry,
    rays: &[RaySpec],
    element_pattern: &ElementPattern,
    decay: Decay,
    rng_seed: Option<u64>,
) -> Result<ChannelMatrix> {
    const OP: &str = "synthesize_channel";
    if rays.is_empty() {
        return Err(Error::domain(OP, "ray list is empty"));
    }
    let lambda = tx_geometry.wavelength();
    if (rx_geometry.wavelength() - lambda).abs() > 1e-12 * lambda {
        return Err(Error::domain(OP, "transmit and receive wavelengths differ"));
    }
    let frequency = SPEED_OF_LIGHT / lambda;
    let directivity = element_pattern.directivity()?;
    let mut rng = rng_seed.map(rand_chacha::ChaCha8Rng::seed_from_u64);

    let mut contributions = Vec::with_capacity(rays.len());
    for ray in rays {
        let geom = PathGeometry {
            frequency,
            distance: ray.distance,
            cluster_arrival: ray.cluster_arrival,
            ray_arrival: ray.ray_arrival,
            gamma_cluster: decay.gamma_cluster,
            gamma_ray: decay.gamma_ray,
        };
        let alpha = path_gain(medium, &geom)?;
        let phase = match rng.as_mut() {
            Some(r) => r.gen_range(0.0..2.0 * PI),
            None => 0.0,
        };
        contributions.push(RayContribution {
            ray: *ray,
            path_gain: alpha,
            tx_gain: linear_antenna_gain(tx_geometry, element_pattern, ray.aod, directivity),
            rx_gain: linear_antenna_gain(rx_geometry, element_pattern, ray.aoa, directivity),
            phase,
        });
    }
    contributions.sort_by(|a, b| a.ray.delay().partial_cmp(&b.ray.delay()).unwrap());

    let (nr, nt) = (rx_geometry.n_elements(), tx_geometry.n_elements());
    let mut taps: Vec<Tap> = Vec::new();
    for c in &contributions {
        let a_r = response_vector(rx_geometry, c.ray.aoa, Orientation::Receive);
        let a_t = response_vector(tx_geometry, c.ray.aod, Orientation::Transmit);
        let term = outer(&a_r, &a_t) * c.amplitude();
        let delay = c.ray.delay();
        match taps.last_mut() {
            Some(t) if t.delay == delay => t.matrix += term,
            _ => {
                let mut m = CMatrix::zeros(nr, nt);
                m += term;
                taps.push(Tap { delay, matrix: m });
            }
        }
    }
    Ok(ChannelMatrix {
        taps,
        rays: contributions,
    })
}

/// `α·a_r a_tᴴ` as a single zero-delay tap.
pub fn los_channel(gain: Complex64, a_r: &CVector, a_t: &CVector) -> Result<ChannelMatrix> {
    for v in [a_r, a_t] {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::domain("los_channel", "response vectors must have unit norm"));
        }
    }
    Ok(ChannelMatrix::from_matrix(outer(a_r, a_t) * gain))
}

/// Distributions for [`random_rays`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomRayParams {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    /// Mean cluster inter-arrival time (s).
    pub cluster_interarrival: f64,
    /// Mean ray inter-arrival time within a cluster (s).
    pub ray_interarrival: f64,
    /// Length of the earliest path (m); later arrivals add `c·τ`.
    pub base_distance: f64,
}

/// Random rays: azimuths uniform on `[−π/2, π/2)` in the horizontal plane,
/// exponential inter-arrival times, first cluster and first ray at zero.
pub fn random_rays<R: Rng + ?Sized>(rng: &mut R, params: &RandomRayParams) -> Result<Vec<RaySpec>> {
    const OP: &str = "random_rays";
    if params.n_clusters == 0 || params.rays_per_cluster == 0 {
        return Err(Error::domain(OP, "need at least one cluster and one ray"));
    }
    if !(params.base_distance > 0.0) {
        return Err(Error::domain(OP, "base distance must be positive"));
    }
    let cluster_exp = Exp::new(1.0 / params.cluster_interarrival)
        .map_err(|_| Error::domain(OP, "cluster inter-arrival must be positive"))?;
    let ray_exp = Exp::new(1.0 / params.ray_interarrival)
        .map_err(|_| Error::domain(OP, "ray inter-arrival must be positive"))?;
    let mut out = Vec::with_capacity(params.n_clusters * params.rays_per_cluster);
    let mut t_cluster = 0.0;
    for i in 0..params.n_clusters {
        if i > 0 {
            t_cluster += cluster_exp.sample(rng);
        }
        let mut t_ray = 0.0;
        for j in 0..params.rays_per_cluster {
            if j > 0 {
                t_ray += ray_exp.sample(rng);
            }
            let aod = Direction::horizontal(rng.gen_range(-FRAC_PI_2..FRAC_PI_2));
            let aoa = Direction::horizontal(rng.gen_range(-FRAC_PI_2..FRAC_PI_2));
            out.push(RaySpec {
                cluster_index: i,
                ray_index: j,
                aod,
                aoa,
                distance: params.base_distance + SPEED_OF_LIGHT * (t_cluster + t_ray),
                cluster_arrival: t_cluster,
                ray_arrival: t_ray,
            });
        }
    }
    Ok(out)
}

/// Sine-domain DFT grid `−1 + 2i/n` on `[−1, 1)`.
pub fn dft_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect()
}

/// `U_{m,i} = e^{jπ m u_i}/√n`: column `i` is the `λ/2` ULA transmit response
/// at sine coordinate `u_i`. Unitary for [`dft_grid`].
pub fn dft_matrix(n: usize, spatial_frequencies: &[f64]) -> Result<CMatrix> {
    const OP: &str = "dft_matrix";
    if spatial_frequencies.len() != n {
        return Err(Error::dimension(OP, "need one spatial frequency per column"));
    }
    if n == 0 {
        return Err(Error::domain(OP, "n must be >= 1"));
    }
    for i in 0..n {
        for j in 0..i {
            let d = spatial_frequencies[i] - spatial_frequencies[j];
            // Frequencies that differ by a multiple of 2 give identical columns.
            if (d - 2.0 * (d / 2.0).round()).abs() < 1e-12 {
                return Err(Error::domain(OP, "duplicate spatial frequencies"));
            }
        }
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMatrix::from_fn(n, n, |m, i| {
        cis(PI * m as f64 * spatial_frequencies[i]) * scale
    }))
}

const UNITARY_TOL: f64 = 1e-8;

/// Virtual channel `W_lens·H·F_lens`.
pub fn beamspace_transform(h: &CMatrix, w_lens: &CMatrix, f_lens: &CMatrix) -> Result<CMatrix> {
    const OP: &str = "beamspace_transform";
    if w_lens.nrows() != h.nrows() || w_lens.ncols() != h.nrows() {
        return Err(Error::dimension(OP, "W_lens must be N_r × N_r"));
    }
    if f_lens.nrows() != h.ncols() || f_lens.ncols() != h.ncols() {
        return Err(Error::dimension(OP, "F_lens must be N_t × N_t"));
    }
    if unitarity_defect(w_lens) > UNITARY_TOL || unitarity_defect(f_lens) > UNITARY_TOL {
        return Err(Error::domain(OP, "lens transforms must be unitary"));
    }
    Ok(w_lens * h * f_lens)
}

/// Beams kept by [`select_beams`].
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSelection {
    /// Columns, strongest first.
    pub tx: Vec<usize>,
    /// Rows, strongest first.
    pub rx: Vec<usize>,
    pub reduced: CMatrix,
}

impl BeamSelection {
    /// Energy of the reduced matrix.
    pub fn captured_energy(&self) -> f64 {
        frobenius_sq(&self.reduced)
    }
}

fn strongest(energies: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..energies.len()).collect();
    // Stable sort keeps the lower index first on ties.
    idx.sort_by(|&a, &b| energies[b].partial_cmp(&energies[a]).unwrap());
    idx.truncate(count);
    idx
}

/// Keeps the `count_rx` strongest rows and `count_tx` strongest columns.
pub fn select_beams(h_virtual: &CMatrix, count_tx: usize, count_rx: usize) -> Result<BeamSelection> {
    if count_tx > h_virtual.ncols() || count_rx > h_virtual.nrows() {
        return Err(Error::dimension("select_beams", "more beams requested than available"));
    }
    let col_energy: Vec<f64> = (0..h_virtual.ncols())
        .map(|j| h_virtual.column(j).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let row_energy: Vec<f64> = (0..h_virtual.nrows())
        .map(|i| h_virtual.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let tx = strongest(&col_energy, count_tx);
    let rx = strongest(&row_energy, count_rx);
    let reduced = CMatrix::from_fn(rx.len(), tx.len(), |i, j| h_virtual[(rx[i], tx[j])]);
    Ok(BeamSelection { tx, rx, reduced })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ula_steering_sine;
    use approx::assert_relative_eq;

    const LAMBDA: f64 = 1e-3;

    fn ray(aod: f64, aoa: f64, distance: f64, t_ray: f64) -> RaySpec {
        RaySpec {
            cluster_index: 0,
            ray_index: 0,
            aod: Direction::horizontal(aod),
            aoa: Direction::horizontal(aoa),
            distance,
            cluster_arrival: 0.0,
            ray_arrival: t_ray,
        }
    }

    #[test]
    fn single_ray_rank_and_energy() {
        let m = Medium::standard();
        let g = ArrayGeometry::ula(8, LAMBDA).unwrap();
        let ch = synthesize_channel(&m, &g, &g, &[ray(0.2, -0.1, 5.0, 0.0)], &ElementPattern::Isotropic, Decay::default(), None).unwrap();
        assert_eq!(ch.taps().len(), 1);
        let h = &ch.taps()[0].matrix;
        let sv = h.clone().singular_values();
        assert!(sv[1] < 1e-12 * sv[0]);
        let c = &ch.rays()[0];
        assert_relative_eq!(frobenius_sq(h), c.path_gain * c.tx_gain * c.rx_gain, max_relative = 1e-12);
        assert_relative_eq!(c.tx_gain, 8.0, max_relative = 1e-3);
        assert!(synthesize_channel(&m, &g, &g, &[], &ElementPattern::Isotropic, Decay::default(), None).is_err());
    }

    #[test]
    fn orthogonal_rays_singular_values() {
        let m = Medium::standard();
        let g = ArrayGeometry::ula(8, LAMBDA).unwrap();
        // sin-angles 0 and 0.25 give orthogonal 8-element responses.
        let rays = [ray(0.0, 0.0, 5.0, 0.0), ray(0.25f64.asin(), 0.25f64.asin(), 7.0, 0.0)];
        let ch = synthesize_channel(&m, &g, &g, &rays, &ElementPattern::Isotropic, Decay::default(), None).unwrap();
        assert_eq!(ch.taps().len(), 1);
        let mut sv: Vec<f64> = ch.taps()[0].matrix.clone().singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut want: Vec<f64> = ch
            .rays()
            .iter()
            .map(|c| (c.path_gain * c.tx_gain * c.rx_gain).sqrt())
            .collect();
        want.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_relative_eq!(sv[0], want[0], max_relative = 1e-9);
        assert_relative_eq!(sv[1], want[1], max_relative = 1e-9);
    }

    #[test]
    fn taps_grouped_and_sorted() {
        let m = Medium::standard();
        let g = ArrayGeometry::ula(4, LAMBDA).unwrap();
        let rays = [ray(0.1, 0.1, 5.0, 2e-9), ray(0.3, 0.2, 5.0, 0.0), ray(-0.3, 0.4, 6.0, 2e-9)];
        let ch = synthesize_channel(&m, &g, &g, &rays, &ElementPattern::CosineSquared, Decay::default(), Some(4)).unwrap();
        assert_eq!(ch.taps().len(), 2);
        assert_eq!(ch.taps()[0].delay, 0.0);
        assert_eq!(ch.taps()[1].delay, 2e-9);
        let seeded = synthesize_channel(&m, &g, &g, &rays, &ElementPattern::CosineSquared, Decay::default(), Some(4)).unwrap();
        assert_eq!(ch, seeded);
    }

    #[test]
    fn los_and_matched_filter() {
        let a_r = ula_steering_sine(8, 0.3).map(|z| z.conj());
        let a_t = ula_steering_sine(8, -0.5);
        let alpha = Complex64::new(0.6, 0.8) * 1e-3;
        let ch = los_channel(alpha, &a_r, &a_t).unwrap();
        let h = ch.narrowband();
        assert_relative_eq!(frobenius_sq(&h).sqrt(), alpha.norm(), max_relative = 1e-12);
        let v = (a_r.adjoint() * &h * &a_t)[(0, 0)];
        assert_relative_eq!(v.norm(), alpha.norm(), max_relative = 1e-12);
        let zero = los_channel(Complex64::new(0.0, 0.0), &a_r, &a_t).unwrap();
        assert_eq!(frobenius_sq(&zero.narrowband()), 0.0);
        assert!(los_channel(alpha, &(a_r.clone() * Complex64::new(2.0, 0.0)), &a_t).is_err());
    }

    #[test]
    fn dft_matrix_properties() {
        let one = dft_matrix(1, &dft_grid(1)).unwrap();
        assert_eq!(one[(0, 0)], Complex64::new(1.0, 0.0));
        let u = dft_matrix(16, &dft_grid(16)).unwrap();
        assert!(unitarity_defect(&u) < 1e-10);
        let grid = dft_grid(16);
        for (i, &s) in grid.iter().enumerate() {
            let col = ula_steering_sine(16, s);
            assert_relative_eq!((u.column(i) - col).norm(), 0.0, epsilon = 1e-12);
        }
        assert!(dft_matrix(2, &[0.1, 0.1]).is_err());
        assert!(dft_matrix(2, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn beamspace_on_grid_is_sparse() {
        let n = 16;
        let grid = dft_grid(n);
        let u = dft_matrix(n, &grid).unwrap();
        let h = outer(&ula_steering_sine(n, grid[5]).map(|z| z.conj()), &ula_steering_sine(n, grid[11]));
        let hv = beamspace_transform(&h, &u.transpose(), &u).unwrap();
        let big = hv.iter().filter(|z| z.norm() > 1e-9).count();
        assert_eq!(big, 1);
        assert_relative_eq!(hv[(5, 11)].norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(frobenius_sq(&hv), frobenius_sq(&h), max_relative = 1e-12);
        let id = CMatrix::identity(n, n);
        assert_eq!(beamspace_transform(&h, &id, &id).unwrap(), h);
        let bad = &id * Complex64::new(2.0, 0.0);
        assert!(beamspace_transform(&h, &bad, &id).is_err());

        let sel = select_beams(&hv, 1, 1).unwrap();
        assert_eq!((sel.tx[0], sel.rx[0]), (11, 5));
        assert!(sel.captured_energy() >= 0.999 * frobenius_sq(&h));
    }

    #[test]
    fn off_grid_selection_grows() {
        let n = 16;
        let u = dft_matrix(n, &dft_grid(n)).unwrap();
        let h = outer(&ula_steering_sine(n, 0.33).map(|z| z.conj()), &ula_steering_sine(n, -0.41));
        let hv = beamspace_transform(&h, &u.transpose(), &u).unwrap();
        let e1 = select_beams(&hv, 1, 1).unwrap().captured_energy();
        let e4 = select_beams(&hv, 4, 4).unwrap().captured_energy();
        assert!(e4 > e1);
        let full = select_beams(&hv, n, n).unwrap();
        assert_relative_eq!(full.captured_energy(), frobenius_sq(&hv), max_relative = 1e-12);
        assert!(select_beams(&hv, n + 1, 1).is_err());
    }

    #[test]
    fn random_rays_shape() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = RandomRayParams {
            n_clusters: 3,
            rays_per_cluster: 4,
            cluster_interarrival: 10e-9,
            ray_interarrival: 1e-9,
            base_distance: 10.0,
        };
        let rays = random_rays(&mut rng, &p).unwrap();
        assert_eq!(rays.len(), 12);
        assert_eq!(rays[0].delay(), 0.0);
        for r in &rays {
            if r.ray_index == 0 {
                assert_eq!(r.ray_arrival, 0.0);
            }
            assert!(r.distance >= 10.0);
        }
    }
}
