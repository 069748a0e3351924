//! Clustered (Saleh-Valenzuela) mmWave channels and array responses.
//!
//! Element ordering conventions:
//! - UPA of `N = M*M` elements: index `q1 * M + q2`, `q2` fastest.
//! - Rydberg non-UPA: block index outer, axial index inner, so the response
//!   is `a_upa(blocks) ⊗ a_z(axial)`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Error, Result, C64};

/// Inter-block spacing used throughout the default configurations, in wavelengths.
pub const DEFAULT_BLOCK_SPACING: f64 = 0.5;

/// Intra-block spacing as a fraction of the inter-block spacing.
pub const DEFAULT_INTRA_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Upa,
    RydbergNonUpa,
}

/// Physical layout of an array. Spacings are in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    /// Cell & LO blocks (for a UPA: total element count).
    pub n_blocks: usize,
    /// Antennas per block; always 1 for a UPA.
    pub n_per_block: usize,
    pub block_spacing: f64,
    pub intra_spacing: f64,
}

impl ArrayGeometry {
    /// Square uniform planar array of `n_elements` elements.
    pub fn upa(n_elements: usize, spacing: f64) -> Result<Self> {
        let g = ArrayGeometry {
            kind: ArrayKind::Upa,
            n_blocks: n_elements,
            n_per_block: 1,
            block_spacing: spacing,
            intra_spacing: 0.0,
        };
        g.validate()?;
        Ok(g)
    }

    /// Rydberg layout: a square grid of `n_blocks` Cell & LO blocks, each
    /// carrying `n_per_block` antennas stacked along the axial direction.
    pub fn rydberg(
        n_blocks: usize,
        n_per_block: usize,
        block_spacing: f64,
        intra_spacing: f64,
    ) -> Result<Self> {
        let g = ArrayGeometry {
            kind: ArrayKind::RydbergNonUpa,
            n_blocks,
            n_per_block,
            block_spacing,
            intra_spacing,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n_elements(&self) -> usize {
        self.n_blocks * self.n_per_block
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.n_per_block == 0 {
            return Err(Error::InvalidGeometry("element counts must be positive".into()));
        }
        if isqrt_exact(self.n_blocks).is_none() {
            return Err(Error::InvalidGeometry(format!(
                "block count {} is not a perfect square",
                self.n_blocks
            )));
        }
        if self.kind == ArrayKind::Upa && self.n_per_block != 1 {
            return Err(Error::InvalidGeometry(format!(
                "a UPA has one element per block, got {}",
                self.n_per_block
            )));
        }
        if !(self.block_spacing > 0.0 && self.block_spacing.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "block spacing must be positive, got {}",
                self.block_spacing
            )));
        }
        if !(self.intra_spacing >= 0.0 && self.intra_spacing.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "intra-block spacing must be non-negative, got {}",
                self.intra_spacing
            )));
        }
        Ok(())
    }

    /// Array response toward `(azimuth, elevation)`, dispatched on the kind.
    pub fn response(&self, azimuth: f64, elevation: f64) -> Result<Vec<C64>> {
        match self.kind {
            ArrayKind::Upa => upa_response(azimuth, elevation, self.n_blocks, self.block_spacing),
            ArrayKind::RydbergNonUpa => rydberg_response(azimuth, elevation, self)
        }
    }
}

pub(crate) fn isqrt_exact(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Response of a square UPA, normalized to unit Euclidean norm.
pub fn upa_response(
    azimuth: f64,
    elevation: f64,
    n_elements: usize,
    spacing: f64,
) -> Result<Vec<C64>> {
    let side = isqrt_exact(n_elements).filter(|&s| s > 0).ok_or_else(|| {
        Error::InvalidGeometry(format!("UPA element count {n_elements} is not a perfect square"))
    })?;
    if !(spacing > 0.0) {
        return Err(Error::InvalidGeometry(format!("spacing must be positive, got {spacing}")));
    }
    let u = azimuth.sin() * elevation.sin();
    let v = elevation.cos();
    let scale = 1.0 / (n_elements as f64).sqrt();
    let mut out = Vec::with_capacity(n_elements);
    for q1 in 0..side {
        for q2 in 0..side {
            let phase = TAU * spacing * (q1 as f64 * u + q2 as f64 * v);
            out.push(C64::from_polar(scale, phase));
        }
    }
    Ok(out)
}

/// Axial response of `n` antennas inside one block, centered on the block.
pub fn axial_response(elevation: f64, n: usize, spacing: f64) -> Vec<C64> {
    let center = (n as f64 - 1.0) / 2.0;
    let scale = 1.0 / (n as f64).sqrt();
    let c = elevation.cos();
    (0..n)
        .map(|k| C64::from_polar(scale, TAU * (k as f64 - center) * spacing * c))
        .collect()
}

/// Response of the Rydberg non-UPA layout: block UPA response Kronecker the
/// axial response.
pub fn rydberg_response(azimuth: f64, elevation: f64, geometry: &ArrayGeometry) -> Result<Vec<C64>> {
    if geometry.kind != ArrayKind::RydbergNonUpa {
        return Err(Error::InvalidKind("rydberg_response needs a RydbergNonUpa geometry".into()));
    }
    geometry.validate()?;
    let outer = upa_response(azimuth, elevation, geometry.n_blocks, geometry.block_spacing)?;
    let inner = axial_response(elevation, geometry.n_per_block, geometry.intra_spacing);
    Ok(kron(&outer, &inner))
}

pub(crate) fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// Parameters of the clustered channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub n_tx: usize,
    /// Transmit UPA spacing in wavelengths.
    pub tx_spacing: f64,
    pub rx_geometry: ArrayGeometry,
    pub n_clusters: usize,
    pub n_rays: usize,
    pub cluster_powers: Vec<f64>,
    /// Angular spread (standard deviation of the per-ray offsets), radians.
    pub angular_spread: f64,
}

impl ChannelParams {
    /// Defaults used in the reference simulations: 5 clusters of 10 rays,
    /// unit cluster powers, 10 degrees of angular spread, half-wavelength
    /// transmit spacing.
    pub fn with_defaults(n_tx: usize, rx_geometry: ArrayGeometry) -> Self {
        ChannelParams {
            n_tx,
            tx_spacing: DEFAULT_BLOCK_SPACING,
            rx_geometry,
            n_clusters: 5,
            n_rays: 10,
            cluster_powers: vec![1.0; 5],
            angular_spread: 10f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || isqrt_exact(self.n_tx).is_none() {
            return Err(Error::InvalidChannel(format!(
                "transmit antenna count {} is not a positive perfect square",
                self.n_tx
            )));
        }
        if !(self.tx_spacing > 0.0) {
            return Err(Error::InvalidChannel("transmit spacing must be positive".into()));
        }
        self.rx_geometry.validate()?;
        if self.n_clusters == 0 || self.n_rays == 0 {
            return Err(Error::InvalidChannel("cluster and ray counts must be positive".into()));
        }
        if self.cluster_powers.len() != self.n_clusters {
            return Err(Error::InvalidChannel(format!(
                "expected {} cluster powers, got {}",
                self.n_clusters,
                self.cluster_powers.len()
            )));
        }
        if self.cluster_powers.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidChannel("cluster powers must be positive".into()));
        }
        if !(self.angular_spread >= 0.0 && self.angular_spread.is_finite()) {
            return Err(Error::InvalidChannel("angular spread must be non-negative".into()));
        }
        Ok(())
    }

    /// Draws gains and angles for every ray. Only the cluster structure is
    /// used, so the same paths can be rendered onto several array layouts.
    pub fn sample_paths<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<PathMeta> {
        let scale = self.angular_spread / std::f64::consts::SQRT_2;
        let mut paths = Vec::with_capacity(self.n_clusters * self.n_rays);
        for &power in &self.cluster_powers {
            let aoa_az = rng.random::<f64>() * TAU;
            let aoa_el = rng.random::<f64>() * PI;
            let aod_az = rng.random::<f64>() * TAU;
            let aod_el = rng.random::<f64>() * PI;
            let sd = (power / 2.0).sqrt();
            for _ in 0..self.n_rays {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                paths.push(PathMeta {
                    gain: C64::new(sd * re, sd * im),
                    aoa_azimuth: aoa_az + laplace(rng, scale),
                    aoa_elevation: aoa_el + laplace(rng, scale),
                    aod_azimuth: aod_az + laplace(rng, scale),
                    aod_elevation: aod_el + laplace(rng, scale),
                });
            }
        }
        paths
    }
}

/// Zero-mean Laplacian sample with scale `b` (standard deviation `b * sqrt(2)`).
fn laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -b * u.signum() * tail.ln();
        }
    }
}

/// Gain and geometry of one propagation ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMeta {
    pub gain: C64,
    pub aoa_azimuth: f64,
    pub aoa_elevation: f64,
    pub aod_azimuth: f64,
    pub aod_elevation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `N_r x N_t` channel matrix.
    pub matrix: CMatrix,
    pub paths: Vec<PathMeta>,
}

impl ChannelRealization {
    /// Renders `paths` into a channel matrix for the given arrays, using the
    /// `sqrt(N_t N_r / L)` normalization with `L = paths.len()`.
    pub fn from_paths(
        n_tx: usize,
        tx_spacing: f64,
        rx_geometry: &ArrayGeometry,
        paths: Vec<PathMeta>,
    ) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidChannel("at least one path is required".into()));
        }
        rx_geometry.validate()?;
        let n_rx = rx_geometry.n_elements();
        let norm = ((n_tx * n_rx) as f64 / paths.len() as f64).sqrt();
        let mut matrix = CMatrix::zeros(n_rx, n_tx);
        for p in &paths {
            let a_r = rx_geometry.response(p.aoa_azimuth, p.aoa_elevation)?;
            let a_t = upa_response(p.aod_azimuth, p.aod_elevation, n_tx, tx_spacing)?;
            let g = p.gain * norm;
            for (c, at) in a_t.iter().enumerate() {
                let w = g * at.conj();
                let mut col = matrix.column_mut(c);
                for (r, ar) in a_r.iter().enumerate() {
                    col[r] += ar * w;
                }
            }
        }
        Ok(ChannelRealization { matrix, paths })
    }
}

/// Draws one channel realization. Deterministic for a given RNG state.
pub fn generate_channel<R: Rng + ?Sized>(
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    params.validate()?;
    let paths = params.sample_paths(rng);
    ChannelRealization::from_paths(params.n_tx, params.tx_spacing, &params.rx_geometry, paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn norm(v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn upa_broadside_is_flat() {
        let a = upa_response(0.0, PI / 2.0, 4, 0.5).unwrap();
        for z in a {
            assert!(close(z, C64::new(0.5, 0.0), 1e-15));
        }
    }

    #[test]
    fn upa_endfire_alternates_with_q1() {
        let a = upa_response(PI / 2.0, PI / 2.0, 4, 0.5).unwrap();
        let expect = [0.5, 0.5, -0.5, -0.5];
        for (z, e) in a.iter().zip(expect) {
            assert!(close(*z, C64::new(e, 0.0), 1e-15), "{z} vs {e}");
        }
    }

    #[test]
    fn upa_rejects_non_square() {
        assert!(matches!(upa_response(0.1, 0.2, 12, 0.5), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn upa_144_unit_norm() {
        let a = upa_response(1.3, 0.4, 144, 0.5).unwrap();
        assert!((norm(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rydberg_single_axial_matches_upa() {
        let g = ArrayGeometry::rydberg(36, 1, 0.5, 0.05).unwrap();
        let a = rydberg_response(0.7, 1.9, &g).unwrap();
        let b = upa_response(0.7, 1.9, 36, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn axial_response_flat_at_broadside() {
        let az = axial_response(PI / 2.0, 3, 0.05);
        let v = 1.0 / 3f64.sqrt();
        for z in az {
            assert!(close(z, C64::new(v, 0.0), 1e-15));
        }
    }

    #[test]
    fn rydberg_rejects_upa_kind() {
        let g = ArrayGeometry::upa(16, 0.5).unwrap();
        assert!(matches!(rydberg_response(0.1, 0.2, &g), Err(Error::InvalidKind(_))));
    }

    #[test]
    fn geometry_invariants() {
        assert!(ArrayGeometry::upa(15, 0.5).is_err());
        assert!(ArrayGeometry::rydberg(36, 4, 0.0, 0.05).is_err());
        assert!(ArrayGeometry::rydberg(36, 4, 0.5, -0.1).is_err());
        let g = ArrayGeometry::rydberg(36, 6, 0.5, 0.05).unwrap();
        assert_eq!(g.n_elements(), 216);
    }

    #[test]
    fn single_path_channel_is_rank_one() {
        let rx = ArrayGeometry::rydberg(4, 2, 0.5, 0.05).unwrap();
        let p = PathMeta {
            gain: C64::new(1.0, 0.0),
            aoa_azimuth: 0.4,
            aoa_elevation: 1.2,
            aod_azimuth: 2.0,
            aod_elevation: 0.3,
        };
        let ch = ChannelRealization::from_paths(9, 0.5, &rx, vec![p]).unwrap();
        let a_r = rx.response(0.4, 1.2).unwrap();
        let a_t = upa_response(2.0, 0.3, 9, 0.5).unwrap();
        let s = (9.0 * 8.0f64).sqrt();
        for r in 0..8 {
            for c in 0..9 {
                let e = a_r[r] * a_t[c].conj() * s;
                assert!(close(ch.matrix[(r, c)], e, 1e-13));
            }
        }
    }

    #[test]
    fn channel_is_seed_deterministic() {
        let rx = ArrayGeometry::rydberg(9, 2, 0.5, 0.05).unwrap();
        let params = ChannelParams::with_defaults(16, rx);
        let a = generate_channel(&params, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = generate_channel(&params, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.paths.len(), 50);
        assert_eq!(a.matrix.shape(), (18, 16));
    }

    #[test]
    fn channel_params_validation() {
        let rx = ArrayGeometry::upa(16, 0.5).unwrap();
        let mut p = ChannelParams::with_defaults(12, rx.clone());
        assert!(p.validate().is_err());
        p.n_tx = 16;
        p.validate().unwrap();
        p.cluster_powers = vec![1.0; 4];
        assert!(p.validate().is_err());
        p.cluster_powers = vec![1.0, 1.0, 0.0, 1.0, 1.0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn laplace_spread_matches_standard_deviation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spread = 0.2;
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| laplace(&mut rng, spread / 2f64.sqrt())).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.003);
        assert!((var.sqrt() - spread).abs() / spread < 0.02);
    }
}
