//! Reuse-architecture matrices `W_RF = W_LO * W_LC`.
//!
//! `W_LO` is block diagonal: block `i` is `e^{j phi_i} * diag(e^{j phi_{i,k}})`
//! over the `lo_depth` antennas sharing local oscillator `i`. `W_LC` stacks
//! all-ones columns of height `apd_depth`, one per laser chain. With
//! `lo_depth = 1` the LO is dedicated (D&*), with `apd_depth = 1` the
//! photodiode is dedicated (*&D).

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Error, Result, C64};

/// Grid tolerance used when checking that a phase is representable.
const GRID_TOL: f64 = 1e-9;

/// Local-oscillator phase resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Infinite,
    /// `2^B` uniformly spaced phases.
    Bits(u32),
}

impl Resolution {
    /// Number of feasible phases, `None` when continuous.
    pub fn levels(&self) -> Option<u64> {
        match *self {
            Resolution::Infinite => None,
            Resolution::Bits(b) => Some(1u64 << b),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Resolution::Infinite => "inf".to_string(),
            Resolution::Bits(b) => format!("{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReuseArchitecture {
    n_blocks: usize,
    lo_depth: usize,
    apd_depth: usize,
    intra_offsets: DMatrix<f64>,
    resolution: Resolution,
}

/// Fixed intra-block offsets `0.1 pi (k - (lo_depth - 1)/2)`, identical for
/// every block. Corresponds to an intra-block spacing of 0.05 wavelengths.
pub fn default_intra_offsets(n_blocks: usize, lo_depth: usize) -> DMatrix<f64> {
    let center = (lo_depth as f64 - 1.0) / 2.0;
    DMatrix::from_fn(n_blocks, lo_depth, |_, k| 0.1 * PI * (k as f64 - center))
}

impl ReuseArchitecture {
    /// Architecture with the default intra-block offsets.
    pub fn new(
        n_blocks: usize,
        lo_depth: usize,
        apd_depth: usize,
        resolution: Resolution,
    ) -> Result<Self> {
        Self::with_offsets(
            n_blocks,
            lo_depth,
            apd_depth,
            default_intra_offsets(n_blocks, lo_depth),
            resolution,
        )
    }

    /// Architecture with measured (possibly non-uniform) intra-block offsets,
    /// given as an `n_blocks x lo_depth` matrix in radians.
    pub fn with_offsets(
        n_blocks: usize,
        lo_depth: usize,
        apd_depth: usize,
        intra_offsets: DMatrix<f64>,
        resolution: Resolution,
    ) -> Result<Self> {
        if n_blocks == 0 || lo_depth == 0 || apd_depth == 0 {
            return Err(Error::InvalidArchitecture("depths and block count must be positive".into()));
        }
        let n_r = n_blocks * lo_depth;
        if n_r % apd_depth != 0 {
            return Err(Error::InvalidArchitecture(format!(
                "APD reuse depth {apd_depth} does not divide N_r = {n_blocks} x {lo_depth} = {n_r}"
            )));
        }
        if intra_offsets.shape() != (n_blocks, lo_depth) {
            return Err(Error::InvalidArchitecture(format!(
                "intra offsets must be {n_blocks}x{lo_depth}, got {:?}",
                intra_offsets.shape()
            )));
        }
        if intra_offsets.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArchitecture("intra offsets must be finite".into()));
        }
        if lo_depth == 1 && intra_offsets.iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidArchitecture(
                "a dedicated LO has no intra-block offsets".into(),
            ));
        }
        if let Resolution::Bits(b) = resolution {
            if !(1..=30).contains(&b) {
                return Err(Error::InvalidArchitecture(format!("resolution must be 1..=30 bits, got {b}")));
            }
        }
        Ok(ReuseArchitecture { n_blocks, lo_depth, apd_depth, intra_offsets, resolution })
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn lo_depth(&self) -> usize {
        self.lo_depth
    }

    pub fn apd_depth(&self) -> usize {
        self.apd_depth
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn intra_offsets(&self) -> &DMatrix<f64> {
        &self.intra_offsets
    }

    /// Total antenna count `N_r`.
    pub fn n_r(&self) -> usize {
        self.n_blocks * self.lo_depth
    }

    /// Laser (RF) chain count `N_RF = N_r / apd_depth`.
    pub fn n_rf(&self) -> usize {
        self.n_r() / self.apd_depth
    }

    pub fn with_resolution(&self, resolution: Resolution) -> Result<Self> {
        Self::with_offsets(
            self.n_blocks,
            self.lo_depth,
            self.apd_depth,
            self.intra_offsets.clone(),
            resolution,
        )
    }

    /// Checks that `phases` has one entry per block and, under finite
    /// resolution, that every entry lies on the `2^B`-point grid.
    pub fn check_phases(&self, phases: &[f64]) -> Result<()> {
        if phases.len() != self.n_blocks {
            return Err(Error::ConstraintViolation(format!(
                "expected {} LO phases, got {}",
                self.n_blocks,
                phases.len()
            )));
        }
        if let Some(&bad) = phases.iter().find(|p| !p.is_finite()) {
            return Err(Error::ConstraintViolation(format!("non-finite phase {bad}")));
        }
        if let Some(levels) = self.resolution.levels() {
            let step = TAU / levels as f64;
            for (i, &p) in phases.iter().enumerate() {
                let q = p / step;
                if (q - q.round()).abs() * step > GRID_TOL {
                    return Err(Error::ConstraintViolation(format!(
                        "phase {p} of block {i} is not a multiple of 2pi/{levels}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Diagonal of `W_LO` as unit-modulus phasors, one per antenna.
    pub fn lo_diagonal(&self, phases: &[f64]) -> Result<Vec<C64>> {
        self.check_phases(phases)?;
        Ok(self.lo_diagonal_unchecked(phases))
    }

    pub(crate) fn lo_diagonal_unchecked(&self, phases: &[f64]) -> Vec<C64> {
        let mut d = Vec::with_capacity(self.n_r());
        for (i, &phi) in phases.iter().enumerate() {
            for k in 0..self.lo_depth {
                d.push(C64::from_polar(1.0, phi + self.intra_offsets[(i, k)]));
            }
        }
        d
    }

    /// Fixed offset phasor `e^{j phi_{i,k}}` of antenna row `r`.
    pub(crate) fn offset_phasor(&self, r: usize) -> C64 {
        let i = r / self.lo_depth;
        let k = r % self.lo_depth;
        C64::from_polar(1.0, self.intra_offsets[(i, k)])
    }

    /// True when every photodiode group lies inside a single LO block, i.e.
    /// `apd_depth` divides `lo_depth`.
    pub fn is_proportional(&self) -> bool {
        self.lo_depth % self.apd_depth == 0
    }
}

pub fn is_proportional(arch: &ReuseArchitecture) -> bool {
    arch.is_proportional()
}

/// Fiber-combiner adjacency: `n_r / apd_depth` disjoint all-ones columns of
/// height `apd_depth`.
pub fn build_wlc(n_r: usize, apd_depth: usize) -> Result<DMatrix<f64>> {
    if n_r == 0 || apd_depth == 0 || n_r % apd_depth != 0 {
        return Err(Error::InvalidArchitecture(format!(
            "APD reuse depth {apd_depth} does not divide N_r = {n_r}"
        )));
    }
    Ok(DMatrix::from_fn(n_r, n_r / apd_depth, |r, c| if r / apd_depth == c { 1.0 } else { 0.0 }))
}

/// Dense `N_r x N_r` LO matrix.
pub fn build_wlo(arch: &ReuseArchitecture, phases: &[f64]) -> Result<CMatrix> {
    let d = arch.lo_diagonal(phases)?;
    Ok(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)))
}

/// Dense analog combiner `W_LO * W_LC`.
pub fn compose_wrf(arch: &ReuseArchitecture, phases: &[f64]) -> Result<CMatrix> {
    let w_lo = build_wlo(arch, phases)?;
    let w_lc = build_wlc(arch.n_r(), arch.apd_depth())?.map(|x| C64::new(x, 0.0));
    Ok(w_lo * w_lc)
}

/// The three factors of one analog combiner setting.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogCombiner {
    pub w_lo: CMatrix,
    pub w_lc: DMatrix<f64>,
    pub phases: Vec<f64>,
}

impl AnalogCombiner {
    pub fn new(arch: &ReuseArchitecture, phases: &[f64]) -> Result<Self> {
        Ok(AnalogCombiner {
            w_lo: build_wlo(arch, phases)?,
            w_lc: build_wlc(arch.n_r(), arch.apd_depth())?,
            phases: phases.to_vec(),
        })
    }

    pub fn w_rf(&self) -> CMatrix {
        &self.w_lo * self.w_lc.map(|x| C64::new(x, 0.0))
    }
}

/// Sparse view of `W_RF`: its nonzeros are the LO diagonal, row `r` feeding
/// chain `r / apd_depth`. All products are `O(N_r * N_s)`.
#[derive(Debug, Clone)]
pub struct StructuredCombiner {
    pub(crate) diag: Vec<C64>,
    pub(crate) apd_depth: usize,
}

impl StructuredCombiner {
    pub fn new(arch: &ReuseArchitecture, phases: &[f64]) -> Result<Self> {
        Ok(StructuredCombiner { diag: arch.lo_diagonal(phases)?, apd_depth: arch.apd_depth() })
    }

    pub(crate) fn from_parts(diag: Vec<C64>, apd_depth: usize) -> Self {
        StructuredCombiner { diag, apd_depth }
    }

    pub fn n_r(&self) -> usize {
        self.diag.len()
    }

    pub fn n_rf(&self) -> usize {
        self.diag.len() / self.apd_depth
    }

    /// `W_RF * x` for an `N_RF x m` matrix `x`.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        debug_assert_eq!(x.nrows(), self.n_rf());
        CMatrix::from_fn(self.n_r(), x.ncols(), |r, c| self.diag[r] * x[(r / self.apd_depth, c)])
    }

    /// `W_RF^H * y` for an `N_r x m` matrix `y`.
    pub fn adjoint_apply(&self, y: &CMatrix) -> CMatrix {
        debug_assert_eq!(y.nrows(), self.n_r());
        let mut out = CMatrix::zeros(self.n_rf(), y.ncols());
        for c in 0..y.ncols() {
            for (r, d) in self.diag.iter().enumerate() {
                out[(r / self.apd_depth, c)] += d.conj() * y[(r, c)];
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        CMatrix::from_fn(self.n_r(), self.n_rf(), |r, c| {
            if r / self.apd_depth == c {
                self.diag[r]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}
