//! Spectral efficiency and Monte-Carlo experiments.
//!
//! Every trial draws one set of propagation paths and renders it onto each
//! receiver layout the experiment needs, so all curves of an experiment are
//! compared on the same channels. Trials run in parallel on the ambient
//! rayon pool; aggregation is in trial order with pairwise summation, so the
//! tables do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::architecture::{ReuseArchitecture, Resolution};
use crate::channel::{isqrt_exact, ArrayGeometry, ChannelParams, ChannelRealization, PathMeta};
use crate::optimizer::{
    alternating_minimize, optimal_digital_combiner, solve, CombinerSolution, DigitalReference,
    OptimizerConfig, SolverChoice,
};
use crate::stats::{summarize, Summary};
use crate::{CMatrix, Error, Result, C64};

/// Eigenvalues below this are reported instead of clamped.
const NEGATIVE_EIG_TOL: f64 = -1e-9;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Eigenvalues of the Hermitian form of `W^+ (HF)(HF)^H W`.
///
/// With `W^H W = L L^H`, the matrix is similar to `A A^H` where
/// `A = L^{-1} W^H (HF)`, so the log-determinant can be taken from a
/// Hermitian eigendecomposition. Invertible right factors of `W` cancel.
pub fn effective_gains(h_f: &CMatrix, combined: &CMatrix) -> Result<Vec<f64>> {
    if h_f.nrows() != combined.nrows() {
        return Err(Error::InvalidPrecondition(format!(
            "combiner has {} rows, channel has {}",
            combined.nrows(),
            h_f.nrows()
        )));
    }
    let gram = combined.adjoint() * combined;
    let n = gram.nrows();
    let scale = (0..n).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Numeric(format!("combined combiner ({}x{}) is rank deficient", combined.nrows(), n))
    })?;
    let l = chol.l();
    let min_pivot = (0..n).map(|i| l[(i, i)].re.powi(2)).fold(f64::INFINITY, f64::min);
    if !(scale > 0.0) || min_pivot < 1e-12 * scale {
        return Err(Error::Numeric(format!(
            "combined combiner is rank deficient (pivot ratio {:.3e})",
            min_pivot / scale
        )));
    }
    let projected = combined.adjoint() * h_f;
    let a = l
        .solve_lower_triangular(&projected)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let m = &a * a.adjoint();
    let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigenvalues();
    let mut out = Vec::with_capacity(eig.len());
    for &lambda in eig.iter() {
        if !lambda.is_finite() {
            return Err(Error::Numeric("non-finite eigenvalue in log-determinant".into()));
        }
        if lambda < NEGATIVE_EIG_TOL {
            return Err(Error::Numeric(format!(
                "log-determinant argument has negative eigenvalue {lambda:.3e}"
            )));
        }
        out.push(lambda.max(0.0));
    }
    Ok(out)
}

/// `sum log2(1 + snr/N_s * lambda)` over the effective gains.
pub fn se_from_gains(gains: &[f64], n_streams: usize, snr_linear: f64) -> f64 {
    let k = snr_linear / n_streams as f64;
    gains.iter().map(|&g| (k * g).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

/// Achievable rate (bits/s/Hz) with ideal precoding `f_opt` and hybrid
/// combiner `w_rf * w_bb`.
pub fn spectral_efficiency(
    h: &CMatrix,
    w_rf: &CMatrix,
    w_bb: &CMatrix,
    f_opt: &CMatrix,
    n_streams: usize,
    snr_linear: f64,
) -> Result<f64> {
    let combined = w_rf * w_bb;
    let gains = effective_gains(&(h * f_opt), &combined)?;
    Ok(se_from_gains(&gains, n_streams, snr_linear))
}

/// Result of designing and scoring one architecture on one channel.
#[derive(Debug, Clone)]
pub struct ArchitectureEvaluation {
    /// One entry per SNR grid point.
    pub spectral_efficiency: Vec<f64>,
    pub solution: CombinerSolution,
}

/// Computes the digital reference for `h`, designs the combiner and scores
/// it on every SNR (linear) in `snr_grid`.
pub fn evaluate_architecture<R: Rng + ?Sized>(
    h: &CMatrix,
    arch: &ReuseArchitecture,
    n_streams: usize,
    snr_grid: &[f64],
    solver: SolverChoice,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<ArchitectureEvaluation> {
    let reference = optimal_digital_combiner(h, n_streams)?;
    evaluate_with_reference(h, &reference, arch, snr_grid, solver, config, rng)
}

/// Same as [`evaluate_architecture`] with a precomputed digital reference.
pub fn evaluate_with_reference<R: Rng + ?Sized>(
    h: &CMatrix,
    reference: &DigitalReference,
    arch: &ReuseArchitecture,
    snr_grid: &[f64],
    solver: SolverChoice,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<ArchitectureEvaluation> {
    let solution = solve(arch, &reference.w_opt, solver, config, rng)?;
    let combined = solution.combined(arch)?;
    let gains = effective_gains(&(h * &reference.f_opt), &combined)?;
    let n_s = reference.w_opt.ncols();
    Ok(ArchitectureEvaluation {
        spectral_efficiency: snr_grid.iter().map(|&s| se_from_gains(&gains, n_s, s)).collect(),
        solution,
    })
}

/// Spectral efficiency of the unconstrained digital combiner `W_opt`.
pub fn ideal_digital_se(h: &CMatrix, reference: &DigitalReference, snr_grid: &[f64]) -> Result<Vec<f64>> {
    let gains = effective_gains(&(h * &reference.f_opt), &reference.w_opt)?;
    let n_s = reference.w_opt.ncols();
    Ok(snr_grid.iter().map(|&s| se_from_gains(&gains, n_s, s)).collect())
}

/// Partially connected conventional array: one free phase shifter per
/// antenna, `n_r / n_rf_chains` adjacent antennas summed per chain. Solved
/// with the same alternating minimization as the Rydberg architectures.
pub fn conventional_pc_baseline<R: Rng + ?Sized>(
    n_r: usize,
    n_rf_chains: usize,
    resolution: Resolution,
    w_opt: &CMatrix,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<CombinerSolution> {
    let arch = pc_architecture(n_r, n_rf_chains, resolution)?;
    alternating_minimize(&arch, w_opt, config, rng)
}

/// Architecture describing a partially connected conventional array.
pub fn pc_architecture(n_r: usize, n_rf_chains: usize, resolution: Resolution) -> Result<ReuseArchitecture> {
    if n_rf_chains == 0 || n_r % n_rf_chains != 0 {
        return Err(Error::InvalidArchitecture(format!(
            "{n_rf_chains} RF chains do not divide {n_r} antennas"
        )));
    }
    ReuseArchitecture::new(n_r, 1, n_r / n_rf_chains, resolution)
}

// ---------------------------------------------------------------------------
// Experiment description

fn default_tx_spacing() -> f64 {
    crate::channel::DEFAULT_BLOCK_SPACING
}

fn default_block_spacing() -> f64 {
    crate::channel::DEFAULT_BLOCK_SPACING
}

fn default_intra_spacing() -> f64 {
    crate::channel::DEFAULT_BLOCK_SPACING * crate::channel::DEFAULT_INTRA_RATIO
}

fn default_resolution() -> Resolution {
    Resolution::Infinite
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub n_tx: usize,
    #[serde(default = "default_tx_spacing")]
    pub tx_spacing: f64,
    pub n_clusters: usize,
    pub n_rays: usize,
    pub cluster_powers: Vec<f64>,
    pub angular_spread_deg: f64,
}

impl ChannelConfig {
    pub fn params(&self, rx_geometry: ArrayGeometry) -> ChannelParams {
        ChannelParams {
            n_tx: self.n_tx,
            tx_spacing: self.tx_spacing,
            rx_geometry,
            n_clusters: self.n_clusters,
            n_rays: self.n_rays,
            cluster_powers: self.cluster_powers.clone(),
            angular_spread: self.angular_spread_deg.to_radians(),
        }
    }
}

/// Receiver layout shared by all curves; the LO depth comes from each curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverArray {
    pub n_blocks: usize,
    #[serde(default = "default_block_spacing")]
    pub block_spacing: f64,
    #[serde(default = "default_intra_spacing")]
    pub intra_spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    Snr,
    LoDepth { values: Vec<usize> },
    ApdDepth { values: Vec<usize> },
    Chains { values: Vec<usize> },
}

impl Sweep {
    pub fn param_name(&self) -> &'static str {
        match self {
            Sweep::Snr => "snr_db",
            Sweep::LoDepth { .. } => "lo_depth",
            Sweep::ApdDepth { .. } => "apd_depth",
            Sweep::Chains { .. } => "chains",
        }
    }

    fn values(&self) -> Option<&[usize]> {
        match self {
            Sweep::Snr => None,
            Sweep::LoDepth { values } | Sweep::ApdDepth { values } | Sweep::Chains { values } => {
                Some(values)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReceiverSpec {
    /// Rydberg reuse array (D&D, D&S, S&D or S&S by depths).
    Rydberg {
        lo_depth: usize,
        apd_depth: usize,
        #[serde(default = "default_resolution")]
        resolution: Resolution,
        #[serde(default)]
        solver: SolverChoice,
    },
    /// Conventional PC array on a square UPA with `n_blocks * lo_depth` elements.
    UpaPc {
        lo_depth: usize,
        apd_depth: usize,
        #[serde(default = "default_resolution")]
        resolution: Resolution,
    },
    /// Conventional PC array with the Rydberg layout.
    NonUpaPc {
        lo_depth: usize,
        apd_depth: usize,
        #[serde(default = "default_resolution")]
        resolution: Resolution,
    },
    /// Fully digital combiner on the Rydberg layout with LO reuse.
    IdealDigitalReuse { lo_depth: usize },
    /// Fully digital combiner on one antenna per block.
    IdealDigitalNoReuse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub label: String,
    pub receiver: ReceiverSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub channel: ChannelConfig,
    pub receiver_array: ReceiverArray,
    pub n_streams: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub sweep: Sweep,
    pub curves: Vec<Curve>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluator {
    Hybrid { arch: ReuseArchitecture, solver: SolverChoice },
    IdealDigital,
}

/// One receiver configuration at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub curve: usize,
    pub label: String,
    /// Sweep value for depth/chain sweeps; `None` for SNR sweeps.
    pub sweep_value: Option<usize>,
    pub geometry: ArrayGeometry,
    pub evaluator: Evaluator,
}

fn check_positive(path: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::experiment(path, "must be positive"));
    }
    Ok(())
}

impl ExperimentSpec {
    /// Validates every field and resolves the receiver configurations.
    pub fn validate(&self) -> Result<Vec<Point>> {
        let ch = &self.channel;
        if ch.n_tx == 0 || isqrt_exact(ch.n_tx).is_none() {
            return Err(Error::experiment("channel.n_tx", format!("{} is not a positive perfect square", ch.n_tx)));
        }
        if !(ch.tx_spacing > 0.0 && ch.tx_spacing.is_finite()) {
            return Err(Error::experiment("channel.tx_spacing", "must be positive"));
        }
        check_positive("channel.n_clusters", ch.n_clusters)?;
        check_positive("channel.n_rays", ch.n_rays)?;
        if ch.cluster_powers.len() != ch.n_clusters {
            return Err(Error::experiment(
                "channel.cluster_powers",
                format!("expected {} entries, got {}", ch.n_clusters, ch.cluster_powers.len()),
            ));
        }
        if let Some(i) = ch.cluster_powers.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::experiment(format!("channel.cluster_powers[{i}]"), "must be positive"));
        }
        if !(ch.angular_spread_deg >= 0.0 && ch.angular_spread_deg.is_finite()) {
            return Err(Error::experiment("channel.angular_spread_deg", "must be non-negative"));
        }
        let ra = &self.receiver_array;
        if ra.n_blocks == 0 || isqrt_exact(ra.n_blocks).is_none() {
            return Err(Error::experiment(
                "receiver_array.n_blocks",
                format!("{} is not a positive perfect square", ra.n_blocks),
            ));
        }
        if !(ra.block_spacing > 0.0 && ra.block_spacing.is_finite()) {
            return Err(Error::experiment("receiver_array.block_spacing", "must be positive"));
        }
        if !(ra.intra_spacing >= 0.0 && ra.intra_spacing.is_finite()) {
            return Err(Error::experiment("receiver_array.intra_spacing", "must be non-negative"));
        }
        check_positive("n_streams", self.n_streams)?;
        check_positive("trials", self.trials)?;
        if self.snr_db.is_empty() {
            return Err(Error::experiment("snr_db", "at least one SNR value is required"));
        }
        if let Some(i) = self.snr_db.iter().position(|x| !x.is_finite()) {
            return Err(Error::experiment(format!("snr_db[{i}]"), "must be finite"));
        }
        if self.sweep != Sweep::Snr && self.snr_db.len() != 1 {
            return Err(Error::experiment(
                "snr_db",
                format!("a {} sweep takes exactly one SNR value", self.sweep.param_name()),
            ));
        }
        self.optimizer.validate()?;
        if let Some(values) = self.sweep.values() {
            if values.is_empty() {
                return Err(Error::experiment("sweep.values", "sweep is empty"));
            }
            if let Some(i) = values.iter().position(|&v| v == 0) {
                return Err(Error::experiment(format!("sweep.values[{i}]"), "must be positive"));
            }
        }
        if self.curves.is_empty() {
            return Err(Error::experiment("curves", "at least one curve is required"));
        }
        for (i, c) in self.curves.iter().enumerate() {
            if c.label.trim().is_empty() {
                return Err(Error::experiment(format!("curves[{i}].label"), "must not be empty"));
            }
            if self.curves[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::experiment(format!("curves[{i}].label"), format!("duplicate label `{}`", c.label)));
            }
        }

        let mut points = Vec::new();
        for (i, c) in self.curves.iter().enumerate() {
            match self.sweep.values() {
                None => points.push(self.resolve(i, c, None)?),
                Some(values) => {
                    for &v in values {
                        points.push(self.resolve(i, c, Some(v))?);
                    }
                }
            }
        }
        Ok(points)
    }

    fn resolve(&self, index: usize, curve: &Curve, value: Option<usize>) -> Result<Point> {
        let path = format!("curves[{index}].receiver");
        let ra = &self.receiver_array;
        let (mut lo, mut apd) = match curve.receiver {
            ReceiverSpec::Rydberg { lo_depth, apd_depth, .. }
            | ReceiverSpec::UpaPc { lo_depth, apd_depth, .. }
            | ReceiverSpec::NonUpaPc { lo_depth, apd_depth, .. } => (lo_depth, apd_depth),
            ReceiverSpec::IdealDigitalReuse { lo_depth } => (lo_depth, 1),
            ReceiverSpec::IdealDigitalNoReuse => (1, 1),
        };
        let ideal = matches!(curve.receiver, ReceiverSpec::IdealDigitalReuse { .. } | ReceiverSpec::IdealDigitalNoReuse);
        match (&self.sweep, value) {
            (Sweep::LoDepth { .. }, Some(v)) if !matches!(curve.receiver, ReceiverSpec::IdealDigitalNoReuse) => lo = v,
            (Sweep::ApdDepth { .. }, Some(v)) if !ideal => apd = v,
            (Sweep::Chains { .. }, Some(v)) if !ideal => {
                let n_r = ra.n_blocks * lo;
                if n_r % v != 0 {
                    return Err(Error::experiment(
                        "sweep.values",
                        format!("{v} chains do not divide N_r = {n_r} for curve `{}`", curve.label),
                    ));
                }
                apd = n_r / v;
            }
            _ => {}
        }
        check_positive(&format!("{path}.lo_depth"), lo)?;
        check_positive(&format!("{path}.apd_depth"), apd)?;
        let n_r = ra.n_blocks * lo;
        if n_r % apd != 0 {
            return Err(Error::experiment(
                format!("{path}.apd_depth"),
                format!("invalid architecture: APD reuse depth {apd} does not divide N_r = {} x {lo} = {n_r}", ra.n_blocks),
            ));
        }
        let n_rf = n_r / apd;
        if !(self.n_streams <= n_rf && n_rf <= n_r) {
            return Err(Error::experiment(
                "n_streams",
                format!(
                    "N_s <= N_RF <= N_r violated for curve `{}`: N_s = {}, N_RF = {n_rf}, N_r = {n_r}",
                    curve.label, self.n_streams
                ),
            ));
        }
        if self.n_streams > self.channel.n_tx {
            return Err(Error::experiment("n_streams", format!("exceeds N_t = {}", self.channel.n_tx)));
        }
        let at = |e: Error| Error::experiment(path.clone(), e.to_string());
        let rydberg_geom = || ArrayGeometry::rydberg(ra.n_blocks, lo, ra.block_spacing, ra.intra_spacing);
        let (geometry, evaluator) = match curve.receiver {
            ReceiverSpec::Rydberg { resolution, solver, .. } => {
                let arch = ReuseArchitecture::new(ra.n_blocks, lo, apd, resolution).map_err(at)?;
                if solver == SolverChoice::Direct && !arch.is_proportional() {
                    return Err(Error::experiment(
                        format!("{path}.solver"),
                        format!("direct solver needs apd_depth {apd} to divide lo_depth {lo}"),
                    ));
                }
                (rydberg_geom().map_err(at)?, Evaluator::Hybrid { arch, solver })
            }
            ReceiverSpec::UpaPc { resolution, .. } => {
                if isqrt_exact(n_r).is_none() {
                    return Err(Error::experiment(
                        format!("{path}.lo_depth"),
                        format!("a UPA needs a square element count, N_r = {n_r}"),
                    ));
                }
                let arch = pc_architecture(n_r, n_rf, resolution).map_err(at)?;
                let g = ArrayGeometry::upa(n_r, ra.block_spacing).map_err(at)?;
                (g, Evaluator::Hybrid { arch, solver: SolverChoice::AltMin })
            }
            ReceiverSpec::NonUpaPc { resolution, .. } => {
                let arch = pc_architecture(n_r, n_rf, resolution).map_err(at)?;
                (rydberg_geom().map_err(at)?, Evaluator::Hybrid { arch, solver: SolverChoice::AltMin })
            }
            ReceiverSpec::IdealDigitalReuse { .. } | ReceiverSpec::IdealDigitalNoReuse => {
                (rydberg_geom().map_err(at)?, Evaluator::IdealDigital)
            }
        };
        Ok(Point { curve: index, label: curve.label.clone(), sweep_value: value, geometry, evaluator })
    }

    /// SNR grid in linear scale.
    pub fn snr_linear(&self) -> Vec<f64> {
        self.snr_db.iter().map(|&d| db_to_linear(d)).collect()
    }
}

// ---------------------------------------------------------------------------
// Running

#[derive(Debug, Clone, PartialEq)]
pub struct RowKey {
    pub label: String,
    pub sweep_param: String,
    pub sweep_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub label: String,
    pub error: Error,
}

/// Per-trial outcomes of an experiment.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub trials: usize,
    pub rows: Vec<RowKey>,
    /// `samples[row][trial]`, `None` where the trial failed.
    pub samples: Vec<Vec<Option<f64>>>,
    pub points: Vec<Point>,
    /// `residuals[point][trial]` (0 for the ideal digital combiner).
    pub residuals: Vec<Vec<Option<f64>>>,
    /// `iterations[point][trial]`.
    pub iterations: Vec<Vec<Option<usize>>>,
    pub failures: Vec<TrialFailure>,
    /// Solver runs whose objective history increased by more than 1e-12.
    pub non_monotone_runs: usize,
    pub solver_runs: usize,
}

impl ExperimentRecord {
    pub fn row_index(&self, label: &str, sweep_value: f64) -> Option<usize> {
        self.rows.iter().position(|r| r.label == label && r.sweep_value == sweep_value)
    }

    pub fn row_samples(&self, label: &str, sweep_value: f64) -> Option<&[Option<f64>]> {
        self.row_index(label, sweep_value).map(|i| self.samples[i].as_slice())
    }

    pub fn summary(&self, row: usize) -> Summary {
        let xs: Vec<f64> = self.samples[row].iter().flatten().copied().collect();
        summarize(&xs)
    }

    pub fn table(&self) -> ResultTable {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let s = self.summary(i);
                ResultRow {
                    label: k.label.clone(),
                    sweep_param: k.sweep_param.clone(),
                    sweep_value: k.sweep_value,
                    mean_se: s.mean,
                    stderr: s.stderr,
                    trials: s.count,
                }
            })
            .collect();
        ResultTable { seed: self.seed, rows }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub label: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    /// Mean spectral efficiency, bits/s/Hz.
    pub mean_se: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub seed: u64,
    pub rows: Vec<ResultRow>,
}

/// Independent random stream for one trial.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

struct PointOutcome {
    se: Result<Vec<f64>>,
    residual: Option<f64>,
    iterations: Option<usize>,
    monotone: Option<bool>,
}

struct Rendered {
    geometry: ArrayGeometry,
    channel: Result<(CMatrix, DigitalReference)>,
}

fn render(spec: &ExperimentSpec, geometry: &ArrayGeometry, paths: &[PathMeta]) -> Result<(CMatrix, DigitalReference)> {
    let ch = ChannelRealization::from_paths(spec.channel.n_tx, spec.channel.tx_spacing, geometry, paths.to_vec())?;
    let reference = optimal_digital_combiner(&ch.matrix, spec.n_streams)?;
    Ok((ch.matrix, reference))
}

fn is_monotone(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

fn run_trial(spec: &ExperimentSpec, points: &[Point], snr: &[f64], trial: usize) -> Vec<PointOutcome> {
    let mut rng = trial_rng(spec.seed, trial);
    let paths = spec.channel.params(points[0].geometry.clone()).sample_paths(&mut rng);
    let solver_seed: u64 = rng.random();

    let mut cache: Vec<Rendered> = Vec::new();
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let idx = match cache.iter().position(|c| c.geometry == p.geometry) {
            Some(i) => i,
            None => {
                cache.push(Rendered { geometry: p.geometry.clone(), channel: render(spec, &p.geometry, &paths) });
                cache.len() - 1
            }
        };
        let (h, reference) = match &cache[idx].channel {
            Ok(c) => (&c.0, &c.1),
            Err(e) => {
                out.push(PointOutcome { se: Err(e.clone()), residual: None, iterations: None, monotone: None });
                continue;
            }
        };
        let outcome = match &p.evaluator {
            Evaluator::IdealDigital => PointOutcome {
                se: ideal_digital_se(h, reference, snr),
                residual: Some(0.0),
                iterations: Some(0),
                monotone: None,
            },
            Evaluator::Hybrid { arch, solver } => {
                let mut srng = ChaCha8Rng::seed_from_u64(solver_seed);
                match evaluate_with_reference(h, reference, arch, snr, *solver, &spec.optimizer, &mut srng) {
                    Ok(ev) => PointOutcome {
                        residual: Some(ev.solution.residual),
                        iterations: Some(ev.solution.iterations),
                        monotone: Some(is_monotone(&ev.solution.objective_history)),
                        se: Ok(ev.spectral_efficiency),
                    },
                    Err(e) => PointOutcome { se: Err(e), residual: None, iterations: None, monotone: None },
                }
            }
        };
        out.push(outcome);
    }
    out
}

/// Runs every trial of `spec` and keeps per-trial outcomes.
pub fn run_experiment_detailed(spec: &ExperimentSpec) -> Result<ExperimentRecord> {
    let points = spec.validate()?;
    let snr = spec.snr_linear();
    let per_trial: Vec<Vec<PointOutcome>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &points, &snr, t))
        .collect();

    let param = spec.sweep.param_name().to_string();
    let mut rows = Vec::new();
    // (point index, snr index) for every row
    let mut row_src = Vec::new();
    for (pi, p) in points.iter().enumerate() {
        match p.sweep_value {
            None => {
                for (si, &db) in spec.snr_db.iter().enumerate() {
                    rows.push(RowKey { label: p.label.clone(), sweep_param: param.clone(), sweep_value: db });
                    row_src.push((pi, si));
                }
            }
            Some(v) => {
                rows.push(RowKey { label: p.label.clone(), sweep_param: param.clone(), sweep_value: v as f64 });
                row_src.push((pi, 0));
            }
        }
    }

    let mut samples = vec![Vec::with_capacity(spec.trials); rows.len()];
    let mut residuals = vec![Vec::with_capacity(spec.trials); points.len()];
    let mut iterations = vec![Vec::with_capacity(spec.trials); points.len()];
    let mut failures = Vec::new();
    let mut non_monotone_runs = 0;
    let mut solver_runs = 0;
    for (t, outcomes) in per_trial.iter().enumerate() {
        for (ri, &(pi, si)) in row_src.iter().enumerate() {
            samples[ri].push(outcomes[pi].se.as_ref().ok().map(|v| v[si]));
        }
        for (pi, o) in outcomes.iter().enumerate() {
            residuals[pi].push(o.residual);
            iterations[pi].push(o.iterations);
            if let Some(m) = o.monotone {
                solver_runs += 1;
                if !m {
                    non_monotone_runs += 1;
                }
            }
            if let Err(e) = &o.se {
                failures.push(TrialFailure { trial: t, label: points[pi].label.clone(), error: e.clone() });
            }
        }
    }
    Ok(ExperimentRecord {
        seed: spec.seed,
        trials: spec.trials,
        rows,
        samples,
        points,
        residuals,
        iterations,
        failures,
        non_monotone_runs,
        solver_runs,
    })
}

/// Runs `spec` and returns the averaged table along with any per-trial
/// failures (failed trials are excluded from the averages).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(ResultTable, Vec<TrialFailure>)> {
    let record = run_experiment_detailed(spec)?;
    Ok((record.table(), record.failures))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub label: String,
    pub iteration: usize,
    pub mean_objective: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Mean objective `g` after each full alternating-minimization iteration
/// (iteration 0 is the value after the first `W_BB` update). Every hybrid
/// point is solved by alternating minimization; histories that stop early
/// are held at their final value.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRow>> {
    let points = spec.validate()?;
    let hybrid: Vec<&Point> = points.iter().filter(|p| matches!(p.evaluator, Evaluator::Hybrid { .. })).collect();
    if hybrid.is_empty() {
        return Err(Error::experiment("curves", "convergence needs at least one hybrid receiver"));
    }
    let max_it = spec.optimizer.max_iterations;
    let per_trial: Vec<Vec<Option<Vec<f64>>>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(spec.seed, t);
            let paths = spec.channel.params(hybrid[0].geometry.clone()).sample_paths(&mut rng);
            let solver_seed: u64 = rng.random();
            hybrid
                .iter()
                .map(|p| {
                    let Evaluator::Hybrid { arch, .. } = &p.evaluator else { return None };
                    let (_, reference) = render(spec, &p.geometry, &paths).ok()?;
                    let mut srng = ChaCha8Rng::seed_from_u64(solver_seed);
                    let sol = alternating_minimize(arch, &reference.w_opt, &spec.optimizer, &mut srng).ok()?;
                    let h = &sol.objective_history;
                    let mut curve: Vec<f64> = std::iter::once(h[0]).chain(h.iter().skip(1).step_by(2).take(sol.iterations).copied()).collect();
                    let last = *curve.last().unwrap_or(&h[0]);
                    curve.resize(max_it + 1, last);
                    Some(curve)
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (k, p) in hybrid.iter().enumerate() {
        let label = match p.sweep_value {
            Some(v) => format!("{} ({}={v})", p.label, spec.sweep.param_name()),
            None => p.label.clone(),
        };
        for it in 0..=max_it {
            let xs: Vec<f64> = per_trial.iter().filter_map(|t| t[k].as_ref().map(|c| c[it])).collect();
            let s = summarize(&xs);
            rows.push(ConvergenceRow { label: label.clone(), iteration: it, mean_objective: s.mean, stderr: s.stderr, trials: s.count });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::sorted_svd;
    use nalgebra::DMatrix;

    fn unitary(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).qr().q()
    }

    #[test]
    fn closed_form_for_digital_optimum() {
        let u = unitary(2, 1);
        let v = unitary(2, 2);
        let s = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(2.0, 0.0), C64::new(1.0, 0.0)]));
        let h = &u * s * v.adjoint();
        let svd = sorted_svd(&h).unwrap();
        let w = svd.u.columns(0, 1).into_owned();
        let f = svd.v.columns(0, 1).into_owned();
        let r = spectral_efficiency(&h, &CMatrix::identity(2, 2), &w, &f, 1, 1.0).unwrap();
        assert!((r - 5f64.log2()).abs() < 1e-12, "{r}");
    }

    #[test]
    fn zero_snr_gives_zero_rate() {
        let h = unitary(3, 5);
        let w = h.columns(0, 2).into_owned();
        let f = CMatrix::identity(3, 3).columns(0, 2).into_owned();
        let r = spectral_efficiency(&h, &CMatrix::identity(3, 3), &w, &f, 2, 0.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn rank_deficient_combiner_is_reported() {
        let h = unitary(3, 6);
        let f = CMatrix::identity(3, 3).columns(0, 2).into_owned();
        let mut w = CMatrix::zeros(3, 2);
        w[(0, 0)] = C64::new(1.0, 0.0);
        w[(0, 1)] = C64::new(2.0, 0.0);
        let err = spectral_efficiency(&h, &CMatrix::identity(3, 3), &w, &f, 2, 1.0).unwrap_err();
        assert!(err.is_numeric());
    }

    #[test]
    fn pc_architecture_shape() {
        let a = pc_architecture(144, 12, Resolution::Infinite).unwrap();
        assert_eq!((a.n_blocks(), a.lo_depth(), a.apd_depth(), a.n_rf()), (144, 1, 12, 12));
        assert!(pc_architecture(144, 10, Resolution::Infinite).is_err());
        assert_eq!(a.intra_offsets(), &DMatrix::zeros(144, 1));
    }

    #[test]
    fn db_conversion() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((db_to_linear(-20.0) - 0.01).abs() < 1e-15);
    }
}
