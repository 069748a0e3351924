//! Hybrid combiner design.
//!
//! Minimizes `||W_opt - W_LO W_LC W_BB||_F` over the LO phases and the
//! digital combiner. [`alternating_minimize`] alternates the least-squares
//! `W_BB` update with a closed-form per-block phase update (quantized to the
//! feasible grid under finite resolution). When photodiode groups nest in LO
//! blocks the optimum does not depend on the LO phases and
//! [`direct_solve_proportional`] writes it down row by row.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::architecture::{ReuseArchitecture, Resolution, StructuredCombiner};
use crate::{frobenius_sq, CMatrix, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Stop once consecutive full-iteration squared residuals differ by
    /// less than this.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { epsilon: 1e-4, max_iterations: 100 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::experiment("optimizer.epsilon", "must be a positive number"));
        }
        if self.max_iterations == 0 {
            return Err(Error::experiment("optimizer.max_iterations", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AltMin,
    DirectProportional,
}

/// Which solver to run for a given architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Direct solver when proportional, alternating minimization otherwise.
    #[default]
    Auto,
    AltMin,
    Direct,
}

#[derive(Debug, Clone)]
pub struct CombinerSolution {
    pub phases: Vec<f64>,
    pub w_bb: CMatrix,
    /// Final `||W_opt - W_RF W_BB||_F`.
    pub residual: f64,
    /// Outer iterations, 0 for the direct solver.
    pub iterations: usize,
    pub method: Method,
    /// False when the iteration cap was reached before the stopping rule fired.
    pub converged: bool,
    /// Objective `g` after every half step (W_BB update, then phase update).
    pub objective_history: Vec<f64>,
}

impl CombinerSolution {
    /// Combined combiner `W_RF * W_BB`.
    pub fn combined(&self, arch: &ReuseArchitecture) -> Result<CMatrix> {
        Ok(StructuredCombiner::new(arch, &self.phases)?.apply(&self.w_bb))
    }
}

/// Fully digital reference derived from the channel SVD.
#[derive(Debug, Clone)]
pub struct DigitalReference {
    /// First `N_s` left singular vectors.
    pub w_opt: CMatrix,
    /// First `N_s` right singular vectors (ideal precoder).
    pub f_opt: CMatrix,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Thin SVD `H = U diag(s) V^H` with descending singular values and each
/// column of `U` rotated so its largest-modulus entry is real positive
/// (the matching column of `V` gets the same rotation).
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

pub fn sorted_svd(h: &CMatrix) -> Result<SortedSvd> {
    if h.is_empty() {
        return Err(Error::Numeric("SVD of an empty matrix".into()));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("channel matrix contains non-finite entries".into()));
    }
    let svd = h.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numeric("SVD did not produce singular vectors".into())),
    };
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let k = s.len();
    let mut u_out = CMatrix::zeros(h.nrows(), k);
    let mut v_out = CMatrix::zeros(h.ncols(), k);
    let mut s_out = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let ucol = u.column(src);
        let mut pivot = 0;
        for r in 1..ucol.len() {
            if ucol[r].norm() > ucol[pivot].norm() {
                pivot = r;
            }
        }
        let p = ucol[pivot];
        let rot = if p.norm() > 0.0 { p.conj() / p.norm() } else { C64::new(1.0, 0.0) };
        u_out.set_column(dst, &(ucol * rot));
        v_out.set_column(dst, &(v_t.row(src).adjoint() * rot));
        s_out.push(s[src]);
    }
    Ok(SortedSvd { u: u_out, singular_values: s_out, v: v_out })
}

/// Optimal fully digital combiner and precoder for `n_streams` streams.
pub fn optimal_digital_combiner(h: &CMatrix, n_streams: usize) -> Result<DigitalReference> {
    if n_streams == 0 || n_streams > h.nrows().min(h.ncols()) {
        return Err(Error::InvalidPrecondition(format!(
            "stream count {n_streams} must be in 1..={}",
            h.nrows().min(h.ncols())
        )));
    }
    let svd = sorted_svd(h)?;
    Ok(DigitalReference {
        w_opt: svd.u.columns(0, n_streams).into_owned(),
        f_opt: svd.v.columns(0, n_streams).into_owned(),
        singular_values: svd.singular_values,
    })
}

/// Least-squares digital combiner `W_RF^+ W_opt` for a dense `W_RF`.
///
/// Uses `W_RF^H W_opt / c` when `W_RF^H W_RF = c I` (every valid reuse
/// architecture), falling back to the normal equations otherwise.
pub fn update_wbb(w_rf: &CMatrix, w_opt: &CMatrix) -> Result<CMatrix> {
    if w_rf.nrows() != w_opt.nrows() {
        return Err(Error::InvalidPrecondition(format!(
            "W_RF has {} rows but W_opt has {}",
            w_rf.nrows(),
            w_opt.nrows()
        )));
    }
    let gram = w_rf.adjoint() * w_rf;
    let n = gram.nrows();
    let scale = (0..n).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Numeric("W_RF is zero".into()));
    }
    let c = gram[(0, 0)].re;
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { c } else { 0.0 };
            dev = dev.max((gram[(i, j)] - target).norm());
        }
    }
    let rhs = w_rf.adjoint() * w_opt;
    if dev <= 1e-12 * scale {
        return Ok(rhs / C64::new(c, 0.0));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("W_RF is rank deficient".into()))?;
    let l = chol.l();
    let min_pivot = (0..n).map(|i| l[(i, i)].re.powi(2)).fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-12 * scale {
        return Err(Error::Numeric("W_RF is rank deficient".into()));
    }
    Ok(chol.solve(&rhs))
}

/// `arg Tr[X^H Y]` folded into `[0, 2pi)`; zero trace maps to 0.
pub(crate) fn phase_of_trace(t: C64) -> f64 {
    if t.norm() == 0.0 {
        return 0.0;
    }
    let p = t.arg().rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Phase `phi` minimizing `||Y - e^{j phi} X||_F`, i.e. `arg Tr[X^H Y]`,
/// in `[0, 2pi)`.
pub fn optimal_phase(block_target: &CMatrix, block_product: &CMatrix) -> Result<f64> {
    if block_target.shape() != block_product.shape() {
        return Err(Error::InvalidPrecondition(format!(
            "block shapes differ: {:?} vs {:?}",
            block_target.shape(),
            block_product.shape()
        )));
    }
    let t: C64 = block_product.iter().zip(block_target.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok(phase_of_trace(t))
}

/// Nearest point of `{2 pi b / 2^B}` under circular distance.
pub fn quantize_phase(phase: f64, bits: u32) -> f64 {
    let levels = 1u64 << bits;
    let step = TAU / levels as f64;
    let b = (phase.rem_euclid(TAU) / step).round() as u64 % levels;
    b as f64 * step
}

fn project(resolution: Resolution, phase: f64) -> f64 {
    match resolution {
        Resolution::Infinite => phase,
        Resolution::Bits(b) => quantize_phase(phase, b),
    }
}

fn check_target(arch: &ReuseArchitecture, w_opt: &CMatrix) -> Result<()> {
    if w_opt.nrows() != arch.n_r() {
        return Err(Error::InvalidPrecondition(format!(
            "W_opt has {} rows, architecture has N_r = {}",
            w_opt.nrows(),
            arch.n_r()
        )));
    }
    if w_opt.ncols() == 0 {
        return Err(Error::InvalidPrecondition("W_opt has no columns".into()));
    }
    Ok(())
}

/// Objective `g = ||W_opt - W_RF(phases) W_BB||_F`.
pub fn objective(
    arch: &ReuseArchitecture,
    phases: &[f64],
    w_bb: &CMatrix,
    w_opt: &CMatrix,
) -> Result<f64> {
    check_target(arch, w_opt)?;
    if w_bb.shape() != (arch.n_rf(), w_opt.ncols()) {
        return Err(Error::InvalidPrecondition(format!(
            "W_BB must be {}x{}, got {:?}",
            arch.n_rf(),
            w_opt.ncols(),
            w_bb.shape()
        )));
    }
    let s = StructuredCombiner::new(arch, phases)?;
    Ok(residual_sq(&s, w_bb, w_opt).sqrt())
}

fn residual_sq(s: &StructuredCombiner, w_bb: &CMatrix, w_opt: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for c in 0..w_opt.ncols() {
        for r in 0..w_opt.nrows() {
            acc += (w_opt[(r, c)] - s.diag[r] * w_bb[(r / s.apd_depth, c)]).norm_sqr();
        }
    }
    acc
}

/// One sweep of per-block phase updates for fixed `W_BB`.
fn update_phases(arch: &ReuseArchitecture, w_bb: &CMatrix, w_opt: &CMatrix, phases: &mut [f64]) {
    let lo = arch.lo_depth();
    let apd = arch.apd_depth();
    for (i, phase) in phases.iter_mut().enumerate() {
        // Tr[X^H Y] with X = I_i [W_LC W_BB]_block, Y = [W_opt]_block.
        let mut t = C64::new(0.0, 0.0);
        for r in i * lo..(i + 1) * lo {
            let off = arch.offset_phasor(r).conj();
            for c in 0..w_opt.ncols() {
                t += off * w_bb[(r / apd, c)].conj() * w_opt[(r, c)];
            }
        }
        *phase = project(arch.resolution(), phase_of_trace(t));
    }
}

/// Alternating minimization over `W_BB` and the LO phases.
///
/// Phases start uniform on `[0, 2pi)` (snapped to the grid under finite
/// resolution). Each iteration updates `W_BB` by least squares and then
/// every block phase in closed form; the loop stops once consecutive
/// squared residuals differ by less than `config.epsilon`. The returned
/// `W_BB` is re-solved for the final phases.
pub fn alternating_minimize<R: Rng + ?Sized>(
    arch: &ReuseArchitecture,
    w_opt: &CMatrix,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<CombinerSolution> {
    config.validate()?;
    check_target(arch, w_opt)?;
    let resolution = arch.resolution();
    let mut phases: Vec<f64> = (0..arch.n_blocks())
        .map(|_| project(resolution, rng.random::<f64>() * TAU))
        .collect();
    let inv_depth = C64::new(1.0 / arch.apd_depth() as f64, 0.0);

    let mut history = Vec::with_capacity(2 * config.max_iterations + 1);
    let mut previous: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let s = StructuredCombiner::from_parts(arch.lo_diagonal_unchecked(&phases), arch.apd_depth());
        let w_bb = s.adjoint_apply(w_opt) * inv_depth;
        history.push(residual_sq(&s, &w_bb, w_opt).sqrt());

        update_phases(arch, &w_bb, w_opt, &mut phases);
        let s = StructuredCombiner::from_parts(arch.lo_diagonal_unchecked(&phases), arch.apd_depth());
        let r_sq = residual_sq(&s, &w_bb, w_opt);
        history.push(r_sq.sqrt());

        if let Some(prev) = previous {
            if (prev - r_sq).abs() < config.epsilon {
                converged = true;
                break;
            }
        }
        previous = Some(r_sq);
    }

    let s = StructuredCombiner::from_parts(arch.lo_diagonal_unchecked(&phases), arch.apd_depth());
    let w_bb = s.adjoint_apply(w_opt) * inv_depth;
    let residual = residual_sq(&s, &w_bb, w_opt).sqrt();
    history.push(residual);
    Ok(CombinerSolution {
        phases,
        w_bb,
        residual,
        iterations,
        method: Method::AltMin,
        converged,
        objective_history: history,
    })
}

/// Non-iterative solver for proportional architectures.
///
/// All LO phases are set to 0 (a feasible point at every resolution); row
/// `n` of `W_BB` is `(1/N_lm) e^{-j phi} 1^T I_n^H [W_opt]_n`, where `I_n`
/// is the diagonal slice of fixed offsets seen by chain `n`.
pub fn direct_solve_proportional(arch: &ReuseArchitecture, w_opt: &CMatrix) -> Result<CombinerSolution> {
    check_target(arch, w_opt)?;
    if !arch.is_proportional() {
        return Err(Error::InvalidPrecondition(format!(
            "direct solver needs APD depth {} to divide LO depth {}",
            arch.apd_depth(),
            arch.lo_depth()
        )));
    }
    let phases = vec![0.0; arch.n_blocks()];
    let apd = arch.apd_depth();
    let lo = arch.lo_depth();
    let scale = 1.0 / apd as f64;
    let mut w_bb = CMatrix::zeros(arch.n_rf(), w_opt.ncols());
    for n in 0..arch.n_rf() {
        let block_phase = C64::from_polar(1.0, -phases[(n * apd) / lo]);
        for c in 0..w_opt.ncols() {
            let mut acc = C64::new(0.0, 0.0);
            for r in n * apd..(n + 1) * apd {
                acc += arch.offset_phasor(r).conj() * w_opt[(r, c)];
            }
            w_bb[(n, c)] = block_phase * acc * scale;
        }
    }
    let s = StructuredCombiner::new(arch, &phases)?;
    let residual = residual_sq(&s, &w_bb, w_opt).sqrt();
    Ok(CombinerSolution {
        phases,
        w_bb,
        residual,
        iterations: 0,
        method: Method::DirectProportional,
        converged: true,
        objective_history: vec![residual],
    })
}

/// Runs the solver selected by `choice`.
pub fn solve<R: Rng + ?Sized>(
    arch: &ReuseArchitecture,
    w_opt: &CMatrix,
    choice: SolverChoice,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<CombinerSolution> {
    match choice {
        SolverChoice::Direct => direct_solve_proportional(arch, w_opt),
        SolverChoice::Auto if arch.is_proportional() => direct_solve_proportional(arch, w_opt),
        _ => alternating_minimize(arch, w_opt, config, rng),
    }
}

/// Squared Frobenius norm of `W_opt - W`, for callers holding a dense combiner.
pub fn dense_residual(w_opt: &CMatrix, combined: &CMatrix) -> f64 {
    frobenius_sq(&(w_opt - combined)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architecture::compose_wrf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn orthonormal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        random_matrix(rng, r, c).qr().q()
    }

    #[test]
    fn identity_svd() {
        let d = optimal_digital_combiner(&CMatrix::identity(4, 4), 2).unwrap();
        assert_eq!(d.singular_values, vec![1.0; 4]);
        for c in 0..2 {
            let col = d.w_opt.column(c);
            let big: Vec<_> = col.iter().filter(|z| z.norm() > 1e-12).collect();
            assert_eq!(big.len(), 1);
            assert!((big[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_svd_ordering() {
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 0)] = C64::new(3.0, 0.0);
        h[(1, 1)] = C64::new(2.0, 0.0);
        h[(2, 2)] = C64::new(1.0, 0.0);
        let d = optimal_digital_combiner(&h, 1).unwrap();
        for (a, b) in d.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((d.w_opt[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(d.w_opt[(1, 0)].norm() < 1e-12 && d.w_opt[(2, 0)].norm() < 1e-12);
    }

    #[test]
    fn svd_rejects_nan_and_bad_stream_count() {
        let mut h = CMatrix::identity(3, 3);
        h[(1, 2)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(optimal_digital_combiner(&h, 1), Err(Error::Numeric(_))));
        assert!(optimal_digital_combiner(&CMatrix::identity(3, 3), 4).is_err());
    }

    #[test]
    fn svd_phase_convention_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_matrix(&mut rng, 6, 5);
        let svd = sorted_svd(&h).unwrap();
        for c in 0..svd.u.ncols() {
            let col = svd.u.column(c);
            let pivot = col.iter().cloned().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            assert!(pivot.im.abs() < 1e-12 && pivot.re > 0.0);
        }
    }

    #[test]
    fn update_wbb_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w_opt = random_matrix(&mut rng, 5, 2);
        let w = update_wbb(&CMatrix::identity(5, 5), &w_opt).unwrap();
        assert!((w - w_opt).norm() < 1e-14);
    }

    #[test]
    fn update_wbb_general_and_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 6, 3);
        let w_opt = random_matrix(&mut rng, 6, 2);
        let x = update_wbb(&a, &w_opt).unwrap();
        // Normal equations hold at the least-squares solution.
        let g = a.adjoint() * (&w_opt - &a * &x);
        assert!(g.norm() < 1e-12);

        let mut deficient = a.clone();
        let c0 = deficient.column(0).into_owned();
        deficient.set_column(2, &(c0 * C64::new(2.0, 0.0)));
        assert!(matches!(update_wbb(&deficient, &w_opt), Err(Error::Numeric(_))));
    }

    #[test]
    fn optimal_phase_simple_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_matrix(&mut rng, 3, 2);
        assert!(optimal_phase(&x, &x).unwrap().abs() < 1e-12);
        let y = &x * C64::from_polar(1.0, 1.2);
        assert!((optimal_phase(&y, &x).unwrap() - 1.2).abs() < 1e-12);
        let zero = CMatrix::zeros(3, 2);
        assert_eq!(optimal_phase(&x, &zero).unwrap(), 0.0);
        assert!(optimal_phase(&x, &CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn quantizer_examples() {
        assert!((quantize_phase(PI, 1) - PI).abs() < 1e-15);
        assert!((quantize_phase(1.0, 2) - PI / 2.0).abs() < 1e-15);
        assert_eq!(quantize_phase(6.1, 1), 0.0);
        assert_eq!(quantize_phase(-0.1, 3), 0.0);
        assert!((quantize_phase(-PI / 2.0, 2) - 3.0 * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn dedicated_dedicated_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w_opt = orthonormal(&mut rng, 16, 3);
        let arch = ReuseArchitecture::new(16, 1, 1, Resolution::Bits(1)).unwrap();
        let sol = alternating_minimize(&arch, &w_opt, &OptimizerConfig::default(), &mut rng).unwrap();
        assert!(sol.residual < 1e-8);
        assert!(sol.converged);
    }

    #[test]
    fn altmin_objective_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (lo, apd, res) in [(6, 4, Resolution::Infinite), (6, 12, Resolution::Bits(2)), (4, 8, Resolution::Bits(1))] {
            let arch = ReuseArchitecture::new(4, lo, apd, res).unwrap();
            let w_opt = orthonormal(&mut rng, arch.n_r(), 3);
            let sol = alternating_minimize(&arch, &w_opt, &OptimizerConfig::default(), &mut rng).unwrap();
            for w in sol.objective_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", sol.objective_history);
            }
            let check = objective(&arch, &sol.phases, &sol.w_bb, &w_opt).unwrap();
            assert!((check - sol.residual).abs() < 1e-12);
            arch.check_phases(&sol.phases).unwrap();
        }
    }

    #[test]
    fn altmin_respects_iteration_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let arch = ReuseArchitecture::new(4, 6, 4, Resolution::Infinite).unwrap();
        let w_opt = orthonormal(&mut rng, arch.n_r(), 3);
        let cfg = OptimizerConfig { epsilon: 1e-300, max_iterations: 3 };
        let sol = alternating_minimize(&arch, &w_opt, &cfg, &mut rng).unwrap();
        assert_eq!(sol.iterations, 3);
        assert!(!sol.converged);
    }

    #[test]
    fn direct_solver_rejects_non_proportional() {
        let arch = ReuseArchitecture::new(4, 6, 4, Resolution::Infinite).unwrap();
        let w_opt = CMatrix::zeros(24, 2);
        assert!(matches!(direct_solve_proportional(&arch, &w_opt), Err(Error::InvalidPrecondition(_))));
    }

    #[test]
    fn direct_solver_fully_digital() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w_opt = orthonormal(&mut rng, 9, 2);
        let arch = ReuseArchitecture::new(9, 1, 1, Resolution::Infinite).unwrap();
        let sol = direct_solve_proportional(&arch, &w_opt).unwrap();
        assert!((&sol.w_bb - &w_opt).norm() < 1e-14);
        assert!(sol.residual < 1e-14);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn direct_solver_matches_dense_pseudoinverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let arch = ReuseArchitecture::new(4, 6, 3, Resolution::Bits(2)).unwrap();
        let w_opt = orthonormal(&mut rng, arch.n_r(), 3);
        let sol = direct_solve_proportional(&arch, &w_opt).unwrap();
        let w_rf = compose_wrf(&arch, &sol.phases).unwrap();
        let general = update_wbb(&w_rf, &w_opt).unwrap();
        assert!((&general - &sol.w_bb).norm() < 1e-12);
        assert!((dense_residual(&w_opt, &(&w_rf * &sol.w_bb)) - sol.residual).abs() < 1e-12);
    }

    #[test]
    fn solve_dispatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let prop = ReuseArchitecture::new(4, 6, 3, Resolution::Infinite).unwrap();
        let w_opt = orthonormal(&mut rng, prop.n_r(), 2);
        let cfg = OptimizerConfig::default();
        assert_eq!(solve(&prop, &w_opt, SolverChoice::Auto, &cfg, &mut rng).unwrap().method, Method::DirectProportional);
        assert_eq!(solve(&prop, &w_opt, SolverChoice::AltMin, &cfg, &mut rng).unwrap().method, Method::AltMin);
        let np = ReuseArchitecture::new(4, 6, 4, Resolution::Infinite).unwrap();
        assert_eq!(solve(&np, &w_opt, SolverChoice::Auto, &cfg, &mut rng).unwrap().method, Method::AltMin);
        assert!(solve(&np, &w_opt, SolverChoice::Direct, &cfg, &mut rng).is_err());
    }
}
