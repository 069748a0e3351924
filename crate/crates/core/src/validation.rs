//! Fast oracle suite: each check compares a solver component against an
//! independent brute-force evaluation on seeded random instances.

use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::architecture::{compose_wrf, ReuseArchitecture, Resolution};
use crate::channel::{generate_channel, ArrayGeometry, ChannelParams};
use crate::optimizer::{
    alternating_minimize, direct_solve_proportional, optimal_digital_combiner, optimal_phase,
    quantize_phase, OptimizerConfig,
};
use crate::{frobenius_sq, CMatrix, C64};

/// Components under test. Swapping one lets a test confirm that the
/// matching check fails.
#[derive(Clone, Copy)]
pub struct Hooks {
    pub quantizer: fn(f64, u32) -> f64,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks { quantizer: quantize_phase }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub outcome: Outcome,
}

impl CheckReport {
    pub fn failed(&self) -> bool {
        matches!(self.outcome, Outcome::Fail(_))
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Outcome::Pass(d) => write!(f, "PASS  {}: {d}", self.name),
            Outcome::Fail(d) => write!(f, "FAIL  {}: {d}", self.name),
            Outcome::Skip(d) => write!(f, "SKIP  {}: {d}", self.name),
        }
    }
}

fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn rotation_objective(y: &CMatrix, x: &CMatrix, phi: f64) -> f64 {
    frobenius_sq(&(y - x * C64::from_polar(1.0, phi)))
}

/// `optimal_phase` against a `points`-point grid on `[0, 2pi)`.
pub fn check_phase_update(instances: usize, points: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in 0..instances {
        let x = random_matrix(&mut rng, 3, 2);
        let y = random_matrix(&mut rng, 3, 2);
        let phi = match optimal_phase(&y, &x) {
            Ok(p) => p,
            Err(e) => return Outcome::Fail(format!("instance {n}: {e}")),
        };
        let best = rotation_objective(&y, &x, phi);
        let grid_min = (0..points)
            .map(|k| rotation_objective(&y, &x, TAU * k as f64 / points as f64))
            .fold(f64::INFINITY, f64::min);
        if best > grid_min + 1e-12 {
            return Outcome::Fail(format!("instance {n}: closed form {best:.15} > grid {grid_min:.15}"));
        }
    }
    Outcome::Pass(format!("{instances} instances vs {points}-point grid"))
}

/// Quantizer output against exhaustive cosine maximization over the grid.
pub fn check_quantizer(quantizer: fn(f64, u32) -> f64, max_bits: u32, samples: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for bits in 1..=max_bits {
        let levels = 1u32 << bits;
        let step = TAU / levels as f64;
        for _ in 0..samples {
            let phi = (rng.random::<f64>() - 0.25) * 2.0 * TAU;
            let q = quantizer(phi, bits);
            let on_grid = (q / step - (q / step).round()).abs() < 1e-9 && (0.0..TAU).contains(&q);
            let best = (0..levels).map(|b| (b as f64 * step - phi).cos()).fold(f64::NEG_INFINITY, f64::max);
            if !on_grid || (q - phi).cos() < best - 1e-12 {
                return Outcome::Fail(format!("B={bits}, phase {phi}: got {q}"));
            }
        }
    }
    Outcome::Pass(format!("B=1..{max_bits}, {samples} phases each"))
}

/// Row-wise direct solver against an SVD-based pseudoinverse of the dense
/// `W_RF`.
pub fn check_block_pseudoinverse(instances: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs = [(6, 1), (6, 2), (6, 3), (6, 6), (4, 2), (2, 2)];
    let mut worst = 0.0f64;
    for n in 0..instances {
        let (lo, apd) = configs[n % configs.len()];
        let res = if n % 2 == 0 { Resolution::Infinite } else { Resolution::Bits(1 + (n % 3) as u32) };
        let arch = match ReuseArchitecture::new(9, lo, apd, res) {
            Ok(a) => a,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        let w_opt = random_matrix(&mut rng, arch.n_r(), 3).qr().q();
        let result = direct_solve_proportional(&arch, &w_opt).and_then(|sol| {
            let w_rf = compose_wrf(&arch, &sol.phases)?;
            let pinv = w_rf.pseudo_inverse(1e-12).map_err(|e| crate::Error::Numeric(e.into()))?;
            Ok((sol.w_bb, pinv * &w_opt))
        });
        match result {
            Ok((direct, general)) => worst = worst.max((direct - general).norm()),
            Err(e) => return Outcome::Fail(e.to_string()),
        }
    }
    if worst <= 1e-10 {
        Outcome::Pass(format!("{instances} instances, max deviation {worst:.2e}"))
    } else {
        Outcome::Fail(format!("max deviation {worst:.2e} exceeds 1e-10"))
    }
}

/// Residuals at every resolution and from the direct solver agree on a
/// 36-block receiver fed by a 144-antenna transmitter.
pub fn check_proportional_equivalence(lo_depth: usize, apd_depth: usize, seed: u64) -> Outcome {
    let arch = match ReuseArchitecture::new(36, lo_depth, apd_depth, Resolution::Infinite) {
        Ok(a) => a,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    if !arch.is_proportional() {
        return Outcome::Skip(format!("N_lm={apd_depth} does not divide N_lom={lo_depth}"));
    }
    let run = || -> crate::Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rx = ArrayGeometry::rydberg(36, lo_depth, 0.5, 0.05)?;
        let ch = generate_channel(&ChannelParams::with_defaults(144, rx), &mut rng)?;
        let w_opt = optimal_digital_combiner(&ch.matrix, 3)?.w_opt;
        let direct = direct_solve_proportional(&arch, &w_opt)?.residual;
        let mut worst = 0.0f64;
        for res in [Resolution::Infinite, Resolution::Bits(1), Resolution::Bits(2), Resolution::Bits(3)] {
            let mut srng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let sol = alternating_minimize(&arch.with_resolution(res)?, &w_opt, &OptimizerConfig::default(), &mut srng)?;
            worst = worst.max((sol.residual - direct).abs());
        }
        Ok(worst)
    };
    match run() {
        Ok(w) if w <= 1e-9 => Outcome::Pass(format!("max residual gap {w:.2e}")),
        Ok(w) => Outcome::Fail(format!("residual gap {w:.2e} exceeds 1e-9")),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

/// Sample mean of `||H||_F^2 / (N_t N_r)` stays within `tolerance` of 1.
pub fn check_channel_energy(trials: usize, tolerance: f64, seed: u64) -> Outcome {
    let run = || -> crate::Result<f64> {
        let rx = ArrayGeometry::rydberg(36, 1, 0.5, 0.05)?;
        let params = ChannelParams::with_defaults(144, rx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = Vec::with_capacity(trials);
        for _ in 0..trials {
            let h = generate_channel(&params, &mut rng)?.matrix;
            acc.push(frobenius_sq(&h) / (144.0 * 36.0));
        }
        Ok(crate::stats::pairwise_sum(&acc) / trials as f64)
    };
    match run() {
        Ok(m) if (m - 1.0).abs() <= tolerance => Outcome::Pass(format!("normalized energy {m:.4} over {trials} draws")),
        Ok(m) => Outcome::Fail(format!("normalized energy {m:.4} outside 1 +/- {tolerance}")),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

/// Runs the whole suite.
pub fn run_checks(hooks: &Hooks) -> Vec<CheckReport> {
    let mut out = vec![
        CheckReport { name: "phase-update grid".into(), outcome: check_phase_update(20, 100_000, 1) },
        CheckReport { name: "quantizer exhaustive".into(), outcome: check_quantizer(hooks.quantizer, 6, 1000, 2) },
        CheckReport { name: "block pseudoinverse".into(), outcome: check_block_pseudoinverse(24, 3) },
    ];
    for (lo, apd) in [(6, 1), (6, 3), (6, 6), (6, 4)] {
        out.push(CheckReport {
            name: format!("proportional equivalence N_lom={lo} N_lm={apd}"),
            outcome: check_proportional_equivalence(lo, apd, 4),
        });
    }
    out.push(CheckReport { name: "channel energy".into(), outcome: check_channel_energy(200, 0.10, 5) });
    out
}
