mod common;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use common::*;
use proptest::prelude::*;
use rydberg_reuse::channel::{
    generate_channel, rydberg_response, upa_response, ArrayGeometry, ChannelParams, ChannelRealization, PathMeta,
};

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Element `(q1, q2)` of a square UPA response, written out directly.
fn upa_element(az: f64, el: f64, side: usize, d: f64, q1: usize, q2: usize) -> C64 {
    let phase = 2.0 * PI * d * (q1 as f64 * az.sin() * el.sin() + q2 as f64 * el.cos());
    C64::from_polar(1.0 / side as f64, phase)
}

/// Explicit double loop over blocks and sub-elements of the Rydberg layout.
fn rydberg_oracle(az: f64, el: f64, n_blocks: usize, n_per_block: usize, d: f64, d_hat: f64) -> Vec<C64> {
    let side = (n_blocks as f64).sqrt().round() as usize;
    let mut out = Vec::new();
    for q1 in 0..side {
        for q2 in 0..side {
            let block = upa_element(az, el, side, d, q1, q2);
            for k in 0..n_per_block {
                let offset = k as f64 - (n_per_block as f64 - 1.0) / 2.0;
                let axial = C64::from_polar(1.0 / (n_per_block as f64).sqrt(), 2.0 * PI * d_hat * offset * el.cos());
                out.push(block * axial);
            }
        }
    }
    out
}

#[test]
fn upa_broadside_along_azimuth() {
    let a = upa_response(FRAC_PI_2, FRAC_PI_2, 4, 0.5).unwrap();
    let expected = [0.5, 0.5, -0.5, -0.5];
    for (z, e) in a.iter().zip(expected) {
        assert!((z - C64::new(e, 0.0)).norm() < 1e-15, "{z} vs {e}");
    }
}

#[test]
fn upa_matches_direct_evaluation() {
    let (az, el) = (0.7, 2.1);
    let a = upa_response(az, el, 144, 0.5).unwrap();
    for q1 in 0..12 {
        for q2 in 0..12 {
            assert!((a[q1 * 12 + q2] - upa_element(az, el, 12, 0.5, q1, q2)).norm() < 1e-14);
        }
    }
}

#[test]
fn rydberg_reference_instance() {
    let g = ArrayGeometry::rydberg(36, 6, 0.5, 0.05).unwrap();
    let a = rydberg_response(0.3, 1.1, &g).unwrap();
    let oracle = rydberg_oracle(0.3, 1.1, 36, 6, 0.5, 0.05);
    assert_eq!(a.len(), 216);
    assert!((norm(&a) - 1.0).abs() < 1e-12);
    for (x, y) in a.iter().zip(&oracle) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn single_path_is_rank_one() {
    let g = ArrayGeometry::rydberg(9, 2, 0.5, 0.05).unwrap();
    let path = PathMeta { gain: C64::new(1.0, 0.0), aoa_azimuth: 0.4, aoa_elevation: 1.3, aod_azimuth: 2.2, aod_elevation: 0.9 };
    let h = ChannelRealization::from_paths(16, 0.5, &g, vec![path]).unwrap().matrix;
    let a_r = g.response(0.4, 1.3).unwrap();
    let a_t = upa_response(2.2, 0.9, 16, 0.5).unwrap();
    let scale = ((16 * 18) as f64).sqrt();
    for r in 0..18 {
        for c in 0..16 {
            assert!((h[(r, c)] - a_r[r] * a_t[c].conj() * scale).norm() < 1e-12);
        }
    }
}

#[test]
fn mean_channel_energy_matches_array_gain() {
    let g = ArrayGeometry::rydberg(36, 1, 0.5, 0.05).unwrap();
    let params = ChannelParams::with_defaults(144, g);
    let mut rng = rng(2000);
    let draws = 2000;
    let total: f64 = (0..draws)
        .map(|_| frob(&generate_channel(&params, &mut rng).unwrap().matrix).powi(2))
        .sum();
    let ratio = total / draws as f64 / (144.0 * 36.0);
    assert!((ratio - 1.0).abs() < 0.05, "normalized energy {ratio}");
}

#[test]
fn same_seed_same_channel() {
    let g = ArrayGeometry::rydberg(36, 6, 0.5, 0.05).unwrap();
    let params = ChannelParams::with_defaults(144, g);
    let a = generate_channel(&params, &mut rng(9)).unwrap();
    let b = generate_channel(&params, &mut rng(9)).unwrap();
    assert_eq!(a.matrix, b.matrix);
}

#[test]
fn upa_kind_rejected_by_rydberg_response() {
    let g = ArrayGeometry::upa(16, 0.5).unwrap();
    assert!(rydberg_response(0.1, 0.2, &g).is_err());
    assert!(upa_response(0.1, 0.2, 15, 0.5).is_err());
}

fn angles() -> impl Strategy<Value = (f64, f64)> {
    (0.0..TAU, 0.0..PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn upa_has_unit_norm((az, el) in angles(), side in 1usize..14, d in 0.1f64..2.0) {
        let a = upa_response(az, el, side * side, d).unwrap();
        prop_assert!((norm(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rydberg_is_kronecker_of_factors(
        (az, el) in angles(),
        side in 1usize..7,
        per_block in 1usize..8,
        d in 0.1f64..1.0,
        d_hat in 0.0f64..0.2,
    ) {
        let g = ArrayGeometry::rydberg(side * side, per_block, d, d_hat).unwrap();
        let a = rydberg_response(az, el, &g).unwrap();
        prop_assert!((norm(&a) - 1.0).abs() < 1e-12);
        let oracle = rydberg_oracle(az, el, side * side, per_block, d, d_hat);
        prop_assert_eq!(a.len(), oracle.len());
        for (x, y) in a.iter().zip(&oracle) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn one_element_per_block_is_the_block_upa((az, el) in angles(), side in 1usize..7) {
        let g = ArrayGeometry::rydberg(side * side, 1, 0.5, 0.05).unwrap();
        let a = rydberg_response(az, el, &g).unwrap();
        let b = upa_response(az, el, side * side, 0.5).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn channel_shape_and_finiteness(seed in any::<u64>(), per_block in 1usize..5) {
        let g = ArrayGeometry::rydberg(4, per_block, 0.5, 0.05).unwrap();
        let h = generate_channel(&ChannelParams::with_defaults(16, g), &mut rng(seed)).unwrap().matrix;
        prop_assert_eq!(h.shape(), (4 * per_block, 16));
        prop_assert!(h.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }
}
