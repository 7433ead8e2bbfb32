//! Deterministic and randomized property checks of the exact numerics.

use jl_core::bounds::*;
use jl_core::special::{ln_factorial, ln_factorial_stirling_deficit, ln_factorial_stirling_remainder};
use jl_core::sphere::*;
use jl_core::tail::*;
use jl_core::transform::*;
use jl_core::rng::substream;
use proptest::prelude::*;
use rand::Rng;

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
}

const N: usize = 10_000;

#[test]
fn log_inequality_4_1() {
    for x in grid(0.0, 1.0, N) {
        assert!(x.ln_1p() >= x - x * x / 2.0, "x={x}");
    }
}

#[test]
fn log_inequality_4_2() {
    for x in grid(0.0, 0.68, N) {
        assert!((-x).ln_1p() >= -x - x * x, "x={x}");
    }
}

#[test]
fn log_inequality_4_3() {
    for x in grid(-1.0, 10.0, N) {
        assert!(x.ln_1p() <= x, "x={x}");
    }
}

#[test]
fn log_inequality_4_4() {
    for x in grid(-1.0, 10.0, N) {
        assert!(x.ln_1p() <= x - x * x / 2.0 + x.powi(3) / 3.0, "x={x}");
    }
}

#[test]
fn log_inequality_4_9() {
    for x in grid(0.0, 0.815, N) {
        assert!((-x).ln_1p() >= -x - x * x / 2.0 - x.powi(3), "x={x}");
    }
}

#[test]
fn log_inequality_4_10() {
    for x in (0..N).map(|i| i as f64 / N as f64) {
        assert!((-x).ln_1p() <= -x - x * x / 2.0, "x={x}");
    }
}

fn robbins_strict(n: u64) {
    let (lo, hi) = robbins_log_factorial_bounds(n).unwrap();
    let x = n as f64;
    let base = 0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * x.ln() - x;
    // Offsets from the common Stirling base: at large n the bracket is far
    // narrower than one ulp of ln n!, but not of these offsets.
    let (dlo, dhi) = (1.0 / (12.0 * x + 1.0), 1.0 / (12.0 * x));
    assert!((lo - base - dlo).abs() <= 1e-15 * (1.0 + base.abs()));
    assert!((hi - base - dhi).abs() <= 1e-15 * (1.0 + base.abs()));
    // dlo < r < dhi, written as 0 < dhi − r < dhi − dlo so that it stays
    // resolvable once r agrees with dhi to every stored digit.
    let deficit = ln_factorial_stirling_deficit(n);
    let width = 1.0 / (12.0 * x * (12.0 * x + 1.0));
    assert!(0.0 < deficit && deficit < width, "n={n}: {deficit} {width}");
    if n <= 1_000_000 {
        let r = ln_factorial_stirling_remainder(n);
        assert!(dlo < r && r < dhi, "n={n}: {dlo} {r} {dhi}");
    }
    if n <= 170 {
        assert!(lo < ln_factorial(n) && ln_factorial(n) < hi, "n={n}");
    }
}

#[test]
fn robbins_brackets_small_n() {
    for n in 1..=10_000u64 {
        robbins_strict(n);
    }
}

#[test]
fn robbins_brackets_random_large_n() {
    let mut rng = substream(2024, 0);
    for _ in 0..100 {
        robbins_strict(rng.random_range(10_001..=100_000_000));
    }
}

/// `k = 16 ε⁻² ln(1/δ)` rounded up to even, `d = k/s₀`.
fn asymptotic_point(j: i32) -> (SplitParams, f64) {
    let e = 2f64.powi(-j);
    let k = 16.0 / (e * e) * (1.0 / e).ln();
    let k = 2 * (k / 2.0).ceil() as usize;
    (SplitParams::new(k, k << j).unwrap(), e)
}

#[test]
fn bound_ratios_approach_one() {
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for j in 3..=10 {
        let (p, e) = asymptotic_point(j);
        let ra = ln_upper_tail_lower_bound(p, e).unwrap() / ln_upper_tail_upper_bound(p.k(), e).unwrap();
        let rb = ln_lower_tail_lower_bound(p, e).unwrap() / ln_lower_tail_upper_bound(p.k(), e).unwrap();
        assert!(ra > 1.0 && ra < prev.0, "j={j}: above ratio {ra} after {}", prev.0);
        assert!(rb > 1.0 && rb < prev.1, "j={j}: below ratio {rb} after {}", prev.1);
        prev = (ra, rb);
    }
    assert!(prev.0 < 1.5 && prev.1 < 1.5, "{prev:?}");
}

#[test]
fn sandwich_on_dense_grid() {
    let mut checked = 0;
    for k in (6..=400).step_by(2) {
        for mult in [3usize, 5, 10, 40] {
            let d = k * mult;
            for eps in [0.1, 0.2, 0.3, 0.5] {
                let p = SplitParams::new(k, d).unwrap();
                let a = assumptions_hold(eps, 0.5, p);
                if !(a.holds() && a.parity_ok) {
                    continue;
                }
                let r = BoundReport::compute(p, eps, 0.5).unwrap();
                assert_eq!(r.sandwich_above, Some(true), "k={k} d={d} eps={eps}");
                assert_eq!(r.sandwich_below, Some(true), "k={k} d={d} eps={eps}");
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
}

#[test]
fn delta_form_prefactor_tightness() {
    // Both prefactors are reported; the δ-form one is the smaller.
    assert!(ln_c_above_lower_delta_form() < ln_c_above_lower());
}

#[test]
fn density_normalises() {
    for (k, d) in [(1, 2), (1, 4096), (3, 7), (5, 50), (17, 100), (64, 65), (64, 4096), (40, 1000)] {
        let p = SplitParams::new(k, d).unwrap();
        let q = integrate_density(p, 0.0, 1.0).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10, "k={k} d={d}: {}", q.value);
    }
}

#[test]
fn achlioptas_k_monotone() {
    let mut prev = usize::MAX;
    for eps in [0.05, 0.1, 0.2, 0.3, 0.5] {
        let k = achlioptas_k(eps, 0.01).unwrap();
        assert!(k < prev);
        prev = k;
    }
    let mut prev = usize::MAX;
    for delta in [1e-6, 1e-3, 0.01, 0.1, 0.5] {
        let k = achlioptas_k(0.1, delta).unwrap();
        assert!(k < prev);
        prev = k;
    }
}

#[test]
fn kmn_ratio_tends_to_one_from_above() {
    let mut prev = f64::INFINITY;
    for j in 2..=14 {
        let e = 2f64.powi(-j);
        let delta = 2f64.powi(-4 * j);
        let k = kmn_upper_k(e, delta, None).unwrap() as f64;
        let r = k / (4.0 / (e * e) * (1.0 / delta).ln());
        assert!(r > 1.0 && r < prev, "j={j}: {r}");
        prev = r;
    }
    assert!(prev < 1.1);
}

#[test]
fn kmn_spec_reference() {
    // 4·100·ln1000·bracket(0.1, 1e-3, 3.9619) = 3849.554…
    let b = kmn_bracket(0.1, 1e-3, 3.9619).unwrap();
    let raw = 400.0 * 1000f64.ln() * b;
    assert!((raw - 3849.554).abs() < 1e-3, "{raw}");
    assert_eq!(kmn_upper_k(0.1, 1e-3, Some(3.9619)).unwrap(), 3850);
}

#[test]
fn orthogonal_construction_meets_delta_exactly() {
    let k = kmn_upper_k(0.25, 0.05, None).unwrap();
    let p = SplitParams::new(k, 4 * k).unwrap();
    let q = TailQuery::new(p, 0.25).unwrap();
    assert!(tail_above(&q).unwrap() + tail_below(&q).unwrap() <= 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn split_round_trip(seed in any::<u64>(), d in 2usize..60, kfrac in 0.0f64..1.0) {
        let k = 1 + ((d - 1) as f64 * kfrac) as usize % (d - 1);
        let x = sample_uniform_sphere(d, &mut substream(seed, 0)).unwrap();
        let p = SplitParams::new(k, d).unwrap();
        let sp = split(&x, p).unwrap();
        prop_assert!((0.0..=1.0).contains(&sp.s()));
        let back = unsplit(&sp).unwrap();
        for (a, b) in back.coords().iter().zip(x.coords()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn tails_are_probabilities_and_monotone(k in 1usize..200, extra in 1usize..2000, e1 in 0.01f64..0.9, e2 in 0.01f64..0.9) {
        let p = SplitParams::new(k, k + extra).unwrap();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let ql = TailQuery::new(p, lo).unwrap();
        let qh = TailQuery::new(p, hi).unwrap();
        let (al, bl) = (tail_above(&ql).unwrap(), tail_below(&ql).unwrap());
        let (ah, bh) = (tail_above(&qh).unwrap(), tail_below(&qh).unwrap());
        prop_assert!((0.0..=1.0).contains(&al) && (0.0..=1.0).contains(&bl));
        prop_assert!(al + bl <= 1.0 + 1e-12);
        prop_assert!(ah <= al + 1e-15 && bh <= bl + 1e-15);
    }

    #[test]
    fn cdf_matches_quadrature(k in 1usize..64, extra in 1usize..500, t in 0.0f64..1.0) {
        let p = SplitParams::new(k, k + extra).unwrap();
        let c = cdf(p, t).unwrap();
        let q = integrate_density(p, 0.0, t).unwrap();
        prop_assert!((c - q.value).abs() < 1e-9, "{} vs {}", c, q.value);
    }

    #[test]
    fn apply_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = substream(seed, 0);
        let m = gaussian_matrix(4, 9, &mut rng).unwrap();
        let x: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (ax, ay, az) = (apply(&m, &x).unwrap(), apply(&m, &y).unwrap(), apply(&m, &z).unwrap());
        for i in 0..4 {
            prop_assert!((az[i] - (a * ax[i] + b * ay[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_image_norm_bounded(seed in any::<u64>(), k in 1usize..10, extra in 1usize..30) {
        let d = k + extra;
        let mut rng = substream(seed, 0);
        let m = orthogonal_projection_matrix(k, d, &mut rng).unwrap();
        let w = sample_uniform_sphere(d, &mut rng).unwrap();
        let y = apply(&m, w.coords()).unwrap();
        let n2: f64 = y.iter().map(|v| v * v).sum();
        prop_assert!(n2 >= 0.0 && n2 <= d as f64 / k as f64 * (1.0 + 1e-12));
    }

    #[test]
    fn bsf_bracket_holds(k2 in 2usize..300, mult in 3usize..50) {
        let k = 2 * k2;
        let d = k * mult;
        let p = SplitParams::new(k, d).unwrap();
        let (lo, hi) = bsf_bounds(p).unwrap();
        let v = ln_bsf(p);
        prop_assert!(lo <= v && v <= hi);
        let (blo, bhi) = b_bounds(p).unwrap();
        let b = log_b(p);
        prop_assert!(blo <= b && b <= bhi);
    }

    #[test]
    fn kmn_bracket_exceeds_one(e in 0.001f64..0.5, dl in 1e-12f64..0.5, c in 1.0f64..100.0) {
        prop_assert!(kmn_bracket(e, dl, c).unwrap() > 1.0);
    }
}
