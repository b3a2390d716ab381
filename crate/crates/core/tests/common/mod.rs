//! Reference implementations shared by the integration tests. Nothing here
//! calls into the crate's own algebra or splitters.

#![allow(dead_code)]

use polka_te::optimizer::{DemandSpec, PathSpec, DELAY_EPSILON};

/// Shift-and-xor product. Only the low 64 bits of `b` are read and nothing
/// guards overflow, so callers keep degrees small.
pub fn ref_mul(a: u128, b: u128) -> u128 {
    (0..64).filter(|i| (b >> i) & 1 == 1).fold(0, |acc, i| acc ^ (a << i))
}

pub fn ref_deg(a: u128) -> i32 {
    127 - a.leading_zeros() as i32
}

/// Schoolbook long division over GF(2).
pub fn ref_divrem(mut a: u128, b: u128) -> (u128, u128) {
    assert_ne!(b, 0);
    let db = ref_deg(b);
    let mut q = 0;
    while a != 0 && ref_deg(a) >= db {
        let s = ref_deg(a) - db;
        q |= 1 << s;
        a ^= b << s;
    }
    (q, a)
}

/// Irreducible iff no polynomial of degree 1..=deg/2 divides it.
pub fn irreducible_by_trial_division(p: u128) -> bool {
    let d = ref_deg(p);
    if d < 1 {
        return false;
    }
    (2u128..(1 << (d / 2 + 1))).all(|q| ref_divrem(p, q).1 != 0)
}

/// Calls `f` with every split of `total` hundredths into `k` parts that are
/// multiples of `step` hundredths, as Mbps.
pub fn for_each_split(total: u32, k: usize, step: u32, f: &mut impl FnMut(&[f64])) {
    fn rec(left: u32, k: usize, step: u32, acc: &mut Vec<f64>, f: &mut impl FnMut(&[f64])) {
        if k == 1 {
            acc.push(f64::from(left) / 100.0);
            f(acc);
            acc.pop();
            return;
        }
        let mut i = 0;
        while i <= left {
            acc.push(f64::from(i) / 100.0);
            rec(left - i, k - 1, step, acc, f);
            acc.pop();
            i += step;
        }
    }
    rec(total, k, step, &mut Vec::with_capacity(k), f);
}

pub fn cost_of(x: &[f64], paths: &[PathSpec]) -> Option<f64> {
    x.iter()
        .zip(paths)
        .all(|(x, p)| *x <= p.capacity_mbps + 1e-9)
        .then(|| x.iter().zip(paths).map(|(x, p)| x * p.cost).sum())
}

pub fn max_util_of(x: &[f64], paths: &[PathSpec]) -> Option<f64> {
    x.iter()
        .zip(paths)
        .all(|(x, p)| p.background_mbps + x <= p.capacity_mbps + 1e-9)
        .then(|| {
            x.iter()
                .zip(paths)
                .map(|(x, p)| (p.background_mbps + x) / p.capacity_mbps)
                .fold(0.0, f64::max)
        })
}

pub fn delay_of(x: &[f64], paths: &[PathSpec]) -> Option<f64> {
    let c = [paths[0].capacity_mbps, paths[1].capacity_mbps];
    (x[0] <= c[0] * (1.0 - DELAY_EPSILON) && x[1] <= c[1] * (1.0 - DELAY_EPSILON))
        .then(|| delay(x[0], x[1], c))
}

/// `x₁/(c₁-x₁) + 2 x₂/(c₂-x₂)`: one hop on the direct path, two on the detour.
pub fn delay(x1: f64, x2: f64, c: [f64; 2]) -> f64 {
    x1 / (c[0] - x1) + 2.0 * x2 / (c[1] - x2)
}

/// Best objective over the grid, or None when the grid has no feasible point.
pub fn grid_best(spec: &DemandSpec, step: u32, eval: impl Fn(&[f64], &[PathSpec]) -> Option<f64>) -> Option<f64> {
    let total = (spec.demand_mbps * 100.0).round() as u32;
    let mut best: Option<f64> = None;
    for_each_split(total, spec.paths.len(), step, &mut |x| {
        if let Some(v) = eval(x, &spec.paths) {
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    });
    best
}

/// Minimiser of the two-path delay objective on a uniform grid over `x₁`.
pub fn delay_fine_grid(h: f64, c: [f64; 2], resolution: f64) -> f64 {
    let steps = (h / resolution).round() as u64;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..=steps {
        let x1 = i as f64 * resolution;
        let x2 = h - x1;
        if x1 > c[0] * (1.0 - DELAY_EPSILON) || x2 > c[1] * (1.0 - DELAY_EPSILON) {
            continue;
        }
        let f = delay(x1, x2, c);
        if f < best.1 {
            best = (x1, f);
        }
    }
    best.0
}
