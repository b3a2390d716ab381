//! Max-min fair rate allocation by progressive filling.
//!
//! All flows that are still unconstrained grow at the same pace. At each round
//! the increment is the smallest of (a) every active link's remaining
//! capacity split over the unfrozen flows crossing it and (b) every unfrozen
//! flow's unmet demand. Flows on saturated links, and flows whose demand is
//! met, freeze. Arithmetic is exact (`BigRational`), so the capacity and
//! demand constraints hold with equality rather than up to rounding.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// One flow's demand cap and the resources (links) it crosses.
#[derive(Debug, Clone)]
pub struct Demand {
    pub cap: BigRational,
    pub links: Vec<usize>,
}

/// Returns one rate per entry of `demands`, in order.
///
/// `capacities[l]` is the capacity of resource `l`. A flow listing the same
/// link twice is charged twice.
pub fn max_min_fair(capacities: &[BigRational], demands: &[Demand]) -> Vec<BigRational> {
    let mut rates = vec![BigRational::zero(); demands.len()];
    let mut remaining: Vec<BigRational> = capacities.to_vec();
    let mut frozen: Vec<bool> = demands.iter().map(|d| !d.cap.is_positive()).collect();

    loop {
        // multiplicity of unfrozen flows on each link
        let mut users = vec![0u64; capacities.len()];
        for (d, _) in demands.iter().zip(&frozen).filter(|(_, f)| !**f) {
            for &l in &d.links {
                users[l] += 1;
            }
        }
        let mut step: Option<BigRational> = None;
        let mut consider = |v: BigRational| {
            if step.as_ref().is_none_or(|s| v < *s) {
                step = Some(v);
            }
        };
        for (l, &n) in users.iter().enumerate() {
            if n > 0 {
                consider(&remaining[l] / BigRational::from_integer(n.into()));
            }
        }
        for (i, d) in demands.iter().enumerate() {
            if !frozen[i] {
                consider(&d.cap - &rates[i]);
            }
        }
        let Some(step) = step else { break };

        for (i, d) in demands.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            rates[i] += &step;
            for &l in &d.links {
                remaining[l] -= &step;
            }
        }
        let mut progressed = false;
        for (i, d) in demands.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            if rates[i] >= d.cap || d.links.iter().any(|&l| remaining[l].is_zero()) {
                frozen[i] = true;
                progressed = true;
            }
        }
        debug_assert!(progressed, "water-filling round froze no flow");
        if !progressed {
            break;
        }
    }
    rates
}
