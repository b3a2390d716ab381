//! Flow splitting across parallel paths and forecast-driven path choice.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("demand {demand} Mbps exceeds the feasible maximum {max} Mbps")]
    Infeasible { demand: f64, max: f64 },
    #[error("invalid demand spec: {0}")]
    InvalidSpec(String),
    #[error("no candidate paths")]
    NoCandidates,
    #[error("forecasts have different lengths")]
    ForecastLength,
    #[error("{0} is not a path-selection objective")]
    NotSelection(Objective),
    #[error("{0} is not a splitting objective")]
    NotSplit(Objective),
    #[error("unknown objective {0:?}")]
    UnknownObjective(String),
}

pub type Result<T, E = OptimizerError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinCost,
    MinMaxUtilization,
    MinDelay,
    MaxPredictedBandwidth,
    MinLatency,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::MinCost => "min_cost",
            Objective::MinMaxUtilization => "min_max_utilization",
            Objective::MinDelay => "min_delay",
            Objective::MaxPredictedBandwidth => "max_predicted_bandwidth",
            Objective::MinLatency => "min_latency",
        }
    }

    /// True for objectives that pick one path rather than split.
    pub fn is_selection(self) -> bool {
        matches!(self, Objective::MaxPredictedBandwidth | Objective::MinLatency)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = OptimizerError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Objective::MinCost,
            Objective::MinMaxUtilization,
            Objective::MinDelay,
            Objective::MaxPredictedBandwidth,
            Objective::MinLatency,
        ]
        .into_iter()
        .find(|o| o.name() == s.replace('-', "_"))
        .ok_or_else(|| OptimizerError::UnknownObjective(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub id: u32,
    pub capacity_mbps: f64,
    /// Cost per Mbps.
    #[serde(default)]
    pub cost: f64,
    #[serde(default)]
    pub latency_ms: f64,
    /// Load already on the path; only the utilisation objective reads it.
    #[serde(default)]
    pub background_mbps: f64,
}

impl PathSpec {
    pub fn new(id: u32, capacity_mbps: f64) -> Self {
        PathSpec {
            id,
            capacity_mbps,
            cost: 0.0,
            latency_ms: 0.0,
            background_mbps: 0.0,
        }
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = cost;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSpec {
    pub demand_mbps: f64,
    pub paths: Vec<PathSpec>,
}

impl DemandSpec {
    pub fn new(demand_mbps: f64, paths: Vec<PathSpec>) -> Self {
        DemandSpec { demand_mbps, paths }
    }

    fn validate(&self) -> Result<()> {
        let h = self.demand_mbps;
        if !(h.is_finite() && h >= 0.0) {
            return Err(OptimizerError::InvalidSpec(format!("demand {h}")));
        }
        if self.paths.is_empty() {
            return Err(OptimizerError::InvalidSpec("no paths".into()));
        }
        for p in &self.paths {
            if !(p.capacity_mbps.is_finite() && p.capacity_mbps > 0.0) {
                return Err(OptimizerError::InvalidSpec(format!(
                    "path {} capacity {}",
                    p.id, p.capacity_mbps
                )));
            }
            if !(p.cost.is_finite() && p.cost >= 0.0) {
                return Err(OptimizerError::InvalidSpec(format!("path {} cost {}", p.id, p.cost)));
            }
            if !(p.background_mbps >= 0.0 && p.background_mbps <= p.capacity_mbps) {
                return Err(OptimizerError::InvalidSpec(format!(
                    "path {} background {}",
                    p.id, p.background_mbps
                )));
            }
        }
        Ok(())
    }

    fn two_paths(&self) -> Result<(&PathSpec, &PathSpec)> {
        match self.paths.as_slice() {
            [a, b] => Ok((a, b)),
            other => Err(OptimizerError::InvalidSpec(format!(
                "expected 2 paths, got {}",
                other.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDecision {
    pub objective_kind: Objective,
    /// Mbps per path, in spec order. Sums to the demand.
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Linear cost `Σ ξᵢ xᵢ`: fill paths cheapest first. Paths of equal cost
/// share their slice of the demand in proportion to capacity.
pub fn split_min_cost(spec: &DemandSpec) -> Result<SplitDecision> {
    spec.validate()?;
    let h = spec.demand_mbps;
    let max: f64 = spec.paths.iter().map(|p| p.capacity_mbps).sum();
    if h > max {
        return Err(OptimizerError::Infeasible { demand: h, max });
    }
    let mut order: Vec<usize> = (0..spec.paths.len()).collect();
    order.sort_by(|&a, &b| spec.paths[a].cost.total_cmp(&spec.paths[b].cost).then(a.cmp(&b)));

    let mut x = vec![0.0; spec.paths.len()];
    let mut remaining = h;
    let mut i = 0;
    while i < order.len() && remaining > 0.0 {
        let cost = spec.paths[order[i]].cost;
        let group: Vec<usize> = order[i..]
            .iter()
            .copied()
            .take_while(|&j| spec.paths[j].cost == cost)
            .collect();
        let cap: f64 = group.iter().map(|&j| spec.paths[j].capacity_mbps).sum();
        let take = remaining.min(cap);
        for &j in &group {
            x[j] = take * spec.paths[j].capacity_mbps / cap;
        }
        remaining -= take;
        i += group.len();
    }
    fix_sum(&mut x, h, |j| spec.paths[j].capacity_mbps);
    let objective = x.iter().zip(&spec.paths).map(|(x, p)| x * p.cost).sum();
    Ok(SplitDecision {
        objective_kind: Objective::MinCost,
        x,
        objective,
    })
}

/// Minimises the largest utilisation `(bᵢ + xᵢ) / cᵢ` over any number of
/// paths by water-filling: paths are raised to a common level in order of
/// their starting utilisation.
pub fn split_min_max_util(spec: &DemandSpec) -> Result<SplitDecision> {
    spec.validate()?;
    let h = spec.demand_mbps;
    let paths = &spec.paths;
    let max: f64 = paths.iter().map(|p| p.capacity_mbps - p.background_mbps).sum();
    if h > max * (1.0 + 1e-12) {
        return Err(OptimizerError::Infeasible { demand: h, max });
    }
    let start = |p: &PathSpec| p.background_mbps / p.capacity_mbps;
    let mut order: Vec<usize> = (0..paths.len()).collect();
    order.sort_by(|&a, &b| start(&paths[a]).total_cmp(&start(&paths[b])).then(a.cmp(&b)));

    // smallest active set whose common level does not reach the next path
    let (mut sum_b, mut sum_c) = (0.0, 0.0);
    let mut level = 0.0;
    for (k, &j) in order.iter().enumerate() {
        sum_b += paths[j].background_mbps;
        sum_c += paths[j].capacity_mbps;
        level = (h + sum_b) / sum_c;
        match order.get(k + 1) {
            Some(&next) if level > start(&paths[next]) => continue,
            _ => break,
        }
    }
    let level = level.min(1.0);
    let mut x: Vec<f64> = paths
        .iter()
        .map(|p| (level * p.capacity_mbps - p.background_mbps).max(0.0))
        .collect();
    fix_sum(&mut x, h, |j| paths[j].capacity_mbps - paths[j].background_mbps);
    let objective = x
        .iter()
        .zip(paths)
        .map(|(x, p)| (p.background_mbps + x) / p.capacity_mbps)
        .fold(0.0, f64::max);
    Ok(SplitDecision {
        objective_kind: Objective::MinMaxUtilization,
        x,
        objective,
    })
}

/// Hop weights of the two paths in the delay objective: the second path
/// is the two-hop detour.
pub const DELAY_WEIGHTS: [f64; 2] = [1.0, 2.0];

/// Relative margin kept below capacity, where the delay term diverges.
pub const DELAY_EPSILON: f64 = 1e-6;

/// Delay objective `x₁/(c₁-x₁) + 2 x₂/(c₂-x₂)` for a two-path split.
pub fn delay_objective(x: [f64; 2], c: [f64; 2]) -> f64 {
    DELAY_WEIGHTS[0] * x[0] / (c[0] - x[0]) + DELAY_WEIGHTS[1] * x[1] / (c[1] - x[1])
}

/// Two-path delay minimisation by golden-section search on `x₁`, keeping
/// each path at most `c - ε` with `ε = 1e-6 c`.
pub fn split_min_delay(spec: &DemandSpec) -> Result<SplitDecision> {
    spec.validate()?;
    let (p1, p2) = spec.two_paths()?;
    let h = spec.demand_mbps;
    let c = [p1.capacity_mbps, p2.capacity_mbps];
    let cap = [c[0] * (1.0 - DELAY_EPSILON), c[1] * (1.0 - DELAY_EPSILON)];
    if h > cap[0] + cap[1] {
        return Err(OptimizerError::Infeasible {
            demand: h,
            max: cap[0] + cap[1],
        });
    }
    let lo = (h - cap[1]).max(0.0);
    let hi = h.min(cap[0]);
    let f = |x1: f64| delay_objective([x1, h - x1], c);
    let x1 = golden_section(f, lo, hi, 1e-9).clamp(lo, hi);
    let x = vec![x1, h - x1];
    Ok(SplitDecision {
        objective_kind: Objective::MinDelay,
        objective: f(x1),
        x,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / 2.0;
    // the endpoints win when the optimum sits on a bound
    [a, mid, b]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap_or(mid)
}

/// Absorbs rounding so that `Σ x = h` holds to the last bit the slack of
/// the largest-headroom entry allows.
fn fix_sum(x: &mut [f64], h: f64, headroom: impl Fn(usize) -> f64) {
    let err = h - x.iter().sum::<f64>();
    if err == 0.0 || x.is_empty() {
        return;
    }
    let j = (0..x.len())
        .filter(|&j| x[j] > 0.0 || err > 0.0)
        .max_by(|&a, &b| (headroom(a) - x[a]).total_cmp(&(headroom(b) - x[b])))
        .unwrap_or(0);
    x[j] = (x[j] + err).max(0.0);
}

/// Dispatches to the splitter for a splitting objective.
pub fn split(spec: &DemandSpec, objective: Objective) -> Result<SplitDecision> {
    match objective {
        Objective::MinCost => split_min_cost(spec),
        Objective::MinMaxUtilization => split_min_max_util(spec),
        Objective::MinDelay => split_min_delay(spec),
        other => Err(OptimizerError::NotSplit(other)),
    }
}

/// How a multi-step bandwidth forecast is reduced to one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Worst step over the horizon.
    #[default]
    Min,
    Mean,
}

impl Aggregation {
    pub fn apply(self, forecast: &[f64]) -> f64 {
        match self {
            Aggregation::Min => forecast.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregation::Mean => forecast.iter().sum::<f64>() / forecast.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub path: u32,
    /// Predicted available bandwidth per step, Mbps.
    pub forecast: Vec<f64>,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub path: u32,
    pub objective: Objective,
    /// Aggregated forecast or latency of the chosen path.
    pub score: f64,
}

pub fn select_path(candidates: &[Candidate], objective: Objective) -> Result<Selection> {
    select_path_with(candidates, objective, Aggregation::Min)
}

/// Ties go to the lowest path id.
pub fn select_path_with(
    candidates: &[Candidate],
    objective: Objective,
    aggregation: Aggregation,
) -> Result<Selection> {
    if !objective.is_selection() {
        return Err(OptimizerError::NotSelection(objective));
    }
    let first = candidates.first().ok_or(OptimizerError::NoCandidates)?;
    if objective == Objective::MaxPredictedBandwidth
        && candidates
            .iter()
            .any(|c| c.forecast.len() != first.forecast.len() || c.forecast.is_empty())
    {
        return Err(OptimizerError::ForecastLength);
    }
    let score = |c: &Candidate| match objective {
        Objective::MaxPredictedBandwidth => aggregation.apply(&c.forecast),
        _ => c.latency_ms,
    };
    let better = |a: f64, b: f64| match objective {
        Objective::MaxPredictedBandwidth => a > b,
        _ => a < b,
    };
    let mut sorted: Vec<&Candidate> = candidates.iter().collect();
    sorted.sort_by_key(|c| c.path);
    let mut best = sorted[0];
    let mut best_score = score(best);
    for c in &sorted[1..] {
        let s = score(c);
        if better(s, best_score) {
            best = c;
            best_score = s;
        }
    }
    Ok(Selection {
        path: best.path,
        objective,
        score: best_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(h: f64, c: (f64, f64), cost: (f64, f64)) -> DemandSpec {
        DemandSpec::new(
            h,
            vec![
                PathSpec::new(1, c.0).with_cost(cost.0),
                PathSpec::new(2, c.1).with_cost(cost.1),
            ],
        )
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn min_cost_cases() {
        let d = split_min_cost(&two(5.0, (10.0, 10.0), (1.0, 2.0))).unwrap();
        assert_eq!((d.x.clone(), d.objective), (vec![5.0, 0.0], 5.0));
        let d = split_min_cost(&two(15.0, (10.0, 10.0), (1.0, 2.0))).unwrap();
        assert_eq!((d.x.clone(), d.objective), (vec![10.0, 5.0], 20.0));
        let d = split_min_cost(&two(9.0, (20.0, 10.0), (3.0, 3.0))).unwrap();
        assert!(close(&d.x, &[6.0, 3.0], 1e-12));
        assert!((d.objective - 27.0).abs() < 1e-12);
    }

    #[test]
    fn min_cost_infeasible_reports_max() {
        assert_eq!(
            split_min_cost(&two(25.0, (10.0, 10.0), (1.0, 2.0))),
            Err(OptimizerError::Infeasible {
                demand: 25.0,
                max: 20.0
            })
        );
    }

    #[test]
    fn min_max_util_cases() {
        let d = split_min_max_util(&two(10.0, (10.0, 10.0), (0.0, 0.0))).unwrap();
        assert_eq!((d.x.clone(), d.objective), (vec![5.0, 5.0], 0.5));
        let d = split_min_max_util(&two(9.0, (20.0, 10.0), (0.0, 0.0))).unwrap();
        assert!(close(&d.x, &[6.0, 3.0], 1e-12));
        assert!((d.objective - 0.3).abs() < 1e-12);
        let d = split_min_max_util(&two(0.0, (20.0, 10.0), (0.0, 0.0))).unwrap();
        assert_eq!((d.x.clone(), d.objective), (vec![0.0, 0.0], 0.0));
        assert!(split_min_max_util(&two(31.0, (20.0, 10.0), (0.0, 0.0))).is_err());
    }

    #[test]
    fn water_filling_with_background() {
        let mut spec = DemandSpec::new(
            6.0,
            vec![PathSpec::new(1, 10.0), PathSpec::new(2, 10.0), PathSpec::new(3, 10.0)],
        );
        spec.paths[0].background_mbps = 8.0;
        // paths 2 and 3 rise to 3 Mbps each, level 0.3 stays below path 1
        let d = split_min_max_util(&spec).unwrap();
        assert!(close(&d.x, &[0.0, 3.0, 3.0], 1e-12), "{:?}", d.x);
        spec.demand_mbps = 16.0;
        // level 0.8 reaches path 1 exactly
        let d = split_min_max_util(&spec).unwrap();
        assert!(close(&d.x, &[0.0, 8.0, 8.0], 1e-9), "{:?}", d.x);
        spec.demand_mbps = 19.0;
        let d = split_min_max_util(&spec).unwrap();
        assert!(close(&d.x, &[1.0, 9.0, 9.0], 1e-9), "{:?}", d.x);
        assert!((d.objective - 0.9).abs() < 1e-12);
    }

    #[test]
    fn min_delay_stationary_point() {
        let d = split_min_delay(&two(5.0, (10.0, 10.0), (0.0, 0.0))).unwrap();
        let exact = (10.0 * 2f64.sqrt() - 5.0) / (1.0 + 2f64.sqrt());
        assert!((d.x[0] - exact).abs() < 1e-6, "{:?}", d.x);
        assert!((d.x[0] - 3.787).abs() < 1e-3);
        assert_eq!(d.x[0] + d.x[1], 5.0);

        let d = split_min_delay(&two(0.0, (10.0, 10.0), (0.0, 0.0))).unwrap();
        assert_eq!((d.x.clone(), d.objective), (vec![0.0, 0.0], 0.0));

        let d = split_min_delay(&two(0.1, (10.0, 10.0), (0.0, 0.0))).unwrap();
        assert!(d.x[0] > d.x[1]);
    }

    #[test]
    fn min_delay_bounds() {
        assert!(matches!(
            split_min_delay(&two(20.0, (10.0, 10.0), (0.0, 0.0))),
            Err(OptimizerError::Infeasible { .. })
        ));
        let d = split_min_delay(&two(19.9, (10.0, 10.0), (0.0, 0.0))).unwrap();
        assert!(d.objective.is_finite());
        assert!(d.x.iter().all(|&x| x <= 10.0 * (1.0 - DELAY_EPSILON)));
        assert!(split_min_delay(&DemandSpec::new(1.0, vec![PathSpec::new(1, 10.0)])).is_err());
    }

    fn cand(path: u32, forecast: Vec<f64>, latency_ms: f64) -> Candidate {
        Candidate {
            path,
            forecast,
            latency_ms,
        }
    }

    #[test]
    fn select_by_forecast() {
        let a = cand(1, vec![30.0; 10], 23.0);
        let b = cand(2, vec![12.0; 10], 4.0);
        let sel = select_path(&[a.clone(), b.clone()], Objective::MaxPredictedBandwidth).unwrap();
        assert_eq!(sel.path, 1);

        let mut dip = vec![30.0; 10];
        dip[9] = 5.0;
        let a2 = cand(1, dip, 23.0);
        let cands = [a2, b.clone()];
        assert_eq!(select_path(&cands, Objective::MaxPredictedBandwidth).unwrap().path, 2);
        let mean = select_path_with(&cands, Objective::MaxPredictedBandwidth, Aggregation::Mean);
        assert_eq!(mean.unwrap().path, 1);

        assert_eq!(select_path(&[a, b], Objective::MinLatency).unwrap().path, 2);
    }

    #[test]
    fn select_ties_and_errors() {
        let cands = [cand(7, vec![10.0], 5.0), cand(3, vec![10.0], 5.0)];
        assert_eq!(select_path(&cands, Objective::MaxPredictedBandwidth).unwrap().path, 3);
        assert_eq!(select_path(&cands, Objective::MinLatency).unwrap().path, 3);
        assert_eq!(select_path(&[], Objective::MinLatency), Err(OptimizerError::NoCandidates));
        assert_eq!(
            select_path(&cands, Objective::MinCost),
            Err(OptimizerError::NotSelection(Objective::MinCost))
        );
        let ragged = [cand(1, vec![1.0, 2.0], 0.0), cand(2, vec![1.0], 0.0)];
        assert_eq!(
            select_path(&ragged, Objective::MaxPredictedBandwidth),
            Err(OptimizerError::ForecastLength)
        );
    }

    #[test]
    fn objective_names() {
        for o in ["min_cost", "min_max_utilization", "min_delay", "max_predicted_bandwidth", "min_latency"] {
            let parsed: Objective = o.parse().unwrap();
            assert_eq!(parsed.to_string(), o);
            assert_eq!(serde_json::to_string(&parsed).unwrap(), format!("\"{o}\""));
        }
        assert!("fastest".parse::<Objective>().is_err());
    }
}
