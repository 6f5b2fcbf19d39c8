//! Frontier equations: the map from frontier positions to per-station
//! workloads (or queue lengths), its staged inversion, and lead-time profile
//! prediction from the recovered frontiers.
//!
//! For station `j` and frontier vector `y`,
//!
//! ```text
//! Φ_j(y) = Σ_{k ∈ C(j)} w_kj · [H_k(y_j) − H_k(min_{i ∈ S(k|j)} y_i)]⁺
//! ```
//!
//! with the minimum over an empty set taken as `+∞` (so `H_k(+∞) = 0`). The
//! weights `w_kj` are either `ρ_kj` (workload units) or `λ_k` (customer counts).

pub mod two_station;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leadtime::{solve_depth, TailTable};
use crate::topology::{Class, Station, Topology, TopologyError};

/// Absolute tolerance on `y` for the bisection fallback.
pub const BISECTION_TOLERANCE: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: u32 = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontierError {
    #[error("workload for station {station} is negative or not finite ({value})")]
    NegativeWorkload { station: Station, value: f64 },
    #[error("station {station}: bracket expansion did not reach the target {target}")]
    SolverDivergence { station: Station, target: f64 },
    #[error("station {0} has zero traffic intensity")]
    ZeroIntensity(Station),
    #[error("no station is reachable after stations {0:?}")]
    Unreachable(Vec<Station>),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `λ_k`: Φ returns expected queue lengths.
    #[default]
    Count,
    /// `ρ_kj = λ_k / μ_kj`: Φ returns workloads.
    Work,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InversionMethod {
    /// Segment-by-segment closed-form inversion of the piecewise quadratic stage functions.
    #[default]
    Exact,
    /// Bisection after geometric downward bracket expansion.
    Bisection,
}

/// Topology, lead-time tails and per-(class, station) weights.
#[derive(Debug, Clone)]
pub struct WeightedModel {
    topo: Topology,
    tails: Vec<TailTable>,
    supports: Vec<f64>,
    // weights[k - 1][p] for the p-th station on the route of k
    weights: Vec<Vec<f64>>,
    kind: WeightKind,
    normalized: bool,
}

/// Output of the staged inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSolution {
    /// `frontiers[j - 1]` is the frontier at station `j`.
    pub frontiers: Vec<f64>,
    /// Order in which stations were fixed; an admissible permutation.
    pub permutation: Vec<Station>,
    /// Upper endpoint of each stage's inverse domain, in stage order.
    pub stage_bounds: Vec<f64>,
    /// `max_j |Φ_j(frontiers) − w_j|`.
    pub residual: f64,
}

impl FrontierSolution {
    pub fn frontier(&self, j: Station) -> f64 {
        self.frontiers[j - 1]
    }
}

impl WeightedModel {
    /// Weights taken from the rates in the topology's network spec.
    pub fn new(topo: Topology, kind: WeightKind) -> Self {
        let weights = topo
            .spec()
            .classes
            .iter()
            .map(|c| match kind {
                WeightKind::Count => vec![c.arrival_rate; c.route.len()],
                WeightKind::Work => c.service_rates.iter().map(|mu| c.arrival_rate / mu).collect(),
            })
            .collect();
        Self::assemble(topo, weights, kind)
    }

    /// Explicit weights: `weight(k, j)` is called for every `j` on the route of `k`.
    pub fn with_weights(
        topo: Topology,
        kind: WeightKind,
        mut weight: impl FnMut(Class, Station) -> f64,
    ) -> Self {
        let weights = (1..=topo.num_classes())
            .map(|k| topo.route(k).iter().map(|&j| weight(k, j)).collect())
            .collect();
        Self::assemble(topo, weights, kind)
    }

    fn assemble(topo: Topology, weights: Vec<Vec<f64>>, kind: WeightKind) -> Self {
        let tails: Vec<TailTable> = topo
            .spec()
            .classes
            .iter()
            .map(|c| c.lead_time.tail())
            .collect();
        let supports = tails.iter().map(TailTable::upper_support).collect();
        Self {
            topo,
            tails,
            supports,
            weights,
            kind,
            normalized: false,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn tail(&self, k: Class) -> &TailTable {
        &self.tails[k - 1]
    }

    /// `y_k*` for every class.
    pub fn supports(&self) -> &[f64] {
        &self.supports
    }

    pub fn weight(&self, k: Class, j: Station) -> f64 {
        let p = self.topo.route_position(k, j).expect("class visits station");
        self.weights[k - 1][p]
    }

    /// `ρ_j = Σ_{k ∈ C(j)} λ_k / μ_kj`.
    pub fn station_intensity(&self, j: Station) -> f64 {
        let spec = self.topo.spec();
        self.topo
            .visitors(j)
            .iter()
            .map(|&k| {
                let c = spec.class(k);
                c.arrival_rate / c.service_rate(j).unwrap()
            })
            .sum()
    }

    /// Divides every weight at station `j` by `ρ_j`.
    pub fn normalize(&self) -> Result<Self, FrontierError> {
        let intensity: Vec<f64> = (1..=self.topo.num_stations())
            .map(|j| self.station_intensity(j))
            .collect();
        if let Some(j) = intensity.iter().position(|&r| r.is_nan() || r <= 0.0) {
            return Err(FrontierError::ZeroIntensity(j + 1));
        }
        let mut out = self.clone();
        for (k, row) in out.weights.iter_mut().enumerate() {
            for (p, w) in row.iter_mut().enumerate() {
                let j = self.topo.route(k + 1)[p];
                *w /= intensity[j - 1];
            }
        }
        out.normalized = true;
        Ok(out)
    }

    /// `min_{i ∈ S(k|j)} y_i`, `+∞` when `k` enters at `j`.
    fn upstream_min(&self, k: Class, j: Station, y: &[f64]) -> f64 {
        self.topo
            .upstream(k, j)
            .iter()
            .map(|&i| y[i - 1])
            .fold(f64::INFINITY, f64::min)
    }

    fn bracket(&self, k: Class, j: Station, at: f64, upstream: f64) -> f64 {
        let tail = &self.tails[k - 1];
        let hi = if upstream == f64::INFINITY {
            0.0
        } else {
            tail.integrated_tail(upstream)
        };
        self.weight(k, j) * (tail.integrated_tail(at) - hi).max(0.0)
    }

    pub fn phi_station(&self, j: Station, y: &[f64]) -> f64 {
        self.topo
            .visitors(j)
            .iter()
            .map(|&k| self.bracket(k, j, y[j - 1], self.upstream_min(k, j, y)))
            .sum()
    }

    /// Φ(y). Defined on all of `R^J`.
    pub fn phi(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.topo.num_stations(), "frontier vector length");
        (1..=self.topo.num_stations())
            .map(|j| self.phi_station(j, y))
            .collect()
    }

    /// Staged inversion of Φ on the domain, with exact stage inverses.
    pub fn invert(&self, w: &[f64]) -> Result<FrontierSolution, FrontierError> {
        self.invert_with(w, InversionMethod::Exact)
    }

    pub fn invert_with(
        &self,
        w: &[f64],
        method: InversionMethod,
    ) -> Result<FrontierSolution, FrontierError> {
        let n = self.topo.num_stations();
        if w.len() != n {
            return Err(TopologyError::DimensionMismatch {
                expected: n,
                got: w.len(),
            }
            .into());
        }
        if let Some(j) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FrontierError::NegativeWorkload {
                station: j + 1,
                value: w[j],
            });
        }

        let mut y = vec![f64::NAN; n];
        let mut order = Vec::with_capacity(n);
        let mut bounds = Vec::with_capacity(n);

        while order.len() < n {
            let reach = self.topo.reach_sets(&order);
            if reach.stations.is_empty() {
                return Err(FrontierError::Unreachable(order));
            }
            let mut best: Option<(Station, f64, f64)> = None;
            for &j in &reach.stations {
                let terms: Vec<StageTerm<'_>> = reach
                    .classes_at(j)
                    .iter()
                    .map(|&k| StageTerm {
                        weight: self.weight(k, j),
                        tail: &self.tails[k - 1],
                        end: self.supports[k - 1].min(self.upstream_min(k, j, &y)),
                    })
                    .collect();
                let stage = StageFunction { terms };
                let (inv, bound) = match method {
                    InversionMethod::Exact => stage.invert_exact(w[j - 1]),
                    InversionMethod::Bisection => stage
                        .invert_bisection(w[j - 1])
                        .ok_or(FrontierError::SolverDivergence {
                            station: j,
                            target: w[j - 1],
                        })?,
                };
                // strict comparison: ties go to the smaller station index
                if best.is_none_or(|(_, b, _)| inv > b) {
                    best = Some((j, inv, bound));
                }
            }
            let (j, mut value, bound) = best.unwrap();
            // frontiers are nonincreasing along the stage order; clamp rounding excess
            if let Some(&prev) = order.last() {
                value = value.min(y[prev - 1]);
            }
            y[j - 1] = value;
            order.push(j);
            bounds.push(bound);
        }

        let residual = self
            .phi(&y)
            .iter()
            .zip(w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(FrontierSolution {
            frontiers: y,
            permutation: order,
            stage_bounds: bounds,
            residual,
        })
    }

    /// Predicted mass (count or work, by weight kind) at station `j` with lead
    /// time strictly above `y`, given frontiers.
    pub fn predict_profile(&self, frontiers: &[f64], j: Station, y: f64) -> f64 {
        let at = y.max(frontiers[j - 1]);
        self.topo
            .visitors(j)
            .iter()
            .map(|&k| self.bracket(k, j, at, self.upstream_min(k, j, frontiers)))
            .sum()
    }

    /// Predicted station total, the profile at `y → −∞`.
    pub fn predicted_total(&self, frontiers: &[f64], j: Station) -> f64 {
        self.predict_profile(frontiers, j, f64::NEG_INFINITY)
    }

    /// Predicted lead-time CDF at station `j`: `1 − profile(y) / total`.
    /// A station with zero predicted mass has CDF 1 everywhere.
    pub fn predicted_cdf(&self, frontiers: &[f64], j: Station, y: f64) -> f64 {
        let total = self.predicted_total(frontiers, j);
        if total <= 0.0 {
            return 1.0;
        }
        (1.0 - self.predict_profile(frontiers, j, y) / total).clamp(0.0, 1.0)
    }

    /// Whether `y` lies in the frontier domain; returns the witness permutation.
    pub fn in_domain(&self, y: &[f64]) -> Option<Vec<Station>> {
        self.topo.in_domain_with_supports(&self.supports, y)
    }
}

struct StageTerm<'a> {
    weight: f64,
    tail: &'a TailTable,
    // min(y_k*, upstream frontier): the term vanishes at and above this point
    end: f64,
}

/// `K(y) = Σ w · [H(y) − H(end)]⁺`, continuous and nonincreasing, strictly
/// decreasing below `max end`.
struct StageFunction<'a> {
    terms: Vec<StageTerm<'a>>,
}

impl StageFunction<'_> {
    fn upper_end(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.end)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn eval(&self, y: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| y < t.end)
            .map(|t| t.weight * (t.tail.integrated_tail(y) - t.tail.integrated_tail(t.end)))
            .sum()
    }

    /// Returns `(K⁻¹(target), upper end of the inverse's range)`.
    fn invert_exact(&self, target: f64) -> (f64, f64) {
        let top = self.upper_end();
        if target <= 0.0 {
            return (top, top);
        }
        let mut cuts: Vec<f64> = self
            .terms
            .iter()
            .flat_map(|t| t.tail.knots().iter().copied().chain(std::iter::once(t.end)))
            .filter(|&p| p < top)
            .collect();
        cuts.sort_by(|a, b| b.total_cmp(a));
        cuts.dedup();

        let mut right = top;
        let mut k_right = 0.0;
        for &left in &cuts {
            let k_left = self.eval(left);
            if k_left >= target {
                return (self.solve_segment(left, right, k_right, target), top);
            }
            right = left;
            k_right = k_left;
        }
        (self.solve_segment(f64::NEG_INFINITY, right, k_right, target), top)
    }

    /// On `(left, right)` the active terms are fixed and each survival
    /// function is affine, so `K(right − d) − K(right)` is a quadratic in `d`.
    fn solve_segment(&self, left: f64, right: f64, k_right: f64, target: f64) -> f64 {
        let mut slope = 0.0;
        let mut curvature = 0.0;
        for t in self.terms.iter().filter(|t| right <= t.end) {
            let s_right = t.tail.survival_left(right);
            slope += t.weight * s_right;
            if left.is_finite() {
                let s_left = 1.0 - t.tail.cdf(left);
                curvature += t.weight * (s_left - s_right) / (2.0 * (right - left));
            }
        }
        let d = solve_depth(curvature, slope, target - k_right);
        (right - d).clamp(left, right)
    }

    fn invert_bisection(&self, target: f64) -> Option<(f64, f64)> {
        let top = self.upper_end();
        if target <= 0.0 {
            return Some((top, top));
        }
        let mut hi = top;
        let mut step = 1.0;
        let mut lo = top - step;
        let mut doublings = 0;
        while self.eval(lo) < target {
            hi = lo;
            step *= 2.0;
            lo = top - step;
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS {
                return None;
            }
        }
        // invariant: K(lo) >= target > K(hi)
        while hi - lo > BISECTION_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some((0.5 * (lo + hi), top))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leadtime::LeadTimeDist;
    use crate::presets::crossing_pair;
    use crate::topology::{ClassSpec, NetworkSpec};

    fn third_model(deadlines: [f64; 4]) -> WeightedModel {
        let topo = Topology::build(crossing_pair(0.32, 1.0, deadlines)).unwrap();
        WeightedModel::new(topo, WeightKind::Count).normalize().unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn phi_reference_cases() {
        let m = third_model([400.0, 300.0, 200.0, 100.0]);
        assert!(close(&m.phi(&[400.0, 400.0]), &[0.0, 0.0], 1e-12));
        assert!(close(&m.phi(&[250.0, 188.0]), &[50.0, 58.0], 1e-9));
        let m = third_model([200.0, 200.0, 110.0, 100.0]);
        assert!(close(&m.phi(&[80.0, 110.0]), &[60.0, 30.0], 1e-9));
    }

    #[test]
    fn invert_reference_cases() {
        let m = third_model([400.0, 300.0, 200.0, 100.0]);
        let s = m.invert(&[50.0, 58.0]).unwrap();
        assert!(close(&s.frontiers, &[250.0, 188.0], 1e-9), "{s:?}");
        assert_eq!(s.permutation, vec![1, 2]);

        let s = m.invert(&[0.0, 0.0]).unwrap();
        assert!(close(&s.frontiers, &[400.0, 400.0], 1e-12), "{s:?}");
        assert_eq!(s.stage_bounds, vec![400.0, 400.0]);

        let m = third_model([200.0, 200.0, 110.0, 100.0]);
        let s = m.invert(&[60.0, 30.0]).unwrap();
        assert!(close(&s.frontiers, &[80.0, 110.0], 1e-9), "{s:?}");
        assert_eq!(s.permutation, vec![2, 1]);
    }

    #[test]
    fn bisection_agrees_with_exact() {
        let m = third_model([400.0, 300.0, 200.0, 100.0]);
        for w in [[50.0, 58.0], [1.0, 200.0], [300.0, 3.0], [0.0, 12.0]] {
            let a = m.invert(&w).unwrap();
            let b = m.invert_with(&w, InversionMethod::Bisection).unwrap();
            assert!(close(&a.frontiers, &b.frontiers, 1e-9), "{a:?} {b:?}");
            assert_eq!(a.permutation, b.permutation);
        }
    }

    #[test]
    fn rejects_negative_workload() {
        let m = third_model([400.0, 300.0, 200.0, 100.0]);
        assert_eq!(
            m.invert(&[-1.0, 0.0]),
            Err(FrontierError::NegativeWorkload {
                station: 1,
                value: -1.0
            })
        );
    }

    #[test]
    fn profile_prediction() {
        let m = third_model([400.0, 300.0, 200.0, 100.0]);
        let f = [250.0, 188.0];
        assert!((m.predict_profile(&f, 2, -1e6) - 58.0).abs() < 1e-9);
        assert!((m.predict_profile(&f, 2, 250.0) - 50.0 / 3.0).abs() < 1e-9);
        assert_eq!(m.predict_profile(&f, 1, 401.0), 0.0);
        assert_eq!(m.predict_profile(&f, 2, 401.0), 0.0);
        assert_eq!(m.predicted_cdf(&f, 1, 250.0), 0.0);
        assert!((m.predicted_cdf(&f, 1, 325.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalization() {
        let m = third_model([400.0, 300.0, 200.0, 100.0]);
        assert!((m.weight(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!(m.is_normalized());

        let unit = Topology::build(NetworkSpec {
            stations: 1,
            classes: vec![ClassSpec::new(
                vec![1],
                1.0,
                vec![1.0],
                LeadTimeDist::PointMass { at: 5.0 },
            )],
        })
        .unwrap();
        let plain = WeightedModel::new(unit, WeightKind::Count);
        assert_eq!(plain.normalize().unwrap().weight(1, 1), plain.weight(1, 1));

        // ρ1 = 0.5, ρ2 = 1.0
        let uneven = Topology::build(NetworkSpec {
            stations: 2,
            classes: vec![ClassSpec::new(
                vec![1, 2],
                0.5,
                vec![1.0, 0.5],
                LeadTimeDist::PointMass { at: 5.0 },
            )],
        })
        .unwrap();
        let m = WeightedModel::new(uneven, WeightKind::Count);
        let n = m.normalize().unwrap();
        assert_eq!(n.weight(1, 1), 2.0 * m.weight(1, 1));
        assert_eq!(n.weight(1, 2), m.weight(1, 2));
    }

    #[test]
    fn tandem_minimal_solution() {
        // route (1, 2), y* = 10: w = (3, 0) has solutions (7, y2) for every y2 >= 7
        let topo = Topology::build(NetworkSpec {
            stations: 2,
            classes: vec![ClassSpec::new(
                vec![1, 2],
                1.0,
                vec![1.0, 1.0],
                LeadTimeDist::PointMass { at: 10.0 },
            )],
        })
        .unwrap();
        let m = WeightedModel::new(topo, WeightKind::Count);
        let s = m.invert(&[3.0, 0.0]).unwrap();
        assert_eq!(s.frontiers, vec![7.0, 7.0]);
        for alt in [7.5, 8.0, 10.0] {
            assert_eq!(m.phi(&[7.0, alt]), vec![3.0, 0.0]);
            assert!(s.frontiers[1] <= alt);
        }
    }
}
