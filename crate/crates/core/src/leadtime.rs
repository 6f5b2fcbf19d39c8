//! Initial lead-time laws with finite upper support, and their integrated tails
//!
//! `H(y) = ∫_y^∞ (1 - G(x)) dx`
//!
//! Every supported law has a piecewise-linear CDF (with a possible atom at the
//! lowest knot), so `H` is piecewise quadratic and both `H` and its inverse are
//! evaluated in closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeadTimeError {
    #[error("lead-time parameters must be finite")]
    NonFinite,
    #[error("uniform lead time needs lo < hi, got [{lo}, {hi}]")]
    EmptyUniform { lo: f64, hi: f64 },
    #[error("piecewise-linear CDF needs at least one knot")]
    NoKnots,
    #[error("CDF knots must be strictly increasing in y (knot {0})")]
    KnotsNotIncreasing(usize),
    #[error("CDF values must lie in [0, 1] and be nondecreasing (knot {0})")]
    BadCdfValue(usize),
    #[error("CDF must reach exactly 1 at the last knot")]
    DoesNotReachOne,
    #[error("integrated tail is only defined for h >= 0, got {0}")]
    NegativeTail(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeadTimeDist {
    /// Every customer gets the same lead time.
    PointMass { at: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Knots `(y, G(y))`, linearly interpolated. `G = 0` below the first knot,
    /// so a positive first value is an atom.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl LeadTimeDist {
    pub fn validate(&self) -> Result<(), LeadTimeError> {
        match self {
            Self::PointMass { at } => {
                if !at.is_finite() {
                    return Err(LeadTimeError::NonFinite);
                }
            }
            Self::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(LeadTimeError::NonFinite);
                }
                if lo >= hi {
                    return Err(LeadTimeError::EmptyUniform { lo: *lo, hi: *hi });
                }
            }
            Self::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(LeadTimeError::NoKnots);
                }
                let mut prev: Option<(f64, f64)> = None;
                for (i, &(y, g)) in knots.iter().enumerate() {
                    if !y.is_finite() || !g.is_finite() {
                        return Err(LeadTimeError::NonFinite);
                    }
                    if !(0.0..=1.0).contains(&g) {
                        return Err(LeadTimeError::BadCdfValue(i));
                    }
                    if let Some((py, pg)) = prev {
                        if y <= py {
                            return Err(LeadTimeError::KnotsNotIncreasing(i));
                        }
                        if g < pg {
                            return Err(LeadTimeError::BadCdfValue(i));
                        }
                    }
                    prev = Some((y, g));
                }
                if knots.last().map(|k| k.1) != Some(1.0) {
                    return Err(LeadTimeError::DoesNotReachOne);
                }
            }
        }
        Ok(())
    }

    /// Tabulated form used for all evaluations. Panics on an invalid law.
    pub fn tail(&self) -> TailTable {
        TailTable::new(self)
    }

    /// `y* = sup { y : G(y) < 1 }`.
    pub fn upper_support(&self) -> f64 {
        match self {
            Self::PointMass { at } => *at,
            Self::Uniform { hi, .. } => *hi,
            Self::PiecewiseLinear { .. } => self.tail().upper_support(),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.tail().cdf(y)
    }

    pub fn integrated_tail(&self, y: f64) -> f64 {
        self.tail().integrated_tail(y)
    }

    pub fn integrated_tail_inverse(&self, h: f64) -> Result<f64, LeadTimeError> {
        self.tail().inverse(h)
    }

    /// Draws a lead time by inverting the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::PointMass { at } => *at,
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::PiecewiseLinear { .. } => self.tail().quantile(rng.random::<f64>()),
        }
    }
}

/// Knot table of a lead-time CDF with the integrated tail precomputed at each knot.
#[derive(Debug, Clone, PartialEq)]
pub struct TailTable {
    ys: Vec<f64>,
    gs: Vec<f64>,
    // hs[i] = H(ys[i])
    hs: Vec<f64>,
}

impl TailTable {
    pub fn new(dist: &LeadTimeDist) -> Self {
        dist.validate().expect("valid lead-time distribution");
        let mut knots = match dist {
            LeadTimeDist::PointMass { at } => vec![(*at, 1.0)],
            LeadTimeDist::Uniform { lo, hi } => vec![(*lo, 0.0), (*hi, 1.0)],
            LeadTimeDist::PiecewiseLinear { knots } => knots.clone(),
        };
        // keep knots up to the first one where G reaches 1
        if let Some(first_one) = knots.iter().position(|k| k.1 >= 1.0) {
            knots.truncate(first_one + 1);
        }
        let ys: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let gs: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let n = ys.len();
        let mut hs = vec![0.0; n];
        for i in (0..n.saturating_sub(1)).rev() {
            hs[i] = hs[i + 1] + (ys[i + 1] - ys[i]) * (1.0 - 0.5 * (gs[i] + gs[i + 1]));
        }
        Self { ys, gs, hs }
    }

    pub fn upper_support(&self) -> f64 {
        *self.ys.last().unwrap()
    }

    /// Knot positions, ascending. `H` is a single polynomial between consecutive knots.
    pub fn knots(&self) -> &[f64] {
        &self.ys
    }

    /// Index `i` with `ys[i] <= y < ys[i + 1]`, for `ys[0] <= y < y*`.
    fn segment(&self, y: f64) -> usize {
        self.ys.partition_point(|&k| k <= y) - 1
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y < self.ys[0] {
            0.0
        } else if y >= self.ys[n - 1] {
            1.0
        } else {
            let i = self.segment(y);
            lerp(self.ys[i], self.gs[i], self.ys[i + 1], self.gs[i + 1], y)
        }
    }

    /// `1 - G(y-)`, the survival function's left limit.
    pub fn survival_left(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y <= self.ys[0] {
            1.0
        } else if y > self.ys[n - 1] {
            0.0
        } else {
            let i = self.ys.partition_point(|&k| k < y) - 1;
            1.0 - lerp(self.ys[i], self.gs[i], self.ys[i + 1], self.gs[i + 1], y)
        }
    }

    pub fn integrated_tail(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y >= self.ys[n - 1] {
            return 0.0;
        }
        if y < self.ys[0] {
            return self.hs[0] + (self.ys[0] - y);
        }
        let i = self.segment(y);
        let g = lerp(self.ys[i], self.gs[i], self.ys[i + 1], self.gs[i + 1], y);
        self.hs[i + 1] + (self.ys[i + 1] - y) * (1.0 - 0.5 * (g + self.gs[i + 1]))
    }

    /// The unique `y <= y*` with `H(y) = h`.
    pub fn inverse(&self, h: f64) -> Result<f64, LeadTimeError> {
        if h.is_nan() || h < 0.0 {
            return Err(LeadTimeError::NegativeTail(h));
        }
        let n = self.ys.len();
        if h == 0.0 {
            return Ok(self.ys[n - 1]);
        }
        if h >= self.hs[0] {
            return Ok(self.ys[0] - (h - self.hs[0]));
        }
        // hs is strictly decreasing below y*; find i with hs[i+1] <= h < hs[i]
        let i = self.hs.partition_point(|&v| v > h) - 1;
        let (l, r) = (self.ys[i], self.ys[i + 1]);
        let surv_r = 1.0 - self.gs[i + 1];
        let curvature = (self.gs[i + 1] - self.gs[i]) / (2.0 * (r - l));
        let d = solve_depth(curvature, surv_r, h - self.hs[i + 1]);
        Ok((r - d).clamp(l, r))
    }

    /// Left-continuous quantile `inf { y : G(y) >= u }`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= self.gs[0] {
            return self.ys[0];
        }
        let i = self.gs.partition_point(|&g| g < u) - 1;
        let (g0, g1) = (self.gs[i], self.gs[i + 1]);
        self.ys[i] + (self.ys[i + 1] - self.ys[i]) * (u - g0) / (g1 - g0)
    }
}

fn lerp(x0: f64, y0: f64, x1: f64, y1: f64, x: f64) -> f64 {
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Smallest `d >= 0` with `curvature * d² + slope * d = delta`, for
/// `curvature, slope >= 0` not both zero and `delta >= 0`.
pub(crate) fn solve_depth(curvature: f64, slope: f64, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    // rationalized root avoids cancellation when curvature is tiny
    2.0 * delta / (slope + (slope * slope + 4.0 * curvature * delta).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PM400: LeadTimeDist = LeadTimeDist::PointMass { at: 400.0 };
    const U02: LeadTimeDist = LeadTimeDist::Uniform { lo: 0.0, hi: 2.0 };

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + h * i as f64;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn cdf_values() {
        assert_eq!(PM400.cdf(399.0), 0.0);
        assert_eq!(PM400.cdf(400.0), 1.0);
        assert_eq!(U02.cdf(1.0), 0.5);
        assert_eq!(U02.cdf(-1.0), 0.0);
        assert_eq!(U02.cdf(3.0), 1.0);
    }

    #[test]
    fn tail_values() {
        assert_eq!(PM400.integrated_tail(100.0), 300.0);
        assert_eq!(PM400.integrated_tail(400.0), 0.0);
        assert_eq!(U02.integrated_tail(2.0), 0.0);
        assert_eq!(U02.integrated_tail(0.0), 1.0);
        // below the support H grows with slope -1
        assert_eq!(U02.integrated_tail(-3.0), 4.0);
        assert!((U02.integrated_tail(1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tail_inverse_values() {
        assert_eq!(PM400.integrated_tail_inverse(300.0).unwrap(), 100.0);
        assert_eq!(PM400.integrated_tail_inverse(0.0).unwrap(), 400.0);
        assert!((U02.integrated_tail_inverse(0.25).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            U02.integrated_tail_inverse(-1.0),
            Err(LeadTimeError::NegativeTail(-1.0))
        );
    }

    #[test]
    fn upper_support_trims_flat_top() {
        let d = LeadTimeDist::PiecewiseLinear {
            knots: vec![(0.0, 0.2), (5.0, 1.0), (9.0, 1.0)],
        };
        assert_eq!(d.upper_support(), 5.0);
        assert_eq!(d.integrated_tail(5.0), 0.0);
        // atom of 0.2 at 0: H(0) = ∫_0^5 (0.8 - 0.16x) dx = 2
        assert!((d.integrated_tail(0.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let bad = [
            LeadTimeDist::Uniform { lo: 2.0, hi: 2.0 },
            LeadTimeDist::PointMass { at: f64::INFINITY },
            LeadTimeDist::PiecewiseLinear { knots: vec![] },
            LeadTimeDist::PiecewiseLinear {
                knots: vec![(0.0, 0.0), (0.0, 1.0)],
            },
            LeadTimeDist::PiecewiseLinear {
                knots: vec![(0.0, 0.5), (1.0, 0.4), (2.0, 1.0)],
            },
            LeadTimeDist::PiecewiseLinear {
                knots: vec![(0.0, 0.0), (1.0, 0.9)],
            },
        ];
        for d in bad {
            assert!(d.validate().is_err(), "{d:?}");
        }
    }

    #[test]
    fn quantile_matches_cdf() {
        let d = LeadTimeDist::PiecewiseLinear {
            knots: vec![(1.0, 0.25), (3.0, 0.5), (4.0, 1.0)],
        };
        let t = d.tail();
        assert_eq!(t.quantile(0.1), 1.0);
        assert!((t.quantile(0.375) - 2.0).abs() < 1e-12);
        assert!((t.quantile(0.75) - 3.5).abs() < 1e-12);
    }

    fn arb_dist() -> impl Strategy<Value = LeadTimeDist> {
        prop_oneof![
            (-50.0..50.0f64).prop_map(|at| LeadTimeDist::PointMass { at }),
            (-50.0..50.0f64, 0.1..40.0f64)
                .prop_map(|(lo, w)| LeadTimeDist::Uniform { lo, hi: lo + w }),
            (
                -50.0..0.0f64,
                prop::collection::vec((0.1..10.0f64, 0.0..1.0f64), 1..6),
                0.0..0.5f64
            )
                .prop_map(|(start, steps, atom)| {
                    let mut y = start;
                    let mut incs: Vec<f64> = steps.iter().map(|s| s.1).collect();
                    incs.sort_by(f64::total_cmp);
                    let mut knots = vec![(y, atom)];
                    for (i, (dy, _)) in steps.iter().enumerate() {
                        y += dy;
                        let g = if i + 1 == steps.len() {
                            1.0
                        } else {
                            atom + (1.0 - atom) * incs[i]
                        };
                        knots.push((y, g));
                    }
                    LeadTimeDist::PiecewiseLinear { knots }
                }),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(d in arb_dist(), h in 0.0..100.0f64) {
            let t = d.tail();
            let y = t.inverse(h).unwrap();
            prop_assert!(y <= t.upper_support());
            prop_assert!((t.integrated_tail(y) - h).abs() <= 1e-9 * (1.0 + h));
        }

        #[test]
        fn convex_nonincreasing(d in arb_dist(), a in -80.0..80.0f64, b in 0.01..30.0f64, c in 0.01..30.0f64) {
            let t = d.tail();
            let (y1, y2, y3) = (a, a + b, a + b + c);
            let (h1, h2, h3) = (t.integrated_tail(y1), t.integrated_tail(y2), t.integrated_tail(y3));
            prop_assert!(h1 >= h2 - 1e-12 && h2 >= h3 - 1e-12);
            let s12 = (h2 - h1) / b;
            let s23 = (h3 - h2) / c;
            prop_assert!(s12 <= s23 + 1e-9);
            prop_assert!(s12 >= -1.0 - 1e-9 && s23 <= 1e-9);
        }

        #[test]
        fn tail_bound(d in arb_dist(), u in 0.0..1.0f64) {
            let t = d.tail();
            let ys = t.upper_support();
            let y = ys - 60.0 * u - 1e-6;
            // 1 - G is nonincreasing, so the rectangle at the left end dominates
            prop_assert!(t.integrated_tail(y) <= (ys - y) * (1.0 - t.cdf(y)) + 1e-9);
            prop_assert!(t.integrated_tail(y) >= 0.0);
        }

        #[test]
        fn matches_quadrature(d in arb_dist(), u in 0.0..1.0f64) {
            let t = d.tail();
            let ys = t.upper_support();
            let y = ys - 70.0 * u;
            // integrate piecewise between knots so Simpson is exact on each polynomial piece
            let mut pts: Vec<f64> = t.knots().iter().copied().filter(|&k| k > y).collect();
            pts.insert(0, y);
            let q: f64 = pts
                .windows(2)
                .map(|w| simpson(|x| 1.0 - t.cdf(x), w[0] + 1e-13, w[1] - 1e-13, 64))
                .sum();
            prop_assert!((q - t.integrated_tail(y)).abs() < 1e-9 * (1.0 + q.abs()).max(1.0) + 2e-12 * pts.len() as f64);
        }
    }
}
