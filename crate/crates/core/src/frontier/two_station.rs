//! Closed-form frontiers for the crossing two-station network with constant
//! lead times (see [`crate::presets::crossing_pair`]).
//!
//! The `(Q1, Q2)` quadrant splits into eight regions, each solved by one pair
//! of explicit formulas. Rather than locating the region geometrically, every
//! candidate pair is evaluated and the one that lands in the domain and
//! reproduces the queue totals is returned.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosedFormError {
    #[error("lead times must satisfy y1* >= y2* >= y3* >= y4*, got {0:?}")]
    UnorderedDeadlines([f64; 4]),
    #[error("arrival rates must be finite and positive, got {0:?}")]
    BadRates([f64; 4]),
    #[error("queue totals must be finite and nonnegative, got ({0}, {1})")]
    NegativeQueue(f64, f64),
    #[error("no region formula pair is consistent for Q = ({0}, {1})")]
    NoConsistentRegion(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
}

impl Region {
    pub const ALL: [Region; 8] = [
        Region::I,
        Region::II,
        Region::III,
        Region::IV,
        Region::V,
        Region::VI,
        Region::VII,
        Region::VIII,
    ];
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
            Region::V => "V",
            Region::VI => "VI",
            Region::VII => "VII",
            Region::VIII => "VIII",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStationParams {
    pub rates: [f64; 4],
    /// Constant lead times, nonincreasing in class index.
    pub deadlines: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub region: Region,
    pub f1: f64,
    pub f2: f64,
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

impl TwoStationParams {
    pub fn new(rates: [f64; 4], deadlines: [f64; 4]) -> Result<Self, ClosedFormError> {
        if rates.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(ClosedFormError::BadRates(rates));
        }
        if deadlines.iter().any(|d| !d.is_finite()) || deadlines.windows(2).any(|w| w[0] < w[1]) {
            return Err(ClosedFormError::UnorderedDeadlines(deadlines));
        }
        Ok(Self { rates, deadlines })
    }

    /// Right-hand sides of the two frontier equations, with every bracket
    /// clipped at zero.
    pub fn queue_totals(&self, f1: f64, f2: f64) -> (f64, f64) {
        let [l1, l2, l3, l4] = self.rates;
        let [y1, y2, y3, y4] = self.deadlines;
        let q1 = l1 * pos(y1 - f1) + l2 * pos(pos(y2 - f1) - pos(y2 - f2)) + l3 * pos(y3 - f1);
        let q2 = l1 * pos(pos(y1 - f2) - pos(y1 - f1)) + l2 * pos(y2 - f2) + l4 * pos(y4 - f2);
        (q1, q2)
    }

    /// Membership in the union of the two ordered domain pieces.
    pub fn in_domain(&self, f1: f64, f2: f64, tol: f64) -> bool {
        let [y1, y2, ..] = self.deadlines;
        let one_two = f1 + tol >= f2 && f1 <= y1 + tol && f2 <= y1 + tol;
        let two_one = f2 + tol >= f1 && f1 <= y2 + tol && f2 <= y2 + tol;
        one_two || two_one
    }

    /// The formula pair assigned to `region`, evaluated at `(q1, q2)`.
    pub fn candidate(&self, region: Region, q1: f64, q2: f64) -> (f64, f64) {
        let [l1, l2, l3, l4] = self.rates;
        let [y1, y2, y3, y4] = self.deadlines;

        let f1_a = y1 - q1 / l1;
        let f1_b = (l1 * y1 + l2 * y2 - q2 - q1) / (l1 + l2);
        let f1_c = (l1 * y1 + l3 * y3 - q1) / (l1 + l3);
        let f1_d = (l1 * y1 + l2 * y2 + l3 * y3 - q1 - q2) / (l1 + l2 + l3);
        let f1_e = (l1 * y1 + l3 * y3 - q1) / (l1 + l2 + l3)
            + l2 * (l2 * y2 + l4 * y4 - q2) / ((l1 + l2 + l3) * (l2 + l4));

        let f2_a = y2 - q2 / l2;
        let f2_b = (l1 * y1 - q2 - q1) / l1;
        let f2_c = (l2 * y2 + l4 * y4 - q2) / (l2 + l4);
        let f2_d = (l1 * y1 + l2 * y2 - q2 - q1) / (l1 + l2);
        let f2_e = (l1 * y1 + l2 * y2 + l4 * y4 - q2 - q1) / (l1 + l2 + l4);
        let f2_f = l1 * (l1 * y1 + l3 * y3 - q1) / ((l1 + l2) * (l1 + l3)) + (l2 * y2 - q2) / (l1 + l2);
        let f2_g = l1 * (l1 * y1 + l3 * y3 - q1) / ((l1 + l3) * (l1 + l2 + l4))
            + (l2 * y2 + l4 * y4 - q2) / (l1 + l2 + l4);

        match region {
            Region::I => (f1_a, f2_b),
            Region::II => (f1_b, f2_a),
            Region::III => (f1_a, f2_d),
            Region::IV => (f1_a, f2_e),
            Region::V => (f1_d, f2_a),
            Region::VI => (f1_c, f2_f),
            Region::VII => (f1_e, f2_c),
            Region::VIII => (f1_c, f2_g),
        }
    }

    /// Whether `region`'s formula pair solves the equations at `(q1, q2)`.
    pub fn is_consistent(&self, region: Region, q1: f64, q2: f64) -> bool {
        let (f1, f2) = self.candidate(region, q1, q2);
        self.check(f1, f2, q1, q2)
    }

    fn check(&self, f1: f64, f2: f64, q1: f64, q2: f64) -> bool {
        if !(f1.is_finite() && f2.is_finite()) {
            return false;
        }
        let scale = 1.0 + self.deadlines[0].abs() + f1.abs().max(f2.abs());
        if !self.in_domain(f1, f2, 1e-9 * scale) {
            return false;
        }
        let (c1, c2) = self.queue_totals(f1, f2);
        let qtol = 1e-9 * (1.0 + q1 + q2 + scale);
        (c1 - q1).abs() <= qtol && (c2 - q2).abs() <= qtol
    }

    /// First region (in order I..VIII) whose formula pair is self-consistent.
    pub fn solve(&self, q1: f64, q2: f64) -> Result<ClosedForm, ClosedFormError> {
        if !(q1.is_finite() && q2.is_finite() && q1 >= 0.0 && q2 >= 0.0) {
            return Err(ClosedFormError::NegativeQueue(q1, q2));
        }
        Region::ALL
            .into_iter()
            .find_map(|region| {
                let (f1, f2) = self.candidate(region, q1, q2);
                self.check(f1, f2, q1, q2)
                    .then_some(ClosedForm { region, f1, f2 })
            })
            .ok_or(ClosedFormError::NoConsistentRegion(q1, q2))
    }
}

/// Convenience wrapper over [`TwoStationParams::solve`].
pub fn two_station_closed_form(
    rates: [f64; 4],
    deadlines: [f64; 4],
    q1: f64,
    q2: f64,
) -> Result<ClosedForm, ClosedFormError> {
    TwoStationParams::new(rates, deadlines)?.solve(q1, q2)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THIRD: [f64; 4] = [1.0 / 3.0; 4];

    fn assert_solution(deadlines: [f64; 4], q: (f64, f64), region: Region, f: (f64, f64)) {
        let got = two_station_closed_form(THIRD, deadlines, q.0, q.1).unwrap();
        assert_eq!(got.region, region, "{got:?}");
        assert!((got.f1 - f.0).abs() < 1e-9 && (got.f2 - f.1).abs() < 1e-9, "{got:?}");
    }

    #[test]
    fn published_cases() {
        assert_solution([400.0, 300.0, 200.0, 100.0], (50.0, 58.0), Region::III, (250.0, 188.0));
        assert_solution([200.0, 200.0, 110.0, 100.0], (60.0, 30.0), Region::V, (80.0, 110.0));
        assert_solution([500.0, 100.0, 100.0, 100.0], (50.0, 50.0), Region::I, (350.0, 200.0));
    }

    #[test]
    fn published_cases_are_unique() {
        let cases = [
            ([400.0, 300.0, 200.0, 100.0], (50.0, 58.0)),
            ([200.0, 200.0, 110.0, 100.0], (60.0, 30.0)),
            ([500.0, 100.0, 100.0, 100.0], (50.0, 50.0)),
        ];
        for (d, (q1, q2)) in cases {
            let p = TwoStationParams::new(THIRD, d).unwrap();
            let n = Region::ALL
                .iter()
                .filter(|&&r| p.is_consistent(r, q1, q2))
                .count();
            assert_eq!(n, 1);
        }
    }

    #[test]
    fn empty_queues_sit_at_the_top() {
        let got = two_station_closed_form(THIRD, [400.0, 300.0, 200.0, 100.0], 0.0, 0.0).unwrap();
        assert_eq!(got.region, Region::I);
        assert!((got.f1 - 400.0).abs() < 1e-12 && (got.f2 - 400.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            TwoStationParams::new(THIRD, [1.0, 2.0, 0.0, 0.0]),
            Err(ClosedFormError::UnorderedDeadlines(_))
        ));
        assert!(matches!(
            two_station_closed_form(THIRD, [4.0, 3.0, 2.0, 1.0], -1.0, 0.0),
            Err(ClosedFormError::NegativeQueue(..))
        ));
    }
}
