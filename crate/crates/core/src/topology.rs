//! Network description and the set-valued combinatorics derived from routes.
//!
//! Stations and classes are identified by 1-based indices. A class visits the
//! stations on its route in order, never twice, and the union of all routes
//! must connect every station (edges taken undirected).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leadtime::{LeadTimeDist, LeadTimeError};

/// 1-based station index.
pub type Station = usize;
/// 1-based customer class index.
pub type Class = usize;

/// Largest network for which [`Topology::admissible_permutations`] will enumerate.
pub const MAX_ENUMERATED_STATIONS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("network has no stations")]
    NoStations,
    #[error("network has no customer classes")]
    NoClasses,
    #[error("class {class} has an empty route")]
    EmptyRoute { class: Class },
    #[error("class {class} route names station {station}, outside 1..={stations}")]
    StationOutOfRange {
        class: Class,
        station: Station,
        stations: usize,
    },
    #[error("class {class} visits station {station} more than once")]
    RouteRepeatsStation { class: Class, station: Station },
    #[error("no class visits station {0}")]
    EmptyStation(Station),
    #[error("stations are not connected through the class routes")]
    DisconnectedNetwork,
    #[error("class {class}: {what} must be finite and positive, got {value}")]
    InvalidRate {
        class: Class,
        what: &'static str,
        value: f64,
    },
    #[error("class {class}: route has {route} stations but {rates} service rates")]
    RateCountMismatch {
        class: Class,
        route: usize,
        rates: usize,
    },
    #[error("class {class} does not visit station {station}")]
    ClassDoesNotVisitStation { class: Class, station: Station },
    #[error("class {class}: {source}")]
    LeadTime {
        class: Class,
        #[source]
        source: LeadTimeError,
    },
    #[error("refusing to enumerate permutations of {0} stations (limit {MAX_ENUMERATED_STATIONS})")]
    TooManyStations(usize),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Renewal law shape used by the simulator. The mean is fixed by the class
/// rates; the shape only controls the spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenewalLaw {
    #[default]
    Exponential,
    Deterministic,
    /// Uniform on `(0, 2 * mean)`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub route: Vec<Station>,
    pub arrival_rate: f64,
    /// One rate per route entry, aligned with `route`.
    pub service_rates: Vec<f64>,
    pub lead_time: LeadTimeDist,
    #[serde(default)]
    pub interarrival: RenewalLaw,
    #[serde(default)]
    pub service: RenewalLaw,
}

impl ClassSpec {
    /// A class with exponential interarrival and service laws.
    pub fn new(
        route: Vec<Station>,
        arrival_rate: f64,
        service_rates: Vec<f64>,
        lead_time: LeadTimeDist,
    ) -> Self {
        Self {
            route,
            arrival_rate,
            service_rates,
            lead_time,
            interarrival: RenewalLaw::Exponential,
            service: RenewalLaw::Exponential,
        }
    }

    /// Service rate at `station`, if the class visits it.
    pub fn service_rate(&self, station: Station) -> Option<f64> {
        self.route
            .iter()
            .position(|&j| j == station)
            .map(|pos| self.service_rates[pos])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub stations: usize,
    pub classes: Vec<ClassSpec>,
}

impl NetworkSpec {
    pub fn class(&self, k: Class) -> &ClassSpec {
        &self.classes[k - 1]
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Class sets reaching each station through a prefix, and the stations so reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachSets {
    /// `classes[j - 1]` lists classes visiting `j` whose upstream stations all lie in the prefix.
    pub classes: Vec<Vec<Class>>,
    /// Stations outside the prefix reached by at least one such class, ascending.
    pub stations: Vec<Station>,
}

impl ReachSets {
    pub fn classes_at(&self, j: Station) -> &[Class] {
        &self.classes[j - 1]
    }
}

/// Validated network together with its derived sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    spec: NetworkSpec,
    visitors: Vec<Vec<Class>>,
    entering: Vec<Vec<Class>>,
    entry_stations: Vec<Station>,
    // route_pos[k - 1][j - 1] = position of j on P(k)
    route_pos: Vec<Vec<Option<usize>>>,
}

impl Topology {
    /// Validates `spec` and derives C(j), K0(j), S(k|j) and the entry-station set.
    pub fn build(spec: NetworkSpec) -> Result<Self, TopologyError> {
        let num_stations = spec.stations;
        if num_stations == 0 {
            return Err(TopologyError::NoStations);
        }
        if spec.classes.is_empty() {
            return Err(TopologyError::NoClasses);
        }

        let mut visitors = vec![Vec::new(); num_stations];
        let mut entering = vec![Vec::new(); num_stations];
        let mut route_pos = Vec::with_capacity(spec.classes.len());

        for (idx, class) in spec.classes.iter().enumerate() {
            let k = idx + 1;
            if class.route.is_empty() {
                return Err(TopologyError::EmptyRoute { class: k });
            }
            if class.route.len() != class.service_rates.len() {
                return Err(TopologyError::RateCountMismatch {
                    class: k,
                    route: class.route.len(),
                    rates: class.service_rates.len(),
                });
            }
            check_rate(k, "arrival rate", class.arrival_rate)?;
            for &mu in &class.service_rates {
                check_rate(k, "service rate", mu)?;
            }
            class
                .lead_time
                .validate()
                .map_err(|source| TopologyError::LeadTime { class: k, source })?;

            let mut pos = vec![None; num_stations];
            for (p, &j) in class.route.iter().enumerate() {
                if j == 0 || j > num_stations {
                    return Err(TopologyError::StationOutOfRange {
                        class: k,
                        station: j,
                        stations: num_stations,
                    });
                }
                if pos[j - 1].is_some() {
                    return Err(TopologyError::RouteRepeatsStation {
                        class: k,
                        station: j,
                    });
                }
                pos[j - 1] = Some(p);
                visitors[j - 1].push(k);
            }
            entering[class.route[0] - 1].push(k);
            route_pos.push(pos);
        }

        if let Some(j) = visitors.iter().position(Vec::is_empty) {
            return Err(TopologyError::EmptyStation(j + 1));
        }
        if !is_connected(num_stations, &spec.classes) {
            return Err(TopologyError::DisconnectedNetwork);
        }

        let entry_stations = (1..=num_stations)
            .filter(|&j| !entering[j - 1].is_empty())
            .collect();

        Ok(Self {
            spec,
            visitors,
            entering,
            entry_stations,
            route_pos,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn num_stations(&self) -> usize {
        self.spec.stations
    }

    pub fn num_classes(&self) -> usize {
        self.spec.classes.len()
    }

    pub fn route(&self, k: Class) -> &[Station] {
        &self.spec.classes[k - 1].route
    }

    /// C(j): classes visiting station `j`, ascending.
    pub fn visitors(&self, j: Station) -> &[Class] {
        &self.visitors[j - 1]
    }

    /// K0(j): classes whose route starts at `j`.
    pub fn entering(&self, j: Station) -> &[Class] {
        &self.entering[j - 1]
    }

    /// J0: stations with external arrivals.
    pub fn entry_stations(&self) -> &[Station] {
        &self.entry_stations
    }

    /// Position of `j` on the route of class `k`.
    pub fn route_position(&self, k: Class, j: Station) -> Option<usize> {
        self.route_pos[k - 1][j - 1]
    }

    pub fn visits(&self, k: Class, j: Station) -> bool {
        self.route_position(k, j).is_some()
    }

    /// S(k|j): stations class `k` visits before `j`, in route order.
    pub fn upstream_set(&self, k: Class, j: Station) -> Result<&[Station], TopologyError> {
        match self.route_position(k, j) {
            Some(p) => Ok(&self.route(k)[..p]),
            None => Err(TopologyError::ClassDoesNotVisitStation {
                class: k,
                station: j,
            }),
        }
    }

    /// Unchecked variant for callers iterating over `visitors(j)`.
    pub(crate) fn upstream(&self, k: Class, j: Station) -> &[Station] {
        let p = self.route_pos[k - 1][j - 1].expect("class visits station");
        &self.route(k)[..p]
    }

    /// K_m(j) and J_m for the given ordered prefix of stations.
    pub fn reach_sets(&self, prefix: &[Station]) -> ReachSets {
        let mut in_prefix = vec![false; self.num_stations()];
        for &j in prefix {
            in_prefix[j - 1] = true;
        }
        let classes: Vec<Vec<Class>> = (1..=self.num_stations())
            .map(|j| {
                self.visitors(j)
                    .iter()
                    .copied()
                    .filter(|&k| self.upstream(k, j).iter().all(|&i| in_prefix[i - 1]))
                    .collect()
            })
            .collect();
        let stations = (1..=self.num_stations())
            .filter(|&j| !in_prefix[j - 1] && !classes[j - 1].is_empty())
            .collect();
        ReachSets { classes, stations }
    }

    /// Every ordering of the stations in which each station is reachable
    /// through its predecessors. Lexicographic order.
    pub fn admissible_permutations(&self) -> Result<Vec<Vec<Station>>, TopologyError> {
        let n = self.num_stations();
        if n > MAX_ENUMERATED_STATIONS {
            return Err(TopologyError::TooManyStations(n));
        }
        let mut out = Vec::new();
        let mut prefix = Vec::with_capacity(n);
        self.extend_permutations(&mut prefix, &mut out);
        Ok(out)
    }

    fn extend_permutations(&self, prefix: &mut Vec<Station>, out: &mut Vec<Vec<Station>>) {
        if prefix.len() == self.num_stations() {
            out.push(prefix.clone());
            return;
        }
        for j in self.reach_sets(prefix).stations {
            prefix.push(j);
            self.extend_permutations(prefix, out);
            prefix.pop();
        }
    }

    /// Checks membership of `y` in the frontier domain, returning a witness
    /// permutation when one exists. Comparisons allow a relative slack of `1e-9`.
    pub fn in_domain(&self, dists: &[LeadTimeDist], y: &[f64]) -> Option<Vec<Station>> {
        let supports: Vec<f64> = dists.iter().map(LeadTimeDist::upper_support).collect();
        self.in_domain_with_supports(&supports, y)
    }

    pub(crate) fn in_domain_with_supports(&self, supports: &[f64], y: &[f64]) -> Option<Vec<Station>> {
        if y.len() != self.num_stations() || supports.len() != self.num_classes() {
            return None;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut prefix = Vec::with_capacity(y.len());
        if self.domain_search(supports, y, &mut prefix) {
            Some(prefix)
        } else {
            None
        }
    }

    fn domain_search(&self, supports: &[f64], y: &[f64], prefix: &mut Vec<Station>) -> bool {
        if prefix.len() == self.num_stations() {
            return true;
        }
        let reach = self.reach_sets(prefix);
        for &j in &reach.stations {
            let yj = y[j - 1];
            if let Some(&last) = prefix.last() {
                if !leq_tol(yj, y[last - 1]) {
                    continue;
                }
            }
            let cap = reach
                .classes_at(j)
                .iter()
                .map(|&k| supports[k - 1])
                .fold(f64::NEG_INFINITY, f64::max);
            if !leq_tol(yj, cap) {
                continue;
            }
            prefix.push(j);
            if self.domain_search(supports, y, prefix) {
                return true;
            }
            prefix.pop();
        }
        false
    }
}

fn leq_tol(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn check_rate(class: Class, what: &'static str, value: f64) -> Result<(), TopologyError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(TopologyError::InvalidRate { class, what, value })
    }
}

fn is_connected(num_stations: usize, classes: &[ClassSpec]) -> bool {
    // union-find over consecutive route pairs
    let mut parent: Vec<usize> = (0..num_stations).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for class in classes {
        for pair in class.route.windows(2) {
            let a = find(&mut parent, pair[0] - 1);
            let b = find(&mut parent, pair[1] - 1);
            parent[a] = b;
        }
    }
    let root = find(&mut parent, 0);
    (1..num_stations).all(|j| find(&mut parent, j) == root)
}
