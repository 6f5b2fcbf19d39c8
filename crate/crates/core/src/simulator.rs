//! Event-driven simulation of an acyclic EDF network.
//!
//! Each class arrives by its own renewal process and draws an initial lead
//! time at arrival; the absolute deadline `arrival + lead` is fixed for the
//! customer's whole stay. Every station serves the present customer with the
//! earliest deadline, ties broken by system-arrival index and then class.
//! Service is non-preemptive unless [`SimOptions::preemptive`] is set, in which
//! case an arriving customer with a smaller key preempts and the interrupted
//! customer later resumes where it stopped.
//!
//! Events at equal times are ordered departures first, then arrivals, then by
//! station index, then by scheduling order.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leadtime::TailTable;
use crate::topology::{Class, NetworkSpec, RenewalLaw, Station, Topology, TopologyError};

pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("event cap of {0} events exceeded")]
    EventCapExceeded(u64),
    #[error("invalid sampling condition: {0}")]
    InvalidCondition(String),
    #[error("invalid scripted arrival: {0}")]
    InvalidScript(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub preemptive: bool,
    pub seed: u64,
    /// Upper bound on events processed by a single run call.
    pub event_cap: u64,
    /// Generate renewal arrivals. Off for fully scripted runs.
    pub external_arrivals: bool,
    /// Keep a log of service starts and departures.
    pub trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            preemptive: false,
            seed: 0,
            event_cap: DEFAULT_EVENT_CAP,
            external_arrivals: true,
            trace: false,
        }
    }
}

impl SimOptions {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Total order on `f64` for use in keys.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TotalF64(f64);

impl Eq for TotalF64 {}

impl PartialOrd for TotalF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TotalF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// EDF priority: absolute deadline, then system-arrival index, then class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EdfKey {
    deadline: TotalF64,
    pub id: u64,
    pub class: Class,
}

impl EdfKey {
    pub fn deadline(&self) -> f64 {
        self.deadline.0
    }
}

#[derive(Debug, Clone)]
struct Customer {
    id: u64,
    class: Class,
    deadline: f64,
    pos: usize,
    // service requirement at each route station, drawn at system arrival
    service: Vec<f64>,
    remaining: f64,
}

impl Customer {
    fn key(&self) -> EdfKey {
        EdfKey {
            deadline: TotalF64(self.deadline),
            id: self.id,
            class: self.class,
        }
    }
}

#[derive(Debug, Clone)]
struct Serving {
    cust: Customer,
    started: f64,
    remaining_at_start: f64,
}

impl Serving {
    fn remaining(&self, now: f64) -> f64 {
        (self.remaining_at_start - (now - self.started)).max(0.0)
    }
}

#[derive(Debug, Clone, Default)]
struct Areas {
    queue: f64,
    behind: f64,
    work: f64,
    work_behind: f64,
}

#[derive(Debug, Clone)]
struct StationState {
    pending: BTreeMap<EdfKey, Customer>,
    serving: Option<Serving>,
    version: u64,
    busy_time: f64,
    idle_time: f64,
    arrived_work: f64,
    arrivals: Vec<u64>,
    departures: Vec<u64>,
    // largest deadline ever admitted to service, per class; phantom y_k* initially
    max_deadline: Vec<f64>,
    frontier_deadline: f64,
    areas: Areas,
}

impl StationState {
    fn present(&self) -> usize {
        self.pending.len() + usize::from(self.serving.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Departure { version: u64 },
    Arrival { class: Class },
    Scripted { index: usize },
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    station: Station,
    seq: u64,
    kind: EventKind,
}

impl Scheduled {
    fn rank(&self) -> u8 {
        match self.kind {
            EventKind::Departure { .. } => 0,
            _ => 1,
        }
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.rank().cmp(&other.rank()))
            .then(self.station.cmp(&other.station))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone)]
struct ScriptedArrival {
    class: Class,
    lead_time: f64,
    service: Vec<f64>,
}

struct ClassStreams {
    interarrival: ChaCha8Rng,
    service: ChaCha8Rng,
    lead: ChaCha8Rng,
}

/// One entry of the optional event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TraceEntry {
    ServiceStart {
        time: f64,
        station: Station,
        id: u64,
        class: Class,
    },
    Departure {
        time: f64,
        station: Station,
        id: u64,
        class: Class,
    },
}

/// Lead time of one present customer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadSample {
    pub class: Class,
    pub lead: f64,
}

/// Lead times of every present customer, per station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    pub time: f64,
    /// `stations[j - 1]`: in-service customer first, then pending in EDF order.
    pub stations: Vec<Vec<LeadSample>>,
}

impl ProfileSnapshot {
    pub fn leads(&self, j: Station) -> impl Iterator<Item = f64> + '_ {
        self.stations[j - 1].iter().map(|s| s.lead)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BehindStats {
    pub count_behind: usize,
    pub work_behind: f64,
    /// `count_behind / present`, 0 for an empty station.
    pub fraction_of_queue: f64,
}

/// Time averages since time zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BehindAverages {
    pub mean_queue: f64,
    pub mean_behind: f64,
    pub mean_work: f64,
    pub mean_work_behind: f64,
    /// Ratio of the time-integrated behind count to the time-integrated queue length.
    pub fraction_behind: f64,
}

/// Queue-length condition under which local time accumulates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "targets", rename_all = "snake_case")]
pub enum Condition {
    /// `targets[j - 1][k - 1]`: exact count of class `k` at station `j`.
    ExactClassCounts(Vec<Vec<u64>>),
    /// Exact total count at every station.
    TotalCounts(Vec<u64>),
    /// Inclusive `(lo, hi)` band on the total count at every station.
    TotalBand(Vec<(u64, u64)>),
}

impl Condition {
    /// Station totals implied by the condition; band midpoints for bands.
    pub fn station_totals(&self) -> Vec<f64> {
        match self {
            Self::ExactClassCounts(t) => t.iter().map(|row| row.iter().sum::<u64>() as f64).collect(),
            Self::TotalCounts(t) => t.iter().map(|&q| q as f64).collect(),
            Self::TotalBand(b) => b.iter().map(|&(lo, hi)| 0.5 * (lo + hi) as f64).collect(),
        }
    }

    fn validate(&self, stations: usize, classes: usize) -> Result<(), SimError> {
        let len = match self {
            Self::ExactClassCounts(t) => {
                if let Some(row) = t.iter().find(|r| r.len() != classes) {
                    return Err(SimError::InvalidCondition(format!(
                        "expected {classes} class counts per station, got {}",
                        row.len()
                    )));
                }
                t.len()
            }
            Self::TotalCounts(t) => t.len(),
            Self::TotalBand(b) => {
                if b.iter().any(|&(lo, hi)| lo > hi) {
                    return Err(SimError::InvalidCondition("band with lo > hi".into()));
                }
                b.len()
            }
        };
        if len != stations {
            return Err(SimError::InvalidCondition(format!(
                "expected {stations} stations, got {len}"
            )));
        }
        Ok(())
    }
}

/// Result of [`Simulation::conditional_sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub snapshots: Vec<ProfileSnapshot>,
    /// False when the horizon ran out before `count` snapshots were taken.
    pub complete: bool,
}

struct Sampler {
    condition: Condition,
    threshold: f64,
    local: f64,
    wanted: usize,
    snapshots: Vec<ProfileSnapshot>,
}

pub struct Simulation {
    topo: Topology,
    opts: SimOptions,
    now: f64,
    stations: Vec<StationState>,
    events: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    next_id: u64,
    streams: Vec<ClassStreams>,
    lead_tails: Vec<TailTable>,
    scripted: Vec<Option<ScriptedArrival>>,
    trace: Vec<TraceEntry>,
    sampler: Option<Sampler>,
    processed: u64,
}

fn draw(law: RenewalLaw, rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        RenewalLaw::Exponential => Exp::new(rate).expect("positive rate").sample(rng),
        RenewalLaw::Deterministic => 1.0 / rate,
        RenewalLaw::Uniform => {
            let u: f64 = rand::Rng::random(rng);
            (1.0 - u) * 2.0 / rate
        }
    }
}

impl Simulation {
    pub fn new(spec: NetworkSpec, opts: SimOptions) -> Result<Self, SimError> {
        let topo = Topology::build(spec)?;
        Ok(Self::from_topology(topo, opts))
    }

    /// Empty system at time zero.
    pub fn from_topology(topo: Topology, opts: SimOptions) -> Self {
        let num_classes = topo.num_classes();
        let lead_tails: Vec<TailTable> = topo
            .spec()
            .classes
            .iter()
            .map(|c| c.lead_time.tail())
            .collect();

        let stations = (1..=topo.num_stations())
            .map(|j| {
                let mut max_deadline = vec![f64::NEG_INFINITY; num_classes];
                for &k in topo.visitors(j) {
                    max_deadline[k - 1] = lead_tails[k - 1].upper_support();
                }
                let frontier_deadline = max_deadline.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                StationState {
                    pending: BTreeMap::new(),
                    serving: None,
                    version: 0,
                    busy_time: 0.0,
                    idle_time: 0.0,
                    arrived_work: 0.0,
                    arrivals: vec![0; num_classes],
                    departures: vec![0; num_classes],
                    max_deadline,
                    frontier_deadline,
                    areas: Areas::default(),
                }
            })
            .collect();

        let streams = (0..num_classes as u64)
            .map(|k| {
                let stream = |purpose: u64| {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                    rng.set_stream(3 * k + purpose);
                    rng
                };
                ClassStreams {
                    interarrival: stream(0),
                    service: stream(1),
                    lead: stream(2),
                }
            })
            .collect();

        let mut sim = Self {
            topo,
            opts,
            now: 0.0,
            stations,
            events: BinaryHeap::new(),
            seq: 0,
            next_id: 0,
            streams,
            lead_tails,
            scripted: Vec::new(),
            trace: Vec::new(),
            sampler: None,
            processed: 0,
        };
        if opts.external_arrivals {
            for k in 1..=num_classes {
                let c = sim.topo.spec().class(k);
                let gap = draw(c.interarrival, c.arrival_rate, &mut sim.streams[k - 1].interarrival);
                sim.schedule(gap, sim.topo.route(k)[0], EventKind::Arrival { class: k });
            }
        }
        sim
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn options(&self) -> &SimOptions {
        &self.opts
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn events_processed(&self) -> u64 {
        self.processed
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    fn schedule(&mut self, time: f64, station: Station, kind: EventKind) {
        self.seq += 1;
        self.events.push(Reverse(Scheduled {
            time,
            station,
            seq: self.seq,
            kind,
        }));
    }

    /// Queues a hand-specified arrival of class `k` at `time`, with the given
    /// initial lead time and one service requirement per route station.
    pub fn schedule_arrival(
        &mut self,
        time: f64,
        class: Class,
        lead_time: f64,
        service: Vec<f64>,
    ) -> Result<(), SimError> {
        if class == 0 || class > self.topo.num_classes() {
            return Err(SimError::InvalidScript(format!("unknown class {class}")));
        }
        if !(time.is_finite() && time >= self.now) {
            return Err(SimError::InvalidScript(format!("arrival time {time} is in the past")));
        }
        if service.len() != self.topo.route(class).len() || service.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(SimError::InvalidScript(
                "need one positive service time per route station".into(),
            ));
        }
        if !lead_time.is_finite() {
            return Err(SimError::InvalidScript("lead time must be finite".into()));
        }
        let index = self.scripted.len();
        self.scripted.push(Some(ScriptedArrival {
            class,
            lead_time,
            service,
        }));
        self.schedule(time, self.topo.route(class)[0], EventKind::Scripted { index });
        Ok(())
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.events.peek().map(|Reverse(e)| e.time)
    }

    /// Processes the next event. Returns `false` when none is pending.
    pub fn step(&mut self) -> bool {
        let Some(Reverse(ev)) = self.events.pop() else {
            return false;
        };
        self.advance(ev.time);
        self.processed += 1;
        match ev.kind {
            EventKind::Arrival { class } => self.external_arrival(class),
            EventKind::Scripted { index } => {
                let s = self.scripted[index].take().expect("scripted arrival fires once");
                let id = self.take_id();
                let deadline = self.now + s.lead_time;
                let cust = Customer {
                    id,
                    class: s.class,
                    deadline,
                    pos: 0,
                    remaining: s.service[0],
                    service: s.service,
                };
                self.admit(ev.station, cust);
            }
            EventKind::Departure { version } => {
                if self.stations[ev.station - 1].version == version {
                    self.complete(ev.station);
                }
            }
        }
        true
    }

    /// Processes every event with time `<= t`, then moves the clock to `t`.
    pub fn run_until(&mut self, t: f64) -> Result<(), SimError> {
        let mut budget = self.opts.event_cap;
        while let Some(next) = self.next_event_time() {
            if next > t {
                break;
            }
            if budget == 0 {
                return Err(SimError::EventCapExceeded(self.opts.event_cap));
            }
            budget -= 1;
            self.step();
        }
        if t > self.now {
            self.advance(t);
        }
        Ok(())
    }

    /// Steps until `done` holds, there are no events left, or the event cap is hit.
    pub fn run_while(&mut self, mut done: impl FnMut(&Self) -> bool) -> Result<(), SimError> {
        let mut budget = self.opts.event_cap;
        while !done(self) {
            if budget == 0 {
                return Err(SimError::EventCapExceeded(self.opts.event_cap));
            }
            budget -= 1;
            if !self.step() {
                break;
            }
        }
        Ok(())
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn external_arrival(&mut self, k: Class) {
        let spec = self.topo.spec().class(k);
        let (rate, law, service_law) = (spec.arrival_rate, spec.interarrival, spec.service);
        let route = spec.route.clone();
        let rates = spec.service_rates.clone();

        let streams = &mut self.streams[k - 1];
        let gap = draw(law, rate, &mut streams.interarrival);
        let service: Vec<f64> = rates
            .iter()
            .map(|&mu| draw(service_law, mu, &mut streams.service))
            .collect();
        let u: f64 = rand::Rng::random(&mut streams.lead);
        let lead = self.lead_tails[k - 1].quantile(u);

        let next = self.now + gap;
        self.schedule(next, route[0], EventKind::Arrival { class: k });

        let id = self.take_id();
        let cust = Customer {
            id,
            class: k,
            deadline: self.now + lead,
            pos: 0,
            remaining: service[0],
            service,
        };
        self.admit(route[0], cust);
    }

    fn admit(&mut self, j: Station, cust: Customer) {
        let now = self.now;
        let preemptive = self.opts.preemptive;
        let st = &mut self.stations[j - 1];
        st.arrivals[cust.class - 1] += 1;
        st.arrived_work += cust.remaining;
        let key = cust.key();
        match &st.serving {
            None => self.start(j, cust),
            Some(s) if preemptive && key < s.cust.key() => {
                let mut s = st.serving.take().unwrap();
                s.cust.remaining = s.remaining(now);
                st.pending.insert(s.cust.key(), s.cust);
                self.start(j, cust);
            }
            Some(_) => {
                st.pending.insert(key, cust);
            }
        }
    }

    fn start(&mut self, j: Station, cust: Customer) {
        let now = self.now;
        let st = &mut self.stations[j - 1];
        let slot = &mut st.max_deadline[cust.class - 1];
        *slot = slot.max(cust.deadline);
        st.frontier_deadline = st.frontier_deadline.max(cust.deadline);
        st.version += 1;
        let version = st.version;
        let done_at = now + cust.remaining;
        if self.opts.trace {
            self.trace.push(TraceEntry::ServiceStart {
                time: now,
                station: j,
                id: cust.id,
                class: cust.class,
            });
        }
        st.serving = Some(Serving {
            remaining_at_start: cust.remaining,
            started: now,
            cust,
        });
        self.schedule(done_at, j, EventKind::Departure { version });
    }

    fn complete(&mut self, j: Station) {
        let st = &mut self.stations[j - 1];
        let mut cust = st.serving.take().expect("departure from a busy station").cust;
        st.departures[cust.class - 1] += 1;
        if self.opts.trace {
            self.trace.push(TraceEntry::Departure {
                time: self.now,
                station: j,
                id: cust.id,
                class: cust.class,
            });
        }
        if let Some((_, next)) = st.pending.pop_first() {
            self.start(j, next);
        }
        cust.pos += 1;
        let route = self.topo.route(cust.class);
        if cust.pos < route.len() {
            let next_station = route[cust.pos];
            cust.remaining = cust.service[cust.pos];
            self.admit(next_station, cust);
        }
    }

    /// Moves the clock forward, integrating time averages and running the
    /// conditional sampler over the elapsed interval. State is constant on it.
    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        if dt <= 0.0 {
            return;
        }
        for st in &mut self.stations {
            let m = st.frontier_deadline;
            let (mut n_behind, mut pending_work, mut pending_behind_work) = (0usize, 0.0, 0.0);
            for (key, c) in &st.pending {
                pending_work += c.remaining;
                if key.deadline() < m {
                    n_behind += 1;
                    pending_behind_work += c.remaining;
                }
            }
            let (serving_area, serving_behind) = match &st.serving {
                Some(s) => {
                    st.busy_time += dt;
                    let r0 = s.remaining(self.now);
                    let area = r0 * dt - 0.5 * dt * dt;
                    if s.cust.deadline < m {
                        n_behind += 1;
                        (area, area)
                    } else {
                        (area, 0.0)
                    }
                }
                None => {
                    st.idle_time += dt;
                    (0.0, 0.0)
                }
            };
            st.areas.queue += st.present() as f64 * dt;
            st.areas.behind += n_behind as f64 * dt;
            st.areas.work += pending_work * dt + serving_area;
            st.areas.work_behind += pending_behind_work * dt + serving_behind;
        }

        if let Some(mut sampler) = self.sampler.take() {
            if self.condition_holds(&sampler.condition) {
                let mut from = self.now;
                while sampler.snapshots.len() < sampler.wanted {
                    let need = sampler.threshold - sampler.local;
                    if from + need > t {
                        break;
                    }
                    from += need;
                    sampler.local = 0.0;
                    sampler.snapshots.push(self.snapshot_at(from));
                }
                sampler.local += t - from;
            }
            self.sampler = Some(sampler);
        }
        self.now = t;
    }

    fn condition_holds(&self, cond: &Condition) -> bool {
        match cond {
            Condition::ExactClassCounts(targets) => targets.iter().enumerate().all(|(j, row)| {
                let st = &self.stations[j];
                row.iter()
                    .enumerate()
                    .all(|(k, &q)| st.arrivals[k] - st.departures[k] == q)
            }),
            Condition::TotalCounts(targets) => targets
                .iter()
                .zip(&self.stations)
                .all(|(&q, st)| st.present() as u64 == q),
            Condition::TotalBand(bands) => bands.iter().zip(&self.stations).all(|(&(lo, hi), st)| {
                let n = st.present() as u64;
                lo <= n && n <= hi
            }),
        }
    }

    fn snapshot_at(&self, time: f64) -> ProfileSnapshot {
        let stations = self
            .stations
            .iter()
            .map(|st| {
                st.serving
                    .iter()
                    .map(|s| &s.cust)
                    .chain(st.pending.values())
                    .map(|c| LeadSample {
                        class: c.class,
                        lead: c.deadline - time,
                    })
                    .collect()
            })
            .collect();
        ProfileSnapshot { time, stations }
    }

    /// Lead times of every present customer at the current clock.
    pub fn snapshot_profiles(&self) -> ProfileSnapshot {
        self.snapshot_at(self.now)
    }

    /// Accumulates local time while `condition` holds and records a snapshot
    /// each time it reaches `threshold`, resetting the local clock. Stops after
    /// `count` snapshots or when the clock would pass `horizon_cap`.
    pub fn conditional_sample(
        &mut self,
        condition: Condition,
        threshold: f64,
        count: usize,
        horizon_cap: f64,
    ) -> Result<SampleOutcome, SimError> {
        condition.validate(self.topo.num_stations(), self.topo.num_classes())?;
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(SimError::InvalidCondition(format!(
                "local-time threshold must be positive, got {threshold}"
            )));
        }
        if count == 0 {
            return Ok(SampleOutcome {
                snapshots: Vec::new(),
                complete: true,
            });
        }
        self.sampler = Some(Sampler {
            condition,
            threshold,
            local: 0.0,
            wanted: count,
            snapshots: Vec::with_capacity(count),
        });
        let mut budget = self.opts.event_cap;
        let result = loop {
            if self.sampler.as_ref().unwrap().snapshots.len() >= count {
                break Ok(());
            }
            match self.next_event_time() {
                Some(next) if next <= horizon_cap => {
                    if budget == 0 {
                        break Err(SimError::EventCapExceeded(self.opts.event_cap));
                    }
                    budget -= 1;
                    self.step();
                }
                _ => {
                    if horizon_cap > self.now {
                        self.advance(horizon_cap);
                    }
                    break Ok(());
                }
            }
        };
        let sampler = self.sampler.take().unwrap();
        result?;
        let complete = sampler.snapshots.len() >= count;
        Ok(SampleOutcome {
            snapshots: sampler.snapshots,
            complete,
        })
    }

    /// `F_j(t)`: the largest frontier over classes visiting `j`.
    pub fn frontier(&self, j: Station) -> f64 {
        self.stations[j - 1].frontier_deadline - self.now
    }

    /// `F_kj(t)`, or `None` if class `k` does not visit `j`.
    pub fn class_frontier(&self, k: Class, j: Station) -> Option<f64> {
        self.topo
            .visits(k, j)
            .then(|| self.stations[j - 1].max_deadline[k - 1] - self.now)
    }

    /// Customers at `j` whose lead time is strictly below the station frontier.
    pub fn behind_frontier_stats(&self, j: Station) -> BehindStats {
        let st = &self.stations[j - 1];
        let m = st.frontier_deadline;
        let mut stats = BehindStats::default();
        for c in st.pending.values().filter(|c| c.deadline < m) {
            stats.count_behind += 1;
            stats.work_behind += c.remaining;
        }
        if let Some(s) = st.serving.as_ref().filter(|s| s.cust.deadline < m) {
            stats.count_behind += 1;
            stats.work_behind += s.remaining(self.now);
        }
        let present = st.present();
        if present > 0 {
            stats.fraction_of_queue = stats.count_behind as f64 / present as f64;
        }
        stats
    }

    pub fn behind_averages(&self, j: Station) -> BehindAverages {
        let a = &self.stations[j - 1].areas;
        if self.now <= 0.0 {
            return BehindAverages::default();
        }
        BehindAverages {
            mean_queue: a.queue / self.now,
            mean_behind: a.behind / self.now,
            mean_work: a.work / self.now,
            mean_work_behind: a.work_behind / self.now,
            fraction_behind: if a.queue > 0.0 { a.behind / a.queue } else { 0.0 },
        }
    }

    /// Number of customers at station `j`.
    pub fn queue_length(&self, j: Station) -> usize {
        self.stations[j - 1].present()
    }

    /// Number of class `k` customers at station `j`.
    pub fn class_queue_length(&self, k: Class, j: Station) -> u64 {
        let st = &self.stations[j - 1];
        st.arrivals[k - 1] - st.departures[k - 1]
    }

    pub fn arrivals(&self, k: Class, j: Station) -> u64 {
        self.stations[j - 1].arrivals[k - 1]
    }

    pub fn departures(&self, k: Class, j: Station) -> u64 {
        self.stations[j - 1].departures[k - 1]
    }

    /// Remaining service of everyone at `j`.
    pub fn workload(&self, j: Station) -> f64 {
        let st = &self.stations[j - 1];
        st.pending.values().map(|c| c.remaining).sum::<f64>()
            + st.serving.as_ref().map_or(0.0, |s| s.remaining(self.now))
    }

    /// Work brought to `j` so far minus elapsed time.
    pub fn netput(&self, j: Station) -> f64 {
        self.stations[j - 1].arrived_work - self.now
    }

    /// Cumulative time station `j` has been empty.
    pub fn idleness(&self, j: Station) -> f64 {
        self.stations[j - 1].idle_time
    }

    pub fn busy_time(&self, j: Station) -> f64 {
        self.stations[j - 1].busy_time
    }

    pub fn utilization(&self, j: Station) -> f64 {
        if self.now > 0.0 {
            self.stations[j - 1].busy_time / self.now
        } else {
            0.0
        }
    }

    /// Key of the customer in service at `j`.
    pub fn serving_key(&self, j: Station) -> Option<EdfKey> {
        self.stations[j - 1].serving.as_ref().map(|s| s.cust.key())
    }

    /// Keys of the waiting customers at `j`, in EDF order.
    pub fn pending_keys(&self, j: Station) -> impl Iterator<Item = EdfKey> + '_ {
        self.stations[j - 1].pending.keys().copied()
    }
}
