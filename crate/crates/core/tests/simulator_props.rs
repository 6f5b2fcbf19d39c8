use edfnet::presets::{crossing_pair, single_queue};
use edfnet::simulator::{SimOptions, Simulation};
use edfnet::{ClassSpec, LeadTimeDist, NetworkSpec};
use proptest::prelude::*;

fn tandem_with_feeder(rho: f64) -> NetworkSpec {
    let lead = |y: f64| LeadTimeDist::Uniform { lo: 0.0, hi: y };
    NetworkSpec {
        stations: 3,
        classes: vec![
            ClassSpec::new(vec![1, 2, 3], rho * 0.5, vec![1.0, 1.0, 1.0], lead(60.0)),
            ClassSpec::new(vec![2, 3], rho * 0.3, vec![1.0, 1.0], lead(40.0)),
            ClassSpec::new(vec![1], rho * 0.5, vec![1.0], LeadTimeDist::PointMass { at: 30.0 }),
            ClassSpec::new(vec![3], rho * 0.2, vec![1.0], lead(80.0)),
        ],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sample_path_invariants(seed in 0u64..1_000, preemptive in any::<bool>(), rho in 0.5f64..0.95) {
        let mut sim = Simulation::new(
            tandem_with_feeder(rho),
            SimOptions { seed, preemptive, ..SimOptions::default() },
        ).unwrap();
        let topo = sim.topology().clone();
        let mut prev_frontier = [f64::NEG_INFINITY; 4 * 3];
        for _ in 0..4_000 {
            let before: Vec<Option<edfnet::simulator::EdfKey>> =
                (1..=3).map(|j| sim.pending_keys(j).next()).collect();
            let serving_before: Vec<_> = (1..=3).map(|j| sim.serving_key(j)).collect();
            prop_assert!(sim.step());
            let t = sim.now();
            for j in 1..=3 {
                // conservation of customers
                let mut present = 0;
                for &k in topo.visitors(j) {
                    let a = sim.arrivals(k, j);
                    let d = sim.departures(k, j);
                    prop_assert!(d <= a);
                    present += a - d;
                    let pos = topo.route_position(k, j).unwrap();
                    if pos > 0 {
                        prop_assert_eq!(sim.arrivals(k, j), sim.departures(k, topo.route(k)[pos - 1]));
                    }
                }
                prop_assert_eq!(present as usize, sim.queue_length(j));

                // workload decomposition
                let w = sim.workload(j);
                let rhs = sim.netput(j) + sim.idleness(j);
                prop_assert!((w - rhs).abs() <= 1e-8 * (1.0 + t), "W={w} N+I={rhs}");
                prop_assert!((sim.busy_time(j) + sim.idleness(j) - t).abs() <= 1e-8 * (1.0 + t));

                // EDF: the customer in service is ahead of every waiting one,
                // except a non-preemptive server that started before a more urgent arrival
                if let Some(s) = sim.serving_key(j) {
                    let newly_started = serving_before[j - 1] != Some(s);
                    if preemptive || newly_started {
                        if let Some(p) = sim.pending_keys(j).next() {
                            prop_assert!(s < p);
                        }
                    }
                    if newly_started && !preemptive {
                        if let Some(p) = before[j - 1] {
                            prop_assert!(s <= p);
                        }
                    }
                }
                let keys: Vec<_> = sim.pending_keys(j).collect();
                prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));

                // class frontiers: stored deadlines never decrease, downstream never exceeds upstream
                for &k in topo.visitors(j) {
                    let stored = sim.class_frontier(k, j).unwrap() + t;
                    let slot = &mut prev_frontier[(k - 1) * 3 + (j - 1)];
                    prop_assert!(stored >= *slot - 1e-9 * (1.0 + t));
                    *slot = slot.max(stored);
                    let pos = topo.route_position(k, j).unwrap();
                    for &i in &topo.route(k)[..pos] {
                        prop_assert!(sim.class_frontier(k, j).unwrap() <= sim.class_frontier(k, i).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_path(seed in 0u64..1_000) {
        let spec = crossing_pair(0.3, 1.0, [400.0, 300.0, 200.0, 100.0]);
        let run = || {
            let mut sim = Simulation::new(spec.clone(), SimOptions { seed, trace: true, ..SimOptions::default() }).unwrap();
            sim.run_until(500.0).unwrap();
            (sim.trace().to_vec(), sim.snapshot_profiles())
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn mm1_mean_queue_length() {
    let mut sim = Simulation::new(
        single_queue(0.5, 1.0, LeadTimeDist::PointMass { at: 10.0 }),
        SimOptions::seeded(7),
    )
    .unwrap();
    sim.run_until(200_000.0).unwrap();
    let mean = sim.behind_averages(1).mean_queue;
    assert!((mean - 1.0).abs() < 0.1, "mean queue {mean}");
    let util = sim.utilization(1);
    assert!((util - 0.5).abs() < 0.02, "utilization {util}");
}

#[test]
fn heavy_traffic_utilization() {
    let mut sim = Simulation::new(
        crossing_pair(0.3175, 1.0, [400.0, 300.0, 200.0, 100.0]),
        SimOptions::seeded(11),
    )
    .unwrap();
    sim.run_until(100_000.0).unwrap();
    for j in 1..=2 {
        let u = sim.utilization(j);
        assert!(u > 0.9 && u < 1.0, "station {j} utilization {u}");
    }
}

#[test]
fn different_seeds_diverge() {
    let spec = crossing_pair(0.3, 1.0, [400.0, 300.0, 200.0, 100.0]);
    let paths: Vec<_> = [1, 2]
        .into_iter()
        .map(|seed| {
            let mut sim = Simulation::new(spec.clone(), SimOptions { seed, trace: true, ..SimOptions::default() }).unwrap();
            sim.run_until(100.0).unwrap();
            sim.trace().to_vec()
        })
        .collect();
    assert_ne!(paths[0], paths[1]);
}
