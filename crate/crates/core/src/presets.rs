//! Ready-made networks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::leadtime::LeadTimeDist;
use crate::topology::{ClassSpec, NetworkSpec, Topology};

/// Two stations, four classes: class 1 routes (1, 2), class 2 routes (2, 1),
/// class 3 visits only station 1 and class 4 only station 2. Every class has
/// the same arrival and service rate and a constant lead time.
pub fn crossing_pair(arrival_rate: f64, service_rate: f64, deadlines: [f64; 4]) -> NetworkSpec {
    let routes = [vec![1, 2], vec![2, 1], vec![1], vec![2]];
    NetworkSpec {
        stations: 2,
        classes: routes
            .into_iter()
            .zip(deadlines)
            .map(|(route, at)| {
                let rates = vec![service_rate; route.len()];
                ClassSpec::new(route, arrival_rate, rates, LeadTimeDist::PointMass { at })
            })
            .collect(),
    }
}

/// Single-station, single-class queue with exponential laws.
pub fn single_queue(arrival_rate: f64, service_rate: f64, lead_time: LeadTimeDist) -> NetworkSpec {
    NetworkSpec {
        stations: 1,
        classes: vec![ClassSpec::new(vec![1], arrival_rate, vec![service_rate], lead_time)],
    }
}

/// Random connected network with at most `max_stations` stations and
/// `max_classes` classes. Lead times cycle through the three law variants;
/// rates are drawn so every station carries positive traffic.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, max_stations: usize, max_classes: usize) -> NetworkSpec {
    let stations = rng.random_range(1..=max_stations.max(1));
    loop {
        let num_classes = rng.random_range(1..=max_classes.max(1));
        let classes = (0..num_classes)
            .map(|c| {
                let mut order: Vec<usize> = (1..=stations).collect();
                order.shuffle(rng);
                order.truncate(rng.random_range(1..=stations));
                let rates = order.iter().map(|_| rng.random_range(0.5..2.0)).collect();
                ClassSpec::new(order, rng.random_range(0.05..0.5), rates, random_lead_time(rng, c % 3))
            })
            .collect();
        let spec = NetworkSpec { stations, classes };
        if Topology::build(spec.clone()).is_ok() {
            return spec;
        }
    }
}

fn random_lead_time<R: Rng + ?Sized>(rng: &mut R, variant: usize) -> LeadTimeDist {
    match variant {
        0 => LeadTimeDist::PointMass {
            at: rng.random_range(10.0..200.0),
        },
        1 => {
            let lo = rng.random_range(-20.0..100.0);
            LeadTimeDist::Uniform {
                lo,
                hi: lo + rng.random_range(5.0..100.0),
            }
        }
        _ => {
            let n = rng.random_range(2..=5);
            let mut y = rng.random_range(-20.0..100.0);
            let mut g: f64 = if rng.random_bool(0.5) { rng.random_range(0.0..0.5) } else { 0.0 };
            let mut knots = vec![(y, g)];
            for i in 1..n {
                y += rng.random_range(1.0..40.0);
                g = if i + 1 == n { 1.0 } else { rng.random_range(g..1.0) };
                knots.push((y, g));
            }
            LeadTimeDist::PiecewiseLinear { knots }
        }
    }
}
