use edfnet::presets::{crossing_pair, random_network};
use edfnet::{two_station_closed_form, InversionMethod, Topology, WeightKind, WeightedModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(seed: u64, kind: WeightKind) -> WeightedModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_network(&mut rng, 5, 6);
    WeightedModel::new(Topology::build(spec).unwrap(), kind)
}

fn workload(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..50.0) })
        .collect()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_trip_and_domain(seed in any::<u64>(), work in any::<bool>()) {
        let kind = if work { WeightKind::Work } else { WeightKind::Count };
        let m = model(seed, kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let perms = m.topology().admissible_permutations().unwrap();
        for _ in 0..5 {
            let w = workload(&mut rng, m.topology().num_stations());
            let sol = m.invert(&w).unwrap();
            prop_assert!(sup(&m.phi(&sol.frontiers), &w) <= 1e-8, "w={w:?} sol={sol:?}");
            prop_assert!(perms.contains(&sol.permutation));
            let witness = m.in_domain(&sol.frontiers);
            prop_assert!(witness.is_some(), "off-domain {sol:?}");
            prop_assert!(perms.contains(&witness.unwrap()));
        }
    }

    #[test]
    fn bisection_agrees_with_exact(seed in any::<u64>()) {
        let m = model(seed, WeightKind::Count);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = workload(&mut rng, m.topology().num_stations());
        let a = m.invert_with(&w, InversionMethod::Exact).unwrap();
        let b = m.invert_with(&w, InversionMethod::Bisection).unwrap();
        prop_assert!(sup(&a.frontiers, &b.frontiers) <= 1e-7, "{a:?} {b:?}");
    }

    #[test]
    fn no_coordinate_can_be_lowered(seed in any::<u64>()) {
        let m = model(seed, WeightKind::Count);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = workload(&mut rng, m.topology().num_stations());
        let y = m.invert(&w).unwrap().frontiers;
        for i in 0..y.len() {
            for delta in [0.1, 1.0, 10.0] {
                let mut lower = y.clone();
                lower[i] -= delta;
                prop_assert!(sup(&m.phi(&lower), &w) > 1e-12, "y={y:?} lowered at {i} by {delta}");
                let mut higher = y.clone();
                higher[i] += delta;
                if sup(&m.phi(&higher), &w) <= 1e-9 {
                    prop_assert!(y.iter().zip(&higher).all(|(a, b)| a <= b));
                }
            }
        }
    }

    #[test]
    fn profile_shape(seed in any::<u64>()) {
        let m = model(seed, WeightKind::Count);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = workload(&mut rng, m.topology().num_stations());
        let f = m.invert(&w).unwrap().frontiers;
        let top = m.supports().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for j in 1..=m.topology().num_stations() {
            let total = m.predicted_total(&f, j);
            prop_assert!((total - w[j - 1]).abs() <= 1e-8);
            prop_assert!((m.predict_profile(&f, j, f[j - 1] - 5.0) - total).abs() <= 1e-9);
            prop_assert_eq!(m.predict_profile(&f, j, top), 0.0);
            prop_assert_eq!(m.predict_profile(&f, j, top + 1.0), 0.0);
            let lo = f[j - 1] - 10.0;
            let mut prev = m.predict_profile(&f, j, lo);
            let mut prev_cdf = m.predicted_cdf(&f, j, lo);
            for s in 1..=400 {
                let y = lo + (top + 10.0 - lo) * s as f64 / 400.0;
                let p = m.predict_profile(&f, j, y);
                prop_assert!(p <= prev + 1e-12);
                // Lipschitz in y with constant sum of weights: no jumps
                let lip: f64 = m.topology().visitors(j).iter().map(|&k| m.weight(k, j)).sum();
                prop_assert!(prev - p <= lip * (top + 10.0 - lo) / 400.0 + 1e-9);
                let c = m.predicted_cdf(&f, j, y);
                prop_assert!((0.0..=1.0).contains(&c) && c + 1e-12 >= prev_cdf);
                prev = p;
                prev_cdf = c;
            }
        }
    }

    #[test]
    fn phi_is_injective_on_the_domain(seed in any::<u64>()) {
        let m = model(seed, WeightKind::Count);
        let n = m.topology().num_stations();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hi = m.supports().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut points = Vec::new();
        for _ in 0..400 {
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(hi - 250.0..hi)).collect();
            if m.in_domain(&y).is_some() {
                points.push((m.phi(&y), y));
            }
            if points.len() == 30 {
                break;
            }
        }
        for a in 0..points.len() {
            for b in a + 1..points.len() {
                if sup(&points[a].1, &points[b].1) >= 1e-3 {
                    prop_assert!(sup(&points[a].0, &points[b].0) > 0.0);
                }
            }
        }
    }

    #[test]
    fn matches_closed_form(q1 in 0.0f64..200.0, q2 in 0.0f64..200.0, d in prop::sample::select(vec![
        [400.0, 300.0, 200.0, 100.0],
        [200.0, 200.0, 110.0, 100.0],
        [500.0, 100.0, 100.0, 100.0],
        [300.0, 250.0, 240.0, 10.0],
    ])) {
        let topo = Topology::build(crossing_pair(1.0 / 3.0, 1.0, d)).unwrap();
        let m = WeightedModel::new(topo, WeightKind::Count);
        let sol = m.invert(&[q1, q2]).unwrap();
        let cf = two_station_closed_form([1.0 / 3.0; 4], d, q1, q2).unwrap();
        prop_assert!((sol.frontiers[0] - cf.f1).abs() <= 1e-8 && (sol.frontiers[1] - cf.f2).abs() <= 1e-8,
            "generic {:?} closed {cf:?}", sol.frontiers);
    }
}
