use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use setdp::baselines::{
    gps2_distribution, gps3_distribution, gps_distribution, gps_xi, hedge_distribution, hedge_eta, run_once,
    simulate, Adversary, ForecasterSpec,
};

fn is_distribution(p: &[f64]) -> bool {
    (p.iter().sum::<f64>() - 1.0).abs() <= 1e-12 && p.iter().all(|x| (0.0..=1.0).contains(x))
}

proptest! {
    #[test]
    fn emitted_distributions_are_valid(
        losses in prop::collection::vec(0.0f64..50.0, 2..4),
        cum in prop::collection::vec(0u64..40, 2..=3),
        beta in 0.0f64..0.999,
    ) {
        prop_assert!(is_distribution(&hedge_distribution(&losses, hedge_eta(losses.len(), beta))));
        prop_assert!(is_distribution(&gps_distribution(&cum, beta).unwrap()));
    }

    #[test]
    fn gps2_leader_probability(d in 0u64..30, b1 in 0.0f64..0.99, b2 in 0.0f64..0.99) {
        prop_assert_eq!(gps2_distribution(0, b1)[0], 0.5);
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        prop_assert!(gps_xi(lo) <= gps_xi(hi));
        prop_assert!(gps2_distribution(d, lo)[0] >= gps2_distribution(d, hi)[0]);
    }

    #[test]
    fn gps3_is_valid_for_ranked_gaps(d12 in 0u64..10, d23 in 0u64..10, beta in 0.0f64..0.99) {
        let p = gps3_distribution(d12, d12 + d23, d23, beta);
        prop_assert!(is_distribution(&p));
        prop_assert!(p[0] >= p[1] - 1e-15 && p[1] >= p[2] - 1e-15);
    }
}

#[test]
fn simulate_is_deterministic() {
    let spec = ForecasterSpec::Hedge { eta: None };
    let a = simulate(&spec, Adversary::E, 0.8, 50, 300, 17).unwrap();
    let b = simulate(&spec, Adversary::E, 0.8, 50, 300, 17).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = simulate(&spec, Adversary::E, 0.8, 50, 300, 18).unwrap();
    assert_ne!(a.regrets, c.regrets);
}

#[test]
fn truncation_changes_regret_by_at_most_the_tail() {
    let beta = 0.9;
    for adv in Adversary::ALL {
        for spec in [ForecasterSpec::Hedge { eta: None }, ForecasterSpec::Gps] {
            for run in 0..20 {
                let short = run_once(&spec, adv, beta, 30, 3, run).unwrap();
                let long = run_once(&spec, adv, beta, 100, 3, run).unwrap();
                assert!((long - short).abs() <= beta.powi(30) / (1.0 - beta) + 1e-12);
            }
        }
    }
}

#[test]
fn gps2_against_uniform_adversary() {
    let s = simulate(&ForecasterSpec::Gps, Adversary::A, 0.9, 100, 10_000, 1).unwrap();
    let bound = 1.0 / (2.0 * 0.19f64.sqrt());
    assert!(s.mean <= bound + 3.0 * s.se, "mean {} se {}", s.mean, s.se);
}

#[test]
fn hedge_stays_under_its_bound() {
    let bound = (2f64.ln() / (2.0 * 0.1 * 1.9)).sqrt();
    for adv in [Adversary::A, Adversary::B, Adversary::C] {
        let s = simulate(&ForecasterSpec::Hedge { eta: None }, adv, 0.9, 100, 10_000, 2).unwrap();
        assert!(s.mean <= bound + 3.0 * s.se, "{adv}: mean {} se {}", s.mean, s.se);
    }
}

#[test]
fn adversary_frequencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 40_000;
    let beta = 0.9;
    let q = 0.5 - (1.0 - beta as f64).sqrt();
    let mut first = 0.0;
    let mut tie_spared = [0.0; 3];
    for t in 1..=n {
        first += Adversary::B.sample(t, &[0, 0], beta, &mut rng)[0];
        let e = Adversary::E.sample(t, &[1, 1, 1], beta, &mut rng);
        tie_spared[e.iter().position(|&x| x == 0.0).unwrap()] += 1.0;
    }
    let sd = (q * (1.0 - q) / n as f64).sqrt();
    assert!((first / n as f64 - q).abs() < 4.0 * sd);
    for c in tie_spared {
        assert!((c / n as f64 - 1.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / n as f64).sqrt());
    }
}

#[test]
fn bernoulli_adversaries_need_large_beta() {
    assert!(simulate(&ForecasterSpec::Gps, Adversary::B, 0.7, 10, 10, 0).is_err());
    assert!(simulate(&ForecasterSpec::Gps, Adversary::F, 0.7, 10, 10, 0).is_err());
    assert!(simulate(&ForecasterSpec::Gps, Adversary::A, 0.9, 0, 10, 0).is_err());
}
