mod support;

use mmwave_core::harness::Dataset;
use mmwave_core::mac::run_slotted_aloha_on_map;
use mmwave_core::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};
use std::f64::consts::TAU;
use support::conflicting_pair;

fn deployment_config(density: f64) -> DeploymentConfig {
    DeploymentConfig {
        link_density: density,
        obstacle_density: 0.0,
        ..DeploymentConfig::default()
    }
}

#[test]
fn link_count_mean_matches_density() {
    let n = 10_000;
    let total: usize = (0..n)
        .map(|s| {
            sample_deployment(&DeploymentConfig {
                seed: s,
                ..deployment_config(1.0)
            })
            .unwrap()
            .len()
        })
        .sum();
    let mean = total as f64 / n as f64;
    // sd of the mean is 0.1
    assert!((mean - 100.0).abs() < 0.5, "mean link count {mean}");
}

#[test]
fn link_count_is_poisson() {
    let lambda = 25.0;
    let n = 10_000u64;
    let mut observed = vec![0u64; 80];
    for s in 0..n {
        let k = sample_deployment(&DeploymentConfig {
            seed: s,
            ..deployment_config(0.25)
        })
        .unwrap()
        .len();
        observed[k.min(79)] += 1;
    }
    let pois = Poisson::new(lambda).unwrap();
    // bins [0, 15], 16, ..., 34, [35, inf): every expected count above 5
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let low: f64 = (0..=15).map(|k| pois.pmf(k)).sum();
    bins.push((observed[..=15].iter().sum::<u64>() as f64, low));
    for k in 16..35 {
        bins.push((observed[k] as f64, pois.pmf(k as u64)));
    }
    let high = 1.0 - bins.iter().map(|b| b.1).sum::<f64>();
    bins.push((observed[35..].iter().sum::<u64>() as f64, high));
    let chi2: f64 = bins
        .iter()
        .map(|&(o, p)| {
            let e = p * n as f64;
            assert!(e >= 5.0);
            (o - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new((bins.len() - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} vs {critical}");
}

#[test]
fn conflicting_pair_splits_the_channel() {
    let (d, model) = conflicting_pair();
    let map = InterferenceMap::build(&d, &model);
    assert!(map.covered(0) && map.covered(1));
    assert!(!map.decodes(0, &[true, true]));
    let slots = 40_000;
    let m = run_slotted_aloha_on_map(
        &map,
        &SlotConfig::default(),
        &TrafficConfig::saturated(),
        &AlohaConfig {
            transmit_probability: 0.5,
        },
        slots,
        11,
    )
    .unwrap();
    // per-link mean of a slot success indicator with P = 2p(1-p) = 0.5, halved
    let sd = (0.5f64 * 0.5 / slots as f64).sqrt() / 2.0;
    assert!(
        (m.per_link_throughput - 0.25).abs() < 3.0 * sd,
        "{}",
        m.per_link_throughput
    );
}

#[test]
fn conflicting_pair_optimum_is_one_half() {
    let (d, model) = conflicting_pair();
    let map = InterferenceMap::build(&d, &model);
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let opt = mac::find_optimal_p_on_map(&map, &grid, 20, 5_000, 3).unwrap();
    assert_eq!(opt.p_star, 0.5);
    assert!((opt.max_throughput - 0.25).abs() < 0.005);
}

#[test]
fn wider_beams_lower_aloha_throughput() {
    // same deployment positions at both beamwidths (shared seeds)
    let slot = SlotConfig::default();
    let traffic = TrafficConfig::saturated();
    let aloha = AlohaConfig {
        transmit_probability: 1.0,
    };
    let mean = |bw: f64| {
        let resolved = Scenario::preset(1.0, bw).resolve().unwrap();
        let s: f64 = (0..40)
            .map(|r| {
                let d = resolved.sample(r);
                let map = InterferenceMap::build(&d, &resolved.model);
                run_slotted_aloha_on_map(&map, &slot, &traffic, &aloha, 200, r)
                    .unwrap()
                    .per_link_throughput
            })
            .sum();
        s / 40.0
    };
    let (narrow, wide) = (mean(10.0), mean(30.0));
    assert!(narrow > wide + 0.02, "10 deg {narrow}, 30 deg {wide}");
}

#[test]
fn tdma_with_one_blocked_link() {
    let arena = Arena::Plane;
    let links = vec![
        DirectedLink::aligned(&arena, Point2D::new(0.0, 0.0), Point2D::new(0.5, 0.0), TAU),
        DirectedLink::aligned(
            &arena,
            Point2D::new(10.0, 0.0),
            Point2D::new(10.5, 0.0),
            TAU,
        ),
    ];
    let wall = Obstacle::new(Point2D::new(10.25, -0.5), Point2D::new(10.25, 0.5));
    let d = Deployment::new(arena, links, vec![wall]);
    let model = RadioModel::default();
    let m = run_tdma(
        &d,
        &model,
        &SlotConfig::default(),
        &TrafficConfig::saturated(),
        0.1,
        0,
    )
    .unwrap();
    assert_eq!(m.slots, 4_000);
    assert_eq!(m.delivered, 2_000);
    assert_eq!(m.collided, 0);
    assert!((m.network_throughput - 0.5).abs() < 1e-12);
}

#[test]
fn cn_matches_standard_without_blockage() {
    let cfg = ContentionConfig::default();
    let s = run_contention_experiment(20, 0.0, ProtocolVariant::StandardRtsCts, 2_000, &cfg, 9)
        .unwrap();
    let c = run_contention_experiment(
        20,
        0.0,
        ProtocolVariant::WithCollisionNotification,
        2_000,
        &cfg,
        9,
    )
    .unwrap();
    assert!((s.mean_winner_backoff - c.mean_winner_backoff).abs() < 1e-12);
    assert_eq!(s.attempts_histogram, c.attempts_histogram);
}

#[test]
fn cn_never_waits_longer_than_standard() {
    let cfg = ContentionConfig::default();
    for q in [0.0, 0.005, 0.01, 0.02, 0.05, 0.1] {
        let s = run_contention_experiment(20, q, ProtocolVariant::StandardRtsCts, 5_000, &cfg, 4)
            .unwrap();
        let c = run_contention_experiment(
            20,
            q,
            ProtocolVariant::WithCollisionNotification,
            5_000,
            &cfg,
            4,
        )
        .unwrap();
        assert!(
            c.mean_winner_backoff <= s.mean_winner_backoff + 1e-12,
            "q = {q}"
        );
    }
}

#[test]
fn single_device_cn_backoff_ignores_blockage() {
    let cfg = ContentionConfig::default();
    let reps = 40_000;
    // one draw from [0, 16) slots of 5 us: mean 37.5 us, sd 23.05 us
    let sd = (255.0f64 / 12.0).sqrt() * 5.0 / (reps as f64).sqrt();
    for q in [0.0, 0.2, 0.5] {
        let c = run_contention_experiment(
            1,
            q,
            ProtocolVariant::WithCollisionNotification,
            reps,
            &cfg,
            1,
        )
        .unwrap();
        let mean_us = c.mean_winner_backoff * 1e6;
        assert!((mean_us - 37.5).abs() < 4.0 * sd, "q = {q}: {mean_us}");
    }
}

#[test]
fn bernoulli_column_summary() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let mut text = String::from("g,x\n");
    for _ in 0..10_000 {
        let x = u8::from(rng.random::<f64>() < 0.2);
        text.push_str(&format!("a,{x}\n"));
    }
    let d = Dataset::from_reader(text.as_bytes()).unwrap();
    let s = summarize(&d, &["g"], "x").unwrap();
    assert_eq!(s[0].n, 10_000);
    // binomial sd of the mean is 0.004; the stated band is three of those
    assert!((s[0].mean - 0.2).abs() < 0.012, "{}", s[0].mean);
    assert!(s[0].ci_low <= s[0].mean && s[0].mean <= s[0].ci_high);
    let half = 1.959964 * (0.2f64 * 0.8 / 10_000.0).sqrt();
    assert!(((s[0].ci_high - s[0].ci_low) / 2.0 - half).abs() < 5e-4);
}
