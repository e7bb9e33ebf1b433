//! Property checks shared by the proptest suite and the acceptance runner.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use mmwave_core::csma::ContentionConfig;
use mmwave_core::mac::{run_slotted_aloha_on_map, run_tdma_on_map};
use mmwave_core::*;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = std::result::Result<(), TestCaseError>;

pub fn point(extent: f64) -> impl Strategy<Value = Point2D> {
    (-extent..extent, -extent..extent).prop_map(|(x, y)| Point2D::new(x, y))
}

pub fn segment() -> impl Strategy<Value = Segment> {
    (point(5.0), point(5.0)).prop_map(|(a, b)| Segment::new(a, b))
}

/// Small random networks: density, beamwidth (deg), obstacle density, seed.
pub fn network() -> impl Strategy<Value = (f64, f64, f64, u64)> {
    (0.0..0.6f64, 1.0..360.0f64, 0.0..0.5f64, any::<u64>())
}

pub fn deployment(
    density: f64,
    bw_deg: f64,
    obstacles: f64,
    seed: u64,
) -> (Deployment, RadioModel) {
    let resolved = Scenario::preset(density, bw_deg)
        .with_obstacle_density(obstacles)
        .resolve()
        .unwrap();
    (resolved.sample(seed), resolved.model)
}

pub fn segment_symmetry(a: Segment, b: Segment) -> Check {
    let ab = segments_intersect(&a, &b);
    prop_assert_eq!(ab, segments_intersect(&b, &a));
    prop_assert_eq!(ab, segments_intersect(&a.reversed(), &b));
    prop_assert_eq!(ab, segments_intersect(&a, &b.reversed()));
    Ok(())
}

pub fn blocker_symmetry(net: (f64, f64, f64, u64), p: Point2D, q: Point2D) -> Check {
    let (d, _) = deployment(net.0, net.1, net.2 * 4.0, net.3);
    let (p, q) = (d.arena.wrap(p), d.arena.wrap(q));
    prop_assert_eq!(d.blockers(p, q), d.blockers(q, p));
    let path = Segment::new(p, q);
    prop_assert_eq!(
        count_blockers(&path, &d.obstacles),
        count_blockers(&path.reversed(), &d.obstacles)
    );
    Ok(())
}

pub fn torus_translation(p: Point2D, q: Point2D, v: Point2D) -> Check {
    let arena = Arena::Torus {
        width: 10.0,
        height: 7.0,
    };
    let before = arena.distance(p, q);
    let p2 = arena.wrap(p.offset(v.x, v.y));
    let q2 = arena.wrap(q.offset(v.x, v.y));
    prop_assert!((arena.distance(p2, q2) - before).abs() < 1e-9);
    prop_assert!((arena.distance(q, p) - before).abs() < 1e-12);
    Ok(())
}

pub fn deployment_determinism(net: (f64, f64, f64, u64)) -> Check {
    let (a, _) = deployment(net.0, net.1, net.2, net.3);
    let (b, _) = deployment(net.0, net.1, net.2, net.3);
    prop_assert_eq!(&a, &b);
    let json = a.to_json().unwrap();
    prop_assert_eq!(Deployment::from_json(&json).unwrap(), a);
    Ok(())
}

pub fn deployment_ranges(net: (f64, f64, f64, u64)) -> Check {
    let (d, _) = deployment(net.0, net.1, net.2 * 4.0, net.3);
    for o in &d.obstacles {
        let len = o.segment.length();
        prop_assert!(len > 0.0 && len <= 1.0 + 1e-12, "obstacle length {}", len);
    }
    for l in &d.links {
        let len = l.length(&d.arena);
        prop_assert!(len > 0.0 && len <= scenario::PRESET_LINK_LENGTH_MAX + 1e-9);
    }
    Ok(())
}

/// Mean gain over the circle, integrated piecewise between the pattern's
/// discontinuities with a composite midpoint rule.
pub fn mean_gain(pattern: &AntennaPattern) -> f64 {
    let h = 0.5 * pattern.beamwidth();
    let pieces = [(-PI, -h), (-h, h), (h, PI)];
    let n = 256;
    let mut total = 0.0;
    for (a, b) in pieces {
        let w = (b - a) / n as f64;
        if w <= 0.0 {
            continue;
        }
        for i in 0..n {
            total += antenna_gain(pattern, a + (i as f64 + 0.5) * w) * w;
        }
    }
    total / TAU
}

pub fn power_conservation(beamwidth: f64, sidelobe: f64) -> Check {
    let pattern = AntennaPattern::new(beamwidth, sidelobe).unwrap();
    let err = (mean_gain(&pattern) - 1.0).abs();
    prop_assert!(err < 1e-9, "integral error {}", err);
    Ok(())
}

pub fn packet_conservation(net: (f64, f64, f64, u64), p: f64, saturated: bool) -> Check {
    let (d, model) = deployment(net.0, net.1, net.2, net.3);
    let map = InterferenceMap::build(&d, &model);
    let slot = SlotConfig::default();
    let traffic = if saturated {
        TrafficConfig::saturated()
    } else {
        TrafficConfig::default()
    };
    let aloha = AlohaConfig {
        transmit_probability: p,
    };
    let a = run_slotted_aloha_on_map(&map, &slot, &traffic, &aloha, 400, net.3).unwrap();
    let t = run_tdma_on_map(&map, &slot, &traffic, 400, net.3).unwrap();
    for m in [&a, &t] {
        prop_assert_eq!(m.per_link.len(), d.len());
        if !saturated {
            for c in &m.per_link {
                prop_assert_eq!(c.arrivals, c.delivered + c.queued);
            }
            prop_assert_eq!(m.backlog, m.per_link.iter().map(|c| c.queued).sum::<u64>());
        }
        let attempts: u64 = m.per_link.iter().map(|c| c.attempts).sum();
        prop_assert_eq!(attempts, m.delivered + m.collided + m.blocked);
        prop_assert!(m.network_throughput <= d.len() as f64 + 1e-12);
    }
    prop_assert_eq!(t.collided, 0);
    prop_assert!(t.network_throughput <= 1.0 + 1e-12);
    if d.len() == 1 {
        prop_assert_eq!(a.collided, 0);
    }
    Ok(())
}

pub fn mac_determinism(net: (f64, f64, f64, u64), p: f64) -> Check {
    let (d, model) = deployment(net.0, net.1, net.2, net.3);
    let slot = SlotConfig::default();
    let traffic = TrafficConfig::default();
    let aloha = AlohaConfig {
        transmit_probability: p,
    };
    let a = run_slotted_aloha(&d, &model, &slot, &traffic, &aloha, 0.01, 5).unwrap();
    let b = run_slotted_aloha(&d, &model, &slot, &traffic, &aloha, 0.01, 5).unwrap();
    prop_assert_eq!(a, b);
    let a = run_tdma(&d, &model, &slot, &traffic, 0.01, 5).unwrap();
    let b = run_tdma(&d, &model, &slot, &traffic, 0.01, 5).unwrap();
    prop_assert_eq!(a, b);
    Ok(())
}

pub fn reception_signals() -> impl Strategy<Value = Vec<(f64, MessageKind)>> {
    let kind = prop_oneof![
        Just(MessageKind::Rts),
        Just(MessageKind::Cts),
        Just(MessageKind::Cn),
        Just(MessageKind::Data),
    ];
    // powers from 1e-12 to 1e-3 mW, around the noise floor
    prop::collection::vec((-12.0..-3.0f64, kind), 0..6)
        .prop_map(|v| v.into_iter().map(|(e, k)| (10f64.powf(e), k)).collect())
}

pub fn reception_invariance(signals: Vec<(f64, MessageKind)>, rotate: usize) -> Check {
    let model = ReceptionModel::default();
    let base = classify_reception(&signals, &model);
    let mut shuffled = signals.clone();
    if !shuffled.is_empty() {
        let k = rotate % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
    }
    prop_assert_eq!(classify_reception(&shuffled, &model), base);
    let mut padded = signals.clone();
    padded.insert(rotate % (signals.len() + 1), (0.0, MessageKind::Data));
    prop_assert_eq!(classify_reception(&padded, &model), base);
    Ok(())
}

pub fn contention_window_bounded(n: usize, q: f64, cw_max_exp: u32, seed: u64) -> Check {
    let mut cfg = ContentionConfig::default();
    cfg.backoff.cw_min = 4;
    cfg.backoff.cw_max = 1 << cw_max_exp;
    for variant in [
        ProtocolVariant::StandardRtsCts,
        ProtocolVariant::WithCollisionNotification,
    ] {
        let s = run_contention_experiment(n, q, variant, 20, &cfg, seed).unwrap();
        prop_assert!(s.max_cw <= cfg.backoff.cw_max);
        prop_assert_eq!(s.unresolved, 0);
        prop_assert!(s.mean_winner_backoff >= 0.0);
    }
    Ok(())
}

pub fn utilization_monotone(a: u64, b: u64) -> Check {
    for t in [CsmaTimings::default(), CsmaTimings::rounded()] {
        let (lo, hi) = (a.min(b), a.max(b));
        let ul = channel_utilization(lo, &t).utilization;
        let uh = channel_utilization(hi, &t).utilization;
        prop_assert!(ul > 0.0 && uh < 1.0);
        if lo < hi {
            prop_assert!(ul < uh);
        }
    }
    Ok(())
}

/// Two omni links whose transmitters sit 0.1 m from the other receiver:
/// either one alone closes comfortably, together neither does.
pub fn conflicting_pair() -> (Deployment, RadioModel) {
    let arena = Arena::Plane;
    let bw = TAU;
    let links = vec![
        DirectedLink::aligned(&arena, Point2D::new(0.0, 0.0), Point2D::new(0.5, 0.0), bw),
        DirectedLink::aligned(&arena, Point2D::new(0.5, 0.1), Point2D::new(0.0, 0.1), bw),
    ];
    (
        Deployment::new(arena, links, Vec::new()),
        RadioModel::default(),
    )
}
