//! Static interference analysis: strong-interferer sets, collision-domain
//! size distributions and Monte-Carlo collision probability.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Deployment;
use crate::radio::{dbm_to_mw, InterferenceMap, RadioModel};
use crate::scenario::Scenario;
use crate::seed::{replication_seed, rng_from_seed, stream_seed};
use crate::stats::{wilson_interval, Interval};

/// Interferers that individually break a link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrongInterferers {
    /// The link misses the decode threshold even without interference.
    CoverageFailed,
    Covered(BTreeSet<usize>),
}

impl StrongInterferers {
    pub fn set(&self) -> Option<&BTreeSet<usize>> {
        match self {
            StrongInterferers::CoverageFailed => None,
            StrongInterferers::Covered(s) => Some(s),
        }
    }
}

/// Links `j` whose transmitter alone pushes link `link`'s SINR below the
/// decode threshold.
pub fn strong_interferers(
    link: usize,
    deployment: &Deployment,
    model: &RadioModel,
) -> Result<StrongInterferers> {
    if link >= deployment.len() {
        return Err(Error::InvalidIndex {
            index: link,
            len: deployment.len(),
        });
    }
    let signal = dbm_to_mw(model.link_power_dbm(deployment, link, link));
    let budget = signal / model.channel.decode_threshold() - model.channel.noise_mw();
    if budget < 0.0 {
        return Ok(StrongInterferers::CoverageFailed);
    }
    let set = (0..deployment.len())
        .filter(|&j| j != link)
        .filter(|&j| dbm_to_mw(model.link_power_dbm(deployment, j, link)) > budget)
        .collect();
    Ok(StrongInterferers::Covered(set))
}

/// Same as [`strong_interferers`], read off a prebuilt map.
pub fn strong_interferers_from_map(map: &InterferenceMap, link: usize) -> StrongInterferers {
    if !map.covered(link) {
        return StrongInterferers::CoverageFailed;
    }
    let budget = map.budget_mw(link);
    let set = map
        .interferers(link)
        .iter()
        .take_while(|&&(_, p)| p > budget)
        .map(|&(j, _)| j as usize)
        .collect();
    StrongInterferers::Covered(set)
}

/// How a collision domain is measured for each covered link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    /// 1 + number of individually fatal interferers.
    #[default]
    Pairwise,
    /// Size of the link's connected component in the undirected conflict
    /// graph.
    Component,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionDomainHistogram {
    /// Domain size -> number of covered links observed with that size.
    pub counts: BTreeMap<usize, u64>,
}

impl CollisionDomainHistogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Domain size -> empirical probability.
    pub fn sizes(&self) -> BTreeMap<usize, f64> {
        let total = self.total() as f64;
        self.counts
            .iter()
            .map(|(&k, &c)| (k, c as f64 / total))
            .collect()
    }

    pub fn probability(&self, size: usize) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        *self.counts.get(&size).unwrap_or(&0) as f64 / total as f64
    }

    /// `P(size <= k)`.
    pub fn cdf(&self, k: usize) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.counts.range(..=k).map(|(_, &c)| c).sum::<u64>() as f64 / total as f64
    }

    pub fn mean(&self) -> f64 {
        let total = self.total() as f64;
        self.counts
            .iter()
            .map(|(&k, &c)| k as f64 * c as f64)
            .sum::<f64>()
            / total
    }

    pub fn max_size(&self) -> usize {
        self.counts.keys().next_back().copied().unwrap_or(1)
    }

    fn merge(&mut self, other: &BTreeMap<usize, u64>) {
        for (&k, &c) in other {
            *self.counts.entry(k).or_insert(0) += c;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionDomainReport {
    pub histogram: CollisionDomainHistogram,
    /// Links excluded because they cannot close without interference.
    pub coverage_failed: u64,
    pub links: u64,
    pub replications: u64,
    pub seed: u64,
}

impl CollisionDomainReport {
    pub fn coverage_failed_fraction(&self) -> f64 {
        if self.links == 0 {
            0.0
        } else {
            self.coverage_failed as f64 / self.links as f64
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Domain sizes of the covered links in one deployment; `None` marks a
/// coverage failure.
pub fn domain_sizes(map: &InterferenceMap, mode: DomainMode) -> Vec<Option<usize>> {
    let n = map.len();
    let sets: Vec<StrongInterferers> = (0..n)
        .map(|i| strong_interferers_from_map(map, i))
        .collect();
    match mode {
        DomainMode::Pairwise => sets
            .iter()
            .map(|s| s.set().map(|set| 1 + set.len()))
            .collect(),
        DomainMode::Component => {
            let mut uf = UnionFind::new(n);
            for (i, s) in sets.iter().enumerate() {
                if let Some(set) = s.set() {
                    for &j in set {
                        uf.union(i, j);
                    }
                }
            }
            let mut size = vec![0usize; n];
            for i in 0..n {
                let r = uf.find(i);
                size[r] += 1;
            }
            (0..n)
                .map(|i| sets[i].set().map(|_| size[uf.find(i)]))
                .collect()
        }
    }
}

/// Pool `1 + |strong interferers|` over every covered link of
/// `replications` independent deployments.
pub fn collision_domain_histogram(
    scenario: &Scenario,
    replications: u64,
    seed: u64,
    mode: DomainMode,
) -> Result<CollisionDomainReport> {
    if replications == 0 {
        return Err(Error::config("replications", "must be >= 1"));
    }
    let resolved = scenario.resolve()?;
    let per_rep: Vec<(BTreeMap<usize, u64>, u64, u64)> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let d = resolved.sample(replication_seed(seed, r));
            let map = InterferenceMap::build(&d, &resolved.model);
            let mut counts = BTreeMap::new();
            let mut failed = 0;
            for s in domain_sizes(&map, mode) {
                match s {
                    Some(k) => *counts.entry(k).or_insert(0) += 1,
                    None => failed += 1,
                }
            }
            (counts, failed, d.len() as u64)
        })
        .collect();

    let mut histogram = CollisionDomainHistogram {
        counts: BTreeMap::new(),
    };
    let (mut coverage_failed, mut links) = (0, 0);
    for (counts, failed, n) in &per_rep {
        histogram.merge(counts);
        coverage_failed += failed;
        links += n;
    }
    Ok(CollisionDomainReport {
        histogram,
        coverage_failed,
        links,
        replications,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEstimate {
    pub probability: f64,
    /// 95% Wilson interval.
    pub ci: Interval,
    pub collisions: u64,
    /// Replications whose reference link was covered.
    pub trials: u64,
    pub coverage_failed: u64,
    /// Replications that drew no links at all.
    pub empty: u64,
    pub replications: u64,
}

impl CollisionEstimate {
    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.probability;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

enum Trial {
    Empty,
    CoverageFailed,
    Outcome(bool),
}

/// Fraction of covered reference links that fail under random activation of
/// the other links. Each replication draws a fresh deployment; its first
/// link (a uniformly random one, links being exchangeable) is the
/// reference and every other link transmits independently with
/// `transmit_probability`.
pub fn estimate_collision_probability(
    scenario: &Scenario,
    transmit_probability: f64,
    replications: u64,
    seed: u64,
) -> Result<CollisionEstimate> {
    if !(0.0..=1.0).contains(&transmit_probability) {
        return Err(Error::config(
            "transmit_probability",
            format!("must lie in [0, 1], got {transmit_probability}"),
        ));
    }
    if replications == 0 {
        return Err(Error::config("replications", "must be >= 1"));
    }
    let resolved = scenario.resolve()?;
    let model = resolved.model;
    let trials: Vec<Trial> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = replication_seed(seed, r);
            let d = resolved.sample(rep_seed);
            if d.is_empty() {
                return Trial::Empty;
            }
            let signal = dbm_to_mw(model.link_power_dbm(&d, 0, 0));
            let budget = signal / model.channel.decode_threshold() - model.channel.noise_mw();
            if budget < 0.0 {
                return Trial::CoverageFailed;
            }
            let mut rng = rng_from_seed(stream_seed(rep_seed, "activation", 0));
            let mut interference = 0.0;
            for j in 1..d.len() {
                let u: f64 = rng.random();
                if u < transmit_probability {
                    interference += dbm_to_mw(model.link_power_dbm(&d, j, 0));
                }
            }
            Trial::Outcome(interference > budget)
        })
        .collect();

    let mut est = CollisionEstimate {
        probability: 0.0,
        ci: Interval {
            low: 0.0,
            high: 1.0,
        },
        collisions: 0,
        trials: 0,
        coverage_failed: 0,
        empty: 0,
        replications,
    };
    for t in trials {
        match t {
            Trial::Empty => est.empty += 1,
            Trial::CoverageFailed => est.coverage_failed += 1,
            Trial::Outcome(collided) => {
                est.trials += 1;
                est.collisions += u64::from(collided);
            }
        }
    }
    if est.trials > 0 {
        est.probability = est.collisions as f64 / est.trials as f64;
    }
    est.ci = wilson_interval(est.collisions, est.trials, 0.95);
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Arena, DirectedLink, Point2D};
    use std::f64::consts::TAU;

    fn victim(bw: f64) -> DirectedLink {
        DirectedLink::aligned(
            &Arena::Plane,
            Point2D::new(0.0, 0.0),
            Point2D::new(0.6, 0.0),
            bw,
        )
    }

    #[test]
    fn single_link_has_no_interferers() {
        let d = Deployment::new(Arena::Plane, vec![victim(TAU)], vec![]);
        let s = strong_interferers(0, &d, &RadioModel::default()).unwrap();
        assert_eq!(s, StrongInterferers::Covered(BTreeSet::new()));
    }

    #[test]
    fn interferer_on_boresight_at_half_distance() {
        // victim rx at (0.6, 0) looks back towards -x; interferer tx sits on
        // that boresight 0.3 m away, closer than the victim's own tx
        let v = victim(TAU);
        let i = DirectedLink::aligned(
            &Arena::Plane,
            Point2D::new(0.3, 0.0),
            Point2D::new(0.3, 0.5),
            TAU,
        );
        let d = Deployment::new(Arena::Plane, vec![v, i], vec![]);
        let m = RadioModel::default();
        // hand budget: interference 9 dB above the signal
        let s_dbm = m.link_power_dbm(&d, 0, 0);
        let i_dbm = m.link_power_dbm(&d, 1, 0);
        assert!((i_dbm - s_dbm - 30.0 * 2f64.log10()).abs() < 1e-9);
        let s = strong_interferers(0, &d, &m).unwrap();
        assert_eq!(
            s.set().unwrap().iter().copied().collect::<Vec<_>>(),
            vec![1]
        );
    }

    #[test]
    fn interferer_outside_narrow_beam_is_harmless() {
        let bw = 10f64.to_radians();
        let v = victim(bw);
        let i = DirectedLink::aligned(
            &Arena::Plane,
            Point2D::new(0.6, 0.3),
            Point2D::new(0.6, 0.9),
            bw,
        );
        let d = Deployment::new(Arena::Plane, vec![v, i], vec![]);
        let s = strong_interferers(0, &d, &RadioModel::default()).unwrap();
        assert!(s.set().unwrap().is_empty());
    }

    #[test]
    fn invalid_index() {
        let d = Deployment::new(Arena::Plane, vec![victim(TAU)], vec![]);
        assert!(matches!(
            strong_interferers(3, &d, &RadioModel::default()),
            Err(Error::InvalidIndex { index: 3, len: 1 })
        ));
    }

    #[test]
    fn out_of_range_link_is_coverage_failed() {
        let far = DirectedLink::aligned(
            &Arena::Plane,
            Point2D::new(0.0, 0.0),
            Point2D::new(5.0, 0.0),
            TAU,
        );
        let d = Deployment::new(Arena::Plane, vec![far], vec![]);
        assert_eq!(
            strong_interferers(0, &d, &RadioModel::default()).unwrap(),
            StrongInterferers::CoverageFailed
        );
    }

    #[test]
    fn map_and_direct_routes_agree() {
        let s = Scenario::preset(0.5, 30.0);
        let r = s.resolve().unwrap();
        for seed in 0..10 {
            let d = r.sample(seed);
            let map = InterferenceMap::build(&d, &r.model);
            for i in 0..d.len() {
                assert_eq!(
                    strong_interferers(i, &d, &r.model).unwrap(),
                    strong_interferers_from_map(&map, i)
                );
            }
        }
    }

    #[test]
    fn single_link_histogram_is_degenerate() {
        let s = Scenario::preset(0.01, 45.0)
            .with_obstacle_density(0.0)
            .with_fixed_links(1);
        let rep = collision_domain_histogram(&s, 50, 1, DomainMode::Pairwise).unwrap();
        assert_eq!(rep.histogram.sizes(), BTreeMap::from([(1, 1.0)]));
        assert_eq!(rep.coverage_failed, 0);
    }

    #[test]
    fn component_sizes_dominate_pairwise() {
        let s = Scenario::preset(1.0, 60.0);
        let r = s.resolve().unwrap();
        for seed in 0..5 {
            let map = InterferenceMap::build(&r.sample(seed), &r.model);
            let a = domain_sizes(&map, DomainMode::Pairwise);
            let b = domain_sizes(&map, DomainMode::Component);
            for (x, y) in a.iter().zip(&b) {
                match (x, y) {
                    (Some(x), Some(y)) => assert!(y >= x),
                    (None, None) => {}
                    _ => panic!("coverage status differs"),
                }
            }
        }
    }

    #[test]
    fn single_link_never_collides() {
        let s = Scenario::preset(0.01, 25.0).with_fixed_links(1);
        let e = estimate_collision_probability(&s, 1.0, 200, 3).unwrap();
        assert_eq!(e.collisions, 0);
        assert_eq!(e.probability, 0.0);
    }

    #[test]
    fn rejects_bad_probability() {
        let s = Scenario::preset(0.1, 25.0);
        assert!(estimate_collision_probability(&s, 1.5, 10, 0).is_err());
        assert!(estimate_collision_probability(&s, 0.5, 0, 0).is_err());
    }
}
