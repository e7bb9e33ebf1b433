//! Random deployments of directed links and thin obstacles, plus the
//! line-of-sight queries the radio model needs.
//!
//! Deployments live on a torus by default: every displacement uses the
//! minimum-image convention, so links near the arena border see the same
//! statistical surroundings as links in the middle. Obstacles are stored
//! with their midpoint inside the arena; their endpoints may stick out and
//! are matched against paths through the nearest periodic image.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Point2D,
    pub end: Point2D,
}

impl Segment {
    pub const fn new(start: Point2D, end: Point2D) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        (self.end.x - self.start.x).hypot(self.end.y - self.start.y)
    }

    pub fn midpoint(&self) -> Point2D {
        Point2D::new(
            0.5 * (self.start.x + self.end.x),
            0.5 * (self.start.y + self.end.y),
        )
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.end, self.start)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.start.offset(dx, dy), self.end.offset(dx, dy))
    }

    fn bbox_overlaps(&self, other: &Segment) -> bool {
        let (ax0, ax1) = minmax(self.start.x, self.end.x);
        let (ay0, ay1) = minmax(self.start.y, self.end.y);
        let (bx0, bx1) = minmax(other.start.x, other.end.x);
        let (by0, by1) = minmax(other.start.y, other.end.y);
        ax0 <= bx1 && bx0 <= ax1 && ay0 <= by1 && by0 <= ay1
    }
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Twice the signed area of the triangle `(a, b, c)`.
fn orient(a: Point2D, b: Point2D, c: Point2D) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// `p` lies within the bounding box of `a`-`b` (collinearity checked by the
/// caller).
fn within_box(a: Point2D, b: Point2D, p: Point2D) -> bool {
    let (x0, x1) = minmax(a.x, b.x);
    let (y0, y1) = minmax(a.y, b.y);
    x0 <= p.x && p.x <= x1 && y0 <= p.y && p.y <= y1
}

/// True iff the closed segments share at least one point. Touching at an
/// endpoint counts as an intersection.
pub fn segments_intersect(a: &Segment, b: &Segment) -> bool {
    let d1 = orient(b.start, b.end, a.start);
    let d2 = orient(b.start, b.end, a.end);
    let d3 = orient(a.start, a.end, b.start);
    let d4 = orient(a.start, a.end, b.end);

    let straddles = |u: f64, v: f64| (u > 0.0 && v < 0.0) || (u < 0.0 && v > 0.0);
    if straddles(d1, d2) && straddles(d3, d4) {
        return true;
    }

    (d1 == 0.0 && within_box(b.start, b.end, a.start))
        || (d2 == 0.0 && within_box(b.start, b.end, a.end))
        || (d3 == 0.0 && within_box(a.start, a.end, b.start))
        || (d4 == 0.0 && within_box(a.start, a.end, b.end))
}

pub const DEFAULT_PENETRATION_LOSS_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub segment: Segment,
    pub penetration_loss_db: f64,
}

impl Obstacle {
    pub fn new(start: Point2D, end: Point2D) -> Self {
        Self {
            segment: Segment::new(start, end),
            penetration_loss_db: DEFAULT_PENETRATION_LOSS_DB,
        }
    }
}

/// Number of obstacles whose segment meets `path` in the plane.
pub fn count_blockers(path: &Segment, obstacles: &[Obstacle]) -> usize {
    obstacles
        .iter()
        .filter(|o| path.bbox_overlaps(&o.segment) && segments_intersect(path, &o.segment))
        .count()
}

/// The surface links live on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arena {
    Plane,
    Torus { width: f64, height: f64 },
}

fn min_image(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

impl Arena {
    /// Shortest displacement vector from `from` to `to`.
    pub fn displacement(&self, from: Point2D, to: Point2D) -> (f64, f64) {
        let (dx, dy) = (to.x - from.x, to.y - from.y);
        match *self {
            Arena::Plane => (dx, dy),
            Arena::Torus { width, height } => (min_image(dx, width), min_image(dy, height)),
        }
    }

    pub fn distance(&self, from: Point2D, to: Point2D) -> f64 {
        let (dx, dy) = self.displacement(from, to);
        dx.hypot(dy)
    }

    /// Direction of `to` as seen from `from`, in `(-pi, pi]`.
    pub fn bearing(&self, from: Point2D, to: Point2D) -> f64 {
        let (dx, dy) = self.displacement(from, to);
        dy.atan2(dx)
    }

    pub fn wrap(&self, p: Point2D) -> Point2D {
        match *self {
            Arena::Plane => p,
            Arena::Torus { width, height } => {
                Point2D::new(p.x.rem_euclid(width), p.y.rem_euclid(height))
            }
        }
    }

    /// Obstacles crossed by the geodesic path from `from` to `to`. Each
    /// obstacle counts at most once even if several of its periodic images
    /// touch the path.
    pub fn blockers(&self, from: Point2D, to: Point2D, obstacles: &[Obstacle]) -> usize {
        let (dx, dy) = self.displacement(from, to);
        let path = Segment::new(from, from.offset(dx, dy));
        match *self {
            Arena::Plane => count_blockers(&path, obstacles),
            Arena::Torus { width, height } => {
                let mid = path.midpoint();
                obstacles
                    .iter()
                    .filter(|o| {
                        let seg = o.segment;
                        let om = seg.midpoint();
                        let sx = -width * ((om.x - mid.x) / width).round();
                        let sy = -height * ((om.y - mid.y) / height).round();
                        let nearest = seg.translated(sx, sy);
                        let hits =
                            |s: &Segment| path.bbox_overlaps(s) && segments_intersect(&path, s);
                        let ext_x = (seg.end.x - seg.start.x).abs();
                        let ext_y = (seg.end.y - seg.start.y).abs();
                        if ext_x < 0.5 * width && ext_y < 0.5 * height {
                            // a path spans at most half a period per axis, so
                            // only the nearest image can reach it
                            hits(&nearest)
                        } else {
                            (-1..=1).any(|i| {
                                (-1..=1).any(|j| {
                                    hits(&nearest.translated(i as f64 * width, j as f64 * height))
                                })
                            })
                        }
                    })
                    .count()
            }
        }
    }

    /// Sum of the penetration losses, dB, of every obstacle crossed by the
    /// geodesic path.
    pub fn penetration_loss_db(&self, from: Point2D, to: Point2D, obstacles: &[Obstacle]) -> f64 {
        let Some(first) = obstacles.first() else {
            return 0.0;
        };
        let uniform = first.penetration_loss_db;
        if obstacles.iter().all(|o| o.penetration_loss_db == uniform) {
            return uniform * self.blockers(from, to, obstacles) as f64;
        }
        obstacles
            .iter()
            .filter(|o| self.blockers(from, to, std::slice::from_ref(o)) > 0)
            .map(|o| o.penetration_loss_db)
            .sum()
    }
}

/// An aligned transmitter-receiver pair: both boresights point exactly at
/// the peer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectedLink {
    pub tx: Point2D,
    pub rx: Point2D,
    pub tx_boresight: f64,
    pub rx_boresight: f64,
    pub beamwidth: f64,
}

impl DirectedLink {
    pub fn aligned(arena: &Arena, tx: Point2D, rx: Point2D, beamwidth: f64) -> Self {
        let tx_boresight = arena.bearing(tx, rx);
        let rx_boresight = arena.bearing(rx, tx);
        Self {
            tx,
            rx,
            tx_boresight,
            rx_boresight,
            beamwidth,
        }
    }

    pub fn length(&self, arena: &Arena) -> f64 {
        arena.distance(self.tx, self.rx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    pub arena_width: f64,
    pub arena_height: f64,
    /// Links per square meter.
    pub link_density: f64,
    /// Obstacles per square meter.
    pub obstacle_density: f64,
    pub link_length_max: f64,
    /// Operating beamwidth of every link, radians.
    pub beamwidth: f64,
    pub penetration_loss_db: f64,
    /// Replaces the Poisson link count when set.
    #[serde(default)]
    pub fixed_link_count: Option<usize>,
    pub seed: u64,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            arena_width: 10.0,
            arena_height: 10.0,
            link_density: 0.25,
            obstacle_density: 0.25,
            link_length_max: 3.0,
            beamwidth: TAU,
            penetration_loss_db: DEFAULT_PENETRATION_LOSS_DB,
            fixed_link_count: None,
            seed: 0,
        }
    }
}

impl DeploymentConfig {
    pub fn area(&self) -> f64 {
        self.arena_width * self.arena_height
    }

    pub fn arena(&self) -> Arena {
        Arena::Torus {
            width: self.arena_width,
            height: self.arena_height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("arena_width", self.arena_width),
            ("arena_height", self.arena_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        for (field, v) in [
            ("link_density", self.link_density),
            ("obstacle_density", self.obstacle_density),
            ("penetration_loss_db", self.penetration_loss_db),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.link_length_max.is_finite() && self.link_length_max > 0.0) {
            return Err(Error::config(
                "link_length_max",
                format!("must be positive, got {}", self.link_length_max),
            ));
        }
        if !(self.beamwidth > 0.0 && self.beamwidth <= TAU) {
            return Err(Error::config(
                "beamwidth",
                format!("must lie in (0, 2pi], got {}", self.beamwidth),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub arena: Arena,
    pub links: Vec<DirectedLink>,
    pub obstacles: Vec<Obstacle>,
    pub config: Option<DeploymentConfig>,
    pub seed: Option<u64>,
}

impl Deployment {
    /// A hand-built deployment without a generating config.
    pub fn new(arena: Arena, links: Vec<DirectedLink>, obstacles: Vec<Obstacle>) -> Self {
        Self {
            arena,
            links,
            obstacles,
            config: None,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Obstacles on the geodesic path between two points.
    pub fn blockers(&self, from: Point2D, to: Point2D) -> usize {
        self.arena.blockers(from, to, &self.obstacles)
    }

    /// Total penetration loss, dB, accumulated along a path.
    pub fn penetration_loss_db(&self, from: Point2D, to: Point2D) -> f64 {
        self.arena.penetration_loss_db(from, to, &self.obstacles)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as usize
}

/// Draw a deployment: Poisson link and obstacle counts, uniform transmitter
/// positions, receivers at a uniform bearing and uniform distance on
/// `(0, link_length_max]`, and obstacles with uniform midpoint, orientation
/// on `[0, pi)` and length on `(0, 1]`.
pub fn sample_deployment(cfg: &DeploymentConfig) -> Result<Deployment> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let arena = cfg.arena();
    let area = cfg.area();

    let n_links = match cfg.fixed_link_count {
        Some(n) => n,
        None => poisson_count(cfg.link_density * area, &mut rng),
    };
    let n_obstacles = poisson_count(cfg.obstacle_density * area, &mut rng);

    let mut links = Vec::with_capacity(n_links);
    while links.len() < n_links {
        let tx = Point2D::new(
            rng.random::<f64>() * cfg.arena_width,
            rng.random::<f64>() * cfg.arena_height,
        );
        let angle = rng.random::<f64>() * TAU;
        let dist = cfg.link_length_max * (1.0 - rng.random::<f64>());
        let rx = arena.wrap(tx.offset(dist * angle.cos(), dist * angle.sin()));
        if arena.distance(tx, rx) > 0.0 {
            links.push(DirectedLink::aligned(&arena, tx, rx, cfg.beamwidth));
        }
    }

    let obstacles = (0..n_obstacles)
        .map(|_| {
            let mid = Point2D::new(
                rng.random::<f64>() * cfg.arena_width,
                rng.random::<f64>() * cfg.arena_height,
            );
            let phi = rng.random::<f64>() * PI;
            let half = 0.5 * (1.0 - rng.random::<f64>());
            let (hx, hy) = (half * phi.cos(), half * phi.sin());
            Obstacle {
                segment: Segment::new(mid.offset(-hx, -hy), mid.offset(hx, hy)),
                penetration_loss_db: cfg.penetration_loss_db,
            }
        })
        .collect();

    Ok(Deployment {
        arena,
        links,
        obstacles,
        config: Some(cfg.clone()),
        seed: Some(cfg.seed),
    })
}
