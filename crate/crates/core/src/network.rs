//! Random 2-D networks of anchors and blind nodes, and the radio-range
//! limited edge sets between them.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions are quantized to this grid (1 µm) so the six-decimal text form
/// round-trips exactly.
const POSITION_QUANTUM: f64 = 1e6;

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Width and height of the deployment area, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub const fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn contains(&self, p: &Point2) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

impl Default for Area {
    fn default() -> Self {
        Self::new(30.0, 30.0)
    }
}

/// Ground truth for one trial.
///
/// Blind nodes are indexed `0..m` and anchors `0..n_anchors` in their own
/// lists. In the global 1-based numbering used by the CSV outputs, blind node
/// `i` is `i + 1` and anchor `r` is `m + r + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub blind: Vec<Point2>,
    pub anchors: Vec<Point2>,
    pub area: Area,
    pub seed: u64,
}

impl Network {
    pub fn m(&self) -> usize {
        self.blind.len()
    }

    pub fn n_anchors(&self) -> usize {
        self.anchors.len()
    }

    /// Global 1-based index of anchor `r`.
    pub fn anchor_global_index(&self, r: usize) -> usize {
        self.m() + r + 1
    }

    /// Writes the network as line-oriented text with six-decimal positions.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# sdploc network v1\n");
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "area {} {}", self.area.width, self.area.height);
        for (i, p) in self.blind.iter().enumerate() {
            let _ = writeln!(out, "blind {} {:.6} {:.6}", i, p.x, p.y);
        }
        for (r, p) in self.anchors.iter().enumerate() {
            let _ = writeln!(out, "anchor {} {:.6} {:.6}", r, p.x, p.y);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut area = None;
        let mut blind = Vec::new();
        let mut anchors = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                let v: f64 = fields
                    .get(k)
                    .ok_or_else(|| bad("missing field"))?
                    .parse()
                    .map_err(|_| bad("invalid number"))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad("non-finite number"))
                }
            };
            match fields[0] {
                "seed" => {
                    seed = Some(
                        fields
                            .get(1)
                            .and_then(|s| s.parse::<u64>().ok())
                            .ok_or_else(|| bad("invalid seed"))?,
                    )
                }
                "area" => area = Some(Area::new(num(1)?, num(2)?)),
                kind @ ("blind" | "anchor") => {
                    let idx: usize = fields
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("invalid index"))?;
                    let list = if kind == "blind" { &mut blind } else { &mut anchors };
                    if idx != list.len() {
                        return Err(bad("indices must be consecutive from 0"));
                    }
                    list.push(Point2::new(num(2)?, num(3)?));
                }
                other => return Err(bad(&format!("unknown record `{other}`"))),
            }
        }
        let area = area.ok_or_else(|| Error::Parse("missing `area` record".into()))?;
        let net = Network {
            blind,
            anchors,
            area,
            seed: seed.unwrap_or(0),
        };
        if let Some(p) = net.blind.iter().chain(&net.anchors).find(|p| !area.contains(p)) {
            return Err(Error::Parse(format!(
                "point ({}, {}) lies outside the {}x{} area",
                p.x, p.y, area.width, area.height
            )));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn uniform_coord<R: Rng>(rng: &mut R, extent: f64) -> f64 {
    let v = rng.random::<f64>() * extent;
    ((v * POSITION_QUANTUM).round() / POSITION_QUANTUM).min(extent)
}

/// Draws `m` blind nodes and `n_anchors` anchors independently and uniformly
/// over `area`. Blind nodes are drawn first, then anchors, from one ChaCha8
/// stream seeded with `seed`.
pub fn generate_network(seed: u64, area: Area, m: usize, n_anchors: usize) -> Network {
    assert!(
        area.width > 0.0 && area.height > 0.0,
        "area dimensions must be positive"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |count: usize| -> Vec<Point2> {
        (0..count)
            .map(|_| {
                let x = uniform_coord(&mut rng, area.width);
                let y = uniform_coord(&mut rng, area.height);
                Point2::new(x, y)
            })
            .collect()
    };
    let blind = draw(m);
    let anchors = draw(n_anchors);
    Network {
        blind,
        anchors,
        area,
        seed,
    }
}

/// Blind-blind pairs `(i, j)` with `i < j` and blind-anchor pairs `(i, r)`
/// whose true separation is at most `rho`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeSets {
    pub blind_blind: Vec<(usize, usize)>,
    pub blind_anchor: Vec<(usize, usize)>,
    pub rho: f64,
}

impl EdgeSets {
    pub fn len(&self) -> usize {
        self.blind_blind.len() + self.blind_anchor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All edges in id order: blind-blind first, then blind-anchor.
    pub fn iter(&self) -> impl Iterator<Item = Edge> + '_ {
        self.blind_blind
            .iter()
            .map(|&(i, j)| Edge::BlindBlind(i, j))
            .chain(self.blind_anchor.iter().map(|&(i, r)| Edge::BlindAnchor(i, r)))
    }
}

/// One link of the network. Indices are 0-based within their node list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    BlindBlind(usize, usize),
    BlindAnchor(usize, usize),
}

impl Edge {
    pub fn true_distance(&self, net: &Network) -> f64 {
        match *self {
            Edge::BlindBlind(i, j) => net.blind[i].dist(&net.blind[j]),
            Edge::BlindAnchor(i, r) => net.blind[i].dist(&net.anchors[r]),
        }
    }
}

/// Builds both edge sets. The boundary `‖·‖ = rho` counts as connected.
///
/// Pairs are listed in lexicographic order, which makes edge ids stable.
pub fn build_edge_sets(net: &Network, rho: f64) -> EdgeSets {
    assert!(rho > 0.0, "radio range must be positive");
    let mut blind_blind = Vec::new();
    let mut blind_anchor = Vec::new();
    for (i, si) in net.blind.iter().enumerate() {
        for (j, sj) in net.blind.iter().enumerate().skip(i + 1) {
            if si.dist(sj) <= rho {
                blind_blind.push((i, j));
            }
        }
    }
    for (i, si) in net.blind.iter().enumerate() {
        for (r, ar) in net.anchors.iter().enumerate() {
            if si.dist(ar) <= rho {
                blind_anchor.push((i, r));
            }
        }
    }
    EdgeSets {
        blind_blind,
        blind_anchor,
        rho,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityReport {
    /// Number of incident edges (blind or anchor) per blind node.
    pub degree: Vec<usize>,
    /// Anchor links per blind node.
    pub anchor_degree: Vec<usize>,
    /// Blind nodes with no links at all.
    pub isolated: usize,
    /// Blind nodes with fewer than three anchor-or-blind links; these cannot
    /// be pinned down in the plane.
    pub underconnected: usize,
}

pub fn connectivity_report(net: &Network, edges: &EdgeSets) -> ConnectivityReport {
    let m = net.m();
    let mut degree = vec![0usize; m];
    let mut anchor_degree = vec![0usize; m];
    for &(i, j) in &edges.blind_blind {
        degree[i] += 1;
        degree[j] += 1;
    }
    for &(i, _) in &edges.blind_anchor {
        degree[i] += 1;
        anchor_degree[i] += 1;
    }
    let isolated = degree.iter().filter(|&&d| d == 0).count();
    let underconnected = degree.iter().filter(|&&d| d < 3).count();
    ConnectivityReport {
        degree,
        anchor_degree,
        isolated,
        underconnected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net_of(blind: &[(f64, f64)], anchors: &[(f64, f64)]) -> Network {
        Network {
            blind: blind.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
            anchors: anchors.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
            area: Area::new(100.0, 100.0),
            seed: 0,
        }
    }

    #[test]
    fn generates_requested_counts_inside_area() {
        let net = generate_network(1, Area::new(30.0, 30.0), 50, 10);
        assert_eq!(net.m(), 50);
        assert_eq!(net.n_anchors(), 10);
        assert!(net.blind.iter().chain(&net.anchors).all(|p| net.area.contains(p)));
    }

    #[test]
    fn empty_network() {
        let net = generate_network(1, Area::new(30.0, 30.0), 0, 0);
        assert!(net.blind.is_empty() && net.anchors.is_empty());
        assert!(build_edge_sets(&net, 15.0).is_empty());
    }

    #[test]
    fn same_seed_same_network() {
        let a = generate_network(7, Area::new(30.0, 30.0), 20, 5);
        let b = generate_network(7, Area::new(30.0, 30.0), 20, 5);
        assert_eq!(a, b);
        let c = generate_network(8, Area::new(30.0, 30.0), 20, 5);
        assert_ne!(a, c);
    }

    #[test]
    fn pair_within_range() {
        let net = net_of(&[(0.0, 0.0), (0.0, 10.0)], &[]);
        assert_eq!(build_edge_sets(&net, 15.0).blind_blind, vec![(0, 1)]);
    }

    #[test]
    fn pair_out_of_range() {
        let net = net_of(&[(0.0, 0.0), (0.0, 16.0)], &[]);
        assert!(build_edge_sets(&net, 15.0).blind_blind.is_empty());
    }

    #[test]
    fn boundary_is_inclusive() {
        let net = net_of(&[(0.0, 0.0), (3.0, 4.0)], &[(0.0, -5.0)]);
        let e = build_edge_sets(&net, 5.0);
        assert_eq!(e.blind_blind, vec![(0, 1)]);
        assert_eq!(e.blind_anchor, vec![(0, 0)]);
    }

    #[test]
    fn coincident_points_connect() {
        let net = net_of(&[(1.0, 1.0), (1.0, 1.0)], &[]);
        let e = build_edge_sets(&net, 1.0);
        assert_eq!(e.blind_blind, vec![(0, 1)]);
    }

    #[test]
    fn lone_blind_node_is_isolated() {
        let net = net_of(&[(1.0, 1.0)], &[]);
        let rep = connectivity_report(&net, &build_edge_sets(&net, 15.0));
        assert_eq!(rep.isolated, 1);
        assert_eq!(rep.degree, vec![0]);
    }

    #[test]
    fn triangle_degrees() {
        let net = net_of(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], &[]);
        let rep = connectivity_report(&net, &build_edge_sets(&net, 2.0));
        assert_eq!(rep.degree, vec![2, 2, 2]);
        assert_eq!(rep.isolated, 0);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let net = generate_network(3, Area::new(30.0, 30.0), 12, 4);
        let back = Network::from_text(&net.to_text()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn text_rejects_points_outside_area() {
        let text = "area 10 10\nblind 0 11.0 1.0\n";
        assert!(Network::from_text(text).is_err());
    }

    #[test]
    fn global_indices_follow_blind_then_anchor_numbering() {
        let net = net_of(&[(0.0, 0.0), (1.0, 0.0)], &[(2.0, 0.0)]);
        assert_eq!(net.anchor_global_index(0), 3);
    }
}
