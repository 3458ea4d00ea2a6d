//! TOA ranging error model: true distance plus zero-mean AWGN plus a normal
//! LOS or NLOS bias term drawn per link.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::network::{Edge, EdgeSets, Network};

/// Which error terms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Ideal,
    NoiseOnly,
    NoisePlusMultipath,
}

impl ChannelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelKind::Ideal => "ideal",
            ChannelKind::NoiseOnly => "noise",
            ChannelKind::NoisePlusMultipath => "multipath",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Some(ChannelKind::Ideal),
            "noise" | "noise_only" | "noise-only" => Some(ChannelKind::NoiseOnly),
            "multipath" | "nlos" | "noise_plus_multipath" | "noise-plus-multipath" => {
                Some(ChannelKind::NoisePlusMultipath)
            }
            _ => None,
        }
    }
}

/// How the NLOS fraction is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlosMode {
    /// A fraction of blind nodes is NLOS; every link touching one is NLOS.
    PerNode,
    /// A fraction of the links is NLOS.
    PerMeasurement,
}

/// Normal bias with mean in meters and variance in m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasModel {
    pub mean: f64,
    pub variance: f64,
}

impl BiasModel {
    pub const fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    pub const ZERO: BiasModel = BiasModel::new(0.0, 0.0);

    fn sample(&self, z: f64) -> f64 {
        self.mean + self.variance.sqrt() * z
    }
}

/// Measured LOS TOA ranging error: mean 6.98 m, variance 1.87 m².
pub const LOS_BIAS: BiasModel = BiasModel::new(6.98, 1.87);
/// Measured NLOS TOA ranging error: mean 16.06 m, variance 0.68 m².
pub const NLOS_BIAS: BiasModel = BiasModel::new(16.06, 0.68);
/// Receiver noise variance, m².
pub const AWGN_VARIANCE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    pub enabled: ChannelKind,
    pub awgn_variance: f64,
    pub los_bias: BiasModel,
    pub nlos_bias: BiasModel,
    pub nlos_fraction: f64,
    pub nlos_mode: NlosMode,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            enabled: ChannelKind::Ideal,
            awgn_variance: AWGN_VARIANCE,
            los_bias: LOS_BIAS,
            nlos_bias: NLOS_BIAS,
            nlos_fraction: 0.5,
            nlos_mode: NlosMode::PerNode,
        }
    }
}

impl ChannelModel {
    pub fn with_kind(kind: ChannelKind) -> Self {
        Self {
            enabled: kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            (self.awgn_variance, "awgn_variance"),
            (self.los_bias.variance, "los_bias.variance"),
            (self.nlos_bias.variance, "nlos_bias.variance"),
        ];
        for (v, name) in checks {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if !self.los_bias.mean.is_finite() || !self.nlos_bias.mean.is_finite() {
            return Err("bias means must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.nlos_fraction) {
            return Err(format!(
                "nlos_fraction must lie in [0, 1], got {}",
                self.nlos_fraction
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Propagation {
    /// No propagation bias (ideal or noise-only channel).
    None,
    Los,
    Nlos,
}

impl Propagation {
    pub fn label(&self) -> &'static str {
        match self {
            Propagation::None => "none",
            Propagation::Los => "los",
            Propagation::Nlos => "nlos",
        }
    }
}

/// Labels each edge (in `EdgeSets::iter` order) with its propagation
/// condition. Non-multipath channels get `Propagation::None` everywhere.
pub fn assign_nlos<R: Rng + ?Sized>(
    net: &Network,
    edges: &EdgeSets,
    model: &ChannelModel,
    rng: &mut R,
) -> Vec<Propagation> {
    if model.enabled != ChannelKind::NoisePlusMultipath {
        return vec![Propagation::None; edges.len()];
    }
    match model.nlos_mode {
        NlosMode::PerNode => {
            let nlos_node = select_nlos_nodes(net.m(), model.nlos_fraction, rng);
            edges
                .iter()
                .map(|e| {
                    let nlos = match e {
                        Edge::BlindBlind(i, j) => nlos_node[i] || nlos_node[j],
                        Edge::BlindAnchor(i, _) => nlos_node[i],
                    };
                    if nlos {
                        Propagation::Nlos
                    } else {
                        Propagation::Los
                    }
                })
                .collect()
        }
        NlosMode::PerMeasurement => {
            let total = edges.len();
            let count = fraction_count(model.nlos_fraction, total);
            let mut labels = vec![Propagation::Los; total];
            for k in index::sample(rng, total, count) {
                labels[k] = Propagation::Nlos;
            }
            labels
        }
    }
}

/// Marks exactly `round(fraction * m)` blind nodes as NLOS, chosen uniformly
/// without replacement.
pub fn select_nlos_nodes<R: Rng + ?Sized>(m: usize, fraction: f64, rng: &mut R) -> Vec<bool> {
    let mut nlos_node = vec![false; m];
    for i in index::sample(rng, m, fraction_count(fraction, m)) {
        nlos_node[i] = true;
    }
    nlos_node
}

fn fraction_count(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64).round() as usize).min(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeRecord {
    pub edge: Edge,
    pub true_distance: f64,
    pub propagation: Propagation,
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RangeMeasurements {
    /// One record per edge, in `EdgeSets::iter` order.
    pub records: Vec<RangeRecord>,
    /// Records whose raw draw fell below zero and were clamped.
    pub clamped: usize,
}

impl RangeMeasurements {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RangeRecord> {
        self.records.iter()
    }

    /// Exact measurements: every measured distance equals the true one.
    pub fn exact(net: &Network, edges: &EdgeSets) -> Self {
        let labels = vec![Propagation::None; edges.len()];
        let mut unused = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        measure_ranges(
            net,
            edges,
            &labels,
            &ChannelModel::with_kind(ChannelKind::Ideal),
            &mut unused,
        )
    }

    /// CSV with columns `edge_kind,i,j,true_m,label,measured_m`. Node indices
    /// use the global 1-based numbering (blind nodes first, then anchors).
    pub fn to_csv(&self, m: usize) -> String {
        let mut out = String::from("edge_kind,i,j,true_m,label,measured_m\n");
        for rec in &self.records {
            let (kind, i, j) = match rec.edge {
                Edge::BlindBlind(i, j) => ("blind_blind", i + 1, j + 1),
                Edge::BlindAnchor(i, r) => ("blind_anchor", i + 1, m + r + 1),
            };
            let _ = writeln!(
                out,
                "{kind},{i},{j},{:.9},{},{:.9}",
                rec.true_distance,
                rec.propagation.label(),
                rec.measured
            );
        }
        out
    }
}

/// Draws one measured distance per edge.
///
/// Each edge consumes exactly two standard-normal draws (AWGN then bias)
/// whatever its label, so channels that differ only in bias settings see the
/// same noise realisation for the same stream.
pub fn measure_ranges<R: Rng + ?Sized>(
    net: &Network,
    edges: &EdgeSets,
    labels: &[Propagation],
    model: &ChannelModel,
    rng: &mut R,
) -> RangeMeasurements {
    let ideal = model.enabled == ChannelKind::Ideal;
    let multipath = model.enabled == ChannelKind::NoisePlusMultipath;
    assert!(
        !multipath || labels.len() == edges.len(),
        "propagation labels must cover every edge"
    );
    let noise_sd = model.awgn_variance.sqrt();
    let mut clamped = 0;
    let records = edges
        .iter()
        .enumerate()
        .map(|(k, edge)| {
            let true_distance = edge.true_distance(net);
            if ideal {
                return RangeRecord {
                    edge,
                    true_distance,
                    propagation: Propagation::None,
                    measured: true_distance,
                };
            }
            let z_noise: f64 = rng.sample(StandardNormal);
            let z_bias: f64 = rng.sample(StandardNormal);
            let propagation = if multipath { labels[k] } else { Propagation::None };
            let bias = match propagation {
                Propagation::None => 0.0,
                Propagation::Los => model.los_bias.sample(z_bias),
                Propagation::Nlos => model.nlos_bias.sample(z_bias),
            };
            let raw = true_distance + noise_sd * z_noise + bias;
            if raw < 0.0 {
                clamped += 1;
            }
            RangeRecord {
                edge,
                true_distance,
                propagation,
                measured: raw.max(0.0),
            }
        })
        .collect();
    RangeMeasurements { records, clamped }
}
