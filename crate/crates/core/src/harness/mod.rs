//! Seeded Monte-Carlo trials, the three parameter sweeps, and their CSV
//! output.

pub mod svg;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, BiasModel, ChannelKind, ChannelModel, NlosMode, RangeMeasurements};
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::{self, Area, EdgeSets, Network, Point2};
use crate::refine::{self, RefineOptions, RefineOutcome, RefineStatus};
use crate::sdp::{self, SdpProblem, SdpSolution, SolveOptions, SolveStatus};

/// A solve that stopped short of the tolerances is still scored when its
/// relative gap is at most this.
pub const ACCEPT_GAP: f64 = 1e-5;
/// Same, for the relative primal and dual infeasibility.
pub const ACCEPT_FEAS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ChannelKind,
    #[serde(rename = "box")]
    pub area: Area,
    pub m: usize,
    pub n_anchors: usize,
    /// Radio range, meters.
    pub rho: f64,
    pub channel: ChannelModel,
    /// Trials per sweep point (L).
    pub trials: usize,
    pub base_seed: u64,
    pub solver: SolveOptions,
    pub refine: RefineOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ChannelKind::Ideal,
            area: Area::default(),
            m: 50,
            n_anchors: 10,
            rho: 15.0,
            channel: ChannelModel::default(),
            trials: 100,
            base_seed: 1,
            solver: SolveOptions::default(),
            refine: RefineOptions::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn with_scenario(scenario: ChannelKind) -> Self {
        Self {
            scenario,
            ..Self::default()
        }
    }

    /// The channel model actually used: `channel` with the scenario's error
    /// terms switched on.
    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            enabled: self.scenario,
            ..self.channel
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.area.width > 0.0 && self.area.height > 0.0)
            || !self.area.width.is_finite()
            || !self.area.height.is_finite()
        {
            return bad(format!(
                "box must have positive finite sides, got {} x {}",
                self.area.width, self.area.height
            ));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.solver.max_iter < 1 || !(self.solver.gap_tol > 0.0) || !(self.solver.feas_tol > 0.0) {
            return bad("solver options must be positive".into());
        }
        self.channel.validate().map_err(Error::Config)?;
        self.refine.validate().map_err(Error::Config)?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// The NLOS fraction that affects measurements, zero outside the
    /// multipath scenario.
    pub fn effective_nlos_fraction(&self) -> f64 {
        match self.scenario {
            ChannelKind::NoisePlusMultipath => self.channel.nlos_fraction,
            _ => 0.0,
        }
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed `H(base, key, trial)`, chained splitmix64 over the base
/// seed, the bit pattern of the swept value, and the trial index. Single
/// trials outside a sweep use key 0.
pub fn trial_seed(base_seed: u64, key: f64, trial: usize) -> u64 {
    let h = splitmix64(base_seed);
    let h = splitmix64(h ^ key.to_bits());
    splitmix64(h ^ trial as u64)
}

const STREAM_NETWORK: u64 = 0x6E65_7477;
const STREAM_LABELS: u64 = 0x6C61_6265;
const STREAM_RANGES: u64 = 0x7261_6E67;

fn stream(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ tag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Solver(SolveStatus),
    /// No link was within radio range, so there was nothing to solve.
    NoMeasurements,
}

impl TrialStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TrialStatus::Solver(s) => s.label(),
            TrialStatus::NoMeasurements => "no_measurements",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub scenario: ChannelKind,
    /// ‖ŝᵢ − sᵢ‖ per blind node; empty for a failed trial.
    pub node_errors: Vec<f64>,
    /// `None` when the solve failed.
    pub p_m: Option<f64>,
    pub status: TrialStatus,
    pub solver_gap: f64,
    pub solver_iterations: usize,
    pub psd_certified: bool,
    pub refine_status: Option<RefineStatus>,
    pub refine_descended: bool,
    pub n_edges: usize,
    pub clamped: usize,
    /// Blind nodes with fewer than three links.
    pub underconnected: usize,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        self.p_m.is_none()
    }
}

/// Everything produced along the way, for plotting and dumps.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub result: TrialResult,
    pub network: Network,
    pub edges: EdgeSets,
    pub measurements: RangeMeasurements,
    pub problem: Option<SdpProblem>,
    pub solution: Option<SdpSolution>,
    pub refined: Option<RefineOutcome>,
}

impl TrialRun {
    /// Final position estimates, empty for a failed trial.
    pub fn estimates(&self) -> &[Point2] {
        match (&self.refined, self.result.failed()) {
            (Some(r), false) => &r.positions,
            _ => &[],
        }
    }
}

fn solve_accepted(sol: &SdpSolution) -> bool {
    let s = &sol.stats;
    let converged = s.status == SolveStatus::Optimal
        || (s.gap <= ACCEPT_GAP && s.primal_residual <= ACCEPT_FEAS && s.dual_residual <= ACCEPT_FEAS);
    converged && sol.estimated_positions.iter().all(Point2::is_finite)
}

/// One trial with seed `trial_seed(base_seed, 0, trial)`.
pub fn run_trial(config: &ScenarioConfig, trial: usize) -> TrialResult {
    run_trial_detailed(config, trial).result
}

pub fn run_trial_detailed(config: &ScenarioConfig, trial: usize) -> TrialRun {
    run_seeded(config, trial, trial_seed(config.base_seed, 0.0, trial))
}

/// The network a trial with this seed runs on.
pub fn trial_network(config: &ScenarioConfig, seed: u64) -> Network {
    network::generate_network(
        stream(seed, STREAM_NETWORK),
        config.area,
        config.m,
        config.n_anchors,
    )
}

/// The full pipeline for one seed: generate, link, label, measure, relax,
/// solve, refine, score.
pub fn run_seeded(config: &ScenarioConfig, trial: usize, seed: u64) -> TrialRun {
    let net = trial_network(config, seed);
    let edges = network::build_edge_sets(&net, config.rho);
    let model = config.channel_model();
    let mut label_rng = ChaCha8Rng::seed_from_u64(stream(seed, STREAM_LABELS));
    let labels = channel::assign_nlos(&net, &edges, &model, &mut label_rng);
    let mut range_rng = ChaCha8Rng::seed_from_u64(stream(seed, STREAM_RANGES));
    let measurements = channel::measure_ranges(&net, &edges, &labels, &model, &mut range_rng);
    let report = network::connectivity_report(&net, &edges);

    let mut result = TrialResult {
        trial,
        seed,
        scenario: config.scenario,
        node_errors: Vec::new(),
        p_m: None,
        status: TrialStatus::NoMeasurements,
        solver_gap: f64::NAN,
        solver_iterations: 0,
        psd_certified: false,
        refine_status: None,
        refine_descended: false,
        n_edges: edges.len(),
        clamped: measurements.clamped,
        underconnected: report.underconnected,
    };
    let problem = match sdp::build_relaxation(&measurements, &net.anchors, net.m()) {
        Ok(p) => p,
        Err(_) => {
            return TrialRun {
                result,
                network: net,
                edges,
                measurements,
                problem: None,
                solution: None,
                refined: None,
            }
        }
    };
    let solution = sdp::solve_sdp(&problem, &config.solver);
    result.status = TrialStatus::Solver(solution.stats.status);
    result.solver_gap = solution.stats.gap;
    result.solver_iterations = solution.stats.iterations;
    result.psd_certified = solution.stats.psd_certified();

    let refined = refine::refine(
        &solution.estimated_positions,
        &measurements,
        &net.anchors,
        &config.refine,
    );
    result.refine_status = Some(refined.status);
    result.refine_descended = refined.objective <= refined.initial_objective;
    if solve_accepted(&solution) {
        if let Ok(errs) = metrics::node_errors(&refined.positions, &net.blind) {
            result.p_m = Some(errs.iter().sum::<f64>() / errs.len() as f64);
            result.node_errors = errs;
        }
    }
    TrialRun {
        result,
        network: net,
        edges,
        measurements,
        problem: Some(problem),
        solution: Some(solution),
        refined: Some(refined),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Anchors,
    Density,
    NlosFraction,
}

impl SweepKind {
    pub fn label(&self) -> &'static str {
        match self {
            SweepKind::Anchors => "anchors",
            SweepKind::Density => "density",
            SweepKind::NlosFraction => "nlos",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anchors" => Some(SweepKind::Anchors),
            "density" => Some(SweepKind::Density),
            "nlos" | "nlos_fraction" | "nlos-fraction" => Some(SweepKind::NlosFraction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    /// Radio ranges to cross with `values`.
    pub rhos: Vec<f64>,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    /// Anchor counts 3..=25 at the base `m` (50 by default).
    pub fn anchors(base: ScenarioConfig) -> Self {
        Self {
            kind: SweepKind::Anchors,
            values: (3..=25).map(|a| a as f64).collect(),
            rhos: vec![base.rho],
            base,
        }
    }

    /// Blind-node counts 10..=60 with 30% as many anchors.
    pub fn density(base: ScenarioConfig) -> Self {
        Self {
            kind: SweepKind::Density,
            values: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            rhos: vec![base.rho],
            base,
        }
    }

    /// NLOS link fractions 0, 0.1, …, 1 at ρ ∈ {15, 20, 25} with 3 anchors.
    /// LOS links carry no bias here, so fraction 0 is pure noise.
    pub fn nlos_fraction(mut base: ScenarioConfig) -> Self {
        base.channel.nlos_mode = NlosMode::PerMeasurement;
        base.channel.los_bias = BiasModel::ZERO;
        base.n_anchors = 3;
        Self {
            kind: SweepKind::NlosFraction,
            values: (0..=10).map(|k| k as f64 / 10.0).collect(),
            rhos: vec![15.0, 20.0, 25.0],
            base,
        }
    }

    pub fn new(kind: SweepKind, base: ScenarioConfig) -> Self {
        match kind {
            SweepKind::Anchors => Self::anchors(base),
            SweepKind::Density => Self::density(base),
            SweepKind::NlosFraction => Self::nlos_fraction(base),
        }
    }

    pub fn config_at(&self, value: f64, rho: f64) -> ScenarioConfig {
        let mut cfg = self.base;
        cfg.rho = rho;
        match self.kind {
            SweepKind::Anchors => cfg.n_anchors = value as usize,
            SweepKind::Density => {
                cfg.m = value as usize;
                cfg.n_anchors = (0.3 * value).round() as usize;
            }
            SweepKind::NlosFraction => cfg.channel.nlos_fraction = value,
        }
        cfg
    }

    /// `(value, config)` per sweep point, ρ-major.
    pub fn points(&self) -> Vec<(f64, ScenarioConfig)> {
        self.rhos
            .iter()
            .flat_map(|&rho| self.values.iter().map(move |&v| (v, self.config_at(v, rho))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub config: ScenarioConfig,
    pub trials: Vec<TrialResult>,
    /// Mean of P_m over the trials that did not fail.
    pub p_mu: Option<f64>,
    pub variance: Option<f64>,
    pub excluded: usize,
}

impl SweepPoint {
    pub fn from_trials(value: f64, config: ScenarioConfig, trials: Vec<TrialResult>) -> Self {
        let ok: Vec<f64> = trials.iter().filter_map(|t| t.p_m).collect();
        let excluded = trials.len() - ok.len();
        let (p_mu, variance) = match metrics::mean_position_error(&ok) {
            Ok((m, v)) => (Some(m), Some(v)),
            Err(_) => (None, None),
        };
        Self {
            value,
            config,
            trials,
            p_mu,
            variance,
            excluded,
        }
    }
}

/// Runs every trial of every point. Trials are independent and run in
/// parallel; results come back in (point, trial) order.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepPoint> {
    let points = spec.points();
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..points[p].1.trials).map(move |t| (p, t)))
        .collect();
    let results: Vec<TrialResult> = tasks
        .par_iter()
        .map(|&(p, t)| {
            let (value, cfg) = &points[p];
            run_seeded(cfg, t, trial_seed(cfg.base_seed, *value, t)).result
        })
        .collect();
    let mut it = results.into_iter();
    points
        .into_iter()
        .map(|(value, cfg)| {
            let trials: Vec<TrialResult> = it.by_ref().take(cfg.trials).collect();
            SweepPoint::from_trials(value, cfg, trials)
        })
        .collect()
}

pub const TRIAL_HEADER: [&str; 11] = [
    "sweep_kind",
    "swept_value",
    "scenario",
    "rho_m",
    "m",
    "n_anchors",
    "nlos_fraction",
    "trial",
    "seed",
    "P_m_m",
    "solver_status",
];

pub const AGGREGATE_HEADER: [&str; 11] = [
    "sweep_kind",
    "swept_value",
    "scenario",
    "rho_m",
    "m",
    "n_anchors",
    "nlos_fraction",
    "L",
    "P_mu_m",
    "variance_m2",
    "excluded",
];

fn leading_fields(kind: &str, value: Option<f64>, cfg: &ScenarioConfig) -> Vec<String> {
    vec![
        kind.to_string(),
        value.map(|v| v.to_string()).unwrap_or_default(),
        cfg.scenario.label().to_string(),
        cfg.rho.to_string(),
        cfg.m.to_string(),
        cfg.n_anchors.to_string(),
        cfg.effective_nlos_fraction().to_string(),
    ]
}

fn opt9(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

fn trial_record(kind: &str, value: Option<f64>, cfg: &ScenarioConfig, t: &TrialResult) -> Vec<String> {
    let mut rec = leading_fields(kind, value, cfg);
    rec.extend([
        t.trial.to_string(),
        t.seed.to_string(),
        opt9(t.p_m),
        t.status.label().to_string(),
    ]);
    rec
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Per-trial CSV for trials run outside a sweep.
pub fn trials_csv(cfg: &ScenarioConfig, trials: &[TrialResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIAL_HEADER)?;
    for t in trials {
        w.write_record(trial_record("single", None, cfg, t))?;
    }
    finish(w)
}

pub fn sweep_trials_csv(kind: SweepKind, points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIAL_HEADER)?;
    for p in points {
        for t in &p.trials {
            w.write_record(trial_record(kind.label(), Some(p.value), &p.config, t))?;
        }
    }
    finish(w)
}

pub fn sweep_aggregate_csv(kind: SweepKind, points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER)?;
    for p in points {
        let mut rec = leading_fields(kind.label(), Some(p.value), &p.config);
        rec.extend([
            p.trials.len().to_string(),
            opt9(p.p_mu),
            opt9(p.variance),
            p.excluded.to_string(),
        ]);
        w.write_record(rec)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: ChannelKind) -> ScenarioConfig {
        ScenarioConfig {
            m: 8,
            n_anchors: 4,
            trials: 2,
            ..ScenarioConfig::with_scenario(scenario)
        }
    }

    #[test]
    fn defaults() {
        let c = ScenarioConfig::default();
        assert_eq!((c.area.width, c.area.height, c.rho, c.trials), (30.0, 30.0, 15.0, 100));
        assert_eq!(c.channel.awgn_variance, 0.3);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_rejection() {
        let c = small(ChannelKind::NoisePlusMultipath);
        assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
        let partial = ScenarioConfig::from_toml("scenario = \"noise_only\"\nm = 20\n").unwrap();
        assert_eq!(partial.m, 20);
        assert_eq!(partial.rho, 15.0);
        assert!(ScenarioConfig::from_toml("bogus = 1\n").is_err());
        assert!(ScenarioConfig::from_toml("rho = -1.0\n").is_err());
    }

    #[test]
    fn seeds_differ_by_every_input() {
        let s = trial_seed(1, 5.0, 0);
        assert_eq!(s, trial_seed(1, 5.0, 0));
        assert_ne!(s, trial_seed(2, 5.0, 0));
        assert_ne!(s, trial_seed(1, 6.0, 0));
        assert_ne!(s, trial_seed(1, 5.0, 1));
    }

    #[test]
    fn trial_is_deterministic() {
        let c = small(ChannelKind::NoiseOnly);
        assert_eq!(run_trial(&c, 3), run_trial(&c, 3));
    }

    #[test]
    fn ideal_trial_is_exact() {
        let r = run_trial(&small(ChannelKind::Ideal), 0);
        assert!(r.p_m.unwrap() < 1e-4, "{r:?}");
        assert_eq!(r.node_errors.len(), 8);
    }

    #[test]
    fn no_links_is_flagged() {
        let c = ScenarioConfig {
            rho: 1e-9,
            ..small(ChannelKind::Ideal)
        };
        let r = run_trial(&c, 0);
        assert!(r.failed());
        assert_eq!(r.status.label(), "no_measurements");
    }

    #[test]
    fn sweep_points() {
        let base = ScenarioConfig::default();
        let a = SweepSpec::anchors(base);
        assert_eq!(a.values.len(), 23);
        assert_eq!(a.config_at(7.0, 15.0).n_anchors, 7);
        let d = SweepSpec::density(base);
        let pts = d.points();
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[4].1.m, pts[4].1.n_anchors), (50, 15));
        assert_eq!((pts[0].1.m, pts[0].1.n_anchors), (10, 3));
        let n = SweepSpec::nlos_fraction(ScenarioConfig::with_scenario(ChannelKind::NoisePlusMultipath));
        let pts = n.points();
        assert_eq!(pts.len(), 33);
        assert_eq!(pts[11].1.rho, 20.0);
        assert!(pts.iter().all(|(_, c)| c.n_anchors == 3 && c.channel.nlos_mode == NlosMode::PerMeasurement));
        assert!((pts[3].1.channel.nlos_fraction - 0.3).abs() < 1e-12);
    }

    #[test]
    fn aggregate_excludes_failures() {
        let c = small(ChannelKind::Ideal);
        let mut trials = vec![run_trial(&c, 0), run_trial(&c, 1)];
        trials[1].p_m = None;
        let p = SweepPoint::from_trials(8.0, c, trials);
        assert_eq!(p.excluded, 1);
        let csv = sweep_aggregate_csv(SweepKind::Density, &[p]).unwrap();
        let row = csv.lines().nth(1).unwrap();
        assert!(row.ends_with(",1"), "{row}");
        assert!(row.starts_with("density,8,ideal,15,8,4,0,2,"), "{row}");
    }

    #[test]
    fn csv_headers() {
        let c = small(ChannelKind::Ideal);
        let csv = trials_csv(&c, &[run_trial(&c, 0)]).unwrap();
        assert!(csv.starts_with(
            "sweep_kind,swept_value,scenario,rho_m,m,n_anchors,nlos_fraction,trial,seed,P_m_m,solver_status\n"
        ));
    }
}
