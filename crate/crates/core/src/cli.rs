//! Command-line front end.
//!
//! Exit codes: 0 on success (flagged solver failures included), 1 for bad
//! arguments or configuration, 2 for I/O failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::channel::ChannelKind;
use crate::error::{Error, Result};
use crate::harness::{self, svg, ScenarioConfig, SweepKind, SweepSpec};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SDPLOC_OUT";

#[derive(Parser, Debug)]
#[command(name = "sdploc", version, about = "SDP cooperative localization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a network and write it as text.
    Gen(Common),
    /// Run one trial and write its CSV row and scatter plot.
    Trial {
        #[command(flatten)]
        common: Common,
        /// Trial index within the base seed.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Also write the refinement trace.
        #[arg(long)]
        trace: bool,
        /// Also write ranges, the SDP problem and its solution.
        #[arg(long)]
        dump: bool,
    },
    /// Run a parameter sweep: anchors, density or nlos.
    Sweep {
        kind: String,
        #[command(flatten)]
        common: Common,
    },
    /// Plot P_mu against the swept value from an aggregate sweep CSV.
    Plot {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML file mirroring ScenarioConfig.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    anchors: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// ideal, noise or multipath.
    #[arg(long)]
    scenario: Option<String>,
    /// NLOS fraction in [0, 1].
    #[arg(long)]
    nlos: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = &self.scenario {
            cfg.scenario =
                ChannelKind::parse(s).ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))?;
        }
        if let Some(v) = self.seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.anchors {
            cfg.n_anchors = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.nlos {
            cfg.channel.nlos_fraction = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(path)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(common) => {
            let cfg = common.config()?;
            let net = harness::trial_network(&cfg, harness::trial_seed(cfg.base_seed, 0.0, 0));
            write(&out_dir(&common.out), "network.txt", &net.to_text())?;
        }
        Command::Trial {
            common,
            index,
            trace,
            dump,
        } => {
            let mut cfg = common.config()?;
            cfg.refine.record_trace = trace;
            let run = harness::run_trial_detailed(&cfg, index);
            let dir = out_dir(&common.out);
            let stem = format!("trial_{}_{}", cfg.scenario.label(), index);
            write(&dir, &format!("{stem}.csv"), &harness::trials_csv(&cfg, std::slice::from_ref(&run.result))?)?;
            let svg = svg::render_scatter(&run.result, &run.network, run.estimates());
            write(&dir, &format!("{stem}.svg"), &svg)?;
            if trace {
                if let Some(r) = &run.refined {
                    write(&dir, &format!("{stem}_refine.csv"), &r.trace_csv())?;
                }
            }
            if dump {
                write(&dir, &format!("{stem}_network.txt"), &run.network.to_text())?;
                write(&dir, &format!("{stem}_ranges.csv"), &run.measurements.to_csv(run.network.m()))?;
                if let Some(p) = &run.problem {
                    write(&dir, &format!("{stem}_problem.txt"), &p.to_text())?;
                }
                if let Some(s) = &run.solution {
                    write(&dir, &format!("{stem}_solution.txt"), &s.to_text())?;
                }
            }
            match run.result.p_m {
                Some(p) => println!("P_m = {p:.9} m ({})", run.result.status.label()),
                None => println!("solve failed ({})", run.result.status.label()),
            }
        }
        Command::Sweep { kind, common } => {
            let sweep_kind =
                SweepKind::parse(&kind).ok_or_else(|| Error::Config(format!("unknown sweep '{kind}'")))?;
            let mut cfg = common.config()?;
            if sweep_kind == SweepKind::NlosFraction && common.scenario.is_none() && common.config.is_none() {
                cfg.scenario = ChannelKind::NoisePlusMultipath;
            }
            let spec = SweepSpec::new(sweep_kind, cfg);
            let points = harness::run_sweep(&spec);
            let dir = out_dir(&common.out);
            let stem = format!("sweep_{}_{}", sweep_kind.label(), cfg.scenario.label());
            write(&dir, &format!("{stem}_trials.csv"), &harness::sweep_trials_csv(sweep_kind, &points)?)?;
            let agg = harness::sweep_aggregate_csv(sweep_kind, &points)?;
            write(&dir, &format!("{stem}.csv"), &agg)?;
            let failed: usize = points.iter().map(|p| p.excluded).sum();
            if failed > 0 {
                println!("{failed} trial(s) flagged as failed");
            }
        }
        Command::Plot { input, out } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let chart = plot_aggregate(&text)?;
            let name = input
                .file_stem()
                .map(|s| format!("{}.svg", s.to_string_lossy()))
                .unwrap_or_else(|| "plot.svg".into());
            let dir = out.unwrap_or_else(|| match std::env::var_os(OUT_ENV) {
                Some(d) => PathBuf::from(d),
                None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
            });
            write(&dir, &name, &chart)?;
        }
    }
    Ok(())
}

/// Line chart of `P_mu_m` against `swept_value`, one series per scenario
/// and radio range.
pub fn plot_aggregate(csv_text: &str) -> Result<String> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column '{name}'")))
    };
    let (kind_c, x_c, sc_c, rho_c, y_c) =
        (col("sweep_kind")?, col("swept_value")?, col("scenario")?, col("rho_m")?, col("P_mu_m")?);
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut kind = String::new();
    for rec in rdr.records() {
        let rec = rec?;
        kind = rec[kind_c].to_string();
        let num = |c: usize| -> Result<Option<f64>> {
            let s = &rec[c];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| Error::Parse(format!("bad number '{s}'")))
        };
        if let (Some(x), Some(y)) = (num(x_c)?, num(y_c)?) {
            let name = format!("{} rho={} m", &rec[sc_c], &rec[rho_c]);
            series.entry(name).or_default().push((x, y));
        }
    }
    let x_label = match kind.as_str() {
        "anchors" => "number of anchors",
        "density" => "number of blind nodes",
        "nlos" => "NLOS fraction",
        _ => "swept value",
    };
    let series: Vec<(String, Vec<(f64, f64)>)> = series.into_iter().collect();
    Ok(svg::render_line_chart(
        &format!("{kind} sweep"),
        x_label,
        "mean position error P_mu (m)",
        &series,
    ))
}
