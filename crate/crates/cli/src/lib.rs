//! Command-line orchestration for `netdiff`.
//!
//! Settings are resolved in three layers: built-in defaults, an optional TOML
//! file (`--config`), then command-line flags. Each command writes its files
//! atomically into `--out` together with a JSON manifest that embeds the
//! fully resolved configuration.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use netdiff_core::experiments::{
    compare_trajectories, discounted_cost, errorbar_rows, errorbar_script, fclt_options, giant_component_fraction,
    isoline_script, percolates, percolation_profile, CompareParams, CostMethod, CostParams, DEFAULT_PERCOLATION_LEVEL,
};
use netdiff_core::fclt::{diffusion_sample_path, ellipse_series, ellipses_csv, solve_fclt, Sigma0};
use netdiff_core::gillespie::simulate_fresh;
use netdiff_core::graph::build_configuration_model;
use netdiff_core::io::{fmt_real, write_atomic};
use netdiff_core::lln::{solve_lln, DEFAULT_STEPS};
use netdiff_core::rng::{replica_rng, run_replicas};
use netdiff_core::{DistSpec, GraphMode, NetdiffError, SiParams};
use serde::{Deserialize, Serialize};

/// Resolved settings shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "dist_string")]
    pub dist: DistSpec,
    pub n: usize,
    pub beta: f64,
    pub alpha_s: f64,
    #[serde(alias = "T")]
    pub t_max: f64,
    /// ODE step; defaults to `t_max / 2000`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub replicas: usize,
    pub out: PathBuf,
    pub graph_mode: GraphMode,
    pub export_graph: bool,
    pub sigma0: Sigma0,
    pub betas: Vec<f64>,
    pub m_times: usize,
    pub gamma: f64,
    /// Cost exponent; defaults to `1 / n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub method: CostMethod,
    pub level: f64,
    /// Percolation deadline; defaults to `t_max`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
    pub checkpoints: Vec<f64>,
    pub jump_window: f64,
    pub cov_rel_tol: f64,
    pub ks_alpha: f64,
    pub ellipse_level: f64,
    pub ellipse_stride: usize,
    /// Diffusion sample paths written by `fclt`.
    pub paths: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dist: DistSpec::Poisson { lambda: 5.0 },
            n: 1000,
            beta: 0.5,
            alpha_s: 0.9,
            t_max: 2.0,
            h: None,
            seed: None,
            replicas: 100,
            out: PathBuf::from("out"),
            graph_mode: GraphMode::Erased,
            export_graph: false,
            sigma0: Sigma0::Configuration,
            betas: (1..=20).map(|i| i as f64 * 0.25).collect(),
            m_times: 101,
            gamma: 1.0,
            c: None,
            method: CostMethod::Gaussian,
            level: DEFAULT_PERCOLATION_LEVEL,
            deadline: None,
            checkpoints: vec![0.5, 1.0],
            jump_window: 0.05,
            cov_rel_tol: 0.1,
            ks_alpha: 0.01,
            ellipse_level: 0.95,
            ellipse_stride: 100,
            paths: 0,
        }
    }
}

mod dist_string {
    use netdiff_core::DistSpec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &DistSpec, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(d)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DistSpec, D::Error> {
        let s = String::deserialize(d)?;
        DistSpec::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] NetdiffError),
    #[error("tolerance check failed: {0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Tolerance(_) => 2,
            CliError::Core(NetdiffError::Singular { .. } | NetdiffError::CholeskyFailed { .. }) => 3,
            CliError::Core(_) => 1,
        }
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("invalid `{field}`: {reason}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// Fills the derived defaults (`h`, `c`, `deadline`).
    pub fn resolve(mut self) -> Self {
        self.h.get_or_insert(self.t_max / DEFAULT_STEPS as f64);
        self.c.get_or_insert(1.0 / self.n.max(1) as f64);
        self.deadline.get_or_insert(self.t_max);
        self
    }

    pub fn h(&self) -> f64 {
        self.h.unwrap_or(self.t_max / DEFAULT_STEPS as f64)
    }

    /// Range checks; the message names the offending field.
    pub fn validate(&self, cmd: CommandKind) -> Result<(), CliError> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        let unit_open = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must lie in (0, 1), got {v}")))
            }
        };
        self.dist.build().map_err(|e| invalid("dist", e))?;
        if self.n < 2 {
            return Err(invalid("n", format!("need at least 2 nodes, got {}", self.n)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", format!("must be non-negative, got {}", self.beta)));
        }
        if !(self.alpha_s > 0.0 && self.alpha_s <= 1.0) {
            return Err(invalid("alpha_s", format!("must lie in (0, 1], got {}", self.alpha_s)));
        }
        pos("t_max", self.t_max)?;
        pos("h", self.h())?;
        if self.h() > self.t_max {
            return Err(invalid("h", "exceeds t_max"));
        }
        if cmd.is_stochastic(self) && self.seed.is_none() {
            return Err(invalid("seed", "required for stochastic commands"));
        }
        match cmd {
            CommandKind::Fclt => {
                unit_open("ellipse_level", self.ellipse_level)?;
                if self.ellipse_stride == 0 {
                    return Err(invalid("ellipse_stride", "must be at least 1"));
                }
            }
            CommandKind::Profile => {
                if self.betas.is_empty() || self.betas.windows(2).any(|w| !(w[1] > w[0])) || self.betas[0] < 0.0 {
                    return Err(invalid(
                        "betas",
                        "must be non-empty, non-negative and strictly ascending",
                    ));
                }
                if self.m_times < 2 {
                    return Err(invalid("m_times", "need at least 2 time points"));
                }
                if !(self.level > 0.0 && self.level <= 1.0) {
                    return Err(invalid("level", format!("must lie in (0, 1], got {}", self.level)));
                }
                if let Some(d) = self.deadline {
                    if !(0.0..=self.t_max).contains(&d) {
                        return Err(invalid("deadline", format!("must lie in [0, t_max], got {d}")));
                    }
                }
            }
            CommandKind::Compare => {
                if self.replicas < 2 {
                    return Err(invalid("replicas", "need at least 2"));
                }
                if self.checkpoints.is_empty()
                    || self.checkpoints.iter().any(|&t| !(0.0..=self.t_max).contains(&t))
                    || self.checkpoints.windows(2).any(|w| !(w[1] > w[0]))
                {
                    return Err(invalid("checkpoints", "must be ascending within [0, t_max]"));
                }
                if !(self.jump_window >= 0.0) {
                    return Err(invalid("jump_window", "must be non-negative"));
                }
                pos("cov_rel_tol", self.cov_rel_tol)?;
                unit_open("ks_alpha", self.ks_alpha)?;
            }
            CommandKind::Cost => {
                pos("gamma", self.gamma)?;
                pos("c", self.c.unwrap_or(1.0 / self.n as f64))?;
                if self.method == CostMethod::MonteCarlo && self.replicas < 2 {
                    return Err(invalid("replicas", "need at least 2"));
                }
            }
            CommandKind::Simulate | CommandKind::Lln => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Lln,
    Fclt,
    Profile,
    Compare,
    Cost,
}

impl CommandKind {
    fn is_stochastic(self, cfg: &RunConfig) -> bool {
        match self {
            CommandKind::Simulate | CommandKind::Compare => true,
            CommandKind::Cost => cfg.method == CostMethod::MonteCarlo,
            CommandKind::Fclt => cfg.paths > 0,
            CommandKind::Lln | CommandKind::Profile => false,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "netdiff", version, about = "SI epidemics on configuration-model graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one run and write its event log.
    Simulate(Args),
    /// Solve the limiting ODE.
    Lln(Args),
    /// Fluctuation covariances, ellipses and optional diffusion sample paths.
    Fclt(Args),
    /// Percolation profile over a grid of infection rates.
    Profile(Args),
    /// Compare simulated replicas with the limit and fluctuation theory.
    Compare(Args),
    /// Discounted infection cost.
    Cost(Args),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Simulate(_) => CommandKind::Simulate,
            Command::Lln(_) => CommandKind::Lln,
            Command::Fclt(_) => CommandKind::Fclt,
            Command::Profile(_) => CommandKind::Profile,
            Command::Compare(_) => CommandKind::Compare,
            Command::Cost(_) => CommandKind::Cost,
        }
    }

    pub fn args(&self) -> &Args {
        match self {
            Command::Simulate(a)
            | Command::Lln(a)
            | Command::Fclt(a)
            | Command::Profile(a)
            | Command::Compare(a)
            | Command::Cost(a) => a,
        }
    }
}

/// Flags; every one overrides the corresponding configuration value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Args {
    /// TOML file with settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Degree distribution: poisson:L, negbin:R,P, regular:R or table:K=P,...
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "alpha-s")]
    pub alpha_s: Option<f64>,
    /// Time horizon.
    #[arg(long = "T")]
    pub t_max: Option<f64>,
    /// ODE step.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "NETDIFF_THREADS")]
    pub threads: Option<usize>,
    /// multigraph, erased or rejection_simple.
    #[arg(long = "graph-mode")]
    pub graph_mode: Option<String>,
    /// Also write the edge list of the simulated graph.
    #[arg(long = "export-graph")]
    pub export_graph: bool,
    /// Initial fluctuation covariance: zero or configuration.
    #[arg(long)]
    pub sigma0: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long = "m-times")]
    pub m_times: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// monte_carlo or gaussian.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub deadline: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<f64>>,
    #[arg(long = "jump-window")]
    pub jump_window: Option<f64>,
    #[arg(long = "cov-rel-tol")]
    pub cov_rel_tol: Option<f64>,
    #[arg(long = "ks-alpha")]
    pub ks_alpha: Option<f64>,
    #[arg(long = "ellipse-level")]
    pub ellipse_level: Option<f64>,
    #[arg(long = "ellipse-stride")]
    pub ellipse_stride: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
}

impl Args {
    /// Defaults, then the config file, then flags.
    pub fn to_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(d) = &self.dist {
            cfg.dist = DistSpec::parse(d).map_err(|e| invalid("dist", e))?;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { cfg.$f = v; } )* };
        }
        set!(
            n,
            beta,
            alpha_s,
            t_max,
            replicas,
            out,
            betas,
            m_times,
            gamma,
            level,
            checkpoints,
            jump_window
        );
        set!(cov_rel_tol, ks_alpha, ellipse_level, ellipse_stride, paths);
        if self.h.is_some() {
            cfg.h = self.h;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.c.is_some() {
            cfg.c = self.c;
        }
        if self.deadline.is_some() {
            cfg.deadline = self.deadline;
        }
        if self.export_graph {
            cfg.export_graph = true;
        }
        if let Some(m) = &self.graph_mode {
            cfg.graph_mode = m.parse().map_err(|e| invalid("graph_mode", e))?;
        }
        if let Some(s) = &self.sigma0 {
            cfg.sigma0 = s.parse().map_err(|e| invalid("sigma0", e))?;
        }
        if let Some(m) = &self.method {
            cfg.method = m.parse().map_err(|e| invalid("method", e))?;
        }
        Ok(cfg)
    }
}

/// Files written by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    files: Vec<String>,
    result: T,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn file(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.files.push(path);
        Ok(())
    }

    fn manifest<T: Serialize>(&mut self, command: &str, cfg: &RunConfig, result: T) -> Result<(), CliError> {
        let files = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect();
        let m = Manifest {
            command,
            config: cfg,
            files,
            result,
        };
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        self.file(&format!("{command}.json"), &text)
    }
}

/// Parses the flags, resolves the configuration and runs the command on a
/// pool of the requested size.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let args = cli.command.args();
    let kind = cli.command.kind();
    let cfg = args.to_config()?.resolve();
    cfg.validate(kind)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| execute(kind, &cfg))
}

pub fn execute(kind: CommandKind, cfg: &RunConfig) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(NetdiffError::from)?;
    let mut w = Writer {
        dir: &cfg.out,
        files: Vec::new(),
    };
    let dist = cfg.dist.build()?;
    let h = cfg.h();
    match kind {
        CommandKind::Simulate => {
            let seed = cfg.seed.expect("validated");
            let params = SiParams::new(cfg.beta, cfg.alpha_s, cfg.t_max)?;
            let mut rng = replica_rng(seed, 0);
            let degrees = dist.sample_degree_sequence(cfg.n, &mut rng)?;
            let graph = build_configuration_model(&degrees, cfg.graph_mode, &mut rng)?;
            let tr = netdiff_core::gillespie::simulate(&graph, &params, &mut rng)?.with_seed(seed);
            w.file("trajectory.csv", &tr.to_csv())?;
            if cfg.export_graph {
                w.file("graph.csv", &graph.edge_list_csv())?;
            }
            #[derive(Serialize)]
            struct R {
                trajectory: netdiff_core::gillespie::TrajectoryMeta,
                graph: netdiff_core::graph::GraphStats,
                final_counts: netdiff_core::gillespie::Counts,
            }
            w.manifest(
                "simulate",
                cfg,
                R {
                    trajectory: tr.meta(Some(&cfg.dist)),
                    graph: graph.stats(),
                    final_counts: tr.final_counts(),
                },
            )?;
        }
        CommandKind::Lln => {
            let sol = solve_lln(&dist, cfg.beta, cfg.alpha_s, cfg.t_max, h)?;
            let half = solve_lln(&dist, cfg.beta, cfg.alpha_s, cfg.t_max, h / 2.0)?;
            let step_check = sol
                .states
                .iter()
                .enumerate()
                .map(|(k, s)| (0..4).map(|i| (s[i] - half.states[2 * k][i]).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            w.file("lln.csv", &sol.to_csv())?;
            #[derive(Serialize)]
            struct R {
                h: f64,
                step_halving_sup_diff: f64,
                final_state: [f64; 4],
                final_infected_fraction: f64,
            }
            w.manifest(
                "lln",
                cfg,
                R {
                    h: sol.h,
                    step_halving_sup_diff: step_check,
                    final_state: *sol.states.last().unwrap(),
                    final_infected_fraction: sol.infected_fraction(sol.t_end())?,
                },
            )?;
            if step_check > 1e-6 {
                return Err(CliError::Tolerance(format!("h versus h/2 differ by {step_check:e}")));
            }
        }
        CommandKind::Fclt => {
            let lln = solve_lln(&dist, cfg.beta, cfg.alpha_s, cfg.t_max, h)?;
            let fclt = solve_fclt(&lln, &fclt_options(&dist, cfg.alpha_s, cfg.sigma0)?)?;
            w.file("fclt.csv", &fclt.to_csv())?;
            let ellipses = ellipse_series(&fclt, cfg.n, cfg.ellipse_level, cfg.ellipse_stride)?;
            w.file("ellipses.csv", &ellipses_csv(&ellipses))?;
            if cfg.paths > 0 {
                let seed = cfg.seed.expect("validated");
                let paths = run_replicas(cfg.paths, seed, |_, rng| diffusion_sample_path(&fclt, cfg.n, rng))
                    .into_iter()
                    .collect::<Result<Vec<_>, _>>()?;
                let mut s = String::from("path,t,XS,XSI,XSS\n");
                for (i, p) in paths.iter().enumerate() {
                    for (t, c) in p.times.iter().zip(&p.counts) {
                        s.push_str(&format!(
                            "{i},{},{},{},{}\n",
                            fmt_real(*t),
                            fmt_real(c[0]),
                            fmt_real(c[1]),
                            fmt_real(c[2])
                        ));
                    }
                }
                w.file("diffusion_paths.csv", &s)?;
            }
            #[derive(Serialize)]
            struct R {
                min_v_increment_eigenvalue: f64,
                min_sigma_eigenvalue: f64,
                invariants_hold: bool,
            }
            w.manifest(
                "fclt",
                cfg,
                R {
                    min_v_increment_eigenvalue: fclt.min_v_increment_eigenvalue(),
                    min_sigma_eigenvalue: fclt.min_sigma_eigenvalue(),
                    invariants_hold: fclt.check_invariants().is_ok(),
                },
            )?;
        }
        CommandKind::Profile => {
            let profile = percolation_profile(&dist, cfg.alpha_s, &cfg.betas, cfg.t_max, cfg.m_times)?;
            w.file("profile.csv", &profile.to_csv())?;
            w.file("isolines.gp", &isoline_script("profile.csv", &[0.5, 0.9, cfg.level]))?;
            let deadline = cfg.deadline.unwrap_or(cfg.t_max);
            let flags = cfg
                .betas
                .iter()
                .map(|&b| Ok((b, percolates(&profile, b, cfg.level, deadline)?)))
                .collect::<Result<Vec<(f64, bool)>, NetdiffError>>()?;
            #[derive(Serialize)]
            struct R {
                percolates: Vec<(f64, bool)>,
                invalid_cells: usize,
                giant_component: netdiff_core::experiments::GiantComponent,
            }
            w.manifest(
                "profile",
                cfg,
                R {
                    percolates: flags,
                    invalid_cells: profile.fractions.iter().flatten().filter(|f| f.is_none()).count(),
                    giant_component: giant_component_fraction(&dist),
                },
            )?;
        }
        CommandKind::Compare => {
            let p = CompareParams {
                n: cfg.n,
                beta: cfg.beta,
                alpha_s: cfg.alpha_s,
                t_max: cfg.t_max,
                replicas: cfg.replicas,
                checkpoints: cfg.checkpoints.clone(),
                seed: cfg.seed.expect("validated"),
                mode: cfg.graph_mode,
                sigma0: cfg.sigma0,
                h,
                jump_window: cfg.jump_window,
                cov_rel_tol: cfg.cov_rel_tol,
                ks_alpha: cfg.ks_alpha,
            };
            let params = SiParams::new(cfg.beta, cfg.alpha_s, cfg.t_max)?;
            let trajectories = run_replicas(p.replicas, p.seed, |_, rng| {
                simulate_fresh(&dist, p.n, p.mode, &params, rng)
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
            let lln = solve_lln(&dist, p.beta, p.alpha_s, p.t_max, p.h)?;
            let fclt = solve_fclt(&lln, &fclt_options(&dist, p.alpha_s, p.sigma0)?)?;
            let report = compare_trajectories(&dist, &p, &trajectories, &lln, &fclt)?;
            w.file("errorbars.csv", &errorbar_rows(&trajectories, &fclt, &p.checkpoints)?)?;
            w.file("errorbars.gp", &errorbar_script("errorbars.csv"))?;
            let pass = report.pass;
            w.manifest("compare", cfg, &report)?;
            if !pass {
                let failed: Vec<String> = report
                    .checkpoints
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| format!("t={}", c.t))
                    .collect();
                return Err(CliError::Tolerance(format!("checks failed at {}", failed.join(", "))));
            }
        }
        CommandKind::Cost => {
            let p = CostParams {
                n: cfg.n,
                beta: cfg.beta,
                alpha_s: cfg.alpha_s,
                gamma: cfg.gamma,
                c: cfg.c.unwrap_or(1.0 / cfg.n as f64),
                t_max: cfg.t_max,
                method: cfg.method,
                replicas: cfg.replicas,
                seed: cfg.seed.unwrap_or(0),
                mode: cfg.graph_mode,
                sigma0: cfg.sigma0,
                h,
            };
            let report = discounted_cost(&dist, &p)?;
            w.manifest("cost", cfg, &report)?;
        }
    }
    Ok(Outcome { files: w.files })
}
