//! Applications built on the simulator and the limit theory: percolation
//! profiles, the giant component, discounted infection costs and the
//! simulation-versus-theory harness.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::{DegreeDistribution, DistSpec};
use crate::error::{NetdiffError, Result};
use crate::fclt::{
    empirical_jump_correlation, fluctuation_samples, initial_covariance, jump_correlation_theory,
    jump_correlation_window_theory, solve_fclt, FcltOptions, FcltSolution, JumpCorrelation, Mat3, Sigma0,
};
use crate::gillespie::{simulate_fresh, SiParams, Trajectory};
use crate::graph::GraphMode;
use crate::io::fmt_real;
use crate::lln::{solve_lln, solve_lln_partial, LlnSolution, DEFAULT_STEPS};
use crate::rng::{replica_rng, run_replicas};
use crate::stats;

/// Default level for [`percolates`].
pub const DEFAULT_PERCOLATION_LEVEL: f64 = 0.99;

/// Infected fraction `f(beta, t)` on a grid; `None` marks cells past a singular state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercolationProfile {
    pub dist: DistSpec,
    pub alpha_s: f64,
    pub t_max: f64,
    pub betas: Vec<f64>,
    pub times: Vec<f64>,
    pub fractions: Vec<Vec<Option<f64>>>,
}

/// `m_times` equally spaced points on `[0, t_max]`.
pub fn linspace(t_max: f64, m_times: usize) -> Vec<f64> {
    match m_times {
        0 => Vec::new(),
        1 => vec![0.0],
        m => (0..m).map(|k| t_max * k as f64 / (m - 1) as f64).collect(),
    }
}

pub fn percolation_profile(
    dist: &DegreeDistribution,
    alpha_s: f64,
    betas: &[f64],
    t_max: f64,
    m_times: usize,
) -> Result<PercolationProfile> {
    if betas.windows(2).any(|w| !(w[1] > w[0])) || betas.iter().any(|&b| !(b >= 0.0)) {
        return Err(NetdiffError::param(
            "betas",
            "must be non-negative and strictly ascending",
        ));
    }
    if m_times < 2 {
        return Err(NetdiffError::param("m_times", "need at least two time points"));
    }
    let times = linspace(t_max, m_times);
    let h = t_max / DEFAULT_STEPS as f64;
    let fractions = betas
        .par_iter()
        .map(|&beta| {
            let sol = solve_lln_partial(dist, beta, alpha_s, t_max, h)?;
            let valid_until = sol.halted_at.unwrap_or(f64::INFINITY);
            Ok(times
                .iter()
                .map(|&t| {
                    if t <= valid_until {
                        sol.infected_fraction(t).ok()
                    } else {
                        None
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<Option<f64>>>>>()?;
    Ok(PercolationProfile {
        dist: dist.spec().clone(),
        alpha_s,
        t_max,
        betas: betas.to_vec(),
        times,
        fractions,
    })
}

impl PercolationProfile {
    /// CSV with header `beta,` and one column per grid time; invalid cells are `nan`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("beta");
        for t in &self.times {
            s.push(',');
            s.push_str(&fmt_real(*t));
        }
        s.push('\n');
        for (beta, row) in self.betas.iter().zip(&self.fractions) {
            s.push_str(&fmt_real(*beta));
            for f in row {
                s.push(',');
                s.push_str(&fmt_real(f.unwrap_or(f64::NAN)));
            }
            s.push('\n');
        }
        s
    }
}

/// Slack in the level comparison, absorbing rounding in `1 - alpha_S psi(1)`.
const LEVEL_SLACK: f64 = 1e-12;

/// Whether the fraction at the grid row nearest to `beta` reaches `level` by `deadline`.
pub fn percolates(profile: &PercolationProfile, beta: f64, level: f64, deadline: f64) -> Result<bool> {
    let (lo, hi) = (profile.betas[0], *profile.betas.last().unwrap());
    if !(beta >= lo && beta <= hi) {
        return Err(NetdiffError::OutOfRange {
            value: beta,
            range: format!("[{lo}, {hi}]"),
        });
    }
    let row = profile
        .betas
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - beta).abs().total_cmp(&(b.1 - beta).abs()))
        .map(|(i, _)| i)
        .unwrap();
    Ok(profile
        .times
        .iter()
        .zip(&profile.fractions[row])
        .any(|(&t, f)| t <= deadline && f.is_some_and(|f| f >= level - LEVEL_SLACK)))
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // Assumes g(lo) <= 0 < g(hi).
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm.abs() < 1e-15 {
            return mid;
        }
        if gm <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root `theta_inf` of `psi'(1) theta = psi'(theta)` and the giant-component fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiantComponent {
    pub theta_inf: f64,
    pub fraction: f64,
}

/// Supercritical iff `psi''(1) > psi'(1)`; otherwise the trivial root `theta = 1`.
pub fn giant_component_fraction(dist: &DegreeDistribution) -> GiantComponent {
    let d1 = dist.pgf_unchecked(1.0, 1);
    let d2 = dist.pgf_unchecked(1.0, 2);
    if !(d2 > d1) {
        return GiantComponent {
            theta_inf: 1.0,
            fraction: 0.0,
        };
    }
    // g is concave with g(1) = 0 and g'(1) < 0, so g > 0 just below 1.
    let g = |t: f64| d1 * t - dist.pgf_unchecked(t, 1);
    let theta = if g(0.0) >= 0.0 {
        0.0
    } else {
        let mut hi = 0.5;
        while g(hi) <= 0.0 {
            hi = 0.5 * (1.0 + hi);
        }
        bisect(g, 0.0, hi)
    };
    GiantComponent {
        theta_inf: theta,
        fraction: 1.0 - dist.pgf_unchecked(theta, 0),
    }
}

/// Terminal `theta` of the limit path, the root of `psi'(1) theta = alpha_S psi'(theta)`
/// below 1 (nodes never reached stay susceptible).
pub fn final_theta(dist: &DegreeDistribution, alpha_s: f64) -> f64 {
    if alpha_s >= 1.0 {
        return 1.0;
    }
    let d1 = dist.pgf_unchecked(1.0, 1);
    let g = |t: f64| d1 * t - alpha_s * dist.pgf_unchecked(t, 1);
    if g(0.0) >= 0.0 {
        return 0.0;
    }
    bisect(g, 0.0, 1.0)
}

/// Discounted-cost evaluation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMethod {
    MonteCarlo,
    Gaussian,
}

impl std::str::FromStr for CostMethod {
    type Err = NetdiffError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monte_carlo" | "mc" => Ok(CostMethod::MonteCarlo),
            "gaussian" => Ok(CostMethod::Gaussian),
            _ => Err(NetdiffError::param(
                "method",
                format!("expected monte_carlo|gaussian, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub n: usize,
    pub beta: f64,
    pub alpha_s: f64,
    pub gamma: f64,
    pub c: f64,
    pub t_max: f64,
    pub method: CostMethod,
    /// Replicas for the Monte-Carlo method.
    pub replicas: usize,
    pub seed: u64,
    pub mode: GraphMode,
    pub sigma0: Sigma0,
    pub h: f64,
}

/// `log C` with `C = E int_0^T exp(-gamma t + c X_I(t)) dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub params: CostParams,
    pub log_cost: f64,
    /// Standard error of `log_cost` (Monte Carlo only).
    pub log_cost_se: Option<f64>,
    /// `(t, log integrand)` on the grid (Gaussian) or per replica log costs (Monte Carlo).
    pub log_integrand: Vec<(f64, f64)>,
}

/// `log int_a^b exp(-gamma t) dt`.
fn log_discount(gamma: f64, a: f64, b: f64) -> f64 {
    -gamma * a + (-(-gamma * (b - a)).exp_m1()).ln() - gamma.ln()
}

/// Exact `log int_0^T exp(-gamma t + c X_I(t)) dt` along one path.
pub fn log_path_cost(tr: &Trajectory, gamma: f64, c: f64) -> f64 {
    let t_max = tr.t_max();
    let mut pieces = Vec::with_capacity(tr.events.len() + 1);
    let mut counts = tr.initial;
    let mut last = 0.0;
    for e in &tr.events {
        if e.t > last {
            pieces.push(c * counts.i as f64 + log_discount(gamma, last, e.t));
        }
        counts.apply(e);
        last = e.t;
    }
    if t_max > last {
        pieces.push(c * counts.i as f64 + log_discount(gamma, last, t_max));
    }
    stats::log_sum_exp(pieces)
}

pub fn discounted_cost(dist: &DegreeDistribution, p: &CostParams) -> Result<CostReport> {
    if !(p.gamma > 0.0) {
        return Err(NetdiffError::param(
            "gamma",
            format!("must be positive, got {}", p.gamma),
        ));
    }
    if !(p.c > 0.0) {
        return Err(NetdiffError::param("c", format!("must be positive, got {}", p.c)));
    }
    let params = SiParams::new(p.beta, p.alpha_s, p.t_max)?;
    match p.method {
        CostMethod::MonteCarlo => {
            if p.replicas < 2 {
                return Err(NetdiffError::param("replicas", "need at least two"));
            }
            let logs = run_replicas(p.replicas, p.seed, |_, rng| {
                simulate_fresh(dist, p.n, p.mode, &params, rng).map(|tr| log_path_cost(&tr, p.gamma, p.c))
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
            let r = logs.len() as f64;
            let log_cost = stats::log_sum_exp(logs.iter().copied()) - r.ln();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
            let se = (stats::variance(&w) / r).sqrt() / stats::mean(&w);
            Ok(CostReport {
                params: p.clone(),
                log_cost,
                log_cost_se: Some(se),
                log_integrand: logs.iter().enumerate().map(|(i, &l)| (i as f64, l)).collect(),
            })
        }
        CostMethod::Gaussian => {
            let lln = solve_lln(dist, p.beta, p.alpha_s, p.t_max, p.h)?;
            let fclt = solve_fclt(&lln, &fclt_options(dist, p.alpha_s, p.sigma0)?)?;
            let nf = p.n as f64;
            let samples: Vec<(f64, f64)> = fclt
                .times
                .iter()
                .zip(fclt.x.iter().zip(&fclt.sigma))
                .map(|(&t, (x, s))| {
                    (
                        t,
                        -p.gamma * t + p.c * nf * (1.0 - x[0]) + 0.5 * p.c * p.c * nf * s[(0, 0)],
                    )
                })
                .collect();
            let h = fclt.h;
            let log_cost = stats::log_sum_exp(samples.iter().enumerate().map(|(k, &(_, l))| {
                let w = if k == 0 || k == samples.len() - 1 { 0.5 } else { 1.0 };
                l + (w * h).ln()
            }));
            Ok(CostReport {
                params: p.clone(),
                log_cost,
                log_cost_se: None,
                log_integrand: samples,
            })
        }
    }
}

pub fn fclt_options(dist: &DegreeDistribution, alpha_s: f64, sigma0: Sigma0) -> Result<FcltOptions> {
    Ok(FcltOptions {
        sigma0: match sigma0 {
            Sigma0::Zero => None,
            Sigma0::Configuration => Some(initial_covariance(dist, alpha_s)?),
        },
        frozen_drift: false,
    })
}

/// Largest deviation `max_i |X_i(t)/n - x_i(t)|` over `[0, t_end]`, checked
/// on both sides of every jump.
pub fn sup_deviation(tr: &Trajectory, lln: &LlnSolution, t_end: f64) -> Result<f64> {
    let nf = tr.n as f64;
    let dev = |c: &crate::gillespie::Counts, t: f64| -> Result<f64> {
        let x = lln.x_at(t)?;
        let v = c.as_vector();
        Ok((0..3).map(|i| (v[i] / nf - x[i]).abs()).fold(0.0, f64::max))
    };
    let mut c = tr.initial;
    let mut worst = dev(&c, 0.0)?;
    for e in tr.events.iter().take_while(|e| e.t <= t_end) {
        worst = worst.max(dev(&c, e.t)?);
        c.apply(e);
        worst = worst.max(dev(&c, e.t)?);
    }
    Ok(worst.max(dev(&c, t_end)?))
}

/// Settings of the simulation-versus-theory comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareParams {
    pub n: usize,
    pub beta: f64,
    pub alpha_s: f64,
    pub t_max: f64,
    pub replicas: usize,
    pub checkpoints: Vec<f64>,
    pub seed: u64,
    pub mode: GraphMode,
    pub sigma0: Sigma0,
    pub h: f64,
    /// Width of the window around each checkpoint for jump correlations.
    pub jump_window: f64,
    /// Relative tolerance for covariance entries (combined with 3 standard errors).
    pub cov_rel_tol: f64,
    /// Significance level of the Kolmogorov–Smirnov test.
    pub ks_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEntry {
    pub entry: String,
    pub empirical: f64,
    pub se: f64,
    pub theory: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEntry {
    pub component: String,
    pub empirical: f64,
    pub theory: f64,
    /// `(empirical - theory) / (sqrt(Sigma_ii / n) / sqrt(R))`.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEntry {
    pub empirical: JumpCorrelation,
    /// `rho(t)` at the checkpoint.
    pub theory: f64,
    /// The same correlation integrated over the window, from the increment of `V`.
    pub theory_window: f64,
    /// `(empirical - theory_window) / se`.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointReport {
    pub t: f64,
    pub mean: Vec<MeanEntry>,
    /// Mean of `Y(t)` over replicas.
    pub y_mean: [f64; 3],
    pub covariance: Vec<CovEntry>,
    pub jump: Option<JumpEntry>,
    pub ks_y_s: Option<KsEntry>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub dist: DistSpec,
    pub params: CompareParams,
    pub checkpoints: Vec<CheckpointReport>,
    pub pass: bool,
}

const NAMES: [&str; 3] = ["S", "SI", "SS"];

/// Simulates `R` replicas and compares them with the limit and fluctuation theory.
pub fn compare_mc_theory(dist: &DegreeDistribution, p: &CompareParams) -> Result<CompareReport> {
    if p.replicas < 2 {
        return Err(NetdiffError::param("replicas", "need at least two"));
    }
    let params = SiParams::new(p.beta, p.alpha_s, p.t_max)?;
    let trajectories = run_replicas(p.replicas, p.seed, |_, rng| {
        simulate_fresh(dist, p.n, p.mode, &params, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let lln = solve_lln(dist, p.beta, p.alpha_s, p.t_max, p.h)?;
    let fclt = solve_fclt(&lln, &fclt_options(dist, p.alpha_s, p.sigma0)?)?;
    compare_trajectories(dist, p, &trajectories, &lln, &fclt)
}

/// The comparison on an existing set of runs.
pub fn compare_trajectories(
    dist: &DegreeDistribution,
    p: &CompareParams,
    trajectories: &[Trajectory],
    lln: &LlnSolution,
    fclt: &FcltSolution,
) -> Result<CompareReport> {
    let r = trajectories.len() as f64;
    let nf = p.n as f64;
    let mut checkpoints = Vec::new();
    for (ci, &t) in p.checkpoints.iter().enumerate() {
        let ys = fluctuation_samples(trajectories, lln, t)?;
        let x = lln.x_at(t)?;
        let sigma = fclt.sigma_at(t)?;
        let comp = |i: usize| -> Vec<f64> { ys.iter().map(|y| y[i]).collect() };
        let cols: Vec<Vec<f64>> = (0..3).map(comp).collect();
        let y_mean: [f64; 3] = std::array::from_fn(|i| stats::mean(&cols[i]));

        let mean = (0..3)
            .map(|i| {
                let empirical = x[i] + y_mean[i] / nf.sqrt();
                let band = (sigma[(i, i)] / nf).sqrt() / r.sqrt();
                let diff = empirical - x[i];
                let z = if band > 0.0 {
                    diff / band
                } else if diff.abs() < 1e-12 {
                    0.0
                } else {
                    f64::INFINITY.copysign(diff)
                };
                MeanEntry {
                    component: NAMES[i].into(),
                    empirical,
                    theory: x[i],
                    z,
                    pass: z.abs() < 3.0,
                }
            })
            .collect::<Vec<_>>();

        let mut covariance = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                let (c, se) = stats::covariance_with_se(&cols[i], &cols[j]);
                let theory = sigma[(i, j)];
                let tolerance = (p.cov_rel_tol * theory.abs()).max(3.0 * se);
                covariance.push(CovEntry {
                    entry: format!("{}_{}", NAMES[i], NAMES[j]),
                    empirical: c,
                    se,
                    theory,
                    tolerance,
                    pass: (c - theory).abs() <= tolerance,
                });
            }
        }

        let jump = if p.beta > 0.0 && p.jump_window > 0.0 {
            let t0 = (t - 0.5 * p.jump_window).max(0.0);
            let t1 = (t + 0.5 * p.jump_window).min(p.t_max);
            match (
                empirical_jump_correlation(trajectories, t0, t1),
                jump_correlation_theory(fclt, t),
                jump_correlation_window_theory(fclt, t0, t1),
            ) {
                (Ok(emp), Ok(theory), Ok(theory_window)) => {
                    let z = (emp.rho - theory_window) / emp.se;
                    Some(JumpEntry {
                        empirical: emp,
                        theory,
                        theory_window,
                        z,
                        pass: z.abs() <= 3.0,
                    })
                }
                _ => None,
            }
        } else {
            None
        };

        let ks_y_s = ks_gaussian(&cols[0], nf, p.seed, ci as u64).map(|(statistic, p_value)| KsEntry {
            statistic,
            p_value,
            pass: p_value >= p.ks_alpha,
        });

        let pass = mean.iter().all(|m| m.pass)
            && covariance.iter().all(|c| c.pass)
            && jump.as_ref().is_none_or(|j| j.pass)
            && ks_y_s.as_ref().is_none_or(|k| k.pass);
        checkpoints.push(CheckpointReport {
            t,
            mean,
            y_mean,
            covariance,
            jump,
            ks_y_s,
            pass,
        });
    }
    let pass = checkpoints.iter().all(|c| c.pass);
    Ok(CompareReport {
        dist: dist.spec().clone(),
        params: p.clone(),
        checkpoints,
        pass,
    })
}

/// KS test of standardised samples against the standard normal. The counts
/// live on a lattice of spacing `n^{-1/2}`, so each sample is first spread
/// uniformly over its lattice cell. `None` when the sample is degenerate.
pub fn ks_gaussian(samples: &[f64], n: f64, seed: u64, stream: u64) -> Option<(f64, f64)> {
    let mut rng = replica_rng(seed ^ 0x6b73_6469_7468_6572, stream);
    let spacing = 1.0 / n.sqrt();
    let dithered: Vec<f64> = samples
        .iter()
        .map(|y| y + spacing * (rng.random::<f64>() - 0.5))
        .collect();
    let m = stats::mean(&dithered);
    let sd = stats::variance(&dithered).sqrt();
    if !(sd > spacing) {
        return None;
    }
    let z: Vec<f64> = dithered.iter().map(|y| (y - m) / sd).collect();
    let d = stats::ks_statistic(&z, stats::normal_cdf);
    Some((d, stats::ks_p_value(d, z.len())))
}

/// Rows `t,component,mc_mean,mc_sd,theory_mean,theory_sd` for an error-bar plot of `X/n`.
pub fn errorbar_rows(trajectories: &[Trajectory], fclt: &FcltSolution, times: &[f64]) -> Result<String> {
    let nf = trajectories.first().map(|t| t.n as f64).unwrap_or(1.0);
    let mut out = String::from("t,component,mc_mean,mc_sd,theory_mean,theory_sd\n");
    let per_run = trajectories
        .iter()
        .map(|tr| tr.counts_at_many(times))
        .collect::<Result<Vec<_>>>()?;
    for (k, &t) in times.iter().enumerate() {
        let s: Mat3 = fclt.sigma_at(t)?;
        let kk = ((t / fclt.h).round() as usize).min(fclt.x.len() - 1);
        for i in 0..3 {
            let xs: Vec<f64> = per_run.iter().map(|c| c[k].as_vector()[i] / nf).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_real(t),
                NAMES[i],
                fmt_real(stats::mean(&xs)),
                fmt_real(stats::variance(&xs).sqrt()),
                fmt_real(fclt.x[kk][i]),
                fmt_real((s[(i, i)] / nf).sqrt())
            ));
        }
    }
    Ok(out)
}

/// Gnuplot commands drawing the isolines of a profile CSV.
pub fn isoline_script(csv_name: &str, levels: &[f64]) -> String {
    let levels: Vec<String> = levels.iter().map(|l| l.to_string()).collect();
    format!(
        "set datafile separator ','\n\
         set view map\n\
         set contour base\n\
         set cntrparam levels discrete {}\n\
         set xlabel 't'\n\
         set ylabel 'beta'\n\
         splot '{csv_name}' matrix nonuniform with lines notitle\n",
        levels.join(",")
    )
}

/// Gnuplot commands for the error-bar comparison produced by [`errorbar_rows`].
pub fn errorbar_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         plot for [c in 'S SI SS'] '{csv_name}' using 1:(strcol(2) eq c ? $3 : 1/0):(strcol(2) eq c ? 2*$4 : 1/0) with yerrorbars title c.' (simulation)', \\\n     \
         for [c in 'S SI SS'] '{csv_name}' using 1:(strcol(2) eq c ? $5 : 1/0) with lines title c.' (limit)'\n"
    )
}
