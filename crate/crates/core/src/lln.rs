//! Deterministic limit of the scaled counts `X/n` and of `theta`.

use serde::Serialize;

use crate::degree::{DegreeDistribution, EPS_SING};
use crate::error::{NetdiffError, Result};
use crate::io::csv_table;

/// Default number of RK4 steps over the horizon.
pub const DEFAULT_STEPS: usize = 2000;

/// Classical fourth-order Runge–Kutta step for a fixed-size system.
pub(crate) fn rk4_step<const N: usize>(
    y: &[f64; N],
    t: f64,
    h: f64,
    f: &impl Fn(f64, &[f64; N]) -> Result<[f64; N]>,
) -> Result<[f64; N]> {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = f(t, y)?;
    let k2 = f(t + h / 2.0, &add(y, &k1, h / 2.0))?;
    let k3 = f(t + h / 2.0, &add(y, &k2, h / 2.0))?;
    let k4 = f(t + h, &add(y, &k3, h))?;
    Ok(std::array::from_fn(|i| {
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// `(alpha_S, alpha_SI, alpha_SS)`: the limit of `X(0)/n`.
pub fn initial_alpha(dist: &DegreeDistribution, alpha_s: f64) -> [f64; 3] {
    let mean = dist.mean();
    [alpha_s, alpha_s * (1.0 - alpha_s) * mean, alpha_s * alpha_s * mean]
}

pub(crate) fn check_regular(x_s: f64, theta: f64, dist: &DegreeDistribution) -> Result<()> {
    if x_s <= EPS_SING {
        return Err(NetdiffError::Singular {
            t: f64::NAN,
            reason: format!("x_S = {x_s} at or below guard"),
        });
    }
    let d1 = dist.pgf_unchecked(theta, 1);
    if d1 <= EPS_SING {
        return Err(NetdiffError::Singular {
            t: f64::NAN,
            reason: format!("psi'(theta) = {d1} at theta = {theta}"),
        });
    }
    Ok(())
}

/// Drift `(H_S, H_SI, H_SS, H_theta)` of the limiting ODE.
pub fn h_drift(x: &[f64; 3], theta: f64, dist: &DegreeDistribution, beta: f64, alpha_s: f64) -> Result<[f64; 4]> {
    let [x_s, x_si, x_ss] = *x;
    check_regular(x_s, theta, dist)?;
    let kappa = dist.d_operator_unchecked(theta, 2)?;
    let d1 = dist.pgf_unchecked(theta, 1);
    Ok([
        -beta * x_si,
        beta * kappa * x_si / x_s * (x_ss - x_si) - beta * x_si,
        -2.0 * beta * kappa * x_si * x_ss / x_s,
        -beta * x_si / (alpha_s * d1),
    ])
}

/// Solution of the limiting ODE on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct LlnSolution {
    #[serde(skip)]
    pub dist: DegreeDistribution,
    pub beta: f64,
    pub alpha_s: f64,
    pub t_max: f64,
    pub h: f64,
    pub times: Vec<f64>,
    /// `(x_S, x_SI, x_SS, theta)` at each grid time.
    pub states: Vec<[f64; 4]>,
    /// Grid time at which the singularity guard stopped the integration.
    pub halted_at: Option<f64>,
}

/// Grid size and effective step for a requested step `h` over `[0, T]`.
pub(crate) fn grid(t_max: f64, h: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(NetdiffError::param("h", format!("must be positive, got {h}")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(NetdiffError::param("t_max", format!("must be positive, got {t_max}")));
    }
    let m = ((t_max / h).round() as usize).max(1);
    Ok((m, t_max / m as f64))
}

/// Integrates the ODE, stopping early (with `halted_at` set) at a singular state.
pub fn solve_lln_partial(
    dist: &DegreeDistribution,
    beta: f64,
    alpha_s: f64,
    t_max: f64,
    h: f64,
) -> Result<LlnSolution> {
    if !(alpha_s > 0.0 && alpha_s <= 1.0) {
        return Err(NetdiffError::param(
            "alpha_s",
            format!("must lie in (0, 1], got {alpha_s}"),
        ));
    }
    if !(beta >= 0.0) {
        return Err(NetdiffError::param("beta", format!("must be non-negative, got {beta}")));
    }
    let (m, h) = grid(t_max, h)?;
    let [a_s, a_si, a_ss] = initial_alpha(dist, alpha_s);
    let rhs = |_t: f64, y: &[f64; 4]| h_drift(&[y[0], y[1], y[2]], y[3], dist, beta, alpha_s);
    let mut times = Vec::with_capacity(m + 1);
    let mut states = Vec::with_capacity(m + 1);
    let mut y = [a_s, a_si, a_ss, 1.0];
    times.push(0.0);
    states.push(y);
    let mut halted_at = None;
    for k in 0..m {
        let t = k as f64 * h;
        match rk4_step(&y, t, h, &rhs) {
            Ok(next) => {
                y = next;
                times.push((k + 1) as f64 * h);
                states.push(y);
            }
            Err(NetdiffError::Singular { .. }) => {
                halted_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LlnSolution {
        dist: dist.clone(),
        beta,
        alpha_s,
        t_max,
        h,
        times,
        states,
        halted_at,
    })
}

/// Integrates the ODE over the whole horizon; a singular state is an error.
pub fn solve_lln(dist: &DegreeDistribution, beta: f64, alpha_s: f64, t_max: f64, h: f64) -> Result<LlnSolution> {
    let sol = solve_lln_partial(dist, beta, alpha_s, t_max, h)?;
    match sol.halted_at {
        Some(t) => Err(NetdiffError::Singular {
            t,
            reason: "limiting ODE reached the singularity guard before the horizon".into(),
        }),
        None => Ok(sol),
    }
}

impl LlnSolution {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Linearly interpolated `(x_S, x_SI, x_SS, theta)`.
    pub fn state_at(&self, t: f64) -> Result<[f64; 4]> {
        let t_end = self.t_end();
        if !(0.0..=t_end * (1.0 + 1e-12)).contains(&t) {
            return Err(NetdiffError::OutOfRange {
                value: t,
                range: format!("[0, {t_end}]"),
            });
        }
        let pos = (t / self.h).floor() as usize;
        if pos >= self.times.len() - 1 {
            return Ok(*self.states.last().unwrap());
        }
        let w = (t - self.times[pos]) / self.h;
        let (a, b) = (&self.states[pos], &self.states[pos + 1]);
        Ok(std::array::from_fn(|i| a[i] + w * (b[i] - a[i])))
    }

    /// `(x_S, x_SI, x_SS)` at `t`.
    pub fn x_at(&self, t: f64) -> Result<[f64; 3]> {
        let s = self.state_at(t)?;
        Ok([s[0], s[1], s[2]])
    }

    /// Limiting infected fraction `1 - alpha_S psi(theta(t))`.
    pub fn infected_fraction(&self, t: f64) -> Result<f64> {
        let theta = self.state_at(t)?[3];
        Ok(1.0 - self.alpha_s * self.dist.pgf_unchecked(theta, 0))
    }

    /// CSV with header `t,xS,xSI,xSS,theta,infected_fraction`.
    pub fn to_csv(&self) -> String {
        let rows: Vec<[f64; 6]> = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| {
                [
                    t,
                    s[0],
                    s[1],
                    s[2],
                    s[3],
                    1.0 - self.alpha_s * self.dist.pgf_unchecked(s[3], 0),
                ]
            })
            .collect();
        csv_table("t,xS,xSI,xSS,theta,infected_fraction", rows.iter().map(|r| &r[..]))
    }
}
