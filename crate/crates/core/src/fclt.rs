//! Gaussian fluctuations around the ODE limit.
//!
//! With `Y(t) = n^{-1/2} (X(t) - n x(t))`, the limit `U` solves the linear SDE
//! `dU = A(t) U dt + dG`, where `A` is the Jacobian of the drift in `x` and
//! `G` is a centred Gaussian process with independent increments and
//! covariance `V(t) = int_0^t v`. Its covariance obeys
//! `dSigma/dt = A Sigma + Sigma A^T + v`.

use nalgebra::{Cholesky, Matrix2, Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::degree::DegreeDistribution;
use crate::error::{NetdiffError, Result};
use crate::gillespie::Trajectory;
use crate::io::csv_table;
use crate::lln::{check_regular, h_drift, rk4_step, LlnSolution};

pub type Mat3 = Matrix3<f64>;

/// Eigenvalue floor used for the positive-semidefiniteness checks.
pub const PSD_FLOOR: f64 = -1e-9;

/// Relative diagonal jitter for near-singular Cholesky factorisations.
pub const CHOLESKY_JITTER: f64 = 1e-12;

const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
const UPPER_NAMES: [&str; 6] = ["S_S", "S_SI", "S_SS", "SI_SI", "SI_SS", "SS_SS"];

fn pack(m: &Mat3) -> [f64; 6] {
    UPPER.map(|(i, j)| m[(i, j)])
}

fn unpack(p: &[f64]) -> Mat3 {
    let mut m = Mat3::zeros();
    for (k, &(i, j)) in UPPER.iter().enumerate() {
        m[(i, j)] = p[k];
        m[(j, i)] = p[k];
    }
    m
}

/// Infinitesimal covariance `v(x, theta)` of the jumps.
pub fn v_matrix(x: &[f64; 3], theta: f64, dist: &DegreeDistribution, beta: f64) -> Result<Mat3> {
    let [xs, xsi, xss] = *x;
    check_regular(xs, theta, dist)?;
    let d2 = dist.d_operator_unchecked(theta, 2)?;
    let d3 = dist.d_operator_unchecked(theta, 3)?;
    let v_s = beta * xsi;
    let v_si = beta * (xsi * (xss - xsi).powi(2) / (xs * xs) * d3 - xsi * (xss - 3.0 * xsi) / xs * d2 + xsi);
    let v_ss = 4.0 * beta * (xsi * xss / xs) * (xss / xs * d3 + d2);
    let v_s_si = -beta * (xsi * (xss - xsi) / xs * d2 - xsi);
    let v_s_ss = 2.0 * beta * xsi * xss / xs * d2;
    let v_si_ss = -2.0 * beta * xsi * xss * (xss - xsi) / (xs * xs) * d3;
    Ok(unpack(&[v_s, v_s_si, v_s_ss, v_si, v_si_ss, v_ss]))
}

/// Jacobian of the drift with respect to `(x_S, x_SI, x_SS)`, `theta` fixed.
pub fn jacobian(x: &[f64; 3], theta: f64, dist: &DegreeDistribution, beta: f64) -> Result<Mat3> {
    let [xs, xsi, xss] = *x;
    check_regular(xs, theta, dist)?;
    let bk = beta * dist.d_operator_unchecked(theta, 2)?;
    Ok(Mat3::new(
        0.0,
        -beta,
        0.0,
        -bk * xsi * (xss - xsi) / (xs * xs),
        bk * (xss - 2.0 * xsi) / xs - beta,
        bk * xsi / xs,
        2.0 * bk * xsi * xss / (xs * xs),
        -2.0 * bk * xss / xs,
        -2.0 * bk * xsi / xs,
    ))
}

/// Covariance of `Y(0)` when the graph is a fresh configuration model and the
/// initially infected set is a uniform subset of fixed size.
///
/// The susceptible half-edge total fluctuates with the sampled degrees, and
/// given the totals the number of cross pairs in a uniform matching of `N`
/// stubs, `A` of them susceptible, has variance `2 A^2 B^2 / N^3` to leading
/// order. `X_S(0)` is deterministic.
pub fn initial_covariance(dist: &DegreeDistribution, alpha_s: f64) -> Result<Mat3> {
    let q = alpha_s;
    let mu = dist.mean();
    let var_d = dist.moment(2)? - mu * mu;
    if mu <= 0.0 {
        return Ok(Mat3::zeros());
    }
    let var_a = q * var_d;
    let var_b = (1.0 - q) * var_d;
    let (da, db) = ((1.0 - q).powi(2), q * q);
    let var_x = da * da * var_a + db * db * var_b + 2.0 * mu * q * q * (1.0 - q).powi(2);
    let cov_xa = da * var_a;
    let var_ss = var_a - 2.0 * cov_xa + var_x;
    let cov_si_ss = cov_xa - var_x;
    Ok(unpack(&[0.0, 0.0, 0.0, var_x, cov_si_ss, var_ss]))
}

/// Initial covariance used by [`solve_fclt`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma0 {
    /// Nonrandom start, `Sigma(0) = 0`.
    #[default]
    Zero,
    /// Fluctuations of a freshly sampled graph and infected set.
    Configuration,
}

impl std::str::FromStr for Sigma0 {
    type Err = NetdiffError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Sigma0::Zero),
            "configuration" => Ok(Sigma0::Configuration),
            _ => Err(NetdiffError::param(
                "sigma0",
                format!("expected zero|configuration, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FcltOptions {
    pub sigma0: Option<Mat3>,
    /// Drop the drift Jacobian, so that `Sigma = Sigma0 + V`.
    pub frozen_drift: bool,
}

/// `v`, `V`, `A` and `Sigma` on the grid of an [`LlnSolution`].
#[derive(Debug, Clone)]
pub struct FcltSolution {
    pub times: Vec<f64>,
    pub h: f64,
    pub x: Vec<[f64; 4]>,
    pub v: Vec<Mat3>,
    pub big_v: Vec<Mat3>,
    pub a: Vec<Mat3>,
    pub sigma: Vec<Mat3>,
}

/// Integrates `Sigma` and `V` alongside the limit path, with the same RK4 step.
pub fn solve_fclt(lln: &LlnSolution, opts: &FcltOptions) -> Result<FcltSolution> {
    if let Some(t) = lln.halted_at {
        return Err(NetdiffError::Singular {
            t,
            reason: "limit path stopped before the horizon".into(),
        });
    }
    let dist = &lln.dist;
    let (beta, alpha_s) = (lln.beta, lln.alpha_s);
    let sigma0 = opts.sigma0.unwrap_or_else(Mat3::zeros);
    check_psd(&sigma0)?;
    let frozen = opts.frozen_drift;
    let rhs = |_t: f64, y: &[f64; 16]| -> Result<[f64; 16]> {
        let x = [y[0], y[1], y[2]];
        let hx = h_drift(&x, y[3], dist, beta, alpha_s)?;
        let v = v_matrix(&x, y[3], dist, beta)?;
        let s = unpack(&y[4..10]);
        let ds = if frozen {
            v
        } else {
            let a = jacobian(&x, y[3], dist, beta)?;
            a * s + s * a.transpose() + v
        };
        let mut out = [0.0; 16];
        out[..4].copy_from_slice(&hx);
        out[4..10].copy_from_slice(&pack(&ds));
        out[10..].copy_from_slice(&pack(&v));
        Ok(out)
    };

    let h = lln.h;
    let mut y = [0.0; 16];
    y[..4].copy_from_slice(&lln.states[0]);
    y[4..10].copy_from_slice(&pack(&sigma0));
    let m = lln.times.len();
    let mut sol = FcltSolution {
        times: lln.times.clone(),
        h,
        x: Vec::with_capacity(m),
        v: Vec::with_capacity(m),
        big_v: Vec::with_capacity(m),
        a: Vec::with_capacity(m),
        sigma: Vec::with_capacity(m),
    };
    for k in 0..m {
        let t = lln.times[k];
        let x = [y[0], y[1], y[2]];
        let at = |e: NetdiffError| match e {
            NetdiffError::Singular { reason, .. } => NetdiffError::Singular { t, reason },
            e => e,
        };
        sol.x.push([y[0], y[1], y[2], y[3]]);
        sol.v.push(v_matrix(&x, y[3], dist, beta).map_err(at)?);
        sol.a.push(if frozen {
            Mat3::zeros()
        } else {
            jacobian(&x, y[3], dist, beta).map_err(at)?
        });
        sol.sigma.push(unpack(&y[4..10]));
        sol.big_v.push(unpack(&y[10..]));
        if k + 1 < m {
            y = rk4_step(&y, t, h, &rhs).map_err(at)?;
        }
    }
    Ok(sol)
}

fn min_eigenvalue(m: &Mat3) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

fn check_psd(m: &Mat3) -> Result<()> {
    let scale = m.abs().max().max(1.0);
    let min = min_eigenvalue(m);
    if min < PSD_FLOOR * scale {
        return Err(NetdiffError::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

/// Cholesky factor of a symmetric psd matrix, with a diagonal jitter of
/// `CHOLESKY_JITTER * trace` when the plain factorisation fails.
pub fn cholesky_with_jitter(m: &Mat3, t: f64) -> Result<Mat3> {
    let trace = m.trace();
    if trace == 0.0 && m.iter().all(|&e| e == 0.0) {
        return Ok(Mat3::zeros());
    }
    if let Some(c) = Cholesky::new(*m) {
        return Ok(c.l());
    }
    let jittered = m + Mat3::identity() * (CHOLESKY_JITTER * trace.abs());
    Cholesky::new(jittered)
        .map(|c| c.l())
        .ok_or(NetdiffError::CholeskyFailed { t })
}

/// Interpolation weights of `t` on a uniform grid.
fn locate(times: &[f64], h: f64, t: f64) -> Result<(usize, f64)> {
    let t_end = *times.last().unwrap();
    if !(0.0..=t_end * (1.0 + 1e-12)).contains(&t) {
        return Err(NetdiffError::OutOfRange {
            value: t,
            range: format!("[0, {t_end}]"),
        });
    }
    let k = ((t / h).floor() as usize).min(times.len() - 1);
    if k == times.len() - 1 {
        return Ok((k, 0.0));
    }
    Ok((k, (t - times[k]) / h))
}

fn interp(series: &[Mat3], k: usize, w: f64) -> Mat3 {
    if w == 0.0 {
        series[k]
    } else {
        series[k] * (1.0 - w) + series[k + 1] * w
    }
}

impl FcltSolution {
    pub fn sigma_at(&self, t: f64) -> Result<Mat3> {
        let (k, w) = locate(&self.times, self.h, t)?;
        Ok(interp(&self.sigma, k, w))
    }

    pub fn v_at(&self, t: f64) -> Result<Mat3> {
        let (k, w) = locate(&self.times, self.h, t)?;
        Ok(interp(&self.v, k, w))
    }

    pub fn big_v_at(&self, t: f64) -> Result<Mat3> {
        let (k, w) = locate(&self.times, self.h, t)?;
        Ok(interp(&self.big_v, k, w))
    }

    /// Smallest eigenvalue over all adjacent increments of `V`.
    pub fn min_v_increment_eigenvalue(&self) -> f64 {
        self.big_v
            .windows(2)
            .map(|w| min_eigenvalue(&(w[1] - w[0])))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest eigenvalue of `Sigma` over the grid.
    pub fn min_sigma_eigenvalue(&self) -> f64 {
        self.sigma.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Checks the structural invariants: `V(0) = 0`, psd increments of `V`,
    /// psd `Sigma`, symmetric `v` with non-negative diagonal.
    pub fn check_invariants(&self) -> Result<()> {
        if self.big_v[0] != Mat3::zeros() {
            return Err(NetdiffError::Mismatch("V(0) is not zero".into()));
        }
        let floor = |m: &Mat3| PSD_FLOOR * m.abs().max().max(1.0);
        for w in self.big_v.windows(2) {
            let d = w[1] - w[0];
            let min = min_eigenvalue(&d);
            if min < floor(&d) {
                return Err(NetdiffError::NotPsd { min_eigenvalue: min });
            }
        }
        for s in &self.sigma {
            check_psd(s)?;
        }
        for v in &self.v {
            if v != &v.transpose() || (0..3).any(|i| v[(i, i)] < 0.0) {
                return Err(NetdiffError::Mismatch(
                    "v is not symmetric with a non-negative diagonal".into(),
                ));
            }
        }
        Ok(())
    }

    /// CSV with `t` and the upper triangles of `v`, `V` and `Sigma`.
    pub fn to_csv(&self) -> String {
        let mut header = String::from("t");
        for prefix in ["v", "V", "Sigma"] {
            for name in UPPER_NAMES {
                header.push_str(&format!(",{prefix}_{name}"));
            }
        }
        let rows: Vec<Vec<f64>> = (0..self.times.len())
            .map(|k| {
                let mut r = vec![self.times[k]];
                r.extend(pack(&self.v[k]));
                r.extend(pack(&self.big_v[k]));
                r.extend(pack(&self.sigma[k]));
                r
            })
            .collect();
        csv_table(&header, rows.iter().map(|r| &r[..]))
    }
}

/// Empirical fluctuations `Y(t) = n^{-1/2} (X(t) - n x(t))`, one per run.
pub fn fluctuation_samples(trajectories: &[Trajectory], lln: &LlnSolution, t: f64) -> Result<Vec<[f64; 3]>> {
    let Some(first) = trajectories.first() else {
        return Ok(Vec::new());
    };
    let n = first.n;
    for tr in trajectories {
        if tr.n != n || tr.params != first.params {
            return Err(NetdiffError::Mismatch("trajectories differ in n or parameters".into()));
        }
    }
    let p = &first.params;
    if (p.beta - lln.beta).abs() > 1e-12 || (p.alpha_s - lln.alpha_s).abs() > 1e-12 {
        return Err(NetdiffError::Mismatch(
            "trajectories and limit use different beta or alpha_S".into(),
        ));
    }
    let x = lln.x_at(t)?;
    let nf = n as f64;
    let scale = nf.sqrt();
    trajectories
        .iter()
        .map(|tr| {
            let c = tr.counts_at(t)?.as_vector();
            Ok(std::array::from_fn(|i| (c[i] - nf * x[i]) / scale))
        })
        .collect()
}

/// Synthetic count path from the diffusion approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionPath {
    pub times: Vec<f64>,
    pub counts: Vec<[f64; 3]>,
}

impl DiffusionPath {
    pub fn to_csv(&self) -> String {
        let rows: Vec<[f64; 4]> = self
            .times
            .iter()
            .zip(&self.counts)
            .map(|(&t, c)| [t, c[0], c[1], c[2]])
            .collect();
        csv_table("t,XS,XSI,XSS", rows.iter().map(|r| &r[..]))
    }
}

/// Euler–Maruyama for `dU = A U dt + dG`, started from `U(0) ~ N(0, Sigma(0))`;
/// returns `n x(t) + sqrt(n) U(t)` clamped to the admissible region.
pub fn diffusion_sample_path<R: Rng + ?Sized>(fclt: &FcltSolution, n: usize, rng: &mut R) -> Result<DiffusionPath> {
    let nf = n as f64;
    let sq = nf.sqrt();
    let h = fclt.h;
    let mut normal = || Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let mut u = cholesky_with_jitter(&fclt.sigma[0], 0.0)? * normal();
    let mut counts = Vec::with_capacity(fclt.times.len());
    for k in 0..fclt.times.len() {
        let x = &fclt.x[k];
        counts.push([
            (nf * x[0] + sq * u[0]).clamp(0.0, nf),
            (nf * x[1] + sq * u[1]).max(0.0),
            (nf * x[2] + sq * u[2]).max(0.0),
        ]);
        if k + 1 < fclt.times.len() {
            let l = cholesky_with_jitter(&fclt.v[k], fclt.times[k])?;
            u = u + fclt.a[k] * u * h + l * normal() * h.sqrt();
        }
    }
    Ok(DiffusionPath {
        times: fclt.times.clone(),
        counts,
    })
}

/// Confidence ellipse of a bivariate normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    /// Major semi-axis.
    pub a: f64,
    /// Minor semi-axis.
    pub b: f64,
    /// Angle of the major axis in `(-pi/2, pi/2]`; 0 when the axes are equal.
    pub angle_rad: f64,
}

pub fn confidence_ellipse(cov: &Matrix2<f64>, center: [f64; 2], level: f64) -> Result<Ellipse> {
    if !(level > 0.0 && level < 1.0) {
        return Err(NetdiffError::param("level", format!("must lie in (0, 1), got {level}")));
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = sym.abs().max().max(f64::MIN_POSITIVE);
    let (i_max, i_min) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let (l_max, l_min) = (eig.eigenvalues[i_max], eig.eigenvalues[i_min]);
    if l_min < PSD_FLOOR * scale {
        return Err(NetdiffError::NotPsd { min_eigenvalue: l_min });
    }
    let q = -2.0 * (1.0 - level).ln();
    let angle = if (l_max - l_min).abs() <= 1e-12 * scale {
        0.0
    } else {
        let e = eig.eigenvectors.column(i_max);
        let mut ang = e[1].atan2(e[0]);
        if ang <= -std::f64::consts::FRAC_PI_2 {
            ang += std::f64::consts::PI;
        } else if ang > std::f64::consts::FRAC_PI_2 {
            ang -= std::f64::consts::PI;
        }
        ang
    };
    Ok(Ellipse {
        cx: center[0],
        cy: center[1],
        a: (q * l_max.max(0.0)).sqrt(),
        b: (q * l_min.max(0.0)).sqrt(),
        angle_rad: angle,
    })
}

/// Ellipses for `(X_S/n, X_SI/n)` at every `stride`-th grid time.
pub fn ellipse_series(fclt: &FcltSolution, n: usize, level: f64, stride: usize) -> Result<Vec<(f64, Ellipse)>> {
    let stride = stride.max(1);
    (0..fclt.times.len())
        .step_by(stride)
        .map(|k| {
            let s = fclt.sigma[k] / n as f64;
            let cov = Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
            Ok((
                fclt.times[k],
                confidence_ellipse(&cov, [fclt.x[k][0], fclt.x[k][1]], level)?,
            ))
        })
        .collect()
}

/// CSV with header `t,cx,cy,a,b,angle_rad`.
pub fn ellipses_csv(series: &[(f64, Ellipse)]) -> String {
    let rows: Vec<[f64; 6]> = series
        .iter()
        .map(|(t, e)| [*t, e.cx, e.cy, e.a, e.b, e.angle_rad])
        .collect();
    csv_table("t,cx,cy,a,b,angle_rad", rows.iter().map(|r| &r[..]))
}

fn correlation_of(v: &Mat3) -> Result<f64> {
    let d = v[(0, 0)] * v[(1, 1)];
    if !(d > 0.0) {
        return Err(NetdiffError::Degenerate(format!("v_S * v_SI = {d}")));
    }
    Ok(v[(0, 1)] / d.sqrt())
}

/// `rho(t) = v_{S,SI} / sqrt(v_S v_SI)`.
pub fn jump_correlation_theory(fclt: &FcltSolution, t: f64) -> Result<f64> {
    correlation_of(&fclt.v_at(t)?)
}

/// Jump correlation over `[t0, t1]`, from the increment of `V`.
pub fn jump_correlation_window_theory(fclt: &FcltSolution, t0: f64, t1: f64) -> Result<f64> {
    correlation_of(&(fclt.big_v_at(t1)? - fclt.big_v_at(t0)?))
}

/// Pooled empirical correlation of `(dX_S, dX_SI)` jumps in a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpCorrelation {
    pub t0: f64,
    pub t1: f64,
    pub rho: f64,
    /// Delta-method standard error, clustered by run.
    pub se: f64,
    pub events: usize,
}

/// `sum dS dSI / sqrt(sum dS^2 sum dSI^2)` over all events with `t0 <= t <= t1`.
pub fn empirical_jump_correlation(trajectories: &[Trajectory], t0: f64, t1: f64) -> Result<JumpCorrelation> {
    let per_run: Vec<[f64; 3]> = trajectories
        .iter()
        .map(|tr| {
            tr.jump_series(t0, t1).iter().fold([0.0; 3], |acc, e| {
                let (ds, dsi) = (e.d_s as f64, e.d_si as f64);
                [acc[0] + ds * dsi, acc[1] + ds * ds, acc[2] + dsi * dsi]
            })
        })
        .collect();
    let r = per_run.len() as f64;
    let m: [f64; 3] = std::array::from_fn(|i| per_run.iter().map(|p| p[i]).sum::<f64>() / r);
    if !(m[1] * m[2] > 0.0) {
        return Err(NetdiffError::Degenerate(format!("no jumps in [{t0}, {t1}]")));
    }
    let rho = m[0] / (m[1] * m[2]).sqrt();
    let g = [1.0 / (m[1] * m[2]).sqrt(), -rho / (2.0 * m[1]), -rho / (2.0 * m[2])];
    let z: Vec<f64> = per_run
        .iter()
        .map(|p| (0..3).map(|i| g[i] * (p[i] - m[i])).sum())
        .collect();
    let se = if per_run.len() > 1 {
        (crate::stats::variance(&z) / r).sqrt()
    } else {
        f64::NAN
    };
    let events = trajectories.iter().map(|tr| tr.jump_series(t0, t1).len()).sum();
    Ok(JumpCorrelation {
        t0,
        t1,
        rho,
        se,
        events,
    })
}
