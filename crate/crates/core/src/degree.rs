//! Degree distributions and the generating-function calculus built on them.
//!
//! Every distribution is stored as a finite pmf table indexed by degree.
//! Infinite-support families are truncated at the first degree `K` whose
//! remaining third-moment mass `sum_{k > K} k^3 p_k` is provably below
//! [`TAIL_TOLERANCE`], then renormalised.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NetdiffError, Result};

/// Bound on the discarded third-moment tail of a truncated pmf.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Threshold below which a first derivative of the pgf counts as vanishing.
pub const EPS_SING: f64 = 1e-12;

const MAX_TRUNCATION_DEGREE: usize = 1_000_000;
const PARITY_RETRIES: usize = 1000;

/// Serializable description of a degree distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistSpec {
    Poisson {
        lambda: f64,
    },
    /// Number-of-failures form: `p_k = C(k+r-1, k) (1-p)^k p^r`.
    NegativeBinomial {
        r: u32,
        p: f64,
    },
    Regular {
        r: u32,
    },
    Table {
        pmf: Vec<(u32, f64)>,
    },
}

impl DistSpec {
    /// Parses the compact command-line form, e.g. `poisson:5`,
    /// `negbin:2,0.75`, `regular:3` or `table:1=0.7,4=0.2,45=0.1`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| NetdiffError::param("dist", format!("expected `kind:args`, got `{s}`")))?;
        let bad = |what: &str| NetdiffError::param("dist", format!("{what} in `{s}`"));
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad("malformed number"));
        let int = |x: &str| x.trim().parse::<u32>().map_err(|_| bad("malformed integer"));
        match kind.trim() {
            "poisson" => Ok(DistSpec::Poisson { lambda: num(args)? }),
            "regular" => Ok(DistSpec::Regular { r: int(args)? }),
            "negbin" | "negative_binomial" => {
                let (r, p) = args.split_once(',').ok_or_else(|| bad("expected `r,p`"))?;
                Ok(DistSpec::NegativeBinomial { r: int(r)?, p: num(p)? })
            }
            "table" => {
                let pmf = args
                    .split(',')
                    .map(|entry| {
                        let (k, p) = entry.split_once('=').ok_or_else(|| bad("expected `k=p`"))?;
                        Ok((int(k)?, num(p)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(DistSpec::Table { pmf })
            }
            other => Err(bad(&format!("unknown kind `{other}`"))),
        }
    }

    pub fn build(&self) -> Result<DegreeDistribution> {
        match self {
            DistSpec::Poisson { lambda } => DegreeDistribution::poisson(*lambda),
            DistSpec::NegativeBinomial { r, p } => DegreeDistribution::negative_binomial(*r, *p),
            DistSpec::Regular { r } => Ok(DegreeDistribution::regular(*r)),
            DistSpec::Table { pmf } => DegreeDistribution::table(pmf),
        }
    }
}

impl std::fmt::Display for DistSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistSpec::Poisson { lambda } => write!(f, "poisson:{lambda}"),
            DistSpec::NegativeBinomial { r, p } => write!(f, "negbin:{r},{p}"),
            DistSpec::Regular { r } => write!(f, "regular:{r}"),
            DistSpec::Table { pmf } => {
                write!(f, "table:")?;
                for (i, (k, p)) in pmf.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}={p}")?;
                }
                Ok(())
            }
        }
    }
}

/// A degree distribution with finite support, `pmf[k] = p_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    spec: DistSpec,
    pmf: Vec<f64>,
}

impl Serialize for DegreeDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DegreeDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = DistSpec::deserialize(d)?;
        spec.build().map_err(serde::de::Error::custom)
    }
}

impl DegreeDistribution {
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(NetdiffError::param("lambda", format!("must be positive, got {lambda}")));
        }
        if lambda > 700.0 {
            return Err(NetdiffError::param("lambda", "exp(-lambda) underflows above 700"));
        }
        let pmf = truncated_series((-lambda).exp(), |k| lambda / (k as f64 + 1.0))?;
        Ok(Self::normalised(DistSpec::Poisson { lambda }, pmf))
    }

    pub fn negative_binomial(r: u32, p: f64) -> Result<Self> {
        if r < 1 {
            return Err(NetdiffError::param("r", "must be at least 1"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(NetdiffError::param("p", format!("must lie in (0, 1), got {p}")));
        }
        let q = 1.0 - p;
        let p0 = p.powi(r as i32);
        if p0 == 0.0 {
            return Err(NetdiffError::param("p", "p^r underflows"));
        }
        let pmf = truncated_series(p0, |k| (k as f64 + r as f64) / (k as f64 + 1.0) * q)?;
        Ok(Self::normalised(DistSpec::NegativeBinomial { r, p }, pmf))
    }

    pub fn regular(r: u32) -> Self {
        let mut pmf = vec![0.0; r as usize + 1];
        pmf[r as usize] = 1.0;
        DegreeDistribution {
            spec: DistSpec::Regular { r },
            pmf,
        }
    }

    /// Explicit `(k, p_k)` table; duplicate degrees are merged.
    pub fn table(entries: &[(u32, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(NetdiffError::param("pmf", "table is empty"));
        }
        let max_k = entries.iter().map(|&(k, _)| k).max().unwrap_or(0) as usize;
        let mut pmf = vec![0.0; max_k + 1];
        for &(k, p) in entries {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(NetdiffError::param(
                    "pmf",
                    format!("negative or invalid mass {p} at k={k}"),
                ));
            }
            pmf[k as usize] += p;
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(NetdiffError::param("pmf", format!("masses sum to {total}, expected 1")));
        }
        while pmf.len() > 1 && pmf[pmf.len() - 1] == 0.0 {
            pmf.pop();
        }
        Ok(Self::normalised(DistSpec::Table { pmf: entries.to_vec() }, pmf))
    }

    fn normalised(spec: DistSpec, mut pmf: Vec<f64>) -> Self {
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= total);
        DegreeDistribution { spec, pmf }
    }

    pub fn spec(&self) -> &DistSpec {
        &self.spec
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn truncation_degree(&self) -> usize {
        self.pmf.len() - 1
    }

    /// `psi(x) = sum_k p_k x^k` for `x` in `[0, 1]`.
    pub fn pgf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.pgf_unchecked(x, 0))
    }

    /// `r`-th derivative of the pgf, `sum_k (k)_r p_k x^(k-r)`, for `r` in 1..=3.
    pub fn pgf_deriv(&self, x: f64, r: usize) -> Result<f64> {
        if !(1..=3).contains(&r) {
            return Err(NetdiffError::UnsupportedOrder {
                order: r,
                allowed: "1..=3",
            });
        }
        check_unit(x)?;
        Ok(self.pgf_unchecked(x, r))
    }

    /// Horner evaluation of the `order`-th derivative; no range checks.
    pub(crate) fn pgf_unchecked(&self, x: f64, order: usize) -> f64 {
        let mut acc = 0.0;
        for k in (order..self.pmf.len()).rev() {
            acc = acc * x + falling(k, order) * self.pmf[k];
        }
        acc
    }

    /// `D_r psi(x) = psi^(r-1) psi^(r) / (psi')^r` for `r` in {2, 3}.
    pub fn d_operator(&self, x: f64, r: usize) -> Result<f64> {
        if !(2..=3).contains(&r) {
            return Err(NetdiffError::UnsupportedOrder {
                order: r,
                allowed: "2..=3",
            });
        }
        check_unit(x)?;
        self.d_operator_unchecked(x, r)
    }

    pub(crate) fn d_operator_unchecked(&self, x: f64, r: usize) -> Result<f64> {
        let d1 = self.pgf_unchecked(x, 1);
        if d1 <= EPS_SING {
            return Err(NetdiffError::Singular {
                t: f64::NAN,
                reason: format!("psi'({x}) = {d1} vanishes"),
            });
        }
        let psi = self.pgf_unchecked(x, 0);
        let dr = self.pgf_unchecked(x, r);
        Ok(psi.powi(r as i32 - 1) * dr / d1.powi(r as i32))
    }

    /// Excess-degree factor `kappa = psi psi'' / psi'^2`.
    pub fn kappa(&self, theta: f64) -> Result<f64> {
        self.d_operator(theta, 2)
    }

    /// Raw moment `sum_k k^r p_k`, `r` in 0..=3.
    pub fn moment(&self, r: u32) -> Result<f64> {
        if r > 3 {
            return Err(NetdiffError::UnsupportedOrder {
                order: r as usize,
                allowed: "0..=3",
            });
        }
        Ok(self
            .pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64).powi(r as i32) * p)
            .sum())
    }

    pub fn mean(&self) -> f64 {
        self.pgf_unchecked(1.0, 1)
    }

    /// Draws `n` i.i.d. degrees. An odd total is repaired by redrawing the
    /// last entry; a pmf supported on odd degrees only with odd `n` is an error.
    pub fn sample_degree_sequence<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<u32>> {
        if n == 0 {
            return Err(NetdiffError::param("n", "must be at least 1"));
        }
        let sampler = WeightedIndex::new(&self.pmf).map_err(|e| NetdiffError::param("pmf", e.to_string()))?;
        let mut degrees: Vec<u32> = (0..n).map(|_| sampler.sample(rng) as u32).collect();
        let mut total: u64 = degrees.iter().map(|&d| d as u64).sum();
        if total.is_multiple_of(2) {
            return Ok(degrees);
        }
        let has_even = self.pmf.iter().step_by(2).any(|&p| p > 0.0);
        let has_odd = self.pmf.iter().skip(1).step_by(2).any(|&p| p > 0.0);
        if !(has_even && has_odd) {
            return Err(NetdiffError::OddDegreeSum(format!(
                "all support degrees share one parity and n = {n} gives an odd total"
            )));
        }
        let last = n - 1;
        for _ in 0..PARITY_RETRIES {
            total -= degrees[last] as u64;
            degrees[last] = sampler.sample(rng) as u32;
            total += degrees[last] as u64;
            if total.is_multiple_of(2) {
                return Ok(degrees);
            }
        }
        Err(NetdiffError::OddDegreeSum(format!(
            "parity not repaired after {PARITY_RETRIES} redraws"
        )))
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(NetdiffError::OutOfRange {
            value: x,
            range: "[0, 1]".into(),
        })
    }
}

/// Falling factorial `(k)_r` as a float.
pub(crate) fn falling(k: usize, r: usize) -> f64 {
    (0..r).map(|j| k as f64 - j as f64).product()
}

/// Builds `p_0, p_1, ...` from `p_0` and the ratio `p_{k+1} / p_k`, stopping once
/// the remaining third-moment tail is bounded by [`TAIL_TOLERANCE`].
///
/// The bound is geometric: with `t_k = k^3 p_k` and a ratio `t_{k+1}/t_k` that is
/// eventually decreasing (true for Poisson and negative binomial),
/// `sum_{j > K} t_j <= t_{K+1} / (1 - t_{K+2}/t_{K+1})`.
fn truncated_series(p0: f64, ratio: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    let mut pmf = vec![p0];
    loop {
        let k = pmf.len() - 1;
        if k >= MAX_TRUNCATION_DEGREE {
            return Err(NetdiffError::ThirdMomentDivergent {
                max_degree: MAX_TRUNCATION_DEGREE,
            });
        }
        let next = pmf[k] * ratio(k);
        let past_mode = ratio(k) < 1.0;
        if k >= 1 && past_mode {
            let t_next = ((k + 1) as f64).powi(3) * next;
            let q = ((k + 2) as f64 / (k + 1) as f64).powi(3) * ratio(k + 1);
            if q < 1.0 && t_next / (1.0 - q) < TAIL_TOLERANCE {
                return Ok(pmf);
            }
        }
        pmf.push(next);
    }
}
