//! Exact moments of the neighbourhood of a susceptible node.
//!
//! Given the current totals, the neighbours of a susceptible node of degree
//! `k` split into `(n_SI, n_SS)` according to a two-colour hypergeometric law:
//! `k` half-edges are drawn without replacement from the `X_Sdot` susceptible
//! half-edges, `X_SI` of which lead to infected nodes.
//!
//! Arithmetic is exact (`Ratio<i128>`) while `X_Sdot <= EXACT_LIMIT` and
//! double precision beyond.

use std::fmt;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{NetdiffError, Result};

/// Largest `X_Sdot` handled in exact rational arithmetic.
pub const EXACT_LIMIT: u64 = 60;

/// Lower guard for the scaled half-edge mass in the multinomial compensator.
pub const Z_GUARD: f64 = 1e-9;

pub type Rational = Ratio<i128>;

/// Field used for the moment formulas.
pub trait Scalar: Clone + Num {
    fn from_u64(v: u64) -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_u64(v: u64) -> Self {
        v as f64
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rational {
    fn from_u64(v: u64) -> Self {
        Ratio::from_integer(v as i128)
    }
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

fn falling<T: Scalar>(x: u64, r: u32) -> T {
    (0..r as u64).fold(
        T::one(),
        |acc, j| if j > x { T::zero() } else { acc * T::from_u64(x - j) },
    )
}

fn binomial(n: u64, k: u64) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1i128, |acc, j| acc * (n - j) as i128 / (j + 1) as i128)
}

/// Conditional law of `(n_SI, n_SS)` for a susceptible node of degree `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodLaw {
    pub k: u64,
    pub x_si: u64,
    pub x_sdot: u64,
}

impl NeighborhoodLaw {
    pub fn new(k: u64, x_si: u64, x_sdot: u64) -> Result<Self> {
        if x_si > x_sdot {
            return Err(NetdiffError::param("x_si", format!("{x_si} exceeds X_Sdot = {x_sdot}")));
        }
        if k > x_sdot {
            return Err(NetdiffError::param("k", format!("{k} exceeds X_Sdot = {x_sdot}")));
        }
        Ok(Self { k, x_si, x_sdot })
    }

    /// Susceptible-side mass `X_Sdot - X_SI`.
    pub fn ss_mass(&self) -> u64 {
        self.x_sdot - self.x_si
    }

    fn is_exact(&self) -> bool {
        self.x_sdot <= EXACT_LIMIT
    }
}

/// Exact pmf over `n_SI = 0..=k`, as `((n_SI, n_SS), p)`.
pub fn neighborhood_pmf_exact(law: &NeighborhoodLaw) -> Result<Vec<((u64, u64), Rational)>> {
    if !law.is_exact() {
        return Err(NetdiffError::param(
            "x_sdot",
            format!("exact pmf limited to X_Sdot <= {EXACT_LIMIT}"),
        ));
    }
    let total = binomial(law.x_sdot, law.k);
    Ok((0..=law.k)
        .map(|a| {
            let b = law.k - a;
            let w = binomial(law.x_si, a) * binomial(law.ss_mass(), b);
            ((a, b), Ratio::new(w, total))
        })
        .collect())
}

/// Pmf over `n_SI = 0..=k` in double precision.
pub fn neighborhood_pmf(law: &NeighborhoodLaw) -> Vec<((u64, u64), f64)> {
    if let Ok(exact) = neighborhood_pmf_exact(law) {
        return exact.into_iter().map(|(ab, p)| (ab, Scalar::to_f64(&p))).collect();
    }
    // Unnormalised weights from the ratio p(a + 1) / p(a), started at the
    // smallest admissible n_SI.
    let (k, x_si, m) = (law.k, law.x_si, law.ss_mass());
    let lo = k.saturating_sub(m);
    let hi = k.min(x_si);
    let mut w = vec![0.0; (k + 1) as usize];
    let mut cur = 1.0;
    for a in lo..=hi {
        w[a as usize] = cur;
        cur *= ((x_si - a) * (k - a)) as f64 / ((a + 1) * (m + a + 1 - k)) as f64;
    }
    let total: f64 = w.iter().sum();
    (0..=k).map(|a| ((a, k - a), w[a as usize] / total)).collect()
}

fn check_order(a: u32, b: u32) -> Result<()> {
    if a + b > 3 {
        return Err(NetdiffError::UnsupportedOrder {
            order: (a + b) as usize,
            allowed: "a + b <= 3",
        });
    }
    Ok(())
}

fn ffm_generic<T: Scalar>(law: &NeighborhoodLaw, a: u32, b: u32) -> T {
    let denom: T = falling(law.x_sdot, a + b);
    if denom.is_zero() {
        return T::zero();
    }
    falling::<T>(law.k, a + b) * falling(law.x_si, a) * falling(law.ss_mass(), b) / denom
}

/// `E[(n_SI)_a (n_SS)_b] = (k)_{a+b} (X_SI)_a (X_Sdot - X_SI)_b / (X_Sdot)_{a+b}`.
pub fn falling_factorial_moment(law: &NeighborhoodLaw, a: u32, b: u32) -> Result<f64> {
    check_order(a, b)?;
    Ok(if law.is_exact() {
        Scalar::to_f64(&ffm_generic::<Rational>(law, a, b))
    } else {
        ffm_generic::<f64>(law, a, b)
    })
}

/// Exact version of [`falling_factorial_moment`].
pub fn falling_factorial_moment_exact(law: &NeighborhoodLaw, a: u32, b: u32) -> Result<Rational> {
    check_order(a, b)?;
    if !law.is_exact() {
        return Err(NetdiffError::param(
            "x_sdot",
            format!("exact moments limited to X_Sdot <= {EXACT_LIMIT}"),
        ));
    }
    Ok(ffm_generic(law, a, b))
}

/// Conditional moments entering the drift and quadratic variation of the counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `n_SI`
    SQuadvar,
    /// `n_SI (n_SS - n_SI)^2`
    SiQuadvar,
    /// `4 n_SI n_SS^2`
    SsQuadvar,
    /// `-n_SI (n_SS - n_SI)`
    SSiCov,
    /// `2 n_SI n_SS`
    SSsCov,
    /// `-2 n_SI n_SS (n_SS - n_SI)`
    SiSsCov,
    /// `n_SI (n_SS - n_SI)`
    SiDrift,
    /// `-2 n_SI n_SS`
    SsDrift,
}

impl MomentKind {
    pub const ALL: [MomentKind; 8] = [
        MomentKind::SQuadvar,
        MomentKind::SiQuadvar,
        MomentKind::SsQuadvar,
        MomentKind::SSiCov,
        MomentKind::SSsCov,
        MomentKind::SiSsCov,
        MomentKind::SiDrift,
        MomentKind::SsDrift,
    ];

    /// Integrand as `(coefficient, power of n_SI, power of n_SS)`.
    fn monomials(self) -> &'static [(i64, u32, u32)] {
        match self {
            MomentKind::SQuadvar => &[(1, 1, 0)],
            MomentKind::SiQuadvar => &[(1, 1, 2), (-2, 2, 1), (1, 3, 0)],
            MomentKind::SsQuadvar => &[(4, 1, 2)],
            MomentKind::SSiCov => &[(-1, 1, 1), (1, 2, 0)],
            MomentKind::SSsCov => &[(2, 1, 1)],
            MomentKind::SiSsCov => &[(-2, 1, 2), (2, 2, 1)],
            MomentKind::SiDrift => &[(1, 1, 1), (-1, 2, 0)],
            MomentKind::SsDrift => &[(-2, 1, 1)],
        }
    }

    /// The integrand evaluated at a realised neighbourhood.
    pub fn integrand(self, n_si: u64, n_ss: u64) -> i64 {
        let (a, b) = (n_si as i64, n_ss as i64);
        self.monomials().iter().map(|&(c, i, j)| c * a.pow(i) * b.pow(j)).sum()
    }
}

impl fmt::Display for MomentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MomentKind::SQuadvar => "S_quadvar",
            MomentKind::SiQuadvar => "SI_quadvar",
            MomentKind::SsQuadvar => "SS_quadvar",
            MomentKind::SSiCov => "S_SI_cov",
            MomentKind::SSsCov => "S_SS_cov",
            MomentKind::SiSsCov => "SI_SS_cov",
            MomentKind::SiDrift => "SI_drift",
            MomentKind::SsDrift => "SS_drift",
        };
        f.write_str(s)
    }
}

// Stirling numbers of the second kind S(i, p) for i <= 3.
const STIRLING2: [[i64; 4]; 4] = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 1, 1, 0], [0, 1, 3, 1]];

/// Expands `E[sum c a^i b^j]` through `x^i = sum_p S(i, p) (x)_p`, given the
/// mixed falling-factorial moments `ffm(p, q)`.
fn expand<T: Scalar>(kind: MomentKind, ffm: impl Fn(u32, u32) -> T) -> T {
    let mut acc = T::zero();
    for &(c, i, j) in kind.monomials() {
        for p in 0..=i {
            for q in 0..=j {
                let s = STIRLING2[i as usize][p as usize] * STIRLING2[j as usize][q as usize];
                if s != 0 {
                    acc = acc + T::from_i64(c * s) * ffm(p, q);
                }
            }
        }
    }
    acc
}

/// Exact conditional expectation of `kind`'s integrand, from the falling-factorial moments.
pub fn drift_moment_rational(law: &NeighborhoodLaw, kind: MomentKind) -> Result<Rational> {
    if !law.is_exact() {
        return Err(NetdiffError::param(
            "x_sdot",
            format!("exact moments limited to X_Sdot <= {EXACT_LIMIT}"),
        ));
    }
    Ok(expand(kind, |p, q| ffm_generic::<Rational>(law, p, q)))
}

/// Conditional expectation of `kind`'s integrand (exact arithmetic when small).
pub fn drift_moment_exact(law: &NeighborhoodLaw, kind: MomentKind) -> f64 {
    if law.is_exact() {
        Scalar::to_f64(&expand(kind, |p, q| ffm_generic::<Rational>(law, p, q)))
    } else {
        expand(kind, |p, q| ffm_generic::<f64>(law, p, q))
    }
}

/// The same expectation by direct summation over the exact pmf.
pub fn drift_moment_by_enumeration(law: &NeighborhoodLaw, kind: MomentKind) -> Result<Rational> {
    Ok(neighborhood_pmf_exact(law)?
        .into_iter()
        .map(|((a, b), p)| p * Rational::from_integer(kind.integrand(a, b) as i128))
        .fold(Rational::from_integer(0), |acc, x| acc + x))
}

/// Multinomial (with-replacement) approximation of `drift_moment_exact`, with
/// the susceptible half-edge mass given in scaled form `X_Sdot ~ n z`.
pub fn multinomial_compensator(k: u64, n: u64, x_si: f64, x_ss: f64, z: f64, kind: MomentKind) -> Result<f64> {
    if !(z >= Z_GUARD) {
        return Err(NetdiffError::OutOfRange {
            value: z,
            range: format!("[{Z_GUARD}, inf)"),
        });
    }
    if n == 0 {
        return Err(NetdiffError::param("n", "must be positive"));
    }
    let mass = n as f64 * z;
    let (p, r) = (x_si / mass, x_ss / mass);
    Ok(expand(kind, |a, b| {
        falling::<f64>(k, a + b) * p.powi(a as i32) * r.powi(b as i32)
    }))
}

/// `(1/n) sum_{i in S} beta E[integrand_i]` for the degrees of the current
/// susceptible nodes, with `X_SI` and `X_Sdot` the current totals.
pub fn microscopic_rate(
    susceptible_degrees: &[u32],
    x_si: u64,
    x_sdot: u64,
    n: usize,
    beta: f64,
    kind: MomentKind,
) -> Result<f64> {
    let max = susceptible_degrees.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max + 1];
    for &d in susceptible_degrees {
        counts[d as usize] += 1;
    }
    let mut total = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            let law = NeighborhoodLaw::new(k as u64, x_si, x_sdot)?;
            total += c as f64 * drift_moment_exact(&law, kind);
        }
    }
    Ok(beta * total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Ratio::new(n, d)
    }

    #[test]
    fn pmf_examples() {
        let law = NeighborhoodLaw::new(1, 3, 10).unwrap();
        let pmf = neighborhood_pmf_exact(&law).unwrap();
        assert_eq!(pmf, vec![((0, 1), r(7, 10)), ((1, 0), r(3, 10))]);

        let pmf = neighborhood_pmf_exact(&NeighborhoodLaw::new(0, 3, 10).unwrap()).unwrap();
        assert_eq!(pmf, vec![((0, 0), r(1, 1))]);

        let pmf = neighborhood_pmf_exact(&NeighborhoodLaw::new(2, 3, 10).unwrap()).unwrap();
        assert_eq!(pmf[2], ((2, 0), r(1, 15)));
        assert!(NeighborhoodLaw::new(11, 3, 10).is_err());
        assert!(NeighborhoodLaw::new(1, 11, 10).is_err());
    }

    #[test]
    fn pmf_normalises_in_both_paths() {
        for law in [
            NeighborhoodLaw::new(5, 8, 20).unwrap(),
            NeighborhoodLaw::new(7, 300, 1000).unwrap(),
            NeighborhoodLaw::new(45, 1000, 20000).unwrap(),
        ] {
            let total: f64 = neighborhood_pmf(&law).iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12, "{law:?}: {total}");
        }
    }

    #[test]
    fn falling_factorial_examples() {
        let law = NeighborhoodLaw::new(2, 3, 7).unwrap();
        assert_eq!(falling_factorial_moment_exact(&law, 1, 1).unwrap(), r(4, 7));
        let law = NeighborhoodLaw::new(3, 2, 7).unwrap();
        assert_eq!(falling_factorial_moment(&law, 3, 0).unwrap(), 0.0);
        let law = NeighborhoodLaw::new(1, 4, 9).unwrap();
        for (a, b) in [(2, 0), (1, 1), (0, 2), (2, 1), (1, 2), (3, 0)] {
            assert_eq!(falling_factorial_moment(&law, a, b).unwrap(), 0.0);
        }
        assert!(matches!(
            falling_factorial_moment(&law, 2, 2),
            Err(NetdiffError::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn falling_factorial_moments_match_enumeration() {
        for k in 0..=5u64 {
            for x_sdot in k.max(1)..=20 {
                for x_si in 0..=8.min(x_sdot) {
                    let law = NeighborhoodLaw::new(k, x_si, x_sdot).unwrap();
                    let pmf = neighborhood_pmf_exact(&law).unwrap();
                    for a in 0..=3u32 {
                        for b in 0..=(3 - a) {
                            let direct = pmf
                                .iter()
                                .map(|&((na, nb), p)| p * falling::<Rational>(na, a) * falling::<Rational>(nb, b))
                                .fold(Rational::from_integer(0), |acc, x| acc + x);
                            assert_eq!(direct, falling_factorial_moment_exact(&law, a, b).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn drift_moments_match_enumeration() {
        for k in 0..=5u64 {
            for x_sdot in k.max(1)..=20 {
                for x_si in 0..=8.min(x_sdot) {
                    let law = NeighborhoodLaw::new(k, x_si, x_sdot).unwrap();
                    for kind in MomentKind::ALL {
                        let formula = drift_moment_rational(&law, kind).unwrap();
                        assert_eq!(
                            formula,
                            drift_moment_by_enumeration(&law, kind).unwrap(),
                            "{law:?} {kind}"
                        );
                        if x_si == 0 {
                            assert_eq!(formula, Rational::from_integer(0));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cubed_raw_moment_expansion() {
        let law = NeighborhoodLaw::new(4, 5, 13).unwrap();
        let raw3 = neighborhood_pmf_exact(&law)
            .unwrap()
            .into_iter()
            .map(|((a, _), p)| p * Rational::from_integer((a * a * a) as i128))
            .fold(Rational::from_integer(0), |acc, x| acc + x);
        let f = |a| falling_factorial_moment_exact(&law, a, 0).unwrap();
        assert_eq!(raw3, f(3) + Rational::from_integer(3) * f(2) + f(1));
    }

    #[test]
    fn float_path_agrees_with_exact_path() {
        let law = NeighborhoodLaw::new(5, 23, 57).unwrap();
        for kind in MomentKind::ALL {
            let exact = drift_moment_exact(&law, kind);
            let float = expand(kind, |p, q| ffm_generic::<f64>(&law, p, q));
            assert!((exact - float).abs() <= 1e-12 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn compensator_closed_form_and_homogeneity() {
        let (k, n, x_si, x_ss, z) = (4u64, 100u64, 30.0, 170.0, 2.0);
        let (p, q) = (x_si / (n as f64 * z), x_ss / (n as f64 * z));
        let closed = 24.0 * p * (q - p).powi(2) - 12.0 * p * (q - 3.0 * p) + 4.0 * p;
        let c = multinomial_compensator(k, n, x_si, x_ss, z, MomentKind::SiQuadvar).unwrap();
        assert!((c - closed).abs() < 1e-14);
        for kind in MomentKind::ALL {
            let once = multinomial_compensator(k, n, x_si, x_ss, z, kind).unwrap();
            let twice = multinomial_compensator(k, 2 * n, 2.0 * x_si, 2.0 * x_ss, z, kind).unwrap();
            assert!((once - twice).abs() <= 1e-14 * once.abs().max(1.0));
            assert_eq!(multinomial_compensator(k, n, 0.0, x_ss, z, kind).unwrap(), 0.0);
        }
        assert!(multinomial_compensator(k, n, x_si, x_ss, 1e-10, MomentKind::SiDrift).is_err());
    }

    #[test]
    fn compensator_approaches_hypergeometric() {
        for kind in MomentKind::ALL {
            let mut last = f64::INFINITY;
            for scale in [10u64, 100, 1000] {
                let (x_si, x_sdot) = (3 * scale, 10 * scale);
                let law = NeighborhoodLaw::new(5, x_si, x_sdot).unwrap();
                let exact = drift_moment_exact(&law, kind);
                let z = x_sdot as f64 / scale as f64;
                let comp = multinomial_compensator(5, scale, x_si as f64, (x_sdot - x_si) as f64, z, kind).unwrap();
                let err = (comp - exact).abs();
                // Linear integrands are reproduced exactly by both laws.
                assert!(
                    err < last || err < 1e-12 * exact.abs().max(1.0),
                    "{kind} at scale {scale}: {err} vs {last}"
                );
                last = err;
            }
        }
    }

    #[test]
    fn microscopic_rate_groups_degrees() {
        let degs = [2u32, 3, 2, 5];
        let direct: f64 = degs
            .iter()
            .map(|&d| drift_moment_exact(&NeighborhoodLaw::new(d as u64, 4, 12).unwrap(), MomentKind::SiQuadvar))
            .sum();
        let grouped = microscopic_rate(&degs, 4, 12, 10, 0.5, MomentKind::SiQuadvar).unwrap();
        assert!((grouped - 0.5 * direct / 10.0).abs() < 1e-15);
    }
}
