//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Run with `cargo test --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use netdiff_core::experiments::{
    compare_mc_theory, discounted_cost, giant_component_fraction, sup_deviation, CompareParams, CompareReport,
    CostMethod, CostParams,
};
use netdiff_core::fclt::{jacobian, solve_fclt, FcltOptions, Sigma0};
use netdiff_core::gillespie::simulate_fresh;
use netdiff_core::hypermoments::{
    drift_moment_by_enumeration, drift_moment_exact, falling_factorial_moment_exact, neighborhood_pmf_exact,
    MomentKind, NeighborhoodLaw, Rational,
};
use netdiff_core::lln::{h_drift, solve_lln};
use netdiff_core::rng::{replica_rng, run_replicas};
use netdiff_core::{DegreeDistribution, GraphMode, SiParams};
use num_traits::ToPrimitive;
use rand::Rng;

const BETA: f64 = 0.5;
const ALPHA_S: f64 = 0.9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn poisson5() -> DegreeDistribution {
    DegreeDistribution::poisson(5.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn hypergeometric_oracle() -> Verdict {
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for k in 0..=5u64 {
        for x_sdot in 0..=20u64 {
            for x_si in 0..=8u64.min(x_sdot) {
                let Ok(law) = NeighborhoodLaw::new(k, x_si, x_sdot) else {
                    continue;
                };
                let pmf = neighborhood_pmf_exact(&law).unwrap();
                for a in 0..=3u32 {
                    for b in 0..=(3 - a) {
                        let formula = falling_factorial_moment_exact(&law, a, b).unwrap();
                        let direct = pmf
                            .iter()
                            .map(|&((i, j), p)| p * Rational::from_integer(falling(i, a) * falling(j, b)))
                            .fold(Rational::from_integer(0), |acc, x| acc + x);
                        worst = worst.max(rel(formula.to_f64().unwrap(), direct.to_f64().unwrap()));
                        cases += 1;
                    }
                }
                for kind in MomentKind::ALL {
                    let direct = drift_moment_by_enumeration(&law, kind).unwrap().to_f64().unwrap();
                    worst = worst.max(rel(drift_moment_exact(&law, kind), direct));
                    cases += 1;
                }
            }
        }
    }
    verdict(worst <= 1e-14, format!("{cases} cases, max rel err {worst:.1e}"))
}

fn falling(x: u64, r: u32) -> i128 {
    (0..r as u64).map(|j| x as i128 - j as i128).product()
}

fn jacobian_check() -> Verdict {
    let mut rng = replica_rng(2, 0);
    let dists = [poisson5(), DegreeDistribution::regular(3)];
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let d = &dists[trial % 2];
        let x = [
            rng.random_range(0.05..1.0),
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..6.0),
        ];
        let theta = rng.random_range(0.2..1.0);
        let beta = rng.random_range(0.1..2.0);
        let a = jacobian(&x, theta, d, beta).unwrap();
        for j in 0..3 {
            let step = 1e-6 * x[j].abs().max(1.0);
            let (mut up, mut dn) = (x, x);
            up[j] += step;
            dn[j] -= step;
            let hu = h_drift(&up, theta, d, beta, ALPHA_S).unwrap();
            let hd = h_drift(&dn, theta, d, beta, ALPHA_S).unwrap();
            for i in 0..3 {
                let fd = (hu[i] - hd[i]) / (2.0 * step);
                worst = worst.max((fd - a[(i, j)]).abs() / a[(i, j)].abs().max(1.0));
            }
        }
    }
    verdict(worst < 1e-6, format!("100 states, max rel err {worst:.1e}"))
}

fn lln_scaling() -> Verdict {
    let dist = poisson5();
    let t_end = 2.0;
    let lln = solve_lln(&dist, BETA, ALPHA_S, t_end, t_end / 2000.0).unwrap();
    let params = SiParams::new(BETA, ALPHA_S, t_end).unwrap();
    let median_sup = |n: usize, seed: u64| {
        let mut sups: Vec<f64> = run_replicas(50, seed, |_, rng| {
            let tr = simulate_fresh(&dist, n, GraphMode::Erased, &params, rng).unwrap();
            sup_deviation(&tr, &lln, t_end).unwrap()
        });
        sups.sort_by(f64::total_cmp);
        0.5 * (sups[24] + sups[25])
    };
    let small = median_sup(500, 3);
    let large = median_sup(4000, 4);
    let ratio = large / small;
    verdict(
        ratio <= 0.6,
        format!("median sup dev {small:.4} (n=500), {large:.4} (n=4000), ratio {ratio:.3}"),
    )
}

fn fluctuation_report(dist: &DegreeDistribution) -> CompareReport {
    let p = CompareParams {
        n: 2000,
        beta: BETA,
        alpha_s: ALPHA_S,
        t_max: 1.5,
        replicas: 2000,
        checkpoints: vec![0.25, 0.5, 1.0],
        seed: 1,
        mode: GraphMode::Erased,
        sigma0: Sigma0::Configuration,
        h: 1.5 / 2000.0,
        jump_window: 0.05,
        cov_rel_tol: 0.1,
        ks_alpha: 0.01,
    };
    compare_mc_theory(dist, &p).unwrap()
}

fn covariance_check(reports: &[(&str, CompareReport)]) -> Verdict {
    let mut failed = Vec::new();
    let mut entries = 0;
    for (name, rep) in reports {
        for c in rep.checkpoints.iter().filter(|c| c.t == 0.5 || c.t == 1.0) {
            for e in &c.covariance {
                entries += 1;
                if !e.pass {
                    failed.push(format!(
                        "{name} t={} {} emp {:.4} theory {:.4}",
                        c.t, e.entry, e.empirical, e.theory
                    ));
                }
            }
        }
    }
    let detail = if failed.is_empty() {
        format!("{entries} entries within max(10%, 3 se)")
    } else {
        failed.join("; ")
    };
    verdict(failed.is_empty(), detail)
}

fn gaussianity_check(reports: &[(&str, CompareReport)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rep) in reports {
        let c = rep.checkpoints.iter().find(|c| c.t == 1.0).unwrap();
        match &c.ks_y_s {
            Some(k) => {
                pass &= k.p_value >= 0.01;
                parts.push(format!("{name} D={:.4} p={:.3}", k.statistic, k.p_value));
            }
            None => {
                pass = false;
                parts.push(format!("{name} degenerate sample"));
            }
        }
    }
    verdict(pass, parts.join(", "))
}

fn jump_check(reports: &[(&str, CompareReport)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rep) in reports {
        for c in &rep.checkpoints {
            match &c.jump {
                Some(j) => {
                    pass &= j.pass;
                    parts.push(format!(
                        "{name} t={} rho {:.3} vs {:.3} (z {:.2})",
                        c.t, j.empirical.rho, j.theory_window, j.z
                    ));
                }
                None => {
                    pass = false;
                    parts.push(format!("{name} t={} no jumps", c.t));
                }
            }
        }
    }
    verdict(pass, parts.join(", "))
}

fn v_structure() -> Verdict {
    let dist = poisson5();
    let t_end = 2.0;
    let h = t_end / 2000.0;
    let opts = FcltOptions::default();
    let coarse = solve_fclt(&solve_lln(&dist, BETA, ALPHA_S, t_end, h).unwrap(), &opts).unwrap();
    let fine = solve_fclt(&solve_lln(&dist, BETA, ALPHA_S, t_end, h / 2.0).unwrap(), &opts).unwrap();
    let asym = coarse
        .big_v
        .iter()
        .map(|m| (m - m.transpose()).abs().max())
        .fold(0.0, f64::max);
    let min_eig = coarse.min_v_increment_eigenvalue();
    let refine = coarse
        .big_v
        .iter()
        .enumerate()
        .map(|(k, m)| (m - fine.big_v[2 * k]).abs().max())
        .fold(0.0, f64::max);
    verdict(
        asym == 0.0 && min_eig >= -1e-9 && refine <= 1e-6,
        format!("asymmetry {asym:.1e}, min increment eigenvalue {min_eig:.2e}, h vs h/2 {refine:.1e}"),
    )
}

fn kappa_identities() -> Verdict {
    let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
    let poisson = poisson5();
    let mut worst = 0.0f64;
    for &th in &grid {
        worst = worst.max((poisson.kappa(th).unwrap() - 1.0).abs());
        worst = worst.max((poisson.d_operator(th, 3).unwrap() - 1.0).abs());
        for r in [3u32, 4, 6] {
            let reg = DegreeDistribution::regular(r);
            worst = worst.max((reg.kappa(th).unwrap() - (r - 1) as f64 / r as f64).abs());
        }
    }
    verdict(worst <= 1e-9, format!("max deviation {worst:.1e}"))
}

fn giant_component() -> Verdict {
    let mut worst = 0.0f64;
    for lambda in [1.5, 2.0, 4.0] {
        let gc = giant_component_fraction(&DegreeDistribution::poisson(lambda).unwrap());
        let mut s = 1.0;
        for _ in 0..10_000 {
            s = 1.0 - (-lambda * s).exp();
        }
        worst = worst.max((gc.fraction - s).abs());
    }
    verdict(worst <= 1e-10, format!("max deviation {worst:.1e}"))
}

fn cost_cross_method() -> Verdict {
    let dist = poisson5();
    let mut p = CostParams {
        n: 1000,
        beta: BETA,
        alpha_s: ALPHA_S,
        gamma: 1.0,
        c: 1.0 / 1000.0,
        t_max: 3.0,
        method: CostMethod::MonteCarlo,
        replicas: 500,
        seed: 1,
        mode: GraphMode::Erased,
        sigma0: Sigma0::Configuration,
        h: 3.0 / 2000.0,
    };
    let mc = discounted_cost(&dist, &p).unwrap();
    p.method = CostMethod::Gaussian;
    let gauss = discounted_cost(&dist, &p).unwrap();
    let diff = rel(mc.log_cost, gauss.log_cost);
    verdict(
        diff <= 0.05,
        format!(
            "log cost MC {:.4} Gaussian {:.4}, rel diff {diff:.4}",
            mc.log_cost, gauss.log_cost
        ),
    )
}

fn run_cli(args: &[&str], out: &Path, threads: usize) -> (Option<i32>, Vec<(String, Vec<u8>)>) {
    let status = Command::new(env!("CARGO_BIN_EXE_netdiff"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .unwrap()
        .status;
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    (status.code(), files)
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let commands: [&[&str]; 4] = [
        &["simulate", "--seed", "5", "--n", "2000", "--export-graph"],
        &[
            "compare",
            "--seed",
            "5",
            "--n",
            "500",
            "--replicas",
            "200",
            "--T",
            "1.5",
            "--checkpoints",
            "0.5,1",
        ],
        &[
            "cost",
            "--method",
            "monte_carlo",
            "--seed",
            "5",
            "--n",
            "500",
            "--replicas",
            "100",
        ],
        &["fclt", "--paths", "20", "--seed", "5"],
    ];
    let mut bad = Vec::new();
    for (i, cmd) in commands.iter().enumerate() {
        let out = dir.path().join(format!("c{i}"));
        let first = run_cli(cmd, &out, 1);
        std::fs::remove_dir_all(&out).unwrap();
        let second = run_cli(cmd, &out, 4);
        let third = run_cli(cmd, &out, 4);
        if first.1.is_empty() || first != second || second != third {
            bad.push(cmd[0]);
        }
    }
    let detail = if bad.is_empty() {
        format!(
            "{} commands byte-identical across reruns and --threads 1/4",
            commands.len()
        )
    } else {
        format!("outputs differ for {}", bad.join(", "))
    };
    verdict(bad.is_empty(), detail)
}

fn main() {
    // libtest-style flags (e.g. from `cargo test -- --nocapture`) are ignored.
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &dyn Fn() -> Verdict| -> Duration {
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        println!(
            "criterion {id:>2} {}: {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
        if !v.pass {
            failures += 1;
        }
        elapsed
    };

    let t1 = report(1, "hypergeometric oracle", &hypergeometric_oracle);
    let t2 = report(2, "Jacobian vs finite differences", &jacobian_check);
    let t3 = report(3, "LLN n^-1/2 scaling", &lln_scaling);
    let start = Instant::now();
    let reports = [
        ("poisson:5", fluctuation_report(&poisson5())),
        ("regular:3", fluctuation_report(&DegreeDistribution::regular(3))),
    ];
    let t4 = start.elapsed();
    println!("fluctuation replicas simulated in {:.1}s", t4.as_secs_f64());
    report(4, "fluctuation covariance", &|| covariance_check(&reports));
    report(5, "Gaussianity of Y_S(1)", &|| gaussianity_check(&reports));
    report(6, "V matrix structure", &v_structure);
    report(7, "kappa and D_3 identities", &kappa_identities);
    report(8, "giant component", &giant_component);
    report(9, "jump correlation", &|| jump_check(&reports));
    report(10, "discounted cost MC vs Gaussian", &cost_cross_method);
    report(11, "determinism", &determinism);

    let mut runtime_ok = true;
    for (id, t, limit) in [(1, t1, 10.0), (2, t2, 1.0), (3, t3, 120.0), (4, t4, 600.0)] {
        if t.as_secs_f64() > limit {
            println!(
                "criterion {id:>2} FAIL: runtime {:.1}s exceeds {limit}s",
                t.as_secs_f64()
            );
            runtime_ok = false;
        }
    }
    if failures > 0 || !runtime_ok {
        std::process::exit(1);
    }
}
