use netdiff_core::experiments::fclt_options;
use netdiff_core::fclt::{solve_fclt, Sigma0};
use netdiff_core::gillespie::{simulate, EpidemicState};
use netdiff_core::graph::build_configuration_model;
use netdiff_core::hypermoments::{
    drift_moment_by_enumeration, drift_moment_rational, neighborhood_pmf, MomentKind, NeighborhoodLaw,
};
use netdiff_core::lln::solve_lln;
use netdiff_core::rng::replica_rng;
use netdiff_core::{DegreeDistribution, DistSpec, GraphMode, SiParams};
use proptest::prelude::*;

fn dist_strategy() -> impl Strategy<Value = DegreeDistribution> {
    prop_oneof![
        (0.5f64..8.0).prop_map(|l| DegreeDistribution::poisson(l).unwrap()),
        (2u32..7).prop_map(DegreeDistribution::regular),
        (1u32..4, 0.3f64..0.9).prop_map(|(r, p)| DegreeDistribution::negative_binomial(r, p).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_formulas_match_enumeration(k in 0u64..12, x_si in 0u64..30, extra in 0u64..30) {
        let x_sdot = x_si + extra;
        if let Ok(law) = NeighborhoodLaw::new(k, x_si, x_sdot) {
            for kind in MomentKind::ALL {
                prop_assert_eq!(drift_moment_rational(&law, kind).unwrap(), drift_moment_by_enumeration(&law, kind).unwrap());
            }
        }
    }

    #[test]
    fn float_pmf_sums_to_one(k in 0u64..20, x_si in 0u64..2000, extra in 0u64..2000) {
        let x_sdot = x_si + extra;
        if let Ok(law) = NeighborhoodLaw::new(k, x_si, x_sdot) {
            let total: f64 = neighborhood_pmf(&law).iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dist_spec_display_round_trips(lambda in 0.1f64..20.0, r in 1u32..10, p in 0.05f64..0.95) {
        for spec in [
            DistSpec::Poisson { lambda },
            DistSpec::NegativeBinomial { r, p },
            DistSpec::Regular { r },
        ] {
            prop_assert_eq!(DistSpec::parse(&spec.to_string()).unwrap(), spec);
        }
    }

    #[test]
    fn multigraph_preserves_degrees(seed in any::<u64>(), n in 2usize..300, lambda in 0.5f64..6.0) {
        let mut rng = replica_rng(seed, 0);
        let dist = DegreeDistribution::poisson(lambda).unwrap();
        let degrees = dist.sample_degree_sequence(n, &mut rng).unwrap();
        let g = build_configuration_model(&degrees, GraphMode::Multigraph, &mut rng).unwrap();
        prop_assert_eq!(g.degrees(), degrees.clone());
        let e = build_configuration_model(&degrees, GraphMode::Erased, &mut rng).unwrap();
        for (i, &d) in degrees.iter().enumerate() {
            prop_assert!(e.degree(i) <= d);
            prop_assert!(!e.neighbors(i).contains(&(i as u32)));
        }
    }

    #[test]
    fn incremental_counts_match_recount(seed in any::<u64>(), n in 5usize..150, alpha_s in 0.5f64..0.99) {
        let mut rng = replica_rng(seed, 1);
        let dist = DegreeDistribution::poisson(3.0).unwrap();
        let degrees = dist.sample_degree_sequence(n, &mut rng).unwrap();
        let g = build_configuration_model(&degrees, GraphMode::Multigraph, &mut rng).unwrap();
        let mut state = EpidemicState::init(&g, 1.0, alpha_s, &mut rng).unwrap();
        state.validate().unwrap();
        while let Some(e) = state.step(&mut rng) {
            prop_assert_eq!(e.d_s, -1);
            state.validate().unwrap();
        }
        prop_assert_eq!(state.counts().si, 0);
    }

    #[test]
    fn trajectory_counts_are_monotone(seed in any::<u64>(), beta in 0.1f64..3.0) {
        let mut rng = replica_rng(seed, 2);
        let dist = DegreeDistribution::regular(4);
        let degrees = dist.sample_degree_sequence(200, &mut rng).unwrap();
        let g = build_configuration_model(&degrees, GraphMode::Erased, &mut rng).unwrap();
        let tr = simulate(&g, &SiParams::new(beta, 0.9, 3.0).unwrap(), &mut rng).unwrap();
        let mut c = tr.initial;
        let mut last_t = 0.0;
        for e in &tr.events {
            prop_assert!(e.t >= last_t && e.t <= 3.0);
            last_t = e.t;
            let ss = c.ss;
            c.apply(e);
            prop_assert!(c.ss <= ss && c.si >= 0);
        }
        prop_assert_eq!(c, tr.final_counts());
    }

    #[test]
    fn limit_path_stays_on_its_invariant_manifold(d in dist_strategy(), beta in 0.05f64..2.0, alpha_s in 0.5f64..0.99) {
        let sol = solve_lln(&d, beta, alpha_s, 2.0, 0.002).unwrap();
        for s in &sol.states {
            let theta = s[3];
            prop_assert!(theta > 0.0 && theta <= 1.0);
            prop_assert!((s[0] - alpha_s * d.pgf(theta).unwrap()).abs() < 1e-8);
            prop_assert!((s[1] + s[2] - alpha_s * theta * d.pgf_deriv(theta, 1).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn fluctuation_covariance_is_psd(d in dist_strategy(), beta in 0.05f64..2.0, alpha_s in 0.5f64..0.99) {
        let lln = solve_lln(&d, beta, alpha_s, 2.0, 0.002).unwrap();
        for sigma0 in [Sigma0::Zero, Sigma0::Configuration] {
            let f = solve_fclt(&lln, &fclt_options(&d, alpha_s, sigma0).unwrap()).unwrap();
            f.check_invariants().unwrap();
            prop_assert!(f.min_sigma_eigenvalue() >= -1e-9);
            prop_assert!(f.min_v_increment_eigenvalue() >= -1e-9);
        }
    }
}
