use ineqstat::distributions::*;
use ineqstat::energy::*;
use ineqstat::fokker_planck::*;
use ineqstat::income::*;
use ineqstat::kinetic::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exchange_conserves_money_and_floor(
        n in 2usize..60,
        per_agent in 0i64..30,
        debt in 0i64..10,
        fixed in any::<bool>(),
        delta in 1i64..5,
        seed in any::<u64>(),
    ) {
        let base = if fixed { ExchangeRule::fixed(delta).unwrap() } else { ExchangeRule::uniform() };
        let rule = base.with_debt_limit(debt).unwrap();
        let mut ens = AgentEnsemble::new(n, per_agent * n as i64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..2000 {
            exchange_step(&mut ens, &rule, &mut rng);
        }
        prop_assert_eq!(ens.balance_sum(), per_agent * n as i64);
        prop_assert!(ens.min_balance() >= -debt);
    }

    #[test]
    fn entropy_bounds(counts in prop::collection::vec(0u64..6, 1..8)) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let s = entropy(&counts).unwrap();
        prop_assert!(s >= 0.0);
        let mut rev = counts.clone();
        rev.reverse();
        prop_assert!((entropy(&rev).unwrap() - s).abs() <= 1e-12 * s.max(1.0));
        if counts.iter().sum::<u64>() <= 20 {
            let m = multiplicity_exact(&counts).unwrap();
            prop_assert!(m.ln_omega <= s + 1e-9);
        }
    }

    #[test]
    fn two_class_ccdf_is_a_survival_function(
        t in 1.0f64..100.0,
        alpha in 1.05f64..4.0,
        r0_over_t in 0.1f64..10.0,
        xs in prop::collection::vec(0.0f64..2000.0, 2..12),
    ) {
        let m = TwoClassModel::new(t, alpha, r0_over_t * t).unwrap();
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let cs: Vec<f64> = xs.iter().map(|&x| m.ccdf(x).unwrap()).collect();
        prop_assert!(cs.iter().all(|c| (0.0..=1.0).contains(c)));
        prop_assert!(cs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!((m.ccdf(0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lorenz_curves_are_valid(f in 0.0f64..0.99, xs in prop::collection::vec(0.0f64..=1.0, 1..10)) {
        for &x in &xs {
            let y = lorenz_two_class(x, f).unwrap();
            prop_assert!((0.0..=x + 1e-12).contains(&y));
            prop_assert!(lorenz_exponential(x).unwrap() <= x + 1e-12);
        }
        let curve = LorenzCurve::two_class(f, 400).unwrap();
        let g = gini_from_curve(curve.points()).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
        prop_assert!((g - gini_two_class(f)).abs() < 1e-3);
    }

    #[test]
    fn equal_coefficients_cancel_in_diagnostic(a0 in 0.0f64..5.0, b0 in 0.1f64..50.0, a in 0.01f64..2.0, r in 0.0f64..1e4) {
        let spec = DriftDiffusionSpec::combined(a0, a, b0, a).unwrap();
        prop_assert_eq!(delta_r2_diagnostic(r, &spec), 2.0 * (b0 - a0 * r));
    }

    #[test]
    fn stationary_density_is_normalized(a0 in 0.5f64..5.0, b0 in 1.0f64..50.0, a in 0.01f64..1.0, ratio in 0.3f64..1.0) {
        let spec = DriftDiffusionSpec::combined(a0, a, b0, a * ratio).unwrap();
        let grid = Grid::for_spec(&spec, 50).unwrap();
        let p = stationary_solution(&spec, &grid).unwrap();
        prop_assert!((p.mass() - 1.0).abs() < 1e-9);
        prop_assert!(p.density().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn cycle_profit_positive(p2 in 0.1f64..10.0, dp in 0.01f64..10.0, v1 in 0.0f64..10.0, dv in 0.01f64..10.0, t2 in 0.1f64..10.0) {
        let out = cycle_profit_and_rate(&CycleSpec { p1: p2 + dp, p2, v1, v2: v1 + dv, t1: t2 * 2.0, t2 }).unwrap();
        prop_assert!(out.profit > 0.0);
        prop_assert!((out.rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ktoe_scales_inversely_with_population(ktoe in 0.0f64..1e6, pop in 1.0f64..1e9, k in 1.0f64..100.0) {
        let a = ktoe_to_kw_per_capita(ktoe, pop).unwrap();
        let b = ktoe_to_kw_per_capita(ktoe, pop * k).unwrap();
        prop_assert!((a - b * k).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn energy_outputs_ignore_record_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let recs = fixture::records(2005).unwrap();
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(summarize(2005, &recs, 0).unwrap(), summarize(2005, &shuffled, 0).unwrap());
        prop_assert_eq!(weighted_cdf(&recs).unwrap(), weighted_cdf(&shuffled).unwrap());
        let avg = world_average(&recs).unwrap();
        prop_assert!(recs.iter().all(|r| r.value <= 26.5) && avg > 0.6 && avg < 26.5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    // rescaling income levels rescales T and r0 and leaves alpha and f alone
    #[test]
    fn income_fit_scale_covariance(k in 0.2f64..20.0, seed in 0u64..1000) {
        let table = synthetic_table(&SyntheticSpec { t: 48.0, alpha: 1.34, r0: 113.0, samples: 100_000, levels: 50, seed, c_min: 1e-4 }).unwrap();
        let scaled = table.scaled(k).unwrap();
        let a = fit_report(&table, &FitOptions::default()).unwrap();
        let b = fit_report(&scaled, &FitOptions::default()).unwrap();
        prop_assert!((b.t / (k * a.t) - 1.0).abs() < 1e-6);
        prop_assert!((b.r0 / (k * a.r0) - 1.0).abs() < 1e-4);
        prop_assert!((b.alpha - a.alpha).abs() < 1e-6);
        prop_assert!((b.f - a.f).abs() < 1e-6);
    }
}
