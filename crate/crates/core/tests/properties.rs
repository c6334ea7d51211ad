mod common;

use proptest::prelude::*;

use fse_core::baselines::{naive_forecast, ses_fit, ses_forecast, ses_one_step};
use fse_core::data::{DemandSeries, WeekKey};
use fse_core::dus::{
    average_uplift_per_combination, compute_uplifts, enumerate_combinations, merge_into_states,
    run_dus, DusConfig, MergePolicy,
};
use fse_core::fse::{build_state_design, fit, forecast, ForecastMode, StateDesign};
use fse_core::harness::same_partition;
use fse_core::metrics::{ae_re_series, improvement, mae, mape, msae, MsaeVariant, ZeroPolicy};
use fse_core::stats::{
    anova_factor_screen, kpss_test, ljung_box, ols_fit, tail_probability, Distribution,
    FactorColumn, Matrix,
};
use fse_core::synth::{generate, make_company_shaped_spec, Shape, SynthRng};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

fn noise(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    let mut rng = SynthRng::new(seed, 9);
    (0..n).map(|_| scale * rng.normal()).collect()
}

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![Just(Shape::A), Just(Shape::B)]
}

proptest! {
    #![proptest_config(config())]

    // ---- stats kernel ----

    #[test]
    fn ols_reconstructs_and_is_orthogonal(seed in 0u64..10_000, n in 12usize..80, k in 1usize..5) {
        let mut rng = SynthRng::new(seed, 1);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| std::iter::once(1.0).chain((0..k).map(|_| 5.0 * rng.normal())).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() + rng.normal()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let f = ols_fit(&x, &y).unwrap();
        for i in 0..n {
            prop_assert!((f.fitted[i] + f.residuals[i] - y[i]).abs() <= 1e-9 * y[i].abs().max(1.0));
        }
        let rnorm = f.residuals.iter().map(|e| e * e).sum::<f64>().sqrt();
        for c in 0..=k {
            let col = x.column(c);
            let cnorm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = col.iter().zip(&f.residuals).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-6 * cnorm * rnorm.max(1e-300));
        }
    }

    #[test]
    fn tail_probability_is_monotone(a in 0.0f64..50.0, b in 0.0f64..50.0, df1 in 1.0f64..40.0, df2 in 1.0f64..60.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for d in [
            Distribution::Normal,
            Distribution::StudentT { df: df1 },
            Distribution::ChiSquared { df: df1 },
            Distribution::F { df1, df2 },
        ] {
            let p_lo = tail_probability(d, lo).unwrap();
            let p_hi = tail_probability(d, hi).unwrap();
            prop_assert!(p_hi <= p_lo, "{d:?}: P(>{lo}) = {p_lo} < P(>{hi}) = {p_hi}");
        }
    }

    #[test]
    fn kpss_ignores_level_shift(seed in 0u64..10_000, c in -1e3f64..1e3) {
        let x = noise(seed, 120, 3.0);
        let y: Vec<f64> = x.iter().map(|v| v + c).collect();
        let a = kpss_test(&x, None).unwrap().statistic;
        let b = kpss_test(&y, None).unwrap().statistic;
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn ljung_box_ignores_scale(seed in 0u64..10_000, k in 1e-3f64..1e3) {
        let x = noise(seed, 100, 1.0);
        let y: Vec<f64> = x.iter().map(|v| v * k).collect();
        let a = ljung_box(&x, 10, 0).unwrap().statistic;
        let b = ljung_box(&y, 10, 0).unwrap().statistic;
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn anova_two_levels_is_pooled_t_squared(seed in 0u64..10_000, n1 in 2usize..15, n2 in 2usize..15, shift in -3.0f64..3.0) {
        let mut rng = SynthRng::new(seed, 2);
        let g1: Vec<f64> = (0..n1).map(|_| rng.normal()).collect();
        let g2: Vec<f64> = (0..n2).map(|_| rng.normal() + shift).collect();
        let y: Vec<f64> = g1.iter().chain(&g2).copied().collect();
        let levels: Vec<String> = (0..n1).map(|_| "a".to_string()).chain((0..n2).map(|_| "b".to_string())).collect();
        let screen = anova_factor_screen(&y, &[FactorColumn { name: "f".into(), levels }]).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let ss = |v: &[f64]| { let m = mean(v); v.iter().map(|x| (x - m).powi(2)).sum::<f64>() };
        let sp2 = (ss(&g1) + ss(&g2)) / (n1 + n2 - 2) as f64;
        let t = (mean(&g1) - mean(&g2)) / (sp2 * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
        let f = screen.effects[0].f;
        prop_assert!((f - t * t).abs() <= 1e-9 * (t * t).max(1.0), "F {f} t^2 {}", t * t);
    }

    // ---- metrics ----

    #[test]
    fn metrics_permutation_and_scaling(seed in 0u64..10_000, n in 1usize..40, k in 0.01f64..100.0) {
        let mut rng = SynthRng::new(seed, 3);
        let x: Vec<f64> = (0..n).map(|_| 1.0 + 100.0 * rng.uniform()).collect();
        let f: Vec<f64> = x.iter().map(|v| v + 30.0 * rng.normal()).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut idx);
        let xp: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let fp: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);

        let m = mae(&f, &x).unwrap();
        prop_assert!(m >= 0.0);
        prop_assert!(rel(m, mae(&fp, &xp).unwrap()));
        let s = msae(&f, &x, MsaeVariant::RatioOfSums).unwrap();
        prop_assert!(s >= 0.0);
        prop_assert!(rel(s, msae(&fp, &xp, MsaeVariant::RatioOfSums).unwrap()));
        let lit = msae(&f, &x, MsaeVariant::PaperLiteral).unwrap();
        prop_assert!(rel(lit, s / n as f64));
        let p = mape(&f, &x, ZeroPolicy::Exclude).unwrap();
        prop_assert!(rel(p, mape(&fp, &xp, ZeroPolicy::Exclude).unwrap()));

        let fs: Vec<f64> = f.iter().map(|v| v * k).collect();
        let xs: Vec<f64> = x.iter().map(|v| v * k).collect();
        prop_assert!((mae(&fs, &xs).unwrap() - k * m).abs() <= 1e-12 * k * m.max(1.0));
        prop_assert!((s - msae(&fs, &xs, MsaeVariant::RatioOfSums).unwrap()).abs() <= 1e-12 * s.max(1.0));
        prop_assert!((p - mape(&fs, &xs, ZeroPolicy::Exclude).unwrap()).abs() <= 1e-12 * p.max(1.0));
        let (ae, _) = ae_re_series(&f, &x).unwrap();
        prop_assert!(ae.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn improvement_matches_formula(b in 1e-3f64..1e4, frac in -2.0f64..2.0) {
        let c = b * frac;
        let raw = 100.0 * (b - c) / b;
        let got = improvement(b, c).unwrap() as f64;
        prop_assert!((got - raw).abs() <= 0.5 + 1e-9);
    }

    // ---- baselines ----

    #[test]
    fn ses_stays_in_range_and_beats_naive(seed in 0u64..10_000, n in 3usize..80) {
        let x: Vec<f64> = noise(seed, n, 10.0).iter().map(|v| v + 50.0).collect();
        let fitted = ses_fit(&x).unwrap();
        prop_assert!((0.0..=1.0).contains(&fitted.alpha));
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in ses_one_step(&x, fitted.alpha) {
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
        let naive_sse: f64 = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        prop_assert!(fitted.sse <= naive_sse + 1e-9 * naive_sse.max(1.0));
        let h = 1 + (seed as usize % 10);
        prop_assert!(ses_forecast(&fitted, h).unwrap().iter().all(|v| *v == fitted.level));
        prop_assert_eq!(naive_forecast(&x, h).unwrap(), vec![*x.last().unwrap(); h]);
    }

    // ---- model ----

    #[test]
    fn design_is_one_hot(s in shape(), seed in 0u64..1_000) {
        let b = generate(&make_company_shaped_spec(s, seed)).unwrap();
        let d = build_state_design(&b.calendar, &b.truth.state_map, 0..b.calendar.len()).unwrap();
        let x = d.matrix();
        for t in 0..d.len() {
            let row_sum: f64 = x.row(t).iter().sum();
            prop_assert!(row_sum <= 1.0);
            if b.calendar.events[t].is_none() {
                prop_assert_eq!(row_sum, 0.0);
            } else {
                prop_assert_eq!(row_sum, 1.0);
            }
        }
    }

    #[test]
    fn fit_shapes_and_in_sample_identity(s in shape(), seed in 0u64..1_000, p in 0usize..4) {
        let b = generate(&make_company_shaped_spec(s, seed)).unwrap();
        let d = b.truth_design().unwrap();
        let f = fit(&b.demand, &d, p).unwrap();
        prop_assert_eq!(f.regression.coefficients.len(), 1 + p + f.m);
        prop_assert_eq!(f.regression.residuals.len(), b.demand.len() - p);
        for (i, y) in b.demand.values[p..].iter().enumerate() {
            let r = f.regression.fitted[i] + f.regression.residuals[i];
            prop_assert!((r - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn shift_equivariance(s in shape(), seed in 0u64..1_000, c in -500.0f64..500.0) {
        let b = generate(&make_company_shaped_spec(s, seed)).unwrap();
        let d = b.truth_design().unwrap();
        let shifted = DemandSeries::new(WeekKey::Index(1), b.demand.values.iter().map(|v| v + c).collect()).unwrap();
        let f1 = fit(&b.demand, &d, 2).unwrap();
        let f2 = fit(&shifted, &d, 2).unwrap();
        for (a, b) in f1.alphas.iter().zip(&f2.alphas).chain(f1.betas.iter().zip(&f2.betas)) {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        }
        let fut = StateDesign::new(f1.m, vec![None, Some(1), None, None]).unwrap();
        let n = b.demand.len();
        let y1 = forecast(&f1, &b.demand.values[n - 2..], &fut, ForecastMode::Recursive).unwrap();
        let y2 = forecast(&f2, &shifted.values[n - 2..], &fut, ForecastMode::Recursive).unwrap();
        for (a, b) in y1.iter().zip(&y2) {
            prop_assert!((b - a - c).abs() < 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn one_hot_forecast_response(s in shape(), seed in 0u64..1_000, delta in -100.0f64..100.0, j in 1usize..5) {
        let b = generate(&make_company_shaped_spec(s, seed)).unwrap();
        let d = b.truth_design().unwrap();
        let f = fit(&b.demand, &d, 2).unwrap();
        let active = vec![None, Some(j), None, Some(j), None, None];
        let fut = StateDesign::new(f.m, active.clone()).unwrap();
        let last = &b.demand.values[b.demand.len() - 2..];
        let base = forecast(&f, last, &fut, ForecastMode::Recursive).unwrap();
        let again = forecast(&f, last, &fut, ForecastMode::Recursive).unwrap();
        prop_assert_eq!(&base, &again);
        let mut g = f.clone();
        g.betas[j - 1] += delta;
        let bumped = forecast(&g, last, &fut, ForecastMode::Recursive).unwrap();
        // symbolic propagation of delta through the AR recursion
        let mut expect: Vec<f64> = Vec::new();
        for (h, a) in active.iter().enumerate() {
            let mut v = if *a == Some(j) { delta } else { 0.0 };
            for (i, al) in f.alphas.iter().enumerate() {
                if h > i {
                    v += al * expect[h - 1 - i];
                }
            }
            expect.push(v);
        }
        for h in 0..active.len() {
            prop_assert!((bumped[h] - base[h] - expect[h]).abs() < 1e-9 * (1.0 + base[h].abs()));
        }
    }

    // ---- demand uplift states ----

    #[test]
    fn dus_partition_and_order_independence(s in shape(), seed in 0u64..1_000, perm_seed in 0u64..1_000) {
        let b = generate(&make_company_shaped_spec(s, seed)).unwrap();
        let cfg = DusConfig::default();
        let out = match run_dus(&b.demand, &b.baseline, &b.calendar, &b.truth.factors, &cfg) {
            Ok(o) => o,
            Err(_) => return Ok(()),
        };
        let map = &out.state_map;
        let combos = &out.combinations;
        let total: usize = map.states.iter().map(|s| s.members.len()).sum();
        prop_assert_eq!(total, map.k());
        prop_assert_eq!(map.k(), combos.len());
        for c in combos {
            let hits = map.states.iter().filter(|s| s.members.contains(&c.combination)).count();
            prop_assert_eq!(hits, 1);
        }
        for w in map.states.windows(2) {
            prop_assert!(w[0].mean_uplift >= w[1].mean_uplift);
        }
        let mut shuffled = combos.clone();
        SynthRng::new(perm_seed, 4).shuffle(&mut shuffled);
        let (again, _) = merge_into_states(&shuffled, &map.factors, MergePolicy::default()).unwrap();
        prop_assert!(same_partition(map, &again));
        let rerun = run_dus(&b.demand, &b.baseline, &b.calendar, &b.truth.factors, &cfg).unwrap();
        prop_assert_eq!(&rerun, &out);
    }

    #[test]
    fn dus_ignores_common_level_shift(s in shape(), seed in 0u64..1_000, c in -200.0f64..200.0) {
        let b = generate(&make_company_shaped_spec(s, seed)).unwrap();
        let demand = DemandSeries::new(WeekKey::Index(1), b.demand.values.iter().map(|v| v + c).collect()).unwrap();
        let baseline: Vec<Option<f64>> = b.baseline.iter().map(|v| v.map(|v| v + c)).collect();
        let u1 = compute_uplifts(&b.demand, &b.baseline, &b.calendar).unwrap();
        let u2 = compute_uplifts(&demand, &baseline, &b.calendar).unwrap();
        for (a, b) in u1.iter().zip(&u2) {
            prop_assert!((a.uplift - b.uplift).abs() <= 1e-9 * (1.0 + a.uplift.abs()));
        }
        let cfg = DusConfig::default();
        match (
            run_dus(&b.demand, &b.baseline, &b.calendar, &b.truth.factors, &cfg),
            run_dus(&demand, &baseline, &b.calendar, &b.truth.factors, &cfg),
        ) {
            (Ok(x), Ok(y)) => {
                prop_assert!(same_partition(&x.state_map, &y.state_map));
                for (fx, fy) in x.screening.effects.iter().zip(&y.screening.effects) {
                    prop_assert!((fx.f - fy.f).abs() <= 1e-6 * fx.f.abs().max(1.0));
                }
            }
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "outcomes differ: {:?} / {:?}", x.is_ok(), y.is_ok()),
        }
    }

    #[test]
    fn combination_means_are_arithmetic(s in shape(), seed in 0u64..1_000) {
        let b = generate(&make_company_shaped_spec(s, seed)).unwrap();
        let samples = compute_uplifts(&b.demand, &b.baseline, &b.calendar).unwrap();
        prop_assert_eq!(samples.len(), b.calendar.event_count());
        let combos = enumerate_combinations(&b.truth.factors, &samples).unwrap();
        let mut sorted = combos.clone();
        sorted.sort();
        prop_assert_eq!(&sorted, &combos);
        for st in average_uplift_per_combination(&samples, &combos).unwrap() {
            let m = st.uplifts.iter().sum::<f64>() / st.count as f64;
            prop_assert!((st.mean - m).abs() <= 1e-12 * m.abs().max(1.0));
        }
    }

    // ---- generator ----

    #[test]
    fn removing_events_changes_only_their_wake(s in shape(), seed in 0u64..1_000) {
        let spec = make_company_shaped_spec(s, seed);
        let with = generate(&spec).unwrap();
        let without = generate(&spec.without_events()).unwrap();
        let design = with.truth_design().unwrap();
        let first = (0..design.len()).find(|&t| design.active(t).is_some()).unwrap();
        // step-by-step oracle for the difference
        let mut diff: Vec<f64> = Vec::new();
        for t in 0..design.len() {
            let mut d = design.active(t).map_or(0.0, |j| spec.betas[j - 1]);
            for (i, a) in spec.alphas.iter().enumerate() {
                if t > i {
                    d += a * diff[t - 1 - i];
                }
            }
            diff.push(d);
        }
        for t in 0..design.len() {
            let got = with.demand.values[t] - without.demand.values[t];
            if t < first {
                prop_assert_eq!(got, 0.0);
            }
            prop_assert!((got - diff[t]).abs() <= 1e-9 * (1.0 + with.demand.values[t].abs()), "week {t}: {got} vs {}", diff[t]);
        }
    }
}

#[test]
fn no_event_series_mostly_pass_kpss() {
    for s in [Shape::A, Shape::B] {
        let passed = (0..200u64)
            .filter(|&seed| {
                let b = generate(&make_company_shaped_spec(s, seed).without_events()).unwrap();
                !kpss_test(&b.demand.values, None).unwrap().reject_at_5pct
            })
            .count();
        assert!(passed >= 180, "{s:?}: {passed}/200 passed");
    }
}
