mod common;

use fse_core::baselines::{ses_fit, ses_one_step};
use fse_core::data::{DemandSeries, WeekKey};
use fse_core::fse::{aicc, fit, select_order, StateDesign};
use fse_core::stats::{
    kpss_test, ljung_box, normality_test, ols_fit, t_quantile_upper, tail_probability,
    welch_t_test, Distribution, Matrix,
};
use fse_core::synth::SynthRng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = SynthRng::new(11, 0);
    for trial in 0..40 {
        let n = 15 + rng.below(60);
        let k = 1 + rng.below(5);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| 10.0 * rng.normal()).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 3.0 + r.iter().sum::<f64>() * 0.5 + rng.normal())
            .collect();
        let want = common::ols_intercept(&rows, &y);

        let design: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
            .collect();
        let got = ols_fit(&Matrix::from_rows(&design).unwrap(), &y).unwrap();
        for (a, b) in got.coefficients.iter().zip(&want) {
            assert!(close(*a, *b, 1e-10), "trial {trial}: {a} vs {b}");
        }

        // standard errors from the inverse Gram matrix, column by column
        let resid: Vec<f64> = design
            .iter()
            .zip(&y)
            .map(|(r, y)| y - r.iter().zip(&want).map(|(x, b)| x * b).sum::<f64>())
            .collect();
        let sse: f64 = resid.iter().map(|e| e * e).sum();
        assert!(close(got.sse, sse, 1e-9));
        let s2 = sse / (n - k - 1) as f64;
        let gram: Vec<Vec<f64>> = (0..=k)
            .map(|a| {
                (0..=k)
                    .map(|b| design.iter().map(|r| r[a] * r[b]).sum())
                    .collect()
            })
            .collect();
        for j in 0..=k {
            let mut e = vec![0.0; k + 1];
            e[j] = 1.0;
            let col = common::solve(gram.clone(), e);
            assert!(
                close(got.standard_errors[j], (s2 * col[j]).sqrt(), 1e-8),
                "se {j}"
            );
        }
    }
}

#[test]
fn tail_probabilities_match_quadrature() {
    for &(df, s) in &[
        (1.0, 0.7),
        (3.0, 2.1),
        (7.5, 1.3),
        (30.0, 2.5),
        (120.0, 1.9),
    ] {
        // heavy tails: integrate the body instead
        let want = 0.5 - common::simpson(|x| common::t_pdf(x, df), 0.0, s, 4000);
        let got = tail_probability(Distribution::StudentT { df }, s).unwrap();
        assert!(
            (got - want).abs() < 1e-10,
            "t({df}) at {s}: {got} vs {want}"
        );
    }
    for &(df, s) in &[
        (1.0, 0.5),
        (2.0, 3.0),
        (5.0, 11.07),
        (10.0, 4.0),
        (25.0, 40.0),
    ] {
        let want = common::upper_tail(|x| common::chi2_pdf(x, df), s, 400.0);
        let got = tail_probability(Distribution::ChiSquared { df }, s).unwrap();
        assert!(
            (got - want).abs() < 1e-8,
            "chi2({df}) at {s}: {got} vs {want}"
        );
    }
    for &(d1, d2, s) in &[
        (1.0, 10.0, 4.96),
        (3.0, 20.0, 1.2),
        (4.0, 60.0, 2.53),
        (8.0, 8.0, 0.9),
    ] {
        let want = common::upper_tail(|x| common::f_pdf(x, d1, d2), s, 20_000.0);
        let got = tail_probability(Distribution::F { df1: d1, df2: d2 }, s).unwrap();
        assert!(
            (got - want).abs() < 1e-5,
            "F({d1},{d2}) at {s}: {got} vs {want}"
        );
    }
    // standard normal against the erfc-free series of its density
    let want = common::upper_tail(
        |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        1.0,
        40.0,
    );
    let got = tail_probability(Distribution::Normal, 1.0).unwrap();
    assert!((got - want).abs() < 1e-9);
}

#[test]
fn t_quantile_inverts_tail() {
    for &df in &[2.0, 5.0, 12.0, 80.0] {
        for &u in &[0.1, 0.025, 0.005] {
            let q = t_quantile_upper(u, df).unwrap();
            let back = tail_probability(Distribution::StudentT { df }, q).unwrap();
            assert!((back - u).abs() < 1e-10, "df {df} u {u}");
        }
    }
}

#[test]
fn kpss_statistic_matches_definition() {
    let mut rng = SynthRng::new(5, 0);
    let x: Vec<f64> = (0..150)
        .map(|i| (i as f64 * 0.3).sin() + rng.normal())
        .collect();
    let l = 6;
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let e: Vec<f64> = x.iter().map(|v| v - m).collect();
    let mut s2 = e.iter().map(|v| v * v).sum::<f64>() / n;
    for s in 1..=l {
        let w = 1.0 - s as f64 / (l as f64 + 1.0);
        s2 += 2.0 * w * (s..e.len()).map(|t| e[t] * e[t - s]).sum::<f64>() / n;
    }
    let mut cum = 0.0;
    let eta: f64 = e
        .iter()
        .map(|v| {
            cum += v;
            cum * cum
        })
        .sum::<f64>()
        / (n * n);
    let got = kpss_test(&x, Some(l)).unwrap();
    assert!(close(got.statistic, eta / s2, 1e-12));
    assert_eq!(got.meta.lags, Some(l));
}

#[test]
fn ljung_box_and_jarque_bera_match_definitions() {
    let mut rng = SynthRng::new(6, 0);
    let x: Vec<f64> = (0..90)
        .map(|_| rng.normal() + 0.3 * rng.uniform())
        .collect();
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    let q: f64 = (1..=8)
        .map(|k| {
            let r = (k..d.len()).map(|t| d[t] * d[t - k]).sum::<f64>() / c0;
            r * r / (n - k as f64)
        })
        .sum::<f64>()
        * n
        * (n + 2.0);
    let lb = ljung_box(&x, 8, 2).unwrap();
    assert!(close(lb.statistic, q, 1e-12));
    assert_eq!(lb.meta.df, Some(6.0));
    let p = common::upper_tail(|v| common::chi2_pdf(v, 6.0), q, 400.0);
    assert!((lb.p_value.unwrap() - p).abs() < 1e-8);

    let mom = |k: i32| d.iter().map(|v| v.powi(k)).sum::<f64>() / n;
    let skew = mom(3) / mom(2).powf(1.5);
    let kurt = mom(4) / mom(2).powi(2);
    let jb = n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
    let got = normality_test(&x).unwrap();
    assert!(close(got.statistic, jb, 1e-12));
    assert!(close(got.p_value.unwrap(), (-jb / 2.0).exp(), 1e-12));
}

#[test]
fn welch_matches_hand_computation() {
    let a = [19.1, 21.4, 18.2, 22.9, 20.0, 23.3];
    let b = [15.2, 17.9, 16.0, 14.8];
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (sa, sb) = (var(&a) / 6.0, var(&b) / 4.0);
    let t = (mean(&a) - mean(&b)) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / 5.0 + sb * sb / 3.0);
    let p = 1.0 - 2.0 * common::simpson(|x| common::t_pdf(x, df), 0.0, t, 4000);
    let got = welch_t_test(&a, &b).unwrap();
    assert!(close(got.statistic, t, 1e-12));
    assert!(close(got.meta.df.unwrap(), df, 1e-12));
    assert!((got.p_value.unwrap() - p).abs() < 1e-10);
}

#[test]
fn aicc_formula() {
    // q counts the variance as a parameter
    let (sse, n, k) = (250.0, 40usize, 4usize);
    let q = k as f64 + 1.0;
    let want = 40.0 * (sse / 40.0f64).ln() + 2.0 * q + 2.0 * q * (q + 1.0) / (n as f64 - q - 1.0);
    assert!(close(aicc(sse, n, k).unwrap(), want, 1e-14));
    assert!(aicc(sse, 6, 4).is_err());
}

#[test]
fn order_selection_uses_common_rows() {
    let mut rng = SynthRng::new(9, 0);
    let mut x = vec![0.0, 0.0];
    for t in 2..120 {
        let v = 5.0 + 0.5 * x[t - 1] - 0.3 * x[t - 2] + rng.normal();
        x.push(v);
    }
    let series = DemandSeries::new(WeekKey::Index(1), x.clone()).unwrap();
    let design = StateDesign::empty(x.len());
    let sel = select_order(&series, &design, 5).unwrap();
    for row in &sel.table {
        assert_eq!(row.n_eff, x.len() - 5);
        // refit the candidate on rows 5.. with the oracle
        let rows: Vec<Vec<f64>> = (5..x.len())
            .map(|t| (1..=row.p).map(|i| x[t - i]).collect())
            .collect();
        let coef = common::ols_intercept(&rows, &x[5..]);
        let sse: f64 = rows
            .iter()
            .zip(&x[5..])
            .map(|(r, y)| {
                (y - coef[0] - r.iter().zip(&coef[1..]).map(|(a, b)| a * b).sum::<f64>()).powi(2)
            })
            .sum();
        assert!(close(row.sse, sse, 1e-9), "p {}", row.p);
    }
    let best = sel
        .table
        .iter()
        .min_by(|a, b| a.aicc.total_cmp(&b.aicc))
        .unwrap();
    assert_eq!(sel.p, best.p);
    let f = fit(&series, &design, sel.p).unwrap();
    assert_eq!(f.regression.n_obs, x.len() - sel.p);
}

#[test]
fn ses_recursion_and_optimum() {
    let mut rng = SynthRng::new(2, 0);
    let x: Vec<f64> = (0..60)
        .map(|i| 100.0 + i as f64 * 0.2 + 5.0 * rng.normal())
        .collect();
    let alpha = 0.37;
    let f = ses_one_step(&x, alpha);
    assert_eq!(f.len(), x.len() + 1);
    let mut level = x[0];
    for t in 1..x.len() {
        assert!(close(f[t], level, 1e-12));
        level = alpha * x[t] + (1.0 - alpha) * level;
        assert!(close(f[t + 1], level, 1e-12));
    }
    let sse = |a: f64| {
        let f = ses_one_step(&x, a);
        (1..x.len()).map(|t| (x[t] - f[t]).powi(2)).sum::<f64>()
    };
    let fitted = ses_fit(&x).unwrap();
    assert!(close(fitted.sse, sse(fitted.alpha), 1e-12));
    // no grid point in (0, 1] beats the fitted alpha
    for i in 1..=1000 {
        assert!(sse(i as f64 / 1000.0) >= fitted.sse - 1e-9);
    }
}
