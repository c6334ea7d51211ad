//! Independent reference implementations used only by tests.
#![allow(dead_code)]

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least squares with an intercept via centred normal equations plus two
/// rounds of iterative refinement. Returns `[intercept, slopes...]`.
pub fn ols_intercept(regressors: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let k = regressors.first().map_or(0, |r| r.len());
    let mean = |f: &dyn Fn(usize) -> f64| (0..n).map(f).sum::<f64>() / n as f64;
    let xm: Vec<f64> = (0..k).map(|j| mean(&|i| regressors[i][j])).collect();
    let xc: Vec<Vec<f64>> = regressors
        .iter()
        .map(|r| r.iter().zip(&xm).map(|(v, m)| v - m).collect())
        .collect();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| (0..n).map(|i| xc[i][a] * xc[i][b]).sum())
                .collect()
        })
        .collect();
    let project = |r: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|a| (0..n).map(|i| xc[i][a] * r[i]).sum())
            .collect()
    };

    let ym = mean(&|i| y[i]);
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let mut beta = if k == 0 {
        vec![]
    } else {
        solve(gram.clone(), project(&yc))
    };
    for _ in 0..2 {
        if k == 0 {
            break;
        }
        let r: Vec<f64> = (0..n)
            .map(|i| yc[i] - (0..k).map(|j| xc[i][j] * beta[j]).sum::<f64>())
            .collect();
        let d = solve(gram.clone(), project(&r));
        for (b, d) in beta.iter_mut().zip(d) {
            *b += d;
        }
    }
    let intercept = ym - beta.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
    let mut out = vec![intercept];
    out.extend(beta);
    out
}

/// Plain AR(p) with intercept fitted on rows `p..n`.
pub fn ar_fit(x: &[f64], p: usize) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (p..x.len())
        .map(|t| (1..=p).map(|i| x[t - i]).collect())
        .collect();
    ols_intercept(&rows, &x[p..])
}

/// Recursive forecasts from AR coefficients `[c, a1..ap]`.
pub fn ar_forecast(coef: &[f64], history: &[f64], h: usize) -> Vec<f64> {
    let p = coef.len() - 1;
    let mut hist = history.to_vec();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let n = hist.len();
        let y = coef[0] + (1..=p).map(|i| coef[i] * hist[n - i]).sum::<f64>();
        hist.push(y);
        out.push(y);
    }
    out
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Lanczos log-gamma, written independently of the library's.
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn t_pdf(x: f64, df: f64) -> f64 {
    (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln()).exp()
        * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0)
}

pub fn chi2_pdf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ((df / 2.0 - 1.0) * x.ln() - x / 2.0 - (df / 2.0) * 2f64.ln() - ln_gamma(df / 2.0)).exp()
}

pub fn f_pdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lb = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    ((d1 / 2.0) * (d1 / d2).ln() + (d1 / 2.0 - 1.0) * x.ln()
        - ((d1 + d2) / 2.0) * (1.0 + d1 * x / d2).ln()
        - lb)
        .exp()
}

/// Upper tail `P(X > s)` by integrating the density over `[s, s + width]`
/// in log-spaced pieces; the density must be negligible beyond.
pub fn upper_tail(pdf: impl Fn(f64) -> f64, s: f64, width: f64) -> f64 {
    let mut total = 0.0;
    let mut a = s;
    let mut step = 0.05f64.max(s.abs() * 0.01);
    while a < s + width {
        let b = a + step;
        total += simpson(&pdf, a, b, 64);
        a = b;
        step *= 1.25;
    }
    total
}

/// Kolmogorov-Smirnov distance of a sample from U(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &u)| ((i as f64 + 1.0) / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max)
}
