use super::{mean, tail_probability, Distribution, TestMeta, TestResult};
use crate::error::{Error, Result};

/// `min(10, floor(n / 5))`.
pub fn default_ljung_box_lag(n: usize) -> usize {
    (n / 5).min(10)
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn sample_autocorrelations(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let denom: f64 = d.iter().map(|v| v * v).sum();
    let scale = x
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if denom <= (1e-14 * scale).powi(2) * x.len() as f64 {
        return Err(Error::Degenerate("residuals have zero variance".into()));
    }
    Ok((1..=max_lag)
        .map(|k| (k..d.len()).map(|t| d[t] * d[t - k]).sum::<f64>() / denom)
        .collect())
}

/// Ljung-Box portmanteau test; `fitted_params` reduces the chi-squared df.
pub fn ljung_box(residuals: &[f64], max_lag: usize, fitted_params: usize) -> Result<TestResult> {
    let n = residuals.len();
    if max_lag == 0 || max_lag >= n {
        return Err(Error::InvalidInput(format!(
            "max_lag must be in 1..{n}, got {max_lag}"
        )));
    }
    if fitted_params >= max_lag {
        return Err(Error::InvalidInput(format!(
            "fitted_params ({fitted_params}) must be below max_lag ({max_lag})"
        )));
    }
    let rho = sample_autocorrelations(residuals, max_lag)?;
    let nf = n as f64;
    let q = nf
        * (nf + 2.0)
        * rho
            .iter()
            .enumerate()
            .map(|(i, r)| r * r / (nf - (i + 1) as f64))
            .sum::<f64>();
    let df = (max_lag - fitted_params) as f64;
    let p = tail_probability(Distribution::ChiSquared { df }, q)?;
    Ok(TestResult::with_p(
        q,
        p,
        TestMeta {
            lags: Some(max_lag),
            df: Some(df),
            ..TestMeta::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_autocorrelation_gives_unit_p() {
        // every lag-1 product is zero
        let x = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        let r = sample_autocorrelations(&x, 1).unwrap();
        assert!(r[0].abs() < 1e-15);
        let t = ljung_box(&x, 1, 0).unwrap();
        assert!(t.statistic.abs() < 1e-15);
        assert_eq!(t.p_value, Some(1.0));
    }

    #[test]
    fn degenerate_residuals_error() {
        assert!(matches!(
            ljung_box(&[2.0; 30], 5, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn argument_checks() {
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        assert!(ljung_box(&x, 10, 0).is_err());
        assert!(ljung_box(&x, 3, 3).is_err());
        assert_eq!(ljung_box(&x, 4, 2).unwrap().meta.df, Some(2.0));
    }

    #[test]
    fn default_lag_rule() {
        assert_eq!(default_ljung_box_lag(200), 10);
        assert_eq!(default_ljung_box_lag(30), 6);
    }
}
