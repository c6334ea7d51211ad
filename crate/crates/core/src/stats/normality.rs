use super::{mean, tail_probability, Distribution, TestMeta, TestResult};
use crate::error::{Error, Result};

/// Jarque-Bera test from sample skewness and excess kurtosis, chi-squared(2).
pub fn normality_test(residuals: &[f64]) -> Result<TestResult> {
    let n = residuals.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!(
            "normality test needs at least 8 values, got {n}"
        )));
    }
    let m = mean(residuals);
    let nf = n as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in residuals {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let scale = residuals
        .iter()
        .fold(0.0_f64, |a, x| a.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    if m2 <= (1e-14 * scale).powi(2) {
        return Err(Error::Degenerate("residuals have zero variance".into()));
    }
    let skew = m3 / m2.powf(1.5);
    let excess = m4 / (m2 * m2) - 3.0;
    let jb = nf / 6.0 * (skew * skew + excess * excess / 4.0);
    let p = tail_probability(Distribution::ChiSquared { df: 2.0 }, jb)?;
    Ok(TestResult::with_p(
        jb,
        p,
        TestMeta {
            df: Some(2.0),
            ..TestMeta::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_mesokurtic_sample_scores_zero() {
        // one third of the mass at +-1, the rest at 0: skew 0, kurtosis 3
        let mut x = vec![0.0; 8];
        x.extend([-1.0, -1.0, 1.0, 1.0]);
        let r = normality_test(&x).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_errors() {
        assert!(matches!(
            normality_test(&[3.0; 10]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn short_input_errors() {
        assert!(normality_test(&[1.0, 2.0, 3.0]).is_err());
    }
}
