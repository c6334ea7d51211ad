use super::{cap_p_value, mean, sample_variance, two_sided_t, TestMeta, TestResult};
use crate::error::{Error, Result};

/// Welch's unequal-variance two-sample t-test (two-sided).
pub fn welch_t_test(group_a: &[f64], group_b: &[f64]) -> Result<TestResult> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Welch test needs two observations per group, got {} and {}",
            group_a.len(),
            group_b.len()
        )));
    }
    let (na, nb) = (group_a.len() as f64, group_b.len() as f64);
    let (ma, mb) = (mean(group_a), mean(group_b));
    let (va, vb) = (sample_variance(group_a), sample_variance(group_b));
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let (statistic, p) = if ma == mb {
            (0.0, 1.0)
        } else {
            ((ma - mb).signum() * f64::INFINITY, 0.0)
        };
        return Ok(TestResult {
            statistic,
            p_value: Some(cap_p_value(p)),
            reject_at_5pct: p < 0.05,
            meta: TestMeta::default(),
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let mut denom = 0.0;
    if sa > 0.0 {
        denom += sa * sa / (na - 1.0);
    }
    if sb > 0.0 {
        denom += sb * sb / (nb - 1.0);
    }
    let df = se2 * se2 / denom;
    let p = two_sided_t(t, df)?;
    Ok(TestResult::with_p(
        t,
        p,
        TestMeta {
            df: Some(df),
            ..TestMeta::default()
        },
    ))
}
