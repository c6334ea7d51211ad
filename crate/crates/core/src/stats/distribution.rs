use serde::{Deserialize, Serialize};

use super::special::{beta_reg, gamma_q};
use crate::error::{Error, Result};

/// Reference distributions for significance calculations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    Normal,
    StudentT { df: f64 },
    ChiSquared { df: f64 },
    F { df1: f64, df2: f64 },
}

/// Smallest p-value ever reported.
pub const P_VALUE_FLOOR: f64 = 1e-300;

/// Clamp a probability into `[P_VALUE_FLOOR, 1]`.
pub fn cap_p_value(p: f64) -> f64 {
    p.clamp(P_VALUE_FLOOR, 1.0)
}

fn check_df(name: &str, df: f64) -> Result<()> {
    if !(df > 0.0) || df.is_nan() {
        return Err(Error::Domain(format!("{name} must be positive, got {df}")));
    }
    Ok(())
}

/// Upper-tail probability `P(X > statistic)`.
pub fn tail_probability(dist: Distribution, statistic: f64) -> Result<f64> {
    if statistic.is_nan() {
        return Err(Error::Domain("statistic is NaN".into()));
    }
    let p = match dist {
        Distribution::Normal => {
            if statistic >= 0.0 {
                0.5 * gamma_q(0.5, 0.5 * statistic * statistic)
            } else {
                1.0 - 0.5 * gamma_q(0.5, 0.5 * statistic * statistic)
            }
        }
        Distribution::StudentT { df } => {
            check_df("df", df)?;
            let upper = |t: f64| {
                if t.is_infinite() {
                    0.0
                } else {
                    0.5 * beta_reg(df / (df + t * t), 0.5 * df, 0.5)
                }
            };
            if statistic >= 0.0 {
                upper(statistic)
            } else {
                1.0 - upper(-statistic)
            }
        }
        Distribution::ChiSquared { df } => {
            check_df("df", df)?;
            if statistic <= 0.0 {
                1.0
            } else {
                gamma_q(0.5 * df, 0.5 * statistic)
            }
        }
        Distribution::F { df1, df2 } => {
            check_df("df1", df1)?;
            check_df("df2", df2)?;
            if statistic <= 0.0 {
                1.0
            } else if statistic.is_infinite() {
                0.0
            } else {
                beta_reg(df2 / (df2 + df1 * statistic), 0.5 * df2, 0.5 * df1)
            }
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Two-sided Student-t p-value for statistic `t`.
pub fn two_sided_t(t: f64, df: f64) -> Result<f64> {
    Ok((2.0 * tail_probability(Distribution::StudentT { df }, t.abs())?).min(1.0))
}

/// Upper quantile `q` with `P(T > q) = upper`, by bisection.
pub fn t_quantile_upper(upper: f64, df: f64) -> Result<f64> {
    check_df("df", df)?;
    if !(upper > 0.0 && upper < 1.0) {
        return Err(Error::Domain(format!(
            "tail mass must lie in (0,1), got {upper}"
        )));
    }
    let dist = Distribution::StudentT { df };
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail_probability(dist, mid)? > upper {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_boundaries() {
        assert_eq!(tail_probability(Distribution::Normal, 0.0).unwrap(), 0.5);
        assert_eq!(
            tail_probability(Distribution::ChiSquared { df: 4.0 }, 0.0).unwrap(),
            1.0
        );
        assert_eq!(
            tail_probability(Distribution::F { df1: 2.0, df2: 3.0 }, 0.0).unwrap(),
            1.0
        );
        assert!(
            (tail_probability(Distribution::StudentT { df: 7.0 }, 0.0).unwrap() - 0.5).abs()
                < 1e-15
        );
    }

    #[test]
    fn known_values() {
        // Phi(1.96) upper tail
        let p = tail_probability(Distribution::Normal, 1.959_963_984_540_054).unwrap();
        assert!((p - 0.025).abs() < 1e-12);
        // chi2(2) upper tail is exp(-x/2)
        let p = tail_probability(Distribution::ChiSquared { df: 2.0 }, 3.0).unwrap();
        assert!((p - (-1.5f64).exp()).abs() < 1e-14);
        // t with 1 df is Cauchy
        let p = tail_probability(Distribution::StudentT { df: 1.0 }, 1.0).unwrap();
        assert!((p - 0.25).abs() < 1e-13);
    }

    #[test]
    fn nonpositive_df_is_domain_error() {
        assert!(matches!(
            tail_probability(Distribution::StudentT { df: 0.0 }, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(tail_probability(
            Distribution::F {
                df1: 1.0,
                df2: -2.0
            },
            1.0
        )
        .is_err());
        assert!(tail_probability(Distribution::ChiSquared { df: f64::NAN }, 1.0).is_err());
    }

    #[test]
    fn quantile_inverts_tail() {
        let q = t_quantile_upper(0.025, 10.0).unwrap();
        assert!((q - 2.228_138_851_986_273_5).abs() < 1e-9);
    }
}
