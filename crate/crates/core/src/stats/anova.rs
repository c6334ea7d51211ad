use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{cap_p_value, mean, rank_aware_sse, tail_probability, Distribution, Matrix};
use crate::error::{Error, Result};

/// Observed level of one factor for every response value.
#[derive(Debug, Clone)]
pub struct FactorColumn {
    pub name: String,
    pub levels: Vec<String>,
}

/// Main-effect F-test for one factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEffect {
    pub name: String,
    #[serde(with = "crate::serde_nonfinite::scalar")]
    pub f: f64,
    pub p_value: f64,
    pub df_num: usize,
    pub df_den: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorScreen {
    pub effects: Vec<FactorEffect>,
    /// Factors dropped before testing, with the reason.
    pub warnings: Vec<String>,
}

fn dummy_block(levels: &[String]) -> Vec<Vec<f64>> {
    let observed: Vec<&String> = levels.iter().collect::<BTreeSet<_>>().into_iter().collect();
    // first level is the reference
    levels
        .iter()
        .map(|l| {
            observed[1..]
                .iter()
                .map(|o| if *o == l { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn build_design(n: usize, blocks: &[&Vec<Vec<f64>>]) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![1.0];
            for b in blocks {
                row.extend_from_slice(&b[i]);
            }
            row
        })
        .collect();
    Matrix::from_rows(&rows)
}

/// Type-II main-effect F-tests: each factor is tested against the model that
/// holds the main effects of all other factors.
pub fn anova_factor_screen(responses: &[f64], factors: &[FactorColumn]) -> Result<FactorScreen> {
    let n = responses.len();
    if n == 0 || factors.is_empty() {
        return Err(Error::InvalidInput(
            "ANOVA needs responses and at least one factor".into(),
        ));
    }
    if let Some(f) = factors.iter().find(|f| f.levels.len() != n) {
        return Err(Error::Dimension(format!(
            "factor {} has {} assignments for {n} responses",
            f.name,
            f.levels.len()
        )));
    }
    let mut warnings = Vec::new();
    let mut testable: Vec<&FactorColumn> = Vec::new();
    for f in factors {
        let distinct: BTreeSet<&String> = f.levels.iter().collect();
        if distinct.len() < 2 {
            warnings.push(format!(
                "factor {} has a single observed level; excluded",
                f.name
            ));
        } else {
            testable.push(f);
        }
    }
    if testable.is_empty() {
        return Err(Error::NoSignificantFactor(
            "no factor has two or more observed levels".into(),
        ));
    }

    let blocks: Vec<Vec<Vec<f64>>> = testable.iter().map(|f| dummy_block(&f.levels)).collect();
    let all: Vec<&Vec<Vec<f64>>> = blocks.iter().collect();
    let full = build_design(n, &all)?;
    let (sse_full, rank_full) = rank_aware_sse(&full, responses)?;
    if n <= rank_full {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {rank_full} fitted cells"
        )));
    }
    let df_den = n - rank_full;
    let m = mean(responses);
    let sst: f64 = responses.iter().map(|y| (y - m) * (y - m)).sum();
    let scale = responses
        .iter()
        .fold(0.0_f64, |a, y| a.max(y.abs()))
        .max(f64::MIN_POSITIVE);
    let noise_floor = (1e-12 * scale).powi(2) * n as f64;

    let mut effects = Vec::new();
    for (i, f) in testable.iter().enumerate() {
        let others: Vec<&Vec<Vec<f64>>> = blocks
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, b)| b)
            .collect();
        let reduced = build_design(n, &others)?;
        let (sse_red, rank_red) = rank_aware_sse(&reduced, responses)?;
        let df_num = rank_full - rank_red;
        if df_num == 0 {
            warnings.push(format!(
                "factor {} is confounded with the other factors; excluded",
                f.name
            ));
            continue;
        }
        let ss_effect = (sse_red - sse_full).max(0.0);
        let (fstat, p) = if ss_effect <= 1e-12 * sst.max(noise_floor) {
            (0.0, 1.0)
        } else if sse_full <= 1e-20 * sst.max(noise_floor) {
            (f64::INFINITY, 0.0)
        } else {
            let fstat = (ss_effect / df_num as f64) / (sse_full / df_den as f64);
            let p = tail_probability(
                Distribution::F {
                    df1: df_num as f64,
                    df2: df_den as f64,
                },
                fstat,
            )?;
            (fstat, p)
        };
        effects.push(FactorEffect {
            name: f.name.clone(),
            f: fstat,
            p_value: cap_p_value(p),
            df_num,
            df_den,
        });
    }
    Ok(FactorScreen { effects, warnings })
}
