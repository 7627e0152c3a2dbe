//! Rank correlation over server rankings.
//!
//! [`rank_correlation`] computes `r = 1 - Σd² / (N(N²−1))`, the form this
//! system reports. The conventional Spearman coefficient carries a factor 6
//! in the numerator; [`rank_correlation_standard`] provides it alongside,
//! because the two only agree when Σd² = 0. Both accept rankings as
//! permutations of 1..=N.

use crate::error::{CdsError, Result};

fn validate(a: &[u32], b: &[u32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(CdsError::Validation(format!(
            "rankings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(CdsError::Validation(
            "need at least two ranked items".to_string(),
        ));
    }
    for (name, ranking) in [("first", a), ("second", b)] {
        let n = ranking.len() as u32;
        let mut seen = vec![false; ranking.len()];
        for &r in ranking {
            if r == 0 || r > n {
                return Err(CdsError::Validation(format!(
                    "{name} ranking has rank {r}, expected 1..={n}"
                )));
            }
            if std::mem::replace(&mut seen[(r - 1) as usize], true) {
                return Err(CdsError::Validation(format!(
                    "{name} ranking repeats rank {r}"
                )));
            }
        }
    }
    Ok(())
}

fn sum_sq_diff(a: &[u32], b: &[u32]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum()
}

/// `r = 1 - Σd² / (N(N²−1))`.
pub fn rank_correlation(a: &[u32], b: &[u32]) -> Result<f64> {
    validate(a, b)?;
    let n = a.len() as u64;
    let denom = n * (n * n - 1);
    Ok(1.0 - sum_sq_diff(a, b) as f64 / denom as f64)
}

/// Conventional Spearman: `r = 1 - 6Σd² / (N(N²−1))`.
pub fn rank_correlation_standard(a: &[u32], b: &[u32]) -> Result<f64> {
    validate(a, b)?;
    let n = a.len() as u64;
    let denom = n * (n * n - 1);
    Ok(1.0 - 6.0 * sum_sq_diff(a, b) as f64 / denom as f64)
}

/// 1-based ranks of a value series, rank 1 for the smallest value. Ties are
/// rejected — rankings here must be permutations.
pub fn ranks_ascending(values: &[i64]) -> Result<Vec<u32>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by_key(|&i| values[i]);
    for pair in order.windows(2) {
        if values[pair[0]] == values[pair[1]] {
            return Err(CdsError::Validation(format!(
                "tied values ({}) cannot be ranked",
                values[pair[0]]
            )));
        }
    }
    let mut ranks = vec![0u32; values.len()];
    for (rank0, &i) in order.iter().enumerate() {
        ranks[i] = rank0 as u32 + 1;
    }
    Ok(ranks)
}
