//! Paired and unpaired significance tests used to compare systems.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Below this many discordant pairs McNemar uses the exact binomial tail.
pub const MCNEMAR_EXACT_LIMIT: usize = 25;
/// Up to this many pooled observations without ties, Mann-Whitney enumerates
/// every rank assignment.
pub const MANN_WHITNEY_EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// Items system A got right and system B got wrong.
    pub b: usize,
    /// Items system A got wrong and system B got right.
    pub c: usize,
    pub p_value: f64,
    pub method: TestMethod,
}

/// McNemar's test on paired correctness indicators.
pub fn mcnemar(a_correct: &[bool], b_correct: &[bool]) -> Result<McNemar> {
    if a_correct.len() != b_correct.len() {
        return Err(Error::argument(format!(
            "paired vectors differ in length ({} vs {})",
            a_correct.len(),
            b_correct.len()
        )));
    }
    if a_correct.is_empty() {
        return Err(Error::argument("McNemar needs at least one paired item"));
    }
    let b = a_correct.iter().zip(b_correct).filter(|(&a, &b)| a && !b).count();
    let c = a_correct.iter().zip(b_correct).filter(|(&a, &b)| !a && b).count();
    Ok(mcnemar_from_counts(b, c))
}

pub fn mcnemar_from_counts(b: usize, c: usize) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar {
            b,
            c,
            p_value: 1.0,
            method: TestMethod::Exact,
        };
    }
    if n < MCNEMAR_EXACT_LIMIT {
        let tail: u64 = (0..=b.min(c)).map(|k| binomial(n as u64, k as u64)).sum();
        let p = 2.0 * tail as f64 / (1u64 << n) as f64;
        McNemar {
            b,
            c,
            p_value: p.min(1.0),
            method: TestMethod::Exact,
        }
    } else {
        let diff = (b as f64 - c as f64).abs() - 1.0;
        let statistic = diff * diff / n as f64;
        McNemar {
            b,
            c,
            p_value: chi_square_1df_sf(statistic).max(f64::MIN_POSITIVE),
            method: TestMethod::Asymptotic,
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Upper tail of the chi-square distribution with one degree of freedom.
fn chi_square_1df_sf(x: f64) -> f64 {
    erfc((x / 2.0).sqrt())
}

/// Two-sided upper tail of the standard normal at `|z|`.
fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

/// Two-sided Mann-Whitney U test.
///
/// Small samples without ties get the exact permutation p-value; everything
/// else uses the normal approximation with tie-corrected variance and a 0.5
/// continuity correction.
pub fn mann_whitney_u(xs: &[f64], ys: &[f64]) -> Result<MannWhitney> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::argument("Mann-Whitney needs two non-empty samples"));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::argument("Mann-Whitney sample contains NaN"));
    }
    let (ranks, tie_groups) = midranks(xs, ys);
    let n = xs.len() as f64;
    let m = ys.len() as f64;
    let rank_sum_x: f64 = ranks[..xs.len()].iter().sum();
    let u = rank_sum_x - n * (n + 1.0) / 2.0;

    let has_ties = tie_groups.iter().any(|&t| t > 1);
    if !has_ties && xs.len() + ys.len() <= MANN_WHITNEY_EXACT_LIMIT {
        return Ok(MannWhitney {
            u,
            p_value: mann_whitney_exact_p(xs.len(), ys.len(), u),
            method: TestMethod::Exact,
        });
    }
    Ok(MannWhitney {
        u,
        p_value: mann_whitney_normal_p(n, m, u, &tie_groups),
        method: TestMethod::Asymptotic,
    })
}

/// Normal-approximation p-value, exposed for comparison against the exact one.
pub fn mann_whitney_normal_p(n: f64, m: f64, u: f64, tie_groups: &[usize]) -> f64 {
    let total = n + m;
    let tie_term: f64 = tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let deviation = ((u - n * m / 2.0).abs() - 0.5).max(0.0);
    normal_two_sided(deviation / variance.sqrt()).min(1.0)
}

/// Exact two-sided p-value for tie-free data: the share of all rank
/// assignments whose U lies at least as far from `n*m/2` as the observed one.
pub fn mann_whitney_exact_p(n: usize, m: usize, u: f64) -> f64 {
    let total = n + m;
    let center2 = (n * m) as i64;
    let observed = ((2.0 * u).round() as i64 - center2).abs();
    let offset = (n * (n + 1) / 2) as i64;
    let mut extreme = 0u64;
    let mut count = 0u64;
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        count += 1;
        let rank_sum: i64 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| i as i64 + 1).sum();
        let u2 = 2 * (rank_sum - offset);
        if (u2 - center2).abs() >= observed {
            extreme += 1;
        }
    }
    extreme as f64 / count as f64
}

/// Midranks of the pooled sample (x values first) and the tie group sizes.
pub fn midranks(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        groups.push(j - i + 1);
        i = j + 1;
    }
    (ranks, groups)
}

/// Mean and sample standard deviation (absent below two values).
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    if values.is_empty() {
        return (f64::NAN, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}
