//! Global Moran's I, local Getis-Ord Gi*, and FDR hot/cold classification.

use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats;
use crate::weights::WeightsMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    pub i: f64,
    pub expected: f64,
    /// Variance under the randomization assumption.
    pub variance_randomization: f64,
    pub z: f64,
    /// Two-sided normal p for `z`.
    pub p_analytic: f64,
    /// Pseudo p from the permutation test, when run.
    pub p_permutation: Option<f64>,
    pub n_perm: Option<usize>,
    pub seed: Option<u64>,
    pub n: usize,
    pub islands: usize,
}

fn check_field(x: &[f64], w: &WeightsMatrix) -> Result<()> {
    if x.len() != w.n {
        return Err(Error::LengthMismatch { expected: w.n, actual: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("field contains non-finite values".into()));
    }
    if stats::sum_sq_dev(x) == 0.0 {
        return Err(Error::ZeroVariance("field".into()));
    }
    Ok(())
}

fn deviations(x: &[f64]) -> Vec<f64> {
    let m = stats::mean(x);
    x.iter().map(|v| v - m).collect()
}

/// `sum_i z_i sum_j w_ij z_j`
fn cross_product(w: &WeightsMatrix, z: &[f64]) -> f64 {
    w.neighbors
        .iter()
        .zip(z)
        .map(|(row, zi)| zi * row.iter().map(|&(j, wij)| wij * z[j]).sum::<f64>())
        .sum()
}

/// Weight sums S1 and S2 for the moments of I.
fn s1_s2(w: &WeightsMatrix) -> (f64, f64) {
    let mut s1 = 0.0;
    for (i, row) in w.neighbors.iter().enumerate() {
        for &(j, wij) in row {
            let wji = w.weight(j, i);
            s1 += (wij + wji).powi(2);
        }
    }
    // pairs with w_ij = 0 but w_ji > 0
    for (j, row) in w.neighbors.iter().enumerate() {
        for &(i, wji) in row {
            if w.weight(i, j) == 0.0 {
                s1 += wji * wji;
            }
        }
    }
    s1 /= 2.0;
    let mut col = vec![0.0; w.n];
    for row in &w.neighbors {
        for &(j, wij) in row {
            col[j] += wij;
        }
    }
    let s2 = (0..w.n).map(|i| (w.row_sum(i) + col[i]).powi(2)).sum();
    (s1, s2)
}

/// Global Moran's I with analytic inference under randomization.
pub fn morans_i(x: &[f64], w: &WeightsMatrix) -> Result<MoranResult> {
    check_field(x, w)?;
    if w.includes_self {
        return Err(Error::InvalidArgument("Moran's I needs weights without self-loops".into()));
    }
    let n = x.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "Moran's I randomization variance needs N >= 4 (got {n})"
        )));
    }
    if w.w_sum == 0.0 {
        return Err(Error::AllIslands);
    }
    let z = deviations(x);
    let m2: f64 = z.iter().map(|v| v * v).sum();
    let m4: f64 = z.iter().map(|v| v.powi(4)).sum();
    let s0 = w.w_sum;
    let nf = n as f64;
    let i = nf / s0 * cross_product(w, &z) / m2;
    let expected = -1.0 / (nf - 1.0);

    let (s1, s2) = s1_s2(w);
    let b2 = nf * m4 / (m2 * m2);
    let num = nf * ((nf * nf - 3.0 * nf + 3.0) * s1 - nf * s2 + 3.0 * s0 * s0)
        - b2 * ((nf * nf - nf) * s1 - 2.0 * nf * s2 + 6.0 * s0 * s0);
    let den = (nf - 1.0) * (nf - 2.0) * (nf - 3.0) * s0 * s0;
    let variance = num / den - expected * expected;
    if !(variance > 0.0) {
        return Err(Error::Singular(format!("non-positive randomization variance {variance}")));
    }
    let zscore = (i - expected) / variance.sqrt();
    Ok(MoranResult {
        i,
        expected,
        variance_randomization: variance,
        z: zscore,
        p_analytic: stats::normal_two_sided_p(zscore),
        p_permutation: None,
        n_perm: None,
        seed: None,
        n,
        islands: w.islands.len(),
    })
}

/// Moran's I values for `n_perm` random relabelings of `x` over fixed `w`.
/// Replicate `r` uses RNG stream `r`, so the output does not depend on the
/// thread schedule.
pub fn permuted_morans_i(x: &[f64], w: &WeightsMatrix, n_perm: usize, seed: u64) -> Result<Vec<f64>> {
    check_field(x, w)?;
    if w.w_sum == 0.0 {
        return Err(Error::AllIslands);
    }
    let z = deviations(x);
    let m2: f64 = z.iter().map(|v| v * v).sum();
    let scale = x.len() as f64 / w.w_sum / m2;
    Ok((0..n_perm)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r as u64);
            let mut zp = z.clone();
            zp.shuffle(&mut rng);
            scale * cross_product(w, &zp)
        })
        .collect())
}

/// [`morans_i`] plus a two-sided permutation pseudo p-value.
pub fn morans_i_permutation(x: &[f64], w: &WeightsMatrix, n_perm: usize, seed: u64) -> Result<MoranResult> {
    if n_perm < 99 {
        return Err(Error::InvalidArgument(format!("n_perm must be >= 99 (got {n_perm})")));
    }
    let mut result = morans_i(x, w)?;
    let observed = (result.i - result.expected).abs();
    // relative slack so that relabelings which reproduce I exactly count as ties
    let cutoff = observed * (1.0 - 1e-12);
    let extreme = permuted_morans_i(x, w, n_perm, seed)?
        .into_iter()
        .filter(|ip| (ip - result.expected).abs() >= cutoff)
        .count();
    result.p_permutation = Some((1 + extreme) as f64 / (n_perm + 1) as f64);
    result.n_perm = Some(n_perm);
    result.seed = Some(seed);
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiStar {
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    /// Tracts whose neighborhood spans the whole region (z set to 0).
    pub degenerate: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Getis-Ord Gi* z-scores. `w` must include self-loops.
pub fn getis_ord_gi_star(x: &[f64], w: &WeightsMatrix) -> Result<GiStar> {
    if !w.includes_self {
        return Err(Error::InvalidArgument(
            "Gi* requires weights with self-inclusion (w_ii > 0)".into(),
        ));
    }
    check_field(x, w)?;
    let n = x.len();
    let nf = n as f64;
    let mean = stats::mean(x);
    let s = stats::population_sd(x);
    let mut out = GiStar { z: vec![0.0; n], p: vec![1.0; n], degenerate: Vec::new(), warnings: Vec::new() };
    for (i, row) in w.neighbors.iter().enumerate() {
        let wi: f64 = row.iter().map(|&(_, v)| v).sum();
        let wi2: f64 = row.iter().map(|&(_, v)| v * v).sum();
        let lag: f64 = row.iter().map(|&(j, v)| v * x[j]).sum();
        let spread = nf * wi2 - wi * wi;
        if spread <= 1e-12 * nf * wi2 {
            out.degenerate.push(i);
            out.warnings.push(format!(
                "tract index {i}: Gi* neighborhood covers the whole region; z set to 0"
            ));
            continue;
        }
        let z = (lag - mean * wi) / (s * (spread / (nf - 1.0)).sqrt());
        out.z[i] = z;
        out.p[i] = stats::normal_two_sided_p(z);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HotSpotCategory {
    Hot99,
    Hot95,
    Hot90,
    NotSig,
    Cold90,
    Cold95,
    Cold99,
}

impl HotSpotCategory {
    pub const ALL: [HotSpotCategory; 7] = [
        HotSpotCategory::Hot99,
        HotSpotCategory::Hot95,
        HotSpotCategory::Hot90,
        HotSpotCategory::NotSig,
        HotSpotCategory::Cold90,
        HotSpotCategory::Cold95,
        HotSpotCategory::Cold99,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HotSpotCategory::Hot99 => "hot99",
            HotSpotCategory::Hot95 => "hot95",
            HotSpotCategory::Hot90 => "hot90",
            HotSpotCategory::NotSig => "notsig",
            HotSpotCategory::Cold90 => "cold90",
            HotSpotCategory::Cold95 => "cold95",
            HotSpotCategory::Cold99 => "cold99",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn is_hot(self) -> bool {
        matches!(self, HotSpotCategory::Hot99 | HotSpotCategory::Hot95 | HotSpotCategory::Hot90)
    }

    pub fn is_cold(self) -> bool {
        matches!(self, HotSpotCategory::Cold99 | HotSpotCategory::Cold95 | HotSpotCategory::Cold90)
    }

    /// 0 for notsig, 1..=3 for the 90/95/99 levels.
    pub fn level(self) -> u8 {
        match self {
            HotSpotCategory::NotSig => 0,
            HotSpotCategory::Hot90 | HotSpotCategory::Cold90 => 1,
            HotSpotCategory::Hot95 | HotSpotCategory::Cold95 => 2,
            HotSpotCategory::Hot99 | HotSpotCategory::Cold99 => 3,
        }
    }

    fn from_level(level: u8, positive: bool) -> Self {
        match (level, positive) {
            (0, _) => HotSpotCategory::NotSig,
            (1, true) => HotSpotCategory::Hot90,
            (2, true) => HotSpotCategory::Hot95,
            (_, true) => HotSpotCategory::Hot99,
            (1, false) => HotSpotCategory::Cold90,
            (2, false) => HotSpotCategory::Cold95,
            (_, false) => HotSpotCategory::Cold99,
        }
    }
}

impl fmt::Display for HotSpotCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Significance levels for the 90/95/99 classes, loosest first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaLevels(pub [f64; 3]);

impl Default for AlphaLevels {
    fn default() -> Self {
        AlphaLevels([0.10, 0.05, 0.01])
    }
}

impl AlphaLevels {
    pub fn new(levels: [f64; 3]) -> Result<Self> {
        let [a, b, c] = levels;
        if !(0.0 < c && c < b && b < a && a < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha levels must satisfy 1 > a90 > a95 > a99 > 0, got {levels:?}"
            )));
        }
        Ok(AlphaLevels(levels))
    }
}

/// Benjamini-Hochberg step-up: rejection mask at level `alpha`.
pub fn benjamini_hochberg(p: &[f64], alpha: f64) -> Vec<bool> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let cutoff = order
        .iter()
        .enumerate()
        .filter(|&(k, &i)| p[i] <= (k + 1) as f64 * alpha / m as f64)
        .map(|(k, _)| k + 1)
        .next_back()
        .unwrap_or(0);
    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    reject
}

fn classify_with(z: &[f64], alphas: AlphaLevels, reject: impl Fn(&[f64], f64) -> Vec<bool>) -> Vec<HotSpotCategory> {
    let p: Vec<f64> = z.iter().map(|&v| stats::normal_two_sided_p(v)).collect();
    let masks: Vec<Vec<bool>> = alphas.0.iter().map(|&a| reject(&p, a)).collect();
    (0..z.len())
        .map(|i| {
            let level = masks.iter().filter(|m| m[i]).count() as u8;
            // nested masks make the count equal to the strictest level passed
            HotSpotCategory::from_level(level, z[i] > 0.0)
        })
        .collect()
}

/// Categories after Benjamini-Hochberg correction at each alpha.
pub fn fdr_classify(z: &[f64], alphas: AlphaLevels) -> Vec<HotSpotCategory> {
    classify_with(z, alphas, benjamini_hochberg)
}

/// Categories from uncorrected per-tract p-values.
pub fn raw_classify(z: &[f64], alphas: AlphaLevels) -> Vec<HotSpotCategory> {
    classify_with(z, alphas, |p, a| p.iter().map(|&v| v <= a).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotSpotResult {
    pub gi_z: Vec<f64>,
    pub p: Vec<f64>,
    /// FDR-corrected classes.
    pub category: Vec<HotSpotCategory>,
    /// Uncorrected classes.
    pub raw_category: Vec<HotSpotCategory>,
    pub alpha_levels: AlphaLevels,
    pub warnings: Vec<String>,
}

pub fn hot_spots(x: &[f64], w: &WeightsMatrix, alphas: AlphaLevels) -> Result<HotSpotResult> {
    let gi = getis_ord_gi_star(x, w)?;
    Ok(HotSpotResult {
        category: fdr_classify(&gi.z, alphas),
        raw_category: raw_classify(&gi.z, alphas),
        gi_z: gi.z,
        p: gi.p,
        alpha_levels: alphas,
        warnings: gi.warnings,
    })
}

/// Count per category, in [`HotSpotCategory::ALL`] order.
pub fn category_counts(cats: &[HotSpotCategory]) -> Vec<(HotSpotCategory, usize)> {
    HotSpotCategory::ALL
        .iter()
        .map(|&c| (c, cats.iter().filter(|&&x| x == c).count()))
        .collect()
}
