//! Synthetic study regions: square lattices, SAR deprivation fields, planted
//! hot spots and condition/indicator tables driven by deprivation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MultiPolygon, Polygon, Ring};
use crate::ingest::{
    join_region, AttributeTable, GeometrySet, IndicatorTable, MissingPolicy, PrevalenceTable, StudyRegion, TractId, ValueKind,
};
use crate::rng;
use crate::stats;
use crate::vars;
use crate::weights::{rook_contiguity, row_standardize, Standardization, WeightsMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
}

impl LatticeSpec {
    pub fn new(rows: usize, cols: usize) -> Self {
        LatticeSpec { rows, cols, cell_size: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols < 4 {
            return Err(Error::InvalidArgument(format!(
                "lattice must have rows*cols >= 4 (got {}x{})",
                self.rows, self.cols
            )));
        }
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::InvalidArgument("cell size must be positive".into()));
        }
        Ok(())
    }
}

pub fn lattice_id(row: usize, col: usize) -> TractId {
    TractId::new(format!("r{row}c{col}")).expect("non-empty")
}

/// Lattice cells in canonical (sorted id) order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeRegion {
    pub spec: LatticeSpec,
    pub ids: Vec<TractId>,
    /// `(row, col)` of each cell, aligned with `ids`.
    pub cells: Vec<(usize, usize)>,
    pub geometry: Vec<MultiPolygon>,
}

impl LatticeRegion {
    pub fn index_of(&self, row: usize, col: usize) -> Option<usize> {
        self.ids.binary_search(&lattice_id(row, col)).ok()
    }

    pub fn geometry_set(&self) -> GeometrySet {
        GeometrySet {
            rows: self.ids.iter().cloned().zip(self.geometry.iter().cloned()).collect(),
            crs_note: "synthetic lattice; planar unit coordinates".into(),
            ..Default::default()
        }
    }

    /// Binary rook contiguity over the cells.
    pub fn rook(&self) -> Result<WeightsMatrix> {
        rook_contiguity(&self.geometry, None)
    }
}

/// Unit squares `cell_size` wide; cell `(row, col)` spans
/// `[col, col + 1] x [row, row + 1]` times the cell size.
pub fn generate_lattice_region(spec: &LatticeSpec) -> Result<LatticeRegion> {
    spec.validate()?;
    let s = spec.cell_size;
    let mut cells: Vec<(TractId, (usize, usize), MultiPolygon)> = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let (x, y) = (c as f64 * s, r as f64 * s);
            let (ring, _) = Ring::closed(vec![[x, y], [x + s, y], [x + s, y + s], [x, y + s]]);
            let mp = MultiPolygon { polygons: vec![Polygon { exterior: ring, holes: vec![] }] };
            cells.push((lattice_id(r, c), (r, c), mp));
        }
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(LatticeRegion {
        spec: *spec,
        ids: cells.iter().map(|c| c.0.clone()).collect(),
        cells: cells.iter().map(|c| c.1).collect(),
        geometry: cells.into_iter().map(|c| c.2).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SarSpec {
    pub rho: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl SarSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        Ok(())
    }
}

/// `x = (I - rho W)^-1 eps`, `eps ~ N(0, sigma^2)` iid, solved densely.
pub fn generate_sar_field(w: &WeightsMatrix, spec: &SarSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if w.standardization != Standardization::RowStandardized {
        return Err(Error::InvalidArgument("SAR generation needs row-standardized weights".into()));
    }
    if !w.islands.is_empty() {
        return Err(Error::InvalidArgument(format!("SAR weights have {} island(s)", w.islands.len())));
    }
    let n = w.n;
    let normal = Normal::new(0.0, spec.sigma).expect("sigma validated");
    let mut rng = rng::stream(spec.seed, rng::STREAM_SAR);
    let eps: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    if spec.rho == 0.0 {
        return Ok(eps);
    }
    let mut a = DMatrix::<f64>::identity(n, n);
    for (i, row) in w.neighbors.iter().enumerate() {
        for &(j, wij) in row {
            a[(i, j)] -= spec.rho * wij;
        }
    }
    a.lu()
        .solve(&DVector::from_vec(eps))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Singular("I - rho W is singular".into()))
}

/// Tracts within `radius_steps` graph steps of `center` on `w`.
pub fn graph_ball(w: &WeightsMatrix, center: usize, radius_steps: usize) -> Result<BTreeSet<usize>> {
    if center >= w.n {
        return Err(Error::InvalidArgument(format!("center {center} out of range (n = {})", w.n)));
    }
    let mut dist = vec![usize::MAX; w.n];
    dist[center] = 0;
    let mut queue = VecDeque::from([center]);
    while let Some(i) = queue.pop_front() {
        if dist[i] == radius_steps {
            continue;
        }
        for &(j, wij) in &w.neighbors[i] {
            if wij > 0.0 && dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    Ok((0..w.n).filter(|&i| dist[i] != usize::MAX).collect())
}

/// Adds `delta` to every tract in the graph ball; returns the new values
/// and the planted set.
pub fn plant_hotspot(
    x: &[f64],
    w: &WeightsMatrix,
    center: usize,
    radius_steps: usize,
    delta: f64,
) -> Result<(Vec<f64>, BTreeSet<usize>)> {
    if x.len() != w.n {
        return Err(Error::LengthMismatch { expected: w.n, actual: x.len() });
    }
    let planted = graph_ball(w, center, radius_steps)?;
    let mut out = x.to_vec();
    for &i in &planted {
        out[i] += delta;
    }
    Ok((out, planted))
}

/// How conditions depend on deprivation:
/// `condition_k = intercept_k + loading_k * d + N(0, noise_sd^2)`, where `d`
/// is the deprivation field standardized to mean 0 and sd 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub names: Vec<String>,
    pub intercepts: Vec<f64>,
    pub loadings: Vec<f64>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl ConditionSpec {
    /// `k` conditions. The first six reuse the Memphis names and means; the
    /// default loading is 0.8 of the Memphis standard deviation.
    pub fn with_defaults(k: usize, seed: u64) -> Self {
        let mut names = Vec::with_capacity(k);
        let mut intercepts = Vec::with_capacity(k);
        let mut loadings = Vec::with_capacity(k);
        for i in 0..k {
            match vars::CONDITIONS.get(i) {
                Some(&name) => {
                    let (m, s) = vars::memphis_mean_sd(name).expect("known condition");
                    names.push(name.to_string());
                    intercepts.push(m);
                    loadings.push(0.8 * s);
                }
                None => {
                    names.push(format!("condition{}", i + 1));
                    intercepts.push(20.0);
                    loadings.push(4.0);
                }
            }
        }
        ConditionSpec { names, intercepts, loadings, noise_sd: 1.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.names.len();
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one condition".into()));
        }
        if self.intercepts.len() != k {
            return Err(Error::LengthMismatch { expected: k, actual: self.intercepts.len() });
        }
        if self.loadings.len() != k {
            return Err(Error::LengthMismatch { expected: k, actual: self.loadings.len() });
        }
        if self.loadings.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidArgument("loadings must be non-negative".into()));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidArgument("noise_sd must be >= 0".into()));
        }
        Ok(())
    }
}

/// Indicator recipe: `mean + loading * d + N(0, noise^2)`, clipped to the
/// variable's valid range.
struct IndicatorRecipe {
    name: &'static str,
    mean: f64,
    loading: f64,
    noise: f64,
}

const INDICATOR_RECIPES: [IndicatorRecipe; 7] = [
    IndicatorRecipe { name: vars::POVERTY, mean: 28.864, loading: 11.0, noise: 9.0 },
    IndicatorRecipe { name: vars::UNEMPLOYMENT, mean: 15.729, loading: 6.0, noise: 4.0 },
    IndicatorRecipe { name: vars::CRIME, mean: 47.970, loading: 14.0, noise: 10.0 },
    IndicatorRecipe { name: vars::SMOKING, mean: 25.376, loading: 5.0, noise: 3.0 },
    IndicatorRecipe { name: vars::MALE, mean: 48.073, loading: 0.0, noise: 3.0 },
    IndicatorRecipe { name: vars::AGE67, mean: 9.135, loading: -1.0, noise: 2.5 },
    IndicatorRecipe { name: vars::POPULATION, mean: 3634.107, loading: 0.0, noise: 900.0 },
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTables {
    pub prevalence: PrevalenceTable,
    pub indicators: IndicatorTable,
    /// Cells moved to the edge of their valid range.
    pub clip_events: usize,
    pub cells: usize,
}

impl SynthTables {
    /// Joins the tables with the lattice geometry.
    pub fn region(&self, lattice: &LatticeRegion) -> Result<StudyRegion> {
        join_region(&self.prevalence, &self.indicators, &lattice.geometry_set(), MissingPolicy::Strict)
    }
}

fn standardize(x: &[f64]) -> Vec<f64> {
    let m = stats::mean(x);
    let s = stats::population_sd(x);
    if s == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - m) / s).collect()
}

/// Condition prevalences plus the seven indicators, all driven by
/// `deprivation`. Values are clipped to valid ranges; a warning is added to
/// the prevalence table when more than 1% of cells were clipped.
pub fn generate_condition_table(ids: &[TractId], deprivation: &[f64], spec: &ConditionSpec) -> Result<SynthTables> {
    spec.validate()?;
    if ids.len() != deprivation.len() {
        return Err(Error::LengthMismatch { expected: ids.len(), actual: deprivation.len() });
    }
    let d = standardize(deprivation);
    let n = ids.len();
    let k = spec.names.len();
    let std_normal = Normal::new(0.0, 1.0).expect("valid");
    let mut clip_events = 0;

    let mut crng = rng::stream(spec.seed, rng::STREAM_CONDITIONS);
    let mut prev_rows = BTreeMap::new();
    for (t, id) in ids.iter().enumerate() {
        let row: Vec<Option<f64>> = (0..k)
            .map(|c| {
                let v = spec.intercepts[c] + spec.loadings[c] * d[t] + spec.noise_sd * std_normal.sample(&mut crng);
                let clipped = v.clamp(0.0, 100.0);
                if clipped != v {
                    clip_events += 1;
                }
                Some(clipped)
            })
            .collect();
        prev_rows.insert(id.clone(), row);
    }

    let mut irng = rng::stream(spec.seed, rng::STREAM_INDICATORS);
    let mut ind_rows = BTreeMap::new();
    for (t, id) in ids.iter().enumerate() {
        let row: Vec<Option<f64>> = INDICATOR_RECIPES
            .iter()
            .map(|r| {
                let raw = r.mean + r.loading * d[t] + r.noise * std_normal.sample(&mut irng);
                let v = match ValueKind::infer(r.name) {
                    ValueKind::Percent => raw.clamp(0.0, 100.0),
                    ValueKind::Index => raw.max(0.0),
                    ValueKind::Count => raw.round().max(0.0),
                };
                let moved = match ValueKind::infer(r.name) {
                    ValueKind::Count => v != raw.round(),
                    _ => v != raw,
                };
                if moved {
                    clip_events += 1;
                }
                Some(v)
            })
            .collect();
        ind_rows.insert(id.clone(), row);
    }

    let cells = n * (k + INDICATOR_RECIPES.len());
    let mut prevalence = AttributeTable {
        names: spec.names.clone(),
        kinds: vec![ValueKind::Percent; k],
        rows: prev_rows,
        ..Default::default()
    };
    if clip_events * 100 > cells {
        prevalence.warnings.push(format!(
            "synthetic generator clipped {clip_events} of {cells} cells (> 1%)"
        ));
    }
    let indicators = AttributeTable {
        names: INDICATOR_RECIPES.iter().map(|r| r.name.to_string()).collect(),
        kinds: INDICATOR_RECIPES.iter().map(|r| ValueKind::infer(r.name)).collect(),
        rows: ind_rows,
        ..Default::default()
    };
    Ok(SynthTables { prevalence, indicators, clip_events, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotspotSpec {
    pub row: usize,
    pub col: usize,
    pub radius_steps: usize,
    /// Added amount, in units of the background field's sample sd.
    pub delta_sd: f64,
}

/// Everything needed to generate a synthetic region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub lattice: LatticeSpec,
    pub rho: f64,
    pub sigma: f64,
    pub conditions: usize,
    pub noise_sd: f64,
    pub hotspot: Option<HotspotSpec>,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            lattice: LatticeSpec::new(20, 20),
            rho: 0.6,
            sigma: 1.0,
            conditions: 6,
            noise_sd: 1.0,
            hotspot: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub lattice: LatticeRegion,
    /// Row-standardized rook weights used for the SAR field.
    pub weights: WeightsMatrix,
    pub deprivation: Vec<f64>,
    pub planted: BTreeSet<usize>,
    pub tables: SynthTables,
}

impl SynthDataset {
    pub fn geometry_set(&self) -> GeometrySet {
        self.lattice.geometry_set()
    }

    pub fn region(&self) -> Result<StudyRegion> {
        self.tables.region(&self.lattice)
    }
}

pub fn build_scenario(scenario: &Scenario) -> Result<SynthDataset> {
    let lattice = generate_lattice_region(&scenario.lattice)?;
    let weights = row_standardize(&lattice.rook()?);
    let sar = SarSpec { rho: scenario.rho, sigma: scenario.sigma, seed: scenario.seed };
    let background = generate_sar_field(&weights, &sar)?;
    let (deprivation, planted) = match scenario.hotspot {
        Some(h) => {
            let center = lattice.index_of(h.row, h.col).ok_or_else(|| {
                Error::InvalidArgument(format!("hotspot cell ({}, {}) outside the lattice", h.row, h.col))
            })?;
            let delta = h.delta_sd * stats::sample_sd(&background);
            plant_hotspot(&background, &weights, center, h.radius_steps, delta)?
        }
        None => (background, BTreeSet::new()),
    };
    let mut spec = ConditionSpec::with_defaults(scenario.conditions, scenario.seed);
    spec.noise_sd = scenario.noise_sd;
    let tables = generate_condition_table(&lattice.ids, &deprivation, &spec)?;
    Ok(SynthDataset { lattice, weights, deprivation, planted, tables })
}

/// Score histogram of the Memphis-shaped fixture: tracts with affinity
/// 0, 1, ..., 6. N = 176 reproduces the published affinity mean and sd
/// (2.960, 2.584) to three decimals with 35% of tracts at six.
const MEMPHIS_SCORE_COUNTS: [usize; 7] = [43, 43, 5, 6, 7, 10, 62];

/// Affine map of `x` onto the given sample mean and sd.
fn match_moments(x: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    let m = stats::mean(x);
    let s = stats::sample_sd(x);
    x.iter().map(|v| mean + sd * (v - m) / s).collect()
}

/// Deterministic 16 x 11 lattice whose condition columns have exactly the
/// published means and sample standard deviations and whose affinity
/// scores follow [`MEMPHIS_SCORE_COUNTS`], highest in the west. Indicators
/// match the published means and sds and rise with affinity.
pub fn memphis_like() -> Result<(LatticeRegion, SynthTables)> {
    let lattice = generate_lattice_region(&LatticeSpec::new(16, 11))?;
    let n = lattice.ids.len();
    // west-to-east ranking
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (lattice.cells[i].1, lattice.cells[i].0));
    let mut scores = vec![0usize; n];
    let mut rank = 0;
    for (score, &count) in MEMPHIS_SCORE_COUNTS.iter().enumerate().rev() {
        for _ in 0..count {
            scores[order[rank]] = score;
            rank += 1;
        }
    }
    let k = vars::CONDITIONS.len();
    let flags: Vec<Vec<bool>> = (0..n)
        .map(|t| {
            let mut f = vec![false; k];
            for j in 0..scores[t] {
                f[(t + j) % k] = true;
            }
            f
        })
        .collect();

    let mut prev_cols = Vec::with_capacity(k);
    for (c, &name) in vars::CONDITIONS.iter().enumerate() {
        let (mean, sd) = vars::memphis_mean_sd(name).expect("known");
        let n_hi = flags.iter().filter(|f| f[c]).count() as f64;
        let n_lo = n as f64 - n_hi;
        let nf = n as f64;
        let up = sd * ((nf - 1.0) * n_lo / (n_hi * nf)).sqrt();
        let down = n_hi * up / n_lo;
        prev_cols.push(flags.iter().map(|f| if f[c] { mean + up } else { mean - down }).collect::<Vec<_>>());
    }

    let loading = |name: &str| match name {
        // about r = 0.68 with affinity for the first three
        vars::POVERTY | vars::UNEMPLOYMENT | vars::SMOKING => 0.25,
        vars::CRIME => 0.15,
        vars::AGE67 => 0.08,
        _ => 0.0,
    };
    let mut ind_cols = Vec::new();
    for (k_ind, &name) in vars::INDICATORS.iter().enumerate() {
        let (mean, sd) = vars::memphis_mean_sd(name).expect("known");
        let pattern: Vec<f64> = (0..n)
            .map(|t| loading(name) * scores[t] as f64 + (1.7 * (t as f64) * (k_ind as f64 + 1.0) + k_ind as f64).sin())
            .collect();
        let mut col = match_moments(&pattern, mean, sd);
        // Right-skew columns that a linear shape would push below zero.
        let mut shape = (1.0 + (sd / mean).powi(2)).ln().sqrt();
        while col.iter().any(|&v| v < 0.0) {
            let z = match_moments(&pattern, 0.0, 1.0);
            let skewed: Vec<f64> = z.iter().map(|z| (shape * z).exp()).collect();
            col = match_moments(&skewed, mean, sd);
            shape *= 1.25;
        }
        if name == vars::POPULATION {
            col.iter_mut().for_each(|v| *v = v.round());
        }
        ind_cols.push(col);
    }

    let rows_of = |cols: &[Vec<f64>]| -> BTreeMap<TractId, Vec<Option<f64>>> {
        lattice
            .ids
            .iter()
            .enumerate()
            .map(|(t, id)| (id.clone(), cols.iter().map(|c| Some(c[t])).collect()))
            .collect()
    };
    let prevalence = AttributeTable {
        names: vars::CONDITIONS.iter().map(|s| s.to_string()).collect(),
        kinds: vec![ValueKind::Percent; k],
        rows: rows_of(&prev_cols),
        ..Default::default()
    };
    let indicators = AttributeTable {
        names: vars::INDICATORS.iter().map(|s| s.to_string()).collect(),
        kinds: vars::INDICATORS.iter().map(|s| ValueKind::infer(s)).collect(),
        rows: rows_of(&ind_cols),
        ..Default::default()
    };
    let cells = n * (k + vars::INDICATORS.len());
    Ok((lattice, SynthTables { prevalence, indicators, clip_events: 0, cells }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_shapes() {
        let l = generate_lattice_region(&LatticeSpec::new(2, 2)).unwrap();
        assert_eq!(l.geometry.len(), 4);
        assert!(l.geometry.iter().all(|g| g.polygons[0].exterior.points.len() == 5));
        assert!(generate_lattice_region(&LatticeSpec::new(1, 3)).is_err());
        let l = generate_lattice_region(&LatticeSpec::new(1, 4)).unwrap();
        let w = l.rook().unwrap();
        let mut degrees: Vec<usize> = w.neighbors.iter().map(Vec::len).collect();
        degrees.sort();
        assert_eq!(degrees, vec![1, 1, 2, 2]);
        assert_eq!(w.edges().len(), 6);
    }

    #[test]
    fn sar_rho_zero_is_noise_and_deterministic() {
        let l = generate_lattice_region(&LatticeSpec::new(5, 5)).unwrap();
        let w = row_standardize(&l.rook().unwrap());
        let spec = SarSpec { rho: 0.0, sigma: 1.0, seed: 9 };
        let a = generate_sar_field(&w, &spec).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut r = rng::stream(9, rng::STREAM_SAR);
        let eps: Vec<f64> = (0..25).map(|_| normal.sample(&mut r)).collect();
        assert_eq!(a, eps);
        let spec = SarSpec { rho: 0.7, sigma: 1.0, seed: 9 };
        assert_eq!(generate_sar_field(&w, &spec).unwrap(), generate_sar_field(&w, &spec).unwrap());
        assert!(generate_sar_field(&w, &SarSpec { rho: 1.0, sigma: 1.0, seed: 0 }).is_err());
        assert!(generate_sar_field(&l.rook().unwrap(), &spec).is_err());
    }

    #[test]
    fn hotspot_radius_zero_and_delta_zero() {
        let l = generate_lattice_region(&LatticeSpec::new(5, 5)).unwrap();
        let w = l.rook().unwrap();
        let x = vec![0.0; 25];
        let c = l.index_of(2, 2).unwrap();
        let (y, set) = plant_hotspot(&x, &w, c, 0, 1.0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(y.iter().filter(|&&v| v != 0.0).count(), 1);
        let (y, set) = plant_hotspot(&x, &w, c, 1, 0.0).unwrap();
        assert_eq!(y, x);
        assert_eq!(set.len(), 5);
        assert!(plant_hotspot(&x, &w, 99, 1, 1.0).is_err());
    }

    #[test]
    fn zero_noise_identical_loadings_are_collinear() {
        let ids: Vec<TractId> = (0..10).map(|i| TractId::new(format!("t{i}")).unwrap()).collect();
        let dep: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut spec = ConditionSpec::with_defaults(3, 1);
        spec.noise_sd = 0.0;
        spec.loadings = vec![2.0; 3];
        spec.intercepts = vec![30.0; 3];
        let t = generate_condition_table(&ids, &dep, &spec).unwrap();
        for row in t.prevalence.rows.values() {
            assert_eq!(row[0], row[1]);
            assert_eq!(row[1], row[2]);
        }
    }

    #[test]
    fn conditions_validate_lengths() {
        let ids: Vec<TractId> = (0..4).map(|i| TractId::new(format!("t{i}")).unwrap()).collect();
        let mut spec = ConditionSpec::with_defaults(3, 1);
        spec.loadings.pop();
        assert!(generate_condition_table(&ids, &[0.0, 1.0, 2.0, 3.0], &spec).is_err());
    }

    #[test]
    fn memphis_like_moments_and_scores() {
        let (lattice, tables) = memphis_like().unwrap();
        let region = tables.region(&lattice).unwrap();
        assert_eq!(region.n(), 176);
        assert_eq!(crate::affinity::affinity_scores(&region).score_counts(), MEMPHIS_SCORE_COUNTS);
        for (k, name) in region.indicator_names.iter().enumerate() {
            let col: Vec<f64> = region.indicators.iter().map(|r| r[k]).collect();
            let (m, s) = vars::memphis_mean_sd(name).unwrap();
            let tol = if name == vars::POPULATION { 0.5 } else { 1e-9 };
            assert!((stats::mean(&col) - m).abs() < tol, "{name}");
            assert!((stats::sample_sd(&col) - s).abs() < tol, "{name}");
            assert!(col.iter().all(|&v| v >= 0.0), "{name}");
        }
    }
}
