//! The validate / analyze / synth commands.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use geoaffinity::affinity::{affinity_scores, correlation_matrix, descriptive_stats, AFFINITY};
use geoaffinity::ingest::{
    feature_collection, join_region, parse_geometry, parse_indicator_csv, parse_indicator_csv_strict,
    parse_prevalence_csv, parse_prevalence_csv_strict, write_geometry_geojson, write_table_csv, MissingPolicy,
    StudyRegion, ValidationReport,
};
use geoaffinity::regression::{fit_model, DesignSpec, IrlsConfig};
use geoaffinity::rng::RNG_ALGORITHM;
use geoaffinity::spatial::{category_counts, hot_spots, morans_i, morans_i_permutation, AlphaLevels};
use geoaffinity::synth::build_scenario;
use geoaffinity::weights::{
    distance_band_weights, knn_weights, max_nearest_neighbor_distance, queen_contiguity, rook_contiguity,
    row_standardize, WeightsMatrix,
};
use serde_json::{json, Map, Value};

use crate::config::{LoadedConfig, RunConfig, WeightsKind};
use crate::error::CliError;
use crate::render::{render_choropleth, Classes, MapSpec};
use crate::report::{
    AffinitySummary, CorrelationEntry, HotspotSection, Metadata, ModelEntry, MoranSection, Report, Table3,
    WeightsSummary,
};

pub const REPORT_FILE: &str = "report.json";
pub const RESULTS_FILE: &str = "results.geojson";
pub const AFFINITY_SVG: &str = "choropleth_affinity.svg";
pub const HOTSPOT_SVG: &str = "choropleth_hotspots.svg";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const LOCK_FILE: &str = ".geoaffinity.lock";
pub const SYNTH_PREVALENCE: &str = "prevalence.csv";
pub const SYNTH_INDICATORS: &str = "indicators.csv";
pub const SYNTH_GEOMETRY: &str = "tracts.geojson";
const SYNTH_ID: &str = "GEOID";

/// Options shared by the commands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

pub struct Context {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub seed: u64,
    pub quiet: bool,
    out: Option<PathBuf>,
}

impl Context {
    pub fn new(loaded: LoadedConfig, opts: &RunOptions) -> Result<Self, CliError> {
        let mut config = loaded.config;
        if let Some(seed) = opts.seed {
            config.inference.seed = Some(seed);
        }
        let seed = config.require_seed()?;
        Ok(Context { config, base_dir: loaded.base_dir, seed, quiet: opts.quiet, out: opts.out.clone() })
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        match (&self.out, &self.config.output.dir) {
            (Some(o), _) => o.clone(),
            (None, Some(d)) => self.base_dir.join(d),
            (None, None) => self.base_dir.join("geoaffinity-out"),
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

/// Reads (or synthesizes) and joins the study region.
pub fn load_region(ctx: &Context) -> Result<StudyRegion, CliError> {
    let cfg = &ctx.config;
    if let Some(synth) = &cfg.synth {
        let data = build_scenario(&synth.scenario(ctx.seed)?)?;
        return Ok(data.region()?);
    }
    let input = cfg.input.as_ref().expect("validated: one source present");
    let prev_path = ctx.resolve(&input.prevalence);
    let ind_path = ctx.resolve(&input.indicators);
    let geo_path = ctx.resolve(&input.geometry);
    let (prev_reader, ind_reader, geo_reader) = (open(&prev_path)?, open(&ind_path)?, open(&geo_path)?);
    let prev_schema = cfg.prevalence_schema(&input.id_column);
    let ind_schema = cfg.indicator_schema(&input.id_column);
    let (prevalence, indicators) = if input.strict_ranges {
        (parse_prevalence_csv_strict(prev_reader, &prev_schema)?, parse_indicator_csv_strict(ind_reader, &ind_schema)?)
    } else {
        (parse_prevalence_csv(prev_reader, &prev_schema)?, parse_indicator_csv(ind_reader, &ind_schema)?)
    };
    let geometry = parse_geometry(geo_reader, &input.id_property)?;
    Ok(join_region(&prevalence, &indicators, &geometry, MissingPolicy::from(input.missing_policy))?)
}

pub fn validation_summary(v: &ValidationReport) -> String {
    let mut s = format!(
        "sources: prevalence {}, indicators {}, geometry {}\njoined: {}\ndropped: {}\n",
        v.counts.prevalence,
        v.counts.indicators,
        v.counts.geometry,
        v.counts.joined,
        v.dropped.len()
    );
    for d in &v.dropped {
        s.push_str(&format!("  {}: {}\n", d.id, d.reason));
    }
    for w in &v.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

pub fn cmd_validate(ctx: &Context) -> Result<ValidationReport, CliError> {
    let region = load_region(ctx)?;
    print!("{}", validation_summary(&region.validation));
    Ok(region.validation)
}

fn build_weights(
    region: &StudyRegion,
    kind: WeightsKind,
    k: usize,
    distance: Option<f64>,
    snap: Option<f64>,
    include_self: bool,
) -> Result<(WeightsMatrix, Option<f64>), CliError> {
    let centroids = region.centroids();
    let (w, d) = match kind {
        WeightsKind::Queen => (queen_contiguity(&region.geometry, snap)?, None),
        WeightsKind::Rook => (rook_contiguity(&region.geometry, snap)?, None),
        WeightsKind::Knn => (knn_weights(&centroids, k)?, None),
        WeightsKind::Distance => {
            let d = match distance {
                Some(d) => d,
                None => max_nearest_neighbor_distance(&centroids)?,
            };
            return Ok((distance_band_weights(&centroids, d, include_self)?, Some(d)));
        }
    };
    let w = if include_self { w.with_self_loops()? } else { w };
    Ok((w, d))
}

fn kind_name(kind: WeightsKind) -> &'static str {
    match kind {
        WeightsKind::Queen => "queen",
        WeightsKind::Rook => "rook",
        WeightsKind::Knn => "knn",
        WeightsKind::Distance => "distance",
    }
}

/// Everything `analyze` writes, held in memory until all of it is ready.
pub struct Artifacts {
    pub report: Report,
    pub files: Vec<(&'static str, Vec<u8>)>,
}

pub fn analyze(ctx: &Context) -> Result<Artifacts, CliError> {
    let cfg = &ctx.config;
    let config_hash = cfg.hash();
    ctx.note("loading region");
    let region = load_region(ctx)?;
    let mut warnings = region.validation.warnings.clone();
    let affinity = affinity_scores(&region);
    let scores = affinity.scores_f64();

    ctx.note("descriptive statistics and correlations");
    let table1 = descriptive_stats(&region)?;
    let mut bivariate: Vec<&str> = region.condition_names.iter().map(String::as_str).collect();
    bivariate.push(AFFINITY);
    let table2 = correlation_matrix(&region, &bivariate)?;
    let mut with_indicators = vec![AFFINITY];
    with_indicators.extend(region.indicator_names.iter().map(String::as_str));
    let ind_corr = correlation_matrix(&region, &with_indicators)?;
    let affinity_correlations = (1..ind_corr.names.len())
        .map(|j| CorrelationEntry {
            variable: ind_corr.names[j].clone(),
            r: ind_corr.r[0][j],
            p: ind_corr.p[0][j],
            n: ind_corr.n,
        })
        .collect();

    ctx.note("spatial weights");
    let wc = &cfg.weights;
    let (moran_w, moran_d) = build_weights(&region, wc.moran, wc.k, wc.moran_distance, wc.snap_tolerance, false)?;
    let moran_w = if wc.moran_row_standardize { row_standardize(&moran_w) } else { moran_w };
    let (gi_w, gi_d) = build_weights(&region, wc.gi, wc.k, wc.gi_distance, wc.snap_tolerance, true)?;
    if !moran_w.islands.is_empty() {
        warnings.push(format!("Moran weights: {} island tract(s)", moran_w.islands.len()));
    }

    ctx.note("Moran's I");
    let moran = if cfg.inference.n_perm > 0 {
        morans_i_permutation(&scores, &moran_w, cfg.inference.n_perm, ctx.seed)?
    } else {
        morans_i(&scores, &moran_w)?
    };

    ctx.note("Gi* hot spots");
    let alphas = AlphaLevels::new(cfg.inference.alphas)?;
    let hs = hot_spots(&scores, &gi_w, alphas)?;
    warnings.extend(hs.warnings.iter().cloned());
    let count_map = |cats| -> Map<String, Value> {
        category_counts(cats).into_iter().map(|(c, n)| (c.as_str().to_string(), json!(n))).collect()
    };

    ctx.note("regression");
    let irls_config = IrlsConfig {
        huber_c: cfg.regression.huber_c,
        bisquare_c: cfg.regression.bisquare_c,
        tol: cfg.regression.tol,
        max_iter: cfg.regression.max_iter,
    };
    let specs: Vec<DesignSpec> = cfg
        .regression
        .models
        .iter()
        .map(|m| if m == "model1" { DesignSpec::model1() } else { DesignSpec::model2() })
        .collect();
    for s in &specs {
        for v in std::iter::once(&s.response).chain(&s.predictors).chain(&s.controls) {
            if v != AFFINITY && region.column(v).is_none() {
                return Err(geoaffinity::Error::UnknownVariable(v.clone()).into());
            }
        }
    }
    let models: Vec<ModelEntry> = rayon_map(&specs, |s| ModelEntry::new(s, fit_model(&region, s, &irls_config), cfg.regression.method));
    for m in &models {
        if let Some(e) = &m.error {
            warnings.push(format!("{}: {e}", m.name));
        }
        warnings.extend(m.warnings.iter().map(|w| format!("{}: {w}", m.name)));
    }

    let moran_summary = WeightsSummary::new(kind_name(wc.moran), &moran_w, moran_d);
    let gi_summary = WeightsSummary::new(kind_name(wc.gi), &gi_w, gi_d);
    let report = Report {
        metadata: Metadata {
            tool: "geoaffinity".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.clone(),
            seed: ctx.seed,
            rng: RNG_ALGORITHM.into(),
            source: if cfg.synth.is_some() { "synth" } else { "input" }.into(),
            n_tracts: region.n(),
        },
        validation: region.validation.clone(),
        table1,
        table2,
        affinity_correlations,
        affinity: AffinitySummary {
            conditions: affinity.condition_names.clone(),
            thresholds: affinity.thresholds.clone(),
            score_counts: affinity.score_counts(),
            share_max: affinity.share_max,
        },
        moran: MoranSection { variable: AFFINITY.into(), weights: moran_summary, result: moran },
        hotspots: HotspotSection {
            variable: AFFINITY.into(),
            weights: gi_summary,
            alphas: cfg.inference.alphas,
            correction: "benjamini-hochberg".into(),
            counts: count_map(&hs.category),
            counts_raw: count_map(&hs.raw_category),
        },
        table3: Table3 { primary: cfg.regression.method, models },
        warnings,
    };

    let props: Vec<Map<String, Value>> = (0..region.n())
        .map(|t| {
            let mut m = Map::new();
            m.insert("affinity".into(), json!(affinity.scores[t]));
            m.insert("gi_z".into(), json!(hs.gi_z[t]));
            m.insert("gi_p".into(), json!(hs.p[t]));
            m.insert("hotspot_cat".into(), json!(hs.category[t].as_str()));
            m.insert("hotspot_cat_raw".into(), json!(hs.raw_category[t].as_str()));
            m
        })
        .collect();
    let id_property = cfg.input.as_ref().map_or(SYNTH_ID, |i| i.id_property.as_str());
    let geojson = feature_collection(&region.tract_ids, &region.geometry, id_property, Some(&props));

    let map_spec = MapSpec { title: "Affinity score", config_hash: &config_hash };
    let affinity_svg = render_choropleth(
        &region.tract_ids,
        &region.geometry,
        Classes::Quantile { values: &scores, bins: cfg.output.bins },
        &map_spec,
    )?;
    let hot_spec = MapSpec { title: "Affinity hot spots (Gi*, FDR)", config_hash: &config_hash };
    let hotspot_svg = render_choropleth(&region.tract_ids, &region.geometry, Classes::Categories(&hs.category), &hot_spec)?;

    let mut files = vec![
        (REPORT_FILE, to_json_bytes(&report)?),
        (RESULTS_FILE, to_json_bytes(&geojson)?),
        (AFFINITY_SVG, affinity_svg.into_bytes()),
        (HOTSPOT_SVG, hotspot_svg.into_bytes()),
    ];
    if cfg.output.weights_json {
        let doc = json!({
            "moran": moran_w.to_json(&region.tract_ids)?,
            "gi": gi_w.to_json(&region.tract_ids)?,
        });
        files.push((WEIGHTS_FILE, to_json_bytes(&doc)?));
    }
    Ok(Artifacts { report, files })
}

fn rayon_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

fn to_json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| CliError::data(format!("serializing output: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Exclusive hold on an output directory for the lifetime of the value.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::io(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::io(format!("cannot lock {}: {e}", dir.display()))),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes every file or none: on failure the ones already written are removed.
pub fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>, CliError> {
    let _lock = DirLock::acquire(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(CliError::io(format!("cannot write {}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_analyze(ctx: &Context) -> Result<Report, CliError> {
    let dir = ctx.out_dir();
    let artifacts = analyze(ctx)?;
    let written = write_all(&dir, &artifacts.files)?;
    for p in &written {
        ctx.note(&format!("wrote {}", p.display()));
    }
    Ok(artifacts.report)
}

/// Synthetic dataset as the three input files `analyze` consumes.
pub fn synth_files(ctx: &Context) -> Result<Vec<(&'static str, Vec<u8>)>, CliError> {
    let synth = ctx
        .config
        .synth
        .as_ref()
        .ok_or_else(|| CliError::data("synth: the config has no [synth] section"))?;
    let data = build_scenario(&synth.scenario(ctx.seed)?)?;
    for w in &data.tables.prevalence.warnings {
        ctx.note(&format!("warning: {w}"));
    }
    let mut prev = Vec::new();
    write_table_csv(&data.tables.prevalence, SYNTH_ID, &mut prev)?;
    let mut ind = Vec::new();
    write_table_csv(&data.tables.indicators, SYNTH_ID, &mut ind)?;
    let mut geo = Vec::new();
    write_geometry_geojson(&data.geometry_set(), SYNTH_ID, &mut geo)?;
    geo.push(b'\n');
    Ok(vec![(SYNTH_PREVALENCE, prev), (SYNTH_INDICATORS, ind), (SYNTH_GEOMETRY, geo)])
}

pub fn cmd_synth(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let files = synth_files(ctx)?;
    let written = write_all(&ctx.out_dir(), &files)?;
    for p in &written {
        ctx.note(&format!("wrote {}", p.display()));
    }
    Ok(written)
}
