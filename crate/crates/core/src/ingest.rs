//! Tract-level table parsing and the inner join that produces a [`StudyRegion`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{MultiPolygon, Point, Polygon, Ring};

/// Opaque GEOID-style tract key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TractId(String);

impl TractId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        let trimmed = value.trim();
        if trimmed.is_empty() {
            return Err(Error::InvalidArgument("tract id must be non-empty".into()));
        }
        Ok(TractId(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Range rule attached to a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    /// Percentage in [0, 100]; violations warn.
    Percent,
    /// Non-negative index (crime index; 100 = national average).
    Index,
    /// Non-negative integer count (population).
    Count,
}

impl ValueKind {
    /// Guess from a variable name: population-like names are counts,
    /// crime-like names are indices, everything else is a percentage.
    pub fn infer(name: &str) -> Self {
        let lower = name.to_ascii_lowercase();
        if lower.contains("population") || lower == "pop" || lower.ends_with("_pop") {
            ValueKind::Count
        } else if lower.contains("crime") || lower.contains("index") {
            ValueKind::Index
        } else {
            ValueKind::Percent
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    /// Header in the CSV file.
    pub source: String,
    /// Variable name used downstream.
    pub name: String,
    pub kind: ValueKind,
}

/// Maps CSV headers onto variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub id_column: String,
    pub columns: Vec<ColumnSpec>,
}

impl TableSchema {
    /// Schema whose headers equal the variable names.
    pub fn identity(id_column: &str, names: &[&str], kind: Option<ValueKind>) -> Self {
        TableSchema {
            id_column: id_column.to_string(),
            columns: names
                .iter()
                .map(|n| ColumnSpec {
                    source: n.to_string(),
                    name: n.to_string(),
                    kind: kind.unwrap_or_else(|| ValueKind::infer(n)),
                })
                .collect(),
        }
    }
}

/// One row per tract, one optional value per column; `None` is the missing marker.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttributeTable {
    pub names: Vec<String>,
    pub kinds: Vec<ValueKind>,
    pub rows: BTreeMap<TractId, Vec<Option<f64>>>,
    pub warnings: Vec<String>,
    /// Cells kept despite violating their range rule.
    pub flagged: Vec<(TractId, String)>,
}

pub type PrevalenceTable = AttributeTable;
pub type IndicatorTable = AttributeTable;

impl AttributeTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn is_missing_token(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "" | "na" | "n/a" | "nan" | "null" | "none" | "-" | "."
    )
}

fn parse_table<R: Read>(source: R, schema: &TableSchema, strict_ranges: bool) -> Result<AttributeTable> {
    if schema.columns.is_empty() {
        return Err(Error::InvalidArgument("schema maps no value columns".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |h: &str| headers.iter().position(|x| x == h);
    let id_pos = find(&schema.id_column).ok_or_else(|| Error::MissingColumn(schema.id_column.clone()))?;
    let col_pos = schema
        .columns
        .iter()
        .map(|c| find(&c.source).ok_or_else(|| Error::MissingColumn(c.source.clone())))
        .collect::<Result<Vec<_>>>()?;

    let mut table = AttributeTable {
        names: schema.columns.iter().map(|c| c.name.clone()).collect(),
        kinds: schema.columns.iter().map(|c| c.kind).collect(),
        ..Default::default()
    };
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let raw_id = record.get(id_pos).unwrap_or("");
        let id = TractId::new(raw_id).map_err(|_| Error::InvalidValue {
            tract: format!("<row {}>", line + 2),
            column: schema.id_column.clone(),
            reason: "empty tract id".into(),
        })?;
        if table.rows.contains_key(&id) {
            return Err(Error::DuplicateTract(id.to_string()));
        }
        let mut values = Vec::with_capacity(col_pos.len());
        for (spec, &pos) in schema.columns.iter().zip(&col_pos) {
            let cell = record.get(pos).unwrap_or("");
            let parsed = cell.parse::<f64>().ok().filter(|v| v.is_finite());
            let value = match parsed {
                Some(v) => v,
                None => {
                    table.warnings.push(if is_missing_token(cell) {
                        format!("tract {id}: `{}` is missing ({cell:?})", spec.name)
                    } else {
                        format!("tract {id}: `{}` value {cell:?} is not numeric; treated as missing", spec.name)
                    });
                    values.push(None);
                    continue;
                }
            };
            check_range(&mut table, &id, spec, value, strict_ranges)?;
            values.push(Some(value));
        }
        table.rows.insert(id, values);
    }
    Ok(table)
}

fn check_range(table: &mut AttributeTable, id: &TractId, spec: &ColumnSpec, v: f64, strict: bool) -> Result<()> {
    let invalid = |reason: &str| Error::InvalidValue {
        tract: id.to_string(),
        column: spec.name.clone(),
        reason: reason.to_string(),
    };
    match spec.kind {
        ValueKind::Percent => {
            if !(0.0..=100.0).contains(&v) {
                if strict {
                    return Err(invalid("percentage outside [0, 100]"));
                }
                table
                    .warnings
                    .push(format!("tract {id}: `{}` = {v} outside [0, 100]; kept and flagged", spec.name));
                table.flagged.push((id.clone(), spec.name.clone()));
            }
        }
        ValueKind::Index => {
            if v < 0.0 {
                return Err(invalid("index must be non-negative"));
            }
        }
        ValueKind::Count => {
            if v < 0.0 {
                return Err(invalid("count must be non-negative"));
            }
            if v.fract() != 0.0 {
                table
                    .warnings
                    .push(format!("tract {id}: `{}` = {v} is not an integer count", spec.name));
                table.flagged.push((id.clone(), spec.name.clone()));
            }
        }
    }
    Ok(())
}

fn percent_schema(schema: &TableSchema) -> TableSchema {
    let mut schema = schema.clone();
    for c in &mut schema.columns {
        c.kind = ValueKind::Percent;
    }
    schema
}

/// Parses a prevalence CSV (percent of adults per condition).
pub fn parse_prevalence_csv<R: Read>(source: R, schema: &TableSchema) -> Result<PrevalenceTable> {
    parse_table(source, &percent_schema(schema), false)
}

/// Like [`parse_prevalence_csv`] but values outside [0, 100] are hard errors.
pub fn parse_prevalence_csv_strict<R: Read>(source: R, schema: &TableSchema) -> Result<PrevalenceTable> {
    parse_table(source, &percent_schema(schema), true)
}

/// Parses an indicator CSV with per-column range rules from the schema.
pub fn parse_indicator_csv<R: Read>(source: R, schema: &TableSchema) -> Result<IndicatorTable> {
    parse_table(source, schema, false)
}

/// Like [`parse_indicator_csv`] but out-of-range percentages are hard errors.
pub fn parse_indicator_csv_strict<R: Read>(source: R, schema: &TableSchema) -> Result<IndicatorTable> {
    parse_table(source, schema, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureError {
    /// Tract id when known, else `#<feature index>`.
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeometrySet {
    pub rows: BTreeMap<TractId, MultiPolygon>,
    pub crs_note: String,
    pub warnings: Vec<String>,
    pub feature_errors: Vec<FeatureError>,
}

impl GeometrySet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn parse_position(v: &Value) -> std::result::Result<Point, String> {
    let arr = v.as_array().ok_or("position is not an array")?;
    if arr.len() < 2 {
        return Err("position needs two coordinates".into());
    }
    let x = arr[0].as_f64().ok_or("non-numeric coordinate")?;
    let y = arr[1].as_f64().ok_or("non-numeric coordinate")?;
    if !x.is_finite() || !y.is_finite() {
        return Err("non-finite coordinate".into());
    }
    Ok([x, y])
}

fn parse_polygon(v: &Value, warnings: &mut Vec<String>, label: &str) -> std::result::Result<Polygon, String> {
    let rings = v.as_array().ok_or("polygon coordinates are not an array")?;
    if rings.is_empty() {
        return Err("polygon has no rings".into());
    }
    let mut parsed = Vec::with_capacity(rings.len());
    for (k, ring) in rings.iter().enumerate() {
        let mut pts = ring
            .as_array()
            .ok_or("ring is not an array")?
            .iter()
            .map(parse_position)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        pts.dedup();
        let (ring, closed_now) = Ring::closed(pts);
        if closed_now {
            warnings.push(format!("feature {label}: ring {k} was not closed; closed automatically"));
        }
        if ring.points.len() < 4 {
            return Err(format!("ring {k} has fewer than 4 vertices"));
        }
        if !ring.is_simple() {
            return Err(format!("ring {k} is self-intersecting"));
        }
        parsed.push(ring);
    }
    let exterior = parsed.remove(0);
    let mut poly = Polygon { exterior, holes: parsed };
    poly.normalize_orientation();
    Ok(poly)
}

fn feature_id(props: Option<&Value>, id_property: &str) -> Option<String> {
    match props?.get(id_property)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parses a GeoJSON FeatureCollection of tract polygons.
///
/// Features with non-polygonal or invalid geometry are listed in
/// `feature_errors` and left out; a feature without the id property is a
/// hard error.
pub fn parse_geometry<R: Read>(source: R, id_property: &str) -> Result<GeometrySet> {
    let doc: Value = serde_json::from_reader(source)?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Geometry("top-level object is not a FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Geometry("FeatureCollection has no `features` array".into()))?;
    let mut set = GeometrySet {
        crs_note: match doc.get("crs") {
            Some(crs) => crs.to_string(),
            None => "unspecified; planar coordinates assumed".into(),
        },
        ..Default::default()
    };
    for (idx, feature) in features.iter().enumerate() {
        let raw = feature_id(feature.get("properties"), id_property).ok_or_else(|| {
            Error::Geometry(format!("feature #{idx} has no `{id_property}` property"))
        })?;
        let id = TractId::new(raw)
            .map_err(|_| Error::Geometry(format!("feature #{idx} has an empty `{id_property}`")))?;
        if set.rows.contains_key(&id) {
            return Err(Error::DuplicateTract(id.to_string()));
        }
        let label = id.to_string();
        let geom = feature.get("geometry").filter(|g| !g.is_null());
        let result = match geom {
            None => Err("feature has no geometry".to_string()),
            Some(g) => {
                let coords = g.get("coordinates").unwrap_or(&Value::Null);
                match g.get("type").and_then(Value::as_str) {
                    Some("Polygon") => parse_polygon(coords, &mut set.warnings, &label)
                        .map(|p| MultiPolygon { polygons: vec![p] }),
                    Some("MultiPolygon") => coords
                        .as_array()
                        .ok_or_else(|| "multipolygon coordinates are not an array".to_string())
                        .and_then(|polys| {
                            polys
                                .iter()
                                .map(|p| parse_polygon(p, &mut set.warnings, &label))
                                .collect::<std::result::Result<Vec<_>, _>>()
                        })
                        .and_then(|polygons| {
                            if polygons.is_empty() {
                                Err("multipolygon is empty".to_string())
                            } else {
                                Ok(MultiPolygon { polygons })
                            }
                        }),
                    Some(other) => Err(format!("unsupported geometry type {other}")),
                    None => Err("geometry has no type".to_string()),
                }
            }
        };
        match result {
            Ok(mp) => {
                set.rows.insert(id, mp);
            }
            Err(reason) => set.feature_errors.push(FeatureError { feature: label, reason }),
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop tracts absent from any source or with missing values.
    #[default]
    DropIncomplete,
    /// Any mismatch or missing value is an error.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedTract {
    pub id: TractId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceCounts {
    pub prevalence: usize,
    pub indicators: usize,
    pub geometry: usize,
    pub joined: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dropped: Vec<DroppedTract>,
    pub warnings: Vec<String>,
    pub counts: SourceCounts,
}

/// Joined per-tract dataset. Every per-tract vector is aligned with
/// `tract_ids`, which is sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRegion {
    pub tract_ids: Vec<TractId>,
    pub condition_names: Vec<String>,
    /// `prevalence[t][k]`: condition `k` in tract `t`.
    pub prevalence: Vec<Vec<f64>>,
    pub indicator_names: Vec<String>,
    pub indicator_kinds: Vec<ValueKind>,
    pub indicators: Vec<Vec<f64>>,
    pub geometry: Vec<MultiPolygon>,
    pub crs_note: String,
    pub validation: ValidationReport,
}

impl StudyRegion {
    pub fn n(&self) -> usize {
        self.tract_ids.len()
    }

    pub fn condition_count(&self) -> usize {
        self.condition_names.len()
    }

    /// Column by variable name, searching conditions then indicators.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(k) = self.condition_names.iter().position(|n| n == name) {
            return Some(self.prevalence.iter().map(|row| row[k]).collect());
        }
        let k = self.indicator_names.iter().position(|n| n == name)?;
        Some(self.indicators.iter().map(|row| row[k]).collect())
    }

    pub fn require_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn centroids(&self) -> Vec<Point> {
        self.geometry.iter().map(MultiPolygon::centroid).collect()
    }

    pub fn index_of(&self, id: &TractId) -> Option<usize> {
        self.tract_ids.binary_search(id).ok()
    }

    pub fn prevalence_table(&self) -> PrevalenceTable {
        AttributeTable {
            names: self.condition_names.clone(),
            kinds: vec![ValueKind::Percent; self.condition_names.len()],
            rows: self
                .tract_ids
                .iter()
                .cloned()
                .zip(self.prevalence.iter().map(|r| r.iter().copied().map(Some).collect()))
                .collect(),
            ..Default::default()
        }
    }

    pub fn indicator_table(&self) -> IndicatorTable {
        AttributeTable {
            names: self.indicator_names.clone(),
            kinds: self.indicator_kinds.clone(),
            rows: self
                .tract_ids
                .iter()
                .cloned()
                .zip(self.indicators.iter().map(|r| r.iter().copied().map(Some).collect()))
                .collect(),
            ..Default::default()
        }
    }

    pub fn geometry_set(&self) -> GeometrySet {
        GeometrySet {
            rows: self.tract_ids.iter().cloned().zip(self.geometry.iter().cloned()).collect(),
            crs_note: self.crs_note.clone(),
            ..Default::default()
        }
    }
}

fn missing_names(table: &AttributeTable, values: &[Option<f64>]) -> Vec<String> {
    table
        .names
        .iter()
        .zip(values)
        .filter(|(_, v)| v.is_none())
        .map(|(n, _)| n.clone())
        .collect()
}

/// Inner join of the three sources on tract id.
pub fn join_region(
    prevalence: &PrevalenceTable,
    indicators: &IndicatorTable,
    geometry: &GeometrySet,
    policy: MissingPolicy,
) -> Result<StudyRegion> {
    let all: BTreeSet<&TractId> = prevalence
        .rows
        .keys()
        .chain(indicators.rows.keys())
        .chain(geometry.rows.keys())
        .collect();

    let mut report = ValidationReport {
        counts: SourceCounts {
            prevalence: prevalence.len(),
            indicators: indicators.len(),
            geometry: geometry.len(),
            joined: 0,
        },
        ..Default::default()
    };
    report.warnings.extend(prevalence.warnings.iter().cloned());
    report.warnings.extend(indicators.warnings.iter().cloned());
    report.warnings.extend(geometry.warnings.iter().cloned());
    for fe in &geometry.feature_errors {
        report
            .warnings
            .push(format!("geometry feature {} excluded: {}", fe.feature, fe.reason));
    }

    let mut region = StudyRegion {
        tract_ids: Vec::new(),
        condition_names: prevalence.names.clone(),
        prevalence: Vec::new(),
        indicator_names: indicators.names.clone(),
        indicator_kinds: indicators.kinds.clone(),
        indicators: Vec::new(),
        geometry: Vec::new(),
        crs_note: geometry.crs_note.clone(),
        validation: ValidationReport::default(),
    };

    for id in all {
        let p = prevalence.rows.get(id);
        let i = indicators.rows.get(id);
        let g = geometry.rows.get(id);
        let mut reasons = Vec::new();
        if p.is_none() {
            reasons.push("no prevalence".to_string());
        }
        if i.is_none() {
            reasons.push("no indicators".to_string());
        }
        if g.is_none() {
            reasons.push("no geometry".to_string());
        }
        if let Some(values) = p {
            let missing = missing_names(prevalence, values);
            if !missing.is_empty() {
                reasons.push(format!("missing prevalence values: {}", missing.join(", ")));
            }
        }
        if let Some(values) = i {
            let missing = missing_names(indicators, values);
            if !missing.is_empty() {
                reasons.push(format!("missing indicator values: {}", missing.join(", ")));
            }
        }
        if !reasons.is_empty() {
            let reason = reasons.join("; ");
            if policy == MissingPolicy::Strict {
                return Err(Error::Join(format!("tract {id}: {reason}")));
            }
            report.dropped.push(DroppedTract { id: id.clone(), reason });
            continue;
        }
        let flatten = |v: &Vec<Option<f64>>| v.iter().map(|x| x.expect("checked above")).collect::<Vec<_>>();
        region.tract_ids.push(id.clone());
        region.prevalence.push(flatten(p.unwrap()));
        region.indicators.push(flatten(i.unwrap()));
        region.geometry.push(g.unwrap().clone());
    }

    for d in &report.dropped {
        report.warnings.push(format!("dropped tract {}: {}", d.id, d.reason));
    }
    report.counts.joined = region.n();
    if region.n() < 2 {
        return Err(Error::Join(format!(
            "joined region has {} tract(s); at least 2 are required",
            region.n()
        )));
    }
    region.validation = report;
    Ok(region)
}

fn format_number(v: f64) -> String {
    format!("{v}")
}

/// Writes a table as CSV using the variable names as headers.
pub fn write_table_csv<W: Write>(table: &AttributeTable, id_column: &str, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec![id_column.to_string()];
    header.extend(table.names.iter().cloned());
    w.write_record(&header)?;
    for (id, values) in &table.rows {
        let mut rec = vec![id.to_string()];
        rec.extend(values.iter().map(|v| v.map(format_number).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn ring_coords(ring: &Ring) -> Value {
    Value::Array(ring.points.iter().map(|p| json!([p[0], p[1]])).collect())
}

pub fn multipolygon_to_geojson(mp: &MultiPolygon) -> Value {
    let polys: Vec<Value> = mp
        .polygons
        .iter()
        .map(|p| Value::Array(p.rings().map(ring_coords).collect()))
        .collect();
    if polys.len() == 1 {
        json!({"type": "Polygon", "coordinates": polys[0]})
    } else {
        json!({"type": "MultiPolygon", "coordinates": polys})
    }
}

/// Builds a FeatureCollection; `properties[i]` is merged into feature `i`
/// after the id property.
pub fn feature_collection(
    ids: &[TractId],
    geometry: &[MultiPolygon],
    id_property: &str,
    properties: Option<&[Map<String, Value>]>,
) -> Value {
    let features: Vec<Value> = ids
        .iter()
        .zip(geometry)
        .enumerate()
        .map(|(i, (id, g))| {
            let mut props = Map::new();
            props.insert(id_property.to_string(), Value::String(id.to_string()));
            if let Some(extra) = properties {
                for (k, v) in &extra[i] {
                    props.insert(k.clone(), v.clone());
                }
            }
            json!({"type": "Feature", "properties": props, "geometry": multipolygon_to_geojson(g)})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn write_geometry_geojson<W: Write>(set: &GeometrySet, id_property: &str, sink: W) -> Result<()> {
    let ids: Vec<TractId> = set.rows.keys().cloned().collect();
    let geoms: Vec<MultiPolygon> = set.rows.values().cloned().collect();
    let doc = feature_collection(&ids, &geoms, id_property, None);
    serde_json::to_writer(sink, &doc)?;
    Ok(())
}
