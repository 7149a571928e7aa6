//! Patient table ingestion, categorical encoding and min-max normalization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Binary,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Declared value range. Informational: values outside it are logged, not rejected.
    pub range: Option<(f64, f64)>,
    /// Accepted spellings (lowercase) for the 0 and 1 levels of a binary feature.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub false_tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub true_tokens: Vec<String>,
}

impl FeatureSpec {
    pub fn numeric(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Numeric,
            range: Some((lo, hi)),
            false_tokens: Vec::new(),
            true_tokens: Vec::new(),
        }
    }

    pub fn unbounded(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Numeric,
            range: None,
            false_tokens: Vec::new(),
            true_tokens: Vec::new(),
        }
    }

    /// Yes/No flag. `Y`/`N`, `1`/`0` and `true`/`false` are also accepted.
    pub fn yes_no(name: &str) -> Self {
        Self::binary(name, &["no", "n", "0", "false"], &["yes", "y", "1", "true"])
    }

    pub fn binary(name: &str, false_tokens: &[&str], true_tokens: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Binary,
            range: Some((0.0, 1.0)),
            false_tokens: false_tokens.iter().map(|t| t.to_lowercase()).collect(),
            true_tokens: true_tokens.iter().map(|t| t.to_lowercase()).collect(),
        }
    }

    pub fn ordinal(name: &str, lo: i64, hi: i64) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Ordinal,
            range: Some((lo as f64, hi as f64)),
            false_tokens: Vec::new(),
            true_tokens: Vec::new(),
        }
    }

    fn parse(&self, text: &str) -> Option<RawValue> {
        let text = text.trim();
        match self.kind {
            FeatureKind::Numeric => text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(RawValue::Numeric),
            FeatureKind::Binary => {
                let lower = text.to_lowercase();
                if self.true_tokens.contains(&lower) {
                    Some(RawValue::Flag(true))
                } else if self.false_tokens.contains(&lower) {
                    Some(RawValue::Flag(false))
                } else {
                    None
                }
            }
            FeatureKind::Ordinal => text.parse::<i64>().ok().map(RawValue::Level),
        }
    }
}

/// Ordered feature list plus a dataset-name alias map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    /// Dataset header spelling -> schema feature name.
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Self {
        Self {
            features,
            aliases: BTreeMap::new(),
        }
    }

    /// All-numeric schema without declared ranges, mostly for synthetic data.
    pub fn numeric(names: &[&str]) -> Self {
        Self::new(names.iter().map(|n| FeatureSpec::unbounded(n)).collect())
    }

    /// The 29-feature cardiology intake schema, with aliases for the
    /// spellings used by the public 303-patient coronary artery disease CSV export.
    pub fn intake() -> Self {
        use FeatureSpec as F;
        let features = vec![
            F::numeric("Age", 30.0, 86.0),
            F::numeric("Weight", 48.0, 120.0),
            F::numeric("Length", 140.0, 188.0),
            F::binary(
                "Sex",
                &["female", "fmale", "f", "0"],
                &["male", "m", "1"],
            ),
            F::yes_no("DM"),
            F::yes_no("HTN"),
            F::yes_no("Current smoker"),
            F::yes_no("Ex-smoker"),
            F::yes_no("FH"),
            F::yes_no("CRF"),
            F::yes_no("CVA"),
            F::yes_no("Airway disease"),
            F::yes_no("Thyroid Disease"),
            F::yes_no("CHF"),
            F::yes_no("DLP"),
            F::numeric("BP", 90.0, 190.0),
            F::numeric("PR", 50.0, 110.0),
            F::yes_no("Edema"),
            F::yes_no("Weak peripheral pulse"),
            F::yes_no("Lung rales"),
            F::yes_no("Systolic murmur"),
            F::yes_no("Diastolic murmur"),
            F::yes_no("Typical Chest Pain"),
            F::yes_no("Dyspnea"),
            F::ordinal("Function class", 1, 4),
            F::yes_no("Atypical"),
            F::yes_no("Nonanginal CP"),
            F::yes_no("Exertional CP"),
            F::yes_no("Low Th Ang"),
        ];
        let aliases = [
            ("EX-Smoker", "Ex-smoker"),
            ("Current Smoker", "Current smoker"),
            ("Weak Peripheral Pulse", "Weak peripheral pulse"),
            ("Systolic Murmur", "Systolic murmur"),
            ("Diastolic Murmur", "Diastolic murmur"),
            ("Function Class", "Function class"),
            ("Nonanginal", "Nonanginal CP"),
            ("LowTH Ang", "Low Th Ang"),
            ("Airway Disease", "Airway disease"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        Self { features, aliases }
    }

    pub fn with_aliases(mut self, aliases: BTreeMap<String, String>) -> Self {
        self.aliases.extend(aliases);
        self
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    /// Schema index for a dataset header, resolving aliases; case and
    /// whitespace insensitive.
    pub fn resolve(&self, header: &str) -> Option<usize> {
        let key = canonical(header);
        let target = self
            .aliases
            .iter()
            .find(|(alias, _)| canonical(alias) == key)
            .map(|(_, name)| canonical(name))
            .unwrap_or(key);
        self.features
            .iter()
            .position(|f| canonical(&f.name) == target)
    }
}

fn canonical(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Numeric(f64),
    Flag(bool),
    Level(i64),
}

impl RawValue {
    pub fn encode(self) -> f64 {
        match self {
            RawValue::Numeric(v) => v,
            RawValue::Flag(b) => f64::from(u8::from(b)),
            RawValue::Level(l) => l as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    /// One value per schema feature, in schema order.
    pub values: Vec<RawValue>,
}

/// Reads a patient CSV. Columns are matched to the schema by name in any
/// order; extra columns are ignored. An `id` column, if present, supplies
/// record identifiers, otherwise the 1-based row number is used.
pub fn load_dataset(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Vec<PatientRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let records = read_dataset(file, schema)?;
    log::info!("loaded {} records from {}", records.len(), path.display());
    Ok(records)
}

pub fn read_dataset<R: io::Read>(reader: R, schema: &FeatureSchema) -> Result<Vec<PatientRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = csv.headers()?.clone();

    let mut column_of = vec![None; schema.len()];
    let mut id_column = None;
    for (col, header) in headers.iter().enumerate() {
        if header.eq_ignore_ascii_case("id") {
            id_column = Some(col);
        } else if let Some(idx) = schema.resolve(header) {
            column_of[idx].get_or_insert(col);
        }
    }
    let column_of = column_of
        .into_iter()
        .zip(&schema.features)
        .map(|(col, spec)| {
            col.ok_or_else(|| Error::MissingColumn {
                column: spec.name.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let mut values = Vec::with_capacity(schema.len());
        for (spec, &col) in schema.features.iter().zip(&column_of) {
            let text = row.get(col).unwrap_or("");
            let value = spec.parse(text).ok_or_else(|| Error::Row {
                row: row_no,
                column: spec.name.clone(),
                value: text.to_string(),
            })?;
            if let Some((lo, hi)) = spec.range {
                let v = value.encode();
                if v < lo || v > hi {
                    log::warn!("row {row_no}: {} = {v} outside declared range [{lo}, {hi}]", spec.name);
                }
            }
            values.push(value);
        }
        let id = id_column
            .and_then(|c| row.get(c))
            .map(str::to_string)
            .unwrap_or_else(|| row_no.to_string());
        out.push(PatientRecord { id, values });
    }
    Ok(out)
}

/// Dense row-major matrix of normalized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    ids: Vec<String>,
    names: Vec<String>,
    /// Schema index of each column.
    active_features: Vec<usize>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::arg(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("matrix contains non-finite values"));
        }
        Ok(Self {
            rows,
            cols,
            data,
            ids: (1..=rows).map(|i| i.to_string()).collect(),
            names: (0..cols).map(|j| format!("f{j}")).collect(),
            active_features: (0..cols).collect(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::arg("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.cols);
        self.names = names;
        self
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Self {
        assert_eq!(ids.len(), self.rows);
        self.ids = ids;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn active_features(&self) -> &[usize] {
        &self.active_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Keeps the given column positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<FeatureMatrix> {
        if let Some(&bad) = positions.iter().find(|&&p| p >= self.cols) {
            return Err(Error::arg(format!("column {bad} out of range ({} columns)", self.cols)));
        }
        let cols = positions.len();
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(positions.iter().map(|&p| row[p]));
        }
        Ok(FeatureMatrix {
            rows: self.rows,
            cols,
            data,
            ids: self.ids.clone(),
            names: positions.iter().map(|&p| self.names[p].clone()).collect(),
            active_features: positions.iter().map(|&p| self.active_features[p]).collect(),
        })
    }

    /// Per-column min-max scaling; constant columns become zero.
    pub fn normalized(&self) -> FeatureMatrix {
        let mut out = self.clone();
        for j in 0..self.cols {
            let (lo, hi) = (0..self.rows).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let v = self.get(i, j);
                (lo.min(v), hi.max(v))
            });
            let span = hi - lo;
            for i in 0..self.rows {
                out.data[i * self.cols + j] = if span > 0.0 {
                    (self.get(i, j) - lo) / span
                } else {
                    0.0
                };
            }
        }
        out
    }

    /// Writes `id` followed by one column per feature.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.rows {
            let mut rec = vec![self.ids[i].clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Encodes binary features as {0,1} and ordinals as their integer level,
/// then min-max scales every column to [0, 1].
pub fn encode_normalize(records: &[PatientRecord], schema: &FeatureSchema) -> Result<FeatureMatrix> {
    if records.is_empty() {
        return Err(Error::arg("cannot normalize an empty record list"));
    }
    let cols = schema.len();
    let mut data = Vec::with_capacity(records.len() * cols);
    for r in records {
        if r.values.len() != cols {
            return Err(Error::arg(format!(
                "record {} has {} values, schema has {cols}",
                r.id,
                r.values.len()
            )));
        }
        data.extend(r.values.iter().map(|v| v.encode()));
    }
    let raw = FeatureMatrix::new(records.len(), cols, data)?
        .with_names(schema.names())
        .with_ids(records.iter().map(|r| r.id.clone()).collect());
    Ok(raw.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(schema: &FeatureSchema) -> String {
        schema.names().join(",")
    }

    fn default_row(schema: &FeatureSchema) -> Vec<String> {
        schema
            .features
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Numeric => f.range.map_or(0.0, |r| r.0).to_string(),
                FeatureKind::Binary => f.false_tokens[0].clone(),
                FeatureKind::Ordinal => "1".to_string(),
            })
            .collect()
    }

    #[test]
    fn intake_schema_has_29_features() {
        let s = FeatureSchema::intake();
        assert_eq!(s.len(), 29);
        let sex = &s.features[s.resolve("Sex").unwrap()];
        assert_eq!(sex.kind, FeatureKind::Binary);
        let fc = &s.features[s.resolve("Function class").unwrap()];
        assert_eq!(fc.kind, FeatureKind::Ordinal);
        assert_eq!(fc.range, Some((1.0, 4.0)));
        assert_eq!(s.features[s.resolve("Age").unwrap()].range, Some((30.0, 86.0)));
        assert_eq!(s.features[s.resolve("BP").unwrap()].range, Some((90.0, 190.0)));
        let binaries = s.features.iter().filter(|f| f.kind == FeatureKind::Binary).count();
        assert_eq!(binaries, 23);
    }

    #[test]
    fn aliases_resolve() {
        let s = FeatureSchema::intake();
        assert_eq!(s.resolve("EX-Smoker"), s.resolve("Ex-smoker"));
        assert_eq!(s.resolve("  function   CLASS "), s.resolve("Function class"));
        assert!(s.resolve("Q Wave").is_none());
    }

    #[test]
    fn header_only_gives_no_records() {
        let s = FeatureSchema::intake();
        let recs = read_dataset(header(&s).as_bytes(), &s).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn bad_binary_cell_names_column() {
        let s = FeatureSchema::intake();
        let mut row = default_row(&s);
        row[s.resolve("DM").unwrap()] = "maybe".into();
        let csv = format!("{}\n{}\n{}\n", header(&s), default_row(&s).join(","), row.join(","));
        match read_dataset(csv.as_bytes(), &s) {
            Err(Error::Row { row, column, value }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "DM");
                assert_eq!(value, "maybe");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let s = FeatureSchema::intake();
        let names: Vec<_> = s.names().into_iter().filter(|n| n != "PR").collect();
        let err = read_dataset(names.join(",").as_bytes(), &s).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column } if column == "PR"));
    }

    #[test]
    fn columns_matched_in_any_order_with_extras() {
        let s = FeatureSchema::numeric(&["a", "b"]);
        let csv = "extra,b,id,a\n9,2,p1,1\n9,4,p2,3\n";
        let recs = read_dataset(csv.as_bytes(), &s).unwrap();
        assert_eq!(recs[0].id, "p1");
        assert_eq!(recs[1].values, vec![RawValue::Numeric(3.0), RawValue::Numeric(4.0)]);
    }

    #[test]
    fn case_insensitive_binary_tokens() {
        let s = FeatureSchema::new(vec![FeatureSpec::yes_no("DM"), FeatureSchema::intake().features[3].clone()]);
        let recs = read_dataset("DM,Sex\nYES,Fmale\nno,MALE\n".as_bytes(), &s).unwrap();
        assert_eq!(recs[0].values, vec![RawValue::Flag(true), RawValue::Flag(false)]);
        assert_eq!(recs[1].values, vec![RawValue::Flag(false), RawValue::Flag(true)]);
    }

    #[test]
    fn single_record_normalizes_to_zero() {
        let s = FeatureSchema::numeric(&["a", "b"]);
        let recs = vec![PatientRecord {
            id: "x".into(),
            values: vec![RawValue::Numeric(5.0), RawValue::Numeric(-1.0)],
        }];
        let m = encode_normalize(&recs, &s).unwrap();
        assert_eq!(m.data(), &[0.0, 0.0]);
    }

    #[test]
    fn age_endpoints() {
        let s = FeatureSchema::new(vec![FeatureSpec::numeric("Age", 30.0, 86.0)]);
        let recs: Vec<_> = [30.0, 86.0]
            .iter()
            .map(|&a| PatientRecord {
                id: a.to_string(),
                values: vec![RawValue::Numeric(a)],
            })
            .collect();
        let m = encode_normalize(&recs, &s).unwrap();
        assert_eq!(m.column(0), vec![0.0, 1.0]);
    }

    #[test]
    fn hand_normalized_mixed_records() {
        let s = FeatureSchema::new(vec![
            FeatureSpec::numeric("Age", 30.0, 86.0),
            FeatureSpec::yes_no("DM"),
            FeatureSpec::ordinal("Function class", 1, 4),
            FeatureSpec::numeric("BP", 90.0, 190.0),
        ]);
        let csv = "Age,DM,Function class,BP\n40,Yes,1,120\n50,No,3,120\n60,No,2,120\n45,Yes,4,120\n";
        let recs = read_dataset(csv.as_bytes(), &s).unwrap();
        let m = encode_normalize(&recs, &s).unwrap();
        // Age: min 40, span 20. DM: yes=1. FC: min 1, span 3. BP constant -> 0.
        #[rustfmt::skip]
        let expected = [
            0.0,  1.0, 0.0,       0.0,
            0.5,  0.0, 2.0 / 3.0, 0.0,
            1.0,  0.0, 1.0 / 3.0, 0.0,
            0.25, 1.0, 1.0,       0.0,
        ];
        for (a, b) in m.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        assert_eq!(m.names(), &["Age", "DM", "Function class", "BP"]);
    }

    #[test]
    fn select_keeps_schema_indices() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = m.select(&[2, 0]).unwrap();
        assert_eq!(s.data(), &[3.0, 1.0, 6.0, 4.0]);
        assert_eq!(s.active_features(), &[2, 0]);
        let s2 = s.select(&[1]).unwrap();
        assert_eq!(s2.active_features(), &[0]);
        assert!(m.select(&[3]).is_err());
    }

    #[test]
    fn csv_export_has_id_column() {
        let m = FeatureMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,f0,f1\n1,0,1\n");
    }
}
