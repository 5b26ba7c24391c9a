//! Columnar datasets: typed attribute columns plus a class label column.
//!
//! Attributes are either numeric (finite f64) or categorical (level codes
//! into a small named level set). Missing values are not supported.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Categorical attributes are encoded as bits of a u64 subset mask.
pub const MAX_CATEGORICAL_LEVELS: usize = 64;

/// One attribute column.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// Ordered 64-bit floating point values; all finite.
    Numeric(Vec<f64>),
    /// Level codes into `levels`; every code < levels.len().
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same column with values reordered: entry i of the result is
    /// entry perm[i] of the original.
    pub fn permuted(&self, perm: &[u32]) -> Column {
        match self {
            Column::Numeric(v) => {
                Column::Numeric(perm.iter().map(|&p| v[p as usize]).collect())
            }
            Column::Categorical { levels, codes } => Column::Categorical {
                levels: levels.clone(),
                codes: perm.iter().map(|&p| codes[p as usize]).collect(),
            },
        }
    }
}

/// A single attribute value, used when evaluating split criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttrValue {
    Num(f64),
    Cat(u32),
}

/// Attribute kind as recorded in a model schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

/// Per-attribute schema entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrSchema {
    pub name: String,
    pub kind: AttrKind,
}

/// The part of a dataset a trained model must agree on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<AttrSchema>,
    pub classes: Vec<String>,
}

/// A training table: M typed columns of length N plus class labels in 0..C-1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    labels: Vec<u32>,
    class_names: Vec<String>,
    label_name: String,
}

impl Dataset {
    /// Build and validate a dataset. Requires N >= 1, M >= 1, C >= 2, equal
    /// column lengths, label codes < C, categorical codes < level count and
    /// at most [`MAX_CATEGORICAL_LEVELS`] levels, and finite numeric values.
    pub fn new(
        names: Vec<String>,
        columns: Vec<Column>,
        labels: Vec<u32>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        Self::with_label_name(names, columns, labels, class_names, "class".to_string())
    }

    pub fn with_label_name(
        names: Vec<String>,
        columns: Vec<Column>,
        labels: Vec<u32>,
        class_names: Vec<String>,
        label_name: String,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidData("no attribute columns".into()));
        }
        if names.len() != columns.len() {
            return Err(Error::InvalidData(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidData("no objects".into()));
        }
        let c = class_names.len();
        if c < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 classes, got {c}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= c) {
            return Err(Error::InvalidData(format!(
                "label code {bad} out of range for {c} classes"
            )));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidData(format!(
                    "column '{name}' has {} values, expected {n}",
                    col.len()
                )));
            }
            match col {
                Column::Numeric(values) => {
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidData(format!(
                            "column '{name}' contains a non-finite value"
                        )));
                    }
                }
                Column::Categorical { levels, codes } => {
                    if levels.is_empty() {
                        return Err(Error::InvalidData(format!(
                            "categorical column '{name}' has no levels"
                        )));
                    }
                    if levels.len() > MAX_CATEGORICAL_LEVELS {
                        return Err(Error::InvalidData(format!(
                            "categorical column '{name}' has {} levels (max {MAX_CATEGORICAL_LEVELS})",
                            levels.len()
                        )));
                    }
                    if codes.iter().any(|&v| v as usize >= levels.len()) {
                        return Err(Error::InvalidData(format!(
                            "categorical column '{name}' has a code out of range"
                        )));
                    }
                }
            }
        }
        Ok(Dataset {
            names,
            columns,
            labels,
            class_names,
            label_name,
        })
    }

    pub fn n_objects(&self) -> usize {
        self.labels.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.names
    }

    pub fn attribute_name(&self, attr: usize) -> &str {
        &self.names[attr]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn column(&self, attr: usize) -> &Column {
        &self.columns[attr]
    }

    #[inline]
    pub fn value(&self, attr: usize, row: usize) -> AttrValue {
        match &self.columns[attr] {
            Column::Numeric(v) => AttrValue::Num(v[row]),
            Column::Categorical { codes, .. } => AttrValue::Cat(codes[row]),
        }
    }

    /// Number of levels of a categorical attribute; None for numeric.
    pub fn n_levels(&self, attr: usize) -> Option<usize> {
        match &self.columns[attr] {
            Column::Numeric(_) => None,
            Column::Categorical { levels, .. } => Some(levels.len()),
        }
    }

    pub fn schema(&self) -> Schema {
        Schema {
            attributes: self
                .names
                .iter()
                .zip(&self.columns)
                .map(|(name, col)| AttrSchema {
                    name: name.clone(),
                    kind: match col {
                        Column::Numeric(_) => AttrKind::Numeric,
                        Column::Categorical { levels, .. } => AttrKind::Categorical {
                            levels: levels.clone(),
                        },
                    },
                })
                .collect(),
            classes: self.class_names.clone(),
        }
    }

    /// Check that this dataset matches a model schema.
    pub fn conforms_to(&self, schema: &Schema) -> Result<()> {
        let own = self.schema();
        if own == *schema {
            Ok(())
        } else if own.attributes.len() != schema.attributes.len() {
            Err(Error::SchemaMismatch(format!(
                "model has {} attributes, data has {}",
                schema.attributes.len(),
                own.attributes.len()
            )))
        } else if own.classes != schema.classes {
            Err(Error::SchemaMismatch("class sets differ".into()))
        } else {
            let detail = own
                .attributes
                .iter()
                .zip(&schema.attributes)
                .find(|(a, b)| a != b)
                .map(|(a, _)| a.name.clone())
                .unwrap_or_default();
            Err(Error::SchemaMismatch(format!(
                "attribute '{detail}' differs from the model schema"
            )))
        }
    }

    /// Content hash for provenance in reports (sha256 over a canonical
    /// encoding of names, columns, labels and class names).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        let word = |h: &mut Sha256, v: u64| h.update(v.to_le_bytes());
        word(&mut h, self.n_objects() as u64);
        word(&mut h, self.n_attributes() as u64);
        word(&mut h, self.n_classes() as u64);
        for (name, col) in self.names.iter().zip(&self.columns) {
            word(&mut h, name.len() as u64);
            h.update(name.as_bytes());
            match col {
                Column::Numeric(v) => {
                    h.update([0u8]);
                    for x in v {
                        h.update(x.to_bits().to_le_bytes());
                    }
                }
                Column::Categorical { levels, codes } => {
                    h.update([1u8]);
                    word(&mut h, levels.len() as u64);
                    for l in levels {
                        word(&mut h, l.len() as u64);
                        h.update(l.as_bytes());
                    }
                    for c in codes {
                        h.update(c.to_le_bytes());
                    }
                }
            }
        }
        for y in &self.labels {
            h.update(y.to_le_bytes());
        }
        for name in &self.class_names {
            word(&mut h, name.len() as u64);
            h.update(name.as_bytes());
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Load a dataset from CSV. The column named `label` becomes the class
    /// column; the rest are auto-typed (numeric when every value parses as a
    /// finite number, categorical otherwise) unless `schema` overrides a
    /// column's kind.
    pub fn from_csv_path(
        path: impl AsRef<Path>,
        label: &str,
        schema: Option<&SchemaOverride>,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())?;
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let label_idx = headers
            .iter()
            .position(|h| h == label)
            .ok_or_else(|| Error::LabelColumnNotFound(label.to_string()))?;

        let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for record in reader.records() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::InvalidData(format!(
                    "row with {} fields, expected {}",
                    record.len(),
                    headers.len()
                )));
            }
            for (i, field) in record.iter().enumerate() {
                raw[i].push(field.to_string());
            }
        }
        if raw[label_idx].is_empty() {
            return Err(Error::InvalidData("csv has no data rows".into()));
        }

        let (class_names, labels) = encode_levels(&raw[label_idx]);
        let mut names = Vec::new();
        let mut columns = Vec::new();
        for (i, header) in headers.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let forced = schema.and_then(|s| s.kind_of(header));
            let column = build_column(header, &raw[i], forced)?;
            names.push(header.clone());
            columns.push(column);
        }
        Self::with_label_name(names, columns, labels, class_names, label.to_string())
    }

    /// Write the dataset as CSV (attributes in order, label column last).
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push(&self.label_name);
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n_objects() {
            row.clear();
            for col in &self.columns {
                row.push(match col {
                    Column::Numeric(v) => v[i].to_string(),
                    Column::Categorical { levels, codes } => levels[codes[i] as usize].clone(),
                });
            }
            row.push(self.class_names[self.labels[i] as usize].clone());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        self.write_csv(&mut file)
    }
}

/// Explicit per-column kind overrides for CSV loading, parsed from a JSON
/// object mapping column name to "numeric" or "categorical".
#[derive(Debug, Clone, Default, Deserialize)]
pub struct SchemaOverride(HashMap<String, String>);

impl SchemaOverride {
    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let map: HashMap<String, String> = serde_json::from_str(&text)?;
        for (col, kind) in &map {
            if kind != "numeric" && kind != "categorical" {
                return Err(Error::InvalidConfig(format!(
                    "schema override for '{col}' must be 'numeric' or 'categorical', got '{kind}'"
                )));
            }
        }
        Ok(SchemaOverride(map))
    }

    fn kind_of(&self, column: &str) -> Option<&str> {
        self.0.get(column).map(String::as_str)
    }
}

/// Encode strings as level codes in order of first appearance.
fn encode_levels(values: &[String]) -> (Vec<String>, Vec<u32>) {
    let mut levels: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut codes = Vec::with_capacity(values.len());
    for v in values {
        let code = *index.entry(v.clone()).or_insert_with(|| {
            levels.push(v.clone());
            (levels.len() - 1) as u32
        });
        codes.push(code);
    }
    (levels, codes)
}

fn parse_all_numeric(values: &[String]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        let x: f64 = v.trim().parse().ok()?;
        if !x.is_finite() {
            return None;
        }
        out.push(x);
    }
    Some(out)
}

fn build_column(name: &str, values: &[String], forced: Option<&str>) -> Result<Column> {
    match forced {
        Some("numeric") => {
            let parsed = parse_all_numeric(values).ok_or_else(|| {
                Error::InvalidData(format!(
                    "column '{name}' forced numeric but has a non-numeric value"
                ))
            })?;
            Ok(Column::Numeric(parsed))
        }
        Some("categorical") => {
            let (levels, codes) = encode_levels(values);
            Ok(Column::Categorical { levels, codes })
        }
        _ => match parse_all_numeric(values) {
            Some(parsed) => Ok(Column::Numeric(parsed)),
            None => {
                let (levels, codes) = encode_levels(values);
                Ok(Column::Categorical { levels, codes })
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::new(
            vec!["a".into(), "b".into()],
            vec![
                Column::Numeric(vec![1.0, 2.0, 3.0]),
                Column::Categorical {
                    levels: vec!["x".into(), "y".into()],
                    codes: vec![0, 1, 0],
                },
            ],
            vec![0, 1, 0],
            vec!["no".into(), "yes".into()],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Dataset::new(vec![], vec![], vec![0], vec!["a".into(), "b".into()]).is_err());
        assert!(Dataset::new(
            vec!["a".into()],
            vec![Column::Numeric(vec![1.0])],
            vec![0],
            vec!["only".into()],
        )
        .is_err());
        assert!(Dataset::new(
            vec!["a".into()],
            vec![Column::Numeric(vec![1.0, 2.0])],
            vec![0, 2],
            vec!["x".into(), "y".into()],
        )
        .is_err());
        assert!(Dataset::new(
            vec!["a".into()],
            vec![Column::Numeric(vec![f64::NAN])],
            vec![0],
            vec!["x".into(), "y".into()],
        )
        .is_err());
    }

    #[test]
    fn csv_round_trip_preserves_content() {
        let d = tiny();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(tmp.path(), &buf).unwrap();
        let back = Dataset::from_csv_path(tmp.path(), "class", None).unwrap();
        assert_eq!(d, back);
        assert_eq!(d.content_hash(), back.content_hash());
    }

    #[test]
    fn csv_missing_label_column() {
        let tmp = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(tmp.path(), "a,b\n1,2\n").unwrap();
        let err = Dataset::from_csv_path(tmp.path(), "class", None).unwrap_err();
        assert!(matches!(err, Error::LabelColumnNotFound(ref c) if c == "class"));
    }

    #[test]
    fn auto_typing_and_override() {
        let tmp = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(tmp.path(), "a,b,class\n1,2,yes\n2,u,no\n").unwrap();
        let d = Dataset::from_csv_path(tmp.path(), "class", None).unwrap();
        assert!(matches!(d.column(0), Column::Numeric(_)));
        assert!(matches!(d.column(1), Column::Categorical { .. }));

        let schema_file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(schema_file.path(), r#"{"a": "categorical"}"#).unwrap();
        let ov = SchemaOverride::from_json_path(schema_file.path()).unwrap();
        let d = Dataset::from_csv_path(tmp.path(), "class", Some(&ov)).unwrap();
        assert!(matches!(d.column(0), Column::Categorical { .. }));
    }

    #[test]
    fn content_hash_changes_with_data() {
        let d = tiny();
        let mut names = d.attribute_names().to_vec();
        names[0] = "different".into();
        let d2 = Dataset::new(
            names,
            vec![d.column(0).clone(), d.column(1).clone()],
            d.labels().to_vec(),
            d.class_names().to_vec(),
        )
        .unwrap();
        assert_ne!(d.content_hash(), d2.content_hash());
    }
}
