//! Feature-by-sample matrix ingestion with group labels and missing values.
//!
//! Datasets are wide delimited files: one header carries the per-sample
//! group labels (or feature ids, depending on orientation) and every cell is
//! a real number, empty, or a literal `NA`/`nan` for missing. Missing values
//! are handled by listwise deletion per feature per group, so per-feature
//! group sizes may differ; nothing is imputed.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::path::Path;

use crate::confidence::GroupSample;
use crate::error::{Error, Result};

/// Delimiter of the matrix file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Tsv,
}

impl MatrixFormat {
    fn delimiter(self) -> u8 {
        match self {
            MatrixFormat::Csv => b',',
            MatrixFormat::Tsv => b'\t',
        }
    }
}

/// Whether rows are features (default for expression-style exports) or
/// samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    FeaturesInRows,
    FeaturesInCols,
}

/// An immutable features x samples matrix with group labels and a missing
/// mask. Feature ids are unique and at least two distinct groups exist.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    feature_ids: Vec<String>,
    group_labels: Vec<String>,
    /// Row-major features x samples; missing cells hold NaN.
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major cells, `None` marking missing.
    pub fn new(
        feature_ids: Vec<String>,
        group_labels: Vec<String>,
        cells: Vec<Option<f64>>,
    ) -> Result<Self> {
        if feature_ids.is_empty() || group_labels.is_empty() {
            return Err(Error::MalformedRow {
                line: 1,
                message: "matrix needs at least one feature and one sample".into(),
            });
        }
        if cells.len() != feature_ids.len() * group_labels.len() {
            return Err(Error::MalformedRow {
                line: 1,
                message: format!(
                    "expected {} cells for {} features x {} samples, got {}",
                    feature_ids.len() * group_labels.len(),
                    feature_ids.len(),
                    group_labels.len(),
                    cells.len()
                ),
            });
        }
        let mut seen = HashSet::new();
        for id in &feature_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateFeatureId { id: id.clone() });
            }
        }
        let distinct: HashSet<&str> = group_labels.iter().map(String::as_str).collect();
        if distinct.len() < 2 {
            return Err(Error::TooFewDistinctGroups { got: distinct.len() });
        }
        let mut values = Vec::with_capacity(cells.len());
        let mut missing = Vec::with_capacity(cells.len());
        for cell in cells {
            match cell {
                Some(v) if v.is_finite() => {
                    values.push(v);
                    missing.push(false);
                }
                Some(_) => {
                    return Err(Error::NonFinite { label: "matrix cell".into() });
                }
                None => {
                    values.push(f64::NAN);
                    missing.push(true);
                }
            }
        }
        Ok(Self { feature_ids, group_labels, values, missing })
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.group_labels.len()
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    /// Distinct group labels in ascending order.
    pub fn groups(&self) -> Vec<String> {
        let set: HashSet<&String> = self.group_labels.iter().collect();
        let mut out: Vec<String> = set.into_iter().cloned().collect();
        out.sort();
        out
    }

    pub fn feature_index(&self, feature: &str) -> Option<usize> {
        self.feature_ids.iter().position(|id| id == feature)
    }

    pub fn is_missing(&self, feature: usize, sample: usize) -> bool {
        self.missing[feature * self.n_samples() + sample]
    }

    /// Cell value, `None` when missing.
    pub fn value(&self, feature: usize, sample: usize) -> Option<f64> {
        if self.is_missing(feature, sample) {
            None
        } else {
            Some(self.values[feature * self.n_samples() + sample])
        }
    }

    /// One row of the matrix with NaN at missing cells.
    pub fn feature_row(&self, feature: usize) -> &[f64] {
        let w = self.n_samples();
        &self.values[feature * w..(feature + 1) * w]
    }

    /// New matrix restricted to the given sample columns (in the given
    /// order). The slice must still contain at least two distinct groups.
    pub fn select_samples(&self, keep: &[usize]) -> Result<FeatureMatrix> {
        for &s in keep {
            if s >= self.n_samples() {
                return Err(Error::IndexRange {
                    name: "sample",
                    value: s,
                    max: self.n_samples() - 1,
                });
            }
        }
        let labels: Vec<String> = keep.iter().map(|&s| self.group_labels[s].clone()).collect();
        let mut cells = Vec::with_capacity(self.n_features() * keep.len());
        for f in 0..self.n_features() {
            for &s in keep {
                cells.push(self.value(f, s));
            }
        }
        FeatureMatrix::new(self.feature_ids.clone(), labels, cells)
    }

    /// Non-missing values of one feature, bucketed by group label in
    /// ascending label order. Groups emptied by missingness are omitted.
    pub fn group_values(&self, feature: &str) -> Result<Vec<(String, Vec<f64>)>> {
        let row = self
            .feature_index(feature)
            .ok_or_else(|| Error::UnknownFeature { id: feature.into() })?;
        let mut buckets: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (s, label) in self.group_labels.iter().enumerate() {
            if let Some(v) = self.value(row, s) {
                buckets.entry(label.as_str()).or_default().push(v);
            }
        }
        Ok(buckets
            .into_iter()
            .map(|(label, vs)| (label.to_string(), vs))
            .collect())
    }

    /// Per-group sorted samples for one feature, every group tagged with
    /// quantile `q`. Fails with a skip signal when missingness leaves fewer
    /// than two nonempty groups.
    pub fn feature_groups(&self, feature: &str, q: f64) -> Result<Vec<GroupSample>> {
        let buckets = self.group_values(feature)?;
        if buckets.len() < 2 {
            return Err(Error::FeatureSkipped {
                id: feature.into(),
                reason: format!("{} nonempty group(s) after missing-value removal", buckets.len()),
            });
        }
        buckets
            .into_iter()
            .map(|(label, vs)| GroupSample::new(label, vs, q))
            .collect()
    }
}

fn parse_cell(token: &str, line: u64, column: usize) -> Result<Option<f64>> {
    let t = token.trim();
    if t.is_empty() || t == "NA" || t == "nan" {
        return Ok(None);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::MalformedCell {
            line,
            column,
            token: t.to_string(),
        }),
    }
}

/// Loads a delimited matrix file.
///
/// With `FeaturesInRows` the header row carries one group label per sample
/// column and each body row starts with its feature id; with
/// `FeaturesInCols` the header carries feature ids and each body row starts
/// with that sample's group label. The top-left corner cell is ignored.
pub fn load_matrix(
    path: impl AsRef<Path>,
    format: MatrixFormat,
    orientation: Orientation,
) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(false)
        .flexible(true)
        .from_path(path.as_ref())?;

    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.len() < 2 {
        return Err(Error::MalformedRow {
            line: 1,
            message: "matrix needs a header and at least one data row".into(),
        });
    }
    let width = rows[0].1.len();
    if width < 2 {
        return Err(Error::MalformedRow {
            line: rows[0].0,
            message: "header needs at least one column after the corner cell".into(),
        });
    }
    for (line, row) in &rows {
        if row.len() != width {
            return Err(Error::MalformedRow {
                line: *line,
                message: format!("expected {} fields, got {}", width, row.len()),
            });
        }
    }

    let header: Vec<String> = rows[0].1[1..].to_vec();
    let mut row_names = Vec::with_capacity(rows.len() - 1);
    let mut cells = Vec::with_capacity((rows.len() - 1) * (width - 1));
    for (line, row) in &rows[1..] {
        row_names.push(row[0].trim().to_string());
        for (i, token) in row[1..].iter().enumerate() {
            cells.push(parse_cell(token, *line, i + 2)?);
        }
    }

    match orientation {
        Orientation::FeaturesInRows => FeatureMatrix::new(row_names, header, cells),
        Orientation::FeaturesInCols => {
            // Body rows are samples; transpose into row-major features.
            let (n_samples, n_features) = (row_names.len(), header.len());
            let mut transposed = vec![None; cells.len()];
            for s in 0..n_samples {
                for f in 0..n_features {
                    transposed[f * n_samples + s] = cells[s * n_features + f];
                }
            }
            FeatureMatrix::new(header, row_names, transposed)
        }
    }
}

/// Writes a matrix in the given format and orientation.
///
/// Present values print with Rust's shortest round-trip float formatting,
/// missing cells print as `NA`, so a load of the written file reproduces the
/// matrix exactly.
pub fn write_matrix(
    matrix: &FeatureMatrix,
    path: impl AsRef<Path>,
    format: MatrixFormat,
    orientation: Orientation,
) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .from_path(path.as_ref())?;
    let cell = |f: usize, s: usize| match matrix.value(f, s) {
        Some(v) => v.to_string(),
        None => "NA".to_string(),
    };
    match orientation {
        Orientation::FeaturesInRows => {
            let mut header = vec!["feature_id".to_string()];
            header.extend(matrix.group_labels().iter().cloned());
            writer.write_record(&header)?;
            for f in 0..matrix.n_features() {
                let mut row = vec![matrix.feature_ids()[f].clone()];
                row.extend((0..matrix.n_samples()).map(|s| cell(f, s)));
                writer.write_record(&row)?;
            }
        }
        Orientation::FeaturesInCols => {
            let mut header = vec!["group".to_string()];
            header.extend(matrix.feature_ids().iter().cloned());
            writer.write_record(&header)?;
            for s in 0..matrix.n_samples() {
                let mut row = vec![matrix.group_labels()[s].clone()];
                row.extend((0..matrix.n_features()).map(|f| cell(f, s)));
                writer.write_record(&row)?;
            }
        }
    }
    writer.flush().map_err(std::io::Error::from)?;
    Ok(())
}
