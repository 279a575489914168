use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{ClassId, FeatureMatrix};

/// Features with one global class label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: FeatureMatrix,
    labels: Vec<ClassId>,
    class_names: Option<BTreeMap<ClassId, String>>,
}

impl LabeledDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<ClassId>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            class_names: None,
        })
    }

    /// Attaches display names; every label must have one.
    pub fn with_class_names(mut self, names: BTreeMap<ClassId, String>) -> Result<Self> {
        if let Some(missing) = self.labels.iter().find(|l| !names.contains_key(l)) {
            return Err(Error::InvalidLabels(format!("class {missing} has no name")));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn class_names(&self) -> Option<&BTreeMap<ClassId, String>> {
        self.class_names.as_ref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Distinct classes, ascending.
    pub fn classes(&self) -> Vec<ClassId> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Rows whose label is in `classes`, original order preserved.
    pub fn filter_classes(&self, classes: &[ClassId]) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect();
        self.select(&idx)
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Row-wise concatenation; dimensions must agree.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<Self> {
        let feats: Vec<&FeatureMatrix> = parts.iter().map(|p| &p.features).collect();
        let features = FeatureMatrix::vstack(&feats)?;
        let labels = parts.iter().flat_map(|p| p.labels.iter().copied()).collect();
        let mut names: Option<BTreeMap<ClassId, String>> = None;
        for p in parts {
            if let Some(n) = &p.class_names {
                names.get_or_insert_with(BTreeMap::new).extend(n.clone());
            }
        }
        Ok(Self {
            features,
            labels,
            class_names: names,
        })
    }
}

/// Writes `label,f0,...,f{d-1}` CSV with shortest round-trip float formatting.
pub fn save_features(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let map_csv = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data {
            line: 0,
            message: format!("{other:?}"),
        },
    };
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.dim()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(map_csv)?;
    let m = ds.features.as_matrix();
    for (i, label) in ds.labels.iter().enumerate() {
        let mut rec = Vec::with_capacity(ds.dim() + 1);
        rec.push(label.to_string());
        rec.extend(m.row(i).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(map_csv)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the CSV written by [`save_features`].
pub fn load_features(path: &Path) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_features(file)
}

pub(crate) fn parse_features<R: std::io::Read>(reader: R) -> Result<LabeledDataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| csv_parse_error(&e))?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    if header.get(0) != Some("label") || header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `label,f0,...`".into(),
        });
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column `f{j}`, found `{name}`"),
            });
        }
    }
    let dim = header.len() - 1;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_parse_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 1, rec.len()),
            });
        }
        let label: ClassId = rec[0].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("label `{}` is not a non-negative integer", &rec[0]),
        })?;
        labels.push(label);
        for field in rec.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    line,
                    message: format!("non-finite feature value `{field}`"),
                });
            }
            values.push(v);
        }
    }
    let features = FeatureMatrix::new(DMatrix::from_row_slice(labels.len(), dim, &values))?;
    LabeledDataset::new(features, labels)
}

fn csv_parse_error(e: &csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}
