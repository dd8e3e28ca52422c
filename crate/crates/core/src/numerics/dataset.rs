//! Datasets, delimited-text ingestion and feature standardization.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// An `n × d` table of finite features with optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Option<Vec<i64>>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Option<Vec<i64>>) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset must have at least one row and one column, got {}x{}",
                features.rows(),
                features.cols()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != features.rows() {
                return Err(Error::DimensionMismatch {
                    expected: features.rows(),
                    got: l.len(),
                });
            }
        }
        for i in 0..features.rows() {
            if let Some(j) = features.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, column: j });
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Number of distinct label values, if labelled.
    pub fn class_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v.len()
        })
    }
}

/// Which column holds labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// Parses a selector: a bare integer is a 0-based index, anything else a header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        }
    }
}

fn parse_label(cell: &str) -> Option<i64> {
    let t = cell.trim();
    if let Ok(v) = t.parse::<i64>() {
        return Some(v);
    }
    let f = t.parse::<f64>().ok()?;
    (f.fract() == 0.0 && f.is_finite()).then_some(f as i64)
}

/// Reads a comma-delimited numeric file.
///
/// Row numbers in errors are 1-based data rows (the header is not counted);
/// the physical line is reported alongside.
pub fn load_csv(path: impl AsRef<Path>, label: Option<&LabelColumn>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };

    let header: Option<Vec<String>> = if has_header {
        Some(reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let label_idx = match (label, &header) {
        (None, _) => None,
        (Some(LabelColumn::Index(i)), _) => Some(*i),
        (Some(LabelColumn::Name(name)), Some(h)) => Some(
            h.iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::InvalidArgument(format!("label column {name:?} not in header")))?,
        ),
        (Some(LabelColumn::Name(name)), None) => {
            return Err(Error::InvalidArgument(format!(
                "label column {name:?} given by name but the file has no header"
            )))
        }
    };

    let mut width: Option<usize> = header.as_ref().map(Vec::len);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = r + 1;
        let line = record.position().map_or(0, |p| p.line());
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Ragged {
                row,
                expected: w,
                got: record.len(),
            });
        }
        if let Some(li) = label_idx {
            if li >= w {
                return Err(Error::InvalidArgument(format!("label column index {li} out of range for {w} columns")));
            }
        }
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_idx {
                let v = parse_label(cell).ok_or_else(|| Error::NonNumeric {
                    cell: cell.to_string(),
                    row,
                    column: c,
                    line,
                })?;
                labels.push(v);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    cell: cell.to_string(),
                    row,
                    column: c,
                    line,
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, column: c });
                }
                data.push(v);
            }
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    let d = width - usize::from(label_idx.is_some() && width > 0);
    let features = Matrix::from_vec(rows, d, data)?;
    let ds = Dataset::new(features, label_idx.map(|_| labels))?;
    match header {
        Some(h) => {
            let names = h
                .into_iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != label_idx)
                .map(|(_, s)| s)
                .collect();
            ds.with_feature_names(names)
        }
        None => Ok(ds),
    }
}

/// Writes features (and a trailing `label` column when present) with a header row.
///
/// Values use the shortest representation that parses back to the same `f64`.
pub fn write_csv(data: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    let names: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.d()).map(|j| format!("x{j}")).collect(),
    };
    let mut header = names.join(",");
    if data.labels().is_some() {
        header.push_str(",label");
    }
    writeln!(out, "{header}")?;
    for i in 0..data.n() {
        let mut line = data
            .features()
            .row(i)
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",");
        if let Some(l) = data.labels() {
            line.push(',');
            line.push_str(&l[i].to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Column means and (population) standard deviations; zero stds are stored as 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizeParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl StandardizeParams {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let d = x.cols();
        let mut means = vec![0.0; d];
        for r in x.row_iter() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for r in x.row_iter() {
            for ((s, v), m) in vars.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars
            .iter()
            .zip(&means)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                // constant up to rounding in the mean
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self { means, stds }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn unapply(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.means).zip(&self.stds) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                got: x.cols(),
            });
        }
        Ok(())
    }
}

/// Zero-mean, unit-variance columns; constant columns become zeros.
pub fn standardize(data: &Dataset) -> (Dataset, StandardizeParams) {
    let params = StandardizeParams::fit(data.features());
    let features = params.apply(data.features()).expect("params fitted on the same width");
    let mut out = data.clone();
    out.features = features;
    (out, params)
}

/// Standardizes, then divides every column by `√D` so rows have unit mean
/// squared norm. This is the input scale the learner is tuned for: with
/// plain SGD at learning rate 0.1 the pair loss curvature grows with the
/// squared row norm, and raw standardized rows of a few dozen features diverge.
pub fn prepare(data: &Dataset) -> (Dataset, StandardizeParams) {
    let mut params = StandardizeParams::fit(data.features());
    let root_d = (data.d() as f64).sqrt();
    params.stds.iter_mut().for_each(|s| *s *= root_d);
    let features = params.apply(data.features()).expect("params fitted on the same width");
    let mut out = data.clone();
    out.features = features;
    (out, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_with_named_label() {
        let f = write_tmp("a,b,y\n1,2,0\n3,4,1");
        let ds = load_csv(f.path(), Some(&LabelColumn::Name("y".into())), true).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 2));
        assert_eq!(ds.labels(), Some(&[0i64, 1][..]));
        assert_eq!(ds.features().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ds.feature_names().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn load_without_label() {
        let f = write_tmp("a,b,y\n1,2,0\n3,4,1");
        let ds = load_csv(f.path(), None, true).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 3));
        assert!(ds.labels().is_none());
    }

    #[test]
    fn load_with_index_label_no_header() {
        let f = write_tmp("0,1.5,2\n1,3.5,4\n");
        let ds = load_csv(f.path(), Some(&LabelColumn::Index(0)), false).unwrap();
        assert_eq!(ds.labels(), Some(&[0i64, 1][..]));
        assert_eq!(ds.features().as_slice(), &[1.5, 2.0, 3.5, 4.0]);
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let f = write_tmp("a,b\n1,2\nx,4\n");
        let err = load_csv(f.path(), None, true).unwrap_err();
        match err {
            Error::NonNumeric { row, column, ref cell, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, 0);
                assert_eq!(cell, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn ragged_rows_rejected() {
        let f = write_tmp("a,b\n1,2\n3\n");
        assert!(matches!(load_csv(f.path(), None, true), Err(Error::Ragged { row: 2, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/file.csv", None, true).unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn standardize_two_values() {
        let ds = Dataset::new(Matrix::from_rows(&[[1.0], [3.0]]).unwrap(), None).unwrap();
        let (s, p) = standardize(&ds);
        assert_eq!(s.features().as_slice(), &[-1.0, 1.0]);
        assert_eq!(p.means, vec![2.0]);
        assert_eq!(p.stds, vec![1.0]);
    }

    #[test]
    fn standardize_constant_column() {
        let ds = Dataset::new(Matrix::from_rows(&[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]).unwrap(), None).unwrap();
        let (s, _) = standardize(&ds);
        for i in 0..3 {
            assert_eq!(s.features().get(i, 0), 0.0);
        }
    }

    #[test]
    fn standardize_is_idempotent() {
        let ds = Dataset::new(Matrix::from_rows(&[[1.0, -2.0], [3.0, 0.5], [-4.0, 7.0], [0.0, 0.0]]).unwrap(), None).unwrap();
        let (once, _) = standardize(&ds);
        let (twice, _) = standardize(&once);
        for (a, b) in once.features().as_slice().iter().zip(twice.features().as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn prepare_gives_unit_mean_square_rows() {
        let ds = Dataset::new(
            Matrix::from_rows(&[[1.0, -2.0, 9.0, 4.0], [3.0, 0.5, 1.0, 4.0], [-4.0, 7.0, 2.0, 4.0], [0.0, 0.0, 0.0, 4.0]]).unwrap(),
            None,
        )
        .unwrap();
        let (p, params) = prepare(&ds);
        let (s, _) = standardize(&ds);
        for (a, b) in p.features().as_slice().iter().zip(s.features().as_slice()) {
            assert!((a * 2.0 - b).abs() < 1e-12);
        }
        // three unit-variance columns and one constant column over D = 4
        let mean_sq: f64 = p.features().row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / 4.0;
        assert!((mean_sq - 0.75).abs() < 1e-12);
        let back = params.unapply(p.features()).unwrap();
        for (a, b) in back.as_slice().iter().zip(ds.features().as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nonfinite_rejected() {
        let m = Matrix::from_rows(&[[1.0, f64::NAN]]).unwrap();
        assert!(matches!(Dataset::new(m, None), Err(Error::NonFinite { row: 0, column: 1 })));
    }
}
