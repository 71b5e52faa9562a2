//! CSV datasets and serde helpers for dense matrices.
//!
//! Dataset files have a header row whose first column is `label` (values 1
//! or 2); every other column is a numeric feature. Lines starting with `#`
//! are comments.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};

const MAX_REPORTED: usize = 20;

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("label") {
        return Err(Error::Data(format!(
            "first column must be named `label`, found {:?}",
            headers.get(0).unwrap_or("")
        )));
    }
    let p = headers.len() - 1;
    if p == 0 {
        return Err(Error::Data("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut problems = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != p + 1 {
            problems.push(format!("line {line}: expected {} fields, found {}", p + 1, rec.len()));
            continue;
        }
        let label = rec[0]
            .parse::<u8>()
            .ok()
            .and_then(|v| Label::try_from(v).ok());
        let Some(label) = label else {
            problems.push(format!("line {line}: label must be 1 or 2, found {:?}", &rec[0]));
            continue;
        };
        let mut row = Vec::with_capacity(p);
        let mut ok = true;
        for (j, field) in rec.iter().enumerate().skip(1) {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    problems.push(format!(
                        "line {line}: column {:?} is not a finite number: {field:?}",
                        &headers[j]
                    ));
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            labels.push(label);
            values.extend(row);
        }
    }
    if !problems.is_empty() {
        let more = problems.len().saturating_sub(MAX_REPORTED);
        let mut msg = problems.into_iter().take(MAX_REPORTED).collect::<Vec<_>>().join("; ");
        if more > 0 {
            msg.push_str(&format!("; and {more} more"));
        }
        return Err(Error::Data(msg));
    }
    if labels.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let x = DMatrix::from_row_slice(labels.len(), p, &values);
    Dataset::new(x, labels)
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let f = std::fs::File::open(path.as_ref())?;
    read_dataset(std::io::BufReader::new(f))
}

/// Writes `data` with `#`-prefixed comment lines first.
pub fn write_dataset<W: Write>(mut w: W, data: &Dataset, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![data.label(i).to_string()];
        rec.extend(data.x().row(i).iter().map(|v| format!("{v:?}")));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Serde adapters: matrices as `{rows, cols, data}` with row-major `data`,
/// vectors as plain arrays.
pub mod serde_matrix {
    use nalgebra::{DMatrix, DVector};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    pub struct Record {
        pub rows: usize,
        pub cols: usize,
        pub data: Vec<f64>,
    }

    impl Record {
        pub fn from_matrix(m: &DMatrix<f64>) -> Record {
            let mut data = Vec::with_capacity(m.len());
            for i in 0..m.nrows() {
                data.extend(m.row(i).iter());
            }
            Record {
                rows: m.nrows(),
                cols: m.ncols(),
                data,
            }
        }

        pub fn into_matrix(self) -> Result<DMatrix<f64>, String> {
            if self.rows * self.cols != self.data.len() {
                return Err(format!(
                    "matrix {}x{} has {} entries",
                    self.rows,
                    self.cols,
                    self.data.len()
                ));
            }
            Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
        }
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
            Record::from_matrix(m).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
            Record::deserialize(d)?
                .into_matrix()
                .map_err(serde::de::Error::custom)
        }
    }

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
            Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_with_comments() {
        let text = "# produced by a test\nlabel,a,b\n1,0.5,2\n2,-1e3,3.25\n";
        let d = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.p(), 2);
        assert_eq!(d.y(), &[Label::One, Label::Two]);
        assert_eq!(d.x()[(1, 0)], -1000.0);
    }

    #[test]
    fn reports_offending_lines() {
        let text = "label,a\n1,0.5\n3,1\n2,abc\n2,1.0\n";
        let err = read_dataset(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("line 4"), "{err}");
        assert!(!err.contains("line 2"), "{err}");
    }

    #[test]
    fn rejects_missing_label_header() {
        let text = "y,a\n1,0.5\n";
        assert!(read_dataset(text.as_bytes()).is_err());
    }

    #[test]
    fn write_then_read_is_exact() {
        let d = Dataset::from_rows(
            &[vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 7.0]],
            vec![Label::Two, Label::One],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d, &["hello".into()]).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }
}
