//! Named-matrix container shared by all serialized artifacts.
//!
//! JSON: `{"matrices": [{"name", "rows", "cols", "values"}]}` with row-major values.
//! CSV: one record per matrix, `name,rows,cols,v_0,...,v_{rows*cols-1}`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Mat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl NamedMatrix {
    pub fn from_mat(name: &str, m: &Mat) -> Self {
        let values = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|ij| m[ij]).collect();
        NamedMatrix { name: name.to_string(), rows: m.nrows(), cols: m.ncols(), values }
    }

    pub fn to_mat(&self) -> Result<Mat> {
        if self.values.len() != self.rows * self.cols {
            return Err(Error::Data(format!(
                "matrix {} declares {}x{} but has {} values",
                self.name,
                self.rows,
                self.cols,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("matrix {} has non-finite values", self.name)));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.values))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatrixBundle {
    pub matrices: Vec<NamedMatrix>,
}

impl MatrixBundle {
    pub fn push(&mut self, name: &str, m: &Mat) {
        self.matrices.retain(|x| x.name != name);
        self.matrices.push(NamedMatrix::from_mat(name, m));
    }

    pub fn with(mut self, name: &str, m: &Mat) -> Self {
        self.push(name, m);
        self
    }

    pub fn get(&self, name: &str) -> Result<Mat> {
        self.matrices
            .iter()
            .find(|x| x.name == name)
            .ok_or_else(|| Error::Data(format!("no matrix named {name}")))?
            .to_mat()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: MatrixBundle = serde_json::from_str(s)?;
        for m in &b.matrices {
            m.to_mat()?;
        }
        Ok(b)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        for m in &self.matrices {
            let mut rec = vec![m.name.clone(), m.rows.to_string(), m.cols.to_string()];
            rec.extend(m.values.iter().map(|v| format!("{v:.16e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
        let mut out = MatrixBundle::default();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::Data("matrix record needs name, rows and cols".into()));
            }
            let bad = |s: &str| Error::Data(format!("bad field {s}"));
            let rows: usize = rec[1].trim().parse().map_err(|_| bad(&rec[1]))?;
            let cols: usize = rec[2].trim().parse().map_err(|_| bad(&rec[2]))?;
            let values = rec
                .iter()
                .skip(3)
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad(s)))
                .collect::<Result<Vec<_>>>()?;
            let nm = NamedMatrix { name: rec[0].to_string(), rows, cols, values };
            nm.to_mat()?;
            out.matrices.push(nm);
        }
        Ok(out)
    }
}

/// Plain dense matrix as nested rows, used in configuration files.
pub type RowMatrix = Vec<Vec<f64>>;
