use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{MestError, Result};

/// A regression instance: design matrix (rows are observations) and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(MestError::InvalidData(format!(
                "design must be at least 1x1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.nrows() != y.len() {
            return Err(MestError::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(MestError::InvalidData("non-finite entry".into()));
        }
        Ok(Self { x, y })
    }

    /// Builds a dataset from row-major observations.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(MestError::InvalidData("ragged rows".into()));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Self::new(x, DVector::from_column_slice(y))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `y - X beta`.
    pub fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * beta
    }

    /// Keeps only the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.p()) {
            return Err(MestError::InvalidData(format!("column {bad} out of range")));
        }
        let x = self.x.select_columns(cols);
        Self::new(x, self.y.clone())
    }

    /// Root-mean-square of each column, used for optional standardisation.
    pub fn column_scales(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.x.column_iter().map(|c| (c.norm_squared() / n).sqrt()).collect()
    }

    /// Divides each column by its scale; zero-scale columns are left untouched.
    pub fn standardized(&self) -> (Self, Vec<f64>) {
        let scales: Vec<f64> = self
            .column_scales()
            .into_iter()
            .map(|s| if s > 0.0 { s } else { 1.0 })
            .collect();
        let mut x = self.x.clone();
        for (j, s) in scales.iter().enumerate() {
            x.column_mut(j).unscale_mut(*s);
        }
        (Self { x, y: self.y.clone() }, scales)
    }

    /// Writes `x1,..,xp,y` with one observation per line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| MestError::InvalidData(e.to_string());
        let mut header: Vec<String> = (1..=self.p()).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header).map_err(io)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = (0..self.p()).map(|j| self.x[(i, j)].to_string()).collect();
            rec.push(self.y[i].to_string());
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| MestError::InvalidData(e.to_string()))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file =
            std::fs::File::create(path).map_err(|e| MestError::InvalidData(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| MestError::InvalidData(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| MestError::InvalidData(e.to_string()))?;
            let (y, xs) = vals
                .split_last()
                .ok_or_else(|| MestError::InvalidData("empty record".into()))?;
            ys.push(*y);
            rows.push(xs.to_vec());
        }
        Self::from_rows(&rows, &ys)
    }
}
