//! JSON file format for density matrices.
//!
//! A state file stores the factor dimensions and the row-major matrix with
//! each entry as a `[re, im]` pair:
//!
//! ```json
//! {"dims": [2, 2], "matrix": [[[0.5, 0.0], ...], ...]}
//! ```
//!
//! Reading always re-validates hermiticity, unit trace and positivity, so a
//! hand-edited file cannot smuggle an invalid state into the pipeline.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use qpurity::mat::validate_density;
use qpurity::{CMatrix, Complex64, DensityMatrix, Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl StateFile {
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let m = rho.matrix();
        let matrix = (0..d)
            .map(|r| (0..d).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
            .collect();
        StateFile {
            dims: rho.dims().to_vec(),
            matrix,
        }
    }

    /// Converts to a density matrix, running the full validity checks.
    pub fn into_density(self) -> Result<DensityMatrix> {
        let d: usize = self.dims.iter().product();
        if self.matrix.len() != d || self.matrix.iter().any(|row| row.len() != d) {
            return Err(Error::mismatch(format!(
                "matrix must be {d}x{d} for dims {:?}",
                self.dims
            )));
        }
        let mut m = CMatrix::zeros(d, d);
        for (r, row) in self.matrix.iter().enumerate() {
            for (c, &[re, im]) in row.iter().enumerate() {
                m[(r, c)] = Complex64::new(re, im);
            }
        }
        validate_density(m, self.dims)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}
