use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::args::BandwidthSpec;
use crate::error::{Error, Result};
use crate::io::{read_json, read_matrix_csv};
use crate::kde::{
    loo_cv_bandwidth, silverman_bandwidth, BandwidthMatrix, DataSet, GaussianKde, SilvermanDims,
};
use crate::reduction::{self, BasisFile, ReducedBasis};

/// Persisted model: where the data lives, how it was standardized, the
/// bandwidth in working coordinates and the optional reduced basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub data: PathBuf,
    pub standardize: bool,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub bandwidth: Vec<Vec<f64>>,
    pub basis: Option<BasisFile>,
}

/// A loaded model. The estimator lives in reduced coordinates when a basis is present.
#[derive(Debug, Clone)]
pub struct Model {
    pub kde: GaussianKde,
    pub basis: Option<ReducedBasis>,
}

fn dataset(points: DMatrix<f64>, standardize: bool) -> Result<DataSet> {
    if standardize {
        DataSet::standardized(points)
    } else {
        DataSet::new(points)
    }
}

impl Model {
    pub fn fit(
        data_path: &Path,
        standardize: bool,
        spec: &BandwidthSpec,
        d_red: Option<usize>,
    ) -> Result<(Self, ModelFile)> {
        let (_, raw) = read_matrix_csv(data_path)?;
        if raw.nrows() == 0 {
            return Err(Error::EmptyInput(format!(
                "{} has no rows",
                data_path.display()
            )));
        }
        let (points, basis) = match d_red {
            Some(d) => {
                let (basis, coords) = reduction::fit(&raw, d)?;
                (coords, Some(basis))
            }
            None => (raw, None),
        };
        let data = dataset(points, standardize)?;
        let bandwidth = match spec {
            BandwidthSpec::Silverman => silverman_bandwidth(&data, SilvermanDims::All)?,
            BandwidthSpec::SilvermanColumn(k) => {
                silverman_bandwidth(&data, SilvermanDims::Index(*k))?
            }
            BandwidthSpec::CrossValidation(grid) => loo_cv_bandwidth(&data, grid)?,
            BandwidthSpec::File(path) => {
                let rows: Vec<Vec<f64>> = read_json(path)?;
                BandwidthMatrix::new(DataSet::from_rows(&rows)?)?
            }
        };
        let kde = GaussianKde::new(data, bandwidth)?;
        let file = ModelFile {
            data: std::fs::canonicalize(data_path)?,
            standardize,
            mean: kde.data().mean().iter().cloned().collect(),
            std: kde.data().std().iter().cloned().collect(),
            bandwidth: kde
                .bandwidth()
                .matrix()
                .row_iter()
                .map(|r| r.iter().cloned().collect())
                .collect(),
            basis: basis.as_ref().map(ReducedBasis::to_file),
        };
        Ok((Self { kde, basis }, file))
    }

    /// Rebuilds the estimator from the model file and its data file.
    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = read_json(path)?;
        let (_, raw) = read_matrix_csv(&file.data)?;
        let basis = file
            .basis
            .as_ref()
            .map(ReducedBasis::from_file)
            .transpose()?;
        let points = match &basis {
            Some(b) => b.encode_rows(&raw)?,
            None => raw,
        };
        let data = dataset(points, file.standardize)?;
        let drift = data
            .mean()
            .iter()
            .zip(&file.mean)
            .chain(data.std().iter().zip(&file.std))
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()));
        if data.dim() != file.mean.len() || drift {
            return Err(Error::InvalidArgument(format!(
                "{} no longer matches the data the model was fit on",
                file.data.display()
            )));
        }
        let bandwidth = BandwidthMatrix::new(DataSet::from_rows(&file.bandwidth)?)?;
        Ok(Self {
            kde: GaussianKde::new(data, bandwidth)?,
            basis,
        })
    }

    /// Converts estimator-space rows to output rows (decoded unless `reduced`).
    pub fn output_rows(&self, rows: DMatrix<f64>, reduced: bool) -> Result<DMatrix<f64>> {
        match (&self.basis, reduced) {
            (Some(b), false) => b.decode_rows(&rows),
            _ => Ok(rows),
        }
    }

    /// Converts rows read from disk into estimator space, encoding full
    /// profiles when the model has a basis.
    pub fn estimator_rows(&self, rows: DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.kde.dim();
        match &self.basis {
            Some(b) if rows.ncols() != d && rows.ncols() == b.full_dim() => b.encode_rows(&rows),
            _ if rows.ncols() == d => Ok(rows),
            _ => Err(Error::DimensionMismatch {
                expected: d,
                got: rows.ncols(),
            }),
        }
    }
}
