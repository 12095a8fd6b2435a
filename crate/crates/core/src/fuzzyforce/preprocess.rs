//! Z-score normalization followed by a linear discriminant projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FuzzyError;
use crate::checkpoint::{CheckpointError, Section};

/// Ridge added to the within-class scatter when it is not positive definite.
pub const SCATTER_RIDGE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessModel {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// `d × d′`, columns ordered by decreasing discriminant power. The
    /// projected within-class covariance is the identity.
    pub projection: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub class_labels: Vec<usize>,
    pub regularized: bool,
}

impl PreprocessModel {
    pub fn fit(data: &[Vec<f64>], labels: &[usize]) -> Result<Self, FuzzyError> {
        if data.is_empty() {
            return Err(FuzzyError::EmptyData);
        }
        if data.len() != labels.len() {
            return Err(FuzzyError::Invalid(format!("{} samples but {} labels", data.len(), labels.len())));
        }
        let d = data[0].len();
        if d == 0 || data.iter().any(|x| x.len() != d) {
            return Err(FuzzyError::Invalid("feature vectors must share a positive dimension".into()));
        }
        let n = data.len() as f64;
        let means: Vec<f64> = (0..d).map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n).collect();
        let stds: Vec<f64> =
            (0..d).map(|j| (data.iter().map(|x| (x[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt()).collect();
        if let Some(j) = stds.iter().position(|&s| !(s > 0.0)) {
            return Err(FuzzyError::ZeroVariance { feature: j });
        }

        let mut class_labels: Vec<usize> = labels.to_vec();
        class_labels.sort_unstable();
        class_labels.dedup();
        if class_labels.len() < 2 {
            return Err(FuzzyError::Invalid("discriminant projection needs at least two classes".into()));
        }

        let z: Vec<DVector<f64>> = data
            .iter()
            .map(|x| DVector::from_iterator(d, x.iter().enumerate().map(|(j, v)| (v - means[j]) / stds[j])))
            .collect();
        let overall = z.iter().fold(DVector::zeros(d), |acc, v| acc + v) / n;
        let mut s_w = DMatrix::zeros(d, d);
        let mut s_b = DMatrix::zeros(d, d);
        for &c in &class_labels {
            let members: Vec<&DVector<f64>> = z.iter().zip(labels).filter(|(_, &l)| l == c).map(|(v, _)| v).collect();
            if members.len() < 2 {
                return Err(FuzzyError::Invalid(format!("class {c} has fewer than two samples")));
            }
            let mean = members.iter().fold(DVector::zeros(d), |acc, v| acc + *v) / members.len() as f64;
            for v in &members {
                let dv = *v - &mean;
                s_w += &dv * dv.transpose();
            }
            let dm = &mean - &overall;
            s_b += (&dm * dm.transpose()) * members.len() as f64;
        }
        let dof = n - class_labels.len() as f64;
        s_w /= dof;
        s_b /= n;

        let (chol, regularized) = match s_w.clone().cholesky() {
            Some(c) => (c, false),
            None => {
                let ridged = &s_w + DMatrix::identity(d, d) * SCATTER_RIDGE;
                (ridged.cholesky().ok_or(FuzzyError::SingularScatter)?, true)
            }
        };
        let l = chol.l();
        let l_inv = l.clone().try_inverse().ok_or(FuzzyError::SingularScatter)?;
        let whitened = &l_inv * &s_b * l_inv.transpose();
        let whitened = (&whitened + whitened.transpose()) * 0.5;
        let eig = whitened.symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let keep = (class_labels.len() - 1).min(d);
        let l_inv_t = l_inv.transpose();
        let mut projection = DMatrix::zeros(d, keep);
        for (k, &i) in order.iter().take(keep).enumerate() {
            projection.set_column(k, &(&l_inv_t * eig.eigenvectors.column(i)));
        }
        let eigenvalues = order.iter().take(keep).map(|&i| eig.eigenvalues[i]).collect();
        Ok(Self { means, stds, projection, eigenvalues, class_labels, regularized })
    }

    pub fn input_dim(&self) -> usize {
        self.means.len()
    }

    pub fn projected_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn zscore(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.means.iter().zip(&self.stds)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    /// Z-score then project.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let z = DVector::from_vec(self.zscore(x));
        (self.projection.transpose() * z).iter().copied().collect()
    }

    pub(crate) fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        s.push_floats("means", &self.means);
        s.push_floats("stds", &self.stds);
        s.push_usizes("projection_shape", &[self.projection.nrows(), self.projection.ncols()]);
        // column-major, as nalgebra stores it
        s.push_floats("projection", self.projection.as_slice());
        s.push_floats("eigenvalues", &self.eigenvalues);
        s.push_usizes("class_labels", &self.class_labels);
        s.push_usizes("regularized", &[self.regularized as usize]);
        s
    }

    pub(crate) fn from_section(s: &Section) -> Result<Self, CheckpointError> {
        let means = s.floats("means")?;
        let d = means.len();
        let stds = s.floats_len("stds", d)?;
        let shape = s.usizes("projection_shape")?;
        if shape.len() != 2 || shape[0] != d {
            return Err(s.bad("projection_shape", format!("{shape:?} does not match {d} features")));
        }
        let values = s.floats_len("projection", shape[0] * shape[1])?;
        Ok(Self {
            means,
            stds,
            projection: DMatrix::from_vec(shape[0], shape[1], values),
            eigenvalues: s.floats_len("eigenvalues", shape[1])?,
            class_labels: s.usizes("class_labels")?,
            regularized: s.usize("regularized")? != 0,
        })
    }
}
