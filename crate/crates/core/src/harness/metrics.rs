use serde::Serialize;

use super::HarnessError;
use crate::Vec3;

/// `√(mean((a − b)²))`.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64, HarnessError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(HarnessError::Length { left: a.len(), right: b.len() });
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rmse3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// `√(mean ‖a − b‖²)`.
    pub norm: f64,
}

pub fn rmse3(a: &[Vec3], b: &[Vec3]) -> Result<Rmse3, HarnessError> {
    let axis = |i: usize| {
        let pa: Vec<f64> = a.iter().map(|v| v[i]).collect();
        let pb: Vec<f64> = b.iter().map(|v| v[i]).collect();
        rmse(&pa, &pb)
    };
    let (x, y, z) = (axis(0)?, axis(1)?, axis(2)?);
    Ok(Rmse3 { x, y, z, norm: (x * x + y * y + z * z).sqrt() })
}
