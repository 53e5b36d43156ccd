//! Goodness-of-fit metrics and the paired t-test used to compare models.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_pair(a: &[f64], b: &[f64], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} values, got {}",
            a.len()
        )));
    }
    Ok(())
}

/// `1 − SS_res / SS_tot`.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred, 1)?;
    let m = mean(y_true);
    let ss_tot: f64 = y_true.iter().map(|y| (y - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance("R² undefined for constant y_true".into()));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance("Pearson r undefined for a constant vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t: f64,
    pub p: f64,
    pub mean_difference: f64,
    pub n: usize,
}

/// Two-sided paired t-test on `a − b`.
///
/// Identical inputs give `t = 0, p = 1`; a constant non-zero difference has no
/// sampling variance and is rejected.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    check_pair(a, b, 2)?;
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let md = mean(&d);
    let var = d.iter().map(|v| (v - md).powi(2)).sum::<f64>() / (n - 1) as f64;
    let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale;
    if var <= floor * floor {
        if scale == 0.0 {
            return Ok(PairedTTest {
                t: 0.0,
                p: 1.0,
                mean_difference: 0.0,
                n,
            });
        }
        return Err(Error::ZeroVariance(
            "paired differences are constant and non-zero".into(),
        ));
    }
    let t = md / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(PairedTTest {
        t,
        p,
        mean_difference: md,
        n,
    })
}
