//! Subexponential-exponent fitting: least squares of log(-log P_e) against
//! log n recovers rho when -log P_e scales as n^rho.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::SCHEMA_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub schema: u32,
    pub rho_hat: f64,
    pub intercept: f64,
    /// exp(intercept): the fitted constant in -log P_e = c n^rho.
    pub c: f64,
    pub max_residual: f64,
    pub points: usize,
}

/// Fits (n, log P_e) samples. Requires at least three points with n strictly
/// increasing and log P_e negative and strictly decreasing (error probability
/// must actually shrink along the series).
pub fn fit_exponent(series: &[(f64, f64)]) -> Result<ExponentFit> {
    if series.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "exponent fit needs at least 3 points, got {}",
            series.len()
        )));
    }
    for &(n, log_pe) in series {
        if !n.is_finite() || !log_pe.is_finite() || n <= 0.0 || log_pe >= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "invalid fit point (n = {n}, log_pe = {log_pe})"
            )));
        }
    }
    for window in series.windows(2) {
        if window[1].0 <= window[0].0 {
            return Err(Error::InvalidArgument(
                "sample sizes must be strictly increasing".into(),
            ));
        }
        if window[1].1 >= window[0].1 {
            return Err(Error::InvalidArgument(
                "log error probabilities must be strictly decreasing".into(),
            ));
        }
    }
    let xs: Vec<f64> = series.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|&(_, lp)| (-lp).ln()).collect();
    let count = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = count * sxx - sx * sx;
    if denom == 0.0 {
        return Err(Error::InvalidArgument(
            "degenerate fit: identical sample sizes".into(),
        ));
    }
    let rho_hat = (count * sxy - sx * sy) / denom;
    let intercept = (sy - rho_hat * sx) / count;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + rho_hat * x)).abs())
        .fold(0.0f64, f64::max);
    Ok(ExponentFit {
        schema: SCHEMA_VERSION,
        rho_hat,
        intercept,
        c: intercept.exp(),
        max_residual,
        points: series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(rho: f64, c: f64, ns: &[f64]) -> Vec<(f64, f64)> {
        ns.iter().map(|&n| (n, -c * n.powf(rho))).collect()
    }

    #[test]
    fn recovers_square_root_law() {
        let series = synthetic(0.5, 1.0, &[4.0, 16.0, 64.0, 256.0, 1024.0]);
        let fit = fit_exponent(&series).unwrap();
        assert!((fit.rho_hat - 0.5).abs() < 1e-9);
        assert!((fit.c - 1.0).abs() < 1e-9);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn recovers_linear_law() {
        let series = synthetic(1.0, 0.7, &[2.0, 4.0, 8.0, 16.0]);
        let fit = fit_exponent(&series).unwrap();
        assert!((fit.rho_hat - 1.0).abs() < 1e-9);
        assert!((fit.c - 0.7).abs() < 1e-9);
    }

    #[test]
    fn non_monotone_series_rejected() {
        let series = vec![(2.0, -1.0), (4.0, -0.5), (8.0, -2.0)];
        assert!(fit_exponent(&series).is_err());
    }

    #[test]
    fn short_or_positive_series_rejected() {
        assert!(fit_exponent(&[(2.0, -1.0), (4.0, -2.0)]).is_err());
        assert!(fit_exponent(&[(2.0, 1.0), (4.0, 0.5), (8.0, 0.1)]).is_err());
    }

    #[test]
    fn shifting_all_values_barely_moves_the_slope() {
        // scaling P_e by a constant factor leaves the asymptotic slope alone
        let base = synthetic(0.7, 2.0, &[64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0]);
        let shifted: Vec<(f64, f64)> = base.iter().map(|&(n, lp)| (n, lp - 3.0)).collect();
        let a = fit_exponent(&base).unwrap();
        let b = fit_exponent(&shifted).unwrap();
        assert!((a.rho_hat - b.rho_hat).abs() < 0.05);
    }
}
