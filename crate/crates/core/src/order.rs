//! Empirical convergence orders from log-log least squares.

use crate::error::{Error, Result};

/// Errors below this are clipped before taking logarithms.
pub const ERROR_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// At least one error was raised to [`ERROR_FLOOR`].
    pub clipped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitOutcome {
    Fitted(OrderFit),
    /// Every error sits at or below the floor; no order can be measured.
    Floor,
}

impl FitOutcome {
    pub fn slope(&self) -> Option<f64> {
        match self {
            FitOutcome::Fitted(f) => Some(f.slope),
            FitOutcome::Floor => None,
        }
    }
}

/// Fits `log err = intercept + slope * log t`.
pub fn fit_order(pairs: &[(f64, f64)]) -> Result<FitOutcome> {
    if pairs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 (t, error) pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|&(t, e)| !(t > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter("t must be positive and errors finite".into()));
    }
    if pairs.iter().all(|&(_, e)| e.abs() <= ERROR_FLOOR) {
        return Ok(FitOutcome::Floor);
    }
    let clipped = pairs.iter().any(|&(_, e)| e.abs() < ERROR_FLOOR);
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.abs().max(ERROR_FLOOR).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("t values must not all coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(FitOutcome::Fitted(OrderFit {
        slope,
        intercept,
        residual,
        clipped,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn slope(pairs: &[(f64, f64)]) -> f64 {
        fit_order(pairs).unwrap().slope().unwrap()
    }

    #[test]
    fn exact_power() {
        let pairs: Vec<_> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&t| (t, 3.0 * t * t)).collect();
        assert_abs_diff_eq!(slope(&pairs), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn perturbed_quartic() {
        let ts: Vec<f64> = (0..8).map(|k| 0.1 * 0.8f64.powi(k)).collect();
        let pairs: Vec<_> = ts.iter().map(|&t| (t, 2.0 * t.powi(4) * (1.0 + 0.1 * (1.0 / t).sin()))).collect();
        let s = slope(&pairs);
        assert!((3.8..=4.2).contains(&s), "{s}");
    }

    #[test]
    fn constant_errors() {
        assert_abs_diff_eq!(slope(&[(0.1, 0.3), (0.05, 0.3), (0.025, 0.3)]), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn floor_handling() {
        assert_eq!(fit_order(&[(0.1, 0.0), (0.05, 1e-16), (0.025, 0.0)]).unwrap(), FitOutcome::Floor);
        match fit_order(&[(0.1, 1e-10), (0.05, 1e-13), (0.025, 0.0)]).unwrap() {
            FitOutcome::Fitted(f) => assert!(f.clipped),
            FitOutcome::Floor => panic!("not all at floor"),
        }
        assert!(fit_order(&[(0.1, 1.0), (0.05, 1.0)]).is_err());
    }
}
