//! Periodic trapezoid rule and the logarithmic splitting weights used for
//! the on-curve single layer.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicRule {
    m: usize,
    nodes: Vec<f64>,
    weight: f64,
    /// First row of the circulant log-weight matrix: `log_row[d]` is the
    /// weight for node offset `d = (i - k) mod M`.
    log_row: Vec<f64>,
}

/// Trapezoid rule with `m` nodes `t_k = 2 pi k / m`.
///
/// The log weights integrate `log(4 sin^2((t_i - s)/2)) * phi(s)` exactly
/// for trigonometric polynomials `phi` of degree up to `m/2`.
pub fn trapezoid_rule(m: usize) -> Result<PeriodicRule> {
    if m < 8 || m % 2 != 0 {
        return Err(Error::InvalidRule(format!(
            "node count must be even and at least 8, got {m}"
        )));
    }
    let mf = m as f64;
    let h = 2.0 * PI / mf;
    let nodes = (0..m).map(|k| 2.0 * PI * k as f64 / mf).collect();
    let half = m / 2;
    let log_row = (0..m)
        .map(|d| {
            // mirror so that the circulant matrix is exactly symmetric
            let t = d.min(m - d) as f64 * h;
            let mut sum = 0.0;
            for j in 1..half {
                sum += (j as f64 * t).cos() / j as f64;
            }
            -4.0 * PI / mf * sum - 4.0 * PI / (mf * mf) * (half as f64 * t).cos()
        })
        .collect();
    Ok(PeriodicRule {
        m,
        nodes,
        weight: h,
        log_row,
    })
}

impl PeriodicRule {
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// The common smooth weight `2 pi / M`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn log_weight(&self, i: usize, k: usize) -> f64 {
        self.log_row[(i + self.m - k) % self.m]
    }

    pub fn log_weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |i, k| self.log_weight(i, k))
    }
}

pub fn integrate_periodic(rule: &PeriodicRule, samples: &[f64]) -> Result<f64> {
    if samples.len() != rule.len() {
        return Err(Error::LengthMismatch {
            expected: rule.len(),
            got: samples.len(),
        });
    }
    Ok(samples.iter().sum::<f64>() * rule.weight())
}

/// Trigonometric interpolation of `samples` onto `m_new` equispaced nodes.
pub fn resample(samples: &[f64], m_new: usize) -> Vec<f64> {
    let m = samples.len();
    let half = m / 2;
    let mut a = vec![0.0; half + 1];
    let mut b = vec![0.0; half + 1];
    for (j, &v) in samples.iter().enumerate() {
        let t = 2.0 * PI * j as f64 / m as f64;
        for k in 0..=half {
            let (s, c) = (k as f64 * t).sin_cos();
            a[k] += v * c;
            b[k] += v * s;
        }
    }
    for k in 0..=half {
        let scale = if k == 0 || (m % 2 == 0 && k == half) { 1.0 } else { 2.0 };
        a[k] *= scale / m as f64;
        b[k] *= scale / m as f64;
    }
    if m % 2 == 0 {
        b[half] = 0.0;
    }
    (0..m_new)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / m_new as f64;
            (0..=half)
                .map(|k| {
                    let (s, c) = (k as f64 * t).sin_cos();
                    a[k] * c + b[k] * s
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample(rule: &PeriodicRule, f: impl Fn(f64) -> f64) -> Vec<f64> {
        rule.nodes().iter().map(|&t| f(t)).collect()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(trapezoid_rule(7).is_err());
        assert!(trapezoid_rule(6).is_err());
        assert!(trapezoid_rule(9).is_err());
        assert!(trapezoid_rule(8).is_ok());
    }

    #[test]
    fn basic_integrals() {
        let rule = trapezoid_rule(16).unwrap();
        let i = |f: &dyn Fn(f64) -> f64| integrate_periodic(&rule, &sample(&rule, f)).unwrap();
        assert_abs_diff_eq!(i(&|t| (3.0 * t).cos()), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(i(&|_| 1.0), 2.0 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(i(&|t| t.sin()), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(i(&|t| t.sin().powi(2)), PI, epsilon = 1e-14);
    }

    #[test]
    fn length_mismatch() {
        let rule = trapezoid_rule(16).unwrap();
        assert!(matches!(
            integrate_periodic(&rule, &[1.0; 15]),
            Err(Error::LengthMismatch { expected: 16, got: 15 })
        ));
    }

    #[test]
    fn log_weights_integrate_log_kernel() {
        let rule = trapezoid_rule(32).unwrap();
        // integral of log(4 sin^2(s/2)) over a period is 0
        let row: f64 = (0..32).map(|k| rule.log_weight(0, k)).sum();
        assert_abs_diff_eq!(row, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn log_weights_match_fourier_multipliers() {
        // integral of log(4 sin^2((t - s)/2)) cos(n s) ds = -2 pi cos(n t) / n
        let m = 32;
        let rule = trapezoid_rule(m).unwrap();
        for n in [1usize, 5, 15, 16] {
            for i in [0usize, 3, 17] {
                let t = rule.nodes()[i];
                let got: f64 = (0..m)
                    .map(|k| rule.log_weight(i, k) * (n as f64 * rule.nodes()[k]).cos())
                    .sum();
                assert_abs_diff_eq!(got, -2.0 * PI * (n as f64 * t).cos() / n as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn log_weights_circulant_symmetric() {
        let w = trapezoid_rule(24).unwrap().log_weight_matrix();
        for i in 0..24 {
            for k in 0..24 {
                assert_eq!(w[(i, k)], w[((i + 5) % 24, (k + 5) % 24)]);
                assert_abs_diff_eq!(w[(i, k)], w[(k, i)], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn self_convergence() {
        let f = |t: f64| t.sin().exp();
        let g = |t: f64| 1.0 / (2.0 + t.cos());
        let int = |m: usize, h: &dyn Fn(f64) -> f64| {
            let rule = trapezoid_rule(m).unwrap();
            integrate_periodic(&rule, &sample(&rule, h)).unwrap()
        };
        assert_abs_diff_eq!(int(64, &f), int(128, &f), epsilon = 1e-13);
        assert_abs_diff_eq!(int(64, &g), int(128, &g), epsilon = 1e-12);
        assert_abs_diff_eq!(int(64, &g), 2.0 * PI / 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn resample_is_exact_on_band_limited_data() {
        let f = |t: f64| 1.0 + (2.0 * t).cos() - 0.5 * (5.0 * t).sin();
        let coarse: Vec<f64> = (0..16).map(|k| f(2.0 * PI * k as f64 / 16.0)).collect();
        let fine = resample(&coarse, 64);
        for (i, v) in fine.iter().enumerate() {
            assert_abs_diff_eq!(*v, f(2.0 * PI * i as f64 / 64.0), epsilon = 1e-13);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn trapezoid_exact_below_m(k in 1usize..32, phase in 0.0f64..6.3) {
                let rule = trapezoid_rule(32).unwrap();
                let s = sample(&rule, |t| (k as f64 * t + phase).cos());
                prop_assert!(integrate_periodic(&rule, &s).unwrap().abs() < 1e-13);
            }
        }
    }
}
