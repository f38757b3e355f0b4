// SPDX-License-Identifier: Apache-2.0

//! Log-sum-exp smooth maximum and its softmax gradient.

use serde::{Deserialize, Serialize};

use super::dd::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LseConfig {
    /// Smoothness in seconds.
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum LseError {
    #[error("log-sum-exp of an empty input")]
    Empty,
    #[error("non-finite input {0}")]
    NonFinite(f64),
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
}

fn check(xs: &[f64], cfg: &LseConfig) -> Result<(), LseError> {
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        return Err(LseError::InvalidGamma(cfg.gamma));
    }
    if xs.is_empty() {
        return Err(LseError::Empty);
    }
    if let Some(&x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(LseError::NonFinite(x));
    }
    Ok(())
}

/// `c + gamma * ln(sum(exp((x - c) / gamma)))` with `c = max(xs)`. When
/// `weights` is given it receives the softmax weights. A single input is
/// returned unchanged with weight one.
pub(crate) fn lse_with<R: Real>(xs: &[R], gamma: R, weights: Option<&mut [R]>) -> R {
    if xs.len() == 1 {
        if let Some(w) = weights {
            w[0] = R::one();
        }
        return xs[0];
    }
    let c = xs
        .iter()
        .copied()
        .fold(xs[0], |m, x| if x > m { x } else { m });
    let mut sum = R::zero();
    match weights {
        Some(w) => {
            for (wi, &x) in w.iter_mut().zip(xs) {
                *wi = ((x - c) / gamma).exp();
                sum = sum + *wi;
            }
            for wi in w.iter_mut() {
                *wi = *wi / sum;
            }
        }
        None => {
            for &x in xs {
                sum = sum + ((x - c) / gamma).exp();
            }
        }
    }
    c + gamma * sum.ln()
}

pub fn lse(xs: &[f64], cfg: &LseConfig) -> Result<f64, LseError> {
    check(xs, cfg)?;
    Ok(lse_with(xs, cfg.gamma, None))
}

/// Softmax weights, the partial derivatives of [`lse`].
pub fn lse_grad(xs: &[f64], cfg: &LseConfig) -> Result<Vec<f64>, LseError> {
    check(xs, cfg)?;
    let mut w = vec![0.0; xs.len()];
    lse_with(xs, cfg.gamma, Some(&mut w));
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(gamma: f64) -> LseConfig {
        LseConfig { gamma }
    }

    #[test]
    fn examples() {
        assert_eq!(lse(&[4.2], &cfg(0.3)).unwrap(), 4.2);
        assert!((lse(&[0.0, 0.0], &cfg(1.0)).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let direct = 3.0 + 0.5 * ((-4.0f64).exp() + (-2.0f64).exp() + 1.0).ln();
        let got = lse(&[1.0, 2.0, 3.0], &cfg(0.5)).unwrap();
        assert!((got - direct).abs() < 1e-15);
        assert!((got - 3.071466).abs() < 1e-6);
    }

    #[test]
    fn weights_examples() {
        assert_eq!(lse_grad(&[1.0; 4], &cfg(0.7)).unwrap(), vec![0.25; 4]);
        let w = lse_grad(&[0.0, 10.0], &cfg(0.1)).unwrap();
        assert!((w[0] / (-100f64).exp() - 1.0).abs() < 1e-12);
        assert!((w[0] - 3.7e-44).abs() < 0.05e-44);
        assert_eq!(w[1], 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(lse(&[], &cfg(1.0)), Err(LseError::Empty));
        assert_eq!(lse(&[1.0], &cfg(0.0)), Err(LseError::InvalidGamma(0.0)));
        assert!(matches!(lse(&[f64::NAN], &cfg(1.0)), Err(LseError::NonFinite(_))));
    }

    #[test]
    fn no_overflow_for_large_inputs() {
        let v = lse(&[1e300, 1e300], &cfg(1e-3)).unwrap();
        assert_eq!(v, 1e300);
        let v = lse(&[-1e300, 5.0], &cfg(1.0)).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn shrinking_gamma_approaches_max_from_above() {
        let xs = [0.3, 1.1, 0.9, 1.0];
        let vals: Vec<f64> = [1.0, 0.1, 0.01].iter().map(|&g| lse(&xs, &cfg(g)).unwrap()).collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2] && vals[2] >= 1.1);
    }

    proptest! {
        #[test]
        fn bounds_and_weight_sum(xs in proptest::collection::vec(-1e3f64..1e3, 1..20), g in 1e-3f64..10.0) {
            let c = cfg(g);
            let y = lse(&xs, &c).unwrap();
            let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m <= y);
            prop_assert!(y <= m + g * (xs.len() as f64).ln());
            let s: f64 = lse_grad(&xs, &c).unwrap().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn translation_covariance(xs in proptest::collection::vec(-10f64..10.0, 1..10), k in -10f64..10.0) {
            let c = cfg(0.5);
            let shifted: Vec<f64> = xs.iter().map(|x| x + k).collect();
            let d = lse(&shifted, &c).unwrap() - lse(&xs, &c).unwrap();
            prop_assert!((d - k).abs() <= 1e-12 * (1.0 + k.abs() + 10.0));
            let (w0, w1) = (lse_grad(&xs, &c).unwrap(), lse_grad(&shifted, &c).unwrap());
            for (a, b) in w0.iter().zip(&w1) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn weights_match_finite_differences(xs in proptest::collection::vec(-2f64..2.0, 2..6)) {
            let c = cfg(0.5);
            let w = lse_grad(&xs, &c).unwrap();
            let h = 1e-5;
            for i in 0..xs.len() {
                let mut p = xs.clone();
                let mut m = xs.clone();
                p[i] += h;
                m[i] -= h;
                let fd = (lse(&p, &c).unwrap() - lse(&m, &c).unwrap()) / (2.0 * h);
                prop_assert!((fd - w[i]).abs() <= 1e-6 * w[i].max(1e-3));
            }
        }
    }
}
