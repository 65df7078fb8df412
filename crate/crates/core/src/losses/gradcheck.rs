//! Central finite-difference check of analytic gradients.

use crate::error::{Error, Result};
use crate::rng::stage_rng;

/// Coordinates checked per call (all of them when the input is smaller).
pub const SAMPLE_COORDS: usize = 100;
/// Gradient magnitudes below this are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-4;
pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max |analytic - numeric| / max(|numeric|, GRAD_FLOOR)`.
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares the gradient returned by `f` at `x` with central differences of
/// its value on randomly chosen coordinates.
pub fn check_gradient<F>(f: F, x: &[f64], step: f64, seed: u64) -> Result<GradCheck>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if x.is_empty() {
        return Err(Error::Empty("gradient check input".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Argument(format!("step must be positive, got {step}")));
    }
    let (v0, grad) = f(x)?;
    if !v0.is_finite() {
        return Err(Error::NonFinite(format!("loss {v0} at the base point")));
    }
    if grad.len() != x.len() {
        return Err(Error::Shape(format!("gradient has {} entries for {} inputs", grad.len(), x.len())));
    }
    let coords: Vec<usize> = if x.len() <= SAMPLE_COORDS {
        (0..x.len()).collect()
    } else {
        let mut rng = stage_rng(seed, "gradcheck");
        let mut c = rand::seq::index::sample(&mut rng, x.len(), SAMPLE_COORDS).into_vec();
        c.sort_unstable();
        c
    };
    let mut probe = x.to_vec();
    let mut report = GradCheck { max_rel_error: 0.0, worst_coord: coords[0], analytic: 0.0, numeric: 0.0, checked: 0 };
    for &i in &coords {
        probe[i] = x[i] + step;
        let (up, _) = f(&probe)?;
        probe[i] = x[i] - step;
        let (down, _) = f(&probe)?;
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("loss at perturbed coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * step);
        let err = (grad[i] - numeric).abs() / numeric.abs().max(GRAD_FLOOR);
        if err > report.max_rel_error || report.checked == 0 {
            report = GradCheck { max_rel_error: err, worst_coord: i, analytic: grad[i], numeric, checked: report.checked };
        }
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::normal;

    fn quadratic(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        // f = sum (i + 1) x_i^2 + x_0 x_1
        let mut v = x[0] * x[1];
        let mut g = vec![0.0; x.len()];
        for (i, &xi) in x.iter().enumerate() {
            v += (i + 1) as f64 * xi * xi;
            g[i] = 2.0 * (i + 1) as f64 * xi;
        }
        g[0] += x[1];
        g[1] += x[0];
        Ok((v, g))
    }

    fn point(n: usize) -> Vec<f64> {
        let mut rng = stage_rng(0, "pt");
        (0..n).map(|_| normal(&mut rng)).collect()
    }

    #[test]
    fn quadratic_is_exact() {
        let r = check_gradient(quadratic, &point(300), DEFAULT_STEP, 1).unwrap();
        assert_eq!(r.checked, SAMPLE_COORDS);
        // roundoff from the O(1e4) objective dominates
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn doubled_gradient_is_caught() {
        let wrong = |x: &[f64]| quadratic(x).map(|(v, g)| (v, g.into_iter().map(|gi| 2.0 * gi).collect()));
        let r = check_gradient(wrong, &point(50), DEFAULT_STEP, 1).unwrap();
        assert!((r.max_rel_error - 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn non_finite_perturbation_is_error() {
        let f = |x: &[f64]| Ok((if x[0] > 1.0 { f64::NAN } else { x[0] }, vec![1.0]));
        assert!(check_gradient(f, &[1.0], 1e-5, 0).is_err());
    }
}
