use super::{LossReport, PROB_FLOOR};
use crate::correspondence::Mask;
use crate::error::{Error, Result};

/// Mean binary cross-entropy between predicted foreground probabilities and
/// the ground-truth mask. Probabilities are clamped to
/// `[PROB_FLOOR, 1 - PROB_FLOOR]`; the gradient is zero where clamping binds.
pub fn loss_silhouette(pred: &[f64], gt: &Mask) -> Result<LossReport> {
    if pred.len() != gt.data.len() {
        return Err(Error::Shape(format!("{} predictions for a {}x{} mask", pred.len(), gt.height, gt.width)));
    }
    if pred.is_empty() {
        return Err(Error::Empty("silhouette".into()));
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for ((&p, &y), g) in pred.iter().zip(&gt.data).zip(grad.iter_mut()) {
        let q = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let inside = p > PROB_FLOOR && p < 1.0 - PROB_FLOOR;
        if y {
            value -= q.ln();
            if inside {
                *g = -1.0 / (q * n);
            }
        } else {
            value -= (1.0 - q).ln();
            if inside {
                *g = 1.0 / ((1.0 - q) * n);
            }
        }
    }
    let mut r = LossReport { value: value / n, ..Default::default() };
    r.gradients.insert("pred".into(), grad);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stage_rng;
    use rand::Rng;

    #[test]
    fn exact_prediction_hits_clamp_floor() {
        let gt = Mask::new(2, 2, vec![true, false, true, true]).unwrap();
        let pred: Vec<f64> = gt.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let r = loss_silhouette(&pred, &gt).unwrap();
        assert!(r.value <= -(1.0 - PROB_FLOOR).ln() + 1e-18);
        assert!(r.value > 0.0);
    }

    #[test]
    fn half_probability_is_ln2() {
        let gt = Mask::new(3, 1, vec![true, false, true]).unwrap();
        let r = loss_silhouette(&[0.5; 3], &gt).unwrap();
        assert!((r.value - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = stage_rng(4, "sil");
        let gt = Mask::new(4, 4, (0..16).map(|_| rng.random::<bool>()).collect()).unwrap();
        let pred: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let mut oracle = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                let p = pred[r * 4 + c];
                let y = if gt.data[r * 4 + c] { 1.0 } else { 0.0 };
                oracle += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            }
        }
        oracle /= 16.0;
        assert!((loss_silhouette(&pred, &gt).unwrap().value - oracle).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        assert!(loss_silhouette(&[0.5; 3], &Mask::filled(2, 2, true)).is_err());
    }
}
