//! Correspondence quality (GPS with AP/AR over thresholds) and retrieval
//! quality (mAP, CMC).

mod reid;

pub use reid::{reid_eval, Protocol, ReidResult, RetrievalInstance, SampleLabels};

use rayon::prelude::*;

use crate::correspondence::CorrespondenceSet;
use crate::embedding::VertexMap;
use crate::error::{Error, Result};
use crate::geodesics::GeodesicCache;

pub const DEFAULT_SIGMA: f64 = 0.255;

#[derive(Debug, Clone, PartialEq)]
pub struct GpsConfig {
    pub sigma: f64,
    pub thresholds: Vec<f64>,
}

impl Default for GpsConfig {
    fn default() -> Self {
        // integer steps keep 0.55, 0.6, ... exactly as they would be typed
        Self { sigma: DEFAULT_SIGMA, thresholds: (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect() }
    }
}

impl GpsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Argument(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.thresholds.is_empty() {
            return Err(Error::Argument("no GPS thresholds".into()));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0)) || self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(format!("thresholds must increase within (0, 1]: {:?}", self.thresholds)));
        }
        Ok(())
    }
}

/// Mean of `exp(-g^2 / (2 sigma^2))` over the annotated pixels of `gt`.
pub fn gps(gt: &CorrespondenceSet, pred: &VertexMap, cache: &GeodesicCache, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
    }
    if gt.entries.is_empty() {
        return Err(Error::Empty(format!("annotations of image {}", gt.image)));
    }
    let mut sum = 0.0;
    for e in &gt.entries {
        let v = pred.get(e.pixel).ok_or_else(|| {
            Error::Validation(format!("image {}: no prediction at annotated pixel {:?}", gt.image, e.pixel))
        })?;
        let g = cache.distance(e.vertex, v)?;
        sum += (-g * g / (2.0 * sigma * sigma)).exp();
    }
    Ok(sum / gt.entries.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpsTable {
    pub thresholds: Vec<f64>,
    pub ap: Vec<f64>,
    pub ar: Vec<f64>,
    pub mean_ap: f64,
    pub mean_ar: f64,
    /// Per-image GPS, `None` where the image has no prediction.
    pub scores: Vec<Option<f64>>,
}

impl GpsTable {
    /// CSV with a header row of thresholds, then `AP` and `AR` rows in
    /// percent, each ending in the mean over thresholds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for t in &self.thresholds {
            out += &format!(",{t:.2}");
        }
        out += ",mean\n";
        for (name, row, mean) in [("AP", &self.ap, self.mean_ap), ("AR", &self.ar, self.mean_ar)] {
            out += name;
            for v in row {
                out += &format!(",{:.1}", 100.0 * v);
            }
            out += &format!(",{:.1}\n", 100.0 * mean);
        }
        out
    }
}

/// Image-level AP and AR: an image is correct at `t` when its GPS is at
/// least `t`. Images without a prediction count only toward AR.
pub fn gps_ap_ar(
    dataset: &[(CorrespondenceSet, Option<VertexMap>)],
    cache: &GeodesicCache,
    config: &GpsConfig,
) -> Result<GpsTable> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("GPS dataset".into()));
    }
    let scores = dataset
        .par_iter()
        .map(|(gt, pred)| pred.as_ref().map(|p| gps(gt, p, cache, config.sigma)).transpose())
        .collect::<Result<Vec<_>>>()?;
    let predicted = scores.iter().flatten().count();
    let mut ap = Vec::with_capacity(config.thresholds.len());
    let mut ar = Vec::with_capacity(config.thresholds.len());
    for &t in &config.thresholds {
        let correct = scores.iter().flatten().filter(|&&s| s >= t).count() as f64;
        ap.push(if predicted == 0 { 0.0 } else { correct / predicted as f64 });
        ar.push(correct / dataset.len() as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(GpsTable { thresholds: config.thresholds.clone(), mean_ap: mean(&ap), mean_ar: mean(&ar), ap, ar, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{Correspondence, Pixel};
    use crate::geodesics::build_cache;
    use crate::mesh::EdgeGraph;

    /// Path graph 0 - 1 - 2 with edge lengths `a` and `b`.
    fn path_cache(a: f64, b: f64) -> GeodesicCache {
        let g = EdgeGraph::from_edges(3, &[(0, 1, a), (1, 2, b)]).unwrap();
        build_cache(&g, &[0, 1, 2]).unwrap()
    }

    fn set(image: usize, entries: &[(usize, usize)]) -> CorrespondenceSet {
        CorrespondenceSet {
            image: image.to_string(),
            height: 1,
            width: entries.len(),
            pid: 0,
            cam: 0,
            clothes: 0,
            entries: entries
                .iter()
                .enumerate()
                .map(|(c, &(_, v))| Correspondence { pixel: Pixel::new(0, c), vertex: v })
                .collect(),
            cross_view: Vec::new(),
        }
    }

    fn pred(entries: &[(usize, usize)]) -> VertexMap {
        VertexMap { height: 1, width: entries.len(), data: entries.iter().map(|&(p, _)| Some(p)).collect() }
    }

    #[test]
    fn exact_predictions_score_one() {
        let c = path_cache(1.0, 2.0);
        let e = [(0, 0), (2, 2)];
        assert_eq!(gps(&set(0, &e), &pred(&e), &c, DEFAULT_SIGMA).unwrap(), 1.0);
    }

    #[test]
    fn error_of_sigma() {
        let c = path_cache(0.255, 1.0);
        let e = [(1, 0)];
        let s = gps(&set(0, &e), &pred(&e), &c, 0.255).unwrap();
        assert!((s - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn far_and_exact_average_to_half() {
        let c = path_cache(1e3, 1.0);
        let e = [(0, 0), (1, 0)];
        let s = gps(&set(0, &e), &pred(&e), &c, DEFAULT_SIGMA).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_prediction_is_error() {
        let c = path_cache(1.0, 1.0);
        let mut p = pred(&[(0, 0)]);
        p.data[0] = None;
        assert!(gps(&set(0, &[(0, 0)]), &p, &c, 0.255).is_err());
    }

    #[test]
    fn ap_ar_threshold_counting() {
        // g chosen so GPS = exp(-g^2 / 2 sigma^2) hits 0.6 and 0.9
        let sigma = DEFAULT_SIGMA;
        let g = |s: f64| sigma * (-2.0 * s.ln()).sqrt();
        let c = path_cache(g(0.6), g(0.9));
        let data = vec![
            (set(0, &[(0, 1)]), Some(pred(&[(0, 1)]))),
            (set(1, &[(2, 1)]), Some(pred(&[(2, 1)]))),
            (set(2, &[(0, 0)]), None),
        ];
        let t = gps_ap_ar(&data, &c, &GpsConfig::default()).unwrap();
        assert!((t.scores[0].unwrap() - 0.6).abs() < 1e-12);
        let at = |x: f64| t.thresholds.iter().position(|&y| y == x).unwrap();
        assert_eq!(t.ap[at(0.5)], 1.0);
        assert_eq!(t.ap[at(0.75)], 0.5);
        assert_eq!(t.ap[at(0.95)], 0.0);
        assert_eq!(t.ar[at(0.5)], 2.0 / 3.0);
        assert_eq!(t.ar[at(0.75)], 1.0 / 3.0);
        assert!(t.ap.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn csv_has_percent_rows() {
        let c = path_cache(1.0, 1.0);
        let e = [(0, 0)];
        let t = gps_ap_ar(&[(set(0, &e), Some(pred(&e)))], &c, &GpsConfig::default()).unwrap();
        let csv = t.to_csv();
        let ap = csv.lines().nth(1).unwrap();
        assert!(ap.starts_with("AP,100.0,"));
        assert_eq!(ap.split(',').filter(|x| *x == "100.0").count(), 11);
    }

    #[test]
    fn config_rejects_bad_thresholds() {
        let bad = GpsConfig { thresholds: vec![0.5, 0.5], ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(GpsConfig { sigma: 0.0, ..Default::default() }.validate().is_err());
    }
}
