use serde::{Deserialize, Serialize};

use super::Pixel;
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// Projection model. Image rows follow the y axis and columns the x axis.
///
/// Pixel `(r, c)` covers `[r, r + 1) x [c, c + 1)` in continuous image
/// coordinates, so the nearest pixel center to a projection `(y, x)` is
/// `(floor(y), floor(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Camera {
    /// `x_img = scale * x + tx`, `y_img = scale * y + ty`, depth `z`.
    ScaledOrthographic { scale: f64, tx: f64, ty: f64 },
    /// `X = R p + t`; `x_img = focal * X.x / X.z + cx`,
    /// `y_img = focal * X.y / X.z + cy`, depth `X.z`.
    Pinhole { focal: f64, cx: f64, cy: f64, rotation: [[f64; 3]; 3], translation: [f64; 3] },
}

impl Camera {
    pub fn identity_orthographic() -> Self {
        Camera::ScaledOrthographic { scale: 1.0, tx: 0.0, ty: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Camera::ScaledOrthographic { scale, tx, ty } => *scale > 0.0 && [scale, tx, ty].iter().all(|v| v.is_finite()),
            Camera::Pinhole { focal, cx, cy, rotation, translation } => {
                *focal > 0.0
                    && [focal, cx, cy].iter().all(|v| v.is_finite())
                    && rotation.iter().flatten().chain(translation.iter()).all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid camera {self:?}")))
        }
    }

    /// Continuous image position `(y, x)` and depth; `None` when the point
    /// lies behind a pinhole camera.
    pub fn project(&self, p: &[f64; 3]) -> Option<(f64, f64, f64)> {
        match self {
            Camera::ScaledOrthographic { scale, tx, ty } => Some((scale * p[1] + ty, scale * p[0] + tx, p[2])),
            Camera::Pinhole { focal, cx, cy, rotation: r, translation: t } => {
                let cam: [f64; 3] =
                    std::array::from_fn(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + t[i]);
                (cam[2] > 0.0).then(|| (focal * cam[1] / cam[2] + cy, focal * cam[0] / cam[2] + cx, cam[2]))
            }
        }
    }
}

/// Per-vertex projection result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Nearest pixel; meaningful only when `visible`.
    pub pixel: Pixel,
    pub depth: f64,
    /// In front of the camera and inside the image.
    pub visible: bool,
}

pub fn project_vertices(mesh: &TriangleMesh, camera: &Camera, height: usize, width: usize) -> Result<Vec<Projection>> {
    camera.validate()?;
    if height == 0 || width == 0 {
        return Err(Error::Argument(format!("image size {height}x{width} must be positive")));
    }
    Ok(mesh
        .vertices()
        .iter()
        .map(|v| match camera.project(v) {
            Some((y, x, depth)) => {
                let (r, c) = (y.floor(), x.floor());
                let visible = r >= 0.0 && c >= 0.0 && r < height as f64 && c < width as f64;
                let pixel = if visible { Pixel::new(r as usize, c as usize) } else { Pixel::new(0, 0) };
                Projection { pixel, depth, visible }
            }
            None => Projection { pixel: Pixel::new(0, 0), depth: f64::INFINITY, visible: false },
        })
        .collect())
}
