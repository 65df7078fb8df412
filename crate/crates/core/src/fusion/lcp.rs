use super::{LatentEncoder, TokenMap};
use crate::error::{Error, Result};

/// Square convolution kernel, stride 1, `'same'` zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    k: usize,
    cin: usize,
    cout: usize,
    /// `[ky][kx][cin][cout]`, row-major.
    weights: Vec<f64>,
}

impl ConvKernel {
    pub fn new(k: usize, cin: usize, cout: usize, weights: Vec<f64>) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::Shape(format!("kernel size {k} must be odd")));
        }
        if cin == 0 || cout == 0 {
            return Err(Error::Shape("kernel with zero channels".into()));
        }
        if weights.len() != k * k * cin * cout {
            return Err(Error::Shape(format!("kernel needs {} weights, got {}", k * k * cin * cout, weights.len())));
        }
        Ok(Self { k, cin, cout, weights })
    }

    /// `1 x 1` identity on `c` channels.
    pub fn identity(c: usize) -> Self {
        let mut w = vec![0.0; c * c];
        for i in 0..c {
            w[i * c + i] = 1.0;
        }
        Self { k: 1, cin: c, cout: c, weights: w }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn channels(&self) -> (usize, usize) {
        (self.cin, self.cout)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn at(&self, ky: usize, kx: usize, i: usize) -> &[f64] {
        let o = ((ky * self.k + kx) * self.cin + i) * self.cout;
        &self.weights[o..o + self.cout]
    }
}

/// Source coordinate for output `pos` and tap `t`, or `None` in the padding.
fn tap(pos: usize, t: usize, r: usize, len: usize) -> Option<usize> {
    (pos + t).checked_sub(r).filter(|&s| s < len)
}

fn conv(x: &[f64], h: usize, w: usize, kernel: &ConvKernel) -> Vec<f64> {
    let (k, cin, cout) = (kernel.k, kernel.cin, kernel.cout);
    let r = k / 2;
    let mut out = vec![0.0; h * w * cout];
    for y in 0..h {
        for xo in 0..w {
            let dst = &mut out[(y * w + xo) * cout..(y * w + xo + 1) * cout];
            for ky in 0..k {
                let Some(sy) = tap(y, ky, r, h) else { continue };
                for kx in 0..k {
                    let Some(sx) = tap(xo, kx, r, w) else { continue };
                    let src = &x[(sy * w + sx) * cin..(sy * w + sx + 1) * cin];
                    for (i, &v) in src.iter().enumerate() {
                        for (d, &wt) in dst.iter_mut().zip(kernel.at(ky, kx, i)) {
                            *d += v * wt;
                        }
                    }
                }
            }
        }
    }
    out
}

fn check(f: &TokenMap, kernel: &ConvKernel) -> Result<()> {
    if kernel.cin != f.channels() {
        return Err(Error::Shape(format!("kernel takes {} channels, map has {}", kernel.cin, f.channels())));
    }
    Ok(())
}

/// `flatten(conv(F + l))` with `l` broadcast to every token. Output is a
/// `(h*w) x cout` token sequence, row-major.
pub fn lcp_project_with_latent(f: &TokenMap, latent: &[f64], kernel: &ConvKernel) -> Result<Vec<f64>> {
    check(f, kernel)?;
    let c = f.channels();
    if latent.len() != c {
        return Err(Error::Shape(format!("latent has {} entries for {c} channels", latent.len())));
    }
    let x: Vec<f64> = f.data().iter().enumerate().map(|(i, v)| v + latent[i % c]).collect();
    let (h, w, _) = f.shape();
    Ok(conv(&x, h, w, kernel))
}

/// Latent convolutional projection with the frozen encoder's latent of `f`.
pub fn lcp_project(f: &TokenMap, encoder: &LatentEncoder, kernel: &ConvKernel) -> Result<Vec<f64>> {
    if !encoder.is_frozen() {
        return Err(Error::Validation("latent encoder must be frozen before projection".into()));
    }
    let l = encoder.encode(f)?;
    lcp_project_with_latent(f, &l, kernel)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpGrads {
    /// Includes the path through the encoder's latent.
    pub input: Vec<f64>,
    pub kernel: Vec<f64>,
}

/// Gradients of a loss through [`lcp_project`] given `d_out` (`(h*w) x cout`).
pub fn lcp_backward(f: &TokenMap, encoder: &LatentEncoder, kernel: &ConvKernel, d_out: &[f64]) -> Result<LcpGrads> {
    check(f, kernel)?;
    let (h, w, c) = f.shape();
    let (k, cout) = (kernel.k, kernel.cout);
    if d_out.len() != h * w * cout {
        return Err(Error::Shape(format!("output gradient has {} entries, expected {}", d_out.len(), h * w * cout)));
    }
    let l = encoder.encode(f)?;
    let x: Vec<f64> = f.data().iter().enumerate().map(|(i, v)| v + l[i % c]).collect();
    let r = k / 2;
    let mut dx = vec![0.0; h * w * c];
    let mut dk = vec![0.0; kernel.weights.len()];
    for y in 0..h {
        for xo in 0..w {
            let g = &d_out[(y * w + xo) * cout..(y * w + xo + 1) * cout];
            for ky in 0..k {
                let Some(sy) = tap(y, ky, r, h) else { continue };
                for kx in 0..k {
                    let Some(sx) = tap(xo, kx, r, w) else { continue };
                    let base = (sy * w + sx) * c;
                    for i in 0..c {
                        let wrow = kernel.at(ky, kx, i);
                        dx[base + i] += wrow.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                        let o = ((ky * k + kx) * c + i) * cout;
                        for (d, gv) in dk[o..o + cout].iter_mut().zip(g) {
                            *d += x[base + i] * gv;
                        }
                    }
                }
            }
        }
    }
    let mut dl = vec![0.0; c];
    for (i, v) in dx.iter().enumerate() {
        dl[i % c] += v;
    }
    for (d, e) in dx.iter_mut().zip(encoder.backward(&dl)) {
        *d += e;
    }
    Ok(LcpGrads { input: dx, kernel: dk })
}
