use std::path::Path;

use super::{lcp_backward, lcp_project, mha, mha_backward, ConvKernel, LatentEncoder, OutputProjection, TokenMap};
use crate::error::{Error, Result};
use crate::io::{read_tensors, write_tensors, NamedTensor};
use crate::rng::{normal, stage_rng, Rng};

/// Parameters owned by one modality: its LCP encoder and Q/K/V kernels, the
/// output projection of the attention that updates it, and its class token.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityParams {
    pub encoder: LatentEncoder,
    pub wq: ConvKernel,
    pub wk: ConvKernel,
    pub wv: ConvKernel,
    pub out: OutputProjection,
    pub cls: Vec<f64>,
}

impl ModalityParams {
    /// Kernels and class token drawn from `N(0, 1/fan_in)`. The output
    /// projection is zero when `zero_out` is set.
    pub fn random(encoder: LatentEncoder, k: usize, rng: &mut Rng, zero_out: bool) -> Result<Self> {
        let c = encoder.shape().2;
        let kernel = |rng: &mut Rng| {
            let sd = 1.0 / ((k * k * c) as f64).sqrt();
            ConvKernel::new(k, c, c, (0..k * k * c * c).map(|_| sd * normal(rng)).collect())
        };
        let (wq, wk, wv) = (kernel(rng)?, kernel(rng)?, kernel(rng)?);
        let out = if zero_out {
            OutputProjection::zeros(c)
        } else {
            let sd = 1.0 / (c as f64).sqrt();
            OutputProjection::new(c, (0..c * c).map(|_| sd * normal(rng)).collect(), (0..c).map(|_| 0.1 * normal(rng)).collect())?
        };
        let cls = (0..c).map(|_| normal(rng)).collect();
        Ok(Self { encoder, wq, wk, wv, out, cls })
    }

    fn channels(&self) -> usize {
        self.encoder.shape().2
    }

    /// Trainable values in the order `wq, wk, wv, out weight, out bias, cls`.
    pub fn trainable(&self) -> Vec<f64> {
        [self.wq.weights(), self.wk.weights(), self.wv.weights(), &self.out.weight, &self.out.bias, &self.cls].concat()
    }

    pub fn set_trainable(&mut self, values: &[f64]) -> Result<()> {
        let n = self.trainable().len();
        if values.len() != n {
            return Err(Error::Shape(format!("{} trainable values given, {n} expected", values.len())));
        }
        let mut rest = values;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        take(self.wq.weights_mut());
        take(self.wk.weights_mut());
        take(self.wv.weights_mut());
        take(&mut self.out.weight);
        take(&mut self.out.bias);
        take(&mut self.cls);
        Ok(())
    }

    fn validate(&self, shape: (usize, usize, usize)) -> Result<()> {
        let c = shape.2;
        if self.encoder.shape() != shape {
            return Err(Error::Shape(format!("encoder expects {:?}, maps are {shape:?}", self.encoder.shape())));
        }
        for k in [&self.wq, &self.wk, &self.wv] {
            if k.channels() != (c, c) {
                return Err(Error::Shape(format!("kernel channels {:?} for {c}-channel maps", k.channels())));
            }
        }
        if self.out.c != c || self.cls.len() != c {
            return Err(Error::Shape(format!("output projection or class token not sized for {c} channels")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub heads: usize,
    /// Appearance (global RGB) modality.
    pub g: ModalityParams,
    /// Shape modality.
    pub s: ModalityParams,
}

impl FusionParams {
    /// Seeded parameters around the given frozen encoders.
    pub fn random(
        encoders: (LatentEncoder, LatentEncoder),
        heads: usize,
        k: usize,
        seed: u64,
        zero_out: bool,
    ) -> Result<Self> {
        let mut rng = stage_rng(seed, "fusion-init");
        let g = ModalityParams::random(encoders.0, k, &mut rng, zero_out)?;
        let s = ModalityParams::random(encoders.1, k, &mut rng, zero_out)?;
        Ok(Self { heads, g, s })
    }

    /// The same parameters with the modality roles exchanged.
    pub fn swapped(&self) -> Self {
        Self { heads: self.heads, g: self.s.clone(), s: self.g.clone() }
    }

    pub fn validate(&self, shape: (usize, usize, usize)) -> Result<()> {
        let c = shape.2;
        if self.heads == 0 || !c.is_multiple_of(self.heads) {
            return Err(Error::Shape(format!("{c} channels cannot be split into {} heads", self.heads)));
        }
        self.g.validate(shape)?;
        self.s.validate(shape)
    }

    pub fn to_tensors(&self) -> Result<Vec<NamedTensor>> {
        let mut out = vec![NamedTensor::new("heads", vec![1], vec![self.heads as f64])?];
        for (tag, m) in [("g", &self.g), ("s", &self.s)] {
            let (h, w, c) = m.encoder.shape();
            let k = m.wq.size();
            out.push(NamedTensor::new(format!("{tag}.encoder"), vec![c, h, w, c], m.encoder.weights().to_vec())?);
            for (name, kern) in [("wq", &m.wq), ("wk", &m.wk), ("wv", &m.wv)] {
                out.push(NamedTensor::new(format!("{tag}.{name}"), vec![k, k, c, c], kern.weights().to_vec())?);
            }
            out.push(NamedTensor::new(format!("{tag}.out_w"), vec![c, c], m.out.weight.clone())?);
            out.push(NamedTensor::new(format!("{tag}.out_b"), vec![c], m.out.bias.clone())?);
            out.push(NamedTensor::new(format!("{tag}.cls"), vec![c], m.cls.clone())?);
        }
        Ok(out)
    }

    pub fn from_tensors(tensors: &[NamedTensor]) -> Result<Self> {
        let get = |name: &str| {
            tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| Error::Validation(format!("checkpoint lacks tensor {name:?}")))
        };
        let heads = get("heads")?.data[0] as usize;
        let modality = |tag: &str| -> Result<ModalityParams> {
            let enc = get(&format!("{tag}.encoder"))?;
            let [c, h, w, _] = enc.shape[..] else {
                return Err(Error::Shape(format!("{tag}.encoder has shape {:?}", enc.shape)));
            };
            let kernel = |name: &str| -> Result<ConvKernel> {
                let t = get(&format!("{tag}.{name}"))?;
                ConvKernel::new(t.shape[0], c, c, t.data.clone())
            };
            Ok(ModalityParams {
                encoder: LatentEncoder::new((h, w, c), enc.data.clone(), true)?,
                wq: kernel("wq")?,
                wk: kernel("wk")?,
                wv: kernel("wv")?,
                out: OutputProjection::new(c, get(&format!("{tag}.out_w"))?.data.clone(), get(&format!("{tag}.out_b"))?.data.clone())?,
                cls: get(&format!("{tag}.cls"))?.data.clone(),
            })
        };
        let p = Self { heads, g: modality("g")?, s: modality("s")? };
        p.validate(p.g.encoder.shape())?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_tensors(path, &self.to_tensors()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tensors(&read_tensors(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedOutput {
    pub fg: TokenMap,
    pub fs: TokenMap,
    /// Updated class tokens `[g, s]`.
    pub cls: [Vec<f64>; 2],
}

/// One direction: `target` queries (plus its class token) attend to
/// `source` keys and values.
struct Direction {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    fwd: super::MhaOutput,
}

fn direction(target: &TokenMap, tp: &ModalityParams, source: &TokenMap, sp: &ModalityParams, heads: usize) -> Result<Direction> {
    let mut q = lcp_project(target, &tp.encoder, &tp.wq)?;
    q.extend_from_slice(&tp.cls);
    let k = lcp_project(source, &sp.encoder, &sp.wk)?;
    let v = lcp_project(source, &sp.encoder, &sp.wv)?;
    let fwd = mha(&q, &k, &v, tp.channels(), heads, &tp.out)?;
    Ok(Direction { q, k, v, fwd })
}

/// Target query kernel, source key and value kernels, target output
/// weight and bias, target class token.
type DirectionGrads = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

fn residual(x: &[f64], m: &[f64]) -> Vec<f64> {
    x.iter().zip(m).map(|(a, b)| a + b).collect()
}

fn check_pair(fg: &TokenMap, fs: &TokenMap, params: &FusionParams) -> Result<()> {
    if fg.shape() != fs.shape() {
        return Err(Error::Shape(format!("token maps {:?} and {:?} differ", fg.shape(), fs.shape())));
    }
    params.validate(fg.shape())
}

/// Bidirectional cross-attention with residuals:
/// `Fg' = Fg + MHA(Q_g, K_s, V_s)` and `Fs' = Fs + MHA(Q_s, K_g, V_g)`.
/// Both directions read the original maps.
pub fn cross_fuse(fg: &TokenMap, fs: &TokenMap, params: &FusionParams) -> Result<FusedOutput> {
    check_pair(fg, fs, params)?;
    let (h, w, c) = fg.shape();
    let n = h * w;
    let dg = direction(fg, &params.g, fs, &params.s, params.heads)?;
    let ds = direction(fs, &params.s, fg, &params.g, params.heads)?;
    let update = |x: &TokenMap, cls: &[f64], d: &Direction| -> Result<(TokenMap, Vec<f64>)> {
        let (maps, tok) = d.fwd.out.split_at(n * c);
        Ok((TokenMap::new(h, w, c, residual(x.data(), maps))?, residual(cls, tok)))
    };
    let (fg2, cg) = update(fg, &params.g.cls, &dg)?;
    let (fs2, cs) = update(fs, &params.s.cls, &ds)?;
    Ok(FusedOutput { fg: fg2, fs: fs2, cls: [cg, cs] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityGrads {
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
    pub cls: Vec<f64>,
}

impl ModalityGrads {
    /// Same order as [`ModalityParams::trainable`].
    pub fn flatten(&self) -> Vec<f64> {
        [&self.wq[..], &self.wk, &self.wv, &self.out_w, &self.out_b, &self.cls].concat()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionGrads {
    pub fg: Vec<f64>,
    pub fs: Vec<f64>,
    pub g: ModalityGrads,
    pub s: ModalityGrads,
}

/// Gradients of a loss through [`cross_fuse`] given the gradients of its
/// outputs. Encoders are frozen and receive none, but the path through
/// their latents into the maps is included.
pub fn cross_fuse_backward(
    fg: &TokenMap,
    fs: &TokenMap,
    params: &FusionParams,
    d_fg: &[f64],
    d_fs: &[f64],
    d_cls: [&[f64]; 2],
) -> Result<FusionGrads> {
    check_pair(fg, fs, params)?;
    let (h, w, c) = fg.shape();
    let n = h * w;
    if d_fg.len() != n * c || d_fs.len() != n * c || d_cls.iter().any(|d| d.len() != c) {
        return Err(Error::Shape("output gradients do not match the fused shapes".into()));
    }
    let dg = direction(fg, &params.g, fs, &params.s, params.heads)?;
    let ds = direction(fs, &params.s, fg, &params.g, params.heads)?;

    let mut grad_fg = d_fg.to_vec();
    let mut grad_fs = d_fs.to_vec();
    let back = |d: &Direction,
                    tp: &ModalityParams,
                    target: &TokenMap,
                    grad_target: &mut Vec<f64>,
                    sp: &ModalityParams,
                    source: &TokenMap,
                    grad_source: &mut Vec<f64>,
                    d_maps: &[f64],
                    d_tok: &[f64]|
     -> Result<DirectionGrads> {
        let d_out = [d_maps, d_tok].concat();
        let m = mha_backward(&d.q, &d.k, &d.v, c, params.heads, &tp.out, &d.fwd, &d_out)?;
        let (dq_maps, dq_tok) = m.q.split_at(n * c);
        let lq = lcp_backward(target, &tp.encoder, &tp.wq, dq_maps)?;
        let lk = lcp_backward(source, &sp.encoder, &sp.wk, &m.k)?;
        let lv = lcp_backward(source, &sp.encoder, &sp.wv, &m.v)?;
        for (a, b) in grad_target.iter_mut().zip(&lq.input) {
            *a += b;
        }
        for (a, b) in grad_source.iter_mut().zip(lk.input.iter().zip(&lv.input)) {
            *a += b.0 + b.1;
        }
        let d_cls = residual(d_tok, dq_tok);
        Ok((lq.kernel, lk.kernel, lv.kernel, m.weight, m.bias, d_cls))
    };
    let (g_wq, s_wk, s_wv, g_ow, g_ob, g_cls) =
        back(&dg, &params.g, fg, &mut grad_fg, &params.s, fs, &mut grad_fs, d_fg, d_cls[0])?;
    let (s_wq, g_wk, g_wv, s_ow, s_ob, s_cls) =
        back(&ds, &params.s, fs, &mut grad_fs, &params.g, fg, &mut grad_fg, d_fs, d_cls[1])?;
    Ok(FusionGrads {
        fg: grad_fg,
        fs: grad_fs,
        g: ModalityGrads { wq: g_wq, wk: g_wk, wv: g_wv, out_w: g_ow, out_b: g_ob, cls: g_cls },
        s: ModalityGrads { wq: s_wq, wk: s_wk, wv: s_wv, out_w: s_ow, out_b: s_ob, cls: s_cls },
    })
}
