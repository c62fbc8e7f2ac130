use super::gemm::{gemm, View};
use super::layers::{LayerGrads, LayerParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Intermediates recorded by [`forward`] for one call to [`backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }
}

#[derive(Clone, Debug)]
enum LayerCache {
    Conv {
        geom: ConvGeom,
        /// im2col matrix, `(c·9) × (n·ho·wo)`.
        col: Vec<f64>,
        /// Post-ReLU output, `n × co × ho × wo`.
        out: Vec<f64>,
    },
    Dense {
        /// Input after pooling, `n × f`.
        x: Vec<f64>,
        in_shape: Vec<usize>,
    },
}

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    co: usize,
    stride: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn new(p: &LayerParams, shape: &[usize]) -> Result<Self> {
        let &[n, c, h, w] = shape else {
            return Err(Error::dim(format!(
                "{:?} layer expects a 4-d batch, got shape {shape:?}",
                p.kind
            )));
        };
        if c != p.in_dim() {
            return Err(Error::dim(format!(
                "{:?} layer expects {} channels, got {c}",
                p.kind,
                p.in_dim()
            )));
        }
        let stride = p.kind.stride();
        Ok(ConvGeom {
            n,
            c,
            h,
            w,
            co: p.out_dim(),
            stride,
            ho: (h - 1) / stride + 1,
            wo: (w - 1) / stride + 1,
        })
    }

    fn k(&self) -> usize {
        self.c * 9
    }

    fn plane(&self) -> usize {
        self.ho * self.wo
    }

    fn cols(&self) -> usize {
        self.n * self.plane()
    }
}

fn im2col(x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let cols = g.cols();
    let plane = g.plane();
    let mut col = vec![0.0; g.k() * cols];
    for ci in 0..g.c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ci * 9) + ky * 3 + kx) * cols..][..cols];
                for ni in 0..g.n {
                    let src = &x[(ni * g.c + ci) * g.h * g.w..][..g.h * g.w];
                    let dst = &mut row[ni * plane..][..plane];
                    for oy in 0..g.ho {
                        let iy = (oy * g.stride + ky) as isize - 1;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let src_row = &src[iy as usize * g.w..][..g.w];
                        let dst_row = &mut dst[oy * g.wo..][..g.wo];
                        for (ox, d) in dst_row.iter_mut().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - 1;
                            if ix >= 0 && (ix as usize) < g.w {
                                *d = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    col
}

fn col2im(col: &[f64], g: &ConvGeom) -> Vec<f64> {
    let cols = g.cols();
    let plane = g.plane();
    let mut x = vec![0.0; g.n * g.c * g.h * g.w];
    for ci in 0..g.c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((ci * 9) + ky * 3 + kx) * cols..][..cols];
                for ni in 0..g.n {
                    let dst = &mut x[(ni * g.c + ci) * g.h * g.w..][..g.h * g.w];
                    let src = &row[ni * plane..][..plane];
                    for oy in 0..g.ho {
                        let iy = (oy * g.stride + ky) as isize - 1;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let dst_row = &mut dst[iy as usize * g.w..][..g.w];
                        let src_row = &src[oy * g.wo..][..g.wo];
                        for (ox, s) in src_row.iter().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - 1;
                            if ix >= 0 && (ix as usize) < g.w {
                                dst_row[ix as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

fn conv_forward(p: &LayerParams, x: &Tensor, keep: bool) -> Result<(Tensor, Option<LayerCache>)> {
    let g = ConvGeom::new(p, x.shape())?;
    let col = im2col(x.data(), &g);
    let cols = g.cols();
    let plane = g.plane();
    let mut y = vec![0.0; g.co * cols];
    gemm(
        1.0,
        View::rows(p.weights.data(), g.co, g.k()),
        View::rows(&col, g.k(), cols),
        0.0,
        &mut y,
    );
    let bias = p.bias.data();
    let mut out = vec![0.0; g.n * g.co * plane];
    for o in 0..g.co {
        let yrow = &y[o * cols..][..cols];
        for ni in 0..g.n {
            let dst = &mut out[(ni * g.co + o) * plane..][..plane];
            for (d, &v) in dst.iter_mut().zip(&yrow[ni * plane..][..plane]) {
                let z = v + bias[o];
                *d = if z > 0.0 { z } else { 0.0 };
            }
        }
    }
    let t = Tensor::new(vec![g.n, g.co, g.ho, g.wo], out)?;
    let cache = keep.then(|| LayerCache::Conv {
        geom: g,
        col,
        out: t.data().to_vec(),
    });
    Ok((t, cache))
}

fn dense_forward(p: &LayerParams, x: &Tensor, keep: bool) -> Result<(Tensor, Option<LayerCache>)> {
    let n = x.batch();
    p.output_shape(x.sample_shape())?;
    let f = p.in_dim();
    let o = p.out_dim();
    let pooled = match x.shape() {
        &[_, c, h, w] => {
            let hw = h * w;
            let mut v = vec![0.0; n * c];
            for (i, dst) in v.iter_mut().enumerate() {
                let s: f64 = x.data()[i * hw..][..hw].iter().sum();
                *dst = s / hw as f64;
            }
            v
        }
        _ => x.data().to_vec(),
    };
    let mut y = vec![0.0; n * o];
    gemm(
        1.0,
        View::rows(&pooled, n, f),
        View::rows(p.weights.data(), o, f).t(),
        0.0,
        &mut y,
    );
    for row in y.chunks_mut(o) {
        for (v, b) in row.iter_mut().zip(p.bias.data()) {
            *v += b;
        }
    }
    let cache = keep.then(|| LayerCache::Dense {
        x: pooled,
        in_shape: x.shape().to_vec(),
    });
    Ok((Tensor::new(vec![n, o], y)?, cache))
}

fn run(layers: &[LayerParams], input: &Tensor, keep: bool) -> Result<(Tensor, Vec<LayerCache>)> {
    let mut caches = Vec::with_capacity(if keep { layers.len() } else { 0 });
    let mut cur: Option<Tensor> = None;
    for p in layers {
        p.validate()?;
        let x = cur.as_ref().unwrap_or(input);
        let (y, c) = if p.kind.is_conv() {
            conv_forward(p, x, keep)?
        } else {
            dense_forward(p, x, keep)?
        };
        caches.extend(c);
        cur = Some(y);
    }
    Ok((cur.unwrap_or_else(|| input.clone()), caches))
}

/// Runs `layers` in order over a batch, recording what [`backward`] needs.
/// An empty layer list is the identity.
pub fn forward(layers: &[LayerParams], input: &Tensor) -> Result<(Tensor, ForwardCache)> {
    let (out, caches) = run(layers, input, true)?;
    let cache = ForwardCache {
        input_shape: input.shape().to_vec(),
        output_shape: out.shape().to_vec(),
        layers: caches,
    };
    Ok((out, cache))
}

/// Forward pass without a cache.
pub fn infer(layers: &[LayerParams], input: &Tensor) -> Result<Tensor> {
    Ok(run(layers, input, false)?.0)
}

/// Per-sample output shape of `layers` for a per-sample input shape.
pub fn output_shape(layers: &[LayerParams], input: &[usize]) -> Result<Vec<usize>> {
    layers
        .iter()
        .try_fold(input.to_vec(), |shape, p| p.output_shape(&shape))
}

fn backward_impl(
    layers: &[LayerParams],
    cache: &ForwardCache,
    grad_output: &Tensor,
    want_input: bool,
) -> Result<(Vec<LayerGrads>, Option<Tensor>)> {
    if grad_output.shape() != cache.output_shape.as_slice() {
        return Err(Error::dim(format!(
            "gradient shape {:?} does not match forward output {:?}",
            grad_output.shape(),
            cache.output_shape
        )));
    }
    if layers.len() != cache.layers.len() {
        return Err(Error::dim(format!(
            "cache holds {} layers, {} given",
            cache.layers.len(),
            layers.len()
        )));
    }
    let mut grads = Vec::with_capacity(layers.len());
    let mut g = grad_output.data().to_vec();
    for (idx, (p, lc)) in layers.iter().zip(&cache.layers).enumerate().rev() {
        let need_input = want_input || idx > 0;
        let (lg, gin) = match lc {
            LayerCache::Conv { geom, col, out } => conv_backward(p, geom, col, out, &g, need_input)?,
            LayerCache::Dense { x, in_shape } => dense_backward(p, x, in_shape, &g, need_input)?,
        };
        grads.push(lg);
        if let Some(gin) = gin {
            g = gin;
        }
    }
    grads.reverse();
    let grad_input = if want_input {
        Some(Tensor::new(cache.input_shape.clone(), g)?)
    } else {
        None
    };
    Ok((grads, grad_input))
}

/// Gradients of a scalar loss with respect to every layer's parameters and
/// to the forward input, given the loss gradient at the forward output.
pub fn backward(
    layers: &[LayerParams],
    cache: &ForwardCache,
    grad_output: &Tensor,
) -> Result<(Vec<LayerGrads>, Tensor)> {
    let (grads, gin) = backward_impl(layers, cache, grad_output, true)?;
    Ok((grads, gin.expect("input gradient requested")))
}

/// Parameter gradients only; skips the input gradient of the first layer.
pub(crate) fn backward_params(
    layers: &[LayerParams],
    cache: &ForwardCache,
    grad_output: &Tensor,
) -> Result<Vec<LayerGrads>> {
    Ok(backward_impl(layers, cache, grad_output, false)?.0)
}

fn conv_backward(
    p: &LayerParams,
    g: &ConvGeom,
    col: &[f64],
    out: &[f64],
    grad_out: &[f64],
    need_input: bool,
) -> Result<(LayerGrads, Option<Vec<f64>>)> {
    let cols = g.cols();
    let plane = g.plane();
    let k = g.k();
    // ReLU mask, rearranged to co × (n·plane) to match the im2col layout.
    let mut gmat = vec![0.0; g.co * cols];
    for o in 0..g.co {
        for ni in 0..g.n {
            let base = (ni * g.co + o) * plane;
            let dst = &mut gmat[o * cols + ni * plane..][..plane];
            for ((d, &y), &gy) in dst
                .iter_mut()
                .zip(&out[base..base + plane])
                .zip(&grad_out[base..base + plane])
            {
                if y > 0.0 {
                    *d = gy;
                }
            }
        }
    }
    let mut gw = vec![0.0; g.co * k];
    gemm(
        1.0,
        View::rows(&gmat, g.co, cols),
        View::rows(col, k, cols).t(),
        0.0,
        &mut gw,
    );
    let gb: Vec<f64> = gmat.chunks(cols).map(|r| r.iter().sum()).collect();
    let gin = if need_input {
        let mut gcol = vec![0.0; k * cols];
        gemm(
            1.0,
            View::rows(p.weights.data(), g.co, k).t(),
            View::rows(&gmat, g.co, cols),
            0.0,
            &mut gcol,
        );
        Some(col2im(&gcol, g))
    } else {
        None
    };
    let grads = LayerGrads {
        weights: Tensor::new(p.weights.shape().to_vec(), gw)?,
        bias: Tensor::new(vec![g.co], gb)?,
    };
    Ok((grads, gin))
}

fn dense_backward(
    p: &LayerParams,
    x: &[f64],
    in_shape: &[usize],
    grad_out: &[f64],
    need_input: bool,
) -> Result<(LayerGrads, Option<Vec<f64>>)> {
    let n = in_shape[0];
    let f = p.in_dim();
    let o = p.out_dim();
    let mut gw = vec![0.0; o * f];
    gemm(
        1.0,
        View::rows(grad_out, n, o).t(),
        View::rows(x, n, f),
        0.0,
        &mut gw,
    );
    let mut gb = vec![0.0; o];
    for row in grad_out.chunks(o) {
        for (b, v) in gb.iter_mut().zip(row) {
            *b += v;
        }
    }
    let gin = if need_input {
        let mut gx = vec![0.0; n * f];
        gemm(
            1.0,
            View::rows(grad_out, n, o),
            View::rows(p.weights.data(), o, f),
            0.0,
            &mut gx,
        );
        if let &[_, c, h, w] = in_shape {
            let hw = h * w;
            let scale = 1.0 / hw as f64;
            let mut spread = vec![0.0; n * c * hw];
            for (dst, &v) in spread.chunks_mut(hw).zip(&gx) {
                dst.fill(v * scale);
            }
            Some(spread)
        } else {
            Some(gx)
        }
    } else {
        None
    };
    let grads = LayerGrads {
        weights: Tensor::new(vec![o, f], gw)?,
        bias: Tensor::new(vec![o], gb)?,
    };
    Ok((grads, gin))
}
