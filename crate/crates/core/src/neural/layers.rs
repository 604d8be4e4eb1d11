//! Dense and valid-padding 2-D convolution kernels with analytic gradients.
//! Weights are row-major: dense `[out][in]`, conv `[out][in][k][k]`.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.kernel) / self.stride + 1
    }

    pub fn out_len(&self) -> usize {
        self.out_channels * self.out_h() * self.out_w()
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }
}

/// Dot product with four independent partial sums.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        s[0] += x[0] * y[0];
        s[1] += x[1] * y[1];
        s[2] += x[2] * y[2];
        s[3] += x[3] * y[3];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (d, &v) in y.iter_mut().zip(x) {
        *d += alpha * v;
    }
}

pub fn dense_forward(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, y) in out.iter_mut().enumerate() {
        *y = b[o] + dot(&w[o * n_in..(o + 1) * n_in], x);
    }
}

/// Accumulates `dw`, `db` and (optionally) overwrites `dx`.
pub fn dense_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n_in = x.len();
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        db[o] += g;
        axpy(g, x, &mut dw[o * n_in..(o + 1) * n_in]);
    }
    if let Some(dx) = dx {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for (o, &g) in dy.iter().enumerate() {
            if g != 0.0 {
                axpy(g, &w[o * n_in..(o + 1) * n_in], dx);
            }
        }
    }
}

/// Patch matrix `[out position][in channel][ky][kx]`.
fn im2col(geom: &ConvGeom, x: &[f64]) -> Vec<f64> {
    let (oh, ow, k) = (geom.out_h(), geom.out_w(), geom.kernel);
    let plane = geom.in_h * geom.in_w;
    let patch = geom.in_channels * k * k;
    let mut cols = vec![0.0; oh * ow * patch];
    for oy in 0..oh {
        for ox in 0..ow {
            let dst = &mut cols[(oy * ow + ox) * patch..(oy * ow + ox + 1) * patch];
            for c in 0..geom.in_channels {
                for ky in 0..k {
                    let src = c * plane + (oy * geom.stride + ky) * geom.in_w + ox * geom.stride;
                    let at = (c * k + ky) * k;
                    dst[at..at + k].copy_from_slice(&x[src..src + k]);
                }
            }
        }
    }
    cols
}

pub fn conv_forward(geom: &ConvGeom, w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_pos = geom.out_h() * geom.out_w();
    let patch = geom.in_channels * geom.kernel * geom.kernel;
    let cols = im2col(geom, x);
    for o in 0..geom.out_channels {
        let wrow = &w[o * patch..(o + 1) * patch];
        for p in 0..n_pos {
            out[o * n_pos + p] = b[o] + dot(wrow, &cols[p * patch..(p + 1) * patch]);
        }
    }
}

/// Accumulates `dw`, `db` and (optionally) overwrites `dx`.
pub fn conv_backward(
    geom: &ConvGeom,
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let (oh, ow, k) = (geom.out_h(), geom.out_w(), geom.kernel);
    let n_pos = oh * ow;
    let patch = geom.in_channels * k * k;
    let cols = im2col(geom, x);
    let mut dcols = dx.as_ref().map(|_| vec![0.0; n_pos * patch]);
    for o in 0..geom.out_channels {
        let wrow = &w[o * patch..(o + 1) * patch];
        for p in 0..n_pos {
            let g = dy[o * n_pos + p];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            axpy(g, &cols[p * patch..(p + 1) * patch], &mut dw[o * patch..(o + 1) * patch]);
            if let Some(dc) = dcols.as_mut() {
                axpy(g, wrow, &mut dc[p * patch..(p + 1) * patch]);
            }
        }
    }
    if let (Some(dx), Some(dc)) = (dx, dcols) {
        dx.iter_mut().for_each(|v| *v = 0.0);
        let plane = geom.in_h * geom.in_w;
        for oy in 0..oh {
            for ox in 0..ow {
                let src = &dc[(oy * ow + ox) * patch..(oy * ow + ox + 1) * patch];
                for c in 0..geom.in_channels {
                    for ky in 0..k {
                        let at = c * plane + (oy * geom.stride + ky) * geom.in_w + ox * geom.stride;
                        let from = (c * k + ky) * k;
                        for (d, &v) in dx[at..at + k].iter_mut().zip(&src[from..from + k]) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
}

pub fn tanh_inplace(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

/// `dy * (1 - y^2)` for `y = tanh(x)`, in place on `dy`.
pub fn tanh_backward(y: &[f64], dy: &mut [f64]) {
    for (d, &t) in dy.iter_mut().zip(y) {
        *d *= 1.0 - t * t;
    }
}
