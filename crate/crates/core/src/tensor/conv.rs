//! Convolution, sub-pixel shuffles and the fixed Sobel-magnitude layer.

use super::{BackwardOp, Tensor};
use crate::error::{Error, Result};

/// Horizontal-gradient Sobel kernel (responds to change along a row).
pub const SOBEL_GH: [f32; 9] = [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
/// Vertical-gradient Sobel kernel, the transpose of [`SOBEL_GH`].
pub const SOBEL_GV: [f32; 9] = [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];

/// `C = A·B + beta·C` through matrixmultiply, with explicit strides.
#[allow(clippy::too_many_arguments)]
fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    beta: f32,
    c: &mut [f32],
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    }
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index the kernel touches; `c`
    // is row-major m×n and does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy, Debug)]
struct Geom {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }
    fn cols_w(&self) -> usize {
        self.n * self.ho * self.wo
    }
}

/// Unfold `x` into a `[cin·kh·kw, n·ho·wo]` patch matrix.
fn im2col(x: &[f32], g: &Geom) -> Vec<f32> {
    let cols_w = g.cols_w();
    let hw_out = g.ho * g.wo;
    let mut cols = vec![0f32; g.k() * cols_w];
    for ci in 0..g.cin {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * cols_w..(row + 1) * cols_w];
                for b in 0..g.n {
                    let src = &x[(b * g.cin + ci) * g.h * g.w..][..g.h * g.w];
                    for oy in 0..g.ho {
                        let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let srow = &src[iy as usize * g.w..][..g.w];
                        let drow = &mut dst[b * hw_out + oy * g.wo..][..g.wo];
                        if g.stride == 1 {
                            let lo = g.pad.saturating_sub(kj);
                            let hi = g.wo.min((g.w + g.pad).saturating_sub(kj));
                            if lo < hi {
                                let off = lo + kj - g.pad;
                                drow[lo..hi].copy_from_slice(&srow[off..off + hi - lo]);
                            }
                        } else {
                            for (ox, d) in drow.iter_mut().enumerate() {
                                let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                                if ix >= 0 && ix < g.w as isize {
                                    *d = srow[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add patch gradients back to the image.
fn col2im(cols: &[f32], g: &Geom) -> Vec<f32> {
    let cols_w = g.cols_w();
    let hw_out = g.ho * g.wo;
    let mut x = vec![0f32; g.n * g.cin * g.h * g.w];
    for ci in 0..g.cin {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &cols[row * cols_w..(row + 1) * cols_w];
                for b in 0..g.n {
                    let dst = &mut x[(b * g.cin + ci) * g.h * g.w..][..g.h * g.w];
                    for oy in 0..g.ho {
                        let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        let drow = &mut dst[iy as usize * g.w..][..g.w];
                        let srow = &src[b * hw_out + oy * g.wo..][..g.wo];
                        for (ox, &v) in srow.iter().enumerate() {
                            let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                            if ix >= 0 && ix < g.w as isize {
                                drow[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// `[n, c, hw]` <-> `[c, n·hw]`.
fn swap_batch_channel(src: &[f32], n: usize, c: usize, hw: usize) -> Vec<f32> {
    if n == 1 {
        return src.to_vec();
    }
    let mut out = vec![0f32; src.len()];
    for b in 0..n {
        for ch in 0..c {
            out[ch * n * hw + b * hw..][..hw].copy_from_slice(&src[(b * c + ch) * hw..][..hw]);
        }
    }
    out
}

fn unswap_batch_channel(src: &[f32], n: usize, c: usize, hw: usize) -> Vec<f32> {
    if n == 1 {
        return src.to_vec();
    }
    let mut out = vec![0f32; src.len()];
    for b in 0..n {
        for ch in 0..c {
            out[(b * c + ch) * hw..][..hw].copy_from_slice(&src[ch * n * hw + b * hw..][..hw]);
        }
    }
    out
}

struct Conv2dOp {
    geom: Geom,
}

impl BackwardOp for Conv2dOp {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn backward(&self, inputs: &[Tensor], _: &Tensor, grad: &[f32]) -> Vec<Option<Vec<f32>>> {
        let g = &self.geom;
        let (x, w) = (&inputs[0], &inputs[1]);
        let bias = inputs.get(2);
        let (k, cols_w, hw) = (g.k(), g.cols_w(), g.ho * g.wo);
        let gt = swap_batch_channel(grad, g.n, g.cout, hw);

        let gw = w.requires_grad().then(|| {
            let cols = im2col(&x.data(), g);
            let mut gw = vec![0f32; g.cout * k];
            // dW[co, kk] = Σ_p gt[co, p] · cols[kk, p]
            sgemm(g.cout, cols_w, k, &gt, (cols_w, 1), &cols, (1, cols_w), 0.0, &mut gw);
            gw
        });
        let gx = x.requires_grad().then(|| {
            let mut dcols = vec![0f32; k * cols_w];
            // dcols[kk, p] = Σ_co W[co, kk] · gt[co, p]
            sgemm(k, g.cout, cols_w, &w.data(), (1, k), &gt, (cols_w, 1), 0.0, &mut dcols);
            col2im(&dcols, g)
        });
        let mut out = vec![gx, gw];
        if let Some(b) = bias {
            out.push(b.requires_grad().then(|| {
                gt.chunks(cols_w)
                    .map(|row| row.iter().map(|&v| f64::from(v)).sum::<f64>() as f32)
                    .collect()
            }));
        }
        out
    }
}

/// 2-D cross-correlation. `input: [N, Cin, H, W]`, `weight: [Cout, Cin, kh, kw]`,
/// `bias: [Cout]`. Output extents are `(H + 2·padding − kh)/stride + 1`.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, stride: usize, padding: usize) -> Result<Tensor> {
    let (n, cin, h, w) = input.dims4()?;
    let (cout, wcin, kh, kw) = match *weight.shape() {
        [a, b, c, d] => (a, b, c, d),
        ref s => {
            return Err(Error::shape(format!(
                "conv2d: weight must be [Cout, Cin, kh, kw], got {s:?}"
            )))
        }
    };
    if wcin != cin {
        return Err(Error::shape(format!(
            "conv2d: input has Cin={cin} (dim 1) but weight expects {wcin}"
        )));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::shape(format!("conv2d: kernel {kh}x{kw} must have odd extents")));
    }
    if stride == 0 {
        return Err(Error::invalid("conv2d: stride must be at least 1"));
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(Error::shape(format!(
            "conv2d: input {h}x{w} with padding {padding} is smaller than kernel {kh}x{kw}"
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::shape(format!(
                "conv2d: bias shape {:?}, expected [{cout}]",
                b.shape()
            )));
        }
    }
    let ho = (h + 2 * padding - kh) / stride + 1;
    let wo = (w + 2 * padding - kw) / stride + 1;
    let geom = Geom {
        n,
        cin,
        h,
        w,
        cout,
        kh,
        kw,
        stride,
        pad: padding,
        ho,
        wo,
    };
    let (k, cols_w, hw) = (geom.k(), geom.cols_w(), ho * wo);

    let mut tmp = vec![0f32; cout * cols_w];
    if kh == 1 && kw == 1 && stride == 1 && padding == 0 && n == 1 {
        sgemm(
            cout,
            k,
            cols_w,
            &weight.data(),
            (k, 1),
            &input.data(),
            (cols_w, 1),
            0.0,
            &mut tmp,
        );
    } else {
        let cols = im2col(&input.data(), &geom);
        sgemm(
            cout,
            k,
            cols_w,
            &weight.data(),
            (k, 1),
            &cols,
            (cols_w, 1),
            0.0,
            &mut tmp,
        );
    }
    let mut out = unswap_batch_channel(&tmp, n, cout, hw);
    if let Some(b) = bias {
        let bd = b.data();
        for (plane, &bv) in out.chunks_mut(hw).zip(bd.iter().cycle()) {
            for v in plane {
                *v += bv;
            }
        }
    }

    let mut inputs = vec![input.clone(), weight.clone()];
    if let Some(b) = bias {
        inputs.push(b.clone());
    }
    Ok(Tensor::from_op(vec![n, cout, ho, wo], out, inputs, Conv2dOp { geom }))
}

/// Index of shuffled element `(b, c, y, x)` in the unshuffled layout.
fn shuffle_perm(n: usize, c: usize, h: usize, w: usize, r: usize) -> Vec<usize> {
    // out[b, c, y*r + i, x*r + j] = in[b, c*r*r + i*r + j, y, x]
    let (oh, ow) = (h * r, w * r);
    let mut perm = Vec::with_capacity(n * c * oh * ow);
    for b in 0..n {
        for ch in 0..c {
            for oy in 0..oh {
                let (y, i) = (oy / r, oy % r);
                for ox in 0..ow {
                    let (x, j) = (ox / r, ox % r);
                    let ic = ch * r * r + i * r + j;
                    perm.push(((b * c * r * r + ic) * h + y) * w + x);
                }
            }
        }
    }
    perm
}

struct ShuffleOp {
    /// `out[i] = in[perm[i]]`
    perm: Vec<usize>,
    name: &'static str,
}

impl BackwardOp for ShuffleOp {
    fn name(&self) -> &'static str {
        self.name
    }
    fn backward(&self, _: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let mut gx = vec![0f32; g.len()];
        for (&src, &gv) in self.perm.iter().zip(g) {
            gx[src] = gv;
        }
        vec![Some(gx)]
    }
}

/// Depth-to-space: `[N, C·r², H, W] -> [N, C, r·H, r·W]`.
pub fn pixel_shuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let (n, cr2, h, w) = x.dims4()?;
    if r == 0 || cr2 % (r * r) != 0 {
        return Err(Error::shape(format!(
            "pixel_shuffle: {cr2} channels not divisible by r²={}",
            r * r
        )));
    }
    let c = cr2 / (r * r);
    let perm = shuffle_perm(n, c, h, w, r);
    let out = {
        let d = x.data();
        perm.iter().map(|&i| d[i]).collect()
    };
    Ok(Tensor::from_op(
        vec![n, c, h * r, w * r],
        out,
        vec![x.clone()],
        ShuffleOp {
            perm,
            name: "pixel_shuffle",
        },
    ))
}

/// Space-to-depth, the inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let (n, c, oh, ow) = x.dims4()?;
    if r == 0 || oh % r != 0 || ow % r != 0 {
        return Err(Error::shape(format!(
            "pixel_unshuffle: extent {oh}x{ow} not divisible by r={r}"
        )));
    }
    let (h, w) = (oh / r, ow / r);
    let fwd = shuffle_perm(n, c, h, w, r);
    let mut perm = vec![0usize; fwd.len()];
    for (i, &src) in fwd.iter().enumerate() {
        perm[src] = i;
    }
    let out = {
        let d = x.data();
        perm.iter().map(|&i| d[i]).collect()
    };
    Ok(Tensor::from_op(
        vec![n, c * r * r, h, w],
        out,
        vec![x.clone()],
        ShuffleOp {
            perm,
            name: "pixel_unshuffle",
        },
    ))
}

struct SobelOp {
    gh: Vec<f32>,
    gv: Vec<f32>,
    mag: Vec<f32>,
    kh: [f32; 9],
    kv: [f32; 9],
    dims: (usize, usize, usize, usize),
}

impl BackwardOp for SobelOp {
    fn name(&self) -> &'static str {
        "sobel_magnitude"
    }
    fn backward(&self, _: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let (n, c, h, w) = self.dims;
        let (ho, wo) = (h - 2, w - 2);
        let mut gx = vec![0f32; n * c * h * w];
        for plane in 0..n * c {
            let dst = &mut gx[plane * h * w..][..h * w];
            for y in 0..ho {
                for x in 0..wo {
                    let o = plane * ho * wo + y * wo + x;
                    let m = self.mag[o];
                    if m == 0.0 {
                        continue;
                    }
                    let dh = g[o] * self.gh[o] / m;
                    let dv = g[o] * self.gv[o] / m;
                    for i in 0..3 {
                        for j in 0..3 {
                            dst[(y + i) * w + x + j] += dh * self.kh[i * 3 + j] + dv * self.kv[i * 3 + j];
                        }
                    }
                }
            }
        }
        vec![Some(gx)]
    }
}

/// Per-channel `sqrt(Gh⊙x² + Gv⊙x²)` over the valid region. `kernels` is
/// `[2, 3, 3]` holding the horizontal then vertical kernel; it is treated
/// as a constant. The gradient at a zero magnitude is taken as zero.
pub fn sobel_magnitude(x: &Tensor, kernels: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if kernels.shape() != [2, 3, 3] {
        return Err(Error::shape(format!(
            "sobel_magnitude: kernels must be [2, 3, 3], got {:?}",
            kernels.shape()
        )));
    }
    if h < 3 || w < 3 {
        return Err(Error::shape(format!(
            "sobel_magnitude: input {h}x{w} is smaller than 3x3"
        )));
    }
    let (kh, kv) = {
        let k = kernels.data();
        let mut kh = [0f32; 9];
        let mut kv = [0f32; 9];
        kh.copy_from_slice(&k[..9]);
        kv.copy_from_slice(&k[9..]);
        (kh, kv)
    };
    let (ho, wo) = (h - 2, w - 2);
    let len = n * c * ho * wo;
    let (mut gh, mut gv, mut mag) = (vec![0f32; len], vec![0f32; len], vec![0f32; len]);
    {
        let d = x.data();
        for plane in 0..n * c {
            let src = &d[plane * h * w..][..h * w];
            for y in 0..ho {
                for xx in 0..wo {
                    let (mut a, mut b) = (0f64, 0f64);
                    for i in 0..3 {
                        for j in 0..3 {
                            let v = f64::from(src[(y + i) * w + xx + j]);
                            a += f64::from(kh[i * 3 + j]) * v;
                            b += f64::from(kv[i * 3 + j]) * v;
                        }
                    }
                    let o = plane * ho * wo + y * wo + xx;
                    gh[o] = a as f32;
                    gv[o] = b as f32;
                    mag[o] = (a * a + b * b).sqrt() as f32;
                }
            }
        }
    }
    let out = mag.clone();
    Ok(Tensor::from_op(
        vec![n, c, ho, wo],
        out,
        vec![x.clone()],
        SobelOp {
            gh,
            gv,
            mag,
            kh,
            kv,
            dims: (n, c, h, w),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, leaky_relu, mean, mul, sum};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
        (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()
    }

    /// Direct six-loop cross-correlation in f64.
    #[allow(clippy::too_many_arguments)]
    fn conv_oracle(
        x: &[f32],
        (n, cin, h, w): (usize, usize, usize, usize),
        wt: &[f32],
        (cout, kh, kw): (usize, usize, usize),
        bias: Option<&[f32]>,
        stride: usize,
        pad: usize,
    ) -> Vec<f32> {
        let ho = (h + 2 * pad - kh) / stride + 1;
        let wo = (w + 2 * pad - kw) / stride + 1;
        let mut out = vec![0f32; n * cout * ho * wo];
        for b in 0..n {
            for co in 0..cout {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = bias.map_or(0.0, |bb| f64::from(bb[co]));
                        for ci in 0..cin {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let iy = (oy * stride + i) as isize - pad as isize;
                                    let ix = (ox * stride + j) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    let xv = x[((b * cin + ci) * h + iy as usize) * w + ix as usize];
                                    let wv = wt[((co * cin + ci) * kh + i) * kw + j];
                                    acc += f64::from(xv) * f64::from(wv);
                                }
                            }
                        }
                        out[((b * cout + co) * ho + oy) * wo + ox] = acc as f32;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::new((0..9).map(|v| v as f32).collect(), &[1, 1, 3, 3]).unwrap();
        let w = Tensor::new(vec![1.0], &[1, 1, 1, 1]).unwrap();
        let y = conv2d(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn sobel_kernel_on_ramp() {
        let x = Tensor::new((0..25).map(|i| (i % 5) as f32).collect(), &[1, 1, 5, 5]).unwrap();
        let w = Tensor::new(SOBEL_GH.to_vec(), &[1, 1, 3, 3]).unwrap();
        let y = conv2d(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert!(y.to_vec().iter().all(|&v| v == 8.0));
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = rand_vec(&mut rng, 2 * 6 * 6);
        let w = rand_vec(&mut rng, 3 * 2 * 9);
        let b = rand_vec(&mut rng, 3);
        for (stride, pad) in [(1, 0), (1, 1), (2, 1), (2, 0)] {
            let xt = Tensor::new(x.clone(), &[1, 2, 6, 6]).unwrap();
            let wt = Tensor::new(w.clone(), &[3, 2, 3, 3]).unwrap();
            let bt = Tensor::new(b.clone(), &[3]).unwrap();
            let y = conv2d(&xt, &wt, Some(&bt), stride, pad).unwrap();
            let want = conv_oracle(&x, (1, 2, 6, 6), &w, (3, 3, 3), Some(&b), stride, pad);
            for (a, e) in y.to_vec().iter().zip(&want) {
                assert!((a - e).abs() < 1e-5, "stride {stride} pad {pad}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn batched_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = rand_vec(&mut rng, 3 * 2 * 5 * 7);
        let w = rand_vec(&mut rng, 4 * 2 * 9);
        let xt = Tensor::new(x.clone(), &[3, 2, 5, 7]).unwrap();
        let wt = Tensor::new(w.clone(), &[4, 2, 3, 3]).unwrap();
        let y = conv2d(&xt, &wt, None, 1, 1).unwrap();
        let want = conv_oracle(&x, (3, 2, 5, 7), &w, (4, 3, 3), None, 1, 1);
        for (a, e) in y.to_vec().iter().zip(&want) {
            assert!((a - e).abs() < 1e-5);
        }
    }

    #[test]
    fn shape_errors_name_dimension() {
        let x = Tensor::zeros(&[1, 2, 5, 5]);
        let err = conv2d(&x, &Tensor::zeros(&[1, 3, 3, 3]), None, 1, 1).unwrap_err();
        assert!(err.to_string().contains("Cin"), "{err}");
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 2, 2]), None, 1, 0).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 3, 3]), None, 0, 0).is_err());
    }

    fn pos_vec(rng: &mut ChaCha8Rng, n: usize, lo: f32) -> Vec<f32> {
        (0..n).map(|_| rng.random_range(lo..1.0)).collect()
    }

    // The relative criterion is noise-dominated for gradient components
    // near zero in f32, so inputs are chosen to keep every component O(1):
    // positive weights and a positive probe `r` rule out cancellation.
    #[test]
    fn conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = Tensor::new(pos_vec(&mut rng, 2 * 2 * 9, 0.1), &[2, 2, 3, 3]).unwrap();
        let b = Tensor::new(rand_vec(&mut rng, 2), &[2]).unwrap();
        let x = Tensor::new(pos_vec(&mut rng, 2 * 4 * 4, 0.1), &[1, 2, 4, 4]).unwrap();
        let r = Tensor::new(pos_vec(&mut rng, 2 * 4 * 4, 0.5), &[1, 2, 4, 4]).unwrap();
        let err = grad_check(|x| Ok(sum(&mul(&conv2d(x, &w, Some(&b), 1, 1)?, &r)?)), &x, 1e-3).unwrap();
        assert!(err < 1e-3, "input {err}");
        let err = grad_check(|w| Ok(sum(&mul(&conv2d(&x, w, Some(&b), 1, 1)?, &r)?)), &w, 1e-3).unwrap();
        assert!(err < 1e-3, "weight {err}");
        let err = grad_check(|b| Ok(sum(&mul(&conv2d(&x, &w, Some(b), 1, 1)?, &r)?)), &b, 1e-3).unwrap();
        assert!(err < 1e-3, "bias {err}");

        let r2 = Tensor::new(pos_vec(&mut rng, 2 * 2 * 2, 0.5), &[1, 2, 2, 2]).unwrap();
        let err = grad_check(|x| Ok(sum(&mul(&conv2d(x, &w, None, 2, 1)?, &r2)?)), &x, 1e-3).unwrap();
        assert!(err < 1e-3, "strided {err}");
    }

    #[test]
    fn composite_graph_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Tensor::new(rand_vec(&mut rng, 9), &[1, 1, 3, 3]).unwrap();
        let x = Tensor::new(rand_vec(&mut rng, 16), &[1, 1, 4, 4]).unwrap();
        let err = grad_check(|x| Ok(mean(&leaky_relu(&conv2d(x, &w, None, 1, 1)?, 0.2))), &x, 1e-3).unwrap();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn shuffle_mapping_and_round_trip() {
        let x = Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[1, 4, 1, 1]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::new(rand_vec(&mut rng, 2 * 8 * 3 * 2), &[2, 8, 3, 2]).unwrap();
        let back = pixel_unshuffle(&pixel_shuffle(&x, 2).unwrap(), 2).unwrap();
        assert_eq!(back.shape(), x.shape());
        assert_eq!(back.to_vec(), x.to_vec());
        assert!(pixel_shuffle(&Tensor::zeros(&[1, 6, 2, 2]), 2).is_err());
    }

    #[test]
    fn shuffle_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Tensor::new(rand_vec(&mut rng, 32), &[1, 8, 2, 2]).unwrap();
        let r = Tensor::new(rand_vec(&mut rng, 32), &[1, 2, 4, 4]).unwrap();
        let err = grad_check(|x| Ok(sum(&mul(&pixel_shuffle(x, 2)?, &r)?)), &x, 1e-3).unwrap();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn sobel_magnitude_cases() {
        let k = Tensor::new([SOBEL_GH, SOBEL_GV].concat(), &[2, 3, 3]).unwrap();
        let ramp = Tensor::new((0..25).map(|i| (i % 5) as f32).collect(), &[1, 1, 5, 5]).unwrap();
        assert!(sobel_magnitude(&ramp, &k).unwrap().to_vec().iter().all(|&v| v == 8.0));
        let diag = Tensor::new((0..25).map(|i| (i / 5 + i % 5) as f32).collect(), &[1, 1, 5, 5]).unwrap();
        let want = 8.0 * std::f32::consts::SQRT_2;
        assert!(sobel_magnitude(&diag, &k)
            .unwrap()
            .to_vec()
            .iter()
            .all(|&v| (v - want).abs() < 1e-5));
        let flat = Tensor::full(&[1, 2, 4, 4], 0.3);
        assert!(sobel_magnitude(&flat, &k).unwrap().to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sobel_magnitude_gradient() {
        let k = Tensor::new([SOBEL_GH, SOBEL_GV].concat(), &[2, 3, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f32> = rand_vec(&mut rng, 2 * 5 * 5).iter().map(|v| 0.3 * v).collect();
        let x = Tensor::new(x, &[1, 2, 5, 5]).unwrap();
        let r = Tensor::new(pos_vec(&mut rng, 2 * 3 * 3, 0.5), &[1, 2, 3, 3]).unwrap();
        let err = grad_check(|x| Ok(sum(&mul(&sobel_magnitude(x, &k)?, &r)?)), &x, 1e-3).unwrap();
        assert!(err < 1e-3, "{err}");
    }
}
