//! Elementwise, shape, reduction and dense-layer operations.

use super::{BackwardOp, Tensor};
use crate::error::{Error, Result};

fn same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "{op}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f32, f32) -> f32) -> Vec<f32> {
    a.data().iter().zip(b.data().iter()).map(|(&x, &y)| f(x, y)).collect()
}

struct AddOp;

impl BackwardOp for AddOp {
    fn name(&self) -> &'static str {
        "add"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        inputs.iter().map(|t| t.requires_grad().then(|| g.to_vec())).collect()
    }
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("add", a, b)?;
    let out = zip_map(a, b, |x, y| x + y);
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        out,
        vec![a.clone(), b.clone()],
        AddOp,
    ))
}

struct SubOp;

impl BackwardOp for SubOp {
    fn name(&self) -> &'static str {
        "sub"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        vec![
            inputs[0].requires_grad().then(|| g.to_vec()),
            inputs[1].requires_grad().then(|| g.iter().map(|v| -v).collect()),
        ]
    }
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("sub", a, b)?;
    let out = zip_map(a, b, |x, y| x - y);
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        out,
        vec![a.clone(), b.clone()],
        SubOp,
    ))
}

struct MulOp;

impl BackwardOp for MulOp {
    fn name(&self) -> &'static str {
        "mul"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let (a, b) = (&inputs[0], &inputs[1]);
        let ga = a.requires_grad().then(|| {
            let bd = b.data();
            g.iter().zip(bd.iter()).map(|(g, y)| g * y).collect()
        });
        let gb = b.requires_grad().then(|| {
            let ad = a.data();
            g.iter().zip(ad.iter()).map(|(g, x)| g * x).collect()
        });
        vec![ga, gb]
    }
}

/// Elementwise product.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("mul", a, b)?;
    let out = zip_map(a, b, |x, y| x * y);
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        out,
        vec![a.clone(), b.clone()],
        MulOp,
    ))
}

struct ScaleOp(f32);

impl BackwardOp for ScaleOp {
    fn name(&self) -> &'static str {
        "scale"
    }
    fn backward(&self, _: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        vec![Some(g.iter().map(|v| v * self.0).collect())]
    }
}

pub fn scale(x: &Tensor, factor: f32) -> Tensor {
    let out = x.data().iter().map(|v| v * factor).collect();
    Tensor::from_op(x.shape().to_vec(), out, vec![x.clone()], ScaleOp(factor))
}

pub fn neg(x: &Tensor) -> Tensor {
    scale(x, -1.0)
}

struct SumOp {
    factor: f32,
}

impl BackwardOp for SumOp {
    fn name(&self) -> &'static str {
        "sum"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        vec![Some(vec![g[0] * self.factor; inputs[0].numel()])]
    }
}

/// Sum of all elements, accumulated in f64.
pub fn sum(x: &Tensor) -> Tensor {
    let s: f64 = x.data().iter().map(|&v| f64::from(v)).sum();
    Tensor::from_reduction(s, vec![x.clone()], SumOp { factor: 1.0 })
}

/// Mean of all elements, accumulated in f64.
pub fn mean(x: &Tensor) -> Tensor {
    let n = x.numel().max(1);
    let s: f64 = x.data().iter().map(|&v| f64::from(v)).sum();
    Tensor::from_reduction(s / n as f64, vec![x.clone()], SumOp { factor: 1.0 / n as f32 })
}

struct LeakyReluOp(f32);

impl BackwardOp for LeakyReluOp {
    fn name(&self) -> &'static str {
        "leaky_relu"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let x = inputs[0].data();
        // x == 0 takes the negative-branch slope.
        let gx = g
            .iter()
            .zip(x.iter())
            .map(|(&g, &x)| if x > 0.0 { g } else { g * self.0 })
            .collect();
        vec![Some(gx)]
    }
}

/// `max(x, slope * x)` for `slope` in (0, 1).
pub fn leaky_relu(x: &Tensor, slope: f32) -> Tensor {
    let out = x.data().iter().map(|&v| if v > 0.0 { v } else { v * slope }).collect();
    Tensor::from_op(x.shape().to_vec(), out, vec![x.clone()], LeakyReluOp(slope))
}

struct SoftplusOp;

impl BackwardOp for SoftplusOp {
    fn name(&self) -> &'static str {
        "softplus"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let x = inputs[0].data();
        let gx = g
            .iter()
            .zip(x.iter())
            .map(|(&g, &x)| {
                let x = f64::from(x);
                let sig = if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                };
                (f64::from(g) * sig) as f32
            })
            .collect();
        vec![Some(gx)]
    }
}

/// `ln(1 + e^x)`, evaluated as `max(x, 0) + ln(1 + e^-|x|)`.
pub fn softplus(x: &Tensor) -> Tensor {
    let out = x
        .data()
        .iter()
        .map(|&v| {
            let v = f64::from(v);
            (v.max(0.0) + (-v.abs()).exp().ln_1p()) as f32
        })
        .collect();
    Tensor::from_op(x.shape().to_vec(), out, vec![x.clone()], SoftplusOp)
}

struct ReshapeOp;

impl BackwardOp for ReshapeOp {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(&self, _: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        vec![Some(g.to_vec())]
    }
}

pub fn reshape(x: &Tensor, shape: &[usize]) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    if n != x.numel() {
        return Err(Error::shape(format!(
            "reshape: cannot view {:?} as {shape:?}",
            x.shape()
        )));
    }
    Ok(Tensor::from_op(shape.to_vec(), x.to_vec(), vec![x.clone()], ReshapeOp))
}

/// `[N, ...] -> [N, prod(...)]`.
pub fn flatten(x: &Tensor) -> Result<Tensor> {
    let Some(&n) = x.shape().first() else {
        return Err(Error::shape("flatten: rank-0 tensor"));
    };
    let rest = x.numel().checked_div(n).unwrap_or(0);
    reshape(x, &[n, rest])
}

struct CatOp {
    axis_sizes: Vec<usize>,
    outer: usize,
    inner: usize,
}

impl BackwardOp for CatOp {
    fn name(&self) -> &'static str {
        "cat"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let total: usize = self.axis_sizes.iter().sum();
        let mut offset = 0;
        let mut grads = Vec::with_capacity(inputs.len());
        for (t, &size) in inputs.iter().zip(&self.axis_sizes) {
            if t.requires_grad() {
                let chunk = size * self.inner;
                let mut gi = Vec::with_capacity(self.outer * chunk);
                for o in 0..self.outer {
                    let start = (o * total + offset) * self.inner;
                    gi.extend_from_slice(&g[start..start + chunk]);
                }
                grads.push(Some(gi));
            } else {
                grads.push(None);
            }
            offset += size;
        }
        grads
    }
}

/// Concatenate along `axis`; all other extents must agree.
pub fn cat(tensors: &[&Tensor], axis: usize) -> Result<Tensor> {
    let Some(first) = tensors.first() else {
        return Err(Error::shape("cat: no inputs"));
    };
    let rank = first.rank();
    if axis >= rank {
        return Err(Error::shape(format!("cat: axis {axis} out of range for rank {rank}")));
    }
    for t in tensors {
        if t.rank() != rank {
            return Err(Error::shape(format!("cat: rank {} vs {rank}", t.rank())));
        }
        for d in (0..rank).filter(|&d| d != axis) {
            if t.shape()[d] != first.shape()[d] {
                return Err(Error::shape(format!(
                    "cat: extent of dim {d} differs ({} vs {})",
                    t.shape()[d],
                    first.shape()[d]
                )));
            }
        }
    }
    let outer: usize = first.shape()[..axis].iter().product();
    let inner: usize = first.shape()[axis + 1..].iter().product();
    let axis_sizes: Vec<usize> = tensors.iter().map(|t| t.shape()[axis]).collect();
    let total: usize = axis_sizes.iter().sum();
    let mut out = Vec::with_capacity(outer * total * inner);
    let datas: Vec<_> = tensors.iter().map(|t| t.data()).collect();
    for o in 0..outer {
        for (d, &size) in datas.iter().zip(&axis_sizes) {
            let chunk = size * inner;
            out.extend_from_slice(&d[o * chunk..(o + 1) * chunk]);
        }
    }
    drop(datas);
    let mut shape = first.shape().to_vec();
    shape[axis] = total;
    Ok(Tensor::from_op(
        shape,
        out,
        tensors.iter().map(|t| (*t).clone()).collect(),
        CatOp {
            axis_sizes,
            outer,
            inner,
        },
    ))
}

pub fn concat(a: &Tensor, b: &Tensor, axis: usize) -> Result<Tensor> {
    cat(&[a, b], axis)
}

struct LinearOp {
    n: usize,
    d: usize,
    m: usize,
}

impl BackwardOp for LinearOp {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let (n, d, m) = (self.n, self.d, self.m);
        let (x, w, b) = (&inputs[0], &inputs[1], &inputs[2]);
        let gx = x.requires_grad().then(|| {
            let wd = w.data();
            let mut gx = vec![0f32; n * d];
            for i in 0..n {
                for k in 0..d {
                    let mut acc = 0f64;
                    for j in 0..m {
                        acc += f64::from(g[i * m + j]) * f64::from(wd[j * d + k]);
                    }
                    gx[i * d + k] = acc as f32;
                }
            }
            gx
        });
        let gw = w.requires_grad().then(|| {
            let xd = x.data();
            let mut gw = vec![0f32; m * d];
            for j in 0..m {
                for k in 0..d {
                    let mut acc = 0f64;
                    for i in 0..n {
                        acc += f64::from(g[i * m + j]) * f64::from(xd[i * d + k]);
                    }
                    gw[j * d + k] = acc as f32;
                }
            }
            gw
        });
        let gb = b.requires_grad().then(|| {
            (0..m)
                .map(|j| (0..n).map(|i| f64::from(g[i * m + j])).sum::<f64>() as f32)
                .collect()
        });
        vec![gx, gw, gb]
    }
}

/// `x · wᵀ + b` with `x: [N, D]`, `w: [M, D]`, `b: [M]`.
pub fn linear(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, d) = match *x.shape() {
        [n, d] => (n, d),
        ref s => return Err(Error::shape(format!("linear: input must be [N, D], got {s:?}"))),
    };
    let m = match *weight.shape() {
        [m, wd] if wd == d => m,
        [_, wd] => return Err(Error::shape(format!("linear: input dim D={d} but weight expects {wd}"))),
        ref s => return Err(Error::shape(format!("linear: weight must be [M, D], got {s:?}"))),
    };
    if bias.shape() != [m] {
        return Err(Error::shape(format!(
            "linear: bias shape {:?}, expected [{m}]",
            bias.shape()
        )));
    }
    let (xd, wd, bd) = (x.data(), weight.data(), bias.data());
    let mut out = vec![0f32; n * m];
    for i in 0..n {
        let row = &xd[i * d..(i + 1) * d];
        for j in 0..m {
            let wrow = &wd[j * d..(j + 1) * d];
            let acc: f64 = row.iter().zip(wrow).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
            out[i * m + j] = (acc + f64::from(bd[j])) as f32;
        }
    }
    drop((xd, wd, bd));
    Ok(Tensor::from_op(
        vec![n, m],
        out,
        vec![x.clone(), weight.clone(), bias.clone()],
        LinearOp { n, d, m },
    ))
}

struct MeanAbsDiffOp;

impl BackwardOp for MeanAbsDiffOp {
    fn name(&self) -> &'static str {
        "mean_abs_diff"
    }
    fn backward(&self, inputs: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let (a, b) = (&inputs[0], &inputs[1]);
        let n = a.numel().max(1) as f32;
        let scale = g[0] / n;
        let sign: Vec<f32> = {
            let (ad, bd) = (a.data(), b.data());
            ad.iter()
                .zip(bd.iter())
                .map(|(&x, &y)| {
                    let d = x - y;
                    if d > 0.0 {
                        scale
                    } else if d < 0.0 {
                        -scale
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let gb = b.requires_grad().then(|| sign.iter().map(|v| -v).collect());
        let ga = a.requires_grad().then_some(sign);
        vec![ga, gb]
    }
}

/// `(1/N) Σ |a − b|` over all elements, accumulated in f64.
pub fn mean_abs_diff(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("mean_abs_diff", a, b)?;
    let n = a.numel().max(1);
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
        .sum();
    Ok(Tensor::from_reduction(
        s / n as f64,
        vec![a.clone(), b.clone()],
        MeanAbsDiffOp,
    ))
}

struct SpatialMeanOp {
    hw: usize,
}

impl BackwardOp for SpatialMeanOp {
    fn name(&self) -> &'static str {
        "spatial_mean"
    }
    fn backward(&self, _: &[Tensor], _: &Tensor, g: &[f32]) -> Vec<Option<Vec<f32>>> {
        let inv = 1.0 / self.hw as f32;
        let gx = g.iter().flat_map(|&v| std::iter::repeat_n(v * inv, self.hw)).collect();
        vec![Some(gx)]
    }
}

/// `[N, C, H, W] -> [N, C]`, averaging over each plane.
pub fn spatial_mean(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let hw = h * w;
    if hw == 0 {
        return Err(Error::shape("spatial_mean: empty spatial extent"));
    }
    let out = x
        .data()
        .chunks(hw)
        .map(|p| (p.iter().map(|&v| f64::from(v)).sum::<f64>() / hw as f64) as f32)
        .collect();
    Ok(Tensor::from_op(vec![n, c], out, vec![x.clone()], SpatialMeanOp { hw }))
}
