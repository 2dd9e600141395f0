use super::{no_grad, Tensor};
use crate::error::{Error, Result};

/// Largest relative disagreement between autodiff and central differences:
/// `max_i |a_i − n_i| / max(|a_i|, |n_i|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f32) -> Result<f32>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let analytic = analytic_grad(&f, x)?;
    grad_check_against(f, &analytic, x, eps)
}

/// Like [`grad_check`] but compares against a caller-supplied gradient.
pub fn grad_check_against<F>(f: F, analytic: &[f32], x: &Tensor, eps: f32) -> Result<f32>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let numeric = numeric_grad(f, analytic.len(), x, eps)?;
    let worst = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| {
            let a = f64::from(a);
            (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
        })
        .fold(0f64, f64::max);
    Ok(worst as f32)
}

/// Scale-aware variant: `max_i |a_i − n_i| / max_i max(|a_i|, |n_i|)`.
///
/// Deep f32 stacks carry ~1e-5 of evaluation noise, which swamps the
/// per-element ratio wherever a component cancels to near zero.
pub fn grad_check_scaled<F>(f: F, x: &Tensor, eps: f32) -> Result<f32>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let analytic = analytic_grad(&f, x)?;
    let numeric = numeric_grad(f, analytic.len(), x, eps)?;
    let mut diff = 0f64;
    let mut scale = 1e-8f64;
    for (&a, &n) in analytic.iter().zip(&numeric) {
        let a = f64::from(a);
        diff = diff.max((a - n).abs());
        scale = scale.max(a.abs()).max(n.abs());
    }
    Ok((diff / scale) as f32)
}

fn analytic_grad<F>(f: &F, x: &Tensor) -> Result<Vec<f32>>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let leaf = Tensor::parameter(x.to_vec(), x.shape())?;
    f(&leaf)?.backward()?;
    leaf.grad().ok_or_else(|| Error::MissingGrad("grad_check input".into()))
}

fn numeric_grad<F>(f: F, len: usize, x: &Tensor, eps: f32) -> Result<Vec<f64>>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if len != x.numel() {
        return Err(Error::shape(format!(
            "grad_check: {len} gradient values for {} inputs",
            x.numel()
        )));
    }
    let _guard = no_grad();
    let base = x.to_vec();
    let mut probe = base.clone();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let hi = base[i] + eps;
        let lo = base[i] - eps;
        probe[i] = hi;
        let fp = f(&Tensor::new(probe.clone(), x.shape())?)?.item_f64();
        probe[i] = lo;
        let fm = f(&Tensor::new(probe.clone(), x.shape())?)?.item_f64();
        probe[i] = base[i];
        out.push((fp - fm) / (f64::from(hi) - f64::from(lo)));
    }
    Ok(out)
}
