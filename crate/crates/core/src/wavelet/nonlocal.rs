//! Embedded-Gaussian non-local block with a residual connection.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensorio::FeatureMap;

use super::haar::{dwt2, idwt2};
use super::weights::BlockWeights;

/// Row-stochastic `N x N` attention over flattened spatial positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap<T> {
    pub positions: usize,
    pub weights: Vec<T>,
}

impl<T: Scalar> AttentionMap<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.weights[i * self.positions..(i + 1) * self.positions]
    }
}

/// `out[k][i] = sum_c w[k][c] * x[c][i]` for a `rows x cols` weight matrix.
fn project<T: Scalar>(w: &[T], rows: usize, x: &[T], cols: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * n];
    for k in 0..rows {
        let dst = &mut out[k * n..(k + 1) * n];
        for c in 0..cols {
            let wk = w[k * cols + c];
            for (d, &v) in dst.iter_mut().zip(&x[c * n..(c + 1) * n]) {
                *d += wk * v;
            }
        }
    }
    out
}

fn check_shapes<T: Scalar>(x: &FeatureMap<T>, w: &BlockWeights<T>) -> Result<()> {
    w.validate()?;
    if x.channels() != w.channels {
        return Err(Error::Config(format!(
            "feature map has {} channels, weights expect {}",
            x.channels(),
            w.channels
        )));
    }
    Ok(())
}

fn forward<T: Scalar>(x: &FeatureMap<T>, w: &BlockWeights<T>) -> Result<(FeatureMap<T>, AttentionMap<T>)> {
    check_shapes(x, w)?;
    let (c, h, wd) = x.dims();
    let n = h * wd;
    let e = w.embed;
    let xd = x.data();
    let theta = project(&w.theta_w, e, xd, c, n);
    let phi = project(&w.phi_w, e, xd, c, n);
    let g = project(&w.g_w, e, xd, c, n);

    let scale = T::one() / T::from_usize_lossy(e).sqrt();
    let mut attn = vec![T::zero(); n * n];
    for i in 0..n {
        let row = &mut attn[i * n..(i + 1) * n];
        for k in 0..e {
            let t = theta[k * n + i];
            for (r, &p) in row.iter_mut().zip(&phi[k * n..(k + 1) * n]) {
                *r += t * p;
            }
        }
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v * scale));
        let mut sum = T::zero();
        for r in row.iter_mut() {
            *r = (*r * scale - max).exp();
            sum += *r;
        }
        for r in row.iter_mut() {
            *r /= sum;
        }
    }

    // aggregated[k][i] = sum_j g[k][j] * attn[i][j]
    let mut aggregated = vec![T::zero(); e * n];
    for k in 0..e {
        let gk = &g[k * n..(k + 1) * n];
        for i in 0..n {
            aggregated[k * n + i] = gk.iter().zip(&attn[i * n..(i + 1) * n]).map(|(&a, &b)| a * b).sum();
        }
    }
    let y = project(&w.out_w, c, &aggregated, e, n);
    let out: Vec<T> = xd.iter().zip(&y).map(|(&a, &b)| a + b).collect();
    if out.iter().chain(&attn).any(|v| !v.is_finite()) {
        return Err(Error::Numerics("non-finite value in non-local block".into()));
    }
    Ok((
        FeatureMap::new(c, h, wd, out)?,
        AttentionMap {
            positions: n,
            weights: attn,
        },
    ))
}

/// `x + out_w * (g x) * softmax((theta x)^T (phi x) / sqrt(embed))^T`.
pub fn nonlocal_block<T: Scalar>(x: &FeatureMap<T>, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    forward(x, w).map(|(y, _)| y)
}

/// Attention matrix used by [`nonlocal_block`] for `x`.
pub fn attention_map<T: Scalar>(x: &FeatureMap<T>, w: &BlockWeights<T>) -> Result<AttentionMap<T>> {
    forward(x, w).map(|(_, a)| a)
}

/// Non-local block on the LL subband; detail subbands pass through.
pub fn wavelet_nonlocal<T: Scalar>(x: &FeatureMap<T>, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    check_shapes(x, w)?;
    let mut s = dwt2(x)?;
    s.ll = nonlocal_block(&s.ll, w)?;
    idwt2(&s)
}
