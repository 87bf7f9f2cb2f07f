use super::grid::{Grid4, Real};
use crate::error::{Error, Result};

pub fn relu<T: Real>(x: &Grid4<T>) -> Grid4<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// `x` is the ReLU input; the gradient passes where `x > 0`.
pub fn relu_backward<T: Real>(x: &Grid4<T>, grad_out: &Grid4<T>) -> Result<Grid4<T>> {
    x.check_same_shape(grad_out, "relu backward")?;
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Grid4::new(x.shape(), data)
}

/// Softmax over the channel axis, independently per pixel.
pub fn softmax_channelwise<T: Real>(x: &Grid4<T>) -> Grid4<T> {
    let (n_b, c, p) = (x.n(), x.c(), x.plane_len());
    let mut out = Grid4::zeros(x.shape());
    let mut logits = vec![T::zero(); c];
    for n in 0..n_b {
        for i in 0..p {
            for (k, l) in logits.iter_mut().enumerate() {
                *l = x.plane(n, k)[i];
            }
            let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for l in logits.iter_mut() {
                *l = (*l - max).exp();
                total += *l;
            }
            for (k, l) in logits.iter().enumerate() {
                out.plane_mut(n, k)[i] = *l / total;
            }
        }
    }
    out
}

/// `y` is the softmax output: `dx_k = y_k (g_k - sum_j g_j y_j)`.
pub fn softmax_channelwise_backward<T: Real>(y: &Grid4<T>, grad_out: &Grid4<T>) -> Result<Grid4<T>> {
    y.check_same_shape(grad_out, "softmax backward")?;
    let (n_b, c, p) = (y.n(), y.c(), y.plane_len());
    let mut out = Grid4::zeros(y.shape());
    for n in 0..n_b {
        for i in 0..p {
            let mut inner = T::zero();
            for k in 0..c {
                inner += y.plane(n, k)[i] * grad_out.plane(n, k)[i];
            }
            for k in 0..c {
                out.plane_mut(n, k)[i] = y.plane(n, k)[i] * (grad_out.plane(n, k)[i] - inner);
            }
        }
    }
    Ok(out)
}

pub fn add<T: Real>(a: &Grid4<T>, b: &Grid4<T>) -> Result<Grid4<T>> {
    a.check_same_shape(b, "add")?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Grid4::new(a.shape(), data)
}

/// Both operands receive the upstream gradient unchanged.
pub fn add_backward<T: Real>(grad_out: &Grid4<T>) -> (Grid4<T>, Grid4<T>) {
    (grad_out.clone(), grad_out.clone())
}

/// `scale * x + offset`
pub fn scale_affine<T: Real>(x: &Grid4<T>, scale: T, offset: T) -> Grid4<T> {
    x.map(|v| scale * v + offset)
}

/// Returns `(grad_x, grad_scale, grad_offset)`.
pub fn scale_affine_backward<T: Real>(x: &Grid4<T>, scale: T, grad_out: &Grid4<T>) -> Result<(Grid4<T>, T, T)> {
    x.check_same_shape(grad_out, "affine backward")?;
    let gx = grad_out.map(|g| scale * g);
    Ok((gx, x.dot(grad_out), grad_out.sum()))
}

fn check_weights<T: Real>(values: &Grid4<T>, weights: &Grid4<T>) -> Result<()> {
    let [n, _, h, w] = values.shape();
    if weights.shape() != [n, 1, h, w] {
        return Err(Error::shape(format!(
            "weights {:?} do not broadcast over {:?}",
            weights.shape(),
            values.shape()
        )));
    }
    Ok(())
}

/// `coef * sum |w*pred - w*target|`, with per-pixel weights `w` of shape
/// `(N, 1, H, W)` broadcast over channels.
pub fn reduce_masked_l1<T: Real>(pred: &Grid4<T>, target: &Grid4<T>, weights: &Grid4<T>, coef: T) -> Result<T> {
    pred.check_same_shape(target, "masked l1")?;
    check_weights(pred, weights)?;
    let mut total = T::zero();
    for n in 0..pred.n() {
        let wp = weights.plane(n, 0);
        for c in 0..pred.c() {
            for ((&p, &t), &w) in pred.plane(n, c).iter().zip(target.plane(n, c)).zip(wp) {
                total += (w * p - w * t).abs();
            }
        }
    }
    Ok(coef * total)
}

/// Gradient with respect to `pred`; the subgradient at equality is zero.
pub fn reduce_masked_l1_backward<T: Real>(
    pred: &Grid4<T>,
    target: &Grid4<T>,
    weights: &Grid4<T>,
    coef: T,
) -> Result<Grid4<T>> {
    pred.check_same_shape(target, "masked l1 backward")?;
    check_weights(pred, weights)?;
    let mut out = Grid4::zeros(pred.shape());
    for n in 0..pred.n() {
        let wp = weights.plane(n, 0).to_vec();
        for c in 0..pred.c() {
            let p = pred.plane(n, c).to_vec();
            let t = target.plane(n, c);
            for (i, g) in out.plane_mut(n, c).iter_mut().enumerate() {
                let d = wp[i] * p[i] - wp[i] * t[i];
                *g = if d > T::zero() {
                    coef * wp[i]
                } else if d < T::zero() {
                    -coef * wp[i]
                } else {
                    T::zero()
                };
            }
        }
    }
    Ok(out)
}

/// `-coef * sum w * onehot * ln(max(prob, floor))`.
pub fn reduce_masked_ce<T: Real>(
    prob: &Grid4<T>,
    onehot: &Grid4<T>,
    weights: &Grid4<T>,
    coef: T,
    floor: T,
) -> Result<T> {
    prob.check_same_shape(onehot, "masked ce")?;
    check_weights(prob, weights)?;
    let mut total = T::zero();
    for n in 0..prob.n() {
        let wp = weights.plane(n, 0);
        for c in 0..prob.c() {
            for ((&p, &t), &w) in prob.plane(n, c).iter().zip(onehot.plane(n, c)).zip(wp) {
                let wt = w * t;
                if wt != T::zero() {
                    total += wt * p.max(floor).ln();
                }
            }
        }
    }
    Ok(-coef * total)
}

/// Gradient with respect to `prob`; zero where the floor is active.
pub fn reduce_masked_ce_backward<T: Real>(
    prob: &Grid4<T>,
    onehot: &Grid4<T>,
    weights: &Grid4<T>,
    coef: T,
    floor: T,
) -> Result<Grid4<T>> {
    prob.check_same_shape(onehot, "masked ce backward")?;
    check_weights(prob, weights)?;
    let mut out = Grid4::zeros(prob.shape());
    for n in 0..prob.n() {
        let wp = weights.plane(n, 0).to_vec();
        for c in 0..prob.c() {
            let p = prob.plane(n, c).to_vec();
            let t = onehot.plane(n, c).to_vec();
            for (i, g) in out.plane_mut(n, c).iter_mut().enumerate() {
                let wt = wp[i] * t[i];
                *g = if wt != T::zero() && p[i] > floor {
                    -coef * wt / p[i]
                } else {
                    T::zero()
                };
            }
        }
    }
    Ok(out)
}
