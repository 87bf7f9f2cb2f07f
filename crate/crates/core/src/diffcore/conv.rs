use rand::Rng;

use super::grid::{Grid4, Real};
use crate::error::{Error, Result};

pub const KERNEL_SIZE: usize = 3;

/// 3×3, stride 1, zero padding 1: output spatial size equals input.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<T = f32> {
    /// `(C_out, C_in, 3, 3)`
    pub weight: Grid4<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvKernel<T> {
    pub fn zeros(c_out: usize, c_in: usize) -> Self {
        Self {
            weight: Grid4::zeros([c_out, c_in, KERNEL_SIZE, KERNEL_SIZE]),
            bias: vec![T::zero(); c_out],
        }
    }

    /// Uniform fan-in initialization, `U(-b, b)` with `b = sqrt(6 / fan_in)`,
    /// scaled by `gain`. Biases start at zero.
    pub fn fan_in_uniform<R: Rng>(c_out: usize, c_in: usize, gain: f64, rng: &mut R) -> Self {
        let fan_in = (c_in * KERNEL_SIZE * KERNEL_SIZE) as f64;
        let bound = gain * (6.0 / fan_in).sqrt();
        let weight = Grid4::from_fn([c_out, c_in, KERNEL_SIZE, KERNEL_SIZE], |_| {
            T::lit(rng.random_range(-bound..bound))
        });
        Self {
            weight,
            bias: vec![T::zero(); c_out],
        }
    }

    pub fn c_out(&self) -> usize {
        self.weight.n()
    }

    pub fn c_in(&self) -> usize {
        self.weight.c()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn tap(&self, co: usize, ci: usize, ky: usize, kx: usize) -> T {
        self.weight.data()[((co * self.c_in() + ci) * KERNEL_SIZE + ky) * KERNEL_SIZE + kx]
    }
}

/// Row/column ranges for a tap offset `d` in {-1, 0, 1} over length `n`:
/// destination indices `lo..hi` read source index `i + d`.
#[inline]
fn valid_range(n: usize, d: isize) -> (usize, usize) {
    match d {
        -1 => (1.min(n), n),
        1 => (0, n.saturating_sub(1)),
        _ => (0, n),
    }
}

pub fn conv2d_forward<T: Real>(input: &Grid4<T>, kernel: &ConvKernel<T>) -> Result<Grid4<T>> {
    if input.c() != kernel.c_in() {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {}",
            kernel.c_in(),
            input.c()
        )));
    }
    let (n_batch, h, w) = (input.n(), input.h(), input.w());
    let c_out = kernel.c_out();
    let mut out = Grid4::zeros([n_batch, c_out, h, w]);
    for n in 0..n_batch {
        for co in 0..c_out {
            let dst = out.plane_mut(n, co);
            dst.fill(kernel.bias[co]);
            for ci in 0..kernel.c_in() {
                let src = input.plane(n, ci);
                for ky in 0..KERNEL_SIZE {
                    let dy = ky as isize - 1;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..KERNEL_SIZE {
                        let wgt = kernel.tap(co, ci, ky, kx);
                        if wgt == T::zero() {
                            continue;
                        }
                        let dx = kx as isize - 1;
                        let (x0, x1) = valid_range(w, dx);
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let d = &mut dst[y * w + x0..y * w + x1];
                            let sx0 = (x0 as isize + dx) as usize;
                            let s = &src[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                            for (o, &i) in d.iter_mut().zip(s) {
                                *o += wgt * i;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub input: Option<Grid4<T>>,
    pub weight: Grid4<T>,
    pub bias: Vec<T>,
}

/// Gradients of the forward map for upstream gradient `grad_out`.
pub fn conv2d_backward<T: Real>(
    input: &Grid4<T>,
    kernel: &ConvKernel<T>,
    grad_out: &Grid4<T>,
) -> Result<ConvGrads<T>> {
    conv2d_backward_with(input, kernel, grad_out, true)
}

pub(crate) fn conv2d_backward_with<T: Real>(
    input: &Grid4<T>,
    kernel: &ConvKernel<T>,
    grad_out: &Grid4<T>,
    need_input: bool,
) -> Result<ConvGrads<T>> {
    let expect = [input.n(), kernel.c_out(), input.h(), input.w()];
    if input.c() != kernel.c_in() || grad_out.shape() != expect {
        return Err(Error::shape(format!(
            "conv backward: input {:?}, kernel {}->{}, grad_out {:?}",
            input.shape(),
            kernel.c_in(),
            kernel.c_out(),
            grad_out.shape()
        )));
    }
    let (n_batch, h, w) = (input.n(), input.h(), input.w());
    let (c_in, c_out) = (kernel.c_in(), kernel.c_out());
    let mut g_w = Grid4::zeros(kernel.weight.shape());
    let mut g_b = vec![T::zero(); c_out];
    let mut g_in = need_input.then(|| Grid4::zeros(input.shape()));

    for n in 0..n_batch {
        for co in 0..c_out {
            let g = grad_out.plane(n, co);
            g_b[co] += g.iter().copied().sum::<T>();
            for ci in 0..c_in {
                let src = input.plane(n, ci);
                for ky in 0..KERNEL_SIZE {
                    let dy = ky as isize - 1;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..KERNEL_SIZE {
                        let dx = kx as isize - 1;
                        let (x0, x1) = valid_range(w, dx);
                        let sx0 = (x0 as isize + dx) as usize;
                        let len = x1 - x0;
                        let wgt = kernel.tap(co, ci, ky, kx);
                        let mut acc = T::zero();
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let gr = &g[y * w + x0..y * w + x1];
                            let sr = &src[sy * w + sx0..sy * w + sx0 + len];
                            acc += gr.iter().zip(sr).map(|(&a, &b)| a * b).sum::<T>();
                            if let Some(gi) = g_in.as_mut() {
                                let dst = &mut gi.plane_mut(n, ci)[sy * w + sx0..sy * w + sx0 + len];
                                for (d, &gv) in dst.iter_mut().zip(gr) {
                                    *d += wgt * gv;
                                }
                            }
                        }
                        let wi = ((co * c_in + ci) * KERNEL_SIZE + ky) * KERNEL_SIZE + kx;
                        g_w.data_mut()[wi] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: g_in,
        weight: g_w,
        bias: g_b,
    })
}
