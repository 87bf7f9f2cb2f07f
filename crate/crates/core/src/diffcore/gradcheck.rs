use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::conv::{conv2d_backward, conv2d_forward, ConvKernel, KERNEL_SIZE};
use super::grid::Grid4;
use super::ops;
use crate::error::Result;

/// A differentiable computation exposed to the finite-difference checker.
///
/// All differentiable inputs are flattened into one `f64` vector in the order
/// given by [`GradCheckOp::inputs`]; the output is flattened likewise.
pub trait GradCheckOp {
    fn name(&self) -> String;

    /// Named input groups and their lengths.
    fn inputs(&self) -> Vec<(String, usize)>;

    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Gradient of `<grad_out, forward(x)>` with respect to `x`.
    fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Per-group floor on the denominator, relative to the group's largest
    /// analytic gradient magnitude.
    pub relative_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            relative_floor: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub op: String,
    pub max_rel_error: f64,
    pub worst_group: String,
    pub worst_index: usize,
    pub checked: usize,
}

pub fn grad_check(op: &dyn GradCheckOp, seed: u64) -> Result<GradCheckReport> {
    grad_check_with(op, seed, GradCheckOptions::default())
}

/// Compares the analytic gradient of a random linear functional of the
/// output against central differences, element by element.
pub fn grad_check_with(op: &dyn GradCheckOp, seed: u64, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = op.sample_input(&mut rng);
    let y = op.forward(&x)?;
    let r: Vec<f64> = (0..y.len()).map(|_| rng.sample(StandardNormal)).collect();
    let analytic = op.backward(&x, &r)?;
    let functional = |v: &[f64]| -> Result<f64> {
        Ok(op.forward(v)?.iter().zip(&r).map(|(a, b)| a * b).sum())
    };

    let mut report = GradCheckReport {
        op: op.name(),
        max_rel_error: 0.0,
        worst_group: String::new(),
        worst_index: 0,
        checked: 0,
    };
    let mut probe = x.clone();
    let mut offset = 0;
    for (group, len) in op.inputs() {
        let block = &analytic[offset..offset + len];
        let scale = block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = (opts.relative_floor * scale).max(f64::MIN_POSITIVE);
        for (i, &a) in block.iter().enumerate() {
            let k = offset + i;
            probe[k] = x[k] + opts.epsilon;
            let up = functional(&probe)?;
            probe[k] = x[k] - opts.epsilon;
            let down = functional(&probe)?;
            probe[k] = x[k];
            let numeric = (up - down) / (2.0 * opts.epsilon);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_group = group.clone();
                report.worst_index = i;
            }
            report.checked += 1;
        }
        offset += len;
    }
    Ok(report)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn grid(shape: [usize; 4], data: &[f64]) -> Result<Grid4<f64>> {
    Grid4::new(shape, data.to_vec())
}

fn numel(shape: [usize; 4]) -> usize {
    shape.iter().product()
}

fn mask_weights(seed: u64, shape: [usize; 4]) -> Grid4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [n, _, h, w] = shape;
    Grid4::from_fn([n, 1, h, w], |_| match rng.random_range(0..3) {
        0 => 0.01,
        1 => 1e-4,
        _ => 1.0,
    })
}

/// Convolution with respect to input, weights and bias.
#[derive(Clone, Debug)]
pub struct ConvCheck {
    pub input: [usize; 4],
    pub c_out: usize,
    /// Multiplier applied to the analytic weight gradient. Anything other
    /// than 1 is a deliberately broken backward used to test the checker.
    pub weight_grad_factor: f64,
}

impl ConvCheck {
    pub fn new(input: [usize; 4], c_out: usize) -> Self {
        Self {
            input,
            c_out,
            weight_grad_factor: 1.0,
        }
    }

    pub fn corrupted(input: [usize; 4], c_out: usize) -> Self {
        Self {
            weight_grad_factor: 2.0,
            ..Self::new(input, c_out)
        }
    }

    fn weight_shape(&self) -> [usize; 4] {
        [self.c_out, self.input[1], KERNEL_SIZE, KERNEL_SIZE]
    }

    fn unpack(&self, x: &[f64]) -> Result<(Grid4<f64>, ConvKernel<f64>)> {
        let ni = numel(self.input);
        let nw = numel(self.weight_shape());
        let input = grid(self.input, &x[..ni])?;
        let kernel = ConvKernel {
            weight: grid(self.weight_shape(), &x[ni..ni + nw])?,
            bias: x[ni + nw..].to_vec(),
        };
        Ok((input, kernel))
    }
}

impl GradCheckOp for ConvCheck {
    fn name(&self) -> String {
        "conv2d".into()
    }

    fn inputs(&self) -> Vec<(String, usize)> {
        vec![
            ("input".into(), numel(self.input)),
            ("weight".into(), numel(self.weight_shape())),
            ("bias".into(), self.c_out),
        ]
    }

    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        normal_vec(rng, numel(self.input) + numel(self.weight_shape()) + self.c_out)
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (input, kernel) = self.unpack(x)?;
        Ok(conv2d_forward(&input, &kernel)?.into_data())
    }

    fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        let (input, kernel) = self.unpack(x)?;
        let g = grid([self.input[0], self.c_out, self.input[2], self.input[3]], grad_out)?;
        let grads = conv2d_backward(&input, &kernel, &g)?;
        let mut out = grads.input.expect("input gradient requested").into_data();
        out.extend(grads.weight.data().iter().map(|v| v * self.weight_grad_factor));
        out.extend(grads.bias);
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct ReluCheck {
    pub shape: [usize; 4],
}

impl GradCheckOp for ReluCheck {
    fn name(&self) -> String {
        "relu".into()
    }

    fn inputs(&self) -> Vec<(String, usize)> {
        vec![("input".into(), numel(self.shape))]
    }

    /// Keeps samples away from the kink so the difference quotient is exact.
    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        normal_vec(rng, numel(self.shape))
            .into_iter()
            .map(|v: f64| v + 0.1 * v.signum())
            .collect()
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(ops::relu(&grid(self.shape, x)?).into_data())
    }

    fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        Ok(ops::relu_backward(&grid(self.shape, x)?, &grid(self.shape, grad_out)?)?.into_data())
    }
}

#[derive(Clone, Debug)]
pub struct SoftmaxCheck {
    pub shape: [usize; 4],
}

impl GradCheckOp for SoftmaxCheck {
    fn name(&self) -> String {
        "softmax".into()
    }

    fn inputs(&self) -> Vec<(String, usize)> {
        vec![("logits".into(), numel(self.shape))]
    }

    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        normal_vec(rng, numel(self.shape))
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(ops::softmax_channelwise(&grid(self.shape, x)?).into_data())
    }

    fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        let y = ops::softmax_channelwise(&grid(self.shape, x)?);
        Ok(ops::softmax_channelwise_backward(&y, &grid(self.shape, grad_out)?)?.into_data())
    }
}

#[derive(Clone, Debug)]
pub struct AddCheck {
    pub shape: [usize; 4],
}

impl GradCheckOp for AddCheck {
    fn name(&self) -> String {
        "add".into()
    }

    fn inputs(&self) -> Vec<(String, usize)> {
        vec![("a".into(), numel(self.shape)), ("b".into(), numel(self.shape))]
    }

    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        normal_vec(rng, 2 * numel(self.shape))
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = numel(self.shape);
        Ok(ops::add(&grid(self.shape, &x[..n])?, &grid(self.shape, &x[n..])?)?.into_data())
    }

    fn backward(&self, _x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        let (ga, gb) = ops::add_backward(&grid(self.shape, grad_out)?);
        let mut out = ga.into_data();
        out.extend(gb.into_data());
        Ok(out)
    }
}

/// `scale * x + offset` with respect to all three.
#[derive(Clone, Debug)]
pub struct AffineCheck {
    pub shape: [usize; 4],
}

impl GradCheckOp for AffineCheck {
    fn name(&self) -> String {
        "affine".into()
    }

    fn inputs(&self) -> Vec<(String, usize)> {
        vec![
            ("input".into(), numel(self.shape)),
            ("scale".into(), 1),
            ("offset".into(), 1),
        ]
    }

    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        normal_vec(rng, numel(self.shape) + 2)
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = numel(self.shape);
        Ok(ops::scale_affine(&grid(self.shape, &x[..n])?, x[n], x[n + 1]).into_data())
    }

    fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        let n = numel(self.shape);
        let (gx, gs, go) = ops::scale_affine_backward(&grid(self.shape, &x[..n])?, x[n], &grid(self.shape, grad_out)?)?;
        let mut out = gx.into_data();
        out.push(gs);
        out.push(go);
        Ok(out)
    }
}

/// Masked L1 reduction with respect to the prediction; the target and the
/// weights are fixed by `weight_seed`.
#[derive(Clone, Debug)]
pub struct MaskedL1Check {
    pub shape: [usize; 4],
    pub coef: f64,
    pub weight_seed: u64,
}

impl MaskedL1Check {
    fn target(&self) -> Grid4<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.weight_seed ^ 0x7A);
        Grid4::from_fn(self.shape, |_| rng.sample(StandardNormal))
    }
}

impl GradCheckOp for MaskedL1Check {
    fn name(&self) -> String {
        "masked_l1".into()
    }

    fn inputs(&self) -> Vec<(String, usize)> {
        vec![("pred".into(), numel(self.shape))]
    }

    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        normal_vec(rng, numel(self.shape))
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = mask_weights(self.weight_seed, self.shape);
        Ok(vec![ops::reduce_masked_l1(&grid(self.shape, x)?, &self.target(), &w, self.coef)?])
    }

    fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        let w = mask_weights(self.weight_seed, self.shape);
        let g = ops::reduce_masked_l1_backward(&grid(self.shape, x)?, &self.target(), &w, self.coef)?;
        Ok(g.data().iter().map(|v| v * grad_out[0]).collect())
    }
}

/// Masked cross-entropy reduction with respect to the probabilities.
#[derive(Clone, Debug)]
pub struct MaskedCeCheck {
    pub shape: [usize; 4],
    pub coef: f64,
    pub weight_seed: u64,
}

impl MaskedCeCheck {
    const FLOOR: f64 = 1e-12;

    fn onehot(&self) -> Grid4<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.weight_seed ^ 0xCE);
        let [n, c, h, w] = self.shape;
        let mut g = Grid4::zeros(self.shape);
        for b in 0..n {
            for i in 0..h * w {
                let k = rng.random_range(0..c);
                g.plane_mut(b, k)[i] = 1.0;
            }
        }
        g
    }
}

impl GradCheckOp for MaskedCeCheck {
    fn name(&self) -> String {
        "masked_ce".into()
    }

    fn inputs(&self) -> Vec<(String, usize)> {
        vec![("prob".into(), numel(self.shape))]
    }

    fn sample_input(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..numel(self.shape)).map(|_| rng.random_range(0.05..1.0)).collect()
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = mask_weights(self.weight_seed, self.shape);
        Ok(vec![ops::reduce_masked_ce(
            &grid(self.shape, x)?,
            &self.onehot(),
            &w,
            self.coef,
            Self::FLOOR,
        )?])
    }

    fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>> {
        let w = mask_weights(self.weight_seed, self.shape);
        let g = ops::reduce_masked_ce_backward(&grid(self.shape, x)?, &self.onehot(), &w, self.coef, Self::FLOOR)?;
        Ok(g.data().iter().map(|v| v * grad_out[0]).collect())
    }
}

/// Every elementary op at a small shape, as used by the gradient suite.
pub fn builtin_checks(seed: u64) -> Vec<Box<dyn GradCheckOp>> {
    vec![
        Box::new(ConvCheck::new([1, 2, 6, 6], 3)),
        Box::new(ConvCheck::new([2, 3, 5, 4], 2)),
        Box::new(ReluCheck { shape: [1, 3, 4, 4] }),
        Box::new(SoftmaxCheck { shape: [1, 3, 4, 4] }),
        Box::new(AddCheck { shape: [1, 2, 3, 3] }),
        Box::new(AffineCheck { shape: [1, 2, 3, 3] }),
        Box::new(MaskedL1Check {
            shape: [1, 2, 4, 4],
            coef: 0.3,
            weight_seed: seed,
        }),
        Box::new(MaskedCeCheck {
            shape: [1, 3, 4, 4],
            coef: 0.3,
            weight_seed: seed,
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_passes() {
        let r = grad_check(&ConvCheck::new([1, 2, 6, 6], 2), 1).unwrap();
        assert!(r.max_rel_error < 1e-3, "{r:?}");
        assert_eq!(r.checked, 72 + 36 + 2);
    }

    #[test]
    fn softmax_passes() {
        let r = grad_check(&SoftmaxCheck { shape: [1, 3, 4, 4] }, 2).unwrap();
        assert!(r.max_rel_error < 1e-3, "{r:?}");
    }

    #[test]
    fn corrupted_conv_is_caught() {
        let r = grad_check(&ConvCheck::corrupted([1, 2, 6, 6], 2), 1).unwrap();
        assert!(r.max_rel_error > 0.1, "{r:?}");
        assert_eq!(r.worst_group, "weight");
    }

    #[test]
    fn builtins_pass() {
        for op in builtin_checks(5) {
            let r = grad_check(op.as_ref(), 5).unwrap();
            assert!(r.max_rel_error < 1e-3, "{r:?}");
        }
    }
}
