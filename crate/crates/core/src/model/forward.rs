use super::arch::{Task, NUM_TASKS};
use super::params::{ConvPair, ModelParams};
use crate::diffcore::{conv2d_backward_with, conv2d_forward, ops, ConvKernel, Grid4, Real};
use crate::error::{Error, Result};

/// Network outputs in normalized units.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput<T = f32> {
    /// One `(N, 1, H, W)` grid per regression task, in task order.
    pub regression: Vec<Grid4<T>>,
    /// `(N, 3, H, W)` probabilities over LOS, NLOS and NaN.
    pub class_prob: Grid4<T>,
}

impl<T: Real> ModelOutput<T> {
    pub fn task(&self, task: Task) -> &Grid4<T> {
        if task.is_regression() {
            &self.regression[task.index()]
        } else {
            &self.class_prob
        }
    }
}

#[derive(Clone, Debug)]
struct PairCache<T> {
    pre: Grid4<T>,
    act: Grid4<T>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T = f32> {
    block_inputs: Vec<Grid4<T>>,
    blocks: Vec<PairCache<T>>,
    backbone_out: Grid4<T>,
    heads: Vec<PairCache<T>>,
    output: ModelOutput<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &ModelOutput<T> {
        &self.output
    }

    pub fn backbone_output(&self) -> &Grid4<T> {
        &self.backbone_out
    }
}

fn pair_forward<T: Real>(p: &ConvPair<T>, x: &Grid4<T>) -> Result<(PairCache<T>, Grid4<T>)> {
    let pre = conv2d_forward(x, &p.conv1)?;
    let act = ops::relu(&pre);
    let out = conv2d_forward(&act, &p.conv2)?;
    Ok((PairCache { pre, act }, out))
}

fn check_input<T: Real>(params: &ModelParams<T>, input: &Grid4<T>) -> Result<()> {
    if input.c() != params.config.in_channels {
        return Err(Error::shape(format!(
            "model expects {} input channels, got {}",
            params.config.in_channels,
            input.c()
        )));
    }
    Ok(())
}

/// Runs the network and keeps the activations needed by [`backward`].
pub fn forward_train<T: Real>(params: &ModelParams<T>, input: &Grid4<T>) -> Result<ForwardCache<T>> {
    check_input(params, input)?;
    let mut x = input.clone();
    let mut block_inputs = Vec::with_capacity(params.blocks.len());
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for b in &params.blocks {
        let (cache, y) = pair_forward(b, &x)?;
        let next = if params.config.residual { ops::add(&x, &y)? } else { y };
        block_inputs.push(std::mem::replace(&mut x, next));
        blocks.push(cache);
    }
    let backbone_out = x;

    let mut heads = Vec::with_capacity(NUM_TASKS);
    let mut regression = Vec::with_capacity(NUM_TASKS - 1);
    let mut class_prob = None;
    for (t, h) in Task::ALL.iter().zip(&params.heads) {
        let (cache, y) = pair_forward(h, &backbone_out)?;
        if t.is_regression() {
            regression.push(y);
        } else {
            class_prob = Some(ops::softmax_channelwise(&y));
        }
        heads.push(cache);
    }
    let output = ModelOutput {
        regression,
        class_prob: class_prob.expect("task list contains the classifier"),
    };
    for g in output.regression.iter().chain([&output.class_prob]) {
        g.check_finite("model output")?;
    }
    Ok(ForwardCache {
        block_inputs,
        blocks,
        backbone_out,
        heads,
        output,
    })
}

pub fn forward<T: Real>(params: &ModelParams<T>, input: &Grid4<T>) -> Result<ModelOutput<T>> {
    Ok(forward_train(params, input)?.output)
}

/// Which parameters receive gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradScope {
    All,
    /// Backbone and log-sigma gradients stay zero; nothing is propagated
    /// below the heads.
    HeadsOnly,
}

/// Loss gradients arriving at the network outputs.
#[derive(Clone, Debug)]
pub struct Upstream<T = f32> {
    /// Per task, the gradient with respect to [`ModelOutput::task`]; `None`
    /// when the task does not contribute.
    pub outputs: Vec<Option<Grid4<T>>>,
    pub log_sigma: [T; NUM_TASKS],
}

impl<T: Real> Upstream<T> {
    pub fn none() -> Self {
        Self {
            outputs: vec![None; NUM_TASKS],
            log_sigma: [T::zero(); NUM_TASKS],
        }
    }
}

fn accumulate<T: Real>(dst: &mut Option<Grid4<T>>, g: Grid4<T>) -> Result<()> {
    match dst {
        None => *dst = Some(g),
        Some(d) => *d = ops::add(d, &g)?,
    }
    Ok(())
}

fn store_kernel_grads<T: Real>(dst: &mut ConvKernel<T>, weight: Grid4<T>, bias: Vec<T>) {
    dst.weight = weight;
    dst.bias = bias;
}

/// Back-propagates through a conv-ReLU-conv pair, writing its parameter
/// gradients into `grads`. Returns the input gradient when requested.
fn pair_backward<T: Real>(
    p: &ConvPair<T>,
    cache: &PairCache<T>,
    input: &Grid4<T>,
    grad_out: &Grid4<T>,
    grads: &mut ConvPair<T>,
    need_input: bool,
) -> Result<Option<Grid4<T>>> {
    let g2 = conv2d_backward_with(&cache.act, &p.conv2, grad_out, true)?;
    store_kernel_grads(&mut grads.conv2, g2.weight, g2.bias);
    let g_pre = ops::relu_backward(&cache.pre, &g2.input.expect("requested"))?;
    let g1 = conv2d_backward_with(input, &p.conv1, &g_pre, need_input)?;
    store_kernel_grads(&mut grads.conv1, g1.weight, g1.bias);
    Ok(g1.input)
}

/// Parameter gradients of `sum_t <upstream_t, output_t>` plus the given
/// log-sigma gradients.
pub fn backward<T: Real>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    upstream: &Upstream<T>,
    scope: GradScope,
) -> Result<ModelParams<T>> {
    if upstream.outputs.len() != NUM_TASKS || cache.heads.len() != NUM_TASKS || cache.blocks.len() != params.blocks.len()
    {
        return Err(Error::shape("forward cache or upstream does not match the model"));
    }
    let mut grads = params.zeros_like();
    let full = scope == GradScope::All;
    let mut g_backbone: Option<Grid4<T>> = None;

    for (t, up) in Task::ALL.iter().zip(&upstream.outputs) {
        let Some(up) = up else { continue };
        let out = cache.output.task(*t);
        if up.shape() != out.shape() {
            return Err(Error::shape(format!(
                "upstream gradient for {} is {:?}, output is {:?}",
                t.name(),
                up.shape(),
                out.shape()
            )));
        }
        let g_head_out = if t.is_regression() {
            up.clone()
        } else {
            ops::softmax_channelwise_backward(out, up)?
        };
        let i = t.index();
        let g_in = pair_backward(
            &params.heads[i],
            &cache.heads[i],
            &cache.backbone_out,
            &g_head_out,
            &mut grads.heads[i],
            full,
        )?;
        if let Some(g) = g_in {
            accumulate(&mut g_backbone, g)?;
        }
    }

    if full {
        grads.log_sigma = upstream.log_sigma;
        if let Some(mut g) = g_backbone {
            for i in (0..params.blocks.len()).rev() {
                let g_in = pair_backward(
                    &params.blocks[i],
                    &cache.blocks[i],
                    &cache.block_inputs[i],
                    &g,
                    &mut grads.blocks[i],
                    true,
                )?
                .expect("requested");
                g = if params.config.residual { ops::add(&g, &g_in)? } else { g_in };
            }
        }
    }
    Ok(grads)
}
