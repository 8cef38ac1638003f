//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s. Operations
//! panic on shape mismatches: callers validate user-facing inputs before
//! building a graph, so a mismatch here is a programming error.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::conv::{self, ConvSpec};
use crate::params::{ParamId, ParamStore};
use crate::spatial::{self, ResizeMode};
use crate::Tensor;

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule for an operation defined outside this crate.
///
/// The forward value is computed by the caller and handed to
/// [`Graph::custom`]; `backward` returns one optional gradient per input, in
/// input order.
pub trait CustomOp: Send + Sync {
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Option<Tensor>>;
}

#[derive(Clone, Copy, Debug)]
enum Unary {
    Abs,
    Exp,
    Log,
    Sigmoid,
    Relu,
    Elu,
    LeakyRelu(f64),
    Square,
    Sqrt,
    Softplus,
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine(Var, f64),
    Unary(Var, Unary),
    Sum(Var),
    Mean(Var),
    ChannelMean(Var),
    Concat(Vec<Var>),
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        spec: ConvSpec,
    },
    Diff(Var, bool),
    BoxFilter(Var, usize),
    Resize(Var, ResizeMode),
    Custom(Vec<Var>, Box<dyn CustomOp>),
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Recording of a computation over tensors, differentiable by [`Graph::backward`].
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    bound: RefCell<BTreeMap<ParamId, Var>>,
    trainable: BTreeSet<ParamId>,
}

/// Gradients of a scalar with respect to the leaves of a graph.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Graph in which the given parameters are differentiable; all other
    /// parameters bind as constants.
    pub fn with_trainable(trainable: impl IntoIterator<Item = ParamId>) -> Self {
        Self {
            trainable: trainable.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.push_arc(Arc::new(value), op, requires_grad)
    }

    fn push_arc(&self, value: Arc<Tensor>, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    pub fn value(&self, var: Var) -> Arc<Tensor> {
        Arc::clone(&self.nodes.borrow()[var.0].value)
    }

    pub fn shape(&self, var: Var) -> Vec<usize> {
        self.nodes.borrow()[var.0].value.shape().to_vec()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes.borrow()[var.0].requires_grad
    }

    /// Leaf that receives a gradient.
    pub fn input(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn constant_arc(&self, value: Arc<Tensor>) -> Var {
        self.push_arc(value, Op::Leaf, false)
    }

    /// Constant copy of `var`'s current value (stops gradient flow).
    pub fn detach(&self, var: Var) -> Var {
        self.constant_arc(self.value(var))
    }

    /// Binds a parameter; repeated binds of one id return the same leaf so
    /// that gradients from every use accumulate.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.bound.borrow().get(&id) {
            return v;
        }
        let var = self.push_arc(store.value(id), Op::Leaf, self.trainable.contains(&id));
        self.bound.borrow_mut().insert(id, var);
        var
    }

    /// Gradients of every trainable parameter bound on this graph, by id.
    pub fn param_grads(&self, grads: &Gradients) -> Vec<(ParamId, Tensor)> {
        self.bound
            .borrow()
            .iter()
            .filter(|(id, _)| self.trainable.contains(id))
            .map(|(&id, &var)| {
                let g = grads
                    .get(var)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(self.shape(var)));
                (id, g)
            })
            .collect()
    }

    fn binary(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(va.shape(), vb.shape(), "binary op shape mismatch");
        let out = va.zip_map(&vb, f);
        self.push(out, op, self.needs(&[a, b]))
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// `scale * x + shift`.
    pub fn affine(&self, x: Var, scale: f64, shift: f64) -> Var {
        let out = self.value(x).map(|v| scale * v + shift);
        self.push(out, Op::Affine(x, scale), self.needs(&[x]))
    }

    pub fn scale(&self, x: Var, s: f64) -> Var {
        self.affine(x, s, 0.0)
    }

    pub fn add_scalar(&self, x: Var, s: f64) -> Var {
        self.affine(x, 1.0, s)
    }

    pub fn neg(&self, x: Var) -> Var {
        self.affine(x, -1.0, 0.0)
    }

    fn unary(&self, x: Var, u: Unary) -> Var {
        let f: fn(f64) -> f64 = match u {
            Unary::Abs => f64::abs,
            Unary::Exp => f64::exp,
            Unary::Log => f64::ln,
            Unary::Sigmoid => sigmoid,
            Unary::Relu => |v| v.max(0.0),
            Unary::Elu => |v| if v > 0.0 { v } else { v.exp_m1() },
            Unary::LeakyRelu(_) => |v| v,
            Unary::Square => |v| v * v,
            Unary::Sqrt => f64::sqrt,
            Unary::Softplus => softplus,
        };
        let out = match u {
            Unary::LeakyRelu(slope) => self
                .value(x)
                .map(|v| if v > 0.0 { v } else { slope * v }),
            _ => self.value(x).map(f),
        };
        self.push(out, Op::Unary(x, u), self.needs(&[x]))
    }

    pub fn abs(&self, x: Var) -> Var {
        self.unary(x, Unary::Abs)
    }

    pub fn exp(&self, x: Var) -> Var {
        self.unary(x, Unary::Exp)
    }

    pub fn log(&self, x: Var) -> Var {
        self.unary(x, Unary::Log)
    }

    pub fn sigmoid(&self, x: Var) -> Var {
        self.unary(x, Unary::Sigmoid)
    }

    pub fn relu(&self, x: Var) -> Var {
        self.unary(x, Unary::Relu)
    }

    pub fn elu(&self, x: Var) -> Var {
        self.unary(x, Unary::Elu)
    }

    pub fn leaky_relu(&self, x: Var, slope: f64) -> Var {
        self.unary(x, Unary::LeakyRelu(slope))
    }

    pub fn square(&self, x: Var) -> Var {
        self.unary(x, Unary::Square)
    }

    pub fn sqrt(&self, x: Var) -> Var {
        self.unary(x, Unary::Sqrt)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&self, x: Var) -> Var {
        self.unary(x, Unary::Softplus)
    }

    pub fn sum(&self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x), self.needs(&[x]))
    }

    pub fn mean(&self, x: Var) -> Var {
        let m = self.value(x).mean();
        self.push(Tensor::scalar(m), Op::Mean(x), self.needs(&[x]))
    }

    /// Average over the channel axis, `[C, H, W] -> [1, H, W]`.
    pub fn channel_mean(&self, x: Var) -> Var {
        let out = spatial::channel_mean_forward(&self.value(x));
        self.push(out, Op::ChannelMean(x), self.needs(&[x]))
    }

    /// Concatenation along the channel axis.
    pub fn concat(&self, xs: &[Var]) -> Var {
        let values: Vec<_> = xs.iter().map(|&v| self.value(v)).collect();
        let refs: Vec<&Tensor> = values.iter().map(|v| v.as_ref()).collect();
        let out = spatial::concat_channels(&refs);
        self.push(out, Op::Concat(xs.to_vec()), self.needs(xs))
    }

    pub fn conv2d(&self, input: Var, weight: Var, bias: Option<Var>, spec: ConvSpec) -> Var {
        let b = bias.map(|b| self.value(b));
        let out = conv::conv2d_forward(&self.value(input), &self.value(weight), b.as_deref(), &spec);
        let mut deps = vec![input, weight];
        deps.extend(bias);
        self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                spec,
            },
            self.needs(&deps),
        )
    }

    /// Forward difference along x: `out[.., y, x] = in[.., y, x+1] - in[.., y, x]`.
    pub fn diff_x(&self, x: Var) -> Var {
        let out = spatial::diff_forward(&self.value(x), true);
        self.push(out, Op::Diff(x, true), self.needs(&[x]))
    }

    /// Forward difference along y.
    pub fn diff_y(&self, x: Var) -> Var {
        let out = spatial::diff_forward(&self.value(x), false);
        self.push(out, Op::Diff(x, false), self.needs(&[x]))
    }

    /// Valid-region `k×k` box mean.
    pub fn box_filter(&self, x: Var, k: usize) -> Var {
        let out = spatial::box_filter_forward(&self.value(x), k);
        self.push(out, Op::BoxFilter(x, k), self.needs(&[x]))
    }

    pub fn resize(&self, x: Var, height: usize, width: usize, mode: ResizeMode) -> Var {
        let v = self.value(x);
        let (_, h, w) = v.dims3();
        if (h, w) == (height, width) {
            return x;
        }
        let out = spatial::resize_forward(&v, height, width, mode);
        self.push(out, Op::Resize(x, mode), self.needs(&[x]))
    }

    /// Records an externally computed operation. `output` must be the forward
    /// value of `op` applied to `inputs`.
    pub fn custom(&self, inputs: &[Var], output: Tensor, op: impl CustomOp + 'static) -> Var {
        self.push(output, Op::Custom(inputs.to_vec(), Box::new(op)), self.needs(inputs))
    }

    /// Reverse pass from a one-element `loss`.
    ///
    /// Gradients are retained for leaves only.
    pub fn backward(&self, loss: Var) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[loss.0].value.len(), 1, "backward from non-scalar");
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(nodes[loss.0].value.shape().to_vec(), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let val = |v: Var| &*nodes[v.0].value;
            let mut acc = |v: Var, t: Tensor| {
                if nodes[v.0].requires_grad {
                    match &mut grads[v.0] {
                        Some(e) => e.add_assign(&t),
                        slot => *slot = Some(t),
                    }
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|v| -v));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    acc(*a, g.zip_map(val(*b), |gv, bv| gv * bv));
                    acc(*b, g.zip_map(val(*a), |gv, av| gv * av));
                }
                Op::Div(a, b) => {
                    let vb = val(*b);
                    acc(*a, g.zip_map(vb, |gv, bv| gv / bv));
                    let q = node.value.zip_map(vb, |o, bv| o / bv);
                    acc(*b, g.zip_map(&q, |gv, qv| -gv * qv));
                }
                Op::Affine(x, s) => acc(*x, g.map(|v| v * s)),
                Op::Unary(x, u) => {
                    let input = val(*x);
                    let out = &*node.value;
                    let local = match u {
                        Unary::Abs => input.map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 }),
                        Unary::Exp => out.clone(),
                        Unary::Log => input.map(|v| 1.0 / v),
                        Unary::Sigmoid => out.map(|s| s * (1.0 - s)),
                        Unary::Relu => input.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
                        Unary::Elu => input.zip_map(out, |v, o| if v > 0.0 { 1.0 } else { o + 1.0 }),
                        Unary::LeakyRelu(s) => input.map(|v| if v > 0.0 { 1.0 } else { *s }),
                        Unary::Square => input.map(|v| 2.0 * v),
                        Unary::Sqrt => out.map(|o| 0.5 / o),
                        Unary::Softplus => input.map(sigmoid),
                    };
                    acc(*x, g.zip_map(&local, |a, b| a * b));
                }
                Op::Sum(x) => {
                    let gv = g.item();
                    acc(*x, Tensor::full(val(*x).shape().to_vec(), gv));
                }
                Op::Mean(x) => {
                    let v = val(*x);
                    let gv = g.item() / v.len() as f64;
                    acc(*x, Tensor::full(v.shape().to_vec(), gv));
                }
                Op::ChannelMean(x) => {
                    let (c, _, _) = val(*x).dims3();
                    acc(*x, spatial::channel_mean_backward(&g, c));
                }
                Op::Concat(xs) => {
                    let (_, h, w) = g.dims3();
                    let mut offset = 0;
                    for &x in xs {
                        let (c, _, _) = val(x).dims3();
                        let part = g.data()[offset..offset + c * h * w].to_vec();
                        offset += c * h * w;
                        acc(x, Tensor::new(vec![c, h, w], part).expect("concat grad"));
                    }
                }
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    spec,
                } => {
                    let need_in = nodes[input.0].requires_grad;
                    let need_w = nodes[weight.0].requires_grad;
                    let (gi, gw, gb) =
                        conv::conv2d_backward(val(*input), val(*weight), &g, spec, need_in, need_w);
                    if let Some(gi) = gi {
                        acc(*input, gi);
                    }
                    if let Some(gw) = gw {
                        acc(*weight, gw);
                    }
                    if let Some(b) = bias {
                        acc(*b, gb);
                    }
                }
                Op::Diff(x, axis_x) => acc(*x, spatial::diff_backward(&g, *axis_x)),
                Op::BoxFilter(x, k) => {
                    let (_, h, w) = val(*x).dims3();
                    acc(*x, spatial::box_filter_backward(&g, *k, h, w));
                }
                Op::Resize(x, mode) => {
                    let (_, h, w) = val(*x).dims3();
                    acc(*x, spatial::resize_backward(&g, h, w, *mode));
                }
                Op::Custom(inputs, op) => {
                    let ins: Vec<&Tensor> = inputs.iter().map(|&v| val(v)).collect();
                    let gs = op.backward(&ins, &node.value, &g);
                    assert_eq!(gs.len(), inputs.len(), "custom op gradient count");
                    for (&v, gi) in inputs.iter().zip(gs) {
                        if let Some(gi) = gi {
                            assert_eq!(gi.shape(), val(v).shape(), "custom op gradient shape");
                            acc(v, gi);
                        }
                    }
                }
            }
        }
        Gradients { grads }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}
