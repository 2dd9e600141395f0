//! Dense `f32` tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheap reference-counted handle. Operations on tensors
//! that require gradients record a backward node holding their inputs; the
//! graph is therefore acyclic by construction and is freed when the last
//! handle to its output goes away. [`Tensor::backward`] walks the graph from
//! a scalar loss and accumulates `d(loss)/d(leaf)` into every reachable leaf
//! that requires gradients. Calling it twice without clearing the leaves
//! accumulates twice.
//!
//! There is no broadcasting: every shape alignment is explicit, bias-add
//! inside [`conv2d`] and [`linear`] being the only exception.

mod conv;
mod gradcheck;
mod ops;
mod optim;

pub use conv::{conv2d, pixel_shuffle, pixel_unshuffle, sobel_magnitude, SOBEL_GH, SOBEL_GV};
pub use gradcheck::{grad_check, grad_check_against, grad_check_scaled};
pub use ops::{
    add, cat, concat, flatten, leaky_relu, linear, mean, mean_abs_diff, mul, neg, reshape, scale, softplus,
    spatial_mean, sub, sum,
};
pub use optim::{adam_step, clip_grad_norm, AdamConfig, AdamState, WeightAverage};

use std::cell::{Cell, Ref, RefCell};
use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Disables graph recording on this thread until dropped.
pub struct NoGradGuard {
    prev: bool,
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.prev));
    }
}

/// Run the following code without recording backward nodes.
pub fn no_grad() -> NoGradGuard {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    NoGradGuard { prev }
}

pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Backward rule of one recorded operation.
pub(crate) trait BackwardOp {
    fn name(&self) -> &'static str;

    /// Gradients with respect to each input, in input order. Entries for
    /// inputs that do not require gradients may be `None`.
    fn backward(&self, inputs: &[Tensor], output: &Tensor, grad: &[f32]) -> Vec<Option<Vec<f32>>>;
}

struct Node {
    op: Box<dyn BackwardOp>,
    inputs: Vec<Tensor>,
}

struct Inner {
    shape: Vec<usize>,
    data: RefCell<Vec<f32>>,
    grad: RefCell<Option<Vec<f32>>>,
    requires_grad: bool,
    node: Option<Node>,
    /// f64 accumulator of a scalar reduction, before rounding to f32.
    precise: Option<f64>,
}

#[derive(Clone)]
pub struct Tensor(Rc<Inner>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.op_name())
            .finish()
    }
}

impl Tensor {
    fn leaf_unchecked(data: Vec<f32>, shape: Vec<usize>, requires_grad: bool) -> Self {
        Tensor(Rc::new(Inner {
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad,
            node: None,
            precise: None,
        }))
    }

    /// Constant tensor (no gradient tracking).
    pub fn new(data: Vec<f32>, shape: &[usize]) -> Result<Self> {
        Self::leaf(data, shape, false)
    }

    /// Leaf tensor, optionally tracked.
    pub fn leaf(data: Vec<f32>, shape: &[usize], requires_grad: bool) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} holds {n} elements but {} were given",
                data.len()
            )));
        }
        Ok(Self::leaf_unchecked(data, shape.to_vec(), requires_grad))
    }

    /// Trainable leaf.
    pub fn parameter(data: Vec<f32>, shape: &[usize]) -> Result<Self> {
        Self::leaf(data, shape, true)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let n = shape.iter().product();
        Self::leaf_unchecked(vec![value; n], shape.to_vec(), false)
    }

    pub fn scalar(value: f32) -> Self {
        Self::leaf_unchecked(vec![value], vec![1], false)
    }

    /// Output of a recorded operation. A node is attached only when grad
    /// mode is on and some input requires gradients.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<f32>,
        inputs: Vec<Tensor>,
        op: impl BackwardOp + 'static,
    ) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let tracked = is_grad_enabled() && inputs.iter().any(Tensor::requires_grad);
        let node = tracked.then(|| Node {
            op: Box::new(op),
            inputs,
        });
        Tensor(Rc::new(Inner {
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad: tracked,
            node,
            precise: None,
        }))
    }

    /// Scalar reduction output that remembers its f64 accumulator.
    pub(crate) fn from_reduction(value: f64, inputs: Vec<Tensor>, op: impl BackwardOp + 'static) -> Tensor {
        let t = Self::from_op(vec![1], vec![value as f32], inputs, op);
        let mut inner = Rc::into_inner(t.0).expect("fresh tensor is unshared");
        inner.precise = Some(value);
        Tensor(Rc::new(inner))
    }

    fn id(&self) -> *const Inner {
        Rc::as_ptr(&self.0)
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.shape.iter().product()
    }

    /// `(N, C, H, W)` of a rank-4 tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match *self.shape() {
            [n, c, h, w] => Ok((n, c, h, w)),
            ref s => Err(Error::shape(format!("expected a 4-D tensor, got shape {s:?}"))),
        }
    }

    pub fn data(&self) -> Ref<'_, Vec<f32>> {
        self.0.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.0.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f32 {
        debug_assert_eq!(self.numel(), 1, "item() on shape {:?}", self.shape());
        self.0.data.borrow()[0]
    }

    /// Like [`Tensor::item`], but reductions report their f64 accumulator.
    pub fn item_f64(&self) -> f64 {
        self.0.precise.unwrap_or_else(|| f64::from(self.item()))
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.node.is_none()
    }

    pub fn op_name(&self) -> Option<&'static str> {
        self.0.node.as_ref().map(|n| n.op.name())
    }

    pub fn grad(&self) -> Option<Vec<f32>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    pub(crate) fn take_grad(&self) -> Option<Vec<f32>> {
        self.0.grad.borrow_mut().take()
    }

    pub(crate) fn with_grad_mut<R>(&self, f: impl FnOnce(Option<&mut Vec<f32>>) -> R) -> R {
        f(self.0.grad.borrow_mut().as_mut())
    }

    /// Copy of the values with no history.
    pub fn detach(&self) -> Tensor {
        Self::leaf_unchecked(self.to_vec(), self.0.shape.clone(), false)
    }

    /// Overwrite a leaf's values in place (optimizers, checkpoint loading).
    pub fn set_data(&self, data: Vec<f32>) -> Result<()> {
        if !self.is_leaf() {
            return Err(Error::invalid("set_data on a non-leaf tensor"));
        }
        if data.len() != self.numel() {
            return Err(Error::shape(format!(
                "set_data: {} values for shape {:?}",
                data.len(),
                self.shape()
            )));
        }
        *self.0.data.borrow_mut() = data;
        Ok(())
    }

    pub(crate) fn update_data(&self, f: impl FnOnce(&mut [f32])) {
        f(&mut self.0.data.borrow_mut());
    }

    /// Reverse post-order is a topological order (outputs first).
    fn topo_order(&self) -> Vec<Tensor> {
        let mut visited = HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(node) = &t.0.node {
                for input in &node.inputs {
                    if input.requires_grad() && !visited.contains(&input.id()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }

    /// Accumulate `d(self)/d(leaf)` into every tracked leaf reachable from
    /// this scalar.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Err(Error::invalid(
                "backward: loss does not depend on any tensor that requires grad",
            ));
        }
        let order = self.topo_order();
        let mut grads: HashMap<*const Inner, Vec<f32>> = HashMap::new();
        grads.insert(self.id(), vec![1.0]);
        for t in order.iter().rev() {
            let Some(g) = grads.remove(&t.id()) else {
                continue;
            };
            match &t.0.node {
                Some(node) => {
                    let input_grads = node.op.backward(&node.inputs, t, &g);
                    debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}", node.op.name());
                    for (input, ig) in node.inputs.iter().zip(input_grads) {
                        let Some(ig) = ig else { continue };
                        if !input.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(ig.len(), input.numel(), "{}", node.op.name());
                        match grads.entry(input.id()) {
                            Entry::Occupied(mut e) => add_into(e.get_mut(), &ig),
                            Entry::Vacant(e) => {
                                e.insert(ig);
                            }
                        }
                    }
                }
                None => {
                    let mut slot = t.0.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => add_into(acc, &g),
                        None => *slot = Some(g),
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn add_into(acc: &mut [f32], g: &[f32]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// A named trainable tensor, e.g. `gen.rrdb0.rdb1.conv1.weight`.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, tensor: Tensor) -> Self {
        Self {
            name: name.into(),
            tensor,
        }
    }
}
