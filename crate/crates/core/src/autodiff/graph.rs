use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use super::Tensor;
use crate::error::{Error, Result};

/// Adjoint rule of a recorded primitive.
///
/// Receives the gradient flowing into the primitive's output and a mask of
/// which inputs need a gradient; returns one entry per input, in order.
pub type AdjointFn = Box<dyn Fn(&[f64], &[bool]) -> Vec<Option<Vec<f64>>>>;

struct Node {
    op: &'static str,
    value: Rc<Tensor>,
    inputs: Vec<usize>,
    adjoint: Option<AdjointFn>,
    requires_grad: bool,
    is_leaf: bool,
}

/// Define-by-run computation record.
///
/// Nodes are appended in execution order, so the record is topologically
/// sorted by construction. Build a fresh graph for every evaluation.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nodes = self.graph.nodes.borrow();
        let n = &nodes[self.id];
        write!(f, "Var#{}({}, shape={:?})", self.id, n.op, n.value.shape())
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Leaf that receives a gradient in [`Graph::backward`].
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(value, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(value, false)
    }

    pub fn scalar(&self, v: f64) -> Var<'_> {
        self.constant(Tensor::scalar(v))
    }

    fn push_leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op: "leaf",
            value: Rc::new(value),
            inputs: Vec::new(),
            adjoint: None,
            requires_grad,
            is_leaf: true,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    /// Records a primitive. The adjoint is dropped when no input is tracked.
    pub fn record<'g>(
        &'g self,
        op: &'static str,
        inputs: &[Var<'g>],
        value: Tensor,
        adjoint: AdjointFn,
    ) -> Var<'g> {
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = inputs.iter().any(|v| {
            debug_assert!(std::ptr::eq(v.graph, self), "mixing graphs");
            nodes[v.id].requires_grad
        });
        nodes.push(Node {
            op,
            value: Rc::new(value),
            inputs: inputs.iter().map(|v| v.id).collect(),
            adjoint: requires_grad.then_some(adjoint),
            requires_grad,
            is_leaf: false,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Names of the recorded primitives that carry a gradient.
    pub fn tracked_ops(&self) -> std::collections::BTreeSet<&'static str> {
        self.nodes
            .borrow()
            .iter()
            .filter(|n| n.requires_grad && !n.is_leaf)
            .map(|n| n.op)
            .collect()
    }

    /// Reverse sweep from a scalar root; returns d(root)/d(leaf) for every
    /// tracked leaf reachable from the root. Contributions from multiple
    /// paths are summed.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root_node = &nodes[root.id];
        if root_node.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                root_node.value.shape()
            )));
        }
        let mut grads = Gradients::default();
        if !root_node.requires_grad {
            return Ok(grads);
        }

        let mut adj: Vec<Option<Vec<f64>>> = (0..=root.id).map(|_| None).collect();
        adj[root.id] = Some(vec![1.0]);
        for id in (0..=root.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            if node.is_leaf {
                if node.requires_grad {
                    let t = Tensor::from_parts(node.value.shape().to_vec(), g);
                    grads.map.insert(id, t);
                }
                continue;
            }
            let Some(rule) = &node.adjoint else { continue };
            let needs: Vec<bool> = node
                .inputs
                .iter()
                .map(|&i| nodes[i].requires_grad)
                .collect();
            let contributions = rule(&g, &needs);
            debug_assert_eq!(contributions.len(), node.inputs.len(), "{}", node.op);
            for ((&input, contrib), need) in node.inputs.iter().zip(contributions).zip(needs) {
                let Some(c) = contrib else { continue };
                if !need {
                    continue;
                }
                debug_assert_eq!(c.len(), nodes[input].value.len(), "{}", node.op);
                match &mut adj[input] {
                    Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(c),
                }
            }
        }
        Ok(grads)
    }
}

impl<'g> Var<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.graph.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.graph.nodes.borrow()[self.id].value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn item(&self) -> f64 {
        self.graph.nodes.borrow()[self.id].value.item()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    pub fn op_name(&self) -> &'static str {
        self.graph.nodes.borrow()[self.id].op
    }

    /// Same value, cut from the record.
    pub fn detach(&self) -> Var<'g> {
        self.graph.constant((*self.value()).clone())
    }

    pub fn backward(&self) -> Result<Gradients> {
        self.graph.backward(*self)
    }
}

/// Gradients keyed by leaf.
#[derive(Debug, Default, Clone)]
pub struct Gradients {
    map: BTreeMap<usize, Tensor>,
}

impl Gradients {
    pub fn get(&self, leaf: Var<'_>) -> Option<&Tensor> {
        self.map.get(&leaf.id)
    }

    /// Gradient for `leaf`, or zeros of its shape when it was unreachable.
    pub fn get_or_zeros(&self, leaf: Var<'_>) -> Tensor {
        self.map
            .get(&leaf.id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&leaf.shape()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
