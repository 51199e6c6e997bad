//! The surface language: a small graph of temporal operators.
//!
//! Queries are written as dataflow graphs of stream operators — map,
//! filter, shift, windowed aggregation, join, re-gridding — and *lowered*
//! to the time-indexed IR by [`GraphBuilder::finish`]. Lowering is
//! deliberately thin: every operator becomes one definition whose body is
//! a plain expression of `t`, and all subsequent analysis (boundary
//! resolution, fusion, kernel compilation) happens on that IR, not on the
//! operator graph.
//!
//! Grid assignment during lowering:
//!
//! * `select` / `where` / `shift` inherit their input's precision — they
//!   are pointwise and cannot create detail the input lacks.
//! * `join` lands on the least common multiple of its inputs' precisions,
//!   the coarsest grid both sides land on exactly.
//! * `window` lands on its stride: one output point per window advance.
//! * `chop` lands on the requested precision, which must be a multiple of
//!   the input's (coarsening re-grids by sampling; refinement has no
//!   pointwise meaning and is rejected at validation).
//!
//! Expressions for `select`, `where`, and `join` are supplied as closures
//! that receive the input's read expression(s) and return the body — so
//! the surface stays ordinary Rust while the result is inspectable IR.

use crate::error::Result;
use crate::ir::{DomainBound, IRExpr, InputDef, Query, TemporalDef, TimeDomain};
use crate::time::lcm;
use crate::value::Value;

/// A node in the operator graph, returned by every builder method and
/// accepted as the input of later ones. Copyable; tied to the builder that
/// produced it by index (mixing handles across builders is a logic error
/// the final validation will surface as a name/shape mismatch).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node(usize);

struct NodeInfo {
    name: String,
    precision: i64,
}

/// Builds an operator graph and lowers it to a [`Query`].
///
/// ```
/// use tilt::frontend::GraphBuilder;
/// use tilt::{BinOp, IRExpr};
///
/// let mut g = GraphBuilder::new();
/// let prices = g.source("prices", 1);
/// let doubled = g.select("doubled", prices, |v| {
///     IRExpr::bin(BinOp::Mul, v, IRExpr::int(2))
/// });
/// let avg = g.window("avg", doubled, "average", 10, 5);
/// let q = g.finish(avg).unwrap();
/// assert_eq!(q.defs.len(), 2);
/// ```
pub struct GraphBuilder {
    inputs: Vec<InputDef>,
    defs: Vec<TemporalDef>,
    nodes: Vec<NodeInfo>,
}

impl GraphBuilder {
    pub fn new() -> GraphBuilder {
        GraphBuilder {
            inputs: Vec::new(),
            defs: Vec::new(),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, precision: i64, body: IRExpr) -> Node {
        self.defs.push(TemporalDef {
            name: name.to_string(),
            domain: TimeDomain::all(precision),
            body,
        });
        self.nodes.push(NodeInfo {
            name: name.to_string(),
            precision,
        });
        Node(self.nodes.len() - 1)
    }

    fn name(&self, n: Node) -> &str {
        &self.nodes[n.0].name
    }

    fn precision(&self, n: Node) -> i64 {
        self.nodes[n.0].precision
    }

    /// Declare an input stream on the given grid.
    pub fn source(&mut self, name: &str, precision: i64) -> Node {
        self.inputs.push(InputDef {
            name: name.to_string(),
            precision,
        });
        self.nodes.push(NodeInfo {
            name: name.to_string(),
            precision,
        });
        Node(self.nodes.len() - 1)
    }

    /// Pointwise map: `out[t] = f(in[t])`.
    pub fn select(
        &mut self,
        name: &str,
        input: Node,
        f: impl FnOnce(IRExpr) -> IRExpr,
    ) -> Node {
        let p = self.precision(input);
        let body = f(IRExpr::index(self.name(input), 0));
        self.push(name, p, body)
    }

    /// Pointwise filter: `out[t] = in[t]` where the predicate holds, φ
    /// elsewhere (and wherever the input itself is φ).
    pub fn filter(
        &mut self,
        name: &str,
        input: Node,
        pred: impl FnOnce(IRExpr) -> IRExpr,
    ) -> Node {
        let p = self.precision(input);
        let read = IRExpr::index(self.name(input), 0);
        let body = IRExpr::if_(pred(read.clone()), read, IRExpr::phi());
        self.push(name, p, body)
    }

    /// Time shift: `out[t] = in[t − delta]`. Positive `delta` lags the
    /// signal (values appear later); negative leads it. `delta` must sit on
    /// the input grid.
    pub fn shift(&mut self, name: &str, input: Node, delta: i64) -> Node {
        let p = self.precision(input);
        let body = IRExpr::index(self.name(input), -delta);
        self.push(name, p, body)
    }

    /// Temporal join: `out[t] = f(l[t], r[t])` on the coarsest common grid.
    /// φ on either side makes the output φ at that instant (strict
    /// combine); use an explicit `if` on `is_phi` inside `f` for outer
    /// behavior.
    pub fn join(
        &mut self,
        name: &str,
        left: Node,
        right: Node,
        f: impl FnOnce(IRExpr, IRExpr) -> IRExpr,
    ) -> Node {
        let p = lcm(self.precision(left), self.precision(right));
        let body = f(
            IRExpr::index(self.name(left), 0),
            IRExpr::index(self.name(right), 0),
        );
        self.push(name, p, body)
    }

    /// Windowed aggregation: every `stride` ticks, fold the named reduction
    /// over the trailing window `(t − width, t]`.
    pub fn window(
        &mut self,
        name: &str,
        input: Node,
        spec: &str,
        width: i64,
        stride: i64,
    ) -> Node {
        let body = IRExpr::reduce(spec, IRExpr::slice(self.name(input), -width, 0));
        self.push(name, stride, body)
    }

    /// Windowed aggregation with a per-element map applied before folding.
    pub fn window_map(
        &mut self,
        name: &str,
        input: Node,
        spec: &str,
        width: i64,
        stride: i64,
        map: impl FnOnce(IRExpr) -> IRExpr,
    ) -> Node {
        let body = IRExpr::reduce_map(
            spec,
            IRExpr::slice(self.name(input), -width, 0),
            map(IRExpr::ValueVar),
        );
        self.push(name, stride, body)
    }

    /// Re-grid to a coarser precision by sampling: `out[t] = in[t]` on the
    /// new grid. The new precision must be a multiple of the input's.
    pub fn chop(&mut self, name: &str, input: Node, precision: i64) -> Node {
        let body = IRExpr::index(self.name(input), 0);
        self.push(name, precision, body)
    }

    /// Escape hatch: a definition with an arbitrary hand-written body on an
    /// explicit grid. The workhorse for reshaping tricks (interpolation,
    /// gap fill, multi-stage filters) that have no dedicated operator.
    pub fn custom(&mut self, name: &str, precision: i64, body: IRExpr) -> Node {
        self.push(name, precision, body)
    }

    /// Like [`custom`](Self::custom) but with explicit domain bounds.
    pub fn custom_bounded(
        &mut self,
        name: &str,
        precision: i64,
        start: DomainBound,
        end: DomainBound,
        body: IRExpr,
    ) -> Node {
        self.defs.push(TemporalDef {
            name: name.to_string(),
            domain: TimeDomain {
                start,
                end,
                precision,
            },
            body,
        });
        self.nodes.push(NodeInfo {
            name: name.to_string(),
            precision,
        });
        Node(self.nodes.len() - 1)
    }

    /// The precision the given node landed on.
    pub fn precision_of(&self, n: Node) -> i64 {
        self.precision(n)
    }

    /// The definition name behind the given node.
    pub fn name_of(&self, n: Node) -> &str {
        self.name(n)
    }

    /// Lower to a validated [`Query`] with `output` as the result stream.
    pub fn finish(self, output: Node) -> Result<Query> {
        let out = self.nodes[output.0].name.clone();
        let q = Query::new(self.inputs, self.defs, &out);
        q.validate()?;
        Ok(q)
    }
}

impl Default for GraphBuilder {
    fn default() -> Self {
        GraphBuilder::new()
    }
}

/// Convenience: a literal as an expression.
pub fn lit(v: Value) -> IRExpr {
    IRExpr::Const(v)
}
