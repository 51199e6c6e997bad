//! Optimization passes over the time-indexed IR.
//!
//! Two passes do the planner's heavy lifting:
//!
//! * **Boundary resolution** ([`resolve_boundaries`]) walks the dataflow
//!   backwards from the output and accumulates, per definition and per
//!   input, the interval of time offsets that can ever be read relative to
//!   an output point. From those envelopes it derives each input's
//!   *lookback* (history a worker must be handed) and *lookahead* (future
//!   grid slack before a point is final) — the numbers that make
//!   partition-parallel execution bit-exact.
//!
//! * **Fusion** ([`fuse`]) inlines producer definitions into their
//!   consumers. A point read of a definition inlines by substituting the
//!   producer's body with its time variable rebound by the read offset —
//!   always exact, because a definition's materialized value at a grid
//!   point *is* its body evaluated there. A window read inlines when the
//!   producer is a pointwise, φ-strict function of a single same-grid
//!   source: the window then re-targets the source directly and the
//!   producer's function rides along as the reduction's element map.
//!   Reductions never fuse *into* windows (a window over an aggregate
//!   genuinely needs the aggregate's timeline), which is what keeps
//!   multi-stage filter cascades as separate kernels.
//!
//! Fusion runs substitution, constant folding, and dead-definition
//! elimination to a fixpoint. It never changes observable output: the
//! whole suite's fused-vs-unfused equivalence properties pin that down.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::exec::dense::eval_map;
use crate::exec::Registry;
use crate::ir::{DomainBound, IRExpr, Query, ReadKind, TemporalDef};
use crate::value::{apply_binop, apply_unop, Value};

/// The interval of tick offsets, relative to an output point, over which a
/// stream can be read anywhere downstream of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Envelope {
    pub lo: i64,
    pub hi: i64,
}

impl Envelope {
    fn point() -> Envelope {
        Envelope { lo: 0, hi: 0 }
    }
    fn widen(&mut self, other: Envelope) {
        self.lo = self.lo.min(other.lo);
        self.hi = self.hi.max(other.hi);
    }
    fn shifted(self, lo: i64, hi: i64) -> Envelope {
        Envelope {
            lo: self.lo + lo,
            hi: self.hi + hi,
        }
    }
}

/// Read envelopes for every stream the output transitively depends on.
#[derive(Debug, Clone)]
pub struct Boundaries {
    /// Per live definition (the output itself has the point envelope).
    pub defs: BTreeMap<String, Envelope>,
    /// Per input, including inputs the query never reads (point envelope).
    pub inputs: BTreeMap<String, Envelope>,
}

impl Boundaries {
    /// Envelope for any named stream, definition or input.
    pub fn of(&self, name: &str) -> Option<Envelope> {
        self.defs.get(name).or_else(|| self.inputs.get(name)).copied()
    }
}

/// Compute read envelopes and stamp per-input lookback/lookahead into a
/// copy of the query.
///
/// Envelope accumulation is plain interval arithmetic: a definition read
/// at point offset δ inherits the consumer's envelope shifted by δ; a
/// window read `(t+lo, t+hi]` shifts the two ends by `lo` and `hi`.
/// Definitions the output never reaches get no envelope (they are dead;
/// fusion removes them). Lookback is the left reach clamped at zero,
/// lookahead the right reach clamped at zero.
pub fn resolve_boundaries(q: &Query) -> Result<(Query, Boundaries)> {
    q.validate()?;
    let mut env: BTreeMap<String, Envelope> = BTreeMap::new();
    env.insert(q.output.clone(), Envelope::point());

    for d in q.defs.iter().rev() {
        let Some(e) = env.get(&d.name).copied() else {
            continue; // dead definition
        };
        d.body.for_each_read(&mut |target, kind| {
            let contrib = match kind {
                ReadKind::Point(delta) => e.shifted(delta, delta),
                ReadKind::Window(lo, hi) => e.shifted(lo, hi),
            };
            env.entry(target.to_string())
                .or_insert(contrib)
                .widen(contrib);
        });
    }

    let mut defs = BTreeMap::new();
    for d in &q.defs {
        if let Some(e) = env.get(&d.name) {
            defs.insert(d.name.clone(), *e);
        }
    }
    let mut inputs = BTreeMap::new();
    let mut out = q.clone();
    out.lookback.clear();
    out.lookahead.clear();
    for i in &q.inputs {
        let e = env.get(&i.name).copied().unwrap_or_else(Envelope::point);
        inputs.insert(i.name.clone(), e);
        out.lookback.insert(i.name.clone(), (-e.lo).max(0));
        out.lookahead.insert(i.name.clone(), e.hi.max(0));
    }
    Ok((out, Boundaries { defs, inputs }))
}

/// Fuse the query: inline producers into consumers, fold constants,
/// remove dead definitions; repeat to a fixpoint.
///
/// The registry is consulted for one thing only: deciding whether a
/// window-fusion candidate's function is φ-strict (maps φ to φ), by
/// evaluating it once on φ. Functions that manufacture values out of gaps
/// (`is_phi` fills) stay unfused — folding them into a window would turn
/// the source's silent regions into contributions the unfused pipeline
/// never had.
pub fn fuse(q: &Query, reg: &Registry) -> Result<Query> {
    q.validate()?;
    let mut cur = q.clone();
    for _ in 0..=cur.defs.len() + 2 {
        let (next, changed) = fuse_round(&cur, reg)?;
        cur = next;
        if !changed {
            break;
        }
    }
    cur.validate()?;
    Ok(cur)
}

fn fuse_round(q: &Query, reg: &Registry) -> Result<(Query, bool)> {
    let by_name: BTreeMap<&str, &TemporalDef> =
        q.defs.iter().map(|d| (d.name.as_str(), d)).collect();
    let mut changed = false;
    let mut new_defs = Vec::with_capacity(q.defs.len());
    for d in &q.defs {
        let (body, c1) = inline_expr(&d.body, q, &by_name, reg)?;
        let (body, c2) = fold_expr(body);
        changed |= c1 | c2;
        new_defs.push(TemporalDef {
            name: d.name.clone(),
            domain: d.domain.clone(),
            body,
        });
    }
    let mut out = q.clone();
    out.defs = new_defs;
    let removed = drop_dead_defs(&mut out);
    Ok((out, changed | removed))
}

/// Is this producer inlinable at a point read? Any definition with an
/// unbounded domain is: substitution is referentially transparent, and
/// only a domain bound (which blanks the signal to φ outside it) adds
/// behavior the body alone does not carry.
fn point_inlinable<'q>(
    name: &str,
    by_name: &BTreeMap<&str, &'q TemporalDef>,
) -> Option<&'q TemporalDef> {
    let d = by_name.get(name)?;
    (d.domain.start == DomainBound::NegInf && d.domain.end == DomainBound::PosInf)
        .then_some(*d)
}

/// A pointwise single-source view of a definition body: every read is a
/// point read of the same `(source, offset)`, there is no time variable
/// and no nested reduction. Returns the source, the offset, and the body
/// with each read replaced by [`IRExpr::ValueVar`] — the element map the
/// window fusion rides on.
fn pointwise_single_source(body: &IRExpr) -> Option<(String, i64, IRExpr)> {
    let mut source: Option<(String, i64)> = None;
    let mut ok = true;
    body.for_each_read(&mut |name, kind| match kind {
        ReadKind::Point(delta) => match &source {
            None => source = Some((name.to_string(), delta)),
            Some((s, d)) => {
                if s != name || *d != delta {
                    ok = false;
                }
            }
        },
        ReadKind::Window(..) => ok = false,
    });
    let (src, delta) = source?;
    if !ok || has_time_or_reduce(body) {
        return None;
    }
    Some((src.clone(), delta, to_value_fn(body, &src, delta)))
}

fn has_time_or_reduce(e: &IRExpr) -> bool {
    use IRExpr::*;
    match e {
        TimeVar(_) | Slice { .. } | Reduce { .. } => true,
        Const(_) | ValueVar | Index { .. } => false,
        BinOp(_, a, b) => has_time_or_reduce(a) || has_time_or_reduce(b),
        UnOp(_, a) => has_time_or_reduce(a),
        If(c, t, e2) => {
            has_time_or_reduce(c) || has_time_or_reduce(t) || has_time_or_reduce(e2)
        }
        Call(_, args) => args.iter().any(has_time_or_reduce),
    }
}

fn to_value_fn(e: &IRExpr, src: &str, delta: i64) -> IRExpr {
    use IRExpr::*;
    match e {
        Index { def, offset } if def == src && *offset == delta => ValueVar,
        Const(_) | ValueVar | TimeVar(_) | Index { .. } => e.clone(),
        BinOp(op, a, b) => IRExpr::bin(
            *op,
            to_value_fn(a, src, delta),
            to_value_fn(b, src, delta),
        ),
        UnOp(op, a) => IRExpr::un(op.clone(), to_value_fn(a, src, delta)),
        If(c, t, e2) => IRExpr::if_(
            to_value_fn(c, src, delta),
            to_value_fn(t, src, delta),
            to_value_fn(e2, src, delta),
        ),
        Call(f, args) => Call(
            f.clone(),
            args.iter().map(|a| to_value_fn(a, src, delta)).collect(),
        ),
        Slice { .. } | Reduce { .. } => unreachable!("screened by has_time_or_reduce"),
    }
}

/// Substitute `ValueVar` in `outer` with `inner` (map composition).
fn compose_maps(outer: &IRExpr, inner: &IRExpr) -> IRExpr {
    use IRExpr::*;
    match outer {
        ValueVar => inner.clone(),
        Const(_) | TimeVar(_) | Index { .. } => outer.clone(),
        BinOp(op, a, b) => IRExpr::bin(
            *op,
            compose_maps(a, inner),
            compose_maps(b, inner),
        ),
        UnOp(op, a) => IRExpr::un(op.clone(), compose_maps(a, inner)),
        If(c, t, e2) => IRExpr::if_(
            compose_maps(c, inner),
            compose_maps(t, inner),
            compose_maps(e2, inner),
        ),
        Call(f, args) => Call(
            f.clone(),
            args.iter().map(|a| compose_maps(a, inner)).collect(),
        ),
        Slice { .. } | Reduce { .. } => outer.clone(),
    }
}

fn is_phi_strict(map: &IRExpr, reg: &Registry) -> bool {
    matches!(eval_map(map, &Value::Phi, reg), Ok(Value::Phi))
}

fn inline_expr(
    e: &IRExpr,
    q: &Query,
    by_name: &BTreeMap<&str, &TemporalDef>,
    reg: &Registry,
) -> Result<(IRExpr, bool)> {
    use IRExpr::*;
    Ok(match e {
        Const(_) | TimeVar(_) | ValueVar | Slice { .. } => (e.clone(), false),
        Index { def, offset } => match point_inlinable(def, by_name) {
            Some(p) => (p.body.rebind_time(*offset), true),
            None => (e.clone(), false),
        },
        BinOp(op, a, b) => {
            let (a, ca) = inline_expr(a, q, by_name, reg)?;
            let (b, cb) = inline_expr(b, q, by_name, reg)?;
            (IRExpr::bin(*op, a, b), ca | cb)
        }
        UnOp(op, a) => {
            let (a, ca) = inline_expr(a, q, by_name, reg)?;
            (IRExpr::un(op.clone(), a), ca)
        }
        If(c, t, e2) => {
            let (c, cc) = inline_expr(c, q, by_name, reg)?;
            let (t, ct) = inline_expr(t, q, by_name, reg)?;
            let (e2, ce) = inline_expr(e2, q, by_name, reg)?;
            (IRExpr::if_(c, t, e2), cc | ct | ce)
        }
        Call(f, args) => {
            let mut changed = false;
            let mut out = Vec::with_capacity(args.len());
            for a in args {
                let (a, ca) = inline_expr(a, q, by_name, reg)?;
                changed |= ca;
                out.push(a);
            }
            (Call(f.clone(), out), changed)
        }
        Reduce { spec, over, map } => {
            let (def, lo, hi) = match over.as_ref() {
                Slice { def, lo, hi } => (def, *lo, *hi),
                _ => {
                    return Err(Error::InvalidQuery(
                        "a reduction must fold a slice".into(),
                    ))
                }
            };
            if let Some(p) = point_inlinable(def, by_name) {
                if let Some((src, delta, value_fn)) = pointwise_single_source(&p.body) {
                    let p_src = q.precision_of(&src)?;
                    if p_src == p.domain.precision && is_phi_strict(&value_fn, reg) {
                        let new_map = match map {
                            None => value_fn,
                            Some(m) => compose_maps(m, &value_fn),
                        };
                        return Ok((
                            IRExpr::reduce_map(
                                spec,
                                IRExpr::slice(&src, lo + delta, hi + delta),
                                new_map,
                            ),
                            true,
                        ));
                    }
                }
            }
            (e.clone(), false)
        }
    })
}

/// Fold constant subexpressions. Only folds where evaluation *succeeds*;
/// an operation that would error (overflow, type clash) is left in place
/// so it fails identically at run time.
fn fold_expr(e: IRExpr) -> (IRExpr, bool) {
    use IRExpr::*;
    match e {
        Const(_) | TimeVar(_) | ValueVar | Index { .. } | Slice { .. } => (e, false),
        BinOp(op, a, b) => {
            let (a, ca) = fold_expr(*a);
            let (b, cb) = fold_expr(*b);
            if let (Const(x), Const(y)) = (&a, &b) {
                if let Ok(v) = apply_binop(op, x, y) {
                    return (Const(v), true);
                }
            }
            (IRExpr::bin(op, a, b), ca | cb)
        }
        UnOp(op, a) => {
            let (a, ca) = fold_expr(*a);
            if let Const(x) = &a {
                if let Ok(v) = apply_unop(&op, x) {
                    return (Const(v), true);
                }
            }
            (IRExpr::un(op, a), ca)
        }
        If(c, t, e2) => {
            let (c, cc) = fold_expr(*c);
            let (t, ct) = fold_expr(*t);
            let (e2, ce) = fold_expr(*e2);
            match &c {
                Const(Value::Bool(true)) => (t, true),
                Const(Value::Bool(false)) => (e2, true),
                Const(Value::Phi) => (Const(Value::Phi), true),
                _ => (IRExpr::if_(c, t, e2), cc | ct | ce),
            }
        }
        Reduce { spec, over, map } => {
            let (over, co) = fold_expr(*over);
            let (map, cm) = match map {
                None => (None, false),
                Some(m) => {
                    let (m, cm) = fold_expr(*m);
                    (Some(Box::new(m)), cm)
                }
            };
            (
                Reduce {
                    spec,
                    over: Box::new(over),
                    map,
                },
                co | cm,
            )
        }
        Call(f, args) => {
            let mut changed = false;
            let folded: Vec<IRExpr> = args
                .into_iter()
                .map(|a| {
                    let (a, ca) = fold_expr(a);
                    changed |= ca;
                    a
                })
                .collect();
            (Call(f, folded), changed)
        }
    }
}

/// Remove definitions the output cannot reach. Returns whether anything
/// was removed. Inputs are never pruned: they are the query's declared
/// interface.
fn drop_dead_defs(q: &mut Query) -> bool {
    let mut live: BTreeSet<String> = BTreeSet::new();
    live.insert(q.output.clone());
    for d in q.defs.iter().rev() {
        if live.contains(&d.name) {
            d.body.for_each_read(&mut |t, _| {
                live.insert(t.to_string());
            });
        }
    }
    let before = q.defs.len();
    let kept: Vec<TemporalDef> = q
        .defs
        .iter()
        .filter(|d| live.contains(&d.name))
        .cloned()
        .collect();
    let removed = kept.len() != before;
    q.defs = kept;
    removed
}

/// The standard planning pipeline: optionally fuse, then resolve
/// boundaries. Returns the final query (validated, lookback/lookahead
/// stamped) and its envelopes.
pub fn plan(q: &Query, reg: &Registry, fuse_enabled: bool) -> Result<(Query, Boundaries)> {
    let fused = if fuse_enabled { fuse(q, reg)? } else { q.clone() };
    resolve_boundaries(&fused)
}
