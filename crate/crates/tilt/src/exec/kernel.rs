//! Change-point loop kernels: compilation and the emission loop.
//!
//! A resolved query compiles to a [`CompiledPlan`]: one kernel per live
//! definition, in dependency order, with every stream reference resolved
//! to a buffer slot, every reduction resolved to its registered spec, and
//! duplicate window reads deduplicated into shared slots (fusion freely
//! duplicates a producer into several consumers; the slot table is where
//! that sharing is recovered).
//!
//! Execution walks each kernel over its *change points* only. A
//! definition's value can change at a grid point only if one of its reads
//! changes there, and reads change only at producer region boundaries:
//!
//! * a point read at offset δ of a boundary at β first differs at the
//!   first grid point strictly after β − δ;
//! * a window `(t+lo, t+hi]` gains the region starting at β at the first
//!   grid point strictly after β − hi, and loses the region ending at β
//!   at the first grid point ≥ β − lo;
//! * between those two edges a *per-run* fold is constant (the set of
//!   runs in the window does not change), but a *per-sample* fold is not:
//!   while a boundary sits inside the window, every step shifts the
//!   sample multiset, so per-sample slots contribute every grid point of
//!   the straddling interval;
//! * a body that mentions the time variable changes everywhere and steps
//!   densely, as do the two grid points just inside and just outside a
//!   bounded domain.
//!
//! The first grid point of the emission range is always evaluated to
//! establish the initial value. Between edges the value provably cannot
//! change, so the emission loop writes each computed value once and lets
//! the snapshot builder coalesce equal neighbors. Windows are folded by
//! the same [`reduce_window`] the dense oracle uses, over buffers whose
//! contents are (inductively) identical — which is what makes the two
//! routes bit-exact, not approximately equal.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::ir::{DomainBound, IRExpr, Query, TimeDomain};
use crate::passes::{resolve_boundaries, Boundaries, Envelope};
use crate::ssbuf::{BufferBuilder, SnapshotBuffer};
use crate::time::Time;
use crate::value::{apply_binop, apply_unop, BinOp, UnOp, Value};

use super::{pointwise_view, reduce_window, FoldMode, Registry, ReductionSpec, ScalarFn};

/// A body expression with all names resolved: streams to buffer slots,
/// reductions to window slots, scalar calls to function pointers.
#[derive(Clone)]
enum KExpr {
    Const(Value),
    TimeVar(i64),
    /// Only inside window-slot maps.
    ValueVar,
    Bin(BinOp, Box<KExpr>, Box<KExpr>),
    Un(UnOp, Box<KExpr>),
    If(Box<KExpr>, Box<KExpr>, Box<KExpr>),
    Point { slot: usize, delta: i64 },
    Window(usize),
    Call(ScalarFn, Vec<KExpr>),
}

/// One deduplicated window read: fold `spec` (mapped by `map`) over
/// `(t+lo, t+hi]` of the buffer in `slot`.
struct WindowSlot {
    slot: usize,
    lo: i64,
    hi: i64,
    /// Producer grid spacing (per-sample folds walk it).
    p: i64,
    spec: std::sync::Arc<ReductionSpec>,
    map: Option<KExpr>,
    /// The map in IR form, kept for structural CSE comparison.
    ir_map: Option<IRExpr>,
}

struct CompiledDef {
    name: String,
    slot: usize,
    precision: i64,
    domain: TimeDomain,
    env: Envelope,
    body: KExpr,
    windows: Vec<WindowSlot>,
    /// Deduplicated point reads: (producer slot, offset).
    points: Vec<(usize, i64)>,
    /// Body mentions the time variable: every grid point is an edge.
    dense_step: bool,
}

struct InputSlot {
    name: String,
    precision: i64,
    env: Envelope,
}

/// Evaluation counts per definition, for change-point efficiency checks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KernelStats {
    pub evals: BTreeMap<String, u64>,
}

impl KernelStats {
    pub fn merge(&mut self, other: &KernelStats) {
        for (k, v) in &other.evals {
            *self.evals.entry(k.clone()).or_insert(0) += v;
        }
    }
    pub fn total(&self) -> u64 {
        self.evals.values().sum()
    }
}

/// A query compiled to slot-resolved kernels, ready to execute over any
/// range. Immutable and shareable across worker threads.
pub struct CompiledPlan {
    /// The resolved query (lookback/lookahead stamped).
    pub query: Query,
    /// Read envelopes used to slice per-range needs.
    pub bounds: Boundaries,
    inputs: Vec<InputSlot>,
    defs: Vec<CompiledDef>,
    output_slot: usize,
}

/// Compile `q` against `reg`. Dead definitions (unreachable from the
/// output) are skipped entirely; every name and spec is resolved here so
/// execution cannot fail on lookup.
pub fn compile(q: &Query, reg: &Registry) -> Result<CompiledPlan> {
    let (rq, bounds) = resolve_boundaries(q)?;
    let mut slots: BTreeMap<String, usize> = BTreeMap::new();
    let mut inputs = Vec::new();
    for i in &rq.inputs {
        slots.insert(i.name.clone(), inputs.len());
        inputs.push(InputSlot {
            name: i.name.clone(),
            precision: i.precision,
            env: bounds.inputs[&i.name],
        });
    }
    let mut defs: Vec<CompiledDef> = Vec::new();
    for d in &rq.defs {
        let Some(env) = bounds.defs.get(&d.name).copied() else {
            continue; // dead: nothing reads it, the output never sees it
        };
        let slot = inputs.len() + defs.len();
        let mut cd = CompiledDef {
            name: d.name.clone(),
            slot,
            precision: d.domain.precision,
            domain: d.domain.clone(),
            env,
            body: KExpr::Const(Value::Phi),
            windows: Vec::new(),
            points: Vec::new(),
            dense_step: false,
        };
        cd.body = compile_expr(&d.body, &rq, reg, &slots, &mut cd)?;
        // A per-sample window's multiset shifts at every grid step while
        // any producer boundary straddles it; enumerating those straddle
        // ranges per boundary multiplies the edge list by the window
        // width. Walking the whole grid is the same edge set or a
        // superset, built in order and without the blow-up.
        if cd.windows.iter().any(|w| w.spec.mode == FoldMode::PerSample) {
            cd.dense_step = true;
        }
        slots.insert(d.name.clone(), slot);
        defs.push(cd);
    }
    let output_slot = *slots
        .get(&rq.output)
        .ok_or_else(|| Error::UnknownDef(rq.output.clone()))?;
    Ok(CompiledPlan {
        query: rq,
        bounds,
        inputs,
        defs,
        output_slot,
    })
}

fn compile_expr(
    e: &IRExpr,
    q: &Query,
    reg: &Registry,
    slots: &BTreeMap<String, usize>,
    cd: &mut CompiledDef,
) -> Result<KExpr> {
    use IRExpr as I;
    Ok(match e {
        I::Const(v) => KExpr::Const(v.clone()),
        I::TimeVar(o) => {
            cd.dense_step = true;
            KExpr::TimeVar(*o)
        }
        I::ValueVar => {
            return Err(Error::InvalidQuery(
                "`vvar` outside a reduction map".into(),
            ))
        }
        I::BinOp(op, a, b) => KExpr::Bin(
            *op,
            Box::new(compile_expr(a, q, reg, slots, cd)?),
            Box::new(compile_expr(b, q, reg, slots, cd)?),
        ),
        I::UnOp(op, a) => {
            KExpr::Un(op.clone(), Box::new(compile_expr(a, q, reg, slots, cd)?))
        }
        I::If(c, t, e2) => KExpr::If(
            Box::new(compile_expr(c, q, reg, slots, cd)?),
            Box::new(compile_expr(t, q, reg, slots, cd)?),
            Box::new(compile_expr(e2, q, reg, slots, cd)?),
        ),
        I::Index { def, offset } => {
            let slot = *slots
                .get(def)
                .ok_or_else(|| Error::UnknownDef(def.clone()))?;
            if !cd.points.contains(&(slot, *offset)) {
                cd.points.push((slot, *offset));
            }
            KExpr::Point {
                slot,
                delta: *offset,
            }
        }
        I::Slice { .. } => {
            return Err(Error::InvalidQuery(
                "a slice may appear only under a reduction".into(),
            ))
        }
        I::Reduce { spec, over, map } => {
            let (def, lo, hi) = match over.as_ref() {
                I::Slice { def, lo, hi } => (def, *lo, *hi),
                _ => {
                    return Err(Error::InvalidQuery(
                        "a reduction must fold a slice".into(),
                    ))
                }
            };
            let slot = *slots
                .get(def)
                .ok_or_else(|| Error::UnknownDef(def.clone()))?;
            // Window-slot CSE: identical reads (same producer, bounds,
            // spec, and map) share one slot and one fold per emission.
            let ir_map = map.as_deref().cloned();
            let existing = cd.windows.iter().position(|w| {
                w.slot == slot
                    && w.lo == lo
                    && w.hi == hi
                    && w.spec.name == *spec
                    && w.ir_map == ir_map
            });
            if let Some(i) = existing {
                KExpr::Window(i)
            } else {
                let compiled_map = match &ir_map {
                    None => None,
                    Some(m) => Some(compile_map(m, reg)?),
                };
                cd.windows.push(WindowSlot {
                    slot,
                    lo,
                    hi,
                    p: q.precision_of(def)?,
                    spec: reg.reduction(spec)?.clone(),
                    map: compiled_map,
                    ir_map,
                });
                KExpr::Window(cd.windows.len() - 1)
            }
        }
        I::Call(f, args) => {
            let fun = reg.scalar(f)?.clone();
            let mut out = Vec::with_capacity(args.len());
            for a in args {
                out.push(compile_expr(a, q, reg, slots, cd)?);
            }
            KExpr::Call(fun, out)
        }
    })
}

fn compile_map(e: &IRExpr, reg: &Registry) -> Result<KExpr> {
    use IRExpr as I;
    Ok(match e {
        I::Const(v) => KExpr::Const(v.clone()),
        I::ValueVar => KExpr::ValueVar,
        I::BinOp(op, a, b) => KExpr::Bin(
            *op,
            Box::new(compile_map(a, reg)?),
            Box::new(compile_map(b, reg)?),
        ),
        I::UnOp(op, a) => KExpr::Un(op.clone(), Box::new(compile_map(a, reg)?)),
        I::If(c, t, e2) => KExpr::If(
            Box::new(compile_map(c, reg)?),
            Box::new(compile_map(t, reg)?),
            Box::new(compile_map(e2, reg)?),
        ),
        I::Call(f, args) => {
            let fun = reg.scalar(f)?.clone();
            let mut out = Vec::with_capacity(args.len());
            for a in args {
                out.push(compile_map(a, reg)?);
            }
            KExpr::Call(fun, out)
        }
        I::TimeVar(_) | I::Index { .. } | I::Slice { .. } | I::Reduce { .. } => {
            return Err(Error::InvalidQuery(
                "map bodies are pure element functions".into(),
            ))
        }
    })
}

impl CompiledPlan {
    /// Execute over `(ts, te]`: build each input's buffer from its events
    /// over its need range, run every kernel in order, return the output
    /// buffer (covering exactly `(ts, te]`) and evaluation counts.
    ///
    /// `ts`/`te` need not be grid-aligned: emission lands on each
    /// definition's own grid inside the range. This is the same entry
    /// point partition workers use with their sub-ranges, which is what
    /// makes a parallel run a concatenation of calls to this function.
    pub fn execute(
        &self,
        events: &BTreeMap<String, Vec<Event>>,
        ts: Time,
        te: Time,
    ) -> Result<(SnapshotBuffer, KernelStats)> {
        if te < ts {
            return Err(Error::InvalidArg(format!(
                "range ({ts}, {te}] is reversed"
            )));
        }
        let mut bufs: Vec<SnapshotBuffer> = Vec::with_capacity(
            self.inputs.len() + self.defs.len(),
        );
        for i in &self.inputs {
            let evs = events.get(&i.name).ok_or_else(|| {
                Error::InvalidArg(format!("no events supplied for input `{}`", i.name))
            })?;
            let lo = ts.offset(i.env.lo).floor_to(i.precision);
            let hi = te.offset(i.env.hi.max(0)).ceil_to(i.precision);
            bufs.push(SnapshotBuffer::from_events(evs, lo, hi, i.precision)?);
        }
        let mut stats = KernelStats::default();
        for d in &self.defs {
            let (a, b) = if d.slot == self.output_slot {
                (ts, te)
            } else {
                (
                    ts.offset(d.env.lo).floor_to(d.precision),
                    te.offset(d.env.hi.max(0)).ceil_to(d.precision),
                )
            };
            let (buf, evals) = self.run_def(d, &bufs, a, b)?;
            stats.evals.insert(d.name.clone(), evals);
            bufs.push(buf);
        }
        Ok((bufs.swap_remove(self.output_slot), stats))
    }

    /// Emit one definition over `(a, b]`.
    fn run_def(
        &self,
        d: &CompiledDef,
        bufs: &[SnapshotBuffer],
        a: Time,
        b: Time,
    ) -> Result<(SnapshotBuffer, u64)> {
        let p = d.precision;
        let first = a.next_on(p);
        let last = b.floor_to(p);
        if last < first {
            return Ok((SnapshotBuffer::empty(a), 0));
        }

        let mut edges: Vec<Time> = Vec::new();
        edges.push(first);
        if d.dense_step {
            let mut g = first;
            while g <= last {
                edges.push(g);
                g = g.offset(p);
            }
        } else {
            let push = |t: Time, edges: &mut Vec<Time>| {
                if t > first && t <= last {
                    edges.push(t);
                }
            };
            for &(slot, delta) in &d.points {
                for s in bufs[slot].snaps() {
                    push(Time(s.ts.0 - delta).next_on(p), &mut edges);
                }
            }
            for w in &d.windows {
                let buf = &bufs[w.slot];
                let betas = std::iter::once(buf.base())
                    .chain(buf.snaps().iter().map(|s| s.ts));
                for beta in betas {
                    let entry = Time(beta.0 - w.hi).next_on(p);
                    let exit = Time(beta.0 - w.lo).ceil_to(p);
                    match w.spec.mode {
                        FoldMode::PerRun => {
                            push(entry, &mut edges);
                            push(exit, &mut edges);
                        }
                        FoldMode::PerSample => {
                            // Every step while the boundary straddles the
                            // window shifts the sample multiset.
                            let mut g = entry.max(first);
                            let stop = exit.min(last);
                            while g <= stop {
                                push(g, &mut edges);
                                g = g.offset(p);
                            }
                        }
                    }
                }
            }
            if let DomainBound::At(s) = d.domain.start {
                push(Time(s).next_on(p), &mut edges);
            }
            if let DomainBound::At(e) = d.domain.end {
                push(Time(e).next_on(p), &mut edges);
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut builder = BufferBuilder::new(a);
        let mut evals = 0u64;
        let mut wcache: Vec<Option<Value>> = vec![None; d.windows.len()];
        let mut prev: Option<(Time, Value)> = None;
        for &t in &edges {
            let v = if domain_contains(&d.domain, t) {
                for c in wcache.iter_mut() {
                    *c = None;
                }
                evals += 1;
                self.eval(&d.body, t, d, bufs, &mut wcache)?
            } else {
                Value::Phi
            };
            if let Some((pt, pv)) = prev.take() {
                if t > pt {
                    builder.push_value(t.offset(-p), pv)?;
                }
            }
            prev = Some((t, v));
        }
        if let Some((_, pv)) = prev {
            builder.push_value(last, pv)?;
        }
        Ok((builder.finish(), evals))
    }

    fn eval(
        &self,
        e: &KExpr,
        t: Time,
        d: &CompiledDef,
        bufs: &[SnapshotBuffer],
        wcache: &mut [Option<Value>],
    ) -> Result<Value> {
        match e {
            KExpr::Const(v) => Ok(v.clone()),
            KExpr::TimeVar(o) => Ok(Value::Int(t.0 + o)),
            KExpr::ValueVar => Err(Error::InvalidQuery(
                "`vvar` outside a reduction map".into(),
            )),
            KExpr::Bin(op, a, b) => {
                let va = self.eval(a, t, d, bufs, wcache)?;
                let vb = self.eval(b, t, d, bufs, wcache)?;
                apply_binop(*op, &va, &vb)
            }
            KExpr::Un(op, a) => {
                let va = self.eval(a, t, d, bufs, wcache)?;
                apply_unop(op, &va)
            }
            KExpr::If(c, th, el) => match self.eval(c, t, d, bufs, wcache)? {
                Value::Phi => Ok(Value::Phi),
                Value::Bool(true) => self.eval(th, t, d, bufs, wcache),
                Value::Bool(false) => self.eval(el, t, d, bufs, wcache),
                other => Err(Error::Type(format!(
                    "condition must be boolean or φ, found {other:?}"
                ))),
            },
            KExpr::Point { slot, delta } => Ok(pointwise_view(
                bufs[*slot].value_at(t.offset(*delta))?,
            )),
            KExpr::Window(i) => {
                if let Some(v) = &wcache[*i] {
                    return Ok(v.clone());
                }
                let w = &d.windows[*i];
                let lo = t.offset(w.lo);
                let hi = t.offset(w.hi);
                let v = match &w.map {
                    None => reduce_window(&w.spec, &bufs[w.slot], lo, hi, w.p, None)?,
                    Some(m) => {
                        let mf = |x: &Value| eval_map(m, x);
                        reduce_window(&w.spec, &bufs[w.slot], lo, hi, w.p, Some(&mf))?
                    }
                };
                wcache[*i] = Some(v.clone());
                Ok(v)
            }
            KExpr::Call(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, t, d, bufs, wcache)?);
                }
                if vals.iter().any(Value::is_phi) {
                    return Ok(Value::Phi);
                }
                f(&vals)
            }
        }
    }

    /// Grid precision of the output definition.
    pub fn output_precision(&self) -> i64 {
        self.defs
            .iter()
            .find(|d| d.slot == self.output_slot)
            .map(|d| d.precision)
            .unwrap_or(1)
    }

    /// Window-slot count of the output definition, to assert CSE.
    pub fn output_window_slots(&self) -> usize {
        self.defs
            .iter()
            .find(|d| d.slot == self.output_slot)
            .map(|d| d.windows.len())
            .unwrap_or(0)
    }
}

fn eval_map(e: &KExpr, elem: &Value) -> Result<Value> {
    match e {
        KExpr::Const(v) => Ok(v.clone()),
        KExpr::ValueVar => Ok(elem.clone()),
        KExpr::Bin(op, a, b) => {
            let va = eval_map(a, elem)?;
            let vb = eval_map(b, elem)?;
            apply_binop(*op, &va, &vb)
        }
        KExpr::Un(op, a) => {
            let va = eval_map(a, elem)?;
            apply_unop(op, &va)
        }
        KExpr::If(c, t, e2) => match eval_map(c, elem)? {
            Value::Phi => Ok(Value::Phi),
            Value::Bool(true) => eval_map(t, elem),
            Value::Bool(false) => eval_map(e2, elem),
            other => Err(Error::Type(format!(
                "condition must be boolean or φ, found {other:?}"
            ))),
        },
        KExpr::Call(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_map(a, elem)?);
            }
            if vals.iter().any(Value::is_phi) {
                return Ok(Value::Phi);
            }
            f(&vals)
        }
        KExpr::TimeVar(_) | KExpr::Point { .. } | KExpr::Window(_) => {
            Err(Error::InvalidQuery(
                "map bodies are pure element functions".into(),
            ))
        }
    }
}

fn domain_contains(d: &TimeDomain, g: Time) -> bool {
    let after_start = match d.start {
        DomainBound::NegInf => true,
        DomainBound::PosInf => false,
        DomainBound::At(x) => g > Time(x),
    };
    let before_end = match d.end {
        DomainBound::NegInf => false,
        DomainBound::PosInf => true,
        DomainBound::At(x) => g <= Time(x),
    };
    after_start && before_end
}
