//! The dense reference evaluator.
//!
//! This is the oracle the whole test suite trusts: every definition is
//! materialized at *every* grid point of its domain, in dependency order,
//! by direct recursive interpretation of its expression. No change-point
//! skipping, no fusion, no incremental state — it optimizes for
//! obviousness, not speed, and the optimized execution route must match it
//! bit for bit.
//!
//! Each definition is evaluated over an envelope that extends past the
//! requested range by a per-definition margin, computed so that every read
//! any consumer performs lands strictly inside its producer's materialized
//! coverage (margins shrink as evaluation moves downstream; each hop
//! spends its maximum read offset plus one grid step). The output is
//! clipped to the requested `(ts, te]` at the end.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::ir::{DomainBound, IRExpr, Query, ReadKind, TimeDomain};
use crate::ssbuf::{BufferBuilder, SnapshotBuffer};
use crate::time::Time;
use crate::value::{apply_binop, apply_unop, Value};

use super::{pointwise_view, reduce_window, Registry};

/// Largest read offset a definition's body performs, in ticks.
fn max_offset(e: &IRExpr) -> i64 {
    let mut m = 0i64;
    e.for_each_read(&mut |_, k| {
        let o = match k {
            ReadKind::Point(d) => d.abs(),
            ReadKind::Window(lo, hi) => lo.abs().max(hi.abs()),
        };
        m = m.max(o);
    });
    m
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

/// Evaluate `q` over `(ts, te]` by dense materialization.
///
/// `events` supplies the raw stream for every input (missing inputs are an
/// error; events outside the padded range are ignored by the encoding).
pub fn eval_dense(
    q: &Query,
    reg: &Registry,
    events: &BTreeMap<String, Vec<Event>>,
    ts: Time,
    te: Time,
) -> Result<SnapshotBuffer> {
    q.validate()?;
    if te < ts {
        return Err(Error::InvalidArg(format!(
            "range ({ts}, {te}] is reversed"
        )));
    }

    // Shrinking envelope margins: inputs get the full pad; each def spends
    // its own (max offset + grid step) from the margin of everything above.
    let pads: Vec<i64> = q
        .defs
        .iter()
        .map(|d| max_offset(&d.body) + d.domain.precision)
        .collect();
    let total: i64 = pads.iter().sum();

    let mut bufs: BTreeMap<&str, (SnapshotBuffer, i64)> = BTreeMap::new();
    for i in &q.inputs {
        let evs = events.get(&i.name).ok_or_else(|| {
            Error::InvalidArg(format!("no events supplied for input `{}`", i.name))
        })?;
        let lo = ts.offset(-total).floor_to(i.precision);
        let hi = te.offset(total).ceil_to(i.precision);
        let b = SnapshotBuffer::from_events(evs, lo, hi, i.precision)?;
        bufs.insert(&i.name, (b, i.precision));
    }

    let mut margin = total;
    for (d, pad) in q.defs.iter().zip(&pads) {
        margin -= pad;
        let p = d.domain.precision;
        let lo = ts.offset(-margin).floor_to(p);
        let hi = te.offset(margin).ceil_to(p);
        let mut b = BufferBuilder::new(lo);
        let mut g = lo.offset(p);
        while g <= hi {
            let v = if domain_contains(&d.domain, g) {
                eval_expr(&d.body, g, &bufs, reg)?
            } else {
                Value::Phi
            };
            b.push_value(g, v)?;
            g = g.offset(p);
        }
        bufs.insert(&d.name, (b.finish(), p));
    }

    let (out, p_out) = bufs.get(q.output.as_str()).expect("validated output");
    // Outputs are grid-complete: a value whose grid point lies past `te`
    // would be a partial aggregate that later events could revise, so the
    // range is clipped to the last full grid point (growth law: extending
    // `te` may only append change points, never rewrite old ones).
    let te_full = te.floor_to(*p_out).max(ts);
    out.sub_buffer(ts, te_full)
}

fn eval_expr(
    e: &IRExpr,
    g: Time,
    bufs: &BTreeMap<&str, (SnapshotBuffer, i64)>,
    reg: &Registry,
) -> Result<Value> {
    match e {
        IRExpr::Const(v) => Ok(v.clone()),
        IRExpr::TimeVar(o) => Ok(Value::Int(g.0 + o)),
        IRExpr::ValueVar => Err(Error::InvalidQuery(
            "`vvar` outside a reduction map".into(),
        )),
        IRExpr::BinOp(op, a, b) => {
            let va = eval_expr(a, g, bufs, reg)?;
            let vb = eval_expr(b, g, bufs, reg)?;
            apply_binop(*op, &va, &vb)
        }
        IRExpr::UnOp(op, a) => {
            let va = eval_expr(a, g, bufs, reg)?;
            apply_unop(op, &va)
        }
        IRExpr::If(c, t, e2) => match eval_expr(c, g, bufs, reg)? {
            Value::Phi => Ok(Value::Phi),
            Value::Bool(true) => eval_expr(t, g, bufs, reg),
            Value::Bool(false) => eval_expr(e2, g, bufs, reg),
            other => Err(Error::Type(format!(
                "condition must be boolean or φ, found {other:?}"
            ))),
        },
        IRExpr::Index { def, offset } => {
            let (b, _) = bufs
                .get(def.as_str())
                .ok_or_else(|| Error::UnknownDef(def.clone()))?;
            Ok(pointwise_view(b.value_at(g.offset(*offset))?))
        }
        IRExpr::Slice { .. } => Err(Error::InvalidQuery(
            "a slice may appear only under a reduction".into(),
        )),
        IRExpr::Reduce { spec, over, map } => {
            let (def, lo, hi) = match over.as_ref() {
                IRExpr::Slice { def, lo, hi } => (def, *lo, *hi),
                _ => {
                    return Err(Error::InvalidQuery(
                        "a reduction must fold a slice".into(),
                    ))
                }
            };
            let (b, p) = bufs
                .get(def.as_str())
                .ok_or_else(|| Error::UnknownDef(def.clone()))?;
            let spec = reg.reduction(spec)?;
            match map {
                None => reduce_window(spec, b, g.offset(lo), g.offset(hi), *p, None),
                Some(m) => {
                    let mf = |v: &Value| eval_map(m, v, reg);
                    reduce_window(spec, b, g.offset(lo), g.offset(hi), *p, Some(&mf))
                }
            }
        }
        IRExpr::Call(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval_expr(a, g, bufs, reg))
                .collect::<Result<Vec<_>>>()?;
            reg.call(f, &vals)
        }
    }
}

/// Evaluate a reduction map body for one element.
pub(crate) fn eval_map(e: &IRExpr, elem: &Value, reg: &Registry) -> Result<Value> {
    match e {
        IRExpr::Const(v) => Ok(v.clone()),
        IRExpr::ValueVar => Ok(elem.clone()),
        IRExpr::BinOp(op, a, b) => {
            let va = eval_map(a, elem, reg)?;
            let vb = eval_map(b, elem, reg)?;
            apply_binop(*op, &va, &vb)
        }
        IRExpr::UnOp(op, a) => {
            let va = eval_map(a, elem, reg)?;
            apply_unop(op, &va)
        }
        IRExpr::If(c, t, e2) => match eval_map(c, elem, reg)? {
            Value::Phi => Ok(Value::Phi),
            Value::Bool(true) => eval_map(t, elem, reg),
            Value::Bool(false) => eval_map(e2, elem, reg),
            other => Err(Error::Type(format!(
                "condition must be boolean or φ, found {other:?}"
            ))),
        },
        IRExpr::Call(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval_map(a, elem, reg))
                .collect::<Result<Vec<_>>>()?;
            reg.call(f, &vals)
        }
        IRExpr::TimeVar(_) | IRExpr::Index { .. } | IRExpr::Slice { .. } | IRExpr::Reduce { .. } => {
            Err(Error::InvalidQuery(
                "map bodies are pure element functions".into(),
            ))
        }
    }
}
