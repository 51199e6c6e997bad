//! Execution substrate: the function registry, the canonical window fold,
//! and the incremental sliding-window state machine.
//!
//! Reductions follow a four-part template — `init`, `acc`, `result`, and
//! an optional `deacc` for invertible aggregates (subtract-on-evict).
//! Every reduction also declares its *fold granularity*:
//!
//! * [`FoldMode::PerRun`] — fold once per maximal run of a value in the
//!   window: event semantics. `sum` over a window counts each event once
//!   however long it lasts. Overlapping events contribute separately
//!   (multiset payloads), matched first-in-first-out.
//! * [`FoldMode::PerSample`] — fold once per producer grid point in the
//!   window: signal-statistics semantics. `average` over a window is the
//!   mean of the samples, even where consecutive samples are equal. Missing
//!   samples reach `acc` as φ so order-sensitive aggregates (FIR filters)
//!   keep their alignment; statistics simply skip them.
//!
//! Both the change-point kernels and the dense reference evaluator fold
//! windows through [`reduce_window`] — one implementation, shared, so the
//! two execution routes cannot drift apart numerically.

pub mod dense;
pub mod kernel;

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ssbuf::SnapshotBuffer;
use crate::time::Time;
use crate::value::Value;

/// Shared fallible closure over values.
pub type AccFn = Arc<dyn Fn(&Value, &Value) -> Result<Value> + Send + Sync>;
/// Finalizer from accumulator state to output value.
pub type ResultFn = Arc<dyn Fn(&Value) -> Result<Value> + Send + Sync>;
/// Registered pure scalar function.
pub type ScalarFn = Arc<dyn Fn(&[Value]) -> Result<Value> + Send + Sync>;
/// Element transform applied before folding (the reduction's `map`).
pub type MapFn<'a> = dyn Fn(&Value) -> Result<Value> + 'a;

/// What one fold contribution means. See the module docs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldMode {
    PerRun,
    PerSample,
}

/// Register-resident fold families for the hot per-sample statistics.
///
/// The boxed `acc`/`result` closures remain the semantic definition; a
/// fast fold is the same arithmetic, operation for operation, kept in
/// plain `f64` accumulators instead of allocated state records. The two
/// paths must agree bit for bit (property-tested), so either may serve
/// any call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FastFold {
    Average,
    StdDev,
    MeanStd,
    VibStats,
    Rsi,
}

/// A registered reduction.
#[derive(Clone)]
pub struct ReductionSpec {
    pub name: String,
    pub mode: FoldMode,
    pub init: Value,
    pub acc: AccFn,
    pub result: ResultFn,
    /// Inverse of `acc` for invertible aggregates; enables the
    /// subtract-on-evict sliding path ([`SlidingWindow`]).
    pub deacc: Option<AccFn>,
    /// Constituent operator names for inventory reporting (a compound
    /// statistic like `rsi` counts as its two averages).
    pub inventory: Vec<&'static str>,
    /// Register-resident equivalent of `acc`+`result`, when one exists.
    pub fast: Option<FastFold>,
}

impl ReductionSpec {
    pub fn new(
        name: &str,
        mode: FoldMode,
        init: Value,
        acc: AccFn,
        result: ResultFn,
    ) -> ReductionSpec {
        ReductionSpec {
            name: name.into(),
            mode,
            init,
            acc,
            result,
            deacc: None,
            inventory: Vec::new(),
            fast: None,
        }
    }

    pub fn with_deacc(mut self, deacc: AccFn) -> Self {
        self.deacc = Some(deacc);
        self
    }

    pub fn with_fast(mut self, fast: FastFold) -> Self {
        self.fast = Some(fast);
        self
    }

    pub fn with_inventory(mut self, inv: Vec<&'static str>) -> Self {
        self.inventory = inv;
        self
    }

    pub fn invertible(&self) -> bool {
        self.deacc.is_some()
    }
}

/// Name-resolved reductions and scalar functions available to a run.
#[derive(Clone, Default)]
pub struct Registry {
    reductions: HashMap<String, Arc<ReductionSpec>>,
    scalars: HashMap<String, ScalarFn>,
}

impl Registry {
    pub fn empty() -> Registry {
        Registry::default()
    }

    /// The built-in reductions. Scalar functions start empty; callers
    /// register what their queries name.
    pub fn standard() -> Registry {
        let mut r = Registry::empty();
        for spec in builtin_reductions() {
            r.register_reduction(spec);
        }
        r
    }

    pub fn register_reduction(&mut self, spec: ReductionSpec) {
        self.reductions.insert(spec.name.clone(), Arc::new(spec));
    }

    pub fn register_scalar(
        &mut self,
        name: &str,
        f: impl Fn(&[Value]) -> Result<Value> + Send + Sync + 'static,
    ) {
        self.scalars.insert(name.into(), Arc::new(f));
    }

    pub fn reduction(&self, name: &str) -> Result<&Arc<ReductionSpec>> {
        self.reductions
            .get(name)
            .ok_or_else(|| Error::UnknownFunction(name.into()))
    }

    /// All registered reduction specs, sorted by name.
    pub fn reductions(&self) -> Vec<&Arc<ReductionSpec>> {
        let mut out: Vec<_> = self.reductions.values().collect();
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    pub fn scalar(&self, name: &str) -> Result<&ScalarFn> {
        self.scalars
            .get(name)
            .ok_or_else(|| Error::UnknownFunction(name.into()))
    }

    /// Call a scalar function; strict in φ (any φ argument short-circuits
    /// to φ without invoking the function).
    pub fn call(&self, name: &str, args: &[Value]) -> Result<Value> {
        if args.iter().any(Value::is_phi) {
            return Ok(Value::Phi);
        }
        (self.scalar(name)?)(args)
    }
}

/// The pointwise view of a payload: the most recent of the simultaneously
/// active values (payloads are ordered by event start/end/arrival), or φ.
pub fn pointwise_view(payload: &[Value]) -> Value {
    payload.last().cloned().unwrap_or(Value::Phi)
}

/// Fold a window `(lo, hi]` of `buf` with `spec`. `p` is the producer's
/// grid spacing (used by per-sample folds). `map` is applied to each
/// element first when present; a mapped fold always works on the pointwise
/// view of each region (that is what makes fusing a pointwise stage into a
/// window read exact). The parts of the window before `buf.base()` carry no
/// information and contribute nothing; a window with no contributions at
/// all yields φ.
pub fn reduce_window(
    spec: &ReductionSpec,
    buf: &SnapshotBuffer,
    lo: Time,
    hi: Time,
    p: i64,
    map: Option<&MapFn>,
) -> Result<Value> {
    if hi <= lo {
        return Err(Error::InvalidArg(format!(
            "window ({lo}, {hi}] is empty"
        )));
    }
    reduce_window_inner(spec, buf, lo, hi, p, map, None)
}

/// [`reduce_window`] with a monotone snap cursor. `cursor` must be a lower
/// bound on the index of the first snap at or after the window's first
/// in-coverage sample — `0` is always sound, and the value written back by
/// a call is sound for any later (same-or-rightward) window over the same
/// buffer. The cursor changes only where the fold starts walking, never
/// what it computes, so results are identical to [`reduce_window`]'s.
pub fn reduce_window_seeded(
    spec: &ReductionSpec,
    buf: &SnapshotBuffer,
    lo: Time,
    hi: Time,
    p: i64,
    map: Option<&MapFn>,
    cursor: &mut usize,
) -> Result<Value> {
    reduce_window_inner(spec, buf, lo, hi, p, map, Some(cursor))
}

fn reduce_window_inner(
    spec: &ReductionSpec,
    buf: &SnapshotBuffer,
    lo: Time,
    hi: Time,
    p: i64,
    map: Option<&MapFn>,
    cursor: Option<&mut usize>,
) -> Result<Value> {
    if hi <= lo {
        return Err(Error::InvalidArg(format!(
            "window ({lo}, {hi}] is empty"
        )));
    }
    match spec.mode {
        FoldMode::PerSample => match spec.fast {
            Some(ff) => per_sample_fast(spec, ff, buf, lo, hi, p, map, cursor),
            None => per_sample_generic(spec, buf, lo, hi, p, map),
        },
        FoldMode::PerRun => {
            let window = clip_regions(buf, lo, hi);
            let contributions = match map {
                None => run_contributions(&window),
                Some(m) => {
                    // Pointwise view per region, mapped; φ views break runs
                    // and contribute nothing; consecutive equal mapped
                    // values merge into one contribution — exactly the
                    // normal form the equivalent two-stage pipeline's
                    // buffer would have.
                    let mut out: Vec<Value> = Vec::new();
                    let mut prev: Option<Value> = None;
                    for (_, _, payload) in &window {
                        let view = pointwise_view(payload);
                        if view.is_phi() {
                            prev = None;
                            continue;
                        }
                        let mv = m(&view)?;
                        if mv.is_phi() {
                            prev = None;
                            continue;
                        }
                        if prev.as_ref() != Some(&mv) {
                            out.push(mv.clone());
                            prev = Some(mv);
                        }
                    }
                    out
                }
            };
            if contributions.is_empty() {
                return Ok(Value::Phi);
            }
            let mut state = spec.init.clone();
            for v in &contributions {
                state = (spec.acc)(&state, v)?;
            }
            (spec.result)(&state)
        }
    }
}

/// Per-sample fold through the boxed state closures: the semantic
/// definition every fast fold must reproduce exactly.
fn per_sample_generic(
    spec: &ReductionSpec,
    buf: &SnapshotBuffer,
    lo: Time,
    hi: Time,
    p: i64,
    map: Option<&MapFn>,
) -> Result<Value> {
    let mut g = lo.next_on(p);
    let mut state = spec.init.clone();
    let mut samples = 0usize;
    while g <= hi {
        if g > buf.base() {
            let mut v = pointwise_view(buf.value_at(g)?);
            if let Some(m) = map {
                if !v.is_phi() {
                    v = m(&v)?;
                }
            }
            state = (spec.acc)(&state, &v)?;
            samples += 1;
        }
        g = g.offset(p);
    }
    if samples == 0 {
        return Ok(Value::Phi);
    }
    (spec.result)(&state)
}

/// Per-sample fold in registers: one snap-cursor walk instead of a binary
/// search per sample, `f64` accumulators instead of state records. Every
/// arithmetic step mirrors the boxed closures of the corresponding spec
/// operation for operation (additions against the same running sums, in
/// the same order), so the result is bit-identical to
/// [`per_sample_generic`] — which the unit tests assert.
fn per_sample_fast(
    spec: &ReductionSpec,
    ff: FastFold,
    buf: &SnapshotBuffer,
    lo: Time,
    hi: Time,
    p: i64,
    map: Option<&MapFn>,
) -> Result<Value> {
    let snaps = buf.snaps();
    let base = buf.base();
    let mut n: i64 = 0;
    let mut s = [0.0f64; 4];
    let mut g = lo.next_on(p);
    let mut samples = 0usize;
    let mut idx = usize::MAX; // snap cursor, set at the first covered sample
    while g <= hi {
        if g > base {
            if idx == usize::MAX {
                idx = snaps.partition_point(|sn| sn.ts < g);
            } else {
                while idx < snaps.len() && snaps[idx].ts < g {
                    idx += 1;
                }
            }
            let mut v = match snaps.get(idx) {
                Some(sn) => pointwise_view(&sn.val),
                None => Value::Phi,
            };
            if let Some(m) = map {
                if !v.is_phi() {
                    v = m(&v)?;
                }
            }
            if !v.is_phi() {
                match ff {
                    FastFold::Rsi => {
                        let d = num(&v, "rsi")?;
                        n += 1;
                        s[0] += d.max(0.0);
                        s[1] += (-d).max(0.0);
                    }
                    _ => {
                        let x = num(&v, "moment statistics")?;
                        let v2 = x * x;
                        n += 1;
                        s[0] += x;
                        s[1] += v2;
                        s[2] += v2 * x;
                        s[3] += v2 * v2;
                    }
                }
            }
            samples += 1;
        }
        g = g.offset(p);
    }
    if samples == 0 {
        return Ok(Value::Phi);
    }
    if n == 0 {
        // All samples were φ: the state is still `init`, whose result is
        // φ for every fast-fold family.
        return Ok(Value::Phi);
    }
    let nf = n as f64;
    Ok(match ff {
        FastFold::Average => Value::Float(s[0] / nf),
        FastFold::StdDev => Value::Float(central_m2(nf, s[0], s[1]).sqrt()),
        FastFold::MeanStd => {
            let mean = s[0] / nf;
            let var = central_m2(nf, s[0], s[1]);
            Value::record(vec![
                ("mean", Value::Float(mean)),
                ("std", Value::Float(var.sqrt())),
            ])
        }
        FastFold::VibStats => {
            let (s1, s2, s3, s4) = (s[0], s[1], s[2], s[3]);
            let n = nf;
            let mean = s1 / n;
            let m2 = central_m2(n, s1, s2);
            let m4 = s4 / n - 4.0 * mean * s3 / n + 6.0 * mean * mean * s2 / n
                - 3.0 * mean * mean * mean * mean;
            let m4 = if m4 <= (s4 / n).abs() * 1e-12 { 0.0 } else { m4 };
            let rms = (s2 / n).max(0.0).sqrt();
            let kurt = if m2 > 0.0 {
                Value::Float(m4 / (m2 * m2))
            } else {
                Value::Phi
            };
            Value::record(vec![("rms", Value::Float(rms)), ("kurt", kurt)])
        }
        FastFold::Rsi => {
            let avg_gain = s[0] / nf;
            let avg_loss = s[1] / nf;
            if avg_loss == 0.0 {
                Value::Float(100.0)
            } else {
                let rs = avg_gain / avg_loss;
                Value::Float(100.0 - 100.0 / (1.0 + rs))
            }
        }
    })
}

/// Regions of `buf` clipped to `(lo, hi]`, in order. Starts at the first
/// overlapping region by binary search rather than scanning from the
/// buffer's beginning — the yielded regions are identical either way.
fn clip_regions(buf: &SnapshotBuffer, lo: Time, hi: Time) -> Vec<(Time, Time, Vec<Value>)> {
    let snaps = buf.snaps();
    let mut out = Vec::new();
    // Region i covers (boundary(i-1), snaps[i].ts]; the first one that can
    // overlap (lo, hi] is the first with snaps[i].ts > lo.
    let start = snaps.partition_point(|s| s.ts <= lo);
    let mut rlo = if start == 0 {
        buf.base()
    } else {
        snaps[start - 1].ts
    };
    for s in &snaps[start..] {
        let rhi = s.ts;
        if rlo >= hi {
            break;
        }
        out.push((rlo.max(lo), rhi.min(hi), s.val.to_vec()));
        rlo = rhi;
    }
    out
}

/// Event-granular contributions: decompose the clipped window into maximal
/// value runs (first-in-first-out for equal values in multisets) and list
/// each run's value once, ordered by run start (ties by departure order).
fn run_contributions(window: &[(Time, Time, Vec<Value>)]) -> Vec<Value> {
    let mut open: Vec<(Value, usize)> = Vec::new(); // (value, open order)
    let mut order = 0usize;
    let mut out: Vec<(usize, Value)> = Vec::new();

    fn counts(vals: &[Value]) -> HashMap<&Value, i64> {
        let mut m: HashMap<&Value, i64> = HashMap::new();
        for v in vals {
            *m.entry(v).or_insert(0) += 1;
        }
        m
    }

    let mut prev: Vec<Value> = Vec::new();
    let mut step = |next: &[Value], open: &mut Vec<(Value, usize)>, prev: &mut Vec<Value>| {
        let pc = counts(prev);
        let nc = counts(next);
        let mut closed: HashMap<Value, i64> = HashMap::new();
        for v in prev.iter() {
            let n_prev = pc[v];
            let n_next = nc.get(v).copied().unwrap_or(0);
            let done = closed.entry(v.clone()).or_insert(0);
            if *done >= n_prev - n_next {
                continue;
            }
            *done += 1;
            let pos = open
                .iter()
                .position(|(ov, _)| ov == v)
                .expect("open run for active value");
            let (val, opened_at) = open.remove(pos);
            out.push((opened_at, val));
        }
        let mut opened: HashMap<Value, i64> = HashMap::new();
        for v in next.iter() {
            let n_prev = pc.get(v).copied().unwrap_or(0);
            let n_next = nc[v];
            let done = opened.entry(v.clone()).or_insert(0);
            if *done >= n_next - n_prev {
                continue;
            }
            *done += 1;
            open.push((v.clone(), order));
            order += 1;
        }
        *prev = next.to_vec();
    };

    // Regions in a normal-form buffer are contiguous, but clipping can
    // surface the implicit φ tail mid-window only at the end; gaps inside
    // come as explicit empty payloads, so a plain walk is enough.
    for (_, _, payload) in window {
        step(payload, &mut open, &mut prev);
    }
    step(&[], &mut open, &mut prev);

    out.sort_by_key(|(opened_at, _)| *opened_at);
    out.into_iter().map(|(_, v)| v).collect()
}

/// Incremental sliding-window aggregation: insert on arrival, evict on
/// expiry, read the current value in O(1) accumulator work. Requires an
/// invertible reduction (`deacc`).
pub struct SlidingWindow {
    spec: Arc<ReductionSpec>,
    state: Value,
    live: usize,
}

impl SlidingWindow {
    pub fn new(spec: Arc<ReductionSpec>) -> Result<SlidingWindow> {
        if !spec.invertible() {
            return Err(Error::InvalidArg(format!(
                "reduction `{}` has no deacc; it cannot slide incrementally",
                spec.name
            )));
        }
        Ok(SlidingWindow {
            state: spec.init.clone(),
            spec,
            live: 0,
        })
    }

    pub fn insert(&mut self, v: &Value) -> Result<()> {
        self.state = (self.spec.acc)(&self.state, v)?;
        self.live += 1;
        Ok(())
    }

    pub fn evict(&mut self, v: &Value) -> Result<()> {
        if self.live == 0 {
            return Err(Error::InvalidArg(
                "evict from an empty sliding window".into(),
            ));
        }
        let deacc = self.spec.deacc.as_ref().expect("checked at construction");
        self.state = deacc(&self.state, v)?;
        self.live -= 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Current aggregate; φ while the window holds nothing.
    pub fn value(&self) -> Result<Value> {
        if self.live == 0 {
            return Ok(Value::Phi);
        }
        (self.spec.result)(&self.state)
    }
}

// ---------------------------------------------------------------------
// Built-in reductions
// ---------------------------------------------------------------------

fn num(v: &Value, who: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Type(format!("`{who}` needs numeric elements, found {v:?}")))
}

fn get(s: &Value, field: &str) -> Value {
    match s {
        Value::Struct(sv) => sv.get(field).cloned().unwrap_or(Value::Phi),
        _ => Value::Phi,
    }
}

fn getf(s: &Value, field: &str) -> f64 {
    get(s, field).as_f64().unwrap_or(0.0)
}

fn geti(s: &Value, field: &str) -> i64 {
    get(s, field).as_int().unwrap_or(0)
}

/// Moment-sum state shared by the statistics aggregates.
fn moments_state(n: i64, s: [f64; 4]) -> Value {
    Value::record(vec![
        ("n", Value::Int(n)),
        ("s1", Value::Float(s[0])),
        ("s2", Value::Float(s[1])),
        ("s3", Value::Float(s[2])),
        ("s4", Value::Float(s[3])),
    ])
}

fn moments_acc(sign: f64) -> AccFn {
    Arc::new(move |s, x| {
        if x.is_phi() {
            return Ok(s.clone()); // missing sample: skip
        }
        let v = num(x, "moment statistics")?;
        let n = geti(s, "n") + sign as i64;
        let v2 = v * v;
        Ok(moments_state(
            n,
            [
                getf(s, "s1") + sign * v,
                getf(s, "s2") + sign * v2,
                getf(s, "s3") + sign * v2 * v,
                getf(s, "s4") + sign * v2 * v2,
            ],
        ))
    })
}

/// Central second moment from raw power sums, with cancellation noise
/// clamped to zero. `s2/n − mean²` cannot resolve a variance below about
/// 1e-12 of the mean square — anything smaller is rounding residue (the
/// subtract-on-evict path leaves exactly this kind of residue behind),
/// not signal, and must not surface as a tiny positive σ.
fn central_m2(n: f64, s1: f64, s2: f64) -> f64 {
    let mean = s1 / n;
    let var = s2 / n - mean * mean;
    let noise = (s2 / n).abs() * 1e-12;
    if var <= noise {
        0.0
    } else {
        var
    }
}

fn fir_spec(name: &'static str, taps: &'static [f64], scale: f64) -> ReductionSpec {
    let k = taps.len();
    let init = {
        let mut fields: Vec<(&str, Value)> = vec![("n", Value::Int(0))];
        for slot in SLOT_NAMES.iter().take(k) {
            fields.push((slot, Value::Phi));
        }
        Value::record(fields)
    };
    let acc: AccFn = Arc::new(move |s, x| {
        // Shift register: drop the oldest, append the new sample (φ
        // included — gaps must keep their place for an order-sensitive
        // filter).
        let mut fields: Vec<(&str, Value)> =
            vec![("n", Value::Int(geti(s, "n").saturating_add(1)))];
        for i in 0..k - 1 {
            fields.push((SLOT_NAMES[i], get(s, SLOT_NAMES[i + 1])));
        }
        fields.push((SLOT_NAMES[k - 1], x.clone()));
        Ok(Value::record(fields))
    });
    let result: ResultFn = Arc::new(move |s| {
        if geti(s, "n") < k as i64 {
            return Ok(Value::Phi); // partial window
        }
        let mut accum = 0.0;
        for (i, c) in taps.iter().enumerate() {
            let v = get(s, SLOT_NAMES[i]);
            if v.is_phi() {
                return Ok(Value::Phi); // gap inside the filter span
            }
            accum += c * num(&v, name)?;
        }
        Ok(Value::Float(accum / scale))
    });
    ReductionSpec::new(name, FoldMode::PerSample, init, acc, result)
        .with_inventory(vec!["Custom-Agg"])
}

const SLOT_NAMES: [&str; 8] = ["v0", "v1", "v2", "v3", "v4", "v5", "v6", "v7"];

fn builtin_reductions() -> Vec<ReductionSpec> {
    use crate::value::{apply_binop, BinOp};
    let mut out = Vec::new();

    // sum — event-granular, exact on integers, invertible.
    out.push(
        ReductionSpec::new(
            "sum",
            FoldMode::PerRun,
            Value::Int(0),
            Arc::new(|s, x| apply_binop(BinOp::Add, s, x)),
            Arc::new(|s| Ok(s.clone())),
        )
        .with_deacc(Arc::new(|s, x| apply_binop(BinOp::Sub, s, x)))
        .with_inventory(vec!["Sum"]),
    );

    // product — event-granular; not invertible (zeros).
    out.push(
        ReductionSpec::new(
            "product",
            FoldMode::PerRun,
            Value::Int(1),
            Arc::new(|s, x| apply_binop(BinOp::Mul, s, x)),
            Arc::new(|s| Ok(s.clone())),
        )
        .with_inventory(vec!["Product"]),
    );

    // count — event-granular, invertible.
    out.push(
        ReductionSpec::new(
            "count",
            FoldMode::PerRun,
            Value::Int(0),
            Arc::new(|s, _| apply_binop(BinOp::Add, s, &Value::Int(1))),
            Arc::new(|s| Ok(s.clone())),
        )
        .with_deacc(Arc::new(|s, _| apply_binop(BinOp::Sub, s, &Value::Int(1))))
        .with_inventory(vec!["Count"]),
    );

    // min / max — granularity-irrelevant (idempotent); registered as
    // event-granular. State starts φ, first element claims it.
    for (name, keep_left) in [("min", true), ("max", false)] {
        out.push(
            ReductionSpec::new(
                name,
                FoldMode::PerRun,
                Value::Phi,
                Arc::new(move |s, x| {
                    if s.is_phi() {
                        return Ok(x.clone());
                    }
                    let (a, b) = (num(s, "min/max")?, num(x, "min/max")?);
                    let take_state = if keep_left { a <= b } else { a >= b };
                    Ok(if take_state { s.clone() } else { x.clone() })
                }),
                Arc::new(|s| Ok(s.clone())),
            )
            .with_inventory(vec![if keep_left { "Min" } else { "Max" }]),
        );
    }

    // average — sample statistics, invertible.
    out.push(
        ReductionSpec::new(
            "average",
            FoldMode::PerSample,
            moments_state(0, [0.0; 4]),
            moments_acc(1.0),
            Arc::new(|s| {
                let n = geti(s, "n");
                if n == 0 {
                    return Ok(Value::Phi);
                }
                Ok(Value::Float(getf(s, "s1") / n as f64))
            }),
        )
        .with_deacc(moments_acc(-1.0))
        .with_fast(FastFold::Average)
        .with_inventory(vec!["Avg"]),
    );

    // stddev — population σ, sample statistics, invertible.
    out.push(
        ReductionSpec::new(
            "stddev",
            FoldMode::PerSample,
            moments_state(0, [0.0; 4]),
            moments_acc(1.0),
            Arc::new(|s| {
                let n = geti(s, "n");
                if n == 0 {
                    return Ok(Value::Phi);
                }
                let n = n as f64;
                let var = central_m2(n, getf(s, "s1"), getf(s, "s2"));
                Ok(Value::Float(var.sqrt()))
            }),
        )
        .with_deacc(moments_acc(-1.0))
        .with_fast(FastFold::StdDev)
        .with_inventory(vec!["StdDev"]),
    );

    // mean_std — both at once, for joins against μ and σ together.
    out.push(
        ReductionSpec::new(
            "mean_std",
            FoldMode::PerSample,
            moments_state(0, [0.0; 4]),
            moments_acc(1.0),
            Arc::new(|s| {
                let n = geti(s, "n");
                if n == 0 {
                    return Ok(Value::Phi);
                }
                let n = n as f64;
                let mean = getf(s, "s1") / n;
                let var = central_m2(n, getf(s, "s1"), getf(s, "s2"));
                Ok(Value::record(vec![
                    ("mean", Value::Float(mean)),
                    ("std", Value::Float(var.sqrt())),
                ]))
            }),
        )
        .with_deacc(moments_acc(-1.0))
        .with_fast(FastFold::MeanStd)
        .with_inventory(vec!["Avg", "StdDev"]),
    );

    // rsi — relative strength over price differences: separate averages
    // of gains and losses, combined as 100 − 100/(1 + RS).
    out.push(
        ReductionSpec::new(
            "rsi",
            FoldMode::PerSample,
            Value::record(vec![
                ("n", Value::Int(0)),
                ("g", Value::Float(0.0)),
                ("l", Value::Float(0.0)),
            ]),
            Arc::new(|s, x| {
                if x.is_phi() {
                    return Ok(s.clone());
                }
                let d = num(x, "rsi")?;
                Ok(Value::record(vec![
                    ("n", Value::Int(geti(s, "n") + 1)),
                    ("g", Value::Float(getf(s, "g") + d.max(0.0))),
                    ("l", Value::Float(getf(s, "l") + (-d).max(0.0))),
                ]))
            }),
            Arc::new(|s| {
                let n = geti(s, "n");
                if n == 0 {
                    return Ok(Value::Phi);
                }
                let avg_gain = getf(s, "g") / n as f64;
                let avg_loss = getf(s, "l") / n as f64;
                if avg_loss == 0.0 {
                    return Ok(Value::Float(100.0));
                }
                let rs = avg_gain / avg_loss;
                Ok(Value::Float(100.0 - 100.0 / (1.0 + rs)))
            }),
        )
        .with_deacc(Arc::new(|s, x| {
            if x.is_phi() {
                return Ok(s.clone());
            }
            let d = num(x, "rsi")?;
            Ok(Value::record(vec![
                ("n", Value::Int(geti(s, "n") - 1)),
                ("g", Value::Float(getf(s, "g") - d.max(0.0))),
                ("l", Value::Float(getf(s, "l") - (-d).max(0.0))),
            ]))
        }))
        .with_fast(FastFold::Rsi)
        .with_inventory(vec!["Avg", "Avg"]),
    );

    // vib_stats — rms and kurtosis from raw moment sums.
    out.push(
        ReductionSpec::new(
            "vib_stats",
            FoldMode::PerSample,
            moments_state(0, [0.0; 4]),
            moments_acc(1.0),
            Arc::new(|s| {
                let n = geti(s, "n");
                if n == 0 {
                    return Ok(Value::Phi);
                }
                let n = n as f64;
                let (s1, s2, s3, s4) =
                    (getf(s, "s1"), getf(s, "s2"), getf(s, "s3"), getf(s, "s4"));
                let mean = s1 / n;
                let m2 = central_m2(n, s1, s2);
                let m4 = s4 / n - 4.0 * mean * s3 / n + 6.0 * mean * mean * s2 / n
                    - 3.0 * mean * mean * mean * mean;
                let m4 = if m4 <= (s4 / n).abs() * 1e-12 { 0.0 } else { m4 };
                let rms = (s2 / n).max(0.0).sqrt();
                let kurt = if m2 > 0.0 {
                    Value::Float(m4 / (m2 * m2))
                } else {
                    Value::Phi
                };
                Ok(Value::record(vec![
                    ("rms", Value::Float(rms)),
                    ("kurt", kurt),
                ]))
            }),
        )
        .with_deacc(moments_acc(-1.0))
        .with_fast(FastFold::VibStats)
        .with_inventory(vec!["Custom-Agg"]),
    );

    // FIR stages: triangular smoothers and a five-point derivative.
    out.push(fir_spec("pt_smooth5", &[1.0, 2.0, 3.0, 2.0, 1.0], 9.0));
    out.push(fir_spec("pt_deriv5", &[-2.0, -1.0, 0.0, 1.0, 2.0], 8.0));
    out.push(fir_spec("pt_smooth3", &[1.0, 2.0, 1.0], 4.0));

    out
}
