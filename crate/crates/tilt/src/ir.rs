//! The time-centric intermediate representation.
//!
//! A [`Query`] is a list of temporal definitions, each a pure function of
//! the time variable `t` over an explicit [`TimeDomain`]. Surface operators
//! lower to combinations of five primitive temporal forms:
//!
//! * **Index** — `P[t + δ]`: read one producer value at a fixed offset.
//! * **Slice** — `P(t + lo, t + hi]`: view a finite window of a producer.
//! * **Reduce** — fold a slice with a registered reduction, optionally
//!   mapping each element first.
//! * pointwise scalar computation over those reads ([`BinOp`]/[`UnOp`],
//!   conditionals, calls to registered scalar functions), and
//! * re-gridding, expressed by giving a definition its own precision.
//!
//! Time is explicit everywhere: `t` itself is an expression
//! ([`IRExpr::TimeVar`]), offsets are plain integers, and shifting a
//! definition in time is re-binding `t` — which is what makes fusion and
//! boundary analysis simple rewrites instead of special-cased planner
//! logic.
//!
//! Definitions appear in dependency order; [`Query::validate`] enforces
//! this along with grid alignment of every pointwise read (a read must
//! land on the producer's grid at every consumer grid point).

pub mod sexpr;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::time::Time;
use crate::value::{BinOp, UnOp, Value};

/// Largest tick offset a query may mention; keeps all internal grid
/// arithmetic comfortably inside `i64`.
pub const MAX_OFFSET: i64 = 1 << 40;

/// One end of a time domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainBound {
    NegInf,
    PosInf,
    At(i64),
}

impl DomainBound {
    pub fn min_time(self, t: Time) -> Time {
        match self {
            DomainBound::NegInf => Time(i64::MIN / 4),
            DomainBound::PosInf => t,
            DomainBound::At(x) => t.min(Time(x)),
        }
    }

    pub fn max_time(self, t: Time) -> Time {
        match self {
            DomainBound::NegInf => t,
            DomainBound::PosInf => Time(i64::MAX / 4),
            DomainBound::At(x) => t.max(Time(x)),
        }
    }
}

/// The domain of a definition: which grid points `(start, end]` carry
/// values, at which spacing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeDomain {
    pub start: DomainBound,
    pub end: DomainBound,
    pub precision: i64,
}

impl TimeDomain {
    /// Unbounded domain at spacing `p`.
    pub fn all(p: i64) -> TimeDomain {
        TimeDomain {
            start: DomainBound::NegInf,
            end: DomainBound::PosInf,
            precision: p,
        }
    }

    /// Clip an evaluation range `(lo, hi]` to this domain.
    pub fn clip(&self, lo: Time, hi: Time) -> (Time, Time) {
        let lo = match self.start {
            DomainBound::NegInf => lo,
            DomainBound::PosInf => hi,
            DomainBound::At(x) => lo.max(Time(x)),
        };
        let hi = match self.end {
            DomainBound::NegInf => lo,
            DomainBound::PosInf => hi,
            DomainBound::At(x) => hi.min(Time(x)),
        };
        (lo, hi.max(lo))
    }
}

/// An expression over the time variable `t`.
#[derive(Clone, Debug, PartialEq)]
pub enum IRExpr {
    Const(Value),
    /// `t + offset`, as an integer value.
    TimeVar(i64),
    /// The current element inside a reduction's `map` body.
    ValueVar,
    BinOp(BinOp, Box<IRExpr>, Box<IRExpr>),
    UnOp(UnOp, Box<IRExpr>),
    /// Lazy conditional: only the taken branch is evaluated; a φ condition
    /// yields φ.
    If(Box<IRExpr>, Box<IRExpr>, Box<IRExpr>),
    /// Pointwise read `def[t + offset]`.
    Index { def: String, offset: i64 },
    /// Window view `def(t + lo, t + hi]`; only valid under [`IRExpr::Reduce`].
    Slice { def: String, lo: i64, hi: i64 },
    /// Fold the slice with reduction `spec`, mapping each element through
    /// `map` (an expression over [`IRExpr::ValueVar`]) first if present.
    Reduce {
        spec: String,
        over: Box<IRExpr>,
        map: Option<Box<IRExpr>>,
    },
    /// Registered scalar function application (strict in φ).
    Call(String, Vec<IRExpr>),
}

impl IRExpr {
    pub fn index(def: &str, offset: i64) -> IRExpr {
        IRExpr::Index {
            def: def.into(),
            offset,
        }
    }

    pub fn slice(def: &str, lo: i64, hi: i64) -> IRExpr {
        IRExpr::Slice {
            def: def.into(),
            lo,
            hi,
        }
    }

    pub fn reduce(spec: &str, over: IRExpr) -> IRExpr {
        IRExpr::Reduce {
            spec: spec.into(),
            over: Box::new(over),
            map: None,
        }
    }

    pub fn reduce_map(spec: &str, over: IRExpr, map: IRExpr) -> IRExpr {
        IRExpr::Reduce {
            spec: spec.into(),
            over: Box::new(over),
            map: Some(Box::new(map)),
        }
    }

    pub fn bin(op: BinOp, a: IRExpr, b: IRExpr) -> IRExpr {
        IRExpr::BinOp(op, Box::new(a), Box::new(b))
    }

    pub fn un(op: UnOp, a: IRExpr) -> IRExpr {
        IRExpr::UnOp(op, Box::new(a))
    }

    pub fn if_(c: IRExpr, t: IRExpr, e: IRExpr) -> IRExpr {
        IRExpr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn float(x: f64) -> IRExpr {
        IRExpr::Const(Value::Float(x))
    }

    pub fn int(x: i64) -> IRExpr {
        IRExpr::Const(Value::Int(x))
    }

    pub fn phi() -> IRExpr {
        IRExpr::Const(Value::Phi)
    }

    /// Re-bind the time variable: `t := t + δ`. Shifting a definition in
    /// time is exactly this rewrite.
    pub fn rebind_time(&self, delta: i64) -> IRExpr {
        use IRExpr::*;
        match self {
            Const(v) => Const(v.clone()),
            TimeVar(o) => TimeVar(o + delta),
            ValueVar => ValueVar,
            BinOp(op, a, b) => IRExpr::bin(*op, a.rebind_time(delta), b.rebind_time(delta)),
            UnOp(op, a) => IRExpr::un(op.clone(), a.rebind_time(delta)),
            If(c, t, e) => IRExpr::if_(
                c.rebind_time(delta),
                t.rebind_time(delta),
                e.rebind_time(delta),
            ),
            Index { def, offset } => Index {
                def: def.clone(),
                offset: offset + delta,
            },
            Slice { def, lo, hi } => Slice {
                def: def.clone(),
                lo: lo + delta,
                hi: hi + delta,
            },
            Reduce { spec, over, map } => Reduce {
                spec: spec.clone(),
                over: Box::new(over.rebind_time(delta)),
                map: map.clone(),
            },
            Call(f, args) => Call(
                f.clone(),
                args.iter().map(|a| a.rebind_time(delta)).collect(),
            ),
        }
    }

    /// Visit every producer read in this expression.
    pub fn for_each_read(&self, f: &mut impl FnMut(&str, ReadKind)) {
        use IRExpr::*;
        match self {
            Const(_) | TimeVar(_) | ValueVar => {}
            BinOp(_, a, b) => {
                a.for_each_read(f);
                b.for_each_read(f);
            }
            UnOp(_, a) => a.for_each_read(f),
            If(c, t, e) => {
                c.for_each_read(f);
                t.for_each_read(f);
                e.for_each_read(f);
            }
            Index { def, offset } => f(def, ReadKind::Point(*offset)),
            Slice { def, lo, hi } => f(def, ReadKind::Window(*lo, *hi)),
            Reduce { over, map, .. } => {
                over.for_each_read(f);
                if let Some(m) = map {
                    m.for_each_read(f);
                }
            }
            Call(_, args) => {
                for a in args {
                    a.for_each_read(f);
                }
            }
        }
    }
}

/// One producer read: a point at `t + δ` or a window `(t + lo, t + hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReadKind {
    Point(i64),
    Window(i64, i64),
}

/// A named input stream and its grid spacing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputDef {
    pub name: String,
    pub precision: i64,
}

/// A derived definition.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalDef {
    pub name: String,
    pub domain: TimeDomain,
    pub body: IRExpr,
}

/// A complete query: inputs, definitions in dependency order, and the
/// output definition. `lookback`/`lookahead` are per-input margins filled
/// in by boundary resolution; execution refuses unresolved queries.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub inputs: Vec<InputDef>,
    pub defs: Vec<TemporalDef>,
    pub output: String,
    pub lookback: BTreeMap<String, i64>,
    pub lookahead: BTreeMap<String, i64>,
}

impl Query {
    pub fn new(inputs: Vec<InputDef>, defs: Vec<TemporalDef>, output: &str) -> Query {
        Query {
            inputs,
            defs,
            output: output.into(),
            lookback: BTreeMap::new(),
            lookahead: BTreeMap::new(),
        }
    }

    pub fn def(&self, name: &str) -> Option<&TemporalDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn input(&self, name: &str) -> Option<&InputDef> {
        self.inputs.iter().find(|i| i.name == name)
    }

    pub fn is_input(&self, name: &str) -> bool {
        self.input(name).is_some()
    }

    /// Grid spacing of a name (input or definition).
    pub fn precision_of(&self, name: &str) -> Result<i64> {
        if let Some(i) = self.input(name) {
            return Ok(i.precision);
        }
        if let Some(d) = self.def(name) {
            return Ok(d.domain.precision);
        }
        Err(Error::UnknownDef(name.into()))
    }

    pub fn is_resolved(&self) -> bool {
        !self.lookback.is_empty() || self.inputs.is_empty()
    }

    /// Structural validation. Checks, with a named-def diagnostic on every
    /// failure:
    ///
    /// * unique names; defs reference only inputs or *earlier* defs;
    /// * the output names an existing definition;
    /// * positive precisions, domain bounds on the definition's own grid;
    /// * every pointwise read grid-aligned (`p_producer | p_consumer` and
    ///   `p_producer | δ`), so each read lands on the producer's grid;
    /// * slices only directly under a reduction, with `lo < hi`;
    /// * `map` bodies pure element functions (`vvar` only — no reads, no
    ///   time variable, no nested reductions);
    /// * `vvar` nowhere outside a `map`;
    /// * all offsets within [`MAX_OFFSET`].
    pub fn validate(&self) -> Result<()> {
        use std::collections::BTreeSet;
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for i in &self.inputs {
            if !seen.insert(&i.name) {
                return Err(Error::InvalidQuery(format!(
                    "duplicate name `{}`",
                    i.name
                )));
            }
            if i.precision < 1 {
                return Err(Error::InvalidQuery(format!(
                    "input `{}` precision {} must be >= 1",
                    i.name, i.precision
                )));
            }
        }
        for d in &self.defs {
            if seen.contains(d.name.as_str()) {
                return Err(Error::InvalidQuery(format!(
                    "duplicate name `{}`",
                    d.name
                )));
            }
            let p = d.domain.precision;
            if p < 1 {
                return Err(Error::InvalidQuery(format!(
                    "def `{}` precision {p} must be >= 1",
                    d.name
                )));
            }
            for b in [d.domain.start, d.domain.end] {
                if let DomainBound::At(x) = b {
                    if !Time(x).on_grid(p) {
                        return Err(Error::InvalidQuery(format!(
                            "def `{}` domain bound {x} is off its grid (precision {p})",
                            d.name
                        )));
                    }
                }
            }
            self.validate_expr(&d.name, p, &d.body, Ctx::Top, &seen)?;
            seen.insert(&d.name);
        }
        if self.def(&self.output).is_none() {
            return Err(Error::InvalidQuery(format!(
                "output `{}` is not a definition",
                self.output
            )));
        }
        Ok(())
    }

    fn check_read(
        &self,
        in_def: &str,
        p_consumer: i64,
        name: &str,
        k: ReadKind,
        seen: &std::collections::BTreeSet<&str>,
    ) -> Result<()> {
        if !seen.contains(name) {
            return Err(Error::InvalidQuery(format!(
                "def `{in_def}` reads `{name}`, which is not defined before it"
            )));
        }
        let p = self.precision_of(name)?;
        let offsets = match k {
            ReadKind::Point(d) => vec![d],
            ReadKind::Window(lo, hi) => {
                if lo >= hi {
                    return Err(Error::InvalidQuery(format!(
                        "def `{in_def}` slices `{name}` with empty window ({lo}, {hi}]"
                    )));
                }
                vec![lo, hi]
            }
        };
        for d in &offsets {
            if d.abs() > MAX_OFFSET {
                return Err(Error::InvalidQuery(format!(
                    "def `{in_def}`: offset {d} on `{name}` exceeds the engine limit"
                )));
            }
        }
        if let ReadKind::Point(d) = k {
            if p_consumer % p != 0 || d % p != 0 {
                return Err(Error::InvalidQuery(format!(
                    "def `{in_def}` (precision {p_consumer}) reads `{name}[t{d:+}]` \
                     off its grid (precision {p})"
                )));
            }
        }
        Ok(())
    }

    fn validate_expr(
        &self,
        in_def: &str,
        p: i64,
        e: &IRExpr,
        ctx: Ctx,
        seen: &std::collections::BTreeSet<&str>,
    ) -> Result<()> {
        use IRExpr::*;
        match e {
            Const(_) => Ok(()),
            TimeVar(o) => {
                if ctx == Ctx::Map {
                    return Err(Error::InvalidQuery(format!(
                        "def `{in_def}`: map bodies see one element at a time; \
                         the time variable is not available there"
                    )));
                }
                if o.abs() > MAX_OFFSET {
                    return Err(Error::InvalidQuery(format!(
                        "def `{in_def}`: time offset {o} exceeds the engine limit"
                    )));
                }
                Ok(())
            }
            ValueVar => {
                if ctx != Ctx::Map {
                    return Err(Error::InvalidQuery(format!(
                        "def `{in_def}`: `vvar` is only meaningful inside a reduction map"
                    )));
                }
                Ok(())
            }
            BinOp(_, a, b) => {
                self.validate_expr(in_def, p, a, ctx, seen)?;
                self.validate_expr(in_def, p, b, ctx, seen)
            }
            UnOp(_, a) => self.validate_expr(in_def, p, a, ctx, seen),
            If(c, t, e2) => {
                self.validate_expr(in_def, p, c, ctx, seen)?;
                self.validate_expr(in_def, p, t, ctx, seen)?;
                self.validate_expr(in_def, p, e2, ctx, seen)
            }
            Index { def, offset } => {
                if ctx == Ctx::Map {
                    return Err(Error::InvalidQuery(format!(
                        "def `{in_def}`: reads are not allowed inside a reduction map"
                    )));
                }
                self.check_read(in_def, p, def, ReadKind::Point(*offset), seen)
            }
            Slice { def, lo, hi } => {
                if ctx != Ctx::Over {
                    return Err(Error::InvalidQuery(format!(
                        "def `{in_def}`: a slice of `{def}` may appear only \
                         directly under a reduction"
                    )));
                }
                self.check_read(in_def, p, def, ReadKind::Window(*lo, *hi), seen)
            }
            Reduce { over, map, .. } => {
                if ctx == Ctx::Map {
                    return Err(Error::InvalidQuery(format!(
                        "def `{in_def}`: reductions cannot nest inside a map body"
                    )));
                }
                match over.as_ref() {
                    Slice { .. } => {}
                    _ => {
                        return Err(Error::InvalidQuery(format!(
                            "def `{in_def}`: a reduction must fold a slice"
                        )))
                    }
                }
                self.validate_expr(in_def, p, over, Ctx::Over, seen)?;
                if let Some(m) = map {
                    self.validate_expr(in_def, p, m, Ctx::Map, seen)?;
                }
                Ok(())
            }
            Call(_, args) => {
                for a in args {
                    self.validate_expr(in_def, p, a, ctx, seen)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Top,
    Over,
    Map,
}
