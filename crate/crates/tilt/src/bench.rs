//! The benchmark registry: thirteen streaming queries with deterministic
//! synthetic generators.
//!
//! Four primitive operations (`select`, `where`, `windowsum`, `join`), the
//! Yahoo streaming benchmark (`ysb`), and eight applications drawn from
//! stock trading, signal processing, healthcare, manufacturing, and fraud
//! detection. Each entry knows how to build its query graph, how to
//! generate a reproducible input stream for a given seed, and which
//! operators it is made of (the inventory is recorded while the graph is
//! built, so it cannot drift from the query that actually runs).
//!
//! Generators use a fixed, portable PRNG (ChaCha8) and derive floats from
//! the high 53 bits of each 64-bit draw, so the same seed produces the
//! same byte-identical stream on every platform.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::exec::dense::eval_dense;
use crate::exec::kernel::{compile, CompiledPlan};
use crate::exec::Registry;
use crate::frontend::GraphBuilder;
use crate::ir::{IRExpr, Query};
use crate::runtime::{execute_keyed, execute_parallel};
use crate::time::Time;
use crate::value::{BinOp, UnOp, Value};

/// Input data for one benchmark run.
pub enum BenchData {
    /// Per-input event streams for an unkeyed query.
    Streams(BTreeMap<String, Vec<Event>>),
    /// A keyed stream; the query runs independently per key.
    Keyed(Vec<(i64, Event)>),
}

/// A generated workload: the data plus the output range to evaluate.
pub struct BenchCase {
    pub data: BenchData,
    pub ts: Time,
    pub te: Time,
    /// Number of events in the stream (for throughput reporting).
    pub events: u64,
}

impl BenchCase {
    /// Build a case from named streams; `events` is derived from the data.
    pub fn streams(data: BTreeMap<String, Vec<Event>>, ts: i64, te: i64) -> BenchCase {
        let events = data.values().map(|v| v.len() as u64).sum();
        BenchCase {
            data: BenchData::Streams(data),
            ts: Time(ts),
            te: Time(te),
            events,
        }
    }

    /// Build a keyed case; `events` is derived from the data.
    pub fn keyed(data: Vec<(i64, Event)>, ts: i64, te: i64) -> BenchCase {
        let events = data.len() as u64;
        BenchCase {
            data: BenchData::Keyed(data),
            ts: Time(ts),
            te: Time(te),
            events,
        }
    }
}

/// One registered benchmark.
pub struct BenchSpec {
    pub name: &'static str,
    /// Keyed benchmarks run the query once per key.
    pub keyed: bool,
    /// Accepts events from `--input` files (single-input queries only);
    /// the value is the query input the file feeds.
    pub file_input: Option<&'static str>,
    build: fn(&Registry) -> Result<(Query, Vec<&'static str>)>,
    gen: fn(u64, u64) -> BenchCase,
}

impl std::fmt::Debug for BenchSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchSpec")
            .field("name", &self.name)
            .field("keyed", &self.keyed)
            .finish_non_exhaustive()
    }
}

impl BenchSpec {
    /// Build the query graph.
    pub fn query(&self, reg: &Registry) -> Result<Query> {
        Ok((self.build)(reg)?.0)
    }

    /// The operators the query is built from, sorted. Compound statistics
    /// contribute their constituents (`rsi` is two averages).
    pub fn inventory(&self, reg: &Registry) -> Result<Vec<&'static str>> {
        let mut inv = (self.build)(reg)?.1;
        inv.sort_unstable();
        Ok(inv)
    }

    /// Generate the synthetic workload for this benchmark.
    pub fn generate(&self, events: u64, seed: u64) -> BenchCase {
        (self.gen)(events, seed)
    }
}

/// The function registry benchmarks run against: every standard reduction
/// plus the scalar packers used by the vibration query.
pub fn bench_registry() -> Registry {
    let mut reg = Registry::standard();
    // Crest factor = peak / rms, packed with the stats it came from.
    reg.register_scalar("vib_crest", |args| {
        let peak = numf(&args[0])?;
        let rms = field_f(&args[1], "rms")?;
        let crest = if rms > 0.0 {
            Value::Float(peak / rms)
        } else {
            Value::Phi
        };
        Ok(Value::record(vec![
            ("crest", crest),
            ("rms", Value::Float(rms)),
            ("kurt", field(&args[1], "kurt")?),
        ]))
    });
    reg.register_scalar("vib_pack", |args| {
        Ok(Value::record(vec![
            ("crest", field(&args[0], "crest")?),
            ("rms", field(&args[0], "rms")?),
            ("kurt", field(&args[0], "kurt")?),
            ("mean", args[1].clone()),
        ]))
    });
    reg
}

fn numf(v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Type(format!("expected a number, got {v:?}")))
}

fn field(v: &Value, name: &str) -> Result<Value> {
    match v {
        Value::Struct(s) => s
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Type(format!("struct has no field `{name}`"))),
        other => Err(Error::Type(format!("expected a struct, got {other:?}"))),
    }
}

fn field_f(v: &Value, name: &str) -> Result<f64> {
    numf(&field(v, name)?)
}

/// All registered benchmarks, in registry order.
pub fn benchmarks() -> &'static [BenchSpec] {
    &REGISTRY
}

/// Look a benchmark up by name; the error lists every valid name.
pub fn find_bench(name: &str) -> Result<&'static BenchSpec> {
    REGISTRY.iter().find(|b| b.name == name).ok_or_else(|| {
        let names: Vec<&str> = REGISTRY.iter().map(|b| b.name).collect();
        Error::InvalidArg(format!(
            "unknown benchmark `{name}`; valid names: {}",
            names.join(", ")
        ))
    })
}

static REGISTRY: [BenchSpec; 13] = [
    BenchSpec {
        name: "select",
        keyed: false,
        file_input: Some("in"),
        build: build_select,
        gen: gen_select,
    },
    BenchSpec {
        name: "where",
        keyed: false,
        file_input: Some("in"),
        build: build_where,
        gen: gen_where,
    },
    BenchSpec {
        name: "windowsum",
        keyed: false,
        file_input: Some("in"),
        build: build_windowsum,
        gen: gen_windowsum,
    },
    BenchSpec {
        name: "join",
        keyed: false,
        file_input: None,
        build: build_join,
        gen: gen_join,
    },
    BenchSpec {
        name: "ysb",
        keyed: false,
        file_input: Some("events"),
        build: build_ysb,
        gen: gen_ysb,
    },
    BenchSpec {
        name: "trend",
        keyed: false,
        file_input: Some("price"),
        build: build_trend,
        gen: gen_trend,
    },
    BenchSpec {
        name: "rsi",
        keyed: false,
        file_input: Some("price"),
        build: build_rsi,
        gen: gen_rsi,
    },
    BenchSpec {
        name: "norm",
        keyed: false,
        file_input: Some("x"),
        build: build_norm,
        gen: gen_norm,
    },
    BenchSpec {
        name: "impute",
        keyed: false,
        file_input: Some("signal"),
        build: build_impute,
        gen: gen_impute,
    },
    BenchSpec {
        name: "resample",
        keyed: false,
        file_input: Some("signal"),
        build: build_resample,
        gen: gen_resample,
    },
    BenchSpec {
        name: "pantom",
        keyed: false,
        file_input: Some("ecg"),
        build: build_pantom,
        gen: gen_pantom,
    },
    BenchSpec {
        name: "vibration",
        keyed: false,
        file_input: Some("accel"),
        build: build_vibration,
        gen: gen_vibration,
    },
    BenchSpec {
        name: "fraud",
        keyed: true,
        file_input: Some("amount"),
        build: build_fraud,
        gen: gen_fraud,
    },
];

// ---------------------------------------------------------------------------
// Graph construction, with the operator inventory recorded as we build.

/// A [`GraphBuilder`] wrapper that records one inventory token per operator
/// it emits; windowed aggregations contribute their reduction's
/// constituents from the registry.
struct Recorded<'r> {
    g: GraphBuilder,
    reg: &'r Registry,
    inv: Vec<&'static str>,
}

use crate::frontend::Node;

impl<'r> Recorded<'r> {
    fn new(reg: &'r Registry) -> Recorded<'r> {
        Recorded {
            g: GraphBuilder::new(),
            reg,
            inv: Vec::new(),
        }
    }

    fn source(&mut self, name: &str, precision: i64) -> Node {
        self.g.source(name, precision)
    }

    fn select(&mut self, name: &str, input: Node, f: impl FnOnce(IRExpr) -> IRExpr) -> Node {
        self.inv.push("Select");
        self.g.select(name, input, f)
    }

    fn filter(&mut self, name: &str, input: Node, pred: impl FnOnce(IRExpr) -> IRExpr) -> Node {
        self.inv.push("Where");
        self.g.filter(name, input, pred)
    }

    fn shift(&mut self, name: &str, input: Node, delta: i64) -> Node {
        self.inv.push("Shift");
        self.g.shift(name, input, delta)
    }

    fn join(
        &mut self,
        name: &str,
        l: Node,
        r: Node,
        f: impl FnOnce(IRExpr, IRExpr) -> IRExpr,
    ) -> Node {
        self.inv.push("Join");
        self.g.join(name, l, r, f)
    }

    fn chop(&mut self, name: &str, input: Node, precision: i64) -> Node {
        self.inv.push("Chop");
        self.g.chop(name, input, precision)
    }

    fn window(
        &mut self,
        name: &str,
        input: Node,
        spec: &str,
        width: i64,
        stride: i64,
    ) -> Result<Node> {
        self.inv.extend(self.reg.reduction(spec)?.inventory.iter());
        Ok(self.g.window(name, input, spec, width, stride))
    }

    fn finish(self, out: Node) -> Result<(Query, Vec<&'static str>)> {
        Ok((self.g.finish(out)?, self.inv))
    }
}

fn fl(x: f64) -> IRExpr {
    IRExpr::float(x)
}

// --- primitives -----------------------------------------------------------

/// Pointwise arithmetic map over every event.
fn build_select(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let src = b.source("in", 1);
    let out = b.select("scaled", src, |v| {
        IRExpr::bin(BinOp::Add, IRExpr::bin(BinOp::Mul, v, fl(2.0)), fl(1.0))
    });
    b.finish(out)
}

/// Keep only positive samples.
fn build_where(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let src = b.source("in", 1);
    let out = b.filter("positive", src, |v| IRExpr::bin(BinOp::Gt, v, fl(0.0)));
    b.finish(out)
}

/// Sliding sum, 10-tick window every 5 ticks.
fn build_windowsum(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let src = b.source("in", 1);
    let out = b.window("sum10", src, "sum", 10, 5)?;
    b.finish(out)
}

/// Temporal join of two streams on the common grid.
fn build_join(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let l = b.source("l", 1);
    let r = b.source("r", 1);
    let out = b.join("sum", l, r, |a, c| IRExpr::bin(BinOp::Add, a, c));
    b.finish(out)
}

// --- Yahoo streaming benchmark -------------------------------------------

/// Events carry `ad_id * 8 + event_type`; keep purchases (type 2), project
/// the ad, and count ads per 1000-tick tumbling window.
fn build_ysb(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let src = b.source("events", 1);
    let purchases = b.filter("purchases", src, |v| {
        IRExpr::bin(
            BinOp::Eq,
            IRExpr::bin(BinOp::Mod, v, IRExpr::int(8)),
            IRExpr::int(2),
        )
    });
    let ads = b.select("ads", purchases, |v| {
        IRExpr::bin(BinOp::Sub, v.clone(), IRExpr::bin(BinOp::Mod, v, IRExpr::int(8)))
    });
    let out = b.window("counts", ads, "count", 1000, 1000)?;
    b.finish(out)
}

// --- stock trading --------------------------------------------------------

/// Short (10-tick) vs long (20-tick) moving average of the price; emit the
/// positive part of their gap — the periods where the price trends upward.
fn build_trend(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let price = b.source("price", 1);
    let short = b.window("avg10", price, "average", 10, 1)?;
    let long = b.window("avg20", price, "average", 20, 1)?;
    let gap = b.join("gap", short, long, |s, l| IRExpr::bin(BinOp::Sub, s, l));
    let out = b.filter("uptrend", gap, |v| IRExpr::bin(BinOp::Gt, v, fl(0.0)));
    b.finish(out)
}

/// Relative strength index over a 14-period window of price changes.
fn build_rsi(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let price = b.source("price", 1);
    let prev = b.shift("prev", price, 1);
    let change = b.join("change", price, prev, |p, q| IRExpr::bin(BinOp::Sub, p, q));
    let out = b.window("rsi14", change, "rsi", 14, 1)?;
    b.finish(out)
}

// --- data cleaning / preparation ------------------------------------------

/// Standard-score normalization against the statistics of the trailing
/// 10-second window (100 ticks at 10 Hz).
fn build_norm(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let x = b.source("x", 1);
    let stats = b.window("stats", x, "mean_std", 100, 1)?;
    let out = b.join("zscore", x, stats, |v, s| {
        let mean = IRExpr::un(UnOp::Field("mean".into()), s.clone());
        let std = IRExpr::un(UnOp::Field("std".into()), s);
        IRExpr::if_(
            IRExpr::bin(BinOp::Gt, std.clone(), fl(0.0)),
            IRExpr::bin(BinOp::Div, IRExpr::bin(BinOp::Sub, v, mean), std),
            IRExpr::phi(),
        )
    });
    b.finish(out)
}

/// Fill dropouts with the average of the trailing 10-second window (100
/// ticks at 10 Hz), as of the previous tick.
fn build_impute(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let x = b.source("signal", 1);
    let avg = b.window("avg10s", x, "average", 100, 1)?;
    let lag = b.shift("lag", avg, 1);
    let out = b.join("filled", x, lag, |v, a| {
        IRExpr::if_(IRExpr::un(UnOp::IsPhi, v.clone()), a, v)
    });
    b.finish(out)
}

/// Linear-interpolation resampling: calibrate the raw samples, interpolate
/// between consecutive sample instants, and re-grid from a 5-tick sample
/// period onto a 3-tick one.
fn build_resample(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    const PERIOD: i64 = 5; // input sample spacing, in ticks
    const TARGET: i64 = 3; // output grid
    let mut b = Recorded::new(reg);
    let raw = b.source("signal", 1);
    let cal = b.select("calibrated", raw, |v| {
        IRExpr::bin(BinOp::Add, IRExpr::bin(BinOp::Mul, v, fl(0.125)), fl(4.0))
    });
    let prev = b.shift("prev", cal, PERIOD);
    let interp = b.join("interp", cal, prev, |cur, old| {
        // Position of t between the surrounding sample instants, in (0, 1]:
        // ((t − 1) mod PERIOD + 1) / PERIOD.
        let frac = IRExpr::bin(
            BinOp::Div,
            IRExpr::bin(
                BinOp::Add,
                IRExpr::bin(
                    BinOp::Mod,
                    IRExpr::bin(BinOp::Sub, IRExpr::TimeVar(0), IRExpr::int(1)),
                    IRExpr::int(PERIOD),
                ),
                IRExpr::int(1),
            ),
            IRExpr::int(PERIOD),
        );
        IRExpr::bin(
            BinOp::Add,
            old.clone(),
            IRExpr::bin(BinOp::Mul, IRExpr::bin(BinOp::Sub, cur, old), frac),
        )
    });
    let out = b.chop("resampled", interp, TARGET);
    b.finish(out)
}

// --- healthcare -----------------------------------------------------------

/// QRS detection stages: five-point smoothing, five-point derivative,
/// squaring, 150-tick moving-window integration, final three-point smooth.
fn build_pantom(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let ecg = b.source("ecg", 1);
    let smooth = b.window("smooth", ecg, "pt_smooth5", 5, 1)?;
    let deriv = b.window("deriv", smooth, "pt_deriv5", 5, 1)?;
    let squared = b.select("squared", deriv, |v| IRExpr::bin(BinOp::Mul, v.clone(), v));
    let integ = b.window("integrated", squared, "average", 150, 1)?;
    let out = b.window("peaks", integ, "pt_smooth3", 3, 1)?;
    b.finish(out)
}

// --- manufacturing --------------------------------------------------------

/// Kurtosis, RMS, crest factor, and mean over 100-tick tumbling windows;
/// the crest peak is smoothed over the last three windows.
fn build_vibration(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let accel = b.source("accel", 1);
    let peak = b.window("peak", accel, "max", 100, 100)?;
    let peak_s = b.window("peak_smooth", peak, "average", 300, 100)?;
    let mean = b.window("mean", accel, "average", 100, 100)?;
    let stats = b.window("stats", accel, "vib_stats", 100, 100)?;
    let crest = b.join("crest", peak_s, stats, |p, s| {
        IRExpr::Call("vib_crest".into(), vec![p, s])
    });
    let out = b.join("vib", crest, mean, |c, m| {
        IRExpr::Call("vib_pack".into(), vec![c, m])
    });
    b.finish(out)
}

// --- financial ------------------------------------------------------------

/// Per-customer fraud flags: amounts exceeding μ + 3σ of the trailing
/// 10-day window, with the statistics taken as of the previous day.
fn build_fraud(reg: &Registry) -> Result<(Query, Vec<&'static str>)> {
    let mut b = Recorded::new(reg);
    let amount = b.source("amount", 1);
    let stats = b.window("stats", amount, "mean_std", 10, 1)?;
    let lag = b.shift("lagstats", stats, 1);
    let out = b.join("flagged", amount, lag, |v, s| {
        let mean = IRExpr::un(UnOp::Field("mean".into()), s.clone());
        let std = IRExpr::un(UnOp::Field("std".into()), s);
        let threshold = IRExpr::bin(
            BinOp::Add,
            mean,
            IRExpr::bin(BinOp::Mul, fl(3.0), std),
        );
        IRExpr::if_(
            IRExpr::bin(BinOp::Gt, v.clone(), threshold),
            v,
            IRExpr::phi(),
        )
    });
    b.finish(out)
}

// ---------------------------------------------------------------------------
// Synthetic generators.

/// A uniform draw in [0, 1) from the high 53 bits of one 64-bit output.
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A random walk of unit-width events: `n` contiguous ticks of float
/// samples stepping by ±`step` around `start`.
fn walk(n: u64, seed: u64, stream: u64, start: f64, step: f64) -> Vec<Event> {
    let mut rng = rng_for(seed, stream);
    let mut level = start;
    let mut out = Vec::with_capacity(n as usize);
    for t in 0..n as i64 {
        level += (unit_f64(&mut rng) - 0.5) * 2.0 * step;
        out.push(Event::new(t, t + 1, Value::Float(level)));
    }
    out
}

fn gen_select(n: u64, seed: u64) -> BenchCase {
    let data = BTreeMap::from([("in".to_string(), walk(n, seed, 0, 50.0, 1.0))]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_where(n: u64, seed: u64) -> BenchCase {
    // A walk around zero, so the predicate flips regularly.
    let data = BTreeMap::from([("in".to_string(), walk(n, seed, 0, 0.0, 1.0))]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_windowsum(n: u64, seed: u64) -> BenchCase {
    let data = BTreeMap::from([("in".to_string(), walk(n, seed, 0, 10.0, 0.5))]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_join(n: u64, seed: u64) -> BenchCase {
    // Two walks; the right stream drops ~10% of its ticks so the join sees
    // φ on one side.
    let per = n / 2;
    let l = walk(per, seed, 0, 5.0, 0.5);
    let mut rng = rng_for(seed, 1);
    let mut level = -5.0;
    let mut r = Vec::with_capacity(per as usize);
    for t in 0..per as i64 {
        level += (unit_f64(&mut rng) - 0.5) * 1.0;
        if unit_f64(&mut rng) < 0.1 {
            continue; // dropout
        }
        r.push(Event::new(t, t + 1, Value::Float(level)));
    }
    let data = BTreeMap::from([("l".to_string(), l), ("r".to_string(), r)]);
    BenchCase::streams(data, 0, per as i64)
}

fn gen_ysb(n: u64, seed: u64) -> BenchCase {
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(n as usize);
    for t in 0..n as i64 {
        let ad_id = (rng.next_u64() % 1021) as i64;
        let etype = (rng.next_u64() % 4) as i64;
        out.push(Event::new(t, t + 1, Value::Int(ad_id * 8 + etype)));
    }
    let data = BTreeMap::from([("events".to_string(), out)]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_trend(n: u64, seed: u64) -> BenchCase {
    let data = BTreeMap::from([("price".to_string(), walk(n, seed, 0, 100.0, 0.8))]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_rsi(n: u64, seed: u64) -> BenchCase {
    let data = BTreeMap::from([("price".to_string(), walk(n, seed, 0, 100.0, 1.2))]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_norm(n: u64, seed: u64) -> BenchCase {
    // Uniform floats on a drifting baseline, 10 Hz ticks.
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(n as usize);
    for t in 0..n as i64 {
        let v = unit_f64(&mut rng) * 10.0 + (t as f64 / 1000.0).sin() * 3.0;
        out.push(Event::new(t, t + 1, Value::Float(v)));
    }
    let data = BTreeMap::from([("x".to_string(), out)]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_impute(n: u64, seed: u64) -> BenchCase {
    // ~15% dropout: n events spread over a proportionally longer range.
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(n as usize);
    let mut level = 20.0;
    let mut t = 0i64;
    while out.len() < n as usize {
        level += (unit_f64(&mut rng) - 0.5) * 0.6;
        if unit_f64(&mut rng) >= 0.15 {
            out.push(Event::new(t, t + 1, Value::Float(level)));
        }
        t += 1;
    }
    let data = BTreeMap::from([("signal".to_string(), out)]);
    BenchCase::streams(data, 0, t)
}

fn gen_resample(n: u64, seed: u64) -> BenchCase {
    // Samples held for 5 ticks each: a staircase at the source rate.
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(n as usize);
    let mut level = 0.0;
    for k in 0..n as i64 {
        level += (unit_f64(&mut rng) - 0.5) * 4.0;
        out.push(Event::new(k * 5, (k + 1) * 5, Value::Float(level)));
    }
    let data = BTreeMap::from([("signal".to_string(), out)]);
    BenchCase::streams(data, 0, n as i64 * 5)
}

fn gen_pantom(n: u64, seed: u64) -> BenchCase {
    // Baseline noise with a QRS-like spike train every ~180 ticks.
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(n as usize);
    for t in 0..n as i64 {
        let phase = t % 180;
        let spike = match phase {
            88 => -0.4,
            89..=91 => 1.6,
            92 => -0.6,
            _ => 0.0,
        };
        let v = spike + (unit_f64(&mut rng) - 0.5) * 0.2;
        out.push(Event::new(t, t + 1, Value::Float(v)));
    }
    let data = BTreeMap::from([("ecg".to_string(), out)]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_vibration(n: u64, seed: u64) -> BenchCase {
    // Zero-mean oscillation with occasional impact spikes (heavy tails —
    // that is what the kurtosis is for).
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(n as usize);
    for t in 0..n as i64 {
        let mut v = (unit_f64(&mut rng) - 0.5) * 2.0;
        if rng.next_u64() % 97 == 0 {
            v *= 6.0;
        }
        out.push(Event::new(t, t + 1, Value::Float(v)));
    }
    let data = BTreeMap::from([("accel".to_string(), out)]);
    BenchCase::streams(data, 0, n as i64)
}

fn gen_fraud(n: u64, seed: u64) -> BenchCase {
    // ~16 transactions per day spread over 32 customers; a 2% chance of an
    // outsized purchase. One tick is one day; per-customer events never
    // overlap because a customer's next transaction lands on a later day.
    const KEYS: u64 = 32;
    let mut rng = rng_for(seed, 0);
    let mut last: BTreeMap<i64, i64> = BTreeMap::new();
    let mut out = Vec::with_capacity(n as usize);
    let mut te = 0i64;
    for i in 0..n {
        let key = (rng.next_u64() % KEYS) as i64;
        let mut amount = 10.0 + unit_f64(&mut rng) * 5.0;
        if unit_f64(&mut rng) < 0.02 {
            amount *= 8.0;
        }
        let day = (i / (KEYS / 2)) as i64;
        let day = match last.get(&key) {
            Some(&d) if d >= day => d + 1,
            _ => day,
        };
        last.insert(key, day);
        te = te.max(day + 1);
        out.push((key, Event::new(day, day + 1, Value::Float(amount))));
    }
    BenchCase::keyed(out, 0, te)
}

// ---------------------------------------------------------------------------
// Oracle cross-check.

/// Run `spec` through the compiled kernel and through the dense oracle and
/// demand byte-identical output. Keyed benchmarks are checked per key.
pub fn oracle_check(spec: &BenchSpec, events: u64, seed: u64, fuse: bool) -> Result<()> {
    let reg = bench_registry();
    let query = spec.query(&reg)?;
    let (planned, _) = crate::passes::plan(&query, &reg, fuse)?;
    let plan = compile(&planned, &reg)?;
    let case = spec.generate(events, seed);
    verify_case(&plan, &reg, &case).map_err(|e| match e {
        Error::InvalidQuery(msg) => {
            Error::InvalidQuery(format!("benchmark `{}` (seed {seed}): {msg}", spec.name))
        }
        other => other,
    })
}

/// Check one workload's kernel output against the dense oracle.
pub fn verify_case(plan: &CompiledPlan, reg: &Registry, case: &BenchCase) -> Result<()> {
    match &case.data {
        BenchData::Streams(streams) => {
            let (got, _) = execute_parallel(plan, streams, case.ts, case.te, 1, i64::MAX)?;
            let want = eval_dense(&plan.query, reg, streams, case.ts, case.te)?;
            if got != want {
                return Err(Error::InvalidQuery(
                    "kernel output diverges from the dense oracle".into(),
                ));
            }
        }
        BenchData::Keyed(keyed) => {
            let (got, _) = execute_keyed(plan, keyed, case.ts, case.te, 1, i64::MAX)?;
            let input = plan.query.inputs[0].name.clone();
            let mut per_key: BTreeMap<i64, Vec<Event>> = BTreeMap::new();
            for (k, e) in keyed {
                per_key.entry(*k).or_default().push(e.clone());
            }
            for (k, evs) in per_key {
                let streams = BTreeMap::from([(input.clone(), evs)]);
                let want = eval_dense(&plan.query, reg, &streams, case.ts, case.te)?;
                let got_k = got.get(&k).ok_or_else(|| {
                    Error::InvalidQuery(format!("missing output for key {k}"))
                })?;
                if *got_k != want {
                    return Err(Error::InvalidQuery(format!(
                        "key {k}: kernel output diverges from the dense oracle"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::pointwise_view;
    use crate::passes::plan;
    use crate::ssbuf::SnapshotBuffer;

    /// The single value in effect at `t`.
    fn at(buf: &SnapshotBuffer, t: i64) -> Value {
        pointwise_view(buf.value_at(Time(t)).unwrap())
    }

    /// Table of expected operator constituents, sorted.
    const EXPECTED_INVENTORY: [(&str, &[&str]); 13] = [
        ("select", &["Select"]),
        ("where", &["Where"]),
        ("windowsum", &["Sum"]),
        ("join", &["Join"]),
        ("ysb", &["Count", "Select", "Where"]),
        ("trend", &["Avg", "Avg", "Join", "Where"]),
        ("rsi", &["Avg", "Avg", "Join", "Shift"]),
        ("norm", &["Avg", "Join", "StdDev"]),
        ("impute", &["Avg", "Join", "Shift"]),
        ("resample", &["Chop", "Join", "Select", "Shift"]),
        (
            "pantom",
            &["Avg", "Custom-Agg", "Custom-Agg", "Custom-Agg", "Select"],
        ),
        (
            "vibration",
            &["Avg", "Avg", "Custom-Agg", "Join", "Join", "Max"],
        ),
        ("fraud", &["Avg", "Join", "Shift", "StdDev"]),
    ];

    #[test]
    fn operator_inventories_match_the_published_table() {
        let reg = bench_registry();
        assert_eq!(benchmarks().len(), EXPECTED_INVENTORY.len());
        for (name, want) in EXPECTED_INVENTORY {
            let spec = find_bench(name).unwrap();
            let got = spec.inventory(&reg).unwrap();
            assert_eq!(got, want, "inventory mismatch for `{name}`");
        }
    }

    #[test]
    fn unknown_benchmark_error_lists_valid_names() {
        let err = find_bench("nosuch").unwrap_err().to_string();
        for spec in benchmarks() {
            assert!(err.contains(spec.name), "error should mention {}", spec.name);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        for spec in benchmarks() {
            let a = spec.generate(500, 7);
            let b = spec.generate(500, 7);
            let c = spec.generate(500, 8);
            match (&a.data, &b.data, &c.data) {
                (BenchData::Streams(x), BenchData::Streams(y), BenchData::Streams(z)) => {
                    assert_eq!(x, y, "{}: same seed must agree", spec.name);
                    assert_ne!(x, z, "{}: different seeds must differ", spec.name);
                }
                (BenchData::Keyed(x), BenchData::Keyed(y), BenchData::Keyed(z)) => {
                    assert_eq!(x, y, "{}: same seed must agree", spec.name);
                    assert_ne!(x, z, "{}: different seeds must differ", spec.name);
                }
                _ => panic!("generator changed shape between calls"),
            }
        }
    }

    #[test]
    fn every_benchmark_matches_the_oracle_at_small_scale() {
        for spec in benchmarks() {
            for seed in [1, 2] {
                for fuse in [false, true] {
                    oracle_check(spec, 2_000, seed, fuse).unwrap_or_else(|e| {
                        panic!("{} (seed {seed}, fuse {fuse}): {e}", spec.name)
                    });
                }
            }
        }
    }

    /// Fusion collapses each benchmark to a pinned number of definitions;
    /// these freeze the optimizer's strength on the full suite.
    #[test]
    fn fused_definition_counts_are_pinned() {
        let expected: [(&str, usize); 13] = [
            ("select", 1),
            ("where", 1),
            ("windowsum", 1),
            ("join", 1),
            ("ysb", 1),
            ("trend", 1),
            ("rsi", 2),
            ("norm", 1),
            ("impute", 1),
            ("resample", 1),
            ("pantom", 4),
            ("vibration", 2),
            ("fraud", 1),
        ];
        let reg = bench_registry();
        for (name, want) in expected {
            let q = find_bench(name).unwrap().query(&reg).unwrap();
            let (fused, _) = plan(&q, &reg, true).unwrap();
            assert_eq!(
                fused.defs.len(),
                want,
                "`{name}` should fuse to {want} definition(s)"
            );
        }
    }

    #[test]
    fn trend_lookback_is_the_long_window() {
        let reg = bench_registry();
        let q = find_bench("trend").unwrap().query(&reg).unwrap();
        let (resolved, _) = crate::passes::resolve_boundaries(&q).unwrap();
        assert_eq!(resolved.lookback["price"], 20);
        assert_eq!(resolved.lookahead["price"], 0);
    }

    #[test]
    fn ysb_counts_purchases_per_tumbling_window() {
        // Hand-built stream: ads 8k+2 are purchases. Window (0, 1000]
        // holds three purchase events; distinct ad codes keep them as
        // separate runs.
        let reg = bench_registry();
        let q = find_bench("ysb").unwrap().query(&reg).unwrap();
        let events = vec![
            Event::new(0, 1, Value::Int(8 * 5 + 2)),
            Event::new(1, 2, Value::Int(8 * 9 + 0)),
            Event::new(2, 3, Value::Int(8 * 7 + 2)),
            Event::new(3, 4, Value::Int(8 * 7 + 1)),
            Event::new(4, 5, Value::Int(8 * 3 + 2)),
        ];
        let streams = BTreeMap::from([("events".to_string(), events)]);
        let out = eval_dense(&q, &reg, &streams, Time(0), Time(2000)).unwrap();
        assert_eq!(at(&out, 900), Value::Int(3));
        // A window with no events carries no information: φ, not zero.
        assert_eq!(at(&out, 1500), Value::Phi);
    }

    #[test]
    fn resample_interpolates_between_sample_instants() {
        // Two raw samples held 5 ticks each: calibrated to 4.0 and 5.0.
        // At t = 6 the interpolation sits 1/5 of the way from 4.0 to 5.0.
        let reg = bench_registry();
        let q = find_bench("resample").unwrap().query(&reg).unwrap();
        let events = vec![
            Event::new(0, 5, Value::Float(0.0)),  // calibrates to 4.0
            Event::new(5, 10, Value::Float(8.0)), // calibrates to 5.0
        ];
        let streams = BTreeMap::from([("signal".to_string(), events)]);
        let out = eval_dense(&q, &reg, &streams, Time(0), Time(10)).unwrap();
        // Output grid is every 3 ticks: t = 3, 6, 9. The first period has
        // no previous sample to interpolate from, so it is φ.
        assert_eq!(at(&out, 3), Value::Phi);
        assert_eq!(at(&out, 6), Value::Float(4.2));
        assert_eq!(at(&out, 9), Value::Float(4.8));
    }

    #[test]
    fn impute_fills_gaps_with_the_trailing_average() {
        let reg = bench_registry();
        let q = find_bench("impute").unwrap().query(&reg).unwrap();
        let events = vec![
            Event::new(0, 1, Value::Float(2.0)),
            Event::new(1, 2, Value::Float(4.0)),
            // gap at (2, 3]
            Event::new(3, 4, Value::Float(6.0)),
        ];
        let streams = BTreeMap::from([("signal".to_string(), events)]);
        let out = eval_dense(&q, &reg, &streams, Time(0), Time(4)).unwrap();
        assert_eq!(at(&out, 1), Value::Float(2.0));
        assert_eq!(at(&out, 2), Value::Float(4.0));
        // The gap takes the average of the samples seen through t = 2.
        assert_eq!(at(&out, 3), Value::Float(3.0));
        assert_eq!(at(&out, 4), Value::Float(6.0));
    }

    #[test]
    fn fraud_flags_only_outliers() {
        let reg = bench_registry();
        let q = find_bench("fraud").unwrap().query(&reg).unwrap();
        // Nine steady days then a spike: μ≈10.2, σ small, 80 ≫ μ + 3σ.
        let mut events: Vec<Event> = (0..9)
            .map(|d| Event::new(d, d + 1, Value::Float(10.0 + 0.05 * d as f64)))
            .collect();
        events.push(Event::new(9, 10, Value::Float(80.0)));
        events.push(Event::new(10, 11, Value::Float(10.3)));
        let streams = BTreeMap::from([("amount".to_string(), events)]);
        let out = eval_dense(&q, &reg, &streams, Time(0), Time(11)).unwrap();
        assert_eq!(at(&out, 10), Value::Float(80.0));
        assert_eq!(at(&out, 5), Value::Phi);
        assert_eq!(at(&out, 11), Value::Phi);
    }

    #[test]
    fn vibration_reports_all_four_metrics() {
        let reg = bench_registry();
        let spec = find_bench("vibration").unwrap();
        let q = spec.query(&reg).unwrap();
        let case = spec.generate(600, 3);
        let BenchData::Streams(streams) = &case.data else {
            panic!("vibration is unkeyed")
        };
        let out = eval_dense(&q, &reg, streams, case.ts, case.te).unwrap();
        let v = at(&out, 400);
        let Value::Struct(s) = &v else {
            panic!("expected a struct, got {v:?}")
        };
        for f in ["crest", "rms", "kurt", "mean"] {
            assert!(s.get(f).is_some(), "missing field {f}");
        }
        let crest = s.get("crest").unwrap().as_f64().unwrap();
        let rms = s.get("rms").unwrap().as_f64().unwrap();
        assert!(crest >= 1.0, "peak can never sit below the rms");
        assert!(rms > 0.0);
    }
}
