//! The acceptance gate: eight criteria, one printed verdict line each.
//!
//! Every criterion is its own test, so `cargo test --test acceptance`
//! shows one pass/fail line per criterion even without `--nocapture`;
//! with `--nocapture` each also prints an `acceptance C<n> ...` line with
//! the measured numbers. Tolerances and thresholds are pinned as
//! constants next to the criterion that uses them.

use std::collections::BTreeMap;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use tilt::*;

/// C1: wall-clock budget for the full oracle-equivalence sweep.
const C1_BUDGET_SECONDS: f64 = 300.0;
/// C1/C2: event-count scale.
const C1_EVENTS: u64 = 100_000;
const C1_SEEDS: [u64; 3] = [1, 2, 3];
/// C4: required fused/unfused single-thread speedup on the trend query.
const C4_MIN_SPEEDUP: f64 = 1.5;
const C4_EVENTS: u64 = 10_000_000;
/// C5: required 4-thread/1-thread speedup on window-sum (≥ 8-core hosts).
const C5_MIN_SCALING: f64 = 2.0;
const C5_EVENTS: u64 = 10_000_000;
/// C7: tolerance for subtract-on-evict vs full recompute. Sliding
/// maintenance of raw power sums loses relative precision through the
/// central-moment cancellations (worst for kurtosis, whose conditioning
/// amplifies residue into the 1e-8 range after hundreds of slides), so
/// the law is pinned at 1e-6 — two orders above the observed worst case,
/// six below any real deacc defect.
const C7_SOE_TOL: f64 = 1e-6;
/// C7: tolerance for a single shuffled re-association of a 64-value fold.
const C7_SHUFFLE_TOL: f64 = 1e-9;
/// C7: tolerance for maintained-vs-fresh accumulator state (plain sums,
/// no cancellation, so drift stays near machine epsilon).
const C7_STATE_TOL: f64 = 1e-9;

fn gate(line: String, ok: bool) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("acceptance {line}: {verdict}");
    assert!(ok, "acceptance {line}: {verdict}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(r: &mut ChaCha8Rng) -> f64 {
    (r.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

// ---------------------------------------------------------------------
// C1 — oracle equivalence at scale
// ---------------------------------------------------------------------

#[test]
fn c1_oracle_equivalence() {
    let t0 = Instant::now();
    for spec in benchmarks() {
        for &seed in &C1_SEEDS {
            oracle_check(spec, C1_EVENTS, seed, true).unwrap();
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    gate(
        format!(
            "C1 oracle equivalence — 13 benchmarks x {} seeds x {} events, \
             kernel == dense oracle exactly, {elapsed:.1}s (budget {C1_BUDGET_SECONDS:.0}s)",
            C1_SEEDS.len(),
            C1_EVENTS
        ),
        elapsed < C1_BUDGET_SECONDS,
    );
}

// ---------------------------------------------------------------------
// C2 — parallel correctness
// ---------------------------------------------------------------------

const C2_THREADS: [usize; 4] = [1, 2, 4, 8];
const C2_INTERVALS: [i64; 2] = [1 << 10, 1 << 16];

/// Every compiled benchmark, executed under the full thread x interval
/// matrix, must be value-identical to the single-partition run. Floats
/// are compared with the engine's own equality; no NaNs arise, and every
/// partition folds the same values in the same order, so agreement is
/// exact, not approximate.
#[test]
fn c2_parallel_identity() {
    let reg = bench_registry();
    let mut runs = 0u32;
    for spec in benchmarks() {
        let query = spec.query(&reg).unwrap();
        let (planned, _) = plan(&query, &reg, true).unwrap();
        let cp = compile(&planned, &reg).unwrap();
        let case = spec.generate(C1_EVENTS, 9);
        runs += check_matrix(&cp, &case, spec.name);
    }

    // Adversarial streams: events wider than the small partition interval,
    // so every partition seam in range falls strictly inside some event.
    // Width 1031 is prime and exceeds 2^10; the range stops before the
    // first multiple of 1024 that is also a multiple of 1031, so no seam
    // aligns with an event boundary.
    let n_adv: i64 = 1000;
    let wide_f: Vec<Event> = (0..n_adv)
        .map(|k| Event::new(1031 * k, 1031 * (k + 1), Value::Float(k as f64 * 0.25 - 97.0)))
        .collect();
    let wide_i: Vec<Event> = (0..n_adv)
        .map(|k| Event::new(1031 * k, 1031 * (k + 1), Value::Int(k * 8 + k % 4)))
        .collect();
    let te = 1031 * n_adv;
    for events in [&wide_f, &wide_i] {
        for &interval in &C2_INTERVALS {
            let mut seam = interval;
            while seam < te {
                let straddled = events.iter().any(|e| e.start < Time(seam) && Time(seam) < e.end);
                assert!(straddled, "seam {seam} not inside any event");
                seam += interval;
            }
        }
    }
    for (bench, events) in [("windowsum", wide_f), ("ysb", wide_i)] {
        let spec = find_bench(bench).unwrap();
        let query = spec.query(&reg).unwrap();
        let (planned, _) = plan(&query, &reg, true).unwrap();
        let cp = compile(&planned, &reg).unwrap();
        let input = spec.file_input.unwrap().to_string();
        let case = BenchCase::streams(BTreeMap::from([(input, events)]), 0, te);
        runs += check_matrix(&cp, &case, bench);
    }

    gate(
        format!(
            "C2 parallel correctness — threads {C2_THREADS:?} x intervals {C2_INTERVALS:?} \
             identical to the single-partition run on all 13 benchmarks plus 2 \
             seam-straddling streams ({runs} runs)"
        ),
        true,
    );
}

fn check_matrix(cp: &CompiledPlan, case: &BenchCase, name: &str) -> u32 {
    let mut runs = 0;
    match &case.data {
        BenchData::Streams(streams) => {
            let (reference, _) =
                execute_parallel(cp, streams, case.ts, case.te, 1, i64::MAX).unwrap();
            for &threads in &C2_THREADS {
                for &interval in &C2_INTERVALS {
                    let (got, _) =
                        execute_parallel(cp, streams, case.ts, case.te, threads, interval)
                            .unwrap();
                    assert!(
                        got == reference,
                        "{name}: threads={threads} interval={interval} diverged"
                    );
                    runs += 1;
                }
            }
        }
        BenchData::Keyed(keyed) => {
            let (reference, _) =
                execute_keyed(cp, keyed, case.ts, case.te, 1, i64::MAX).unwrap();
            for &threads in &C2_THREADS {
                for &interval in &C2_INTERVALS {
                    let (got, _) =
                        execute_keyed(cp, keyed, case.ts, case.te, threads, interval).unwrap();
                    assert!(
                        got == reference,
                        "{name}: threads={threads} interval={interval} diverged (keyed)"
                    );
                    runs += 1;
                }
            }
        }
    }
    runs
}

// ---------------------------------------------------------------------
// C3 — boundary resolution
// ---------------------------------------------------------------------

/// Trend's resolved lookback must be the long window (20 ticks), and no
/// perturbation of events wholly at or before `ts - lookback` may change
/// the output on `(ts, te]`. Window-sum(10,5) must resolve lookback 10;
/// truncating its input history shows where the envelope's edge really
/// is: 9 ticks of history reproduce the output exactly, 8 do not. The
/// one-tick slack is forced by half-open windows on an integer grid —
/// the first output after `ts` sits at least one tick past `ts`, so its
/// window never reaches back the full width from `ts`. (A closed-window
/// reading would make 9 fail, but it would also sum one extra point into
/// every window, contradicting the pinned micro-case table in C8.)
#[test]
fn c3_boundary_resolution() {
    let reg = bench_registry();

    // --- trend: envelope value and perturbation inertness ---
    let spec = find_bench("trend").unwrap();
    let query = spec.query(&reg).unwrap();
    let (planned, _) = plan(&query, &reg, true).unwrap();
    assert_eq!(planned.lookback["price"], 20, "trend lookback");
    assert_eq!(planned.lookahead["price"], 0, "trend lookahead");
    let cp = compile(&planned, &reg).unwrap();

    let case = spec.generate(2000, 3);
    let BenchData::Streams(streams) = &case.data else { unreachable!() };
    let events = &streams["price"];
    let (ts, te) = (Time(1000), Time(2000));
    let (baseline, _) = execute_parallel(&cp, streams, ts, te, 1, i64::MAX).unwrap();
    assert!(!baseline.is_empty());

    let horizon = ts.offset(-20);
    let far_past: Vec<usize> = events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.end <= horizon)
        .map(|(i, _)| i)
        .collect();
    let mut r = rng(0xC3);
    for _ in 0..100 {
        let idx = far_past[(r.next_u64() as usize) % far_past.len()];
        let mut perturbed = events.clone();
        perturbed[idx].value = Value::Float(unit(&mut r) * 1000.0 - 500.0);
        let streams = BTreeMap::from([("price".to_string(), perturbed)]);
        let (got, _) = execute_parallel(&cp, &streams, ts, te, 1, i64::MAX).unwrap();
        assert!(got == baseline, "far-past perturbation changed trend output");
    }
    // Teeth check: a perturbation inside the lookback window must matter.
    // (One tick past the horizon is the envelope's slack tick — see the
    // windowsum part below — so aim two ticks in.)
    let idx = events.iter().position(|e| e.end > horizon.offset(1)).unwrap();
    let mut perturbed = events.clone();
    // A deeply negative spike drags the long average down, forcing the
    // spread positive, so the filter must emit where the baseline was φ
    // or a different value where it was not.
    perturbed[idx].value = Value::Float(-1.0e6);
    let streams_p = BTreeMap::from([("price".to_string(), perturbed)]);
    let (got, _) = execute_parallel(&cp, &streams_p, ts, te, 1, i64::MAX).unwrap();
    assert!(got != baseline, "in-window perturbation had no effect");

    // --- window-sum: envelope value and the sharp truncation edge ---
    let spec = find_bench("windowsum").unwrap();
    let query = spec.query(&reg).unwrap();
    let (planned, _) = plan(&query, &reg, true).unwrap();
    assert_eq!(planned.lookback["in"], 10, "windowsum lookback");
    let cp = compile(&planned, &reg).unwrap();

    // ts ≡ 4 (mod 5) puts the first output one tick after ts — the
    // adversarial alignment where the window reaches farthest back.
    let (ts, te) = (Time(99), Time(199));
    let full: Vec<Event> = (51..=199)
        .map(|t| Event::new(t - 1, t, Value::Float(t as f64 * 0.1)))
        .collect();
    let run = |evs: &[Event]| {
        let streams = BTreeMap::from([("in".to_string(), evs.to_vec())]);
        execute_parallel(&cp, &streams, ts, te, 1, i64::MAX).unwrap().0
    };
    let baseline = run(&full);
    assert!(!baseline.is_empty());
    let truncate = |lookback: i64| -> Vec<Event> {
        full.iter().filter(|e| e.end > ts.offset(-lookback)).cloned().collect()
    };
    let far = truncate(10);
    let nine = truncate(9);
    let eight = truncate(8);
    assert!(nine.len() < far.len() && eight.len() < nine.len());
    assert!(run(&far) == baseline, "lookback-10 history must suffice");
    assert!(run(&nine) == baseline, "lookback-9 history must suffice (one-tick slack)");
    assert!(run(&eight) != baseline, "lookback-8 history must lose a window point");

    gate(
        "C3 boundary resolution — trend lookback=20 with 100 far-past perturbations \
         inert (and an in-window perturbation visible); windowsum lookback=10, input \
         truncation exact at 9 ticks of history, output changes at 8 (half-open \
         windows on the integer grid leave exactly one tick of envelope slack)"
            .to_string(),
        true,
    );
}

// ---------------------------------------------------------------------
// C4 — fusion effect
// ---------------------------------------------------------------------

#[test]
fn c4_fusion_speedup() {
    let reg = bench_registry();
    let spec = find_bench("trend").unwrap();
    let query = spec.query(&reg).unwrap();

    let (fused, _) = plan(&query, &reg, true).unwrap();
    let (unfused, _) = plan(&query, &reg, false).unwrap();
    assert_eq!(fused.defs.len(), 1, "fusion must reduce trend to one definition");
    let cp_fused = compile(&fused, &reg).unwrap();
    let cp_unfused = compile(&unfused, &reg).unwrap();

    let case = spec.generate(C4_EVENTS, 11);
    let BenchData::Streams(streams) = &case.data else { unreachable!() };

    let (out_unfused, t_unfused) = measure(1, || {
        execute_parallel(&cp_unfused, streams, case.ts, case.te, 1, i64::MAX)
    })
    .unwrap();
    let (out_fused, t_fused) = measure(1, || {
        execute_parallel(&cp_fused, streams, case.ts, case.te, 1, i64::MAX)
    })
    .unwrap();
    assert!(out_fused.0 == out_unfused.0, "fused and unfused outputs differ");

    let speedup = t_unfused.mean_seconds() / t_fused.mean_seconds();
    gate(
        format!(
            "C4 fusion effect — trend fuses {} defs -> 1; single-thread at {} events: \
             unfused {:.2}s, fused {:.2}s, speedup {speedup:.2}x (threshold {C4_MIN_SPEEDUP}x)",
            unfused.defs.len(),
            C4_EVENTS,
            t_unfused.mean_seconds(),
            t_fused.mean_seconds()
        ),
        speedup >= C4_MIN_SPEEDUP,
    );
}

// ---------------------------------------------------------------------
// C5 — scaling shape
// ---------------------------------------------------------------------

#[test]
fn c5_thread_scaling() {
    let cores = default_threads();
    let reg = bench_registry();
    let spec = find_bench("windowsum").unwrap();
    let query = spec.query(&reg).unwrap();
    let (planned, _) = plan(&query, &reg, true).unwrap();
    let cp = compile(&planned, &reg).unwrap();
    let case = spec.generate(C5_EVENTS, 13);
    let BenchData::Streams(streams) = &case.data else { unreachable!() };

    let mut throughput = BTreeMap::new();
    for threads in [1usize, 4, 8] {
        let (_, timing) = measure(1, || {
            execute_parallel(&cp, streams, case.ts, case.te, threads, DEFAULT_INTERVAL)
        })
        .unwrap();
        throughput.insert(threads, C5_EVENTS as f64 / timing.mean_seconds());
    }
    let report: Vec<String> = throughput
        .iter()
        .map(|(t, tp)| format!("{t} thr: {:.1}M ev/s", tp / 1e6))
        .collect();
    let report = report.join(", ");

    if cores < 8 {
        // The criterion is defined on a ≥ 8-core host. This machine cannot
        // express parallel speedup, so the assertion is skipped honestly;
        // the sweep itself still ran (correctness is covered by C2) and the
        // numbers are reported.
        println!(
            "acceptance C5 scaling shape: SKIPPED — host has {cores} core(s), \
             criterion requires >= 8; measured anyway at {C5_EVENTS} events: {report}"
        );
        return;
    }
    let scaling = throughput[&4] / throughput[&1];
    gate(
        format!(
            "C5 scaling shape — windowsum at {C5_EVENTS} events on {cores} cores: \
             {report}; 4-thread/1-thread = {scaling:.2}x (threshold {C5_MIN_SCALING}x)"
        ),
        scaling >= C5_MIN_SCALING,
    );
}

// ---------------------------------------------------------------------
// C6 — iteration economy
// ---------------------------------------------------------------------

#[test]
fn c6_iteration_economy() {
    let k: usize = 100;
    let width: i64 = 150; // T = k * width ticks, so T/k = 150 >= 100
    let t_span = k as i64 * width;
    assert!(t_span / k as i64 >= 100);

    let reg = Registry::standard();
    let mut b = GraphBuilder::new();
    let src = b.source("in", 1);
    let out = b.select("scaled", src, |v| {
        IRExpr::bin(BinOp::Add, IRExpr::bin(BinOp::Mul, v, IRExpr::float(2.0)), IRExpr::float(1.0))
    });
    let query = b.finish(out).unwrap();
    let (planned, _) = plan(&query, &reg, true).unwrap();
    let cp = compile(&planned, &reg).unwrap();

    // k contiguous events with distinct values spanning T ticks: the
    // change-point iterator must visit each run boundary once instead of
    // walking all T grid points.
    let events: Vec<Event> = (0..k as i64)
        .map(|i| Event::new(i * width, (i + 1) * width, Value::Float(i as f64 * 0.5)))
        .collect();
    let streams = BTreeMap::from([("in".to_string(), events)]);
    let (buf, report) =
        execute_parallel(&cp, &streams, Time(0), Time(t_span), 1, i64::MAX).unwrap();
    assert!(!buf.is_empty());

    let evals = report.stats.evals["scaled"];
    gate(
        format!(
            "C6 iteration economy — pointwise kernel over {k} events spanning {t_span} \
             ticks (T/k = {width}) evaluated {evals} times (bound: k+1 = {})",
            k + 1
        ),
        evals <= (k + 1) as u64,
    );
}

// ---------------------------------------------------------------------
// C7 — reduction laws
// ---------------------------------------------------------------------

const C7_COMMUTATIVE: [&str; 9] = [
    "sum", "product", "count", "min", "max", "average", "stddev", "mean_std", "vib_stats",
];

fn approx_eq(a: &Value, b: &Value, tol: f64) -> bool {
    match (a, b) {
        (Value::Struct(x), Value::Struct(y)) => {
            let xf = x.fields();
            let yf = y.fields();
            xf.len() == yf.len()
                && xf.iter().zip(yf).all(|((nx, vx), (ny, vy))| nx == ny && approx_eq(vx, vy, tol))
        }
        // Numeric values compare across representations: an emptied
        // accumulator may hold Float(-6.7e-16) where a fresh one holds
        // the Int(0) it was initialized with.
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => {
                let scale = x.abs().max(y.abs()).max(1.0);
                (x - y).abs() <= tol * scale
            }
            _ => a == b,
        },
    }
}

/// Drop one named struct field (used to exempt `kurt` from value-level
/// comparison); any other value passes through unchanged.
fn strip_field(v: &Value, field: &str) -> Value {
    match v {
        Value::Struct(sv) => Value::record(
            sv.fields()
                .iter()
                .filter(|(n, _)| n != field)
                .map(|(n, f)| (n.as_str(), f.clone()))
                .collect(),
        ),
        other => other.clone(),
    }
}

fn fold(spec: &ReductionSpec, values: &[Value]) -> Value {
    if values.is_empty() {
        return Value::Phi;
    }
    let mut state = spec.init.clone();
    for v in values {
        state = (spec.acc)(&state, v).unwrap();
    }
    (spec.result)(&state).unwrap()
}

#[test]
fn c7_reduction_laws() {
    let reg = bench_registry();
    let specs = reg.reductions();

    // result(init) is defined (may be φ) for every registered spec.
    for spec in &specs {
        (spec.result)(&spec.init)
            .unwrap_or_else(|e| panic!("{}: result(init) errored: {e}", spec.name));
    }

    // Subtract-on-evict equals full recompute over 10^3 random slides.
    // The law is asserted twice over: the maintained accumulator state
    // must match a fresh fold's state tightly (that is what acc/deacc
    // guarantee), and the reported value must match the recomputed value
    // within C7_SOE_TOL. The kurtosis field alone is held to the state
    // law only: it is a quotient of two cancelling central moments, so
    // its conditioning is unbounded as window samples coincide, and no
    // fixed value-level tolerance is meaningful for it.
    let mut soe_specs = 0;
    let mut r = rng(0xC7);
    for spec in &specs {
        if !spec.invertible() {
            continue;
        }
        soe_specs += 1;
        let mut window = SlidingWindow::new(reg.reduction(&spec.name).unwrap().clone()).unwrap();
        let mut state = spec.init.clone();
        let mut held: std::collections::VecDeque<Value> = Default::default();
        for slide in 0..1000 {
            let evict = (r.next_u64() as usize) % (held.len() + 1);
            for _ in 0..evict {
                let v = held.pop_front().unwrap();
                window.evict(&v).unwrap();
                state = (spec.deacc.as_ref().unwrap())(&state, &v).unwrap();
            }
            let insert = (r.next_u64() as usize) % 5;
            for _ in 0..insert {
                // Bounded away from zero so `product` stays invertible.
                let v = Value::Float(0.5 + unit(&mut r));
                window.insert(&v).unwrap();
                state = (spec.acc)(&state, &v).unwrap();
                held.push_back(v);
            }
            let fresh_state = held
                .iter()
                .try_fold(spec.init.clone(), |s, v| (spec.acc)(&s, v))
                .unwrap();
            assert!(
                approx_eq(&state, &fresh_state, C7_STATE_TOL),
                "{} slide {slide}: maintained state {state:?} != fresh state {fresh_state:?}",
                spec.name
            );
            let incremental = window.value().unwrap();
            if held.is_empty() {
                assert!(incremental.is_phi(), "{}: empty window must be φ", spec.name);
                continue;
            }
            let recomputed = fold(spec, held.make_contiguous());
            assert!(
                approx_eq(
                    &strip_field(&incremental, "kurt"),
                    &strip_field(&recomputed, "kurt"),
                    C7_SOE_TOL
                ),
                "{} slide {slide}: subtract-on-evict {incremental:?} != recompute {recomputed:?}",
                spec.name
            );
        }
    }

    // Commutative specs are order-insensitive over 10^2 shuffles.
    for name in C7_COMMUTATIVE {
        let spec = reg.reduction(name).unwrap();
        let values: Vec<Value> = (0..64).map(|_| Value::Float(0.5 + unit(&mut r))).collect();
        let reference = fold(spec, &values);
        for shuffle in 0..100 {
            let mut shuffled = values.clone();
            for i in (1..shuffled.len()).rev() {
                let j = (r.next_u64() as usize) % (i + 1);
                shuffled.swap(i, j);
            }
            let got = fold(spec, &shuffled);
            assert!(
                approx_eq(&got, &reference, C7_SHUFFLE_TOL),
                "{name} shuffle {shuffle}: {got:?} != {reference:?}"
            );
        }
    }

    gate(
        format!(
            "C7 reduction laws — result(init) defined for all {} specs; subtract-on-evict == \
             recompute over 1000 slides for {soe_specs} invertible specs (state-level and \
             value-level; kurtosis state-level only — unbounded conditioning); {} commutative specs \
             order-insensitive over 100 shuffles (tolerances: slide {C7_SOE_TOL:e}, shuffle {C7_SHUFFLE_TOL:e})",
            specs.len(),
            C7_COMMUTATIVE.len()
        ),
        true,
    );
}

// ---------------------------------------------------------------------
// C8 — worked micro-cases
// ---------------------------------------------------------------------

#[test]
fn c8_golden_micro_cases() {
    let reg = Registry::standard();

    // Join: m=[(0,10]:a], n=[(5,15]:b] -> [(5,10]:a+b].
    let (a, b) = (2.5, 4.25);
    let mut g = GraphBuilder::new();
    let m = g.source("m", 1);
    let n = g.source("n", 1);
    let sum = g.join("sum", m, n, |l, r| IRExpr::bin(BinOp::Add, l, r));
    let query = g.finish(sum).unwrap();
    let (planned, _) = plan(&query, &reg, true).unwrap();
    let cp = compile(&planned, &reg).unwrap();
    let streams = BTreeMap::from([
        ("m".to_string(), vec![Event::new(0, 10, Value::Float(a))]),
        ("n".to_string(), vec![Event::new(5, 15, Value::Float(b))]),
    ]);
    let (got, _) = execute_parallel(&cp, &streams, Time(0), Time(15), 1, i64::MAX).unwrap();
    let want = SnapshotBuffer::from_events(
        &[Event::new(5, 10, Value::Float(a + b))],
        Time(0),
        Time(15),
        1,
    )
    .unwrap();
    assert!(got == want, "join golden: {got:?} != {want:?}");

    // Window-sum(10,5) on [(0,5]:1, (5,10]:2] -> {5->1, 10->3, 15->2}.
    let spec = find_bench("windowsum").unwrap();
    let wq = spec.query(&reg).unwrap();
    let (wp, _) = plan(&wq, &reg, true).unwrap();
    let wcp = compile(&wp, &reg).unwrap();
    let streams = BTreeMap::from([(
        "in".to_string(),
        vec![Event::new(0, 5, Value::Float(1.0)), Event::new(5, 10, Value::Float(2.0))],
    )]);
    let (got, _) = execute_parallel(&wcp, &streams, Time(0), Time(15), 1, i64::MAX).unwrap();
    for (t, want) in [(5, 1.0), (10, 3.0), (15, 2.0)] {
        let v = pointwise_view(got.value_at(Time(t)).unwrap());
        assert!(
            v == Value::Float(want),
            "windowsum golden at t={t}: {v:?} != {want}"
        );
    }

    // Snapshot encoding of [(5,10]:a] is [(5,φ),(10,a)].
    let enc =
        SnapshotBuffer::from_events(&[Event::new(5, 10, Value::Float(a))], Time(0), Time(15), 1)
            .unwrap();
    assert_eq!(enc.base(), Time(0));
    let snaps = enc.snaps();
    assert_eq!(snaps.len(), 2, "encoding golden: {snaps:?}");
    assert_eq!((snaps[0].ts, snaps[0].val.as_slice()), (Time(5), &[][..]));
    assert_eq!(
        (snaps[1].ts, snaps[1].val.as_slice()),
        (Time(10), &[Value::Float(a)][..])
    );

    gate(
        "C8 worked micro-cases — join [(0,10]:a]x[(5,15]:b] -> [(5,10]:a+b]; \
         windowsum(10,5) -> {5:1, 10:3, 15:2}; event [(5,10]:a] encodes as [(5,φ),(10,a)]"
            .to_string(),
        true,
    );
}
