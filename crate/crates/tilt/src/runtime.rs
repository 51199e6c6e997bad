//! Synchronization-free data-parallel execution.
//!
//! The output range `(ts, te]` is cut into fixed-width intervals. Each
//! partition is an independent, self-contained job: it takes the events
//! its input need-ranges reach (resolved lookback behind it, lookahead
//! ahead of it), runs the full compiled plan over its sub-range, and
//! produces the output buffer for exactly that sub-range. Workers share
//! nothing but an atomic work counter — no locks around data, no
//! cross-partition messages — which is why the result is bit-identical to
//! a single-threaded run for every thread count: each partition's output
//! is *provably* the global output clipped to its range, so the merge is
//! pure concatenation plus restoring normal form at the seams (coalescing
//! equal neighbors, materializing implicit φ tails, trimming the final
//! one).
//!
//! Keyed execution ([`execute_keyed`]) runs the same plan once per key
//! over that key's event substream, scheduling (key × partition) tasks on
//! the same worker pool.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::exec::kernel::{CompiledPlan, KernelStats};
use crate::ssbuf::{Snapshot, SnapshotBuffer};
use crate::time::Time;

/// Default partition width in ticks.
pub const DEFAULT_INTERVAL: i64 = 1 << 16;

/// Worker count: explicit argument, else the `TILT_THREADS` environment
/// variable, else the machine's available parallelism.
pub fn default_threads() -> usize {
    if let Ok(v) = std::env::var("TILT_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// What one parallel run did.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub threads: usize,
    pub partitions: usize,
    pub stats: KernelStats,
}

/// Build the per-partition event slice for one input: everything that can
/// influence value coverage of `(need_lo, need_hi]` on grid `p`.
fn slice_events(events: &[Event], need_lo: Time, need_hi: Time, p: i64) -> Vec<Event> {
    events
        .iter()
        .filter(|e| e.start < need_hi && e.end > need_lo.offset(-p))
        .cloned()
        .collect()
}

/// Execute `plan` over `(ts, te]` with `threads` workers and the given
/// partition width. Returns the merged output buffer and a report.
pub fn execute_parallel(
    plan: &CompiledPlan,
    events: &BTreeMap<String, Vec<Event>>,
    ts: Time,
    te: Time,
    threads: usize,
    interval: i64,
) -> Result<(SnapshotBuffer, RunReport)> {
    if interval <= 0 {
        return Err(Error::InvalidArg(format!(
            "interval must be positive, got {interval}"
        )));
    }
    if threads == 0 {
        return Err(Error::InvalidArg("thread count must be at least 1".into()));
    }
    if te < ts {
        return Err(Error::InvalidArg(format!(
            "range ({ts}, {te}] is reversed"
        )));
    }
    for i in &plan.query.inputs {
        if !events.contains_key(&i.name) {
            return Err(Error::InvalidArg(format!(
                "no events supplied for input `{}`",
                i.name
            )));
        }
    }

    // Partition boundaries.
    let mut cuts = vec![ts];
    let mut b = ts;
    while b < te {
        b = Time(b.0.saturating_add(interval).min(te.0));
        cuts.push(b);
    }
    let n_parts = cuts.len() - 1;
    if n_parts == 0 {
        return Ok((
            SnapshotBuffer::empty(ts),
            RunReport {
                threads,
                partitions: 0,
                stats: KernelStats::default(),
            },
        ));
    }

    // Pre-slice each partition's events: after this, workers touch only
    // their own inputs.
    let jobs: Vec<(Time, Time, BTreeMap<String, Vec<Event>>)> = (0..n_parts)
        .map(|k| {
            let (a, b) = (cuts[k], cuts[k + 1]);
            let mut sliced = BTreeMap::new();
            for inp in &plan.query.inputs {
                let env = plan.bounds.inputs[&inp.name];
                let lo = a.offset(env.lo).floor_to(inp.precision);
                let hi = b.offset(env.hi.max(0)).ceil_to(inp.precision);
                sliced.insert(
                    inp.name.clone(),
                    slice_events(&events[&inp.name], lo, hi, inp.precision),
                );
            }
            (a, b, sliced)
        })
        .collect();

    let slots: Vec<OnceLock<Result<(SnapshotBuffer, KernelStats)>>> =
        (0..n_parts).map(|_| OnceLock::new()).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.min(n_parts);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n_parts {
                    break;
                }
                let (a, b, evs) = &jobs[k];
                let out = catch_unwind(AssertUnwindSafe(|| plan.execute(evs, *a, *b)))
                    .unwrap_or_else(|payload| {
                        let message = payload
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| payload.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "worker panicked".into());
                        Err(Error::Worker {
                            partition: k,
                            message,
                        })
                    });
                let _ = slots[k].set(out);
            });
        }
    });

    let mut parts = Vec::with_capacity(n_parts);
    let mut stats = KernelStats::default();
    for (k, slot) in slots.into_iter().enumerate() {
        let r = slot.into_inner().ok_or_else(|| Error::Worker {
            partition: k,
            message: "worker produced no result".into(),
        })?;
        let (buf, s) = r?;
        stats.merge(&s);
        parts.push((buf, cuts[k + 1]));
    }

    let merged = concat_partitions(ts, plan.output_precision(), parts)?;
    Ok((
        merged,
        RunReport {
            threads: workers,
            partitions: n_parts,
            stats,
        },
    ))
}

/// Concatenate per-partition buffers (each covering `(prev_cut, cut]`)
/// into one buffer over the whole range, restoring normal form at seams.
fn concat_partitions(
    ts: Time,
    p_out: i64,
    parts: Vec<(SnapshotBuffer, Time)>,
) -> Result<SnapshotBuffer> {
    let mut snaps: Vec<Snapshot> = Vec::new();
    let push = |s: Snapshot, snaps: &mut Vec<Snapshot>| {
        if let Some(last) = snaps.last_mut() {
            if last.val == s.val {
                last.ts = s.ts; // coalesce the seam
                return;
            }
        }
        snaps.push(s);
    };
    for (buf, cut) in &parts {
        for s in buf.snaps() {
            push(s.clone(), &mut snaps);
        }
        // A partition whose buffer ends before its cut's last grid point
        // evaluated those points to φ; make that explicit so the next
        // partition's first region cannot swallow them. The sliver past
        // that grid point belongs to the *next* grid point — owned by the
        // following partition, whose first value covers back across the
        // seam — so no change point may be materialized there.
        let evaluated_to = cut.floor_to(p_out);
        if buf.end() < evaluated_to {
            push(
                Snapshot {
                    ts: evaluated_to,
                    val: crate::ssbuf::sv_phi(),
                },
                &mut snaps,
            );
        }
    }
    while snaps.last().is_some_and(|s| s.val.is_empty()) {
        snaps.pop();
    }
    SnapshotBuffer::from_parts(ts, snaps)
}

/// Execute a plan independently per key: group the keyed events, then run
/// (key × partition) tasks over the same worker pool. The plan must have
/// exactly one input; each key's substream feeds it.
pub fn execute_keyed(
    plan: &CompiledPlan,
    keyed: &[(i64, Event)],
    ts: Time,
    te: Time,
    threads: usize,
    interval: i64,
) -> Result<(BTreeMap<i64, SnapshotBuffer>, RunReport)> {
    if plan.query.inputs.len() != 1 {
        return Err(Error::InvalidArg(
            "keyed execution requires a single-input plan".into(),
        ));
    }
    let input = plan.query.inputs[0].name.clone();
    let mut groups: BTreeMap<i64, Vec<Event>> = BTreeMap::new();
    for (k, e) in keyed {
        groups.entry(*k).or_default().push(e.clone());
    }

    let keys: Vec<i64> = groups.keys().copied().collect();
    let slots: Vec<OnceLock<Result<(SnapshotBuffer, RunReport)>>> =
        keys.iter().map(|_| OnceLock::new()).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.max(1).min(keys.len().max(1));

    // Outer parallelism over keys; each key's run is sequential over its
    // partitions (worker count 1 inside) so total concurrency stays at
    // `threads` without nested pools.
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= keys.len() {
                    break;
                }
                let key = keys[i];
                let mut events = BTreeMap::new();
                events.insert(input.clone(), groups[&key].clone());
                let out = execute_parallel(plan, &events, ts, te, 1, interval);
                let _ = slots[i].set(out);
            });
        }
    });

    let mut out = BTreeMap::new();
    let mut stats = KernelStats::default();
    let mut partitions = 0;
    for (i, slot) in slots.into_iter().enumerate() {
        let r = slot.into_inner().ok_or_else(|| Error::Worker {
            partition: i,
            message: "keyed worker produced no result".into(),
        })?;
        let (buf, report) = r?;
        stats.merge(&report.stats);
        partitions += report.partitions;
        out.insert(keys[i], buf);
    }
    Ok((
        out,
        RunReport {
            threads: workers,
            partitions,
            stats,
        },
    ))
}

/// Wall-clock timing over repeated runs.
#[derive(Debug, Clone)]
pub struct Timing {
    pub runs: Vec<f64>,
}

impl Timing {
    pub fn mean_seconds(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.runs.iter().sum::<f64>() / self.runs.len() as f64
    }

    pub fn stddev_seconds(&self) -> f64 {
        let n = self.runs.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_seconds();
        (self.runs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64).sqrt()
    }
}

/// Run `f` `repeat` times, timing each run.
pub fn measure<T>(repeat: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, Timing)> {
    assert!(repeat >= 1, "measure needs at least one run");
    let mut runs = Vec::with_capacity(repeat);
    let mut result = None;
    for _ in 0..repeat {
        let t0 = Instant::now();
        let r = f()?;
        runs.push(t0.elapsed().as_secs_f64());
        result = Some(r);
    }
    Ok((result.unwrap(), Timing { runs }))
}
