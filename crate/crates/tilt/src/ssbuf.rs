//! Snapshot buffers: the change-point encoding of a temporal value.
//!
//! A [`SnapshotBuffer`] describes a signal over the half-open range
//! `(base, ..]` as a sequence of snapshots. Snapshot `i` with anchor `tsᵢ`
//! covers `(tsᵢ₋₁, tsᵢ]` (the first covers `(base, ts₀]`); its payload is
//! the multiset of values active throughout that region. Reads strictly
//! beyond the last snapshot observe φ (nothing there — yet); reads at or
//! before `base` are out of coverage and fail loudly, because the buffer
//! holds no information about them at all.
//!
//! Buffers are kept in *normal form*: anchors strictly increasing, no two
//! adjacent regions with equal payloads, no trailing φ region (a leading φ
//! region is meaningful and kept — it distinguishes "known absent" from
//! "not covered"). Normal form makes plain `==` on buffers a meaningful
//! semantic comparison, which the test suite leans on heavily.

use smallvec::SmallVec;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::time::Time;
use crate::value::Value;

/// Payload of one region: the multiset of values active there, ordered by
/// the originating events' `(start, end, arrival)` triple. Empty means φ.
pub type SnapVal = SmallVec<[Value; 1]>;

/// Singleton payload; a φ value collapses to the empty payload.
pub fn sv(v: Value) -> SnapVal {
    if v.is_phi() {
        SnapVal::new()
    } else {
        let mut s = SnapVal::new();
        s.push(v);
        s
    }
}

/// The φ payload.
pub fn sv_phi() -> SnapVal {
    SnapVal::new()
}

/// One change point: `val` holds over `(previous anchor, ts]`.
#[derive(Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub ts: Time,
    pub val: SnapVal,
}

impl std::fmt::Debug for Snapshot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({} -> {:?})", self.ts, self.val.as_slice())
    }
}

/// A temporal value in change-point form. See the module docs for the
/// coverage and normal-form rules.
#[derive(Clone, PartialEq, Eq)]
pub struct SnapshotBuffer {
    base: Time,
    snaps: Vec<Snapshot>,
}

impl std::fmt::Debug for SnapshotBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[base {}] {:?}", self.base, self.snaps)
    }
}

impl SnapshotBuffer {
    /// A buffer that is φ everywhere after `base`.
    pub fn empty(base: Time) -> SnapshotBuffer {
        SnapshotBuffer {
            base,
            snaps: Vec::new(),
        }
    }

    /// Assemble from raw parts, enforcing normal form.
    pub fn from_parts(base: Time, snaps: Vec<Snapshot>) -> Result<SnapshotBuffer> {
        let mut prev = base;
        for (i, s) in snaps.iter().enumerate() {
            if s.ts <= prev {
                return Err(Error::InvalidArg(format!(
                    "snapshot {i} at {} does not advance past {}",
                    s.ts, prev
                )));
            }
            if i > 0 && snaps[i - 1].val == s.val {
                return Err(Error::InvalidArg(format!(
                    "adjacent snapshots at {} and {} carry equal payloads",
                    snaps[i - 1].ts, s.ts
                )));
            }
            prev = s.ts;
        }
        if snaps.last().is_some_and(|s| s.val.is_empty()) {
            return Err(Error::InvalidArg(
                "trailing φ region must be trimmed".into(),
            ));
        }
        Ok(SnapshotBuffer { base, snaps })
    }

    pub fn base(&self) -> Time {
        self.base
    }

    pub fn snaps(&self) -> &[Snapshot] {
        &self.snaps
    }

    /// Anchor of the last snapshot, or `base` for the all-φ buffer.
    pub fn end(&self) -> Time {
        self.snaps.last().map_or(self.base, |s| s.ts)
    }

    pub fn is_empty(&self) -> bool {
        self.snaps.is_empty()
    }

    /// The payload observed at time `t`. Fails for `t <= base`; yields the
    /// empty payload (φ) strictly beyond the last snapshot.
    pub fn value_at(&self, t: Time) -> Result<&[Value]> {
        if t <= self.base {
            return Err(Error::OutOfCoverage {
                at: t,
                base: self.base,
            });
        }
        let idx = self.snaps.partition_point(|s| s.ts < t);
        Ok(match self.snaps.get(idx) {
            Some(s) => &s.val,
            None => &[],
        })
    }

    /// Iterate maximal constant regions as `(lo, hi, payload)` covering
    /// `(lo, hi]`. The implicit trailing φ region is not yielded.
    pub fn regions(&self) -> impl Iterator<Item = (Time, Time, &SnapVal)> {
        let mut prev = self.base;
        self.snaps.iter().map(move |s| {
            let lo = prev;
            prev = s.ts;
            (lo, s.ts, &s.val)
        })
    }

    /// Restrict to `(from, to]`. Straddling regions are clipped: the region
    /// containing `from` keeps its payload (its left edge moves to `from`),
    /// the region containing `to` is cut at `to`. `from` must not precede
    /// `base` — that would fabricate coverage the buffer does not have.
    pub fn sub_buffer(&self, from: Time, to: Time) -> Result<SnapshotBuffer> {
        if from < self.base {
            return Err(Error::InvalidArg(format!(
                "sub-buffer from {} precedes base {}",
                from, self.base
            )));
        }
        if to < from {
            return Err(Error::InvalidArg(format!(
                "sub-buffer range ({from}, {to}] is reversed"
            )));
        }
        let mut b = BufferBuilder::new(from);
        for s in &self.snaps {
            if s.ts <= from {
                continue;
            }
            if s.ts >= to {
                if to > from {
                    b.push(to, s.val.clone())?;
                }
                break;
            }
            b.push(s.ts, s.val.clone())?;
        }
        Ok(b.finish())
    }

    /// Encode events into change-point form over `(ts, te]` at precision
    /// `p`. An event `(s, e] : v` is observed at exactly the grid points
    /// `g` (multiples of `p`) with `s < g <= e`; events never visible at
    /// the grid (entirely within one grid gap, or outside the range) leave
    /// no trace. Payload order follows `(start, end, arrival)`.
    pub fn from_events(
        events: &[Event],
        ts: Time,
        te: Time,
        p: i64,
    ) -> Result<SnapshotBuffer> {
        if p < 1 {
            return Err(Error::InvalidArg(format!("precision {p} must be >= 1")));
        }
        if !ts.on_grid(p) || !te.on_grid(p) {
            return Err(Error::InvalidArg(format!(
                "range ({ts}, {te}] must be aligned to precision {p}"
            )));
        }
        if te < ts {
            return Err(Error::InvalidArg(format!(
                "range ({ts}, {te}] is reversed"
            )));
        }

        // Change points: an event becomes visible at the first grid point
        // inside (s, e] and invisible at the first grid point past e.
        let mut deltas: BTreeMap<Time, Vec<(bool, usize)>> = BTreeMap::new();
        let mut entries: Vec<(Time, Time, usize, Value)> = Vec::new();
        for (seq, ev) in events.iter().enumerate() {
            if ev.end <= ev.start {
                return Err(Error::InvalidArg(format!(
                    "event {seq} has empty interval ({}, {}]",
                    ev.start, ev.end
                )));
            }
            if ev.value.is_phi() {
                return Err(Error::InvalidArg(format!(
                    "event {seq} carries φ; absence is encoded by gaps, not events"
                )));
            }
            let appear = ev.start.next_on(p);
            let vanish = ev.end.next_on(p);
            if appear >= vanish || appear > te || vanish <= ts {
                continue; // never visible inside (ts, te]
            }
            let idx = entries.len();
            entries.push((ev.start, ev.end, seq, ev.value.clone()));
            deltas.entry(appear).or_default().push((true, idx));
            deltas.entry(vanish).or_default().push((false, idx));
        }

        // Active events keyed by (start, end, arrival): iteration order of
        // the map *is* the payload order.
        let mut active: BTreeMap<(Time, Time, usize), Value> = BTreeMap::new();
        let first = ts.offset(p);
        let mut b = BufferBuilder::new(ts);

        fn apply(
            entries: &[(Time, Time, usize, Value)],
            active: &mut BTreeMap<(Time, Time, usize), Value>,
            changes: &[(bool, usize)],
        ) {
            for &(add, idx) in changes {
                let (s, e, seq, ref v) = entries[idx];
                if add {
                    active.insert((s, e, seq), v.clone());
                } else {
                    active.remove(&(s, e, seq));
                }
            }
        }

        let mut pending: Vec<(Time, Vec<(bool, usize)>)> = Vec::new();
        for (q, changes) in deltas {
            if q < first {
                apply(&entries, &mut active, &changes);
            } else if q <= te {
                pending.push((q, changes));
            }
            // Changes strictly past te never affect (ts, te].
        }

        let snapval = |active: &BTreeMap<(Time, Time, usize), Value>| -> SnapVal {
            active.values().cloned().collect()
        };

        for (q, changes) in pending {
            // Current payload holds for grid points up to q - p.
            let boundary = q.offset(-p);
            if boundary >= first {
                b.push(boundary, snapval(&active))?;
            }
            apply(&entries, &mut active, &changes);
        }
        if te >= first {
            b.push(te, snapval(&active))?;
        }
        Ok(b.finish())
    }

    /// Decode back into events. Each value's appearances are closed
    /// first-in-first-out, so overlapping same-value events round-trip.
    /// Adjacent same-payload regions were coalesced at encode time, so the
    /// result is canonical: touching equal-value events come back merged.
    ///
    /// Re-encoding the result reproduces this buffer's value content at
    /// every time. For buffers that are single-valued everywhere — every
    /// derived definition the engine produces — the round trip is exact.
    /// Multi-valued buffers can be genuinely ambiguous (an event ending at
    /// the instant an equal-count swap begins leaves no trace in the
    /// multisets), so only content is promised there.
    pub fn to_events(&self) -> Vec<Event> {
        use std::collections::HashMap;
        let mut open: Vec<(Value, Time)> = Vec::new();
        let mut out: Vec<Event> = Vec::new();

        let counts = |vals: &[Value]| -> HashMap<Value, i64> {
            let mut m = HashMap::new();
            for v in vals {
                *m.entry(v.clone()).or_insert(0) += 1;
            }
            m
        };

        let mut prev: Vec<Value> = Vec::new();
        // Process closes in the departing payload's order and opens in the
        // arriving payload's order: with the final stable sort this keeps
        // round-trips exact even when distinct values share an interval.
        let close_and_open =
            |at: Time, prev: &[Value], next: &[Value], open: &mut Vec<(Value, Time)>,
             out: &mut Vec<Event>| {
                let pc = counts(prev);
                let nc = counts(next);
                let mut closed: HashMap<Value, i64> = HashMap::new();
                for v in prev {
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
                        .expect("open event for every active value");
                    let (val, started) = open.remove(pos);
                    out.push(Event {
                        start: started,
                        end: at,
                        value: val,
                    });
                }
                let mut opened: HashMap<Value, i64> = HashMap::new();
                for v in next {
                    let n_prev = pc.get(v).copied().unwrap_or(0);
                    let n_next = nc[v];
                    let done = opened.entry(v.clone()).or_insert(0);
                    if *done >= n_next - n_prev {
                        continue;
                    }
                    *done += 1;
                    open.push((v.clone(), at));
                }
            };

        for (lo, _hi, val) in self.regions() {
            close_and_open(lo, &prev, val, &mut open, &mut out);
            prev = val.to_vec();
        }
        let end = self.end();
        close_and_open(end, &prev, &[], &mut open, &mut out);

        out.sort_by(|a, b| (a.start, a.end).cmp(&(b.start, b.end)));
        out
    }
}

/// Incremental constructor that maintains normal form: pushes must advance
/// time, equal-payload neighbors coalesce, trailing φ is trimmed on
/// [`BufferBuilder::finish`].
pub struct BufferBuilder {
    base: Time,
    snaps: Vec<Snapshot>,
}

impl BufferBuilder {
    pub fn new(base: Time) -> BufferBuilder {
        BufferBuilder {
            base,
            snaps: Vec::new(),
        }
    }

    pub fn end(&self) -> Time {
        self.snaps.last().map_or(self.base, |s| s.ts)
    }

    /// Extend coverage to `ts` with payload `val` over `(end, ts]`.
    pub fn push(&mut self, ts: Time, val: SnapVal) -> Result<()> {
        let end = self.end();
        if ts <= end {
            return Err(Error::InvalidArg(format!(
                "push at {ts} does not advance past {end}"
            )));
        }
        match self.snaps.last_mut() {
            Some(last) if last.val == val => last.ts = ts,
            _ => self.snaps.push(Snapshot { ts, val }),
        }
        Ok(())
    }

    /// Push a single value (φ collapses to the empty payload).
    pub fn push_value(&mut self, ts: Time, v: Value) -> Result<()> {
        self.push(ts, sv(v))
    }

    pub fn finish(mut self) -> SnapshotBuffer {
        while self.snaps.last().is_some_and(|s| s.val.is_empty()) {
            self.snaps.pop();
        }
        SnapshotBuffer {
            base: self.base,
            snaps: self.snaps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(x: f64) -> Value {
        Value::Float(x)
    }

    fn snap(ts: i64, vals: &[Value]) -> Snapshot {
        Snapshot {
            ts: Time(ts),
            val: vals.iter().cloned().collect(),
        }
    }

    /// One event in the middle of the range: a leading φ region appears,
    /// the trailing φ region is trimmed.
    #[test]
    fn single_event_change_points() {
        let evs = [Event::new(5, 10, f(1.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(10), 1).unwrap();
        assert_eq!(b.base(), Time(0));
        assert_eq!(b.snaps(), &[snap(5, &[]), snap(10, &[f(1.0)])]);

        // Same event, longer range: trailing φ after t=10 is implicit.
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(20), 1).unwrap();
        assert_eq!(b.snaps(), &[snap(5, &[]), snap(10, &[f(1.0)])]);
        assert_eq!(b.value_at(Time(15)).unwrap(), &[] as &[Value]);
    }

    #[test]
    fn overlapping_events_multiset_regions() {
        let evs = [Event::new(0, 10, f(1.0)), Event::new(5, 15, f(2.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(15), 5).unwrap();
        assert_eq!(
            b.snaps(),
            &[
                snap(5, &[f(1.0)]),
                snap(10, &[f(1.0), f(2.0)]),
                snap(15, &[f(2.0)]),
            ]
        );
        // Finer grid, same change points here.
        let b1 = SnapshotBuffer::from_events(&evs, Time(0), Time(15), 1).unwrap();
        assert_eq!(b1.snaps(), b.snaps());
    }

    #[test]
    fn payload_order_is_start_end_arrival() {
        // Second-arriving event starts earlier: it must sort first.
        let evs = [Event::new(5, 15, f(2.0)), Event::new(0, 10, f(1.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(15), 5).unwrap();
        assert_eq!(b.value_at(Time(10)).unwrap(), &[f(1.0), f(2.0)]);
    }

    #[test]
    fn misaligned_event_rounds_to_grid() {
        // (3, 7] at precision 5 is visible only at grid point 5.
        let evs = [Event::new(3, 7, f(9.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(10), 5).unwrap();
        assert_eq!(b.snaps(), &[snap(5, &[f(9.0)])]);
        // (3, 4] at precision 5 never hits a grid point.
        let evs = [Event::new(3, 4, f(9.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(10), 5).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn event_straddling_range_start_is_clipped() {
        let evs = [Event::new(-5, 7, f(1.0)), Event::new(7, 9, f(2.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(10), 1).unwrap();
        assert_eq!(b.snaps(), &[snap(7, &[f(1.0)]), snap(9, &[f(2.0)])]);
        assert_eq!(b.value_at(Time(1)).unwrap(), &[f(1.0)]);
    }

    #[test]
    fn reads_before_base_fail_beyond_end_are_phi() {
        let evs = [Event::new(0, 4, f(1.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(10), 1).unwrap();
        assert_eq!(b.snaps(), &[snap(4, &[f(1.0)])]);
        assert!(matches!(
            b.value_at(Time(0)),
            Err(Error::OutOfCoverage { .. })
        ));
        assert!(b.value_at(Time(-3)).is_err());
        assert_eq!(b.value_at(Time(1)).unwrap(), &[f(1.0)]);
        assert_eq!(b.value_at(Time(4)).unwrap(), &[f(1.0)]);
        assert_eq!(b.value_at(Time(5)).unwrap(), &[] as &[Value]);
        assert_eq!(b.value_at(Time(1000)).unwrap(), &[] as &[Value]);
    }

    #[test]
    fn sub_buffer_clips_straddling_regions() {
        let evs = [Event::new(0, 10, f(1.0)), Event::new(5, 15, f(2.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(15), 1).unwrap();

        let s = b.sub_buffer(Time(7), Time(12)).unwrap();
        assert_eq!(s.base(), Time(7));
        assert_eq!(
            s.snaps(),
            &[snap(10, &[f(1.0), f(2.0)]), snap(12, &[f(2.0)])]
        );

        let s = b.sub_buffer(Time(5), Time(10)).unwrap();
        assert_eq!(s.snaps(), &[snap(10, &[f(1.0), f(2.0)])]);

        // Identity when the range covers everything.
        let s = b.sub_buffer(Time(0), Time(40)).unwrap();
        assert_eq!(s, b);

        // Entirely in the φ tail.
        let s = b.sub_buffer(Time(20), Time(30)).unwrap();
        assert!(s.is_empty());

        assert!(b.sub_buffer(Time(-1), Time(5)).is_err());
        assert!(b.sub_buffer(Time(9), Time(4)).is_err());
    }

    #[test]
    fn events_round_trip() {
        let evs = vec![Event::new(0, 10, f(1.0)), Event::new(5, 15, f(2.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(15), 1).unwrap();
        assert_eq!(b.to_events(), evs);
    }

    #[test]
    fn overlapping_same_value_events_round_trip_fifo() {
        let evs = vec![Event::new(0, 5, f(7.0)), Event::new(3, 8, f(7.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(8), 1).unwrap();
        assert_eq!(
            b.snaps(),
            &[
                snap(3, &[f(7.0)]),
                snap(5, &[f(7.0), f(7.0)]),
                snap(8, &[f(7.0)]),
            ]
        );
        assert_eq!(b.to_events(), evs);
    }

    #[test]
    fn touching_same_value_events_canonicalize() {
        let evs = vec![Event::new(0, 5, f(7.0)), Event::new(5, 9, f(7.0))];
        let b = SnapshotBuffer::from_events(&evs, Time(0), Time(9), 1).unwrap();
        assert_eq!(b.snaps(), &[snap(9, &[f(7.0)])]);
        assert_eq!(b.to_events(), vec![Event::new(0, 9, f(7.0))]);
    }

    #[test]
    fn builder_coalesces_and_trims() {
        let mut b = BufferBuilder::new(Time(0));
        b.push_value(Time(2), f(1.0)).unwrap();
        b.push_value(Time(4), f(1.0)).unwrap(); // coalesce
        b.push_value(Time(6), f(2.0)).unwrap();
        b.push_value(Time(8), Value::Phi).unwrap();
        b.push_value(Time(9), Value::Phi).unwrap(); // trailing φ, trimmed
        assert!(b.push(Time(9), sv(f(3.0))).is_err()); // must advance
        let buf = b.finish();
        assert_eq!(buf.snaps(), &[snap(4, &[f(1.0)]), snap(6, &[f(2.0)])]);
    }

    #[test]
    fn from_parts_enforces_normal_form() {
        assert!(SnapshotBuffer::from_parts(
            Time(0),
            vec![snap(5, &[f(1.0)]), snap(5, &[f(2.0)])]
        )
        .is_err());
        assert!(SnapshotBuffer::from_parts(
            Time(0),
            vec![snap(5, &[f(1.0)]), snap(8, &[f(1.0)])]
        )
        .is_err());
        assert!(
            SnapshotBuffer::from_parts(Time(0), vec![snap(5, &[f(1.0)]), snap(8, &[])])
                .is_err()
        );
        assert!(SnapshotBuffer::from_parts(
            Time(0),
            vec![snap(3, &[]), snap(8, &[f(1.0)])]
        )
        .is_ok());
    }

    #[test]
    fn rejects_bad_events_and_ranges() {
        assert!(
            SnapshotBuffer::from_events(&[Event::new(5, 5, f(1.0))], Time(0), Time(10), 1)
                .is_err()
        );
        assert!(SnapshotBuffer::from_events(
            &[Event::new(0, 5, Value::Phi)],
            Time(0),
            Time(10),
            1
        )
        .is_err());
        assert!(
            SnapshotBuffer::from_events(&[], Time(1), Time(10), 5).is_err(),
            "range must be grid-aligned"
        );
        assert!(SnapshotBuffer::from_events(&[], Time(10), Time(0), 1).is_err());
        let b = SnapshotBuffer::from_events(&[], Time(0), Time(0), 1).unwrap();
        assert!(b.is_empty());
    }

    /// Strategy: a handful of short events with values from a tiny alphabet
    /// (to force overlaps and equal payloads), arbitrary small range/grid.
    fn arb_events_from(lo: i64) -> impl Strategy<Value = Vec<Event>> {
        proptest::collection::vec((lo..30, 1i64..12, 0u8..3), 0..8).prop_map(|raw| {
            raw.into_iter()
                .map(|(s, len, v)| Event::new(s, s + len, f(v as f64)))
                .collect()
        })
    }

    fn arb_events() -> impl Strategy<Value = Vec<Event>> {
        arb_events_from(-10)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        /// The encoding agrees with brute-force dense sampling at every
        /// grid point, and buffers come out in normal form.
        #[test]
        fn encoding_matches_dense_sampling(
            evs in arb_events(),
            p in 1i64..6,
            span in 0i64..8,
        ) {
            let ts = Time(0);
            let te = Time(span * p);
            let b = SnapshotBuffer::from_events(&evs, ts, te, p).unwrap();

            // Normal form.
            let mut prev_ts = b.base();
            for (i, s) in b.snaps().iter().enumerate() {
                prop_assert!(s.ts > prev_ts);
                if i > 0 {
                    prop_assert_ne!(&b.snaps()[i - 1].val, &s.val);
                }
                prev_ts = s.ts;
            }
            prop_assert!(!b.snaps().last().is_some_and(|s| s.val.is_empty()));

            // Dense agreement.
            let mut g = ts.offset(p);
            while g <= te {
                let mut expect: Vec<(Time, Time, usize, Value)> = evs
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.start < g && g <= e.end)
                    .map(|(seq, e)| (e.start, e.end, seq, e.value.clone()))
                    .collect();
                expect.sort_by_key(|(s, e, seq, _)| (*s, *e, *seq));
                let expect: Vec<Value> =
                    expect.into_iter().map(|(_, _, _, v)| v).collect();
                prop_assert_eq!(b.value_at(g).unwrap(), expect.as_slice());
                g = g.offset(p);
            }
        }

        /// Decoding then re-encoding preserves value content at every
        /// grid point, for arbitrary (overlapping, clipped) event soups.
        #[test]
        fn event_round_trip_preserves_content(evs in arb_events(), span in 0i64..25) {
            let (ts, te) = (Time(0), Time(span));
            let b = SnapshotBuffer::from_events(&evs, ts, te, 1).unwrap();
            let back = b.to_events();
            let b2 = SnapshotBuffer::from_events(&back, ts, te, 1).unwrap();
            for t in 1..=span {
                let mut a: Vec<Value> = b.value_at(Time(t)).unwrap().to_vec();
                let mut c: Vec<Value> = b2.value_at(Time(t)).unwrap().to_vec();
                let key = |v: &Value| format!("{v:?}");
                a.sort_by_key(key);
                c.sort_by_key(key);
                prop_assert_eq!(a, c);
            }
        }

        /// For single-valued buffers — every derived output the engine
        /// makes — the round trip is exact.
        #[test]
        fn single_valued_round_trip_is_exact(
            spans in proptest::collection::vec((1i64..5, 0u8..4), 0..8),
        ) {
            // Lay non-overlapping events end to end, value 3 meaning "gap".
            let mut evs = Vec::new();
            let mut t = 0i64;
            for (len, v) in spans {
                if v < 3 {
                    evs.push(Event::new(t, t + len, f(v as f64)));
                }
                t += len;
            }
            let b = SnapshotBuffer::from_events(&evs, Time(0), Time(t), 1).unwrap();
            let back = b.to_events();
            let b2 = SnapshotBuffer::from_events(&back, Time(0), Time(t), 1).unwrap();
            prop_assert_eq!(b, b2);
        }

        /// Sub-buffer reads agree with reads on the original.
        #[test]
        fn sub_buffer_preserves_reads(
            evs in arb_events(),
            lo in 0i64..20,
            len in 0i64..20,
        ) {
            let b = SnapshotBuffer::from_events(&evs, Time(0), Time(25), 1).unwrap();
            let s = b.sub_buffer(Time(lo), Time(lo + len)).unwrap();
            for t in (lo + 1)..=(lo + len) {
                prop_assert_eq!(
                    s.value_at(Time(t)).unwrap(),
                    b.value_at(Time(t)).unwrap()
                );
            }
        }
    }
}
