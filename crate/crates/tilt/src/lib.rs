//! A time-centric streaming query engine.
//!
//! Queries over event streams are expressed as small dataflow graphs of
//! temporal operators (map, filter, shift, windowed aggregation, join,
//! resample) and *lowered* to an intermediate representation in which every
//! definition is a plain function of time over an explicit time domain.
//! Making time a first-class variable lets the planner do three things that
//! are awkward in tuple-at-a-time designs:
//!
//! * **Boundary resolution** — compute, per input, exactly how much history
//!   (lookback) and future grid slack (lookahead) each output point needs,
//!   by composing the read windows along every dataflow path.
//! * **Fusion** — inline producers into consumers across operator
//!   boundaries, including into and across aggregations, shrinking a
//!   multi-operator graph to a handful of loop kernels.
//! * **Change-point execution** — evaluate each kernel only where one of
//!   its inputs can change value, skipping uneventful grid points entirely,
//!   over compact snapshot-buffer encodings of the streams.
//!
//! Execution is partition-parallel: the stream range is cut into intervals,
//! each worker evaluates the full kernel plan on its interval (plus the
//! resolved lookback/lookahead margin), and results concatenate without any
//! cross-worker synchronization — output is bit-identical to a
//! single-threaded run regardless of thread count.
//!
//! The crate ships a dense reference evaluator ([`oracle`]) used throughout
//! the test suite, a benchmark suite of thirteen streaming queries with
//! deterministic generators ([`bench`]), and a small CLI (`tilt run`,
//! `tilt bench-suite`). Start with the `examples/` directory for a guided
//! tour.

pub mod bench;
pub mod cli;
pub mod error;
pub mod event;
pub mod exec;
pub mod frontend;
pub mod io;
pub mod ir;
pub mod passes;
pub mod runtime;
pub mod ssbuf;
pub mod time;
pub mod value;

pub use bench::{
    bench_registry, benchmarks, find_bench, oracle_check, verify_case, BenchCase, BenchData,
    BenchSpec,
};
pub use error::{Error, Result};
pub use event::{Event, KeyedEvent};
pub use exec::dense::eval_dense;
pub use exec::kernel::{compile, CompiledPlan, KernelStats};
pub use exec::{pointwise_view, reduce_window, FoldMode, Registry, ReductionSpec, SlidingWindow};
pub use frontend::{GraphBuilder, Node};
pub use io::{append_report_csv, read_events, write_report_dat, ReportRow};
pub use passes::{fuse, plan, resolve_boundaries, Boundaries, Envelope};
pub use runtime::{
    default_threads, execute_keyed, execute_parallel, measure, RunReport, Timing,
    DEFAULT_INTERVAL,
};
pub use ir::{DomainBound, IRExpr, InputDef, Query, ReadKind, TemporalDef, TimeDomain};
pub use ssbuf::{sv, sv_phi, BufferBuilder, SnapVal, Snapshot, SnapshotBuffer};
pub use time::Time;
pub use value::{apply_binop, apply_unop, BinOp, StructValue, UnOp, Value};
