//! File formats: event streams as JSONL or CSV, benchmark reports as CSV
//! or whitespace-separated `.dat` columns.
//!
//! * JSONL events — one object per line:
//!   `{"start":3,"end":4,"payload":2.5}` for scalar streams,
//!   `{"start":3,"end":4,"payload":{"bid":2.5,"ask":2.6}}` for structs,
//!   with an optional `"key":7` for keyed streams.
//! * CSV events — a header row `start,end,value` (scalar) or
//!   `start,end,field1,field2,...` (struct; field order fixed by the
//!   header), with an optional leading `key` column.
//! * Reports — CSV rows `bench,threads,interval,events,seconds,throughput`
//!   appended under a single header, or the same columns space-separated
//!   for plotting tools.
//!
//! Integer and float cells are kept distinct in both directions: `3` reads
//! back as an integer, `3.0` as a float.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Map, Number};

use crate::error::{Error, Result};
use crate::event::Event;
use crate::value::Value;

/// One parsed stream row: the event plus its key, if the file carries one.
pub type KeyedRow = (Option<i64>, Event);

/// Read an event stream, choosing the format from the file extension
/// (`.csv` → CSV, anything else → JSONL).
pub fn read_events(path: &Path) -> Result<Vec<KeyedRow>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_events_csv(path),
        _ => read_events_jsonl(path),
    }
}

/// Split rows that carry no key; errors if any row has one.
pub fn expect_unkeyed(rows: Vec<KeyedRow>) -> Result<Vec<Event>> {
    rows.into_iter()
        .map(|(k, e)| match k {
            None => Ok(e),
            Some(k) => Err(Error::Parse(format!(
                "stream is keyed (found key {k}); this query takes an unkeyed stream"
            ))),
        })
        .collect()
}

/// Require a key on every row.
pub fn expect_keyed(rows: Vec<KeyedRow>) -> Result<Vec<(i64, Event)>> {
    rows.into_iter()
        .map(|(k, e)| match k {
            Some(k) => Ok((k, e)),
            None => Err(Error::Parse(
                "stream has rows without a key; this query runs per key".into(),
            )),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// JSONL events.

pub fn read_events_jsonl(path: &Path) -> Result<Vec<KeyedRow>> {
    let file = File::open(path).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_jsonl_line(&line).map_err(|e| {
            Error::Parse(format!("{}:{}: {e}", path.display(), idx + 1))
        })?);
    }
    Ok(out)
}

fn parse_jsonl_line(line: &str) -> Result<KeyedRow> {
    let v: serde_json::Value =
        serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse("expected a JSON object".into()))?;
    let start = require_i64(obj, "start")?;
    let end = require_i64(obj, "end")?;
    if end <= start {
        return Err(Error::Parse(format!(
            "event interval ({start}, {end}] is empty"
        )));
    }
    let key = match obj.get("key") {
        None => None,
        Some(k) => Some(k.as_i64().ok_or_else(|| {
            Error::Parse(format!("key must be an integer, got {k}"))
        })?),
    };
    let payload = obj
        .get("payload")
        .ok_or_else(|| Error::Parse("missing `payload`".into()))?;
    Ok((key, Event::new(start, end, json_to_value(payload)?)))
}

fn require_i64(obj: &Map<String, serde_json::Value>, field: &str) -> Result<i64> {
    obj.get(field)
        .and_then(|v| v.as_i64())
        .ok_or_else(|| Error::Parse(format!("missing or non-integer `{field}`")))
}

fn json_to_value(v: &serde_json::Value) -> Result<Value> {
    match v {
        serde_json::Value::Number(n) => num_to_value(n),
        serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
        serde_json::Value::Object(fields) => {
            let mut out = Vec::with_capacity(fields.len());
            for (name, fv) in fields {
                out.push((name.as_str(), json_to_value(fv)?));
            }
            Ok(Value::record(out))
        }
        other => Err(Error::Parse(format!(
            "unsupported payload {other}; use a number, bool, or object"
        ))),
    }
}

fn num_to_value(n: &Number) -> Result<Value> {
    if let Some(i) = n.as_i64() {
        return Ok(Value::Int(i));
    }
    n.as_f64()
        .map(Value::Float)
        .ok_or_else(|| Error::Parse(format!("number {n} out of range")))
}

pub fn write_events_jsonl(path: &Path, rows: &[KeyedRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let mut w = BufWriter::new(file);
    for (key, e) in rows {
        let mut obj = Map::new();
        obj.insert("start".into(), json!(e.start.0));
        obj.insert("end".into(), json!(e.end.0));
        if let Some(k) = key {
            obj.insert("key".into(), json!(k));
        }
        obj.insert("payload".into(), value_to_json(&e.value)?);
        serde_json::to_writer(&mut w, &serde_json::Value::Object(obj))
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        w.write_all(b"\n")
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    w.flush().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn value_to_json(v: &Value) -> Result<serde_json::Value> {
    match v {
        Value::Int(i) => Ok(json!(i)),
        Value::Float(f) if f.is_finite() => Ok(json!(f)),
        Value::Float(f) => Err(Error::InvalidArg(format!("cannot serialize non-finite float {f}"))),
        Value::Bool(b) => Ok(json!(b)),
        Value::Struct(s) => {
            let mut obj = Map::new();
            for (name, fv) in s.fields() {
                obj.insert(name.clone(), value_to_json(fv)?);
            }
            Ok(serde_json::Value::Object(obj))
        }
        Value::Phi => Err(Error::InvalidArg("events never carry φ".into())),
    }
}

// ---------------------------------------------------------------------------
// CSV events.

pub fn read_events_csv(path: &Path) -> Result<Vec<KeyedRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let layout = CsvLayout::from_header(&header)?;
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        out.push(layout.parse(&rec).map_err(|e| {
            Error::Parse(format!("{}:{}: {e}", path.display(), idx + 2))
        })?);
    }
    Ok(out)
}

struct CsvLayout {
    key: Option<usize>,
    start: usize,
    end: usize,
    /// `(column, field name)` for each payload column. A single column
    /// named `value` means a scalar payload.
    payload: Vec<(usize, String)>,
    scalar: bool,
}

impl CsvLayout {
    fn from_header(header: &[String]) -> Result<CsvLayout> {
        let find = |name: &str| header.iter().position(|h| h == name);
        let start = find("start")
            .ok_or_else(|| Error::Parse("header must contain `start`".into()))?;
        let end = find("end").ok_or_else(|| Error::Parse("header must contain `end`".into()))?;
        let key = find("key");
        let payload: Vec<(usize, String)> = header
            .iter()
            .enumerate()
            .filter(|(i, h)| *i != start && *i != end && Some(*i) != key && !h.is_empty())
            .map(|(i, h)| (i, h.clone()))
            .collect();
        if payload.is_empty() {
            return Err(Error::Parse(
                "header has no payload columns (expected `value` or field names)".into(),
            ));
        }
        let scalar = payload.len() == 1 && payload[0].1 == "value";
        Ok(CsvLayout {
            key,
            start,
            end,
            payload,
            scalar,
        })
    }

    fn parse(&self, rec: &csv::StringRecord) -> Result<KeyedRow> {
        let cell = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("row has no column {i}")))
        };
        let start: i64 = parse_int(cell(self.start)?)?;
        let end: i64 = parse_int(cell(self.end)?)?;
        if end <= start {
            return Err(Error::Parse(format!(
                "event interval ({start}, {end}] is empty"
            )));
        }
        let key = match self.key {
            None => None,
            Some(i) => Some(parse_int(cell(i)?)?),
        };
        let value = if self.scalar {
            parse_cell(cell(self.payload[0].0)?)?
        } else {
            let mut fields = Vec::with_capacity(self.payload.len());
            for (i, name) in &self.payload {
                fields.push((name.as_str(), parse_cell(cell(*i)?)?));
            }
            Value::record(fields)
        };
        Ok((key, Event::new(start, end, value)))
    }
}

fn parse_int(s: &str) -> Result<i64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("expected an integer, got `{s}`")))
}

fn parse_cell(s: &str) -> Result<Value> {
    let s = s.trim();
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Value::Int(i));
    }
    if let Ok(f) = s.parse::<f64>() {
        return Ok(Value::Float(f));
    }
    match s {
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        _ => Err(Error::Parse(format!("unparseable cell `{s}`"))),
    }
}

/// Write events as CSV. All payloads must share one shape: scalars get a
/// `value` column, structs one column per field in the first event's order.
pub fn write_events_csv(path: &Path, rows: &[KeyedRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let keyed = rows.iter().any(|(k, _)| k.is_some());
    let fields: Vec<String> = match rows.first().map(|(_, e)| &e.value) {
        Some(Value::Struct(s)) => s.fields().iter().map(|(n, _)| n.clone()).collect(),
        _ => vec!["value".to_string()],
    };
    let mut header: Vec<&str> = Vec::new();
    if keyed {
        header.push("key");
    }
    header.push("start");
    header.push("end");
    header.extend(fields.iter().map(|s| s.as_str()));
    w.write_record(&header).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    for (key, e) in rows {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if keyed {
            rec.push(key.map(|k| k.to_string()).unwrap_or_default());
        }
        rec.push(e.start.0.to_string());
        rec.push(e.end.0.to_string());
        match &e.value {
            Value::Struct(s) => {
                for name in &fields {
                    let v = s.get(name).ok_or_else(|| {
                        Error::InvalidArg(format!("event at {} lacks field `{name}`", e.start))
                    })?;
                    rec.push(cell_to_string(v)?);
                }
            }
            v => rec.push(cell_to_string(v)?),
        }
        w.write_record(&rec).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    w.flush().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn cell_to_string(v: &Value) -> Result<String> {
    match v {
        Value::Int(i) => Ok(i.to_string()),
        // ryu-style shortest round-trip, with a decimal point kept so the
        // cell reads back as a float.
        Value::Float(f) if f.is_finite() => {
            let mut s = format!("{f}");
            if !s.contains(['.', 'e', 'E']) {
                s.push_str(".0");
            }
            Ok(s)
        }
        Value::Float(f) => Err(Error::InvalidArg(format!("cannot serialize non-finite float {f}"))),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Struct(_) => Err(Error::InvalidArg("nested structs have no CSV cell form".into())),
        Value::Phi => Err(Error::InvalidArg("events never carry φ".into())),
    }
}

// ---------------------------------------------------------------------------
// Benchmark reports.

/// One benchmark measurement row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub bench: String,
    pub threads: usize,
    pub interval: i64,
    pub events: u64,
    pub seconds: f64,
    pub throughput: f64,
}

pub const REPORT_HEADER: [&str; 6] =
    ["bench", "threads", "interval", "events", "seconds", "throughput"];

impl ReportRow {
    fn fields(&self) -> [String; 6] {
        [
            self.bench.clone(),
            self.threads.to_string(),
            self.interval.to_string(),
            self.events.to_string(),
            format!("{}", self.seconds),
            format!("{}", self.throughput),
        ]
    }
}

/// Append rows to a CSV report, writing the header only when the file is
/// new or empty.
pub fn append_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    if fresh {
        w.write_record(REPORT_HEADER)
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    for row in rows {
        w.write_record(row.fields())
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    w.flush().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Write rows as space-separated columns for plotting tools; same header
/// and cells as the CSV form, space-delimited.
pub fn write_report_dat(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", REPORT_HEADER.join(" ")).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    for row in rows {
        writeln!(w, "{}", row.fields().join(" ")).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    w.flush().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Parse a report back (CSV by default; pass `b' '` as the delimiter for
/// `.dat` files). Used by tests and the suite's own tooling.
pub fn read_report(path: &Path, delimiter: u8) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 6 {
            // A later header (from appending to a hand-edited file) or a
            // short row is malformed.
            return Err(Error::Parse(format!("report row has {} columns", rec.len())));
        }
        if rec.get(0) == Some("bench") {
            continue; // stray duplicate header
        }
        let f = |i: usize| rec.get(i).unwrap_or_default();
        out.push(ReportRow {
            bench: f(0).to_string(),
            threads: f(1).parse().map_err(|_| bad_cell(f(1)))?,
            interval: f(2).parse().map_err(|_| bad_cell(f(2)))?,
            events: f(3).parse().map_err(|_| bad_cell(f(3)))?,
            seconds: f(4).parse().map_err(|_| bad_cell(f(4)))?,
            throughput: f(5).parse().map_err(|_| bad_cell(f(5)))?,
        });
    }
    Ok(out)
}

fn bad_cell(s: &str) -> Error {
    Error::Parse(format!("unparseable report cell `{s}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("tilt-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn jsonl_round_trips_scalars_structs_and_keys() {
        let rows: Vec<KeyedRow> = vec![
            (None, Event::new(0, 5, Value::Int(3))),
            (None, Event::new(5, 6, Value::Float(3.0))),
            (Some(7), Event::new(6, 9, Value::Bool(true))),
            (
                None,
                Event::new(9, 12, Value::record(vec![
                    ("bid", Value::Float(2.5)),
                    ("size", Value::Int(100)),
                ])),
            ),
        ];
        let p = tmp("events.jsonl");
        write_events_jsonl(&p, &rows).unwrap();
        let back = read_events_jsonl(&p).unwrap();
        assert_eq!(rows, back);
        // Int(3) and Float(3.0) stay distinct on disk.
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"payload\":3,"));
        assert!(text.contains("\"payload\":3.0,"));
    }

    #[test]
    fn csv_round_trips_with_header_order() {
        let rows: Vec<KeyedRow> = vec![
            (
                Some(1),
                Event::new(0, 1, Value::record(vec![
                    ("qty", Value::Float(12.5)),
                    ("flag", Value::Bool(false)),
                ])),
            ),
            (
                Some(2),
                Event::new(1, 3, Value::record(vec![
                    ("qty", Value::Float(8.0)),
                    ("flag", Value::Bool(true)),
                ])),
            ),
        ];
        let p = tmp("events.csv");
        write_events_csv(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("key,start,end,qty,flag\n"));
        let back = read_events_csv(&p).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn csv_scalar_column_and_type_fidelity() {
        let rows: Vec<KeyedRow> = vec![
            (None, Event::new(0, 1, Value::Int(4))),
            (None, Event::new(1, 2, Value::Float(4.0))),
        ];
        let p = tmp("scalar.csv");
        write_events_csv(&p, &rows).unwrap();
        let back = read_events(&p).unwrap(); // extension-based dispatch
        assert_eq!(rows, back);
    }

    #[test]
    fn malformed_lines_name_the_position() {
        let p = tmp("bad.jsonl");
        std::fs::write(&p, "{\"start\":0,\"end\":5,\"payload\":1}\n{\"start\":5}\n").unwrap();
        let err = read_events_jsonl(&p).unwrap_err().to_string();
        assert!(err.contains(":2:"), "error should name line 2: {err}");
        let p2 = tmp("empty-interval.jsonl");
        std::fs::write(&p2, "{\"start\":5,\"end\":5,\"payload\":1}\n").unwrap();
        assert!(read_events_jsonl(&p2).is_err());
    }

    #[test]
    fn keyed_expectations_are_enforced() {
        let mixed: Vec<KeyedRow> = vec![
            (Some(1), Event::new(0, 1, Value::Int(1))),
            (None, Event::new(1, 2, Value::Int(2))),
        ];
        assert!(expect_keyed(mixed.clone()).is_err());
        assert!(expect_unkeyed(mixed).is_err());
        let keyed: Vec<KeyedRow> = vec![(Some(1), Event::new(0, 1, Value::Int(1)))];
        assert_eq!(expect_keyed(keyed).unwrap().len(), 1);
    }

    fn sample_rows() -> Vec<ReportRow> {
        vec![
            ReportRow {
                bench: "trend".into(),
                threads: 4,
                interval: 65536,
                events: 1000000,
                seconds: 0.25,
                throughput: 4000000.0,
            },
            ReportRow {
                bench: "ysb".into(),
                threads: 1,
                interval: 1024,
                events: 500,
                seconds: 0.5,
                throughput: 1000.0,
            },
        ]
    }

    #[test]
    fn report_append_writes_one_header() {
        let p = tmp("report.csv");
        let _ = std::fs::remove_file(&p);
        append_report_csv(&p, &sample_rows()).unwrap();
        append_report_csv(&p, &sample_rows()[..1]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.matches("bench,threads").count(), 1);
        assert_eq!(text.lines().count(), 4);
        let back = read_report(&p, b',').unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0], sample_rows()[0]);
    }

    #[test]
    fn dat_round_trips_through_the_csv_parser() {
        let p = tmp("report.dat");
        write_report_dat(&p, &sample_rows()).unwrap();
        let back = read_report(&p, b' ').unwrap();
        assert_eq!(back, sample_rows());
    }
}
