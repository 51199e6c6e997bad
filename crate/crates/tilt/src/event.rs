//! Input events.
//!
//! A stream arrives as a sequence of events, each carrying a payload over a
//! half-open validity interval `(start, end]`. Events may overlap; the
//! snapshot encoding ([`crate::ssbuf`]) turns any event sequence into a
//! change-point representation.

use crate::time::Time;
use crate::value::Value;

/// One input event: `value` holds over `(start, end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub start: Time,
    pub end: Time,
    pub value: Value,
}

impl Event {
    pub fn new(start: i64, end: i64, value: Value) -> Event {
        Event {
            start: Time(start),
            end: Time(end),
            value,
        }
    }
}

/// An event tagged with a partition key (`0` for unkeyed streams).
pub type KeyedEvent = (i64, Event);
