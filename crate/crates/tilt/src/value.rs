//! Scalar values and operator semantics.
//!
//! Every sample a query manipulates is a [`Value`]. The distinguished
//! absent value φ ([`Value::Phi`]) marks times where a signal is undefined;
//! all strict operators absorb it (any operand φ makes the result φ), and
//! only [`UnOp::IsPhi`] and conditional selection can observe it.
//!
//! Equality and hashing on `Value` are *structural*: floats compare by bit
//! pattern, so buffers of values can be deduplicated and compared exactly.
//! The expression-level comparison operators ([`BinOp::Eq`] and friends)
//! instead follow IEEE semantics on numbers (`NaN != NaN`); the two notions
//! serve different purposes and intentionally differ on NaN.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};

/// A scalar sample value.
#[derive(Clone)]
pub enum Value {
    /// The absent value φ: "no information at this time".
    Phi,
    Int(i64),
    Float(f64),
    Bool(bool),
    /// Immutable named-field record, shared by reference.
    Struct(Arc<StructValue>),
}

/// An ordered collection of named fields.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct StructValue {
    fields: Vec<(String, Value)>,
}

impl StructValue {
    pub fn new(fields: Vec<(String, Value)>) -> Self {
        StructValue { fields }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    pub fn fields(&self) -> &[(String, Value)] {
        &self.fields
    }
}

impl Value {
    /// Build a struct value from `(name, value)` pairs.
    pub fn record(fields: Vec<(&str, Value)>) -> Value {
        Value::Struct(Arc::new(StructValue::new(
            fields.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        )))
    }

    pub fn is_phi(&self) -> bool {
        matches!(self, Value::Phi)
    }

    /// Numeric view: ints promote to floats; φ, bools, structs have none.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Value::Phi => "phi",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Struct(_) => "struct",
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Phi, Value::Phi) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Struct(a), Value::Struct(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Phi => {}
            Value::Int(i) => i.hash(state),
            Value::Float(f) => f.to_bits().hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Struct(s) => s.hash(state),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Phi => write!(f, "phi"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Struct(s) => {
                write!(f, "{{")?;
                for (i, (n, v)) in s.fields().iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{n}: {v:?}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Binary operators over values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
            BinOp::Lt => "lt",
            BinOp::Le => "le",
            BinOp::Gt => "gt",
            BinOp::Ge => "ge",
            BinOp::Eq => "eq",
            BinOp::Ne => "ne",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

/// Unary operators over values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
    Abs,
    Sqrt,
    /// φ test — the one operator that observes absence instead of
    /// propagating it.
    IsPhi,
    /// Struct field projection.
    Field(String),
}

impl UnOp {
    pub fn name(&self) -> &'static str {
        match self {
            UnOp::Neg => "neg",
            UnOp::Not => "not",
            UnOp::Abs => "abs",
            UnOp::Sqrt => "sqrt",
            UnOp::IsPhi => "isphi",
            UnOp::Field(_) => "field",
        }
    }
}

fn type_err(op: &str, a: &Value, b: &Value) -> Error {
    Error::Type(format!("`{op}` not defined on ({}, {})", a.kind(), b.kind()))
}

/// Apply a binary operator. Strict in φ: if either operand is φ the result
/// is φ, for every operator including comparisons and logic.
pub fn apply_binop(op: BinOp, a: &Value, b: &Value) -> Result<Value> {
    use BinOp::*;
    if a.is_phi() || b.is_phi() {
        return Ok(Value::Phi);
    }
    match op {
        Add | Sub | Mul => match (a, b) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    Add => x.checked_add(*y),
                    Sub => x.checked_sub(*y),
                    _ => x.checked_mul(*y),
                };
                r.map(Value::Int).ok_or_else(|| {
                    Error::Arith(format!("integer overflow in {} {} {}", x, op.name(), y))
                })
            }
            _ => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Ok(Value::Float(match op {
                    Add => x + y,
                    Sub => x - y,
                    _ => x * y,
                })),
                _ => Err(type_err(op.name(), a, b)),
            },
        },
        // Division is always real-valued; integer operands promote. IEEE
        // rules apply at zero (inf/NaN), matching the reference evaluator.
        Div => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => Ok(Value::Float(x / y)),
            _ => Err(type_err("div", a, b)),
        },
        Mod => match (a, b) {
            (Value::Int(x), Value::Int(y)) => {
                if *y == 0 {
                    Err(Error::Arith("modulo by zero".into()))
                } else {
                    Ok(Value::Int(x.rem_euclid(*y)))
                }
            }
            _ => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Ok(Value::Float(x.rem_euclid(y))),
                _ => Err(type_err("mod", a, b)),
            },
        },
        Lt | Le | Gt | Ge => match (a.as_f64(), b.as_f64()) {
            // IEEE ordering: every comparison with NaN is false.
            (Some(x), Some(y)) => Ok(Value::Bool(match op {
                Lt => x < y,
                Le => x <= y,
                Gt => x > y,
                _ => x >= y,
            })),
            _ => Err(type_err(op.name(), a, b)),
        },
        Eq | Ne => {
            let eq = match (a, b) {
                (Value::Bool(x), Value::Bool(y)) => x == y,
                (Value::Struct(x), Value::Struct(y)) => x == y,
                _ => match (a.as_f64(), b.as_f64()) {
                    (Some(x), Some(y)) => x == y,
                    _ => return Err(type_err(op.name(), a, b)),
                },
            };
            Ok(Value::Bool(if op == Eq { eq } else { !eq }))
        }
        And | Or => match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(if op == And {
                *x && *y
            } else {
                *x || *y
            })),
            _ => Err(type_err(op.name(), a, b)),
        },
    }
}

/// Apply a unary operator. Strict in φ except for [`UnOp::IsPhi`].
pub fn apply_unop(op: &UnOp, a: &Value) -> Result<Value> {
    if let UnOp::IsPhi = op {
        return Ok(Value::Bool(a.is_phi()));
    }
    if a.is_phi() {
        return Ok(Value::Phi);
    }
    match op {
        UnOp::Neg => match a {
            Value::Int(x) => x
                .checked_neg()
                .map(Value::Int)
                .ok_or_else(|| Error::Arith("integer overflow in neg".into())),
            Value::Float(x) => Ok(Value::Float(-x)),
            _ => Err(Error::Type(format!("`neg` not defined on {}", a.kind()))),
        },
        UnOp::Not => match a {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            _ => Err(Error::Type(format!("`not` not defined on {}", a.kind()))),
        },
        UnOp::Abs => match a {
            Value::Int(x) => x
                .checked_abs()
                .map(Value::Int)
                .ok_or_else(|| Error::Arith("integer overflow in abs".into())),
            Value::Float(x) => Ok(Value::Float(x.abs())),
            _ => Err(Error::Type(format!("`abs` not defined on {}", a.kind()))),
        },
        UnOp::Sqrt => match a.as_f64() {
            Some(x) => Ok(Value::Float(x.sqrt())),
            None => Err(Error::Type(format!("`sqrt` not defined on {}", a.kind()))),
        },
        UnOp::Field(name) => match a {
            Value::Struct(s) => s.get(name).cloned().ok_or_else(|| {
                Error::Type(format!("struct has no field `{name}`"))
            }),
            _ => Err(Error::Type(format!(
                "`.{name}` not defined on {}",
                a.kind()
            ))),
        },
        UnOp::IsPhi => unreachable!("handled above"),
    }
}
