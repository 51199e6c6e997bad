//! S-expression serialization of queries.
//!
//! The textual form is what `--dump-ir` prints and what the golden tests
//! pin. It is lossless: `parse_query(print_query(q)) == q`, including
//! resolved lookback/lookahead margins.
//!
//! ```text
//! (query
//!   (input in 1)
//!   (def sum10 (dom -inf inf 1)
//!     (reduce sum (slice in -10 0)))
//!   (output sum10)
//!   (lookback (in 10))
//!   (lookahead (in 0)))
//! ```
//!
//! Floats print with Rust's `{:?}` (`1.0`, `-0.5`, `inf`, `NaN`) and are
//! distinguished from integers by containing `.`, `e`, `inf`, or `NaN`.

use std::fmt::Write as _;

use super::{DomainBound, IRExpr, InputDef, Query, TemporalDef, TimeDomain};
use crate::error::{Error, Result};
use crate::value::{BinOp, UnOp, Value};

// ---------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------

/// Render a query in canonical indented form.
pub fn print_query(q: &Query) -> String {
    let mut s = String::from("(query\n");
    for i in &q.inputs {
        let _ = writeln!(s, "  (input {} {})", i.name, i.precision);
    }
    for d in &q.defs {
        let _ = writeln!(
            s,
            "  (def {} (dom {} {} {})",
            d.name,
            bound(&d.domain.start),
            bound(&d.domain.end),
            d.domain.precision
        );
        let mut body = String::new();
        print_expr(&d.body, &mut body);
        let _ = writeln!(s, "    {body})");
    }
    let _ = writeln!(s, "  (output {})", q.output);
    if !q.lookback.is_empty() {
        let items: Vec<String> = q
            .lookback
            .iter()
            .map(|(n, v)| format!("({n} {v})"))
            .collect();
        let _ = writeln!(s, "  (lookback {})", items.join(" "));
    }
    if !q.lookahead.is_empty() {
        let items: Vec<String> = q
            .lookahead
            .iter()
            .map(|(n, v)| format!("({n} {v})"))
            .collect();
        let _ = writeln!(s, "  (lookahead {})", items.join(" "));
    }
    if s.ends_with('\n') {
        s.pop();
    }
    s.push(')');
    s
}

fn bound(b: &DomainBound) -> String {
    match b {
        DomainBound::NegInf => "-inf".into(),
        DomainBound::PosInf => "inf".into(),
        DomainBound::At(x) => x.to_string(),
    }
}

fn print_value(v: &Value, out: &mut String) {
    match v {
        Value::Phi => out.push_str("phi"),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(f) => {
            let _ = write!(out, "{f:?}");
        }
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Struct(s) => {
            out.push_str("(struct");
            for (n, v) in s.fields() {
                let _ = write!(out, " {n} ");
                print_value(v, out);
            }
            out.push(')');
        }
    }
}

fn print_expr(e: &IRExpr, out: &mut String) {
    match e {
        IRExpr::Const(v) => {
            out.push_str("(const ");
            print_value(v, out);
            out.push(')');
        }
        IRExpr::TimeVar(o) => {
            let _ = write!(out, "(tvar {o})");
        }
        IRExpr::ValueVar => out.push_str("(vvar)"),
        IRExpr::BinOp(op, a, b) => {
            let _ = write!(out, "({} ", op.name());
            print_expr(a, out);
            out.push(' ');
            print_expr(b, out);
            out.push(')');
        }
        IRExpr::UnOp(op, a) => {
            match op {
                UnOp::Field(name) => {
                    let _ = write!(out, "(field {name} ");
                }
                other => {
                    let _ = write!(out, "({} ", other.name());
                }
            }
            print_expr(a, out);
            out.push(')');
        }
        IRExpr::If(c, t, e2) => {
            out.push_str("(if ");
            print_expr(c, out);
            out.push(' ');
            print_expr(t, out);
            out.push(' ');
            print_expr(e2, out);
            out.push(')');
        }
        IRExpr::Index { def, offset } => {
            let _ = write!(out, "(idx {def} {offset})");
        }
        IRExpr::Slice { def, lo, hi } => {
            let _ = write!(out, "(slice {def} {lo} {hi})");
        }
        IRExpr::Reduce { spec, over, map } => {
            let _ = write!(out, "(reduce {spec} ");
            print_expr(over, out);
            if let Some(m) = map {
                out.push_str(" (map ");
                print_expr(m, out);
                out.push(')');
            }
            out.push(')');
        }
        IRExpr::Call(f, args) => {
            let _ = write!(out, "(call {f}");
            for a in args {
                out.push(' ');
                print_expr(a, out);
            }
            out.push(')');
        }
    }
}

/// Render a single expression (used in diagnostics and tests).
pub fn print_one_expr(e: &IRExpr) -> String {
    let mut s = String::new();
    print_expr(e, &mut s);
    s
}

// ---------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn tokenize(src: &str) -> Result<Vec<String>> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    for c in src.chars() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            ';' => {
                // Comment to end of line is not supported inside atoms;
                // keep the grammar minimal and reject.
                return Err(Error::Parse("`;` is not part of the grammar".into()));
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    Ok(toks)
}

fn parse_sx(toks: &[String], pos: &mut usize) -> Result<Sx> {
    let t = toks
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match toks.get(*pos).map(|s| s.as_str()) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sx::List(items));
                    }
                    Some(_) => items.push(parse_sx(toks, pos)?),
                    None => return Err(Error::Parse("unclosed `(`".into())),
                }
            }
        }
        ")" => Err(Error::Parse("unexpected `)`".into())),
        atom => Ok(Sx::Atom(atom.to_string())),
    }
}

impl Sx {
    fn atom(&self) -> Result<&str> {
        match self {
            Sx::Atom(s) => Ok(s),
            Sx::List(_) => Err(Error::Parse("expected atom, found list".into())),
        }
    }

    fn list(&self) -> Result<&[Sx]> {
        match self {
            Sx::List(items) => Ok(items),
            Sx::Atom(a) => Err(Error::Parse(format!("expected list, found `{a}`"))),
        }
    }

    fn tagged(&self, tag: &str) -> Result<&[Sx]> {
        let items = self.list()?;
        match items.first() {
            Some(Sx::Atom(t)) if t == tag => Ok(&items[1..]),
            _ => Err(Error::Parse(format!("expected `({tag} ...)`"))),
        }
    }

    fn head(&self) -> Result<&str> {
        self.list()?
            .first()
            .ok_or_else(|| Error::Parse("empty list".into()))?
            .atom()
    }
}

fn parse_i64(s: &Sx) -> Result<i64> {
    let a = s.atom()?;
    a.parse::<i64>()
        .map_err(|_| Error::Parse(format!("expected integer, found `{a}`")))
}

fn parse_bound(s: &Sx) -> Result<DomainBound> {
    match s.atom()? {
        "-inf" => Ok(DomainBound::NegInf),
        "inf" => Ok(DomainBound::PosInf),
        a => a
            .parse::<i64>()
            .map(DomainBound::At)
            .map_err(|_| Error::Parse(format!("expected domain bound, found `{a}`"))),
    }
}

fn parse_value(s: &Sx) -> Result<Value> {
    match s {
        Sx::Atom(a) => match a.as_str() {
            "phi" => Ok(Value::Phi),
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            other => {
                let is_float = other.contains(['.', 'e', 'E'])
                    || other.contains("inf")
                    || other.contains("NaN");
                if is_float {
                    other
                        .parse::<f64>()
                        .map(Value::Float)
                        .map_err(|_| Error::Parse(format!("bad float `{other}`")))
                } else {
                    other
                        .parse::<i64>()
                        .map(Value::Int)
                        .map_err(|_| Error::Parse(format!("bad number `{other}`")))
                }
            }
        },
        Sx::List(_) => {
            let items = s.tagged("struct")?;
            if items.len() % 2 != 0 {
                return Err(Error::Parse("struct needs name/value pairs".into()));
            }
            let mut fields = Vec::new();
            for pair in items.chunks(2) {
                fields.push((pair[0].atom()?.to_string(), parse_value(&pair[1])?));
            }
            Ok(Value::Struct(std::sync::Arc::new(
                crate::value::StructValue::new(fields),
            )))
        }
    }
}

fn binop_of(name: &str) -> Option<BinOp> {
    use BinOp::*;
    Some(match name {
        "add" => Add,
        "sub" => Sub,
        "mul" => Mul,
        "div" => Div,
        "mod" => Mod,
        "lt" => Lt,
        "le" => Le,
        "gt" => Gt,
        "ge" => Ge,
        "eq" => Eq,
        "ne" => Ne,
        "and" => And,
        "or" => Or,
        _ => return None,
    })
}

fn unop_of(name: &str) -> Option<UnOp> {
    use UnOp::*;
    Some(match name {
        "neg" => Neg,
        "not" => Not,
        "abs" => Abs,
        "sqrt" => Sqrt,
        "isphi" => IsPhi,
        _ => return None,
    })
}

fn parse_expr(s: &Sx) -> Result<IRExpr> {
    let head = s.head()?;
    let rest = &s.list()?[1..];
    let argc = |n: usize| -> Result<()> {
        if rest.len() == n {
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "`{head}` takes {n} argument(s), found {}",
                rest.len()
            )))
        }
    };
    if let Some(op) = binop_of(head) {
        argc(2)?;
        return Ok(IRExpr::bin(op, parse_expr(&rest[0])?, parse_expr(&rest[1])?));
    }
    if let Some(op) = unop_of(head) {
        argc(1)?;
        return Ok(IRExpr::un(op, parse_expr(&rest[0])?));
    }
    match head {
        "const" => {
            argc(1)?;
            Ok(IRExpr::Const(parse_value(&rest[0])?))
        }
        "tvar" => {
            argc(1)?;
            Ok(IRExpr::TimeVar(parse_i64(&rest[0])?))
        }
        "vvar" => {
            argc(0)?;
            Ok(IRExpr::ValueVar)
        }
        "field" => {
            argc(2)?;
            Ok(IRExpr::un(
                UnOp::Field(rest[0].atom()?.to_string()),
                parse_expr(&rest[1])?,
            ))
        }
        "if" => {
            argc(3)?;
            Ok(IRExpr::if_(
                parse_expr(&rest[0])?,
                parse_expr(&rest[1])?,
                parse_expr(&rest[2])?,
            ))
        }
        "idx" => {
            argc(2)?;
            Ok(IRExpr::Index {
                def: rest[0].atom()?.to_string(),
                offset: parse_i64(&rest[1])?,
            })
        }
        "slice" => {
            argc(3)?;
            Ok(IRExpr::Slice {
                def: rest[0].atom()?.to_string(),
                lo: parse_i64(&rest[1])?,
                hi: parse_i64(&rest[2])?,
            })
        }
        "reduce" => {
            if rest.len() != 2 && rest.len() != 3 {
                return Err(Error::Parse(
                    "`reduce` takes a spec, a slice, and an optional map".into(),
                ));
            }
            let spec = rest[0].atom()?.to_string();
            let over = parse_expr(&rest[1])?;
            let map = match rest.get(2) {
                None => None,
                Some(m) => {
                    let inner = m.tagged("map")?;
                    if inner.len() != 1 {
                        return Err(Error::Parse("`map` takes one expression".into()));
                    }
                    Some(Box::new(parse_expr(&inner[0])?))
                }
            };
            Ok(IRExpr::Reduce {
                spec,
                over: Box::new(over),
                map,
            })
        }
        "call" => {
            if rest.is_empty() {
                return Err(Error::Parse("`call` needs a function name".into()));
            }
            let f = rest[0].atom()?.to_string();
            let args = rest[1..]
                .iter()
                .map(parse_expr)
                .collect::<Result<Vec<_>>>()?;
            Ok(IRExpr::Call(f, args))
        }
        other => Err(Error::Parse(format!("unknown form `{other}`"))),
    }
}

/// Parse a serialized query.
pub fn parse_query(src: &str) -> Result<Query> {
    let toks = tokenize(src)?;
    let mut pos = 0;
    let sx = parse_sx(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(Error::Parse("trailing tokens after query".into()));
    }
    let items = sx.tagged("query")?;

    let mut q = Query::new(Vec::new(), Vec::new(), "");
    for item in items {
        match item.head()? {
            "input" => {
                let rest = item.tagged("input")?;
                if rest.len() != 2 {
                    return Err(Error::Parse("`input` takes name and precision".into()));
                }
                q.inputs.push(InputDef {
                    name: rest[0].atom()?.to_string(),
                    precision: parse_i64(&rest[1])?,
                });
            }
            "def" => {
                let rest = item.tagged("def")?;
                if rest.len() != 3 {
                    return Err(Error::Parse("`def` takes name, domain, body".into()));
                }
                let name = rest[0].atom()?.to_string();
                let dom = rest[1].tagged("dom")?;
                if dom.len() != 3 {
                    return Err(Error::Parse("`dom` takes start, end, precision".into()));
                }
                let domain = TimeDomain {
                    start: parse_bound(&dom[0])?,
                    end: parse_bound(&dom[1])?,
                    precision: parse_i64(&dom[2])?,
                };
                q.defs.push(TemporalDef {
                    name,
                    domain,
                    body: parse_expr(&rest[2])?,
                });
            }
            "output" => {
                let rest = item.tagged("output")?;
                if rest.len() != 1 {
                    return Err(Error::Parse("`output` takes one name".into()));
                }
                q.output = rest[0].atom()?.to_string();
            }
            "lookback" | "lookahead" => {
                let tag = item.head()?.to_string();
                for entry in item.list()?[1..].iter() {
                    let pair = entry.list()?;
                    if pair.len() != 2 {
                        return Err(Error::Parse(format!("`{tag}` entries are (name ticks)")));
                    }
                    let name = pair[0].atom()?.to_string();
                    let v = parse_i64(&pair[1])?;
                    if tag == "lookback" {
                        q.lookback.insert(name, v);
                    } else {
                        q.lookahead.insert(name, v);
                    }
                }
            }
            other => return Err(Error::Parse(format!("unknown query item `{other}`"))),
        }
    }
    if q.output.is_empty() {
        return Err(Error::Parse("query has no output".into()));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trendish() -> Query {
        let mut q = Query::new(
            vec![InputDef {
                name: "in".into(),
                precision: 1,
            }],
            vec![
                TemporalDef {
                    name: "sum10".into(),
                    domain: TimeDomain::all(1),
                    body: IRExpr::reduce("sum", IRExpr::slice("in", -10, 0)),
                },
                TemporalDef {
                    name: "avg10".into(),
                    domain: TimeDomain::all(1),
                    body: IRExpr::bin(
                        BinOp::Div,
                        IRExpr::index("sum10", 0),
                        IRExpr::float(10.0),
                    ),
                },
            ],
            "avg10",
        );
        q.lookback.insert("in".into(), 10);
        q.lookahead.insert("in".into(), 0);
        q
    }

    #[test]
    fn prints_canonical_form() {
        let text = print_query(&trendish());
        let expect = "\
(query
  (input in 1)
  (def sum10 (dom -inf inf 1)
    (reduce sum (slice in -10 0)))
  (def avg10 (dom -inf inf 1)
    (div (idx sum10 0) (const 10.0)))
  (output avg10)
  (lookback (in 10))
  (lookahead (in 0)))";
        assert_eq!(text, expect);
    }

    #[test]
    fn parses_back_exactly() {
        let q = trendish();
        let q2 = parse_query(&print_query(&q)).unwrap();
        assert_eq!(q, q2);
    }

    #[test]
    fn parses_special_floats_and_structs() {
        let e = IRExpr::bin(
            BinOp::Add,
            IRExpr::Const(Value::Float(f64::NEG_INFINITY)),
            IRExpr::Const(Value::record(vec![
                ("a", Value::Int(1)),
                ("b", Value::Float(0.5)),
            ])),
        );
        let text = print_one_expr(&e);
        assert_eq!(text, "(add (const -inf) (const (struct a 1 b 0.5)))");
        let q = Query::new(
            vec![],
            vec![TemporalDef {
                name: "out".into(),
                domain: TimeDomain::all(1),
                body: e,
            }],
            "out",
        );
        assert_eq!(parse_query(&print_query(&q)).unwrap(), q);
        // NaN round-trips structurally even though NaN != NaN under IEEE.
        let q = Query::new(
            vec![],
            vec![TemporalDef {
                name: "out".into(),
                domain: TimeDomain::all(1),
                body: IRExpr::float(f64::NAN),
            }],
            "out",
        );
        let q2 = parse_query(&print_query(&q)).unwrap();
        assert_eq!(print_query(&q2), print_query(&q));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_query("(query (output)").is_err());
        assert!(parse_query("(query)").is_err());
        assert!(parse_query("(query (output x) extra)").is_err());
        assert!(parse_query("(nope (output x))").is_err());
        assert!(parse_query("(query (def a (dom 0 1) (vvar)) (output a))").is_err());
        assert!(parse_query("(query (output x)) junk").is_err());
    }

    // ----- random expression round-trips -----

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            Just(Value::Phi),
            (-1000i64..1000).prop_map(Value::Int),
            (-1000i64..1000).prop_map(|x| Value::Float(x as f64 / 8.0)),
            any::<bool>().prop_map(Value::Bool),
        ]
    }

    fn arb_expr() -> impl Strategy<Value = IRExpr> {
        let leaf = prop_oneof![
            arb_value().prop_map(IRExpr::Const),
            (-50i64..50).prop_map(IRExpr::TimeVar),
            (-20i64..20).prop_map(|o| IRExpr::index("a", o)),
            (-20i64..20).prop_map(|o| IRExpr::index("b", o)),
        ];
        leaf.prop_recursive(3, 24, 3, |inner| {
            prop_oneof![
                (any::<u8>(), inner.clone(), inner.clone()).prop_map(|(op, a, b)| {
                    use BinOp::*;
                    let ops = [Add, Sub, Mul, Div, Mod, Lt, Le, Gt, Ge, Eq, Ne, And, Or];
                    IRExpr::bin(ops[op as usize % ops.len()], a, b)
                }),
                inner.clone().prop_map(|a| IRExpr::un(UnOp::Sqrt, a)),
                inner
                    .clone()
                    .prop_map(|a| IRExpr::un(UnOp::Field("f".into()), a)),
                (inner.clone(), inner.clone(), inner.clone())
                    .prop_map(|(c, t, e)| IRExpr::if_(c, t, e)),
                (inner.clone(), -30i64..0, 1i64..10).prop_map(|(m, lo, len)| {
                    IRExpr::reduce_map(
                        "sum",
                        IRExpr::slice("a", lo, lo + len),
                        // Map bodies are element functions; reuse the inner
                        // expr only as structure by replacing leaves is
                        // overkill — a simple polynomial over vvar suffices
                        // to exercise printing, and `m` exercises `over`
                        // nesting via call arguments below.
                        IRExpr::bin(
                            BinOp::Mul,
                            IRExpr::ValueVar,
                            IRExpr::bin(BinOp::Add, IRExpr::ValueVar, {
                                let _ = m;
                                IRExpr::float(1.0)
                            }),
                        ),
                    )
                }),
                (inner.clone(), inner).prop_map(|(a, b)| IRExpr::Call(
                    "fn2".into(),
                    vec![a, b]
                )),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn random_exprs_round_trip(e in arb_expr()) {
            let q = Query::new(
                vec![
                    InputDef { name: "a".into(), precision: 1 },
                    InputDef { name: "b".into(), precision: 1 },
                ],
                vec![TemporalDef {
                    name: "out".into(),
                    domain: TimeDomain::all(1),
                    body: e,
                }],
                "out",
            );
            let q2 = parse_query(&print_query(&q)).unwrap();
            prop_assert_eq!(q, q2);
        }

        #[test]
        fn random_domains_round_trip(
            s in prop_oneof![Just(DomainBound::NegInf), (-100i64..100).prop_map(|x| DomainBound::At(x * 5))],
            e in prop_oneof![Just(DomainBound::PosInf), (-100i64..100).prop_map(|x| DomainBound::At(x * 5))],
            p in 1i64..20,
            lb in 0i64..100,
            la in 0i64..100,
        ) {
            let mut q = Query::new(
                vec![InputDef { name: "a".into(), precision: 1 }],
                vec![TemporalDef {
                    name: "out".into(),
                    domain: TimeDomain { start: s, end: e, precision: p },
                    body: IRExpr::index("a", 0),
                }],
                "out",
            );
            q.lookback.insert("a".into(), lb);
            q.lookahead.insert("a".into(), la);
            let q2 = parse_query(&print_query(&q)).unwrap();
            prop_assert_eq!(q, q2);
        }
    }
}
