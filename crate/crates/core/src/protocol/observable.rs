//! Observable expressions:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := primary ('^' uint)*
//! primary:= 'phi(' name ')' | 'jordan(' expr ',' expr ')' | number | '(' expr ')'
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::algebra::{Algebra, OperatorPoly};
use crate::error::{Error, Result};
use crate::smearing::PairingTable;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableExpr {
    Field(String),
    Number(f64),
    Sum(Box<ObservableExpr>, Box<ObservableExpr>),
    Difference(Box<ObservableExpr>, Box<ObservableExpr>),
    Product(Box<ObservableExpr>, Box<ObservableExpr>),
    Power(Box<ObservableExpr>, u32),
    Jordan(Box<ObservableExpr>, Box<ObservableExpr>),
}

impl ObservableExpr {
    /// Upper bound on the polynomial degree.
    pub fn degree(&self) -> usize {
        use ObservableExpr::*;
        match self {
            Field(_) => 1,
            Number(_) => 0,
            Sum(a, b) | Difference(a, b) => a.degree().max(b.degree()),
            Product(a, b) | Jordan(a, b) => a.degree() + b.degree(),
            Power(a, n) => a.degree() * *n as usize,
        }
    }

    /// Function names in order of first appearance.
    pub fn names(&self) -> Vec<String> {
        fn walk(e: &ObservableExpr, out: &mut Vec<String>) {
            use ObservableExpr::*;
            match e {
                Field(n) if !out.contains(n) => out.push(n.clone()),
                Field(_) | Number(_) => {}
                Power(a, _) => walk(a, out),
                Sum(a, b) | Difference(a, b) | Product(a, b) | Jordan(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn renamed(&self, map: &BTreeMap<String, String>) -> Self {
        use ObservableExpr::*;
        let r = |e: &ObservableExpr| Box::new(e.renamed(map));
        match self {
            Field(n) => Field(map.get(n).cloned().unwrap_or_else(|| n.clone())),
            Number(v) => Number(*v),
            Sum(a, b) => Sum(r(a), r(b)),
            Difference(a, b) => Difference(r(a), r(b)),
            Product(a, b) => Product(r(a), r(b)),
            Power(a, n) => Power(r(a), *n),
            Jordan(a, b) => Jordan(r(a), r(b)),
        }
    }

    /// Normal-ordered polynomial over the table's labels.
    pub fn lower(&self, alg: &Algebra, table: &PairingTable) -> Result<OperatorPoly> {
        use ObservableExpr::*;
        Ok(match self {
            Field(n) => OperatorPoly::field(table.id(n)?),
            Number(v) => OperatorPoly::real(*v),
            Sum(a, b) => a.lower(alg, table)?.add(&b.lower(alg, table)?),
            Difference(a, b) => a.lower(alg, table)?.sub(&b.lower(alg, table)?),
            Product(a, b) => alg.mul(&a.lower(alg, table)?, &b.lower(alg, table)?)?,
            Power(a, n) => alg.pow(&a.lower(alg, table)?, *n as usize)?,
            Jordan(a, b) => alg.jordan(&a.lower(alg, table)?, &b.lower(alg, table)?)?,
        })
    }

    fn precedence(&self) -> u8 {
        use ObservableExpr::*;
        match self {
            Sum(..) | Difference(..) => 1,
            Product(..) => 2,
            Power(..) => 3,
            Number(v) if *v < 0.0 => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for ObservableExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ObservableExpr::*;
        let wrap = |f: &mut fmt::Formatter<'_>, e: &ObservableExpr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Field(n) => write!(f, "phi({n})"),
            Number(v) => write!(f, "{v}"),
            Sum(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" + ")?;
                wrap(f, b, 2)
            }
            Difference(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" - ")?;
                wrap(f, b, 2)
            }
            Product(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("*")?;
                wrap(f, b, 3)
            }
            Power(a, n) => {
                wrap(f, a, 4)?;
                write!(f, "^{n}")
            }
            Jordan(a, b) => write!(f, "jordan({a}, {b})"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

type PResult<T> = std::result::Result<T, (usize, String)>;

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err((self.pos, format!("expected '{s}'")))
        }
    }

    fn expr(&mut self) -> PResult<ObservableExpr> {
        let mut e = self.term()?;
        loop {
            if self.eat("+") {
                e = ObservableExpr::Sum(Box::new(e), Box::new(self.term()?));
            } else if self.eat("-") {
                e = ObservableExpr::Difference(Box::new(e), Box::new(self.term()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> PResult<ObservableExpr> {
        let mut e = self.factor()?;
        while self.eat("*") {
            e = ObservableExpr::Product(Box::new(e), Box::new(self.factor()?));
        }
        Ok(e)
    }

    fn factor(&mut self) -> PResult<ObservableExpr> {
        let mut e = self.primary()?;
        while self.eat("^") {
            let start = self.pos;
            let digits = self.src[self.pos..].chars().take_while(char::is_ascii_digit).count();
            let n: u32 = self.src[start..start + digits]
                .parse()
                .map_err(|_| (start, "expected a non-negative integer exponent".to_string()))?;
            self.pos += digits;
            e = ObservableExpr::Power(Box::new(e), n);
        }
        Ok(e)
    }

    fn name(&mut self) -> PResult<String> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..].chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').count();
        if len == 0 {
            return Err((start, "expected a function name".into()));
        }
        self.pos += len;
        Ok(self.src[start..start + len].to_string())
    }

    fn primary(&mut self) -> PResult<ObservableExpr> {
        let at = {
            self.skip_ws();
            self.pos
        };
        if self.eat("phi(") {
            let n = self.name()?;
            self.expect(")")?;
            return Ok(ObservableExpr::Field(n));
        }
        if self.eat("jordan(") {
            let a = self.expr()?;
            self.expect(",")?;
            let b = self.expr()?;
            self.expect(")")?;
            return Ok(ObservableExpr::Jordan(Box::new(a), Box::new(b)));
        }
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '-' || c == '.' => {
                let rest = &self.src[at..];
                let len = rest
                    .char_indices()
                    .take_while(|&(i, c)| {
                        c.is_ascii_digit()
                            || c == '.'
                            || c == 'e'
                            || c == 'E'
                            || (c == '-' || c == '+') && (i == 0 || rest[..i].ends_with(['e', 'E']))
                    })
                    .count();
                let v: f64 = rest[..len].parse().map_err(|_| (at, format!("malformed number '{}'", &rest[..len])))?;
                self.pos = at + len;
                Ok(ObservableExpr::Number(v))
            }
            Some(_) => Err((at, "expected phi(..), jordan(..), a number or '('".into())),
            None => Err((at, "unexpected end of expression".into())),
        }
    }
}

/// Parses an observable; errors carry a 1-based column.
pub fn parse_observable(text: &str) -> Result<ObservableExpr> {
    parse_observable_at(text, 1, 1)
}

pub(crate) fn parse_observable_at(text: &str, line: usize, col0: usize) -> Result<ObservableExpr> {
    let mut p = Parser { src: text, pos: 0 };
    let fail = |(pos, message): (usize, String)| Error::Parse {
        line,
        column: col0 + text[..pos.min(text.len())].chars().count(),
        message,
    };
    let e = p.expr().map_err(fail)?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(fail((p.pos, "unexpected trailing input".into())));
    }
    Ok(e)
}
