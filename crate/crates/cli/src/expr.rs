//! Radial profile expressions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary ('*' unary)*
//! unary   := '-' unary | primary
//! primary := number | 't' | 'scal' | '$' name | 'table:' path
//!          | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `const(x)`, `bump(center, width, amp)`,
//! `plateau(lo, hi, ramp, amp)`, `expdecay(rate, amp)`. Function arguments
//! must not depend on `t` or `scal`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::CliError;

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    T,
    Scal,
    Table(Arc<Table>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Bump { center: f64, width: f64, amp: f64 },
    Plateau { lo: f64, hi: f64, ramp: f64, amp: f64 },
    ExpDecay { rate: f64, amp: f64 },
}

/// Piecewise linear table of `(t, value)` samples, increasing in `t`.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: String,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl Table {
    fn eval(&self, t: f64) -> f64 {
        let k = self.t.partition_point(|&x| x <= t);
        if k == 0 {
            return self.v[0];
        }
        if k == self.t.len() {
            return self.v[k - 1];
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let s = (t - t0) / (t1 - t0);
        self.v[k - 1] + s * (self.v[k] - self.v[k - 1])
    }
}

fn smooth_step(x: f64) -> f64 {
    let s = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    s(x) / (s(x) + s(1.0 - x))
}

impl Expr {
    pub fn eval(&self, t: f64, scal: f64) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::T => t,
            Expr::Scal => scal,
            Expr::Table(tab) => tab.eval(t),
            Expr::Neg(a) => -a.eval(t, scal),
            Expr::Add(a, b) => a.eval(t, scal) + b.eval(t, scal),
            Expr::Sub(a, b) => a.eval(t, scal) - b.eval(t, scal),
            Expr::Mul(a, b) => a.eval(t, scal) * b.eval(t, scal),
            Expr::Bump { center, width, amp } => {
                let x = (t - center) / width;
                if x.abs() < 1.0 {
                    amp * (1.0 - 1.0 / (1.0 - x * x)).exp()
                } else {
                    0.0
                }
            }
            Expr::Plateau { lo, hi, ramp, amp } => {
                if t >= *lo && t <= *hi {
                    *amp
                } else if t < *lo {
                    amp * smooth_step((t - lo + ramp) / ramp)
                } else {
                    amp * smooth_step((hi + ramp - t) / ramp)
                }
            }
            Expr::ExpDecay { rate, amp } => amp * (-rate * t).exp(),
        }
    }

    pub fn uses_scal(&self) -> bool {
        match self {
            Expr::Scal => true,
            Expr::Neg(a) => a.uses_scal(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.uses_scal() || b.uses_scal(),
            _ => false,
        }
    }

    /// Tables referenced by the expression.
    pub fn tables(&self) -> Vec<Arc<Table>> {
        match self {
            Expr::Table(t) => vec![t.clone()],
            Expr::Neg(a) => a.tables(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                let mut v = a.tables();
                v.extend(b.tables());
                v
            }
            _ => Vec::new(),
        }
    }

    fn constant(&self) -> Option<f64> {
        match self {
            Expr::Num(x) => Some(*x),
            Expr::Neg(a) => a.constant().map(|x| -x),
            Expr::Add(a, b) => Some(a.constant()? + b.constant()?),
            Expr::Sub(a, b) => Some(a.constant()? - b.constant()?),
            Expr::Mul(a, b) => Some(a.constant()? * b.constant()?),
            _ => None,
        }
    }
}

pub struct Parser<'a> {
    src: &'a str,
    pos: usize,
    params: &'a BTreeMap<String, f64>,
    base: &'a Path,
}

pub fn parse(src: &str, params: &BTreeMap<String, f64>, base: &Path) -> Result<Expr, CliError> {
    let mut p = Parser { src, pos: 0, params, base };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> CliError {
        CliError::Config(format!("profile `{}` at offset {}: {msg}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, CliError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, CliError> {
        let mut lhs = self.unary()?;
        while self.eat('*') {
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, CliError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn primary(&mut self) -> Result<Expr, CliError> {
        self.skip_ws();
        let Some(c) = self.peek() else {
            return Err(self.err("unexpected end of input"));
        };
        if c == '(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(')') {
                return Err(self.err("expected `)`"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c == '$' {
            self.pos += 1;
            let name = self.ident();
            return self
                .params
                .get(name)
                .map(|&x| Expr::Num(x))
                .ok_or_else(|| self.err(&format!("unknown parameter `${name}`")));
        }
        if self.src[self.pos..].starts_with("table:") {
            self.pos += "table:".len();
            let start = self.pos;
            while let Some(ch) = self
                .peek()
                .filter(|c| !(c.is_whitespace() || matches!(c, ')' | ',' | '+' | '*')))
            {
                self.pos += ch.len_utf8();
            }
            let path = &self.src[start..self.pos];
            if path.is_empty() {
                return Err(self.err("empty table path"));
            }
            return Ok(Expr::Table(Arc::new(load_table(&self.base.join(path))?)));
        }
        let name = self.ident();
        match name {
            "" => Err(self.err(&format!("unexpected `{c}`"))),
            "t" => Ok(Expr::T),
            "scal" => Ok(Expr::Scal),
            "const" | "bump" | "plateau" | "expdecay" => {
                let args = self.args(name)?;
                let want = match name {
                    "const" => 1,
                    "bump" => 3,
                    "plateau" => 4,
                    _ => 2,
                };
                if args.len() != want {
                    return Err(self.err(&format!("`{name}` takes {want} arguments, got {}", args.len())));
                }
                Ok(match name {
                    "const" => Expr::Num(args[0]),
                    "bump" if args[1] > 0.0 => Expr::Bump { center: args[0], width: args[1], amp: args[2] },
                    "plateau" if args[0] <= args[1] && args[2] > 0.0 => Expr::Plateau {
                        lo: args[0],
                        hi: args[1],
                        ramp: args[2],
                        amp: args[3],
                    },
                    "expdecay" => Expr::ExpDecay { rate: args[0], amp: args[1] },
                    _ => return Err(self.err(&format!("invalid arguments to `{name}`"))),
                })
            }
            other => Err(self.err(&format!("unknown name `{other}`"))),
        }
    }

    fn args(&mut self, name: &str) -> Result<Vec<f64>, CliError> {
        if !self.eat('(') {
            return Err(self.err(&format!("expected `(` after `{name}`")));
        }
        let mut out = Vec::new();
        loop {
            let e = self.expr()?;
            out.push(
                e.constant()
                    .ok_or_else(|| self.err(&format!("arguments of `{name}` must be constant")))?,
            );
            if self.eat(')') {
                return Ok(out);
            }
            if !self.eat(',') {
                return Err(self.err("expected `,` or `)`"));
            }
        }
    }

    fn number(&mut self) -> Result<Expr, CliError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() {
            let b = bytes[self.pos];
            let exp_sign = (b == b'+' || b == b'-')
                && self.pos > start
                && matches!(bytes[self.pos - 1], b'e' | b'E');
            if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.src[start..self.pos]
            .parse()
            .map(Expr::Num)
            .map_err(|_| self.err("malformed number"))
    }
}

fn load_table(path: &Path) -> Result<Table, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("table {}: {e}", path.display())))?;
    let (t, field) = cclab_core::Field::read_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::Config(format!("table {}: {e}", path.display())))?;
    if t.len() < 2 || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(format!(
            "table {}: needs at least two rows with increasing t",
            path.display()
        )));
    }
    Ok(Table {
        path: path.display().to_string(),
        t,
        v: field.into_values(),
    })
}
