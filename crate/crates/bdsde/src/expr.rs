//! Arithmetic expressions used in problem files.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr   := cmp
//! cmp    := sum (("<" | "<=" | ">" | ">=" | "==" | "!=") sum)?
//! sum    := prod (("+" | "-") prod)*
//! prod   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" unary)?
//! atom   := number | name | name "(" expr ("," expr)* ")" | "(" expr ")" | "|" expr "|"
//! ```
//!
//! Comparisons evaluate to 1 or 0. Functions: `abs`, `sqrt`, `exp`, `ln`,
//! `sin`, `cos`, `sgn` (with `sgn(0) = 1`), `pos` (positive part), `ind`
//! (1 if the argument is ≥ 0), `min`, `max`. Constants: `pi`.

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("expression `{source_text}`: {message} at byte {offset}")]
pub struct ParseError {
    pub source_text: String,
    pub message: String,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Sgn,
    Pos,
    Ind,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "abs" => (Func::Abs, 1),
            "sqrt" => (Func::Sqrt, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "sgn" | "Sgn" => (Func::Sgn, 1),
            "pos" => (Func::Pos, 1),
            "ind" => (Func::Ind, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Bin {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(Bin, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression whose variables are bound to slots of a value slice.
#[derive(Clone, PartialEq)]
pub struct Expr {
    text: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.text)
    }
}

impl Expr {
    /// Parses `text`; `vars[k]` names slot `k` of the slice passed to [`Expr::eval`].
    pub fn parse(text: &str, vars: &[&str]) -> Result<Self, ParseError> {
        let tokens = tokenize(text)?;
        let mut p = Parser { text, tokens, pos: 0, vars };
        let root = p.expr()?;
        if let Some(tok) = p.tokens.get(p.pos) {
            return Err(p.error("unexpected trailing input", tok.offset));
        }
        Ok(Self { text: text.to_string(), root })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        eval(&self.root, values)
    }

    /// Whether slot `k` occurs anywhere in the expression.
    pub fn uses(&self, k: usize) -> bool {
        fn walk(n: &Node, k: usize) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(v) => *v == k,
                Node::Neg(a) => walk(a, k),
                Node::Bin(_, a, b) => walk(a, k) || walk(b, k),
                Node::Call(_, args) => args.iter().any(|a| walk(a, k)),
            }
        }
        walk(&self.root, k)
    }
}

fn eval(n: &Node, v: &[f64]) -> f64 {
    let truth = |b: bool| if b { 1.0 } else { 0.0 };
    match n {
        Node::Num(x) => *x,
        Node::Var(k) => v[*k],
        Node::Neg(a) => -eval(a, v),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match op {
                Bin::Add => a + b,
                Bin::Sub => a - b,
                Bin::Mul => a * b,
                Bin::Div => a / b,
                Bin::Pow => {
                    if b == b.round() && b.abs() <= 64.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
                Bin::Lt => truth(a < b),
                Bin::Le => truth(a <= b),
                Bin::Gt => truth(a > b),
                Bin::Ge => truth(a >= b),
                Bin::Eq => truth(a == b),
                Bin::Ne => truth(a != b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], v);
            match f {
                Func::Abs => a.abs(),
                Func::Sqrt => a.sqrt(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Sgn => {
                    if a >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Func::Pos => a.max(0.0),
                Func::Ind => truth(a >= 0.0),
                Func::Min => a.min(eval(&args[1], v)),
                Func::Max => a.max(eval(&args[1], v)),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

const OPS: [&str; 16] = ["<=", ">=", "==", "!=", "<", ">", "+", "-", "*", "/", "^", "(", ")", ",", "|", "="];

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let value = text[start..i].parse::<f64>().map_err(|_| ParseError {
                source_text: text.to_string(),
                message: format!("bad number `{}`", &text[start..i]),
                offset: start,
            })?;
            out.push(Token { tok: Tok::Num(value), offset: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(text[start..i].to_string()), offset: start });
            continue;
        }
        match OPS.iter().find(|op| text[i..].starts_with(*op)) {
            Some(&"=") => {
                return Err(ParseError {
                    source_text: text.to_string(),
                    message: "use `==` for equality".into(),
                    offset: i,
                })
            }
            Some(op) => {
                out.push(Token { tok: Tok::Op(op), offset: i });
                i += op.len();
            }
            None => {
                return Err(ParseError {
                    source_text: text.to_string(),
                    message: format!("unexpected character `{}`", text[i..].chars().next().unwrap_or('?')),
                    offset: i,
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>, offset: usize) -> ParseError {
        ParseError { source_text: self.text.to_string(), message: message.into(), offset }
    }

    fn end_offset(&self) -> usize {
        self.text.len()
    }

    fn peek_op(&self) -> Option<&'static str> {
        match self.tokens.get(self.pos) {
            Some(Token { tok: Tok::Op(op), .. }) => Some(op),
            _ => None,
        }
    }

    fn expect(&mut self, op: &str) -> Result<(), ParseError> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            let offset = self.tokens.get(self.pos).map_or(self.end_offset(), |t| t.offset);
            Err(self.error(format!("expected `{op}`"), offset))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let lhs = self.sum()?;
        let op = match self.peek_op() {
            Some("<") => Bin::Lt,
            Some("<=") => Bin::Le,
            Some(">") => Bin::Gt,
            Some(">=") => Bin::Ge,
            Some("==") => Bin::Eq,
            Some("!=") => Bin::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.sum()?;
        Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.prod()?;
        loop {
            let op = match self.peek_op() {
                Some("+") => Bin::Add,
                Some("-") => Bin::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.prod()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn prod(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_op() {
                Some("*") => Bin::Mul,
                Some("/") => Bin::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek_op() == Some("-") {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some("+") {
            self.pos += 1;
            return self.unary();
        }
        let base = self.atom()?;
        if self.peek_op() == Some("^") {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Bin::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some(token) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of input", self.end_offset()));
        };
        self.pos += 1;
        match token.tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op("(") => {
                let inner = self.expr()?;
                self.expect(")")?;
                Ok(inner)
            }
            Tok::Op("|") => {
                let inner = self.sum()?;
                self.expect("|")?;
                Ok(Node::Call(Func::Abs, vec![inner]))
            }
            Tok::Op(op) => Err(self.error(format!("unexpected `{op}`"), token.offset)),
            Tok::Ident(name) => {
                if self.peek_op() == Some("(") {
                    let Some((func, arity)) = Func::lookup(&name) else {
                        return Err(self.error(format!("unknown function `{name}`"), token.offset));
                    };
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(",") {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(")")?;
                    if args.len() != arity {
                        return Err(self.error(
                            format!("`{name}` takes {arity} argument(s), got {}", args.len()),
                            token.offset,
                        ));
                    }
                    return Ok(Node::Call(func, args));
                }
                if let Some(k) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(k));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                Err(self.error(
                    format!("unknown variable `{name}` (expected one of {})", self.vars.join(", ")),
                    token.offset,
                ))
            }
        }
    }
}
