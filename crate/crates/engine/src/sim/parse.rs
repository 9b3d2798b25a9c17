//! Text format for data-generating processes.
//!
//! ```text
//! # comments run to end of line
//! W ~ Bernoulli(0.5);
//! A ~ Bernoulli(expit(-0.4 + 0.8*W)) role=treatment;
//! Y ~ Bernoulli(expit(-1 + 1.0*A + 1.0*W)) role=outcome;
//! ```
//!
//! Statements are read top to bottom and define a DAG implicitly: a node
//! may reference only nodes declared before it. Every node is Bernoulli;
//! its parameter is either a constant in (0, 1) or `expit` of a linear
//! predictor whose terms are `coefficient*node` or
//! `coefficient*node*node` (pairwise interaction). The optional
//! `role=<r>` suffix marks treatment, censoring, and outcome nodes
//! (unannotated nodes default to `covariate`; `role=none` opts out).
//! Syntax errors report 1-based line and column.

use crate::error::{EngineError, Result};
use crate::graph::Role;
use crate::learn::expit;

/// One node of a data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpNode {
    pub name: String,
    pub role: Role,
    pub dist: Distribution,
}

/// Bernoulli parameter: a constant or a logistic link over earlier nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Constant(f64),
    Logistic { intercept: f64, terms: Vec<Term> },
}

/// One signed term of a linear predictor. Node references are indices
/// into the DGP's node list (always earlier nodes, by construction).
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    pub nodes: TermNodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermNodes {
    Single(usize),
    Product(usize, usize),
}

/// A parsed, validated data-generating process.
///
/// Invariants: node names unique; references point backwards only; at
/// most one node each with the treatment, censoring, and outcome roles;
/// constant parameters lie strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    nodes: Vec<DgpNode>,
}

impl DgpSpec {
    pub fn nodes(&self) -> &[DgpNode] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Index of the unique node with `role`, if any.
    pub fn role_index(&self, role: Role) -> Option<usize> {
        self.nodes.iter().position(|n| n.role == role)
    }

    /// Like [`DgpSpec::role_index`] but an error when absent.
    pub fn require_role(&self, role: Role) -> Result<usize> {
        self.role_index(role).ok_or_else(|| EngineError::DgpMissingRole { role: role.as_str().into() })
    }

    /// Bernoulli parameter of node `ix` given values for all earlier
    /// nodes (`values[j]` is node j's realized value).
    pub fn probability(&self, ix: usize, values: &[f64]) -> f64 {
        match &self.nodes[ix].dist {
            Distribution::Constant(p) => *p,
            Distribution::Logistic { .. } => {
                expit(self.linear_predictor(ix, values).expect("logistic node"))
            }
        }
    }

    /// Bernoulli parameter of node `ix` with an additive shift on the
    /// logit scale (the hybrid design's external-source drift). `None`
    /// when the node's parameter is a constant — there is no logit scale
    /// to shift.
    pub fn shifted_probability(&self, ix: usize, values: &[f64], shift: f64) -> Option<f64> {
        self.linear_predictor(ix, values).map(|lp| expit(lp + shift))
    }

    fn linear_predictor(&self, ix: usize, values: &[f64]) -> Option<f64> {
        match &self.nodes[ix].dist {
            Distribution::Constant(_) => None,
            Distribution::Logistic { intercept, terms } => {
                let mut lp = *intercept;
                for t in terms {
                    let x = match t.nodes {
                        TermNodes::Single(i) => values[i],
                        TermNodes::Product(i, j) => values[i] * values[j],
                    };
                    lp += t.coefficient * x;
                }
                Some(lp)
            }
        }
    }
}

/// Parse the DGP DSL into a validated [`DgpSpec`].
pub fn parse_dgp(text: &str) -> Result<DgpSpec> {
    let tokens = lex(text)?;
    Parser { tokens, pos: 0 }.dgp()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Tilde,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Equals,
    Semi,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(v) => format!("`{v}`"),
            Tok::Tilde => "`~`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Star => "`*`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();

    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            out.push(Spanned { tok: $tok, line: $l, col: $c })
        };
    }

    while let Some(&ch) = chars.peek() {
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '~' => {
                push!(Tok::Tilde, line, col);
                chars.next();
                col += 1;
            }
            '(' => {
                push!(Tok::LParen, line, col);
                chars.next();
                col += 1;
            }
            ')' => {
                push!(Tok::RParen, line, col);
                chars.next();
                col += 1;
            }
            '*' => {
                push!(Tok::Star, line, col);
                chars.next();
                col += 1;
            }
            '+' => {
                push!(Tok::Plus, line, col);
                chars.next();
                col += 1;
            }
            '-' => {
                push!(Tok::Minus, line, col);
                chars.next();
                col += 1;
            }
            '=' => {
                push!(Tok::Equals, line, col);
                chars.next();
                col += 1;
            }
            ';' => {
                push!(Tok::Semi, line, col);
                chars.next();
                col += 1;
            }
            c if c.is_ascii_digit() => {
                let (start_line, start_col) = (line, col);
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() || c == '.' {
                        text.push(c);
                        chars.next();
                        col += 1;
                    } else if c == 'e' || c == 'E' {
                        // Exponent: consume `e`, an optional sign, digits.
                        text.push(c);
                        chars.next();
                        col += 1;
                        if let Some(&s) = chars.peek() {
                            if s == '+' || s == '-' {
                                text.push(s);
                                chars.next();
                                col += 1;
                            }
                        }
                    } else {
                        break;
                    }
                }
                let value: f64 = text.parse().map_err(|_| EngineError::DgpSyntax {
                    line: start_line,
                    col: start_col,
                    message: format!("cannot parse `{text}` as a number"),
                })?;
                push!(Tok::Number(value), start_line, start_col);
            }
            c if c.is_alphanumeric() || c == '_' => {
                let (start_line, start_col) = (line, col);
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(ident), start_line, start_col);
            }
            c => {
                return Err(EngineError::DgpSyntax {
                    line,
                    col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    push!(Tok::Eof, line, col);
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, at: &Spanned, message: String) -> EngineError {
        EngineError::DgpSyntax { line: at.line, col: at.col, message }
    }

    fn expect(&mut self, tok: Tok) -> Result<Spanned> {
        let t = self.next();
        if t.tok == tok {
            Ok(t)
        } else {
            Err(self.err(&t, format!("expected {}, found {}", tok.describe(), t.tok.describe())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Spanned)> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => Err(self.err(&t, format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        let (s, t) = self.ident(&format!("`{word}`"))?;
        if s == word {
            Ok(())
        } else {
            Err(self.err(&t, format!("expected `{word}`, found `{s}`")))
        }
    }

    /// A number with an optional leading sign.
    fn signed_number(&mut self) -> Result<f64> {
        let mut sign = 1.0;
        if self.peek().tok == Tok::Minus {
            self.next();
            sign = -1.0;
        } else if self.peek().tok == Tok::Plus {
            self.next();
        }
        let t = self.next();
        match &t.tok {
            Tok::Number(v) => Ok(sign * v),
            other => Err(self.err(&t, format!("expected a number, found {}", other.describe()))),
        }
    }

    fn dgp(&mut self) -> Result<DgpSpec> {
        let mut nodes: Vec<DgpNode> = Vec::new();
        while self.peek().tok != Tok::Eof {
            let node = self.statement(&nodes)?;
            if nodes.iter().any(|n| n.name == node.name) {
                return Err(EngineError::DuplicateNode { id: node.name });
            }
            nodes.push(node);
        }

        // At most one node per special role.
        for role in [Role::Treatment, Role::Censoring, Role::Outcome] {
            let ids: Vec<String> =
                nodes.iter().filter(|n| n.role == role).map(|n| n.name.clone()).collect();
            if ids.len() > 1 {
                return Err(EngineError::RoleCardinality { role: role.as_str().into(), ids });
            }
        }
        Ok(DgpSpec { nodes })
    }

    fn statement(&mut self, earlier: &[DgpNode]) -> Result<DgpNode> {
        let (name, name_tok) = self.ident("a node name")?;
        self.expect(Tok::Tilde)?;
        self.keyword("Bernoulli")?;
        self.expect(Tok::LParen)?;

        let dist = if matches!(self.peek().tok, Tok::Ident(_)) {
            self.keyword("expit")?;
            self.expect(Tok::LParen)?;
            let intercept = self.signed_number()?;
            let mut terms = Vec::new();
            loop {
                let sign = match self.peek().tok {
                    Tok::Plus => 1.0,
                    Tok::Minus => -1.0,
                    _ => break,
                };
                self.next();
                terms.push(self.term(sign, &name, earlier)?);
            }
            self.expect(Tok::RParen)?;
            Distribution::Logistic { intercept, terms }
        } else {
            let p = self.signed_number()?;
            if !(p > 0.0 && p < 1.0) {
                return Err(EngineError::ProbabilityOutOfRange { name: name.clone(), value: p });
            }
            Distribution::Constant(p)
        };
        self.expect(Tok::RParen)?;

        // Optional `role=<r>` suffix; default covariate.
        let mut role = Role::Covariate;
        if matches!(&self.peek().tok, Tok::Ident(s) if s == "role") {
            self.next();
            self.expect(Tok::Equals)?;
            let (role_name, role_tok) = self.ident("a role name")?;
            role = Role::parse(&role_name)
                .ok_or(EngineError::UnknownDgpRole { role: role_name, line: role_tok.line })?;
        }
        self.expect(Tok::Semi)?;

        let _ = name_tok;
        Ok(DgpNode { name, role, dist })
    }

    /// `coefficient*node` or `coefficient*node*node`, sign already consumed.
    fn term(&mut self, sign: f64, defining: &str, earlier: &[DgpNode]) -> Result<Term> {
        let t = self.next();
        let coefficient = match &t.tok {
            Tok::Number(v) => sign * v,
            other => {
                return Err(
                    self.err(&t, format!("expected a coefficient, found {}", other.describe()))
                )
            }
        };
        self.expect(Tok::Star)?;
        let first = self.node_ref(defining, earlier)?;
        let nodes = if self.peek().tok == Tok::Star {
            self.next();
            let second = self.node_ref(defining, earlier)?;
            if self.peek().tok == Tok::Star {
                let t = self.next();
                return Err(self.err(&t, "terms are a node or a pairwise product of nodes".into()));
            }
            TermNodes::Product(first, second)
        } else {
            TermNodes::Single(first)
        };
        Ok(Term { coefficient, nodes })
    }

    fn node_ref(&mut self, defining: &str, earlier: &[DgpNode]) -> Result<usize> {
        let (referenced, tok) = self.ident("a node name")?;
        earlier.iter().position(|n| n.name == referenced).ok_or(EngineError::ForwardReference {
            name: defining.to_string(),
            referenced,
            line: tok.line,
        })
    }
}
