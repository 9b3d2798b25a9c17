//! Text format for causal graphs.
//!
//! ```text
//! # comments run to end of line
//! graph example {
//!   node W role=covariate;
//!   node U latent;
//!   node A role=treatment;
//!   node Y role=outcome;
//!   edge W -> A;
//!   edge A -> Y;
//! }
//! ```
//!
//! Whitespace is insignificant. Node declarations must precede edge
//! declarations, matching the canonical rendering. Syntax errors report
//! 1-based line and column of the offending token.

use crate::error::{EngineError, Result};
use crate::graph::{CausalGraph, Node, Role};

/// Parse the graph DSL into a validated [`CausalGraph`].
pub fn parse_graph(text: &str) -> Result<CausalGraph> {
    let tokens = lex(text)?;
    Parser { tokens, pos: 0 }.graph()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LBrace,
    RBrace,
    Semi,
    Arrow,
    Equals,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Equals => "`=`".into(),
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
            '{' => {
                push!(Tok::LBrace, line, col);
                chars.next();
                col += 1;
            }
            '}' => {
                push!(Tok::RBrace, line, col);
                chars.next();
                col += 1;
            }
            ';' => {
                push!(Tok::Semi, line, col);
                chars.next();
                col += 1;
            }
            '=' => {
                push!(Tok::Equals, line, col);
                chars.next();
                col += 1;
            }
            '-' => {
                let (l, c) = (line, col);
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow, l, c);
                } else {
                    return Err(EngineError::GraphSyntax {
                        line: l,
                        col: c,
                        message: "expected `->`".into(),
                    });
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let (l, start) = (line, col);
                let mut id = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        id.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(id), l, start);
            }
            c => {
                return Err(EngineError::GraphSyntax {
                    line,
                    col,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn next(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, at: &Spanned, message: impl Into<String>) -> EngineError {
        EngineError::GraphSyntax { line: at.line, col: at.col, message: message.into() }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(()),
            other => Err(self.err(&t, format!("expected `{kw}`, found {}", other.describe()))),
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if !is_keyword(s) => Ok(s.clone()),
            other => Err(self.err(&t, format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn expect_tok(&mut self, tok: Tok) -> Result<()> {
        let t = self.next();
        if t.tok == tok {
            Ok(())
        } else {
            Err(self.err(&t, format!("expected {}, found {}", tok.describe(), t.tok.describe())))
        }
    }

    fn graph(&mut self) -> Result<CausalGraph> {
        self.expect_keyword("graph")?;
        let name = self.expect_ident("graph name")?;
        self.expect_tok(Tok::LBrace)?;

        let mut nodes: Vec<Node> = Vec::new();
        let mut edges: Vec<(String, String)> = Vec::new();
        let mut seen_edge = false;

        loop {
            let t = self.next();
            match &t.tok {
                Tok::RBrace => break,
                Tok::Ident(kw) if kw == "node" => {
                    if seen_edge {
                        return Err(self.err(&t, "node declarations must precede edge declarations"));
                    }
                    nodes.push(self.node_decl()?);
                }
                Tok::Ident(kw) if kw == "edge" => {
                    seen_edge = true;
                    let from = self.expect_ident("source node id")?;
                    self.expect_tok(Tok::Arrow)?;
                    let to = self.expect_ident("target node id")?;
                    self.expect_tok(Tok::Semi)?;
                    edges.push((from, to));
                }
                other => {
                    return Err(self.err(
                        &t,
                        format!("expected `node`, `edge`, or `}}`, found {}", other.describe()),
                    ));
                }
            }
        }

        let t = self.next();
        if t.tok != Tok::Eof {
            return Err(self.err(&t, format!("trailing input after `}}`: {}", t.tok.describe())));
        }

        CausalGraph::new(name, nodes, &edges)
    }

    /// `node <id> [role=<role>] [latent];` — the `node` keyword has
    /// already been consumed.
    fn node_decl(&mut self) -> Result<Node> {
        let id = self.expect_ident("node id")?;
        let mut role = Role::None;
        let mut latent = false;

        let t = self.next();
        match &t.tok {
            Tok::Semi => return Ok(Node::new(id, role, latent)),
            Tok::Ident(kw) if kw == "role" => {
                self.expect_tok(Tok::Equals)?;
                let rt = self.next();
                let rname = match &rt.tok {
                    Tok::Ident(s) => s.clone(),
                    other => {
                        return Err(self.err(&rt, format!("expected role name, found {}", other.describe())))
                    }
                };
                role = Role::parse(&rname).ok_or_else(|| {
                    self.err(
                        &rt,
                        format!("unknown role `{rname}`; expected covariate, treatment, censoring, outcome, or none"),
                    )
                })?;
                let t2 = self.next();
                match &t2.tok {
                    Tok::Semi => return Ok(Node::new(id, role, latent)),
                    Tok::Ident(kw) if kw == "latent" => {
                        latent = true;
                        self.expect_tok(Tok::Semi)?;
                        return Ok(Node::new(id, role, latent));
                    }
                    other => {
                        return Err(self.err(&t2, format!("expected `latent` or `;`, found {}", other.describe())))
                    }
                }
            }
            Tok::Ident(kw) if kw == "latent" => {
                latent = true;
                self.expect_tok(Tok::Semi)?;
                Ok(Node::new(id, role, latent))
            }
            other => Err(self.err(&t, format!("expected `role=`, `latent`, or `;`, found {}", other.describe()))),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "graph" | "node" | "edge" | "role" | "latent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::EngineError;

    #[test]
    fn parses_nodes_edges_roles_and_comments() {
        let text = "
            # a small confounded triangle
            graph triangle {
              node W role=covariate;
              node A role=treatment;   # exposure
              node Y role=outcome;
              edge W -> A;
              edge W -> Y;
              edge A -> Y;
            }";
        let g = parse_graph(text).unwrap();
        assert_eq!(g.name(), "triangle");
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.nodes()[0].role, Role::Covariate);
        assert!(g.treatment().is_some() && g.outcome().is_some());
    }

    #[test]
    fn six_node_censoring_structure_has_expected_shape() {
        // Two measured confounders, one latent confounder, treatment,
        // censoring, outcome: 6 nodes, 9 edges.
        let text = "
            graph study {
              node age role=covariate;
              node biomarker role=covariate;
              node U latent;
              node A role=treatment;
              node C role=censoring;
              node Y role=outcome;
              edge age -> A;
              edge age -> Y;
              edge biomarker -> A;
              edge biomarker -> Y;
              edge U -> A;
              edge U -> Y;
              edge A -> Y;
              edge A -> C;
              edge age -> C;
            }";
        let g = parse_graph(text).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (6, 9));
        assert!(g.nodes()[g.node_index("U").unwrap()].latent);
    }

    #[test]
    fn cycle_is_rejected_with_named_nodes() {
        let text = "graph g { node A; node Y; edge A -> Y; edge Y -> A; }";
        match parse_graph(text).unwrap_err() {
            EngineError::Cycle { path } => {
                assert!(path.contains(&"A".to_string()) && path.contains(&"Y".to_string()));
            }
            other => panic!("expected cycle error, got {other}"),
        }
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        // Missing `;` after the first node: the parser trips on `node`.
        let text = "graph g {\n  node A\n  node B;\n}";
        match parse_graph(text).unwrap_err() {
            EngineError::GraphSyntax { line, col, message } => {
                assert_eq!(line, 3, "{message}");
                assert_eq!(col, 3, "{message}");
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn unknown_edge_endpoint_is_rejected() {
        let text = "graph g { node A; edge A -> Y; }";
        match parse_graph(text).unwrap_err() {
            EngineError::UnknownNode { id, .. } => assert_eq!(id, "Y"),
            other => panic!("expected unknown-node error, got {other}"),
        }
    }

    #[test]
    fn node_after_edge_is_rejected() {
        let text = "graph g { node A; node B; edge A -> B; node D; }";
        let err = parse_graph(text).unwrap_err();
        assert!(matches!(err, EngineError::GraphSyntax { .. }), "{err}");
        assert!(err.to_string().contains("precede"), "{err}");
    }

    #[test]
    fn round_trips_through_canonical_render() {
        let text = "graph g { node W role=covariate; node U latent; node A role=treatment;
                    node C role=censoring; node Y role=outcome;
                    edge W -> A; edge U -> A; edge U -> Y; edge A -> C; edge A -> Y; }";
        let g = parse_graph(text).unwrap();
        let rendered = g.render();
        let g2 = parse_graph(&rendered).unwrap();
        assert_eq!(g, g2);
        // Rendering the reparse is byte-stable too.
        assert_eq!(rendered, g2.render());
    }
}
