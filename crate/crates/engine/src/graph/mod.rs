//! Causal model layer: a directed acyclic graph with node roles.
//!
//! Nodes carry a role (covariate, treatment, censoring, outcome, or none)
//! and a latent flag. The graph is the single source of truth for the
//! structural assumptions a study makes; identification queries
//! ([`d_separated`], [`find_adjustment_sets`]) and the text format
//! ([`parse_graph`], [`CausalGraph::render`]) all live here.
//!
//! Right-censoring is modeled as an ordinary node with role `censoring`;
//! identification treats "remain uncensored" as a second intervention, so
//! censoring queries run on the graph with the censoring node's outgoing
//! edges removed, mirroring the backdoor check that removes the treatment
//! node's outgoing edges.

mod adjust;
mod dsep;
mod parse;

pub use adjust::{find_adjustment_sets, POOL_CAP};
pub use dsep::{d_separated, ArrowDir, DSeparation, PathWitness};
pub use parse::parse_graph;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

/// Structural role a node plays in the study design.
///
/// At most one node each may carry `Treatment`, `Censoring`, and `Outcome`;
/// single time-point designs have exactly one of each decision point, and
/// multi-role graphs are rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Covariate,
    Treatment,
    Censoring,
    Outcome,
    None,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Covariate => "covariate",
            Role::Treatment => "treatment",
            Role::Censoring => "censoring",
            Role::Outcome => "outcome",
            Role::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "covariate" => Some(Role::Covariate),
            "treatment" => Some(Role::Treatment),
            "censoring" => Some(Role::Censoring),
            "outcome" => Some(Role::Outcome),
            "none" => Some(Role::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: Role,
    /// Latent nodes participate in paths but are unmeasured, so they are
    /// never eligible for adjustment sets.
    pub latent: bool,
}

impl Node {
    pub fn new(id: impl Into<String>, role: Role, latent: bool) -> Node {
        Node { id: id.into(), role, latent }
    }
}

/// A validated DAG. Construction enforces every structural invariant:
/// unique node ids, declared endpoints, no self-loops or duplicate edges,
/// acyclicity, at most one treatment/censoring/outcome, and no latent node
/// carrying one of those roles.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalGraph {
    name: String,
    nodes: Vec<Node>,
    /// Edges as (from, to) node indices, in declaration order.
    edges: Vec<(usize, usize)>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
}

impl CausalGraph {
    /// Build and validate a graph. Edges reference nodes by id.
    pub fn new(
        name: impl Into<String>,
        nodes: Vec<Node>,
        edges: &[(String, String)],
    ) -> Result<CausalGraph> {
        let name = name.into();

        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].iter().any(|m| m.id == n.id) {
                return Err(EngineError::DuplicateNode { id: n.id.clone() });
            }
        }
        for role in [Role::Treatment, Role::Censoring, Role::Outcome] {
            let ids: Vec<String> = nodes
                .iter()
                .filter(|n| n.role == role)
                .map(|n| n.id.clone())
                .collect();
            if ids.len() > 1 {
                return Err(EngineError::RoleCardinality { role: role.as_str().into(), ids });
            }
            if let Some(n) = nodes.iter().find(|n| n.role == role && n.latent) {
                return Err(EngineError::LatentSpecialRole {
                    id: n.id.clone(),
                    role: role.as_str().into(),
                });
            }
        }

        let index_of = |id: &str| nodes.iter().position(|n| n.id == id);
        let mut edge_ix = Vec::with_capacity(edges.len());
        for (from, to) in edges {
            let f = index_of(from).ok_or_else(|| EngineError::UnknownNode {
                id: from.clone(),
                context: format!("edge `{from} -> {to}`"),
            })?;
            let t = index_of(to).ok_or_else(|| EngineError::UnknownNode {
                id: to.clone(),
                context: format!("edge `{from} -> {to}`"),
            })?;
            if f == t {
                return Err(EngineError::SelfLoop { id: from.clone() });
            }
            if edge_ix.contains(&(f, t)) {
                return Err(EngineError::DuplicateEdge { from: from.clone(), to: to.clone() });
            }
            edge_ix.push((f, t));
        }

        let mut children = vec![Vec::new(); nodes.len()];
        let mut parents = vec![Vec::new(); nodes.len()];
        for &(f, t) in &edge_ix {
            children[f].push(t);
            parents[t].push(f);
        }

        let g = CausalGraph { name, nodes, edges: edge_ix, children, parents };
        if let Some(cycle) = g.find_cycle() {
            return Err(EngineError::Cycle { path: cycle.iter().map(|&i| g.nodes[i].id.clone()).collect() });
        }
        Ok(g)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node_id(&self, ix: usize) -> &str {
        &self.nodes[ix].id
    }

    pub fn children_of(&self, ix: usize) -> &[usize] {
        &self.children[ix]
    }

    pub fn parents_of(&self, ix: usize) -> &[usize] {
        &self.parents[ix]
    }

    fn role_index(&self, role: Role) -> Option<usize> {
        self.nodes.iter().position(|n| n.role == role)
    }

    pub fn treatment(&self) -> Option<usize> {
        self.role_index(Role::Treatment)
    }

    pub fn outcome(&self) -> Option<usize> {
        self.role_index(Role::Outcome)
    }

    pub fn censoring(&self) -> Option<usize> {
        self.role_index(Role::Censoring)
    }

    /// Descendant indicator for `ix`, including `ix` itself.
    pub fn descendants(&self, ix: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![ix];
        seen[ix] = true;
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Copy of the graph with every edge out of `ix` removed. Used for the
    /// backdoor check (treatment) and the censoring check.
    pub fn without_outgoing(&self, ix: usize) -> CausalGraph {
        let edges: Vec<(usize, usize)> = self.edges.iter().copied().filter(|&(f, _)| f != ix).collect();
        let mut children = vec![Vec::new(); self.nodes.len()];
        let mut parents = vec![Vec::new(); self.nodes.len()];
        for &(f, t) in &edges {
            children[f].push(t);
            parents[t].push(f);
        }
        CausalGraph { name: self.name.clone(), nodes: self.nodes.clone(), edges, children, parents }
    }

    /// One directed cycle as a node-index path `v0 -> … -> v0`, or `None`
    /// for a DAG. Only used during validation.
    fn find_cycle(&self) -> Option<Vec<usize>> {
        // Colors: 0 unvisited, 1 on stack, 2 done. Iterative DFS keeping an
        // explicit path so the reported cycle names real nodes in order.
        let n = self.nodes.len();
        let mut color = vec![0u8; n];
        for start in 0..n {
            if color[start] != 0 {
                continue;
            }
            let mut path: Vec<usize> = Vec::new();
            // (node, next child position to try)
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            color[start] = 1;
            path.push(start);
            while let Some(&mut (v, ref mut ci)) = stack.last_mut() {
                if *ci < self.children[v].len() {
                    let c = self.children[v][*ci];
                    *ci += 1;
                    match color[c] {
                        0 => {
                            color[c] = 1;
                            path.push(c);
                            stack.push((c, 0));
                        }
                        1 => {
                            let pos = path.iter().position(|&p| p == c).unwrap();
                            let mut cycle: Vec<usize> = path[pos..].to_vec();
                            cycle.push(c);
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    color[v] = 2;
                    stack.pop();
                    path.pop();
                }
            }
        }
        None
    }

    /// Canonical text form: node declarations first (declaration order),
    /// then edges, one statement per line. `parse_graph(render(g)) == g`.
    pub fn render(&self) -> String {
        let mut out = format!("graph {} {{\n", self.name);
        for n in &self.nodes {
            out.push_str("  node ");
            out.push_str(&n.id);
            if n.role != Role::None {
                out.push_str(" role=");
                out.push_str(n.role.as_str());
            }
            if n.latent {
                out.push_str(" latent");
            }
            out.push_str(";\n");
        }
        for &(f, t) in &self.edges {
            out.push_str(&format!("  edge {} -> {};\n", self.nodes[f].id, self.nodes[t].id));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(id: &str) -> Node {
        Node::new(id, Role::None, false)
    }

    fn e(from: &str, to: &str) -> (String, String) {
        (from.into(), to.into())
    }

    #[test]
    fn rejects_duplicate_nodes() {
        let err = CausalGraph::new("g", vec![n("A"), n("A")], &[]).unwrap_err();
        assert!(matches!(err, EngineError::DuplicateNode { .. }), "{err}");
    }

    #[test]
    fn rejects_duplicate_edges_and_self_loops() {
        let err = CausalGraph::new("g", vec![n("A"), n("B")], &[e("A", "B"), e("A", "B")]).unwrap_err();
        assert!(matches!(err, EngineError::DuplicateEdge { .. }), "{err}");
        let err = CausalGraph::new("g", vec![n("A")], &[e("A", "A")]).unwrap_err();
        assert!(matches!(err, EngineError::SelfLoop { .. }), "{err}");
    }

    #[test]
    fn cycle_error_names_the_cycle() {
        let err = CausalGraph::new(
            "g",
            vec![n("A"), n("B"), n("C")],
            &[e("A", "B"), e("B", "C"), e("C", "A")],
        )
        .unwrap_err();
        match err {
            EngineError::Cycle { path } => {
                assert_eq!(path.first(), path.last());
                assert!(path.len() == 4, "cycle path should list A->B->C->A, got {path:?}");
            }
            other => panic!("expected cycle error, got {other}"),
        }
    }

    #[test]
    fn at_most_one_node_per_special_role() {
        let nodes = vec![
            Node::new("A1", Role::Treatment, false),
            Node::new("A2", Role::Treatment, false),
        ];
        let err = CausalGraph::new("g", nodes, &[]).unwrap_err();
        assert!(matches!(err, EngineError::RoleCardinality { .. }), "{err}");
    }

    #[test]
    fn latent_node_cannot_be_treatment() {
        let nodes = vec![Node::new("A", Role::Treatment, true)];
        let err = CausalGraph::new("g", nodes, &[]).unwrap_err();
        assert!(matches!(err, EngineError::LatentSpecialRole { .. }), "{err}");
    }

    #[test]
    fn descendants_include_self_and_follow_edges() {
        let g = CausalGraph::new(
            "g",
            vec![n("W"), n("A"), n("M"), n("Y")],
            &[e("W", "A"), e("A", "M"), e("M", "Y")],
        )
        .unwrap();
        let a = g.node_index("A").unwrap();
        let d = g.descendants(a);
        let ids: Vec<&str> =
            (0..g.node_count()).filter(|&i| d[i]).map(|i| g.node_id(i)).collect();
        assert_eq!(ids, vec!["A", "M", "Y"]);
    }

    #[test]
    fn without_outgoing_drops_only_that_nodes_edges() {
        let g = CausalGraph::new(
            "g",
            vec![n("W"), n("A"), n("Y")],
            &[e("W", "A"), e("A", "Y"), e("W", "Y")],
        )
        .unwrap();
        let a = g.node_index("A").unwrap();
        let h = g.without_outgoing(a);
        assert_eq!(h.edge_count(), 2);
        assert!(h.edges().iter().all(|&(f, _)| f != a));
    }
}
