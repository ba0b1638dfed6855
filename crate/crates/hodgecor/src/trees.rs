//! Plane trivalent trees with cyclically ordered external legs, edge
//! indexing and orientation-torsor signs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("a plane trivalent tree needs at least 3 legs, got {0}")]
    TooFewLegs(usize),
}

/// A plane trivalent tree with m+1 external legs in cyclic order.
///
/// Edges are indexed with the m−2 internal edges first, then the m+1
/// external edges in leg order. Each internal vertex stores its three
/// incident edges in clockwise order. `orientation_sign` relates the wedge
/// of edges in storage order to the canonical clockwise generator of the
/// orientation torsor (depth-first walk from leg 0, turning clockwise).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneTree {
    pub num_legs: usize,
    /// vertices[v] = clockwise triple of edge ids at internal vertex v.
    pub vertices: Vec<[usize; 3]>,
    /// edge_vertices[e] = incident internal vertices (one for external edges).
    pub edge_vertices: Vec<(usize, Option<usize>)>,
    pub orientation_sign: i64,
}

impl PlaneTree {
    pub fn num_internal_edges(&self) -> usize {
        self.num_legs - 3
    }

    pub fn num_edges(&self) -> usize {
        2 * self.num_legs - 3
    }

    pub fn leg_edge(&self, leg: usize) -> usize {
        self.num_internal_edges() + leg
    }

    pub fn internal_edge_ends(&self, e: usize) -> (usize, usize) {
        let (a, b) = self.edge_vertices[e];
        (a, b.expect("internal edge has two ends"))
    }

    pub fn leg_vertex(&self, leg: usize) -> usize {
        self.edge_vertices[self.leg_edge(leg)].0
    }
}

/// Binary-tree shape over a leaf interval; `Node(split)` divides [lo, hi).
#[derive(Clone, Debug)]
enum Shape {
    Leaf(usize),
    Node(Box<Shape>, Box<Shape>),
}

fn shapes(lo: usize, hi: usize) -> Vec<Shape> {
    if hi - lo == 1 {
        return vec![Shape::Leaf(lo)];
    }
    let mut out = Vec::new();
    for mid in lo + 1..hi {
        for l in shapes(lo, mid) {
            for r in shapes(mid, hi) {
                out.push(Shape::Node(Box::new(l.clone()), Box::new(r)));
            }
        }
    }
    out
}

struct Assembler {
    num_legs: usize,
    vertices: Vec<[usize; 3]>,
    edge_vertices: Vec<(usize, Option<usize>)>,
    next_internal: usize,
}

impl Assembler {
    /// Builds the subtree for `shape`, returns the edge id pointing up.
    /// External edges already have fixed ids; internal ones are allocated
    /// here in depth-first order.
    fn build(&mut self, shape: &Shape) -> usize {
        match shape {
            Shape::Leaf(leg) => (self.num_legs - 3) + leg,
            Shape::Node(l, r) => {
                let v = self.vertices.len();
                self.vertices.push([usize::MAX; 3]);
                let up = self.next_internal;
                self.next_internal += 1;
                let le = self.build(l);
                let re = self.build(r);
                self.attach(le, v);
                self.attach(re, v);
                self.edge_vertices[up].0 = v;
                self.vertices[v] = [up, le, re];
                up
            }
        }
    }

    fn attach(&mut self, edge: usize, vertex: usize) {
        if edge < self.num_legs - 3 {
            self.edge_vertices[edge].1 = Some(vertex);
        } else {
            self.edge_vertices[edge].0 = vertex;
        }
    }
}

fn assemble(num_legs: usize, shape: &Shape) -> PlaneTree {
    let num_edges = 2 * num_legs - 3;
    let mut asm = Assembler {
        num_legs,
        vertices: Vec::with_capacity(num_legs - 2),
        edge_vertices: vec![(usize::MAX, None); num_edges],
        next_internal: 0,
    };
    // root vertex carries leg 0 and the two halves of the shape
    let (l, r) = match shape {
        Shape::Node(l, r) => (l, r),
        Shape::Leaf(_) => unreachable!("num_legs ≥ 3"),
    };
    let v = asm.vertices.len();
    asm.vertices.push([usize::MAX; 3]);
    let le = asm.build(l);
    let re = asm.build(r);
    asm.attach(le, v);
    asm.attach(re, v);
    let leg0 = (num_legs - 3) + 0;
    asm.edge_vertices[leg0].0 = v;
    asm.vertices[v] = [leg0, le, re];
    debug_assert_eq!(asm.next_internal, num_legs - 3);

    let mut tree = PlaneTree {
        num_legs,
        vertices: asm.vertices,
        edge_vertices: asm.edge_vertices,
        orientation_sign: 1,
    };
    tree.orientation_sign = permutation_sign(&canonical_edge_walk(&tree));
    tree
}

/// First-visit edge order of the clockwise depth-first walk from leg 0.
fn canonical_edge_walk(tree: &PlaneTree) -> Vec<usize> {
    let mut order = Vec::with_capacity(tree.num_edges());
    let leg0 = tree.leg_edge(0);
    order.push(leg0);
    walk(tree, tree.edge_vertices[leg0].0, leg0, &mut order);
    order
}

fn walk(tree: &PlaneTree, v: usize, entered_by: usize, order: &mut Vec<usize>) {
    let edges = tree.vertices[v];
    let k = edges.iter().position(|&e| e == entered_by).expect("incident");
    for step in 1..3 {
        let e = edges[(k + step) % 3];
        order.push(e);
        let (a, b) = tree.edge_vertices[e];
        match b {
            None => {}
            Some(b) => {
                let next = if a == v { b } else { a };
                walk(tree, next, e, order);
            }
        }
    }
}

/// Sign of a sequence that uses each of 0..len exactly once.
pub fn permutation_sign(perm: &[usize]) -> i64 {
    let mut sign = 1i64;
    let mut seen = vec![false; perm.len()];
    for i in 0..perm.len() {
        if seen[i] {
            continue;
        }
        let mut cycle = 0usize;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            cycle += 1;
        }
        if cycle % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// All plane trivalent trees with the fixed cyclic leg order, each exactly
/// once, in a deterministic order (Catalan(num_legs−2) many).
pub fn enumerate_trees(num_legs: usize) -> Result<Vec<PlaneTree>, TreeError> {
    if num_legs < 3 {
        return Err(TreeError::TooFewLegs(num_legs));
    }
    let m = num_legs - 1;
    Ok(shapes(1, m + 1).iter().map(|s| assemble(num_legs, s)).collect())
}

/// Sign of the wedge E_{σ(0)}∧…∧E_{σ(last)} against the canonical clockwise
/// generator; `edge_order` must be a permutation of all edges.
pub fn orientation_sign(tree: &PlaneTree, edge_order: &[usize]) -> i64 {
    assert_eq!(edge_order.len(), tree.num_edges());
    tree.orientation_sign * permutation_sign(edge_order)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent count: plane trivalent trees with k legs correspond to
    /// triangulations of a convex k-gon fan, counted by a Catalan recursion
    /// computed here without the tree machinery.
    fn catalan(n: usize) -> usize {
        let mut c = vec![0usize; n + 1];
        c[0] = 1;
        for i in 1..=n {
            for j in 0..i {
                c[i] += c[j] * c[i - 1 - j];
            }
        }
        c[n]
    }

    #[test]
    fn counts_match_catalan() {
        for legs in 3..=12 {
            let trees = enumerate_trees(legs).unwrap();
            assert_eq!(trees.len(), catalan(legs - 2), "legs={legs}");
            // no duplicates
            let mut seen = std::collections::HashSet::new();
            for t in &trees {
                assert!(seen.insert(format!("{:?}", (&t.vertices, &t.edge_vertices))));
            }
        }
        assert!(matches!(enumerate_trees(2), Err(TreeError::TooFewLegs(2))));
    }

    #[test]
    fn structure_invariants() {
        for legs in 3..=8 {
            for t in enumerate_trees(legs).unwrap() {
                assert_eq!(t.vertices.len(), legs - 2);
                assert_eq!(t.num_edges(), 2 * legs - 3);
                // each internal vertex is trivalent with distinct edges
                for v in &t.vertices {
                    assert!(v[0] != v[1] && v[1] != v[2] && v[0] != v[2]);
                }
                // internal edges have two distinct ends
                for e in 0..t.num_internal_edges() {
                    let (a, b) = t.internal_edge_ends(e);
                    assert_ne!(a, b);
                }
                // external legs appear in cyclic boundary order: the walk from
                // leg 0 encounters legs 1, 2, … in order
                let walk = super::canonical_edge_walk(&t);
                let legs_in_walk: Vec<usize> = walk
                    .iter()
                    .filter(|&&e| e >= t.num_internal_edges())
                    .map(|&e| e - t.num_internal_edges())
                    .collect();
                let expect: Vec<usize> = (0..legs).collect();
                assert_eq!(legs_in_walk, expect);
            }
        }
    }

    #[test]
    fn orientation_sign_axioms() {
        let trees = enumerate_trees(6).unwrap();
        let t = &trees[3];
        let canonical: Vec<usize> = super::canonical_edge_walk(t);
        assert_eq!(orientation_sign(t, &canonical), 1);
        // one transposition flips the sign
        let mut swapped = canonical.clone();
        swapped.swap(2, 5);
        assert_eq!(orientation_sign(t, &swapped), -1);
        // full reversal of the 2m−1 edges
        let mut reversed = canonical.clone();
        reversed.reverse();
        let e = t.num_edges();
        let expected = if (e * (e - 1) / 2) % 2 == 0 { 1 } else { -1 };
        assert_eq!(orientation_sign(t, &reversed), expected);
    }

    #[test]
    fn serialization_round_trip() {
        let trees = enumerate_trees(5).unwrap();
        let json = serde_json::to_string(&trees).unwrap();
        let back: Vec<PlaneTree> = serde_json::from_str(&json).unwrap();
        assert_eq!(trees, back);
        // enumeration is stable across runs
        let again = enumerate_trees(5).unwrap();
        assert_eq!(trees, again);
    }

    #[test]
    fn three_leg_tree_is_canonical() {
        let t = &enumerate_trees(3).unwrap()[0];
        assert_eq!(t.vertices.len(), 1);
        assert_eq!(t.num_internal_edges(), 0);
        assert_eq!(t.orientation_sign, 1);
        assert_eq!(t.vertices[0], [0, 1, 2]);
    }
}
