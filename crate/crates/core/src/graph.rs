//! Two-layer IDNC graph.
//!
//! One vertex per (receiver, lacking packet) pair: primary when the packet is
//! wanted, secondary when it is not. Two vertices of different receivers are
//! adjacent when they miss the same packet (C1) or each one's packet is held
//! by the other's receiver (C2). Receivers whose Wants set is empty induce no
//! vertices at all.
//!
//! Vertices are stored in lexicographic (receiver, packet) order, so a vertex
//! index comparison is the tie-break order used throughout the crate.

use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Cell, FrameState};

/// Default vertex bound for maximal-clique enumeration.
pub const DEFAULT_ENUMERATION_BOUND: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Primary,
    Secondary,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Primary => "primary",
            Layer::Secondary => "secondary",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Vertex {
    pub receiver: usize,
    pub packet: usize,
    pub layer: Layer,
}

impl Vertex {
    pub fn primary(receiver: usize, packet: usize) -> Self {
        Self { receiver, packet, layer: Layer::Primary }
    }

    pub fn secondary(receiver: usize, packet: usize) -> Self {
        Self { receiver, packet, layer: Layer::Secondary }
    }
}

#[derive(Clone, Debug)]
pub struct IdncGraph {
    vertices: Vec<Vertex>,
    adjacency: Vec<FixedBitSet>,
    primary: FixedBitSet,
    secondary: FixedBitSet,
}

impl IdncGraph {
    /// Builds the graph of `state` in `O(V^2 / w + (M + N) V)` word operations.
    pub fn build(state: &FrameState) -> Self {
        let sfm = state.sfm();
        let (m, n) = (sfm.receivers(), sfm.packets());

        let mut vertices = Vec::new();
        let mut first_of = vec![0; m + 1];
        for i in 0..m {
            first_of[i] = vertices.len();
            if state.wants_sizes()[i] == 0 {
                continue;
            }
            for (j, cell) in sfm.row(i).iter().enumerate() {
                match cell {
                    Cell::Has => {}
                    Cell::Wants => vertices.push(Vertex::primary(i, j)),
                    Cell::Unwanted => vertices.push(Vertex::secondary(i, j)),
                }
            }
        }
        first_of[m] = vertices.len();
        let len = vertices.len();

        // has_mask[i]: vertices of other receivers whose packet i holds.
        // holders[j]: vertices whose receiver holds packet j.
        // missing[j]: vertices for packet j (the C1 class).
        let mut has_mask = vec![FixedBitSet::with_capacity(len); m];
        let mut holders = vec![FixedBitSet::with_capacity(len); n];
        let mut missing = vec![FixedBitSet::with_capacity(len); n];
        for (idx, v) in vertices.iter().enumerate() {
            missing[v.packet].insert(idx);
            for (i, mask) in has_mask.iter_mut().enumerate() {
                if i != v.receiver && state.has(i, v.packet) {
                    mask.insert(idx);
                }
            }
        }
        for k in 0..m {
            let (lo, hi) = (first_of[k], first_of[k + 1]);
            if lo == hi {
                continue;
            }
            for (j, holder) in holders.iter_mut().enumerate() {
                if state.has(k, j) {
                    holder.insert_range(lo..hi);
                }
            }
        }

        let adjacency = vertices
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let mut row = has_mask[v.receiver].clone();
                row.intersect_with(&holders[v.packet]);
                row.union_with(&missing[v.packet]);
                row.set(idx, false);
                row
            })
            .collect();

        Self::from_parts(vertices, adjacency)
    }

    fn from_parts(vertices: Vec<Vertex>, adjacency: Vec<FixedBitSet>) -> Self {
        let len = vertices.len();
        let mut primary = FixedBitSet::with_capacity(len);
        let mut secondary = FixedBitSet::with_capacity(len);
        for (idx, v) in vertices.iter().enumerate() {
            match v.layer {
                Layer::Primary => primary.insert(idx),
                Layer::Secondary => secondary.insert(idx),
            }
        }
        Self { vertices, adjacency, primary, secondary }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, idx: usize) -> Vertex {
        self.vertices[idx]
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.vertices
            .binary_search_by(|u| (u.receiver, u.packet).cmp(&(v.receiver, v.packet)))
            .ok()
            .filter(|&idx| self.vertices[idx].layer == v.layer)
    }

    pub fn neighbors(&self, idx: usize) -> &FixedBitSet {
        &self.adjacency[idx]
    }

    /// Adjacency rows, indexed like [`IdncGraph::vertices`].
    pub fn adjacency(&self) -> &[FixedBitSet] {
        &self.adjacency
    }

    pub fn primary_mask(&self) -> &FixedBitSet {
        &self.primary
    }

    pub fn secondary_mask(&self) -> &FixedBitSet {
        &self.secondary
    }

    pub fn primary_count(&self) -> usize {
        self.primary.count_ones(..)
    }

    #[inline]
    pub fn adjacent_idx(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].contains(v)
    }

    /// Adjacency indicator for two vertices; false when either is absent,
    /// when they coincide or when they share a receiver.
    pub fn adjacent(&self, u: &Vertex, v: &Vertex) -> bool {
        match (self.index_of(u), self.index_of(v)) {
            (Some(a), Some(b)) => self.adjacent_idx(a, b),
            _ => false,
        }
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].count_ones(..)
    }

    /// Number of neighbours in the vertex's own layer.
    pub fn layer_degree(&self, idx: usize) -> usize {
        let layer = match self.vertices[idx].layer {
            Layer::Primary => &self.primary,
            Layer::Secondary => &self.secondary,
        };
        self.adjacency[idx].intersection_count(layer)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|row| row.count_ones(..)).sum::<usize>() / 2
    }

    /// Edges of the primary layer only.
    pub fn primary_edge_count(&self) -> usize {
        self.primary.ones().map(|idx| self.adjacency[idx].intersection_count(&self.primary)).sum::<usize>() / 2
    }

    /// Vertices adjacent to every vertex in `members`.
    pub fn common_neighbors(&self, members: &[usize]) -> FixedBitSet {
        let mut common = FixedBitSet::with_capacity(self.len());
        common.insert_range(..);
        for &idx in members {
            common.intersect_with(&self.adjacency[idx]);
        }
        common
    }

    /// Secondary vertices adjacent to every vertex in `members`. Vertices of
    /// receivers already in `members` are excluded by construction.
    pub fn secondary_candidates(&self, members: &[usize]) -> FixedBitSet {
        let mut candidates = self.common_neighbors(members);
        candidates.intersect_with(&self.secondary);
        candidates
    }

    /// Induced subgraph on secondary vertices adjacent to every clique vertex.
    pub fn secondary_subgraph(&self, clique: &Clique) -> Result<IdncGraph> {
        let members = self.indices_of(clique)?;
        Ok(self.induced(&self.secondary_candidates(&members)))
    }

    /// Induced subgraph on `keep`, preserving vertex order.
    pub fn induced(&self, keep: &FixedBitSet) -> IdncGraph {
        let kept: Vec<usize> = keep.ones().collect();
        let vertices = kept.iter().map(|&idx| self.vertices[idx]).collect();
        let adjacency = kept
            .iter()
            .map(|&u| {
                let mut row = FixedBitSet::with_capacity(kept.len());
                for (new, &v) in kept.iter().enumerate() {
                    if self.adjacency[u].contains(v) {
                        row.insert(new);
                    }
                }
                row
            })
            .collect();
        IdncGraph::from_parts(vertices, adjacency)
    }

    pub fn indices_of(&self, clique: &Clique) -> Result<Vec<usize>> {
        clique
            .vertices()
            .iter()
            .map(|v| {
                self.index_of(v).ok_or_else(|| {
                    Error::Precondition(format!("vertex r{}:p{} is not in the graph", v.receiver, v.packet))
                })
            })
            .collect()
    }

    /// Wraps vertex indices as a [`Clique`], checking pairwise adjacency.
    pub fn clique(&self, members: &[usize]) -> Result<Clique> {
        for (a, &u) in members.iter().enumerate() {
            for &v in &members[a + 1..] {
                if !self.adjacent_idx(u, v) {
                    return Err(Error::NotAClique(u, v));
                }
            }
        }
        Ok(Clique::from_vertices(members.iter().map(|&idx| self.vertices[idx])))
    }

    /// All maximal cliques (Bron-Kerbosch with pivoting), in lexicographic
    /// order of their vertex index lists.
    pub fn enumerate_maximal_cliques(&self, bound: usize) -> Result<Vec<Clique>> {
        Ok(self
            .maximal_clique_indices(bound)?
            .into_iter()
            .map(|members| Clique::from_vertices(members.into_iter().map(|i| self.vertices[i])))
            .collect())
    }

    pub(crate) fn maximal_clique_indices(&self, bound: usize) -> Result<Vec<Vec<usize>>> {
        if self.len() > bound {
            return Err(Error::SizeBoundExceeded { size: self.len(), bound });
        }
        let mut out = Vec::new();
        let mut all = FixedBitSet::with_capacity(self.len());
        all.insert_range(..);
        let mut current = Vec::new();
        bron_kerbosch(&self.adjacency, &mut current, all, FixedBitSet::with_capacity(self.len()), &mut out);
        for clique in &mut out {
            clique.sort_unstable();
        }
        out.sort();
        Ok(out)
    }

    /// Adjacency-list dump, one line per vertex:
    /// `r<i>:p<j>:<layer> -> r<k>:p<l> ...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (idx, v) in self.vertices.iter().enumerate() {
            let _ = write!(out, "r{}:p{}:{} ->", v.receiver, v.packet, v.layer.as_str());
            for nb in self.adjacency[idx].ones() {
                let u = self.vertices[nb];
                let _ = write!(out, " r{}:p{}", u.receiver, u.packet);
            }
            out.push('\n');
        }
        out
    }
}

fn bron_kerbosch(
    adjacency: &[FixedBitSet],
    current: &mut Vec<usize>,
    mut candidates: FixedBitSet,
    mut excluded: FixedBitSet,
    out: &mut Vec<Vec<usize>>,
) {
    if candidates.is_clear() {
        if excluded.is_clear() {
            out.push(current.clone());
        }
        return;
    }
    let pivot = candidates
        .ones()
        .chain(excluded.ones())
        .max_by_key(|&u| (candidates.intersection_count(&adjacency[u]), std::cmp::Reverse(u)))
        .expect("candidates non-empty");
    let mut branch = candidates.clone();
    branch.difference_with(&adjacency[pivot]);
    for v in branch.ones() {
        let mut next_candidates = candidates.clone();
        next_candidates.intersect_with(&adjacency[v]);
        let mut next_excluded = excluded.clone();
        next_excluded.intersect_with(&adjacency[v]);
        current.push(v);
        bron_kerbosch(adjacency, current, next_candidates, next_excluded, out);
        current.pop();
        candidates.set(v, false);
        excluded.insert(v);
    }
}

pub fn build_graph(state: &FrameState) -> IdncGraph {
    IdncGraph::build(state)
}

/// A set of mutually adjacent vertices, at most one per receiver, and the
/// XOR packet it encodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Clique {
    vertices: Vec<Vertex>,
    targeted_primary: Vec<usize>,
    targeted_secondary: Vec<usize>,
    packets: Vec<usize>,
}

impl Clique {
    pub fn empty() -> Self {
        Self::from_vertices(std::iter::empty())
    }

    pub(crate) fn from_vertices(vertices: impl IntoIterator<Item = Vertex>) -> Self {
        let mut vertices: Vec<Vertex> = vertices.into_iter().collect();
        vertices.sort_unstable();
        let mut targeted_primary = Vec::new();
        let mut targeted_secondary = Vec::new();
        for v in &vertices {
            match v.layer {
                Layer::Primary => targeted_primary.push(v.receiver),
                Layer::Secondary => targeted_secondary.push(v.receiver),
            }
        }
        let mut packets: Vec<usize> = vertices.iter().map(|v| v.packet).collect();
        packets.sort_unstable();
        packets.dedup();
        Self { vertices, targeted_primary, targeted_secondary, packets }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Receivers targeted with a primary packet.
    pub fn targeted_primary(&self) -> &[usize] {
        &self.targeted_primary
    }

    /// Receivers targeted with a secondary packet.
    pub fn targeted_secondary(&self) -> &[usize] {
        &self.targeted_secondary
    }

    /// (receiver, packet) pairs this transmission would deliver.
    pub fn targets(&self) -> Vec<(usize, usize)> {
        self.vertices.iter().map(|v| (v.receiver, v.packet)).collect()
    }

    /// Sorted source packets XORed into the coded packet.
    pub fn packets(&self) -> &[usize] {
        &self.packets
    }

    /// Checks instant decodability against `state`: every targeted receiver
    /// lacks exactly one packet of the combination, and no receiver is
    /// targeted twice.
    pub fn check_decodable(&self, state: &FrameState) -> Result<()> {
        let mut seen = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            if seen.contains(&v.receiver) {
                return Err(Error::DuplicateTarget(v.receiver));
            }
            seen.push(v.receiver);
            let unknown = self.packets.iter().filter(|&&p| !state.has(v.receiver, p)).count();
            if unknown != 1 || state.has(v.receiver, v.packet) {
                return Err(Error::NotDecodable { receiver: v.receiver, unknown });
            }
        }
        Ok(())
    }
}

/// Packet set of the coded transmission for `clique`.
pub fn coded_packet(clique: &Clique) -> Vec<usize> {
    clique.packets().to_vec()
}
