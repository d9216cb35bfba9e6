//! Clique selection policies and the perfect-RNC broadcast baseline.
//!
//! Every clique policy works in two stages: a clique of the primary layer,
//! then a clique of the secondary vertices adjacent to all of it. The union
//! is a maximal clique of the whole graph.

use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::Serialize;

use crate::clique_search::{max_weight_clique, SearchLimits, WeightedClique};
use crate::error::{Error, Result};
use crate::graph::{Clique, IdncGraph, Layer};
use crate::model::FrameState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PolicyKind {
    /// `rnd`: random maximal clique.
    Random,
    /// `mc`: exact maximum-cardinality clique.
    MaxClique,
    /// `mc-heur`: vertex search weighted by layer degree.
    MaxCliqueHeuristic,
    /// `mwcs:n=<k>`: exact maximum-weight clique under `(psi_i / q_i)^n`.
    MaxWeightClique { n: u32 },
    /// `mwvs:n=<k>`: greedy maximum-weight vertex search.
    MaxWeightVertexSearch { n: u32 },
    /// `rnc`: perfect random network coding, broadcast only.
    PerfectRnc,
}

impl PolicyKind {
    pub fn is_clique_policy(self) -> bool {
        self != PolicyKind::PerfectRnc
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Random => f.write_str("rnd"),
            PolicyKind::MaxClique => f.write_str("mc"),
            PolicyKind::MaxCliqueHeuristic => f.write_str("mc-heur"),
            PolicyKind::MaxWeightClique { n } => write!(f, "mwcs:n={n}"),
            PolicyKind::MaxWeightVertexSearch { n } => write!(f, "mwvs:n={n}"),
            PolicyKind::PerfectRnc => f.write_str("rnc"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let norm = |rest: &str| -> Result<u32> {
            rest.strip_prefix("n=")
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::UnknownPolicy(s.to_string()))
        };
        match s {
            "rnd" => Ok(PolicyKind::Random),
            "mc" => Ok(PolicyKind::MaxClique),
            "mc-heur" => Ok(PolicyKind::MaxCliqueHeuristic),
            "rnc" => Ok(PolicyKind::PerfectRnc),
            _ => {
                if let Some(rest) = s.strip_prefix("mwcs:") {
                    Ok(PolicyKind::MaxWeightClique { n: norm(rest)? })
                } else if let Some(rest) = s.strip_prefix("mwvs:") {
                    Ok(PolicyKind::MaxWeightVertexSearch { n: norm(rest)? })
                } else {
                    Err(Error::UnknownPolicy(s.to_string()))
                }
            }
        }
    }
}

/// Receiver weight used for the secondary stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub enum SecondaryWeight {
    /// `(psi_i / q_i)^n`, same as the primary stage.
    #[default]
    PsiTilde,
    /// `(q_i psi_i)^n`: favours large Wants sets on good channels.
    QPsi,
}

impl fmt::Display for SecondaryWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SecondaryWeight::PsiTilde => "psi-tilde",
            SecondaryWeight::QPsi => "q-psi",
        })
    }
}

impl FromStr for SecondaryWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "psi-tilde" => Ok(SecondaryWeight::PsiTilde),
            "q-psi" => Ok(SecondaryWeight::QPsi),
            other => Err(Error::InvalidConfig(format!("unknown secondary weight {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PolicyOptions {
    pub secondary_weight: SecondaryWeight,
    pub limits: SearchLimits,
    /// Fall back to the matching greedy search when an exact search exceeds
    /// its limits instead of failing.
    pub fallback_to_heuristic: bool,
}

/// Per-receiver weights for the primary and secondary stages.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverWeights {
    pub primary: Vec<f64>,
    pub secondary: Vec<f64>,
}

impl ReceiverWeights {
    /// `(psi_tilde_i)^n` for both layers.
    pub fn norm(psi_tilde: &[f64], n: u32) -> Self {
        let primary: Vec<f64> = psi_tilde.iter().map(|w| w.powi(n as i32)).collect();
        Self { secondary: primary.clone(), primary }
    }

    pub fn from_state(state: &FrameState, n: u32, secondary: SecondaryWeight) -> Result<Self> {
        let psi_tilde = state.weighted_wants()?;
        let mut weights = Self::norm(&psi_tilde, n);
        if secondary == SecondaryWeight::QPsi {
            weights.secondary = state
                .profiles()
                .iter()
                .zip(state.wants_sizes())
                .map(|(p, &w)| (p.success_prob() * w as f64).powi(n as i32))
                .collect();
        }
        Ok(weights)
    }

    /// Weight of every vertex of `graph`.
    pub fn per_vertex(&self, graph: &IdncGraph) -> Vec<f64> {
        graph
            .vertices()
            .iter()
            .map(|v| match v.layer {
                Layer::Primary => self.primary[v.receiver],
                Layer::Secondary => self.secondary[v.receiver],
            })
            .collect()
    }
}

fn require_primary(graph: &IdncGraph) -> Result<()> {
    if graph.primary_count() == 0 {
        Err(Error::EmptyGraph)
    } else {
        Ok(())
    }
}

/// Random maximal clique: repeatedly add a uniformly drawn vertex adjacent to
/// everything chosen so far, primary layer first.
pub fn select_random<R: Rng + ?Sized>(graph: &IdncGraph, rng: &mut R) -> Result<Clique> {
    require_primary(graph)?;
    let mut chosen = Vec::new();
    let mut candidates = graph.primary_mask().clone();
    for stage in 0..2 {
        if stage == 1 {
            candidates = graph.secondary_candidates(&chosen);
        }
        while !candidates.is_clear() {
            let count = candidates.count_ones(..);
            let pick = candidates.ones().nth(rng.gen_range(0..count)).expect("pick within count");
            chosen.push(pick);
            candidates.intersect_with(graph.neighbors(pick));
        }
    }
    graph.clique(&chosen)
}

/// Exact two-stage search under per-vertex weights. Returns the stage-one and
/// stage-two results separately.
pub fn two_stage_exact(
    graph: &IdncGraph,
    vertex_weights: &[f64],
    limits: SearchLimits,
) -> Result<(WeightedClique, WeightedClique)> {
    require_primary(graph)?;
    let primary = max_weight_clique(graph.adjacency(), graph.primary_mask(), vertex_weights, limits)?;
    let secondary_candidates = graph.secondary_candidates(&primary.members);
    let secondary = max_weight_clique(graph.adjacency(), &secondary_candidates, vertex_weights, limits)?;
    Ok((primary, secondary))
}

fn union_clique(graph: &IdncGraph, primary: &[usize], secondary: &[usize]) -> Result<Clique> {
    let members: Vec<usize> = primary.iter().chain(secondary).copied().collect();
    graph.clique(&members)
}

fn exceeded(e: &Error) -> bool {
    matches!(e, Error::SizeBoundExceeded { .. } | Error::SearchBudgetExceeded(_))
}

/// Exact maximum clique of the primary layer, then of the adjacent secondary
/// subgraph.
pub fn select_max_clique(graph: &IdncGraph, options: &PolicyOptions) -> Result<Clique> {
    let unit = vec![1.0; graph.len()];
    match two_stage_exact(graph, &unit, options.limits) {
        Ok((p, s)) => union_clique(graph, &p.members, &s.members),
        Err(e) if options.fallback_to_heuristic && exceeded(&e) => select_mc_heuristic(graph),
        Err(e) => Err(e),
    }
}

/// Maximum weight clique selection.
pub fn select_mwcs(graph: &IdncGraph, weights: &ReceiverWeights, options: &PolicyOptions) -> Result<Clique> {
    let per_vertex = weights.per_vertex(graph);
    match two_stage_exact(graph, &per_vertex, options.limits) {
        Ok((p, s)) => union_clique(graph, &p.members, &s.members),
        Err(e) if options.fallback_to_heuristic && exceeded(&e) => select_mwvs(graph, weights),
        Err(e) => Err(e),
    }
}

/// Greedy vertex search inside `candidates`.
///
/// Each round computes, for every candidate `v`, the weighted degree
/// `sum(base[u])` over candidate neighbours `u`, scores `v` by
/// `base[v] * weighted_degree`, adds the best (lowest index on ties) and
/// keeps only its neighbours.
fn vertex_search(graph: &IdncGraph, mut candidates: FixedBitSet, base: &[f64], chosen: &mut Vec<usize>) {
    while !candidates.is_clear() {
        let mut best: Option<(usize, f64)> = None;
        for v in candidates.ones() {
            let weighted_degree: f64 = graph.neighbors(v).intersection(&candidates).map(|u| base[u]).sum();
            let score = base[v] * weighted_degree;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((v, score));
            }
        }
        let (v, _) = best.expect("candidates non-empty");
        chosen.push(v);
        candidates.intersect_with(graph.neighbors(v));
    }
}

fn two_stage_search(graph: &IdncGraph, base: &[f64]) -> Result<Clique> {
    require_primary(graph)?;
    let mut chosen = Vec::new();
    vertex_search(graph, graph.primary_mask().clone(), base, &mut chosen);
    let secondary = graph.secondary_candidates(&chosen);
    vertex_search(graph, secondary, base, &mut chosen);
    graph.clique(&chosen)
}

/// Maximum weight vertex search.
pub fn select_mwvs(graph: &IdncGraph, weights: &ReceiverWeights) -> Result<Clique> {
    two_stage_search(graph, &weights.per_vertex(graph))
}

/// Vertex search where each vertex's value is its degree within its layer.
pub fn select_mc_heuristic(graph: &IdncGraph) -> Result<Clique> {
    let base: Vec<f64> = (0..graph.len()).map(|v| graph.layer_degree(v) as f64).collect();
    two_stage_search(graph, &base)
}

/// Completion delay of perfect random network coding in broadcast: receiver
/// `i` finishes after `|L_i|` successful receptions; the frame completes when
/// the slowest receiver does.
pub fn rnc_completion_delay<R: Rng + ?Sized>(state: &FrameState, rng: &mut R) -> Result<usize> {
    if !state.is_broadcast() {
        return Err(Error::NotBroadcast);
    }
    let q = state.success_probs();
    let mut remaining = state.lacks_sizes().to_vec();
    for (i, (&r, &qi)) in remaining.iter().zip(&q).enumerate() {
        if r > 0 && qi <= 0.0 {
            return Err(Error::ZeroSuccessProbability(i));
        }
    }
    let mut slots = 0;
    while remaining.iter().any(|&r| r > 0) {
        slots += 1;
        for (r, &qi) in remaining.iter_mut().zip(&q) {
            if *r > 0 && rng.gen_bool(qi) {
                *r -= 1;
            }
        }
    }
    Ok(slots)
}

/// Anything that picks the next transmission for a state.
pub trait CliqueSelector {
    fn select(&mut self, state: &FrameState) -> Result<Clique>;
}

impl<S: CliqueSelector + ?Sized> CliqueSelector for Box<S> {
    fn select(&mut self, state: &FrameState) -> Result<Clique> {
        (**self).select(state)
    }
}

/// Selector for one of the built-in clique policies.
pub struct PolicySelector<R> {
    kind: PolicyKind,
    options: PolicyOptions,
    rng: R,
}

impl<R: Rng> PolicySelector<R> {
    pub fn new(kind: PolicyKind, options: PolicyOptions, rng: R) -> Result<Self> {
        if !kind.is_clique_policy() {
            return Err(Error::InvalidConfig(format!("{kind} does not select cliques")));
        }
        Ok(Self { kind, options, rng })
    }
}

impl<R: Rng> CliqueSelector for PolicySelector<R> {
    fn select(&mut self, state: &FrameState) -> Result<Clique> {
        let graph = IdncGraph::build(state);
        match self.kind {
            PolicyKind::Random => select_random(&graph, &mut self.rng),
            PolicyKind::MaxClique => select_max_clique(&graph, &self.options),
            PolicyKind::MaxCliqueHeuristic => select_mc_heuristic(&graph),
            PolicyKind::MaxWeightClique { n } => {
                let w = ReceiverWeights::from_state(state, n, self.options.secondary_weight)?;
                select_mwcs(&graph, &w, &self.options)
            }
            PolicyKind::MaxWeightVertexSearch { n } => {
                let w = ReceiverWeights::from_state(state, n, self.options.secondary_weight)?;
                select_mwvs(&graph, &w)
            }
            PolicyKind::PerfectRnc => unreachable!("rejected in PolicySelector::new"),
        }
    }
}
