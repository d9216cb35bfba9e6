//! Exact minimum expected completion delay for tiny frames.
//!
//! A state is the set of initially lacking (receiver, packet) pairs that have
//! since been received. Successors of a non-self transition always have more
//! bits set, so values are computed by memoised depth-first recursion, which
//! visits states in reverse topological order; self-loops are folded into the
//! `1 / (1 - P_self)` factor.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Clique, IdncGraph};
use crate::model::FrameState;
use crate::policies::CliqueSelector;
use crate::sim::{draw_profiles, run_recovery, trial_rng, Heterogeneity, CHANNEL_STREAM};

pub const DEFAULT_SIZE_BOUND: usize = 16;
/// Largest instance on which the all-cliques action space is solved.
pub const ALL_CLIQUES_BOUND: usize = 8;
/// Relative slack for comparing values; smaller gaps count as ties.
pub const VALUE_TOLERANCE: f64 = 1e-12;

/// Initial frame and the lacking pairs whose reception the solver tracks.
#[derive(Clone, Debug)]
pub struct SspInstance {
    initial: FrameState,
    bits: Vec<(usize, usize)>,
}

/// Received mask over [`SspInstance::bits`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SspState(pub u64);

impl SspInstance {
    /// Tracks every lacking pair of receivers that still want packets.
    /// Every such receiver needs `q > 0`.
    pub fn new(initial: FrameState, size_bound: usize) -> Result<Self> {
        let wants = initial.wants_sizes();
        let mut bits = Vec::new();
        for r in 0..initial.receivers() {
            if wants[r] == 0 {
                continue;
            }
            if initial.profiles()[r].success_prob() <= 0.0 {
                return Err(Error::ZeroSuccessProbability(r));
            }
            bits.extend((0..initial.packets()).filter(|&p| !initial.has(r, p)).map(|p| (r, p)));
        }
        let bound = size_bound.min(63);
        if bits.len() > bound {
            return Err(Error::SizeBoundExceeded { size: bits.len(), bound });
        }
        Ok(Self { initial, bits })
    }

    pub fn initial(&self) -> &FrameState {
        &self.initial
    }

    pub fn bits(&self) -> &[(usize, usize)] {
        &self.bits
    }

    pub fn initial_state(&self) -> SspState {
        SspState(0)
    }

    pub fn frame(&self, state: SspState) -> FrameState {
        let pairs = self.bits.iter().enumerate().filter(|(b, _)| state.0 >> b & 1 == 1).map(|(_, &pair)| pair);
        self.initial.with_received(pairs)
    }

    fn bit_of(&self, pair: (usize, usize)) -> Option<usize> {
        self.bits.iter().position(|&b| b == pair)
    }

    /// State of a frame reachable from the initial one.
    pub fn state_of(&self, frame: &FrameState) -> Result<SspState> {
        if frame.receivers() != self.initial.receivers() || frame.packets() != self.initial.packets() {
            return Err(Error::UnknownState);
        }
        let mut mask = 0u64;
        for r in 0..frame.receivers() {
            for p in 0..frame.packets() {
                let now = frame.sfm().get(r, p);
                let then = self.initial.sfm().get(r, p);
                if now == then {
                    continue;
                }
                match self.bit_of((r, p)) {
                    Some(b) if frame.has(r, p) => mask |= 1 << b,
                    _ => return Err(Error::UnknownState),
                }
            }
        }
        Ok(SspState(mask))
    }

    fn successors(&self, state: SspState, clique: &Clique) -> Result<Vec<(SspState, f64)>> {
        if clique.is_empty() {
            return Err(Error::EmptyClique);
        }
        let q = self.initial.success_probs();
        let targets: Vec<(u64, f64)> = clique
            .targets()
            .into_iter()
            .map(|pair| {
                let b = self.bit_of(pair).ok_or(Error::UnknownState)?;
                if state.0 >> b & 1 == 1 {
                    return Err(Error::AlreadyHas { receiver: pair.0, packet: pair.1 });
                }
                Ok((1u64 << b, q[pair.0]))
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(1 << targets.len());
        for subset in 0..1u64 << targets.len() {
            let mut mask = state.0;
            let mut prob = 1.0;
            for (k, &(bit, qk)) in targets.iter().enumerate() {
                if subset >> k & 1 == 1 {
                    mask |= bit;
                    prob *= qk;
                } else {
                    prob *= 1.0 - qk;
                }
            }
            if prob > 0.0 {
                out.push((SspState(mask), prob));
            }
        }
        Ok(out)
    }

    /// Outcome distribution of transmitting `clique` in `state`, one entry
    /// per subset of targeted receivers that hears it. Zero-probability
    /// outcomes are omitted; the empty subset is the self-transition.
    pub fn transition_distribution(&self, state: SspState, clique: &Clique) -> Result<Vec<(SspState, f64)>> {
        let frame = self.frame(state);
        let graph = IdncGraph::build(&frame);
        let members = graph.indices_of(clique)?;
        graph.clique(&members)?;
        clique.check_decodable(&frame)?;
        self.successors(state, clique)
    }

    /// Optimal values over maximal-clique actions.
    pub fn solve(&self) -> Result<ValueTable> {
        self.solve_with(ActionSpace::MaximalCliques)
    }

    pub fn solve_with(&self, actions: ActionSpace) -> Result<ValueTable> {
        if actions == ActionSpace::AllCliques && self.bits.len() > ALL_CLIQUES_BOUND {
            return Err(Error::SizeBoundExceeded { size: self.bits.len(), bound: ALL_CLIQUES_BOUND });
        }
        let mut table = ValueTable { entries: HashMap::new(), actions };
        self.value(SspState(0), &mut table)?;
        Ok(table)
    }

    fn value(&self, state: SspState, table: &mut ValueTable) -> Result<f64> {
        if let Some(e) = table.entries.get(&state) {
            return Ok(e.value);
        }
        let frame = self.frame(state);
        if frame.is_complete() {
            table.entries.insert(state, Entry { value: 0.0, action: None, actions: Vec::new() });
            return Ok(0.0);
        }
        let graph = IdncGraph::build(&frame);
        let actions = action_set(&graph, table.actions, self.bits.len())?;
        assert!(!actions.is_empty(), "non-absorbing state without actions");
        let mut best: Option<(f64, usize)> = None;
        let mut distributions = Vec::with_capacity(actions.len());
        for (a, clique) in actions.iter().enumerate() {
            let dist = self.successors(state, clique)?;
            let mut self_prob = 0.0;
            let mut rest = 0.0;
            for &(next, prob) in &dist {
                if next == state {
                    self_prob += prob;
                } else {
                    rest += prob * self.value(next, table)?;
                }
            }
            let j = (1.0 + rest) / (1.0 - self_prob);
            if best.is_none_or(|(b, _)| j < b - VALUE_TOLERANCE * b) {
                best = Some((j, a));
            }
            distributions.push(dist.into_iter().map(|(s, _)| s).filter(|&s| s != state).collect());
        }
        let (value, a) = best.expect("at least one action");
        table.entries.insert(state, Entry { value, action: Some(actions[a].clone()), actions: distributions });
        Ok(value)
    }
}

fn action_set(graph: &IdncGraph, actions: ActionSpace, bound: usize) -> Result<Vec<Clique>> {
    match actions {
        ActionSpace::MaximalCliques => graph.enumerate_maximal_cliques(bound.max(1)),
        ActionSpace::AllCliques => {
            let n = graph.len();
            let mut out = Vec::new();
            for subset in 1u32..1 << n {
                let members: Vec<usize> = (0..n).filter(|&v| subset >> v & 1 == 1).collect();
                if let Ok(c) = graph.clique(&members) {
                    out.push(c);
                }
            }
            out.sort_by(|a, b| a.vertices().cmp(b.vertices()));
            Ok(out)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSpace {
    MaximalCliques,
    /// Every non-empty clique; only for instances with at most
    /// [`ALL_CLIQUES_BOUND`] tracked pairs.
    AllCliques,
}

#[derive(Clone, Debug)]
struct Entry {
    value: f64,
    action: Option<Clique>,
    /// Non-self successors of every action considered.
    actions: Vec<Vec<SspState>>,
}

/// Values and optimal actions of every state reachable from the initial one.
#[derive(Clone, Debug)]
pub struct ValueTable {
    entries: HashMap<SspState, Entry>,
    actions: ActionSpace,
}

impl ValueTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, state: SspState) -> Option<f64> {
        self.entries.get(&state).map(|e| e.value)
    }

    pub fn initial_value(&self) -> f64 {
        self.entries[&SspState(0)].value
    }

    /// `None` for absorbing states.
    pub fn optimal_clique(&self, state: SspState) -> Option<&Clique> {
        self.entries.get(&state).and_then(|e| e.action.as_ref())
    }

    /// States in ascending mask order.
    pub fn states(&self) -> Vec<SspState> {
        let mut s: Vec<SspState> = self.entries.keys().copied().collect();
        s.sort_unstable();
        s
    }

    /// Checks on every solved state: `max psi~ <= V <= sum psi~`, `V = 0`
    /// exactly on absorbing states and `V(s) >= V(s')` for every successor
    /// under every action. Returns the first violation.
    pub fn check_invariants(&self, instance: &SspInstance) -> std::result::Result<(), String> {
        for state in self.states() {
            let e = &self.entries[&state];
            let frame = instance.frame(state);
            let psi = frame.weighted_wants().map_err(|err| err.to_string())?;
            let lo = psi.iter().cloned().fold(0.0, f64::max);
            let hi: f64 = psi.iter().sum();
            let slack = 1e-9 * hi.max(1.0);
            if e.value < lo - slack || e.value > hi + slack {
                return Err(format!("state {:#x}: V = {} outside [{lo}, {hi}]", state.0, e.value));
            }
            if frame.is_complete() != (e.value == 0.0) {
                return Err(format!("state {:#x}: V = {} but complete = {}", state.0, e.value, frame.is_complete()));
            }
            for next in e.actions.iter().flatten() {
                if next.0 & state.0 != state.0 || next.0 == state.0 {
                    return Err(format!("state {:#x}: successor {:#x} is not a strict superset", state.0, next.0));
                }
                let v = self.entries[next].value;
                if v > e.value + slack {
                    return Err(format!("state {:#x}: successor {:#x} has V = {v} > {}", state.0, next.0, e.value));
                }
            }
        }
        Ok(())
    }
}

/// Replays a solved table's optimal actions.
pub struct OptimalPolicy<'a> {
    instance: &'a SspInstance,
    table: &'a ValueTable,
}

impl<'a> OptimalPolicy<'a> {
    pub fn new(instance: &'a SspInstance, table: &'a ValueTable) -> Self {
        Self { instance, table }
    }
}

impl CliqueSelector for OptimalPolicy<'_> {
    fn select(&mut self, state: &FrameState) -> Result<Clique> {
        let s = self.instance.state_of(state)?;
        self.table.optimal_clique(s).cloned().ok_or(Error::UnknownState)
    }
}

/// Random instance: heterogeneous profiles, one initial phase, redrawn until
/// the frame is incomplete and has at most `max_bits` tracked pairs.
pub fn random_instance<R: Rng + ?Sized>(
    receivers: usize,
    frame_size: usize,
    mean_erasure: f64,
    mean_demand: f64,
    max_bits: usize,
    rng: &mut R,
) -> Result<SspInstance> {
    for _ in 0..100_000 {
        let profiles = draw_profiles(receivers, frame_size, mean_erasure, mean_demand, Heterogeneity::default(), rng)?;
        let frame = crate::model::init_frame(profiles, frame_size, rng)?;
        if frame.is_complete() {
            continue;
        }
        match SspInstance::new(frame, max_bits) {
            Ok(instance) => return Ok(instance),
            Err(Error::SizeBoundExceeded { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidConfig(format!("no instance with at most {max_bits} lacking pairs found")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceGap {
    pub optimal: f64,
    pub mean: f64,
    pub stderr: f64,
}

impl InstanceGap {
    pub fn relative_gap(&self) -> f64 {
        if self.optimal == 0.0 {
            0.0
        } else {
            (self.mean - self.optimal) / self.optimal
        }
    }

    /// `|mean - V| <= max(3 stderr, 1e-9)`.
    pub fn consistent(&self) -> bool {
        (self.mean - self.optimal).abs() <= (3.0 * self.stderr).max(1e-9)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub instances: Vec<InstanceGap>,
    pub mean_relative_gap: f64,
    pub max_relative_gap: f64,
}

/// Monte Carlo delay of a policy against the optimum on each instance.
/// `make_selector(instance, table, trial)` builds a fresh selector per trial.
pub fn policy_gap<F>(instances: &[SspInstance], trials: u64, seed: u64, make_selector: F) -> Result<GapReport>
where
    F: for<'a> Fn(&'a SspInstance, &'a ValueTable, u64) -> Box<dyn CliqueSelector + 'a> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let mut gaps = Vec::with_capacity(instances.len());
    for (k, instance) in instances.iter().enumerate() {
        let table = instance.solve()?;
        let cap = 1_000 * instance.bits().len().max(1);
        let instance_seed = seed.wrapping_add(k as u64);
        let (n, sum, sum_sq) = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut selector = make_selector(instance, &table, t);
                let mut channel = trial_rng(instance_seed, t, CHANNEL_STREAM);
                let rec = run_recovery(instance.initial().clone(), &mut selector, &mut channel, cap, false)?;
                if rec.truncated {
                    return Err(Error::InvalidConfig(format!("trial {t} hit the {cap}-slot cap")));
                }
                Ok((1u64, rec.delay as u64, (rec.delay as u128).pow(2)))
            })
            .try_reduce(|| (0, 0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)))?;
        let mean = sum as f64 / n as f64;
        let stderr = if n > 1 {
            let spread = n as u128 * sum_sq - (sum as u128).pow(2);
            (spread as f64 / (n as f64 * (n - 1) as f64) / n as f64).sqrt()
        } else {
            0.0
        };
        gaps.push(InstanceGap { optimal: table.initial_value(), mean, stderr });
    }
    let rel: Vec<f64> = gaps.iter().map(InstanceGap::relative_gap).collect();
    Ok(GapReport {
        mean_relative_gap: rel.iter().sum::<f64>() / rel.len().max(1) as f64,
        max_relative_gap: rel.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        instances: gaps,
    })
}
