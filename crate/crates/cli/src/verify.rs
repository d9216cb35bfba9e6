//! Verification suites: closed forms against Monte Carlo, property sweeps,
//! the exact oracle against simulation, and exact clique searches against
//! subset enumeration.
//!
//! Every random input derives from `VerifyOptions::seed` through
//! `trial_rng(seed, item, stream)` with one stream per check, so a suite's
//! verdict is a pure function of its options.

use std::fmt;
use std::str::FromStr;

use idnc_core::analytics::{
    degree_dominance_check, evolution_coefficients, expected_degree, expected_degrees, expected_edge_count,
    expected_edge_evolution, mc_oracle_degrees, mc_oracle_edge_count, mc_oracle_edge_evolution, CardinalityProfile,
    TargetSets,
};
use idnc_core::clique_search::{SearchLimits, WEIGHT_TOLERANCE};
use idnc_core::policies::{select_max_clique, two_stage_exact, PolicyOptions, ReceiverWeights, SecondaryWeight};
use idnc_core::sim::trial_rng;
use idnc_core::ssp::{policy_gap, random_instance, OptimalPolicy, SspInstance};
use idnc_core::{FrameState, IdncGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::CliError;

pub const PROFILES: u64 = 20;
pub const EVOLUTION_PAIRS: u64 = 10;
pub const PROPERTY_INPUTS: u64 = 10_000;
pub const SSP_INSTANCES: u64 = 50;
pub const SEARCH_GRAPHS: u64 = 100;
pub const MAX_SEARCH_VERTICES: usize = 18;
pub const DEFAULT_MAX_BITS: usize = 12;
pub const DEFAULT_SEED: u64 = 0x1d2c;

const PROFILE_STREAM: u64 = 10;
const PROFILE_MC_STREAM: u64 = 11;
const EVOLUTION_STREAM: u64 = 12;
const EVOLUTION_MC_STREAM: u64 = 13;
const DOMINANCE_STREAM: u64 = 14;
const ALPHA_STREAM: u64 = 15;
const SSP_STREAM: u64 = 16;
const SEARCH_STREAM: u64 = 17;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Formulas,
    Ssp,
    Policies,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "formulas" => Ok(Suite::Formulas),
            "ssp" => Ok(Suite::Ssp),
            "policies" => Ok(Suite::Policies),
            other => Err(format!("unknown suite {other:?}, expected formulas, ssp or policies")),
        }
    }
}

/// Deliberate defects for checking that each suite can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Expected degree divided by `N` where `N - 1` belongs.
    DegreeDenominator,
    /// `alpha` and `beta` exchanged.
    SwapAlphaBeta,
    /// Exact values inflated by 5%.
    SspValue,
    /// Stage-one search run with unit weights.
    UnitWeights,
}

impl FromStr for Mutation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "degree-denominator" => Ok(Mutation::DegreeDenominator),
            "swap-alpha-beta" => Ok(Mutation::SwapAlphaBeta),
            "ssp-value" => Ok(Mutation::SspValue),
            "unit-weights" => Ok(Mutation::UnitWeights),
            other => Err(format!("unknown mutation {other:?}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Monte Carlo trials per comparison.
    pub trials: u64,
    pub seed: u64,
    /// Largest tracked-bit count of the exact oracle instances.
    pub max_bits: usize,
    pub mutation: Option<Mutation>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { trials: 100_000, seed: DEFAULT_SEED, max_bits: DEFAULT_MAX_BITS, mutation: None }
    }
}

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>, CliError> {
    match suite {
        Suite::Formulas => {
            Ok(vec![closed_form_check(opts)?, evolution_check(opts)?, dominance_check(opts)?, alpha_beta_check(opts)?])
        }
        Suite::Ssp => ssp_checks(opts),
        Suite::Policies => Ok(vec![exact_search_check(opts)?]),
    }
}

fn core(e: idnc_core::Error) -> CliError {
    CliError::runtime(e)
}

/// Uniform cardinalities: `M` in `2..=max_m`, `N` in `2..=max_n`, then
/// `rho`, `psi <= N - rho` and `q` in `[0.05, 1]` per receiver.
pub fn random_profile(rng: &mut ChaCha8Rng, max_m: usize, max_n: usize) -> CardinalityProfile {
    let m = rng.gen_range(2..=max_m);
    let n = rng.gen_range(2..=max_n);
    let has: Vec<usize> = (0..m).map(|_| rng.gen_range(0..=n)).collect();
    let wants = has.iter().map(|&h| rng.gen_range(0..=n - h)).collect();
    let q = (0..m).map(|_| rng.gen_range(0.05..=1.0)).collect();
    CardinalityProfile::new(has, wants, q, n).expect("cardinalities in range")
}

fn mutated_degree(p: &CardinalityProfile, i: usize) -> f64 {
    let n = p.frame_size() as f64;
    (0..p.receivers())
        .filter(|&k| k != i)
        .map(|k| p.wants()[k] as f64 / n * (1.0 + (p.has()[k] * p.has()[i]) as f64 / n))
        .sum()
}

/// Worst standardised deviation seen so far, with a running failure count.
#[derive(Default)]
struct Tally {
    compared: usize,
    failed: usize,
    worst_z: f64,
    first_failure: Option<String>,
}

impl Tally {
    fn record(&mut self, label: impl FnOnce() -> String, mean: f64, stderr: f64, expected: f64) {
        self.compared += 1;
        let dev = (mean - expected).abs();
        let z = if stderr > 0.0 {
            dev / stderr
        } else if dev <= 1e-9 {
            0.0
        } else {
            f64::INFINITY
        };
        self.worst_z = self.worst_z.max(z);
        if dev > (3.0 * stderr).max(1e-9) {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure =
                    Some(format!("{}: mc {mean:.6} +- {stderr:.2e} vs closed form {expected:.6}", label()));
            }
        }
    }

    fn check(self, name: &'static str, what: &str) -> Check {
        let mut detail = format!(
            "{}/{} {what} within 3 stderr, worst |z| = {:.2}",
            self.compared - self.failed,
            self.compared,
            self.worst_z
        );
        if let Some(f) = self.first_failure {
            detail.push_str(&format!("; first failure {f}"));
        }
        Check { name, passed: self.failed == 0 && self.compared > 0, detail }
    }
}

/// Expected edge count and per-receiver degrees against sampled placements.
pub fn closed_form_check(opts: &VerifyOptions) -> Result<Check, CliError> {
    let results: Vec<_> = (0..PROFILES)
        .into_par_iter()
        .map(|k| {
            let p = random_profile(&mut trial_rng(opts.seed, k, PROFILE_STREAM), 6, 6);
            let mut mc = trial_rng(opts.seed, k, PROFILE_MC_STREAM);
            let edges = mc_oracle_edge_count(&p, opts.trials, &mut mc)?;
            let degrees = mc_oracle_degrees(&p, opts.trials, &mut mc)?;
            let (closed_edges, closed_degrees) = if opts.mutation == Some(Mutation::DegreeDenominator) {
                let d: Vec<f64> = (0..p.receivers()).map(|i| mutated_degree(&p, i)).collect();
                (0.5 * d.iter().zip(p.wants()).map(|(d, &w)| d * w as f64).sum::<f64>(), d)
            } else {
                (expected_edge_count(&p)?, expected_degrees(&p)?)
            };
            Ok((k, edges, degrees, closed_edges, closed_degrees))
        })
        .collect::<Result<_, idnc_core::Error>>()
        .map_err(core)?;
    let mut tally = Tally::default();
    for (k, edges, degrees, closed_edges, closed_degrees) in results {
        tally.record(|| format!("profile {k} edge count"), edges.mean, edges.stderr, closed_edges);
        for (i, est) in degrees.iter().enumerate() {
            if let Some(e) = est {
                tally.record(|| format!("profile {k} degree of receiver {i}"), e.mean, e.stderr, closed_degrees[i]);
            }
        }
    }
    Ok(tally.check("closed-form", "edge-count and degree estimates"))
}

/// Random target sets a transmission could realise; never empty when the
/// profile admits any target.
fn random_targets(rng: &mut ChaCha8Rng, p: &CardinalityProfile) -> TargetSets {
    loop {
        let mut t = TargetSets::default();
        for i in 0..p.receivers() {
            match rng.gen_range(0..3) {
                1 if p.wants()[i] >= 1 => t.primary.push(i),
                2 if p.lacks()[i] > p.wants()[i] => t.secondary.push(i),
                _ => {}
            }
        }
        let any_feasible = (0..p.receivers()).any(|i| p.lacks()[i] > 0);
        if !t.primary.is_empty() || !t.secondary.is_empty() || !any_feasible {
            return t;
        }
    }
}

/// One-step expected edge count against simulated transmissions. Profiles
/// need at least one wanted packet so the step has a primary target to hit.
pub fn evolution_check(opts: &VerifyOptions) -> Result<Check, CliError> {
    let results: Vec<_> = (0..EVOLUTION_PAIRS)
        .into_par_iter()
        .map(|k| {
            let mut gen = trial_rng(opts.seed, k, EVOLUTION_STREAM);
            let (p, t) = loop {
                let p = random_profile(&mut gen, 5, 5);
                if p.wants().iter().all(|&w| w == 0) {
                    continue;
                }
                let t = random_targets(&mut gen, &p);
                if !t.primary.is_empty() || !t.secondary.is_empty() {
                    break (p, t);
                }
            };
            let est = mc_oracle_edge_evolution(&p, &t, opts.trials, &mut trial_rng(opts.seed, k, EVOLUTION_MC_STREAM))?;
            let closed = expected_edge_evolution(&p, &t, &expected_degrees(&p)?, expected_edge_count(&p)?)?;
            Ok((k, est, closed))
        })
        .collect::<Result<_, idnc_core::Error>>()
        .map_err(core)?;
    let mut tally = Tally::default();
    for (k, est, closed) in results {
        tally.record(|| format!("pair {k}"), est.mean, est.stderr, closed);
    }
    Ok(tally.check("one-step-evolution", "one-step edge counts"))
}

/// Profiles with receivers `i != h`, `psi_i > psi_h` and `rho_i < rho_h`.
pub fn dominance_input(rng: &mut ChaCha8Rng) -> (CardinalityProfile, usize, usize) {
    let base = random_profile(rng, 6, 12);
    let (m, n) = (base.receivers(), base.frame_size());
    let i = rng.gen_range(0..m);
    let h = (i + rng.gen_range(1..m)) % m;
    let rho_i = rng.gen_range(0..n);
    let rho_h = rng.gen_range(rho_i + 1..=n);
    let psi_h = rng.gen_range(0..=n - rho_h);
    let psi_i = rng.gen_range(psi_h + 1..=n - rho_i);
    let (mut has, mut wants) = (base.has().to_vec(), base.wants().to_vec());
    (has[i], wants[i], has[h], wants[h]) = (rho_i, psi_i, rho_h, psi_h);
    let p = CardinalityProfile::new(has, wants, base.success().to_vec(), n).expect("cardinalities in range");
    (p, i, h)
}

pub fn dominance_check(opts: &VerifyOptions) -> Result<Check, CliError> {
    let violations: Vec<String> = (0..PROPERTY_INPUTS)
        .into_par_iter()
        .map(|k| {
            let (p, i, h) = dominance_input(&mut trial_rng(opts.seed, k, DOMINANCE_STREAM));
            Ok((!degree_dominance_check(&p, i, h)?).then(|| {
                format!(
                    "input {k}: E[deg_{h}] = {} <= E[deg_{i}] = {}",
                    expected_degree(&p, h).unwrap_or(f64::NAN),
                    expected_degree(&p, i).unwrap_or(f64::NAN)
                )
            }))
        })
        .collect::<Result<Vec<_>, idnc_core::Error>>()
        .map_err(core)?
        .into_iter()
        .flatten()
        .collect();
    Ok(violation_check("degree-dominance", violations))
}

pub fn alpha_beta_check(opts: &VerifyOptions) -> Result<Check, CliError> {
    let violations: Vec<String> = (0..PROPERTY_INPUTS)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(opts.seed, k, ALPHA_STREAM);
            let p = random_profile(&mut rng, 6, 12);
            let t = random_targets(&mut rng, &p);
            let mut c = evolution_coefficients(&p, &t)?;
            if opts.mutation == Some(Mutation::SwapAlphaBeta) {
                std::mem::swap(&mut c.alpha, &mut c.beta);
            }
            Ok((0..p.receivers())
                .find(|&i| c.alpha[i] < c.beta[i] - 1e-12)
                .map(|i| format!("input {k}, receiver {i}: alpha {} < beta {}", c.alpha[i], c.beta[i])))
        })
        .collect::<Result<Vec<_>, idnc_core::Error>>()
        .map_err(core)?
        .into_iter()
        .flatten()
        .collect();
    Ok(violation_check("alpha-beta", violations))
}

fn violation_check(name: &'static str, violations: Vec<String>) -> Check {
    let mut detail = format!("{} violations in {PROPERTY_INPUTS} inputs", violations.len());
    if let Some(v) = violations.first() {
        detail.push_str(&format!("; first {v}"));
    }
    Check { name, passed: violations.is_empty(), detail }
}

/// Instances for the exact oracle: half broadcast `3 x 4`, half `4 x 4`
/// with demand ratio 0.5, all with at most `max_bits` tracked pairs.
pub fn ssp_instances(opts: &VerifyOptions) -> Result<Vec<SspInstance>, CliError> {
    (0..SSP_INSTANCES)
        .map(|k| {
            let mut rng = trial_rng(opts.seed, k, SSP_STREAM);
            let (m, mu) = if k % 2 == 0 { (3, 1.0) } else { (4, 0.5) };
            random_instance(m, 4, 0.3, mu, opts.max_bits, &mut rng).map_err(core)
        })
        .collect()
}

/// Value bounds and monotonicity on every state, then the optimal policy
/// replayed through the simulator.
pub fn ssp_checks(opts: &VerifyOptions) -> Result<Vec<Check>, CliError> {
    let instances = ssp_instances(opts)?;
    let solved: Vec<_> = instances
        .par_iter()
        .map(|inst| {
            let table = inst.solve()?;
            Ok((table.len(), table.check_invariants(inst)))
        })
        .collect::<Result<_, idnc_core::Error>>()
        .map_err(core)?;
    let states: usize = solved.iter().map(|s| s.0).sum();
    let broken: Vec<String> = solved
        .iter()
        .enumerate()
        .filter_map(|(k, (_, r))| r.as_ref().err().map(|e| format!("instance {k}: {e}")))
        .collect();
    let mut detail =
        format!("{} of {} instances clean over {states} states", instances.len() - broken.len(), instances.len());
    if let Some(b) = broken.first() {
        detail.push_str(&format!("; first failure {b}"));
    }
    let bounds = Check { name: "ssp-bounds", passed: broken.is_empty(), detail };

    let report =
        policy_gap(&instances, opts.trials, opts.seed, |inst, table, _| Box::new(OptimalPolicy::new(inst, table)))
            .map_err(core)?;
    let scale = if opts.mutation == Some(Mutation::SspValue) { 1.05 } else { 1.0 };
    let mut tally = Tally::default();
    for (k, gap) in report.instances.iter().enumerate() {
        tally.record(|| format!("instance {k}"), gap.mean, gap.stderr, gap.optimal * scale);
    }
    Ok(vec![bounds, tally.check("ssp-replay", "replayed optimal delays")])
}

/// Best clique inside `pool` by weight, then size, then the lexicographically
/// smallest index list; exhaustive over subsets.
pub fn brute_force_clique(graph: &IdncGraph, pool: &[usize], weights: &[f64]) -> (Vec<usize>, f64) {
    assert!(pool.len() <= 24, "subset enumeration over {} vertices", pool.len());
    let mut best: (Vec<usize>, f64) = (Vec::new(), 0.0);
    for subset in 1u32..1 << pool.len() {
        let members: Vec<usize> = (0..pool.len()).filter(|&b| subset >> b & 1 == 1).map(|b| pool[b]).collect();
        if members.iter().enumerate().any(|(a, &u)| members[a + 1..].iter().any(|&v| !graph.adjacent_idx(u, v))) {
            continue;
        }
        let w: f64 = members.iter().map(|&v| weights[v]).sum();
        let tol = WEIGHT_TOLERANCE * best.1.abs().max(1.0);
        let better = w > best.1 + tol
            || (w >= best.1 - tol
                && (members.len() > best.0.len() || (members.len() == best.0.len() && members < best.0)));
        if better || best.0.is_empty() {
            best = (members, w);
        }
    }
    best
}

/// Random incomplete frame whose graph has primary vertices and at most
/// `max_vertices` vertices.
pub fn random_search_state(rng: &mut ChaCha8Rng, max_vertices: usize) -> FrameState {
    loop {
        let m = rng.gen_range(2..=6);
        let n = rng.gen_range(2..=6);
        let mut rows: Vec<Vec<i8>> =
            (0..m).map(|_| (0..n).map(|_| [0i8, 0, 1, -1][rng.gen_range(0..4)]).collect()).collect();
        for row in &mut rows {
            if row.iter().all(|&c| c == -1) {
                row[0] = 0;
            }
        }
        let q: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..=1.0)).collect();
        let s = FrameState::from_rows(&rows, &q).expect("valid rows");
        let g = IdncGraph::build(&s);
        if g.primary_count() > 0 && g.len() <= max_vertices {
            return s;
        }
    }
}

/// Exact weighted stage-one search and exact maximum clique against subset
/// enumeration.
pub fn exact_search_check(opts: &VerifyOptions) -> Result<Check, CliError> {
    let failures: Vec<String> = (0..SEARCH_GRAPHS)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(opts.seed, k, SEARCH_STREAM);
            let s = random_search_state(&mut rng, MAX_SEARCH_VERTICES);
            let g = IdncGraph::build(&s);
            let n = rng.gen_range(1..=5);
            let weights = ReceiverWeights::from_state(&s, n, SecondaryWeight::PsiTilde)?.per_vertex(&g);
            let primary: Vec<usize> = g.primary_mask().ones().collect();
            let search_weights =
                if opts.mutation == Some(Mutation::UnitWeights) { vec![1.0; g.len()] } else { weights.clone() };
            let (stage1, _) = two_stage_exact(&g, &search_weights, SearchLimits::default())?;
            let (expected, _) = brute_force_clique(&g, &primary, &weights);
            if stage1.members != expected {
                return Ok(Some(format!(
                    "graph {k} (n = {n}): stage one {:?}, enumeration {expected:?}",
                    stage1.members
                )));
            }
            let mc = select_max_clique(&g, &PolicyOptions::default())?;
            let got: Vec<usize> = g.indices_of(&mc)?.into_iter().filter(|&v| g.primary_mask().contains(v)).collect();
            let (expected, _) = brute_force_clique(&g, &primary, &vec![1.0; g.len()]);
            Ok((got != expected).then(|| format!("graph {k}: max clique {got:?}, enumeration {expected:?}")))
        })
        .collect::<Result<Vec<_>, idnc_core::Error>>()
        .map_err(core)?
        .into_iter()
        .flatten()
        .collect();
    let mut detail =
        format!("{} of {SEARCH_GRAPHS} graphs agree with subset enumeration", SEARCH_GRAPHS as usize - failures.len());
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first failure {f}"));
    }
    Ok(Check { name: "exact-search", passed: failures.is_empty(), detail })
}
