//! Monte Carlo recovery-phase simulation.
//!
//! Every trial owns three random streams derived only from
//! `(master_seed, trial_index)`: setup (profiles and the initial uncoded
//! phase), channel (recovery receptions) and policy (RND draws). Policies run
//! with the same seed therefore see identical frames, which is the common
//! random number scheme used across sweep cells.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{init_frame, FrameState, ReceiverProfile};
use crate::policies::{rnc_completion_delay, CliqueSelector, PolicyKind, PolicyOptions, PolicySelector};

/// Lower and upper clip of per-receiver erasure probabilities.
pub const ERASURE_CLIP: (f64, f64) = (0.01, 0.99);
/// Lower and upper clip of per-receiver demand ratios.
pub const DEMAND_CLIP: (f64, f64) = (0.01, 1.0);
const RECENTER_PASSES: usize = 3;
const RECENTER_TOLERANCE: f64 = 1e-9;

pub const SETUP_STREAM: u64 = 0;
pub const CHANNEL_STREAM: u64 = 1;
pub const POLICY_STREAM: u64 = 2;

/// Relative half-width of the uniform band each receiver parameter is drawn
/// from around its mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Heterogeneity {
    pub erasure_spread: f64,
    pub demand_spread: f64,
}

impl Default for Heterogeneity {
    fn default() -> Self {
        Self { erasure_spread: 0.5, demand_spread: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub receivers: usize,
    pub frame_size: usize,
    pub mean_erasure: f64,
    pub mean_demand: f64,
    pub policy: PolicyKind,
    pub trials: u64,
    pub master_seed: u64,
    pub heterogeneity: Heterogeneity,
    /// Truncation cap on recovery slots; `None` selects [`SimConfig::default_max_slots`].
    pub max_slots: Option<usize>,
    /// Count the `N` uncoded slots of the initial phase in the delay.
    pub include_initial: bool,
    pub options: PolicyOptions,
}

impl SimConfig {
    pub fn new(receivers: usize, frame_size: usize, mean_erasure: f64, mean_demand: f64, policy: PolicyKind) -> Self {
        Self {
            receivers,
            frame_size,
            mean_erasure,
            mean_demand,
            policy,
            trials: 1,
            master_seed: 0,
            heterogeneity: Heterogeneity::default(),
            max_slots: None,
            include_initial: false,
            options: PolicyOptions::default(),
        }
    }

    /// `max(ceil(50 N / (1 - p)), ceil(M N / q_min))` where `q_min` is the
    /// worst success probability the heterogeneity band allows.
    pub fn default_max_slots(&self) -> usize {
        let n = self.frame_size as f64;
        let p_max =
            (self.mean_erasure * (1.0 + self.heterogeneity.erasure_spread)).clamp(ERASURE_CLIP.0, ERASURE_CLIP.1);
        let by_mean = (50.0 * n / (1.0 - self.mean_erasure)).ceil();
        let by_worst = (self.receivers as f64 * n / (1.0 - p_max)).ceil();
        by_mean.max(by_worst) as usize
    }

    pub fn max_slots(&self) -> usize {
        self.max_slots.unwrap_or_else(|| self.default_max_slots())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.receivers == 0 {
            return bad("M must be at least 1".into());
        }
        if self.frame_size == 0 {
            return bad("N must be at least 1".into());
        }
        if !(ERASURE_CLIP.0..=ERASURE_CLIP.1).contains(&self.mean_erasure) {
            return bad(format!("mean erasure {} outside [{}, {}]", self.mean_erasure, ERASURE_CLIP.0, ERASURE_CLIP.1));
        }
        if !(DEMAND_CLIP.0..=DEMAND_CLIP.1).contains(&self.mean_demand) {
            return bad(format!("mean demand {} outside [{}, {}]", self.mean_demand, DEMAND_CLIP.0, DEMAND_CLIP.1));
        }
        let h = self.heterogeneity;
        if !(0.0..=1.0).contains(&h.erasure_spread) || !(0.0..=1.0).contains(&h.demand_spread) {
            return bad("heterogeneity spreads must lie in [0, 1]".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.max_slots == Some(0) {
            return bad("max_slots must be at least 1".into());
        }
        if self.policy == PolicyKind::PerfectRnc && self.mean_demand < 1.0 {
            return Err(Error::NotBroadcast);
        }
        Ok(())
    }
}

/// Draws `count` values uniformly on `mean * [1 - spread, 1 + spread]`,
/// clips them to `clip`, then shifts the unclipped ones until the sample
/// mean equals `mean`.
fn draw_centered<R: Rng + ?Sized>(
    count: usize,
    mean: f64,
    spread: f64,
    clip: (f64, f64),
    rng: &mut R,
) -> Result<Vec<f64>> {
    if spread == 0.0 {
        return Ok(vec![mean; count]);
    }
    let (lo, hi) = (mean * (1.0 - spread), mean * (1.0 + spread));
    let mut values: Vec<f64> = (0..count).map(|_| rng.gen_range(lo..=hi).clamp(clip.0, clip.1)).collect();
    let target = mean * count as f64;
    for _ in 0..RECENTER_PASSES {
        let deficit = target - values.iter().sum::<f64>();
        if deficit.abs() <= RECENTER_TOLERANCE {
            break;
        }
        // Entries already at the bound the shift pushes towards cannot move.
        let free: Vec<usize> =
            (0..count).filter(|&i| if deficit > 0.0 { values[i] < clip.1 } else { values[i] > clip.0 }).collect();
        if free.is_empty() {
            break;
        }
        let shift = deficit / free.len() as f64;
        for i in free {
            values[i] = (values[i] + shift).clamp(clip.0, clip.1);
        }
    }
    let achieved = values.iter().sum::<f64>() / count as f64;
    if (achieved - mean).abs() > RECENTER_TOLERANCE {
        return Err(Error::InvalidConfig(format!("cannot recenter sample mean {achieved} to {mean}")));
    }
    Ok(values)
}

/// Heterogeneous receiver profiles with sample means exactly `mean_erasure`
/// and `mean_demand`. A mean demand of 1 gives a broadcast frame.
pub fn draw_profiles<R: Rng + ?Sized>(
    receivers: usize,
    frame_size: usize,
    mean_erasure: f64,
    mean_demand: f64,
    heterogeneity: Heterogeneity,
    rng: &mut R,
) -> Result<Vec<ReceiverProfile>> {
    if receivers == 0 {
        return Err(Error::NoReceivers);
    }
    if frame_size == 0 {
        return Err(Error::EmptyFrame);
    }
    if !(ERASURE_CLIP.0..=ERASURE_CLIP.1).contains(&mean_erasure) {
        return Err(Error::InvalidConfig(format!("mean erasure {mean_erasure} outside [0.01, 0.99]")));
    }
    if !(DEMAND_CLIP.0..=DEMAND_CLIP.1).contains(&mean_demand) {
        return Err(Error::InvalidConfig(format!("mean demand {mean_demand} outside [0.01, 1]")));
    }
    let erasures = draw_centered(receivers, mean_erasure, heterogeneity.erasure_spread, ERASURE_CLIP, rng)?;
    if mean_demand == 1.0 {
        return erasures.into_iter().map(|p| ReceiverProfile::broadcast(p, frame_size)).collect();
    }
    let demands = draw_centered(receivers, mean_demand, heterogeneity.demand_spread, DEMAND_CLIP, rng)?;
    erasures.into_iter().zip(demands).map(|(p, mu)| ReceiverProfile::with_demand(p, mu, frame_size, rng)).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream `stream` of trial `trial` under `master_seed`.
pub fn trial_rng(master_seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(trial)));
    rng.set_stream(stream);
    rng
}

/// One recovery transmission as seen by the sender.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transmission {
    pub packets: Vec<usize>,
    pub targeted_primary: Vec<usize>,
    pub targeted_secondary: Vec<usize>,
    /// Targeted receivers that heard the transmission.
    pub received: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompletionRecord {
    pub delay: usize,
    pub transcript: Vec<Transmission>,
    pub truncated: bool,
}

/// Runs recovery from `state` until every Wants set is empty or `max_slots`
/// transmissions have been sent. Each transmission is checked for instant
/// decodability before it is applied.
pub fn run_recovery<S, R>(
    mut state: FrameState,
    selector: &mut S,
    channel: &mut R,
    max_slots: usize,
    record: bool,
) -> Result<CompletionRecord>
where
    S: CliqueSelector + ?Sized,
    R: Rng + ?Sized,
{
    let q = state.success_probs();
    let mut transcript = Vec::new();
    let mut slots = 0;
    while !state.is_complete() && slots < max_slots {
        let clique = selector.select(&state)?;
        if clique.is_empty() {
            return Err(Error::EmptyClique);
        }
        clique.check_decodable(&state)?;
        let targets = clique.targets();
        let outcomes: Vec<bool> = targets.iter().map(|&(r, _)| channel.gen_bool(q[r])).collect();
        state = state.apply_reception(&targets, &outcomes)?;
        slots += 1;
        if record {
            transcript.push(Transmission {
                packets: clique.packets().to_vec(),
                targeted_primary: clique.targeted_primary().to_vec(),
                targeted_secondary: clique.targeted_secondary().to_vec(),
                received: targets.iter().zip(&outcomes).filter(|(_, &ok)| ok).map(|(&(r, _), _)| r).collect(),
            });
        }
    }
    Ok(CompletionRecord { delay: slots, transcript, truncated: !state.is_complete() })
}

/// Profiles and initial-phase state of trial `trial`.
pub fn trial_frame(config: &SimConfig, trial: u64) -> Result<FrameState> {
    let mut setup = trial_rng(config.master_seed, trial, SETUP_STREAM);
    let profiles = draw_profiles(
        config.receivers,
        config.frame_size,
        config.mean_erasure,
        config.mean_demand,
        config.heterogeneity,
        &mut setup,
    )?;
    init_frame(profiles, config.frame_size, &mut setup)
}

fn simulate(config: &SimConfig, trial: u64, record: bool) -> Result<CompletionRecord> {
    let state = trial_frame(config, trial)?;
    let mut channel = trial_rng(config.master_seed, trial, CHANNEL_STREAM);
    let max_slots = config.max_slots();
    let mut rec = if config.policy == PolicyKind::PerfectRnc {
        let delay = rnc_completion_delay(&state, &mut channel)?;
        CompletionRecord { delay: delay.min(max_slots), transcript: Vec::new(), truncated: delay > max_slots }
    } else {
        let rng = trial_rng(config.master_seed, trial, POLICY_STREAM);
        let mut selector = PolicySelector::new(config.policy, config.options, rng)?;
        run_recovery(state, &mut selector, &mut channel, max_slots, record)?
    };
    if config.include_initial {
        rec.delay += config.frame_size;
    }
    Ok(rec)
}

/// One trial with its full transcript.
pub fn run_trial(config: &SimConfig, trial: u64) -> Result<CompletionRecord> {
    config.validate()?;
    simulate(config, trial, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    /// Mean delay over completed (non-truncated) trials.
    pub mean_delay: f64,
    pub stderr: f64,
    pub trials: u64,
    pub truncated: u64,
}

/// Exact integer moments of a delay sample; merging is order independent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DelayStats {
    pub count: u64,
    pub sum: u64,
    pub sum_sq: u128,
    pub truncated: u64,
}

impl DelayStats {
    pub fn push(&mut self, record: &CompletionRecord) {
        if record.truncated {
            self.truncated += 1;
        } else {
            self.count += 1;
            self.sum += record.delay as u64;
            self.sum_sq += (record.delay as u128).pow(2);
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.truncated += other.truncated;
        self
    }

    pub fn summary(&self) -> ExperimentSummary {
        let n = self.count;
        let mean = if n == 0 { f64::NAN } else { self.sum as f64 / n as f64 };
        let stderr = if n > 1 {
            // n * sum_sq - sum^2 is exact in integers
            let spread = n as u128 * self.sum_sq - (self.sum as u128).pow(2);
            (spread as f64 / (n as f64 * (n - 1) as f64) / n as f64).sqrt()
        } else {
            0.0
        };
        ExperimentSummary { mean_delay: mean, stderr, trials: n + self.truncated, truncated: self.truncated }
    }
}

/// Runs `config.trials` trials on the current rayon pool.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let stats = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut s = DelayStats::default();
            s.push(&simulate(config, t, false)?);
            Ok(s)
        })
        .try_reduce(DelayStats::default, |a, b| Ok(a.merge(b)))?;
    Ok(stats.summary())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Axis {
    Mu,
    Receivers,
    FrameSize,
    Erasure,
}

impl Axis {
    pub fn is_integer(self) -> bool {
        matches!(self, Axis::Receivers | Axis::FrameSize)
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut c = base.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidConfig(format!("{self} must be a positive integer, got {value}")))
            }
        };
        match self {
            Axis::Mu => c.mean_demand = value,
            Axis::Receivers => c.receivers = count()?,
            Axis::FrameSize => c.frame_size = count()?,
            Axis::Erasure => c.mean_erasure = value,
        }
        Ok(c)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Mu => "mu",
            Axis::Receivers => "M",
            Axis::FrameSize => "N",
            Axis::Erasure => "p",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mu" => Ok(Axis::Mu),
            "M" => Ok(Axis::Receivers),
            "N" => Ok(Axis::FrameSize),
            "p" => Ok(Axis::Erasure),
            other => Err(Error::InvalidConfig(format!("unknown axis {other:?}, expected mu, M, N or p"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    pub policy: PolicyKind,
    pub summary: ExperimentSummary,
    pub seed: u64,
}

/// Every `(value, policy)` cell, value-major, all with `base.master_seed`.
pub fn run_sweep(base: &SimConfig, axis: Axis, values: &[f64], policies: &[PolicyKind]) -> Result<Vec<SweepRow>> {
    if values.is_empty() || policies.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value and one policy".into()));
    }
    let mut cells = Vec::with_capacity(values.len() * policies.len());
    for &value in values {
        let at_value = axis.apply(base, value)?;
        for &policy in policies {
            let config = SimConfig { policy, ..at_value.clone() };
            config.validate()?;
            cells.push((value, config));
        }
    }
    cells
        .into_iter()
        .map(|(value, config)| {
            Ok(SweepRow {
                axis,
                value,
                policy: config.policy,
                summary: run_experiment(&config)?,
                seed: config.master_seed,
            })
        })
        .collect()
}
