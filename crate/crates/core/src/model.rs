//! Frame, receivers and the state feedback matrix.
//!
//! A [`FrameState`] is an immutable value: every transition returns a new
//! state, so the exact solver and the simulator share one transition path.

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// Status of one packet at one receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    /// Received (code `0`).
    Has,
    /// Missing and requested (code `1`).
    Wants,
    /// Missing and not requested (code `-1`).
    Unwanted,
}

impl Cell {
    pub fn code(self) -> i8 {
        match self {
            Cell::Has => 0,
            Cell::Wants => 1,
            Cell::Unwanted => -1,
        }
    }

    pub fn from_code(code: i8) -> Result<Self> {
        match code {
            0 => Ok(Cell::Has),
            1 => Ok(Cell::Wants),
            -1 => Ok(Cell::Unwanted),
            other => Err(Error::InvalidMatrix(format!("entry {other} not in {{-1, 0, 1}}"))),
        }
    }

    pub fn is_lacking(self) -> bool {
        self != Cell::Has
    }
}

/// Number of primary packets for a demand ratio: `max(1, round(mu * N))`.
pub fn primary_count(demand_ratio: f64, frame_size: usize) -> usize {
    ((demand_ratio * frame_size as f64).round() as usize).clamp(1, frame_size)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverProfile {
    erasure_prob: f64,
    success_prob: f64,
    demand_ratio: f64,
    primary_packets: Vec<usize>,
}

impl ReceiverProfile {
    /// Builds a profile from an explicit primary packet set.
    ///
    /// `erasure_prob` must lie in `[0, 1)`; zero configures an erasure-free
    /// receiver.
    pub fn new(erasure_prob: f64, primary_packets: impl IntoIterator<Item = usize>, frame_size: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&erasure_prob) {
            return Err(Error::InvalidProfile(format!("erasure probability {erasure_prob} outside [0, 1)")));
        }
        Self::build(erasure_prob, primary_packets, frame_size)
    }

    /// Samples the primary set uniformly with `max(1, round(mu * N))` packets.
    pub fn with_demand<R: Rng + ?Sized>(
        erasure_prob: f64,
        demand_ratio: f64,
        frame_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if !(demand_ratio > 0.0 && demand_ratio <= 1.0) {
            return Err(Error::InvalidProfile(format!("demand ratio {demand_ratio} outside (0, 1]")));
        }
        if frame_size == 0 {
            return Err(Error::EmptyFrame);
        }
        let count = primary_count(demand_ratio, frame_size);
        let primaries = if count == frame_size {
            (0..frame_size).collect()
        } else {
            index::sample(rng, frame_size, count).into_vec()
        };
        Self::new(erasure_prob, primaries, frame_size)
    }

    /// Receiver that wants the whole frame.
    pub fn broadcast(erasure_prob: f64, frame_size: usize) -> Result<Self> {
        Self::new(erasure_prob, 0..frame_size, frame_size)
    }

    /// Receiver that never hears anything. Only meant for deterministic
    /// fixtures; states containing it reject [`FrameState::weighted_wants`].
    #[doc(hidden)]
    pub fn forced_loss(primary_packets: impl IntoIterator<Item = usize>, frame_size: usize) -> Result<Self> {
        Self::build(1.0, primary_packets, frame_size)
    }

    fn build(erasure_prob: f64, primary_packets: impl IntoIterator<Item = usize>, frame_size: usize) -> Result<Self> {
        if frame_size == 0 {
            return Err(Error::EmptyFrame);
        }
        let mut primary_packets: Vec<usize> = primary_packets.into_iter().collect();
        primary_packets.sort_unstable();
        primary_packets.dedup();
        if primary_packets.is_empty() {
            return Err(Error::InvalidProfile("empty primary packet set".into()));
        }
        if let Some(&packet) = primary_packets.iter().find(|&&p| p >= frame_size) {
            return Err(Error::PacketOutOfRange { packet, packets: frame_size });
        }
        Ok(Self {
            erasure_prob,
            success_prob: 1.0 - erasure_prob,
            demand_ratio: primary_packets.len() as f64 / frame_size as f64,
            primary_packets,
        })
    }

    pub fn erasure_prob(&self) -> f64 {
        self.erasure_prob
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }

    pub fn demand_ratio(&self) -> f64 {
        self.demand_ratio
    }

    /// Sorted primary packet indices.
    pub fn primary_packets(&self) -> &[usize] {
        &self.primary_packets
    }

    pub fn is_primary(&self, packet: usize) -> bool {
        self.primary_packets.binary_search(&packet).is_ok()
    }

    pub fn wants_whole_frame(&self, frame_size: usize) -> bool {
        self.primary_packets.len() == frame_size
    }
}

/// The M x N state feedback matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FeedbackMatrix {
    receivers: usize,
    packets: usize,
    cells: Vec<Cell>,
}

impl FeedbackMatrix {
    pub fn new(receivers: usize, packets: usize, cells: Vec<Cell>) -> Result<Self> {
        if receivers == 0 {
            return Err(Error::NoReceivers);
        }
        if packets == 0 {
            return Err(Error::EmptyFrame);
        }
        if cells.len() != receivers * packets {
            return Err(Error::InvalidMatrix(format!("{} entries for a {receivers}x{packets} matrix", cells.len())));
        }
        Ok(Self { receivers, packets, cells })
    }

    /// Parses rows of `{-1, 0, 1}` codes.
    pub fn from_rows<R: AsRef<[i8]>>(rows: &[R]) -> Result<Self> {
        let packets = rows.first().map_or(0, |r| r.as_ref().len());
        let mut cells = Vec::with_capacity(rows.len() * packets);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != packets {
                return Err(Error::InvalidMatrix(format!("row {i} has {} entries, expected {packets}", row.len())));
            }
            for &code in row {
                cells.push(Cell::from_code(code)?);
            }
        }
        Self::new(rows.len(), packets, cells)
    }

    pub fn receivers(&self) -> usize {
        self.receivers
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    #[inline]
    pub fn get(&self, receiver: usize, packet: usize) -> Cell {
        self.cells[receiver * self.packets + packet]
    }

    pub fn row(&self, receiver: usize) -> &[Cell] {
        &self.cells[receiver * self.packets..(receiver + 1) * self.packets]
    }

    pub fn to_codes(&self) -> Vec<Vec<i8>> {
        (0..self.receivers).map(|i| self.row(i).iter().map(|c| c.code()).collect()).collect()
    }

    fn set(&mut self, receiver: usize, packet: usize, cell: Cell) {
        self.cells[receiver * self.packets + packet] = cell;
    }
}

impl fmt::Debug for FeedbackMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_codes()).finish()
    }
}

/// Feedback matrix plus receiver profiles and the cached Has/Lacks/Wants
/// cardinalities.
#[derive(Clone, Debug)]
pub struct FrameState {
    sfm: FeedbackMatrix,
    profiles: Arc<[ReceiverProfile]>,
    has: Vec<usize>,
    lacks: Vec<usize>,
    wants: Vec<usize>,
}

impl PartialEq for FrameState {
    fn eq(&self, other: &Self) -> bool {
        self.sfm == other.sfm && self.profiles == other.profiles
    }
}

impl FrameState {
    /// Validates that every wanted packet is primary for its receiver.
    pub fn new(sfm: FeedbackMatrix, profiles: impl Into<Arc<[ReceiverProfile]>>) -> Result<Self> {
        let profiles = profiles.into();
        if profiles.len() != sfm.receivers() {
            return Err(Error::InvalidMatrix(format!("{} profiles for {} receivers", profiles.len(), sfm.receivers())));
        }
        for (i, profile) in profiles.iter().enumerate() {
            if let Some(&p) = profile.primary_packets().last() {
                if p >= sfm.packets() {
                    return Err(Error::PacketOutOfRange { packet: p, packets: sfm.packets() });
                }
            }
            for j in 0..sfm.packets() {
                let primary = profile.is_primary(j);
                match sfm.get(i, j) {
                    Cell::Wants if !primary => {
                        return Err(Error::InvalidMatrix(format!("receiver {i} wants non-primary packet {j}")))
                    }
                    Cell::Unwanted if primary => {
                        return Err(Error::InvalidMatrix(format!("receiver {i} marks primary packet {j} as unwanted")))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self::with_counts(sfm, profiles))
    }

    /// Builds a state from code rows and per-receiver success probabilities.
    ///
    /// The primary set of each receiver is every packet not marked `-1`.
    pub fn from_rows<R: AsRef<[i8]>>(rows: &[R], success_probs: &[f64]) -> Result<Self> {
        let sfm = FeedbackMatrix::from_rows(rows)?;
        if success_probs.len() != sfm.receivers() {
            return Err(Error::InvalidMatrix(format!(
                "{} success probabilities for {} receivers",
                success_probs.len(),
                sfm.receivers()
            )));
        }
        let profiles = success_probs
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                let primaries = (0..sfm.packets()).filter(|&j| sfm.get(i, j) != Cell::Unwanted);
                if q == 0.0 {
                    ReceiverProfile::forced_loss(primaries, sfm.packets())
                } else if q > 0.0 && q <= 1.0 {
                    ReceiverProfile::new(1.0 - q, primaries, sfm.packets())
                } else {
                    Err(Error::InvalidProfile(format!("success probability {q} outside (0, 1]")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sfm, profiles)
    }

    fn with_counts(sfm: FeedbackMatrix, profiles: Arc<[ReceiverProfile]>) -> Self {
        let m = sfm.receivers();
        let mut has = vec![0; m];
        let mut wants = vec![0; m];
        for i in 0..m {
            for cell in sfm.row(i) {
                match cell {
                    Cell::Has => has[i] += 1,
                    Cell::Wants => wants[i] += 1,
                    Cell::Unwanted => {}
                }
            }
        }
        let lacks = has.iter().map(|h| sfm.packets() - h).collect();
        Self { sfm, profiles, has, lacks, wants }
    }

    pub fn sfm(&self) -> &FeedbackMatrix {
        &self.sfm
    }

    pub fn profiles(&self) -> &[ReceiverProfile] {
        &self.profiles
    }

    pub fn receivers(&self) -> usize {
        self.sfm.receivers()
    }

    pub fn packets(&self) -> usize {
        self.sfm.packets()
    }

    /// Has vector.
    pub fn has_sizes(&self) -> &[usize] {
        &self.has
    }

    /// Lacks vector.
    pub fn lacks_sizes(&self) -> &[usize] {
        &self.lacks
    }

    /// Wants vector.
    pub fn wants_sizes(&self) -> &[usize] {
        &self.wants
    }

    #[inline]
    pub fn has(&self, receiver: usize, packet: usize) -> bool {
        self.sfm.get(receiver, packet) == Cell::Has
    }

    pub fn success_probs(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.success_prob()).collect()
    }

    /// True once every Wants set is empty; unwanted missing packets do not
    /// block completion.
    pub fn is_complete(&self) -> bool {
        self.wants.iter().all(|&w| w == 0)
    }

    pub fn is_broadcast(&self) -> bool {
        self.profiles.iter().all(|p| p.wants_whole_frame(self.packets()))
    }

    /// Channel-weighted Wants vector `psi_i / q_i`.
    pub fn weighted_wants(&self) -> Result<Vec<f64>> {
        self.profiles
            .iter()
            .zip(&self.wants)
            .enumerate()
            .map(|(i, (profile, &w))| {
                let q = profile.success_prob();
                if q <= 0.0 {
                    Err(Error::ZeroSuccessProbability(i))
                } else {
                    Ok(w as f64 / q)
                }
            })
            .collect()
    }

    /// Applies the reception outcomes of one transmission.
    ///
    /// `targets[k] = (receiver, packet)` is the packet receiver `k` would
    /// decode; `outcomes[k]` says whether it heard the transmission.
    pub fn apply_reception(&self, targets: &[(usize, usize)], outcomes: &[bool]) -> Result<Self> {
        if targets.len() != outcomes.len() {
            return Err(Error::OutcomeMismatch { targets: targets.len(), outcomes: outcomes.len() });
        }
        let mut seen = vec![false; self.receivers()];
        for &(receiver, packet) in targets {
            if receiver >= self.receivers() {
                return Err(Error::ReceiverOutOfRange { receiver, receivers: self.receivers() });
            }
            if packet >= self.packets() {
                return Err(Error::PacketOutOfRange { packet, packets: self.packets() });
            }
            if std::mem::replace(&mut seen[receiver], true) {
                return Err(Error::DuplicateTarget(receiver));
            }
            if self.has(receiver, packet) {
                return Err(Error::AlreadyHas { receiver, packet });
            }
        }
        let mut next = self.clone();
        for (&(receiver, packet), &received) in targets.iter().zip(outcomes) {
            if !received {
                continue;
            }
            if next.sfm.get(receiver, packet) == Cell::Wants {
                next.wants[receiver] -= 1;
            }
            next.sfm.set(receiver, packet, Cell::Has);
            next.has[receiver] += 1;
            next.lacks[receiver] -= 1;
        }
        Ok(next)
    }

    /// Marks a set of (receiver, packet) pairs as received without checks
    /// on targeting; used to materialise solver states.
    pub(crate) fn with_received(&self, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut sfm = self.sfm.clone();
        for (receiver, packet) in pairs {
            sfm.set(receiver, packet, Cell::Has);
        }
        Self::with_counts(sfm, Arc::clone(&self.profiles))
    }
}

/// Initial uncoded transmission of all `N` packets.
///
/// Draws are made receiver by receiver, packet by packet, each a
/// Bernoulli(`q_i`) trial.
pub fn init_frame<R: Rng + ?Sized>(
    profiles: Vec<ReceiverProfile>,
    frame_size: usize,
    rng: &mut R,
) -> Result<FrameState> {
    if frame_size == 0 {
        return Err(Error::EmptyFrame);
    }
    if profiles.is_empty() {
        return Err(Error::NoReceivers);
    }
    let mut cells = Vec::with_capacity(profiles.len() * frame_size);
    for profile in &profiles {
        if let Some(&p) = profile.primary_packets().last() {
            if p >= frame_size {
                return Err(Error::PacketOutOfRange { packet: p, packets: frame_size });
            }
        }
        let q = profile.success_prob();
        for j in 0..frame_size {
            let cell = if rng.gen_bool(q) {
                Cell::Has
            } else if profile.is_primary(j) {
                Cell::Wants
            } else {
                Cell::Unwanted
            };
            cells.push(cell);
        }
    }
    let sfm = FeedbackMatrix::new(profiles.len(), frame_size, cells)?;
    FrameState::new(sfm, profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(rows: &[&[i8]], q: &[f64]) -> FrameState {
        FrameState::from_rows(rows, q).unwrap()
    }

    #[test]
    fn lossless_channel_receives_everything() {
        let profile = ReceiverProfile::new(0.0, [0, 1], 2).unwrap();
        let s = init_frame(vec![profile], 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s.sfm().to_codes(), vec![vec![0, 0]]);
        assert_eq!(s.wants_sizes(), &[0]);
    }

    #[test]
    fn forced_loss_misses_everything() {
        let profiles =
            vec![ReceiverProfile::forced_loss([0], 1).unwrap(), ReceiverProfile::forced_loss([0], 1).unwrap()];
        let s = init_frame(profiles, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s.sfm().to_codes(), vec![vec![1], vec![1]]);
        assert_eq!(s.wants_sizes(), &[1, 1]);
        assert!(s.weighted_wants().is_err());
    }

    #[test]
    fn init_follows_receiver_major_bernoulli_draws() {
        // Find a seed whose hand-replayed draws give receiver 0 packet 0 only
        // and receiver 1 packet 1 only, then check init_frame agrees.
        let q = 0.5;
        let seed = (0u64..)
            .find(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let draws: Vec<bool> = (0..4).map(|_| rng.gen_bool(q)).collect();
                draws == [true, false, false, true]
            })
            .unwrap();
        let profiles =
            vec![ReceiverProfile::broadcast(1.0 - q, 2).unwrap(), ReceiverProfile::broadcast(1.0 - q, 2).unwrap()];
        let s = init_frame(profiles, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(s.sfm().to_codes(), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn init_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(init_frame(vec![], 3, &mut rng), Err(Error::NoReceivers));
        let p = ReceiverProfile::broadcast(0.1, 3).unwrap();
        assert_eq!(init_frame(vec![p.clone()], 0, &mut rng), Err(Error::EmptyFrame));
        assert!(matches!(init_frame(vec![p], 2, &mut rng), Err(Error::PacketOutOfRange { .. })));
        assert!(ReceiverProfile::new(1.0, [0], 1).is_err());
        assert!(ReceiverProfile::new(-0.1, [0], 1).is_err());
        assert!(ReceiverProfile::new(0.1, Vec::<usize>::new(), 1).is_err());
    }

    #[test]
    fn primary_count_rounds_with_floor_of_one() {
        assert_eq!(primary_count(0.01, 10), 1);
        assert_eq!(primary_count(0.5, 30), 15);
        assert_eq!(primary_count(0.55, 5), 3);
        assert_eq!(primary_count(1.0, 7), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ReceiverProfile::with_demand(0.2, 0.34, 9, &mut rng).unwrap();
        assert_eq!(p.primary_packets().len(), 3);
    }

    #[test]
    fn reception_moves_packets_to_has() {
        let s = state(&[&[0, 1], &[1, 0]], &[1.0, 1.0]);
        let both = s.apply_reception(&[(0, 1), (1, 0)], &[true, true]).unwrap();
        assert_eq!(both.sfm().to_codes(), vec![vec![0, 0], vec![0, 0]]);
        assert!(both.is_complete());

        let one = s.apply_reception(&[(0, 1), (1, 0)], &[true, false]).unwrap();
        assert_eq!(one.sfm().to_codes(), vec![vec![0, 0], vec![1, 0]]);
        assert_eq!(one.wants_sizes(), &[0, 1]);
        // input untouched
        assert_eq!(s.sfm().to_codes(), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn secondary_reception_keeps_wants() {
        let s = state(&[&[0, 1], &[-1, 0]], &[1.0, 1.0]);
        let next = s.apply_reception(&[(1, 0)], &[true]).unwrap();
        assert_eq!(next.sfm().get(1, 0), Cell::Has);
        assert_eq!(next.wants_sizes(), s.wants_sizes());
        assert_eq!(next.has_sizes(), &[1, 2]);
    }

    #[test]
    fn reception_rejects_invalid_targets() {
        let s = state(&[&[0, 1], &[1, 0]], &[1.0, 1.0]);
        assert_eq!(s.apply_reception(&[(0, 0)], &[true]), Err(Error::AlreadyHas { receiver: 0, packet: 0 }));
        assert_eq!(s.apply_reception(&[(0, 1), (0, 1)], &[true, true]), Err(Error::DuplicateTarget(0)));
        assert!(matches!(s.apply_reception(&[(0, 1)], &[]), Err(Error::OutcomeMismatch { .. })));
        assert!(matches!(s.apply_reception(&[(5, 1)], &[true]), Err(Error::ReceiverOutOfRange { .. })));
    }

    #[test]
    fn weighted_wants_divides_by_success() {
        let s = state(&[&[1, 1], &[0, 1]], &[0.5, 1.0]);
        assert_eq!(s.weighted_wants().unwrap(), vec![4.0, 1.0]);
        let done = state(&[&[0, 0], &[0, 0]], &[0.3, 0.9]);
        assert_eq!(done.weighted_wants().unwrap(), vec![0.0, 0.0]);
        let three = state(&[&[1, 1, 1]], &[0.75]);
        assert_eq!(three.weighted_wants().unwrap(), vec![4.0]);
    }

    #[test]
    fn completion_ignores_unwanted_entries() {
        assert!(state(&[&[0, 0], &[0, 0]], &[1.0, 1.0]).is_complete());
        assert!(state(&[&[0, 0], &[-1, 0]], &[1.0, 1.0]).is_complete());
        assert!(!state(&[&[0, 1]], &[1.0]).is_complete());
    }

    #[test]
    fn state_rejects_inconsistent_profiles() {
        let sfm = FeedbackMatrix::from_rows(&[[1i8, 0]]).unwrap();
        let p = ReceiverProfile::new(0.1, [1], 2).unwrap();
        assert!(FrameState::new(sfm.clone(), vec![p]).is_err());
        let p = ReceiverProfile::new(0.1, [0], 2).unwrap();
        assert!(FrameState::new(sfm, vec![p]).is_ok());
        assert!(FeedbackMatrix::from_rows(&[vec![0i8, 2]]).is_err());
        assert!(FeedbackMatrix::from_rows(&[vec![0i8, 1], vec![0]]).is_err());
    }
}
