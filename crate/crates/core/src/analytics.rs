//! Closed-form expectations of the primary graph under the uniform placement
//! ensemble, and Monte Carlo oracles that sample that ensemble directly.
//!
//! The ensemble fixes the cardinalities `(rho, phi, psi)` and draws each
//! receiver independently: `H_i` uniform among the `rho_i`-subsets of the
//! frame, then `W_i` uniform among the `psi_i`-subsets of its complement.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::IdncGraph;
use crate::model::FrameState;

#[derive(Clone, Debug, PartialEq)]
pub struct CardinalityProfile {
    has: Vec<usize>,
    lacks: Vec<usize>,
    wants: Vec<usize>,
    success: Vec<f64>,
    frame_size: usize,
}

impl CardinalityProfile {
    /// Requires equal lengths, `rho_i <= N`, `psi_i <= N - rho_i` and
    /// `0 < q_i <= 1`.
    pub fn new(has: Vec<usize>, wants: Vec<usize>, success: Vec<f64>, frame_size: usize) -> Result<Self> {
        let m = has.len();
        if m == 0 {
            return Err(Error::NoReceivers);
        }
        if frame_size == 0 {
            return Err(Error::EmptyFrame);
        }
        if wants.len() != m || success.len() != m {
            return Err(Error::InvalidCardinalities(format!(
                "length mismatch: {} has, {} wants, {} success",
                m,
                wants.len(),
                success.len()
            )));
        }
        for i in 0..m {
            if has[i] > frame_size || wants[i] > frame_size - has[i] {
                return Err(Error::InvalidCardinalities(format!(
                    "receiver {i}: rho = {}, psi = {} with N = {frame_size}",
                    has[i], wants[i]
                )));
            }
            if !(success[i] > 0.0 && success[i] <= 1.0) {
                return Err(Error::InvalidCardinalities(format!("receiver {i}: q = {}", success[i])));
            }
        }
        let lacks = has.iter().map(|h| frame_size - h).collect();
        Ok(Self { has, lacks, wants, success, frame_size })
    }

    pub fn from_state(state: &FrameState) -> Result<Self> {
        Self::new(state.has_sizes().to_vec(), state.wants_sizes().to_vec(), state.success_probs(), state.packets())
    }

    pub fn receivers(&self) -> usize {
        self.has.len()
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn has(&self) -> &[usize] {
        &self.has
    }

    pub fn lacks(&self) -> &[usize] {
        &self.lacks
    }

    pub fn wants(&self) -> &[usize] {
        &self.wants
    }

    pub fn success(&self) -> &[f64] {
        &self.success
    }

    fn check_receiver(&self, i: usize) -> Result<()> {
        if i >= self.receivers() {
            return Err(Error::ReceiverOutOfRange { receiver: i, receivers: self.receivers() });
        }
        Ok(())
    }

    /// `N` and `N - 1` as floats; every formula divides by both.
    fn dims(&self) -> Result<(f64, f64)> {
        if self.frame_size < 2 {
            return Err(Error::FrameTooSmall(self.frame_size));
        }
        let n = self.frame_size as f64;
        Ok((n, n - 1.0))
    }
}

/// `E[Delta_i] = sum_{k != i} (psi_k / N) (1 + rho_k rho_i / (N - 1))`.
pub fn expected_degree(profile: &CardinalityProfile, i: usize) -> Result<f64> {
    profile.check_receiver(i)?;
    let (n, n1) = profile.dims()?;
    let rho_i = profile.has[i] as f64;
    Ok((0..profile.receivers())
        .filter(|&k| k != i)
        .map(|k| profile.wants[k] as f64 / n * (1.0 + profile.has[k] as f64 * rho_i / n1))
        .sum())
}

pub fn expected_degrees(profile: &CardinalityProfile) -> Result<Vec<f64>> {
    (0..profile.receivers()).map(|i| expected_degree(profile, i)).collect()
}

/// `E|E| = 1/2 sum_i psi_i E[Delta_i]`.
pub fn expected_edge_count(profile: &CardinalityProfile) -> Result<f64> {
    let degrees = expected_degrees(profile)?;
    Ok(0.5 * profile.wants.iter().zip(&degrees).map(|(&w, d)| w as f64 * d).sum::<f64>())
}

/// `xi_k = psi_k rho_k / (N (N - 1))`.
pub fn xi(profile: &CardinalityProfile, k: usize) -> Result<f64> {
    profile.check_receiver(k)?;
    let (n, n1) = profile.dims()?;
    Ok(profile.wants[k] as f64 * profile.has[k] as f64 / (n * n1))
}

/// `Phi_ik(x) = (q_k / N) (1 + (rho_k - psi_k + 1)(rho_i + x) / (N - 1))`.
pub fn phi(profile: &CardinalityProfile, i: usize, k: usize, x: f64) -> Result<f64> {
    profile.check_receiver(i)?;
    profile.check_receiver(k)?;
    let (n, n1) = profile.dims()?;
    let spread = profile.has[k] as f64 - profile.wants[k] as f64 + 1.0;
    Ok(profile.success[k] / n * (1.0 + spread * (profile.has[i] as f64 + x) / n1))
}

/// `Lambda_ik(x) = q_k psi_k (rho_i + x) / (N (N - 1))`.
pub fn lambda(profile: &CardinalityProfile, i: usize, k: usize, x: f64) -> Result<f64> {
    profile.check_receiver(i)?;
    profile.check_receiver(k)?;
    let (n, n1) = profile.dims()?;
    Ok(profile.success[k] * profile.wants[k] as f64 * (profile.has[i] as f64 + x) / (n * n1))
}

/// Receivers targeted by one transmission, split by layer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TargetSets {
    pub primary: Vec<usize>,
    pub secondary: Vec<usize>,
}

impl TargetSets {
    pub fn new(primary: Vec<usize>, secondary: Vec<usize>) -> Self {
        Self { primary, secondary }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.primary.contains(&i) || self.secondary.contains(&i)
    }

    /// Each receiver at most once, in range, and able to receive a packet of
    /// its layer: a primary target needs `psi >= 1`, a secondary one
    /// `phi > psi`.
    fn validate(&self, profile: &CardinalityProfile) -> Result<()> {
        let mut seen = vec![false; profile.receivers()];
        for (layer, set) in [(0, &self.primary), (1, &self.secondary)] {
            for &i in set {
                profile.check_receiver(i)?;
                if seen[i] {
                    return Err(if layer == 1 && self.primary.contains(&i) {
                        Error::OverlappingTargets(i)
                    } else {
                        Error::DuplicateTarget(i)
                    });
                }
                seen[i] = true;
                let feasible = if layer == 0 { profile.wants[i] >= 1 } else { profile.lacks[i] > profile.wants[i] };
                if !feasible {
                    return Err(Error::InvalidCardinalities(format!(
                        "receiver {i} has no {} packet to be targeted with",
                        if layer == 0 { "wanted" } else { "unwanted lacking" }
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionCoefficients {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub xi: Vec<f64>,
}

pub fn evolution_coefficients(profile: &CardinalityProfile, targets: &TargetSets) -> Result<EvolutionCoefficients> {
    targets.validate(profile)?;
    profile.dims()?;
    let m = profile.receivers();
    let xi_all: Vec<f64> = (0..m).map(|k| xi(profile, k)).collect::<Result<_>>()?;
    let xi_sum: f64 = xi_all.iter().sum();
    // sum_{k in T_sigma, k != i} Lambda_ik(x) - sum_{k in T_rho, k != i} Phi_ik(x)
    let target_terms = |i: usize, x: f64| -> Result<f64> {
        let mut total = 0.0;
        for &k in targets.primary.iter().filter(|&&k| k != i) {
            total -= phi(profile, i, k, x)?;
        }
        for &k in targets.secondary.iter().filter(|&&k| k != i) {
            total += lambda(profile, i, k, x)?;
        }
        Ok(total)
    };
    let mut coeffs = EvolutionCoefficients {
        alpha: Vec::with_capacity(m),
        beta: Vec::with_capacity(m),
        gamma: Vec::with_capacity(m),
        xi: xi_all.clone(),
    };
    for i in 0..m {
        let others = xi_sum - xi_all[i];
        let q = profile.success[i];
        coeffs.alpha.push(q * others + target_terms(i, q)?);
        coeffs.beta.push(target_terms(i, 0.0)?);
        coeffs.gamma.push(others + target_terms(i, 1.0)?);
    }
    Ok(coeffs)
}

/// `E[Delta_i(t+1)]`: `E[Delta_i(t)] + alpha_i` when `i` is targeted,
/// `+ beta_i` otherwise.
pub fn expected_degree_evolution(
    profile: &CardinalityProfile,
    targets: &TargetSets,
    i: usize,
    degree_t: f64,
) -> Result<f64> {
    profile.check_receiver(i)?;
    let c = evolution_coefficients(profile, targets)?;
    Ok(degree_t + if targets.contains(i) { c.alpha[i] } else { c.beta[i] })
}

/// Expected primary edge count one transmission later.
pub fn expected_edge_evolution(
    profile: &CardinalityProfile,
    targets: &TargetSets,
    degrees_t: &[f64],
    edges_t: f64,
) -> Result<f64> {
    if degrees_t.len() != profile.receivers() {
        return Err(Error::InvalidCardinalities(format!(
            "{} degrees for {} receivers",
            degrees_t.len(),
            profile.receivers()
        )));
    }
    let c = evolution_coefficients(profile, targets)?;
    let mut next = edges_t;
    for &i in &targets.primary {
        next -= 0.5 * profile.success[i] * (degrees_t[i] + c.gamma[i]);
    }
    for i in 0..profile.receivers() {
        let coeff = if targets.contains(i) { c.alpha[i] } else { c.beta[i] };
        next += 0.5 * profile.wants[i] as f64 * coeff;
    }
    Ok(next)
}

/// Theorem-style dominance: with `psi_i > psi_h` and `rho_i < rho_h`,
/// receiver `h` has the larger expected degree.
pub fn degree_dominance_check(profile: &CardinalityProfile, i: usize, h: usize) -> Result<bool> {
    profile.check_receiver(i)?;
    profile.check_receiver(h)?;
    if !(profile.wants[i] > profile.wants[h] && profile.has[i] < profile.has[h]) {
        return Err(Error::Precondition(format!(
            "need psi_{i} > psi_{h} and rho_{i} < rho_{h}, got psi = ({}, {}), rho = ({}, {})",
            profile.wants[i], profile.wants[h], profile.has[i], profile.has[h]
        )));
    }
    Ok(expected_degree(profile, h)? > expected_degree(profile, i)?)
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl Estimate {
    /// `|mean - expected| <= max(3 stderr, 1e-9)`.
    pub fn agrees_with(&self, expected: f64) -> bool {
        (self.mean - expected).abs() <= (3.0 * self.stderr).max(1e-9)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let stderr = if self.n > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr, trials: self.n }
    }
}

/// One draw from the uniform placement ensemble as SFM rows.
pub fn sample_placement<R: Rng + ?Sized>(profile: &CardinalityProfile, rng: &mut R) -> Vec<Vec<i8>> {
    let n = profile.frame_size;
    (0..profile.receivers())
        .map(|i| {
            let mut row = vec![-1i8; n];
            let picks = sample(rng, n, profile.has[i] + profile.wants[i]).into_vec();
            // First rho_i picks form a uniform rho_i-subset; the next psi_i a
            // uniform psi_i-subset of its complement.
            let (h, w) = picks.split_at(profile.has[i]);
            h.iter().for_each(|&j| row[j] = 0);
            w.iter().for_each(|&j| row[j] = 1);
            row
        })
        .collect()
}

/// Receivers without wanted packets induce no vertices, so their rows are
/// replaced by all-Has rows; this keeps `rho = psi = 0` profiles, whose
/// rows have no primary packet, representable.
fn primary_graph(profile: &CardinalityProfile, rows: &[Vec<i8>]) -> Result<IdncGraph> {
    let rows: Vec<Vec<i8>> = rows.iter().map(|r| if r.contains(&1) { r.clone() } else { vec![0; r.len()] }).collect();
    let state = FrameState::from_rows(&rows, &profile.success)?;
    Ok(IdncGraph::build(&state))
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    Ok(())
}

/// Mean primary edge count over sampled placements.
pub fn mc_oracle_edge_count<R: Rng + ?Sized>(
    profile: &CardinalityProfile,
    trials: u64,
    rng: &mut R,
) -> Result<Estimate> {
    check_trials(trials)?;
    let mut m = Moments::default();
    for _ in 0..trials {
        let g = primary_graph(profile, &sample_placement(profile, rng))?;
        m.push(g.primary_edge_count() as f64);
    }
    Ok(m.estimate())
}

/// Per receiver, the mean primary degree of its vertices. Receivers with
/// `psi_i = 0` have no vertices and report `None`.
pub fn mc_oracle_degrees<R: Rng + ?Sized>(
    profile: &CardinalityProfile,
    trials: u64,
    rng: &mut R,
) -> Result<Vec<Option<Estimate>>> {
    check_trials(trials)?;
    let m = profile.receivers();
    let mut moments = vec![Moments::default(); m];
    for _ in 0..trials {
        let g = primary_graph(profile, &sample_placement(profile, rng))?;
        let mut sums = vec![0usize; m];
        for v in g.primary_mask().ones() {
            sums[g.vertex(v).receiver] += g.neighbors(v).intersection(g.primary_mask()).count();
        }
        for i in (0..m).filter(|&i| profile.wants[i] > 0) {
            moments[i].push(sums[i] as f64 / profile.wants[i] as f64);
        }
    }
    Ok(moments.iter().zip(&profile.wants).map(|(mo, &w)| (w > 0).then(|| mo.estimate())).collect())
}

/// Mean primary edge count after one transmission.
///
/// Each targeted receiver, with probability `q_i`, moves one uniformly chosen
/// packet of its layer into `H_i`: a wanted packet for primary targets, an
/// unwanted lacking packet for secondary ones.
pub fn mc_oracle_edge_evolution<R: Rng + ?Sized>(
    profile: &CardinalityProfile,
    targets: &TargetSets,
    trials: u64,
    rng: &mut R,
) -> Result<Estimate> {
    check_trials(trials)?;
    targets.validate(profile)?;
    let mut m = Moments::default();
    for _ in 0..trials {
        let mut rows = sample_placement(profile, rng);
        for (code, set) in [(1i8, &targets.primary), (-1i8, &targets.secondary)] {
            for &i in set {
                if rng.gen_bool(profile.success[i]) {
                    let pool: Vec<usize> = (0..profile.frame_size).filter(|&j| rows[i][j] == code).collect();
                    let j = pool[rng.gen_range(0..pool.len())];
                    rows[i][j] = 0;
                }
            }
        }
        m.push(primary_graph(profile, &rows)?.primary_edge_count() as f64);
    }
    Ok(m.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile(has: &[usize], wants: &[usize], q: &[f64], n: usize) -> CardinalityProfile {
        CardinalityProfile::new(has.to_vec(), wants.to_vec(), q.to_vec(), n).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn degree_and_edges_on_small_profiles() {
        let p = profile(&[1, 1], &[1, 1], &[1.0, 1.0], 2);
        assert!(close(expected_degree(&p, 0).unwrap(), 1.0));
        assert!(close(expected_edge_count(&p).unwrap(), 1.0));
        let p = profile(&[2, 2, 2], &[1, 1, 1], &[1.0; 3], 3);
        assert!(close(expected_degree(&p, 0).unwrap(), 2.0));
        assert!(close(expected_edge_count(&p).unwrap(), 3.0));
        let p = profile(&[0, 3, 3], &[2, 0, 0], &[0.5; 3], 3);
        assert_eq!(expected_degree(&p, 0).unwrap(), 0.0);
        let p = profile(&[3, 3], &[0, 0], &[0.5; 2], 3);
        assert_eq!(expected_edge_count(&p).unwrap(), 0.0);
    }

    #[test]
    fn frame_of_one_is_rejected() {
        let p = profile(&[0], &[1], &[0.5], 1);
        assert_eq!(expected_degree(&p, 0), Err(Error::FrameTooSmall(1)));
        assert_eq!(expected_edge_count(&p), Err(Error::FrameTooSmall(1)));
        assert!(matches!(evolution_coefficients(&p, &TargetSets::default()), Err(Error::FrameTooSmall(1))));
    }

    #[test]
    fn profile_validation() {
        assert!(CardinalityProfile::new(vec![1], vec![2], vec![0.5], 2).is_err());
        assert!(CardinalityProfile::new(vec![3], vec![0], vec![0.5], 2).is_err());
        assert!(CardinalityProfile::new(vec![0], vec![1], vec![0.0], 2).is_err());
        assert!(CardinalityProfile::new(vec![0, 1], vec![1], vec![0.5], 2).is_err());
        assert_eq!(CardinalityProfile::new(vec![], vec![], vec![], 2), Err(Error::NoReceivers));
    }

    #[test]
    fn kernels_by_substitution() {
        let p = profile(&[1, 1], &[1, 1], &[0.5, 0.5], 2);
        assert!(close(xi(&p, 1).unwrap(), 0.5));
        assert!(close(phi(&p, 0, 1, 0.0).unwrap(), 0.5));
        // q_k psi_k (rho_i + x) / (N (N - 1)) = 0.5 * 1 * 1.5 / 2
        assert!(close(lambda(&p, 0, 1, 0.5).unwrap(), 0.375));
    }

    #[test]
    fn empty_targets_leave_beta_zero_and_edges_unchanged() {
        let p = profile(&[1, 2, 0], &[2, 1, 3], &[0.7, 0.9, 0.6], 4);
        let c = evolution_coefficients(&p, &TargetSets::default()).unwrap();
        assert!(c.beta.iter().all(|&b| b == 0.0));
        let d = expected_degrees(&p).unwrap();
        let e = expected_edge_count(&p).unwrap();
        assert_eq!(expected_edge_evolution(&p, &TargetSets::default(), &d, e).unwrap(), e);
        assert_eq!(expected_degree_evolution(&p, &TargetSets::default(), 1, d[1]).unwrap(), d[1]);
    }

    #[test]
    fn target_validation() {
        let p = profile(&[1, 1, 0], &[1, 0, 3], &[0.5; 3], 3);
        let overlap = TargetSets::new(vec![0], vec![0]);
        assert_eq!(evolution_coefficients(&p, &overlap), Err(Error::OverlappingTargets(0)));
        let dup = TargetSets::new(vec![0, 0], vec![]);
        assert_eq!(evolution_coefficients(&p, &dup), Err(Error::DuplicateTarget(0)));
        // receiver 1 wants nothing; receiver 2 lacks only wanted packets
        assert!(evolution_coefficients(&p, &TargetSets::new(vec![1], vec![])).is_err());
        assert!(evolution_coefficients(&p, &TargetSets::new(vec![], vec![2])).is_err());
        assert!(evolution_coefficients(&p, &TargetSets::new(vec![5], vec![])).is_err());
    }

    #[test]
    fn lossless_secondary_targets_use_unit_kernels() {
        // With q = 1, alpha_i = gamma_i for any targeting.
        let p = profile(&[1, 1, 2], &[1, 1, 1], &[1.0; 3], 4);
        let t = TargetSets::new(vec![0], vec![1, 2]);
        let c = evolution_coefficients(&p, &t).unwrap();
        for i in 0..3 {
            assert!(close(c.alpha[i], c.gamma[i]));
        }
    }

    #[test]
    fn dominance_examples() {
        let p = profile(&[0, 1], &[2, 1], &[0.5; 2], 3);
        assert!(degree_dominance_check(&p, 0, 1).unwrap());
        let p = profile(&[0, 2, 1], &[3, 1, 2], &[0.5; 3], 4);
        assert!(degree_dominance_check(&p, 0, 1).unwrap());
        assert!(matches!(degree_dominance_check(&p, 1, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn placement_respects_cardinalities() {
        let p = profile(&[2, 0, 3], &[1, 4, 0], &[0.5; 3], 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rows = sample_placement(&p, &mut rng);
            for (i, row) in rows.iter().enumerate() {
                assert_eq!(row.iter().filter(|&&c| c == 0).count(), p.has()[i]);
                assert_eq!(row.iter().filter(|&&c| c == 1).count(), p.wants()[i]);
            }
        }
    }

    #[test]
    fn deterministic_oracle_cases() {
        let p = profile(&[1, 1], &[1, 1], &[1.0, 1.0], 2);
        let e = mc_oracle_edge_count(&p, 1000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
        let p = profile(&[1, 2], &[0, 0], &[1.0, 1.0], 3);
        let e = mc_oracle_edge_count(&p, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(e.mean, 0.0);
        assert!(mc_oracle_edge_count(&p, 0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
