//! Exact maximum-weight clique search.
//!
//! Depth-first branch and bound over vertex indices in ascending order,
//! always trying "include v" before "exclude v". Because of that order the
//! first optimum found is the lexicographically smallest one, so a later
//! candidate only replaces the incumbent when it is strictly better: heavier,
//! or equally heavy and larger. Upper bounds come from a greedy colouring of
//! the candidate set into independent classes, each contributing its heaviest
//! vertex.

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    /// Largest candidate set the exact search accepts.
    pub max_vertices: usize,
    /// Expanded search nodes before giving up.
    pub max_nodes: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_vertices: 200, max_nodes: 10_000_000 }
    }
}

/// Result of an exact search: members in ascending index order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedClique {
    pub members: Vec<usize>,
    pub weight: f64,
}

/// Relative tolerance under which two clique weights count as tied.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

fn tolerance(w: f64) -> f64 {
    WEIGHT_TOLERANCE * w.abs().max(1.0)
}

/// Maximum-weight clique among `candidates`. Weights must be non-negative.
/// Ties prefer more vertices, then the lexicographically smallest index list.
pub fn max_weight_clique(
    adjacency: &[FixedBitSet],
    candidates: &FixedBitSet,
    weights: &[f64],
    limits: SearchLimits,
) -> Result<WeightedClique> {
    let size = candidates.count_ones(..);
    if size > limits.max_vertices {
        return Err(Error::SizeBoundExceeded { size, bound: limits.max_vertices });
    }
    debug_assert!(weights.iter().all(|w| *w >= 0.0));
    let mut search =
        Search { adjacency, weights, max_nodes: limits.max_nodes, nodes: 0, current: Vec::new(), best: None };
    search.expand(candidates.clone(), 0.0)?;
    let (members, weight) = search.best.unwrap_or((Vec::new(), 0.0));
    Ok(WeightedClique { members, weight })
}

struct Search<'a> {
    adjacency: &'a [FixedBitSet],
    weights: &'a [f64],
    max_nodes: u64,
    nodes: u64,
    current: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
}

impl Search<'_> {
    /// Could a clique of (at most) this weight and size replace the incumbent?
    fn can_beat(&self, weight: f64, size: usize) -> bool {
        match &self.best {
            None => true,
            Some((members, best)) => {
                let tol = tolerance(*best);
                weight > best + tol || (weight >= best - tol && size > members.len())
            }
        }
    }

    fn expand(&mut self, candidates: FixedBitSet, weight: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(Error::SearchBudgetExceeded(self.max_nodes));
        }
        if candidates.is_clear() {
            if self.can_beat(weight, self.current.len()) {
                self.best = Some((self.current.clone(), weight));
            }
            return Ok(());
        }

        let mut classes = Coloring::new(self.adjacency, self.weights, &candidates);
        if !self.can_beat(weight + classes.bound(), self.current.len() + classes.live()) {
            return Ok(());
        }

        let mut remaining = candidates;
        let order: Vec<usize> = remaining.ones().collect();
        for v in order {
            if !self.can_beat(weight + classes.bound(), self.current.len() + classes.live()) {
                break;
            }
            remaining.set(v, false);
            let mut next = remaining.clone();
            next.intersect_with(&self.adjacency[v]);
            self.current.push(v);
            self.expand(next, weight + self.weights[v])?;
            self.current.pop();
            classes.remove(v);
        }
        Ok(())
    }
}

/// Greedy colouring of a candidate set into independent classes. Each class
/// keeps its vertices sorted by decreasing weight so removing vertices lowers
/// the bound incrementally.
struct Coloring<'a> {
    classes: Vec<Vec<usize>>,
    head: Vec<usize>,
    class_of: Vec<(usize, usize)>,
    removed: FixedBitSet,
    weights: &'a [f64],
}

impl<'a> Coloring<'a> {
    fn new(adjacency: &[FixedBitSet], weights: &'a [f64], candidates: &FixedBitSet) -> Self {
        let mut order: Vec<usize> = candidates.ones().collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut masks: Vec<FixedBitSet> = Vec::new();
        for v in order {
            match masks.iter().position(|mask| !mask.contains(v)) {
                Some(c) => {
                    classes[c].push(v);
                    masks[c].union_with(&adjacency[v]);
                }
                None => {
                    classes.push(vec![v]);
                    masks.push(adjacency[v].clone());
                }
            }
        }
        let n = adjacency.len();
        let mut class_of = vec![(usize::MAX, 0); n];
        for (c, members) in classes.iter().enumerate() {
            for (pos, &v) in members.iter().enumerate() {
                class_of[v] = (c, pos);
            }
        }
        Self { head: vec![0; classes.len()], classes, class_of, removed: FixedBitSet::with_capacity(n), weights }
    }

    fn bound(&self) -> f64 {
        self.classes.iter().zip(&self.head).filter_map(|(members, &h)| members.get(h).map(|&v| self.weights[v])).sum()
    }

    fn live(&self) -> usize {
        self.classes.iter().zip(&self.head).filter(|(m, &h)| h < m.len()).count()
    }

    fn remove(&mut self, v: usize) {
        self.removed.insert(v);
        let (c, _) = self.class_of[v];
        let members = &self.classes[c];
        let head = &mut self.head[c];
        while *head < members.len() && self.removed.contains(members[*head]) {
            *head += 1;
        }
    }
}
