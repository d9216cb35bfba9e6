//! Property tests for the frame model and graph construction along random
//! recovery trajectories.

use idnc_core::policies::{select_random, CliqueSelector};
use idnc_core::{Cell, Clique, FrameState, IdncGraph, Layer, Vertex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_state() -> impl Strategy<Value = FrameState> {
    (1..=6usize, 1..=6usize)
        .prop_flat_map(|(m, n)| {
            (
                prop::collection::vec(prop::collection::vec(prop::sample::select(vec![0i8, 1, 1, -1]), n), m),
                prop::collection::vec(0.2..=1.0f64, m),
            )
        })
        .prop_map(|(mut rows, q)| {
            for row in &mut rows {
                if row.iter().all(|&c| c == -1) {
                    row[0] = 0;
                }
            }
            FrameState::from_rows(&rows, &q).unwrap()
        })
}

fn check_cached_counts(s: &FrameState) {
    for r in 0..s.receivers() {
        let row = s.sfm().row(r);
        let has = row.iter().filter(|&&c| c == Cell::Has).count();
        let wants = row.iter().filter(|&&c| c == Cell::Wants).count();
        let unwanted = row.iter().filter(|&&c| c == Cell::Unwanted).count();
        assert_eq!(has + wants + unwanted, s.packets());
        assert_eq!(s.has_sizes()[r], has);
        assert_eq!(s.wants_sizes()[r], wants);
        assert_eq!(s.lacks_sizes()[r], wants + unwanted);
        assert_eq!(s.has_sizes()[r] + s.lacks_sizes()[r], s.packets());
    }
}

fn check_graph(s: &FrameState, g: &IdncGraph) {
    let expected: usize = (0..s.receivers()).filter(|&r| s.wants_sizes()[r] > 0).map(|r| s.lacks_sizes()[r]).sum();
    assert_eq!(g.len(), expected);
    for (a, u) in g.vertices().iter().enumerate() {
        let cell = s.sfm().get(u.receiver, u.packet);
        assert_eq!(u.layer == Layer::Primary, cell == Cell::Wants);
        assert_eq!(u.layer == Layer::Secondary, cell == Cell::Unwanted);
        for (b, v) in g.vertices().iter().enumerate() {
            let rule = u.receiver != v.receiver
                && (u.packet == v.packet || (s.has(v.receiver, u.packet) && s.has(u.receiver, v.packet)));
            assert_eq!(g.adjacent_idx(a, b), rule, "{u:?} {v:?}");
            assert_eq!(g.adjacent_idx(a, b), g.adjacent_idx(b, a));
        }
    }
    if s.is_broadcast() {
        assert!(g.secondary_mask().is_clear());
    }
}

struct Random(ChaCha8Rng);

impl CliqueSelector for Random {
    fn select(&mut self, s: &FrameState) -> idnc_core::Result<Clique> {
        select_random(&IdncGraph::build(s), &mut self.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn trajectories_keep_every_invariant(s in arb_state(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut selector = Random(ChaCha8Rng::seed_from_u64(seed ^ 1));
        let mut state = s;
        let q = state.success_probs();
        for _ in 0..200 {
            check_cached_counts(&state);
            let g = IdncGraph::build(&state);
            check_graph(&state, &g);
            if state.is_complete() {
                prop_assert_eq!(g.primary_count(), 0);
                break;
            }
            let c = selector.select(&state).unwrap();
            c.check_decodable(&state).unwrap();
            let targets = c.targets();
            let outcomes: Vec<bool> = targets.iter().map(|&(r, _)| rng.gen_bool(q[r])).collect();
            let next = state.apply_reception(&targets, &outcomes).unwrap();
            for r in 0..state.receivers() {
                for p in 0..state.packets() {
                    // Has sets never shrink
                    if state.has(r, p) {
                        prop_assert!(next.has(r, p));
                    }
                }
                let targeted = targets.iter().position(|&(tr, _)| tr == r);
                match targeted {
                    Some(k) if outcomes[k] => {
                        let p = targets[k].1;
                        prop_assert!(next.has(r, p));
                        let was_wanted = state.sfm().get(r, p) == Cell::Wants;
                        prop_assert_eq!(next.wants_sizes()[r] + usize::from(was_wanted), state.wants_sizes()[r]);
                    }
                    _ => prop_assert_eq!(next.sfm().row(r), state.sfm().row(r)),
                }
            }
            state = next;
        }
    }

    #[test]
    fn graph_dump_lists_every_vertex(s in arb_state()) {
        let g = IdncGraph::build(&s);
        let dump = g.dump();
        prop_assert_eq!(dump.lines().count(), g.len());
        for (line, v) in dump.lines().zip(g.vertices()) {
            let head = format!("r{}:p{}:{} ->", v.receiver, v.packet, v.layer.as_str());
            prop_assert!(line.starts_with(&head));
        }
    }
}

#[test]
fn reception_examples() {
    let s = FrameState::from_rows(&[&[0, 1], &[1, 0]], &[0.5, 0.5]).unwrap();
    let both = s.apply_reception(&[(0, 1), (1, 0)], &[true, true]).unwrap();
    assert_eq!(both.sfm().to_codes(), vec![vec![0, 0], vec![0, 0]]);
    assert!(both.is_complete());
    let one = s.apply_reception(&[(0, 1), (1, 0)], &[true, false]).unwrap();
    assert_eq!(one.sfm().to_codes(), vec![vec![0, 0], vec![1, 0]]);
    // the input state is a value and is left untouched
    assert_eq!(s.sfm().to_codes(), vec![vec![0, 1], vec![1, 0]]);
    let g = IdncGraph::build(&s);
    assert!(g.adjacent(&Vertex::primary(0, 1), &Vertex::primary(1, 0)));
}
