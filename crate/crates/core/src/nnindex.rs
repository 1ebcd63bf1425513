//! Euclidean nearest-neighbor index over embedding vectors.
//!
//! Two backends share one query contract: results are sorted ascending by
//! distance with ties broken by smaller id. The exact backend is a linear scan
//! and answers every query exactly. The graph backend is a navigable
//! small-world graph searched greedily with a beam; it only ever returns true
//! in-radius points, but may miss some of them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{euclidean, Points};
use crate::error::{KernetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphParams {
    pub max_degree: usize,
    pub beam_width: usize,
    pub seed: u64,
}

impl GraphParams {
    pub fn with_seed(seed: u64) -> Self {
        GraphParams {
            max_degree: 16,
            beam_width: 64,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum IndexBackend {
    Exact,
    Graph(GraphParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

impl Neighbor {
    #[inline]
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

// Heap entries ordered by (distance, id).
#[derive(Clone, Copy)]
struct Near(Neighbor);
impl PartialEq for Near {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Near {}
impl PartialOrd for Near {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Near {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
struct Graph {
    adjacency: Vec<Vec<u32>>,
    entry: usize,
    beam_width: usize,
}

#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Points,
    backend: IndexBackend,
    graph: Option<Graph>,
}

pub fn build_index(points: Points, backend: IndexBackend) -> Result<NeighborIndex> {
    if points.is_empty() {
        return Err(KernetError::EmptyInput("index points"));
    }
    let graph = match backend {
        IndexBackend::Exact => None,
        IndexBackend::Graph(params) => {
            if params.max_degree == 0 || params.beam_width == 0 {
                return Err(KernetError::invalid(
                    "graph params",
                    "max_degree and beam_width must be positive",
                ));
            }
            Some(build_graph(&points, params))
        }
    };
    Ok(NeighborIndex {
        points,
        backend,
        graph,
    })
}

impl NeighborIndex {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn backend(&self) -> IndexBackend {
        self.backend
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(KernetError::DimensionMismatch {
                expected: self.dim(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    /// Points within `radius` of `q`, nearest first, at most `cap` of them.
    pub fn query_within(&self, q: &[f64], radius: f64, cap: usize) -> Result<Vec<Neighbor>> {
        self.check_dim(q)?;
        let mut hits = match &self.graph {
            None => self
                .points
                .rows()
                .enumerate()
                .filter_map(|(id, p)| {
                    let distance = euclidean(p, q);
                    (distance <= radius).then_some(Neighbor { id, distance })
                })
                .collect::<Vec<_>>(),
            Some(graph) => {
                let ef = graph.beam_width.max(cap);
                beam_search(&self.points, graph, q, ef)
                    .into_iter()
                    .filter(|n| n.distance <= radius)
                    .collect()
            }
        };
        hits.sort_by(Neighbor::key_cmp);
        hits.truncate(cap);
        Ok(hits)
    }

    /// Nearest stored point; ties go to the smaller id.
    pub fn nearest(&self, q: &[f64]) -> Result<Neighbor> {
        self.check_dim(q)?;
        let best = match &self.graph {
            None => self
                .points
                .rows()
                .enumerate()
                .map(|(id, p)| Neighbor {
                    id,
                    distance: euclidean(p, q),
                })
                .min_by(Neighbor::key_cmp),
            Some(graph) => beam_search(&self.points, graph, q, graph.beam_width)
                .into_iter()
                .min_by(Neighbor::key_cmp),
        };
        best.ok_or(KernetError::EmptyInput("index"))
    }
}

/// Best-first search keeping the `ef` closest points seen. Returned unsorted.
fn beam_search(points: &Points, graph: &Graph, q: &[f64], ef: usize) -> Vec<Neighbor> {
    beam_search_raw(points, &graph.adjacency, graph.entry, q, ef)
}

fn beam_search_raw(
    points: &Points,
    adjacency: &[Vec<u32>],
    entry: usize,
    q: &[f64],
    ef: usize,
) -> Vec<Neighbor> {
    let mut visited = vec![false; adjacency.len()];
    let start = Neighbor {
        id: entry,
        distance: euclidean(points.row(entry), q),
    };
    visited[entry] = true;
    // min-heap of frontier, max-heap of current results
    let mut frontier = BinaryHeap::new();
    frontier.push(std::cmp::Reverse(Near(start)));
    let mut results = BinaryHeap::new();
    results.push(Near(start));

    while let Some(std::cmp::Reverse(Near(cur))) = frontier.pop() {
        let worst = results.peek().map(|w: &Near| w.0).unwrap();
        if results.len() >= ef && cur.key_cmp(&worst) == Ordering::Greater {
            break;
        }
        for &nb in &adjacency[cur.id] {
            let nb = nb as usize;
            if visited[nb] {
                continue;
            }
            visited[nb] = true;
            let cand = Neighbor {
                id: nb,
                distance: euclidean(points.row(nb), q),
            };
            let worst = results.peek().unwrap().0;
            if results.len() < ef || cand.key_cmp(&worst) == Ordering::Less {
                frontier.push(std::cmp::Reverse(Near(cand)));
                results.push(Near(cand));
                if results.len() > ef {
                    results.pop();
                }
            }
        }
    }
    results.into_iter().map(|n| n.0).collect()
}

fn build_graph(points: &Points, params: GraphParams) -> Graph {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let entry = order[0];
    let max_links = 2 * params.max_degree;
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];

    for (inserted, &p) in order.iter().enumerate().skip(1) {
        let _ = inserted;
        let q = points.row(p);
        let mut found = beam_search_raw(points, &adjacency, entry, q, params.beam_width);
        found.sort_by(Neighbor::key_cmp);
        found.truncate(params.max_degree);
        for nb in found {
            adjacency[p].push(nb.id as u32);
            adjacency[nb.id].push(p as u32);
            if adjacency[nb.id].len() > max_links {
                let center = points.row(nb.id);
                let mut links: Vec<Neighbor> = adjacency[nb.id]
                    .iter()
                    .map(|&j| Neighbor {
                        id: j as usize,
                        distance: euclidean(points.row(j as usize), center),
                    })
                    .collect();
                links.sort_by(Neighbor::key_cmp);
                links.truncate(max_links);
                adjacency[nb.id] = links.into_iter().map(|l| l.id as u32).collect();
            }
        }
    }
    Graph {
        adjacency,
        entry,
        beam_width: params.beam_width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(xs: &[f64]) -> Points {
        Points::from_flat(1, xs.to_vec()).unwrap()
    }

    fn brute_within(points: &Points, q: &[f64], radius: f64, cap: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..points.len())
            .map(|i| {
                let d: f64 = points
                    .row(i)
                    .iter()
                    .zip(q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                (i, d)
            })
            .filter(|&(_, d)| d <= radius)
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(cap);
        all
    }

    fn random_points(rng: &mut impl Rng, n: usize, d: usize) -> Points {
        Points::from_flat(d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn empty_index_rejected() {
        let empty = Points::from_flat(2, vec![]).unwrap();
        assert!(build_index(empty, IndexBackend::Exact).is_err());
    }

    #[test]
    fn single_point_index() {
        let idx = build_index(line(&[4.0]), IndexBackend::Exact).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.nearest(&[0.0]).unwrap().id, 0);
    }

    #[test]
    fn query_within_line() {
        let idx = build_index(line(&[0.0, 1.0, 3.0]), IndexBackend::Exact).unwrap();
        let hits = idx.query_within(&[0.0], 1.5, 10).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!((hits[0].id, hits[0].distance), (0, 0.0));
        assert_eq!((hits[1].id, hits[1].distance), (1, 1.0));
        assert!(idx.query_within(&[10.0], 0.5, 10).unwrap().is_empty());
        let one = idx.query_within(&[0.9], 5.0, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].id, 1);
    }

    #[test]
    fn nearest_tie_prefers_smaller_id() {
        let idx = build_index(line(&[9.0, 9.0, -1.0, 9.0, 9.0, 1.0]), IndexBackend::Exact).unwrap();
        let n = idx.nearest(&[0.0]).unwrap();
        assert_eq!((n.id, n.distance), (2, 1.0));
        let exact_hit = idx.nearest(&[1.0]).unwrap();
        assert_eq!((exact_hit.id, exact_hit.distance), (5, 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let idx = build_index(line(&[0.0]), IndexBackend::Exact).unwrap();
        assert!(matches!(
            idx.query_within(&[0.0, 1.0], 1.0, 1),
            Err(KernetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exact_matches_brute_force_many_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..=500);
            let d = rng.gen_range(1..=4);
            let pts = random_points(&mut rng, n, d);
            let idx = build_index(pts.clone(), IndexBackend::Exact).unwrap();
            let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.2..1.2)).collect();
            let radius = rng.gen_range(0.0..1.5);
            let cap = rng.gen_range(1..50);
            let got: Vec<(usize, f64)> = idx
                .query_within(&q, radius, cap)
                .unwrap()
                .into_iter()
                .map(|n| (n.id, n.distance))
                .collect();
            assert_eq!(got, brute_within(&pts, &q, radius, cap));
            let nn = idx.nearest(&q).unwrap();
            assert_eq!(nn.id, brute_within(&pts, &q, f64::INFINITY, 1)[0].0);
        }
    }

    #[test]
    fn graph_recall_is_high_on_easy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 2000, 3);
        let exact = build_index(pts.clone(), IndexBackend::Exact).unwrap();
        let graph = build_index(pts, IndexBackend::Graph(GraphParams::with_seed(1))).unwrap();
        let mut hit = 0;
        let mut total = 0;
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = exact.query_within(&q, 0.3, 2000).unwrap();
            let g = graph.query_within(&q, 0.3, 2000).unwrap();
            total += e.len();
            hit += g.len();
        }
        assert!(hit as f64 >= 0.9 * total as f64, "recall {hit}/{total}");
    }

    #[test]
    fn graph_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 300, 2);
        let a = build_index(pts.clone(), IndexBackend::Graph(GraphParams::with_seed(9))).unwrap();
        let b = build_index(pts, IndexBackend::Graph(GraphParams::with_seed(9))).unwrap();
        assert_eq!(a.graph.unwrap().adjacency, b.graph.unwrap().adjacency);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn graph_results_subset_of_exact(
            seed in 0u64..1000,
            n in 1usize..300,
            radius in 0.05f64..1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, n, 2);
            let exact = build_index(pts.clone(), IndexBackend::Exact).unwrap();
            let graph = build_index(pts, IndexBackend::Graph(GraphParams { max_degree: 4, beam_width: 8, seed })).unwrap();
            let q = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let e = exact.query_within(&q, radius, n).unwrap();
            let g = graph.query_within(&q, radius, n).unwrap();
            for w in g.windows(2) {
                prop_assert!(w[0].key_cmp(&w[1]) == Ordering::Less);
            }
            for hit in &g {
                prop_assert!(e.iter().any(|x| x.id == hit.id && x.distance == hit.distance));
            }
        }

        #[test]
        fn exact_query_sorted_unique(seed in 0u64..1000, n in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, n, 3);
            let idx = build_index(pts, IndexBackend::Exact).unwrap();
            let hits = idx.query_within(&[0.0, 0.0, 0.0], 1.0, n).unwrap();
            let mut ids: Vec<usize> = hits.iter().map(|h| h.id).collect();
            for w in hits.windows(2) {
                prop_assert!(w[0].distance <= w[1].distance);
            }
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), hits.len());
        }
    }
}
