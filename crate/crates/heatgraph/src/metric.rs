//! Pseudo metrics on weighted graphs: combinatorial and canonical intrinsic
//! path metrics, explicit distance tables, jump size, q-intrinsic bounds and
//! metric balls.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{AxiomViolation, Error, Result};
use crate::graph::WeightedGraph;

/// All-pairs tables are kept dense up to this many vertices; beyond it rows
/// are recomputed on demand by single-source Dijkstra.
const DENSE_LIMIT: usize = 5_000;

/// Exhaustive triangle checking is cubic; above this size a random sample of
/// triples is used instead.
const EXHAUSTIVE_TRIPLES_LIMIT: usize = 300;
const SAMPLED_TRIPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Shortest-path metric with unit edge lengths.
    Combinatorial,
    /// Shortest-path metric with edge length `min(Deg(x), Deg(y))^{-1/2}`,
    /// which is 2-intrinsic with bound 1.
    CanonicalIntrinsic,
    /// User-supplied distance table.
    Explicit,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Combinatorial => "combinatorial",
            MetricKind::CanonicalIntrinsic => "canonical-intrinsic",
            MetricKind::Explicit => "explicit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "combinatorial" => Ok(MetricKind::Combinatorial),
            "canonical-intrinsic" => Ok(MetricKind::CanonicalIntrinsic),
            "explicit" => Ok(MetricKind::Explicit),
            other => Err(Error::Parse(format!("unknown metric kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
enum DistStorage {
    Dense { n: usize, d: Vec<f64> },
    /// Edge lengths only; rows computed per query. Used above `DENSE_LIMIT`.
    OnDemand { lengths: Vec<Vec<(usize, f64)>> },
}

#[derive(Debug, Clone)]
pub struct PseudoMetric {
    kind: MetricKind,
    jump: f64,
    storage: DistStorage,
}

/// Metric ball `B_r(x0) = {x : d(x, x0) < r}` (strict inequality).
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub members: Vec<usize>,
}

impl PseudoMetric {
    /// Shortest-path metric with unit edge lengths.
    pub fn combinatorial(g: &WeightedGraph) -> PseudoMetric {
        let lengths = edge_lengths(g, |_, _| 1.0);
        PseudoMetric::from_lengths(g, MetricKind::Combinatorial, lengths)
    }

    /// Shortest-path metric with edge length
    /// `min(Deg(x)^{-1/2}, Deg(y)^{-1/2}) = max(Deg(x), Deg(y))^{-1/2}`,
    /// where `Deg` uses the ambient degree on truncations. The result is
    /// 2-intrinsic with bound 1:
    /// `(1/mu(x)) sum_y omega max(Deg)^{-1} <= (1/mu(x)) deg(x)/Deg(x) <= 1`.
    pub fn canonical_intrinsic(g: &WeightedGraph) -> PseudoMetric {
        let weighted: Vec<f64> = (0..g.n()).map(|x| g.ambient_deg(x) / g.mu(x)).collect();
        let lengths = edge_lengths(g, |x, y| 1.0 / weighted[x].max(weighted[y]).sqrt());
        PseudoMetric::from_lengths(g, MetricKind::CanonicalIntrinsic, lengths)
    }

    fn from_lengths(
        g: &WeightedGraph,
        kind: MetricKind,
        lengths: Vec<Vec<(usize, f64)>>,
    ) -> PseudoMetric {
        let n = g.n();
        let storage = if n <= DENSE_LIMIT {
            let mut d = vec![f64::INFINITY; n * n];
            for x in 0..n {
                let row = dijkstra(&lengths, x);
                d[x * n..(x + 1) * n].copy_from_slice(&row);
            }
            DistStorage::Dense { n, d }
        } else {
            DistStorage::OnDemand { lengths }
        };
        let mut m = PseudoMetric {
            kind,
            jump: 0.0,
            storage,
        };
        m.jump = m.compute_jump(g);
        m
    }

    /// Explicit symmetric distance table (row-major, `n x n`).
    pub fn explicit(g: &WeightedGraph, table: Vec<f64>) -> Result<PseudoMetric> {
        let n = g.n();
        if table.len() != n * n {
            return Err(Error::Parse(format!(
                "distance table has {} entries, expected {}",
                table.len(),
                n * n
            )));
        }
        for x in 0..n {
            let dxx = table[x * n + x];
            if dxx != 0.0 {
                return Err(AxiomViolation::NonzeroDiagonal(g.label(x).into(), dxx).into());
            }
            for y in 0..n {
                let v = table[x * n + y];
                if v < 0.0 {
                    return Err(AxiomViolation::NegativeDistance(
                        g.label(x).into(),
                        g.label(y).into(),
                        v,
                    )
                    .into());
                }
                let back = table[y * n + x];
                if (v - back).abs() > 1e-12 * (1.0 + v.abs()) {
                    return Err(AxiomViolation::MetricAsymmetry(
                        g.label(x).into(),
                        g.label(y).into(),
                        v,
                        back,
                    )
                    .into());
                }
            }
        }
        let mut m = PseudoMetric {
            kind: MetricKind::Explicit,
            jump: 0.0,
            storage: DistStorage::Dense { n, d: table },
        };
        m.jump = m.compute_jump(g);
        Ok(m)
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn dist(&self, x: usize, y: usize) -> f64 {
        match &self.storage {
            DistStorage::Dense { n, d } => d[x * n + y],
            DistStorage::OnDemand { lengths } => dijkstra(lengths, x)[y],
        }
    }

    /// Distance row `d(., x0)`.
    pub fn distances_from(&self, x0: usize) -> Vec<f64> {
        match &self.storage {
            DistStorage::Dense { n, d } => d[x0 * n..(x0 + 1) * n].to_vec(),
            DistStorage::OnDemand { lengths } => dijkstra(lengths, x0),
        }
    }

    /// Jump size `s = sup { d(x,y) : omega(x,y) > 0 }`, zero on edgeless graphs.
    pub fn jump_size(&self) -> f64 {
        self.jump
    }

    fn compute_jump(&self, g: &WeightedGraph) -> f64 {
        let mut s: f64 = 0.0;
        for x in 0..g.n() {
            let row = self.distances_from(x);
            for &(y, _) in g.neighbors(x) {
                s = s.max(row[y]);
            }
        }
        s
    }

    /// Strict-inequality metric ball around `x0`.
    pub fn ball(&self, g: &WeightedGraph, x0: usize, r: f64) -> Ball {
        let row = self.distances_from(x0);
        let members = (0..g.n()).filter(|&x| row[x] < r).collect();
        Ball {
            center: x0,
            radius: r,
            members,
        }
    }

    /// Checks the pseudo-metric axioms on the truncation: zero diagonal,
    /// symmetry and the triangle inequality on all triples (small graphs) or
    /// on a seeded random sample.
    pub fn validate(&self, g: &WeightedGraph, seed: u64) -> Result<()> {
        let n = g.n();
        let check = |x: usize, y: usize, z: usize, dxy: f64, dyz: f64, dxz: f64| -> Result<()> {
            let slack = dxz - dxy - dyz;
            if slack > 1e-9 * (1.0 + dxz.abs()) {
                return Err(AxiomViolation::TriangleViolation(
                    g.label(x).into(),
                    g.label(y).into(),
                    g.label(z).into(),
                    slack,
                )
                .into());
            }
            Ok(())
        };
        if n <= EXHAUSTIVE_TRIPLES_LIMIT {
            let rows: Vec<Vec<f64>> = (0..n).map(|x| self.distances_from(x)).collect();
            for x in 0..n {
                if rows[x][x] != 0.0 {
                    return Err(
                        AxiomViolation::NonzeroDiagonal(g.label(x).into(), rows[x][x]).into(),
                    );
                }
                for y in 0..n {
                    if (rows[x][y] - rows[y][x]).abs() > 1e-12 * (1.0 + rows[x][y].abs()) {
                        return Err(AxiomViolation::MetricAsymmetry(
                            g.label(x).into(),
                            g.label(y).into(),
                            rows[x][y],
                            rows[y][x],
                        )
                        .into());
                    }
                    for z in 0..n {
                        check(x, y, z, rows[x][y], rows[y][z], rows[x][z])?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..SAMPLED_TRIPLES {
                let x = rng.gen_range(0..n);
                let y = rng.gen_range(0..n);
                let z = rng.gen_range(0..n);
                check(
                    x,
                    y,
                    z,
                    self.dist(x, y),
                    self.dist(y, z),
                    self.dist(x, z),
                )?;
            }
        }
        Ok(())
    }
}

/// Minimal `C0` such that `(1/mu(x)) sum_y omega(x,y) d(x,y)^q <= C0` over the
/// truncation; the metric is q-intrinsic with any bound at or above this value
/// ("intrinsic" means q = 2 with bound 1).
pub fn intrinsic_bound(g: &WeightedGraph, d: &PseudoMetric, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::range("q", q, "(0, inf)"));
    }
    let mut worst: f64 = 0.0;
    for x in 0..g.n() {
        let row = d.distances_from(x);
        let sum: f64 = g
            .neighbors(x)
            .iter()
            .map(|&(y, w)| w * row[y].powf(q))
            .sum();
        worst = worst.max(sum / g.mu(x));
    }
    Ok(worst)
}

fn edge_lengths<F: Fn(usize, usize) -> f64>(
    g: &WeightedGraph,
    len: F,
) -> Vec<Vec<(usize, f64)>> {
    (0..g.n())
        .map(|x| {
            g.neighbors(x)
                .iter()
                .map(|&(y, _)| (y, len(x, y)))
                .collect()
        })
        .collect()
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal)
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(lengths: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let n = lengths.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(dx, x)) = heap.pop() {
        if dx > dist[x] {
            continue;
        }
        for &(y, l) in &lengths[x] {
            let dy = dx + l;
            if dy < dist[y] {
                dist[y] = dy;
                heap.push(HeapItem(dy, y));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::*;

    const SQRT2_INV: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn combinatorial_jump_size_is_one() {
        let g = z_segment(10);
        let d = PseudoMetric::combinatorial(&g);
        assert_eq!(d.jump_size(), 1.0);
        let x0 = g.vertex("0").unwrap();
        let x5 = g.vertex("5").unwrap();
        assert_eq!(d.dist(x0, x5), 5.0);
    }

    #[test]
    fn canonical_jump_size_on_segment() {
        let g = z_segment(10);
        let d = PseudoMetric::canonical_intrinsic(&g);
        assert!((d.jump_size() - SQRT2_INV).abs() < 1e-12);
        let x0 = g.vertex("0").unwrap();
        let x4 = g.vertex("4").unwrap();
        assert!((d.dist(x0, x4) - 4.0 * SQRT2_INV).abs() < 1e-12);
    }

    #[test]
    fn explicit_single_long_edge() {
        let g = pair();
        let d = PseudoMetric::explicit(&g, vec![0.0, 3.5, 3.5, 0.0]).unwrap();
        assert_eq!(d.jump_size(), 3.5);
    }

    #[test]
    fn intrinsic_bounds_on_segment() {
        let g = z_segment(10);
        let comb = PseudoMetric::combinatorial(&g);
        assert!((intrinsic_bound(&g, &comb, 2.0).unwrap() - 2.0).abs() < 1e-12);
        let canon = PseudoMetric::canonical_intrinsic(&g);
        assert!((intrinsic_bound(&g, &canon, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(
            (intrinsic_bound(&g, &canon, 1.0).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-12
        );
    }

    #[test]
    fn canonical_star_distances() {
        let g = star(3);
        let d = PseudoMetric::canonical_intrinsic(&g);
        // center Deg = 3, leaf Deg = 1: edge length 1/sqrt(3)
        let l0 = g.vertex("l0").unwrap();
        let l1 = g.vertex("l1").unwrap();
        let expect = 2.0 / 3.0_f64.sqrt();
        assert!((d.dist(l0, l1) - expect).abs() < 1e-12);
    }

    #[test]
    fn single_vertex_metric_is_empty() {
        let g = single();
        let d = PseudoMetric::canonical_intrinsic(&g);
        assert_eq!(d.jump_size(), 0.0);
        assert_eq!(d.dist(0, 0), 0.0);
    }

    #[test]
    fn ball_membership_is_strict() {
        let g = z_segment(10);
        let d = PseudoMetric::combinatorial(&g);
        let x0 = g.vertex("0").unwrap();
        let b = d.ball(&g, x0, 3.0);
        let members: Vec<&str> = b.members.iter().map(|&x| g.label(x)).collect();
        assert_eq!(members.len(), 5);
        assert!(members.contains(&"-2") && members.contains(&"2"));
        assert!(!members.contains(&"3"));
        let tiny = d.ball(&g, x0, 0.5);
        assert_eq!(tiny.members, vec![x0]);
        let all = d.ball(&g, x0, 1e9);
        assert_eq!(all.members.len(), g.n());
    }

    #[test]
    fn ball_monotone_in_radius() {
        let g = z_segment(20);
        let d = PseudoMetric::canonical_intrinsic(&g);
        let x0 = g.vertex("3").unwrap();
        let mut prev = 0usize;
        for r in [0.5, 1.0, 2.0, 5.0, 9.0, 100.0] {
            let b = d.ball(&g, x0, r);
            assert!(b.members.len() >= prev);
            prev = b.members.len();
        }
    }

    #[test]
    fn axioms_hold_on_built_metrics() {
        let g = z_segment(12);
        for d in [
            PseudoMetric::combinatorial(&g),
            PseudoMetric::canonical_intrinsic(&g),
        ] {
            d.validate(&g, 1).unwrap();
        }
    }

    #[test]
    fn explicit_rejects_asymmetric_table() {
        let g = pair();
        let err = PseudoMetric::explicit(&g, vec![0.0, 1.0, 2.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("pseudo metric"), "{err}");
    }

    #[test]
    fn jump_size_dominates_every_edge() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_connected(&mut rng, 30);
            let d = PseudoMetric::canonical_intrinsic(&g);
            let s = d.jump_size();
            let mut attained = false;
            for (x, y, _) in g.edges() {
                let dv = d.dist(x, y);
                assert!(dv <= s + 1e-12);
                if (dv - s).abs() <= 1e-12 {
                    attained = true;
                }
            }
            assert!(attained);
        }
    }
}
