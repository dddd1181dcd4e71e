//! Finite deme sets with a doubly stochastic migration matrix and summable
//! weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Topology used by [`build_deme_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphKind {
    Single,
    CompleteUniform { demes: usize },
    Torus1d { demes: usize },
    Torus2d { dx: usize, dy: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemeGraph {
    size: usize,
    /// Row-major `size x size`.
    m: Vec<f64>,
    /// Nonzero entries of each row, `(j, m(i,j))`.
    rows: Vec<Vec<(usize, f64)>>,
    sigma: Vec<f64>,
    c: f64,
    uniform: bool,
}

const STOCHASTIC_TOL: f64 = 1e-12;

impl DemeGraph {
    /// Builds a graph from an explicit matrix and weights. The weight constant
    /// is computed, never supplied.
    pub fn from_parts(m: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let size = sigma.len();
        if size == 0 {
            return Err(Error::InvalidSize(0));
        }
        if m.len() != size * size {
            return Err(Error::InvalidGraph(format!(
                "matrix has {} entries, expected {}",
                m.len(),
                size * size
            )));
        }
        if let Some(v) = m.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidGraph(format!("negative or non-finite entry {v}")));
        }
        for i in 0..size {
            let row: f64 = m[i * size..(i + 1) * size].iter().sum();
            let col: f64 = (0..size).map(|k| m[k * size + i]).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL || (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidGraph(format!(
                    "row/column {i} sums to {row}/{col}, expected 1"
                )));
            }
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidGraph(format!("weight {s} is not positive")));
        }
        let rows = (0..size)
            .map(|i| {
                (0..size)
                    .filter_map(|j| {
                        let v = m[i * size + j];
                        (v > 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        let c = (0..size)
            .map(|j| (0..size).map(|i| sigma[i] * m[i * size + j]).sum::<f64>() / sigma[j])
            .fold(0.0_f64, f64::max);
        let inv = 1.0 / size as f64;
        let uniform = m.iter().all(|v| (v - inv).abs() <= STOCHASTIC_TOL);
        Ok(Self {
            size,
            m,
            rows,
            sigma,
            c,
            uniform,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    #[inline]
    pub fn m(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.size + j]
    }

    /// Nonzero `(j, m(i,j))` pairs of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// True when every entry equals `1/D`.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Returns the graph with demes relabelled so that new deme `k` is old
    /// deme `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.size {
            return Err(Error::ShapeMismatch(format!(
                "permutation of length {} for {} demes",
                perm.len(),
                self.size
            )));
        }
        let n = self.size;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.m(perm[i], perm[j]);
            }
        }
        let sigma = perm.iter().map(|&k| self.sigma[k]).collect();
        Self::from_parts(m, sigma)
    }
}

/// Builds one of the standard topologies.
///
/// Torus weights decay geometrically with graph distance from deme 0; a
/// decay of 1 gives uniform weights. Single and complete graphs always use
/// `sigma_i = 1/D`.
pub fn build_deme_graph(kind: GraphKind, weight_decay: f64) -> Result<DemeGraph> {
    if !(weight_decay > 0.0 && weight_decay <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "weight_decay",
            reason: format!("must lie in (0, 1], got {weight_decay}"),
        });
    }
    match kind {
        GraphKind::Single => DemeGraph::from_parts(vec![1.0], vec![1.0]),
        GraphKind::CompleteUniform { demes } => {
            if demes == 0 {
                return Err(Error::InvalidSize(0));
            }
            let inv = 1.0 / demes as f64;
            DemeGraph::from_parts(vec![inv; demes * demes], vec![inv; demes])
        }
        GraphKind::Torus1d { demes } => {
            if demes == 0 {
                return Err(Error::InvalidSize(0));
            }
            let mut m = vec![0.0; demes * demes];
            for i in 0..demes {
                m[i * demes + (i + 1) % demes] += 0.5;
                m[i * demes + (i + demes - 1) % demes] += 0.5;
            }
            let sigma = (0..demes)
                .map(|i| weight_decay.powi(i.min(demes - i) as i32))
                .collect();
            DemeGraph::from_parts(m, sigma)
        }
        GraphKind::Torus2d { dx, dy } => {
            if dx == 0 || dy == 0 {
                return Err(Error::InvalidSize(0));
            }
            let n = dx * dy;
            let idx = |x: usize, y: usize| y * dx + x;
            let mut m = vec![0.0; n * n];
            let mut sigma = Vec::with_capacity(n);
            for y in 0..dy {
                for x in 0..dx {
                    let i = idx(x, y);
                    for (nx, ny) in [
                        ((x + 1) % dx, y),
                        ((x + dx - 1) % dx, y),
                        (x, (y + 1) % dy),
                        (x, (y + dy - 1) % dy),
                    ] {
                        m[i * n + idx(nx, ny)] += 0.25;
                    }
                    let dist = x.min(dx - x) + y.min(dy - y);
                    sigma.push(weight_decay.powi(dist as i32));
                }
            }
            DemeGraph::from_parts(m, sigma)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check_invariants(g: &DemeGraph) {
        let n = g.len();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| g.m(i, j)).sum();
            let col: f64 = (0..n).map(|k| g.m(k, i)).sum();
            assert!((row - 1.0).abs() < 1e-12 && (col - 1.0).abs() < 1e-12);
        }
        let mut tight = false;
        for j in 0..n {
            let lhs: f64 = (0..n).map(|i| g.sigma()[i] * g.m(i, j)).sum();
            assert!(lhs <= g.c() * g.sigma()[j] * (1.0 + 1e-12));
            tight |= (lhs - g.c() * g.sigma()[j]).abs() <= 1e-12 * lhs.max(1.0);
        }
        assert!(tight);
    }

    #[test]
    fn complete_uniform() {
        let g = build_deme_graph(GraphKind::CompleteUniform { demes: 4 }, 0.5).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.m(i, j), 0.25);
            }
        }
        assert!((g.c() - 1.0).abs() < 1e-15);
        assert!(g.is_uniform());
    }

    #[test]
    fn single() {
        let g = build_deme_graph(GraphKind::Single, 0.5).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.m(0, 0), 1.0);
        assert_eq!(g.c(), 1.0);
    }

    #[test]
    fn torus1d_uniform_weights() {
        let g = build_deme_graph(GraphKind::Torus1d { demes: 3 }, 1.0).unwrap();
        assert!((g.c() - 1.0).abs() < 1e-15);
        assert_eq!(g.m(0, 1), 0.5);
        assert_eq!(g.m(0, 2), 0.5);
        assert_eq!(g.m(0, 0), 0.0);
    }

    #[test]
    fn invalid_sizes() {
        assert_eq!(
            build_deme_graph(GraphKind::CompleteUniform { demes: 0 }, 0.5),
            Err(Error::InvalidSize(0))
        );
        assert!(build_deme_graph(GraphKind::Torus1d { demes: 0 }, 0.5).is_err());
        assert!(build_deme_graph(GraphKind::Single, 0.0).is_err());
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(DemeGraph::from_parts(vec![0.5, 0.5, 0.2, 0.8], vec![1.0, 1.0]).is_err());
        assert!(DemeGraph::from_parts(vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn built_graphs_are_valid(d in 1usize..12, dy in 1usize..5, decay in 0.05f64..=1.0, which in 0u8..3) {
            let kind = match which {
                0 => GraphKind::CompleteUniform { demes: d },
                1 => GraphKind::Torus1d { demes: d },
                _ => GraphKind::Torus2d { dx: d, dy },
            };
            let g = build_deme_graph(kind, decay).unwrap();
            check_invariants(&g);
        }
    }
}
