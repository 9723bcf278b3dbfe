use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::SummaryError;
use crate::exec::Executor;
use crate::ndp::NdpDraw;

/// Posterior probability that two subjects share an outer cluster.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoClusterMatrix {
    pub n: usize,
    /// Row-major `n x n`.
    pub probs: Vec<f64>,
    pub subject_ids: Vec<String>,
}

impl CoClusterMatrix {
    /// Fraction of draws in which `i` and `j` share a cluster; diagonal 1.
    pub fn from_draws<E: Executor>(draws: &[NdpDraw], subject_ids: &[String], exec: &E) -> Result<Self, SummaryError> {
        let first = draws.first().ok_or(SummaryError::NoDraws)?;
        let n = first.zeta.len();
        if subject_ids.len() != n {
            return Err(SummaryError::LengthMismatch {
                left: n,
                right: subject_ids.len(),
            });
        }
        if let Some(d) = draws.iter().find(|d| d.zeta.len() != n) {
            return Err(SummaryError::LengthMismatch {
                left: n,
                right: d.zeta.len(),
            });
        }
        let s = draws.len() as f64;
        let rows = exec.map_indexed(n, |i| {
            let mut counts = vec![0u32; n];
            for d in draws {
                let zi = d.zeta[i];
                for (c, &zj) in counts.iter_mut().zip(&d.zeta) {
                    *c += (zj == zi) as u32;
                }
            }
            let mut row: Vec<f64> = counts.iter().map(|&c| c as f64 / s).collect();
            row[i] = 1.0;
            row
        });
        Ok(Self {
            n,
            probs: rows.concat(),
            subject_ids: subject_ids.to_vec(),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n..(i + 1) * self.n]
    }

    pub fn check_invariants(&self) -> bool {
        (0..self.n).all(|i| {
            self.get(i, i) == 1.0
                && (0..self.n).all(|j| {
                    let p = self.get(i, j);
                    (0.0..=1.0).contains(&p) && p == self.get(j, i)
                })
        })
    }
}

/// `sum_{i,j} |pos_i - pos_j| * P_ij` for an ordering.
pub fn heatmap_objective(p: &CoClusterMatrix, order: &[usize]) -> f64 {
    let mut pos = vec![0usize; p.n];
    for (k, &s) in order.iter().enumerate() {
        pos[s] = k;
    }
    let mut total = 0.0;
    for i in 0..p.n {
        for j in 0..p.n {
            total += pos[i].abs_diff(pos[j]) as f64 * p.get(i, j);
        }
    }
    total
}

/// Greedy seriation for heatmaps. Starts from the most co-clustered pair
/// and keeps appending the unplaced subject with the highest mean
/// probability to the current block while that mean is at least 1/2;
/// otherwise a new block starts from the best unplaced pair. The result and
/// the input order are then each polished by adjacent swaps, and the better
/// of the two is returned. Ties go to the lower subject index.
pub fn heatmap_order(p: &CoClusterMatrix) -> Vec<usize> {
    let n = p.n;
    if n < 3 {
        return (0..n).collect();
    }
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut block: Vec<usize> = Vec::new();
    let best_pair = |placed: &[bool]| -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if placed[i] {
                continue;
            }
            for j in i + 1..n {
                if !placed[j] && best.map_or(true, |(_, _, v)| p.get(i, j) > v) {
                    best = Some((i, j, p.get(i, j)));
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    };
    while order.len() < n {
        let next = if block.is_empty() {
            None
        } else {
            let mut best: Option<(usize, f64)> = None;
            for u in (0..n).filter(|&u| !placed[u]) {
                let m = block.iter().map(|&b| p.get(u, b)).sum::<f64>() / block.len() as f64;
                if best.map_or(true, |(_, v)| m > v) {
                    best = Some((u, m));
                }
            }
            best.filter(|&(_, m)| m >= 0.5).map(|(u, _)| u)
        };
        match next {
            Some(u) => {
                placed[u] = true;
                order.push(u);
                block.push(u);
            }
            None => {
                block.clear();
                match best_pair(&placed) {
                    Some((i, j)) => {
                        for s in [i, j] {
                            placed[s] = true;
                            order.push(s);
                            block.push(s);
                        }
                    }
                    None => {
                        let u = (0..n).find(|&u| !placed[u]).expect("some subject unplaced");
                        placed[u] = true;
                        order.push(u);
                    }
                }
            }
        }
    }
    let greedy = swap_descent(p, order);
    let identity = swap_descent(p, (0..n).collect());
    if heatmap_objective(p, &identity) < heatmap_objective(p, &greedy) {
        identity
    } else {
        greedy
    }
}

/// Adjacent-swap descent on the seriation objective.
fn swap_descent(p: &CoClusterMatrix, mut order: Vec<usize>) -> Vec<usize> {
    let n = order.len();
    for _ in 0..4 * n {
        let mut improved = false;
        for k in 0..n - 1 {
            let (a, b) = (order[k], order[k + 1]);
            // Swapping moves a one step right and b one step left.
            let mut delta = 0.0;
            for (m, &c) in order.iter().enumerate() {
                if m < k {
                    delta += p.get(a, c) - p.get(b, c);
                } else if m > k + 1 {
                    delta += p.get(b, c) - p.get(a, c);
                }
            }
            if 2.0 * delta < -1e-12 {
                order.swap(k, k + 1);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    order
}
