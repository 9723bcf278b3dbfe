use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::NdpError;

/// Stick-breaking map: `w_k = s_k * prod_{j<k} (1 - s_j)` for the first
/// `len(sticks)` weights, and the last weight is the complement
/// `1 - sum(previous)`, so the returned weights sum to exactly 1.
pub fn stick_break(sticks: &[f64]) -> Result<Vec<f64>, NdpError> {
    if let Some((index, &value)) = sticks.iter().enumerate().find(|(_, &s)| !(s > 0.0 && s < 1.0)) {
        return Err(NdpError::StickOutOfRange { index, value });
    }
    let mut out = Vec::with_capacity(sticks.len() + 1);
    stick_break_into(sticks, &mut out);
    Ok(out)
}

/// Unchecked stick-breaking into an existing buffer.
pub(crate) fn stick_break_into(sticks: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let mut remaining = 1.0;
    let mut acc = 0.0;
    for &s in sticks {
        let w = s * remaining;
        out.push(w);
        acc += w;
        remaining *= 1.0 - s;
    }
    // Rounding can push the prefix sum past 1; pull the largest weight back.
    if acc > 1.0 {
        let big = (0..out.len()).fold(0, |b, i| if out[i] > out[b] { i } else { b });
        for _ in 0..64 {
            acc = out.iter().sum();
            if acc <= 1.0 {
                break;
            }
            out[big] = (out[big] - (acc - 1.0)).next_down().max(0.0);
        }
    }
    let mut last = 1.0 - acc;
    for _ in 0..8 {
        let total = acc + last;
        if total == 1.0 {
            break;
        }
        last = if total > 1.0 { last.next_down() } else { last.next_up() };
    }
    out.push(last.max(0.0));
}

/// Full latent state of the truncated sampler. Matrices indexed by
/// `(cluster k, component l)` are stored row-major with `L` columns;
/// indicators are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct NdpState {
    pub k: usize,
    pub l: usize,
    /// `K - 1` outer sticks.
    pub outer_sticks: Vec<f64>,
    /// `K` outer weights.
    pub pi_star: Vec<f64>,
    /// `K x (L - 1)` inner sticks.
    pub inner_sticks: Vec<f64>,
    /// `K x L` inner weights; every row sums to 1.
    pub w_star: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    /// Outer cluster of each subject, in `0..K`.
    pub zeta: Vec<usize>,
    /// Inner component of each point, in `0..L`.
    pub xi: Vec<Vec<usize>>,
    pub alpha: f64,
    pub rho: f64,
}

impl NdpState {
    /// State with all sticks at 1/2, unit atoms and everyone in cluster 0.
    pub fn blank(k: usize, l: usize, sizes: &[usize]) -> Self {
        let outer_sticks = vec![0.5; k - 1];
        let inner_sticks = vec![0.5; k * (l - 1)];
        let mut s = Self {
            k,
            l,
            pi_star: Vec::new(),
            w_star: Vec::new(),
            outer_sticks,
            inner_sticks,
            mu: vec![0.0; k * l],
            sigma_sq: vec![1.0; k * l],
            zeta: vec![0; sizes.len()],
            xi: sizes.iter().map(|&n| vec![0; n]).collect(),
            alpha: 1.0,
            rho: 1.0,
        };
        s.refresh_weights();
        s
    }

    #[inline]
    pub fn idx(&self, k: usize, l: usize) -> usize {
        k * self.l + l
    }

    pub fn w_row(&self, k: usize) -> &[f64] {
        &self.w_star[k * self.l..(k + 1) * self.l]
    }

    pub fn inner_row(&self, k: usize) -> &[f64] {
        &self.inner_sticks[k * (self.l - 1)..(k + 1) * (self.l - 1)]
    }

    /// Recomputes `pi_star` and every `w_star` row from the sticks.
    pub fn refresh_weights(&mut self) {
        stick_break_into(&self.outer_sticks, &mut self.pi_star);
        self.refresh_inner_weights();
    }

    pub(crate) fn refresh_inner_weights(&mut self) {
        let mut row = Vec::with_capacity(self.l);
        self.w_star.clear();
        for k in 0..self.k {
            stick_break_into(&self.inner_sticks[k * (self.l - 1)..(k + 1) * (self.l - 1)], &mut row);
            self.w_star.extend_from_slice(&row);
        }
    }

    /// Subjects per outer cluster.
    pub fn cluster_counts(&self) -> Vec<usize> {
        let mut m = vec![0; self.k];
        for &z in &self.zeta {
            m[z] += 1;
        }
        m
    }

    /// Points per `(k, l)` component.
    pub fn component_counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.k * self.l];
        for (j, xs) in self.xi.iter().enumerate() {
            let k = self.zeta[j];
            for &l in xs {
                n[k * self.l + l] += 1;
            }
        }
        n
    }

    /// Mixture mean `sum_l w_lk mu_lk` of cluster `k` on the transformed
    /// scale.
    pub fn cluster_location(&self, k: usize) -> f64 {
        (0..self.l).map(|l| self.w_star[self.idx(k, l)] * self.mu[self.idx(k, l)]).sum()
    }

    pub fn check_invariants(&self) -> Result<(), NdpError> {
        let bad = |msg: alloc::string::String| Err(NdpError::Invariant(msg));
        if self.outer_sticks.len() != self.k - 1 || self.pi_star.len() != self.k {
            return bad(format!("outer dimensions {} / {}", self.outer_sticks.len(), self.pi_star.len()));
        }
        if self.w_star.len() != self.k * self.l || self.mu.len() != self.k * self.l {
            return bad(format!("inner dimensions {}", self.w_star.len()));
        }
        let pi_sum: f64 = self.pi_star.iter().sum();
        if pi_sum != 1.0 {
            return bad(format!("outer weights sum to {pi_sum}"));
        }
        for k in 0..self.k {
            let s: f64 = self.w_row(k).iter().sum();
            if s != 1.0 {
                return bad(format!("inner weights of cluster {k} sum to {s}"));
            }
        }
        if let Some(s) = self
            .outer_sticks
            .iter()
            .chain(self.inner_sticks.iter())
            .find(|&&s| !(s > 0.0 && s < 1.0))
        {
            return bad(format!("stick {s} outside (0, 1)"));
        }
        if let Some(s2) = self.sigma_sq.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return bad(format!("variance {s2}"));
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return bad(format!("non-finite atom location"));
        }
        if self.zeta.iter().any(|&z| z >= self.k) {
            return bad(format!("outer indicator out of range"));
        }
        if self.xi.iter().flatten().any(|&x| x >= self.l) {
            return bad(format!("inner indicator out of range"));
        }
        if !(self.alpha > 0.0 && self.rho > 0.0) {
            return bad(format!("concentrations {} {}", self.alpha, self.rho));
        }
        Ok(())
    }
}
