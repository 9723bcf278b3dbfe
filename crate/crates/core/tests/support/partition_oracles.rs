//! Brute-force oracles for partition summaries and losses.

use ndpc_core::ndp::NdpDraw;
use ndpc_core::rng;
use ndpc_core::summary::{vi_distance, vi_point_estimate, CoClusterMatrix, Partition};
use ndpc_core::synth::{binder_lau_green_loss, quadratic_cocluster_loss};
use ndpc_core::Sequential;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// VI through mutual information, from raw labels.
pub fn vi_oracle(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len() as f64;
    let count = |f: &dyn Fn(usize) -> bool| (0..a.len()).filter(|&i| f(i)).count() as f64;
    let mut la: Vec<u32> = a.to_vec();
    la.sort_unstable();
    la.dedup();
    let mut lb: Vec<u32> = b.to_vec();
    lb.sort_unstable();
    lb.dedup();
    let h = |labels: &[u32], xs: &[u32]| -> f64 {
        labels
            .iter()
            .map(|&l| {
                let p = count(&|i| xs[i] == l) / n;
                -p * p.ln()
            })
            .sum()
    };
    let mut mi = 0.0;
    for &x in &la {
        for &y in &lb {
            let nxy = count(&|i| a[i] == x && b[i] == y);
            if nxy > 0.0 {
                let (nx, ny) = (count(&|i| a[i] == x), count(&|i| b[i] == y));
                mi += nxy / n * (n * nxy / (nx * ny)).ln();
            }
        }
    }
    h(&la, a) + h(&lb, b) - 2.0 * mi
}

/// All set partitions of `0..n` as restricted growth strings.
pub fn all_partitions(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(i: usize, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=max + 1 {
            cur[i] = v;
            rec(i + 1, max.max(v), cur, out);
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    rec(1, 0, &mut cur, &mut out);
    out
}

fn random_labels(n: usize, r: &mut ChaCha8Rng) -> Vec<u32> {
    let k = r.random_range(1..=n as u32);
    (0..n).map(|_| r.random_range(0..k)).collect()
}

/// Random trace drawn around a few base partitions so the optimum often
/// lands on a draw.
fn random_trace(n: usize, s: usize, r: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
    let bases: Vec<Vec<u32>> = (0..r.random_range(1..=3)).map(|_| random_labels(n, r)).collect();
    (0..s)
        .map(|_| {
            let mut p = bases[r.random_range(0..bases.len())].clone();
            if r.random::<f64>() < 0.3 {
                let i = r.random_range(0..n);
                p[i] = r.random_range(0..n as u32);
            }
            p
        })
        .collect()
}

pub struct PointEstimateReport {
    pub traces: usize,
    /// Traces whose exhaustive optimum is one of the draws.
    pub optimum_is_draw: usize,
    pub mismatches: usize,
}

pub fn point_estimate_vs_exhaustive(traces: usize, seed: u64) -> PointEstimateReport {
    let mut r = rng::stream(seed, 0, 0, 0);
    let mut report = PointEstimateReport {
        traces,
        optimum_is_draw: 0,
        mismatches: 0,
    };
    let bell: Vec<Vec<Vec<u32>>> = (0..=8).map(all_partitions).collect();
    for _ in 0..traces {
        let n = r.random_range(2..=8);
        let s = r.random_range(1..=50);
        let trace = random_trace(n, s, &mut r);
        let loss = |cand: &[u32]| trace.iter().map(|d| vi_oracle(cand, d)).sum::<f64>() / s as f64;
        let best = bell[n].iter().map(|c| loss(c)).fold(f64::INFINITY, f64::min);
        if !trace.iter().any(|d| (loss(d) - best).abs() < 1e-9) {
            continue;
        }
        report.optimum_is_draw += 1;
        let parts: Vec<Partition> = trace.iter().map(|d| Partition::from_labels(d)).collect();
        let est = vi_point_estimate(&parts).unwrap();
        if (est.expected_loss - best).abs() > 1e-9 {
            report.mismatches += 1;
        }
    }
    report
}

pub struct LossReport {
    pub cases: usize,
    pub vi: usize,
    pub binder: usize,
    pub quadratic: usize,
    pub cocluster: usize,
}

fn draw_with(zeta: Vec<usize>) -> NdpDraw {
    NdpDraw {
        chain: 0,
        iteration: 0,
        k: 1,
        l: 1,
        zeta,
        pi_star: vec![1.0],
        w_star: vec![1.0],
        mu: vec![0.0],
        sigma_sq: vec![1.0],
        alpha: 1.0,
        rho: 1.0,
        log_joint: 0.0,
    }
}

/// Counts of cases where each quantity differs from its oracle.
pub fn losses_vs_brute_force(cases: usize, seed: u64) -> LossReport {
    let mut r = rng::stream(seed, 1, 0, 0);
    let mut rep = LossReport {
        cases,
        vi: 0,
        binder: 0,
        quadratic: 0,
        cocluster: 0,
    };
    for _ in 0..cases {
        let n = r.random_range(1..=12);
        let a = random_labels(n, &mut r);
        let b = random_labels(n, &mut r);
        let (pa, pb) = (Partition::from_labels(&a), Partition::from_labels(&b));

        if (vi_distance(&pa, &pb).unwrap() - vi_oracle(&a, &b).max(0.0)).abs() > 1e-12 {
            rep.vi += 1;
        }

        let mut binder = 0u64;
        for i in 0..n {
            for j in 0..n {
                if i < j && (a[i] == a[j]) != (b[i] == b[j]) {
                    binder += 1;
                }
            }
        }
        if binder_lau_green_loss(&pa, &pb).unwrap() != binder {
            rep.binder += 1;
        }

        let s = r.random_range(1..=20);
        let draws: Vec<NdpDraw> = (0..s)
            .map(|_| draw_with(random_labels(n, &mut r).into_iter().map(|v| v as usize).collect()))
            .collect();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let p = CoClusterMatrix::from_draws(&draws, &ids, &Sequential).unwrap();
        let mut ok = true;
        for i in 0..n {
            for j in 0..n {
                let together = draws.iter().filter(|d| d.zeta[i] == d.zeta[j]).count();
                if p.get(i, j) != together as f64 / s as f64 {
                    ok = false;
                }
            }
        }
        if !ok {
            rep.cocluster += 1;
        }

        let truth = CoClusterMatrix::from_partition(&pa, &ids);
        let mut quad = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let t = if a[i] == a[j] { 1.0 } else { 0.0 };
                let d = p.get(i, j) - t;
                quad += d * d;
            }
        }
        if quadratic_cocluster_loss(&p, &truth).unwrap() != quad {
            rep.quadratic += 1;
        }
    }
    rep
}
