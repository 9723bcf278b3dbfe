//! Synthetic second-stage studies: consensus GLM recovery and coverage,
//! kernel machine block separation, quantity-effect re-computation and WAIC
//! ordering.

use ndpc_core::outcome::{
    draw_outcomes, fit_bkmr, fit_cglm, fit_glm, quantity_effect_bkmr, quantity_effect_cglm, simulate_records, waic,
    BinomialLogit, BkmrConfig, GlmFit, McmcConfig, OutcomeRecord, QuantityCategory, RecordSpec,
};
use ndpc_core::summary::CoClusterMatrix;
use ndpc_core::Executor;

pub const ZETA0: f64 = -0.4;
pub const XI: [f64; 2] = [-0.3, -0.5];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Cluster 1 or 2 alternating over schools with restaurants.
fn labels(records: &[OutcomeRecord]) -> Vec<Option<u32>> {
    let mut next = 0u32;
    records
        .iter()
        .map(|r| {
            (r.ffr_count > 0).then(|| {
                next += 1;
                2 - next % 2
            })
        })
        .collect()
}

/// 200 reference schools of 300 students with outcomes from the truth
/// `zeta_0 = -0.4`, `xi = (-0.3, -0.5)` and every other coefficient 0.
pub fn cglm_data(seed: u64) -> (Vec<OutcomeRecord>, Vec<Option<u32>>) {
    let spec = RecordSpec {
        seed,
        ..RecordSpec::default()
    };
    let mut recs = simulate_records(&spec).unwrap();
    let labs = labels(&recs);
    let eta: Vec<f64> = labs
        .iter()
        .map(|l| match l {
            None => ZETA0,
            Some(k) => XI[*k as usize - 1],
        })
        .collect();
    draw_outcomes(&mut recs, &eta, seed).unwrap();
    (recs, labs)
}

pub fn truth(name: &str) -> f64 {
    match name {
        "zeta_0" => ZETA0,
        "xi_1" => XI[0],
        "xi_2" => XI[1],
        _ => 0.0,
    }
}

pub struct CglmStudy {
    /// `(name, mean over replicates of the posterior mean, coverage count)`.
    pub coefficients: Vec<(String, f64, usize)>,
    /// Largest single-replicate `|posterior mean - truth|`.
    pub worst_error: f64,
    pub max_rhat: f64,
    /// Largest per-draw gap between the library's quantity effects and
    /// [`cglm_quantity_oracle`].
    pub quantity_gap: f64,
}

fn column(fit: &GlmFit, name: &str) -> Option<usize> {
    fit.names().iter().position(|n| n == name)
}

/// `sum_k w_k sigmoid(zeta_m + xi_k)` straight from the raw draw vectors.
pub fn cglm_quantity_oracle(fit: &GlmFit, weights: &[f64], category: QuantityCategory) -> Vec<f64> {
    let zeta = match category {
        QuantityCategory::Zero => Some("zeta_0"),
        QuantityCategory::One => None,
        QuantityCategory::Two => Some("zeta_2"),
        QuantityCategory::Three => Some("zeta_3"),
        QuantityCategory::Four => Some("zeta_4"),
        QuantityCategory::FiveToSeven => Some("zeta_5_7"),
        QuantityCategory::EightPlus => Some("zeta_8plus"),
    };
    let xi: Vec<Option<usize>> = fit.cluster_labels.iter().map(|l| column(fit, &format!("xi_{l}"))).collect();
    let mut out = Vec::new();
    for chain in &fit.draws {
        for t in chain {
            let z = zeta.and_then(|n| column(fit, n)).map_or(0.0, |j| t[j]);
            if category == QuantityCategory::Zero {
                out.push(sigmoid(z));
                continue;
            }
            let mut s = 0.0;
            for (x, w) in xi.iter().zip(weights) {
                s += w * sigmoid(z + x.map_or(0.0, |j| t[j]));
            }
            out.push(s);
        }
    }
    out
}

pub fn cglm_study<E: Executor>(replicates: usize, mcmc: &McmcConfig, exec: &E) -> CglmStudy {
    let mut names: Vec<String> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut covered: Vec<usize> = Vec::new();
    let mut worst_error = 0.0f64;
    let mut max_rhat = 0.0f64;
    let mut quantity_gap = 0.0f64;
    for rep in 0..replicates {
        let (recs, labs) = cglm_data(1000 + rep as u64);
        let cfg = McmcConfig {
            seed: rep as u64,
            ..mcmc.clone()
        };
        let fit = fit_cglm(&recs, &labs, &cfg, exec).unwrap();
        if names.is_empty() {
            names = fit.names().to_vec();
            sums = vec![0.0; names.len()];
            covered = vec![0; names.len()];
        }
        assert_eq!(fit.names(), &names[..]);
        max_rhat = max_rhat.max(fit.max_rhat);
        for (j, s) in fit.summaries.iter().enumerate() {
            let t = truth(&s.name);
            sums[j] += s.mean;
            covered[j] += (s.q025 <= t && t <= s.q975) as usize;
            worst_error = worst_error.max((s.mean - t).abs());
        }
        let w = fit.cluster_weights.clone();
        for q in quantity_effect_cglm(&fit, &w).unwrap() {
            let oracle = cglm_quantity_oracle(&fit, &w, q.category);
            assert_eq!(oracle.len(), q.draws.len());
            for (a, b) in q.draws.iter().zip(&oracle) {
                quantity_gap = quantity_gap.max((a - b).abs());
            }
        }
    }
    CglmStudy {
        coefficients: names
            .into_iter()
            .zip(sums)
            .zip(covered)
            .map(|((n, s), c)| (n, s / replicates as f64, c))
            .collect(),
        worst_error,
        max_rhat,
        quantity_gap,
    }
}

pub struct BkmrStudy {
    pub subjects: usize,
    pub correct_sign: usize,
    pub max_rhat: f64,
    pub quantity_gap: f64,
}

/// Two exact blocks of schools with restaurants; `h = +0.5` on the first
/// block and `-0.5` on the second, `alpha_tilde = -0.4`, `zeta_0 = -0.4`.
pub fn bkmr_study<E: Executor>(n_schools: usize, seed: u64, cfg: &BkmrConfig, exec: &E) -> BkmrStudy {
    let spec = RecordSpec {
        n_schools,
        zero_fraction: 0.2,
        seed,
        ..RecordSpec::default()
    };
    let mut recs = simulate_records(&spec).unwrap();
    let with: Vec<usize> = (0..recs.len()).filter(|&i| recs[i].ffr_count > 0).collect();
    let m = with.len();
    let block = |a: usize| a < m / 2;
    let ids: Vec<String> = with.iter().map(|&i| recs[i].subject_id.clone()).collect();
    let mut probs = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            probs[a * m + b] = (block(a) == block(b)) as u8 as f64;
        }
    }
    let p = CoClusterMatrix { n: m, probs, subject_ids: ids };
    let mut truth_h = vec![None; recs.len()];
    for (a, &i) in with.iter().enumerate() {
        truth_h[i] = Some(if block(a) { 0.5 } else { -0.5 });
    }
    let eta: Vec<f64> = truth_h.iter().map(|h| h.map_or(-0.4, |h| -0.4 + h)).collect();
    draw_outcomes(&mut recs, &eta, seed).unwrap();

    let fit = fit_bkmr(&recs, &p, cfg, exec).unwrap();

    // Posterior means of h recomputed from the raw draws.
    let mut h_hat = vec![0.0; m];
    let mut count = 0.0;
    for chain in &fit.h {
        for draw in chain {
            for (s, v) in h_hat.iter_mut().zip(draw) {
                *s += v;
            }
            count += 1.0;
        }
    }
    for v in h_hat.iter_mut() {
        *v /= count;
    }
    let correct_sign = with
        .iter()
        .enumerate()
        .filter(|&(a, &i)| {
            let j = fit.h_index[i].unwrap();
            (h_hat[j] > 0.0) == block(a)
        })
        .count();

    let col = |name: &str| fit.names().iter().position(|n| n == name);
    let mut quantity_gap = 0.0f64;
    for q in quantity_effect_bkmr(&fit).unwrap() {
        let zeta = match q.category {
            QuantityCategory::Zero => "zeta_0",
            QuantityCategory::One => "",
            QuantityCategory::Two => "zeta_2",
            QuantityCategory::Three => "zeta_3",
            QuantityCategory::Four => "zeta_4",
            QuantityCategory::FiveToSeven => "zeta_5_7",
            QuantityCategory::EightPlus => "zeta_8plus",
        };
        let draws: Vec<&Vec<f64>> = fit.coefficients.iter().flatten().collect();
        assert_eq!(draws.len(), q.draws.len());
        for (t, got) in draws.iter().zip(&q.draws) {
            let z = col(zeta).map_or(0.0, |j| t[j]);
            let want = if q.category == QuantityCategory::Zero {
                sigmoid(z)
            } else {
                let a = t[col("alpha_tilde").unwrap()];
                h_hat.iter().map(|h| sigmoid(a + z + h)).sum::<f64>() / m as f64
            };
            quantity_gap = quantity_gap.max((got - want).abs());
        }
    }
    BkmrStudy {
        subjects: m,
        correct_sign,
        max_rhat: fit.max_rhat,
        quantity_gap,
    }
}

/// Replicates in which the cluster-label GLM has a lower WAIC than an
/// intercept-only binomial model on the same data.
pub fn waic_wins<E: Executor>(replicates: usize, mcmc: &McmcConfig, exec: &E) -> usize {
    (0..replicates)
        .filter(|&rep| {
            let (recs, labs) = cglm_data(5000 + rep as u64);
            let cfg = McmcConfig {
                seed: rep as u64,
                ..mcmc.clone()
            };
            let full = fit_cglm(&recs, &labs, &cfg, exec).unwrap();
            let rows: Vec<Vec<f64>> = recs.iter().map(|_| vec![1.0]).collect();
            let y: Vec<u64> = recs.iter().map(|r| r.obese_count).collect();
            let n: Vec<u64> = recs.iter().map(|r| r.total_count).collect();
            let null = fit_glm(BinomialLogit::new(vec!["intercept".into()], &rows, &y, &n), &cfg, exec).unwrap();
            let a = waic(&full.pointwise_log_lik()).unwrap();
            let b = waic(&null.pointwise_log_lik()).unwrap();
            a.waic < b.waic
        })
        .count()
}

/// WAIC of two records under two draws with likelihoods
/// `[[0.5, 0.2], [0.25, 0.4]]`, against hand arithmetic.
pub fn waic_hand_gap() -> f64 {
    let ll = vec![vec![0.5f64.ln(), 0.2f64.ln()], vec![0.25f64.ln(), 0.4f64.ln()]];
    let w = waic(&ll).unwrap();
    // Both pointwise pairs differ by ln 2; the sample variance of two values
    // is half their squared difference.
    let lppd = 0.375f64.ln() + 0.3f64.ln();
    let p = 2.0 * std::f64::consts::LN_2.powi(2) / 2.0;
    let want = -2.0 * (lppd - p);
    (w.waic - want).abs().max((w.lppd - lppd).abs()).max((w.p_waic - p).abs())
}
