use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use libm::log;

use super::{Partition, SummaryError};
use crate::exec::{Executor, Sequential};

/// Losses closer than this are treated as tied.
const TIE_TOL: f64 = 1e-10;

fn plogp(count: u32, n: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        let p = count as f64 / n;
        -p * log(p)
    }
}

fn entropy(sizes: &[usize], n: f64) -> f64 {
    sizes.iter().map(|&s| plogp(s as u32, n)).sum()
}

/// Variation of information `H(a) + H(b) - 2 I(a, b)` with natural logs.
pub fn vi_distance(a: &Partition, b: &Partition) -> Result<f64, SummaryError> {
    if a.len() != b.len() {
        return Err(SummaryError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(vi_unchecked(a, b))
}

fn vi_unchecked(a: &Partition, b: &Partition) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let (ka, kb) = (a.n_clusters(), b.n_clusters());
    let mut table = vec![0u32; ka * kb];
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        table[(la as usize - 1) * kb + lb as usize - 1] += 1;
    }
    let nf = n as f64;
    let joint: f64 = table.iter().map(|&c| plogp(c, nf)).sum();
    let vi = 2.0 * joint - entropy(&a.sizes(), nf) - entropy(&b.sizes(), nf);
    vi.max(0.0)
}

/// Distinct partitions in first-occurrence order with multiplicities, and
/// the unique index of every input.
fn dedup(partitions: &[Partition]) -> (Vec<&Partition>, Vec<usize>, Vec<usize>) {
    let mut index: BTreeMap<&Partition, usize> = BTreeMap::new();
    let mut uniq = Vec::new();
    let mut counts = Vec::new();
    let mut of = Vec::with_capacity(partitions.len());
    for p in partitions {
        let u = *index.entry(p).or_insert_with(|| {
            uniq.push(p);
            counts.push(0);
            uniq.len() - 1
        });
        counts[u] += 1;
        of.push(u);
    }
    (uniq, counts, of)
}

fn check_lengths(partitions: &[Partition]) -> Result<usize, SummaryError> {
    let first = partitions.first().ok_or(SummaryError::NoDraws)?;
    if let Some(p) = partitions.iter().find(|p| p.len() != first.len()) {
        return Err(SummaryError::LengthMismatch {
            left: first.len(),
            right: p.len(),
        });
    }
    Ok(first.len())
}

/// Posterior expected VI of `candidate` against the draws.
pub fn expected_vi(candidate: &Partition, partitions: &[Partition]) -> Result<f64, SummaryError> {
    let n = check_lengths(partitions)?;
    if candidate.len() != n {
        return Err(SummaryError::LengthMismatch {
            left: candidate.len(),
            right: n,
        });
    }
    let (uniq, counts, _) = dedup(partitions);
    let total: f64 = uniq
        .iter()
        .zip(&counts)
        .map(|(u, &c)| c as f64 * vi_unchecked(candidate, u))
        .sum();
    Ok(total / partitions.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointEstimate {
    pub partition: Partition,
    pub expected_loss: f64,
    /// First draw carrying this partition; `None` after refinement moved
    /// away from the candidate set.
    pub draw_index: Option<usize>,
}

/// Draw partition minimizing posterior expected VI. Ties go to fewer
/// clusters, then to the earliest draw.
pub fn vi_point_estimate(partitions: &[Partition]) -> Result<PointEstimate, SummaryError> {
    vi_point_estimate_with(partitions, &Sequential)
}

pub fn vi_point_estimate_with<E: Executor>(partitions: &[Partition], exec: &E) -> Result<PointEstimate, SummaryError> {
    check_lengths(partitions)?;
    let (uniq, counts, of) = dedup(partitions);
    let u = uniq.len();
    // Upper triangle of the pairwise VI matrix, row by row.
    let rows: Vec<Vec<f64>> = exec.map_indexed(u, |i| (i + 1..u).map(|j| vi_unchecked(uniq[i], uniq[j])).collect());
    let mut loss = vec![0.0; u];
    for i in 0..u {
        for (off, &d) in rows[i].iter().enumerate() {
            let j = i + 1 + off;
            loss[i] += counts[j] as f64 * d;
            loss[j] += counts[i] as f64 * d;
        }
    }
    let s = partitions.len() as f64;
    let mut best = 0;
    for i in 1..u {
        let (li, lb) = (loss[i] / s, loss[best] / s);
        if li < lb - TIE_TOL || ((li - lb).abs() <= TIE_TOL && uniq[i].n_clusters() < uniq[best].n_clusters()) {
            best = i;
        }
    }
    Ok(PointEstimate {
        partition: uniq[best].clone(),
        expected_loss: loss[best] / s,
        draw_index: of.iter().position(|&x| x == best),
    })
}

/// Greedy single-subject moves from `start` that lower the expected VI,
/// until a full pass makes no move or `max_passes` is reached.
pub fn refine_point_estimate(
    start: &Partition,
    partitions: &[Partition],
    max_passes: usize,
) -> Result<PointEstimate, SummaryError> {
    let n = check_lengths(partitions)?;
    if start.len() != n {
        return Err(SummaryError::LengthMismatch {
            left: start.len(),
            right: n,
        });
    }
    let (uniq, counts, _) = dedup(partitions);
    let nf = n as f64;
    let s = partitions.len() as f64;
    let mut labels: Vec<usize> = start.labels().iter().map(|&l| l as usize - 1).collect();
    let mut cap = start.n_clusters() + 1;
    let mut sizes = vec![0u32; cap];
    for &l in &labels {
        sizes[l] += 1;
    }
    let build = |labels: &[usize], cap: usize| -> Vec<Vec<u32>> {
        uniq.iter()
            .map(|p| {
                let kb = p.n_clusters();
                let mut t = vec![0u32; cap * kb];
                for (i, &l) in labels.iter().enumerate() {
                    t[l * kb + p.labels()[i] as usize - 1] += 1;
                }
                t
            })
            .collect()
    };
    let mut tables = build(&labels, cap);

    for _ in 0..max_passes {
        let mut moved = false;
        for i in 0..n {
            let from = labels[i];
            let empty = (0..cap).find(|&c| sizes[c] == 0);
            let mut best: Option<(usize, f64)> = None;
            for to in 0..cap {
                if to == from || (sizes[to] == 0 && Some(to) != empty) || (sizes[to] == 0 && sizes[from] == 1) {
                    continue;
                }
                let dh_c = plogp(sizes[from] - 1, nf) - plogp(sizes[from], nf) + plogp(sizes[to] + 1, nf)
                    - plogp(sizes[to], nf);
                let mut delta = 0.0;
                for (u, p) in uniq.iter().enumerate() {
                    let kb = p.n_clusters();
                    let b = p.labels()[i] as usize - 1;
                    let t = &tables[u];
                    let (x, y) = (t[from * kb + b], t[to * kb + b]);
                    let dh_j = plogp(x - 1, nf) - plogp(x, nf) + plogp(y + 1, nf) - plogp(y, nf);
                    delta += counts[u] as f64 * (2.0 * dh_j - dh_c);
                }
                delta /= s;
                if delta < -TIE_TOL && best.map_or(true, |(_, d)| delta < d) {
                    best = Some((to, delta));
                }
            }
            if let Some((to, _)) = best {
                moved = true;
                labels[i] = to;
                sizes[from] -= 1;
                sizes[to] += 1;
                for (u, p) in uniq.iter().enumerate() {
                    let kb = p.n_clusters();
                    let b = p.labels()[i] as usize - 1;
                    tables[u][from * kb + b] -= 1;
                    tables[u][to * kb + b] += 1;
                }
                if sizes.iter().all(|&x| x > 0) {
                    cap += 1;
                    sizes.push(0);
                    tables = build(&labels, cap);
                }
            }
        }
        if !moved {
            break;
        }
    }
    let partition = Partition::from_labels(&labels);
    let expected_loss = expected_vi(&partition, partitions)?;
    let draw_index = partitions.iter().position(|p| *p == partition);
    Ok(PointEstimate {
        partition,
        expected_loss,
        draw_index,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CredibleBall {
    pub horizontal: Partition,
    /// Fewest clusters in the ball.
    pub upper: Partition,
    /// Most clusters in the ball.
    pub lower: Partition,
    pub radius: f64,
}

/// Credible ball around `mode`: the radius is the `ceil(level * S)`-th
/// smallest VI distance from the mode. Among draws inside the ball the
/// bounds are the farthest partition overall, among those with fewest
/// clusters, and among those with most clusters; ties go to the earliest
/// draw.
pub fn credible_ball_bounds(partitions: &[Partition], mode: &Partition, level: f64) -> Result<CredibleBall, SummaryError> {
    let n = check_lengths(partitions)?;
    if mode.len() != n {
        return Err(SummaryError::LengthMismatch {
            left: mode.len(),
            right: n,
        });
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(SummaryError::InvalidLevel);
    }
    let (uniq, _, of) = dedup(partitions);
    let ud: Vec<f64> = uniq.iter().map(|p| vi_unchecked(mode, p)).collect();
    let dist: Vec<f64> = of.iter().map(|&u| ud[u]).collect();
    let mut sorted = dist.clone();
    sorted.sort_by(f64::total_cmp);
    let s = partitions.len();
    let rank = (libm::ceil(level * s as f64 - 1e-9) as usize).clamp(1, s);
    let radius = sorted[rank - 1];

    let inside: Vec<usize> = (0..s).filter(|&i| dist[i] <= radius).collect();
    let farthest = |pool: &mut dyn Iterator<Item = usize>| -> usize {
        let mut best: Option<usize> = None;
        for i in pool {
            if best.map_or(true, |b| dist[i] > dist[b]) {
                best = Some(i);
            }
        }
        best.expect("ball contains the closest draw")
    };
    let h = farthest(&mut inside.iter().copied());
    let kmin = inside.iter().map(|&i| partitions[i].n_clusters()).min().unwrap_or(0);
    let kmax = inside.iter().map(|&i| partitions[i].n_clusters()).max().unwrap_or(0);
    let up = farthest(&mut inside.iter().copied().filter(|&i| partitions[i].n_clusters() == kmin));
    let lo = farthest(&mut inside.iter().copied().filter(|&i| partitions[i].n_clusters() == kmax));
    Ok(CredibleBall {
        horizontal: partitions[h].clone(),
        upper: partitions[up].clone(),
        lower: partitions[lo].clone(),
        radius,
    })
}

/// Subjects whose set of co-members is the same in all four partitions keep
/// their mode label; everyone else is `None`.
pub fn consensus_labels(
    mode: &Partition,
    horizontal: &Partition,
    upper: &Partition,
    lower: &Partition,
) -> Result<Vec<Option<u32>>, SummaryError> {
    let n = mode.len();
    for p in [horizontal, upper, lower] {
        if p.len() != n {
            return Err(SummaryError::LengthMismatch { left: n, right: p.len() });
        }
    }
    let others = [horizontal, upper, lower];
    Ok((0..n)
        .map(|i| {
            let stable = (0..n).all(|j| {
                let m = mode.same_cluster(i, j);
                others.iter().all(|p| p.same_cluster(i, j) == m)
            });
            stable.then(|| mode.labels()[i])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionSummary {
    pub mode: Partition,
    pub expected_loss: f64,
    pub horizontal_bound: Partition,
    pub upper_bound: Partition,
    pub lower_bound: Partition,
    pub consensus: Vec<Option<u32>>,
    pub ball_radius: f64,
    /// Local-search improvement of the mode, reported separately.
    pub refined: Option<PointEstimate>,
}

/// Point estimate, credible ball and consensus in one call. With `refine`
/// set, the local-search result is attached but the mode stays the best
/// draw.
pub fn summarize_partitions<E: Executor>(
    partitions: &[Partition],
    level: f64,
    refine: bool,
    exec: &E,
) -> Result<PartitionSummary, SummaryError> {
    let est = vi_point_estimate_with(partitions, exec)?;
    let ball = credible_ball_bounds(partitions, &est.partition, level)?;
    let consensus = consensus_labels(&est.partition, &ball.horizontal, &ball.upper, &ball.lower)?;
    let refined = if refine {
        Some(refine_point_estimate(&est.partition, partitions, 50)?)
    } else {
        None
    };
    Ok(PartitionSummary {
        mode: est.partition,
        expected_loss: est.expected_loss,
        horizontal_bound: ball.horizontal,
        upper_bound: ball.upper,
        lower_bound: ball.lower,
        consensus,
        ball_radius: ball.radius,
        refined,
    })
}
