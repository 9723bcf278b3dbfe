use alloc::vec;
use alloc::vec::Vec;

/// Cluster configuration with canonical labels `1..=n_clusters`, numbered
/// in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    labels: Vec<u32>,
    n_clusters: usize,
}

impl Partition {
    /// Canonicalizes arbitrary integer labels.
    pub fn from_labels<T: Copy + Ord>(raw: &[T]) -> Self {
        let mut seen: Vec<(T, u32)> = Vec::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            let lab = match seen.binary_search_by(|(v, _)| v.cmp(&r)) {
                Ok(pos) => seen[pos].1,
                Err(pos) => {
                    let next = seen.len() as u32 + 1;
                    seen.insert(pos, (r, next));
                    next
                }
            };
            labels.push(lab);
        }
        Self {
            labels,
            n_clusters: seen.len(),
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Subjects per cluster, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_clusters];
        for &l in &self.labels {
            s[l as usize - 1] += 1;
        }
        s
    }

    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_labels_follow_first_appearance() {
        let p = Partition::from_labels(&[7, 7, 2, 9, 2]);
        assert_eq!(p.labels(), &[1, 1, 2, 3, 2]);
        assert_eq!(p.n_clusters(), 3);
        assert_eq!(p.sizes(), vec![2, 2, 1]);
        assert_eq!(Partition::from_labels(&[0usize, 0, 1]), Partition::from_labels(&[5u32, 5, 3]));
    }

    #[test]
    fn empty_partition() {
        let p = Partition::from_labels::<u32>(&[]);
        assert!(p.is_empty());
        assert_eq!(p.n_clusters(), 0);
    }
}
