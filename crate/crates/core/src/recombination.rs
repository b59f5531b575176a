//! Recombination laws `r_L` over the subset of loci inherited from the first parent.

use rand::Rng;

use crate::combinatorics::{card, check_loci, full_mask, SubsetFn};
use crate::error::{invalid, Result};
use crate::Mask;

#[derive(Debug, Clone, PartialEq)]
pub enum RecombinationKind {
    /// Offspring copies one parent entirely.
    None,
    /// Every locus inherited independently from either parent.
    Free,
    /// At most one crossover, occurring with probability `r` at a uniform gap.
    SingleCrossover(f64),
    /// Explicit weights `r_L` indexed by bitmask.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecombinationDistribution {
    n: usize,
    r: SubsetFn,
    cdf: Vec<f64>,
    /// Probability that loci `k` and `ℓ` come from different parents.
    split: Vec<Vec<f64>>,
}

const SUM_TOL: f64 = 1e-12;

pub fn make_recombination(n: usize, kind: &RecombinationKind) -> Result<RecombinationDistribution> {
    check_loci(n)?;
    let full = full_mask(n);
    let size = 1usize << n;
    let mut w = vec![0.0; size];
    match kind {
        RecombinationKind::None => {
            w[0] = 0.5;
            w[full as usize] += 0.5;
        }
        RecombinationKind::Free => w.iter_mut().for_each(|v| *v = 1.0 / size as f64),
        RecombinationKind::SingleCrossover(r) => {
            if !(0.0..=1.0).contains(r) {
                return invalid(format!("crossover probability {r} outside [0,1]"));
            }
            if n == 1 {
                w[0] = 0.5;
                w[1] = 0.5;
            } else {
                w[0] = (1.0 - r) / 2.0;
                w[full as usize] = (1.0 - r) / 2.0;
                let each = r / (2.0 * (n - 1) as f64);
                for x in 1..n {
                    let head = full_mask(x);
                    w[head as usize] += each;
                    w[(full & !head) as usize] += each;
                }
            }
        }
        RecombinationKind::Custom(weights) => {
            if weights.len() != size {
                return invalid(format!("expected {size} recombination weights, got {}", weights.len()));
            }
            if weights.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return invalid("recombination weights must be finite and nonnegative");
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > SUM_TOL {
                return invalid(format!("recombination weights sum to {total}, not 1"));
            }
            for l in 0..=full {
                let a = weights[l as usize];
                let b = weights[(full & !l) as usize];
                if (a - b).abs() > SUM_TOL {
                    return invalid(format!("r_L ≠ r_L̄ for L = {l:#x}"));
                }
            }
            w.copy_from_slice(weights);
        }
    }
    Ok(RecombinationDistribution::from_weights(n, w))
}

impl RecombinationDistribution {
    fn from_weights(n: usize, w: Vec<f64>) -> Self {
        let mut cdf = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        for v in &w {
            acc += v;
            cdf.push(acc);
        }
        let r = SubsetFn::new(n, w).expect("validated weights");
        let mut split = vec![vec![0.0; n]; n];
        for l in 0..=r.full() {
            for k in 0..n {
                for h in 0..n {
                    if (l >> k & 1) != (l >> h & 1) {
                        split[k][h] += r[l];
                    }
                }
            }
        }
        Self { n, r, cdf, split }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &SubsetFn {
        &self.r
    }

    pub fn get(&self, l: Mask) -> f64 {
        self.r[l]
    }

    /// `r_{k,ℓ}` for 0-based loci.
    pub fn split(&self, k: usize, h: usize) -> f64 {
        self.split[k][h]
    }

    /// `r(n)`, the smallest pairwise split probability; infinite when `n = 1`.
    pub fn min_split(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for k in 0..self.n {
            for h in k + 1..self.n {
                lo = lo.min(self.split[k][h]);
            }
        }
        lo
    }

    /// `Σ_{I ⊆ {1..n}∖{k,ℓ}} r_I`.
    pub fn mass_avoiding(&self, avoid: Mask) -> f64 {
        (0..=self.r.full()).filter(|l| l & avoid == 0).map(|l| self.r[l]).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mask {
        let u = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as Mask
    }

    /// `q((j,k); ℓ)`: probability that parents `j` (first) and `k` produce `ℓ` before mutation.
    pub fn offspring_prob(&self, j: Mask, k: Mask, l: Mask) -> f64 {
        (0..=self.r.full())
            .filter(|&m| (j & m) | (k & !m & self.r.full()) == l)
            .map(|m| self.r[m])
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        let full = self.r.full();
        (0..=full).all(|l| (self.r[l] - self.r[full & !l]).abs() <= SUM_TOL)
    }

    pub fn support_sizes(&self) -> Vec<usize> {
        (0..=self.r.full()).filter(|&l| self.r[l] > 0.0).map(card).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn free_is_uniform() {
        let r = make_recombination(3, &RecombinationKind::Free).unwrap();
        assert!(r.weights().values().iter().all(|&v| v == 0.125));
        assert_eq!(r.min_split(), 0.5);
    }

    #[test]
    fn none_never_splits() {
        let r = make_recombination(4, &RecombinationKind::None).unwrap();
        assert_eq!(r.min_split(), 0.0);
        assert_eq!(r.get(0), 0.5);
        assert_eq!(r.get(15), 0.5);
    }

    #[test]
    fn single_crossover_weights() {
        let r = make_recombination(3, &RecombinationKind::SingleCrossover(0.5)).unwrap();
        assert_eq!(r.get(0b001), 0.125);
        assert_eq!(r.get(0b110), 0.125);
        assert_eq!(r.get(0b011), 0.125);
        assert_eq!(r.get(0b100), 0.125);
        assert_eq!(r.get(0), 0.25);
        assert_eq!(r.get(0b111), 0.25);
        assert_eq!(r.get(0b010), 0.0);
        assert!(r.is_symmetric());
        assert!(r.min_split() > 0.0);
    }

    #[test]
    fn custom_validation() {
        assert!(make_recombination(1, &RecombinationKind::Custom(vec![0.3, 0.3])).is_err());
        assert!(make_recombination(1, &RecombinationKind::Custom(vec![0.7, 0.3])).is_err());
        assert!(make_recombination(1, &RecombinationKind::Custom(vec![0.5, 0.5])).is_ok());
    }

    #[test]
    fn offspring_law_sums_to_one() {
        let r = make_recombination(3, &RecombinationKind::SingleCrossover(0.3)).unwrap();
        for (j, k) in [(0b101, 0b011), (0, 7), (6, 6)] {
            let total: f64 = (0..8).map(|l| r.offspring_prob(j, k, l)).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_matches_weights() {
        let r = make_recombination(2, &RecombinationKind::SingleCrossover(0.4)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut hits = [0usize; 4];
        let n = 200_000;
        for _ in 0..n {
            hits[r.sample(&mut rng) as usize] += 1;
        }
        for l in 0..4 {
            let p = r.get(l);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((hits[l as usize] as f64 / n as f64 - p).abs() < 5.0 * sd + 1e-12);
        }
    }
}
