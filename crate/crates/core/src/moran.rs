//! The finite-population chain: state, one-step transition, exact transition
//! law, and the allele-frequency / disequilibrium coordinates.

use rand::Rng;
use rayon::prelude::*;

use crate::assortment::AssortmentScheme;
use crate::combinatorics::{card, full_mask, members, submasks, SubsetFn};
use crate::error::{invalid, Error, Result};
use crate::recombination::RecombinationDistribution;
use crate::rng::{stream, Stream};
use crate::trajectory::Trajectory;
use crate::Mask;

/// Largest `n` for which the pair-weight table is precomputed.
const PAIR_TABLE_MAX_LOCI: usize = 10;

#[derive(Debug, Clone)]
pub struct ModelParams {
    scheme: AssortmentScheme,
    recomb: RecombinationDistribution,
    mu0: f64,
    mu1: f64,
    pop: u64,
    pair_weights: Option<Vec<f64>>,
}

impl ModelParams {
    pub fn new(scheme: AssortmentScheme, recomb: RecombinationDistribution, mu0: f64, mu1: f64, pop: u64) -> Result<Self> {
        let n = scheme.n();
        if recomb.n() != n {
            return invalid(format!("recombination is for {} loci, scheme for {n}", recomb.n()));
        }
        if pop == 0 {
            return invalid("population size must be positive");
        }
        for (name, mu) in [("mu0", mu0), ("mu1", mu1)] {
            if !mu.is_finite() || mu < 0.0 || mu / pop as f64 > 1.0 {
                return invalid(format!("{name} = {mu} must satisfy 0 ≤ μ ≤ N"));
            }
        }
        scheme.validate_for_population(pop)?;
        let pair_weights = (n <= PAIR_TABLE_MAX_LOCI).then(|| {
            let size = 1u32 << n;
            let mut w = Vec::with_capacity((size * size) as usize);
            for a in 0..size {
                for k in 0..size {
                    w.push(1.0 + scheme.pair(a, k) / pop as f64);
                }
            }
            w
        });
        Ok(Self { scheme, recomb, mu0, mu1, pop, pair_weights })
    }

    pub fn n(&self) -> usize {
        self.scheme.n()
    }

    pub fn pop(&self) -> u64 {
        self.pop
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn scheme(&self) -> &AssortmentScheme {
        &self.scheme
    }

    pub fn recomb(&self) -> &RecombinationDistribution {
        &self.recomb
    }

    /// The same model at another population size.
    pub fn with_pop(&self, pop: u64) -> Result<Self> {
        Self::new(self.scheme.clone(), self.recomb.clone(), self.mu0, self.mu1, pop)
    }

    #[inline]
    fn weight(&self, a: Mask, k: Mask) -> f64 {
        match &self.pair_weights {
            Some(w) => w[((a as usize) << self.n()) | k as usize],
            None => 1.0 + self.scheme.pair(a, k) / self.pop as f64,
        }
    }

    /// `μ^{(N)}(ℓ, j)`: probability that offspring `ℓ` becomes `j` after mutation.
    pub fn mutation_prob(&self, l: Mask, j: Mask) -> f64 {
        let p1 = self.mu1 / self.pop as f64;
        let p0 = self.mu0 / self.pop as f64;
        (0..self.n())
            .map(|u| {
                let from = l >> u & 1;
                let to = j >> u & 1;
                match (from, to) {
                    (1, 0) => p1,
                    (1, _) => 1.0 - p1,
                    (0, 1) => p0,
                    _ => 1.0 - p0,
                }
            })
            .product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationState {
    n: usize,
    counts: Vec<u64>,
    pop: u64,
}

impl PopulationState {
    pub fn new(n: usize, counts: Vec<u64>) -> Result<Self> {
        crate::combinatorics::check_loci(n)?;
        if counts.len() != 1 << n {
            return invalid(format!("expected {} genotype counts, got {}", 1usize << n, counts.len()));
        }
        let pop = counts.iter().sum();
        if pop == 0 {
            return invalid("population must be nonempty");
        }
        Ok(Self { n, counts, pop })
    }

    pub fn monomorphic(n: usize, pop: u64, genotype: Mask) -> Result<Self> {
        let mut counts = vec![0; 1 << n];
        if genotype as usize >= counts.len() {
            return invalid("genotype outside the type space");
        }
        counts[genotype as usize] = pop;
        Self::new(n, counts)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pop(&self) -> u64 {
        self.pop
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.pop as f64).collect()
    }
}

fn check_state(state: &PopulationState, params: &ModelParams) -> Result<()> {
    if state.n != params.n() || state.pop != params.pop {
        return invalid(format!(
            "state (n={}, N={}) does not match model (n={}, N={})",
            state.n,
            state.pop,
            params.n(),
            params.pop
        ));
    }
    Ok(())
}

/// One replacement event.
pub fn step<R: Rng + ?Sized>(state: &mut PopulationState, params: &ModelParams, rng: &mut R) {
    let size = state.counts.len();
    let mut u = rng.random_range(0..state.pop);
    let mut first = 0;
    while u >= state.counts[first] {
        u -= state.counts[first];
        first += 1;
    }
    let a = first as Mask;

    let mut total = 0.0;
    for k in 0..size {
        if state.counts[k] > 0 {
            total += params.weight(a, k as Mask) * state.counts[k] as f64;
        }
    }
    let mut v = rng.random::<f64>() * total;
    let mut second = size - 1;
    for k in 0..size {
        if state.counts[k] == 0 {
            continue;
        }
        let w = params.weight(a, k as Mask) * state.counts[k] as f64;
        if v < w {
            second = k;
            break;
        }
        v -= w;
        second = k;
    }
    let b = second as Mask;

    let l = params.recomb.sample(rng);
    let full = full_mask(state.n);
    let mut child = (a & l) | (b & !l & full);
    if params.mu0 > 0.0 || params.mu1 > 0.0 {
        let p1 = params.mu1 / params.pop as f64;
        let p0 = params.mu0 / params.pop as f64;
        for bit in 0..state.n {
            let p = if child >> bit & 1 == 1 { p1 } else { p0 };
            if p > 0.0 && rng.random::<f64>() < p {
                child ^= 1 << bit;
            }
        }
    }
    state.counts[first] -= 1;
    state.counts[child as usize] += 1;
}

/// Full one-step kernel `K[i][j]` on frequencies `z`, including the stay-put mass on the diagonal.
pub fn exact_kernel(z: &[f64], params: &ModelParams) -> Vec<Vec<f64>> {
    let n = params.n();
    let size = 1usize << n;
    assert_eq!(z.len(), size);
    let full = full_mask(n);
    let support: Vec<(Mask, f64)> =
        (0..=full).map(|l| (l, params.recomb.get(l))).filter(|&(_, r)| r > 0.0).collect();
    let mutation: Vec<Vec<f64>> =
        (0..size).map(|l| (0..size).map(|j| params.mutation_prob(l as Mask, j as Mask)).collect()).collect();
    let mut kernel = vec![vec![0.0; size]; size];
    for i in 0..size {
        if z[i] == 0.0 {
            continue;
        }
        let norm: f64 = (0..size).map(|h| params.weight(i as Mask, h as Mask) * z[h]).sum();
        let mut pre = vec![0.0; size];
        for k in 0..size {
            if z[k] == 0.0 {
                continue;
            }
            let w = z[k] * params.weight(i as Mask, k as Mask) / norm;
            for &(l, r) in &support {
                let child = ((i as Mask) & l) | ((k as Mask) & !l & full);
                pre[child as usize] += w * r;
            }
        }
        for j in 0..size {
            kernel[i][j] = z[i] * (0..size).map(|l| pre[l] * mutation[l][j]).sum::<f64>();
        }
    }
    kernel
}

/// `f_N(z, i, j)`: probability that an `i` individual is replaced by a `j` individual.
pub fn exact_transition(state: &PopulationState, params: &ModelParams, i: Mask, j: Mask) -> Result<f64> {
    check_state(state, params)?;
    if i == j {
        return invalid("only off-diagonal transitions are defined");
    }
    let size = 1u32 << state.n;
    if i >= size || j >= size {
        return invalid("genotype outside the type space");
    }
    Ok(exact_kernel(&state.frequencies(), params)[i as usize][j as usize])
}

/// Marginals `X(L)` and disequilibria `Y(L) = Π_{i∈L} x_i − X(L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateView {
    pub x: Vec<f64>,
    pub marginals: SubsetFn,
    /// `Y(L)` for `|L| ≥ 2`, zero elsewhere.
    pub y: SubsetFn,
}

/// Coordinates of a frequency vector `z` over genotypes.
pub fn coordinates_of(n: usize, z: &[f64]) -> CoordinateView {
    let full = full_mask(n);
    // zero-allele mass: X(L) sums z over genotypes with no 1 inside L, i.e. over subsets of L̄
    let mut sub = SubsetFn::new(n, z.to_vec()).expect("frequency vector has 2ⁿ finite entries");
    for u in 0..n {
        let bit = 1 << u;
        for m in 0..=full {
            if m & bit != 0 {
                sub[m] += sub[m ^ bit];
            }
        }
    }
    let marginals = SubsetFn::from_fn(n, |l| sub[full & !l]);
    let x: Vec<f64> = (0..n).map(|u| marginals[1 << u]).collect();
    let y = SubsetFn::from_fn(n, |l| {
        if card(l) >= 2 {
            members(l).map(|u| x[u]).product::<f64>() - marginals[l]
        } else {
            0.0
        }
    });
    CoordinateView { x, marginals, y }
}

pub fn coordinates(state: &PopulationState) -> CoordinateView {
    coordinates_of(state.n, &state.frequencies())
}

const SIMPLEX_TOL: f64 = 1e-12;

/// Genotype frequencies reproducing `(x, y)`; `y` is read on subsets with `|L| ≥ 2`.
pub fn invert_coordinates(x: &[f64], y: &SubsetFn) -> Result<Vec<f64>> {
    let n = x.len();
    if y.n() != n {
        return invalid("x and y disagree on the locus count");
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return invalid("allele frequencies must lie in [0,1]");
    }
    let full = full_mask(n);
    let mut z = vec![0.0; 1 << n];
    for j in 0..=full {
        let base: f64 = (0..n).map(|u| if j >> u & 1 == 1 { x[u] } else { 1.0 - x[u] }).product();
        let rest = full & !j;
        let corr: f64 = submasks(rest)
            .map(|extra| j | extra)
            .filter(|&i| card(i) >= 2)
            .map(|i| if card(i & !j) % 2 == 0 { y[i] } else { -y[i] })
            .sum();
        // J is the set of zero alleles, so the genotype mask is its complement
        z[(full & !j) as usize] = base - corr;
    }
    if z.iter().any(|&v| v < -SIMPLEX_TOL || v > 1.0 + SIMPLEX_TOL) {
        return Err(Error::Infeasible("(x, y) does not correspond to a genotype distribution".into()));
    }
    Ok(z)
}

/// Schedule for recorded chain runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub steps: u64,
    pub record_every: u64,
    pub y_masks: Vec<Mask>,
}

fn record(traj: &mut Trajectory, t: f64, state: &PopulationState, y_masks: &[Mask]) {
    let view = coordinates(state);
    let mut row = Vec::with_capacity(1 + view.x.len() + y_masks.len());
    row.push(t);
    row.extend_from_slice(&view.x);
    row.extend(y_masks.iter().map(|&m| view.y[m]));
    traj.rows.push(row);
}

/// One recorded path; rows at steps `record_every, 2·record_every, …`.
pub fn simulate_replica(params: &ModelParams, init: &PopulationState, plan: &RunPlan, rng: &mut Stream) -> Result<Trajectory> {
    check_state(init, params)?;
    if plan.record_every == 0 {
        return invalid("record_every must be positive");
    }
    let mut traj = Trajectory::with_layout(init.n, &plan.y_masks);
    let mut state = init.clone();
    let mut t = 0u64;
    while t < plan.steps {
        let chunk = plan.record_every.min(plan.steps - t);
        for _ in 0..chunk {
            step(&mut state, params, rng);
        }
        t += chunk;
        if t % plan.record_every == 0 {
            record(&mut traj, t as f64, &state, &plan.y_masks);
        }
    }
    Ok(traj)
}

/// Independent replicas, replica `r` driven by stream `r` of `seed`.
pub fn simulate(params: &ModelParams, init: &PopulationState, plan: &RunPlan, seed: u64, replicas: u64) -> Result<Vec<Trajectory>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| simulate_replica(params, init, plan, &mut stream(seed, r)))
        .collect()
}
