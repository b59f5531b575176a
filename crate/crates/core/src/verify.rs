//! Named oracle suites that cross-check independent code paths and the
//! finite-population chain against its diffusion limit.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::assortment::{alpha_distinguished, drift_polynomial, drift_polynomials, mean_assortment};
use crate::combinatorics::{
    b_polynomial, binomial, block_matrix_posdef, card, delta_set, elementary_symmetric, full_mask, leading_diffs,
    members, multivariate_identity_sides, s_t_transform, submasks,
};
use crate::critical::{phi_b_form, phi_elementary_form};
use crate::diffusion::{drift, reversibility_residual, wf_two_locus_drift, DiffusionSpec, WfMutation, WfSigma};
use crate::error::{Error, Result};
use crate::linkage::{linkage_decay_ode, linkage_rate, sup_norm};
use crate::moran::{coordinates_of, invert_coordinates, ModelParams};
use crate::oracle::{b0_terms, b1_terms, drift_oracle_at, moment_oracle_at};
use crate::recombination::{make_recombination, RecombinationKind};
use crate::rng::{stream, Stream};
use crate::stationary::h_poly;
use crate::{AssortmentScheme, Mask, PolyForm, SubsetFn};

pub const IDENTITY_TOL: f64 = 1e-12;
pub const REVERSIBILITY_TOL: f64 = 1e-10;
/// Accepted band around the expected ratio in order-of-convergence fits.
pub const DRIFT_ORDER_BAND: f64 = 0.3;
pub const MOMENT_ORDER_BAND: f64 = 0.4;
pub const ORDER_POPULATIONS: [u64; 3] = [16, 32, 64];
pub const BLOCK_MATRIX_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.9, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Combinatorics,
    DriftOracle,
    Moments,
    LinkageDecay,
    Reversibility,
    WfComparison,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Combinatorics,
        Suite::DriftOracle,
        Suite::Moments,
        Suite::LinkageDecay,
        Suite::Reversibility,
        Suite::WfComparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Combinatorics => "combinatorics",
            Suite::DriftOracle => "drift-oracle",
            Suite::Moments => "moments",
            Suite::LinkageDecay => "linkage-decay",
            Suite::Reversibility => "reversibility",
            Suite::WfComparison => "wf-comparison",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::InvalidArgument(format!("unknown suite '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Human-readable acceptance condition on `value`.
    pub condition: String,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), passed: value <= bound, value, condition: format!("<= {bound:e}") }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), passed: (lo..=hi).contains(&value), value, condition: format!("in [{lo}, {hi}]") }
    }

    /// `value` counts failing cases; passes when zero.
    pub fn none_failed(name: impl Into<String>, failures: usize) -> Self {
        Self { name: name.into(), passed: failures == 0, value: failures as f64, condition: "no failing cases".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64, checks: Vec<Check>) -> Self {
        Self { suite: suite.into(), seed, passed: checks.iter().all(|c| c.passed), checks }
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Combinatorics => combinatorics_suite(seed),
        Suite::DriftOracle => drift_oracle_suite(seed),
        Suite::Moments => moments_suite(seed),
        Suite::LinkageDecay => linkage_decay_suite(seed),
        Suite::Reversibility => reversibility_suite(seed),
        Suite::WfComparison => wf_comparison_suite(seed),
    }
}

fn uniform_vec(rng: &mut Stream, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_subset_fn(rng: &mut Stream, n: usize) -> SubsetFn {
    SubsetFn::from_fn(n, |_| rng.random_range(-1.0..1.0))
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Random scheme with a value per unordered pair of difference sets.
///
/// With `zero_diagonal`, `s_{i,i} = 0`; otherwise the common diagonal value is random too.
pub fn random_custom_scheme(rng: &mut Stream, n: usize, scale: f64, zero_diagonal: bool) -> Result<AssortmentScheme> {
    let full = full_mask(n);
    let mut entries = Vec::new();
    for diff in 0..=full {
        for d01 in submasks(diff) {
            let d10 = diff & !d01;
            if d01 <= d10 && !(zero_diagonal && diff == 0) {
                entries.push(((d01, d10), rng.random_range(-scale..scale)));
            }
        }
    }
    AssortmentScheme::custom(n, entries)
}

/// `δ_{b₁}∘…∘δ_{b_r}[f](A)` by recursion on single-element differences.
fn delta_iterated(f: &SubsetFn, order: &[usize], a: Mask) -> f64 {
    match order.split_first() {
        None => f[a],
        Some((&b, rest)) => delta_iterated(f, rest, a | 1 << b) - delta_iterated(f, rest, a),
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

pub fn combinatorics_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 0);
    let mut checks = Vec::new();

    let mut err = 0.0f64;
    for n in 1..=8 {
        for k in 0..12 {
            let f = random_subset_fn(&mut rng, n);
            let t = if k == 0 { 0.7 } else { rng.random_range(-1.0..1.0) };
            let back = s_t_transform(&s_t_transform(&f, t), -t);
            err = err.max(max_abs((0..=f.full()).map(|a| back[a] - f[a])));
        }
    }
    checks.push(Check::at_most("s_t_round_trip", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    for n in 1..=5 {
        for _ in 0..20 {
            let f = random_subset_fn(&mut rng, n);
            let g = s_t_transform(&f, -1.0);
            for a in 0..=f.full() {
                err = err.max((g[a] - delta_set(&f, a, 0)?).abs());
            }
        }
    }
    checks.push(Check::at_most("s_minus_one_is_delta", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    for n in 1..=6 {
        for _ in 0..4 {
            let f = random_subset_fn(&mut rng, n);
            let full = full_mask(n);
            let b: Mask = rng.random_range(0..=full);
            let a: Mask = rng.random_range(0..=full) & !b;
            let closed = delta_set(&f, b, a)?;
            let elems: Vec<usize> = members(b).collect();
            for order in permutations(&elems) {
                err = err.max((delta_iterated(&f, &order, a) - closed).abs());
            }
        }
    }
    checks.push(Check::at_most("delta_closed_vs_iterated", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    for n in 1..=8 {
        for _ in 0..4 {
            let f = random_subset_fn(&mut rng, n);
            for a in 0..=f.full() {
                let mut acc = 0.0;
                for b in submasks(a) {
                    acc += delta_set(&f, b, 0)?;
                }
                err = err.max((acc - f[a]).abs());
            }
        }
    }
    checks.push(Check::at_most("set_inversion", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    for len in 1..=9 {
        for _ in 0..12 {
            let s = uniform_vec(&mut rng, len, -1.0, 1.0);
            let d = leading_diffs(&s);
            for (k, &sk) in s.iter().enumerate() {
                let acc: f64 = (0..=k).map(|l| binomial(k, l) * d[l]).sum();
                err = err.max((acc - sk).abs());
            }
        }
    }
    checks.push(Check::at_most("scalar_inversion", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    for n in 1..=5 {
        for _ in 0..20 {
            let f = random_subset_fn(&mut rng, n);
            let x = uniform_vec(&mut rng, n, -1.0, 1.0);
            let (lhs, rhs) = multivariate_identity_sides(&f, &x, rng.random_range(-1.0..1.0));
            err = err.max((lhs - rhs).abs());
        }
    }
    checks.push(Check::at_most("multivariate_identity", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    for n in 2..=6 {
        for _ in 0..20 {
            let x = uniform_vec(&mut rng, n, -1.0, 1.0);
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            let without = |skip: &[usize]| -> Vec<f64> {
                x.iter().enumerate().filter(|(u, _)| !skip.contains(u)).map(|(_, &v)| v).collect()
            };
            for k in 0..=n - 2 {
                let lhs = x[i] * elementary_symmetric(&without(&[i]), k)?
                    - x[j] * elementary_symmetric(&without(&[j]), k)?;
                let rhs = (x[i] - x[j]) * elementary_symmetric(&without(&[i, j]), k)?;
                err = err.max((lhs - rhs).abs());
            }
        }
    }
    checks.push(Check::at_most("elementary_symmetric_exchange", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    for n in 1..=5 {
        for _ in 0..20 {
            let a = uniform_vec(&mut rng, n + 1, -1.0, 1.0);
            let l = rng.random_range(0..=n);
            let y = rng.random_range(0.0..0.5);
            let d = leading_diffs(&a);
            let mut args = vec![0.25; l];
            args.extend(std::iter::repeat(y).take(n - l));
            let mut lhs = 0.0;
            for (k, dk) in d.iter().enumerate() {
                lhs += 2f64.powi(k as i32) * dk * elementary_symmetric(&args, k)?;
            }
            let mut rhs = 0.0;
            for (i, ai) in a.iter().enumerate() {
                rhs += ai * b_polynomial(n, l, i, 2.0 * y)?;
            }
            err = err.max((lhs - rhs).abs());
        }
    }
    checks.push(Check::at_most("elementary_vs_b_polynomial", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    let mut negative = 0;
    for n in 1..=8 {
        for _ in 0..10 {
            let l = rng.random_range(0..=n);
            let y = rng.random_range(1e-6..1.0 - 1e-6);
            let mut sum = 0.0;
            for i in 0..=n {
                let v = b_polynomial(n, l, i, y)?;
                negative += usize::from(v < 0.0);
                sum += v;
            }
            err = err.max((sum - 1.0).abs());
        }
    }
    checks.push(Check::at_most("b_polynomial_rows_sum_to_one", err, IDENTITY_TOL));
    checks.push(Check::none_failed("b_polynomial_nonnegative", negative));

    let mut failures = 0;
    for n in 1..=8 {
        for k in 0..=n {
            for a in BLOCK_MATRIX_GRID {
                failures += usize::from(!block_matrix_posdef(n, k, a)?);
            }
        }
    }
    failures += usize::from(block_matrix_posdef(2, 1, 1.0)?);
    checks.push(Check::none_failed("block_matrix_positive_definite", failures));

    Ok(SuiteReport::new(Suite::Combinatorics.name(), seed, checks))
}

/// Equalities between independently coded forms of the drift polynomial,
/// the potential `H`, the coefficients `α`, and the critical-point equation.
pub fn dual_form_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = stream(seed, 1);
    let mut checks = Vec::new();

    let (mut p_err, mut h_err, mut batch_err, mut a_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..instances {
        let n = 1 + k % 6;
        let scheme = random_custom_scheme(&mut rng, n, 1.0, false)?;
        let table = mean_assortment(&scheme);
        let x = uniform_vec(&mut rng, n, 0.0, 1.0);
        let mut batch = vec![0.0; n];
        drift_polynomials(&table, &x, &mut batch);
        for i in 0..n {
            let fa = drift_polynomial(&table, i, &x, PolyForm::Factorised);
            let ex = drift_polynomial(&table, i, &x, PolyForm::Expanded);
            p_err = p_err.max((fa - ex).abs());
            batch_err = batch_err.max((batch[i] - ex).abs());
        }
        let spec = DiffusionSpec::new(table.clone(), 0.7, 0.7)?;
        h_err = h_err.max((h_poly(&spec, &x, PolyForm::Factorised) - h_poly(&spec, &x, PolyForm::Expanded)).abs());
        for l in 1..=full_mask(n) {
            for i in members(l) {
                a_err = a_err.max((table.alpha()[l] - alpha_distinguished(&table, i, l & !(1 << i))).abs());
            }
        }
    }
    checks.push(Check::at_most("drift_polynomial_factorised_vs_expanded", p_err, IDENTITY_TOL));
    checks.push(Check::at_most("drift_polynomial_batch_vs_single", batch_err, IDENTITY_TOL));
    checks.push(Check::at_most("h_factorised_vs_expanded", h_err, IDENTITY_TOL));
    checks.push(Check::at_most("alpha_subset_vs_distinguished", a_err, IDENTITY_TOL));

    let mut phi_err = 0.0f64;
    for k in 0..instances {
        let n = 1 + k % 6;
        let s = uniform_vec(&mut rng, n + 1, -1.0, 1.0);
        let mu = rng.random_range(0.1..2.0);
        let spec = DiffusionSpec::new(mean_assortment(&AssortmentScheme::hamming(s)?), mu, mu)?;
        let l = rng.random_range(0..n);
        let y = rng.random_range(0.0..0.25);
        phi_err = phi_err.max((phi_b_form(&spec, l, y)? - phi_elementary_form(&spec, l, y)?).abs());
    }
    checks.push(Check::at_most("phi_elementary_vs_b_polynomial", phi_err, IDENTITY_TOL));

    Ok(SuiteReport::new("dual-forms", seed, checks))
}

fn free(n: usize) -> Result<crate::recombination::RecombinationDistribution> {
    make_recombination(n, &RecombinationKind::Free)
}

fn random_two_locus_params(rng: &mut Stream, scale: f64, pop: u64) -> Result<ModelParams> {
    let scheme = random_custom_scheme(rng, 2, scale, false)?;
    let (mu0, mu1) = (rng.random_range(0.2..1.5), rng.random_range(0.2..1.5));
    ModelParams::new(scheme, free(2)?, mu0, mu1, pop)
}

fn product_state(x: &[f64]) -> Result<Vec<f64>> {
    invert_coordinates(x, &SubsetFn::zeros(x.len()))
}

fn grid_points() -> Vec<[f64; 2]> {
    let g = [0.25, 0.5, 0.75];
    g.iter().flat_map(|&a| g.iter().map(move |&b| [a, b])).collect()
}

/// Two-sided fit of successive residual ratios to `expected`.
fn ratio_checks(name: &str, residuals: &[f64], expected: f64, band: f64) -> Vec<Check> {
    ratio_checks_bounded(name, residuals, expected * (1.0 - band), expected * (1.0 + band))
}

/// Residual is `O(N⁻¹)`: successive ratios at least `2(1 − band)`.
fn first_order_checks(name: &str, residuals: &[f64], band: f64) -> Vec<Check> {
    ratio_checks_bounded(name, residuals, 2.0 * (1.0 - band), f64::INFINITY)
}

fn ratio_checks_bounded(name: &str, residuals: &[f64], lo: f64, hi: f64) -> Vec<Check> {
    residuals
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let label = format!("{name}_ratio_N{}_N{}", ORDER_POPULATIONS[k], ORDER_POPULATIONS[k + 1]);
            Check::within(label, w[0] / w[1], lo, hi)
        })
        .collect()
}

/// Max over the `{¼,½,¾}²` product states of `|N²E[ΔX_i] − b_i(x)|`, per population size.
pub fn x_drift_residuals(params: &ModelParams, pops: &[u64]) -> Result<Vec<f64>> {
    let spec = DiffusionSpec::from_params(params);
    pops.iter()
        .map(|&pop| {
            let p = params.with_pop(pop)?;
            let mut worst = 0.0f64;
            for x in grid_points() {
                let m = moment_oracle_at(&product_state(&x)?, &p)?;
                let b = drift(&spec, &x);
                worst = worst.max(max_abs((0..2).map(|i| m.first[i] - b[i])));
            }
            Ok(worst)
        })
        .collect()
}

pub fn drift_oracle_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 2);
    let mut checks = Vec::new();

    let mut err = 0.0f64;
    for n in 2..=3 {
        for _ in 0..5 {
            let scheme = random_custom_scheme(&mut rng, n, 2.0, false)?;
            let r = make_recombination(n, &RecombinationKind::SingleCrossover(rng.random_range(0.1..0.5)))?;
            let params = ModelParams::new(scheme, r, 0.5, 0.5, 32)?;
            let x = uniform_vec(&mut rng, n, 0.05, 0.95);
            let b0 = b0_terms(&product_state(&x)?, &params);
            for u in 0..n {
                err = err.max((0..b0.len()).filter(|i| i >> u & 1 == 0).map(|i| b0[i]).sum::<f64>().abs());
            }
        }
    }
    checks.push(Check::at_most("b0_marginals_vanish_on_manifold", err, IDENTITY_TOL));

    let mut err = 0.0f64;
    for n in 1..=3 {
        let params = ModelParams::new(AssortmentScheme::hamming(vec![0.0; n + 1])?, free(n)?, 0.0, 0.0, 32)?;
        for _ in 0..5 {
            let mut z = uniform_vec(&mut rng, 1 << n, 0.0, 1.0);
            let total: f64 = z.iter().sum();
            z.iter_mut().for_each(|v| *v /= total);
            let b1 = b1_terms(&z, &params);
            for u in 0..n {
                err = err.max((0..b1.len()).filter(|i| i >> u & 1 == 0).map(|i| b1[i]).sum::<f64>().abs());
            }
        }
    }
    checks.push(Check::at_most("b1_marginals_vanish_when_neutral", err, IDENTITY_TOL));

    let params = random_two_locus_params(&mut rng, 2.0, 16)?;
    let mut z = uniform_vec(&mut rng, 4, 0.1, 1.0);
    let total: f64 = z.iter().sum();
    z.iter_mut().for_each(|v| *v /= total);
    let residuals: Vec<f64> = ORDER_POPULATIONS
        .iter()
        .map(|&pop| Ok(max_abs(drift_oracle_at(&z, &params.with_pop(pop)?)?.residual)))
        .collect::<Result<_>>()?;
    checks.extend(ratio_checks("type_drift_residual", &residuals, 2.0, DRIFT_ORDER_BAND));

    for k in 0..3 {
        let params = random_two_locus_params(&mut rng, 2.0, 16)?;
        let residuals = x_drift_residuals(&params, &ORDER_POPULATIONS)?;
        checks.extend(ratio_checks(&format!("x_drift_residual_scheme{k}"), &residuals, 2.0, DRIFT_ORDER_BAND));
    }

    Ok(SuiteReport::new(Suite::DriftOracle.name(), seed, checks))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentResiduals {
    /// Max over the grid of `|N²E[(ΔX_i)²] − x_i(1−x_i)|`.
    pub second: Vec<f64>,
    /// Max over the grid of `|N²E[ΔX₁ΔX₂]|` on the Wright manifold.
    pub cross_manifold: Vec<f64>,
    /// `|N²E[ΔX₁ΔX₂] − 1/8|` at `z = (½,0,0,½)` with free recombination.
    pub cross_off_manifold: Vec<f64>,
    /// Max over the grid of `N²E[(ΔX_i)⁴]`.
    pub fourth: Vec<f64>,
}

pub fn moment_residuals(params: &ModelParams, pops: &[u64]) -> Result<MomentResiduals> {
    let mut out = MomentResiduals { second: vec![], cross_manifold: vec![], cross_off_manifold: vec![], fourth: vec![] };
    let off = [0.5, 0.0, 0.0, 0.5];
    let view = coordinates_of(2, &off);
    let r_empty = params.recomb().mass_avoiding(0b11);
    let cross_limit = -2.0 * r_empty * view.y[0b11];
    for &pop in pops {
        let p = params.with_pop(pop)?;
        let (mut second, mut cross, mut fourth) = (0.0f64, 0.0f64, 0.0f64);
        for x in grid_points() {
            let m = moment_oracle_at(&product_state(&x)?, &p)?;
            for i in 0..2 {
                second = second.max((m.second[i][i] - x[i] * (1.0 - x[i])).abs());
                fourth = fourth.max(m.fourth[i]);
            }
            cross = cross.max(m.second[0][1].abs());
        }
        out.second.push(second);
        out.cross_manifold.push(cross);
        out.fourth.push(fourth);
        out.cross_off_manifold.push((moment_oracle_at(&off, &p)?.second[0][1] - cross_limit).abs());
    }
    Ok(out)
}

pub fn moments_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 3);
    let mut checks = Vec::new();
    let pops = &ORDER_POPULATIONS[..2];

    let one = ModelParams::new(AssortmentScheme::hamming(vec![0.0, -2.0])?, free(1)?, 0.8, 0.6, 16)?;
    let mut res = Vec::new();
    for &pop in pops {
        let p = one.with_pop(pop)?;
        let worst = [0.2, 0.5, 0.7]
            .iter()
            .map(|&z| Ok((moment_oracle_at(&[z, 1.0 - z], &p)?.second[0][0] - z * (1.0 - z)).abs()))
            .collect::<Result<Vec<_>>>()?;
        res.push(max_abs(worst));
    }
    checks.extend(first_order_checks("one_locus_second_moment", &res, MOMENT_ORDER_BAND));

    let params = random_two_locus_params(&mut rng, 1.0, 16)?;
    let m = moment_residuals(&params, pops)?;
    checks.extend(first_order_checks("second_moment", &m.second, MOMENT_ORDER_BAND));
    checks.extend(first_order_checks("cross_moment_on_manifold", &m.cross_manifold, MOMENT_ORDER_BAND));
    let fixed = ModelParams::new(AssortmentScheme::hamming(vec![0.0, -1.0, -3.0])?, free(2)?, 0.7, 0.9, 16)?;
    let off = moment_residuals(&fixed, pops)?.cross_off_manifold;
    checks.extend(first_order_checks("cross_moment_off_manifold", &off, MOMENT_ORDER_BAND));
    checks.extend(ratio_checks("fourth_moment", &m.fourth, 4.0, MOMENT_ORDER_BAND));

    Ok(SuiteReport::new(Suite::Moments.name(), seed, checks))
}

/// Closed-form `v(t)` for `n = 3`, free recombination: pairs decay at rate ½,
/// the triple at rate ¾ driven by the pairs.
fn free_three_locus_reference(x: &[f64], y0: &SubsetFn, t: f64) -> SubsetFn {
    let mut v = SubsetFn::zeros(3);
    let pair = (-0.5 * t).exp();
    let mut drive = 0.0;
    for p in [0b011u32, 0b101, 0b110] {
        v[p] = y0[p] * pair;
        let rest = (0b111 & !p).trailing_zeros() as usize;
        drive += 0.25 * y0[p] * x[rest];
    }
    v[0b111] = y0[0b111] * (-0.75 * t).exp() + 4.0 * drive * (pair - (-0.75 * t).exp());
    v
}

pub fn linkage_decay_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 4);
    let mut checks = Vec::new();

    let mut err = 0.0f64;
    for _ in 0..3 {
        let r = make_recombination(4, &RecombinationKind::SingleCrossover(rng.random_range(0.1..0.9)))?;
        let x = uniform_vec(&mut rng, 4, 0.1, 0.9);
        let y0 = SubsetFn::from_fn(4, |m| if card(m) >= 2 { rng.random_range(-0.2..0.2) } else { 0.0 });
        let t = rng.random_range(0.5..3.0);
        let v = linkage_decay_ode(&r, &x, &y0, t)?.v;
        for k in 0..4 {
            for h in k + 1..4 {
                let m = (1 << k) | (1 << h);
                err = err.max((v[m] - y0[m] * (-r.split(k, h) * t).exp()).abs());
            }
        }
    }
    checks.push(Check::at_most("pairs_match_exponential", err, 1e-8));

    let r = free(3)?;
    let rn = r.min_split();
    let x = uniform_vec(&mut rng, 3, 0.1, 0.9);
    let y0 = SubsetFn::from_fn(3, |m| if card(m) >= 2 { rng.random_range(-0.25..0.25) } else { 0.0 });
    let (mut err, mut envelope) = (0.0f64, 0usize);
    for t in [1.0, 2.0, 5.0] {
        let v = linkage_decay_ode(&r, &x, &y0, t)?.v;
        let reference = free_three_locus_reference(&x, &y0, t);
        err = err.max(max_abs((0..8).map(|m| v[m] - reference[m])));
        envelope += usize::from(sup_norm(&v) > sup_norm(&y0) * (-rn * t).exp() * (1.0 + t));
    }
    checks.push(Check::at_most("free_three_locus_matches_reference", err, 1e-8));
    checks.push(Check::none_failed("decay_envelope", envelope));

    let zero = linkage_decay_ode(&r, &x, &SubsetFn::zeros(3), 2.0)?.v;
    checks.push(Check::at_most("zero_stays_zero", sup_norm(&zero), 0.0));

    let params = ModelParams::new(AssortmentScheme::hamming(vec![0.0; 4])?, r.clone(), 0.0, 0.0, 10)?;
    let mut err = 0.0f64;
    for _ in 0..5 {
        let mut z = uniform_vec(&mut rng, 8, 0.0, 1.0);
        let total: f64 = z.iter().sum();
        z.iter_mut().for_each(|v| *v /= total);
        let view = coordinates_of(3, &z);
        let b0 = b0_terms(&z, &params);
        for i in (0..8u32).filter(|&m| card(m) >= 2) {
            let want: f64 = -(0..8u32).filter(|j| j & i == 0).map(|j| b0[j as usize]).sum::<f64>();
            err = err.max((linkage_rate(&r, &view.x, &view.y, i) - want).abs());
        }
    }
    checks.push(Check::at_most("rate_matches_chain_drift", err, IDENTITY_TOL));

    Ok(SuiteReport::new(Suite::LinkageDecay.name(), seed, checks))
}

pub fn reversibility_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 5);
    let mut err = 0.0f64;
    for _ in 0..10 {
        let scheme = random_custom_scheme(&mut rng, 3, 3.0, false)?;
        let spec = DiffusionSpec::new(mean_assortment(&scheme), rng.random_range(0.1..2.0), rng.random_range(0.1..2.0))?;
        for _ in 0..100 {
            let x = uniform_vec(&mut rng, 3, 1e-3, 1.0 - 1e-3);
            err = err.max(max_abs(reversibility_residual(&spec, &x)?));
        }
    }
    let checks = vec![Check::at_most("reversibility_residual", err, REVERSIBILITY_TOL)];
    Ok(SuiteReport::new(Suite::Reversibility.name(), seed, checks))
}

pub fn wf_comparison_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = stream(seed, 6);
    let (mut err, mut unpaired) = (0.0f64, 0usize);
    for _ in 0..20 {
        let scheme = random_custom_scheme(&mut rng, 2, 3.0, true)?;
        let (mu0, mu1) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
        let spec = DiffusionSpec::new(mean_assortment(&scheme), mu0, mu1)?;
        let sigma = WfSigma::from_assortment(&scheme)?;
        unpaired += usize::from(!sigma.satisfies_pairing(0.0));
        let nu = [WfMutation { nu12: mu0, nu21: mu1 }; 2];
        for _ in 0..5 {
            let (p, q) = (rng.random::<f64>(), rng.random::<f64>());
            let (b1, b2) = wf_two_locus_drift(&sigma, nu, p, q);
            let b = drift(&spec, &[p, q]);
            err = err.max((b1 - b[0]).abs()).max((b2 - b[1]).abs());
        }
    }
    let checks = vec![
        Check::none_failed("sigma_pairing_condition", unpaired),
        Check::at_most("drift_equality", err, IDENTITY_TOL),
    ];
    Ok(SuiteReport::new(Suite::WfComparison.name(), seed, checks))
}
