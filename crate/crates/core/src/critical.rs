//! Critical points of the stationary log density when mutation is symmetric
//! and mean assortment depends only on the number of differing loci.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::combinatorics::{b_poly, binomial, elementary_symmetric_all, forward_diff, full_mask, leading_diffs, submasks};
use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::stationary::{log_density_gradient_into, log_density_unnormalised};

const ROOT_EPS: f64 = 1e-15;
const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 200;
const HESSIAN_STEP: f64 = 1e-5;
const GRADIENT_TOL: f64 = 1e-9;
const DEGENERATE_REL: f64 = 1e-8;

/// Which hypotheses of the critical-point analysis hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisHypotheses {
    /// `μ0 = μ1`.
    pub equal_mutation: bool,
    /// `m_L` depends only on `|L|`.
    pub cardinality_only: bool,
    /// Ordered, signed first differences of the mean profile matching the side of `μ` against ½.
    pub monotone: bool,
    /// The differences are ordered and signed but `δ⁽¹⁾[m](n−2)` is zero.
    pub continuum_risk: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CentreType {
    Max,
    Min,
    Degenerate,
}

fn mean_profile(spec: &DiffusionSpec) -> Option<Vec<f64>> {
    spec.table().cardinality_profile()
}

pub fn hypotheses(spec: &DiffusionSpec) -> AnalysisHypotheses {
    let equal_mutation = spec.mu0() == spec.mu1();
    let profile = mean_profile(spec);
    let cardinality_only = profile.is_some();
    let (mut monotone, mut continuum_risk) = (false, false);
    if let (true, Some(m)) = (equal_mutation, profile) {
        let n = spec.n();
        let d = forward_diff(&m, 1).expect("profile has n+1 ≥ 2 entries");
        let mu = spec.mu0();
        // sign flips the disassortative case onto the assortative one
        let sign = if mu > 0.5 {
            Some(1.0)
        } else if mu > 0.0 && mu < 0.5 {
            Some(-1.0)
        } else {
            None
        };
        if let Some(sg) = sign {
            let e: Vec<f64> = d.iter().map(|v| sg * v).collect();
            let ordered = e.windows(2).all(|w| w[1] <= w[0]) && e[0] <= 0.0;
            let strict = n < 2 || e[n - 2] < 0.0;
            monotone = ordered && strict;
            continuum_risk = ordered && !strict;
        }
    }
    AnalysisHypotheses { equal_mutation, cardinality_only, monotone, continuum_risk }
}

fn require_symmetric(spec: &DiffusionSpec) -> Result<Vec<f64>> {
    let h = hypotheses(spec);
    if !h.equal_mutation {
        return Err(Error::Hypothesis("the analysis needs μ0 = μ1; use v_n_i for locus-wise values".into()));
    }
    mean_profile(spec).ok_or_else(|| {
        Error::Hypothesis("mean assortment depends on more than |L|; use v_n_i for locus-wise values".into())
    })
}

/// `V_n = 2μ−1 + 2^{−(n+1)} Σ_k C(n−1,k) δ⁽¹⁾[m](k)`.
pub fn v_n(spec: &DiffusionSpec) -> Result<f64> {
    let m = require_symmetric(spec)?;
    let n = spec.n();
    let d = forward_diff(&m, 1)?;
    let sum: f64 = (0..n).map(|k| binomial(n - 1, k) * d[k]).sum();
    Ok(2.0 * spec.mu0() - 1.0 + sum * 0.5f64.powi(n as i32 + 1))
}

/// `V_{n,i} = 2μ−1 + 2^{−(n+1)} Σ_{B ⊆ {1..n}∖{i}} δ_i[m](B)`, for 0-based `i`.
pub fn v_n_i(spec: &DiffusionSpec, i: usize) -> Result<f64> {
    if spec.mu0() != spec.mu1() {
        return Err(Error::Hypothesis("V_{n,i} needs μ0 = μ1".into()));
    }
    let n = spec.n();
    if i >= n {
        return Err(Error::InvalidArgument(format!("locus {i} out of range")));
    }
    let rest = full_mask(n) & !(1 << i);
    let sum: f64 = submasks(rest).map(|b| spec.table().delta(i, b)).sum();
    Ok(2.0 * spec.mu0() - 1.0 + sum * 0.5f64.powi(n as i32 + 1))
}

/// `φ_ℓ(y) = 2μ−1 + y Σ_i B_{n−1,ℓ,i}(2y) δ⁽¹⁾[m](i)`.
pub fn phi_b_form(spec: &DiffusionSpec, l: usize, y: f64) -> Result<f64> {
    let m = require_symmetric(spec)?;
    let n = spec.n();
    check_level(n, l)?;
    let d = forward_diff(&m, 1)?;
    let sum: f64 = (0..n).map(|i| b_poly(n - 1, l, i, 2.0 * y) * d[i]).sum();
    Ok(2.0 * spec.mu0() - 1.0 + y * sum)
}

/// `φ_ℓ(y) = 2μ−1 + y Σ_k α_k e_{n−1,k}((¼)^{⊗ℓ}, y^{⊗(n−1−ℓ)})` with `α_k = 2^k δ^{(k+1)}[m](0)`.
pub fn phi_elementary_form(spec: &DiffusionSpec, l: usize, y: f64) -> Result<f64> {
    let m = require_symmetric(spec)?;
    let n = spec.n();
    check_level(n, l)?;
    let alpha = profile_alpha(&m);
    let mut args = vec![0.25; l];
    args.extend(std::iter::repeat(y).take(n - 1 - l));
    let e = elementary_symmetric_all(&args);
    let sum: f64 = (0..n).map(|k| alpha[k] * e[k]).sum();
    Ok(2.0 * spec.mu0() - 1.0 + y * sum)
}

fn check_level(n: usize, l: usize) -> Result<()> {
    if l >= n {
        return Err(Error::InvalidArgument(format!("level {l} must be below n = {n}")));
    }
    Ok(())
}

/// `α_k = 2^k δ^{(k+1)}[m](0)` for `k = 0..n−1`.
fn profile_alpha(m: &[f64]) -> Vec<f64> {
    leading_diffs(m).iter().skip(1).enumerate().map(|(k, v)| 2f64.powi(k as i32) * v).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaRoot {
    pub lambda: f64,
    /// False when monotonicity of `φ_ℓ` is not guaranteed and other roots may exist.
    pub rigorous: bool,
}

/// Root of `φ_ℓ` in `(0, ¼)` by bisection, or `None` when the end values share a sign.
pub fn solve_lambda(spec: &DiffusionSpec, l: usize) -> Result<Option<LambdaRoot>> {
    let rigorous = hypotheses(spec).monotone;
    let f = |y: f64| phi_b_form(spec, l, y);
    let (mut lo, mut hi) = (ROOT_EPS, 0.25 - ROOT_EPS);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo == 0.0 {
        return Ok(Some(LambdaRoot { lambda: lo, rigorous }));
    }
    if fhi == 0.0 {
        return Ok(Some(LambdaRoot { lambda: hi, rigorous }));
    }
    if flo.signum() == fhi.signum() {
        return Ok(None);
    }
    let lo_sign = flo.signum();
    for _ in 0..ROOT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(Some(LambdaRoot { lambda: mid, rigorous }));
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < ROOT_TOL {
            break;
        }
    }
    Ok(Some(LambdaRoot { lambda: 0.5 * (lo + hi), rigorous }))
}

/// `ξ = ½ − ½√(1−4λ)`.
pub fn xi_of(lambda: f64) -> f64 {
    0.5 - 0.5 * (1.0 - 4.0 * lambda).max(0.0).sqrt()
}

/// Central-difference Hessian of `h` from the analytic gradient, with one
/// Richardson extrapolation step.
pub fn numeric_hessian(spec: &DiffusionSpec, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let diff = |step: f64| {
        let mut h = DMatrix::zeros(n, n);
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        let mut p = x.to_vec();
        for j in 0..n {
            p[j] = x[j] + step;
            log_density_gradient_into(spec, &p, &mut gp);
            p[j] = x[j] - step;
            log_density_gradient_into(spec, &p, &mut gm);
            p[j] = x[j];
            for i in 0..n {
                h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        h
    };
    let coarse = diff(HESSIAN_STEP);
    let fine = diff(HESSIAN_STEP / 2.0);
    let r = (fine * 4.0 - coarse) / 3.0;
    (&r + r.transpose()) * 0.5
}

/// Closed-form Hessian at `u_{I,J}`: `−2a_ℓ` on the ½-coordinates, `b_ℓ` on the
/// others, `±c_ℓ` between others (plus within a side, minus across).
pub fn block_hessian(spec: &DiffusionSpec, lambda: f64, half: u32, low: u32) -> Result<DMatrix<f64>> {
    let m = require_symmetric(spec)?;
    let n = spec.n();
    let l = half.count_ones() as usize;
    let d = forward_diff(&m, 1)?;
    let y = 2.0 * lambda;
    let shrink = 1.0 - 4.0 * lambda;
    let a = if l >= 1 { shrink * (0..n - 1).map(|i| d[i] * b_poly(n - 2, l - 1, i, y)).sum::<f64>() } else { 0.0 };
    let b = if l < n { shrink * (0..n).map(|i| d[i] * b_poly(n - 1, l, i, y)).sum::<f64>() / lambda } else { 0.0 };
    let c = if l + 2 <= n {
        shrink * 2.0 * (0..n - 1).map(|i| (d[i + 1] - d[i]) * b_poly(n - 2, l, i, y)).sum::<f64>()
    } else {
        0.0
    };
    // at the centre a_n is φ at ¼, i.e. 4V_n
    let a = if l == n { 4.0 * v_n(spec)? } else { a };
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        if half >> i & 1 == 1 {
            h[(i, i)] = -2.0 * a;
            continue;
        }
        h[(i, i)] = b;
        for j in 0..n {
            if j != i && half >> j & 1 == 0 {
                let same = (low >> i & 1) == (low >> j & 1);
                h[(i, j)] = if same { c } else { -c };
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub coords: Vec<f64>,
    /// Number of ½-coordinates `ℓ`.
    pub level: usize,
    /// Number of negative Hessian eigenvalues, absent when degenerate.
    pub index: Option<usize>,
    /// `n − ℓ` (or `ℓ` below ½), absent when hypotheses fail.
    pub predicted_index: Option<usize>,
    pub degenerate: bool,
    pub h: f64,
    pub gradient_norm: f64,
    /// Largest entry of `|numeric − closed-form|` Hessian.
    pub hessian_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPointReport {
    pub n: usize,
    pub v_n: f64,
    pub center_type: CentreType,
    pub hypotheses: AnalysisHypotheses,
    /// `λ_ℓ` for `ℓ = 0..n−1`; `None` where no root exists.
    pub lambdas: Vec<Option<f64>>,
    pub xis: Vec<Option<f64>>,
    pub points: Vec<CriticalPoint>,
    /// `h_ℓ` at `((½)^{⊗ℓ}, ξ_ℓ^{⊗(n−ℓ)})`, with `h_n` the centre value.
    pub h_values: Vec<Option<f64>>,
    /// Interior local maxima; `None` when the hypotheses fail.
    pub mode_count: Option<usize>,
    pub saddle_values_ordered: Option<bool>,
}

impl CriticalPointReport {
    /// `h_0 − h_ℓ` for `ℓ = 1..n`.
    pub fn h_gaps(&self) -> Vec<Option<f64>> {
        let h0 = self.h_values[0];
        self.h_values[1..].iter().map(|h| Some(h0? - (*h)?)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serialisable")
    }
}

fn gradient_norm(spec: &DiffusionSpec, x: &[f64]) -> f64 {
    let mut g = vec![0.0; x.len()];
    log_density_gradient_into(spec, x, &mut g);
    g.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Newton steps on the gradient, kept only while they reduce it.
fn polish(spec: &DiffusionSpec, x: &mut Vec<f64>) {
    let n = x.len();
    let mut g = vec![0.0; n];
    for _ in 0..8 {
        let before = gradient_norm(spec, x);
        if before < GRADIENT_TOL {
            return;
        }
        log_density_gradient_into(spec, x, &mut g);
        let h = numeric_hessian(spec, x);
        let Some(step) = h.lu().solve(&nalgebra::DVector::from_column_slice(&g)) else {
            return;
        };
        let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(v, s)| v - s).collect();
        if trial.iter().any(|v| !(*v > 0.0 && *v < 1.0)) || gradient_norm(spec, &trial) >= before {
            return;
        }
        *x = trial;
    }
}

fn classify(h: &DMatrix<f64>) -> (Option<usize>, bool) {
    let eig = SymmetricEigen::new(h.clone()).eigenvalues;
    let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let degenerate = eig.iter().any(|v| v.abs() < DEGENERATE_REL * scale);
    if degenerate {
        (None, true)
    } else {
        (Some(eig.iter().filter(|v| **v < 0.0).count()), false)
    }
}

/// All `3ⁿ` candidate points `u_{I,J}` with their classification.
pub fn critical_points(spec: &DiffusionSpec) -> Result<CriticalPointReport> {
    require_symmetric(spec)?;
    if spec.mu0() <= 0.0 {
        return Err(Error::InvalidArgument("the stationary density needs positive mutation rates".into()));
    }
    let n = spec.n();
    let hyp = hypotheses(spec);
    let vn = v_n(spec)?;
    let center_type = if vn > 0.0 {
        CentreType::Max
    } else if vn < 0.0 {
        CentreType::Min
    } else {
        CentreType::Degenerate
    };
    let mut lambdas = Vec::with_capacity(n);
    for l in 0..n {
        lambdas.push(solve_lambda(spec, l)?.map(|r| r.lambda));
    }
    let xis: Vec<Option<f64>> = lambdas.iter().map(|l| l.map(xi_of)).collect();
    let full = full_mask(n);
    let mut points = Vec::new();
    let mut h_values = vec![None; n + 1];
    for half in 0..=full {
        let l = half.count_ones() as usize;
        let (lambda, xi) = if l == n { (0.25, 0.5) } else {
            match (lambdas[l], xis[l]) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            }
        };
        for low in submasks(full & !half) {
            let mut x: Vec<f64> = (0..n)
                .map(|i| if half >> i & 1 == 1 { 0.5 } else if low >> i & 1 == 1 { xi } else { 1.0 - xi })
                .collect();
            polish(spec, &mut x);
            let hess = numeric_hessian(spec, &x);
            let (index, degenerate) = classify(&hess);
            let closed = block_hessian(spec, lambda, half, low)?;
            let mismatch = (&hess - &closed).abs().max();
            let predicted = if hyp.monotone {
                Some(if spec.mu0() > 0.5 { n - l } else { l })
            } else {
                None
            };
            let h = log_density_unnormalised(spec, &x);
            if low == full & !half {
                h_values[l] = Some(h);
            }
            points.push(CriticalPoint {
                coords: x.clone(),
                level: l,
                index,
                predicted_index: predicted,
                degenerate,
                h,
                gradient_norm: gradient_norm(spec, &x),
                hessian_mismatch: mismatch,
            });
        }
    }
    let mode_count = hyp.monotone.then(|| points.iter().filter(|p| p.index == Some(n)).count());
    let saddle_values_ordered = hyp.monotone.then(|| {
        let present: Vec<f64> = h_values.iter().flatten().copied().collect();
        if spec.mu0() > 0.5 {
            present.windows(2).all(|w| w[1] < w[0])
        } else {
            present.windows(2).all(|w| w[1] > w[0])
        }
    });
    Ok(CriticalPointReport { n, v_n: vn, center_type, hypotheses: hyp, lambdas, xis, points, h_values, mode_count, saddle_values_ordered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assortment::mean_assortment;
    use crate::combinatorics::b_polynomial;
    use crate::AssortmentScheme;
    use approx::assert_abs_diff_eq;

    fn hamming(inc: &[f64], mu: f64) -> DiffusionSpec {
        DiffusionSpec::new(mean_assortment(&AssortmentScheme::hamming_increments(inc).unwrap()), mu, mu).unwrap()
    }

    #[test]
    fn neutral_v_n() {
        let s = hamming(&[0.0, 0.0, 0.0], 0.6);
        assert_abs_diff_eq!(v_n(&s).unwrap(), 0.2, epsilon = 1e-15);
        let r = critical_points(&s).unwrap();
        assert_eq!(r.center_type, CentreType::Max);
    }

    #[test]
    fn figure_two_lambda_and_centre() {
        let s = hamming(&[-2.0, -6.0], 0.6);
        assert!(v_n(&s).unwrap() < 0.0);
        let l0 = solve_lambda(&s, 0).unwrap().unwrap();
        assert!(l0.rigorous);
        assert!((l0.lambda - 0.0766).abs() <= 1e-4, "{}", l0.lambda);
        let hess = numeric_hessian(&s, &[0.5, 0.5]);
        let want = -8.0 * v_n(&s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let w = if i == j { want } else { 0.0 };
                assert_abs_diff_eq!(hess[(i, j)], w, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn phi_forms_agree() {
        let s = hamming(&[-3.0, -5.0, -11.0, -12.5], 0.9);
        for l in 0..4 {
            for k in 1..20 {
                let y = k as f64 / 80.0;
                assert_abs_diff_eq!(phi_b_form(&s, l, y).unwrap(), phi_elementary_form(&s, l, y).unwrap(), epsilon = 1e-12);
            }
            assert_abs_diff_eq!(phi_b_form(&s, l, 0.25).unwrap(), v_n(&s).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn three_locus_structure() {
        let s = hamming(&[-20.0, -40.0, -60.0], 1.0);
        let r = critical_points(&s).unwrap();
        assert_eq!(r.points.len(), 27);
        assert_eq!(r.mode_count, Some(8));
        assert_eq!(r.saddle_values_ordered, Some(true));
        let l: Vec<f64> = r.lambdas.iter().map(|v| v.unwrap()).collect();
        assert!(l[2] < l[1] && l[1] < l[0] && l[0] < 0.25);
        for p in &r.points {
            assert!(!p.degenerate);
            assert_eq!(p.index, p.predicted_index);
            assert!(p.gradient_norm < 1e-9, "{}", p.gradient_norm);
            assert!(p.hessian_mismatch < 1e-4 * (1.0 + p.coords.len() as f64), "{}", p.hessian_mismatch);
        }
        let counts: Vec<usize> = (0..=3).map(|lev| r.points.iter().filter(|p| p.level == lev).count()).collect();
        assert_eq!(counts, vec![8, 12, 6, 1]);
        assert!(r.to_json().contains("\"lambdas\""));
    }

    #[test]
    fn single_point_when_centre_is_max() {
        let s = hamming(&[-0.5, -0.6], 1.0);
        let r = critical_points(&s).unwrap();
        assert_eq!(r.center_type, CentreType::Max);
        assert!(r.lambdas.iter().all(Option::is_none));
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.mode_count, Some(1));
    }

    #[test]
    fn continuum_case_is_flagged() {
        let s = hamming(&[0.0, -12.0], 0.6);
        let h = hypotheses(&s);
        assert!(!h.monotone);
        assert!(h.continuum_risk);
        assert_eq!(critical_points(&s).unwrap().mode_count, None);
    }

    #[test]
    fn hypotheses_enforced() {
        let t = mean_assortment(&AssortmentScheme::hamming_increments(&[-1.0, -2.0]).unwrap());
        let s = DiffusionSpec::new(t, 0.6, 0.7).unwrap();
        assert!(matches!(v_n(&s), Err(Error::Hypothesis(_))));
        assert!(v_n_i(&s, 0).is_err());
        let sym = hamming(&[-1.0, -2.0, -4.0], 0.7);
        for i in 0..3 {
            assert_abs_diff_eq!(v_n_i(&sym, i).unwrap(), v_n(&sym).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn b_polynomial_root_satisfies_equation() {
        let s = hamming(&[-15.0, -210.0], 1.0);
        let root = solve_lambda(&s, 1).unwrap().unwrap().lambda;
        let m = [0.0, -15.0, -225.0];
        let d = [m[1] - m[0], m[2] - m[1]];
        let eq = 1.0 + root * (0..2).map(|i| b_polynomial(1, 1, i, 2.0 * root).unwrap() * d[i]).sum::<f64>();
        assert!(eq.abs() < 1e-9);
    }
}
