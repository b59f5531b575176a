//! Closed forms for quadratic Hamming assortment `s_ℓ = s₀ − (bℓ + cℓ²)`.

use serde::Serialize;

use crate::assortment::mean_assortment;
use crate::combinatorics::binomial;
use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::AssortmentScheme;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticAsymptotics {
    pub n: usize,
    pub b: f64,
    pub c: f64,
    pub mu: f64,
    /// Whether `b + nc > 8μ − 4`, i.e. whether the `3ⁿ` critical points exist.
    pub full_structure: bool,
    pub lambda0: f64,
    pub lambda1: Option<f64>,
    pub h0_minus_hn: Option<f64>,
    pub h0_minus_h1: Option<f64>,
    /// `λ₀√n / √((2μ−1)/(4c))`.
    pub lambda0_ratio: f64,
    /// `(h₀ − h_n) / ((c/8)n²)`.
    pub gap_n_ratio: Option<f64>,
    /// `(h₀ − h₁) / (√n · ½√(c(2μ−1)))`.
    pub gap_1_ratio: Option<f64>,
}

/// Diffusion spec with Hamming means `s_ℓ = −(bℓ + cℓ²)` and `μ0 = μ1 = μ`.
pub fn quadratic_spec(n: usize, b: f64, c: f64, mu: f64) -> Result<DiffusionSpec> {
    let s: Vec<f64> = (0..=n).map(|l| -(b * l as f64 + c * (l * l) as f64)).collect();
    DiffusionSpec::new(mean_assortment(&AssortmentScheme::hamming(s)?), mu, mu)
}

/// Positive root of `ν − Bλ − Aλ² = 0` for `ν > 0`, `A, B ≥ 0`, `A + B > 0`.
fn positive_root(nu: f64, lin: f64, quad: f64) -> f64 {
    2.0 * nu / (lin + (lin * lin + 4.0 * quad * nu).sqrt())
}

pub fn quadratic_asymptotics(n: usize, b: f64, c: f64, mu: f64) -> Result<QuadraticAsymptotics> {
    if n == 0 || !(c > 0.0) || !(b + c >= 0.0) || !(mu > 0.5) || !b.is_finite() || !c.is_finite() || !mu.is_finite() {
        return Err(Error::Refused(format!(
            "closed forms need n ≥ 1, c > 0, b + c ≥ 0 and μ > ½ (got n={n}, b={b}, c={c}, μ={mu})"
        )));
    }
    let nu = 2.0 * mu - 1.0;
    let nf = n as f64;
    let lambda0 = positive_root(nu, b + c, 4.0 * c * (nf - 1.0));
    let lambda1 = (n >= 2).then(|| positive_root(nu, b + 2.0 * c, 4.0 * c * (nf - 2.0)));
    let full_structure = b + nf * c > 8.0 * mu - 4.0;
    // α_k = 2^k δ^{(k+1)}[m](0): only α₀ = −(b+c) and α₁ = −4c are nonzero
    let alpha = |k: usize| match k {
        0 => -(b + c),
        1 => -4.0 * c,
        _ => 0.0,
    };
    let (mut gap_n, mut gap_1) = (None, None);
    if full_structure {
        let mut g = nu * nf * (4.0 * lambda0).ln();
        for k in 0..n.min(2) {
            g += alpha(k) * binomial(n, k + 1) * (lambda0.powi(k as i32 + 1) - 0.25f64.powi(k as i32 + 1));
        }
        gap_n = Some(g);
        if let Some(l1) = lambda1 {
            let mut g = nu * (nf * (lambda0 / l1).ln() + (4.0 * l1).ln());
            for k in 0..n.min(2) {
                let kk = k as i32;
                let first = if k + 2 <= n { binomial(n - 1, k + 1) * (lambda0.powi(kk + 1) - l1.powi(kk + 1)) } else { 0.0 };
                g += alpha(k) * (first + binomial(n - 1, k) * (lambda0.powi(kk + 1) - 0.25 * l1.powi(kk)));
            }
            gap_1 = Some(g);
        }
    }
    Ok(QuadraticAsymptotics {
        n,
        b,
        c,
        mu,
        full_structure,
        lambda0,
        lambda1,
        h0_minus_hn: gap_n,
        h0_minus_h1: gap_1,
        lambda0_ratio: lambda0 * nf.sqrt() / (nu / (4.0 * c)).sqrt(),
        gap_n_ratio: gap_n.map(|g| g / (c / 8.0 * nf * nf)),
        gap_1_ratio: gap_1.map(|g| g / (nf.sqrt() * 0.5 * (c * nu).sqrt())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{critical_points, solve_lambda};
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_forms_match_solver() {
        let q = quadratic_asymptotics(5, 1.0, 2.0, 1.0).unwrap();
        let spec = quadratic_spec(5, 1.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(q.lambda0, solve_lambda(&spec, 0).unwrap().unwrap().lambda, epsilon = 1e-10);
        assert_abs_diff_eq!(q.lambda1.unwrap(), solve_lambda(&spec, 1).unwrap().unwrap().lambda, epsilon = 1e-10);
    }

    #[test]
    fn gaps_match_critical_point_values() {
        let (n, b, c, mu) = (4, 0.5, 1.5, 0.8);
        let q = quadratic_asymptotics(n, b, c, mu).unwrap();
        let r = critical_points(&quadratic_spec(n, b, c, mu).unwrap()).unwrap();
        let gaps = r.h_gaps();
        assert_abs_diff_eq!(q.h0_minus_h1.unwrap(), gaps[0].unwrap(), epsilon = 1e-8);
        assert_abs_diff_eq!(q.h0_minus_hn.unwrap(), gaps[n - 1].unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn threshold_matches_structure() {
        // 8μ − 4 = 4 with μ = 1
        for &(b, c, expect) in &[(2.0, 0.7, true), (2.0, 0.6, false)] {
            let q = quadratic_asymptotics(3, b, c, 1.0).unwrap();
            assert_eq!(q.full_structure, expect);
            let r = critical_points(&quadratic_spec(3, b, c, 1.0).unwrap()).unwrap();
            assert_eq!(r.points.len(), if expect { 27 } else { 1 });
        }
    }

    #[test]
    fn domain_is_checked() {
        assert!(quadratic_asymptotics(3, 1.0, 0.0, 1.0).is_err());
        assert!(quadratic_asymptotics(3, 1.0, 1.0, 0.5).is_err());
        assert!(quadratic_asymptotics(3, -2.0, 1.0, 1.0).is_err());
    }
}
