//! Reversible stationary density `g ∝ Π x^{2μ1−1}(1−x)^{2μ0−1} e^{H}` and its
//! normalisation.

use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi};
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::assortment::{drift_polynomials, PolyForm};
use crate::combinatorics::members;
use crate::diffusion::DiffusionSpec;
use crate::error::{invalid, Error, Result};
use crate::rng::stream;

/// Largest locus count normalised by tensor quadrature.
pub const QUADRATURE_MAX_LOCI: usize = 3;

/// `H_{n,s}(x)` in either form.
///
/// The factorised form is `½ Σ_{|L|≥1} m̃_L Π_L 2ρ Π_{L̄}(1−2ρ)` with
/// `m̃ = m − m_∅` and `ρ = x(1−x)`; the expanded form is `Σ_L α_L Π_L ρ`.
pub fn h_poly(spec: &DiffusionSpec, x: &[f64], form: PolyForm) -> f64 {
    let table = spec.table();
    let n = table.n();
    assert_eq!(x.len(), n);
    let rho: Vec<f64> = x.iter().map(|&v| v * (1.0 - v)).collect();
    let m = table.means();
    let alpha = table.alpha();
    let full = m.full();
    match form {
        PolyForm::Factorised => {
            let base = m[0];
            (1..=full)
                .map(|l| {
                    let mut w = m[l] - base;
                    for (u, &r) in rho.iter().enumerate() {
                        w *= if l >> u & 1 == 1 { 2.0 * r } else { 1.0 - 2.0 * r };
                    }
                    w
                })
                .sum::<f64>()
                * 0.5
        }
        PolyForm::Expanded => (1..=full).map(|l| alpha[l] * members(l).map(|u| rho[u]).product::<f64>()).sum(),
    }
}

/// Unnormalised log density `h`; `+∞` or `−∞` on the boundary where the Beta
/// part diverges or vanishes.
pub fn log_density_unnormalised(spec: &DiffusionSpec, x: &[f64]) -> f64 {
    let a1 = 2.0 * spec.mu1() - 1.0;
    let a0 = 2.0 * spec.mu0() - 1.0;
    let mut acc = h_poly(spec, x, PolyForm::Expanded);
    for &v in x {
        acc += xlogy(a1, v) + xlogy(a0, 1.0 - v);
    }
    acc
}

fn xlogy(a: f64, v: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if v <= 0.0 {
        if a < 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        a * v.ln()
    }
}

/// `∂_i log g = (2μ1−1)/x_i − (2μ0−1)/(1−x_i) + (1−2x_i) P_{i,s}(x)`.
pub fn log_density_gradient(spec: &DiffusionSpec, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    log_density_gradient_into(spec, x, &mut out);
    out
}

pub fn log_density_gradient_into(spec: &DiffusionSpec, x: &[f64], out: &mut [f64]) {
    drift_polynomials(spec.table(), x, out);
    let a1 = 2.0 * spec.mu1() - 1.0;
    let a0 = 2.0 * spec.mu0() - 1.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = a1 / v - a0 / (1.0 - v) + (1.0 - 2.0 * v) * *o;
    }
}

/// A diffusion spec together with its normalising constant.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDensity {
    spec: DiffusionSpec,
    log_c: Option<f64>,
}

impl StationaryDensity {
    pub fn new(spec: DiffusionSpec) -> Result<Self> {
        if spec.mu0() <= 0.0 || spec.mu1() <= 0.0 {
            return Err(Error::InvalidArgument(
                "the stationary density exists only for positive mutation rates".into(),
            ));
        }
        Ok(Self { spec, log_c: None })
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn log_c(&self) -> Option<f64> {
        self.log_c
    }

    pub fn set_log_c(&mut self, log_c: f64) {
        self.log_c = Some(log_c);
    }

    /// Normalises by quadrature and stores `log C`.
    pub fn normalised(mut self, order: usize) -> Result<Self> {
        self.log_c = Some(normalise(&self, order)?);
        Ok(self)
    }

    /// `h(x) + log C`, using `log C = 0` before normalisation.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        log_density_unnormalised(&self.spec, x) + self.log_c.unwrap_or(0.0)
    }
}

fn jacobi_rule(order: usize, mu0: f64, mu1: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let deg = NonZeroUsize::new(order).ok_or_else(|| Error::InvalidArgument("quadrature order must be positive".into()))?;
    let a = FiniteAboveNegOneF64::new(2.0 * mu0 - 1.0).ok_or_else(|| Error::InvalidArgument(format!("mutation rate {mu0} must be positive")))?;
    let b = FiniteAboveNegOneF64::new(2.0 * mu1 - 1.0).ok_or_else(|| Error::InvalidArgument(format!("mutation rate {mu1} must be positive")))?;
    let rule = GaussJacobi::new(deg, a, b);
    // (1−t)^a (1+t)^b dt on [−1,1] becomes 2^{a+b+1} (1−x)^a x^b dx on [0,1]
    let scale = 0.5f64.powf(a.get() + b.get() + 1.0);
    let (nodes, weights) = rule.as_node_weight_pairs().iter().map(|&(t, w)| (0.5 * (1.0 + t), w * scale)).unzip();
    Ok((nodes, weights))
}

/// `log C` from tensor Gauss–Jacobi quadrature of `e^H` against the Beta weights.
pub fn normalise(sd: &StationaryDensity, order: usize) -> Result<f64> {
    let n = sd.n();
    if n > QUADRATURE_MAX_LOCI {
        return Err(Error::Refused(format!(
            "tensor quadrature is limited to n ≤ {QUADRATURE_MAX_LOCI} (got n={n}); use normalise_monte_carlo"
        )));
    }
    let (nodes, weights) = jacobi_rule(order, sd.spec.mu0(), sd.spec.mu1())?;
    let total = order.pow(n as u32);
    let mut terms = Vec::with_capacity(total);
    let mut x = vec![0.0; n];
    for flat in 0..total {
        let mut rest = flat;
        let mut logw = 0.0;
        for xi in x.iter_mut() {
            let k = rest % order;
            rest /= order;
            *xi = nodes[k];
            logw += weights[k].ln();
        }
        terms.push(logw + h_poly(&sd.spec, &x, PolyForm::Expanded));
    }
    Ok(-log_sum_exp(&terms))
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + v.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Difference between `log C` at `order` and `2·order`.
pub fn normalisation_drift(sd: &StationaryDensity, order: usize) -> Result<f64> {
    Ok((normalise(sd, 2 * order)? - normalise(sd, order)?).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloNormalisation {
    pub log_c: f64,
    /// Standard error of `log C` (delta method).
    pub std_err: f64,
}

/// `log C` by importance sampling from the Beta product base measure.
pub fn normalise_monte_carlo(sd: &StationaryDensity, samples: usize, seed: u64) -> Result<MonteCarloNormalisation> {
    if samples < 2 {
        return invalid("at least two samples are needed for an error estimate");
    }
    let (mu0, mu1) = (sd.spec.mu0(), sd.spec.mu1());
    let beta = Beta::new(2.0 * mu1, 2.0 * mu0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    // mass of x^{2μ1−1}(1−x)^{2μ0−1} on [0,1], exact from a one-node rule
    let (_, w) = jacobi_rule(1, mu0, mu1)?;
    let log_beta = w[0].ln();
    let mut rng = stream(seed, 0);
    let n = sd.n();
    let mut x = vec![0.0; n];
    let vals: Vec<f64> = (0..samples)
        .map(|_| {
            for xi in x.iter_mut() {
                *xi = beta.sample(&mut rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
            }
            h_poly(&sd.spec, &x, PolyForm::Expanded)
        })
        .collect();
    let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = vals.iter().map(|v| (v - top).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / samples as f64;
    let var = scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    let log_z = n as f64 * log_beta + top + mean.ln();
    Ok(MonteCarloNormalisation { log_c: -log_z, std_err: (var / samples as f64).sqrt() / mean })
}

/// Evenly spaced interior grid `(k+½)/points` per axis, one row per point:
/// `x1..xn, h, log density`.
pub fn density_grid(sd: &StationaryDensity, points: usize) -> Vec<Vec<f64>> {
    let n = sd.n();
    let axis: Vec<f64> = (0..points).map(|k| (k as f64 + 0.5) / points as f64).collect();
    let total = points.pow(n as u32);
    let mut rows = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut row: Vec<f64> = (0..n)
            .map(|_| {
                let v = axis[rest % points];
                rest /= points;
                v
            })
            .collect();
        row.reverse();
        let h = log_density_unnormalised(&sd.spec, &row);
        row.push(h);
        row.push(h + sd.log_c.unwrap_or(0.0));
        rows.push(row);
    }
    rows
}

/// Draws a point from the Beta product base measure; used by sampling-based checks.
pub fn sample_base<R: Rng + ?Sized>(sd: &StationaryDensity, rng: &mut R) -> Vec<f64> {
    let beta = Beta::new(2.0 * sd.spec.mu1(), 2.0 * sd.spec.mu0()).expect("positive rates");
    (0..sd.n()).map(|_| beta.sample(rng)).collect()
}
