//! The limiting diffusion on `[0,1]ⁿ`: drift, one-locus forms, boundary
//! classes and the two-locus Wright–Fisher comparison.

use crate::assortment::{drift_polynomials, mean_assortment, MeanAssortTable};
use crate::error::{invalid, Result};
use crate::moran::ModelParams;
use crate::stationary::log_density_gradient;

/// Generator data: mutation rates and the mean-assortment table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    table: MeanAssortTable,
    mu0: f64,
    mu1: f64,
}

impl DiffusionSpec {
    pub fn new(table: MeanAssortTable, mu0: f64, mu1: f64) -> Result<Self> {
        if !(mu0.is_finite() && mu1.is_finite() && mu0 >= 0.0 && mu1 >= 0.0) {
            return invalid(format!("mutation rates must be finite and nonnegative (got {mu0}, {mu1})"));
        }
        Ok(Self { table, mu0, mu1 })
    }

    /// Diffusion limit of a finite-population model.
    pub fn from_params(params: &ModelParams) -> Self {
        Self { table: mean_assortment(params.scheme()), mu0: params.mu0(), mu1: params.mu1() }
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn table(&self) -> &MeanAssortTable {
        &self.table
    }
}

/// `b_i(x) = μ1(1−x_i) − μ0 x_i + (½−x_i) x_i(1−x_i) P_{i,s}(x)`.
pub fn drift(spec: &DiffusionSpec, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; spec.n()];
    drift_into(spec, x, &mut out);
    out
}

pub fn drift_into(spec: &DiffusionSpec, x: &[f64], out: &mut [f64]) {
    assert_eq!(x.len(), spec.n());
    drift_polynomials(&spec.table, x, out);
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = spec.mu1 * (1.0 - xi) - spec.mu0 * xi + (0.5 - xi) * xi * (1.0 - xi) * *o;
    }
}

/// One-locus drift without the pairing constraint; `s = [s00, s01, s10, s11]`.
pub fn drift_general_one_locus(s: [f64; 4], mu0: f64, mu1: f64, x: f64) -> f64 {
    let [s00, s01, s10, s11] = s;
    mu1 * (1.0 - x) - mu0 * x + 0.5 * x * (1.0 - x) * ((s10 - s11) * (1.0 - x) - (s01 - s00) * x)
}

/// Feller classification of a boundary whose inward mutation rate is `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryClass {
    Absorbing,
    Regular,
    Entrance,
}

pub fn boundary_classification(mu: f64) -> Result<BoundaryClass> {
    if !(mu.is_finite() && mu >= 0.0) {
        return invalid(format!("mutation rate {mu} must be finite and nonnegative"));
    }
    Ok(if mu == 0.0 {
        BoundaryClass::Absorbing
    } else if mu < 0.5 {
        BoundaryClass::Regular
    } else {
        BoundaryClass::Entrance
    })
}

/// Lower and upper one-dimensional drifts `b_i^∓(u)` bounding `b_i` whatever
/// the other coordinates are.
pub fn comparison_drifts(spec: &DiffusionSpec, i: usize, u: f64) -> (f64, f64) {
    let (lo, hi) = spec.table.bounds(i);
    let base = spec.mu1 * (1.0 - u) - spec.mu0 * u;
    let g = (0.5 - u) * u * (1.0 - u);
    if g >= 0.0 {
        (base + g * lo, base + g * hi)
    } else {
        (base + g * hi, base + g * lo)
    }
}

/// Two-locus, two-allele viability coefficients `σ_{ij,kl}`.
///
/// A genotype `(a, b)` with alleles `a, b ∈ {1, 2}` is stored at index
/// `(a−1) + 2(b−1)`, which matches the bitmask of the assortment model.
#[derive(Debug, Clone, PartialEq)]
pub struct WfSigma(pub [[f64; 4]; 4]);

impl WfSigma {
    /// `σ_{i,j} = −½ s_{i−1,j−1}`.
    pub fn from_assortment(scheme: &crate::AssortmentScheme) -> Result<Self> {
        if scheme.n() != 2 {
            return invalid("the Wright–Fisher comparison needs two loci");
        }
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = -0.5 * scheme.pair(i as u32, j as u32);
            }
        }
        Ok(Self(m))
    }

    fn at(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        self.0[(a.0 - 1) + 2 * (a.1 - 1)][(b.0 - 1) + 2 * (b.1 - 1)]
    }

    /// `σ_{11,21} = σ_{12,22}` and `σ_{11,12} = σ_{21,22}`.
    pub fn satisfies_pairing(&self, tol: f64) -> bool {
        (self.at((1, 1), (2, 1)) - self.at((1, 2), (2, 2))).abs() <= tol
            && (self.at((1, 1), (1, 2)) - self.at((2, 1), (2, 2))).abs() <= tol
    }
}

/// Per-locus mutation rates `ν_{1,2}` (allele 1 to 2) and `ν_{2,1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WfMutation {
    pub nu12: f64,
    pub nu21: f64,
}

/// Drift `(b_1, b_2)` of the weak-selection, loose-linkage two-locus diffusion.
pub fn wf_two_locus_drift(sigma: &WfSigma, nu: [WfMutation; 2], p1: f64, q1: f64) -> (f64, f64) {
    let s = |a, b| sigma.at(a, b);
    let (p, q) = (p1, q1);
    let cross = s((1, 2), (2, 1)) + s((1, 1), (2, 2));
    let b1 = nu[0].nu21 * (1.0 - p) - nu[0].nu12 * p
        - p * (1.0 - p)
            * (1.0 - 2.0 * p)
            * (cross * q * (1.0 - q) + s((1, 1), (2, 1)) * q * q + s((1, 2), (2, 2)) * (1.0 - q) * (1.0 - q))
        - 2.0 * p * (1.0 - p) * q * (1.0 - q) * (s((1, 1), (1, 2)) * p - s((2, 1), (2, 2)) * (1.0 - p));
    let b2 = nu[1].nu21 * (1.0 - q) - nu[1].nu12 * q
        - q * (1.0 - q)
            * (1.0 - 2.0 * q)
            * (cross * p * (1.0 - p) + s((1, 1), (1, 2)) * p * p + s((2, 1), (2, 2)) * (1.0 - p) * (1.0 - p))
        - 2.0 * q * (1.0 - q) * p * (1.0 - p) * (s((1, 1), (2, 1)) * q - s((1, 2), (2, 2)) * (1.0 - q));
    (b1, b2)
}

/// `b_i − ½∂_i[x_i(1−x_i)] − ½x_i(1−x_i)∂_i log g`, zero for a reversible density `g`.
pub fn reversibility_residual(spec: &DiffusionSpec, x: &[f64]) -> Result<Vec<f64>> {
    if spec.mu0 <= 0.0 || spec.mu1 <= 0.0 {
        return invalid("the stationary density needs positive mutation rates");
    }
    if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return invalid("x must lie in the open cube");
    }
    let b = drift(spec, x);
    let grad = log_density_gradient(spec, x);
    Ok((0..x.len())
        .map(|i| {
            let a = x[i] * (1.0 - x[i]);
            b[i] - 0.5 * (1.0 - 2.0 * x[i]) - 0.5 * a * grad[i]
        })
        .collect())
}
