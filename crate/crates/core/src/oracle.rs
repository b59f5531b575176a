//! Exact one-step expectations of the chain, used to check the diffusion
//! approximation term by term.

use crate::error::{Error, Result};
use crate::moran::{exact_kernel, ModelParams, PopulationState};
use crate::Mask;

pub const ORACLE_MAX_LOCI: usize = 4;
pub const ORACLE_MAX_POP: u64 = 64;

fn check_limits(params: &ModelParams) -> Result<()> {
    if params.n() > ORACLE_MAX_LOCI || params.pop() > ORACLE_MAX_POP {
        return Err(Error::Refused(format!(
            "exact enumeration limited to n ≤ {ORACLE_MAX_LOCI} and N ≤ {ORACLE_MAX_POP} (got n={}, N={})",
            params.n(),
            params.pop()
        )));
    }
    Ok(())
}

fn check_freqs(z: &[f64], params: &ModelParams) -> Result<()> {
    if z.len() != 1 << params.n() {
        return Err(Error::InvalidArgument("frequency vector has the wrong length".into()));
    }
    let total: f64 = z.iter().sum();
    if z.iter().any(|&v| v < 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("frequencies must be a probability vector".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftOracle {
    /// `N² E[Z₁(i) − z(i)]` by enumeration.
    pub exact: Vec<f64>,
    pub b0: Vec<f64>,
    pub b1: Vec<f64>,
    /// `exact − N·b0 − b1`.
    pub residual: Vec<f64>,
}

pub fn drift_oracle_z(state: &PopulationState, params: &ModelParams) -> Result<DriftOracle> {
    drift_oracle_at(&state.frequencies(), params)
}

/// Drift oracle at an arbitrary frequency vector.
pub fn drift_oracle_at(z: &[f64], params: &ModelParams) -> Result<DriftOracle> {
    check_limits(params)?;
    check_freqs(z, params)?;
    let size = z.len();
    let k = exact_kernel(z, params);
    let pop = params.pop() as f64;
    let exact: Vec<f64> = (0..size)
        .map(|i| {
            let inflow: f64 = (0..size).filter(|&j| j != i).map(|j| k[j][i]).sum();
            let outflow: f64 = (0..size).filter(|&j| j != i).map(|j| k[i][j]).sum();
            pop * (inflow - outflow)
        })
        .collect();
    let b0 = b0_terms(z, params);
    let b1 = b1_terms(z, params);
    let residual = (0..size).map(|i| exact[i] - pop * b0[i] - b1[i]).collect();
    Ok(DriftOracle { exact, b0, b1, residual })
}

fn offspring_table(params: &ModelParams) -> Vec<f64> {
    let size = 1usize << params.n();
    let r = params.recomb();
    let mut q = vec![0.0; size * size * size];
    for j in 0..size {
        for k in 0..size {
            for l in 0..size {
                q[(j * size + k) * size + l] = r.offspring_prob(j as Mask, k as Mask, l as Mask);
            }
        }
    }
    q
}

/// `B⁽⁰⁾_i(z) = Σ_{j,k} z_j z_k q((j,k); i) − z_i`.
pub fn b0_terms(z: &[f64], params: &ModelParams) -> Vec<f64> {
    let size = z.len();
    let q = offspring_table(params);
    (0..size)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..size {
                for k in 0..size {
                    acc += z[j] * z[k] * q[(j * size + k) * size + i];
                }
            }
            acc - z[i]
        })
        .collect()
}

/// First-order correction `B⁽¹⁾_i(z)`: mutation, assortment and normalisation terms.
pub fn b1_terms(z: &[f64], params: &ModelParams) -> Vec<f64> {
    let n = params.n();
    let size = z.len();
    let q = offspring_table(params);
    let qq = |j: usize, k: usize, l: usize| q[(j * size + k) * size + l];
    let mu = [params.mu0(), params.mu1()];
    let s = |a: usize, b: usize| params.scheme().pair(a as Mask, b as Mask);
    let sz: Vec<f64> = (0..size).map(|j| (0..size).map(|h| s(j, h) * z[h]).sum()).collect();
    (0..size)
        .map(|i| {
            let leave: f64 = (0..n).map(|u| mu[i >> u & 1]).sum();
            let mut mutation = 0.0;
            let mut assort = 0.0;
            let mut norm = 0.0;
            for j in 0..size {
                for k in 0..size {
                    let zz = z[j] * z[k];
                    let enter: f64 = (0..n).map(|u| qq(j, k, i ^ (1 << u)) * mu[1 - (i >> u & 1)]).sum();
                    mutation += zz * (enter - qq(j, k, i) * leave);
                    assort += s(j, k) * zz * qq(j, k, i);
                    norm += sz[j] * zz * qq(j, k, i);
                }
            }
            let total_z: f64 = z.iter().sum();
            mutation + assort - z[i] * sz[i] - norm + z[i] * sz[i] * total_z
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentOracle {
    /// `N² E[ΔX_u]`.
    pub first: Vec<f64>,
    /// `N² E[ΔX_u ΔX_v]`.
    pub second: Vec<Vec<f64>>,
    /// `N² E[(ΔX_u)⁴]`.
    pub fourth: Vec<f64>,
}

pub fn moment_oracle_x(state: &PopulationState, params: &ModelParams) -> Result<MomentOracle> {
    moment_oracle_at(&state.frequencies(), params)
}

pub fn moment_oracle_at(z: &[f64], params: &ModelParams) -> Result<MomentOracle> {
    check_limits(params)?;
    check_freqs(z, params)?;
    let n = params.n();
    let size = z.len();
    let pop = params.pop() as f64;
    let k = exact_kernel(z, params);
    let mut first = vec![0.0; n];
    let mut second = vec![vec![0.0; n]; n];
    let mut fourth = vec![0.0; n];
    let d = |i: usize, j: usize, u: usize| ((j >> u & 1 == 0) as i32 - (i >> u & 1 == 0) as i32) as f64;
    for i in 0..size {
        for j in 0..size {
            let p = k[i][j];
            if p == 0.0 || i == j {
                continue;
            }
            for u in 0..n {
                let du = d(i, j, u);
                first[u] += p * du * pop;
                fourth[u] += p * du.powi(4) / (pop * pop);
                for v in 0..n {
                    second[u][v] += p * du * d(i, j, v);
                }
            }
        }
    }
    Ok(MomentOracle { first, second, fourth })
}
