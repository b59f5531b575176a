//! Fast-timescale decay of linkage disequilibria `y(I)` at fixed allele frequencies.

use crate::combinatorics::{card, full_mask, members, SubsetFn};
use crate::error::{invalid, Error, Result};
use crate::recombination::RecombinationDistribution;
use crate::Mask;

const INITIAL_STEP_SCALE: f64 = 1e-3;
const REFINE_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 24;

/// `c_{n,I}(x, y)` for `|I| ≥ 2`; `y` is read on subsets with at least two loci.
pub fn linkage_rate(r: &RecombinationDistribution, x: &[f64], y: &SubsetFn, i: Mask) -> f64 {
    let full = r.weights().full();
    let ni = card(i);
    let mut split = 0.0;
    let mut pairs = 0.0;
    let mut mixed = 0.0;
    for l in 0..=full {
        let a = i & l;
        let b = i & !l;
        if a == 0 || b == 0 {
            continue;
        }
        let rl = r.get(l);
        split += rl;
        let (na, nb) = (card(a), card(b));
        if ni >= 4 && na >= 2 && nb >= 2 {
            pairs += rl * y[a] * y[b];
        }
        if ni >= 3 && na >= 2 {
            mixed += (rl + r.get(full & !l)) * y[a] * members(b).map(|u| x[u]).product::<f64>();
        }
    }
    -split * y[i] - pairs + mixed
}

fn rates(r: &RecombinationDistribution, x: &[f64], v: &SubsetFn, masks: &[Mask], out: &mut SubsetFn) {
    for &m in masks {
        out[m] = linkage_rate(r, x, v, m);
    }
}

fn rk4(r: &RecombinationDistribution, x: &[f64], y0: &SubsetFn, masks: &[Mask], t: f64, steps: usize) -> SubsetFn {
    let n = y0.n();
    let h = t / steps as f64;
    let mut v = y0.clone();
    let mut k1 = SubsetFn::zeros(n);
    let mut k2 = SubsetFn::zeros(n);
    let mut k3 = SubsetFn::zeros(n);
    let mut k4 = SubsetFn::zeros(n);
    let mut tmp = SubsetFn::zeros(n);
    for _ in 0..steps {
        rates(r, x, &v, masks, &mut k1);
        for &m in masks {
            tmp[m] = v[m] + 0.5 * h * k1[m];
        }
        rates(r, x, &tmp, masks, &mut k2);
        for &m in masks {
            tmp[m] = v[m] + 0.5 * h * k2[m];
        }
        rates(r, x, &tmp, masks, &mut k3);
        for &m in masks {
            tmp[m] = v[m] + h * k3[m];
        }
        rates(r, x, &tmp, masks, &mut k4);
        for &m in masks {
            v[m] += h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkageDecay {
    pub v: SubsetFn,
    pub steps: usize,
    /// Max-norm change at the last halving.
    pub last_change: f64,
}

/// Solves `dv_I/dt = c_{n,I}(x, v)`, `v(0) = y0`, up to time `t` with RK4.
///
/// The step starts at `10⁻³/r(n)` and is halved until two successive results
/// differ by less than `10⁻⁸`.
pub fn linkage_decay_ode(r: &RecombinationDistribution, x: &[f64], y0: &SubsetFn, t: f64) -> Result<LinkageDecay> {
    let n = r.n();
    if x.len() != n || y0.n() != n {
        return invalid("x, y0 and the recombination law disagree on the locus count");
    }
    if !(t.is_finite() && t >= 0.0) {
        return invalid(format!("time {t} must be finite and nonnegative"));
    }
    let rn = r.min_split();
    if rn <= 0.0 {
        return Err(Error::Refused(
            "r(n) = 0: some pair of loci is never separated, so disequilibrium between them does not decay".into(),
        ));
    }
    let masks: Vec<Mask> = (0..=full_mask(n)).filter(|&m| card(m) >= 2).collect();
    let mut clean = SubsetFn::zeros(n);
    for &m in &masks {
        clean[m] = y0[m];
    }
    if masks.is_empty() || t == 0.0 {
        return Ok(LinkageDecay { v: clean, steps: 0, last_change: 0.0 });
    }
    let h0 = INITIAL_STEP_SCALE / rn;
    let mut steps = ((t / h0).ceil() as usize).max(1);
    let mut prev = rk4(r, x, &clean, &masks, t, steps);
    let mut change = f64::INFINITY;
    for _ in 0..MAX_HALVINGS {
        steps *= 2;
        let next = rk4(r, x, &clean, &masks, t, steps);
        change = masks.iter().map(|&m| (next[m] - prev[m]).abs()).fold(0.0, f64::max);
        prev = next;
        if change < REFINE_TOL {
            break;
        }
    }
    Ok(LinkageDecay { v: prev, steps, last_change: change })
}

/// `max_I |v_I|` over subsets with at least two loci.
pub fn sup_norm(v: &SubsetFn) -> f64 {
    (0..=v.full()).filter(|&m| card(m) >= 2).map(|m| v[m].abs()).fold(0.0, f64::max)
}
