//! Subset-indexed difference operators, elementary symmetric polynomials and
//! the inversion identities used by every analytic module.
//!
//! Subsets of the locus set `{1..n}` are bitmasks: locus `u` (1-based) is bit `u-1`.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// Bitmask over loci, also used for genotypes (bit set = allele 1).
pub type Mask = u32;

/// Largest locus count accepted for any 2ⁿ-indexed table.
pub const MAX_LOCI: usize = 12;

/// Absolute tolerance for identity checks on O(1) inputs.
pub const IDENTITY_TOL: f64 = 1e-12;

pub fn check_loci(n: usize) -> Result<()> {
    if n == 0 || n > MAX_LOCI {
        return invalid(format!("locus count {n} outside 1..={MAX_LOCI}"));
    }
    Ok(())
}

#[inline]
pub fn full_mask(n: usize) -> Mask {
    ((1u64 << n) - 1) as Mask
}

#[inline]
pub fn card(m: Mask) -> usize {
    m.count_ones() as usize
}

/// Iterates all submasks of `m`, including `0` and `m`, in decreasing order.
pub fn submasks(m: Mask) -> Submasks {
    Submasks { mask: m, cur: m, done: false }
}

pub struct Submasks {
    mask: Mask,
    cur: Mask,
    done: bool,
}

impl Iterator for Submasks {
    type Item = Mask;

    fn next(&mut self) -> Option<Mask> {
        if self.done {
            return None;
        }
        let out = self.cur;
        if self.cur == 0 {
            self.done = true;
        } else {
            self.cur = (self.cur - 1) & self.mask;
        }
        Some(out)
    }
}

/// Loci (0-based) contained in `m`.
pub fn members(m: Mask) -> impl Iterator<Item = usize> {
    (0..Mask::BITS as usize).filter(move |&u| m >> u & 1 == 1)
}

/// Real-valued function on the subsets of `{1..n}`, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFn {
    n: usize,
    values: Vec<f64>,
}

impl SubsetFn {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_loci(n)?;
        if values.len() != 1 << n {
            return invalid(format!("expected {} subset values, got {}", 1usize << n, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("subset function values must be finite");
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_LOCI);
        Self { n, values: vec![0.0; 1 << n] }
    }

    pub fn from_fn(n: usize, f: impl FnMut(Mask) -> f64) -> Self {
        assert!(n <= MAX_LOCI);
        let values = (0..(1u32 << n)).map(f).collect();
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn full(&self) -> Mask {
        full_mask(self.n)
    }
}

impl Index<Mask> for SubsetFn {
    type Output = f64;
    fn index(&self, m: Mask) -> &f64 {
        &self.values[m as usize]
    }
}

impl IndexMut<Mask> for SubsetFn {
    fn index_mut(&mut self, m: Mask) -> &mut f64 {
        &mut self.values[m as usize]
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc.round()
}

/// `δ_B[f](A) = Σ_{J⊆B} (−1)^{|B|−|J|} f(A∪J)` for disjoint `A`, `B`.
pub fn delta_set(f: &SubsetFn, b: Mask, a: Mask) -> Result<f64> {
    let full = f.full();
    if a & !full != 0 || b & !full != 0 {
        return invalid("subset outside the locus set");
    }
    if a & b != 0 {
        return invalid("A and B must be disjoint");
    }
    Ok(delta_raw(f, b, a))
}

#[inline]
pub(crate) fn delta_raw(f: &SubsetFn, b: Mask, a: Mask) -> f64 {
    let nb = card(b);
    submasks(b)
        .map(|j| {
            let sign = if (nb - card(j)) % 2 == 0 { 1.0 } else { -1.0 };
            sign * f[a | j]
        })
        .sum()
}

/// k-th forward difference of a sequence.
pub fn forward_diff(s: &[f64], k: usize) -> Result<Vec<f64>> {
    if s.is_empty() || k >= s.len() {
        return invalid(format!("difference order {k} too large for length {}", s.len()));
    }
    let mut d = s.to_vec();
    for _ in 0..k {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(d)
}

/// `δ^{(k)}[s](0)` for k = 0..len(s)-1.
pub fn leading_diffs(s: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    let mut d = s.to_vec();
    while !d.is_empty() {
        out.push(d[0]);
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// `(S_t f)(A) = Σ_{B⊆A} t^{|A|−|B|} f(B)`; the inverse is `S_{−t}`.
pub fn s_t_transform(f: &SubsetFn, t: f64) -> SubsetFn {
    let mut g = f.clone();
    for u in 0..f.n {
        let bit = 1 << u;
        for a in 0..(1u32 << f.n) {
            if a & bit != 0 {
                g.values[a as usize] += t * g.values[(a ^ bit) as usize];
            }
        }
    }
    g
}

/// All elementary symmetric polynomials `e_0..e_len` of `x`.
pub fn elementary_symmetric_all(x: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; x.len() + 1];
    e[0] = 1.0;
    for (m, &xi) in x.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += xi * e[k - 1];
        }
    }
    e
}

pub fn elementary_symmetric(x: &[f64], k: usize) -> Result<f64> {
    if k > x.len() {
        return invalid(format!("degree {k} exceeds {} variables", x.len()));
    }
    Ok(elementary_symmetric_all(x)[k])
}

/// `B_{n,ℓ,i}(y) = 2^{−ℓ} Σ_j C(ℓ,j) C(n−ℓ,i−j) y^{i−j} (1−y)^{n−ℓ−(i−j)}`.
pub fn b_polynomial(n: usize, l: usize, i: usize, y: f64) -> Result<f64> {
    if l > n || i > n {
        return invalid(format!("B polynomial index out of range: n={n}, l={l}, i={i}"));
    }
    Ok(b_poly(n, l, i, y))
}

pub(crate) fn b_poly(n: usize, l: usize, i: usize, y: f64) -> f64 {
    let lo = (i + l).saturating_sub(n);
    let hi = i.min(l);
    let mut acc = 0.0;
    for j in lo..=hi {
        let p = i - j;
        acc += binomial(l, j) * binomial(n - l, p) * y.powi(p as i32) * (1.0 - y).powi((n - l - p) as i32);
    }
    acc * 0.5f64.powi(l as i32)
}

/// Evaluates both sides of
/// `Σ_{A⊆U} S_t(f)(A) Π_{A} x = Σ_{B⊆U} f(B) Π_{B} x Π_{U∖B} (1 + t x_j)`
/// independently and reports agreement within `tol`.
pub fn multivariate_identity_check(f: &SubsetFn, x: &[f64], t: f64, tol: f64) -> bool {
    let (lhs, rhs) = multivariate_identity_sides(f, x, t);
    (lhs - rhs).abs() <= tol
}

pub fn multivariate_identity_sides(f: &SubsetFn, x: &[f64], t: f64) -> (f64, f64) {
    assert_eq!(x.len(), f.n);
    let st = s_t_transform(f, t);
    let full = f.full();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for a in 0..=full {
        let pa: f64 = members(a).map(|u| x[u]).product();
        lhs += st[a] * pa;
        let rest: f64 = members(full & !a).map(|u| 1.0 + t * x[u]).product();
        rhs += f[a] * pa * rest;
    }
    (lhs, rhs)
}

/// `M_{n,k}(a)`: unit diagonal, `a` within the blocks `{1..k}` and `{k+1..n}`, `−a` across.
pub fn block_matrix(n: usize, k: usize, a: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if (i < k) == (j < k) {
            a
        } else {
            -a
        }
    })
}

pub fn block_matrix_posdef(n: usize, k: usize, a: f64) -> Result<bool> {
    if n == 0 || k > n {
        return invalid(format!("block matrix needs n ≥ 1 and k ≤ n, got n={n}, k={k}"));
    }
    Ok(block_matrix(n, k, a).cholesky().is_some())
}
