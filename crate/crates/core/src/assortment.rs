//! Assortment-parameter families `s_{i,j}`, their mean tables `m_L(s)`, the
//! coefficients `α`, and the drift polynomial `P_{i,s}`.

use std::collections::BTreeMap;

use crate::combinatorics::{
    binomial, card, check_loci, delta_raw, full_mask, members, submasks, Mask, SubsetFn, IDENTITY_TOL,
};
use crate::error::{invalid, Result};

/// Pair values keyed by the unordered pair of difference sets `(D01, D10)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    entries: BTreeMap<(Mask, Mask), f64>,
}

impl PairTable {
    fn key(d01: Mask, d10: Mask) -> (Mask, Mask) {
        (d01.min(d10), d01.max(d10))
    }

    pub fn get(&self, d01: Mask, d10: Mask) -> f64 {
        self.entries.get(&Self::key(d01, d10)).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = ((Mask, Mask), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    /// `s_{i,j} = s_{d(i,j)}` with `d` the Hamming distance.
    Hamming(Vec<f64>),
    /// `s_{i,j} = s_{|Σ(i_ℓ − j_ℓ)|}`.
    Additive(Vec<f64>),
    /// Arbitrary values per unordered pair of difference sets; missing pairs are 0.
    Custom(PairTable),
    /// `s_{i,j} = Σ_{∅≠B⊆i△j} 2^{1−|B|} α_B`.
    Alpha(SubsetFn),
    /// `s_{i,j} = s¹(i|G, j|G) + s²(i|Gᶜ, j|Gᶜ)`.
    Grouped { group: Mask, first: Box<AssortmentScheme>, second: Box<AssortmentScheme> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssortmentScheme {
    n: usize,
    kind: SchemeKind,
}

impl AssortmentScheme {
    pub fn hamming(s: Vec<f64>) -> Result<Self> {
        Self::sequence(s, SchemeKind::Hamming)
    }

    pub fn additive(s: Vec<f64>) -> Result<Self> {
        Self::sequence(s, SchemeKind::Additive)
    }

    /// Hamming scheme from the increments `s_{ℓ+1} − s_ℓ`, with `s_0 = 0`.
    pub fn hamming_increments(increments: &[f64]) -> Result<Self> {
        let mut s = vec![0.0];
        for d in increments {
            s.push(s.last().unwrap() + d);
        }
        Self::hamming(s)
    }

    fn sequence(s: Vec<f64>, wrap: fn(Vec<f64>) -> SchemeKind) -> Result<Self> {
        if s.len() < 2 {
            return invalid("sequence scheme needs s_0..s_n with n ≥ 1");
        }
        let n = s.len() - 1;
        check_loci(n)?;
        if s.iter().any(|v| !v.is_finite()) {
            return invalid("assortment parameters must be finite");
        }
        Ok(Self { n, kind: wrap(s) })
    }

    /// Custom scheme from `((D01, D10), value)` entries.
    pub fn custom(n: usize, entries: impl IntoIterator<Item = ((Mask, Mask), f64)>) -> Result<Self> {
        check_loci(n)?;
        let full = full_mask(n);
        let mut map = BTreeMap::new();
        for ((d01, d10), v) in entries {
            if d01 & d10 != 0 || (d01 | d10) & !full != 0 {
                return invalid(format!("difference sets ({d01:#x}, {d10:#x}) invalid for n={n}"));
            }
            if !v.is_finite() {
                return invalid("assortment parameters must be finite");
            }
            let key = PairTable::key(d01, d10);
            if let Some(prev) = map.insert(key, v) {
                if prev != v {
                    return invalid(format!("conflicting values for pair ({:#x}, {:#x})", key.0, key.1));
                }
            }
        }
        Ok(Self { n, kind: SchemeKind::Custom(PairTable { entries: map }) })
    }

    /// Imports a full `2ⁿ×2ⁿ` matrix, rejecting it unless symmetric and a function
    /// of the difference sets (exact equality).
    pub fn from_matrix(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        check_loci(n)?;
        let size = 1usize << n;
        if rows.len() != size || rows.iter().any(|r| r.len() != size) {
            return invalid(format!("matrix must be {size}×{size}"));
        }
        let mut map: BTreeMap<(Mask, Mask), f64> = BTreeMap::new();
        for i in 0..size as Mask {
            for j in 0..size as Mask {
                let v = rows[i as usize][j as usize];
                if !v.is_finite() {
                    return invalid("assortment parameters must be finite");
                }
                if v != rows[j as usize][i as usize] {
                    return invalid(format!("matrix not symmetric at ({i}, {j})"));
                }
                let key = PairTable::key(!i & j, i & !j);
                match map.get(&key) {
                    Some(&prev) if prev != v => {
                        return invalid(format!(
                            "value at ({i}, {j}) differs from another pair with the same difference sets"
                        ))
                    }
                    _ => {
                        map.insert(key, v);
                    }
                }
            }
        }
        Ok(Self { n, kind: SchemeKind::Custom(PairTable { entries: map }) })
    }

    pub fn from_alpha(alpha: SubsetFn) -> Self {
        Self { n: alpha.n(), kind: SchemeKind::Alpha(alpha) }
    }

    /// Sum of two schemes acting on the loci in `group` and on the remaining loci.
    pub fn grouped(n: usize, group: Mask, first: AssortmentScheme, second: AssortmentScheme) -> Result<Self> {
        check_loci(n)?;
        let full = full_mask(n);
        if group & !full != 0 || group == 0 || group == full {
            return invalid("group must be a proper nonempty subset of the loci");
        }
        if first.n != card(group) || second.n != n - card(group) {
            return invalid("child scheme sizes do not match the partition");
        }
        Ok(Self { n, kind: SchemeKind::Grouped { group, first: Box::new(first), second: Box::new(second) } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &SchemeKind {
        &self.kind
    }

    /// `s_{i,j}` for genotypes `i`, `j`.
    pub fn pair(&self, i: Mask, j: Mask) -> f64 {
        match &self.kind {
            SchemeKind::Hamming(s) => s[card(i ^ j)],
            SchemeKind::Additive(s) => {
                let a = card(i & !j) as i64;
                let b = card(!i & j) as i64;
                s[(a - b).unsigned_abs() as usize]
            }
            SchemeKind::Custom(t) => t.get(!i & j, i & !j),
            SchemeKind::Alpha(alpha) => {
                let l = i ^ j;
                submasks(l).filter(|&b| b != 0).map(|b| 2f64.powi(1 - card(b) as i32) * alpha[b]).sum()
            }
            SchemeKind::Grouped { group, first, second } => {
                let g = *group;
                let h = full_mask(self.n) & !g;
                first.pair(compress(i, g), compress(j, g)) + second.pair(compress(i, h), compress(j, h))
            }
        }
    }

    /// Smallest `s_{i,j}` over all genotype pairs.
    pub fn min_pair(&self) -> f64 {
        let size = 1u32 << self.n;
        let mut lo = f64::INFINITY;
        for i in 0..size {
            for j in i..size {
                lo = lo.min(self.pair(i, j));
            }
        }
        lo
    }

    /// Which sign convention the scheme satisfies at population size `pop`.
    pub fn convention(&self, pop: u64) -> Convention {
        let lo = self.min_pair();
        if lo >= 0.0 {
            Convention::Nonnegative
        } else if 1.0 + lo / pop as f64 > 0.0 {
            Convention::PositiveWeights
        } else {
            Convention::Invalid
        }
    }

    pub fn validate_for_population(&self, pop: u64) -> Result<Convention> {
        match self.convention(pop) {
            Convention::Invalid => invalid(format!(
                "1 + s/N must be positive for every pair; min s = {} at N = {pop}",
                self.min_pair()
            )),
            c => Ok(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Every `s_{i,j} ≥ 0`.
    Nonnegative,
    /// Some `s_{i,j} < 0` but every weight `1 + s_{i,j}/N` is positive.
    PositiveWeights,
    Invalid,
}

/// Packs the bits of `m` selected by `group` into the low bits.
pub fn compress(m: Mask, group: Mask) -> Mask {
    let mut out = 0;
    for (k, u) in members(group).enumerate() {
        out |= (m >> u & 1) << k;
    }
    out
}

/// Inverse of [`compress`].
pub fn expand(m: Mask, group: Mask) -> Mask {
    let mut out = 0;
    for (k, u) in members(group).enumerate() {
        out |= (m >> k & 1) << u;
    }
    out
}

/// `m_L(s)` for every `L`, plus the first differences `δ_i[m](A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanAssortTable {
    m: SubsetFn,
    /// `deltas[i][A] = m(A ∪ {i}) − m(A)`, meaningful for `A ∌ i`.
    deltas: Vec<Vec<f64>>,
    /// `alpha[B] = 2^{|B|−1} δ_B[m](∅)` for nonempty `B`.
    alpha: SubsetFn,
}

impl MeanAssortTable {
    pub fn from_means(m: SubsetFn) -> Self {
        let n = m.n();
        let full = m.full();
        let deltas = (0..n)
            .map(|i| {
                let bit = 1 << i;
                (0..=full).map(|a| if a & bit == 0 { m[a | bit] - m[a] } else { f64::NAN }).collect()
            })
            .collect();
        let alpha = SubsetFn::from_fn(n, |b| {
            if b == 0 {
                0.0
            } else {
                2f64.powi(card(b) as i32 - 1) * delta_raw(&m, b, 0)
            }
        });
        Self { m, deltas, alpha }
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }

    pub fn means(&self) -> &SubsetFn {
        &self.m
    }

    /// `δ_i[m](A)` for 0-based locus `i` and `A ∌ i`.
    pub fn delta(&self, i: usize, a: Mask) -> f64 {
        debug_assert!(a >> i & 1 == 0);
        self.deltas[i][a as usize]
    }

    pub fn alpha(&self) -> &SubsetFn {
        &self.alpha
    }

    /// `m_L` as a function of `|L|` when it depends on `|L|` only.
    pub fn cardinality_profile(&self) -> Option<Vec<f64>> {
        let n = self.n();
        let mut prof = vec![f64::NAN; n + 1];
        for l in 0..=self.m.full() {
            let k = card(l);
            let v = self.m[l];
            if prof[k].is_nan() {
                prof[k] = v;
            } else if (prof[k] - v).abs() > IDENTITY_TOL * (1.0 + v.abs()) {
                return None;
            }
        }
        Some(prof)
    }

    /// Upper and lower bounds `M_i^±` of `P_{i,s}` on the cube.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let rest = self.m.full() & !(1 << i);
        let mut lo = 0.0;
        let mut hi = 0.0;
        for a in submasks(rest) {
            let w = 0.5f64.powi(card(a) as i32);
            let d = self.delta(i, a);
            hi += w * d.max(0.0);
            lo -= w * (-d).max(0.0);
        }
        (lo, hi)
    }
}

pub fn mean_assortment(scheme: &AssortmentScheme) -> MeanAssortTable {
    MeanAssortTable::from_means(mean_values(scheme))
}

fn mean_values(scheme: &AssortmentScheme) -> SubsetFn {
    let n = scheme.n;
    match &scheme.kind {
        SchemeKind::Hamming(s) => SubsetFn::from_fn(n, |l| s[card(l)]),
        SchemeKind::Additive(s) => SubsetFn::from_fn(n, |l| {
            let k = card(l);
            let total: f64 = (0..=k).map(|j| binomial(k, j) * s[(2 * j as i64 - k as i64).unsigned_abs() as usize]).sum();
            total * 0.5f64.powi(k as i32)
        }),
        SchemeKind::Alpha(_) => SubsetFn::from_fn(n, |l| scheme.pair(0, l)),
        SchemeKind::Custom(_) => mean_values_brute(scheme),
        SchemeKind::Grouped { group, first, second } => {
            let g = *group;
            let h = full_mask(n) & !g;
            let m1 = mean_values(first);
            let m2 = mean_values(second);
            SubsetFn::from_fn(n, |l| m1[compress(l, g)] + m2[compress(l, h)])
        }
    }
}

/// `m_L = 2^{−n} Σ_{(i,j) ∈ F_L} s_{i,j}` by enumerating `F_L`.
pub fn mean_values_brute(scheme: &AssortmentScheme) -> SubsetFn {
    let n = scheme.n;
    let size = 1u32 << n;
    let scale = 0.5f64.powi(n as i32);
    SubsetFn::from_fn(n, |l| (0..size).map(|i| scheme.pair(i, i ^ l)).sum::<f64>() * scale)
}

/// `α` for every nonempty `B`, from `2^{|B|−1} δ_B[m](∅)`.
pub fn alpha_coeffs(table: &MeanAssortTable) -> SubsetFn {
    table.alpha.clone()
}

/// `α_{i,L} = 2^{|L|} Σ_{A⊆L} (−1)^{|L|−|A|} (m_{A∪{i}} − m_A)` with `i` distinguished.
pub fn alpha_distinguished(table: &MeanAssortTable, i: usize, l: Mask) -> f64 {
    debug_assert!(l >> i & 1 == 0);
    let nl = card(l);
    let sum: f64 = submasks(l)
        .map(|a| {
            let sign = if (nl - card(a)) % 2 == 0 { 1.0 } else { -1.0 };
            sign * table.delta(i, a)
        })
        .sum();
    2f64.powi(nl as i32) * sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyForm {
    Factorised,
    Expanded,
}

/// `P_{i,s}(x)` for 0-based locus `i`.
pub fn drift_polynomial(table: &MeanAssortTable, i: usize, x: &[f64], form: PolyForm) -> f64 {
    let n = table.n();
    assert_eq!(x.len(), n);
    let rest = full_mask(n) & !(1 << i);
    let rho: Vec<f64> = x.iter().map(|&v| v * (1.0 - v)).collect();
    match form {
        PolyForm::Factorised => submasks(rest)
            .map(|a| {
                let mut w = table.delta(i, a);
                for u in members(rest) {
                    w *= if a >> u & 1 == 1 { 2.0 * rho[u] } else { 1.0 - 2.0 * rho[u] };
                }
                w
            })
            .sum(),
        PolyForm::Expanded => submasks(rest)
            .map(|l| table.alpha[l | (1 << i)] * members(l).map(|u| rho[u]).product::<f64>())
            .sum(),
    }
}

/// All `P_{i,s}(x)` at once, via subset products of `ρ = x(1−x)`.
pub fn drift_polynomials(table: &MeanAssortTable, x: &[f64], out: &mut [f64]) {
    let n = table.n();
    let size = 1usize << n;
    let mut prod = [0.0f64; 1 << 6];
    let mut heap;
    let prod: &mut [f64] = if size <= prod.len() {
        &mut prod[..size]
    } else {
        heap = vec![0.0; size];
        &mut heap
    };
    prod[0] = 1.0;
    for l in 1..size {
        let low = l.trailing_zeros() as usize;
        prod[l] = prod[l & (l - 1)] * x[low] * (1.0 - x[low]);
    }
    let alpha = table.alpha.values();
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for l in 0..size {
            if l & bit == 0 {
                acc += alpha[l | bit] * prod[l];
            }
        }
        *o = acc;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub independent: bool,
    /// `δ_i[m](∅)` per locus, the one-locus strength `s_{u_i,1} − s_{1,1}` when independent.
    pub per_locus_strength: Vec<f64>,
}

/// Whether every `δ_i[m](L)` is constant in `L`.
pub fn independence_check(table: &MeanAssortTable) -> IndependenceReport {
    let n = table.n();
    let full = full_mask(n);
    let mut independent = true;
    let mut strength = Vec::with_capacity(n);
    for i in 0..n {
        let base = table.delta(i, 0);
        strength.push(base);
        for a in submasks(full & !(1 << i)) {
            if (table.delta(i, a) - base).abs() > IDENTITY_TOL * (1.0 + base.abs()) {
                independent = false;
            }
        }
    }
    IndependenceReport { independent, per_locus_strength: strength }
}

/// Custom scheme with `s_{i,i} = 0` whose `α` coefficients equal `alpha`.
pub fn realize_from_alpha(alpha: &SubsetFn) -> AssortmentScheme {
    let n = alpha.n();
    let full = full_mask(n);
    let mut entries = Vec::new();
    for diff in 0..=full {
        let v: f64 = submasks(diff).filter(|&b| b != 0).map(|b| 2f64.powi(1 - card(b) as i32) * alpha[b]).sum();
        for d01 in submasks(diff) {
            entries.push(((d01, diff & !d01), v));
        }
    }
    AssortmentScheme::custom(n, entries).expect("entries built from valid masks")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hamming_means_follow_distance() {
        let s = AssortmentScheme::hamming(vec![0.0, -1.0, -4.0, -9.0]).unwrap();
        let t = mean_assortment(&s);
        for l in 0..8 {
            assert_eq!(t.means()[l], [0.0, -1.0, -4.0, -9.0][card(l)]);
        }
        assert_eq!(mean_values_brute(&s), *t.means());
    }

    #[test]
    fn additive_singleton_mean_is_s1() {
        let s = AssortmentScheme::additive(vec![0.3, -1.5, 2.0, 7.0]).unwrap();
        let t = mean_assortment(&s);
        for u in 0..3 {
            assert_eq!(t.means()[1 << u], -1.5);
        }
        let brute = mean_values_brute(&s);
        for l in 0..8 {
            assert_abs_diff_eq!(brute[l], t.means()[l], epsilon = 1e-14);
        }
    }

    #[test]
    fn two_locus_custom_pair_mean() {
        let (s_same, s1, s2, s_1100, s_0110) = (0.0, -1.0, -2.0, -5.0, 3.0);
        let s = AssortmentScheme::custom(
            2,
            [((0, 0), s_same), ((1, 0), s1), ((2, 0), s2), ((3, 0), s_1100), ((1, 2), s_0110)],
        )
        .unwrap();
        let t = mean_assortment(&s);
        assert_abs_diff_eq!(t.means()[3], (s_1100 + s_0110) / 2.0, epsilon = 1e-15);
        assert_eq!(s.pair(0b00, 0b11), s_1100);
        assert_eq!(s.pair(0b01, 0b10), s_0110);
        assert_eq!(s.pair(0b10, 0b01), s_0110);
    }

    #[test]
    fn constant_scheme_has_zero_alpha_and_drift() {
        let s = AssortmentScheme::hamming(vec![2.5; 4]).unwrap();
        let t = mean_assortment(&s);
        assert!(alpha_coeffs(&t).values().iter().all(|&a| a == 0.0));
        for form in [PolyForm::Factorised, PolyForm::Expanded] {
            assert_eq!(drift_polynomial(&t, 1, &[0.2, 0.7, 0.4], form), 0.0);
        }
    }

    #[test]
    fn hamming_alpha_tilde() {
        let s = vec![0.0, -1.0, -3.5, -4.0, -10.0];
        let t = mean_assortment(&AssortmentScheme::hamming(s.clone()).unwrap());
        let lead = crate::combinatorics::leading_diffs(&s);
        for k in 0..4usize {
            let expected = 2f64.powi(k as i32) * lead[k + 1];
            let b: Mask = (1 << (k + 1)) - 1;
            assert_abs_diff_eq!(t.alpha()[b], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_increment_gives_constant_polynomial() {
        let t = mean_assortment(&AssortmentScheme::hamming(vec![1.0, -1.0, -3.0, -5.0]).unwrap());
        for x in [[0.1, 0.5, 0.9], [0.33, 0.01, 0.77]] {
            for i in 0..3 {
                assert_abs_diff_eq!(drift_polynomial(&t, i, &x, PolyForm::Factorised), -2.0, epsilon = 1e-13);
                assert_abs_diff_eq!(drift_polynomial(&t, i, &x, PolyForm::Expanded), -2.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn independence_examples() {
        let lin = mean_assortment(&AssortmentScheme::hamming(vec![0.5, -1.5, -3.5, -5.5]).unwrap());
        let r = independence_check(&lin);
        assert!(r.independent);
        assert_eq!(r.per_locus_strength, vec![-2.0; 3]);

        let c = 0.7;
        let add: Vec<f64> = (0..5).map(|l| c * (l * l) as f64).collect();
        let r = independence_check(&mean_assortment(&AssortmentScheme::additive(add).unwrap()));
        assert!(r.independent);

        let r = independence_check(&mean_assortment(&AssortmentScheme::hamming(vec![0.0, -1.0, -3.0]).unwrap()));
        assert!(!r.independent);
    }

    #[test]
    fn realize_two_locus_alpha() {
        let alpha = SubsetFn::new(2, vec![0.0, 1.0, 0.0, 2.0]).unwrap();
        let scheme = realize_from_alpha(&alpha);
        let back = alpha_coeffs(&mean_assortment(&scheme));
        for b in 1..4 {
            assert_abs_diff_eq!(back[b], alpha[b], epsilon = 1e-15);
        }
        assert_eq!(scheme.pair(0b10, 0b10), 0.0);
        let zero = realize_from_alpha(&SubsetFn::zeros(3));
        assert_eq!(zero.min_pair(), 0.0);
    }

    #[test]
    fn matrix_importer_checks_pairing() {
        let s = AssortmentScheme::custom(2, [((1, 0), -1.0), ((2, 0), -2.0), ((3, 0), -4.0), ((1, 2), -3.0)]).unwrap();
        let rows: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| s.pair(i, j)).collect()).collect();
        let imported = AssortmentScheme::from_matrix(2, &rows).unwrap();
        assert_eq!(mean_assortment(&imported).means(), mean_assortment(&s).means());

        let mut broken = rows.clone();
        broken[0][1] = -1.5;
        broken[1][0] = -1.5;
        assert!(AssortmentScheme::from_matrix(2, &broken).is_err());
        let mut asym = rows;
        asym[0][3] = 0.1;
        assert!(AssortmentScheme::from_matrix(2, &asym).is_err());
    }

    #[test]
    fn grouped_means_add() {
        let a = AssortmentScheme::hamming(vec![0.0, -2.0]).unwrap();
        let b = AssortmentScheme::hamming(vec![0.0, -1.0, -5.0]).unwrap();
        let g = AssortmentScheme::grouped(3, 0b010, a.clone(), b.clone()).unwrap();
        let t = mean_assortment(&g);
        let ta = mean_assortment(&a);
        let tb = mean_assortment(&b);
        for l in 0..8 {
            assert_eq!(t.means()[l], ta.means()[compress(l, 0b010)] + tb.means()[compress(l, 0b101)]);
        }
        let brute = mean_values_brute(&g);
        for l in 0..8 {
            assert_abs_diff_eq!(brute[l], t.means()[l], epsilon = 1e-14);
        }
    }

    #[test]
    fn conventions() {
        let s = AssortmentScheme::hamming(vec![0.0, -15.0, -225.0]).unwrap();
        assert_eq!(s.convention(1000), Convention::PositiveWeights);
        assert_eq!(s.convention(100), Convention::Invalid);
        assert!(s.validate_for_population(100).is_err());
        assert_eq!(AssortmentScheme::hamming(vec![1.0, 0.0]).unwrap().convention(1), Convention::Nonnegative);
    }

    #[test]
    fn compress_expand_round_trip() {
        for m in 0..64 {
            let g = 0b101101;
            assert_eq!(expand(compress(m, g), g), m & g);
        }
    }
}
