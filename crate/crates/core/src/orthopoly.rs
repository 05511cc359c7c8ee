//! Orthonormal univariate polynomials, total-degree multi-index sets and the
//! tensor-product chaos basis.
//!
//! Both families are orthonormal against a probability measure: Hermite
//! against the standard normal density, Legendre against the uniform density
//! 1/2 on [-1, 1]. Leading coefficients are positive. Values and derivatives
//! come from the orthonormal three-term recurrence
//! `x ψ_n = b_{n+1} ψ_{n+1} + b_n ψ_{n-1}` with `b_n = √n` (Hermite) or
//! `b_n = n / √(4n² - 1)` (Legendre), so no factorials are ever formed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Upper bound on the number of basis terms we are willing to allocate.
pub const MAX_TERMS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyFamily {
    /// Probabilists' Hermite, orthonormal under N(0, 1).
    Hermite,
    /// Legendre, orthonormal under U(-1, 1).
    Legendre,
}

impl PolyFamily {
    /// Off-diagonal entry `b_n` (n >= 1) of the Jacobi matrix.
    pub fn recurrence_coeff(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            PolyFamily::Hermite => n.sqrt(),
            PolyFamily::Legendre => n / (4.0 * n * n - 1.0).sqrt(),
        }
    }

    /// Fill `vals[0..=deg]` and `ders[0..=deg]` with ψ_n(x) and ψ_n'(x).
    pub fn eval_table(self, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        let len = vals.len().min(ders.len());
        if len == 0 {
            return;
        }
        vals[0] = 1.0;
        ders[0] = 0.0;
        if len == 1 {
            return;
        }
        let b1 = self.recurrence_coeff(1);
        vals[1] = x / b1;
        ders[1] = 1.0 / b1;
        for n in 1..len - 1 {
            let bn = self.recurrence_coeff(n);
            let bn1 = self.recurrence_coeff(n + 1);
            vals[n + 1] = (x * vals[n] - bn * vals[n - 1]) / bn1;
            ders[n + 1] = (vals[n] + x * ders[n] - bn * ders[n - 1]) / bn1;
        }
    }
}

/// Orthonormal ψ_n(x) and ψ_n'(x).
pub fn univariate_eval(family: PolyFamily, degree: i64, x: f64) -> Result<(f64, f64)> {
    if degree < 0 {
        return Err(invalid(format!("polynomial degree must be >= 0, got {degree}")));
    }
    let n = degree as usize;
    let mut vals = vec![0.0; n + 1];
    let mut ders = vec![0.0; n + 1];
    family.eval_table(x, &mut vals, &mut ders);
    Ok((vals[n], ders[n]))
}

/// Binomial coefficient with overflow detection.
pub fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n.checked_sub(k)?);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    usize::try_from(acc).ok()
}

/// Total-degree multi-indices `|α|₁ <= p`, graded by total degree and, within
/// a degree, in descending lexicographic order: for m = 2 the degree-2 block
/// is (2,0), (1,1), (0,2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    m: usize,
    p: usize,
    indices: Vec<Vec<u32>>,
    // (dimension, degree) pairs with degree > 0, per index
    support: Vec<Vec<(usize, usize)>>,
}

impl MultiIndexSet {
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn get(&self, j: usize) -> &[u32] {
        &self.indices[j]
    }

    /// Nonzero (dimension, degree) entries of index `j`.
    pub fn support(&self, j: usize) -> &[(usize, usize)] {
        &self.support[j]
    }
}

fn push_degree(m: usize, remaining: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == m - 1 {
        prefix.push(remaining as u32);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=remaining).rev() {
        prefix.push(first as u32);
        push_degree(m, remaining - first, prefix, out);
        prefix.pop();
    }
}

/// All multi-indices of dimension `m` with total degree at most `p`.
pub fn build_index_set(m: usize, p: usize) -> Result<MultiIndexSet> {
    if m == 0 {
        return Err(invalid("multi-index dimension must be >= 1"));
    }
    let count = binomial(p.checked_add(m).ok_or_else(|| overflow(m, p))?, m)
        .filter(|&c| c <= MAX_TERMS)
        .ok_or_else(|| overflow(m, p))?;
    let mut indices = Vec::with_capacity(count);
    let mut prefix = Vec::with_capacity(m);
    for d in 0..=p {
        push_degree(m, d, &mut prefix, &mut indices);
    }
    debug_assert_eq!(indices.len(), count);
    let support = indices
        .iter()
        .map(|a| {
            a.iter()
                .enumerate()
                .filter(|(_, &d)| d > 0)
                .map(|(k, &d)| (k, d as usize))
                .collect()
        })
        .collect();
    Ok(MultiIndexSet { m, p, indices, support })
}

fn overflow(m: usize, p: usize) -> Error {
    Error::SizeOverflow(format!(
        "total-degree basis with m = {m}, p = {p} exceeds {MAX_TERMS} terms"
    ))
}

/// Serializable description of a basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub m: usize,
    pub p: usize,
    pub families: Vec<PolyFamily>,
}

/// Tensor-product orthonormal basis over a total-degree index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisSpec", into = "BasisSpec")]
pub struct ChaosBasis {
    families: Vec<PolyFamily>,
    index_set: MultiIndexSet,
}

impl TryFrom<BasisSpec> for ChaosBasis {
    type Error = Error;

    fn try_from(spec: BasisSpec) -> Result<Self> {
        if spec.families.len() != spec.m {
            return Err(invalid("basis spec: families length differs from m"));
        }
        ChaosBasis::new(spec.families, spec.p)
    }
}

impl From<ChaosBasis> for BasisSpec {
    fn from(b: ChaosBasis) -> Self {
        BasisSpec { m: b.dim(), p: b.order(), families: b.families }
    }
}

impl ChaosBasis {
    pub fn new(families: Vec<PolyFamily>, p: usize) -> Result<Self> {
        let index_set = build_index_set(families.len(), p)?;
        Ok(Self { families, index_set })
    }

    pub fn for_space(space: &crate::StochasticSpace, p: usize) -> Result<Self> {
        Self::new(space.families(), p)
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn order(&self) -> usize {
        self.index_set.order()
    }

    /// Number of terms, P + 1.
    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn spec(&self) -> BasisSpec {
        self.clone().into()
    }

    fn check_point(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dim() {
            return Err(invalid(format!(
                "point has {} coordinates, basis dimension is {}",
                xi.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn tables(&self, xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = self.order() + 1;
        let mut vals = vec![0.0; w * self.dim()];
        let mut ders = vec![0.0; w * self.dim()];
        for (k, (&x, fam)) in xi.iter().zip(&self.families).enumerate() {
            fam.eval_table(x, &mut vals[k * w..(k + 1) * w], &mut ders[k * w..(k + 1) * w]);
        }
        (vals, ders)
    }

    /// Write Ψ_j(ξ) for every term into `out`.
    pub fn eval_into(&self, xi: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_point(xi)?;
        if out.len() != self.len() {
            return Err(invalid("output row length differs from basis size"));
        }
        let w = self.order() + 1;
        let (vals, _) = self.tables(xi);
        for (j, o) in out.iter_mut().enumerate() {
            *o = self
                .index_set
                .support(j)
                .iter()
                .map(|&(k, d)| vals[k * w + d])
                .product();
        }
        Ok(())
    }

    /// Row of P + 1 basis values at ξ.
    pub fn eval(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let mut row = vec![0.0; self.len()];
        self.eval_into(xi, &mut row)?;
        Ok(row)
    }

    /// m × (P + 1) matrix of ∂Ψ_j/∂ξ_k.
    pub fn grad(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(xi)?;
        let w = self.order() + 1;
        let (vals, ders) = self.tables(xi);
        let mut g = DMatrix::zeros(self.dim(), self.len());
        for j in 0..self.len() {
            let support = self.index_set.support(j);
            for (a, &(k, d)) in support.iter().enumerate() {
                let mut prod = ders[k * w + d];
                for (b, &(l, e)) in support.iter().enumerate() {
                    if a != b {
                        prod *= vals[l * w + e];
                    }
                }
                g[(k, j)] = prod;
            }
        }
        Ok(g)
    }

    /// Evaluate Σ c_j Ψ_j(ξ).
    pub fn expand(&self, coefficients: &[f64], xi: &[f64]) -> Result<f64> {
        if coefficients.len() != self.len() {
            return Err(invalid("coefficient vector length differs from basis size"));
        }
        let row = self.eval(xi)?;
        Ok(row.iter().zip(coefficients).map(|(a, b)| a * b).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn hermite_low_orders() {
        assert_eq!(univariate_eval(PolyFamily::Hermite, 0, 2.7).unwrap(), (1.0, 0.0));
        let (v, d) = univariate_eval(PolyFamily::Hermite, 2, 0.0).unwrap();
        assert!((v + 1.0 / SQRT_2).abs() < 1e-15);
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn legendre_endpoint() {
        let (v, d) = univariate_eval(PolyFamily::Legendre, 1, 1.0).unwrap();
        let s3 = 3f64.sqrt();
        assert!((v - s3).abs() < 1e-15);
        assert!((d - s3).abs() < 1e-15);
    }

    #[test]
    fn negative_degree_rejected() {
        assert!(univariate_eval(PolyFamily::Legendre, -1, 0.0).is_err());
    }

    #[test]
    fn matches_closed_forms() {
        // He_3 = x^3 - 3x, P_3 = (5x^3 - 3x) / 2
        for &x in &[-2.3, -0.4, 0.0, 0.9, 1.7] {
            let (h, hd) = univariate_eval(PolyFamily::Hermite, 3, x).unwrap();
            let n3 = 6f64.sqrt();
            assert!((h - (x * x * x - 3.0 * x) / n3).abs() < 1e-13);
            assert!((hd - (3.0 * x * x - 3.0) / n3).abs() < 1e-13);
            let (l, ld) = univariate_eval(PolyFamily::Legendre, 3, x).unwrap();
            let s7 = 7f64.sqrt();
            assert!((l - s7 * 0.5 * (5.0 * x * x * x - 3.0 * x)).abs() < 1e-12);
            assert!((ld - s7 * 0.5 * (15.0 * x * x - 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn high_degree_stays_finite() {
        for fam in [PolyFamily::Hermite, PolyFamily::Legendre] {
            for &x in &[-6.0, -1.0, 0.3, 6.0] {
                let (v, d) = univariate_eval(fam, 30, x).unwrap();
                assert!(v.is_finite() && d.is_finite());
            }
        }
    }

    #[test]
    fn index_set_sizes() {
        assert_eq!(build_index_set(2, 4).unwrap().len(), 15);
        assert_eq!(build_index_set(1, 6).unwrap().len(), 7);
        let c = build_index_set(3, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.get(0), &[0, 0, 0]);
    }

    #[test]
    fn index_set_order_is_graded_descending_lex() {
        let s = build_index_set(2, 2).unwrap();
        let expect: Vec<Vec<u32>> =
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]];
        assert_eq!(s.indices(), expect.as_slice());
    }

    #[test]
    fn index_set_overflow_is_reported() {
        assert!(matches!(build_index_set(60, 12), Err(Error::SizeOverflow(_))));
        assert!(build_index_set(0, 2).is_err());
    }

    #[test]
    fn basis_values_at_origin() {
        let b = ChaosBasis::new(vec![PolyFamily::Hermite; 2], 2).unwrap();
        let row = b.eval(&[0.0, 0.0]).unwrap();
        let h = -1.0 / SQRT_2;
        let expect = [1.0, 0.0, 0.0, h, 0.0, h];
        for (a, e) in row.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        let l = ChaosBasis::new(vec![PolyFamily::Legendre], 2).unwrap();
        let row = l.eval(&[1.0]).unwrap();
        for (a, e) in row.iter().zip([1.0, 3f64.sqrt(), 5f64.sqrt()]) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let b = ChaosBasis::new(vec![PolyFamily::Hermite], 1).unwrap();
        for &x in &[-1.0, 0.0, 2.5] {
            let g = b.grad(&[x]).unwrap();
            assert_eq!(g[(0, 0)], 0.0);
            assert!((g[(0, 1)] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let b = ChaosBasis::new(vec![PolyFamily::Hermite; 3], 2).unwrap();
        assert!(b.eval(&[0.0, 1.0]).is_err());
        assert!(b.grad(&[0.0]).is_err());
    }

    #[test]
    fn basis_serializes_as_spec() {
        let b = ChaosBasis::new(vec![PolyFamily::Hermite, PolyFamily::Legendre], 3).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, r#"{"m":2,"p":3,"families":["hermite","legendre"]}"#);
        let back: ChaosBasis = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }
}
