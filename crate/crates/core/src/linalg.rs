//! Dense and banded factorizations used by the design, regression and
//! Burgers modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::exec;

/// Householder QR with greedy column pivoting, stopped after a fixed number of
/// steps.
///
/// Columns are stored contiguously (`rows` entries each). At every step the
/// remaining column with the largest trailing norm is swapped to the front;
/// equal norms resolve to the lowest original column index. Trailing norms are
/// recomputed exactly at each step rather than downdated, so every column is
/// transformed by the same sequence of operations wherever it sits in memory.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    cols: Vec<f64>,
    perm: Vec<usize>,
    reflectors: Vec<(Vec<f64>, f64)>,
    r_diag: Vec<f64>,
}

impl PivotedQr {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.perm.len()
    }

    /// Number of completed pivot steps.
    pub fn steps(&self) -> usize {
        self.r_diag.len()
    }

    /// `perm[k]` is the original index of the column at position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// |R_kk| for the completed steps.
    pub fn r_diag(&self) -> &[f64] {
        &self.r_diag
    }

    /// The orthogonal factor, `rows × rows`.
    pub fn q(&self) -> DMatrix<f64> {
        let mut q = DMatrix::identity(self.rows, self.rows);
        for c in 0..self.rows {
            let mut col: Vec<f64> = q.column(c).iter().copied().collect();
            for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
                apply_reflector(&mut col[k..], v, *beta);
            }
            q.column_mut(c).copy_from_slice(&col);
        }
        q
    }

    /// R in pivot order, `rows × ncols`. Columns beyond the completed steps
    /// hold the partially reduced trailing block.
    pub fn r(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.ncols(), &self.cols)
    }
}

fn apply_reflector(x: &mut [f64], v: &[f64], beta: f64) {
    let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    let s = beta * dot;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

/// Run `steps` pivoted Householder steps on the column-major matrix `cols`.
///
/// Stops early if every remaining column is exactly zero.
pub fn pivoted_qr(mut cols: Vec<f64>, rows: usize, steps: usize) -> Result<PivotedQr> {
    if rows == 0 || cols.is_empty() || cols.len() % rows != 0 {
        return Err(invalid("pivoted QR needs a non-empty column-major matrix"));
    }
    let ncols = cols.len() / rows;
    let steps = steps.min(rows).min(ncols);
    let mut perm: Vec<usize> = (0..ncols).collect();
    let mut reflectors = Vec::with_capacity(steps);
    let mut r_diag = Vec::with_capacity(steps);

    for k in 0..steps {
        let norms = {
            let tail = &cols[k * rows..];
            exec::map_range(ncols - k, |c| {
                tail[c * rows + k..(c + 1) * rows].iter().map(|x| x * x).sum::<f64>()
            })
        };
        let mut best = 0;
        for (c, &n) in norms.iter().enumerate().skip(1) {
            if n > norms[best] || (n == norms[best] && perm[k + c] < perm[k + best]) {
                best = c;
            }
        }
        if norms[best] == 0.0 {
            break;
        }
        let pivot = k + best;
        if pivot != k {
            for i in 0..rows {
                cols.swap(k * rows + i, pivot * rows + i);
            }
            perm.swap(k, pivot);
        }

        let x = &cols[k * rows + k..(k + 1) * rows];
        let norm = norms[best].sqrt();
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let beta = if vv > 0.0 { 2.0 / vv } else { 0.0 };

        {
            let col_k = &mut cols[k * rows..(k + 1) * rows];
            col_k[k] = alpha;
            for e in &mut col_k[k + 1..] {
                *e = 0.0;
            }
        }
        let (_, trailing) = cols.split_at_mut((k + 1) * rows);
        exec::for_each_chunk_mut(trailing, rows, |col| apply_reflector(&mut col[k..], &v, beta));

        reflectors.push((v, beta));
        r_diag.push(norm);
    }
    Ok(PivotedQr { rows, cols, perm, reflectors, r_diag })
}

/// Ratio of extreme singular values; infinite for a rank-deficient matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return f64::INFINITY;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Condition numbers above this are treated as numerically rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

/// Solution of an overdetermined (or square) least-squares problem.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub cond: f64,
}

/// Minimize ‖a x - b‖₂ through a Householder QR of `a` (never the normal
/// equations).
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LstsqSolution> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::InsufficientSamples { needed: cols, got: rows });
    }
    if b.len() != rows {
        return Err(invalid("right-hand side length differs from matrix rows"));
    }
    let cond = condition_number(a);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::RankDeficient { cond });
    }
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient { cond })?;
    let residual_norm = (b - a * &x).norm();
    Ok(LstsqSolution { x, residual_norm, cond })
}

/// Least-squares solution that stays defined for rank-deficient matrices.
#[derive(Debug, Clone)]
pub struct GradedSolution {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    /// Singular values above `σ_max / MAX_CONDITION`.
    pub rank: usize,
    /// σ_max over the smallest retained singular value.
    pub cond: f64,
}

fn full_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = a.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("requested");
    let v = svd.v_t.expect("requested").transpose();
    (u, svd.singular_values.iter().copied().collect(), v)
}

/// Least squares with a graded tie-break on the null space.
///
/// Among all minimizers of `‖a x - b‖₂`, returns the one whose entries of the
/// highest grade have the smallest norm; remaining freedom is spent on the
/// next grade down, and so on. For full-rank `a` this is the ordinary
/// least-squares solution.
pub fn lstsq_graded(a: &DMatrix<f64>, b: &DVector<f64>, grades: &[usize]) -> Result<GradedSolution> {
    let (rows, cols) = a.shape();
    if b.len() != rows || grades.len() != cols {
        return Err(invalid("lstsq_graded: shape mismatch"));
    }
    if cols == 0 {
        return Err(invalid("lstsq_graded: empty system"));
    }
    let (u, sv, v) = full_svd(a);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(Error::RankDeficient { cond: f64::INFINITY });
    }
    let tol = smax / MAX_CONDITION;
    let mut x = DVector::zeros(cols);
    let mut null_cols = Vec::new();
    let mut smin = f64::INFINITY;
    for (i, &s) in sv.iter().enumerate() {
        if s > tol {
            let coef = u.column(i).iter().take(rows).zip(b.iter()).map(|(p, q)| p * q).sum::<f64>() / s;
            x += v.column(i) * coef;
            smin = smin.min(s);
        } else {
            null_cols.push(i);
        }
    }
    let rank = cols - null_cols.len();
    if !null_cols.is_empty() {
        let null = DMatrix::from_fn(cols, null_cols.len(), |r, c| v[(r, null_cols[c])]);
        let mut z = DVector::zeros(null.ncols());
        let mut free = DMatrix::<f64>::identity(null.ncols(), null.ncols());
        let top = grades.iter().copied().max().unwrap_or(0);
        for g in (0..=top).rev() {
            if free.ncols() == 0 {
                break;
            }
            let idx: Vec<usize> = (0..cols).filter(|&i| grades[i] == g).collect();
            if idx.is_empty() {
                continue;
            }
            let ng = DMatrix::from_fn(idx.len(), null.ncols(), |r, c| null[(idx[r], c)]);
            let m = &ng * &free;
            let resid = DVector::from_fn(idx.len(), |r, _| x[idx[r]]) + &ng * &z;
            let (mu, ms, mv) = full_svd(&m);
            let mmax = ms.iter().copied().fold(0.0, f64::max);
            let mtol = 1e-10 * mmax.max(1.0);
            let mut w = DVector::zeros(free.ncols());
            let mut keep = Vec::new();
            for (i, &s) in ms.iter().enumerate() {
                if s > mtol {
                    let coef =
                        mu.column(i).iter().take(idx.len()).zip(resid.iter()).map(|(p, q)| p * q).sum::<f64>() / s;
                    w -= mv.column(i) * coef;
                } else {
                    keep.push(i);
                }
            }
            z += &free * w;
            let k = DMatrix::from_fn(free.ncols(), keep.len(), |r, c| mv[(r, keep[c])]);
            free = &free * k;
        }
        x += &null * z;
    }
    let residual_norm = (b - a * &x).norm();
    Ok(GradedSolution { x, residual_norm, rank, cond: smax / smin })
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the fill-in produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// Add `v` at (i, j); `j` must lie within the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band (kl = {}, ku = {})",
            self.kl,
            self.ku
        );
        let id = self.idx(i, j);
        self.data[id] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// Aᵀ with the sub- and super-diagonal counts swapped.
    pub fn transpose(&self) -> BandMatrix {
        let mut t = BandMatrix::new(self.n, self.ku, self.kl);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                let v = self.data[self.idx(i, j)];
                if v != 0.0 {
                    t.add(j, i, v);
                }
            }
        }
        t
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU with partial (row) pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last {
                let a = self.data[self.idx(i, k)].abs();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            if best <= scale * f64::EPSILON * 1e-3 || best == 0.0 {
                return Err(Error::SingularMatrix(k));
            }
            piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                let row_k = self.idx(k, k);
                let row_i = self.idx(i, k);
                for off in 1..=(jmax - k) {
                    let u = self.data[row_k + off];
                    self.data[row_i + off] -= l * u;
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    /// Solve A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.m.n;
        let (kl, ku) = (self.m.kl, self.m.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.m.data[self.m.idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kl + ku).min(n - 1);
            let row = self.m.idx(k, k);
            let mut s = b[k];
            for off in 1..=(jmax - k) {
                s -= self.m.data[row + off] * b[k + off];
            }
            b[k] = s / self.m.data[row];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn pivoted_qr_reconstructs_matrix() {
        let (rows, ncols) = (6, 40);
        let mut s = 3;
        let a: Vec<f64> = (0..rows * ncols).map(|_| lcg(&mut s)).collect();
        let qr = pivoted_qr(a.clone(), rows, rows).unwrap();
        let q = qr.q();
        let r = qr.r();
        let qr_prod = &q * &r;
        for (k, &orig) in qr.permutation().iter().enumerate() {
            for i in 0..rows {
                assert!((qr_prod[(i, k)] - a[orig * rows + i]).abs() < 1e-12);
            }
        }
        let d = qr.r_diag();
        assert!(d.windows(2).all(|w| w[1] <= w[0]));
        // Q orthogonal
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(rows, rows)).amax() < 1e-13);
    }

    #[test]
    fn first_pivot_is_largest_column() {
        let a = vec![1.0, 0.0, 3.0, 4.0, 0.5, 0.5, 3.0, 4.0];
        let qr = pivoted_qr(a, 2, 1).unwrap();
        // columns 1 and 3 tie at norm 5; lower index wins
        assert_eq!(qr.permutation()[0], 1);
        assert!((qr.r_diag()[0] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let mut s = 11;
        let a = DMatrix::from_fn(12, 4, |_, _| lcg(&mut s));
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let b = &a * &x;
        let sol = lstsq(&a, &b).unwrap();
        assert!((sol.x - x).amax() < 1e-12);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn lstsq_rejects_underdetermined_and_singular() {
        let a = DMatrix::from_element(2, 3, 1.0);
        let b = DVector::zeros(2);
        assert!(matches!(lstsq(&a, &b), Err(Error::InsufficientSamples { .. })));
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = DVector::zeros(3);
        assert!(matches!(lstsq(&a, &b), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn graded_matches_plain_when_full_rank() {
        let mut seed = 11;
        let a = DMatrix::from_fn(7, 4, |_, _| lcg(&mut seed));
        let b = DVector::from_fn(7, |_, _| lcg(&mut seed));
        let plain = lstsq(&a, &b).unwrap();
        let graded = lstsq_graded(&a, &b, &[0, 1, 1, 2]).unwrap();
        assert_eq!(graded.rank, 4);
        assert!((plain.x - graded.x).norm() < 1e-12);
    }

    #[test]
    fn graded_prefers_low_grades() {
        // x0 + x1 = 1 with x1 of higher grade: solution (1, 0)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let s = lstsq_graded(&a, &b, &[0, 1]).unwrap();
        assert_eq!(s.rank, 1);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
        let s = lstsq_graded(&a, &b, &[1, 0]).unwrap();
        assert!(s.x[0].abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_lu_matches_dense_solve() {
        let n = 30;
        let (kl, ku) = (4, 2);
        let mut s = 5;
        let mut band = BandMatrix::new(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal forces real pivoting
                let v = lcg(&mut s) + if i == j { 0.1 } else { 0.0 };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| lcg(&mut s)).collect();
        let expect = dense.lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let ax = band.mul_vec(expect.as_slice());
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        let lu = band.factor().unwrap();
        let mut x = b.clone();
        lu.solve(&mut x);
        for (u, v) in x.iter().zip(expect.iter()) {
            assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn band_lu_detects_singularity() {
        let band = BandMatrix::new(3, 1, 1);
        assert!(matches!(band.factor(), Err(Error::SingularMatrix(0))));
    }
}
