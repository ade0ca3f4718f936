//! Dense least squares by Householder QR.
//!
//! Columns whose remaining norm after orthogonalisation drops below
//! `RANK_TOL` times their original norm are treated as dependent and skipped,
//! so the residual and the projection stay well defined for rank-deficient
//! designs. Coefficients of a rank-deficient system are the minimum-norm
//! solution: the basic solution on the independent columns, projected off
//! the null space spanned by the dependent ones.

use nalgebra::{DMatrix, DVector};

/// Relative column-norm threshold below which a column is considered to lie
/// in the span of the preceding ones.
pub const RANK_TOL: f64 = 1e-9;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "column {j} has wrong length");
            m.col_mut(j).copy_from_slice(c);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &ColMatrix) -> ColMatrix {
        assert_eq!(self.rows, other.rows);
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        ColMatrix {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        }
    }

    /// `self * coeffs`.
    pub fn mul_vec(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                axpy(c, self.col(j), &mut out);
            }
        }
        out
    }

    /// `self^T * x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| dot(self.col(j), x)).collect()
    }

    #[cfg(test)]
    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Reflector `I - beta v v^T` acting on rows `start..`.
#[derive(Debug, Clone)]
struct Householder {
    start: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Householder {
    #[inline]
    fn apply(&self, col: &mut [f64]) {
        apply_reflector(self.start, &self.v, self.beta, col);
    }
}

#[inline]
fn apply_reflector(start: usize, v: &[f64], beta: f64, col: &mut [f64]) {
    let seg = &mut col[start..];
    let d = dot(v, seg);
    if d != 0.0 {
        axpy(-beta * d, v, seg);
    }
}

/// Turns `x` into a Householder vector in place. Returns `(beta, alpha)`
/// where the reflected vector is `alpha * e_1`.
#[inline]
fn make_reflector(x: &mut [f64], norm: f64) -> (f64, f64) {
    let alpha = if x[0] >= 0.0 { -norm } else { norm };
    x[0] -= alpha;
    let vnorm2 = dot(x, x);
    let beta = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
    (beta, alpha)
}

/// Householder QR factorisation with dependent-column skipping.
#[derive(Debug, Clone)]
pub struct QrFactor {
    rows: usize,
    cols: usize,
    reflectors: Vec<Householder>,
    /// Upper part of each column after the transform, length = rank at the
    /// time the column was processed (+1 when the column was accepted).
    r_cols: Vec<Vec<f64>>,
}

impl QrFactor {
    pub fn new(a: &ColMatrix) -> Self {
        let mut work = a.clone();
        let rows = a.rows;
        let mut reflectors: Vec<Householder> = Vec::with_capacity(a.cols.min(rows));
        let mut r_cols = Vec::with_capacity(a.cols);
        for j in 0..a.cols {
            let orig_norm = dot(a.col(j), a.col(j)).sqrt();
            let col = work.col_mut(j);
            for h in &reflectors {
                h.apply(col);
            }
            let r = reflectors.len();
            let tail_norm = if r < rows {
                dot(&col[r..], &col[r..]).sqrt()
            } else {
                0.0
            };
            if orig_norm == 0.0 || tail_norm <= RANK_TOL * orig_norm {
                r_cols.push(col[..r].to_vec());
                continue;
            }
            let (beta, alpha) = make_reflector(&mut col[r..], tail_norm);
            let v = col[r..].to_vec();
            let mut top = col[..r].to_vec();
            top.push(alpha);
            r_cols.push(top);
            reflectors.push(Householder { start: r, v, beta });
        }
        Self {
            rows,
            cols: a.cols,
            reflectors,
            r_cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.reflectors.len()
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank() < self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Applies `Q^T` in place.
    pub fn apply_qt(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        for h in &self.reflectors {
            h.apply(x);
        }
    }

    /// Energy of the component of `x` orthogonal to the column span.
    pub fn residual_energy(&self, x: &[f64]) -> f64 {
        let mut qtx = x.to_vec();
        self.apply_qt(&mut qtx);
        let r = self.rank();
        dot(&qtx[r..], &qtx[r..])
    }

    /// Indices of the columns that were kept as independent, in order.
    fn independent_columns(&self) -> Vec<usize> {
        let mut kept = Vec::with_capacity(self.rank());
        for (j, r) in self.r_cols.iter().enumerate() {
            if r.len() > kept.len() {
                kept.push(j);
            }
        }
        kept
    }

    /// Solves the leading `len x len` block of the triangular factor
    /// restricted to the independent columns.
    fn solve_triangular(&self, kept: &[usize], rhs: &[f64]) -> Vec<f64> {
        let len = rhs.len();
        let mut z = vec![0.0; len];
        for p in (0..len).rev() {
            let mut s = rhs[p];
            for q in p + 1..len {
                s -= self.r_cols[kept[q]][p] * z[q];
            }
            z[p] = s / self.r_cols[kept[p]][p];
        }
        z
    }

    /// Minimum-norm least-squares coefficients for `qtx = Q^T x`.
    fn coefficients(&self, qtx: &[f64]) -> Vec<f64> {
        let kept = self.independent_columns();
        let r = kept.len();
        let mut basic = vec![0.0; self.cols];
        for (&j, z) in kept.iter().zip(self.solve_triangular(&kept, &qtx[..r])) {
            basic[j] = z;
        }
        if r == self.cols {
            return basic;
        }
        // Null-space basis: each dependent column minus its expansion in the
        // independent columns preceding it.
        let null: Vec<Vec<f64>> = (0..self.cols)
            .filter(|j| !kept.contains(j))
            .map(|j| {
                let coords = &self.r_cols[j];
                let mut v = vec![0.0; self.cols];
                v[j] = 1.0;
                for (&s, c) in kept.iter().zip(self.solve_triangular(&kept, coords)) {
                    v[s] = -c;
                }
                v
            })
            .collect();
        // Gram matrix I + C^T C is well conditioned, so normal equations are safe.
        let k = null.len();
        let gram = DMatrix::from_fn(k, k, |a, b| dot(&null[a], &null[b]));
        let rhs = DVector::from_fn(k, |a, _| dot(&null[a], &basic));
        let w = gram
            .cholesky()
            .expect("null-space Gram matrix is positive definite")
            .solve(&rhs);
        for (v, &wi) in null.iter().zip(w.iter()) {
            axpy(-wi, v, &mut basic);
        }
        basic
    }

    /// Residual energy of the least-squares fit of `x` on `[A | extra]`,
    /// where `A` is the factored matrix and `qtx = Q^T x` was precomputed.
    /// `extra` is overwritten; `scratch` is reused between calls.
    pub fn extended_residual_energy(
        &self,
        qtx: &[f64],
        extra: &mut ColMatrix,
        scratch: &mut Vec<f64>,
    ) -> ExtendedResidual {
        assert_eq!(extra.rows, self.rows);
        assert_eq!(qtx.len(), self.rows);
        scratch.clear();
        scratch.extend_from_slice(qtx);
        let rows = self.rows;
        let mut orig_norms = Vec::with_capacity(extra.cols);
        for j in 0..extra.cols {
            let col = extra.col_mut(j);
            orig_norms.push(dot(col, col).sqrt());
            for h in &self.reflectors {
                h.apply(col);
            }
        }
        let mut r = self.rank();
        let mut dependent = 0;
        for (j, &orig_norm) in orig_norms.iter().enumerate() {
            let col = extra.col_mut(j);
            let tail_norm = if r < rows {
                dot(&col[r..], &col[r..]).sqrt()
            } else {
                0.0
            };
            if orig_norm == 0.0 || tail_norm <= RANK_TOL * orig_norm {
                dependent += 1;
                continue;
            }
            let (beta, _) = make_reflector(&mut col[r..], tail_norm);
            let (done, rest) = extra.data.split_at_mut((j + 1) * rows);
            let v = &done[j * rows + r..(j + 1) * rows];
            apply_reflector(r, v, beta, scratch);
            for later in rest.chunks_exact_mut(rows) {
                apply_reflector(r, v, beta, later);
            }
            r += 1;
        }
        ExtendedResidual {
            energy: dot(&scratch[r..], &scratch[r..]),
            rank: r,
            dependent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedResidual {
    pub energy: f64,
    pub rank: usize,
    pub dependent: usize,
}

/// Least-squares solution with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub coeffs: Vec<f64>,
    /// `||x - A coeffs||^2`, computed directly from the residual.
    pub residual_energy: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Minimum-norm least-squares solution of `a * coeffs ~ x`.
pub fn solve(a: &ColMatrix, x: &[f64]) -> LsSolution {
    assert_eq!(a.rows, x.len());
    let qr = QrFactor::new(a);
    let mut qtx = x.to_vec();
    qr.apply_qt(&mut qtx);
    let coeffs = qr.coefficients(&qtx);
    let fitted = a.mul_vec(&coeffs);
    let residual_energy = x
        .iter()
        .zip(&fitted)
        .map(|(xi, fi)| (xi - fi) * (xi - fi))
        .sum();
    LsSolution {
        coeffs,
        residual_energy,
        rank: qr.rank(),
        rank_deficient: qr.is_rank_deficient(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_matrix(rows: usize, cols: usize, seed: &mut u64) -> ColMatrix {
        let cols: Vec<Vec<f64>> = (0..cols)
            .map(|_| (0..rows).map(|_| lcg(seed)).collect())
            .collect();
        ColMatrix::from_columns(rows, &cols)
    }

    /// Normal-equations oracle via nalgebra's LU.
    fn normal_equations(a: &ColMatrix, x: &[f64]) -> Vec<f64> {
        let m = a.to_nalgebra();
        let g = m.transpose() * &m;
        let rhs = m.transpose() * DVector::from_column_slice(x);
        g.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    #[test]
    fn matches_normal_equations_on_well_conditioned_system() {
        let mut seed = 1;
        let a = random_matrix(60, 7, &mut seed);
        let x: Vec<f64> = (0..60).map(|_| lcg(&mut seed)).collect();
        let sol = solve(&a, &x);
        let oracle = normal_equations(&a, &x);
        for (c, o) in sol.coeffs.iter().zip(&oracle) {
            assert!((c - o).abs() < 1e-10, "{c} vs {o}");
        }
        assert!(!sol.rank_deficient);
        let qr = QrFactor::new(&a);
        assert!((qr.residual_energy(&x) - sol.residual_energy).abs() < 1e-10);
    }

    #[test]
    fn zero_rhs_gives_zero_coeffs() {
        let mut seed = 2;
        let a = random_matrix(20, 4, &mut seed);
        let sol = solve(&a, &[0.0; 20]);
        assert!(sol.coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(sol.residual_energy, 0.0);
    }

    #[test]
    fn duplicate_column_is_min_norm() {
        let mut seed = 3;
        let base = random_matrix(30, 2, &mut seed);
        let dup = ColMatrix::from_columns(
            30,
            &[base.col(0).to_vec(), base.col(1).to_vec(), base.col(0).to_vec()],
        );
        let x = base.mul_vec(&[2.0, -1.0]);
        let sol = solve(&dup, &x);
        assert!(sol.rank_deficient);
        assert_eq!(sol.rank, 2);
        // Minimum-norm splits the duplicated weight evenly.
        assert!((sol.coeffs[0] - 1.0).abs() < 1e-9);
        assert!((sol.coeffs[2] - 1.0).abs() < 1e-9);
        assert!((sol.coeffs[1] + 1.0).abs() < 1e-9);
        assert!(sol.residual_energy < 1e-20);
    }

    #[test]
    fn extended_matches_full_factorisation() {
        let mut seed = 4;
        let a = random_matrix(50, 5, &mut seed);
        let b = random_matrix(50, 3, &mut seed);
        let x: Vec<f64> = (0..50).map(|_| lcg(&mut seed)).collect();
        let full = QrFactor::new(&a.hcat(&b)).residual_energy(&x);
        let base = QrFactor::new(&a);
        let mut qtx = x.clone();
        base.apply_qt(&mut qtx);
        let mut extra = b.clone();
        let mut scratch = Vec::new();
        let ext = base.extended_residual_energy(&qtx, &mut extra, &mut scratch);
        assert!((ext.energy - full).abs() < 1e-12 * full.max(1.0));
        assert_eq!(ext.rank, 8);
        assert_eq!(ext.dependent, 0);
    }

    #[test]
    fn extended_detects_dependent_extra_column() {
        let mut seed = 5;
        let a = random_matrix(40, 4, &mut seed);
        let b = ColMatrix::from_columns(40, &[a.col(2).to_vec()]);
        let base = QrFactor::new(&a);
        let x: Vec<f64> = (0..40).map(|_| lcg(&mut seed)).collect();
        let mut qtx = x.clone();
        base.apply_qt(&mut qtx);
        let mut extra = b;
        let ext = base.extended_residual_energy(&qtx, &mut extra, &mut Vec::new());
        assert_eq!(ext.dependent, 1);
        assert!((ext.energy - base.residual_energy(&x)).abs() < 1e-12);
    }

    #[test]
    fn min_norm_with_combination_columns() {
        let mut seed = 11;
        let base = random_matrix(200, 6, &mut seed);
        let x: Vec<f64> = (0..200).map(|_| lcg(&mut seed)).collect();
        // Extra columns: a duplicate of column 2 and 0.5 * col0 - 2 * col4.
        let dup = base.col(2).to_vec();
        let comb: Vec<f64> = (0..200).map(|i| 0.5 * base.get(i, 0) - 2.0 * base.get(i, 4)).collect();
        let a = base.hcat(&ColMatrix::from_columns(200, &[dup, comb]));
        let sol = solve(&a, &x);
        assert_eq!(sol.rank, 6);
        assert!(sol.rank_deficient);
        let reduced = solve(&base, &x);
        assert!((sol.residual_energy - reduced.residual_energy).abs() < 1e-10 * reduced.residual_energy);
        // Orthogonal to both null vectors.
        let c = &sol.coeffs;
        assert!((c[2] - c[6]).abs() < 1e-10);
        let null2 = [0.5, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, -1.0];
        let null1 = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0];
        for v in [null1, null2] {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            assert!(d.abs() < 1e-10, "{d}");
        }
        let fitted_a = a.mul_vec(c);
        let fitted_b = base.mul_vec(&reduced.coeffs);
        for (p, q) in fitted_a.iter().zip(&fitted_b) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}