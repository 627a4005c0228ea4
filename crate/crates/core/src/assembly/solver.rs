//! Sparse direct solves with equilibration and iterative refinement.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Result, VemError};

/// Relative residual every solve has to reach.
pub const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 4;
const EQUILIBRATION_SWEEPS: usize = 6;

/// Square sparse matrix in compressed-column form.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseMatrix {
    /// Sum duplicate entries of `(row, col, value)` triplets.
    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, f64)]) -> Result<Self> {
        if nrows != ncols {
            return Err(VemError::InvalidArgument(format!("{nrows} x {ncols} is not square")));
        }
        let n = nrows;
        if let Some(&(i, j, _)) = trips.iter().find(|&&(i, j, _)| i >= n || j >= n) {
            return Err(VemError::InvalidArgument(format!("entry ({i}, {j}) outside {n} x {n}")));
        }
        let mut count = vec![0usize; n + 1];
        for &(_, j, _) in trips {
            count[j + 1] += 1;
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let mut slot = count.clone();
        let mut rows = vec![0usize; trips.len()];
        let mut vals = vec![0.0; trips.len()];
        for &(i, j, v) in trips {
            rows[slot[j]] = i;
            vals[slot[j]] = v;
            slot[j] += 1;
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(trips.len());
        let mut val = Vec::with_capacity(trips.len());
        col_ptr.push(0);
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            buf.clear();
            buf.extend((count[j]..count[j + 1]).map(|p| (rows[p], vals[p])));
            buf.sort_unstable_by_key(|e| e.0);
            for &(i, v) in &buf {
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == i {
                    *val.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    val.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self { n, col_ptr, row_idx, val })
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    /// Entries `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], j, self.val[p]))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    y[self.row_idx[p]] += self.val[p] * xj;
                }
            }
        }
        y
    }

    /// `b - A x` with compensated products and sums, so that iterative
    /// refinement is not limited by rounding in the residual itself.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut hi = b.to_vec();
        let mut lo = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let prod = -self.val[p] * xj;
                let prod_err = (-self.val[p]).mul_add(xj, -prod);
                let sum = hi[i] + prod;
                let bv = sum - hi[i];
                let sum_err = (hi[i] - (sum - bv)) + (prod - bv);
                hi[i] = sum;
                lo[i] += sum_err + prod_err;
            }
        }
        hi.iter().zip(&lo).map(|(h, l)| h + l).collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            m[(i, j)] += v;
        }
        m
    }
}

fn to_faer(n: usize, entries: impl Iterator<Item = (usize, usize, f64)>) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = entries.map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(n, n, &t)
        .map_err(|e| VemError::InvalidArgument(format!("sparse matrix construction: {e:?}")))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest `|a_ij - a_ji|`.
fn asymmetry(m: &SparseMatrix) -> f64 {
    let mut lower: Vec<(usize, usize, f64)> = Vec::new();
    let mut upper: Vec<(usize, usize, f64)> = Vec::new();
    for (i, j, v) in m.entries() {
        match i.cmp(&j) {
            std::cmp::Ordering::Greater => lower.push((i, j, v)),
            std::cmp::Ordering::Less => upper.push((j, i, v)),
            std::cmp::Ordering::Equal => {}
        }
    }
    lower.sort_unstable_by_key(|e| (e.0, e.1));
    upper.sort_unstable_by_key(|e| (e.0, e.1));
    let (mut a, mut b, mut worst) = (0, 0, 0.0f64);
    while a < lower.len() || b < upper.len() {
        let ka = lower.get(a).map(|e| (e.0, e.1));
        let kb = upper.get(b).map(|e| (e.0, e.1));
        if ka.is_some() && (kb.is_none() || ka < kb) {
            worst = worst.max(lower[a].2.abs());
            a += 1;
        } else if kb.is_some() && (ka.is_none() || kb < ka) {
            worst = worst.max(upper[b].2.abs());
            b += 1;
        } else {
            worst = worst.max((lower[a].2 - upper[b].2).abs());
            a += 1;
            b += 1;
        }
    }
    worst
}

enum Backend {
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Ldlt { symbolic: SymbolicCholesky<usize>, values: Vec<f64> },
}

/// Factorised matrix; solves refine against the unscaled matrix.
pub struct LinearSolver {
    matrix: SparseMatrix,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    backend: Backend,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.backend {
            Backend::Lu(_) => "lu",
            Backend::Ldlt { .. } => "ldlt",
        };
        f.debug_struct("LinearSolver")
            .field("n", &self.matrix.n)
            .field("nnz", &self.matrix.nnz())
            .field("backend", &kind)
            .finish()
    }
}

/// Row and column max-norm equilibration. Symmetric matrices get equal
/// row and column factors.
fn equilibrate(matrix: &SparseMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = matrix.n;
    let mut row_scale = vec![1.0; n];
    let mut col_scale = vec![1.0; n];
    for _ in 0..EQUILIBRATION_SWEEPS {
        let mut rmax = vec![0.0f64; n];
        let mut cmax = vec![0.0f64; n];
        for (i, j, v) in matrix.entries() {
            let a = (v * row_scale[i] * col_scale[j]).abs();
            rmax[i] = rmax[i].max(a);
            cmax[j] = cmax[j].max(a);
        }
        for i in 0..n {
            if rmax[i] == 0.0 || cmax[i] == 0.0 {
                return Err(VemError::Singular(format!(
                    "unknown {i} has an empty {} (suspected missing Dirichlet data)",
                    if rmax[i] == 0.0 { "row" } else { "column" }
                )));
            }
            row_scale[i] /= rmax[i].sqrt();
            col_scale[i] /= cmax[i].sqrt();
        }
    }
    Ok((row_scale, col_scale))
}

impl LinearSolver {
    /// Equilibrate and factorise with pivoted sparse `LU`.
    pub fn factorize(matrix: SparseMatrix) -> Result<Self> {
        let (row_scale, col_scale) = equilibrate(&matrix)?;
        let scaled = to_faer(matrix.n, matrix.entries().map(|(i, j, v)| (i, j, v * row_scale[i] * col_scale[j])))?;
        let lu = scaled
            .sp_lu()
            .map_err(|e| VemError::Singular(format!("{e:?} (suspected missing Dirichlet data)")))?;
        Ok(Self { matrix, row_scale, col_scale, backend: Backend::Lu(lu) })
    }

    /// Equilibrate and factorise a symmetric quasi-definite matrix with
    /// sparse `LDL^T` in a minimum-degree ordering, without pivoting.
    pub fn factorize_symmetric(matrix: SparseMatrix) -> Result<Self> {
        let scale = matrix.entries().fold(0.0f64, |m, e| m.max(e.2.abs()));
        let skew = asymmetry(&matrix);
        if skew > 1e-12 * scale {
            return Err(VemError::InvalidArgument(format!(
                "matrix is not symmetric (|A - A^T| = {skew:.3e}, |A| = {scale:.3e})"
            )));
        }
        let (row_scale, _) = equilibrate(&matrix)?;
        let col_scale = row_scale.clone();
        let d = &row_scale;
        let lower = to_faer(matrix.n, matrix.entries().filter(|e| e.0 >= e.1).map(|(i, j, v)| (i, j, v * d[i] * d[j])))?;
        let symbolic = factorize_symbolic_cholesky(
            lower.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| VemError::Singular(format!("symbolic factorisation: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let par = Par::Seq;
        let mut mem = MemBuffer::try_new(symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default()))
            .map_err(|_| VemError::Singular("out of memory in factorisation".into()))?;
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                lower.as_ref(),
                Side::Lower,
                LdltRegularization::default(),
                par,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| VemError::Singular(format!("{e:?} (suspected missing Dirichlet data)")))?;
        Ok(Self { matrix, row_scale, col_scale, backend: Backend::Ldlt { symbolic, values } })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut rhs = Mat::from_fn(n, 1, |i, _| b[i] * self.row_scale[i]);
        match &self.backend {
            Backend::Lu(lu) => rhs = lu.solve(&rhs),
            Backend::Ldlt { symbolic, values } => {
                let par = Par::Seq;
                let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, par));
                LdltRef::new(symbolic, values).solve_in_place_with_conj(
                    Conj::No,
                    rhs.as_mut(),
                    par,
                    MemStack::new(&mut mem),
                );
            }
        }
        (0..n).map(|i| rhs[(i, 0)] * self.col_scale[i]).collect()
    }

    /// Solve `A x = b`; returns `x` and the relative residual
    /// `|A x - b| / |b|` (zero when `b = 0`).
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        let nb = norm(b);
        if nb == 0.0 {
            return Ok((vec![0.0; b.len()], 0.0));
        }
        let mut x = self.raw_solve(b);
        let mut best = (x.clone(), f64::INFINITY);
        for _ in 0..=REFINEMENT_STEPS {
            let r = self.matrix.residual(b, &x);
            let rel = norm(&r) / nb;
            if !rel.is_finite() {
                return Err(VemError::Singular(
                    "factorisation produced non-finite values (suspected missing Dirichlet data)".into(),
                ));
            }
            if rel >= best.1 {
                break;
            }
            best = (x.clone(), rel);
            if rel <= 1e-3 * RESIDUAL_TOL {
                break;
            }
            let dx = self.raw_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        }
        let (x, res) = best;
        if !(res <= RESIDUAL_TOL) {
            return Err(VemError::Singular(format!(
                "relative residual {res:.3e} above {RESIDUAL_TOL:e} after refinement"
            )));
        }
        Ok((x, res))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let trips = vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 2.0), (1, 1, 1e-6), (2, 2, 1e8), (2, 0, 1.0), (0, 0, 1.0)];
        let m = SparseMatrix::from_triplets(3, 3, &trips).unwrap();
        assert_eq!(m.nnz(), 6);
        let x_true = [1.0, -2.0, 3e-8];
        let b = m.mul_vec(&x_true);
        let s = LinearSolver::factorize(m).unwrap();
        let (x, res) = s.solve(&b).unwrap();
        assert!(res < 1e-14);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1e-8));
        }
        assert_eq!(s.solve(&[0.0; 3]).unwrap().0, vec![0.0; 3]);
    }

    #[test]
    fn symmetric_quasi_definite_system() {
        // [[A, B^T], [B, -C]] with A, C positive definite
        let trips = vec![
            (0, 0, 4.0),
            (1, 1, 3.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
            (2, 0, 2.0),
            (0, 2, 2.0),
            (2, 1, -1.0),
            (1, 2, -1.0),
            (2, 2, -1e-6),
        ];
        let m = SparseMatrix::from_triplets(3, 3, &trips).unwrap();
        let x_true = [0.5, -1.0, 2.0];
        let b = m.mul_vec(&x_true);
        let s = LinearSolver::factorize_symmetric(m).unwrap();
        let (x, res) = s.solve(&b).unwrap();
        assert!(res < 1e-14);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
        let skew = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(LinearSolver::factorize_symmetric(skew), Err(VemError::InvalidArgument(_))));
    }

    #[test]
    fn singular_matrix_is_reported() {
        let trips = vec![(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (2, 2, 1.0)];
        let m = SparseMatrix::from_triplets(3, 3, &trips).unwrap();
        let r = LinearSolver::factorize(m).and_then(|s| s.solve(&[1.0, 0.0, 0.0]).map(|_| ()));
        assert!(matches!(r, Err(VemError::Singular(_))));
        let empty = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(LinearSolver::factorize(empty), Err(VemError::Singular(_))));
    }
}
