//! Sparse LU with partial pivoting, backed by faer.
//!
//! Column preordering is COLAMD. The symbolic phase depends only on the
//! sparsity pattern, so a [`SymbolicAnalysis`] is computed once per pattern
//! and reused for every numeric factorization with that pattern. Whether the
//! numeric phase runs supernodal or simplicial is left to faer's flop-ratio
//! heuristic.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::prelude::*;
use faer::sparse::linalg::lu::{self, simplicial, LuRef, NumericLu, SymbolicLu};
use faer::sparse::linalg::{colamd, LuError};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Par};
use rayon::prelude::*;

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

/// Pattern-only part of a factorization: CSC image of the pattern plus the
/// column ordering and elimination structure.
#[derive(Debug)]
pub struct SymbolicAnalysis {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// `csc_values[k] = csr_values[gather[k]]`
    gather: Vec<usize>,
    lu: SymbolicLu<usize>,
}

impl SymbolicAnalysis {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::invalid(format!("cannot factorize a {}x{} matrix", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let at = CsrMatrix::new(n, n, a.row_offsets().to_vec(), a.col_indices().to_vec(), (0..a.nnz()).map(|k| k as f64).collect())?
            .transpose();
        let gather = at.values().iter().map(|&k| k as usize).collect();
        let col_ptr = at.row_offsets().to_vec();
        let row_idx = at.col_indices().to_vec();
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let lu = lu::factorize_symbolic_lu(pattern, Default::default())
            .map_err(|e| Error::invalid(format!("symbolic analysis failed: {e:?}")))?;
        Ok(Self {
            n,
            row_offsets: a.row_offsets().to_vec(),
            col_indices: a.col_indices().to_vec(),
            col_ptr,
            row_idx,
            gather,
            lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matches(&self, a: &CsrMatrix) -> bool {
        a.nrows() == self.n
            && a.ncols() == self.n
            && a.row_offsets() == self.row_offsets.as_slice()
            && a.col_indices() == self.col_indices.as_slice()
    }

    fn csc_values(&self, a: &CsrMatrix) -> Vec<f64> {
        let v = a.values();
        self.gather.iter().map(|&k| v[k]).collect()
    }

    fn csc<'a>(&'a self, values: &'a [f64]) -> SparseColMatRef<'a, usize, f64> {
        let pattern = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        SparseColMatRef::new(pattern, values)
    }
}

/// Numeric LU factors of one matrix. Immutable once built; solves may run
/// concurrently.
#[derive(Debug)]
pub struct Factorization {
    symbolic: Arc<SymbolicAnalysis>,
    numeric: NumericLu<usize, f64>,
}

impl Factorization {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::with_symbolic(Arc::new(SymbolicAnalysis::new(a)?), a)
    }

    /// Numeric factorization reusing a symbolic analysis of the same pattern.
    pub fn with_symbolic(symbolic: Arc<SymbolicAnalysis>, a: &CsrMatrix) -> Result<Self> {
        if !symbolic.matches(a) {
            return Err(Error::invalid("matrix pattern differs from the symbolic analysis"));
        }
        let values = symbolic.csc_values(a);
        let mut numeric = NumericLu::new();
        {
            let req = symbolic.lu.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default());
            let mut buf = MemBuffer::new(req);
            let result = symbolic.lu.factorize_numeric_lu(
                &mut numeric,
                symbolic.csc(&values),
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            );
            match result {
                Ok(_) => {}
                Err(LuError::SymbolicSingular { index }) => {
                    return Err(Error::SingularMatrix { pivot: symbolic.lu.col_perm().arrays().0[index] })
                }
                Err(LuError::Generic(e)) => return Err(Error::invalid(format!("factorization failed: {e:?}"))),
            }
        }
        let fact = Self { symbolic, numeric };
        // A zero pivot shows up as non-finite output. Probe with a right-hand
        // side that has a known bounded solution.
        let ones = vec![1.0; a.nrows()];
        let x = fact.solve(&a.mul_vec(&ones))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { pivot: locate_zero_pivot(a).unwrap_or(0) });
        }
        Ok(fact)
    }

    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    pub fn symbolic(&self) -> &Arc<SymbolicAnalysis> {
        &self.symbolic
    }

    fn lu(&self) -> LuRef<'_, usize, f64> {
        // The numeric part was produced from this symbolic analysis.
        LuRef::new_unchecked(&self.symbolic.lu, &self.numeric)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!("rhs has length {}, expected {}", x.len(), self.dim())));
        }
        let req = self.symbolic.lu.solve_in_place_scratch::<f64>(1, Par::Seq);
        let mut buf = MemBuffer::new(req);
        let n = x.len();
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        self.lu().solve_in_place_with_conj(Conj::No, rhs, Par::Seq, MemStack::new(&mut buf));
        Ok(())
    }

    /// Each column is solved exactly as [`Factorization::solve`] would, so the
    /// results are bitwise identical to separate solves. Columns run in
    /// parallel.
    pub fn solve_multi(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some(b) = rhs.iter().find(|b| b.len() != self.dim()) {
            return Err(Error::invalid(format!("rhs has length {}, expected {}", b.len(), self.dim())));
        }
        rhs.par_iter().map(|b| self.solve(b)).collect()
    }
}

/// Explicit permuted factors `P_r A P_c = L U` from a simplicial factorization
/// with the same COLAMD ordering. Meant for small matrices and diagnostics.
#[derive(Clone, Debug)]
pub struct ExplicitLu {
    /// Row `k` of `P_r A` is row `row_perm[k]` of `A`.
    pub row_perm: Vec<usize>,
    /// Column `k` of `A P_c` is column `col_perm[k]` of `A`.
    pub col_perm: Vec<usize>,
    /// Unit lower triangular.
    pub l: CsrMatrix,
    pub u: CsrMatrix,
}

impl ExplicitLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let sym = SymbolicAnalysis::new(a)?;
        let n = sym.n;
        let values = sym.csc_values(a);
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, &sym.col_ptr, None, &sym.row_idx);
        let mut col_perm = vec![0usize; n];
        let mut col_perm_inv = vec![0usize; n];
        {
            let req = colamd::order_scratch::<usize>(n, n, sym.row_idx.len());
            let mut buf = MemBuffer::new(req);
            colamd::order(&mut col_perm, &mut col_perm_inv, pattern, Default::default(), MemStack::new(&mut buf))
                .map_err(|e| Error::invalid(format!("column ordering failed: {e:?}")))?;
        }
        let mut row_perm = vec![0usize; n];
        let mut row_perm_inv = vec![0usize; n];
        let mut lu = simplicial::SimplicialLu::<usize, f64>::new();
        {
            let req = StackReq::all_of(&[simplicial::factorize_simplicial_numeric_lu_scratch::<usize, f64>(n, n)]);
            let mut buf = MemBuffer::new(req);
            let cperm = unsafe { faer::perm::PermRef::new_unchecked(&col_perm, &col_perm_inv, n) };
            match simplicial::factorize_simplicial_numeric_lu(
                &mut row_perm,
                &mut row_perm_inv,
                &mut lu,
                SparseColMatRef::new(pattern, &values),
                cperm,
                MemStack::new(&mut buf),
            ) {
                Ok(()) => {}
                Err(LuError::SymbolicSingular { index }) => return Err(Error::SingularMatrix { pivot: col_perm[index] }),
                Err(LuError::Generic(e)) => return Err(Error::invalid(format!("factorization failed: {e:?}"))),
            }
        }
        let to_csr = |m: SparseColMatRef<'_, usize, f64>| -> Result<CsrMatrix> {
            let mut triplets = Vec::new();
            for j in 0..n {
                for (&i, &v) in m.row_idx_of_col_raw(j).iter().zip(m.val_of_col(j)) {
                    triplets.push((i, j, v));
                }
            }
            CsrMatrix::from_triplets(n, n, &triplets)
        };
        Ok(Self { row_perm, col_perm, l: to_csr(lu.l_factor_unsorted())?, u: to_csr(lu.u_factor_unsorted())? })
    }

    /// First elimination step with an exactly zero pivot, reported as the
    /// original column index.
    pub fn first_zero_pivot(&self) -> Option<usize> {
        (0..self.u.nrows()).find(|&k| self.u.get(k, k) == 0.0).map(|k| self.col_perm[k])
    }
}

fn locate_zero_pivot(a: &CsrMatrix) -> Option<usize> {
    match ExplicitLu::new(a) {
        Ok(f) => f.first_zero_pivot(),
        Err(Error::SingularMatrix { pivot }) => Some(pivot),
        Err(_) => None,
    }
}

/// Convenience single-shot dense-free solve.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Factorization::new(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_to_csr(a: &[Vec<f64>]) -> CsrMatrix {
        let n = a.len();
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    /// Gaussian elimination with partial pivoting on a dense copy.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &bi)| r.iter().copied().chain([bi]).collect()).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..=n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
            x[k] = (m[k][n] - s) / m[k][k];
        }
        x
    }

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn random_matrix(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + rng.random::<f64>()));
            for _ in 0..4 {
                let j = rng.random_range(0..n);
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_returns_rhs() {
        let f = Factorization::new(&CsrMatrix::identity(5)).unwrap();
        let b = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(f.solve(&b).unwrap(), b);
        let e = ExplicitLu::new(&CsrMatrix::identity(5)).unwrap();
        assert_eq!(e.l, CsrMatrix::identity(5));
        assert_eq!(e.u, CsrMatrix::identity(5));
    }

    #[test]
    fn two_by_two() {
        let a = dense_to_csr(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let x = solve(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tridiagonal_matches_dense_elimination() {
        let a = tridiag(10);
        let b = vec![1.0; 10];
        let x = solve(&a, &b).unwrap();
        let oracle = dense_solve(&a.to_dense(), &b);
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_solve_is_linear() {
        let f = Factorization::new(&tridiag(10)).unwrap();
        let b1: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let b2: Vec<f64> = b1.iter().map(|v| 2.0 * v).collect();
        let xs = f.solve_multi(&[b1, b2]).unwrap();
        for (a, b) in xs[0].iter().zip(&xs[1]) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_residuals() {
        let a = random_matrix(50, 7);
        let f = Factorization::new(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhs: Vec<Vec<f64>> = (0..4).map(|_| (0..50).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let xs = f.solve_multi(&rhs).unwrap();
        for (x, b) in xs.iter().zip(&rhs) {
            let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(p, q)| p - q).collect();
            assert!(norm(&r) / norm(b) < 1e-10);
            assert!(norm(&r) / (a.norm_inf() * norm(x) + norm(b)) < 1e-10);
        }
    }

    #[test]
    fn multi_solve_is_bitwise_identical_to_single_solves() {
        let a = random_matrix(300, 3);
        let f = Factorization::new(&a).unwrap();
        let rhs: Vec<Vec<f64>> = (0..6).map(|j| (0..300).map(|i| ((i * 7 + j * 13) % 17) as f64 - 8.0).collect()).collect();
        let multi = f.solve_multi(&rhs).unwrap();
        for (x, b) in multi.iter().zip(&rhs) {
            let single = f.solve(b).unwrap();
            assert!(x.iter().zip(&single).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let f = Factorization::new(&tridiag(4)).unwrap();
        assert!(matches!(f.solve_multi(&[vec![1.0; 4], vec![1.0; 3]]), Err(Error::InvalidArgument(_))));
        assert!(matches!(f.solve(&[1.0; 5]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn non_square_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(Factorization::new(&a).is_err());
    }

    #[test]
    fn exactly_singular_matrix_reports_pivot() {
        let a = dense_to_csr(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        match Factorization::new(&a) {
            Err(Error::SingularMatrix { pivot }) => assert!(pivot < 2),
            other => panic!("expected singular error, got {other:?}"),
        }
        // Column 2 is the sum of columns 0 and 1.
        let b = dense_to_csr(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![2.0, 3.0, 5.0]]);
        assert!(matches!(Factorization::new(&b), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn structurally_singular_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0), (0, 1, 1.0), (1, 1, 2.0)]).unwrap();
        assert!(matches!(Factorization::new(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn symbolic_reuse_requires_same_pattern() {
        let a = tridiag(6);
        let sym = Arc::new(SymbolicAnalysis::new(&a).unwrap());
        let mut b = a.clone();
        b.scale(3.0);
        let x = Factorization::with_symbolic(sym.clone(), &b).unwrap().solve(&b.mul_vec(&[1.0; 6])).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-13));
        assert!(Factorization::with_symbolic(sym, &CsrMatrix::identity(6)).is_err());
    }

    #[test]
    fn explicit_factors_reconstruct_the_matrix() {
        for (n, seed) in [(20, 1), (120, 2), (200, 3)] {
            let a = random_matrix(n, seed);
            let f = ExplicitLu::new(&a).unwrap();
            let l = f.l.to_dense();
            let u = f.u.to_dense();
            let ad = a.to_dense();
            let scale = a.norm_inf();
            for i in 0..n {
                assert_eq!(l[i][i], 1.0);
                for j in 0..n {
                    assert!(j <= i || l[i][j] == 0.0);
                    assert!(j >= i || u[i][j] == 0.0);
                    let lu: f64 = (0..n).map(|k| l[i][k] * u[k][j]).sum();
                    let pap = ad[f.row_perm[i]][f.col_perm[j]];
                    assert!((lu - pap).abs() < 1e-10 * scale, "({i},{j}) {lu} vs {pap}");
                }
            }
        }
    }
}
