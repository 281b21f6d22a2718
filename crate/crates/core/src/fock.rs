//! Truncated two-mode Fock space and dense operator algebra.
//!
//! Basis states `|m, n>` carry `m` photons in the clockwise (CW) and `n` in
//! the counter-clockwise (CCW) whispering-gallery mode, each capped at
//! `n_max`. Ordering is m-major: `index = m * (n_max + 1) + n`, so the CW
//! occupation is the slow index and single-mode operators embed as Kronecker
//! factors (`a_cw = a (x) I`, `a_ccw = I (x) a`).
//!
//! Truncation breaks the canonical commutator on the top rung only:
//! `<m,n|[a, a+]|m,n> = 1` for `m < n_max` but `-n_max` at `m = n_max`.
//! Results are physical only while the occupied levels sit well below the
//! cap; the engine layer exposes a cutoff-convergence check for exactly that
//! reason.

use ndarray::Array2;
use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Propagation direction of a whispering-gallery mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Clockwise (driven) mode; the slow basis index.
    Cw,
    /// Counter-clockwise mode populated by backscattering.
    Ccw,
}

/// Two-mode number basis truncated at `n_max` photons per mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TwoModeBasis {
    n_max: usize,
}

impl TwoModeBasis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter(
                "n_max must be at least 1".into(),
            ));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of single-mode levels, `n_max + 1`.
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    /// Hilbert-space dimension `(n_max + 1)^2`.
    pub fn dim(&self) -> usize {
        self.levels() * self.levels()
    }

    /// Flat index of `|m, n>`; m-major.
    pub fn index_of(&self, m: usize, n: usize) -> Result<usize> {
        if m > self.n_max || n > self.n_max {
            return Err(Error::IndexOutOfRange { m, n, n_max: self.n_max });
        }
        Ok(m * self.levels() + n)
    }

    /// Occupations `(m, n)` of flat index `k`.
    pub fn state_of(&self, k: usize) -> Result<(usize, usize)> {
        if k >= self.dim() {
            return Err(Error::IndexOutOfRange {
                m: k / self.levels(),
                n: k % self.levels(),
                n_max: self.n_max,
            });
        }
        Ok((k / self.levels(), k % self.levels()))
    }

    /// All `(m, n)` pairs in basis order.
    pub fn states(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let l = self.levels();
        (0..self.dim()).map(move |k| (k / l, k % l))
    }
}

/// Dense complex operator over a [`TwoModeBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: Array2<Complex64>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { entries: Array2::zeros((dim, dim)) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: Array2::eye(dim) }
    }

    /// Wraps a square matrix. Rejects non-square input.
    pub fn from_entries(entries: Array2<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    /// Single-mode lowering matrix on `levels` rungs: `<k-1|a|k> = sqrt(k)`.
    fn lowering(levels: usize) -> Array2<Complex64> {
        let mut a = Array2::zeros((levels, levels));
        for k in 1..levels {
            a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
        }
        a
    }

    /// Annihilation operator for one mode on the two-mode space.
    pub fn annihilation(basis: &TwoModeBasis, mode: Mode) -> Self {
        let a = Self::lowering(basis.levels());
        // infallible: dimensions match by construction
        Self::kron_embed(&a, mode, basis).expect("lowering matrix matches basis")
    }

    pub fn creation(basis: &TwoModeBasis, mode: Mode) -> Self {
        Self::annihilation(basis, mode).adjoint()
    }

    /// Photon-number operator for one mode.
    pub fn number(basis: &TwoModeBasis, mode: Mode) -> Self {
        let mut op = Self::zeros(basis.dim());
        for (k, (m, n)) in basis.states().enumerate() {
            let occ = match mode {
                Mode::Cw => m,
                Mode::Ccw => n,
            };
            op.entries[(k, k)] = Complex64::new(occ as f64, 0.0);
        }
        op
    }

    /// Kronecker product; row/column blocks follow the first factor.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let (da, db) = (a.dim(), b.dim());
        let mut out = Array2::zeros((da * db, da * db));
        for i in 0..da {
            for j in 0..da {
                let aij = a.entries[(i, j)];
                if aij == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        out[(i * db + k, j * db + l)] = aij * b.entries[(k, l)];
                    }
                }
            }
        }
        Self { entries: out }
    }

    /// Embeds a single-mode operator into the two-mode space.
    ///
    /// With m-major ordering the CW factor is the left Kronecker slot.
    pub fn kron_embed(
        single: &Array2<Complex64>,
        mode: Mode,
        basis: &TwoModeBasis,
    ) -> Result<Self> {
        let l = basis.levels();
        if single.nrows() != l || single.ncols() != l {
            return Err(Error::DimensionMismatch { expected: l, got: single.nrows() });
        }
        let wrapped = Self { entries: single.clone() };
        let eye = Self::identity(l);
        Ok(match mode {
            Mode::Cw => Self::kron(&wrapped, &eye),
            Mode::Ccw => Self::kron(&eye, &wrapped),
        })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Array2::zeros((self.dim(), self.dim()));
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out[(i, j)] = self.entries[(j, i)].conj();
            }
        }
        Self { entries: out }
    }

    /// Entrywise complex conjugate (no transpose); the `conj(a) (x) a` factor
    /// of vectorized dissipators.
    pub fn conjugated(&self) -> Self {
        Self { entries: self.entries.mapv(|z| z.conj()) }
    }

    pub fn transposed(&self) -> Self {
        Self { entries: self.entries.t().to_owned() }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self { entries: self.entries.dot(&other.entries) })
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        self.entries.zip_mut_with(&other.entries, |s, o| *s += c * o);
        Ok(())
    }

    pub fn scale(&mut self, c: Complex64) {
        self.entries.mapv_inplace(|z| c * z);
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let d = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Normalized density operator. Construction Hermitizes and renormalizes;
/// positivity is checked separately because it needs an eigendecomposition.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    entries: Array2<Complex64>,
}

/// Hermiticity defect tolerated in raw solver output before symmetrizing.
pub const HERMITICITY_TOL: f64 = 1e-8;
/// Trace must land this close to 1 before renormalization.
pub const TRACE_TOL: f64 = 1e-6;
/// Eigenvalues may undershoot zero by at most this much.
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Builds from raw (e.g. linear-solver) output: verifies the matrix is
    /// close to a state, then Hermitizes `(rho + rho+) / 2` and rescales to
    /// unit trace.
    pub fn from_matrix(raw: Array2<Complex64>) -> Result<Self> {
        if raw.nrows() != raw.ncols() {
            return Err(Error::DimensionMismatch {
                expected: raw.nrows(),
                got: raw.ncols(),
            });
        }
        let op = OperatorMatrix { entries: raw };
        let defect = op.hermiticity_defect();
        if !defect.is_finite() || defect > HERMITICITY_TOL {
            return Err(Error::NoConvergence(format!(
                "density matrix hermiticity defect {defect:.3e}"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NoConvergence(format!(
                "density matrix trace {tr:.6} != 1"
            )));
        }
        let dim = op.dim();
        let mut entries = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                entries[(i, j)] =
                    (op.entries[(i, j)] + op.entries[(j, i)].conj()) * 0.5;
            }
        }
        let tr: Complex64 = (0..dim).map(|i| entries[(i, i)]).sum();
        entries.mapv_inplace(|z| z / tr.re);
        Ok(Self { entries })
    }

    /// Pure state `|m, n><m, n|`.
    pub fn pure(basis: &TwoModeBasis, m: usize, n: usize) -> Result<Self> {
        let k = basis.index_of(m, n)?;
        let mut entries = Array2::zeros((basis.dim(), basis.dim()));
        entries[(k, k)] = Complex64::new(1.0, 0.0);
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    /// `tr(op * rho)` without forming the product matrix.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<Complex64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: op.dim(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += op.entries[(i, j)] * self.entries[(j, i)];
            }
        }
        Ok(acc)
    }

    /// Diagonal occupation probabilities keyed by `(m, n)`, basis order.
    pub fn photon_probs(&self, basis: &TwoModeBasis) -> Result<BTreeMap<(usize, usize), f64>> {
        if basis.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: basis.dim(),
            });
        }
        let mut probs = BTreeMap::new();
        for (k, (m, n)) in basis.states().enumerate() {
            probs.insert((m, n), self.entries[(k, k)].re);
        }
        Ok(probs)
    }

    /// Smallest eigenvalue; errors if it undershoots `-POSITIVITY_TOL`.
    pub fn validate_positivity(&self) -> Result<f64> {
        use ndarray_linalg::{Eigh, UPLO};
        let (vals, _) = self.entries.eigh(UPLO::Lower)?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(Error::NoConvergence(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn test_basis_indexing_is_m_major() {
        let basis = TwoModeBasis::new(3).unwrap();
        assert_eq!(basis.dim(), 16);
        assert_eq!(basis.index_of(0, 0).unwrap(), 0);
        assert_eq!(basis.index_of(0, 3).unwrap(), 3);
        assert_eq!(basis.index_of(1, 0).unwrap(), 4);
        assert_eq!(basis.index_of(2, 1).unwrap(), 9);
    }

    #[test]
    fn test_basis_bijection_up_to_ten() {
        for n_max in 1..=10 {
            let basis = TwoModeBasis::new(n_max).unwrap();
            for k in 0..basis.dim() {
                let (m, n) = basis.state_of(k).unwrap();
                assert!(m <= n_max && n <= n_max);
                assert_eq!(basis.index_of(m, n).unwrap(), k);
            }
        }
    }

    #[test]
    fn test_basis_rejects_out_of_range() {
        let basis = TwoModeBasis::new(2).unwrap();
        assert!(matches!(
            basis.index_of(3, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(basis.state_of(9).is_err());
        assert!(TwoModeBasis::new(0).is_err());
    }

    #[test]
    fn test_annihilation_matrix_elements() {
        let basis = TwoModeBasis::new(3).unwrap();
        let a2 = OperatorMatrix::annihilation(&basis, Mode::Ccw);
        // <m, n-1| a_ccw |m, n> = sqrt(n), CW slot untouched
        for (m, n) in basis.states() {
            if n == 0 {
                continue;
            }
            let row = basis.index_of(m, n - 1).unwrap();
            let col = basis.index_of(m, n).unwrap();
            assert_relative_eq!(a2.entries()[(row, col)].re, (n as f64).sqrt());
        }
        let a1 = OperatorMatrix::annihilation(&basis, Mode::Cw);
        let row = basis.index_of(1, 2).unwrap();
        let col = basis.index_of(2, 2).unwrap();
        assert_relative_eq!(a1.entries()[(row, col)].re, 2f64.sqrt());
    }

    #[test]
    fn test_commutator_diagonal_has_truncation_defect() {
        // [a, a+] = 1 below the cap; the top rung absorbs -n_max.
        let n_max = 5;
        let basis = TwoModeBasis::new(n_max).unwrap();
        let a = OperatorMatrix::annihilation(&basis, Mode::Cw);
        let ad = a.adjoint();
        let mut comm = a.matmul(&ad).unwrap();
        comm.add_scaled(c(-1.0, 0.0), &ad.matmul(&a).unwrap()).unwrap();
        for (k, (m, _)) in basis.states().enumerate() {
            let expected = if m < n_max { 1.0 } else { -(n_max as f64) };
            assert_relative_eq!(comm.entries()[(k, k)].re, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn test_number_operator_matches_adjoint_product() {
        let basis = TwoModeBasis::new(4).unwrap();
        for mode in [Mode::Cw, Mode::Ccw] {
            let a = OperatorMatrix::annihilation(&basis, mode);
            let prod = a.adjoint().matmul(&a).unwrap();
            let num = OperatorMatrix::number(&basis, mode);
            for i in 0..basis.dim() {
                for j in 0..basis.dim() {
                    assert_relative_eq!(
                        (prod.entries()[(i, j)] - num.entries()[(i, j)]).norm(),
                        0.0,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn test_matmul_against_naive_triple_loop() {
        let dim = 7;
        let mut a = OperatorMatrix::zeros(dim);
        let mut b = OperatorMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                a.entries[(i, j)] = c((i * 3 + j) as f64 * 0.1, (i as f64) - 0.5 * j as f64);
                b.entries[(i, j)] = c((j * 2) as f64 - i as f64, 0.3 * (i * j) as f64);
            }
        }
        let fast = a.matmul(&b).unwrap();
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = c(0.0, 0.0);
                for k in 0..dim {
                    acc += a.entries[(i, k)] * b.entries[(k, j)];
                }
                assert_relative_eq!((fast.entries()[(i, j)] - acc).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn test_matmul_rejects_dimension_mismatch() {
        let a = OperatorMatrix::zeros(4);
        let b = OperatorMatrix::zeros(9);
        assert!(matches!(
            a.matmul(&b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        // <psi|A+|phi> = conj(<phi|A|psi>) for random matrices and vectors.
        #[test]
        fn prop_adjoint_agrees_with_random_matrix_oracle(seed in 0u64..200) {
            let dim = 5usize;
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
            };
            let mut a = OperatorMatrix::zeros(dim);
            for i in 0..dim {
                for j in 0..dim {
                    a.entries[(i, j)] = c(next(), next());
                }
            }
            let psi: Vec<Complex64> = (0..dim).map(|_| c(next(), next())).collect();
            let phi: Vec<Complex64> = (0..dim).map(|_| c(next(), next())).collect();
            let ad = a.adjoint();
            let mut lhs = c(0.0, 0.0);
            let mut rhs = c(0.0, 0.0);
            for i in 0..dim {
                for j in 0..dim {
                    lhs += psi[i].conj() * ad.entries()[(i, j)] * phi[j];
                    rhs += phi[i].conj() * a.entries()[(i, j)] * psi[j];
                }
            }
            prop_assert!((lhs - rhs.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn test_kron_embed_mode_placement() {
        let basis = TwoModeBasis::new(2).unwrap();
        let single = OperatorMatrix::lowering(basis.levels());
        let cw = OperatorMatrix::kron_embed(&single, Mode::Cw, &basis).unwrap();
        let ccw = OperatorMatrix::kron_embed(&single, Mode::Ccw, &basis).unwrap();
        assert_ne!(cw, ccw);
        assert_eq!(cw, OperatorMatrix::annihilation(&basis, Mode::Cw));
        let wrong = Array2::<Complex64>::zeros((2, 2));
        assert!(OperatorMatrix::kron_embed(&wrong, Mode::Cw, &basis).is_err());
    }

    #[test]
    fn test_density_matrix_construction_normalizes() {
        let mut raw = Array2::<Complex64>::zeros((4, 4));
        raw[(0, 0)] = c(0.7000001, 0.0);
        raw[(1, 1)] = c(0.3, 0.0);
        raw[(0, 1)] = c(0.1, 0.05);
        raw[(1, 0)] = c(0.1, -0.05);
        let rho = DensityMatrix::from_matrix(raw).unwrap();
        assert_relative_eq!(rho.trace().re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(rho.trace().im, 0.0, epsilon = 1e-14);
        rho.validate_positivity().unwrap();
    }

    #[test]
    fn test_density_matrix_rejects_non_hermitian() {
        let mut raw = Array2::<Complex64>::zeros((3, 3));
        raw[(0, 0)] = c(1.0, 0.0);
        raw[(0, 1)] = c(0.5, 0.0);
        raw[(1, 0)] = c(-0.5, 0.0); // defect 1.0
        assert!(DensityMatrix::from_matrix(raw).is_err());
    }

    #[test]
    fn test_density_matrix_rejects_wrong_trace() {
        let mut raw = Array2::<Complex64>::zeros((3, 3));
        raw[(0, 0)] = c(0.5, 0.0);
        assert!(DensityMatrix::from_matrix(raw).is_err());
    }

    #[test]
    fn test_positivity_validation_catches_negative_mode() {
        let mut raw = Array2::<Complex64>::zeros((3, 3));
        raw[(0, 0)] = c(1.1, 0.0);
        raw[(1, 1)] = c(-0.1, 0.0);
        let rho = DensityMatrix::from_matrix(raw).unwrap();
        assert!(rho.validate_positivity().is_err());
    }

    #[test]
    fn test_pure_state_probs() {
        let basis = TwoModeBasis::new(3).unwrap();
        let rho = DensityMatrix::pure(&basis, 2, 1).unwrap();
        let probs = rho.photon_probs(&basis).unwrap();
        assert_relative_eq!(probs[&(2, 1)], 1.0);
        let total: f64 = probs.values().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
        let num = OperatorMatrix::number(&basis, Mode::Cw);
        assert_relative_eq!(rho.expectation(&num).unwrap().re, 2.0);
    }
}
