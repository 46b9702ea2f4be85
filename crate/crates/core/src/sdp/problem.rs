use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SdpError;

const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Dense complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBlock(DMatrix<Complex64>);

impl HermitianBlock {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self, SdpError> {
        if !matrix.is_square() {
            return Err(SdpError::NotHermitian(f64::INFINITY));
        }
        let dev = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > HERMITIAN_TOLERANCE {
            return Err(SdpError::NotHermitian(dev));
        }
        Ok(Self(matrix))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.0.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One nonzero `(row, col, re, im)` of a Hermitian coefficient matrix.
/// Both triangles are listed explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry(pub usize, pub usize, pub f64, pub f64);

impl Entry {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.2, self.3)
    }
}

/// Sparse Hermitian coefficient; `<A, X> = Re Tr(A X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianCoeff {
    pub dim: usize,
    pub entries: Vec<Entry>,
}

impl HermitianCoeff {
    /// `<A, X> = X[k,k]`.
    pub fn diagonal_unit(dim: usize, k: usize) -> Self {
        Self { dim, entries: vec![Entry(k, k, 1.0, 0.0)] }
    }

    /// `<A, X> = Re X[k,l]` for `k != l`.
    pub fn real_part(dim: usize, k: usize, l: usize) -> Self {
        Self { dim, entries: vec![Entry(k, l, 0.5, 0.0), Entry(l, k, 0.5, 0.0)] }
    }

    /// `<A, X> = Im X[k,l]` for `k != l`.
    pub fn imag_part(dim: usize, k: usize, l: usize) -> Self {
        Self { dim, entries: vec![Entry(k, l, 0.0, 0.5), Entry(l, k, 0.0, -0.5)] }
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push(Entry(i, j, v.re, v.im));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            m[(e.0, e.1)] += e.value();
        }
        m
    }

    /// `Re Tr(A X)`.
    pub fn inner(&self, x: &DMatrix<Complex64>) -> f64 {
        self.entries.iter().map(|e| (e.value() * x[(e.1, e.0)]).re).sum()
    }

    pub fn is_hermitian(&self) -> bool {
        let m = self.to_dense();
        (&m - m.adjoint()).iter().all(|z| z.norm() <= HERMITIAN_TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    Psd { var: usize, block: usize, coeff: HermitianCoeff },
    Scalar { var: usize, coeff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Eq,
    /// `expr >= rhs`
    Ge,
    /// `expr <= rhs`
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub label: String,
    pub terms: Vec<Term>,
    pub sense: Sense,
    pub rhs: f64,
    /// Structure hint: the constraint couples many otherwise independent
    /// groups of variables. The solver keeps such rows in the dense border of
    /// its Schur complement; the hint never changes the solution.
    #[serde(default)]
    pub linking: bool,
}

/// A PSD variable, a direct sum of Hermitian blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdVariable {
    pub label: String,
    pub block_dims: Vec<usize>,
}

impl PsdVariable {
    /// Complex entries stored for this variable.
    pub fn storage(&self) -> usize {
        self.block_dims.iter().map(|d| d * d).sum()
    }
}

/// A non-negative scalar variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarVariable {
    pub label: String,
}

/// `maximize objective` over PSD blocks and non-negative scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub psd_vars: Vec<PsdVariable>,
    pub scalar_vars: Vec<ScalarVariable>,
    pub objective: Vec<Term>,
    pub constraints: Vec<LinearConstraint>,
    /// Upper bound on the summed trace of every variable, including one
    /// implicit slack per inequality, over the feasible set. When present the
    /// solver turns its dual iterate into a rigorous upper bound on the
    /// optimum even if that iterate is slightly infeasible.
    #[serde(default)]
    pub trace_bound: Option<f64>,
}

impl SdpProblem {
    pub fn eq_constraints(&self) -> impl Iterator<Item = &LinearConstraint> {
        self.constraints.iter().filter(|c| c.sense == Sense::Eq)
    }

    pub fn ineq_constraints(&self) -> impl Iterator<Item = &LinearConstraint> {
        self.constraints.iter().filter(|c| c.sense != Sense::Eq)
    }

    pub fn psd_index(&self, label: &str) -> Option<usize> {
        self.psd_vars.iter().position(|v| v.label == label)
    }

    pub fn scalar_index(&self, label: &str) -> Option<usize> {
        self.scalar_vars.iter().position(|v| v.label == label)
    }

    /// Checks that every term references a declared variable with matching
    /// block size and that every coefficient is Hermitian.
    pub fn validate(&self) -> Result<(), SdpError> {
        let check = |t: &Term, ctx: &str| -> Result<(), SdpError> {
            match t {
                Term::Psd { var, block, coeff } => {
                    let v = self
                        .psd_vars
                        .get(*var)
                        .ok_or_else(|| SdpError::UnknownVariable(format!("{ctx}: psd var {var}")))?;
                    let dim = *v
                        .block_dims
                        .get(*block)
                        .ok_or_else(|| SdpError::UnknownVariable(format!("{ctx}: block {block} of {}", v.label)))?;
                    if coeff.dim != dim || coeff.entries.iter().any(|e| e.0 >= dim || e.1 >= dim) {
                        return Err(SdpError::DimensionMismatch(format!("{ctx}: coefficient for {} block {block}", v.label)));
                    }
                    if !coeff.is_hermitian() {
                        return Err(SdpError::NotHermitian(f64::NAN));
                    }
                }
                Term::Scalar { var, coeff } => {
                    if *var >= self.scalar_vars.len() {
                        return Err(SdpError::UnknownVariable(format!("{ctx}: scalar var {var}")));
                    }
                    if !coeff.is_finite() {
                        return Err(SdpError::DimensionMismatch(format!("{ctx}: non-finite coefficient")));
                    }
                }
            }
            Ok(())
        };
        for t in &self.objective {
            check(t, "objective")?;
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(SdpError::DimensionMismatch(format!("{}: non-finite rhs", c.label)));
            }
            for t in &c.terms {
                check(t, &c.label)?;
            }
        }
        Ok(())
    }

    /// Evaluates a linear expression at the given variable values.
    pub fn evaluate(terms: &[Term], psd: &[Vec<DMatrix<Complex64>>], scalars: &[f64]) -> f64 {
        terms
            .iter()
            .map(|t| match t {
                Term::Psd { var, block, coeff } => coeff.inner(&psd[*var][*block]),
                Term::Scalar { var, coeff } => coeff * scalars[*var],
            })
            .sum()
    }

    /// Per-constraint violation at the given point (zero when satisfied).
    pub fn violations(&self, psd: &[Vec<DMatrix<Complex64>>], scalars: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                let v = Self::evaluate(&c.terms, psd, scalars);
                match c.sense {
                    Sense::Eq => (v - c.rhs).abs(),
                    Sense::Ge => (c.rhs - v).max(0.0),
                    Sense::Le => (v - c.rhs).max(0.0),
                }
            })
            .collect()
    }

    /// Self-describing JSON dump for cross-checking with external SDP tools.
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_coefficients_pick_entries() {
        let x = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.3, 0.7),
                Complex64::new(0.3, -0.7),
                Complex64::new(1.0, 0.0),
            ],
        );
        assert_eq!(HermitianCoeff::diagonal_unit(2, 1).inner(&x), 1.0);
        assert!((HermitianCoeff::real_part(2, 0, 1).inner(&x) - 0.3).abs() < 1e-15);
        assert!((HermitianCoeff::imag_part(2, 0, 1).inner(&x) - 0.7).abs() < 1e-15);
        assert!(HermitianCoeff::imag_part(2, 0, 1).is_hermitian());
    }

    #[test]
    fn hermitian_block_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(HermitianBlock::new(m).is_err());
    }

    #[test]
    fn validate_catches_unknown_variables() {
        let p = SdpProblem {
            psd_vars: vec![PsdVariable { label: "X".into(), block_dims: vec![2] }],
            scalar_vars: vec![],
            objective: vec![Term::Scalar { var: 0, coeff: 1.0 }],
            constraints: vec![],
            trace_bound: None,
        };
        assert!(matches!(p.validate(), Err(SdpError::UnknownVariable(_))));
    }
}
