//! Exact per-coalition least squares, the reference the penalized solver is
//! checked against.
//!
//! Removing a feature's columns from the design removes the matching rows and
//! columns of `XᵀX`, so each coalition fit is a solve with a principal
//! submatrix of `Q`. [`sequential_refit`] instead rebuilds every reduced
//! normal system from the raw rows, one model at a time, which is the cost
//! profile of fitting each regression separately.

use crate::coalitions::CoalitionPlan;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::scalar::Scalar;
use crate::solver::{build_mask, ConstraintMask, ContributionVector};
use crate::tabular::{ColumnMap, DesignMatrix, GramSystem};

/// Exact least squares coefficients on the retained design columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFit<T> {
    pub retained: Vec<usize>,
    pub beta: Vec<T>,
}

impl<T: Scalar> SubsetFit<T> {
    /// Prediction at a full-width encoded row.
    pub fn predict(&self, x_star: &[T]) -> T {
        let mut acc = T::zero();
        for (&j, &b) in self.retained.iter().zip(&self.beta) {
            acc += x_star[j] * b;
        }
        acc
    }

    /// Coefficients scattered back to full width, zeros elsewhere.
    pub fn expand(&self, width: usize) -> Vec<T> {
        let mut full = vec![T::zero(); width];
        for (&j, &b) in self.retained.iter().zip(&self.beta) {
            full[j] = b;
        }
        full
    }
}

/// Solves `Q_A β = m_A` on the unconstrained index set `A`.
pub fn fit_subset_ols<T: Scalar>(gram: &GramSystem<T>, mask: &ConstraintMask) -> Result<SubsetFit<T>> {
    if mask.width() != gram.width() {
        return Err(Error::DimensionMismatch {
            expected: gram.width(),
            found: mask.width(),
        });
    }
    let retained = mask.retained();
    let sub = gram.q.submatrix(&retained);
    let rhs: Vec<T> = retained.iter().map(|&j| gram.m[j]).collect();
    let beta = Cholesky::factor(&sub)
        .map_err(|e| Error::SingularSubmatrix {
            mask: mask.coalition().mask(),
            pivot: e.pivot,
        })?
        .solve(&rhs);
    Ok(SubsetFit { retained, beta })
}

/// Exact fits for every coalition of a plan, in plan order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactFits<T> {
    width: usize,
    fits: Vec<SubsetFit<T>>,
}

impl<T: Scalar> ExactFits<T> {
    /// Full design width `q` the fits index into.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, coalition: usize) -> &SubsetFit<T> {
        &self.fits[coalition]
    }

    pub fn len(&self) -> usize {
        self.fits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fits.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SubsetFit<T>> {
        self.fits.iter()
    }

    pub fn contributions(&self, x_star: &[T]) -> ContributionVector<T> {
        ContributionVector::new(self.fits.iter().map(|f| f.predict(x_star)).collect())
    }
}

pub fn fit_plan_exact<T: Scalar>(
    gram: &GramSystem<T>,
    plan: &CoalitionPlan<T>,
    columns: &ColumnMap,
) -> Result<ExactFits<T>> {
    let fits = plan
        .coalitions()
        .iter()
        .map(|&c| fit_subset_ols(gram, &build_mask(c, columns)))
        .collect::<Result<_>>()?;
    Ok(ExactFits {
        width: gram.width(),
        fits,
    })
}

/// Exact `v(S)` at one encoded row for every coalition of the plan.
pub fn explain_exact<T: Scalar>(
    gram: &GramSystem<T>,
    plan: &CoalitionPlan<T>,
    columns: &ColumnMap,
    x_star: &[T],
) -> Result<ContributionVector<T>> {
    if x_star.len() != gram.width() {
        return Err(Error::DimensionMismatch {
            expected: gram.width(),
            found: x_star.len(),
        });
    }
    Ok(fit_plan_exact(gram, plan, columns)?.contributions(x_star))
}

/// Fits every coalition separately from the raw design rows: form the reduced
/// `X_Aᵀ X_A` and `X_Aᵀ f`, factor, solve. No work is shared between
/// coalitions.
pub fn sequential_refit<T: Scalar>(
    design: &DesignMatrix<T>,
    f: &[T],
    plan: &CoalitionPlan<T>,
) -> Result<ExactFits<T>> {
    if design.rows() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: design.rows(),
            found: f.len(),
        });
    }
    let columns = design.column_map();
    let mut fits = Vec::with_capacity(plan.len());
    let mut reduced = Vec::new();
    for &c in plan.coalitions() {
        let mask = build_mask(c, columns);
        let retained = mask.retained();
        let k = retained.len();
        let mut gram = SquareMatrix::zeros(k);
        let mut rhs = vec![T::zero(); k];
        for r in 0..design.rows() {
            let row = design.row(r);
            reduced.clear();
            reduced.extend(retained.iter().map(|&j| row[j]));
            for a in 0..k {
                for b in a..k {
                    gram[(a, b)] += reduced[a] * reduced[b];
                }
                rhs[a] += reduced[a] * f[r];
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let beta = Cholesky::factor(&gram)
            .map_err(|e| Error::SingularSubmatrix {
                mask: c.mask(),
                pivot: e.pivot,
            })?
            .solve(&rhs);
        fits.push(SubsetFit { retained, beta });
    }
    Ok(ExactFits {
        width: design.width(),
        fits,
    })
}

/// Fitted values `X β` over the raw design rows.
pub fn fitted_values<T: Scalar>(design: &DesignMatrix<T>, fit: &SubsetFit<T>) -> Vec<T> {
    let full = fit.expand(design.width());
    (0..design.rows()).map(|r| dot(design.row(r), &full)).collect()
}
