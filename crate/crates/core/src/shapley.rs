//! Kernel SHAP: the weighted least squares system `ZᵀWZ φ = ZᵀW v`.

use rayon::prelude::*;

use crate::coalitions::{build_z, CoalitionPlan, MembershipMatrix};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::oracle::ExactFits;
use crate::scalar::Scalar;
use crate::solver::{contributions, CoefficientSet, ContributionVector};
use crate::tabular::{encode_row, ColumnMap, FeatureSchema, FeatureValue};

/// Base value and per-feature Shapley values for one explained row.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyResult<T> {
    /// Coefficient of the intercept column of `Z`; approximates `v(∅)`.
    pub phi0: T,
    pub phi: Vec<T>,
    /// `φ0 + Σ φ_i − v(full)`.
    pub efficiency_gap: T,
    /// `φ0 − v(∅)`.
    pub base_gap: T,
}

/// Factored `ZᵀWZ` for a plan; reused across explained rows.
#[derive(Debug, Clone)]
pub struct KernelShapSystem<T> {
    z: MembershipMatrix,
    weights: Vec<T>,
    chol: Cholesky<T>,
    empty: usize,
    full: usize,
}

impl<T: Scalar> KernelShapSystem<T> {
    pub fn new(z: MembershipMatrix, weights: &[T]) -> Result<Self> {
        if z.rows() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: z.rows(),
                found: weights.len(),
            });
        }
        let k = z.cols();
        if z.rows() < k {
            return Err(Error::SingularShapleySystem(z.rows()));
        }
        let mut normal = SquareMatrix::zeros(k);
        for (j, &w) in weights.iter().enumerate() {
            let row = z.row(j);
            for a in 0..k {
                if row[a] == 0 {
                    continue;
                }
                for b in a..k {
                    if row[b] != 0 {
                        normal[(a, b)] += w;
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                normal[(a, b)] = normal[(b, a)];
            }
        }
        let chol = Cholesky::factor(&normal).map_err(|e| Error::SingularShapleySystem(e.pivot))?;
        let (empty, full) = anchor_rows(&z);
        Ok(Self {
            z,
            weights: weights.to_vec(),
            chol,
            empty,
            full,
        })
    }

    pub fn for_plan(plan: &CoalitionPlan<T>) -> Result<Self> {
        Self::new(build_z(plan), plan.weights())
    }

    pub fn features(&self) -> usize {
        self.z.cols() - 1
    }

    pub fn membership(&self) -> &MembershipMatrix {
        &self.z
    }

    pub fn solve(&self, v: &ContributionVector<T>) -> Result<ShapleyResult<T>> {
        let v = v.as_slice();
        if v.len() != self.z.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.z.rows(),
                found: v.len(),
            });
        }
        // Subtract g(S) = v(∅) + |S|·(v(full) − v(∅))/p, which lies in the
        // column space of Z with known solution, so the heavily weighted
        // anchor rows carry a zero residual into the right-hand side.
        let k = self.z.cols();
        let p = T::lit((k - 1) as f64);
        let base = v[self.empty];
        let step = (v[self.full] - base) / p;
        let mut rhs = vec![T::zero(); k];
        for (j, (&w, &vj)) in self.weights.iter().zip(v).enumerate() {
            let row = self.z.row(j);
            let size = row[1..].iter().filter(|&&b| b != 0).count();
            let residual = vj - (base + T::lit(size as f64) * step);
            let wv = w * residual;
            for (a, &bit) in row.iter().enumerate() {
                if bit != 0 {
                    rhs[a] += wv;
                }
            }
        }
        self.chol.solve_in_place(&mut rhs);
        let phi0 = rhs[0] + base;
        let phi: Vec<T> = rhs[1..].iter().map(|&x| x + step).collect();
        let total = phi.iter().fold(phi0, |acc, &x| acc + x);
        Ok(ShapleyResult {
            phi0,
            efficiency_gap: total - v[self.full],
            base_gap: phi0 - v[self.empty],
            phi,
        })
    }
}

// Rows of Z that hold the empty and the full coalition.
fn anchor_rows(z: &MembershipMatrix) -> (usize, usize) {
    let mut empty = 0;
    let mut full = z.rows() - 1;
    for j in 0..z.rows() {
        let members = z.row(j)[1..].iter().filter(|&&b| b != 0).count();
        if members == 0 {
            empty = j;
        } else if members == z.cols() - 1 {
            full = j;
        }
    }
    (empty, full)
}

/// One-shot `ZᵀWZ φ = ZᵀW v`.
pub fn solve_kernel_shap<T: Scalar>(
    z: &MembershipMatrix,
    weights: &[T],
    v: &ContributionVector<T>,
) -> Result<ShapleyResult<T>> {
    KernelShapSystem::new(z.clone(), weights)?.solve(v)
}

/// Where `v(S)` comes from.
#[derive(Debug, Clone, Copy)]
pub enum ContributionSource<'a, T> {
    /// Penalized joint solve.
    Approx(&'a CoefficientSet<T>),
    /// Exact subset fits.
    Exact(&'a ExactFits<T>),
}

impl<T: Scalar> ContributionSource<'_, T> {
    pub fn evaluate(&self, x_star: &[T]) -> Result<ContributionVector<T>> {
        match self {
            ContributionSource::Approx(c) => contributions(c, x_star),
            ContributionSource::Exact(fits) => {
                if x_star.len() != fits.width() {
                    return Err(Error::DimensionMismatch {
                        expected: fits.width(),
                        found: x_star.len(),
                    });
                }
                Ok(fits.contributions(x_star))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowExplanation<T> {
    pub v: ContributionVector<T>,
    pub shapley: ShapleyResult<T>,
}

/// Explains every row against one shared set of coalition fits. Failures are
/// reported per row (wrapped with the row index) and do not stop the batch.
pub fn explain_batch<T: Scalar>(
    schema: &FeatureSchema,
    columns: &ColumnMap,
    system: &KernelShapSystem<T>,
    source: ContributionSource<'_, T>,
    rows: &[Vec<FeatureValue>],
) -> Vec<Result<RowExplanation<T>>> {
    rows.par_iter()
        .enumerate()
        .map(|(r, obs)| {
            let x = encode_row::<T>(schema, columns, obs).map_err(|e| e.at_row(r))?;
            explain_encoded(system, source, &x).map_err(|e| e.at_row(r))
        })
        .collect()
}

/// Explains one already-encoded row.
pub fn explain_encoded<T: Scalar>(
    system: &KernelShapSystem<T>,
    source: ContributionSource<'_, T>,
    x_star: &[T],
) -> Result<RowExplanation<T>> {
    let v = source.evaluate(x_star)?;
    let shapley = system.solve(&v)?;
    Ok(RowExplanation { v, shapley })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalitions::enumerate_all;

    #[test]
    fn single_feature_interpolates_anchors() {
        let plan = enumerate_all(1, 20, 1e6f64).unwrap();
        let sys = KernelShapSystem::for_plan(&plan).unwrap();
        let r = sys.solve(&ContributionVector::new(vec![2.0, 5.0])).unwrap();
        assert!((r.phi0 - 2.0).abs() < 1e-12);
        assert!((r.phi[0] - 3.0).abs() < 1e-12);
        assert!(r.efficiency_gap.abs() < 1e-12 && r.base_gap.abs() < 1e-12);
    }

    #[test]
    fn constant_contribution() {
        let plan = enumerate_all(4, 20, 1e6f64).unwrap();
        let sys = KernelShapSystem::for_plan(&plan).unwrap();
        let r = sys.solve(&ContributionVector::new(vec![7.5; 16])).unwrap();
        assert!((r.phi0 - 7.5).abs() < 1e-9);
        assert!(r.phi.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn additive_game_recovered_exactly() {
        // v(S) = 1 + Σ_{i∈S} c_i has Shapley values c_i.
        let c = [0.5, -2.0, 3.0];
        let plan = enumerate_all(3, 20, 1e6).unwrap();
        let v: Vec<f64> = plan
            .coalitions()
            .iter()
            .map(|s| 1.0 + (0..3).filter(|&i| s.contains(i)).map(|i| c[i]).sum::<f64>())
            .collect();
        let r = solve_kernel_shap(&build_z(&plan), plan.weights(), &ContributionVector::new(v)).unwrap();
        for (got, want) in r.phi.iter().zip(c) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn deficient_plan_is_singular() {
        // One draw at p = 3 leaves 3 rows for 4 unknowns.
        let plan = crate::coalitions::sample_coalitions::<f64>(3, 1, 0, 1e6).unwrap();
        assert_eq!(plan.len(), 3);
        assert!(matches!(
            KernelShapSystem::for_plan(&plan),
            Err(Error::SingularShapleySystem(_))
        ));
    }

    #[test]
    fn wrong_length_v() {
        let plan = enumerate_all(2, 20, 1e6).unwrap();
        let sys = KernelShapSystem::for_plan(&plan).unwrap();
        assert!(sys.solve(&ContributionVector::new(vec![1.0; 3])).is_err());
    }
}
