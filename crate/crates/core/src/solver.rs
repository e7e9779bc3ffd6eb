//! Approximate coalition regressions through penalized precision blocks.
//!
//! Every coalition `S` gets the system `(Q + κ·D_S) μ = m`, where `D_S` is the
//! 0/1 diagonal that marks the design columns of features outside `S`. Large
//! `κ` drives those coefficients towards zero, so `μ` approaches the least
//! squares fit on the retained columns without ever re-slicing the design.
//!
//! Stacked over the plan these blocks form the block-diagonal joint matrix
//! `I ⊗ Q + κ·D`. Two execution routes exist: factor each `q × q` block with
//! the dense kernel (default), or assemble a chunk of blocks into one sparse
//! matrix and factor that. Both produce identical bits.

use rayon::prelude::*;

use crate::coalitions::{Coalition, CoalitionPlan};
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::scalar::Scalar;
use crate::sparse::{CscBuilder, SparseCholesky, SymmetricCsc};
use crate::tabular::{ColumnMap, GramSystem};

pub const DEFAULT_KAPPA_MULTIPLIER: f64 = 1e3;
pub const DEFAULT_CHUNK_SIZE: usize = 1024;

/// Multipliers on `max_i Q_ii` used by convergence sweeps.
pub const KAPPA_SWEEP: [f64; 7] = [1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];

/// `κ = multiplier · max_i Q_ii`.
pub fn kappa_with_multiplier<T: Scalar>(gram: &GramSystem<T>, multiplier: f64) -> Result<T> {
    if gram.max_diag <= T::zero() || !gram.max_diag.is_finite() {
        return Err(Error::DegenerateGram(gram.max_diag.as_f64()));
    }
    if multiplier <= 0.0 || !multiplier.is_finite() {
        return Err(Error::InvalidConfig(format!("kappa multiplier must be positive, got {multiplier}")));
    }
    let kappa = T::lit(multiplier) * gram.max_diag;
    if !kappa.is_finite() {
        return Err(Error::InvalidConfig(format!("kappa overflows for multiplier {multiplier}")));
    }
    Ok(kappa)
}

pub fn kappa_default<T: Scalar>(gram: &GramSystem<T>) -> Result<T> {
    kappa_with_multiplier(gram, DEFAULT_KAPPA_MULTIPLIER)
}

/// Which design columns a coalition forces towards zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMask {
    coalition: Coalition,
    constrained: Vec<bool>,
}

impl ConstraintMask {
    pub fn coalition(&self) -> Coalition {
        self.coalition
    }

    pub fn width(&self) -> usize {
        self.constrained.len()
    }

    pub fn is_constrained(&self, column: usize) -> bool {
        self.constrained[column]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.constrained
    }

    /// Unconstrained columns, ascending. Always starts with the intercept.
    pub fn retained(&self) -> Vec<usize> {
        (0..self.constrained.len()).filter(|&j| !self.constrained[j]).collect()
    }
}

/// Marks every column owned by a feature outside `coalition`. The intercept
/// is never constrained.
pub fn build_mask(coalition: Coalition, columns: &ColumnMap) -> ConstraintMask {
    let mut constrained = vec![false; columns.width()];
    for (i, range) in columns.ranges().iter().enumerate() {
        if !coalition.contains(i) {
            constrained[range.clone()].fill(true);
        }
    }
    ConstraintMask {
        coalition,
        constrained,
    }
}

/// Dense `Q + κ·D_S`.
pub fn constrained_block<T: Scalar>(gram: &GramSystem<T>, mask: &ConstraintMask, kappa: T) -> SquareMatrix<T> {
    let mut block = gram.q.clone();
    for (j, &c) in mask.as_slice().iter().enumerate() {
        if c {
            block[(j, j)] += kappa;
        }
    }
    block
}

/// Solves `(Q + κ·D_S) μ = m` through a Cholesky factorization.
pub fn solve_coalition<T: Scalar>(gram: &GramSystem<T>, mask: &ConstraintMask, kappa: T) -> Result<Vec<T>> {
    if mask.width() != gram.width() {
        return Err(Error::DimensionMismatch {
            expected: gram.width(),
            found: mask.width(),
        });
    }
    let block = constrained_block(gram, mask, kappa);
    let chol = Cholesky::factor(&block).map_err(|e| Error::NotPositiveDefinite {
        mask: mask.coalition().mask(),
        pivot: e.pivot,
    })?;
    Ok(chol.solve(&gram.m))
}

/// Assembles `I ⊗ Q + κ·D` for the given masks as one sparse symmetric matrix
/// (lower triangle). Every entry of `Q` is kept structurally, zeros included.
pub fn assemble_joint<T: Scalar>(gram: &GramSystem<T>, masks: &[ConstraintMask], kappa: T) -> SymmetricCsc<T> {
    let q = gram.width();
    let n = masks.len() * q;
    let mut builder = CscBuilder::with_capacity(n, masks.len() * q * (q + 1) / 2);
    for (b, mask) in masks.iter().enumerate() {
        let offset = b * q;
        for j in 0..q {
            let mut diag = gram.q[(j, j)];
            if mask.is_constrained(j) {
                diag += kappa;
            }
            builder.push(offset + j, diag);
            for i in j + 1..q {
                builder.push(offset + i, gram.q[(i, j)]);
            }
            builder.finish_column();
        }
    }
    builder.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assembly {
    /// Factor each `q × q` block with the dense kernel.
    #[default]
    PerBlock,
    /// Assemble each chunk as one sparse block-diagonal matrix.
    Joint,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig<T> {
    pub kappa: T,
    pub chunk_size: usize,
    pub assembly: Assembly,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(kappa: T) -> Self {
        Self {
            kappa,
            chunk_size: DEFAULT_CHUNK_SIZE,
            assembly: Assembly::PerBlock,
            threads: None,
        }
    }
}

/// Coefficient vectors `μ_S` for every coalition of a plan, in plan order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet<T> {
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> CoefficientSet<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, coalition: usize) -> &[T] {
        &self.values[coalition * self.width..(coalition + 1) * self.width]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.width)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

/// Bookkeeping from a chunked solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub chunks: usize,
    /// Most constrained blocks materialized at the same time.
    pub peak_blocks: usize,
    /// Rough byte count of the largest materialized chunk (matrices and factors).
    pub peak_bytes: usize,
}

/// Solves every coalition of `plan`, materializing at most `chunk_size`
/// blocks at a time. The result does not depend on the chunk size, the
/// assembly route or the thread count.
pub fn solve_plan_chunked<T: Scalar>(
    gram: &GramSystem<T>,
    plan: &CoalitionPlan<T>,
    columns: &ColumnMap,
    config: &SolverConfig<T>,
) -> Result<(CoefficientSet<T>, SolveStats)> {
    if config.chunk_size == 0 {
        return Err(Error::InvalidConfig("chunk size must be at least 1".into()));
    }
    if config.kappa <= T::zero() || !config.kappa.is_finite() {
        return Err(Error::InvalidConfig(format!("kappa must be positive and finite, got {}", config.kappa)));
    }
    if columns.width() != gram.width() {
        return Err(Error::DimensionMismatch {
            expected: gram.width(),
            found: columns.width(),
        });
    }
    match config.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start {t} worker threads: {e}")))?;
            pool.install(|| solve_chunks(gram, plan, columns, config))
        }
        None => solve_chunks(gram, plan, columns, config),
    }
}

fn solve_chunks<T: Scalar>(
    gram: &GramSystem<T>,
    plan: &CoalitionPlan<T>,
    columns: &ColumnMap,
    config: &SolverConfig<T>,
) -> Result<(CoefficientSet<T>, SolveStats)> {
    let q = gram.width();
    let mut values = vec![T::zero(); plan.len() * q];
    let mut stats = SolveStats::default();
    let elem = std::mem::size_of::<T>();

    for (chunk_idx, chunk) in plan.coalitions().chunks(config.chunk_size).enumerate() {
        let masks: Vec<ConstraintMask> = chunk.iter().map(|&c| build_mask(c, columns)).collect();
        let out = &mut values[chunk_idx * config.chunk_size * q..][..chunk.len() * q];
        let bytes = match config.assembly {
            Assembly::PerBlock => {
                let blocks: Vec<SquareMatrix<T>> = masks
                    .par_iter()
                    .map(|m| constrained_block(gram, m, config.kappa))
                    .collect();
                out.par_chunks_mut(q)
                    .zip(blocks.par_iter().zip(&masks))
                    .try_for_each(|(slot, (block, mask))| {
                        let chol = Cholesky::factor(block).map_err(|e| Error::NotPositiveDefinite {
                            mask: mask.coalition().mask(),
                            pivot: e.pivot,
                        })?;
                        slot.copy_from_slice(&gram.m);
                        chol.solve_in_place(slot);
                        Ok::<_, Error>(())
                    })?;
                2 * blocks.len() * q * q * elem
            }
            Assembly::Joint => {
                let joint = assemble_joint(gram, &masks, config.kappa);
                let chol = SparseCholesky::factor(&joint).map_err(|e| Error::NotPositiveDefinite {
                    mask: masks[e.pivot / q].coalition().mask(),
                    pivot: e.pivot % q,
                })?;
                for slot in out.chunks_mut(q) {
                    slot.copy_from_slice(&gram.m);
                }
                chol.solve_in_place(out);
                let index = std::mem::size_of::<usize>();
                (joint.nnz() + chol.factor_nnz()) * (elem + index)
            }
        };
        stats.chunks += 1;
        stats.peak_blocks = stats.peak_blocks.max(chunk.len());
        stats.peak_bytes = stats.peak_bytes.max(bytes);
    }
    Ok((CoefficientSet { width: q, values }, stats))
}

/// `v(S)` for every coalition of a plan at one explained row.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ContributionVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `v(S) = x* · μ_S` using the full encoded row; suppressed coefficients
/// neutralize the excluded features.
pub fn contributions<T: Scalar>(coeffs: &CoefficientSet<T>, x_star: &[T]) -> Result<ContributionVector<T>> {
    if x_star.len() != coeffs.width() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.width(),
            found: x_star.len(),
        });
    }
    Ok(ContributionVector {
        values: coeffs.iter().map(|mu| dot(x_star, mu)).collect(),
    })
}
