//! Coalition plans: exhaustive enumeration or kernel-weighted sampling,
//! Shapley kernel weights and the binary membership matrix `Z`.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weight given to the empty and the full coalition.
pub const DEFAULT_ANCHOR_WEIGHT: f64 = 1e6;

/// Largest feature count allowed for exhaustive enumeration by default.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 20;

/// Masks are `u64`, so sampled plans support at most this many features.
pub const MAX_FEATURES: usize = 63;

/// A subset of features, bit `i` set iff feature `i` is in the coalition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    mask: u64,
    size: u32,
}

impl Coalition {
    pub fn new(mask: u64) -> Self {
        Self {
            mask,
            size: mask.count_ones(),
        }
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn contains(&self, feature: usize) -> bool {
        feature < 64 && self.mask >> feature & 1 == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Exhaustive,
    Sampled { seed: u64, draws: usize },
}

/// Ordered coalitions with their Kernel SHAP weights. The first entry is the
/// empty coalition and the last the full one.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionPlan<T> {
    features: usize,
    coalitions: Vec<Coalition>,
    weights: Vec<T>,
    mode: PlanMode,
}

impl<T: Scalar> CoalitionPlan<T> {
    pub fn features(&self) -> usize {
        self.features
    }

    pub fn coalitions(&self) -> &[Coalition] {
        &self.coalitions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn mode(&self) -> PlanMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    pub fn empty_index(&self) -> usize {
        0
    }

    pub fn full_index(&self) -> usize {
        self.coalitions.len() - 1
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c
}

/// Shapley kernel weight `(p − 1) / (C(p, s) · s · (p − s))`, with the empty
/// and full coalitions pinned to `anchor`.
pub fn shapley_kernel_weight_anchored<T: Scalar>(p: usize, s: usize, anchor: T) -> Result<T> {
    if p == 0 || s > p || p > MAX_FEATURES {
        return Err(Error::CoalitionSize { features: p, size: s });
    }
    if s == 0 || s == p {
        return Ok(anchor);
    }
    // Exact integer denominator keeps k(p, s) == k(p, p − s) bit for bit.
    let denom = binomial(p as u64, s as u64) * (s as u128) * ((p - s) as u128);
    Ok(T::lit((p - 1) as f64) / T::lit(denom as f64))
}

pub fn shapley_kernel_weight<T: Scalar>(p: usize, s: usize) -> Result<T> {
    shapley_kernel_weight_anchored(p, s, T::lit(DEFAULT_ANCHOR_WEIGHT))
}

/// All `2^p` coalitions in binary counting order.
pub fn enumerate_all<T: Scalar>(p: usize, cap: usize, anchor: T) -> Result<CoalitionPlan<T>> {
    if p == 0 {
        return Err(Error::CoalitionSize { features: 0, size: 0 });
    }
    if p > cap || p > MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            features: p,
            cap: cap.min(MAX_FEATURES),
        });
    }
    let by_size: Vec<T> = (0..=p)
        .map(|s| shapley_kernel_weight_anchored(p, s, anchor))
        .collect::<Result<_>>()?;
    let coalitions: Vec<Coalition> = (0..1u64 << p).map(Coalition::new).collect();
    let weights = coalitions.iter().map(|c| by_size[c.size()]).collect();
    Ok(CoalitionPlan {
        features: p,
        coalitions,
        weights,
        mode: PlanMode::Exhaustive,
    })
}

/// Probability that one draw has size `s`, for `1 <= s < p`: proportional to
/// `k(p, s) · C(p, s)`, i.e. to `1 / (s (p − s))`.
pub fn size_distribution(p: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..p).map(|s| 1.0 / (s * (p - s)) as f64).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Draws `draws` coalitions with replacement from the non-trivial masks with
/// probability proportional to their kernel weight. Repeated masks are merged
/// and weighted by their draw count. The empty and full coalitions are always
/// included with weight `anchor`.
pub fn sample_coalitions<T: Scalar>(p: usize, draws: usize, seed: u64, anchor: T) -> Result<CoalitionPlan<T>> {
    if p == 0 || p > MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            features: p,
            cap: MAX_FEATURES,
        });
    }
    if draws == 0 {
        return Err(Error::InvalidConfig("number of coalition draws must be at least 1".into()));
    }
    let full = (1u64 << p) - 1;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    // p == 1 has no coalition besides the anchors.
    if p > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = WeightedIndex::new(size_distribution(p)).expect("size weights are positive");
        for _ in 0..draws {
            let s = sizes.sample(&mut rng) + 1;
            let mask = index::sample(&mut rng, p, s)
                .into_iter()
                .fold(0u64, |m, i| m | 1 << i);
            *counts.entry(mask).or_default() += 1;
        }
    }
    let mut coalitions = Vec::with_capacity(counts.len() + 2);
    let mut weights = Vec::with_capacity(counts.len() + 2);
    coalitions.push(Coalition::new(0));
    weights.push(anchor);
    for (mask, n) in counts {
        coalitions.push(Coalition::new(mask));
        weights.push(T::lit(n as f64));
    }
    coalitions.push(Coalition::new(full));
    weights.push(anchor);
    Ok(CoalitionPlan {
        features: p,
        coalitions,
        weights,
        mode: PlanMode::Sampled { seed, draws },
    })
}

/// Binary `|plan| × (p + 1)` matrix: a leading column of ones followed by the
/// membership indicators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl MembershipMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, j: usize) -> &[u8] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }
}

pub fn build_z<T: Scalar>(plan: &CoalitionPlan<T>) -> MembershipMatrix {
    let p = plan.features();
    let cols = p + 1;
    let mut data = Vec::with_capacity(plan.len() * cols);
    for c in plan.coalitions() {
        data.push(1);
        data.extend((0..p).map(|i| u8::from(c.contains(i))));
    }
    MembershipMatrix {
        rows: plan.len(),
        cols,
        data,
    }
}
