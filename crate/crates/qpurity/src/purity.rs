//! Purities of block subsets and their link to correlation-tensor norms.
//!
//! The central identity: for a partition into blocks `A_1..A_k`, the squared
//! norm of the full-support correlation subtensor equals the alternating sum
//! `sum_{S subseteq blocks} (-1)^{k-|S|} d_S P^S`, where `d_S` is the subset
//! dimension and `P^S` the purity of the reduced state (empty subset counted
//! with `d = P = 1`).  Local uncertainty budgets follow from the same data:
//! summing the variances of all full-support generator products gives
//! `prod_l (d_l^2 - 1) - ||t||^2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat::{partial_trace, DensityMatrix, PartitionScheme};
use crate::tensor::{contract_with, corr_tensor, flatten_ops, latin_values};

/// Compensated (Kahan) summation; used wherever alternating sums of
/// same-magnitude terms would otherwise lose digits.
pub(crate) fn kahan_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in terms {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Purity `Tr[rho^2]`, evaluated as the squared Frobenius norm.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|c| c.norm_sqr()).sum()
}

/// Order-2 Renyi entropy `-ln P` (natural logarithm).
pub fn renyi2(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0 + 1e-9) {
        return Err(Error::InvalidPurity {
            value: p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(-p.min(1.0).ln())
}

/// Purities of every nonempty block subset of a partition, indexed by the
/// bitmask over blocks (bit `l` = block `l`).
#[derive(Clone, Debug, Serialize)]
pub struct PurityMap {
    block_dims: Vec<usize>,
    /// `values[mask]` = purity of the reduced state on the blocks in `mask`;
    /// entry 0 is the scalar 1 for the empty subset.
    values: Vec<f64>,
}

impl PurityMap {
    /// Wraps precomputed purities; `values_by_mask[0]` is forced to 1 and
    /// every entry must lie in `[1/d_S, 1]` up to 1e-9 slack.
    pub fn new(block_dims: Vec<usize>, mut values_by_mask: Vec<f64>) -> Result<Self> {
        let k = block_dims.len();
        if k == 0 || k >= usize::BITS as usize {
            return Err(Error::partition(format!("unsupported block count {k}")));
        }
        for &d in &block_dims {
            if d < 2 {
                return Err(Error::InvalidDimension { dim: d });
            }
        }
        if values_by_mask.len() != 1 << k {
            return Err(Error::IncompleteMap {
                subset: vec![values_by_mask.len()],
            });
        }
        values_by_mask[0] = 1.0;
        let map = PurityMap {
            block_dims,
            values: values_by_mask,
        };
        for mask in 1..map.values.len() {
            let p = map.values[mask];
            let lo = 1.0 / map.subset_dim(mask) as f64;
            if !(p >= lo - 1e-9 && p <= 1.0 + 1e-9) {
                return Err(Error::InvalidPurity {
                    value: p,
                    lo,
                    hi: 1.0,
                });
            }
        }
        Ok(map)
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.block_dims.len()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// Product of the block dimensions selected by `mask`.
    pub fn subset_dim(&self, mask: usize) -> usize {
        let mut d = 1usize;
        for (l, &bd) in self.block_dims.iter().enumerate() {
            if mask & (1 << l) != 0 {
                d *= bd;
            }
        }
        d
    }

    pub fn get_mask(&self, mask: usize) -> Option<f64> {
        self.values.get(mask).copied()
    }

    /// Purity of the subset given as a list of block indices.
    pub fn get(&self, blocks: &[usize]) -> Result<f64> {
        let mask = self.blocks_to_mask(blocks)?;
        Ok(self.values[mask])
    }

    fn blocks_to_mask(&self, blocks: &[usize]) -> Result<usize> {
        let mut mask = 0usize;
        for &b in blocks {
            if b >= self.k() {
                return Err(Error::subset(format!(
                    "block {b} out of range for {} blocks",
                    self.k()
                )));
            }
            if mask & (1 << b) != 0 {
                return Err(Error::subset(format!("block {b} repeated")));
            }
            mask |= 1 << b;
        }
        Ok(mask)
    }
}

/// Computes the purity of every nonempty block subset by partial tracing.
pub fn reduced_purities(rho: &DensityMatrix, partition: &PartitionScheme) -> Result<PurityMap> {
    partition.validate_for(rho.dims())?;
    let k = partition.k();
    let block_dims = partition.block_dims(rho.dims())?;
    let mut values = vec![1.0f64; 1 << k];
    let full = (1usize << k) - 1;
    for (mask, slot) in values.iter_mut().enumerate().skip(1) {
        if mask == full {
            *slot = purity(rho);
            continue;
        }
        let factors: Vec<usize> = partition
            .blocks()
            .iter()
            .enumerate()
            .filter(|(l, _)| mask & (1 << l) != 0)
            .flat_map(|(_, b)| b.iter().copied())
            .collect();
        let reduced = partial_trace(rho, &factors)?;
        *slot = purity(&reduced);
    }
    PurityMap::new(block_dims, values)
}

/// Squared norm of the full-support correlation subtensor from purities
/// alone: the alternating sum over all block subsets in ascending bitmask
/// order, compensated.
pub fn tnorm2_from_purities(pm: &PurityMap) -> f64 {
    let k = pm.k();
    let full = (1usize << k) - 1;
    kahan_sum((0..=full).map(|mask| {
        let sign = if (k - mask.count_ones() as usize) % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        sign * pm.subset_dim(mask) as f64 * pm.get_mask(mask).unwrap()
    }))
}

/// Same alternating sum restricted to the blocks in `subset`: the squared
/// norm of the subtensor supported exactly there.
pub fn subset_tnorm2_from_purities(pm: &PurityMap, subset: &[usize]) -> Result<f64> {
    let mask = pm.blocks_to_mask(subset)?;
    if mask == 0 {
        return Err(Error::subset("empty block subset"));
    }
    let g = mask.count_ones() as usize;
    // enumerate submasks of `mask` in ascending order
    let mut submasks = Vec::with_capacity(1 << g);
    let mut sub = 0usize;
    loop {
        submasks.push(sub);
        if sub == mask {
            break;
        }
        sub = (sub.wrapping_sub(mask)) & mask;
    }
    submasks.sort_unstable();
    Ok(kahan_sum(submasks.into_iter().map(|s| {
        let sign = if (g - s.count_ones() as usize) % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        sign * pm.subset_dim(s) as f64 * pm.get_mask(s).unwrap()
    })))
}

/// Total local-uncertainty budget of the full-support generator products.
#[derive(Clone, Debug, Serialize)]
pub struct UncertaintyBudget {
    /// Number of generator products summed over, `prod_l (d_l^2 - 1)`.
    pub n_terms: u128,
    /// Sum of their variances.
    pub total: f64,
    /// The squared tensor norm the budget is complementary to.
    pub tnorm2: f64,
}

/// Budget from purities alone: `N - ||t||^2` with the norm taken from the
/// alternating purity sum.
pub fn total_uncertainty_from_purities(pm: &PurityMap) -> UncertaintyBudget {
    let n_terms: u128 = pm
        .block_dims()
        .iter()
        .map(|&d| (d * d - 1) as u128)
        .product();
    let tnorm2 = tnorm2_from_purities(pm);
    UncertaintyBudget {
        n_terms,
        total: n_terms as f64 - tnorm2,
        tnorm2,
    }
}

/// Budget summed term by term: variance of every full-support generator
/// product, each evaluated as `<X^2> - <X>^2` from operator expectations.
pub fn total_uncertainty_direct(rho: &DensityMatrix, partition: &PartitionScheme) -> Result<f64> {
    let t = corr_tensor(rho, partition)?;
    let (_, mode_sizes, sq_values, _) = contract_with(rho, partition, |d| {
        let basis = crate::basis::generators(d)?;
        let squares: Vec<crate::mat::CMatrix> =
            (0..d * d).map(|a| basis.matrix(a) * basis.matrix(a)).collect();
        Ok(flatten_ops(d, &squares))
    })?;
    let second_moments = latin_values(&sq_values, &mode_sizes);
    let first_moments = t.full_support_values();
    debug_assert_eq!(second_moments.len(), first_moments.len());
    Ok(kahan_sum(
        second_moments
            .iter()
            .zip(&first_moments)
            .map(|(&s2, &m)| s2 - m * m),
    ))
}

/// Uncertainty excess of a single qubit subsystem: `2 (1 - P)` for the
/// purity `P` of the reduced state on `qubit_factors`.
pub fn rest_single_qubit(rho: &DensityMatrix, qubit_factors: &[usize]) -> Result<f64> {
    let reduced = partial_trace(rho, qubit_factors)?;
    if reduced.dim() != 2 {
        return Err(Error::mismatch(format!(
            "subsystem {:?} has dimension {}, expected a qubit",
            qubit_factors,
            reduced.dim()
        )));
    }
    Ok(2.0 * (1.0 - purity(&reduced)))
}

/// Residual of the saturated pair-variance identity on one qubit: for axes
/// `i != j` in `{1, 2, 3}` and the third axis `k`,
/// `var_i * var_j = <s_k>^2 + <s_i>^2 <s_j>^2 + 2 (1 - P)` holds exactly.
pub fn rs_check_single_qubit(
    rho: &DensityMatrix,
    qubit_factors: &[usize],
    i: usize,
    j: usize,
) -> Result<f64> {
    if !(1..=3).contains(&i) || !(1..=3).contains(&j) || i == j {
        return Err(Error::parameter(format!(
            "axes must be distinct and in 1..=3, got ({i}, {j})"
        )));
    }
    let reduced = partial_trace(rho, qubit_factors)?;
    if reduced.dim() != 2 {
        return Err(Error::mismatch(format!(
            "subsystem {:?} has dimension {}, expected a qubit",
            qubit_factors,
            reduced.dim()
        )));
    }
    let t = corr_tensor(&reduced, &PartitionScheme::singletons(1))?;
    let r = [t.value(&[1]), t.value(&[2]), t.value(&[3])];
    let p = purity(&reduced);
    let k = 6 - i - j;
    let (ri, rj, rk) = (r[i - 1], r[j - 1], r[k - 1]);
    let lhs = (1.0 - ri * ri) * (1.0 - rj * rj);
    let rhs = rk * rk + ri * ri * rj * rj + 2.0 * (1.0 - p);
    Ok((lhs - rhs).abs())
}

/// Uncertainty excess of a two-qubit pair with diagonal correlation matrix,
/// from purities alone: `2 (P_A + P_B - 2 P_AB)`.
pub fn rest_two_qubit_tdiag(p_a: f64, p_b: f64, p_ab: f64) -> f64 {
    2.0 * (p_a + p_b - 2.0 * p_ab)
}

/// Variance sums of a two-qubit pair inside a larger state.
#[derive(Clone, Debug, Serialize)]
pub struct TwoQubitUncertaintySums {
    /// Sum of the three variances of the matched products `s_i x s_i`.
    pub diag: f64,
    /// Sum over all nine products `s_i x s_j`.
    pub all_pairs: f64,
    /// Sum of the three single-axis variances on the first qubit.
    pub single_a: f64,
    /// Same on the second qubit.
    pub single_b: f64,
}

/// Computes the two-qubit variance sums from correlation entries of the
/// reduced pair state.  Both factor subsets must reduce to qubits.
pub fn uncertainty_sums_two_qubit(
    rho: &DensityMatrix,
    block_a: &[usize],
    block_b: &[usize],
) -> Result<TwoQubitUncertaintySums> {
    for &fa in block_a {
        if block_b.contains(&fa) {
            return Err(Error::subset(format!("factor {fa} in both blocks")));
        }
    }
    let mut union: Vec<usize> = block_a.iter().chain(block_b).copied().collect();
    union.sort_unstable();
    let reduced = partial_trace(rho, &union)?;
    // positions of each block's factors inside the (ascending) reduced state
    let pos = |fs: &[usize]| -> Vec<usize> {
        fs.iter()
            .map(|f| union.iter().position(|u| u == f).unwrap())
            .collect()
    };
    let partition = PartitionScheme::new(vec![pos(block_a), pos(block_b)], union.len())?;
    let t = corr_tensor(&reduced, &partition)?;
    let m = t.two_qubit_matrix()?;
    let ra = t.single_block_vector(0)?;
    let rb = t.single_block_vector(1)?;
    let diag = kahan_sum((0..3).map(|i| 1.0 - m[(i, i)] * m[(i, i)]));
    let all_pairs = kahan_sum((0..9).map(|ij| {
        let v = m[(ij / 3, ij % 3)];
        1.0 - v * v
    }));
    let single_a = kahan_sum(ra.iter().map(|&r| 1.0 - r * r));
    let single_b = kahan_sum(rb.iter().map(|&r| 1.0 - r * r));
    Ok(TwoQubitUncertaintySums {
        diag,
        all_pairs,
        single_a,
        single_b,
    })
}
