//! Correlation tensors of a state with respect to a block partition.
//!
//! For a partition into blocks of dimensions `d_1..d_k`, the tensor holds
//! `t[a_1..a_k] = Tr[rho * (s_{a_1} x ... x s_{a_k})]` over the generator
//! bases of the blocks, index 0 being the local identity.  Entries are
//! computed by reshaping the density matrix into a `k`-mode array with one
//! composite `(row, col)` digit per block and applying one square transform
//! per mode, which costs `O(D^2 * sum_l d_l^2)` instead of one trace per
//! entry.

use num_complex::Complex64;

use crate::basis::generators;
use crate::error::{Error, Result};
use crate::mat::{merge_blocks, DensityMatrix, PartitionScheme};

/// Cap on the number of stored tensor entries, `prod_l d_l^2`.
pub const ENTRY_CAP: usize = 65536;

/// Dense real correlation tensor over the blocks of a partition.
#[derive(Clone, Debug)]
pub struct CorrelationTensor {
    partition: PartitionScheme,
    block_dims: Vec<usize>,
    mode_sizes: Vec<usize>,
    values: Vec<f64>,
    max_imag: f64,
}

/// Enumerates all digit combinations of `dims` (first digit slowest) and
/// returns the weighted digit sums in enumeration order.
fn weight_map(dims: &[usize], weights: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; dims.len()];
    loop {
        out.push(digits.iter().zip(weights).map(|(&d, &w)| d * w).sum());
        let mut pos = dims.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < dims[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Flattens a list of `d x d` operators into the transform layout used by
/// [`contract_with`]: `g[a*m + (i*d + j)] = ops[a][j, i]`, so contracting
/// against `rho[(i..), (j..)]` yields `Tr[rho * (ops x ...)]`.
pub(crate) fn flatten_ops(d: usize, ops: &[crate::mat::CMatrix]) -> Vec<Complex64> {
    let m = d * d;
    debug_assert_eq!(ops.len(), m);
    let mut g = vec![Complex64::ZERO; m * m];
    for (a, s) in ops.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                g[a * m + i * d + j] = s[(j, i)];
            }
        }
    }
    g
}

/// Contraction output: block dims, per-block mode sizes, the real parts of
/// all expectation values, and the largest imaginary residue seen.
pub(crate) type Contraction = (Vec<usize>, Vec<usize>, Vec<f64>, f64);

/// Expectation values `Tr[rho * (O_{a_1} x ... x O_{a_k})]` for one operator
/// family per block, supplied flattened by `gmat_for(block_dim)`.
pub(crate) fn contract_with<F>(
    rho: &DensityMatrix,
    partition: &PartitionScheme,
    mut gmat_for: F,
) -> Result<Contraction>
where
    F: FnMut(usize) -> Result<Vec<Complex64>>,
{
    let block_dims = partition.block_dims(rho.dims())?;
    let mode_sizes: Vec<usize> = block_dims.iter().map(|&d| d * d).collect();
    let mut total: usize = 1;
    for &m in &mode_sizes {
        total = total.saturating_mul(m);
        if total > ENTRY_CAP {
            return Err(Error::SizeLimit {
                size: total,
                cap: ENTRY_CAP,
            });
        }
    }
    let mut gmats: Vec<Vec<Complex64>> = Vec::with_capacity(block_dims.len());
    for &d in &block_dims {
        gmats.push(gmat_for(d)?);
    }

    let merged = merge_blocks(rho, partition)?;
    let k = block_dims.len();
    // Interleave rho into mode layout: digit l is the composite (i_l, j_l).
    let mut mode_strides = vec![1usize; k];
    for l in (0..k.saturating_sub(1)).rev() {
        mode_strides[l] = mode_strides[l + 1] * mode_sizes[l + 1];
    }
    let row_weights: Vec<usize> = (0..k).map(|l| block_dims[l] * mode_strides[l]).collect();
    let rowmap = weight_map(&block_dims, &row_weights);
    let colmap = weight_map(&block_dims, &mode_strides);
    let m = merged.matrix();
    let mut cur = vec![Complex64::ZERO; total];
    for (i, &ri) in rowmap.iter().enumerate() {
        for (j, &cj) in colmap.iter().enumerate() {
            cur[ri + cj] = m[(i, j)];
        }
    }

    // One square transform per mode; the shape never changes.
    let mut scratch = vec![Complex64::ZERO; total];
    for l in 0..k {
        let msz = mode_sizes[l];
        let right: usize = mode_sizes[l + 1..].iter().product();
        let left = total / (msz * right);
        let g = &gmats[l];
        for lft in 0..left {
            let base = lft * msz * right;
            for a in 0..msz {
                let grow = &g[a * msz..(a + 1) * msz];
                for r in 0..right {
                    let mut acc = Complex64::ZERO;
                    for (ij, &gv) in grow.iter().enumerate() {
                        acc += gv * cur[base + ij * right + r];
                    }
                    scratch[base + a * right + r] = acc;
                }
            }
        }
        std::mem::swap(&mut cur, &mut scratch);
    }

    let max_imag = cur.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let values: Vec<f64> = cur.iter().map(|c| c.re).collect();
    Ok((block_dims, mode_sizes, values, max_imag))
}

/// Computes the correlation tensor of `rho` for `partition`.
pub fn corr_tensor(rho: &DensityMatrix, partition: &PartitionScheme) -> Result<CorrelationTensor> {
    let (block_dims, mode_sizes, values, max_imag) = contract_with(rho, partition, |d| {
        let basis = generators(d)?;
        let m = d * d;
        let mut g = vec![Complex64::ZERO; m * m];
        for a in 0..m {
            let s = basis.matrix(a);
            for i in 0..d {
                for j in 0..d {
                    g[a * m + i * d + j] = s[(j, i)];
                }
            }
        }
        Ok(g)
    })?;
    Ok(CorrelationTensor {
        partition: partition.clone(),
        block_dims,
        mode_sizes,
        values,
        max_imag,
    })
}

impl CorrelationTensor {
    pub fn partition(&self) -> &PartitionScheme {
        &self.partition
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.block_dims.len()
    }

    /// Per-mode extents, `d_l^2`.
    pub fn mode_sizes(&self) -> &[usize] {
        &self.mode_sizes
    }

    /// Largest imaginary residue discarded when taking real parts; a
    /// consistency indicator, expected at working precision.
    pub fn max_imag_residue(&self) -> f64 {
        self.max_imag
    }

    /// Entry at the given per-block indices (0 = local identity).
    pub fn value(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.k(), "index arity mismatch");
        let mut flat = 0usize;
        for (l, &a) in idx.iter().enumerate() {
            assert!(a < self.mode_sizes[l], "index out of range");
            flat = flat * self.mode_sizes[l] + a;
        }
        self.values[flat]
    }

    /// Squared norm of the whole tensor including the identity components;
    /// equals `D * Tr[rho^2]` for the total dimension `D`.
    pub fn norm2_total(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Sorted, deduplicated block subset or an error.
    fn checked_blocks(&self, subset: &[usize]) -> Result<Vec<usize>> {
        if subset.is_empty() {
            return Err(Error::subset("empty block subset"));
        }
        let mut s = subset.to_vec();
        s.sort_unstable();
        for w in s.windows(2) {
            if w[0] == w[1] {
                return Err(Error::subset(format!("block {} repeated", w[0])));
            }
        }
        if s[s.len() - 1] >= self.k() {
            return Err(Error::subset(format!(
                "block {} out of range for {} blocks",
                s[s.len() - 1],
                self.k()
            )));
        }
        Ok(s)
    }

    /// Squared norm of the subtensor supported exactly on `subset`: indices
    /// run over `1..d_l^2` on the listed blocks and are 0 elsewhere.
    pub fn subset_norm2(&self, subset: &[usize]) -> Result<f64> {
        let subset = self.checked_blocks(subset)?;
        let mut member = vec![false; self.k()];
        for &b in &subset {
            member[b] = true;
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; self.k()];
        for (l, &inb) in member.iter().enumerate() {
            idx[l] = usize::from(inb);
        }
        loop {
            let mut flat = 0usize;
            for (l, &a) in idx.iter().enumerate() {
                flat = flat * self.mode_sizes[l] + a;
            }
            let v = self.values[flat];
            acc += v * v;
            // advance only the digits of the member blocks
            let mut pos = self.k();
            loop {
                if pos == 0 {
                    return Ok(acc);
                }
                pos -= 1;
                if !member[pos] {
                    continue;
                }
                idx[pos] += 1;
                if idx[pos] < self.mode_sizes[pos] {
                    break;
                }
                idx[pos] = 1;
            }
        }
    }

    /// Squared norm of the subtensor supported on every block at once.
    pub fn full_support_norm2(&self) -> f64 {
        let all: Vec<usize> = (0..self.k()).collect();
        self.subset_norm2(&all).expect("full subset is valid")
    }

    /// The full-support entries (every index >= 1), flattened row-major with
    /// per-block extents `d_l^2 - 1`.
    pub fn full_support_values(&self) -> Vec<f64> {
        latin_values(&self.values, &self.mode_sizes)
    }

    /// Squared-norm contribution of every nonempty block subset, indexed by
    /// bitmask (bit `l` set when block `l` carries a nonzero index).
    pub fn norms_by_subset(&self) -> Vec<f64> {
        let k = self.k();
        let mut buckets = vec![0.0f64; 1 << k];
        let mut idx = vec![0usize; k];
        for &v in &self.values {
            let mut mask = 0usize;
            for (l, &a) in idx.iter().enumerate() {
                if a > 0 {
                    mask |= 1 << l;
                }
            }
            buckets[mask] += v * v;
            let mut pos = k;
            loop {
                if pos == 0 {
                    return buckets;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.mode_sizes[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
        buckets
    }

    /// The 3x3 correlation matrix of a two-qubit-block tensor.
    pub fn two_qubit_matrix(&self) -> Result<nalgebra::Matrix3<f64>> {
        if self.block_dims != [2, 2] {
            return Err(Error::mismatch(format!(
                "two-qubit correlation matrix needs block dims [2, 2], got {:?}",
                self.block_dims
            )));
        }
        let mut m = nalgebra::Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = self.value(&[i + 1, j + 1]);
            }
        }
        Ok(m)
    }

    /// Single-block component vector: entries with index `a >= 1` on `block`
    /// and 0 elsewhere.
    pub fn single_block_vector(&self, block: usize) -> Result<Vec<f64>> {
        if block >= self.k() {
            return Err(Error::subset(format!("block {block} out of range")));
        }
        let mut out = Vec::with_capacity(self.mode_sizes[block] - 1);
        let mut idx = vec![0usize; self.k()];
        for a in 1..self.mode_sizes[block] {
            idx[block] = a;
            out.push(self.value(&idx));
        }
        Ok(out)
    }
}

/// Extracts the entries whose per-mode index is >= 1 everywhere from a
/// row-major tensor with the given mode extents.
pub(crate) fn latin_values(values: &[f64], mode_sizes: &[usize]) -> Vec<f64> {
    let k = mode_sizes.len();
    let count: usize = mode_sizes.iter().map(|&m| m - 1).product();
    let mut out = Vec::with_capacity(count);
    let mut idx = vec![1usize; k];
    loop {
        let mut flat = 0usize;
        for (l, &a) in idx.iter().enumerate() {
            flat = flat * mode_sizes[l] + a;
        }
        out.push(values[flat]);
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < mode_sizes[pos] {
                break;
            }
            idx[pos] = 1;
        }
    }
}

/// Free-function alias for [`CorrelationTensor::subset_norm2`].
pub fn subtensor_norm2(t: &CorrelationTensor, subset: &[usize]) -> Result<f64> {
    t.subset_norm2(subset)
}

/// Residual of the subset decomposition: the total squared norm must equal
/// `1 + sum_S ||t^(S)||^2` over nonempty subsets `S`.
pub fn decomposition_check(t: &CorrelationTensor) -> f64 {
    let buckets = t.norms_by_subset();
    let mut partial = 1.0;
    for b in &buckets[1..] {
        partial += b;
    }
    (t.norm2_total() - partial).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{kron, CMatrix, DensityMatrix, PartitionScheme};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bell_phi_plus() -> DensityMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(i, j)] = c(0.5, 0.0);
        }
        DensityMatrix::new(m, vec![2, 2]).unwrap()
    }

    fn ghz3() -> DensityMatrix {
        let mut m = CMatrix::zeros(8, 8);
        for &(i, j) in &[(0, 0), (0, 7), (7, 0), (7, 7)] {
            m[(i, j)] = c(0.5, 0.0);
        }
        DensityMatrix::new(m, vec![2, 2, 2]).unwrap()
    }

    #[test]
    fn bell_state_correlation_matrix_is_diagonal() {
        let rho = bell_phi_plus();
        let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
        assert_relative_eq!(t.value(&[0, 0]), 1.0, epsilon = 1e-12);
        let m = t.two_qubit_matrix().unwrap();
        let expect = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, 1.0));
        assert_relative_eq!((m - expect).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(t.subset_norm2(&[0]).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(t.subset_norm2(&[1]).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(t.subset_norm2(&[0, 1]).unwrap(), 3.0, epsilon = 1e-12);
        assert_relative_eq!(t.norm2_total(), 4.0, epsilon = 1e-12);
        assert!(t.max_imag_residue() < 1e-12);
    }

    #[test]
    fn product_state_splits_into_marginal_vectors() {
        // |0><0| x |+><+|
        let zero = CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        let plus = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)],
        );
        let rho = DensityMatrix::new(kron(&zero, &plus).unwrap(), vec![2, 2]).unwrap();
        let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
        assert_eq!(t.single_block_vector(0).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(t.single_block_vector(1).unwrap(), vec![1.0, 0.0, 0.0]);
        // pairwise entries factor into the marginals: only (z, x) survives
        assert_relative_eq!(t.value(&[3, 1]), 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.subset_norm2(&[0, 1]).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.norm2_total(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn ghz_three_qubit_subset_norms() {
        let rho = ghz3();
        let t = corr_tensor(&rho, &PartitionScheme::singletons(3)).unwrap();
        for b in 0..3 {
            assert_relative_eq!(t.subset_norm2(&[b]).unwrap(), 0.0, epsilon = 1e-12);
        }
        for pair in [[0, 1], [0, 2], [1, 2]] {
            assert_relative_eq!(t.subset_norm2(&pair).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(t.full_support_norm2(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(t.norm2_total(), 8.0, epsilon = 1e-12);
        assert_eq!(t.full_support_values().len(), 27);
        assert_relative_eq!(decomposition_check(&t), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn total_norm_is_partition_independent() {
        let rho = ghz3();
        let mut totals = Vec::new();
        for p in PartitionScheme::all_partitions(3) {
            let t = corr_tensor(&rho, &p).unwrap();
            totals.push(t.norm2_total());
        }
        for w in totals.windows(2) {
            assert_relative_eq!(w[0], w[1], epsilon = 1e-11);
        }
    }

    #[test]
    fn maximally_mixed_qutrit_pair_has_unit_norm() {
        let d = 9;
        let m = CMatrix::identity(d, d).scale(1.0 / d as f64);
        let rho = DensityMatrix::new(m, vec![3, 3]).unwrap();
        let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
        assert_relative_eq!(t.norm2_total(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.subset_norm2(&[0, 1]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn norm_links_to_purity_for_mixed_dims() {
        // diagonal state on 2 x 3 with unequal weights
        let weights = [0.3, 0.25, 0.05, 0.2, 0.1, 0.1];
        let mut m = CMatrix::zeros(6, 6);
        for (i, &w) in weights.iter().enumerate() {
            m[(i, i)] = c(w, 0.0);
        }
        let rho = DensityMatrix::new(m, vec![2, 3]).unwrap();
        let purity: f64 = weights.iter().map(|w| w * w).sum();
        let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
        assert_relative_eq!(t.norm2_total(), 6.0 * purity, epsilon = 1e-12);
        assert_relative_eq!(decomposition_check(&t), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn subset_indices_are_validated() {
        let t = corr_tensor(&bell_phi_plus(), &PartitionScheme::singletons(2)).unwrap();
        assert!(t.subset_norm2(&[]).is_err());
        assert!(t.subset_norm2(&[2]).is_err());
        assert!(t.subset_norm2(&[0, 0]).is_err());
    }

    #[test]
    fn entry_cap_is_enforced() {
        let n = 9;
        let d = 1 << n;
        let m = CMatrix::identity(d, d).scale(1.0 / d as f64);
        let rho = DensityMatrix::trusted(m, vec![2; n]);
        let err = corr_tensor(&rho, &PartitionScheme::singletons(n));
        assert!(matches!(err, Err(Error::SizeLimit { .. })));
    }
}
