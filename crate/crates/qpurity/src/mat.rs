//! Dense complex matrices, multipartite density operators and partitions.
//!
//! Composite indices follow the usual Kronecker convention: factor 0 is the
//! slowest-varying digit, so `kron(a, b)` places `a` on factor 0.  All
//! subsystem operations (partial trace, partial transpose, factor permutation)
//! are expressed through additive flat-index maps, which keeps them at
//! O(d^2) with no per-entry digit decoding.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hard cap on the total Hilbert-space dimension accepted anywhere.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Numerical tolerances for state validation and spectral routines.
///
/// `herm` is relative to the largest entry modulus; `trace` and `psd` are
/// absolute; `eig` bounds the relative reconstruction residual of `eigh`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub psd: f64,
    pub eig: f64,
    pub dim_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-10,
            trace: 1e-10,
            psd: 1e-9,
            eig: 1e-9,
            dim_cap: DEFAULT_DIM_CAP,
        }
    }
}

/// A validated density operator on a tensor product of finite factors.
///
/// Construction goes through [`validate_density`] (or the internal trusted
/// path used by the state factories), so holders can rely on hermiticity,
/// unit trace and positivity within the configured tolerances.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates `mat` against the default tolerances and wraps it.
    pub fn new(mat: CMatrix, dims: Vec<usize>) -> Result<Self> {
        validate_density_with(mat, dims, &Tolerances::default())
    }

    /// Same as [`DensityMatrix::new`] with explicit tolerances.
    pub fn with_tolerances(mat: CMatrix, dims: Vec<usize>, tol: &Tolerances) -> Result<Self> {
        validate_density_with(mat, dims, tol)
    }

    /// Wraps without validation.  Only for constructions that are valid by
    /// design (factories, partial traces of valid states).
    pub(crate) fn trusted(mat: CMatrix, dims: Vec<usize>) -> Self {
        debug_assert_eq!(mat.nrows(), dims.iter().product::<usize>());
        DensityMatrix { dims, mat }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total dimension, the product of the factor dimensions.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Reinterprets the factor structure without touching the matrix.
    /// The new dimensions must multiply to the same total.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims, DEFAULT_DIM_CAP)?;
        if dims.iter().product::<usize>() != self.mat.nrows() {
            return Err(Error::mismatch(format!(
                "factor dimensions {:?} do not multiply to {}",
                dims,
                self.mat.nrows()
            )));
        }
        Ok(DensityMatrix {
            dims,
            mat: self.mat,
        })
    }
}

/// A partition of the tensor factors `0..n_factors` into ordered,
/// internally sorted, pairwise disjoint blocks that cover every factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionScheme {
    blocks: Vec<Vec<usize>>,
    n_factors: usize,
}

impl PartitionScheme {
    pub fn new(blocks: Vec<Vec<usize>>, n_factors: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::partition("no blocks given"));
        }
        let mut seen = vec![false; n_factors];
        let mut sorted_blocks = Vec::with_capacity(blocks.len());
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::partition("empty block"));
            }
            let mut b = block.clone();
            b.sort_unstable();
            for &f in &b {
                if f >= n_factors {
                    return Err(Error::partition(format!(
                        "factor {f} out of range for {n_factors} factors"
                    )));
                }
                if seen[f] {
                    return Err(Error::partition(format!("factor {f} appears twice")));
                }
                seen[f] = true;
            }
            sorted_blocks.push(b);
        }
        if let Some(f) = seen.iter().position(|&s| !s) {
            return Err(Error::partition(format!("factor {f} not covered")));
        }
        Ok(PartitionScheme {
            blocks: sorted_blocks,
            n_factors,
        })
    }

    /// The finest partition: one block per factor.
    pub fn singletons(n_factors: usize) -> Self {
        PartitionScheme {
            blocks: (0..n_factors).map(|f| vec![f]).collect(),
            n_factors,
        }
    }

    /// The trivial partition: all factors in one block.
    pub fn full(n_factors: usize) -> Self {
        PartitionScheme {
            blocks: vec![(0..n_factors).collect()],
            n_factors,
        }
    }

    /// Parses `"0,1|2|3"`: blocks separated by `|`, factors by `,`.
    pub fn parse(text: &str, n_factors: usize) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in text.split('|') {
            let mut block = Vec::new();
            for tok in part.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    return Err(Error::partition(format!("empty factor index in {text:?}")));
                }
                let f: usize = tok
                    .parse()
                    .map_err(|_| Error::partition(format!("bad factor index {tok:?}")))?;
                block.push(f);
            }
            blocks.push(block);
        }
        PartitionScheme::new(blocks, n_factors)
    }

    /// Number of blocks.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Dimension of each block under the given factor dimensions.
    pub fn block_dims(&self, dims: &[usize]) -> Result<Vec<usize>> {
        self.validate_for(dims)?;
        Ok(self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&f| dims[f]).product())
            .collect())
    }

    pub fn validate_for(&self, dims: &[usize]) -> Result<()> {
        if dims.len() != self.n_factors {
            return Err(Error::mismatch(format!(
                "partition covers {} factors but the state has {}",
                self.n_factors,
                dims.len()
            )));
        }
        Ok(())
    }

    /// Every set partition of `0..n_factors`, enumerated through restricted
    /// growth strings; blocks are ordered by first appearance.
    pub fn all_partitions(n_factors: usize) -> Vec<PartitionScheme> {
        let mut out = Vec::new();
        let mut labels = vec![0usize; n_factors];
        fn recurse(labels: &mut Vec<usize>, pos: usize, max_label: usize, out: &mut Vec<PartitionScheme>) {
            let n = labels.len();
            if pos == n {
                let k = max_label + 1;
                let mut blocks = vec![Vec::new(); k];
                for (f, &l) in labels.iter().enumerate() {
                    blocks[l].push(f);
                }
                out.push(PartitionScheme {
                    blocks,
                    n_factors: n,
                });
                return;
            }
            for l in 0..=max_label + 1 {
                labels[pos] = l;
                recurse(labels, pos + 1, max_label.max(l), out);
            }
        }
        if n_factors == 0 {
            return out;
        }
        recurse(&mut labels, 1, 0, &mut out);
        out
    }
}

impl std::fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = self
            .blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("|");
        write!(f, "{text}")
    }
}

/// Kronecker product with the total-dimension cap enforced up front.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let rows = a.nrows().saturating_mul(b.nrows());
    let cols = a.ncols().saturating_mul(b.ncols());
    let cap = DEFAULT_DIM_CAP;
    if rows > cap || cols > cap {
        return Err(Error::SizeLimit {
            size: rows.max(cols),
            cap,
        });
    }
    Ok(a.kronecker(b))
}

/// Largest entry modulus; the scale for relative hermiticity checks.
fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Max deviation |m_ij - conj(m_ji)| over all pairs.
fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn check_dims(dims: &[usize], cap: usize) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::mismatch("no factor dimensions given".to_string()));
    }
    for &d in dims {
        if d < 2 {
            return Err(Error::InvalidDimension { dim: d });
        }
    }
    let mut total: usize = 1;
    for &d in dims {
        total = total.saturating_mul(d);
        if total > cap {
            return Err(Error::SizeLimit { size: total, cap });
        }
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order together with the matching
/// orthonormal eigenvector columns.  The input is checked for hermiticity
/// (relative to its largest entry) and symmetrized before factorization, so
/// the reconstruction residual stays at working precision.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    eigh_with(m, &Tolerances::default())
}

pub fn eigh_with(m: &CMatrix, tol: &Tolerances) -> Result<(Vec<f64>, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::mismatch(format!(
            "eigh needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m);
    let dev = hermiticity_deviation(m);
    if dev > tol.herm * scale {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: tol.herm * scale,
        });
    }
    // Symmetrize so roundoff asymmetry cannot leak into the factorization.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Checks hermiticity, unit trace, positivity and the dimension cap, then
/// wraps the matrix as a [`DensityMatrix`].
pub fn validate_density(mat: CMatrix, dims: Vec<usize>) -> Result<DensityMatrix> {
    validate_density_with(mat, dims, &Tolerances::default())
}

pub fn validate_density_with(
    mat: CMatrix,
    dims: Vec<usize>,
    tol: &Tolerances,
) -> Result<DensityMatrix> {
    check_dims(&dims, tol.dim_cap)?;
    let total: usize = dims.iter().product();
    if mat.nrows() != total || mat.ncols() != total {
        return Err(Error::mismatch(format!(
            "matrix is {}x{} but factor dimensions {:?} give {}",
            mat.nrows(),
            mat.ncols(),
            dims,
            total
        )));
    }
    let scale = max_abs(&mat);
    let dev = hermiticity_deviation(&mat);
    if dev > tol.herm * scale {
        return Err(Error::NotHermitian {
            deviation: dev,
            tolerance: tol.herm * scale,
        });
    }
    let trace = mat.trace();
    let dev_tr = (trace.re - 1.0).abs().max(trace.im.abs());
    if dev_tr > tol.trace {
        return Err(Error::TraceNotOne {
            trace: trace.re,
            deviation: dev_tr,
            tolerance: tol.trace,
        });
    }
    let (values, _) = eigh_with(&mat, tol)?;
    let min_eig = values.first().copied().unwrap_or(0.0);
    if min_eig < -tol.psd {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
            tolerance: tol.psd,
        });
    }
    Ok(DensityMatrix { dims, mat })
}

/// Row strides for a mixed-radix index with factor 0 slowest.
fn strides(dims: &[usize]) -> Vec<usize> {
    let n = dims.len();
    let mut s = vec![1usize; n];
    for l in (0..n.saturating_sub(1)).rev() {
        s[l] = s[l + 1] * dims[l + 1];
    }
    s
}

/// Flat-index contribution of every digit combination of `factors`,
/// enumerated with the first listed factor slowest.
fn subindex_map(dims: &[usize], strides: &[usize], factors: &[usize]) -> Vec<usize> {
    let total: usize = factors.iter().map(|&f| dims[f]).product();
    let mut out = Vec::with_capacity(total.max(1));
    let mut digits = vec![0usize; factors.len()];
    loop {
        out.push(
            digits
                .iter()
                .zip(factors)
                .map(|(&dg, &f)| dg * strides[f])
                .sum(),
        );
        let mut pos = factors.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < dims[factors[pos]] {
                break;
            }
            digits[pos] = 0;
        }
    }
}

fn checked_subset(dims: &[usize], subset: &[usize]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::subset("empty subset"));
    }
    let mut s = subset.to_vec();
    s.sort_unstable();
    for w in s.windows(2) {
        if w[0] == w[1] {
            return Err(Error::subset(format!("factor {} repeated", w[0])));
        }
    }
    if let Some(&f) = s.last() {
        if f >= dims.len() {
            return Err(Error::subset(format!(
                "factor {f} out of range for {} factors",
                dims.len()
            )));
        }
    }
    Ok(s)
}

/// Traces out every factor not in `keep`; the kept factors stay in
/// ascending original order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims();
    let keep = checked_subset(dims, keep)?;
    let env: Vec<usize> = (0..dims.len()).filter(|f| !keep.contains(f)).collect();
    let st = strides(dims);
    let kmap = subindex_map(dims, &st, &keep);
    let emap = subindex_map(dims, &st, &env);
    let dk = kmap.len();
    let mut out = CMatrix::zeros(dk, dk);
    let m = rho.matrix();
    for (a, &ka) in kmap.iter().enumerate() {
        for (b, &kb) in kmap.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &e in &emap {
                acc += m[(ka + e, kb + e)];
            }
            out[(a, b)] = acc;
        }
    }
    let new_dims: Vec<usize> = keep.iter().map(|&f| dims[f]).collect();
    Ok(DensityMatrix::trusted(out, new_dims))
}

/// Transposes the factors in `block`, leaving the rest untouched.  The
/// result is Hermitian with unit trace but generally not positive.
pub fn partial_transpose(rho: &DensityMatrix, block: &[usize]) -> Result<CMatrix> {
    let dims = rho.dims();
    let block = checked_subset(dims, block)?;
    let rest: Vec<usize> = (0..dims.len()).filter(|f| !block.contains(f)).collect();
    let st = strides(dims);
    let tmap = subindex_map(dims, &st, &block);
    let omap = subindex_map(dims, &st, &rest);
    let d = rho.dim();
    let mut out = CMatrix::zeros(d, d);
    let m = rho.matrix();
    for &oa in &omap {
        for &ob in &omap {
            for &t1 in &tmap {
                for &t2 in &tmap {
                    out[(oa + t1, ob + t2)] = m[(oa + t2, ob + t1)];
                }
            }
        }
    }
    Ok(out)
}

/// Reorders the tensor factors: new factor `j` is old factor `perm[j]`.
pub fn permute_factors(rho: &DensityMatrix, perm: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims();
    let n = dims.len();
    if perm.len() != n {
        return Err(Error::subset(format!(
            "permutation has {} entries for {} factors",
            perm.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::subset(format!("invalid permutation {perm:?}")));
        }
        seen[p] = true;
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let old_st = strides(dims);
    // Enumerating `perm` in listed order against the original dims walks the
    // new composite index while accumulating the matching old flat index.
    let map = subindex_map(dims, &old_st, perm);
    let d = rho.dim();
    let m = rho.matrix();
    let mut out = CMatrix::zeros(d, d);
    for (i, &oi) in map.iter().enumerate() {
        for (j, &oj) in map.iter().enumerate() {
            out[(i, j)] = m[(oi, oj)];
        }
    }
    Ok(DensityMatrix::trusted(out, new_dims))
}

/// Groups the factors of `rho` into the blocks of `partition`: factors are
/// permuted into concatenated block order and each block becomes one factor.
pub fn merge_blocks(rho: &DensityMatrix, partition: &PartitionScheme) -> Result<DensityMatrix> {
    partition.validate_for(rho.dims())?;
    let perm: Vec<usize> = partition.blocks().iter().flatten().copied().collect();
    let block_dims = partition.block_dims(rho.dims())?;
    let permuted = permute_factors(rho, &perm)?;
    permuted.with_dims(block_dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
    }

    fn bell_phi_plus() -> DensityMatrix {
        // (|00> + |11>)/sqrt(2)
        let mut m = CMatrix::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(i, j)] = c(0.5, 0.0);
        }
        DensityMatrix::new(m, vec![2, 2]).unwrap()
    }

    #[test]
    fn kron_pauli_z_pair() {
        let z = pauli_z();
        let zz = kron(&z, &z).unwrap();
        assert_eq!(zz.nrows(), 4);
        for i in 0..4 {
            let expect = if i == 0 || i == 3 { 1.0 } else { -1.0 };
            assert_relative_eq!(zz[(i, i)].re, expect);
        }
    }

    #[test]
    fn kron_respects_dimension_cap() {
        let a = CMatrix::identity(64, 64);
        let b = CMatrix::identity(65, 65);
        assert!(matches!(kron(&a, &b), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let rho = bell_phi_plus();
        for keep in [&[0usize][..], &[1usize][..]] {
            let red = partial_trace(&rho, keep).unwrap();
            assert_eq!(red.dims(), &[2]);
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { 0.5 } else { 0.0 };
                    assert_relative_eq!(red.matrix()[(i, j)].re, expect, epsilon = 1e-12);
                    assert_relative_eq!(red.matrix()[(i, j)].im, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn partial_trace_recovers_product_factors() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)],
        );
        let b = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.5, 0.0),
                c(0.0, 0.1),
                c(0.0, 0.0),
                c(0.0, -0.1),
                c(0.3, 0.0),
                c(0.05, 0.0),
                c(0.0, 0.0),
                c(0.05, 0.0),
                c(0.2, 0.0),
            ],
        );
        let rho = DensityMatrix::new(kron(&a, &b).unwrap(), vec![2, 3]).unwrap();
        let ra = partial_trace(&rho, &[0]).unwrap();
        let rb = partial_trace(&rho, &[1]).unwrap();
        assert_relative_eq!((ra.matrix() - &a).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((rb.matrix() - &b).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_keep_order_is_ascending() {
        let plus = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)],
        );
        let zd = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let rho = DensityMatrix::new(
            kron(&kron(&zd, &plus).unwrap(), &CMatrix::identity(2, 2).scale(0.5)).unwrap(),
            vec![2, 2, 2],
        )
        .unwrap();
        // keep passed out of order must still give factors (0, 1) in order
        let red = partial_trace(&rho, &[1, 0]).unwrap();
        let expect = kron(&zd, &plus).unwrap();
        assert_relative_eq!((red.matrix() - &expect).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_subsets() {
        let rho = bell_phi_plus();
        assert!(matches!(
            partial_trace(&rho, &[]),
            Err(Error::InvalidSubset { .. })
        ));
        assert!(matches!(
            partial_trace(&rho, &[2]),
            Err(Error::InvalidSubset { .. })
        ));
        assert!(matches!(
            partial_trace(&rho, &[0, 0]),
            Err(Error::InvalidSubset { .. })
        ));
    }

    #[test]
    fn partial_transpose_of_bell_state_has_negative_eigenvalue() {
        let rho = bell_phi_plus();
        let pt = partial_transpose(&rho, &[1]).unwrap();
        let (vals, _) = eigh(&pt).unwrap();
        assert_relative_eq!(vals[0], -0.5, epsilon = 1e-12);
        for v in &vals[1..] {
            assert_relative_eq!(*v, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn partial_transpose_is_an_involution() {
        let rho = bell_phi_plus();
        let pt = partial_transpose(&rho, &[0]).unwrap();
        let back = partial_transpose(
            &DensityMatrix::trusted(pt, vec![2, 2]),
            &[0],
        )
        .unwrap();
        assert_relative_eq!((&back - rho.matrix()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn full_partial_transpose_is_plain_transpose() {
        let rho = bell_phi_plus();
        let pt = partial_transpose(&rho, &[0, 1]).unwrap();
        assert_relative_eq!((&pt - rho.matrix().transpose()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eigh_matches_known_spectrum() {
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let (vals, vecs) = eigh(&x).unwrap();
        assert_relative_eq!(vals[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-12);
        // reconstruction
        let mut rec = CMatrix::zeros(2, 2);
        for (k, &val) in vals.iter().enumerate() {
            let v = vecs.column(k);
            rec += (v * v.adjoint()).scale(val);
        }
        assert_relative_eq!((&rec - &x).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        assert!(matches!(eigh(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn validate_density_flags_each_defect() {
        let good = CMatrix::identity(2, 2).scale(0.5);
        assert!(validate_density(good.clone(), vec![2]).is_ok());

        let bad_trace = CMatrix::identity(2, 2).scale(0.45);
        assert!(matches!(
            validate_density(bad_trace, vec![2]),
            Err(Error::TraceNotOne { .. })
        ));

        let mut non_herm = good.clone();
        non_herm[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(
            validate_density(non_herm, vec![2]),
            Err(Error::NotHermitian { .. })
        ));

        let neg = CMatrix::from_row_slice(
            2,
            2,
            &[c(1.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)],
        );
        assert!(matches!(
            validate_density(neg, vec![2]),
            Err(Error::NotPsd { .. })
        ));

        assert!(matches!(
            validate_density(good.clone(), vec![3]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            validate_density(good.clone(), vec![1, 2]),
            Err(Error::InvalidDimension { .. })
        ));
        assert!(matches!(
            validate_density(good, vec![64, 65]),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn permute_factors_swaps_product_states() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.8, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.2, 0.0)],
        );
        let b = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.6, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.3, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.1, 0.0),
            ],
        );
        let ab = DensityMatrix::new(kron(&a, &b).unwrap(), vec![2, 3]).unwrap();
        let ba = permute_factors(&ab, &[1, 0]).unwrap();
        assert_eq!(ba.dims(), &[3, 2]);
        let expect = kron(&b, &a).unwrap();
        assert_relative_eq!((ba.matrix() - &expect).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn merge_blocks_reorders_and_groups() {
        let a = CMatrix::identity(2, 2).scale(0.5);
        let b = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.5, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.25, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.25, 0.0),
            ],
        );
        let cm = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.9, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.1, 0.0)],
        );
        let rho = DensityMatrix::new(
            kron(&kron(&a, &b).unwrap(), &cm).unwrap(),
            vec![2, 3, 2],
        )
        .unwrap();
        let part = PartitionScheme::parse("0,2|1", 3).unwrap();
        let merged = merge_blocks(&rho, &part).unwrap();
        assert_eq!(merged.dims(), &[4, 3]);
        let expect = kron(&kron(&a, &cm).unwrap(), &b).unwrap();
        assert_relative_eq!((merged.matrix() - &expect).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partition_parsing_and_display_round_trip() {
        let p = PartitionScheme::parse("2,0|1|3", 4).unwrap();
        assert_eq!(p.k(), 3);
        assert_eq!(p.blocks()[0], vec![0, 2]);
        assert_eq!(p.to_string(), "0,2|1|3");
        let again = PartitionScheme::parse(&p.to_string(), 4).unwrap();
        assert_eq!(p, again);

        assert!(PartitionScheme::parse("0|1|1", 3).is_err());
        assert!(PartitionScheme::parse("0|2", 3).is_err());
        assert!(PartitionScheme::parse("0|x", 2).is_err());
        assert!(PartitionScheme::parse("", 1).is_err());
    }

    #[test]
    fn partition_enumeration_matches_bell_numbers() {
        assert_eq!(PartitionScheme::all_partitions(1).len(), 1);
        assert_eq!(PartitionScheme::all_partitions(3).len(), 5);
        assert_eq!(PartitionScheme::all_partitions(4).len(), 15);
        for p in PartitionScheme::all_partitions(4) {
            assert!(PartitionScheme::new(p.blocks().to_vec(), 4).is_ok());
        }
    }

    #[test]
    fn block_dims_follow_partition() {
        let p = PartitionScheme::parse("0,1|2", 3).unwrap();
        assert_eq!(p.block_dims(&[2, 3, 2]).unwrap(), vec![6, 2]);
        assert!(p.block_dims(&[2, 2]).is_err());
    }
}
