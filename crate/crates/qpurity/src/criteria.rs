//! Separability and nonlocality criteria built on correlation-tensor norms.
//!
//! Every test reduces to comparing a scalar against a threshold.  The
//! separability family bounds the full-support tensor norm by
//! `prod_g (d_g - 1)` for states separable across a k-block partition; the
//! same bound re-expressed through subsystem uncertainties is the
//! `delta_tilde` form, and through order-2 Renyi entropies the entropic
//! form.  Nonlocality tests cover the two-qubit CHSH bound through the
//! correlation matrix and the partial-sum bound for n qubits.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat::{partial_trace, DensityMatrix, PartitionScheme};
use crate::purity::{
    kahan_sum, reduced_purities, renyi2, tnorm2_from_purities, total_uncertainty_from_purities,
    PurityMap,
};
use crate::tensor::{corr_tensor, CorrelationTensor};

/// Margin inside which a value sitting on a threshold counts as satisfied.
pub const VERDICT_TIE_TOL: f64 = 1e-12;

/// Outcome of a threshold comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// The bound is exceeded beyond the tie margin.
    Violated,
    /// The bound holds (or the value sits within the tie margin).
    Satisfied,
    /// The test does not apply to the given partition.
    Inapplicable,
}

/// `Violated` iff `value > threshold + VERDICT_TIE_TOL`.
pub fn verdict_above(value: f64, threshold: f64) -> Verdict {
    if value > threshold + VERDICT_TIE_TOL {
        Verdict::Violated
    } else {
        Verdict::Satisfied
    }
}

/// Separability threshold on the full-support squared norm.
pub fn threshold_norm(block_dims: &[usize]) -> f64 {
    block_dims.iter().map(|&d| (d - 1) as f64).product()
}

/// The alternating uncertainty combination
/// `sum_S (-1)^{k-|S|} d_S (1 - P^S)` over nonempty block subsets; it is
/// nonnegative for every state separable across the partition and equals
/// `prod_g (d_g - 1) - ||t||^2` identically.
pub fn ksep_delta_tilde(pm: &PurityMap) -> f64 {
    let k = pm.k();
    let full = (1usize << k) - 1;
    kahan_sum((1..=full).map(|mask| {
        let sign = if (k - mask.count_ones() as usize) % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        sign * pm.subset_dim(mask) as f64 * (1.0 - pm.get_mask(mask).unwrap())
    }))
}

/// The same combination with every purity routed through the order-2 Renyi
/// entropy and back (`P -> exp(-S2)`); numerically equivalent, exposed to
/// check the entropic reformulation.
pub fn entropic_form(pm: &PurityMap) -> Result<f64> {
    let k = pm.k();
    let full = (1usize << k) - 1;
    let mut terms = Vec::with_capacity(full);
    for mask in 1..=full {
        let sign = if (k - mask.count_ones() as usize) % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        let s2 = renyi2(pm.get_mask(mask).unwrap())?;
        terms.push(sign * pm.subset_dim(mask) as f64 * (1.0 - (-s2).exp()));
    }
    Ok(kahan_sum(terms))
}

/// Full record of the separability analysis for one partition.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    /// Partition in `"0,1|2"` notation.
    pub partition: String,
    pub block_dims: Vec<usize>,
    /// Purity of each nonempty block subset, keyed by block indices.
    pub purities: BTreeMap<String, f64>,
    /// Full-support squared norm computed from tensor entries.
    pub tnorm2_direct: f64,
    /// The same norm from the alternating purity sum.
    pub tnorm2_from_purities: f64,
    /// Separability threshold `prod_g (d_g - 1)`.
    pub threshold: f64,
    /// Alternating uncertainty combination; negative detects entanglement.
    pub delta_tilde: f64,
    /// `delta_tilde` recomputed through Renyi-2 entropies.
    pub entropic: f64,
    /// Number of full-support generator products and their variance budget.
    pub uncertainty_terms: f64,
    pub uncertainty_total: f64,
    /// Named verdicts: `ksep` (purity route), `ksep_norm` (tensor route),
    /// `ksep_entropic`.
    pub verdicts: BTreeMap<String, Verdict>,
    /// Largest imaginary residue seen while building the tensor.
    pub max_imag_residue: f64,
}

/// Runs the separability analysis of `rho` across `partition`, evaluating
/// both norm routes, the uncertainty form and the entropic form.
pub fn ksep_verdict(rho: &DensityMatrix, partition: &PartitionScheme) -> Result<CriterionReport> {
    let t = corr_tensor(rho, partition)?;
    let pm = reduced_purities(rho, partition)?;
    let block_dims = partition.block_dims(rho.dims())?;
    let tnorm2_direct = t.full_support_norm2();
    let tnorm2_purity = tnorm2_from_purities(&pm);
    let threshold = threshold_norm(&block_dims);
    let delta = ksep_delta_tilde(&pm);
    let entropic = entropic_form(&pm)?;
    let budget = total_uncertainty_from_purities(&pm);

    let mut purities = BTreeMap::new();
    let k = partition.k();
    for mask in 1usize..(1 << k) {
        let blocks: Vec<String> = (0..k)
            .filter(|l| mask & (1 << l) != 0)
            .map(|l| l.to_string())
            .collect();
        purities.insert(blocks.join(","), pm.get_mask(mask).unwrap());
    }

    let mut verdicts = BTreeMap::new();
    verdicts.insert("ksep".to_string(), verdict_above(-delta, 0.0));
    verdicts.insert(
        "ksep_norm".to_string(),
        verdict_above(tnorm2_direct, threshold),
    );
    verdicts.insert("ksep_entropic".to_string(), verdict_above(-entropic, 0.0));

    Ok(CriterionReport {
        partition: partition.to_string(),
        block_dims,
        purities,
        tnorm2_direct,
        tnorm2_from_purities: tnorm2_purity,
        threshold,
        delta_tilde: delta,
        entropic,
        uncertainty_terms: budget.n_terms as f64,
        uncertainty_total: budget.total,
        verdicts,
        max_imag_residue: t.max_imag_residue(),
    })
}

/// CHSH analysis of a two-qubit pair through its correlation matrix.
#[derive(Clone, Debug, Serialize)]
pub struct ChshOutcome {
    /// Eigenvalues of `T^t T` in descending order.
    pub u: [f64; 3],
    /// `u1 + u2`; above 1 a CHSH violation is possible.
    pub value: f64,
    pub verdict: Verdict,
    /// Two-qubit uncertainty excess `1 - ||T||_F^2 = 1 - (u1 + u2 + u3)`.
    pub rest: f64,
    /// The equivalent purity-form test `-rest > u3`.
    pub rest_verdict: Verdict,
}

/// Evaluates the CHSH bound for the reduced pair on `block_a` and
/// `block_b`; both factor subsets must reduce to qubits.
pub fn chsh_horodecki(
    rho: &DensityMatrix,
    block_a: &[usize],
    block_b: &[usize],
) -> Result<ChshOutcome> {
    for &f in block_a {
        if block_b.contains(&f) {
            return Err(Error::subset(format!("factor {f} in both blocks")));
        }
    }
    let mut union: Vec<usize> = block_a.iter().chain(block_b).copied().collect();
    union.sort_unstable();
    let reduced = partial_trace(rho, &union)?;
    let pos = |fs: &[usize]| -> Vec<usize> {
        fs.iter()
            .map(|f| union.iter().position(|u| u == f).unwrap())
            .collect()
    };
    let partition = PartitionScheme::new(vec![pos(block_a), pos(block_b)], union.len())?;
    let t = corr_tensor(&reduced, &partition)?;
    let m = t.two_qubit_matrix()?;
    let gram = m.transpose() * m;
    let eig = nalgebra::linalg::SymmetricEigen::new(gram);
    let mut u = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    u.sort_by(|a, b| b.total_cmp(a));
    let value = u[0] + u[1];
    let rest = 1.0 - (u[0] + u[1] + u[2]);
    Ok(ChshOutcome {
        u,
        value,
        verdict: verdict_above(value, 1.0),
        rest,
        rest_verdict: verdict_above(-rest, u[2]),
    })
}

/// Genuine-multipartite test for three equal-dimensional blocks.
#[derive(Clone, Debug, Serialize)]
pub struct GmeOutcome {
    /// Full-support squared norm from tensor entries.
    pub tnorm2: f64,
    /// The same through purities:
    /// `d^3 P^(123) - d^2 sum P^(ij) + d sum P^(i) - 1`.
    pub purity_form: f64,
    /// Biseparability bound `8 (d - 1)(d^2 - 1) / d^3`.
    pub bound: f64,
    /// `Violated` when the bound is exceeded, i.e. genuine tripartite
    /// entanglement is detected.
    pub verdict: Verdict,
}

/// Checks the tripartite bound; `partition` must have exactly three blocks
/// of one common dimension.
pub fn gme_three_qudit_check(
    rho: &DensityMatrix,
    partition: &PartitionScheme,
) -> Result<GmeOutcome> {
    let block_dims = partition.block_dims(rho.dims())?;
    if block_dims.len() != 3 {
        return Err(Error::inapplicable(format!(
            "needs exactly 3 blocks, got {}",
            block_dims.len()
        )));
    }
    let d = block_dims[0];
    if block_dims.iter().any(|&b| b != d) {
        return Err(Error::inapplicable(format!(
            "needs equal block dimensions, got {block_dims:?}"
        )));
    }
    let df = d as f64;
    let bound = 8.0 * (df - 1.0) * (df * df - 1.0) / (df * df * df);
    let t = corr_tensor(rho, partition)?;
    let pm = reduced_purities(rho, partition)?;
    let purity_form = tnorm2_from_purities(&pm);
    Ok(GmeOutcome {
        tnorm2: t.full_support_norm2(),
        purity_form,
        bound,
        verdict: verdict_above(purity_form, bound),
    })
}

/// Two orthonormal measurement axes for one qubit, rows in generator space.
pub type QubitFrame = [[f64; 3]; 2];

/// The canonical frame: the first two generator axes.
pub fn standard_frames(k: usize) -> Vec<QubitFrame> {
    vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]; k]
}

fn check_frame(frame: &QubitFrame) -> Result<()> {
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    for row in frame {
        if (dot(row, row) - 1.0).abs() > 1e-10 {
            return Err(Error::frame(format!("axis {row:?} is not unit length")));
        }
    }
    if dot(&frame[0], &frame[1]).abs() > 1e-10 {
        return Err(Error::frame(format!(
            "axes {:?} and {:?} are not orthogonal",
            frame[0], frame[1]
        )));
    }
    Ok(())
}

/// Sum of squared correlation entries over two orthonormal axes per qubit:
/// `sum_{m in {1,2}^k} (t contracted with the chosen axes)^2`.  Above 1 the
/// state can violate a two-setting correlation Bell inequality; the value
/// never exceeds the full-support squared norm.
pub fn bell_partial_sum(t: &CorrelationTensor, frames: &[QubitFrame]) -> Result<f64> {
    let k = t.k();
    if t.block_dims().iter().any(|&d| d != 2) {
        return Err(Error::mismatch(format!(
            "partial sum needs qubit blocks, got {:?}",
            t.block_dims()
        )));
    }
    if frames.len() != k {
        return Err(Error::frame(format!(
            "{} frames for {} qubit blocks",
            frames.len(),
            k
        )));
    }
    for frame in frames {
        check_frame(frame)?;
    }
    // contract the 3^k full-support block mode by mode down to 2^k
    let mut cur = t.full_support_values();
    let mut right: usize = 3usize.pow(k as u32);
    let mut left = 1usize;
    for frame in frames {
        right /= 3;
        let mut next = vec![0.0f64; left * 2 * right];
        for lft in 0..left {
            for (mi, axis) in frame.iter().enumerate() {
                for r in 0..right {
                    let mut acc = 0.0;
                    for (i, &a) in axis.iter().enumerate() {
                        acc += a * cur[(lft * 3 + i) * right + r];
                    }
                    next[(lft * 2 + mi) * right + r] = acc;
                }
            }
        }
        cur = next;
        left *= 2;
    }
    Ok(cur.iter().map(|v| v * v).sum())
}

/// Rotation pair diagonalizing a two-qubit correlation matrix.
#[derive(Clone, Debug)]
pub struct TDiagonalization {
    /// Left proper rotation `O1` (determinant +1).
    pub left: Matrix3<f64>,
    /// Right proper rotation `O2` (determinant +1).
    pub right: Matrix3<f64>,
    /// Diagonal of `O1^t T O2`, moduli in descending order; at most the
    /// last entry carries the sign needed to keep both rotations proper.
    pub diagonal: [f64; 3],
}

/// Diagonalizes `T = O1 D O2^t` with proper rotations on both sides by
/// folding any reflection from the SVD into the smallest singular value.
pub fn t_diagonalize(t: &Matrix3<f64>) -> TDiagonalization {
    let svd = t.svd(true, true);
    let u = svd.u.expect("3x3 SVD always yields u");
    let vt = svd.v_t.expect("3x3 SVD always yields v_t");
    let v = vt.transpose();
    let s: Vector3<f64> = svd.singular_values;
    let su = if u.determinant() < 0.0 { -1.0 } else { 1.0 };
    let sv = if v.determinant() < 0.0 { -1.0 } else { 1.0 };
    let mut left = u;
    let mut right = v;
    for i in 0..3 {
        left[(i, 2)] *= su;
        right[(i, 2)] *= sv;
    }
    let diagonal = [s[0], s[1], s[2] * su * sv];
    TDiagonalization {
        left,
        right,
        diagonal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{CMatrix, DensityMatrix};
    use crate::states::{bell_state, ghz_state, werner, BellState};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn tie_margin_reports_satisfied() {
        assert_eq!(verdict_above(1.0 + 5e-13, 1.0), Verdict::Satisfied);
        assert_eq!(verdict_above(1.0 - 5e-13, 1.0), Verdict::Satisfied);
        assert_eq!(verdict_above(1.0 + 1e-11, 1.0), Verdict::Violated);
    }

    #[test]
    fn bell_state_is_detected_by_all_routes() {
        let rho = bell_state(BellState::PhiPlus);
        let report = ksep_verdict(&rho, &PartitionScheme::singletons(2)).unwrap();
        assert_relative_eq!(report.threshold, 1.0);
        assert_relative_eq!(report.tnorm2_direct, 3.0, epsilon = 1e-12);
        assert_relative_eq!(report.tnorm2_from_purities, 3.0, epsilon = 1e-12);
        assert_relative_eq!(report.delta_tilde, -2.0, epsilon = 1e-12);
        assert!((report.entropic - report.delta_tilde).abs() < 1e-12);
        for key in ["ksep", "ksep_norm", "ksep_entropic"] {
            assert_eq!(report.verdicts[key], Verdict::Violated, "{key}");
        }
        assert_relative_eq!(report.uncertainty_terms, 9.0);
        assert_relative_eq!(report.uncertainty_total, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn maximally_mixed_states_satisfy_everything() {
        let rho = DensityMatrix::new(CMatrix::identity(8, 8).scale(1.0 / 8.0), vec![2, 2, 2])
            .unwrap();
        let report = ksep_verdict(&rho, &PartitionScheme::singletons(3)).unwrap();
        assert_relative_eq!(report.delta_tilde, 1.0, epsilon = 1e-12);
        assert_relative_eq!(report.tnorm2_direct, 0.0, epsilon = 1e-12);
        for v in report.verdicts.values() {
            assert_eq!(*v, Verdict::Satisfied);
        }
    }

    #[test]
    fn werner_criterion_flips_at_the_known_weight() {
        let below = werner(0.55, BellState::PsiMinus).unwrap();
        let r1 = ksep_verdict(&below, &PartitionScheme::singletons(2)).unwrap();
        assert_eq!(r1.verdicts["ksep"], Verdict::Satisfied);
        let above = werner(0.6, BellState::PsiMinus).unwrap();
        let r2 = ksep_verdict(&above, &PartitionScheme::singletons(2)).unwrap();
        assert_eq!(r2.verdicts["ksep"], Verdict::Violated);
        // delta for Werner weight w is 1 - 3 w^2
        assert_relative_eq!(r2.delta_tilde, 1.0 - 3.0 * 0.36, epsilon = 1e-12);
    }

    #[test]
    fn chsh_outcome_on_werner_states() {
        let hot = werner(0.8, BellState::PsiMinus).unwrap();
        let o = chsh_horodecki(&hot, &[0], &[1]).unwrap();
        assert_relative_eq!(o.value, 2.0 * 0.64, epsilon = 1e-12);
        assert_eq!(o.verdict, Verdict::Violated);
        assert_eq!(o.rest_verdict, Verdict::Violated);
        assert_relative_eq!(o.rest, 1.0 - 3.0 * 0.64, epsilon = 1e-12);

        let cold = werner(0.6, BellState::PsiMinus).unwrap();
        let o = chsh_horodecki(&cold, &[0], &[1]).unwrap();
        assert_eq!(o.verdict, Verdict::Satisfied);
        assert_eq!(o.rest_verdict, Verdict::Satisfied);

        assert!(chsh_horodecki(&hot, &[0], &[0]).is_err());
    }

    #[test]
    fn ghz_exceeds_the_tripartite_bound() {
        let rho = ghz_state(3).unwrap();
        let part = PartitionScheme::singletons(3);
        let out = gme_three_qudit_check(&rho, &part).unwrap();
        assert_relative_eq!(out.bound, 3.0, epsilon = 1e-12);
        assert_relative_eq!(out.tnorm2, 4.0, epsilon = 1e-12);
        assert_relative_eq!(out.purity_form, 4.0, epsilon = 1e-12);
        assert_eq!(out.verdict, Verdict::Violated);
    }

    #[test]
    fn qutrit_triple_bound_and_detection() {
        // (|000> + |111> + |222>)/sqrt(3) on [3, 3, 3]
        let d = 27;
        let mut m = CMatrix::zeros(d, d);
        let idx = [0usize, 13, 26];
        for &i in &idx {
            for &j in &idx {
                m[(i, j)] = Complex64::new(1.0 / 3.0, 0.0);
            }
        }
        let rho = DensityMatrix::new(m, vec![3, 3, 3]).unwrap();
        let out = gme_three_qudit_check(&rho, &PartitionScheme::singletons(3)).unwrap();
        assert_relative_eq!(out.bound, 128.0 / 27.0, epsilon = 1e-12);
        assert_relative_eq!(out.purity_form, 20.0, epsilon = 1e-10);
        assert_relative_eq!(out.tnorm2, 20.0, epsilon = 1e-10);
        assert_eq!(out.verdict, Verdict::Violated);
    }

    #[test]
    fn tripartite_test_rejects_wrong_partitions() {
        let rho = bell_state(BellState::PhiPlus);
        assert!(matches!(
            gme_three_qudit_check(&rho, &PartitionScheme::singletons(2)),
            Err(Error::Inapplicable { .. })
        ));
        let mixed = DensityMatrix::new(
            CMatrix::identity(12, 12).scale(1.0 / 12.0),
            vec![2, 3, 2],
        )
        .unwrap();
        assert!(matches!(
            gme_three_qudit_check(&mixed, &PartitionScheme::singletons(3)),
            Err(Error::Inapplicable { .. })
        ));
    }

    #[test]
    fn partial_sum_on_bell_state() {
        let rho = bell_state(BellState::PhiPlus);
        let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
        let v = bell_partial_sum(&t, &standard_frames(2)).unwrap();
        // t_11^2 + t_22^2 = 1 + 1
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
        assert!(v <= t.full_support_norm2() + 1e-12);
    }

    #[test]
    fn diagonalizing_frames_reproduce_the_chsh_value() {
        let rho = werner(0.9, BellState::PsiPlus).unwrap();
        let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
        let m = t.two_qubit_matrix().unwrap();
        let diag = t_diagonalize(&m);
        let frames = [
            [
                [diag.left[(0, 0)], diag.left[(1, 0)], diag.left[(2, 0)]],
                [diag.left[(0, 1)], diag.left[(1, 1)], diag.left[(2, 1)]],
            ],
            [
                [diag.right[(0, 0)], diag.right[(1, 0)], diag.right[(2, 0)]],
                [diag.right[(0, 1)], diag.right[(1, 1)], diag.right[(2, 1)]],
            ],
        ];
        let partial = bell_partial_sum(&t, &frames).unwrap();
        let chsh = chsh_horodecki(&rho, &[0], &[1]).unwrap();
        assert_relative_eq!(partial, chsh.value, epsilon = 1e-10);
    }

    #[test]
    fn frames_are_validated() {
        let rho = bell_state(BellState::PhiPlus);
        let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
        let bad_len = [[[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]]; 2];
        assert!(matches!(
            bell_partial_sum(&t, &bad_len),
            Err(Error::InvalidFrame { .. })
        ));
        let not_orth = [[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]; 2];
        assert!(matches!(
            bell_partial_sum(&t, &not_orth),
            Err(Error::InvalidFrame { .. })
        ));
        assert!(matches!(
            bell_partial_sum(&t, &standard_frames(3)),
            Err(Error::InvalidFrame { .. })
        ));
    }

    #[test]
    fn diagonalization_handles_reflections() {
        let m = Matrix3::new(2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -3.0);
        let out = t_diagonalize(&m);
        assert_relative_eq!(out.left.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.right.determinant(), 1.0, epsilon = 1e-12);
        let rec = out.left.transpose() * m * out.right;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { out.diagonal[i] } else { 0.0 };
                assert_relative_eq!(rec[(i, j)], expect, epsilon = 1e-12);
            }
        }
        // moduli descending
        assert!(out.diagonal[0].abs() >= out.diagonal[1].abs());
        assert!(out.diagonal[1].abs() >= out.diagonal[2].abs());
        // the product of the diagonal keeps the original determinant sign
        let prod: f64 = out.diagonal.iter().product();
        assert_relative_eq!(prod, m.determinant(), epsilon = 1e-10);
    }
}
