//! Self-validation: every identity the library computes by more than one
//! route is cross-checked on seeded random ensembles and on reference
//! states with known closed-form values.
//!
//! The report lists one suite per theme with its assertion count and any
//! failure messages; an empty failure list across all suites means the
//! build's numerics are internally consistent.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::Serialize;

use crate::basis::{casimir_check, orthogonality_check};
use crate::criteria::{
    bell_partial_sum, chsh_horodecki, ksep_delta_tilde, standard_frames, t_diagonalize,
    threshold_norm, Verdict,
};
use crate::error::{Error, Result};
use crate::experiments::{
    measurement_costs, mm_reduction_residual, mm_reduction_threshold, qudit_bound_check,
};
use crate::mat::{
    eigh, partial_trace, partial_transpose, validate_density, CMatrix, DensityMatrix,
    PartitionScheme,
};
use crate::purity::{
    purity, reduced_purities, tnorm2_from_purities, total_uncertainty_direct,
    total_uncertainty_from_purities, rs_check_single_qubit, uncertainty_sums_two_qubit,
};
use crate::states::{
    bd_state, bell_state, ghz_state, negativity, noisy_ghz, random_fixed_purity, random_mixed,
    werner, BellState, MixedEnsemble, RngSeed,
};
use crate::tensor::{corr_tensor, decomposition_check};

/// One validation suite: a theme, how many checks ran, what failed.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub assertions: usize,
    pub failures: Vec<String>,
}

/// Outcome of the full self-validation run.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub seed: RngSeed,
    pub samples: usize,
    pub suites: Vec<SuiteOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.failures.is_empty())
    }

    pub fn total_assertions(&self) -> usize {
        self.suites.iter().map(|s| s.assertions).sum()
    }

    pub fn total_failures(&self) -> usize {
        self.suites.iter().map(|s| s.failures.len()).sum()
    }
}

#[derive(Default)]
struct Checker {
    assertions: usize,
    failures: Vec<String>,
}

/// True when `value <= tol`; a NaN comparison counts as out of bounds.
fn within(value: f64, tol: f64) -> bool {
    matches!(
        value.partial_cmp(&tol),
        Some(Ordering::Less | Ordering::Equal)
    )
}

impl Checker {
    fn below(&mut self, what: &str, value: f64, tol: f64) {
        self.assertions += 1;
        if !within(value, tol) {
            self.failures
                .push(format!("{what}: {value:.3e} exceeds {tol:.1e}"));
        }
    }

    fn close(&mut self, what: &str, value: f64, expect: f64, tol: f64) {
        self.assertions += 1;
        let dev = (value - expect).abs();
        if !within(dev, tol) {
            self.failures
                .push(format!("{what}: {value:.12} vs {expect:.12} (dev {dev:.3e})"));
        }
    }

    fn holds(&mut self, what: &str, ok: bool) {
        self.assertions += 1;
        if !ok {
            self.failures.push(format!("{what}: failed"));
        }
    }
}

fn run_suite(
    suites: &mut Vec<SuiteOutcome>,
    name: &str,
    f: impl FnOnce(&mut Checker) -> Result<()>,
) {
    let mut c = Checker::default();
    if let Err(e) = f(&mut c) {
        c.failures.push(format!("aborted: {e}"));
    }
    suites.push(SuiteOutcome {
        name: name.to_string(),
        assertions: c.assertions,
        failures: c.failures,
    });
}

/// Runs all suites with `samples` random states per ensemble.
pub fn run_validation(seed: RngSeed, samples: usize) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(Error::parameter("need at least one sample per ensemble"));
    }
    let mut suites = Vec::new();
    run_suite(&mut suites, "generator_bases", suite_generator_bases);
    run_suite(&mut suites, "norm_identities", |c| {
        suite_norm_identities(c, seed, samples)
    });
    run_suite(&mut suites, "uncertainty_budgets", |c| {
        suite_uncertainty_budgets(c, seed, samples)
    });
    run_suite(&mut suites, "single_qubit_identities", |c| {
        suite_single_qubit(c, seed, samples)
    });
    run_suite(&mut suites, "reference_states", suite_reference_states);
    run_suite(&mut suites, "chsh_and_frames", |c| {
        suite_chsh_frames(c, seed, samples)
    });
    run_suite(&mut suites, "samplers", |c| suite_samplers(c, seed, samples));
    Ok(ValidationReport {
        seed,
        samples,
        suites,
    })
}

fn suite_generator_bases(c: &mut Checker) -> Result<()> {
    for d in 2..=6 {
        c.below(
            &format!("orthogonality d={d}"),
            orthogonality_check(d)?,
            1e-10,
        );
        c.below(&format!("casimir d={d}"), casimir_check(d)?, 1e-10);
    }
    Ok(())
}

fn suite_norm_identities(c: &mut Checker, seed: RngSeed, samples: usize) -> Result<()> {
    let dim_sets: [&[usize]; 4] = [&[2, 2], &[2, 3], &[3, 3], &[2, 2, 2]];
    for (di, &dims) in dim_sets.iter().enumerate() {
        let n = dims.len();
        let d_total: f64 = dims.iter().product::<usize>() as f64;
        let parts = PartitionScheme::all_partitions(n);
        for s in 0..samples {
            let mut rng = seed
                .with_stream(seed.stream + 1000 + (di * samples + s) as u64)
                .rng();
            let rho = random_mixed(dims, MixedEnsemble::HilbertSchmidt, &mut rng)?;
            let p = purity(&rho);
            let t_full = corr_tensor(&rho, &PartitionScheme::singletons(n))?;
            let tag = format!("{dims:?} state {s}");
            c.below(
                &format!("subset decomposition {tag}"),
                decomposition_check(&t_full),
                1e-9,
            );
            c.below(
                &format!("norm-purity link {tag}"),
                (t_full.norm2_total() - d_total * p).abs(),
                1e-9,
            );
            let total_ref = t_full.norm2_total();
            for part in &parts {
                let bd = part.block_dims(dims)?;
                let t_p = corr_tensor(&rho, part)?;
                let pm = reduced_purities(&rho, part)?;
                let full = t_p.full_support_norm2();
                c.below(
                    &format!("purity route {part} {tag}"),
                    (full - tnorm2_from_purities(&pm)).abs(),
                    1e-9,
                );
                c.below(
                    &format!("threshold identity {part} {tag}"),
                    (ksep_delta_tilde(&pm) - (threshold_norm(&bd) - full)).abs(),
                    1e-9,
                );
                c.below(
                    &format!("partition invariance {part} {tag}"),
                    (t_p.norm2_total() - total_ref).abs(),
                    1e-9,
                );
            }
        }
    }
    Ok(())
}

fn suite_uncertainty_budgets(c: &mut Checker, seed: RngSeed, samples: usize) -> Result<()> {
    let dim_sets: [&[usize]; 3] = [&[2, 2], &[3, 3], &[2, 2, 2]];
    for (di, &dims) in dim_sets.iter().enumerate() {
        let n = dims.len();
        let part = PartitionScheme::singletons(n);
        let n_terms: u128 = dims.iter().map(|&d| (d * d - 1) as u128).product();
        for s in 0..samples {
            let mut rng = seed
                .with_stream(seed.stream + 2000 + (di * samples + s) as u64)
                .rng();
            let rho = random_mixed(dims, MixedEnsemble::HilbertSchmidt, &mut rng)?;
            let pm = reduced_purities(&rho, &part)?;
            let budget = total_uncertainty_from_purities(&pm);
            let direct = total_uncertainty_direct(&rho, &part)?;
            let t = corr_tensor(&rho, &part)?;
            let tag = format!("{dims:?} state {s}");
            c.holds(&format!("term count {tag}"), budget.n_terms == n_terms);
            c.below(
                &format!("budget routes {tag}"),
                (budget.total - direct).abs(),
                1e-8,
            );
            c.below(
                &format!("budget identity {tag}"),
                (budget.total - (n_terms as f64 - t.full_support_norm2())).abs(),
                1e-9,
            );
        }
    }
    Ok(())
}

fn suite_single_qubit(c: &mut Checker, seed: RngSeed, samples: usize) -> Result<()> {
    for s in 0..samples {
        let mut rng = seed.with_stream(seed.stream + 3000 + s as u64).rng();
        let rho = random_mixed(&[2, 2], MixedEnsemble::HilbertSchmidt, &mut rng)?;
        for q in 0..2 {
            for i in 1..=3 {
                for j in 1..=3 {
                    if i != j {
                        c.below(
                            &format!("pair-variance saturation q{q} ({i},{j}) state {s}"),
                            rs_check_single_qubit(&rho, &[q], i, j)?,
                            1e-10,
                        );
                    }
                }
            }
        }
        let sums = uncertainty_sums_two_qubit(&rho, &[0], &[1])?;
        let pa = purity(&partial_trace(&rho, &[0])?);
        let pb = purity(&partial_trace(&rho, &[1])?);
        let pab = purity(&rho);
        c.below(
            &format!("nine-product variance sum state {s}"),
            (sums.all_pairs - (8.0 + 2.0 * pa + 2.0 * pb - 4.0 * pab)).abs(),
            1e-10,
        );
        c.below(
            &format!("single-axis variance sums state {s}"),
            (sums.single_a - (4.0 - 2.0 * pa))
                .abs()
                .max((sums.single_b - (4.0 - 2.0 * pb)).abs()),
            1e-10,
        );
    }
    Ok(())
}

fn suite_reference_states(c: &mut Checker) -> Result<()> {
    // Bell states: diagonal correlation pattern, unit doubled negativity.
    let pair = PartitionScheme::singletons(2);
    for which in [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ] {
        let rho = bell_state(which);
        let m = corr_tensor(&rho, &pair)?.two_qubit_matrix()?;
        let diag = which.correlation_diagonal();
        let mut dev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { diag[i] } else { 0.0 };
                dev = dev.max((m[(i, j)] - expect).abs());
            }
        }
        c.below(&format!("{which} correlation pattern"), dev, 1e-12);
        c.close(
            &format!("{which} doubled negativity"),
            negativity(&rho, &[1])?,
            1.0,
            1e-12,
        );
    }

    // Noise-mixed Bell family boundaries.
    let delta_at = |w: f64| -> Result<f64> {
        let rho = werner(w, BellState::PsiMinus)?;
        Ok(ksep_delta_tilde(&reduced_purities(&rho, &pair)?))
    };
    c.close("criterion boundary weight", delta_at(1.0 / 3.0f64.sqrt())?, 0.0, 1e-12);
    let chsh_at = |w: f64| -> Result<f64> {
        Ok(chsh_horodecki(&werner(w, BellState::PsiMinus)?, &[0], &[1])?.value)
    };
    c.close(
        "two-setting boundary weight",
        chsh_at(std::f64::consts::FRAC_1_SQRT_2)?,
        1.0,
        1e-12,
    );
    let pt_min_at = |w: f64| -> Result<f64> {
        let pt = partial_transpose(&werner(w, BellState::PsiMinus)?, &[1])?;
        Ok(eigh(&pt)?.0[0])
    };
    c.close("positivity boundary weight", pt_min_at(1.0 / 3.0)?, 0.0, 1e-12);
    for (w, p) in [
        (1.0 / 3.0, 1.0 / 3.0),
        (1.0 / 3.0f64.sqrt(), 0.5),
        (std::f64::consts::FRAC_1_SQRT_2, 0.625),
    ] {
        c.close(
            &format!("mixed-Bell purity at weight {w:.7}"),
            purity(&werner(w, BellState::PsiMinus)?),
            p,
            1e-12,
        );
    }

    // Three-qubit GHZ: subset norms and the tripartite bound.
    let ghz = ghz_state(3)?;
    let t = corr_tensor(&ghz, &PartitionScheme::singletons(3))?;
    let buckets = t.norms_by_subset();
    for (mask, expect) in [(1, 0.0), (2, 0.0), (4, 0.0), (3, 1.0), (5, 1.0), (6, 1.0), (7, 4.0)] {
        c.close(
            &format!("ghz3 subset norm mask {mask}"),
            buckets[mask],
            expect,
            1e-12,
        );
    }
    let gme = crate::criteria::gme_three_qudit_check(&ghz, &PartitionScheme::singletons(3))?;
    c.close("ghz3 tripartite bound", gme.bound, 3.0, 1e-12);
    c.holds("ghz3 tripartite verdict", gme.verdict == Verdict::Violated);

    // Three-qutrit GHZ analogue: norm 20 against bound 128/27.
    let mut v = CMatrix::zeros(27, 1);
    let amp = Complex64::new(1.0 / 3.0f64.sqrt(), 0.0);
    for idx in [0, 13, 26] {
        v[(idx, 0)] = amp;
    }
    let rho3 = DensityMatrix::new(&v * v.adjoint(), vec![3, 3, 3])?;
    let gme3 = crate::criteria::gme_three_qudit_check(&rho3, &PartitionScheme::singletons(3))?;
    c.close("qutrit ghz norm", gme3.tnorm2, 20.0, 1e-9);
    c.close("qutrit ghz purity form", gme3.purity_form, 20.0, 1e-9);
    c.close("qutrit ghz bound", gme3.bound, 128.0 / 27.0, 1e-12);
    c.holds("qutrit ghz verdict", gme3.verdict == Verdict::Violated);

    // Noisy GHZ purity formulas.
    for p in [0.0, 0.3, 0.7, 1.0] {
        let rho = noisy_ghz(4, p)?;
        c.close(
            &format!("noisy ghz full purity p={p}"),
            purity(&rho),
            p * p + (1.0 - p * p) / 16.0,
            1e-12,
        );
        let marg = partial_trace(&rho, &[0, 1])?;
        c.close(
            &format!("noisy ghz pair purity p={p}"),
            purity(&marg),
            p * p / 2.0 + (1.0 - p * p) / 4.0,
            1e-12,
        );
    }

    // Diagonal-correlation states: closed-form spectra against the matrix
    // route, on one separable and one entangled point.
    for (t3, label) in [
        ([0.2f64, 0.1, -0.3], "separable point"),
        ([0.9, -0.8, 0.85], "entangled point"),
    ] {
        let rho = bd_state(t3)?;
        let pt = partial_transpose(&rho, &[1])?;
        let matrix_min = eigh(&pt)?.0[0];
        let formula_min = [[1.0, -1.0, 1.0], [-1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [-1.0, -1.0, -1.0]]
            .iter()
            .map(|v| (1.0 + t3[0] * v[0] - t3[1] * v[1] + t3[2] * v[2]) / 4.0)
            .fold(f64::INFINITY, f64::min);
        c.close(
            &format!("diagonal state transpose spectrum ({label})"),
            matrix_min,
            formula_min,
            1e-12,
        );
    }

    // Maximally-mixed-marginal reduction and cost constants.
    for n in 2..=4 {
        let lo = 1.0 / (1u64 << n) as f64;
        let grid = [lo, 0.5 * (lo + 1.0), 1.0];
        c.below(
            &format!("marginal-free reduction n={n}"),
            mm_reduction_residual(n, &grid)?,
            1e-12,
        );
        c.close(
            &format!("reduction threshold n={n}"),
            mm_reduction_threshold(n),
            2.0 * lo,
            0.0,
        );
    }
    let (corr, pur) = measurement_costs(&[2; 6])?;
    c.holds("cost profile six qubits", corr == 729 && pur == 63);
    let (corr, pur) = measurement_costs(&[3, 3])?;
    c.holds("cost profile qutrit pair", corr == 64 && pur == 3);
    c.close("detectability floor 2x2", qudit_bound_check(2, 2)?, 0.5, 1e-15);
    c.close("detectability floor 10x10", qudit_bound_check(10, 10)?, 0.82, 1e-15);
    Ok(())
}

fn suite_chsh_frames(c: &mut Checker, seed: RngSeed, samples: usize) -> Result<()> {
    let pair = PartitionScheme::singletons(2);
    for s in 0..samples {
        let mut rng = seed.with_stream(seed.stream + 4000 + s as u64).rng();
        let rho = random_mixed(&[2, 2], MixedEnsemble::HilbertSchmidt, &mut rng)?;
        let t = corr_tensor(&rho, &pair)?;
        let m = t.two_qubit_matrix()?;
        let chsh = chsh_horodecki(&rho, &[0], &[1])?;
        let diag = t_diagonalize(&m);
        let mut squares: Vec<f64> = diag.diagonal.iter().map(|d| d * d).collect();
        squares.sort_by(|a, b| b.total_cmp(a));
        let worst_uvals = squares
            .iter()
            .zip(chsh.u.iter())
            .map(|(sq, u)| (sq - u).abs())
            .fold(0.0f64, f64::max);
        c.below(
            &format!("gram spectrum vs rotated diagonal state {s}"),
            worst_uvals,
            1e-9,
        );
        let col = |mat: &nalgebra::Matrix3<f64>, j: usize| [mat[(0, j)], mat[(1, j)], mat[(2, j)]];
        let frames = [
            [col(&diag.left, 0), col(&diag.left, 1)],
            [col(&diag.right, 0), col(&diag.right, 1)],
        ];
        let partial = bell_partial_sum(&t, &frames)?;
        c.below(
            &format!("diagonalizing frames reach the gram value state {s}"),
            (partial - chsh.value).abs(),
            1e-9,
        );
        let full = t.full_support_norm2();
        let standard = bell_partial_sum(&t, &standard_frames(2))?;
        c.below(
            &format!("partial sums within the full norm state {s}"),
            (partial - full).max(standard - full),
            1e-12,
        );
        // a two-setting violation implies a norm-criterion violation
        c.holds(
            &format!("two-setting violation implies norm violation state {s}"),
            !(chsh.verdict == Verdict::Violated && full <= 1.0),
        );
    }
    Ok(())
}

fn suite_samplers(c: &mut Checker, seed: RngSeed, samples: usize) -> Result<()> {
    // Fixed-purity construction hits its target exactly across the range.
    let mut rng = seed.with_stream(seed.stream + 5000).rng();
    for (dims, targets) in [
        (vec![2usize, 2], vec![0.25, 0.3, 0.5, 0.8, 0.997, 1.0]),
        (vec![2, 2, 2], vec![0.125, 0.2, 0.6, 0.99]),
    ] {
        for &target in &targets {
            for rep in 0..3 {
                let rho = random_fixed_purity(&dims, target, 1e-12, &mut rng)?;
                c.below(
                    &format!("fixed-purity target {target} {dims:?} draw {rep}"),
                    (purity(&rho) - target).abs(),
                    1e-10,
                );
                c.holds(
                    &format!("fixed-purity state valid {target} {dims:?} draw {rep}"),
                    validate_density(rho.matrix().clone(), dims.clone()).is_ok(),
                );
            }
        }
    }

    // Random ensembles produce valid density matrices.
    for (ei, ensemble) in [MixedEnsemble::HilbertSchmidt, MixedEnsemble::Bures]
        .into_iter()
        .enumerate()
    {
        for s in 0..samples {
            let mut rng = seed
                .with_stream(seed.stream + 6000 + (ei * samples + s) as u64)
                .rng();
            for dims in [&[2usize, 2][..], &[3, 3][..]] {
                let rho = random_mixed(dims, ensemble, &mut rng)?;
                c.holds(
                    &format!("{ensemble} draw valid {dims:?} state {s}"),
                    validate_density(rho.matrix().clone(), dims.to_vec()).is_ok(),
                );
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_run_passes_with_small_samples() {
        let report = run_validation(RngSeed::new(7, 0), 5).unwrap();
        assert!(
            report.passed(),
            "failures: {:?}",
            report
                .suites
                .iter()
                .flat_map(|s| s.failures.iter())
                .collect::<Vec<_>>()
        );
        assert_eq!(report.suites.len(), 7);
        assert!(report.total_assertions() > 50);
        assert_eq!(report.total_failures(), 0);
    }

    #[test]
    fn checker_records_failures() {
        let mut c = Checker::default();
        c.below("fine", 1e-12, 1e-9);
        c.below("bad", 1.0, 1e-9);
        c.close("also bad", 1.0, 2.0, 1e-9);
        c.holds("ok", true);
        assert_eq!(c.assertions, 4);
        assert_eq!(c.failures.len(), 2);
        assert!(c.failures[0].contains("bad"));
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(run_validation(RngSeed::new(1, 0), 0).is_err());
    }
}
