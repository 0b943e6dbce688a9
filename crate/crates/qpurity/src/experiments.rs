//! Sweep and Monte-Carlo drivers with deterministic tabular output.
//!
//! Every driver returns a [`SweepResult`]: a named numeric table plus a JSON
//! metadata object carrying the configuration, derived headline numbers and
//! seed bookkeeping.  Randomized drivers address one RNG stream per work
//! unit (state, chunk), so results do not depend on the worker count and
//! repeated runs are byte-identical.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::criteria::{chsh_horodecki, ksep_delta_tilde, Verdict, VERDICT_TIE_TOL};
use crate::error::{Error, Result};
use crate::mat::{eigh, partial_transpose, PartitionScheme};
use crate::output::{table_paths, write_csv, write_json};
use crate::purity::{purity, reduced_purities, tnorm2_from_purities, PurityMap};
use crate::states::{
    bd_state, negativity, noisy_ghz, random_fixed_purity, random_mixed, werner, BellState,
    MixedEnsemble, RngSeed,
};
use crate::tensor::corr_tensor;

/// One finished sweep: a table and its metadata.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub meta: serde_json::Value,
}

impl SweepResult {
    /// Writes `name.csv` and `name.meta.json` into `dir`, returning both
    /// paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let (csv_path, meta_path) = table_paths(dir, &self.name);
        write_csv(&csv_path, &self.columns, &self.rows)?;
        write_json(&meta_path, &self.meta)?;
        Ok((csv_path, meta_path))
    }
}

/// Sets the global worker-pool size.  Results never depend on it; only
/// wall-clock time does.
pub fn configure_workers(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::parameter("worker count must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::parameter(format!("worker pool: {e}")))
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// CSV-safe partition tag: `0,1|2` becomes `0.1_2`.
fn partition_tag(p: &PartitionScheme) -> String {
    p.to_string().replace(',', ".").replace('|', "_")
}

/// Bisection root of `f` on `[lo, hi]`; `None` without a sign change.
fn bisect<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, f: F, tol: f64) -> Option<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn werner_delta(omega: f64) -> f64 {
    let rho = werner(omega, BellState::PsiMinus).expect("weight in range");
    let pm = reduced_purities(&rho, &PartitionScheme::singletons(2)).expect("valid partition");
    ksep_delta_tilde(&pm)
}

fn werner_chsh_margin(omega: f64) -> f64 {
    let rho = werner(omega, BellState::PsiMinus).expect("weight in range");
    1.0 - chsh_horodecki(&rho, &[0], &[1]).expect("qubit pair").value
}

fn werner_min_pt_eigenvalue(omega: f64) -> f64 {
    let rho = werner(omega, BellState::PsiMinus).expect("weight in range");
    let pt = partial_transpose(&rho, &[1]).expect("valid block");
    let (vals, _) = eigh(&pt).expect("hermitian");
    vals[0]
}

/// Scans the noise-mixed Bell family over a uniform weight grid and locates
/// the entanglement, criterion and CHSH boundaries by bisection.
pub fn werner_sweep(grid: usize) -> Result<SweepResult> {
    if grid < 2 {
        return Err(Error::parameter("grid needs at least 2 points"));
    }
    let part = PartitionScheme::singletons(2);
    let mut rows = Vec::with_capacity(grid);
    for i in 0..grid {
        let omega = i as f64 / (grid - 1) as f64;
        let rho = werner(omega, BellState::PsiMinus)?;
        let report = crate::criteria::ksep_verdict(&rho, &part)?;
        let chsh = chsh_horodecki(&rho, &[0], &[1])?;
        let neg = negativity(&rho, &[1])?;
        rows.push(vec![
            omega,
            purity(&rho),
            report.tnorm2_direct,
            report.tnorm2_from_purities,
            report.delta_tilde,
            chsh.u[0],
            chsh.u[1],
            chsh.u[2],
            chsh.value,
            neg,
            flag(report.verdicts["ksep"] == Verdict::Violated),
            flag(chsh.verdict == Verdict::Violated),
        ]);
    }
    let tol = 1e-12;
    let ppt_threshold = bisect(0.0, 1.0, werner_min_pt_eigenvalue, tol);
    let criterion_threshold = bisect(0.0, 1.0, werner_delta, tol);
    let chsh_threshold = bisect(0.0, 1.0, werner_chsh_margin, tol);
    let purity_at = |w: Option<f64>| -> Option<f64> {
        w.map(|w| purity(&werner(w, BellState::PsiMinus).expect("weight in range")))
    };
    let meta = json!({
        "family": "werner",
        "grid": grid,
        "boundaries": {
            "ppt_weight": ppt_threshold,
            "criterion_weight": criterion_threshold,
            "chsh_weight": chsh_threshold,
            "purity_at_ppt": purity_at(ppt_threshold),
            "purity_at_criterion": purity_at(criterion_threshold),
            "purity_at_chsh": purity_at(chsh_threshold),
        },
    });
    Ok(SweepResult {
        name: "werner".to_string(),
        columns: cols(&[
            "omega",
            "purity",
            "tnorm2_direct",
            "tnorm2_purity",
            "delta_tilde",
            "u1",
            "u2",
            "u3",
            "chsh_value",
            "negativity",
            "ksep_violated",
            "chsh_violated",
        ]),
        rows,
        meta,
    })
}

/// Scans noisy GHZ states over the mixing weight for one or more
/// partitions, recording the uncertainty combination per partition and its
/// zero crossing; the genuine-multipartite reference weight
/// `(2^{n-1} - 1)/(2^n - 1)` is reported alongside.
pub fn ghz_sweep(n: usize, grid: usize, partitions: &[PartitionScheme]) -> Result<SweepResult> {
    if grid < 2 {
        return Err(Error::parameter("grid needs at least 2 points"));
    }
    if !(2..=8).contains(&n) {
        return Err(Error::parameter(format!(
            "qubit count must be in 2..=8, got {n}"
        )));
    }
    if partitions.is_empty() {
        return Err(Error::parameter("no partitions given"));
    }
    for p in partitions {
        if p.n_factors() != n {
            return Err(Error::partition(format!(
                "partition {p} does not cover {n} qubits"
            )));
        }
    }
    let delta_of = |p: f64, part: &PartitionScheme| -> Result<f64> {
        let rho = noisy_ghz(n, p)?;
        let pm = reduced_purities(&rho, part)?;
        Ok(ksep_delta_tilde(&pm))
    };
    let mut columns = cols(&["p", "purity"]);
    for part in partitions {
        columns.push(format!("delta_{}", partition_tag(part)));
    }
    let grid_points: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let rows: Vec<Vec<f64>> = grid_points
        .par_iter()
        .map(|&p| {
            let rho = noisy_ghz(n, p).expect("weight in range");
            let mut row = vec![p, purity(&rho)];
            for part in partitions {
                row.push(delta_of(p, part).expect("validated partition"));
            }
            row
        })
        .collect();
    let mut crossings = serde_json::Map::new();
    for part in partitions {
        let root = bisect(0.0, 1.0, |p| delta_of(p, part).expect("in range"), 1e-12);
        crossings.insert(part.to_string(), json!(root));
    }
    let gme_reference = ((1u128 << (n - 1)) - 1) as f64 / ((1u128 << n) - 1) as f64;
    let meta = json!({
        "family": "ghz",
        "qubits": n,
        "grid": grid,
        "partitions": partitions.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "delta_zero_crossings": crossings,
        "gme_weight_reference": gme_reference,
    });
    Ok(SweepResult {
        name: "ghz".to_string(),
        columns,
        rows,
        meta,
    })
}

/// Monte-Carlo volume estimate over the diagonal-correlation tetrahedron.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryEstimate {
    pub samples: usize,
    pub entangled_count: usize,
    pub detected_count: usize,
    /// Fraction of the tetrahedron that is entangled (exact value 1/2).
    pub entangled_fraction: f64,
    pub entangled_stderr: f64,
    /// Fraction of the tetrahedron with squared norm above 1.
    pub detected_fraction: f64,
    pub detected_stderr: f64,
    /// Detected states among the entangled ones.
    pub detected_over_entangled: f64,
    pub ratio_stderr: f64,
    /// Closed-form value of the same ratio from the cap-volume geometry:
    /// `(8/3 + 4 pi/3 - 32 sqrt(3) pi / 27) / (4/3)`.
    pub closed_form_ratio: f64,
    pub closed_form_entangled: f64,
    pub audited: usize,
    pub audit_failures: usize,
}

const BELL_VERTICES: [[f64; 3]; 4] = [
    [1.0, -1.0, 1.0],
    [-1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0],
    [-1.0, -1.0, -1.0],
];

fn min_bell_eigenvalue(t: &[f64; 3]) -> f64 {
    BELL_VERTICES
        .iter()
        .map(|v| (1.0 + t[0] * v[0] + t[1] * v[1] + t[2] * v[2]) / 4.0)
        .fold(f64::INFINITY, f64::min)
}

struct GeoChunk {
    n: usize,
    entangled: usize,
    detected: usize,
    audited: usize,
    audit_failures: usize,
}

/// Samples diagonal-correlation states uniformly over their tetrahedron and
/// estimates the entangled and criterion-detected volume fractions; every
/// `audit_every`-th sample is rebuilt as a matrix and cross-checked.
pub fn bd_geometry(
    samples: usize,
    seed: RngSeed,
    audit_every: usize,
) -> Result<(GeometryEstimate, SweepResult)> {
    if samples == 0 {
        return Err(Error::parameter("need at least one sample"));
    }
    let chunk_size = 20_000usize;
    let chunks = samples.div_ceil(chunk_size);
    let results: Vec<GeoChunk> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.with_stream(seed.stream + c as u64).rng();
            let quota = chunk_size.min(samples - c * chunk_size);
            let mut out = GeoChunk {
                n: quota,
                entangled: 0,
                detected: 0,
                audited: 0,
                audit_failures: 0,
            };
            for i in 0..quota {
                // rejection-sample the tetrahedron from its bounding cube
                let t = loop {
                    let cand = [
                        rng.random::<f64>() * 2.0 - 1.0,
                        rng.random::<f64>() * 2.0 - 1.0,
                        rng.random::<f64>() * 2.0 - 1.0,
                    ];
                    if min_bell_eigenvalue(&cand) >= 0.0 {
                        break cand;
                    }
                };
                let norm2: f64 = t.iter().map(|x| x * x).sum();
                let pt_min = min_bell_eigenvalue(&[t[0], -t[1], t[2]]);
                let entangled = pt_min < -VERDICT_TIE_TOL;
                let detected = norm2 > 1.0 + VERDICT_TIE_TOL;
                out.entangled += usize::from(entangled);
                out.detected += usize::from(detected);
                if audit_every > 0 && i % audit_every == 0 {
                    out.audited += 1;
                    if audit_bd_sample(&t, entangled, pt_min).is_err() {
                        out.audit_failures += 1;
                    }
                }
            }
            out
        })
        .collect();

    let mut n = 0usize;
    let mut entangled = 0usize;
    let mut detected = 0usize;
    let mut audited = 0usize;
    let mut audit_failures = 0usize;
    for c in &results {
        n += c.n;
        entangled += c.entangled;
        detected += c.detected;
        audited += c.audited;
        audit_failures += c.audit_failures;
    }
    let nf = n as f64;
    let ent_frac = entangled as f64 / nf;
    let det_frac = detected as f64 / nf;
    let ratio = if entangled > 0 {
        detected as f64 / entangled as f64
    } else {
        0.0
    };
    let binom = |f: f64, m: f64| (f * (1.0 - f) / m).sqrt();
    let closed_form_ratio = (8.0 / 3.0 + 4.0 * std::f64::consts::PI / 3.0
        - 32.0 * 3.0f64.sqrt() * std::f64::consts::PI / 27.0)
        / (4.0 / 3.0);
    log::info!(
        "tetrahedron scan: {n} samples, entangled {ent_frac:.4}, detected/entangled {:.4}",
        if entangled > 0 {
            detected as f64 / entangled as f64
        } else {
            0.0
        }
    );
    let estimate = GeometryEstimate {
        samples: n,
        entangled_count: entangled,
        detected_count: detected,
        entangled_fraction: ent_frac,
        entangled_stderr: binom(ent_frac, nf),
        detected_fraction: det_frac,
        detected_stderr: binom(det_frac, nf),
        detected_over_entangled: ratio,
        ratio_stderr: if entangled > 0 {
            binom(ratio, entangled as f64)
        } else {
            0.0
        },
        closed_form_ratio,
        closed_form_entangled: 0.5,
        audited,
        audit_failures,
    };
    let row = vec![
        n as f64,
        entangled as f64,
        detected as f64,
        estimate.entangled_fraction,
        estimate.entangled_stderr,
        estimate.detected_fraction,
        estimate.detected_stderr,
        estimate.detected_over_entangled,
        estimate.ratio_stderr,
        estimate.closed_form_ratio,
        audited as f64,
        audit_failures as f64,
    ];
    let meta = json!({
        "family": "bd-geometry",
        "samples": samples,
        "seed": seed,
        "audit_every": audit_every,
        "estimate": serde_json::to_value(&estimate)?,
    });
    let sweep = SweepResult {
        name: "bd_geometry".to_string(),
        columns: cols(&[
            "samples",
            "entangled_count",
            "detected_count",
            "entangled_fraction",
            "entangled_stderr",
            "detected_fraction",
            "detected_stderr",
            "detected_over_entangled",
            "ratio_stderr",
            "closed_form_ratio",
            "audited",
            "audit_failures",
        ]),
        rows: vec![row],
        meta,
    };
    Ok((estimate, sweep))
}

/// Rebuilds one tetrahedron point as a density matrix and cross-checks the
/// tensor entries, the purity-route norm and the entanglement flag.
fn audit_bd_sample(t: &[f64; 3], entangled: bool, pt_min: f64) -> Result<()> {
    let rho = bd_state(*t)?;
    crate::mat::validate_density(rho.matrix().clone(), vec![2, 2])?;
    let part = PartitionScheme::singletons(2);
    let tensor = corr_tensor(&rho, &part)?;
    let m = tensor.two_qubit_matrix()?;
    for i in 0..3 {
        for j in 0..3 {
            let expect = if i == j { t[i] } else { 0.0 };
            if (m[(i, j)] - expect).abs() > 1e-12 {
                return Err(Error::parameter("tensor entry mismatch"));
            }
        }
    }
    let pm = reduced_purities(&rho, &part)?;
    let norm2: f64 = t.iter().map(|x| x * x).sum();
    if (tnorm2_from_purities(&pm) - norm2).abs() > 1e-9 {
        return Err(Error::parameter("purity-route norm mismatch"));
    }
    // matrix-route entanglement must agree away from the boundary
    if pt_min.abs() > 1e-9 {
        let neg = negativity(&rho, &[1])?;
        if entangled != (neg > 1e-9) {
            return Err(Error::parameter("entanglement flag mismatch"));
        }
    }
    Ok(())
}

struct NmeasState {
    bin: usize,
    purity: f64,
    tnorm2: f64,
    below: bool,
    nmeas: f64,
    route_diff: f64,
}

/// Measurement-cost scan: random n-qubit states at fixed purity levels,
/// counting how many of the `3^n` full-support correlation products must be
/// measured (in random order, averaged over shuffles) before the running
/// squared sum exceeds the separability threshold 1.  States whose total
/// squared norm stays below 1 always need all `3^n`; the purity route needs
/// `2^n - 1` subsystem purities regardless.
pub fn nmeas_scan(
    n: usize,
    bins: usize,
    per_bin: usize,
    shuffles: usize,
    seed: RngSeed,
) -> Result<SweepResult> {
    if bins == 0 || per_bin == 0 || shuffles == 0 {
        return Err(Error::parameter("bins, per_bin and shuffles must be positive"));
    }
    if !(2..=8).contains(&n) {
        return Err(Error::parameter(format!(
            "qubit count must be in 2..=8, got {n}"
        )));
    }
    let dims = vec![2usize; n];
    let d = 1usize << n;
    let lo = 1.0 / d as f64;
    let hi = 1.0;
    let centers: Vec<f64> = (0..bins)
        .map(|b| lo + (b as f64 + 0.5) * (hi - lo) / bins as f64)
        .collect();
    let part = PartitionScheme::singletons(n);
    let full_cost = 3usize.pow(n as u32);

    let states: Vec<NmeasState> = (0..bins * per_bin)
        .into_par_iter()
        .map(|g| {
            let bin = g / per_bin;
            let mut rng = seed.with_stream(seed.stream + g as u64).rng();
            let rho = random_fixed_purity(&dims, centers[bin], 1e-12, &mut rng)
                .expect("target within range");
            let tensor = corr_tensor(&rho, &part).expect("within caps");
            let latin = tensor.full_support_values();
            let tnorm2 = tensor.full_support_norm2();
            let pm = reduced_purities(&rho, &part).expect("valid partition");
            let route_diff = (tnorm2_from_purities(&pm) - tnorm2).abs();
            let below = tnorm2 < 1.0 - VERDICT_TIE_TOL;
            let mut order: Vec<usize> = (0..latin.len()).collect();
            let mut nmeas_sum = 0usize;
            for _ in 0..shuffles {
                // Fisher-Yates over the measurement order
                for i in (1..order.len()).rev() {
                    let j = rng.random_range(0..=i);
                    order.swap(i, j);
                }
                let mut running = 0.0f64;
                let mut count = 0usize;
                let mut certified = false;
                for &idx in &order {
                    running += latin[idx] * latin[idx];
                    count += 1;
                    if running > 1.0 + VERDICT_TIE_TOL {
                        certified = true;
                        break;
                    }
                }
                nmeas_sum += if certified { count } else { full_cost };
            }
            NmeasState {
                bin,
                purity: purity(&rho),
                tnorm2,
                below,
                nmeas: nmeas_sum as f64 / shuffles as f64,
                route_diff,
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(bins);
    for (b, &center) in centers.iter().enumerate() {
        let members: Vec<&NmeasState> = states.iter().filter(|s| s.bin == b).collect();
        let count = members.len() as f64;
        let mean = |f: &dyn Fn(&NmeasState) -> f64| -> f64 {
            members.iter().map(|s| f(s)).sum::<f64>() / count
        };
        let mean_tnorm2 = mean(&|s| s.tnorm2);
        let var_tnorm2 = members
            .iter()
            .map(|s| (s.tnorm2 - mean_tnorm2).powi(2))
            .sum::<f64>()
            / count;
        let below: Vec<&&NmeasState> = members.iter().filter(|s| s.below).collect();
        let nmeas_below = if below.is_empty() {
            0.0
        } else {
            below.iter().map(|s| s.nmeas).sum::<f64>() / below.len() as f64
        };
        rows.push(vec![
            center,
            mean(&|s| s.purity),
            mean_tnorm2,
            var_tnorm2.sqrt(),
            below.len() as f64 / count,
            mean(&|s| s.nmeas),
            nmeas_below,
            count,
            below.len() as f64,
            members
                .iter()
                .map(|s| s.route_diff)
                .fold(0.0f64, f64::max),
        ]);
    }
    log::info!(
        "measurement scan: {} states over {bins} purity bins on {n} qubits",
        bins * per_bin
    );
    let meta = json!({
        "family": "nmeas",
        "qubits": n,
        "bins": bins,
        "per_bin": per_bin,
        "shuffles": shuffles,
        "seed": seed,
        "full_cost": full_cost,
        "purity_route_cost": d - 1,
    });
    Ok(SweepResult {
        name: "nmeas".to_string(),
        columns: cols(&[
            "purity_target",
            "mean_purity",
            "mean_tnorm2",
            "std_tnorm2",
            "frac_below_1",
            "mean_nmeas",
            "mean_nmeas_below",
            "count",
            "count_below",
            "max_route_diff",
        ]),
        rows,
        meta,
    })
}

struct NegChunk {
    accepted: usize,
    draws: usize,
    bins: Vec<BinAgg>,
    undetected_above_half: usize,
    accepted_above_half: usize,
    undetected_above_055: usize,
    accepted_above_055: usize,
    max_undetected_negativity: f64,
    max_route_diff: f64,
}

#[derive(Clone)]
struct BinAgg {
    count: usize,
    entangled: usize,
    detected: usize,
    undetected_entangled: usize,
    neg_sum: f64,
    delta_sum: f64,
}

const NEG_BINS: usize = 40;

/// Draws random two-qubit states, optionally keeping only those whose
/// doubled negativity exceeds `min_negativity`, and tallies how often the
/// norm criterion detects them, binned by negativity.
pub fn negativity_scan(
    samples: usize,
    seed: RngSeed,
    min_negativity: Option<f64>,
    max_draws: usize,
) -> Result<SweepResult> {
    if samples == 0 {
        return Err(Error::parameter("need at least one sample"));
    }
    let chunks = 256usize.min(samples);
    let per_chunk_cap = max_draws.div_ceil(chunks).max(1);
    let part = PartitionScheme::singletons(2);
    let results: Vec<NegChunk> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let quota = samples / chunks + usize::from(c < samples % chunks);
            let mut rng = seed.with_stream(seed.stream + c as u64).rng();
            let mut out = NegChunk {
                accepted: 0,
                draws: 0,
                bins: vec![
                    BinAgg {
                        count: 0,
                        entangled: 0,
                        detected: 0,
                        undetected_entangled: 0,
                        neg_sum: 0.0,
                        delta_sum: 0.0,
                    };
                    NEG_BINS
                ],
                undetected_above_half: 0,
                accepted_above_half: 0,
                undetected_above_055: 0,
                accepted_above_055: 0,
                max_undetected_negativity: 0.0,
                max_route_diff: 0.0,
            };
            while out.accepted < quota && out.draws < per_chunk_cap {
                out.draws += 1;
                let rho = random_mixed(&[2, 2], MixedEnsemble::HilbertSchmidt, &mut rng)
                    .expect("dims in range");
                let neg = negativity(&rho, &[1]).expect("valid block");
                if let Some(min) = min_negativity {
                    if neg <= min {
                        continue;
                    }
                }
                out.accepted += 1;
                let pm = reduced_purities(&rho, &part).expect("valid partition");
                let delta = ksep_delta_tilde(&pm);
                let tensor = corr_tensor(&rho, &part).expect("within caps");
                let diff = (tensor.full_support_norm2() - tnorm2_from_purities(&pm)).abs();
                out.max_route_diff = out.max_route_diff.max(diff);
                let entangled = neg > VERDICT_TIE_TOL;
                let detected = delta < -VERDICT_TIE_TOL;
                let bin = ((neg / (1.0 / NEG_BINS as f64)) as usize).min(NEG_BINS - 1);
                let agg = &mut out.bins[bin];
                agg.count += 1;
                agg.entangled += usize::from(entangled);
                agg.detected += usize::from(detected);
                agg.undetected_entangled += usize::from(entangled && !detected);
                agg.neg_sum += neg;
                agg.delta_sum += delta;
                if neg > 0.5 {
                    out.accepted_above_half += 1;
                    if !detected {
                        out.undetected_above_half += 1;
                    }
                }
                if neg > 0.55 {
                    out.accepted_above_055 += 1;
                    if !detected {
                        out.undetected_above_055 += 1;
                    }
                }
                if entangled && !detected {
                    out.max_undetected_negativity = out.max_undetected_negativity.max(neg);
                }
            }
            out
        })
        .collect();

    let accepted: usize = results.iter().map(|c| c.accepted).sum();
    if accepted < samples {
        return Err(Error::parameter(format!(
            "accepted only {accepted} of {samples} requested samples within {max_draws} draws"
        )));
    }
    let draws: usize = results.iter().map(|c| c.draws).sum();
    log::info!("negativity scan: accepted {accepted} of {draws} draws");
    let mut bins = vec![
        BinAgg {
            count: 0,
            entangled: 0,
            detected: 0,
            undetected_entangled: 0,
            neg_sum: 0.0,
            delta_sum: 0.0,
        };
        NEG_BINS
    ];
    for c in &results {
        for (dst, src) in bins.iter_mut().zip(&c.bins) {
            dst.count += src.count;
            dst.entangled += src.entangled;
            dst.detected += src.detected;
            dst.undetected_entangled += src.undetected_entangled;
            dst.neg_sum += src.neg_sum;
            dst.delta_sum += src.delta_sum;
        }
    }
    let width = 1.0 / NEG_BINS as f64;
    let rows: Vec<Vec<f64>> = bins
        .iter()
        .enumerate()
        .map(|(b, agg)| {
            let count = agg.count as f64;
            vec![
                b as f64 * width,
                (b + 1) as f64 * width,
                count,
                agg.entangled as f64,
                agg.detected as f64,
                agg.undetected_entangled as f64,
                if agg.count > 0 { agg.neg_sum / count } else { 0.0 },
                if agg.count > 0 { agg.delta_sum / count } else { 0.0 },
            ]
        })
        .collect();
    let sum = |f: &dyn Fn(&NegChunk) -> usize| -> usize { results.iter().map(f).sum() };
    let meta = json!({
        "family": "negativity",
        "samples": samples,
        "accepted": accepted,
        "draws": draws,
        "seed": seed,
        "min_negativity": min_negativity,
        "accepted_above_0.5": sum(&|c| c.accepted_above_half),
        "undetected_above_0.5": sum(&|c| c.undetected_above_half),
        "accepted_above_0.55": sum(&|c| c.accepted_above_055),
        "undetected_above_0.55": sum(&|c| c.undetected_above_055),
        "max_undetected_negativity": results
            .iter()
            .map(|c| c.max_undetected_negativity)
            .fold(0.0f64, f64::max),
        "max_route_diff": results
            .iter()
            .map(|c| c.max_route_diff)
            .fold(0.0f64, f64::max),
    });
    Ok(SweepResult {
        name: "negativity".to_string(),
        columns: cols(&[
            "neg_lo",
            "neg_hi",
            "count",
            "entangled",
            "detected",
            "undetected_entangled",
            "mean_negativity",
            "mean_delta",
        ]),
        rows,
        meta,
    })
}

/// Number of full-support correlation products versus subsystem purities
/// needed to evaluate the separability criterion for the given block
/// dimensions.
pub fn measurement_costs(block_dims: &[usize]) -> Result<(u128, u128)> {
    let k = block_dims.len();
    if k == 0 || k > 32 {
        return Err(Error::parameter(format!("block count {k} unsupported")));
    }
    let mut corr: u128 = 1;
    for &d in block_dims {
        if d < 2 {
            return Err(Error::InvalidDimension { dim: d });
        }
        let m = (d * d - 1) as u128;
        corr = corr.checked_mul(m).ok_or(Error::SizeLimit {
            size: usize::MAX,
            cap: usize::MAX,
        })?;
    }
    Ok((corr, (1u128 << k) - 1))
}

/// Cost comparison table for a list of block-dimension profiles.
pub fn cost_table(specs: &[Vec<usize>]) -> Result<SweepResult> {
    if specs.is_empty() {
        return Err(Error::parameter("no dimension profiles given"));
    }
    let mut rows = Vec::with_capacity(specs.len());
    let mut labels = Vec::with_capacity(specs.len());
    let mut exact = Vec::with_capacity(specs.len());
    for (i, dims) in specs.iter().enumerate() {
        let (corr, pur) = measurement_costs(dims)?;
        labels.push(
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x"),
        );
        exact.push(json!({
            "dims": dims,
            "correlation_products": corr.to_string(),
            "purities": pur.to_string(),
        }));
        rows.push(vec![
            i as f64,
            dims.len() as f64,
            corr as f64,
            pur as f64,
            corr as f64 / pur as f64,
        ]);
    }
    let meta = json!({
        "family": "costs",
        "profiles": labels,
        "exact": exact,
    });
    Ok(SweepResult {
        name: "costs".to_string(),
        columns: cols(&["profile", "k", "n_correlation", "n_purity", "ratio"]),
        rows,
        meta,
    })
}

/// Purity above which an n-qubit state with all proper marginals maximally
/// mixed is detected: the uncertainty combination reduces to `2 - 2^n P`.
pub fn mm_reduction_threshold(n: usize) -> f64 {
    2.0 / (1u128 << n) as f64
}

/// Max deviation between the uncertainty combination on synthetic
/// maximally-mixed-marginal purity maps and its reduced form `2 - 2^n P`.
pub fn mm_reduction_residual(n: usize, purities: &[f64]) -> Result<f64> {
    if !(2..=16).contains(&n) {
        return Err(Error::parameter(format!(
            "qubit count must be in 2..=16, got {n}"
        )));
    }
    let dn = (1u128 << n) as f64;
    let mut worst = 0.0f64;
    for &p in purities {
        let mut values = vec![0.0f64; 1 << n];
        for (mask, slot) in values.iter_mut().enumerate() {
            let g = mask.count_ones();
            *slot = if mask == (1 << n) - 1 {
                p
            } else {
                1.0 / (1u128 << g) as f64
            };
        }
        let pm = PurityMap::new(vec![2; n], values)?;
        let delta = ksep_delta_tilde(&pm);
        worst = worst.max((delta - (2.0 - dn * p)).abs());
    }
    Ok(worst)
}

/// Minimum purity at which the bipartite norm criterion can detect
/// anything: `1 - (d_a + d_b - 2)/(d_a d_b)`.
pub fn qudit_bound_check(d_a: usize, d_b: usize) -> Result<f64> {
    if d_a < 2 || d_b < 2 {
        return Err(Error::InvalidDimension { dim: d_a.min(d_b) });
    }
    let (da, db) = (d_a as f64, d_b as f64);
    Ok(1.0 - (da + db - 2.0) / (da * db))
}
