//! State factories and seeded random ensembles.
//!
//! Randomness always flows through a counter-based generator addressed by an
//! explicit `(seed, stream)` pair, so every sampler is reproducible and
//! parallel drivers can hand out independent streams without coordination.

use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{eigh, partial_transpose, CMatrix, DensityMatrix, DEFAULT_DIM_CAP};

/// Addressable randomness: a base seed plus a stream index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    /// The generator for this address; same address, same draws.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derived address with the same seed and the given stream.
    pub fn with_stream(&self, stream: u64) -> Self {
        RngSeed {
            seed: self.seed,
            stream,
        }
    }
}

/// The four maximally entangled two-qubit states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    /// Diagonal of the correlation matrix in the generator basis.
    pub fn correlation_diagonal(&self) -> [f64; 3] {
        match self {
            BellState::PhiPlus => [1.0, -1.0, 1.0],
            BellState::PhiMinus => [-1.0, 1.0, 1.0],
            BellState::PsiPlus => [1.0, 1.0, -1.0],
            BellState::PsiMinus => [-1.0, -1.0, -1.0],
        }
    }
}

impl FromStr for BellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phi-plus" | "phi+" => Ok(BellState::PhiPlus),
            "phi-minus" | "phi-" => Ok(BellState::PhiMinus),
            "psi-plus" | "psi+" => Ok(BellState::PsiPlus),
            "psi-minus" | "psi-" => Ok(BellState::PsiMinus),
            other => Err(Error::parameter(format!("unknown Bell state {other:?}"))),
        }
    }
}

impl std::fmt::Display for BellState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BellState::PhiPlus => "phi-plus",
            BellState::PhiMinus => "phi-minus",
            BellState::PsiPlus => "psi-plus",
            BellState::PsiMinus => "psi-minus",
        };
        write!(f, "{name}")
    }
}

/// Random mixed-state ensembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedEnsemble {
    /// `G G^dag / Tr` for a square complex Gaussian `G`.
    HilbertSchmidt,
    /// `(I + U) G G^dag (I + U)^dag`, normalized, with Haar `U`.
    Bures,
}

impl FromStr for MixedEnsemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hs" | "hilbert-schmidt" => Ok(MixedEnsemble::HilbertSchmidt),
            "bures" => Ok(MixedEnsemble::Bures),
            other => Err(Error::parameter(format!("unknown ensemble {other:?}"))),
        }
    }
}

impl std::fmt::Display for MixedEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MixedEnsemble::HilbertSchmidt => "hs",
            MixedEnsemble::Bures => "bures",
        };
        write!(f, "{name}")
    }
}

fn outer(v: &[Complex64]) -> CMatrix {
    let d = v.len();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = v[i] * v[j].conj();
        }
    }
    m
}

/// One of the four Bell states as a density matrix on `[2, 2]`.
pub fn bell_state(which: BellState) -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![Complex64::ZERO; 4];
    match which {
        BellState::PhiPlus => {
            v[0] = Complex64::new(s, 0.0);
            v[3] = Complex64::new(s, 0.0);
        }
        BellState::PhiMinus => {
            v[0] = Complex64::new(s, 0.0);
            v[3] = Complex64::new(-s, 0.0);
        }
        BellState::PsiPlus => {
            v[1] = Complex64::new(s, 0.0);
            v[2] = Complex64::new(s, 0.0);
        }
        BellState::PsiMinus => {
            v[1] = Complex64::new(s, 0.0);
            v[2] = Complex64::new(-s, 0.0);
        }
    }
    DensityMatrix::trusted(outer(&v), vec![2, 2])
}

/// Bell state mixed with white noise: `w * |psi><psi| + (1 - w) * I/4`.
pub fn werner(omega: f64, which: BellState) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::parameter(format!(
            "mixing weight must be in [0, 1], got {omega}"
        )));
    }
    let pure = bell_state(which);
    let mut m = pure.matrix().scale(omega);
    let background = (1.0 - omega) / 4.0;
    for i in 0..4 {
        m[(i, i)] += Complex64::new(background, 0.0);
    }
    Ok(DensityMatrix::trusted(m, vec![2, 2]))
}

/// Two-qubit state with maximally mixed marginals and diagonal correlation
/// matrix `diag(t)`.  Positivity restricts `t` to the tetrahedron spanned by
/// the four Bell points; outside it the construction fails.
pub fn bd_state(t: [f64; 3]) -> Result<DensityMatrix> {
    // Eigenvalues sit on the Bell basis: (1 + <t, v>)/4 per Bell vertex v.
    let mut min_eig = f64::INFINITY;
    for which in [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ] {
        let v = which.correlation_diagonal();
        let lam = (1.0 + t[0] * v[0] + t[1] * v[1] + t[2] * v[2]) / 4.0;
        min_eig = min_eig.min(lam);
    }
    if min_eig < -1e-9 {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
            tolerance: 1e-9,
        });
    }
    let basis = crate::basis::generators(2)?;
    let mut m = CMatrix::identity(4, 4);
    for (i, &ti) in t.iter().enumerate() {
        let s = basis.matrix(i + 1);
        m += crate::mat::kron(s, s)?.scale(ti);
    }
    Ok(DensityMatrix::trusted(m.scale(0.25), vec![2; 2]))
}

/// The n-qubit GHZ state `(|0..0> + |1..1>)/sqrt(2)`.
pub fn ghz_state(n: usize) -> Result<DensityMatrix> {
    check_qubit_count(n)?;
    let d = 1usize << n;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![Complex64::ZERO; d];
    v[0] = Complex64::new(s, 0.0);
    v[d - 1] = Complex64::new(s, 0.0);
    Ok(DensityMatrix::trusted(outer(&v), vec![2; n]))
}

/// GHZ state mixed with white noise: `p * GHZ + (1 - p) * I/2^n`.
pub fn noisy_ghz(n: usize, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::parameter(format!(
            "mixing weight must be in [0, 1], got {p}"
        )));
    }
    let pure = ghz_state(n)?;
    let d = pure.dim();
    let mut m = pure.matrix().scale(p);
    let background = (1.0 - p) / d as f64;
    for i in 0..d {
        m[(i, i)] += Complex64::new(background, 0.0);
    }
    Ok(DensityMatrix::trusted(m, vec![2; n]))
}

fn check_qubit_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::parameter(format!("need at least 2 qubits, got {n}")));
    }
    if (1usize << n) > DEFAULT_DIM_CAP {
        return Err(Error::SizeLimit {
            size: 1 << n,
            cap: DEFAULT_DIM_CAP,
        });
    }
    Ok(())
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::mismatch("no factor dimensions given".to_string()));
    }
    let mut total = 1usize;
    for &d in dims {
        if d < 2 {
            return Err(Error::InvalidDimension { dim: d });
        }
        total = total.saturating_mul(d);
        if total > DEFAULT_DIM_CAP {
            return Err(Error::SizeLimit {
                size: total,
                cap: DEFAULT_DIM_CAP,
            });
        }
    }
    Ok(total)
}

/// Square matrix of iid standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    m
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phase fix
/// that makes the R diagonal real positive.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(d, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let diag = r[(j, j)];
        let phase = if diag.norm() > 0.0 {
            diag / diag.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random pure state on the given factors.
pub fn random_pure_haar<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<DensityMatrix> {
    let d = check_dims(dims)?;
    let mut v = vec![Complex64::ZERO; d];
    let mut norm2 = 0.0f64;
    for a in v.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *a = Complex64::new(re, im);
        norm2 += a.norm_sqr();
    }
    let inv = 1.0 / norm2.sqrt();
    for a in v.iter_mut() {
        *a *= inv;
    }
    Ok(DensityMatrix::trusted(outer(&v), dims.to_vec()))
}

/// Random mixed state from the chosen ensemble on the given factors.
pub fn random_mixed<R: Rng + ?Sized>(
    dims: &[usize],
    ensemble: MixedEnsemble,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let d = check_dims(dims)?;
    let m = match ensemble {
        MixedEnsemble::HilbertSchmidt => {
            let g = ginibre(d, rng);
            &g * g.adjoint()
        }
        MixedEnsemble::Bures => {
            let u = haar_unitary(d, rng);
            let g = ginibre(d, rng);
            let a = (CMatrix::identity(d, d) + u) * g;
            &a * a.adjoint()
        }
    };
    let tr = m.trace().re;
    let mut rho = m.scale(1.0 / tr);
    // Exact unit diagonal sum: fold the residual into the last diagonal entry.
    let diag_sum: f64 = (0..d).map(|i| rho[(i, i)].re).sum();
    rho[(d - 1, d - 1)] += Complex64::new(1.0 - diag_sum, 0.0);
    Ok(DensityMatrix::trusted(rho, dims.to_vec()))
}

/// Random state with exact purity `target`, uniform over eigenvalue
/// direction on the sphere-simplex intersection reachable from the center,
/// conjugated by a Haar unitary.
///
/// The eigenvalue vector is taken on the ray from the uniform point through
/// a flat Dirichlet draw whenever the target sphere is reached inside the
/// simplex; otherwise the draw is blended toward its dominant vertex until
/// the purity matches.  Either way the construction terminates and the
/// purity is exact to roundoff, which is then checked against `tol`.
pub fn random_fixed_purity<R: Rng + ?Sized>(
    dims: &[usize],
    target: f64,
    tol: f64,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let d = check_dims(dims)?;
    let p_min = 1.0 / d as f64;
    if !(p_min - 1e-12..=1.0 + 1e-12).contains(&target) {
        return Err(Error::InvalidPurity {
            value: target,
            lo: p_min,
            hi: 1.0,
        });
    }
    if target >= 1.0 - 1e-15 {
        return random_pure_haar(dims, rng);
    }
    if target <= p_min + 1e-15 {
        let m = CMatrix::identity(d, d).scale(p_min);
        return Ok(DensityMatrix::trusted(m, dims.to_vec()));
    }

    let lambda = loop {
        // flat Dirichlet draw via normalized exponentials
        let mut x = vec![0.0f64; d];
        let mut total = 0.0;
        for xi in x.iter_mut() {
            let u: f64 = rng.random();
            *xi = -u.max(f64::MIN_POSITIVE).ln();
            total += *xi;
        }
        for xi in x.iter_mut() {
            *xi /= total;
        }
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let dir2 = norm2 - p_min;
        if dir2 < 1e-30 {
            continue; // degenerate draw at the center
        }
        let s_target = ((target - p_min) / dir2).sqrt();
        let s_exit = x
            .iter()
            .map(|&xi| xi - p_min)
            .filter(|&u| u < 0.0)
            .map(|u| p_min / (-u))
            .fold(f64::INFINITY, f64::min);
        if s_target <= s_exit {
            let lam: Vec<f64> = x
                .iter()
                .map(|&xi| (p_min + s_target * (xi - p_min)).max(0.0))
                .collect();
            break lam;
        }
        // Blend toward the dominant vertex: purity rises monotonically to 1.
        let j = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let a = norm2 - 2.0 * x[j] + 1.0;
        let b = 2.0 * (x[j] - norm2);
        let c0 = norm2 - target;
        let disc = (b * b - 4.0 * a * c0).max(0.0);
        let mix = (-b + disc.sqrt()) / (2.0 * a);
        let mut lam = x.clone();
        for (i, li) in lam.iter_mut().enumerate() {
            *li = (1.0 - mix) * *li + if i == j { mix } else { 0.0 };
            *li = li.max(0.0);
        }
        break lam;
    };

    let u = haar_unitary(d, rng);
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = Complex64::ZERO;
            for (l, &lv) in lambda.iter().enumerate() {
                acc += u[(i, l)] * lv * u[(j, l)].conj();
            }
            m[(i, j)] = acc;
        }
    }
    let rho = DensityMatrix::trusted(m, dims.to_vec());
    let p = crate::purity::purity(&rho);
    if (p - target).abs() > tol {
        return Err(Error::InvalidPurity {
            value: p,
            lo: target - tol,
            hi: target + tol,
        });
    }
    Ok(rho)
}

/// Doubled negativity across the given factor block: twice the absolute sum
/// of the negative partial-transpose eigenvalues, so a Bell state scores 1.
pub fn negativity(rho: &DensityMatrix, block: &[usize]) -> Result<f64> {
    let pt = partial_transpose(rho, block)?;
    let (vals, _) = eigh(&pt)?;
    let neg: f64 = vals.iter().filter(|&&v| v < 0.0).sum();
    Ok(2.0 * (-neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{validate_density, PartitionScheme};
    use crate::purity::purity;
    use crate::tensor::corr_tensor;
    use approx::assert_relative_eq;

    #[test]
    fn bell_states_have_expected_correlation_diagonals() {
        for which in [
            BellState::PhiPlus,
            BellState::PhiMinus,
            BellState::PsiPlus,
            BellState::PsiMinus,
        ] {
            let rho = bell_state(which);
            validate_density(rho.matrix().clone(), vec![2, 2]).unwrap();
            let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
            let m = t.two_qubit_matrix().unwrap();
            let diag = which.correlation_diagonal();
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { diag[i] } else { 0.0 };
                    assert_relative_eq!(m[(i, j)], expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn werner_interpolates_purity() {
        for &(omega, expect) in &[(0.0, 0.25), (0.5, (1.0 + 3.0 * 0.25) / 4.0), (1.0, 1.0)] {
            let rho = werner(omega, BellState::PsiMinus).unwrap();
            validate_density(rho.matrix().clone(), vec![2, 2]).unwrap();
            assert_relative_eq!(purity(&rho), expect, epsilon = 1e-12);
        }
        assert!(werner(-0.1, BellState::PsiMinus).is_err());
        assert!(werner(1.1, BellState::PsiMinus).is_err());
    }

    #[test]
    fn diagonal_correlation_states_recover_their_input() {
        let t_in = [0.3, -0.5, 0.2];
        let rho = bd_state(t_in).unwrap();
        validate_density(rho.matrix().clone(), vec![2, 2]).unwrap();
        let t = corr_tensor(&rho, &PartitionScheme::singletons(2)).unwrap();
        let m = t.two_qubit_matrix().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { t_in[i] } else { 0.0 };
                assert_relative_eq!(m[(i, j)], expect, epsilon = 1e-12);
            }
        }
        // marginals stay maximally mixed
        assert_relative_eq!(
            purity(&crate::mat::partial_trace(&rho, &[0]).unwrap()),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn correlation_vectors_outside_the_tetrahedron_are_rejected() {
        assert!(matches!(bd_state([1.0, 1.0, 1.0]), Err(Error::NotPsd { .. })));
        assert!(bd_state([-1.0, -1.0, -1.0]).is_ok()); // a Bell vertex
        assert!(bd_state([0.9, -0.9, 0.9]).is_ok()); // near another vertex
    }

    #[test]
    fn noisy_ghz_limits_and_marginals() {
        let pure = noisy_ghz(3, 1.0).unwrap();
        assert_relative_eq!(purity(&pure), 1.0, epsilon = 1e-12);
        let mixed = noisy_ghz(3, 0.0).unwrap();
        assert_relative_eq!(purity(&mixed), 1.0 / 8.0, epsilon = 1e-12);
        // marginal purity on g of n qubits: p^2/2 + 2 p (1-p)/2^g + (1-p)^2/2^g
        let (n, p, g) = (4usize, 0.6f64, 2usize);
        let rho = noisy_ghz(n, p).unwrap();
        let red = crate::mat::partial_trace(&rho, &[0, 1]).unwrap();
        let dg = (1usize << g) as f64;
        let expect = p * p / 2.0 + (2.0 * p * (1.0 - p) + (1.0 - p) * (1.0 - p)) / dg;
        assert_relative_eq!(purity(&red), expect, epsilon = 1e-12);
        assert!(noisy_ghz(1, 0.5).is_err());
        assert!(noisy_ghz(13, 0.5).is_err());
        assert!(noisy_ghz(3, 1.5).is_err());
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = RngSeed::new(5, 0).rng();
        for d in [2, 3, 5] {
            let u = haar_unitary(d, &mut rng);
            let dev = (&u * u.adjoint() - CMatrix::identity(d, d)).norm();
            assert!(dev < 1e-12, "d = {d}, deviation {dev}");
        }
    }

    #[test]
    fn pure_sampler_yields_valid_unit_purity_states() {
        let mut rng = RngSeed::new(7, 1).rng();
        for _ in 0..5 {
            let rho = random_pure_haar(&[2, 3], &mut rng).unwrap();
            validate_density(rho.matrix().clone(), vec![2, 3]).unwrap();
            assert_relative_eq!(purity(&rho), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixed_samplers_yield_valid_states() {
        for ensemble in [MixedEnsemble::HilbertSchmidt, MixedEnsemble::Bures] {
            let mut rng = RngSeed::new(11, 2).rng();
            for _ in 0..5 {
                let rho = random_mixed(&[4], ensemble, &mut rng).unwrap();
                validate_density(rho.matrix().clone(), vec![4]).unwrap();
            }
        }
    }

    #[test]
    fn sampling_is_reproducible_per_stream() {
        let a = random_mixed(&[2, 2], MixedEnsemble::HilbertSchmidt, &mut RngSeed::new(3, 9).rng())
            .unwrap();
        let b = random_mixed(&[2, 2], MixedEnsemble::HilbertSchmidt, &mut RngSeed::new(3, 9).rng())
            .unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let c = random_mixed(&[2, 2], MixedEnsemble::HilbertSchmidt, &mut RngSeed::new(3, 10).rng())
            .unwrap();
        assert_ne!(a.matrix(), c.matrix());
    }

    #[test]
    fn fixed_purity_sampler_hits_targets_exactly() {
        let dims = [4usize];
        for &target in &[0.25, 0.3, 0.7, 0.99, 1.0] {
            let mut rng = RngSeed::new(13, 4).rng();
            let rho = random_fixed_purity(&dims, target, 1e-12, &mut rng).unwrap();
            validate_density(rho.matrix().clone(), vec![4]).unwrap();
            assert!(
                (purity(&rho) - target).abs() <= 1e-12,
                "target {target}, got {}",
                purity(&rho)
            );
        }
        // high purity at large dimension must terminate and stay exact
        let mut rng = RngSeed::new(13, 5).rng();
        let rho = random_fixed_purity(&[2; 6], 0.9, 1e-12, &mut rng).unwrap();
        assert!((purity(&rho) - 0.9).abs() <= 1e-12);
        assert!(random_fixed_purity(&[4], 0.1, 1e-12, &mut rng).is_err());
        assert!(random_fixed_purity(&[4], 1.1, 1e-12, &mut rng).is_err());
    }

    #[test]
    fn negativity_reference_points() {
        let bell = bell_state(BellState::PhiPlus);
        assert_relative_eq!(negativity(&bell, &[1]).unwrap(), 1.0, epsilon = 1e-12);
        // separable: maximally mixed
        let mm = DensityMatrix::trusted(CMatrix::identity(4, 4).scale(0.25), vec![2, 2]);
        assert_relative_eq!(negativity(&mm, &[1]).unwrap(), 0.0, epsilon = 1e-12);
        // noise mixture crosses zero at omega = 1/3
        for &(omega, expect) in &[(0.2, 0.0), (2.0 / 3.0, 0.5), (1.0, 1.0)] {
            let w = werner(omega, BellState::PsiMinus).unwrap();
            assert_relative_eq!(negativity(&w, &[0]).unwrap(), expect, epsilon = 1e-12);
        }
    }
}
