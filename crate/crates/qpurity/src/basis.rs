//! Hermitian generator bases for the local operator expansion.
//!
//! For each local dimension `d` the basis holds the identity at index 0 and
//! the `d^2 - 1` traceless generators (symmetric, antisymmetric, then
//! diagonal), rescaled so that `Tr[s_a s_b] = d delta_ab` for all indices
//! including 0.  With that normalization the traceless part satisfies
//! `sum_a s_a^2 = (d^2 - 1) * I`, which the self-checks rely on.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mat::CMatrix;

/// Largest local dimension for which a basis is materialized.  A basis is
/// `d^2` dense `d x d` matrices, so this also bounds memory per block.
pub const GENERATOR_DIM_CAP: usize = 32;

/// Orthogonal Hermitian basis of `d x d` operators, identity first.
#[derive(Debug)]
pub struct GeneratorBasis {
    dim: usize,
    mats: Vec<CMatrix>,
}

impl GeneratorBasis {
    fn build(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension { dim: d });
        }
        if d > GENERATOR_DIM_CAP {
            return Err(Error::SizeLimit {
                size: d,
                cap: GENERATOR_DIM_CAP,
            });
        }
        let scale = (d as f64 / 2.0).sqrt();
        let mut mats = Vec::with_capacity(d * d);
        mats.push(CMatrix::identity(d, d));
        // Symmetric pairs, (j, k) with j < k in lexicographic order.
        for j in 0..d {
            for k in (j + 1)..d {
                let mut m = CMatrix::zeros(d, d);
                m[(j, k)] = Complex64::new(scale, 0.0);
                m[(k, j)] = Complex64::new(scale, 0.0);
                mats.push(m);
            }
        }
        // Antisymmetric pairs in the same order.
        for j in 0..d {
            for k in (j + 1)..d {
                let mut m = CMatrix::zeros(d, d);
                m[(j, k)] = Complex64::new(0.0, -scale);
                m[(k, j)] = Complex64::new(0.0, scale);
                mats.push(m);
            }
        }
        // Diagonal generators, l = 1..d-1.
        for l in 1..d {
            let coeff = scale * (2.0 / (l as f64 * (l as f64 + 1.0))).sqrt();
            let mut m = CMatrix::zeros(d, d);
            for mm in 0..l {
                m[(mm, mm)] = Complex64::new(coeff, 0.0);
            }
            m[(l, l)] = Complex64::new(-coeff * l as f64, 0.0);
            mats.push(m);
        }
        debug_assert_eq!(mats.len(), d * d);
        Ok(GeneratorBasis { dim: d, mats })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis elements, `d^2`.
    pub fn count(&self) -> usize {
        self.mats.len()
    }

    /// Basis element `a`; index 0 is the identity.
    pub fn matrix(&self, a: usize) -> &CMatrix {
        &self.mats[a]
    }

    /// The traceless generators, indices `1..d^2`.
    pub fn traceless(&self) -> &[CMatrix] {
        &self.mats[1..]
    }
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<GeneratorBasis>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GeneratorBasis>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Returns the (cached) generator basis for local dimension `d`.
pub fn generators(d: usize) -> Result<Arc<GeneratorBasis>> {
    let mut guard = cache().lock().expect("generator cache poisoned");
    if let Some(b) = guard.get(&d) {
        return Ok(Arc::clone(b));
    }
    let built = Arc::new(GeneratorBasis::build(d)?);
    guard.insert(d, Arc::clone(&built));
    Ok(built)
}

/// Max deviation of `Tr[s_a s_b]` from `d * delta_ab` over all index pairs.
pub fn orthogonality_check(d: usize) -> Result<f64> {
    let basis = generators(d)?;
    let mut dev: f64 = 0.0;
    for a in 0..basis.count() {
        for b in a..basis.count() {
            let tr = (basis.matrix(a) * basis.matrix(b)).trace();
            let expect = if a == b { d as f64 } else { 0.0 };
            dev = dev.max((tr.re - expect).abs().max(tr.im.abs()));
        }
    }
    Ok(dev)
}

/// Max entry deviation of `sum_{a>=1} s_a^2` from `(d^2 - 1) * I`.
pub fn casimir_check(d: usize) -> Result<f64> {
    let basis = generators(d)?;
    let mut acc = CMatrix::zeros(d, d);
    for s in basis.traceless() {
        acc += s * s;
    }
    let expect = (d * d - 1) as f64;
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { expect } else { 0.0 };
            dev = dev.max((acc[(i, j)] - Complex64::new(want, 0.0)).norm());
        }
    }
    Ok(dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::eigh;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimension_two_gives_the_pauli_matrices() {
        let b = generators(2).unwrap();
        assert_eq!(b.count(), 4);
        let x = b.matrix(1);
        let y = b.matrix(2);
        let z = b.matrix(3);
        assert_relative_eq!(x[(0, 1)].re, 1.0);
        assert_relative_eq!(x[(1, 0)].re, 1.0);
        assert_relative_eq!(y[(0, 1)].im, -1.0);
        assert_relative_eq!(y[(1, 0)].im, 1.0);
        assert_relative_eq!(z[(0, 0)].re, 1.0);
        assert_relative_eq!(z[(1, 1)].re, -1.0);
    }

    #[test]
    fn generators_are_hermitian_and_traceless() {
        for d in 2..=6 {
            let b = generators(d).unwrap();
            for s in b.traceless() {
                assert_relative_eq!((s - s.adjoint()).norm(), 0.0, epsilon = 1e-14);
                let tr = s.trace();
                assert_relative_eq!(tr.re, 0.0, epsilon = 1e-13);
                assert_relative_eq!(tr.im, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn orthogonality_holds_up_to_dimension_six() {
        for d in 2..=6 {
            assert!(orthogonality_check(d).unwrap() < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn casimir_sum_is_scalar() {
        for d in 2..=6 {
            assert!(casimir_check(d).unwrap() < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn basis_expands_random_hermitian_exactly() {
        let d = 3;
        let b = generators(d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut h = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                h[(i, j)] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let h = (&h + h.adjoint()).scale(0.5);
        // coefficients c_a = Tr[h s_a] / d reconstruct h exactly
        let mut rec = CMatrix::zeros(d, d);
        for a in 0..b.count() {
            let coeff = (&h * b.matrix(a)).trace() / d as f64;
            rec += b.matrix(a).map(|e| e * coeff);
        }
        assert_relative_eq!((&rec - &h).norm(), 0.0, epsilon = 1e-12);
        // sanity: expansion coefficients of Hermitian h are real
        for a in 0..b.count() {
            let coeff = (&h * b.matrix(a)).trace();
            assert_relative_eq!(coeff.im, 0.0, epsilon = 1e-12);
        }
        let _ = eigh(&h).unwrap();
    }

    #[test]
    fn invalid_dimensions_are_rejected() {
        assert!(matches!(generators(1), Err(Error::InvalidDimension { .. })));
        assert!(matches!(
            generators(GENERATOR_DIM_CAP + 1),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn bases_are_cached() {
        let a = generators(4).unwrap();
        let b = generators(4).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
