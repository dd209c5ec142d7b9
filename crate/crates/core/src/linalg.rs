//! Small complex-vector helpers shared by the solvers.

use num_complex::Complex64;

/// Hermitian inner product `aᴴb` (conjugates the first argument).
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Euclidean norm.
pub fn norm(a: &[Complex64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Returns `a` scaled by the real factor `c`.
pub fn scaled(a: &[Complex64], c: f64) -> Vec<Complex64> {
    a.iter().map(|x| x * c).collect()
}

/// Orthonormal basis of span(vectors), built by modified Gram-Schmidt.
/// Vectors numerically inside the span of their predecessors are skipped, so
/// the result can be shorter than the input.
pub fn orthonormal_basis(vectors: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for v in vectors {
        if let Some(q) = orthonormal_residual(v, &basis) {
            basis.push(q);
        }
    }
    basis
}

/// Removes from `v` its projection onto the orthonormal set `basis` and
/// normalizes the remainder. Returns `None` when `v` lies in the span (the
/// residual is below 1e-12 of the original norm). Two Gram-Schmidt passes
/// keep the result orthogonal to the basis at working precision even for
/// nearly dependent inputs.
pub fn orthonormal_residual(v: &[Complex64], basis: &[Vec<Complex64>]) -> Option<Vec<Complex64>> {
    let original = norm(v);
    if original == 0.0 {
        return None;
    }
    let mut r = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = inner(q, &r);
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
    }
    let residual = norm(&r);
    if residual <= 1e-12 * original {
        return None;
    }
    Some(scaled(&r, 1.0 / residual))
}
