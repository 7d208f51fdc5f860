//! Dense linear-algebra kernel.
//!
//! Hermitian eigendecomposition is delegated to `nalgebra`; the SVD is a
//! one-sided Jacobi iteration. This module adds the ordering and sign
//! conventions the rest of the crate relies on. Spectra come back in descending order. Within a cluster of numerically
//! equal values, vectors are first sign/phase canonicalized (first nonzero
//! component real and positive) and then ordered lexicographically, largest
//! first, so that degenerate inputs such as Werner states always produce the
//! same basis.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::tol::HERM_TOL;
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Components smaller than this are skipped when canonicalizing signs.
const CANON_EPS: f64 = 1e-10;
/// Relative gap below which two spectral values are treated as degenerate.
const TIE_EPS: f64 = 1e-9;
/// Pivots smaller than this fraction of the largest entry make `determinant` return 0.
const PIVOT_EPS: f64 = 1e-14;

/// Which half of a bipartite system survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// `Tr[rho (x ⊗ y)]` without materializing the Kronecker product.
pub fn trace_kron(rho: &CMatrix, x: &CMatrix, y: &CMatrix) -> Complex64 {
    let da = x.nrows();
    let db = y.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..da {
        for k in 0..db {
            let row = i * db + k;
            for j in 0..da {
                let xji = x[(j, i)];
                if xji.re == 0.0 && xji.im == 0.0 {
                    continue;
                }
                for l in 0..db {
                    acc += rho[(row, j * db + l)] * xji * y[(l, k)];
                }
            }
        }
    }
    acc
}

/// `Tr[a b]` for square matrices of equal size.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Largest entrywise modulus of `h - h†`.
pub fn hermiticity_deviation(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let n = u.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    dev
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` belongs to `values[k]`.
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(h: &CMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let deviation = hermiticity_deviation(h);
    if deviation > HERM_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
            canonical_phase(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    sort_spectrum(&mut pairs, |a, b| lex_cmp_complex(a, b));

    let vectors = CMatrix::from_fn(n, n, |r, c| pairs[c].1[r]);
    Ok(HermitianEigen {
        values: pairs.into_iter().map(|(v, _)| v).collect(),
        vectors,
    })
}

#[derive(Debug, Clone)]
pub struct Svd {
    /// Left singular vectors as columns (thin for rectangular input).
    pub u: RMatrix,
    /// Non-negative, descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors as columns.
    pub v: RMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> RMatrix {
        let s = RMatrix::from_diagonal(&RVector::from_vec(self.singular_values.clone()));
        &self.u * s * self.v.transpose()
    }
}

/// Singular value decomposition, sorted and sign-canonicalized.
///
/// Computed by one-sided Jacobi rotations. nalgebra's dynamic SVD was
/// observed to converge to a wrong factorization on 3x3 inputs with nearly
/// equal singular values, which is exactly the regime of correlation matrices.
pub fn svd(m: &RMatrix) -> Svd {
    let transposed = m.nrows() < m.ncols();
    let (u, sigma, v) = if transposed {
        let (u, s, v) = jacobi_svd(&m.transpose());
        (v, s, u)
    } else {
        jacobi_svd(m)
    };
    let k = sigma.len();

    // (value, (right vector, left vector)); canonical sign is fixed on the right vector.
    let mut triples: Vec<(f64, (Vec<f64>, Vec<f64>))> = (0..k)
        .map(|i| {
            let mut rv: Vec<f64> = v.column(i).iter().copied().collect();
            let mut lv: Vec<f64> = u.column(i).iter().copied().collect();
            if let Some(&first) = rv.iter().find(|x| x.abs() > CANON_EPS) {
                if first < 0.0 {
                    rv.iter_mut().for_each(|x| *x = -*x);
                    lv.iter_mut().for_each(|x| *x = -*x);
                }
            }
            (sigma[i], (rv, lv))
        })
        .collect();
    sort_spectrum(&mut triples, |a, b| lex_cmp_real(&a.0, &b.0));

    let u_out = RMatrix::from_fn(m.nrows(), k, |r, c| triples[c].1 .1[r]);
    let v_out = RMatrix::from_fn(m.ncols(), k, |r, c| triples[c].1 .0[r]);
    Svd {
        u: u_out,
        singular_values: triples.into_iter().map(|(s, _)| s).collect(),
        v: v_out,
    }
}

/// Hestenes one-sided Jacobi for `rows >= cols`; returns thin `(U, σ, V)`.
fn jacobi_svd(m: &RMatrix) -> (RMatrix, Vec<f64>, RMatrix) {
    let (rows, n) = m.shape();
    let mut a = m.clone();
    let mut v = RMatrix::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = (0..n).map(|i| a.column(i).norm()).collect();
    let scale = sigma.iter().copied().fold(0.0, f64::max);
    let mut u = RMatrix::zeros(rows, n);
    let mut missing = Vec::new();
    for i in 0..n {
        if sigma[i] > scale * 1e-13 {
            u.set_column(i, &(a.column(i) / sigma[i]));
        } else {
            missing.push(i);
        }
    }
    // Complete U for null directions by Gram-Schmidt on the standard basis.
    let mut e = 0;
    for i in missing {
        while e < rows {
            let mut cand = RVector::zeros(rows);
            cand[e] = 1.0;
            e += 1;
            for j in 0..n {
                let uj = u.column(j).clone_owned();
                let proj = uj.dot(&cand);
                cand -= uj * proj;
            }
            let norm = cand.norm();
            if norm > 1e-8 {
                u.set_column(i, &(cand / norm));
                break;
            }
        }
    }
    (u, sigma, v)
}

fn rotate_columns(m: &mut RMatrix, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, p)], m[(r, q)]);
        m[(r, p)] = c * x - s * y;
        m[(r, q)] = s * x + c * y;
    }
}

/// Descending by value; near-equal values ordered by `vec_cmp`, greatest first.
fn sort_spectrum<T>(items: &mut [(f64, T)], vec_cmp: impl Fn(&T, &T) -> Ordering) {
    items.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let scale = items.iter().map(|(v, _)| v.abs()).fold(1.0f64, f64::max);
    let mut start = 0;
    while start < items.len() {
        let mut end = start + 1;
        while end < items.len() && (items[end - 1].0 - items[end].0).abs() <= TIE_EPS * scale {
            end += 1;
        }
        items[start..end].sort_by(|a, b| vec_cmp(&b.1, &a.1));
        start = end;
    }
}

fn canonical_phase(v: &mut [Complex64]) {
    if let Some(first) = v.iter().find(|z| z.norm() > CANON_EPS).copied() {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

fn cmp_tol(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= CANON_EPS {
        Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    }
}

fn lex_cmp_real(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cmp_tol(*x, *y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

fn lex_cmp_complex(a: &[Complex64], b: &[Complex64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cmp_tol(x.re, y.re).then(cmp_tol(x.im, y.im)))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

pub fn partial_trace(rho: &CMatrix, d_a: usize, d_b: usize, keep: Subsystem) -> Result<CMatrix> {
    let n = d_a * d_b;
    if rho.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over {d_a}x{d_b} needs a {n}x{n} matrix, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(match keep {
        Subsystem::A => CMatrix::from_fn(d_a, d_a, |i, j| {
            (0..d_b).map(|k| rho[(i * d_b + k, j * d_b + k)]).sum()
        }),
        Subsystem::B => CMatrix::from_fn(d_b, d_b, |k, l| {
            (0..d_a).map(|i| rho[(i * d_b + k, i * d_b + l)]).sum()
        }),
    })
}

/// Determinant by LU with partial pivoting.
///
/// Returns exactly `0.0` once a pivot drops below `1e-14` times the largest
/// entry of `m`, so rank-deficient inputs do not leak rounding noise.
pub fn determinant(m: &RMatrix) -> f64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut a = m.clone();
    let mut det = 1.0;
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|r| (r, a[(r, k)]))
            .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap_or(Ordering::Equal))
            .expect("non-empty pivot range");
        if pivot.abs() < PIVOT_EPS * scale {
            return 0.0;
        }
        if p != k {
            a.swap_rows(p, k);
            det = -det;
        }
        det *= pivot;
        for r in (k + 1)..n {
            let f = a[(r, k)] / pivot;
            if f != 0.0 {
                for c in (k + 1)..n {
                    a[(r, c)] -= f * a[(k, c)];
                }
            }
        }
    }
    det
}
