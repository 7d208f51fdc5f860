//! Bipartite density matrices and their Bloch / Gell-Mann coordinates.
//!
//! A state on `C^{d_a} ⊗ C^{d_b}` is expanded in orthonormal local bases
//! `{τ_i}` and `{υ_j}` (with `τ_1 = I/√d_a`, `υ_1 = I/√d_b`) as
//!
//! ```text
//! ρ = (τ_1⊗υ_1 + √(d_a-1) s_a·τ⊗υ_1 + √(d_b-1) τ_1⊗s_b·υ
//!      + √((d_a-1)(d_b-1)) τᵗ T υ) / √(d_a d_b)
//! ```
//!
//! With this normalization a qubit reproduces the familiar Pauli coordinates
//! `s_a,i = Tr[ρ_A σ_i]` and `T_ij = Tr[ρ σ_i⊗σ_j]` exactly, so the same
//! [`BlochData`] serves both the two-qubit and the high-dimensional formulas.

use std::sync::OnceLock;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{
    hermiticity_deviation, hermitian_eigen, is_finite, partial_trace, trace_kron, trace_product,
    unitarity_deviation, CMatrix, RMatrix, RVector, Subsystem,
};
use crate::tol::{EQ_TOL, HERM_TOL, PSD_TOL};
use crate::{Error, Result};

/// A validated density matrix on a `d_a x d_b` bipartite system.
///
/// `d_b = 1` is allowed and denotes a single (local) system of dimension `d_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    d_a: usize,
    d_b: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates shape, finiteness, Hermiticity, unit trace and positivity.
    pub fn new(d_a: usize, d_b: usize, matrix: CMatrix) -> Result<Self> {
        let n = d_a * d_b;
        if d_a == 0 || d_b == 0 {
            return Err(Error::InvalidState {
                invariant: "dimension",
                detail: format!("dimensions must be positive, got {d_a}x{d_b}"),
            });
        }
        if matrix.shape() != (n, n) {
            return Err(Error::InvalidState {
                invariant: "dimension",
                detail: format!(
                    "expected a {n}x{n} matrix for d_a={d_a}, d_b={d_b}, got {}x{}",
                    matrix.nrows(),
                    matrix.ncols()
                ),
            });
        }
        if !is_finite(&matrix) {
            return Err(Error::InvalidState {
                invariant: "finite",
                detail: "matrix contains NaN or infinite entries".into(),
            });
        }
        let dev = hermiticity_deviation(&matrix);
        if dev > HERM_TOL {
            return Err(Error::InvalidState {
                invariant: "hermitian",
                detail: format!("max |ρ - ρ†| entry is {dev:.3e}"),
            });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > HERM_TOL || tr.im.abs() > HERM_TOL {
            return Err(Error::InvalidState {
                invariant: "unit trace",
                detail: format!("trace is {} + {}i", tr.re, tr.im),
            });
        }
        let eig = hermitian_eigen(&matrix)?;
        let min = *eig.values.last().expect("non-empty spectrum");
        if min < -PSD_TOL {
            return Err(Error::InvalidState {
                invariant: "positive semidefinite",
                detail: format!("smallest eigenvalue is {min:.3e}"),
            });
        }
        Ok(Self { d_a, d_b, matrix })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn reduced(&self, keep: Subsystem) -> CMatrix {
        partial_trace(&self.matrix, self.d_a, self.d_b, keep).expect("shape checked on construction")
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    /// `(U⊗V) ρ (U⊗V)†`.
    pub fn local_unitary(&self, u: &CMatrix, v: &CMatrix) -> Result<Self> {
        if u.shape() != (self.d_a, self.d_a) || v.shape() != (self.d_b, self.d_b) {
            return Err(Error::DimensionMismatch(format!(
                "local unitaries must be {0}x{0} and {1}x{1}",
                self.d_a, self.d_b
            )));
        }
        let uv = crate::linalg::kron(u, v);
        let m = &uv * &self.matrix * uv.adjoint();
        Self::new(self.d_a, self.d_b, symmetrize(m))
    }
}

fn symmetrize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Orthonormal Hermitian operator basis with `operators[0] = I/√d`.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    d: usize,
    operators: Vec<CMatrix>,
}

impl HermitianBasis {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// The `d² - 1` traceless elements.
    pub fn traceless(&self) -> &[CMatrix] {
        &self.operators[1..]
    }
}

/// Generalized Gell-Mann basis normalized to `Tr[τ_i τ_j] = δ_ij`.
///
/// Order: `I/√d`, symmetric `(j,k)` for `j<k` lexicographically,
/// antisymmetric in the same order, then diagonal by increasing size.
pub fn gell_mann_basis(d: usize) -> Result<HermitianBasis> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let zero = Complex64::new(0.0, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut ops = Vec::with_capacity(d * d);
    ops.push(CMatrix::identity(d, d) * Complex64::new(1.0 / (d as f64).sqrt(), 0.0));

    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
        .collect();
    for &(j, k) in &pairs {
        let mut m = CMatrix::from_element(d, d, zero);
        m[(j, k)] = Complex64::new(h, 0.0);
        m[(k, j)] = Complex64::new(h, 0.0);
        ops.push(m);
    }
    for &(j, k) in &pairs {
        let mut m = CMatrix::from_element(d, d, zero);
        m[(j, k)] = Complex64::new(0.0, -h);
        m[(k, j)] = Complex64::new(0.0, h);
        ops.push(m);
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::from_element(d, d, zero);
        for i in 0..l {
            m[(i, i)] = Complex64::new(norm, 0.0);
        }
        m[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
        ops.push(m);
    }
    Ok(HermitianBasis { d, operators: ops })
}

const CACHED_DIMS: usize = 16;

/// Process-wide Gell-Mann bases for small dimensions.
pub(crate) fn shared_basis(d: usize) -> Result<&'static HermitianBasis> {
    static CACHE: [OnceLock<HermitianBasis>; CACHED_DIMS + 1] = [const { OnceLock::new() }; CACHED_DIMS + 1];
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if d > CACHED_DIMS {
        return Err(Error::DimensionMismatch(format!(
            "local dimension {d} exceeds the supported maximum {CACHED_DIMS}"
        )));
    }
    Ok(CACHE[d].get_or_init(|| gell_mann_basis(d).expect("d >= 2")))
}

/// Local Bloch vectors, correlation tensor and `S = T - s_a s_bᵗ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochData {
    pub d_a: usize,
    pub d_b: usize,
    pub s_a: RVector,
    pub s_b: RVector,
    pub t: RMatrix,
    pub s_hat: RMatrix,
}

impl BlochData {
    pub fn new(d_a: usize, d_b: usize, s_a: RVector, s_b: RVector, t: RMatrix) -> Result<Self> {
        let (na, nb) = (d_a * d_a - 1, d_b * d_b - 1);
        if s_a.len() != na || s_b.len() != nb || t.shape() != (na, nb) {
            return Err(Error::DimensionMismatch(format!(
                "Bloch data for {d_a}x{d_b} needs s_a of length {na}, s_b of length {nb}, T of {na}x{nb}"
            )));
        }
        let s_hat = &t - &s_a * s_b.transpose();
        Ok(Self { d_a, d_b, s_a, s_b, t, s_hat })
    }

    /// Rebuild the operator from its coordinates in the given bases.
    pub fn reconstruct(&self, basis_a: &HermitianBasis, basis_b: &HermitianBasis) -> Result<CMatrix> {
        check_bases(self.d_a, self.d_b, basis_a, basis_b)?;
        let (da, db) = (self.d_a as f64, self.d_b as f64);
        let ca = (da - 1.0).sqrt();
        let cb = (db - 1.0).sqrt();
        let tau = basis_a.operators();
        let ups = basis_b.operators();
        let kr = crate::linalg::kron;
        let re = |x: f64| Complex64::new(x, 0.0);

        let mut acc = kr(&tau[0], &ups[0]);
        let local_a = weighted_sum(basis_a.traceless(), self.s_a.as_slice());
        acc += kr(&local_a, &ups[0]) * re(ca);
        let local_b = weighted_sum(basis_b.traceless(), self.s_b.as_slice());
        acc += kr(&tau[0], &local_b) * re(cb);
        for i in 0..self.t.nrows() {
            let row: Vec<f64> = self.t.row(i).iter().copied().collect();
            let ups_part = weighted_sum(basis_b.traceless(), &row);
            acc += kr(&tau[i + 1], &ups_part) * re(ca * cb);
        }
        Ok(acc * re(1.0 / (da * db).sqrt()))
    }
}

fn weighted_sum(ops: &[CMatrix], weights: &[f64]) -> CMatrix {
    let d = ops[0].nrows();
    ops.iter()
        .zip(weights)
        .fold(CMatrix::zeros(d, d), |acc, (op, w)| acc + op * Complex64::new(*w, 0.0))
}

fn check_bases(d_a: usize, d_b: usize, a: &HermitianBasis, b: &HermitianBasis) -> Result<()> {
    if a.d() != d_a || b.d() != d_b {
        return Err(Error::DimensionMismatch(format!(
            "bases of dimension {}x{} do not match a {d_a}x{d_b} state",
            a.d(),
            b.d()
        )));
    }
    Ok(())
}

/// Project `ρ` onto `τ_i ⊗ υ_j` with the normalization described at module level.
pub fn bloch_decompose(
    rho: &DensityMatrix,
    basis_a: &HermitianBasis,
    basis_b: &HermitianBasis,
) -> Result<BlochData> {
    let (d_a, d_b) = (rho.d_a(), rho.d_b());
    check_bases(d_a, d_b, basis_a, basis_b)?;
    let (da, db) = (d_a as f64, d_b as f64);
    let m = rho.matrix();

    let rho_a = rho.reduced(Subsystem::A);
    let rho_b = rho.reduced(Subsystem::B);
    let fa = (da / (da - 1.0)).sqrt();
    let fb = (db / (db - 1.0)).sqrt();
    let s_a = RVector::from_iterator(
        d_a * d_a - 1,
        basis_a.traceless().iter().map(|tau| fa * trace_product(&rho_a, tau).re),
    );
    let s_b = RVector::from_iterator(
        d_b * d_b - 1,
        basis_b.traceless().iter().map(|ups| fb * trace_product(&rho_b, ups).re),
    );
    let ft = (da * db / ((da - 1.0) * (db - 1.0))).sqrt();
    let ta = basis_a.traceless();
    let tb = basis_b.traceless();
    let t = RMatrix::from_fn(ta.len(), tb.len(), |i, j| ft * trace_kron(m, &ta[i], &tb[j]).re);
    BlochData::new(d_a, d_b, s_a, s_b, t)
}

/// Decompose with the standard Gell-Mann bases.
pub fn bloch_data(rho: &DensityMatrix) -> Result<BlochData> {
    bloch_decompose(rho, shared_basis(rho.d_a())?, shared_basis(rho.d_b())?)
}

pub fn s_matrix(b: &BlochData) -> RMatrix {
    &b.t - &b.s_a * b.s_b.transpose()
}

/// `p |ψ⁻⟩⟨ψ⁻| + (1-p) I/4` with `|ψ⁻⟩ = (|01⟩ - |10⟩)/√2`.
pub fn werner(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange { name: "p", value: p });
    }
    let mut m = CMatrix::identity(4, 4) * Complex64::new((1.0 - p) / 4.0, 0.0);
    let half = Complex64::new(p / 2.0, 0.0);
    m[(1, 1)] += half;
    m[(2, 2)] += half;
    m[(1, 2)] -= half;
    m[(2, 1)] -= half;
    DensityMatrix::new(2, 2, m)
}

/// `Σ_i p_i U|i⟩⟨i|U† ⊗ ρ_i`; the computational basis when `alice_basis` is `None`.
///
/// Each `local_states[i]` must be a single-system state (`d_b() == 1`).
pub fn classical_quantum(
    probs: &[f64],
    local_states: &[DensityMatrix],
    alice_basis: Option<&CMatrix>,
) -> Result<DensityMatrix> {
    let d_a = probs.len();
    if d_a < 2 {
        return Err(Error::InvalidDimension(d_a));
    }
    if local_states.len() != d_a {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities but {} local states",
            d_a,
            local_states.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::InvalidProbabilities(format!("negative or non-finite entry {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidProbabilities(format!("probabilities sum to {total}")));
    }
    let d_b = local_states[0].d_a();
    if local_states.iter().any(|s| s.d_b() != 1 || s.d_a() != d_b) {
        return Err(Error::DimensionMismatch(
            "local states must all be single systems of the same dimension".into(),
        ));
    }
    let u = match alice_basis {
        Some(u) => {
            if u.shape() != (d_a, d_a) {
                return Err(Error::DimensionMismatch(format!(
                    "alice basis must be {d_a}x{d_a}, got {}x{}",
                    u.nrows(),
                    u.ncols()
                )));
            }
            let deviation = unitarity_deviation(u);
            if deviation > 1e-10 {
                return Err(Error::NotUnitary { deviation });
            }
            u.clone()
        }
        None => CMatrix::identity(d_a, d_a),
    };

    let mut m = CMatrix::zeros(d_a * d_b, d_a * d_b);
    for (i, (p, local)) in probs.iter().zip(local_states).enumerate() {
        if *p == 0.0 {
            continue;
        }
        let col = u.column(i);
        let proj = &col * col.adjoint();
        m += crate::linalg::kron(&proj, local.matrix()) * Complex64::new(*p, 0.0);
    }
    DensityMatrix::new(d_a, d_b, symmetrize(m))
}

/// Ginibre-induced random state `G G† / Tr[G G†]` with `G` of shape `(d_a d_b) x rank`.
pub fn random_density(d_a: usize, d_b: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_density_with(d_a, d_b, rank, &mut rng)
}

pub fn random_density_with<R: Rng + ?Sized>(
    d_a: usize,
    d_b: usize,
    rank: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let n = d_a * d_b;
    if rank == 0 || rank > n {
        return Err(Error::InvalidRank { rank, max: n });
    }
    let g = CMatrix::from_fn(n, rank, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let gg = &g * g.adjoint();
    let tr = gg.trace().re;
    DensityMatrix::new(d_a, d_b, symmetrize(gg / Complex64::new(tr, 0.0)))
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DVector::from_iterator(
        d,
        (0..d).map(|i| {
            let rii = r[(i, i)];
            if rii.norm() > 0.0 {
                rii / rii.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        }),
    );
    q * CMatrix::from_diagonal(&phases)
}

/// Bloch norm of a qubit or qudit reduced state, `|s|` with the module normalization.
pub fn local_bloch_norm(local: &CMatrix) -> f64 {
    // Tr[ρ²] = (1 + (d-1)|s|²)/d
    let d = local.nrows() as f64;
    let purity = trace_product(local, local).re;
    ((d * purity - 1.0) / (d - 1.0)).max(0.0).sqrt()
}

pub(crate) fn within_unit_ball(v: &RVector) -> bool {
    v.norm() <= 1.0 + EQ_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, svd};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    fn qubit(m: [[f64; 2]; 2]) -> DensityMatrix {
        DensityMatrix::new(
            2,
            1,
            CMatrix::from_row_slice(2, 2, &[c(m[0][0], 0.), c(m[0][1], 0.), c(m[1][0], 0.), c(m[1][1], 0.)]),
        )
        .unwrap()
    }

    #[test]
    fn qubit_basis_is_scaled_pauli() {
        let b = gell_mann_basis(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ops = b.operators();
        assert_eq!(ops.len(), 4);
        let expect = [
            [c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)],
            [c(0., 0.), c(s, 0.), c(s, 0.), c(0., 0.)],
            [c(0., 0.), c(0., -s), c(0., s), c(0., 0.)],
            [c(s, 0.), c(0., 0.), c(0., 0.), c(-s, 0.)],
        ];
        for (op, e) in ops.iter().zip(expect) {
            let m = CMatrix::from_row_slice(2, 2, &e);
            assert!(max_abs(&(op - m)) < 1e-15);
        }
    }

    #[test]
    fn gell_mann_orthonormal_and_hermitian() {
        for d in 2..=5 {
            let b = gell_mann_basis(d).unwrap();
            assert_eq!(b.operators().len(), d * d);
            for (i, x) in b.operators().iter().enumerate() {
                assert!(hermiticity_deviation(x) < 1e-15);
                for (j, y) in b.operators().iter().enumerate() {
                    let ip = trace_product(x, y);
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - c(target, 0.0)).norm() < 1e-12, "d={d} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn gell_mann_completeness() {
        // Σ_i τ_i τ_i = d I for any orthonormal operator basis of d x d matrices.
        let d = 4;
        let b = gell_mann_basis(d).unwrap();
        let sum = b.operators().iter().fold(CMatrix::zeros(d, d), |acc, t| acc + t * t);
        assert!(max_abs(&(sum - CMatrix::identity(d, d) * c(d as f64, 0.0))) < 1e-12);
    }

    #[test]
    fn gell_mann_rejects_small_d() {
        assert!(matches!(gell_mann_basis(1), Err(Error::InvalidDimension(1))));
    }

    #[test]
    fn werner_endpoints_and_spectrum() {
        let w0 = werner(0.0).unwrap();
        assert!(max_abs(&(w0.matrix() - CMatrix::identity(4, 4) * c(0.25, 0.0))) < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = CMatrix::from_column_slice(4, 1, &[c(0., 0.), c(s, 0.), c(-s, 0.), c(0., 0.)]);
        let w1 = werner(1.0).unwrap();
        assert!(max_abs(&(w1.matrix() - &psi * psi.adjoint())) < 1e-15);

        for p in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let eig = hermitian_eigen(werner(p).unwrap().matrix()).unwrap();
            assert!((eig.values[0] - (1.0 + 3.0 * p) / 4.0).abs() < 1e-12);
            for v in &eig.values[1..] {
                assert!((v - (1.0 - p) / 4.0).abs() < 1e-12);
            }
        }
        assert!(matches!(werner(1.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(werner(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn werner_bloch_data() {
        for p in [0.0, 0.3, 0.8, 1.0] {
            let b = bloch_data(&werner(p).unwrap()).unwrap();
            assert!(b.s_a.norm() < 1e-14 && b.s_b.norm() < 1e-14);
            let expect = RMatrix::from_diagonal_element(3, 3, -p);
            assert!((&b.t - &expect).abs().max() < 1e-14);
            assert!((s_matrix(&b) - expect).abs().max() < 1e-14);
        }
    }

    #[test]
    fn qubit_convention_matches_pauli_traces() {
        let rho = random_density(2, 2, 4, 11).unwrap();
        let b = bloch_data(&rho).unwrap();
        let basis = gell_mann_basis(2).unwrap();
        let r2 = c(std::f64::consts::SQRT_2, 0.0);
        let pauli: Vec<CMatrix> = basis.traceless().iter().map(|t| t * r2).collect();
        let id = CMatrix::identity(2, 2);
        for i in 0..3 {
            let sa = trace_product(rho.matrix(), &kron(&pauli[i], &id)).re;
            assert!((sa - b.s_a[i]).abs() < 1e-12);
            for j in 0..3 {
                let tij = trace_product(rho.matrix(), &kron(&pauli[i], &pauli[j])).re;
                assert!((tij - b.t[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_state_has_factorized_t() {
        let ra = random_density(3, 1, 3, 1).unwrap();
        let rb = random_density(2, 1, 2, 2).unwrap();
        let prod = DensityMatrix::new(3, 2, kron(ra.matrix(), rb.matrix())).unwrap();
        let b = bloch_data(&prod).unwrap();
        let outer = &b.s_a * b.s_b.transpose();
        assert!((&b.t - outer).abs().max() < 1e-12);
        assert!(s_matrix(&b).abs().max() < 1e-12);
    }

    #[test]
    fn decompose_reconstruct_roundtrip() {
        for (da, db) in [(2, 2), (2, 3), (3, 3), (3, 4), (4, 2), (4, 4)] {
            let ba = gell_mann_basis(da).unwrap();
            let bb = gell_mann_basis(db).unwrap();
            for seed in 0..20u64 {
                let rho = random_density(da, db, 1 + (seed as usize % (da * db)), seed).unwrap();
                let b = bloch_decompose(&rho, &ba, &bb).unwrap();
                let rebuilt = b.reconstruct(&ba, &bb).unwrap();
                assert!(max_abs(&(rebuilt - rho.matrix())) < 1e-10);
                assert!(within_unit_ball(&b.s_a) && within_unit_ball(&b.s_b));
            }
        }
    }

    #[test]
    fn local_bloch_norms_match_partial_traces() {
        for (da, db) in [(2, 2), (3, 2), (4, 3)] {
            let rho = random_density(da, db, 2, 99).unwrap();
            let b = bloch_data(&rho).unwrap();
            let na = local_bloch_norm(&partial_trace(rho.matrix(), da, db, Subsystem::A).unwrap());
            let nb = local_bloch_norm(&partial_trace(rho.matrix(), da, db, Subsystem::B).unwrap());
            assert!((b.s_a.norm() - na).abs() < 1e-10);
            assert!((b.s_b.norm() - nb).abs() < 1e-10);
        }
    }

    #[test]
    fn decompose_rejects_wrong_basis() {
        let rho = werner(0.5).unwrap();
        let b3 = gell_mann_basis(3).unwrap();
        let b2 = gell_mann_basis(2).unwrap();
        assert!(matches!(bloch_decompose(&rho, &b3, &b2), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn classical_quantum_examples() {
        let r0 = random_density(2, 1, 2, 5).unwrap();
        let r1 = random_density(2, 1, 2, 6).unwrap();

        let cq = classical_quantum(&[1.0, 0.0], &[r0.clone(), r1.clone()], None).unwrap();
        let mut ket0 = CMatrix::zeros(2, 2);
        ket0[(0, 0)] = c(1.0, 0.0);
        assert!(max_abs(&(cq.matrix() - kron(&ket0, r0.matrix()))) < 1e-15);

        let same = classical_quantum(&[0.5, 0.5], &[r0.clone(), r0.clone()], None).unwrap();
        let expect = kron(&(CMatrix::identity(2, 2) * c(0.5, 0.0)), r0.matrix());
        assert!(max_abs(&(same.matrix() - expect)) < 1e-15);

        let up = qubit([[1.0, 0.0], [0.0, 0.0]]);
        let down = qubit([[0.0, 0.0], [0.0, 1.0]]);
        let cq = classical_quantum(&[0.5, 0.5], &[up, down], None).unwrap();
        let s = s_matrix(&bloch_data(&cq).unwrap());
        let mut expect = RMatrix::zeros(3, 3);
        expect[(2, 2)] = 1.0;
        assert!((s - expect).abs().max() < 1e-14);
    }

    #[test]
    fn classical_quantum_errors() {
        let r = random_density(2, 1, 2, 5).unwrap();
        assert!(matches!(
            classical_quantum(&[0.6, 0.6], &[r.clone(), r.clone()], None),
            Err(Error::InvalidProbabilities(_))
        ));
        assert!(matches!(
            classical_quantum(&[1.5, -0.5], &[r.clone(), r.clone()], None),
            Err(Error::InvalidProbabilities(_))
        ));
        assert!(matches!(
            classical_quantum(&[0.5, 0.5], &[r.clone()], None),
            Err(Error::DimensionMismatch(_))
        ));
        let not_unitary = CMatrix::identity(2, 2) * c(2.0, 0.0);
        assert!(matches!(
            classical_quantum(&[0.5, 0.5], &[r.clone(), r], Some(&not_unitary)),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn classical_quantum_rank_bound_any_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (da, db) in [(2, 2), (2, 3), (3, 2), (3, 3), (4, 4)] {
            for _ in 0..10 {
                let raw: Vec<f64> = (0..da).map(|_| rng.random_range(0.0..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
                let drift: f64 = 1.0 - probs.iter().sum::<f64>();
                probs[0] += drift;
                let locals: Vec<_> = (0..da)
                    .map(|_| random_density_with(db, 1, db, &mut rng).unwrap())
                    .collect();
                let u = random_unitary(da, &mut rng);
                let cq = classical_quantum(&probs, &locals, Some(&u)).unwrap();
                let sv = svd(&s_matrix(&bloch_data(&cq).unwrap())).singular_values;
                assert!(sv[(da - 1)..].iter().all(|s| *s < 1e-9), "{da}x{db}: {sv:?}");
            }
        }
    }

    #[test]
    fn random_density_contracts() {
        let pure = random_density(2, 3, 1, 4).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-10);

        let a = random_density(3, 3, 9, 7).unwrap();
        let b = random_density(3, 3, 9, 7).unwrap();
        assert_eq!(a, b);

        for seed in 0..1000u64 {
            let r = random_density(2, 2, 4, seed).unwrap();
            let eig = hermitian_eigen(r.matrix()).unwrap();
            assert!(*eig.values.last().unwrap() > 0.0);
        }
        assert!(matches!(random_density(2, 2, 0, 1), Err(Error::InvalidRank { .. })));
        assert!(matches!(random_density(2, 2, 5, 1), Err(Error::InvalidRank { .. })));
    }

    #[test]
    fn density_matrix_rejections_name_invariant() {
        let mut m = CMatrix::identity(4, 4) * c(0.25, 0.0);
        m[(0, 1)] = c(0.1, 0.0);
        match DensityMatrix::new(2, 2, m) {
            Err(Error::InvalidState { invariant, .. }) => assert_eq!(invariant, "hermitian"),
            other => panic!("unexpected {other:?}"),
        }
        let m = CMatrix::identity(4, 4) * c(0.3, 0.0);
        match DensityMatrix::new(2, 2, m) {
            Err(Error::InvalidState { invariant, .. }) => assert_eq!(invariant, "unit trace"),
            other => panic!("unexpected {other:?}"),
        }
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.2, 0.), c(-0.2, 0.)]));
        match DensityMatrix::new(2, 1, m) {
            Err(Error::InvalidState { invariant, .. }) => assert_eq!(invariant, "positive semidefinite"),
            other => panic!("unexpected {other:?}"),
        }
        match DensityMatrix::new(2, 2, CMatrix::identity(3, 3)) {
            Err(Error::InvalidState { invariant, .. }) => assert_eq!(invariant, "dimension"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
