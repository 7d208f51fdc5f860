//! Covariance matrix `Q`, the determinant witness and its two-qubit bound.

use nalgebra::{SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::linalg::{determinant, svd, trace_kron, trace_product, RMatrix, RVector, Subsystem};
use crate::measurements::{observable_matrix, DichotomicObservable, MeasurementSet};
use crate::states::{bloch_data, shared_basis, DensityMatrix};
use crate::{Error, Result};

/// Rounding noise on the analytic path; comfortably above observed residues of `det Q`.
pub const ANALYTIC_NOISE_FLOOR: f64 = 1e-9;
/// A witness counts as nonzero above this multiple of the noise floor.
pub const DETECTION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationPath {
    Analytic,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub q: Vec<Vec<f64>>,
    pub w: f64,
    pub d_a: usize,
    pub d_b: usize,
    pub path: EvaluationPath,
}

impl WitnessReport {
    pub fn from_q(q: RMatrix, d_a: usize, d_b: usize, path: EvaluationPath) -> Self {
        let w = determinant(&q);
        let rows = (0..q.nrows())
            .map(|r| q.row(r).iter().copied().collect())
            .collect();
        Self { q: rows, w, d_a, d_b, path }
    }

    pub fn q_matrix(&self) -> RMatrix {
        let n = self.q.len();
        RMatrix::from_fn(n, n, |r, c| self.q[r][c])
    }

    /// `|w|` above `DETECTION_FACTOR` times the given noise floor.
    pub fn detects_discord(&self, noise_floor: f64) -> bool {
        self.w.abs() > DETECTION_FACTOR * noise_floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub joint: f64,
    pub marginal_a: f64,
    pub marginal_b: f64,
}

impl Expectations {
    pub fn covariance(&self) -> f64 {
        self.joint - self.marginal_a * self.marginal_b
    }
}

fn check_dims(rho: &DensityMatrix, da: usize, db: usize) -> Result<()> {
    if rho.d_a() != da || rho.d_b() != db {
        return Err(Error::DimensionMismatch(format!(
            "observables act on {da}x{db} but the state is {}x{}",
            rho.d_a(),
            rho.d_b()
        )));
    }
    Ok(())
}

/// `Tr[ρ A⊗B]`, `Tr[ρ_A A]` and `Tr[ρ_B B]` by direct trace.
pub fn expectations(
    rho: &DensityMatrix,
    a: &DichotomicObservable,
    b: &DichotomicObservable,
) -> Result<Expectations> {
    check_dims(rho, a.d(), b.d())?;
    let am = observable_matrix(a, shared_basis(a.d())?)?;
    let bm = observable_matrix(b, shared_basis(b.d())?)?;
    Ok(Expectations {
        joint: trace_kron(rho.matrix(), &am, &bm).re,
        marginal_a: trace_product(&rho.reduced(Subsystem::A), &am).re,
        marginal_b: trace_product(&rho.reduced(Subsystem::B), &bm).re,
    })
}

pub fn q_value(rho: &DensityMatrix, a: &DichotomicObservable, b: &DichotomicObservable) -> Result<f64> {
    Ok(expectations(rho, a, b)?.covariance())
}

/// `Q[x][y]` from direct traces and `W = det Q`.
pub fn witness_value(
    rho: &DensityMatrix,
    alice: &MeasurementSet,
    bob: &MeasurementSet,
) -> Result<WitnessReport> {
    if alice.len() != bob.len() {
        return Err(Error::SettingCountMismatch {
            alice: alice.len(),
            bob: bob.len(),
        });
    }
    check_dims(rho, alice.d(), bob.d())?;
    let basis_a = shared_basis(alice.d())?;
    let basis_b = shared_basis(bob.d())?;
    let rho_a = rho.reduced(Subsystem::A);
    let rho_b = rho.reduced(Subsystem::B);

    let a_ops = alice
        .observables()
        .iter()
        .map(|o| observable_matrix(o, basis_a))
        .collect::<Result<Vec<_>>>()?;
    let b_ops = bob
        .observables()
        .iter()
        .map(|o| observable_matrix(o, basis_b))
        .collect::<Result<Vec<_>>>()?;
    let ma: Vec<f64> = a_ops.iter().map(|m| trace_product(&rho_a, m).re).collect();
    let mb: Vec<f64> = b_ops.iter().map(|m| trace_product(&rho_b, m).re).collect();

    let n = alice.len();
    let q = RMatrix::from_fn(n, n, |x, y| {
        trace_kron(rho.matrix(), &a_ops[x], &b_ops[y]).re - ma[x] * mb[y]
    });
    Ok(WitnessReport::from_q(q, rho.d_a(), rho.d_b(), EvaluationPath::Analytic))
}

/// `det[c · A_xᵗ S B_y]` with `c = (d_a-1)(d_b-1)`.
pub fn witness_from_bloch(
    s_hat: &RMatrix,
    alice_blochs: &[RVector],
    bob_blochs: &[RVector],
    d_a: usize,
    d_b: usize,
) -> Result<f64> {
    Ok(determinant(&q_from_bloch(s_hat, alice_blochs, bob_blochs, d_a, d_b)?))
}

pub fn q_from_bloch(
    s_hat: &RMatrix,
    alice_blochs: &[RVector],
    bob_blochs: &[RVector],
    d_a: usize,
    d_b: usize,
) -> Result<RMatrix> {
    if alice_blochs.len() != bob_blochs.len() {
        return Err(Error::SettingCountMismatch {
            alice: alice_blochs.len(),
            bob: bob_blochs.len(),
        });
    }
    let (na, nb) = (d_a * d_a - 1, d_b * d_b - 1);
    if s_hat.shape() != (na, nb)
        || alice_blochs.iter().any(|v| v.len() != na)
        || bob_blochs.iter().any(|v| v.len() != nb)
    {
        return Err(Error::DimensionMismatch(format!(
            "S must be {na}x{nb} with Bloch vectors of length {na} and {nb}"
        )));
    }
    let scale = ((d_a - 1) * (d_b - 1)) as f64;
    let n = alice_blochs.len();
    let sb: Vec<RVector> = bob_blochs.iter().map(|b| s_hat * b).collect();
    Ok(RMatrix::from_fn(n, n, |x, y| scale * alice_blochs[x].dot(&sb[y])))
}

/// `(A₀ × A₁) · (S B₀ × S B₁)` for two qubits.
pub fn two_qubit_cross_form(
    s_hat: &RMatrix,
    a0: &RVector,
    a1: &RVector,
    b0: &RVector,
    b1: &RVector,
) -> Result<f64> {
    if s_hat.shape() != (3, 3) || [a0, a1, b0, b1].iter().any(|v| v.len() != 3) {
        return Err(Error::DimensionMismatch("cross-product form is defined for qubits only".into()));
    }
    let v3 = |v: &RVector| Vector3::new(v[0], v[1], v[2]);
    let sb0 = s_hat * b0;
    let sb1 = s_hat * b1;
    Ok(v3(a0).cross(&v3(a1)).dot(&v3(&sb0).cross(&v3(&sb1))))
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.d_a() != 2 || rho.d_b() != 2 {
        return Err(Error::UnsupportedDimension {
            d_a: rho.d_a(),
            d_b: rho.d_b(),
        });
    }
    Ok(())
}

/// Product of the two largest singular values of `S`.
pub fn max_witness_bound(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubits(rho)?;
    let sv = svd(&bloch_data(rho)?.s_hat).singular_values;
    Ok(sv[0] * sv[1])
}

/// Closed-form two-qubit geometric discord
/// `¼(|s_a|² + ‖T‖²_F − λ_max(s_a s_aᵗ + T Tᵗ))`.
pub fn geometric_discord_2q(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubits(rho)?;
    let b = bloch_data(rho)?;
    let k = &b.s_a * b.s_a.transpose() + &b.t * b.t.transpose();
    let lambda_max = SymmetricEigen::new(k)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let value = 0.25 * (b.s_a.norm_squared() + b.t.norm_squared() - lambda_max);
    Ok(value.max(0.0))
}
