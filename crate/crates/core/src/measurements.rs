//! Uncharacterized dichotomic measurements.
//!
//! An observable on a `d`-level system is stored through its identity
//! coefficient `a` and Bloch vector `b`:
//!
//! ```text
//! A = a I + √(d(d-1)) Σ_i b_i τ_i
//! ```
//!
//! which for a qubit is the familiar `a I + b·σ`. The two POVM elements are
//! `(I ± A)/2`, so an observable is physical exactly when the spectrum of
//! `A` lies in `[-1, 1]`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_eigen, svd, trace_product, CMatrix, RMatrix, RVector};
use crate::states::{shared_basis, within_unit_ball, HermitianBasis};
use crate::tol::{EQ_TOL, PSD_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomicObservable {
    d: usize,
    a: f64,
    bloch: RVector,
}

/// Outcome of checking an observable against both positivity criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// `|a| + (d-1)|b| <= 1`, sufficient but not necessary for positivity.
    pub norm_constraint: bool,
    /// Spectrum of `A` inside `[-1, 1]` within `PSD_TOL`.
    pub spectral: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl ValidationReport {
    /// Acceptance is decided by the spectrum alone.
    pub fn accepted(&self) -> bool {
        self.spectral
    }

    /// Physical but outside the norm-constraint region.
    pub fn flagged(&self) -> bool {
        self.spectral && !self.norm_constraint
    }
}

fn dim_from_bloch_len(len: usize) -> Option<usize> {
    let d = ((len + 1) as f64).sqrt().round() as usize;
    (d >= 2 && d * d == len + 1).then_some(d)
}

/// Smallest and largest eigenvalue of `√(d(d-1)) b·τ`.
fn traceless_extremes(d: usize, bloch: &RVector) -> Result<(f64, f64)> {
    if d == 2 {
        let n = bloch.norm();
        return Ok((-n, n));
    }
    let basis = shared_basis(d)?;
    let op = bloch_operator(d, bloch, basis);
    let eig = hermitian_eigen(&op)?;
    Ok((*eig.values.last().expect("non-empty"), eig.values[0]))
}

fn bloch_operator(d: usize, bloch: &RVector, basis: &HermitianBasis) -> CMatrix {
    let scale = ((d * (d - 1)) as f64).sqrt();
    basis
        .traceless()
        .iter()
        .zip(bloch.iter())
        .fold(CMatrix::zeros(d, d), |acc, (tau, b)| acc + tau * Complex64::new(scale * b, 0.0))
}

/// Check raw observable parameters without constructing the observable.
pub fn validate(d: usize, a: f64, bloch: &RVector) -> Result<ValidationReport> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if bloch.len() != d * d - 1 {
        return Err(Error::DimensionMismatch(format!(
            "a {d}-level observable needs a Bloch vector of length {}, got {}",
            d * d - 1,
            bloch.len()
        )));
    }
    let (lo, hi) = traceless_extremes(d, bloch)?;
    let (min_eigenvalue, max_eigenvalue) = (a + lo, a + hi);
    Ok(ValidationReport {
        norm_constraint: a.abs() + (d as f64 - 1.0) * bloch.norm() <= 1.0 + EQ_TOL,
        spectral: min_eigenvalue >= -1.0 - PSD_TOL && max_eigenvalue <= 1.0 + PSD_TOL,
        min_eigenvalue,
        max_eigenvalue,
    })
}

impl DichotomicObservable {
    /// Accepts any spectrally valid observable.
    pub fn new(d: usize, a: f64, bloch: RVector) -> Result<Self> {
        if !a.is_finite() || bloch.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidObservable {
                invariant: "finite",
                detail: "non-finite coefficient".into(),
            });
        }
        let report = validate(d, a, &bloch)?;
        if !report.spectral {
            return Err(Error::InvalidObservable {
                invariant: "spectrum within [-1, 1]",
                detail: format!(
                    "eigenvalues span [{:.6}, {:.6}]",
                    report.min_eigenvalue, report.max_eigenvalue
                ),
            });
        }
        if !within_unit_ball(&bloch) {
            return Err(Error::InvalidObservable {
                invariant: "bloch norm <= 1",
                detail: format!("|bloch| = {}", bloch.norm()),
            });
        }
        Ok(Self { d, a, bloch })
    }

    /// Decompose a Hermitian operator into `(a, b)`.
    pub fn from_operator(op: &CMatrix) -> Result<Self> {
        let d = op.nrows();
        let basis = shared_basis(d)?;
        let a = op.trace().re / d as f64;
        let scale = ((d * (d - 1)) as f64).sqrt();
        let bloch = RVector::from_iterator(
            d * d - 1,
            basis.traceless().iter().map(|tau| trace_product(op, tau).re / scale),
        );
        Self::new(d, a, bloch)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn bloch(&self) -> &RVector {
        &self.bloch
    }

    pub fn validation(&self) -> ValidationReport {
        validate(self.d, self.a, &self.bloch).expect("validated on construction")
    }

    /// Interval of identity coefficients that keep the current Bloch vector physical.
    pub fn admissible_offset_range(&self) -> (f64, f64) {
        let (lo, hi) = traceless_extremes(self.d, &self.bloch).expect("validated on construction");
        (-1.0 - lo, 1.0 - hi)
    }

    pub fn with_offset(&self, a: f64) -> Result<Self> {
        Self::new(self.d, a, self.bloch.clone())
    }
}

pub fn observable_matrix(o: &DichotomicObservable, basis: &HermitianBasis) -> Result<CMatrix> {
    if basis.d() != o.d {
        return Err(Error::DimensionMismatch(format!(
            "observable of dimension {} against a basis of dimension {}",
            o.d,
            basis.d()
        )));
    }
    let mut m = bloch_operator(o.d, &o.bloch, basis);
    for i in 0..o.d {
        m[(i, i)] += Complex64::new(o.a, 0.0);
    }
    Ok(m)
}

/// Detection efficiency `alpha`: the Bloch vector shrinks, `a` is untouched.
pub fn apply_efficiency(o: &DichotomicObservable, alpha: f64) -> Result<DichotomicObservable> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange { name: "alpha", value: alpha });
    }
    Ok(DichotomicObservable {
        d: o.d,
        a: o.a,
        bloch: &o.bloch * alpha,
    })
}

/// Sharp qubit measurement along a unit Bloch direction.
pub fn projective_from_direction(dir: &[f64]) -> Result<DichotomicObservable> {
    match dim_from_bloch_len(dir.len()) {
        Some(2) => {}
        Some(d) => {
            return Err(Error::UnsupportedDimension { d_a: d, d_b: d });
        }
        None => {
            return Err(Error::DimensionMismatch(format!(
                "{} is not a valid Bloch vector length",
                dir.len()
            )))
        }
    }
    let v = RVector::from_column_slice(dir);
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnit(norm));
    }
    DichotomicObservable::new(2, 0.0, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    side: Side,
    observables: Vec<DichotomicObservable>,
}

impl MeasurementSet {
    pub fn new(side: Side, observables: Vec<DichotomicObservable>) -> Result<Self> {
        let Some(first) = observables.first() else {
            return Err(Error::InvalidParams("a measurement set needs at least one setting".into()));
        };
        let d = first.d();
        if observables.iter().any(|o| o.d() != d) {
            return Err(Error::DimensionMismatch(
                "all settings of one party must act on the same dimension".into(),
            ));
        }
        Ok(Self { side, observables })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn d(&self) -> usize {
        self.observables[0].d()
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn observables(&self) -> &[DichotomicObservable] {
        &self.observables
    }

    /// Apply one efficiency per setting.
    pub fn with_efficiencies(&self, eff: &[f64]) -> Result<Self> {
        if eff.len() != self.len() {
            return Err(Error::InvalidConfig(format!(
                "{} efficiencies for {} settings",
                eff.len(),
                self.len()
            )));
        }
        let observables = self
            .observables
            .iter()
            .zip(eff)
            .map(|(o, e)| apply_efficiency(o, *e))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.side, observables)
    }

    pub fn blochs(&self) -> Vec<RVector> {
        self.observables.iter().map(|o| o.bloch.clone()).collect()
    }
}

/// Measurements reaching the two-qubit maximum `k₁k₂`.
#[derive(Debug, Clone)]
pub struct OptimalPair {
    pub alice: MeasurementSet,
    pub bob: MeasurementSet,
    pub w_max: f64,
}

/// Sharp measurements along the two leading singular directions of `S`.
///
/// Alice measures along the first two left singular vectors, Bob along the
/// first two right ones, so `Q = diag(k₁, k₂)`.
pub fn optimal_pair(s_hat: &RMatrix) -> Result<OptimalPair> {
    if s_hat.shape() != (3, 3) {
        return Err(Error::DimensionMismatch(format!(
            "optimal measurements need a 3x3 S matrix, got {}x{}",
            s_hat.nrows(),
            s_hat.ncols()
        )));
    }
    let dec = svd(s_hat);
    let k = &dec.singular_values;
    let col = |m: &RMatrix, i: usize| RVector::from_iterator(3, m.column(i).iter().copied());
    let a0 = col(&dec.u, 0);
    let a1 = col(&dec.u, 1);
    let b0 = col(&dec.v, 0);
    let mut b1 = col(&dec.v, 1);

    // Sign guard: the cross products must point the same way.
    let s3 = Matrix3::from_iterator(s_hat.iter().copied());
    let to3 = |v: &RVector| nalgebra::Vector3::new(v[0], v[1], v[2]);
    let orient = to3(&a0).cross(&to3(&a1)).dot(&(s3 * to3(&b0)).cross(&(s3 * to3(&b1))));
    if orient < 0.0 {
        b1 = -b1;
    }

    let sharp = |v: RVector| projective_from_direction(v.as_slice());
    let alice = MeasurementSet::new(Side::A, vec![sharp(a0)?, sharp(a1)?])?;
    let bob = MeasurementSet::new(Side::B, vec![sharp(b0)?, sharp(b1)?])?;
    Ok(OptimalPair {
        alice,
        bob,
        w_max: k[0] * k[1],
    })
}

/// A uniformly random physical observable.
///
/// The Bloch direction is isotropic, its length a uniform fraction of the
/// largest physical length, and `a` uniform over the admissible interval.
pub fn random_observable<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DichotomicObservable> {
    let n = d * d - 1;
    let raw = RVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let dir = &raw / raw.norm();
    let (lo, hi) = traceless_extremes(d, &dir)?;
    let scale = rng.random_range(0.0..1.0) * 2.0 / (hi - lo);
    let bloch = dir * scale;
    let (amin, amax) = (-1.0 - scale * lo, 1.0 - scale * hi);
    let a = if amax > amin { rng.random_range(amin..=amax) } else { 0.5 * (amin + amax) };
    DichotomicObservable::new(d, a, bloch)
}

pub fn random_measurement_set<R: Rng + ?Sized>(
    side: Side,
    d: usize,
    settings: usize,
    rng: &mut R,
) -> Result<MeasurementSet> {
    let obs = (0..settings)
        .map(|_| random_observable(d, rng))
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(side, obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{bloch_data, gell_mann_basis, random_density_with, s_matrix, werner};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> RVector {
        RVector::from_column_slice(xs)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    #[test]
    fn qubit_operator_reconstruction() {
        let basis = gell_mann_basis(2).unwrap();
        let z = DichotomicObservable::new(2, 0.0, v(&[0., 0., 1.])).unwrap();
        let sz = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
        assert!(max_abs(&(observable_matrix(&z, &basis).unwrap() - sz)) < 1e-15);

        let trivial = DichotomicObservable::new(2, 1.0, v(&[0., 0., 0.])).unwrap();
        assert!(max_abs(&(observable_matrix(&trivial, &basis).unwrap() - CMatrix::identity(2, 2))) < 1e-15);

        let b3 = gell_mann_basis(3).unwrap();
        assert!(matches!(observable_matrix(&z, &b3), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn qutrit_gell_mann_direction() {
        let basis = gell_mann_basis(3).unwrap();
        // Unit Bloch length along λ₁ would give eigenvalues ±√3; 1/√3 gives exactly λ₁.
        let mut b = RVector::zeros(8);
        b[0] = 1.0;
        let report = validate(3, 0.0, &b).unwrap();
        assert!(!report.spectral);
        assert!((report.max_eigenvalue - 3f64.sqrt()).abs() < 1e-12);

        b[0] = 1.0 / 3f64.sqrt();
        let o = DichotomicObservable::new(3, 0.0, b).unwrap();
        let eig = hermitian_eigen(&observable_matrix(&o, &basis).unwrap()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!(eig.values[1].abs() < 1e-12);
        assert!((eig.values[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_reports() {
        let r = validate(2, 0.5, &v(&[0.5, 0.0, 0.0])).unwrap();
        assert!(r.norm_constraint && r.spectral && !r.flagged());

        let r = validate(2, 0.6, &v(&[0.0, 0.6, 0.0])).unwrap();
        assert!(!r.norm_constraint && !r.spectral);
        assert!((r.max_eigenvalue - 1.2).abs() < 1e-12);
        assert!(DichotomicObservable::new(2, 0.6, v(&[0.0, 0.6, 0.0])).is_err());

        // 2|0⟩⟨0| - I on a qutrit: eigenvalues (1, -1, -1), a = -1/3, |b| = 2/3.
        let basis = gell_mann_basis(3).unwrap();
        let mut op = CMatrix::identity(3, 3) * c(-1.0, 0.0);
        op[(0, 0)] = c(1.0, 0.0);
        let o = DichotomicObservable::from_operator(&op).unwrap();
        assert!((o.a() + 1.0 / 3.0).abs() < 1e-12);
        assert!((o.bloch().norm() - 2.0 / 3.0).abs() < 1e-12);
        // only the diagonal Gell-Mann components are populated
        assert!(o.bloch().rows(0, 6).norm() < 1e-15);
        let report = o.validation();
        assert!(report.accepted() && report.flagged());
        assert!(max_abs(&(observable_matrix(&o, &basis).unwrap() - op)) < 1e-12);
    }

    #[test]
    fn efficiency_examples() {
        let x = projective_from_direction(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(apply_efficiency(&x, 1.0).unwrap(), x);
        let lost = apply_efficiency(&DichotomicObservable::new(2, 0.3, v(&[0.0, 0.4, 0.0])).unwrap(), 0.0).unwrap();
        assert_eq!(lost.a(), 0.3);
        assert_eq!(lost.bloch(), &v(&[0.0, 0.0, 0.0]));
        let eff = apply_efficiency(&x, 0.75).unwrap();
        assert_eq!(eff.a(), 0.0);
        assert_eq!(eff.bloch(), &v(&[0.75, 0.0, 0.0]));
        assert!(matches!(apply_efficiency(&x, 1.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn projective_axes_and_anticommutation() {
        let basis = gell_mann_basis(2).unwrap();
        let x = projective_from_direction(&[1.0, 0.0, 0.0]).unwrap();
        let sx = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        assert!(max_abs(&(observable_matrix(&x, &basis).unwrap() - sx)) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = RVector::from_iterator(3, (0..3).map(|_| rng.sample::<f64, _>(StandardNormal))).normalize();
            let w = RVector::from_iterator(3, (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let w = (&w - &u * u.dot(&w)).normalize();
            let a = observable_matrix(&projective_from_direction(u.as_slice()).unwrap(), &basis).unwrap();
            let b = observable_matrix(&projective_from_direction(w.as_slice()).unwrap(), &basis).unwrap();
            assert!(max_abs(&(&a * &b + &b * &a)) < 1e-12);
        }
        assert!(matches!(projective_from_direction(&[1.0, 1.0, 0.0]), Err(Error::NotUnit(_))));
        assert!(projective_from_direction(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn werner_optimal_pair() {
        for p in [0.0, 0.25, 0.6, 1.0] {
            let pair = optimal_pair(&RMatrix::from_diagonal_element(3, 3, -p)).unwrap();
            assert!((pair.w_max - p * p).abs() < 1e-12);
        }
        let u = v(&[0.2, -0.4, 0.9]);
        let w = v(&[1.0, 0.5, 0.0]);
        let pair = optimal_pair(&(&u * w.transpose())).unwrap();
        assert!(pair.w_max.abs() < 1e-12);
    }

    #[test]
    fn optimal_pair_orthonormal_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let rho = random_density_with(2, 2, 4, &mut rng).unwrap();
            let pair = optimal_pair(&s_matrix(&bloch_data(&rho).unwrap())).unwrap();
            for set in [&pair.alice, &pair.bob] {
                let b = set.blochs();
                assert!((b[0].norm() - 1.0).abs() < 1e-10);
                assert!((b[1].norm() - 1.0).abs() < 1e-10);
                assert!(b[0].dot(&b[1]).abs() < 1e-10);
                assert!(set.observables().iter().all(|o| o.a() == 0.0));
            }
        }
    }

    #[test]
    fn werner_optimal_measurements_are_canonical() {
        let s = s_matrix(&bloch_data(&werner(0.5).unwrap()).unwrap());
        let a = optimal_pair(&s).unwrap();
        let b = optimal_pair(&s).unwrap();
        assert_eq!(a.alice, b.alice);
        assert_eq!(a.bob, b.bob);
    }

    #[test]
    fn random_observables_are_physical_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for d in 2..=4 {
            let basis = gell_mann_basis(d).unwrap();
            for _ in 0..50 {
                let o = random_observable(d, &mut rng).unwrap();
                let rho = random_density_with(d, 1, d, &mut rng).unwrap();
                let op = observable_matrix(&o, &basis).unwrap();
                let expect = trace_product(rho.matrix(), &op).re;
                assert!((-1.0 - EQ_TOL..=1.0 + EQ_TOL).contains(&expect));
                let (lo, hi) = o.admissible_offset_range();
                assert!(lo <= o.a() + 1e-12 && o.a() <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn measurement_set_checks() {
        let q = projective_from_direction(&[0.0, 0.0, 1.0]).unwrap();
        let mut b = RVector::zeros(8);
        b[7] = 0.1;
        let t = DichotomicObservable::new(3, 0.0, b).unwrap();
        assert!(MeasurementSet::new(Side::A, vec![q.clone(), t]).is_err());
        assert!(MeasurementSet::new(Side::A, vec![]).is_err());
        let set = MeasurementSet::new(Side::B, vec![q.clone(), q]).unwrap();
        assert!(set.with_efficiencies(&[0.5]).is_err());
        assert!(set.with_efficiencies(&[0.5, 1.2]).is_err());
    }

    proptest! {
        #[test]
        fn efficiency_composes_multiplicatively(
            alpha in 0.0f64..=1.0,
            beta in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let o = random_observable(2, &mut rng).unwrap();
            let twice = apply_efficiency(&apply_efficiency(&o, alpha).unwrap(), beta).unwrap();
            let once = apply_efficiency(&o, alpha * beta).unwrap();
            prop_assert_eq!(twice.a(), once.a());
            for (x, y) in twice.bloch().iter().zip(once.bloch().iter()) {
                // (x·α)·β vs x·(αβ) can differ in the last ulp
                prop_assert!((x - y).abs() <= 2.0 * f64::EPSILON * x.abs());
            }
        }
    }
}
