//! Quantities extracted from density matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    eigenvalues, psd_sqrt, sigma_x, sigma_y, sigma_z, tensor, DensityMatrix, Operator,
};

/// Eigenvalues in `[−1e-8, 0)` are numerical noise and count as zero.
const CLAMP: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn length(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Concurrence together with the spin-flip spectrum `λ₁ ≥ … ≥ λ₄ ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementValue {
    pub concurrence: f64,
    pub eigenvalues: [f64; 4],
}

fn require_dim(rho: &DensityMatrix, dim: usize) -> Result<()> {
    if rho.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, found: rho.dim() });
    }
    Ok(())
}

fn same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    require_dim(b, a.dim())
}

fn expect_real(rho: &Operator, op: &Operator) -> f64 {
    (*rho * *op).trace().re
}

pub fn bloch_vector(rho: &DensityMatrix) -> Result<BlochVector> {
    require_dim(rho, 2)?;
    Ok(BlochVector {
        x: expect_real(rho.op(), &sigma_x()),
        y: expect_real(rho.op(), &sigma_y()),
        z: expect_real(rho.op(), &sigma_z()),
    })
}

/// Wootters concurrence, evaluated through the Hermitian matrix
/// `√ρ (σʸ⊗σʸ) ρ* (σʸ⊗σʸ) √ρ`, which shares its spectrum with `ρ ρ̃`.
pub fn concurrence(rho: &DensityMatrix) -> Result<EntanglementValue> {
    require_dim(rho, 4)?;
    rho.validate()?;
    let yy = tensor(&sigma_y(), &sigma_y())?;
    let flipped = yy * rho.op().conj() * yy;
    let sqrt_rho = psd_sqrt(rho.op())?;
    let r = (sqrt_rho * flipped * sqrt_rho).hermitian_part();
    let ev = eigenvalues(&r)?;
    let mut lambdas = [0.0; 4];
    for (dst, &l) in lambdas.iter_mut().zip(&ev) {
        if l < -CLAMP {
            return Err(Error::NotDensityMatrix(format!("spin-flip eigenvalue {l:e}")));
        }
        *dst = l.max(0.0);
    }
    let s: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
    let c = (s[0] - s[1] - s[2] - s[3]).max(0.0);
    Ok(EntanglementValue { concurrence: c, eigenvalues: lambdas })
}

/// Uhlmann fidelity `tr √(√a b √a)`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let sa = psd_sqrt(a.op())?;
    let inner = (sa * *b.op() * sa).hermitian_part();
    let f: f64 = eigenvalues(&inner)?.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// `√(2(1 − F))`, in `[0, √2]`.
pub fn bures_metric(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    let f = fidelity(a, b)?;
    Ok((2.0 * (1.0 - f)).max(0.0).sqrt())
}

/// `½ Σ |eig(a − b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let diff = (*a.op() - *b.op()).hermitian_part();
    Ok(0.5 * eigenvalues(&diff)?.iter().map(|l| l.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{StateVector, C64};

    fn pure(amps: &[f64]) -> DensityMatrix {
        DensityMatrix::from_pure(&StateVector::from_real(amps).unwrap().normalize().unwrap())
    }

    #[test]
    fn bloch_examples() {
        let b = bloch_vector(&pure(&[1.0, 0.0])).unwrap();
        assert_eq!((b.x, b.y, b.z), (0.0, 0.0, 1.0));
        let b = bloch_vector(&DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        assert_eq!(b.length(), 0.0);
        let b = bloch_vector(&pure(&[1.0, 1.0])).unwrap();
        assert!((b.x - 1.0).abs() < 1e-15 && b.y.abs() < 1e-15 && b.z.abs() < 1e-15);
        let psi = StateVector::new(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let b = bloch_vector(&DensityMatrix::from_pure(&psi)).unwrap();
        assert!((b.length() - 1.0).abs() < 1e-12);
        assert!(b.y > 0.0);
        assert!(bloch_vector(&pure(&[1.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn concurrence_examples() {
        let bell = pure(&[0.0, 1.0, 1.0, 0.0]);
        assert!((concurrence(&bell).unwrap().concurrence - 1.0).abs() < 1e-7);
        let product = pure(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(concurrence(&product).unwrap().concurrence, 0.0);
        assert!(concurrence(&pure(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn fidelity_and_bures_examples() {
        let a = pure(&[1.0, 0.0]);
        let b = pure(&[0.0, 1.0]);
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&a, &b).unwrap().abs() < 1e-12);
        assert!(bures_metric(&a, &a).unwrap() < 1e-6);
        assert!((bures_metric(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(fidelity(&a, &pure(&[1.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let a = pure(&[1.0, 0.0]);
        let b = pure(&[0.0, 1.0]);
        assert!(trace_distance(&a, &a).unwrap() < 1e-15);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn werner_state() {
        let bell = pure(&[1.0, 0.0, 0.0, 1.0]);
        let p = 0.5;
        let rho = bell.op().scale_real(p) + Operator::identity(4).unwrap().scale_real((1.0 - p) / 4.0);
        // The spin-flipped Werner state is itself, so λᵢ are squared populations.
        let top = p + (1.0 - p) / 4.0;
        let rest = (1.0 - p) / 4.0;
        let expected = top - 3.0 * rest;
        let c = concurrence(&DensityMatrix::new(rho).unwrap()).unwrap();
        assert!((c.concurrence - expected).abs() < 1e-9);
        assert!((c.concurrence - 0.25).abs() < 1e-9);
        assert!((c.eigenvalues[0] - top * top).abs() < 1e-9);
    }

    #[test]
    fn pure_fidelity_is_the_overlap() {
        let psi = StateVector::new(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let phi = StateVector::from_real(&[1.0, 2.0]).unwrap().normalize().unwrap();
        let overlap = psi.inner(&phi).unwrap().norm();
        let f = fidelity(&DensityMatrix::from_pure(&psi), &DensityMatrix::from_pure(&phi)).unwrap();
        assert!((f - overlap).abs() < 1e-9);
    }

    #[test]
    fn qubit_trace_distance_is_half_the_bloch_distance() {
        let a = DensityMatrix::new(Operator::from_real_rows(&[&[0.7, 0.2], &[0.2, 0.3]]).unwrap()).unwrap();
        let b = pure(&[1.0, -2.0]);
        let (ra, rb) = (bloch_vector(&a).unwrap(), bloch_vector(&b).unwrap());
        let d = ((ra.x - rb.x).powi(2) + (ra.y - rb.y).powi(2) + (ra.z - rb.z).powi(2)).sqrt();
        assert!((trace_distance(&a, &b).unwrap() - d / 2.0).abs() < 1e-12);
    }
}
