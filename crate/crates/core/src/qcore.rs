//! Dense complex linear algebra for the two- and four-dimensional Hilbert
//! spaces used by the simulation engines.
//!
//! Everything here is a `Copy` value backed by fixed-size arrays, so the
//! engines can hold hundreds of thousands of states without heap traffic.
//!
//! Conventions: `|↑⟩ = (1, 0)ᵀ`, `σᶻ|↑⟩ = +|↑⟩` and `σ⁻ = (σˣ − iσʸ)/2`, so
//! that `σ⁻|↑⟩ = |↓⟩`. Two-spin states use the ordering
//! `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩` (spin 1 is the slower index).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest supported Hilbert-space dimension.
pub const MAX_DIM: usize = 4;

/// Below this norm a propagated state is considered annihilated.
pub const ZERO_NORM: f64 = 1e-14;

const HERMITIAN_TOL: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const PSD_CLAMP: f64 = 1e-6;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 4 => Ok(()),
        d => Err(Error::UnsupportedDim(d)),
    }
}

// ---------------------------------------------------------------------------
// StateVector
// ---------------------------------------------------------------------------

/// A pure state `|ψ⟩` of dimension 2 or 4.
#[derive(Clone, Copy, PartialEq)]
pub struct StateVector {
    dim: usize,
    amps: [C64; MAX_DIM],
}

impl StateVector {
    pub fn new(amps: &[C64]) -> Result<Self> {
        check_dim(amps.len())?;
        let mut buf = [ZERO; MAX_DIM];
        buf[..amps.len()].copy_from_slice(amps);
        Ok(StateVector { dim: amps.len(), amps: buf })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        let c: Vec<C64> = amps.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::new(&c)
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(StateVector { dim, amps: [ZERO; MAX_DIM] })
    }

    /// Computational basis vector `index` of the given dimension.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        let mut s = Self::zeros(dim)?;
        if index >= dim {
            return Err(Error::DimMismatch { expected: dim, found: index + 1 });
        }
        s.amps[index] = ONE;
        Ok(s)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn amps(&self) -> &[C64] {
        &self.amps[..self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize) -> C64 {
        self.amps()[i]
    }

    #[inline]
    pub fn norm_sqr(&self) -> f64 {
        self.amps().iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for a in &mut out.amps[..self.dim] {
            *a *= s;
        }
        out
    }

    /// Returns `|ψ⟩/‖ψ‖`, failing with `ZeroNorm` when `‖ψ‖ < 1e-14`.
    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if !(n >= ZERO_NORM) {
            return Err(Error::ZeroNorm(n));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch { expected: self.dim, found: other.dim });
        }
        Ok(self
            .amps()
            .iter()
            .zip(other.amps())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Removes the global phase: the largest-magnitude amplitude (first one on
    /// ties) becomes real and non-negative.
    pub fn canonical_phase(&self) -> Self {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (i, a) in self.amps().iter().enumerate() {
            let m = a.norm_sqr();
            if m > best_mag * (1.0 + 1e-12) {
                best = i;
                best_mag = m;
            }
        }
        let a = self.amps[best];
        let mag = a.norm();
        if mag == 0.0 || a.im == 0.0 && a.re >= 0.0 {
            return *self;
        }
        let mut out = self.scale(a.conj() / mag);
        out.amps[best] = C64::new(mag, 0.0);
        out
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> Operator {
        Operator::from_fn(self.dim, |i, j| self.amps[i] * self.amps[j].conj())
    }

    /// Bit pattern of the amplitudes, used to detect exactly identical states.
    pub(crate) fn bit_key(&self) -> [u64; 2 * MAX_DIM] {
        let mut key = [0u64; 2 * MAX_DIM];
        for (i, a) in self.amps().iter().enumerate() {
            key[2 * i] = a.re.to_bits();
            key[2 * i + 1] = a.im.to_bits();
        }
        key
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.amps()).finish()
    }
}

// ---------------------------------------------------------------------------
// Operator
// ---------------------------------------------------------------------------

/// A square complex matrix of dimension 2 or 4.
#[derive(Clone, Copy, PartialEq)]
pub struct Operator {
    dim: usize,
    m: [[C64; MAX_DIM]; MAX_DIM],
}

impl Operator {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Operator { dim, m: [[ZERO; MAX_DIM]; MAX_DIM] })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut o = Self::zeros(dim)?;
        for i in 0..dim {
            o.m[i][i] = ONE;
        }
        Ok(o)
    }

    /// Builds an operator from row slices; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        let mut o = Self::zeros(dim)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimMismatch { expected: dim, found: row.len() });
            }
            o.m[i][..dim].copy_from_slice(row);
        }
        Ok(o)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let owned: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        let refs: Vec<&[C64]> = owned.iter().map(|r| r.as_slice()).collect();
        Self::from_rows(&refs)
    }

    pub fn diag(entries: &[f64]) -> Result<Self> {
        let mut o = Self::zeros(entries.len())?;
        for (i, &e) in entries.iter().enumerate() {
            o.m[i][i] = C64::new(e, 0.0);
        }
        Ok(o)
    }

    /// Caller guarantees `dim` is 2 or 4.
    pub(crate) fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        debug_assert!(dim == 2 || dim == 4);
        let mut m = [[ZERO; MAX_DIM]; MAX_DIM];
        for (i, row) in m.iter_mut().enumerate().take(dim) {
            for (j, e) in row.iter_mut().enumerate().take(dim) {
                *e = f(i, j);
            }
        }
        Operator { dim, m }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        assert!(i < self.dim && j < self.dim, "index out of range");
        self.m[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(i < self.dim && j < self.dim, "index out of range");
        self.m[i][j] = v;
    }

    pub fn adjoint(&self) -> Self {
        Operator::from_fn(self.dim, |i, j| self.m[j][i].conj())
    }

    /// Elementwise complex conjugate (not transposed).
    pub fn conj(&self) -> Self {
        Operator::from_fn(self.dim, |i, j| self.m[i][j].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Operator::from_fn(self.dim, |i, j| self.m[i][j] * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Operator::from_fn(self.dim, |i, j| self.m[i][j] * s)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        d
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Operator::from_fn(self.dim, |i, j| (self.m[i][j] + self.m[j][i].conj()) * 0.5)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, found: psi.dim });
        }
        Ok(self.apply_unchecked(psi))
    }

    #[inline]
    pub(crate) fn apply_unchecked(&self, psi: &StateVector) -> StateVector {
        let mut out = [ZERO; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for j in 0..self.dim {
                acc += self.m[i][j] * psi.amps[j];
            }
            *o = acc;
        }
        StateVector { dim: self.dim, amps: out }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j].norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        *self * *other + *other * *self
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[C64]> = (0..self.dim).map(|i| &self.m[i][..self.dim]).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        Operator::from_fn(self.dim, |i, j| {
            let mut acc = ZERO;
            for k in 0..self.dim {
                acc += self.m[i][k] * rhs.m[k][j];
            }
            acc
        })
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        Operator::from_fn(self.dim, |i, j| self.m[i][j] + rhs.m[i][j])
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        Operator::from_fn(self.dim, |i, j| self.m[i][j] - rhs.m[i][j])
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

// Pauli algebra -------------------------------------------------------------

pub fn identity2() -> Operator {
    Operator::identity(2).expect("dim 2")
}

pub fn sigma_x() -> Operator {
    Operator::from_fn(2, |i, j| if i != j { ONE } else { ZERO })
}

pub fn sigma_y() -> Operator {
    Operator::from_fn(2, |i, j| match (i, j) {
        (0, 1) => -I,
        (1, 0) => I,
        _ => ZERO,
    })
}

pub fn sigma_z() -> Operator {
    Operator::diag(&[1.0, -1.0]).expect("dim 2")
}

/// `σ⁺ = (σˣ + iσʸ)/2 = |↑⟩⟨↓|`.
pub fn sigma_plus() -> Operator {
    (sigma_x() + sigma_y().scale(I)).scale_real(0.5)
}

/// `σ⁻ = (σˣ − iσʸ)/2 = |↓⟩⟨↑|`.
pub fn sigma_minus() -> Operator {
    (sigma_x() - sigma_y().scale(I)).scale_real(0.5)
}

/// Kronecker product `a ⊗ b`; `a` carries the slower-varying index.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator> {
    let dim = a.dim * b.dim;
    check_dim(dim)?;
    Ok(Operator::from_fn(dim, |i, j| {
        a.m[i / b.dim][j / b.dim] * b.m[i % b.dim][j % b.dim]
    }))
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

/// First-order (`1 − iHδt`) or classical four-stage Runge–Kutta stepping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Euler1,
    Rk4,
}

/// The linear one-step map of `d|ψ⟩/dt = −iĤ_eff|ψ⟩` for a fixed generator.
///
/// For a constant generator the classical RK4 update is the degree-four
/// Taylor polynomial of `exp(−iĤ_eff δt)`, so both schemes reduce to one
/// matrix-vector product per step.
#[derive(Clone, Copy, Debug)]
pub struct Propagator {
    step: Operator,
}

impl Propagator {
    pub fn new(h_eff: &Operator, dt: f64, scheme: Scheme) -> Self {
        let a = h_eff.scale(C64::new(0.0, -dt));
        let id = Operator::identity(h_eff.dim).expect("valid dim");
        let step = match scheme {
            Scheme::Euler1 => id + a,
            Scheme::Rk4 => {
                // 1 + a(1 + a/2(1 + a/3(1 + a/4)))
                let mut acc = id + a.scale_real(0.25);
                acc = id + (a * acc).scale_real(1.0 / 3.0);
                acc = id + (a * acc).scale_real(0.5);
                id + a * acc
            }
        };
        Propagator { step }
    }

    pub fn matrix(&self) -> &Operator {
        &self.step
    }

    /// Applies the step without renormalizing.
    pub fn apply_raw(&self, psi: &StateVector) -> Result<StateVector> {
        self.step.apply(psi)
    }

    /// Applies the step and renormalizes.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.step.apply(psi)?.normalize()
    }
}

/// Propagates `psi` one step under `h_eff` and renormalizes.
pub fn evolve_step(
    psi: &StateVector,
    h_eff: &Operator,
    dt: f64,
    scheme: Scheme,
) -> Result<StateVector> {
    Propagator::new(h_eff, dt, scheme).apply(psi)
}

/// `⟨ψ|op|ψ⟩` (no normalization is applied).
pub fn expectation(op: &Operator, psi: &StateVector) -> Result<C64> {
    let v = op.apply(psi)?;
    psi.inner(&v)
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition
// ---------------------------------------------------------------------------

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted in descending order.
pub fn hermitian_eigs(m: &Operator) -> Result<Vec<(f64, StateVector)>> {
    let herr = m.hermiticity_error();
    if herr > HERMITIAN_TOL {
        return Err(Error::NotHermitian(herr));
    }
    let a = m.hermitian_part();
    let mut pairs = match a.dim {
        2 => eigs_2x2(&a),
        _ => eigs_jacobi(&a),
    };
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    Ok(pairs)
}

pub fn eigenvalues(m: &Operator) -> Result<Vec<f64>> {
    Ok(hermitian_eigs(m)?.into_iter().map(|(l, _)| l).collect())
}

fn eigs_2x2(a: &Operator) -> Vec<(f64, StateVector)> {
    let p = a.m[0][0].re;
    let d = a.m[1][1].re;
    let b = a.m[0][1];
    if b.norm() == 0.0 {
        return vec![
            (p, StateVector::basis(2, 0).unwrap()),
            (d, StateVector::basis(2, 1).unwrap()),
        ];
    }
    let mean = 0.5 * (p + d);
    let half = 0.5 * (p - d);
    let r = half.hypot(b.norm());
    [mean + r, mean - r]
        .into_iter()
        .map(|lambda| {
            // (A − λ)v = 0 has the two candidate solutions (b, λ−p) and (λ−d, b*);
            // take the better conditioned one.
            let v1 = [b, C64::new(lambda - p, 0.0)];
            let v2 = [C64::new(lambda - d, 0.0), b.conj()];
            let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
            let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
            let v = if n1 >= n2 { v1 } else { v2 };
            let s = StateVector::new(&v).unwrap().normalize().unwrap().canonical_phase();
            (lambda, s)
        })
        .collect()
}

fn off_diagonal_norm(a: &Operator) -> f64 {
    let mut s = 0.0;
    for i in 0..a.dim {
        for j in 0..a.dim {
            if i != j {
                s += a.m[i][j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic complex Jacobi iteration.
fn eigs_jacobi(a0: &Operator) -> Vec<(f64, StateVector)> {
    let n = a0.dim;
    let mut a = *a0;
    let mut v = Operator::identity(n).unwrap();
    let scale = a0.norm().max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a.m[p][q];
                let bn = b.norm();
                if bn <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = b / bn;
                let theta = (a.m[q][q].re - a.m[p][p].re) / (2.0 * bn);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                // G = diag-phase · real rotation acting on columns p, q.
                let mut g = Operator::identity(n).unwrap();
                g.m[p][p] = C64::new(c, 0.0);
                g.m[p][q] = C64::new(s, 0.0);
                g.m[q][p] = phase.conj() * (-s);
                g.m[q][q] = phase.conj() * c;
                a = g.adjoint() * a * g;
                a.m[p][q] = ZERO;
                a.m[q][p] = ZERO;
                v = v * g;
            }
        }
    }
    (0..n)
        .map(|k| {
            let col: Vec<C64> = (0..n).map(|i| v.m[i][k]).collect();
            let s = StateVector::new(&col).unwrap();
            let s = s.normalize().unwrap_or(s).canonical_phase();
            (a.m[k][k].re, s)
        })
        .collect()
}

/// Hermitian positive-semidefinite square root. Eigenvalues in `[−1e-6, 0)`
/// are clamped to zero; anything more negative is rejected.
pub fn psd_sqrt(m: &Operator) -> Result<Operator> {
    let pairs = hermitian_eigs(m)?;
    let min = pairs.last().map(|p| p.0).unwrap_or(0.0);
    if min < -PSD_CLAMP {
        return Err(Error::TooNegative(min));
    }
    let mut out = Operator::zeros(m.dim)?;
    for (lambda, v) in &pairs {
        let r = lambda.max(0.0).sqrt();
        if r > 0.0 {
            out = out + v.projector().scale_real(r);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// DensityMatrix
// ---------------------------------------------------------------------------

/// Tolerances for density-matrix validation.
pub const DM_HERMITIAN_TOL: f64 = 1e-10;
pub const DM_TRACE_TOL: f64 = 1e-9;
pub const DM_POSITIVITY_TOL: f64 = 1e-8;

/// A density matrix `ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: Operator,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: Operator) -> Result<Self> {
        let dm = DensityMatrix { rho };
        dm.validate()?;
        Ok(dm)
    }

    pub fn new_unchecked(rho: Operator) -> Self {
        DensityMatrix { rho }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        DensityMatrix { rho: psi.projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Ok(DensityMatrix { rho: Operator::identity(dim)?.scale_real(1.0 / dim as f64) })
    }

    pub fn validate(&self) -> Result<()> {
        let herr = self.rho.hermiticity_error();
        if herr > DM_HERMITIAN_TOL {
            return Err(Error::NotDensityMatrix(format!("hermiticity error {herr:e}")));
        }
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > DM_TRACE_TOL || tr.im.abs() > DM_TRACE_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue()?;
        if min < -DM_POSITIVITY_TOL {
            return Err(Error::NotDensityMatrix(format!("min eigenvalue {min:e}")));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.rho.dim
    }

    #[inline]
    pub fn op(&self) -> &Operator {
        &self.rho
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.rho.get(i, j)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let pairs = hermitian_eigs(&self.rho.hermitian_part())?;
        Ok(pairs.last().map(|p| p.0).unwrap_or(0.0))
    }

    /// Re-Hermitizes and rescales to unit trace.
    pub fn renormalized(&self) -> Self {
        let h = self.rho.hermitian_part();
        let tr = h.trace().re;
        DensityMatrix { rho: h.scale_real(1.0 / tr) }
    }
}
