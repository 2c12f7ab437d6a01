//! The driven single spin (Model I) and the coupled spin pair with one
//! dissipative spin (Model II).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    identity2, sigma_minus, sigma_x, tensor, Operator, StateVector, C64,
};
use crate::reservoir::{coupling, CouplingProfile, LorentzianParams, RateProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelLabel {
    ModelI,
    ModelIi,
}

impl ModelLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelLabel::ModelI => "model_i",
            ModelLabel::ModelIi => "model_ii",
        }
    }
}

impl From<LorentzianParams> for RateProfile {
    fn from(p: LorentzianParams) -> Self {
        RateProfile::Lorentzian(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SystemHamiltonian {
    /// `Ω σˣ`
    Driven { omega: f64 },
    /// `λ(t) σˣ⊗σˣ`
    Coupled { coupling: CouplingProfile },
}

/// A fully specified open system: Hamiltonian, jump operator and reservoir.
#[derive(Clone, Copy, Debug)]
pub struct ModelSpec {
    label: ModelLabel,
    system: SystemHamiltonian,
    rate: RateProfile,
    jump_op: Operator,
    /// `Ĉ†Ĉ`
    jump_number: Operator,
    /// `σˣ` or `σˣ⊗σˣ`
    h_shape: Operator,
}

impl ModelSpec {
    pub fn label(&self) -> ModelLabel {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.jump_op.dim()
    }

    pub fn jump_op(&self) -> &Operator {
        &self.jump_op
    }

    /// `Ĉ†Ĉ`
    pub fn jump_number(&self) -> &Operator {
        &self.jump_number
    }

    pub fn rate_profile(&self) -> &RateProfile {
        &self.rate
    }

    #[inline]
    pub fn decay_rate(&self, t: f64) -> f64 {
        self.rate.rate(t)
    }

    /// Coupling strength at `t` for Model II; `None` for Model I.
    pub fn coupling_profile(&self) -> Option<&CouplingProfile> {
        match &self.system {
            SystemHamiltonian::Coupled { coupling } => Some(coupling),
            SystemHamiltonian::Driven { .. } => None,
        }
    }

    pub fn hamiltonian(&self, t: f64) -> Operator {
        let strength = match &self.system {
            SystemHamiltonian::Driven { omega } => *omega,
            SystemHamiltonian::Coupled { coupling: c } => coupling(t, c),
        };
        self.h_shape.scale_real(strength)
    }

    /// `Ĥ_eff = Ĥ_s(t) − i(Δ/2)Ĉ†Ĉ`; `delta` is signed.
    pub fn effective_hamiltonian(&self, t: f64, delta: f64) -> Operator {
        self.hamiltonian(t) - self.jump_number.scale(C64::new(0.0, 0.5 * delta))
    }

    /// Same model with the reservoir replaced.
    pub fn with_rate(mut self, rate: RateProfile) -> Self {
        self.rate = rate;
        self
    }
}

/// Driven spin: `Ĥ = Ω σˣ`, `Ĉ = σ⁻`.
pub fn build_model_i(omega: f64, reservoir: impl Into<RateProfile>) -> ModelSpec {
    let jump_op = sigma_minus();
    ModelSpec {
        label: ModelLabel::ModelI,
        system: SystemHamiltonian::Driven { omega },
        rate: reservoir.into(),
        jump_number: jump_op.adjoint() * jump_op,
        jump_op,
        h_shape: sigma_x(),
    }
}

/// Coupled pair: `Ĥ = λ(t) σˣ⊗σˣ`, `Ĉ = σ⁻⊗𝟙`.
pub fn build_model_ii(cp: CouplingProfile, reservoir: impl Into<RateProfile>) -> ModelSpec {
    let jump_op = tensor(&sigma_minus(), &identity2()).expect("2x2 ⊗ 2x2");
    ModelSpec {
        label: ModelLabel::ModelIi,
        system: SystemHamiltonian::Coupled { coupling: cp },
        rate: reservoir.into(),
        jump_number: jump_op.adjoint() * jump_op,
        jump_op,
        h_shape: tensor(&sigma_x(), &sigma_x()).expect("2x2 ⊗ 2x2"),
    }
}

/// Initial pure state parameterization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStateSpec {
    /// `cos(θ/2)|↑⟩ + e^{iφ} sin(θ/2)|↓⟩`
    Bloch { theta: f64, phi: f64 },
    /// `(0, cos ξ, sin ξ, 0)ᵀ`
    Xi { xi: f64 },
}

impl InitialStateSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            InitialStateSpec::Bloch { .. } => "bloch",
            InitialStateSpec::Xi { .. } => "xi",
        }
    }
}

pub fn initial_state(spec: &ModelSpec, init: &InitialStateSpec) -> Result<StateVector> {
    match (*init, spec.dim()) {
        (InitialStateSpec::Bloch { theta, phi }, 2) => {
            let (s, c) = (0.5 * theta).sin_cos();
            StateVector::new(&[C64::new(c, 0.0), C64::from_polar(s, phi)])
        }
        (InitialStateSpec::Xi { xi }, 4) => {
            let (s, c) = xi.sin_cos();
            StateVector::from_real(&[0.0, c, s, 0.0])
        }
        (init, dim) => Err(Error::KindMismatch { kind: init.kind_name(), dim }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{evolve_step, sigma_plus, Scheme};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn res() -> LorentzianParams {
        LorentzianParams::default()
    }

    #[test]
    fn model_i_structure() {
        let m = build_model_i(0.5, res());
        let h = m.hamiltonian(0.0);
        assert_eq!(h.get(0, 1), C64::new(0.5, 0.0));
        assert_eq!(h.get(1, 0), C64::new(0.5, 0.0));
        assert_eq!(h.get(0, 0), C64::new(0.0, 0.0));
        assert_eq!(h.get(1, 1), C64::new(0.0, 0.0));
        let down = StateVector::basis(2, 1).unwrap();
        assert_eq!(m.jump_op().apply(&down).unwrap().norm(), 0.0);
    }

    #[test]
    fn undriven_ground_state_is_dark() {
        let m = build_model_i(0.0, res());
        let down = StateVector::basis(2, 1).unwrap();
        let h = m.effective_hamiltonian(0.3, 2.0);
        let out = h.apply(&down).unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn model_ii_subspaces() {
        let cp = CouplingProfile::constant(0.5);
        let m = build_model_ii(cp, res());
        let up_down = StateVector::basis(4, 1).unwrap();
        let out = m.hamiltonian(0.2).apply(&up_down).unwrap();
        assert_eq!(out, StateVector::basis(4, 2).unwrap().scale(C64::new(0.5, 0.0)));
        let kicked = m.jump_op().apply(&up_down).unwrap();
        assert_eq!(kicked, StateVector::basis(4, 3).unwrap());
        let twice = m.jump_op().apply(&kicked).unwrap();
        assert_eq!(twice.norm(), 0.0);
        let c2 = *m.jump_op() * *m.jump_op();
        assert_eq!(c2.norm(), 0.0);
        // no even/odd matrix elements
        let h = m.hamiltonian(0.0);
        for e in [0, 3] {
            for o in [1, 2] {
                assert_eq!(h.get(e, o).norm(), 0.0);
                assert_eq!(h.get(o, e).norm(), 0.0);
            }
        }
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let m = build_model_i(0.5, res());
        let h0 = m.effective_hamiltonian(0.0, 0.0);
        assert!(h0.is_hermitian(0.0));
        let m0 = build_model_i(0.0, res());
        let h = m0.effective_hamiltonian(0.0, 2.0);
        let want = (sigma_plus() * sigma_minus()).scale(C64::new(0.0, -1.0));
        assert!(h.max_abs_diff(&want) < 1e-15);
        for delta in [-3.0, 0.0, 1.7] {
            for t in [0.0, 0.4, 0.9] {
                let h = m.effective_hamiltonian(t, delta);
                let sum = h + h.adjoint();
                assert!(sum.max_abs_diff(&m.hamiltonian(t).scale_real(2.0)) < 1e-15);
            }
        }
    }

    #[test]
    fn negative_rate_grows_excited_norm() {
        let m = build_model_i(0.0, res());
        let up = StateVector::basis(2, 0).unwrap();
        let grow = m.effective_hamiltonian(0.0, -1.0);
        let shrink = m.effective_hamiltonian(0.0, 1.0);
        let p = crate::qcore::Propagator::new(&grow, 1e-3, Scheme::Euler1);
        let q = crate::qcore::Propagator::new(&shrink, 1e-3, Scheme::Euler1);
        assert!(p.apply_raw(&up).unwrap().norm() > 1.0);
        assert!(q.apply_raw(&up).unwrap().norm() < 1.0);
        assert!(evolve_step(&up, &grow, 1e-3, Scheme::Euler1).is_ok());
    }

    #[test]
    fn initial_states() {
        let m1 = build_model_i(0.5, res());
        let m2 = build_model_ii(CouplingProfile::constant(0.5), res());
        let north = initial_state(&m1, &InitialStateSpec::Bloch { theta: 0.0, phi: 1.0 }).unwrap();
        assert_eq!(north, StateVector::basis(2, 0).unwrap());

        let y = initial_state(&m1, &InitialStateSpec::Bloch { theta: FRAC_PI_2, phi: FRAC_PI_2 })
            .unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((y.get(0) - C64::new(r, 0.0)).norm() < 1e-15);
        assert!((y.get(1) - C64::new(0.0, r)).norm() < 1e-15);

        let bell = initial_state(&m2, &InitialStateSpec::Xi { xi: FRAC_PI_4 }).unwrap();
        assert!((bell.get(1).re - r).abs() < 1e-15 && (bell.get(2).re - r).abs() < 1e-15);
        assert!((bell.norm() - 1.0).abs() < 1e-15);

        assert!(matches!(
            initial_state(&m1, &InitialStateSpec::Xi { xi: 0.1 }),
            Err(Error::KindMismatch { .. })
        ));
        assert!(matches!(
            initial_state(&m2, &InitialStateSpec::Bloch { theta: 0.1, phi: 0.0 }),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn model_ii_hamiltonian_is_hermitian_with_switchoff() {
        let m = build_model_ii(CouplingProfile::sigmoid_switchoff(0.5, 100.0, 0.6), res());
        for k in 0..1000 {
            assert!(m.hamiltonian(k as f64 * 1e-3).is_hermitian(1e-12));
        }
    }
}
