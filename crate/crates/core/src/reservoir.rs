//! Lorentzian reservoir: spectral density, time-local decay rate and its
//! sign structure, plus the spin-spin coupling profiles.
//!
//! Times are in units of `Γ⁻¹` and rates in units of `Γ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Parameters of the Lorentzian spectral density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    pub eta: f64,
    pub q0: f64,
    pub gamma: f64,
    /// Center frequency; only enters the spectral density.
    pub omega: f64,
}

impl LorentzianParams {
    pub fn new(eta: f64, q0: f64) -> Self {
        LorentzianParams { eta, q0, gamma: 1.0, omega: 0.0 }
    }

    /// `η²/(2(1+q₀²))`, the long-time limit of the decay rate.
    pub fn markov_limit(&self) -> f64 {
        self.eta * self.eta / (2.0 * (1.0 + self.q0 * self.q0))
    }
}

impl Default for LorentzianParams {
    fn default() -> Self {
        LorentzianParams::new(10.0, 6.0)
    }
}

/// `Δ(t) = η²{1 + e^{−Γt}[q₀ sin(q₀Γt) − cos(q₀Γt)]} / (2(1+q₀²))`.
pub fn decay_rate(t: f64, p: &LorentzianParams) -> f64 {
    let gt = p.gamma * t;
    let (s, c) = (p.q0 * gt).sin_cos();
    p.markov_limit() * (1.0 + (-gt).exp() * (p.q0 * s - c))
}

/// `J(ν) = (η²/2π) Γ² / ((ν−ω)² + Γ²)`.
pub fn spectral_density(nu: f64, p: &LorentzianParams) -> f64 {
    let g2 = p.gamma * p.gamma;
    let d = nu - p.omega;
    p.eta * p.eta / (2.0 * PI) * g2 / (d * d + g2)
}

/// Time-dependent decay rate driving the dissipator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RateProfile {
    Lorentzian(LorentzianParams),
    /// A fixed rate; `Constant(0.0)` switches the reservoir off.
    Constant(f64),
}

impl RateProfile {
    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            RateProfile::Lorentzian(p) => decay_rate(t, p),
            RateProfile::Constant(r) => *r,
        }
    }

    pub fn sign_regions(&self, t_max: f64, dt: f64) -> SignRegions {
        match self {
            RateProfile::Lorentzian(p) => find_sign_regions(p, t_max, dt),
            RateProfile::Constant(_) => SignRegions { boundaries: Vec::new() },
        }
    }
}

/// Zero crossings of the decay rate, in increasing order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignRegions {
    pub boundaries: Vec<f64>,
}

impl SignRegions {
    /// End of the first positive-rate region.
    pub fn t_p(&self) -> Option<f64> {
        self.boundaries.first().copied()
    }

    /// End of the first negative-rate region.
    pub fn t_n(&self) -> Option<f64> {
        self.boundaries.get(1).copied()
    }
}

const BISECT_TOL: f64 = 1e-9;

/// Scans `Δ` on the grid `t = k·dt ≤ t_max` and refines each sign change by
/// bisection. The zero at `t = 0` is the starting point, not a crossing.
pub fn find_sign_regions(p: &LorentzianParams, t_max: f64, dt: f64) -> SignRegions {
    assert!(dt > 0.0 && t_max > 0.0, "dt and t_max must be positive");
    let n = (t_max / dt).floor() as usize;
    let f = |t: f64| decay_rate(t, p);
    let mut boundaries = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for k in 0..=n {
        let t = k as f64 * dt;
        let v = f(t);
        if v == 0.0 {
            continue;
        }
        if let Some((t0, v0)) = last {
            if v0.signum() != v.signum() {
                boundaries.push(bisect(&f, t0, t, v0));
            }
        }
        last = Some((t, v));
    }
    SignRegions { boundaries }
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let sign_lo = f_lo.signum();
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if v.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    #[default]
    Constant,
    SigmoidSwitchoff,
}

/// Spin-spin coupling `λ(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub kind: CouplingKind,
    pub lambda0: f64,
    pub beta: f64,
    pub t_switch: f64,
}

impl CouplingProfile {
    pub fn constant(lambda0: f64) -> Self {
        CouplingProfile { kind: CouplingKind::Constant, lambda0, beta: 0.0, t_switch: 0.0 }
    }

    pub fn sigmoid_switchoff(lambda0: f64, beta: f64, t_switch: f64) -> Self {
        CouplingProfile { kind: CouplingKind::SigmoidSwitchoff, lambda0, beta, t_switch }
    }
}

/// `λ₀` for the constant profile, `λ₀ − λ₀/(1 + e^{−2β(t−t_switch)})` for the
/// switch-off profile.
pub fn coupling(t: f64, c: &CouplingProfile) -> f64 {
    match c.kind {
        CouplingKind::Constant => c.lambda0,
        CouplingKind::SigmoidSwitchoff => {
            let x = -2.0 * c.beta * (t - c.t_switch);
            // λ₀·e^x/(1+e^x), written to stay finite for large |x|
            if x > 0.0 {
                c.lambda0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                c.lambda0 * e / (1.0 + e)
            }
        }
    }
}
