//! Physical inputs of the interfering three-level emitter and the composite
//! quantities entering the steady-state joint amplitude.
//!
//! All rates (`gamma_a`, `gamma_b`, `omega_12`) share one arbitrary unit; the
//! amplitude only depends on their ratios to `gamma_a`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    /// Linewidth of transition a; sets the rate unit.
    pub gamma_a: f64,
    /// Linewidth of transition b.
    pub gamma_b: f64,
    /// Upper-level splitting `omega_a - omega_b`.
    pub omega_12: f64,
    /// Dipole alignment `mu_a . mu_b / (|mu_a| |mu_b|)`.
    pub epsilon: f64,
    /// Log-magnitude of `A10 / A20`.
    pub coherence_r: f64,
    /// Phase of `A10 / A20`, radians.
    pub coherence_theta: f64,
    /// Wavepacket parameter `dq hbar k0 / (m gamma_a)`.
    pub eta: f64,
}

/// Whether a parameter point lies inside the strong-interference regime
/// (`omega_12 < min(gamma_a, gamma_b)`, `epsilon = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Validated,
    Extrapolated,
}

impl AtomParams {
    /// Equal linewidths `gamma_a = gamma_b = 1`, parallel dipoles and
    /// splitting `omega_12 = delta`.
    pub fn symmetric(delta: f64, eta: f64, r: f64, theta: f64) -> Self {
        AtomParams {
            gamma_a: 1.0,
            gamma_b: 1.0,
            omega_12: delta,
            epsilon: 1.0,
            coherence_r: r,
            coherence_theta: theta,
            eta,
        }
    }

    /// Symmetric emitter prepared in the dark superposition `(|1> - |2>)/sqrt(2)`.
    pub fn dark_state(delta: f64, eta: f64) -> Self {
        Self::symmetric(delta, eta, 0.0, PI)
    }

    pub fn with_coherence(mut self, r: f64, theta: f64) -> Self {
        self.coherence_r = r;
        self.coherence_theta = theta;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("omega_12", self.omega_12),
            ("epsilon", self.epsilon),
            ("coherence_r", self.coherence_r),
            ("coherence_theta", self.coherence_theta),
            ("eta", self.eta),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {value}")));
            }
        }
        if self.gamma_a <= 0.0 || self.gamma_b <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "linewidths must be positive, got gamma_a = {}, gamma_b = {}",
                self.gamma_a, self.gamma_b
            )));
        }
        if self.eta <= 0.0 {
            return Err(Error::InvalidParams(format!("eta must be positive, got {}", self.eta)));
        }
        if self.omega_12 < 0.0 {
            return Err(Error::InvalidParams(format!(
                "omega_12 must be nonnegative, got {}",
                self.omega_12
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParams(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        // |A10/A20|^2 = e^{2r} must stay representable
        if self.coherence_r.abs() > 300.0 {
            return Err(Error::InvalidParams(format!(
                "|coherence_r| must not exceed 300, got {}",
                self.coherence_r
            )));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.omega_12 < self.gamma_a.min(self.gamma_b) && self.epsilon == 1.0 {
            Regime::Validated
        } else {
            Regime::Extrapolated
        }
    }

    /// Hex SHA-256 digest of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        fingerprint_json(&serde_json::to_value(self).expect("params serialize"))
    }
}

pub(crate) fn fingerprint_json(value: &serde_json::Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// One resonant term `residue / (i v + offset)` of the joint amplitude,
/// with `v = dq + dk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub residue: C64,
    pub offset: C64,
}

impl Pole {
    pub fn half_width(&self) -> f64 {
        self.offset.re.abs()
    }

    /// Position of the resonance on the `v = dq + dk` axis.
    pub fn center(&self) -> f64 {
        -self.offset.im
    }

    pub fn is_active(&self) -> bool {
        self.residue != C64::new(0.0, 0.0)
    }
}

/// Lorentzian ridge of the kernel along `dq + dk = center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub lambda: C64,
    pub s1: C64,
    pub s2: C64,
    pub c1: C64,
    pub c2: C64,
    /// `omega_12 / gamma`, reported only for equal linewidths.
    pub delta: Option<f64>,
    pub a10: C64,
    pub a20: C64,
    /// Coupling ratio `g_b / g_a`.
    pub g_ratio: f64,
    pub gamma_a: f64,
    /// `epsilon sqrt(gamma_a gamma_b)`.
    pub cross_rate: f64,
    pub poles: [Pole; 2],
}

/// Normalized initial amplitudes with `A10 / A20 = exp(r + i theta)`.
pub fn initial_amplitudes(r: f64, theta: f64) -> (C64, C64) {
    // |A20|^2 (1 + e^{2r}) = 1, written to stay finite for large |r|
    let a20_mag = if r > 0.0 {
        (-r).exp() / (1.0 + (-2.0 * r).exp()).sqrt()
    } else {
        1.0 / (1.0 + (2.0 * r).exp()).sqrt()
    };
    let a10_mag = if r > 0.0 {
        1.0 / (1.0 + (-2.0 * r).exp()).sqrt()
    } else {
        r.exp() / (1.0 + (2.0 * r).exp()).sqrt()
    };
    (C64::from_polar(a10_mag, theta), C64::new(a20_mag, 0.0))
}

pub fn derive(params: &AtomParams) -> Result<DerivedParams> {
    params.validate()?;
    let AtomParams {
        gamma_a,
        gamma_b,
        omega_12,
        epsilon,
        ..
    } = *params;

    let lambda = C64::new(0.5 * (gamma_a - gamma_b), omega_12);
    let x = epsilon * (gamma_a * gamma_b).sqrt();
    let root = (lambda * lambda + x * x).sqrt();

    // s1 keeps the + sign; the smaller root is recovered from the product
    // s1 s2 = -x^2/4 to avoid cancellation.
    let mut s1 = 0.5 * (lambda + root);
    let mut s2 = 0.5 * (lambda - root);
    let product = C64::new(-0.25 * x * x, 0.0);
    if s1.norm() >= s2.norm() {
        if s1.norm() > 0.0 {
            s2 = product / s1;
        }
    } else {
        s1 = product / s2;
    }

    let split = s2 - s1;
    let scale = lambda.norm() + x;
    if split.norm() <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::DegenerateRoots);
    }

    let (a10, a20) = initial_amplitudes(params.coherence_r, params.coherence_theta);
    let c1 = (s2 * a10 + 0.5 * x * a20) / split;
    let c2 = -(s1 * a10 + 0.5 * x * a20) / split;

    let g_a = 1.0;
    let g_b = (gamma_b / gamma_a).sqrt();

    // C_j (2 g_b s_j / x - g_a) with the 1/x eliminated through s1 s2 = -x^2/4,
    // so that epsilon = 0 reduces to two independent Lorentzians.
    let numerator =
        |s_own: C64, s_other: C64| g_b * s_own * a20 - 0.5 * g_b * x * a10 - g_a * (s_other * a10 + 0.5 * x * a20);
    let noise = |s_own: C64, s_other: C64| {
        (g_b * s_own.norm() * a20.norm()
            + 0.5 * g_b * x * a10.norm()
            + g_a * (s_other.norm() * a10.norm() + 0.5 * x * a20.norm()))
            * 64.0
            * f64::EPSILON
    };
    let mut r1 = numerator(s1, s2) / split;
    let mut r2 = -numerator(s2, s1) / split;
    if (r1 * split).norm() <= noise(s1, s2) {
        r1 = C64::new(0.0, 0.0);
    }
    if (r2 * split).norm() <= noise(s2, s1) {
        r2 = C64::new(0.0, 0.0);
    }

    let delta = if ((gamma_a - gamma_b) / gamma_a).abs() < 1e-9 {
        Some(omega_12 / gamma_a)
    } else {
        None
    };

    let poles = [
        Pole {
            residue: r1,
            offset: s1 / gamma_a - 0.5,
        },
        Pole {
            residue: r2,
            offset: s2 / gamma_a - 0.5,
        },
    ];
    for pole in &poles {
        if pole.is_active() && pole.offset.re >= 0.0 {
            return Err(Error::InvalidParams(format!(
                "non-decaying resonance with offset {}",
                pole.offset
            )));
        }
    }

    Ok(DerivedParams {
        lambda,
        s1,
        s2,
        c1,
        c2,
        delta,
        a10,
        a20,
        g_ratio: g_b / g_a,
        gamma_a,
        cross_rate: x,
        poles,
    })
}

impl DerivedParams {
    /// True when both resonant terms vanish (exact trapping).
    pub fn is_trapped(&self) -> bool {
        self.poles.iter().all(|p| !p.is_active())
    }

    /// Narrowest active resonance; falls back to the narrower pole when
    /// neither term contributes.
    pub fn ridge(&self) -> Ridge {
        let narrower = |a: &Pole, b: &Pole| a.half_width().total_cmp(&b.half_width());
        let pole = self
            .poles
            .iter()
            .filter(|p| p.is_active())
            .min_by(|a, b| narrower(a, b))
            .or_else(|| self.poles.iter().min_by(|a, b| narrower(a, b)))
            .expect("two poles");
        Ridge {
            center: pole.center(),
            half_width: pole.half_width(),
        }
    }

    /// Resonant factor of the amplitude as a function of `v = dq + dk`.
    pub fn resonant(&self, v: f64) -> Option<C64> {
        let mut sum = C64::new(0.0, 0.0);
        for pole in self.poles.iter().filter(|p| p.is_active()) {
            let den = C64::new(pole.offset.re, v + pole.offset.im);
            if den.norm() < 1e-14 {
                return None;
            }
            sum += pole.residue / den;
        }
        Some(sum)
    }
}

/// Affine map between laboratory wave vectors and the dimensionless
/// detunings `(dk, dq)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFrame {
    /// Resonant wave number `omega_a / c`, 1/m.
    pub k0: f64,
    /// Linewidth of transition a, 1/s.
    pub gamma_a: f64,
    /// Atomic mass, kg.
    pub mass: f64,
}

impl EffectiveFrame {
    /// `omega_a` in rad/s; `params.gamma_a` is read in 1/s.
    pub fn new(params: &AtomParams, omega_a: f64, mass: f64) -> Result<Self> {
        params.validate()?;
        if !(omega_a.is_finite() && omega_a > 0.0 && mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega_a and mass must be positive and finite, got {omega_a}, {mass}"
            )));
        }
        Ok(EffectiveFrame {
            k0: omega_a / SPEED_OF_LIGHT,
            gamma_a: params.gamma_a,
            mass,
        })
    }

    fn photon_scale(&self) -> f64 {
        SPEED_OF_LIGHT / self.gamma_a
    }

    fn atom_scale(&self) -> f64 {
        HBAR * self.k0 / (self.mass * self.gamma_a)
    }

    /// Physical `(k, q)` in 1/m to effective `(dk, dq)`.
    pub fn to_effective(&self, k: f64, q: f64) -> (f64, f64) {
        ((k - self.k0) * self.photon_scale(), (q - self.k0) * self.atom_scale())
    }

    pub fn to_physical(&self, dk: f64, dq: f64) -> (f64, f64) {
        (self.k0 + dk / self.photon_scale(), self.k0 + dq / self.atom_scale())
    }

    /// `eta` implied by a momentum spread `dq` (1/m) of the initial wavepacket.
    pub fn eta_for_spread(&self, dq: f64) -> f64 {
        dq * self.atom_scale()
    }
}
