//! Gaussian states of the quantum-illumination protocol: TMSV source,
//! conditional return-idler states under target absence/presence, the
//! thermal-loss channel output, and the coherent-state benchmark pair.
//!
//! Mode ordering for two-mode states: mode 1 is the returned signal, mode 2
//! the retained idler.

use ndarray::{array, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::GaussianState;

/// Physical parameters of one target-detection problem.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QiScenario {
    /// Mean signal photons per mode.
    pub n_s: f64,
    /// Mean background photons per mode.
    pub n_b: f64,
    /// Target reflectivity, in (0, 1); doubles as the end-to-end channel
    /// transmissivity.
    pub kappa: f64,
    /// Number of probe uses M.
    pub m_probes: u64,
}

impl QiScenario {
    pub fn new(n_s: f64, n_b: f64, kappa: f64, m_probes: u64) -> Result<Self> {
        let sc = QiScenario {
            n_s,
            n_b,
            kappa,
            m_probes,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_s.is_finite() || self.n_s < 0.0 {
            return Err(Error::Domain(format!("n_s = {} must be >= 0", self.n_s)));
        }
        if !self.n_b.is_finite() || self.n_b < 0.0 {
            return Err(Error::Domain(format!("n_b = {} must be >= 0", self.n_b)));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Domain(format!(
                "kappa = {} must lie in (0, 1)",
                self.kappa
            )));
        }
        if self.m_probes == 0 {
            return Err(Error::Domain("m_probes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_n_s(self, n_s: f64) -> Self {
        QiScenario { n_s, ..self }
    }

    pub fn with_m(self, m_probes: u64) -> Self {
        QiScenario { m_probes, ..self }
    }
}

/// Canonical channel-level parameters `(lambda, tau, epsilon)`.
///
/// Every scenario converts into this representation at one choke point, so
/// the amplifier mapping (which acts on these) and the physical narrative
/// (N_S, N_B, kappa) cannot drift apart. The dictionary is
/// `lambda^2 = N_S/(N_S+1)`, `tau = kappa`, `epsilon = 2 N_B / kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// TMSV parameter, in [0, 1).
    pub lambda: f64,
    /// Transmissivity, in (0, 1].
    pub tau: f64,
    /// Excess noise, >= 0. Values >= 2 are legal here; the amplifier module
    /// enforces its stricter bound itself.
    pub epsilon: f64,
}

impl ChannelParams {
    pub fn new(lambda: f64, tau: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::Domain(format!("lambda = {lambda} outside [0, 1)")));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Domain(format!("tau = {tau} outside (0, 1]")));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::Domain(format!("epsilon = {epsilon} must be >= 0")));
        }
        Ok(ChannelParams {
            lambda,
            tau,
            epsilon,
        })
    }

    pub fn from_scenario(sc: &QiScenario) -> Result<Self> {
        sc.validate()?;
        ChannelParams::new(
            (sc.n_s / (sc.n_s + 1.0)).sqrt(),
            sc.kappa,
            2.0 * sc.n_b / sc.kappa,
        )
    }

    /// Thermal variance of the reduced single-mode state, `V = (1+l^2)/(1-l^2)`.
    pub fn variance(&self) -> f64 {
        (1.0 + self.lambda * self.lambda) / (1.0 - self.lambda * self.lambda)
    }

    /// Input-equivalent loss noise `B = (1 - tau)/tau`.
    pub fn loss_noise(&self) -> f64 {
        (1.0 - self.tau) / self.tau
    }

    /// Mean signal photons `N_S = lambda^2 / (1 - lambda^2)`.
    pub fn n_s(&self) -> f64 {
        let l2 = self.lambda * self.lambda;
        l2 / (1.0 - l2)
    }
}

fn two_mode_cm(a: f64, b: f64, c: f64) -> Array2<f64> {
    // blocks a*1, b*1 with c*Z off-diagonal, Z = diag(1, -1)
    array![
        [a, 0.0, c, 0.0],
        [0.0, a, 0.0, -c],
        [c, 0.0, b, 0.0],
        [0.0, -c, 0.0, b],
    ]
}

/// Two-mode squeezed vacuum with `n_s` mean photons per mode: diagonal blocks
/// `nu 1` with `nu = 2 n_s + 1`, off-diagonal `c_q Z` with
/// `c_q = 2 sqrt(n_s (n_s + 1))`.
pub fn tmsv_cm(n_s: f64) -> Result<GaussianState> {
    if !n_s.is_finite() || n_s < 0.0 {
        return Err(Error::Domain(format!("n_s = {n_s} must be >= 0")));
    }
    let nu = 2.0 * n_s + 1.0;
    let cq = 2.0 * (n_s * (n_s + 1.0)).sqrt();
    GaussianState::new(Array1::zeros(4), two_mode_cm(nu, nu, cq))
}

/// The conditional return-idler pair `(rho_0, rho_1)` for target absent and
/// target present. Both are zero-mean; the background rescaling under target
/// presence is already folded into `gamma = 2 kappa n_s + omega`, so the mean
/// noise photon number matches under both hypotheses (no passive signature).
pub fn qi_conditional_states(sc: &QiScenario) -> Result<(GaussianState, GaussianState)> {
    sc.validate()?;
    let omega = 2.0 * sc.n_b + 1.0;
    let nu = 2.0 * sc.n_s + 1.0;
    let gamma = 2.0 * sc.kappa * sc.n_s + omega;
    let cq = 2.0 * (sc.n_s * (sc.n_s + 1.0)).sqrt();
    let rho0 = GaussianState::new(Array1::zeros(4), two_mode_cm(omega, nu, 0.0))?;
    let rho1 = GaussianState::new(
        Array1::zeros(4),
        two_mode_cm(gamma, nu, sc.kappa.sqrt() * cq),
    )?;
    Ok((rho0, rho1))
}

/// Output of a Gaussian channel `(tau, epsilon)` acting on one arm of a TMSV:
/// `((tau(V+B+eps) 1, sqrt(tau(V^2-1)) Z), (sqrt(tau(V^2-1)) Z, V 1))`.
pub fn channel_output_cm(params: &ChannelParams) -> Result<GaussianState> {
    let v = params.variance();
    let a = params.tau * (v + params.loss_noise() + params.epsilon);
    let c = (params.tau * (v * v - 1.0)).sqrt();
    GaussianState::new(Array1::zeros(4), two_mode_cm(a, v, c))
}

/// Coherent-state benchmark pair: single-mode thermal (target absent) versus
/// displaced thermal (target present), both with CM `omega 1`.
///
/// The transmitted signal carries `n_s` mean photons (amplitude
/// `sqrt(n_s)`), so the returned amplitude is `sqrt(kappa n_s)` and the
/// quadrature mean under target presence is `(2 sqrt(kappa n_s), 0)` in the
/// vacuum-CM-equals-identity convention.
pub fn cs_conditional_states(sc: &QiScenario) -> Result<(GaussianState, GaussianState)> {
    sc.validate()?;
    let rho0 = GaussianState::thermal(sc.n_b)?;
    let rho1 = GaussianState::thermal(sc.n_b)?
        .with_mean(array![2.0 * (sc.kappa * sc.n_s).sqrt(), 0.0])?;
    Ok((rho0, rho1))
}
