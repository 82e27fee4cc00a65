//! Effective-parameter machinery for a heralded noiseless linear amplifier
//! (gain `g`, ideal success probability `1/g^2`) acting on the returned mode.
//!
//! Amplifying the channel output of a TMSV is equivalent to sending a TMSV
//! with parameter `lambda^g` through a channel with transmissivity `tau^g`
//! and excess noise `epsilon^g`, without an amplifier. This module computes
//! that mapping, its physicality constraints (`g_max`, `ns_max`), the
//! analogous displaced-thermal transform for the coherent-state benchmark,
//! and the post-selection success probability.

use ndarray::{array, Array1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qi_states::{channel_output_cm, qi_conditional_states, ChannelParams, QiScenario};
use crate::symplectic::GaussianState;

/// Constraint checks pass when violated by no more than this.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Amplifier configuration: gain and an efficiency divisor `a >= 1`, giving
/// success probability `1/(a g^2)` (`a = 1` is the ideal device).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NlaConfig {
    pub gain: f64,
    pub efficiency_divisor: f64,
}

impl NlaConfig {
    pub fn new(gain: f64, efficiency_divisor: f64) -> Result<Self> {
        if !gain.is_finite() || gain < 1.0 {
            return Err(Error::Domain(format!("gain = {gain} must be >= 1")));
        }
        if !efficiency_divisor.is_finite() || efficiency_divisor < 1.0 {
            return Err(Error::Domain(format!(
                "efficiency divisor = {efficiency_divisor} must be >= 1"
            )));
        }
        Ok(NlaConfig {
            gain,
            efficiency_divisor,
        })
    }

    pub fn ideal(gain: f64) -> Result<Self> {
        NlaConfig::new(gain, 1.0)
    }
}

/// Success probability `1/(a g^2)` of the heralded amplifier.
pub fn success_probability(nla: &NlaConfig) -> f64 {
    1.0 / (nla.efficiency_divisor * nla.gain * nla.gain)
}

/// The `(lambda^g, tau^g, epsilon^g)` triple of the amplifier-free
/// equivalent system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub lambda_g: f64,
    pub tau_g: f64,
    pub epsilon_g: f64,
}

impl EffectiveParams {
    pub fn as_channel_params(&self) -> Result<ChannelParams> {
        ChannelParams::new(self.lambda_g, self.tau_g.min(1.0), self.epsilon_g.max(0.0))
    }

    /// Effective background photons `N_B^g = epsilon^g tau^g / 2`; equals the
    /// thermal-amplification value `g^2 N_B / (1 + N_B (1 - g^2))`.
    pub fn n_b_g(&self) -> f64 {
        self.epsilon_g * self.tau_g / 2.0
    }
}

/// Maps channel parameters through the amplifier equivalence at gain `g`.
///
/// All three physicality constraints (`0 <= lambda^g < 1`, `0 <= tau^g <= 1`,
/// `epsilon^g >= 0`) are validated after the fact and fail loudly rather than
/// clamping; a violation is reported only when a constraint fails by more
/// than [`CONSTRAINT_TOL`]. `g = 1` is the exact identity.
pub fn effective_params(params: &ChannelParams, g: f64) -> Result<EffectiveParams> {
    if !g.is_finite() || g < 1.0 {
        return Err(Error::GainOutOfRange(format!("g = {g} must be >= 1")));
    }
    if params.epsilon >= 2.0 {
        return Err(Error::Domain(format!(
            "epsilon = {} must be < 2 for an amplifier stage",
            params.epsilon
        )));
    }
    let (lambda, tau, eps) = (params.lambda, params.tau, params.epsilon);
    let u = g * g - 1.0;

    let num = u * (eps - 2.0) * tau - 2.0; // always < 0 for eps < 2
    let den = u * eps * tau - 2.0;
    if den >= 0.0 {
        return Err(Error::physicality(
            "lambda_g",
            f64::INFINITY,
            format!("background too strong for this gain: N_B (g^2 - 1) = {} >= 1", u * eps * tau / 2.0),
        ));
    }
    let lambda_g = lambda * (num / den).sqrt();
    let tau_g = g * g * tau / (u * tau * (0.25 * u * (eps - 2.0) * eps * tau - eps + 1.0) + 1.0);
    let epsilon_g = eps - 0.5 * u * (eps - 2.0) * eps * tau;

    if lambda_g >= 1.0 + CONSTRAINT_TOL {
        return Err(Error::physicality(
            "lambda_g",
            lambda_g,
            format!("must be < 1; signal energy exceeds ns_max at g = {g}"),
        ));
    }
    if tau_g > 1.0 + CONSTRAINT_TOL || tau_g < -CONSTRAINT_TOL {
        let gm = g_max(tau, eps).unwrap_or(f64::NAN);
        return Err(Error::physicality(
            "tau_g",
            tau_g,
            format!("must lie in [0, 1]; gain {g} exceeds g_max = {gm:.4}"),
        ));
    }
    if epsilon_g < -CONSTRAINT_TOL {
        return Err(Error::physicality(
            "epsilon_g",
            epsilon_g,
            "must be >= 0".to_string(),
        ));
    }
    Ok(EffectiveParams {
        lambda_g,
        tau_g,
        epsilon_g,
    })
}

/// Largest gain keeping the effective system physical (`tau^g <= 1`).
///
/// `epsilon = 0` returns positive infinity: a pure-loss channel admits any
/// gain. `epsilon >= 2` (or negative) is out of domain.
pub fn g_max(tau: f64, epsilon: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain(format!("tau = {tau} outside (0, 1]")));
    }
    if epsilon < 0.0 || epsilon >= 2.0 || !epsilon.is_finite() {
        return Err(Error::Domain(format!("epsilon = {epsilon} outside [0, 2)")));
    }
    if epsilon == 0.0 {
        return Ok(f64::INFINITY);
    }
    let num = epsilon * (tau * (epsilon - 4.0) + 2.0)
        + 4.0 * ((tau * (epsilon - 2.0) + 2.0) / epsilon).sqrt()
        - 2.0 * (epsilon * (tau * (epsilon - 2.0) + 2.0)).sqrt()
        + 4.0 * tau
        - 4.0;
    let g = (num / (tau * (epsilon - 2.0) * (epsilon - 2.0))).sqrt();
    Ok(g.max(1.0))
}

/// Largest mean signal photon number physical at gain `g`:
/// `(1 - N_B (g^2 - 1)) / (kappa (g^2 - 1))`.
///
/// `g <= 1` is rejected: the constraint is vacuous there (any energy works).
pub fn ns_max(n_b: f64, kappa: f64, g: f64) -> Result<f64> {
    if n_b < 0.0 || !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Domain(format!(
            "invalid (n_b, kappa) = ({n_b}, {kappa})"
        )));
    }
    if g <= 1.0 {
        return Err(Error::Domain(
            "ns_max is unbounded for g <= 1 (no constraint applies)".into(),
        ));
    }
    let u = g * g - 1.0;
    let num = 1.0 - n_b * u;
    if num <= 0.0 {
        return Err(Error::Domain(format!(
            "no physical signal energy: N_B (g^2 - 1) = {} >= 1",
            n_b * u
        )));
    }
    Ok(num / (kappa * u))
}

/// Conditional return-idler pair with the amplifier folded in.
///
/// Target present: the equivalent-system channel output at
/// `(lambda^g, tau^g, epsilon^g)`. Target absent: the returned mode and the
/// idler are uncorrelated, so heralding on the amplifier leaves the idler
/// untouched; the pair is the amplified background (variance
/// `2 N_B^g + 1` with `N_B^g = epsilon^g tau^g / 2`) times the original
/// idler (variance `2 n_s + 1`).
pub fn qi_nla_conditional_states(
    sc: &QiScenario,
    nla: &NlaConfig,
) -> Result<(GaussianState, GaussianState)> {
    if nla.gain == 1.0 {
        return qi_conditional_states(sc);
    }
    let params = ChannelParams::from_scenario(sc)?;
    let eff = effective_params(&params, nla.gain)?;
    let rho1 = channel_output_cm(&eff.as_channel_params()?)?;
    let omega_g = 2.0 * eff.n_b_g() + 1.0;
    let nu = 2.0 * sc.n_s + 1.0;
    let cm = ndarray::Array2::from_diag(&array![omega_g, omega_g, nu, nu]);
    let rho0 = GaussianState::new(Array1::zeros(4), cm)?;
    Ok((rho0, rho1))
}

/// Displaced-thermal transform under the amplifier: mean amplitude
/// `beta -> g beta / (1 + N_B (1 - g^2))` and variance
/// `omega -> (1 + N_B (1 + g^2)) / (1 + N_B (1 - g^2))`.
///
/// Requires `g^2 N_B / (1 + N_B) < 1`; beyond that the amplified thermal
/// state ceases to exist.
pub fn cs_nla_transform(beta: f64, n_b: f64, g: f64) -> Result<(f64, f64)> {
    if n_b < 0.0 || !g.is_finite() || g < 1.0 {
        return Err(Error::Domain(format!("invalid (n_b, g) = ({n_b}, {g})")));
    }
    let lam_th_sq = n_b / (1.0 + n_b);
    if g * g * lam_th_sq >= 1.0 {
        return Err(Error::physicality(
            "g_lambda_th",
            g * lam_th_sq.sqrt(),
            "must be < 1 for the amplified thermal state to exist".to_string(),
        ));
    }
    let denom = 1.0 + n_b * (1.0 - g * g);
    Ok((
        g * beta / denom,
        (1.0 + n_b * (1.0 + g * g)) / denom,
    ))
}
