//! Protocol-level error-probability bounds: binomial post-selection
//! averaging, coherent-state closed forms, the entangled-source pipelines
//! with and without amplification, and error-exponent comparisons in dB.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nla_map::{qi_nla_conditional_states, success_probability, NlaConfig};
use crate::qi_states::{qi_conditional_states, QiScenario};
use crate::symplectic::{ln_lower_from_ln_c, qcb, BoundKind, BoundResult};

const LN_HALF: f64 = -std::f64::consts::LN_2;

/// Which detection protocol a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Entangled TMSV source, no amplifier.
    Qi,
    /// Entangled TMSV source with the heralded amplifier.
    QiNla,
    /// Coherent-state benchmark, Chernoff upper bound.
    Cs,
    /// Coherent-state benchmark with the heralded amplifier.
    CsNla,
    /// Coherent-state lower bound on the minimum error probability.
    CsLower,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Qi,
        Protocol::QiNla,
        Protocol::Cs,
        Protocol::CsNla,
        Protocol::CsLower,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Qi => "qi",
            Protocol::QiNla => "qi_nla",
            Protocol::Cs => "cs",
            Protocol::CsNla => "cs_nla",
            Protocol::CsLower => "cs_lower",
        }
    }

    pub fn uses_nla(&self) -> bool {
        matches!(self, Protocol::QiNla | Protocol::CsNla)
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qi" => Ok(Protocol::Qi),
            "qi_nla" => Ok(Protocol::QiNla),
            "cs" => Ok(Protocol::Cs),
            "cs_nla" => Ok(Protocol::CsNla),
            "cs_lower" => Ok(Protocol::CsLower),
            other => Err(Error::Domain(format!(
                "unknown protocol '{other}' (expected qi, qi_nla, cs, cs_nla, cs_lower)"
            ))),
        }
    }
}

/// A bound evaluated for one protocol at one parameter point.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolBound {
    pub protocol: Protocol,
    pub bound: BoundResult,
    /// Single-use overlap factor (the per-copy Chernoff quantity), where the
    /// protocol has one.
    pub xi: Option<f64>,
    pub scenario: QiScenario,
    pub nla: Option<NlaConfig>,
}

/// Error probability after binomially averaging over amplifier successes:
/// `(1/2) (1 + p (xi - 1))^M`, evaluated as `M log1p(p (xi - 1))` in
/// log-space. The `k = 0` random-guess cap is built into the closed form.
pub fn binomial_average(xi: f64, p: f64, m: u64) -> Result<f64> {
    Ok(ln_binomial_average(xi, p, m)?.exp())
}

/// Natural log of [`binomial_average`].
pub fn ln_binomial_average(xi: f64, p: f64, m: u64) -> Result<f64> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::Domain(format!("xi = {xi} outside (0, 1]")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("p = {p} outside (0, 1]")));
    }
    if m == 0 {
        return Err(Error::Domain("M must be >= 1".into()));
    }
    Ok(LN_HALF + m as f64 * (p * (xi - 1.0)).ln_1p())
}

fn w_factor(sc: &QiScenario) -> f64 {
    sc.kappa * sc.n_s * ((sc.n_b + 1.0).sqrt() - sc.n_b.sqrt()).powi(2)
}

/// Chernoff bound for the entangled source without amplification:
/// `(1/2) (inf_s C_s)^M` over the conditional pair.
pub fn qi_qcb(sc: &QiScenario) -> Result<ProtocolBound> {
    let (rho0, rho1) = qi_conditional_states(sc)?;
    let bound = qcb(&rho0, &rho1, sc.m_probes)?;
    let xi = (-bound.exponent_per_use).exp();
    Ok(ProtocolBound {
        protocol: Protocol::Qi,
        bound,
        xi: Some(xi),
        scenario: *sc,
        nla: None,
    })
}

/// Chernoff bound for the entangled source with the heralded amplifier.
///
/// `xi` is the single-successful-use Chernoff factor over the effective
/// conditional pair; the reported probability folds in the success
/// probability `1/(a g^2)` through the binomial average.
pub fn qi_nla_qcb(sc: &QiScenario, nla: &NlaConfig) -> Result<ProtocolBound> {
    let (rho0, rho1) = qi_nla_conditional_states(sc, nla)?;
    let single = qcb(&rho0, &rho1, 1)?;
    let xi = (single.log_probability - LN_HALF).exp();
    let p = success_probability(nla);
    let ln_p = ln_binomial_average(xi, p, sc.m_probes)?;
    Ok(ProtocolBound {
        protocol: Protocol::QiNla,
        bound: BoundResult::from_ln(BoundKind::Qcb, ln_p, single.s_star, sc.m_probes),
        xi: Some(xi),
        scenario: *sc,
        nla: Some(*nla),
    })
}

/// Single-use Chernoff factor for the amplified coherent-state benchmark:
/// `exp(-g^2 kappa N_S (sqrt(N_B+1) - g sqrt(N_B))^2 / (1 + N_B - g^2 N_B)^3)`.
pub fn cs_nla_xi(sc: &QiScenario, g: f64) -> Result<f64> {
    sc.validate()?;
    if !g.is_finite() || g < 1.0 {
        return Err(Error::GainOutOfRange(format!("g = {g} must be >= 1")));
    }
    let lam_th_sq = sc.n_b / (1.0 + sc.n_b);
    if g * g * lam_th_sq >= 1.0 {
        return Err(Error::physicality(
            "g_lambda_th",
            g * lam_th_sq.sqrt(),
            "must be < 1 for the amplified thermal state to exist".to_string(),
        ));
    }
    let denom = 1.0 + sc.n_b - g * g * sc.n_b;
    let num = g * g * sc.kappa * sc.n_s * ((sc.n_b + 1.0).sqrt() - g * sc.n_b.sqrt()).powi(2);
    Ok((-num / denom.powi(3)).exp())
}

/// Binomially averaged bound for the amplified coherent-state benchmark.
pub fn cs_nla_qcb(sc: &QiScenario, nla: &NlaConfig) -> Result<ProtocolBound> {
    let xi = cs_nla_xi(sc, nla.gain)?;
    let p = success_probability(nla);
    let ln_p = ln_binomial_average(xi, p, sc.m_probes)?;
    Ok(ProtocolBound {
        protocol: Protocol::CsNla,
        bound: BoundResult::from_ln(BoundKind::ClosedForm, ln_p, Some(0.5), sc.m_probes),
        xi: Some(xi),
        scenario: *sc,
        nla: Some(*nla),
    })
}

/// Closed-form Chernoff bound for the coherent-state benchmark:
/// `(1/2) exp(-M kappa N_S (sqrt(N_B+1) - sqrt(N_B))^2)`.
pub fn cs_qcb(sc: &QiScenario) -> Result<ProtocolBound> {
    sc.validate()?;
    let w = w_factor(sc);
    let ln_p = LN_HALF - sc.m_probes as f64 * w;
    Ok(ProtocolBound {
        protocol: Protocol::Cs,
        bound: BoundResult::from_ln(BoundKind::ClosedForm, ln_p, Some(0.5), sc.m_probes),
        xi: Some((-w).exp()),
        scenario: *sc,
        nla: None,
    })
}

/// Closed-form lower bound on the coherent-state minimum error probability:
/// `(1/2) (1 - sqrt(1 - exp(-2 M kappa N_S (sqrt(N_B+1) - sqrt(N_B))^2)))`,
/// log-safe for large M.
pub fn cs_lower(sc: &QiScenario) -> Result<ProtocolBound> {
    sc.validate()?;
    let ln_c = -w_factor(sc);
    let ln_p = ln_lower_from_ln_c(ln_c, sc.m_probes);
    Ok(ProtocolBound {
        protocol: Protocol::CsLower,
        bound: BoundResult::from_ln(BoundKind::Lower, ln_p, None, sc.m_probes),
        xi: None,
        scenario: *sc,
        nla: None,
    })
}

/// Asymptotic (large-M) per-use exponent of the coherent-state lower bound,
/// `2 kappa N_S (sqrt(N_B+1) - sqrt(N_B))^2`.
pub fn cs_lower_asymptotic_exponent(sc: &QiScenario) -> Result<f64> {
    sc.validate()?;
    Ok(2.0 * w_factor(sc))
}

/// Evaluates one protocol at one parameter point.
pub fn evaluate(protocol: Protocol, sc: &QiScenario, nla: &NlaConfig) -> Result<ProtocolBound> {
    match protocol {
        Protocol::Qi => qi_qcb(sc),
        Protocol::QiNla => qi_nla_qcb(sc, nla),
        Protocol::Cs => cs_qcb(sc),
        Protocol::CsNla => cs_nla_qcb(sc, nla),
        Protocol::CsLower => cs_lower(sc),
    }
}

/// Error-exponent advantage of `a` over `b` in decibels:
/// `10 log10(exponent_a / exponent_b)`.
pub fn db_advantage(a: &ProtocolBound, b: &ProtocolBound) -> Result<f64> {
    let ea = a.bound.exponent_per_use;
    let eb = b.bound.exponent_per_use;
    if ea <= 0.0 || eb <= 0.0 {
        return Err(Error::Domain(format!(
            "exponents must be positive for a dB comparison, got {ea} and {eb}"
        )));
    }
    Ok(10.0 * (ea / eb).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nla_map::g_max;
    use crate::qi_states::cs_conditional_states as cs_pair;
    use crate::symplectic::{lower_bound, s_overlap, GaussianState};
    use ndarray::array;

    fn sc(n_s: f64, n_b: f64, kappa: f64, m: u64) -> QiScenario {
        QiScenario::new(n_s, n_b, kappa, m).unwrap()
    }

    /// Explicit binomial summation oracle for the averaged bound.
    fn binomial_sum(xi: f64, p: f64, m: u64) -> f64 {
        let mut total = 0.0f64;
        for k in 0..=m {
            let mut log_comb = 0.0f64;
            for j in 0..k {
                log_comb += ((m - j) as f64).ln() - ((j + 1) as f64).ln();
            }
            total += (log_comb
                + k as f64 * (xi.ln() + p.ln())
                + (m - k) as f64 * (1.0 - p).ln())
            .exp();
        }
        0.5 * total
    }

    #[test]
    fn binomial_average_trivial_cases() {
        assert!((binomial_average(1.0, 0.3, 17).unwrap() - 0.5).abs() < 1e-15);
        let direct = 0.5 * 0.9f64.powi(10);
        assert!((binomial_average(0.9, 1.0, 10).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.174339).abs() < 1e-6);
    }

    #[test]
    fn binomial_average_matches_explicit_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let closed = binomial_average(0.9, 0.25, 20).unwrap();
        let summed = binomial_sum(0.9, 0.25, 20);
        assert!(((closed - summed) / summed).abs() < 1e-12);
        for _ in 0..60 {
            let xi = rng.gen_range(0.05..1.0);
            let p = rng.gen_range(0.05..1.0);
            let m = rng.gen_range(1..=60);
            let closed = binomial_average(xi, p, m).unwrap();
            let summed = binomial_sum(xi, p, m);
            assert!(
                ((closed - summed) / summed).abs() < 1e-12,
                "xi={xi} p={p} m={m}"
            );
        }
    }

    #[test]
    fn binomial_average_domain() {
        assert!(binomial_average(0.0, 0.5, 3).is_err());
        assert!(binomial_average(1.1, 0.5, 3).is_err());
        assert!(binomial_average(0.5, 0.0, 3).is_err());
        assert!(binomial_average(0.5, 0.5, 0).is_err());
    }

    #[test]
    fn cs_qcb_closed_form_cases() {
        let b = cs_qcb(&sc(0.0, 0.3, 0.4, 50)).unwrap();
        assert!((b.bound.probability - 0.5).abs() < 1e-15);
        // vacuum background: 1/2 exp(-M kappa n_s)
        let b = cs_qcb(&sc(0.2, 0.0, 0.4, 25)).unwrap();
        let expect = 0.5 * (-25.0 * 0.4 * 0.2f64).exp();
        assert!(((b.bound.probability - expect) / expect).abs() < 1e-14);
    }

    #[test]
    fn cs_closed_forms_match_gaussian_machinery() {
        let scenario = sc(0.1, 0.1, 0.2, 100);
        let (rho0, rho1) = cs_pair(&scenario).unwrap();
        let direct = qcb(&rho0, &rho1, 100).unwrap();
        let closed = cs_qcb(&scenario).unwrap();
        let rel = ((direct.log_probability - closed.bound.log_probability)
            / closed.bound.log_probability)
            .abs();
        assert!(rel < 1e-9, "rel = {rel}");

        let direct_low = lower_bound(&rho0, &rho1, 100).unwrap();
        let closed_low = cs_lower(&scenario).unwrap();
        let rel = ((direct_low.log_probability - closed_low.bound.log_probability)
            / closed_low.bound.log_probability)
            .abs();
        assert!(rel < 1e-9, "rel = {rel}");
    }

    #[test]
    fn cs_nla_xi_reference_points() {
        let scenario = sc(0.1, 0.1, 0.2, 1);
        // unit gain reduces to the plain closed-form factor
        let xi1 = cs_nla_xi(&scenario, 1.0).unwrap();
        let w = 0.2 * 0.1 * (1.1f64.sqrt() - 0.1f64.sqrt()).powi(2);
        assert!(((xi1 - (-w).exp()) / xi1).abs() < 1e-14);
        // zero signal is indistinguishable
        assert_eq!(cs_nla_xi(&sc(0.0, 0.1, 0.2, 1), 1.7).unwrap(), 1.0);
    }

    #[test]
    fn cs_nla_xi_matches_gaussian_machinery() {
        // closed form vs qcb on the explicitly transformed displaced-thermal pair
        let scenario = sc(0.1, 0.1, 0.2, 1);
        let g = 1.5;
        let beta = 2.0 * (scenario.kappa * scenario.n_s).sqrt();
        let (beta_g, omega_g) = crate::nla_map::cs_nla_transform(beta, scenario.n_b, g).unwrap();
        let n_th = (omega_g - 1.0) / 2.0;
        let rho0 = GaussianState::thermal(n_th).unwrap();
        let rho1 = GaussianState::thermal(n_th)
            .unwrap()
            .with_mean(array![beta_g, 0.0])
            .unwrap();
        let machinery = qcb(&rho0, &rho1, 1).unwrap();
        let xi_machinery = (machinery.log_probability + std::f64::consts::LN_2).exp();
        let xi_closed = cs_nla_xi(&scenario, g).unwrap();
        assert!(
            ((xi_machinery - xi_closed) / xi_closed).abs() < 1e-8,
            "{xi_machinery} vs {xi_closed}"
        );
    }

    #[test]
    fn nla_protocols_reduce_at_unit_gain() {
        let scenario = sc(0.1, 0.1, 0.2, 37);
        let nla = NlaConfig::ideal(1.0).unwrap();
        let qi_plain = qi_qcb(&scenario).unwrap();
        let qi_nla = qi_nla_qcb(&scenario, &nla).unwrap();
        assert!(
            (qi_plain.bound.log_probability - qi_nla.bound.log_probability).abs() < 1e-10
        );
        let cs_plain = cs_qcb(&scenario).unwrap();
        let cs_n = cs_nla_qcb(&scenario, &nla).unwrap();
        assert!(
            (cs_plain.bound.log_probability - cs_n.bound.log_probability).abs() < 1e-12
        );
    }

    #[test]
    fn qi_nla_probability_decreases_with_gain() {
        // more gain helps, at fixed scenario, over [1, g_max]
        let scenario = sc(0.1, 0.1, 0.2, 100);
        let gm = g_max(0.2, 1.0).unwrap();
        let at = |g: f64| {
            qi_nla_qcb(&scenario, &NlaConfig::ideal(g).unwrap())
                .unwrap()
                .bound
                .log_probability
        };
        // not strictly monotone near g = 1 (the success-probability cost wins
        // first), but the endpoint gain is clear
        assert!(at(gm - 1e-9) < at(1.0));
        assert!(at(2.0) < at(1.4));
    }

    #[test]
    fn qi_nla_binomial_identity_holds() {
        let scenario = sc(0.05, 0.1, 0.2, 250);
        let nla = NlaConfig::new(1.6, 1.3).unwrap();
        let pb = qi_nla_qcb(&scenario, &nla).unwrap();
        let xi = pb.xi.unwrap();
        let p = success_probability(&nla);
        let expect = 0.5 * (1.0 + p * (xi - 1.0)).powi(250);
        assert!(((pb.bound.probability - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn nla_advantage_over_plain_qi_in_benchmark_regime() {
        // amplified bound beats the unamplified bound across the M grid
        let gm = g_max(0.2, 1.0).unwrap();
        let nla = NlaConfig::ideal(gm * (1.0 - 1e-12)).unwrap();
        for &n_s in &[0.01, 0.1] {
            for &m in &[1u64, 10, 100, 1000, 10_000] {
                let scenario = sc(n_s, 0.1, 0.2, m);
                let with = qi_nla_qcb(&scenario, &nla).unwrap();
                let without = qi_qcb(&scenario).unwrap();
                assert!(
                    with.bound.log_probability <= without.bound.log_probability,
                    "n_s={n_s} m={m}"
                );
            }
        }
    }

    #[test]
    fn cs_nla_stays_below_cs_lower_exponent() {
        // the amplified coherent-state bound never certifies an advantage
        // over the unamplified coherent-state lower bound in this regime
        let gm = g_max(0.2, 1.0).unwrap();
        let mut violations = Vec::new();
        for &n_s in &[0.01, 0.1] {
            for &g in &[1.0, 1.3, 1.7, gm * (1.0 - 1e-12)] {
                let scenario = sc(n_s, 0.1, 0.2, 10_000);
                let nla = NlaConfig::ideal(g).unwrap();
                let amp = cs_nla_qcb(&scenario, &nla).unwrap();
                let low = cs_lower(&scenario).unwrap();
                if amp.bound.exponent_per_use > low.bound.exponent_per_use {
                    violations.push((n_s, g));
                }
            }
        }
        assert!(violations.is_empty(), "counterexamples: {violations:?}");
    }

    #[test]
    fn db_advantage_reference_ratios() {
        let scenario = sc(0.1, 0.1, 0.2, 10);
        let mk = |e: f64| ProtocolBound {
            protocol: Protocol::Cs,
            bound: BoundResult::from_ln(
                BoundKind::ClosedForm,
                -std::f64::consts::LN_2 - 10.0 * e,
                None,
                10,
            ),
            xi: None,
            scenario,
            nla: None,
        };
        let base = mk(1e-3);
        assert!(db_advantage(&base, &base).unwrap().abs() < 1e-12);
        assert!((db_advantage(&mk(4e-3), &base).unwrap() - 6.0206).abs() < 1e-3);
        assert!((db_advantage(&mk(5e-3), &base).unwrap() - 6.9897).abs() < 1e-3);
        let zero = mk(0.0);
        assert!(db_advantage(&zero, &base).is_err());
    }

    #[test]
    fn qi_qcb_spot_values() {
        // frozen from two independent implementations of the overlap formula
        let b = qi_qcb(&sc(0.1, 0.1, 0.2, 1)).unwrap();
        let s = b.bound.s_star.unwrap();
        assert!((s - 0.5085).abs() < 1e-3, "s* = {s}");
        assert!((b.xi.unwrap() - 0.98434079434209).abs() < 1e-9);
        // flat minimum: the s = 1/2 value is close but not identical
        let (rho0, rho1) = qi_conditional_states(&sc(0.1, 0.1, 0.2, 1)).unwrap();
        let c_half = s_overlap(&rho0, &rho1, 0.5).unwrap();
        assert!(((c_half - b.xi.unwrap()) / c_half).abs() < 1e-5);
        let zero_signal = qi_qcb(&sc(0.0, 0.1, 0.2, 9)).unwrap();
        assert!((zero_signal.bound.probability - 0.5).abs() < 1e-9);
    }

    #[test]
    fn cs_lower_is_below_cs_qcb() {
        for m in [1u64, 10, 1000] {
            let scenario = sc(0.1, 0.1, 0.2, m);
            let lo = cs_lower(&scenario).unwrap();
            let up = cs_qcb(&scenario).unwrap();
            assert!(lo.bound.log_probability <= up.bound.log_probability);
        }
        // zero signal pins both at 1/2
        let lo = cs_lower(&sc(0.0, 0.1, 0.2, 10)).unwrap();
        assert!((lo.bound.probability - 0.5).abs() < 1e-15);
    }
}
