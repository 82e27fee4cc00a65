//! Symplectic algebra for N-mode Gaussian states: symplectic spectra,
//! Williamson decomposition, and the s-overlap error-probability bounds.
//!
//! Normalization convention used throughout the crate: the vacuum covariance
//! matrix is the **identity**, so a thermal state with mean photon number N
//! has symplectic eigenvalue `nu = 2N + 1`, and a coherent state of amplitude
//! `alpha` has quadrature mean `(2*Re alpha, 2*Im alpha)`. Other conventions
//! (vacuum = 1/2) silently corrupt every downstream bound; all constructors in
//! this crate produce matrices in this normalization. Quadratures are ordered
//! `(q1, p1, ..., qN, pN)`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Cholesky, Determinant, Eigh, UPLO};

use crate::error::{Error, Result};
use crate::linalg::{det2, max_abs_diff, solve_lower};

/// Symplectic eigenvalues below `1 - PHYSICALITY_TOL` mark a state as
/// non-physical; values in `[1 - PHYSICALITY_TOL, 1)` are treated as exactly 1.
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Maximum allowed asymmetry `|V - V^T|` of a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Williamson residuals above this are a hard error.
pub const WILLIAMSON_RESIDUAL_TOL: f64 = 1e-7;

const LN_HALF: f64 = -std::f64::consts::LN_2;
const S_EPS: f64 = 1e-6;
const S_TOL: f64 = 1e-8;

/// Symplectic form `Omega = ⊕_k [[0, 1], [-1, 0]]` for `n_modes` modes.
pub fn omega(n_modes: usize) -> Array2<f64> {
    let mut m = Array2::zeros((2 * n_modes, 2 * n_modes));
    for k in 0..n_modes {
        m[[2 * k, 2 * k + 1]] = 1.0;
        m[[2 * k + 1, 2 * k]] = -1.0;
    }
    m
}

/// An N-mode Gaussian state: quadrature mean vector and covariance matrix.
#[derive(Debug, Clone)]
pub struct GaussianState {
    n_modes: usize,
    mean: Array1<f64>,
    cm: Array2<f64>,
}

impl GaussianState {
    /// Validates symmetry and physicality (all `nu_k >= 1 - PHYSICALITY_TOL`).
    pub fn new(mean: Array1<f64>, cm: Array2<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "mean vector length {dim} is not a positive even number"
            )));
        }
        if cm.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "covariance matrix is {:?}, expected ({dim}, {dim})",
                cm.dim()
            )));
        }
        let asym = max_abs_diff(&cm, &cm.t().to_owned());
        if asym > SYMMETRY_TOL {
            return Err(Error::NonPhysical(format!(
                "covariance matrix asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e}"
            )));
        }
        let nus = symplectic_eigenvalues(&cm)?;
        if let Some(&bad) = nus.iter().find(|&&nu| nu < 1.0 - PHYSICALITY_TOL) {
            return Err(Error::NonPhysical(format!(
                "symplectic eigenvalue {bad} < 1"
            )));
        }
        Ok(GaussianState {
            n_modes: dim / 2,
            mean,
            cm,
        })
    }

    pub fn vacuum(n_modes: usize) -> Self {
        GaussianState {
            n_modes,
            mean: Array1::zeros(2 * n_modes),
            cm: Array2::eye(2 * n_modes),
        }
    }

    /// Single-mode thermal state with `n_photons` mean photons; CM `(2N+1) 1`.
    pub fn thermal(n_photons: f64) -> Result<Self> {
        if n_photons < 0.0 {
            return Err(Error::Domain(format!(
                "thermal photon number {n_photons} < 0"
            )));
        }
        Ok(GaussianState {
            n_modes: 1,
            mean: Array1::zeros(2),
            cm: Array2::eye(2) * (2.0 * n_photons + 1.0),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn cm(&self) -> &Array2<f64> {
        &self.cm
    }

    pub fn with_mean(mut self, mean: Array1<f64>) -> Result<Self> {
        if mean.len() != 2 * self.n_modes {
            return Err(Error::DimensionMismatch(format!(
                "mean length {} for {} modes",
                mean.len(),
                self.n_modes
            )));
        }
        self.mean = mean;
        Ok(self)
    }
}

/// Symplectic eigenvalues of a covariance matrix, sorted descending.
///
/// These are the moduli of the eigenvalues of `i Omega V`. A two-mode CM in
/// block form `((A, C), (C^T, B))` uses the closed form
/// `nu_pm^2 = (Delta ± sqrt(Delta^2 - 4 det V)) / 2` with
/// `Delta = det A + det B + 2 det C`; other sizes go through the general
/// eigenvalue route.
pub fn symplectic_eigenvalues(cm: &Array2<f64>) -> Result<Vec<f64>> {
    let (r, c) = cm.dim();
    if r != c || r == 0 || r % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "covariance matrix must be square with even dimension, got ({r}, {c})"
        )));
    }
    if r == 4 {
        if let Some(nus) = two_mode_spectrum(cm) {
            return Ok(nus);
        }
    }
    symplectic_eigenvalues_general(cm)
}

fn two_mode_spectrum(cm: &Array2<f64>) -> Option<Vec<f64>> {
    let a = det2(&cm.slice(ndarray::s![0..2, 0..2]));
    let b = det2(&cm.slice(ndarray::s![2..4, 2..4]));
    let c = det2(&cm.slice(ndarray::s![0..2, 2..4]));
    let det_v = cm.det().ok()?;
    let delta = a + b + 2.0 * c;
    let disc = delta * delta - 4.0 * det_v;
    let scale = delta.abs().max(1.0);
    // near-degenerate spectra lose the discriminant to cancellation (pure
    // states sit exactly there); hand those to the general route
    if disc < 1e-9 * scale * scale {
        return None;
    }
    let root = disc.max(0.0).sqrt();
    let hi = ((delta + root) / 2.0).max(0.0).sqrt();
    let lo = ((delta - root) / 2.0).max(0.0).sqrt();
    Some(vec![hi, lo])
}

fn symplectic_eigenvalues_general(cm: &Array2<f64>) -> Result<Vec<f64>> {
    let n = cm.nrows() / 2;
    let m12 = sqrt_pd(cm)?.0;
    let k = m12.dot(&omega(n)).dot(&m12);
    // K is antisymmetric with eigenvalues ±i nu_k, so K K^T has each nu_k^2 twice.
    let w = k
        .dot(&k.t())
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("eigh of K K^T failed: {e}")))?
        .0;
    let mut nus: Vec<f64> = w.iter().map(|&x| x.max(0.0).sqrt()).collect();
    nus.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(nus.into_iter().step_by(2).collect())
}

/// Symmetric square root and inverse square root of a positive-definite matrix.
fn sqrt_pd(m: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let (w, r) = m
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("eigh failed: {e}")))?;
    if w.iter().any(|&x| x <= 0.0) {
        return Err(Error::NonPhysical(
            "covariance matrix is not positive definite".into(),
        ));
    }
    let mut sq = r.clone();
    let mut isq = r.clone();
    for (j, mut col) in sq.columns_mut().into_iter().enumerate() {
        col *= w[j].sqrt();
    }
    for (j, mut col) in isq.columns_mut().into_iter().enumerate() {
        col /= w[j].sqrt();
    }
    Ok((sq.dot(&r.t()), isq.dot(&r.t())))
}

/// Williamson normal form `V = S (⊕_k nu_k 1_2) S^T` with `S` symplectic.
#[derive(Debug, Clone)]
pub struct WilliamsonDecomposition {
    pub s_matrix: Array2<f64>,
    /// Symplectic spectrum, descending; `spectrum[k]` pairs with rows/columns
    /// `2k, 2k+1` of the diagonal form.
    pub spectrum: Vec<f64>,
}

impl WilliamsonDecomposition {
    pub fn diagonal_form(&self) -> Array2<f64> {
        let n = self.spectrum.len();
        let mut d = Array2::zeros((2 * n, 2 * n));
        for (k, &nu) in self.spectrum.iter().enumerate() {
            d[[2 * k, 2 * k]] = nu;
            d[[2 * k + 1, 2 * k + 1]] = nu;
        }
        d
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        self.s_matrix
            .dot(&self.diagonal_form())
            .dot(&self.s_matrix.t())
    }

    pub fn symplectic_residual(&self) -> f64 {
        let om = omega(self.spectrum.len());
        max_abs_diff(&self.s_matrix.dot(&om).dot(&self.s_matrix.t()), &om)
    }
}

/// Computes the Williamson decomposition of a physical covariance matrix.
///
/// Route: `A = V^{ -1/2} Omega V^{-1/2}` is antisymmetric with eigenvalues
/// `± i / nu_k`; an orthogonal basis pairing `(u, -nu A u)` block-diagonalizes
/// it, and `S = V^{1/2} O D^{-1/2}`. Degenerate spectra are handled by
/// Gram-Schmidt inside each eigenvalue cluster.
pub fn williamson(cm: &Array2<f64>) -> Result<WilliamsonDecomposition> {
    let (r, c) = cm.dim();
    if r != c || r == 0 || r % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "covariance matrix must be square with even dimension, got ({r}, {c})"
        )));
    }
    let n = r / 2;
    let (m12, inv_m12) = sqrt_pd(cm)?;
    let a = inv_m12.dot(&omega(n)).dot(&inv_m12);
    // A A^T = -A^2 is symmetric PSD with eigenvalues 1/nu_k^2, each twice;
    // ascending eigenvalue order yields a descending spectrum.
    let (w, q) = a
        .dot(&a.t())
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("eigh of A A^T failed: {e}")))?;

    let dim = 2 * n;
    let mut cols: Vec<Array1<f64>> = Vec::with_capacity(dim);
    let mut spectrum = Vec::with_capacity(n);
    let mut next = 0usize;
    while spectrum.len() < n {
        // next eigenvector with a nonzero component outside span(cols)
        let mut u = loop {
            if next >= dim {
                return Err(Error::Numerical(
                    "williamson: ran out of eigenvectors while pairing".into(),
                ));
            }
            let mut cand = q.column(next).to_owned();
            let wv = w[next];
            next += 1;
            for col in &cols {
                let proj = col.dot(&cand);
                cand.scaled_add(-proj, col);
            }
            let norm = cand.dot(&cand).sqrt();
            if norm > 1e-8 {
                cand /= norm;
                break (cand, wv);
            }
        };
        let nu = 1.0 / u.1.max(1e-300).sqrt();
        let mut v = a.dot(&u.0) * (-nu);
        for col in &cols {
            let proj = col.dot(&v);
            v.scaled_add(-proj, col);
        }
        let vn = v.dot(&v).sqrt();
        if vn < 1e-8 {
            return Err(Error::Numerical(
                "williamson: degenerate pairing vector".into(),
            ));
        }
        v /= vn;
        cols.push(std::mem::take(&mut u.0));
        cols.push(v);
        spectrum.push(nu);
    }

    let mut o = Array2::zeros((dim, dim));
    for (j, col) in cols.iter().enumerate() {
        o.column_mut(j).assign(col);
    }
    let mut s = m12.dot(&o);
    for (k, &nu) in spectrum.iter().enumerate() {
        let f = 1.0 / nu.sqrt();
        s.column_mut(2 * k).map_inplace(|x| *x *= f);
        s.column_mut(2 * k + 1).map_inplace(|x| *x *= f);
    }

    let dec = WilliamsonDecomposition {
        s_matrix: s,
        spectrum,
    };
    let recon = max_abs_diff(&dec.reconstruct(), cm);
    let sympl = dec.symplectic_residual();
    if recon > WILLIAMSON_RESIDUAL_TOL || sympl > WILLIAMSON_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "williamson residuals too large: reconstruction {recon:.3e}, symplectic {sympl:.3e}"
        )));
    }
    Ok(dec)
}

fn check_s(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) || !s.is_finite() {
        return Err(Error::Domain(format!("s = {s} outside [0, 1]")));
    }
    Ok(s.clamp(S_EPS, 1.0 - S_EPS))
}

/// Clamps near-unit symplectic eigenvalues to exactly 1.
fn clamp_nu(x: f64) -> Result<f64> {
    if x >= 1.0 {
        Ok(x)
    } else if x >= 1.0 - PHYSICALITY_TOL {
        Ok(1.0)
    } else {
        Err(Error::Domain(format!("argument {x} < 1")))
    }
}

/// `G_s(x) = 2^s / ((x+1)^s - (x-1)^s)`.
pub fn g_func(x: f64, s: f64) -> Result<f64> {
    Ok(ln_g_func(x, s)?.exp())
}

/// `ln G_s(x)`, stable near `x = 1` and for large `x`.
pub fn ln_g_func(x: f64, s: f64) -> Result<f64> {
    let s = check_s(s)?;
    let x = clamp_nu(x)?;
    if x == 1.0 {
        return Ok(0.0);
    }
    let lp = s * (x + 1.0).ln();
    let lm = s * (x - 1.0).ln();
    // (x+1)^s - (x-1)^s = (x+1)^s (1 - exp(lm - lp)), with lm - lp <= 0
    Ok(s * std::f64::consts::LN_2 - lp - (-(lm - lp).exp()).ln_1p())
}

/// `Lambda_s(x) = ((x+1)^s + (x-1)^s) / ((x+1)^s - (x-1)^s) >= 1`.
pub fn lambda_func(x: f64, s: f64) -> Result<f64> {
    let s = check_s(s)?;
    let x = clamp_nu(x)?;
    if x == 1.0 {
        return Ok(1.0);
    }
    let r = (s * ((x - 1.0).ln() - (x + 1.0).ln())).exp();
    Ok((1.0 + r) / (1.0 - r))
}

/// `ln Lambda_s(x)` in log-space.
pub fn ln_lambda_func(x: f64, s: f64) -> Result<f64> {
    let s = check_s(s)?;
    let x = clamp_nu(x)?;
    if x == 1.0 {
        return Ok(0.0);
    }
    let r = (s * ((x - 1.0).ln() - (x + 1.0).ln())).exp();
    Ok(r.ln_1p() - (-r).ln_1p())
}

/// Precomputed Williamson data for repeated s-overlap evaluations of one pair.
struct OverlapEngine {
    n_modes: usize,
    d: Array1<f64>,
    dec0: WilliamsonDecomposition,
    dec1: WilliamsonDecomposition,
}

impl OverlapEngine {
    fn new(rho0: &GaussianState, rho1: &GaussianState) -> Result<Self> {
        if rho0.n_modes() != rho1.n_modes() {
            return Err(Error::DimensionMismatch(format!(
                "state mode counts differ: {} vs {}",
                rho0.n_modes(),
                rho1.n_modes()
            )));
        }
        Ok(OverlapEngine {
            n_modes: rho0.n_modes(),
            d: rho0.mean() - rho1.mean(),
            dec0: williamson(rho0.cm())?,
            dec1: williamson(rho1.cm())?,
        })
    }

    /// `ln C_s` via `C_s = 2^N sqrt(det Pi_s / det Sigma_s) exp(-d^T Sigma_s^{-1} d / 2)`.
    fn ln_c(&self, s: f64) -> Result<f64> {
        let n = self.n_modes;
        let mut ln_det_pi = 0.0;
        for &nu in &self.dec0.spectrum {
            ln_det_pi += 2.0 * ln_g_func(nu, s)?;
        }
        for &nu in &self.dec1.spectrum {
            ln_det_pi += 2.0 * ln_g_func(nu, 1.0 - s)?;
        }

        let sigma = scaled_gram(&self.dec0, s)? + &scaled_gram(&self.dec1, 1.0 - s)?;
        let l = sigma.cholesky(UPLO::Lower).map_err(|e| {
            Error::Numerical(format!("Sigma_s is not positive definite: {e}"))
        })?;
        let ln_det_sigma: f64 = (0..2 * n).map(|i| 2.0 * l[[i, i]].ln()).sum();
        // d^T Sigma^{-1} d = |L^{-1} d|^2
        let y = solve_lower(&l, &self.d);
        let quad = y.dot(&y);

        Ok(n as f64 * std::f64::consts::LN_2 + 0.5 * (ln_det_pi - ln_det_sigma) - 0.5 * quad)
    }
}

/// `S [Lambda_s(V^⊕)] S^T` for one Williamson decomposition.
fn scaled_gram(dec: &WilliamsonDecomposition, s: f64) -> Result<Array2<f64>> {
    let mut scaled = dec.s_matrix.clone();
    for (k, &nu) in dec.spectrum.iter().enumerate() {
        let lam = lambda_func(nu, s)?;
        scaled.column_mut(2 * k).map_inplace(|x| *x *= lam);
        scaled.column_mut(2 * k + 1).map_inplace(|x| *x *= lam);
    }
    Ok(scaled.dot(&dec.s_matrix.t()))
}

/// `C_s = Tr[rho0^s rho1^(1-s)]` for two Gaussian states.
pub fn s_overlap(rho0: &GaussianState, rho1: &GaussianState, s: f64) -> Result<f64> {
    Ok(ln_s_overlap(rho0, rho1, s)?.exp())
}

/// `ln C_s`; the log form is authoritative for large-M work.
pub fn ln_s_overlap(rho0: &GaussianState, rho1: &GaussianState, s: f64) -> Result<f64> {
    OverlapEngine::new(rho0, rho1)?.ln_c(check_s(s)?)
}

/// Which bound a [`BoundResult`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundKind {
    Qcb,
    Qbb,
    Lower,
    ClosedForm,
}

/// An error-probability bound together with its log form and per-use exponent.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BoundResult {
    pub kind: BoundKind,
    /// Bound on the error probability, in `[0, 1/2]`.
    pub probability: f64,
    /// Optimal Chernoff parameter where one was searched for.
    pub s_star: Option<f64>,
    /// Natural log of `probability`; authoritative for `M >= 1e3`.
    pub log_probability: f64,
    /// `-(ln P - ln(1/2)) / M`, so that `P = 1/2` has exponent exactly 0.
    pub exponent_per_use: f64,
}

impl BoundResult {
    pub fn from_ln(kind: BoundKind, ln_p: f64, s_star: Option<f64>, m: u64) -> Self {
        let ln_p = ln_p.min(LN_HALF);
        BoundResult {
            kind,
            probability: ln_p.exp(),
            s_star,
            log_probability: ln_p,
            exponent_per_use: (-(ln_p - LN_HALF) / m as f64).max(0.0),
        }
    }
}

fn check_m(m: u64) -> Result<u64> {
    if m == 0 {
        Err(Error::Domain("M must be >= 1".into()))
    } else {
        Ok(m)
    }
}

/// Quantum Chernoff bound `(1/2) (inf_s C_s)^M`.
///
/// The minimization runs a 21-point coarse scan (unimodality guard) followed
/// by golden-section refinement to absolute s-tolerance 1e-8.
pub fn qcb(rho0: &GaussianState, rho1: &GaussianState, m: u64) -> Result<BoundResult> {
    let m = check_m(m)?;
    let engine = OverlapEngine::new(rho0, rho1)?;
    let (s_star, ln_c) = minimize_ln_c(&engine)?;
    Ok(BoundResult::from_ln(
        BoundKind::Qcb,
        LN_HALF + m as f64 * ln_c,
        Some(s_star),
        m,
    ))
}

/// Quantum Bhattacharyya bound `(1/2) C_{1/2}^M`.
pub fn qbb(rho0: &GaussianState, rho1: &GaussianState, m: u64) -> Result<BoundResult> {
    let m = check_m(m)?;
    let ln_c = OverlapEngine::new(rho0, rho1)?.ln_c(0.5)?;
    Ok(BoundResult::from_ln(
        BoundKind::Qbb,
        LN_HALF + m as f64 * ln_c,
        Some(0.5),
        m,
    ))
}

/// Fidelity-type lower bound `(1/2) (1 - sqrt(1 - C_{1/2}^{2M}))`.
///
/// Uses `1 - sqrt(1-Q) = Q / (1 + sqrt(1-Q))` so the log form stays exact
/// when `Q = C^{2M}` underflows.
pub fn lower_bound(rho0: &GaussianState, rho1: &GaussianState, m: u64) -> Result<BoundResult> {
    let m = check_m(m)?;
    let ln_c = OverlapEngine::new(rho0, rho1)?.ln_c(0.5)?;
    Ok(BoundResult::from_ln(
        BoundKind::Lower,
        ln_lower_from_ln_c(ln_c, m),
        None,
        m,
    ))
}

pub(crate) fn ln_lower_from_ln_c(ln_c: f64, m: u64) -> f64 {
    let ln_q = 2.0 * m as f64 * ln_c;
    let sqrt_term = if ln_q < -700.0 {
        1.0
    } else {
        (1.0 - ln_q.exp()).max(0.0).sqrt()
    };
    LN_HALF + ln_q - (1.0 + sqrt_term).ln()
}

fn minimize_ln_c(engine: &OverlapEngine) -> Result<(f64, f64)> {
    const GRID: usize = 21;
    let lo = S_EPS;
    let hi = 1.0 - S_EPS;
    let mut best = (lo, f64::INFINITY);
    let mut values = [0.0f64; GRID];
    for (i, v) in values.iter_mut().enumerate() {
        let s = lo + (hi - lo) * i as f64 / (GRID - 1) as f64;
        *v = engine.ln_c(s)?;
        if *v < best.1 {
            best = (s, *v);
        }
    }
    let i_best = ((best.0 - lo) / (hi - lo) * (GRID - 1) as f64).round() as usize;
    let a = lo + (hi - lo) * i_best.saturating_sub(1) as f64 / (GRID - 1) as f64;
    let b = lo + (hi - lo) * (i_best + 1).min(GRID - 1) as f64 / (GRID - 1) as f64;
    golden_section(|s| engine.ln_c(s), a, b, S_TOL)
}

fn golden_section<F>(f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    const INVPHI2: f64 = 1.0 - INVPHI;
    let mut h = b - a;
    let mut c = a + INVPHI2 * h;
    let mut d = a + INVPHI * h;
    let mut yc = f(c)?;
    let mut yd = f(d)?;
    while h > xtol {
        if yc < yd {
            b = d;
            d = c;
            yd = yc;
            h = b - a;
            c = a + INVPHI2 * h;
            yc = f(c)?;
        } else {
            a = c;
            c = d;
            yc = yd;
            h = b - a;
            d = a + INVPHI * h;
            yd = f(d)?;
        }
    }
    if yc < yd {
        Ok((c, yc))
    } else {
        Ok((d, yd))
    }
}
