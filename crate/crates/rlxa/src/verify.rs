//! Post-hoc certification: Gronwall-inequality checking on sampled curves,
//! exponential-envelope fitting, and pass/fail reports.

use crate::decomposition::linear_fit;
use crate::{Error, Real, Result};

/// Sampled instance of the differential inequality
/// Lambda' + 2 eta Lambda <= h Lambda + k with integrally controlled h:
/// int_s^t h <= eta (t - s) + m.
#[derive(Debug, Clone)]
pub struct GronwallInstance<T> {
    pub t: Vec<T>,
    pub lambda: Vec<T>,
    pub h: Vec<T>,
    pub eta: T,
    pub k: T,
    pub m: T,
}

#[derive(Debug, Clone)]
pub struct GronwallReport<T> {
    /// Differential inequality holds in trapezoid-integrated form between
    /// all consecutive samples.
    pub differential_ok: bool,
    /// int_s^t h <= eta (t-s) + m over all sample pairs.
    pub integral_ok: bool,
    /// Conclusion Lambda(t) <= Lambda(0) e^m e^{-eta t} + k e^m / eta;
    /// only asserted when both hypothesis checks pass.
    pub conclusion_ok: Option<bool>,
    /// max over samples of Lambda(t) / bound(t).
    pub max_violation_ratio: T,
}

impl<T> GronwallReport<T> {
    pub fn verified(&self) -> bool {
        self.differential_ok && self.integral_ok && self.conclusion_ok == Some(true)
    }
}

/// Check hypothesis and conclusion of the decay-with-integrable-forcing
/// Gronwall bound on a sampled curve. The differential inequality is
/// checked between consecutive samples with trapezoid quadrature and a
/// quadrature slack proportional to the step and the local variation.
pub fn check_gronwall<T: Real>(inst: &GronwallInstance<T>) -> Result<GronwallReport<T>> {
    let n = inst.t.len();
    if n < 2 || inst.lambda.len() != n || inst.h.len() != n {
        return Err(Error::InvalidInput("gronwall instance needs >= 2 aligned samples".into()));
    }
    if !(inst.eta > T::zero()) || inst.k < T::zero() || inst.m < T::zero() {
        return Err(Error::InvalidInput("need eta > 0, k >= 0, m >= 0".into()));
    }
    if inst.lambda.iter().any(|&x| x < T::zero()) {
        return Err(Error::InvalidInput("lambda samples must be nonnegative".into()));
    }
    let scale = inst
        .lambda
        .iter()
        .fold(T::one(), |a, &b| a.max(b));

    let mut differential_ok = true;
    for j in 0..n - 1 {
        let dt = inst.t[j + 1] - inst.t[j];
        if dt <= T::zero() {
            return Err(Error::InvalidInput("time grid must strictly increase".into()));
        }
        let (l0, l1) = (inst.lambda[j], inst.lambda[j + 1]);
        let half = T::of(0.5);
        let int_l = (l0 + l1) * half * dt;
        let int_hl = (inst.h[j] * l0 + inst.h[j + 1] * l1) * half * dt;
        // Trapezoid overestimates convex integrands; grant the quadrature
        // defect of the dominant 2 eta Lambda term plus a relative floor.
        let slack = inst.eta * dt * (l1 - l0).abs() + T::of(1e-9) * scale * dt.max(T::one());
        if l1 - l0 + T::of(2.0) * inst.eta * int_l > int_hl + inst.k * dt + slack {
            differential_ok = false;
        }
    }

    // Cumulative trapezoid of h, then the all-pairs window condition.
    let mut cum = vec![T::zero(); n];
    for j in 0..n - 1 {
        let dt = inst.t[j + 1] - inst.t[j];
        cum[j + 1] = cum[j] + (inst.h[j] + inst.h[j + 1]) * T::of(0.5) * dt;
    }
    let mut integral_ok = true;
    'outer: for s in 0..n {
        for t in s + 1..n {
            let window = cum[t] - cum[s];
            let budget = inst.eta * (inst.t[t] - inst.t[s]) + inst.m + T::of(1e-9);
            if window > budget {
                integral_ok = false;
                break 'outer;
            }
        }
    }

    let boost = inst.m.exp();
    let floor = inst.k * boost / inst.eta;
    let mut ratio = T::zero();
    for j in 0..n {
        let bound = inst.lambda[0] * boost * (-inst.eta * inst.t[j]).exp() + floor;
        if bound > T::zero() {
            ratio = ratio.max(inst.lambda[j] / bound);
        } else if inst.lambda[j] > T::zero() {
            ratio = T::of(f64::INFINITY);
        }
    }
    let conclusion_ok = if differential_ok && integral_ok {
        Some(ratio <= T::one() + T::of(1e-9))
    } else {
        None
    };
    Ok(GronwallReport { differential_ok, integral_ok, conclusion_ok, max_violation_ratio: ratio })
}

/// Envelope family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeForm {
    DecayPlusFloor,
    PureDecay,
}

/// Fitted Q e^{-omega t} + P dominating a sampled curve.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeFit<T> {
    pub q_hat: T,
    pub omega_hat: T,
    pub p_hat: T,
    /// RMS relative overshoot of the curve above the envelope.
    pub residual: T,
    /// Curve <= envelope pointwise with 5% slack.
    pub pass: bool,
}

/// Fit the envelope: floor from the tail median, decay rate and prefactor
/// from a log-linear least squares on the floor-subtracted positive part.
/// The domination flag `pass` is judged against the smallest prefactor
/// covering the regression window, never below the fitted one.
pub fn fit_envelope<T: Real>(
    t: &[T],
    y: &[T],
    form: EnvelopeForm,
) -> Result<EnvelopeFit<T>> {
    let n = t.len();
    if n < 10 || y.len() != n {
        return Err(Error::InvalidInput("envelope fit needs >= 10 aligned samples".into()));
    }
    let tail_start = n - (n / 5).max(1);
    let (p_hat, tail_spread) = match form {
        EnvelopeForm::PureDecay => (T::zero(), T::zero()),
        EnvelopeForm::DecayPlusFloor => {
            let mut tail: Vec<T> = y[tail_start..].to_vec();
            tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (tail[tail.len() / 2], tail[tail.len() - 1] - tail[0])
        }
    };
    let y_max = y.iter().fold(T::zero(), |a, &b| a.max(b));
    // Regress only on points clearly above the floor-estimate scatter, so
    // the floor error cannot bend the log-linear fit.
    let cut = (tail_spread * T::of(10.0)).max(y_max * T::of(1e-12));
    let pts: Vec<(T, T)> = t
        .iter()
        .zip(y)
        .filter(|&(_, &yi)| yi - p_hat > cut)
        .map(|(&ti, &yi)| (ti, (yi - p_hat).ln()))
        .collect();
    let (omega_hat, q_hat) = match linear_fit(&pts) {
        Some((slope, _)) => {
            let omega = (-slope).max(T::zero());
            let n_pts = T::of(pts.len() as f64);
            let (mut mx, mut my) = (T::zero(), T::zero());
            for &(x, yl) in &pts {
                mx += x;
                my += yl;
            }
            let intercept = my / n_pts - slope * (mx / n_pts);
            (omega, intercept.exp())
        }
        None => (T::zero(), T::zero()),
    };
    // Oscillatory curves sit above the least-squares envelope about half
    // the time; the domination test uses the smallest prefactor covering
    // the regression window instead, keeping q_hat itself unbiased.
    let q_dom = pts
        .iter()
        .map(|&(ti, yl)| yl.exp() * (omega_hat * ti).exp())
        .fold(q_hat, |a, b| a.max(b));
    let mut overshoot_sq = T::zero();
    let mut pass = true;
    let scale = y_max.max(T::of(1e-300));
    for (&ti, &yi) in t.iter().zip(y) {
        let env = q_hat * (-omega_hat * ti).exp() + p_hat;
        let env_dom = q_dom * (-omega_hat * ti).exp() + p_hat;
        let allowed = env_dom * T::of(1.05) + scale * T::of(1e-12);
        if yi > allowed {
            pass = false;
        }
        let over = (yi - env).max(T::zero()) / scale;
        overshoot_sq += over * over;
    }
    let residual = (overshoot_sq / T::of(n as f64)).sqrt();
    Ok(EnvelopeFit { q_hat, omega_hat, p_hat, residual, pass })
}

/// Status of one certified estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    /// Identity forced by the scheme, holding at solver tolerance.
    Verified,
    /// Holds with constants fitted from the run (the source estimate only
    /// asserts existence of such constants).
    VerifiedWithFittedConstants,
    /// The check's own hypothesis failed on the data; nothing asserted.
    HypothesisFailed,
    Violated,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Verified => "verified",
            CheckStatus::VerifiedWithFittedConstants => "verified-with-fitted-constants",
            CheckStatus::HypothesisFailed => "hypothesis-failed",
            CheckStatus::Violated => "violated",
        }
    }
}

/// One estimate to certify from instrumented data.
#[derive(Debug, Clone)]
pub enum CheckTarget<T> {
    /// Exact identity with measured defect against a tolerance.
    Identity { defect: T, tol: T },
    /// Curve expected to admit a decaying envelope; fitted constants.
    Envelope { t: Vec<T>, y: Vec<T>, form: EnvelopeForm, require_positive_rate: bool },
    /// Full Gronwall hypothesis + conclusion check.
    Gronwall(GronwallInstance<T>),
    /// Measured factor required to be below a threshold (fitted).
    BelowThreshold { value: T, threshold: T },
}

#[derive(Debug, Clone)]
pub struct CertifyEntry {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

/// Evaluate every target; an empty input yields an empty report.
pub fn certify_run<T: Real>(targets: &[(String, CheckTarget<T>)]) -> Result<Vec<CertifyEntry>> {
    let mut out = Vec::with_capacity(targets.len());
    for (name, target) in targets {
        let (status, detail) = match target {
            CheckTarget::Identity { defect, tol } => {
                if defect <= tol {
                    (CheckStatus::Verified, format!("defect {} <= tol {}", defect.to_f64(), tol.to_f64()))
                } else {
                    (CheckStatus::Violated, format!("defect {} > tol {}", defect.to_f64(), tol.to_f64()))
                }
            }
            CheckTarget::Envelope { t, y, form, require_positive_rate } => {
                let fit = fit_envelope(t, y, *form)?;
                let rate_ok = !require_positive_rate || fit.omega_hat > T::zero();
                let status = if fit.pass && rate_ok {
                    CheckStatus::VerifiedWithFittedConstants
                } else {
                    CheckStatus::Violated
                };
                (
                    status,
                    format!(
                        "Q={} omega={} P={} residual={}",
                        fit.q_hat.to_f64(),
                        fit.omega_hat.to_f64(),
                        fit.p_hat.to_f64(),
                        fit.residual.to_f64()
                    ),
                )
            }
            CheckTarget::Gronwall(inst) => {
                let rep = check_gronwall(inst)?;
                let status = if !rep.differential_ok || !rep.integral_ok {
                    CheckStatus::HypothesisFailed
                } else if rep.conclusion_ok == Some(true) {
                    CheckStatus::VerifiedWithFittedConstants
                } else {
                    CheckStatus::Violated
                };
                (status, format!("max ratio {}", rep.max_violation_ratio.to_f64()))
            }
            CheckTarget::BelowThreshold { value, threshold } => {
                if value < threshold {
                    (
                        CheckStatus::VerifiedWithFittedConstants,
                        format!("{} < {}", value.to_f64(), threshold.to_f64()),
                    )
                } else {
                    (CheckStatus::Violated, format!("{} >= {}", value.to_f64(), threshold.to_f64()))
                }
            }
        };
        out.push(CertifyEntry { name: name.clone(), status, detail });
    }
    Ok(out)
}
