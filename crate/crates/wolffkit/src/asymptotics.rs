//! The affine exponent iteration behind the non-existence argument,
//! least-squares estimation of tail decay rates (power law with an optional
//! logarithmic correction), and the lambda-limit convergence diagnostic for
//! the log-corrected branch.

use crate::quad::{self, QuadError, QuadratureSpec};
use crate::system::{approx_eq, SystemParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default iteration budget; the affine recursion either reaches a negative
/// exponent, converges, or grows geometrically well before this.
pub const DEFAULT_MAX_ITER: usize = 200;

const CONVERGE_TOL: f64 = 1e-14;
const GROWTH_LIMIT: f64 = 1e290;

/// Outcome of the exponent iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IterationVerdict {
    /// First index at which one of the exponents went negative (the
    /// contradiction step of the non-existence argument).
    DivergesNegative { index: usize },
    /// The iteration contracted to its fixed point.
    ConvergesTo { limit: f64 },
    /// Budget exhausted (geometric growth, no contradiction reachable).
    Stalls { iterations: usize },
}

/// Trace of the coupled exponent recursion
/// `b_k = (p a_k - sigma2 - beta*gamma)/(gamma-1)`,
/// `a_{k+1} = (q b_k - sigma1 - beta*gamma)/(gamma-1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationTrace {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub verdict: IterationVerdict,
    /// `max_j |a_j (recursive) - a_j (closed form)|` over the recorded trace.
    pub closed_form_check: f64,
}

/// Run the exponent iteration from `a_0 = a_start`.
///
/// Alongside the recursion the closed form is evaluated:
/// `a_j = r0^j (a_0 - q0) + q0` for `r0 = pq/(gamma-1)^2 != 1`, and the
/// arithmetic form `a_j = a_0 - j eta0/(gamma-1)^2` on the degenerate
/// hyperbola; the largest discrepancy is recorded in `closed_form_check`.
///
/// Stops at the first negative exponent, at successive-difference convergence
/// (`|a_{k+1} - a_k| < 1e-14 (1 + |a_k|)`), or after `max_iter` steps.
pub fn iterate_liouville(params: &SystemParams, a_start: f64, max_iter: usize) -> IterationTrace {
    assert!(max_iter >= 1, "max_iter must be >= 1");
    let g1 = params.gamma() - 1.0;
    let bg = params.beta_gamma();
    let (p, q) = (params.p(), params.q());
    let (s1, s2) = (params.sigma1(), params.sigma2());
    let r0 = params.iter_ratio();
    let drift = params.eta0() / (g1 * g1);
    let degenerate = approx_eq(p * q, g1 * g1);
    // fixed point of the composed affine map (only meaningful off the hyperbola)
    let fixed = if degenerate { f64::NAN } else { drift / (r0 - 1.0) };

    let closed_form = |j: usize| -> f64 {
        if degenerate {
            a_start - j as f64 * drift
        } else {
            r0.powi(j as i32) * (a_start - fixed) + fixed
        }
    };

    let mut a = vec![a_start];
    let mut b = Vec::new();
    let mut check = 0.0f64;
    let mut verdict = None;

    for k in 0..max_iter {
        let ak = a[k];
        let cf = closed_form(k);
        if ak.is_finite() && cf.is_finite() {
            check = check.max((ak - cf).abs());
        }
        if ak < 0.0 {
            verdict = Some(IterationVerdict::DivergesNegative { index: k });
            break;
        }
        if !ak.is_finite() || ak > GROWTH_LIMIT {
            verdict = Some(IterationVerdict::Stalls { iterations: k });
            break;
        }
        let bk = (p * ak - s2 - bg) / g1;
        b.push(bk);
        if bk < 0.0 {
            verdict = Some(IterationVerdict::DivergesNegative { index: k });
            break;
        }
        let next = (q * bk - s1 - bg) / g1;
        a.push(next);
        if (next - ak).abs() < CONVERGE_TOL * (1.0 + ak.abs()) {
            verdict = Some(IterationVerdict::ConvergesTo { limit: next });
            break;
        }
    }

    if let Some(&last) = a.last() {
        let cf = closed_form(a.len() - 1);
        if last.is_finite() && cf.is_finite() {
            check = check.max((last - cf).abs());
        }
    }

    IterationTrace {
        verdict: verdict.unwrap_or(IterationVerdict::Stalls { iterations: max_iter }),
        a,
        b,
        closed_form_check: check,
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FitError {
    #[error("rate fit needs at least 8 samples, got {0}")]
    TooFewSamples(usize),
    #[error("radii must be strictly increasing and positive")]
    RadiiNotIncreasing,
    #[error("rate fits are tail fits: smallest radius must be >= 10, got {0}")]
    WindowTooLow(f64),
    #[error("sample value at r = {r} is not positive and finite")]
    NonpositiveValue { r: f64 },
    #[error("regression condition {condition:.3e} exceeds 1e8: window too narrow to separate the log factor")]
    IllConditioned { condition: f64 },
}

/// Result of fitting `value ~ C r^{-theta} (ln r)^{kappa}` over a tail window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    /// Power-law exponent.
    pub theta: f64,
    /// Log-correction exponent (0 when the fit omits the log regressor).
    pub kappa: f64,
    /// `ln C`.
    pub log_amplitude: f64,
    /// RMS of the log-residuals.
    pub residual: f64,
    pub window: (f64, f64),
    /// Condition number of the regression normal matrix.
    pub condition: f64,
}

/// Least-squares fit of `ln v` against `{1, -ln r, ln ln r}` (the last
/// regressor only when `allow_log`). Deterministic: the normal equations are
/// accumulated in sample order and solved directly.
pub fn fit_rate(samples: &[(f64, f64)], allow_log: bool) -> Result<RateFit, FitError> {
    if samples.len() < 8 {
        return Err(FitError::TooFewSamples(samples.len()));
    }
    let r_lo = samples[0].0;
    if r_lo < 10.0 {
        return Err(FitError::WindowTooLow(r_lo));
    }
    for w in samples.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(FitError::RadiiNotIncreasing);
        }
    }
    for &(r, v) in samples {
        if !(v > 0.0) || !v.is_finite() || !r.is_finite() {
            return Err(FitError::NonpositiveValue { r });
        }
    }

    let k = if allow_log { 3 } else { 2 };
    let mut gram = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(r, v) in samples {
        let l = r.ln();
        let x = [1.0, -l, if allow_log { l.ln() } else { 0.0 }];
        let y = v.ln();
        for i in 0..k {
            for j in 0..k {
                gram[i][j] += x[i] * x[j];
            }
            rhs[i] += x[i] * y;
        }
    }

    let eig = jacobi_eigenvalues(&gram, k);
    let lam_min = eig.iter().take(k).cloned().fold(f64::INFINITY, f64::min);
    let lam_max = eig.iter().take(k).cloned().fold(0.0f64, f64::max);
    let condition = if lam_min > 0.0 { lam_max / lam_min } else { f64::INFINITY };
    if condition > 1e8 {
        return Err(FitError::IllConditioned { condition });
    }

    let coef = solve3(&gram, &rhs, k);
    let mut ss = 0.0;
    for &(r, v) in samples {
        let l = r.ln();
        let x = [1.0, -l, if allow_log { l.ln() } else { 0.0 }];
        let pred: f64 = (0..k).map(|i| coef[i] * x[i]).sum();
        ss += (v.ln() - pred).powi(2);
    }

    Ok(RateFit {
        theta: coef[1],
        kappa: if allow_log { coef[2] } else { 0.0 },
        log_amplitude: coef[0],
        residual: (ss / samples.len() as f64).sqrt(),
        window: (r_lo, samples[samples.len() - 1].0),
        condition,
    })
}

/// Eigenvalues of the leading k x k block of a symmetric 3x3 matrix by cyclic
/// Jacobi rotations.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(m: &[[f64; 3]; 3], k: usize) -> [f64; 3] {
    let mut a = *m;
    for i in k..3 {
        a[i][i] = 1.0; // pad so unused dimensions are neutral
        for j in 0..3 {
            if i != j {
                a[i][j] = 0.0;
                a[j][i] = 0.0;
            }
        }
    }
    for _ in 0..60 {
        let mut off = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-300 {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..3 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let (app, aqq, apq) = (a[p][p], a[q][q], a[p][q]);
                a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for i in 0..3 {
                    if i != p && i != q {
                        let (aip, aiq) = (a[i][p], a[i][q]);
                        a[i][p] = c * aip - s * aiq;
                        a[p][i] = a[i][p];
                        a[i][q] = s * aip + c * aiq;
                        a[q][i] = a[i][q];
                    }
                }
            }
        }
    }
    [a[0][0], a[1][1], a[2][2]]
}

/// Gaussian elimination with partial pivoting on the k x k leading block.
#[allow(clippy::needless_range_loop)]
fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3], k: usize) -> [f64; 3] {
    let mut a = *m;
    let mut b = *rhs;
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..k {
            let f = a[row][col] / a[col][col];
            for c in col..k {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for col in (0..k).rev() {
        let mut acc = b[col];
        for c in (col + 1)..k {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    x
}

/// Left-hand side of the lambda-limit identity at each radius:
///
/// ```text
/// lhs(r) = r^{a0} (ln(lambda r))^{-1/(gamma-1)}
///          * int_{lambda r}^inf (ln t / t^{n - beta*gamma})^{1/(gamma-1)} dt/t,
/// ```
///
/// which converges to `((gamma-1)/(n - beta*gamma)) lambda^{-a0}` as
/// `r -> inf`. Used as a convergence diagnostic for the log-corrected branch.
pub fn lambda_limit_check(
    n: u32,
    beta: f64,
    gamma: f64,
    lambda: f64,
    radii: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<(f64, f64)>, QuadError> {
    assert!(lambda > 0.0);
    assert!(n >= 3 && beta > 0.0 && gamma > 1.0 && beta * gamma < f64::from(n));
    let m = 1.0 / (gamma - 1.0);
    let a0 = (f64::from(n) - beta * gamma) * m;
    let mut out = Vec::with_capacity(radii.len());
    for w in radii.windows(2) {
        assert!(w[1] > w[0], "radii must be increasing");
    }
    for &r in radii {
        let t0 = lambda * r;
        assert!(t0 > 1.0, "need lambda*r > 1 for the log integrand");
        let integrand = |t: f64| (m * t.ln().ln() - (a0 + 1.0) * t.ln()).exp();
        let integral = quad::integrate_tail(integrand, t0, a0, spec)?;
        let lhs = (a0 * r.ln() - m * t0.ln().ln() + integral.value.ln()).exp();
        out.push((r, lhs));
    }
    Ok(out)
}

/// The limit value `((gamma-1)/(n-beta*gamma)) lambda^{-a0}` of
/// [`lambda_limit_check`].
pub fn lambda_limit_value(n: u32, beta: f64, gamma: f64, lambda: f64) -> f64 {
    let a0 = (f64::from(n) - beta * gamma) / (gamma - 1.0);
    (gamma - 1.0) / (f64::from(n) - beta * gamma) * lambda.powf(-a0)
}
