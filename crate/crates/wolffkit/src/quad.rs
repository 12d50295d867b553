//! Adaptive Gauss-Kronrod quadrature with user-supplied breakpoints and
//! substitution helpers for logarithmic ranges and algebraic tails.
//!
//! The core rule is the 15-point Kronrod extension of 7-point Gauss (the
//! classical QUADPACK pair); intervals are kept in a max-heap keyed by the
//! local error estimate and the worst interval is bisected until the global
//! estimate meets `max(abs_tol, rel_tol * |integral|)`.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Accuracy targets and budget for one quadrature problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Target relative error of the full integral.
    pub rel_tol: f64,
    /// Absolute error floor (useful for integrals that are legitimately zero).
    pub abs_tol: f64,
    /// Interval-bisection budget per call.
    pub max_subdivisions: u32,
    /// How the unbounded upper limit of the potential integral is handled.
    pub tail_policy: TailPolicy,
}

/// Tail handling for integrals over `(T, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailPolicy {
    /// Map the tail onto (0,1] with a power substitution matched to the
    /// integrand decay; no truncation bias.
    Analytic,
    /// Truncate at the given t (biases slowly decaying tails; opt-in only).
    HardCutoff(f64),
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-280,
            max_subdivisions: 4000,
            tail_policy: TailPolicy::Analytic,
        }
    }
}

impl QuadratureSpec {
    /// Spec with a different relative tolerance, other knobs unchanged.
    pub fn with_rel_tol(&self, rel_tol: f64) -> Self {
        QuadratureSpec { rel_tol, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(QuadError::InvalidSpec("tolerances must be positive"));
        }
        if self.max_subdivisions < 8 {
            return Err(QuadError::InvalidSpec("max_subdivisions must be >= 8"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature tolerance unreachable within {subdivisions} subdivisions (value {value:.6e}, error {abs_error:.2e})")]
    ToleranceNotReached {
        value: f64,
        abs_error: f64,
        subdivisions: u32,
    },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: u32,
}

// 15-point Kronrod nodes (positive half) and weights; 7-point Gauss weights.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_17,
    0.207_784_955_007_898_47,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One GK15 application on [a, b]: (value, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut res_abs = kronrod.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let value = kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * 1.0_f64.min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() || !err.is_finite() {
        return (if value.is_finite() { value } else { 0.0 }, f64::MAX);
    }
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Adaptive integral of `f` over the finite interval [a, b].
///
/// `breakpoints` lists abscissae where the integrand has kinks or other
/// features; the initial partition is split there so the error estimator
/// never straddles them.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult, QuadError> {
    spec.validate()?;
    if !(b > a) {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, subdivisions: 0 });
    }

    let mut edges: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(a);
    let mut bps: Vec<f64> = breakpoints.iter().copied().filter(|t| *t > a && *t < b).collect();
    bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    bps.dedup();
    edges.extend(bps);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    // error mass on intervals too narrow to split further (roundoff floor)
    let mut frozen_err = 0.0;

    for w in edges.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Segment { a: w[0], b: w[1], value, error });
    }

    let mut subdivisions = 0u32;
    loop {
        let target = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err + frozen_err <= target {
            return Ok(QuadResult { value: total, abs_error: total_err + frozen_err, subdivisions });
        }
        if frozen_err > target || subdivisions >= spec.max_subdivisions {
            return Err(QuadError::ToleranceNotReached {
                value: total,
                abs_error: total_err + frozen_err,
                subdivisions,
            });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => {
                return Err(QuadError::ToleranceNotReached {
                    value: total,
                    abs_error: frozen_err,
                    subdivisions,
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // interval at roundoff width; its error can no longer shrink
            total_err -= worst.error;
            frozen_err += worst.error;
            continue;
        }
        subdivisions += 1;
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

/// Integral of `f` over [a, b] with 0 < a < b computed in s = ln t, which
/// resolves integrands spread over many decades.
pub fn integrate_log<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult, QuadError> {
    debug_assert!(a > 0.0);
    let bps: Vec<f64> = breakpoints.iter().filter(|t| **t > 0.0).map(|t| t.ln()).collect();
    integrate(|s| {
        let t = s.exp();
        f(t) * t
    }, a.ln(), b.ln(), &bps, spec)
}

/// Integral of `f` over `(t0, inf)` where `f(t) ~ c t^{-1-decay}` as t -> inf
/// with `decay > 0`. Substitutes `t = t0 u^{-k}`, with `k` chosen so the
/// transformed integrand vanishes at least linearly at u = 0.
pub fn integrate_tail<F: Fn(f64) -> f64>(
    f: F,
    t0: f64,
    decay: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult, QuadError> {
    debug_assert!(t0 > 0.0 && decay > 0.0);
    let k = (2.0 / decay.max(0.05)).clamp(1.0, 40.0);
    let ln_t0 = t0.ln();
    integrate(
        |u| {
            if u <= 0.0 {
                return 0.0;
            }
            let ln_t = ln_t0 - k * u.ln();
            if ln_t > 660.0 {
                // beyond ~1e286 the integrand contribution is below any
                // tolerance this crate accepts
                return 0.0;
            }
            let t = ln_t.exp();
            f(t) * k * t / u
        },
        0.0,
        1.0,
        &[],
        spec,
    )
}
