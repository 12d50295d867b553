//! Explicit solution pairs `u = (1+|x|^2)^{-theta1}`, `v = (1+|x|^2)^{-theta2}`
//! on the admissible side of the parameter space, and numerical certification
//! that the induced coefficients
//!
//! ```text
//! c1(x) = u(x) / W_{beta,gamma}(|y|^{sigma1} v^q)(x),
//! c2(x) = v(x) / W_{beta,gamma}(|y|^{sigma2} u^p)(x)
//! ```
//!
//! are double bounded, together with tail fits of the potentials against the
//! predicted slow/fast decay rates.

use crate::asymptotics::{fit_rate, FitError, RateFit};
use crate::quad::QuadratureSpec;
use crate::system::{
    classify, fast_rate, fast_v_rate, CoreError, FastVRateCase, Regime, SystemParams,
};
use crate::wolff::{power_pair_density, wolff_potential, RadialDensity, WolffError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("parameters are not admissible (regime {regime:?}); no pair exists")]
    NotAdmissible { regime: Regime },
    #[error("requested mode unavailable: {reason}")]
    ModeUnavailable { reason: String },
    #[error("ratio window must span >= 6 decades and cover [1e-3, 1e3], got [{lo}, {hi}]")]
    WindowTooNarrow { lo: f64, hi: f64 },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Wolff(#[from] WolffError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Which explicit pair to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// `2 theta1 = q0`, `2 theta2 = p0`: the non-integrable pair.
    Slow,
    /// `2 theta1 = 2 theta2 = a0`: the integrable pair; needs the strict
    /// inequalities `p > (n+sigma2)(gamma-1)/(n-beta*gamma)` and its mirror.
    Fast,
}

/// An explicit radial pair together with its construction mode.
#[derive(Debug, Clone)]
pub struct ExplicitPair {
    pub params: SystemParams,
    pub mode: PairMode,
    pub theta1: f64,
    pub theta2: f64,
    pub u: RadialDensity,
    pub v: RadialDensity,
    /// Fast mode only: whether the stronger ordering hypotheses
    /// (`q >= p`, `sigma1 <= sigma2 <= 0`, non-subcritical gap) also hold, in
    /// which case fast decay is equivalent to plain integrability and not
    /// just to optimal integrability.
    pub strict_fast_hypotheses: bool,
}

/// Build the explicit pair for admissible parameters.
///
/// Slow mode requires (and verifies numerically) the chain
/// `beta*gamma < p q0 - sigma2 < n` and its mirror; fast mode requires the
/// strict coupling inequalities, otherwise [`ConstructionError::ModeUnavailable`].
pub fn build_pair(params: &SystemParams, mode: PairMode) -> Result<ExplicitPair, ConstructionError> {
    let report = classify(params);
    if report.regime != Regime::Admissible {
        return Err(ConstructionError::NotAdmissible { regime: report.regime });
    }
    let bg = params.beta_gamma();
    let n = f64::from(params.n());
    let g1 = params.gamma() - 1.0;

    let (theta1, theta2) = match mode {
        PairMode::Slow => {
            let q0 = report.q0.expect("admissible implies slow rates exist");
            let p0 = report.p0.expect("admissible implies slow rates exist");
            // the inequality chain is equivalent to 0 < p0, q0 < a0 but is
            // checked in the form used by the splitting estimates
            let chain_u = params.p() * q0 - params.sigma2();
            let chain_v = params.q() * p0 - params.sigma1();
            if !(bg < chain_u && chain_u < n && bg < chain_v && chain_v < n) {
                return Err(ConstructionError::ModeUnavailable {
                    reason: format!(
                        "slow-mode chain violated: need {bg} < {chain_u} < {n} and {bg} < {chain_v} < {n}"
                    ),
                });
            }
            (q0 / 2.0, p0 / 2.0)
        }
        PairMode::Fast => {
            let a0 = report.a0;
            let p_bound = (n + params.sigma2()) * g1 / (n - bg);
            let q_bound = (n + params.sigma1()) * g1 / (n - bg);
            if !(params.p() > p_bound && params.q() > q_bound) {
                return Err(ConstructionError::ModeUnavailable {
                    reason: format!(
                        "fast mode needs p > {p_bound} and q > {q_bound}, got p = {}, q = {}",
                        params.p(),
                        params.q()
                    ),
                });
            }
            (a0 / 2.0, a0 / 2.0)
        }
    };

    let strict_fast_hypotheses = mode == PairMode::Fast
        && params.q() >= params.p()
        && params.sigma1() <= params.sigma2()
        && params.sigma2() <= 0.0
        && report.q0.unwrap() + report.p0.unwrap() <= report.a0;

    Ok(ExplicitPair {
        params: *params,
        mode,
        theta1,
        theta2,
        u: power_pair_density(theta1, 0.0, 1.0),
        v: power_pair_density(theta2, 0.0, 1.0),
        strict_fast_hypotheses,
    })
}

impl ExplicitPair {
    /// Density `|y|^{sigma1} v^q` driving the u-equation.
    pub fn u_response_density(&self) -> RadialDensity {
        power_pair_density(self.theta2, self.params.sigma1(), self.params.q())
    }

    /// Density `|y|^{sigma2} u^p` driving the v-equation.
    pub fn v_response_density(&self) -> RadialDensity {
        power_pair_density(self.theta1, self.params.sigma2(), self.params.p())
    }
}

/// One coefficient sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RatioSample {
    pub r: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundednessVerdict {
    /// Both coefficients positive with finite spread that has plateaued.
    DoubleBounded { spread: f64 },
    SpreadExceeded,
}

/// Observed double-boundedness evidence over a finite window.
///
/// `spread` is `max / min` over the window. Finite windows cannot certify a
/// supremum, so the verdict also demands a plateau: the spread acquired over
/// the outer half of the (log) window must be at most 10% of the full-window
/// spread excess, i.e. `outer_spread - 1 <= 0.1 (full_spread - 1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub ratio_samples: Vec<RatioSample>,
    pub c1_min: f64,
    pub c1_max: f64,
    pub c2_min: f64,
    pub c2_max: f64,
    pub spread_c1: f64,
    pub spread_c2: f64,
    pub outer_spread_c1: f64,
    pub outer_spread_c2: f64,
    pub radii_window: (f64, f64),
    pub verdict: BoundednessVerdict,
}

const PLATEAU_BUDGET: f64 = 0.10;

/// `count` log-spaced points over `[lo, hi]`, endpoints exact.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Default boundedness grid: 60 log-spaced radii over [1e-3, 1e9].
pub fn default_ratio_radii() -> Vec<f64> {
    log_spaced(1e-3, 1e9, 60)
}

/// Default tail window for rate fits: 40 log-spaced radii over [1e3, 1e9].
pub fn default_tail_radii() -> Vec<f64> {
    log_spaced(1e3, 1e9, 40)
}

/// Sample both coefficients over `radii` and report the observed spreads.
pub fn coefficient_ratios(
    pair: &ExplicitPair,
    radii: &[f64],
    spec: &QuadratureSpec,
) -> Result<BoundednessReport, ConstructionError> {
    let lo = *radii.first().expect("radii must be nonempty");
    let hi = *radii.last().unwrap();
    if !(lo <= 1e-3 && hi >= 1e3 && hi / lo >= 1e6) {
        return Err(ConstructionError::WindowTooNarrow { lo, hi });
    }
    let params = &pair.params;
    let fu = pair.u_response_density();
    let fv = pair.v_response_density();

    // radii are independent; order of the collected samples is fixed by index
    let samples: Vec<RatioSample> = radii
        .par_iter()
        .map(|&r| -> Result<RatioSample, ConstructionError> {
            let wu = wolff_potential(&fu, params.n(), params.beta(), params.gamma(), r, spec)?;
            let wv = wolff_potential(&fv, params.n(), params.beta(), params.gamma(), r, spec)?;
            Ok(RatioSample { r, c1: pair.u.eval(r) / wu, c2: pair.v.eval(r) / wv })
        })
        .collect::<Result<_, _>>()?;

    let all_positive = samples.iter().all(|s| {
        s.c1.is_finite() && s.c2.is_finite() && s.c1 > 0.0 && s.c2 > 0.0
    });

    let minmax = |vals: &mut dyn Iterator<Item = f64>| -> (f64, f64) {
        vals.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (c1_min, c1_max) = minmax(&mut samples.iter().map(|s| s.c1));
    let (c2_min, c2_max) = minmax(&mut samples.iter().map(|s| s.c2));
    let mid = (lo * hi).sqrt();
    let (o1_min, o1_max) = minmax(&mut samples.iter().filter(|s| s.r >= mid).map(|s| s.c1));
    let (o2_min, o2_max) = minmax(&mut samples.iter().filter(|s| s.r >= mid).map(|s| s.c2));

    let spread_c1 = c1_max / c1_min;
    let spread_c2 = c2_max / c2_min;
    let outer_spread_c1 = o1_max / o1_min;
    let outer_spread_c2 = o2_max / o2_min;

    let plateaued = |outer: f64, full: f64| (outer - 1.0) <= PLATEAU_BUDGET * (full - 1.0) || outer <= 1.02;
    let verdict = if all_positive
        && spread_c1.is_finite()
        && spread_c2.is_finite()
        && plateaued(outer_spread_c1, spread_c1)
        && plateaued(outer_spread_c2, spread_c2)
    {
        BoundednessVerdict::DoubleBounded { spread: spread_c1.max(spread_c2) }
    } else {
        BoundednessVerdict::SpreadExceeded
    };

    Ok(BoundednessReport {
        ratio_samples: samples,
        c1_min,
        c1_max,
        c2_min,
        c2_max,
        spread_c1,
        spread_c2,
        outer_spread_c1,
        outer_spread_c2,
        radii_window: (lo, hi),
        verdict,
    })
}

/// Tail fits of both potentials against the predicted decay class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayClassReport {
    pub u_fit: RateFit,
    pub v_fit: RateFit,
    pub expected_theta_u: f64,
    pub expected_kappa_u: f64,
    pub expected_theta_v: f64,
    pub expected_kappa_v: f64,
}

/// Fit the decay rates of `W(|y|^{sigma1} v^q)` and `W(|y|^{sigma2} u^p)` on
/// the default tail window and pair them with the predicted rates: the slow
/// rates `(q0, p0)` in slow mode, and the fast rate plus its trichotomy case
/// in fast mode.
pub fn verify_decay_class(
    pair: &ExplicitPair,
    spec: &QuadratureSpec,
) -> Result<DecayClassReport, ConstructionError> {
    verify_decay_class_on(pair, &default_tail_radii(), spec)
}

/// [`verify_decay_class`] on a caller-supplied tail window.
pub fn verify_decay_class_on(
    pair: &ExplicitPair,
    radii: &[f64],
    spec: &QuadratureSpec,
) -> Result<DecayClassReport, ConstructionError> {
    let params = &pair.params;
    let (exp_u, exp_v): ((f64, f64), (f64, f64)) = match pair.mode {
        PairMode::Slow => {
            let e = params.exponents()?;
            ((e.q0, 0.0), (e.p0, 0.0))
        }
        PairMode::Fast => {
            // each equation sees the trichotomy of its own exponents; for a
            // built pair both discriminants are strict so both are plain
            let u_case = fast_v_rate(&params.swapped());
            let v_case = fast_v_rate(params);
            (
                (u_case.rate(), u_case.log_exponent()),
                (v_case.rate(), v_case.log_exponent()),
            )
        }
    };

    let u_fit = fit_potential_rate(&pair.u_response_density(), params, radii, spec)?;
    let v_fit = fit_potential_rate(&pair.v_response_density(), params, radii, spec)?;

    Ok(DecayClassReport {
        u_fit,
        v_fit,
        expected_theta_u: exp_u.0,
        expected_kappa_u: exp_u.1,
        expected_theta_v: exp_v.0,
        expected_kappa_v: exp_v.1,
    })
}

/// Evaluate a potential on a tail window and fit `C r^{-theta} (ln r)^{kappa}`.
pub fn fit_potential_rate(
    density: &RadialDensity,
    params: &SystemParams,
    radii: &[f64],
    spec: &QuadratureSpec,
) -> Result<RateFit, ConstructionError> {
    let samples: Vec<(f64, f64)> = radii
        .par_iter()
        .map(|&r| -> Result<(f64, f64), ConstructionError> {
            let w = wolff_potential(density, params.n(), params.beta(), params.gamma(), r, spec)?;
            Ok((r, w))
        })
        .collect::<Result<_, _>>()?;
    Ok(fit_rate(&samples, true)?)
}

/// Decay fit of `W(|y|^{sigma2} u^p)` for the synthetic fast profile
/// `u = (1 + r^2)^{-a0/2}`, paired with the predicted trichotomy case.
///
/// This exercises all three branches of the fast rate (plain, log-corrected,
/// reduced) without requiring the parameters to admit a fast pair, which the
/// log-corrected boundary case never does.
pub fn fast_response_fit(
    params: &SystemParams,
    radii: &[f64],
    spec: &QuadratureSpec,
) -> Result<(RateFit, FastVRateCase), ConstructionError> {
    let a0 = fast_rate(params);
    let density = power_pair_density(a0 / 2.0, params.sigma2(), params.p());
    let fit = fit_potential_rate(&density, params, radii, spec)?;
    Ok((fit, fast_v_rate(params)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{coefficient_ratios, default_ratio_radii};
    use crate::wolff::wolff_potential;

    fn params(n: u32, beta: f64, gamma: f64, p: f64, q: f64, s1: f64, s2: f64) -> SystemParams {
        SystemParams::new(n, beta, gamma, p, q, s1, s2).unwrap()
    }

    fn reference() -> SystemParams {
        params(5, 1.0, 2.0, 3.0, 3.0, 0.0, 0.0)
    }

    #[test]
    fn build_pair_reference_rates() {
        let slow = build_pair(&reference(), PairMode::Slow).unwrap();
        assert!((slow.theta1 - 0.5).abs() < 1e-14);
        assert!((slow.theta2 - 0.5).abs() < 1e-14);

        let fast = build_pair(&reference(), PairMode::Fast).unwrap();
        assert!((fast.theta1 - 1.5).abs() < 1e-14);
        assert!((fast.theta2 - 1.5).abs() < 1e-14);
        assert!(fast.strict_fast_hypotheses);
    }

    #[test]
    fn fast_mode_requires_coupling_inequalities() {
        // p = 1.4 < 5/3 fails the fast inequality while staying admissible
        let pr = params(5, 1.0, 2.0, 1.4, 3.0, 0.0, 0.0);
        assert_eq!(classify(&pr).regime, Regime::Admissible);
        match build_pair(&pr, PairMode::Fast) {
            Err(ConstructionError::ModeUnavailable { .. }) => {}
            other => panic!("expected ModeUnavailable, got {other:?}"),
        }
        // slow mode still works there
        assert!(build_pair(&pr, PairMode::Slow).is_ok());
    }

    #[test]
    fn inadmissible_parameters_are_rejected() {
        let pr = params(5, 1.0, 2.0, 1.2, 1.2, 0.0, 0.0);
        match build_pair(&pr, PairMode::Slow) {
            Err(ConstructionError::NotAdmissible { regime }) => {
                assert!(regime.is_nonexistence());
            }
            other => panic!("expected NotAdmissible, got {other:?}"),
        }
    }

    #[test]
    fn response_density_shapes() {
        let pair = build_pair(&reference(), PairMode::Slow).unwrap();
        // |y|^0 v^3 with v = (1+r^2)^{-1/2}
        let d = pair.u_response_density();
        assert_eq!(d.origin_exponent(), 0.0);
        assert_eq!(d.tail_exponent(), 3.0);
        let r: f64 = 2.0;
        assert!((d.eval(r) - (1.0 + r * r).powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn scaling_v_rescales_c1_but_not_its_spread() {
        // replacing v by 2v multiplies W by 2^{q/(gamma-1)} and c1 by its
        // reciprocal, pointwise, so the spread is untouched
        let pair = build_pair(&reference(), PairMode::Fast).unwrap();
        let spec = QuadratureSpec { rel_tol: 1e-9, ..Default::default() };
        let fu = pair.u_response_density();
        let factor = 2f64.powf(pair.params.q() / (pair.params.gamma() - 1.0));
        for &r in &[0.1, 1.0, 30.0] {
            let w = wolff_potential(&fu, 5, 1.0, 2.0, r, &spec).unwrap();
            let w2 = wolff_potential(&fu.scaled(2f64.powf(pair.params.q())), 5, 1.0, 2.0, r, &spec)
                .unwrap();
            assert!((w2 / w - factor).abs() < 1e-7 * factor, "r={r}");
        }
    }

    #[test]
    fn window_validation() {
        let pair = build_pair(&reference(), PairMode::Slow).unwrap();
        let spec = QuadratureSpec::default();
        let narrow = log_spaced(1e-2, 1e2, 10);
        match coefficient_ratios(&pair, &narrow, &spec) {
            Err(ConstructionError::WindowTooNarrow { .. }) => {}
            other => panic!("expected window error, got {other:?}"),
        }
    }

    #[test]
    fn slow_mode_rate_identity() {
        // the exponent identity behind the splitting estimate:
        // (2 theta2 q - sigma1 - beta*gamma)/(gamma-1) = 2 theta1 = q0
        for pr in [
            reference(),
            params(5, 1.0, 2.0, 2.0, 4.0, -0.5, 0.5),
            params(4, 0.8, 1.6, 2.5, 3.0, 0.3, -0.4),
        ] {
            let pair = build_pair(&pr, PairMode::Slow).unwrap();
            let g1 = pr.gamma() - 1.0;
            let lhs = (2.0 * pair.theta2 * pr.q() - pr.sigma1() - pr.beta_gamma()) / g1;
            assert!(
                (lhs - 2.0 * pair.theta1).abs() <= 1e-12 * (1.0 + lhs.abs()),
                "{pr:?}: {lhs} vs {}",
                2.0 * pair.theta1
            );
        }
    }

    #[test]
    fn asymmetric_slow_pair_decay_rates() {
        // q0 != p0: each potential decays with its own slow rate
        let pr = params(5, 1.0, 2.0, 2.0, 4.0, -0.5, 0.5);
        let pair = build_pair(&pr, PairMode::Slow).unwrap();
        let e = pr.exponents().unwrap();
        let spec = QuadratureSpec::default();
        let radii = log_spaced(1e4, 1e8, 16);
        let report = verify_decay_class_on(&pair, &radii, &spec).unwrap();
        assert!((report.u_fit.theta - e.q0).abs() <= 0.02 * e.q0, "{report:?}");
        assert!((report.v_fit.theta - e.p0).abs() <= 0.02 * e.p0, "{report:?}");
        assert_eq!(report.expected_theta_u, e.q0);
        assert_eq!(report.expected_theta_v, e.p0);
    }

    #[test]
    fn asymmetric_slow_pair_ratios_plateau() {
        let pr = params(5, 1.0, 2.0, 2.0, 4.0, -0.5, 0.5);
        let pair = build_pair(&pr, PairMode::Slow).unwrap();
        let spec = QuadratureSpec::default();
        let report = coefficient_ratios(&pair, &default_ratio_radii(), &spec).unwrap();
        assert!(report.ratio_samples.iter().all(|s| s.c1 > 0.0 && s.c2 > 0.0));
        assert!(
            matches!(report.verdict, BoundednessVerdict::DoubleBounded { .. }),
            "spreads {}/{} outer {}/{}",
            report.spread_c1,
            report.spread_c2,
            report.outer_spread_c1,
            report.outer_spread_c2
        );
    }

    #[test]
    fn swapped_parameters_swap_the_reports() {
        // asymmetric admissible parameters
        let pr = params(5, 1.0, 2.0, 2.0, 4.0, -0.5, 0.5);
        assert_eq!(classify(&pr).regime, Regime::Admissible);
        let pair = build_pair(&pr, PairMode::Slow).unwrap();
        let mirror = build_pair(&pr.swapped(), PairMode::Slow).unwrap();
        assert!((pair.theta1 - mirror.theta2).abs() < 1e-14);
        assert!((pair.theta2 - mirror.theta1).abs() < 1e-14);

        // the mirrored response densities coincide, so the coefficients swap
        let spec = QuadratureSpec { rel_tol: 1e-8, ..Default::default() };
        for &r in &[0.5, 5.0] {
            let wu = wolff_potential(&pair.u_response_density(), 5, 1.0, 2.0, r, &spec).unwrap();
            let wv_m = wolff_potential(&mirror.v_response_density(), 5, 1.0, 2.0, r, &spec).unwrap();
            assert!((wu - wv_m).abs() <= 1e-12 * wu.abs(), "r={r}: {wu} vs {wv_m}");
        }
    }
}
