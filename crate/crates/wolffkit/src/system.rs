//! System parameters, closed-form exponents and the regime classifier for the
//! coupled Wolff-potential integral system
//!
//! ```text
//! u = c1(x) W_{beta,gamma}(|y|^{sigma1} v^q),
//! v = c2(x) W_{beta,gamma}(|y|^{sigma2} u^p),
//! ```
//!
//! with double bounded coefficients `c1, c2`. The classifier separates the
//! parameter space into non-existence regimes (no positive solution exists for
//! any double bounded coefficients) and the admissible regime where explicit
//! solutions can be built (see [`crate::constructions`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for the equality cases of the classification
/// (`pq = (gamma-1)^2`, `max{q0,p0} = a0`, `p a0 - sigma2 = n`), with an
/// exact-equality fast path. Classification is discontinuous at these
/// boundaries, so the detection band must be explicit.
pub const EQ_REL_TOL: f64 = 1e-12;

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= EQ_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CoreError {
    #[error("dimension must be an integer >= 3, got {0}")]
    DimensionTooSmall(u32),
    #[error("all parameters must be finite")]
    NonFiniteInput,
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("gamma must exceed 1, got {0}")]
    GammaTooSmall(f64),
    #[error("beta*gamma must be strictly less than n (got beta*gamma = {bg}, n = {n})")]
    SupercriticalScaling { bg: f64, n: u32 },
    #[error("sigma{index} = {value} violates the convention sigma > -beta*gamma = {bound} (construct with allow_nonconvention to relax)")]
    ConventionViolated { index: u8, value: f64, bound: f64 },
    #[error("sigma{index} = {value} must exceed -n = {bound} for local integrability")]
    NotLocallyIntegrable { index: u8, value: f64, bound: f64 },
    #[error("pq = (gamma-1)^2: slow rates are undefined on the degenerate hyperbola")]
    DegenerateProduct,
    #[error("p*a0 - (beta*gamma + sigma2) <= 0: the s-integrability branch is vacuous (threshold +inf); r_min = {r_min}")]
    NonpositiveDenominator { r_min: f64 },
}

/// Parameters `(n, beta, gamma, p, q, sigma1, sigma2)` of the integral system.
///
/// Invariants enforced at construction: `n >= 3`, `beta > 0`, `gamma > 1`,
/// `p, q > 0`, `beta*gamma < n`, all fields finite, and (unless relaxed)
/// `sigma_i > -beta*gamma`. Relaxed construction still requires
/// `sigma_i > -n`, without which the weighted densities are not locally
/// integrable and every potential is identically infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    n: u32,
    beta: f64,
    gamma: f64,
    p: f64,
    q: f64,
    sigma1: f64,
    sigma2: f64,
    #[serde(default)]
    allow_nonconvention: bool,
}

impl SystemParams {
    pub fn new(
        n: u32,
        beta: f64,
        gamma: f64,
        p: f64,
        q: f64,
        sigma1: f64,
        sigma2: f64,
    ) -> Result<Self, CoreError> {
        Self::build(n, beta, gamma, p, q, sigma1, sigma2, false)
    }

    /// Accepts `sigma_i <= -beta*gamma` (but still `> -n`). Classification
    /// clauses whose justification needs the convention are then skipped; see
    /// [`classify`].
    pub fn new_relaxed(
        n: u32,
        beta: f64,
        gamma: f64,
        p: f64,
        q: f64,
        sigma1: f64,
        sigma2: f64,
    ) -> Result<Self, CoreError> {
        Self::build(n, beta, gamma, p, q, sigma1, sigma2, true)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        n: u32,
        beta: f64,
        gamma: f64,
        p: f64,
        q: f64,
        sigma1: f64,
        sigma2: f64,
        allow_nonconvention: bool,
    ) -> Result<Self, CoreError> {
        if n < 3 {
            return Err(CoreError::DimensionTooSmall(n));
        }
        for v in [beta, gamma, p, q, sigma1, sigma2] {
            if !v.is_finite() {
                return Err(CoreError::NonFiniteInput);
            }
        }
        for (name, v) in [("beta", beta), ("p", p), ("q", q)] {
            if v <= 0.0 {
                return Err(CoreError::NonPositive { name, value: v });
            }
        }
        if gamma <= 1.0 {
            return Err(CoreError::GammaTooSmall(gamma));
        }
        let bg = beta * gamma;
        if bg >= f64::from(n) {
            return Err(CoreError::SupercriticalScaling { bg, n });
        }
        for (index, sigma) in [(1u8, sigma1), (2u8, sigma2)] {
            if sigma <= -f64::from(n) {
                return Err(CoreError::NotLocallyIntegrable {
                    index,
                    value: sigma,
                    bound: -f64::from(n),
                });
            }
            if sigma <= -bg && !allow_nonconvention {
                return Err(CoreError::ConventionViolated { index, value: sigma, bound: -bg });
            }
        }
        Ok(SystemParams { n, beta, gamma, p, q, sigma1, sigma2, allow_nonconvention })
    }

    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn beta_gamma(&self) -> f64 {
        self.beta * self.gamma
    }

    /// Both sigmas inside the convention interval `(-beta*gamma, inf)`.
    pub fn convention_holds(&self) -> bool {
        let bg = self.beta_gamma();
        self.sigma1 > -bg && self.sigma2 > -bg
    }

    /// The mirrored system: `(p, sigma2) <-> (q, sigma1)` (swaps the roles of
    /// u and v; `q0 <-> p0`).
    pub fn swapped(&self) -> Self {
        SystemParams {
            n: self.n,
            beta: self.beta,
            gamma: self.gamma,
            p: self.q,
            q: self.p,
            sigma1: self.sigma2,
            sigma2: self.sigma1,
            allow_nonconvention: self.allow_nonconvention,
        }
    }

    /// `eta0 = beta*gamma*(gamma-1+q) + (gamma-1)*sigma1 + q*sigma2`, the
    /// inhomogeneous term of the exponent iteration. Positive whenever the
    /// sigma convention holds.
    pub fn eta0(&self) -> f64 {
        let g1 = self.gamma - 1.0;
        self.beta_gamma() * (g1 + self.q) + g1 * self.sigma1 + self.q * self.sigma2
    }

    /// Ratio `pq / (gamma-1)^2` of the exponent iteration.
    pub fn iter_ratio(&self) -> f64 {
        let g1 = self.gamma - 1.0;
        self.p * self.q / (g1 * g1)
    }

    /// All derived exponents; errors on the degenerate hyperbola.
    pub fn exponents(&self) -> Result<ExponentSet, CoreError> {
        ExponentSet::from_params(self)
    }
}

/// The derived exponents of a parameter set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExponentSet {
    /// Slow decay rate of u.
    pub q0: f64,
    /// Slow decay rate of v.
    pub p0: f64,
    /// Fast decay rate `(n - beta*gamma)/(gamma - 1)`.
    pub a0: f64,
    /// Iteration ratio `pq/(gamma-1)^2`.
    pub iter_ratio: f64,
    /// Inhomogeneous iteration term.
    pub eta0: f64,
    /// Integrability exponent `n/q0`, defined only for `q0 > 0`.
    pub r0_int: Option<f64>,
    /// Integrability exponent `n/p0`, defined only for `p0 > 0`.
    pub s0_int: Option<f64>,
}

impl ExponentSet {
    fn from_params(params: &SystemParams) -> Result<Self, CoreError> {
        let (q0, p0) = slow_rates(params)?;
        let n = f64::from(params.n());
        Ok(ExponentSet {
            q0,
            p0,
            a0: fast_rate(params),
            iter_ratio: params.iter_ratio(),
            eta0: params.eta0(),
            r0_int: (q0 > 0.0).then(|| n / q0),
            s0_int: (p0 > 0.0).then(|| n / p0),
        })
    }
}

/// Slow decay rates `(q0, p0)`:
///
/// ```text
/// q0 = (beta*gamma*(gamma-1+q) + (gamma-1)*sigma1 + sigma2*q) / (pq - (gamma-1)^2)
/// ```
///
/// and `p0` with `(p, sigma2) <-> (q, sigma1)`.
pub fn slow_rates(params: &SystemParams) -> Result<(f64, f64), CoreError> {
    let g1 = params.gamma() - 1.0;
    let denom = params.p() * params.q() - g1 * g1;
    if approx_eq(params.p() * params.q(), g1 * g1) {
        return Err(CoreError::DegenerateProduct);
    }
    let q0 = params.eta0() / denom;
    let p0 = params.swapped().eta0() / denom;
    Ok((q0, p0))
}

/// Fast decay rate `a0 = (n - beta*gamma)/(gamma - 1)`.
pub fn fast_rate(params: &SystemParams) -> f64 {
    (f64::from(params.n()) - params.beta_gamma()) / (params.gamma() - 1.0)
}

/// The three-way fast rate of the second component, keyed by the sign of
/// `p*a0 - sigma2 - n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum FastVRateCase {
    /// `p*a0 - sigma2 > n`: v decays with the plain fast rate a0.
    PlainFast { rate: f64 },
    /// `p*a0 - sigma2 = n`: rate a0 with a `(ln r)^{1/(gamma-1)}` correction.
    LogCorrected { rate: f64, log_exponent: f64 },
    /// `p*a0 - sigma2 < n`: reduced rate `(p*a0 - (beta*gamma + sigma2))/(gamma-1)`.
    Reduced { rate: f64 },
}

impl FastVRateCase {
    pub fn rate(&self) -> f64 {
        match *self {
            FastVRateCase::PlainFast { rate }
            | FastVRateCase::LogCorrected { rate, .. }
            | FastVRateCase::Reduced { rate } => rate,
        }
    }

    pub fn log_exponent(&self) -> f64 {
        match *self {
            FastVRateCase::LogCorrected { log_exponent, .. } => log_exponent,
            _ => 0.0,
        }
    }
}

/// Fast-rate trichotomy for v when u decays with the fast rate.
pub fn fast_v_rate(params: &SystemParams) -> FastVRateCase {
    let a0 = fast_rate(params);
    let g1 = params.gamma() - 1.0;
    let d = params.p() * a0 - params.sigma2();
    let n = f64::from(params.n());
    if approx_eq(d, n) {
        FastVRateCase::LogCorrected { rate: a0, log_exponent: 1.0 / g1 }
    } else if d > n {
        FastVRateCase::PlainFast { rate: a0 }
    } else {
        FastVRateCase::Reduced { rate: (d - params.beta_gamma()) / g1 }
    }
}

/// Signed distance to criticality in two algebraically equivalent forms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticalityGap {
    /// `q0 + p0 - a0`; nonpositive is the non-subcritical regime.
    pub gap: f64,
    /// `(n+sigma1)/(q+gamma-1) + (n+sigma2)/(p+gamma-1) - a0`; same sign as
    /// `gap` whenever `pq > (gamma-1)^2`.
    pub gap_sobolev_form: f64,
}

/// Both forms of the criticality gap. Requires `pq > (gamma-1)^2`.
pub fn criticality_gap(params: &SystemParams) -> Result<CriticalityGap, CoreError> {
    let g1 = params.gamma() - 1.0;
    if params.p() * params.q() <= g1 * g1 || approx_eq(params.p() * params.q(), g1 * g1) {
        return Err(CoreError::DegenerateProduct);
    }
    let (q0, p0) = slow_rates(params)?;
    let a0 = fast_rate(params);
    let n = f64::from(params.n());
    let alt = (n + params.sigma1()) / (params.q() + g1) + (n + params.sigma2()) / (params.p() + g1);
    Ok(CriticalityGap { gap: q0 + p0 - a0, gap_sobolev_form: alt - a0 })
}

/// Sharp integrability thresholds `(r_min, s_min)`: a fast-decaying pair lies
/// in `L^r x L^s` exactly for `r > r_min`, `s > s_min`.
///
/// `r_min = n(gamma-1)/(n - beta*gamma)`; the second branch of `s_min` needs
/// `p*a0 - (beta*gamma + sigma2) > 0`, otherwise the threshold is vacuous
/// (`+inf`) and [`CoreError::NonpositiveDenominator`] is returned carrying
/// `r_min`.
pub fn optimal_integrability_thresholds(params: &SystemParams) -> Result<(f64, f64), CoreError> {
    let n = f64::from(params.n());
    let g1 = params.gamma() - 1.0;
    let r_min = n * g1 / (n - params.beta_gamma());
    let denom = params.p() * fast_rate(params) - (params.beta_gamma() + params.sigma2());
    if denom <= 0.0 {
        return Err(CoreError::NonpositiveDenominator { r_min });
    }
    let s_min = r_min.max(n * g1 / denom);
    Ok((r_min, s_min))
}

/// Regime tags of the classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `pq <= (gamma-1)^2`: no positive solution.
    NonexistenceSubproduct,
    /// `pq > (gamma-1)^2` and `max{q0,p0} > a0`: no positive solution.
    NonexistenceRate,
    /// `max{q0,p0} = a0` with `gamma in (1,2]`: no positive solution.
    NonexistenceEndpoint,
    /// `pq > (gamma-1)^2` and `max{q0,p0} < a0`: solutions exist for suitable
    /// double bounded coefficients.
    Admissible,
    /// Equality case with `gamma > 2`, or a clause skipped under relaxed
    /// sigma conventions: not decided.
    EndpointUndecided,
}

impl Regime {
    pub fn is_nonexistence(&self) -> bool {
        matches!(
            self,
            Regime::NonexistenceSubproduct | Regime::NonexistenceRate | Regime::NonexistenceEndpoint
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::NonexistenceSubproduct => "nonexistence_subproduct",
            Regime::NonexistenceRate => "nonexistence_rate",
            Regime::NonexistenceEndpoint => "nonexistence_endpoint",
            Regime::Admissible => "admissible",
            Regime::EndpointUndecided => "endpoint_undecided",
        }
    }
}

/// Classification outcome with its witnesses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// The inequality that triggered the tag.
    pub criterion: &'static str,
    /// Witness `max{q0, p0}` (absent on the degenerate hyperbola).
    pub max_slow_rate: Option<f64>,
    pub q0: Option<f64>,
    pub p0: Option<f64>,
    /// Witness `a0`.
    pub a0: f64,
    /// `q0 + p0 - a0` when `pq > (gamma-1)^2`.
    pub criticality_gap: Option<f64>,
    /// Whether the sigma convention held for the classified parameters.
    pub convention: bool,
}

/// Classify a parameter set into its existence regime.
///
/// Decision tree (equalities detected within [`EQ_REL_TOL`]):
/// 1. `pq <= (gamma-1)^2` -> [`Regime::NonexistenceSubproduct`];
/// 2. `max{q0,p0} > a0` -> [`Regime::NonexistenceRate`];
/// 3. `max{q0,p0} = a0` -> [`Regime::NonexistenceEndpoint`] for
///    `gamma in (1,2]`, [`Regime::EndpointUndecided`] for `gamma > 2`;
/// 4. otherwise [`Regime::Admissible`].
///
/// For parameters built with [`SystemParams::new_relaxed`] whose sigmas break
/// the convention, clause 1 is only valid when `eta0 > 0` (the iteration
/// argument needs a positive drift); when `eta0 <= 0` the report is
/// [`Regime::EndpointUndecided`].
pub fn classify(params: &SystemParams) -> RegimeReport {
    let g1 = params.gamma() - 1.0;
    let a0 = fast_rate(params);
    let convention = params.convention_holds();
    let prod = params.p() * params.q();
    let crit = g1 * g1;

    let degenerate = approx_eq(prod, crit);
    let (q0, p0, max_slow, gap) = if degenerate {
        (None, None, None, None)
    } else {
        let (q0, p0) = slow_rates(params).expect("non-degenerate by construction");
        let gap = (prod > crit).then_some(q0 + p0 - a0);
        (Some(q0), Some(p0), Some(q0.max(p0)), gap)
    };

    let report = |regime, criterion| RegimeReport {
        regime,
        criterion,
        max_slow_rate: max_slow,
        q0,
        p0,
        a0,
        criticality_gap: gap,
        convention,
    };

    if degenerate || prod < crit {
        // the iteration drifts downward only when eta0 > 0; automatic under
        // the convention, must be checked explicitly outside it
        if convention || params.eta0() > 0.0 {
            return report(Regime::NonexistenceSubproduct, "pq <= (gamma-1)^2");
        }
        return report(
            Regime::EndpointUndecided,
            "pq <= (gamma-1)^2 but eta0 <= 0 outside the sigma convention: iteration clause unavailable",
        );
    }

    let m = max_slow.expect("non-degenerate");
    if approx_eq(m, a0) {
        if params.gamma() <= 2.0 || approx_eq(params.gamma(), 2.0) {
            return report(
                Regime::NonexistenceEndpoint,
                "max{q0, p0} = (n - beta*gamma)/(gamma-1) with gamma in (1,2]",
            );
        }
        return report(
            Regime::EndpointUndecided,
            "max{q0, p0} = (n - beta*gamma)/(gamma-1) with gamma > 2: endpoint not decided",
        );
    }
    if m > a0 {
        return report(Regime::NonexistenceRate, "max{q0, p0} > (n - beta*gamma)/(gamma-1)");
    }
    report(
        Regime::Admissible,
        "pq > (gamma-1)^2 and max{q0, p0} < (n - beta*gamma)/(gamma-1)",
    )
}
