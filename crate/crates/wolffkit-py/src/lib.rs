//! Python bindings: the classifier, the closed-form exponents, Wolff
//! potential evaluation for power-pair densities, the exponent iteration,
//! rate fitting and construction verification.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use wolffkit::asymptotics;
use wolffkit::constructions::{self, PairMode};
use wolffkit::system::{self, SystemParams};
use wolffkit::wolff;
use wolffkit::QuadratureSpec;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn params(
    n: u32,
    beta: f64,
    gamma: f64,
    p: f64,
    q: f64,
    sigma1: f64,
    sigma2: f64,
    allow_nonconvention: bool,
) -> PyResult<SystemParams> {
    if allow_nonconvention {
        SystemParams::new_relaxed(n, beta, gamma, p, q, sigma1, sigma2).map_err(err)
    } else {
        SystemParams::new(n, beta, gamma, p, q, sigma1, sigma2).map_err(err)
    }
}

fn spec(rel_tol: f64) -> QuadratureSpec {
    QuadratureSpec { rel_tol, ..Default::default() }
}

/// Regime classification; returns a dict mirroring the CLI JSON report.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (n, beta, gamma, p, q, sigma1, sigma2, allow_nonconvention = false))]
fn classify<'py>(
    py: Python<'py>,
    n: u32,
    beta: f64,
    gamma: f64,
    p: f64,
    q: f64,
    sigma1: f64,
    sigma2: f64,
    allow_nonconvention: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let pr = params(n, beta, gamma, p, q, sigma1, sigma2, allow_nonconvention)?;
    let r = system::classify(&pr);
    let d = PyDict::new(py);
    d.set_item("regime", r.regime.as_str())?;
    d.set_item("criterion", r.criterion)?;
    d.set_item("q0", r.q0)?;
    d.set_item("p0", r.p0)?;
    d.set_item("a0", r.a0)?;
    d.set_item("max_slow_rate", r.max_slow_rate)?;
    d.set_item("criticality_gap", r.criticality_gap)?;
    d.set_item("convention", r.convention)?;
    Ok(d)
}

/// Slow decay rates (q0, p0).
#[pyfunction]
#[pyo3(signature = (n, beta, gamma, p, q, sigma1, sigma2))]
fn slow_rates(
    n: u32,
    beta: f64,
    gamma: f64,
    p: f64,
    q: f64,
    sigma1: f64,
    sigma2: f64,
) -> PyResult<(f64, f64)> {
    let pr = params(n, beta, gamma, p, q, sigma1, sigma2, false)?;
    system::slow_rates(&pr).map_err(err)
}

/// Fast decay rate a0 = (n - beta*gamma)/(gamma - 1).
#[pyfunction]
fn fast_rate(n: u32, beta: f64, gamma: f64) -> PyResult<f64> {
    let pr = params(n, beta, gamma, 1.0, 1.0, 0.0, 0.0, false)?;
    Ok(system::fast_rate(&pr))
}

/// Fast-rate trichotomy of the second component.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (n, beta, gamma, p, q, sigma1, sigma2))]
fn fast_v_rate<'py>(
    py: Python<'py>,
    n: u32,
    beta: f64,
    gamma: f64,
    p: f64,
    q: f64,
    sigma1: f64,
    sigma2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let pr = params(n, beta, gamma, p, q, sigma1, sigma2, false)?;
    let case = system::fast_v_rate(&pr);
    let d = PyDict::new(py);
    let name = match case {
        system::FastVRateCase::PlainFast { .. } => "plain_fast",
        system::FastVRateCase::LogCorrected { .. } => "log_corrected",
        system::FastVRateCase::Reduced { .. } => "reduced",
    };
    d.set_item("case", name)?;
    d.set_item("rate", case.rate())?;
    d.set_item("log_exponent", case.log_exponent())?;
    Ok(d)
}

/// Fraction of the sphere of radius r (centered at the origin) inside the
/// ball of radius t centered at distance rho.
#[pyfunction]
fn cap_fraction(n: u32, r: f64, rho: f64, t: f64) -> f64 {
    wolff::cap_fraction(n, r, rho, t)
}

/// Ball mass mu(B_t(x)) of the density r^sigma (1+r^2)^(-theta*power).
#[pyfunction]
#[pyo3(signature = (n, theta, sigma, power, rho, t, rel_tol = 1e-8))]
fn ball_mass(
    n: u32,
    theta: f64,
    sigma: f64,
    power: f64,
    rho: f64,
    t: f64,
    rel_tol: f64,
) -> PyResult<f64> {
    let f = wolff::power_pair_density(theta, sigma, power);
    wolff::ball_mass(&f, n, rho, t, &spec(rel_tol)).map_err(err)
}

/// Wolff potential W_{beta,gamma} of the density r^sigma (1+r^2)^(-theta*power)
/// at center radius rho.
#[pyfunction]
#[pyo3(signature = (n, beta, gamma, theta, sigma, power, rho, rel_tol = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn wolff_potential(
    n: u32,
    beta: f64,
    gamma: f64,
    theta: f64,
    sigma: f64,
    power: f64,
    rho: f64,
    rel_tol: f64,
) -> PyResult<f64> {
    let f = wolff::power_pair_density(theta, sigma, power);
    wolff::wolff_potential(&f, n, beta, gamma, rho, &spec(rel_tol)).map_err(err)
}

/// Exponent iteration trace; a_start defaults to the fast rate a0.
#[pyfunction]
#[pyo3(signature = (n, beta, gamma, p, q, sigma1, sigma2, a_start = None, max_iter = 200))]
#[allow(clippy::too_many_arguments)]
fn iterate_liouville<'py>(
    py: Python<'py>,
    n: u32,
    beta: f64,
    gamma: f64,
    p: f64,
    q: f64,
    sigma1: f64,
    sigma2: f64,
    a_start: Option<f64>,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let pr = params(n, beta, gamma, p, q, sigma1, sigma2, false)?;
    let start = a_start.unwrap_or_else(|| system::fast_rate(&pr));
    let tr = asymptotics::iterate_liouville(&pr, start, max_iter);
    let d = PyDict::new(py);
    d.set_item("a", tr.a)?;
    d.set_item("b", tr.b)?;
    d.set_item("closed_form_check", tr.closed_form_check)?;
    let v = PyDict::new(py);
    match tr.verdict {
        asymptotics::IterationVerdict::DivergesNegative { index } => {
            v.set_item("kind", "diverges_negative")?;
            v.set_item("index", index)?;
        }
        asymptotics::IterationVerdict::ConvergesTo { limit } => {
            v.set_item("kind", "converges_to")?;
            v.set_item("limit", limit)?;
        }
        asymptotics::IterationVerdict::Stalls { iterations } => {
            v.set_item("kind", "stalls")?;
            v.set_item("iterations", iterations)?;
        }
    }
    d.set_item("verdict", v)?;
    Ok(d)
}

/// Least-squares fit of value ~ C r^(-theta) (ln r)^kappa over a tail window.
#[pyfunction]
#[pyo3(signature = (radii, values, allow_log = true))]
fn fit_rate<'py>(
    py: Python<'py>,
    radii: Vec<f64>,
    values: Vec<f64>,
    allow_log: bool,
) -> PyResult<Bound<'py, PyDict>> {
    if radii.len() != values.len() {
        return Err(PyValueError::new_err("radii and values must have equal length"));
    }
    let samples: Vec<(f64, f64)> = radii.into_iter().zip(values).collect();
    let fit = asymptotics::fit_rate(&samples, allow_log).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("theta", fit.theta)?;
    d.set_item("kappa", fit.kappa)?;
    d.set_item("log_amplitude", fit.log_amplitude)?;
    d.set_item("residual", fit.residual)?;
    d.set_item("window", fit.window)?;
    d.set_item("condition", fit.condition)?;
    Ok(d)
}

/// Build the explicit pair and certify boundedness plus decay rates;
/// mode is "slow" or "fast". Returns a dict mirroring the CLI verify report.
#[pyfunction]
#[pyo3(signature = (n, beta, gamma, p, q, sigma1, sigma2, mode, rel_tol = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn verify_construction<'py>(
    py: Python<'py>,
    n: u32,
    beta: f64,
    gamma: f64,
    p: f64,
    q: f64,
    sigma1: f64,
    sigma2: f64,
    mode: &str,
    rel_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let pr = params(n, beta, gamma, p, q, sigma1, sigma2, false)?;
    let mode = match mode {
        "slow" => PairMode::Slow,
        "fast" => PairMode::Fast,
        other => return Err(PyValueError::new_err(format!("mode must be slow|fast, got {other}"))),
    };
    let sp = spec(rel_tol);
    let pair = constructions::build_pair(&pr, mode).map_err(err)?;
    let bounded =
        constructions::coefficient_ratios(&pair, &constructions::default_ratio_radii(), &sp)
            .map_err(err)?;
    let decay = constructions::verify_decay_class(&pair, &sp).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("theta1", pair.theta1)?;
    d.set_item("theta2", pair.theta2)?;
    d.set_item("spread_c1", bounded.spread_c1)?;
    d.set_item("spread_c2", bounded.spread_c2)?;
    d.set_item("outer_spread_c1", bounded.outer_spread_c1)?;
    d.set_item("outer_spread_c2", bounded.outer_spread_c2)?;
    d.set_item(
        "verdict",
        match bounded.verdict {
            constructions::BoundednessVerdict::DoubleBounded { .. } => "double_bounded",
            constructions::BoundednessVerdict::SpreadExceeded => "spread_exceeded",
        },
    )?;
    d.set_item("theta_u", decay.u_fit.theta)?;
    d.set_item("theta_v", decay.v_fit.theta)?;
    d.set_item("kappa_v", decay.v_fit.kappa)?;
    d.set_item("expected_theta_u", decay.expected_theta_u)?;
    d.set_item("expected_theta_v", decay.expected_theta_v)?;
    d.set_item("expected_kappa_v", decay.expected_kappa_v)?;
    Ok(d)
}

/// Lambda-limit diagnostic values [(r, lhs)] converging to
/// (gamma-1)/(n-beta*gamma) * lambda^(-a0).
#[pyfunction]
#[pyo3(signature = (n, beta, gamma, lam, radii, rel_tol = 1e-10))]
fn lambda_limit_check(
    n: u32,
    beta: f64,
    gamma: f64,
    lam: f64,
    radii: Vec<f64>,
    rel_tol: f64,
) -> PyResult<Vec<(f64, f64)>> {
    asymptotics::lambda_limit_check(n, beta, gamma, lam, &radii, &spec(rel_tol)).map_err(err)
}

#[pymodule]
fn wolffkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(slow_rates, m)?)?;
    m.add_function(wrap_pyfunction!(fast_rate, m)?)?;
    m.add_function(wrap_pyfunction!(fast_v_rate, m)?)?;
    m.add_function(wrap_pyfunction!(cap_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(ball_mass, m)?)?;
    m.add_function(wrap_pyfunction!(wolff_potential, m)?)?;
    m.add_function(wrap_pyfunction!(iterate_liouville, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_construction, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_limit_check, m)?)?;
    Ok(())
}
