//! Machine-readable report payloads. Field order is fixed by declaration so
//! identical inputs serialize to identical bytes; every payload carries a
//! `kind` discriminator matched by `schemas/report.schema.json`.

use serde::Serialize;
use wolffkit::asymptotics::IterationVerdict;
use wolffkit::SystemParams;

#[derive(Serialize)]
pub struct ParamsEcho {
    pub n: u32,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl From<&SystemParams> for ParamsEcho {
    fn from(p: &SystemParams) -> Self {
        ParamsEcho {
            n: p.n(),
            beta: p.beta(),
            gamma: p.gamma(),
            p: p.p(),
            q: p.q(),
            sigma1: p.sigma1(),
            sigma2: p.sigma2(),
        }
    }
}

#[derive(Serialize)]
pub struct ClassifyReport {
    pub kind: &'static str,
    pub params: ParamsEcho,
    pub regime: String,
    pub criterion: String,
    pub q0: Option<f64>,
    pub p0: Option<f64>,
    pub a0: f64,
    pub max_slow_rate: Option<f64>,
    pub criticality_gap: Option<f64>,
    pub convention: bool,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub kind: &'static str,
    pub params: ParamsEcho,
    pub mode: String,
    pub theta1: f64,
    pub theta2: f64,
    pub spread_c1: f64,
    pub spread_c2: f64,
    pub outer_spread_c1: f64,
    pub outer_spread_c2: f64,
    pub theta_u: f64,
    pub theta_v: f64,
    pub kappa_u: f64,
    pub kappa_v: f64,
    pub expected_theta_u: f64,
    pub expected_theta_v: f64,
    pub expected_kappa_v: f64,
    pub verdict: String,
    pub rates_within_tolerance: bool,
}

#[derive(Serialize)]
pub struct IterateReport {
    pub kind: &'static str,
    pub params: ParamsEcho,
    pub a_start: f64,
    pub max_iter: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub verdict: IterationVerdict,
    pub closed_form_check: f64,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}
