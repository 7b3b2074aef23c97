use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Scenario};
use crate::channel::{linear_to_db, si_channel, steering, worst_case_path_gain};
use crate::flops::FlopCounter;
use crate::numerics::ComplexMatrix;
use crate::optimize::{
    effective_mvdr_bound, effective_mvdr_flops, exhaustive, fp_css, fp_ss, joint, mvdr_cm_hq_with, FpConfig,
    JointConfig, OptimizeError, SensingContext, StartOrder, ES_CAP,
};
use crate::phase_grid::{Codeword, PhaseGrid};
use crate::problem::{build_comm_constraint, build_rx, build_tx, inner, CommConstraint, FEASIBILITY_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "fp-ss")]
    FpSs,
    #[serde(rename = "fp-css")]
    FpCss,
    #[serde(rename = "joint")]
    Joint,
    #[serde(rename = "mvdr-cm-hq")]
    MvdrCmHq,
    #[serde(rename = "eff-mvdr")]
    EffMvdr,
    #[serde(rename = "es-rx")]
    EsRx,
    #[serde(rename = "es-tx")]
    EsTx,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::FpSs,
        Method::FpCss,
        Method::Joint,
        Method::MvdrCmHq,
        Method::EffMvdr,
        Method::EsRx,
        Method::EsTx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::FpSs => "fp-ss",
            Method::FpCss => "fp-css",
            Method::Joint => "joint",
            Method::MvdrCmHq => "mvdr-cm-hq",
            Method::EffMvdr => "eff-mvdr",
            Method::EsRx => "es-rx",
            Method::EsTx => "es-tx",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::UnknownMethod(s.to_string()))
    }
}

/// Comma-separated method names, or `all`. Duplicates are dropped.
pub fn parse_methods(list: &str) -> Result<Vec<Method>, HarnessError> {
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            out.extend(Method::ALL);
        } else {
            out.push(part.parse()?);
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(HarnessError::Validation(vec!["no methods selected".to_string()]));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub fp: FpConfig,
    pub joint: JointConfig,
    pub es_cap: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            fp: FpConfig::default(),
            joint: JointConfig {
                order: StartOrder::Best,
                ..JointConfig::default()
            },
            es_cap: ES_CAP,
        }
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta_deg: f64,
    pub method: Method,
    pub sinr_db: f64,
    pub iterations: usize,
    pub flops: f64,
    pub feasible: bool,
}

/// Full result of one method at one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub sinr_db: f64,
    pub sinr_linear: f64,
    /// Dinkelbach iterations for FP methods, outer rounds for `joint`, 0
    /// otherwise.
    pub iterations: usize,
    pub flops: FlopCounter,
    /// The TX codeword used meets the communication requirement.
    pub feasible: bool,
    pub rx: Option<Codeword>,
    pub tx: Option<Codeword>,
    /// Rayleigh quotient of the optimized side, for single-sided methods.
    pub quotient: Option<f64>,
    pub per_round_sinr: Vec<f64>,
    pub per_round_feasible: Vec<bool>,
    pub error: Option<String>,
}

impl Evaluation {
    fn failed(e: &OptimizeError) -> Self {
        Self {
            sinr_db: f64::NAN,
            sinr_linear: f64::NAN,
            iterations: 0,
            flops: FlopCounter::default(),
            feasible: false,
            rx: None,
            tx: None,
            quotient: None,
            per_round_sinr: Vec::new(),
            per_round_feasible: Vec::new(),
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub theta_deg: f64,
    pub method: Method,
    pub eval: Evaluation,
}

impl Record {
    pub fn row(&self) -> SweepRow {
        SweepRow {
            theta_deg: self.theta_deg,
            method: self.method,
            sinr_db: self.eval.sinr_db,
            iterations: self.eval.iterations,
            flops: self.eval.flops.total(),
            feasible: self.eval.feasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario: String,
    /// Sorted by `(theta_deg, method)`.
    pub records: Vec<Record>,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.records.iter().map(Record::row).collect()
    }

    pub fn get(&self, theta_deg: f64, method: Method) -> Option<&Record> {
        self.records
            .iter()
            .find(|r| r.method == method && r.theta_deg == theta_deg)
    }

    pub fn by_method(&self, method: Method) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.method == method)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.eval.error.is_some())
    }
}

/// Scenario-wide quantities shared by every direction.
#[derive(Debug, Clone)]
pub struct DirectionSetup {
    pub h_si: ComplexMatrix,
    pub grid: PhaseGrid,
    pub alpha: f64,
    pub cc: CommConstraint,
    pub theta_c: f64,
    pub comm_threshold: f64,
    /// Quantized steering codeword towards the communication direction.
    pub v0: Codeword,
}

impl DirectionSetup {
    pub fn new(s: &Scenario) -> Result<Self, HarnessError> {
        let h_si = si_channel(&s.geometry, &s.radio).map_err(|e| HarnessError::Validation(vec![e.to_string()]))?;
        let grid = PhaseGrid::new(s.bits).map_err(|e| HarnessError::Validation(vec![e.to_string()]))?;
        let m = s.geometry.n_tx();
        let theta_c = s.comm_direction_deg.to_radians();
        let cc = build_comm_constraint(theta_c, s.comm_threshold, m).map_err(OptimizeError::from)?;
        Ok(Self {
            alpha: worst_case_path_gain(&s.target, &s.radio),
            v0: Codeword::quantize(&steering(theta_c, m), grid),
            h_si,
            grid,
            cc,
            theta_c,
            comm_threshold: s.comm_threshold,
        })
    }

    /// `|vᴴa_t(θ_c)|² ≥ c² − slack`, evaluated directly from the steering
    /// vector rather than through the shifted form.
    pub fn meets_requirement(&self, v: &Codeword) -> bool {
        let a = steering(self.theta_c, v.len());
        inner(&v.to_complex(), &a).norm_sqr() >= self.comm_threshold * self.comm_threshold - FEASIBILITY_SLACK
    }
}

/// Runs one method at one sensing direction.
pub fn evaluate(s: &Scenario, setup: &DirectionSetup, theta_deg: f64, method: Method, cfg: &SweepConfig) -> Evaluation {
    match evaluate_inner(s, setup, theta_deg, method, cfg) {
        Ok(e) => e,
        Err(e) => {
            log::warn!("{} at {theta_deg} deg: {e}", method);
            Evaluation::failed(&e)
        }
    }
}

fn evaluate_inner(
    s: &Scenario,
    setup: &DirectionSetup,
    theta_deg: f64,
    method: Method,
    cfg: &SweepConfig,
) -> Result<Evaluation, OptimizeError> {
    let theta = theta_deg.to_radians();
    let (n, m) = (s.geometry.n_rx(), s.geometry.n_tx());
    let ctx = SensingContext {
        h_si: &setup.h_si,
        radio: &s.radio,
        grid: setup.grid,
        theta,
        alpha: setup.alpha,
    };
    let w0 = ctx.steering_codeword(theta, n);
    let v0 = &setup.v0;
    let pair = |w: Codeword, v: Codeword, quotient: Option<f64>, iterations: usize, flops: FlopCounter| {
        let lin = ctx.sinr_linear(&w, &v);
        Evaluation {
            sinr_db: linear_to_db(lin),
            sinr_linear: lin,
            iterations,
            flops,
            feasible: setup.meets_requirement(&v),
            rx: Some(w),
            tx: Some(v),
            quotient,
            per_round_sinr: Vec::new(),
            per_round_feasible: Vec::new(),
            error: None,
        }
    };
    let not_converged = |converged: bool, its: usize| {
        (!converged).then(|| OptimizeError::MaxIterations { iterations: its }.to_string())
    };

    Ok(match method {
        Method::FpSs => {
            let p = build_rx(theta, v0, &setup.h_si, &s.radio, setup.grid)?;
            let out = fp_ss(&p, &w0, &cfg.fp)?;
            let err = not_converged(out.trace.converged, out.trace.iterations);
            let mut e = pair(out.codeword, v0.clone(), Some(out.quotient), out.trace.iterations, out.trace.flops);
            e.error = err;
            e
        }
        Method::FpCss => {
            let p = build_tx(theta, &w0, &setup.h_si, &s.radio, setup.grid)?;
            let out = fp_css(&p, &setup.cc, v0, &cfg.fp)?;
            let err = not_converged(out.trace.converged, out.trace.iterations);
            let mut e = pair(w0, out.codeword, Some(out.quotient), out.trace.iterations, out.trace.flops);
            e.error = err;
            e
        }
        Method::Joint => {
            let r = joint(&ctx, &setup.cc, &w0, v0, &cfg.joint)?;
            let mut e = pair(r.rx, r.tx, None, r.outer_rounds, r.flops);
            e.per_round_sinr = r.per_round_sinr;
            e.per_round_feasible = r.per_round_feasible;
            e
        }
        Method::MvdrCmHq => {
            let p = build_rx(theta, v0, &setup.h_si, &s.radio, setup.grid)?;
            let mut flops = FlopCounter::default();
            let w = mvdr_cm_hq_with(&p, &mut flops)?;
            let q = crate::problem::Subproblem::quotient(&p, &w);
            pair(w, v0.clone(), Some(q), 0, flops)
        }
        Method::EffMvdr => {
            let lin = setup.alpha * setup.alpha * effective_mvdr_bound(theta, &setup.h_si, &s.radio);
            Evaluation {
                sinr_db: linear_to_db(lin),
                sinr_linear: lin,
                iterations: 0,
                flops: effective_mvdr_flops(n, m),
                feasible: false,
                rx: None,
                tx: None,
                quotient: None,
                per_round_sinr: Vec::new(),
                per_round_feasible: Vec::new(),
                error: None,
            }
        }
        Method::EsRx => {
            let p = build_rx(theta, v0, &setup.h_si, &s.radio, setup.grid)?;
            let out = exhaustive(&p, None, cfg.es_cap)?;
            pair(out.codeword, v0.clone(), Some(out.quotient), 0, out.flops)
        }
        Method::EsTx => {
            let p = build_tx(theta, &w0, &setup.h_si, &s.radio, setup.grid)?;
            let out = exhaustive(&p, Some(&setup.cc), cfg.es_cap)?;
            pair(w0, out.codeword, Some(out.quotient), 0, out.flops)
        }
    })
}

/// Every selected method at every listed direction, sorted by
/// `(theta, method)`. Solver failures become rows with `NaN` SINR.
pub fn run_directions(s: &Scenario, angles_deg: &[f64], cfg: &SweepConfig) -> Result<SweepResult, HarnessError> {
    let setup = DirectionSetup::new(s)?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let jobs: Vec<(f64, Method)> = angles_deg
        .iter()
        .flat_map(|&t| methods.iter().map(move |&m| (t, m)))
        .collect();
    let mut records: Vec<Record> = jobs
        .into_par_iter()
        .map(|(theta_deg, method)| Record {
            theta_deg,
            method,
            eval: evaluate(s, &setup, theta_deg, method, cfg),
        })
        .collect();
    records.sort_by(|a, b| a.theta_deg.total_cmp(&b.theta_deg).then(a.method.cmp(&b.method)));
    Ok(SweepResult {
        scenario: s.name.clone(),
        records,
    })
}

/// [`run_directions`] over the scenario's own sweep.
pub fn run_sweep(s: &Scenario, cfg: &SweepConfig) -> Result<SweepResult, HarnessError> {
    run_directions(s, &s.sweep.angles(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::preset;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("nope".parse::<Method>(), Err(HarnessError::UnknownMethod(_))));
        assert_eq!(parse_methods("joint, fp-ss,joint").unwrap(), vec![Method::FpSs, Method::Joint]);
        assert_eq!(parse_methods("all").unwrap().len(), 7);
    }

    #[test]
    fn small_sweep_shape_and_order() {
        let s = preset("A").unwrap();
        let cfg = SweepConfig {
            methods: vec![Method::MvdrCmHq, Method::FpSs, Method::EffMvdr],
            ..SweepConfig::default()
        };
        let r = run_directions(&s, &[10.0, -20.0], &cfg).unwrap();
        let keys: Vec<(f64, Method)> = r.records.iter().map(|r| (r.theta_deg, r.method)).collect();
        assert_eq!(
            keys,
            vec![
                (-20.0, Method::FpSs),
                (-20.0, Method::MvdrCmHq),
                (-20.0, Method::EffMvdr),
                (10.0, Method::FpSs),
                (10.0, Method::MvdrCmHq),
                (10.0, Method::EffMvdr),
            ]
        );
        for t in [-20.0, 10.0] {
            let fp = r.get(t, Method::FpSs).unwrap().eval.sinr_linear;
            let mv = r.get(t, Method::MvdrCmHq).unwrap().eval.sinr_linear;
            let ub = r.get(t, Method::EffMvdr).unwrap().eval.sinr_linear;
            assert!(mv <= fp * (1.0 + 1e-9) && fp <= ub * (1.0 + 1e-9));
        }
    }

    #[test]
    fn oversized_es_recorded_not_fatal() {
        let s = preset("B").unwrap();
        let cfg = SweepConfig {
            methods: vec![Method::EsRx, Method::MvdrCmHq],
            ..SweepConfig::default()
        };
        let r = run_directions(&s, &[0.0], &cfg).unwrap();
        let es = r.get(0.0, Method::EsRx).unwrap();
        assert!(es.eval.sinr_db.is_nan() && !es.eval.feasible);
        assert!(es.eval.error.as_deref().unwrap().contains("exceeds the cap"));
        assert!(r.get(0.0, Method::MvdrCmHq).unwrap().eval.error.is_none());
    }
}
