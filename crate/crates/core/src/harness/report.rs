use std::fmt::{self, Write as _};

use super::sweep::{evaluate, run_sweep, DirectionSetup, Method, SweepConfig, SweepResult};
use super::{HarnessError, Scenario};
use crate::optimize::{codebook_size, es_candidate_flops, joint_es_flops};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsMode {
    /// Counted during an actual exhaustive run.
    Measured,
    /// Per-candidate cost times codebook size; the search was not run.
    Extrapolated,
}

impl fmt::Display for EsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EsMode::Measured => "measured",
            EsMode::Extrapolated => "extrapolated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopRow {
    pub method: Method,
    /// Directions that contributed to the mean.
    pub directions: usize,
    pub mean_flops: f64,
    pub es_flops: f64,
    pub es_mode: EsMode,
    pub ratio: f64,
    /// Published normalized count for the matching preset, if any.
    pub reference_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub scenario: String,
    pub rows: Vec<FlopRow>,
}

impl FlopReport {
    pub fn row(&self, method: Method) -> Option<&FlopRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,directions,mean_flops,es_flops,es_mode,ratio,reference_ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.method,
                r.directions,
                r.mean_flops,
                r.es_flops,
                r.es_mode,
                r.ratio,
                r.reference_ratio.map(|x| x.to_string()).unwrap_or_default()
            );
        }
        s
    }
}

impl fmt::Display for FlopReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.scenario)?;
        writeln!(
            f,
            "{:<8} {:>12} {:>12} {:>13} {:>11} {:>10}",
            "method", "flops", "es flops", "es mode", "ratio", "reference"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<8} {:>12.4e} {:>12.4e} {:>13} {:>11.4e} {:>10}",
                r.method.name(),
                r.mean_flops,
                r.es_flops,
                r.es_mode.to_string(),
                r.ratio,
                r.reference_ratio.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into())
            )?;
        }
        Ok(())
    }
}

fn reference(scenario: &str, method: Method) -> Option<f64> {
    match (scenario, method) {
        ("A", Method::Joint) => Some(1.77e-8),
        ("A", Method::FpSs) => Some(0.11),
        ("A", Method::FpCss) => Some(0.034),
        ("B", Method::Joint) => Some(1.2e-8),
        ("B", Method::FpSs) => Some(0.12),
        ("B", Method::FpCss) => Some(0.036),
        _ => None,
    }
}

/// Runs FP-SS, FP-CSS and the joint optimizer over the scenario sweep and
/// normalizes their mean FLOPs by the matching exhaustive search.
pub fn flop_report(s: &Scenario, cfg: &SweepConfig) -> Result<FlopReport, HarnessError> {
    let cfg = SweepConfig {
        methods: vec![Method::FpSs, Method::FpCss, Method::Joint],
        ..cfg.clone()
    };
    let sweep = run_sweep(s, &cfg)?;
    flop_report_from(s, &sweep, &cfg)
}

/// Same as [`flop_report`], reusing an existing sweep. Methods missing
/// from the sweep are left out.
pub fn flop_report_from(s: &Scenario, sweep: &SweepResult, cfg: &SweepConfig) -> Result<FlopReport, HarnessError> {
    let (n, m) = (s.geometry.n_rx(), s.geometry.n_tx());
    let setup = DirectionSetup::new(s)?;
    let probe = s.sweep.angles().first().copied().unwrap_or(0.0);
    let es = |method: Method, len: usize, constrained: bool| -> (f64, EsMode) {
        let candidates = codebook_size(len, setup.grid);
        if candidates <= cfg.es_cap {
            let e = evaluate(s, &setup, probe, method, cfg);
            if e.error.is_none() {
                return (e.flops.total(), EsMode::Measured);
            }
        }
        (
            es_candidate_flops(len, constrained).total() * candidates as f64,
            EsMode::Extrapolated,
        )
    };

    let mut rows = Vec::new();
    for method in [Method::FpSs, Method::FpCss, Method::Joint] {
        let flops: Vec<f64> = sweep
            .by_method(method)
            .filter(|r| r.eval.error.is_none())
            .map(|r| r.eval.flops.total())
            .collect();
        if flops.is_empty() {
            continue;
        }
        let mean = flops.iter().sum::<f64>() / flops.len() as f64;
        let (es_flops, es_mode) = match method {
            Method::FpSs => es(Method::EsRx, n, false),
            Method::FpCss => es(Method::EsTx, m, true),
            _ => (joint_es_flops(n, m, setup.grid), EsMode::Extrapolated),
        };
        rows.push(FlopRow {
            method,
            directions: flops.len(),
            mean_flops: mean,
            es_flops,
            es_mode,
            ratio: mean / es_flops,
            reference_ratio: reference(&s.name, method),
        });
    }
    Ok(FlopReport {
        scenario: s.name.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{preset, run_directions, SweepSpec};

    #[test]
    fn small_report_ratios_below_one() {
        let mut s = preset("A").unwrap();
        s.bits = 3;
        s.sweep = SweepSpec::new(-30.0, 30.0, 30.0);
        let cfg = SweepConfig::default();
        let r = flop_report(&s, &cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        let ss = r.row(Method::FpSs).unwrap();
        assert_eq!(ss.es_mode, EsMode::Measured);
        assert_eq!(ss.directions, 3);
        assert_eq!(ss.reference_ratio, Some(0.11));
        let joint = r.row(Method::Joint).unwrap();
        assert_eq!(joint.es_mode, EsMode::Extrapolated);
        assert!(joint.ratio < ss.ratio);
        assert_eq!(r.to_csv().lines().count(), 4);
    }

    #[test]
    fn measured_es_matches_formula() {
        let mut s = preset("A").unwrap();
        s.bits = 2;
        let cfg = SweepConfig::default();
        let setup = DirectionSetup::new(&s).unwrap();
        let e = evaluate(&s, &setup, 10.0, Method::EsTx, &cfg);
        let formula = es_candidate_flops(4, true).total() * codebook_size(4, setup.grid) as f64;
        assert_eq!(e.flops.total(), formula);
        let sweep = run_directions(&s, &[0.0], &SweepConfig { methods: vec![Method::FpSs], ..cfg.clone() }).unwrap();
        let r = flop_report_from(&s, &sweep, &cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
    }
}
