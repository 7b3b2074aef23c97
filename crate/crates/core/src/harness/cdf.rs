use rayon::prelude::*;

use super::sweep::{evaluate, DirectionSetup, Method, SweepConfig};
use super::{HarnessError, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSample {
    pub theta_deg: f64,
    pub comm_dir_deg: f64,
    pub threshold: f64,
    pub method: Method,
    pub sinr_db: f64,
    pub feasible: bool,
    pub error: Option<String>,
}

/// Empirical CDF of one method, pooled (`comm_dir_deg`/`threshold` unset)
/// or for one combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub method: Method,
    pub comm_dir_deg: Option<f64>,
    pub threshold: Option<f64>,
    /// `(sinr_db, F)` with `F = i/n`, ascending.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfResult {
    pub scenario: String,
    /// Ordered by combination, then direction, then method.
    pub samples: Vec<CdfSample>,
    pub pooled: Vec<CdfCurve>,
    pub per_combination: Vec<CdfCurve>,
}

impl CdfResult {
    pub fn pooled_for(&self, method: Method) -> Option<&CdfCurve> {
        self.pooled.iter().find(|c| c.method == method)
    }
}

/// Step CDF of the finite values: the `i`-th smallest value maps to `i/n`.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Sensing sweep of `s.cdf.sensing` crossed with every communication
/// direction and threshold; one pooled curve per method plus one per
/// combination.
pub fn run_cdf(
    s: &Scenario,
    comm_dirs_deg: &[f64],
    c_values: &[f64],
    cfg: &SweepConfig,
) -> Result<CdfResult, HarnessError> {
    if comm_dirs_deg.is_empty() || c_values.is_empty() {
        return Err(HarnessError::Validation(vec![
            "cdf needs at least one communication direction and one threshold".to_string(),
        ]));
    }
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let angles = s.cdf.sensing.angles();

    let mut combos = Vec::new();
    for &cd in comm_dirs_deg {
        for &c in c_values {
            let variant = s.with_comm(cd, c);
            let setup = DirectionSetup::new(&variant)?;
            combos.push((variant, setup));
        }
    }
    let mut jobs: Vec<(usize, f64, Method)> = Vec::new();
    for k in 0..combos.len() {
        for &t in &angles {
            jobs.extend(methods.iter().map(|&m| (k, t, m)));
        }
    }
    let samples: Vec<CdfSample> = jobs
        .into_par_iter()
        .map(|(k, theta_deg, method)| {
            let (variant, setup) = &combos[k];
            let e = evaluate(variant, setup, theta_deg, method, cfg);
            CdfSample {
                theta_deg,
                comm_dir_deg: variant.comm_direction_deg,
                threshold: variant.comm_threshold,
                method,
                sinr_db: e.sinr_db,
                feasible: e.feasible,
                error: e.error,
            }
        })
        .collect();

    let curve = |method: Method, combo: Option<(f64, f64)>| {
        let values: Vec<f64> = samples
            .iter()
            .filter(|x| x.method == method && combo.map_or(true, |(cd, c)| x.comm_dir_deg == cd && x.threshold == c))
            .map(|x| x.sinr_db)
            .collect();
        CdfCurve {
            method,
            comm_dir_deg: combo.map(|c| c.0),
            threshold: combo.map(|c| c.1),
            points: empirical_cdf(&values),
        }
    };
    let pooled = methods.iter().map(|&m| curve(m, None)).collect();
    let per_combination = combos
        .iter()
        .flat_map(|(v, _)| {
            let key = (v.comm_direction_deg, v.comm_threshold);
            methods.iter().map(move |&m| (m, key))
        })
        .map(|(m, key)| curve(m, Some(key)))
        .collect();
    Ok(CdfResult {
        scenario: s.name.clone(),
        samples,
        pooled,
        per_combination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{preset, SweepSpec};

    #[test]
    fn single_sample_is_a_step() {
        assert_eq!(empirical_cdf(&[3.5]), vec![(3.5, 1.0)]);
        assert!(empirical_cdf(&[]).is_empty());
        assert_eq!(empirical_cdf(&[2.0, f64::NAN, 1.0]), vec![(1.0, 0.5), (2.0, 1.0)]);
    }

    #[test]
    fn small_grid_counts_and_dominance() {
        let mut s = preset("A").unwrap();
        s.cdf.sensing = SweepSpec::new(-30.0, 30.0, 15.0);
        let cfg = SweepConfig {
            methods: vec![Method::FpSs, Method::MvdrCmHq],
            ..SweepConfig::default()
        };
        let r = run_cdf(&s, &[30.0, 60.0], &[2.0, 3.0], &cfg).unwrap();
        assert_eq!(r.samples.len(), 5 * 2 * 2 * 2);
        assert_eq!(r.per_combination.len(), 4 * 2);
        let fp = &r.pooled_for(Method::FpSs).unwrap().points;
        let mv = &r.pooled_for(Method::MvdrCmHq).unwrap().points;
        assert_eq!(fp.len(), 20);
        for (a, b) in fp.iter().zip(mv) {
            assert!(a.0 >= b.0 - 1e-9);
            assert!(a.1 > 0.0 && a.1 <= 1.0);
        }
    }
}
