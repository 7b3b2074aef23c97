use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::channel::{DeviceGeometry, Point2, RadioConfig, WorstCaseTarget};

/// Inclusive angle range in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl SweepSpec {
    pub const fn new(start_deg: f64, stop_deg: f64, step_deg: f64) -> Self {
        Self {
            start_deg,
            stop_deg,
            step_deg,
        }
    }

    /// `start, start + step, …` up to `stop` (inclusive within 1e-9 step).
    pub fn angles(&self) -> Vec<f64> {
        if !(self.step_deg > 0.0) || self.stop_deg < self.start_deg {
            return Vec::new();
        }
        let n = ((self.stop_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start_deg + k as f64 * self.step_deg).collect()
    }

    fn check(&self, what: &str, errs: &mut Vec<String>) {
        if !(self.step_deg > 0.0) {
            errs.push(format!("{what}.step_deg must be > 0, got {}", self.step_deg));
        }
        if self.stop_deg < self.start_deg {
            errs.push(format!("{what}.stop_deg ({}) is below start_deg ({})", self.stop_deg, self.start_deg));
        }
        check_angle(&format!("{what}.start_deg"), self.start_deg, errs);
        check_angle(&format!("{what}.stop_deg"), self.stop_deg, errs);
    }
}

/// Grid used by `cdf`: sensing sweep crossed with communication directions
/// and thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSpec {
    pub sensing: SweepSpec,
    pub comm_directions_deg: Vec<f64>,
    pub thresholds: Vec<f64>,
}

/// One array, either a ULA description or explicit element positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArraySpec {
    Ula {
        center: [f64; 2],
        direction: [f64; 2],
        elements: usize,
        /// Defaults to half a wavelength.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spacing_m: Option<f64>,
    },
    Positions(Vec<[f64; 2]>),
}

impl ArraySpec {
    fn resolve(&self, wavelength: f64) -> Vec<Point2> {
        match self {
            ArraySpec::Ula {
                center,
                direction,
                elements,
                spacing_m,
            } => DeviceGeometry::ula(
                Point2::new(center[0], center[1]),
                (direction[0], direction[1]),
                *elements,
                spacing_m.unwrap_or(wavelength / 2.0),
            ),
            ArraySpec::Positions(p) => p.iter().map(|q| Point2::new(q[0], q[1])).collect(),
        }
    }

    fn check(&self, what: &str, errs: &mut Vec<String>) {
        match self {
            ArraySpec::Ula {
                direction,
                elements,
                spacing_m,
                ..
            } => {
                if *elements == 0 {
                    errs.push(format!("geometry.{what}.elements must be at least 1"));
                }
                if !(direction[0].hypot(direction[1]) > 0.0) {
                    errs.push(format!("geometry.{what}.direction must be a nonzero vector"));
                }
                if let Some(s) = spacing_m {
                    if !(*s > 0.0) {
                        errs.push(format!("geometry.{what}.spacing_m must be > 0, got {s}"));
                    }
                }
            }
            ArraySpec::Positions(p) => {
                if p.is_empty() {
                    errs.push(format!("geometry.{what} has no elements"));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GeometrySpec {
    tx: ArraySpec,
    rx: ArraySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioFile {
    name: String,
    geometry: GeometrySpec,
    radio: RadioConfig,
    bits: u32,
    target: WorstCaseTarget,
    comm_direction_deg: f64,
    comm_threshold: f64,
    sweep: SweepSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cdf: Option<CdfSpec>,
}

const REQUIRED: [&str; 8] = [
    "name",
    "geometry",
    "radio",
    "bits",
    "target",
    "comm_direction_deg",
    "comm_threshold",
    "sweep",
];

/// A validated evaluation setup. Angles are in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub geometry: DeviceGeometry,
    pub radio: RadioConfig,
    pub bits: u32,
    pub target: WorstCaseTarget,
    pub comm_direction_deg: f64,
    pub comm_threshold: f64,
    pub sweep: SweepSpec,
    pub cdf: CdfSpec,
    tx_spec: ArraySpec,
    rx_spec: ArraySpec,
}

impl Scenario {
    /// Same scenario with another communication direction and threshold.
    pub fn with_comm(&self, comm_direction_deg: f64, comm_threshold: f64) -> Self {
        Self {
            comm_direction_deg,
            comm_threshold,
            ..self.clone()
        }
    }

    /// JSON text that [`parse_scenario`] maps back to `self`.
    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            name: self.name.clone(),
            geometry: GeometrySpec {
                tx: self.tx_spec.clone(),
                rx: self.rx_spec.clone(),
            },
            radio: self.radio.clone(),
            bits: self.bits,
            target: self.target,
            comm_direction_deg: self.comm_direction_deg,
            comm_threshold: self.comm_threshold,
            sweep: self.sweep,
            cdf: Some(self.cdf.clone()),
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes") + "\n"
    }

    fn from_file(f: ScenarioFile) -> Result<Self, HarnessError> {
        let mut errs = Vec::new();
        if f.name.trim().is_empty() {
            errs.push("name must not be empty".to_string());
        }
        if !(1..=16).contains(&f.bits) {
            errs.push(format!("bits must lie in [1, 16], got {}", f.bits));
        }
        if let Err(e) = f.radio.validate() {
            errs.push(format!("radio: {e}"));
        }
        if !(f.target.distance_m > 0.0) {
            errs.push(format!("target.distance_m must be > 0, got {}", f.target.distance_m));
        }
        if !f.target.rcs_dbsm.is_finite() {
            errs.push("target.rcs_dbsm must be finite".to_string());
        }
        check_angle("comm_direction_deg", f.comm_direction_deg, &mut errs);
        f.sweep.check("sweep", &mut errs);
        f.geometry.tx.check("tx", &mut errs);
        f.geometry.rx.check("rx", &mut errs);

        let cdf = f.cdf.unwrap_or_else(|| CdfSpec {
            sensing: SweepSpec::new(-85.0, 85.0, 3.0),
            comm_directions_deg: (3..=9).map(|k| 10.0 * k as f64).collect(),
            thresholds: vec![f.comm_threshold],
        });
        cdf.sensing.check("cdf.sensing", &mut errs);
        if cdf.comm_directions_deg.is_empty() {
            errs.push("cdf.comm_directions_deg must not be empty".to_string());
        }
        if cdf.thresholds.is_empty() {
            errs.push("cdf.thresholds must not be empty".to_string());
        }
        for (k, &a) in cdf.comm_directions_deg.iter().enumerate() {
            check_angle(&format!("cdf.comm_directions_deg[{k}]"), a, &mut errs);
        }

        // Geometry only resolves once the radio gives a wavelength.
        let mut geometry = None;
        if errs.is_empty() {
            let lambda = f.radio.wavelength();
            let g = DeviceGeometry {
                tx_positions: f.geometry.tx.resolve(lambda),
                rx_positions: f.geometry.rx.resolve(lambda),
            };
            match g.validate() {
                Ok(()) => geometry = Some(g),
                Err(e) => errs.push(format!("geometry: {e}")),
            }
        }
        if let Some(g) = &geometry {
            let m = g.n_tx() as f64;
            for (what, c) in std::iter::once(("comm_threshold".to_string(), f.comm_threshold)).chain(
                cdf.thresholds
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| (format!("cdf.thresholds[{k}]"), c)),
            ) {
                if !(c >= 0.0 && c * c <= m * m) {
                    errs.push(format!("{what} must satisfy 0 <= c and c^2 <= M^2 = {}, got {c}", m * m));
                }
            }
        }
        match geometry {
            Some(geometry) if errs.is_empty() => Ok(Scenario {
                name: f.name,
                geometry,
                radio: f.radio,
                bits: f.bits,
                target: f.target,
                comm_direction_deg: f.comm_direction_deg,
                comm_threshold: f.comm_threshold,
                sweep: f.sweep,
                cdf,
                tx_spec: f.geometry.tx,
                rx_spec: f.geometry.rx,
            }),
            _ => Err(HarnessError::Validation(errs)),
        }
    }
}

fn check_angle(what: &str, deg: f64, errs: &mut Vec<String>) {
    if !(deg.abs() <= 90.0) {
        errs.push(format!("{what} must lie in [-90, 90] degrees, got {deg}"));
    }
}

/// Parses scenario JSON. `source_name` labels diagnostics.
pub fn parse_scenario(text: &str, source_name: &str) -> Result<Scenario, HarnessError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| HarnessError::Parse {
        source_name: source_name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Some(obj) = value.as_object() else {
        return Err(HarnessError::Validation(vec!["scenario must be a JSON object".to_string()]));
    };
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|k| !obj.contains_key(**k))
        .map(|k| format!("missing required field `{k}`"))
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::Validation(missing));
    }
    let file: ScenarioFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        HarnessError::Validation(vec![format!("{path}: {}", e.into_inner())])
    })?;
    Scenario::from_file(file)
}

/// Loads `A`, `B`, or a JSON file path.
pub fn load_scenario(spec: &str) -> Result<Scenario, HarnessError> {
    if let Some(s) = preset(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_scenario(&text, spec)
}

/// Built-in presets. `A`: two facing 4-element horizontal ULAs, 8-bit
/// phases, c = 3. `B`: two 8-element vertical ULAs on opposite edges, 4-bit
/// phases, c = 6. Both use θ_c = 45°, half-wavelength spacing at 28 GHz.
pub fn preset(name: &str) -> Option<Scenario> {
    let (tx, rx, bits, c, thresholds) = match name {
        "A" => (
            ArraySpec::Ula {
                center: [0.0, 0.075],
                direction: [1.0, 0.0],
                elements: 4,
                spacing_m: None,
            },
            ArraySpec::Ula {
                center: [0.0, 0.0],
                direction: [1.0, 0.0],
                elements: 4,
                spacing_m: None,
            },
            8,
            3.0,
            vec![2.0, 3.0],
        ),
        "B" => (
            ArraySpec::Ula {
                center: [0.075, 0.02],
                direction: [0.0, 1.0],
                elements: 8,
                spacing_m: None,
            },
            ArraySpec::Ula {
                center: [-0.075, 0.0],
                direction: [0.0, 1.0],
                elements: 8,
                spacing_m: None,
            },
            4,
            6.0,
            vec![4.0, 6.0],
        ),
        _ => return None,
    };
    let file = ScenarioFile {
        name: name.to_string(),
        geometry: GeometrySpec { tx, rx },
        radio: RadioConfig::mmwave_default(),
        bits,
        target: WorstCaseTarget {
            distance_m: 10.0,
            rcs_dbsm: -10.0,
        },
        comm_direction_deg: 45.0,
        comm_threshold: c,
        sweep: SweepSpec::new(-90.0, 90.0, 5.0),
        cdf: Some(CdfSpec {
            sensing: SweepSpec::new(-85.0, 85.0, 3.0),
            comm_directions_deg: (3..=9).map(|k| 10.0 * k as f64).collect(),
            thresholds,
        }),
    };
    Some(Scenario::from_file(file).expect("presets are valid"))
}
