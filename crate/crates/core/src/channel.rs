//! Array responses, the far-field sensing channel, the near-field
//! self-interference channel and worst-case echo amplitudes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::ComplexMatrix;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative tolerance for the ULA collinearity / uniform-spacing check.
const ULA_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("TX element {tx} and RX element {rx} coincide")]
    CoincidentElements { tx: usize, rx: usize },
    #[error("{array} array is not a uniform linear array: {reason}")]
    NotUniformLinear { array: &'static str, reason: String },
    #[error("{array} array has no elements")]
    EmptyArray { array: &'static str },
    #[error("invalid radio configuration: {0}")]
    InvalidRadio(String),
    #[error("path set is empty")]
    NoPaths,
}

/// How `noise_power_dbm` maps onto the SINR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseInterpretation {
    /// The configured power is the combined term `N·σ_z²`.
    #[default]
    Total,
    /// The configured power is the per-element variance `σ_z²`.
    PerElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub carrier_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    #[serde(default)]
    pub noise_interpretation: NoiseInterpretation,
    /// Surface-wave coupling gain `G₂`.
    pub g2: f64,
    /// Free-space coupling gain `G₃`.
    pub g3: f64,
    /// Element gain towards the sensing direction, TX side.
    #[serde(default = "unit_gain")]
    pub gt: f64,
    #[serde(default = "unit_gain")]
    pub gr: f64,
}

fn unit_gain() -> f64 {
    1.0
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl RadioConfig {
    /// 28 GHz, 20 dBm per TX element, −110 dBm noise, `G₂ = 0.16`,
    /// `G₃ = 0.67`, unit element gains.
    pub fn mmwave_default() -> Self {
        Self {
            carrier_hz: 28e9,
            tx_power_dbm: 20.0,
            noise_power_dbm: -110.0,
            noise_interpretation: NoiseInterpretation::Total,
            g2: 0.16,
            g3: 0.67,
            gt: 1.0,
            gr: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(ChannelError::InvalidRadio(format!(
                "carrier_hz must be positive, got {}",
                self.carrier_hz
            )));
        }
        for (name, v) in [("g2", self.g2), ("g3", self.g3), ("gt", self.gt), ("gr", self.gr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ChannelError::InvalidRadio(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("tx_power_dbm", self.tx_power_dbm), ("noise_power_dbm", self.noise_power_dbm)] {
            if !v.is_finite() {
                return Err(ChannelError::InvalidRadio(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Per-element transmit power `P_t` in watts.
    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Combined noise term `N·σ_z²` in watts for an `n_rx`-element receiver.
    pub fn total_noise_w(&self, n_rx: usize) -> f64 {
        let p = dbm_to_watts(self.noise_power_dbm);
        match self.noise_interpretation {
            NoiseInterpretation::Total => p,
            NoiseInterpretation::PerElement => p * n_rx as f64,
        }
    }

    /// Per-element noise variance `σ_z²` in watts.
    pub fn noise_per_element_w(&self, n_rx: usize) -> f64 {
        self.total_noise_w(n_rx) / n_rx as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Element positions of the TX and RX arrays, in metres, in array order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub tx_positions: Vec<Point2>,
    pub rx_positions: Vec<Point2>,
}

impl DeviceGeometry {
    /// `n` elements spaced `spacing` apart along `direction`, centred on `center`.
    pub fn ula(center: Point2, direction: (f64, f64), n: usize, spacing: f64) -> Vec<Point2> {
        let norm = direction.0.hypot(direction.1);
        let (ux, uy) = (direction.0 / norm, direction.1 / norm);
        (0..n)
            .map(|k| {
                let off = (k as f64 - (n as f64 - 1.0) / 2.0) * spacing;
                Point2::new(center.x + off * ux, center.y + off * uy)
            })
            .collect()
    }

    pub fn n_tx(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx_positions.len()
    }

    /// `d[n][m]` between RX element `n` and TX element `m`.
    pub fn distances(&self) -> Vec<Vec<f64>> {
        self.rx_positions
            .iter()
            .map(|r| self.tx_positions.iter().map(|t| r.distance(t)).collect())
            .collect()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        check_ula("TX", &self.tx_positions)?;
        check_ula("RX", &self.rx_positions)?;
        for (rx, r) in self.rx_positions.iter().enumerate() {
            for (tx, t) in self.tx_positions.iter().enumerate() {
                if r.distance(t) <= 0.0 {
                    return Err(ChannelError::CoincidentElements { tx, rx });
                }
            }
        }
        Ok(())
    }
}

fn check_ula(array: &'static str, pts: &[Point2]) -> Result<(), ChannelError> {
    if pts.is_empty() {
        return Err(ChannelError::EmptyArray { array });
    }
    if pts.len() < 2 {
        return Ok(());
    }
    let dx = pts[1].x - pts[0].x;
    let dy = pts[1].y - pts[0].y;
    let spacing = dx.hypot(dy);
    if spacing <= 0.0 {
        return Err(ChannelError::NotUniformLinear {
            array,
            reason: "first two elements coincide".into(),
        });
    }
    for (k, p) in pts.iter().enumerate().skip(2) {
        let ex = pts[0].x + k as f64 * dx;
        let ey = pts[0].y + k as f64 * dy;
        let dev = (p.x - ex).hypot(p.y - ey);
        if dev > ULA_REL_TOL * spacing {
            return Err(ChannelError::NotUniformLinear {
                array,
                reason: format!("element {k} deviates {dev:.3e} m from the uniform line"),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseTarget {
    pub distance_m: f64,
    pub rcs_dbsm: f64,
}

/// One single-bounce reflection: angle (rad), range (m), RCS (dBsm) and
/// the phase of the complex path gain (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub theta: f64,
    pub distance_m: f64,
    pub rcs_dbsm: f64,
    pub phase: f64,
}

impl Path {
    pub fn gain(&self, radio: &RadioConfig) -> Complex64 {
        let amp = path_gain_amplitude(self.distance_m, self.rcs_dbsm, radio);
        Complex64::from_polar(amp, self.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

/// Half-wavelength ULA response: entry `k` is `exp(jπ k sin θ)`.
pub fn steering(theta: f64, n: usize) -> Vec<Complex64> {
    let s = theta.sin();
    (0..n)
        .map(|k| {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, PI * k as f64 * s)
            }
        })
        .collect()
}

/// Substrate coupling coefficient `β(d)` between two elements.
pub fn coupling_coefficient(d: f64, radio: &RadioConfig) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    let lambda = radio.wavelength();
    let pi2 = PI * PI;
    let free_space = radio.g3 * radio.g3 * lambda * lambda / (16.0 * pi2 * d * d);
    let surface = radio.g2 * radio.g2 * lambda / (4.0 * pi2 * d);
    let cross = 2.0 * radio.g3 * radio.g2 * lambda.powf(1.5) / (8.0 * pi2 * d.powf(1.5));
    Ok(free_space + surface + cross)
}

/// Line-of-sight near-field SI channel, `N×M` (RX rows, TX columns).
pub fn si_channel(geom: &DeviceGeometry, radio: &RadioConfig) -> Result<ComplexMatrix, ChannelError> {
    let lambda = radio.wavelength();
    let mut h = ComplexMatrix::zeros(geom.n_rx(), geom.n_tx());
    for (n, r) in geom.rx_positions.iter().enumerate() {
        for (m, t) in geom.tx_positions.iter().enumerate() {
            let d = r.distance(t);
            if d <= 0.0 {
                return Err(ChannelError::CoincidentElements { tx: m, rx: n });
            }
            let beta = coupling_coefficient(d, radio)?;
            h.set(n, m, Complex64::from_polar(beta.sqrt(), -2.0 * PI * d / lambda));
        }
    }
    Ok(h)
}

fn path_gain_amplitude(distance_m: f64, rcs_dbsm: f64, radio: &RadioConfig) -> f64 {
    let lambda = radio.wavelength();
    let sigma = 10f64.powf(rcs_dbsm / 10.0);
    (radio.gt * radio.gr * lambda * lambda * sigma / ((4.0 * PI).powi(3) * distance_m.powi(4))).sqrt()
}

/// Radar-equation echo amplitude `|α_θ|` for the worst-case target.
pub fn worst_case_path_gain(target: &WorstCaseTarget, radio: &RadioConfig) -> f64 {
    path_gain_amplitude(target.distance_m, target.rcs_dbsm, radio)
}

/// `Σ α_l a_r(θ_l) a_t(θ_l)ᴴ` from explicit `(θ, α)` pairs.
pub fn sensing_channel_from_gains(paths: &[(f64, Complex64)], n: usize, m: usize) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(n, m);
    for &(theta, alpha) in paths {
        let ar = steering(theta, n);
        let at = steering(theta, m);
        for i in 0..n {
            for j in 0..m {
                let v = h.get(i, j) + alpha * ar[i] * at[j].conj();
                h.set(i, j, v);
            }
        }
    }
    h
}

/// Far-field sensing channel with monostatic geometry (departure angle equals
/// arrival angle on every path).
pub fn sensing_channel(
    paths: &PathSet,
    radio: &RadioConfig,
    n: usize,
    m: usize,
) -> Result<ComplexMatrix, ChannelError> {
    if paths.paths.is_empty() {
        return Err(ChannelError::NoPaths);
    }
    let gains: Vec<(f64, Complex64)> = paths.paths.iter().map(|p| (p.theta, p.gain(radio))).collect();
    Ok(sensing_channel_from_gains(&gains, n, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn steering_examples() {
        let one = Complex64::new(1.0, 0.0);
        assert!(steering(0.0, 4).iter().all(|z| close(*z, one, 1e-15)));
        let e = steering(PI / 2.0, 2);
        assert!(close(e[0], one, 1e-15) && close(e[1], -one, 1e-15));
        let s = steering(PI / 6.0, 3);
        assert!(close(s[1], Complex64::new(0.0, 1.0), 1e-12));
        assert!(close(s[2], -one, 1e-12));
    }

    #[test]
    fn steering_symmetry() {
        let a = steering(0.37, 6);
        let b = steering(-0.37, 6);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.norm() - 1.0).abs() < 1e-15);
            assert!(close(*y, x.conj(), 1e-14));
        }
    }

    #[test]
    fn coupling_zero_gains_and_oracle() {
        let mut radio = RadioConfig::mmwave_default();
        radio.g2 = 0.0;
        radio.g3 = 0.0;
        assert_eq!(coupling_coefficient(0.01, &radio).unwrap(), 0.0);

        let radio = RadioConfig::mmwave_default();
        let lambda = 0.010707;
        let d: f64 = 0.01;
        // term-by-term with the rounded wavelength
        let t1 = 0.67f64.powi(2) * lambda * lambda / (16.0 * PI * PI * d * d);
        let t2 = 0.16f64.powi(2) * lambda / (4.0 * PI * PI * d);
        let t3 = 2.0 * 0.67 * 0.16 * lambda.powf(1.5) / (8.0 * PI * PI * d.powf(1.5));
        let expect = t1 + t2 + t3;
        let got = coupling_coefficient(d, &radio).unwrap();
        assert!(((got - expect) / expect).abs() < 1e-4, "{got} vs {expect}");
        assert!(matches!(
            coupling_coefficient(0.0, &radio),
            Err(ChannelError::NonPositiveDistance(_))
        ));
    }

    #[test]
    fn coupling_decreases_with_distance() {
        let radio = RadioConfig::mmwave_default();
        let mut prev = f64::INFINITY;
        let mut d = 0.001;
        while d <= 1.0 {
            let b = coupling_coefficient(d, &radio).unwrap();
            assert!(b > 0.0 && b < prev);
            prev = b;
            d *= 1.1;
        }
    }

    #[test]
    fn si_channel_phase_wrap() {
        let radio = RadioConfig::mmwave_default();
        let lambda = radio.wavelength();
        for (d, expect) in [(lambda, 0.0), (lambda / 2.0, PI)] {
            let geom = DeviceGeometry {
                tx_positions: vec![Point2::new(0.0, 0.0)],
                rx_positions: vec![Point2::new(d, 0.0)],
            };
            let h = si_channel(&geom, &radio).unwrap();
            let ph = h.get(0, 0).arg();
            assert!(crate::phase_grid::wrap_angle(ph - expect).abs() < 1e-9);
            let beta = coupling_coefficient(d, &radio).unwrap();
            assert!((h.get(0, 0).norm_sqr() - beta).abs() <= 1e-15 * beta.max(1.0));
        }
    }

    #[test]
    fn si_channel_rejects_coincident_elements() {
        let radio = RadioConfig::mmwave_default();
        let geom = DeviceGeometry {
            tx_positions: vec![Point2::new(0.0, 0.0)],
            rx_positions: vec![Point2::new(0.0, 0.0)],
        };
        assert!(si_channel(&geom, &radio).is_err());
        assert!(geom.validate().is_err());
    }

    #[test]
    fn path_gain_scaling_and_closed_form() {
        let radio = RadioConfig::mmwave_default();
        let t1 = WorstCaseTarget { distance_m: 10.0, rcs_dbsm: -10.0 };
        let t2 = WorstCaseTarget { distance_m: 20.0, rcs_dbsm: -10.0 };
        let a1 = worst_case_path_gain(&t1, &radio);
        let a2 = worst_case_path_gain(&t2, &radio);
        assert!((a1 / a2 - 4.0).abs() < 1e-12);

        let t0 = WorstCaseTarget { distance_m: 3.0, rcs_dbsm: 0.0 };
        let lambda = radio.wavelength();
        let expect = lambda / ((4.0 * PI).powf(1.5) * 9.0);
        assert!((worst_case_path_gain(&t0, &radio) - expect).abs() < 1e-15);

        let lambda = 0.010707f64;
        let oracle = (lambda * lambda * 0.1 / ((4.0 * PI).powi(3) * 1e4)).sqrt();
        assert!(((a1 - oracle) / oracle).abs() < 1e-4);
    }

    #[test]
    fn sensing_channel_single_and_multi_path() {
        let h = sensing_channel_from_gains(&[(0.0, Complex64::new(1.0, 0.0))], 3, 4);
        for i in 0..3 {
            for j in 0..4 {
                assert!(close(h.get(i, j), Complex64::new(1.0, 0.0), 1e-15));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let paths: Vec<(f64, Complex64)> = (0..2)
            .map(|_| {
                (
                    rng.gen_range(-1.5..1.5),
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                )
            })
            .collect();
        let h = sensing_channel_from_gains(&paths, 4, 3);
        for i in 0..4 {
            for j in 0..3 {
                let mut s = Complex64::new(0.0, 0.0);
                for (th, a) in &paths {
                    s += a * Complex64::from_polar(1.0, PI * (i as f64 - j as f64) * th.sin());
                }
                assert!(close(h.get(i, j), s, 1e-12));
            }
        }
    }

    #[test]
    fn sensing_channel_requires_paths() {
        let radio = RadioConfig::mmwave_default();
        assert_eq!(
            sensing_channel(&PathSet::default(), &radio, 2, 2),
            Err(ChannelError::NoPaths)
        );
    }

    #[test]
    fn geometry_validation() {
        let ok = DeviceGeometry {
            tx_positions: DeviceGeometry::ula(Point2::new(0.0, 0.075), (1.0, 0.0), 4, 0.005),
            rx_positions: DeviceGeometry::ula(Point2::new(0.0, 0.0), (1.0, 0.0), 4, 0.005),
        };
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.tx_positions[3].y += 0.001;
        assert!(matches!(bad.validate(), Err(ChannelError::NotUniformLinear { .. })));
    }
}
