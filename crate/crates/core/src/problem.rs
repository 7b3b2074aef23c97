//! Quadratic-fractional subproblems for the RX and TX codewords, the
//! communication-gain constraint, and SINR evaluation.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{steering, RadioConfig};
use crate::numerics::{cholesky_upper, ComplexMatrix, HermitianMatrix, NumericsError, UpperTriangular};
use crate::phase_grid::{Codeword, PhaseGrid};

/// Slack used when checking `|vᴴa_c|² ≥ c²` on a committed codeword.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("communication threshold c² = {c_sq} exceeds the array gain limit M² = {limit}")]
    InfeasibleThreshold { c_sq: f64, limit: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `max_w (wᴴBw)/(wᴴGw)` over RX codewords for a fixed TX codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct RxSubproblem {
    pub numerator: HermitianMatrix,
    pub denominator: HermitianMatrix,
    /// `b(θ) = a_r(θ) a_t(θ)ᴴ v₀`.
    pub b: Vec<Complex64>,
    /// `g_SI = H_SI v₀`.
    pub g: Vec<Complex64>,
    /// Diagonal loading of the denominator.
    pub loading: f64,
    pub theta: f64,
    pub grid: PhaseGrid,
}

/// `max_v (vᴴB̃v)/(vᴴG̃v)` over TX codewords for a fixed RX codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct TxSubproblem {
    pub numerator: HermitianMatrix,
    pub denominator: HermitianMatrix,
    pub b: Vec<Complex64>,
    pub g: Vec<Complex64>,
    pub loading: f64,
    pub theta: f64,
    pub grid: PhaseGrid,
}

/// Common view of either subproblem, used by the generic solvers.
pub trait Subproblem {
    fn numerator(&self) -> &HermitianMatrix;
    fn denominator(&self) -> &HermitianMatrix;
    fn grid(&self) -> PhaseGrid;

    fn dim(&self) -> usize {
        self.numerator().dim()
    }

    fn quotient(&self, x: &Codeword) -> f64 {
        rayleigh(x, self.numerator(), self.denominator())
    }
}

impl Subproblem for RxSubproblem {
    fn numerator(&self) -> &HermitianMatrix {
        &self.numerator
    }
    fn denominator(&self) -> &HermitianMatrix {
        &self.denominator
    }
    fn grid(&self) -> PhaseGrid {
        self.grid
    }
}

impl Subproblem for TxSubproblem {
    fn numerator(&self) -> &HermitianMatrix {
        &self.numerator
    }
    fn denominator(&self) -> &HermitianMatrix {
        &self.denominator
    }
    fn grid(&self) -> PhaseGrid {
        self.grid
    }
}

/// A bare `(B, G)` pair, handy for synthetic instances.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientPair {
    pub numerator: HermitianMatrix,
    pub denominator: HermitianMatrix,
    pub grid: PhaseGrid,
}

impl Subproblem for QuotientPair {
    fn numerator(&self) -> &HermitianMatrix {
        &self.numerator
    }
    fn denominator(&self) -> &HermitianMatrix {
        &self.denominator
    }
    fn grid(&self) -> PhaseGrid {
        self.grid
    }
}

/// `|vᴴa_c|² ≥ c²` rewritten as `‖U_c v‖² ≤ ĉ²` for unit-modulus `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommConstraint {
    pub theta_c: f64,
    pub a_c: Vec<Complex64>,
    pub gain_threshold: f64,
    pub shift_alpha: f64,
    /// `Â_c = −a_c a_cᴴ + α I`.
    pub shifted: HermitianMatrix,
    pub c_hat_sq: f64,
    pub factor: UpperTriangular,
}

impl CommConstraint {
    pub fn dim(&self) -> usize {
        self.a_c.len()
    }

    /// Beamforming gain `|vᴴa_c|²` towards the communication direction.
    pub fn gain(&self, v: &[Complex64]) -> f64 {
        inner(v, &self.a_c).norm_sqr()
    }

    /// `‖U_c v‖²`, equal to `vᴴÂ_c v`.
    pub fn shifted_value(&self, v: &[Complex64]) -> f64 {
        self.factor.norm_sqr_of(v)
    }

    pub fn is_satisfied(&self, v: &Codeword) -> bool {
        self.gain(&v.to_complex()) >= self.gain_threshold * self.gain_threshold - FEASIBILITY_SLACK
    }
}

/// `xᴴy`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), ProblemError> {
    if expected != actual {
        return Err(ProblemError::DimensionMismatch { what, expected, actual });
    }
    Ok(())
}

/// RX subproblem for a fixed TX codeword `v0`.
pub fn build_rx(
    theta: f64,
    v0: &Codeword,
    h_si: &ComplexMatrix,
    radio: &RadioConfig,
    grid: PhaseGrid,
) -> Result<RxSubproblem, ProblemError> {
    let (n, m) = (h_si.rows(), h_si.cols());
    check_len("TX codeword", m, v0.len())?;
    let v = v0.to_complex();
    let ar = steering(theta, n);
    let at = steering(theta, m);
    let proj = inner(&at, &v);
    let b: Vec<Complex64> = ar.iter().map(|x| x * proj).collect();
    let g = h_si.mul_vec(&v);
    let loading = radio.noise_per_element_w(n) / radio.tx_power_w();
    Ok(RxSubproblem {
        numerator: HermitianMatrix::outer(&b),
        denominator: HermitianMatrix::outer(&g).shifted(loading),
        b,
        g,
        loading,
        theta,
        grid,
    })
}

/// TX subproblem for a fixed RX codeword `w0`.
pub fn build_tx(
    theta: f64,
    w0: &Codeword,
    h_si: &ComplexMatrix,
    radio: &RadioConfig,
    grid: PhaseGrid,
) -> Result<TxSubproblem, ProblemError> {
    let (n, m) = (h_si.rows(), h_si.cols());
    check_len("RX codeword", n, w0.len())?;
    let w = w0.to_complex();
    let ar = steering(theta, n);
    let at = steering(theta, m);
    let proj = inner(&ar, &w);
    let b: Vec<Complex64> = at.iter().map(|x| x * proj).collect();
    let g = h_si.adjoint_mul_vec(&w);
    let loading = radio.total_noise_w(n) / (m as f64 * radio.tx_power_w());
    Ok(TxSubproblem {
        numerator: HermitianMatrix::outer(&b),
        denominator: HermitianMatrix::outer(&g).shifted(loading),
        b,
        g,
        loading,
        theta,
        grid,
    })
}

/// Communication constraint `|vᴴa_t(θ_c)|² ≥ c²` for an `m`-element TX array,
/// shifted with `α = M + 1`.
pub fn build_comm_constraint(theta_c: f64, c: f64, m: usize) -> Result<CommConstraint, ProblemError> {
    let limit = (m * m) as f64;
    let c_sq = c * c;
    if !(c_sq <= limit) || c < 0.0 {
        return Err(ProblemError::InfeasibleThreshold { c_sq, limit });
    }
    let a_c = steering(theta_c, m);
    let alpha = m as f64 + 1.0;
    let shifted = HermitianMatrix::outer(&a_c).combine(-1.0, &HermitianMatrix::identity(m), alpha);
    let factor = cholesky_upper(&shifted)?;
    Ok(CommConstraint {
        theta_c,
        a_c,
        gain_threshold: c,
        shift_alpha: alpha,
        shifted,
        c_hat_sq: -c_sq + alpha * m as f64,
        factor,
    })
}

/// `xᴴBx / xᴴGx` for a codeword.
pub fn rayleigh(x: &Codeword, numerator: &HermitianMatrix, denominator: &HermitianMatrix) -> f64 {
    rayleigh_vec(&x.to_complex(), numerator, denominator)
}

pub fn rayleigh_vec(x: &[Complex64], numerator: &HermitianMatrix, denominator: &HermitianMatrix) -> f64 {
    numerator.quad_form(x) / denominator.quad_form(x)
}

/// Linear-scale sensing SINR
/// `P_t|α wᴴa_r a_tᴴ v|² / (P_t|wᴴH_SI v|² + Nσ_z²)`.
pub fn sinr_linear(
    w: &[Complex64],
    v: &[Complex64],
    alpha_theta: f64,
    theta: f64,
    h_si: &ComplexMatrix,
    radio: &RadioConfig,
) -> f64 {
    let (n, m) = (h_si.rows(), h_si.cols());
    let pt = radio.tx_power_w();
    let signal = inner(w, &steering(theta, n)) * inner(&steering(theta, m), v);
    let si = inner(w, &h_si.mul_vec(v));
    pt * alpha_theta * alpha_theta * signal.norm_sqr() / (pt * si.norm_sqr() + radio.total_noise_w(n))
}

/// Sensing SINR in dB for a codeword pair.
pub fn sinr(
    w: &Codeword,
    v: &Codeword,
    alpha_theta: f64,
    theta: f64,
    h_si: &ComplexMatrix,
    radio: &RadioConfig,
) -> f64 {
    crate::channel::linear_to_db(sinr_linear(&w.to_complex(), &v.to_complex(), alpha_theta, theta, h_si, radio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{si_channel, DeviceGeometry, Point2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, m, |_, _| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
    }

    fn random_codeword(rng: &mut ChaCha8Rng, len: usize, grid: PhaseGrid) -> Codeword {
        let free: Vec<usize> = (0..len - 1).map(|_| rng.gen_range(0..grid.size())).collect();
        Codeword::from_free(&free, grid).unwrap()
    }

    fn preset_a_channel() -> (ComplexMatrix, RadioConfig) {
        let radio = RadioConfig::mmwave_default();
        let sp = radio.wavelength() / 2.0;
        let geom = DeviceGeometry {
            tx_positions: DeviceGeometry::ula(Point2::new(0.0, 0.075), (1.0, 0.0), 4, sp),
            rx_positions: DeviceGeometry::ula(Point2::new(0.0, 0.0), (1.0, 0.0), 4, sp),
        };
        (si_channel(&geom, &radio).unwrap(), radio)
    }

    #[test]
    fn rx_without_si_has_pure_noise_denominator() {
        let radio = RadioConfig::mmwave_default();
        let grid = PhaseGrid::new(2).unwrap();
        let h = ComplexMatrix::zeros(3, 4);
        let p = build_rx(0.0, &Codeword::zeros(4, grid), &h, &radio, grid).unwrap();
        let expect = radio.noise_per_element_w(3) / radio.tx_power_w();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { expect } else { 0.0 };
                assert!((p.denominator.get(i, j) - c(e, 0.0)).norm() <= 1e-15 * expect);
            }
            // broadside, all-ones v0: b = M·1
            assert!((p.b[i] - c(4.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn tx_without_si_and_matched_rx() {
        let radio = RadioConfig::mmwave_default();
        let grid = PhaseGrid::new(3).unwrap();
        let h = ComplexMatrix::zeros(4, 3);
        let w0 = Codeword::quantize(&steering(0.0, 4), grid);
        let p = build_tx(0.0, &w0, &h, &radio, grid).unwrap();
        let expect = radio.total_noise_w(4) / (3.0 * radio.tx_power_w());
        for i in 0..3 {
            assert!((p.denominator.get(i, i).re - expect).abs() <= 1e-15 * expect);
            assert!((p.b[i] - c(4.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn subproblems_match_direct_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let radio = RadioConfig::mmwave_default();
        let grid = PhaseGrid::new(3).unwrap();
        for _ in 0..20 {
            let (n, m) = (rng.gen_range(2..6), rng.gen_range(2..6));
            let h = random_matrix(&mut rng, n, m, 1e-3);
            let theta = rng.gen_range(-1.5..1.5);
            let v0 = random_codeword(&mut rng, m, grid);
            let w0 = random_codeword(&mut rng, n, grid);
            let rx = build_rx(theta, &v0, &h, &radio, grid).unwrap();
            let tx = build_tx(theta, &w0, &h, &radio, grid).unwrap();
            let (ar, at) = (steering(theta, n), steering(theta, m));
            let v = v0.to_complex();
            let w = w0.to_complex();
            let sigma = radio.total_noise_w(n) / n as f64;
            let pt = radio.tx_power_w();
            for i in 0..n {
                for j in 0..n {
                    // b_i b_j* with b = a_r (a_tᴴ v)
                    let atv: Complex64 = (0..m).map(|k| at[k].conj() * v[k]).sum();
                    let hv_i: Complex64 = (0..m).map(|k| h.get(i, k) * v[k]).sum();
                    let hv_j: Complex64 = (0..m).map(|k| h.get(j, k) * v[k]).sum();
                    let bij = ar[i] * atv * (ar[j] * atv).conj();
                    let gij = hv_i * hv_j.conj() + if i == j { c(sigma / pt, 0.0) } else { c(0.0, 0.0) };
                    assert!((rx.numerator.get(i, j) - bij).norm() < 1e-10);
                    assert!((rx.denominator.get(i, j) - gij).norm() < 1e-18 + 1e-10 * gij.norm());
                }
            }
            for i in 0..m {
                for j in 0..m {
                    let arw: Complex64 = (0..n).map(|k| ar[k].conj() * w[k]).sum();
                    let hw_i: Complex64 = (0..n).map(|k| h.get(k, i).conj() * w[k]).sum();
                    let hw_j: Complex64 = (0..n).map(|k| h.get(k, j).conj() * w[k]).sum();
                    let bij = at[i] * arw * (at[j] * arw).conj();
                    let load = n as f64 * sigma / (m as f64 * pt);
                    let gij = hw_i * hw_j.conj() + if i == j { c(load, 0.0) } else { c(0.0, 0.0) };
                    assert!((tx.numerator.get(i, j) - bij).norm() < 1e-10);
                    assert!((tx.denominator.get(i, j) - gij).norm() < 1e-18 + 1e-10 * gij.norm());
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let radio = RadioConfig::mmwave_default();
        let grid = PhaseGrid::new(2).unwrap();
        let h = ComplexMatrix::zeros(3, 4);
        assert!(matches!(
            build_rx(0.0, &Codeword::zeros(3, grid), &h, &radio, grid),
            Err(ProblemError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            build_tx(0.0, &Codeword::zeros(4, grid), &h, &radio, grid),
            Err(ProblemError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn comm_constraint_basics() {
        let cc = build_comm_constraint(PI / 4.0, 3.0, 4).unwrap();
        assert_eq!(cc.gain_threshold * cc.gain_threshold, 9.0);
        assert!(cc.c_hat_sq > 0.0);
        let recon = cc.factor.gram();
        assert!(recon.combine(1.0, &cc.shifted, -1.0).frobenius_norm() < 1e-10 * cc.shifted.frobenius_norm());
        assert!(matches!(
            build_comm_constraint(0.0, 4.5, 4),
            Err(ProblemError::InfeasibleThreshold { .. })
        ));

        // c = 0 is vacuous
        let cc0 = build_comm_constraint(0.3, 0.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let grid = PhaseGrid::new(3).unwrap();
        for _ in 0..100 {
            let v = random_codeword(&mut rng, 4, grid);
            assert!(cc0.shifted_value(&v.to_complex()) <= cc0.c_hat_sq + 1e-9);
        }
    }

    #[test]
    fn quantized_comm_steering_meets_near_full_gain() {
        let grid = PhaseGrid::new(8).unwrap();
        let theta_c = PI / 4.0;
        let v = Codeword::quantize(&steering(theta_c, 4), grid);
        let gain = inner(&v.to_complex(), &steering(theta_c, 4)).norm();
        assert!(gain > 4.0 * (1.0 - 1e-3));
        let cc = build_comm_constraint(theta_c, gain * (1.0 - 1e-9), 4).unwrap();
        assert!(cc.is_satisfied(&v));
        assert!(cc.shifted_value(&v.to_complex()) <= cc.c_hat_sq + 1e-9);
    }

    #[test]
    fn comm_constraint_equivalence_on_random_codewords() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for _ in 0..10_000 {
            let m = rng.gen_range(2..7);
            let cval = rng.gen_range(0.0..m as f64);
            let cc = build_comm_constraint(rng.gen_range(-1.5..1.5), cval, m).unwrap();
            let v: Vec<Complex64> = (0..m).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))).collect();
            let gain = cc.gain(&v);
            if (gain - cval * cval).abs() < 1e-9 {
                continue;
            }
            assert_eq!(cc.shifted_value(&v) <= cc.c_hat_sq, gain >= cval * cval);
            checked += 1;
        }
        assert!(checked > 9_900);
    }

    #[test]
    fn rayleigh_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = PhaseGrid::new(2).unwrap();
        let g = HermitianMatrix::gram(&random_matrix(&mut rng, 4, 4, 1.0)).shifted(0.5);
        let x = random_codeword(&mut rng, 4, grid);
        assert!((rayleigh(&x, &g, &g) - 1.0).abs() < 1e-14);
        assert_eq!(rayleigh(&x, &HermitianMatrix::zeros(4), &g), 0.0);
        let b = HermitianMatrix::gram(&random_matrix(&mut rng, 4, 4, 1.0));
        let xv = x.to_complex();
        let num: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| (xv[i].conj() * b.get(i, j) * xv[j]).re)
            .sum();
        let den: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| (xv[i].conj() * g.get(i, j) * xv[j]).re)
            .sum();
        assert!((rayleigh(&x, &b, &g) - num / den).abs() < 1e-12 * (num / den));
    }

    #[test]
    fn sinr_closed_form_without_si() {
        let radio = RadioConfig::mmwave_default();
        let grid = PhaseGrid::new(2).unwrap();
        let (n, m) = (3, 4);
        let h = ComplexMatrix::zeros(n, m);
        let w = Codeword::zeros(n, grid);
        let v = Codeword::zeros(m, grid);
        let alpha = 1e-4;
        let got = sinr_linear(&w.to_complex(), &v.to_complex(), alpha, 0.0, &h, &radio);
        let expect = radio.tx_power_w() * alpha * alpha * (n * n * m * m) as f64 / radio.total_noise_w(n);
        assert!((got - expect).abs() < 1e-12 * expect);
        let db1 = sinr(&w, &v, alpha, 0.0, &h, &radio);
        let db10 = sinr(&w, &v, 10.0 * alpha, 0.0, &h, &radio);
        assert!((db10 - db1 - 20.0).abs() < 1e-9);
    }

    #[test]
    fn sinr_term_by_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (h, radio) = preset_a_channel();
        let grid = PhaseGrid::new(3).unwrap();
        let w = random_codeword(&mut rng, 4, grid).to_complex();
        let v = random_codeword(&mut rng, 4, grid).to_complex();
        let theta = 0.4;
        let alpha = 2e-5;
        let ar = steering(theta, 4);
        let at = steering(theta, 4);
        let mut sig = c(0.0, 0.0);
        let mut si = c(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                sig += w[i].conj() * ar[i] * at[j].conj() * v[j];
                si += w[i].conj() * h.get(i, j) * v[j];
            }
        }
        let pt = radio.tx_power_w();
        let expect = pt * alpha * alpha * sig.norm_sqr() / (pt * si.norm_sqr() + radio.total_noise_w(4));
        let got = sinr_linear(&w, &v, alpha, theta, &h, &radio);
        assert!((got - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn quotients_reproduce_sinr() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (h, radio) = preset_a_channel();
        let grid = PhaseGrid::new(3).unwrap();
        let alpha = 3e-6;
        for _ in 0..20 {
            let theta = rng.gen_range(-1.5..1.5);
            let w = random_codeword(&mut rng, 4, grid);
            let v = random_codeword(&mut rng, 4, grid);
            let s = sinr_linear(&w.to_complex(), &v.to_complex(), alpha, theta, &h, &radio);
            let rx = build_rx(theta, &v, &h, &radio, grid).unwrap();
            let tx = build_tx(theta, &w, &h, &radio, grid).unwrap();
            assert!((alpha * alpha * rx.quotient(&w) - s).abs() < 1e-9 * s);
            assert!((alpha * alpha * tx.quotient(&v) - s).abs() < 1e-9 * s);
        }
    }
}
