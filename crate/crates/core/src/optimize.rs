//! Dinkelbach loops around the sphere searches, the alternating joint
//! optimizer, and the MVDR / exhaustive baselines.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{linear_to_db, steering, RadioConfig};
use crate::flops::FlopCounter;
use crate::numerics::{
    cholesky_upper_with, min_eigenvalue_with, solve_hermitian_with, vectorize, ComplexMatrix, HermitianMatrix,
    NumericsError, Tolerances,
};
use crate::phase_grid::{Codeword, PhaseGrid};
use crate::problem::{
    build_rx, build_tx, inner, sinr_linear, CommConstraint, ProblemError, RxSubproblem, Subproblem,
};
use crate::search::{css_with, ss_with, NoObserver, SearchError, SearchStats};

/// Default enumeration cap for exhaustive search.
pub const ES_CAP: u64 = 1 << 24;

/// Floor on the positive-definite shift, relative to `‖C‖_F`.
const SHIFT_FLOOR_REL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("initial TX codeword misses the communication requirement: |vᴴa_c|² = {gain:.6} < c² = {required:.6}")]
    InfeasibleConstraint { gain: f64, required: f64 },
    #[error("no discrete codeword meets the communication requirement c² = {required:.6}")]
    EmptyFeasibleSet { required: f64 },
    #[error("Dinkelbach iteration did not converge within {iterations} iterations")]
    MaxIterations { iterations: usize },
    #[error("exhaustive search over {candidates} codewords exceeds the cap of {cap}")]
    TooLarge { candidates: u64, cap: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpConfig {
    /// Relative stopping threshold on successive `ρ` values.
    pub eps: f64,
    pub t_max: usize,
    pub tolerances: Tolerances,
}

impl Default for FpConfig {
    fn default() -> Self {
        Self {
            eps: 1e-12,
            t_max: 30,
            tolerances: Tolerances::default(),
        }
    }
}

/// Iterates of one Dinkelbach run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FpTrace {
    /// `ρ⁽¹⁾, ρ⁽²⁾, …`, the quotient of the previous iterate.
    pub rho_values: Vec<f64>,
    /// `w⁽⁰⁾, w⁽¹⁾, …`, the initial codeword followed by each search result.
    pub codewords: Vec<Codeword>,
    pub converged: bool,
    /// Number of `ρ` evaluations performed.
    pub iterations: usize,
    pub search: SearchStats,
    /// Total cost, including eigenvalue, factorization and search work.
    pub flops: FlopCounter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpOutcome {
    pub codeword: Codeword,
    /// Rayleigh quotient of `codeword`.
    pub quotient: f64,
    pub trace: FpTrace,
}

impl FpOutcome {
    /// Turns a run that hit `t_max` into [`OptimizeError::MaxIterations`].
    pub fn ensure_converged(self) -> Result<Self, OptimizeError> {
        if self.trace.converged {
            Ok(self)
        } else {
            Err(OptimizeError::MaxIterations {
                iterations: self.trace.iterations,
            })
        }
    }
}

/// `C + sI` with `s = 2|λ_min(C)|`, floored so the result is always
/// positive definite.
fn pd_shift(c: &HermitianMatrix, tol: &Tolerances, flops: &mut FlopCounter) -> Result<f64, NumericsError> {
    let gamma = min_eigenvalue_with(c, tol, flops)?;
    let norm = c.frobenius_norm();
    let floor = if norm > 0.0 { SHIFT_FLOOR_REL * norm } else { 1.0 };
    Ok((2.0 * gamma.abs()).max(floor))
}

/// `ρG − B`.
fn dinkelbach_matrix<P: Subproblem + ?Sized>(p: &P, rho: f64, flops: &mut FlopCounter) -> HermitianMatrix {
    let n = p.dim() as u64;
    flops.real(2 * n * n);
    flops.cadd(n * n);
    p.denominator().combine(rho, p.numerator(), -1.0)
}

fn quotient_flops(n: u64) -> FlopCounter {
    FlopCounter::quadratic_form(n).times(2) + FlopCounter::new(0, 0, 1)
}

fn dinkelbach<P: Subproblem + ?Sized>(
    p: &P,
    init: &Codeword,
    cfg: &FpConfig,
    constraint: Option<&CommConstraint>,
) -> Result<FpOutcome, OptimizeError> {
    let n = p.dim();
    if init.len() != n {
        return Err(ProblemError::DimensionMismatch {
            what: "initial codeword",
            expected: n,
            actual: init.len(),
        }
        .into());
    }
    if let Some(cc) = constraint {
        if !cc.is_satisfied(init) {
            return Err(OptimizeError::InfeasibleConstraint {
                gain: cc.gain(&init.to_complex()),
                required: cc.gain_threshold * cc.gain_threshold,
            });
        }
    }
    let grid = p.grid();
    let mut trace = FpTrace {
        codewords: vec![init.clone()],
        ..FpTrace::default()
    };
    let mut current = init.clone();
    let mut rho_prev = 0.0;
    for t in 1..=cfg.t_max {
        let rho = p.quotient(&current);
        trace.flops += quotient_flops(n as u64);
        trace.rho_values.push(rho);
        trace.iterations = t;
        if t > 1 {
            if rho < rho_prev {
                // Rounding can let a search return a marginally worse point;
                // fall back to the previous iterate, which is a fixed point.
                trace.codewords.pop();
                current = trace.codewords.last().expect("initial codeword retained").clone();
                trace.rho_values.pop();
                trace.converged = true;
                return Ok(FpOutcome {
                    quotient: rho_prev,
                    codeword: current,
                    trace,
                });
            }
            let delta = rho - rho_prev;
            if delta == 0.0 || delta < cfg.eps * rho.abs() {
                trace.converged = true;
                return Ok(FpOutcome {
                    quotient: rho,
                    codeword: current,
                    trace,
                });
            }
        }
        rho_prev = rho;

        let c = dinkelbach_matrix(p, rho, &mut trace.flops);
        let shift = pd_shift(&c, &cfg.tolerances, &mut trace.flops)?;
        let c_hat = c.shifted(shift);
        trace.flops.real(n as u64);
        let u = cholesky_upper_with(&c_hat, &cfg.tolerances, &mut trace.flops)?;
        let x = current.to_complex();
        let radius = c_hat.quad_form(&x).max(0.0).sqrt();
        trace.flops += FlopCounter::quadratic_form(n as u64) + FlopCounter::new(0, 0, 1);
        let out = match constraint {
            None => ss_with(&u, radius, grid, &current, &mut NoObserver)?,
            Some(cc) => css_with(&u, &cc.factor, radius, cc.c_hat_sq, grid, &current, &mut NoObserver)?,
        };
        accumulate(&mut trace.search, &out.stats);
        trace.flops += out.stats.flops;
        current = out.codeword;
        trace.codewords.push(current.clone());
    }
    let quotient = p.quotient(&current);
    Ok(FpOutcome {
        codeword: current,
        quotient,
        trace,
    })
}

fn accumulate(total: &mut SearchStats, s: &SearchStats) {
    total.nodes += s.nodes;
    total.leaves += s.leaves;
    total.prunes += s.prunes;
    total.incumbent_updates += s.incumbent_updates;
    total.flops += s.flops;
}

/// FP-SS: the RX codeword maximizing `wᴴBw / wᴴGw`.
///
/// A run that reaches `t_max` is returned with `converged == false`; use
/// [`FpOutcome::ensure_converged`] to treat that as an error.
pub fn fp_ss<P: Subproblem + ?Sized>(p: &P, w_init: &Codeword, cfg: &FpConfig) -> Result<FpOutcome, OptimizeError> {
    dinkelbach(p, w_init, cfg, None)
}

/// FP-CSS: the TX codeword maximizing `vᴴB̃v / vᴴG̃v` subject to the
/// communication constraint. `v_init` must satisfy the constraint.
pub fn fp_css<P: Subproblem + ?Sized>(
    p: &P,
    cc: &CommConstraint,
    v_init: &Codeword,
    cfg: &FpConfig,
) -> Result<FpOutcome, OptimizeError> {
    dinkelbach(p, v_init, cfg, Some(cc))
}

/// `F(ρ) = max_w {wᴴBw − ρ wᴴGw}` over the (optionally constrained)
/// codebook, with a maximizer.
pub fn parametric_value<P: Subproblem + ?Sized>(
    p: &P,
    rho: f64,
    start: &Codeword,
    constraint: Option<&CommConstraint>,
) -> Result<(f64, Codeword), OptimizeError> {
    let tol = Tolerances::default();
    let mut flops = FlopCounter::default();
    let c = dinkelbach_matrix(p, rho, &mut flops);
    let shift = pd_shift(&c, &tol, &mut flops)?;
    let c_hat = c.shifted(shift);
    let u = cholesky_upper_with(&c_hat, &tol, &mut flops)?;
    let radius = c_hat.quad_form(&start.to_complex()).max(0.0).sqrt();
    let out = match constraint {
        None => ss_with(&u, radius, p.grid(), start, &mut NoObserver)?,
        Some(cc) => css_with(&u, &cc.factor, radius, cc.c_hat_sq, p.grid(), start, &mut NoObserver)?,
    };
    let x = out.codeword.to_complex();
    let value = p.numerator().quad_form(&x) - rho * p.denominator().quad_form(&x);
    Ok((value, out.codeword))
}

/// Everything needed to score a codeword pair at one sensing direction.
#[derive(Debug, Clone, Copy)]
pub struct SensingContext<'a> {
    pub h_si: &'a ComplexMatrix,
    pub radio: &'a RadioConfig,
    pub grid: PhaseGrid,
    pub theta: f64,
    /// Worst-case echo amplitude `|α_θ|`.
    pub alpha: f64,
}

impl SensingContext<'_> {
    pub fn sinr_linear(&self, w: &Codeword, v: &Codeword) -> f64 {
        sinr_linear(&w.to_complex(), &v.to_complex(), self.alpha, self.theta, self.h_si, self.radio)
    }

    pub fn sinr_db(&self, w: &Codeword, v: &Codeword) -> f64 {
        linear_to_db(self.sinr_linear(w, v))
    }

    /// Hard-quantized steering codeword with `len` elements.
    pub fn steering_codeword(&self, theta: f64, len: usize) -> Codeword {
        Codeword::quantize(&steering(theta, len), self.grid)
    }
}

/// Which codeword the alternation updates first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartOrder {
    /// Start from the TX codeword and update the RX codeword first.
    #[default]
    TxFirst,
    /// Start from the RX codeword and update the TX codeword first.
    RxFirst,
    /// Run both orders and keep the one with the higher final SINR; ties
    /// go to [`StartOrder::TxFirst`].
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig {
    pub max_rounds: usize,
    /// Stop when a round improves the linear SINR by less than this fraction.
    pub tol: f64,
    pub fp: FpConfig,
    pub order: StartOrder,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            max_rounds: 10,
            tol: 1e-6,
            fp: FpConfig::default(),
            order: StartOrder::TxFirst,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointResult {
    /// Order that produced this result, never [`StartOrder::Best`].
    pub order: StartOrder,
    pub rx: Codeword,
    pub tx: Codeword,
    pub sinr_db: f64,
    pub outer_rounds: usize,
    /// SINR in dB after each completed round.
    pub per_round_sinr: Vec<f64>,
    /// Whether the TX codeword met the constraint after each round.
    pub per_round_feasible: Vec<bool>,
    /// Dinkelbach iterations summed over all half-steps.
    pub fp_iterations: usize,
    /// Work of every run performed, including a discarded order under
    /// [`StartOrder::Best`].
    pub flops: FlopCounter,
}

/// Alternating FP-SS / FP-CSS. `v_init` must satisfy the constraint.
pub fn joint(
    ctx: &SensingContext<'_>,
    cc: &CommConstraint,
    w_init: &Codeword,
    v_init: &Codeword,
    cfg: &JointConfig,
) -> Result<JointResult, OptimizeError> {
    match cfg.order {
        StartOrder::Best => {
            let tx = joint_ordered(ctx, cc, w_init, v_init, cfg, StartOrder::TxFirst)?;
            let rx = joint_ordered(ctx, cc, w_init, v_init, cfg, StartOrder::RxFirst)?;
            let flops = tx.flops + rx.flops;
            let mut best = if rx.sinr_db > tx.sinr_db { rx } else { tx };
            best.flops = flops;
            Ok(best)
        }
        order => joint_ordered(ctx, cc, w_init, v_init, cfg, order),
    }
}

fn joint_ordered(
    ctx: &SensingContext<'_>,
    cc: &CommConstraint,
    w_init: &Codeword,
    v_init: &Codeword,
    cfg: &JointConfig,
    order: StartOrder,
) -> Result<JointResult, OptimizeError> {
    if !cc.is_satisfied(v_init) {
        return Err(OptimizeError::InfeasibleConstraint {
            gain: cc.gain(&v_init.to_complex()),
            required: cc.gain_threshold * cc.gain_threshold,
        });
    }
    let mut w = w_init.clone();
    let mut v = v_init.clone();
    let mut flops = FlopCounter::default();
    let mut fp_iterations = 0;
    let mut per_round_sinr = Vec::new();
    let mut per_round_feasible = Vec::new();
    let mut prev = ctx.sinr_linear(&w, &v);

    let rx_step = |w: &mut Codeword, v: &Codeword, flops: &mut FlopCounter, its: &mut usize| -> Result<(), OptimizeError> {
        let p = build_rx(ctx.theta, v, ctx.h_si, ctx.radio, ctx.grid)?;
        let out = fp_ss(&p, w, &cfg.fp)?;
        *flops += out.trace.flops;
        *its += out.trace.iterations;
        *w = out.codeword;
        Ok(())
    };
    let tx_step = |w: &Codeword, v: &mut Codeword, flops: &mut FlopCounter, its: &mut usize| -> Result<(), OptimizeError> {
        let p = build_tx(ctx.theta, w, ctx.h_si, ctx.radio, ctx.grid)?;
        let out = fp_css(&p, cc, v, &cfg.fp)?;
        *flops += out.trace.flops;
        *its += out.trace.iterations;
        *v = out.codeword;
        Ok(())
    };

    for round in 1..=cfg.max_rounds {
        match order {
            StartOrder::TxFirst | StartOrder::Best => {
                rx_step(&mut w, &v, &mut flops, &mut fp_iterations)?;
                tx_step(&w, &mut v, &mut flops, &mut fp_iterations)?;
            }
            StartOrder::RxFirst => {
                tx_step(&w, &mut v, &mut flops, &mut fp_iterations)?;
                rx_step(&mut w, &v, &mut flops, &mut fp_iterations)?;
            }
        }
        let s = ctx.sinr_linear(&w, &v);
        per_round_sinr.push(linear_to_db(s));
        per_round_feasible.push(cc.is_satisfied(&v));
        let improved = s - prev;
        prev = prev.max(s);
        if round > 1 && improved < cfg.tol * s.abs() {
            break;
        }
    }
    Ok(JointResult {
        order,
        sinr_db: ctx.sinr_db(&w, &v),
        outer_rounds: per_round_sinr.len(),
        rx: w,
        tx: v,
        per_round_sinr,
        per_round_feasible,
        fp_iterations,
        flops,
    })
}

/// MVDR beamformer `G⁻¹b / (bᴴG⁻¹b)`, forced to constant modulus and
/// hard-quantized to the grid with the last phase pinned.
pub fn mvdr_cm_hq(p: &RxSubproblem) -> Result<Codeword, OptimizeError> {
    Ok(mvdr_cm_hq_with(p, &mut FlopCounter::default())?)
}

pub fn mvdr_cm_hq_with(p: &RxSubproblem, flops: &mut FlopCounter) -> Result<Codeword, OptimizeError> {
    let n = p.b.len() as u64;
    let x = solve_hermitian_with(&p.denominator, &p.b, &Tolerances::default(), flops)?;
    let norm = inner(&p.b, &x).re;
    flops.cmul(n);
    flops.cadd(n.saturating_sub(1));
    flops.real(2 * n);
    let w: Vec<Complex64> = x.iter().map(|z| z / norm).collect();
    Ok(Codeword::quantize(&w, p.grid))
}

/// Unconstrained bound `a_effᴴ R_eff⁻¹ a_eff` on the objective
/// `|wᴴa_r a_tᴴv|² / (|wᴴH_SI v|² + Nσ_z²/P_t)` over all `w, v` with
/// `‖w‖² = N`, `‖v‖² = M`. Multiply by `|α_θ|²` for an SINR bound.
pub fn effective_mvdr_bound(theta: f64, h_si: &ComplexMatrix, radio: &RadioConfig) -> f64 {
    let (n, m) = (h_si.rows(), h_si.cols());
    let a = vectorize(&ComplexMatrix::outer(&steering(theta, n), &steering(theta, m)));
    let h = vectorize(h_si);
    let lambda = radio.noise_per_element_w(n) / (m as f64 * radio.tx_power_w());
    // R_eff = hhᴴ + λI inverted in closed form; the difference
    // ‖a‖² − |hᴴa|²/(λ + ‖h‖²) is rearranged to avoid cancellation.
    let aa: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let hh: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if hh == 0.0 {
        return aa / lambda;
    }
    let cos_sq = (inner(&h, &a).norm_sqr() / (aa * hh)).min(1.0);
    aa * ((1.0 - cos_sq) + cos_sq * lambda / (lambda + hh)) / lambda
}

/// Cost of [`effective_mvdr_bound`].
pub fn effective_mvdr_flops(n: usize, m: usize) -> FlopCounter {
    let nm = (n * m) as u64;
    FlopCounter::new(2 * nm, nm, 4 * nm + 12)
}

/// Effective-MVDR bound expressed as an SINR in dB.
pub fn effective_mvdr_sinr_db(theta: f64, h_si: &ComplexMatrix, radio: &RadioConfig, alpha: f64) -> f64 {
    linear_to_db(alpha * alpha * effective_mvdr_bound(theta, h_si, radio))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsOutcome {
    pub codeword: Codeword,
    pub quotient: f64,
    pub candidates: u64,
    /// Candidates meeting the constraint (all of them when unconstrained).
    pub feasible: u64,
    pub flops: FlopCounter,
}

/// Number of codewords of length `len` on `grid`, saturating.
pub fn codebook_size(len: usize, grid: PhaseGrid) -> u64 {
    (grid.size() as u64).saturating_pow(len.saturating_sub(1) as u32)
}

/// Cost of scoring one candidate in [`exhaustive`].
pub fn es_candidate_flops(len: usize, constrained: bool) -> FlopCounter {
    let n = len as u64;
    let base = quotient_flops(n) + FlopCounter::new(0, 0, 1);
    if constrained {
        base + FlopCounter::inner_product_sq(n) + FlopCounter::new(0, 0, 1)
    } else {
        base
    }
}

/// Analytic FLOP count of a joint exhaustive search over RX and TX
/// codebooks: per pair, `wᴴ(a_r a_tᴴ)v` and `wᴴH_SI v`, the ratio, and the
/// constraint check on `v`.
pub fn joint_es_flops(n: usize, m: usize, grid: PhaseGrid) -> f64 {
    let k = grid.size() as f64;
    let pairs = k.powi(n as i32 - 1) * k.powi(m as i32 - 1);
    let (n, m) = (n as u64, m as u64);
    let per_pair = FlopCounter::new(2 * (n * m + n), 2 * (n * (m - 1) + n - 1), 2 * 3 + 4)
        + FlopCounter::inner_product_sq(m)
        + FlopCounter::new(0, 0, 1);
    pairs * per_pair.total()
}

/// Exhaustive maximization of the Rayleigh quotient, optionally under the
/// communication constraint. Ties keep the lexicographically smallest
/// index vector.
pub fn exhaustive<P: Subproblem + Sync + ?Sized>(
    p: &P,
    cc: Option<&CommConstraint>,
    cap: u64,
) -> Result<EsOutcome, OptimizeError> {
    let len = p.dim();
    let grid = p.grid();
    let k = grid.size();
    let candidates = codebook_size(len, grid);
    if candidates > cap {
        return Err(OptimizeError::TooLarge { candidates, cap });
    }
    let phasors = grid.phasors();
    let free = len - 1;
    let threshold = cc.map(|c| c.gain_threshold * c.gain_threshold - crate::problem::FEASIBILITY_SLACK);

    // Chunks by the first free index keep lexicographic order across threads.
    let chunk = |first: Option<usize>| -> (Option<(Vec<usize>, f64)>, u64) {
        let inner_count = if free == 0 { 1 } else { k.pow(free as u32 - 1) };
        let mut idx = vec![0usize; len];
        let mut x = vec![Complex64::new(1.0, 0.0); len];
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut feasible = 0;
        for t in 0..inner_count {
            if let Some(f) = first {
                idx[0] = f;
            }
            let mut rem = t;
            for pos in (1..free).rev() {
                idx[pos] = rem % k;
                rem /= k;
            }
            for (xi, &ii) in x.iter_mut().zip(&idx) {
                *xi = phasors[ii];
            }
            // Every candidate is scored, matching `es_candidate_flops`.
            let q = p.numerator().quad_form(&x) / p.denominator().quad_form(&x);
            if let (Some(c), Some(th)) = (cc, threshold) {
                if c.gain(&x) < th {
                    continue;
                }
            }
            feasible += 1;
            if best.as_ref().map_or(true, |(_, b)| q > *b) {
                best = Some((idx.clone(), q));
            }
        }
        (best, feasible)
    };

    let parts: Vec<(Option<(Vec<usize>, f64)>, u64)> = if free == 0 {
        vec![chunk(None)]
    } else {
        (0..k).into_par_iter().map(|f| chunk(Some(f))).collect()
    };
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut feasible = 0;
    for (b, f) in parts {
        feasible += f;
        if let Some((i, q)) = b {
            if best.as_ref().map_or(true, |(_, bq)| q > *bq) {
                best = Some((i, q));
            }
        }
    }
    let flops = es_candidate_flops(len, cc.is_some()).times(candidates);
    match best {
        Some((indices, quotient)) => Ok(EsOutcome {
            codeword: Codeword::new(indices, grid).expect("enumerated codewords are pinned"),
            quotient,
            candidates,
            feasible,
            flops,
        }),
        None => Err(OptimizeError::EmptyFeasibleSet {
            required: threshold.unwrap_or(0.0),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{si_channel, DeviceGeometry, Point2};
    use crate::numerics::solve_hermitian;
    use crate::problem::{build_comm_constraint, QuotientPair};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_pd(rng: &mut ChaCha8Rng, n: usize, load: f64) -> HermitianMatrix {
        let m = ComplexMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        HermitianMatrix::gram(&m).shifted(load)
    }

    fn random_pair(rng: &mut ChaCha8Rng, n: usize, bits: u32) -> QuotientPair {
        let b: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        QuotientPair {
            numerator: HermitianMatrix::outer(&b),
            denominator: random_pd(rng, n, 0.1),
            grid: PhaseGrid::new(bits).unwrap(),
        }
    }

    fn scenario_a() -> (ComplexMatrix, RadioConfig) {
        let radio = RadioConfig::mmwave_default();
        let sp = radio.wavelength() / 2.0;
        let geom = DeviceGeometry {
            tx_positions: DeviceGeometry::ula(Point2::new(0.0, 0.075), (1.0, 0.0), 4, sp),
            rx_positions: DeviceGeometry::ula(Point2::new(0.0, 0.0), (1.0, 0.0), 4, sp),
        };
        (si_channel(&geom, &radio).unwrap(), radio)
    }

    #[test]
    fn fp_ss_matches_exhaustive_on_synthetic_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.gen_range(2..=5);
            let bits = rng.gen_range(1..=3);
            let p = random_pair(&mut rng, n, bits);
            let out = fp_ss(&p, &Codeword::zeros(n, p.grid), &FpConfig::default()).unwrap();
            assert!(out.trace.converged);
            let es = exhaustive(&p, None, ES_CAP).unwrap();
            assert!((out.quotient - es.quotient).abs() <= 1e-9 * es.quotient, "{} vs {}", out.quotient, es.quotient);
            assert!(out.trace.rho_values.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn equal_matrices_converge_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_pd(&mut rng, 4, 0.5);
        let p = QuotientPair {
            numerator: g.clone(),
            denominator: g,
            grid: PhaseGrid::new(2).unwrap(),
        };
        let init = Codeword::new(vec![1, 3, 2, 0], p.grid).unwrap();
        let out = fp_ss(&p, &init, &FpConfig::default()).unwrap();
        assert!(out.trace.converged);
        assert!((out.quotient - 1.0).abs() < 1e-12);
        assert!(out.trace.iterations <= 2);

        let es = exhaustive(&p, None, ES_CAP).unwrap();
        assert_eq!(es.codeword, Codeword::zeros(4, p.grid));
        assert_eq!(es.quotient, 1.0);
    }

    #[test]
    fn zero_quotient_start_maximizes_numerator() {
        let grid = PhaseGrid::new(1).unwrap();
        // b ⟂ initial codeword (1, 1)
        let b = vec![c(1.0, 0.0), c(-1.0, 0.0)];
        let p = QuotientPair {
            numerator: HermitianMatrix::outer(&b),
            denominator: HermitianMatrix::identity(2),
            grid,
        };
        let out = fp_ss(&p, &Codeword::zeros(2, grid), &FpConfig::default()).unwrap();
        assert_eq!(out.trace.rho_values[0], 0.0);
        assert_eq!(out.codeword.indices(), &[1, 0]);
        assert!((out.quotient - 2.0).abs() < 1e-12);
    }

    #[test]
    fn max_iterations_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_pair(&mut rng, 5, 3);
        let cfg = FpConfig {
            t_max: 1,
            ..FpConfig::default()
        };
        let out = fp_ss(&p, &Codeword::zeros(5, p.grid), &cfg).unwrap();
        if !out.trace.converged {
            assert!(matches!(out.ensure_converged(), Err(OptimizeError::MaxIterations { iterations: 1 })));
        }
    }

    #[test]
    fn fp_css_matches_constrained_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let m = rng.gen_range(2..=5);
            let bits = rng.gen_range(1..=3);
            let p = random_pair(&mut rng, m, bits);
            let theta_c = rng.gen_range(-1.5..1.5);
            let cc = build_comm_constraint(theta_c, rng.gen_range(0.0..0.8 * m as f64), m).unwrap();
            let start = Codeword::quantize(&steering(theta_c, m), p.grid);
            if !cc.is_satisfied(&start) {
                continue;
            }
            let out = fp_css(&p, &cc, &start, &FpConfig::default()).unwrap();
            let es = exhaustive(&p, Some(&cc), ES_CAP).unwrap();
            assert!(cc.is_satisfied(&out.codeword));
            assert!((out.quotient - es.quotient).abs() <= 1e-9 * es.quotient);
        }
    }

    #[test]
    fn fp_css_vacuous_constraint_matches_fp_ss() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let m = rng.gen_range(2..=5);
            let p = random_pair(&mut rng, m, 2);
            let cc = build_comm_constraint(0.2, 0.0, m).unwrap();
            let v0 = Codeword::zeros(m, p.grid);
            let a = fp_ss(&p, &v0, &FpConfig::default()).unwrap();
            let b = fp_css(&p, &cc, &v0, &FpConfig::default()).unwrap();
            assert_eq!(a.codeword, b.codeword);
        }
    }

    #[test]
    fn fp_css_rejects_infeasible_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = random_pair(&mut rng, 4, 2);
        let cc = build_comm_constraint(0.0, 4.0, 4).unwrap();
        let v0 = Codeword::new(vec![2, 0, 2, 0], p.grid).unwrap();
        assert!(matches!(
            fp_css(&p, &cc, &v0, &FpConfig::default()),
            Err(OptimizeError::InfeasibleConstraint { .. })
        ));
    }

    #[test]
    fn parametric_value_vanishes_at_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let p = random_pair(&mut rng, 4, 2);
            let out = fp_ss(&p, &Codeword::zeros(4, p.grid), &FpConfig::default()).unwrap();
            let (f, _) = parametric_value(&p, out.quotient, &out.codeword, None).unwrap();
            assert!(f.abs() <= 1e-9 * (1.0 + out.quotient) * p.denominator.frobenius_norm());
            let (lo, _) = parametric_value(&p, 0.9 * out.quotient, &out.codeword, None).unwrap();
            let (hi, _) = parametric_value(&p, 1.1 * out.quotient, &out.codeword, None).unwrap();
            assert!(lo > hi);
        }
    }

    #[test]
    fn mvdr_identity_covariance_is_matched_filter() {
        let grid = PhaseGrid::new(3).unwrap();
        let target = Codeword::new(vec![5, 2, 7, 0], grid).unwrap();
        let b: Vec<Complex64> = target.to_complex().iter().map(|z| z * c(0.0, 2.0)).collect();
        let p = RxSubproblem {
            numerator: HermitianMatrix::outer(&b),
            denominator: HermitianMatrix::identity(4),
            b: b.clone(),
            g: vec![c(0.0, 0.0); 4],
            loading: 1.0,
            theta: 0.0,
            grid,
        };
        assert_eq!(mvdr_cm_hq(&p).unwrap(), target);
    }

    #[test]
    fn mvdr_never_beats_fp_ss() {
        let (h, radio) = scenario_a();
        let grid = PhaseGrid::new(3).unwrap();
        let v0 = Codeword::quantize(&steering(0.7, 4), grid);
        for deg in (-90..=90).step_by(15) {
            let theta = (deg as f64).to_radians();
            let p = build_rx(theta, &v0, &h, &radio, grid).unwrap();
            let fp = fp_ss(&p, &Codeword::quantize(&steering(theta, 4), grid), &FpConfig::default()).unwrap();
            let mv = mvdr_cm_hq(&p).unwrap();
            assert!(p.quotient(&mv) <= fp.quotient * (1.0 + 1e-9));
        }
    }

    #[test]
    fn effective_mvdr_closed_forms() {
        let radio = RadioConfig::mmwave_default();
        let (n, m) = (3, 4);
        let bound = effective_mvdr_bound(0.3, &ComplexMatrix::zeros(n, m), &radio);
        let sigma = radio.noise_per_element_w(n);
        let expect = (n * m) as f64 * m as f64 * radio.tx_power_w() / sigma;
        assert!((bound - expect).abs() < 1e-12 * expect);

        let (h, radio) = scenario_a();
        let b1 = effective_mvdr_bound(0.4, &h, &radio);
        let b2 = effective_mvdr_bound(0.4, &h.scale(Complex64::from_polar(1.0, 1.1)), &radio);
        assert!((b1 - b2).abs() < 1e-9 * b1);
    }

    #[test]
    fn effective_mvdr_matches_linear_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut radio = RadioConfig::mmwave_default();
        radio.noise_power_dbm = 10.0;
        for _ in 0..10 {
            let h = ComplexMatrix::from_fn(3, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let theta = rng.gen_range(-1.5..1.5);
            let a = vectorize(&ComplexMatrix::outer(&steering(theta, 3), &steering(theta, 2)));
            let hv = vectorize(&h);
            let lambda = radio.noise_per_element_w(3) / (2.0 * radio.tx_power_w());
            let r = HermitianMatrix::outer(&hv).shifted(lambda);
            let x = solve_hermitian(&r, &a).unwrap();
            let direct = inner(&a, &x).re;
            let bound = effective_mvdr_bound(theta, &h, &radio);
            assert!((bound - direct).abs() < 1e-9 * direct);
        }
    }

    #[test]
    fn exhaustive_two_codewords_and_cap() {
        let grid = PhaseGrid::new(1).unwrap();
        let b = vec![c(1.0, 0.0), c(-1.0, 0.0)];
        let p = QuotientPair {
            numerator: HermitianMatrix::outer(&b),
            denominator: HermitianMatrix::identity(2),
            grid,
        };
        let es = exhaustive(&p, None, ES_CAP).unwrap();
        assert_eq!(es.candidates, 2);
        assert_eq!(es.codeword.indices(), &[1, 0]);
        let big = QuotientPair {
            numerator: HermitianMatrix::identity(8),
            denominator: HermitianMatrix::identity(8),
            grid: PhaseGrid::new(4).unwrap(),
        };
        assert!(matches!(exhaustive(&big, None, ES_CAP), Err(OptimizeError::TooLarge { .. })));
    }

    #[test]
    fn joint_without_si_reaches_closed_form() {
        let radio = RadioConfig::mmwave_default();
        let grid = PhaseGrid::new(3).unwrap();
        let h = ComplexMatrix::zeros(4, 4);
        let theta = 0.0;
        let ctx = SensingContext {
            h_si: &h,
            radio: &radio,
            grid,
            theta,
            alpha: 1e-5,
        };
        let cc = build_comm_constraint(0.0, 2.0, 4).unwrap();
        let v0 = ctx.steering_codeword(0.0, 4);
        let w0 = Codeword::new(vec![3, 1, 2, 0], grid).unwrap();
        let res = joint(&ctx, &cc, &w0, &v0, &JointConfig::default()).unwrap();
        let expect = radio.tx_power_w() * 1e-10 * 256.0 / radio.total_noise_w(4);
        assert!((res.sinr_db - linear_to_db(expect)).abs() < 1e-9);
        assert!(res.per_round_sinr.windows(2).all(|w| w[1] >= w[0]));
        assert!(res.outer_rounds <= 2);
    }

    #[test]
    fn joint_sandwich_on_small_instance() {
        let (h, radio) = scenario_a();
        let grid = PhaseGrid::new(2).unwrap();
        for deg in [-60.0f64, -20.0, 10.0, 50.0] {
            let theta = deg.to_radians();
            let ctx = SensingContext {
                h_si: &h,
                radio: &radio,
                grid,
                theta,
                alpha: 1e-5,
            };
            let theta_c = 45f64.to_radians();
            let cc = build_comm_constraint(theta_c, 2.0, 4).unwrap();
            let v0 = ctx.steering_codeword(theta_c, 4);
            let w0 = ctx.steering_codeword(theta, 4);
            let res = joint(&ctx, &cc, &w0, &v0, &JointConfig::default()).unwrap();
            let rx = fp_ss(&build_rx(theta, &v0, &h, &radio, grid).unwrap(), &w0, &FpConfig::default()).unwrap();
            let fp_ss_db = ctx.sinr_db(&rx.codeword, &v0);
            assert!(res.sinr_db >= fp_ss_db - 1e-9);
            let bound = effective_mvdr_sinr_db(theta, &h, &radio, 1e-5);
            assert!(res.sinr_db <= bound + 1e-9);
            assert!(res.per_round_feasible.iter().all(|&f| f));
        }
    }
}
