//! Seeded randomized property suites behind the `check` subcommand.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{si_channel, steering, DeviceGeometry, Point2, RadioConfig};
use crate::numerics::{ComplexMatrix, UpperTriangular};
use crate::optimize::{exhaustive, fp_css, fp_ss, parametric_value, FpConfig, ES_CAP};
use crate::phase_grid::{Codeword, PhaseGrid};
use crate::problem::{build_comm_constraint, build_rx, build_tx, RxSubproblem, Subproblem};
use crate::search::{
    allowable_range_sq, css_with, enumerate, intersect_ranges, ss_with, PruneEvent, PruneReason, SearchObserver,
};

/// A random device: two half-wavelength ULAs at random positions and
/// orientations inside a 15 cm × 7.5 cm frame, never closer than one
/// element spacing.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub geometry: DeviceGeometry,
    pub radio: RadioConfig,
    pub h_si: ComplexMatrix,
    pub grid: PhaseGrid,
    pub theta: f64,
    pub theta_c: f64,
}

impl RandomInstance {
    pub fn draw(rng: &mut impl Rng, n: usize, m: usize, bits: u32) -> Self {
        let radio = RadioConfig::mmwave_default();
        let sp = radio.wavelength() / 2.0;
        let geometry = loop {
            let a1: f64 = rng.gen_range(0.0..PI);
            let a2: f64 = rng.gen_range(0.0..PI);
            let tx = Point2::new(rng.gen_range(-0.075..0.075), rng.gen_range(0.0..0.075));
            let rx = Point2::new(rng.gen_range(-0.075..0.075), rng.gen_range(0.0..0.075));
            let g = DeviceGeometry {
                tx_positions: DeviceGeometry::ula(tx, (a1.cos(), a1.sin()), m, sp),
                rx_positions: DeviceGeometry::ula(rx, (a2.cos(), a2.sin()), n, sp),
            };
            let dmin = g.distances().into_iter().flatten().fold(f64::INFINITY, f64::min);
            if dmin > sp {
                break g;
            }
        };
        let h_si = si_channel(&geometry, &radio).expect("separated arrays");
        Self {
            h_si,
            geometry,
            radio,
            grid: PhaseGrid::new(bits).expect("bits in range"),
            theta: rng.gen_range(-1.5..1.5),
            theta_c: rng.gen_range(-1.5..1.5),
        }
    }

    /// RX subproblem with `v` fixed to the quantized steering towards `θ_c`.
    pub fn rx(&self) -> RxSubproblem {
        let v0 = Codeword::quantize(&steering(self.theta_c, self.geometry.n_tx()), self.grid);
        build_rx(self.theta, &v0, &self.h_si, &self.radio, self.grid).expect("dimensions agree")
    }

    pub fn w0(&self) -> Codeword {
        Codeword::quantize(&steering(self.theta, self.geometry.n_rx()), self.grid)
    }

    pub fn v0(&self) -> Codeword {
        Codeword::quantize(&steering(self.theta_c, self.geometry.n_tx()), self.grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub checked: usize,
    pub failures: Vec<String>,
    pub note: String,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {} ({} cases", self.name, self.checked)?;
        if !self.note.is_empty() {
            write!(f, ", {}", self.note)?;
        }
        write!(f, ")")?;
        for x in self.failures.iter().take(5) {
            write!(f, "\n    {x}")?;
        }
        if self.failures.len() > 5 {
            write!(f, "\n    … {} more", self.failures.len() - 5)?;
        }
        Ok(())
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// FP-SS against exhaustive search on random physical instances.
pub fn rx_optimality(seed: u64, count: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<RandomInstance> = (0..count)
        .map(|_| {
            let n = rng.gen_range(3..=6);
            let m = rng.gen_range(3..=6);
            let bits = rng.gen_range(1..=3);
            RandomInstance::draw(&mut rng, n, m, bits)
        })
        .collect();
    let failures = cases
        .par_iter()
        .enumerate()
        .filter_map(|(k, c)| {
            let p = c.rx();
            let fp = match fp_ss(&p, &c.w0(), &FpConfig::default()) {
                Ok(o) => o,
                Err(e) => return Some(format!("case {k}: {e}")),
            };
            let es = exhaustive(&p, None, ES_CAP).ok()?;
            let gap = rel_gap(fp.quotient, es.quotient);
            (gap > 1e-9).then(|| format!("case {k}: fp-ss {} vs es {} (rel {gap:.2e})", fp.quotient, es.quotient))
        })
        .collect();
    CheckOutcome {
        name: "rx-optimality",
        checked: count,
        failures,
        note: String::new(),
    }
}

/// FP-CSS against constrained exhaustive search; `c` is drawn so that the
/// quantized steering codeword stays feasible.
pub fn tx_optimality(seed: u64, count: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(RandomInstance, f64)> = (0..count)
        .map(|_| {
            let n = rng.gen_range(3..=6);
            let m = rng.gen_range(3..=6);
            let bits = rng.gen_range(1..=3);
            let inst = RandomInstance::draw(&mut rng, n, m, bits);
            let gain = crate::problem::inner(&inst.v0().to_complex(), &steering(inst.theta_c, m)).norm();
            let c = rng.gen_range(0.0..=(0.8 * m as f64).min(gain));
            (inst, c)
        })
        .collect();
    let failures = cases
        .par_iter()
        .enumerate()
        .filter_map(|(k, (inst, c))| {
            let m = inst.geometry.n_tx();
            let cc = build_comm_constraint(inst.theta_c, *c, m).ok()?;
            let p = build_tx(inst.theta, &inst.w0(), &inst.h_si, &inst.radio, inst.grid).ok()?;
            let fp = match fp_css(&p, &cc, &inst.v0(), &FpConfig::default()) {
                Ok(o) => o,
                Err(e) => return Some(format!("case {k}: {e}")),
            };
            let gain = crate::problem::inner(&fp.codeword.to_complex(), &steering(inst.theta_c, m)).norm_sqr();
            if gain < c * c - 1e-9 {
                return Some(format!("case {k}: output gain {gain} below c^2 = {}", c * c));
            }
            let es = exhaustive(&p, Some(&cc), ES_CAP).ok()?;
            let gap = rel_gap(fp.quotient, es.quotient);
            (gap > 1e-9).then(|| format!("case {k}: fp-css {} vs es {} (rel {gap:.2e})", fp.quotient, es.quotient))
        })
        .collect();
    CheckOutcome {
        name: "tx-optimality",
        checked: count,
        failures,
        note: String::new(),
    }
}

/// Monotone `ρ`, root condition at `ρ*`, sign property on random probes and
/// iteration counts.
pub fn dinkelbach_properties(seed: u64, count: usize, probes: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(RandomInstance, Vec<Codeword>)> = (0..count)
        .map(|_| {
            let n = rng.gen_range(3..=6);
            let m = rng.gen_range(3..=6);
            let bits = rng.gen_range(1..=3);
            let inst = RandomInstance::draw(&mut rng, n, m, bits);
            let k = inst.grid.size();
            let probes = (0..probes)
                .map(|_| {
                    let free: Vec<usize> = (0..n - 1).map(|_| rng.gen_range(0..k)).collect();
                    Codeword::from_free(&free, inst.grid).expect("indices in range")
                })
                .collect();
            (inst, probes)
        })
        .collect();
    let results: Vec<(Vec<String>, usize)> = cases
        .par_iter()
        .enumerate()
        .map(|(k, (inst, probes))| {
            let mut fails = Vec::new();
            let p = inst.rx();
            let out = match fp_ss(&p, &inst.w0(), &FpConfig::default()) {
                Ok(o) => o,
                Err(e) => return (vec![format!("case {k}: {e}")], usize::MAX),
            };
            let t = &out.trace;
            if t.rho_values.windows(2).any(|w| w[1] < w[0]) {
                fails.push(format!("case {k}: rho decreased {:?}", t.rho_values));
            }
            if !t.converged {
                fails.push(format!("case {k}: no convergence in {} iterations", t.iterations));
            }
            let rho = out.quotient;
            let g_norm = p.denominator().frobenius_norm();
            match parametric_value(&p, rho, &out.codeword, None) {
                Ok((f, _)) if f.abs() > 1e-9 * (1.0 + rho) * g_norm => {
                    fails.push(format!("case {k}: F(rho*) = {f:e}"))
                }
                Err(e) => fails.push(format!("case {k}: {e}")),
                _ => {}
            }
            for w in probes {
                let r = p.quotient(w);
                match parametric_value(&p, r, w, None) {
                    Ok((f, _)) if f < -1e-9 => fails.push(format!("case {k}: F(rayleigh(w')) = {f:e}")),
                    Err(e) => fails.push(format!("case {k}: {e}")),
                    _ => {}
                }
            }
            (fails, t.iterations)
        })
        .collect();
    let within10 = results.iter().filter(|r| r.1 <= 10).count();
    let mut failures: Vec<String> = results.into_iter().flat_map(|r| r.0).collect();
    if (within10 as f64) < 0.95 * count as f64 {
        failures.push(format!("only {within10}/{count} runs converged within 10 iterations"));
    }
    CheckOutcome {
        name: "dinkelbach",
        checked: count,
        failures,
        note: format!("{within10}/{count} within 10 iterations"),
    }
}

/// `Σ_{j ≥ level} |Σ_{i ≥ j} U_ji x_i|²` for the elements fixed at or above
/// `level`.
fn partial_cost(u: &UpperTriangular, x: &[Complex64], level: usize) -> f64 {
    let l = u.dim();
    (level..l)
        .map(|j| (j..l).map(|i| u.get(j, i) * x[i]).sum::<Complex64>().norm_sqr())
        .sum()
}

#[derive(Default)]
struct Replay {
    leaves: Vec<(Vec<usize>, f64)>,
    events: Vec<(usize, Vec<usize>, usize, PruneReason, f64, Option<f64>)>,
}

impl SearchObserver for Replay {
    const WANTS_PRUNES: bool = true;

    fn on_leaf(&mut self, indices: &[usize], cost: f64, _constraint: Option<f64>) {
        self.leaves.push((indices.to_vec(), cost));
    }

    fn on_prune(&mut self, e: &PruneEvent<'_>) {
        self.events.push((
            e.level,
            e.partial.to_vec(),
            e.excluded,
            e.reason,
            e.radius_sq,
            e.constraint_bound,
        ));
    }
}

fn all_codewords(len: usize, grid: PhaseGrid) -> Vec<Codeword> {
    let k = grid.size();
    (0..k.pow(len as u32 - 1))
        .map(|mut t| {
            let free: Vec<usize> = (0..len - 1)
                .map(|_| {
                    let i = t % k;
                    t /= k;
                    i
                })
                .collect();
            Codeword::from_free(&free, grid).expect("indices in range")
        })
        .collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Exhaustive leaf sets at infinite radius and replay of every prune at
/// a finite one, for SS and CSS.
pub fn pruning_soundness(seed: u64, count: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for k in 0..count {
        let n = rng.gen_range(2..=5);
        let bits = rng.gen_range(1..=2);
        let inst = RandomInstance::draw(&mut rng, n, n, bits);
        let grid = inst.grid;
        let p = inst.rx();
        let rho = p.quotient(&inst.w0()) * rng.gen_range(0.5..1.0);
        let c_mat = p.denominator().combine(rho, p.numerator(), -1.0);
        let shift = 2.0 * crate::numerics::min_eigenvalue(&c_mat).unwrap_or(0.0).abs() + 1e-6 * c_mat.frobenius_norm();
        let u = crate::numerics::cholesky_upper(&c_mat.shifted(shift)).expect("shifted matrix is PD");
        let book = all_codewords(n, grid);
        let a_c = steering(inst.theta_c, n);
        let best_gain = book
            .iter()
            .map(|w| crate::problem::inner(&w.to_complex(), &a_c).norm())
            .fold(0.0, f64::max);
        let c_thr = rng.gen_range(0.0..=(0.8 * n as f64).min(best_gain));
        let cc = build_comm_constraint(inst.theta_c, c_thr, n).expect("threshold below M");

        // Infinite radius: leaf cost multiset equals full enumeration.
        let mut rep = Replay::default();
        enumerate(&u, None, f64::INFINITY, grid, &mut rep);
        let full = sorted(book.iter().map(|w| u.norm_sqr_of(&w.to_complex())).collect());
        let got = sorted(rep.leaves.iter().map(|l| l.1).collect());
        if full.len() != got.len() || full.iter().zip(&got).any(|(a, b)| rel_gap(*b, *a) > 1e-12) {
            failures.push(format!("case {k}: ss leaf multiset differs from enumeration"));
        }
        let feasible = sorted(
            book.iter()
                .filter(|w| u_c_cost(&cc.factor, w) <= cc.c_hat_sq + crate::search::CONSTRAINT_SLACK)
                .map(|w| u.norm_sqr_of(&w.to_complex()))
                .collect(),
        );
        let mut rep = Replay::default();
        enumerate(&u, Some((&cc.factor, cc.c_hat_sq)), f64::INFINITY, grid, &mut rep);
        let got = sorted(rep.leaves.iter().map(|l| l.1).collect());
        if feasible.len() != got.len() || feasible.iter().zip(&got).any(|(a, b)| rel_gap(*b, *a) > 1e-12) {
            failures.push(format!("case {k}: css leaf multiset differs from constrained enumeration"));
        }

        // Finite radius: replay each prune against the radius in force.
        let start = book[rng.gen_range(0..book.len())].clone();
        let radius = u.norm_sqr_of(&start.to_complex()).sqrt();
        let mut rep = Replay::default();
        let _ = ss_with(&u, radius, grid, &start, &mut rep);
        failures.extend(replay(&u, None, grid, &rep, k, "ss"));
        let feasible_start = book
            .iter()
            .find(|w| cc.is_satisfied(w))
            .cloned()
            .expect("threshold admits the best-aligned codeword");
        let radius = u.norm_sqr_of(&feasible_start.to_complex()).sqrt();
        let mut rep = Replay::default();
        let _ = css_with(&u, &cc.factor, radius, cc.c_hat_sq, grid, &feasible_start, &mut rep);
        failures.extend(replay(&u, Some((&cc.factor, cc.c_hat_sq)), grid, &rep, k, "css"));
    }
    CheckOutcome {
        name: "pruning",
        checked: count,
        failures,
        note: String::new(),
    }
}

fn u_c_cost(uc: &UpperTriangular, w: &Codeword) -> f64 {
    uc.norm_sqr_of(&w.to_complex())
}

fn replay(
    u: &UpperTriangular,
    constraint: Option<(&UpperTriangular, f64)>,
    grid: PhaseGrid,
    rep: &Replay,
    case: usize,
    what: &str,
) -> Vec<String> {
    let mut out = Vec::new();
    let l = u.dim();
    for (level, partial, excluded, reason, radius_sq, bound) in &rep.events {
        let mut x = vec![Complex64::new(0.0, 0.0); l];
        for j in level + 1..l {
            x[j] = grid.phasor(partial[j]);
        }
        x[l - 1] = Complex64::new(1.0, 0.0);
        x[*level] = grid.phasor(*excluded);
        let obj = partial_cost(u, &x, *level);
        let obj_violated = obj >= radius_sq * (1.0 - 1e-9);
        let con_violated = match (constraint, bound) {
            (Some((uc, _)), Some(b)) => partial_cost(uc, &x, *level) >= b * (1.0 - 1e-9),
            _ => false,
        };
        let ok = match reason {
            PruneReason::Objective => obj_violated,
            PruneReason::Constraint => con_violated,
            PruneReason::OutsideRange => obj_violated || con_violated,
        };
        if !ok {
            out.push(format!(
                "case {case}: {what} pruned index {excluded} at level {level} ({reason:?}) inside the active bounds"
            ));
        }
    }
    out
}

fn range_oracle(w_hat: Complex64, r_sq: f64, u_nn: f64, grid: PhaseGrid) -> Vec<bool> {
    (0..grid.size())
        .map(|i| u_nn * u_nn * (grid.phasor(i) - w_hat).norm_sqr() <= r_sq)
        .collect()
}

/// Range intersection against brute-force filtering of every grid phase.
/// Instances whose boundary sits within 1e-9 of a grid point are redrawn.
pub fn range_intersection(seed: u64, count: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut draws = 0;
    let mut done = 0;
    while done < count {
        draws += 1;
        let grid = PhaseGrid::new(rng.gen_range(1..=6)).expect("bits in range");
        let draw = |rng: &mut ChaCha8Rng| {
            let w_hat = Complex64::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(-PI..PI));
            let u_nn: f64 = rng.gen_range(0.2..2.0);
            let r_sq = u_nn * u_nn * rng.gen_range(0.0..4.0f64).powi(2);
            (w_hat, r_sq, u_nn)
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let near_boundary = |(w, r, u): (Complex64, f64, f64)| {
            (0..grid.size()).any(|i| (u * u * (grid.phasor(i) - w).norm_sqr() - r).abs() < 1e-9 * r.max(1.0))
        };
        if near_boundary(a) || near_boundary(b) {
            continue;
        }
        done += 1;
        let ra = allowable_range_sq(a.0, a.1, a.2, grid);
        let rb = allowable_range_sq(b.0, b.1, b.2, grid);
        let mut got = intersect_ranges(ra, rb, grid);
        got.sort_unstable();
        let (oa, ob) = (range_oracle(a.0, a.1, a.2, grid), range_oracle(b.0, b.1, b.2, grid));
        let want: Vec<usize> = (0..grid.size()).filter(|&i| oa[i] && ob[i]).collect();
        if got != want {
            failures.push(format!("pair {done}: got {got:?}, want {want:?}"));
        }
    }
    CheckOutcome {
        name: "range-intersection",
        checked: count,
        failures,
        note: format!("{} near-boundary draws skipped", draws - count),
    }
}

/// Every suite at the given scale factor (1.0 = full sizes).
pub fn run_all(seed: u64, scale: f64) -> Vec<CheckOutcome> {
    let n = |full: usize| ((full as f64 * scale).round() as usize).max(1);
    vec![
        rx_optimality(seed, n(200)),
        tx_optimality(seed.wrapping_add(1), n(200)),
        dinkelbach_properties(seed.wrapping_add(2), n(500), 20),
        pruning_soundness(seed.wrapping_add(3), n(100)),
        range_intersection(seed.wrapping_add(4), n(10_000)),
    ]
}
