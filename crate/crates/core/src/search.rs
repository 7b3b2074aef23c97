//! Depth-first sphere searches over phase-quantized codewords.
//!
//! [`ss`] minimizes `‖U w‖²` over all codewords whose last phase is pinned
//! to zero. [`css`] adds a second quadratic constraint `‖U_c v‖² ≤ ĉ²` and
//! explores, at every level, only the intersection of the two allowable
//! phase ranges.
//!
//! Ranges are kept in integer grid-index units on the unwrapped line, so a
//! bound like `[−π/2, 3π/4]` on a 16-point grid is the index interval
//! `[−4, 6]`. Indices are reduced modulo the grid size only when a phase is
//! committed to a codeword.

use num_complex::Complex64;
use thiserror::Error;

use crate::flops::FlopCounter;
use crate::numerics::UpperTriangular;
use crate::phase_grid::{Codeword, PhaseGrid, RoundMode};

/// Relative slack applied to the objective radius before computing bounds.
pub const RADIUS_SLACK: f64 = 1e-12;
/// Factor by which the incumbent's own cost is inflated when seeding.
pub const INCUMBENT_INFLATION: f64 = 1e-9;
/// Absolute slack on the constraint bound `ĉ²`.
pub const CONSTRAINT_SLACK: f64 = 1e-9;

/// Real operations charged for one bound computation (norm, η, arccos,
/// argument, two roundings).
const RANGE_FLOPS: u64 = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("initial codeword violates the constraint: ‖U_c v‖² = {value} > ĉ² = {bound}")]
    InfeasibleConstraint { value: f64, bound: f64 },
    #[error("dimension mismatch: factor is {factor}, codeword has {codeword} entries")]
    DimensionMismatch { factor: usize, codeword: usize },
}

/// Set of admissible grid indices for one antenna element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRange {
    Empty,
    Full,
    /// Inclusive unwrapped index interval, narrower than the full grid.
    Interval { lo: i64, hi: i64 },
    /// Two disjoint inclusive intervals, enumerated in the stored order.
    Pair { first: (i64, i64), second: (i64, i64) },
}

impl PhaseRange {
    /// Interval from radian bounds, rounded inwards to the grid.
    pub fn from_radians(lo: f64, hi: f64, grid: PhaseGrid) -> Self {
        let lo = grid.round_index(lo, RoundMode::Ceil);
        let hi = grid.round_index(hi, RoundMode::Floor);
        Self::from_indices(lo, hi, grid.size())
    }

    fn from_indices(lo: i64, hi: i64, k: usize) -> Self {
        if lo > hi {
            PhaseRange::Empty
        } else if hi - lo + 1 >= k as i64 {
            PhaseRange::Full
        } else {
            PhaseRange::Interval { lo, hi }
        }
    }

    fn from_segments(segs: &[(i64, i64)], k: usize) -> Self {
        let mut kept = [(0, 0); 2];
        let mut count = 0;
        for &(l, h) in segs {
            if l <= h {
                assert!(count < 2, "at most two segments");
                kept[count] = (l, h);
                count += 1;
            }
        }
        match &kept[..count] {
            [] => PhaseRange::Empty,
            [(l, h)] => Self::from_indices(*l, *h, k),
            [a, b] => {
                if (a.1 - a.0 + 1) + (b.1 - b.0 + 1) >= k as i64 {
                    PhaseRange::Full
                } else {
                    PhaseRange::Pair { first: *a, second: *b }
                }
            }
            _ => unreachable!("at most two segments"),
        }
    }

    /// The unwrapped index segments, in enumeration order.
    pub fn segments(&self, k: usize) -> impl Iterator<Item = (i64, i64)> {
        let (a, b) = match *self {
            PhaseRange::Empty => (None, None),
            PhaseRange::Full => (Some((0, k as i64 - 1)), None),
            PhaseRange::Interval { lo, hi } => (Some((lo, hi)), None),
            PhaseRange::Pair { first, second } => (Some(first), Some(second)),
        };
        a.into_iter().chain(b)
    }

    /// Segment bounds in radians (exact grid multiples).
    pub fn bounds_rad(&self, grid: PhaseGrid) -> Vec<(f64, f64)> {
        let d = grid.step();
        self.segments(grid.size()).map(|(l, h)| (l as f64 * d, h as f64 * d)).collect()
    }

    /// Grid indices in `[0, size)`, in enumeration order.
    pub fn indices(&self, grid: PhaseGrid) -> Vec<usize> {
        self.segments(grid.size())
            .flat_map(|(l, h)| (l..=h).map(move |i| grid.wrap(i)))
            .collect()
    }

    pub fn contains(&self, index: usize, grid: PhaseGrid) -> bool {
        let k = grid.size() as i64;
        self.segments(grid.size())
            .any(|(l, h)| (index as i64 - l).rem_euclid(k) <= h - l)
    }

    pub fn count(&self, grid: PhaseGrid) -> usize {
        self.segments(grid.size()).map(|(l, h)| (h - l + 1) as usize).sum()
    }
}

/// Allowable phases for one element: `{φ ∈ D : u_nn²|e^{jφ} − ŵ|² ≤ r′²}`.
pub fn allowable_range(w_hat: Complex64, r_prime: f64, u_nn: f64, grid: PhaseGrid) -> PhaseRange {
    allowable_range_sq(w_hat, r_prime * r_prime, u_nn, grid)
}

/// As [`allowable_range`], taking the squared residual radius.
pub fn allowable_range_sq(w_hat: Complex64, r_prime_sq: f64, u_nn: f64, grid: PhaseGrid) -> PhaseRange {
    let target = r_prime_sq / (u_nn * u_nn);
    let m = w_hat.norm_sqr().sqrt();
    if m == 0.0 {
        // |p| = u_nn for every phase
        return if target >= 1.0 { PhaseRange::Full } else { PhaseRange::Empty };
    }
    let eta = (1.0 + m * m - target) / (2.0 * m);
    if eta > 1.0 {
        PhaseRange::Empty
    } else if eta < -1.0 || eta.is_nan() {
        PhaseRange::Full
    } else {
        let phi = w_hat.arg();
        let half = eta.acos();
        PhaseRange::from_radians(phi - half, phi + half, grid)
    }
}

fn normalize(r: PhaseRange, k: i64) -> Option<(i64, i64)> {
    match r {
        PhaseRange::Empty => None,
        PhaseRange::Full => Some((0, k - 1)),
        PhaseRange::Interval { lo, hi } => {
            let l = lo.rem_euclid(k);
            Some((l, hi + (l - lo)))
        }
        PhaseRange::Pair { .. } => unreachable!("pairs are handled before normalization"),
    }
}

/// Intersection of two allowable ranges as one or two index intervals.
///
/// Both ranges are shifted so that their lower bounds lie in `[0, K)`. An
/// interval whose upper bound then reaches `K` wraps past `2π`. The three
/// cases (neither, one, or both wrapped) each give at most two segments.
pub fn intersect(r1: PhaseRange, r2: PhaseRange, grid: PhaseGrid) -> PhaseRange {
    let k = grid.size() as i64;
    if matches!(r1, PhaseRange::Pair { .. }) || matches!(r2, PhaseRange::Pair { .. }) {
        // Not produced by the searches; fall back to filtering.
        let idx: Vec<usize> = r1.indices(grid).into_iter().filter(|&i| r2.contains(i, grid)).collect();
        return ranges_from_sorted(&idx, grid);
    }
    let (Some(a), Some(b)) = (normalize(r1, k), normalize(r2, k)) else {
        return PhaseRange::Empty;
    };
    let (aw, bw) = (a.1 >= k, b.1 >= k);
    const NONE: (i64, i64) = (1, 0);
    let segs = match (aw, bw) {
        (false, false) => [(a.0.max(b.0), a.1.min(b.1)), NONE],
        (false, true) | (true, false) => {
            let (p, q) = if aw { (b, a) } else { (a, b) };
            [(p.0.max(q.0), p.1), (p.0 + k, (p.1 + k).min(q.1))]
        }
        (true, true) => {
            let (p, q) = if a.1 <= b.1 { (a, b) } else { (b, a) };
            [(p.0.max(q.0), p.1), (p.0 + k, q.1)]
        }
    };
    PhaseRange::from_segments(&segs, grid.size())
}

fn ranges_from_sorted(idx: &[usize], grid: PhaseGrid) -> PhaseRange {
    let mut segs: Vec<(i64, i64)> = Vec::new();
    for &i in idx {
        let i = i as i64;
        match segs.last_mut() {
            Some(s) if s.1 + 1 == i => s.1 = i,
            _ => segs.push((i, i)),
        }
    }
    match segs.len() {
        0..=2 => PhaseRange::from_segments(&segs, grid.size()),
        _ => panic!("filtered intersection has more than two segments"),
    }
}

/// Grid indices in both ranges, reduced modulo the grid size, in
/// enumeration order.
pub fn intersect_ranges(r1: PhaseRange, r2: PhaseRange, grid: PhaseGrid) -> Vec<usize> {
    intersect(r1, r2, grid).indices(grid)
}

/// Why a candidate was discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneReason {
    /// Outside the allowable range computed when the node was entered.
    OutsideRange,
    /// Inside the range, but the objective radius has since shrunk.
    Objective,
    /// Violates the constraint bound.
    Constraint,
}

/// One discarded candidate: element `level` set to `excluded`, with the
/// elements above it fixed to `partial[level + 1..]`.
#[derive(Debug, Clone, Copy)]
pub struct PruneEvent<'a> {
    pub level: usize,
    pub partial: &'a [usize],
    pub excluded: usize,
    pub reason: PruneReason,
    /// Squared objective radius in force.
    pub radius_sq: f64,
    /// Constraint bound `ĉ²` in force, for constrained searches.
    pub constraint_bound: Option<f64>,
}

/// Hooks into the search, used by tests and diagnostics.
pub trait SearchObserver {
    /// Set to report every discarded candidate.
    const WANTS_PRUNES: bool = false;

    fn on_leaf(&mut self, _indices: &[usize], _cost: f64, _constraint: Option<f64>) {}
    fn on_prune(&mut self, _event: &PruneEvent<'_>) {}
    fn on_incumbent(&mut self, _indices: &[usize], _cost: f64) {}
}

/// Observer that does nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl SearchObserver for NoObserver {}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchStats {
    pub nodes: u64,
    pub leaves: u64,
    pub prunes: u64,
    pub incumbent_updates: u64,
    pub flops: FlopCounter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub codeword: Codeword,
    /// `‖U w‖²` of the returned codeword.
    pub cost: f64,
    pub stats: SearchStats,
}

struct Engine<'a, O: SearchObserver> {
    u: &'a UpperTriangular,
    constraint: Option<(&'a UpperTriangular, f64)>,
    grid: PhaseGrid,
    phasors: Vec<Complex64>,
    radius_sq: f64,
    shrink: bool,
    w: Vec<Complex64>,
    idx: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
    stats: SearchStats,
    obs: &'a mut O,
}

/// `ŵ_n = −Σ_{j>n} U_nj w_j / U_nn`.
fn projection(u: &UpperTriangular, w: &[Complex64], n: usize) -> Complex64 {
    let row = &u.row(n)[n + 1..];
    let mut s = Complex64::new(0.0, 0.0);
    for (a, b) in row.iter().zip(&w[n + 1..]) {
        s += a * b;
    }
    -s / u.diag(n)
}

impl<'a, O: SearchObserver> Engine<'a, O> {
    fn new(
        u: &'a UpperTriangular,
        constraint: Option<(&'a UpperTriangular, f64)>,
        grid: PhaseGrid,
        radius_sq: f64,
        shrink: bool,
        obs: &'a mut O,
    ) -> Self {
        let l = u.dim();
        let mut w = vec![Complex64::new(0.0, 0.0); l];
        w[l - 1] = Complex64::new(1.0, 0.0);
        Self {
            u,
            constraint,
            grid,
            phasors: grid.phasors(),
            radius_sq,
            shrink,
            w,
            idx: vec![0; l],
            best: None,
            stats: SearchStats::default(),
            obs,
        }
    }

    fn run(&mut self) {
        let l = self.u.dim();
        let top = self.u.diag(l - 1);
        let s_obj = top * top;
        let s_con = self.constraint.map(|(uc, _)| uc.diag(l - 1) * uc.diag(l - 1)).unwrap_or(0.0);
        self.stats.nodes += 1;
        if l == 1 {
            self.leaf(s_obj, s_con);
        } else {
            self.descend(l - 2, s_obj, s_con);
        }
    }

    fn leaf(&mut self, s_obj: f64, s_con: f64) {
        self.stats.leaves += 1;
        let con = self.constraint.map(|_| s_con);
        self.obs.on_leaf(&self.idx, s_obj, con);
        if self.shrink {
            let better = match &self.best {
                Some((_, c)) => s_obj < *c,
                None => true,
            };
            if better {
                self.best = Some((self.idx.clone(), s_obj));
                self.radius_sq = s_obj;
                self.stats.incumbent_updates += 1;
                self.obs.on_incumbent(&self.idx, s_obj);
            }
        }
    }

    fn report(&mut self, level: usize, excluded: usize, reason: PruneReason) {
        self.stats.prunes += 1;
        self.emit(level, excluded, reason);
    }

    fn emit(&mut self, level: usize, excluded: usize, reason: PruneReason) {
        if O::WANTS_PRUNES {
            let event = PruneEvent {
                level,
                partial: &self.idx,
                excluded,
                reason,
                radius_sq: self.radius_sq,
                constraint_bound: self.constraint.map(|(_, b)| b),
            };
            self.obs.on_prune(&event);
        }
    }

    fn descend(&mut self, n: usize, s_obj: f64, s_con: f64) {
        let l = self.u.dim() as u64;
        let grid = self.grid;
        let k = grid.size();
        let depth = l - 1 - n as u64;

        let unn = self.u.diag(n);
        let w_hat = projection(self.u, &self.w, n);
        self.stats.flops.cmul(depth);
        self.stats.flops.cadd(depth - 1);
        self.stats.flops.real(2 + RANGE_FLOPS);
        let r_sq = (self.radius_sq * (1.0 + RADIUS_SLACK) - s_obj).max(0.0);
        let mut range = allowable_range_sq(w_hat, r_sq, unn, grid);

        let mut con_state = None;
        if let Some((uc, bound)) = self.constraint {
            let ucnn = uc.diag(n);
            let wc_hat = projection(uc, &self.w, n);
            self.stats.flops.cmul(depth);
            self.stats.flops.cadd(depth - 1);
            self.stats.flops.real(2 + 2 * RANGE_FLOPS);
            let c_sq = (bound + CONSTRAINT_SLACK - s_con).max(0.0);
            let range_c = allowable_range_sq(wc_hat, c_sq, ucnn, grid);
            range = intersect(range, range_c, grid);
            con_state = Some((ucnn, wc_hat, bound));
        }

        self.stats.prunes += (k - range.count(grid)) as u64;
        if O::WANTS_PRUNES {
            for i in 0..k {
                if !range.contains(i, grid) {
                    self.emit(n, i, PruneReason::OutsideRange);
                }
            }
        }

        for (lo, hi) in range.segments(k) {
            for raw in lo..=hi {
                let i = grid.wrap(raw);
                let z = self.phasors[i];
                let p = (z - w_hat) * unn;
                let so = s_obj + p.norm_sqr();
                self.stats.flops.cadd(1);
                self.stats.flops.real(7);
                self.idx[n] = i;
                if so > self.radius_sq * (1.0 + RADIUS_SLACK) {
                    self.report(n, i, PruneReason::Objective);
                    continue;
                }
                let mut sc = s_con;
                if let Some((ucnn, wc_hat, bound)) = con_state {
                    let pc = (z - wc_hat) * ucnn;
                    sc += pc.norm_sqr();
                    self.stats.flops.cadd(1);
                    self.stats.flops.real(7);
                    if sc > bound + CONSTRAINT_SLACK {
                        self.report(n, i, PruneReason::Constraint);
                        continue;
                    }
                }
                self.w[n] = z;
                self.stats.nodes += 1;
                if n == 0 {
                    self.leaf(so, sc);
                } else {
                    self.descend(n - 1, so, sc);
                }
            }
        }
    }
}

fn check_dims(u: &UpperTriangular, c: &Codeword) -> Result<(), SearchError> {
    if u.dim() != c.len() {
        return Err(SearchError::DimensionMismatch {
            factor: u.dim(),
            codeword: c.len(),
        });
    }
    Ok(())
}

/// Sphere search: the codeword minimizing `‖U w‖²`, never worse than
/// `incumbent`. Ties keep the first codeword found.
pub fn ss(u: &UpperTriangular, radius: f64, grid: PhaseGrid, incumbent: &Codeword) -> Codeword {
    ss_with(u, radius, grid, incumbent, &mut NoObserver)
        .expect("codeword length must match the factor")
        .codeword
}

pub fn ss_with<O: SearchObserver>(
    u: &UpperTriangular,
    radius: f64,
    grid: PhaseGrid,
    incumbent: &Codeword,
    obs: &mut O,
) -> Result<SearchOutcome, SearchError> {
    check_dims(u, incumbent)?;
    let inc_cost = u.norm_sqr_of(&incumbent.to_complex());
    let radius_sq = (radius * radius).max(inc_cost) * (1.0 + INCUMBENT_INFLATION);
    let mut engine = Engine::new(u, None, grid, radius_sq, true, obs);
    engine.best = Some((incumbent.indices().to_vec(), inc_cost));
    engine.run();
    Ok(finish(engine, grid))
}

/// Constrained sphere search: minimizes `‖U_obj v‖²` subject to
/// `‖U_c v‖² ≤ ĉ²`.
pub fn css(
    u_obj: &UpperTriangular,
    u_c: &UpperTriangular,
    radius: f64,
    c_hat_sq: f64,
    grid: PhaseGrid,
    incumbent: &Codeword,
) -> Result<Codeword, SearchError> {
    Ok(css_with(u_obj, u_c, radius, c_hat_sq, grid, incumbent, &mut NoObserver)?.codeword)
}

pub fn css_with<O: SearchObserver>(
    u_obj: &UpperTriangular,
    u_c: &UpperTriangular,
    radius: f64,
    c_hat_sq: f64,
    grid: PhaseGrid,
    incumbent: &Codeword,
    obs: &mut O,
) -> Result<SearchOutcome, SearchError> {
    check_dims(u_obj, incumbent)?;
    check_dims(u_c, incumbent)?;
    let v = incumbent.to_complex();
    let con = u_c.norm_sqr_of(&v);
    if con > c_hat_sq + CONSTRAINT_SLACK {
        return Err(SearchError::InfeasibleConstraint {
            value: con,
            bound: c_hat_sq,
        });
    }
    let inc_cost = u_obj.norm_sqr_of(&v);
    let radius_sq = (radius * radius).max(inc_cost) * (1.0 + INCUMBENT_INFLATION);
    let mut engine = Engine::new(u_obj, Some((u_c, c_hat_sq)), grid, radius_sq, true, obs);
    engine.best = Some((incumbent.indices().to_vec(), inc_cost));
    engine.run();
    Ok(finish(engine, grid))
}

fn finish<O: SearchObserver>(engine: Engine<'_, O>, grid: PhaseGrid) -> SearchOutcome {
    let (indices, cost) = engine.best.expect("search is seeded with an incumbent");
    SearchOutcome {
        codeword: Codeword::new(indices, grid).expect("search produces pinned codewords"),
        cost,
        stats: engine.stats,
    }
}

/// Visits every codeword with `‖U w‖² ≤ radius_sq` (and `‖U_c w‖² ≤ bound`
/// when a constraint is given) without shrinking the radius. Use
/// `f64::INFINITY` to enumerate the whole codebook.
pub fn enumerate<O: SearchObserver>(
    u: &UpperTriangular,
    constraint: Option<(&UpperTriangular, f64)>,
    radius_sq: f64,
    grid: PhaseGrid,
    obs: &mut O,
) -> SearchStats {
    let mut engine = Engine::new(u, constraint, grid, radius_sq, false, obs);
    engine.run();
    engine.stats
}
