//! Floating-point operation accounting.
//!
//! Counts are kept per operation class and weighted when totalled: a complex
//! multiply costs 6 real FLOPs, a complex add 2, and every other real
//! operation (add, multiply, divide, compare, sqrt, trig) costs 1.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Weight of one complex multiplication in real FLOPs.
pub const COMPLEX_MUL_FLOPS: u64 = 6;
/// Weight of one complex addition in real FLOPs.
pub const COMPLEX_ADD_FLOPS: u64 = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopCounter {
    pub complex_mul: u64,
    pub complex_add: u64,
    pub real_op: u64,
}

impl FlopCounter {
    pub const fn new(complex_mul: u64, complex_add: u64, real_op: u64) -> Self {
        Self {
            complex_mul,
            complex_add,
            real_op,
        }
    }

    #[inline]
    pub fn cmul(&mut self, n: u64) {
        self.complex_mul += n;
    }

    #[inline]
    pub fn cadd(&mut self, n: u64) {
        self.complex_add += n;
    }

    #[inline]
    pub fn real(&mut self, n: u64) {
        self.real_op += n;
    }

    /// Weighted total: `6 * complex_mul + 2 * complex_add + real_op`.
    pub fn total(&self) -> f64 {
        (COMPLEX_MUL_FLOPS * self.complex_mul) as f64
            + (COMPLEX_ADD_FLOPS * self.complex_add) as f64
            + self.real_op as f64
    }

    pub fn is_zero(&self) -> bool {
        self.complex_mul == 0 && self.complex_add == 0 && self.real_op == 0
    }

    /// Counter scaled by an integer repetition count.
    pub fn times(&self, k: u64) -> Self {
        Self {
            complex_mul: self.complex_mul * k,
            complex_add: self.complex_add * k,
            real_op: self.real_op * k,
        }
    }

    /// Cost of a Hermitian quadratic form `xᴴAx` of dimension `n`
    /// (matrix-vector product followed by an inner product, real part only).
    pub fn quadratic_form(n: u64) -> Self {
        Self::new(n * n + n, n * (n - 1) + n.saturating_sub(1), 0)
    }

    /// Cost of an inner product `aᴴx` of length `n` followed by `|·|²`.
    pub fn inner_product_sq(n: u64) -> Self {
        Self::new(n, n.saturating_sub(1), 3)
    }
}

impl Add for FlopCounter {
    type Output = FlopCounter;

    fn add(self, rhs: Self) -> Self {
        Self {
            complex_mul: self.complex_mul + rhs.complex_mul,
            complex_add: self.complex_add + rhs.complex_add,
            real_op: self.real_op + rhs.real_op,
        }
    }
}

impl AddAssign for FlopCounter {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for FlopCounter {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}
