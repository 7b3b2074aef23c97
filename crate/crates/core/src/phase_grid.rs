//! Uniformly quantized phase alphabet and constant-modulus codewords.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Offsets closer than this (in units of the grid step) to a grid point are
/// treated as lying on it when rounding.
const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("phase resolution must be between 1 and 16 bits, got {0}")]
    InvalidBits(u32),
    #[error("codeword must have at least one element")]
    EmptyCodeword,
    #[error("phase index {index} at position {position} is outside the {size}-point grid")]
    IndexOutOfRange { position: usize, index: usize, size: usize },
    #[error("last codeword phase must be pinned to 0, got index {0}")]
    LastPhaseNotPinned(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundMode {
    Ceil,
    Floor,
}

/// The phase set `{0, Δ, …, 2π − Δ}` with `Δ = 2π / 2^bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseGrid {
    bits: u32,
}

impl PhaseGrid {
    pub fn new(bits: u32) -> Result<Self, GridError> {
        if !(1..=16).contains(&bits) {
            return Err(GridError::InvalidBits(bits));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of phases, `2^bits`.
    pub fn size(&self) -> usize {
        1usize << self.bits
    }

    /// Grid step `Δ`, stored as `2π / size` so that `step * size == 2π`.
    pub fn step(&self) -> f64 {
        2.0 * PI / self.size() as f64
    }

    pub fn phase(&self, index: usize) -> f64 {
        index as f64 * self.step()
    }

    pub fn phasor(&self, index: usize) -> Complex64 {
        if index == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, self.phase(index))
        }
    }

    /// All unit phasors `e^{jkΔ}`, indexed by `k`.
    pub fn phasors(&self) -> Vec<Complex64> {
        (0..self.size()).map(|k| self.phasor(k)).collect()
    }

    /// Reduce an unwrapped grid index to `[0, size)`.
    pub fn wrap(&self, index: i64) -> usize {
        index.rem_euclid(self.size() as i64) as usize
    }

    /// Unwrapped grid index of the next grid phase `≥ angle` (ceil) or
    /// `≤ angle` (floor). Angles within a hair of a grid point snap to it.
    pub fn round_index(&self, angle: f64, mode: RoundMode) -> i64 {
        let x = angle / self.step();
        let nearest = x.round();
        if (x - nearest).abs() < SNAP_TOL {
            return nearest as i64;
        }
        match mode {
            RoundMode::Ceil => x.ceil() as i64,
            RoundMode::Floor => x.floor() as i64,
        }
    }

    /// Grid rounding on the unwrapped real line; the result is a multiple of
    /// `Δ` and is not reduced modulo `2π`.
    pub fn round(&self, angle: f64, mode: RoundMode) -> f64 {
        self.round_index(angle, mode) as f64 * self.step()
    }

    /// Index of the grid phase at minimum circular distance from `angle`.
    /// Exact ties go to the smaller index.
    pub fn nearest(&self, angle: f64) -> usize {
        let k = self.size();
        let x = (angle / self.step()).rem_euclid(k as f64);
        let lo = x.floor();
        let frac = x - lo;
        let lo = lo as usize % k;
        let hi = (lo + 1) % k;
        if frac < 0.5 {
            lo
        } else if frac > 0.5 {
            hi
        } else {
            lo.min(hi)
        }
    }
}

impl fmt::Display for PhaseGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-bit ({} phases)", self.bits, self.size())
    }
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// A quantized constant-modulus beamforming vector. Entries are grid
/// indices; the last entry is pinned to phase 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword {
    indices: Vec<usize>,
    grid: PhaseGrid,
}

impl Codeword {
    pub fn new(indices: Vec<usize>, grid: PhaseGrid) -> Result<Self, GridError> {
        let Some(&last) = indices.last() else {
            return Err(GridError::EmptyCodeword);
        };
        if let Some((position, &index)) = indices.iter().enumerate().find(|(_, &i)| i >= grid.size()) {
            return Err(GridError::IndexOutOfRange {
                position,
                index,
                size: grid.size(),
            });
        }
        if last != 0 {
            return Err(GridError::LastPhaseNotPinned(last));
        }
        Ok(Self { indices, grid })
    }

    /// Codeword from the `len - 1` free phase indices; the pinned zero is appended.
    pub fn from_free(free: &[usize], grid: PhaseGrid) -> Result<Self, GridError> {
        let mut indices = free.to_vec();
        indices.push(0);
        Self::new(indices, grid)
    }

    pub fn zeros(len: usize, grid: PhaseGrid) -> Self {
        assert!(len > 0);
        Self {
            indices: vec![0; len],
            grid,
        }
    }

    /// Hard-quantizes an arbitrary complex vector: phases are taken relative
    /// to the last entry and rounded to the nearest grid phase.
    pub fn quantize(vector: &[Complex64], grid: PhaseGrid) -> Self {
        assert!(!vector.is_empty());
        let reference = vector[vector.len() - 1];
        let reference = if reference.norm() > 0.0 {
            reference / reference.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut indices: Vec<usize> = vector
            .iter()
            .map(|x| grid.nearest((x * reference.conj()).arg()))
            .collect();
        *indices.last_mut().unwrap() = 0;
        Self { indices, grid }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn grid(&self) -> PhaseGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.indices.iter().map(|&k| self.grid.phase(k)).collect()
    }

    /// Complex image `e^{j k Δ}` per entry; the last entry is exactly 1.
    pub fn to_complex(&self) -> Vec<Complex64> {
        self.indices.iter().map(|&k| self.grid.phasor(k)).collect()
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, k) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "]")
    }
}
