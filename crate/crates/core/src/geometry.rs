//! Half-open boxes `x + [-m/2, m/2)^d` and the simulation window.

use crate::error::{Error, Result};

/// Largest dimension handled by the fixed-size helpers.
pub const MAX_DIM: usize = 8;

/// Axis-aligned half-open cube of side `side` centred at `center`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, side: f64) -> Self {
        Cube { center, side }
    }

    pub fn at_origin(dim: usize, side: f64) -> Self {
        Cube {
            center: vec![0.0; dim],
            side,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - self.side / 2.0
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.center[axis] + self.side / 2.0
    }

    #[inline]
    pub fn contains(&self, p: &[f64]) -> bool {
        let h = self.side / 2.0;
        p.iter()
            .zip(&self.center)
            .all(|(&x, &c)| x >= c - h && x < c + h)
    }

    /// True if `other` lies inside `self` (as half-open sets).
    pub fn covers(&self, other: &Cube) -> bool {
        (0..self.dim()).all(|a| other.lower(a) >= self.lower(a) && other.upper(a) <= self.upper(a))
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    /// The same cube translated by `offset`.
    pub fn shifted(&self, offset: &[f64]) -> Cube {
        Cube {
            center: self.center.iter().zip(offset).map(|(c, o)| c + o).collect(),
            side: self.side,
        }
    }
}

/// Simulation window: the measurement box `Λ_side(center)` plus a
/// generation margin `pad` on every side.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub dim: usize,
    pub side: f64,
    pub center: Vec<f64>,
    pub pad: f64,
}

impl Window {
    pub fn new(dim: usize, side: f64, pad: f64) -> Result<Self> {
        Window::centered(vec![0.0; dim], side, pad)
    }

    pub fn centered(center: Vec<f64>, side: f64, pad: f64) -> Result<Self> {
        let w = Window {
            dim: center.len(),
            side,
            center,
            pad,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::param(format!("dimension {} unsupported", self.dim)));
        }
        if self.center.len() != self.dim {
            return Err(Error::param("window center has wrong dimension"));
        }
        if !(self.side > 0.0) || !self.side.is_finite() {
            return Err(Error::param(format!("window side must be positive, got {}", self.side)));
        }
        if !(self.pad >= 0.0) || !self.pad.is_finite() {
            return Err(Error::param(format!("pad must be nonnegative, got {}", self.pad)));
        }
        Ok(())
    }

    /// The measurement box.
    pub fn inner(&self) -> Cube {
        Cube::new(self.center.clone(), self.side)
    }

    /// The generation box including the margin.
    pub fn padded(&self) -> Cube {
        Cube::new(self.center.clone(), self.side + 2.0 * self.pad)
    }
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}
