//! Model descriptions that can be realized into graphs.

use std::fmt;
use std::str::FromStr;

use super::{
    connect_ellipses_with, connect_interference_with, connect_lrp_with, connect_wdrcm_with, ConnectionKernel,
    EdgeSampler, EllipseParams, InterferenceParams, SpatialGraph,
};
use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, Window};
use crate::point_process::{sample_poisson, sample_site_lattice, MarkedPointCloud};
use crate::rng::combine;

/// Target for the expected number of edges lost across the padded boundary.
pub const PAD_MISSING_EDGES: f64 = 1e-2;

const CLOUD_STREAM: u64 = 0x636c_6f75;
const EDGE_STREAM: u64 = 0x6564_6765;
const ORIENT_STREAM: u64 = 0x6f72_6965;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Wdrcm,
    Lrp,
    Boolean,
    SoftBoolean,
    Interference,
    Ellipses,
    Gilbert,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Wdrcm,
        ModelKind::Lrp,
        ModelKind::Boolean,
        ModelKind::SoftBoolean,
        ModelKind::Interference,
        ModelKind::Ellipses,
        ModelKind::Gilbert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Wdrcm => "wdrcm",
            ModelKind::Lrp => "lrp",
            ModelKind::Boolean => "boolean",
            ModelKind::SoftBoolean => "soft-boolean",
            ModelKind::Interference => "interference",
            ModelKind::Ellipses => "ellipses",
            ModelKind::Gilbert => "gilbert",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param(format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexLaw {
    Poisson { intensity: f64 },
    Lattice { retention: f64 },
}

impl VertexLaw {
    /// Mean number of vertices per unit volume.
    pub fn density(&self) -> f64 {
        match *self {
            VertexLaw::Poisson { intensity } => intensity,
            VertexLaw::Lattice { retention } => retention,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pad {
    Auto,
    Fixed(f64),
}

/// A model together with the window it is realized on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dim: usize,
    pub vertices: VertexLaw,
    pub gamma: f64,
    pub gamma_prime: f64,
    /// `f64::INFINITY` selects the indicator profile.
    pub delta: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub side: f64,
    pub pad: Pad,
    pub generator: EdgeSampler,
}

impl ModelSpec {
    fn base(kind: ModelKind, dim: usize, side: f64) -> Self {
        ModelSpec {
            kind,
            dim,
            vertices: VertexLaw::Poisson { intensity: 1.0 },
            gamma: 0.0,
            gamma_prime: 0.0,
            delta: f64::INFINITY,
            beta: 0.5,
            amplitude: 1.0,
            side,
            pad: Pad::Auto,
            generator: EdgeSampler::Fast,
        }
    }

    pub fn wdrcm(dim: usize, gamma: f64, gamma_prime: f64, delta: f64, side: f64) -> Self {
        ModelSpec {
            gamma,
            gamma_prime,
            delta,
            ..Self::base(ModelKind::Wdrcm, dim, side)
        }
    }

    pub fn boolean(dim: usize, gamma: f64, side: f64) -> Self {
        ModelSpec {
            gamma,
            ..Self::base(ModelKind::Boolean, dim, side)
        }
    }

    pub fn soft_boolean(dim: usize, gamma: f64, delta: f64, side: f64) -> Self {
        ModelSpec {
            gamma,
            delta,
            ..Self::base(ModelKind::SoftBoolean, dim, side)
        }
    }

    pub fn gilbert(dim: usize, side: f64) -> Self {
        Self::base(ModelKind::Gilbert, dim, side)
    }

    pub fn lrp(dim: usize, delta: f64, side: f64) -> Self {
        ModelSpec {
            delta,
            vertices: VertexLaw::Lattice { retention: 1.0 },
            ..Self::base(ModelKind::Lrp, dim, side)
        }
    }

    pub fn interference(dim: usize, gamma: f64, delta: f64, beta: f64, side: f64) -> Self {
        ModelSpec {
            gamma,
            delta,
            beta,
            ..Self::base(ModelKind::Interference, dim, side)
        }
    }

    pub fn ellipses(gamma: f64, side: f64) -> Self {
        ModelSpec {
            gamma,
            ..Self::base(ModelKind::Ellipses, 2, side)
        }
    }

    pub fn with_intensity(mut self, intensity: f64) -> Self {
        self.vertices = match self.vertices {
            VertexLaw::Poisson { .. } => VertexLaw::Poisson { intensity },
            VertexLaw::Lattice { .. } => VertexLaw::Lattice { retention: intensity },
        };
        self
    }

    pub fn with_pad(mut self, pad: Pad) -> Self {
        self.pad = pad;
        self
    }

    pub fn with_side(mut self, side: f64) -> Self {
        self.side = side;
        self
    }

    pub fn with_generator(mut self, generator: EdgeSampler) -> Self {
        self.generator = generator;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Connection kernel of the kernel-based models.
    pub fn kernel(&self) -> Result<ConnectionKernel> {
        let k = match self.kind {
            ModelKind::Wdrcm => ConnectionKernel::new(self.gamma, self.gamma_prime, self.delta)?,
            ModelKind::Boolean => {
                if !(self.gamma > 0.0) {
                    return Err(Error::param("the Boolean model needs gamma > 0"));
                }
                ConnectionKernel::new(self.gamma, 0.0, f64::INFINITY)?
            }
            ModelKind::SoftBoolean | ModelKind::Interference => {
                if self.delta == f64::INFINITY {
                    return Err(Error::param("soft models need a finite delta"));
                }
                ConnectionKernel::new(self.gamma, 0.0, self.delta)?
            }
            ModelKind::Gilbert => ConnectionKernel::gilbert(),
            ModelKind::Lrp | ModelKind::Ellipses => {
                return Err(Error::usage(format!("model `{}` has no connection kernel", self.kind)))
            }
        };
        k.with_amplitude(self.amplitude)
    }

    pub fn interference_params(&self) -> Result<InterferenceParams> {
        InterferenceParams::new(self.beta, self.kernel()?)
    }

    pub fn ellipse_params(&self) -> Result<EllipseParams> {
        EllipseParams::new(self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > crate::geometry::MAX_DIM {
            return Err(Error::param(format!("unsupported dimension {}", self.dim)));
        }
        if !(self.side > 0.0) || !self.side.is_finite() {
            return Err(Error::param(format!("window side must be positive, got {}", self.side)));
        }
        if let Pad::Fixed(p) = self.pad {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::param(format!("pad must be nonnegative, got {p}")));
            }
        }
        match (self.kind, self.vertices) {
            (ModelKind::Lrp, VertexLaw::Poisson { .. }) => {
                return Err(Error::usage("long-range percolation lives on a lattice"))
            }
            (_, VertexLaw::Poisson { intensity }) if !(intensity > 0.0 && intensity.is_finite()) => {
                return Err(Error::param(format!("intensity must be positive, got {intensity}")))
            }
            (_, VertexLaw::Lattice { retention }) if !(retention > 0.0 && retention <= 1.0) => {
                return Err(Error::param(format!("retention must lie in (0,1], got {retention}")))
            }
            _ => {}
        }
        match self.kind {
            ModelKind::Lrp => {
                if !(self.delta > 1.0) {
                    return Err(Error::param(format!("delta must exceed 1, got {}", self.delta)));
                }
                if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
                    return Err(Error::param("amplitude must be nonnegative"));
                }
            }
            ModelKind::Ellipses => {
                if self.dim != 2 {
                    return Err(Error::param("ellipses percolation is planar"));
                }
                self.ellipse_params()?;
            }
            ModelKind::Interference => {
                self.interference_params()?;
            }
            _ => {
                self.kernel()?;
            }
        }
        Ok(())
    }

    /// Expected number of neighbours beyond distance `r` of a typical vertex.
    pub fn neighbor_tail(&self, r: f64) -> Result<f64> {
        let d = self.dim as f64;
        let density = self.vertices.density();
        match self.kind {
            ModelKind::Lrp => {
                if self.amplitude == 0.0 {
                    return Ok(0.0);
                }
                // A ∫_{|z|>r} |z|^{-dδ} dz with r >= 1
                let r = r.max(1.0);
                let surface = d * unit_ball_volume(self.dim);
                Ok(density * self.amplitude * surface * r.powf(d - d * self.delta) / (d * self.delta - d))
            }
            ModelKind::Ellipses => {
                // an edge needs the longer axis to exceed half the distance
                let g = self.gamma;
                if g >= 1.0 {
                    return Err(Error::param("automatic pad needs ellipse gamma < 1; give pad explicitly"));
                }
                let a = 2.0 / g;
                let r = r.max(2.0);
                Ok(density * 4.0 * std::f64::consts::PI * 2f64.powf(a) * r.powf(2.0 - a) / (a - 2.0))
            }
            _ => Ok(self.kernel()?.neighbor_tail(density, self.dim, r)),
        }
    }

    /// Pad chosen so that the measurement window loses fewer than
    /// [`PAD_MISSING_EDGES`] edges in expectation.
    pub fn auto_pad(&self) -> Result<f64> {
        let n = self.vertices.density() * self.side.powi(self.dim as i32);
        let budget = PAD_MISSING_EDGES / n.max(1.0);
        let mut hi = 1.0f64;
        while self.neighbor_tail(hi)? >= budget {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(Error::resource("automatic pad diverges; give pad explicitly"));
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.neighbor_tail(mid)? >= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut pad = hi;
        if self.kind == ModelKind::Interference {
            // all measured interference balls inside with the same budget
            let radius = (n / PAD_MISSING_EDGES).powf(self.beta / self.dim as f64);
            pad = pad.max(radius);
        }
        Ok(pad.ceil())
    }

    pub fn resolve_pad(&self) -> Result<f64> {
        match self.pad {
            Pad::Fixed(p) => Ok(p),
            Pad::Auto => self.auto_pad(),
        }
    }

    /// Window centered at the origin with the resolved pad.
    pub fn window(&self) -> Result<Window> {
        self.validate()?;
        Window::new(self.dim, self.side, self.resolve_pad()?)
    }

    pub fn cloud_in(&self, window: &Window, seed: u64) -> Result<MarkedPointCloud> {
        let cseed = combine(seed, CLOUD_STREAM);
        let cloud = match self.vertices {
            VertexLaw::Poisson { intensity } => sample_poisson(window, intensity, cseed)?,
            VertexLaw::Lattice { retention } => sample_site_lattice(window, retention, cseed)?,
        };
        Ok(if self.kind == ModelKind::Ellipses {
            cloud.with_orientations(combine(seed, ORIENT_STREAM))
        } else {
            cloud
        })
    }

    /// Connects an already sampled cloud.
    pub fn connect(&self, cloud: MarkedPointCloud, seed: u64) -> Result<SpatialGraph> {
        let eseed = combine(seed, EDGE_STREAM);
        match self.kind {
            ModelKind::Lrp => connect_lrp_with(cloud, self.delta, self.amplitude, eseed, self.generator),
            ModelKind::Interference => {
                connect_interference_with(cloud, &self.interference_params()?, eseed, self.generator)
            }
            ModelKind::Ellipses => connect_ellipses_with(cloud, &self.ellipse_params()?, eseed, self.generator),
            _ => connect_wdrcm_with(cloud, &self.kernel()?, eseed, self.generator),
        }
    }

    /// Samples a graph on an explicit window.
    pub fn realize_in(&self, window: &Window, seed: u64) -> Result<SpatialGraph> {
        self.validate()?;
        let cloud = self.cloud_in(window, seed)?;
        if cloud.is_empty() {
            return Ok(SpatialGraph::empty(cloud));
        }
        self.connect(cloud, seed)
    }

    /// Samples a graph on the origin-centered window.
    pub fn realize(&self, seed: u64) -> Result<SpatialGraph> {
        let w = self.window()?;
        self.realize_in(&w, seed)
    }
}
