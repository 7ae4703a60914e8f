//! Random edge sets on marked point clouds.

pub mod ellipse;
mod graph;
pub mod kernel;
mod sampler;
pub mod spec;

pub use ellipse::{ellipses_intersect, Ellipse};
pub use graph::SpatialGraph;
pub use kernel::{expected_degree, ConnectionKernel, Profile};
pub use spec::{ModelKind, ModelSpec, Pad, VertexLaw};

use crate::error::{Error, Result};
use crate::point_process::{MarkedPointCloud, SpatialGrid};
use sampler::{exact_edges, fast_edges, PairModel};

/// Which edge generator to run. Both produce the same law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EdgeSampler {
    /// One keyed Bernoulli per unordered pair, `O(n^2)`.
    Exact,
    /// Grid proposals from a dominating kernel, thinned to the exact law.
    #[default]
    Fast,
}

impl std::str::FromStr for EdgeSampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EdgeSampler::Exact),
            "fast" => Ok(EdgeSampler::Fast),
            other => Err(Error::param(format!("unknown generator `{other}`"))),
        }
    }
}

fn generate<M: PairModel>(cloud: MarkedPointCloud, model: &M, seed: u64, sampler: EdgeSampler) -> Result<SpatialGraph> {
    let edges = match sampler {
        EdgeSampler::Exact => exact_edges(&cloud, model, seed),
        EdgeSampler::Fast => fast_edges(&cloud, model, seed),
    };
    SpatialGraph::from_edges(cloud, edges)
}

struct WdrcmPairs {
    kernel: ConnectionKernel,
    dim: usize,
}

impl PairModel for WdrcmPairs {
    fn probability(&self, cloud: &MarkedPointCloud, a: usize, b: usize, r: f64) -> f64 {
        self.kernel.probability(cloud.mark(a), cloud.mark(b), r, self.dim)
    }
    fn envelope(&self, cloud: &MarkedPointCloud, owner: usize, r: f64) -> f64 {
        self.kernel.envelope(cloud.mark(owner), r, self.dim)
    }
    fn reach(&self, cloud: &MarkedPointCloud, owner: usize) -> f64 {
        self.kernel.reach(cloud.mark(owner), self.dim)
    }
}

/// Weight-dependent random connection model with the reference generator.
pub fn connect_wdrcm(cloud: MarkedPointCloud, kernel: &ConnectionKernel, seed: u64) -> Result<SpatialGraph> {
    connect_wdrcm_with(cloud, kernel, seed, EdgeSampler::Exact)
}

pub fn connect_wdrcm_with(
    cloud: MarkedPointCloud,
    kernel: &ConnectionKernel,
    seed: u64,
    sampler: EdgeSampler,
) -> Result<SpatialGraph> {
    kernel.validate()?;
    if cloud.is_empty() {
        return Err(Error::usage("cannot connect an empty cloud"));
    }
    let model = WdrcmPairs {
        kernel: *kernel,
        dim: cloud.dim(),
    };
    generate(cloud, &model, seed, sampler)
}

struct LrpPairs {
    exponent: f64,
    amplitude: f64,
}

impl LrpPairs {
    fn p(&self, r: f64) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else if r <= 0.0 {
            1.0
        } else {
            (self.amplitude * r.powf(-self.exponent)).min(1.0)
        }
    }
}

impl PairModel for LrpPairs {
    fn probability(&self, _: &MarkedPointCloud, _: usize, _: usize, r: f64) -> f64 {
        self.p(r)
    }
    fn envelope(&self, _: &MarkedPointCloud, _: usize, r: f64) -> f64 {
        self.p(r)
    }
    fn reach(&self, _: &MarkedPointCloud, _: usize) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Long-range percolation on a lattice cloud: `min(1, A |x-y|^{-dδ})`.
pub fn connect_long_range_percolation(
    cloud: MarkedPointCloud,
    delta: f64,
    amplitude: f64,
    seed: u64,
) -> Result<SpatialGraph> {
    connect_lrp_with(cloud, delta, amplitude, seed, EdgeSampler::Exact)
}

pub fn connect_lrp_with(
    cloud: MarkedPointCloud,
    delta: f64,
    amplitude: f64,
    seed: u64,
    sampler: EdgeSampler,
) -> Result<SpatialGraph> {
    if !cloud.is_lattice() {
        return Err(Error::usage("long-range percolation needs a lattice cloud"));
    }
    if !(delta > 1.0) {
        return Err(Error::param(format!("delta must exceed 1, got {delta}")));
    }
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::param("amplitude must be nonnegative"));
    }
    let model = LrpPairs {
        exponent: cloud.dim() as f64 * delta,
        amplitude,
    };
    generate(cloud, &model, seed, sampler)
}

/// Soft Boolean model with local interference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterferenceParams {
    pub beta: f64,
    pub kernel: ConnectionKernel,
}

impl InterferenceParams {
    pub fn new(beta: f64, kernel: ConnectionKernel) -> Result<Self> {
        let p = InterferenceParams { beta, kernel };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param(format!("beta must lie in (0,1), got {}", self.beta)));
        }
        if self.kernel.gamma_prime != 0.0 {
            return Err(Error::param("interference base kernel needs gamma' = 0"));
        }
        Ok(())
    }

    /// Radius of the interference ball, `|x - z|^d < u^{-β}`.
    pub fn radius(&self, mark: f64, dim: usize) -> f64 {
        mark.powf(-self.beta / dim as f64)
    }
}

/// Number of cloud points strictly inside each vertex's interference ball,
/// the vertex itself included.
pub fn interference_counts(cloud: &MarkedPointCloud, params: &InterferenceParams) -> Vec<u32> {
    let dim = cloud.dim();
    let grid = SpatialGrid::build(cloud, 1.0);
    (0..cloud.len())
        .map(|i| {
            let r = params.radius(cloud.mark(i), dim);
            let x = cloud.location(i);
            let mut c = 0u32;
            grid.for_each_within(cloud, x, r, |j| {
                if crate::geometry::dist(x, cloud.location(j)) < r {
                    c += 1;
                }
            });
            c.max(1)
        })
        .collect()
}

/// Checks that every measurement-window vertex has its interference ball
/// inside the padded window.
fn check_interference_boundary(cloud: &MarkedPointCloud, params: &InterferenceParams) -> Result<()> {
    let w = cloud.window();
    let inner = w.inner();
    let half = w.side / 2.0 + w.pad;
    for i in cloud.indices_in(&inner) {
        let r = params.radius(cloud.mark(i), cloud.dim());
        let x = cloud.location(i);
        let fits = (0..cloud.dim()).all(|a| (x[a] - w.center[a]).abs() + r <= half);
        if !fits {
            return Err(Error::Boundary(format!(
                "interference ball of radius {r:.3} around vertex {i} leaves the padded window; increase pad"
            )));
        }
    }
    Ok(())
}

struct InterferencePairs {
    kernel: ConnectionKernel,
    counts: Vec<u32>,
    dim: usize,
}

impl PairModel for InterferencePairs {
    fn probability(&self, cloud: &MarkedPointCloud, owner: usize, other: usize, r: f64) -> f64 {
        self.kernel.probability(cloud.mark(owner), cloud.mark(other), r, self.dim) / self.counts[owner] as f64
    }
    fn envelope(&self, cloud: &MarkedPointCloud, owner: usize, r: f64) -> f64 {
        self.kernel.envelope(cloud.mark(owner), r, self.dim) / self.counts[owner] as f64
    }
    fn reach(&self, cloud: &MarkedPointCloud, owner: usize) -> f64 {
        self.kernel.reach(cloud.mark(owner), self.dim)
    }
}

pub fn connect_interference(cloud: MarkedPointCloud, params: &InterferenceParams, seed: u64) -> Result<SpatialGraph> {
    connect_interference_with(cloud, params, seed, EdgeSampler::Exact)
}

pub fn connect_interference_with(
    cloud: MarkedPointCloud,
    params: &InterferenceParams,
    seed: u64,
    sampler: EdgeSampler,
) -> Result<SpatialGraph> {
    params.validate()?;
    check_interference_boundary(&cloud, params)?;
    let model = InterferencePairs {
        kernel: params.kernel,
        counts: interference_counts(&cloud, params),
        dim: cloud.dim(),
    };
    generate(cloud, &model, seed, sampler)
}

/// Planar ellipses percolation: semi-axes `(u^{-γ/2}, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipseParams {
    pub gamma: f64,
}

impl EllipseParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) || gamma == 1.0 {
            return Err(Error::param(format!("ellipse gamma must lie in (0,1) or (1,2), got {gamma}")));
        }
        Ok(EllipseParams { gamma })
    }

    /// Pareto(2/γ) semi-major axis from a uniform mark.
    pub fn major_axis(&self, mark: f64) -> f64 {
        mark.powf(-self.gamma / 2.0)
    }
}

/// The grain of vertex `i`.
pub fn ellipse_of(cloud: &MarkedPointCloud, params: &EllipseParams, i: usize) -> Option<Ellipse> {
    let o = cloud.orientations()?;
    let p = cloud.location(i);
    Some(Ellipse::new([p[0], p[1]], params.major_axis(cloud.mark(i)), 1.0, o[i]))
}

struct EllipsePairs {
    grains: Vec<Ellipse>,
}

impl PairModel for EllipsePairs {
    fn probability(&self, _: &MarkedPointCloud, a: usize, b: usize, _r: f64) -> f64 {
        if ellipses_intersect(&self.grains[a], &self.grains[b]) {
            1.0
        } else {
            0.0
        }
    }
    fn envelope(&self, _: &MarkedPointCloud, owner: usize, r: f64) -> f64 {
        if r <= 2.0 * self.grains[owner].major {
            1.0
        } else {
            0.0
        }
    }
    fn reach(&self, _: &MarkedPointCloud, owner: usize) -> f64 {
        2.0 * self.grains[owner].major
    }
}

pub fn connect_ellipses(cloud: MarkedPointCloud, params: &EllipseParams, seed: u64) -> Result<SpatialGraph> {
    connect_ellipses_with(cloud, params, seed, EdgeSampler::Exact)
}

pub fn connect_ellipses_with(
    cloud: MarkedPointCloud,
    params: &EllipseParams,
    seed: u64,
    sampler: EdgeSampler,
) -> Result<SpatialGraph> {
    if cloud.dim() != 2 {
        return Err(Error::usage("ellipses percolation is planar"));
    }
    if cloud.orientations().is_none() {
        return Err(Error::usage("ellipses percolation needs vertex orientations"));
    }
    let grains = (0..cloud.len())
        .map(|i| ellipse_of(&cloud, params, i).expect("orientations present"))
        .collect();
    generate(cloud, &EllipsePairs { grains }, seed, sampler)
}
