//! Long internal edges: detection, Monte Carlo probabilities, the exponent
//! `ζ` and its quadrature oracle.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dist, Cube, Window};
use crate::models::kernel::log_kinks;
use crate::models::{kernel::symmetric_log_integral, ConnectionKernel, ModelKind, ModelSpec, Pad, Profile, SpatialGraph};
use crate::point_process::{fmt17, poisson_count, uniform_points};
use crate::rng::{combine, replicate_seed, CounterRng};
use crate::stats::{clopper_pearson_upper, ProportionEstimate};

/// Minimum replicate count accepted by the probability estimators.
pub const MIN_REPLICATES: u64 = 100;

const STRONG_COUNT: u64 = 0x5343;
const STRONG_POINTS: u64 = 0x5350;
const WEAK_COUNT: u64 = 0x5743;
const WEAK_POINTS: u64 = 0x5750;
const PAIR_STREAM: u64 = 0x5041;

/// Longest edge with both endpoints in `cube`, with its endpoints.
pub fn longest_internal_edge(graph: &SpatialGraph, cube: &Cube) -> (f64, Option<(usize, usize)>) {
    let cloud = graph.cloud();
    let mut best = (0.0, None);
    for a in cloud.indices_in(cube) {
        for &b in graph.neighbors(a) {
            let b = b as usize;
            if b > a && cube.contains(cloud.location(b)) {
                let len = dist(cloud.location(a), cloud.location(b));
                if len > best.0 {
                    best = (len, Some((a, b)));
                }
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LongEdgeOutcome {
    /// Some internal edge is longer than `n`.
    pub present: bool,
    /// Longest internal edge length, 0 without internal edges.
    pub longest: f64,
}

/// The event `L(m, n)`: an edge inside `Λ_m(o)` longer than `n`.
pub fn detect_long_edge(graph: &SpatialGraph, m: f64, n: f64) -> Result<LongEdgeOutcome> {
    let cloud = graph.cloud();
    let bx = Cube::at_origin(cloud.dim(), m);
    if !cloud.window().inner().covers(&bx) {
        return Err(Error::usage(format!(
            "box of side {m} exceeds the measurement window of side {}",
            cloud.window().side
        )));
    }
    let (longest, _) = longest_internal_edge(graph, &bx);
    Ok(LongEdgeOutcome {
        present: longest > n,
        longest,
    })
}

/// Value of `ζ`, possibly `-∞`, or undefined at a degenerate denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Zeta {
    Value(f64),
    Undefined,
}

impl Zeta {
    pub fn value(self) -> Option<f64> {
        match self {
            Zeta::Value(v) => Some(v),
            Zeta::Undefined => None,
        }
    }

    pub fn is_negative(self) -> bool {
        matches!(self, Zeta::Value(v) if v < 0.0)
    }
}

/// `num / den` with `num/0 = -∞` for negative `num`; `None` otherwise.
fn limit_ratio(num: f64, den: f64) -> Option<f64> {
    if den == 0.0 {
        (num < 0.0).then_some(f64::NEG_INFINITY)
    } else {
        Some(num / den)
    }
}

/// `max{2-δ, 1-(δ-1)/(γδ), (γ'+γ-1)/γ, 2(γ'+γ-1)/(γ'+γ)}`.
pub fn zeta(delta: f64, gamma: f64, gamma_prime: f64) -> Result<Zeta> {
    if !(0.0..1.0).contains(&gamma) || !(gamma_prime >= 0.0 && gamma_prime < 2.0 - gamma) || !(delta > 1.0) {
        return Err(Error::param(format!(
            "parameters outside the kernel range: delta={delta}, gamma={gamma}, gamma'={gamma_prime}"
        )));
    }
    let s = gamma + gamma_prime;
    let (t1, t2) = if delta == f64::INFINITY {
        (f64::NEG_INFINITY, limit_ratio(gamma - 1.0, gamma))
    } else {
        // 1 - (δ-1)/(γδ) = (γδ - δ + 1)/(γδ)
        (2.0 - delta, limit_ratio(gamma * delta - delta + 1.0, gamma * delta))
    };
    let t3 = limit_ratio(s - 1.0, gamma);
    let t4 = limit_ratio(2.0 * (s - 1.0), s);
    match (t2, t3, t4) {
        (Some(a), Some(b), Some(c)) => Ok(Zeta::Value(t1.max(a).max(b).max(c))),
        _ => Ok(Zeta::Undefined),
    }
}

pub fn kernel_zeta(kernel: &ConnectionKernel) -> Result<Zeta> {
    zeta(kernel.delta(), kernel.gamma, kernel.gamma_prime)
}

/// `r^{2d} ∫∫_{[ℓ,1]^2} ρ((u∧v)^γ (u∨v)^γ' r^d) du dv` with `ℓ = r^{d(ζ-1)}`.
pub fn bracket_integral(kernel: &ConnectionKernel, r: f64, dim: usize) -> Result<f64> {
    kernel.validate()?;
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::param(format!("bracket integral needs r > 1, got {r}")));
    }
    let z = kernel_zeta(kernel)?
        .value()
        .ok_or_else(|| Error::param("zeta is undefined for these parameters"))?;
    if kernel.amplitude == 0.0 {
        return Ok(0.0);
    }
    let d = dim as f64;
    let lower = if z == f64::NEG_INFINITY { 0.0 } else { r.powf(d * (z - 1.0)) };
    if lower >= 1.0 {
        return Ok(0.0);
    }
    let a0 = lower.max(1e-300).ln();
    let rd = r.powi(dim as i32);
    let (g, gp) = (kernel.gamma, kernel.gamma_prime);
    let f = |u: f64, v: f64| kernel.rho(u.powf(g) * v.powf(gp) * rd);
    let kinks = |b: f64| log_kinks(kernel, g, b.exp().powf(gp) * rd, a0, b);
    // outer breaks where the inner kink crosses either end of the inner range
    let lt = (kernel.kink() / rd).ln();
    let mut outer = vec![a0];
    let mut cand = Vec::new();
    if g + gp > 0.0 {
        cand.push(lt / (g + gp));
    }
    if gp > 0.0 {
        cand.push((lt - a0 * g) / gp);
    }
    cand.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    outer.extend(cand.into_iter().filter(|&b| b > a0 && b < 0.0));
    outer.push(0.0);
    let inner = symmetric_log_integral(f, kinks, &outer, 1e-10);
    Ok(r.powi(2 * dim as i32) * inner)
}

/// How `P(L(m,n))` is sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LongEdgeMethod {
    /// Lazy route when the model allows it, full graphs otherwise.
    #[default]
    Auto,
    /// Realize the graph on `Λ_m` and inspect it.
    Generic,
    /// Sample the strong vertices first; valid for indicator kernels on
    /// Poisson vertices.
    Lazy,
}

impl std::str::FromStr for LongEdgeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(LongEdgeMethod::Auto),
            "generic" => Ok(LongEdgeMethod::Generic),
            "lazy" => Ok(LongEdgeMethod::Lazy),
            _ => Err(Error::param(format!("unknown long-edge method {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LongEdgeEstimate {
    pub m: f64,
    pub n: f64,
    pub seed: u64,
    pub method: LongEdgeMethod,
    pub proportion: ProportionEstimate,
}

impl LongEdgeEstimate {
    /// Upper end of the reported interval: Wilson, or one-sided
    /// Clopper-Pearson at 95% for a zero-success cell.
    pub fn upper_bound(&self) -> f64 {
        if self.proportion.successes == 0 {
            clopper_pearson_upper(0, self.proportion.replicates, 0.05)
        } else {
            self.proportion.ci_hi
        }
    }
}

fn lazy_applicable(spec: &ModelSpec) -> Option<ConnectionKernel> {
    if matches!(spec.kind, ModelKind::Interference | ModelKind::Lrp | ModelKind::Ellipses) {
        return None;
    }
    if !matches!(spec.vertices, crate::models::VertexLaw::Poisson { .. }) {
        return None;
    }
    let k = spec.kernel().ok()?;
    (k.profile == Profile::Indicator && k.gamma + k.gamma_prime > 0.0).then_some(k)
}

/// One replicate of the lazy sampler.
///
/// An internal edge longer than `n` needs `(u∧v)^{γ+γ'} < n^{-d}`, so one
/// endpoint has a mark below `u* = n^{-d/(γ+γ')}`. Strong vertices are drawn
/// first; the rest of `Λ_m` is only sampled when one exists.
fn lazy_replicate(kernel: &ConnectionKernel, intensity: f64, dim: usize, m: f64, n: f64, seed: u64) -> bool {
    let bx = Cube::at_origin(dim, m);
    let vol = bx.volume();
    let ustar = n.powf(-(dim as f64) / (kernel.gamma + kernel.gamma_prime)).min(1.0);
    let ns = poisson_count(intensity * vol * ustar, combine(seed, STRONG_COUNT));
    if ns == 0 {
        return false;
    }
    let (sc, sm) = uniform_points(&bx, ns, combine(seed, STRONG_POINTS), 0.0, ustar);
    let nw = if ustar < 1.0 {
        poisson_count(intensity * vol * (1.0 - ustar), combine(seed, WEAK_COUNT))
    } else {
        0
    };
    let (wc, wm) = uniform_points(&bx, nw, combine(seed, WEAK_POINTS), ustar, 1.0);
    let mut rng = CounterRng::new(combine(seed, PAIR_STREAM));
    let coin = |p: f64, rng: &mut CounterRng| p >= 1.0 || (p > 0.0 && rng.unit() < p);
    for i in 0..ns {
        let xi = &sc[i * dim..(i + 1) * dim];
        for j in i + 1..ns {
            let r = dist(xi, &sc[j * dim..(j + 1) * dim]);
            if r > n && coin(kernel.probability(sm[i], sm[j], r, dim), &mut rng) {
                return true;
            }
        }
        for j in 0..nw {
            let r = dist(xi, &wc[j * dim..(j + 1) * dim]);
            if r > n && coin(kernel.probability(sm[i], wm[j], r, dim), &mut rng) {
                return true;
            }
        }
    }
    false
}

/// Monte Carlo estimate of `P(L(m, n))`.
pub fn estimate_p_long_edge(spec: &ModelSpec, m: f64, n: f64, replicates: u64, seed: u64) -> Result<LongEdgeEstimate> {
    estimate_p_long_edge_with(spec, m, n, replicates, seed, LongEdgeMethod::Auto)
}

pub fn estimate_p_long_edge_with(
    spec: &ModelSpec,
    m: f64,
    n: f64,
    replicates: u64,
    seed: u64,
    method: LongEdgeMethod,
) -> Result<LongEdgeEstimate> {
    if replicates < MIN_REPLICATES {
        return Err(Error::param(format!("need at least {MIN_REPLICATES} replicates, got {replicates}")));
    }
    let sampler = LongEdgeSampler::new(spec, m, n, method)?;
    let successes = (0..replicates)
        .into_par_iter()
        .map(|i| sampler.sample(i, seed).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(LongEdgeEstimate {
        m,
        n,
        seed,
        method: sampler.method(),
        proportion: ProportionEstimate::wilson(successes, replicates),
    })
}

/// Draws single replicates of the indicator of `L(m, n)`.
#[derive(Clone, Debug)]
pub struct LongEdgeSampler {
    spec: ModelSpec,
    m: f64,
    n: f64,
    method: LongEdgeMethod,
    lazy: Option<ConnectionKernel>,
    window: Window,
}

impl LongEdgeSampler {
    pub fn new(spec: &ModelSpec, m: f64, n: f64, method: LongEdgeMethod) -> Result<Self> {
        spec.validate()?;
        if !(m > 0.0 && m <= spec.side) {
            return Err(Error::usage(format!("box side {m} exceeds the window side {}", spec.side)));
        }
        if !(n >= 0.0) {
            return Err(Error::param("edge length threshold must be nonnegative"));
        }
        let lazy = lazy_applicable(spec);
        let method = match (method, &lazy) {
            (LongEdgeMethod::Auto, Some(_)) => LongEdgeMethod::Lazy,
            (LongEdgeMethod::Auto, None) => LongEdgeMethod::Generic,
            (LongEdgeMethod::Lazy, None) => {
                return Err(Error::usage("the lazy sampler needs an indicator kernel on Poisson vertices"))
            }
            (other, _) => other,
        };
        // edges among Λ_m only depend on its own vertices unless the model
        // reads the neighbourhood
        let window = if spec.kind == ModelKind::Interference {
            spec.window()?
        } else {
            Window::new(spec.dim, m, 0.0)?
        };
        let spec = spec.clone().with_pad(Pad::Fixed(window.pad));
        Ok(LongEdgeSampler {
            spec,
            m,
            n,
            method,
            lazy,
            window,
        })
    }

    /// The resolved method, never `Auto`.
    pub fn method(&self) -> LongEdgeMethod {
        self.method
    }

    /// Replicate `index` under the master `seed`.
    pub fn sample(&self, index: u64, seed: u64) -> Result<bool> {
        let s = replicate_seed(seed, index);
        match (self.method, &self.lazy) {
            (LongEdgeMethod::Lazy, Some(k)) => Ok(lazy_replicate(
                k,
                self.spec.vertices.density(),
                self.spec.dim,
                self.m,
                self.n,
                s,
            )),
            _ => {
                let g = self.spec.realize_in(&self.window, s)?;
                Ok(detect_long_edge(&g, self.m, self.n)?.present)
            }
        }
    }
}

/// Writes `m,n,replicates,successes,estimate,ci_lo,ci_hi,seed`.
pub fn write_long_edge_csv<W: Write>(rows: &[LongEdgeEstimate], mut out: W) -> Result<()> {
    writeln!(out, "m,n,replicates,successes,estimate,ci_lo,ci_hi,seed")?;
    for r in rows {
        let p = &r.proportion;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt17(r.m),
            fmt17(r.n),
            p.replicates,
            p.successes,
            fmt17(p.estimate),
            fmt17(p.ci_lo),
            fmt17(r.upper_bound()),
            r.seed
        )?;
    }
    Ok(())
}
