//! Covariances of local-event indicators in two separated boxes.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Cube, Window};
use crate::long_edges::longest_internal_edge;
use crate::models::{ModelKind, ModelSpec, SpatialGraph};
use crate::point_process::fmt17;
use crate::rng::{replicate_seed, CounterRng};
use crate::stats::{fit_exponent, ExponentFit};

/// Indicator depending on the vertices and edges inside a box.
pub type Evaluator = Arc<dyn Fn(&SpatialGraph, &Cube) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum LocalEvent {
    /// Some internal edge is longer than a hundredth of the box side.
    Stage0Bad,
    /// Some internal edge is longer than the given length.
    HasLongEdge(f64),
    /// The box-induced subgraph has a component of at least this many vertices.
    ComponentOfSize(usize),
    /// Constant indicator.
    Always,
    Custom { name: String, eval: Evaluator },
}

impl fmt::Debug for LocalEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl LocalEvent {
    pub fn custom(name: impl Into<String>, eval: impl Fn(&SpatialGraph, &Cube) -> bool + Send + Sync + 'static) -> Self {
        LocalEvent::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> String {
        match self {
            LocalEvent::Stage0Bad => "stage0-bad".into(),
            LocalEvent::HasLongEdge(n) => format!("has-long-edge({n})"),
            LocalEvent::ComponentOfSize(k) => format!("component-of-size({k})"),
            LocalEvent::Always => "always".into(),
            LocalEvent::Custom { name, .. } => name.clone(),
        }
    }

    /// Parses `stage0-bad`, `has-long-edge(n)`, `component-of-size(k)` and
    /// `always`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
        };
        if s == "stage0-bad" {
            Ok(LocalEvent::Stage0Bad)
        } else if s == "always" {
            Ok(LocalEvent::Always)
        } else if let Some(a) = arg("has-long-edge") {
            let n: f64 = a.parse().map_err(|_| Error::param(format!("bad edge length in {s}")))?;
            if !(n >= 0.0) {
                return Err(Error::param("edge length must be nonnegative"));
            }
            Ok(LocalEvent::HasLongEdge(n))
        } else if let Some(a) = arg("component-of-size") {
            let k: usize = a.parse().map_err(|_| Error::param(format!("bad component size in {s}")))?;
            Ok(LocalEvent::ComponentOfSize(k))
        } else {
            Err(Error::param(format!("unknown local event {s:?}")))
        }
    }

    pub fn evaluate(&self, graph: &SpatialGraph, cube: &Cube) -> bool {
        match self {
            LocalEvent::Stage0Bad => longest_internal_edge(graph, cube).0 > cube.side / 100.0,
            LocalEvent::HasLongEdge(n) => longest_internal_edge(graph, cube).0 > *n,
            LocalEvent::ComponentOfSize(k) => largest_component_in(graph, cube) >= *k,
            LocalEvent::Always => true,
            LocalEvent::Custom { eval, .. } => eval(graph, cube),
        }
    }
}

/// Size of the largest component of the subgraph induced by `cube`.
pub fn largest_component_in(graph: &SpatialGraph, cube: &Cube) -> usize {
    let inside: Vec<bool> = (0..graph.vertex_count()).map(|v| cube.contains(graph.location(v))).collect();
    let mut seen = vec![false; inside.len()];
    let mut best = 0;
    let mut stack = Vec::new();
    for s in 0..inside.len() {
        if !inside[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        stack.push(s);
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &w in graph.neighbors(v) {
                let w = w as usize;
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        best = best.max(size);
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingEstimate {
    pub event: String,
    pub m: f64,
    pub x: Vec<f64>,
    pub replicates: u64,
    pub covariance: f64,
    pub stderr: f64,
    /// Frequencies of the two indicators.
    pub mean_a: f64,
    pub mean_b: f64,
}

impl MixingEstimate {
    pub fn x_norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Unbiased sample covariance of paired indicators and the standard error
/// `sqrt(Var((A-Ā)(B-B̄))/N)`.
pub fn indicator_covariance(a: &[bool], b: &[bool]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if a.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let ma = a.iter().filter(|&&v| v).count() as f64 / n;
    let mb = b.iter().filter(|&&v| v).count() as f64 / n;
    let prods: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as u8 as f64 - ma) * (y as u8 as f64 - mb))
        .collect();
    let mean = prods.iter().sum::<f64>() / n;
    let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean * n / (n - 1.0), (var / n).sqrt())
}

/// Window holding `Λ_m(o)` and `Λ_m(m x)`.
pub fn joint_window(dim: usize, m: f64, x: &[f64], pad: f64) -> Result<Window> {
    if x.len() != dim {
        return Err(Error::usage("displacement has the wrong dimension"));
    }
    let sup = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Window::centered(x.iter().map(|v| m * v / 2.0).collect(), m * (sup + 1.0), pad)
}

fn probe_cube(spec: &ModelSpec, graph: &SpatialGraph, cube: &Cube) -> Result<Cube> {
    if spec.kind != ModelKind::Interference {
        return Ok(cube.clone());
    }
    let params = spec.interference_params()?;
    let reach = graph
        .cloud()
        .indices_in(cube)
        .into_iter()
        .map(|v| params.radius(graph.cloud().mark(v), spec.dim))
        .fold(0.0f64, f64::max);
    Ok(Cube::new(cube.center.clone(), cube.side + 2.0 * reach))
}

/// Re-evaluates `event` on the graph restricted to the box (or to the box
/// plus interference radius) and fails if the value changes.
pub fn locality_probe(spec: &ModelSpec, event: &LocalEvent, graph: &SpatialGraph, cube: &Cube) -> Result<bool> {
    let full = event.evaluate(graph, cube);
    let (sub, _) = graph.restrict_to(&probe_cube(spec, graph, cube)?);
    if event.evaluate(&sub, cube) != full {
        return Err(Error::Contract(format!(
            "event {} reads outside its box",
            event.name()
        )));
    }
    Ok(full)
}

/// Replicates that also run the locality probe.
const PROBE_EVERY: u64 = 16;

/// Joint window with the model's pad; an automatic pad is sized for the
/// joint window.
pub fn mixing_window(spec: &ModelSpec, m: f64, x: &[f64]) -> Result<Window> {
    let bare = joint_window(spec.dim, m, x, 0.0)?;
    let pad = spec.clone().with_side(bare.side).resolve_pad()?;
    joint_window(spec.dim, m, x, pad)
}

/// Both indicators on one realization of `window` (see [`mixing_window`]).
pub fn mixing_replicate(
    spec: &ModelSpec,
    event: &LocalEvent,
    window: &Window,
    m: f64,
    x: &[f64],
    index: u64,
    seed: u64,
) -> Result<(bool, bool)> {
    let g = spec.realize_in(window, replicate_seed(seed, index))?;
    let a = Cube::at_origin(spec.dim, m);
    let b = Cube::new(x.iter().map(|v| m * v).collect(), m);
    if index % PROBE_EVERY == 0 {
        Ok((locality_probe(spec, event, &g, &a)?, locality_probe(spec, event, &g, &b)?))
    } else {
        Ok((event.evaluate(&g, &a), event.evaluate(&g, &b)))
    }
}

fn check_args(spec: &ModelSpec, m: f64, x: &[f64], replicates: u64) -> Result<()> {
    spec.validate()?;
    if x.len() != spec.dim {
        return Err(Error::usage("displacement has the wrong dimension"));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 2.0) {
        return Err(Error::usage(format!("displacement norm must exceed 2, got {norm}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::param(format!("box side must be positive, got {m}")));
    }
    if replicates < 2 {
        return Err(Error::param("need at least 2 replicates"));
    }
    Ok(())
}

/// Covariance of `1_E(Λ_m(o))` and `1_E(Λ_m(m x))`.
pub fn estimate_mixing(
    spec: &ModelSpec,
    event: &LocalEvent,
    m: f64,
    x: &[f64],
    replicates: u64,
    seed: u64,
) -> Result<MixingEstimate> {
    check_args(spec, m, x, replicates)?;
    let window = mixing_window(spec, m, x)?;
    let pairs = (0..replicates)
        .into_par_iter()
        .map(|i| mixing_replicate(spec, event, &window, m, x, i, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(event.name(), m, x.to_vec(), &pairs))
}

/// Aggregates indicator pairs into an estimate.
pub fn summarize(event: String, m: f64, x: Vec<f64>, pairs: &[(bool, bool)]) -> MixingEstimate {
    let a: Vec<bool> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<bool> = pairs.iter().map(|p| p.1).collect();
    let (covariance, stderr) = indicator_covariance(&a, &b);
    let n = pairs.len().max(1) as f64;
    MixingEstimate {
        event,
        m,
        x,
        replicates: pairs.len() as u64,
        covariance,
        stderr,
        mean_a: a.iter().filter(|&&v| v).count() as f64 / n,
        mean_b: b.iter().filter(|&&v| v).count() as f64 / n,
    }
}

/// Synthetic indicator pairs with covariance `target`: both are fair coins
/// and `B` copies `A` with probability `4 target`.
pub fn planted_estimate(m: f64, target: f64, replicates: u64, seed: u64) -> Result<MixingEstimate> {
    if !(0.0..=0.25).contains(&target) {
        return Err(Error::param("planted covariance must lie in [0, 1/4]"));
    }
    let pairs: Vec<(bool, bool)> = (0..replicates)
        .map(|i| {
            let mut r = CounterRng::new(replicate_seed(seed, i));
            let a = r.unit() < 0.5;
            let b = if r.unit() < 4.0 * target { a } else { r.unit() < 0.5 };
            (a, b)
        })
        .collect();
    Ok(summarize("planted".into(), m, vec![4.0], &pairs))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingFit {
    /// Fit over the significant scales, when there are at least three.
    pub fit: Option<ExponentFit>,
    /// Scales with `|covariance| > 3 stderr`.
    pub significant: Vec<f64>,
    pub reliable: bool,
}

/// OLS of `log |cov|` on `log m` over the scales where the covariance is
/// distinguishable from noise.
pub fn fit_mixing_exponent(estimates: &[MixingEstimate]) -> MixingFit {
    let pts: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| e.covariance.abs() > 3.0 * e.stderr)
        .map(|e| (e.m, e.covariance.abs()))
        .collect();
    let significant: Vec<f64> = pts.iter().map(|p| p.0).collect();
    if pts.len() < 3 {
        return MixingFit {
            fit: None,
            significant,
            reliable: false,
        };
    }
    let fit = fit_exponent(&pts).ok();
    MixingFit {
        reliable: fit.is_some(),
        fit,
        significant,
    }
}

/// Writes `event,m,x_norm,replicates,covariance,stderr`.
pub fn write_mixing_csv<W: Write>(rows: &[MixingEstimate], mut out: W) -> Result<()> {
    writeln!(out, "event,m,x_norm,replicates,covariance,stderr")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.event,
            fmt17(r.m),
            fmt17(r.x_norm()),
            r.replicates,
            fmt17(r.covariance),
            fmt17(r.stderr)
        )?;
    }
    Ok(())
}
