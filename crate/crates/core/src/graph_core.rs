//! Chemical distances and distance-based events.

use std::collections::VecDeque;
use std::io::Write;

use statrs::statistics::{Data, OrderStatistics};

use crate::error::{Error, Result};
use crate::geometry::{dist, Cube};
use crate::models::SpatialGraph;
use crate::point_process::fmt17;
use crate::rng::CounterRng;

/// Hop count; [`UNREACHABLE`] encodes `min ∅ = ∞`.
pub type Hops = u32;

pub const UNREACHABLE: Hops = Hops::MAX;

fn check_vertex(graph: &SpatialGraph, v: usize) -> Result<()> {
    if v >= graph.vertex_count() {
        return Err(Error::usage(format!(
            "vertex {v} out of range for a graph with {} vertices",
            graph.vertex_count()
        )));
    }
    Ok(())
}

/// Reusable breadth-first search buffers.
#[derive(Default)]
struct Bfs {
    dist: Vec<Hops>,
    queue: VecDeque<u32>,
}

impl Bfs {
    fn run(&mut self, graph: &SpatialGraph, source: usize, target: Option<usize>, depth: Hops) {
        self.dist.clear();
        self.dist.resize(graph.vertex_count(), UNREACHABLE);
        self.queue.clear();
        self.dist[source] = 0;
        self.queue.push_back(source as u32);
        if target == Some(source) {
            return;
        }
        while let Some(v) = self.queue.pop_front() {
            let dv = self.dist[v as usize];
            if dv >= depth {
                continue;
            }
            for &w in graph.neighbors(v as usize) {
                if self.dist[w as usize] == UNREACHABLE {
                    self.dist[w as usize] = dv + 1;
                    if target == Some(w as usize) {
                        return;
                    }
                    self.queue.push_back(w);
                }
            }
        }
    }
}

/// Length of a shortest path between two vertices.
pub fn chemical_distance(graph: &SpatialGraph, source: usize, target: usize) -> Result<Hops> {
    check_vertex(graph, source)?;
    check_vertex(graph, target)?;
    let mut bfs = Bfs::default();
    bfs.run(graph, source, Some(target), UNREACHABLE);
    Ok(bfs.dist[target])
}

/// Single-source distances to every vertex.
pub fn distances_from(graph: &SpatialGraph, source: usize) -> Result<Vec<Hops>> {
    check_vertex(graph, source)?;
    let mut bfs = Bfs::default();
    bfs.run(graph, source, None, UNREACHABLE);
    Ok(bfs.dist)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceEventSpec {
    /// Side of the inner box around the origin.
    pub l: f64,
    /// Side of the outer box around the origin.
    pub m: f64,
    pub eta: f64,
}

impl DistanceEventSpec {
    pub fn new(l: f64, m: f64, eta: f64) -> Result<Self> {
        if !(l > 0.0 && l < m && m.is_finite()) {
            return Err(Error::param(format!("need 0 < L < m, got L={l}, m={m}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param(format!("eta must be positive, got {eta}")));
        }
        Ok(DistanceEventSpec { l, m, eta })
    }
}

/// A pair violating linear growth of the chemical distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceWitness {
    pub x: usize,
    pub y: usize,
    pub hops: Hops,
    pub euclidean: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceEventOutcome {
    pub holds: bool,
    pub witness: Option<DistanceWitness>,
}

/// Checks `d(x,y) >= η|x-y|` for all `x` in `Λ_L(o)` and all measured `y`
/// outside `Λ_m(o)`.
///
/// Targets range over the measurement window only. The witness is the
/// violating pair with the smallest `x`, then the smallest `y`.
pub fn check_d_event(graph: &SpatialGraph, spec: &DistanceEventSpec) -> Result<DistanceEventOutcome> {
    let cloud = graph.cloud();
    let window = cloud.window();
    let inner = window.inner();
    let dim = cloud.dim();
    let outer = Cube::at_origin(dim, spec.m);
    if !inner.covers(&outer) {
        return Err(Error::usage(format!(
            "measurement window side {} does not contain the box of side {} at the origin",
            window.side, spec.m
        )));
    }
    let sources = cloud.indices_in(&Cube::at_origin(dim, spec.l));
    let targets: Vec<usize> = cloud
        .indices_in(&inner)
        .into_iter()
        .filter(|&y| !outer.contains(cloud.location(y)))
        .collect();
    let mut bfs = Bfs::default();
    for &x in &sources {
        let xl = cloud.location(x);
        let reach = targets
            .iter()
            .map(|&y| spec.eta * dist(xl, cloud.location(y)))
            .fold(0.0f64, f64::max);
        // only hops below η|x-y| can violate
        let depth = reach.ceil().min(UNREACHABLE as f64 - 1.0) as Hops;
        bfs.run(graph, x, None, depth);
        for &y in &targets {
            let h = bfs.dist[y];
            if h == UNREACHABLE {
                continue;
            }
            let e = dist(xl, cloud.location(y));
            if (h as f64) < spec.eta * e {
                return Ok(DistanceEventOutcome {
                    holds: false,
                    witness: Some(DistanceWitness {
                        x,
                        y,
                        hops: h,
                        euclidean: e,
                    }),
                });
            }
        }
    }
    Ok(DistanceEventOutcome {
        holds: true,
        witness: None,
    })
}

/// Summary of `d(x,y)/|x-y|` over pairs at one distance scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub radius: f64,
    pub count: usize,
    pub median_ratio: f64,
    pub q25: f64,
    pub q75: f64,
}

impl ProfileRow {
    pub fn summarize(radius: f64, ratios: &[f64]) -> ProfileRow {
        if ratios.is_empty() {
            return ProfileRow {
                radius,
                count: 0,
                median_ratio: f64::NAN,
                q25: f64::NAN,
                q75: f64::NAN,
            };
        }
        let mut data = Data::new(ratios.to_vec());
        ProfileRow {
            radius,
            count: ratios.len(),
            median_ratio: data.median(),
            q25: data.lower_quartile(),
            q75: data.upper_quartile(),
        }
    }

    /// No connected pair was found at this radius.
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Samples connected pairs with `|x-y| ∈ [r, 1.1 r]` for each radius and
/// returns their ratios `d(x,y)/|x-y|`, one list per radius.
///
/// Sources are drawn without replacement from the measurement window; each
/// source contributes at most one target per radius, chosen uniformly among
/// the connected measured vertices in the shell.
pub fn distance_ratio_samples(graph: &SpatialGraph, radii: &[f64], samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let cloud = graph.cloud();
    let inner = cloud.window().inner();
    for &r in radii {
        if !(r > 0.0) || 1.1 * r > inner.side * (cloud.dim() as f64).sqrt() {
            return Err(Error::usage(format!("radius {r} does not fit inside the measurement window")));
        }
    }
    let mut out = vec![Vec::with_capacity(samples); radii.len()];
    let mut pool = cloud.indices_in(&inner);
    if pool.is_empty() || samples == 0 {
        return Ok(out);
    }
    let mut rng = CounterRng::new(seed);
    let max_sources = pool.len().min(20 * samples.max(1));
    let mut bfs = Bfs::default();
    for drawn in 0..max_sources {
        if out.iter().all(|v| v.len() >= samples) {
            break;
        }
        // partial Fisher-Yates draw
        let k = drawn + ((rng.unit() * (pool.len() - drawn) as f64) as usize).min(pool.len() - drawn - 1);
        pool.swap(drawn, k);
        let x = pool[drawn];
        let xl = cloud.location(x);
        bfs.run(graph, x, None, UNREACHABLE);
        for (ri, &r) in radii.iter().enumerate() {
            if out[ri].len() >= samples {
                continue;
            }
            // pool holds every measured vertex in a seed-dependent order
            let mut shell: Vec<usize> = pool
                .iter()
                .copied()
                .filter(|&y| {
                    let e = dist(xl, cloud.location(y));
                    e >= r && e <= 1.1 * r && bfs.dist[y] != UNREACHABLE
                })
                .collect();
            shell.sort_unstable();
            if shell.is_empty() {
                continue;
            }
            let y = shell[((rng.unit() * shell.len() as f64) as usize).min(shell.len() - 1)];
            out[ri].push(bfs.dist[y] as f64 / dist(xl, cloud.location(y)));
        }
    }
    Ok(out)
}

pub fn distance_ratio_profile(graph: &SpatialGraph, radii: &[f64], samples: usize, seed: u64) -> Result<Vec<ProfileRow>> {
    let ratios = distance_ratio_samples(graph, radii, samples, seed)?;
    Ok(radii
        .iter()
        .zip(&ratios)
        .map(|(&r, v)| ProfileRow::summarize(r, v))
        .collect())
}

/// Writes the profile CSV `radius,count,median_ratio,q25,q75`.
pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], mut out: W) -> Result<()> {
    writeln!(out, "radius,count,median_ratio,q25,q75")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt17(r.radius),
            r.count,
            fmt17(r.median_ratio),
            fmt17(r.q25),
            fmt17(r.q75)
        )?;
    }
    Ok(())
}
