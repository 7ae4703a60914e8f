//! Edge generators shared by all pair-based models.
//!
//! A model exposes the exact probability of each pair plus, for the pair's
//! owner (the endpoint with the smaller mark), a radial envelope that
//! dominates it. The reference generator walks all pairs; the fast one
//! proposes candidates from the envelope ring by ring over a grid and thins.

use rayon::prelude::*;

use crate::geometry::dist;
use crate::point_process::{MarkedPointCloud, SpatialGrid};
use crate::rng::{combine, pair_uniform, CounterRng};

const FAST_STREAM: u64 = 0x4641_5354;

pub(crate) trait PairModel: Sync {
    /// Probability that `owner` and `other` are joined; `owner` is the
    /// endpoint selected by [`owns`].
    fn probability(&self, cloud: &MarkedPointCloud, owner: usize, other: usize, r: f64) -> f64;

    /// Nonincreasing bound on `probability(owner, ·)` at distance `>= r`.
    fn envelope(&self, cloud: &MarkedPointCloud, owner: usize, r: f64) -> f64;

    /// Distance beyond which the owner has no edges.
    fn reach(&self, _cloud: &MarkedPointCloud, _owner: usize) -> f64 {
        f64::INFINITY
    }
}

/// The endpoint with the smaller mark owns a pair; ties fall back to keys.
#[inline]
pub(crate) fn owns(cloud: &MarkedPointCloud, i: usize, j: usize) -> bool {
    let (ui, uj) = (cloud.mark(i), cloud.mark(j));
    ui < uj || (ui == uj && cloud.key(i) < cloud.key(j))
}

/// All-pairs reference generator with one keyed uniform per pair.
pub(crate) fn exact_edges<M: PairModel>(cloud: &MarkedPointCloud, model: &M, seed: u64) -> Vec<(usize, usize)> {
    let n = cloud.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = cloud.location(i);
            (i + 1..n).filter_map(move |j| {
                let r = dist(xi, cloud.location(j));
                let (o, t) = if owns(cloud, i, j) { (i, j) } else { (j, i) };
                let p = model.probability(cloud, o, t, r);
                (p > 0.0 && pair_uniform(seed, cloud.key(i), cloud.key(j)) < p).then_some((i, j))
            })
        })
        .collect()
}

/// Envelope-thinning generator over a uniform grid.
pub(crate) fn fast_edges<M: PairModel>(cloud: &MarkedPointCloud, model: &M, seed: u64) -> Vec<(usize, usize)> {
    let n = cloud.len();
    if n < 2 {
        return Vec::new();
    }
    let region = cloud.window().padded();
    let density = n as f64 / region.volume();
    let cell = (2.0 / density).powf(1.0 / cloud.dim() as f64);
    let grid = SpatialGrid::build(cloud, cell);
    let cell = grid.cell_size();
    let key = combine(seed, FAST_STREAM);
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| owner_edges(cloud, model, &grid, cell, key, i).into_iter())
        .collect()
}

fn owner_edges<M: PairModel>(
    cloud: &MarkedPointCloud,
    model: &M,
    grid: &SpatialGrid,
    cell: f64,
    key: u64,
    i: usize,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let reach = model.reach(cloud, i);
    if reach <= 0.0 {
        return out;
    }
    let xi = cloud.location(i);
    let center = grid.cell_coords(xi);
    let last_ring = grid.max_ring(&center);
    let mut rng = CounterRng::keyed(key, cloud.key(i));
    let mut ranges = Vec::new();
    let items = grid.items();
    let mut k0 = 0i64;
    while k0 <= last_ring {
        let k1 = (k0 + 1).max((k0 as f64 * 1.25).ceil() as i64);
        let rmin = ((k0 - 1).max(0)) as f64 * cell;
        if rmin > reach {
            break;
        }
        let q = model.envelope(cloud, i, rmin).min(1.0);
        if q <= 0.0 {
            break;
        }
        ranges.clear();
        grid.shell_ranges(&center, k0, k1, &mut ranges);
        let mut try_candidate = |j: usize, rng: &mut CounterRng| {
            if j == i || !owns(cloud, i, j) {
                return;
            }
            let r = dist(xi, cloud.location(j));
            if r > reach {
                return;
            }
            let p = model.probability(cloud, i, j, r);
            if p >= q || rng.unit() * q < p {
                out.push((i.min(j), i.max(j)));
            }
        };
        if q >= 0.5 {
            for &(s, e) in &ranges {
                for &j in &items[s..e] {
                    if q >= 1.0 || rng.unit() < q {
                        try_candidate(j as usize, &mut rng);
                    }
                }
            }
        } else {
            let log_miss = (-q).ln_1p();
            let mut range_idx = 0;
            let mut range_base = 0usize;
            let mut pos = 0usize;
            loop {
                let skip = (rng.open01().ln() / log_miss).floor();
                if !skip.is_finite() || skip > 1e15 {
                    break;
                }
                pos += skip as usize;
                while range_idx < ranges.len() && pos >= range_base + (ranges[range_idx].1 - ranges[range_idx].0) {
                    range_base += ranges[range_idx].1 - ranges[range_idx].0;
                    range_idx += 1;
                }
                if range_idx >= ranges.len() {
                    break;
                }
                let j = items[ranges[range_idx].0 + pos - range_base] as usize;
                try_candidate(j, &mut rng);
                pos += 1;
            }
        }
        k0 = k1;
    }
    out
}
