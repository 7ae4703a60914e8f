//! Vertex layer: marked Poisson clouds and Bernoulli site-percolated lattices.

use std::io::Write;

use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::geometry::{Cube, Window};
use crate::rng::{combine, mix64, CounterRng};

/// Hard cap on the expected number of generated points.
pub const MAX_EXPECTED_POINTS: f64 = 1e8;

const COUNT_STREAM: u64 = 0x434f_554e_54;
const POINT_STREAM: u64 = 0x504f_494e_54;
const SITE_STREAM: u64 = 0x5349_5445;
const ORIENT_STREAM: u64 = 0x4f52_4945_4e54;

/// Vertex locations with i.i.d. uniform marks in (0,1).
///
/// Locations are stored as one flat `n * dim` array. Each point also carries a
/// 64-bit key derived from its content; pair randomness downstream is keyed by
/// these, so relabelling the points does not change any realised edge.
#[derive(Clone, Debug)]
pub struct MarkedPointCloud {
    dim: usize,
    coords: Vec<f64>,
    marks: Vec<f64>,
    orientations: Option<Vec<f64>>,
    keys: Vec<u64>,
    window: Window,
    seed: u64,
    lattice: bool,
}

fn content_key(loc: &[f64], mark: f64) -> u64 {
    let mut k = mix64(mark.to_bits());
    for x in loc {
        k = combine(k, x.to_bits());
    }
    k
}

impl MarkedPointCloud {
    /// Assembles a cloud from raw parts, checking the cloud invariants.
    pub fn from_parts(
        window: Window,
        seed: u64,
        coords: Vec<f64>,
        marks: Vec<f64>,
        orientations: Option<Vec<f64>>,
        lattice: bool,
    ) -> Result<Self> {
        window.validate()?;
        let dim = window.dim;
        if coords.len() != marks.len() * dim {
            return Err(Error::param("coordinate array does not match mark count"));
        }
        if let Some(o) = &orientations {
            if o.len() != marks.len() {
                return Err(Error::param("orientation array does not match mark count"));
            }
            if o.iter().any(|&t| !(0.0..std::f64::consts::PI).contains(&t)) {
                return Err(Error::param("orientation outside [0, pi)"));
            }
        }
        if marks.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::param("marks must lie strictly inside (0,1)"));
        }
        let padded = window.padded();
        for p in coords.chunks_exact(dim) {
            if !padded.contains(p) {
                return Err(Error::param(format!("location {p:?} outside the padded window")));
            }
        }
        let keys = coords
            .chunks_exact(dim)
            .zip(&marks)
            .map(|(p, &u)| content_key(p, u))
            .collect();
        Ok(MarkedPointCloud {
            dim,
            coords,
            marks,
            orientations,
            keys,
            window,
            seed,
            lattice,
        })
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice
    }

    #[inline]
    pub fn location(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn mark(&self, i: usize) -> f64 {
        self.marks[i]
    }

    #[inline]
    pub fn key(&self, i: usize) -> u64 {
        self.keys[i]
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn orientations(&self) -> Option<&[f64]> {
        self.orientations.as_deref()
    }

    /// Attaches i.i.d. uniform orientations in [0, π), keyed by point keys.
    pub fn with_orientations(mut self, seed: u64) -> Self {
        let base = combine(seed, ORIENT_STREAM);
        let o = self
            .keys
            .iter()
            .map(|&k| CounterRng::keyed(base, k).unit() * std::f64::consts::PI)
            .collect();
        self.orientations = Some(o);
        self
    }

    /// Indices of points inside `cube`.
    pub fn indices_in(&self, cube: &Cube) -> Vec<usize> {
        (0..self.len()).filter(|&i| cube.contains(self.location(i))).collect()
    }

    /// Sub-cloud made of the listed points, in the listed order.
    pub fn select(&self, idx: &[usize]) -> MarkedPointCloud {
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        let mut marks = Vec::with_capacity(idx.len());
        let mut keys = Vec::with_capacity(idx.len());
        let mut orient = self.orientations.as_ref().map(|_| Vec::with_capacity(idx.len()));
        for &i in idx {
            coords.extend_from_slice(self.location(i));
            marks.push(self.marks[i]);
            keys.push(self.keys[i]);
            if let (Some(o), Some(src)) = (orient.as_mut(), self.orientations.as_ref()) {
                o.push(src[i]);
            }
        }
        MarkedPointCloud {
            dim: self.dim,
            coords,
            marks,
            orientations: orient,
            keys,
            window: self.window.clone(),
            seed: self.seed,
            lattice: self.lattice,
        }
    }

    /// Exact check that no two points share a location.
    pub fn is_simple(&self) -> bool {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.location(a)
                .iter()
                .zip(self.location(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx.windows(2).all(|w| self.location(w[0]) != self.location(w[1]))
    }

    /// Writes the vertex CSV: `id,x1,...,xd,mark[,orientation]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("id");
        for a in 1..=self.dim {
            header.push_str(&format!(",x{a}"));
        }
        header.push_str(",mark");
        if self.orientations.is_some() {
            header.push_str(",orientation");
        }
        writeln!(out, "{header}")?;
        for i in 0..self.len() {
            write!(out, "{i}")?;
            for x in self.location(i) {
                write!(out, ",{}", fmt17(*x))?;
            }
            write!(out, ",{}", fmt17(self.marks[i]))?;
            if let Some(o) = &self.orientations {
                write!(out, ",{}", fmt17(o[i]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Decimal float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Homogeneous marked Poisson process on the padded window.
pub fn sample_poisson(window: &Window, intensity: f64, seed: u64) -> Result<MarkedPointCloud> {
    window.validate()?;
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(Error::param(format!("intensity must be positive, got {intensity}")));
    }
    let region = window.padded();
    let mean = intensity * region.volume();
    if mean > MAX_EXPECTED_POINTS {
        return Err(Error::resource(format!(
            "expected {mean:.3e} points exceeds the limit of {MAX_EXPECTED_POINTS:e}"
        )));
    }
    let n = poisson_count(mean, combine(seed, COUNT_STREAM));
    let (coords, marks) = uniform_points(&region, n, combine(seed, POINT_STREAM), 0.0, 1.0);
    MarkedPointCloud::from_parts(window.clone(), seed, coords, marks, None, false)
}

/// Poisson variate with the given mean drawn from a keyed stream.
pub(crate) fn poisson_count(mean: f64, key: u64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let mut rng = CounterRng::new(key);
    Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize
}

/// `n` uniform locations in `region` with marks uniform on `(mark_lo, mark_hi)`.
/// Point `i` only reads the stream keyed by `(key, i)`.
pub(crate) fn uniform_points(
    region: &Cube,
    n: usize,
    key: u64,
    mark_lo: f64,
    mark_hi: f64,
) -> (Vec<f64>, Vec<f64>) {
    let dim = region.dim();
    let mut coords = Vec::with_capacity(n * dim);
    let mut marks = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = CounterRng::keyed(key, i as u64);
        for a in 0..dim {
            let lo = region.lower(a);
            let hi = region.upper(a);
            let mut x = lo + rng.unit() * region.side;
            if x >= hi {
                x = lo;
            }
            coords.push(x);
        }
        let u = loop {
            let u = mark_lo + rng.open01() * (mark_hi - mark_lo);
            if u > mark_lo && u < mark_hi && u > 0.0 && u < 1.0 {
                break u;
            }
        };
        marks.push(u);
    }
    (coords, marks)
}

/// Bernoulli site percolation of `Z^d` inside the padded window.
pub fn sample_site_lattice(window: &Window, retention: f64, seed: u64) -> Result<MarkedPointCloud> {
    window.validate()?;
    if !(retention > 0.0 && retention <= 1.0) {
        return Err(Error::param(format!("retention must lie in (0,1], got {retention}")));
    }
    let region = window.padded();
    let dim = window.dim;
    let ranges: Vec<(i64, i64)> = (0..dim)
        .map(|a| (region.lower(a).ceil() as i64, region.upper(a).ceil() as i64))
        .collect();
    let total: f64 = ranges.iter().map(|(lo, hi)| (hi - lo).max(0) as f64).product();
    if total * retention > MAX_EXPECTED_POINTS {
        return Err(Error::resource(format!("lattice of {total:.3e} sites exceeds the limit")));
    }
    let key = combine(seed, SITE_STREAM);
    let mut coords = Vec::new();
    let mut marks = Vec::new();
    let mut site: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|(lo, hi)| hi <= lo) {
        return MarkedPointCloud::from_parts(window.clone(), seed, coords, marks, None, true);
    }
    let mut linear: u64 = 0;
    loop {
        let mut rng = CounterRng::keyed(key, linear);
        let keep = retention >= 1.0 || rng.unit() < retention;
        let mark = rng.open01();
        if keep {
            coords.extend(site.iter().map(|&z| z as f64));
            marks.push(mark);
        }
        linear += 1;
        // odometer over the box, last axis fastest
        let mut axis = dim;
        loop {
            if axis == 0 {
                return MarkedPointCloud::from_parts(window.clone(), seed, coords, marks, None, true);
            }
            axis -= 1;
            site[axis] += 1;
            if site[axis] < ranges[axis].1 {
                break;
            }
            site[axis] = ranges[axis].0;
        }
    }
}

/// Uniform grid over the padded window in compressed row layout.
///
/// Cells are ordered with the last axis varying fastest, so a run of cells
/// along the last axis maps to one contiguous slice of [`SpatialGrid::items`].
#[derive(Clone, Debug)]
pub struct SpatialGrid {
    dim: usize,
    origin: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    start: Vec<usize>,
    items: Vec<u32>,
}

impl SpatialGrid {
    pub fn build(cloud: &MarkedPointCloud, cell: f64) -> SpatialGrid {
        let region = cloud.window().padded();
        let dim = cloud.dim();
        let cap = (4 * cloud.len()).max(64) as f64;
        let mut cell = cell.max(region.side * 1e-9);
        if (region.side / cell).powi(dim as i32) > cap {
            cell = region.side / cap.powf(1.0 / dim as f64);
        }
        let per_axis = ((region.side / cell).ceil() as usize).max(1);
        let shape = vec![per_axis; dim];
        let origin: Vec<f64> = (0..dim).map(|a| region.lower(a)).collect();
        let ncells: usize = shape.iter().product();
        let mut counts = vec![0usize; ncells + 1];
        let mut cell_of = Vec::with_capacity(cloud.len());
        for i in 0..cloud.len() {
            let c = Self::linear_index(&origin, cell, &shape, cloud.location(i));
            counts[c + 1] += 1;
            cell_of.push(c);
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let start = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; cloud.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            items[fill[c]] = i as u32;
            fill[c] += 1;
        }
        // key order inside a cell keeps grid walks independent of vertex ids
        for c in 0..ncells {
            items[start[c]..start[c + 1]].sort_unstable_by_key(|&i| cloud.key(i as usize));
        }
        SpatialGrid {
            dim,
            origin,
            cell,
            shape,
            start,
            items,
        }
    }

    fn linear_index(origin: &[f64], cell: f64, shape: &[usize], p: &[f64]) -> usize {
        let mut idx = 0;
        for a in 0..p.len() {
            let c = (((p[a] - origin[a]) / cell).floor().max(0.0) as usize).min(shape[a] - 1);
            idx = idx * shape[a] + c;
        }
        idx
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Cell coordinates of a location (clamped to the grid).
    pub fn cell_coords(&self, p: &[f64]) -> Vec<i64> {
        (0..self.dim)
            .map(|a| {
                (((p[a] - self.origin[a]) / self.cell).floor() as i64).clamp(0, self.shape[a] as i64 - 1)
            })
            .collect()
    }

    /// Appends the item ranges of all cells whose Chebyshev cell distance
    /// from `center` lies in `[k_in, k_out)`.
    pub fn shell_ranges(&self, center: &[i64], k_in: i64, k_out: i64, out: &mut Vec<(usize, usize)>) {
        if k_out <= k_in {
            return;
        }
        let d = self.dim;
        let r = k_out - 1;
        let lo: Vec<i64> = (0..d).map(|a| (center[a] - r).max(0)).collect();
        let hi: Vec<i64> = (0..d).map(|a| (center[a] + r).min(self.shape[a] as i64 - 1)).collect();
        if (0..d).any(|a| lo[a] > hi[a]) {
            return;
        }
        let last = d - 1;
        let mut prefix: Vec<i64> = lo[..last].to_vec();
        loop {
            let prefix_cheb = prefix
                .iter()
                .enumerate()
                .map(|(a, &c)| (c - center[a]).abs())
                .max()
                .unwrap_or(0);
            let base = prefix
                .iter()
                .enumerate()
                .fold(0usize, |acc, (a, &c)| acc * self.shape[a] + c as usize)
                * self.shape[last];
            let mut push = |a: i64, b: i64| {
                let a = a.max(lo[last]);
                let b = b.min(hi[last]);
                if a <= b {
                    let s = self.start[base + a as usize];
                    let e = self.start[base + b as usize + 1];
                    if e > s {
                        out.push((s, e));
                    }
                }
            };
            if prefix_cheb >= k_in {
                push(center[last] - r, center[last] + r);
            } else {
                push(center[last] - r, center[last] - k_in);
                push(center[last] + k_in, center[last] + r);
            }
            // advance prefix odometer
            let mut axis = last;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                prefix[axis] += 1;
                if prefix[axis] <= hi[axis] {
                    break;
                }
                prefix[axis] = lo[axis];
            }
        }
    }

    /// Number of cell rings needed from `center` to cover the whole grid.
    pub fn max_ring(&self, center: &[i64]) -> i64 {
        (0..self.dim)
            .map(|a| center[a].max(self.shape[a] as i64 - 1 - center[a]))
            .max()
            .unwrap_or(0)
    }

    /// Calls `f(j)` for every point `j` with `|p - x_j| <= r`.
    pub fn for_each_within(&self, cloud: &MarkedPointCloud, p: &[f64], r: f64, mut f: impl FnMut(usize)) {
        let center = self.cell_coords(p);
        let k = (r / self.cell).ceil() as i64 + 1;
        let mut ranges = Vec::new();
        self.shell_ranges(&center, 0, k + 1, &mut ranges);
        let r2 = r * r;
        for (s, e) in ranges {
            for &j in &self.items[s..e] {
                let j = j as usize;
                if crate::geometry::dist2(p, cloud.location(j)) <= r2 {
                    f(j);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_intensity_rejected() {
        let w = Window::new(2, 10.0, 0.0).unwrap();
        assert!(matches!(sample_poisson(&w, 0.0, 1), Err(Error::Parameter(_))));
        assert!(matches!(sample_poisson(&w, -1.0, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn count_overflow_rejected() {
        let w = Window::new(2, 1e5, 0.0).unwrap();
        assert!(matches!(sample_poisson(&w, 1.0, 1), Err(Error::Resource(_))));
    }

    #[test]
    fn poisson_deterministic() {
        let w = Window::new(2, 30.0, 2.0).unwrap();
        let a = sample_poisson(&w, 1.0, 42).unwrap();
        let b = sample_poisson(&w, 1.0, 42).unwrap();
        assert_eq!(a.coords(), b.coords());
        assert_eq!(a.marks(), b.marks());
        let c = sample_poisson(&w, 1.0, 43).unwrap();
        assert_ne!(a.coords(), c.coords());
    }

    #[test]
    fn poisson_mean_count() {
        // mean 10000 over replicates, Poisson sd 100 per replicate
        let w = Window::new(2, 100.0, 0.0).unwrap();
        let reps = 40;
        let total: usize = (0..reps).map(|s| sample_poisson(&w, 1.0, s).unwrap().len()).sum();
        let mean = total as f64 / reps as f64;
        let se = (10000.0f64 / reps as f64).sqrt();
        assert!((mean - 10000.0).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn poisson_points_in_padded_window_and_simple() {
        let w = Window::new(3, 12.0, 1.5).unwrap();
        let c = sample_poisson(&w, 2.0, 9).unwrap();
        let padded = w.padded();
        assert!((0..c.len()).all(|i| padded.contains(c.location(i))));
        assert!(c.marks().iter().all(|&u| u > 0.0 && u < 1.0));
        assert!(c.is_simple());
    }

    #[test]
    fn full_lattice_half_open() {
        let w = Window::new(1, 10.0, 0.0).unwrap();
        let c = sample_site_lattice(&w, 1.0, 3).unwrap();
        let xs: Vec<f64> = (0..c.len()).map(|i| c.location(i)[0]).collect();
        assert_eq!(xs, (-5..5).map(|z| z as f64).collect::<Vec<_>>());
        assert!(c.is_lattice());
    }

    #[test]
    fn lattice_retention_fraction() {
        let w = Window::new(2, 100.0, 0.0).unwrap();
        let reps = 10;
        let kept: usize = (0..reps).map(|s| sample_site_lattice(&w, 0.5, s).unwrap().len()).sum();
        let n = (reps * 10_000) as f64;
        let frac = kept as f64 / n;
        let se = (0.25 / n).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * se, "fraction {frac}");
    }

    #[test]
    fn lattice_deterministic_and_validated() {
        let w = Window::new(2, 20.0, 0.0).unwrap();
        let a = sample_site_lattice(&w, 0.3, 5).unwrap();
        let b = sample_site_lattice(&w, 0.3, 5).unwrap();
        assert_eq!(a.coords(), b.coords());
        assert_eq!(a.marks(), b.marks());
        assert!(sample_site_lattice(&w, 0.0, 5).is_err());
        assert!(sample_site_lattice(&w, 1.5, 5).is_err());
    }

    #[test]
    fn grid_ball_query_matches_brute_force() {
        let w = Window::new(2, 20.0, 1.0).unwrap();
        let c = sample_poisson(&w, 3.0, 11).unwrap();
        let g = SpatialGrid::build(&c, 0.7);
        for q in 0..20 {
            let p = c.location(q * 7).to_vec();
            let mut got = Vec::new();
            g.for_each_within(&c, &p, 2.3, |j| got.push(j));
            got.sort();
            let want: Vec<usize> = (0..c.len())
                .filter(|&j| crate::geometry::dist(&p, c.location(j)) <= 2.3)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn shells_partition_points() {
        let w = Window::new(3, 8.0, 0.0).unwrap();
        let c = sample_poisson(&w, 2.0, 2).unwrap();
        let g = SpatialGrid::build(&c, 1.0);
        let center = g.cell_coords(c.location(0));
        let mut ranges = Vec::new();
        let kmax = g.max_ring(&center) + 1;
        let mut k = 0;
        while k < kmax {
            let next = (k + 1).max(k * 3 / 2);
            g.shell_ranges(&center, k, next, &mut ranges);
            k = next;
        }
        let mut seen: Vec<u32> = ranges.iter().flat_map(|&(s, e)| g.items()[s..e].to_vec()).collect();
        seen.sort();
        assert_eq!(seen, (0..c.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn csv_header_and_precision() {
        let w = Window::new(2, 4.0, 0.0).unwrap();
        let c = sample_poisson(&w, 1.0, 1).unwrap().with_orientations(3);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "id,x1,x2,mark,orientation");
        if let Some(row) = lines.next() {
            let fields: Vec<&str> = row.split(',').collect();
            let x: f64 = fields[1].parse().unwrap();
            assert_eq!(x, c.location(0)[0]);
        }
    }
}
