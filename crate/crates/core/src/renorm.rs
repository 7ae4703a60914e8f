//! Multiscale good/bad boxes on the factorial ladder `K_n = K (n!)^2`,
//! the bad-box probability `ψ_K(n)`, its bound, and the path analyzer.

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Cube, MAX_DIM};
use crate::models::{ModelSpec, SpatialGraph};
use crate::point_process::fmt17;
use crate::rng::replicate_seed;
use crate::stats::ProportionEstimate;

/// Largest box side accepted by the ladder.
pub const MAX_SCALE: u64 = 1 << 62;

/// `K (n!)^2`, exact.
pub fn scale(k: u64, n: usize) -> Result<u64> {
    if k == 0 || k % 2 != 0 {
        return Err(Error::param(format!("K must be even and positive, got {k}")));
    }
    let mut s = k;
    for h in 1..=n as u64 {
        s = s
            .checked_mul(h * h)
            .filter(|&v| v <= MAX_SCALE)
            .ok_or_else(|| Error::resource(format!("K_{n} for K = {k} exceeds 2^62")))?;
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleLadder {
    k: u64,
    sizes: Vec<u64>,
}

impl ScaleLadder {
    pub fn new(k: u64, max_stage: usize) -> Result<Self> {
        let sizes = (0..=max_stage).map(|n| scale(k, n)).collect::<Result<Vec<_>>>()?;
        Ok(ScaleLadder { k, sizes })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn max_stage(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// `K_n`; panics above the top stage.
    pub fn size(&self, n: usize) -> f64 {
        self.sizes[n] as f64
    }

    /// Edge-length threshold of a stage: `K_{n-1}/100`, or `K_0/100` at 0.
    pub fn threshold(&self, n: usize) -> f64 {
        self.size(n.saturating_sub(1)) / 100.0
    }

    /// Side of the region a stage-`n` box and its shifted copies occupy.
    pub fn footprint(&self, n: usize) -> f64 {
        if n == 0 {
            self.size(0)
        } else {
            self.size(n) + self.size(n - 1)
        }
    }

    /// Side of everything the recursive classification may read.
    pub fn reach(&self, n: usize) -> f64 {
        self.sizes[..=n].iter().map(|&s| s as f64).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoxFailure {
    LongEdge {
        edge: (usize, usize),
        length: f64,
        threshold: f64,
    },
    TooManyBad {
        shift: Vec<i8>,
        bad_count: usize,
    },
}

impl BoxFailure {
    pub fn kind(&self) -> &'static str {
        match self {
            BoxFailure::LongEdge { .. } => "long_edge",
            BoxFailure::TooManyBad { .. } => "too_many_bad",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            BoxFailure::LongEdge { edge, length, threshold } => {
                format!("edge={}-{} length={} threshold={}", edge.0, edge.1, fmt17(*length), fmt17(*threshold))
            }
            BoxFailure::TooManyBad { shift, bad_count } => {
                let j: Vec<String> = shift.iter().map(|s| s.to_string()).collect();
                format!("shift={} bad={}", j.join(";"), bad_count)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxVerdict {
    pub stage: usize,
    pub center: Vec<f64>,
    pub good: bool,
    pub failure: Option<BoxFailure>,
}

/// All `j ∈ {-1,0,1}^d` in lexicographic order.
pub fn shift_family(dim: usize) -> Vec<Vec<i8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                [-1i8, 0, 1].into_iter().map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Centers of the `n^{2d}` stage-`(n-1)` boxes tiling the stage-`n` box at
/// `center`, anchored at its lower corner.
pub fn sub_box_centers(ladder: &ScaleLadder, center: &[f64], n: usize) -> Vec<Vec<f64>> {
    assert!(n >= 1);
    let per_axis = (n * n) as u64;
    let (big, small) = (ladder.size(n), ladder.size(n - 1));
    let mut out = vec![Vec::new()];
    for &c in center {
        let lo = c - big / 2.0;
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..per_axis).map(move |i| {
                    let mut q = p.clone();
                    q.push(lo + (i as f64 + 0.5) * small);
                    q
                })
            })
            .collect();
    }
    out
}

fn shifted_center(center: &[f64], j: &[i8], step: f64) -> Vec<f64> {
    center.iter().zip(j).map(|(c, &s)| c + s as f64 * step).collect()
}

fn both_inside(graph: &SpatialGraph, cube: &Cube, a: usize, b: usize) -> bool {
    cube.contains(graph.location(a)) && cube.contains(graph.location(b))
}

fn check_window(graph: &SpatialGraph, center: &[f64], stage: usize, ladder: &ScaleLadder) -> Result<()> {
    if stage > ladder.max_stage() {
        return Err(Error::usage(format!("stage {stage} above the ladder top {}", ladder.max_stage())));
    }
    let dim = graph.cloud().dim();
    if center.len() != dim {
        return Err(Error::usage("box center has the wrong dimension"));
    }
    let need = Cube::new(center.to_vec(), ladder.footprint(stage));
    if !graph.cloud().window().inner().covers(&need) {
        return Err(Error::usage(format!(
            "stage-{stage} box and its shifts (side {}) leave the measurement window",
            ladder.footprint(stage)
        )));
    }
    Ok(())
}

struct Candidate {
    a: usize,
    b: usize,
    length: f64,
}

/// Memoizing classifier over one graph.
///
/// Only edges longer than `K_0/100` can make any box bad, so those are
/// collected once; a box whose whole reach holds none of them is good.
pub struct BoxClassifier<'g> {
    graph: &'g SpatialGraph,
    ladder: &'g ScaleLadder,
    candidates: Vec<Candidate>,
    memo: Mutex<HashMap<(Vec<u64>, usize), bool>>,
}

impl<'g> BoxClassifier<'g> {
    pub fn new(graph: &'g SpatialGraph, ladder: &'g ScaleLadder) -> Self {
        let t0 = ladder.threshold(0);
        let candidates = graph
            .edges()
            .filter_map(|(a, b)| {
                let length = graph.edge_length(a, b);
                (length > t0).then_some(Candidate { a, b, length })
            })
            .collect();
        BoxClassifier {
            graph,
            ladder,
            candidates,
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// Verdict for the stage-`stage` box at `center`.
    pub fn classify(&self, center: &[f64], stage: usize) -> Result<BoxVerdict> {
        check_window(self.graph, center, stage, self.ladder)?;
        Ok(self.verdict(center, stage))
    }

    /// Number of distinct boxes classified so far.
    pub fn memo_len(&self) -> usize {
        self.memo.lock().expect("memo lock").len()
    }

    fn longest_candidate(&self, cube: &Cube, threshold: f64) -> Option<&Candidate> {
        let mut best: Option<&Candidate> = None;
        for c in &self.candidates {
            if c.length > threshold
                && best.is_none_or(|b| c.length > b.length)
                && both_inside(self.graph, cube, c.a, c.b)
            {
                best = Some(c);
            }
        }
        best
    }

    fn quiet(&self, center: &[f64], stage: usize) -> bool {
        let region = Cube::new(center.to_vec(), self.ladder.reach(stage));
        !self.candidates.iter().any(|c| both_inside(self.graph, &region, c.a, c.b))
    }

    fn is_good(&self, center: &[f64], stage: usize) -> bool {
        let key = (center.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), stage);
        if let Some(&g) = self.memo.lock().expect("memo lock").get(&key) {
            return g;
        }
        let g = self.verdict(center, stage).good;
        self.memo.lock().expect("memo lock").insert(key, g);
        g
    }

    fn verdict(&self, center: &[f64], stage: usize) -> BoxVerdict {
        let good = |failure: Option<BoxFailure>| BoxVerdict {
            stage,
            center: center.to_vec(),
            good: failure.is_none(),
            failure,
        };
        if self.quiet(center, stage) {
            return good(None);
        }
        let threshold = self.ladder.threshold(stage);
        if stage == 0 {
            let cube = Cube::new(center.to_vec(), self.ladder.size(0));
            return good(self.longest_candidate(&cube, threshold).map(|c| BoxFailure::LongEdge {
                edge: (c.a, c.b),
                length: c.length,
                threshold,
            }));
        }
        let dim = center.len();
        let allowed = 3usize.pow(dim as u32);
        let step = self.ladder.size(stage - 1) / 2.0;
        for j in shift_family(dim) {
            let cj = shifted_center(center, &j, step);
            let cube = Cube::new(cj.clone(), self.ladder.size(stage));
            if let Some(c) = self.longest_candidate(&cube, threshold) {
                return good(Some(BoxFailure::LongEdge {
                    edge: (c.a, c.b),
                    length: c.length,
                    threshold,
                }));
            }
            let bad_count = sub_box_centers(self.ladder, &cj, stage)
                .iter()
                .filter(|s| !self.is_good(s, stage - 1))
                .count();
            if bad_count > allowed {
                return good(Some(BoxFailure::TooManyBad { shift: j, bad_count }));
            }
        }
        good(None)
    }
}

/// Classifies one box; see [`BoxClassifier`] to share the memo across calls.
pub fn classify_box(graph: &SpatialGraph, center: &[f64], stage: usize, ladder: &ScaleLadder) -> Result<BoxVerdict> {
    BoxClassifier::new(graph, ladder).classify(center, stage)
}

/// Direct expansion of the definition: scans every edge, no memo, no pruning.
pub fn classify_box_brute(graph: &SpatialGraph, center: &[f64], stage: usize, ladder: &ScaleLadder) -> Result<BoxVerdict> {
    check_window(graph, center, stage, ladder)?;
    Ok(brute(graph, center, stage, ladder))
}

fn brute_long_edge(graph: &SpatialGraph, cube: &Cube, threshold: f64) -> Option<BoxFailure> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (a, b) in graph.edges() {
        if both_inside(graph, cube, a, b) {
            let len = graph.edge_length(a, b);
            if len > threshold && best.is_none_or(|(_, l)| len > l) {
                best = Some(((a, b), len));
            }
        }
    }
    best.map(|(edge, length)| BoxFailure::LongEdge { edge, length, threshold })
}

fn brute(graph: &SpatialGraph, center: &[f64], stage: usize, ladder: &ScaleLadder) -> BoxVerdict {
    let threshold = ladder.threshold(stage);
    let failure = if stage == 0 {
        brute_long_edge(graph, &Cube::new(center.to_vec(), ladder.size(0)), threshold)
    } else {
        let dim = center.len();
        let step = ladder.size(stage - 1) / 2.0;
        shift_family(dim).into_iter().find_map(|j| {
            let cj = shifted_center(center, &j, step);
            if let Some(f) = brute_long_edge(graph, &Cube::new(cj.clone(), ladder.size(stage)), threshold) {
                return Some(f);
            }
            let bad_count = sub_box_centers(ladder, &cj, stage)
                .iter()
                .filter(|s| !brute(graph, s, stage - 1, ladder).good)
                .count();
            (bad_count > 3usize.pow(dim as u32)).then_some(BoxFailure::TooManyBad { shift: j, bad_count })
        })
    };
    BoxVerdict {
        stage,
        center: center.to_vec(),
        good: failure.is_none(),
        failure,
    }
}

/// Writes `stage,center,good,failure_kind,detail`; center coordinates are
/// separated by `;`.
pub fn write_verdict_csv<W: Write>(verdicts: &[BoxVerdict], mut out: W) -> Result<()> {
    writeln!(out, "stage,center,good,failure_kind,detail")?;
    for v in verdicts {
        let c: Vec<String> = v.center.iter().map(|&x| fmt17(x)).collect();
        let (kind, detail) = match &v.failure {
            Some(f) => (f.kind(), f.detail()),
            None => ("", String::new()),
        };
        writeln!(out, "{},{},{},{},{}", v.stage, c.join(";"), v.good, kind, detail)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsiEstimate {
    pub k: u64,
    pub stage: usize,
    pub seed: u64,
    pub proportion: ProportionEstimate,
}

/// Monte Carlo estimate of `ψ_K(n)`, the probability that the stage-`n` box
/// at the origin is bad.
pub fn estimate_psi(
    spec: &ModelSpec,
    ladder: &ScaleLadder,
    stage: usize,
    replicates: u64,
    seed: u64,
) -> Result<PsiEstimate> {
    spec.validate()?;
    if replicates < crate::long_edges::MIN_REPLICATES {
        return Err(Error::param(format!("need at least 100 replicates, got {replicates}")));
    }
    if stage > ladder.max_stage() {
        return Err(Error::usage(format!("stage {stage} above the ladder top {}", ladder.max_stage())));
    }
    if spec.side < ladder.footprint(stage) {
        return Err(Error::usage(format!(
            "window side {} is below K_n + K_(n-1) = {}",
            spec.side,
            ladder.footprint(stage)
        )));
    }
    let window = spec.window()?;
    let origin = vec![0.0; spec.dim];
    let bad = (0..replicates)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let g = spec.realize_in(&window, replicate_seed(seed, i))?;
            Ok(!classify_box(&g, &origin, stage, ladder)?.good as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(PsiEstimate {
        k: ladder.k(),
        stage,
        seed,
        proportion: ProportionEstimate::wilson(bad, replicates),
    })
}

/// Writes `K,stage,replicates,bad_count,estimate,ci_lo,ci_hi`.
pub fn write_psi_csv<W: Write>(rows: &[PsiEstimate], mut out: W) -> Result<()> {
    writeln!(out, "K,stage,replicates,bad_count,estimate,ci_lo,ci_hi")?;
    for r in rows {
        let p = &r.proportion;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            r.stage,
            p.replicates,
            p.successes,
            fmt17(p.estimate),
            fmt17(p.ci_lo),
            fmt17(p.ci_hi)
        )?;
    }
    Ok(())
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|h| (h as f64).ln()).sum()
}

/// Exponent `-2|ξ ∨ (d+μ)| + c/n` of the `ψ` bound, after checking its
/// preconditions.
pub fn psi_bound_exponent(n: usize, xi: f64, mu: f64, d: usize, c: f64) -> Result<f64> {
    let dm = d as f64 + mu;
    if !(xi < 0.0) {
        return Err(Error::param(format!("mixing exponent must be negative, got {xi}")));
    }
    if !(dm < 0.0) {
        return Err(Error::param(format!("need mu < -d, got mu = {mu}, d = {d}")));
    }
    let c_min = 4.0 * (d as f64 + xi.min(dm).abs());
    if !(c > c_min) {
        return Err(Error::param(format!("c must exceed {c_min}, got {c}")));
    }
    if n == 0 {
        return Err(Error::param("the bound starts at n = 1"));
    }
    Ok(-2.0 * xi.max(dm).abs() + c / n as f64)
}

/// Natural log of `((n+1)!)^{-2|ξ∨(d+μ)|+c/n}`.
pub fn psi_log_bound(n: usize, xi: f64, mu: f64, d: usize, c: f64) -> Result<f64> {
    Ok(psi_bound_exponent(n, xi, mu, d, c)? * ln_factorial(n + 1))
}

/// `((n+1)!)^{-2|ξ∨(d+μ)|+c/n}`, evaluated through its logarithm.
pub fn psi_bound(n: usize, xi: f64, mu: f64, d: usize, c: f64) -> Result<f64> {
    Ok(psi_log_bound(n, xi, mu, d, c)?.exp())
}

/// `N = (2d+1) 9^d`.
pub fn pi_threshold(d: usize) -> u64 {
    (2 * d as u64 + 1) * 9u64.pow(d as u32)
}

/// `Π(n) = ∏_{h=N}^{n} (1 - N/h²)`; the empty product is 1.
pub fn pi_product(n: u64, d: usize) -> f64 {
    let big = pi_threshold(d) as f64;
    let ln: f64 = (pi_threshold(d)..=n).map(|h| (1.0 - big / (h as f64 * h as f64)).ln()).sum();
    ln.exp()
}

/// Split of a path at a family of bad boxes into alternating good segments
/// `π_s` and bad segments `σ_s`.
///
/// Segments are ranges of path positions. Neighbouring nonempty segments
/// share their junction vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct PathDecomposition {
    pub path: Vec<usize>,
    pub good_segments: Vec<Range<usize>>,
    pub bad_segments: Vec<Range<usize>>,
    /// Index into the supplied boxes of the box behind each used `σ_s`.
    pub bad_boxes: Vec<usize>,
}

impl PathDecomposition {
    pub fn good(&self, s: usize) -> &[usize] {
        &self.path[self.good_segments[s].clone()]
    }

    pub fn bad(&self, s: usize) -> &[usize] {
        &self.path[self.bad_segments[s].clone()]
    }

    /// Segments in order `π_1, σ_1, π_2, σ_2, …`, padding included.
    pub fn alternating(&self) -> Vec<(bool, Range<usize>)> {
        let mut out = Vec::new();
        for s in 0..self.good_segments.len().max(self.bad_segments.len()) {
            if let Some(r) = self.good_segments.get(s) {
                out.push((true, r.clone()));
            }
            if let Some(r) = self.bad_segments.get(s) {
                out.push((false, r.clone()));
            }
        }
        out
    }

    /// Concatenates the segments, skipping positions already emitted.
    pub fn reconstitute(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.path.len());
        let mut next = 0;
        for (_, r) in self.alternating() {
            for pos in r.start.max(next)..r.end {
                out.push(self.path[pos]);
            }
            next = next.max(r.end);
        }
        out
    }
}

/// Maximal number of bad boxes a path may meet.
pub fn max_bad_boxes(dim: usize) -> usize {
    9usize.pow(dim as u32)
}

/// Splits `path` at `bad_boxes`: `i_s` is the first position after `k_{s-1}`
/// inside a bad box, `j_s` the smallest-index box holding it, `k_s` the last
/// position inside box `j_s`; `σ_s` runs from `i_s - 1` to `k_s + 1`.
pub fn decompose_path(graph: &SpatialGraph, path: &[usize], bad_boxes: &[Cube]) -> Result<PathDecomposition> {
    let dim = graph.cloud().dim();
    let slots = max_bad_boxes(dim.min(MAX_DIM));
    if bad_boxes.len() > slots {
        return Err(Error::usage(format!("{} bad boxes supplied, at most 9^d = {slots} allowed", bad_boxes.len())));
    }
    if bad_boxes.iter().any(|q| q.dim() != dim) {
        return Err(Error::usage("bad box has the wrong dimension"));
    }
    if path.is_empty() {
        return Err(Error::usage("empty path"));
    }
    if let Some(&v) = path.iter().find(|&&v| v >= graph.vertex_count()) {
        return Err(Error::usage(format!("vertex {v} not in the graph")));
    }
    if let Some(w) = path.windows(2).find(|w| !graph.has_edge(w[0], w[1])) {
        return Err(Error::usage(format!("path step {}-{} is not an edge", w[0], w[1])));
    }
    let len = path.len();
    let inside = |pos: usize, q: &Cube| q.contains(graph.location(path[pos]));
    let mut good = Vec::new();
    let mut bad = Vec::new();
    let mut used = Vec::new();
    // first position not yet covered by a bad excursion (k_{s-1} + 1)
    let mut start = 0usize;
    while let Some(i) = (start..len).find(|&p| bad_boxes.iter().any(|q| inside(p, q))) {
        let j = (0..bad_boxes.len()).find(|&j| inside(i, &bad_boxes[j])).expect("found above");
        let k = (i..len).rev().find(|&p| inside(p, &bad_boxes[j])).expect("i is inside");
        good.push(start..i.max(start));
        bad.push(i.saturating_sub(1)..(k + 2).min(len));
        used.push(j);
        start = k + 1;
    }
    good.push(start..len);
    while good.len() < slots {
        good.push(len..len);
    }
    while bad.len() < slots {
        bad.push(len..len);
    }
    Ok(PathDecomposition {
        path: path.to_vec(),
        good_segments: good,
        bad_segments: bad,
        bad_boxes: used,
    })
}

/// Greedy waypoints along a segment, as positions into it.
///
/// From the current waypoint `w`, the next one is the first later vertex at
/// distance at least `K_prev/2` from `w`; when the rest of the segment stays
/// inside that ball, the last vertex closes the list.
pub fn greedy_waypoints(graph: &SpatialGraph, segment: &[usize], k_prev: f64) -> Vec<usize> {
    if segment.is_empty() {
        return Vec::new();
    }
    let radius = k_prev / 2.0;
    let last = segment.len() - 1;
    let mut out = vec![0];
    let mut cur = 0;
    while cur < last {
        let w = graph.location(segment[cur]);
        match (cur + 1..=last).find(|&p| crate::geometry::dist(w, graph.location(segment[p])) >= radius) {
            Some(p) => cur = p,
            None => cur = last,
        }
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::point_process::MarkedPointCloud;

    fn graph(dim: usize, side: f64, pts: &[f64], edges: &[(usize, usize)]) -> SpatialGraph {
        let w = Window::new(dim, side, 0.0).unwrap();
        let marks = vec![0.5; pts.len() / dim];
        let cloud = MarkedPointCloud::from_parts(w, 0, pts.to_vec(), marks, None, false).unwrap();
        SpatialGraph::from_edges(cloud, edges.iter().copied()).unwrap()
    }

    #[test]
    fn ladder_values() {
        assert_eq!(ScaleLadder::new(4, 3).unwrap().sizes(), &[4, 4, 16, 144]);
        assert!(matches!(scale(5, 1), Err(Error::Parameter(_))));
        for n in 1..8 {
            assert_eq!(scale(6, n).unwrap() / scale(6, n - 1).unwrap(), (n * n) as u64);
        }
        assert!(matches!(scale(2, 30), Err(Error::Resource(_))));
    }

    #[test]
    fn tiling_counts() {
        let l = ScaleLadder::new(4, 3).unwrap();
        assert_eq!(sub_box_centers(&l, &[0.0, 0.0], 2).len(), 16);
        assert_eq!(sub_box_centers(&l, &[0.0], 3).len(), 9);
        assert_eq!(sub_box_centers(&l, &[0.0], 2), vec![vec![-6.0], vec![-2.0], vec![2.0], vec![6.0]]);
        assert_eq!(shift_family(2).len(), 9);
    }

    #[test]
    fn empty_graph_is_good_everywhere() {
        let l = ScaleLadder::new(4, 2).unwrap();
        let g = graph(2, 40.0, &[0.0, 0.0, 1.0, 1.0], &[]);
        for n in 0..=2 {
            assert!(classify_box(&g, &[0.0, 0.0], n, &l).unwrap().good);
        }
    }

    #[test]
    fn long_edge_in_center_box() {
        // K = 200: K_1 = 200, stage-2 threshold K_1/100 = 2, edge of K_1/50 = 4
        let l = ScaleLadder::new(200, 2).unwrap();
        let g = graph(2, 1200.0, &[0.0, 0.0, 4.0, 0.0], &[(0, 1)]);
        let v = classify_box(&g, &[0.0, 0.0], 2, &l).unwrap();
        assert!(!v.good);
        assert!(matches!(v.failure, Some(BoxFailure::LongEdge { threshold, .. }) if threshold == 2.0));
        // exactly at the threshold is fine
        let g = graph(2, 1200.0, &[0.0, 0.0, 2.0, 0.0], &[(0, 1)]);
        assert!(classify_box(&g, &[0.0, 0.0], 2, &l).unwrap().good);
    }

    #[test]
    fn psi_bound_example() {
        assert!((psi_bound(1, -1.0, -3.0, 2, 13.0).unwrap() - 2048.0).abs() < 1e-9);
        assert!(psi_bound(1, -1.0, -3.0, 2, 12.0).is_err());
        assert!(psi_bound(1, 0.5, -3.0, 2, 20.0).is_err());
        assert!(psi_bound(1, -1.0, -1.0, 2, 20.0).is_err());
    }

    #[test]
    fn pi_product_edges() {
        assert_eq!(pi_threshold(1), 27);
        assert_eq!(pi_product(10, 1), 1.0);
        assert!((pi_product(27, 1) - (1.0 - 1.0 / 27.0)).abs() < 1e-15);
        let p = pi_product(100_000, 1);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn straight_path_waypoints() {
        let pts: Vec<f64> = (0..400).map(|i| i as f64).collect();
        let edges: Vec<(usize, usize)> = (0..399).map(|i| (i, i + 1)).collect();
        let g = graph(1, 1000.0, &pts, &edges);
        let seg: Vec<usize> = (0..400).collect();
        let w = greedy_waypoints(&g, &seg, 160.0);
        assert_eq!(w, vec![0, 80, 160, 240, 320, 399]);
        assert_eq!(greedy_waypoints(&g, &seg[..50], 160.0), vec![0, 49]);
        assert_eq!(greedy_waypoints(&g, &seg[..1], 160.0), vec![0]);
    }
}
