use chemdist::geometry::{dist, Cube, Window};
use chemdist::models::{ModelSpec, Pad, SpatialGraph};
use chemdist::point_process::MarkedPointCloud;
use chemdist::renorm::{
    classify_box, classify_box_brute, decompose_path, estimate_psi, greedy_waypoints, max_bad_boxes, psi_log_bound,
    write_psi_csv, write_verdict_csv, BoxClassifier, BoxFailure, ScaleLadder,
};
use chemdist::rng::CounterRng;
use proptest::prelude::*;

fn graph_from(dim: usize, side: f64, pts: Vec<f64>, edges: Vec<(usize, usize)>) -> SpatialGraph {
    let w = Window::new(dim, side, 0.0).unwrap();
    let marks = vec![0.5; pts.len() / dim];
    let cloud = MarkedPointCloud::from_parts(w, 0, pts, marks, None, false).unwrap();
    SpatialGraph::from_edges(cloud, edges).unwrap()
}

/// Random segments scattered over the footprint, lengths spread around the
/// stage-0 threshold.
fn random_instance(seed: u64) -> (SpatialGraph, ScaleLadder, usize) {
    let mut rng = CounterRng::new(seed);
    let dim = 1 + (rng.unit() * 2.0) as usize;
    let stage = (rng.unit() * 3.0) as usize;
    let k = 2 * (1 + (rng.unit() * 4.0) as u64);
    let ladder = ScaleLadder::new(k, 2).unwrap();
    let side = ladder.reach(stage) + 2.0;
    let t0 = k as f64 / 100.0;
    let count = (rng.unit() * 12.0 * (side / k as f64).powi(dim as i32)) as usize + 1;
    let mut pts = Vec::new();
    let mut edges = Vec::new();
    for e in 0..count {
        let len = t0 * (rng.unit() * 3.0 - 1.0).exp();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.unit() - 0.5).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
        dir.iter_mut().for_each(|x| *x /= norm);
        for &u in &dir {
            let x = (rng.unit() - 0.5) * (side - 2.0 * len - 1e-3);
            a.push(x);
            b.push(x + u * len);
        }
        pts.extend(a);
        pts.extend(b);
        edges.push((2 * e, 2 * e + 1));
    }
    (graph_from(dim, side, pts, edges), ladder, stage)
}

#[test]
fn recursive_classifier_matches_brute_force() {
    let mut kinds = [0usize; 3];
    for seed in 0..100 {
        let (g, ladder, stage) = random_instance(seed);
        let origin = vec![0.0; g.cloud().dim()];
        let fast = classify_box(&g, &origin, stage, &ladder).unwrap();
        let slow = classify_box_brute(&g, &origin, stage, &ladder).unwrap();
        assert_eq!(fast, slow, "instance {seed}");
        kinds[match &fast.failure {
            None => 0,
            Some(BoxFailure::LongEdge { .. }) => 1,
            Some(BoxFailure::TooManyBad { .. }) => 2,
        }] += 1;
    }
    assert!(kinds[0] > 0 && kinds[1] > 0, "{kinds:?}");
}

#[test]
fn too_many_bad_sub_boxes() {
    // d = 1, K = 100: stage 3 has side 3600, nine stage-2 sub-boxes of side
    // 400, thresholds 4 at stage 3 and 1 below. Edges of length 2 sit 100 away
    // from every sub-box boundary of the plain and the shifted tilings.
    let ladder = ScaleLadder::new(100, 3).unwrap();
    let starts = [-700.0, -300.0, 100.0, 500.0];
    let build = |n: usize| {
        let pts: Vec<f64> = starts[..n].iter().flat_map(|&x| [x, x + 2.0]).collect();
        let edges = (0..n).map(|e| (2 * e, 2 * e + 1)).collect();
        graph_from(1, 4000.0, pts, edges)
    };
    let four = classify_box(&build(4), &[0.0], 3, &ladder).unwrap();
    assert!(!four.good);
    assert!(matches!(four.failure, Some(BoxFailure::TooManyBad { bad_count: 4, .. })), "{:?}", four.failure);
    assert!(classify_box(&build(3), &[0.0], 3, &ladder).unwrap().good);
}

#[test]
fn shift_family_must_fit_the_window() {
    let ladder = ScaleLadder::new(100, 2).unwrap();
    let g = graph_from(2, 450.0, vec![0.0, 0.0], vec![]);
    assert!(classify_box(&g, &[0.0, 0.0], 2, &ladder).is_err());
    assert!(classify_box(&g, &[0.0, 0.0], 1, &ladder).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adding_edges_only_turns_boxes_bad(seed in any::<u64>(), extra in 1usize..20) {
        let (g, ladder, stage) = random_instance(seed);
        let n = g.vertex_count();
        let mut rng = CounterRng::new(!seed);
        let add: Vec<(usize, usize)> = (0..extra)
            .map(|_| ((rng.unit() * n as f64) as usize % n, (rng.unit() * n as f64) as usize % n))
            .filter(|(a, b)| a != b)
            .collect();
        let h = g.with_edges(&add).unwrap();
        let (before, after) = (BoxClassifier::new(&g, &ladder), BoxClassifier::new(&h, &ladder));
        let dim = g.cloud().dim();
        for s in 0..=stage {
            let c = vec![(rng.unit() - 0.5) * 0.1 * ladder.size(0); dim];
            let (a, b) = (before.classify(&c, s), after.classify(&c, s));
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!(a.good || !b.good);
            }
        }
    }
}

/// Random walk with occasional long jumps, each step an edge.
fn random_path_instance(seed: u64) -> (SpatialGraph, Vec<usize>, Vec<Cube>, f64) {
    let mut rng = CounterRng::new(seed);
    let dim = 1 + (rng.unit() * 2.0) as usize;
    let k_prev = 20.0 + rng.unit() * 200.0;
    let steps = 2 + (rng.unit() * 300.0) as usize;
    let side = 2000.0;
    let mut pos = vec![0.0; dim];
    let mut pts = Vec::new();
    for _ in 0..steps {
        pts.extend_from_slice(&pos);
        let jump = if rng.unit() < 0.02 { k_prev } else { k_prev / 100.0 };
        for x in &mut pos {
            *x = (*x + (rng.unit() - 0.5) * 2.0 * jump).clamp(-side / 2.0 + 1.0, side / 2.0 - 1.0);
        }
    }
    let edges = (0..steps - 1).map(|i| (i, i + 1)).collect();
    let g = graph_from(dim, side, pts, edges);
    let path: Vec<usize> = (0..steps).collect();
    let boxes = (0..(rng.unit() * 8.0) as usize)
        .map(|_| {
            let v = path[(rng.unit() * steps as f64) as usize % steps];
            let c: Vec<f64> = g.location(v).iter().map(|x| x + (rng.unit() - 0.5) * k_prev / 5.0).collect();
            Cube::new(c, k_prev * (0.05 + rng.unit() * 0.5))
        })
        .collect();
    (g, path, boxes, k_prev)
}

#[test]
fn path_decomposition_invariants() {
    let mut crossings = 0;
    for seed in 0..1000 {
        let (g, path, boxes, k_prev) = random_path_instance(seed);
        let dec = decompose_path(&g, &path, &boxes).unwrap();
        let slots = max_bad_boxes(g.cloud().dim());
        assert_eq!(dec.bad_segments.len(), slots);
        assert!(dec.good_segments.len() == slots || dec.good_segments.len() == slots + 1);
        assert_eq!(dec.reconstitute(), path, "instance {seed}");
        // junctions: each nonempty segment starts where the previous one ended
        let nonempty: Vec<_> = dec.alternating().into_iter().filter(|(_, r)| !r.is_empty()).collect();
        for w in nonempty.windows(2) {
            assert!(w[1].1.start < w[0].1.end, "instance {seed}: {:?}", dec.alternating());
        }
        for (is_good, r) in &nonempty {
            if *is_good {
                for &v in &path[r.clone()] {
                    assert!(boxes.iter().all(|q| !q.contains(g.location(v))), "instance {seed}");
                }
            }
        }
        let mut used = dec.bad_boxes.clone();
        crossings += used.len();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), dec.bad_boxes.len());
        for s in 0..dec.good_segments.len() {
            let seg = dec.good(s);
            let w = greedy_waypoints(&g, seg, k_prev);
            if seg.is_empty() {
                continue;
            }
            assert_eq!((w[0], *w.last().unwrap()), (0, seg.len() - 1));
            for (t, pair) in w.windows(2).enumerate() {
                let (a, b) = (g.location(seg[pair[0]]), g.location(seg[pair[1]]));
                if t + 2 < w.len() {
                    assert!(dist(a, b) > k_prev / 16.0, "instance {seed}");
                }
                for &v in &seg[pair[0] + 1..pair[1]] {
                    assert!(dist(g.location(v), a) < k_prev / 2.0, "instance {seed}");
                }
            }
        }
    }
    assert!(crossings > 100);
}

#[test]
fn decomposition_examples() {
    let pts: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let g = graph_from(1, 40.0, pts, (0..9).map(|i| (i, i + 1)).collect());
    let path: Vec<usize> = (0..10).collect();
    let none = decompose_path(&g, &path, &[]).unwrap();
    assert_eq!(none.good(0), &path[..]);
    assert!(none.bad_boxes.is_empty());
    // one crossing of [3.5, 5.5)
    let q = Cube::new(vec![4.5], 2.0);
    let one = decompose_path(&g, &path, &[q.clone()]).unwrap();
    assert_eq!(one.good(0), &[0, 1, 2, 3]);
    assert_eq!(one.bad(0), &[3, 4, 5, 6]);
    assert_eq!(one.good(1), &[6, 7, 8, 9]);
    // a path that leaves and re-enters the box gives one bad segment
    let walk = vec![2, 3, 4, 5, 6, 5, 4, 5, 6, 7];
    let re = decompose_path(&g, &walk, &[q]).unwrap();
    assert_eq!(re.bad(0), &[3, 4, 5, 6, 5, 4, 5, 6]);
    assert_eq!(re.good(1), &[6, 7]);
    // too many boxes and non-walks are rejected
    let many = vec![Cube::new(vec![100.0], 1.0); 10];
    assert!(decompose_path(&g, &path, &many).is_err());
    assert!(decompose_path(&g, &[0, 2], &[]).is_err());
}

#[test]
fn psi_on_trivial_models() {
    let ladder = ScaleLadder::new(102, 1).unwrap();
    let none = ModelSpec::soft_boolean(2, 0.3, 3.0, 204.0).with_amplitude(0.0).with_pad(Pad::Fixed(0.0));
    assert_eq!(estimate_psi(&none, &ladder, 1, 100, 1).unwrap().proportion.successes, 0);
    // Gilbert edges are at most 1 < K_0/100 = 1.02
    let gil = ModelSpec::gilbert(2, 102.0).with_pad(Pad::Fixed(1.0));
    let e = estimate_psi(&gil, &ladder, 0, 100, 2).unwrap();
    assert_eq!(e.proportion.estimate, 0.0);
    assert!(estimate_psi(&gil, &ladder, 1, 100, 2).is_err());
    assert!(estimate_psi(&gil, &ladder, 0, 10, 2).is_err());
    let mut buf = Vec::new();
    write_psi_csv(&[e], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("K,stage,replicates,bad_count,estimate,ci_lo,ci_hi\n102,0,100,0,"));
}

#[test]
fn stage_one_contains_stage_zero() {
    // B_1 shifted by j = 0 is B_0 with the same threshold, so a bad stage-0
    // origin box forces a bad stage-1 box on the same realization
    let ladder = ScaleLadder::new(200, 1).unwrap();
    let spec = ModelSpec::boolean(2, 0.5, 400.0).with_intensity(0.002).with_pad(Pad::Fixed(0.0));
    let (mut bad0, mut bad1) = (0, 0);
    for seed in 0..100 {
        let g = spec.realize(seed).unwrap();
        let c = BoxClassifier::new(&g, &ladder);
        let v0 = c.classify(&[0.0, 0.0], 0).unwrap();
        let v1 = c.classify(&[0.0, 0.0], 1).unwrap();
        assert!(v0.good || !v1.good);
        bad0 += !v0.good as u32;
        bad1 += !v1.good as u32;
    }
    assert!(bad0 > 0 && bad1 >= bad0);
}

#[test]
fn verdict_csv_format() {
    let ladder = ScaleLadder::new(200, 2).unwrap();
    let g = graph_from(2, 1200.0, vec![0.0, 0.0, 4.0, 0.0], vec![(0, 1)]);
    let v = classify_box(&g, &[0.0, 0.0], 2, &ladder).unwrap();
    let ok = classify_box(&g, &[0.0, 0.0], 1, &ladder).unwrap();
    let mut buf = Vec::new();
    write_verdict_csv(&[v, ok], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "stage,center,good,failure_kind,detail");
    assert!(lines[1].starts_with("2,") && lines[1].contains(",false,long_edge,edge=0-1 "));
    assert!(lines[2].starts_with("1,") && lines[2].ends_with(",false,long_edge,edge=0-1 length=4.0000000000000000e0 threshold=2.0000000000000000e0"));
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[test]
fn psi_bound_tail_sums_follow_the_envelope() {
    // tail sums from n-1 against C (n!)^{-2|ξ∨(d+μ)|+c/n}, C fitted on n in 5..=8
    let (xi, mu, d, c) = (-1.0, -3.0, 2usize, 13.0);
    let ln_fact = |n: usize| (2..=n).map(|h| (h as f64).ln()).sum::<f64>();
    let log_ratio = |n: usize| {
        let terms: Vec<f64> = (n - 1..n + 200).map(|k| psi_log_bound(k, xi, mu, d, c).unwrap()).collect();
        let envelope = (-2.0 * xi.max(d as f64 + mu).abs() + c / n as f64) * ln_fact(n);
        log_sum_exp(&terms) - envelope
    };
    let log_c = (5..=8).map(log_ratio).fold(f64::NEG_INFINITY, f64::max);
    for n in 5..=20 {
        assert!(log_ratio(n) <= log_c + 1e-12, "n={n}");
    }
    // the bound itself eventually decreases
    let vals: Vec<f64> = (10..40).map(|n| psi_log_bound(n, xi, mu, d, c).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}
