use std::fs;
use std::path::Path;

use chemdist::experiments::{estimate_neg_d_prob, run_experiment, strip_timestamp, ExperimentConfig, ExperimentKind};
use chemdist::graph_core::DistanceEventSpec;
use chemdist::models::{ModelSpec, Pad};
use chemdist::Error;

fn config(kind: &str, extra: &str, model: &str, out: &Path) -> ExperimentConfig {
    let text = format!("kind = {kind}\nout = {}\n{extra}\n[model]\n{model}\n", out.display());
    ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{kind}: {e}"))
}

fn small_configs(root: &Path) -> Vec<ExperimentConfig> {
    let boolean = "model = boolean\ngamma = 0.5\nwindow = 16\npad = 0";
    vec![
        config("longedge-scaling", "seed = 3\nreplicates = 200\ngrid = 4, 8\nmethod = lazy", boolean, &root.join("le")),
        config(
            "psi-curve",
            "seed = 4\nreplicates = 100\ngrid = 0, 1\nK = 4",
            "model = boolean\ngamma = 0.3\nwindow = 8\npad = 0\nintensity = 0.5",
            &root.join("psi"),
        ),
        config(
            "distance-profile",
            "seed = 5\nreplicates = 3\ngrid = 4, 8\nsamples = 2",
            "model = lrp\ndim = 1\ndelta = 3\nwindow = 64\npad = 0",
            &root.join("dp"),
        ),
        config(
            "D-event-decay",
            "seed = 6\nreplicates = 100\ngrid = 4, 6\nL = 1\neta = 0.2",
            "model = lrp\ndim = 1\ndelta = 3\nwindow = 24\npad = 0",
            &root.join("de"),
        ),
        config(
            "mixing-decay",
            "seed = 7\nreplicates = 100\ngrid = 4, 6\nx = 3, 0",
            "model = wdrcm\ngamma = 0.3\ngamma_prime = 0.2\ndelta = 3\nintensity = 0.05\nwindow = 10\npad = 2",
            &root.join("mx"),
        ),
        config(
            "bracket-oracle",
            "grid = 100, 1000",
            "model = wdrcm\ngamma = 0.5\ngamma_prime = 0\ndelta = 3\nwindow = 10",
            &root.join("br"),
        ),
        config("degree-check", "seed = 8\nreplicates = 4", "model = gilbert\nwindow = 20\npad = 2", &root.join("dc")),
    ]
}

fn bodies(cfg: &ExperimentConfig) -> (String, String) {
    let r = fs::read_to_string(cfg.replicates_path()).unwrap();
    let s = fs::read_to_string(cfg.summary_path()).unwrap();
    (strip_timestamp(&r).to_string(), strip_timestamp(&s).to_string())
}

#[test]
fn every_kind_reruns_byte_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, cb) = (small_configs(a.path()), small_configs(b.path()));
    assert_eq!(ca.len(), ExperimentKind::ALL.len());
    for (x, y) in ca.iter().zip(&cb) {
        run_experiment(x).unwrap();
        run_experiment(y).unwrap();
        assert_eq!(bodies(x), bodies(y), "{}", x.kind);
        let raw = fs::read_to_string(x.summary_path()).unwrap();
        assert!(raw.starts_with("# generated_unix="), "{}", x.kind);
    }
}

#[test]
fn resume_after_truncation_matches_a_fresh_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = &small_configs(dir.path())[0];
    let first = run_experiment(cfg).unwrap();
    assert_eq!((first.computed, first.resumed), (400, 0));
    let full = bodies(cfg);
    let text = fs::read_to_string(cfg.replicates_path()).unwrap();
    // keep 150 rows plus a torn line
    let cut: usize = text.lines().take(152).map(|l| l.len() + 1).sum::<usize>() + 4;
    fs::write(cfg.replicates_path(), &text[..cut]).unwrap();
    let again = run_experiment(cfg).unwrap();
    assert_eq!((again.computed, again.resumed), (250, 150));
    assert_eq!(bodies(cfg), full);
    let done = run_experiment(cfg).unwrap();
    assert_eq!((done.computed, done.resumed), (0, 400));
}

#[test]
fn foreign_replicate_file_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = &small_configs(dir.path())[0];
    fs::create_dir_all(&cfg.out).unwrap();
    fs::write(cfg.replicates_path(), "# generated_unix=1\ncell,replicate,seed,other\n").unwrap();
    assert!(matches!(run_experiment(cfg), Err(Error::Usage(_))));
}

#[test]
fn seeds_change_the_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let boolean = "model = boolean\ngamma = 0.5\nwindow = 16\npad = 0";
    let a = config("longedge-scaling", "seed = 1\nreplicates = 500\ngrid = 2", boolean, &dir.path().join("a"));
    let b = config("longedge-scaling", "seed = 2\nreplicates = 500\ngrid = 2", boolean, &dir.path().join("b"));
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    assert_ne!(bodies(&a).0, bodies(&b).0);
}

#[test]
fn gilbert_degree_is_pi() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("degree-check", "seed = 9\nreplicates = 40", "model = gilbert\nwindow = 30\npad = 2", dir.path());
    run_experiment(&cfg).unwrap();
    let s = fs::read_to_string(cfg.summary_path()).unwrap();
    let row: Vec<f64> = strip_timestamp(&s).lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let (mean, se, expected) = (row[2], row[3], row[4]);
    assert!((expected - std::f64::consts::PI).abs() < 1e-6, "{expected}");
    assert!((mean - expected).abs() < 4.0 * se, "{mean} ± {se}");
}

#[test]
fn summary_headers() {
    let dir = tempfile::tempdir().unwrap();
    let want = [
        "m,n,replicates,successes,estimate,ci_lo,ci_hi,slope,slope_stderr,prediction",
        "K,stage,replicates,bad_count,estimate,ci_lo,ci_hi,bound",
        "radius,count,median_ratio,q25,q75",
        "m,L,eta,replicates,successes,estimate,ci_lo,ci_hi,slope,slope_stderr,prediction",
        "event,m,x_norm,replicates,covariance,stderr,slope,slope_stderr,reliable,prediction",
        "r,value,scaled,slope,slope_stderr,prediction",
        "replicates,vertices,mean_degree,stderr,expected",
    ];
    for (cfg, header) in small_configs(dir.path()).iter().zip(want) {
        run_experiment(cfg).unwrap();
        let (_, summary) = bodies(cfg);
        assert_eq!(summary.lines().next().unwrap(), header);
        assert_eq!(summary.lines().count(), 1 + if cfg.kind == ExperimentKind::DegreeCheck { 1 } else { cfg.grid.len() });
    }
}

#[test]
fn bracket_oracle_reports_the_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "bracket-oracle",
        "grid = 100, 1000, 10000",
        "model = wdrcm\ngamma = 0.3\ngamma_prime = 0.2\ndelta = 4\nwindow = 10",
        dir.path(),
    );
    let res = run_experiment(&cfg).unwrap();
    let fit = res.fit.unwrap();
    assert!((fit.slope + 3.0).abs() < 0.05, "{}", fit.slope);
}

#[test]
fn neg_d_requires_room() {
    let spec = ModelSpec::lrp(1, 3.0, 20.0).with_pad(Pad::Fixed(0.0));
    let ev = [DistanceEventSpec::new(1.0, 6.0, 0.2).unwrap()];
    assert!(matches!(estimate_neg_d_prob(&spec, &ev, 100, 1), Err(Error::Usage(_))));
    let spec = spec.with_side(24.0);
    let t = estimate_neg_d_prob(&spec, &ev, 100, 1).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.rows[0].1.estimate >= 0.0 && t.rows[0].1.estimate <= 1.0);
}

#[test]
fn grid_errors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "kind = psi-curve\nreplicates = 100\ngrid = 0.5\nout = {}\n[model]\nmodel = gilbert\nwindow = 10\n",
        dir.path().display()
    );
    assert!(matches!(ExperimentConfig::parse(&text), Err(Error::Config { .. })));
    let err = ExperimentConfig::parse(&text).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
