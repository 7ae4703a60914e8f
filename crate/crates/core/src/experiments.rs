//! Config-driven experiments with streamed, resumable replicate output.
//!
//! A config is flat `key = value` text. Model keys live in a `[model]`
//! section; everything else describes the experiment:
//!
//! ```text
//! kind = longedge-scaling
//! seed = 7
//! replicates = 20000
//! grid = 8, 16, 32, 64
//! out = results/longedge
//!
//! [model]
//! model = boolean
//! dim = 2
//! gamma = 0.5
//! window = 64
//! pad = 0
//! ```
//!
//! Each run writes `replicates.csv` (one row per replicate, in index order)
//! and `summary.csv` into the `out` directory. Both start with a
//! `# generated_unix=` line; everything after it depends only on the config.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Cube, Window};
use crate::graph_core::{check_d_event, distance_ratio_samples, DistanceEventSpec, ProfileRow};
use crate::long_edges::{bracket_integral, kernel_zeta, LongEdgeMethod, LongEdgeSampler, Zeta, MIN_REPLICATES};
use crate::mixing::{fit_mixing_exponent, mixing_replicate, mixing_window, summarize, LocalEvent, MixingEstimate};
use crate::models::{expected_degree, EdgeSampler, ModelKind, ModelSpec, Pad, VertexLaw};
use crate::point_process::fmt17;
use crate::renorm::{classify_box, psi_bound, ScaleLadder};
use crate::rng::{cell_replicate_seed, combine};
use crate::stats::{clopper_pearson_upper, fit_exponent, ExponentFit, ProportionEstimate};

/// Replicates computed in parallel between two flushes of the sink.
const CHUNK: u64 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    LongedgeScaling,
    PsiCurve,
    DistanceProfile,
    DEventDecay,
    MixingDecay,
    BracketOracle,
    DegreeCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::LongedgeScaling,
        ExperimentKind::PsiCurve,
        ExperimentKind::DistanceProfile,
        ExperimentKind::DEventDecay,
        ExperimentKind::MixingDecay,
        ExperimentKind::BracketOracle,
        ExperimentKind::DegreeCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LongedgeScaling => "longedge-scaling",
            ExperimentKind::PsiCurve => "psi-curve",
            ExperimentKind::DistanceProfile => "distance-profile",
            ExperimentKind::DEventDecay => "D-event-decay",
            ExperimentKind::MixingDecay => "mixing-decay",
            ExperimentKind::BracketOracle => "bracket-oracle",
            ExperimentKind::DegreeCheck => "degree-check",
        }
    }

    /// Kinds estimating a probability need at least 100 replicates.
    fn is_probability(self) -> bool {
        matches!(
            self,
            ExperimentKind::LongedgeScaling
                | ExperimentKind::PsiCurve
                | ExperimentKind::DEventDecay
                | ExperimentKind::MixingDecay
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("kind", format!("unknown experiment kind {s:?}")))
    }
}

/// Raw `key = value` pairs of one section.
pub type KeyMap = BTreeMap<String, String>;

/// Keys accepted in the `[model]` section.
pub const MODEL_KEYS: [&str; 13] = [
    "model",
    "dim",
    "gamma",
    "gamma_prime",
    "delta",
    "beta",
    "amplitude",
    "intensity",
    "retention",
    "window",
    "pad",
    "generator",
    "seed",
];

const EXPERIMENT_KEYS: [&str; 17] = [
    "kind",
    "seed",
    "replicates",
    "out",
    "grid",
    "n_factor",
    "method",
    "K",
    "samples",
    "L",
    "eta",
    "event",
    "x",
    "xi",
    "mu",
    "c",
    "threads",
];

fn parse_key<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
}

fn parse_real(key: &str, value: &str) -> Result<f64> {
    match value.trim() {
        "inf" | "infinity" | "Infinity" => Ok(f64::INFINITY),
        v => parse_key(key, v),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_real(key, s))
        .collect()
}

/// Builds a model from `[model]` keys; `window` is required.
pub fn model_from_keys(keys: &KeyMap) -> Result<ModelSpec> {
    if let Some(k) = keys.keys().find(|k| !MODEL_KEYS.contains(&k.as_str())) {
        return Err(Error::config(k, "unknown model key"));
    }
    let get = |k: &str| keys.get(k).map(String::as_str);
    let real = |k: &str, default: f64| get(k).map_or(Ok(default), |v| parse_real(k, v));
    let kind: ModelKind = match get("model") {
        Some(v) => v.trim().parse().map_err(|e: Error| Error::config("model", e.to_string()))?,
        None => return Err(Error::config("model", "missing")),
    };
    let dim: usize = get("dim").map_or(Ok(2), |v| parse_key("dim", v))?;
    let side = match get("window") {
        Some(v) => parse_real("window", v)?,
        None => return Err(Error::config("window", "missing")),
    };
    let gamma = real("gamma", 0.0)?;
    let gamma_prime = real("gamma_prime", 0.0)?;
    let delta = real("delta", f64::INFINITY)?;
    let beta = real("beta", 0.5)?;
    let mut spec = match kind {
        ModelKind::Wdrcm => ModelSpec::wdrcm(dim, gamma, gamma_prime, delta, side),
        ModelKind::Lrp => ModelSpec::lrp(dim, delta, side),
        ModelKind::Boolean => ModelSpec::boolean(dim, gamma, side),
        ModelKind::SoftBoolean => ModelSpec::soft_boolean(dim, gamma, delta, side),
        ModelKind::Interference => ModelSpec::interference(dim, gamma, delta, beta, side),
        ModelKind::Ellipses => {
            if dim != 2 {
                return Err(Error::config("dim", "ellipses percolation is planar"));
            }
            ModelSpec::ellipses(gamma, side)
        }
        ModelKind::Gilbert => ModelSpec::gilbert(dim, side),
    };
    spec = spec.with_amplitude(real("amplitude", 1.0)?);
    match (spec.vertices, get("intensity"), get("retention")) {
        (_, Some(_), Some(_)) => return Err(Error::config("retention", "give intensity or retention, not both")),
        (VertexLaw::Poisson { .. }, _, Some(_)) => {
            return Err(Error::config("retention", "Poisson models take an intensity"))
        }
        (VertexLaw::Lattice { .. }, Some(_), _) => return Err(Error::config("intensity", "lattice models take a retention")),
        (_, Some(v), _) => spec = spec.with_intensity(parse_real("intensity", v)?),
        (_, _, Some(v)) => spec = spec.with_intensity(parse_real("retention", v)?),
        _ => {}
    }
    if let Some(v) = get("pad") {
        spec = spec.with_pad(match v.trim() {
            "auto" => Pad::Auto,
            p => Pad::Fixed(parse_real("pad", p)?),
        });
    }
    if let Some(v) = get("generator") {
        let g: EdgeSampler = v.trim().parse().map_err(|e: Error| Error::config("generator", e.to_string()))?;
        spec = spec.with_generator(g);
    }
    spec.validate().map_err(|e| Error::config("model", e.to_string()))?;
    Ok(spec)
}

/// Splits config text into experiment keys and `[model]` keys.
/// Dashes in keys read as underscores.
pub fn read_sections(text: &str) -> Result<(KeyMap, KeyMap)> {
    let mut top = BTreeMap::new();
    let mut model = BTreeMap::new();
    let mut section = "experiment".to_string();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find(" #") {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            if section != "model" && section != "experiment" {
                return Err(Error::config(&section, "unknown section"));
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(format!("line {}", lineno + 1), "expected key = value"));
        };
        let (k, v) = (k.trim().replace('-', "_"), v.trim().to_string());
        let k = if k == "k" { "K".to_string() } else if k == "l" { "L".to_string() } else { k };
        let target = if section == "model" { &mut model } else { &mut top };
        if target.insert(k.clone(), v).is_some() {
            return Err(Error::config(&k, "duplicate key"));
        }
    }
    Ok((top, model))
}

/// Parsed experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelSpec,
    pub seed: u64,
    pub replicates: u64,
    pub out: PathBuf,
    /// Box sides, stages, radii or bracket arguments depending on the kind.
    pub grid: Vec<f64>,
    /// Long-edge threshold as a multiple of `m`.
    pub n_factor: f64,
    pub method: LongEdgeMethod,
    /// Base scale of the ladder.
    pub k: u64,
    /// Sources per graph in distance profiles.
    pub samples: usize,
    /// Inner box side of the distance event.
    pub l: f64,
    pub eta: f64,
    pub event: LocalEvent,
    /// Displacement of the second box in units of `m`.
    pub x: Vec<f64>,
    /// Parameters `(ξ, μ, c)` of the `ψ` bound, when given.
    pub psi_bound: Option<(f64, f64, f64)>,
    /// Worker cap, for callers that size a thread pool.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (top, model) = read_sections(text)?;
        Self::from_keys(&top, &model)
    }

    /// Builds a config from the two key maps.
    pub fn from_keys(top: &KeyMap, model_keys: &KeyMap) -> Result<Self> {
        if let Some(k) = top.keys().find(|k| !EXPERIMENT_KEYS.contains(&k.as_str())) {
            return Err(Error::config(k, "unknown experiment key"));
        }
        let get = |k: &str| top.get(k).map(String::as_str);
        let real = |k: &str, default: f64| get(k).map_or(Ok(default), |v| parse_real(k, v));
        let kind: ExperimentKind = get("kind").ok_or_else(|| Error::config("kind", "missing"))?.trim().parse()?;
        let model = model_from_keys(model_keys)?;
        let seed = match (get("seed"), model_keys.get("seed").map(String::as_str)) {
            (Some(_), Some(_)) => return Err(Error::config("seed", "given twice")),
            (Some(v), None) | (None, Some(v)) => parse_key("seed", v)?,
            (None, None) => 0,
        };
        let replicates = match get("replicates") {
            Some(v) => parse_key("replicates", v)?,
            None if kind == ExperimentKind::BracketOracle => 1,
            None => return Err(Error::config("replicates", "missing")),
        };
        let out = PathBuf::from(get("out").ok_or_else(|| Error::config("out", "missing"))?.trim());
        let grid = match get("grid") {
            Some(v) => parse_list("grid", v)?,
            None if kind == ExperimentKind::DegreeCheck => vec![model.side],
            None => return Err(Error::config("grid", "missing")),
        };
        let dim = model.dim as f64;
        let psi = match (get("xi"), get("mu"), get("c")) {
            (Some(a), Some(b), Some(c)) => Some((parse_real("xi", a)?, parse_real("mu", b)?, parse_real("c", c)?)),
            (None, None, None) => None,
            _ => return Err(Error::config("xi", "xi, mu and c go together")),
        };
        let cfg = ExperimentConfig {
            kind,
            seed,
            replicates,
            out,
            n_factor: real("n_factor", 1.0)?,
            method: match get("method") {
                Some(v) => v.trim().parse().map_err(|e: Error| Error::config("method", e.to_string()))?,
                None => LongEdgeMethod::Auto,
            },
            k: get("K").map_or(Ok(100), |v| parse_key("K", v))?,
            samples: get("samples").map_or(Ok(1), |v| parse_key("samples", v))?,
            l: real("L", 1.0)?,
            eta: real("eta", 0.05 / dim.sqrt())?,
            event: match get("event") {
                Some(v) => LocalEvent::parse(v).map_err(|e| Error::config("event", e.to_string()))?,
                None => LocalEvent::Stage0Bad,
            },
            x: match get("x") {
                Some(v) => parse_list("x", v)?,
                None => {
                    let mut x = vec![0.0; model.dim];
                    x[0] = 4.0;
                    x
                }
            },
            psi_bound: psi,
            threads: get("threads").map(|v| parse_key("threads", v)).transpose()?,
            grid,
            model,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("grid", "empty scale grid"));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("grid", "grid must be strictly increasing"));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("grid", "grid values must be finite"));
        }
        if self.kind.is_probability() && self.replicates < MIN_REPLICATES {
            return Err(Error::config("replicates", format!("need at least {MIN_REPLICATES} for a probability")));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "need at least one replicate"));
        }
        if self.kind == ExperimentKind::PsiCurve && self.grid.iter().any(|s| *s < 0.0 || s.fract() != 0.0) {
            return Err(Error::config("grid", "psi-curve stages must be nonnegative integers"));
        }
        if self.kind == ExperimentKind::MixingDecay && self.x.len() != self.model.dim {
            return Err(Error::config("x", "displacement has the wrong dimension"));
        }
        if !(self.n_factor >= 0.0) {
            return Err(Error::config("n_factor", "must be nonnegative"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be positive"));
        }
        Ok(())
    }

    pub fn replicates_path(&self) -> PathBuf {
        self.out.join("replicates.csv")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out.join("summary.csv")
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub replicates_csv: PathBuf,
    pub summary_csv: PathBuf,
    /// Rows computed by this run.
    pub computed: u64,
    /// Rows taken over from an earlier run.
    pub resumed: u64,
    pub fit: Option<ExponentFit>,
}

type RowFn<'a> = Box<dyn Fn(usize, u64) -> Result<Vec<f64>> + Sync + 'a>;

/// Per-replicate work of one experiment.
struct Plan<'a> {
    columns: Vec<String>,
    cells: usize,
    replicates: u64,
    row: RowFn<'a>,
}

/// Integers print without exponent so indicator columns stay readable;
/// everything else keeps 17 significant digits.
fn fmt_value(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        fmt17(v)
    }
}

fn timestamp_line() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("# generated_unix={secs}")
}

/// Valid leading rows of an existing replicate file and the byte length
/// they occupy.
fn read_existing(path: &Path, header: &str, plan: &Plan) -> Result<(Vec<Vec<f64>>, u64)> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut rows = Vec::new();
    let mut offset = 0u64;
    let mut line = String::new();
    let mut seen_header = false;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 || !line.ends_with('\n') {
            break;
        }
        let body = line.trim_end_matches('\n');
        if !seen_header {
            if body.starts_with('#') {
                offset += n as u64;
                continue;
            }
            if body != header {
                return Err(Error::usage(format!(
                    "{} was written with different columns; move it away to start over",
                    path.display()
                )));
            }
            seen_header = true;
            offset += n as u64;
            continue;
        }
        let t = rows.len() as u64;
        let (cell, rep) = ((t / plan.replicates) as usize, t % plan.replicates);
        if cell >= plan.cells {
            break;
        }
        let fields: Vec<&str> = body.split(',').collect();
        if fields.len() != 3 + plan.columns.len()
            || fields[0] != cell.to_string()
            || fields[1] != rep.to_string()
        {
            break;
        }
        let vals: std::result::Result<Vec<f64>, _> = fields[3..].iter().map(|f| f.parse::<f64>()).collect();
        match vals {
            Ok(v) => rows.push(v),
            Err(_) => break,
        }
        offset += n as u64;
    }
    if !seen_header {
        return Ok((Vec::new(), 0));
    }
    Ok((rows, offset))
}

/// Runs the plan through the ordered sink; returns the rows of every
/// replicate in index order and how many were resumed.
fn stream(plan: &Plan, path: &Path, seed: u64) -> Result<(Vec<Vec<f64>>, u64)> {
    let header = format!("cell,replicate,seed,{}", plan.columns.join(","));
    let (mut rows, offset) = if path.exists() {
        read_existing(path, &header, plan)?
    } else {
        (Vec::new(), 0)
    };
    let resumed = rows.len() as u64;
    let mut file = OpenOptions::new().create(true).write(true).truncate(false).open(path)?;
    if offset == 0 {
        file.set_len(0)?;
        rows.clear();
    } else {
        file.set_len(offset)?;
    }
    file.seek(SeekFrom::End(0))?;
    let mut out = BufWriter::new(file);
    if offset == 0 {
        writeln!(out, "{}", timestamp_line())?;
        writeln!(out, "{header}")?;
    }
    let total = plan.cells as u64 * plan.replicates;
    let mut next = rows.len() as u64;
    while next < total {
        let end = (next + CHUNK).min(total);
        let chunk: Vec<Vec<f64>> = (next..end)
            .into_par_iter()
            .map(|t| {
                let (cell, rep) = ((t / plan.replicates) as usize, t % plan.replicates);
                let v = (plan.row)(cell, rep)?;
                debug_assert_eq!(v.len(), plan.columns.len());
                Ok(v)
            })
            .collect::<Result<_>>()?;
        for (off, v) in chunk.into_iter().enumerate() {
            let t = next + off as u64;
            let (cell, rep) = (t / plan.replicates, t % plan.replicates);
            let s = cell_replicate_seed(seed, cell, rep);
            let fields: Vec<String> = v.iter().map(|&x| fmt_value(x)).collect();
            writeln!(out, "{cell},{rep},{s},{}", fields.join(","))?;
            rows.push(v);
        }
        out.flush()?;
        next = end;
    }
    out.flush()?;
    Ok((rows, resumed))
}

fn write_summary(path: &Path, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", timestamp_line())?;
    writeln!(out, "{}", columns.join(","))?;
    for r in rows {
        writeln!(out, "{}", r.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn fit_columns(fit: &Option<ExponentFit>) -> [String; 2] {
    match fit {
        Some(f) => [fmt_value(f.slope), fmt_value(f.stderr)],
        None => ["NaN".into(), "NaN".into()],
    }
}

/// `d ζ` of a kernel model, when defined.
fn kernel_prediction(spec: &ModelSpec) -> f64 {
    match spec.kernel().ok().map(|k| kernel_zeta(&k)) {
        Some(Ok(Zeta::Value(z))) => spec.dim as f64 * z,
        _ => f64::NAN,
    }
}

/// Upper interval end, one-sided Clopper-Pearson on a zero-success cell.
fn upper(p: &ProportionEstimate) -> f64 {
    if p.successes == 0 {
        clopper_pearson_upper(0, p.replicates, 0.05)
    } else {
        p.ci_hi
    }
}

fn proportions(rows: &[Vec<f64>], cells: usize, reps: u64, col: usize) -> Vec<ProportionEstimate> {
    (0..cells)
        .map(|c| {
            let cell = &rows[c * reps as usize..(c + 1) * reps as usize];
            let hits = cell.iter().filter(|r| r[col] != 0.0).count() as u64;
            ProportionEstimate::wilson(hits, reps)
        })
        .collect()
}

fn cell_master(seed: u64, cell: usize) -> u64 {
    combine(seed, cell as u64)
}

/// Table of `P(¬D^η_L(m))` over a grid of distance events.
#[derive(Clone, Debug)]
pub struct NegDTable {
    pub rows: Vec<(DistanceEventSpec, ProportionEstimate)>,
    pub fit: Option<ExponentFit>,
}

fn neg_d_replicate(model: &ModelSpec, window: &Window, ev: &DistanceEventSpec, seed: u64) -> Result<bool> {
    let g = model.realize_in(window, seed)?;
    Ok(!check_d_event(&g, ev)?.holds)
}

fn check_neg_d(model: &ModelSpec, specs: &[DistanceEventSpec]) -> Result<Window> {
    model.validate()?;
    let max_m = specs.iter().map(|s| s.m).fold(0.0, f64::max);
    if model.side < 4.0 * max_m {
        return Err(Error::usage(format!("window side {} is below 4 max m = {}", model.side, 4.0 * max_m)));
    }
    model.window()
}

/// Monte Carlo estimate of `P(¬D^η_L(m))` per event with a log-log fit of
/// the decay in `m`.
pub fn estimate_neg_d_prob(
    model: &ModelSpec,
    specs: &[DistanceEventSpec],
    replicates: u64,
    seed: u64,
) -> Result<NegDTable> {
    if replicates < MIN_REPLICATES {
        return Err(Error::param(format!("need at least {MIN_REPLICATES} replicates")));
    }
    let window = check_neg_d(model, specs)?;
    let rows = specs
        .iter()
        .enumerate()
        .map(|(c, ev)| {
            let hits = (0..replicates)
                .into_par_iter()
                .map(|i| neg_d_replicate(model, &window, ev, cell_replicate_seed(seed, c as u64, i)).map(u64::from))
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            Ok((*ev, ProportionEstimate::wilson(hits, replicates)))
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|(e, p)| (e.m, p.estimate)).collect();
    Ok(NegDTable {
        fit: fit_exponent(&pts).ok(),
        rows,
    })
}

/// Runs the configured experiment, resuming from an existing replicate file.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let spec = &cfg.model;
    let grid = &cfg.grid;
    let cells = grid.len();
    let reps = cfg.replicates;
    let seed = cfg.seed;
    let dim = spec.dim;
    let (plan, summarize_fn): (Plan, Box<dyn Fn(&[Vec<f64>]) -> Result<(Vec<&'static str>, Vec<Vec<String>>, Option<ExponentFit>)>>) =
        match cfg.kind {
            ExperimentKind::LongedgeScaling => {
                let samplers = grid
                    .iter()
                    .map(|&m| LongEdgeSampler::new(spec, m, cfg.n_factor * m, cfg.method))
                    .collect::<Result<Vec<_>>>()?;
                let plan = Plan {
                    columns: vec!["present".into()],
                    cells,
                    replicates: reps,
                    row: Box::new(move |c, i| Ok(vec![samplers[c].sample(i, cell_master(seed, c))? as u8 as f64])),
                };
                let prediction = kernel_prediction(spec);
                let n_factor = cfg.n_factor;
                let grid = grid.clone();
                (
                    plan,
                    Box::new(move |rows| {
                        let props = proportions(rows, cells, reps, 0);
                        let pts: Vec<(f64, f64)> = grid.iter().zip(&props).map(|(&m, p)| (m, p.estimate)).collect();
                        let fit = fit_exponent(&pts).ok();
                        let [slope, se] = fit_columns(&fit);
                        let table = grid
                            .iter()
                            .zip(&props)
                            .map(|(&m, p)| {
                                vec![
                                    fmt_value(m),
                                    fmt_value(n_factor * m),
                                    p.replicates.to_string(),
                                    p.successes.to_string(),
                                    fmt_value(p.estimate),
                                    fmt_value(p.ci_lo),
                                    fmt_value(upper(p)),
                                    slope.clone(),
                                    se.clone(),
                                    fmt_value(prediction),
                                ]
                            })
                            .collect();
                        Ok((
                            vec!["m", "n", "replicates", "successes", "estimate", "ci_lo", "ci_hi", "slope", "slope_stderr", "prediction"],
                            table,
                            fit,
                        ))
                    }),
                )
            }
            ExperimentKind::PsiCurve => {
                let top = *grid.last().expect("nonempty") as usize;
                let ladder = ScaleLadder::new(cfg.k, top)?;
                if spec.side < ladder.footprint(top) {
                    return Err(Error::config(
                        "window",
                        format!("window side {} is below K_n + K_(n-1) = {}", spec.side, ladder.footprint(top)),
                    ));
                }
                let window = spec.window()?;
                let stages: Vec<usize> = grid.iter().map(|&s| s as usize).collect();
                let origin = vec![0.0; dim];
                let k = cfg.k;
                let bound = cfg.psi_bound;
                let ladder2 = ladder.clone();
                let plan = Plan {
                    columns: vec!["bad".into()],
                    cells,
                    replicates: reps,
                    row: Box::new(move |c, i| {
                        let g = spec.realize_in(&window, cell_replicate_seed(seed, c as u64, i))?;
                        Ok(vec![!classify_box(&g, &origin, stages[c], &ladder2)?.good as u8 as f64])
                    }),
                };
                let grid = grid.clone();
                (
                    plan,
                    Box::new(move |rows| {
                        let props = proportions(rows, cells, reps, 0);
                        let table = grid
                            .iter()
                            .zip(&props)
                            .map(|(&s, p)| {
                                let b = match bound {
                                    Some((xi, mu, c)) if s >= 1.0 => psi_bound(s as usize, xi, mu, dim, c)?,
                                    _ => f64::NAN,
                                };
                                Ok(vec![
                                    k.to_string(),
                                    fmt_value(s),
                                    p.replicates.to_string(),
                                    p.successes.to_string(),
                                    fmt_value(p.estimate),
                                    fmt_value(p.ci_lo),
                                    fmt_value(p.ci_hi),
                                    fmt_value(b),
                                ])
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok((
                            vec!["K", "stage", "replicates", "bad_count", "estimate", "ci_lo", "ci_hi", "bound"],
                            table,
                            None,
                        ))
                    }),
                )
            }
            ExperimentKind::DistanceProfile => {
                let window = spec.window()?;
                let samples = cfg.samples.max(1);
                let radii = grid.clone();
                let columns: Vec<String> = radii
                    .iter()
                    .flat_map(|r| (0..samples).map(move |s| format!("ratio_r{}_{}", fmt_value(*r), s)))
                    .collect();
                let radii2 = radii.clone();
                let plan = Plan {
                    columns,
                    cells: 1,
                    replicates: reps,
                    row: Box::new(move |_, i| {
                        let s = cell_replicate_seed(seed, 0, i);
                        let g = spec.realize_in(&window, s)?;
                        let per = distance_ratio_samples(&g, &radii2, samples, combine(s, 0x5052))?;
                        Ok(per
                            .into_iter()
                            .flat_map(|mut v| {
                                v.resize(samples, f64::NAN);
                                v
                            })
                            .collect())
                    }),
                };
                (
                    plan,
                    Box::new(move |rows| {
                        let table = radii
                            .iter()
                            .enumerate()
                            .map(|(ri, &r)| {
                                let vals: Vec<f64> = rows
                                    .iter()
                                    .flat_map(|row| row[ri * samples..(ri + 1) * samples].iter().copied())
                                    .filter(|v| !v.is_nan())
                                    .collect();
                                let p = ProfileRow::summarize(r, &vals);
                                vec![
                                    fmt_value(r),
                                    p.count.to_string(),
                                    fmt_value(p.median_ratio),
                                    fmt_value(p.q25),
                                    fmt_value(p.q75),
                                ]
                            })
                            .collect();
                        Ok((vec!["radius", "count", "median_ratio", "q25", "q75"], table, None))
                    }),
                )
            }
            ExperimentKind::DEventDecay => {
                let events = grid
                    .iter()
                    .map(|&m| DistanceEventSpec::new(cfg.l, m, cfg.eta))
                    .collect::<Result<Vec<_>>>()?;
                let window = check_neg_d(spec, &events)?;
                let ev2 = events.clone();
                let plan = Plan {
                    columns: vec!["not_d".into()],
                    cells,
                    replicates: reps,
                    row: Box::new(move |c, i| {
                        let s = cell_replicate_seed(seed, c as u64, i);
                        Ok(vec![neg_d_replicate(spec, &window, &ev2[c], s)? as u8 as f64])
                    }),
                };
                let prediction = if spec.kind == ModelKind::Lrp {
                    -(dim as f64) * (spec.delta - 2.0)
                } else {
                    f64::NAN
                };
                (
                    plan,
                    Box::new(move |rows| {
                        let props = proportions(rows, cells, reps, 0);
                        let pts: Vec<(f64, f64)> = events.iter().zip(&props).map(|(e, p)| (e.m, p.estimate)).collect();
                        let fit = fit_exponent(&pts).ok();
                        let [slope, se] = fit_columns(&fit);
                        let table = events
                            .iter()
                            .zip(&props)
                            .map(|(e, p)| {
                                vec![
                                    fmt_value(e.m),
                                    fmt_value(e.l),
                                    fmt_value(e.eta),
                                    p.replicates.to_string(),
                                    p.successes.to_string(),
                                    fmt_value(p.estimate),
                                    fmt_value(p.ci_lo),
                                    fmt_value(upper(p)),
                                    slope.clone(),
                                    se.clone(),
                                    fmt_value(prediction),
                                ]
                            })
                            .collect();
                        Ok((
                            vec![
                                "m", "L", "eta", "replicates", "successes", "estimate", "ci_lo", "ci_hi", "slope",
                                "slope_stderr", "prediction",
                            ],
                            table,
                            fit,
                        ))
                    }),
                )
            }
            ExperimentKind::MixingDecay => {
                let norm = cfg.x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 2.0) {
                    return Err(Error::config("x", format!("displacement norm must exceed 2, got {norm}")));
                }
                let windows = grid.iter().map(|&m| mixing_window(spec, m, &cfg.x)).collect::<Result<Vec<_>>>()?;
                let event = cfg.event.clone();
                let x = cfg.x.clone();
                let g2 = grid.clone();
                let plan = Plan {
                    columns: vec!["a".into(), "b".into()],
                    cells,
                    replicates: reps,
                    row: Box::new(move |c, i| {
                        let (a, b) = mixing_replicate(spec, &event, &windows[c], g2[c], &x, i, cell_master(seed, c))?;
                        Ok(vec![a as u8 as f64, b as u8 as f64])
                    }),
                };
                let prediction = if spec.kind == ModelKind::Interference {
                    1.0 - 1.0 / spec.beta
                } else {
                    f64::NAN
                };
                let name = cfg.event.name();
                let x = cfg.x.clone();
                let grid = grid.clone();
                (
                    plan,
                    Box::new(move |rows| {
                        let est: Vec<MixingEstimate> = (0..cells)
                            .map(|c| {
                                let pairs: Vec<(bool, bool)> = rows[c * reps as usize..(c + 1) * reps as usize]
                                    .iter()
                                    .map(|r| (r[0] != 0.0, r[1] != 0.0))
                                    .collect();
                                summarize(name.clone(), grid[c], x.clone(), &pairs)
                            })
                            .collect();
                        let mf = fit_mixing_exponent(&est);
                        let [slope, se] = fit_columns(&mf.fit);
                        let table = est
                            .iter()
                            .map(|e| {
                                vec![
                                    e.event.clone(),
                                    fmt_value(e.m),
                                    fmt_value(e.x_norm()),
                                    e.replicates.to_string(),
                                    fmt_value(e.covariance),
                                    fmt_value(e.stderr),
                                    slope.clone(),
                                    se.clone(),
                                    mf.reliable.to_string(),
                                    fmt_value(prediction),
                                ]
                            })
                            .collect();
                        Ok((
                            vec![
                                "event", "m", "x_norm", "replicates", "covariance", "stderr", "slope", "slope_stderr",
                                "reliable", "prediction",
                            ],
                            table,
                            mf.fit,
                        ))
                    }),
                )
            }
            ExperimentKind::BracketOracle => {
                let kernel = spec.kernel().map_err(|e| Error::config("model", e.to_string()))?;
                let z = kernel_zeta(&kernel)?
                    .value()
                    .ok_or_else(|| Error::config("model", "ζ is undefined for this kernel"))?;
                let radii = grid.clone();
                let k2 = kernel.clone();
                let plan = Plan {
                    columns: vec!["value".into()],
                    cells,
                    replicates: 1,
                    row: Box::new(move |c, _| Ok(vec![bracket_integral(&k2, radii[c], dim)?])),
                };
                let dz = dim as f64 * z;
                let grid = grid.clone();
                (
                    plan,
                    Box::new(move |rows| {
                        let pts: Vec<(f64, f64)> = grid.iter().zip(rows).map(|(&r, v)| (r, v[0])).collect();
                        let fit = fit_exponent(&pts).ok();
                        let [slope, se] = fit_columns(&fit);
                        let table = pts
                            .iter()
                            .map(|&(r, v)| {
                                vec![
                                    fmt_value(r),
                                    fmt_value(v),
                                    fmt_value(v * r.powf(-dz)),
                                    slope.clone(),
                                    se.clone(),
                                    fmt_value(dz),
                                ]
                            })
                            .collect();
                        Ok((vec!["r", "value", "scaled", "slope", "slope_stderr", "prediction"], table, fit))
                    }),
                )
            }
            ExperimentKind::DegreeCheck => {
                let window = spec.window()?;
                let plan = Plan {
                    columns: vec!["vertices".into(), "degree_sum".into()],
                    cells: 1,
                    replicates: reps,
                    row: Box::new(move |_, i| {
                        let g = spec.realize_in(&window, cell_replicate_seed(seed, 0, i))?;
                        let inner = g.cloud().indices_in(&Cube::new(window.center.clone(), window.side));
                        let sum: usize = inner.iter().map(|&v| g.degree(v)).sum();
                        Ok(vec![inner.len() as f64, sum as f64])
                    }),
                };
                let expected = match spec.kernel() {
                    Ok(k) if spec.kind != ModelKind::Interference => {
                        expected_degree(&k, spec.vertices.density(), dim).unwrap_or(f64::NAN)
                    }
                    _ => f64::NAN,
                };
                (
                    plan,
                    Box::new(move |rows| {
                        let vertices: f64 = rows.iter().map(|r| r[0]).sum();
                        let means: Vec<f64> = rows.iter().filter(|r| r[0] > 0.0).map(|r| r[1] / r[0]).collect();
                        let (mean, se) = crate::stats::mean_and_stderr(&means);
                        Ok((
                            vec!["replicates", "vertices", "mean_degree", "stderr", "expected"],
                            vec![vec![
                                rows.len().to_string(),
                                fmt_value(vertices),
                                fmt_value(mean),
                                fmt_value(se),
                                fmt_value(expected),
                            ]],
                            None,
                        ))
                    }),
                )
            }
        };
    let replicates_csv = cfg.replicates_path();
    let (rows, resumed) = stream(&plan, &replicates_csv, seed)?;
    let (columns, table, fit) = summarize_fn(&rows)?;
    let summary_csv = cfg.summary_path();
    write_summary(&summary_csv, &columns, &table)?;
    Ok(ExperimentResult {
        kind: cfg.kind,
        replicates_csv,
        summary_csv,
        computed: rows.len() as u64 - resumed,
        resumed,
        fit,
    })
}

/// File contents without the leading timestamp line.
pub fn strip_timestamp(text: &str) -> &str {
    match text.strip_prefix("# generated_unix=") {
        Some(rest) => rest.split_once('\n').map_or("", |(_, body)| body),
        None => text,
    }
}
