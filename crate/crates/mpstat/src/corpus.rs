//! Fixture corpus: encoded examples with expectation side-files, seeded instance
//! families with frozen snapshots, and the runner that checks both.
//!
//! Layout under the corpus directory:
//!
//! ```text
//! fixtures/NAME.toml          instance with its point
//! fixtures/NAME.expect.toml   expectations
//! fixtures/NAME.tangent.toml  tangent cones, for nonlinear data
//! seeds.toml                  seed families
//! snapshots/FAMILY.toml       frozen per-point summaries of each family
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use mpstat_core::cones::{check_gcq, union_equal, CqReport, TangentFixture, UnionCone};
use mpstat_core::instance::{check_feasible, index_sets};
use mpstat_core::stationarity::{
    check, classify_all, d_grid, satisfies, LatticeReport, MultiplierVector, StationarityKind,
};
use mpstat_core::{CandidatePoint, Instance, ProblemKind};
use serde::{Deserialize, Serialize};

use crate::format::{
    kind_token, parse_expectations, parse_instance, parse_tangent_fixture, write_expectations, ExpectKey, Expectation,
    Expected, Origin, ParseError, FORMAT_VERSION,
};
use crate::generate::{gen_affine, gen_ss_small, GenConfig, GenError, Generated};
use crate::oracle::brute_local_min;
use crate::report::instance_digest;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{context}: {source}")]
    Core {
        context: String,
        source: Box<mpstat_core::Error>,
    },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn core<T>(context: impl Into<String>, r: mpstat_core::Result<T>) -> Result<T> {
    r.map_err(|source| CorpusError::Core {
        context: context.into(),
        source: Box::new(source),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub instance: Instance,
    pub point: CandidatePoint,
    pub tangent: Option<TangentFixture>,
    pub expectations: Vec<Expectation>,
    pub notes: Option<String>,
    pub expect_path: PathBuf,
}

pub fn load_fixture(dir: &Path, name: &str) -> Result<Fixture> {
    let inst_path = dir.join(format!("{name}.toml"));
    let parse_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Parse { path, source }
    };
    let file = parse_instance(&read(&inst_path)?).map_err(parse_err(&inst_path))?;
    let point = file
        .point
        .ok_or_else(|| CorpusError::Invalid(format!("{}: fixtures must name a `point`", inst_path.display())))?;
    let n = file.instance.dim();
    let tangent_path = dir.join(format!("{name}.tangent.toml"));
    let tangent = if tangent_path.exists() {
        Some(parse_tangent_fixture(&read(&tangent_path)?, n).map_err(parse_err(&tangent_path))?)
    } else {
        None
    };
    let expect_path = dir.join(format!("{name}.expect.toml"));
    let (l, m, p) = file.instance.sizes();
    let expectations = if expect_path.exists() {
        parse_expectations(&read(&expect_path)?, n, p, l + m + 2 * p).map_err(parse_err(&expect_path))?
    } else {
        Vec::new()
    };
    Ok(Fixture {
        name: name.to_string(),
        instance: file.instance,
        point,
        tangent,
        expectations,
        notes: file.notes,
        expect_path,
    })
}

/// Every `NAME.toml` in `dir` that is not a side-file, sorted by name.
pub fn load_fixtures(dir: &Path) -> Result<Vec<Fixture>> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut names = Vec::new();
    for e in entries {
        let e = e.map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let file = e.file_name().to_string_lossy().into_owned();
        if let Some(stem) = file.strip_suffix(".toml") {
            if !stem.ends_with(".expect") && !stem.ends_with(".tangent") {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(CorpusError::Invalid(format!("no fixtures in {}", dir.display())));
    }
    names.iter().map(|n| load_fixture(dir, n)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub fixture: String,
    pub key: String,
    pub detail: String,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}: {}", self.fixture, self.key, self.detail)
    }
}

/// Lazily computed CQ data of a fixture.
struct Cq<'a> {
    fx: &'a Fixture,
    report: Option<CqReport>,
}

impl Cq<'_> {
    fn get(&mut self) -> Result<&CqReport> {
        if self.report.is_none() {
            let r = check_gcq(&self.fx.instance, &self.fx.point, self.fx.tangent.as_ref());
            self.report = Some(core(format!("fixture {}", self.fx.name), r)?);
        }
        Ok(self.report.as_ref().expect("set above"))
    }
}

fn cones_equal(a: &UnionCone, b: &UnionCone) -> Result<bool> {
    core("cone comparison", union_equal(a, b))
}

/// Evaluates one expectation key at the fixture point.
fn evaluate(fx: &Fixture, cq: &mut Cq<'_>, key: &ExpectKey, expected: &Expected) -> Result<Option<String>> {
    let ctx = || format!("fixture {} key {}", fx.name, key.name());
    let (inst, x) = (&fx.instance, &fx.point);
    let bool_check = |got: bool| match expected {
        Expected::Bool(want) if *want == got => None,
        _ => Some(format!("expected {}, got {got}", describe(expected))),
    };
    Ok(match key {
        ExpectKey::Gcq => bool_check(cq.get()?.gcq),
        ExpectKey::Acq => bool_check(cq.get()?.acq),
        ExpectKey::GcqNlp0 => bool_check(cq.get()?.gcq_nlp0),
        ExpectKey::LocalMin => bool_check(core(ctx(), brute_local_min(inst, x))?),
        ExpectKey::Verdict(k) => bool_check(core(ctx(), check(inst, x, k))?.holds),
        ExpectKey::Linearized | ExpectKey::Nlp0Linearized => {
            let Expected::Cone(want) = expected else {
                return Ok(Some("expected a cone".into()));
            };
            let report = cq.get()?;
            let got = match key {
                ExpectKey::Linearized => report.linearized.clone(),
                _ => UnionCone::single(report.nlp0_linearized.clone()),
            };
            if cones_equal(want, &got)? {
                None
            } else {
                Some("cone differs from the computed one".into())
            }
        }
        ExpectKey::Witness(k) => {
            let Expected::Vector(flat) = expected else {
                return Ok(Some("expected a multiplier vector".into()));
            };
            let (l, m, p) = inst.sizes();
            let w = core(ctx(), MultiplierVector::from_flat(flat, l, m, p))?;
            if core(ctx(), satisfies(inst, x, k, &w))? {
                None
            } else {
                Some(format!("witness rejected for {}", kind_token(k)))
            }
        }
    })
}

fn describe(e: &Expected) -> String {
    match e {
        Expected::Bool(b) => b.to_string(),
        Expected::Vector(v) => format!("{v:?}"),
        Expected::Cone(_) => "a cone".into(),
    }
}

pub fn check_fixture(fx: &Fixture) -> Result<Vec<Mismatch>> {
    if !core(format!("fixture {}", fx.name), check_feasible(&fx.instance, &fx.point))? {
        return Ok(vec![Mismatch {
            fixture: fx.name.clone(),
            key: "point".into(),
            detail: "point is infeasible".into(),
        }]);
    }
    let mut cq = Cq { fx, report: None };
    let mut out = Vec::new();
    for e in &fx.expectations {
        if let Some(detail) = evaluate(fx, &mut cq, &e.key, &e.expected)? {
            out.push(Mismatch {
                fixture: fx.name.clone(),
                key: e.key.name(),
                detail,
            });
        }
    }
    Ok(out)
}

fn standard_kinds(inst: &Instance, x: &CandidatePoint) -> Result<Vec<StationarityKind>> {
    let sets = core("index sets", index_sets(inst, x))?;
    let (_, _, p) = inst.sizes();
    let mut kinds = vec![
        StationarityKind::Weak,
        StationarityKind::A,
        StationarityKind::C,
        StationarityKind::M,
        StationarityKind::S,
        StationarityKind::LinB,
    ];
    for alpha in sets.alpha_patterns(p) {
        kinds.push(StationarityKind::AAlpha(alpha.clone()));
        kinds.push(StationarityKind::PAlpha(alpha));
    }
    Ok(kinds)
}

/// The expectations the oracles and the classifier can regenerate for a fixture.
pub fn derive_expectations(fx: &Fixture) -> Result<Vec<Expectation>> {
    let (inst, x) = (&fx.instance, &fx.point);
    let computed = |key, expected| Expectation {
        key,
        origin: Origin::Computed,
        reference: None,
        expected,
    };
    let mut out = Vec::new();
    for k in standard_kinds(inst, x)? {
        let holds = core(format!("fixture {}", fx.name), check(inst, x, &k))?.holds;
        out.push(computed(ExpectKey::Verdict(k), Expected::Bool(holds)));
    }
    match brute_local_min(inst, x) {
        Ok(b) => out.push(computed(ExpectKey::LocalMin, Expected::Bool(b))),
        Err(mpstat_core::Error::UnsupportedData) => {}
        Err(e) => return core(format!("fixture {}", fx.name), Err(e)),
    }
    if inst.has_affine_constraints() || fx.tangent.is_some() {
        let r = core(format!("fixture {}", fx.name), check_gcq(inst, x, fx.tangent.as_ref()))?;
        out.push(computed(ExpectKey::Gcq, Expected::Bool(r.gcq)));
        out.push(computed(ExpectKey::Acq, Expected::Bool(r.acq)));
        out.push(computed(ExpectKey::GcqNlp0, Expected::Bool(r.gcq_nlp0)));
        out.push(computed(ExpectKey::Linearized, Expected::Cone(r.linearized)));
        out.push(computed(
            ExpectKey::Nlp0Linearized,
            Expected::Cone(UnionCone::single(r.nlp0_linearized)),
        ));
    }
    Ok(out)
}

fn same_value(a: &Expected, b: &Expected) -> Result<bool> {
    Ok(match (a, b) {
        (Expected::Cone(x), Expected::Cone(y)) => cones_equal(x, y)?,
        _ => a == b,
    })
}

/// Differences between stored and regenerated computed expectations, and the merged
/// list. Entries from other origins are left alone.
pub fn fixture_snapshot(fx: &Fixture) -> Result<(Vec<String>, Vec<Expectation>)> {
    let mut merged = fx.expectations.clone();
    let mut diffs = Vec::new();
    for fresh in derive_expectations(fx)? {
        match merged.iter_mut().find(|e| e.key == fresh.key) {
            Some(stored) if stored.origin != Origin::Computed => {}
            Some(stored) => {
                if !same_value(&stored.expected, &fresh.expected)? {
                    diffs.push(format!(
                        "{}: {}: stored {}, regenerated {}",
                        fx.name,
                        fresh.key.name(),
                        describe(&stored.expected),
                        describe(&fresh.expected)
                    ));
                    stored.expected = fresh.expected;
                }
            }
            None => {
                diffs.push(format!("{}: {}: missing, regenerated {}", fx.name, fresh.key.name(), describe(&fresh.expected)));
                merged.push(fresh);
            }
        }
    }
    Ok((diffs, merged))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    AffineMpcc,
    AffineMpvc,
    SsSmall,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Family {
    pub name: String,
    pub generator: GeneratorKind,
    pub first: u64,
    pub count: u64,
}

impl Family {
    pub fn seeds(&self) -> std::ops::Range<u64> {
        self.first..self.first + self.count
    }

    pub fn generate(&self) -> Result<Vec<Generated>> {
        let cfg = GenConfig::default();
        self.seeds()
            .map(|seed| {
                Ok(match self.generator {
                    GeneratorKind::AffineMpcc => gen_affine(ProblemKind::Mpcc, seed, &cfg)?,
                    GeneratorKind::AffineMpvc => gen_affine(ProblemKind::Mpvc, seed, &cfg)?,
                    GeneratorKind::SsSmall => gen_ss_small(seed)?,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedsFile {
    version: u32,
    #[serde(default)]
    family: Vec<Family>,
}

pub fn load_seeds(path: &Path) -> Result<Vec<Family>> {
    let text = read(path)?;
    let file: SeedsFile = toml::from_str(&text).map_err(|e| {
        let (line, column) = crate::format::line_col(&text, e.span().map_or(0, |s| s.start));
        CorpusError::Parse {
            path: path.to_path_buf(),
            source: ParseError {
                line,
                column,
                message: e.message().to_string(),
            },
        }
    })?;
    if file.version != FORMAT_VERSION {
        return Err(CorpusError::Invalid(format!("{}: unsupported version {}", path.display(), file.version)));
    }
    Ok(file.family)
}

/// A point of a generated family.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusPoint {
    pub family: String,
    pub seed: u64,
    pub index: usize,
    pub instance: Instance,
    pub point: CandidatePoint,
}

pub fn family_points(family: &Family) -> Result<Vec<CorpusPoint>> {
    let mut out = Vec::new();
    for g in family.generate()? {
        for (index, x) in g.points.iter().enumerate() {
            out.push(CorpusPoint {
                family: family.name.clone(),
                seed: g.seed,
                index,
                instance: g.instance.clone(),
                point: x.clone(),
            });
        }
    }
    Ok(out)
}

/// Frozen facts about one generated point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSummary {
    pub seed: u64,
    pub index: usize,
    pub digest: String,
    pub q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_min: Option<bool>,
    /// Tokens of the kinds among w, a, c, m, s, linb that hold.
    pub holds: Vec<String>,
}

/// Classifies `x` with the d-grid of step `1/4` and summarizes it.
pub fn summarize(cp: &CorpusPoint) -> Result<(PointSummary, LatticeReport, Option<bool>)> {
    let ctx = || format!("family {} seed {} point {}", cp.family, cp.seed, cp.index);
    let sets = core(ctx(), index_sets(&cp.instance, &cp.point))?;
    let (_, _, p) = cp.instance.sizes();
    let lattice = core(ctx(), classify_all(&cp.instance, &cp.point, &d_grid(&sets, p, 4)))?;
    let local_min = match brute_local_min(&cp.instance, &cp.point) {
        Ok(b) => Some(b),
        Err(mpstat_core::Error::UnsupportedData) => None,
        Err(e) => return core(ctx(), Err(e)),
    };
    let holds = [
        &lattice.weak,
        &lattice.a,
        &lattice.c,
        &lattice.m,
        &lattice.s,
        &lattice.linb,
    ]
    .iter()
    .filter(|v| v.holds)
    .map(|v| kind_token(&v.kind))
    .collect();
    let summary = PointSummary {
        seed: cp.seed,
        index: cp.index,
        digest: instance_digest(&cp.instance),
        q: sets.q(),
        local_min,
        holds,
    };
    Ok((summary, lattice, local_min))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub version: u32,
    pub family: String,
    pub point: Vec<PointSummary>,
}

pub fn load_snapshot(path: &Path) -> Result<Option<Snapshot>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = read(path)?;
    toml::from_str(&text)
        .map(Some)
        .map_err(|e| CorpusError::Invalid(format!("{}: {}", path.display(), e.message())))
}

pub fn diff_snapshots(stored: Option<&Snapshot>, fresh: &Snapshot) -> Vec<String> {
    let Some(stored) = stored else {
        return vec![format!("{}: no stored snapshot", fresh.family)];
    };
    let mut out = Vec::new();
    for f in &fresh.point {
        match stored.point.iter().find(|s| s.seed == f.seed && s.index == f.index) {
            None => out.push(format!("{}: seed {} point {}: missing", fresh.family, f.seed, f.index)),
            Some(s) if s != f => out.push(format!("{}: seed {} point {}: stored {:?}, regenerated {:?}", fresh.family, f.seed, f.index, s, f)),
            Some(_) => {}
        }
    }
    for s in &stored.point {
        if !fresh.point.iter().any(|f| f.seed == s.seed && f.index == s.index) {
            out.push(format!("{}: seed {} point {}: no longer generated", stored.family, s.seed, s.index));
        }
    }
    out
}

pub struct Corpus {
    pub root: PathBuf,
}

impl Corpus {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn fixtures_dir(&self) -> PathBuf {
        self.root.join("fixtures")
    }

    pub fn snapshot_path(&self, family: &str) -> PathBuf {
        self.root.join("snapshots").join(format!("{family}.toml"))
    }

    pub fn families(&self, seeds: Option<&Path>) -> Result<Vec<Family>> {
        match seeds {
            Some(p) => load_seeds(p),
            None => load_seeds(&self.root.join("seeds.toml")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub fixtures: usize,
    pub expectations: usize,
    pub points: usize,
    pub local_minimizers: usize,
    pub mismatches: Vec<String>,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks every fixture expectation, regenerates each family against its snapshot and
/// runs the lattice and oracle-coherence properties on all points.
pub fn run(corpus: &Corpus, seeds: Option<&Path>) -> Result<RunSummary> {
    let mut s = RunSummary::default();
    for fx in load_fixtures(&corpus.fixtures_dir())? {
        s.fixtures += 1;
        s.expectations += fx.expectations.len();
        s.mismatches.extend(check_fixture(&fx)?.iter().map(ToString::to_string));
        let cp = CorpusPoint {
            family: fx.name.clone(),
            seed: 0,
            index: 0,
            instance: fx.instance.clone(),
            point: fx.point.clone(),
        };
        check_point_properties(&cp, &mut s)?;
    }
    for family in corpus.families(seeds)? {
        let mut fresh = Snapshot {
            version: FORMAT_VERSION,
            family: family.name.clone(),
            point: Vec::new(),
        };
        for cp in family_points(&family)? {
            fresh.point.push(check_point_properties(&cp, &mut s)?);
        }
        let stored = load_snapshot(&corpus.snapshot_path(&family.name))?;
        s.mismatches.extend(diff_snapshots(stored.as_ref(), &fresh));
    }
    Ok(s)
}

fn check_point_properties(cp: &CorpusPoint, s: &mut RunSummary) -> Result<PointSummary> {
    let (summary, lattice, local_min) = summarize(cp)?;
    s.points += 1;
    let at = format!("{} seed {} point {}", cp.family, cp.seed, cp.index);
    for (name, ok) in &lattice.flags {
        if !ok {
            s.mismatches.push(format!("{at}: lattice property {name} violated"));
        }
    }
    if local_min == Some(true) {
        s.local_minimizers += 1;
        if !lattice.linb.holds {
            s.mismatches.push(format!("{at}: local minimizer is not linearized B-stationary"));
        }
    }
    Ok(summary)
}

/// Regenerates computed expectations and family snapshots. Returns the differences;
/// files are rewritten only with `write`.
pub fn snapshot(corpus: &Corpus, seeds: Option<&Path>, write_files: bool) -> Result<Vec<String>> {
    let mut diffs = Vec::new();
    for fx in load_fixtures(&corpus.fixtures_dir())? {
        let (d, merged) = fixture_snapshot(&fx)?;
        if write_files && !d.is_empty() {
            write(&fx.expect_path, &write_expectations(&merged))?;
        }
        diffs.extend(d);
    }
    for family in corpus.families(seeds)? {
        let mut fresh = Snapshot {
            version: FORMAT_VERSION,
            family: family.name.clone(),
            point: Vec::new(),
        };
        for cp in family_points(&family)? {
            fresh.point.push(summarize(&cp)?.0);
        }
        let path = corpus.snapshot_path(&family.name);
        let d = diff_snapshots(load_snapshot(&path)?.as_ref(), &fresh);
        if write_files && !d.is_empty() {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
                    path: dir.to_path_buf(),
                    source,
                })?;
            }
            write(&path, &toml::to_string(&fresh).expect("snapshots serialize"))?;
        }
        diffs.extend(d);
    }
    Ok(diffs)
}
