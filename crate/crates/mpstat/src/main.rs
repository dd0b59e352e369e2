use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mpstat::corpus::{self, Corpus, CorpusError};
use mpstat::format::{parse_curves, parse_instance, parse_kinds, parse_point, parse_tangent_fixture, ParseError};
use mpstat::report::{Certificate, CombineSection, CqSection, FlagReport, Report, VerdictReport};
use mpstat_core::combiner::{combine, CombineOptions, MirandaOptions};
use mpstat_core::cones::check_gcq;
use mpstat_core::instance::{check_feasible, index_sets};
use mpstat_core::stationarity::{check_with, classify_all_with, d_grid, CheckOptions, StationarityKind};
use mpstat_core::{CandidatePoint, Error, Instance};

#[derive(Parser)]
#[command(name = "mpstat", version, about = "Stationarity checks for MPCC and MPVC instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide stationarity kinds at a point.
    Classify(ClassifyArgs),
    /// Combine A(alpha) multipliers towards a P(alpha), P(d) or curve target.
    Combine(CombineArgs),
    /// Constraint qualifications and linearized cones at a point.
    CheckCq(CqArgs),
    /// Fixture corpus and seeded families.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Args)]
struct Target {
    /// Instance file.
    instance: PathBuf,
    /// Comma-separated coordinates; defaults to the point in the instance file.
    #[arg(long)]
    point: Option<String>,
    /// Biactive cap; overrides MPSTAT_BIACTIVE_CAP.
    #[arg(long)]
    biactive_cap: Option<usize>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    target: Target,
    /// Comma-separated kinds: w, a, c, m, s, linb, aalpha=BITS, palpha=BITS, pd=D1,D2,...
    #[arg(long, default_value = "w,a,c,m,s,linb")]
    kinds: String,
    /// Add A(alpha) and P(alpha) for every biactive pattern.
    #[arg(long)]
    all_alpha: bool,
    /// Add P(d) for d on the grid with step 1/K over the biactive indices.
    #[arg(long, value_name = "K")]
    d_grid: Option<u32>,
    /// Run the full classifier and report the lattice properties.
    #[arg(long)]
    lattice: bool,
}

#[derive(Args)]
struct CombineArgs {
    #[command(flatten)]
    input: Target,
    /// palpha=BITS, pd=D1,D2,... or curve=FILE with one curve per biactive index.
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Halvings allowed per coordinate in the Miranda search.
    #[arg(long, default_value_t = 60)]
    max_depth: usize,
}

#[derive(Args)]
struct CqArgs {
    #[command(flatten)]
    target: Target,
    /// Tangent cones for nonlinear data.
    #[arg(long)]
    tangent_fixture: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Check all fixtures, families and properties.
    Run(CorpusArgs),
    /// Regenerate computed expectations and family snapshots and show the differences.
    Snapshot {
        #[command(flatten)]
        args: CorpusArgs,
        /// Rewrite the files that differ.
        #[arg(long)]
        write: bool,
    },
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long, default_value = "corpus")]
    corpus: PathBuf,
    /// Seed families; defaults to seeds.toml in the corpus directory.
    #[arg(long)]
    seeds: Option<PathBuf>,
}

enum Failure {
    Core(Error),
    Parse(PathBuf, ParseError),
    Alpha { alpha: String, certificate: Certificate },
    NotConverged(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Parse { path, source } => Failure::Parse(path, source),
            CorpusError::Core { source, .. } => Failure::Core(*source),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(Error::InfeasiblePoint) => 2,
            Failure::Parse(..) => 3,
            Failure::Core(Error::BiactiveCapExceeded { .. }) => 4,
            Failure::Alpha { .. } | Failure::Core(Error::AlphaInfeasible { .. }) => 5,
            Failure::NotConverged(_) => 6,
            Failure::Core(Error::NonlinearWithoutFixture) => 7,
            _ => 1,
        }
    }

    fn print(&self) {
        match self {
            Failure::Core(e) => eprintln!("error: {e}"),
            Failure::Parse(path, e) => eprintln!("error: {}:{}:{}: {}", path.display(), e.line, e.column, e.message),
            Failure::Alpha { alpha, certificate } => {
                eprintln!("error: A(alpha) system infeasible for alpha = {alpha}");
                eprintln!("certificate: {}", serde_json::to_string(certificate).expect("certificates serialize"));
            }
            Failure::NotConverged(msg) => eprintln!("error: {msg}"),
            Failure::Other(msg) => eprintln!("error: {msg}"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

struct Loaded {
    instance: Instance,
    point: CandidatePoint,
    cap: Option<usize>,
}

fn load(t: &Target) -> Result<Loaded, Failure> {
    let text = read(&t.instance)?;
    let file = parse_instance(&text).map_err(|e| Failure::Parse(t.instance.clone(), e))?;
    let point = match (&t.point, file.point) {
        (Some(s), _) => parse_point(s, file.instance.dim()).map_err(|e| {
            Failure::Parse(
                PathBuf::from("--point"),
                ParseError {
                    line: 1,
                    column: e.offset + 1,
                    message: e.message,
                },
            )
        })?,
        (None, Some(p)) => p,
        (None, None) => return Err(Failure::Other("no point given and the instance file names none".into())),
    };
    if !check_feasible(&file.instance, &point)? {
        return Err(Failure::Core(Error::InfeasiblePoint));
    }
    let cap = match t.biactive_cap {
        Some(c) => Some(c),
        None => match std::env::var("MPSTAT_BIACTIVE_CAP") {
            Ok(v) => Some(v.trim().parse().map_err(|_| Failure::Other(format!("MPSTAT_BIACTIVE_CAP=`{v}` is not a number")))?),
            Err(_) => None,
        },
    };
    Ok(Loaded {
        instance: file.instance,
        point,
        cap,
    })
}

/// Maps an A(alpha) failure to its pattern bits.
fn alpha_failure(l: &Loaded, e: Error) -> Failure {
    if let Error::AlphaInfeasible { pattern, certificate } = &e {
        if let Ok(sets) = index_sets(&l.instance, &l.point) {
            let (_, _, p) = l.instance.sizes();
            if let Some(alpha) = sets.alpha_patterns(p).get(*pattern) {
                return Failure::Alpha {
                    alpha: alpha.to_string(),
                    certificate: Certificate::from_core(certificate),
                };
            }
        }
    }
    Failure::Core(e)
}

fn emit(mut report: Report, start: Instant) {
    report.timing_ms = start.elapsed().as_secs_f64() * 1e3;
    println!("{}", report.to_json());
}

fn classify(a: &ClassifyArgs) -> Outcome {
    let start = Instant::now();
    let l = load(&a.target)?;
    let mut opts = CheckOptions::default();
    if let Some(c) = l.cap {
        opts.biactive_cap = c;
    }
    let sets = index_sets(&l.instance, &l.point)?;
    let (_, _, p) = l.instance.sizes();
    let mut kinds = parse_kinds(&a.kinds, p).map_err(|msg| {
        Failure::Parse(
            PathBuf::from("--kinds"),
            ParseError {
                line: 1,
                column: 1,
                message: msg,
            },
        )
    })?;
    if sets.q() > opts.biactive_cap {
        return Err(Failure::Core(Error::BiactiveCapExceeded {
            q: sets.q(),
            cap: opts.biactive_cap,
        }));
    }
    if a.all_alpha {
        for alpha in sets.alpha_patterns(p) {
            kinds.push(StationarityKind::AAlpha(alpha.clone()));
            kinds.push(StationarityKind::PAlpha(alpha));
        }
    }
    let grid = a.d_grid.map(|k| d_grid(&sets, p, k.max(1))).unwrap_or_default();
    kinds.extend(grid.iter().cloned().map(StationarityKind::PD));

    let mut report = Report::new(&l.instance, &l.point, &sets);
    for k in &kinds {
        report.verdicts.push(VerdictReport::from_core(&check_with(&l.instance, &l.point, k, &opts)?));
    }
    if a.lattice {
        let lattice = classify_all_with(&l.instance, &l.point, &grid, &opts)?;
        report.lattice_flags = lattice
            .flags
            .iter()
            .map(|(name, ok)| FlagReport {
                name: name.clone(),
                ok: *ok,
            })
            .collect();
    }
    emit(report, start);
    Ok(())
}

fn combine_cmd(a: &CombineArgs) -> Outcome {
    let start = Instant::now();
    let l = load(&a.input)?;
    let sets = index_sets(&l.instance, &l.point)?;
    let (_, _, p) = l.instance.sizes();
    let target = match a.target.strip_prefix("curve=") {
        None => {
            let mut kinds = parse_kinds(&a.target, p).map_err(|msg| {
                Failure::Parse(
                    PathBuf::from("--target"),
                    ParseError {
                        line: 1,
                        column: 1,
                        message: msg,
                    },
                )
            })?;
            match (kinds.pop(), kinds.is_empty()) {
                (Some(k @ (StationarityKind::PAlpha(_) | StationarityKind::PD(_))), true) => k,
                _ => return Err(Failure::Other("--target takes one palpha=BITS, pd=D1,... or curve=FILE".into())),
            }
        }
        Some(file) => {
            let path = PathBuf::from(file);
            let specs = parse_curves(&read(&path)?, l.instance.kind()).map_err(|e| Failure::Parse(path, e))?;
            StationarityKind::Curve(specs)
        }
    };
    let mut opts = CombineOptions {
        miranda: MirandaOptions {
            tol: a.tol,
            max_depth: a.max_depth,
            ..MirandaOptions::default()
        },
        ..CombineOptions::default()
    };
    if let Some(c) = l.cap {
        opts.biactive_cap = c;
    }
    let result = combine(&l.instance, &l.point, &target, &opts).map_err(|e| alpha_failure(&l, e))?;
    let converged = result.converged;
    let residual = result.max_residual();
    let mut report = Report::new(&l.instance, &l.point, &sets);
    report.combine = Some(CombineSection::from_core(&result));
    emit(report, start);
    if converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "Miranda search did not reach tolerance {:e} (residual {residual:e})",
            a.tol
        )))
    }
}

fn check_cq(a: &CqArgs) -> Outcome {
    let start = Instant::now();
    let l = load(&a.target)?;
    let fixture = match &a.tangent_fixture {
        Some(path) => Some(parse_tangent_fixture(&read(path)?, l.instance.dim()).map_err(|e| Failure::Parse(path.clone(), e))?),
        None => None,
    };
    let cq = check_gcq(&l.instance, &l.point, fixture.as_ref())?;
    let sets = index_sets(&l.instance, &l.point)?;
    let mut report = Report::new(&l.instance, &l.point, &sets);
    report.cq = Some(CqSection::from_core(&cq));
    emit(report, start);
    Ok(())
}

fn corpus_cmd(c: &CorpusCommand) -> Outcome {
    match c {
        CorpusCommand::Run(args) => {
            let summary = corpus::run(&Corpus::new(&args.corpus), args.seeds.as_deref())?;
            for m in &summary.mismatches {
                println!("MISMATCH {m}");
            }
            println!(
                "{} fixtures, {} expectations, {} points, {} local minimizers, {} mismatches",
                summary.fixtures,
                summary.expectations,
                summary.points,
                summary.local_minimizers,
                summary.mismatches.len()
            );
            if summary.ok() {
                Ok(())
            } else {
                Err(Failure::Other("corpus run found mismatches".into()))
            }
        }
        CorpusCommand::Snapshot { args, write } => {
            let diffs = corpus::snapshot(&Corpus::new(&args.corpus), args.seeds.as_deref(), *write)?;
            for d in &diffs {
                println!("{d}");
            }
            let verb = if *write { "written" } else { "pending" };
            println!("{} differences {verb}", diffs.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Classify(a) => classify(a),
        Command::Combine(a) => combine_cmd(a),
        Command::CheckCq(a) => check_cq(a),
        Command::Corpus(c) => corpus_cmd(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.print();
            ExitCode::from(f.code())
        }
    }
}
