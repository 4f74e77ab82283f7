//! The `obstructa` command line.
//!
//! Exit codes: 0 completed (whatever the verdict), 1 I/O failure, 2
//! configuration or usage error, 3 simulation blow-up, 4 degree failure
//! (field vanishing on a curve, unresolved winding).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, LoadedSystem, SystemConfig};
use crate::degree::{coron_h1_test, winding_details, ClosedCurve, DegreeError, PlanarField};
use crate::dynamics::{integrate, DynamicsError, VectorField};
use crate::expr::{parse_expr, ScalarExpr};
use crate::lagrange::{simulate_constrained, transversality_test, ConstrainedState, ControlSchedule, LagrangeError};
use crate::obstruction::{
    adversary_intersection_test, affine_span_test, brockett_image_test, safety_test, stabilizability_verdict,
    Finding, SystemError, Verdict,
};
use crate::portrait::{portrait, PortraitError, PortraitOptions};
use crate::space::{ModelSpace, Point, Region, SpaceError};
use crate::topology::{classify_surface_euler, region_euler_char, CellComplex, SurfaceDescriptor, TopologyError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("simulation blew up: {0}")]
    BlowUp(String),
    #[error("degree computation failed: {0}")]
    Degree(DegreeError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::BlowUp(_) => 3,
            CliError::Degree(_) => 4,
        }
    }
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<DegreeError> for CliError {
    fn from(e: DegreeError) -> Self {
        match e {
            DegreeError::FieldVanishes { .. } | DegreeError::NonConvergent { .. } | DegreeError::Eval(_) => {
                CliError::Degree(e)
            }
            other => usage(other),
        }
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Dynamics(d) => d.into(),
            other => usage(other),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::BlowUp { .. } => CliError::BlowUp(e.to_string()),
            other => usage(other),
        }
    }
}

impl From<LagrangeError> for CliError {
    fn from(e: LagrangeError) -> Self {
        match e {
            LagrangeError::Dynamics(d) => d.into(),
            LagrangeError::SingularKkt { .. } | LagrangeError::Eval(_) => CliError::BlowUp(e.to_string()),
            other => usage(other),
        }
    }
}

impl From<SpaceError> for CliError {
    fn from(e: SpaceError) -> Self {
        usage(e)
    }
}

impl From<TopologyError> for CliError {
    fn from(e: TopologyError) -> Self {
        usage(e)
    }
}

impl From<PortraitError> for CliError {
    fn from(e: PortraitError) -> Self {
        usage(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "obstructa", version, about = "Topological obstructions to stabilization and safety")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for sampled searches and portrait jitter.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Machine-readable output for `euler` and `index`.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the obstruction tests configured for a system.
    Analyze(AnalyzeArgs),
    /// Integrate a system and emit a CSV trajectory.
    Simulate(SimulateArgs),
    /// Draw an SVG phase portrait of a planar field.
    Portrait(PortraitArgs),
    /// Euler characteristic of a complex, surface or region.
    Euler(EulerArgs),
    /// Index of a zero of a planar field.
    Index(IndexArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct AnalyzeArgs {
    /// Builtin name or path to a JSON config.
    pub system: String,
    /// Named target set (its Euler characteristic comes from the config).
    #[arg(long)]
    pub target: Option<String>,
    /// Ask whether this region can be rendered safe instead.
    #[arg(long = "safe-set")]
    pub safe_set: Option<String>,
    /// Also run the image (Brockett) test.
    #[arg(long)]
    pub brockett: bool,
    /// Adversary family to use instead of the configured default.
    #[arg(long)]
    pub adversary: Option<String>,
    /// Comma-separated, decreasing epsilons overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    pub system: String,
    /// Initial configuration / state, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub state: Vec<f64>,
    /// Initial velocity (Lagrangian systems); defaults to rest.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub velocity: Option<Vec<f64>>,
    /// Constant controls, comma-separated; defaults to zero.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub control: Option<Vec<f64>>,
    /// Final time.
    #[arg(short = 'T', long = "time", default_value_t = 1.0)]
    pub t: f64,
    /// Maximum step size.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    /// Project velocities back onto the constraint distribution after each step.
    #[arg(long)]
    pub project: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PortraitArgs {
    pub system: String,
    /// xmin,xmax,ymin,ymax
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,1,-1,1")]
    pub window: Vec<f64>,
    /// Seeds per axis.
    #[arg(long, default_value_t = 10)]
    pub density: usize,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false, id = "input")]
pub struct EulerInput {
    /// JSON cell complex file.
    #[arg(long)]
    pub complex: Option<PathBuf>,
    /// `orientable|nonorientable g=G b=B`.
    #[arg(long, num_args = 1..=3)]
    pub surface: Option<Vec<String>>,
    /// Standard planar region: annulus, disk or box.
    #[arg(long)]
    pub region: Option<String>,
    /// `SYSTEM:REGION` from a config or builtin.
    #[arg(long = "system-region")]
    pub system_region: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EulerArgs {
    #[command(flatten)]
    pub input: EulerInput,
    /// Obstacles punched into `--region`.
    #[arg(long, default_value_t = 0)]
    pub obstacles: usize,
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    /// Builtin name or config path of a planar system (controls frozen at 0).
    pub system: Option<String>,
    /// Field components in x, y instead of a system.
    #[arg(long, num_args = 2, allow_hyphen_values = true, conflicts_with = "system")]
    pub field: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0")]
    pub center: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}

/// Parse arguments, run, print errors; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(text) => match emit(cli.out.as_deref(), &text) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run a parsed command and return what it would print.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Analyze(a) => {
            let sys = SystemConfig::resolve(&a.system)?.load()?;
            let out = analyze(&sys, a, cli.seed)?;
            Ok(serde_json::to_string_pretty(&out).expect("serializable") + "\n")
        }
        Command::Simulate(a) => simulate(a),
        Command::Portrait(a) => {
            let sys = SystemConfig::resolve(&a.system)?.load()?;
            let window: [f64; 4] = a
                .window
                .as_slice()
                .try_into()
                .map_err(|_| usage("--window needs four numbers"))?;
            let f = planar_field(&sys)?;
            let p = portrait(
                &f,
                &PortraitOptions {
                    window,
                    density: a.density,
                    seed: cli.seed.unwrap_or(0),
                    ..Default::default()
                },
            )?;
            Ok(p.to_svg())
        }
        Command::Euler(a) => euler(a, cli.json),
        Command::Index(a) => index(a, cli.json),
    }
}

/// Write to `path` via a temporary file in the same directory, or stdout.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        print!("{text}");
        return Ok(());
    };
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Everything `analyze` prints.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutput {
    pub system: String,
    pub question: String,
    pub verdict: Verdict,
    pub evidence: BTreeMap<String, f64>,
    pub assumptions: Vec<String>,
    pub tests: BTreeMap<String, serde_json::Value>,
}

pub fn analyze(sys: &LoadedSystem, a: &AnalyzeArgs, seed: Option<u64>) -> Result<AnalysisOutput, CliError> {
    let cfg = &sys.config.analysis;
    let opts = sys.search_options(seed);
    let eps = a.eps.clone().unwrap_or_else(|| cfg.eps_list.clone());
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(usage("--eps values must be positive"));
    }
    let adversary_name = a.adversary.clone().or_else(|| cfg.default_adversary.clone());
    let mut tests = BTreeMap::new();
    let json = |v: &dyn erased::Json| v.value();

    if let Some(s) = &a.safe_set {
        let region = sys.region(s)?;
        let control = sys
            .control
            .as_ref()
            .ok_or_else(|| usage("the safety test needs first-order dynamics"))?;
        let name = adversary_name.ok_or_else(|| usage("the safety test needs an adversary family"))?;
        let rep = safety_test(control, region, sys.adversary(&name)?, &eps, &opts)?;
        tests.insert("safety".to_owned(), json(&rep));
        return Ok(AnalysisOutput {
            system: sys.name().to_owned(),
            question: format!("can `{s}` be rendered safe?"),
            verdict: rep.verdict,
            evidence: rep.evidence,
            assumptions: rep.assumptions,
            tests,
        });
    }

    let target = a
        .target
        .clone()
        .or_else(|| cfg.default_target.clone())
        .ok_or_else(|| usage("no --target given and no default target configured"))?;
    let chi = *cfg
        .targets
        .get(&target)
        .ok_or_else(|| usage(format!("unknown target `{target}` (configured: {:?})", cfg.targets.keys())))?;
    let search = cfg.search_region.as_deref().map(|r| sys.region(r)).transpose()?;
    let seed = opts.seed;
    let mut findings = Vec::new();
    let mut extra = BTreeMap::new();

    if let Some(control) = &sys.control {
        if let (Some(name), Some(w)) = (&adversary_name, search) {
            if !eps.is_empty() {
                let rep = adversary_intersection_test(control, sys.adversary(name)?, w, &eps, Some(chi), &opts)?;
                findings.push(Finding::from_adversary_report(&rep));
                tests.insert(format!("adversary:{name}"), json(&rep));
            }
        }
        if let (Some(span), Some(y), Some(w)) = (&cfg.affine_span, &sys.span_field, search) {
            if control.affine_parts().is_some() {
                let pts = w.sample_interior(span.samples, seed);
                let r = affine_span_test(control, y, &pts, span.rank_tol)?;
                findings.push(Finding::AffineSpan(r.holds));
                tests.insert(
                    "affine_span".to_owned(),
                    serde_json::json!({ "holds": r.holds, "samples": r.samples, "failures": r.failures.len() }),
                );
            }
        }
        if let Some(radius) = cfg.coron_radius {
            if control.space().dim() == 2 && control.space().real_indices().len() == 2 {
                let rep = coron_h1_test(control, f64::INFINITY, radius)?;
                findings.push(Finding::CoronDegree(rep.verdict == Verdict::ObstructionFound));
                tests.insert("coron".to_owned(), json(&rep));
            }
        }
        if a.brockett {
            let w = search.ok_or_else(|| usage("--brockett needs a search region"))?;
            let (c, n) = cfg.brockett.as_ref().map_or((0.1, 5), |b| (b.c_radius, b.grid_n));
            let r = brockett_image_test(control, w, c, n, &opts)?;
            let misses: Vec<_> = r
                .misses()
                .map(|m| serde_json::json!({ "target": m.target, "best_residual": m.best_residual }))
                .collect();
            let worst = r.targets.iter().map(|t| t.best_residual).fold(0.0, f64::max);
            tests.insert(
                "brockett".to_owned(),
                serde_json::json!({
                    "covered": r.covered,
                    "targets": r.targets.len(),
                    "worst_residual": worst,
                    "misses": misses,
                }),
            );
            extra.insert("brockett_covered".to_owned(), f64::from(u8::from(r.covered)));
        }
    } else if a.brockett || a.adversary.is_some() {
        return Err(usage("image and adversary tests need first-order dynamics"));
    }

    if let (Some(lag), Some(tr), Some(y), Some(w)) =
        (&sys.lagrangian, &cfg.transversality, &sys.transversality_field, search)
    {
        let pts = w.sample_interior(tr.samples, seed);
        let holds = transversality_test(lag, y, &pts)?;
        findings.push(Finding::Transversality(holds));
        tests.insert(
            "transversality".to_owned(),
            serde_json::json!({ "holds": holds, "samples": pts.len() }),
        );
    }

    let mut verdict = stabilizability_verdict(Some(chi), &findings);
    verdict.evidence.extend(extra);
    Ok(AnalysisOutput {
        system: sys.name().to_owned(),
        question: format!("can `{target}` (chi = {chi}) be stabilized?"),
        verdict: verdict.verdict,
        evidence: verdict.evidence,
        assumptions: verdict.assumptions,
        tests,
    })
}

mod erased {
    pub trait Json {
        fn value(&self) -> serde_json::Value;
    }

    impl<T: serde::Serialize> Json for T {
        fn value(&self) -> serde_json::Value {
            serde_json::to_value(self).expect("serializable")
        }
    }
}

/// The system's dynamics with every control frozen at zero, as a planar field.
pub fn planar_field(sys: &LoadedSystem) -> Result<PlanarField, CliError> {
    let control = sys
        .control
        .as_ref()
        .ok_or_else(|| usage(format!("`{}` has no first-order dynamics", sys.name())))?;
    let s = control.space();
    if s.dim() != 2 || s.real_indices().len() != 2 {
        return Err(usage(format!("`{}` is not a planar field", sys.name())));
    }
    let f = control.zero_control_field()?;
    let names = s.names();
    Ok(PlanarField::with_vars(
        f.components()[0].clone(),
        f.components()[1].clone(),
        [names[0], names[1]],
    )?)
}

pub fn simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let sys = SystemConfig::resolve(&a.system)?.load()?;
    if let Some(lag) = &sys.lagrangian {
        let q = Point::new(lag.space(), a.state.clone())?;
        let v = a.velocity.clone().unwrap_or_else(|| vec![0.0; lag.dim()]);
        let s0 = ConstrainedState::new(lag, q, v)?;
        let u = a.control.clone().unwrap_or_else(|| vec![0.0; lag.control_count()]);
        let run = simulate_constrained(lag, &s0, &ControlSchedule::constant(u), a.t, a.h, a.project)?;
        eprintln!(
            "max constraint residual = {:e}, max energy-balance error = {:e}{}",
            run.max_constraint_residual,
            run.max_energy_error,
            if run.projected { " (velocity projection on)" } else { "" }
        );
        return Ok(run.trajectory.to_csv());
    }
    let control = sys.control.as_ref().expect("load requires dynamics or a Lagrangian");
    let u = a.control.clone().unwrap_or_else(|| vec![0.0; control.control_dim()]);
    if u.len() != control.control_dim() {
        return Err(usage(format!("expected {} controls, got {}", control.control_dim(), u.len())));
    }
    let comps: Vec<ScalarExpr> = control
        .dynamics()
        .iter()
        .map(|e| {
            control
                .controls()
                .iter()
                .zip(&u)
                .fold(e.clone(), |acc, (name, val)| acc.substitute(name, &ScalarExpr::constant(*val)))
        })
        .collect();
    let f = VectorField::new(control.space(), comps)?;
    let x0 = Point::new(control.space(), a.state.clone())?;
    Ok(integrate(&f, &x0, a.t, a.h)?.to_csv())
}

/// Annulus `1 ≤ r ≤ 4`, disk `r ≤ 4` or box `[-4, 4]²`, with `n` equal
/// obstacles spaced evenly on the circle of radius 2.5.
pub fn standard_region(kind: &str, n: usize) -> Result<Region, CliError> {
    let plane = ModelSpace::plane();
    let mut r = match kind {
        "annulus" => Region::annulus(&plane, [0.0, 0.0], 1.0, 4.0)?,
        "disk" => Region::ball(&plane, vec![0.0, 0.0], 4.0)?,
        "box" => Region::real_box(&plane, &[(-4.0, 4.0), (-4.0, 4.0)])?,
        other => return Err(usage(format!("unknown region kind `{other}` (annulus, disk, box)"))),
    };
    let radius = if n <= 1 {
        0.5
    } else {
        (0.4 * 2.5 * (std::f64::consts::PI / n as f64).sin()).min(0.5)
    };
    for k in 0..n {
        let a = std::f64::consts::TAU * k as f64 / n as f64;
        r = r.with_obstacle(vec![2.5 * a.cos(), 2.5 * a.sin()], radius)?;
    }
    Ok(r)
}

fn parse_surface(tokens: &[String]) -> Result<SurfaceDescriptor, CliError> {
    let mut s = SurfaceDescriptor {
        orientable: true,
        genus: 0,
        boundary_components: 0,
    };
    for t in tokens {
        match t.split_once('=') {
            None if t == "orientable" => s.orientable = true,
            None if t == "nonorientable" => s.orientable = false,
            Some(("g", v)) => s.genus = v.parse().map_err(|_| usage(format!("bad genus `{v}`")))?,
            Some(("b", v)) => s.boundary_components = v.parse().map_err(|_| usage(format!("bad boundary count `{v}`")))?,
            _ => return Err(usage(format!("unrecognized surface token `{t}`"))),
        }
    }
    Ok(s)
}

pub fn euler(a: &EulerArgs, json: bool) -> Result<String, CliError> {
    let i = &a.input;
    if let Some(path) = &i.complex {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let c = CellComplex::from_json(&text)?;
        let chi = c.euler_char_cells();
        let betti = c.betti_numbers();
        let homology = c.euler_char_homology();
        if chi != homology {
            return Err(usage(format!("cell count gives {chi} but Betti numbers give {homology}")));
        }
        return Ok(if json {
            serde_json::json!({ "chi": chi, "betti": betti, "betti_chi": homology }).to_string() + "\n"
        } else {
            format!("{chi}\nbetti = {betti:?}, alternating sum = {homology}\n")
        });
    }
    let chi = if let Some(tokens) = &i.surface {
        classify_surface_euler(parse_surface(tokens)?)?
    } else if let Some(kind) = &i.region {
        region_euler_char(&standard_region(kind, a.obstacles)?)?
    } else {
        let pair = i.system_region.as_deref().expect("clap requires one input");
        let (system, region) = pair
            .rsplit_once(':')
            .ok_or_else(|| usage("--system-region expects SYSTEM:REGION"))?;
        let sys = SystemConfig::resolve(system)?.load()?;
        region_euler_char(sys.region(region)?)?
    };
    Ok(if json {
        serde_json::json!({ "chi": chi }).to_string() + "\n"
    } else {
        format!("{chi}\n")
    })
}

pub fn index(a: &IndexArgs, json: bool) -> Result<String, CliError> {
    let f = match (&a.system, &a.field) {
        (_, Some(pq)) => PlanarField::new(parse_expr(&pq[0]).map_err(usage)?, parse_expr(&pq[1]).map_err(usage)?)?,
        (Some(s), None) => planar_field(&SystemConfig::resolve(s)?.load()?)?,
        (None, None) => return Err(usage("give a system or --field P Q")),
    };
    let center: [f64; 2] = a
        .center
        .as_slice()
        .try_into()
        .map_err(|_| usage("--center needs two numbers"))?;
    let w = winding_details(&f, &ClosedCurve::circle(center, a.radius)?)?;
    Ok(if json {
        serde_json::json!({ "index": w.degree, "samples": w.samples, "min_field_norm": w.min_norm }).to_string() + "\n"
    } else {
        format!("{}\n", w.degree)
    })
}
