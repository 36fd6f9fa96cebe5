//! Command-line front end: build/validate graphs, run simulations, execute
//! the verification suites, produce growth certificates and render plots.
//!
//! Every command is deterministic given its configuration and seed; outputs
//! embed the seed and a hash of the resolved configuration. Exit codes:
//! 0 success (including non-error verdicts), 1 property violation,
//! 2 input error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus;
use crate::certify::{self, BoundedChainParams, VanishingChainParams, VanishingRoute};
use crate::density::{DensityField, DensityProfile};
use crate::error::{Error, Result};
use crate::graph::{families, WeightedGraph};
use crate::io::{self, GraphDoc, MetricDoc, TrajectoryMeta};
use crate::metric::{intrinsic_bound, MetricKind, PseudoMetric};
use crate::solver::{cfl_limit, solve, Scheme, SolveOptions, Source, Trajectory};
use crate::weights::{
    admissibility_margin, cutoff_margins, cutoff_values, decay_exponent_f, decay_exponent_g,
    exp_weight_bracket_margin, exp_weight_heat_margin, poly_weight_bracket_margin,
    poly_weight_gradient_margin, poly_weight_heat_margin, CutoffParams, DecayParams, ExpWeight,
    MarginReport, PolyWeight, ProfileConstants, RadialWeight,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "heatgraph",
    about = "Weighted-graph heat flow: simulation, inequality verification and uniqueness-class certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build, validate or measure graphs.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Time-step the density-weighted heat equation and write a trajectory.
    Simulate(SimulateArgs),
    /// Run the inequality verification suites and write a margin report.
    Verify(VerifyArgs),
    /// Measure ball energies, fit growth and emit a class certificate.
    Certify(CertifyArgs),
    /// Render an SVG line chart from a CSV written by another command.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
pub enum GraphAction {
    Build(GraphBuildArgs),
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    Metric(GraphMetricArgs),
}

#[derive(Args, Debug)]
pub struct GraphBuildArgs {
    /// z-segment | lattice-box | star | pair
    #[arg(long)]
    pub family: String,
    #[arg(long, default_value_t = 10)]
    pub half_width: i64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub leaves: usize,
    /// combinatorial | canonical-intrinsic
    #[arg(long, default_value = "combinatorial")]
    pub metric: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GraphMetricArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Overrides the metric kind declared in the file.
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value = "z-segment")]
    pub family: String,
    #[arg(long, default_value_t = 60)]
    pub half_width: i64,
    /// const:<rho0> | vanishing:<rho0>,<sigma>,<k> | file (use rho from the graph file)
    #[arg(long, default_value = "const:1")]
    pub density: String,
    /// delta:<vertex> | const:<value> | random:<radius> | fn:<name>
    #[arg(long, default_value = "delta:0")]
    pub u0: String,
    #[arg(long, default_value = "implicit")]
    pub scheme: String,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value = "combinatorial")]
    pub metric: String,
    #[arg(long, default_value = "0")]
    pub x0: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// calculus | cutoff | weights | pairings | all
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 200)]
    pub half_width: i64,
    #[arg(long, default_value = "canonical-intrinsic")]
    pub metric: String,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 1.0, 5.0])]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0])]
    pub sigmas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub random_graphs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Force-evaluate one margin with out-of-range parameters (reported, never gating).
    #[arg(long)]
    pub exploratory: bool,
    /// Margin name for exploratory mode (e.g. exp-weight-bracket).
    #[arg(long)]
    pub lemma: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value = "z-segment")]
    pub family: String,
    #[arg(long, default_value_t = 150)]
    pub half_width: i64,
    /// Existing trajectory CSV; omit to simulate inline.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    /// Constructed energy file (R,E per line) certifies data without a trajectory.
    #[arg(long)]
    pub energies: Option<PathBuf>,
    #[arg(long, default_value = "const:1")]
    pub density: String,
    #[arg(long, default_value = "delta:0")]
    pub u0: String,
    #[arg(long, default_value = "implicit")]
    pub scheme: String,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value = "canonical-intrinsic")]
    pub metric: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value = "0")]
    pub x0: String,
    #[arg(long, value_delimiter = ',', default_values_t = vec![20.0, 40.0, 80.0])]
    pub radii: Vec<f64>,
    /// Jump size declared for constructed-energy certification.
    #[arg(long, default_value_t = 1.0)]
    pub jump_size: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
    /// Also evaluate the radial decay chains on the trajectory.
    #[arg(long)]
    pub chains: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "R")]
    pub x_col: String,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["E".to_string(), "bound".to_string()])]
    pub y_cols: Vec<String>,
    #[arg(long)]
    pub log_y: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Entry point used by the binary; maps errors to exit codes.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Graph { action } => match action {
            GraphAction::Build(args) => cmd_graph_build(&args),
            GraphAction::Validate { input } => cmd_graph_validate(&input),
            GraphAction::Metric(args) => cmd_graph_metric(&args),
        },
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Certify(args) => cmd_certify(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

fn build_family(family: &str, half_width: i64, dim: usize, leaves: usize) -> Result<WeightedGraph> {
    match family {
        "z-segment" => Ok(families::z_segment(half_width)),
        "lattice-box" => Ok(families::lattice_box(dim, half_width)),
        "star" => Ok(families::star(leaves)),
        "pair" => Ok(families::pair()),
        other => Err(Error::Parse(format!("unknown graph family `{other}`"))),
    }
}

fn build_metric(g: &WeightedGraph, kind: &str) -> Result<PseudoMetric> {
    match MetricKind::parse(kind)? {
        MetricKind::Combinatorial => Ok(PseudoMetric::combinatorial(g)),
        MetricKind::CanonicalIntrinsic => Ok(PseudoMetric::canonical_intrinsic(g)),
        MetricKind::Explicit => Err(Error::Parse(
            "explicit metrics come from graph files, not flags".into(),
        )),
    }
}

fn parse_density(
    g: &WeightedGraph,
    d: &PseudoMetric,
    x0: usize,
    spec: &str,
    file_rho: Option<DensityField>,
) -> Result<DensityField> {
    if spec == "file" {
        return file_rho.ok_or_else(|| Error::Parse("graph file carries no rho".into()));
    }
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "const" => {
            let v: f64 = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad density `{spec}`")))?;
            DensityField::constant(g, v)
        }
        "vanishing" => {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(
                    "vanishing density needs rho0,sigma,k".into(),
                ));
            }
            let rho0: f64 = parts[0]
                .parse()
                .map_err(|_| Error::Parse("bad rho0".into()))?;
            let sigma: f64 = parts[1]
                .parse()
                .map_err(|_| Error::Parse("bad sigma".into()))?;
            let k: f64 = parts[2].parse().map_err(|_| Error::Parse("bad k".into()))?;
            DensityField::vanishing(g, d, x0, rho0, sigma, k)
        }
        other => Err(Error::Parse(format!("unknown density kind `{other}`"))),
    }
}

fn parse_u0(
    g: &WeightedGraph,
    d: &PseudoMetric,
    x0: usize,
    spec: &str,
    seed: u64,
    doc: Option<&GraphDoc>,
) -> Result<Vec<f64>> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "delta" => {
            let v = g.require_vertex(rest)?;
            let mut u = vec![0.0; g.n()];
            u[v] = 1.0;
            Ok(u)
        }
        "const" => {
            let value: f64 = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad u0 `{spec}`")))?;
            Ok(vec![value; g.n()])
        }
        "random" => {
            let r: f64 = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad u0 `{spec}`")))?;
            let row = d.distances_from(x0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..g.n())
                .map(|x| {
                    if row[x] < r && g.is_interior(x) {
                        rng.gen_range(-1.0..1.0)
                    } else {
                        0.0
                    }
                })
                .collect())
        }
        "fn" => {
            let doc =
                doc.ok_or_else(|| Error::Parse("fn: initial data needs a graph file".into()))?;
            io::load_vertex_function(doc, g, rest)
        }
        other => Err(Error::Parse(format!("unknown u0 kind `{other}`"))),
    }
}

fn cmd_graph_build(args: &GraphBuildArgs) -> Result<i32> {
    let g = build_family(&args.family, args.half_width, args.dim, args.leaves)?;
    let metric = MetricDoc {
        kind: args.metric.clone(),
        pairs: None,
    };
    let doc = io::doc_from_graph(&g, None, Some(&metric));
    io::save_graph(&args.out, &doc)?;
    println!(
        "wrote {} ({} vertices, {} edges)",
        args.out.display(),
        g.n(),
        g.edge_count()
    );
    Ok(EXIT_OK)
}

fn cmd_graph_validate(input: &Path) -> Result<i32> {
    let (g, _, metric_doc) = io::load_graph(input)?;
    let report = g.validate();
    for check in &report.checks {
        match &check.witness {
            Some(w) => println!("{:<18} FAIL  {w}", check.axiom),
            None => println!("{:<18} ok", check.axiom),
        }
    }
    if let Some(doc) = metric_doc {
        let m = io::metric_from_doc(&g, Some(&doc))?;
        m.validate(&g, 0)?;
        println!("pseudo-metric axioms ok ({})", doc.kind);
    }
    if report.all_passed() {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_VIOLATION)
    }
}

fn cmd_graph_metric(args: &GraphMetricArgs) -> Result<i32> {
    let (g, _, metric_doc) = io::load_graph(&args.input)?;
    let m = match &args.kind {
        Some(kind) => build_metric(&g, kind)?,
        None => io::metric_from_doc(&g, metric_doc.as_ref())?,
    };
    m.validate(&g, 0)?;
    let q1 = intrinsic_bound(&g, &m, 1.0)?;
    let q2 = intrinsic_bound(&g, &m, 2.0)?;
    println!("kind         {}", m.kind().as_str());
    println!("jump size    {:.12}", m.jump_size());
    println!("q=1 bound    {q1:.12}");
    println!("q=2 bound    {q2:.12}  ({})", if q2 <= 1.0 + 1e-12 { "intrinsic" } else { "not intrinsic" });
    Ok(EXIT_OK)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let (g, file_rho, doc) = match &args.graph {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let doc: GraphDoc = serde_json::from_str(&text)?;
            let (g, rho) = io::graph_from_doc(&doc)?;
            (g, rho, Some(doc))
        }
        None => (
            build_family(&args.family, args.half_width, 2, 3)?,
            None,
            None,
        ),
    };
    let d = build_metric(&g, &args.metric)?;
    let x0 = g.require_vertex(&args.x0)?;
    let rho = parse_density(&g, &d, x0, &args.density, file_rho)?;
    let u0 = parse_u0(&g, &d, x0, &args.u0, args.seed, doc.as_ref())?;
    let scheme = Scheme::parse(&args.scheme)?;
    let mut opts = SolveOptions::new(scheme, args.dt, args.t_end);
    opts.stride = args.stride;
    if scheme == Scheme::ExplicitEuler {
        let limit = cfl_limit(&g, &rho);
        if args.dt > limit {
            eprintln!(
                "error: dt = {} violates the explicit stability limit {limit}; try --dt {}",
                args.dt,
                limit * 0.9
            );
            return Ok(EXIT_INPUT);
        }
    }
    let traj = solve(&g, &rho, &u0, Source::Zero, &opts)?;

    std::fs::create_dir_all(&args.out)?;
    let csv = io::trajectory_csv(&g, &traj);
    std::fs::write(args.out.join("trajectory.csv"), &csv)?;
    let canonical = format!(
        "simulate|graph={:?}|family={}|hw={}|density={}|u0={}|scheme={}|dt={}|t_end={}|stride={}|metric={}|x0={}|seed={}",
        args.graph, args.family, args.half_width, args.density, args.u0, args.scheme,
        args.dt, args.t_end, args.stride, args.metric, args.x0, args.seed
    );
    let meta = TrajectoryMeta {
        scheme: scheme.as_str().to_string(),
        dt: args.dt,
        t_end: args.t_end,
        graph: args
            .graph
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| format!("{}:{}", args.family, args.half_width)),
        density: args.density.clone(),
        seed: args.seed,
        config_hash: io::config_hash(&canonical),
    };
    std::fs::write(
        args.out.join("trajectory.meta.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    println!(
        "wrote {} samples x {} vertices to {}",
        traj.times.len(),
        g.n(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

struct SuiteRows {
    rows: Vec<(String, MarginReport)>,
    failures: Vec<String>,
}

impl SuiteRows {
    fn new() -> Self {
        SuiteRows {
            rows: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn push(&mut self, params: String, m: MarginReport, tol: f64) {
        if !m.exploratory && !m.passed(tol) {
            self.failures
                .push(format!("{} [{params}] margin {:.3e}", m.name, m.value));
        }
        self.rows.push((params, m));
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mut suite = SuiteRows::new();
    let tol = args.tol;

    if args.exploratory {
        let name = args
            .lemma
            .clone()
            .ok_or_else(|| Error::Parse("exploratory mode needs --lemma".into()))?;
        let g = families::z_segment(args.half_width);
        let d = build_metric(&g, &args.metric)?;
        let x0 = g.require_vertex("0")?;
        let rho = DensityField::constant(&g, 1.0)?;
        let alpha = args.alpha.unwrap_or(1.0);
        let gamma = args.gamma.unwrap_or(0.0);
        let radius = pick_radius(&g, &d, x0);
        let m = match name.as_str() {
            "exp-weight-bracket" => {
                let w = ExpWeight::new(alpha, gamma, 0.2, radius)?;
                exp_weight_bracket_margin(&g, &d, &rho, &w, x0, true)?
            }
            "exp-weight-heat" => {
                let w = ExpWeight::new(alpha, gamma, 0.2, radius)?;
                exp_weight_heat_margin(&g, &d, &rho, &w, x0, true)?
            }
            "poly-weight-bracket" => {
                let w = PolyWeight::new(alpha, gamma, d.jump_size() + 1.0, d.jump_size())?;
                poly_weight_bracket_margin(&g, &d, &rho, &w, x0, 1.0, true)?
            }
            "poly-weight-heat" => {
                let w = PolyWeight::new(alpha, gamma, d.jump_size() + 1.0, d.jump_size())?;
                poly_weight_heat_margin(&g, &d, &rho, &w, x0, 1.0, true)?
            }
            other => {
                return Err(Error::Parse(format!(
                    "no exploratory mode for margin `{other}`"
                )))
            }
        };
        println!(
            "exploratory {name}: margin {:.6e} (scale {:.3e}) at {:?}",
            m.value, m.scale, m.witness
        );
        suite.rows.push((format!("alpha={alpha},gamma={gamma},exploratory"), m));
        if let Some(out) = &args.out {
            std::fs::write(out, io::margin_csv(&suite.rows))?;
        }
        return Ok(EXIT_OK);
    }

    let run_all = args.suite == "all";
    let mut ran_any = false;
    if run_all || args.suite == "calculus" {
        verify_calculus(&mut suite, args.seed, tol)?;
        ran_any = true;
    }
    if run_all || args.suite == "cutoff" {
        verify_cutoff(&mut suite, args, tol)?;
        ran_any = true;
    }
    if run_all || args.suite == "weights" {
        verify_weights(&mut suite, args, tol)?;
        ran_any = true;
    }
    if run_all || args.suite == "pairings" {
        verify_pairings(&mut suite, args)?;
        ran_any = true;
    }
    if !ran_any {
        eprintln!("warning: empty suite `{}`", args.suite);
        return Ok(EXIT_OK);
    }

    for (params, m) in &suite.rows {
        println!(
            "{:<24} {:<46} margin {:>12.4e}  {}",
            m.name,
            params,
            m.value,
            if m.passed(tol) { "ok" } else { "VIOLATED" }
        );
    }
    if let Some(out) = &args.out {
        std::fs::write(out, io::margin_csv(&suite.rows))?;
        println!("wrote {}", out.display());
    }
    if suite.failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("violated: {}", suite.failures[0]);
        Ok(EXIT_VIOLATION)
    }
}

fn pick_radius(_g: &WeightedGraph, d: &PseudoMetric, x0: usize) -> f64 {
    let row = d.distances_from(x0);
    let diam = row.iter().cloned().fold(0.0, f64::max);
    let s = d.jump_size();
    (0.6 * diam).max(2.0 * s / 0.6 * 1.2).max(1e-6)
}

fn verify_calculus(suite: &mut SuiteRows, seed: u64, tol: f64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_ibp: f64 = 0.0;
    let mut worst_product: f64 = 0.0;
    let mut worst_lap: f64 = 0.0;
    let mut worst_convex = f64::INFINITY;
    for _ in 0..30 {
        let n = rng.gen_range(2..60);
        let g = families::random_connected(&mut rng, n);
        let f: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lhs: f64 = (0..g.n())
            .map(|x| calculus::laplacian(&g, &f, x) * h[x] * g.mu(x))
            .sum();
        worst_ibp = worst_ibp.max(calculus::integration_by_parts_residual(&g, &f, &h)? / (1.0 + lhs.abs()));
        for (x, y, _) in g.edges() {
            worst_product = worst_product.max(calculus::product_rule_residual(&f, &h, x, y));
        }
        for x in 0..g.n() {
            worst_lap = worst_lap.max(calculus::laplacian_product_residual(&g, &f, &h, x)?);
            let psi = calculus::PiHalf::new(1.5, 0.1)?;
            worst_convex = worst_convex.min(calculus::convexity_margin(&g, &f, &psi, x)?);
        }
    }
    suite.push(
        "random 30x".into(),
        MarginReport {
            name: "integration-by-parts",
            value: worst_ibp,
            scale: 1.0,
            orientation: crate::weights::MarginOrientation::UpperZero,
            witness: None,
            exploratory: false,
            evaluated: 30,
        },
        tol,
    );
    suite.push(
        "random 30x".into(),
        MarginReport {
            name: "product-rule",
            value: worst_product,
            scale: 1.0,
            orientation: crate::weights::MarginOrientation::UpperZero,
            witness: None,
            exploratory: false,
            evaluated: 30,
        },
        tol,
    );
    suite.push(
        "random 30x".into(),
        MarginReport {
            name: "laplacian-of-product",
            value: worst_lap,
            scale: 1.0,
            orientation: crate::weights::MarginOrientation::UpperZero,
            witness: None,
            exploratory: false,
            evaluated: 30,
        },
        tol,
    );
    suite.push(
        "pi-half p=1.5 alpha=0.1".into(),
        MarginReport {
            name: "convexity",
            value: worst_convex,
            scale: 1.0,
            orientation: crate::weights::MarginOrientation::LowerZero,
            witness: None,
            exploratory: false,
            evaluated: 30,
        },
        tol,
    );
    Ok(())
}

fn verify_cutoff(suite: &mut SuiteRows, args: &VerifyArgs, tol: f64) -> Result<()> {
    let g = families::z_segment(args.half_width);
    let d = build_metric(&g, &args.metric)?;
    let x0 = g.require_vertex("0")?;
    let radius = pick_radius(&g, &d, x0);
    let params = CutoffParams::new(x0, radius, 0.2)?;
    let c0 = intrinsic_bound(&g, &d, 1.0)?;
    let m = cutoff_margins(&g, &d, &params, Some(c0))?;
    let tag = format!("z{} R={radius:.2} delta=0.2", args.half_width);
    suite.push(tag.clone(), m.gradient, tol);
    suite.push(tag.clone(), m.gradient_sum, tol);
    if let Some(lap) = m.laplacian {
        suite.push(tag, lap, tol);
    }
    Ok(())
}

fn verify_weights(suite: &mut SuiteRows, args: &VerifyArgs, tol: f64) -> Result<()> {
    let mut graphs: Vec<(String, WeightedGraph)> = vec![(
        format!("z{}", args.half_width),
        families::z_segment(args.half_width),
    )];
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for i in 0..args.random_graphs {
        graphs.push((
            format!("rnd{i}"),
            {
                let n = rng.gen_range(10..60);
                families::random_connected(&mut rng, n)
            },
        ));
    }
    for (tag, g) in &graphs {
        let d = PseudoMetric::canonical_intrinsic(g);
        let s = d.jump_size();
        let x0 = if let Some(x) = g.vertex("0") { x } else { 0 };
        let radius = pick_radius(g, &d, x0);
        let rho1 = DensityField::constant(g, 1.0)?;
        let c0 = intrinsic_bound(g, &d, 1.0)?;
        let k = s + 1.0;
        for &alpha in &args.alphas {
            let gamma = ExpWeight::bracket_threshold(alpha, s, 1.0);
            let w = ExpWeight::new(alpha, gamma, 0.2, radius)?;
            suite.push(
                format!("{tag} alpha={alpha} gamma=thr"),
                exp_weight_bracket_margin(g, &d, &rho1, &w, x0, false)?,
                tol,
            );
            let gamma = ExpWeight::heat_threshold(alpha, s, c0, 1.0);
            let w = ExpWeight::new(alpha, gamma, 0.2, radius)?;
            suite.push(
                format!("{tag} alpha={alpha} gamma=thr"),
                exp_weight_heat_margin(g, &d, &rho1, &w, x0, false)?,
                tol,
            );
            suite.push(
                format!("{tag} alpha={alpha} k={k:.3}"),
                poly_weight_gradient_margin(g, &d, x0, alpha, k)?,
                tol,
            );
            for &sigma in &args.sigmas {
                if sigma <= 2.0 {
                    let rho = DensityField::vanishing(g, &d, x0, 1.0, sigma, k)?;
                    let constants = ProfileConstants::new(alpha, k, s)?;
                    let gamma = PolyWeight::bracket_threshold(alpha, &constants, 1.0);
                    let w = PolyWeight::new(alpha, gamma, k, s)?;
                    suite.push(
                        format!("{tag} alpha={alpha} sigma={sigma}"),
                        poly_weight_bracket_margin(g, &d, &rho, &w, x0, sigma, false)?,
                        tol,
                    );
                }
                if sigma <= 1.0 {
                    let rho = DensityField::vanishing(g, &d, x0, 1.0, sigma, k)?;
                    let constants = ProfileConstants::new(alpha, k, s)?;
                    let gamma = PolyWeight::heat_threshold(alpha, c0, &constants, 1.0);
                    let w = PolyWeight::new(alpha, gamma, k, s)?;
                    suite.push(
                        format!("{tag} alpha={alpha} sigma={sigma}"),
                        poly_weight_heat_margin(g, &d, &rho, &w, x0, sigma, false)?,
                        tol,
                    );
                }
            }
        }
        // admissibility of the cut-off with both weight families
        let row = d.distances_from(x0);
        let cut = CutoffParams::new(x0, radius, 0.2)?;
        let eta = cutoff_values(&row, &cut, s);
        let zeta = ExpWeight::new(1.0, 0.0, 0.2, radius)?;
        let sp: Vec<f64> = row.iter().map(|&dd| zeta.spatial(dd)).collect();
        suite.push(format!("{tag} eta/zeta"), admissibility_margin(g, &eta, &sp), tol);
        let theta = PolyWeight::new(1.0, 0.0, k, s)?;
        let sp: Vec<f64> = row.iter().map(|&dd| theta.spatial(dd)).collect();
        suite.push(format!("{tag} eta/theta"), admissibility_margin(g, &eta, &sp), tol);
    }
    Ok(())
}

fn verify_pairings(suite: &mut SuiteRows, args: &VerifyArgs) -> Result<()> {
    let g = families::z_segment(60);
    let d = PseudoMetric::canonical_intrinsic(&g);
    let s = d.jump_size();
    let x0 = g.require_vertex("0")?;
    let rho = DensityField::constant(&g, 1.0)?;
    let dt = 1e-3;
    let t_end = 0.05;
    let radius = 28.0;
    let delta = 0.2;
    let cut = CutoffParams::new(x0, radius, delta)?;
    cut.require_plateau(s)?;
    let row = d.distances_from(x0);
    let eta = cutoff_values(&row, &cut, s);
    let c0 = intrinsic_bound(&g, &d, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let support = delta * radius;
    for rep in 0..3 {
        let u0: Vec<f64> = (0..g.n())
            .map(|x| {
                if row[x] < support {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let traj = solve(
            &g,
            &rho,
            &u0,
            Source::Zero,
            &SolveOptions::new(Scheme::ImplicitEuler, dt, t_end),
        )?;
        let tau = traj.times.len() - 1;
        for p in [2.0, 3.0] {
            let gamma = ExpWeight::bracket_threshold(1.0, s, 1.0);
            let zeta = ExpWeight::new(1.0, gamma, delta, radius)?;
            let r = certify::caccioppoli_residual(&g, &rho, &traj, &eta, &zeta, &row, p, tau)?;
            suite.push(
                format!("rep={rep} p={p} eta/zeta"),
                residual_as_margin("single-ibp-estimate", &r),
                certify::RESIDUAL_TOL_PER_DT * dt,
            );
        }
        for p in [1.0, 2.0] {
            let gamma = ExpWeight::heat_threshold(1.0, s, c0, 1.0);
            let zeta = ExpWeight::new(1.0, gamma, delta, radius)?;
            let v: Vec<f64> = eta
                .iter()
                .zip(&row)
                .map(|(&e, &dd)| e * zeta.spatial(dd))
                .collect();
            let r = certify::adjoint_pairing_residual(&g, &rho, &traj, &v, gamma, p, tau)?;
            suite.push(
                format!("rep={rep} p={p} eta/zeta"),
                residual_as_margin("double-ibp-pairing", &r),
                certify::RESIDUAL_TOL_PER_DT * dt,
            );
        }
    }
    Ok(())
}

fn residual_as_margin(name: &'static str, r: &certify::ResidualReport) -> MarginReport {
    MarginReport {
        name,
        value: r.value,
        scale: r.scale,
        orientation: crate::weights::MarginOrientation::LowerZero,
        witness: None,
        exploratory: false,
        evaluated: 1,
    }
}

fn cmd_certify(args: &CertifyArgs) -> Result<i32> {
    let canonical = format!(
        "certify|graph={:?}|family={}|hw={}|density={}|u0={}|scheme={}|dt={}|t_end={}|metric={}|p={}|x0={}|radii={:?}|seed={}",
        args.graph, args.family, args.half_width, args.density, args.u0, args.scheme,
        args.dt, args.t_end, args.metric, args.p, args.x0, args.radii, args.seed
    );
    let hash = io::config_hash(&canonical);
    std::fs::create_dir_all(&args.out)?;

    // constructed-energy path: certify an (R, E) table directly
    if let Some(path) = &args.energies {
        let text = std::fs::read_to_string(path)?;
        let mut radii = Vec::new();
        let mut energies = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            if line.starts_with('R') || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let r: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad energy row `{line}`")))?;
            let e: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad energy row `{line}`")))?;
            radii.push(r);
            energies.push(e);
        }
        let profile = parse_profile_spec(&args.density, args.jump_size)?;
        let metric = certify::MetricInfo {
            intrinsic_2_bound: Some(1.0),
            intrinsic_1_bound: Some(1.0),
            jump_size: args.jump_size,
        };
        let cert = certify::classify_energies(&radii, &energies, args.p, &metric, &profile)?;
        return write_certificate(args, &cert, &hash, None);
    }

    let (g, file_rho, _doc) = match &args.graph {
        Some(path) => io::load_graph(path)?,
        None => (build_family(&args.family, args.half_width, 2, 3)?, None, None),
    };
    let d = build_metric(&g, &args.metric)?;
    let x0 = g.require_vertex(&args.x0)?;
    let rho = parse_density(&g, &d, x0, &args.density, file_rho)?;
    let traj: Trajectory = match &args.traj {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            io::parse_trajectory_csv(&g, &text, Scheme::parse(&args.scheme)?, args.dt)?
        }
        None => {
            let u0 = parse_u0(&g, &d, x0, &args.u0, args.seed, None)?;
            solve(
                &g,
                &rho,
                &u0,
                Source::Zero,
                &SolveOptions::new(Scheme::parse(&args.scheme)?, args.dt, args.t_end),
            )?
        }
    };
    let cert = certify::classify(&g, &d, &traj, &rho, args.p, x0, &args.radii)?;
    if args.chains {
        run_chains(&g, &d, &rho, &traj, args, x0)?;
    }
    write_certificate(args, &cert, &hash, Some((&g, &d, &traj, &rho, x0)))
}

fn parse_profile_spec(spec: &str, jump: f64) -> Result<DensityProfile> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "const" => Ok(DensityProfile::BoundedBelow {
            rho0: rest.parse().map_err(|_| Error::Parse("bad rho0".into()))?,
        }),
        "vanishing" => {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Parse("vanishing density needs rho0,sigma,k".into()));
            }
            let _ = jump;
            Ok(DensityProfile::Vanishing {
                rho0: parts[0].parse().map_err(|_| Error::Parse("bad rho0".into()))?,
                sigma: parts[1].parse().map_err(|_| Error::Parse("bad sigma".into()))?,
                k: parts[2].parse().map_err(|_| Error::Parse("bad k".into()))?,
                x0: 0,
            })
        }
        other => Err(Error::Parse(format!("unknown density kind `{other}`"))),
    }
}

fn run_chains(
    g: &WeightedGraph,
    d: &PseudoMetric,
    rho: &DensityField,
    traj: &Trajectory,
    args: &CertifyArgs,
    x0: usize,
) -> Result<()> {
    let s = d.jump_size();
    let tau = traj.times.len() - 1;
    match rho.profile {
        Some(DensityProfile::BoundedBelow { rho0 }) => {
            for &r in &args.radii {
                let alpha = 1.0;
                let gamma = ExpWeight::bracket_threshold(alpha, s, rho0);
                let params = BoundedChainParams {
                    x0,
                    radius: r,
                    delta: 0.2,
                    alpha,
                    gamma,
                    p: args.p,
                };
                let rep = certify::decay_chain_bounded(g, d, rho, traj, &params, tau)?;
                println!(
                    "chain bounded R={r:<8} lhs {:.6e} rhs {:.6e} slack {:+.3e} {}",
                    rep.lhs,
                    rep.rhs,
                    rep.slack,
                    if rep.passed() { "ok" } else { "VIOLATED" }
                );
            }
        }
        Some(DensityProfile::Vanishing { sigma, k, .. }) => {
            for &r in &args.radii {
                let alpha = 1.0f64.max(3.0 - 2.0);
                let delta = ((1.0 + s - k) / r * 0.9).min(0.45);
                if delta <= 0.0 {
                    continue;
                }
                let constants = ProfileConstants::new(alpha, k, s)?;
                let gamma = PolyWeight::bracket_threshold(alpha, &constants, rho.min_rho());
                let params = VanishingChainParams {
                    x0,
                    radius: r,
                    delta,
                    alpha,
                    gamma,
                    p: args.p,
                    k,
                    sigma,
                    beta: 1.0,
                    route: VanishingRoute::Single,
                };
                match certify::decay_chain_vanishing(g, d, rho, traj, &params, tau) {
                    Ok(rep) => println!(
                        "chain vanishing R={r:<8} lhs {:.6e} rhs {:.6e} slack {:+.3e} {}",
                        rep.lhs,
                        rep.rhs,
                        rep.slack,
                        if rep.passed() { "ok" } else { "VIOLATED" }
                    ),
                    Err(e) => println!("chain vanishing R={r:<8} skipped: {e}"),
                }
            }
        }
        None => {}
    }
    Ok(())
}

type TrajContext<'a> = (
    &'a WeightedGraph,
    &'a PseudoMetric,
    &'a Trajectory,
    &'a DensityField,
    usize,
);

fn write_certificate(
    args: &CertifyArgs,
    cert: &certify::GrowthCertificate,
    hash: &str,
    _ctx: Option<TrajContext<'_>>,
) -> Result<i32> {
    let json = io::certificate_json(cert, args.seed, hash);
    std::fs::write(args.out.join("certificate.json"), &json)?;

    let bounds: Vec<f64> = cert
        .radii
        .iter()
        .map(|&r| match (cert.exp_fit, cert.poly_fit, cert.poly_k) {
            (Some(f), _, _) => f.exp_bound(r),
            (None, Some(f), Some(k)) => f.poly_bound(r, k),
            _ => f64::NAN,
        })
        .collect();
    // decay exponent column for the bounded pipelines, when beta is in range
    let exponent: Option<Vec<f64>> = cert.exp_fit.and_then(|f| {
        let s = 0.5 / cert.beta_limit;
        let beta = f.beta.max(1e-4);
        if beta >= cert.beta_limit {
            return None;
        }
        let delta = (0.25 * (0.5 - beta * s)).min(0.45);
        let kappa = {
            let lo = if cert.p >= 2.0 {
                2.0 * beta * s / (1.0 - 2.0 * delta)
            } else {
                beta * s / (1.0 - 2.0 * delta)
            };
            (lo + 1.0) / 2.0
        };
        let params = DecayParams {
            kappa,
            s,
            rho0: 1.0,
            beta,
            delta,
            tau: args.t_end,
        };
        let vals: Option<Vec<f64>> = cert
            .radii
            .iter()
            .map(|&r| {
                if cert.p >= 2.0 {
                    decay_exponent_f(r.max(1.0 + 1e-9), &params).ok()
                } else {
                    decay_exponent_g(r.max(1.0 + 1e-9), &params, 1.0).ok()
                }
            })
            .collect();
        vals
    });
    let csv = io::energy_csv(&cert.radii, &cert.energies, &bounds, exponent.as_deref());
    std::fs::write(args.out.join("energy.csv"), &csv)?;

    if args.svg {
        let log10 = |v: f64| (v.max(1e-300)).log10();
        let series = vec![
            (
                "log10 E".to_string(),
                cert.radii
                    .iter()
                    .zip(&cert.energies)
                    .map(|(&r, &e)| (r, log10(e)))
                    .collect::<Vec<_>>(),
            ),
            (
                "log10 bound".to_string(),
                cert.radii
                    .iter()
                    .zip(&bounds)
                    .map(|(&r, &b)| (r, log10(b)))
                    .collect::<Vec<_>>(),
            ),
        ];
        let svg = io::svg_line_chart("ball energy vs growth bound", "R", "log10", &series);
        std::fs::write(args.out.join("energy.svg"), svg)?;
    }

    println!(
        "verdict: {}  (beta limit {:.6})",
        cert.verdict.as_str(),
        cert.beta_limit
    );
    for gate in &cert.gates {
        println!(
            "  {:<22} {}",
            gate.gate.as_str(),
            if !gate.applicable {
                format!("not applicable: {}", gate.reason)
            } else {
                format!(
                    "{}: {}",
                    match gate.in_class {
                        Some(true) => "in-class",
                        Some(false) => "out-of-class",
                        None => "undecided",
                    },
                    gate.reason
                )
            }
        );
    }
    println!("wrote {}", args.out.display());
    Ok(EXIT_OK)
}

fn cmd_report(args: &ReportArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.input)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty csv".into()))?
        .split(',')
        .collect();
    let x_idx = header
        .iter()
        .position(|&h| h == args.x_col)
        .ok_or_else(|| Error::Parse(format!("no column `{}`", args.x_col)))?;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut y_idx = Vec::new();
    for name in &args.y_cols {
        let idx = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("no column `{name}`")))?;
        y_idx.push(idx);
        series.push((name.clone(), Vec::new()));
    }
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let x: f64 = match fields.get(x_idx).and_then(|v| v.parse().ok()) {
            Some(v) => v,
            None => continue,
        };
        for (si, &idx) in y_idx.iter().enumerate() {
            if let Some(y) = fields.get(idx).and_then(|v| v.parse::<f64>().ok()) {
                let y = if args.log_y { y.max(1e-300).log10() } else { y };
                series[si].1.push((x, y));
            }
        }
    }
    let svg = io::svg_line_chart(
        &format!("{}", args.input.display()),
        &args.x_col,
        if args.log_y { "log10" } else { "value" },
        &series,
    );
    std::fs::write(&args.out, svg)?;
    println!("wrote {}", args.out.display());
    Ok(EXIT_OK)
}
