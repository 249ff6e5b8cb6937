//! `twirl`: command-line front end.
//!
//! Results go to files; a short summary goes to stdout. Failures print a
//! single JSON object on stderr and exit with a code specific to the error
//! class (see [`ErrorClass`]).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use twirl_core::experiments::{
    fit_decay_rate, preset, run_convergence, search_two_qubit_c, ExperimentConfig, Figure, InitialState, Metric,
    Mode, Scheme,
};
use twirl_core::integrate::{averaged_moment_operator, trace_integral, IntegrationGroup, DEFAULT_ITERS};
use twirl_core::linalg::{fmt_f64, matrices_from_json};
use twirl_core::superop::{avg_twirl_superop, exact_twirl_superop, recursive_twirl_superop, superop_error};
use twirl_core::twirl::{average_twirl, build_isotropic_basis, build_permutation_basis, exact_twirl, recursive_twirl};
use twirl_core::{
    ComplexMatrix, DensityMatrix, PermutationBasis, QuditRegister, RngHandle, Superoperator, TwirlError, TwirlPlan,
    UnitarySource, Variant,
};

const OUT_DIR_ENV: &str = "TWIRL_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "twirl", version, about = "Recursive twirling of multi-qudit states and superoperators")]
struct Cli {
    /// Worker threads for trajectory fan-out (default: all cores).
    #[arg(long, global = true, env = "TWIRL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Apply the recursive (or averaging) twirl to a state file.
    Run(RunArgs),
    /// Exact twirl of a state file.
    Exact(ExactArgs),
    /// Superoperator builds and error evaluation.
    #[command(subcommand)]
    Superop(SuperopCommand),
    /// Moment operator of U^⊗m ⊗ (U†)^⊗n and trace integrals.
    Integrate(IntegrateArgs),
    /// Convergence curve for an arbitrary configuration.
    Curve(CurveArgs),
    /// Figure presets and the two-qubit c search.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct RegisterArgs {
    /// Number of qudits.
    #[arg(long)]
    n: usize,
    /// Local dimension.
    #[arg(long)]
    d: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Werner)]
    variant: VariantArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum VariantArg {
    Werner,
    Isotropic,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Werner => Variant::Werner,
            VariantArg::Isotropic => Variant::Isotropic,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum SchemeArg {
    Recursive,
    Averaging,
    Conjugation,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    register: RegisterArgs,
    #[arg(long)]
    input: PathBuf,
    /// Iterations M (recursive) or number of terms M (averaging).
    #[arg(long)]
    iterations: usize,
    #[arg(long, default_value = "haar")]
    source: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Branches per recursive iteration.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Recursive)]
    scheme: SchemeArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    register: RegisterArgs,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SuperopCommand {
    /// Write the exact, a recursive or an averaged twirl superoperator.
    Build(SuperopBuildArgs),
    /// ‖A − B‖² between two superoperator files (B defaults to the exact one).
    Error(SuperopErrorArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum SuperopKind {
    Exact,
    Recursive,
    Averaging,
}

#[derive(Args, Debug)]
struct SuperopBuildArgs {
    #[command(flatten)]
    register: RegisterArgs,
    #[arg(long, value_enum, default_value_t = SuperopKind::Exact)]
    kind: SuperopKind,
    #[arg(long, default_value_t = 0)]
    iterations: usize,
    #[arg(long, default_value = "haar")]
    source: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SuperopErrorArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VariantArg::Werner)]
    variant: VariantArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum GroupArg {
    U,
    /// Experimental: determinant-corrected samples.
    Su,
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    /// Copies of U.
    #[arg(long)]
    m: usize,
    /// Copies of U†.
    #[arg(long)]
    n: usize,
    /// Local dimension.
    #[arg(long = "dim", alias = "d")]
    d: usize,
    #[arg(long, default_value_t = DEFAULT_ITERS)]
    iters: usize,
    /// Independent runs averaged together.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value = "haar")]
    source: String,
    #[arg(long, value_enum, default_value_t = GroupArg::U)]
    group: GroupArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON matrix list A_1..A_m for the trace integral.
    #[arg(long)]
    a: Option<PathBuf>,
    /// JSON matrix list B_1..B_n for the trace integral.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Result JSON (scalar, diagnostics and parameters).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the moment operator matrix.
    #[arg(long)]
    operator_out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum ModeArg {
    State,
    Superoperator,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum MetricArg {
    Raw,
    Normalized,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    register: RegisterArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::State)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = SchemeArg::Recursive)]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Largest iteration recorded.
    #[arg(long)]
    iterations: usize,
    #[arg(long, default_value = "haar")]
    source: String,
    #[arg(long)]
    trajectories: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::Raw)]
    metric: MetricArg,
    /// Initial state file; HS-random per trajectory when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// fig2, fig3a, fig3b, fig4a, fig4b or c-search.
    target: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the preset trajectory count.
    #[arg(long)]
    trajectories: Option<usize>,
    /// c-search grid step.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// c-search iteration count.
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// CSV path (default: <out dir>/<target>.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit codes; 2 is also what clap uses for usage errors.
#[derive(Debug, Clone, Copy)]
enum ErrorClass {
    Usage = 2,
    Parse = 3,
    Io = 4,
    Shape = 5,
    ResourceGuard = 6,
    InvalidParameter = 7,
    InvalidState = 8,
    Numerical = 9,
}

impl ErrorClass {
    fn name(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Parse => "parse",
            ErrorClass::Io => "io",
            ErrorClass::Shape => "shape",
            ErrorClass::ResourceGuard => "resource-guard",
            ErrorClass::InvalidParameter => "invalid-parameter",
            ErrorClass::InvalidState => "invalid-state",
            ErrorClass::Numerical => "numerical",
        }
    }
}

struct Failure {
    class: ErrorClass,
    message: String,
}

impl From<TwirlError> for Failure {
    fn from(e: TwirlError) -> Self {
        let class = match &e {
            TwirlError::Shape(_) | TwirlError::NotSquare { .. } => ErrorClass::Shape,
            TwirlError::NotUnitary { .. } | TwirlError::InvalidParameter(_) => ErrorClass::InvalidParameter,
            TwirlError::InvalidState(_) => ErrorClass::InvalidState,
            TwirlError::ResourceGuard(_) | TwirlError::Overflow(_) => ErrorClass::ResourceGuard,
            TwirlError::NonFinite(_) => ErrorClass::Numerical,
            TwirlError::Parse(_) => ErrorClass::Parse,
            TwirlError::Io(_) => ErrorClass::Io,
        };
        Failure { class, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure { class: ErrorClass::Usage, message: message.into() }
}

/// Relative output paths are resolved against `TWIRL_OUT_DIR` when set.
fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn meta_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.meta.json"))
}

fn write_output(out: &Path, body: &str, params: Value) -> CliResult<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(TwirlError::from)?;
    }
    std::fs::write(out, body).map_err(TwirlError::from)?;
    let meta = json!({
        "software": { "name": "twirl", "version": env!("CARGO_PKG_VERSION") },
        "parameters": params,
    });
    std::fs::write(meta_path(out), serde_json::to_string_pretty(&meta).unwrap_or_default())
        .map_err(TwirlError::from)?;
    Ok(())
}

fn load_state(path: &Path) -> CliResult<DensityMatrix> {
    Ok(DensityMatrix::new(ComplexMatrix::load(path)?)?)
}

fn basis_for(reg: QuditRegister, variant: Variant) -> CliResult<PermutationBasis> {
    Ok(match variant {
        Variant::Werner => build_permutation_basis(reg)?,
        Variant::Isotropic => build_isotropic_basis(reg)?,
    })
}

fn register(args: &RegisterArgs) -> CliResult<(QuditRegister, Variant)> {
    Ok((QuditRegister::new(args.n, args.d)?, args.variant.into()))
}

fn register_json(args: &RegisterArgs) -> Value {
    json!({ "n": args.n, "d": args.d, "variant": format!("{:?}", args.variant).to_lowercase() })
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let (reg, variant) = register(&args.register)?;
    let rho = load_state(&args.input)?;
    let source = UnitarySource::parse(&args.source, reg.local_dim)?;
    let mut rng = RngHandle::new(args.seed, 0);
    let out_state = match args.scheme {
        SchemeArg::Recursive => {
            let plan = TwirlPlan::new(reg, args.k, args.iterations, source.clone(), variant)?;
            recursive_twirl(&rho, &plan, &mut rng)?
        }
        SchemeArg::Averaging if variant == Variant::Werner => {
            average_twirl(&rho, args.iterations, &source, reg, &mut rng)?
        }
        SchemeArg::Averaging => return Err(usage("averaging is only available for the werner variant")),
        SchemeArg::Conjugation => return Err(usage("conjugation scheme is only available in `curve`")),
    };
    let target = exact_twirl(&rho, &basis_for(reg, variant)?)?;
    let err = twirl_core::linalg::hs_distance_sq(out_state.matrix(), target.matrix())?;
    let out = resolve_out(args.out.as_deref().unwrap_or(Path::new("twirled.json")));
    let params = json!({
        "verb": "run",
        "register": register_json(&args.register),
        "input": args.input,
        "iterations": args.iterations,
        "source": source.describe(),
        "seed": args.seed,
        "k": args.k,
        "scheme": format!("{:?}", args.scheme).to_lowercase(),
        "error_to_exact": num(err),
    });
    write_output(&out, &out_state.matrix().to_json(), params)?;
    println!("wrote {} (squared HS distance to exact twirl {})", out.display(), fmt_f64(err));
    Ok(())
}

fn cmd_exact(args: ExactArgs) -> CliResult<()> {
    let (reg, variant) = register(&args.register)?;
    let rho = load_state(&args.input)?;
    let basis = basis_for(reg, variant)?;
    let p = exact_twirl(&rho, &basis)?;
    let out = resolve_out(args.out.as_deref().unwrap_or(Path::new("exact.json")));
    let params = json!({
        "verb": "exact",
        "register": register_json(&args.register),
        "input": args.input,
        "basis_size": basis.count(),
    });
    write_output(&out, &p.matrix().to_json(), params)?;
    println!("wrote {} (invariant family of dimension {})", out.display(), basis.count());
    Ok(())
}

fn cmd_superop(cmd: SuperopCommand) -> CliResult<()> {
    match cmd {
        SuperopCommand::Build(args) => {
            let (reg, variant) = register(&args.register)?;
            let source = UnitarySource::parse(&args.source, reg.local_dim)?;
            let mut rng = RngHandle::new(args.seed, 0);
            let s = match args.kind {
                SuperopKind::Exact => exact_twirl_superop(reg, &basis_for(reg, variant)?)?,
                SuperopKind::Recursive => {
                    let plan = TwirlPlan::new(reg, args.k, args.iterations, source.clone(), variant)?;
                    recursive_twirl_superop(&plan, &mut rng)?
                }
                SuperopKind::Averaging if variant == Variant::Werner => {
                    avg_twirl_superop(args.iterations, &source, reg, &mut rng)?
                }
                SuperopKind::Averaging => return Err(usage("averaging is only available for the werner variant")),
            };
            let out = resolve_out(&args.out);
            let params = json!({
                "verb": "superop build",
                "register": register_json(&args.register),
                "kind": format!("{:?}", args.kind).to_lowercase(),
                "iterations": args.iterations,
                "source": source.describe(),
                "seed": args.seed,
                "k": args.k,
            });
            write_output(&out, &s.to_json(), params)?;
            println!("wrote {} ({}x{} superoperator)", out.display(), s.dim(), s.dim());
            Ok(())
        }
        SuperopCommand::Error(args) => {
            let read = |p: &Path| -> CliResult<Superoperator> {
                Ok(Superoperator::from_json(&std::fs::read_to_string(p).map_err(TwirlError::from)?)?)
            };
            let s = read(&args.input)?;
            let reference = match &args.reference {
                Some(p) => read(p)?,
                None => {
                    let reg = QuditRegister::new(s.n_qudits(), s.local_dim())?;
                    exact_twirl_superop(reg, &basis_for(reg, args.variant.into())?)?
                }
            };
            let err = superop_error(&s, &reference)?;
            println!("{}", json!({ "squared_error": num(err) }));
            Ok(())
        }
    }
}

fn cmd_integrate(args: IntegrateArgs) -> CliResult<()> {
    let source = UnitarySource::parse(&args.source, args.d)?;
    let group = match args.group {
        GroupArg::U => IntegrationGroup::Unitary,
        GroupArg::Su => IntegrationGroup::Special,
    };
    let mop = averaged_moment_operator(args.m, args.n, args.d, args.iters, &source, group, args.seed, args.runs)?;
    let load_list = |p: &Option<PathBuf>| -> CliResult<Vec<ComplexMatrix>> {
        match p {
            Some(p) => Ok(matrices_from_json(&std::fs::read_to_string(p).map_err(TwirlError::from)?)?),
            None => Ok(Vec::new()),
        }
    };
    let integral = if args.a.is_some() || args.b.is_some() || args.m + args.n == 0 {
        let value = trace_integral(&load_list(&args.a)?, &load_list(&args.b)?, &mop)?;
        Some(json!({ "re": num(value.re), "im": num(value.im) }))
    } else {
        None
    };
    let params = json!({
        "m": args.m,
        "n": args.n,
        "dim": args.d,
        "iters": args.iters,
        "runs": args.runs,
        "source": source.describe(),
        "group": format!("{:?}", args.group).to_lowercase(),
        "seed": args.seed,
        "a": args.a,
        "b": args.b,
    });
    let last = mop.diagnostics.last().map(|x| num(*x));
    if let Some(out) = &args.operator_out {
        let out = resolve_out(out);
        let mut p = params.clone();
        p["verb"] = json!("integrate");
        write_output(&out, &mop.matrix.to_json(), p)?;
    }
    if let Some(out) = &args.out {
        let out = resolve_out(out);
        let doc = json!({
            "integral": integral,
            "diagnostics": mop.diagnostics.iter().map(|x| num(*x)).collect::<Vec<_>>(),
            "parameters": params,
            "software": { "name": "twirl", "version": env!("CARGO_PKG_VERSION") },
        });
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(TwirlError::from)?;
        }
        std::fs::write(&out, serde_json::to_string_pretty(&doc).unwrap_or_default()).map_err(TwirlError::from)?;
    }
    println!("{}", json!({ "integral": integral, "last_step_change": last }));
    Ok(())
}

fn print_curve_summary(name: &str, curve: &twirl_core::experiments::ErrorCurve, csv: &Path) {
    let last = curve.records.last().expect("curve has records");
    let fit = (curve.records.len() >= 2)
        .then(|| fit_decay_rate(curve, curve.records[0].iteration..=last.iteration).ok())
        .flatten();
    println!(
        "{name}: wrote {} ({} records, final mean {}{})",
        csv.display(),
        curve.records.len(),
        fmt_f64(last.mean),
        fit.map(|f| format!(", fitted rate {} bits/iteration", fmt_f64(f.rate_bits))).unwrap_or_default()
    );
}

fn write_curve(curve: &twirl_core::experiments::ErrorCurve, csv: &Path) -> CliResult<PathBuf> {
    let dir = csv.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "curve".into());
    let (csv, _) = curve.write_files(dir, &stem)?;
    Ok(csv)
}

fn cmd_curve(args: CurveArgs) -> CliResult<()> {
    let (reg, variant) = register(&args.register)?;
    let initial = match &args.input {
        Some(p) => InitialState::Given(load_state(p)?),
        None => InitialState::HsRandom,
    };
    let cfg = ExperimentConfig {
        scheme: match args.scheme {
            SchemeArg::Recursive => Scheme::Recursive,
            SchemeArg::Averaging => Scheme::Averaging,
            SchemeArg::Conjugation => Scheme::Conjugation,
        },
        k: args.k,
        source: UnitarySource::parse(&args.source, reg.local_dim)?,
        variant,
        metric: match args.metric {
            MetricArg::Raw => Metric::Raw,
            MetricArg::Normalized => Metric::Normalized,
        },
        initial,
        ..ExperimentConfig::new(
            reg,
            match args.mode {
                ModeArg::State => Mode::State,
                ModeArg::Superoperator => Mode::Superoperator,
            },
            args.iterations,
            args.trajectories,
            args.seed,
        )
    };
    let curve = run_convergence(&cfg)?;
    let csv = write_curve(&curve, &resolve_out(&args.out))?;
    print_curve_summary("curve", &curve, &csv);
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    if args.target == "c-search" {
        let search = search_two_qubit_c(args.step, args.iterations)?;
        let out = resolve_out(args.out.as_deref().unwrap_or(Path::new("c-search.csv")));
        let mut body = String::from("c,sq_error\n");
        for (cv, e) in &search.grid {
            body.push_str(&format!("{},{}\n", fmt_f64(*cv), fmt_f64(*e)));
        }
        let params = json!({
            "verb": "bench c-search",
            "step": args.step,
            "iterations": args.iterations,
            "best_c": num(search.best_c),
            "best_error": num(search.best_error),
        });
        write_output(&out, &body, params)?;
        println!(
            "c-search: best c = {} with error {} after {} iterations; wrote {}",
            fmt_f64(search.best_c),
            fmt_f64(search.best_error),
            args.iterations,
            out.display()
        );
        return Ok(());
    }
    let figure = Figure::parse(&args.target).map_err(|e| usage(e.to_string()))?;
    let mut cfg = preset(figure, args.seed)?;
    if let Some(t) = args.trajectories {
        cfg.trajectories = t;
    }
    let curve = run_convergence(&cfg)?;
    let csv = match &args.out {
        Some(p) => resolve_out(p),
        None => out_dir().join(format!("{}.csv", figure.name())),
    };
    let csv = write_curve(&curve, &csv)?;
    print_curve_summary(figure.name(), &curve, &csv);
    Ok(())
}

/// JSON number; serde_json prints the shortest form that round-trips.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn fail(f: Failure) -> ExitCode {
    let doc = json!({ "error": { "code": f.class.name(), "exit_code": f.class as u8, "message": f.message } });
    eprintln!("{doc}");
    ExitCode::from(f.class as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(usage(e.to_string().trim().to_string())),
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return fail(usage("--threads must be >= 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return fail(usage(format!("cannot size the worker pool: {e}")));
        }
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Superop(c) => cmd_superop(c),
        Command::Integrate(a) => cmd_integrate(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}
