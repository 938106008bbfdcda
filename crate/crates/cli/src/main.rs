mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bitangent_core::bitangent::{curves_to_csv, tie_line_mesh, trace_binodal};
use bitangent_core::classifier::{classify, classify_family};
use bitangent_core::export::{csv_table, Mesh};
use bitangent_core::jet_json::parse_jet_pair;
use bitangent_core::normal_forms::{binodal_from_normal_form, criminant_numeric, sweep_family, Grid1};
use bitangent_core::thermo::{
    coexistence_csv, critical_point, find_seed, isotherm_table, maxwell_construction, mixture_binodal,
    mixture_surface_mesh, spinodal_single, vdw_pressure, FluidParams, MixtureParams, ISOTHERM_HEADER,
};
use bitangent_core::{CaseLabel, NormalFormSpec, Tolerance, TraceOptions};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use output::{emit, read_input, CliError};

/// Bitangent planes of surface pairs, normal-form criminants and
/// van der Waals coexistence.
///
/// Exit codes: 0 success, 1 input or usage error, 2 legal request with an
/// empty outcome (Unclassified, isolated binodal, supercritical temperature).
#[derive(Parser)]
#[command(name = "bitangent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a jet pair and print the case report as JSON.
    Classify(ClassifyArgs),
    /// Trace the binodal curve through the base pair and write it as CSV.
    Trace(TraceArgs),
    /// Criminant surface (OBJ) and binodal slice (CSV) of a normal form.
    Criminant(FormArgs),
    /// One criminant and binodal per τ in --tau-range.
    Sweep(FormArgs),
    /// Van der Waals fluids and binary mixtures.
    #[command(subcommand)]
    Thermo(ThermoCommand),
}

#[derive(Args)]
struct ClassifyArgs {
    /// Jet pair JSON: {"f": {"20": 1, ...}, "g": {...}}, keys "ij" for u^i v^j.
    #[arg(long)]
    input: PathBuf,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative tolerance for zero tests.
    #[arg(long, default_value_t = Tolerance::default().0, value_parser = positive)]
    tol: f64,
}

#[derive(Args)]
struct TraceFlags {
    /// Arclength step.
    #[arg(long, default_value_t = TraceOptions::default().step, value_parser = positive)]
    step: f64,
    /// Step budget per direction.
    #[arg(long, default_value_t = TraceOptions::default().max_steps)]
    max_steps: usize,
    /// Stop on leaving |u|, |v|, |x|, |y| <= bound.
    #[arg(long, default_value_t = TraceOptions::default().domain_bound, value_parser = positive)]
    domain_bound: f64,
}

impl TraceFlags {
    fn options(&self) -> TraceOptions {
        TraceOptions { step: self.step, max_steps: self.max_steps, domain_bound: self.domain_bound, ..Default::default() }
    }
}

#[derive(Args)]
struct TraceArgs {
    /// Jet pair JSON (τ blocks, if any, are ignored).
    #[arg(long)]
    input: PathBuf,
    /// Curve CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the ruled surface of tie lines as OBJ.
    #[arg(long)]
    obj: Option<PathBuf>,
    #[command(flatten)]
    trace: TraceFlags,
}

#[derive(Args)]
struct FormArgs {
    /// B2, B3, B4, C3, C3starPlus, C3starMinus, C4, C31, F4 or ThreeE.
    #[arg(long, value_parser = label)]
    normal_form: CaseLabel,
    /// Value of the family parameter τ.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tau: f64,
    /// start:end:count; one frame per value.
    #[arg(long, allow_hyphen_values = true, value_parser = tau_range)]
    tau_range: Option<TauRange>,
    /// Samples per axis of the (u or q2, ε) grid over [-0.5, 0.5].
    #[arg(long, default_value_t = Grid1::default_local().count, value_parser = grid_count)]
    grid: usize,
    /// Sign of the ε² term.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true, value_parser = sign)]
    sign_eps2: f64,
    /// Sign of the v² term.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true, value_parser = sign)]
    sign_v2: f64,
    /// Sign of q2² (ThreeE only).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true, value_parser = sign)]
    sign_q2sq: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FluidFlags {
    /// Attraction constant.
    #[arg(long = "a", default_value_t = FluidParams::reduced().a)]
    a: f64,
    /// Covolume.
    #[arg(long = "b", default_value_t = FluidParams::reduced().b)]
    b: f64,
    /// Gas constant.
    #[arg(long = "R", default_value_t = FluidParams::reduced().r)]
    r: f64,
}

impl FluidFlags {
    fn params(&self) -> Result<FluidParams, CliError> {
        Ok(FluidParams::new(self.a, self.b, self.r)?)
    }
}

#[derive(Subcommand)]
enum ThermoCommand {
    /// Rows V, P, A along one isotherm.
    Isotherm {
        #[command(flatten)]
        fluid: FluidFlags,
        /// Temperature.
        #[arg(long = "T", value_parser = positive)]
        t: f64,
        /// Smallest volume [default: 1.05 b].
        #[arg(long)]
        v_min: Option<f64>,
        /// Largest volume [default: 10 V_c = 30 b].
        #[arg(long)]
        v_max: Option<f64>,
        /// Number of samples.
        #[arg(long, default_value_t = 200, value_parser = grid_count)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coexistence rows T, V_liq, V_vap, P_tie, residual by the equal-area rule.
    Maxwell {
        #[command(flatten)]
        fluid: FluidFlags,
        /// Temperatures, comma separated.
        #[arg(long = "T", value_delimiter = ',', num_args = 1.., required = true, value_parser = positive)]
        t: Vec<f64>,
        /// Bound on the equal-area residual.
        #[arg(long, default_value_t = 1e-8, value_parser = positive)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spinodal volumes V_minus < V_plus where dP/dV = 0.
    Spinodal {
        #[command(flatten)]
        fluid: FluidFlags,
        /// Temperatures, comma separated.
        #[arg(long = "T", value_delimiter = ',', num_args = 1.., required = true, value_parser = positive)]
        t: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical temperature, volume and pressure.
    Critical {
        #[command(flatten)]
        fluid: FluidFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binodal of a binary mixture traced from a common tangent plane.
    MixtureBinodal(MixtureArgs),
}

#[derive(Args)]
struct MixtureArgs {
    #[arg(long, default_value_t = 3.0)]
    a1: f64,
    #[arg(long, default_value_t = 3.0)]
    a2: f64,
    /// Cross attraction in a(x) = a1 x² + 2 a12 x(1-x) + a2 (1-x)².
    #[arg(long, default_value_t = 2.5)]
    a12: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    b1: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    b2: f64,
    #[arg(long = "R", default_value_t = 8.0 / 3.0)]
    r: f64,
    #[arg(long = "T", default_value_t = 0.8, value_parser = positive)]
    t: f64,
    /// Composition of the first contact point at the seed.
    #[arg(long, default_value_t = 0.5)]
    x1: f64,
    /// Scale of the composition axis in the tracing chart.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    x_scale: f64,
    /// Arclength step in the chart.
    #[arg(long, default_value_t = 2e-3, value_parser = positive)]
    step: f64,
    #[arg(long, default_value_t = TraceOptions::default().max_steps)]
    max_steps: usize,
    /// Chart box half-width.
    #[arg(long, default_value_t = 0.45, value_parser = positive)]
    domain_bound: f64,
    /// Samples per axis of the A(V, x) mesh written with --obj.
    #[arg(long, default_value_t = 60, value_parser = grid_count)]
    grid: usize,
    /// Binodal CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Graph of A(V, x) over the window of the binodal, as OBJ.
    #[arg(long)]
    obj: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

fn sign(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x == 1.0 || x == -1.0 => Ok(x),
        _ => Err(format!("must be 1 or -1, got {s}")),
    }
}

fn grid_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(format!("must be an integer >= 2, got {s}")),
    }
}

fn label(s: &str) -> Result<CaseLabel, String> {
    CaseLabel::parse(s).filter(|l| *l != CaseLabel::Unclassified).ok_or_else(|| format!("unknown normal form {s}"))
}

#[derive(Clone, Debug)]
struct TauRange(Vec<f64>);

/// `start:end:count` with `count >= 1`.
fn tau_range(s: &str) -> Result<TauRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(format!("expected start:end:count, got {s}"));
    };
    let a: f64 = a.parse().map_err(|_| format!("bad start in {s}"))?;
    let b: f64 = b.parse().map_err(|_| format!("bad end in {s}"))?;
    let n: usize = n.parse().map_err(|_| format!("bad count in {s}"))?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(format!("count must be >= 1 and bounds finite, got {s}"));
    }
    if n == 1 {
        return Ok(TauRange(vec![a]));
    }
    Ok(TauRange((0..n).map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()))
}

/// What a successful run found.
enum Status {
    Done,
    Empty(String),
}

fn run_classify(args: &ClassifyArgs) -> Result<Status, CliError> {
    let pair = parse_jet_pair(&read_input(&args.input)?)?;
    let tol = Tolerance(args.tol);
    let report = if pair.has_family { classify_family(&pair.f, &pair.g, tol) } else { classify(&pair.f.base, &pair.g.base, tol) };
    emit(args.out.as_deref(), &(report.to_json() + "\n"))?;
    Ok(match report.label {
        CaseLabel::Unclassified => Status::Empty("Unclassified".into()),
        _ => Status::Done,
    })
}

fn run_trace(args: &TraceArgs) -> Result<Status, CliError> {
    let pair = parse_jet_pair(&read_input(&args.input)?)?;
    let (f, g) = (&pair.f.base, &pair.g.base);
    let out = trace_binodal(f, g, &args.trace.options())?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    emit(args.out.as_deref(), &curves_to_csv(&out.curves, out.isolated))?;
    if let Some(path) = &args.obj {
        let mut mesh = Mesh::default();
        for c in &out.curves {
            let m = tie_line_mesh(c, f, g, 0.0).mesh;
            let base = mesh.vertices.len();
            mesh.vertices.extend(m.vertices);
            mesh.faces.extend(m.faces.into_iter().map(|face| face.into_iter().map(|i| i + base).collect()));
        }
        emit(Some(path), &mesh.to_obj())?;
    }
    Ok(if out.isolated { Status::Empty("isolated: the base pair has no real binodal branch".into()) } else { Status::Done })
}

fn form_spec(args: &FormArgs) -> NormalFormSpec {
    NormalFormSpec {
        label: args.normal_form,
        sign_eps2: args.sign_eps2,
        sign_v2: args.sign_v2,
        sign_q2sq: args.sign_q2sq,
        tau: args.tau,
    }
}

fn write_in(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    emit(Some(&path), contents)?;
    println!("{}", path.display());
    Ok(())
}

fn run_criminant(args: &FormArgs, require_range: bool) -> Result<Status, CliError> {
    let spec = form_spec(args);
    let grid = Grid1::new(-0.5, 0.5, args.grid);
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Input(format!("{}: {e}", args.out.display())))?;
    let name = spec.label.name();
    match &args.tau_range {
        Some(TauRange(taus)) => {
            for frame in sweep_family(&spec, taus, grid, grid)? {
                let stem = format!("{name}_{}", frame.file_stem());
                write_in(&args.out, &format!("{stem}.obj"), &frame.patch.mesh().to_obj())?;
                write_in(&args.out, &format!("{stem}_binodal.csv"), &frame.binodal.to_csv())?;
            }
        }
        None if require_range => return Err(CliError::Input("sweep needs --tau-range start:end:count".into())),
        None => {
            let patch = criminant_numeric(&spec, grid, grid)?;
            let binodal = binodal_from_normal_form(&spec, grid)?;
            write_in(&args.out, &format!("{name}.obj"), &patch.mesh().to_obj())?;
            write_in(&args.out, &format!("{name}_binodal.csv"), &binodal.to_csv())?;
        }
    }
    Ok(Status::Done)
}

fn run_thermo(cmd: &ThermoCommand) -> Result<Status, CliError> {
    match cmd {
        ThermoCommand::Isotherm { fluid, t, v_min, v_max, grid, out } => {
            let p = fluid.params()?;
            let lo = v_min.unwrap_or(1.05 * p.b);
            let hi = v_max.unwrap_or(30.0 * p.b);
            let rows = isotherm_table(*t, &p, lo, hi, *grid)?;
            emit(out.as_deref(), &csv_table(&ISOTHERM_HEADER, &rows))?;
        }
        ThermoCommand::Maxwell { fluid, t, tol, out } => {
            let p = fluid.params()?;
            let rows = t.iter().map(|&t| Ok((t, maxwell_construction(t, &p, *tol)?))).collect::<Result<Vec<_>, CliError>>()?;
            emit(out.as_deref(), &coexistence_csv(&rows))?;
        }
        ThermoCommand::Spinodal { fluid, t, out } => {
            let p = fluid.params()?;
            let rows = t
                .iter()
                .map(|&t| {
                    let (vm, vp) = spinodal_single(t, &p)?;
                    Ok([t, vm, vp, vdw_pressure(vm, t, &p)?, vdw_pressure(vp, t, &p)?])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            emit(out.as_deref(), &csv_table(&["T", "V_minus", "V_plus", "P_minus", "P_plus"], &rows))?;
        }
        ThermoCommand::Critical { fluid, out } => {
            let c = critical_point(&fluid.params()?);
            emit(out.as_deref(), &csv_table(&["T_c", "V_c", "P_c"], &[[c.t, c.v, c.p]]))?;
        }
        ThermoCommand::MixtureBinodal(args) => return run_mixture(args),
    }
    Ok(Status::Done)
}

fn run_mixture(args: &MixtureArgs) -> Result<Status, CliError> {
    let m = MixtureParams::new(args.a1, args.a2, args.a12, args.b1, args.b2, args.r)?;
    let seed = find_seed(args.t, &m, args.x1)?;
    let opts = TraceOptions { step: args.step, max_steps: args.max_steps, domain_bound: args.domain_bound, ..Default::default() };
    let bin = mixture_binodal(args.t, &m, seed, args.x_scale, &opts)?;
    for w in &bin.warnings {
        eprintln!("warning: {w}");
    }
    emit(args.out.as_deref(), &bin.to_csv(args.t, &m))?;
    if let Some(path) = &args.obj {
        let (mut v, mut x) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for q in &bin.pairs {
            for (vv, xx) in [(q[0], q[1]), (q[2], q[3])] {
                v = (v.0.min(vv), v.1.max(vv));
                x = (x.0.min(xx), x.1.max(xx));
            }
        }
        let pad = 0.05 * (x.1 - x.0);
        let x_window = ((x.0 - pad).max(1e-6), (x.1 + pad).min(1.0 - 1e-6));
        let mesh = mixture_surface_mesh(args.t, &m, (v.0, v.1), x_window, args.grid);
        emit(Some(path), &mesh.to_obj())?;
    }
    Ok(Status::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Classify(a) => run_classify(a),
        Command::Trace(a) => run_trace(a),
        Command::Criminant(a) => run_criminant(a, false),
        Command::Sweep(a) => run_criminant(a, true),
        Command::Thermo(c) => run_thermo(c),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Empty(why)) => {
            eprintln!("{why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
