//! Command-line front end for the blockade toolkit: single-point
//! evaluation, reference figure tables, tip-condition solving, and
//! declarative parameter sweeps.
//!
//! The pipeline contains no randomness; repeated invocations with the same
//! arguments produce byte-identical output.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error,
//! 4 no solution exists.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use blockade_core::analytic::{self, WeakDriveInputs};
use blockade_core::figures::{figure_by_id, FigureOptions};
use blockade_core::liouville::{steady_correlations, CorrelationOptions, CorrelationResult};
use blockade_core::model::{SystemParams, TipAttachment, TipGeometry, TipModel};
use blockade_core::sweep::{run_sweep, SweepSpec, PROB_KEYS};
use blockade_core::Error as CoreError;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_NO_SOLUTION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "blockade",
    version,
    about = "Single-photon blockade in a backscattering-coupled Kerr microresonator \
             with a movable nanotip: steady states, correlation functions, tip \
             placement conditions, figure tables, and parameter sweeps.",
    after_help = "All runs are deterministic: no randomness anywhere in the pipeline, \
                  so repeated invocations are byte-identical."
)]
struct Cli {
    /// Output directory for CSV/JSON artifacts
    #[arg(
        long,
        global = true,
        env = "BLOCKADE_OUT_DIR",
        default_value = ".",
        value_name = "DIR"
    )]
    out: PathBuf,

    /// Suppress informational stdout (tables, file paths)
    #[arg(long, global = true)]
    quiet: bool,

    /// Worker threads for grid evaluation (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one parameter point: occupations, g2/g3/g4(0), photon
    /// probabilities; prints a table and writes point.json
    Point(PointArgs),
    /// Reproduce a reference figure table: writes figN.csv + figN.spec.json
    Fig(FigArgs),
    /// Solve tip placement conditions: decoupling or weak-drive blockade
    Solve(SolveArgs),
    /// Run a declarative sweep from a JSON spec: writes NAME.csv + NAME.spec.json
    Sweep(SweepArgs),
}

/// System and tip parameters, resolvable from a JSON config file plus
/// flag overrides. Flags map 1:1 onto the parameter schema.
#[derive(Args, Clone)]
struct ParamArgs {
    /// JSON file with base system parameters (unknown keys rejected)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Laser-cavity detuning Delta, units of the intrinsic rate gamma_1
    #[arg(long, allow_negative_numbers = true, value_name = "DELTA")]
    delta: Option<f64>,

    /// Kerr shift chi, units of gamma_1
    #[arg(long = "chi-over-gamma", value_name = "CHI")]
    chi_over_gamma: Option<f64>,

    /// Drive amplitude xi, units of gamma_1
    #[arg(long, value_name = "XI")]
    xi: Option<f64>,

    /// Intrinsic backscattering strength J0, units of gamma_1
    #[arg(long, value_name = "J0")]
    j0: Option<f64>,

    /// Optical wavenumber along the rim, rad/um
    #[arg(long, value_name = "K")]
    k_opt: Option<f64>,

    /// Backscattering-free reference cavity: J0 = 0, no tip
    #[arg(long, conflicts_with_all = ["tip_at_decoupling", "r_nm", "phi_um"])]
    ideal: bool,

    /// Park the tip at its solved decoupling position (r*, phi_0)
    #[arg(long, conflicts_with_all = ["r_nm", "phi_um"])]
    tip_at_decoupling: bool,

    /// Tip-rim gap r, nm (placing a tip needs --phi-um too; for
    /// `solve blockade-weak` this is the gap at which to search)
    #[arg(long, value_name = "R")]
    r_nm: Option<f64>,

    /// Tip azimuth phi, um (placing a tip needs --r-nm too)
    #[arg(long, value_name = "PHI")]
    phi_um: Option<f64>,

    /// Tip coupling amplitude a_t at contact, units of gamma_1
    #[arg(long, value_name = "A_T")]
    a_t: Option<f64>,

    /// Tip coupling decay length 1/(2 beta_t), nm
    #[arg(long, value_name = "L")]
    inv_2beta_t_nm: Option<f64>,

    /// Tip phase gradient theta_t, rad/um of gap
    #[arg(long, allow_negative_numbers = true, value_name = "THETA_T")]
    theta_t: Option<f64>,

    /// Static backscattering phase theta, rad
    #[arg(long, allow_negative_numbers = true, value_name = "THETA")]
    theta: Option<f64>,

    /// Tip loss amplitude a_gamma at contact, units of gamma_1
    #[arg(long, value_name = "A_G")]
    a_gamma: Option<f64>,

    /// Tip loss decay length 1/(2 beta_gamma), nm
    #[arg(long, value_name = "L")]
    inv_2beta_gamma_nm: Option<f64>,

    /// Override a parameter by its JSON schema key, e.g.
    /// --set chi_over_gamma1=5.3 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    /// Dense Lindblad steady state (exact at the chosen cutoff)
    MasterEquation,
    /// Weak-drive closed forms and amplitude hierarchy
    Analytic,
    /// Both solvers side by side
    Both,
}

impl EngineArg {
    fn wants_master_equation(self) -> bool {
        self != EngineArg::Analytic
    }

    fn wants_analytic(self) -> bool {
        self != EngineArg::MasterEquation
    }
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    params: ParamArgs,

    /// Which solver(s) to report
    #[arg(long, value_enum, default_value_t = EngineArg::Both)]
    engine: EngineArg,

    /// Per-mode Fock cutoff for the master equation
    #[arg(long, default_value_t = 5, value_name = "N")]
    n_max: usize,

    /// Also compute g3(0) and g4(0) (master equation)
    #[arg(long)]
    higher_order: bool,
}

#[derive(Args)]
struct FigArgs {
    /// Figure table to produce: 1, 2, 3 or 4
    which: u8,

    /// Per-mode Fock cutoff for the master-equation columns
    #[arg(long, default_value_t = 3, value_name = "N")]
    n_max: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveTarget {
    /// Tip positions (r*, phi_l) that cancel the backscattering
    Decouple,
    /// Azimuths where the weak-drive interference blockade is exact
    BlockadeWeak,
}

#[derive(Args)]
struct SolveArgs {
    /// Which condition to solve
    target: SolveTarget,

    #[command(flatten)]
    params: ParamArgs,

    /// Highest decoupling branch l to report (phi_l per branch)
    #[arg(long, default_value_t = 1, value_name = "L")]
    l_max: usize,

    /// Azimuth search window for the blockade condition, um
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0.0, 0.5])]
    phi_window: Vec<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec as JSON (axes, base parameters, engine, n_max)
    #[arg(long, value_name = "FILE")]
    config: PathBuf,

    /// Base name of the output files (NAME.csv, NAME.spec.json)
    #[arg(long, default_value = "sweep", value_name = "NAME")]
    name: String,
}

/// A failure carrying the scripting exit code.
struct Failure {
    code: u8,
    message: String,
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_CONFIG, message: message.into() }
}

/// Maps a core error to the exit-code contract, naming the failing
/// operation in the message.
fn op_failure(operation: &str, e: &CoreError) -> Failure {
    let code = match e {
        CoreError::InvalidParameter(_) | CoreError::Json(_) => EXIT_CONFIG,
        CoreError::NoSolution(_) | CoreError::IdealNotBlockading => EXIT_NO_SOLUTION,
        _ => EXIT_SOLVER,
    };
    Failure { code, message: format!("{operation}: {e}") }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config_failure("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_failure(format!("configuring the thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Point(args) => cmd_point(&cli, args),
        Command::Fig(args) => cmd_fig(&cli, args),
        Command::Solve(args) => cmd_solve(&cli, args),
        Command::Sweep(args) => cmd_sweep(&cli, args),
    }
}

struct Resolved {
    params: SystemParams,
    /// Tip response model, resolved even when no tip is placed (used by
    /// the condition solvers).
    model: TipModel,
}

/// Builds parameters from config file, --set overrides, and typed flags;
/// `place_tip` enables the placement flags (point/sweep semantics).
fn resolve(args: &ParamArgs, place_tip: bool) -> Result<Resolved, Failure> {
    let mut params = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                config_failure(format!("reading {}: {e}", path.display()))
            })?;
            serde_json::from_str::<SystemParams>(&text).map_err(|e| {
                config_failure(format!("parsing {}: {e}", path.display()))
            })?
        }
        None => SystemParams::default(),
    };

    if !args.set.is_empty() {
        let mut doc = serde_json::to_value(params)
            .map_err(|e| config_failure(format!("serializing parameters: {e}")))?;
        let obj = doc.as_object_mut().expect("parameters serialize to an object");
        for pair in &args.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| config_failure(format!("--set needs KEY=VALUE, got '{pair}'")))?;
            if key == "tip" {
                return Err(config_failure(
                    "tip is a structured field; use the tip flags instead of --set",
                ));
            }
            if !obj.contains_key(key) {
                return Err(config_failure(format!("unknown parameter key '{key}'")));
            }
            let num: f64 = value
                .parse()
                .map_err(|_| config_failure(format!("--set {key}: '{value}' is not a number")))?;
            obj.insert(key.to_string(), num.into());
        }
        params = serde_json::from_value(doc)
            .map_err(|e| config_failure(format!("applying --set overrides: {e}")))?;
    }

    if let Some(v) = args.delta {
        params.delta = v;
    }
    if let Some(v) = args.chi_over_gamma {
        params.chi = v;
    }
    if let Some(v) = args.xi {
        params.xi = v;
    }
    if let Some(v) = args.j0 {
        params.j0 = v;
    }
    if let Some(v) = args.k_opt {
        params.k_opt_rad_per_um = v;
    }
    if args.ideal {
        params.j0 = 0.0;
        params.tip = None;
    }

    let mut model = params.tip.map(|t| t.model).unwrap_or_default();
    if let Some(v) = args.a_t {
        model.a_t = v;
    }
    if let Some(v) = args.inv_2beta_t_nm {
        model.inv_2beta_t_nm = v;
    }
    if let Some(v) = args.theta_t {
        model.theta_t = v;
    }
    if let Some(v) = args.theta {
        model.theta = v;
    }
    if let Some(v) = args.a_gamma {
        model.a_gamma = v;
    }
    if let Some(v) = args.inv_2beta_gamma_nm {
        model.inv_2beta_gamma_nm = v;
    }

    if place_tip {
        if args.tip_at_decoupling {
            let solution = analytic::decoupling_positions(
                params.j0,
                &model,
                params.k_opt_rad_per_um,
                0,
            )
            .map_err(|e| op_failure("solving the decoupling position", &e))?;
            let point = &solution.points[0];
            params.tip = Some(TipAttachment {
                model,
                geom: TipGeometry { r_nm: point.r_nm, phi_um: point.phi_um },
            });
        } else if args.r_nm.is_some() || args.phi_um.is_some() {
            let (Some(r_nm), Some(phi_um)) = (args.r_nm, args.phi_um) else {
                return Err(config_failure(
                    "placing a tip needs both --r-nm and --phi-um",
                ));
            };
            params.tip = Some(TipAttachment { model, geom: TipGeometry { r_nm, phi_um } });
        } else if let Some(tip) = params.tip.as_mut() {
            tip.model = model;
        }
    }

    params
        .validate()
        .map_err(|e| config_failure(format!("invalid parameters: {e}")))?;
    Ok(Resolved { params, model })
}

/// Human-readable number: fixed decimals in a mid range, scientific
/// elsewhere; exact zero prints as 0.
fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e-3 && v.abs() < 1e6 {
        format!("{v:.9}")
    } else {
        format!("{v:.6e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), fmt)
}

struct AnalyticPoint {
    n_cw: Option<f64>,
    g2_0: f64,
    p_mn: BTreeMap<(usize, usize), f64>,
}

fn analytic_point(params: &SystemParams) -> Result<AnalyticPoint, Failure> {
    let inputs = WeakDriveInputs::from_params(params);
    let amps = analytic::effective_amplitudes(&inputs)
        .map_err(|e| op_failure("weak-drive amplitude hierarchy", &e))?;
    let g2_0 = analytic::g2_closed_form(&inputs)
        .map_err(|e| op_failure("weak-drive g2 closed form", &e))?;
    let mut p_mn = BTreeMap::new();
    for key in PROB_KEYS {
        if let Some(p) = amps.probability(key.0, key.1) {
            p_mn.insert(key, p);
        }
    }
    Ok(AnalyticPoint { n_cw: amps.probability(1, 0), g2_0, p_mn })
}

fn cmd_point(cli: &Cli, args: &PointArgs) -> Result<(), Failure> {
    let resolved = resolve(&args.params, true)?;
    let params = resolved.params;

    let me: Option<CorrelationResult> = if args.engine.wants_master_equation() {
        Some(
            steady_correlations(
                &params,
                &CorrelationOptions { n_max: args.n_max, higher_order: args.higher_order },
            )
            .map_err(|e| op_failure("master-equation steady state", &e))?,
        )
    } else {
        None
    };
    let an: Option<AnalyticPoint> =
        if args.engine.wants_analytic() { Some(analytic_point(&params)?) } else { None };

    let abs_j = params.j_total().norm();
    let gamma_total = params.gamma_total();

    if !cli.quiet {
        println!("{:<26}{}", "delta/gamma1", fmt(params.delta));
        println!("{:<26}{}", "chi/gamma1", fmt(params.chi));
        println!("{:<26}{}", "xi/gamma1", fmt(params.xi));
        println!("{:<26}{}", "j0/gamma1", fmt(params.j0));
        match &params.tip {
            Some(tip) => {
                println!("{:<26}{}", "tip r (nm)", fmt(tip.geom.r_nm));
                println!("{:<26}{}", "tip phi (um)", fmt(tip.geom.phi_um));
            }
            None => println!("{:<26}{}", "tip", "none"),
        }
        println!("{:<26}{}", "|J|/gamma_total", fmt(abs_j / gamma_total));
        println!("{:<26}{}", "gamma_total/gamma1", fmt(gamma_total));
        println!();
        println!("{:<12}{:>22}{:>22}", "quantity", "master-equation", "analytic");
        let me_cell = |v: Option<f64>| -> String {
            me.as_ref().map_or_else(|| "-".to_string(), |_| fmt_opt(v))
        };
        let an_cell = |v: Option<f64>| -> String {
            an.as_ref().map_or_else(|| "-".to_string(), |_| fmt_opt(v))
        };
        println!(
            "{:<12}{:>22}{:>22}",
            "N_cw",
            me_cell(me.as_ref().map(|m| m.n_cw)),
            an_cell(an.as_ref().and_then(|a| a.n_cw)),
        );
        println!(
            "{:<12}{:>22}{:>22}",
            "g2(0)",
            me_cell(me.as_ref().and_then(|m| m.g2_0)),
            an_cell(an.as_ref().map(|a| a.g2_0)),
        );
        if args.higher_order {
            println!(
                "{:<12}{:>22}{:>22}",
                "g3(0)",
                me_cell(me.as_ref().and_then(|m| m.g3_0)),
                "-",
            );
            println!(
                "{:<12}{:>22}{:>22}",
                "g4(0)",
                me_cell(me.as_ref().and_then(|m| m.g4_0)),
                "-",
            );
        }
        for key in PROB_KEYS {
            println!(
                "{:<12}{:>22}{:>22}",
                format!("P({},{})", key.0, key.1),
                me_cell(me.as_ref().and_then(|m| m.p_mn.get(&key).copied())),
                an_cell(an.as_ref().and_then(|a| a.p_mn.get(&key).copied())),
            );
        }
    }

    let prob_map = |m: &BTreeMap<(usize, usize), f64>| -> BTreeMap<String, f64> {
        m.iter().map(|(&(a, b), &p)| (format!("{a},{b}"), p)).collect()
    };
    let record = serde_json::json!({
        "params": params,
        "n_max": args.n_max,
        "abs_j_over_gamma_total": abs_j / gamma_total,
        "gamma_total_over_gamma1": gamma_total,
        "master_equation": me.as_ref().map(|m| serde_json::json!({
            "n_cw": m.n_cw,
            "g2_0": m.g2_0,
            "g3_0": m.g3_0,
            "g4_0": m.g4_0,
            "p_mn": prob_map(&m.p_mn),
        })),
        "analytic": an.as_ref().map(|a| serde_json::json!({
            "n_cw": a.n_cw,
            "g2_0": a.g2_0,
            "p_mn": prob_map(&a.p_mn),
        })),
    });
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| op_failure("creating the output directory", &e.into()))?;
    let path = cli.out.join("point.json");
    let mut text = serde_json::to_string_pretty(&record)
        .map_err(|e| op_failure("serializing the point record", &e.into()))?;
    text.push('\n');
    std::fs::write(&path, text)
        .map_err(|e| op_failure("writing the point record", &e.into()))?;
    if !cli.quiet {
        println!();
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_fig(cli: &Cli, args: &FigArgs) -> Result<(), Failure> {
    let opts = FigureOptions { n_max: args.n_max };
    let result =
        figure_by_id(args.which, &opts).map_err(|e| op_failure("building the figure table", &e))?;
    let (csv_path, json_path) = result
        .write_to_dir(&cli.out)
        .map_err(|e| op_failure("writing the figure outputs", &e))?;
    if !cli.quiet {
        println!("wrote {}", csv_path.display());
        println!("wrote {}", json_path.display());
    }
    Ok(())
}

fn cmd_solve(cli: &Cli, args: &SolveArgs) -> Result<(), Failure> {
    let resolved = resolve(&args.params, false)?;
    let params = resolved.params;
    let model = resolved.model;

    match args.target {
        SolveTarget::Decouple => {
            let solution = analytic::decoupling_positions(
                params.j0,
                &model,
                params.k_opt_rad_per_um,
                args.l_max,
            )
            .map_err(|e| op_failure("solving the decoupling condition", &e))?;
            if !cli.quiet {
                println!("{:<8}{:>14}{:>14}{:>14}", "branch", "r (nm)", "phi (um)", "residual");
                for point in &solution.points {
                    println!(
                        "{:<8}{:>14.4}{:>14.6}{:>14.3e}",
                        point.branch, point.r_nm, point.phi_um, point.residual
                    );
                }
            }
        }
        SolveTarget::BlockadeWeak => {
            let r_nm = match args.params.r_nm {
                Some(r) => r,
                None => {
                    let decoupling = analytic::decoupling_positions(
                        params.j0,
                        &model,
                        params.k_opt_rad_per_um,
                        0,
                    )
                    .map_err(|e| op_failure("solving the decoupling gap", &e))?;
                    decoupling.points[0].r_nm
                }
            };
            let window = (args.phi_window[0], args.phi_window[1]);
            let solution = analytic::blockade_positions_weak(
                params.j0,
                &model,
                params.k_opt_rad_per_um,
                r_nm,
                window,
            )
            .map_err(|e| op_failure("solving the weak-drive blockade condition", &e))?;
            if !cli.quiet {
                println!("searching at r = {r_nm} nm");
                println!("{:<8}{:>14}{:>14}{:>14}", "branch", "r (nm)", "phi (um)", "residual");
                for point in &solution.points {
                    println!(
                        "{:<8}{:>14.4}{:>14.6}{:>14.3e}",
                        point.branch, point.r_nm, point.phi_um, point.residual
                    );
                }
            }
        }
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| config_failure(format!("reading {}: {e}", args.config.display())))?;
    let spec: SweepSpec = serde_json::from_str(&text)
        .map_err(|e| config_failure(format!("parsing {}: {e}", args.config.display())))?;
    let mut result = run_sweep(&spec).map_err(|e| op_failure("running the sweep", &e))?;
    result.name = args.name.clone();
    let (csv_path, json_path) = result
        .write_to_dir(&cli.out)
        .map_err(|e| op_failure("writing the sweep outputs", &e))?;
    if !cli.quiet {
        println!("wrote {}", csv_path.display());
        println!("wrote {}", json_path.display());
    }
    Ok(())
}
