//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rhombot_core::actuation::{self, ActuationParams};
use rhombot_core::geometry::deg;
use rhombot_core::kinematics::forward_kinematics;
use rhombot_core::{engine, Coupling, EdgeIndex, EdgeRef, FrameEvent, ModuleId, SimFrame};

use crate::error::{Error, ExitCode, Result};
use crate::measurement::{self, Chain};
use crate::scenario::{self, EngineDefaults, ModeDoc, ScenarioDoc};
use crate::server::{Server, DEFAULT_LISTEN, LISTEN_ENV};
use crate::{script, svg, trajectory};

pub const OUT_DIR_ENV: &str = "RHOMBOT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "rhombot", version, about = "Planar rhombic modular robot simulator")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario and list every problem found.
    Validate { scenario: PathBuf },
    /// Run a morphpivot script and write the trajectory, SVG frames and
    /// the final scenario.
    Simulate(SimulateArgs),
    /// End pose of a serial chain: the scenario's modules in listed order,
    /// leaving each through the given edge.
    Fk {
        scenario: PathBuf,
        /// Interface edges, 1..=3, one per chain module (E-prefix optional).
        #[arg(value_parser = parse_interface)]
        edges: Vec<u8>,
    },
    /// Solve the folding angles that bring two free edges together.
    LoopSolve(LoopSolveArgs),
    /// Drive versus holding torque table.
    Torque(TorqueArgs),
    /// Render a scenario or a trajectory to SVG.
    Render {
        /// Scenario (.toml) or trajectory (.jsonl).
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// RMSE between measured end points and forward kinematics.
    Evaluate {
        scenario: PathBuf,
        measurements: PathBuf,
        /// End module; the chain is its tree path from the root.
        #[arg(long)]
        end: u32,
    },
    /// Host a planning session over TCP.
    Serve {
        #[arg(long, env = LISTEN_ENV, default_value = DEFAULT_LISTEN)]
        listen: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Sequential,
    Simultaneous,
}

/// Overrides for the scenario's engine defaults.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub position_tolerance_mm: Option<f64>,
    #[arg(long)]
    pub angle_tolerance_deg: Option<f64>,
    #[arg(long)]
    pub morph_rate: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub clearance_mm: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

impl Overrides {
    fn apply(&self, d: &mut EngineDefaults) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut d.position_tolerance_mm, self.position_tolerance_mm);
        set(&mut d.angle_tolerance_deg, self.angle_tolerance_deg);
        set(&mut d.morph_rate, self.morph_rate);
        set(&mut d.dt, self.dt);
        set(&mut d.clearance_mm, self.clearance_mm);
        if let Some(m) = self.mode {
            d.mode = match m {
                ModeArg::Sequential => ModeDoc::Sequential,
                ModeArg::Simultaneous => ModeDoc::Simultaneous,
            };
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    pub script: PathBuf,
    /// Output directory; defaults to $RHOMBOT_OUT_DIR, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the per-frame SVGs.
    #[arg(long)]
    pub no_svg: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct LoopSolveArgs {
    pub scenario: PathBuf,
    /// Edges to bring together, `A:EA:B:EB` in physical labels.
    #[arg(long, value_parser = parse_pair)]
    pub connect: (EdgeRef, EdgeRef),
    /// Modules whose angles may change, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub free: Vec<u32>,
    /// All free modules share one angle.
    #[arg(long)]
    pub equal: bool,
}

#[derive(Debug, Args)]
pub struct TorqueArgs {
    /// Folding angles, degrees.
    #[arg(required = true, allow_negative_numbers = true)]
    pub theta_deg: Vec<f64>,
    /// Half side length, m.
    #[arg(long, default_value_t = 0.14)]
    pub a: f64,
    /// Servo torque, kg·cm.
    #[arg(long)]
    pub servo_kgcm: Option<f64>,
    /// Electromagnet holding force, N.
    #[arg(long)]
    pub fe: Option<f64>,
    /// Electromagnet mount position, m.
    #[arg(long)]
    pub b: Option<f64>,
    /// Friction torque, kg·cm.
    #[arg(long)]
    pub friction_kgcm: Option<f64>,
}

fn parse_interface(s: &str) -> std::result::Result<u8, String> {
    let digits = s.strip_prefix(['E', 'e']).unwrap_or(s);
    match digits.parse::<u8>() {
        Ok(k @ 1..=3) => Ok(k),
        _ => Err(format!("interface edge must be 1, 2 or 3, got {s:?}")),
    }
}

fn parse_pair(s: &str) -> std::result::Result<(EdgeRef, EdgeRef), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || format!("expected A:EA:B:EB, got {s:?}");
    if parts.len() != 4 {
        return Err(bad());
    }
    let n = |i: usize| u32::from_str(parts[i].trim()).map_err(|_| bad());
    let e = |i: usize| {
        let v = u8::from_str(parts[i].trim().trim_start_matches(['E', 'e'])).map_err(|_| bad())?;
        EdgeIndex::new(v).map_err(|e| e.to_string())
    };
    Ok((
        EdgeRef::new(ModuleId(n(0)?), e(1)?),
        EdgeRef::new(ModuleId(n(2)?), e(3)?),
    ))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Formats with six decimals, never printing a negative zero.
fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    }
}

fn write_svgs(dir: &Path, frames: &[SimFrame]) -> Result<()> {
    create_dir(dir)?;
    for (i, f) in frames.iter().enumerate() {
        write_file(&dir.join(format!("frame_{i:05}.svg")), &svg::render_frame(f))?;
    }
    Ok(())
}

fn validate(path: &Path, out: &mut dyn Write) -> Result<()> {
    let text = read(path)?;
    let doc = scenario::parse_syntax(&text)?;
    let problems = scenario::diagnose(&doc);
    if problems.is_empty() {
        scenario::to_tree(&doc)?;
        let _ = writeln!(out, "ok: {} modules, {} connections", doc.modules.len(), doc.connections.len());
        return Ok(());
    }
    for p in &problems {
        let _ = writeln!(out, "error: {p}");
    }
    Err(Error::semantic(
        path.display().to_string(),
        format!("{} problem(s) found", problems.len()),
    ))
}

fn load(path: &Path, overrides: &Overrides) -> Result<(ScenarioDoc, rhombot_core::KTree, rhombot_core::EngineConfig)> {
    let mut doc = scenario::parse_scenario(&read(path)?)?;
    overrides.apply(&mut doc.defaults);
    if let Some(e) = scenario::diagnose(&doc).into_iter().next() {
        return Err(e);
    }
    let tree = scenario::to_tree(&doc)?;
    let config = doc.defaults.to_config();
    Ok((doc, tree, config))
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let (doc, tree, config) = load(&args.scenario, &args.overrides)?;
    let ops = script::parse_script(&read(&args.script)?)?.to_ops(config.morph_rate)?;
    let result = engine::run_script(&tree, &ops, &config);
    let frames = if result.frames.is_empty() {
        vec![SimFrame::capture(&result.tree, 0.0, FrameEvent::Morph)]
    } else {
        result.frames.clone()
    };

    let dir = out_dir(args.out);
    create_dir(&dir)?;
    let traj = dir.join("trajectory.jsonl");
    let file = fs::File::create(&traj).map_err(|e| Error::io(&traj, e))?;
    trajectory::write_frames(BufWriter::new(file), &frames).map_err(|e| Error::io(&traj, e))?;
    if !args.no_svg {
        write_svgs(&dir.join("frames"), &frames)?;
    }
    let final_doc = scenario::from_tree(&result.tree, doc.defaults);
    write_file(&dir.join("final.toml"), &scenario::serialize_scenario(&final_doc))?;

    for (i, r) in result.reports.iter().enumerate() {
        let _ = writeln!(
            out,
            "op {i}: offset {:.6} mm, {:.6} deg, {}",
            r.position_offset * 1000.0,
            r.angular_offset.to_degrees(),
            if r.pass { "pass" } else { "fail" }
        );
    }
    let _ = writeln!(out, "{} frames written to {}", frames.len(), dir.display());
    match result.failure {
        Some((index, source)) => Err(Error::Partial { index, source }),
        None => Ok(()),
    }
}

fn fk(path: &Path, edges: &[u8], out: &mut dyn Write) -> Result<()> {
    let doc = scenario::parse_scenario(&read(path)?)?;
    let tree = scenario::to_tree(&doc)?;
    if edges.len() > doc.modules.len() {
        return Err(Error::Usage(format!(
            "{} interface edges for {} modules",
            edges.len(),
            doc.modules.len()
        )));
    }
    let chain = doc
        .modules
        .iter()
        .zip(edges)
        .map(|(m, k)| {
            let s = *tree.module(ModuleId(m.id))?;
            Ok((s, EdgeIndex::new(*k)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let p = forward_kinematics(&chain);
    let _ = writeln!(out, "{} {} {}", fixed6(p.yaw.to_degrees()), fixed6(p.x), fixed6(p.y));
    Ok(())
}

fn loop_solve(args: LoopSolveArgs, out: &mut dyn Write) -> Result<()> {
    let doc = scenario::parse_scenario(&read(&args.scenario)?)?;
    let tree = scenario::to_tree(&doc)?;
    let free: Vec<ModuleId> = args.free.iter().map(|m| ModuleId(*m)).collect();
    let coupling = if args.equal { Coupling::EqualTheta } else { Coupling::Independent };
    let sol = engine::plan_alignment(&tree, args.connect, &free, coupling)?;
    for (id, theta) in &sol.thetas {
        let _ = writeln!(out, "{id} {}", fixed6(theta.to_degrees()));
    }
    let _ = writeln!(out, "residual {:.3e} after {} iterations", sol.residual_norm, sol.iterations);
    Ok(())
}

fn torque(args: TorqueArgs, out: &mut dyn Write) -> Result<()> {
    let d = ActuationParams::default();
    let p = ActuationParams {
        t: args.servo_kgcm.map_or(d.t, actuation::kgcm_to_nm),
        fe: args.fe.unwrap_or(d.fe),
        b: args.b.unwrap_or(d.b),
        eps: args.friction_kgcm.map_or(d.eps, actuation::kgcm_to_nm),
        ..d
    };
    let invalid = |e: actuation::ActuationError| Error::semantic("torque", e.to_string());
    p.validate().map_err(invalid)?;
    let mf = actuation::resisting_torque(&p, args.a).map_err(invalid)?;
    let _ = writeln!(out, "theta_deg  M_d_Nm  M_f_Nm  feasible");
    for th in &args.theta_deg {
        let feasible = actuation::can_disconnect_single_sided(&p, args.a, deg(*th))
            .map_err(|e| Error::semantic("theta_deg", e.to_string()))?;
        let md = actuation::actuation_torque(&p, args.a, deg(*th));
        let _ = writeln!(
            out,
            "{th:9.3}  {md:6.2}  {mf:6.3}  {}",
            if feasible { "yes" } else { "no" }
        );
    }
    match actuation::disconnect_threshold(&p, args.a).map_err(invalid)? {
        Some(t) => writeln!(out, "threshold {:.3} deg", t.to_degrees()),
        None => writeln!(out, "threshold none"),
    }
    .map_err(|e| Error::io("<stdout>", e))
}

fn render(input: &Path, dir: Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    let frames = if input.extension().is_some_and(|e| e == "toml") {
        let doc = scenario::parse_scenario(&read(input)?)?;
        vec![SimFrame::capture(&scenario::to_tree(&doc)?, 0.0, FrameEvent::Morph)]
    } else {
        let file = fs::File::open(input).map_err(|e| Error::io(input, e))?;
        trajectory::read_frames(BufReader::new(file))?
    };
    if frames.is_empty() {
        return Err(Error::semantic("input", "no frames to render"));
    }
    let dir = out_dir(dir);
    write_svgs(&dir, &frames)?;
    let _ = writeln!(out, "{} SVG files written to {}", frames.len(), dir.display());
    Ok(())
}

fn evaluate(path: &Path, csv: &Path, end: u32, out: &mut dyn Write) -> Result<()> {
    let doc = scenario::parse_scenario(&read(path)?)?;
    let tree = scenario::to_tree(&doc)?;
    let chain = Chain::from_tree(&tree, ModuleId(end))?;
    let file = fs::File::open(csv).map_err(|e| Error::io(csv, e))?;
    let series = measurement::read_series(BufReader::new(file))?;
    let (rx, ry) = measurement::evaluate_rmse(&series, &chain)?;
    let _ = writeln!(
        out,
        "rows {}  rmse_x {:.3} mm  rmse_y {:.3} mm",
        series.rows.len(),
        rx * 1000.0,
        ry * 1000.0
    );
    Ok(())
}

fn serve(listen: &str, out: &mut dyn Write) -> Result<()> {
    let server = Server::bind(listen).map_err(|e| Error::io(listen, e))?;
    let addr = server.local_addr().map_err(|e| Error::io(listen, e))?;
    let _ = writeln!(out, "listening on {addr}");
    let _ = out.flush();
    server.run().map_err(|e| Error::io(listen, e))
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Validate { scenario } => validate(&scenario, out),
        Command::Simulate(args) => simulate(args, out),
        Command::Fk { scenario, edges } => fk(&scenario, &edges, out),
        Command::LoopSolve(args) => loop_solve(args, out),
        Command::Torque(args) => torque(args, out),
        Command::Render { input, out: dir } => render(&input, dir, out),
        Command::Evaluate {
            scenario,
            measurements,
            end,
        } => evaluate(&scenario, &measurements, end, out),
        Command::Serve { listen } => serve(&listen, out),
    }
}

/// Parses `args` (program name first), runs the command and reports errors
/// on `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return ExitCode::Ok;
                }
                _ => ExitCode::Usage,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(cli, out) {
        Ok(()) => ExitCode::Ok,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
