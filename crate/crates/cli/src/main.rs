use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frontblock::analytics::{
    cone_drive_ndim, cone_threshold_slope, junction_drive_r, junction_min_drive, junction_trapping_width,
    mode_decay_rate, rescaled_threshold, trapping_position, ConeModel, JunctionModel, ModeDecay, CRITICAL_WIDTH,
};
use frontblock::config::Config;
use frontblock::radial::{compare_to_kink, relax_solve, InitialGuess, OriginCondition, RadialProblem};
use frontblock::sweep::phase_boundary;
use frontblock::{parse_config, run, run_sweep, Error, Outcome, ScenarioKind, ScenarioSpec};

#[derive(Parser)]
#[command(name = "frontblock", version, about = "Bistable fronts meeting geometric obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario
    Run(RunArgs),
    /// Run a one- or two-axis parameter sweep
    Sweep(SweepArgs),
    /// Tables from the reduced model
    Predict {
        #[command(subcommand)]
        table: PredictTable,
    },
    /// Radially symmetric static state by relaxation
    Radial(RadialArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Configuration file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Scenario kind when no configuration file is given
    #[arg(short, long)]
    kind: Option<String>,
    /// Override a configuration key, e.g. `--set theta=0.75` or `--set dx=0.2`
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Config, Error> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(&fs::read_to_string(path)?)?,
            None => {
                let kind: ScenarioKind = self
                    .kind
                    .as_deref()
                    .ok_or_else(|| Error::InvalidParameter {
                        name: "kind",
                        reason: "give --config or --kind".into(),
                    })?
                    .parse()?;
                Config::for_spec(ScenarioSpec::new(kind))
            }
        };
        if self.config.is_some() {
            if let Some(kind) = &self.kind {
                cfg.apply_override(&format!("kind={kind}"))?;
            }
        }
        for s in &self.set {
            cfg.apply_override(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Directory for diag.csv and outcomes.csv
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Worker threads
    #[arg(short, long)]
    workers: Option<usize>,
    /// Output directory (overrides the configuration)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PredictTable {
    /// Minimum drive and trapping position for junctions
    Junction {
        #[arg(long, value_delimiter = ',', default_value = "4")]
        w1: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "20,30")]
        w2: Vec<f64>,
        #[arg(short, long, default_value_t = 0.3)]
        a: f64,
        /// Print r(h) on this many points of [-10, 10] instead
        #[arg(long)]
        curve: Option<usize>,
    },
    /// Drive into a cone and the predicted outcome
    Cone {
        #[arg(long, value_delimiter = ',', default_value = "2,4")]
        w: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.75,1.4")]
        theta: Vec<f64>,
        #[arg(short, long, value_delimiter = ',', default_value = "0.3")]
        a: Vec<f64>,
        #[arg(short, long, default_value_t = 2)]
        n: u32,
    },
    /// Crossing thresholds: cone angle per width and junction trapping width
    Threshold {
        #[arg(short, long, value_delimiter = ',', default_value = "0.2,0.25,0.3,0.35,0.4,0.45")]
        a: Vec<f64>,
        #[arg(long, default_value_t = 4.0)]
        w1: f64,
        /// Nonlinearity scale for the rescaled width
        #[arg(short, long, default_value_t = 1.0)]
        s: f64,
    },
    /// Decay rates of transverse modes
    Modes {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6.283185307179586,8")]
        w: Vec<f64>,
        #[arg(short, long, default_value_t = 0.0)]
        k: f64,
        #[arg(short, long, default_value_t = 3)]
        m: u32,
    },
}

#[derive(Args)]
struct RadialArgs {
    #[arg(short = 'L', long = "radius", default_value_t = 10.0)]
    l: f64,
    #[arg(short, long, default_value_t = 400)]
    n: usize,
    #[arg(short = 'K', long = "relax", default_value_t = 2.0)]
    k: f64,
    #[arg(short, long, default_value_t = 0.3)]
    a: f64,
    /// Pinned value at the origin
    #[arg(long, default_value_t = 1.0)]
    u0: f64,
    /// Impose u_r = 0 at the origin instead of pinning u
    #[arg(long)]
    neumann: bool,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Start from the comparison sigmoid instead of zero
    #[arg(long)]
    sigmoid_start: bool,
    #[arg(long, default_value_t = 0.0)]
    compare_center: f64,
    #[arg(long, default_value_t = 0.5)]
    compare_width: f64,
    /// CSV file for the profile (`r,u`); stdout when absent
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(fs::File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_run(args: &RunArgs) -> Result<bool, Error> {
    let cfg = args.scenario.load()?;
    let s = cfg.scenario()?;
    let rec = run(&s, &cfg.solver.config_for(&s))?;
    let last = rec.last();
    if let Some(dir) = &args.output {
        fs::create_dir_all(dir)?;
        rec.write_csv(BufWriter::new(fs::File::create(dir.join("diag.csv"))?))?;
        let mut out = BufWriter::new(fs::File::create(dir.join("outcomes.csv"))?);
        writeln!(out, "kind,outcome,reaction_integral,front_x,t")?;
        writeln!(
            out,
            "{},{},{},{},{}",
            s.kind(),
            rec.outcome,
            last.reaction_integral,
            last.front_x,
            last.t
        )?;
        out.flush()?;
    }
    println!(
        "{} {}: {} (t = {}, front_x = {:.3}, mean_u = {:.6}, drive = {:.3e})",
        s.kind(),
        format_params(cfg.scenario.params()),
        rec.outcome,
        last.t,
        last.front_x,
        last.mean_u,
        last.reaction_integral
    );
    Ok(true)
}

fn format_params(p: &std::collections::BTreeMap<String, f64>) -> String {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool, Error> {
    let mut cfg = args.scenario.load()?;
    let sw = cfg.sweep.get_or_insert_with(Default::default);
    if let Some(w) = args.workers {
        sw.workers = Some(w);
    }
    if let Some(o) = &args.output {
        sw.output = Some(o.clone());
    }
    let spec = cfg.sweep_spec()?;
    let table = run_sweep(&spec)?;
    if spec.output().is_none() {
        table.write_csv(BufWriter::new(io::stdout().lock()))?;
    }
    if spec.axes().len() == 2 {
        let b = phase_boundary(&table, &spec.axes()[1].name)?;
        for w in b.warnings() {
            eprintln!("warning: {w}");
        }
        if let Some(dir) = spec.output() {
            b.write_csv(BufWriter::new(fs::File::create(dir.join("boundary.csv"))?))?;
        }
        if let Some((slope, resid)) = b.fit_through_origin() {
            eprintln!("boundary slope {slope:.4} (max residual {resid:.3})");
        }
    }
    let count = |o: Outcome| table.rows.iter().filter(|r| r.outcome() == Some(o)).count();
    eprintln!(
        "{} points: {} crossed, {} blocked, {} undecided, {} errors",
        table.rows.len(),
        count(Outcome::Crossed),
        count(Outcome::Blocked),
        count(Outcome::Undecided),
        table.errors()
    );
    for r in table.rows.iter().filter(|r| r.result.is_err()) {
        eprintln!("error at {:?}: {}", r.params, r.result.as_ref().unwrap_err());
    }
    Ok(table.errors() == 0)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn cmd_predict(table: &PredictTable) -> Result<bool, Error> {
    let mut out = BufWriter::new(io::stdout().lock());
    match table {
        PredictTable::Junction { w1, w2, a, curve } => {
            if let Some(n) = curve {
                let n = (*n).max(2);
                write!(out, "h")?;
                for (x, y) in w1.iter().flat_map(|x| w2.iter().map(move |y| (x, y))) {
                    write!(out, ",r_{x}_{y}")?;
                }
                writeln!(out)?;
                let models: Vec<JunctionModel> = w1
                    .iter()
                    .flat_map(|x| w2.iter().map(move |y| JunctionModel::new(*x, *y, *a)))
                    .collect::<Result<_, _>>()?;
                for i in 0..n {
                    let h = -10.0 + 20.0 * i as f64 / (n - 1) as f64;
                    write!(out, "{h}")?;
                    for m in &models {
                        write!(out, ",{}", junction_drive_r(h, m))?;
                    }
                    writeln!(out)?;
                }
            } else {
                writeln!(out, "w1,w2,a,min_drive,h_min,trapping_position,predicted")?;
                for &x in w1 {
                    for &y in w2 {
                        let m = JunctionModel::new(x, y, *a)?;
                        let (h_min, r_min) = junction_min_drive(&m);
                        let h = trapping_position(&m);
                        let o = if h.is_some() {
                            Outcome::Blocked
                        } else {
                            Outcome::Crossed
                        };
                        writeln!(out, "{x},{y},{a},{r_min},{},{},{o}", opt(h_min), opt(h))?;
                    }
                }
            }
        }
        PredictTable::Cone { w, theta, a, n } => {
            writeln!(out, "w,theta,a,n,drive,predicted")?;
            for &a in a {
                for &w in w {
                    for &t in theta {
                        let r = cone_drive_ndim(&ConeModel::with_dimension(w, t, a, *n)?);
                        let o = if r > 0.0 { Outcome::Crossed } else { Outcome::Blocked };
                        writeln!(out, "{w},{t},{a},{n},{r},{o}")?;
                    }
                }
            }
        }
        PredictTable::Threshold { a, w1, s } => {
            writeln!(out, "a,cone_slope,junction_w2_threshold,rescaled_w1")?;
            let rw = rescaled_threshold(*w1, *s)?;
            for &a in a {
                let slope = cone_threshold_slope(a).ok();
                let w2 = junction_trapping_width(*w1, a)?;
                writeln!(out, "{a},{},{w2},{rw}", opt(slope))?;
            }
        }
        PredictTable::Modes { w, k, m } => {
            writeln!(out, "w,k,m,rate,above_critical")?;
            for &w in w {
                for mi in 1..=*m {
                    let r = mode_decay_rate(&ModeDecay::new(w, *k, mi)?);
                    writeln!(out, "{w},{k},{mi},{r},{}", w >= CRITICAL_WIDTH)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(true)
}

fn cmd_radial(args: &RadialArgs) -> Result<bool, Error> {
    let origin = if args.neumann {
        OriginCondition::Neumann
    } else {
        OriginCondition::Pinned(args.u0)
    };
    let initial = if args.sigmoid_start {
        InitialGuess::Sigmoid {
            center: args.compare_center,
            width: args.compare_width,
        }
    } else {
        InitialGuess::Zero
    };
    let p = RadialProblem {
        l: args.l,
        n: args.n,
        a: args.a,
        k: args.k,
        origin,
        max_iter: args.max_iter,
        tol: args.tol,
        initial,
    };
    let sol = relax_solve(&p)?;
    sol.write_csv(open_out(args.output.as_deref())?)?;
    eprintln!(
        "converged in {} iterations (residual {:.2e}); u(L) = {:.6}; L-inf distance to sigmoid({}, {}) = {:.4}",
        sol.iterations,
        sol.residual,
        sol.u.last().copied().unwrap_or(f64::NAN),
        args.compare_center,
        args.compare_width,
        compare_to_kink(&sol, args.compare_center, args.compare_width)
    );
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Predict { table } => cmd_predict(table),
        Command::Radial(a) => cmd_radial(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
