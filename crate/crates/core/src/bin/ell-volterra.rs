use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use ell_volterra::classify::{
    check_face_invariance, check_positivity_invariance, detect_ell, enumerate_extremals,
    extremal_count, ExtremalClass,
};
use ell_volterra::dynamics::{
    barycentric_grid, detect_cycle, find_fixed_points, omega_limit_estimate, orbit, OmegaLimit,
};
use ell_volterra::families::{
    cycle_family, m2_analyze, m2_operator, m3_analyze, m3_operator, CycleSpec, M2Params,
    M3SymParams,
};
use ell_volterra::io::{
    operator_from_json, operator_to_json, orbit_csv, parse_point, portrait_csv, read_operator,
    write_text,
};
use ell_volterra::report::{self, envelope, to_pretty};
use ell_volterra::{CubicMatrix, QsoError, Result, SimplexPoint};

/// Analyse ℓ-Volterra quadratic stochastic operators.
#[derive(Parser)]
#[command(name = "ell-volterra", version)]
struct Cli {
    /// Seed for every sampling-based check.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OperatorArg {
    /// Operator JSON file, or `-` for standard input.
    operator: String,
}

#[derive(Args)]
struct OutArg {
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check that an operator file is a valid QSO.
    Validate(OperatorArg),
    /// Detect ell and the Volterra coordinates.
    Classify {
        #[command(flatten)]
        op: OperatorArg,
        /// Also test face and positivity invariance by sampling.
        #[arg(long)]
        invariance: bool,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Image of one point.
    Apply {
        #[command(flatten)]
        op: OperatorArg,
        /// Comma-separated coordinates.
        #[arg(long)]
        x: String,
    },
    /// Iterate from a starting point.
    Orbit {
        #[command(flatten)]
        op: OperatorArg,
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: OutArg,
    },
    /// Locate and classify fixed points.
    FixedPoints {
        #[command(flatten)]
        op: OperatorArg,
        /// Points per edge of the barycentric start grid.
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
    /// Periodic orbit and limit-set estimate from a starting point.
    Cycles {
        #[command(flatten)]
        op: OperatorArg,
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 64)]
        max_period: usize,
        #[arg(long, default_value_t = 256)]
        window: usize,
    },
    /// Count or list the 0/1 operators.
    #[command(subcommand)]
    Extremals(Extremals),
    /// Build an operator from a named family.
    #[command(subcommand)]
    Family(Family),
    /// Limit-set label for every start of a barycentric grid, as CSV.
    Portrait {
        #[command(flatten)]
        op: OperatorArg,
        /// Points per simplex edge; m = 3 gives N(N+1)/2 rows.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long, default_value_t = 2000)]
        burn_in: usize,
        #[arg(long, default_value_t = 64)]
        window: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct ClassArgs {
    #[arg(long)]
    m: usize,
    /// Volterra condition imposed on the first ELL coordinates.
    #[arg(long, conflicts_with = "all", required_unless_present = "all")]
    ell: Option<usize>,
    /// All QSOs, no Volterra condition.
    #[arg(long)]
    all: bool,
}

impl ClassArgs {
    fn class(&self) -> ExtremalClass {
        match self.ell {
            Some(ell) if !self.all => ExtremalClass::Ell(ell),
            _ => ExtremalClass::All,
        }
    }
}

#[derive(Subcommand)]
enum Extremals {
    /// Print the number of extremal operators.
    Count(ClassArgs),
    /// Write every extremal operator to its own JSON file (m <= 4).
    Enumerate {
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FamilyOut {
    /// Write the operator JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the report JSON here instead of standard error.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Family {
    /// Vertices permuted in prescribed cycles.
    Cycle {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        ell: usize,
        /// One cycle as comma-separated 1-based vertices; repeatable.
        #[arg(long = "cycle", required = true)]
        cycles: Vec<String>,
        #[command(flatten)]
        out: FamilyOut,
    },
    /// Two-species 1-Volterra operators.
    M2 {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        c: f64,
        /// Include the closed-form analysis in the report.
        #[arg(long)]
        analyze: bool,
        #[command(flatten)]
        out: FamilyOut,
    },
    /// Symmetric three-species 2-Volterra operators.
    M3 {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        analyze: bool,
        /// Tolerance for treating a = 2b as the fixed-line regime.
        #[arg(long, default_value_t = 0.0)]
        a2b_tol: f64,
        #[command(flatten)]
        out: FamilyOut,
    },
}

fn load(op: &OperatorArg) -> Result<CubicMatrix> {
    if op.operator == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|source| QsoError::Io {
                path: "<stdin>".into(),
                source,
            })?;
        operator_from_json(&text)
    } else {
        read_operator(Path::new(&op.operator))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| QsoError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn emit_json(kind: &str, body: Value) -> Result<()> {
    emit(None, &to_pretty(&envelope(kind, body)))
}

fn point_for(v: &CubicMatrix, text: &str) -> Result<SimplexPoint> {
    let x = parse_point(text)?;
    if x.dim() != v.m() {
        return Err(QsoError::DimensionMismatch {
            expected: v.m(),
            got: x.dim(),
        });
    }
    Ok(x)
}

fn emit_family(v: &CubicMatrix, report: Value, out: &FamilyOut) -> Result<()> {
    emit(out.out.as_deref(), &operator_to_json(v))?;
    let text = to_pretty(&report);
    match &out.report {
        Some(path) => write_text(path, &text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn parse_cycle(text: &str, m: usize) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            let i: usize = t
                .trim()
                .parse()
                .map_err(|e| QsoError::Argument(format!("bad vertex {t:?}: {e}")))?;
            if i == 0 || i > m {
                return Err(QsoError::IndexOutOfRange {
                    index: i.wrapping_sub(1),
                    m,
                });
            }
            Ok(i - 1)
        })
        .collect()
}

fn classify(v: &CubicMatrix, invariance: bool, samples: usize, seed: u64) -> Result<Value> {
    let c = detect_ell(v);
    let mut body = report::classification(&c);
    if invariance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ell = c.ell.min(10);
        let mut faces = Vec::new();
        for mask in 1u32..(1 << ell) {
            let face: Vec<usize> = (0..ell).filter(|i| mask & (1 << i) != 0).collect();
            faces.push(report::invariance(
                &face,
                &check_face_invariance(v, &face, samples, &mut rng)?,
            ));
        }
        let all: Vec<usize> = (0..v.m()).collect();
        let positive = check_positivity_invariance(v, &all, samples, &mut rng)?;
        body["face_invariance"] = json!(faces);
        body["interior_positivity"] = report::positivity(&all, &positive);
    }
    Ok(body)
}

fn enumerate(class: ExtremalClass, m: usize, dir: &Path) -> Result<()> {
    let ops = enumerate_extremals(m, class)?;
    std::fs::create_dir_all(dir).map_err(|source| QsoError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let width = ops.len().to_string().len();
    let tag = match class {
        ExtremalClass::Ell(ell) => format!("m{m}_ell{ell}"),
        ExtremalClass::All => format!("m{m}_all"),
    };
    let mut index = Vec::with_capacity(ops.len());
    for (n, v) in ops.iter().enumerate() {
        let name = format!("{tag}_{n:0width$}.json");
        write_text(&dir.join(&name), &operator_to_json(v))?;
        index.push(json!({ "file": name, "detected_ell": detect_ell(v).ell }));
    }
    let body = json!({
        "m": m,
        "class": tag,
        "count": ops.len(),
        "operators": index,
    });
    write_text(
        &dir.join("index.json"),
        &to_pretty(&envelope("extremal-index", body)),
    )?;
    emit(None, &format!("{}\n", ops.len()))
}

fn portrait(v: &CubicMatrix, grid: usize, burn_in: usize, window: usize) -> Result<String> {
    if grid == 0 {
        return Err(QsoError::Argument("--grid must be at least 1".into()));
    }
    let starts: Vec<SimplexPoint> = barycentric_grid(v.m(), grid - 1)
        .into_iter()
        .map(SimplexPoint::new)
        .collect::<Result<_>>()?;
    let limits: Vec<OmegaLimit> = starts
        .par_iter()
        .map(|x| omega_limit_estimate(v, x, burn_in, window))
        .collect::<Result<_>>()?;
    let rows: Vec<(SimplexPoint, OmegaLimit)> = starts.into_iter().zip(limits).collect();
    Ok(portrait_csv(v.m(), &rows))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(op) => {
            let v = load(&op)?;
            emit_json("validation", json!({ "valid": true, "m": v.m() }))
        }
        Command::Classify {
            op,
            invariance,
            samples,
        } => {
            let v = load(&op)?;
            emit_json(
                "classification",
                classify(&v, invariance, samples, cli.seed)?,
            )
        }
        Command::Apply { op, x } => {
            let v = load(&op)?;
            let x = point_for(&v, &x)?;
            let y = v.apply(&x)?;
            emit_json("apply", json!({ "x": x.coords(), "image": y.coords() }))
        }
        Command::Orbit {
            op,
            x0,
            n,
            format,
            out,
        } => {
            let v = load(&op)?;
            let x0 = point_for(&v, &x0)?;
            let o = orbit(&v, &x0, n)?;
            let text = match format {
                Format::Csv => orbit_csv(&o),
                Format::Json => to_pretty(&envelope(
                    "orbit",
                    json!({ "points": o.points.iter().map(|p| p.coords()).collect::<Vec<_>>() }),
                )),
            };
            emit(out.out.as_deref(), &text)
        }
        Command::FixedPoints { op, grid } => {
            let v = load(&op)?;
            emit_json(
                "fixed-points",
                report::fixed_point_search(&find_fixed_points(&v, grid)?),
            )
        }
        Command::Cycles {
            op,
            x0,
            burn_in,
            max_period,
            window,
        } => {
            let v = load(&op)?;
            let x0 = point_for(&v, &x0)?;
            let cycle = detect_cycle(&v, &x0, burn_in, max_period)?;
            let omega = omega_limit_estimate(&v, &x0, burn_in, window)?;
            emit_json(
                "cycles",
                json!({
                    "cycle": report::cycle(cycle.as_ref()),
                    "omega_limit": report::omega_limit(&omega),
                }),
            )
        }
        Command::Extremals(Extremals::Count(args)) => {
            let n = extremal_count(args.m, args.class())?;
            emit(None, &format!("{n}\n"))
        }
        Command::Extremals(Extremals::Enumerate { class, out }) => {
            enumerate(class.class(), class.m, &out)
        }
        Command::Family(Family::Cycle {
            m,
            ell,
            cycles,
            out,
        }) => {
            let cycles = cycles
                .iter()
                .map(|c| parse_cycle(c, m))
                .collect::<Result<Vec<_>>>()?;
            let spec = CycleSpec::new(m, ell, cycles)?;
            let v = cycle_family(&spec)?;
            let body = json!({
                "family": "cycle",
                "m": m,
                "ell": ell,
                "cycles": spec.cycles.iter().map(|c| c.iter().map(|i| i + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "classification": report::classification(&detect_ell(&v)),
            });
            emit_family(&v, envelope("family", body), &out)
        }
        Command::Family(Family::M2 { a, c, analyze, out }) => {
            let p = M2Params::new(a, c)?;
            let v = m2_operator(&p);
            let body = if analyze {
                report::m2(&m2_analyze(&p)?)
            } else {
                json!({ "family": "m2", "params": { "a": p.a, "b": p.b(), "c": p.c, "d": p.d() } })
            };
            emit_family(&v, envelope("family", body), &out)
        }
        Command::Family(Family::M3 {
            a,
            b,
            c,
            analyze,
            a2b_tol,
            out,
        }) => {
            let p = M3SymParams::new(a, b, c)?;
            let v = m3_operator(&p);
            let body = if analyze {
                report::m3(&m3_analyze(&p, a2b_tol)?)
            } else {
                json!({ "family": "m3", "params": { "a": p.a, "b": p.b, "c": p.c } })
            };
            emit_family(&v, envelope("family", body), &out)
        }
        Command::Portrait {
            op,
            grid,
            burn_in,
            window,
            out,
        } => {
            let v = load(&op)?;
            emit(out.out.as_deref(), &portrait(&v, grid, burn_in, window)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
