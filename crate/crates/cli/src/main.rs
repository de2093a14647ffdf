//! `pucci` — solver and certification CLI for weakly coupled systems of
//! Pucci-operator equations.
//!
//! Subcommands:
//!
//! * `thresholds` — threshold constants for a window `0 < a < b`; exits 0
//!   exactly when the certified window is nonempty.
//! * `solve`      — minimal/maximal solutions between the small subsolution
//!   and the large supersolution.
//! * `multiplicity` — full three-solution certification at a given `mu`.
//! * `sweep`      — geometric `mu` scan writing plot-ready CSV.
//!
//! Exit codes: 0 success, 2 configuration or argument errors, 3 gap-condition
//! violation (`thresholds`), 4 barrier or pipeline failure (`solve`, `sweep`),
//! 5 `mu` outside the certified window (`multiplicity`), 6 certificate
//! failure (`multiplicity`).

mod config;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{Config, Loaded};
use pucci_core::iterate::{
    find_multiplicity_with, monotone_solve, Direction, IterateError, OrderInterval,
};
use pucci_core::nonlinearity::{audit_c1, audit_c2, audit_c3, Domain};
use pucci_core::radial::SystemState;
use pucci_core::subsuper::{check_ordering, BarrierWorkspace};

const EXIT_OK: i32 = 0;
const EXIT_CONFIG: i32 = 2;
const EXIT_GAP: i32 = 3;
const EXIT_PIPELINE: i32 = 4;
const EXIT_MU_WINDOW: i32 = 5;
const EXIT_CERTIFICATE: i32 = 6;

#[derive(Parser)]
#[command(name = "pucci", version, about = "Solver and certification toolkit for Pucci-operator systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute threshold constants for the window 0 < a < b
    Thresholds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_meta: bool,
    },
    /// Compute the minimal and maximal solutions for one mu
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_meta: bool,
    },
    /// Certify the three-solution hypotheses at one mu
    Multiplicity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_meta: bool,
    },
    /// Scan mu geometrically and record minimal-solution norms
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mu_min: f64,
        #[arg(long)]
        mu_max: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_meta: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Thresholds { config, a, b, out, no_meta } => {
            cmd_thresholds(&config, a, b, out.as_deref(), no_meta)
        }
        Command::Solve { config, mu, out, no_meta } => {
            cmd_solve(&config, mu, out.as_deref(), no_meta)
        }
        Command::Multiplicity { config, mu, a, b, out, no_meta } => {
            cmd_multiplicity(&config, mu, a, b, out.as_deref(), no_meta)
        }
        Command::Sweep { config, mu_min, mu_max, steps, out, no_meta } => {
            cmd_sweep(&config, mu_min, mu_max, steps, &out, no_meta)
        }
    };
    std::process::exit(code);
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn emit(mut value: Value, out: Option<&Path>, no_meta: bool) -> std::io::Result<()> {
    if !no_meta {
        if let Value::Object(map) = &mut value {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            map.insert(
                "meta".into(),
                json!({
                    "tool": "pucci",
                    "version": env!("CARGO_PKG_VERSION"),
                    "unix_time": now,
                }),
            );
        }
    }
    let text = format!("{}\n", serde_json::to_string_pretty(&value)?);
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Sibling path for a profile CSV next to the JSON report.
fn sibling(out: Option<&Path>, name: &str) -> Option<PathBuf> {
    let out = out?;
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    Some(out.with_file_name(format!("{stem}_{name}.csv")))
}

fn write_profiles(state: &SystemState, out: Option<&Path>, tag: &str) -> std::io::Result<()> {
    for (i, field) in state.fields.iter().enumerate() {
        if let Some(path) = sibling(out, &format!("{tag}_u{}", i + 1)) {
            let mut buf = Vec::new();
            field.write_csv(&mut buf)?;
            std::fs::write(path, buf)?;
        }
    }
    Ok(())
}

fn load(config_path: &Path) -> Result<Loaded, i32> {
    Config::load(config_path).map_err(|e| fail(EXIT_CONFIG, e))
}

fn cmd_thresholds(config: &Path, a: f64, b: f64, out: Option<&Path>, no_meta: bool) -> i32 {
    let loaded = match load(config) {
        Ok(l) => l,
        Err(code) => return code,
    };
    if !(a > 0.0 && a < b) {
        return fail(EXIT_CONFIG, format!("need 0 < a < b, got a = {a}, b = {b}"));
    }
    let ws = match BarrierWorkspace::new(&loaded.spec, loaded.numerics) {
        Ok(ws) => ws,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match ws.thresholds(a, b) {
        Ok(thr) => {
            let window_open = thr.mu_lower_proof < thr.mu_star;
            let value = match serde_json::to_value(&thr) {
                Ok(v) => v,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if emit(value, out, no_meta).is_err() {
                return fail(EXIT_CONFIG, "cannot write report");
            }
            if window_open {
                EXIT_OK
            } else {
                EXIT_GAP
            }
        }
        Err(e @ pucci_core::subsuper::BarrierError::NonvanishingF { .. }) => {
            let _ = emit(json!({ "error": e.to_string() }), out, no_meta);
            EXIT_GAP
        }
        Err(e @ pucci_core::subsuper::BarrierError::BadInterval { .. }) => fail(EXIT_CONFIG, e),
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn cmd_solve(config: &Path, mu: f64, out: Option<&Path>, no_meta: bool) -> i32 {
    let loaded = match load(config) {
        Ok(l) => l,
        Err(code) => return code,
    };
    if !(mu > 0.0) {
        return fail(EXIT_CONFIG, format!("mu must be positive, got {mu}"));
    }
    let spec = &loaded.spec;
    let numerics = loaded.numerics;

    let c1 = match audit_c1(&spec.f, 10.0 * (1.0 + mu), 256, numerics.seed) {
        Ok(rep) => rep,
        Err(e) => return fail(EXIT_PIPELINE, e),
    };
    if !c1.pass {
        let witness = serde_json::to_value(&c1.witnesses).unwrap_or(Value::Null);
        let _ = emit(
            json!({ "error": "monotonicity audit (C1) failed", "witnesses": witness }),
            out,
            no_meta,
        );
        return EXIT_PIPELINE;
    }

    let ws = match BarrierWorkspace::new(spec, numerics) {
        Ok(ws) => ws,
        Err(e) => return fail(EXIT_PIPELINE, e),
    };
    let (mut psi, mut m_mu) = match ws.build_subsolution(mu) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_PIPELINE, e),
    };
    let large = match ws.build_large_supersolution(mu) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_PIPELINE, e),
    };
    // make sure the interval is ordered
    let mut ordered = false;
    for _ in 0..200 {
        match check_ordering(&psi, &large.phi) {
            Ok(v) if v.leq => {
                ordered = true;
                break;
            }
            Ok(_) => {
                m_mu *= 0.5;
                psi = SystemState::new(psi.fields.iter().map(|f| f.scale(0.5)).collect());
            }
            Err(e) => return fail(EXIT_PIPELINE, e),
        }
    }
    if !ordered {
        return fail(EXIT_PIPELINE, "subsolution cannot be shrunk below the supersolution");
    }
    let interval = match OrderInterval::new(psi, large.phi.clone()) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_PIPELINE, e),
    };
    let minimal = match monotone_solve(&interval, spec, mu, Direction::FromSub, numerics.tol, numerics.max_iter) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_PIPELINE, e),
    };
    let maximal = match monotone_solve(&interval, spec, mu, Direction::FromSup, numerics.tol, numerics.max_iter) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_PIPELINE, e),
    };

    if write_profiles(&minimal.solution, out, "minimal").is_err()
        || write_profiles(&maximal.solution, out, "maximal").is_err()
    {
        return fail(EXIT_PIPELINE, "cannot write profiles");
    }
    if let Domain::Grid2d(grid) = &spec.domain {
        if let Err(e) = write_extended_profiles(grid, &minimal.solution, out, "minimal") {
            return fail(EXIT_PIPELINE, e);
        }
        if let Err(e) = write_extended_profiles(grid, &maximal.solution, out, "maximal") {
            return fail(EXIT_PIPELINE, e);
        }
    }
    let value = json!({
        "mu": mu,
        "m_mu": m_mu,
        "m_tilde": large.m_tilde,
        "minimal": serde_json::to_value(&minimal).unwrap_or(Value::Null),
        "maximal": serde_json::to_value(&maximal).unwrap_or(Value::Null),
    });
    if emit(value, out, no_meta).is_err() {
        return fail(EXIT_PIPELINE, "cannot write report");
    }
    EXIT_OK
}

/// For grid domains the ball profiles extend by zero onto the mask; the
/// extended fields are written in the portable grid format.
fn write_extended_profiles(
    grid: &pucci_core::grid2d::Grid2D,
    state: &SystemState,
    out: Option<&Path>,
    tag: &str,
) -> Result<(), String> {
    let Some(out) = out else { return Ok(()) };
    let shared = std::sync::Arc::new(grid.clone());
    let (center, _) = pucci_core::grid2d::inscribed_ball(&shared).map_err(|e| e.to_string())?;
    for (i, field) in state.fields.iter().enumerate() {
        let extended = pucci_core::grid2d::extend_by_zero(field, center, &shared)
            .map_err(|e| e.to_string())?;
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        let path = out.with_file_name(format!("{stem}_{tag}_u{}.grid", i + 1));
        let mut buf = Vec::new();
        extended.write_grid(&mut buf).map_err(|e| e.to_string())?;
        std::fs::write(path, buf).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn cmd_multiplicity(
    config: &Path,
    mu: f64,
    a: f64,
    b: f64,
    out: Option<&Path>,
    no_meta: bool,
) -> i32 {
    let loaded = match load(config) {
        Ok(l) => l,
        Err(code) => return code,
    };
    if !(mu > 0.0) {
        return fail(EXIT_CONFIG, format!("mu must be positive, got {mu}"));
    }
    if !(a > 0.0 && a < b) {
        return fail(EXIT_CONFIG, format!("need 0 < a < b, got a = {a}, b = {b}"));
    }
    let spec = &loaded.spec;
    let numerics = loaded.numerics;

    // advisory audits; failures are reported on stderr only
    if let Ok(rep) = audit_c2(&spec.f, 0.1, numerics.seed) {
        if !rep.pass {
            eprintln!(
                "warning: own-variable slope audit (C2) fails; the coupled subsolution \
                 construction may still succeed through the cross terms"
            );
        }
    }
    if let Ok(rep) = audit_c3(&spec.f, (2.0 * b).max(1e3), numerics.seed) {
        if !rep.pass {
            eprintln!("warning: sublinearity audit (C3) fails; the large supersolution search may not terminate");
        }
    }

    let ws = match BarrierWorkspace::new(spec, numerics) {
        Ok(ws) => ws,
        Err(e) => return fail(EXIT_CERTIFICATE, e),
    };
    match find_multiplicity_with(&ws, mu, a, b) {
        Ok(report) => {
            let certified = report.third_solution_certified;
            if write_profiles(&report.u1.solution, out, "u1").is_err()
                || write_profiles(&report.u2.solution, out, "u2").is_err()
                || write_profiles(&report.barriers.psi_tilde, out, "psi_tilde").is_err()
                || write_profiles(&report.barriers.phi_tilde, out, "phi_tilde").is_err()
            {
                return fail(EXIT_CERTIFICATE, "cannot write profiles");
            }
            let value = match serde_json::to_value(&report) {
                Ok(v) => v,
                Err(e) => return fail(EXIT_CERTIFICATE, e),
            };
            if emit(value, out, no_meta).is_err() {
                return fail(EXIT_CERTIFICATE, "cannot write report");
            }
            if certified {
                EXIT_OK
            } else {
                EXIT_CERTIFICATE
            }
        }
        Err(IterateError::MuOutOfRange { mu, lo, hi }) => {
            let _ = emit(
                json!({
                    "error": format!("mu = {mu} outside the certified window ({lo}, {hi})"),
                    "mu": mu,
                    "window": [lo, hi],
                }),
                out,
                no_meta,
            );
            EXIT_MU_WINDOW
        }
        Err(e) => {
            let _ = emit(json!({ "error": e.to_string() }), out, no_meta);
            EXIT_CERTIFICATE
        }
    }
}

struct SweepRow {
    mu: f64,
    norms: Option<Vec<f64>>,
    iterations: usize,
    residual: f64,
    error: String,
}

fn cmd_sweep(
    config: &Path,
    mu_min: f64,
    mu_max: f64,
    steps: usize,
    out: &Path,
    _no_meta: bool,
) -> i32 {
    let loaded = match load(config) {
        Ok(l) => l,
        Err(code) => return code,
    };
    if steps < 2 {
        return fail(EXIT_CONFIG, format!("steps must be at least 2, got {steps}"));
    }
    if !(mu_min > 0.0 && mu_min < mu_max) {
        return fail(
            EXIT_CONFIG,
            format!("need 0 < mu_min < mu_max, got {mu_min} and {mu_max}"),
        );
    }
    let spec = &loaded.spec;
    let numerics = loaded.numerics;
    let ws = match BarrierWorkspace::new(spec, numerics) {
        Ok(ws) => ws,
        Err(e) => return fail(EXIT_PIPELINE, e),
    };

    let ratio = mu_max / mu_min;
    let mus: Vec<f64> = (0..steps)
        .map(|k| mu_min * ratio.powf(k as f64 / (steps - 1) as f64))
        .collect();

    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("PUCCI_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|v| *v >= 1)
        .unwrap_or(hw);
    let threads = cap.min(steps).max(1);

    let solve_one = |mu: f64| -> SweepRow {
        let run = || -> Result<(Vec<f64>, usize, f64), IterateError> {
            let (mut psi, mut _m_mu) = ws.build_subsolution(mu)?;
            let large = ws.build_large_supersolution(mu)?;
            for _ in 0..200 {
                if check_ordering(&psi, &large.phi)?.leq {
                    break;
                }
                psi = SystemState::new(psi.fields.iter().map(|f| f.scale(0.5)).collect());
            }
            let interval = OrderInterval::new(psi, large.phi.clone())?;
            let rep = monotone_solve(
                &interval,
                spec,
                mu,
                Direction::FromSub,
                numerics.tol,
                numerics.max_iter,
            )?;
            Ok((rep.norms.clone(), rep.iterations, rep.residual))
        };
        match run() {
            Ok((norms, iterations, residual)) => SweepRow {
                mu,
                norms: Some(norms),
                iterations,
                residual,
                error: String::new(),
            },
            Err(e) => SweepRow {
                mu,
                norms: None,
                iterations: 0,
                residual: f64::NAN,
                error: e.to_string().replace(',', ";"),
            },
        }
    };

    let rows = Mutex::new((0..steps).map(|_| None).collect::<Vec<Option<SweepRow>>>());
    std::thread::scope(|scope| {
        for t in 0..threads {
            let rows = &rows;
            let mus = &mus;
            let solve_one = &solve_one;
            scope.spawn(move || {
                let mut k = t;
                while k < mus.len() {
                    let row = solve_one(mus[k]);
                    rows.lock().expect("sweep mutex")[k] = Some(row);
                    k += threads;
                }
            });
        }
    });
    let rows = rows.into_inner().expect("sweep mutex");

    let n = spec.n;
    let mut csv = String::new();
    csv.push_str("mu");
    for i in 1..=n {
        csv.push_str(&format!(",norm_u{i}"));
    }
    csv.push_str(",iterations,residual,error\n");
    let mut ok_count = 0usize;
    for row in rows.iter().map(|r| r.as_ref().expect("all rows computed")) {
        csv.push_str(&format!("{:.16e}", row.mu));
        match &row.norms {
            Some(norms) => {
                for v in norms {
                    csv.push_str(&format!(",{v:.16e}"));
                }
                csv.push_str(&format!(",{},{:.16e},", row.iterations, row.residual));
                ok_count += 1;
            }
            None => {
                for _ in 0..n {
                    csv.push(',');
                }
                csv.push_str(&format!(",,{}", row.error));
            }
        }
        csv.push('\n');
    }
    if std::fs::write(out, csv).is_err() {
        return fail(EXIT_PIPELINE, "cannot write sweep CSV");
    }
    if ok_count * 10 >= steps * 9 {
        EXIT_OK
    } else {
        EXIT_PIPELINE
    }
}
