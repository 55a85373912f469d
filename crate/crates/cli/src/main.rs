//! `ehdwave`: command-line driver for the solitary-wave solver.
//!
//! Exit codes: 0 success, 1 invalid input, 2 invariant violation,
//! 3 convergence failure.

// Negated comparisons are used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ehdwave::conjugate::{bore_verdict, qhat, shat};
use ehdwave::continuation::{
    classify_stop, continue_branch_with, required_half_length, sech2_profile, ContinuationError,
    StopReason,
};
use ehdwave::diagnostics::{physical_profile, summarize};
use ehdwave::io::{
    read_solution, write_branch, write_csv, write_curve, write_report, write_solution,
    OutputFormat, RunConfig, SolutionDocument,
};
use ehdwave::newton::newton_solve;
use ehdwave::ode::{homoclinic_exact, homoclinic_slope, phase_portrait, OdeParams, OrbitKind};
use ehdwave::system::{dispersion_root, linear_multiplier, DispersionRoot};
use ehdwave::WaveSolution;

#[derive(Parser)]
#[command(
    name = "ehdwave",
    version,
    about = "Solitary electrohydrodynamic water waves with constant vorticity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the linear multiplier m(k) of the trivial flow and its root.
    Dispersion(Common),
    /// Solve for one solitary wave at fixed alpha (or eps).
    Solve(Common),
    /// Follow the solitary-wave branch from the trivial flow.
    Continue(ContinueArgs),
    /// Re-run every diagnostic on a stored solution.
    Diagnose(DiagnoseArgs),
    /// Critical and conjugate depths of the laminar flows.
    Conjugate(Common),
    /// Phase portrait of the reduced planar equation.
    Ode(OdeArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps1: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "eps")]
    alpha: Option<f64>,
    /// alpha_cr − alpha.
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    half_length: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    /// Newton residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Clone)]
struct ContinueArgs {
    #[command(flatten)]
    common: Common,
    /// Largest number of branch points.
    #[arg(long)]
    budget: Option<usize>,
    /// First eps of the branch.
    #[arg(long)]
    eps_start: Option<f64>,
}

#[derive(Args, Clone)]
struct DiagnoseArgs {
    /// Solution file written by `solve` or `continue`.
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct OdeArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated launch heights Q(0), with P(0) = 0.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    q0: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Command failure with its exit code.
enum Failure {
    Validation(anyhow::Error),
    Invariant(String),
    Convergence(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Invariant(_) => 2,
            Failure::Convergence(_) => 3,
        }
    }
}

type CmdResult = Result<(), Failure>;

trait OrValidation<T> {
    fn invalid(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrValidation<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Validation(e.into()))
    }
}

fn run_config(command: &str, c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::from_json_file(path)
            .with_context(|| format!("reading configuration {}", path.display()))
            .invalid()?,
        None => RunConfig::default(),
    };
    cfg.command = command.to_string();
    if let Some(v) = c.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = c.eps1 {
        cfg.eps1 = v;
    }
    if c.alpha.is_some() || c.eps.is_some() {
        cfg.alpha = c.alpha;
        cfg.eps = c.eps;
    }
    if c.half_length.is_some() {
        cfg.half_length = c.half_length;
    }
    if c.n_points.is_some() {
        cfg.n_points = c.n_points;
    }
    if let Some(t) = c.tol {
        cfg.newton.tol = t;
        cfg.continuation.newton.tol = t;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(f) = c.format {
        cfg.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }
    cfg.base().invalid()?;
    cfg.newton.validate().invalid()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Dispersion(c) => cmd_dispersion(&c),
        Command::Solve(c) => cmd_solve(&c),
        Command::Continue(a) => cmd_continue(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Conjugate(c) => cmd_conjugate(&c),
        Command::Ode(a) => cmd_ode(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(e) => eprintln!("error: {e:#}"),
                Failure::Invariant(m) => eprintln!("invariant violation: {m}"),
                Failure::Convergence(e) => eprintln!("convergence failure: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn cmd_dispersion(c: &Common) -> CmdResult {
    let cfg = run_config("dispersion", c)?;
    let p = cfg.params().invalid()?;
    let ks: Vec<f64> = (0..=40).map(|i| 0.125 * i as f64).collect();
    let table: Vec<(f64, f64)> = ks.iter().map(|&k| (k, linear_multiplier(k, &p))).collect();
    let root = dispersion_root(&p);
    let message = match root {
        DispersionRoot::None => format!("no real root (α < α_cr = {})", p.alpha_cr()),
        DispersionRoot::Boundary => "no real root; α = α_cr boundary case k = 0".to_string(),
        DispersionRoot::Root(k) => format!("root k = {k:.6} (α > α_cr = {})", p.alpha_cr()),
    };
    println!("{:>10} {:>16}", "k", "m(k)");
    for (k, m) in &table {
        println!("{k:>10.4} {m:>16.8e}");
    }
    println!("{message}");
    match cfg.format {
        OutputFormat::Json => {
            let report = serde_json::json!({
                "gamma": p.gamma(),
                "eps1": p.eps1(),
                "alpha": p.alpha(),
                "alpha_cr": p.alpha_cr(),
                "table": table,
                "root": match root { DispersionRoot::Root(k) => Some(k), _ => None },
                "message": message,
            });
            write_report(&out_path(&cfg, "dispersion.json"), &cfg, &report).invalid()?;
        }
        OutputFormat::Csv => {
            write_csv(
                &out_path(&cfg, "dispersion.csv"),
                &cfg,
                &["k", "m"],
                table.iter().map(|&(k, m)| vec![k, m]),
            )
            .invalid()?;
        }
    }
    Ok(())
}

/// Box and resolution for a wave of decay rate `√(3ε)`: the tail falls below
/// 1e-10 of the crest, with 16 points per `sech²` width.
fn default_solve_grid(eps: f64) -> (f64, usize) {
    let l = (1.2 * required_half_length(eps)).max(16.0);
    let n = (16.0 * l * (3.0 * eps).sqrt()).ceil() as usize;
    (l, n.clamp(64, 4096).next_power_of_two())
}

fn solution_outputs(
    cfg: &RunConfig,
    sol: &WaveSolution,
) -> Result<ehdwave::diagnostics::DiagnosticsSummary, Failure> {
    let summary = summarize(sol, 10.0 * cfg.continuation.tail_tol)
        .map_err(|e| Failure::Validation(anyhow!(e)))?;
    let doc = SolutionDocument::new(sol, cfg, Some(&summary));
    write_solution(&out_path(cfg, "solution.json"), &doc).invalid()?;
    let x = sol.grid().x();
    write_curve(
        &out_path(cfg, "t1.dat"),
        cfg,
        ("x", "t1"),
        x.iter().copied().zip(sol.t1().values().iter().copied()),
    )
    .invalid()?;
    if let Ok(profile) = physical_profile(sol) {
        write_curve(
            &out_path(cfg, "surface.dat"),
            cfg,
            ("X", "Y"),
            profile.points.iter().map(|q| (q.big_x, q.big_y)),
        )
        .invalid()?;
    }
    Ok(summary)
}

fn check_summary(summary: &ehdwave::diagnostics::DiagnosticsSummary) -> CmdResult {
    let v = summary.violations();
    if v.is_empty() {
        println!("all diagnostics pass");
        Ok(())
    } else {
        for m in &v {
            println!("VIOLATION: {m}");
        }
        Err(Failure::Invariant(v.join("; ")))
    }
}

fn cmd_solve(c: &Common) -> CmdResult {
    let cfg = run_config("solve", c)?;
    let p = cfg.params().invalid()?;
    let eps = p.eps();
    if !(eps > 0.0) {
        return Err(Failure::Validation(anyhow!(
            "alpha = {} is not below alpha_cr = {}: only the trivial flow exists",
            p.alpha(),
            p.alpha_cr()
        )));
    }
    let g = cfg.grid_or(default_solve_grid(eps)).invalid()?;
    let init = sech2_profile(eps, &p.base(), &g);
    let out = newton_solve(&init, &p, &g, &cfg.newton)
        .map_err(|e| Failure::Convergence(anyhow!(e)))?;
    println!(
        "converged in {} iterations ({} solver): residual {:.3e}, amplitude {:.10}, tail {:.3e}",
        out.iterations(),
        if out.dense { "dense" } else { "krylov" },
        out.solution.residual_norm(),
        out.solution.amplitude(),
        out.solution.tail()
    );
    for f in &out.flags {
        println!("flag: {f:?}");
    }
    let summary = solution_outputs(&cfg, &out.solution)?;
    check_summary(&summary)
}

fn cmd_continue(a: &ContinueArgs) -> CmdResult {
    let mut cfg = run_config("continue", &a.common)?;
    if let Some(b) = a.budget {
        cfg.continuation.budget = b;
    }
    if let Some(e) = a.eps_start {
        cfg.continuation.eps_start = e;
    }
    cfg.continuation.validate().invalid()?;
    let base = cfg.base().invalid()?;
    let l = (required_half_length(cfg.continuation.eps_start) * 1.0001)
        .max(16.0)
        .log2()
        .ceil()
        .exp2();
    let g = cfg.grid_or((l, 2 * l as usize)).invalid()?;
    let branch = continue_branch_with(&base, &g, &cfg.continuation, &mut |q| {
        eprintln!(
            "s {:.6}  alpha {:.8}  amplitude {:.8}  M1 {:.4}  M2 {:.4}  M3 {:.4}  N {}",
            q.s, q.alpha, q.amplitude, q.monitor_m1, q.monitor_m2, q.monitor_m3, q.n_points
        )
    })
    .map_err(|e| match e {
        ContinuationError::StartFailed(_) => Failure::Convergence(anyhow!(e)),
        other => Failure::Validation(anyhow!(other)),
    })?;
    let last = branch.points.last().expect("a branch has a first point");
    let p = base.with_alpha(last.alpha).invalid()?;
    let report = classify_stop(&branch, &p);
    let path = write_branch(&cfg.out, &branch, &report, &cfg).invalid()?;
    let pts = &branch.points;
    let curves: [(&str, (&str, &str), Box<dyn Fn(&ehdwave::BranchPoint) -> (f64, f64)>); 5] = [
        ("amplitude_alpha.dat", ("alpha", "amplitude"), Box::new(|q| (q.alpha, q.amplitude))),
        ("m1_s.dat", ("s", "M1"), Box::new(|q| (q.s, q.monitor_m1))),
        ("m2_s.dat", ("s", "M2"), Box::new(|q| (q.s, q.monitor_m2))),
        ("m3_s.dat", ("s", "M3"), Box::new(|q| (q.s, q.monitor_m3))),
        ("froude_s.dat", ("s", "F"), Box::new(|q| (q.s, q.froude))),
    ];
    for (name, labels, f) in &curves {
        write_curve(&out_path(&cfg, name), &cfg, *labels, pts.iter().map(f)).invalid()?;
    }
    if cfg.format == OutputFormat::Csv {
        write_csv(
            &out_path(&cfg, "branch.csv"),
            &cfg,
            &["s", "alpha", "amplitude", "M1", "M2", "M3", "F", "lambda_min", "residual", "tail", "L", "N"],
            pts.iter().map(|q| {
                vec![
                    q.s, q.alpha, q.amplitude, q.monitor_m1, q.monitor_m2, q.monitor_m3,
                    q.froude, q.lambda_min, q.residual_norm, q.tail, q.half_length,
                    q.n_points as f64,
                ]
            }),
        )
        .invalid()?;
    }
    println!(
        "{} points written to {}; stop reason {} ({})",
        pts.len(),
        path.display(),
        branch.stop_reason.as_str(),
        branch.diagnostic
    );
    println!("interpretation: {}", report.interpretation);
    let failed: Vec<String> = branch
        .checks
        .iter()
        .enumerate()
        .filter(|(_, c)| !(c.flux_gap < c.flux_tolerance && c.w1_w1y_integral > 0.0 && c.nodal))
        .map(|(i, c)| format!("point {i}: flux gap {:.3e}", c.flux_gap))
        .collect();
    if report.discrepancy {
        return Err(Failure::Invariant(format!(
            "stop trigger {} is not admissible for gamma = {}",
            branch.stop_reason.as_str(),
            base.gamma
        )));
    }
    if !failed.is_empty() {
        return Err(Failure::Invariant(failed.join("; ")));
    }
    if branch.stop_reason == StopReason::StepFailure {
        println!("note: the branch ended on a step failure");
    }
    Ok(())
}

fn cmd_diagnose(a: &DiagnoseArgs) -> CmdResult {
    let mut cfg = run_config("diagnose", &a.common)?;
    cfg.input = Some(a.input.clone());
    let doc = read_solution(&a.input).invalid()?;
    let sol = doc
        .to_solution()
        .with_context(|| format!("rebuilding the wave in {}", a.input.display()))
        .invalid()?;
    println!(
        "{}: residual {:.3e}, amplitude {:.10}, tail {:.3e}",
        a.input.display(),
        sol.residual_norm(),
        sol.amplitude(),
        sol.tail()
    );
    let summary = summarize(&sol, 10.0 * cfg.continuation.tail_tol)
        .map_err(|e| Failure::Validation(anyhow!(e)))?;
    match cfg.format {
        OutputFormat::Json => {
            write_report(&out_path(&cfg, "diagnostics.json"), &cfg, &summary).invalid()?
        }
        OutputFormat::Csv => write_csv(
            &out_path(&cfg, "diagnostics.csv"),
            &cfg,
            &["residual", "lambda_min", "bernoulli", "kinematic_flow", "kinematic_field", "flow_force_spread", "flux_gap"],
            [vec![
                summary.residual_norm,
                summary.lambda_min,
                summary.bernoulli,
                summary.kinematic_flow,
                summary.kinematic_field,
                summary.flow_force.relative_spread,
                summary.flux.relative_gap,
            ]],
        )
        .invalid()?,
    }
    check_summary(&summary)
}

fn cmd_conjugate(c: &Common) -> CmdResult {
    let cfg = run_config("conjugate", c)?;
    let p = cfg.params().invalid()?;
    let report = bore_verdict(&p).invalid()?;
    println!("d_cr = {:.12}", report.d_cr);
    match report.d_star {
        Some(d) => println!("d*   = {d:.12}"),
        None => println!("d*   : none"),
    }
    println!("Q̂(1) = {:.12}  Ŝ(1) = {:.12}", report.qhat_at_1, report.shat_at_1);
    if let Some(s) = report.shat_at_star {
        println!("Ŝ(d*) = {s:.12}");
    }
    println!("bore excluded: {} ({})", report.bore_excluded, report.reason);
    let ds: Vec<f64> = (0..=275).map(|i| 0.25 + 0.01 * i as f64).collect();
    let rows: Vec<Vec<f64>> = ds
        .iter()
        .map(|&d| Ok(vec![d, qhat(d, &p)?, shat(d, &p)?]))
        .collect::<Result<_, ehdwave::conjugate::ConjugateError>>()
        .invalid()?;
    write_curve(&out_path(&cfg, "qhat.dat"), &cfg, ("d", "Qhat"), rows.iter().map(|r| (r[0], r[1])))
        .invalid()?;
    write_curve(&out_path(&cfg, "shat.dat"), &cfg, ("d", "Shat"), rows.iter().map(|r| (r[0], r[2])))
        .invalid()?;
    match cfg.format {
        OutputFormat::Json => write_report(&out_path(&cfg, "conjugate.json"), &cfg, &report).invalid()?,
        OutputFormat::Csv => {
            write_csv(&out_path(&cfg, "conjugate.csv"), &cfg, &["d", "qhat", "shat"], rows).invalid()?
        }
    }
    if !report.sign_consistent {
        return Err(Failure::Invariant(
            "sign of Ŝ(d*) − Ŝ(1) disagrees with sign of α_cr − α".into(),
        ));
    }
    Ok(())
}

fn cmd_ode(a: &OdeArgs) -> CmdResult {
    let mut cfg = run_config("ode", &a.common)?;
    if let Some(q) = &a.q0 {
        cfg.q0 = q.clone();
    }
    let params = OdeParams::new(cfg.gamma, cfg.eps1, cfg.eps.unwrap_or(0.0)).invalid()?;
    println!("q0 = {:.12}, c2 = {:.12}", params.q0(), params.c2());
    let orbits = phase_portrait(&params, &cfg.q0);
    let mut summary = Vec::new();
    for (i, o) in orbits.iter().enumerate() {
        let name = format!("orbit_{i:02}_q{}.dat", o.q_start);
        write_curve(
            &out_path(&cfg, &name),
            &cfg,
            ("Q", "P"),
            o.orbit.q.iter().copied().zip(o.orbit.p.iter().copied()),
        )
        .invalid()?;
        println!(
            "Q(0) = {:<6} {:<11} closure {:.3e}  drift {:.3e}{}",
            o.q_start,
            format!("{:?}", o.kind),
            o.closure_error,
            o.orbit.energy_drift,
            o.period.map(|t| format!("  period {t:.6}")).unwrap_or_default()
        );
        summary.push(serde_json::json!({
            "q_start": o.q_start,
            "kind": o.kind,
            "closure_error": o.closure_error,
            "period": o.period,
            "energy_drift": o.orbit.energy_drift,
            "file": name,
        }));
    }
    let sep: Vec<(f64, f64)> = (-10_000..=10_000)
        .map(|i| {
            let x = i as f64 * 1e-3;
            (homoclinic_exact(x, &params), homoclinic_slope(x, &params))
        })
        .collect();
    write_curve(&out_path(&cfg, "homoclinic.dat"), &cfg, ("Q", "P"), sep).invalid()?;
    match cfg.format {
        OutputFormat::Json => write_report(&out_path(&cfg, "portrait.json"), &cfg, &summary).invalid()?,
        OutputFormat::Csv => write_csv(
            &out_path(&cfg, "portrait.csv"),
            &cfg,
            &["q_start", "closure_error", "energy_drift"],
            orbits
                .iter()
                .map(|o| vec![o.q_start, o.closure_error, o.orbit.energy_drift]),
        )
        .invalid()?,
    }
    let bad: Vec<String> = orbits
        .iter()
        .filter(|o| o.kind == OrbitKind::Homoclinic && !(o.closure_error < 1e-5))
        .map(|o| format!("separatrix closure error {:.3e}", o.closure_error))
        .collect();
    if !bad.is_empty() {
        return Err(Failure::Invariant(bad.join("; ")));
    }
    Ok(())
}
