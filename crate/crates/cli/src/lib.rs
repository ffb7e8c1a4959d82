//! Command-line front end over the solver crate: homology tables, orbit
//! shooting, path indices, torus checks, loop lifting, and displacement
//! energies, with stable table output and a machine-readable `--json` mode.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on domain errors
//! (malformed input files, solver non-convergence, out-of-range parameters).

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfhkit::hamflow::round_sphere;
use rfhkit::mbhomology::{
    build_complex, dims_to_json, dims_to_markdown, rfh_lens_homology, MorseBottDatum,
    RfhSphereSpec,
};
use rfhkit::sympindex::{cz_index, SymplecticPath};
use rfhkit::tolerances::SHOOT_TOL;
use rfhkit::twistorbit::{
    displacement_energy, forcing_gap, lift_loop, magnetic_orbit_check, monodromy_kernel,
    spectrum_sphere, sphere_orbit_cz, OrbitReport, Shape, TwistSpec,
};
use std::f64::consts::PI;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;

/// Printed angles snap to (p/q)π only within this distance.
const ANGLE_SNAP: f64 = 1e-9;
const MAX_ANGLE_DENOMINATOR: i64 = 12;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
}

fn domain(err: impl std::fmt::Display) -> CliError {
    CliError::Domain(err.to_string())
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        domain(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        domain(format!("malformed JSON: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "rfhkit",
    version,
    about = "Chain-complex homology, twisted-orbit solvers, and symplectic indices"
)]
pub struct Cli {
    /// Emit machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Residual acceptance tolerance; overrides the RFHKIT_TOL environment
    /// variable. Defaults to the solver tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Homology of a critical-data JSON file over GF(2).
    Homology(HomologyArgs),
    /// Homology table of the cyclic sphere quotient, one row per degree.
    #[command(name = "rfh-lens")]
    RfhLens(LensArgs),
    /// Twisted closed-orbit solvers on the round three-sphere.
    #[command(subcommand)]
    Orbit(OrbitCommand),
    /// Index of a symplectic path stored as JSON samples.
    Cz(CzArgs),
    /// Magnetic torus orbit checks and the forcing gap.
    #[command(subcommand)]
    Torus(TorusCommand),
    /// Deck index of a loop given by samples in a cyclic quotient.
    Lift(LiftArgs),
    /// Closed-form displacement energies.
    Energy(EnergyArgs),
}

#[derive(Args, Debug)]
pub struct HomologyArgs {
    /// Path to the critical-data JSON file (components, points, cascades).
    #[arg(long)]
    pub datum: PathBuf,
}

#[derive(Args, Debug)]
pub struct LensArgs {
    /// Complex dimension: the ambient sphere is S^{2n-1}.
    #[arg(long)]
    pub n: usize,
    /// Order of the cyclic symmetry.
    #[arg(long)]
    pub m: usize,
    /// Report a single degree instead of the whole table.
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<i64>,
    /// Comma-separated rotation exponents, one per complex coordinate.
    #[arg(long)]
    pub exponents: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum OrbitCommand {
    /// Newton shooting for a twisted closed orbit.
    Shoot(ShootArgs),
    /// Twisted period spectrum.
    Spectrum(SpectrumArgs),
    /// Linearized return map of a converged orbit.
    Monodromy(ShootArgs),
}

#[derive(Args, Debug)]
pub struct ShootArgs {
    /// Order of the rotation twist.
    #[arg(long)]
    pub m: usize,
    /// Spectrum slot seeding the period guess.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub k: i64,
    /// RNG seed for the starting guess.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// Order of the rotation twist.
    #[arg(long)]
    pub m: usize,
    /// Inclusive slot range, e.g. `0..2`.
    #[arg(long = "k-range")]
    pub k_range: String,
}

#[derive(Args, Debug)]
pub struct CzArgs {
    /// Path to a JSON file of symplectic path samples.
    #[arg(long)]
    pub path: PathBuf,
    /// Average the two endpoint perturbations instead of requiring a
    /// nondegenerate endpoint.
    #[arg(long)]
    pub degenerate: bool,
}

#[derive(Subcommand, Debug)]
pub enum TorusCommand {
    /// Verify the explicit circular family at level c and period tau.
    Check(TorusCheckArgs),
    /// Forcing gap c·(τ₊ − τ₋) against the displacement threshold 2πc.
    Forcing(ForcingArgs),
}

#[derive(Args, Debug)]
pub struct TorusCheckArgs {
    /// Kinetic energy level.
    #[arg(long, allow_negative_numbers = true)]
    pub c: f64,
    /// Period to verify.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: f64,
    /// Check against the quarter-turn cotangent twist instead of a plain loop.
    #[arg(long)]
    pub twisted: bool,
}

#[derive(Args, Debug)]
pub struct ForcingArgs {
    /// Kinetic energy level.
    #[arg(long, allow_negative_numbers = true)]
    pub c: f64,
    #[arg(long = "tau-minus", allow_negative_numbers = true)]
    pub tau_minus: f64,
    #[arg(long = "tau-plus", allow_negative_numbers = true)]
    pub tau_plus: f64,
}

#[derive(Args, Debug)]
pub struct LiftArgs {
    /// JSON file with the loop samples as an array of coordinate arrays.
    #[arg(long = "loop")]
    pub loop_file: PathBuf,
    /// Order of the cyclic action.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Comma-separated rotation exponents, one per complex coordinate.
    #[arg(long)]
    pub exponents: Option<String>,
}

#[derive(Args, Debug)]
pub struct EnergyArgs {
    /// `ball` or `torus`.
    #[arg(long)]
    pub shape: String,
    /// Ball radius.
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Torus kinetic energy level.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
}

/// Parses and dispatches; all process output goes through `out` / stderr.
pub fn run(argv: &[OsString], out: &mut impl Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            eprint!("{e}");
            return EXIT_USAGE;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(cli: &Cli, out: &mut impl Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Homology(args) => cmd_homology(args, cli.json, out),
        Command::RfhLens(args) => cmd_lens(args, cli.json, out),
        Command::Orbit(OrbitCommand::Shoot(args)) => cmd_shoot(args, cli, out),
        Command::Orbit(OrbitCommand::Spectrum(args)) => cmd_spectrum(args, cli.json, out),
        Command::Orbit(OrbitCommand::Monodromy(args)) => cmd_monodromy(args, cli, out),
        Command::Cz(args) => cmd_cz(args, cli.json, out),
        Command::Torus(TorusCommand::Check(args)) => cmd_torus_check(args, cli.json, out),
        Command::Torus(TorusCommand::Forcing(args)) => cmd_forcing(args, cli.json, out),
        Command::Lift(args) => cmd_lift(args, cli.json, out),
        Command::Energy(args) => cmd_energy(args, cli.json, out),
    }
}

fn tolerance(cli: &Cli) -> Result<f64, CliError> {
    let value = match cli.tol {
        Some(t) => t,
        None => match std::env::var("RFHKIT_TOL") {
            Ok(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("RFHKIT_TOL is not a number: {s:?}")))?,
            Err(_) => SHOOT_TOL,
        },
    };
    if !(value > 0.0) {
        return Err(CliError::Usage(format!(
            "tolerance must be positive, got {value}"
        )));
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// formatting

/// Fixed 12-significant-digit decimal; scientific notation outside the
/// comfortable fixed-point range. Stable across runs by construction.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..=14).contains(&mag) {
        format!("{x:.11e}")
    } else {
        let decimals = (11 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Formats an angle as a rational multiple of π when it is within 1e-9 of
/// (p/q)π with q ≤ 12, and as a 12-digit decimal otherwise.
pub fn fmt_angle(x: f64) -> String {
    for q in 1..=MAX_ANGLE_DENOMINATOR {
        let p = (x * q as f64 / PI).round();
        if p.abs() > 1e15 || (x - p * PI / q as f64).abs() > ANGLE_SNAP {
            continue;
        }
        let p = p as i64;
        if p == 0 {
            return "0".to_string();
        }
        let g = gcd(p.unsigned_abs(), q as u64) as i64;
        return match (p / g, q / g) {
            (1, 1) => "π".to_string(),
            (-1, 1) => "-π".to_string(),
            (p, 1) => format!("{p}π"),
            (1, q) => format!("π/{q}"),
            (-1, q) => format!("-π/{q}"),
            (p, q) => format!("{p}π/{q}"),
        };
    }
    fmt_sig(x)
}

fn parse_exponents(raw: &Option<String>, n: usize) -> Result<Vec<i64>, CliError> {
    match raw {
        None => Ok(vec![1; n]),
        Some(s) => {
            let parsed: Result<Vec<i64>, _> =
                s.split(',').map(|part| part.trim().parse::<i64>()).collect();
            let exps =
                parsed.map_err(|_| CliError::Usage(format!("bad exponent list {s:?}")))?;
            if exps.len() != n {
                return Err(CliError::Usage(format!(
                    "expected {n} exponents, got {}",
                    exps.len()
                )));
            }
            Ok(exps)
        }
    }
}

fn parse_inclusive_range(raw: &str) -> Result<(i64, i64), CliError> {
    let bad = || CliError::Usage(format!("bad range {raw:?}, expected a..b"));
    let (lo, hi) = raw.split_once("..").ok_or_else(bad)?;
    let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i64 = hi.trim().strip_prefix('=').unwrap_or(hi.trim()).trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(CliError::Usage(format!("empty range {raw:?}")));
    }
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_homology(args: &HomologyArgs, json: bool, out: &mut impl Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.datum)?;
    let datum: MorseBottDatum = serde_json::from_str(&text)?;
    let complex = build_complex(&datum).map_err(domain)?;
    let dims = complex.homology_dims();
    if json {
        writeln!(out, "{}", dims_to_json(&dims))?;
    } else {
        write!(out, "{}", dims_to_markdown(&dims))?;
    }
    Ok(())
}

fn cmd_lens(args: &LensArgs, json: bool, out: &mut impl Write) -> Result<(), CliError> {
    let exponents = parse_exponents(&args.exponents, args.n)?;
    let spec = RfhSphereSpec {
        n: args.n,
        m: args.m,
        exponents,
    };
    let dims = rfh_lens_homology(&spec).map_err(domain)?;
    if let Some(k) = args.k {
        // The table is periodic with period 2n; any degree reduces into it.
        let reduced = k.rem_euclid(2 * args.n as i64);
        let dim = dims[&reduced];
        if json {
            writeln!(out, "{}", serde_json::json!({ "degree": k, "dim": dim }))?;
        } else {
            writeln!(out, "degree {k}: {dim}")?;
        }
        return Ok(());
    }
    if json {
        writeln!(out, "{}", dims_to_json(&dims))?;
        return Ok(());
    }
    let first = dims.values().next().copied().unwrap_or(0);
    if dims.values().all(|&d| d == first) {
        writeln!(out, "degree k: {first} (all k)")?;
    } else {
        for (k, d) in &dims {
            writeln!(out, "degree {k}: {d}")?;
        }
    }
    Ok(())
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0f64));
        let norm = v.norm();
        if norm > 0.1 {
            return v / norm;
        }
    }
}

/// Nearest spectrum slot to a converged period: inverts τ = (π/m)(mk − 1).
fn nearest_slot(m: usize, tau: f64) -> i64 {
    ((tau * m as f64 / PI + 1.0) / m as f64).round() as i64
}

fn solve_orbit(args: &ShootArgs, tol: f64) -> Result<OrbitReport, CliError> {
    let surface = round_sphere(2, 1.0);
    let twist = TwistSpec::rotation(args.m, &[1, 1]).map_err(domain)?;
    let target = spectrum_sphere(args.m, args.k..=args.k).map_err(domain)?[0];
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let seed_x = random_unit(&mut rng, 4);
    let seed_tau = target + rng.gen_range(-0.2..0.2);
    let mut report =
        OrbitReport::from_surface(&surface, &twist, &seed_x, seed_tau, None).map_err(domain)?;
    if report.orbit.residual > tol {
        return Err(CliError::Domain(format!(
            "solver stalled at residual {} > tolerance {}",
            fmt_sig(report.orbit.residual),
            fmt_sig(tol)
        )));
    }
    report.cz_index = sphere_orbit_cz(args.m, nearest_slot(args.m, report.orbit.tau)).ok();
    Ok(report)
}

fn cmd_shoot(args: &ShootArgs, cli: &Cli, out: &mut impl Write) -> Result<(), CliError> {
    let report = solve_orbit(args, tolerance(cli)?)?;
    if cli.json {
        writeln!(out, "{}", serde_json::to_string(&report.summary())?)?;
        return Ok(());
    }
    let orbit = &report.orbit;
    writeln!(out, "tau: {}", fmt_angle(orbit.tau))?;
    writeln!(out, "tau (decimal): {}", fmt_sig(orbit.tau))?;
    writeln!(out, "residual: {}", fmt_sig(orbit.residual))?;
    writeln!(out, "action: {}", fmt_sig(orbit.action))?;
    writeln!(
        out,
        "|action - tau|: {}",
        fmt_sig((orbit.action - orbit.tau).abs())
    )?;
    writeln!(out, "kernel dim: {}", report.kernel_dim)?;
    writeln!(out, "deck index: {}", report.deck_index)?;
    if let Some(idx) = report.cz_index {
        writeln!(out, "cz index: {idx}")?;
    }
    Ok(())
}

fn cmd_monodromy(args: &ShootArgs, cli: &Cli, out: &mut impl Write) -> Result<(), CliError> {
    let report = solve_orbit(args, tolerance(cli)?)?;
    let surface = round_sphere(2, 1.0);
    let twist = TwistSpec::rotation(args.m, &[1, 1]).map_err(domain)?;
    let (kernel_dim, restricted) =
        monodromy_kernel(&surface, &twist, &report.orbit.x0, report.orbit.tau).map_err(domain)?;
    let dim = restricted.nrows();
    let defect = (&restricted - DMatrix::<f64>::identity(dim, dim)).amax();
    if cli.json {
        writeln!(
            out,
            "{}",
            serde_json::json!({
                "tau": report.orbit.tau,
                "kernel_dim": kernel_dim,
                "defect": defect,
            })
        )?;
        return Ok(());
    }
    writeln!(out, "tau: {}", fmt_angle(report.orbit.tau))?;
    writeln!(out, "kernel dim: {kernel_dim}")?;
    writeln!(out, "monodromy defect: {}", fmt_sig(defect))?;
    Ok(())
}

fn cmd_spectrum(args: &SpectrumArgs, json: bool, out: &mut impl Write) -> Result<(), CliError> {
    let (lo, hi) = parse_inclusive_range(&args.k_range)?;
    let taus = spectrum_sphere(args.m, lo..=hi).map_err(domain)?;
    if json {
        writeln!(out, "{}", serde_json::to_string(&taus)?)?;
        return Ok(());
    }
    let rendered: Vec<String> = taus.iter().map(|&t| fmt_angle(t)).collect();
    writeln!(out, "{}", rendered.join(", "))?;
    Ok(())
}

fn cmd_cz(args: &CzArgs, json: bool, out: &mut impl Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.path)?;
    let path: SymplecticPath = serde_json::from_str(&text)?;
    let index = cz_index(&path, args.degenerate).map_err(domain)?;
    if json {
        writeln!(out, "{}", serde_json::json!({ "index": index }))?;
    } else {
        writeln!(out, "index: {index}")?;
    }
    Ok(())
}

fn cmd_torus_check(
    args: &TorusCheckArgs,
    json: bool,
    out: &mut impl Write,
) -> Result<(), CliError> {
    if args.c <= 0.0 {
        return Err(CliError::Domain(format!(
            "energy level must be positive, got {}",
            args.c
        )));
    }
    // The circular family v(t) = √(2c)(sin t, cos t, cos t, −sin t) at t = 0.
    let s = (2.0 * args.c).sqrt();
    let q = nalgebra::dvector![0.0, s];
    let p = nalgebra::dvector![s, 0.0];
    let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let twist = args.twisted.then(TwistSpec::torus_quarter_turn);
    let passes = magnetic_orbit_check(&q, &p, args.tau, args.c, &j, twist.as_ref()).map_err(domain)?;
    if json {
        writeln!(
            out,
            "{}",
            serde_json::json!({ "c": args.c, "tau": args.tau, "passes": passes })
        )?;
    } else {
        writeln!(out, "tau: {}", fmt_angle(args.tau))?;
        writeln!(out, "passes: {passes}")?;
    }
    Ok(())
}

fn cmd_forcing(args: &ForcingArgs, json: bool, out: &mut impl Write) -> Result<(), CliError> {
    let report = forcing_gap(args.c, args.tau_minus, args.tau_plus).map_err(domain)?;
    if json {
        writeln!(
            out,
            "{}",
            serde_json::json!({
                "gap": report.gap,
                "threshold": report.threshold,
                "satisfied": report.satisfied,
            })
        )?;
        return Ok(());
    }
    writeln!(out, "gap: {}", fmt_sig(report.gap))?;
    writeln!(out, "threshold: {}", fmt_sig(report.threshold))?;
    writeln!(out, "satisfied: {}", report.satisfied)?;
    Ok(())
}

fn cmd_lift(args: &LiftArgs, json: bool, out: &mut impl Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.loop_file)?;
    let raw: Vec<Vec<f64>> = serde_json::from_str(&text)?;
    if raw.is_empty() {
        return Err(CliError::Domain("loop file holds no samples".to_string()));
    }
    let dim = raw[0].len();
    if dim == 0 || dim % 2 != 0 || raw.iter().any(|row| row.len() != dim) {
        return Err(CliError::Domain(
            "loop samples must share one even length".to_string(),
        ));
    }
    let samples: Vec<DVector<f64>> = raw
        .into_iter()
        .map(|row| DVector::from_vec(row))
        .collect();
    let exponents = parse_exponents(&args.exponents, dim / 2)?;
    let twist = TwistSpec::rotation(args.m, &exponents).map_err(domain)?;
    let deck = lift_loop(&samples, &twist).map_err(domain)?;
    if json {
        writeln!(out, "{}", serde_json::json!({ "deck_index": deck }))?;
    } else {
        writeln!(out, "deck index: {deck}")?;
    }
    Ok(())
}

fn cmd_energy(args: &EnergyArgs, json: bool, out: &mut impl Write) -> Result<(), CliError> {
    let shape = match args.shape.as_str() {
        "ball" => Shape::Ball {
            radius: args
                .r
                .ok_or_else(|| CliError::Usage("--r is required for ball".to_string()))?,
        },
        "torus" => Shape::MagneticTorusLevel {
            c: args
                .c
                .ok_or_else(|| CliError::Usage("--c is required for torus".to_string()))?,
        },
        other => {
            return Err(CliError::Usage(format!(
                "unknown shape {other:?}, expected ball or torus"
            )))
        }
    };
    let energy = displacement_energy(shape).map_err(domain)?;
    if json {
        writeln!(out, "{}", serde_json::json!({ "energy": energy }))?;
    } else {
        writeln!(out, "{}", fmt_sig(energy))?;
    }
    Ok(())
}
