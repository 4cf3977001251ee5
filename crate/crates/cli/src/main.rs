//! Command-line frontend: five analysis verbs over symbol and operator
//! files, with machine-readable reports on stdout and artifact files in the
//! output directory.
//!
//! Exit codes: 0 success, 2 invertibility failure, 3 resolution failure,
//! 4 input error, 5 verification failure.

use clap::{Parser, Subcommand, ValueEnum};
use skelfact::{
    alternative_factor, analytic_index, emit_components, emit_factor_dump, emit_factor_report,
    emit_grid_csv, emit_index_report, emit_verify_report, halmos_dilation, numeric_index,
    parse_config, parse_factor_dump, parse_operator, parse_symbol, skeleton_factor_scheduled,
    spectrum_curve, verify_factorization, winding_map, AlternativeFactorization, AlternativeForm,
    CorrectedLaurentOp, Error, GridSpec, HardyProjection, IndexReport, Result, RunConfig,
    ShiftDirection, Tolerances, TruncationWindow,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "skelfact", version, about = "Winding numbers, Fredholm indices, skeleton factorizations, and spectral component maps of operators on the bilateral sequence space")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Configuration file (JSON); flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Cut position of the half-line projection.
    #[arg(long, global = true, default_value_t = 0)]
    p_cut: i64,

    /// Window schedule override, comma separated (strictly increasing).
    #[arg(long, global = true, value_delimiter = ',')]
    window: Option<Vec<i64>>,

    /// Grid override as re_lo,re_hi,im_lo,im_hi,resolution.
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,

    /// Output directory for artifact files (factor dumps, component maps).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the winding number of a symbol.
    Wind { symbol: PathBuf },
    /// Print the index report of an operator.
    Index { operator: PathBuf },
    /// Factor an operator and write a factor dump next to the report.
    Factor {
        operator: PathBuf,
        /// Presentation of the factorization.
        #[arg(long, value_enum, default_value_t = Form::Skeleton)]
        form: Form,
    },
    /// Map the spectral complement components of a symbol over a grid.
    Specmap { symbol: PathBuf },
    /// Re-verify a factor dump against the operator it claims to factor.
    Verify { operator: PathBuf, dump: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Form {
    Skeleton,
    Alternative,
    Dilation,
}

fn main() {
    let cli = Cli::parse();
    let code = match try_run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

/// Maps every library error to the exit-code contract.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotInvertible { .. }
        | Error::DiagonalBlockSingular { .. }
        | Error::SingularTruncation { .. }
        | Error::NormExceedsOne { .. }
        | Error::NotPartialIsometry { .. }
        | Error::NotSkeleton { .. }
        | Error::InfiniteDefect { .. } => 2,
        Error::GridUnderresolved { .. }
        | Error::TruncationFailure { .. }
        | Error::WindowTooSmall { .. }
        | Error::NotConverged { .. }
        | Error::NotStabilized { .. }
        | Error::DecayCheckFailed { .. }
        | Error::ResidualTooLarge { .. }
        | Error::IndexJump { .. }
        | Error::IndexMismatch { .. }
        | Error::InconsistentComponent { .. }
        | Error::ReportDisagreement { .. } => 3,
        Error::InvalidInput(_) | Error::Io(_) => 4,
    }
}

fn try_run(cli: &Cli) -> Result<i32> {
    let config = load_config(cli)?;
    match &cli.cmd {
        Cmd::Wind { symbol } => cmd_wind(symbol, &config),
        Cmd::Index { operator } => cmd_index(operator, cli.p_cut, &config),
        Cmd::Factor { operator, form } => cmd_factor(operator, *form, cli.p_cut, &config),
        Cmd::Specmap { symbol } => cmd_specmap(symbol, &config),
        Cmd::Verify { operator, dump } => cmd_verify(operator, dump, &config),
    }
}

/// Config file, then flag overrides; the merged schedule and grid are
/// re-validated.
fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(schedule) = &cli.window {
        if schedule.is_empty()
            || schedule.windows(2).any(|w| w[0] >= w[1])
            || schedule[0] <= 0
        {
            return Err(Error::InvalidInput(
                "window schedule must be positive and strictly increasing".into(),
            ));
        }
        config.window_schedule = schedule.clone();
    }
    if let Some(spec) = &cli.grid {
        config.grid = Some(parse_grid_flag(spec)?);
    }
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.display().to_string());
    }
    Ok(config)
}

fn parse_grid_flag(spec: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 5 {
        return Err(Error::InvalidInput(format!(
            "grid must be re_lo,re_hi,im_lo,im_hi,resolution, got {} fields",
            parts.len()
        )));
    }
    let bound = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad grid bound {s:?}")))
    };
    let res: usize = parts[4]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad grid resolution {:?}", parts[4])))?;
    GridSpec::new(bound(parts[0])?, bound(parts[1])?, bound(parts[2])?, bound(parts[3])?, res, res)
}

fn cmd_wind(symbol: &Path, config: &RunConfig) -> Result<i32> {
    let f = parse_symbol(&std::fs::read_to_string(symbol)?)?;
    let w = f.winding_number(&config.tolerances())?;
    println!("{w}");
    Ok(0)
}

fn cmd_index(operator: &Path, p_cut: i64, config: &RunConfig) -> Result<i32> {
    let x = parse_operator(&std::fs::read_to_string(operator)?)?;
    let tol = config.tolerances();
    let p = HardyProjection::new(p_cut);
    let analytic = if x.is_correction_free() {
        Some(analytic_index(x.symbol(), &tol)?)
    } else {
        None
    };
    let numeric = numeric_index(&x, &p, &tol)?;
    let report = IndexReport::new(
        analytic,
        Some(numeric.value),
        None,
        true,
        numeric.window_used,
        tol,
    )?;
    print!("{}", emit_index_report(&report));
    Ok(0)
}

fn cmd_factor(operator: &Path, form: Form, p_cut: i64, config: &RunConfig) -> Result<i32> {
    let x = parse_operator(&std::fs::read_to_string(operator)?)?;
    let tol = config.tolerances();
    let p = HardyProjection::new(p_cut);

    if form == Form::Dilation {
        let w = TruncationWindow::new(config.window_schedule[0], 8);
        let d = halmos_dilation(&x, w, &tol)?;
        let mut line = String::from("{\"form\": \"dilation\"");
        let _ = write!(line, ", \"half\": {}", d.half);
        let _ = write!(line, ", \"norm_estimate\": {:.16e}", d.norm_estimate);
        let _ = write!(line, ", \"defect_rank_upper\": {}", d.defect_rank_upper);
        let _ = write!(line, ", \"defect_rank_lower\": {}", d.defect_rank_lower);
        let _ = write!(line, ", \"two_scale_defect\": {:.16e}", d.two_scale_defect);
        let _ = write!(line, ", \"unitary_defect\": {:.16e}}}", d.unitary_defect);
        println!("{line}");
        return Ok(0);
    }

    let alt = if form == Form::Alternative {
        Some(alternative_scheduled(&x, &p, &config.window_schedule, &tol)?)
    } else {
        None
    };
    let fact = match &alt {
        Some(a) => a.base.clone(),
        None => skeleton_factor_scheduled(&x, &p, &config.window_schedule, &tol)?,
    };
    let report = verify_factorization(&fact, &x, &tol)?;
    print!("{}", emit_factor_report(&report));
    if let Some(a) = &alt {
        println!("{}", form_line(a));
    }

    let dir = output_dir(config)?;
    let stem = operator
        .file_stem()
        .map_or_else(|| "operator".to_string(), |s| s.to_string_lossy().into_owned());
    let dump_path = dir.join(format!("{stem}.factor.json"));
    std::fs::write(&dump_path, emit_factor_dump(&fact))?;
    log_run(&dir, &format!("factor {}", operator.display()))?;
    Ok(0)
}

/// Walks the schedule like `skeleton_factor_scheduled`, for the relabeled
/// form.
fn alternative_scheduled(
    x: &CorrectedLaurentOp,
    p: &HardyProjection,
    schedule: &[i64],
    tol: &Tolerances,
) -> Result<AlternativeFactorization> {
    let mut last = None;
    for &n in schedule {
        match alternative_factor(x, p, TruncationWindow::new(n, 8), tol) {
            Ok(f) => return Ok(f),
            Err(
                e @ (Error::NotConverged { .. }
                | Error::WindowTooSmall { .. }
                | Error::ResidualTooLarge { .. }),
            ) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::InvalidInput("empty window schedule".into())))
}

fn form_line(alt: &AlternativeFactorization) -> String {
    match &alt.form {
        AlternativeForm::TwoFactor => {
            format!("{{\"form\": \"two_factor\", \"n\": {}}}", alt.base.n)
        }
        AlternativeForm::DirectSum { subspaces, direction } => {
            let residues: Vec<String> =
                subspaces.iter().map(|s| s.residue.to_string()).collect();
            format!(
                "{{\"form\": \"direct_sum\", \"n\": {}, \"modulus\": {}, \"direction\": \"{}\", \"residues\": [{}]}}",
                alt.base.n,
                subspaces.first().map_or(0, |s| s.modulus),
                match direction {
                    ShiftDirection::Forward => "forward",
                    ShiftDirection::Backward => "backward",
                },
                residues.join(", ")
            )
        }
    }
}

fn cmd_specmap(symbol: &Path, config: &RunConfig) -> Result<i32> {
    let f = parse_symbol(&std::fs::read_to_string(symbol)?)?;
    let tol = config.tolerances();
    let grid = match config.grid {
        Some(g) => g,
        None => {
            // Coarse pass to find the extent; winding_map resamples finely.
            let curve = spectrum_curve(&f, 256, 1e6)?;
            GridSpec::covering(&curve, 201, 201)?
        }
    };
    let map = winding_map(&f, &grid, &tol)?;
    let components = emit_components(&map);
    print!("{components}");

    let dir = output_dir(config)?;
    let stem = symbol
        .file_stem()
        .map_or_else(|| "symbol".to_string(), |s| s.to_string_lossy().into_owned());
    std::fs::write(dir.join(format!("{stem}.components.json")), &components)?;
    std::fs::write(dir.join(format!("{stem}.grid.csv")), emit_grid_csv(&map))?;
    log_run(&dir, &format!("specmap {}", symbol.display()))?;
    Ok(0)
}

fn cmd_verify(operator: &Path, dump: &Path, config: &RunConfig) -> Result<i32> {
    let x = parse_operator(&std::fs::read_to_string(operator)?)?;
    let fact = parse_factor_dump(&std::fs::read_to_string(dump)?)?;
    let tol = config.tolerances();
    let report = verify_factorization(&fact, &x, &tol)?;
    print!("{}", emit_verify_report(&report, &tol));
    Ok(if report.passed(&tol) { 0 } else { 5 })
}

fn output_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(config.output_dir.as_deref().unwrap_or("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Sidecar log; the only place a timestamp is ever written.
fn log_run(dir: &Path, what: &str) -> Result<()> {
    use std::io::Write as _;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("run.log"))?;
    writeln!(file, "{stamp} {what}")?;
    Ok(())
}
