//! The `caloric-lab` command line: argument parsing, dispatch, artifacts and
//! exit codes (0 pass, 2 certificate failure, 1 usage or runtime error).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::carleman::weights::write_table_csv;
use crate::carleman::{carleman_inequality_eval, check_sigma_ode, sigma_table, BumpField};
use crate::certifiers::{
    decay_lemma_check, doubling_certificate, frequency_bound_at_zero, gaussian_bounds_check, hardy_check,
    implied_doubling, muckenhoupt_check, space_time_doubling, three_sphere_optimality, two_sphere_one_cylinder,
    CertificateReport,
};
use crate::config::{config_hash, ExperimentConfig, FieldConfig};
use crate::error::{ErrorKind, Result};
use crate::frequency::{trace, write_trace_csv, CutoffField};
use crate::io::{to_json, write_field};
use crate::numerics::{GaussianWeight, SpaceTimeField};
use crate::oracles::catalog;
use crate::solver::solve;
use crate::suite::{run_suite, SuiteName};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// Where unflagged runs write their artifacts.
pub const DEFAULT_OUT: &str = "caloric-lab-out";

#[derive(Debug, Parser)]
#[command(name = "caloric-lab", version, about = "Quantitative unique continuation experiments for parabolic equations")]
pub struct Cli {
    /// Directory for reports, tables and fields.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// The closed-form solution catalog.
    Oracles {
        #[command(subcommand)]
        action: OraclesAction,
    },
    /// Solve the configured problem and write the field with a JSON sidecar.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Frequency trace `t ↦ (H, D, N, Ḣ, Ṅ)` of the configured field.
    Trace {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate one inequality and write its report.
    Certify {
        name: CertifierName,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Certify a catalog oracle instead of the configured field.
        #[arg(long)]
        oracle: Option<String>,
        /// Gaussian offset for `hardy`, replacing the configured list.
        #[arg(long)]
        a: Option<f64>,
    },
    /// Carleman weight tables, the weight equation, or the inequality.
    Carleman {
        action: CarlemanAction,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a pinned acceptance suite: identities, constants, carleman or all.
    Suite { name: String },
}

#[derive(Debug, Subcommand)]
pub enum OraclesAction {
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum CertifierName {
    Hardy,
    FrequencyBound,
    ImpliedDoubling,
    Doubling,
    TwoSphere,
    SpaceTime,
    Decay,
    Muckenhoupt,
    ThreeSphere,
    GaussianBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CarlemanAction {
    Weights,
    Ode,
    Inequality,
}

/// Outcome of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn code(self) -> i32 {
        match self {
            Status::Pass => EXIT_PASS,
            Status::Fail => EXIT_FAIL,
        }
    }
}

/// Exit code for an error: the certifier verdicts that a hypothesis fails or
/// no constant exists count as certificate failures.
pub fn error_code(e: &crate::Error) -> i32 {
    match e.kind {
        ErrorKind::HypothesisFails(_) | ErrorKind::NoAdmissibleConstant { .. } => EXIT_FAIL,
        _ => EXIT_ERROR,
    }
}

/// Caps rayon's pool from `CALORIC_LAB_THREADS`.
pub fn configure_threads(value: Option<&str>) -> Result<()> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ErrorKind::Config(format!("CALORIC_LAB_THREADS = '{v}' is not a positive integer")).at("cli", "run"))?;
    // a pool may already exist when running in-process more than once
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` and runs; returns the exit code. Output goes to `out`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads(std::env::var("CALORIC_LAB_THREADS").ok().as_deref()) {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    match run(&cli, out) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> crate::Error {
    ErrorKind::Io(format!("{}: {e}", path.display())).at("cli", "run")
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| ErrorKind::Io(e.to_string()).at("cli", "run"))
}

struct Artifacts {
    dir: PathBuf,
    summary: Vec<String>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Self { dir, summary: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, to_json(value)?).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    fn file(&self, name: &str) -> Result<(PathBuf, fs::File)> {
        let path = self.path(name);
        let f = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        Ok((path, f))
    }

    fn note(&mut self, out: &mut dyn Write, line: String) -> Result<()> {
        say(out, &line)?;
        self.summary.push(line);
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let path = self.path("summary.txt");
        let mut text = self.summary.join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}

fn load(config: Option<&Path>) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn out_dir(cli: &Cli, config: &ExperimentConfig) -> PathBuf {
    cli.out.clone().or_else(|| config.output.dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Hash of the effective configuration, overrides included.
fn effective_hash(config: &ExperimentConfig) -> Result<String> {
    Ok(config_hash(&to_json(config)?))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Status> {
    match &cli.command {
        Command::Oracles { action: OraclesAction::List } => {
            for o in catalog() {
                say(out, format!("{}\t{}\t{}", o.name(), o.dim(), o.formula()))?;
            }
            Ok(Status::Pass)
        }
        Command::Solve { config } => solve_cmd(cli, &load(Some(config))?, out),
        Command::Trace { config } => trace_cmd(cli, &load(Some(config))?, out),
        Command::Certify { name, config, oracle, a } => {
            let mut cfg = load(config.as_deref())?;
            if let Some(o) = oracle {
                cfg.field = Some(FieldConfig { oracle: Some(o.clone()), ..Default::default() });
            }
            if let Some(a) = a {
                cfg.certify.hardy.a = vec![*a];
            }
            cfg.validate()?;
            certify_cmd(cli, *name, &cfg, out)
        }
        Command::Carleman { action, config } => carleman_cmd(cli, *action, &load(config.as_deref())?, out),
        Command::Suite { name } => {
            let suite: SuiteName = name.parse()?;
            let mut art = Artifacts::new(out_dir(cli, &ExperimentConfig::default()))?;
            let mut lines = Vec::new();
            let report = run_suite(suite, |o| {
                let line = o.line();
                let _ = say(out, &line);
                lines.push(line);
            })?;
            art.summary = lines;
            let path = art.json(&format!("suite_{suite}.json"), &report)?;
            let verdict = if report.pass { "PASS" } else { "FAIL" };
            art.note(out, format!("suite {suite}: {verdict}, report {}", path.display()))?;
            art.finish()?;
            Ok(Status::from_pass(report.pass))
        }
    }
}

fn solve_cmd(cli: &Cli, config: &ExperimentConfig, out: &mut dyn Write) -> Result<Status> {
    let solver = config
        .field
        .as_ref()
        .and_then(|f| f.solver.as_ref())
        .ok_or_else(|| ErrorKind::Config("solve needs [field.solver]".into()).at("cli", "solve"))?;
    let spec = solver.spec()?;
    let field = solve(&spec)?;
    let mut art = Artifacts::new(out_dir(cli, config))?;
    let (bin, file) = art.file("field.bin")?;
    write_field(&field, std::io::BufWriter::new(file))?;
    let sidecar = json!({
        "label": field.label(),
        "spec": spec,
        "solver": solver,
        "config_hash": effective_hash(config)?,
        "version": env!("CARGO_PKG_VERSION"),
    });
    art.json("field.json", &sidecar)?;
    art.note(out, format!("solved {}: {} values, written to {}", field.label(), field.values().len(), bin.display()))?;
    art.finish()?;
    Ok(Status::Pass)
}

fn trace_cmd(cli: &Cli, config: &ExperimentConfig, out: &mut dyn Write) -> Result<Status> {
    let u = config.field()?;
    let n = u.dim();
    let tc = &config.trace;
    let center = if tc.center.is_empty() { vec![0.0; n] } else { tc.center.clone() };
    let weight = GaussianWeight::centered(n, &center, tc.offset)?;
    let field: Arc<dyn SpaceTimeField> = if tc.cutoff { Arc::new(CutoffField::psi(u)) } else { u };
    let tr = trace(&*field, &weight, &tc.times, &config.quadrature)?;
    let mut art = Artifacts::new(out_dir(cli, config))?;
    let (csv, file) = art.file("trace.csv")?;
    write_trace_csv(&tr, file)?;
    art.json("trace.json", &json!({ "trace": tr, "config_hash": effective_hash(config)?, "field": field.label() }))?;
    let min_ndot = tr.n_dot.iter().copied().fold(f64::INFINITY, f64::min);
    art.note(out, format!("trace of {} at a = {}: {} times, min Ndot {min_ndot:.3e}, {}", field.label(), tc.offset, tr.t.len(), csv.display()))?;
    art.finish()?;
    Ok(Status::Pass)
}

/// Runs one certifier on the configuration.
pub fn certify(name: CertifierName, config: &ExperimentConfig) -> Result<CertificateReport> {
    let c = &config.certify;
    let rule = &config.quadrature;
    let report = match name {
        CertifierName::ThreeSphere => three_sphere_optimality(&c.three_sphere)?,
        CertifierName::GaussianBounds => {
            let g = &c.gaussian_bounds;
            let coeff = g.coefficients()?;
            let source = g.source_point(coeff.grid().dim());
            gaussian_bounds_check(&coeff, g.lower_order, &source, g.source_time, &g.options())?
        }
        _ => {
            let u = config.field()?;
            match name {
                CertifierName::Hardy => {
                    let parts = c.hardy.a.iter().map(|&a| hardy_check(&*u, c.hardy.t, a, rule)).collect::<Result<Vec<_>>>()?;
                    CertificateReport::merge(parts)
                        .ok_or_else(|| ErrorKind::Config("[certify.hardy] a is empty".into()).at("cli", "certify"))?
                }
                CertifierName::FrequencyBound => frequency_bound_at_zero(u, &c.frequency_bound, rule)?,
                CertifierName::ImpliedDoubling => {
                    let ic = &c.implied_doubling;
                    let (n, theta) = match (ic.n, ic.theta) {
                        (Some(n), Some(t)) => (n, t),
                        _ => {
                            let fb = frequency_bound_at_zero(u.clone(), &c.frequency_bound, rule)?;
                            let h = &fb.details["handoff"];
                            (ic.n.or(h["n"].as_f64()).unwrap_or(f64::NAN), ic.theta.or(h["theta"].as_f64()).unwrap_or(f64::NAN))
                        }
                    };
                    implied_doubling(&CutoffField::psi(u), n, theta, &ic.options(), rule)?
                }
                CertifierName::Doubling => doubling_certificate(&*u, &c.doubling.radii)?,
                CertifierName::TwoSphere => {
                    let nd = match c.two_sphere.doubling {
                        Some(n) => Some(n),
                        None => doubling_certificate(&*u, &c.two_sphere.radii)?.constant,
                    };
                    two_sphere_one_cylinder(&*u, &c.two_sphere.radii, nd)?
                }
                CertifierName::SpaceTime => {
                    let nd = match c.space_time.doubling {
                        Some(n) => n,
                        None => doubling_certificate(&*u, &c.space_time.radii)?.constant.unwrap_or(f64::NAN),
                    };
                    space_time_doubling(&*u, nd, &c.space_time.options())?
                }
                CertifierName::Decay => decay_lemma_check(&*u, &c.decay)?,
                CertifierName::Muckenhoupt => muckenhoupt_check(&*u, &c.muckenhoupt)?,
                CertifierName::ThreeSphere | CertifierName::GaussianBounds => unreachable!(),
            }
        }
    };
    Ok(report.with_config_hash(&effective_hash(config)?))
}

fn certify_cmd(cli: &Cli, name: CertifierName, config: &ExperimentConfig, out: &mut dyn Write) -> Result<Status> {
    let report = certify(name, config)?;
    let label = name.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let target = cli.out.clone().filter(|p| p.extension().is_some_and(|e| e == "json"));
    let (mut art, file) = match target {
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
            let file = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            (Artifacts::new(dir)?, file)
        }
        None => (Artifacts::new(out_dir(cli, config))?, format!("{label}.json")),
    };
    let path = art.json(&file, &report)?;
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    art.note(
        out,
        format!("{verdict} {}: constant {:?}, {} samples, report {}", report.inequality, report.constant, report.lhs.len(), path.display()),
    )?;
    art.finish()?;
    Ok(Status::from_pass(report.pass))
}

fn carleman_cmd(cli: &Cli, action: CarlemanAction, config: &ExperimentConfig, out: &mut dyn Write) -> Result<Status> {
    let cc = &config.carleman;
    let mut art = Artifacts::new(out_dir(cli, config))?;
    let hash = effective_hash(config)?;
    let mut pass = true;
    match action {
        CarlemanAction::Weights => {
            let mut rows = Vec::new();
            for gamma in cc.gammas() {
                let table = sigma_table(gamma, cc.points, cc.tol)?;
                let (csv, file) = art.file(&format!("sigma_gamma{gamma}.csv"))?;
                write_table_csv(&table, file)?;
                let ok = table.below_identity && table.nondecreasing;
                pass &= ok;
                art.note(
                    out,
                    format!("gamma {gamma}: N_sigma {:.6}, sigma <= t {}, nondecreasing {}, {}", table.n_sigma, table.below_identity, table.nondecreasing, csv.display()),
                )?;
                rows.push(json!({ "gamma": gamma, "n_sigma": table.n_sigma, "below_identity": table.below_identity, "nondecreasing": table.nondecreasing, "pass": ok }));
            }
            art.json("weights.json", &json!({ "tables": rows, "config_hash": hash }))?;
        }
        CarlemanAction::Ode => {
            let mut reports = Vec::new();
            for gamma in cc.gammas() {
                let r = check_sigma_ode(gamma, cc.ode_points, cc.tol)?;
                pass &= r.pass;
                art.note(out, format!("gamma {gamma}: max relative residual {:.3e}, pass {}", r.max_relative_residual, r.pass))?;
                reports.push(r);
            }
            art.json("ode.json", &json!({ "reports": reports, "config_hash": hash }))?;
        }
        CarlemanAction::Inequality => {
            let mut reports = Vec::new();
            for &alpha in &cc.alpha {
                let params = cc.params(alpha)?;
                let bump = BumpField::pinned(1, alpha)?;
                let r = carleman_inequality_eval(&bump, &cc.coefficients, &params, bump.duration(), &cc.quadrature)?;
                let refined = if cc.refine {
                    Some(carleman_inequality_eval(&bump, &cc.coefficients, &params, bump.duration(), &cc.quadrature.refined())?)
                } else {
                    None
                };
                let change = refined.as_ref().map(|f| (f.n_star - r.n_star).abs() / r.n_star);
                let ok = r.n_star.is_finite() && change.is_none_or(|c| c <= 0.1);
                pass &= ok;
                art.note(out, format!("alpha {alpha}: N* {:.6}, refinement change {change:?}, minimal {}", r.n_star, r.minimal))?;
                reports.push(json!({ "alpha": alpha, "report": r, "refined": refined, "change": change, "pass": ok }));
            }
            art.json("inequality.json", &json!({ "reports": reports, "config_hash": hash }))?;
        }
    }
    art.finish()?;
    Ok(Status::from_pass(pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = main_with(std::iter::once("caloric-lab").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn oracles_list() {
        let (code, text) = run_args(&["oracles", "list"]);
        assert_eq!(code, 0);
        assert!(text.lines().any(|l| l.starts_with("const1\t")));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["suite", "everything"]).0, EXIT_ERROR);
        assert_eq!(run_args(&["certify", "nonsense"]).0, EXIT_ERROR);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_ERROR);
    }

    #[test]
    fn threads_must_be_positive() {
        assert!(configure_threads(Some("0")).is_err());
        assert!(configure_threads(Some("two")).is_err());
        assert!(configure_threads(None).is_ok());
    }

    #[test]
    fn verdict_errors_map_to_failure() {
        let e = ErrorKind::NoAdmissibleConstant { cap: 1e6 }.at("certifiers", "x");
        assert_eq!(error_code(&e), EXIT_FAIL);
        assert_eq!(error_code(&ErrorKind::Config("x".into()).at("cli", "x")), EXIT_ERROR);
    }
}
