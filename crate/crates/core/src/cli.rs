//! Command line driver.
//!
//! Exit codes: `0` when every check passes, `1` when a check fails, `2` on
//! errors (bad configuration, unreadable input, failed computation).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};
use twofloat::TwoFloat;

use crate::config::{Precision, RunConfig};
use crate::deform::{
    canonical_deformation, coboundary_controls, deform_form, first_order_data, match_report, second_order_data, universal_family_report,
    DeformationPackage, Settings,
};
use crate::error::{Error, Result};
use crate::mmv::{classical_from_cocycle, canonical_cocycle, default_normalization, iterated_series, mmv_functional};
use crate::modforms::CuspForm;
use crate::qpoly::fmt15;
use crate::report::{Report, Worst};
use crate::scalar::{from_c64, to_c64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Functional and classical multiple modular values as CSV.
    Mmv,
    /// Period polynomials and first order checks.
    Periods,
    /// Second order package and the universal family.
    Deform,
    /// Canonical deformation from the iterated integrals.
    Canonical,
    /// Everything.
    Verify,
}

#[derive(Debug, Parser)]
#[command(name = "logdef", version, about = "Logarithmic deformations of modular forms")]
pub struct Args {
    /// TOML configuration; the bundled default is used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "verify")]
    pub command: Command,
    /// Report path; tables go next to it with a `.csv` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `sampling.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `NAME=VALUE`, repeatable.
    #[arg(long = "tolerance", value_parser = parse_tolerance)]
    pub tolerances: Vec<(String, f64)>,
}

fn parse_tolerance(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = value.trim().parse().map_err(|e| format!("tolerance `{name}`: {e}"))?;
    Ok((name.trim().to_string(), v))
}

/// Output of one run.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub json: Value,
    pub csv: Option<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            0
        } else {
            1
        }
    }
}

/// Parses arguments, runs, writes outputs and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(args: &Args) -> Result<i32> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::bundled(),
    };
    if let Some(seed) = args.seed {
        cfg.sampling.seed = seed;
    }
    for (name, v) in &args.tolerances {
        cfg.tolerances.insert(name.clone(), *v);
    }
    cfg.tolerances()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let outcome = run(&cfg, args.command)?;
    let out = args.out.clone().or_else(|| cfg.output.as_ref().map(|p| if p.is_absolute() { p.clone() } else { cfg.base_dir.join(p) }));
    let text = serde_json::to_string_pretty(&outcome.json).map_err(|e| Error::Io(e.to_string()))? + "\n";
    match &out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    if let Some(csv) = &outcome.csv {
        match &out {
            Some(p) => {
                let path = p.with_extension("csv");
                std::fs::write(&path, csv).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            }
            None => print!("{csv}"),
        }
    }
    for (name, c) in &outcome.report.checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        eprintln!("{verdict} {name} = {:e} (tolerance {:e}) {}", fmt15(c.value), c.tolerance, c.witness);
    }
    Ok(outcome.exit_code())
}

/// Runs `command` at the configured precision.
pub fn run(cfg: &RunConfig, command: Command) -> Result<Outcome> {
    match cfg.numerics.precision {
        Precision::F32 => run_with::<f32>(cfg, command),
        Precision::F64 => run_with::<f64>(cfg, command),
        Precision::DoubleDouble => run_with::<TwoFloat>(cfg, command),
    }
}

fn run_with<R: Real>(cfg: &RunConfig, command: Command) -> Result<Outcome> {
    let settings = cfg.settings()?;
    let h: CuspForm<R> = cfg.form()?;
    let mut report = Report::new();
    let mut package = serde_json::Map::new();
    package.insert("command".into(), json!(format!("{command:?}").to_lowercase()));
    package.insert("group".into(), json!(cfg.group()?.label()));
    package.insert("precision".into(), json!(format!("{:?}", cfg.numerics.precision)));
    package.insert("seed".into(), json!(settings.seed));
    let mut csv = None;
    match command {
        Command::Mmv => {
            let (table, r) = mmv_table(&h, cfg, &settings)?;
            report.extend(r);
            csv = Some(table);
        }
        Command::Periods => {
            let pkg = first_order_data(&h, &settings)?;
            report.extend(pkg.report.clone());
            report.extend(coboundary_controls(&pkg, &settings)?);
            package.insert("deformation".into(), pkg.to_json());
        }
        Command::Deform => {
            let pkg = package_for(&h, cfg, &settings)?;
            report.extend(pkg.report.clone());
            package.insert("deformation".into(), pkg.to_json());
            if pkg.verified() {
                report.extend(universal_family_report(&pkg, &settings)?);
                if let Some(f) = cfg.extra_input::<R>()? {
                    let k = f.weight() as i64;
                    let series = deform_form(&f.expansion(), k, &pkg)?;
                    let terms: Vec<Value> = series.iter().map(|(m, e)| json!({"rho": m, "expansion": e.to_json()})).collect();
                    package.insert("deformed_input".into(), json!({"label": f.label(), "weight": k, "terms": terms}));
                }
            } else {
                report.note("universal_family_skipped", 1.0);
            }
        }
        Command::Canonical => {
            let pkg = first_order_data(&h, &settings)?;
            let canon = canonical_deformation(&h, cfg.numerics.depth_max, &pkg.a1, &settings)?;
            report.extend(canon.report.clone());
            package.insert("canonical".into(), canonical_json(&canon));
        }
        Command::Verify => {
            let pkg = package_for(&h, cfg, &settings)?;
            report.extend(pkg.report.clone());
            report.extend(coboundary_controls(&pkg, &settings)?);
            package.insert("deformation".into(), pkg.to_json());
            let canon = canonical_deformation(&h, cfg.numerics.depth_max, &pkg.a1, &settings)?;
            report.extend(canon.report.clone());
            package.insert("canonical".into(), canonical_json(&canon));
            if pkg.verified() {
                report.extend(universal_family_report(&pkg, &settings)?);
                if pkg.order >= 2 {
                    let (m, r) = match_report(&pkg, &canon, &settings)?;
                    report.extend(r);
                    let l = |p: usize| {
                        let z = to_c64(m.scaling.lambda(0, p));
                        json!([fmt15(z.re), fmt15(z.im)])
                    };
                    package.insert("match".into(), json!({"lambda1": l(1), "lambda2": l(2)}));
                }
            } else {
                report.note("universal_family_skipped", 1.0);
            }
        }
    }
    let json = report.to_json(Value::Object(package));
    Ok(Outcome { report, json, csv })
}

fn package_for<R: Real>(h: &CuspForm<R>, cfg: &RunConfig, settings: &Settings) -> Result<DeformationPackage<R>> {
    if cfg.numerics.rho_max == 1 {
        first_order_data(h, settings)
    } else {
        if cfg.numerics.rho_max > 2 {
            eprintln!("warning: numerics.rho_max = {} but the package is built to order 2", cfg.numerics.rho_max);
        }
        second_order_data(h, settings)
    }
}

fn canonical_json<R: Real>(canon: &crate::deform::CanonicalData<R>) -> Value {
    let constants: Vec<Value> = canon
        .constants
        .iter()
        .map(|(g, k)| {
            let z = to_c64(*k);
            json!({"gamma": g.entries(), "kappa": [fmt15(z.re), fmt15(z.im)]})
        })
        .collect();
    let ops: Vec<Value> = canon.ops.iter().map(|(g, op)| json!({"gamma": g.entries(), "op": op.to_json()})).collect();
    json!({"constants": constants, "ops": ops})
}

fn power_tuples(depth: usize) -> Vec<Vec<u32>> {
    (0..3usize.pow(depth as u32))
        .map(|mut n| {
            (0..depth)
                .map(|_| {
                    let d = (n % 3) as u32;
                    n /= 3;
                    d
                })
                .collect()
        })
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Rows `kind, gamma, tau, word, indices, re, im, deviation`: functional
/// values at each configured `τ`, classical values read from the canonical
/// cocycle of each sampled element together with its `τ`-deviation.
fn mmv_table<R: Real>(h: &CuspForm<R>, cfg: &RunConfig, settings: &Settings) -> Result<(String, Report)> {
    let depth = cfg.numerics.depth_max;
    let nq = h.nq();
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["kind", "gamma", "tau", "word", "indices", "re", "im", "deviation"]).map_err(io)?;
    let num = |x: f64| format!("{:e}", fmt15(x));
    for d in 1..=depth {
        let word = vec![0usize; d];
        let forms = vec![h; d];
        for powers in power_tuples(d) {
            let v = mmv_functional(&forms, &powers, nq)?;
            for tau in &settings.tau_samples {
                let z = to_c64(v.evaluate(from_c64::<R>(*tau))?);
                let t = format!("{}{:+}i", tau.re, tau.im);
                w.write_record(["functional", "", &t, &join(&word), &join(&powers), &num(z.re), &num(z.im), ""]).map_err(io)?;
            }
        }
    }
    let series = iterated_series(std::slice::from_ref(h), depth, nq)?;
    let norms = [default_normalization::<R>()];
    let mut tau_w = Worst::new();
    for g in settings.gammas.iter().filter(|g| g.c() != 0) {
        let taus: Vec<_> = crate::groups::sample_points(g, &settings.tau_samples, settings.tau_samples.len(), settings.min_imag)?
            .into_iter()
            .map(from_c64::<R>)
            .collect();
        let c = canonical_cocycle(&series, g, &taus, settings.min_imag)?;
        tau_w.update(c.deviation, || format!("gamma={g}"));
        for d in 1..=depth {
            let word = vec![0usize; d];
            for powers in power_tuples(d) {
                let z = to_c64(classical_from_cocycle(&c.mean, &word, &powers, &norms)?);
                w.write_record(["classical", &g.to_string(), "", &join(&word), &join(&powers), &num(z.re), &num(z.im), &num(c.deviation)])
                    .map_err(io)?;
            }
        }
    }
    let mut report = Report::new();
    report.below("canonical_tau", tau_w, settings.tolerances.get("canonical_tau"));
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok((String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?, report))
}

/// Convenience for callers holding a path.
pub fn run_path(config: &Path, command: Command) -> Result<Outcome> {
    run(&RunConfig::load(config)?, command)
}
