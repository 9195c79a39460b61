//! `winding`: search winding classes for periodic orbits, attach indices, predict
//! subharmonic counts and check the index identities.
//!
//! Exit codes: 0 on success (including empty results), 1 when a property check fails or
//! a prediction is violated, 2 on usage, configuration or I/O errors.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use winding_orbits::catalog::{attach_all, build_catalog, parse_records, records, to_json, trajectory_csv, Catalog};
use winding_orbits::counting::{
    build_chi, confront, default_max_index, default_tol_tau, is_prime, morse_relation_check, predict, ChiTable,
    MorseRelationReport, PredictionReport,
};
use winding_orbits::dynamics::CoefficientPath;
use winding_orbits::orbit_search::{OrbitClass, PeriodicOrbit, SearchBudget, Tolerances};
use winding_orbits::potential::PotentialSpec;
use winding_orbits::spectral_index::{verify_index_properties, IndexReport, PropertyReport};

#[derive(Parser, Debug)]
#[command(name = "winding", version, about = "Periodic orbits, Morse/Bott indices and subharmonic counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search a winding class and write `orbits.json` plus per-orbit CSV samples.
    Find(RunArgs),
    /// Recompute index reports for a catalog and write `indices.json`.
    Index(RunArgs),
    /// Predict mod-p subharmonic bounds and confront them with a search of `(p k1, p k2)`.
    Predict(RunArgs),
    /// Check the Bott-index identities on a catalog or a constant coefficient.
    Properties(RunArgs),
    /// Run `find`, `predict` (when `--p` is given) and `properties`.
    Verify(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Potential JSON file, or a built-in family such as `forced_pendulum(0.5)`.
    #[arg(long)]
    potential: Option<String>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    k1: i64,
    #[arg(long, default_value_t = 1)]
    k2: u32,
    /// Prime multiple for subharmonic predictions.
    #[arg(long)]
    p: Option<u32>,
    /// Grid size N; defaults to 256 nodes per base period.
    #[arg(long)]
    grid: Option<usize>,
    /// Quadrature angles on [0, pi] for the twisting frequency.
    #[arg(long, default_value_t = 720)]
    angles: usize,
    /// Straight-loop seeds; the shooting grid uses the same count for positions and velocities.
    #[arg(long, default_value_t = 32)]
    seeds: usize,
    #[arg(long, default_value_t = 60)]
    max_newton: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol_residual: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_degenerate: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_dedup: f64,
    /// Merge tolerance for twisting frequencies; defaults to 0.5 / (p k2 T0).
    #[arg(long)]
    tol_tau: Option<f64>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Existing `orbits.json` to use instead of a fresh search.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Constant coefficient `A = a` for the property suite, as `a=<value>`.
    #[arg(long, value_parser = parse_synthetic)]
    synthetic: Option<f64>,
}

fn parse_synthetic(s: &str) -> std::result::Result<f64, String> {
    let value = s.strip_prefix("a=").ok_or_else(|| format!("expected a=<value>, got '{s}'"))?;
    let a: f64 = value.trim().parse().map_err(|_| format!("'{value}' is not a number"))?;
    if a.is_finite() {
        Ok(a)
    } else {
        Err(format!("'{value}' is not finite"))
    }
}

struct Config {
    spec: Option<PotentialSpec>,
    budget: SearchBudget,
    tol: Tolerances,
    args: RunArgs,
}

impl Config {
    fn from_args(args: RunArgs) -> Result<Self> {
        for (name, v) in [
            ("--tol-residual", args.tol_residual),
            ("--tol-degenerate", args.tol_degenerate),
            ("--tol-dedup", args.tol_dedup),
            ("--tol-tau", args.tol_tau.unwrap_or(1.0)),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive, got {v}");
            }
        }
        if args.k2 == 0 {
            bail!("--k2 must be at least 1");
        }
        if args.angles < 8 {
            bail!("--angles must be at least 8");
        }
        if let Some(p) = args.p {
            if !is_prime(p) {
                bail!("--p {p} is not prime");
            }
        }
        if let Some(n) = args.grid {
            if n % args.k2 as usize != 0 {
                bail!("--grid {n} is not divisible by k2 = {}", args.k2);
            }
        }
        let spec = args.potential.as_deref().map(load_potential).transpose()?;
        let budget = SearchBudget {
            straight_seeds: args.seeds,
            shooting_offsets: args.seeds,
            shooting_velocities: args.seeds,
            max_newton: args.max_newton,
            grid: args.grid,
            workers: args.workers.max(1),
        };
        let tol = Tolerances {
            residual: args.tol_residual,
            degenerate: args.tol_degenerate,
            dedup: args.tol_dedup,
            ..Tolerances::default()
        };
        Ok(Self { spec, budget, tol, args })
    }

    fn spec(&self) -> Result<&PotentialSpec> {
        self.spec.as_ref().context("--potential is required")
    }

    fn class(&self) -> Result<OrbitClass> {
        Ok(OrbitClass::new(self.args.k1, self.args.k2, self.spec()?.t0())?)
    }

    /// Budget for a class `p` times longer: the grid scales with the period.
    fn budget_for(&self, p: u32) -> SearchBudget {
        SearchBudget { grid: self.budget.grid.map(|n| n * p as usize), ..self.budget }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.args.out.join(name)
    }
}

fn load_potential(arg: &str) -> Result<PotentialSpec> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read potential file {arg}"))?;
        return PotentialSpec::parse(&text).with_context(|| format!("invalid potential file {arg}"));
    }
    match PotentialSpec::from_descriptor(arg) {
        Some(spec) => Ok(spec?),
        None => bail!("cannot read potential file {arg}: no such file"),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn print_summary(catalog: &Catalog) {
    let c = catalog.class;
    println!("class ({}, {}), T0 = {}: {} orbit(s)", c.k1, c.k2, c.t0, catalog.orbits.len());
    println!("{:>4} {:>6} {:>11} {:>12} {:>16} {:>11} {:>7}", "id", "index", "type", "tau", "action", "fundamental", "family");
    for (i, o) in catalog.orbits.iter().enumerate() {
        let index = o.morse_index().map_or("-".to_string(), |m| m.to_string());
        let tau = o.tau().map_or("-".to_string(), |t| format!("{t:.6}"));
        let ty = format!("{:?}", o.floquet.floquet_class).to_lowercase();
        println!(
            "{i:>4} {index:>6} {ty:>11} {tau:>12} {:>16.10} {:>11} {:>7}",
            o.action, o.fundamental, o.family_size
        );
    }
}

fn warn_catalog(catalog: &Catalog) {
    if catalog.orbits.is_empty() {
        eprintln!("warning: no orbits found in class ({}, {})", catalog.class.k1, catalog.class.k2);
    } else if catalog.all_degenerate() {
        eprintln!("warning: every orbit in class ({}, {}) is degenerate", catalog.class.k1, catalog.class.k2);
    }
    for (i, msg) in &catalog.index_failures {
        eprintln!("warning: orbit {i}: index identities failed: {msg}");
    }
}

fn write_catalog(cfg: &Config, catalog: &Catalog, name: &str, csv_prefix: &str) -> Result<()> {
    write(&cfg.out(name), &to_json(&records(&catalog.orbits)))?;
    for (i, orbit) in catalog.orbits.iter().enumerate() {
        write(&cfg.out(&format!("{csv_prefix}{i}.csv")), &trajectory_csv(orbit))?;
    }
    Ok(())
}

fn search(cfg: &Config, class: OrbitClass, budget: &SearchBudget) -> Result<Catalog> {
    let catalog = build_catalog(cfg.spec()?, class, budget, &cfg.tol, cfg.args.rng_seed, cfg.args.angles)?;
    warn_catalog(&catalog);
    Ok(catalog)
}

/// Catalog from `--catalog` if given, otherwise a fresh search of the configured class.
fn load_or_search(cfg: &Config) -> Result<Catalog> {
    let class = cfg.class()?;
    let Some(path) = &cfg.args.catalog else {
        return search(cfg, class, &cfg.budget);
    };
    let spec = cfg.spec()?;
    let text = fs::read_to_string(path).with_context(|| format!("cannot read catalog {}", path.display()))?;
    let mut orbits = parse_records(&text)?
        .iter()
        .map(|r| r.to_orbit(spec, cfg.tol.degenerate))
        .collect::<winding_orbits::Result<Vec<PeriodicOrbit>>>()?;
    let class = orbits.first().map_or(class, |o| o.class());
    let index_failures = attach_all(spec, &mut orbits, cfg.args.angles);
    let catalog = Catalog { class, orbits, diagnostics: Default::default(), index_failures };
    warn_catalog(&catalog);
    Ok(catalog)
}

fn cmd_find(cfg: &Config) -> Result<u8> {
    let catalog = search(cfg, cfg.class()?, &cfg.budget)?;
    print_summary(&catalog);
    write_catalog(cfg, &catalog, "orbits.json", "orbit_")?;
    Ok(0)
}

#[derive(Serialize)]
struct IndexRecord<'a> {
    id: usize,
    degenerate: bool,
    index: Option<&'a IndexReport>,
    error: Option<&'a str>,
}

fn cmd_index(cfg: &Config) -> Result<u8> {
    let catalog = load_or_search(cfg)?;
    let rows: Vec<IndexRecord> = catalog
        .orbits
        .iter()
        .enumerate()
        .map(|(i, o)| IndexRecord {
            id: i,
            degenerate: o.is_degenerate(),
            index: o.index.as_ref(),
            error: catalog.index_failures.iter().find(|(j, _)| *j == i).map(|(_, m)| m.as_str()),
        })
        .collect();
    print_summary(&catalog);
    write(&cfg.out("indices.json"), &to_json(&rows))?;
    Ok(0)
}

#[derive(Serialize)]
struct PredictionFile<'a> {
    tol_tau: f64,
    table: &'a ChiTable,
    morse_relations: &'a MorseRelationReport,
    prediction: &'a PredictionReport,
}

fn run_predict(cfg: &Config, primitive_catalog: &Catalog) -> Result<u8> {
    let p = cfg.args.p.context("--p is required for predictions")?;
    let class = primitive_catalog.class;
    if !class.is_primitive() {
        bail!("class ({}, {}) is not primitive", class.k1, class.k2);
    }
    let usable: Vec<PeriodicOrbit> = primitive_catalog
        .orbits
        .iter()
        .filter(|o| !o.is_degenerate() && o.index.is_some())
        .cloned()
        .collect();
    let tol_tau = cfg.args.tol_tau.unwrap_or_else(|| default_tol_tau(&class, p));
    let table = build_chi(&usable, &class, tol_tau)?;
    let relations = morse_relation_check(&usable)?;
    if !relations.passed {
        eprintln!("warning: Morse relations fail for class ({}, {}); the search may be incomplete", class.k1, class.k2);
    }
    let report = predict(&table, p, &class, default_max_index(&table, p, &class))?;
    write(
        &cfg.out("predictions.json"),
        &to_json(&PredictionFile { tol_tau, table: &table, morse_relations: &relations, prediction: &report }),
    )?;

    let found = search(cfg, report.class, &cfg.budget_for(p))?;
    write_catalog(cfg, &found, &format!("orbits_p{p}.json"), &format!("orbit_p{p}_"))?;
    let verdicts = confront(&report, &found.orbits)?;
    write(&cfg.out("verdicts.csv"), &verdicts.to_csv())?;
    print!("{}", verdicts.to_csv());
    if verdicts.any_violated() {
        eprintln!("error: a predicted lower bound is violated; see verdicts.csv and orbits_p{p}.json");
        return Ok(1);
    }
    Ok(0)
}

fn cmd_predict(cfg: &Config) -> Result<u8> {
    cfg.args.p.context("--p is required for predict")?;
    let catalog = load_or_search(cfg)?;
    run_predict(cfg, &catalog)
}

#[derive(Serialize)]
struct Suite {
    subject: String,
    report: PropertyReport,
}

#[derive(Serialize)]
struct OrbitCheck {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct PropertiesFile {
    synthetic: Option<f64>,
    suites: Vec<Suite>,
    orbit_checks: Vec<OrbitCheck>,
    passed: bool,
}

/// Angles for the identity checks: the real axis, a few fixed angles and 32 generic ones.
fn property_angles() -> Vec<f64> {
    let mut angles = vec![0.0, 1.0, 0.5 * PI, PI, 2.0];
    angles.extend((0..32).map(|k| 2.0 * PI * (k as f64 + 0.5) / 32.0));
    angles
}

fn orbit_checks(catalog: &Catalog) -> Vec<OrbitCheck> {
    let mut checks = Vec::new();
    for (i, o) in catalog.orbits.iter().enumerate() {
        if o.is_degenerate() {
            continue;
        }
        let Some(r) = &o.index else {
            let msg = catalog.index_failures.iter().find(|(j, _)| *j == i).map_or("", |(_, m)| m.as_str());
            checks.push(OrbitCheck { id: i, name: "index_identities", passed: false, detail: msg.to_string() });
            continue;
        };
        let period = o.class().period();
        checks.push(OrbitCheck {
            id: i,
            name: "two_route",
            passed: r.morse_index == r.bott_at_one,
            detail: format!("morse_index={}, j(T,1)={}", r.morse_index, r.bott_at_one),
        });
        let even = r.morse_index % 2 == 0;
        checks.push(OrbitCheck {
            id: i,
            name: "parity_floquet",
            passed: even == (r.floquet_class == winding_orbits::dynamics::FloquetClass::Alpha),
            detail: format!("morse_index={}, class={:?}", r.morse_index, r.floquet_class),
        });
        let worst = r.j_samples.iter().map(|s| (period * r.tau - s.j as f64).abs()).fold(0.0, f64::max);
        checks.push(OrbitCheck {
            id: i,
            name: "mean_index_bound",
            passed: worst <= r.l as f64 + winding_orbits::spectral_index::TAU_GRID_TOL,
            detail: format!("max |T tau - j| = {worst}, l = {}", r.l),
        });
    }
    checks
}

fn run_properties(cfg: &Config, catalog: Option<&Catalog>) -> Result<u8> {
    let angles = property_angles();
    let mut suites = Vec::new();
    let mut checks = Vec::new();
    if let Some(a) = cfg.args.synthetic {
        let t0 = cfg.spec.as_ref().map_or(1.0, |s| s.t0());
        let path = CoefficientPath::constant(a, t0, cfg.args.grid.unwrap_or(512));
        for k in [2, 3] {
            let report = verify_index_properties(&path, k, &angles, cfg.args.angles)?;
            suites.push(Suite { subject: format!("synthetic a={a}"), report });
        }
    }
    if let Some(catalog) = catalog {
        let spec = cfg.spec()?;
        for (i, o) in catalog.orbits.iter().enumerate() {
            if o.is_degenerate() {
                continue;
            }
            let path = o.coefficient_path(spec);
            for k in [2, 3] {
                let report = verify_index_properties(&path, k, &angles, cfg.args.angles)?;
                suites.push(Suite { subject: format!("orbit {i}"), report });
            }
        }
        checks = orbit_checks(catalog);
    }
    let passed = suites.iter().all(|s| s.report.passed()) && checks.iter().all(|c| c.passed);
    for s in &suites {
        for c in &s.report.checks {
            println!(
                "{:<20} k={} {:<18} {}",
                s.subject,
                s.report.k,
                c.name,
                if c.passed { "pass" } else { "FAIL" }
            );
        }
    }
    for c in &checks {
        println!("orbit {:<14} {:<22} {}", c.id, c.name, if c.passed { "pass" } else { "FAIL" });
    }
    write(
        &cfg.out("properties.json"),
        &to_json(&PropertiesFile { synthetic: cfg.args.synthetic, suites, orbit_checks: checks, passed }),
    )?;
    Ok(if passed { 0 } else { 1 })
}

fn cmd_properties(cfg: &Config) -> Result<u8> {
    if cfg.args.synthetic.is_some() && cfg.args.catalog.is_none() {
        return run_properties(cfg, None);
    }
    let catalog = load_or_search(cfg)?;
    run_properties(cfg, Some(&catalog))
}

fn cmd_verify(cfg: &Config) -> Result<u8> {
    let catalog = load_or_search(cfg)?;
    print_summary(&catalog);
    write_catalog(cfg, &catalog, "orbits.json", "orbit_")?;
    let mut code = 0;
    if cfg.args.p.is_some() {
        code = code.max(run_predict(cfg, &catalog)?);
    }
    code = code.max(run_properties(cfg, Some(&catalog))?);
    Ok(code)
}

fn run(cli: Cli) -> Result<u8> {
    let (Command::Find(args)
    | Command::Index(args)
    | Command::Predict(args)
    | Command::Properties(args)
    | Command::Verify(args)) = &cli.command;
    let cfg = Config::from_args(args.clone())?;
    fs::create_dir_all(&cfg.args.out).with_context(|| format!("cannot create {}", cfg.args.out.display()))?;
    match cli.command {
        Command::Find(_) => cmd_find(&cfg),
        Command::Index(_) => cmd_index(&cfg),
        Command::Predict(_) => cmd_predict(&cfg),
        Command::Properties(_) => cmd_properties(&cfg),
        Command::Verify(_) => cmd_verify(&cfg),
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
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
