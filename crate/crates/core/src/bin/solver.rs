use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dgsem_amr::driver::config::read_config_file;
use dgsem_amr::driver::output::convergence_csv;
use dgsem_amr::driver::{mach_stem_position, run_simulation, vortex_convergence, CaseKind, RunConfig};
use dgsem_amr::euler::GasModel;
use dgsem_amr::Error;

/// Run a benchmark case of the DGSEM Euler solver.
#[derive(Parser, Debug)]
#[command(name = "solver", version)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// vortex, dmr or jet.
    #[arg(long)]
    case: Option<String>,
    /// es or mortar.
    #[arg(long)]
    flux: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Vortex convergence study over levels `a-b` (e.g. `0-3`).
    #[arg(long)]
    levels: Option<String>,
}

fn collect(cli: &Cli) -> Result<BTreeMap<String, String>, Error> {
    let mut values = match &cli.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            values.insert(k.to_string(), v);
        }
    };
    put("case", cli.case.clone());
    put("flux", cli.flux.clone());
    put("degree", cli.degree.map(|v| v.to_string()));
    put("cfl", cli.cfl.map(|v| v.to_string()));
    put("t_final", cli.tfinal.map(|v| v.to_string()));
    put("output_dir", cli.out.as_ref().map(|p| p.display().to_string()));
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        values.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(values)
}

fn parse_levels(s: &str) -> Result<Vec<u8>, Error> {
    let bad = || Error::Config(format!("bad level range '{s}'"));
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let a: u8 = a.trim().parse().map_err(|_| bad())?;
    let b: u8 = b.trim().parse().map_err(|_| bad())?;
    if a > b || b > 6 {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = RunConfig::from_values(&collect(cli)?)?;
    let gas = GasModel::default();
    if let Some(levels) = &cli.levels {
        if cfg.case != CaseKind::Vortex {
            return Err(Error::Config("--levels needs the vortex case".into()));
        }
        let rows = vortex_convergence(&cfg, &parse_levels(levels)?, gas, cfg.output_dir.as_deref())?;
        print!("{}", convergence_csv(&rows));
        return Ok(());
    }
    let res = run_simulation(&cfg, gas)?;
    let last = res.diagnostics.last().expect("initial row");
    println!(
        "case={} steps={} rejected={} t={:.6e} elements={} min_rho={:.6e} min_p={:.6e}",
        cfg.case,
        res.steps,
        res.rejected_steps,
        res.t,
        res.mesh.len(),
        last.min_rho,
        last.min_p
    );
    if let Some(e) = res.errors {
        println!("l2_error rho={:.6e} mom_x={:.6e} mom_y={:.6e} energy={:.6e}", e[0], e[1], e[2], e[3]);
    }
    if cfg.case == CaseKind::Dmr {
        if let Some(x) = mach_stem_position(&res.mesh, &res.u, 3.0) {
            println!("mach_stem_x={x:.4}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let msg = err.to_string().replace('"', "'");
            eprintln!("error kind={} message=\"{msg}\"", err.kind());
            ExitCode::from(if err.kind() == "invalid_config" { 2 } else { 1 })
        }
    }
}
