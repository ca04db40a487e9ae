use crate::config::{check, section, RunConfig};
use crate::store::RunDir;
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use stochwave::hit_analysis::{
    exponent_report, sandwich_report, scan_paths, write_sandwich_csv, BoundCase, SandwichOptions,
};
use stochwave::noise_field::{calibrate_ckbeta, calibration_ratios};
use stochwave::potential_theory::{capacity_with, hausdorff_measure, CapacityOptions, KernelOrder};
use stochwave::rng::path_seed;
use stochwave::spde_sim::{
    dyadic_pairs, fit_holder_exponent, write_ensemble, MomentAccumulator, Simulator,
};
use stochwave::wave_kernel::riesz_constant;
use stochwave::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Calibrate,
    Simulate,
    Moments,
    Capacity,
    Hausdorff,
    Hitprob,
    Exponents,
    Report,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Calibrate => "calibrate",
            Subcommand::Simulate => "simulate",
            Subcommand::Moments => "moments",
            Subcommand::Capacity => "capacity",
            Subcommand::Hausdorff => "hausdorff",
            Subcommand::Hitprob => "hitprob",
            Subcommand::Exponents => "exponents",
            Subcommand::Report => "report",
        }
    }
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config blocks serialize")
}

/// The parts of the configuration a subcommand reads, as canonical JSON.
/// Output location and worker count are left out.
pub fn canonical(cfg: &RunConfig, sub: Subcommand) -> Value {
    let mut doc = json!({ "subcommand": sub.name(), "seed": cfg.seed, "model": value(&cfg.model) });
    let uses_grid = matches!(sub, Subcommand::Simulate | Subcommand::Moments | Subcommand::Hitprob | Subcommand::Report);
    if uses_grid {
        doc["grid"] = value(&cfg.grid);
    }
    let block = match sub {
        Subcommand::Calibrate => Value::Null,
        Subcommand::Simulate => value(&cfg.simulate),
        Subcommand::Moments => value(&cfg.moments),
        Subcommand::Capacity => value(&cfg.capacity),
        Subcommand::Hausdorff => value(&cfg.hausdorff),
        Subcommand::Hitprob => value(&cfg.hitprob),
        Subcommand::Exponents => value(&cfg.exponents),
        Subcommand::Report => value(&cfg.report),
    };
    doc["block"] = block;
    doc
}

/// Checks everything the subcommand needs before any work starts.
pub fn validate(cfg: &RunConfig, sub: Subcommand) -> Result<()> {
    match sub {
        Subcommand::Exponents => {
            let e = cfg.exponents.clone().unwrap_or_default_block();
            exponents_report(cfg, &e).map(|_| ())
        }
        Subcommand::Calibrate => cfg.params().map(|_| ()).map_err(Into::into),
        Subcommand::Capacity => {
            section(&cfg.capacity, "capacity")?;
            Ok(())
        }
        Subcommand::Hausdorff => {
            section(&cfg.hausdorff, "hausdorff")?;
            Ok(())
        }
        _ => {
            cfg.model_spec()?;
            cfg.grid_spec()?;
            match sub {
                Subcommand::Simulate => section(&cfg.simulate, "simulate").map(|_| ())?,
                Subcommand::Moments => section(&cfg.moments, "moments").map(|_| ())?,
                Subcommand::Hitprob => section(&cfg.hitprob, "hitprob").map(|_| ())?,
                Subcommand::Report => section(&cfg.report, "report").map(|_| ())?,
                _ => {}
            }
            Ok(())
        }
    }
}

trait DefaultBlock {
    fn unwrap_or_default_block(self) -> crate::config::ExponentsBlock;
}

impl DefaultBlock for Option<crate::config::ExponentsBlock> {
    fn unwrap_or_default_block(self) -> crate::config::ExponentsBlock {
        self.unwrap_or(crate::config::ExponentsBlock { zeta: 0.01, delta: 0.01, rho: None, case: None })
    }
}

fn exponents_report(
    cfg: &RunConfig,
    e: &crate::config::ExponentsBlock,
) -> Result<stochwave::hit_analysis::ExponentReport> {
    let m = &cfg.model;
    let case = e.case.unwrap_or(BoundCase::AdditiveC1 { beta: m.beta });
    check(exponent_report(m.d, case, m.k, m.beta, e.zeta, e.delta, e.rho), "exponents")
}

pub fn run(cfg: &RunConfig, sub: Subcommand, out: &mut RunDir, verbose: bool) -> Result<String> {
    match sub {
        Subcommand::Calibrate => calibrate(cfg, out),
        Subcommand::Simulate => simulate(cfg, out, verbose),
        Subcommand::Moments => moments(cfg, out, verbose),
        Subcommand::Capacity => capacity(cfg, out),
        Subcommand::Hausdorff => hausdorff(cfg, out),
        Subcommand::Hitprob => hitprob(cfg, out),
        Subcommand::Exponents => {
            let r = exponents_report(cfg, &cfg.exponents.clone().unwrap_or_default_block())?;
            out.write_json("exponents.json", &r)?;
            Ok(format!("polarity {} gaussian order {:.6}", r.polarity, r.gaussian_order))
        }
        Subcommand::Report => report(cfg, out),
    }
}

fn calibrate(cfg: &RunConfig, out: &mut RunDir) -> Result<String> {
    let p = cfg.params()?;
    let ratios = calibration_ratios(p.beta, p.k)?;
    let ck = calibrate_ckbeta(p.beta, p.k)?;
    let c = riesz_constant(p)?;
    let doc = json!({
        "k": p.k,
        "beta": p.beta,
        "ratios": ratios,
        "c_kbeta": ck,
        "riesz_constant": c.value,
        "riesz_constant_error": c.quadrature_error,
        "h_norm_constant": ck * c.value,
    });
    out.write_json("calibration.json", &doc)?;
    Ok(format!("c_kbeta = {ck:.12}"))
}

fn simulate(cfg: &RunConfig, out: &mut RunDir, verbose: bool) -> Result<String> {
    let block = section(&cfg.simulate, "simulate")?;
    let model = cfg.model_spec()?;
    let grid = cfg.grid_spec()?;
    let sim = check(Simulator::new(&model, grid), "model")?;
    let times: Vec<usize> = (0..=grid.n_time).collect();
    let fields = (0..block.n_paths)
        .into_par_iter()
        .map(|i| sim.run(path_seed(cfg.seed, i as u64), &times))
        .collect::<stochwave::Result<Vec<_>>>()?;
    if verbose {
        eprintln!("simulated {} paths", fields.len());
    }
    let dir = out.subdir("paths")?;
    write_ensemble(&dir, cfg.seed, &fields)?;
    out.write_json(
        "simulate.json",
        &json!({
            "n_paths": block.n_paths,
            "model_hash": model.hash(),
            "grid": grid,
            "light_cone_contained": fields.first().map(|f| f.light_cone_contained),
        }),
    )?;
    Ok(format!("{} paths", block.n_paths))
}

fn moments(cfg: &RunConfig, out: &mut RunDir, verbose: bool) -> Result<String> {
    let block = section(&cfg.moments, "moments")?;
    let model = cfg.model_spec()?;
    let grid = cfg.grid_spec()?;
    let sim = check(Simulator::new(&model, grid), "model")?;
    let pairs = check(dyadic_pairs(&grid, block.scales, block.stride), "moments")?;
    let mut acc = check(MomentAccumulator::new(grid, block.q, &pairs), "moments.q")?;
    let times = acc.required_times();
    let rows = (0..block.n_paths)
        .into_par_iter()
        .map(|i| {
            let f = sim.run(path_seed(cfg.seed, i as u64), &times)?;
            acc.pair_values(&f)
        })
        .collect::<stochwave::Result<Vec<_>>>()?;
    for r in &rows {
        acc.push(r);
    }
    if verbose {
        eprintln!("accumulated {} paths", rows.len());
    }
    let table = acc.finish();
    out.write_csv("moments.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for r in &table {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })?;
    let fit = fit_holder_exponent(&table, block.q)?;
    out.write_json("holder.json", &json!({ "fit": fit, "target": model.params.holder_exponent() }))?;
    Ok(format!("delta = {:.4} +- {:.4}", fit.delta, fit.stderr))
}

fn capacity(cfg: &RunConfig, out: &mut RunDir) -> Result<String> {
    let b = section(&cfg.capacity, "capacity")?;
    let order = KernelOrder { gamma: b.gamma, log_constant: b.log_constant };
    let opts = CapacityOptions { n_grid: b.n_grid, tol: b.tol, max_iter: b.max_iter };
    let r = check(capacity_with(&b.target, order, &opts), "capacity")?;
    out.write_json("capacity.json", &r)?;
    if !r.converged {
        return Err(Error::Convergence { what: "capacity minimization", estimate: r.estimate, error: r.gap }.into());
    }
    Ok(format!("capacity {:.6} (gap {:.2e}, {} cells)", r.estimate, r.gap, r.n_cells))
}

fn hausdorff(cfg: &RunConfig, out: &mut RunDir) -> Result<String> {
    let b = section(&cfg.hausdorff, "hausdorff")?;
    let r = check(hausdorff_measure(&b.target, b.gamma, b.max_depth), "hausdorff")?;
    out.write_json("hausdorff.json", &r)?;
    Ok(format!("estimate {:.6} at depth {}", r.estimate, r.depth_of_min))
}

#[derive(Serialize)]
struct HitRow {
    target_id: usize,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    hits: usize,
    n_paths: usize,
    eps_snap: f64,
}

fn hitprob(cfg: &RunConfig, out: &mut RunDir) -> Result<String> {
    let b = section(&cfg.hitprob, "hitprob")?;
    let model = cfg.model_spec()?;
    let grid = cfg.grid_spec()?;
    let scan = check(scan_paths(&model, &b.window, &b.targets, grid, b.n_paths, cfg.seed), "hitprob")?;
    let eps = b.eps_snap.unwrap_or_else(|| scan.default_eps());
    let rows: Vec<HitRow> = (0..b.targets.len())
        .map(|i| {
            let e = scan.estimate(i, eps);
            HitRow {
                target_id: i,
                p_hat: e.p_hat,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                hits: e.hits,
                n_paths: e.n_paths,
                eps_snap: e.eps_snap,
            }
        })
        .collect();
    out.write_csv("hitprob.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.write_json("hitprob.json", &json!({ "eps_snap": eps, "snap_constant": scan.snap_constant, "rows": rows }))?;
    Ok(format!("{} targets, eps_snap {:.4e}", rows.len(), eps))
}

fn report(cfg: &RunConfig, out: &mut RunDir) -> Result<String> {
    let b = section(&cfg.report, "report")?;
    let model = cfg.model_spec()?;
    let grid = cfg.grid_spec()?;
    let opts = SandwichOptions { n_grid: b.n_grid, tol: b.tol, max_depth: b.max_depth, eps_snap: b.eps_snap };
    let r = check(
        sandwich_report(&model, &b.window, &b.targets, grid, b.n_paths, cfg.seed, &opts),
        "report",
    )?;
    out.write_csv("sandwich.csv", |buf| write_sandwich_csv(&r, buf).context("writing sandwich.csv"))?;
    out.write_json("report.json", &r)?;
    Ok(format!("{} rows, ordering consistent: {}", r.rows.len(), r.ordering_consistent))
}
