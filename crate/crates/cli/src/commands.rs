use std::io::Write;
use std::path::{Path, PathBuf};

use dr_core::analysis::{fit_power_law, PowerLawFit};
use dr_core::evolve::fmt17;
use dr_core::mc::{self, McConfig, McEstimate};
use dr_core::{evolve as run_evolution, stable_critical_init, EvolutionTrace};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::fail::{Failure, Outcome};
use crate::output::OutDir;
use crate::verify::{self, Suite};

/// Agreement threshold, in standard errors, between Monte Carlo and exact
/// values.
const MC_Z_MAX: f64 = 4.0;

fn prepare(config: &Path, out: Option<PathBuf>) -> Outcome<(RunConfig, OutDir)> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(dir) = out {
        cfg.outputs.dir = dir;
    }
    let dir = OutDir::create(&cfg.outputs.dir)?;
    Ok((cfg, dir))
}

fn write_trace(dir: &OutDir, name: &str, trace: &EvolutionTrace) -> Outcome<()> {
    dir.write(name, |w| Ok(trace.write_csv(w)?))?;
    Ok(())
}

fn write_plot(dir: &OutDir, name: &str, trace: &EvolutionTrace) -> Outcome<()> {
    dir.write(name, |w| Ok(trace.write_plotdata(w)?))?;
    Ok(())
}

pub fn evolve(config: &Path, out: Option<PathBuf>, emit_plotdata: bool) -> Outcome<()> {
    let (mut cfg, dir) = prepare(config, out)?;
    cfg.outputs.plotdata |= emit_plotdata;
    dir.write_effective_config(&cfg)?;
    let init = cfg.initial()?;
    let law = init.build(cfg.params()?)?;
    let trace = run_evolution(&law, &cfg.evolve.to_config(), init.describe())?;
    write_trace(&dir, "trace.csv", &trace)?;
    if cfg.outputs.plotdata {
        write_plot(&dir, "plot.csv", &trace)?;
    }
    let last = trace.records.last().unwrap();
    println!(
        "n = {}  log_pi = {}  tilted_mass = {}  support = {}",
        last.n, last.log_pi, last.tilted_mass, last.support_size
    );
    Ok(())
}

pub fn verify(suite: Suite, config: &Path, out: Option<PathBuf>) -> Outcome<()> {
    let (cfg, dir) = prepare(config, out)?;
    dir.write_effective_config(&cfg)?;
    let res = verify::run_suite(suite, &cfg, &dir);
    if let Ok(reports) = &res {
        for r in reports {
            println!("PASS {}  max_ratio = {}", r.check_name, r.max_ratio);
        }
    }
    res.map(|_| ())
}

fn sweep_row(alpha: f64, fit: &PowerLawFit) -> String {
    format!(
        "{},{},{},{},{},{}",
        fmt17(alpha),
        fmt17(fit.slope),
        fmt17(fit.target),
        fmt17(fit.abs_err()),
        fit.n_lo,
        fit.n_hi
    )
}

pub fn sweep_alpha(
    config: &Path,
    out: Option<PathBuf>,
    alphas: Option<Vec<f64>>,
    emit_plotdata: bool,
) -> Outcome<()> {
    let (mut cfg, dir) = prepare(config, out)?;
    cfg.outputs.plotdata |= emit_plotdata;
    let mut sweep = cfg.sweep.clone().unwrap_or_default();
    if let Some(a) = alphas {
        sweep.alphas = a;
    }
    if sweep.alphas.is_empty() {
        return Err(Failure::Usage("alpha list is empty".into()));
    }
    cfg.sweep = Some(sweep.clone());
    dir.write_effective_config(&cfg)?;

    let mut ec = cfg.evolve.to_config();
    ec.n_max = sweep.n_max;
    let m = cfg.params()?.m();
    let runs: Vec<(f64, EvolutionTrace, PowerLawFit)> = sweep
        .alphas
        .par_iter()
        .map(|&alpha| -> Outcome<_> {
            let (law, _) = stable_critical_init(m, alpha, sweep.k_cap)?;
            let desc = format!("stable(alpha={alpha},K={})", sweep.k_cap);
            let trace = run_evolution(&law, &ec, desc)?;
            let fit = fit_power_law(&trace, sweep.n_lo, sweep.n_hi, alpha - 2.0)?;
            Ok((alpha, trace, fit))
        })
        .collect::<Outcome<_>>()?;

    dir.write("sweep.csv", |w| {
        writeln!(w, "alpha,slope,target,abs_err,n_lo,n_hi")?;
        for (alpha, _, fit) in &runs {
            writeln!(w, "{}", sweep_row(*alpha, fit))?;
        }
        Ok(())
    })?;
    for (alpha, trace, fit) in &runs {
        if cfg.outputs.plotdata {
            write_plot(&dir, &format!("plot_alpha_{alpha}.csv"), trace)?;
        }
        println!(
            "alpha = {alpha}  slope = {:.4}  target = {}  abs_err = {:.4}",
            fit.slope,
            fit.target,
            fit.abs_err()
        );
    }
    Ok(())
}

fn z_score(est: f64, exact: f64, stderr: f64) -> f64 {
    let d = est - exact;
    if d == 0.0 {
        0.0
    } else {
        d / stderr
    }
}

pub fn mc(config: &Path, out: Option<PathBuf>) -> Outcome<()> {
    let (cfg, dir) = prepare(config, out)?;
    let s = cfg.mc.ok_or_else(|| {
        Failure::Usage("config has no [mc] section; mc runs need an explicit seed".into())
    })?;
    dir.write_effective_config(&cfg)?;
    let init = cfg.initial()?;
    let law = init.build(cfg.params()?)?;
    let est: McEstimate = mc::estimate(
        &law,
        &McConfig {
            n: s.n,
            samples: s.samples,
            seed: s.seed,
            workers: s.workers,
        },
    )?;
    dir.write("mc.csv", |w| Ok(mc::write_csv(&[est], w)?))?;
    println!(
        "n = {}  mean_hat = {} +- {}  p_zero_hat = {} +- {}",
        est.n, est.mean_hat, est.stderr_mean, est.p_zero_hat, est.stderr_p0
    );
    if !s.compare {
        return Ok(());
    }

    let mut ec = cfg.evolve.to_config();
    ec.n_max = s.n as usize;
    let exact = run_evolution(&law, &ec, init.describe())?;
    let rec = exact.record(s.n as usize)?;
    let z_mean = z_score(est.mean_hat, rec.mean, est.stderr_mean);
    let z_p0 = z_score(est.p_zero_hat, rec.p_zero, est.stderr_p0);
    dir.write("mc_compare.csv", |w| {
        writeln!(w, "n,mean_hat,exact_mean,z_mean,p_zero_hat,exact_p_zero,z_p0")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            est.n,
            fmt17(est.mean_hat),
            fmt17(rec.mean),
            fmt17(z_mean),
            fmt17(est.p_zero_hat),
            fmt17(rec.p_zero),
            fmt17(z_p0)
        )?;
        Ok(())
    })?;
    println!("exact mean = {}  z = {z_mean:.3};  exact p_zero = {}  z = {z_p0:.3}", rec.mean, rec.p_zero);
    let mut failed = Vec::new();
    if !(z_mean.abs() <= MC_Z_MAX) {
        failed.push("mc_mean".to_string());
    }
    if !(z_p0.abs() <= MC_Z_MAX) {
        failed.push("mc_p_zero".to_string());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

pub fn lemma27(config: &Path, out: Option<PathBuf>) -> Outcome<()> {
    let (cfg, dir) = prepare(config, out)?;
    dir.write_effective_config(&cfg)?;
    let section = cfg.lemma27.clone().unwrap_or_default();
    let rep = verify::lemma27(cfg.model.m, &section, &dir)?;
    rep.write_json(&dir.file("lemma27.json"))?;
    println!(
        "c18_hat = {}  max over l >= 8 = {}",
        rep.max_ratio, rep.fitted_constants["max_ratio_l_ge_8"]
    );
    if rep.pass {
        Ok(())
    } else {
        Err(Failure::Checks(vec![rep.check_name]))
    }
}
