//! The `verify` suites. Each check writes `<name>.json` and, where there is
//! per-point data, a CSV next to it.

use std::io::Write;

use clap::ValueEnum;
use dr_core::analysis::{
    check_dominability, finite_variance_builder, identity41_max_rel_err, lemma25_check,
    lemma27_scan, lemma42_check, lemma51_bound, lemma52_report, stable_builder, theorem23_check,
    DominabilityCertificate, Report, Theorem23,
};
use dr_core::evolve::fmt17;
use dr_core::{evolve_with, EvolutionTrace, TiltedLaw};
use serde_json::json;

use crate::config::{Lemma27Section, RunConfig};
use crate::fail::{Failure, Outcome};
use crate::output::OutDir;

/// `|eta|` below this fraction of the tilted mass counts as critical.
const CRITICAL_TOL: f64 = 1e-12;
const RAW_DRIFT_TOL: f64 = 1e-13;
const CRITICAL_ETA_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-10;
const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Conservation,
    Bounds,
    Dominability,
    Lemma27,
    Lemma42,
    Lemma51,
    Thm23,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd)]
enum Phase {
    Sub,
    Critical,
    Super,
}

fn phase(law: &TiltedLaw) -> Phase {
    let eta = law.eta();
    let tol = CRITICAL_TOL * law.tilted_mass();
    if eta < -tol {
        Phase::Sub
    } else if eta <= tol {
        Phase::Critical
    } else {
        Phase::Super
    }
}

/// The evolution shared by the trace-based checks.
struct Run {
    law: TiltedLaw,
    trace: EvolutionTrace,
    /// `|raw mass + truncated mass - 1|` per generation.
    raw_drift: Vec<f64>,
    /// Upper bound on how far tail truncation alone can have moved `eta_n`:
    /// a weight `w` dropped at `k` changes `eta` by `((m-1) k - 1) w`, and a
    /// change made at generation `j` reaches generation `n` multiplied by
    /// `Pi_n / Pi_j`.
    eta_budget: Vec<f64>,
}

fn run(cfg: &RunConfig) -> Outcome<Run> {
    let init = cfg.initial()?;
    let law = init.build(cfg.params()?)?;
    let m = law.params().mf();
    let mut raw_drift = Vec::new();
    let mut eta_budget = Vec::new();
    let (mut budget, mut lost, mut prev_support, mut prev_factor) = (0.0, 0.0, 0usize, 1.0);
    let trace = evolve_with(&law, &cfg.evolve.to_config(), init.describe(), |_, l| {
        let ledger = l.ledger();
        raw_drift.push((l.raw_mass() + ledger.lost_raw - 1.0).abs());
        // support before truncation is at most m times the previous one
        let reach = (m - 1.0) * (m * prev_support as f64 + 1.0);
        budget = budget * prev_factor + reach * (ledger.lost_tilted - lost);
        eta_budget.push(budget);
        lost = ledger.lost_tilted;
        prev_support = l.support_size();
        prev_factor = l.tilted_mass().powf(m - 1.0);
    })?;
    Ok(Run {
        law,
        trace,
        raw_drift,
        eta_budget,
    })
}

fn base_params(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "m": cfg.model.m,
        "initial": cfg.initial.as_ref().map(|i| i.describe()),
        "n_max": cfg.evolve.n_max,
        "tail_epsilon": cfg.evolve.tail_epsilon,
    })
}

fn csv_file(
    out: &OutDir,
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Outcome<String> {
    out.write(name, |w| {
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    Ok(name.to_string())
}

/// Runs `suite` and writes its reports. Checks that fail are listed in a
/// `Failure::Checks`.
pub fn run_suite(suite: Suite, cfg: &RunConfig, out: &OutDir) -> Outcome<Vec<Report>> {
    let needs_trace = !matches!(suite, Suite::Lemma27 | Suite::Dominability);
    let shared = if needs_trace { Some(run(cfg)?) } else { None };
    let phase0 = shared.as_ref().map(|r| phase(&r.law));
    let mut reports = Vec::new();
    let skip = |name: &str, why: &str| eprintln!("skip {name}: {why}");

    let all = suite == Suite::All;
    if suite == Suite::Conservation || all {
        reports.push(conservation(cfg, shared.as_ref().unwrap(), out)?);
    }
    if suite == Suite::Bounds || all {
        let r = shared.as_ref().unwrap();
        if phase0 == Some(Phase::Super) {
            if !all {
                return Err(Failure::Usage("bounds need a critical or subcritical law".into()));
            }
            skip("bounds", "supercritical law");
        } else {
            reports.push(bounds(cfg, r, out)?);
        }
    }
    if suite == Suite::Thm23 || all {
        reports.push(thm23(cfg, shared.as_ref().unwrap(), out)?);
    }
    if suite == Suite::Lemma42 || all {
        if all && phase0 != Some(Phase::Sub) {
            skip("lemma42", "law is not strictly subcritical");
        } else {
            reports.push(lemma42(cfg, shared.as_ref().unwrap(), out)?);
        }
    }
    if suite == Suite::Lemma51 || all {
        if all && phase0 == Some(Phase::Super) {
            skip("lemma51", "supercritical law");
        } else {
            match lemma51(cfg, shared.as_ref().unwrap(), out) {
                Err(Failure::Core(dr_core::Error::DegenerateDelta { value })) if all => {
                    skip("lemma51", &format!("Delta_0 = {value} is not positive"))
                }
                r => reports.push(r?),
            }
        }
    }
    if suite == Suite::Dominability || all {
        let base = cfg.initial()?.base().build(cfg.params()?)?;
        if phase(&base) != Phase::Critical {
            if !all {
                return Err(Failure::Usage(
                    "dominability needs a critical (base) initial law".into(),
                ));
            }
            skip("dominability", "base law is not critical");
        } else if all && base.support_max() < 2 {
            skip("dominability", "base law is a point mass");
        } else {
            reports.push(dominability(cfg, base, out)?);
        }
    }
    if suite == Suite::Lemma27 || all {
        let section = cfg.lemma27.clone().unwrap_or_default();
        reports.push(lemma27(cfg.model.m, &section, out)?);
    }

    for r in &reports {
        r.write_json(&out.file(&format!("{}.json", r.check_name)))?;
    }
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.check_name.clone())
        .collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(Failure::Checks(failed))
    }
}

fn conservation(cfg: &RunConfig, r: &Run, out: &OutDir) -> Outcome<Report> {
    let t = &r.trace;
    let m = t.params.mf();
    let critical = phase(&r.law) == Phase::Critical;
    let sign0 = t.records[0].eta.signum();
    let mut id_err = Vec::new();
    for rec in &t.records {
        id_err.push(t.verify_identity_26(rec.n)?.rel_err);
    }
    let max_drift = r.raw_drift.iter().copied().fold(0.0, f64::max);
    let max_eta = t.records.iter().map(|x| x.eta.abs()).fold(0.0, f64::max);
    let max_id = id_err.iter().copied().fold(0.0, f64::max);
    // observed over allowed, per generation
    let eta_ratio = t
        .records
        .iter()
        .map(|x| x.eta.abs() / CRITICAL_ETA_TOL.max(r.eta_budget[x.n]))
        .fold(0.0, f64::max);
    let id_ratio = id_err
        .iter()
        .zip(&r.eta_budget)
        .map(|(&e, &b)| e / IDENTITY_TOL.max(b))
        .fold(0.0, f64::max);
    let sign_ok = if critical {
        eta_ratio <= 1.0
    } else {
        t.records.iter().all(|x| x.eta.signum() == sign0)
    };
    let contraction_ok = t
        .records
        .windows(2)
        .all(|w| w[1].mean <= m * w[0].mean * (1.0 + 1e-12) + 1e-300);
    let mut fe_ok = true;
    for n in 1..=t.n_max() {
        let (a, b) = (t.free_energy_upper(n - 1)?, t.free_energy_upper(n)?);
        fe_ok &= b <= a * (1.0 + 1e-12);
    }

    let csv = csv_file(
        out,
        "conservation.csv",
        &["n", "raw_drift", "eta", "identity_rel_err", "truncation_eta_budget", "mean"],
        t.records.iter().map(|x| {
            vec![
                x.n.to_string(),
                fmt17(r.raw_drift[x.n]),
                fmt17(x.eta),
                fmt17(id_err[x.n]),
                fmt17(r.eta_budget[x.n]),
                fmt17(x.mean),
            ]
        }),
    )?;
    let mut ratio = (max_drift / RAW_DRIFT_TOL).max(id_ratio);
    if critical {
        ratio = ratio.max(eta_ratio);
    }
    let mut rep = Report::new("conservation", base_params(cfg))
        .constant("max_raw_drift", max_drift)
        .constant("max_abs_eta", max_eta)
        .constant("max_identity_rel_err", max_id)
        .constant("final_truncation_eta_budget", *r.eta_budget.last().unwrap());
    rep.max_ratio = ratio;
    rep.pass = max_drift <= RAW_DRIFT_TOL
        && id_ratio <= 1.0
        && sign_ok
        && contraction_ok
        && fe_ok;
    rep.details_csv_path = Some(csv);
    Ok(rep)
}

fn bounds(cfg: &RunConfig, r: &Run, out: &OutDir) -> Outcome<Report> {
    let t = &r.trace;
    let m = t.params.mf();
    let cap = m.powf(1.0 / (m - 1.0));
    let mut max_mass = 0.0f64;
    let mut max_mean = 0.0f64;
    let mut c7 = 0.0f64;
    for x in &t.records {
        max_mass = max_mass.max(x.tilted_mass / cap);
        max_mean = max_mean.max((m - 1.0) * x.tilted_mean / x.tilted_mass);
        if x.n >= 1 {
            c7 = c7.max((x.log_pi - 2.0 * (x.n as f64).ln()).exp());
        }
    }
    let csv = csv_file(
        out,
        "bounds.csv",
        &["n", "tilted_mass", "tilted_mass_over_cap", "log_pi"],
        t.records.iter().map(|x| {
            vec![
                x.n.to_string(),
                fmt17(x.tilted_mass),
                fmt17(x.tilted_mass / cap),
                fmt17(x.log_pi),
            ]
        }),
    )?;
    let mut rep = Report::new("bounds", base_params(cfg))
        .constant("tilted_mass_cap", cap)
        .constant("max_mean_ratio", max_mean)
        .constant("c7_hat", c7);
    if let (Some(alpha), true) = (cfg.initial()?.alpha(), t.n_max() >= 2) {
        let d = lemma52_report(t, alpha, None)?;
        rep = rep.constant("dichotomy_c_hat", d.c_hat);
        if let Some(n0) = d.n0 {
            rep = rep.constant("dichotomy_n0", n0 as f64);
        }
    }
    rep.max_ratio = max_mass.max(max_mean);
    rep.pass = max_mass <= 1.0 + BOUND_SLACK && max_mean <= 1.0 + BOUND_SLACK;
    rep.details_csv_path = Some(csv);
    Ok(rep)
}

fn thm23(cfg: &RunConfig, r: &Run, out: &OutDir) -> Outcome<Report> {
    let k = cfg.evolve.k_derivatives;
    if k < 1 {
        return Err(Failure::Usage("thm23 needs evolve.k_derivatives >= 1".into()));
    }
    let v = cfg.verify.clone().unwrap_or_default();
    let big_m = v.big_m;
    let res = theorem23_check(&r.trace, 1..=k, big_m)?;
    let roots = res.roots();
    let high: Vec<f64> = roots.range(3..).map(|(_, &x)| x).filter(|&x| x > 0.0).collect();
    let spread = if high.is_empty() {
        1.0
    } else {
        high.iter().copied().fold(0.0, f64::max) / high.iter().copied().fold(f64::MAX, f64::min)
    };
    let spread_ok = v.root_spread_max.is_none_or(|lim| spread <= lim);
    let bound = Theorem23::first_order_bound(r.trace.params);
    let first_ok = phase(&r.law) == Phase::Super || res.ratios[&1] <= bound * (1.0 + 1e-12);

    let csv = csv_file(
        out,
        "thm23.csv",
        &["k", "ratio", "root", "argmax_n"],
        res.ratios.iter().map(|(&kk, &v)| {
            vec![
                kk.to_string(),
                fmt17(v),
                fmt17(roots[&kk]),
                res.argmax[&kk].to_string(),
            ]
        }),
    )?;
    let mut params = base_params(cfg);
    params["big_m"] = json!(big_m);
    params["root_spread_max"] = json!(v.root_spread_max);
    let mut rep = Report::new("thm23", params)
        .constant("c4_hat", res.c4_hat)
        .constant("r1", res.ratios[&1])
        .constant("r1_bound", bound)
        .constant("root_spread_k_ge_3", spread);
    if k >= 3 {
        let l25 = lemma25_check(&r.trace, 1.0)?;
        rep = rep
            .constant("c8_hat_theta1", l25.c8_hat)
            .constant("c9_hat_theta1", l25.c9_hat)
            .constant("d_ratio_max", l25.d_ratio_max);
    }
    rep.max_ratio = res.ratios[&1] / bound;
    if let Some(lim) = v.root_spread_max {
        rep.max_ratio = rep.max_ratio.max(spread / lim);
    }
    rep.pass = first_ok && spread_ok && res.c4_hat.is_finite();
    rep.details_csv_path = Some(csv);
    Ok(rep)
}

fn lemma42(cfg: &RunConfig, r: &Run, out: &OutDir) -> Outcome<Report> {
    let res = lemma42_check(&r.trace)?;
    let id = identity41_max_rel_err(&r.trace)?;
    let csv = csv_file(
        out,
        "lemma42.csv",
        &["n", "pi", "pi_over_bound"],
        r.trace.records.iter().map(|x| {
            vec![
                x.n.to_string(),
                fmt17(x.log_pi.exp()),
                fmt17(x.log_pi.exp() / res.bound),
            ]
        }),
    )?;
    let mut rep = Report::new("lemma42", base_params(cfg))
        .constant("bound", res.bound)
        .constant("pi_last", res.pi_last)
        .constant("identity_ratio_max_rel_err", id);
    rep.max_ratio = res.max_ratio;
    rep.pass = res.pass();
    rep.details_csv_path = Some(csv);
    Ok(rep)
}

fn lemma51(cfg: &RunConfig, r: &Run, out: &OutDir) -> Outcome<Report> {
    let n_max = r.trace.n_max();
    let mut ns = cfg.verify.clone().unwrap_or_default().lemma51_n;
    if ns.is_empty() {
        ns = std::iter::successors(Some(1usize), |n| Some(n * 2))
            .take_while(|&n| n <= n_max)
            .collect();
    }
    let mut rows = Vec::new();
    let mut max_ratio = 0.0f64;
    let mut c34 = 0.0f64;
    for &n in &ns {
        let b = lemma51_bound(&r.law, n)?;
        let pi = r.trace.product_pi(n)?.1;
        max_ratio = max_ratio.max(pi / b.bound);
        if b.truncated_cubic > 0.0 {
            c34 = c34.max(pi / b.n2_over_cubic);
        }
        rows.push(vec![
            n.to_string(),
            fmt17(b.s_n),
            fmt17(b.delta0),
            fmt17(b.bound),
            fmt17(pi),
            fmt17(b.n2_over_cubic),
        ]);
    }
    let csv = csv_file(
        out,
        "lemma51.csv",
        &["n", "s_n", "delta0", "bound", "pi", "n2_over_cubic"],
        rows,
    )?;
    let mut rep = Report::new("lemma51", base_params(cfg)).constant("c34_hat", c34);
    rep.max_ratio = max_ratio;
    rep.pass = max_ratio <= 1.0 + 1e-12;
    rep.details_csv_path = Some(csv);
    Ok(rep)
}

fn dominability(cfg: &RunConfig, base: TiltedLaw, out: &OutDir) -> Outcome<Report> {
    let v = cfg.verify.clone().unwrap_or_default();
    let mut ec = cfg.evolve.to_config();
    if v.dominability_n_max > 0 {
        ec.n_max = v.dominability_n_max;
    }
    let alpha = cfg.initial()?.alpha();
    let cert: DominabilityCertificate = match alpha {
        Some(a) => check_dominability(&stable_builder(base, a), &v.dominability_m, &ec, v.dominability_k_max)?,
        None => check_dominability(&finite_variance_builder(base), &v.dominability_m, &ec, v.dominability_k_max)?,
    };
    let csv = csv_file(
        out,
        "dominability.csv",
        &["big_m", "theta", "cond21_ratio", "worst_k", "gamma", "support_max"],
        cert.rows.iter().map(|x| {
            vec![
                x.big_m.to_string(),
                fmt17(x.theta),
                fmt17(x.cond21_ratio),
                x.worst_k.to_string(),
                fmt17(x.gamma),
                x.support_max.to_string(),
            ]
        }),
    )?;
    let mut params = base_params(cfg);
    params["n_max"] = json!(ec.n_max);
    params["m_list"] = json!(cert.m_list);
    params["k_max"] = json!(cert.k_max);
    params["mode"] = json!(if alpha.is_some() { "stable" } else { "finite_variance" });
    let mut rep = Report::new("dominability", params)
        .constant("gamma_fitted", cert.gamma_fitted)
        .constant("cond21_max_ratio", cert.cond21_max_ratio);
    if let Some(m0) = cert.m0 {
        rep = rep.constant("m0", m0 as f64);
    }
    rep.max_ratio = cert.cond21_max_ratio;
    rep.pass = cert.pass.cond21 && cert.pass.cond22;
    rep.details_csv_path = Some(csv);
    Ok(rep)
}

/// The exact scan of the combinatorial sum; shared with the `lemma27`
/// subcommand.
pub fn lemma27(model_m: u32, s: &Lemma27Section, out: &OutDir) -> Outcome<Report> {
    let m = s.m.unwrap_or(model_m);
    let ys = if s.y.is_empty() {
        [3.0, 6.0, 12.0].iter().map(|f| f * m as f64).collect()
    } else {
        s.y.clone()
    };
    let scan = lemma27_scan(m, s.l_max, &ys)?;
    let csv = csv_file(
        out,
        "lemma27.csv",
        &["m", "l", "y", "lhs", "ratio"],
        scan.points.iter().map(|p| {
            vec![
                m.to_string(),
                p.l.to_string(),
                fmt17(p.y),
                fmt17(p.lhs),
                fmt17(p.ratio),
            ]
        }),
    )?;
    let upper = scan.max_ratio_over(8.min(s.l_max), s.l_max);
    let mut rep = Report::new("lemma27", json!({ "m": m, "l_max": s.l_max, "y": ys }))
        .constant("c18_hat", scan.c18_hat)
        .constant("max_ratio_l_ge_8", upper);
    rep.max_ratio = scan.c18_hat;
    rep.pass = scan.points.iter().all(|p| p.ratio.is_finite()) && upper <= scan.c18_hat;
    rep.details_csv_path = Some(csv);
    Ok(rep)
}
