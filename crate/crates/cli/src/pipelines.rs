//! The subcommands. Each writes its tables, plots and snapshots into a
//! private directory and returns the checks it ran.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hsl_core::auxsys::{extract_asymptotics, omega0, prepare, supercritical, AuxConfig};
use hsl_core::estfun::EstContext;
use hsl_core::grid::{Grid, PhaseField, ProfileField};
use hsl_core::hierarchy::{hierarchy_decay_report, hierarchy_gauge_check, solve_with_tail};
use hsl_core::identities::verify_identities;
use hsl_core::scattering::{asymptotic_error_report, gauge_distance_series, sigma_extract};
use hsl_core::snapshot::Snapshot;
use hsl_core::timegrid::{RateSeries, TimeGrid};
use hsl_core::transport::{
    chi_vs_psiplus, compare_v_wp, gauge_check_transport, l2_drift, richardson_check, v_vs_wplus, TransportConfig,
};

use crate::check::{Bound, Outcome, Part, RunError};
use crate::config::ScenarioConfig;
use crate::criteria::{control_growth, run_all, CriterionResult};
use crate::plot::emit_plot;
use crate::scenario::{amplitude_data, grid, phase_data};
use crate::table::{time_cells, Cell, Table};

const DRIFT: Bound = Bound::Within(0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Estfun,
    Hierarchy,
    Transport,
    Waveop,
    Scatter,
    VerifyAll,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Estfun => "estfun",
            Subcommand::Hierarchy => "hierarchy",
            Subcommand::Transport => "transport",
            Subcommand::Waveop => "waveop",
            Subcommand::Scatter => "scatter",
            Subcommand::VerifyAll => "verify-all",
        }
    }
}

/// Exit status: 0 pass, 1 check failure, 2 configuration error, 3 blow-up.
pub fn exit_code(outcome: &Outcome, err: Option<&RunError>) -> i32 {
    match err {
        Some(e) if e.is_config() => 2,
        Some(e) if e.is_blowup() => 3,
        Some(_) => 1,
        None if outcome.blowup => 3,
        None if outcome.pass() => 0,
        None => 1,
    }
}

/// Runs a subcommand below `out/<name>` (or directly in `out` for
/// `verify-all`).
pub fn run(sub: Subcommand, cfg: &ScenarioConfig, out: &Path) -> Result<Outcome, RunError> {
    let dir = match sub {
        Subcommand::VerifyAll => out.to_path_buf(),
        _ => out.join(sub.name()),
    };
    std::fs::create_dir_all(&dir)?;
    match sub {
        Subcommand::Estfun => estfun(cfg, &dir),
        Subcommand::Hierarchy => hierarchy(cfg, &dir),
        Subcommand::Transport => transport(cfg, &dir),
        Subcommand::Waveop => waveop(cfg, &dir),
        Subcommand::Scatter => scatter(cfg, &dir),
        Subcommand::VerifyAll => verify_all(cfg, &dir, |r| eprintln!("{}", r.line())).map(|(o, _)| o),
    }
}

/// Writes `table` and records a failure for any non-finite cell.
fn save(o: &mut Outcome, table: &Table, path: &Path) -> Result<(), RunError> {
    let bad = table.write(path)?;
    if bad > 0 {
        o.push(Part::new(format!("non-finite cells in {}", file_name(path)), bad as f64, Bound::AtMost(0.0)));
    }
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn snapshot(path: PathBuf, snap: Snapshot) -> Result<(), RunError> {
    snap.write_to(BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn est(cfg: &ScenarioConfig) -> Result<EstContext, RunError> {
    Ok(EstContext::with_config(cfg.model.gamma, cfg.numerics.quad_rel_tol, 1e8, 40)?)
}

fn drift(s: &RateSeries, t_end: f64) -> f64 {
    s.drift(t_end).unwrap_or(f64::NAN)
}

fn estfun(cfg: &ScenarioConfig, dir: &Path) -> Result<Outcome, RunError> {
    let ctx = est(cfg)?;
    let p = cfg.scenario.p;
    let gamma = cfg.model.gamma;
    let mut header = vec!["t".to_string(), "tau".into(), "h0".into(), "h".into()];
    for m in 0..=p {
        header.push(format!("N_{m}"));
        header.push(format!("Q_{m}"));
        if supercritical(m, gamma) {
            header.push(format!("P_{m}"));
        }
    }
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&hdr);
    for t in TimeGrid::decades(1.0, 1e4, 8)?.nodes() {
        let mut row: Vec<Cell> = time_cells(t).to_vec();
        row.push(ctx.eval_h0(t)?.into());
        row.push(ctx.eval_h(t)?.into());
        for m in 0..=p {
            row.push(ctx.eval_n(m, t)?.into());
            row.push(ctx.eval_q(m, t)?.into());
            if supercritical(m, gamma) {
                row.push(ctx.eval_p(m, t)?.into());
            }
        }
        table.push(row)?;
    }
    let mut o = Outcome::default();
    let path = dir.join("estfun.csv");
    save(&mut o, &table, &path)?;
    emit_plot(&path, "t", &["h0", "h", "Q_0"], &dir.join("estfun.svg"))?;

    let report = verify_identities(&ctx, p.max(2), &[1.0, 2.0, 10.0, 100.0, 1000.0], &[(1.0, 10.0), (2.0, 100.0), (10.0, 1000.0)])?;
    let mut ids = Table::new(&["id", "kind", "gamma", "m", "t", "a", "b", "lhs", "rhs", "measure", "pass"]);
    let opt = |v: Option<f64>| v.map(Cell::Num).unwrap_or_else(|| Cell::Text(String::new()));
    for c in &report.checked {
        ids.push(vec![
            c.id.clone().into(),
            format!("{:?}", c.kind).to_lowercase().into(),
            c.gamma.into(),
            c.m.into(),
            opt(c.t),
            opt(c.a),
            opt(c.b),
            c.lhs.into(),
            c.rhs.into(),
            c.measure.into(),
            c.pass.into(),
        ])?;
    }
    save(&mut o, &ids, &dir.join("identities.csv"))?;
    o.push(Part::new("identity failures", report.failures().len() as f64, Bound::AtMost(0.0)));
    Ok(o)
}

fn hierarchy(cfg: &ScenarioConfig, dir: &Path) -> Result<Outcome, RunError> {
    let grid = grid(cfg)?;
    let p = cfg.scenario.p;
    let (k, ell) = (grid.params().k, grid.params().ell);
    let w = amplitude_data(cfg, &grid, p, cfg.scenario.field_radius)?;
    let time = cfg.hierarchy_time()?;
    let h = solve_with_tail(&grid, &w, p, &time)?;
    let t_hi = time.t_max() / 100.0;
    let report = hierarchy_decay_report(&grid, &h, k, ell, t_hi)?;
    let mut o = Outcome::default();

    let mut rates = Table::new(&["m", "t", "tau", "norm_w", "Q_m", "ratio_w", "norm_phi", "N_m", "ratio_phi"]);
    for m in 0..=p {
        let (a, b) = (&report.amplitude[m], &report.phase[m]);
        for j in 0..a.ts.len() {
            let [t, tau] = time_cells(a.ts[j]);
            rates.push(vec![
                m.into(),
                t,
                tau,
                a.numerator[j].into(),
                a.envelope[j].into(),
                (a.numerator[j] / a.envelope[j]).into(),
                b.numerator[j].into(),
                b.envelope[j].into(),
                (b.numerator[j] / b.envelope[j]).into(),
            ])?;
        }
    }
    save(&mut o, &rates, &dir.join("rates.csv"))?;

    let series = report.all();
    let mut header = vec!["t".to_string(), "tau".into()];
    header.extend(series.iter().map(|s| format!("{}_ratio", s.label)));
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut wide = Table::new(&hdr);
    let ratios: Vec<Vec<f64>> = series.iter().map(|s| s.ratios()).collect();
    for j in 0..series[0].ts.len() {
        let mut row = time_cells(series[0].ts[j]).to_vec();
        row.extend(ratios.iter().map(|r| Cell::Num(r[j])));
        wide.push(row)?;
    }
    let wide_path = dir.join("ratios.csv");
    save(&mut o, &wide, &wide_path)?;
    let cols: Vec<&str> = hdr[2..].to_vec();
    emit_plot(&wide_path, "t", &cols, &dir.join("ratios.svg"))?;

    if let Some(r) = &report.remainder {
        let mut rem = Table::new(&["t", "tau", "norm", "P_p", "ratio"]);
        for j in 0..r.ts.len() {
            let [t, tau] = time_cells(r.ts[j]);
            rem.push(vec![t, tau, r.numerator[j].into(), r.envelope[j].into(), (r.numerator[j] / r.envelope[j]).into()])?;
        }
        save(&mut o, &rem, &dir.join("remainder.csv"))?;
    }
    for s in series {
        o.push(Part::new(format!("{} drift", s.label), drift(s, t_hi), DRIFT));
    }
    if cfg.toggles.gauge_suite {
        let sigma = grid.random_band_limited_real(cfg.scenario.seed.wrapping_add(2), cfg.scenario.field_radius, 1.0, ell as isize)?;
        let dev = hierarchy_gauge_check(&grid, &w, &sigma, p, &time)?;
        let mut g = Table::new(&["p", "deviation"]);
        g.push(vec![p.into(), dev.into()])?;
        save(&mut o, &g, &dir.join("gauge.csv"))?;
        o.push(Part::new("gauge deviation", dev, Bound::AtMost(1e-6)));
    }
    Ok(o)
}

fn transport_config(cfg: &ScenarioConfig) -> TransportConfig {
    TransportConfig { substeps: cfg.time.transport_substeps, ..TransportConfig::default() }
}

fn aux_config(cfg: &ScenarioConfig) -> AuxConfig {
    AuxConfig { substeps: cfg.time.aux_substeps, ..AuxConfig::default() }
}

fn inputs(cfg: &ScenarioConfig) -> Result<(Grid, ProfileField, PhaseField), RunError> {
    let grid = grid(cfg)?;
    let r = cfg.scenario.field_radius;
    let w = amplitude_data(cfg, &grid, cfg.scenario.p, r)?;
    let psi = phase_data(cfg, &grid, r)?;
    Ok((grid, w, psi))
}

fn transport(cfg: &ScenarioConfig, dir: &Path) -> Result<Outcome, RunError> {
    let (grid, w, psi) = inputs(cfg)?;
    let (k, ell) = (grid.params().k, grid.params().ell);
    let tcfg = transport_config(cfg);
    let data = prepare(&grid, &w, &psi, cfg.scenario.p, &cfg.hierarchy_time()?, &cfg.run_time()?, &tcfg, true)?;
    let a = v_vs_wplus(&grid, &data.v, &w, k, data.gamma)?;
    let b = compare_v_wp(&grid, &data.v, &data.hierarchy, k)?;
    let c = chi_vs_psiplus(&grid, &data.chi, &psi, ell, data.gamma)?;
    let mut o = Outcome::default();
    let mut table = Table::new(&[
        "t", "tau", "v_minus_wplus", "h", "ratio_v_wplus", "v_minus_wp", "Q_p", "ratio_v_wp", "chi_minus_psiplus", "ratio_chi", "l2_v",
    ]);
    for j in 0..a.ts.len() {
        let [t, tau] = time_cells(a.ts[j]);
        table.push(vec![
            t,
            tau,
            a.numerator[j].into(),
            a.envelope[j].into(),
            (a.numerator[j] / a.envelope[j]).into(),
            b.numerator[j].into(),
            b.envelope[j].into(),
            (b.numerator[j] / b.envelope[j]).into(),
            c.numerator[j].into(),
            (c.numerator[j] / c.envelope[j]).into(),
            grid.l2(&data.v.fields[j]).into(),
        ])?;
    }
    let path = dir.join("transport.csv");
    save(&mut o, &table, &path)?;
    emit_plot(&path, "t", &["ratio_v_wplus", "ratio_v_wp", "ratio_chi"], &dir.join("transport.svg"))?;
    let t_end = data.tg.t_max();
    o.push(Part::new("|V-w+|/h drift", drift(&a, t_end), DRIFT));
    o.push(Part::new("|V-Wp|/Qp drift", drift(&b, t_end), DRIFT));
    o.push(Part::new("V L2 drift", l2_drift(&grid, &data.v), Bound::AtMost(1e-8)));
    let phi = data.hierarchy.big_phi_trajectory(data.p as isize - 1);
    if cfg.toggles.gauge_suite {
        let gauge = gauge_check_transport(&grid, &w, &psi, &phi, &data.tg, &tcfg)?;
        o.push(Part::new("gauge deviation", gauge, Bound::AtMost(1e-6)));
    }
    if cfg.toggles.richardson {
        o.push(Part::new("V change from data at t_max/2", richardson_check(&grid, &w, &phi, &data.tg, &tcfg)?, Bound::Report));
    }
    Ok(o)
}

fn rates_table(series: &[RateSeries]) -> Result<Table, RunError> {
    let mut header = vec!["t".to_string(), "tau".into()];
    for s in series {
        header.push(format!("{}_norm", s.label));
        header.push(format!("{}_envelope", s.label));
        header.push(format!("{}_ratio", s.label));
    }
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&hdr);
    for j in 0..series[0].ts.len() {
        let mut row = time_cells(series[0].ts[j]).to_vec();
        for s in series {
            row.push(s.numerator[j].into());
            row.push(s.envelope[j].into());
            row.push((s.numerator[j] / s.envelope[j]).into());
        }
        table.push(row)?;
    }
    Ok(table)
}

fn waveop(cfg: &ScenarioConfig, dir: &Path) -> Result<Outcome, RunError> {
    let (grid, w, psi) = inputs(cfg)?;
    let data = prepare(&grid, &w, &psi, cfg.scenario.p, &cfg.hierarchy_time()?, &cfg.run_time()?, &transport_config(cfg), false)?;
    let res = omega0(&grid, &data, &cfg.time.t0_sequence, &aux_config(cfg))?;
    let mut o = Outcome::default();

    let mut cauchy = Table::new(&["t0", "diff_w", "Q_p", "ratio"]);
    for r in &res.cauchy {
        cauchy.push(vec![r.t0.into(), r.diff_w.into(), r.q_p.into(), r.ratio.into()])?;
    }
    save(&mut o, &cauchy, &dir.join("cauchy.csv"))?;
    let mut fixed = Table::new(&["t0_a", "t0_b", "t_fixed", "diff_w", "diff_phi"]);
    for (i, (dw, dp)) in res.fixed_diff_w.iter().zip(&res.fixed_diff_phi).enumerate() {
        fixed.push(vec![res.t0_sequence[i].into(), res.t0_sequence[i + 1].into(), res.t_fixed.into(), (*dw).into(), (*dp).into()])?;
    }
    save(&mut o, &fixed, &dir.join("fixed_time.csv"))?;
    let rates = rates_table(&res.rates)?;
    let rates_path = dir.join("rates.csv");
    save(&mut o, &rates, &rates_path)?;
    let ratio_cols: Vec<String> = res.rates.iter().map(|s| format!("{}_ratio", s.label)).collect();
    let cols: Vec<&str> = ratio_cols.iter().map(String::as_str).collect();
    emit_plot(&rates_path, "t", &cols, &dir.join("rates.svg"))?;

    let rep = res.representative();
    let ex = extract_asymptotics(&grid, &rep.traj, &data)?;
    snapshot(dir.join("w_plus_est.hsl"), Snapshot::from_profile(&grid, &ex.w_plus_est))?;
    snapshot(dir.join("psi_plus_est.hsl"), Snapshot::from_phase(&grid, &ex.psi_plus_est))?;
    let last = rep.traj.grid().len() - 1;
    snapshot(dir.join("w_final.hsl"), Snapshot::from_profile(&grid, &rep.traj.w.fields[last]))?;
    snapshot(dir.join("phi_final.hsl"), Snapshot::from_phase(&grid, &rep.traj.phi.fields[last]))?;
    let mut extraction = Table::new(&["t_max", "c_w", "c_psi", "growth", "nonconvergent"]);
    extraction.push(vec![
        ex.t_max.into(),
        ex.c_w.into(),
        ex.c_psi.map(Cell::Num).unwrap_or_else(|| Cell::Text("undefined".into())),
        ex.growth.into(),
        ex.nonconvergent.into(),
    ])?;
    save(&mut o, &extraction, &dir.join("extraction.csv"))?;

    let blowups = res.runs.iter().filter(|r| r.blowup.is_some()).count();
    if blowups > 0 {
        o.blowup = true;
    }
    o.push(Part::new("runs with blow-up", blowups as f64, Bound::AtMost(0.0)));
    o.push(Part::new("Cauchy ratio spread", res.cauchy_spread(), Bound::AtMost(1.5)));
    o.push(Part::flag("fixed-time diffs decrease", res.fixed_diffs_decrease(1.5)));
    let t_end = cfg.time.t0_sequence[0];
    for s in &res.rates {
        o.push(Part::new(format!("{} drift", s.label), drift(s, t_end), DRIFT));
    }
    o.push(Part::new("C for w+", ex.c_w, Bound::AtMost(10.0)));
    if let Some(c) = ex.c_psi {
        o.push(Part::new("C for psi+", c, Bound::AtMost(10.0)));
    }
    o.push(Part::flag("remainder converges", !ex.nonconvergent));

    if cfg.toggles.negative_control {
        let mut nc = Table::new(&["p", "growth", "nonconvergent"]);
        for p in [0, 1] {
            let (g, flag) = control_growth(cfg, p)?;
            nc.push(vec![p.into(), g.into(), flag.into()])?;
            o.push(Part::flag(format!("control p={p} flag as expected"), flag == (p == 0)));
        }
        save(&mut o, &nc, &dir.join("negative_control.csv"))?;
    }
    Ok(o)
}

fn scatter(cfg: &ScenarioConfig, dir: &Path) -> Result<Outcome, RunError> {
    let (grid, w, psi) = inputs(cfg)?;
    let p = cfg.scenario.p;
    let tcfg = transport_config(cfg);
    let hier = cfg.hierarchy_time()?;
    let tg = cfg.run_time()?;
    let data = prepare(&grid, &w, &psi, p, &hier, &tg, &tcfg, false)?;
    let partner_w = w.rotated(&psi, -1.0);
    let partner = prepare(&grid, &partner_w, &PhaseField::zeros(grid.len()), p, &hier, &tg, &tcfg, false)?;
    let seq = &cfg.time.t0_sequence;
    let acfg = aux_config(cfg);
    let (a, b) = rayon::join(|| omega0(&grid, &data, seq, &acfg), || omega0(&grid, &partner, seq, &acfg));
    let (a, b) = (a?, b?);
    let mut o = Outcome::default();

    let r_list = [2.0, 4.0, f64::INFINITY];
    let rows = asymptotic_error_report(&grid, &data, &a.representative().traj, &r_list)?;
    let mut errors = Table::new(&["t", "tau", "E_k", "E_0", "P_p", "ratio", "lr_2", "lr_4", "lr_inf"]);
    for r in &rows {
        let [t, tau] = time_cells(r.t);
        let mut row = vec![t, tau, r.e_k.into(), r.e_0.into(), r.p_p.into(), r.ratio().into()];
        row.extend(r.lr.iter().map(|&(_, v)| Cell::Num(v)));
        errors.push(row)?;
    }
    let err_path = dir.join("error_rates.csv");
    save(&mut o, &errors, &err_path)?;
    emit_plot(&err_path, "t", &["ratio", "lr_2", "lr_inf"], &dir.join("error_rates.svg"))?;
    let collapse = rows
        .iter()
        .map(|r| {
            let (x, y) = (r.lr[0].1, r.e_0 / r.p_p);
            if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()) }
        })
        .fold(0.0, f64::max);
    o.push(Part::new("r=2 collapse rel gap", collapse, Bound::AtMost(1e-12)));

    let mut gauge = Table::new(&["t0", "t", "tau", "metric"]);
    let mut worst: f64 = 0.0;
    for (x, y) in a.runs.iter().zip(&b.runs) {
        for (t, m) in gauge_distance_series(&grid, &x.traj, &y.traj)? {
            let [tc, tau] = time_cells(t);
            gauge.push(vec![x.t0.into(), tc, tau, m.into()])?;
            worst = if m.is_nan() { f64::INFINITY } else { worst.max(m) };
        }
    }
    save(&mut o, &gauge, &dir.join("gauge.csv"))?;
    o.push(Part::new("max gauge metric", worst, Bound::AtMost(1e-5)));

    match sigma_extract(&grid, &a.representative().traj, &b.representative().traj) {
        Ok(s) => {
            snapshot(dir.join("sigma.hsl"), Snapshot::from_phase(&grid, &s.sigma))?;
            let ell = grid.params().ell as isize;
            let off = grid.yl_norm(&s.sigma.add(&psi), ell)?;
            let mut t = Table::new(&["residual", "amplitude_mismatch", "metric", "sigma_plus_psi_plus"]);
            t.push(vec![s.residual.into(), s.amplitude_mismatch.into(), s.metric.into(), off.into()])?;
            save(&mut o, &t, &dir.join("sigma.csv"))?;
            o.push(Part::new("|sigma + psi+|", off, Bound::Report));
        }
        Err(e) => o.push(Part::new(format!("sigma extraction: {e}"), f64::NAN, Bound::AtMost(0.0))),
    }
    Ok(o)
}

/// Runs the acceptance suite and writes `summary.csv`.
pub fn verify_all(
    cfg: &ScenarioConfig,
    dir: &Path,
    on_result: impl FnMut(&CriterionResult),
) -> Result<(Outcome, Vec<CriterionResult>), RunError> {
    std::fs::create_dir_all(dir)?;
    let results = run_all(cfg, on_result);
    let mut summary = Table::new(&["id", "status", "measured", "bound", "runtime"]);
    let mut o = Outcome::default();
    for r in &results {
        let (measured, bound) = r.headline().unwrap_or((f64::NAN, f64::NAN));
        let status = if r.pass() { "pass" } else { "fail" };
        summary.push(vec![r.id.into(), status.into(), measured.into(), bound.into(), r.runtime.into()])?;
        o.push(Part::flag(format!("criterion {}", r.id), r.pass()));
        o.blowup |= r.outcome.blowup;
    }
    // a non-finite headline is already a failure row; the count is not a new one
    summary.write(&dir.join("summary.csv"))?;
    let details: String = results.iter().map(|r| r.line() + "\n").collect();
    std::fs::write(dir.join("criteria.txt"), details)?;
    Ok((o, results))
}
