use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cart_core::control::{
    self, consistent_certificate, estimate_k_with, pd_condition, select_xi, BacksteppingDesign, KGrid,
};
use cart_core::equilibria::{analyze, controlled_equilibrium_with, EquilibriumReport, DEFAULT_EIG_TOL};
use cart_core::par::Execution;
use cart_core::simulate::{analyze_outcome, run_batch, Trajectory};

use crate::error::{CliError, CliResult};
use crate::output::{self, SweepRow};
use crate::scenario::{Choice, ScenarioFile};

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

fn say(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Write {
        path: "<stdout>".into(),
        source,
    })
}

fn grid(seed: Option<u64>) -> KGrid {
    KGrid {
        jitter_seed: seed,
        ..KGrid::default()
    }
}

/// Resolve `k` and ξ for gain `a` on the scenario's certificate region.
pub fn resolve_design(scn: &ScenarioFile, a: f64, k: Choice, xi: Choice, seed: Option<u64>) -> CliResult<BacksteppingDesign> {
    let p = &scn.params;
    let region = scn.certificate_region(a)?;
    let u_bound = scn.certificate_u_bound()?;
    let grid = grid(seed);
    let design = match (k, xi) {
        (Choice::Value(k), Choice::Value(xi)) => BacksteppingDesign::new(p, a, xi, k)?,
        (Choice::Value(k), Choice::Auto) => BacksteppingDesign::new(p, a, select_xi(p, a, k)?, k)?,
        (Choice::Auto, Choice::Value(xi)) => {
            let d = BacksteppingDesign::new(p, a, xi, 0.0)?;
            d.with_k(estimate_k_with(p, &d, &region, u_bound, &grid)?)
        }
        (Choice::Auto, Choice::Auto) => consistent_certificate(p, a, &region, u_bound, &grid)
            .map_err(|e| match e {
                cart_core::Error::Precondition(m) => CliError::Certificate(m),
                e => e.into(),
            })?,
    };
    Ok(design)
}

/// The scenario's own certificate, when it has one.
pub fn scenario_design(scn: &ScenarioFile, seed: Option<u64>) -> CliResult<Option<BacksteppingDesign>> {
    match (scn.certificate, scn.law.gain()) {
        (Some(c), Some(a)) => resolve_design(scn, a, c.k, c.xi, seed).map(Some),
        _ => Ok(None),
    }
}

/// Integrate a scenario, recording V with the certificate weight if present.
pub fn run_scenario(scn: &ScenarioFile, seed: Option<u64>) -> CliResult<(Trajectory, Option<BacksteppingDesign>)> {
    let design = scenario_design(scn, seed)?;
    let traj = scn.to_scenario(design.map(|d| d.xi)).run()?;
    Ok((traj, design))
}

pub fn simulate(scn_path: &Path, csv_path: &Path, seed: Option<u64>, out: &mut dyn Write) -> CliResult<()> {
    let scn = ScenarioFile::load(scn_path)?;
    let (traj, design) = run_scenario(&scn, seed)?;
    let mut w = create(csv_path)?;
    output::write_trajectory(&mut w, &traj, design.is_some())?;
    w.flush().map_err(|source| CliError::Write {
        path: csv_path.to_owned(),
        source,
    })?;
    let o = analyze_outcome(&traj, scn.analysis.clearance_threshold, scn.analysis.relapse_factor);
    let mut text = output::outcome_lines(&o);
    let last = traj.last().expect("at least one sample");
    text.push_str(&format!(
        "final_t={}\nfinal_x1={:e}\nfinal_x2={:e}\nfinal_x3={:e}\nsamples={}\n",
        last.t,
        last.state.x1,
        last.state.x2,
        last.state.x3,
        traj.samples.len()
    ));
    if let Some(d) = design {
        text.push_str(&format!("xi={}\nk={}\npd_condition={}\n", d.xi, d.k, pd_condition(&d)));
    }
    say(out, &text)
}

fn describe(r: &EquilibriumReport) -> String {
    let eigs: Vec<String> = r
        .eigenvalues
        .iter()
        .map(|z| {
            if z.im == 0.0 {
                format!("{:e}", z.re)
            } else {
                format!("{:e}{:+e}i", z.re, z.im)
            }
        })
        .collect();
    format!(
        "[{:?}]\npoint = ({:e}, {:e}, {:e})\nadmissible = {}\neigenvalues = {}\nstability = {:?}\n",
        r.kind,
        r.point.x1,
        r.point.x2,
        r.point.x3,
        r.admissible,
        eigs.join(", "),
        r.stability
    )
}

pub fn equilibria(scn_path: &Path, out: &mut dyn Write) -> CliResult<()> {
    let scn = ScenarioFile::load(scn_path)?;
    let report = analyze(&scn.params, DEFAULT_EIG_TOL)?;
    let mut text = String::new();
    for r in &report.equilibria {
        text.push_str(&describe(r));
        text.push('\n');
    }
    if report.interior_degenerate {
        text.push_str("interior = degenerate (every x1 solves the quadratic)\n");
    }
    text.push_str(&format!("bistable = {}\n", report.bistable));
    let tau = scn.law.tau(&scn.params)?;
    if tau > 0.0 {
        match controlled_equilibrium_with(&scn.params, tau, scn.law.tau_drains_pool, DEFAULT_EIG_TOL) {
            Ok(r) => {
                text.push_str(&format!("\ntau = {tau}\n"));
                text.push_str(&describe(&r));
            }
            Err(e) => text.push_str(&format!("\ncontrolled equilibrium: {e}\n")),
        }
    }
    say(out, &text)
}

/// `k` source for `design`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KArg {
    Value(f64),
    Estimate,
    /// From the scenario's certificate, else estimated.
    Scenario,
}

pub fn design(scn_path: &Path, a: f64, k: KArg, xi: Choice, seed: Option<u64>, out: &mut dyn Write) -> CliResult<()> {
    let scn = ScenarioFile::load(scn_path)?;
    let p = &scn.params;
    let k = match k {
        KArg::Value(v) => {
            if !v.is_finite() || v < 0.0 {
                return Err(CliError::Validation("invalid input `k`: must be finite and >= 0".into()));
            }
            Choice::Value(v)
        }
        KArg::Estimate => Choice::Auto,
        KArg::Scenario => scn.certificate.map_or(Choice::Auto, |c| c.k),
    };
    if let Choice::Value(v) = xi {
        if !v.is_finite() || v <= 0.0 {
            return Err(CliError::Validation("invalid input `xi`: must be finite and > 0".into()));
        }
    }
    let d = resolve_design(&scn, a, k, xi, seed)?;
    let lower = control::tau_lower_bound(p)?;
    let region = scn.certificate_region(a)?;
    let pd = pd_condition(&d);
    let text = format!(
        "a={}\ntau={}\ntau_lower_bound={}\nk={}\nxi={}\nell_hat={}\nm_hat={}\nsqrt_xi_ell_m={}\nregion_x1=[{}, {}]\nregion_z2=[{}, {}]\nu_bound={}\npd_condition={}\n",
        d.a,
        d.tau,
        lower,
        d.k,
        d.xi,
        d.ell_hat,
        d.m_hat,
        (d.xi * d.ell_hat * d.m_hat).sqrt(),
        region.x1.0,
        region.x1.1,
        region.z2.0,
        region.z2.1,
        scn.certificate_u_bound()?,
        pd
    );
    say(out, &text)?;
    if !pd {
        return Err(CliError::Certificate(format!(
            "k = {} is not below sqrt(xi * ell_hat * m_hat) = {}",
            d.k,
            (d.xi * d.ell_hat * d.m_hat).sqrt()
        )));
    }
    if d.tau <= lower {
        return Err(CliError::Certificate(format!("tau = {} does not exceed {}", d.tau, lower)));
    }
    Ok(())
}

/// Evenly spaced values, `from` alone when `steps == 1`.
pub fn sweep_values(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![from],
        n => (0..n)
            .map(|i| {
                if i + 1 == n {
                    to
                } else {
                    from + (to - from) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// One scenario per grid cell, outcomes in cell order.
pub fn sweep_rows(scn: &ScenarioFile, field: &str, values: &[f64], exec: Execution) -> CliResult<Vec<SweepRow>> {
    let mut cells = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let mut cell = scn.clone();
        cell.set_field(field, v)?;
        cell.validate()
            .map_err(|e| CliError::Validation(format!("cell {i} ({field} = {v}): {e}")))?;
        cells.push(cell.to_scenario(None));
    }
    let results = run_batch(&cells, exec);
    let a = &scn.analysis;
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let traj = r.map_err(|e| match CliError::from(e) {
                CliError::Integration(m) => CliError::Integration(format!("cell {i}: {m}")),
                CliError::Validation(m) => CliError::Validation(format!("cell {i}: {m}")),
                e => e,
            })?;
            Ok(SweepRow {
                cell_index: i,
                varied_value: values[i],
                outcome: analyze_outcome(&traj, a.clearance_threshold, a.relapse_factor),
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    scn_path: &Path,
    field: &str,
    from: f64,
    to: f64,
    steps: usize,
    csv_path: &Path,
    exec: Execution,
    out: &mut dyn Write,
) -> CliResult<()> {
    if !from.is_finite() || !to.is_finite() {
        return Err(CliError::Validation("invalid input `from`/`to`: must be finite".into()));
    }
    if steps == 0 {
        return Err(CliError::Validation("invalid input `steps`: must be >= 1".into()));
    }
    let scn = ScenarioFile::load(scn_path)?;
    let values = sweep_values(from, to, steps);
    let rows = sweep_rows(&scn, field, &values, exec)?;
    let mut w = create(csv_path)?;
    output::write_sweep(&mut w, &rows)?;
    w.flush().map_err(|source| CliError::Write {
        path: csv_path.to_owned(),
        source,
    })?;
    say(out, &format!("cells={}\n", rows.len()))
}

pub fn plot(csv_path: &Path, svg_path: &Path, log: bool) -> CliResult<()> {
    let text = std::fs::read_to_string(csv_path).map_err(|source| CliError::Read {
        path: csv_path.to_owned(),
        source,
    })?;
    let series = output::read_series(&text)?;
    std::fs::write(svg_path, output::render_svg(&series, log)).map_err(|source| CliError::Write {
        path: svg_path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid() {
        assert_eq!(sweep_values(1.0, 2.0, 1), vec![1.0]);
        assert_eq!(sweep_values(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
        let v = sweep_values(0.1, 0.7, 7);
        assert_eq!(v.len(), 7);
        assert_eq!(v[6], 0.7);
    }
}
