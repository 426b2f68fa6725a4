//! Run orchestration shared by the command-line harness and the
//! integration tests: the diagnostic simulation loop, the manufactured
//! convergence study, and the boundary-extension check.

use crate::config::{Mode, RunSetup};
use crate::error::{NsfError, Result};
use crate::extension::{
    dirichlet_trace_mismatch, extend_temperature, extend_velocity, velocity_trace_mismatch,
};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::mms::Manufactured;
use crate::monitor::{compatibility_residuals, Flag, Monitor};
use crate::output::{self, RunSummary, Termination};
use crate::stepper::{self, HookDecision, State, StepperConfig};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub struct SimulationOutcome {
    pub summary: RunSummary,
    pub records: Vec<crate::monitor::DiagnosticsRecord>,
    pub final_state: State,
}

/// Run the solver with the streaming monitor attached. The loop stops early
/// on positivity loss or blow-up suspicion always, and on a hitting-time
/// flag when the configuration asks for it.
pub fn run_simulation(setup: &RunSetup) -> Result<SimulationOutcome> {
    let compat = compatibility_residuals(
        &setup.initial.rho,
        &setup.initial.theta,
        &setup.initial.u,
        &setup.boundary,
        &setup.params,
    )?;
    let mut monitor = Monitor::new(
        &setup.initial,
        &setup.params,
        &setup.boundary,
        setup.monitor.clone(),
        setup.stepper.mms,
    )?;
    let stop_on_hit = setup.stop_on_hit;
    let mut termination = Termination::Completed;
    let (_traj, final_state) = stepper::run(
        setup.initial.clone(),
        &setup.params,
        &setup.boundary,
        &setup.stepper,
        |step, state| {
            let record = monitor.observe(step, state)?;
            if record.flags.contains(&Flag::PositivityLoss) {
                termination = Termination::PositivityLoss;
                return Ok(HookDecision::Stop);
            }
            if record.flags.contains(&Flag::BlowupSuspected) {
                termination = Termination::BlowupSuspected;
                return Ok(HookDecision::Stop);
            }
            if record.flags.contains(&Flag::HittingTime) {
                termination = Termination::HittingTime;
                if stop_on_hit {
                    return Ok(HookDecision::Stop);
                }
            }
            Ok(HookDecision::Continue)
        },
    )?;
    let hitting_time = monitor.hitting_time();
    let threshold = monitor.threshold();
    let records = monitor.records().to_vec();
    let mut summary = RunSummary::from_records(&records, termination, threshold, hitting_time);
    summary.compatibility = Some(compat);
    Ok(SimulationOutcome {
        summary,
        records,
        final_state,
    })
}

/// Write the diagnostics CSV, the JSON summary, and optionally a final
/// state snapshot under `dir` with the configured prefix. Returns the
/// summary path.
pub fn write_artifacts(
    outcome: &SimulationOutcome,
    dir: &Path,
    prefix: &str,
    snapshot_final: bool,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{prefix}_diagnostics.csv"));
    let file = fs::File::create(&csv_path)?;
    output::write_csv(std::io::BufWriter::new(file), &outcome.records)?;
    let summary_path = dir.join(format!("{prefix}_summary.json"));
    fs::write(&summary_path, outcome.summary.to_json()?)?;
    if snapshot_final {
        let snap_path = dir.join(format!("{prefix}_final.nsff"));
        let file = fs::File::create(snap_path)?;
        output::write_snapshot(std::io::BufWriter::new(file), &outcome.final_state)?;
    }
    Ok(summary_path)
}

#[derive(Clone, Copy, Debug)]
pub struct LevelError {
    pub n: usize,
    pub err: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct MmsReport {
    pub spatial: Vec<LevelError>,
    /// Observed order per field (rho, theta, u) between the two finest
    /// levels.
    pub spatial_orders: [f64; 3],
    /// Self-convergence differences at successively halved time steps.
    pub temporal: Vec<(f64, f64)>,
    pub temporal_order: f64,
    pub required_orders: [f64; 3],
    pub attained: bool,
}

impl MmsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,level,err_rho,err_theta,err_u,order_rho,order_theta,order_u\n");
        for (k, lvl) in self.spatial.iter().enumerate() {
            let orders = if k == 0 {
                String::from(",,")
            } else {
                let prev = &self.spatial[k - 1];
                let o: Vec<String> = (0..3)
                    .map(|f| format!("{}", (prev.err[f] / lvl.err[f]).log2()))
                    .collect();
                o.join(",")
            };
            out.push_str(&format!(
                "spatial,{},{},{},{},{}\n",
                lvl.n, lvl.err[0], lvl.err[1], lvl.err[2], orders
            ));
        }
        for (k, (dt, diff)) in self.temporal.iter().enumerate() {
            let order = if k == 0 {
                String::new()
            } else {
                format!("{}", (self.temporal[k - 1].1 / diff).log2())
            };
            out.push_str(&format!("temporal,{dt},{diff},,,{order},,\n"));
        }
        out
    }
}

fn level_grid(setup: &RunSetup, n: usize) -> Result<Arc<Grid>> {
    let dim = setup.grid.dim();
    let counts = vec![n; dim];
    use crate::grid::{Face, Side, TempBc};
    let tags: Vec<[Option<TempBc>; 2]> = (0..dim)
        .map(|a| {
            [
                setup.grid.temp_bc(Face { axis: a, side: Side::Minus }),
                setup.grid.temp_bc(Face { axis: a, side: Side::Plus }),
            ]
        })
        .collect();
    Ok(Arc::new(Grid::build(
        dim,
        &setup.grid.extents()[..dim],
        &counts,
        &tags,
        &setup.grid.topology()[..dim],
        true,
    )?))
}

fn mms_initial(fam: &Manufactured, grid: &Arc<Grid>) -> Result<State> {
    let (rho, theta, u) = fam.state(grid, 0.0)?;
    Ok(State {
        t: 0.0,
        rho,
        theta,
        u,
    })
}

/// Manufactured-solution convergence study.
///
/// Spatial leg: the grid is refined over `levels` with the time step scaled
/// as the square of the spacing, so the first-order-in-time error stays
/// subdominant and the spatial order of each field is visible. Temporal
/// leg: on the coarsest grid the time step is halved twice and the
/// self-convergence difference between consecutive runs isolates the time
/// discretization order.
pub fn mms_verify(setup: &RunSetup) -> Result<MmsReport> {
    let block = setup
        .mms
        .as_ref()
        .ok_or_else(|| NsfError::ConfigParse("verification needs an [mms] block".into()))?;
    let fam = block.family();
    let levels = &block.levels;
    if levels.len() < 2 {
        return Err(NsfError::ConfigParse(
            "verification needs at least two refinement levels".into(),
        ));
    }

    let mut spatial = Vec::with_capacity(levels.len());
    let n0 = levels[0] as f64;
    for &n in levels {
        let grid = level_grid(setup, n)?;
        fam.check_compatible(&grid, &setup.params)?;
        let scale = (n0 / n as f64).powi(2);
        let cfg = StepperConfig {
            dt: setup.stepper.dt * scale,
            mms: Some(fam),
            ..setup.stepper.clone()
        };
        let initial = mms_initial(&fam, &grid)?;
        let (_, final_state) = stepper::run(
            initial,
            &setup.params_on(&grid),
            &setup.boundary_on(&grid),
            &cfg,
            |_, _| Ok(HookDecision::Continue),
        )?;
        let reference = fam.state(&grid, final_state.t)?;
        spatial.push(LevelError {
            n,
            err: stepper::state_sup_error(&final_state, &reference),
        });
    }
    let last = &spatial[spatial.len() - 1];
    let prev = &spatial[spatial.len() - 2];
    let mut spatial_orders = [0.0; 3];
    for f in 0..3 {
        spatial_orders[f] = if last.err[f] == 0.0 && prev.err[f] == 0.0 {
            f64::INFINITY // exactly reproduced (e.g. the equilibrium family)
        } else {
            (prev.err[f] / last.err[f]).log2()
        };
    }

    // Temporal self-convergence on the coarsest grid.
    let grid = level_grid(setup, levels[0])?;
    let bd = setup.boundary_on(&grid);
    let level_params = setup.params_on(&grid);
    let run_dt = |dt: f64| -> Result<State> {
        let cfg = StepperConfig {
            dt,
            cfl_safety: 1.0, // the study controls dt itself
            mms: Some(fam),
            ..setup.stepper.clone()
        };
        let initial = mms_initial(&fam, &grid)?;
        let (_, s) = stepper::run(initial, &level_params, &bd, &cfg, |_, _| {
            Ok(HookDecision::Continue)
        })?;
        Ok(s)
    };
    let dts = [setup.stepper.dt, setup.stepper.dt / 2.0, setup.stepper.dt / 4.0];
    let states: Vec<State> = dts.iter().map(|&dt| run_dt(dt)).collect::<Result<_>>()?;
    let mut temporal = Vec::new();
    for k in 1..states.len() {
        let diff = stepper::state_sup_error(
            &states[k - 1],
            &(
                states[k].rho.clone(),
                states[k].theta.clone(),
                states[k].u.clone(),
            ),
        );
        let worst = diff.iter().fold(0.0f64, |a, &b| a.max(b));
        temporal.push((dts[k - 1], worst));
    }
    let temporal_order = if temporal[1].1 == 0.0 {
        f64::INFINITY
    } else {
        (temporal[0].1 / temporal[1].1).log2()
    };

    let req = block.required_orders;
    let attained = spatial_orders[0] >= req[0]
        && spatial_orders[1] >= req[1]
        && spatial_orders[2] >= req[2]
        && temporal_order >= 0.9;
    Ok(MmsReport {
        spatial,
        spatial_orders,
        temporal,
        temporal_order,
        required_orders: req,
        attained,
    })
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ExtensionReport {
    /// Sup mismatch of the velocity extension against its wall trace.
    pub velocity_trace: f64,
    /// Sup mismatch of the temperature extension on the prescribed walls.
    pub temperature_trace: f64,
    pub velocity_amplitude: f64,
    pub temperature_min: f64,
    pub temperature_max: f64,
}

/// Solve both boundary-extension problems for the configured data and
/// report trace fidelity plus the extension ranges; optionally persist the
/// fields as a snapshot for external inspection.
pub fn extension_test(setup: &RunSetup, snapshot_to: Option<&Path>) -> Result<ExtensionReport> {
    let grid = &setup.grid;
    let u_ext = extend_velocity(grid, &setup.boundary, setup.params.mu, setup.params.lambda)?;
    let theta_ext = extend_temperature(grid, &setup.boundary, setup.initial.theta.min())?;
    let report = ExtensionReport {
        velocity_trace: velocity_trace_mismatch(grid, &u_ext, &setup.boundary),
        temperature_trace: dirichlet_trace_mismatch(grid, &theta_ext, &setup.boundary),
        velocity_amplitude: u_ext.abs_max(),
        temperature_min: theta_ext.min(),
        temperature_max: theta_ext.max(),
    };
    if let Some(path) = snapshot_to {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let carrier = State {
            t: 0.0,
            rho: ScalarField::constant(grid.clone(), 1.0),
            theta: theta_ext,
            u: u_ext,
        };
        let file = fs::File::create(path)?;
        output::write_snapshot(std::io::BufWriter::new(file), &carrier)?;
    }
    Ok(report)
}

impl RunSetup {
    /// Boundary data transferred to a refinement of the run grid; the
    /// verification family is periodic, so resting insulated data is exact.
    fn boundary_on(&self, grid: &Arc<Grid>) -> crate::extension::BoundaryData {
        let _ = self;
        crate::extension::BoundaryData::resting_insulated(grid)
    }

    /// Fluid parameters carried onto a refinement grid. The verification
    /// family requires a vanishing potential, so the transfer is exact.
    fn params_on(&self, grid: &Arc<Grid>) -> crate::constitutive::FluidParams {
        crate::constitutive::FluidParams {
            potential: ScalarField::constant(grid.clone(), 0.0),
            ..self.params.clone()
        }
    }
}

/// Dispatch a validated configuration to its mode's driver, writing
/// artifacts under `out_dir` and returning the process exit code.
pub fn execute(setup: &RunSetup, out_dir: &Path) -> Result<i32> {
    let prefix = setup.output.prefix.clone();
    match setup.mode {
        Mode::Simulate => {
            let outcome = run_simulation(setup)?;
            write_artifacts(
                &outcome,
                out_dir,
                &prefix,
                setup.output.snapshot_every > 0,
            )?;
            Ok(outcome.summary.termination.exit_code())
        }
        Mode::MmsVerify => {
            let report = mms_verify(setup)?;
            fs::create_dir_all(out_dir)?;
            fs::write(out_dir.join(format!("{prefix}_convergence.csv")), report.to_csv())?;
            Ok(if report.attained { 0 } else { 1 })
        }
        Mode::ExtensionTest => {
            fs::create_dir_all(out_dir)?;
            let snap = out_dir.join(format!("{prefix}_extensions.nsff"));
            let report = extension_test(setup, Some(&snap))?;
            fs::write(
                out_dir.join(format!("{prefix}_extensions.json")),
                serde_json::to_string_pretty(&report)
                    .map_err(|e| NsfError::Snapshot(format!("extension report: {e}")))?,
            )?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use tempfile::tempdir;

    const EQUILIBRIUM: &str = r#"
        mode = "simulate"

        [grid]
        dim = 2
        extents = [1.0, 1.0]
        counts = [16, 16]
        topology = ["periodic", "walled"]
        temperature_bc = [["none", "none"], ["dirichlet", "neumann"]]

        [fluid]
        mu = 0.5
        lambda = 0.1
        kappa = 0.4
        cv = 1.0

        [data]
        rho0 = "1"
        theta0 = "1"
        u0 = ["0", "0"]
        theta_b = "1"
        q_b = "0"

        [stepper]
        dt = 1e-3
        t_end = 0.01
        p = 6.0
        q = 4.0
    "#;

    const MMS: &str = r#"
        mode = "mms_verify"

        [grid]
        dim = 2
        extents = [1.0, 1.0]
        counts = [16, 16]
        topology = ["periodic", "periodic"]
        temperature_bc = [["none", "none"], ["none", "none"]]

        [fluid]
        mu = 0.5
        lambda = 0.1
        kappa = 0.4
        cv = 1.0

        [data]
        rho0 = "1"
        theta0 = "1"
        u0 = ["0", "0"]

        [stepper]
        dt = 2e-3
        t_end = 0.02
        p = 6.0
        q = 4.0

        [mms]
        levels = [12, 24]
        required_orders = [0.8, 1.7, 1.7]
    "#;

    #[test]
    fn equilibrium_simulation_completes_flat() {
        let setup = RunConfig::parse(EQUILIBRIUM).unwrap().build().unwrap();
        let outcome = run_simulation(&setup).unwrap();
        assert_eq!(outcome.summary.termination, Termination::Completed);
        assert!(outcome.summary.min_principles_held);
        assert!(outcome.summary.hitting_time.is_none());
        assert!((outcome.summary.final_mass - 1.0).abs() < 1e-12);
        let compat = outcome.summary.compatibility.unwrap();
        assert_eq!(compat.max_zeroth_order(), 0.0);
        for r in &outcome.records {
            assert!(r.flags.is_empty());
        }
    }

    #[test]
    fn threshold_below_amplitude_stops_at_step_zero() {
        let text = format!("{EQUILIBRIUM}\n        [monitor]\n        threshold = 0.5\n");
        let setup = RunConfig::parse(&text).unwrap().build().unwrap();
        let outcome = run_simulation(&setup).unwrap();
        assert_eq!(outcome.summary.termination, Termination::HittingTime);
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.summary.hitting_time, Some(0.0));
    }

    #[test]
    fn artifacts_are_written_and_deterministic() {
        let setup = RunConfig::parse(EQUILIBRIUM).unwrap().build().unwrap();
        let outcome = run_simulation(&setup).unwrap();
        let dir = tempdir().unwrap();
        write_artifacts(&outcome, dir.path(), "run", true).unwrap();
        let csv1 = std::fs::read(dir.path().join("run_diagnostics.csv")).unwrap();
        assert!(dir.path().join("run_summary.json").exists());
        assert!(dir.path().join("run_final.nsff").exists());
        // Re-running the identical setup gives byte-identical diagnostics.
        let outcome2 = run_simulation(&setup).unwrap();
        let dir2 = tempdir().unwrap();
        write_artifacts(&outcome2, dir2.path(), "run", false).unwrap();
        let csv2 = std::fs::read(dir2.path().join("run_diagnostics.csv")).unwrap();
        assert_eq!(csv1, csv2);
    }

    #[test]
    fn mms_verification_attains_declared_orders() {
        let setup = RunConfig::parse(MMS).unwrap().build().unwrap();
        let report = mms_verify(&setup).unwrap();
        assert!(
            report.attained,
            "spatial {:?}, temporal {}",
            report.spatial_orders, report.temporal_order
        );
        let csv = report.to_csv();
        assert!(csv.starts_with("kind,level"));
        assert!(csv.contains("spatial,12"));
        assert!(csv.contains("temporal,"));
    }

    #[test]
    fn extension_test_reports_trace_fidelity() {
        let text = EQUILIBRIUM
            .replace("mode = \"simulate\"", "mode = \"extension_test\"")
            .replace("u_b = [\"0\", \"0\"]", "")
            .replace(
                "theta_b = \"1\"",
                "theta_b = \"1 + 0.5 * sin(2*pi*x)\"\n        u_b = [\"0.3 + 0.1 * sin(2*pi*x)\", \"0\"]",
            );
        let setup = RunConfig::parse(&text).unwrap().build().unwrap();
        let dir = tempdir().unwrap();
        let snap = dir.path().join("ext.nsff");
        let report = extension_test(&setup, Some(&snap)).unwrap();
        assert!(report.velocity_trace < 1e-12, "{report:?}");
        assert!(report.temperature_trace < 1e-12, "{report:?}");
        assert!(snap.exists());
        // Harmonic extensions respect the data range.
        assert!(report.temperature_min >= 0.5 - 1e-10);
        assert!(report.temperature_max <= 1.5 + 1e-10);
    }

    #[test]
    fn execute_maps_modes_to_exit_codes() {
        let dir = tempdir().unwrap();
        let setup = RunConfig::parse(EQUILIBRIUM).unwrap().build().unwrap();
        assert_eq!(execute(&setup, dir.path()).unwrap(), 0);
        let text = format!("{EQUILIBRIUM}\n        [monitor]\n        threshold = 0.5\n");
        let setup = RunConfig::parse(&text).unwrap().build().unwrap();
        assert_eq!(execute(&setup, dir.path()).unwrap(), 2);
    }
}
