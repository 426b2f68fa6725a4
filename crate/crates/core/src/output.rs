//! Run artifacts: per-step diagnostics CSV, end-of-run JSON summary, and a
//! small binary state-snapshot format.
//!
//! CSV schema (fixed order, one row per observed step):
//!
//! ```text
//! step,t,amplitude,w1inf,control_f,rho_min,rho_bound,theta_min,theta_bound,
//! theta_check_enabled,energy_res_momentum,energy_res_heat,korn_ratio,
//! grad_rho_ratio,gn_ratio,mass,flags
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so identical runs give
//! bit-identical files on one platform. `flags` is a `;`-joined list.

use crate::error::{NsfError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::monitor::{DiagnosticsRecord, Flag};
use crate::stepper::State;
use serde::Serialize;
use std::io::{Read, Write};
use std::sync::Arc;

pub const CSV_HEADER: &str = "step,t,amplitude,w1inf,control_f,rho_min,rho_bound,theta_min,\
                              theta_bound,theta_check_enabled,energy_res_momentum,\
                              energy_res_heat,korn_ratio,grad_rho_ratio,gn_ratio,mass,flags";

fn flag_name(f: Flag) -> &'static str {
    match f {
        Flag::HittingTime => "hitting_time",
        Flag::PositivityLoss => "positivity_loss",
        Flag::BlowupSuspected => "blowup_suspected",
    }
}

pub fn csv_row(r: &DiagnosticsRecord) -> String {
    let flags: Vec<&str> = r.flags.iter().map(|&f| flag_name(f)).collect();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.step,
        r.t,
        r.amplitude,
        r.w1inf,
        r.control_f,
        r.rho_min,
        r.rho_bound,
        r.theta_min,
        r.theta_bound,
        r.theta_check_enabled,
        r.energy_residual_momentum,
        r.energy_residual_heat,
        r.korn_ratio,
        r.grad_rho_ratio,
        r.gn_ratio,
        r.mass,
        flags.join(";")
    )
}

pub fn write_csv<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", csv_row(r))?;
    }
    Ok(())
}

/// Why the run loop stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    HittingTime,
    BlowupSuspected,
    PositivityLoss,
}

impl Termination {
    /// Process exit code contract: 0 completed, 2 hitting time, 3 blow-up
    /// suspicion, 4 positivity loss (1 is reserved for config/run errors).
    pub fn exit_code(self) -> i32 {
        match self {
            Termination::Completed => 0,
            Termination::HittingTime => 2,
            Termination::BlowupSuspected => 3,
            Termination::PositivityLoss => 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub termination: Termination,
    pub steps: usize,
    pub final_time: f64,
    pub threshold: f64,
    /// Interpolated threshold-crossing time, when crossed.
    pub hitting_time: Option<f64>,
    pub final_amplitude: f64,
    pub final_control: f64,
    pub final_mass: f64,
    pub min_principles_held: bool,
    pub flags_seen: Vec<String>,
    /// Boundary residuals of the initial data, when evaluated by the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compatibility: Option<crate::monitor::CompatibilityReport>,
}

impl RunSummary {
    pub fn from_records(
        records: &[DiagnosticsRecord],
        termination: Termination,
        threshold: f64,
        hitting_time: Option<f64>,
    ) -> RunSummary {
        let last = records.last();
        let mut flags_seen: Vec<String> = Vec::new();
        for r in records {
            for &f in &r.flags {
                let name = flag_name(f).to_string();
                if !flags_seen.contains(&name) {
                    flags_seen.push(name);
                }
            }
        }
        RunSummary {
            termination,
            steps: records.len().saturating_sub(1),
            final_time: last.map_or(0.0, |r| r.t),
            threshold,
            hitting_time,
            final_amplitude: last.map_or(0.0, |r| r.amplitude),
            final_control: last.map_or(0.0, |r| r.control_f),
            final_mass: last.map_or(0.0, |r| r.mass),
            min_principles_held: records.iter().all(|r| r.rho_ok && r.theta_ok),
            flags_seen,
            compatibility: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| NsfError::Snapshot(format!("summary serialization: {e}")))
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"NSFF";
const SNAPSHOT_VERSION: u32 = 1;

/// Binary state snapshot: magic, version, time, grid shape, then the
/// density, temperature, and velocity-component lattices row-major as
/// little-endian doubles.
pub fn write_snapshot<W: Write>(mut w: W, state: &State) -> Result<()> {
    let grid = state.grid();
    let dim = grid.dim();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    for a in 0..dim {
        w.write_all(&(grid.nodes_along(a) as u32).to_le_bytes())?;
    }
    for a in 0..dim {
        w.write_all(&grid.extents()[a].to_le_bytes())?;
    }
    let n_fields = 2 + dim as u32;
    w.write_all(&n_fields.to_le_bytes())?;
    let mut dump = |values: &[f64]| -> Result<()> {
        for &v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    dump(state.rho.values())?;
    dump(state.theta.values())?;
    for a in 0..dim {
        dump(state.u.comp(a))?;
    }
    Ok(())
}

/// Inverse of [`write_snapshot`]; the grid is rebuilt from the recorded
/// shape with the topology and boundary tags of `like` (the snapshot keeps
/// lattice data only).
pub fn read_snapshot<R: Read>(mut r: R, like: &Arc<Grid>) -> Result<State> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(NsfError::Snapshot(format!(
            "bad magic {magic:?}, expected {SNAPSHOT_MAGIC:?}"
        )));
    }
    let mut u32buf = [0u8; 4];
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != SNAPSHOT_VERSION {
        return Err(NsfError::Snapshot(format!(
            "unsupported snapshot version {version}"
        )));
    }
    r.read_exact(&mut f64buf)?;
    let t = f64::from_le_bytes(f64buf);
    r.read_exact(&mut u32buf)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    if dim != like.dim() {
        return Err(NsfError::Snapshot(format!(
            "snapshot dimension {dim} does not match the target grid ({})",
            like.dim()
        )));
    }
    for a in 0..dim {
        r.read_exact(&mut u32buf)?;
        let n = u32::from_le_bytes(u32buf) as usize;
        if n != like.nodes_along(a) {
            return Err(NsfError::Snapshot(format!(
                "snapshot has {n} nodes along axis {a}, the target grid {}",
                like.nodes_along(a)
            )));
        }
    }
    for a in 0..dim {
        r.read_exact(&mut f64buf)?;
        let e = f64::from_le_bytes(f64buf);
        if (e - like.extents()[a]).abs() > 1e-14 * like.extents()[a].abs() {
            return Err(NsfError::Snapshot(format!(
                "snapshot extent {e} along axis {a} does not match {}",
                like.extents()[a]
            )));
        }
    }
    r.read_exact(&mut u32buf)?;
    let n_fields = u32::from_le_bytes(u32buf) as usize;
    if n_fields != 2 + dim {
        return Err(NsfError::Snapshot(format!(
            "snapshot holds {n_fields} fields, expected {}",
            2 + dim
        )));
    }
    let node_count = like.node_count();
    let load = |r: &mut R| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(node_count);
        let mut buf = [0u8; 8];
        for _ in 0..node_count {
            r.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    let rho = ScalarField::from_values(like.clone(), load(&mut r)?)?;
    let theta = ScalarField::from_values(like.clone(), load(&mut r)?)?;
    let mut comps = Vec::with_capacity(dim);
    for _ in 0..dim {
        comps.push(load(&mut r)?);
    }
    let u = VectorField::from_components(like.clone(), comps)?;
    Ok(State { t, rho, theta, u })
}
