//! Run configuration: TOML parsing, closed-form field data, and the
//! hypothesis gate that rejects configurations violating the structural
//! assumptions the diagnostics rely on.
//!
//! Field data is given as expressions in `x` (and `y` in two dimensions) so
//! positivity, tangency, and compatibility checks are exact at grid nodes.

use crate::constitutive::{FluidParams, PotentialRegularity};
use crate::error::{NsfError, Result};
use crate::expr::Expr;
use crate::extension::BoundaryData;
use crate::field::{ScalarField, VectorField};
use crate::grid::{Grid, TempBc, Topology, MAX_DIM};
use crate::mms::Manufactured;
use crate::monitor::MonitorConfig;
use crate::stepper::{State, StepperConfig};
use serde::Deserialize;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    MmsVerify,
    ExtensionTest,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub grid: GridBlock,
    pub fluid: FluidBlock,
    pub data: DataBlock,
    pub stepper: StepperBlock,
    #[serde(default)]
    pub monitor: MonitorBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub mms: Option<MmsBlock>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub counts: Vec<usize>,
    /// Per axis: "periodic" or "walled".
    pub topology: Vec<String>,
    /// Per axis, [minus, plus]: "dirichlet", "neumann", or "none" for
    /// periodic axes.
    pub temperature_bc: Vec<[String; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidBlock {
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub cv: f64,
    #[serde(default = "zero_expr")]
    pub potential: String,
    /// "w1q" for first-order potential regularity, "w2q" for full.
    #[serde(default = "w2q")]
    pub potential_regularity: String,
}

fn zero_expr() -> String {
    "0".into()
}

fn w2q() -> String {
    "w2q".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub rho0: String,
    pub theta0: String,
    pub u0: Vec<String>,
    #[serde(default = "zero_expr")]
    pub theta_b: String,
    #[serde(default)]
    pub u_b: Vec<String>,
    #[serde(default = "zero_expr")]
    pub q_b: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperBlock {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    pub p: f64,
    pub q: f64,
    #[serde(default = "one")]
    pub sample_every: usize,
}

fn default_cfl() -> f64 {
    0.5
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSpec {
    Number(f64),
    Word(String),
}

impl Default for ThresholdSpec {
    fn default() -> ThresholdSpec {
        ThresholdSpec::Word("auto".into())
    }
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorBlock {
    pub threshold: ThresholdSpec,
    pub min_principle_tol: Option<f64>,
    pub blowup_amplitude: Option<f64>,
    pub blowup_growth: Option<f64>,
    pub blowup_window: Option<usize>,
    /// "stop" ends the run on a hitting-time flag; "continue" records it
    /// and keeps integrating.
    pub on_hit: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub prefix: String,
    /// Binary state snapshot cadence in steps; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for OutputBlock {
    fn default() -> OutputBlock {
        OutputBlock {
            dir: PathBuf::from("out"),
            prefix: "run".into(),
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmsBlock {
    pub rho_base: f64,
    pub rho_amp: f64,
    pub theta_base: f64,
    pub theta_amp: f64,
    pub u_amp: f64,
    pub decay: f64,
    /// Refinement levels for verification mode.
    pub levels: Vec<usize>,
    /// Declared spatial orders (rho, theta, u) that verification must meet.
    pub required_orders: [f64; 3],
}

impl Default for MmsBlock {
    fn default() -> MmsBlock {
        let f = Manufactured::default_family();
        MmsBlock {
            rho_base: f.rho_base,
            rho_amp: f.rho_amp,
            theta_base: f.theta_base,
            theta_amp: f.theta_amp,
            u_amp: f.u_amp,
            decay: f.decay,
            levels: vec![16, 32, 64],
            required_orders: [0.9, 1.9, 1.9],
        }
    }
}

impl MmsBlock {
    pub fn family(&self) -> Manufactured {
        Manufactured {
            rho_base: self.rho_base,
            rho_amp: self.rho_amp,
            theta_base: self.theta_base,
            theta_amp: self.theta_amp,
            u_amp: self.u_amp,
            decay: self.decay,
        }
    }
}

/// Everything needed to run, built from a validated configuration.
pub struct RunSetup {
    pub mode: Mode,
    pub grid: Arc<Grid>,
    pub params: FluidParams,
    pub boundary: BoundaryData,
    pub initial: State,
    pub stepper: StepperConfig,
    pub monitor: MonitorConfig,
    pub output: OutputBlock,
    pub stop_on_hit: bool,
    pub mms: Option<MmsBlock>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| NsfError::ConfigParse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Validate every structural hypothesis and assemble the run state.
    /// All violations are collected before rejecting, so one round trip
    /// reports everything wrong with a configuration.
    pub fn build(&self) -> Result<RunSetup> {
        let mut violations: Vec<String> = Vec::new();

        let dim = self.grid.dim;
        if dim == 0 || dim > MAX_DIM {
            return Err(NsfError::ConfigRejected(vec![format!(
                "grid dimension must be 1 or 2, got {dim}"
            )]));
        }
        let topology = self.parse_topology()?;
        let boundary_map = self.parse_boundary_map(&topology)?;

        // Expressions are parsed up front; a y-dependence in one dimension
        // is a configuration error, not silent truncation.
        fn parse_expr(
            violations: &mut Vec<String>,
            dim: usize,
            name: &str,
            src: &str,
        ) -> Option<Expr> {
            match Expr::parse(src) {
                Ok(e) => {
                    if let Some(v) = e.max_var() {
                        if v >= dim {
                            violations.push(format!(
                                "{name} uses variable \"y\" on a {dim}-dimensional grid"
                            ));
                            return None;
                        }
                    }
                    Some(e)
                }
                Err(err) => {
                    violations.push(format!("{name}: {err}"));
                    None
                }
            }
        }
        let rho0_e = parse_expr(&mut violations, dim, "data.rho0", &self.data.rho0);
        let theta0_e = parse_expr(&mut violations, dim, "data.theta0", &self.data.theta0);
        if self.data.u0.len() != dim {
            violations.push(format!(
                "data.u0 must list {dim} component expressions, got {}",
                self.data.u0.len()
            ));
        }
        let u0_e: Vec<Option<Expr>> = self
            .data
            .u0
            .iter()
            .enumerate()
            .map(|(a, s)| parse_expr(&mut violations, dim, &format!("data.u0[{a}]"), s))
            .collect();
        let theta_b_e = parse_expr(&mut violations, dim, "data.theta_b", &self.data.theta_b);
        let u_b_src: Vec<String> = if self.data.u_b.is_empty() {
            vec!["0".into(); dim]
        } else {
            self.data.u_b.clone()
        };
        if u_b_src.len() != dim {
            violations.push(format!(
                "data.u_b must list {dim} component expressions, got {}",
                u_b_src.len()
            ));
        }
        let u_b_e: Vec<Option<Expr>> = u_b_src
            .iter()
            .enumerate()
            .map(|(a, s)| parse_expr(&mut violations, dim, &format!("data.u_b[{a}]"), s))
            .collect();
        let q_b_e = parse_expr(&mut violations, dim, "data.q_b", &self.data.q_b);
        let potential_e = parse_expr(&mut violations, dim, "fluid.potential", &self.fluid.potential);

        // Exponent window of the integrability framework.
        let (p, q) = (self.stepper.p, self.stepper.q);
        if !(q > 3.0 && q.is_finite()) {
            violations.push(format!(
                "exponent window violated: q = {q} must lie in (3, inf)"
            ));
        } else {
            let p_low = 2.0 * q / (2.0 * q - 3.0);
            if !(p > p_low && p.is_finite()) {
                violations.push(format!(
                    "exponent window violated: p = {p} must exceed 2q/(2q-3) = {p_low}"
                ));
            }
        }
        if !(self.stepper.dt > 0.0 && self.stepper.dt.is_finite()) {
            violations.push(format!("stepper.dt must be positive, got {}", self.stepper.dt));
        }
        if !(self.stepper.t_end > 0.0 && self.stepper.t_end.is_finite()) {
            violations.push(format!(
                "stepper.t_end must be positive, got {}",
                self.stepper.t_end
            ));
        }
        if !(self.stepper.cfl_safety > 0.0 && self.stepper.cfl_safety <= 1.0) {
            violations.push(format!(
                "stepper.cfl_safety must lie in (0, 1], got {}",
                self.stepper.cfl_safety
            ));
        }
        if self.stepper.sample_every == 0 {
            violations.push("stepper.sample_every must be at least 1".into());
        }

        if !(self.fluid.mu > 0.0) {
            violations.push(format!("fluid.mu must be positive, got {}", self.fluid.mu));
        }
        if !(self.fluid.lambda >= 0.0) {
            violations.push(format!(
                "fluid.lambda must be nonnegative, got {}",
                self.fluid.lambda
            ));
        }
        if !(self.fluid.kappa > 0.0) {
            violations.push(format!(
                "fluid.kappa must be positive, got {}",
                self.fluid.kappa
            ));
        }
        if !(self.fluid.cv > 0.0) {
            violations.push(format!("fluid.cv must be positive, got {}", self.fluid.cv));
        }
        let potential_regularity = match self.fluid.potential_regularity.as_str() {
            "w1q" => PotentialRegularity::W1q,
            "w2q" => PotentialRegularity::W2q,
            other => {
                violations.push(format!(
                    "fluid.potential_regularity must be \"w1q\" or \"w2q\", got \"{other}\""
                ));
                PotentialRegularity::W2q
            }
        };

        if !violations.is_empty() {
            return Err(NsfError::ConfigRejected(violations));
        }
        let (rho0_e, theta0_e, theta_b_e, q_b_e, potential_e) = (
            rho0_e.unwrap(),
            theta0_e.unwrap(),
            theta_b_e.unwrap(),
            q_b_e.unwrap(),
            potential_e.unwrap(),
        );
        let u0_e: Vec<Expr> = u0_e.into_iter().map(Option::unwrap).collect();
        let u_b_e: Vec<Expr> = u_b_e.into_iter().map(Option::unwrap).collect();

        // Provisional grid to locate wall nodes; the zero-flux declaration
        // is asserted optimistically, verified against the flux expression,
        // and the grid rebuilt with the truthful value.
        let grid = Arc::new(Grid::build(
            dim,
            &self.grid.extents,
            &self.grid.counts,
            &boundary_map,
            &topology,
            true,
        )?);
        let q_b = ScalarField::from_fn(grid.clone(), |x| q_b_e.eval(x));
        let zero_flux = grid
            .neumann_faces()
            .iter()
            .all(|&f| grid.face_nodes(f).iter().all(|&n| q_b.values()[n] == 0.0));
        if grid.gamma_d_is_empty() && !grid.neumann_faces().is_empty() && !zero_flux {
            violations.push(
                "no temperature anchor: every wall is flux-type yet q_b is not \
                 identically zero; prescribe a temperature on at least one wall \
                 or set q_b = 0"
                    .into(),
            );
            return Err(NsfError::ConfigRejected(violations));
        }
        let grid = Arc::new(Grid::build(
            dim,
            &self.grid.extents,
            &self.grid.counts,
            &boundary_map,
            &topology,
            zero_flux,
        )?);

        let rho0 = ScalarField::from_fn(grid.clone(), |x| rho0_e.eval(x));
        let theta0 = ScalarField::from_fn(grid.clone(), |x| theta0_e.eval(x));
        let u0 = VectorField::from_fn(grid.clone(), |x| {
            let mut v = [0.0; MAX_DIM];
            for (a, e) in u0_e.iter().enumerate() {
                v[a] = e.eval(x);
            }
            v
        });
        let boundary = BoundaryData {
            velocity: VectorField::from_fn(grid.clone(), |x| {
                let mut v = [0.0; MAX_DIM];
                for (a, e) in u_b_e.iter().enumerate() {
                    v[a] = e.eval(x);
                }
                v
            }),
            temperature: ScalarField::from_fn(grid.clone(), |x| theta_b_e.eval(x)),
            heat_flux: ScalarField::from_fn(grid.clone(), |x| q_b_e.eval(x)),
        };

        // Pointwise hypothesis checks on the assembled data.
        if rho0.min() <= 0.0 {
            violations.push(format!(
                "non-positive initial density: min rho0 = {}",
                rho0.min()
            ));
        }
        if theta0.min() <= 0.0 {
            violations.push(format!(
                "non-positive initial temperature: min theta0 = {}",
                theta0.min()
            ));
        }
        if let Some(tb_min) = boundary.min_dirichlet_temperature(&grid) {
            if tb_min <= 0.0 {
                violations.push(format!(
                    "non-positive boundary temperature: min theta_b = {tb_min} on the \
                     prescribed-temperature walls"
                ));
            }
        }
        if let Some(qb_min) = boundary.min_heat_flux(&grid) {
            if qb_min < 0.0 {
                violations.push(format!(
                    "negative wall heat influx: min q_b = {qb_min} (must be nonnegative)"
                ));
            }
        }
        let normal = boundary.max_normal_velocity();
        if normal != 0.0 {
            violations.push(format!(
                "non-tangential wall velocity: max |u_b . n| = {normal} (walls are impermeable)"
            ));
        }
        let threshold = match &self.monitor.threshold {
            ThresholdSpec::Number(m) => {
                if !(m.is_finite() && *m > 0.0) {
                    violations.push(format!("monitor.threshold must be positive, got {m}"));
                }
                Some(*m)
            }
            ThresholdSpec::Word(w) if w == "auto" => None,
            ThresholdSpec::Word(w) => {
                violations.push(format!(
                    "monitor.threshold must be a number or \"auto\", got \"{w}\""
                ));
                None
            }
        };
        let stop_on_hit = match self.monitor.on_hit.as_deref() {
            None | Some("stop") => true,
            Some("continue") => false,
            Some(other) => {
                violations.push(format!(
                    "monitor.on_hit must be \"stop\" or \"continue\", got \"{other}\""
                ));
                true
            }
        };

        let mms_family = self.mms.as_ref().map(|b| b.family());
        if self.mode == Mode::MmsVerify && self.mms.is_none() {
            violations.push("mode = \"mms_verify\" requires an [mms] block".into());
        }

        if !violations.is_empty() {
            return Err(NsfError::ConfigRejected(violations));
        }

        let params = FluidParams {
            mu: self.fluid.mu,
            lambda: self.fluid.lambda,
            kappa: self.fluid.kappa,
            cv: self.fluid.cv,
            potential: ScalarField::from_fn(grid.clone(), |x| potential_e.eval(x)),
            potential_regularity,
        };
        params.validate()?;
        if let Some(fam) = &mms_family {
            fam.check_compatible(&grid, &params)?;
        }

        let defaults = MonitorConfig::default();
        let monitor = MonitorConfig {
            threshold,
            p,
            q,
            min_principle_tol: self
                .monitor
                .min_principle_tol
                .unwrap_or(defaults.min_principle_tol),
            blowup_amplitude: self
                .monitor
                .blowup_amplitude
                .unwrap_or(defaults.blowup_amplitude),
            blowup_growth: self.monitor.blowup_growth.unwrap_or(defaults.blowup_growth),
            blowup_window: self.monitor.blowup_window.unwrap_or(defaults.blowup_window),
        };
        let stepper = StepperConfig {
            dt: self.stepper.dt,
            t_end: self.stepper.t_end,
            cfl_safety: self.stepper.cfl_safety,
            p,
            q,
            sample_every: self.stepper.sample_every,
            mms: mms_family,
        };
        stepper.validate()?;

        let initial = State {
            t: 0.0,
            rho: rho0,
            theta: theta0,
            u: u0,
        };
        initial.validate()?;

        Ok(RunSetup {
            mode: self.mode,
            grid,
            params,
            boundary,
            initial,
            stepper,
            monitor,
            output: self.output.clone(),
            stop_on_hit,
            mms: self.mms.clone(),
        })
    }

    fn parse_topology(&self) -> Result<Vec<Topology>> {
        if self.grid.topology.len() != self.grid.dim {
            return Err(NsfError::ConfigRejected(vec![format!(
                "grid.topology must list {} entries, got {}",
                self.grid.dim,
                self.grid.topology.len()
            )]));
        }
        self.grid
            .topology
            .iter()
            .map(|s| match s.as_str() {
                "periodic" => Ok(Topology::Periodic),
                "walled" => Ok(Topology::Walled),
                other => Err(NsfError::ConfigRejected(vec![format!(
                    "grid.topology entries must be \"periodic\" or \"walled\", got \"{other}\""
                )])),
            })
            .collect()
    }

    fn parse_boundary_map(&self, topology: &[Topology]) -> Result<Vec<[Option<TempBc>; 2]>> {
        if self.grid.temperature_bc.len() != self.grid.dim {
            return Err(NsfError::ConfigRejected(vec![format!(
                "grid.temperature_bc must list {} axis pairs, got {}",
                self.grid.dim,
                self.grid.temperature_bc.len()
            )]));
        }
        let mut map = Vec::with_capacity(self.grid.dim);
        for (axis, pair) in self.grid.temperature_bc.iter().enumerate() {
            let mut out = [None; 2];
            for (side, s) in pair.iter().enumerate() {
                out[side] = match (s.as_str(), topology[axis]) {
                    ("none", Topology::Periodic) => None,
                    ("dirichlet", Topology::Walled) => Some(TempBc::Dirichlet),
                    ("neumann", Topology::Walled) => Some(TempBc::Neumann),
                    (other, Topology::Periodic) => {
                        return Err(NsfError::ConfigRejected(vec![format!(
                            "axis {axis} is periodic; temperature_bc must be \"none\", \
                             got \"{other}\""
                        )]))
                    }
                    (other, Topology::Walled) => {
                        return Err(NsfError::ConfigRejected(vec![format!(
                            "axis {axis} is walled; temperature_bc must be \"dirichlet\" \
                             or \"neumann\", got \"{other}\""
                        )]))
                    }
                };
            }
            map.push(out);
        }
        Ok(map)
    }
}
