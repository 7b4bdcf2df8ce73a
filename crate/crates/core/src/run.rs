//! Configuration-driven runs and their output files.
//!
//! An output directory receives
//!
//! * `diagnostics.csv`: one [`DiagnosticsRecord`] per cadence tick,
//! * `snapshots/state_<step>.json`: full states with flat numeric arrays,
//! * `metadata.json`: configuration echo, version, wall time and status,
//! * `failure.json`: only when the run aborted,
//! * `picard.json` (picard mode) or `study.json` / `study.csv` (convergence
//!   study).

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Mode, RunConfig};
use crate::diagnostics::{energy, record, transport_check, DiagnosticsRecord};
use crate::dynamics::initial::{generate_curve, generate_velocity};
use crate::dynamics::{
    frame_tangent, picard_coupled, prepare_initial, CoupledPicardOptions, InitialData, PicardReport, Stepper,
};
use crate::error::{Result, WireError};
use crate::fields::{m0, CurveState, Grid};
use crate::study::{convergence_study, StudyReport};

/// Why a run stopped early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub time: f64,
    /// Bentness at the abort, for near-geodesic failures.
    pub bentness: Option<f64>,
    pub last_record: Option<DiagnosticsRecord>,
}

impl Failure {
    pub fn new(err: &WireError, time: f64, last_record: Option<DiagnosticsRecord>) -> Self {
        let bentness = match err {
            WireError::NearGeodesic { bentness, .. } => Some(*bentness),
            _ => None,
        };
        Self { kind: err.kind().into(), message: err.to_string(), time, bentness, last_record }
    }
}

/// Stepper, admissible initial data and the time grid of a run.
#[derive(Clone, Debug)]
pub struct Setup {
    pub stepper: Stepper,
    pub initial: InitialData,
    pub dt: f64,
    pub steps: usize,
}

pub fn setup(config: &RunConfig) -> Result<Setup> {
    let grid = Grid::with_stencil(config.grid.n, config.grid.stencil)?;
    let model = &config.manifold;
    let curve = generate_curve(model, &config.initial.curve, grid.n_points)?;
    let eta = generate_velocity(&grid, model, &config.initial.velocity, &curve, config.seed)?;
    let initial = prepare_initial(&grid, model, &curve.gamma, &curve.winding, &eta)?;
    let mut stepper = Stepper::new(model.clone(), grid);
    stepper.elliptic = config.elliptic_options();
    stepper.renormalize = config.renormalize;
    let nominal = config.dt.resolve(&grid);
    let steps = ((config.horizon / nominal) - 1e-9).ceil().max(1.0) as usize;
    Ok(Setup { stepper, initial, dt: config.horizon / steps as f64, steps })
}

/// Result of a marching run, complete or aborted.
#[derive(Clone, Debug)]
pub struct MarchSummary {
    pub records: Vec<DiagnosticsRecord>,
    pub initial: CurveState,
    pub last: CurveState,
    pub steps_done: usize,
    pub dt: f64,
    /// `max_t m_0(γ(t) - γ(0))` in chart coordinates.
    pub max_displacement: f64,
    /// `max_t |Ē(t) - Ē(0)| / Ē(0)`.
    pub energy_drift: f64,
    /// `max_t max_x |‖ξ‖² - 1|`.
    pub constraint_drift: f64,
    /// `max_t m_0(h⁻¹γ_x - ξ)`.
    pub gamma_xi_drift: f64,
    pub failure: Option<Failure>,
}

struct Tracker {
    e0: f64,
    summary: MarchSummary,
}

impl Tracker {
    fn observe(&mut self, stepper: &Stepper, state: &CurveState) -> Result<()> {
        let geo = stepper.geometry(state)?;
        let e = energy(&stepper.grid, state, &geo)?.total();
        let s = &mut self.summary;
        s.energy_drift = s.energy_drift.max((e - self.e0).abs() / self.e0.abs().max(f64::MIN_POSITIVE));
        s.constraint_drift = s.constraint_drift.max(state.constraint_drift());
        s.max_displacement = s.max_displacement.max(m0(&state.gamma.sub(&s.initial.gamma)));
        s.gamma_xi_drift = s.gamma_xi_drift.max(m0(&frame_tangent(&stepper.grid, state, &geo).sub(&state.xi)));
        Ok(())
    }
}

/// Marches the coupled system from the prepared initial data. `snapshot`
/// is called with the step index for every state selected by the snapshot
/// cadence, the first and the last.
pub fn march(
    config: &RunConfig,
    setup: &Setup,
    snapshot: &mut dyn FnMut(usize, &CurveState) -> Result<()>,
) -> MarchSummary {
    let stepper = &setup.stepper;
    let dt = setup.dt;
    let start = setup.initial.to_state();
    let e0 = stepper.geometry(&start).and_then(|g| energy(&stepper.grid, &start, &g)).map(|e| e.total());
    let mut tracker = Tracker {
        e0: *e0.as_ref().unwrap_or(&1.0),
        summary: MarchSummary {
            records: Vec::new(),
            initial: start.clone(),
            last: start.clone(),
            steps_done: 0,
            dt,
            max_displacement: 0.0,
            energy_drift: 0.0,
            constraint_drift: 0.0,
            gamma_xi_drift: 0.0,
            failure: None,
        },
    };
    let fail = |t: &mut Tracker, err: &WireError, time: f64| {
        let last = t.summary.records.last().cloned();
        t.summary.failure = Some(Failure::new(err, time, last));
    };
    if let Err(e) = e0 {
        fail(&mut tracker, &e, start.time);
        return tracker.summary;
    }
    // near-geodesic data is rejected before anything else
    let mut curr = match stepper.with_theta(&start) {
        Ok(s) => s,
        Err(e) => {
            fail(&mut tracker, &e, start.time);
            return tracker.summary;
        }
    };
    let every = config.diagnostics.every.max(1);
    let bentness_every = config.diagnostics.bentness_every;
    let snap_every = config.output.snapshot_every;
    let aligned = (dt - stepper.grid.dx).abs() <= 1e-12 * stepper.grid.dx;
    let mut prev: Option<CurveState> = None;
    let tick = |i: usize| i.is_multiple_of(every);
    let bent = |i: usize| bentness_every > 0 && i.is_multiple_of(bentness_every);

    if let Err(e) = tracker.observe(stepper, &curr).and_then(|_| snapshot(0, &curr)) {
        fail(&mut tracker, &e, curr.time);
        return tracker.summary;
    }
    for i in 0..setup.steps {
        let next = match stepper.step(&curr, dt) {
            Ok(s) => s,
            Err(e) => {
                if tick(i) {
                    if let Ok(r) = record(stepper, &curr, bent(i), None) {
                        tracker.summary.records.push(r);
                    }
                }
                fail(&mut tracker, &e, curr.time);
                return tracker.summary;
            }
        };
        let outcome = (|| -> Result<()> {
            if tick(i) {
                let transport = match (&prev, aligned) {
                    (Some(p), true) => Some(transport_check(stepper, &[p.clone(), curr.clone(), next.clone()], dt)?),
                    _ => None,
                };
                tracker.summary.records.push(record(stepper, &curr, bent(i), transport)?);
            }
            tracker.observe(stepper, &next)?;
            let last = i + 1 == setup.steps;
            if last || (snap_every > 0 && (i + 1) % snap_every == 0) {
                snapshot(i + 1, &next)?;
            }
            let drift = next.constraint_drift();
            if drift > config.tolerances.constraint {
                return Err(WireError::ConstraintViolation { drift, tolerance: config.tolerances.constraint });
            }
            Ok(())
        })();
        tracker.summary.steps_done = i + 1;
        tracker.summary.last = next.clone();
        prev = Some(std::mem::replace(&mut curr, next));
        if let Err(e) = outcome {
            fail(&mut tracker, &e, curr.time);
            return tracker.summary;
        }
    }
    match record(stepper, &curr, bentness_every > 0, None) {
        Ok(r) => tracker.summary.records.push(r),
        Err(e) => fail(&mut tracker, &e, curr.time),
    }
    tracker.summary
}

/// Result of a picard-mode run.
#[derive(Clone, Debug)]
pub struct PicardSummary {
    pub records: Vec<DiagnosticsRecord>,
    pub states: Vec<CurveState>,
    pub report: Option<PicardReport>,
    pub failure: Option<Failure>,
}

/// Builds the window trajectory by the coupled fixed-point iteration.
pub fn picard(config: &RunConfig, setup: &Setup) -> PicardSummary {
    let stepper = &setup.stepper;
    let start = setup.initial.to_state();
    let opts = CoupledPicardOptions {
        window_steps: config.picard.window_steps,
        max_iter: config.picard.max_iter,
        tol: config.tolerances.picard,
    };
    let mut out = PicardSummary { records: Vec::new(), states: vec![start.clone()], report: None, failure: None };
    let (traj, report) = match picard_coupled(stepper, &start, &opts) {
        Ok(r) => r,
        Err(e) => {
            let err_ratios = match &e {
                WireError::WindowTooLarge { ratios } => ratios.clone(),
                _ => Vec::new(),
            };
            out.report = Some(PicardReport { distances: Vec::new(), ratios: err_ratios, converged: false });
            out.failure = Some(Failure::new(&e, start.time, None));
            return out;
        }
    };
    let every = config.diagnostics.every.max(1);
    let states = traj.states;
    for j in (0..states.len()).filter(|j| j % every == 0) {
        let transport = if j > 0 && j + 1 < states.len() {
            transport_check(stepper, &states[j - 1..=j + 1], traj.dt).ok()
        } else {
            None
        };
        let bent = config.diagnostics.bentness_every > 0 && j % config.diagnostics.bentness_every == 0;
        match record(stepper, &states[j], bent, transport) {
            Ok(r) => out.records.push(r),
            Err(e) => {
                out.failure = Some(Failure::new(&e, states[j].time, out.records.last().cloned()));
                break;
            }
        }
    }
    if !report.converged && out.failure.is_none() {
        let e = WireError::WindowTooLarge { ratios: report.ratios.clone() };
        let mut f = Failure::new(&e, start.time, out.records.last().cloned());
        f.message = format!("no convergence within {} iterations", config.picard.max_iter);
        out.failure = Some(f);
    }
    out.states = states;
    out.report = Some(report);
    out
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| WireError::Io(e.into()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// JSON object with the state fields as flat arrays.
pub fn snapshot_json(step: usize, state: &CurveState) -> serde_json::Value {
    json!({
        "step": step,
        "time": state.time,
        "n_points": state.n_points(),
        "dim": state.dim(),
        "winding": state.winding,
        "gamma": state.gamma.values,
        "xi": state.xi.values,
        "xi_t": state.xi_t.values,
        "eta": state.eta.values,
        "theta": state.theta.as_ref().map(|t| &t.values),
    })
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    if records.is_empty() {
        w.write_record(DiagnosticsRecord::HEADER).map_err(csv_error)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> WireError {
    WireError::Io(std::io::Error::other(e))
}

/// Final state of [`execute`].
#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    Aborted(Failure),
}

/// Runs `config` and writes every output file into `out`. Errors are
/// returned only for I/O problems; numerical aborts are reported through
/// [`RunStatus::Aborted`] after the partial outputs are written.
pub fn execute(config: &RunConfig, out: &Path, quiet: bool) -> Result<RunStatus> {
    fs::create_dir_all(out)?;
    let clock = Instant::now();
    let mut meta = json!({
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "mode": config.mode,
    });
    let failure = match config.mode {
        Mode::ConvergenceStudy => {
            let report = convergence_study(config);
            write_study(out, &report)?;
            if !quiet {
                for line in report.summary_lines() {
                    eprintln!("{line}");
                }
            }
            meta["levels"] = json!(report.levels.iter().map(|l| l.n).collect::<Vec<_>>());
            report.levels.iter().find_map(|l| l.failure.clone())
        }
        Mode::March | Mode::Picard => match setup(config) {
            Err(e) => Some(Failure::new(&e, 0.0, None)),
            Ok(s) => {
                meta["dt"] = json!(s.dt);
                let snap_dir = out.join("snapshots");
                fs::create_dir_all(&snap_dir)?;
                let mut snap = |step: usize, state: &CurveState| -> Result<()> {
                    write_json(&snap_dir.join(format!("state_{step:06}.json")), &snapshot_json(step, state))
                };
                if config.mode == Mode::March {
                    let m = march(config, &s, &mut snap);
                    write_diagnostics(&out.join("diagnostics.csv"), &m.records)?;
                    meta["steps"] = json!(m.steps_done);
                    meta["summary"] = json!({
                        "energy_drift": m.energy_drift,
                        "constraint_drift": m.constraint_drift,
                        "max_displacement": m.max_displacement,
                        "gamma_xi_drift": m.gamma_xi_drift,
                    });
                    if !quiet {
                        eprintln!(
                            "march: {} steps of dt = {:.3e}, energy drift {:.3e}, constraint drift {:.3e}",
                            m.steps_done, s.dt, m.energy_drift, m.constraint_drift
                        );
                    }
                    m.failure
                } else {
                    let p = picard(config, &s);
                    write_diagnostics(&out.join("diagnostics.csv"), &p.records)?;
                    if let (Some(first), Some(last)) = (p.states.first(), p.states.last()) {
                        snap(0, first)?;
                        snap(p.states.len() - 1, last)?;
                    }
                    write_json(&out.join("picard.json"), &p.report)?;
                    if !quiet {
                        if let Some(r) = &p.report {
                            eprintln!("picard: {} iterations, ratios {:?}", r.distances.len(), r.ratios);
                        }
                    }
                    p.failure
                }
            }
        },
    };
    meta["wall_time_seconds"] = json!(clock.elapsed().as_secs_f64());
    meta["status"] = json!(if failure.is_some() { "aborted" } else { "completed" });
    meta["failure"] = json!(failure);
    write_json(&out.join("metadata.json"), &meta)?;
    match failure {
        Some(f) => {
            write_json(&out.join("failure.json"), &f)?;
            if !quiet {
                eprintln!("aborted at t = {}: {}", f.time, f.message);
            }
            Ok(RunStatus::Aborted(f))
        }
        None => Ok(RunStatus::Completed),
    }
}

fn write_study(out: &Path, report: &StudyReport) -> Result<()> {
    write_json(&out.join("study.json"), report)?;
    let mut w = csv::Writer::from_path(out.join("study.csv")).map_err(csv_error)?;
    w.write_record(["n", "dt", "energy_drift", "constraint_drift", "gamma_xi_drift", "max_displacement", "status"])
        .map_err(csv_error)?;
    for l in &report.levels {
        w.write_record([
            l.n.to_string(),
            l.dt.to_string(),
            l.energy_drift.to_string(),
            l.constraint_drift.to_string(),
            l.gamma_xi_drift.to_string(),
            l.max_displacement.to_string(),
            l.failure.as_ref().map_or("completed".into(), |f| f.kind.clone()),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use std::f64::consts::PI;

    fn config(extra: &str) -> RunConfig {
        let text = format!(
            r#"{{"manifold": {{"name": "euclidean", "dim": 2}}, "grid": {{"n": 32}},
                "initial": {{"curve": {{"name": "circle"}}}}{extra}}}"#
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn rest_circle_march_keeps_energy() {
        let c = config(r#", "horizon": 0.25"#);
        let s = setup(&c).unwrap();
        assert_eq!(s.steps, 8);
        let mut snaps = Vec::new();
        let m = march(&c, &s, &mut |i, _| {
            snaps.push(i);
            Ok(())
        });
        assert!(m.failure.is_none());
        assert_eq!(snaps, [0, 8]);
        assert_eq!(m.records.len(), 9);
        assert!(m.records.windows(2).all(|w| w[1].time > w[0].time));
        assert!((m.records[0].energy - 4.0 * PI * PI).abs() < 1e-4);
        for r in &m.records {
            assert!((r.energy - m.records[0].energy).abs() < 1e-10, "{}", r.energy);
        }
        assert!(m.records[1].transport_residual.is_some());
        assert!(m.records[0].bentness.is_some() && m.records[1].bentness.is_none());
    }

    #[test]
    fn geodesic_aborts_immediately() {
        let text = r#"{"manifold": {"name": "flat_torus", "periods": [1.0, 1.0]}, "grid": {"n": 16},
            "initial": {"curve": {"name": "torus_geodesic", "direction": [1.0, 0.0]}}}"#;
        let c = parse_config(text).unwrap();
        let m = march(&c, &setup(&c).unwrap(), &mut |_, _| Ok(()));
        let f = m.failure.unwrap();
        assert_eq!(f.kind, "near_geodesic");
        assert!(f.bentness.unwrap() < 1e-10);
        assert_eq!(m.steps_done, 0);
    }

    #[test]
    fn uneven_horizon_shrinks_the_step() {
        let c = config(r#", "horizon": 0.1"#);
        let s = setup(&c).unwrap();
        assert_eq!(s.steps, 4);
        assert!((s.dt * 4.0 - 0.1).abs() < 1e-15 && s.dt <= 1.0 / 32.0);
    }

    #[test]
    fn picard_mode_on_rest_circle() {
        let c = config(r#", "mode": "picard", "picard": {"window_steps": 4}"#);
        let p = picard(&c, &setup(&c).unwrap());
        assert!(p.failure.is_none(), "{:?}", p.failure);
        assert_eq!(p.states.len(), 5);
        assert_eq!(p.records.len(), 5);
        let r = p.report.unwrap();
        assert!(r.converged);
        // the rest circle is a fixed point up to the quadrature error of the wave integral
        assert!(r.distances[0] < 0.1, "{:?}", r.distances);
    }
}
