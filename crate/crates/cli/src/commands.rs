//! The work behind each subcommand, shared with the HTTP service.

use std::path::Path;

use serde::{Deserialize, Serialize};
use strider_core::error::StrategyError;
use strider_core::footsteps::{estimate_step_count_with, plan_to_json, FootstepError, FootstepState};
use strider_core::geom::Pose2;
use strider_core::kick::{
    evaluate_actions, sample_outcomes, select_with_footsteps, value_iteration, RankedAction, Scenario, ValueGrid,
};
use strider_core::walk::{self, com_csv, PipelineError};

use crate::config::Suite;
use crate::error::CliError;

/// Parses `x,y,theta`.
pub fn parse_pose(text: &str) -> Result<Pose2, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,theta, got `{text}`"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("`{p}`: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(Pose2::new(v[0], v[1], v[2]))
}

fn pipeline_error(e: PipelineError) -> CliError {
    let code = match &e {
        PipelineError::Footsteps(FootstepError::InvalidParams(_)) => return CliError::input("bad_config", e.to_string()),
        PipelineError::Footsteps(_) => "footsteps_infeasible",
        PipelineError::Walk(_) => "walk_infeasible",
        PipelineError::Ik(_) => "ik_infeasible",
    };
    CliError::infeasible(code, e.to_string())
}

fn strategy_error(e: StrategyError) -> CliError {
    let code = match e {
        StrategyError::GeometryMismatch => "geometry_mismatch",
        StrategyError::EmptyGrid => "grid_not_ready",
        StrategyError::InvalidField(_) | StrategyError::InvalidParams(_) | StrategyError::NoTemplates => "bad_input",
        StrategyError::BadRobotIndex(_) => "bad_scenario",
    };
    CliError::input(code, e.to_string())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanWalkSummary {
    pub steps: usize,
    pub ticks: usize,
    pub duration: f64,
}

pub const PLAN_FILES: [&str; 4] = ["footsteps.json", "com_trajectory.csv", "joints.csv", "velocity_report.json"];

/// Runs the full walk pipeline and writes the four plan files into `out`.
pub fn plan_walk(suite: &Suite, start: &Pose2, target: &Pose2, out: &Path) -> Result<PlanWalkSummary, CliError> {
    let cfg = suite.config.walk_config();
    let result = walk::plan_walk(&suite.model, &suite.standing, start, target, &cfg).map_err(pipeline_error)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write(&out.join(PLAN_FILES[0]), &pretty(&plan_to_json(&result.footsteps)))?;
    write(&out.join(PLAN_FILES[1]), &com_csv(&result.ticks))?;
    write(&out.join(PLAN_FILES[2]), &result.joints.to_csv())?;
    write(&out.join(PLAN_FILES[3]), &pretty(&result.report))?;
    Ok(PlanWalkSummary {
        steps: result.footsteps.len(),
        ticks: result.joints.times.len(),
        duration: result.joints.times.last().copied().unwrap_or(0.0),
    })
}

/// Footsteps plus a CoM polyline sampled at the replanning period, without
/// whole-body tracking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPreview {
    pub footsteps: Vec<FootstepState>,
    pub com: Vec<[f64; 2]>,
}

pub fn preview_walk(suite: &Suite, start: &Pose2, target: &Pose2) -> Result<WalkPreview, CliError> {
    let cfg = suite.config.walk_config();
    let t = walk::plan_targets(&suite.model, &suite.standing, start, target, &cfg).map_err(pipeline_error)?;
    let every = ((cfg.walk.replan_period / cfg.walk.control_period).round() as usize).max(1);
    let mut com: Vec<[f64; 2]> = t
        .ticks
        .iter()
        .step_by(every)
        .map(|k| [k.com.position.x, k.com.position.y])
        .collect();
    if let Some(last) = t.ticks.last() {
        let p = [last.com.position.x, last.com.position.y];
        if com.last() != Some(&p) {
            com.push(p);
        }
    }
    Ok(WalkPreview {
        footsteps: t.footsteps,
        com,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub fn build_grid(suite: &Suite) -> Result<ValueGrid, CliError> {
    let c = &suite.config;
    value_iteration(&c.field, &c.templates, &c.strategy).map_err(strategy_error)
}

/// Runs value iteration and writes the grid to `out`. A grid that hit the
/// iteration cap is still written, then reported as an error.
pub fn value_grid(suite: &Suite, out: &Path) -> Result<GridSummary, CliError> {
    let grid = build_grid(suite)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write(out, &pretty(&grid))?;
    let summary = GridSummary {
        iterations: grid.iterations,
        residual: grid.residual,
        converged: grid.converged,
    };
    if !grid.converged {
        return Err(CliError::not_converged(format!(
            "value iteration stopped after {} sweeps with residual {}",
            grid.iterations, grid.residual
        )));
    }
    Ok(summary)
}

pub fn load_grid(path: &Path, suite: &Suite) -> Result<ValueGrid, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let grid: ValueGrid =
        serde_json::from_str(&text).map_err(|e| CliError::input("bad_grid", format!("{}: {e}", path.display())))?;
    grid.check_geometry(&suite.config.field).map_err(strategy_error)?;
    Ok(grid)
}

/// Parses a bare scenario or a saved playbook entry `{name, scenario}`.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let bad = |e: serde_json::Error| CliError::input("bad_scenario", e.to_string());
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
    if let Some(inner) = value.get_mut("scenario") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(bad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopAction {
    /// Position in `ranked`.
    pub rank: usize,
    pub steps: usize,
    /// Sampled ball destinations of this action.
    pub outcomes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub ranked: Vec<RankedAction>,
    pub top: Vec<TopAction>,
    pub chosen: usize,
    pub selection: RankedAction,
}

/// Ranks every kick, re-ranks the top fraction by footstep count and picks one.
pub fn evaluate(suite: &Suite, grid: &ValueGrid, scenario: &Scenario) -> Result<Evaluation, CliError> {
    let c = &suite.config;
    let ranked = evaluate_actions(scenario, grid, &c.field, &c.templates, &c.strategy).map_err(|e| match e {
        StrategyError::InvalidParams(m) => CliError::input("bad_scenario", m),
        e => strategy_error(e),
    })?;
    let estimate = |a: &Pose2, b: &Pose2| estimate_step_count_with(a, b, &c.steps, &c.policy);
    let sel = select_with_footsteps(&ranked, &scenario.robot_pose(), &c.strategy, &estimate).map_err(strategy_error)?;
    let top = sel
        .candidates
        .iter()
        .map(|cand| TopAction {
            rank: cand.rank,
            steps: cand.steps,
            outcomes: sample_outcomes(scenario, &ranked[cand.rank], &c.templates, &c.strategy),
        })
        .collect();
    Ok(Evaluation {
        selection: ranked[sel.chosen].clone(),
        chosen: sel.chosen,
        ranked,
        top,
    })
}

pub fn evaluate_files(suite: &Suite, grid: &Path, scenario: &Path) -> Result<Evaluation, CliError> {
    let grid = load_grid(grid, suite)?;
    let text = std::fs::read_to_string(scenario).map_err(|e| CliError::io(scenario, e))?;
    let scenario = parse_scenario(&text)?;
    evaluate(suite, &grid, &scenario)
}

pub fn to_pretty_json<T: Serialize>(v: &T) -> String {
    pretty(v)
}
