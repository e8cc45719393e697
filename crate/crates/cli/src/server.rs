//! HTTP API used by the playbook editor.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use strider_core::geom::Pose2;
use strider_core::kick::{Scenario, ValueGrid};
use tokio::sync::watch;

use crate::commands::{self, Evaluation, WalkPreview};
use crate::config::{StrategyConfig, Suite, SuiteConfig};
use crate::error::CliError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: CliError,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            error: CliError::input(code, message),
        }
    }
}

impl From<CliError> for ApiError {
    fn from(error: CliError) -> Self {
        let status = match error.code {
            "grid_not_ready" | "geometry_mismatch" => StatusCode::CONFLICT,
            "not_found" => StatusCode::NOT_FOUND,
            "io_error" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self { status, error }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.error)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

#[derive(Debug, Clone)]
pub enum GridState {
    Building,
    Ready(Arc<ValueGrid>),
    Failed(CliError),
}

/// Configuration and value grid as seen by one request.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Bumped whenever a configuration change invalidates the grid.
    pub generation: u64,
    pub suite: Arc<Suite>,
    pub grid: GridState,
}

struct Inner {
    snapshot: RwLock<Arc<Snapshot>>,
    /// Directory that relative paths in the configuration resolve against.
    base: PathBuf,
    built: watch::Sender<u64>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Starts the service state. Without a precomputed `grid` one is built in
    /// the background, so this must run inside a tokio runtime.
    pub fn new(suite: Suite, base: &Path, grid: Option<ValueGrid>) -> Self {
        let needs_build = grid.is_none();
        let snapshot = Snapshot {
            generation: 0,
            suite: Arc::new(suite),
            grid: grid.map_or(GridState::Building, |g| GridState::Ready(Arc::new(g))),
        };
        let (built, _) = watch::channel(0);
        let state = Self {
            inner: Arc::new(Inner {
                snapshot: RwLock::new(Arc::new(snapshot)),
                base: base.to_path_buf(),
                built,
            }),
        };
        if needs_build {
            state.spawn_build(0);
        }
        state
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.inner.snapshot.read().expect("state lock").clone()
    }

    fn spawn_build(&self, generation: u64) {
        let suite = self.snapshot().suite.clone();
        let state = self.clone();
        tokio::spawn(async move {
            let result = tokio::task::spawn_blocking(move || commands::build_grid(&suite)).await;
            let grid = match result {
                Ok(Ok(g)) => GridState::Ready(Arc::new(g)),
                Ok(Err(e)) => GridState::Failed(e),
                Err(e) => GridState::Failed(CliError::input("internal", e.to_string())),
            };
            let mut lock = state.inner.snapshot.write().expect("state lock");
            // A newer configuration has its own build in flight.
            if lock.generation != generation {
                return;
            }
            *lock = Arc::new(Snapshot {
                grid,
                ..(**lock).clone()
            });
            drop(lock);
            state.inner.built.send_replace(generation + 1);
        });
    }

    /// Waits until the grid of the current generation is built or failed.
    pub async fn wait_for_grid(&self) {
        let mut rx = self.inner.built.subscribe();
        loop {
            if !matches!(self.snapshot().grid, GridState::Building) {
                return;
            }
            if rx.changed().await.is_err() {
                return;
            }
        }
    }

    /// Replaces the configuration. The grid is rebuilt only when a field
    /// that enters value iteration changed.
    fn replace_config(&self, config: SuiteConfig) -> ApiResult<Arc<Snapshot>> {
        let suite = Suite::from_config(config, &self.inner.base).map_err(|e| ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            error: CliError::input("invalid_config", e.message),
        })?;
        let mut lock = self.inner.snapshot.write().expect("state lock");
        let old = &lock.suite.config;
        let new = &suite.config;
        let rebuild =
            old.field != new.field || old.templates != new.templates || !old.strategy.same_baseline(&new.strategy);
        let next = Snapshot {
            generation: lock.generation + u64::from(rebuild),
            suite: Arc::new(suite),
            grid: if rebuild { GridState::Building } else { lock.grid.clone() },
        };
        let next = Arc::new(next);
        *lock = next.clone();
        drop(lock);
        if rebuild {
            self.spawn_build(next.generation);
        }
        Ok(next)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/status", get(status))
        .route("/api/config", get(get_config).put(put_config))
        .route("/api/value-grid", get(value_grid))
        .route("/api/evaluate", axum::routing::post(evaluate))
        .route("/api/plan-walk", axum::routing::post(plan_walk))
        .route("/api/scenarios", get(list_scenarios).post(save_scenario))
        .route("/api/scenarios/{name}", get(get_scenario))
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Status {
    pub generation: u64,
    /// `building`, `ready` or `failed`.
    pub grid: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<CliError>,
}

async fn status(State(state): State<AppState>) -> Json<Status> {
    let s = state.snapshot();
    let (grid, converged, error) = match &s.grid {
        GridState::Building => ("building", None, None),
        GridState::Ready(g) => ("ready", Some(g.converged), None),
        GridState::Failed(e) => ("failed", None, Some(e.clone())),
    };
    Json(Status {
        generation: s.generation,
        grid: grid.into(),
        converged,
        error,
    })
}

async fn get_config(State(state): State<AppState>) -> Json<StrategyConfig> {
    Json(state.snapshot().suite.config.strategy_config())
}

/// Applies `patch` onto `target` as a JSON merge patch.
fn merge(target: &mut serde_json::Value, patch: serde_json::Value) {
    use serde_json::Value;
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    t.remove(&k);
                } else {
                    merge(t.entry(k).or_insert(Value::Null), v);
                }
            }
        }
        (t, p) => *t = p,
    }
}

async fn put_config(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<StrategyConfig>> {
    let patch: serde_json::Value = parse_body(&body)?;
    if !patch.is_object() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "expected a JSON object"));
    }
    let current = state.snapshot().suite.config.clone();
    let mut merged = serde_json::to_value(current.strategy_config()).expect("config serializes");
    merge(&mut merged, patch);
    let update = StrategyConfig::from_json(merged).map_err(|e| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        error: CliError::input("invalid_config", e.message),
    })?;
    let next = state.replace_config(current.with_strategy(update))?;
    Ok(Json(next.suite.config.strategy_config()))
}

fn ready_grid(s: &Snapshot) -> ApiResult<Arc<ValueGrid>> {
    match &s.grid {
        GridState::Ready(g) => Ok(g.clone()),
        GridState::Building => Err(ApiError::new(
            StatusCode::CONFLICT,
            "grid_not_ready",
            "the value grid is still being computed",
        )),
        GridState::Failed(e) => Err(ApiError {
            status: StatusCode::CONFLICT,
            error: CliError::input("grid_not_ready", format!("value grid build failed: {}", e.message)),
        }),
    }
}

async fn value_grid(State(state): State<AppState>) -> ApiResult<Json<ValueGrid>> {
    let grid = ready_grid(&state.snapshot())?;
    Ok(Json((*grid).clone()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, CliError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn evaluate(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Evaluation>> {
    let scenario: Scenario = parse_body(&body)?;
    let snap = state.snapshot();
    let grid = ready_grid(&snap)?;
    let out = blocking(move || commands::evaluate(&snap.suite, &grid, &scenario)).await?;
    Ok(Json(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanWalkRequest {
    /// `[x, y, theta]` of the robot center.
    pub start: [f64; 3],
    pub target: [f64; 3],
}

async fn plan_walk(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<WalkPreview>> {
    let req: PlanWalkRequest = parse_body(&body)?;
    if req.start.iter().chain(&req.target).any(|v| !v.is_finite()) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "bad_request",
            "poses must be finite",
        ));
    }
    let snap = state.snapshot();
    let pose = |p: [f64; 3]| Pose2::new(p[0], p[1], p[2]);
    let out = blocking(move || commands::preview_walk(&snap.suite, &pose(req.start), &pose(req.target))).await?;
    Ok(Json(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedScenario {
    pub name: String,
    pub scenario: Scenario,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn scenario_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.json"))
}

/// Reads every `*.json` scenario in `dir`, sorted by name. Files that do not
/// parse are skipped.
pub fn read_playbook(dir: &Path) -> Result<Vec<SavedScenario>, CliError> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CliError::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        if let Ok(s) = serde_json::from_str::<SavedScenario>(&text) {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

async fn list_scenarios(State(state): State<AppState>) -> ApiResult<Json<Vec<SavedScenario>>> {
    let dir = state.snapshot().suite.playbook_dir.clone();
    Ok(Json(blocking(move || read_playbook(&dir)).await?))
}

async fn get_scenario(State(state): State<AppState>, UrlPath(name): UrlPath<String>) -> ApiResult<Json<SavedScenario>> {
    if !valid_name(&name) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_name", "names use letters, digits, `_` and `-`"));
    }
    let path = scenario_path(&state.snapshot().suite.playbook_dir, &name);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no scenario `{name}`")))
        }
        Err(e) => return Err(CliError::io(&path, e).into()),
    };
    let saved: SavedScenario = serde_json::from_str(&text)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "bad_scenario", e.to_string()))?;
    Ok(Json(saved))
}

async fn save_scenario(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<SavedScenario>)> {
    let saved: SavedScenario = parse_body(&body)?;
    if !valid_name(&saved.name) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_name", "names use letters, digits, `_` and `-`"));
    }
    let snap = state.snapshot();
    saved
        .scenario
        .validate(&snap.suite.config.field)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_scenario", e.to_string()))?;
    let dir = snap.suite.playbook_dir.clone();
    let text = commands::to_pretty_json(&saved);
    let path = scenario_path(&dir, &saved.name);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok((StatusCode::CREATED, Json(saved)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_patch_semantics() {
        let mut v = json!({"a": {"b": 1, "c": 2}, "d": 3});
        merge(&mut v, json!({"a": {"b": 5, "c": null}, "e": 4}));
        assert_eq!(v, json!({"a": {"b": 5}, "d": 3, "e": 4}));
    }

    #[test]
    fn scenario_names() {
        assert!(valid_name("open-goal_2"));
        assert!(!valid_name("../x"));
        assert!(!valid_name(""));
        assert!(!valid_name("a b"));
    }
}
