//! HTTP front end for the store, plus the periodic scheduler.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tower_http::services::ServeDir;

use crate::api::{
    ClaimRequest, ErrorJson, LeaseJson, ProblemDetail, ProblemSummary, RequestPackets, ResultRequest,
    ResultResponse, StatusJson,
};
use crate::config::CoordinatorConfig;
use crate::store::{latest_snapshot, ExperimentStore, StoreError, Submission};

pub struct AppState {
    pub store: ExperimentStore,
    pub nominal_ghz: f64,
}

fn error(code: StatusCode, msg: impl Into<String>) -> Response {
    (code, Json(ErrorJson { error: msg.into() })).into_response()
}

fn store_error(e: StoreError) -> Response {
    match e {
        StoreError::UnknownProblem(_) => error(StatusCode::NOT_FOUND, e.to_string()),
        StoreError::InvalidSubmission(_) | StoreError::InvalidRequest(_) => {
            error(StatusCode::BAD_REQUEST, e.to_string())
        }
        _ => {
            tracing::error!("store failure: {e}");
            error(StatusCode::SERVICE_UNAVAILABLE, e.to_string())
        }
    }
}

#[allow(clippy::result_large_err)]
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

async fn claim(State(s): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: ClaimRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match s.store.claim_packet(&req.worker_id, req.max_seconds) {
        Ok(Some(lease)) => {
            tracing::info!(worker = %req.worker_id, problem = lease.problem_id, packet = lease.packet_index, "leased");
            Json(LeaseJson::from(&lease)).into_response()
        }
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => store_error(e),
    }
}

async fn result(State(s): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: ResultRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let sub = Submission::from(req);
    match s.store.submit_result(&sub) {
        Ok(v) => {
            tracing::info!(worker = %sub.worker_id, problem = sub.problem_id, packet = sub.packet_index, verdict = v.as_str(), "result");
            Json(ResultResponse { status: v.as_str().into() }).into_response()
        }
        Err(e) => store_error(e),
    }
}

async fn problems(State(s): State<Arc<AppState>>) -> Json<Vec<ProblemSummary>> {
    Json(
        s.store
            .problems()
            .iter()
            .map(|(p, r, res)| ProblemSummary::new(p, r, res, s.nominal_ghz))
            .collect(),
    )
}

async fn problem(State(s): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match s.store.problem(id) {
        Some((p, r, res)) => Json(ProblemDetail::new(&p, &r, &res, s.nominal_ghz)).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no problem with id {id}")),
    }
}

async fn request(State(s): State<Arc<AppState>>, Path(id): Path<u64>, body: Bytes) -> Response {
    let req: RequestPackets = match parse_body(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    if s.store.problem(id).is_none() {
        return error(StatusCode::NOT_FOUND, format!("no problem with id {id}"));
    }
    if req.additional_packets <= 0 {
        return error(StatusCode::BAD_REQUEST, "additional_packets must be positive");
    }
    match s.store.request_packets(id, req.additional_packets as u64) {
        Ok(_) => {
            let (p, r, res) = s.store.problem(id).expect("checked above");
            Json(ProblemSummary::new(&p, &r, &res, s.nominal_ghz)).into_response()
        }
        Err(e) => store_error(e),
    }
}

async fn status(State(s): State<Arc<AppState>>) -> Json<StatusJson> {
    Json(StatusJson::from(&s.store.status()))
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/packet/claim", post(claim))
        .route("/api/packet/result", post(result))
        .route("/api/problems", get(problems))
        .route("/api/problems/{id}", get(problem))
        .route("/api/problems/{id}/request", post(request))
        .route("/api/status", get(status))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir)),
        None => api,
    }
}

/// Periodic housekeeping. Snapshots are guarded by the configured interval.
pub struct Scheduler {
    interval: i64,
    dir: PathBuf,
    last_snapshot: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickReport {
    pub queue_depth: u64,
    pub overdue: u64,
    pub snapshot: Option<PathBuf>,
}

impl Scheduler {
    /// The last snapshot time is recovered from the newest snapshot file, so
    /// a restart does not reset the interval.
    pub fn new(interval_seconds: u64, dir: PathBuf) -> Self {
        let last_snapshot = latest_snapshot(&dir).ok().flatten().and_then(|p| {
            let name = p.file_name()?.to_str()?.to_string();
            name.strip_prefix("snapshot-")?.split('-').next()?.parse().ok()
        });
        Scheduler { interval: interval_seconds as i64, dir, last_snapshot }
    }

    pub fn tick(&mut self, store: &ExperimentStore) -> TickReport {
        let now = store.now();
        let st = store.status();
        tracing::info!(queue_depth = st.queue_depth, running = st.running.len(), overdue = st.overdue, "tick");
        let due = self.last_snapshot.is_none_or(|t| now - t >= self.interval);
        let snapshot = if due {
            match store.snapshot(&self.dir) {
                Ok(p) => {
                    self.last_snapshot = Some(now);
                    tracing::info!(path = %p.display(), "snapshot written");
                    Some(p)
                }
                Err(e) => {
                    tracing::error!("snapshot failed: {e}");
                    None
                }
            }
        } else {
            None
        };
        TickReport { queue_depth: st.queue_depth, overdue: st.overdue, snapshot }
    }
}

/// Runs the coordinator until ctrl-c. `on_bound` receives the listening
/// address, which matters when the configured port is 0.
pub async fn serve(
    config: &CoordinatorConfig,
    store: ExperimentStore,
    on_bound: impl FnOnce(std::net::SocketAddr),
) -> std::io::Result<()> {
    let state = Arc::new(AppState {
        store: store.with_lease_floor(config.lease_floor_seconds as i64),
        nominal_ghz: config.nominal_ghz,
    });
    let app = router(state.clone(), config.ui_dir.clone());
    let listener = tokio::net::TcpListener::bind(&config.listen_addr).await?;
    on_bound(listener.local_addr()?);

    let scheduler = Arc::new(Mutex::new(Scheduler::new(config.snapshot_interval_seconds, config.snapshot_dir())));
    let period = Duration::from_secs(config.scheduler_period_seconds.max(1));
    let ticker = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(period);
            interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                interval.tick().await;
                let (state, scheduler) = (state.clone(), scheduler.clone());
                let _ = tokio::task::spawn_blocking(move || {
                    scheduler.lock().unwrap_or_else(|e| e.into_inner()).tick(&state.store)
                })
                .await;
            }
        })
    };
    let served = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    ticker.abort();
    served
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::ManualClock;

    #[test]
    fn snapshot_interval_guard() {
        let dir = tempfile::tempdir().unwrap();
        let clock = ManualClock::new(5_000);
        let store = ExperimentStore::create(&dir.path().join("s"), 1, Arc::new(clock.clone())).unwrap();
        let snaps = dir.path().join("snaps");
        let mut sched = Scheduler::new(600, snaps.clone());
        assert!(sched.tick(&store).snapshot.is_some());
        assert!(sched.tick(&store).snapshot.is_none());
        clock.advance(599);
        assert!(sched.tick(&store).snapshot.is_none());
        clock.advance(1);
        assert!(sched.tick(&store).snapshot.is_some());
        assert_eq!(std::fs::read_dir(&snaps).unwrap().count(), 2);

        let mut restarted = Scheduler::new(600, snaps.clone());
        assert!(restarted.tick(&store).snapshot.is_none());
    }

    #[test]
    fn tick_without_due_work_leaves_store_alone() {
        let dir = tempfile::tempdir().unwrap();
        let store = ExperimentStore::create(&dir.path().join("s"), 1, Arc::new(ManualClock::new(0))).unwrap();
        let mut sched = Scheduler::new(600, dir.path().join("snaps"));
        sched.last_snapshot = Some(0);
        let before = std::fs::read_to_string(store.path()).unwrap();
        let report = sched.tick(&store);
        assert_eq!(report, TickReport { queue_depth: 0, overdue: 0, snapshot: None });
        assert_eq!(std::fs::read_to_string(store.path()).unwrap(), before);
    }
}
