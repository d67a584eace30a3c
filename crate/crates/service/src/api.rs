use std::convert::Infallible;
use std::sync::{mpsc, Arc};

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use tokio::sync::{broadcast, oneshot, watch};
use tower_http::cors::CorsLayer;
use velocity_core::ledger::{Address, Amount};
use velocity_core::market::Side;

use crate::config::Mode;
use crate::error::ApiError;
use crate::session::{Command, Reply, ServiceEvent, Session, Snapshot, MAX_STEP};

#[derive(Clone)]
pub struct AppState {
    commands: mpsc::Sender<Command>,
    snapshots: watch::Receiver<Arc<Snapshot>>,
    events: broadcast::Sender<ServiceEvent>,
}

impl AppState {
    pub fn new(session: &Session) -> Self {
        AppState {
            commands: session.commands(),
            snapshots: session.snapshots(),
            events: session.events(),
        }
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshots.borrow().clone()
    }

    async fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, ApiError> {
        let (tx, rx) = oneshot::channel();
        self.commands
            .send(make(tx))
            .map_err(|_| ApiError::unavailable("session is not running"))?;
        rx.await
            .map_err(|_| ApiError::unavailable("session stopped before replying"))?
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/positions", post(create_position))
        .route("/prices", get(prices))
        .route("/options", get(list_options))
        .route("/options/{id}", get(get_option))
        .route("/accounts", get(accounts))
        .route("/status", get(status))
        .route("/admin/step", post(step))
        .route("/admin/sweep", post(sweep))
        .route("/events", get(events))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct PositionRequest {
    account: String,
    side: Side,
    /// Defaults to the market's entry deposit.
    deposit: Option<Amount>,
}

async fn create_position(
    State(state): State<AppState>,
    body: Result<Json<PositionRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let snapshot = state.snapshot();
    let deposit = req.deposit.unwrap_or(snapshot.market.config.entry_deposit);
    if deposit.is_zero() {
        return Err(ApiError::bad_request("deposit must be positive"));
    }
    if snapshot.account(&req.account).is_none() {
        return Err(ApiError::unknown_account(&req.account));
    }
    let accepted = state
        .call(|reply| Command::Position {
            account: req.account,
            side: req.side,
            deposit,
            reply,
        })
        .await?;
    Ok((StatusCode::CREATED, Json(accepted)))
}

#[derive(Debug, Deserialize)]
struct PriceRange {
    from: Option<u64>,
    to: Option<u64>,
}

async fn prices(
    State(state): State<AppState>,
    query: Result<Query<PriceRange>, QueryRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Query(range) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let snap = state.snapshot();
    let (Some(first), Some(last)) = (snap.first_price_block, snap.last_price_block) else {
        return Err(ApiError::new(
            StatusCode::RANGE_NOT_SATISFIABLE,
            "OUT_OF_RANGE",
            "no prices have been published yet",
        )
        .with("first_block", serde_json::Value::Null)
        .with("last_block", serde_json::Value::Null));
    };
    let from = range.from.unwrap_or(first);
    let to = range.to.unwrap_or(last);
    if from > to {
        return Err(ApiError::bad_request(format!("from={from} is after to={to}")));
    }
    if from < first || to > last {
        return Err(ApiError::new(
            StatusCode::RANGE_NOT_SATISFIABLE,
            "OUT_OF_RANGE",
            format!("prices exist for blocks {first}..={last}"),
        )
        .with("first_block", first)
        .with("last_block", last));
    }
    let feeds: Vec<_> = (from..=to).filter_map(|b| snap.feed(b).copied()).collect();
    Ok(Json(feeds))
}

async fn get_option(
    State(state): State<AppState>,
    id: Result<Path<u64>, PathRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Path(id) = id.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let snap = state.snapshot();
    snap.option(id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no option {id}")))
}

#[derive(Debug, Deserialize)]
struct OptionFilter {
    owner: Option<String>,
    state: Option<String>,
}

async fn list_options(
    State(state): State<AppState>,
    query: Result<Query<OptionFilter>, QueryRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Query(filter) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let open = match filter.state.as_deref() {
        None => None,
        Some("open") => Some(true),
        Some("closed") => Some(false),
        Some(other) => return Err(ApiError::bad_request(format!("state must be open or closed, got `{other}`"))),
    };
    let snap = state.snapshot();
    let owner = match filter.owner.as_deref() {
        None => None,
        Some(o) => Some(match snap.account(o) {
            Some(a) => a.address,
            None => o
                .parse::<Address>()
                .map_err(|_| ApiError::bad_request(format!("`{o}` is neither an account name nor an address")))?,
        }),
    };
    let out: Vec<_> = snap
        .options
        .iter()
        .filter(|o| owner.is_none_or(|a| o.trader == a))
        .filter(|o| open.is_none_or(|want| o.is_open() == want))
        .cloned()
        .collect();
    Ok(Json(out))
}

async fn accounts(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.snapshot().accounts.clone())
}

async fn status(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.snapshot().as_ref().clone())
}

#[derive(Debug, Deserialize)]
struct StepRequest {
    blocks: u64,
}

async fn step(
    State(state): State<AppState>,
    body: Result<Json<StepRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    if state.snapshot().mode == Mode::Auto {
        return Err(ApiError::conflict("blocks are produced on a timer in auto mode"));
    }
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if req.blocks > MAX_STEP {
        return Err(ApiError::bad_request(format!("at most {MAX_STEP} blocks per step")));
    }
    let report = state.call(|reply| Command::Step { blocks: req.blocks, reply }).await?;
    Ok(Json(report))
}

async fn sweep(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    let report = state.call(|reply| Command::Sweep { reply }).await?;
    Ok(Json(report))
}

/// Opens with a `status` event, then streams `block`, `price`, `position`
/// and `settlement` events as they happen.
async fn events(State(state): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = state.events.subscribe();
    let hello = Event::default()
        .event("status")
        .json_data(state.snapshot().as_ref())
        .unwrap_or_default();
    let live = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(ev) => {
                    let event = Event::default().event(ev.kind()).json_data(&ev).unwrap_or_default();
                    return Some((Ok(event), rx));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!("event subscriber lagged by {n}");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    let stream = futures::StreamExt::chain(futures::stream::once(async move { Ok(hello) }), live);
    Sse::new(stream).keep_alive(KeepAlive::default())
}
