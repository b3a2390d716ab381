//! HTTP gateway over a running [`ControlLoop`].
//!
//! Reads go through [`ControlHandle::read`] or straight to the telemetry
//! store; every mutation is a job on the control thread, so requests never
//! interleave inside the controller. `/events` streams bus messages as
//! server-sent events (`id` = seq, `event` = topic, `data` = the JSON
//! message), replaying the retained log first.

use std::collections::VecDeque;
use std::convert::Infallible;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{self, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;

use crate::controller::{
    BusMessage, ControlHandle, ControlLoop, Controller, ControllerError, FlowEntry, FlowIntent,
    ReallocationReport,
};
use crate::netsim::{DirLink, FlowId, NetsimError, TopologyDoc};
use crate::optimizer::Objective;
use crate::telemetry::TelemetryError;
use crate::SCHEMA_VERSION;

const EVENT_BUFFER: usize = 1024;
const DEFAULT_TAIL: usize = 60;

/// A JSON error body: `{"schema_version", "error", "reason"}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub reason: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, reason: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            reason: reason.into(),
        }
    }

    fn bad_request(reason: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", reason)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": self.code,
            "reason": self.reason,
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<ControllerError> for ApiError {
    fn from(e: ControllerError) -> Self {
        use ControllerError as C;
        let reason = e.to_string();
        let (status, code) = match &e {
            C::UnknownFlow(_) | C::Netsim(NetsimError::UnknownFlow(_)) => (StatusCode::NOT_FOUND, "unknown_flow"),
            C::DuplicateFlow { .. } | C::Netsim(NetsimError::DuplicateFlow(..)) => {
                (StatusCode::CONFLICT, "duplicate_flow")
            }
            C::InvalidState { .. } => (StatusCode::CONFLICT, "invalid_state"),
            C::InvalidIntent(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_intent"),
            C::NoCandidates { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "no_candidates"),
            C::NotCandidate { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "not_candidate"),
            C::Optimizer(_) => (StatusCode::UNPROCESSABLE_ENTITY, "optimizer"),
            C::Netsim(NetsimError::UnknownNode(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_node"),
            C::Netsim(NetsimError::UnknownTunnel(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_tunnel"),
            C::Netsim(NetsimError::ForeignTunnel { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "foreign_tunnel"),
            C::Netsim(_) => (StatusCode::UNPROCESSABLE_ENTITY, "netsim"),
            C::Stopped => (StatusCode::SERVICE_UNAVAILABLE, "stopped"),
            C::Telemetry(_) | C::Replay { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, reason)
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn parse_flow_id(raw: &str) -> ApiResult<FlowId> {
    raw.parse()
        .map(FlowId)
        .map_err(|_| ApiError::bad_request(format!("flow id {raw:?} is not an integer")))
}

#[derive(Clone)]
struct AppState {
    handle: ControlHandle,
    events: broadcast::Sender<BusMessage>,
}

/// Owns the control thread and the event fan-out for one gateway.
pub struct Gateway {
    control: ControlLoop,
    events: broadcast::Sender<BusMessage>,
}

impl Gateway {
    pub fn new(mut controller: Controller) -> Self {
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        let tx = events.clone();
        controller.bus_mut().subscribe(move |m| {
            // no receivers is fine; clients catch up from the log
            let _ = tx.send(m.clone());
        });
        Gateway {
            control: ControlLoop::spawn(controller),
            events,
        }
    }

    pub fn handle(&self) -> ControlHandle {
        self.control.handle()
    }

    /// Fan-out of live bus messages; see [`event_stream`].
    pub fn events(&self) -> &broadcast::Sender<BusMessage> {
        &self.events
    }

    pub fn control_mut(&mut self) -> &mut ControlLoop {
        &mut self.control
    }

    pub fn router(&self) -> Router {
        router(self.handle(), self.events.clone())
    }

    /// Stops the control thread. Blocks; call outside async contexts.
    pub fn shutdown(self) -> Controller {
        self.control.shutdown()
    }
}

fn router(handle: ControlHandle, events: broadcast::Sender<BusMessage>) -> Router {
    Router::new()
        .route("/topology", get(get_topology))
        .route("/flows", get(list_flows).post(create_flow))
        .route("/flows/{id}/migrate", post(migrate_flow))
        .route("/flows/{id}/reallocate", post(reallocate_flow))
        .route("/telemetry/{series}", get(get_telemetry))
        .route("/config/{edge}", get(get_config))
        .route("/events", get(events_stream))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(AppState { handle, events })
}

/// Serves `router` on `listener` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkLoad {
    pub from: String,
    pub to: String,
    pub capacity_mbps: f64,
    pub load_mbps: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyView {
    pub schema_version: u32,
    pub clock: f64,
    pub topology: TopologyDoc,
    /// Both directions of every link under the current allocation.
    pub links: Vec<LinkLoad>,
}

fn topology_view(c: &Controller) -> Result<TopologyView, ControllerError> {
    let alloc = c.sim().compute_allocations()?;
    let topo = c.topology();
    let mut links = Vec::new();
    for (li, link) in topo.links().iter().enumerate() {
        for from_a in [true, false] {
            let d = DirLink { link: li, from_a };
            let load = alloc.load[d.resource()].to_f64().unwrap_or(0.0);
            let (from, to) = if from_a { (link.a, link.b) } else { (link.b, link.a) };
            links.push(LinkLoad {
                from: topo.nodes()[from].label.clone(),
                to: topo.nodes()[to].label.clone(),
                capacity_mbps: link.capacity_mbps,
                load_mbps: load,
                utilization: load / link.capacity_mbps,
            });
        }
    }
    Ok(TopologyView {
        schema_version: SCHEMA_VERSION,
        clock: c.sim().clock(),
        topology: topo.to_doc(),
        links,
    })
}

async fn get_topology(State(s): State<AppState>) -> ApiResult<Json<TopologyView>> {
    Ok(Json(s.handle.read(topology_view).await??))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowView {
    #[serde(flatten)]
    pub entry: FlowEntry,
    /// Current fair-share rate; absent for flows not carrying traffic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_mbps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowList {
    pub schema_version: u32,
    pub clock: f64,
    pub flows: Vec<FlowView>,
}

async fn list_flows(State(s): State<AppState>) -> ApiResult<Json<FlowList>> {
    let list = s
        .handle
        .read(|c| -> Result<FlowList, ControllerError> {
            let alloc = c.sim().compute_allocations()?;
            let flows = c
                .flows()
                .map(|e| FlowView {
                    throughput_mbps: alloc.rates.contains_key(&e.id).then(|| alloc.rate_mbps(e.id)),
                    entry: e.clone(),
                })
                .collect();
            Ok(FlowList {
                schema_version: SCHEMA_VERSION,
                clock: c.sim().clock(),
                flows,
            })
        })
        .await??;
    Ok(Json(list))
}

async fn create_flow(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let intent: FlowIntent = parse_body(&body)?;
    let id = s
        .handle
        .request_flow(intent)?
        .await
        .map_err(|_| ControllerError::Stopped)??;
    let body = json!({ "schema_version": SCHEMA_VERSION, "flow_id": id });
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

#[derive(Debug, Deserialize)]
struct MigrateBody {
    tunnel: u32,
}

async fn migrate_flow(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_flow_id(&id)?;
    let MigrateBody { tunnel } = parse_body(&body)?;
    let (migrated, entry) = s
        .handle
        .call(move |c| -> Result<_, ControllerError> {
            let migrated = c.migrate_flow(id, tunnel)?;
            Ok((migrated, c.flow(id)?.clone()))
        })
        .await??;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "migrated": migrated,
        "flow": entry,
    })))
}

#[derive(Debug, Default, Deserialize)]
struct ReallocateBody {
    objective: Option<Objective>,
}

async fn reallocate_flow(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ReallocationReport>> {
    let id = parse_flow_id(&id)?;
    let req: ReallocateBody = if body.iter().all(u8::is_ascii_whitespace) {
        ReallocateBody::default()
    } else {
        parse_body(&body)?
    };
    let report = s
        .handle
        .call(move |c| {
            let objective = match req.objective {
                Some(o) => o,
                None => c.flow(id)?.intent.objective,
            };
            c.reallocate(&[id], objective)
        })
        .await??;
    Ok(Json(report))
}

#[derive(Debug, Deserialize)]
struct TailQuery {
    n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTail {
    pub schema_version: u32,
    pub series: String,
    pub samples: Vec<Point>,
}

async fn get_telemetry(
    State(s): State<AppState>,
    Path(series): Path<String>,
    Query(q): Query<TailQuery>,
) -> ApiResult<Json<SeriesTail>> {
    let n = q.n.unwrap_or(DEFAULT_TAIL);
    let samples = s.handle.store().tail(&series, n).map_err(|e| match e {
        TelemetryError::UnknownSeries(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_series", e.to_string()),
        e => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    })?;
    Ok(Json(SeriesTail {
        schema_version: SCHEMA_VERSION,
        series,
        samples: samples.into_iter().map(|p| Point { t: p.t, value: p.value }).collect(),
    }))
}

async fn get_config(State(s): State<AppState>, Path(edge): Path<String>) -> ApiResult<Response> {
    let name = edge.clone();
    let text = s
        .handle
        .read(move |c| c.render_edge_config(&name))
        .await?
        .map_err(|e| match e {
            ControllerError::Netsim(NetsimError::UnknownNode(_) | NetsimError::InvalidNode(_)) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_edge", e.to_string())
            }
            e => e.into(),
        })?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    since: Option<u64>,
}

/// Delivers each message once, in seq order, starting after `last`.
struct Cursor {
    rx: broadcast::Receiver<BusMessage>,
    backlog: VecDeque<BusMessage>,
    last: u64,
    handle: ControlHandle,
}

impl Cursor {
    async fn refill(&mut self) -> bool {
        let last = self.last;
        match self.handle.read(move |c| c.bus().since(last).to_vec()).await {
            Ok(msgs) => {
                self.backlog.extend(msgs);
                true
            }
            Err(_) => false,
        }
    }

    async fn next(&mut self) -> Option<BusMessage> {
        loop {
            if let Some(m) = self.backlog.pop_front() {
                if m.seq <= self.last {
                    continue;
                }
                self.last = m.seq;
                return Some(m);
            }
            match self.rx.recv().await {
                Ok(m) if m.seq <= self.last => {}
                Ok(m) if m.seq == self.last + 1 => {
                    self.last = m.seq;
                    return Some(m);
                }
                // a gap: either we lagged or the message raced the replay
                Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => {
                    if !self.refill().await {
                        return None;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    }
}

/// Bus messages after `since` (query) or `Last-Event-ID` (header), then
/// live ones. Without either, the whole retained log is replayed first.
pub fn event_stream(
    handle: ControlHandle,
    events: &broadcast::Sender<BusMessage>,
    since: u64,
) -> impl Stream<Item = BusMessage> + Send + 'static {
    // subscribe before reading the log so nothing falls between the two
    let cursor = Cursor {
        rx: events.subscribe(),
        backlog: VecDeque::new(),
        last: since,
        handle,
    };
    futures::stream::unfold((cursor, false), |(mut cur, primed)| async move {
        if !primed && !cur.refill().await {
            return None;
        }
        let m = cur.next().await?;
        Some((m, (cur, true)))
    })
}

async fn events_stream(
    State(s): State<AppState>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<sse::Event, Infallible>>>> {
    let since = match (q.since, headers.get("last-event-id")) {
        (Some(n), _) => n,
        (None, Some(v)) => v
            .to_str()
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| ApiError::bad_request("Last-Event-ID must be an integer"))?,
        (None, None) => 0,
    };
    use futures::StreamExt;
    let stream = event_stream(s.handle.clone(), &s.events, since).map(|m| {
        let data = serde_json::to_string(&m).expect("bus messages serialize");
        Ok(sse::Event::default().id(m.seq.to_string()).event(m.topic()).data(data))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
