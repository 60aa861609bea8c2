//! HTTP service for the what-if interface and the control/treatment
//! counterfactual-simulation exercise.
//!
//! Routes:
//! - `POST /api/session` `{group, participant, background?, seed?}`
//! - `GET  /api/session/{id}`
//! - `GET  /api/session/{id}/round/{r}`
//! - `POST /api/session/{id}/answer` `{round, question, choice}`
//! - `POST /api/whatif` `{session, round?, t_star, direction, delta?}`
//! - `GET  /api/export` (CSV)
//!
//! Errors are JSON `{code, message}`.

pub mod error;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{FromRequest, Path, Request, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{Datelike, Months, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::services::ServeDir;
use tsfl_core::evaluation::derive_seed;
use tsfl_core::surrogate::{ExplainConfig, FeatureContribution};
use tsfl_core::{FeatureFamily, Forecaster, KernelConfig, PerturbationConfig, Series};

pub use error::{ApiError, ErrorBody};
pub use session::{
    AnswerRecord, Background, Direction, Group, Question, Round, SessionRecord, SessionState,
    Verdict, WhatIfOutcome,
};
pub use store::{LogRecord, Store, StoreError};

use session::{check_question, generate_rounds, whatif, QUESTIONS_PER_ROUND, ROUNDS, WINDOW};

pub const EXPORT_HEADER: &str = "participant,group,background,score,duration";

/// Everything a session needs besides the store.
pub struct Engine {
    pub series: Series,
    pub forecaster: Arc<dyn Forecaster>,
    /// Features, kernel and perturbation template for treatment explanations.
    /// The perturbation seed is replaced per session and round.
    pub explain: ExplainConfig,
    /// Seeds sessions that do not bring their own.
    pub master_seed: u64,
}

impl Engine {
    /// Lag features over the 12-month window, exponential kernel, default MBB.
    pub fn new(series: Series, forecaster: Arc<dyn Forecaster>) -> Self {
        Self {
            series,
            forecaster,
            explain: ExplainConfig::new(
                FeatureFamily::Lag.default_specs(WINDOW),
                PerturbationConfig::default(),
                KernelConfig::exponential(),
            ),
            master_seed: 0,
        }
    }

    pub fn window(&self, round: &Round) -> &[f64] {
        &self.series.values()[round.window_start..round.window_start + WINDOW]
    }
}

type SessionHandle = Arc<Mutex<SessionState>>;

#[derive(Default)]
struct Registry {
    sessions: HashMap<String, SessionHandle>,
    order: Vec<String>,
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    registry: Arc<RwLock<Registry>>,
    store: Arc<Store>,
}

impl AppState {
    pub fn new(engine: Engine, store: Store) -> Self {
        Self {
            engine: Arc::new(engine),
            registry: Arc::default(),
            store: Arc::new(store),
        }
    }

    /// Rebuilds sessions from an existing log.
    pub fn with_history(
        engine: Engine,
        store: Store,
        history: Vec<LogRecord>,
    ) -> Result<Self, StoreError> {
        let state = Self::new(engine, store);
        {
            let mut reg = state.registry.write().unwrap();
            for rec in history {
                match rec {
                    LogRecord::Session(s) => {
                        let id = s.id.clone();
                        if reg
                            .sessions
                            .insert(id.clone(), Arc::new(Mutex::new(SessionState::new(s))))
                            .is_none()
                        {
                            reg.order.push(id);
                        }
                    }
                    LogRecord::Answer { session, answer } => {
                        if let Some(h) = reg.sessions.get(&session) {
                            let mut s = h.try_lock().expect("no contention during replay");
                            if s.answer_for(answer.round, answer.question).is_none() {
                                s.answers.push(answer);
                            }
                        }
                    }
                }
            }
        }
        Ok(state)
    }

    fn handle(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.registry
            .read()
            .unwrap()
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }

    fn session_count(&self) -> usize {
        self.registry.read().unwrap().order.len()
    }

    /// Export rows in creation order.
    pub async fn export_csv(&self) -> String {
        let handles: Vec<SessionHandle> = {
            let reg = self.registry.read().unwrap();
            reg.order
                .iter()
                .map(|id| reg.sessions[id].clone())
                .collect()
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(EXPORT_HEADER.split(',')).unwrap();
        for h in handles {
            let s = h.lock().await;
            w.write_record([
                s.record.participant.clone(),
                s.record.group.to_string(),
                s.record
                    .background
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
                s.score().to_string(),
                format!("{:.3}", s.duration_seconds()),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/round/{r}", get(get_round))
        .route("/api/session/{id}/answer", post(post_answer))
        .route("/api/whatif", post(post_whatif))
        .route("/api/export", get(get_export))
        .with_state(state)
}

/// API routes plus static files (the web UI) from `dir` for everything else.
pub fn router_with_static(state: AppState, dir: impl Into<PathBuf>) -> Router {
    router(state).fallback_service(ServeDir::new(dir.into()))
}

pub async fn serve(
    state: AppState,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    let app = match static_dir {
        Some(dir) => router_with_static(state, dir),
        None => router(state),
    };
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

// ---------------------------------------------------------------------------
// Payloads

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub group: Group,
    pub participant: String,
    #[serde(default)]
    pub background: Option<Background>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub group: Group,
    pub participant: String,
    pub background: Option<Background>,
    pub seed: u64,
    pub rounds: usize,
    pub questions_per_round: usize,
    pub answered: usize,
    pub score: usize,
}

impl SessionSummary {
    fn of(s: &SessionState) -> Self {
        Self {
            id: s.record.id.clone(),
            group: s.record.group,
            participant: s.record.participant.clone(),
            background: s.record.background,
            seed: s.record.seed,
            rounds: ROUNDS,
            questions_per_round: QUESTIONS_PER_ROUND,
            answered: s.answers.len(),
            score: s.score(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChartPoint {
    pub date: String,
    pub value: f64,
    pub predicted: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuestionView {
    pub question: usize,
    pub month: usize,
    pub month_label: String,
    pub direction: Direction,
    pub delta: f64,
    pub prompt: String,
    pub answered: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplanationView {
    pub features: Vec<FeatureContribution>,
    pub intercept: f64,
    pub rule: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RoundView {
    pub session: String,
    pub group: Group,
    pub round: usize,
    /// 12 observed points followed by the flagged forecast point.
    pub chart: Vec<ChartPoint>,
    pub questions: Vec<QuestionView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<ExplanationView>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub round: usize,
    pub question: usize,
    pub choice: Verdict,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub correct: bool,
    pub feedback: String,
    pub score: usize,
    pub answered: usize,
    pub finished: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub session: String,
    #[serde(default = "first_round")]
    pub round: usize,
    #[serde(alias = "month", alias = "t*")]
    pub t_star: usize,
    pub direction: Direction,
    #[serde(default, alias = "δ")]
    pub delta: Option<f64>,
}

/// `Json` with rejections reported as `{code, message}`.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: serde::de::DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|e| ApiError::validation(e.body_text()))
    }
}

fn parse_index(name: &str, raw: &str) -> Result<usize, ApiError> {
    raw.parse().map_err(|_| {
        ApiError::validation(format!("{name} must be a positive integer, got `{raw}`"))
    })
}

fn first_round() -> usize {
    1
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub verdict: Verdict,
    pub t_star: usize,
    pub direction: Direction,
    pub delta: f64,
    pub black_box_original: f64,
    pub black_box_perturbed: f64,
    pub black_box_delta: f64,
    pub epsilon: f64,
    /// Present for treatment sessions only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_delta: Option<f64>,
}

fn month_label(d: NaiveDate) -> String {
    format!("{:04}-{:02}", d.year(), d.month())
}

// ---------------------------------------------------------------------------
// Handlers

async fn create_session(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<CreateSession>,
) -> Result<Json<SessionSummary>, ApiError> {
    let participant = req.participant.trim().to_string();
    if participant.is_empty() {
        return Err(ApiError::validation("participant must not be empty"));
    }
    let seed = req
        .seed
        .unwrap_or_else(|| derive_seed(state.engine.master_seed, state.session_count(), 0));
    let engine = state.engine.clone();
    let group = req.group;
    let rounds = blocking(move || {
        Ok(generate_rounds(
            &engine.series,
            engine.forecaster.as_ref(),
            &engine.explain,
            group,
            seed,
        )?)
    })
    .await?;
    let record = SessionRecord {
        id: uuid::Uuid::new_v4().simple().to_string(),
        group,
        participant,
        background: req.background,
        seed,
        created_at: Utc::now(),
        rounds,
    };
    state
        .store
        .append(&LogRecord::Session(record.clone()))
        .map_err(|e| ApiError::storage(e.to_string()))?;
    let s = SessionState::new(record);
    let summary = SessionSummary::of(&s);
    let mut reg = state.registry.write().unwrap();
    reg.order.push(summary.id.clone());
    reg.sessions
        .insert(summary.id.clone(), Arc::new(Mutex::new(s)));
    Ok(Json(summary))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionSummary>, ApiError> {
    let h = state.handle(&id)?;
    let s = h.lock().await;
    Ok(Json(SessionSummary::of(&s)))
}

async fn get_round(
    State(state): State<AppState>,
    Path((id, r)): Path<(String, String)>,
) -> Result<Json<RoundView>, ApiError> {
    let r = parse_index("round", &r)?;
    let h = state.handle(&id)?;
    let s = h.lock().await;
    let round = s.round(r)?.clone();
    let engine = state.engine.clone();
    let window = engine.window(&round).to_vec();
    let forecast = {
        let engine = engine.clone();
        let window = window.clone();
        blocking(move || Ok(engine.forecaster.predict(&window)?)).await?
    };
    let dates = &engine.series.timestamps()[round.window_start..round.window_start + WINDOW];
    let next = dates[WINDOW - 1] + Months::new(1);
    let mut chart: Vec<ChartPoint> = dates
        .iter()
        .zip(&window)
        .map(|(d, v)| ChartPoint {
            date: month_label(*d),
            value: *v,
            predicted: false,
        })
        .collect();
    chart.push(ChartPoint {
        date: month_label(next),
        value: forecast,
        predicted: true,
    });
    let questions = round
        .questions
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let label = month_label(dates[q.month - 1]);
            let verb = match q.direction {
                Direction::Increase => "increased",
                Direction::Decrease => "decreased",
            };
            QuestionView {
                question: i + 1,
                month: q.month,
                prompt: format!(
                    "Suppose the value for {label} is {verb} by {:.4}. Does the forecast for {} go up, remain stable or go down?",
                    q.delta,
                    month_label(next)
                ),
                month_label: label,
                direction: q.direction,
                delta: q.delta,
                answered: s.answer_for(r, i + 1).is_some(),
            }
        })
        .collect();
    let explanation = match s.record.group {
        Group::Control => None,
        Group::Treatment => round.explanation.map(|e| ExplanationView {
            features: e.features,
            intercept: e.intercept,
            rule: e.rule,
        }),
    };
    Ok(Json(RoundView {
        session: id,
        group: s.record.group,
        round: r,
        chart,
        questions,
        explanation,
    }))
}

async fn post_answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<AnswerRequest>,
) -> Result<Json<AnswerResponse>, ApiError> {
    let h = state.handle(&id)?;
    let mut s = h.lock().await;
    let round = s.round(req.round)?.clone();
    check_question(req.question)?;
    if s.answer_for(req.round, req.question).is_some() {
        return Err(ApiError::conflict(format!(
            "round {} question {} already answered",
            req.round, req.question
        )));
    }
    let q = round.questions[req.question - 1];
    let engine = state.engine.clone();
    let outcome = blocking(move || {
        whatif(
            engine.forecaster.as_ref(),
            None,
            engine.window(&round),
            q.month,
            q.direction,
            q.delta,
        )
    })
    .await?;
    let answer = AnswerRecord {
        round: req.round,
        question: req.question,
        choice: req.choice,
        verdict: outcome.verdict,
        correct: req.choice == outcome.verdict,
        answered_at: Utc::now(),
    };
    state
        .store
        .append(&LogRecord::Answer {
            session: id,
            answer: answer.clone(),
        })
        .map_err(|e| ApiError::storage(e.to_string()))?;
    s.answers.push(answer.clone());
    let feedback = match s.record.group {
        Group::Control => String::new(),
        Group::Treatment => tsfl_core::surrogate::SIGN_RULE.to_string(),
    };
    Ok(Json(AnswerResponse {
        correct: answer.correct,
        feedback,
        score: s.score(),
        answered: s.answers.len(),
        finished: s.answers.len() == ROUNDS * QUESTIONS_PER_ROUND,
    }))
}

async fn post_whatif(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<WhatIfRequest>,
) -> Result<Json<WhatIfResponse>, ApiError> {
    let h = state.handle(&req.session)?;
    let s = h.lock().await;
    let round = s.round(req.round)?.clone();
    let group = s.record.group;
    drop(s);
    let engine = state.engine.clone();
    let delta = req
        .delta
        .unwrap_or_else(|| session::default_delta(engine.window(&round)));
    let (t_star, direction) = (req.t_star, req.direction);
    let outcome = blocking(move || {
        let g = match group {
            Group::Treatment => round.explanation.as_ref().map(|e| &e.surrogate),
            Group::Control => None,
        };
        whatif(
            engine.forecaster.as_ref(),
            g,
            engine.window(&round),
            t_star,
            direction,
            delta,
        )
    })
    .await?;
    Ok(Json(WhatIfResponse {
        verdict: outcome.verdict,
        t_star,
        direction,
        delta,
        black_box_original: outcome.black_box_original,
        black_box_perturbed: outcome.black_box_perturbed,
        black_box_delta: outcome.black_box_delta,
        epsilon: outcome.epsilon,
        surrogate_delta: outcome.surrogate_delta,
    }))
}

async fn get_export(State(state): State<AppState>) -> impl IntoResponse {
    (
        [(header::CONTENT_TYPE, "text/csv; charset=utf-8")],
        state.export_csv().await,
    )
}
