//! Experiment orchestration: planning, running sessions into the store,
//! administering surveys, analysis and the resurvey check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    build_role_prompt, Agent, AnchorSeller, ConcessionBuyer, Condition, LlmAgent, PolicyParams, PromptTemplates, Role,
};
use crate::analysis::{self, AnalysisReport, ResurveyReport, Utilities};
use crate::catalog::{plan_sessions, Catalog, Scenario, SessionPlan};
use crate::dialogue::{run_session_with, Outcome, SessionSetup, DEFAULT_MAX_TURNS};
use crate::metrics::{buyer_utility, derive_price_bounds, seller_utility};
use crate::persona::{render_persona_text, AdjectiveLexicon, PersonaText};
use crate::rng::stream;
use crate::store::{
    load_experiment, sha256_hex, BackendDescriptor, EventKind, ExperimentStore, RunManifest, SessionHeader,
    SessionOutcome, SessionStatus, StoreError,
};
use crate::survey::{administer, Questionnaire, SurveyPolicy};
use crate::transport::http::{HttpBackend, MessagesApi, OpenAiChat, WireAdapter};
use crate::transport::replay::{record_and_replay, ReplayMode};
use crate::transport::{BackendConfig, ChatBackend, ChatClient, Scalar, TransportError};

pub const DEFAULT_PER_PRODUCT: u32 = 2;
pub const DEFAULT_ADJECTIVES: usize = 3;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("{0}")]
    Config(String),
    #[error("session {session_id}: {message}")]
    Session { session_id: String, message: String },
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
}

/// Static inputs shared by every session: lexicon, templates, questionnaire.
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicon: AdjectiveLexicon,
    pub templates: PromptTemplates,
    pub questionnaire: Questionnaire,
}

impl Default for Resources {
    fn default() -> Self {
        Resources {
            lexicon: AdjectiveLexicon::builtin(),
            templates: PromptTemplates::builtin(),
            questionnaire: Questionnaire::builtin(),
        }
    }
}

impl Resources {
    /// Builtin resources, with any of the given paths overriding its part.
    pub fn load(
        templates: Option<&Path>,
        lexicon: Option<&Path>,
        questionnaire: Option<&Path>,
    ) -> Result<Self, ExperimentError> {
        let mut r = Resources::default();
        if let Some(dir) = templates {
            r.templates = PromptTemplates::load_dir(dir)
                .map_err(|e| ExperimentError::Config(format!("{}: {e}", dir.display())))?;
        }
        if let Some(path) = lexicon {
            r.lexicon = AdjectiveLexicon::load(path).map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if let Some(path) = questionnaire {
            r.questionnaire = Questionnaire::load(path).map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        Ok(r)
    }

    pub fn questionnaire_digest(&self) -> String {
        sha256_hex(serde_json::to_string(&self.questionnaire).expect("questionnaire serializes").as_bytes())
    }

    /// Errors if these resources are not the ones the manifest was planned with.
    pub fn check(&self, manifest: &RunManifest) -> Result<(), ExperimentError> {
        let pairs = [
            ("templates", self.templates.digest(), &manifest.template_digest),
            ("lexicon", sha256_hex(self.lexicon.to_json().as_bytes()), &manifest.lexicon_digest),
            ("questionnaire", self.questionnaire_digest(), &manifest.questionnaire_digest),
        ];
        for (name, have, want) in pairs {
            if &have != want {
                return Err(ExperimentError::Config(format!(
                    "{name} differ from the ones recorded in the manifest of {}",
                    manifest.experiment_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    OpenaiChat,
    Messages,
}

impl AdapterKind {
    fn build(self) -> Box<dyn WireAdapter> {
        match self {
            AdapterKind::OpenaiChat => Box::new(OpenAiChat),
            AdapterKind::Messages => Box::new(MessagesApi::default()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::OpenaiChat => "openai_chat",
            AdapterKind::Messages => "messages",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChatMode {
    Http,
    Record(PathBuf),
    Replay(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ChatSpec {
    pub mode: ChatMode,
    pub adapter: AdapterKind,
    pub config: BackendConfig,
    pub model_id: String,
    pub temperature: f64,
    pub extra_params: BTreeMap<String, Scalar>,
}

#[derive(Debug, Clone)]
pub enum AgentSpec {
    Scripted(PolicyParams),
    Chat(ChatSpec),
}

impl AgentSpec {
    pub fn descriptor(&self) -> BackendDescriptor {
        match self {
            AgentSpec::Scripted(params) => BackendDescriptor::Scripted { params: params.clone() },
            AgentSpec::Chat(spec) => BackendDescriptor::Chat {
                mode: match spec.mode {
                    ChatMode::Http => "http",
                    ChatMode::Record(_) => "record",
                    ChatMode::Replay(_) => "replay",
                }
                .into(),
                adapter: spec.adapter.as_str().into(),
                model_id: spec.model_id.clone(),
                temperature: spec.temperature,
                extra_params: spec.extra_params.clone(),
            },
        }
    }
}

/// An agent source with any network client already constructed, so clients
/// (and their rate limiters) are shared across sessions.
pub enum AgentSource {
    Scripted(PolicyParams),
    Llm {
        client: Arc<ChatClient>,
        model_id: String,
        temperature: f64,
        extra_params: BTreeMap<String, Scalar>,
    },
}

impl AgentSource {
    pub fn from_spec(spec: &AgentSpec) -> Result<Self, ExperimentError> {
        match spec {
            AgentSpec::Scripted(params) => {
                params.validate().map_err(ExperimentError::Config)?;
                Ok(AgentSource::Scripted(params.clone()))
            }
            AgentSpec::Chat(chat) => {
                let backend = chat_backend(chat)?;
                let client = ChatClient::new(backend, chat.config.clone())?;
                Ok(AgentSource::Llm {
                    client: Arc::new(client),
                    model_id: chat.model_id.clone(),
                    temperature: chat.temperature,
                    extra_params: chat.extra_params.clone(),
                })
            }
        }
    }

    pub fn build(
        &self,
        role: Role,
        scenario: &Scenario,
        condition: Condition,
        persona: &PersonaText,
        templates: &PromptTemplates,
    ) -> Box<dyn Agent> {
        match self {
            AgentSource::Scripted(params) => match role {
                Role::Seller => Box::new(AnchorSeller::new(params.clone(), scenario, condition)),
                Role::Buyer => Box::new(ConcessionBuyer::new(params.clone(), scenario, condition)),
            },
            AgentSource::Llm {
                client,
                model_id,
                temperature,
                extra_params,
            } => {
                let prompt = build_role_prompt(role, scenario, persona, condition, templates);
                Box::new(
                    LlmAgent::new(prompt, client.clone(), model_id.clone(), *temperature)
                        .with_extra_params(extra_params.clone()),
                )
            }
        }
    }
}

pub fn chat_backend(spec: &ChatSpec) -> Result<Arc<dyn ChatBackend>, ExperimentError> {
    let http = || -> Arc<dyn ChatBackend> { Arc::new(HttpBackend::new(spec.config.clone(), spec.adapter.build())) };
    Ok(match &spec.mode {
        ChatMode::Http => http(),
        ChatMode::Record(path) => record_and_replay(ReplayMode::Record, path, Some(http()))?,
        ChatMode::Replay(path) => record_and_replay(ReplayMode::Replay, path, None)?,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub seed: u64,
    pub conditions: Vec<Condition>,
    pub per_product: u32,
    pub t_max: usize,
    pub n_adjectives: usize,
    pub survey_policy: SurveyPolicy,
    pub seller: AgentSpec,
    pub buyer: AgentSpec,
}

impl ExperimentConfig {
    pub fn scripted(experiment_id: impl Into<String>, seed: u64, params: PolicyParams) -> Self {
        ExperimentConfig {
            experiment_id: experiment_id.into(),
            seed,
            conditions: Condition::ALL.to_vec(),
            per_product: DEFAULT_PER_PRODUCT,
            t_max: DEFAULT_MAX_TURNS,
            n_adjectives: DEFAULT_ADJECTIVES,
            survey_policy: SurveyPolicy::AcceptedOnly,
            seller: AgentSpec::Scripted(params.clone()),
            buyer: AgentSpec::Scripted(params),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.conditions.is_empty() {
            return err("at least one condition is required");
        }
        let mut seen = self.conditions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.conditions.len() {
            return err("conditions must not repeat");
        }
        if self.per_product == 0 {
            return err("per_product must be positive");
        }
        if self.t_max < 2 {
            return err("t_max must be at least 2");
        }
        if self.n_adjectives == 0 {
            return err("the adjective count must be positive");
        }
        Ok(())
    }
}

/// Builds the manifest (including the full session plan) for `catalog`.
pub fn plan_experiment(
    catalog: &Catalog,
    config: &ExperimentConfig,
    resources: &Resources,
) -> Result<RunManifest, ExperimentError> {
    config.validate()?;
    for spec in [&config.seller, &config.buyer] {
        if let AgentSpec::Scripted(p) = spec {
            p.validate().map_err(ExperimentError::Config)?;
        }
    }
    let plan = plan_sessions(catalog, config.per_product, &config.conditions, &mut stream(config.seed, "plan"));
    Ok(RunManifest {
        experiment_id: config.experiment_id.clone(),
        master_seed: config.seed,
        catalog_digest: sha256_hex(catalog.to_json().as_bytes()),
        conditions: config.conditions.clone(),
        per_product: config.per_product,
        t_max: config.t_max,
        n_adjectives: config.n_adjectives,
        seller_backend: config.seller.descriptor(),
        buyer_backend: config.buyer.descriptor(),
        template_digest: resources.templates.digest(),
        lexicon_digest: sha256_hex(resources.lexicon.to_json().as_bytes()),
        questionnaire_digest: resources.questionnaire_digest(),
        survey_policy: config.survey_policy,
        scenarios: catalog.scenarios.clone(),
        plan,
    })
}

/// Persona text for one side of a cell; identical across conditions.
pub fn persona_for(
    manifest: &RunManifest,
    plan: &SessionPlan,
    role: Role,
    lexicon: &AdjectiveLexicon,
) -> Result<PersonaText, ExperimentError> {
    let label = format!("persona/{}/{}/{}", plan.scenario_id, plan.iteration, role);
    let profile = match role {
        Role::Seller => &plan.seller_profile,
        Role::Buyer => &plan.buyer_profile,
    };
    render_persona_text(profile, lexicon, manifest.n_adjectives, &mut stream(manifest.master_seed, &label))
        .map_err(|e| ExperimentError::Config(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
    /// Sessions left pending because of the limit.
    pub remaining: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub concurrency: usize,
    /// Run at most this many pending sessions.
    pub limit: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            concurrency: DEFAULT_CONCURRENCY,
            limit: None,
        }
    }
}

fn run_one(
    store: &ExperimentStore,
    manifest: &RunManifest,
    plan: &SessionPlan,
    seller_src: &AgentSource,
    buyer_src: &AgentSource,
    resources: &Resources,
) -> Result<Option<String>, ExperimentError> {
    let scenario = manifest.scenario(&plan.scenario_id).ok_or_else(|| ExperimentError::Session {
        session_id: plan.session_id.clone(),
        message: format!("scenario {} is not in the manifest", plan.scenario_id),
    })?;
    let seller_text = persona_for(manifest, plan, Role::Seller, &resources.lexicon)?;
    let buyer_text = persona_for(manifest, plan, Role::Buyer, &resources.lexicon)?;
    let mut writer = store.start_session(&plan.session_id)?;
    writer.push(
        EventKind::Manifest,
        &SessionHeader {
            plan: plan.clone(),
            seller_persona_text: seller_text.rendered.clone(),
            buyer_persona_text: buyer_text.rendered.clone(),
        },
    )?;
    let mut seller = seller_src.build(Role::Seller, scenario, plan.condition, &seller_text, &resources.templates);
    let mut buyer = buyer_src.build(Role::Buyer, scenario, plan.condition, &buyer_text, &resources.templates);
    let setup = SessionSetup {
        session_id: &plan.session_id,
        scenario,
        condition: plan.condition,
        seller_persona: &plan.seller_profile,
        buyer_persona: &plan.buyer_profile,
        t_max: manifest.t_max,
    };
    let mut sink_error = None;
    let result = run_session_with(seller.as_mut(), buyer.as_mut(), &setup, |turn| {
        writer.push(EventKind::Turn, turn).map(|_| ()).map_err(|e| {
            let msg = e.to_string();
            sink_error = Some(e);
            msg
        })
    });
    if let Some(e) = sink_error {
        return Err(e.into());
    }
    match result {
        Ok(transcript) => {
            writer.push(
                EventKind::Outcome,
                &SessionOutcome {
                    outcome: Some(transcript.outcome.clone()),
                    failure: None,
                },
            )?;
            if let Outcome::Accepted { final_price } = transcript.outcome {
                let bounds = derive_price_bounds(scenario.seller_target, scenario.buyer_target).map_err(|e| {
                    ExperimentError::Session {
                        session_id: plan.session_id.clone(),
                        message: e.to_string(),
                    }
                })?;
                writer.push(
                    EventKind::Metric,
                    &Utilities {
                        seller: seller_utility(&bounds, final_price),
                        buyer: buyer_utility(&bounds, final_price),
                    },
                )?;
            }
            Ok(None)
        }
        Err(e) => {
            let message = e.to_string();
            writer.push(
                EventKind::Outcome,
                &SessionOutcome {
                    outcome: None,
                    failure: Some(message.clone()),
                },
            )?;
            Ok(Some(message))
        }
    }
}

/// Runs every planned session that has no outcome yet (failed sessions are
/// retried). Completed sessions are never touched, so re-running is
/// idempotent and an interrupted run can simply be restarted.
pub fn run_experiment(
    root: &Path,
    seller: &AgentSource,
    buyer: &AgentSource,
    resources: &Resources,
    options: RunOptions,
) -> Result<RunSummary, ExperimentError> {
    let (store, manifest) = ExperimentStore::open(root)?;
    let mut pending = Vec::new();
    let mut summary = RunSummary::default();
    for plan in &manifest.plan {
        match store.session_status(&plan.session_id)? {
            SessionStatus::Complete(SessionOutcome { outcome: Some(_), .. }) => summary.skipped += 1,
            _ => pending.push(plan),
        }
    }
    if let Some(limit) = options.limit {
        summary.remaining = pending.len().saturating_sub(limit);
        pending.truncate(limit);
    }
    let next = AtomicUsize::new(0);
    type Outcomes = Vec<(usize, Result<Option<String>, ExperimentError>)>;
    let results: Mutex<Outcomes> = Mutex::new(Vec::new());
    let workers = options.concurrency.max(1).min(pending.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(plan) = pending.get(i) else { break };
                let r = run_one(&store, &manifest, plan, seller, buyer, resources);
                results.lock().expect("results lock").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(i, _)| *i);
    for (i, r) in results {
        match r {
            Ok(None) => summary.completed += 1,
            Ok(Some(msg)) => summary.failed.push((pending[i].session_id.clone(), msg)),
            Err(e) => summary.failed.push((pending[i].session_id.clone(), e.to_string())),
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurveySummary {
    pub administered: usize,
    pub already_done: usize,
    pub not_eligible: usize,
    pub failed: Vec<(String, String)>,
}

/// Administers the questionnaire to both agents of every finished, eligible
/// session still missing a response.
pub fn survey_experiment(
    root: &Path,
    seller: &AgentSource,
    buyer: &AgentSource,
    resources: &Resources,
) -> Result<SurveySummary, ExperimentError> {
    let loaded = load_experiment(root)?;
    let (store, manifest) = ExperimentStore::open(root)?;
    let mut summary = SurveySummary::default();
    for plan in &manifest.plan {
        let Some(session) = loaded.sessions.get(&plan.session_id) else { continue };
        let Some(transcript) = session.transcript() else { continue };
        if !manifest.survey_policy.includes(&transcript.outcome) {
            summary.not_eligible += 1;
            continue;
        }
        let Some(scenario) = manifest.scenario(&plan.scenario_id) else { continue };
        for (role, src) in [(Role::Seller, seller), (Role::Buyer, buyer)] {
            if session.surveys.contains_key(&role) {
                summary.already_done += 1;
                continue;
            }
            let persona = persona_for(&manifest, plan, role, &resources.lexicon)?;
            let mut agent = src.build(role, scenario, plan.condition, &persona, &resources.templates);
            match administer(&transcript, agent.as_mut(), &resources.questionnaire, manifest.survey_policy) {
                Ok(resp) => {
                    let mut w = store.reopen_session(&plan.session_id)?;
                    w.push(EventKind::Survey, &resp)?;
                    summary.administered += 1;
                }
                Err(e) => summary.failed.push((format!("{}/{}", plan.session_id, role), e.to_string())),
            }
        }
    }
    Ok(summary)
}

/// Loads the store, analyzes it and writes the report files to `out`.
pub fn analyze_experiment(root: &Path, out: &Path) -> Result<AnalysisReport, ExperimentError> {
    let loaded = load_experiment(root)?;
    let report = analysis::analyze(&loaded.records);
    report.write(out)?;
    Ok(report)
}

pub fn resurvey_session(
    root: &Path,
    session_id: &str,
    role: Role,
    source: &AgentSource,
    resources: &Resources,
    times: usize,
) -> Result<ResurveyReport, ExperimentError> {
    let loaded = load_experiment(root)?;
    let session_err = |message: String| ExperimentError::Session {
        session_id: session_id.to_string(),
        message,
    };
    let session = loaded
        .sessions
        .get(session_id)
        .ok_or_else(|| session_err("not found in store".into()))?;
    let transcript = session.transcript().ok_or_else(|| session_err("session has no outcome".into()))?;
    let plan = &session.header.plan;
    let scenario = loaded
        .manifest
        .scenario(&plan.scenario_id)
        .ok_or_else(|| session_err("scenario missing from manifest".into()))?;
    let persona = persona_for(&loaded.manifest, plan, role, &resources.lexicon)?;
    let mut agent = source.build(role, scenario, plan.condition, &persona, &resources.templates);
    analysis::resurvey(&transcript, agent.as_mut(), role, &resources.questionnaire, times)
        .map_err(|e| session_err(e.to_string()))
}
