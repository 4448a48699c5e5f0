//! Append-only experiment store.
//!
//! Layout: `<exp>/manifest` holds one manifest line and
//! `<exp>/sessions/<session_id>.events` holds each session's events. Every line
//! is `<crc32 hex> <json>`; a torn final line is tolerated on read, a bad line
//! anywhere else is corruption.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{PolicyParams, Role};
use crate::analysis::{RunRecord, Utilities};
use crate::catalog::{Scenario, SessionPlan};
use crate::dialogue::{AnnotatedTurn, Outcome, Transcript};
use crate::persona::{trait_score, Dimension};
use crate::survey::{SurveyPolicy, SurveyResponse};
use crate::transport::Scalar;

pub const MANIFEST_FILE: &str = "manifest";
pub const SESSIONS_DIR: &str = "sessions";
pub const EVENTS_EXT: &str = "events";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt store line: {reason}")]
    CorruptStore { path: String, line: usize, reason: String },
    #[error("session {session_id}: sequence {got} does not follow {last}")]
    SequenceViolation { session_id: String, last: u64, got: u64 },
    #[error("{path}: no manifest; run plan first")]
    MissingManifest { path: String },
    #[error("{path}: manifest differs from the existing one and sessions are already recorded")]
    ManifestMismatch { path: String },
    #[error("event for session {got} written to session {expected}")]
    WrongSession { expected: String, got: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Manifest,
    Turn,
    Outcome,
    Survey,
    Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLine {
    pub seq: u64,
    pub session_id: String,
    pub kind: EventKind,
    pub payload: Value,
}

impl EventLine {
    pub fn new<T: Serialize>(seq: u64, session_id: &str, kind: EventKind, payload: &T) -> Self {
        EventLine {
            seq,
            session_id: session_id.to_string(),
            kind,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }

    pub fn decode<T: DeserializeOwned>(&self) -> Result<T, serde_json::Error> {
        serde_json::from_value(self.payload.clone())
    }
}

pub fn encode_line(event: &EventLine) -> String {
    let json = serde_json::to_string(event).expect("event serializes");
    format!("{:08x} {}\n", crc32fast::hash(json.as_bytes()), json)
}

fn decode_line(line: &str) -> Result<EventLine, String> {
    let (sum, json) = line.split_once(' ').ok_or("missing checksum separator")?;
    let expected = u32::from_str_radix(sum, 16).map_err(|_| format!("bad checksum field {sum:?}"))?;
    if sum.len() != 8 || crc32fast::hash(json.as_bytes()) != expected {
        return Err("checksum mismatch".into());
    }
    serde_json::from_str(json).map_err(|e| e.to_string())
}

/// Events from one file plus warnings about a torn tail.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub events: Vec<EventLine>,
    pub warnings: Vec<String>,
    /// Byte length of the valid prefix.
    pub valid_len: u64,
}

pub fn read_events(path: &Path) -> Result<EventLog, StoreError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let end = bytes[offset..].iter().position(|&b| b == b'\n').map(|p| offset + p);
        let is_last = match end {
            None => true,
            Some(e) => e + 1 == bytes.len(),
        };
        let raw = &bytes[offset..end.unwrap_or(bytes.len())];
        let parsed = std::str::from_utf8(raw)
            .map_err(|e| e.to_string())
            .and_then(decode_line);
        match (parsed, end) {
            (Ok(ev), Some(e)) => {
                events.push(ev);
                offset = e + 1;
            }
            (result, _) if is_last => {
                let reason = match result {
                    Ok(_) => "missing newline".to_string(),
                    Err(e) => e,
                };
                warnings.push(format!("{}:{}: ignoring torn final line ({reason})", path.display(), line_no));
                break;
            }
            (Err(reason), _) => {
                return Err(StoreError::CorruptStore {
                    path: path.display().to_string(),
                    line: line_no,
                    reason,
                })
            }
            (Ok(_), None) => unreachable!("a line without newline is the last line"),
        }
    }
    Ok(EventLog {
        events,
        warnings,
        valid_len: offset as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendDescriptor {
    Scripted { params: PolicyParams },
    Chat {
        /// `http`, `record` or `replay`.
        mode: String,
        adapter: String,
        model_id: String,
        temperature: f64,
        #[serde(default)]
        extra_params: BTreeMap<String, Scalar>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment_id: String,
    pub master_seed: u64,
    pub catalog_digest: String,
    pub conditions: Vec<crate::agents::Condition>,
    pub per_product: u32,
    pub t_max: usize,
    pub n_adjectives: usize,
    pub seller_backend: BackendDescriptor,
    pub buyer_backend: BackendDescriptor,
    pub template_digest: String,
    pub lexicon_digest: String,
    pub questionnaire_digest: String,
    pub survey_policy: SurveyPolicy,
    pub scenarios: Vec<Scenario>,
    pub plan: Vec<SessionPlan>,
}

impl RunManifest {
    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn sessions_per_condition(&self) -> BTreeMap<crate::agents::Condition, usize> {
        let mut out = BTreeMap::new();
        for p in &self.plan {
            *out.entry(p.condition).or_insert(0) += 1;
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// First event of every session file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub plan: SessionPlan,
    pub seller_persona_text: String,
    pub buyer_persona_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub outcome: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub struct SessionWriter {
    path: PathBuf,
    session_id: String,
    file: File,
    last_seq: Option<u64>,
}

impl SessionWriter {
    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn next_seq(&self) -> u64 {
        self.last_seq.map_or(0, |s| s + 1)
    }

    /// Appends one event; sequence numbers must strictly increase.
    pub fn append(&mut self, event: &EventLine) -> Result<(), StoreError> {
        if event.session_id != self.session_id {
            return Err(StoreError::WrongSession {
                expected: self.session_id.clone(),
                got: event.session_id.clone(),
            });
        }
        if let Some(last) = self.last_seq {
            if event.seq <= last {
                return Err(StoreError::SequenceViolation {
                    session_id: self.session_id.clone(),
                    last,
                    got: event.seq,
                });
            }
        }
        self.file
            .write_all(encode_line(event).as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(io_err(&self.path))?;
        self.last_seq = Some(event.seq);
        Ok(())
    }

    pub fn push<T: Serialize>(&mut self, kind: EventKind, payload: &T) -> Result<u64, StoreError> {
        let seq = self.next_seq();
        let event = EventLine::new(seq, &self.session_id, kind, payload);
        self.append(&event)?;
        Ok(seq)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionStatus {
    Missing,
    /// File exists without an outcome event.
    Incomplete,
    Complete(SessionOutcome),
}

pub struct ExperimentStore {
    root: PathBuf,
}

impl ExperimentStore {
    /// Creates the experiment directory and writes the manifest. An existing
    /// identical manifest is accepted; a different one is replaced only while
    /// no session has been recorded.
    pub fn create(root: &Path, manifest: &RunManifest) -> Result<Self, StoreError> {
        let store = ExperimentStore { root: root.to_path_buf() };
        let sessions = store.sessions_dir();
        std::fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        let path = store.manifest_path();
        if path.exists() {
            let existing = store.manifest()?;
            if &existing == manifest {
                return Ok(store);
            }
            if store.has_sessions()? {
                return Err(StoreError::ManifestMismatch {
                    path: path.display().to_string(),
                });
            }
        }
        let line = encode_line(&EventLine::new(0, "", EventKind::Manifest, manifest));
        let tmp = root.join("manifest.tmp");
        std::fs::write(&tmp, line).map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(store)
    }

    pub fn open(root: &Path) -> Result<(Self, RunManifest), StoreError> {
        let store = ExperimentStore { root: root.to_path_buf() };
        let manifest = store.manifest()?;
        Ok((store, manifest))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.root.join(SESSIONS_DIR)
    }

    pub fn session_path(&self, session_id: &str) -> PathBuf {
        self.sessions_dir().join(format!("{session_id}.{EVENTS_EXT}"))
    }

    pub fn manifest(&self) -> Result<RunManifest, StoreError> {
        let path = self.manifest_path();
        if !path.exists() {
            return Err(StoreError::MissingManifest {
                path: self.root.display().to_string(),
            });
        }
        let log = read_events(&path)?;
        let invalid = |message: String| StoreError::Invalid {
            path: path.display().to_string(),
            message,
        };
        let event = log
            .events
            .first()
            .filter(|e| e.kind == EventKind::Manifest)
            .ok_or_else(|| invalid("no manifest event".into()))?;
        event.decode().map_err(|e| invalid(e.to_string()))
    }

    fn has_sessions(&self) -> Result<bool, StoreError> {
        let dir = self.sessions_dir();
        let mut entries = std::fs::read_dir(&dir).map_err(io_err(&dir))?;
        Ok(entries.next().is_some())
    }

    pub fn session_status(&self, session_id: &str) -> Result<SessionStatus, StoreError> {
        let path = self.session_path(session_id);
        if !path.exists() {
            return Ok(SessionStatus::Missing);
        }
        let log = read_events(&path)?;
        for ev in &log.events {
            if ev.kind == EventKind::Outcome {
                let outcome = ev.decode().map_err(|e| StoreError::Invalid {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                return Ok(SessionStatus::Complete(outcome));
            }
        }
        Ok(SessionStatus::Incomplete)
    }

    /// Starts a session file from scratch, discarding any incomplete one.
    pub fn start_session(&self, session_id: &str) -> Result<SessionWriter, StoreError> {
        let path = self.session_path(session_id);
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(SessionWriter {
            path,
            session_id: session_id.to_string(),
            file,
            last_seq: None,
        })
    }

    /// Reopens an existing session for further appends, trimming a torn tail.
    pub fn reopen_session(&self, session_id: &str) -> Result<SessionWriter, StoreError> {
        let path = self.session_path(session_id);
        let log = read_events(&path)?;
        let file = OpenOptions::new().write(true).open(&path).map_err(io_err(&path))?;
        file.set_len(log.valid_len).map_err(io_err(&path))?;
        drop(file);
        let file = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
        Ok(SessionWriter {
            path,
            session_id: session_id.to_string(),
            file,
            last_seq: log.events.last().map(|e| e.seq),
        })
    }

    pub fn read_session(&self, session_id: &str) -> Result<EventLog, StoreError> {
        read_events(&self.session_path(session_id))
    }
}

/// A session reconstructed from its events.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub header: SessionHeader,
    pub turns: Vec<AnnotatedTurn>,
    pub outcome: Option<SessionOutcome>,
    pub utilities: Option<Utilities>,
    pub surveys: BTreeMap<Role, SurveyResponse>,
}

impl StoredSession {
    pub fn from_log(path: &Path, log: &EventLog) -> Result<Self, StoreError> {
        let invalid = |message: String| StoreError::Invalid {
            path: path.display().to_string(),
            message,
        };
        let mut last: Option<u64> = None;
        let mut header = None;
        let mut turns = Vec::new();
        let mut outcome = None;
        let mut utilities = None;
        let mut surveys = BTreeMap::new();
        for ev in &log.events {
            if let Some(l) = last {
                if ev.seq <= l {
                    return Err(StoreError::SequenceViolation {
                        session_id: ev.session_id.clone(),
                        last: l,
                        got: ev.seq,
                    });
                }
            }
            last = Some(ev.seq);
            let bad = |e: serde_json::Error| invalid(format!("seq {}: {e}", ev.seq));
            match ev.kind {
                EventKind::Manifest => header = Some(ev.decode::<SessionHeader>().map_err(bad)?),
                EventKind::Turn => turns.push(ev.decode::<AnnotatedTurn>().map_err(bad)?),
                EventKind::Outcome => outcome = Some(ev.decode::<SessionOutcome>().map_err(bad)?),
                EventKind::Metric => utilities = Some(ev.decode::<Utilities>().map_err(bad)?),
                EventKind::Survey => {
                    let r: SurveyResponse = ev.decode().map_err(bad)?;
                    surveys.insert(r.role, r);
                }
            }
        }
        let header = header.ok_or_else(|| invalid("missing session header".into()))?;
        Ok(StoredSession {
            header,
            turns,
            outcome,
            utilities,
            surveys,
        })
    }

    pub fn transcript(&self) -> Option<Transcript> {
        let outcome = self.outcome.as_ref()?.outcome.clone()?;
        let plan = &self.header.plan;
        Some(Transcript {
            session_id: plan.session_id.clone(),
            scenario_id: plan.scenario_id.clone(),
            condition: plan.condition,
            seller_persona: plan.seller_profile,
            buyer_persona: plan.buyer_profile,
            turns: self.turns.clone(),
            outcome,
        })
    }

    pub fn to_record(&self) -> Option<RunRecord> {
        let out = self.outcome.as_ref()?;
        let plan = &self.header.plan;
        let traits = |p: &crate::persona::PersonalityProfile| -> BTreeMap<Dimension, i8> {
            Dimension::ALL.iter().map(|&d| (d, trait_score(p, d))).collect()
        };
        let accepted = matches!(out.outcome, Some(Outcome::Accepted { .. }));
        Some(RunRecord {
            session_id: plan.session_id.clone(),
            scenario_id: plan.scenario_id.clone(),
            iteration: plan.iteration,
            condition: plan.condition,
            outcome: out.outcome.clone(),
            failure: out.failure.clone(),
            utilities: if accepted { self.utilities } else { None },
            surveys: self.surveys.clone(),
            buyer_traits: traits(&plan.buyer_profile),
            seller_traits: traits(&plan.seller_profile),
        })
    }
}

#[derive(Debug, Clone)]
pub struct LoadedExperiment {
    pub manifest: RunManifest,
    /// Completed sessions in plan order.
    pub records: Vec<RunRecord>,
    pub sessions: HashMap<String, StoredSession>,
    pub warnings: Vec<String>,
}

/// Reconstructs every completed session listed in the manifest plan.
pub fn load_experiment(root: &Path) -> Result<LoadedExperiment, StoreError> {
    let (store, manifest) = ExperimentStore::open(root)?;
    let mut records = Vec::new();
    let mut sessions = HashMap::new();
    let mut warnings = Vec::new();
    for plan in &manifest.plan {
        let path = store.session_path(&plan.session_id);
        if !path.exists() {
            continue;
        }
        let log = read_events(&path)?;
        warnings.extend(log.warnings.iter().cloned());
        if log.events.is_empty() {
            continue;
        }
        let session = StoredSession::from_log(&path, &log)?;
        if let Some(r) = session.to_record() {
            records.push(r);
        }
        sessions.insert(plan.session_id.clone(), session);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(LoadedExperiment {
        manifest,
        records,
        sessions,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Condition;
    use crate::dialogue::NegotiationState;
    use crate::persona::{PersonalityProfile, TraitSetting};

    fn plan(id: &str) -> SessionPlan {
        SessionPlan {
            session_id: id.into(),
            scenario_id: "apt".into(),
            iteration: 0,
            condition: Condition::Baseline,
            seller_profile: PersonalityProfile::new([TraitSetting::ALL[1]; 5]),
            buyer_profile: PersonalityProfile::new([TraitSetting::ALL[4]; 5]),
        }
    }

    fn manifest(plans: Vec<SessionPlan>) -> RunManifest {
        RunManifest {
            experiment_id: "exp".into(),
            master_seed: 7,
            catalog_digest: "abc".into(),
            conditions: vec![Condition::Baseline],
            per_product: 1,
            t_max: 20,
            n_adjectives: 3,
            seller_backend: BackendDescriptor::Scripted { params: PolicyParams::default() },
            buyer_backend: BackendDescriptor::Scripted { params: PolicyParams::default() },
            template_digest: "t".into(),
            lexicon_digest: "l".into(),
            questionnaire_digest: "q".into(),
            survey_policy: SurveyPolicy::AcceptedOnly,
            scenarios: vec![],
            plan: plans,
        }
    }

    fn header(id: &str) -> SessionHeader {
        SessionHeader {
            plan: plan(id),
            seller_persona_text: "kind".into(),
            buyer_persona_text: "bold".into(),
        }
    }

    fn turn(index: usize, text: &str) -> AnnotatedTurn {
        AnnotatedTurn {
            index,
            role: if index % 2 == 1 { Role::Seller } else { Role::Buyer },
            text: text.into(),
            state: NegotiationState::Offer,
            price: Some("2750".parse().unwrap()),
            declared: false,
        }
    }

    #[test]
    fn line_round_trip_and_checksum() {
        let ev = EventLine::new(3, "s", EventKind::Turn, &turn(1, "x"));
        let line = encode_line(&ev);
        assert!(line.ends_with('\n'));
        assert_eq!(decode_line(line.trim_end()).unwrap(), ev);
        let flipped = line.replacen("2750", "2751", 1);
        assert!(decode_line(flipped.trim_end()).is_err());
    }

    #[test]
    fn empty_experiment_has_no_records() {
        let dir = tempfile::tempdir().unwrap();
        ExperimentStore::create(dir.path(), &manifest(vec![plan("a")])).unwrap();
        let loaded = load_experiment(dir.path()).unwrap();
        assert!(loaded.records.is_empty());
        assert_eq!(loaded.manifest.plan.len(), 1);
        assert!(matches!(
            load_experiment(&dir.path().join("nope")),
            Err(StoreError::MissingManifest { .. })
        ));
    }

    #[test]
    fn sequence_violation() {
        let dir = tempfile::tempdir().unwrap();
        let store = ExperimentStore::create(dir.path(), &manifest(vec![plan("a")])).unwrap();
        let mut w = store.start_session("a").unwrap();
        w.append(&EventLine::new(0, "a", EventKind::Manifest, &header("a"))).unwrap();
        w.append(&EventLine::new(1, "a", EventKind::Turn, &turn(1, "x"))).unwrap();
        let err = w.append(&EventLine::new(1, "a", EventKind::Turn, &turn(2, "y"))).unwrap_err();
        assert!(matches!(err, StoreError::SequenceViolation { last: 1, got: 1, .. }));
        assert!(matches!(
            w.append(&EventLine::new(5, "b", EventKind::Turn, &turn(2, "y"))),
            Err(StoreError::WrongSession { .. })
        ));
    }

    #[test]
    fn unicode_and_dollar_text_round_trips_exactly() {
        let text = "Absolutely! I\u{2019}m glad you\u{2019}re interested. It\u{2019}s priced at \\$2,750 \u{2014} a \u{201c}steal\u{201d}.";
        let dir = tempfile::tempdir().unwrap();
        let store = ExperimentStore::create(dir.path(), &manifest(vec![plan("a")])).unwrap();
        let mut w = store.start_session("a").unwrap();
        w.push(EventKind::Manifest, &header("a")).unwrap();
        w.push(EventKind::Turn, &turn(1, text)).unwrap();
        let done = SessionOutcome {
            outcome: Some(Outcome::Accepted { final_price: "2750".parse().unwrap() }),
            failure: None,
        };
        w.push(EventKind::Outcome, &done).unwrap();
        w.push(EventKind::Metric, &Utilities { seller: 0.5, buyer: 4.0 / 7.0 - 0.5 }).unwrap();
        w.push(EventKind::Survey, &SurveyResponse::new("a", Role::Buyer, [4; 16]).unwrap()).unwrap();
        let loaded = load_experiment(dir.path()).unwrap();
        let s = &loaded.sessions["a"];
        assert_eq!(s.turns[0].text, text);
        assert_eq!(s.header, header("a"));
        assert_eq!(s.surveys[&Role::Buyer].scores, [4; 16]);
        let r = &loaded.records[0];
        assert!(r.is_accepted());
        assert_eq!(r.utilities.unwrap().seller, 0.5);
        assert_eq!(r.buyer_traits[&Dimension::Ope], TraitSetting::ALL[4].score());
        assert!(matches!(store.session_status("a").unwrap(), SessionStatus::Complete(_)));
        assert_eq!(store.session_status("zzz").unwrap(), SessionStatus::Missing);
    }

    #[test]
    fn torn_tail_is_a_warning_and_mid_file_corruption_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let store = ExperimentStore::create(dir.path(), &manifest(vec![plan("a")])).unwrap();
        let mut w = store.start_session("a").unwrap();
        w.push(EventKind::Manifest, &header("a")).unwrap();
        w.push(EventKind::Turn, &turn(1, "one")).unwrap();
        drop(w);
        let path = store.session_path("a");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"deadbeef {\"seq\":2,\"sess").unwrap();
        drop(f);
        let log = read_events(&path).unwrap();
        assert_eq!(log.events.len(), 2);
        assert_eq!(log.warnings.len(), 1);
        assert_eq!(store.session_status("a").unwrap(), SessionStatus::Incomplete);

        // reopening trims the torn tail and continues the sequence
        let mut w = store.reopen_session("a").unwrap();
        assert_eq!(w.next_seq(), 2);
        w.push(EventKind::Turn, &turn(2, "two")).unwrap();
        let log = read_events(&path).unwrap();
        assert_eq!((log.events.len(), log.warnings.len()), (3, 0));

        let text = std::fs::read_to_string(&path).unwrap();
        let corrupted = text.replacen("one", "0ne", 1);
        std::fs::write(&path, corrupted).unwrap();
        assert!(matches!(read_events(&path), Err(StoreError::CorruptStore { line: 2, .. })));
    }

    #[test]
    fn appends_never_rewrite_earlier_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let store = ExperimentStore::create(dir.path(), &manifest(vec![plan("a")])).unwrap();
        let mut w = store.start_session("a").unwrap();
        w.push(EventKind::Manifest, &header("a")).unwrap();
        let path = store.session_path("a");
        for i in 1..6 {
            let before = std::fs::read(&path).unwrap();
            w.push(EventKind::Turn, &turn(i, "t")).unwrap();
            let after = std::fs::read(&path).unwrap();
            assert_eq!(sha256_hex(&after[..before.len()]), sha256_hex(&before));
        }
    }

    #[test]
    fn manifest_is_immutable_once_sessions_exist() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(vec![plan("a")]);
        ExperimentStore::create(dir.path(), &m).unwrap();
        let mut other = m.clone();
        other.master_seed = 8;
        // no sessions yet: replacing is allowed
        let store = ExperimentStore::create(dir.path(), &other).unwrap();
        store.start_session("a").unwrap().push(EventKind::Manifest, &header("a")).unwrap();
        assert!(ExperimentStore::create(dir.path(), &other).is_ok());
        assert!(matches!(
            ExperimentStore::create(dir.path(), &m),
            Err(StoreError::ManifestMismatch { .. })
        ));
    }
}
