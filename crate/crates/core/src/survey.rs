//! The 16-item negotiation satisfaction questionnaire: administration, reply
//! parsing and aggregation into the four "Feeling About" dimensions.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, Role};
use crate::dialogue::{Outcome, Transcript};

pub const ITEM_COUNT: usize = 16;
pub const REVERSED_ITEMS: [usize; 2] = [3, 5];
/// Re-asks after the first unusable reply.
pub const MAX_REASKS: usize = 2;

pub const SESSION_INSTRUCTIONS: &str =
    "The negotiation has ended. How would you evaluate this negotiation? Please answer the following 16 questions.";

const ANSWER_FORMAT: &str = "Answer with exactly 16 lines of the form \"<question number>. <score>\", where each score is an integer from 1 to 7 on the question's scale, and nothing else.";

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("invalid questionnaire: {0}")]
    InvalidQuestionnaire(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unusable survey reply after {attempts} attempts: {reason}")]
    ParseFailure { attempts: usize, reason: String, last_reply: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("outcome {0} is not surveyed under the current policy")]
    NotEligible(&'static str),
    #[error("no responses to aggregate")]
    EmptySet,
    #[error("item {0} is outside 1..=16")]
    BadItem(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub question: String,
    /// Scale anchors keyed by "1", "4" and "7".
    pub scale: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub reversed_items: Vec<usize>,
    pub items: Vec<QuestionItem>,
}

impl Questionnaire {
    pub fn builtin() -> Self {
        Questionnaire::from_json(include_str!("../data/questionnaire.json")).expect("builtin questionnaire is valid")
    }

    pub fn load(path: &Path) -> Result<Self, SurveyError> {
        let text = std::fs::read_to_string(path).map_err(|source| SurveyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Questionnaire::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SurveyError> {
        let q: Questionnaire =
            serde_json::from_str(text).map_err(|e| SurveyError::InvalidQuestionnaire(e.to_string()))?;
        if q.items.len() != ITEM_COUNT {
            return Err(SurveyError::InvalidQuestionnaire(format!(
                "expected {ITEM_COUNT} items, found {}",
                q.items.len()
            )));
        }
        if q.reversed_items != REVERSED_ITEMS {
            return Err(SurveyError::InvalidQuestionnaire(format!(
                "reversed items must be {REVERSED_ITEMS:?}, found {:?}",
                q.reversed_items
            )));
        }
        if let Some(i) = q.items.iter().position(|it| it.question.trim().is_empty()) {
            return Err(SurveyError::InvalidQuestionnaire(format!("item {} has no question", i + 1)));
        }
        Ok(q)
    }

    /// The request document sent to an agent: instructions followed by the
    /// questions with their scale anchors, as JSON.
    pub fn request_text(&self, instructions: &str) -> String {
        let doc = serde_json::json!({
            "instructions": format!("{instructions} {ANSWER_FORMAT}"),
            "questions": self.items,
        });
        serde_json::to_string_pretty(&doc).expect("questionnaire serializes")
    }
}

impl Default for Questionnaire {
    fn default() -> Self {
        Questionnaire::builtin()
    }
}

/// Third-person evaluation request over a fixed transcript.
pub fn resurvey_request(transcript: &Transcript, role: Role, questionnaire: &Questionnaire) -> String {
    let log: Vec<String> = transcript
        .turns
        .iter()
        .map(|t| format!("{}: {}", t.role.as_str(), t.text))
        .collect();
    let instructions = format!(
        "The above conversation log is a record of a price negotiation. If you were the {}, how would you evaluate this negotiation? Please answer the following 16 questions.",
        role.as_str()
    );
    format!("{}\n\n{}", log.join("\n"), questionnaire.request_text(&instructions))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyPolicy {
    #[default]
    AcceptedOnly,
    All,
}

impl SurveyPolicy {
    pub fn includes(self, outcome: &Outcome) -> bool {
        match self {
            SurveyPolicy::All => true,
            SurveyPolicy::AcceptedOnly => matches!(outcome, Outcome::Accepted { .. }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub session_id: String,
    pub role: Role,
    /// Raw Likert answers; `scores[i]` answers item `i + 1`.
    pub scores: [u8; ITEM_COUNT],
}

impl SurveyResponse {
    pub fn new(session_id: impl Into<String>, role: Role, scores: [u8; ITEM_COUNT]) -> Result<Self, String> {
        if let Some(i) = scores.iter().position(|s| !(1..=7).contains(s)) {
            return Err(format!("item {} has score {} outside 1..=7", i + 1, scores[i]));
        }
        Ok(SurveyResponse {
            session_id: session_id.into(),
            role,
            scores,
        })
    }

    pub fn item(&self, item: usize) -> u8 {
        self.scores[item - 1]
    }
}

static NUMBERED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?im)^\s*(?:q(?:uestion)?\s*)?(\d{1,2})\s*[.):\-]\s*(.*)$").expect("numbered regex")
});
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").expect("number regex"));

fn score_from(token: &str) -> Result<u8, String> {
    match token.parse::<u8>() {
        Ok(v) if (1..=7).contains(&v) => Ok(v),
        _ => Err(format!("{token:?} is not an integer from 1 to 7")),
    }
}

/// Accepts either 16 numbered lines (`1. 5`, `Q2: 6`, `3) 2`) or a bare list
/// of 16 integers. Every score must be an integer in 1..=7.
pub fn parse_survey_reply(reply: &str) -> Result<[u8; ITEM_COUNT], String> {
    let mut numbered: BTreeMap<usize, String> = BTreeMap::new();
    for caps in NUMBERED.captures_iter(reply) {
        let idx: usize = caps[1].parse().unwrap_or(0);
        if let Some(last) = NUMBER.find_iter(&caps[2]).last() {
            if (1..=ITEM_COUNT).contains(&idx) && !numbered.contains_key(&idx) {
                numbered.insert(idx, last.as_str().to_string());
            }
        }
    }
    let tokens: Vec<String> = if numbered.len() == ITEM_COUNT {
        numbered.into_values().collect()
    } else {
        NUMBER.find_iter(reply).map(|m| m.as_str().to_string()).collect()
    };
    if tokens.len() != ITEM_COUNT {
        return Err(format!("expected {ITEM_COUNT} scores, found {}", tokens.len()));
    }
    let mut scores = [0u8; ITEM_COUNT];
    for (slot, tok) in scores.iter_mut().zip(&tokens) {
        *slot = score_from(tok)?;
    }
    Ok(scores)
}

/// Asks `agent` the questionnaire after the session, re-asking up to
/// [`MAX_REASKS`] times when the reply cannot be parsed.
pub fn administer(
    transcript: &Transcript,
    agent: &mut dyn Agent,
    questionnaire: &Questionnaire,
    policy: SurveyPolicy,
) -> Result<SurveyResponse, SurveyError> {
    if !policy.includes(&transcript.outcome) {
        return Err(SurveyError::NotEligible(transcript.outcome.label()));
    }
    let request = questionnaire.request_text(SESSION_INSTRUCTIONS);
    ask_until_valid(&transcript.session_id, agent.role(), |_| agent.answer(&transcript.turns, &request))
}

pub(crate) fn ask_until_valid(
    session_id: &str,
    role: Role,
    mut ask: impl FnMut(usize) -> Result<String, AgentError>,
) -> Result<SurveyResponse, SurveyError> {
    let mut last_reply = String::new();
    let mut reason = String::new();
    for attempt in 0..=MAX_REASKS {
        last_reply = ask(attempt)?;
        match parse_survey_reply(&last_reply) {
            Ok(scores) => {
                return Ok(SurveyResponse {
                    session_id: session_id.to_string(),
                    role,
                    scores,
                })
            }
            Err(e) => {
                log::debug!("survey reply for {session_id}/{role} rejected: {e}");
                reason = e;
            }
        }
    }
    Err(SurveyError::ParseFailure {
        attempts: MAX_REASKS + 1,
        reason,
        last_reply,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatisfactionDimension {
    Outcome,
    #[serde(rename = "self")]
    Self_,
    Process,
    Relationship,
}

impl SatisfactionDimension {
    pub const ALL: [SatisfactionDimension; 4] = [
        SatisfactionDimension::Outcome,
        SatisfactionDimension::Self_,
        SatisfactionDimension::Process,
        SatisfactionDimension::Relationship,
    ];

    /// 1-based item numbers belonging to the dimension.
    pub fn items(self) -> [usize; 4] {
        let base = match self {
            SatisfactionDimension::Outcome => 1,
            SatisfactionDimension::Self_ => 5,
            SatisfactionDimension::Process => 9,
            SatisfactionDimension::Relationship => 13,
        };
        [base, base + 1, base + 2, base + 3]
    }

    pub fn name(self) -> &'static str {
        match self {
            SatisfactionDimension::Outcome => "outcome",
            SatisfactionDimension::Self_ => "self",
            SatisfactionDimension::Process => "process",
            SatisfactionDimension::Relationship => "relationship",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            SatisfactionDimension::Outcome => "Feeling About the Outcome",
            SatisfactionDimension::Self_ => "Feeling About the Self",
            SatisfactionDimension::Process => "Feeling About the Process",
            SatisfactionDimension::Relationship => "Feeling About the Relationship",
        }
    }

    /// Exact attainable range of the dimension score for Likert inputs.
    pub fn bounds(self) -> (f64, f64) {
        let reversed = self.items().iter().filter(|i| REVERSED_ITEMS.contains(i)).count() as f64;
        let direct = 4.0 - reversed;
        ((direct * 1.0 + reversed * 0.0) / 4.0, (direct * 7.0 + reversed * 6.0) / 4.0)
    }
}

impl fmt::Display for SatisfactionDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores {
    pub outcome: f64,
    #[serde(rename = "self")]
    pub self_: f64,
    pub process: f64,
    pub relationship: f64,
}

impl DimensionScores {
    pub fn get(&self, dim: SatisfactionDimension) -> f64 {
        match dim {
            SatisfactionDimension::Outcome => self.outcome,
            SatisfactionDimension::Self_ => self.self_,
            SatisfactionDimension::Process => self.process,
            SatisfactionDimension::Relationship => self.relationship,
        }
    }

    fn from_fn(mut f: impl FnMut(SatisfactionDimension) -> f64) -> Self {
        DimensionScores {
            outcome: f(SatisfactionDimension::Outcome),
            self_: f(SatisfactionDimension::Self_),
            process: f(SatisfactionDimension::Process),
            relationship: f(SatisfactionDimension::Relationship),
        }
    }
}

/// `7 - x` for reversed items, `x` otherwise.
pub fn adjusted(item: usize, value: f64) -> f64 {
    if REVERSED_ITEMS.contains(&item) {
        7.0 - value
    } else {
        value
    }
}

/// Combines 16 per-item values (raw answers or item means) into dimensions.
pub fn dimensions_from_items(values: &[f64; ITEM_COUNT]) -> DimensionScores {
    DimensionScores::from_fn(|dim| dim.items().iter().map(|&i| adjusted(i, values[i - 1])).sum::<f64>() / 4.0)
}

pub fn aggregate_response(resp: &SurveyResponse) -> DimensionScores {
    let values = resp.scores.map(f64::from);
    dimensions_from_items(&values)
}

/// Mean raw answer to `item` (1-based) over `responses`.
pub fn aggregate_over_runs(responses: &[SurveyResponse], item: usize) -> Result<f64, SurveyError> {
    if !(1..=ITEM_COUNT).contains(&item) {
        return Err(SurveyError::BadItem(item));
    }
    if responses.is_empty() {
        return Err(SurveyError::EmptySet);
    }
    let total: f64 = responses.iter().map(|r| f64::from(r.item(item))).sum();
    Ok(total / responses.len() as f64)
}

/// Item means over all responses, in item order.
pub fn item_means(responses: &[SurveyResponse]) -> Result<[f64; ITEM_COUNT], SurveyError> {
    let mut out = [0.0; ITEM_COUNT];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = aggregate_over_runs(responses, i + 1)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ScriptedAgent;
    use proptest::prelude::*;

    const BASELINE_BUYER: [u8; 16] = [5, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5, 5];

    fn resp(scores: [u8; 16]) -> SurveyResponse {
        SurveyResponse::new("s", Role::Buyer, scores).unwrap()
    }

    #[test]
    fn builtin_questionnaire() {
        let q = Questionnaire::builtin();
        assert_eq!(q.items.len(), 16);
        assert_eq!(q.reversed_items, vec![3, 5]);
        assert!(q.items[0].question.starts_with("How satisfied are you with your own outcome"));
        assert_eq!(q.items[0].scale["7"], "Perfectly satisfied");
        let req = q.request_text(SESSION_INSTRUCTIONS);
        let doc: serde_json::Value = serde_json::from_str(&req).unwrap();
        assert_eq!(doc["questions"].as_array().unwrap().len(), 16);
    }

    #[test]
    fn rejects_bad_questionnaires() {
        let mut q = Questionnaire::builtin();
        q.items.pop();
        assert!(Questionnaire::from_json(&serde_json::to_string(&q).unwrap()).is_err());
        let mut q = Questionnaire::builtin();
        q.reversed_items = vec![3];
        assert!(Questionnaire::from_json(&serde_json::to_string(&q).unwrap()).is_err());
    }

    #[test]
    fn parses_comma_list() {
        let s = parse_survey_reply("5, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5, 5").unwrap();
        assert_eq!(s, BASELINE_BUYER);
        let numbered: String = BASELINE_BUYER
            .iter()
            .enumerate()
            .map(|(i, v)| format!("Q{}: {}\n", i + 1, v))
            .collect();
        assert_eq!(parse_survey_reply(&format!("Here you go:\n{numbered}")).unwrap(), BASELINE_BUYER);
        // numbered lines in scrambled order map by number
        let mut lines: Vec<String> = BASELINE_BUYER.iter().enumerate().map(|(i, v)| format!("{}. {}", i + 1, v)).collect();
        lines.reverse();
        assert_eq!(parse_survey_reply(&lines.join("\n")).unwrap(), BASELINE_BUYER);
    }

    #[test]
    fn rejects_bad_replies() {
        assert!(parse_survey_reply("5, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5, 8").is_err());
        assert!(parse_survey_reply("5, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5").is_err());
        assert!(parse_survey_reply("5.5, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5, 5").is_err());
        assert!(parse_survey_reply("0, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5, 5").is_err());
    }

    fn accepted_transcript() -> Transcript {
        use crate::agents::Condition;
        use crate::persona::{PersonalityProfile, TraitSetting};
        Transcript {
            session_id: "apt.i0.baseline".into(),
            scenario_id: "apt".into(),
            condition: Condition::Baseline,
            seller_persona: PersonalityProfile::new([TraitSetting::ALL[0]; 5]),
            buyer_persona: PersonalityProfile::new([TraitSetting::ALL[5]; 5]),
            turns: vec![],
            outcome: Outcome::Accepted { final_price: "2150".parse().unwrap() },
        }
    }

    #[test]
    fn administer_reasks_then_fails() {
        let t = accepted_transcript();
        let bad = "5, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5, 8".to_string();
        let good = "5, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5, 5".to_string();
        let mut agent = ScriptedAgent::new(Role::Buyer, vec![]).with_answers(vec![bad.clone(), bad.clone(), good]);
        let r = administer(&t, &mut agent, &Questionnaire::builtin(), SurveyPolicy::AcceptedOnly).unwrap();
        assert_eq!(r.scores, BASELINE_BUYER);
        assert_eq!(r.session_id, "apt.i0.baseline");

        let mut agent = ScriptedAgent::new(Role::Buyer, vec![]).with_answers(vec![bad]);
        let err = administer(&t, &mut agent, &Questionnaire::builtin(), SurveyPolicy::AcceptedOnly).unwrap_err();
        assert!(matches!(err, SurveyError::ParseFailure { attempts: 3, .. }));

        let mut broken = accepted_transcript();
        broken.outcome = Outcome::Broken;
        let mut agent = ScriptedAgent::new(Role::Buyer, vec![]).with_answers(vec!["1".into()]);
        assert!(matches!(
            administer(&broken, &mut agent, &Questionnaire::builtin(), SurveyPolicy::AcceptedOnly),
            Err(SurveyError::NotEligible("broken"))
        ));
    }

    #[test]
    fn transcript_vector_dimensions() {
        let d = aggregate_response(&resp(BASELINE_BUYER));
        assert_eq!((d.outcome, d.self_, d.process, d.relationship), (5.25, 5.75, 5.25, 5.0));
    }

    #[test]
    fn constant_vectors() {
        let d = aggregate_response(&resp([4; 16]));
        assert_eq!((d.outcome, d.self_, d.process, d.relationship), (3.75, 3.75, 4.0, 4.0));
        let d = aggregate_response(&resp([7; 16]));
        assert_eq!((d.outcome, d.self_, d.process, d.relationship), (5.25, 5.25, 7.0, 7.0));
    }

    #[test]
    fn bounds() {
        assert_eq!(SatisfactionDimension::Outcome.bounds(), (0.75, 6.75));
        assert_eq!(SatisfactionDimension::Self_.bounds(), (0.75, 6.75));
        assert_eq!(SatisfactionDimension::Process.bounds(), (1.0, 7.0));
        assert_eq!(SatisfactionDimension::Relationship.bounds(), (1.0, 7.0));
        let mut lo = [1u8; 16];
        lo[2] = 7;
        lo[4] = 7;
        let d = aggregate_response(&resp(lo));
        assert_eq!((d.outcome, d.self_), (0.75, 0.75));
    }

    #[test]
    fn run_means() {
        let rs = vec![resp([5; 16]), resp([6; 16]), resp([7; 16])];
        assert_eq!(aggregate_over_runs(&rs, 1).unwrap(), 6.0);
        assert_eq!(aggregate_over_runs(&rs[..1], 16).unwrap(), 5.0);
        assert!(matches!(aggregate_over_runs(&[], 1), Err(SurveyError::EmptySet)));
        assert!(matches!(aggregate_over_runs(&rs, 17), Err(SurveyError::BadItem(17))));
    }

    #[test]
    fn resurvey_prompt_frames_third_person() {
        let mut t = accepted_transcript();
        t.turns.push(crate::dialogue::AnnotatedTurn {
            index: 1,
            role: Role::Seller,
            text: "Hi, how can I help you?".into(),
            state: crate::dialogue::NegotiationState::ChitChat,
            price: None,
            declared: false,
        });
        let text = resurvey_request(&t, Role::Buyer, &Questionnaire::builtin());
        assert!(text.starts_with("seller: Hi, how can I help you?\n\n"));
        assert!(text.contains("If you were the buyer, how would you evaluate this negotiation?"));
    }

    fn scores() -> impl Strategy<Value = [u8; 16]> {
        prop::array::uniform16(1u8..=7)
    }

    proptest! {
        #[test]
        fn reversal_is_an_involution(v in 1u8..=7, item in 1usize..=16) {
            let x = f64::from(v);
            prop_assert_eq!(adjusted(item, adjusted(item, x)), x);
        }

        #[test]
        fn dimensions_within_attainable_bounds(s in scores()) {
            let d = aggregate_response(&resp(s));
            for dim in SatisfactionDimension::ALL {
                let (lo, hi) = dim.bounds();
                prop_assert!(d.get(dim) >= lo && d.get(dim) <= hi);
            }
        }

        #[test]
        fn averaging_order_does_not_matter(runs in prop::collection::vec(scores(), 1..30), seed in any::<u64>()) {
            let rs: Vec<SurveyResponse> = runs.iter().map(|s| resp(*s)).collect();
            let via_items = dimensions_from_items(&item_means(&rs).unwrap());
            let per_run: Vec<DimensionScores> = rs.iter().map(aggregate_response).collect();
            for dim in SatisfactionDimension::ALL {
                let mean = per_run.iter().map(|d| d.get(dim)).sum::<f64>() / per_run.len() as f64;
                prop_assert!((mean - via_items.get(dim)).abs() < 1e-9);
            }
            let mut shuffled = rs.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            for item in 1..=16 {
                let a = aggregate_over_runs(&rs, item).unwrap();
                let b = aggregate_over_runs(&shuffled, item).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
