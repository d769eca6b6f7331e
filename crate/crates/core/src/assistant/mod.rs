//! One conversational turn: clarify or retrieve, generate, verify, fall back.

pub mod chat;
pub mod grounding;
pub mod prompt;
pub mod session;
pub mod stub;

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::corpus::PantryCorpus;
use crate::gazetteer::Gazetteer;
use crate::model::{ConstraintSet, FlagSet, GroundedResponse, PantryRecord, ResponseKind, RetrievalResult};
use crate::query::{extract_constraints, is_underspecified, merge_constraints};
use crate::retriever::{retrieve, RetrieveError, RetrieveRequest, DEFAULT_K};

pub use chat::{ChatClient, ChatConfig, ChatError, ChatMessage, HttpChatClient, Role};
pub use grounding::verify_grounding;
pub use prompt::{build_prompt, PromptRecord, CORRECTIVE_INSTRUCTION, NO_MATCH_MARKER, SYSTEM_PROMPT};
pub use session::{Session, SessionStore, TurnLogEntry};
pub use stub::{stub_complete, StubChatClient, NO_MATCH_SENTENCE};

pub const CLARIFICATION_QUESTION: &str = "Which city, county, or ZIP code should I search in?";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Answer,
    Clarify(String),
}

pub fn decide_action(cs: &ConstraintSet) -> Action {
    if is_underspecified(cs) {
        Action::Clarify(CLARIFICATION_QUESTION.to_string())
    } else {
        Action::Answer
    }
}

const STOP_WORDS: &[&str] = &[
    "a", "an", "the", "in", "at", "of", "for", "to", "on", "near", "me", "i", "can", "where", "what", "is", "are",
    "do", "does", "get", "find", "any", "some", "there", "please", "my", "we", "you",
];

/// Text embedded for semantic ranking: the raw query minus function words, so
/// that a clarified "Q" + "L" ranks like the single-turn "Q in L".
pub fn semantic_query_text(cs: &ConstraintSet) -> String {
    crate::vector::embed::tokenize(&cs.raw_query)
        .filter(|t| !STOP_WORDS.contains(&t.as_str()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// How the surfaced answer text was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationPath {
    /// Clarification turns involve no generation.
    None,
    /// First completion passed verification.
    Direct,
    /// The corrective retry passed verification.
    Corrected,
    /// Template output after failed verification or a provider error.
    Fallback,
}

#[derive(Debug, Clone, Serialize)]
pub struct CitedPantry {
    pub record: PantryRecord,
    pub flags: FlagSet,
}

#[derive(Debug, Clone, Serialize)]
pub struct TurnOutput {
    pub response: GroundedResponse,
    pub constraints: ConstraintSet,
    pub retrieval: Option<RetrievalResult>,
    pub path: GenerationPath,
    /// Violations found in drafts that were not surfaced.
    pub discarded_violations: Vec<String>,
    pub provider_error: Option<String>,
    pub cited: Vec<CitedPantry>,
}

pub struct Assistant {
    gazetteer: Arc<Gazetteer>,
    chat: Arc<dyn ChatClient>,
    k: usize,
}

impl Assistant {
    pub fn new(gazetteer: Arc<Gazetteer>, chat: Arc<dyn ChatClient>) -> Self {
        Assistant { gazetteer, chat, k: DEFAULT_K }
    }

    /// Stub generator with the bundled gazetteer.
    pub fn offline() -> Self {
        Self::new(Arc::new(Gazetteer::kansas()), Arc::new(StubChatClient))
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k.max(1);
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn chat(&self) -> &dyn ChatClient {
        self.chat.as_ref()
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn handle_turn(
        &self,
        session: &mut Session,
        query: &str,
        corpus: &PantryCorpus,
    ) -> Result<TurnOutput, RetrieveError> {
        self.handle_turn_at(session, query, corpus, Utc::now())
    }

    pub fn handle_turn_at(
        &self,
        session: &mut Session,
        query: &str,
        corpus: &PantryCorpus,
        now: DateTime<Utc>,
    ) -> Result<TurnOutput, RetrieveError> {
        let fresh = extract_constraints(query, &self.gazetteer);
        let cs = match &session.pending_constraints {
            Some(pending) => merge_constraints(pending, &fresh),
            None => fresh,
        };
        session.last_activity = now;

        if let Action::Clarify(question) = decide_action(&cs) {
            session.pending_constraints = Some(cs.clone());
            session.turns.push(TurnLogEntry { query: query.to_string(), kind: ResponseKind::Clarification });
            return Ok(TurnOutput {
                response: GroundedResponse {
                    kind: ResponseKind::Clarification,
                    text: question,
                    cited_ids: Vec::new(),
                    grounding_violations: Vec::new(),
                    session_id: session.session_id.clone(),
                },
                constraints: cs,
                retrieval: None,
                path: GenerationPath::None,
                discarded_violations: Vec::new(),
                provider_error: None,
                cited: Vec::new(),
            });
        }

        let semantic = semantic_query_text(&cs);
        let retrieval = retrieve(
            &RetrieveRequest { constraints: &cs, query: &semantic, k: self.k },
            corpus.records(),
            corpus.index(),
            corpus.provider(),
        )?;
        let hits: Vec<PromptRecord<'_>> = retrieval
            .hits
            .iter()
            .filter_map(|h| corpus.get(&h.pantry_id).map(|record| PromptRecord { record, flags: h.flags.clone() }))
            .collect();
        let retrieved: Vec<&PantryRecord> = hits.iter().map(|h| h.record).collect();
        let (system, user) = build_prompt(&cs.raw_query, &hits);

        let generation = self.generate(&system, &user, &retrieved, corpus.records());
        let violations = verify_grounding(&generation.text, &retrieved, corpus.records());
        debug_assert!(violations.is_empty(), "surfaced text failed grounding: {violations:?}");

        let mut cited_ids: Vec<String> = retrieved
            .iter()
            .filter(|r| grounding::mentions(&generation.text, &r.name))
            .map(|r| r.id.clone())
            .collect();
        cited_ids.sort();
        cited_ids.dedup();
        let cited = hits
            .iter()
            .filter(|h| cited_ids.contains(&h.record.id))
            .map(|h| CitedPantry { record: h.record.clone(), flags: h.flags.clone() })
            .collect();

        session.pending_constraints = None;
        session.turns.push(TurnLogEntry { query: query.to_string(), kind: ResponseKind::Answer });
        Ok(TurnOutput {
            response: GroundedResponse {
                kind: ResponseKind::Answer,
                text: generation.text,
                cited_ids,
                grounding_violations: violations,
                session_id: session.session_id.clone(),
            },
            constraints: cs,
            retrieval: Some(retrieval),
            path: generation.path,
            discarded_violations: generation.discarded,
            provider_error: generation.provider_error,
            cited,
        })
    }

    /// Draft, verify, retry once with a corrective instruction, then fall back
    /// to the template generator.
    fn generate(&self, system: &str, user: &str, retrieved: &[&PantryRecord], dataset: &[PantryRecord]) -> Generation {
        let mut messages = vec![ChatMessage::user(user)];
        let mut discarded = Vec::new();
        let mut provider_error = None;

        for path in [GenerationPath::Direct, GenerationPath::Corrected] {
            match self.chat.complete(system, &messages) {
                Ok(text) => {
                    let violations = verify_grounding(&text, retrieved, dataset);
                    if violations.is_empty() {
                        return Generation { text, path, discarded, provider_error };
                    }
                    log::warn!("discarding ungrounded draft: {}", violations.join("; "));
                    discarded.extend(violations);
                    messages.push(ChatMessage::assistant(text));
                    messages.push(ChatMessage::user(CORRECTIVE_INSTRUCTION));
                }
                Err(e) => {
                    log::warn!("chat provider failed, using template answer: {e}");
                    provider_error = Some(e.to_string());
                    break;
                }
            }
        }

        let text = stub_complete(system, &[ChatMessage::user(user)])
            .expect("prompt built by build_prompt always parses");
        Generation { text, path: GenerationPath::Fallback, discarded, provider_error }
    }
}

struct Generation {
    text: String,
    path: GenerationPath,
    discarded: Vec<String>,
    provider_error: Option<String>,
}
