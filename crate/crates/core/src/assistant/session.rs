//! Conversation state: one pending-clarification slot per session.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{ConstraintSet, ResponseKind};

pub const SESSION_TTL_MINUTES: i64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnLogEntry {
    pub query: String,
    pub kind: ResponseKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    #[serde(default)]
    pub pending_constraints: Option<ConstraintSet>,
    #[serde(default)]
    pub turns: Vec<TurnLogEntry>,
    pub last_activity: DateTime<Utc>,
}

impl Session {
    pub fn new(session_id: impl Into<String>, now: DateTime<Utc>) -> Self {
        Session {
            session_id: session_id.into(),
            pending_constraints: None,
            turns: Vec::new(),
            last_activity: now,
        }
    }

    pub fn new_random(now: DateTime<Utc>) -> Self {
        Self::new(new_session_id(), now)
    }

    /// Pending constraints are held exactly when the last turn asked a question.
    pub fn invariant_holds(&self) -> bool {
        let last_clarified = self.turns.last().is_some_and(|t| t.kind == ResponseKind::Clarification);
        self.pending_constraints.is_some() == last_clarified
    }

    pub fn is_expired(&self, now: DateTime<Utc>) -> bool {
        now - self.last_activity > Duration::minutes(SESSION_TTL_MINUTES)
    }
}

pub fn new_session_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

/// Shared session map. Each session sits behind its own lock so turns within a
/// session are serialized while distinct sessions proceed in parallel.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    ttl: Duration,
}

impl Default for SessionStore {
    fn default() -> Self {
        SessionStore::new(Duration::minutes(SESSION_TTL_MINUTES))
    }
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore { sessions: Mutex::new(HashMap::new()), ttl }
    }

    /// Returns the live session for `id`, or a fresh one when the id is absent,
    /// unknown or expired. A supplied id is kept so clients see a stable id.
    pub fn checkout(&self, id: Option<&str>, now: DateTime<Utc>) -> Arc<Mutex<Session>> {
        let mut map = self.sessions.lock().unwrap();
        let ttl = self.ttl;
        map.retain(|_, s| match s.try_lock() {
            Ok(s) => now - s.last_activity <= ttl,
            // in use right now, so not idle
            Err(_) => true,
        });
        let id = id.map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).unwrap_or_else(new_session_id);
        map.entry(id.clone())
            .or_insert_with(|| Arc::new(Mutex::new(Session::new(id, now))))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
