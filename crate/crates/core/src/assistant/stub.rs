//! Deterministic template generator standing in for an LLM.

use super::chat::{ChatClient, ChatError, ChatMessage, Role};
use super::prompt::{parse_record_blocks, ParsedBlock};

pub const NO_MATCH_SENTENCE: &str = "I could not find a matching pantry.";
pub const ANSWER_HEADER: &str = "Here is what I found in the pantry directory:";

fn id_sentence(label: &str) -> &'static str {
    match label {
        "not required" => "No ID required.",
        "required" => "ID required.",
        _ => "ID policy unknown — call ahead.",
    }
}

fn bullet(b: &ParsedBlock) -> String {
    let hours = if b.hours.starts_with("unknown") {
        "hours unknown".to_string()
    } else {
        format!("Hours: {}", b.hours)
    };
    format!("- {}: {}, {}. {}. {}", b.name, b.address, b.city, hours, id_sentence(&b.id_requirement))
}

/// Renders one bullet per record block in the latest user message.
pub fn stub_complete(_system_prompt: &str, messages: &[ChatMessage]) -> Result<String, ChatError> {
    let user = messages
        .iter()
        .find(|m| m.role == Role::User)
        .ok_or_else(|| ChatError::MalformedPrompt("no user message".into()))?;
    let blocks = parse_record_blocks(&user.content).map_err(ChatError::MalformedPrompt)?;
    if blocks.is_empty() {
        return Ok(NO_MATCH_SENTENCE.to_string());
    }
    let mut lines = vec![ANSWER_HEADER.to_string()];
    lines.extend(blocks.iter().map(bullet));
    Ok(lines.join("\n"))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StubChatClient;

impl ChatClient for StubChatClient {
    fn complete(&self, system_prompt: &str, messages: &[ChatMessage]) -> Result<String, ChatError> {
        stub_complete(system_prompt, messages)
    }

    fn model_id(&self) -> String {
        "stub-template".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assistant::prompt::{build_prompt, PromptRecord};
    use crate::model::fixtures::record;
    use crate::model::{FlagSet, IdRequirement, WeeklySchedule};

    #[test]
    fn two_records_two_bullets() {
        let a = record("a", "Hope Pantry", "Derby", "Sedgwick", "67037");
        let mut b = record("b", "Grace Food Bank", "Maize", "Sedgwick", "67101");
        b.hours = WeeklySchedule::unparsed();
        b.id_requirement = IdRequirement::NotRequired;
        let hits = [PromptRecord { record: &a, flags: FlagSet::new() }, PromptRecord { record: &b, flags: FlagSet::new() }];
        let (sys, user) = build_prompt("q", &hits);
        let out = stub_complete(&sys, &[ChatMessage::user(user)]).unwrap();
        let bullets: Vec<_> = out.lines().filter(|l| l.starts_with("- ")).collect();
        assert_eq!(bullets.len(), 2);
        assert_eq!(bullets[0], "- Hope Pantry: 100 Main St, Derby. Hours: Mon 9:00am-12:00pm. ID policy unknown — call ahead.");
        assert_eq!(bullets[1], "- Grace Food Bank: 100 Main St, Maize. hours unknown. No ID required.");
    }

    #[test]
    fn zero_records() {
        let (sys, user) = build_prompt("q", &[]);
        assert_eq!(stub_complete(&sys, &[ChatMessage::user(user)]).unwrap(), NO_MATCH_SENTENCE);
    }

    #[test]
    fn malformed_prompt() {
        let err = stub_complete("", &[ChatMessage::user("just words")]).unwrap_err();
        assert!(matches!(err, ChatError::MalformedPrompt(_)));
        assert!(stub_complete("", &[]).is_err());
    }
}
