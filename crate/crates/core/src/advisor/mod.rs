//! Exploration advisors: the wire protocol to an external vision-language
//! service, an in-process scripted stand-in, and answer summarization.

mod client;
mod mock;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{verify_goal_present, AdvisorEndpoint, HttpAdvisor, WireRequest, WireResponse};
pub use mock::{MockReply, MockScript, MockServer, RecordedRequest};
pub use scripted::ScriptedAdvisor;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdvisorError {
    #[error("advisor unavailable: {0}")]
    Unavailable(String),
    #[error("advisor protocol error: {0}")]
    Protocol(String),
}

/// Everything the advisor is asked in one block-selection round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdvisorQuery {
    /// PPM bytes of the top-down context image.
    pub context_image: Vec<u8>,
    pub goal_category: String,
    pub excluded_ids: Vec<u32>,
    pub valid_ids: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisorAnswer {
    pub raw_text: String,
}

impl AdvisorAnswer {
    pub fn new(text: impl Into<String>) -> Self {
        Self { raw_text: text.into() }
    }
}

/// Prompt wording; `<GOAL>` and `<IDS>` are substituted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub block: String,
    pub exclusion: String,
    pub verify: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            block: "To find <GOAL>, which block should you go? Answer with a single block number.".into(),
            exclusion: " Don't answer number [<IDS>].".into(),
            verify: "Is there a <GOAL> in this image? Answer yes or no.".into(),
        }
    }
}

impl PromptTemplates {
    pub fn block_prompt(&self, goal: &str, excluded: &[u32]) -> String {
        let mut p = self.block.replace("<GOAL>", goal);
        if !excluded.is_empty() {
            let ids: Vec<String> = excluded.iter().map(u32::to_string).collect();
            p.push_str(&self.exclusion.replace("<IDS>", &ids.join(", ")));
        }
        p
    }

    pub fn verify_prompt(&self, goal: &str) -> String {
        self.verify.replace("<GOAL>", goal)
    }
}

/// A source of block choices and presence checks.
pub trait Advisor: Send + Sync {
    fn query(&self, query: &AdvisorQuery) -> Result<AdvisorAnswer, AdvisorError>;

    /// Whether `goal` is visible in `image`. Errors make the caller fall back
    /// to its own detector.
    fn verify(&self, image: &[u8], goal: &str) -> Result<bool, AdvisorError>;
}

/// Last integer token of the answer that is valid and not excluded.
pub fn summarize_answer(answer: &AdvisorAnswer, valid_ids: &[u32], excluded_ids: &[u32]) -> Option<u32> {
    answer
        .raw_text
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse::<u32>().ok())
        .filter(|id| valid_ids.contains(id) && !excluded_ids.contains(id))
        .last()
}

/// True iff the text contains "yes" as a standalone word, ignoring case.
pub fn parse_yes(text: &str) -> bool {
    text.split(|c: char| !c.is_alphanumeric()).any(|w| w.eq_ignore_ascii_case("yes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summarize_examples() {
        let a = |t: &str| AdvisorAnswer::new(t);
        assert_eq!(summarize_answer(&a("I would explore block 7 next."), &[1, 7], &[]), Some(7));
        assert_eq!(summarize_answer(&a("Either 3 or 5; I choose 5."), &[3, 5], &[]), Some(5));
        assert_eq!(summarize_answer(&a("go north"), &[1, 2], &[]), None);
        assert_eq!(summarize_answer(&a("not 3, maybe 12 or 3"), &[3, 4], &[3]), None);
        assert_eq!(summarize_answer(&a("block2"), &[2], &[]), Some(2));
    }

    #[test]
    fn yes_parsing() {
        assert!(parse_yes("Yes, there is."));
        assert!(parse_yes("answer: YES"));
        assert!(!parse_yes("No."));
        assert!(!parse_yes("eyes only"));
    }

    #[test]
    fn prompts() {
        let t = PromptTemplates::default();
        assert_eq!(
            t.block_prompt("bed", &[]),
            "To find bed, which block should you go? Answer with a single block number."
        );
        assert_eq!(
            t.block_prompt("bed", &[3, 5]),
            "To find bed, which block should you go? Answer with a single block number. Don't answer number [3, 5]."
        );
        assert_eq!(t.verify_prompt("sofa"), "Is there a sofa in this image? Answer yes or no.");
    }

    proptest! {
        #[test]
        fn summarize_never_returns_invalid(text in "[a-z0-9 ,.]{0,40}", valid in prop::collection::vec(0u32..20, 1..6), excl in prop::collection::vec(0u32..20, 0..4)) {
            if let Some(id) = summarize_answer(&AdvisorAnswer::new(text), &valid, &excl) {
                prop_assert!(valid.contains(&id));
                prop_assert!(!excl.contains(&id));
            }
        }
    }
}
