use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{parse_yes, Advisor, AdvisorAnswer, AdvisorError, AdvisorQuery, PromptTemplates};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvisorEndpoint {
    pub base_url: String,
    /// Seconds.
    pub timeout: f64,
    /// Extra attempts after the first on timeouts and 5xx responses.
    pub max_retries: u32,
}

impl AdvisorEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into(), timeout: 30.0, max_retries: 2 }
    }

    fn query_url(&self) -> String {
        format!("{}/query", self.base_url.trim_end_matches('/'))
    }
}

/// Request body of `POST <base_url>/query`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub image_b64: String,
    pub prompt: String,
    pub excluded_ids: Vec<u32>,
}

impl WireRequest {
    pub fn new(image: &[u8], prompt: String, excluded_ids: Vec<u32>) -> Self {
        Self { image_b64: base64::engine::general_purpose::STANDARD.encode(image), prompt, excluded_ids }
    }

    pub fn image(&self) -> Result<Vec<u8>, AdvisorError> {
        base64::engine::general_purpose::STANDARD
            .decode(&self.image_b64)
            .map_err(|e| AdvisorError::Protocol(format!("bad image_b64: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub text: String,
}

fn post(endpoint: &AdvisorEndpoint, body: &WireRequest) -> Result<String, AdvisorError> {
    if !(endpoint.timeout > 0.0) {
        return Err(AdvisorError::Unavailable("timeout must be positive".into()));
    }
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs_f64(endpoint.timeout)).build();
    let url = endpoint.query_url();
    let mut last = String::new();
    for attempt in 0..=endpoint.max_retries {
        match agent.post(&url).send_json(body) {
            Ok(resp) => {
                let parsed: WireResponse = resp
                    .into_json()
                    .map_err(|e| AdvisorError::Protocol(format!("malformed response: {e}")))?;
                return Ok(parsed.text);
            }
            Err(ureq::Error::Status(code, _)) if code >= 500 => {
                last = format!("HTTP {code}");
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(AdvisorError::Protocol(format!("HTTP {code}")));
            }
            Err(e) => {
                last = e.to_string();
            }
        }
        log::debug!("advisor attempt {} failed: {last}", attempt + 1);
    }
    Err(AdvisorError::Unavailable(format!("{} attempts failed, last: {last}", endpoint.max_retries + 1)))
}

/// Send one block-selection query.
pub fn query_advisor(
    endpoint: &AdvisorEndpoint,
    prompts: &PromptTemplates,
    query: &AdvisorQuery,
) -> Result<AdvisorAnswer, AdvisorError> {
    let prompt = prompts.block_prompt(&query.goal_category, &query.excluded_ids);
    let body = WireRequest::new(&query.context_image, prompt, query.excluded_ids.clone());
    post(endpoint, &body).map(AdvisorAnswer::new)
}

/// Ask whether the goal is present in an egocentric image.
pub fn verify_goal_present(
    endpoint: &AdvisorEndpoint,
    prompts: &PromptTemplates,
    image: &[u8],
    goal: &str,
) -> Result<bool, AdvisorError> {
    let body = WireRequest::new(image, prompts.verify_prompt(goal), Vec::new());
    post(endpoint, &body).map(|t| parse_yes(&t))
}

/// Advisor speaking the HTTP protocol.
#[derive(Clone, Debug)]
pub struct HttpAdvisor {
    pub endpoint: AdvisorEndpoint,
    pub prompts: PromptTemplates,
}

impl HttpAdvisor {
    pub fn new(endpoint: AdvisorEndpoint) -> Self {
        Self { endpoint, prompts: PromptTemplates::default() }
    }
}

impl Advisor for HttpAdvisor {
    fn query(&self, query: &AdvisorQuery) -> Result<AdvisorAnswer, AdvisorError> {
        query_advisor(&self.endpoint, &self.prompts, query)
    }

    fn verify(&self, image: &[u8], goal: &str) -> Result<bool, AdvisorError> {
        verify_goal_present(&self.endpoint, &self.prompts, image, goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wire_field_names() {
        let r = WireRequest::new(b"P6", "p".into(), vec![3]);
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"image_b64":"UDY=","prompt":"p","excluded_ids":[3]}"#);
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        // Port 9 on localhost is almost never open; a refused connection
        // must surface as unavailability after all attempts.
        let ep = AdvisorEndpoint { base_url: "http://127.0.0.1:9".into(), timeout: 0.5, max_retries: 1 };
        let q = AdvisorQuery { context_image: vec![], goal_category: "bed".into(), excluded_ids: vec![], valid_ids: vec![1] };
        assert!(matches!(query_advisor(&ep, &PromptTemplates::default(), &q), Err(AdvisorError::Unavailable(_))));
    }

    proptest! {
        #[test]
        fn request_roundtrip(image in prop::collection::vec(any::<u8>(), 0..200), goal in "[a-z ]{1,12}", excl in prop::collection::vec(1u32..50, 0..5)) {
            let prompts = PromptTemplates::default();
            let req = WireRequest::new(&image, prompts.block_prompt(&goal, &excl), excl.clone());
            let back: WireRequest = serde_json::from_str(&serde_json::to_string(&req).unwrap()).unwrap();
            prop_assert_eq!(&back, &req);
            prop_assert_eq!(back.image().unwrap(), image);
            prop_assert_eq!(back.excluded_ids, excl);
        }
    }
}
