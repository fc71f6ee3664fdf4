use std::sync::Mutex;

use super::{parse_yes, Advisor, AdvisorAnswer, AdvisorError, AdvisorQuery};

/// In-process advisor replaying a fixed list of answers (the last repeats).
/// Every query is recorded so tests can inspect exclusions.
#[derive(Debug)]
pub struct ScriptedAdvisor {
    answers: Vec<String>,
    verify_answer: String,
    state: Mutex<(usize, Vec<AdvisorQuery>)>,
}

impl ScriptedAdvisor {
    pub fn new<S: Into<String>>(answers: impl IntoIterator<Item = S>) -> Self {
        Self {
            answers: answers.into_iter().map(Into::into).collect(),
            verify_answer: "Yes".into(),
            state: Mutex::new((0, Vec::new())),
        }
    }

    pub fn with_verify_answer(mut self, text: impl Into<String>) -> Self {
        self.verify_answer = text.into();
        self
    }

    pub fn queries(&self) -> Vec<AdvisorQuery> {
        self.state.lock().unwrap().1.clone()
    }
}

impl Advisor for ScriptedAdvisor {
    fn query(&self, query: &AdvisorQuery) -> Result<AdvisorAnswer, AdvisorError> {
        let mut st = self.state.lock().unwrap();
        st.1.push(query.clone());
        if self.answers.is_empty() {
            return Err(AdvisorError::Unavailable("empty script".into()));
        }
        let i = st.0.min(self.answers.len() - 1);
        st.0 += 1;
        Ok(AdvisorAnswer::new(self.answers[i].clone()))
    }

    fn verify(&self, _image: &[u8], _goal: &str) -> Result<bool, AdvisorError> {
        Ok(parse_yes(&self.verify_answer))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replays_and_repeats_last() {
        let a = ScriptedAdvisor::new(["1", "2"]);
        let q = AdvisorQuery { context_image: vec![], goal_category: "bed".into(), excluded_ids: vec![], valid_ids: vec![1, 2] };
        let got: Vec<String> = (0..3).map(|_| a.query(&q).unwrap().raw_text).collect();
        assert_eq!(got, ["1", "2", "2"]);
        assert_eq!(a.queries().len(), 3);
        assert!(a.verify(&[], "bed").unwrap());
        assert!(!ScriptedAdvisor::new(["1"]).with_verify_answer("no").verify(&[], "bed").unwrap());
    }
}
