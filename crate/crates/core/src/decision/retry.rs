use serde::{Deserialize, Serialize};

use super::{
    assemble_prompt, validate_plan, ActionPlan, BackendError, DecisionBackend, DecisionContext, ScriptedOracle,
    ValidationFailure,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Accepted,
    Rejected { failure: ValidationFailure },
    BackendError { message: String },
}

/// One round trip to the backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    pub prompt_chars: usize,
    /// Prompt and raw response text, kept only for backends that record
    /// transcripts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    pub outcome: AttemptOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub plan: ActionPlan,
    pub attempts: Vec<AttemptRecord>,
    /// The plan came from the oracle after the backend exhausted its retries.
    pub fallback: bool,
}

/// Ask `backend` for a plan, re-prompting with the validation failure up to
/// `max_retries` times, then fall back to `oracle`.
///
/// Only [`BackendError::Fatal`] escapes; everything else ends in a valid plan.
pub fn decide_with_retry(
    backend: &dyn DecisionBackend,
    oracle: &ScriptedOracle,
    ctx: &DecisionContext,
    max_retries: u32,
) -> Result<Decision, BackendError> {
    let keep = backend.records_transcripts();
    let mut attempt_ctx = ctx.clone();
    let mut attempts = Vec::new();
    for attempt in 1..=max_retries + 1 {
        let prompt = assemble_prompt(&attempt_ctx);
        let prompt_chars = prompt.chars().count();
        let (response, outcome, plan) = match backend.decide(&attempt_ctx, &prompt) {
            Ok(raw) => match validate_plan(&raw, &attempt_ctx) {
                Ok(plan) => (Some(raw), AttemptOutcome::Accepted, Some(plan)),
                Err(failure) => {
                    attempt_ctx.feedback.push(failure.to_string());
                    (Some(raw), AttemptOutcome::Rejected { failure }, None)
                }
            },
            Err(BackendError::Transient(message)) => (None, AttemptOutcome::BackendError { message }, None),
            Err(fatal @ BackendError::Fatal(_)) => return Err(fatal),
        };
        attempts.push(AttemptRecord {
            attempt,
            prompt_chars,
            prompt: keep.then_some(prompt),
            response: response.filter(|_| keep),
            outcome,
        });
        if let Some(plan) = plan {
            return Ok(Decision {
                plan,
                attempts,
                fallback: false,
            });
        }
    }
    let plan = oracle.plan(ctx);
    debug_assert!(
        validate_plan(&serde_json::to_string(&plan).unwrap(), ctx).is_ok(),
        "oracle produced an invalid plan: {plan:?}"
    );
    Ok(Decision {
        plan,
        attempts,
        fallback: true,
    })
}
