//! Prompt construction, budgeted model calls and response parsing.

pub mod backend;
pub mod gateway;
pub mod parse;
pub mod prompt;
pub mod transcript;

pub use backend::{estimate_tokens, BackendError, BackendReply, CompletionRequest, LlmBackend, OpenAiCompatible, ScriptedBackend};
pub use gateway::{Budget, Gateway, GatewayError, GatewaySettings, LlmResponse, LlmSession, Mode};
pub use parse::{
    extract_program, parse_distillation, parse_review_verdict, render_oracle_response, render_review_response,
    validate_and_parse_oracle, AssertionVerdict, FormatError, ReviewOutcome, ReviewVerdict,
};
pub use prompt::{Phase, Prompt, PromptError, PromptInputs, PromptTemplates};
pub use transcript::{Transcript, TranscriptEntry, TranscriptError};
