//! Patch oracles and the comparison programs built from them.

mod builder;
mod edits;
mod model;

pub use builder::{build_comparison_program, build_from_template, BuildError, ComparisonProgram, POST_PREFIX, PRE_PREFIX};
pub use edits::{apply_oracle_edits, InvalidEdit, OracleEdit};
pub use model::{
    classify_assertion_target, kind_tag, target_tag, Assertion, AssertionKind, PatchOracle, Target, TemplateProblems,
    POST_PLACEHOLDER, PRE_PLACEHOLDER,
};
