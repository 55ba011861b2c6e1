pub mod adequacy;
pub mod bundle;
pub mod context;
pub mod ingestion;
pub mod llm;
pub mod orchestrator;
pub mod oracle;
pub mod pyast;
pub mod sandbox;
