//! Knowledge-graph-driven multiple-choice exam generation.
//!
//! The crate is organised along the data flow:
//!
//! * [`kg_store`] keeps one isolated knowledge graph per subject.
//! * [`ingestion`] turns course text into triples, concept links and the
//!   chapter hierarchy.
//! * [`ranking`] scores graph nodes with the unnormalised PageRank variant.
//! * [`assessment`] holds the difficulty maths: 3PL IRT, the seven-feature
//!   rubric and the evaluation gate.
//! * [`generation`] allocates a blueprint, assembles ranked material and runs
//!   the generate/evaluate/retry loop.
//! * [`psychometrics`] analyses response matrices (P value, discrimination,
//!   ANOVA, Levene).
//! * [`llm_gateway`] is the only place that talks to a chat-completion
//!   service, with a deterministic offline mock.
//! * [`agent_runtime`] is the publish/subscribe bus and the agent pipeline.

pub mod agent_runtime;
pub mod assessment;
pub mod generation;
pub mod ingestion;
pub mod kg_store;
pub mod llm_gateway;
pub mod par;
pub mod psychometrics;
pub mod ranking;
pub mod text;

pub use par::Parallelism;
