//! Target-anchored news timelines built from LLM relevance judgments.
//!
//! The pipeline runs in stages, each with its own module:
//!
//! * [`corpus`]: load, fetch and normalize articles (JSON-lines on disk)
//! * [`retrieval`]: pick earlier candidate articles for a target
//! * [`prompting`]: batch candidates under a token budget and render prompts
//! * [`llm`]: cached, retrying completion client plus an offline mock
//! * [`parsing`]: read labels and the background story back from completions
//! * [`timeline`]: assemble and export the final timeline
//! * [`evaluation`]: score judgments against gold labels, compare variants
//!
//! [`pipeline`] wires the stages together for one target article.

pub mod corpus;
pub mod digest;
pub mod evaluation;
pub mod fsutil;
pub mod llm;
pub mod parsing;
pub mod pipeline;
pub mod prompting;
pub mod retrieval;
pub mod timeline;

pub use corpus::{ArticleId, NewsArticle};
pub use prompting::PromptVariant;
