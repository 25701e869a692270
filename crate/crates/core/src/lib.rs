//! Automatic knowledge base evolution from batches of RDF instance data.
//!
//! The engine alternates two steps over an incomplete knowledge base:
//!
//! * **property generalization** ([`generalization`]) adds a class to a
//!   property's domains when enough of the class's direct instances use the
//!   property, and retracts learned domains that lose support;
//! * **type inference** ([`typing`]) scores every instance against every
//!   class from the domains of its properties (naive counting, cosine
//!   similarity or PF-IDF weighted cosine) and reassigns its type when a
//!   strictly better class exists.
//!
//! [`evolution::evolve`] drives the cycle over N-Triples batches and records
//! coverage metrics per batch. Scores and thresholds are generic over
//! [`Real`] (`f32` or `f64`); the `*64` aliases below fix the common case.

pub mod cli;
pub mod evolution;
pub mod generalization;
pub mod kb;
pub mod ntriples;
pub mod scalar;
pub mod synth;
pub mod typing;

pub use evolution::{evolve, EvolutionConfig, EvolutionReport, IterationRecord};
pub use generalization::{generalization_threshold, ThresholdPolicy};
pub use kb::{KnowledgeBase, Vocabulary};
pub use ntriples::{parse_ntriple_line, BatchReader, ParseReport, Term, Triple};
pub use scalar::{Ratio, Real};
pub use typing::{Method, TypingDecision};

pub type TypeProfile64 = typing::TypeProfile<f64>;
pub type TypingDecision64 = typing::TypingDecision<f64>;
pub type ThresholdPolicy64 = generalization::ThresholdPolicy<f64>;
pub type SupportStats64 = generalization::SupportStats<f64>;
pub type DomainChange64 = generalization::DomainChange<f64>;
pub type EvolutionConfig64 = evolution::EvolutionConfig<f64>;
pub type EvolutionReport64 = evolution::EvolutionReport<f64>;

pub type TypeProfile32 = typing::TypeProfile<f32>;
pub type TypingDecision32 = typing::TypingDecision<f32>;
pub type ThresholdPolicy32 = generalization::ThresholdPolicy<f32>;
pub type EvolutionConfig32 = evolution::EvolutionConfig<f32>;
