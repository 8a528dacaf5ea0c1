//! Evolve generation-based fuzzers with LLM mutators, keeping a population of
//! generator programs whose coverage sets are jointly as large as possible.
//!
//! * [`lattice`] stores every admitted generator with its cover set and the
//!   strength order between them.
//! * [`mutation`] builds completion, infilling and splicing requests.
//! * [`llm`] sends them to a code model (HTTP, mock or scripted).
//! * [`harness`] runs generators and measures coverage.
//! * [`selection`] picks survivors by maximum coverage.
//! * [`evolution`] ties the loop together; [`zest`] is a byte-level baseline.

pub mod config;
pub mod evolution;
pub mod genlang;
pub mod harness;
pub mod lattice;
pub mod llm;
pub mod mutation;
pub mod report;
pub mod selection;
pub mod toy;
pub mod util;
pub mod zest;
