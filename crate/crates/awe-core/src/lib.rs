//! Acoustic word embedding toolkit.
//!
//! The crate covers the full path from raw audio to ranked word-discrimination
//! scores: MFCC feature extraction ([`features`]), corpus and pair-list data
//! models ([`corpus`]), a small deterministic reverse-mode gradient engine
//! ([`grad`]), the embedding models and their trainers ([`models`]), a dynamic
//! time warping baseline ([`dtw`]), the same-different evaluation
//! ([`samediff`]) and a synthetic-language corpus generator ([`synth`]).

pub mod corpus;
pub mod dtw;
pub mod features;
pub mod grad;
pub mod models;
pub mod samediff;
pub mod synth;

pub use grad::real::Real;
