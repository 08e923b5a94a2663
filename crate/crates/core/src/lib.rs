//! Urban sound classification testbed with configurable compute placement.
//!
//! A clip is recorded on an end device and then either classified on the
//! device (configuration A), shipped as raw audio to a server that extracts
//! features and classifies (B), or reduced to a feature vector on the device
//! and classified on the server (C). The crate contains every piece of that
//! system: feature extraction ([`dsp`]), the MLP ([`classifier`]), the wire
//! format ([`protocol`]), both network roles ([`device`], [`server`]) and the
//! fleet benchmark with its power model and scoring ([`bench`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod classifier;
pub mod corpus;
pub mod device;
pub mod dsp;
pub mod protocol;
pub mod server;

pub use classifier::{MlpModel, CLASS_LABELS, NUM_CLASSES};
pub use device::Configuration;
pub use dsp::{AudioClip, FeatureVector, FEATURE_DIM};
