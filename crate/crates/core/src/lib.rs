// SPDX-License-Identifier: Apache-2.0

//! Statistical test of whether node attributes align with network structure.
//!
//! Nodes are first classified by their attributes ([`labeling`]). Repeated
//! trials then hide part of that classification, recover it by harmonic label
//! propagation over the graph ([`labelprop`]), and compare the cross entropy of
//! the recovery against a label-shuffled null ([`aligntest`]). A low empirical
//! p-value means the attribute classes are predictable from connectivity.
//!
//! [`synth`] generates planted-partition test networks, [`bestest`] provides the
//! blockmodel-entropy baseline, [`community`] finds structural communities, and
//! [`experiment`] runs the perturbation, sweep and marker-scan studies.

pub mod aligntest;
pub mod bestest;
pub mod community;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod labeling;
pub mod labelprop;
pub mod rng;
pub mod stats;
pub mod synth;

pub use aligntest::{empirical_p, run_test, run_trial, AlignmentResult, TestConfig};
pub use error::{Error, Result};
pub use graph::{AttributeMatrix, Graph, NodeSample, Partition};
