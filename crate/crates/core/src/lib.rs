//! Four-color semantic encoding of instance segmentation masks.
//!
//! An instance mask (one id per cell, `0` = background) is turned into a
//! cell adjacency graph, colored greedily with at most four colors and
//! written back as a semantic mask with values `0..=4`. The inverse maps
//! per-color connected components back to instances. Around that codec
//! the crate carries exact chromatic-number search, canonicalization of
//! equivalent encodings, the usual instance segmentation metrics
//! (DICE, AJI, DQ/SQ/PQ), the training loss formulas as pure functions,
//! synthetic layout generators and corpus statistics.
//!
//! Real-valued code is generic over the scalar type. The aliases at the
//! crate root fix the common choices.

pub mod cli;
pub mod codec;
pub mod coloring;
pub mod error;
pub mod graph;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod types;

pub use codec::{colorize, decode_mask, encode_mask, normalize_prediction, Connectivity};
pub use coloring::{
    canonicalize_encoding, chromatic_number_exact, exact_k_coloring, greedy_color,
    relabel_canonical, verify_proper, OrderingStrategy,
};
pub use error::{Error, Result};
pub use graph::{build_cell_graph, max_degree};
pub use scalar::Scalar;
pub use types::{CellGraph, ColorAssignment, EncodingMatrix, FourColorMask, InstanceMask};

/// Exact rational scalar used for hand-checkable metric values.
pub type Rational = num_rational::BigRational;

pub type MetricsReport32 = metrics::MetricsReport<f32>;
pub type MetricsReport64 = metrics::MetricsReport<f64>;
pub type MetricsReportExact = metrics::MetricsReport<Rational>;

pub type PredictionMaps32 = losses::PredictionMaps<f32>;
pub type PredictionMaps64 = losses::PredictionMaps<f64>;
pub type FeatureGrid32 = losses::FeatureGrid<f32>;
pub type FeatureGrid64 = losses::FeatureGrid<f64>;

/// Default adjacency radius (Chebyshev pixels) used by the codec.
pub const DEFAULT_DELTA: u32 = 2;
