//! Graph-structured area matching between image pairs.
//!
//! Given per-image collections of segmented areas, this crate organizes
//! each image's areas into a size-levelled graph with inclusion and
//! adjacency edges, labels likely counterparts by exact minimization of
//! a pairwise energy over the target graph, refines candidates with a
//! structure-aware global energy, and enforces mutual consistency
//! between the two match directions. A synthetic scene generator and
//! scoring utilities support end-to-end evaluation against known
//! transforms.

pub mod bench;
pub mod cluster;
pub mod geometry;
pub mod graph;
pub mod ingest;
pub mod maxflow;
pub mod mrf;
pub mod pipeline;
pub mod refine;
pub mod similarity;

pub use geometry::{AffineMap, CropResult, ImageDims, Level, LevelThresholds, Rect};
pub use graph::{AreaGraph, AreaNode, GraphConfig, GraphDump, NodeOrigin};
pub use ingest::SegmentationInput;
pub use mrf::{MrfInstance, TargetMrf};
pub use pipeline::{
    match_pair, MatchInputs, MatchOutput, MatchPair, PipelineConfig, PipelineError, ProviderName,
};
pub use similarity::{
    AreaRef, ConstantProvider, GroundTruthProvider, ImageSide, NccProvider, SimilarityMatrix,
    SimilarityProvider, SimilarityTable,
};
