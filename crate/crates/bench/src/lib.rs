//! Shared fixtures for the criterion benchmarks: prebuilt scenes,
//! graphs and providers, so the timed sections measure the algorithms
//! rather than setup.

use areamatch::bench::{gen_scene, GenParams, SyntheticScene};
use areamatch::graph::AreaGraph;
use areamatch::pipeline::{graph_from_segmentation, PipelineConfig};
use areamatch::similarity::{GroundTruthProvider, ImageSide};
use areamatch::SegmentationInput;

/// One perturbed scene with everything the pipeline needs prebuilt.
pub struct Fixture {
    pub scene: SyntheticScene,
    pub seg0: SegmentationInput,
    pub seg1: SegmentationInput,
    pub g0: AreaGraph,
    pub g1: AreaGraph,
    pub provider: GroundTruthProvider,
    pub cfg: PipelineConfig,
}

impl Fixture {
    pub fn perturbed(seed: u64) -> Self {
        let cfg = PipelineConfig::default();
        let scene = gen_scene(seed, &GenParams::perturbed());
        let seg0 = scene.to_segmentation(ImageSide::First);
        let seg1 = scene.to_segmentation(ImageSide::Second);
        let g0 = graph_from_segmentation(&seg0, &cfg.graph).expect("scene graph builds");
        let g1 = graph_from_segmentation(&seg1, &cfg.graph).expect("scene graph builds");
        let provider = GroundTruthProvider::new(scene.work_map(cfg.graph.work_dims));
        Fixture { scene, seg0, seg1, g0, g1, provider, cfg }
    }
}
