use areamatch::bench::{evaluate_scene, gen_scene, scene_graphs, GenParams};
use areamatch::graph::check_graph;
use areamatch::pipeline::PipelineConfig;

#[test]
fn wide_graph_invariants() {
    let cfg = PipelineConfig::default();
    for seed in 0..250 {
        let scene = gen_scene(seed, &GenParams::perturbed());
        let (g0, g1) = scene_graphs(&scene, &cfg).unwrap();
        let v0 = check_graph(&g0, &cfg.graph);
        let v1 = check_graph(&g1, &cfg.graph);
        assert!(v0.is_empty(), "seed {seed} graph 0: {v0:?}");
        assert!(v1.is_empty(), "seed {seed} graph 1: {v1:?}");
    }
}

#[test]
fn wide_identity_metrics() {
    let cfg = PipelineConfig::default();
    for seed in 0..50 {
        let scene = gen_scene(seed, &GenParams::identity());
        let o = evaluate_scene(&scene, &cfg).unwrap();
        assert!(!o.metrics.empty, "seed {seed} empty");
        assert_eq!(o.metrics.aor, 1.0, "seed {seed} aor {}", o.metrics.aor);
        assert_eq!(o.metrics.amp_08, 1.0, "seed {seed}");
        assert!(o.max_e_g < 1e-9, "seed {seed} e_g {}", o.max_e_g);
    }
}

#[test]
fn wide_perturbed_metrics() {
    let cfg = PipelineConfig::default();
    let mut sum_aor = 0.0;
    let mut sum_amp = 0.0;
    let mut worst_aor: (u64, f64) = (0, 2.0);
    let mut unsound = vec![];
    let mut unequal = vec![];
    for seed in 0..50 {
        let scene = gen_scene(seed, &GenParams::perturbed());
        let o = evaluate_scene(&scene, &cfg).unwrap();
        sum_aor += o.metrics.aor;
        sum_amp += o.metrics.amp_06;
        if o.metrics.aor < worst_aor.1 {
            worst_aor = (seed, o.metrics.aor);
        }
        if !o.pruning_sound {
            unsound.push(seed);
        }
        if !o.match_sets_equal {
            unequal.push(seed);
        }
        assert!(o.provider_calls_pruned <= o.provider_calls_full, "seed {seed}");
    }
    println!("mean aor {} mean amp06 {} worst {:?}", sum_aor / 50.0, sum_amp / 50.0, worst_aor);
    println!("unsound: {unsound:?} unequal: {unequal:?}");
    assert!(sum_aor / 50.0 >= 0.9);
    assert!(sum_amp / 50.0 >= 0.95);
    assert!(unsound.is_empty());
}
