//! Independent checks shared by the policy and acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sid_core::datasets::{
    build_base_dataset, transfer_to_language, CaptionStyle, DemoSample, DemonstrationSet, Modality,
};
use sid_core::envmodel::{generate_environment, EnvironmentGraph, GeneratorParams};
use sid_core::policy::{
    init_parameters, mlm_loss, mlm_mask, sample_sap_step, sap_loss, trajectory_context, AgentState,
    PolicyDims, PolicyParameters, SamplingStrategy, Weights,
};
use sid_core::vocab::Vocabulary;
use sid_core::World;

pub const FD_STEP: f64 = 1e-5;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Max relative error between `analytic` and central differences of `loss`
/// over every parameter coordinate.
pub fn max_fd_error(params: &PolicyParameters, analytic: &Weights, loss: impl Fn(&PolicyParameters) -> f64) -> f64 {
    let mut p = params.clone();
    let mut worst: f64 = 0.0;
    let grads = analytic.tensors();
    for t in 0..grads.len() {
        for i in 0..grads[t].len() {
            let orig = p.weights.tensors()[t][i];
            p.weights.tensors_mut()[t][i] = orig + FD_STEP;
            let up = loss(&p);
            p.weights.tensors_mut()[t][i] = orig - FD_STEP;
            let down = loss(&p);
            p.weights.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads[t][i], numeric));
        }
    }
    worst
}

/// Initial parameters with every tensor (including the zero-initialized
/// output layers) perturbed, so all gradient paths are exercised.
pub fn random_point(seed: u64, dims: PolicyDims, vocab: &Vocabulary) -> PolicyParameters {
    let mut p = init_parameters(seed, dims, vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    for t in p.weights.tensors_mut() {
        for x in t.iter_mut() {
            *x += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    p
}

pub struct Fixture {
    pub world: World,
    pub graph: EnvironmentGraph,
    pub visual: DemonstrationSet,
    pub language: DemonstrationSet,
    pub vocab: Vocabulary,
}

pub fn fixture(seed: u64) -> Fixture {
    let graph = generate_environment(seed, &GeneratorParams::default()).unwrap();
    let world = World::new([graph.clone()]);
    let visual = build_base_dataset(&[&graph], 5, 7).unwrap();
    let language = transfer_to_language(&visual, CaptionStyle::SoonLike, &world).unwrap();
    Fixture { world, graph, visual, language, vocab: Vocabulary::default() }
}

pub fn dims(f: &Fixture) -> PolicyDims {
    PolicyDims::new(f.graph.feature_dim(), &f.vocab).with_hidden(8)
}

/// SAP gradient check at one random parameter/input point.
pub fn sap_gradient_error(point: u64) -> f64 {
    let f = fixture(2000 + point % 3);
    let mut rng = ChaCha8Rng::seed_from_u64(point);
    let set = if point % 2 == 0 { &f.visual } else { &f.language };
    let sample: &DemoSample = &set.samples()[rng.random_range(0..set.len())];
    let path = sample.trajectory.indices(&f.graph).unwrap();
    let step = sample_sap_step(&path, &f.graph, SamplingStrategy::Revised, &mut rng);
    let params = random_point(point, dims(&f), &f.vocab);
    let (_, g) = sap_loss(&params, &sample.goal, &step.state, &f.graph, step.target).unwrap();
    max_fd_error(&params, &g, |p| sap_loss(p, &sample.goal, &step.state, &f.graph, step.target).unwrap().0)
}

/// MLM gradient check at one random parameter/input point.
pub fn mlm_gradient_error(point: u64) -> f64 {
    let f = fixture(2100 + point % 3);
    let mut rng = ChaCha8Rng::seed_from_u64(point);
    let sample = &f.language.samples()[rng.random_range(0..f.language.len())];
    assert_eq!(sample.goal.modality, Modality::Language);
    let masked = mlm_mask(sample.goal.caption.as_ref().unwrap(), 0.3, &mut rng).unwrap();
    let ctx = trajectory_context(&f.graph, &sample.trajectory.indices(&f.graph).unwrap());
    let params = random_point(point + 77, dims(&f), &f.vocab);
    let (_, g) = mlm_loss(&params, &masked, &ctx).unwrap();
    max_fd_error(&params, &g, |p| mlm_loss(p, &masked, &ctx).unwrap().0)
}

/// A trajectory in which every decision borders an off-path viewpoint:
/// a 7-node spine with one side branch per spine node.
pub fn comb_graph() -> EnvironmentGraph {
    let mut pos = Vec::new();
    let mut edges = Vec::new();
    for i in 0..7 {
        pos.push([i as f64 * 2.0, 0.0, 0.0]);
    }
    for i in 0..7 {
        pos.push([i as f64 * 2.0, 1.5, 0.0]);
        edges.push((i, 7 + i));
    }
    for i in 1..7 {
        edges.push((i - 1, i));
    }
    super::graph("comb", &pos, &edges, 4, 5)
}

pub fn comb_spine() -> Vec<usize> {
    (0..7).collect()
}

pub fn state_at(graph: &EnvironmentGraph, path: &[usize]) -> AgentState {
    AgentState::from_path(graph, path)
}
