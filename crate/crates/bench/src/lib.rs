//! Fixtures shared by the benchmarks under `benches/`.

use covwalk::walk::trajectory_rng;
use covwalk::{Cover, GroupElement, Measure, MeasureSpec, Preset, UnitTangent, Walker, StartMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rank-`d` cover of a preset with its standard weights.
pub fn cover(preset: Preset, d: usize) -> Cover {
    let weights = covwalk::cover::preset_weights(preset, d).expect("preset weights");
    Cover::build(preset.build().expect("preset builds"), weights).expect("valid cover")
}

/// Elements `R(θ) a_t R(φ)` with translation length below `t_max`.
pub fn random_elements(n: usize, t_max: f64, seed: u64) -> Vec<GroupElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = GroupElement::rotation(rng.random_range(0.0..std::f64::consts::TAU));
            let b = GroupElement::rotation(rng.random_range(0.0..std::f64::consts::TAU));
            a.compose(&GroupElement::translation(rng.random_range(0.0..t_max))).compose(&b)
        })
        .collect()
}

/// Unit tangent vectors spread over a wide band of the upper half plane.
pub fn random_tangents(n: usize, seed: u64) -> Vec<UnitTangent> {
    random_elements(n, 6.0, seed).into_iter().map(UnitTangent).collect()
}

pub fn uniform_measure(cover: &Cover) -> Measure {
    Measure::new(MeasureSpec::uniform(cover.surface().presentation().elements())).expect("valid measure")
}

/// A walker started at the upright vector.
pub fn walker<'a>(cover: &'a Cover, measure: &'a Measure, seed: u64) -> Walker<'a> {
    Walker::new(cover, measure, &StartMode::Fixed(UnitTangent::upright()), None, trajectory_rng(seed, 0))
        .expect("walker starts")
}
