use lipinc_core::diff::{gradcheck, Graph};
use lipinc_core::ingest::Label;
use lipinc_core::mstie::{init_params, BoundParams, Branch, FusionMode, MstieConfig};
use lipinc_core::objective::LossWeights;
use lipinc_core::train::clip_loss;
use lipinc_core::Array;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(fusion: FusionMode) -> MstieConfig {
    MstieConfig {
        token_count: 2,
        token_dim: 3,
        conv1_channels: 2,
        hidden: 4,
        fusion,
        ..MstieConfig::default()
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Array<f64> {
    let n = shape.iter().product();
    Array::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

#[test]
fn composed_loss_matches_finite_differences() {
    let mut passed = 0;
    for seed in 0..12u64 {
        let fusion = if seed % 3 == 2 { FusionMode::Concat } else { FusionMode::Mstie };
        let cfg = tiny(fusion);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = init_params::<f64>(&cfg, seed);
        let names: Vec<String> = params.arrays.keys().cloned().collect();
        let mut inputs: Vec<Array<f64>> = params.arrays.values().cloned().collect();
        inputs.push(random(&mut rng, &[4, 7, 7, 3], 0.0, 1.0));
        inputs.push(random(&mut rng, &[3, 7, 7, 3], -0.5, 0.5));
        let np = names.len();
        let weights = LossWeights {
            il_source: if seed % 2 == 0 { Branch::Color } else { Branch::Structure },
            ..LossWeights::default()
        };
        let label = if seed % 4 < 2 { Label::Real } else { Label::Fake };
        let r = gradcheck::check(&inputs, 1e-5, |g, v| {
            let bound = BoundParams {
                vars: names.iter().cloned().zip(v[..np].iter().copied()).collect(),
            };
            Ok(clip_loss(g, v[np], v[np + 1], label, &bound, &cfg, &weights)?.total)
        })
        .unwrap();
        if r.kink_margin <= 1e-4 {
            continue;
        }
        assert!(r.max_rel_err <= 1e-4, "seed {seed}: {r:?}");
        passed += 1;
    }
    assert!(passed >= 6, "only {passed} trials away from kinks");
}

#[test]
fn inconsistency_term_reaches_first_layer_only() {
    let cfg = tiny(FusionMode::Mstie);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = init_params::<f64>(&cfg, 9);
    let weights = LossWeights {
        lambda_cl: 0.0,
        ..LossWeights::default()
    };
    let mut g = Graph::<f64>::new();
    let bound = BoundParams {
        vars: params.arrays.iter().map(|(k, v)| (k.clone(), g.param(v.clone()))).collect(),
    };
    let c = g.constant(random(&mut rng, &[4, 7, 7, 3], 0.0, 1.0));
    let s = g.constant(random(&mut rng, &[3, 7, 7, 3], -0.5, 0.5));
    let l = clip_loss(&mut g, c, s, Label::Fake, &bound, &cfg, &weights).unwrap();
    g.backward(l.total).unwrap();
    let norm = |name: &str| {
        g.grad(bound.var(name).unwrap())
            .map_or(0.0, |a| a.data().iter().map(|v| v.abs()).sum::<f64>())
    };
    assert!(norm("color.conv1.kernel") > 0.0);
    assert!(norm("color.conv1.bias") > 0.0);
    for name in ["color.conv2.kernel", "structure.conv1.kernel", "attn.color.query", "head.fc2.weight"] {
        assert_eq!(norm(name), 0.0, "{name}");
    }
}
