use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random(shape: &[usize], seed: u64) -> Array<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Array::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn tiny() -> MstieConfig {
    MstieConfig {
        token_count: 2,
        token_dim: 4,
        conv1_channels: 3,
        hidden: 5,
        ..MstieConfig::default()
    }
}

// Plain nested-loop linear algebra, independent of the graph kernels.
fn mm(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| (0..b[0].len()).map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum()).collect())
        .collect()
}

fn rows(a: &Array<f64>) -> Vec<Vec<f64>> {
    a.data().chunks(a.shape()[1]).map(<[f64]>::to_vec).collect()
}

fn attention_ref(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = k[0].len() as f64;
    q.iter()
        .map(|qi| {
            let logits: Vec<f64> = k.iter().map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / d.sqrt()).collect();
            let max = logits.iter().copied().fold(f64::MIN, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = e.iter().sum();
            (0..v[0].len()).map(|c| e.iter().zip(v).map(|(w, vr)| w / z * vr[c]).sum()).collect()
        })
        .collect()
}

fn max_diff(a: &[Vec<f64>], b: &Array<f64>) -> f64 {
    a.iter().flatten().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn init_is_deterministic_and_seed_dependent() {
    let cfg = MstieConfig::default();
    let a = init_params::<f32>(&cfg, 3);
    assert_eq!(a, init_params::<f32>(&cfg, 3));
    assert_ne!(a, init_params::<f32>(&cfg, 4));
    a.check(&cfg).unwrap();
    assert!(a.all_finite());
}

#[test]
fn init_respects_fan_bound() {
    let bound = (6.0f64 / (81.0 + 216.0)).sqrt();
    assert!((init_bound(&[3, 3, 3, 3, 8]) - bound).abs() < 1e-15);
    let p = init_params::<f64>(&MstieConfig::default(), 9);
    let k = p.get("color.conv1.kernel").unwrap();
    assert_eq!(k.shape(), &[3, 3, 3, 3, 8]);
    assert!(k.data().iter().all(|w| w.abs() <= bound));
    assert!(k.data().iter().any(|w| w.abs() > 0.9 * bound));
    assert!(p.get("color.conv1.bias").unwrap().data().iter().all(|&b| b == 0.0));
}

#[test]
fn ablation_params_only_cover_active_paths() {
    let only = MstieConfig { branches: Branches::ColorOnly, ..MstieConfig::default() };
    let p = init_params::<f32>(&only, 0);
    assert!(p.arrays.keys().all(|k| !k.starts_with("structure") && !k.starts_with("attn")));
    let concat = MstieConfig { fusion: FusionMode::Concat, ..MstieConfig::default() };
    let p = init_params::<f32>(&concat, 0);
    assert_eq!(p.get("head.fc1.weight").unwrap().shape(), &[4 * 32, 32]);
}

#[test]
fn zero_input_gives_zero_tokens() {
    let cfg = MstieConfig::default();
    let p = init_params::<f64>(&cfg, 1);
    let mut g = Graph::new();
    let b = bind(&mut g, &p);
    let x = g.constant(Array::zeros(&[8, 32, 72, 3]));
    let e = encode_branch(&mut g, x, Branch::Color, &b, &cfg).unwrap();
    assert!(g.value(e.tokens).data().iter().all(|&v| v == 0.0));
}

#[test]
fn default_shapes() {
    let cfg = MstieConfig::default();
    let p = init_params::<f32>(&cfg, 1);
    let mut g = Graph::new();
    let b = bind(&mut g, &p);
    let x = g.constant(random(&[8, 64, 144, 3], 2).cast());
    let e = encode_branch(&mut g, x, Branch::Color, &b, &cfg).unwrap();
    assert_eq!(g.shape(e.tokens), &[4, 16]);
    assert_eq!(g.shape(e.first_layer), &[8, 31, 71, 8]);
}

#[test]
fn encoder_rejects_bad_input() {
    let cfg = tiny();
    let p = init_params::<f64>(&cfg, 1);
    let mut g = Graph::new();
    let b = bind(&mut g, &p);
    let x = g.constant(Array::zeros(&[4, 9, 9, 1]));
    assert_eq!(encode_branch(&mut g, x, Branch::Color, &b, &cfg).unwrap_err().code(), "E_SHAPE");
}

#[test]
fn spatial_transpose_symmetry() {
    let cfg = tiny();
    let mut p = init_params::<f64>(&cfg, 5);
    for name in ["color.conv1.kernel", "color.conv2.kernel"] {
        let k = p.arrays.get_mut(name).unwrap();
        let s = k.shape().to_vec();
        let (kh, kw, ci, co) = (s[1], s[2], s[3], s[4]);
        let at = |t: usize, i: usize, j: usize, a: usize, b: usize| (((t * kh + i) * kw + j) * ci + a) * co + b;
        let old = k.data().to_vec();
        for t in 0..s[0] {
            for i in 0..kh {
                for j in 0..kw {
                    for a in 0..ci {
                        for b in 0..co {
                            k.data_mut()[at(t, i, j, a, b)] = 0.5 * (old[at(t, i, j, a, b)] + old[at(t, j, i, a, b)]);
                        }
                    }
                }
            }
        }
    }
    let (n, h) = (5, 11);
    let x = random(&[n, h, h, 3], 6);
    let mut xt = x.clone();
    for t in 0..n {
        for r in 0..h {
            for c in 0..h {
                for k in 0..3 {
                    xt.data_mut()[((t * h + c) * h + r) * 3 + k] = x.data()[((t * h + r) * h + c) * 3 + k];
                }
            }
        }
    }
    let tokens = |input: Array<f64>| {
        let mut g = Graph::new();
        let b = bind(&mut g, &p);
        let v = g.constant(input);
        let e = encode_branch(&mut g, v, Branch::Color, &b, &cfg).unwrap();
        g.value(e.tokens).clone()
    };
    let (a, b) = (tokens(x), tokens(xt));
    let diff = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

fn attn_params(d: usize, seed: u64) -> MstieParams<f64> {
    let cfg = MstieConfig { token_dim: d, ..MstieConfig::default() };
    init_params(&cfg, seed)
}

#[test]
fn uniform_attention_returns_column_mean() {
    let p = attn_params(16, 2);
    let kv = random(&[4, 16], 3);
    let mut g = Graph::new();
    let b = bind(&mut g, &p);
    let q = g.constant(Array::zeros(&[4, 16]));
    let kvv = g.constant(kv.clone());
    let out = cross_attend(&mut g, q, kvv, &b, Branch::Color).unwrap();
    let v = mm(&rows(&kv), &rows(p.get("attn.color.value").unwrap()));
    let mean: Vec<f64> = (0..16).map(|c| v.iter().map(|r| r[c]).sum::<f64>() / 4.0).collect();
    let want: Vec<Vec<f64>> = vec![mean; 4];
    assert!(max_diff(&want, g.value(out)) < 1e-14);
}

#[test]
fn single_token_attention_is_value() {
    let p = attn_params(16, 2);
    let (qf, kv) = (random(&[1, 16], 4), random(&[1, 16], 5));
    let mut g = Graph::new();
    let b = bind(&mut g, &p);
    let (q, k) = (g.constant(qf), g.constant(kv.clone()));
    let out = cross_attend(&mut g, q, k, &b, Branch::Structure).unwrap();
    let v = g.matmul(k, b.var("attn.structure.value").unwrap()).unwrap();
    assert_eq!(g.value(out), g.value(v));
}

#[test]
fn cross_attend_matches_reference() {
    for trial in 0..5 {
        let p = attn_params(16, 10 + trial);
        let (qf, kv) = (random(&[4, 16], 20 + trial), random(&[4, 16], 30 + trial));
        for branch in [Branch::Color, Branch::Structure] {
            let n = branch.name();
            let w = |m: &str| rows(p.get(&format!("attn.{n}.{m}")).unwrap());
            let want = attention_ref(&mm(&rows(&qf), &w("query")), &mm(&rows(&kv), &w("key")), &mm(&rows(&kv), &w("value")));
            let mut g = Graph::new();
            let b = bind(&mut g, &p);
            let (q, k) = (g.constant(qf.clone()), g.constant(kv.clone()));
            let out = cross_attend(&mut g, q, k, &b, branch).unwrap();
            assert!(max_diff(&want, g.value(out)) < 1e-10);
        }
    }
}

#[test]
fn fuse_matches_reference() {
    for trial in 0..5 {
        let (ac, as_, vs) = (random(&[4, 16], trial), random(&[4, 16], 50 + trial), random(&[4, 16], 90 + trial));
        let att = attention_ref(&rows(&as_), &rows(&ac), &rows(&ac));
        let want: Vec<Vec<f64>> = att.iter().zip(rows(&vs)).map(|(a, v)| a.iter().zip(v).map(|(x, y)| x + y).collect()).collect();
        let mut g = Graph::new();
        let (a, b, c) = (g.constant(ac), g.constant(as_), g.constant(vs));
        let out = fuse(&mut g, a, b, c).unwrap();
        assert!(max_diff(&want, g.value(out)) < 1e-10);
    }
}

#[test]
fn fuse_special_cases() {
    let mut g = Graph::new();
    let vs = random(&[4, 16], 1);
    let (zero, a_s, v) = (g.constant(Array::zeros(&[4, 16])), g.constant(random(&[4, 16], 2)), g.constant(vs.clone()));
    let out = fuse(&mut g, zero, a_s, v).unwrap();
    assert_eq!(g.value(out), &vs);

    let ac = random(&[4, 16], 3);
    let a_c = g.constant(ac.clone());
    let q0 = g.constant(Array::zeros(&[4, 16]));
    let out = fuse(&mut g, a_c, q0, zero).unwrap();
    let mean: Vec<f64> = (0..16).map(|c| rows(&ac).iter().map(|r| r[c]).sum::<f64>() / 4.0).collect();
    assert!(max_diff(&vec![mean; 4], g.value(out)) < 1e-14);

    let bad = g.constant(Array::zeros(&[3, 16]));
    assert_eq!(fuse(&mut g, a_c, bad, zero).unwrap_err().code(), "E_SHAPE");
}

fn inputs(seed: u64) -> (Array<f64>, Array<f64>) {
    (random(&[8, 13, 17, 3], seed), random(&[7, 13, 17, 3], seed + 1))
}

#[test]
fn forward_produces_distribution_for_every_mode() {
    for branches in [Branches::Both, Branches::ColorOnly, Branches::StructureOnly] {
        for fusion in [FusionMode::Mstie, FusionMode::Concat] {
            let cfg = MstieConfig { branches, fusion, ..tiny() };
            let p = init_params::<f64>(&cfg, 7);
            let (c, s) = inputs(8);
            let probs = predict(&c, &s, &p, &cfg).unwrap();
            assert!(probs.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!((probs[0] + probs[1] - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn ablations_ignore_absent_branch() {
    let (c, s) = inputs(3);
    let (c2, s2) = inputs(40);
    let cfg = MstieConfig { branches: Branches::StructureOnly, ..tiny() };
    let p = init_params::<f64>(&cfg, 1);
    assert_eq!(predict(&c, &s, &p, &cfg).unwrap(), predict(&c2, &s, &p, &cfg).unwrap());
    let cfg = MstieConfig { branches: Branches::ColorOnly, ..tiny() };
    let p = init_params::<f64>(&cfg, 1);
    assert_eq!(predict(&c, &s, &p, &cfg).unwrap(), predict(&c, &s2, &p, &cfg).unwrap());
    let cfg = tiny();
    let p = init_params::<f64>(&cfg, 1);
    assert_ne!(predict(&c, &s, &p, &cfg).unwrap(), predict(&c2, &s, &p, &cfg).unwrap());
}

#[test]
fn forward_is_deterministic() {
    let cfg = tiny();
    let p = init_params::<f32>(&cfg, 1);
    let (c, s) = inputs(5);
    let (c, s) = (c.cast::<f32>(), s.cast::<f32>());
    let a = predict(&c, &s, &p, &cfg).unwrap();
    let b = predict(&c, &s, &p, &cfg).unwrap();
    assert_eq!(a.map(f32::to_bits), b.map(f32::to_bits));
}
