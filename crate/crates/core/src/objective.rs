//! Similarity-supervised inconsistency loss, classification loss and their
//! weighted total.

use serde::{Deserialize, Serialize};

use crate::diff::{Graph, Var};
use crate::error::{Error, Result};
use crate::ingest::Label;
use crate::mstie::Branch;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_cl: f64,
    pub lambda_il: f64,
    pub clamp_eps: f64,
    /// Branch whose first-layer activations feed the inconsistency loss.
    pub il_source: Branch,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_cl: 1.0,
            lambda_il: 5.0,
            clamp_eps: 1e-7,
            il_source: Branch::Color,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_cl >= 0.0 && self.lambda_il >= 0.0 && self.clamp_eps > 0.0 && self.clamp_eps < 0.5 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid loss weights {self:?}")))
        }
    }
}

fn sum_all<T: Scalar>(g: &mut Graph<T>, vars: &[Var]) -> Var {
    let mut acc = vars[0];
    for &v in &vars[1..] {
        acc = g.add(acc, v).expect("scalars share a shape");
    }
    acc
}

/// Mean pairwise global SSIM between the channel-averaged temporal slices
/// of `f` (`N'×H'×W'×C'`), clamped to `[eps, 1−eps]`.
pub fn avg_similarity<T: Scalar>(g: &mut Graph<T>, f: Var, eps: f64) -> Result<Var> {
    let shape = g.shape(f).to_vec();
    if shape.len() != 4 || shape[0] < 2 {
        return Err(Error::Shape(format!("average similarity needs N'×H'×W'×C' with N' ≥ 2, got {shape:?}")));
    }
    let maps = g.channel_mean(f)?;
    let slices = (0..shape[0]).map(|i| g.slice(maps, i)).collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::with_capacity(shape[0] * (shape[0] - 1) / 2);
    for i in 0..slices.len() {
        for j in i + 1..slices.len() {
            pairs.push(g.global_ssim(slices[i], slices[j])?);
        }
    }
    // Summing in value order makes the result independent of slice order.
    pairs.sort_by(|&a, &b| g.value(a).data()[0].as_f64().total_cmp(&g.value(b).data()[0].as_f64()));
    let total = sum_all(g, &pairs);
    let mean = g.scale(total, T::of(1.0 / pairs.len() as f64));
    Ok(g.clamp(mean, T::of(eps), T::of(1.0 - eps)))
}

/// Binary cross-entropy of the clip similarity scores against the labels,
/// with real clips as the positive class.
pub fn inconsistency_loss<T: Scalar>(g: &mut Graph<T>, avg_s: &[Var], labels: &[Label]) -> Result<Var> {
    check_batch(avg_s.len(), labels.len())?;
    let terms: Vec<Var> = avg_s
        .iter()
        .zip(labels)
        .map(|(&s, &y)| match y {
            Label::Real => g.ln(s),
            Label::Fake => {
                let complement = g.affine(s, -T::one(), T::one());
                g.ln(complement)
            }
        })
        .collect();
    let total = sum_all(g, &terms);
    Ok(g.scale(total, T::of(-1.0 / terms.len() as f64)))
}

/// Mean negative log-likelihood of the true class; probabilities are
/// clamped to `[eps, 1−eps]` before the log.
pub fn classification_loss<T: Scalar>(g: &mut Graph<T>, probs: &[Var], labels: &[Label], eps: f64) -> Result<Var> {
    check_batch(probs.len(), labels.len())?;
    let mut terms = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        if g.shape(p) != [2] {
            return Err(Error::Shape(format!("class probabilities of shape {:?}", g.shape(p))));
        }
        let py = g.slice(p, y.index())?;
        let py = g.clamp(py, T::of(eps), T::of(1.0 - eps));
        terms.push(g.ln(py));
    }
    let total = sum_all(g, &terms);
    Ok(g.scale(total, T::of(-1.0 / terms.len() as f64)))
}

/// `λ_cl·l_cl + λ_il·l_il`.
pub fn total_loss<T: Scalar>(g: &mut Graph<T>, l_cl: Var, l_il: Var, w: &LossWeights) -> Result<Var> {
    let a = g.scale(l_cl, T::of(w.lambda_cl));
    let b = g.scale(l_il, T::of(w.lambda_il));
    g.add(a, b)
}

fn check_batch(n: usize, labels: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if n != labels {
        return Err(Error::Shape(format!("{n} predictions for {labels} labels")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Array;

    fn scalar(g: &mut Graph<f64>, v: f64) -> Var {
        g.constant(Array::scalar(v))
    }

    fn val(g: &Graph<f64>, v: Var) -> f64 {
        g.value(v).data()[0]
    }

    #[test]
    fn inconsistency_examples() {
        let mut g = Graph::new();
        let s = scalar(&mut g, 1.0 - 1e-7);
        let l = inconsistency_loss(&mut g, &[s], &[Label::Real]).unwrap();
        assert!((val(&g, l) - -(1.0f64 - 1e-7).ln()).abs() < 1e-15);
        assert!((val(&g, l) - 1e-7).abs() < 1e-13);

        let s = scalar(&mut g, 0.5);
        let l = inconsistency_loss(&mut g, &[s], &[Label::Fake]).unwrap();
        assert!((val(&g, l) - std::f64::consts::LN_2).abs() < 1e-15);

        let a = scalar(&mut g, 0.9);
        let b = scalar(&mut g, 0.2);
        let l = inconsistency_loss(&mut g, &[a, b], &[Label::Real, Label::Fake]).unwrap();
        let want = -0.5 * (0.9f64.ln() + 0.8f64.ln());
        assert!((val(&g, l) - want).abs() < 1e-15);
        assert!((val(&g, l) - 0.164252).abs() < 5e-7);
    }

    #[test]
    fn classification_examples() {
        let mut g = Graph::new();
        let p = g.constant(Array::from_vec(&[2], vec![0.0, 1.0]).unwrap());
        let l = classification_loss(&mut g, &[p], &[Label::Real], 1e-7).unwrap();
        assert!((val(&g, l) - 1e-7).abs() < 1e-13);

        let p = g.constant(Array::from_vec(&[2], vec![0.5, 0.5]).unwrap());
        let l = classification_loss(&mut g, &[p], &[Label::Fake], 1e-7).unwrap();
        assert!((val(&g, l) - std::f64::consts::LN_2).abs() < 1e-15);

        let a = g.constant(Array::from_vec(&[2], vec![0.7, 0.3]).unwrap());
        let b = g.constant(Array::from_vec(&[2], vec![0.2, 0.8]).unwrap());
        let l = classification_loss(&mut g, &[a, b], &[Label::Fake, Label::Real], 1e-7).unwrap();
        let want = -0.5 * (0.7f64.ln() + 0.8f64.ln());
        assert!((val(&g, l) - want).abs() < 1e-15);
        assert!((val(&g, l) - 0.289909).abs() < 5e-7);
    }

    #[test]
    fn empty_batches_are_rejected() {
        let mut g = Graph::<f64>::new();
        assert_eq!(inconsistency_loss(&mut g, &[], &[]).unwrap_err().code(), "E_EMPTY_BATCH");
        assert_eq!(classification_loss(&mut g, &[], &[], 1e-7).unwrap_err().code(), "E_EMPTY_BATCH");
    }

    #[test]
    fn total_examples() {
        let mut g = Graph::new();
        let w = LossWeights::default();
        let (cl, il) = (scalar(&mut g, 0.3), scalar(&mut g, 0.1));
        let t = total_loss(&mut g, cl, il, &w).unwrap();
        assert!((val(&g, t) - 0.8).abs() < 1e-15);

        let no_il = LossWeights { lambda_il: 0.0, ..w.clone() };
        let t = total_loss(&mut g, cl, il, &no_il).unwrap();
        assert_eq!(val(&g, t), 0.3);

        let zero = scalar(&mut g, 0.0);
        let t = total_loss(&mut g, zero, zero, &w).unwrap();
        assert_eq!(val(&g, t), 0.0);
    }

    #[test]
    fn total_is_exactly_linear() {
        let w = LossWeights { lambda_cl: 1.5, lambda_il: 3.25, ..LossWeights::default() };
        for (a, b) in [(0.37, 1.91), (2.0, 0.125), (1e-3, 7.7)] {
            let mut g = Graph::new();
            let (cl, il, zero) = (scalar(&mut g, a), scalar(&mut g, b), scalar(&mut g, 0.0));
            let both = total_loss(&mut g, cl, il, &w).unwrap();
            let only_cl = total_loss(&mut g, cl, zero, &w).unwrap();
            let only_il = total_loss(&mut g, zero, il, &w).unwrap();
            assert_eq!(val(&g, only_cl), 1.5 * a);
            assert_eq!(val(&g, only_il), 3.25 * b);
            assert_eq!(val(&g, both), val(&g, only_cl) + val(&g, only_il));
        }
    }

    #[test]
    fn inconsistency_is_monotone_in_the_right_direction() {
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        for (label, increasing) in [(Label::Real, false), (Label::Fake, true)] {
            let losses: Vec<f64> = grid
                .iter()
                .map(|&s| {
                    let mut g = Graph::new();
                    let v = scalar(&mut g, s);
                    let l = inconsistency_loss(&mut g, &[v], &[label]).unwrap();
                    val(&g, l)
                })
                .collect();
            for w in losses.windows(2) {
                assert_eq!(w[1] > w[0], increasing, "{label}: {w:?}");
            }
        }
    }

    fn random_f(seed: u64, n: usize) -> Array<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let shape = [n, 5, 6, 3];
        let len = shape.iter().product();
        Array::from_vec(&shape, (0..len).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    fn ssim_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
        let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n;
        let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
        let (c1, c2) = (1e-4, 9e-4);
        let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        s.clamp(0.0, 1.0)
    }

    #[test]
    fn avg_similarity_matches_pair_enumeration() {
        let f = random_f(4, 4);
        let [n, h, w, c] = [4, 5, 6, 3];
        let maps: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                (0..h * w)
                    .map(|p| (0..c).map(|k| f.data()[(t * h * w + p) * c + k]).sum::<f64>() / c as f64)
                    .collect()
            })
            .collect();
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let want = pairs.iter().map(|&(i, j)| ssim_oracle(&maps[i], &maps[j])).sum::<f64>() / 6.0;
        let mut g = Graph::new();
        let v = g.constant(f);
        let s = avg_similarity(&mut g, v, 1e-7).unwrap();
        assert!((val(&g, s) - want).abs() < 1e-12, "{} vs {want}", val(&g, s));
    }

    #[test]
    fn avg_similarity_special_cases() {
        let one = random_f(1, 1);
        let mut same = one.data().to_vec();
        same.extend_from_slice(one.data());
        same.extend_from_slice(one.data());
        let mut g = Graph::new();
        let v = g.constant(Array::from_vec(&[3, 5, 6, 3], same).unwrap());
        let s = avg_similarity(&mut g, v, 1e-7).unwrap();
        assert_eq!(val(&g, s), 1.0 - 1e-7);

        let base = random_f(2, 1);
        let mut two = base.data().to_vec();
        two.extend(base.data().iter().zip(random_f(5, 1).data()).map(|(a, b)| a + 0.3 * b));
        let a = g.constant(Array::from_vec(&[2, 5, 6, 3], two).unwrap());
        let s = avg_similarity(&mut g, a, 1e-7).unwrap();
        let maps = g.channel_mean(a).unwrap();
        let (x, y) = (g.slice(maps, 0).unwrap(), g.slice(maps, 1).unwrap());
        let pair = g.global_ssim(x, y).unwrap();
        assert!(val(&g, pair) > 0.1 && val(&g, pair) < 0.99);
        assert_eq!(val(&g, s), val(&g, pair));

        let single = g.constant(random_f(3, 1));
        assert_eq!(avg_similarity(&mut g, single, 1e-7).unwrap_err().code(), "E_SHAPE");
    }

    #[test]
    fn avg_similarity_is_permutation_invariant() {
        let f = random_f(8, 5);
        let chunk = f.len() / 5;
        for perm in [[4, 3, 2, 1, 0], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3]] {
            let data: Vec<f64> = perm.iter().flat_map(|&i| f.data()[i * chunk..(i + 1) * chunk].to_vec()).collect();
            let mut g = Graph::new();
            let a = g.constant(f.clone());
            let b = g.constant(Array::from_vec(f.shape(), data).unwrap());
            let sa = avg_similarity(&mut g, a, 1e-7).unwrap();
            let sb = avg_similarity(&mut g, b, 1e-7).unwrap();
            assert_eq!(val(&g, sa), val(&g, sb));
        }
    }

    #[test]
    fn loss_gradient_wrt_features_matches_finite_differences() {
        use crate::diff::gradcheck;
        let f = random_f(12, 4).map(|v| 0.2 + 0.6 * v);
        for label in [Label::Real, Label::Fake] {
            let report = gradcheck::check(&[f.clone()], 1e-5, |g, v| {
                let s = avg_similarity(g, v[0], 1e-7)?;
                let il = inconsistency_loss(g, &[s], &[label])?;
                let p = g.constant(Array::from_vec(&[2], vec![0.4, 0.6]).unwrap());
                let cl = classification_loss(g, &[p], &[label], 1e-7)?;
                total_loss(g, cl, il, &LossWeights::default())
            })
            .unwrap();
            assert!(report.max_rel_err <= 1e-4, "{label}: {report:?}");
        }
    }
}
