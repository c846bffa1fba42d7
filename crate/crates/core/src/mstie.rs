//! Dual-branch mouth encoder with cross attention, fusion and a small
//! classifier head, built on [`Graph`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Conv3dSpec, Graph, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Array;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Color,
    Structure,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Color => "color",
            Branch::Structure => "structure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Mstie,
    Concat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branches {
    Both,
    ColorOnly,
    StructureOnly,
}

impl Branches {
    pub fn active(self) -> &'static [Branch] {
        match self {
            Branches::Both => &[Branch::Color, Branch::Structure],
            Branches::ColorOnly => &[Branch::Color],
            Branches::StructureOnly => &[Branch::Structure],
        }
    }

    pub fn has(self, b: Branch) -> bool {
        self.active().contains(&b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MstieConfig {
    pub token_count: usize,
    /// Output channels of the second conv layer.
    pub token_dim: usize,
    /// Output channels of the first conv layer.
    pub conv1_channels: usize,
    /// Kernel extent (t, h, w).
    pub kernel: [usize; 3],
    pub spatial_stride: usize,
    pub fusion: FusionMode,
    pub branches: Branches,
    pub hidden: usize,
}

impl Default for MstieConfig {
    fn default() -> Self {
        MstieConfig {
            token_count: 4,
            token_dim: 16,
            conv1_channels: 8,
            kernel: [3, 3, 3],
            spatial_stride: 2,
            fusion: FusionMode::Mstie,
            branches: Branches::Both,
            hidden: 32,
        }
    }
}

impl MstieConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.token_count >= 1
            && self.token_dim >= 1
            && self.conv1_channels >= 1
            && self.hidden >= 1
            && self.spatial_stride >= 1
            && self.kernel.iter().all(|&k| k >= 1);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid model config {self:?}")))
        }
    }

    /// Temporal "same" padding, spatial valid.
    pub fn conv_spec(&self) -> Conv3dSpec {
        Conv3dSpec {
            stride: [1, self.spatial_stride, self.spatial_stride],
            pad: [self.kernel[0] / 2, 0, 0],
        }
    }

    fn uses_attention(&self) -> bool {
        self.branches == Branches::Both && self.fusion == FusionMode::Mstie
    }

    pub fn classifier_inputs(&self) -> usize {
        let width = match (self.branches, self.fusion) {
            (Branches::Both, FusionMode::Concat) => 2 * self.token_dim,
            _ => self.token_dim,
        };
        self.token_count * width
    }

    /// Every parameter with its shape and whether it is a bias.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>, bool)> {
        let [kt, kh, kw] = self.kernel;
        let (c1, d) = (self.conv1_channels, self.token_dim);
        let mut out = Vec::new();
        for b in self.branches.active() {
            let n = b.name();
            out.push((format!("{n}.conv1.kernel"), vec![kt, kh, kw, 3, c1], false));
            out.push((format!("{n}.conv1.bias"), vec![c1], true));
            out.push((format!("{n}.conv2.kernel"), vec![kt, kh, kw, c1, d], false));
            out.push((format!("{n}.conv2.bias"), vec![d], true));
        }
        if self.uses_attention() {
            for b in [Branch::Color, Branch::Structure] {
                for m in ["query", "key", "value"] {
                    out.push((format!("attn.{}.{m}", b.name()), vec![d, d], false));
                }
            }
        }
        out.push(("head.fc1.weight".into(), vec![self.classifier_inputs(), self.hidden], false));
        out.push(("head.fc1.bias".into(), vec![self.hidden], true));
        out.push(("head.fc2.weight".into(), vec![self.hidden, 2], false));
        out.push(("head.fc2.bias".into(), vec![2], true));
        out
    }
}

/// Glorot bound for a kernel or weight matrix: the last axis is fan-out,
/// the rest fan-in (receptive field times input channels).
pub fn init_bound(shape: &[usize]) -> f64 {
    let (&out, rest) = shape.split_last().expect("non-empty shape");
    let fan_in: usize = rest.iter().product();
    let receptive: usize = shape[..shape.len().saturating_sub(2)].iter().product();
    let fan_out = out * receptive.max(1);
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Named model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MstieParams<T> {
    pub arrays: BTreeMap<String, Array<T>>,
    pub seed: u64,
}

impl<T: Scalar> MstieParams<T> {
    pub fn get(&self, name: &str) -> Option<&Array<T>> {
        self.arrays.get(name)
    }

    pub fn cast<U: Scalar>(&self) -> MstieParams<U> {
        MstieParams {
            arrays: self.arrays.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
            seed: self.seed,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.arrays.values().all(Array::all_finite)
    }

    pub fn count(&self) -> usize {
        self.arrays.values().map(Array::len).sum()
    }

    /// Checks names and shapes against the config.
    pub fn check(&self, cfg: &MstieConfig) -> Result<()> {
        let want = cfg.param_shapes();
        if want.len() != self.arrays.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter arrays, found {}",
                want.len(),
                self.arrays.len()
            )));
        }
        for (name, shape, _) in want {
            match self.arrays.get(&name) {
                Some(a) if a.shape() == shape.as_slice() => {}
                Some(a) => {
                    return Err(Error::Shape(format!(
                        "parameter {name} has shape {:?}, expected {shape:?}",
                        a.shape()
                    )))
                }
                None => return Err(Error::Shape(format!("missing parameter {name}"))),
            }
        }
        Ok(())
    }
}

pub fn init_params<T: Scalar>(cfg: &MstieConfig, seed: u64) -> MstieParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrays = cfg
        .param_shapes()
        .into_iter()
        .map(|(name, shape, bias)| {
            let a = if bias {
                Array::zeros(&shape)
            } else {
                let bound = init_bound(&shape);
                let n = shape.iter().product();
                let data = (0..n).map(|_| T::of(rng.gen_range(-bound..=bound))).collect();
                Array::from_vec(&shape, data).expect("shape matches data")
            };
            (name, a)
        })
        .collect();
    MstieParams { arrays, seed }
}

/// Parameters registered on a graph.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Shape(format!("missing parameter {name}")))
    }
}

pub fn bind<T: Scalar>(g: &mut Graph<T>, p: &MstieParams<T>) -> BoundParams {
    BoundParams {
        vars: p.arrays.iter().map(|(k, v)| (k.clone(), g.param(v.clone()))).collect(),
    }
}

/// Tokens and first-layer activations of one branch.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    pub tokens: Var,
    pub first_layer: Var,
}

pub fn encode_branch<T: Scalar>(
    g: &mut Graph<T>,
    seq: Var,
    which: Branch,
    p: &BoundParams,
    cfg: &MstieConfig,
) -> Result<Encoded> {
    let n = which.name();
    let spec = cfg.conv_spec();
    if g.shape(seq).len() != 4 || g.shape(seq)[3] != 3 {
        return Err(Error::Shape(format!("{n} sequence has shape {:?}, expected frames×H×W×3", g.shape(seq))));
    }
    let h = g.conv3d(seq, p.var(&format!("{n}.conv1.kernel"))?, spec)?;
    let h = g.add_bias(h, p.var(&format!("{n}.conv1.bias"))?)?;
    let first_layer = g.relu(h);
    let h = g.conv3d(first_layer, p.var(&format!("{n}.conv2.kernel"))?, spec)?;
    let h = g.add_bias(h, p.var(&format!("{n}.conv2.bias"))?)?;
    let h = g.relu(h);
    let per_frame = g.spatial_mean(h)?;
    let tokens = g.temporal_pool(per_frame, cfg.token_count)?;
    Ok(Encoded { tokens, first_layer })
}

/// `softmax(q kᵀ/√d) v` over rows.
pub fn attention<T: Scalar>(g: &mut Graph<T>, q: Var, k: Var, v: Var) -> Result<Var> {
    let d = *g.shape(k).last().unwrap_or(&1);
    let kt = g.transpose(k)?;
    let logits = g.matmul(q, kt)?;
    let logits = g.scale(logits, T::of(1.0 / (d as f64).sqrt()));
    let weights = g.softmax(logits)?;
    g.matmul(weights, v)
}

/// Cross attention for `branch`: keys and values come from `kv_from`,
/// queries from `q_from`, each through the branch's own projection.
pub fn cross_attend<T: Scalar>(g: &mut Graph<T>, q_from: Var, kv_from: Var, p: &BoundParams, branch: Branch) -> Result<Var> {
    if g.shape(q_from) != g.shape(kv_from) {
        return Err(Error::Shape(format!(
            "cross attention inputs {:?} and {:?}",
            g.shape(q_from),
            g.shape(kv_from)
        )));
    }
    let n = branch.name();
    let q = g.matmul(q_from, p.var(&format!("attn.{n}.query"))?)?;
    let k = g.matmul(kv_from, p.var(&format!("attn.{n}.key"))?)?;
    let v = g.matmul(kv_from, p.var(&format!("attn.{n}.value"))?)?;
    attention(g, q, k, v)
}

/// Attention with keys and values `a_c`, queries `a_s`, plus the structure
/// tokens.
pub fn fuse<T: Scalar>(g: &mut Graph<T>, a_c: Var, a_s: Var, v_s: Var) -> Result<Var> {
    if g.shape(a_c) != g.shape(a_s) || g.shape(a_c) != g.shape(v_s) {
        return Err(Error::Shape(format!(
            "fuse inputs {:?}, {:?}, {:?}",
            g.shape(a_c),
            g.shape(a_s),
            g.shape(v_s)
        )));
    }
    let a = attention(g, a_s, a_c, a_c)?;
    g.add(a, v_s)
}

/// Graph handles produced by a full forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    /// `[p_fake, p_real]`.
    pub probs: Var,
    pub color_first_layer: Option<Var>,
    pub structure_first_layer: Option<Var>,
}

impl Forward {
    /// First-layer activations from `preferred`, or from the surviving branch.
    pub fn first_layer(&self, preferred: Branch) -> Var {
        let (a, b) = match preferred {
            Branch::Color => (self.color_first_layer, self.structure_first_layer),
            Branch::Structure => (self.structure_first_layer, self.color_first_layer),
        };
        a.or(b).expect("at least one branch is active")
    }
}

/// Full pipeline. `color` is `N×H×W×3`, `structure` is `(N−1)×H×W×3`;
/// the input of an inactive branch is never read.
pub fn forward<T: Scalar>(
    g: &mut Graph<T>,
    color: Var,
    structure: Var,
    p: &BoundParams,
    cfg: &MstieConfig,
) -> Result<Forward> {
    let c = match cfg.branches.has(Branch::Color) {
        true => Some(encode_branch(g, color, Branch::Color, p, cfg)?),
        false => None,
    };
    let s = match cfg.branches.has(Branch::Structure) {
        true => Some(encode_branch(g, structure, Branch::Structure, p, cfg)?),
        false => None,
    };
    let fused = match (c, s) {
        (Some(c), Some(s)) => match cfg.fusion {
            FusionMode::Mstie => {
                let a_c = cross_attend(g, s.tokens, c.tokens, p, Branch::Color)?;
                let a_s = cross_attend(g, c.tokens, s.tokens, p, Branch::Structure)?;
                fuse(g, a_c, a_s, s.tokens)?
            }
            FusionMode::Concat => g.concat(c.tokens, s.tokens)?,
        },
        (Some(only), None) | (None, Some(only)) => only.tokens,
        (None, None) => unreachable!("branch set is never empty"),
    };
    let flat = g.reshape(fused, &[cfg.classifier_inputs()])?;
    let h = g.dense(flat, p.var("head.fc1.weight")?, p.var("head.fc1.bias")?)?;
    let h = g.relu(h);
    let logits = g.dense(h, p.var("head.fc2.weight")?, p.var("head.fc2.bias")?)?;
    let probs = g.softmax(logits)?;
    Ok(Forward {
        probs,
        color_first_layer: c.map(|e| e.first_layer),
        structure_first_layer: s.map(|e| e.first_layer),
    })
}

/// Forward pass without gradients; returns `[p_fake, p_real]`.
pub fn predict<T: Scalar>(color: &Array<T>, structure: &Array<T>, p: &MstieParams<T>, cfg: &MstieConfig) -> Result<[T; 2]> {
    let mut g = Graph::new();
    let vars = BoundParams {
        vars: p.arrays.iter().map(|(k, v)| (k.clone(), g.constant(v.clone()))).collect(),
    };
    let c = g.constant(color.clone());
    let s = g.constant(structure.clone());
    let out = forward(&mut g, c, s, &vars, cfg)?;
    let probs = g.value(out.probs).data();
    Ok([probs[0], probs[1]])
}

#[cfg(test)]
mod tests;
