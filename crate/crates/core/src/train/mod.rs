//! Minibatch Adam training over extracted sequence bundles.

mod adam;
mod checkpoint;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, Moments};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::dataset::{stable_hash, DatasetIndex, Split};
use crate::diff::{Graph, Var};
use crate::error::{Error, Result};
use crate::extract::{ExtractConfig, SequenceBundle};
use crate::ingest::Label;
use crate::mstie::{self, bind, init_params, BoundParams, MstieConfig, MstieParams};
use crate::objective::{avg_similarity, classification_loss, inconsistency_loss, total_loss, LossWeights};
use crate::scalar::Scalar;
use crate::tensor::Array;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub adam_eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub model: MstieConfig,
    /// Used when the dataset holds raw manifests rather than bundles.
    pub extract: ExtractConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            adam_eps: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            weights: LossWeights::default(),
            model: MstieConfig::default(),
            extract: ExtractConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Reduced-resolution profile that trains in minutes on a CPU.
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 4,
            extract: ExtractConfig {
                crop_h: 32,
                crop_w: 72,
                ..ExtractConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" | "default" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!("unknown preset {other:?} (desk, default)"))),
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.adam_eps > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.batch_size >= 1;
        if !ok {
            return Err(Error::Config(format!(
                "invalid optimizer settings: lr {}, eps {}, betas ({}, {}), batch {}",
                self.lr, self.adam_eps, self.beta1, self.beta2, self.batch_size
            )));
        }
        self.weights.validate()?;
        self.model.validate()?;
        self.extract.validate()
    }
}

/// One labeled training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub clip_id: String,
    pub label: Label,
    pub color: Array<f32>,
    pub structure: Array<f32>,
}

impl Sample {
    pub fn from_bundle(b: SequenceBundle, label: Option<Label>) -> Option<Self> {
        Some(Sample {
            clip_id: b.clip_id,
            label: label.or(b.label)?,
            color: b.sequences.color,
            structure: b.sequences.structure,
        })
    }
}

/// A dataset entry that could not be turned into sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub clip_id: String,
    pub code: String,
    pub message: String,
}

/// Reads a sequence bundle, or a manifest that is extracted on the fly.
pub fn load_sequences(path: impl AsRef<Path>, extract: &ExtractConfig) -> Result<SequenceBundle> {
    let path = path.as_ref();
    if SequenceBundle::sniff(path) {
        SequenceBundle::load(path)
    } else {
        SequenceBundle::extract(&crate::ingest::load_manifest(path)?, extract)
    }
}

/// Loads every entry of `split` in index order. Entries whose manifests
/// fail with a data error are skipped and reported; other errors abort.
pub fn load_split(
    index: &DatasetIndex,
    split: Option<Split>,
    extract: &ExtractConfig,
) -> Result<(Vec<(Option<Label>, SequenceBundle)>, Vec<Skipped>)> {
    let entries: Vec<_> = index.entries.iter().filter(|e| split.is_none_or(|s| e.split == s)).collect();
    let loaded: Vec<_> = entries
        .par_iter()
        .map(|e| (e, load_sequences(index.path_of(e), extract)))
        .collect();
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (e, r) in loaded {
        match r {
            Ok(b) => ok.push((e.label.or(b.label), b)),
            Err(err) if err.is_data_error() => {
                log::warn!("skipping {}: {err}", e.clip_id);
                skipped.push(Skipped {
                    clip_id: e.clip_id.clone(),
                    code: err.code().to_string(),
                    message: err.to_string(),
                });
            }
            Err(err) => return Err(err),
        }
    }
    Ok((ok, skipped))
}

/// Labeled training samples of one split.
pub fn load_samples(index: &DatasetIndex, split: Split, extract: &ExtractConfig) -> Result<(Vec<Sample>, Vec<Skipped>)> {
    let (bundles, mut skipped) = load_split(index, Some(split), extract)?;
    let mut samples = Vec::new();
    for (label, b) in bundles {
        let id = b.clip_id.clone();
        match Sample::from_bundle(b, label) {
            Some(s) => samples.push(s),
            None => skipped.push(Skipped {
                clip_id: id,
                code: "E_SCHEMA".into(),
                message: "clip has no label".into(),
            }),
        }
    }
    Ok((samples, skipped))
}

/// Graph handles for one clip's losses.
#[derive(Clone, Copy, Debug)]
pub struct ClipLoss {
    pub probs: Var,
    pub avg_s: Var,
    pub cl: Var,
    pub il: Var,
    pub total: Var,
}

/// Builds the full model and per-clip objective on `g`.
pub fn clip_loss<T: Scalar>(
    g: &mut Graph<T>,
    color: Var,
    structure: Var,
    label: Label,
    p: &BoundParams,
    model: &MstieConfig,
    weights: &LossWeights,
) -> Result<ClipLoss> {
    let out = mstie::forward(g, color, structure, p, model)?;
    let f = out.first_layer(weights.il_source);
    let avg_s = avg_similarity(g, f, weights.clamp_eps)?;
    let il = inconsistency_loss(g, &[avg_s], &[label])?;
    let cl = classification_loss(g, &[out.probs], &[label], weights.clamp_eps)?;
    let total = total_loss(g, cl, il, weights)?;
    Ok(ClipLoss {
        probs: out.probs,
        avg_s,
        cl,
        il,
        total,
    })
}

/// Mean per-clip losses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub cl: f64,
    pub il: f64,
    pub total: f64,
}

type Grads = BTreeMap<String, Array<f32>>;

fn clip_pass(s: &Sample, params: &MstieParams<f32>, cfg: &TrainConfig, scale: f32) -> Result<([f64; 3], Grads)> {
    let mut g = Graph::new();
    let bound = bind(&mut g, params);
    let c = g.constant(s.color.clone());
    let st = g.constant(s.structure.clone());
    let l = clip_loss(&mut g, c, st, s.label, &bound, &cfg.model, &cfg.weights)?;
    let scaled = g.scale(l.total, scale);
    g.backward(scaled)?;
    let v = |x: Var| g.value(x).data()[0] as f64;
    let losses = [v(l.cl), v(l.il), v(l.total)];
    let grads = bound
        .vars
        .iter()
        .map(|(k, &var)| {
            let grad = g.grad(var).cloned().unwrap_or_else(|| Array::zeros(g.shape(var)));
            (k.clone(), grad)
        })
        .collect();
    Ok((losses, grads))
}

/// Mean losses of `params` over `samples`, without updating anything.
pub fn evaluate_loss(samples: &[Sample], params: &MstieParams<f32>, cfg: &TrainConfig) -> Result<EpochLoss> {
    let per: Vec<[f64; 3]> = samples
        .par_iter()
        .map(|s| {
            let mut g = Graph::new();
            let bound = BoundParams {
                vars: params.arrays.iter().map(|(k, v)| (k.clone(), g.constant(v.clone()))).collect(),
            };
            let c = g.constant(s.color.clone());
            let st = g.constant(s.structure.clone());
            let l = clip_loss(&mut g, c, st, s.label, &bound, &cfg.model, &cfg.weights)?;
            let v = |x: Var| g.value(x).data()[0] as f64;
            Ok([v(l.cl), v(l.il), v(l.total)])
        })
        .collect::<Result<_>>()?;
    Ok(mean_losses(0, &per))
}

fn mean_losses(epoch: usize, per: &[[f64; 3]]) -> EpochLoss {
    let n = per.len().max(1) as f64;
    let sum = |k: usize| per.iter().map(|l| l[k]).sum::<f64>() / n;
    EpochLoss {
        epoch,
        cl: sum(0),
        il: sum(1),
        total: sum(2),
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLoss>,
}

/// Renders the loss trace as `epoch,L_CL,L_IL,L_total` lines.
pub fn format_loss_log(log: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,L_CL,L_IL,L_total\n");
    for e in log {
        let _ = writeln!(out, "{},{},{},{}", e.epoch, e.cl, e.il, e.total);
    }
    out
}

pub fn check_dataset(samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let fakes = samples.iter().filter(|s| s.label == Label::Fake).count();
    match fakes {
        0 => Err(Error::SingleClass("real")),
        n if n == samples.len() => Err(Error::SingleClass("fake")),
        _ => Ok(()),
    }
}

/// Trains from a fresh initialization seeded by `cfg.seed`.
pub fn train(samples: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(samples, cfg, |_| {})
}

/// Like [`train`], calling `on_epoch` after each epoch.
pub fn train_with(samples: &[Sample], cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochLoss)) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(samples)?;
    let mut params = init_params::<f32>(&cfg.model, cfg.seed);
    let mut moments = Moments::zeros_like(&params);
    let adam = cfg.adam();
    let mut step = 0u64;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(stable_hash(cfg.seed, &format!("epoch-{epoch}"))));
        let mut per = Vec::with_capacity(samples.len());
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f32;
            let results = batch
                .par_iter()
                .map(|&i| clip_pass(&samples[i], &params, cfg, scale))
                .collect::<Result<Vec<_>>>()?;
            let mut grads: Grads = params.arrays.iter().map(|(k, a)| (k.clone(), Array::zeros(a.shape()))).collect();
            for (losses, clip_grads) in results {
                per.push(losses);
                for (k, gk) in clip_grads {
                    let acc = grads.get_mut(&k).expect("same parameter set");
                    for (a, b) in acc.data_mut().iter_mut().zip(gk.data()) {
                        *a += *b;
                    }
                }
            }
            step += 1;
            adam_step(&mut params, &grads, &mut moments, step, &adam)?;
        }
        let e = mean_losses(epoch, &per);
        log::info!("epoch {epoch}: L_CL {:.5} L_IL {:.5} L_total {:.5}", e.cl, e.il, e.total);
        on_epoch(&e);
        log.push(e);
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: cfg.clone(),
            epoch: cfg.epochs,
            step,
            params,
            moments,
        },
        log,
    })
}

impl Checkpoint {
    /// `[p_fake, p_real]` for one clip's sequences.
    pub fn predict(&self, b: &SequenceBundle) -> Result<[f32; 2]> {
        mstie::predict(&b.sequences.color, &b.sequences.structure, &self.params, &self.config.model)
    }
}
