// SPDX-License-Identifier: Apache-2.0

//! The training recipe shared by the command line and the end-to-end tests:
//! sample fragments from labelled frames, hold out a validation split,
//! bundle, then retrain with best-epoch selection.

use crate::error::{Error, Result};
use crate::fragment::{
    encode_dataset, evaluate_encoded, retrain_encoded, sample_fragments, train_initial_encoded,
    Confusion, FragmentModel, LabeledFrameSet, RetrainOptions,
};
use crate::hdc::EncoderParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub fragment: usize,
    pub dim: usize,
    pub per_frame: usize,
    pub val_fraction: f64,
    pub eta: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            fragment: 32,
            dim: 4096,
            per_frame: 32,
            val_fraction: 0.2,
            eta: 0.05,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub initial: FragmentModel,
    pub model: FragmentModel,
    pub train_initial: Confusion,
    pub val_initial: Confusion,
    pub val_final: Confusion,
    pub train_items: usize,
    pub val_items: usize,
}

/// Fragments are drawn only from frames that hold objects, so every frame
/// can supply both classes.
pub fn train(set: &LabeledFrameSet, opts: &TrainOptions) -> Result<TrainOutcome> {
    let occupied: Vec<usize> = set
        .presence()
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| p.then_some(i))
        .collect();
    if occupied.is_empty() {
        return Err(Error::data("no labelled objects to train on"));
    }
    let data = sample_fragments(
        &set.subset(&occupied),
        opts.fragment,
        opts.per_frame,
        opts.seed,
    )?;
    let (train_set, val_set) = data.split(opts.val_fraction, opts.seed)?;
    let enc = EncoderParams::generate(opts.seed, opts.fragment, opts.fragment, opts.dim)?;
    let train_enc = encode_dataset(&train_set, &enc)?;
    let val_enc = encode_dataset(&val_set, &enc)?;
    let (train_labels, val_labels) = (train_set.labels(), val_set.labels());
    let initial = train_initial_encoded(&train_set, &train_enc, &enc)?;
    let model = retrain_encoded(
        &initial,
        &train_enc,
        &train_labels,
        &val_enc,
        &val_labels,
        RetrainOptions {
            eta: opts.eta,
            epochs: opts.epochs,
            seed: opts.seed,
        },
    )?;
    Ok(TrainOutcome {
        train_initial: evaluate_encoded(&initial, &train_enc, &train_labels),
        val_initial: evaluate_encoded(&initial, &val_enc, &val_labels),
        val_final: evaluate_encoded(&model, &val_enc, &val_labels),
        initial,
        model,
        train_items: train_set.len(),
        val_items: val_set.len(),
    })
}
