// SPDX-License-Identifier: Apache-2.0

//! Fragment dataset construction and the two-class HDC fragment classifier.

use crate::error::{Error, Result};
use crate::hdc::{cosine_slices, encode_batch, EncoderParams, Hypervector};
use crate::rng::{stream, SeededRng, RNG_ALGORITHM_ID};
use crate::sliding::Frame;

/// Attempts allowed per requested fragment before sampling gives up.
pub const SAMPLE_RETRY_BUDGET: usize = 1000;

/// Axis-aligned box in pixels, top-left origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    /// True when the box overlaps the `size x size` window at `(row, col)`
    /// with positive area.
    pub fn intersects_window(&self, row: usize, col: usize, size: usize) -> bool {
        self.x < col + size && col < self.x + self.w && self.y < row + size && row < self.y + self.h
    }

    pub fn center_in_window(&self, row: usize, col: usize, size: usize) -> bool {
        let (cx, cy) = self.center();
        let (r, c, s) = (row as f64, col as f64, size as f64);
        cx >= c && cx < c + s && cy >= r && cy < r + s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFrameSet {
    pub frames: Vec<Frame>,
    pub labels: Vec<Vec<BoundingBox>>,
}

impl LabeledFrameSet {
    pub fn new(frames: Vec<Frame>, labels: Vec<Vec<BoundingBox>>) -> Result<Self> {
        if frames.len() != labels.len() {
            return Err(Error::data(format!(
                "{} frames but {} label lists",
                frames.len(),
                labels.len()
            )));
        }
        for (i, (f, boxes)) in frames.iter().zip(&labels).enumerate() {
            for b in boxes {
                if b.w == 0 || b.h == 0 || b.x + b.w > f.width() || b.y + b.h > f.height() {
                    return Err(Error::data(format!(
                        "frame {i}: box ({}, {}, {}, {}) outside {}x{} frame",
                        b.x,
                        b.y,
                        b.w,
                        b.h,
                        f.height(),
                        f.width()
                    )));
                }
            }
        }
        Ok(LabeledFrameSet { frames, labels })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Per-frame presence flags (a frame is positive if it has any box).
    pub fn presence(&self) -> Vec<bool> {
        self.labels.iter().map(|b| !b.is_empty()).collect()
    }

    /// Frames at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledFrameSet {
        LabeledFrameSet {
            frames: indices.iter().map(|&i| self.frames[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Class {
    Neg,
    Pos,
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Class::Neg => "neg",
            Class::Pos => "pos",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FragmentItem {
    /// Row-major `frag x frag` pixels.
    pub pixels: Vec<f32>,
    pub label: Class,
    pub frame: usize,
    pub origin: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FragmentDataset {
    pub frag: usize,
    pub items: Vec<FragmentItem>,
}

impl FragmentDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `(negatives, positives)`.
    pub fn counts(&self) -> (usize, usize) {
        let pos = self.items.iter().filter(|i| i.label == Class::Pos).count();
        (self.items.len() - pos, pos)
    }

    pub fn labels(&self) -> Vec<Class> {
        self.items.iter().map(|i| i.label).collect()
    }

    /// Stratified, seed-deterministic hold-out split. Returns `(train, val)`;
    /// each part keeps the original item order.
    pub fn split(
        &self,
        val_fraction: f64,
        seed: u64,
    ) -> Result<(FragmentDataset, FragmentDataset)> {
        if !(0.0..1.0).contains(&val_fraction) {
            return Err(Error::usage("validation fraction must be in [0, 1)"));
        }
        let mut rng = SeededRng::new(seed, stream::SPLIT);
        let mut in_val = vec![false; self.items.len()];
        for class in [Class::Neg, Class::Pos] {
            let mut idx: Vec<usize> = (0..self.items.len())
                .filter(|&i| self.items[i].label == class)
                .collect();
            rng.shuffle(&mut idx);
            let take = (idx.len() as f64 * val_fraction).round() as usize;
            for &i in &idx[..take] {
                in_val[i] = true;
            }
        }
        let pick = |want: bool| FragmentDataset {
            frag: self.frag,
            items: self
                .items
                .iter()
                .zip(&in_val)
                .filter(|(_, &v)| v == want)
                .map(|(item, _)| item.clone())
                .collect(),
        };
        Ok((pick(false), pick(true)))
    }
}

/// Draws `per_frame` windows from every frame. Item classes alternate
/// pos/neg over the whole run, which keeps the two classes within one of
/// each other. Positive windows contain at least one box center; negative
/// windows overlap no box.
pub fn sample_fragments(
    set: &LabeledFrameSet,
    frag: usize,
    per_frame: usize,
    seed: u64,
) -> Result<FragmentDataset> {
    if per_frame == 0 {
        return Err(Error::usage("fragments per frame must be at least 1"));
    }
    if frag == 0 {
        return Err(Error::usage("fragment size must be positive"));
    }
    let mut rng = SeededRng::new(seed, stream::SAMPLING);
    let mut items = Vec::with_capacity(set.len() * per_frame);
    let mut counter = 0usize;
    for (fi, (frame, boxes)) in set.frames.iter().zip(&set.labels).enumerate() {
        if frag > frame.height() || frag > frame.width() {
            return Err(Error::usage(format!(
                "fragment size {frag} exceeds frame {fi} ({}x{})",
                frame.height(),
                frame.width()
            )));
        }
        for _ in 0..per_frame {
            let label = if counter.is_multiple_of(2) {
                Class::Pos
            } else {
                Class::Neg
            };
            counter += 1;
            let origin = sample_window(frame, boxes, frag, label, &mut rng).ok_or_else(|| {
                Error::data(format!(
                    "frame {fi}: no {label} fragment found within {SAMPLE_RETRY_BUDGET} attempts"
                ))
            })?;
            items.push(FragmentItem {
                pixels: frame.window(origin.0, origin.1, frag, frag),
                label,
                frame: fi,
                origin,
            });
        }
    }
    Ok(FragmentDataset { frag, items })
}

fn sample_window(
    frame: &Frame,
    boxes: &[BoundingBox],
    frag: usize,
    label: Class,
    rng: &mut SeededRng,
) -> Option<(usize, usize)> {
    if label == Class::Pos && boxes.is_empty() {
        return None;
    }
    let rows = frame.height() - frag + 1;
    let cols = frame.width() - frag + 1;
    for _ in 0..SAMPLE_RETRY_BUDGET {
        let r = rng.below(rows);
        let c = rng.below(cols);
        let ok = match label {
            Class::Pos => boxes.iter().any(|b| b.center_in_window(r, c, frag)),
            Class::Neg => !boxes.iter().any(|b| b.intersects_window(r, c, frag)),
        };
        if ok {
            return Some((r, c));
        }
    }
    None
}

/// Row-major flatten (already flat here) followed by L2 normalization. The
/// zero fragment maps to the zero vector.
pub fn normalize(fragment: &[f32]) -> Vec<f64> {
    let norm = fragment
        .iter()
        .map(|&v| v as f64 * v as f64)
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        return vec![0.0; fragment.len()];
    }
    fragment.iter().map(|&v| v as f64 / norm).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub eta: f64,
    /// 0 means the input model was kept.
    pub best_epoch: usize,
    /// Validation F1 of the input model followed by one entry per epoch.
    pub val_f1: Vec<f64>,
}

/// Two-class HDC fragment classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct FragmentModel {
    pub c_neg: Hypervector,
    pub c_pos: Hypervector,
    pub enc_seed: u64,
    pub frag_h: usize,
    pub frag_w: usize,
    pub dim: usize,
    pub rng_algorithm_id: String,
    pub meta: Option<TrainingMeta>,
    encoder: EncoderParams,
}

impl FragmentModel {
    /// Rebuilds a model from stored class vectors, regenerating the encoder
    /// from its seed.
    pub fn from_parts(
        c_neg: Hypervector,
        c_pos: Hypervector,
        enc_seed: u64,
        frag_h: usize,
        frag_w: usize,
        rng_algorithm_id: &str,
    ) -> Result<Self> {
        if rng_algorithm_id != RNG_ALGORITHM_ID {
            return Err(Error::data(format!(
                "model uses random generator '{rng_algorithm_id}', expected '{RNG_ALGORITHM_ID}'"
            )));
        }
        if c_neg.dim() != c_pos.dim() {
            return Err(Error::data("class vectors differ in dimension"));
        }
        let dim = c_neg.dim();
        let encoder = EncoderParams::generate(enc_seed, frag_h, frag_w, dim)?;
        Ok(FragmentModel {
            c_neg,
            c_pos,
            enc_seed,
            frag_h,
            frag_w,
            dim,
            rng_algorithm_id: rng_algorithm_id.to_string(),
            meta: None,
            encoder,
        })
    }

    pub fn encoder(&self) -> &EncoderParams {
        &self.encoder
    }

    pub fn class_vector(&self, class: Class) -> &Hypervector {
        match class {
            Class::Neg => &self.c_neg,
            Class::Pos => &self.c_pos,
        }
    }

    fn class_vector_mut(&mut self, class: Class) -> &mut Hypervector {
        match class {
            Class::Neg => &mut self.c_neg,
            Class::Pos => &mut self.c_pos,
        }
    }

    /// Encodes a raw `frag_h x frag_w` fragment.
    pub fn encode_fragment(&self, fragment: &[f32]) -> Result<Hypervector> {
        if fragment.len() != self.frag_h * self.frag_w {
            return Err(Error::usage(format!(
                "fragment has {} pixels, model expects {}x{}",
                fragment.len(),
                self.frag_h,
                self.frag_w
            )));
        }
        crate::hdc::encode(&normalize(fragment), &self.encoder)
    }

    /// `cos(C_pos, h) - cos(C_neg, h)` for an encoded fragment.
    pub fn score_encoded(&self, h: &Hypervector) -> f64 {
        cosine_slices(self.c_pos.values(), h.values())
            - cosine_slices(self.c_neg.values(), h.values())
    }

    pub fn score(&self, fragment: &[f32]) -> Result<f64> {
        Ok(self.score_encoded(&self.encode_fragment(fragment)?))
    }

    pub fn infer(&self, fragment: &[f32]) -> Result<Class> {
        Ok(class_of_score(self.score(fragment)?))
    }
}

/// Positive iff the score is strictly above zero; ties go negative.
pub fn class_of_score(s: f64) -> Class {
    if s > 0.0 {
        Class::Pos
    } else {
        Class::Neg
    }
}

/// Encodes every dataset item.
pub fn encode_dataset(data: &FragmentDataset, enc: &EncoderParams) -> Result<Vec<Hypervector>> {
    let xs: Vec<Vec<f64>> = data.items.iter().map(|i| normalize(&i.pixels)).collect();
    let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
    encode_batch(&refs, enc)
}

/// Bundles encoded items into class prototypes, in dataset order.
pub fn train_initial(data: &FragmentDataset, enc: &EncoderParams) -> Result<FragmentModel> {
    let encoded = encode_dataset(data, enc)?;
    train_initial_encoded(data, &encoded, enc)
}

pub fn train_initial_encoded(
    data: &FragmentDataset,
    encoded: &[Hypervector],
    enc: &EncoderParams,
) -> Result<FragmentModel> {
    if data.is_empty() {
        return Err(Error::data("fragment dataset is empty"));
    }
    let (neg, pos) = data.counts();
    if neg == 0 || pos == 0 {
        return Err(Error::data(format!(
            "both classes required for training (neg={neg}, pos={pos})"
        )));
    }
    let base = enc.base();
    if data.frag != base.rows() || data.frag != base.cols() {
        return Err(Error::usage("dataset fragment size does not match encoder"));
    }
    let dim = enc.dim();
    let mut acc = [vec![0.0f64; dim], vec![0.0f64; dim]];
    for (item, h) in data.items.iter().zip(encoded) {
        let slot = &mut acc[(item.label == Class::Pos) as usize];
        for (a, &v) in slot.iter_mut().zip(h.values()) {
            *a += v as f64;
        }
    }
    let to_hv = |v: &[f64]| Hypervector::new(v.iter().map(|&x| x as f32).collect());
    Ok(FragmentModel {
        c_neg: to_hv(&acc[0])?,
        c_pos: to_hv(&acc[1])?,
        enc_seed: enc.seed(),
        frag_h: base.rows(),
        frag_w: base.cols(),
        dim,
        rng_algorithm_id: RNG_ALGORITHM_ID.to_string(),
        meta: None,
        encoder: enc.clone(),
    })
}

/// Binary confusion counts with the positive class as "positive".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Confusion::default();
        for (truth, predicted) in pairs {
            match (truth, predicted) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `2TP / (2TP + FP + FN)`, 0 when undefined.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            return 0.0;
        }
        2.0 * self.tp as f64 / denom as f64
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn evaluate_encoded(
    model: &FragmentModel,
    encoded: &[Hypervector],
    labels: &[Class],
) -> Confusion {
    Confusion::from_pairs(encoded.iter().zip(labels).map(|(h, &l)| {
        (
            l == Class::Pos,
            class_of_score(model.score_encoded(h)) == Class::Pos,
        )
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetrainOptions {
    pub eta: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RetrainOptions {
    fn default() -> Self {
        RetrainOptions {
            eta: 0.05,
            epochs: 20,
            seed: 0,
        }
    }
}

/// Misprediction-driven retraining with best-epoch selection on `val`.
pub fn retrain(
    model: &FragmentModel,
    data: &FragmentDataset,
    val: &FragmentDataset,
    opts: RetrainOptions,
) -> Result<FragmentModel> {
    let encoded = encode_dataset(data, model.encoder())?;
    let val_encoded = encode_dataset(val, model.encoder())?;
    retrain_encoded(
        model,
        &encoded,
        &data.labels(),
        &val_encoded,
        &val.labels(),
        opts,
    )
}

/// [`retrain`] over pre-encoded items.
pub fn retrain_encoded(
    model: &FragmentModel,
    encoded: &[Hypervector],
    labels: &[Class],
    val_encoded: &[Hypervector],
    val_labels: &[Class],
    opts: RetrainOptions,
) -> Result<FragmentModel> {
    if !(opts.eta > 0.0) || !opts.eta.is_finite() {
        return Err(Error::usage("learning rate must be positive"));
    }
    if opts.epochs == 0 {
        return Err(Error::usage("epochs must be at least 1"));
    }
    if encoded.len() != labels.len() || val_encoded.len() != val_labels.len() {
        return Err(Error::usage("encoded items and labels differ in length"));
    }
    let mut current = model.clone();
    let mut best = model.clone();
    let mut best_f1 = evaluate_encoded(model, val_encoded, val_labels).f1();
    let mut best_epoch = 0;
    let mut history = vec![best_f1];
    let mut rng = SeededRng::new(opts.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    for epoch in 1..=opts.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let h = &encoded[i];
            let truth = labels[i];
            let predicted = class_of_score(current.score_encoded(h));
            if predicted == truth {
                continue;
            }
            let delta = cosine_slices(current.class_vector(truth).values(), h.values());
            let step = opts.eta * (1.0 - delta);
            current.class_vector_mut(truth).add_scaled(h, step)?;
            current.class_vector_mut(predicted).add_scaled(h, -step)?;
        }
        let f1 = evaluate_encoded(&current, val_encoded, val_labels).f1();
        history.push(f1);
        if f1 > best_f1 {
            best_f1 = f1;
            best_epoch = epoch;
            best = current.clone();
        }
    }
    best.meta = Some(TrainingMeta {
        epochs: opts.epochs,
        eta: opts.eta,
        best_epoch,
        val_f1: history,
    });
    Ok(best)
}
