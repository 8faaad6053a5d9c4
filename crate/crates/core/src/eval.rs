// SPDX-License-Identifier: Apache-2.0

//! ROC curves, AUC and partial AUC, frame-level ROC families and
//! hyperparameter sweeps.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fragment::{Confusion, FragmentModel};
use crate::sense::{decide, frame_scores};
use crate::sliding::{EncoderPath, FragmentGrid, Frame, OpCounter};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Items scoring at or above this value are called positive.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: usize,
    pub negatives: usize,
}

impl RocCurve {
    /// Area under the curve (trapezoid; tied groups contribute half).
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
            .sum()
    }

    /// Highest TPR among operating points whose FPR does not exceed `target`.
    pub fn max_tpr_at_fpr(&self, target: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.fpr <= target)
            .map(|p| p.tpr)
            .fold(0.0, f64::max)
    }

    /// `threshold,fpr,tpr` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        out
    }
}

/// Builds the ROC curve by sweeping a threshold over the distinct scores,
/// highest first. Starts at `(0, 0)` (threshold `+inf`) and ends at `(1, 1)`.
pub fn roc_from_scores(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::usage("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::data("scores contain NaN"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::data(format!(
            "ROC needs both classes (positives={positives}, negatives={negatives})"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold: s,
        });
    }
    Ok(RocCurve {
        points,
        positives,
        negatives,
    })
}

/// Area of the strip between the curve and `tpr_floor`, i.e. the integral
/// of `max(TPR(f) - floor, 0)` over `f` along the curve's segments. Its
/// maximum is `1 - tpr_floor`.
pub fn partial_auc(curve: &RocCurve, tpr_floor: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tpr_floor) {
        return Err(Error::usage("TPR floor must be in [0, 1)"));
    }
    let mut area = 0.0;
    for w in curve.points.windows(2) {
        let df = w[1].fpr - w[0].fpr;
        if df <= 0.0 {
            continue;
        }
        let (y0, y1) = (w[0].tpr - tpr_floor, w[1].tpr - tpr_floor);
        area += if y0 >= 0.0 && y1 >= 0.0 {
            df * (y0 + y1) / 2.0
        } else if y0 <= 0.0 && y1 <= 0.0 {
            0.0
        } else {
            // Only the part of the segment above the floor counts.
            let top = y0.max(y1);
            let frac = top / (y0 - y1).abs();
            frac * df * top / 2.0
        };
    }
    Ok(area)
}

/// Frame statistic equivalent to the two-threshold rule: with `k =
/// t_detection + 1`, the frame is positive at `T_score = t` exactly when its
/// k-th highest fragment score exceeds `t`. Frames with fewer than `k`
/// fragments get `-inf`.
pub fn kth_score(scores: &[f64], t_detection: usize) -> f64 {
    if scores.len() <= t_detection {
        return f64::NEG_INFINITY;
    }
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s[t_detection]
}

/// ROC of the frame decision as `T_score` sweeps with `T_detection` fixed.
pub fn frame_roc(
    frame_scores: &[Vec<f64>],
    truth: &[bool],
    t_detection: usize,
) -> Result<RocCurve> {
    let stat: Vec<f64> = frame_scores
        .iter()
        .map(|s| kth_score(s, t_detection))
        .collect();
    roc_from_scores(&stat, truth)
}

/// Fragment scores of every frame, one inner vector per frame.
pub fn score_frames(
    model: &FragmentModel,
    frames: &[Frame],
    fragment: usize,
    stride: usize,
    path: EncoderPath,
) -> Result<Vec<Vec<f64>>> {
    let mut counter = OpCounter::default();
    frames
        .iter()
        .map(|f| frame_scores(model, f, fragment, stride, path, &mut counter))
        .collect()
}

/// Best TPR at `target` FPR over a family of curves.
pub fn envelope_max_tpr(curves: &[RocCurve], target: f64) -> f64 {
    curves
        .iter()
        .map(|c| c.max_tpr_at_fpr(target))
        .fold(0.0, f64::max)
}

/// Frame-level confusion at one `(T_score, T_detection)` pair.
pub fn frame_confusion(
    frame_scores: &[Vec<f64>],
    truth: &[bool],
    t_score: f64,
    t_detection: usize,
) -> Confusion {
    Confusion::from_pairs(frame_scores.iter().zip(truth).map(|(s, &t)| {
        (
            t,
            decide(s, t_score, t_detection).0 == crate::fragment::Class::Pos,
        )
    }))
}

/// Mean of the `k` largest values (fewer if not available); 0 when empty.
pub fn top_k_mean(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(k);
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Parameter grids; each must be non-empty.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub t_score: Vec<f64>,
    pub t_detection: Vec<usize>,
    pub stride: Vec<usize>,
    pub fragment: Vec<usize>,
    pub dim: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepMetric {
    /// Frame F1 at each `(T_score, T_detection)` cell.
    F1,
    /// Partial AUC of the `T_score` sweep, one cell per `T_detection`.
    PartialAuc { tpr_floor: f64 },
    /// Envelope TPR at the target FPR over all `(T_score, T_detection)`.
    MaxTprAtFpr { target: f64 },
}

impl SweepMetric {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMetric::F1 => "f1",
            SweepMetric::PartialAuc { .. } => "pauc",
            SweepMetric::MaxTprAtFpr { .. } => "max_tpr",
        }
    }

    fn axes(&self) -> Vec<&'static str> {
        let mut axes = vec!["fragment", "dim", "stride"];
        match self {
            SweepMetric::F1 => axes.extend(["t_detection", "t_score"]),
            SweepMetric::PartialAuc { .. } => axes.push("t_detection"),
            SweepMetric::MaxTprAtFpr { .. } => {}
        }
        axes
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub params: Vec<f64>,
    pub skipped_rows: usize,
    pub skipped_cols: usize,
    pub metric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub axes: Vec<String>,
    pub metric: String,
    pub cells: Vec<SweepCell>,
    pub seed: u64,
    pub dataset_id: String,
}

impl SweepResult {
    /// `<axes...>,skipped_rows,skipped_cols,<metric>` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = self.axes.join(",");
        let _ = writeln!(out, ",skipped_rows,skipped_cols,{}", self.metric);
        for c in &self.cells {
            let params: Vec<String> = c.params.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                params.join(","),
                c.skipped_rows,
                c.skipped_cols,
                c.metric
            );
        }
        out
    }

    pub fn metrics(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.metric).collect()
    }
}

pub struct SweepOptions<'a> {
    pub metric: SweepMetric,
    pub max_cells: usize,
    pub path: EncoderPath,
    pub seed: u64,
    pub dataset_id: &'a str,
}

/// Number of cells `sweep` would produce.
pub fn sweep_cell_count(grid: &SweepGrid, metric: SweepMetric) -> usize {
    let outer = grid.fragment.len() * grid.dim.len() * grid.stride.len();
    match metric {
        SweepMetric::F1 => outer * grid.t_detection.len() * grid.t_score.len(),
        SweepMetric::PartialAuc { .. } => outer * grid.t_detection.len(),
        SweepMetric::MaxTprAtFpr { .. } => outer,
    }
}

/// Evaluates `metric` over the grid. `factory(fragment, dim)` supplies a
/// trained model for each model-shaping cell; frames must share one size.
pub fn sweep<F>(
    mut factory: F,
    frames: &[Frame],
    truth: &[bool],
    grid: &SweepGrid,
    opts: &SweepOptions<'_>,
) -> Result<SweepResult>
where
    F: FnMut(usize, usize) -> Result<FragmentModel>,
{
    if grid.t_score.is_empty()
        || grid.t_detection.is_empty()
        || grid.stride.is_empty()
        || grid.fragment.is_empty()
        || grid.dim.is_empty()
    {
        return Err(Error::usage("every sweep grid must be non-empty"));
    }
    let cells = sweep_cell_count(grid, opts.metric);
    if cells > opts.max_cells {
        return Err(Error::usage(format!(
            "sweep has {cells} cells, budget is {}",
            opts.max_cells
        )));
    }
    let first = frames
        .first()
        .ok_or_else(|| Error::usage("no frames to sweep"))?;
    let (height, width) = (first.height(), first.width());
    if frames
        .iter()
        .any(|f| f.height() != height || f.width() != width)
    {
        return Err(Error::data("sweep frames differ in size"));
    }
    let mut out = Vec::with_capacity(cells);
    for &fragment in &grid.fragment {
        for &dim in &grid.dim {
            let model = factory(fragment, dim)?;
            for &stride in &grid.stride {
                let layout = FragmentGrid::new(height, width, fragment, fragment, stride)?;
                let scores = score_frames(&model, frames, fragment, stride, opts.path)?;
                let head = [fragment as f64, dim as f64, stride as f64];
                let mut push = |extra: &[f64], metric: f64| {
                    let mut params = head.to_vec();
                    params.extend_from_slice(extra);
                    out.push(SweepCell {
                        params,
                        skipped_rows: layout.skipped_rows,
                        skipped_cols: layout.skipped_cols,
                        metric,
                    });
                };
                match opts.metric {
                    SweepMetric::F1 => {
                        for &td in &grid.t_detection {
                            for &ts in &grid.t_score {
                                let f1 = frame_confusion(&scores, truth, ts, td).f1();
                                push(&[td as f64, ts], f1);
                            }
                        }
                    }
                    SweepMetric::PartialAuc { tpr_floor } => {
                        for &td in &grid.t_detection {
                            let curve = frame_roc(&scores, truth, td)?;
                            push(&[td as f64], partial_auc(&curve, tpr_floor)?);
                        }
                    }
                    SweepMetric::MaxTprAtFpr { target } => {
                        let curves = grid
                            .t_detection
                            .iter()
                            .map(|&td| frame_roc(&scores, truth, td))
                            .collect::<Result<Vec<_>>>()?;
                        push(&[], envelope_max_tpr(&curves, target));
                    }
                }
            }
        }
    }
    Ok(SweepResult {
        axes: opts.metric.axes().into_iter().map(String::from).collect(),
        metric: opts.metric.name().to_string(),
        cells: out,
        seed: opts.seed,
        dataset_id: opts.dataset_id.to_string(),
    })
}
