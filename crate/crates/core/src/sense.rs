// SPDX-License-Identifier: Apache-2.0

//! Frame-level detection from fragment scores, and the ADC gating stream
//! simulator.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fragment::{Class, Confusion, FragmentModel};
use crate::sliding::{encode_frame, EncoderPath, FragmentGrid, Frame, OpCounter};

/// Frame detector hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperSenseConfig {
    pub fragment: usize,
    pub stride: usize,
    pub t_score: f64,
    pub t_detection: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameDetection {
    pub decision: Class,
    pub count: usize,
    pub scores: Vec<f64>,
}

/// Counts scores strictly above `t_score`; the frame is positive when that
/// count is strictly above `t_detection`.
pub fn decide(scores: &[f64], t_score: f64, t_detection: usize) -> (Class, usize) {
    let count = scores.iter().filter(|&&s| s > t_score).count();
    let decision = if count > t_detection {
        Class::Pos
    } else {
        Class::Neg
    };
    (decision, count)
}

/// Scores of every sliding window of `frame`, in grid order.
pub fn frame_scores(
    model: &FragmentModel,
    frame: &Frame,
    fragment: usize,
    stride: usize,
    path: EncoderPath,
    counter: &mut OpCounter,
) -> Result<Vec<f64>> {
    if model.frag_h != fragment || model.frag_w != fragment {
        return Err(Error::usage(format!(
            "model window {}x{} does not match fragment size {fragment}",
            model.frag_h, model.frag_w
        )));
    }
    let grid = FragmentGrid::new(frame.height(), frame.width(), fragment, fragment, stride)?;
    let encoded = encode_frame(path, frame, &grid, model.encoder(), counter)?;
    Ok(encoded.iter().map(|h| model.score_encoded(h)).collect())
}

pub fn detect_frame(
    model: &FragmentModel,
    frame: &Frame,
    cfg: &HyperSenseConfig,
    path: EncoderPath,
) -> Result<FrameDetection> {
    let scores = frame_scores(
        model,
        frame,
        cfg.fragment,
        cfg.stride,
        path,
        &mut OpCounter::default(),
    )?;
    let (decision, count) = decide(&scores, cfg.t_score, cfg.t_detection);
    Ok(FrameDetection {
        decision,
        count,
        scores,
    })
}

/// Rates of the low-precision path and of the guaranteed high-precision
/// capture, in frames per second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GatePolicy {
    pub base_rate: f64,
    pub min_rate: f64,
}

impl Default for GatePolicy {
    fn default() -> Self {
        GatePolicy {
            base_rate: 60.0,
            min_rate: 1.0,
        }
    }
}

impl GatePolicy {
    pub fn new(base_rate: f64, min_rate: f64) -> Result<Self> {
        if !(min_rate > 0.0 && min_rate <= base_rate && base_rate.is_finite()) {
            return Err(Error::usage(format!(
                "gate policy needs 0 < min_rate <= base_rate (got {min_rate}, {base_rate})"
            )));
        }
        Ok(GatePolicy {
            base_rate,
            min_rate,
        })
    }

    /// Every `tick_period()`-th frame (starting at frame 0) is always captured.
    pub fn tick_period(&self) -> usize {
        ((self.base_rate / self.min_rate).floor() as usize).max(1)
    }

    pub fn is_tick(&self, frame: usize) -> bool {
        frame.is_multiple_of(self.tick_period())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateReason {
    Detection,
    MinRate,
    Suppressed,
}

impl GateReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            GateReason::Detection => "detection",
            GateReason::MinRate => "min-rate",
            GateReason::Suppressed => "suppressed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateEntry {
    pub frame: usize,
    pub truth: bool,
    pub decision: Class,
    pub count: usize,
    pub generated: bool,
    pub reason: GateReason,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GateLog {
    pub entries: Vec<GateEntry>,
}

impl GateLog {
    /// `frame,truth,decision,count,gate,reason` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,truth,decision,count,gate,reason\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.frame,
                e.truth as u8,
                e.decision,
                e.count,
                if e.generated {
                    "generated"
                } else {
                    "suppressed"
                },
                e.reason.as_str()
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StreamSummary {
    pub frames: usize,
    pub generated: usize,
    pub ticks: usize,
    /// Detector decisions against ground truth.
    pub detector: Confusion,
    /// Gate state against ground truth: `fn_` counts positive frames that
    /// were suppressed.
    pub gate: Confusion,
}

/// Per-frame presence detector driving the gate.
pub trait FrameDetector {
    fn detect(&mut self, index: usize, frame: &Frame) -> Result<(Class, usize)>;
}

impl<F> FrameDetector for F
where
    F: FnMut(usize, &Frame) -> Result<(Class, usize)>,
{
    fn detect(&mut self, index: usize, frame: &Frame) -> Result<(Class, usize)> {
        self(index, frame)
    }
}

/// The HDC sliding-window detector.
pub struct HdcDetector<'a> {
    pub model: &'a FragmentModel,
    pub cfg: HyperSenseConfig,
    pub path: EncoderPath,
}

impl FrameDetector for HdcDetector<'_> {
    fn detect(&mut self, _index: usize, frame: &Frame) -> Result<(Class, usize)> {
        let d = detect_frame(self.model, frame, &self.cfg, self.path)?;
        Ok((d.decision, d.count))
    }
}

/// Runs the gate over an ordered stream. Frame `i` is captured at high
/// precision when the detector fires on frame `i` itself or `i` is a
/// min-rate tick.
pub fn simulate_stream(
    frames: &[Frame],
    truth: &[bool],
    detector: &mut dyn FrameDetector,
    policy: &GatePolicy,
) -> Result<(GateLog, StreamSummary)> {
    if frames.is_empty() {
        return Err(Error::usage("stream is empty"));
    }
    if frames.len() != truth.len() {
        return Err(Error::usage("frames and presence flags differ in length"));
    }
    let mut log = GateLog::default();
    for (i, (frame, &t)) in frames.iter().zip(truth).enumerate() {
        let (decision, count) = detector.detect(i, frame)?;
        let reason = if decision == Class::Pos {
            GateReason::Detection
        } else if policy.is_tick(i) {
            GateReason::MinRate
        } else {
            GateReason::Suppressed
        };
        log.entries.push(GateEntry {
            frame: i,
            truth: t,
            decision,
            count,
            generated: reason != GateReason::Suppressed,
            reason,
        });
    }
    let summary = summarize(&log, policy);
    Ok((log, summary))
}

pub fn summarize(log: &GateLog, policy: &GatePolicy) -> StreamSummary {
    let e = &log.entries;
    StreamSummary {
        frames: e.len(),
        generated: e.iter().filter(|x| x.generated).count(),
        ticks: e.iter().filter(|x| policy.is_tick(x.frame)).count(),
        detector: Confusion::from_pairs(e.iter().map(|x| (x.truth, x.decision == Class::Pos))),
        gate: Confusion::from_pairs(e.iter().map(|x| (x.truth, x.generated))),
    }
}
