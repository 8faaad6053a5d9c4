// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic range-azimuth-like frames: half-normal clutter with
//! Gaussian blobs standing in for reflecting objects.

use crate::error::{Error, Result};
use crate::fragment::BoundingBox;
use crate::rng::{stream, SeededRng};
use crate::sliding::Frame;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub noise_sigma: f64,
    /// Blob peak height in units of `noise_sigma`.
    pub amplitude: f64,
    /// Inclusive range of blob radii in pixels. The blob's box spans
    /// `2r + 1` pixels and its Gaussian profile has standard deviation `r / 2`.
    pub radius_min: usize,
    pub radius_max: usize,
    /// Probability that a frame holds objects.
    pub presence: f64,
    /// Upper bound on the number of blobs in an occupied frame.
    pub max_objects: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            frames: 500,
            height: 128,
            width: 128,
            noise_sigma: 1.0,
            amplitude: 3.0,
            radius_min: 8,
            radius_max: 12,
            presence: 0.5,
            max_objects: 1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::usage("frame size must be positive"));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::usage("amplitude must be positive"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::usage("noise sigma must be positive"));
        }
        if self.radius_min == 0 || self.radius_min > self.radius_max {
            return Err(Error::usage("radius range must satisfy 1 <= min <= max"));
        }
        if 2 * self.radius_max >= self.height.min(self.width) {
            return Err(Error::usage(format!(
                "radius {} must be below half the frame size",
                self.radius_max
            )));
        }
        if !(0.0..=1.0).contains(&self.presence) {
            return Err(Error::usage("presence probability must be in [0, 1]"));
        }
        if self.max_objects == 0 {
            return Err(Error::usage("max objects must be at least 1"));
        }
        Ok(())
    }
}

/// Frames and their boxes. Identical specs give identical output.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<Frame>, Vec<Vec<BoundingBox>>)> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed, stream::SYNTH);
    let (h, w) = (spec.height, spec.width);
    let peak = spec.amplitude * spec.noise_sigma;
    let mut frames = Vec::with_capacity(spec.frames);
    let mut labels = Vec::with_capacity(spec.frames);
    for _ in 0..spec.frames {
        let mut px: Vec<f64> = (0..h * w)
            .map(|_| (rng.normal() * spec.noise_sigma).abs())
            .collect();
        let mut boxes = Vec::new();
        if rng.uniform() < spec.presence {
            let count = 1 + rng.below(spec.max_objects);
            for _ in 0..count {
                let r = spec.radius_min + rng.below(spec.radius_max - spec.radius_min + 1);
                let cy = r + rng.below(h - 2 * r);
                let cx = r + rng.below(w - 2 * r);
                let s2 = 2.0 * (r as f64 / 2.0).powi(2);
                for y in cy - r..=cy + r {
                    for x in cx - r..=cx + r {
                        let d2 = (y as f64 - cy as f64).powi(2) + (x as f64 - cx as f64).powi(2);
                        px[y * w + x] += peak * (-d2 / s2).exp();
                    }
                }
                boxes.push(BoundingBox {
                    x: cx - r,
                    y: cy - r,
                    w: 2 * r + 1,
                    h: 2 * r + 1,
                });
            }
        }
        frames.push(Frame::new(
            h,
            w,
            px.into_iter().map(|v| v as f32).collect(),
        )?);
        labels.push(boxes);
    }
    Ok((frames, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(presence: f64) -> SynthSpec {
        SynthSpec {
            frames: 20,
            height: 40,
            width: 48,
            presence,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn no_presence_no_labels() {
        let (frames, labels) = generate(&small(0.0)).unwrap();
        assert_eq!(frames.len(), 20);
        assert!(labels.iter().all(Vec::is_empty));
        assert!(frames.iter().all(|f| f.pixels().iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn full_presence_boxes_hold_blob_centers() {
        let (frames, labels) = generate(&small(1.0)).unwrap();
        for (f, boxes) in frames.iter().zip(&labels) {
            assert_eq!(boxes.len(), 1);
            let b = boxes[0];
            assert!(b.x + b.w <= f.width() && b.y + b.h <= f.height());
            let (cy, cx) = (b.y + b.h / 2, b.x + b.w / 2);
            // The blob peak dominates the clutter at the center pixel.
            assert!(f.get(cy, cx) >= 3.0);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            generate(&small(0.5)).unwrap(),
            generate(&small(0.5)).unwrap()
        );
        let other = SynthSpec {
            seed: 9,
            ..small(0.5)
        };
        assert_ne!(
            generate(&small(0.5)).unwrap().0,
            generate(&other).unwrap().0
        );
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            SynthSpec {
                amplitude: 0.0,
                ..small(0.5)
            },
            SynthSpec {
                radius_max: 20,
                ..small(0.5)
            },
            SynthSpec {
                presence: 1.5,
                ..small(0.5)
            },
            SynthSpec {
                radius_min: 0,
                ..small(0.5)
            },
        ] {
            assert!(matches!(generate(&bad), Err(Error::Usage(_))));
        }
    }
}
