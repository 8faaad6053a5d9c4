// SPDX-License-Identifier: Apache-2.0

//! Per-frame energy of a conventional always-on pipeline versus a gated
//! one, and the derived savings and quality loss.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Energy per frame in joules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParams {
    pub e_sense_hi: f64,
    pub e_sense_lo: f64,
    pub e_edge_infer: f64,
    pub e_tx: f64,
    pub e_cloud: f64,
}

impl Default for EnergyParams {
    /// Estimates: a 30 W sensor at 60 fps gives 0.5 J per high-precision
    /// frame; an 8.2 W edge accelerator at 303 fps gives 0.027 J per
    /// inference. The low-precision path, transmission and cloud figures are
    /// placeholders of plausible magnitude.
    fn default() -> Self {
        EnergyParams {
            e_sense_hi: 30.0 / 60.0,
            e_sense_lo: 0.05,
            e_edge_infer: 8.2 / 303.0,
            e_tx: 0.2,
            e_cloud: 1.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.e_sense_hi,
            self.e_sense_lo,
            self.e_edge_infer,
            self.e_tx,
            self.e_cloud,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::usage(
                "energy parameters must be finite and non-negative",
            ));
        }
        if self.e_sense_lo > self.e_sense_hi {
            return Err(Error::usage("e_sense_lo must not exceed e_sense_hi"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    /// Probability that a frame contains an object of interest.
    pub p: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Fraction of frames forwarded regardless of the detector.
    pub min_rate_fraction: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p", self.p),
            ("tpr", self.tpr),
            ("fpr", self.fpr),
            ("min_rate_fraction", self.min_rate_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::usage(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Fraction of frames reaching high-precision capture: detector firings
    /// plus min-rate captures of the frames it stayed silent on.
    pub fn forward_rate(&self) -> f64 {
        let detected = self.p * self.tpr + (1.0 - self.p) * self.fpr;
        (detected + self.min_rate_fraction * (1.0 - detected)).min(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum System {
    Conventional,
    HyperSense,
}

impl System {
    pub fn as_str(&self) -> &'static str {
        match self {
            System::Conventional => "conventional",
            System::HyperSense => "hypersense",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub sense: f64,
    pub edge: f64,
    pub tx: f64,
    pub cloud: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(sense: f64, edge: f64, tx: f64, cloud: f64) -> Self {
        EnergyBreakdown {
            sense,
            edge,
            tx,
            cloud,
            total: sense + edge + tx + cloud,
        }
    }

    /// Sensing, near-sensor compute and transmission.
    pub fn edge_side(&self) -> f64 {
        self.sense + self.edge + self.tx
    }
}

pub fn per_frame_energy(
    params: &EnergyParams,
    scenario: &Scenario,
    system: System,
) -> Result<EnergyBreakdown> {
    params.validate()?;
    scenario.validate()?;
    Ok(match system {
        System::Conventional => {
            EnergyBreakdown::new(params.e_sense_hi, 0.0, params.e_tx, params.e_cloud)
        }
        System::HyperSense => {
            let r = scenario.forward_rate();
            EnergyBreakdown::new(
                params.e_sense_lo + r * params.e_sense_hi,
                params.e_edge_infer,
                r * params.e_tx,
                r * params.e_cloud,
            )
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Savings {
    pub total_saving: f64,
    pub edge_saving: f64,
    pub quality_loss: f64,
}

/// Savings of the gated system relative to the conventional one. Quality
/// loss is the fraction of object frames that reach neither a detection nor
/// a min-rate capture.
pub fn savings(params: &EnergyParams, scenario: &Scenario) -> Result<Savings> {
    let conv = per_frame_energy(params, scenario, System::Conventional)?;
    let hs = per_frame_energy(params, scenario, System::HyperSense)?;
    if conv.total <= 0.0 {
        return Err(Error::numeric("conventional energy per frame is zero"));
    }
    if conv.edge_side() <= 0.0 {
        return Err(Error::numeric("conventional edge energy per frame is zero"));
    }
    Ok(Savings {
        total_saving: 1.0 - hs.total / conv.total,
        edge_saving: 1.0 - hs.edge_side() / conv.edge_side(),
        quality_loss: (1.0 - scenario.tpr) * (1.0 - scenario.min_rate_fraction),
    })
}

/// CSV breakdown for both systems plus the savings row.
pub fn report_csv(params: &EnergyParams, scenario: &Scenario) -> Result<String> {
    let mut out = String::from("system,sense,edge,tx,cloud,total\n");
    for system in [System::Conventional, System::HyperSense] {
        let b = per_frame_energy(params, scenario, system)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            system.as_str(),
            b.sense,
            b.edge,
            b.tx,
            b.cloud,
            b.total
        );
    }
    let s = savings(params, scenario)?;
    let _ = writeln!(
        out,
        "\ntotal_saving,edge_saving,quality_loss\n{},{},{}",
        s.total_saving, s.edge_saving, s.quality_loss
    );
    Ok(out)
}
