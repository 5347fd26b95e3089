//! Truth-table evaluation of a genome against frequency-assigned gates.
//!
//! Rows are always ordered `(0,0), (0,1), (1,0), (1,1)` where the pair is
//! `(input 0 bit, input 1 bit)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::signal;
use crate::substrate::{simulate, Genome};

pub const ROWS: [[bool; 2]; 4] = [[false, false], [false, true], [true, false], [true, true]];

/// Added to the normalizing denominator of a margin.
pub const MARGIN_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Gate {
    And,
    Or,
    Xor,
    Nand,
    Nor,
    Xnor,
}

impl Gate {
    pub fn eval(self, a: bool, b: bool) -> bool {
        match self {
            Gate::And => a && b,
            Gate::Or => a || b,
            Gate::Xor => a != b,
            Gate::Nand => !(a && b),
            Gate::Nor => !(a || b),
            Gate::Xnor => a == b,
        }
    }

    pub fn truth_table(self) -> [bool; 4] {
        ROWS.map(|[a, b]| self.eval(a, b))
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Gate::And => "AND",
            Gate::Or => "OR",
            Gate::Xor => "XOR",
            Gate::Nand => "NAND",
            Gate::Nor => "NOR",
            Gate::Xnor => "XNOR",
        };
        f.write_str(s)
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "and" => Gate::And,
            "or" => Gate::Or,
            "xor" => Gate::Xor,
            "nand" => Gate::Nand,
            "nor" => Gate::Nor,
            "xnor" => Gate::Xnor,
            other => return Err(Error::config("targets", format!("unknown gate {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateTarget {
    pub gate: Gate,
    /// 1 reads at `f1`, 2 at `f2`.
    pub frequency_slot: u8,
}

impl GateTarget {
    pub fn new(gate: Gate, frequency_slot: u8) -> Self {
        GateTarget {
            gate,
            frequency_slot,
        }
    }
}

impl fmt::Display for GateTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}@{}",
            self.gate.to_string().to_lowercase(),
            self.frequency_slot
        )
    }
}

impl FromStr for GateTarget {
    type Err = Error;

    /// `and@1`, `XOR@2`, ...
    fn from_str(s: &str) -> Result<Self> {
        let (gate, slot) = s
            .split_once('@')
            .ok_or_else(|| Error::config("targets", format!("expected gate@slot, got {s:?}")))?;
        let frequency_slot = match slot.trim() {
            "1" => 1,
            "2" => 2,
            other => {
                return Err(Error::config(
                    "targets",
                    format!("frequency slot must be 1 or 2, got {other:?}"),
                ))
            }
        };
        Ok(GateTarget {
            gate: gate.trim().parse()?,
            frequency_slot,
        })
    }
}

/// Parse a comma-separated target list such as `and@1,xor@2`.
pub fn parse_targets(s: &str) -> Result<Vec<GateTarget>> {
    let targets = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<GateTarget>>>()?;
    validate_targets(&targets)?;
    Ok(targets)
}

pub fn validate_targets(targets: &[GateTarget]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::config(
            "targets",
            "at least one gate target is required",
        ));
    }
    for (i, t) in targets.iter().enumerate() {
        if !(1..=2).contains(&t.frequency_slot) {
            return Err(Error::config("targets", "frequency slot must be 1 or 2"));
        }
        if targets[..i]
            .iter()
            .any(|u| u.frequency_slot == t.frequency_slot)
        {
            return Err(Error::config(
                "targets",
                format!("frequency slot {} assigned twice", t.frequency_slot),
            ));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margin {
    pub margin: f64,
    /// Midpoint of the gap between the weakest ON row and the strongest OFF row.
    pub threshold: f64,
    /// Set when the gate wants output at the undriven row, which a passive
    /// material at rest can never provide.
    pub requires_bias: bool,
}

/// Normalized separation between ON and OFF rows of one gate:
/// `(min ON − max OFF) / (max row + ε)`.
///
/// The undriven row is silent by construction, so it only counts as an OFF
/// row when the table has no driven OFF row (e.g. OR).
pub fn gate_margin(amplitudes: [f64; 4], truth_table: [bool; 4]) -> Margin {
    let driven_on: Vec<f64> = (1..4)
        .filter(|&r| truth_table[r])
        .map(|r| amplitudes[r])
        .collect();
    let mut off: Vec<f64> = (1..4)
        .filter(|&r| !truth_table[r])
        .map(|r| amplitudes[r])
        .collect();
    if off.is_empty() && !truth_table[0] {
        off.push(amplitudes[0]);
    }
    let on_min = driven_on.iter().copied().fold(f64::INFINITY, f64::min);
    let off_max = off.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let all_max = amplitudes.iter().copied().fold(0.0, f64::max);

    let requires_bias = truth_table[0];
    let threshold = match (on_min.is_finite(), off_max.is_finite()) {
        (true, true) => 0.5 * (on_min + off_max),
        (true, false) => 0.5 * on_min,
        (false, true) => 0.5 * off_max,
        (false, false) => 0.0,
    };
    let margin = if requires_bias || !on_min.is_finite() || !off_max.is_finite() {
        -1.0
    } else {
        (on_min - off_max) / (all_max + MARGIN_EPS)
    };
    Margin {
        margin,
        threshold,
        requires_bias,
    }
}

/// Maximin aggregate: every gate must separate for the fitness to be positive.
pub fn polycomputing_fitness(margins: &[f64]) -> f64 {
    margins.iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub targets: Vec<GateTarget>,
    /// `amplitudes[row][g]`: output amplitude for input row `row` read at the
    /// frequency of `targets[g]`.
    pub amplitudes: Vec<Vec<f64>>,
    pub margins: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub requires_bias: Vec<bool>,
    pub decoded: Vec<[u8; 4]>,
    pub valid: Vec<bool>,
    pub fitness: f64,
}

impl GateReport {
    /// Build a report from a precomputed amplitude matrix.
    pub fn from_amplitudes(targets: &[GateTarget], amplitudes: Vec<Vec<f64>>) -> GateReport {
        let mut margins = Vec::with_capacity(targets.len());
        let mut thresholds = Vec::with_capacity(targets.len());
        let mut requires_bias = Vec::with_capacity(targets.len());
        for (g, t) in targets.iter().enumerate() {
            let column = [0, 1, 2, 3].map(|r| amplitudes[r][g]);
            let m = gate_margin(column, t.gate.truth_table());
            margins.push(m.margin);
            thresholds.push(m.threshold);
            requires_bias.push(m.requires_bias);
        }
        let fitness = polycomputing_fitness(&margins);
        let mut report = GateReport {
            targets: targets.to_vec(),
            amplitudes,
            margins,
            thresholds,
            requires_bias,
            decoded: Vec::new(),
            valid: Vec::new(),
            fitness,
        };
        let (decoded, valid) = decode_bits(&report);
        report.decoded = decoded;
        report.valid = valid;
        report
    }

    pub fn column(&self, g: usize) -> [f64; 4] {
        [0, 1, 2, 3].map(|r| self.amplitudes[r][g])
    }
}

/// Threshold each gate's column at its reported threshold. Bits are always
/// emitted; the flag is false when the gate does not separate.
pub fn decode_bits(report: &GateReport) -> (Vec<[u8; 4]>, Vec<bool>) {
    let decoded: Vec<[u8; 4]> = (0..report.targets.len())
        .map(|g| {
            let thr = report.thresholds[g];
            report.column(g).map(|a| u8::from(a >= thr))
        })
        .collect();
    let valid = (0..report.targets.len())
        .map(|g| report.margins[g] > 0.0 && !report.requires_bias[g])
        .collect();
    (decoded, valid)
}

/// Simulate all four input rows and read the output particle at each
/// target's frequency.
pub fn evaluate_truth_table(
    genome: &Genome,
    config: &RunConfig,
    targets: &[GateTarget],
) -> Result<GateReport> {
    validate_targets(targets)?;
    config.validate()?;
    genome.validate()?;
    let freqs: Vec<f64> = targets
        .iter()
        .map(|t| config.excitation.frequency(t.frequency_slot))
        .collect();
    let amplitudes = ROWS
        .par_iter()
        .map(|&bits| {
            let trace = simulate(genome, config, bits)?;
            let readings = signal::spectrum(&trace, genome.output_particle, &freqs)?;
            Ok(readings.iter().map(|r| r.amplitude).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(GateReport::from_amplitudes(targets, amplitudes))
}
