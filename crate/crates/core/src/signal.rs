//! Two-tone drive synthesis and single-bin spectral readout.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::substrate::Trace;

/// Relative tolerance used when checking integer cycle counts and
/// harmonic collisions.
const CYCLE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationSpec {
    /// Frequency carrying gate slot 1, in cycles per time unit.
    pub f1: f64,
    /// Frequency carrying gate slot 2.
    pub f2: f64,
    /// Drive force amplitude per tone.
    pub amplitude: f64,
    /// Readout window length.
    pub window: f64,
    /// Duration discarded before the readout window.
    pub transient: f64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        ExcitationSpec {
            f1: 0.25,
            f2: 0.65,
            amplitude: 0.025,
            window: 200.0,
            transient: 60.0,
        }
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() <= CYCLE_TOL * x.abs().max(1.0)
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= CYCLE_TOL * a.abs().max(b.abs())
}

impl ExcitationSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("excitation.f1", self.f1),
            ("excitation.f2", self.f2),
            ("excitation.amplitude", self.amplitude),
            ("excitation.window", self.window),
            ("excitation.transient", self.transient),
        ] {
            if !v.is_finite() {
                return Err(Error::config(field, "must be finite"));
            }
        }
        if self.f1 <= 0.0 {
            return Err(Error::config("excitation.f1", "must be > 0"));
        }
        if self.f2 <= 0.0 {
            return Err(Error::config("excitation.f2", "must be > 0"));
        }
        if near(self.f1, self.f2) {
            return Err(Error::config("excitation.f2", "must differ from f1"));
        }
        for (mult, name) in [(2.0, "2·f1"), (3.0, "3·f1"), (0.5, "f1/2")] {
            if near(self.f2, mult * self.f1) {
                return Err(Error::config(
                    "excitation.f2",
                    format!("harmonic collision: f2 = {name}"),
                ));
            }
        }
        if self.amplitude <= 0.0 {
            return Err(Error::config("excitation.amplitude", "must be > 0"));
        }
        if self.window <= 0.0 {
            return Err(Error::config("excitation.window", "must be > 0"));
        }
        if self.transient < 0.0 {
            return Err(Error::config("excitation.transient", "must be >= 0"));
        }
        for (field, f) in [("excitation.f1", self.f1), ("excitation.f2", self.f2)] {
            if !is_integer(f * self.window) {
                return Err(Error::config(
                    field,
                    format!(
                        "integer-cycle rule: {f} × window {} = {} cycles is not an integer",
                        self.window,
                        f * self.window
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn frequency(&self, slot: u8) -> f64 {
        if slot == 2 {
            self.f2
        } else {
            self.f1
        }
    }
}

/// Force on each input at time `t`. A set bit carries both tones so one run
/// probes both gate slots.
pub fn drive_signal(bits: [bool; 2], spec: &ExcitationSpec, t: f64) -> (f64, f64) {
    let tone = spec.amplitude * ((2.0 * PI * spec.f1 * t).sin() + (2.0 * PI * spec.f2 * t).sin());
    let on = |b: bool| if b { tone } else { 0.0 };
    (on(bits[0]), on(bits[1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReading {
    pub frequency: f64,
    pub amplitude: f64,
    /// Radians in (−π, π].
    pub phase: f64,
    /// Real and imaginary parts of the scaled bin coefficient.
    #[serde(skip)]
    pub coefficient: (f64, f64),
}

/// Bin index for `freq` over `len` samples of step `dt`, if it lands on an
/// integer cycle count of at least one.
pub fn bin_index(len: usize, dt: f64, freq: f64) -> Result<usize> {
    let cycles = freq * len as f64 * dt;
    if !cycles.is_finite() || !is_integer(cycles) || cycles.round() < 1.0 {
        return Err(Error::config(
            "frequency",
            format!("integer-cycle rule: {freq} over {len} samples of {dt} gives {cycles} cycles"),
        ));
    }
    Ok(cycles.round() as usize)
}

/// Single-bin DFT via the Goertzel recurrence, scaled by `2/len` so a pure
/// tone of amplitude `A` reads `A`.
pub fn goertzel(series: &[f64], dt: f64, freq: f64) -> Result<SpectralReading> {
    if series.len() < 2 {
        return Err(Error::config("series", "need at least 2 samples"));
    }
    let n = series.len();
    let k = bin_index(n, dt, freq)?;
    let omega = 2.0 * PI * k as f64 / n as f64;
    let (sin_w, cos_w) = omega.sin_cos();
    let coeff = 2.0 * cos_w;
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for &x in series {
        let s0 = x + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    // X·e^{iω(n−1)} = s1 − e^{−iω}·s2; undo the trailing phase rotation.
    let yr = s1 - cos_w * s2;
    let yi = sin_w * s2;
    let (rot_s, rot_c) = (omega * (n - 1) as f64).sin_cos();
    let re = yr * rot_c + yi * rot_s;
    let im = yi * rot_c - yr * rot_s;
    let scale = 2.0 / n as f64;
    let (re, im) = (re * scale, im * scale);
    let mut phase = im.atan2(re);
    if phase <= -PI {
        phase += 2.0 * PI;
    }
    Ok(SpectralReading {
        frequency: freq,
        amplitude: re.hypot(im),
        phase,
        coefficient: (re, im),
    })
}

/// Readings of the speed magnitude of `particle`, one per frequency.
pub fn spectrum(trace: &Trace, particle: usize, freqs: &[f64]) -> Result<Vec<SpectralReading>> {
    let speed = trace.speed_series(particle)?;
    freqs
        .iter()
        .map(|&f| goertzel(&speed, trace.dt, f))
        .collect()
}

/// Amplitude of the velocity vector at each frequency, `hypot` of the
/// per-component readings. Phase and coefficient are taken from x.
pub fn vector_spectrum(
    trace: &Trace,
    particle: usize,
    freqs: &[f64],
) -> Result<Vec<SpectralReading>> {
    let v = trace.velocity_series(particle)?;
    let vx: Vec<f64> = v.iter().map(|v| v[0]).collect();
    let vy: Vec<f64> = v.iter().map(|v| v[1]).collect();
    freqs
        .iter()
        .map(|&f| {
            let mut a = goertzel(&vx, trace.dt, f)?;
            let b = goertzel(&vy, trace.dt, f)?;
            a.amplitude = a.amplitude.hypot(b.amplitude);
            Ok(a)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drive_examples() {
        let spec = ExcitationSpec {
            amplitude: 1.0,
            ..ExcitationSpec::default()
        };
        assert_eq!(drive_signal([false, false], &spec, 0.37), (0.0, 0.0));
        let (a, b) = drive_signal([true, true], &spec, 0.0);
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = drive_signal([true, false], &spec, 1.0);
        assert!((a - 0.190983).abs() < 1e-6, "{a}");
        assert_eq!(b, 0.0);
    }

    #[test]
    fn default_spec_valid() {
        ExcitationSpec::default().validate().unwrap();
    }

    #[test]
    fn spec_rejections() {
        let base = ExcitationSpec::default();
        let cases = [
            (
                ExcitationSpec {
                    f2: 0.5,
                    ..base.clone()
                },
                "harmonic",
            ),
            (
                ExcitationSpec {
                    f2: 0.75,
                    ..base.clone()
                },
                "harmonic",
            ),
            (
                ExcitationSpec {
                    f2: 0.125,
                    window: 400.0,
                    ..base.clone()
                },
                "harmonic",
            ),
            (
                ExcitationSpec {
                    f2: 0.25,
                    ..base.clone()
                },
                "differ",
            ),
            (
                ExcitationSpec {
                    f1: 0.2525,
                    ..base.clone()
                },
                "integer-cycle",
            ),
            (
                ExcitationSpec {
                    amplitude: 0.0,
                    ..base.clone()
                },
                "amplitude",
            ),
            (
                ExcitationSpec {
                    transient: -1.0,
                    ..base.clone()
                },
                "transient",
            ),
        ];
        for (spec, needle) in cases {
            let msg = spec.validate().unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg}");
        }
    }

    #[test]
    fn zero_series_reads_zero() {
        let r = goertzel(&[0.0; 400], 0.5, 0.25).unwrap();
        assert_eq!(r.amplitude, 0.0);
    }

    #[test]
    fn pure_tone() {
        let (dt, f, a) = (0.01, 0.25, 0.7);
        let s: Vec<f64> = (0..20000)
            .map(|n| a * (2.0 * PI * f * n as f64 * dt).sin())
            .collect();
        let r = goertzel(&s, dt, f).unwrap();
        assert!((r.amplitude - a).abs() < 1e-6 * a);
        assert!((r.phase + PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn bin_rules() {
        assert_eq!(bin_index(1000, 0.01, 0.5).unwrap(), 5);
        assert!(bin_index(1000, 0.01, 0.15)
            .unwrap_err()
            .to_string()
            .contains("integer-cycle"));
        assert!(bin_index(1000, 0.01, 0.0).is_err());
        assert!(goertzel(&[1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn frequency_slots() {
        let s = ExcitationSpec::default();
        assert_eq!(s.frequency(1), 0.25);
        assert_eq!(s.frequency(2), 0.65);
    }
}
