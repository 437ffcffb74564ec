//! Charge and flux control pulses and their schedule.
//!
//! Conventions (GHz, ns, rad):
//!
//! * Flux: `nu_q(t) = nu_q0 + (eps/2) env(tau) sin(theta(tau)) - kappa (eps env(tau))^2`
//!   with `tau = t - start` and
//!   `theta = 2 pi nu_sb tau + phase + 2 pi frame_freq start + dc_track 2 pi kappa eps^2 int_0^tau env^2`.
//!   `eps` is the peak-to-peak swing of the transmon frequency, so the
//!   first sideband couples at `g_k J1(eps / (2 nu_sb))`. `kappa` is
//!   `TransmonParams::dc_shift_coeff`.
//! * Charge: in the frame rotating at the carrier, the drive matrix element
//!   is `<upper|H|lower> = (rabi env / 2) e^{i phase}`, giving the rotation
//!   `exp(-i theta/2 (cos(phase) X + sin(phase) Y))` with
//!   `theta = 2 pi rabi area`. The carrier phase is referenced to absolute time.
//! * Gaussian envelopes are truncated at `+-N sigma` and shifted down so the
//!   edges sit exactly at zero, then rescaled to unit peak ("lifted"):
//!   `(exp(-u^2 / 2 sigma^2) - p) / (1 - p)`, `p = exp(-N^2 / 2)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::device::TransmonParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transition {
    Ge,
    Ef,
}

impl Transition {
    /// Lower transmon level of the transition.
    pub fn lower(self) -> usize {
        match self {
            Transition::Ge => 0,
            Transition::Ef => 1,
        }
    }

    /// Ladder matrix element `<n+1|a^dag|n>` for the transition.
    pub fn matrix_element(self) -> f64 {
        ((self.lower() + 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Gaussian,
    FlatTopGaussian,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub duration: f64,
    /// Gaussian width; for `Gaussian` it is always `duration / (2 N)`.
    pub sigma: f64,
    /// Truncation `N` in units of sigma.
    pub truncation: f64,
    pub amplitude: f64,
}

impl Envelope {
    pub fn gaussian(duration: f64, truncation: f64) -> Self {
        Envelope { kind: EnvelopeKind::Gaussian, duration, sigma: duration / (2.0 * truncation), truncation, amplitude: 1.0 }
    }

    /// Gaussian rise and fall of `truncation * sigma` each around a flat top.
    pub fn flat_top(duration: f64, sigma: f64, truncation: f64) -> Result<Self> {
        let e = Envelope { kind: EnvelopeKind::FlatTopGaussian, duration, sigma, truncation, amplitude: 1.0 };
        e.validate()?;
        Ok(e)
    }

    pub fn square(duration: f64) -> Self {
        Envelope { kind: EnvelopeKind::Square, duration, sigma: 0.0, truncation: 0.0, amplitude: 1.0 }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Schedule(format!("envelope duration {} must be > 0", self.duration)));
        }
        if self.kind != EnvelopeKind::Square {
            if !(self.sigma > 0.0) || !(self.truncation > 0.0) {
                return Err(Error::Schedule("gaussian envelope needs sigma > 0 and truncation > 0".into()));
            }
            if self.kind == EnvelopeKind::FlatTopGaussian && 2.0 * self.truncation * self.sigma > self.duration + 1e-12 {
                return Err(Error::Schedule("flat-top ramps longer than the pulse".into()));
            }
        }
        Ok(())
    }

    fn pedestal(&self) -> f64 {
        (-0.5 * self.truncation * self.truncation).exp()
    }

    fn ramp(&self) -> f64 {
        self.truncation * self.sigma
    }

    fn lifted(&self, u: f64) -> f64 {
        let p = self.pedestal();
        ((-0.5 * u * u / (self.sigma * self.sigma)).exp() - p) / (1.0 - p)
    }

    // integrals of the lifted Gaussian and its square between offsets u1 < u2
    fn lifted_int(&self, u1: f64, u2: f64) -> (f64, f64) {
        let p = self.pedestal();
        let s = self.sigma;
        let r2 = std::f64::consts::SQRT_2 * s;
        let e1 = libm::erf(u2 / r2) - libm::erf(u1 / r2);
        let e2 = libm::erf(u2 / s) - libm::erf(u1 / s);
        let ig = s * (PI / 2.0).sqrt() * e1;
        let ig2 = s * 0.5 * PI.sqrt() * e2;
        let du = u2 - u1;
        let one = (ig - p * du) / (1.0 - p);
        let two = (ig2 - 2.0 * p * ig + p * p * du) / ((1.0 - p) * (1.0 - p));
        (one, two)
    }

    /// Envelope value at local time `tau` (zero outside the pulse).
    pub fn value(&self, tau: f64) -> f64 {
        if tau < 0.0 || tau > self.duration {
            return 0.0;
        }
        let shape = match self.kind {
            EnvelopeKind::Square => 1.0,
            EnvelopeKind::Gaussian => self.lifted(tau - 0.5 * self.duration),
            EnvelopeKind::FlatTopGaussian => {
                let r = self.ramp();
                if tau < r {
                    self.lifted(tau - r)
                } else if tau > self.duration - r {
                    self.lifted(tau - (self.duration - r))
                } else {
                    1.0
                }
            }
        };
        self.amplitude * shape
    }

    /// `(int_0^tau env, int_0^tau env^2)`, clamped to the pulse support.
    pub fn integrals(&self, tau: f64) -> (f64, f64) {
        let t = tau.clamp(0.0, self.duration);
        let a = self.amplitude;
        let (one, two) = match self.kind {
            EnvelopeKind::Square => (t, t),
            EnvelopeKind::Gaussian => {
                let c = 0.5 * self.duration;
                self.lifted_int(-c, t - c)
            }
            EnvelopeKind::FlatTopGaussian => {
                let r = self.ramp();
                let flat_end = self.duration - r;
                let (mut one, mut two) = self.lifted_int(-r, t.min(r) - r);
                if t > r {
                    let f = t.min(flat_end) - r;
                    one += f;
                    two += f;
                }
                if t > flat_end {
                    let (o, w) = self.lifted_int(0.0, t - flat_end);
                    one += o;
                    two += w;
                }
                (one, two)
            }
        };
        (a * one, a * a * two)
    }

    pub fn area(&self) -> f64 {
        self.integrals(self.duration).0
    }

    /// Mean value over the pulse.
    pub fn mean(&self) -> f64 {
        self.area() / self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargePulse {
    pub transition: Transition,
    /// Carrier frequency (GHz).
    pub freq: f64,
    pub phase: f64,
    /// Peak Rabi frequency of the target transition (GHz).
    pub rabi: f64,
    pub envelope: Envelope,
    /// Carrier offset from `freq` (GHz); its phase is counted from the pulse
    /// start, so the pulse acts the same wherever it is scheduled.
    #[serde(default)]
    pub detuning: f64,
}

impl ChargePulse {
    /// Pulse whose envelope area produces rotation `theta` about the axis at `phase`.
    pub fn for_rotation(transition: Transition, freq: f64, theta: f64, phase: f64, envelope: Envelope) -> Self {
        let rabi = theta / (2.0 * PI * envelope.area());
        ChargePulse { transition, freq, phase, rabi, envelope, detuning: 0.0 }
    }

    pub fn angle(&self) -> f64 {
        2.0 * PI * self.rabi * self.envelope.area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SidebandTarget {
    pub mode: usize,
    pub transition: Transition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPulse {
    /// Informational: the transition this tone was compiled for.
    pub target: Option<SidebandTarget>,
    pub nu_sb: f64,
    /// Peak-to-peak frequency swing (GHz).
    pub eps: f64,
    pub phase: f64,
    pub envelope: Envelope,
    /// Frame reference (GHz) making the tone phase independent of start time.
    #[serde(default)]
    pub frame_freq: f64,
    /// Multiplier (usually -1, 0 or +1) for the DC-shift phase tracking term.
    #[serde(default)]
    pub dc_track: f64,
}

impl FluxPulse {
    pub fn new(nu_sb: f64, eps: f64, phase: f64, envelope: Envelope) -> Self {
        FluxPulse { target: None, nu_sb, eps, phase, envelope, frame_freq: 0.0, dc_track: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.envelope.validate()?;
        if !(self.eps >= 0.0) {
            return Err(Error::Schedule(format!("flux amplitude {} must be >= 0", self.eps)));
        }
        if !(self.nu_sb > 0.0) {
            return Err(Error::Schedule(format!("sideband frequency {} must be > 0", self.nu_sb)));
        }
        Ok(())
    }

    /// Modulation phase at local time `tau` for a pulse starting at `start`.
    pub fn theta(&self, tau: f64, start: f64, kappa: f64) -> f64 {
        let mut th = 2.0 * PI * (self.nu_sb * tau + self.frame_freq * start) + self.phase;
        if self.dc_track != 0.0 && kappa != 0.0 {
            th += self.dc_track * 2.0 * PI * kappa * self.eps * self.eps * self.envelope.integrals(tau).1;
        }
        th
    }

    /// Transmon frequency deviation (GHz) at local time `tau`.
    pub fn deviation(&self, tau: f64, start: f64, kappa: f64) -> f64 {
        if tau < 0.0 || tau > self.envelope.duration {
            return 0.0;
        }
        let env = self.envelope.value(tau);
        0.5 * self.eps * env * self.theta(tau, start, kappa).sin() - kappa * (self.eps * env).powi(2)
    }

    /// Mean frequency shift at the envelope peak (GHz, negative = downward).
    pub fn peak_dc_shift(&self, kappa: f64) -> f64 {
        -kappa * (self.eps * self.envelope.amplitude).powi(2)
    }
}

/// Frame (phase) update applied instantaneously.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTarget {
    /// Phase on the transmon level with this index (1 = e, 2 = f).
    TransmonLevel(usize),
    /// Phase `angle * n` on the memory mode with this number.
    Mode(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualZ {
    pub target: FrameTarget,
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Pulse {
    Charge(ChargePulse),
    Flux(FluxPulse),
    VirtualZ(VirtualZ),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Line {
    Charge,
    Flux,
    Frame,
}

impl Pulse {
    pub fn duration(&self) -> f64 {
        match self {
            Pulse::Charge(c) => c.envelope.duration,
            Pulse::Flux(f) => f.envelope.duration,
            Pulse::VirtualZ(_) => 0.0,
        }
    }

    pub fn line(&self) -> Line {
        match self {
            Pulse::Charge(_) => Line::Charge,
            Pulse::Flux(_) => Line::Flux,
            Pulse::VirtualZ(_) => Line::Frame,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Pulse::Charge(c) => c.envelope.validate(),
            Pulse::Flux(f) => f.validate(),
            Pulse::VirtualZ(z) => {
                if z.angle.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Schedule("virtual Z angle must be finite".into()))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheduled {
    pub start: f64,
    pub pulse: Pulse,
}

impl Scheduled {
    pub fn end(&self) -> f64 {
        self.start + self.pulse.duration()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    items: Vec<Scheduled>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn items(&self) -> &[Scheduled] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// `max(start + duration)` over all pulses.
    pub fn duration(&self) -> f64 {
        self.items.iter().map(Scheduled::end).fold(0.0, f64::max)
    }

    /// Place a pulse at an explicit start time.
    pub fn insert(&mut self, start: f64, pulse: Pulse) -> Result<()> {
        pulse.validate()?;
        if !(start >= 0.0) {
            return Err(Error::Schedule(format!("start time {start} must be >= 0")));
        }
        let line = pulse.line();
        let end = start + pulse.duration();
        if line != Line::Frame {
            for s in &self.items {
                if s.pulse.line() == line && start < s.end() - 1e-12 && s.start < end - 1e-12 {
                    return Err(Error::Schedule(format!(
                        "{line:?} pulse at [{start}, {end}] overlaps pulse at [{}, {}]",
                        s.start,
                        s.end()
                    )));
                }
            }
        }
        let pos = self.items.partition_point(|s| s.start <= start);
        self.items.insert(pos, Scheduled { start, pulse });
        Ok(())
    }

    /// Schedule after the current end plus `gap`. Frame updates ignore the gap.
    pub fn append(&mut self, pulse: Pulse, gap: f64) -> Result<f64> {
        let end = self.duration();
        let start = if self.items.is_empty() || pulse.line() == Line::Frame { end } else { end + gap };
        let start = start.max(0.0);
        self.insert(start, pulse)?;
        Ok(start)
    }

    /// Append every item of `other`, shifted to begin at the current end plus `gap`.
    pub fn append_sequence(&mut self, other: &PulseSequence, gap: f64) -> Result<()> {
        if other.is_empty() {
            return Ok(());
        }
        let offset = if self.items.is_empty() { 0.0 } else { self.duration() + gap };
        for s in &other.items {
            self.insert(s.start + offset, s.pulse)?;
        }
        Ok(())
    }

    pub fn flux_pulses(&self) -> impl Iterator<Item = (f64, &FluxPulse)> {
        self.items.iter().filter_map(|s| match &s.pulse {
            Pulse::Flux(f) => Some((s.start, f)),
            _ => None,
        })
    }

    pub fn charge_pulses(&self) -> impl Iterator<Item = (f64, &ChargePulse)> {
        self.items.iter().filter_map(|s| match &s.pulse {
            Pulse::Charge(c) => Some((s.start, c)),
            _ => None,
        })
    }

    /// Instantaneous transmon frequency.
    pub fn nu_q_of_t(&self, transmon: &TransmonParams, t: f64) -> f64 {
        let kappa = transmon.dc_shift_coeff;
        transmon.nu_q0
            + self
                .flux_pulses()
                .map(|(s, f)| f.deviation(t - s, s, kappa))
                .sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PulseSequence = serde_json::from_str(text)?;
        let mut seq = PulseSequence::new();
        for s in raw.items {
            seq.insert(s.start, s.pulse)?;
        }
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    fn transmon() -> TransmonParams {
        TransmonParams { nu_q0: 4.28, alpha: -0.25, n_levels: 3, dc_shift_coeff: 0.0 }
    }

    #[test]
    fn envelope_integrals_match_quadrature() {
        let envs = [
            Envelope::gaussian(40.0, 2.0).with_amplitude(0.7),
            Envelope::gaussian(25.0, 3.0),
            Envelope::flat_top(100.0, 5.0, 2.0).unwrap(),
            Envelope::square(12.0),
        ];
        for e in envs {
            for frac in [0.0, 0.1, 0.37, 0.5, 0.81, 1.0] {
                let tau = frac * e.duration;
                let (one, two) = e.integrals(tau);
                let q1 = integrate(|t| e.value(t), 0.0, tau, 4000);
                let q2 = integrate(|t| e.value(t).powi(2), 0.0, tau, 4000);
                assert!((one - q1).abs() < 1e-9, "{e:?} {tau}: {one} vs {q1}");
                assert!((two - q2).abs() < 1e-9, "{e:?} {tau}: {two} vs {q2}");
            }
        }
    }

    #[test]
    fn gaussian_edges_are_zero_and_peak_is_one() {
        let e = Envelope::gaussian(40.0, 2.0);
        assert!(e.value(0.0).abs() < 1e-15 && e.value(40.0).abs() < 1e-15);
        assert!((e.value(20.0) - 1.0).abs() < 1e-15);
        assert_eq!(e.value(-1.0), 0.0);
    }

    #[test]
    fn no_flux_means_static_frequency() {
        let seq = PulseSequence::new();
        assert_eq!(seq.nu_q_of_t(&transmon(), 3.0), 4.28);
    }

    #[test]
    fn square_peak_deviation() {
        let mut seq = PulseSequence::new();
        let f = FluxPulse::new(2.0, 0.8, 0.0, Envelope::square(10.0));
        seq.append(Pulse::Flux(f), 0.0).unwrap();
        // sin peaks at nu_sb t = 1/4
        let v = seq.nu_q_of_t(&transmon(), 0.125);
        assert!((v - (4.28 + 0.4)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_boundary_bound() {
        let mut seq = PulseSequence::new();
        let f = FluxPulse::new(2.0, 0.8, 0.3, Envelope::gaussian(30.0, 2.0));
        seq.append(Pulse::Flux(f), 0.0).unwrap();
        let bound = (-2.0f64).exp() * 0.8;
        for t in [0.0, 30.0] {
            assert!((seq.nu_q_of_t(&transmon(), t) - 4.28).abs() <= bound);
        }
    }

    #[test]
    fn append_and_overlap() {
        let mut seq = PulseSequence::new();
        let f = Pulse::Flux(FluxPulse::new(2.0, 0.5, 0.0, Envelope::square(30.0)));
        assert_eq!(seq.append(f, 0.0).unwrap(), 0.0);
        assert_eq!(seq.append(f, 4.0).unwrap(), 34.0);
        assert_eq!(seq.duration(), 64.0);
        assert!(matches!(seq.append(f, -5.0), Err(Error::Schedule(_))));
        assert!(seq.insert(10.0, f).is_err());
        let c = Pulse::Charge(ChargePulse::for_rotation(Transition::Ge, 4.2, PI, 0.0, Envelope::gaussian(20.0, 2.0)));
        assert!(seq.insert(10.0, c).is_ok());
    }

    #[test]
    fn rotation_angle_roundtrip() {
        let c = ChargePulse::for_rotation(Transition::Ef, 4.0, 1.234, 0.5, Envelope::gaussian(20.0, 2.0));
        assert!((c.angle() - 1.234).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let mut seq = PulseSequence::new();
        seq.append(Pulse::Charge(ChargePulse::for_rotation(Transition::Ge, 4.2, PI, 0.0, Envelope::gaussian(20.0, 2.0))), 0.0)
            .unwrap();
        seq.append(Pulse::VirtualZ(VirtualZ { target: FrameTarget::Mode(3), angle: 0.2 }), 2.0).unwrap();
        seq.append(Pulse::Flux(FluxPulse::new(2.0, 0.5, 0.0, Envelope::square(30.0))), 2.0).unwrap();
        let text = seq.to_json().unwrap();
        assert_eq!(PulseSequence::from_json(&text).unwrap(), seq);
    }
}
