use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::hash::unit;
use super::quadrature::{adaptive_simpson, TOL_QUAD};
use crate::error::{invalid, Result};

/// The six coefficient channels of the competition system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    A1,
    B1,
    C1,
    A2,
    B2,
    C2,
}

impl Channel {
    pub const ALL: [Channel; 6] =
        [Channel::A1, Channel::B1, Channel::C1, Channel::A2, Channel::B2, Channel::C2];

    pub fn name(self) -> &'static str {
        match self {
            Channel::A1 => "a1",
            Channel::B1 => "b1",
            Channel::C1 => "c1",
            Channel::A2 => "a2",
            Channel::B2 => "b2",
            Channel::C2 => "c2",
        }
    }

    /// Self-limitation and competition rates must stay positive.
    pub fn must_be_positive(self) -> bool {
        !matches!(self, Channel::A1 | Channel::A2)
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

/// Values of all six channels at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

impl CoefficientSet {
    pub const fn new(a1: f64, b1: f64, c1: f64, a2: f64, b2: f64, c2: f64) -> Self {
        Self { a1, b1, c1, a2, b2, c2 }
    }

    /// The reference instance used throughout the tests: `(1, 1, 0.5, 0.5, 1, 1)`.
    pub const CANONICAL: CoefficientSet = CoefficientSet::new(1.0, 1.0, 0.5, 0.5, 1.0, 1.0);

    pub fn get(&self, ch: Channel) -> f64 {
        match ch {
            Channel::A1 => self.a1,
            Channel::B1 => self.b1,
            Channel::C1 => self.c1,
            Channel::A2 => self.a2,
            Channel::B2 => self.b2,
            Channel::C2 => self.c2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ch in Channel::ALL {
            let v = self.get(ch);
            if !v.is_finite() {
                return Err(invalid(format!("{} = {v} is not finite", ch.name())));
            }
            if ch.must_be_positive() && v <= 0.0 {
                return Err(invalid(format!("{} = {v} must be > 0", ch.name())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// How one coefficient channel depends on time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Constant {
        value: f64,
    },
    /// `mean + amplitude * sin(frequency * t + phase)`.
    Periodic {
        mean: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `mean + Σ amplitude_k * sin(frequency_k * t + phase_k)`.
    QuasiPeriodic {
        mean: f64,
        terms: Vec<Harmonic>,
    },
    /// Random telegraph signal between `low` and `high` on a jittered switch
    /// grid of `rate` switch slots per unit time, convolved with a raised-cosine
    /// kernel of half-width `width`.
    SmoothedSwitching {
        low: f64,
        high: f64,
        rate: f64,
        width: f64,
    },
    /// `mean + amplitude * n(t)` where `n` is value noise in `[-1, 1]`: hashed
    /// node values every `correlation_time`, quintic-smoothstep interpolated.
    BoundedNoise {
        mean: f64,
        amplitude: f64,
        correlation_time: f64,
    },
}

impl ChannelSpec {
    pub fn constant(value: f64) -> Self {
        ChannelSpec::Constant { value }
    }

    fn rank(&self) -> u8 {
        match self {
            ChannelSpec::Constant { .. } => 0,
            ChannelSpec::Periodic { .. } => 1,
            ChannelSpec::QuasiPeriodic { .. } => 2,
            ChannelSpec::SmoothedSwitching { .. } => 3,
            ChannelSpec::BoundedNoise { .. } => 4,
        }
    }

    /// Guaranteed lower and upper bounds of the channel.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            ChannelSpec::Constant { value } => (value, value),
            ChannelSpec::Periodic { mean, amplitude, .. } => {
                (mean - amplitude.abs(), mean + amplitude.abs())
            }
            ChannelSpec::QuasiPeriodic { mean, ref terms } => {
                let s: f64 = terms.iter().map(|h| h.amplitude.abs()).sum();
                (mean - s, mean + s)
            }
            ChannelSpec::SmoothedSwitching { low, high, .. } => (low.min(high), low.max(high)),
            ChannelSpec::BoundedNoise { mean, amplitude, .. } => {
                (mean - amplitude.abs(), mean + amplitude.abs())
            }
        }
    }

    /// Upper bound on `|d/dt channel|`.
    pub fn max_rate(&self) -> f64 {
        match *self {
            ChannelSpec::Constant { .. } => 0.0,
            ChannelSpec::Periodic { amplitude, frequency, .. } => (amplitude * frequency).abs(),
            ChannelSpec::QuasiPeriodic { ref terms, .. } => {
                terms.iter().map(|h| (h.amplitude * h.frequency).abs()).sum()
            }
            ChannelSpec::SmoothedSwitching { low, high, width, .. } => (high - low).abs() / width,
            ChannelSpec::BoundedNoise { amplitude, correlation_time, .. } => {
                2.0 * amplitude.abs() * 1.875 / correlation_time
            }
        }
    }

    fn validate(&self, ch: Channel) -> Result<()> {
        let name = ch.name();
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name}.{what} = {x} is not finite")))
            }
        };
        match *self {
            ChannelSpec::Constant { value } => finite(value, "value")?,
            ChannelSpec::Periodic { mean, amplitude, frequency, phase } => {
                finite(mean, "mean")?;
                finite(amplitude, "amplitude")?;
                finite(frequency, "frequency")?;
                finite(phase, "phase")?;
            }
            ChannelSpec::QuasiPeriodic { mean, ref terms } => {
                finite(mean, "mean")?;
                for h in terms {
                    finite(h.amplitude, "amplitude")?;
                    finite(h.frequency, "frequency")?;
                    finite(h.phase, "phase")?;
                }
            }
            ChannelSpec::SmoothedSwitching { low, high, rate, width } => {
                finite(low, "low")?;
                finite(high, "high")?;
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(invalid(format!("{name}.rate must be positive")));
                }
                if !(width > 0.0 && 4.0 * width <= 1.0 / rate) {
                    return Err(invalid(format!(
                        "{name}.width must lie in (0, 1/(4 rate)] so transitions never overlap"
                    )));
                }
            }
            ChannelSpec::BoundedNoise { mean, amplitude, correlation_time } => {
                finite(mean, "mean")?;
                finite(amplitude, "amplitude")?;
                if !(correlation_time > 0.0 && correlation_time.is_finite()) {
                    return Err(invalid(format!("{name}.correlation_time must be positive")));
                }
            }
        }
        if ch.must_be_positive() {
            let (lo, _) = self.range();
            if lo <= 0.0 {
                return Err(invalid(format!(
                    "{name} floor {lo} is not positive (amplitude exceeds the mean)"
                )));
            }
        }
        Ok(())
    }

    /// Pure evaluation at absolute time `t`.
    fn eval(&self, seed: u64, ch: Channel, t: f64) -> f64 {
        match *self {
            ChannelSpec::Constant { value } => value,
            ChannelSpec::Periodic { mean, amplitude, frequency, phase } => {
                mean + amplitude * (frequency * t + phase).sin()
            }
            ChannelSpec::QuasiPeriodic { mean, ref terms } => {
                mean + terms
                    .iter()
                    .map(|h| h.amplitude * (h.frequency * t + h.phase).sin())
                    .sum::<f64>()
            }
            ChannelSpec::SmoothedSwitching { low, high, rate, width } => {
                switching_value(seed, ch.stream(), low, high, 1.0 / rate, width, t)
            }
            ChannelSpec::BoundedNoise { mean, amplitude, correlation_time } => {
                mean + amplitude * value_noise(seed, ch.stream(), correlation_time, t)
            }
        }
    }
}

/// Integrated raised-cosine kernel on `[-w, w]`: 0 below, 1 above, C² inside.
pub fn smooth_step(z: f64, w: f64) -> f64 {
    if z <= -w {
        0.0
    } else if z >= w {
        1.0
    } else {
        (z + w) / (2.0 * w) + (PI * z / w).sin() / (2.0 * PI)
    }
}

fn switch_point(seed: u64, stream: u64, cell: i64, len: f64, w: f64) -> f64 {
    cell as f64 * len + w + unit(seed, stream, cell) * (len - 2.0 * w)
}

fn level(seed: u64, stream: u64, segment: i64, low: f64, high: f64) -> f64 {
    // odd stream ids for levels keep them independent of switch jitter
    if unit(seed, stream | 0x100, segment) < 0.5 {
        low
    } else {
        high
    }
}

/// Segment `j` spans `[s_{j-1}, s_j)` and carries `level(j)`.
fn switching_value(seed: u64, stream: u64, low: f64, high: f64, len: f64, w: f64, t: f64) -> f64 {
    let k = (t / len).floor() as i64;
    let sk = switch_point(seed, stream, k, len, w);
    let j = if t < sk { k } else { k + 1 };
    let s_prev = switch_point(seed, stream, j - 1, len, w);
    let s_next = switch_point(seed, stream, j, len, w);
    let here = level(seed, stream, j, low, high);
    if t - s_prev < w {
        let before = level(seed, stream, j - 1, low, high);
        before + (here - before) * smooth_step(t - s_prev, w)
    } else if s_next - t < w {
        let after = level(seed, stream, j + 1, low, high);
        here + (after - here) * smooth_step(t - s_next, w)
    } else {
        here
    }
}

fn value_noise(seed: u64, stream: u64, cell: f64, t: f64) -> f64 {
    let s = t / cell;
    let n = s.floor();
    let f = s - n;
    let k = n as i64;
    let y0 = 2.0 * unit(seed, stream, k) - 1.0;
    let y1 = 2.0 * unit(seed, stream, k + 1) - 1.0;
    let fade = f * f * f * (f * (f * 6.0 - 15.0) + 10.0);
    y0 + (y1 - y0) * fade
}

/// Exact `∫_a^b n(τ) dτ`: the interpolant is a quintic on each cell, with
/// fade antiderivative `f⁶ - 3f⁵ + 5f⁴/2` (equal to 1/2 at `f = 1`).
fn value_noise_integral(seed: u64, stream: u64, cell: f64, a: f64, b: f64) -> f64 {
    if b < a {
        return -value_noise_integral(seed, stream, cell, b, a);
    }
    let node = |k: i64| 2.0 * unit(seed, stream, k) - 1.0;
    let fade_area = |f: f64| f * f * f * f * (f * (f - 3.0) + 2.5);
    // integral over cell k of the interpolant, from its left node to fraction f
    let partial = |k: i64, f: f64| {
        let (y0, y1) = (node(k), node(k + 1));
        cell * (y0 * f + (y1 - y0) * fade_area(f))
    };
    let (sa, sb) = (a / cell, b / cell);
    let (ka, kb) = (sa.floor() as i64, sb.floor() as i64);
    if ka == kb {
        return partial(ka, sb - sb.floor()) - partial(ka, sa - sa.floor());
    }
    let mut total = partial(ka, 1.0) - partial(ka, sa - sa.floor());
    for k in ka + 1..kb {
        total += 0.5 * cell * (node(k) + node(k + 1));
    }
    total + partial(kb, sb - sb.floor())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediumKind {
    Constant,
    Periodic,
    QuasiPeriodic,
    SmoothedSwitching,
    BoundedNoise,
}

impl MediumKind {
    fn admits(self, ch: &ChannelSpec) -> bool {
        let r = ch.rank();
        match self {
            MediumKind::Constant => r == 0,
            MediumKind::Periodic => r <= 1,
            MediumKind::QuasiPeriodic => r <= 2,
            MediumKind::SmoothedSwitching => r <= 3,
            MediumKind::BoundedNoise => r <= 2 || r == 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channels {
    pub a1: ChannelSpec,
    pub b1: ChannelSpec,
    pub c1: ChannelSpec,
    pub a2: ChannelSpec,
    pub b2: ChannelSpec,
    pub c2: ChannelSpec,
}

impl Channels {
    pub fn get(&self, ch: Channel) -> &ChannelSpec {
        match ch {
            Channel::A1 => &self.a1,
            Channel::B1 => &self.b1,
            Channel::C1 => &self.c1,
            Channel::A2 => &self.a2,
            Channel::B2 => &self.b2,
            Channel::C2 => &self.c2,
        }
    }

    pub fn get_mut(&mut self, ch: Channel) -> &mut ChannelSpec {
        match ch {
            Channel::A1 => &mut self.a1,
            Channel::B1 => &mut self.b1,
            Channel::C1 => &mut self.c1,
            Channel::A2 => &mut self.a2,
            Channel::B2 => &mut self.b2,
            Channel::C2 => &mut self.c2,
        }
    }
}

/// Serializable description of one realization of the random medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    pub kind: MediumKind,
    #[serde(default)]
    pub seed: u64,
    pub channels: Channels,
}

impl MediumSpec {
    pub fn constant(c: CoefficientSet) -> Self {
        let k = ChannelSpec::constant;
        MediumSpec {
            kind: MediumKind::Constant,
            seed: 0,
            channels: Channels {
                a1: k(c.a1),
                b1: k(c.b1),
                c1: k(c.c1),
                a2: k(c.a2),
                b2: k(c.b2),
                c2: k(c.c2),
            },
        }
    }

    /// Replaces one channel and widens `kind` if needed.
    pub fn with_channel(mut self, ch: Channel, spec: ChannelSpec) -> Self {
        let kind = match spec.rank() {
            0 => MediumKind::Constant,
            1 => MediumKind::Periodic,
            2 => MediumKind::QuasiPeriodic,
            3 => MediumKind::SmoothedSwitching,
            _ => MediumKind::BoundedNoise,
        };
        if !self.kind.admits(&spec) {
            self.kind = kind;
        }
        *self.channels.get_mut(ch) = spec;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for ch in Channel::ALL {
            let spec = self.channels.get(ch);
            if !self.kind.admits(spec) {
                return Err(invalid(format!(
                    "channel {} of type {:?} is not allowed in a {:?} medium",
                    ch.name(),
                    spec,
                    self.kind
                )));
            }
            spec.validate(ch)?;
        }
        Ok(())
    }
}

/// One realization ω of the medium, possibly time-shifted (θ_s ω).
///
/// Every query is a pure function of the spec and the absolute time
/// `t + offset`; shifting only changes `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    spec: MediumSpec,
    offset: f64,
}

/// Validates `spec` and realizes the medium.
pub fn make_medium(spec: MediumSpec) -> Result<Medium> {
    Medium::new(spec)
}

impl Medium {
    pub fn new(spec: MediumSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, offset: 0.0 })
    }

    pub fn constant(c: CoefficientSet) -> Result<Self> {
        Self::new(MediumSpec::constant(c))
    }

    pub fn spec(&self) -> &MediumSpec {
        &self.spec
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_constant(&self) -> bool {
        self.spec.kind == MediumKind::Constant
    }

    /// θ_s: `shift(s).coeffs_at(t) == coeffs_at(t + s)`.
    pub fn shift(&self, s: f64) -> Medium {
        Medium { spec: self.spec.clone(), offset: self.offset + s }
    }

    #[inline]
    pub fn channel(&self, ch: Channel, t: f64) -> f64 {
        self.spec.channels.get(ch).eval(self.spec.seed, ch, t + self.offset)
    }

    pub fn coeffs_at(&self, t: f64) -> CoefficientSet {
        let abs = t + self.offset;
        let c = &self.spec.channels;
        let seed = self.spec.seed;
        CoefficientSet {
            a1: c.a1.eval(seed, Channel::A1, abs),
            b1: c.b1.eval(seed, Channel::B1, abs),
            c1: c.c1.eval(seed, Channel::C1, abs),
            a2: c.a2.eval(seed, Channel::A2, abs),
            b2: c.b2.eval(seed, Channel::B2, abs),
            c2: c.c2.eval(seed, Channel::C2, abs),
        }
    }

    /// `∫_s^t channel(τ) dτ` to absolute accuracy [`TOL_QUAD`].
    pub fn integral(&self, ch: Channel, s: f64, t: f64) -> f64 {
        match *self.spec.channels.get(ch) {
            ChannelSpec::BoundedNoise { mean, amplitude, correlation_time } => {
                let (a, b) = (s + self.offset, t + self.offset);
                mean * (t - s)
                    + amplitude
                        * value_noise_integral(self.spec.seed, ch.stream(), correlation_time, a, b)
            }
            _ => adaptive_simpson(|tau| self.channel(ch, tau), s, t, TOL_QUAD),
        }
    }

    /// Sum of the per-channel bounds on `|d/dt coefficient|`.
    pub fn variation_rate(&self) -> f64 {
        Channel::ALL.iter().map(|&ch| self.spec.channels.get(ch).max_rate()).sum()
    }

    /// Guaranteed range of one channel.
    pub fn range(&self, ch: Channel) -> (f64, f64) {
        self.spec.channels.get(ch).range()
    }
}
