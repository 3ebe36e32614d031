//! Synthetic event-switching time series.
//!
//! A stream is a chain `x_{t+1} = f_e(x_t, y_t)` where `y_t ~ U(-1, 1)` and
//! the generating function `e` switches every 5 to 12 steps. Alongside the
//! values, each sample carries a one-hot context vector (optionally switched
//! early) and the surprise value that drives the switch GRU.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

pub const MIN_SEGMENT: usize = 5;
pub const MAX_SEGMENT: usize = 12;
pub const CI_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventType {
    Add,
    Sin,
    Sub,
    Con,
}

impl EventType {
    pub const ALL: [EventType; 4] = [EventType::Add, EventType::Sin, EventType::Sub, EventType::Con];

    pub fn index(self) -> usize {
        match self {
            EventType::Add => 0,
            EventType::Sin => 1,
            EventType::Sub => 2,
            EventType::Con => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        EventType::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EventType::Add => "add",
            EventType::Sin => "sin",
            EventType::Sub => "sub",
            EventType::Con => "con",
        }
    }

    pub fn one_hot(self) -> [f64; CI_DIM] {
        let mut v = [0.0; CI_DIM];
        v[self.index()] = 1.0;
        v
    }

    /// Next event in the fixed cycle add, sin, sub, con.
    pub fn next_in_cycle(self) -> Self {
        EventType::ALL[(self.index() + 1) % 4]
    }

    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            EventType::Add => 0.9 * x + y,
            EventType::Sin => x + (std::f64::consts::PI * y).sin(),
            EventType::Sub => 0.9 * x - y,
            EventType::Con => x,
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventType::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Contract(format!("unknown event `{s}`")))
    }
}

pub fn eval_event_fn(e: EventType, x: f64, y: f64) -> f64 {
    e.eval(x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderMode {
    Fixed,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMode {
    None,
    InTune,
    EarlySwitch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    AlwaysClosed,
    AlwaysOpen,
    OpenAtSwitch,
    Gradual,
}

impl GateMode {
    pub const ALL: [GateMode; 4] = [GateMode::AlwaysClosed, GateMode::AlwaysOpen, GateMode::OpenAtSwitch, GateMode::Gradual];

    pub fn name(self) -> &'static str {
        match self {
            GateMode::AlwaysClosed => "always-closed",
            GateMode::AlwaysOpen => "always-open",
            GateMode::OpenAtSwitch => "open-at-switch",
            GateMode::Gradual => "gradual",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub event: EventType,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Ordered, gap-free tiling of `[0, len)` by event segments.
///
/// Every segment is 5 to 12 steps long except the last, which is cut off
/// by the end of the stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventSchedule {
    pub segments: Vec<Segment>,
    pub order: OrderMode,
}

impl EventSchedule {
    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Start steps of all segments after the first, i.e. the event switches.
    pub fn switch_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.iter().skip(1).map(|s| s.start)
    }

    pub fn event_at(&self, t: usize) -> Option<EventType> {
        let i = self.segments.partition_point(|s| s.end <= t);
        self.segments.get(i).filter(|s| s.start <= t).map(|s| s.event)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleOptions {
    pub order: OrderMode,
    /// Random order only: forbid drawing the current event again.
    pub no_repeat: bool,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            order: OrderMode::Fixed,
            no_repeat: false,
        }
    }
}

pub fn make_schedule(rng: &mut Rng, steps: usize, opts: ScheduleOptions) -> Result<EventSchedule> {
    if steps == 0 {
        return Err(Error::Contract("schedule length must be >= 1".into()));
    }
    let mut segments = Vec::new();
    let mut start = 0;
    let mut event = EventType::Add;
    while start < steps {
        let len = rng.uniform_int(MIN_SEGMENT, MAX_SEGMENT);
        let end = (start + len).min(steps);
        segments.push(Segment { event, start, end });
        start = end;
        event = match opts.order {
            OrderMode::Fixed => event.next_in_cycle(),
            OrderMode::Random if opts.no_repeat => {
                let k = rng.uniform_int(0, 2);
                let others: Vec<EventType> = EventType::ALL.into_iter().filter(|&e| e != event).collect();
                others[k]
            }
            OrderMode::Random => EventType::ALL[rng.uniform_int(0, 3)],
        };
    }
    Ok(EventSchedule {
        segments,
        order: opts.order,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamSample {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub target: f64,
    pub event: EventType,
    pub ci: [f64; CI_DIM],
    pub surprise: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamOptions {
    pub ci_mode: CiMode,
    pub gate_mode: GateMode,
    /// Width of the gradual opening pattern (odd, >= 1). 3 gives (0.5, 1, 0.5).
    pub gradual_width: usize,
    pub x0: f64,
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions {
            ci_mode: CiMode::InTune,
            gate_mode: GateMode::OpenAtSwitch,
            gradual_width: 3,
            x0: 0.0,
        }
    }
}

/// Per-step surprise values for a schedule.
pub fn gate_schedule(schedule: &EventSchedule, mode: GateMode, gradual_width: usize) -> Result<Vec<f64>> {
    let n = schedule.len();
    Ok(match mode {
        GateMode::AlwaysClosed => vec![0.0; n],
        GateMode::AlwaysOpen => vec![1.0; n],
        GateMode::OpenAtSwitch => {
            let mut s = vec![0.0; n];
            for t in schedule.switch_steps() {
                s[t] = 1.0;
            }
            s
        }
        GateMode::Gradual => {
            if gradual_width == 0 || gradual_width.is_multiple_of(2) {
                return Err(Error::Contract(format!("gradual width must be odd and >= 1, got {gradual_width}")));
            }
            let half = gradual_width / 2;
            let mut s = vec![0.0; n];
            for t in schedule.switch_steps() {
                for k in 0..=half {
                    let v = 1.0 - k as f64 / (half + 1) as f64;
                    if t + k < n {
                        s[t + k] = f64::max(s[t + k], v);
                    }
                    if k <= t {
                        s[t - k] = f64::max(s[t - k], v);
                    }
                }
            }
            s
        }
    })
}

/// Context vectors for each step of the schedule.
///
/// In early-switch mode the context for segment `k + 1` appears at a step
/// drawn uniformly from `[start_k + 2, start_{k+1} - 1]`.
pub fn context_channel(rng: &mut Rng, schedule: &EventSchedule, mode: CiMode) -> Vec<[f64; CI_DIM]> {
    let n = schedule.len();
    match mode {
        CiMode::None => vec![[0.0; CI_DIM]; n],
        CiMode::InTune => (0..n).map(|t| schedule.event_at(t).unwrap().one_hot()).collect(),
        CiMode::EarlySwitch => {
            let mut out = Vec::with_capacity(n);
            for (k, seg) in schedule.segments.iter().enumerate() {
                let flip = match schedule.segments.get(k + 1) {
                    Some(next) => rng.uniform_int(seg.start + 2, next.start - 1),
                    None => seg.end,
                };
                for t in seg.start..seg.end {
                    let e = if t >= flip { schedule.segments[k + 1].event } else { seg.event };
                    out.push(e.one_hot());
                }
            }
            out
        }
    }
}

pub fn make_stream(rng: &mut Rng, schedule: &EventSchedule, opts: &StreamOptions) -> Result<Vec<StreamSample>> {
    if schedule.is_empty() {
        return Err(Error::Contract("empty schedule".into()));
    }
    let surprise = gate_schedule(schedule, opts.gate_mode, opts.gradual_width)?;
    let ci = context_channel(rng, schedule, opts.ci_mode);
    let mut x = opts.x0;
    let mut out = Vec::with_capacity(schedule.len());
    for seg in &schedule.segments {
        for t in seg.start..seg.end {
            let y = rng.uniform_unchecked(-1.0, 1.0);
            let target = seg.event.eval(x, y);
            out.push(StreamSample {
                t,
                x,
                y,
                target,
                event: seg.event,
                ci: ci[t],
                surprise: surprise[t],
            });
            x = target;
        }
    }
    Ok(out)
}

/// MAE of the predictor that outputs `x_t` unchanged.
pub fn identity_baseline_error(stream: &[StreamSample]) -> Result<f64> {
    if stream.is_empty() {
        return Err(Error::Contract("identity baseline of an empty stream".into()));
    }
    Ok(stream.iter().map(|s| (s.target - s.x).abs()).sum::<f64>() / stream.len() as f64)
}

/// Writes a stream as CSV: `t,x,y,target,event,ci0,ci1,ci2,ci3,surprise`.
pub fn write_stream_csv<W: Write>(stream: &[StreamSample], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "x", "y", "target", "event", "ci0", "ci1", "ci2", "ci3", "surprise"])?;
    for s in stream {
        wr.write_record([
            s.t.to_string(),
            s.x.to_string(),
            s.y.to_string(),
            s.target.to_string(),
            s.event.name().to_string(),
            s.ci[0].to_string(),
            s.ci[1].to_string(),
            s.ci[2].to_string(),
            s.ci[3].to_string(),
            s.surprise.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
