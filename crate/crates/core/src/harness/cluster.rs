use crate::error::{Error, Result};
use crate::event_world::EventType;
use crate::models::StepTrace;

/// Unordered event pairs in table order.
pub const PAIRS: [(EventType, EventType); 6] = [
    (EventType::Add, EventType::Sin),
    (EventType::Add, EventType::Sub),
    (EventType::Add, EventType::Con),
    (EventType::Sin, EventType::Sub),
    (EventType::Sin, EventType::Con),
    (EventType::Sub, EventType::Con),
];

pub fn pair_name((a, b): (EventType, EventType)) -> String {
    format!("{a}-{b}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterReport {
    /// Mean gate output per event, indexed by [`EventType::index`].
    pub centers: [Vec<f64>; 4],
    /// Euclidean center distances in [`PAIRS`] order.
    pub distances: [f64; 6],
}

impl ClusterReport {
    pub fn distance(&self, a: EventType, b: EventType) -> f64 {
        euclid(&self.centers[a.index()], &self.centers[b.index()])
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Per-event centers of the gate outputs and their pairwise distances.
pub fn cluster_analysis(traces: &[StepTrace]) -> Result<ClusterReport> {
    let dim = traces.first().map_or(0, |t| t.gate.len());
    let mut sums = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 4];
    for tr in traces {
        let i = tr.event.index();
        counts[i] += 1;
        for (s, v) in sums[i].iter_mut().zip(&tr.gate) {
            *s += v;
        }
    }
    for e in EventType::ALL {
        if counts[e.index()] == 0 {
            return Err(Error::MissingEvent(e.name().into()));
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    let mut distances = [0.0; 6];
    for (d, &(a, b)) in distances.iter_mut().zip(&PAIRS) {
        *d = euclid(&sums[a.index()], &sums[b.index()]);
    }
    Ok(ClusterReport {
        centers: sums,
        distances,
    })
}
