// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::thresholds::DetectionThresholds;
use crate::error::{invalid, Result};
use crate::path::ScalarPath;

/// One excursion away from a plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub plateau: u8,
    pub t_start: f64,
    pub t_max: f64,
    pub t_end: f64,
    /// Largest distance from the plateau.
    pub height: f64,
    /// The excursion reached the other plateau.
    pub complete: bool,
    /// Time spent on plateaus with this label up to `t_max`, summed over the
    /// segments (and trajectories, once pooled) seen so far.
    pub plateau_clock: f64,
}

impl SpikeEvent {
    /// Copy placed on the plateau clock: `t_max` becomes `plateau_clock` and
    /// the start and end move with it.
    pub fn on_plateau_clock(&self) -> Self {
        let shift = self.plateau_clock - self.t_max;
        Self { t_start: self.t_start + shift, t_max: self.plateau_clock, t_end: self.t_end + shift, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub plateau: u8,
    pub t_start: f64,
    pub t_end: f64,
    /// Closed by a complete jump rather than by the end of the path.
    pub ended_by_jump: bool,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub t: f64,
    /// Plateau left.
    pub from: u8,
}

/// Output of the detector on one path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub segments: Vec<Segment>,
    pub jumps: Vec<Jump>,
    /// Spikes and complete events in time order.
    pub events: Vec<SpikeEvent>,
}

impl Detection {
    pub fn plateau_time(&self, label: u8) -> f64 {
        self.segments.iter().filter(|s| s.plateau == label).map(Segment::duration).sum()
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.t).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Excursion {
    t_start: f64,
    t_max: f64,
    height: f64,
}

/// Streaming hysteresis detector. Feed `(t, Q)` samples in time order, then
/// call [`PlateauTracker::finish`].
///
/// The first plateau is set when `Q` first comes within `q_exit` of 0 or 1;
/// samples before that are ignored. After a complete jump, excursions are only
/// armed once `Q` has settled within `q_exit` of the new plateau. Excursions
/// still open at the end of the path are dropped.
#[derive(Debug, Clone)]
pub struct PlateauTracker {
    th: DetectionThresholds,
    label: Option<u8>,
    armed: bool,
    seg_start: f64,
    clock: [f64; 2],
    excursion: Option<Excursion>,
    last_t: f64,
    out: Detection,
}

impl PlateauTracker {
    pub fn new(thresholds: DetectionThresholds) -> Result<Self> {
        thresholds.validate()?;
        Ok(Self {
            th: thresholds,
            label: None,
            armed: false,
            seg_start: 0.0,
            clock: [0.0; 2],
            excursion: None,
            last_t: f64::NEG_INFINITY,
            out: Detection::default(),
        })
    }

    pub fn plateau(&self) -> Option<u8> {
        self.label
    }

    #[inline]
    pub fn push(&mut self, t: f64, q: f64) {
        debug_assert!(t >= self.last_t);
        self.last_t = t;
        let th = self.th;
        let Some(p) = self.label else {
            if q < th.q_exit {
                self.open(0, t, true);
            } else if 1.0 - q < th.q_exit {
                self.open(1, t, true);
            }
            return;
        };
        let d = DetectionThresholds::distance(p, q);
        if d >= 1.0 - th.jump_level {
            let (t_start, height) = match self.excursion.take() {
                Some(e) => (e.t_start, e.height.max(d)),
                None => (t, d),
            };
            let ev = SpikeEvent {
                plateau: p,
                t_start,
                t_max: t,
                t_end: t,
                height,
                complete: true,
                plateau_clock: self.clock_at(p, t),
            };
            self.out.events.push(ev);
            self.out.jumps.push(Jump { t, from: p });
            self.close(p, t, true);
            self.open(1 - p, t, false);
            return;
        }
        if !self.armed {
            self.armed = d < th.q_exit;
            return;
        }
        match &mut self.excursion {
            None => {
                if d > th.q_enter {
                    self.excursion = Some(Excursion { t_start: t, t_max: t, height: d });
                }
            }
            Some(e) => {
                if d > e.height {
                    e.height = d;
                    e.t_max = t;
                }
                if d < th.q_exit {
                    let e = *e;
                    self.excursion = None;
                    self.out.events.push(SpikeEvent {
                        plateau: p,
                        t_start: e.t_start,
                        t_max: e.t_max,
                        t_end: t,
                        height: e.height,
                        complete: false,
                        plateau_clock: self.clock_at(p, e.t_max),
                    });
                }
            }
        }
    }

    fn clock_at(&self, label: u8, t: f64) -> f64 {
        self.clock[label as usize] + (t - self.seg_start)
    }

    fn open(&mut self, label: u8, t: f64, armed: bool) {
        self.label = Some(label);
        self.armed = armed;
        self.seg_start = t;
        self.excursion = None;
    }

    fn close(&mut self, label: u8, t: f64, ended_by_jump: bool) {
        self.out.segments.push(Segment { plateau: label, t_start: self.seg_start, t_end: t, ended_by_jump });
        self.clock[label as usize] += t - self.seg_start;
    }

    /// Closes the open segment at `t_end` and returns everything detected.
    pub fn finish(mut self, t_end: f64) -> Detection {
        if let Some(p) = self.label {
            self.close(p, t_end.max(self.seg_start), false);
        }
        self.out
    }
}

/// Runs the detector over a whole path.
pub fn detect(path: &ScalarPath, thresholds: &DetectionThresholds) -> Result<Detection> {
    let mut tr = PlateauTracker::new(*thresholds)?;
    for (t, q) in path.iter() {
        tr.push(t, q);
    }
    Ok(tr.finish(path.grid.t_end()))
}

/// Plateau segments and complete-jump times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
    pub jump_times: Vec<f64>,
}

pub fn segment_plateaus(path: &ScalarPath, thresholds: &DetectionThresholds) -> Result<Segmentation> {
    let det = detect(path, thresholds)?;
    Ok(Segmentation { jump_times: det.jump_times(), segments: det.segments })
}

/// Excursions within the given segments. Fails if `segments` were not
/// produced from this path with these thresholds.
pub fn extract_spikes(
    path: &ScalarPath,
    segments: &Segmentation,
    thresholds: &DetectionThresholds,
) -> Result<Vec<SpikeEvent>> {
    let det = detect(path, thresholds)?;
    if det.segments != segments.segments {
        return Err(invalid("segments do not belong to this path and thresholds"));
    }
    Ok(det.events)
}

/// Events as CSV with header `plateau,t_start,t_max,t_end,height,complete,plateau_clock`.
pub fn write_events_csv<W: Write>(out: W, events: &[SpikeEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["plateau", "t_start", "t_max", "t_end", "height", "complete", "plateau_clock"])?;
    for e in events {
        w.write_record([
            e.plateau.to_string(),
            e.t_start.to_string(),
            e.t_max.to_string(),
            e.t_end.to_string(),
            e.height.to_string(),
            (e.complete as u8).to_string(),
            e.plateau_clock.to_string(),
        ])?;
    }
    w.flush().map_err(|e| crate::Error::Io { path: "<events>".into(), source: e })?;
    Ok(())
}

pub fn events_to_json(events: &[SpikeEvent]) -> Result<String> {
    Ok(serde_json::to_string_pretty(events)?)
}

/// Accumulates detections from several trajectories onto a common plateau clock.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventPool {
    pub events: Vec<SpikeEvent>,
    pub plateau_time: [f64; 2],
    pub jumps_up: u64,
    pub jumps_down: u64,
    pub duration: f64,
}

impl EventPool {
    /// Appends one trajectory's detection of total length `duration`.
    /// Absorb in a fixed order to keep results reproducible.
    pub fn absorb(&mut self, det: &Detection, duration: f64) {
        for e in &det.events {
            let mut e = *e;
            e.plateau_clock += self.plateau_time[e.plateau as usize];
            self.events.push(e);
        }
        for j in &det.jumps {
            if j.from == 0 {
                self.jumps_up += 1;
            } else {
                self.jumps_down += 1;
            }
        }
        for l in 0..2u8 {
            self.plateau_time[l as usize] += det.plateau_time(l);
        }
        self.duration += duration;
    }

    pub fn jumps(&self) -> u64 {
        self.jumps_up + self.jumps_down
    }

    /// Events of one plateau label, moved onto the plateau clock.
    pub fn clocked(&self, label: u8) -> Vec<SpikeEvent> {
        self.events.iter().filter(|e| e.plateau == label).map(SpikeEvent::on_plateau_clock).collect()
    }
}
