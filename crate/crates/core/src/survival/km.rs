use std::io::Write;

use serde::Serialize;

use super::{check_times, Result, SurvivalError};

/// Product-limit estimate evaluated at each distinct event time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmCurve {
    pub event_times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub n: usize,
}

pub fn kaplan_meier(time: &[f64], event: &[bool]) -> Result<KmCurve> {
    check_times(time, event)?;
    if time.is_empty() {
        return Err(SurvivalError::EmptyCohort);
    }
    let mut order: Vec<usize> = (0..time.len()).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let mut curve = KmCurve { event_times: vec![], survival: vec![], at_risk: vec![], events: vec![], n: time.len() };
    let mut s = 1.0;
    let mut remaining = time.len();
    let mut i = 0;
    while i < order.len() {
        let t = time[order[i]];
        let mut j = i;
        let mut deaths = 0;
        while j < order.len() && time[order[j]] == t {
            deaths += usize::from(event[order[j]]);
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / remaining as f64;
            curve.event_times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(remaining);
            curve.events.push(deaths);
        }
        remaining -= j - i;
        i = j;
    }
    Ok(curve)
}

impl KmCurve {
    /// `S(t)`, right-continuous.
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.event_times.partition_point(|&e| e <= t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }

    /// `time,survival,at_risk,events`, starting with the `(0, 1)` anchor.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,survival,at_risk,events")?;
        writeln!(w, "0,1,{},0", self.n)?;
        for i in 0..self.event_times.len() {
            writeln!(w, "{},{},{},{}", self.event_times[i], self.survival[i], self.at_risk[i], self.events[i])?;
        }
        Ok(())
    }
}
