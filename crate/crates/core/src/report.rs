//! Tables and CSV/JSON exports.
//!
//! Everything written here is a pure function of its inputs, except the
//! aligned-text table which also shows wall-clock time.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::learner::{Omegas, TrainingResult};
use crate::netbuild::LayeredNet;
use crate::raytracer::{SignalLevel, TraceResult};

/// One row of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scheme_name: String,
    pub received_dbm: SignalLevel,
    pub active_per_layer: Vec<usize>,
    pub cycles_run: Option<usize>,
    pub rmse_final: Option<f64>,
    pub wall_clock_ms: f64,
    /// Failure or remark recorded in place of a result.
    pub note: Option<String>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn layers(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("/")
}

/// CSV table; wall-clock time is left out so reruns compare byte for byte.
pub fn reports_csv(rows: &[RunReport]) -> String {
    let mut out = String::from("scheme,received_dbm,active_tiles_per_layer,cycles_run,rmse_final,note\n");
    for r in rows {
        let dbm = r.received_dbm.dbm().map(|d| d.to_string()).unwrap_or_else(|| "no signal".into());
        let note = r.note.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.scheme_name,
            dbm,
            layers(&r.active_per_layer),
            opt(&r.cycles_run),
            opt(&r.rmse_final),
            note
        )
        .unwrap();
    }
    out
}

/// Human-readable table with right-aligned numeric columns.
pub fn reports_text(rows: &[RunReport]) -> String {
    let header = ["scheme", "received", "active/layer", "cycles", "rmse", "ms", "note"];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.scheme_name.clone(),
                match r.received_dbm {
                    SignalLevel::Dbm(d) => format!("{d:.2} dBm"),
                    SignalLevel::NoSignal => "no signal".into(),
                },
                layers(&r.active_per_layer),
                opt(&r.cycles_run),
                r.rmse_final.map(|e| format!("{e:.3e}")).unwrap_or_default(),
                format!("{:.1}", r.wall_clock_ms),
                r.note.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[String]| {
        let mut s = String::new();
        for (i, c) in row.iter().enumerate() {
            if i == 0 || i == row.len() - 1 {
                write!(s, "{c:<w$}  ", w = width[i]).unwrap();
            } else {
                write!(s, "{c:>w$}  ", w = width[i]).unwrap();
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    out += &line(&width.map(|w| "-".repeat(w)));
    for row in &cells {
        out += &line(row);
    }
    out
}

/// Final angles in radians keyed `"(k,l)"`.
pub fn omegas_json(net: &LayeredNet, omegas: &Omegas) -> String {
    let map: BTreeMap<String, f64> = net.node_ids().map(|id| (id.to_string(), omegas[id])).collect();
    serde_json::to_string_pretty(&map).expect("map serializes")
}

/// `cycle,rmse,deviation`, one line per evaluated cycle starting at 0.
pub fn rmse_curve_csv(result: &TrainingResult) -> String {
    let mut out = String::from("cycle,rmse,deviation\n");
    for (i, (r, d)) in result.rmse_curve.iter().zip(&result.deviation_curve).enumerate() {
        writeln!(out, "{i},{r},{d}").unwrap();
    }
    out
}

/// `ray_id,x1,y1,x2,y2,power_w`, one line per traced segment.
pub fn segments_csv(trace: &TraceResult) -> String {
    let mut out = String::from("ray_id,x1,y1,x2,y2,power_w\n");
    for s in &trace.segments {
        writeln!(out, "{},{},{},{},{},{}", s.ray_id, s.from.x, s.from.y, s.to.x, s.to.y, s.power_w).unwrap();
    }
    out
}

#[derive(Serialize)]
struct Ledger<'a> {
    emitted_w: f64,
    received_w: f64,
    received_dbm: Option<f64>,
    intercepted_w: f64,
    intercepted_lossless_w: f64,
    absorbed_w: f64,
    bounce_loss_w: f64,
    spreading_loss_w: f64,
    truncated_w: f64,
    escaped_w: f64,
    terminations: &'a BTreeMap<crate::raytracer::Termination, usize>,
}

/// Energy ledger of a trace, without the segments.
pub fn trace_summary_json(trace: &TraceResult) -> String {
    let l = Ledger {
        emitted_w: trace.emitted_w,
        received_w: trace.received_w,
        received_dbm: crate::raytracer::received_power_dbm(trace).dbm(),
        intercepted_w: trace.intercepted_w,
        intercepted_lossless_w: trace.intercepted_lossless_w,
        absorbed_w: trace.absorbed_w,
        bounce_loss_w: trace.bounce_loss_w,
        spreading_loss_w: trace.spreading_loss_w,
        truncated_w: trace.truncated_w,
        escaped_w: trace.escaped_w,
        terminations: &trace.terminations,
    };
    serde_json::to_string_pretty(&l).expect("ledger serializes")
}
