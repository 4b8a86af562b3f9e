// SPDX-License-Identifier: Apache-2.0

//! Trajectory, event, plot and report files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;
use spikes::SpikeEvent;

use crate::config::Format;
use crate::runner::{Recorded, RunOutput};

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}

/// Events CSV: `trajectory,plateau,t_start,t_max,t_end,height,complete,plateau_clock`.
pub fn events_csv(events: &[(u64, SpikeEvent)]) -> Vec<u8> {
    let mut s = String::from("trajectory,plateau,t_start,t_max,t_end,height,complete,plateau_clock\n");
    for (id, e) in events {
        s.push_str(&format!(
            "{id},{},{},{},{},{},{},{}\n",
            e.plateau, e.t_start, e.t_max, e.t_end, e.height, e.complete as u8, e.plateau_clock
        ));
    }
    s.into_bytes()
}

/// Plain CSV with a header line of column names.
pub fn write_record_csv(rec: &Recorded, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let names: Vec<&str> = rec.columns.iter().map(|c| c.0).collect();
    writeln!(w, "{}", names.join(","))?;
    write_rows(&mut w, rec, ",")?;
    finish(w, path)
}

fn write_rows<W: Write>(w: &mut W, rec: &Recorded, sep: &str) -> Result<()> {
    let n = rec.values.first().map_or(0, Vec::len);
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for (j, col) in rec.values.iter().enumerate() {
            if j > 0 {
                line.push_str(sep);
            }
            line.push_str(&col[i].to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Plot-ready columns: a commented header naming each column and its unit.
pub fn write_plot_columns(rec: &Recorded, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# trajectory {}", rec.stream_id)?;
    for (i, (name, unit)) in rec.columns.iter().enumerate() {
        writeln!(w, "# column {}: {name} [{unit}]", i + 1)?;
    }
    write_rows(&mut w, rec, " ")?;
    finish(w, path)
}

/// Spike overlay: `(t_max, height)` pairs of one trajectory.
pub fn write_overlay(stream_id: u64, events: &[(u64, SpikeEvent)], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# trajectory {stream_id} spike apexes")?;
    writeln!(w, "# column 1: t_max [model time]")?;
    writeln!(w, "# column 2: height [distance from plateau]")?;
    writeln!(w, "# column 3: complete [0/1]")?;
    for (_, e) in events.iter().filter(|(id, _)| *id == stream_id) {
        writeln!(w, "{} {} {}", e.t_max, e.height, e.complete as u8)?;
    }
    finish(w, path)
}

/// Writes everything for a run into `dir`; returns the files written.
pub fn write_outputs(out: &RunOutput, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    let has_events = !out.events.is_empty() || out.report.jumps.is_some();
    for rec in &out.records {
        let stem = format!("trajectory_{}", rec.stream_id);
        if formats.contains(&Format::Csv) {
            let p = dir.join(format!("{stem}.csv"));
            write_record_csv(rec, &p)?;
            written.push(p);
        }
        if formats.contains(&Format::Json) {
            let p = dir.join(format!("{stem}.json"));
            let cols: serde_json::Map<String, serde_json::Value> =
                rec.columns.iter().zip(&rec.values).map(|((n, _), v)| (n.to_string(), json!(v))).collect();
            let text = serde_json::to_string(&json!({ "trajectory": rec.stream_id, "columns": cols }))?;
            fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?;
            written.push(p);
        }
        let p = dir.join(format!("{stem}.dat"));
        write_plot_columns(rec, &p)?;
        written.push(p);
        if has_events {
            let p = dir.join(format!("spikes_{}.dat", rec.stream_id));
            write_overlay(rec.stream_id, &out.events, &p)?;
            written.push(p);
        }
    }
    if has_events {
        if formats.contains(&Format::Csv) {
            let p = dir.join("events.csv");
            fs::write(&p, events_csv(&out.events)).with_context(|| format!("cannot write {}", p.display()))?;
            written.push(p);
        }
        if formats.contains(&Format::Json) {
            let p = dir.join("events.json");
            let v: Vec<_> = out.events.iter().map(|(id, e)| json!({ "trajectory": id, "event": e })).collect();
            fs::write(&p, serde_json::to_string_pretty(&v)?)
                .with_context(|| format!("cannot write {}", p.display()))?;
            written.push(p);
        }
    }
    let p = dir.join("report.json");
    fs::write(&p, serde_json::to_string_pretty(&out.report)?)
        .with_context(|| format!("cannot write {}", p.display()))?;
    written.push(p);
    Ok(written)
}
