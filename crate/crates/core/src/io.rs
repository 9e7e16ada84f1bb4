//! File formats: event CSV, JSON model/cluster/Fisher/config files and the
//! trajectory CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Event, EventStream, TIE_EPSILON};
use crate::scan::GammaSnapshot;

/// Parses `time,node` CSV. Exact ties are broken by nudging the later event
/// forward by `TIE_EPSILON`; any other decrease in time is an error. The
/// horizon defaults to the last event time.
pub fn parse_events<R: Read>(reader: R, horizon: Option<f64>) -> Result<EventStream> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "node" {
        return Err(Error::Parse { line: 1, message: format!("expected header `time,node`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")) });
    }
    let mut events: Vec<Event> = Vec::new();
    let mut last_raw = f64::NEG_INFINITY;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", rec.len())));
        }
        let time: f64 = rec[0].parse().map_err(|_| bad(format!("invalid time {:?}", &rec[0])))?;
        let node: usize = rec[1].parse().map_err(|_| bad(format!("invalid node {:?}", &rec[1])))?;
        if !(time >= 0.0) || !time.is_finite() {
            return Err(bad(format!("time must be finite and nonnegative, got {time}")));
        }
        if time < last_raw {
            return Err(bad(format!("time {time} precedes previous event at {last_raw}")));
        }
        last_raw = time;
        let time = match events.last() {
            Some(prev) if time <= prev.time => prev.time + TIE_EPSILON,
            _ => time,
        };
        events.push(Event::new(time, node));
    }
    let end = events.last().map_or(0.0, |e| e.time);
    let horizon = horizon.unwrap_or(end);
    if horizon < end {
        return Err(Error::Argument(format!("horizon {horizon} is before the last event at {end}")));
    }
    EventStream::new(events, horizon)
}

pub fn read_events(path: &Path, horizon: Option<f64>) -> Result<EventStream> {
    parse_events(BufReader::new(File::open(path)?), horizon)
}

pub fn write_events<W: Write>(stream: &EventStream, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "node"])?;
    for e in stream.events() {
        w.write_record([format!("{}", e.time), e.node.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| {
        if e.is_data() || e.is_syntax() || e.is_eof() {
            Error::Parse { line: e.line() as u64, message: format!("{}: {e}", path.display()) }
        } else {
            e.into()
        }
    })
}

pub fn write_json<T: Serialize, W: Write>(value: &T, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// `t,gamma_1,...,gamma_L,max_abs`
pub fn write_trajectory<W: Write>(trajectory: &[GammaSnapshot], num_clusters: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=num_clusters).map(|i| format!("gamma_{i}")));
    header.push("max_abs".into());
    w.write_record(&header)?;
    for s in trajectory {
        let mut row = vec![format!("{}", s.t)];
        row.extend(s.per_cluster.iter().map(|g| format!("{g}")));
        row.push(format!("{}", s.max_abs));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
