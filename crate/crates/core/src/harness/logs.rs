//! CSV logs: one row per control tick, and one row per training episode.

use std::io::{Read, Write};

use super::pipeline::TickRecord;
use super::training::EpisodeStats;
use super::HarnessError;
use crate::Vec3;

/// Vector-valued tick columns, each logged as `<name>_x,<name>_y,<name>_z`.
pub const VECTOR_COLUMNS: [&str; 13] = ["ref", "m1", "m2", "cp", "mc", "d", "mf", "cpf", "w", "sc", "s", "fse", "fhat"];

fn vectors(r: &TickRecord) -> [Vec3; 13] {
    [
        r.reference,
        r.masters[0],
        r.masters[1],
        r.copilot,
        r.x_mc,
        r.x_d,
        r.x_mf,
        r.x_cpf,
        r.w,
        r.x_sc,
        r.x_s,
        r.f_se,
        r.f_hat,
    ]
}

pub fn tick_header() -> Vec<String> {
    let mut h = vec!["t".to_string(), "link".to_string()];
    for name in VECTOR_COLUMNS {
        for axis in ["x", "y", "z"] {
            h.push(format!("{name}_{axis}"));
        }
    }
    h
}

fn csv_err(e: csv::Error) -> HarnessError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    HarnessError::Csv { line, msg: e.to_string() }
}

/// Floats are written with 17 significant digits so a log reproduces the
/// run bit for bit.
pub fn write_ticks(records: &[TickRecord], out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(tick_header()).map_err(csv_err)?;
    for r in records {
        let mut row = vec![format!("{:.16e}", r.t), (r.link as u8).to_string()];
        for v in vectors(r) {
            row.extend(v.iter().map(|x| format!("{x:.16e}")));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn ticks_to_string(records: &[TickRecord]) -> String {
    let mut buf = Vec::new();
    write_ticks(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

pub fn read_ticks(input: impl Read) -> Result<Vec<TickRecord>, HarnessError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != tick_header() {
        return Err(HarnessError::Csv { line: 1, msg: "unexpected header".into() });
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64, HarnessError> {
            row[k].parse().map_err(|e| HarnessError::Csv { line, msg: format!("column {}: {e}", k + 1) })
        };
        let vec3 = |g: usize| -> Result<Vec3, HarnessError> {
            let k = 2 + 3 * g;
            Ok(Vec3::new(num(k)?, num(k + 1)?, num(k + 2)?))
        };
        let link = match &row[1] {
            "0" => false,
            "1" => true,
            other => return Err(HarnessError::Csv { line, msg: format!("link must be 0 or 1, got `{other}`") }),
        };
        out.push(TickRecord {
            t: num(0)?,
            link,
            reference: vec3(0)?,
            masters: [vec3(1)?, vec3(2)?],
            copilot: vec3(3)?,
            x_mc: vec3(4)?,
            x_d: vec3(5)?,
            x_mf: vec3(6)?,
            x_cpf: vec3(7)?,
            w: vec3(8)?,
            x_sc: vec3(9)?,
            x_s: vec3(10)?,
            f_se: vec3(11)?,
            f_hat: vec3(12)?,
        });
    }
    Ok(out)
}

pub fn write_curve(curve: &[EpisodeStats], out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for s in curve {
        w.serialize(s).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn read_curve(input: impl Read) -> Result<Vec<EpisodeStats>, HarnessError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(csv_err)).collect()
}
