use std::io::{Read, Write};

use super::RealSignal;
use crate::error::{invalid, Result};

/// Writes `t,ch0,ch1,...` with 17 significant digits.
pub fn write_csv<W: Write>(u: &RealSignal, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..u.channels()).map(|c| format!("ch{c}")));
    w.write_record(&header)?;
    for t in 0..u.len() {
        let mut rec = vec![format!("{:.16e}", u.time(t))];
        rec.extend(u.row(t).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a signal written by [`write_csv`]; `dt` is taken from the first two rows.
pub fn read_csv<R: Read>(input: R) -> Result<RealSignal> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(invalid("signal CSV must start with a `t` column followed by channels"));
    }
    let channels = headers.len() - 1;
    let mut times = Vec::new();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| invalid(format!("bad number `{s}`: {e}")));
        times.push(parse(&rec[0])?);
        for c in 1..=channels {
            data.push(parse(&rec[c])?);
        }
    }
    if times.len() < 2 {
        return Err(invalid("signal CSV needs at least two rows"));
    }
    let dt = times[1] - times[0];
    RealSignal::new(data, channels, dt)
}
