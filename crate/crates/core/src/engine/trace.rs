use std::fmt::Write as _;
use std::io::{self, Write};

use crate::haptics::ForceSample;

pub const TRACE_HEADER: &str = "tick,t,px,py,pz,vx,vy,vz,fx,fy,fz,depth,contact,events";

/// One CSV row; row index is the tick index.
pub fn trace_row(tick: usize, s: &ForceSample) -> String {
    let (p, v, f) = (s.probe.position, s.probe.velocity, s.force);
    let depth = s.contact.map_or(0.0, |c| c.depth);
    let events: Vec<&str> = s.events.iter().map(|e| e.tag()).collect();
    let mut row = String::with_capacity(160);
    write!(
        row,
        "{tick},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.t,
        p.x,
        p.y,
        p.z,
        v.x,
        v.y,
        v.z,
        f.x,
        f.y,
        f.z,
        depth,
        u8::from(s.contact.is_some()),
        events.join(";")
    )
    .unwrap();
    row
}

pub fn write_trace_csv<W: Write>(mut out: W, trace: &[ForceSample]) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for (i, s) in trace.iter().enumerate() {
        writeln!(out, "{}", trace_row(i, s))?;
    }
    out.flush()
}

pub fn trace_to_csv(trace: &[ForceSample]) -> String {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, trace).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("trace rows are ASCII")
}
