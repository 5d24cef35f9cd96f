//! Line-delimited JSON trajectory logs, one record per control tick.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub action: [f64; 2],
    pub reward: f64,
    pub cost: f64,
    pub intervention: bool,
}

pub struct TrajectoryWriter {
    out: BufWriter<File>,
}

impl TrajectoryWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(TrajectoryWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn append(path: &Path) -> io::Result<Self> {
        let f = File::options().create(true).append(true).open(path)?;
        Ok(TrajectoryWriter { out: BufWriter::new(f) })
    }

    pub fn write(&mut self, rec: &TrajectoryRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub fn read_trajectory(path: &Path) -> io::Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}
