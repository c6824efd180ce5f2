//! Recorded pressure corpora.
//!
//! Binary layout: 16-byte header (`b"FSDATA\0\0"`, `u32` version, `u32`
//! reserved) followed by fixed-width records of 205 little-endian `f32`:
//! `t, y_obstacle, y_agent, p[200], cd, cl`.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::backend::N_SENSORS;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FSDATA\0\0";
pub const VERSION: u32 = 1;
pub const RECORD_FLOATS: usize = N_SENSORS + 5;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub t: f32,
    pub y_obstacle: f32,
    pub y_agent: f32,
    pub pressure: Vec<f32>,
    pub cd: f32,
    pub cl: f32,
}

impl DatasetRecord {
    pub fn is_finite(&self) -> bool {
        [self.t, self.y_obstacle, self.y_agent, self.cd, self.cl]
            .iter()
            .chain(&self.pressure)
            .all(|x| x.is_finite())
    }
}

/// An in-memory corpus with a uniform sample interval.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Pressure rows as one contiguous `len x 200` matrix.
    pub fn pressure_matrix(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.len() * N_SENSORS);
        for r in &self.records {
            out.extend_from_slice(&r.pressure);
        }
        out
    }

    pub fn y_obstacle(&self) -> Vec<f32> {
        self.records.iter().map(|r| r.y_obstacle).collect()
    }

    pub fn check(&self) -> Result<()> {
        for (k, r) in self.records.iter().enumerate() {
            if r.pressure.len() != N_SENSORS {
                return Err(Error::Data(format!(
                    "record {k} has {} pressures, expected {N_SENSORS}",
                    r.pressure.len()
                )));
            }
            if !r.is_finite() {
                return Err(Error::Data(format!("record {k} holds a non-finite value")));
            }
            if k > 0 && r.t <= self.records[k - 1].t {
                return Err(Error::Data(format!("record {k} is out of time order")));
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.len() * RECORD_FLOATS * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for r in &self.records {
            for v in [r.t, r.y_obstacle, r.y_agent] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in &r.pressure {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&r.cd.to_le_bytes());
            out.extend_from_slice(&r.cl.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a pressure dataset (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset version {version}"
            )));
        }
        let body = &bytes[16..];
        let width = RECORD_FLOATS * 4;
        if !body.len().is_multiple_of(width) {
            return Err(Error::Format(format!(
                "dataset body of {} bytes is not a whole number of records",
                body.len()
            )));
        }
        let records = body
            .chunks_exact(width)
            .map(|rec| {
                let f: Vec<f32> = rec
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect();
                DatasetRecord {
                    t: f[0],
                    y_obstacle: f[1],
                    y_agent: f[2],
                    pressure: f[3..3 + N_SENSORS].to_vec(),
                    cd: f[3 + N_SENSORS],
                    cl: f[4 + N_SENSORS],
                }
            })
            .collect();
        Ok(Self { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::decode(&bytes)
    }

    /// Text mirror of the binary format. Values use the shortest
    /// representation that parses back to the same `f32`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BufWriter::new(out);
        write!(w, "t,y_obstacle,y_agent")?;
        for j in 0..N_SENSORS {
            write!(w, ",p{j}")?;
        }
        writeln!(w, ",cd,cl")?;
        for r in &self.records {
            write!(w, "{},{},{}", r.t, r.y_obstacle, r.y_agent)?;
            for p in &r.pressure {
                write!(w, ",{p}")?;
            }
            writeln!(w, ",{},{}", r.cd, r.cl)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset CSV".into()))??;
        if header.split(',').count() != RECORD_FLOATS {
            return Err(Error::Format(
                "dataset CSV header has the wrong width".into(),
            ));
        }
        let mut records = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let f: Vec<f32> = line
                .split(',')
                .map(|s| s.parse::<f32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("row {k}: {e}")))?;
            if f.len() != RECORD_FLOATS {
                return Err(Error::Format(format!("row {k} has {} fields", f.len())));
            }
            records.push(DatasetRecord {
                t: f[0],
                y_obstacle: f[1],
                y_agent: f[2],
                pressure: f[3..3 + N_SENSORS].to_vec(),
                cd: f[3 + N_SENSORS],
                cl: f[4 + N_SENSORS],
            });
        }
        Ok(Self { records })
    }
}
