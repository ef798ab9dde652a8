//! Binary dumps of noise paths and trajectories.
//!
//! Layout: the 8-byte magic `QBMPATH1`, a little-endian `u32` header length,
//! a JSON [`DumpHeader`], then fixed-size records of a `u64` id followed by
//! `record_len` `f64` values, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::noise::NoisePath;

pub const MAGIC: &[u8; 8] = b"QBMPATH1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpKind {
    /// One noise path per record, sampled from `t_start` in steps of `t_step`.
    Noise,
    /// Per record: `x`, `p` and the weight at each recorded time, field after field.
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub kind: DumpKind,
    pub master_seed: u64,
    pub t_start: f64,
    pub t_step: f64,
    /// Samples per field.
    pub n_times: usize,
    pub fields: Vec<String>,
}

impl DumpHeader {
    pub fn record_len(&self) -> usize {
        self.n_times * self.fields.len()
    }
}

pub struct DumpWriter {
    header: DumpHeader,
    out: BufWriter<File>,
    path: PathBuf,
}

impl DumpWriter {
    pub fn create(path: impl AsRef<Path>, header: DumpHeader) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        let json = serde_json::to_vec(&header).expect("header serializes");
        let len = u32::try_from(json.len()).expect("header fits in u32");
        (|| {
            out.write_all(MAGIC)?;
            out.write_all(&len.to_le_bytes())?;
            out.write_all(&json)
        })()
        .map_err(|e| Error::io(&path, e))?;
        Ok(DumpWriter { header, out, path })
    }

    pub fn write_record(&mut self, id: u64, values: &[f64]) -> Result<()> {
        if values.len() != self.header.record_len() {
            return Err(Error::Misuse(format!(
                "record of {} values, header says {}",
                values.len(),
                self.header.record_len()
            )));
        }
        let mut buf = Vec::with_capacity(8 * (values.len() + 1));
        buf.extend_from_slice(&id.to_le_bytes());
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub struct DumpReader {
    pub header: DumpHeader,
    input: BufReader<File>,
    path: PathBuf,
}

impl DumpReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let bad = |message: String| Error::Format {
            path: path.display().to_string(),
            message,
        };
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut input = BufReader::new(file);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|e| Error::io(&path, e))?;
        if &magic != MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let mut len = [0u8; 4];
        input.read_exact(&mut len).map_err(|e| Error::io(&path, e))?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        input.read_exact(&mut json).map_err(|e| Error::io(&path, e))?;
        let header: DumpHeader = serde_json::from_slice(&json).map_err(|e| bad(format!("header: {e}")))?;
        Ok(DumpReader { header, input, path })
    }

    /// Next record, or `None` at a clean end of file.
    pub fn next_record(&mut self) -> Result<Option<(u64, Vec<f64>)>> {
        let n = self.header.record_len();
        let mut buf = vec![0u8; 8 * (n + 1)];
        let mut filled = 0;
        while filled < buf.len() {
            match self.input.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io(&self.path, e)),
            }
        }
        if filled == 0 {
            return Ok(None);
        }
        if filled < buf.len() {
            return Err(Error::Format {
                path: self.path.display().to_string(),
                message: format!("truncated record ({filled} of {} bytes)", buf.len()),
            });
        }
        let id = u64::from_le_bytes(buf[..8].try_into().unwrap());
        let values = buf[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Some((id, values)))
    }

    pub fn read_all(mut self) -> Result<Vec<(u64, Vec<f64>)>> {
        let mut out = Vec::new();
        while let Some(r) = self.next_record()? {
            out.push(r);
        }
        Ok(out)
    }
}

/// Write noise paths, which must share one grid.
pub fn write_noise(path: impl AsRef<Path>, master_seed: u64, paths: &[NoisePath]) -> Result<()> {
    let Some(first) = paths.first() else {
        return Err(Error::Misuse("no noise paths to dump".into()));
    };
    let header = DumpHeader {
        kind: DumpKind::Noise,
        master_seed,
        t_start: first.t_start,
        t_step: first.t_step,
        n_times: first.len(),
        fields: vec!["xi".into()],
    };
    let mut w = DumpWriter::create(path, header)?;
    for (i, p) in paths.iter().enumerate() {
        let id = p.seed.map(|s| s.trajectory).unwrap_or(i as u64);
        w.write_record(id, &p.values)?;
    }
    w.finish()
}

/// Write trajectories, which must share one recording grid.
pub fn write_trajectories(path: impl AsRef<Path>, master_seed: u64, trajs: &[Trajectory]) -> Result<()> {
    let Some(first) = trajs.first() else {
        return Err(Error::Misuse("no trajectories to dump".into()));
    };
    let n = first.times.len();
    let t_step = if n > 1 { first.times[1] - first.times[0] } else { 0.0 };
    let header = DumpHeader {
        kind: DumpKind::Trajectory,
        master_seed,
        t_start: first.times.first().copied().unwrap_or(0.0),
        t_step,
        n_times: n,
        fields: vec!["x".into(), "p".into(), "weight".into()],
    };
    let mut w = DumpWriter::create(path, header)?;
    let mut rec = Vec::with_capacity(3 * n);
    for t in trajs {
        rec.clear();
        rec.extend_from_slice(&t.x);
        rec.extend_from_slice(&t.p);
        rec.extend(t.times.iter().map(|&s| t.weight_at(s)));
        w.write_record(t.id, &rec)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let header = DumpHeader {
            kind: DumpKind::Noise,
            master_seed: 9,
            t_start: -1.0,
            t_step: 0.5,
            n_times: 3,
            fields: vec!["xi".into()],
        };
        let mut w = DumpWriter::create(&path, header.clone()).unwrap();
        w.write_record(4, &[1.0, -2.5, f64::MIN_POSITIVE]).unwrap();
        w.write_record(5, &[0.0, 1e300, -0.0]).unwrap();
        assert!(w.write_record(6, &[1.0]).is_err());
        w.finish().unwrap();

        let r = DumpReader::open(&path).unwrap();
        assert_eq!(r.header, header);
        let recs = r.read_all().unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0], (4, vec![1.0, -2.5, f64::MIN_POSITIVE]));
        assert_eq!(recs[1].1[1], 1e300);
        assert!(recs[1].1[2].is_sign_negative());
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"NOTADUMP\0\0\0\0").unwrap();
        assert!(matches!(DumpReader::open(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn truncated_record_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let header = DumpHeader {
            kind: DumpKind::Noise,
            master_seed: 0,
            t_start: 0.0,
            t_step: 1.0,
            n_times: 2,
            fields: vec!["xi".into()],
        };
        let mut w = DumpWriter::create(&path, header).unwrap();
        w.write_record(0, &[1.0, 2.0]).unwrap();
        w.finish().unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        let f = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 3).unwrap();
        let mut r = DumpReader::open(&path).unwrap();
        assert!(matches!(r.next_record(), Err(Error::Format { .. })));
    }
}
