//! Binary checkpoints for long moment runs. A checkpoint stores the config
//! hash it was produced under plus per-(r, t) raw sums for every angle, so
//! a matching rerun can skip finished radii. Resuming against a different
//! config hash is refused outright.

use std::io::{self, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"WPSLECKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRecord {
    pub r: f64,
    pub t: f64,
    /// Per-angle (count, sum, sum of squares).
    pub raw: Vec<(u64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub records: Vec<MomentRecord>,
}

#[derive(Debug)]
pub enum CheckpointError {
    Io(io::Error),
    Malformed(String),
    HashMismatch { found: u64, expected: u64 },
}

impl std::fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "checkpoint io: {e}"),
            CheckpointError::Malformed(m) => write!(f, "checkpoint malformed: {m}"),
            CheckpointError::HashMismatch { found, expected } => write!(
                f,
                "checkpoint hash 0x{found:016x} does not match config hash 0x{expected:016x}"
            ),
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<io::Error> for CheckpointError {
    fn from(e: io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

impl Checkpoint {
    pub fn find(&self, r: f64, t: f64) -> Option<&MomentRecord> {
        self.records.iter().find(|m| m.r == r && m.t == t)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&self.config_hash.to_le_bytes());
        buf.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for rec in &self.records {
            buf.extend_from_slice(&rec.r.to_le_bytes());
            buf.extend_from_slice(&rec.t.to_le_bytes());
            buf.extend_from_slice(&(rec.raw.len() as u32).to_le_bytes());
            for &(count, sum, sum_sq) in &rec.raw {
                buf.extend_from_slice(&count.to_le_bytes());
                buf.extend_from_slice(&sum.to_le_bytes());
                buf.extend_from_slice(&sum_sq.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path, expected_hash: u64) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        let magic = cur.take(8)?;
        if magic != MAGIC {
            return Err(CheckpointError::Malformed("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Malformed(format!(
                "unsupported version {version}"
            )));
        }
        let config_hash = cur.u64()?;
        if config_hash != expected_hash {
            return Err(CheckpointError::HashMismatch {
                found: config_hash,
                expected: expected_hash,
            });
        }
        let n_records = cur.u32()? as usize;
        let mut records = Vec::with_capacity(n_records);
        for _ in 0..n_records {
            let r = cur.f64()?;
            let t = cur.f64()?;
            let n_theta = cur.u32()? as usize;
            let mut raw = Vec::with_capacity(n_theta);
            for _ in 0..n_theta {
                raw.push((cur.u64()?, cur.f64()?, cur.f64()?));
            }
            records.push(MomentRecord { r, t, raw });
        }
        if cur.pos != bytes.len() {
            return Err(CheckpointError::Malformed("trailing bytes".into()));
        }
        Ok(Checkpoint {
            config_hash,
            records,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Malformed("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            config_hash: 0xabcd,
            records: vec![
                MomentRecord {
                    r: 1.0625,
                    t: 0.5,
                    raw: vec![(10, 3.5, 1.25), (10, 2.0, 0.5)],
                },
                MomentRecord {
                    r: 1.03125,
                    t: 0.5,
                    raw: vec![(10, 4.0, 2.0), (10, 1.0, 0.25)],
                },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("moments.ckpt");
        let ck = sample();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path, 0xabcd).unwrap();
        assert_eq!(back, ck);
        assert!(back.find(1.0625, 0.5).is_some());
        assert!(back.find(1.0625, 0.25).is_none());
    }

    #[test]
    fn hash_mismatch_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("moments.ckpt");
        sample().save(&path).unwrap();
        match Checkpoint::load(&path, 0x1234) {
            Err(CheckpointError::HashMismatch { found, expected }) => {
                assert_eq!(found, 0xabcd);
                assert_eq!(expected, 0x1234);
            }
            other => panic!("expected hash mismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncation_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("moments.ckpt");
        sample().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            Checkpoint::load(&path, 0xabcd),
            Err(CheckpointError::Malformed(_))
        ));
    }
}
