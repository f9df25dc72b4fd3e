//! Binary snapshot of a field (and reservoir): magic `PLSIM1`, a
//! little-endian `u32` header length, a JSON header, then raw
//! little-endian `f64` values (`re, im` per point for `u`, then `n`).

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use plsim_core::grid::{Field, Grid1D, RealField, Representation};
use plsim_core::Complex64;
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 6] = b"PLSIM1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format_version: u32,
    pub config_hash: String,
    pub time: f64,
    pub n_points: usize,
    pub length: f64,
    pub has_reservoir: bool,
    /// Payload size in bytes.
    pub payload_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub u: Field,
    pub n: Option<RealField>,
}

fn payload_len(n_points: usize, has_reservoir: bool) -> usize {
    8 * n_points * if has_reservoir { 3 } else { 2 }
}

impl Checkpoint {
    pub fn new(config_hash: &str, time: f64, u: &Field, n: Option<&RealField>) -> Self {
        let u = u.to_physical();
        let grid = u.grid();
        Self {
            header: Header {
                format_version: FORMAT_VERSION,
                config_hash: config_hash.to_string(),
                time,
                n_points: grid.n_points(),
                length: grid.length(),
                has_reservoir: n.is_some(),
                payload_len: payload_len(grid.n_points(), n.is_some()),
            },
            n: n.cloned(),
            u,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(10 + header.len() + self.header.payload_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.u.values() {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        if let Some(n) = &self.n {
            for v in n.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        ensure!(bytes.len() >= 10 && &bytes[..6] == MAGIC, "not a checkpoint: bad magic bytes");
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let body = &bytes[10..];
        ensure!(body.len() >= header_len, "truncated checkpoint header");
        let header: Header =
            serde_json::from_slice(&body[..header_len]).context("malformed checkpoint header")?;
        if header.format_version != FORMAT_VERSION {
            bail!("unsupported checkpoint format version {}", header.format_version);
        }
        let expected = payload_len(header.n_points, header.has_reservoir);
        ensure!(
            header.payload_len == expected,
            "header payload length {} inconsistent with {} points (expected {expected})",
            header.payload_len,
            header.n_points
        );
        let payload = &body[header_len..];
        ensure!(
            payload.len() == header.payload_len,
            "payload is {} bytes, header says {}",
            payload.len(),
            header.payload_len
        );
        let grid = Grid1D::new(header.n_points, header.length)?;
        let mut floats = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let u: Vec<Complex64> = (0..header.n_points)
            .map(|_| Complex64::new(floats.next().unwrap(), floats.next().unwrap()))
            .collect();
        let u = Field::new(&grid, u, Representation::Physical)?;
        let n = if header.has_reservoir {
            Some(RealField::new(&grid, floats.collect())?)
        } else {
            None
        };
        Ok(Self { header, u, n })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())
            .with_context(|| format!("writing checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("checkpoint {}", path.display()))
    }

    /// Reject a checkpoint produced by a different configuration.
    pub fn verify_hash(&self, config_hash: &str) -> Result<()> {
        ensure!(
            self.header.config_hash == config_hash,
            "checkpoint was written by configuration {}, not {config_hash}",
            self.header.config_hash
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(reservoir: bool) -> Checkpoint {
        let grid = Grid1D::new(16, 3.0).unwrap();
        let u = Field::from_fn(&grid, |x| Complex64::new(x.sin(), 0.1 * x));
        let n = RealField::from_fn(&grid, |x| x * x);
        Checkpoint::new("abc", 1.25, &u, reservoir.then_some(&n))
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for reservoir in [false, true] {
            let c = sample(reservoir);
            let bytes = c.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample(true).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 8]);
        assert!(Checkpoint::from_bytes(&long).is_err());

        let mut forged = bytes.clone();
        let pos = forged.windows(4).position(|w| w == b"true").unwrap();
        forged.splice(pos..pos + 4, *b"null");
        assert!(Checkpoint::from_bytes(&forged).is_err());
        // header claims no reservoir: declared payload length no longer fits
        let c = sample(true);
        let header = Header {
            has_reservoir: false,
            ..c.header.clone()
        };
        let json = serde_json::to_vec(&header).unwrap();
        let mut forged = MAGIC.to_vec();
        forged.extend_from_slice(&(json.len() as u32).to_le_bytes());
        forged.extend_from_slice(&json);
        forged.extend_from_slice(&bytes[bytes.len() - c.header.payload_len..]);
        let err = Checkpoint::from_bytes(&forged).unwrap_err().to_string();
        assert!(err.contains("inconsistent"), "{err}");
    }

    #[test]
    fn hash_mismatch_is_reported() {
        let c = sample(false);
        assert!(c.verify_hash("abc").is_ok());
        assert!(c.verify_hash("abd").is_err());
    }
}
