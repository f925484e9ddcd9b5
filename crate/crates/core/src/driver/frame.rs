//! Field snapshots on disk.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TKWF2D01";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrame {
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    /// xmin, xmax, ymin, ymax
    pub bounds: [f64; 4],
    /// Row-major, x fastest.
    pub values: Vec<f64>,
    /// (local, near, far) when evaluated separately.
    pub components: Option<[Vec<f64>; 3]>,
}

impl FieldFrame {
    pub fn new(t: f64, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::InvalidInput(format!(
                "{} values for a {nx}×{ny} frame",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite field value at t = {t}")));
        }
        Ok(Self {
            t,
            nx,
            ny,
            bounds: [-1.0, 1.0, -1.0, 1.0],
            values,
            components: None,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56 + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.nx as u32).to_le_bytes());
        out.extend_from_slice(&(self.ny as u32).to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        for b in self.bounds {
            out.extend_from_slice(&b.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("field file: {m}"));
        if bytes.len() < 56 || &bytes[..8] != MAGIC {
            return Err(bad("missing TKWF2D01 header"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let (nx, ny) = (u32_at(8), u32_at(12));
        let t = f64_at(16);
        let bounds = [f64_at(24), f64_at(32), f64_at(40), f64_at(48)];
        if bytes.len() != 56 + 8 * nx * ny {
            return Err(bad(&format!("{} bytes for a {nx}×{ny} frame", bytes.len())));
        }
        let values = (0..nx * ny).map(|i| f64_at(56 + 8 * i)).collect();
        Ok(Self {
            t,
            nx,
            ny,
            bounds,
            values,
            components: None,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    /// `x,y,u` lines (plus local, near, far columns when present) for the given points.
    pub fn to_csv(&self, points: &[[f64; 2]]) -> Result<String> {
        if points.len() != self.values.len() {
            return Err(Error::InvalidInput("point count differs from the frame size".into()));
        }
        let mut s = String::from(if self.components.is_some() { "x,y,u,u_local,u_near,u_far\n" } else { "x,y,u\n" });
        for (i, p) in points.iter().enumerate() {
            s.push_str(&format!("{:e},{:e},{:e}", p[0], p[1], self.values[i]));
            if let Some([l, n, f]) = &self.components {
                s.push_str(&format!(",{:e},{:e},{:e}", l[i], n[i], f[i]));
            }
            s.push('\n');
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let f = FieldFrame::new(2.5, 3, 2, vec![1.0, -2.0, 3.5, 0.0, 1e-300, 7.0]).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(&bytes[..8], b"TKWF2D01");
        assert_eq!(bytes.len(), 56 + 48);
        assert_eq!(FieldFrame::from_bytes(&bytes).unwrap(), f);
        assert!(FieldFrame::from_bytes(&bytes[..60]).is_err());
        assert!(FieldFrame::new(0.0, 1, 1, vec![f64::NAN]).is_err());
    }
}
