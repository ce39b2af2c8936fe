//! HGF field files.
//!
//! Layout: the magic `HGF1`, a `u32` little-endian header length, a JSON
//! header, then every node value as a little-endian `f64`, `it` fastest,
//! then `iy`, then `ix`.

use std::path::Path;
use std::sync::Arc;

use heisgs::{Domain, Error, Field, Grid, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::output::write_atomic;

pub const MAGIC: &[u8; 4] = b"HGF1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HgfHeader {
    /// Dimension of the group, `H^n`.
    pub n: usize,
    pub extents: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    /// Gauge radius of the Dirichlet ball; `null` for a full box.
    pub ball_radius: Option<f64>,
    pub p: Option<f64>,
    pub metadata: Map<String, Value>,
}

#[derive(Clone, Debug)]
pub struct HgfFile {
    pub header: HgfHeader,
    pub field: Field,
}

impl HgfFile {
    pub fn new(field: Field, p: Option<f64>, metadata: Map<String, Value>) -> Self {
        let g = field.grid();
        let header = HgfHeader {
            n: 1,
            extents: g.extents,
            spacing: g.spacing,
            origin: g.origin,
            ball_radius: field.domain().ball_radius(),
            p,
            metadata,
        };
        HgfFile { header, field }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let head = serde_json::to_vec(&self.header)?;
        let len = u32::try_from(head.len()).map_err(|_| Error::Format("header too long".into()))?;
        let values = self.field.values();
        let mut out = Vec::with_capacity(8 + head.len() + 8 * values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&head);
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("missing HGF1 magic"));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let body = 8usize
            .checked_add(len)
            .filter(|e| *e <= bytes.len())
            .ok_or_else(|| bad("header runs past the end of the file"))?;
        let header: HgfHeader = serde_json::from_slice(&bytes[8..body])
            .map_err(|e| Error::Format(format!("header: {e}")))?;
        if header.n != 1 {
            return Err(Error::Format(format!(
                "only H^1 fields are supported, got n = {}",
                header.n
            )));
        }
        let grid = Grid::new(header.extents, header.spacing, header.origin)?;
        let count = grid.len();
        let payload = &bytes[body..];
        if Some(payload.len()) != count.checked_mul(8) {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected 8 x {count}",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let domain: Arc<Domain<f64>> = match header.ball_radius {
            Some(k) => Domain::ball(grid, k)?,
            None => Domain::full(grid),
        };
        let field = Field::from_values(domain, values)?;
        Ok(HgfFile { header, field })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        HgfFile::decode(&std::fs::read(path)?)
    }
}
