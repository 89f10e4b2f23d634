//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "JTCRCKPT"
//! version  u32      1
//! d, n, m  u64 x 3
//! alpha    f64
//! lambda   f64
//! U        d*n f64, column-major (user 0's vector first)
//! V        d*m f64, column-major
//! users    n x (u32 byte length, UTF-8 id)
//! pois     m x (u32 byte length, UTF-8 id)
//! ```
//!
//! Floats are stored by bit pattern, so a save/load cycle is exact.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Factors, LatentModel};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

const MAGIC: &[u8; 8] = b"JTCRCKPT";
const VERSION: u32 = 1;

/// A trained model together with the id maps it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: LatentModel,
    pub user_ids: Vec<String>,
    pub poi_ids: Vec<String>,
}

impl Checkpoint {
    pub fn new(model: LatentModel, user_ids: Vec<String>, poi_ids: Vec<String>) -> Result<Self> {
        if user_ids.len() != model.n_users() || poi_ids.len() != model.n_pois() {
            return Err(Error::Checkpoint(format!(
                "id maps ({} users, {} POIs) do not match model ({} x {})",
                user_ids.len(),
                poi_ids.len(),
                model.n_users(),
                model.n_pois()
            )));
        }
        Ok(Checkpoint {
            model,
            user_ids,
            poi_ids,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let mut out = Vec::with_capacity(64 + 8 * (m.u().as_slice().len() + m.v().as_slice().len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for x in [m.d(), m.n_users(), m.n_pois()] {
            out.extend_from_slice(&(x as u64).to_le_bytes());
        }
        out.extend_from_slice(&m.alpha().to_bits().to_le_bytes());
        out.extend_from_slice(&m.lambda().to_bits().to_le_bytes());
        for x in m.u().as_slice().iter().chain(m.v().as_slice()) {
            out.extend_from_slice(&x.to_bits().to_le_bytes());
        }
        for id in self.user_ids.iter().chain(&self.poi_ids) {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let d = r.len()?;
        let n = r.len()?;
        let m = r.len()?;
        let alpha = r.f64()?;
        let lambda = r.f64()?;
        let floats = |r: &mut Reader, count: usize| -> Result<Vec<f64>> { (0..count).map(|_| r.f64()).collect() };
        let u = floats(&mut r, d.checked_mul(n).ok_or_else(overflow)?)?;
        let v = floats(&mut r, d.checked_mul(m).ok_or_else(overflow)?)?;
        let user_ids = (0..n).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let poi_ids = (0..m).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let model = LatentModel::new(
            Factors::from_column_major(d, n, u),
            Factors::from_column_major(d, m, v),
            alpha,
            lambda,
        )
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Checkpoint::new(model, user_ids, poi_ids)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    /// Check that this checkpoint indexes users and POIs exactly like `ds`.
    pub fn check_compatible(&self, ds: &crate::data::Dataset) -> Result<()> {
        if self.user_ids.len() != ds.n_users() {
            return Err(Error::Incompatible(format!(
                "checkpoint has {} users, dataset has {}",
                self.user_ids.len(),
                ds.n_users()
            )));
        }
        if self.poi_ids.len() != ds.n_pois() {
            return Err(Error::Incompatible(format!(
                "checkpoint has {} POIs, dataset has {}",
                self.poi_ids.len(),
                ds.n_pois()
            )));
        }
        if let Some(i) = (0..ds.n_users()).find(|&i| self.user_ids[i] != ds.user_id(i)) {
            return Err(Error::Incompatible(format!(
                "user index {i} is {:?} in checkpoint but {:?} in dataset",
                self.user_ids[i],
                ds.user_id(i)
            )));
        }
        if let Some(j) = (0..ds.n_pois()).find(|&j| self.poi_ids[j] != ds.poi(j).id) {
            return Err(Error::Incompatible(format!(
                "POI index {j} is {:?} in checkpoint but {:?} in dataset",
                self.poi_ids[j],
                ds.poi(j).id
            )));
        }
        Ok(())
    }
}

fn overflow() -> Error {
    Error::Checkpoint("dimension overflow".into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Checkpoint(format!("truncated at byte {}", self.pos))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let x = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(x).map_err(|_| overflow())
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"))))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("id is not UTF-8".into()))
    }
}
