//! FDX: the binary interchange format for distance tensors.
//!
//! Version 1 layout, all integers little-endian, values IEEE-754 binary32 LE:
//!
//! ```text
//! header:  "FDX1" | u32 L | L x [u16 name_len, name, u32 channel_count] | u64 R
//! record:  u16 set_id_len, set_id | u16 image_id_len, image_id | sum(channel_count) x f32
//! ```
//!
//! Records are written in lexicographic `(set_id, image_id)` order, so writing
//! the same archive twice yields identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{ArchiveFault, Error, Result};
use crate::model::{DistanceTensor, LayerSchema, LayerSpec};

pub const MAGIC: &[u8; 4] = b"FDX1";

pub type RecordKey = (String, String);

/// A schema plus one tensor per `(set_id, image_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceArchive {
    schema: LayerSchema,
    records: BTreeMap<RecordKey, DistanceTensor>,
}

impl DistanceArchive {
    pub fn new(schema: LayerSchema) -> Self {
        Self {
            schema,
            records: BTreeMap::new(),
        }
    }

    pub fn schema(&self) -> &LayerSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, tensor: DistanceTensor) -> Result<()> {
        self.schema.check_conformance(tensor.values())?;
        let key = (tensor.set_id.clone(), tensor.image_id.clone());
        if self.records.contains_key(&key) {
            return Err(Error::Validation(format!(
                "duplicate archive key ({}, {})",
                key.0, key.1
            )));
        }
        self.records.insert(key, tensor);
        Ok(())
    }

    pub fn get(&self, set_id: &str, image_id: &str) -> Option<&DistanceTensor> {
        // BTreeMap<(String, String), _> cannot be queried with borrowed pairs.
        self.records.get(&(set_id.to_owned(), image_id.to_owned()))
    }

    pub fn require(&self, set_id: &str, image_id: &str) -> Result<&DistanceTensor> {
        self.get(set_id, image_id).ok_or_else(|| Error::MissingTensor {
            set_id: set_id.to_owned(),
            image_id: image_id.to_owned(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &DistanceTensor> {
        self.records.values()
    }

    pub fn header_size(&self) -> usize {
        4 + 4 + self.schema.layers().iter().map(|l| 2 + l.name.len() + 4).sum::<usize>() + 8
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let record_floats = self.schema.parameter_count();
        let mut out = Vec::with_capacity(self.header_size() + self.records.len() * (record_floats * 4 + 32));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.schema.layer_count() as u32).to_le_bytes());
        for layer in self.schema.layers() {
            put_str(&mut out, &layer.name)?;
            let cc = u32::try_from(layer.channel_count)
                .map_err(|_| Error::Validation(format!("layer `{}` has too many channels", layer.name)))?;
            out.extend_from_slice(&cc.to_le_bytes());
        }
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for t in self.records.values() {
            put_str(&mut out, &t.set_id)?;
            put_str(&mut out, &t.image_id)?;
            for v in t.values().iter().flatten() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(r.fault_at(0, ArchiveFault::BadMagic));
        }
        let layer_count = r.u32()? as usize;
        let mut specs = Vec::with_capacity(layer_count.min(1024));
        for _ in 0..layer_count {
            let name = r.string()?;
            let channel_count = r.u32()? as usize;
            specs.push(LayerSpec { name, channel_count });
        }
        let schema_end = r.pos as u64;
        let schema = LayerSchema::new(specs).map_err(|e| Error::Archive {
            offset: schema_end,
            fault: ArchiveFault::InvalidSchema(e.to_string()),
        })?;
        let record_count = r.u64()?;
        let mut archive = DistanceArchive::new(schema);
        let counts: Vec<usize> = archive.schema.layers().iter().map(|l| l.channel_count).collect();
        for _ in 0..record_count {
            let start = r.pos as u64;
            let set_id = r.string()?;
            let image_id = r.string()?;
            let mut values = Vec::with_capacity(counts.len());
            for &c in &counts {
                let mut layer = Vec::with_capacity(c);
                for _ in 0..c {
                    let at = r.pos as u64;
                    let v = f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
                    if !v.is_finite() {
                        return Err(Error::Archive { offset: at, fault: ArchiveFault::NonFiniteValue });
                    }
                    if v < 0.0 {
                        return Err(Error::Archive { offset: at, fault: ArchiveFault::NegativeValue });
                    }
                    layer.push(v);
                }
                values.push(layer);
            }
            let key = (set_id, image_id);
            if archive.records.contains_key(&key) {
                return Err(Error::Archive {
                    offset: start,
                    fault: ArchiveFault::DuplicateKey(key.0, key.1),
                });
            }
            let tensor = DistanceTensor::new(key.0.clone(), key.1.clone(), values)?;
            archive.records.insert(key, tensor);
        }
        if r.pos != bytes.len() {
            return Err(r.fault_at(r.pos as u64, ArchiveFault::TrailingBytes));
        }
        Ok(archive)
    }
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<DistanceArchive> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    DistanceArchive::from_bytes(&bytes)
}

pub fn write_archive(archive: &DistanceArchive, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, archive.to_bytes()?).map_err(|e| Error::io(path, e))
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::Validation(format!("id `{}...` exceeds 65535 bytes", &s[..16.min(s.len())])))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fault_at(&self, offset: u64, fault: ArchiveFault) -> Error {
        Error::Archive { offset, fault }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fault_at(self.pos as u64, ArchiveFault::Truncated));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let at = self.pos as u64;
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.fault_at(at, ArchiveFault::InvalidUtf8))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn sample(records: usize, seed: u64) -> DistanceArchive {
        let schema = LayerSchema::new(vec![
            LayerSpec { name: "conv1".into(), channel_count: 3 },
            LayerSpec { name: "conv2".into(), channel_count: 5 },
        ])
        .unwrap();
        let mut rng = SplitMix64::new(seed);
        let mut a = DistanceArchive::new(schema);
        for i in 0..records {
            let values = vec![
                (0..3).map(|_| rng.next_f64() as f32).collect(),
                (0..5).map(|_| rng.next_f64() as f32).collect(),
            ];
            a.insert(DistanceTensor::new(format!("s{}", i % 4), format!("img{i}"), values).unwrap())
                .unwrap();
        }
        a
    }

    #[test]
    fn round_trip() {
        let a = sample(17, 1);
        assert_eq!(DistanceArchive::from_bytes(&a.to_bytes().unwrap()).unwrap(), a);
    }

    #[test]
    fn empty_archive_is_header_only() {
        let a = sample(0, 1);
        let bytes = a.to_bytes().unwrap();
        // magic + L + 2 x (u16 + name + u32) + R
        assert_eq!(bytes.len(), 4 + 4 + (2 + 5 + 4) * 2 + 8);
        assert_eq!(bytes.len(), a.header_size());
        assert!(DistanceArchive::from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn deterministic_bytes() {
        let a = sample(9, 4);
        assert_eq!(a.to_bytes().unwrap(), a.clone().to_bytes().unwrap());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = sample(2, 1).to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            DistanceArchive::from_bytes(&bytes),
            Err(Error::Archive { offset: 0, fault: ArchiveFault::BadMagic })
        ));
    }

    #[test]
    fn truncated_reports_offset() {
        let bytes = sample(3, 1).to_bytes().unwrap();
        let cut = &bytes[..bytes.len() - 2];
        match DistanceArchive::from_bytes(cut) {
            Err(Error::Archive { offset, fault: ArchiveFault::Truncated }) => {
                assert_eq!(offset as usize, bytes.len() - 4)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_value_rejected() {
        let a = sample(1, 1);
        let mut bytes = a.to_bytes().unwrap();
        let last = bytes.len() - 4;
        bytes[last..].copy_from_slice(&(-0.5f32).to_le_bytes());
        assert!(matches!(
            DistanceArchive::from_bytes(&bytes),
            Err(Error::Archive { fault: ArchiveFault::NegativeValue, .. })
        ));
    }

    #[test]
    fn duplicate_key_rejected() {
        let a = sample(1, 1);
        let bytes = a.to_bytes().unwrap();
        let header = a.header_size();
        let record = bytes[header..].to_vec();
        let mut doubled = bytes.clone();
        doubled[header - 8..header].copy_from_slice(&2u64.to_le_bytes());
        doubled.extend_from_slice(&record);
        match DistanceArchive::from_bytes(&doubled) {
            Err(Error::Archive { offset, fault: ArchiveFault::DuplicateKey(..) }) => {
                assert_eq!(offset as usize, bytes.len())
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = sample(2, 1).to_bytes().unwrap();
        bytes.push(0);
        assert!(DistanceArchive::from_bytes(&bytes).is_err());
    }

    #[test]
    fn size_follows_header() {
        let a = sample(11, 2);
        let bytes = a.to_bytes().unwrap();
        let ids: usize = a.iter().map(|t| 4 + t.set_id.len() + t.image_id.len()).sum();
        assert_eq!(bytes.len(), a.header_size() + ids + 11 * 8 * 4);
    }

    #[test]
    fn insert_rejects_nonconforming() {
        let mut a = sample(0, 1);
        let t = DistanceTensor::new("s", "i", vec![vec![0.0; 3]]).unwrap();
        assert!(a.insert(t).is_err());
    }
}
