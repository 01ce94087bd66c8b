//! PADACT01 binary activation dump.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header:
//!   magic       8 bytes  "PADACT01"
//!   name_len    u16
//!   layer_name  name_len bytes, UTF-8
//!   n_samples   u64
//!   n_classes   u32
//!   n_units     u32
//!   flags       u8       bit0 ground truth, bit1 softmax, bit2 prediction
//! per record, in sample order:
//!   ground_truth u32               if bit0
//!   prediction   u32               if bit2
//!   softmax      f32 x n_classes   if bit1
//!   activations  f32 x n_units
//! ```
//!
//! Sample ids are implicit: record `i` has id `i`.

use std::io::{Read, Write};

use super::{FormatError, FormatResult};
use crate::activation_model::{ActivationRecord, ActivationSet};

pub const PADACT_MAGIC: &[u8; 8] = b"PADACT01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub has_ground_truth: bool,
    pub has_softmax: bool,
    pub has_prediction: bool,
}

impl Flags {
    const GROUND_TRUTH: u8 = 1 << 0;
    const SOFTMAX: u8 = 1 << 1;
    const PREDICTION: u8 = 1 << 2;

    pub fn to_byte(self) -> u8 {
        (self.has_ground_truth as u8 * Self::GROUND_TRUTH)
            | (self.has_softmax as u8 * Self::SOFTMAX)
            | (self.has_prediction as u8 * Self::PREDICTION)
    }

    pub fn from_byte(b: u8) -> FormatResult<Self> {
        if b & !0b111 != 0 {
            return Err(FormatError::FlagMismatch(format!(
                "reserved flag bits set in {b:#010b}"
            )));
        }
        Ok(Self {
            has_ground_truth: b & Self::GROUND_TRUTH != 0,
            has_softmax: b & Self::SOFTMAX != 0,
            has_prediction: b & Self::PREDICTION != 0,
        })
    }

    /// Flags describing `set`; errors if field presence differs between records.
    pub fn of_set(set: &ActivationSet) -> FormatResult<Self> {
        let Some(first) = set.records().first() else {
            return Ok(Self {
                has_ground_truth: true,
                has_softmax: true,
                has_prediction: true,
            });
        };
        let flags = Self::of_record(first);
        if let Some(r) = set.records().iter().find(|r| Self::of_record(r) != flags) {
            return Err(FormatError::FlagMismatch(format!(
                "record {} carries different optional fields than record {}",
                r.sample_id, first.sample_id
            )));
        }
        Ok(flags)
    }

    fn of_record(r: &ActivationRecord) -> Self {
        Self {
            has_ground_truth: r.ground_truth.is_some(),
            has_softmax: r.softmax.is_some(),
            has_prediction: r.predicted.is_some(),
        }
    }

    fn record_bytes(self, n_classes: usize, n_units: usize) -> Option<usize> {
        let mut n = n_units.checked_mul(4)?;
        if self.has_ground_truth {
            n += 4;
        }
        if self.has_prediction {
            n += 4;
        }
        if self.has_softmax {
            n = n.checked_add(n_classes.checked_mul(4)?)?;
        }
        Some(n)
    }
}

pub fn write_padact<W: Write>(mut w: W, set: &ActivationSet) -> FormatResult<()> {
    let flags = Flags::of_set(set)?;
    if let Some((position, r)) = set
        .records()
        .iter()
        .enumerate()
        .find(|(i, r)| r.sample_id != *i as u64)
    {
        return Err(FormatError::NonPositionalIds {
            position,
            sample_id: r.sample_id,
        });
    }
    let name = set.layer_name().as_bytes();
    let name_len = u16::try_from(name.len())
        .map_err(|_| FormatError::SchemaError(format!("layer name is {} bytes, max 65535", name.len())))?;
    let n_classes = u32::try_from(set.n_classes())
        .map_err(|_| FormatError::SchemaError("n_classes exceeds u32".into()))?;
    let n_units = u32::try_from(set.n_units())
        .map_err(|_| FormatError::SchemaError("n_units exceeds u32".into()))?;

    let mut buf = Vec::with_capacity(
        27 + name.len() + set.len() * flags.record_bytes(set.n_classes(), set.n_units()).unwrap_or(0),
    );
    buf.extend_from_slice(PADACT_MAGIC);
    buf.extend_from_slice(&name_len.to_le_bytes());
    buf.extend_from_slice(name);
    buf.extend_from_slice(&(set.len() as u64).to_le_bytes());
    buf.extend_from_slice(&n_classes.to_le_bytes());
    buf.extend_from_slice(&n_units.to_le_bytes());
    buf.push(flags.to_byte());
    for r in set.records() {
        if let Some(gt) = r.ground_truth {
            buf.extend_from_slice(&(gt as u32).to_le_bytes());
        }
        if let Some(p) = r.predicted {
            buf.extend_from_slice(&(p as u32).to_le_bytes());
        }
        if let Some(s) = &r.softmax {
            s.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        }
        r.activations
            .iter()
            .for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> FormatResult<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if remaining < n {
            return Err(FormatError::TruncatedFile {
                offset: self.pos,
                needed: n - remaining,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> FormatResult<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> FormatResult<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn f32s(&mut self, n: usize) -> FormatResult<Vec<f32>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect())
    }

    fn class_index(&mut self, n_classes: usize, what: &str) -> FormatResult<usize> {
        let v = self.u32()? as usize;
        if v >= n_classes {
            return Err(FormatError::ShapeMismatch(format!(
                "{what} {v} out of range for {n_classes} classes"
            )));
        }
        Ok(v)
    }
}

pub fn read_padact<R: Read>(mut r: R) -> FormatResult<ActivationSet> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };

    let magic: [u8; 8] = c.array()?;
    if &magic != PADACT_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let name_len = u16::from_le_bytes(c.array()?) as usize;
    let layer_name = std::str::from_utf8(c.take(name_len)?)
        .map_err(|e| FormatError::SchemaError(format!("layer name is not UTF-8: {e}")))?
        .to_string();
    let n_samples = u64::from_le_bytes(c.array()?);
    let n_classes = c.u32()? as usize;
    let n_units = c.u32()? as usize;
    let flags = Flags::from_byte(c.array::<1>()?[0])?;

    let payload = flags
        .record_bytes(n_classes, n_units)
        .and_then(|per| per.checked_mul(usize::try_from(n_samples).ok()?))
        .ok_or_else(|| FormatError::ShapeMismatch("declared payload size overflows".into()))?;
    let remaining = bytes.len() - c.pos;
    if remaining < payload {
        return Err(FormatError::TruncatedFile {
            offset: bytes.len(),
            needed: payload - remaining,
        });
    }
    if remaining > payload {
        return Err(FormatError::ShapeMismatch(format!(
            "{} trailing bytes after {n_samples} records",
            remaining - payload
        )));
    }

    let mut records = Vec::with_capacity(n_samples as usize);
    for sample_id in 0..n_samples {
        let ground_truth = if flags.has_ground_truth {
            Some(c.class_index(n_classes, "ground truth")?)
        } else {
            None
        };
        let predicted = if flags.has_prediction {
            Some(c.class_index(n_classes, "prediction")?)
        } else {
            None
        };
        let softmax = if flags.has_softmax {
            Some(c.f32s(n_classes)?)
        } else {
            None
        };
        let activations = c.f32s(n_units)?;
        records.push(ActivationRecord {
            sample_id,
            activations,
            softmax,
            predicted,
            ground_truth,
        });
    }
    Ok(ActivationSet::new(layer_name, n_units, n_classes, records)?)
}
