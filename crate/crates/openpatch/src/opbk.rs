//! OPBK binary format.
//!
//! All fields are little-endian and fixed width. A file is a 29-byte header
//! followed by a payload whose shape depends on the record kind.
//!
//! ```text
//! header      magic "OPBK" | version u32 (=1) | record_kind u8 | C u32
//!             | class_count u32 | patch_count u64 | flags u32
//! flags       bit 0: anchor points present, bit 1: global embeddings present
//!
//! kind 0      per sample: sample_id u64 | label i32 (-1 = unknown) | P u32
//! (embedding  | P*C f32 row-major | [P*3 f32 anchors] | [G u32 | G f32]
//!  sets)      class_count = number of distinct known labels
//!
//! kind 1      metadata: n u32 | n * (key_len u32 | key | value_len u32 | value)
//! (unified    per class, ascending id: class_id u32 | n u64
//!  bank)        | n * (sample_id u64 | patch_index u32 | C f32) | [n*3 f32 anchors]
//!             [globals: count u64 | G u32 | count * (sample_id u64 | class_id u32 | G f32)]
//! ```

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use openpatch_core::bank::{BankMetadata, ClassMemoryBank, GlobalBank, GlobalEmbedding, PatchEmbedding};
use openpatch_core::{ClassId, Label, SampleEmbeddingSet, UnifiedBank};

use crate::error::FormatError;

pub const MAGIC: [u8; 4] = *b"OPBK";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 29;
pub const FLAG_ANCHORS: u32 = 1;
pub const FLAG_GLOBALS: u32 = 1 << 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordKind {
    EmbeddingSets = 0,
    UnifiedBank = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpbkHeader {
    pub record_kind: RecordKind,
    pub dim: u32,
    pub class_count: u32,
    pub patch_count: u64,
    pub flags: u32,
}

impl OpbkHeader {
    pub fn has_anchors(&self) -> bool {
        self.flags & FLAG_ANCHORS != 0
    }

    pub fn has_globals(&self) -> bool {
        self.flags & FLAG_GLOBALS != 0
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut buf = [0u8; HEADER_LEN];
        buf[0..4].copy_from_slice(&MAGIC);
        buf[4..8].copy_from_slice(&VERSION.to_le_bytes());
        buf[8] = self.record_kind as u8;
        buf[9..13].copy_from_slice(&self.dim.to_le_bytes());
        buf[13..17].copy_from_slice(&self.class_count.to_le_bytes());
        buf[17..25].copy_from_slice(&self.patch_count.to_le_bytes());
        buf[25..29].copy_from_slice(&self.flags.to_le_bytes());
        w.write_all(&buf)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, FormatError> {
        let mut buf = [0u8; HEADER_LEN];
        r.read_exact(&mut buf).map_err(FormatError::from_read)?;
        let magic: [u8; 4] = buf[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let record_kind = match buf[8] {
            0 => RecordKind::EmbeddingSets,
            1 => RecordKind::UnifiedBank,
            other => return Err(FormatError::invalid(format!("unknown record kind {other}"))),
        };
        let flags = u32::from_le_bytes(buf[25..29].try_into().unwrap());
        if flags & !(FLAG_ANCHORS | FLAG_GLOBALS) != 0 {
            return Err(FormatError::invalid(format!("unknown flag bits {flags:#x}")));
        }
        Ok(Self {
            record_kind,
            dim: u32::from_le_bytes(buf[9..13].try_into().unwrap()),
            class_count: u32::from_le_bytes(buf[13..17].try_into().unwrap()),
            patch_count: u64::from_le_bytes(buf[17..25].try_into().unwrap()),
            flags,
        })
    }
}

struct Input<R> {
    inner: R,
}

impl<R: Read> Input<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(FormatError::from_read)?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        self.bytes().map(u32::from_le_bytes)
    }

    fn i32(&mut self) -> Result<i32, FormatError> {
        self.bytes().map(i32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        self.bytes().map(u64::from_le_bytes)
    }

    fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f32>, FormatError> {
        let mut raw = vec![0u8; n.checked_mul(4).ok_or(FormatError::Overflow(what))?];
        self.inner.read_exact(&mut raw).map_err(FormatError::from_read)?;
        let values: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if !values.iter().all(|v| v.is_finite()) {
            return Err(FormatError::NonFinite(what));
        }
        Ok(values)
    }

    fn string(&mut self) -> Result<String, FormatError> {
        let len = self.u32()? as usize;
        let mut raw = vec![0u8; len];
        self.inner.read_exact(&mut raw).map_err(FormatError::from_read)?;
        String::from_utf8(raw).map_err(|_| FormatError::invalid("metadata is not valid UTF-8"))
    }

    fn expect_eof(&mut self) -> Result<(), FormatError> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(FormatError::TrailingBytes),
        }
    }
}

fn put_f32s<W: Write>(w: &mut W, values: &[f32]) -> io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<(), FormatError> {
    let len = u32::try_from(s.len()).map_err(|_| FormatError::Overflow("metadata string"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn to_u32(n: usize, what: &'static str) -> Result<u32, FormatError> {
    u32::try_from(n).map_err(|_| FormatError::Overflow(what))
}

/// Writes embedding sets. Patch indices must follow row order, since the
/// format stores rows positionally.
pub fn write_embedding_sets_to<W: Write>(sets: &[SampleEmbeddingSet], w: &mut W) -> Result<(), FormatError> {
    let first = sets.first().ok_or(FormatError::NoSamples)?;
    let dim = first.dim();
    let anchors = first.has_anchors();
    let globals = first.global().is_some();
    let mut patch_count: u64 = 0;
    let mut classes = BTreeSet::new();
    for s in sets {
        if s.dim() != dim {
            return Err(FormatError::DimensionMismatch { expected: dim, found: s.dim() });
        }
        if s.has_anchors() != anchors || s.global().is_some() != globals {
            return Err(FormatError::invalid(format!(
                "sample {} disagrees with the first sample on anchors or global embeddings",
                s.sample_id()
            )));
        }
        if let Some((k, p)) = s.patches().iter().enumerate().find(|(k, p)| p.patch_index as usize != *k) {
            return Err(FormatError::invalid(format!(
                "sample {}: patch index {} stored at row {k}",
                s.sample_id(),
                p.patch_index
            )));
        }
        to_u32(s.len(), "patches per sample")?;
        patch_count = patch_count.checked_add(s.len() as u64).ok_or(FormatError::Overflow("patch count"))?;
        if let Some(c) = s.label().known() {
            classes.insert(c);
        }
    }
    let header = OpbkHeader {
        record_kind: RecordKind::EmbeddingSets,
        dim: to_u32(dim, "embedding dimension")?,
        class_count: to_u32(classes.len(), "class count")?,
        patch_count,
        flags: if anchors { FLAG_ANCHORS } else { 0 } | if globals { FLAG_GLOBALS } else { 0 },
    };
    header.write_to(w)?;
    for s in sets {
        w.write_all(&s.sample_id().to_le_bytes())?;
        w.write_all(&s.label().code().to_le_bytes())?;
        w.write_all(&(s.len() as u32).to_le_bytes())?;
        for p in s.patches() {
            put_f32s(w, &p.values)?;
        }
        if anchors {
            for p in s.patches() {
                put_f32s(w, &p.anchor.expect("anchors checked above"))?;
            }
        }
        if let Some(g) = s.global() {
            w.write_all(&to_u32(g.len(), "global embedding length")?.to_le_bytes())?;
            put_f32s(w, g)?;
        }
    }
    Ok(())
}

pub fn read_embedding_sets_from<R: Read>(r: R) -> Result<Vec<SampleEmbeddingSet>, FormatError> {
    let mut input = Input { inner: r };
    let header = OpbkHeader::read_from(&mut input.inner)?;
    if header.record_kind != RecordKind::EmbeddingSets {
        return Err(FormatError::WrongRecordKind { expected: 0, found: header.record_kind as u8 });
    }
    let dim = header.dim as usize;
    if dim == 0 {
        return Err(FormatError::invalid("embedding dimension is zero"));
    }
    if header.patch_count == 0 {
        return Err(FormatError::NoSamples);
    }
    let mut sets = Vec::new();
    let mut seen: u64 = 0;
    let mut classes = BTreeSet::new();
    while seen < header.patch_count {
        let sample_id = input.u64()?;
        let label = Label::from_code(input.i32()?)?;
        let count = input.u32()? as usize;
        seen += count as u64;
        if seen > header.patch_count {
            return Err(FormatError::CountMismatch { what: "patch count", declared: header.patch_count, actual: seen });
        }
        let values = input.f32s(count * dim, "patch embedding")?;
        let mut patches: Vec<PatchEmbedding> = values
            .chunks_exact(dim)
            .enumerate()
            .map(|(k, row)| PatchEmbedding::new(sample_id, k as u32, row.to_vec()))
            .collect();
        if header.has_anchors() {
            let anchors = input.f32s(count * 3, "anchor point")?;
            for (p, a) in patches.iter_mut().zip(anchors.chunks_exact(3)) {
                p.anchor = Some([a[0], a[1], a[2]]);
            }
        }
        let global = if header.has_globals() {
            let g = input.u32()? as usize;
            Some(input.f32s(g, "global embedding")?)
        } else {
            None
        };
        if let Some(c) = label.known() {
            classes.insert(c);
        }
        sets.push(SampleEmbeddingSet::new(sample_id, label, patches, global)?);
    }
    input.expect_eof()?;
    if classes.len() as u64 != u64::from(header.class_count) {
        return Err(FormatError::CountMismatch {
            what: "class count",
            declared: header.class_count.into(),
            actual: classes.len() as u64,
        });
    }
    Ok(sets)
}

pub fn write_embedding_sets(sets: &[SampleEmbeddingSet], path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embedding_sets_to(sets, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_embedding_sets(path: impl AsRef<Path>) -> Result<Vec<SampleEmbeddingSet>, FormatError> {
    read_embedding_sets_from(BufReader::new(File::open(path)?))
}

pub fn write_bank_to<W: Write>(bank: &UnifiedBank, w: &mut W) -> Result<(), FormatError> {
    let anchors = bank.has_anchors();
    let header = OpbkHeader {
        record_kind: RecordKind::UnifiedBank,
        dim: to_u32(bank.dim(), "embedding dimension")?,
        class_count: to_u32(bank.class_count(), "class count")?,
        patch_count: bank.total_patches() as u64,
        flags: if anchors { FLAG_ANCHORS } else { 0 } | if bank.globals().is_some() { FLAG_GLOBALS } else { 0 },
    };
    header.write_to(w)?;
    w.write_all(&to_u32(bank.metadata().len(), "metadata entries")?.to_le_bytes())?;
    for (k, v) in bank.metadata() {
        put_str(w, k)?;
        put_str(w, v)?;
    }
    for class_bank in bank.banks() {
        w.write_all(&class_bank.class_id().0.to_le_bytes())?;
        w.write_all(&(class_bank.len() as u64).to_le_bytes())?;
        for p in class_bank.patches() {
            w.write_all(&p.sample_id.to_le_bytes())?;
            w.write_all(&p.patch_index.to_le_bytes())?;
            put_f32s(w, &p.values)?;
        }
        if anchors {
            for p in class_bank.patches() {
                put_f32s(w, &p.anchor.expect("anchors checked above"))?;
            }
        }
    }
    if let Some(globals) = bank.globals() {
        w.write_all(&(globals.entries().len() as u64).to_le_bytes())?;
        w.write_all(&to_u32(globals.dim(), "global embedding length")?.to_le_bytes())?;
        for e in globals.entries() {
            w.write_all(&e.sample_id.to_le_bytes())?;
            w.write_all(&e.class_id.0.to_le_bytes())?;
            put_f32s(w, &e.values)?;
        }
    }
    Ok(())
}

pub fn read_bank_from<R: Read>(r: R) -> Result<UnifiedBank, FormatError> {
    let mut input = Input { inner: r };
    let header = OpbkHeader::read_from(&mut input.inner)?;
    if header.record_kind != RecordKind::UnifiedBank {
        return Err(FormatError::WrongRecordKind { expected: 1, found: header.record_kind as u8 });
    }
    let dim = header.dim as usize;
    if dim == 0 {
        return Err(FormatError::invalid("embedding dimension is zero"));
    }
    if header.class_count == 0 {
        return Err(FormatError::Core(openpatch_core::Error::Empty("unified bank")));
    }
    let mut metadata = BankMetadata::new();
    for _ in 0..input.u32()? {
        let key = input.string()?;
        let value = input.string()?;
        if metadata.insert(key.clone(), value).is_some() {
            return Err(FormatError::invalid(format!("duplicate metadata key `{key}`")));
        }
    }
    let mut banks = Vec::with_capacity(header.class_count as usize);
    let mut seen: u64 = 0;
    for _ in 0..header.class_count {
        let class_id = ClassId(input.u32()?);
        let n = input.u64()?;
        seen = seen.checked_add(n).ok_or(FormatError::Overflow("patch count"))?;
        if seen > header.patch_count {
            return Err(FormatError::CountMismatch { what: "patch count", declared: header.patch_count, actual: seen });
        }
        let mut patches = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let sample_id = input.u64()?;
            let patch_index = input.u32()?;
            let values = input.f32s(dim, "patch embedding")?;
            patches.push(PatchEmbedding::new(sample_id, patch_index, values));
        }
        if header.has_anchors() {
            let anchors = input.f32s(n as usize * 3, "anchor point")?;
            for (p, a) in patches.iter_mut().zip(anchors.chunks_exact(3)) {
                p.anchor = Some([a[0], a[1], a[2]]);
            }
        }
        banks.push(ClassMemoryBank::new(class_id, patches)?);
    }
    if seen != header.patch_count {
        return Err(FormatError::CountMismatch { what: "patch count", declared: header.patch_count, actual: seen });
    }
    if banks.windows(2).any(|w| w[0].class_id() >= w[1].class_id()) {
        return Err(FormatError::invalid("classes are not stored in ascending id order"));
    }
    let globals = if header.has_globals() {
        let count = input.u64()?;
        let g = input.u32()? as usize;
        let mut entries = Vec::new();
        for _ in 0..count {
            let sample_id = input.u64()?;
            let class_id = ClassId(input.u32()?);
            let values = input.f32s(g, "global embedding")?;
            entries.push(GlobalEmbedding { sample_id, class_id, values });
        }
        Some(GlobalBank::new(entries)?)
    } else {
        None
    };
    input.expect_eof()?;
    Ok(UnifiedBank::new(banks, metadata, globals)?)
}

pub fn write_bank(bank: &UnifiedBank, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bank_to(bank, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_bank(path: impl AsRef<Path>) -> Result<UnifiedBank, FormatError> {
    read_bank_from(BufReader::new(File::open(path)?))
}
