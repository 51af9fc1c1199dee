//! CSV and binary dataset files.
//!
//! CSV: header `label,f0,...,f{D-1}`, one sample per row. An optional
//! trailing `source` column carries provenance tags.
//!
//! Binary: magic `RBML1`, little-endian `u64` N, D, K, then K names each
//! prefixed by a `u64` byte length, N `u32` labels and N×D `f64` features in
//! row-major order. When any row carries a nonzero source tag, a trailer of
//! `TAGS` followed by N tag bytes is appended.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::FeatureDataset;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 5] = b"RBML1";
const TAG_TRAILER: &[u8; 4] = b"TAGS";
const SOURCE_COLUMN: &str = "source";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Binary,
}

impl FileFormat {
    /// `.csv` selects CSV; anything else is treated as binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Binary,
        }
    }
}

/// Reads a label-map sidecar: one class name per line, blank lines ignored.
pub fn read_label_map(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let names: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect();
    if names.is_empty() {
        return Err(Error::Format(format!("label map {} is empty", path.display())));
    }
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::Format(format!("label map repeats {n:?}")));
        }
    }
    Ok(names)
}

pub fn load_features(
    path: &Path,
    format: FileFormat,
    label_map: Option<&[String]>,
) -> Result<FeatureDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        FileFormat::Csv => read_csv(reader, label_map),
        FileFormat::Binary => {
            let ds = read_binary(reader)?;
            match label_map {
                Some(map) => remap_classes(&ds, map),
                None => Ok(ds),
            }
        }
    }
}

/// Writes atomically: the file appears complete or not at all.
pub fn save_features(ds: &FeatureDataset, path: &Path, format: FileFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        FileFormat::Csv => write_csv(ds, &mut buf)?,
        FileFormat::Binary => write_binary(ds, &mut buf).map_err(|e| Error::io(path, e))?,
    }
    crate::persist::write_atomic(path, &buf)
}

pub fn read_csv<R: Read>(reader: R, label_map: Option<&[String]>) -> Result<FeatureDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Format("empty file".into()));
    }
    let has_source = header.len() >= 3 && &header[header.len() - 1] == SOURCE_COLUMN;
    let width = header.len();
    let n_features = width - 1 - usize::from(has_source);
    if n_features == 0 {
        return Err(Error::Format("header declares no feature columns".into()));
    }

    let mut names: Vec<String> = label_map.map(<[String]>::to_vec).unwrap_or_default();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut tags = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let line = i + 2;
        if record.len() != width {
            return Err(Error::Format(format!(
                "line {line}: {} fields, header has {width}",
                record.len()
            )));
        }
        let label = &record[0];
        let idx = match names.iter().position(|n| n == label) {
            Some(idx) => idx,
            None if label_map.is_some() => {
                return Err(Error::Format(format!(
                    "line {line}: label {label:?} not in label map"
                )))
            }
            None => {
                names.push(label.to_owned());
                names.len() - 1
            }
        };
        labels.push(idx);
        for field in record.iter().skip(1).take(n_features) {
            let v: f64 = field.parse().map_err(|_| {
                Error::Format(format!("line {line}: non-numeric feature {field:?}"))
            })?;
            features.push(v);
        }
        if has_source {
            let tag: u8 = record[width - 1].parse().map_err(|_| {
                Error::Format(format!("line {line}: bad source tag {:?}", &record[width - 1]))
            })?;
            tags.push(tag);
        } else {
            tags.push(0);
        }
    }
    if labels.is_empty() {
        return Err(Error::Format("empty file".into()));
    }
    FeatureDataset::with_source_tags(features, n_features, labels, names, tags)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn write_csv<W: Write>(ds: &FeatureDataset, writer: W) -> Result<()> {
    let with_source = ds.source_tags().iter().any(|&t| t != 0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(ds.n_features() + 2);
    header.push("label".to_owned());
    header.extend((0..ds.n_features()).map(|j| format!("f{j}")));
    if with_source {
        header.push(SOURCE_COLUMN.to_owned());
    }
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(header.len());
    for (i, row) in ds.rows().enumerate() {
        record.clear();
        record.push(ds.class_names()[ds.label(i)].clone());
        // `Display` for f64 prints the shortest string that parses back exactly.
        record.extend(row.iter().map(|v| v.to_string()));
        if with_source {
            record.push(ds.source_tags()[i].to_string());
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn write_binary<W: Write>(ds: &FeatureDataset, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(ds.n_rows() as u64).to_le_bytes())?;
    w.write_all(&(ds.n_features() as u64).to_le_bytes())?;
    w.write_all(&(ds.n_classes() as u64).to_le_bytes())?;
    for name in ds.class_names() {
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    for &l in ds.labels() {
        w.write_all(&(l as u32).to_le_bytes())?;
    }
    for v in ds.features() {
        w.write_all(&v.to_le_bytes())?;
    }
    if ds.source_tags().iter().any(|&t| t != 0) {
        w.write_all(TAG_TRAILER)?;
        w.write_all(ds.source_tags())?;
    }
    w.flush()
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn checked_len(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} {v} too large")))
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<FeatureDataset> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(e.to_string()))?;
    if bytes.is_empty() {
        return Err(Error::Format("empty file".into()));
    }
    let mut cur = ByteCursor { bytes: &bytes, pos: 0 };
    if cur.take(BINARY_MAGIC.len(), "magic")? != BINARY_MAGIC {
        return Err(Error::Format("bad magic, not an RBML1 file".into()));
    }
    let n = checked_len(cur.u64("row count")?, "row count")?;
    let d = checked_len(cur.u64("feature dimension")?, "feature dimension")?;
    let k = checked_len(cur.u64("class count")?, "class count")?;
    if n == 0 {
        return Err(Error::Format("empty file".into()));
    }
    // Bound allocations by what the file can actually hold.
    if k > cur.remaining() / 8 || n > cur.remaining() / 4 {
        return Err(Error::Format("truncated header counts".into()));
    }
    let mut names = Vec::with_capacity(k);
    for _ in 0..k {
        let len = checked_len(cur.u64("name length")?, "name length")?;
        let raw = cur.take(len, "class name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::Format("class name is not UTF-8".into()))?;
        names.push(name.to_owned());
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let b = cur.take(4, "labels")?;
        labels.push(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize);
    }
    let n_values = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format("feature block too large".into()))?;
    let block = cur.take(
        n_values
            .checked_mul(8)
            .ok_or_else(|| Error::Format("feature block too large".into()))?,
        "features",
    )?;
    let features: Vec<f64> = block
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let tags = if cur.remaining() == 0 {
        vec![0; n]
    } else {
        if cur.take(TAG_TRAILER.len(), "tag trailer")? != TAG_TRAILER {
            return Err(Error::Format("unexpected trailing bytes".into()));
        }
        let t = cur.take(n, "source tags")?.to_vec();
        if cur.remaining() != 0 {
            return Err(Error::Format("unexpected trailing bytes".into()));
        }
        t
    };
    FeatureDataset::with_source_tags(features, d, labels, names, tags)
        .map_err(|e| Error::Format(e.to_string()))
}

/// Re-indexes labels so class order follows `map`.
fn remap_classes(ds: &FeatureDataset, map: &[String]) -> Result<FeatureDataset> {
    let mut translate = Vec::with_capacity(ds.n_classes());
    for name in ds.class_names() {
        let idx = map
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| Error::Format(format!("label {name:?} not in label map")))?;
        translate.push(idx);
    }
    let labels = ds.labels().iter().map(|&l| translate[l]).collect();
    FeatureDataset::with_source_tags(
        ds.features().to_vec(),
        ds.n_features(),
        labels,
        map.to_vec(),
        ds.source_tags().to_vec(),
    )
}

/// SHA-256 over the binary encoding, hex encoded.
pub fn dataset_fingerprint(ds: &FeatureDataset) -> String {
    let mut buf = Vec::new();
    write_binary(ds, &mut buf).expect("writing to memory");
    hex::encode(Sha256::digest(&buf))
}
