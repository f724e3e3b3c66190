use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureVector};
use crate::dataset::{read_jsonl, write_jsonl};

pub const FEATURE_MAGIC: &[u8; 4] = b"TCFV";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub row: usize,
    pub youtube_id: String,
}

/// `<features>.manifest.jsonl` next to the binary file.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.jsonl");
    PathBuf::from(s)
}

/// Dense row-major feature matrix with an id index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl FeatureSet {
    pub fn from_vectors(vectors: &[FeatureVector]) -> Result<Self, FeatureError> {
        let dim = vectors.first().map_or(0, |v| v.dim());
        let mut data = Vec::with_capacity(vectors.len() * dim);
        let mut ids = Vec::with_capacity(vectors.len());
        let mut index = HashMap::with_capacity(vectors.len());
        for (row, v) in vectors.iter().enumerate() {
            if v.dim() != dim {
                return Err(FeatureError::DimensionMismatch { expected: dim, actual: v.dim() });
            }
            if index.insert(v.source_id.clone(), row).is_some() {
                return Err(FeatureError::DuplicateId(v.source_id.clone()));
            }
            ids.push(v.source_id.clone());
            data.extend_from_slice(&v.values);
        }
        Ok(Self { dim, ids, data, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn to_vectors(&self) -> Vec<FeatureVector> {
        (0..self.len())
            .map(|i| FeatureVector::new(&self.ids[i], self.row(i).to_vec()))
            .collect()
    }
}

/// Write the binary matrix and its JSONL manifest.
///
/// Layout: `TCFV`, then little-endian u32 version, count and dim, then
/// `count * dim` little-endian f32 values row by row.
pub fn write_features(path: &Path, set: &FeatureSet) -> Result<(), FeatureError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    for v in [FEATURE_VERSION, set.len() as u32, set.dim as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for x in &set.data {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    let manifest: Vec<ManifestRow> = set
        .ids
        .iter()
        .enumerate()
        .map(|(row, id)| ManifestRow { row, youtube_id: id.clone() })
        .collect();
    write_jsonl(&manifest_path(path), &manifest).map_err(|e| FeatureError::Manifest(e.to_string()))
}

pub fn read_features(path: &Path) -> Result<FeatureSet, FeatureError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != FEATURE_MAGIC {
        return Err(FeatureError::CorruptFeatureFile("bad magic or short header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (version, count, dim) = (word(0), word(1) as usize, word(2) as usize);
    if version != FEATURE_VERSION {
        return Err(FeatureError::VersionMismatch { expected: FEATURE_VERSION, found: version });
    }
    let body = &bytes[16..];
    if body.len() != count * dim * 4 {
        return Err(FeatureError::CorruptFeatureFile(format!(
            "expected {} value bytes, found {}",
            count * dim * 4,
            body.len()
        )));
    }
    let data: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let rows: Vec<(usize, ManifestRow)> =
        read_jsonl(&manifest_path(path)).map_err(|e| FeatureError::Manifest(e.to_string()))?;
    if rows.len() != count {
        return Err(FeatureError::Manifest(format!("{} manifest rows for {count} vectors", rows.len())));
    }
    let mut ids = vec![String::new(); count];
    for (line, m) in rows {
        if m.row >= count || !ids[m.row].is_empty() {
            return Err(FeatureError::Manifest(format!("line {line}: bad row {}", m.row)));
        }
        ids[m.row] = m.youtube_id;
    }
    let mut index = HashMap::with_capacity(count);
    for (i, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(FeatureError::DuplicateId(id.clone()));
        }
    }
    Ok(FeatureSet { dim, ids, data, index })
}
