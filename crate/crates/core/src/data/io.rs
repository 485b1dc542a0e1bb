//! Tensor files and CSV manifests.
//!
//! A tensor file is `TNS1`, a little-endian `u32` rank, `rank` little-endian `u32`
//! extents, then the row-major `f32` payload. `TNS8` is the same framing with an
//! `f64` payload; it is only used inside persisted models, where the extension
//! must reproduce bit for bit.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tensor::{Dataset, Label, SampleTensor, Shape};
use crate::error::{Error, Result};

pub const MAGIC_F32: &[u8; 4] = b"TNS1";
pub const MAGIC_F64: &[u8; 4] = b"TNS8";

const MAX_RANK: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

pub fn write_tensor<W: Write>(
    w: &mut W,
    dims: &[usize],
    data: &[f64],
    precision: Precision,
) -> std::io::Result<()> {
    let count: usize = dims.iter().product();
    assert_eq!(count, data.len(), "tensor payload does not match extents");
    match precision {
        Precision::F32 => w.write_all(MAGIC_F32)?,
        Precision::F64 => w.write_all(MAGIC_F64)?,
    }
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        let d = u32::try_from(d)
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "extent exceeds u32"))?;
        w.write_all(&d.to_le_bytes())?;
    }
    match precision {
        Precision::F32 => {
            for &v in data {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Precision::F64 => {
            for &v in data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Reads one framed tensor of either precision; returns its extents and values widened to `f64`.
pub fn read_tensor<R: Read>(r: &mut R) -> std::result::Result<(Vec<usize>, Vec<f64>), String> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| format!("reading magic: {e}"))?;
    let precision = match &magic {
        m if m == MAGIC_F32 => Precision::F32,
        m if m == MAGIC_F64 => Precision::F64,
        other => return Err(format!("bad magic {:?}", String::from_utf8_lossy(other))),
    };
    let rank = read_u32(r)?;
    if rank == 0 || rank > MAX_RANK {
        return Err(format!("unsupported rank {rank}"));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        dims.push(read_u32(r)? as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("element count overflows")?;
    let width = match precision {
        Precision::F32 => 4,
        Precision::F64 => 8,
    };
    let mut bytes = Vec::new();
    r.take((count * width) as u64)
        .read_to_end(&mut bytes)
        .map_err(|e| format!("reading payload: {e}"))?;
    if bytes.len() != count * width {
        return Err(format!(
            "truncated payload: expected {} bytes, found {}",
            count * width,
            bytes.len()
        ));
    }
    let data = match precision {
        Precision::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Precision::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok((dims, data))
}

fn read_u32<R: Read>(r: &mut R) -> std::result::Result<u32, String> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| format!("reading header: {e}"))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_tensor_file(path: &Path) -> Result<(Shape, Vec<f64>)> {
    let parse_err = |reason: String| Error::TensorParse {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| parse_err(e.to_string()))?;
    let mut reader = BufReader::new(file);
    let (dims, data) = read_tensor(&mut reader).map_err(parse_err)?;
    let mut rest = [0u8; 1];
    if reader.read(&mut rest).map_err(|e| parse_err(e.to_string()))? != 0 {
        return Err(parse_err("trailing bytes after payload".into()));
    }
    let shape = Shape::from_dims(&dims).map_err(|e| parse_err(e.to_string()))?;
    Ok((shape, data))
}

pub fn write_tensor_file(path: &Path, sample: &SampleTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, &sample.shape().dims(), sample.data(), Precision::F32)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    label: Option<String>,
    age: Option<String>,
    path: String,
}

/// Loads a dataset from a CSV manifest with header `id,label,age,path`.
pub fn load_dataset(manifest: &Path) -> Result<Dataset> {
    let manifest_err = |reason: String| Error::ManifestParse {
        path: manifest.to_path_buf(),
        reason,
    };
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(manifest)
        .map_err(|e| manifest_err(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| manifest_err(e.to_string()))?
        .clone();
    let expected = ["id", "label", "age", "path"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(manifest_err(format!(
            "header must be `id,label,age,path`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut samples = Vec::new();
    for (line, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(|e| manifest_err(e.to_string()))?;
        let label = parse_label(row.label.as_deref())
            .map_err(|e| manifest_err(format!("row {}: {e}", line + 1)))?;
        let age = match row.age.as_deref() {
            None | Some("") => None,
            Some(a) => Some(
                a.parse::<f64>()
                    .map_err(|e| manifest_err(format!("row {}: bad age `{a}`: {e}", line + 1)))?,
            ),
        };
        let path = base.join(&row.path);
        let (shape, data) = read_tensor_file(&path)?;
        let sample = SampleTensor::new(row.id, shape, data)?
            .with_label(label)
            .with_age(age);
        samples.push(sample);
    }
    Dataset::new(samples)
}

fn parse_label(s: Option<&str>) -> std::result::Result<Option<Label>, String> {
    match s {
        None | Some("") => Ok(None),
        Some("0") => Ok(Some(0)),
        Some("1") => Ok(Some(1)),
        Some(other) => Err(format!("label must be 0, 1 or empty, found `{other}`")),
    }
}

/// Writes `dir/manifest.csv` plus one tensor file per sample under `dir/tensors/`.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let tensor_dir = dir.join("tensors");
    fs::create_dir_all(&tensor_dir)?;
    let manifest = dir.join("manifest.csv");
    let mut writer = csv::Writer::from_path(&manifest)?;
    writer.write_record(["id", "label", "age", "path"])?;
    for (i, s) in dataset.samples().iter().enumerate() {
        let rel = format!("tensors/{i:05}.tns");
        write_tensor_file(&dir.join(&rel), s)?;
        let label = s.label.map(|l| l.to_string()).unwrap_or_default();
        let age = s.age.map(|a| a.to_string()).unwrap_or_default();
        writer.write_record([s.id.as_str(), &label, &age, &rel])?;
    }
    writer.flush()?;
    Ok(manifest)
}
