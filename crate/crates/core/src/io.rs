//! Tensor files, CSV tables and run manifests.
//!
//! A tensor file is the magic `TNSR`, a little-endian `u16` version (1), a
//! `u16` mode count `n`, `n` little-endian `u64` extents, then the entries as
//! little-endian `f64` with mode 0 varying fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tensor::{DenseTensor, Shape};

pub const TENSOR_MAGIC: [u8; 4] = *b"TNSR";
pub const TENSOR_VERSION: u16 = 1;

fn format_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

/// Fills `buf`, returning how many bytes were available.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    let got = read_full(r, buf)?;
    if got < buf.len() {
        return Err(format_err(
            offset + got as u64,
            format!("truncated {what}: expected {} bytes, found {got}", buf.len()),
        ));
    }
    Ok(())
}

/// Parses the header and returns the shape with the payload offset.
pub fn read_header_from<R: Read>(r: &mut R) -> Result<(Shape, u64)> {
    let mut magic = [0u8; 4];
    read_exact_at(r, &mut magic, 0, "magic")?;
    if magic != TENSOR_MAGIC {
        return Err(format_err(0, format!("bad magic {magic:?}, expected \"TNSR\"")));
    }
    let mut word = [0u8; 2];
    read_exact_at(r, &mut word, 4, "version")?;
    let version = u16::from_le_bytes(word);
    if version != TENSOR_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    read_exact_at(r, &mut word, 6, "mode count")?;
    let n = u16::from_le_bytes(word) as usize;
    if n == 0 {
        return Err(format_err(6, "mode count must be positive"));
    }
    let mut dims = Vec::with_capacity(n);
    let mut offset = 8u64;
    for _ in 0..n {
        let mut d = [0u8; 8];
        read_exact_at(r, &mut d, offset, "extents")?;
        let d = u64::from_le_bytes(d);
        let d = usize::try_from(d)
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| format_err(offset, format!("invalid extent {d}")))?;
        dims.push(d);
        offset += 8;
    }
    let shape = Shape::new(dims).map_err(|e| format_err(8, e.to_string()))?;
    Ok((shape, offset))
}

/// Reads only the header of a tensor file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Shape> {
    let mut r = BufReader::new(File::open(path)?);
    Ok(read_header_from(&mut r)?.0)
}

pub fn read_tensor_from<R: Read>(r: &mut R) -> Result<DenseTensor> {
    let (shape, start) = read_header_from(r)?;
    let expected = shape
        .len()
        .checked_mul(8)
        .ok_or_else(|| format_err(8, "payload size overflows"))?;
    // Grows with the data actually present, so a lying header cannot force a
    // huge allocation up front.
    let mut bytes = Vec::new();
    r.take(expected as u64).read_to_end(&mut bytes)?;
    if bytes.len() < expected {
        return Err(format_err(
            start + bytes.len() as u64,
            format!(
                "truncated payload: expected {expected} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    let mut extra = [0u8; 1];
    if read_full(r, &mut extra)? != 0 {
        return Err(format_err(
            start + expected as u64,
            "trailing bytes after payload",
        ));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseTensor::from_vec(shape, data)
}

pub fn write_tensor_to<W: Write>(w: &mut W, t: &DenseTensor) -> Result<()> {
    let n = u16::try_from(t.order())
        .map_err(|_| Error::Shape(format!("order {} exceeds the file format", t.order())))?;
    w.write_all(&TENSOR_MAGIC)?;
    w.write_all(&TENSOR_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &x in t.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor_from(&mut BufReader::new(File::open(path)?))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor_to(&mut w, t)?;
    w.flush()?;
    Ok(())
}

/// Matrices are stored as two-mode tensor files; the column-major layout is
/// already mode-0 fastest.
pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let shape = Shape::new(vec![m.rows(), m.cols()])?;
    write_tensor(path, &DenseTensor::from_vec(shape, m.as_slice().to_vec())?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let t = read_tensor(path)?;
    if t.order() != 2 {
        return Err(Error::Shape(format!(
            "expected a two-mode tensor file, found order {}",
            t.order()
        )));
    }
    let (r, c) = (t.dims()[0], t.dims()[1]);
    Matrix::from_col_major(r, c, t.into_vec())
}

/// Vectors are stored as one-mode tensor files.
pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let shape = Shape::new(vec![v.len().max(1)])?;
    let data = if v.is_empty() { vec![0.0] } else { v.to_vec() };
    write_tensor(path, &DenseTensor::from_vec(shape, data)?)
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let mut r = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = read_full(&mut r, &mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Shortest round-trip decimal without exponent, so `3.0` is written `3`.
pub fn plain_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(x)
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorHistoryRow {
    pub iteration: usize,
    #[serde(serialize_with = "plain_f64")]
    pub error: f64,
    #[serde(serialize_with = "plain_f64")]
    pub zeta: f64,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SampleRow {
    /// `I` for a row index of mode `mode`, `J` for a fiber column.
    pub set: String,
    pub mode: usize,
    pub index: usize,
}

/// Everything needed to reproduce and audit a solve.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub config: ConfigEcho,
    pub input: InputRecord,
    pub result: ResultRecord,
    pub timing: TimingRecord,
    pub outputs: OutputRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ConfigEcho {
    pub ranks: Vec<usize>,
    pub epsilon: f64,
    pub zeta0: f64,
    pub zeta0_source: String,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<f64>,
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
    pub variant: String,
    pub max_iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ResultRecord {
    pub converged: bool,
    pub stop: String,
    pub iterations: usize,
    pub final_error: f64,
    pub resamples: usize,
    pub rank_deficient_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct TimingRecord {
    pub total_s: f64,
    pub mean_iteration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct OutputRecord {
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseTensor {
        let shape = Shape::new(vec![2, 3, 2]).unwrap();
        DenseTensor::from_fn(shape, |i| (i[0] + 10 * i[1]) as f64 - 0.5 * i[2] as f64)
    }

    fn encode(t: &DenseTensor) -> Vec<u8> {
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, t).unwrap();
        buf
    }

    #[test]
    fn layout_is_exact() {
        let t = sample();
        let bytes = encode(&t);
        assert_eq!(&bytes[..4], b"TNSR");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..8], &[3, 0]);
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(bytes.len(), 8 + 3 * 8 + 12 * 8);
        assert_eq!(&bytes[32..40], &t.data()[0].to_le_bytes());
    }

    #[test]
    fn round_trip_bitwise() {
        let mut t = sample();
        t.data_mut()[3] = -0.0;
        t.data_mut()[4] = f64::MIN_POSITIVE / 3.0;
        let back = read_tensor_from(&mut encode(&t).as_slice()).unwrap();
        assert_eq!(back.dims(), t.dims());
        let a: Vec<u64> = t.data().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = back.data().iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_payload_reports_counts() {
        let bytes = encode(&sample());
        let cut = &bytes[..bytes.len() - 5];
        let err = read_tensor_from(&mut &cut[..]).unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert_eq!(offset, cut.len() as u64);
                assert!(message.contains("expected 96"), "{message}");
                assert!(message.contains("found 91"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_errors_carry_offsets() {
        let mut bytes = encode(&sample());
        bytes[0] = b'X';
        assert!(matches!(
            read_tensor_from(&mut bytes.as_slice()),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bytes = encode(&sample());
        bytes[4] = 2;
        assert!(matches!(
            read_tensor_from(&mut bytes.as_slice()),
            Err(Error::Format { offset: 4, .. })
        ));
        let bytes = encode(&sample());
        assert!(matches!(
            read_tensor_from(&mut &bytes[..12]),
            Err(Error::Format { offset: 12, .. })
        ));
        let mut bytes = encode(&sample());
        bytes.push(0);
        assert!(matches!(
            read_tensor_from(&mut bytes.as_slice()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn video_header_accepted() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TNSR");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        for d in [256u64, 320, 3, 1250] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        let (shape, offset) = read_header_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(shape.dims(), &[256, 320, 3, 1250]);
        assert_eq!(offset, 40);
    }

    #[test]
    fn plain_numbers_in_csv() {
        #[derive(Serialize)]
        struct Row {
            #[serde(serialize_with = "plain_f64")]
            a: f64,
            #[serde(serialize_with = "plain_f64")]
            b: f64,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(Row { a: 0.1, b: 3.0 }).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text, "a,b\n0.1,3\n");
    }
}
