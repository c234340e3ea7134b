//! File formats: the binary matrix file, CSV interop, label lists, PGM
//! images and WAV audio.
//!
//! Matrix file layout, all little-endian:
//!
//! | offset | size        | field                         |
//! |--------|-------------|-------------------------------|
//! | 0      | 4           | magic `b"SSMF"`               |
//! | 4      | 4           | rows, `u32`                   |
//! | 8      | 4           | cols, `u32`                   |
//! | 12     | 8·rows·cols | payload, `f64`, row-major     |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, MatrixKind, SquareMatrix};

pub const MAGIC: [u8; 4] = *b"SSMF";
const HEADER_LEN: usize = 12;

pub fn encode_matrix(m: &DenseMatrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows).map_err(|_| Error::param("row count exceeds u32"))?;
    let cols = u32::try_from(m.cols).map_err(|_| Error::param("column count exceeds u32"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after {rows}x{cols} payload",
            payload.len() - expected
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DenseMatrix { rows, cols, data })
}

pub fn write_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_matrix(m)?)?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| missing_or_io(e, path))?;
    decode_matrix(&bytes)
}

pub fn write_square(m: &SquareMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_matrix(&m.to_dense(), path)
}

/// Reads a matrix file that must be square, tagging it with `kind`.
pub fn read_square(path: impl AsRef<Path>, kind: MatrixKind) -> Result<SquareMatrix> {
    SquareMatrix::from_dense(read_matrix(path)?, kind)
}

fn missing_or_io(e: std::io::Error, path: &Path) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::MissingInput(path.to_path_buf())
    } else {
        Error::Io(e)
    }
}

/// Writes one row per line, comma separated. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    for i in 0..m.rows {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        if cols.is_some_and(|c| c != record.len()) {
            return Err(Error::Format(format!("ragged csv row {}", rows + 1)));
        }
        cols = Some(record.len());
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("bad number {field:?} in csv row {}", rows + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or(Error::EmptyInput)?;
    DenseMatrix::new(rows, cols, data)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Reads a label list: one class id per non-empty line.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| missing_or_io(e, path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

pub fn write_labels(labels: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an 8-bit binary (P5) PGM.
pub fn write_pgm(pixels: &[u8], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::SizeMismatch {
            expected: width * height,
            found: pixels.len(),
        });
    }
    let file = BufWriter::new(fs::File::create(path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(pixels, width as u32, height as u32, ExtendedColorType::L8)
        .map_err(|e| Error::Format(e.to_string()))
}

/// Reads a grayscale PGM as `(width, height, pixels)` with pixels scaled to
/// `[0, 1]`.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| missing_or_io(e, path))?
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    let pixels = gray.into_raw().into_iter().map(|p| p as f64 / 255.0).collect();
    Ok((w as usize, h as usize, pixels))
}

/// Reads a mono WAV file (16-bit integer or 32-bit float) into samples in
/// `[-1, 1]` and the sample rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => missing_or_io(io, path),
        other => Error::Format(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!("expected mono audio, found {} channels", spec.channels)));
    }
    let fmt_err = |e: hound::Error| Error::Format(e.to_string());
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(fmt_err)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(fmt_err)?,
        (format, bits) => {
            return Err(Error::Format(format!("unsupported wav encoding {format:?}/{bits} bits")))
        }
    };
    Ok((samples, spec.sample_rate))
}

pub fn write_wav_f32(samples: &[f64], sample_rate: u32, path: impl AsRef<Path>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let fmt_err = |e: hound::Error| Error::Format(e.to_string());
    let mut w = hound::WavWriter::create(path, spec).map_err(fmt_err)?;
    for &s in samples {
        w.write_sample(s as f32).map_err(fmt_err)?;
    }
    w.finalize().map_err(fmt_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_magic_is_reported() {
        let mut bytes = encode_matrix(&DenseMatrix::row_vector(vec![1.0])).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        let err = decode_matrix(&bytes).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
        assert!(err.to_string().starts_with("bad magic"));
    }

    #[test]
    fn short_payload_is_truncated() {
        let m = DenseMatrix::new(4, 4, vec![0.5; 16]).unwrap();
        let bytes = encode_matrix(&m).unwrap();
        let err = decode_matrix(&bytes[..bytes.len() - 8]).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 128, found: 120 }));
        assert!(err.to_string().starts_with("truncated"));
        assert!(matches!(decode_matrix(b"SSMF\x01"), Err(Error::Truncated { .. })));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = encode_matrix(&DenseMatrix::row_vector(vec![1.0, 2.0])).unwrap();
        bytes.push(0);
        assert!(matches!(decode_matrix(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn header_layout_is_little_endian() {
        let bytes = encode_matrix(&DenseMatrix::new(1, 2, vec![1.0, -2.5]).unwrap()).unwrap();
        assert_eq!(&bytes[..12], b"SSMF\x01\x00\x00\x00\x02\x00\x00\x00");
        assert_eq!(&bytes[12..20], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 28);
    }

    #[test]
    fn non_square_rejected_when_square_required() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ssmf");
        write_matrix(&DenseMatrix::new(2, 3, vec![0.0; 6]).unwrap(), &p).unwrap();
        assert!(matches!(
            read_square(&p, MatrixKind::Distance),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn missing_file_is_reported_by_path() {
        let err = read_matrix("/nonexistent/definitely/missing.ssmf").unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = DenseMatrix::new(2, 3, vec![0.1, 1.0 / 3.0, -2e-300, 5.0, 1e20, -0.0]).unwrap();
        write_csv(&m, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_csv(&p).unwrap(), m);
    }

    #[test]
    fn labels_skip_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.txt");
        fs::write(&p, "a\n b \n\nc\n").unwrap();
        assert_eq!(read_labels(&p).unwrap(), vec!["a", "b", "c"]);
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.pgm");
        write_pgm(&[0, 255, 51, 102, 204, 153], 3, 2, &p).unwrap();
        let (w, h, px) = read_pgm(&p).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(px, vec![0.0, 1.0, 0.2, 0.4, 0.8, 0.6]);
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let samples = vec![0.0, 0.5, -0.25, 1.0];
        write_wav_f32(&samples, 22050, &p).unwrap();
        let (back, sr) = read_wav(&p).unwrap();
        assert_eq!(sr, 22050);
        assert_eq!(back, samples);
    }
}
