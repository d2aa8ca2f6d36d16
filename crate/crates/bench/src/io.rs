//! Vector file formats: `fvecs` (little-endian `i32` dimension followed by that
//! many `f32`s, per record) and headerless comma-separated text.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use streamsketch_core::Point;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: byte {offset}: {reason}")]
    Binary {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
    #[error("{path}: line {line}: {reason}")]
    Text {
        path: PathBuf,
        line: u64,
        reason: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_fvecs(path: &Path) -> Result<Vec<Point>, DataError> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(io_err(path))?;
    parse_fvecs(&buf).map_err(|(offset, reason)| DataError::Binary {
        path: path.to_path_buf(),
        offset,
        reason,
    })
}

/// Parses an in-memory `fvecs` buffer; errors carry the byte offset.
pub fn parse_fvecs(buf: &[u8]) -> Result<Vec<Point>, (u64, String)> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    let mut dim: Option<usize> = None;
    while pos < buf.len() {
        let Some(head) = buf.get(pos..pos + 4) else {
            return Err((pos as u64, "truncated dimension header".into()));
        };
        let d = i32::from_le_bytes(head.try_into().unwrap());
        if d <= 0 {
            return Err((pos as u64, format!("non-positive dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => {
                let record = 4 * (d + 1);
                if buf.len() % record != 0 {
                    let whole = buf.len() / record * record;
                    return Err((
                        whole as u64,
                        format!(
                            "file size {} is not a multiple of the {record}-byte record",
                            buf.len()
                        ),
                    ));
                }
                dim = Some(d);
            }
            Some(first) if first != d => {
                return Err((
                    pos as u64,
                    format!("dimension {d} differs from the first record's {first}"),
                ));
            }
            Some(_) => {}
        }
        let body = &buf[pos + 4..pos + 4 * (d + 1)];
        let coords: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let point = Point::new(coords).map_err(|e| (pos as u64, e.to_string()))?;
        out.push(point);
        pos += 4 * (d + 1);
    }
    Ok(out)
}

pub fn write_fvecs<P: AsRef<[f32]>>(path: &Path, points: &[P]) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for p in points {
        let p = p.as_ref();
        w.write_all(&(p.len() as i32).to_le_bytes())
            .map_err(io_err(path))?;
        for x in p {
            w.write_all(&x.to_le_bytes()).map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<Point>, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_csv(file).map_err(|(line, reason)| DataError::Text {
        path: path.to_path_buf(),
        line,
        reason,
    })
}

/// Parses headerless CSV; errors carry the 1-based line number.
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<Point>, (u64, String)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    let mut arity = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            (line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match arity {
            None => arity = Some(record.len()),
            Some(a) if a != record.len() => {
                return Err((line, format!("{} fields, expected {a}", record.len())));
            }
            Some(_) => {}
        }
        let coords = record
            .iter()
            .map(|cell| {
                cell.parse::<f32>()
                    .map_err(|_| (line, format!("not a number: {cell:?}")))
            })
            .collect::<Result<Vec<f32>, _>>()?;
        out.push(Point::new(coords).map_err(|e| (line, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_csv<P: AsRef<[f32]>>(path: &Path, points: &[P]) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| DataError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
    for p in points {
        w.write_record(p.as_ref().iter().map(|x| x.to_string()))
            .map_err(|e| DataError::Io {
                path: path.to_path_buf(),
                source: e.into(),
            })?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads `fvecs` or CSV by extension (`.fvecs`, anything else is CSV).
pub fn read_points(path: &Path) -> Result<Vec<Point>, DataError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("fvecs") => read_fvecs(path),
        _ => read_csv(path),
    }
}
