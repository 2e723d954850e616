//! CSV tables, PGM previews and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use tvmap_core::Tensor;

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// A header plus rows of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Comma-separated, header first, LF line endings.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(e) => Error::io(path, e),
            other => Error::format(format!("{other:?}")),
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        let header = r
            .headers()
            .map_err(|e| Error::format(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = r
            .records()
            .map(|rec| {
                rec.map(|rec| rec.iter().map(str::to_string).collect())
                    .map_err(|e| Error::format(e.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let c = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[c].as_str()).collect())
    }
}

/// 8-bit binary PGM of one frame's magnitude, min-max normalized.
pub fn pgm_frame(t: &Tensor, frame: usize) -> Vec<u8> {
    let s = t.shape();
    let mags = t.frame(frame).magnitudes();
    let (lo, hi) = mags.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", s.ny, s.nx).into_bytes();
    out.extend(mags.iter().map(|&v| {
        if range > 0.0 {
            ((v - lo) / range * 255.0).round() as u8
        } else {
            0
        }
    }));
    out
}

/// Writes `<stem>_t<k>.pgm` for every frame and returns the paths.
pub fn write_previews(t: &Tensor, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..t.shape().nt)
        .map(|k| {
            let path = dir.join(format!("{stem}_t{k:03}.pgm"));
            fs::write(&path, pgm_frame(t, k)).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Writes `kv` as a manifest; the result parses back with [`KeyValues::parse`].
pub fn write_manifest(path: impl AsRef<Path>, kv: &KeyValues) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, kv.render()).map_err(|e| Error::io(path, e))
}

/// Shortest round-trip formatting used in every output table.
pub fn num(v: f64) -> String {
    format!("{v}")
}
