//! JSON container for tensor trains.
//!
//! A file holds a header (`format`, `version`, `d`, mode sizes, ranks) and
//! the cores as flat arrays in the canonical layout. Doubles are written with
//! shortest round-trip formatting, so finite values survive bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tt::matrix::{OpCore, TtMatrix};
use crate::tt::vector::{Core3, TtVector};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct VectorFile {
    format: String,
    version: u32,
    d: usize,
    mode_sizes: Vec<usize>,
    ranks: Vec<usize>,
    cores: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    format: String,
    version: u32,
    d: usize,
    row_modes: Vec<usize>,
    col_modes: Vec<usize>,
    ranks: Vec<usize>,
    cores: Vec<Vec<f64>>,
}

fn check_header(format: &str, expected: &str, version: u32, d: usize, modes: usize, ranks: usize, cores: usize) -> Result<()> {
    if format != expected {
        return Err(Error::Input(format!("expected format {expected:?}, found {format:?}")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Input(format!("unsupported container version {version}")));
    }
    if modes != d || cores != d || ranks != d + 1 {
        return Err(Error::Input("header sizes are inconsistent with d".into()));
    }
    Ok(())
}

impl TtVector {
    pub fn to_json(&self) -> Result<String> {
        let file = VectorFile {
            format: "tt-vector".into(),
            version: FORMAT_VERSION,
            d: self.d(),
            mode_sizes: self.mode_sizes(),
            ranks: self.ranks(),
            cores: self.cores().iter().map(|c| c.data().to_vec()).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: VectorFile = serde_json::from_str(text)?;
        check_header(&f.format, "tt-vector", f.version, f.d, f.mode_sizes.len(), f.ranks.len(), f.cores.len())?;
        let cores = f
            .cores
            .into_iter()
            .enumerate()
            .map(|(k, data)| Core3::new(f.ranks[k], f.mode_sizes[k], f.ranks[k + 1], data))
            .collect::<Result<Vec<_>>>()?;
        TtVector::from_cores(cores)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl TtMatrix {
    pub fn to_json(&self) -> Result<String> {
        let file = MatrixFile {
            format: "tt-matrix".into(),
            version: FORMAT_VERSION,
            d: self.d(),
            row_modes: self.row_modes(),
            col_modes: self.col_modes(),
            ranks: self.ranks(),
            cores: self.cores().iter().map(|c| c.data().to_vec()).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: MatrixFile = serde_json::from_str(text)?;
        check_header(&f.format, "tt-matrix", f.version, f.d, f.row_modes.len(), f.ranks.len(), f.cores.len())?;
        if f.col_modes.len() != f.d {
            return Err(Error::Input("header sizes are inconsistent with d".into()));
        }
        let cores = f
            .cores
            .into_iter()
            .enumerate()
            .map(|(k, data)| OpCore::new(f.ranks[k], f.row_modes[k], f.col_modes[k], f.ranks[k + 1], data))
            .collect::<Result<Vec<_>>>()?;
        TtMatrix::from_cores(cores)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
