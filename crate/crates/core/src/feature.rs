//! Pyramid-level feature maps, error maps and the `RFM1` file format.
//!
//! `RFM1` layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size        field
//! 0       4           magic "RFM1"
//! 4       4           level code (3..=6 for P3..P6)
//! 8       4           height H
//! 12      4           width W
//! 16      4           channels C
//! 20      4           stride
//! 24      4*H*W*C     f32 values, row-major, channel fastest
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};

pub const MAGIC: &[u8; 4] = b"RFM1";
const HEADER_LEN: usize = 24;

/// Feature pyramid level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    P3,
    P4,
    P5,
    P6,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::P3, Level::P4, Level::P5, Level::P6];

    pub fn stride(self) -> u32 {
        match self {
            Level::P3 => 8,
            Level::P4 => 16,
            Level::P5 => 32,
            Level::P6 => 64,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Level::P3 => 3,
            Level::P4 => 4,
            Level::P5 => 5,
            Level::P6 => 6,
        }
    }

    pub fn from_code(code: u32) -> Option<Level> {
        match code {
            3 => Some(Level::P3),
            4 => Some(Level::P4),
            5 => Some(Level::P5),
            6 => Some(Level::P6),
            _ => None,
        }
    }

    /// Default autoencoder bottleneck width for this level.
    pub fn default_latent_dim(self) -> usize {
        match self {
            Level::P3 => 32,
            Level::P4 => 16,
            Level::P5 => 8,
            Level::P6 => 4,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize - 3
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.code())
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('P')
            .or_else(|| s.strip_prefix('p'))
            .and_then(|d| d.parse::<u32>().ok())
            .and_then(Level::from_code)
            .ok_or_else(|| Error::Invalid(format!("unknown pyramid level {s:?}")))
    }
}

/// Dense `H x W x C` grid of regional features at one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    level: Level,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        level: Level,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Invalid(format!(
                "feature map dims {height}x{width}x{channels} must be positive"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "feature map data length {} != {height}*{width}*{channels}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(FormatError::NonFinite { index }.into());
        }
        Ok(Self {
            level,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> u32 {
        self.level.stride()
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Feature vector at row `i`, column `j`.
    pub fn cell(&self, i: usize, j: usize) -> &[f32] {
        let start = (i * self.width + j) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Feature vector of the flat cell index `k = i * W + j`.
    pub fn cell_flat(&self, k: usize) -> &[f32] {
        &self.data[k * self.channels..(k + 1) * self.channels]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        for v in [
            self.level.code(),
            self.height as u32,
            self.width as u32,
            self.channels as u32,
            self.stride(),
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < 4 {
            return Err(FormatError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        if &bytes[..4] != MAGIC {
            let mut found = [0u8; 4];
            found.copy_from_slice(&bytes[..4]);
            return Err(FormatError::BadMagic { found });
        }
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let code = u32_at(4);
        let level = Level::from_code(code)
            .ok_or_else(|| FormatError::Header(format!("unknown level code {code}")))?;
        let (h, w, c, stride) = (
            u32_at(8) as usize,
            u32_at(12) as usize,
            u32_at(16) as usize,
            u32_at(20),
        );
        if h == 0 || w == 0 || c == 0 {
            return Err(FormatError::Header(format!("zero dimension {h}x{w}x{c}")));
        }
        if stride != level.stride() {
            return Err(FormatError::Header(format!(
                "stride {stride} does not match level {level} (expected {})",
                level.stride()
            )));
        }
        let n = h
            .checked_mul(w)
            .and_then(|v| v.checked_mul(c))
            .ok_or_else(|| FormatError::Header("dimensions overflow".into()))?;
        let expected = HEADER_LEN + 4 * n;
        if bytes.len() < expected {
            return Err(FormatError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(FormatError::Trailing(bytes.len() - expected));
        }
        let mut data = Vec::with_capacity(n);
        for (index, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(FormatError::NonFinite { index });
            }
            data.push(v);
        }
        Ok(Self {
            level,
            height: h,
            width: w,
            channels: c,
            data,
        })
    }
}

pub fn write_feature_map(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, map.to_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    FeatureMap::from_bytes(&bytes).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-cell reconstruction error grid at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    level: Level,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ErrorMap {
    pub fn new(level: Level, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Invalid("error map must be non-empty".into()));
        }
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "error map data length {} != {height}*{width}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Invalid(format!("error map value {v} is not a finite non-negative number")));
        }
        Ok(Self {
            level,
            height,
            width,
            data,
        })
    }

    pub fn constant(level: Level, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(level, height, width, vec![value; height * width])
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn stride(&self) -> u32 {
        self.level.stride()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}
