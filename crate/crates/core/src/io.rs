//! On-disk grid format: a `<name>.hdr` text header plus a `<name>.dat` file of
//! interleaved little-endian complex samples in row-major order.
//!
//! ```text
//! SRRGRID/1
//! 8 64 64
//! c128
//! kspace
//! row-major coil y x        (optional)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{num_elements, ComplexGrid, Domain};

pub const GRID_MAGIC: &str = "SRRGRID/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    /// Two 32-bit floats per sample.
    C64,
    /// Two 64-bit floats per sample.
    C128,
}

impl Precision {
    pub fn tag(&self) -> &'static str {
        match self {
            Precision::C64 => "c64",
            Precision::C128 => "c128",
        }
    }

    pub fn bytes_per_sample(&self) -> usize {
        match self {
            Precision::C64 => 8,
            Precision::C128 => 16,
        }
    }

    pub fn parse(tag: &str) -> Result<Precision> {
        match tag {
            "c64" => Ok(Precision::C64),
            "c128" => Ok(Precision::C128),
            other => Err(Error::UnsupportedPrecision(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridHeader {
    pub dims: Vec<usize>,
    pub precision: Precision,
    pub domain: Domain,
    /// Optional per-axis names; storage is always row-major.
    pub dim_names: Option<Vec<String>>,
}

impl GridHeader {
    pub fn data_bytes(&self) -> u64 {
        (num_elements(&self.dims) * self.precision.bytes_per_sample()) as u64
    }

    pub fn render(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut s = format!("{GRID_MAGIC}\n{}\n{}\n{}\n", dims.join(" "), self.precision.tag(), self.domain);
        if let Some(names) = &self.dim_names {
            s.push_str("row-major ");
            s.push_str(&names.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<GridHeader> {
        let bad = |reason: &str| Error::Header { path: path.to_path_buf(), reason: reason.to_string() };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(GRID_MAGIC) {
            return Err(bad("missing SRRGRID/1 magic"));
        }
        let dims = lines
            .next()
            .ok_or_else(|| bad("missing dims line"))?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| bad(&format!("bad dimension {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if dims.is_empty() || dims.contains(&0) {
            return Err(bad("dims must be a nonempty list of positive extents"));
        }
        let precision = Precision::parse(lines.next().ok_or_else(|| bad("missing precision line"))?.trim())?;
        let domain_tag = lines.next().ok_or_else(|| bad("missing domain line"))?.trim();
        let domain = Domain::parse(domain_tag).ok_or_else(|| bad(&format!("unknown domain {domain_tag:?}")))?;
        let dim_names = match lines.next().map(str::trim) {
            None | Some("") => None,
            Some(line) => {
                let mut toks = line.split_whitespace();
                if toks.next() != Some("row-major") {
                    return Err(bad("only row-major order is supported"));
                }
                let names: Vec<String> = toks.map(String::from).collect();
                if names.len() != dims.len() {
                    return Err(bad("dimension name count differs from rank"));
                }
                Some(names)
            }
        };
        Ok(GridHeader { dims, precision, domain, dim_names })
    }
}

/// Strip a trailing `.hdr`/`.dat` so either file (or the bare stem) names the pair.
pub fn grid_stem(path: impl AsRef<Path>) -> PathBuf {
    let p = path.as_ref();
    match p.extension().and_then(|e| e.to_str()) {
        Some("hdr") | Some("dat") => p.with_extension(""),
        _ => p.to_path_buf(),
    }
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn header_path(path: impl AsRef<Path>) -> PathBuf {
    with_suffix(&grid_stem(path), "hdr")
}

pub fn data_path(path: impl AsRef<Path>) -> PathBuf {
    with_suffix(&grid_stem(path), "dat")
}

/// Write at full (c128) precision.
pub fn write_grid(path: impl AsRef<Path>, g: &ComplexGrid) -> Result<()> {
    write_grid_with(path, g, Precision::C128, None)
}

pub fn write_grid_with(
    path: impl AsRef<Path>,
    g: &ComplexGrid,
    precision: Precision,
    dim_names: Option<&[&str]>,
) -> Result<()> {
    if let Some(names) = dim_names {
        if names.len() != g.rank() {
            return Err(Error::InvalidArgument("dimension name count differs from rank".into()));
        }
    }
    let header = GridHeader {
        dims: g.dims().to_vec(),
        precision,
        domain: g.domain(),
        dim_names: dim_names.map(|n| n.iter().map(|s| s.to_string()).collect()),
    };
    let hdr = header_path(&path);
    let dat = data_path(&path);
    if let Some(parent) = hdr.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut bytes = Vec::with_capacity(header.data_bytes() as usize);
    for v in g.data() {
        match precision {
            Precision::C64 => {
                bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
                bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
            }
            Precision::C128 => {
                bytes.extend_from_slice(&v.re.to_le_bytes());
                bytes.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    let mut f = fs::File::create(&dat).map_err(|e| Error::io(&dat, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&dat, e))?;
    fs::write(&hdr, header.render()).map_err(|e| Error::io(&hdr, e))?;
    Ok(())
}

pub fn read_header(path: impl AsRef<Path>) -> Result<GridHeader> {
    let hdr = header_path(&path);
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    GridHeader::parse(&text, &hdr)
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<ComplexGrid> {
    read_grid_with_header(path).map(|(g, _)| g)
}

pub fn read_grid_with_header(path: impl AsRef<Path>) -> Result<(ComplexGrid, GridHeader)> {
    let header = read_header(&path)?;
    let dat = data_path(&path);
    let bytes = fs::read(&dat).map_err(|e| Error::io(&dat, e))?;
    if bytes.len() as u64 != header.data_bytes() {
        return Err(Error::LengthMismatch { path: dat, expected: header.data_bytes(), got: bytes.len() as u64 });
    }
    let data: Vec<Complex64> = match header.precision {
        Precision::C64 => bytes
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect(),
        Precision::C128 => bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[0..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..16].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect(),
    };
    let g = ComplexGrid::from_vec(&header.dims, data, header.domain)?;
    Ok((g, header))
}
