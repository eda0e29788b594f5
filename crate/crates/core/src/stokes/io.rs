//! Text container for waves.
//!
//! ```text
//! # stokes wave
//! format_version = 1
//! N = <even integer>
//! g = <float>
//! c = <float>
//! steepness = <float>
//! L = <float>
//! checksum = <sha256 hex>
//! <a_0>
//! ...
//! <a_{N/2}>
//! ```
//!
//! Floats are written with 17 significant digits. The checksum is the
//! SHA-256 of every line after the comment except the checksum line, each
//! terminated by `\n`.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::StokesError;
use crate::spectral::{AuxMap, Grid};

use super::StokesWave;

pub const WAVE_FORMAT_VERSION: u32 = 1;

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn digest(lines: &[String]) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn wave_to_string(w: &StokesWave) -> String {
    let mut body = vec![
        format!("format_version = {WAVE_FORMAT_VERSION}"),
        format!("N = {}", w.n_modes()),
        format!("g = {}", fmt_f64(w.g())),
        format!("c = {}", fmt_f64(w.c())),
        format!("steepness = {}", fmt_f64(w.steepness())),
        format!("L = {}", fmt_f64(w.l())),
    ];
    let header_len = body.len();
    body.extend(w.y_hat().iter().map(|&a| fmt_f64(a)));
    let sum = digest(&body);
    let mut out = String::from("# stokes wave\n");
    for l in &body[..header_len] {
        out.push_str(l);
        out.push('\n');
    }
    out.push_str(&format!("checksum = {sum}\n"));
    for l in &body[header_len..] {
        out.push_str(l);
        out.push('\n');
    }
    out
}

fn field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str, StokesError> {
    let line = line.ok_or(StokesError::Checksum)?;
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| StokesError::Format(format!("expected `{key} = ...`, got `{line}`")))?;
    if k.trim() != key {
        return Err(StokesError::Format(format!("expected key `{key}`, got `{}`", k.trim())));
    }
    Ok(v.trim())
}

fn parse<T: std::str::FromStr>(v: &str, key: &str) -> Result<T, StokesError> {
    v.parse().map_err(|_| StokesError::Format(format!("invalid value `{v}` for `{key}`")))
}

pub fn wave_from_str(text: &str) -> Result<StokesWave, StokesError> {
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let version: u32 = parse(field(lines.next(), "format_version")?, "format_version")?;
    if version != WAVE_FORMAT_VERSION {
        return Err(StokesError::Version(version));
    }
    let n_raw = field(lines.next(), "N")?;
    let g_raw = field(lines.next(), "g")?;
    let c_raw = field(lines.next(), "c")?;
    let s_raw = field(lines.next(), "steepness")?;
    let l_raw = field(lines.next(), "L")?;
    let sum = field(lines.next(), "checksum")?;
    let coeff_lines: Vec<&str> = lines.map(str::trim).collect();

    let mut body = vec![
        format!("format_version = {version}"),
        format!("N = {n_raw}"),
        format!("g = {g_raw}"),
        format!("c = {c_raw}"),
        format!("steepness = {s_raw}"),
        format!("L = {l_raw}"),
    ];
    body.extend(coeff_lines.iter().map(|s| s.to_string()));
    if digest(&body) != sum {
        return Err(StokesError::Checksum);
    }

    let n: usize = parse(n_raw, "N")?;
    let g: f64 = parse(g_raw, "g")?;
    let c: f64 = parse(c_raw, "c")?;
    let l: f64 = parse(l_raw, "L")?;
    let y_hat = coeff_lines.iter().map(|v| parse::<f64>(v, "coefficient")).collect::<Result<Vec<_>, _>>()?;
    let grid = Grid::new(n)?;
    let aux = AuxMap::new(l, &grid)?;
    StokesWave::from_cosine(&grid, Some(aux), y_hat, c, g)
}

pub fn write_wave(w: &StokesWave, path: impl AsRef<Path>) -> Result<(), StokesError> {
    fs::write(path, wave_to_string(w)).map_err(|e| StokesError::Io(e.to_string()))
}

pub fn read_wave(path: impl AsRef<Path>) -> Result<StokesWave, StokesError> {
    let text = fs::read_to_string(path).map_err(|e| StokesError::Io(e.to_string()))?;
    wave_from_str(&text)
}
