//! Stable text and binary encodings for reports, traces and fields.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{ErrorKind, Result};
use crate::numerics::field::ScalarField;
use crate::numerics::grid::SpaceTimeGrid;

/// Seventeen significant digits in scientific notation; round-trips every f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Pretty JSON whose floats always use [`fmt_f64`]; non-finite floats become `null`.
struct StableFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for StableFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with stable key order (struct field order) and float format.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, StableFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| ErrorKind::Io(e.to_string()).at("io", "to_json"))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| ErrorKind::Io(e.to_string()).at("io", "to_json"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = to_json(value)?;
    fs::write(path, text).map_err(|e| ErrorKind::Io(format!("{}: {e}", path.display())).at("io", "write_json"))
}

/// Writes a field as a little-endian header `n, m, K` (u64) and `L, h, T, Δt`
/// (f64), followed by the values, time level major and row-major in space.
pub fn write_field<W: Write>(field: &ScalarField, mut out: W) -> Result<()> {
    let io_err = |e: io::Error| ErrorKind::Io(e.to_string()).at("io", "write_field");
    let g = field.grid();
    let mut buf = Vec::with_capacity(56 + 8 * field.values().len());
    for v in [g.dim() as u64, g.nodes_per_axis() as u64, g.time_levels() as u64] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [g.half_width(), g.spacing(), g.horizon(), g.time_step()] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(io_err)
}

pub fn read_field<R: Read>(mut input: R, label: &str) -> Result<ScalarField> {
    let fail = |msg: String| ErrorKind::Io(msg).at("io", "read_field");
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| fail(e.to_string()))?;
    if bytes.len() < 56 {
        return Err(fail("truncated header".into()));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    let dim = u64::from_le_bytes(word(0)) as usize;
    let nodes = u64::from_le_bytes(word(1)) as usize;
    let levels = u64::from_le_bytes(word(2)) as usize;
    let [l, h, t, dt] = [3, 4, 5, 6].map(|i| f64::from_le_bytes(word(i)));
    let grid = SpaceTimeGrid::new(dim, l, h, t, dt)?;
    if grid.nodes_per_axis() != nodes || grid.time_levels() != levels {
        return Err(fail("header dimensions disagree with the grid parameters".into()));
    }
    let count = grid.space_nodes() * levels;
    if bytes.len() != 56 + 8 * count {
        return Err(fail(format!("expected {count} values, found {} bytes of payload", bytes.len() - 56)));
    }
    let values = (0..count).map(|i| f64::from_le_bytes(word(7 + i))).collect();
    ScalarField::from_values(grid, values, label)
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    let file = fs::File::open(path).map_err(|e| ErrorKind::Io(format!("{}: {e}", path.display())).at("io", "load_field"))?;
    read_field(io::BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        b: f64,
        a: Vec<f64>,
    }

    #[test]
    fn floats_have_seventeen_digits_and_stable_order() {
        let s = to_json(&Sample { b: 0.1, a: vec![f64::NAN, 2.0] }).unwrap();
        assert!(s.contains("\"b\": 1.0000000000000001e-1"));
        assert!(s.find("\"b\"").unwrap() < s.find("\"a\"").unwrap());
        assert!(s.contains("null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn field_round_trip() {
        let grid = SpaceTimeGrid::new(1, 1.0, 0.25, 0.5, 0.25).unwrap();
        let values: Vec<f64> = (0..27).map(|i| i as f64 * 0.5).collect();
        let f = ScalarField::from_values(grid, values, "ramp").unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 56 + 27 * 8);
        let g = read_field(&buf[..], "ramp").unwrap();
        assert_eq!(g.values(), f.values());
        assert_eq!(g.grid(), f.grid());
        assert!(read_field(&buf[..50], "x").is_err());
    }
}
