//! Plain-text field dumps: a `mesh ...` header line followed by one value
//! per line in node order. Values use the shortest round-trip decimal
//! representation, so a dump reloads bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{DomainMesh, Field};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn write_field<T: Real, W: Write>(field: &Field<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", field.mesh().header())?;
    for v in field.values() {
        writeln!(out, "{v}")?;
    }
    out.flush()
}

pub fn save_field<T: Real>(field: &Field<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_field(field, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

fn parse<T: Real>(token: Option<&str>, what: &str) -> Result<T> {
    token
        .ok_or_else(|| Error::Format(format!("missing {what} in header")))?
        .parse::<T>()
        .map_err(|e| Error::Format(format!("bad {what}: {e}")))
}

fn parse_count(token: Option<&str>, what: &str) -> Result<usize> {
    token
        .ok_or_else(|| Error::Format(format!("missing {what} in header")))?
        .parse::<usize>()
        .map_err(|e| Error::Format(format!("bad {what}: {e}")))
}

fn parse_header<T: Real>(line: &str) -> Result<DomainMesh<T>> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("mesh") {
        return Err(Error::Format(format!("expected `mesh` header, got {line:?}")));
    }
    let mesh = match tokens.next() {
        Some("radial") => {
            let n = parse_count(tokens.next(), "dimension")?;
            let radius = parse::<T>(tokens.next(), "radius")?;
            let m = parse_count(tokens.next(), "node count")?;
            DomainMesh::radial(n, radius, m)?
        }
        Some("box") => {
            let lx = parse::<T>(tokens.next(), "Lx")?;
            let ly = parse::<T>(tokens.next(), "Ly")?;
            let lz = parse::<T>(tokens.next(), "Lz")?;
            let nx = parse_count(tokens.next(), "nx")?;
            let ny = parse_count(tokens.next(), "ny")?;
            let nz = parse_count(tokens.next(), "nz")?;
            DomainMesh::cuboid([lx, ly, lz], [nx, ny, nz])?
        }
        other => return Err(Error::Format(format!("unknown mesh variant {other:?}"))),
    };
    if let Some(extra) = tokens.next() {
        return Err(Error::Format(format!("trailing header token {extra:?}")));
    }
    Ok(mesh)
}

pub fn read_field<T: Real, R: Read>(input: R) -> Result<Field<T>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty dump".into()))?
        .map_err(|e| Error::io("<field dump>", e))?;
    let mesh = Arc::new(parse_header::<T>(header.trim())?);
    let mut values = Vec::with_capacity(mesh.len());
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io("<field dump>", e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(
            t.parse::<T>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?,
        );
    }
    Field::from_values(&mesh, values)
}

pub fn load_field<T: Real>(path: impl AsRef<Path>) -> Result<Field<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_field(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dump_round_trips_bit_exact(values in prop::collection::vec(-1e30f64..1e30, 16)) {
            let mesh = Arc::new(DomainMesh::<f64>::unit_ball(5, 16).unwrap());
            let field = Field::from_values(&mesh, values).unwrap();
            let mut buf = Vec::new();
            write_field(&field, &mut buf).unwrap();
            let back: Field<f64> = read_field(buf.as_slice()).unwrap();
            prop_assert!(back.same_mesh(&field));
            for (a, b) in back.values().iter().zip(field.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn box_header_and_errors() {
        let mesh = Arc::new(DomainMesh::<f64>::cuboid([1.0, 2.0, 0.5], [8, 9, 10]).unwrap());
        let field = Field::constant(&mesh, 0.25);
        let mut buf = Vec::new();
        write_field(&field, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mesh box 1 2 0.5 8 9 10\n"));
        let back: Field<f64> = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.values(), field.values());

        assert!(matches!(read_field::<f64, _>("grid radial 3 1 16\n".as_bytes()), Err(Error::Format(_))));
        assert!(matches!(read_field::<f64, _>("mesh radial 3 1 16\n1\n".as_bytes()), Err(Error::Length { .. })));
        assert!(matches!(read_field::<f64, _>("mesh radial 3 1 8\n".as_bytes()), Err(Error::Config(_))));
    }
}
