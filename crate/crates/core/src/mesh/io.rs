//! Plain-text mesh files.
//!
//! Format:
//! ```text
//! polymesh v1 <n_vertices> <n_elements>
//! <x> <y>                 (one line per vertex)
//! <count> <i0> <i1> ...   (one line per element, 0-based indices)
//! ```
//! Coordinates are written with shortest round-trip formatting, so a
//! write/read cycle reproduces the mesh bit for bit.

use super::PolygonalMesh;
use crate::geom::Point;
use crate::{Error, Result};
use std::io::{BufRead, BufReader, Read, Write};

pub fn write_mesh(mesh: &PolygonalMesh, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "polymesh v1 {} {}",
        mesh.n_vertices(),
        mesh.n_elements()
    )?;
    for v in &mesh.vertices {
        writeln!(out, "{} {}", v.x, v.y)?;
    }
    for cycle in &mesh.elements {
        write!(out, "{}", cycle.len())?;
        for &i in cycle {
            write!(out, " {i}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_mesh(input: impl Read) -> Result<PolygonalMesh> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "polymesh" || fields[1] != "v1" {
        return Err(Error::Parse(format!("bad header: {header:?}")));
    }
    let n_vertices: usize = fields[2]
        .parse()
        .map_err(|_| Error::Parse(format!("bad vertex count {:?}", fields[2])))?;
    let n_elements: usize = fields[3]
        .parse()
        .map_err(|_| Error::Parse(format!("bad element count {:?}", fields[3])))?;

    let mut vertices = Vec::with_capacity(n_vertices);
    for i in 0..n_vertices {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing vertex line {i}")))??;
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("vertex line {i}: {line:?}")))?;
        let y: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("vertex line {i}: {line:?}")))?;
        if it.next().is_some() {
            return Err(Error::Parse(format!("vertex line {i} has extra fields")));
        }
        vertices.push(Point::new(x, y));
    }

    let mut elements = Vec::with_capacity(n_elements);
    for e in 0..n_elements {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing element line {e}")))??;
        let mut it = line.split_whitespace();
        let count: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("element line {e}: {line:?}")))?;
        let cycle: Vec<usize> = it
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("element line {e}: bad index {t:?}")))
            })
            .collect::<Result<_>>()?;
        if cycle.len() != count {
            return Err(Error::Parse(format!(
                "element line {e}: declared {count} indices, found {}",
                cycle.len()
            )));
        }
        elements.push(cycle);
    }
    PolygonalMesh::from_parts(vertices, elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, generate_voronoi, StructuredKind};

    #[test]
    fn roundtrip_is_exact() {
        for mesh in [
            generate_structured(StructuredKind::Mixed, 4),
            generate_voronoi(25, 2, 11).unwrap(),
        ] {
            let mut buf = Vec::new();
            write_mesh(&mesh, &mut buf).unwrap();
            let back = read_mesh(buf.as_slice()).unwrap();
            assert_eq!(mesh, back);
            // And the text itself is stable.
            let mut buf2 = Vec::new();
            write_mesh(&back, &mut buf2).unwrap();
            assert_eq!(buf, buf2);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_mesh("polymsh v1 1 1".as_bytes()).is_err());
        assert!(read_mesh("polymesh v1 2 1\n0 0\n".as_bytes()).is_err());
        let bad_index = "polymesh v1 3 1\n0 0\n1 0\n0 1\n3 0 1 5\n";
        assert!(read_mesh(bad_index.as_bytes()).is_err());
    }
}
