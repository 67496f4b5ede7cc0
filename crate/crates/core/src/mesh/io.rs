//! Plain-text mesh format:
//!
//! ```text
//! nv ne nf
//! x y            (nv lines)
//! v0 v1 v2 region (ne lines)
//! v0 v1 D|N      (nf boundary-facet lines)
//! ```
//!
//! Interior facets are derived. Diffusivities are not part of the format and
//! are supplied by the caller.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{BoundaryTag, Mesh};
use crate::error::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    let boundary = mesh.boundary_edges();
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", mesh.vertices.len(), mesh.num_elements(), boundary.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:e} {:e}", v[0], v[1]);
    }
    for (el, r) in mesh.elements.iter().zip(&mesh.regions) {
        let _ = writeln!(s, "{} {} {} {}", el[0], el[1], el[2], r);
    }
    for (v, tag) in boundary {
        let t = match tag {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::Neumann => 'N',
        };
        let _ = writeln!(s, "{} {} {}", v[0], v[1], t);
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        detail: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("cannot parse {what} from {tok:?}"),
    })
}

pub fn read_mesh<R: BufRead>(input: R, nu: BTreeMap<u32, f64>) -> Result<Mesh> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.starts_with('#')));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i, l?)),
            None => Err(Error::Parse {
                line: 0,
                detail: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let (ln, header) = next("header")?;
    let mut t = header.split_whitespace();
    let nv: usize = parse(t.next(), ln, "vertex count")?;
    let ne: usize = parse(t.next(), ln, "element count")?;
    let nf: usize = parse(t.next(), ln, "boundary facet count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertex")?;
        let mut t = l.split_whitespace();
        vertices.push([parse(t.next(), ln, "x")?, parse(t.next(), ln, "y")?]);
    }
    let mut elements = Vec::with_capacity(ne);
    let mut regions = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = next("element")?;
        let mut t = l.split_whitespace();
        elements.push([
            parse(t.next(), ln, "v0")?,
            parse(t.next(), ln, "v1")?,
            parse(t.next(), ln, "v2")?,
        ]);
        regions.push(parse(t.next(), ln, "region")?);
    }
    let mut boundary = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = next("boundary facet")?;
        let mut t = l.split_whitespace();
        let v = [parse(t.next(), ln, "v0")?, parse(t.next(), ln, "v1")?];
        let tag = match t.next() {
            Some("D") => BoundaryTag::Dirichlet,
            Some("N") => BoundaryTag::Neumann,
            other => {
                return Err(Error::Parse {
                    line: ln,
                    detail: format!("boundary tag must be D or N, got {other:?}"),
                })
            }
        };
        boundary.push((v, tag));
    }
    Mesh::new(vertices, elements, regions, nu, &boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{lshape_initial, unit_nu};

    #[test]
    fn roundtrip() {
        let m = lshape_initial();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice(), unit_nu()).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.elements, m.elements);
        assert_eq!(back.boundary_edges(), m.boundary_edges());
    }

    #[test]
    fn bad_tag_reports_line() {
        let text = "3 1 3\n0 0\n1 0\n0 1\n0 1 2 0\n0 1 D\n1 2 X\n2 0 D\n";
        match read_mesh(text.as_bytes(), unit_nu()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }
}
