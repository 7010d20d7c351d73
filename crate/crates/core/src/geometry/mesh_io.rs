//! ASCII mesh format:
//!
//! ```text
//! FKMESH 1 <d>
//! VERTICES <n>
//! x y [z]                                   (n lines)
//! ELEMENTS <m>
//! <k> v_1 .. v_k <region> a_1 .. a_d          (m lines)
//! SUBTESS <m>                               (optional section)
//! <s> x y [z] ...                           (m lines; s simplices of d+1 points, s = 0 for simplices)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::{ElementSpec, PolytopalMesh};
use super::Point;
use crate::error::{Error, Result};

const MAGIC: &str = "FKMESH";
const VERSION: u32 = 1;

pub fn load_mesh(path: impl AsRef<Path>) -> Result<PolytopalMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, path)
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    path: &'a Path,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
            path,
            last: 0,
        }
    }

    fn skip_blank(&mut self) {
        while let Some((_, l)) = self.inner.peek() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                self.inner.next();
            } else {
                break;
            }
        }
    }

    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        self.skip_blank();
        let (i, l) = self.inner.next()?;
        self.last = i + 1;
        Some((i + 1, l.split_whitespace().collect()))
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next_tokens().ok_or_else(|| {
            self.err(
                self.last + 1,
                format!("unexpected end of file, expected {what}"),
            )
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, line: usize, tok: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.err(line, format!("cannot parse `{tok}`")))
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (line, toks) = self.expect(name)?;
        if toks.len() != 2 || toks[0] != name {
            return Err(self.err(line, format!("expected `{name} <count>`")));
        }
        self.num(line, toks[1])
    }
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<PolytopalMesh> {
    let mut lines = Lines::new(text, path);
    let (line, header) = lines.expect("header")?;
    if header.len() != 3 || header[0] != MAGIC {
        return Err(lines.err(line, format!("expected `{MAGIC} {VERSION} <d>` header")));
    }
    let version: u32 = lines.num(line, header[1])?;
    if version != VERSION {
        return Err(lines.err(line, format!("unsupported mesh version {version}")));
    }
    let dim: usize = lines.num(line, header[2])?;
    if dim != 2 && dim != 3 {
        return Err(lines.err(line, format!("dimension must be 2 or 3, got {dim}")));
    }

    let nv = lines.section("VERTICES")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, toks) = lines.expect("vertex")?;
        if toks.len() != dim {
            return Err(lines.err(line, format!("vertex needs {dim} coordinates")));
        }
        let mut p: Point = [0.0; 3];
        for (c, t) in toks.iter().enumerate() {
            p[c] = lines.num(line, t)?;
        }
        vertices.push(p);
    }

    let ne = lines.section("ELEMENTS")?;
    let mut specs = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, toks) = lines.expect("element")?;
        let k: usize = match toks.first() {
            Some(t) => lines.num(line, t)?,
            None => return Err(lines.err(line, "empty element line")),
        };
        if toks.len() != 1 + k + 1 + dim {
            return Err(lines.err(
                line,
                format!(
                    "element line needs {} tokens, found {}",
                    2 + k + dim,
                    toks.len()
                ),
            ));
        }
        let ids = toks[1..=k]
            .iter()
            .map(|t| lines.num(line, t))
            .collect::<Result<Vec<usize>>>()?;
        let region = lines.num(line, toks[1 + k])?;
        let mut axon = [0.0; 3];
        for c in 0..dim {
            axon[c] = lines.num(line, toks[2 + k + c])?;
        }
        specs.push(ElementSpec {
            vertices: ids,
            region,
            axon,
            sub_tessellation: None,
        });
    }

    lines.skip_blank();
    if lines.inner.peek().is_some() {
        let count = lines.section("SUBTESS")?;
        if count != ne {
            return Err(lines.err(
                lines.last,
                format!("SUBTESS count {count} != {ne} elements"),
            ));
        }
        let per_point = dim;
        let per_simplex = (dim + 1) * per_point;
        for spec in specs.iter_mut() {
            let (line, toks) = lines.expect("sub-tessellation")?;
            let s: usize = lines.num(line, toks[0])?;
            if toks.len() != 1 + s * per_simplex {
                return Err(lines.err(
                    line,
                    format!("{s} simplices need {} coordinates", s * per_simplex),
                ));
            }
            if s == 0 {
                continue;
            }
            let mut simplices = Vec::with_capacity(s);
            for k in 0..s {
                let mut pts = Vec::with_capacity(dim + 1);
                for v in 0..=dim {
                    let mut p = [0.0; 3];
                    for c in 0..dim {
                        p[c] = lines.num(line, toks[1 + k * per_simplex + v * per_point + c])?;
                    }
                    pts.push(p);
                }
                simplices.push(pts);
            }
            spec.sub_tessellation = Some(simplices);
        }
        if let Some((line, _)) = lines.next_tokens() {
            return Err(lines.err(line, "trailing content after SUBTESS section"));
        }
    }

    PolytopalMesh::new(dim, vertices, specs)
}

/// Serializes a mesh; coordinates use the shortest round-trip representation.
pub fn write_mesh(mesh: &PolytopalMesh) -> String {
    let dim = mesh.dim();
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION} {dim}").unwrap();
    writeln!(out, "VERTICES {}", mesh.vertices().len()).unwrap();
    for v in mesh.vertices() {
        let parts: Vec<String> = v[..dim].iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", parts.join(" ")).unwrap();
    }
    writeln!(out, "ELEMENTS {}", mesh.elements().len()).unwrap();
    for e in mesh.elements() {
        let mut parts = vec![e.vertices.len().to_string()];
        parts.extend(e.vertices.iter().map(|v| v.to_string()));
        parts.push(e.region.to_string());
        parts.extend(e.axon[..dim].iter().map(|x| format!("{x:?}")));
        writeln!(out, "{}", parts.join(" ")).unwrap();
    }
    if mesh.elements().iter().any(|e| e.explicit_sub_tessellation) {
        writeln!(out, "SUBTESS {}", mesh.elements().len()).unwrap();
        for e in mesh.elements() {
            if !e.explicit_sub_tessellation {
                writeln!(out, "0").unwrap();
                continue;
            }
            let mut parts = vec![e.sub_tessellation.len().to_string()];
            for s in &e.sub_tessellation {
                for p in &s.vertices {
                    parts.extend(p[..dim].iter().map(|x| format!("{x:?}")));
                }
            }
            writeln!(out, "{}", parts.join(" ")).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PolytopalMesh> {
        parse_mesh(text, Path::new("test.mesh"))
    }

    const SQUARE: &str = "FKMESH 1 2
VERTICES 4
0 0
1 0
1 1
0 1
ELEMENTS 2
3 0 1 2 1 1 0
3 0 2 3 2 1 0
";

    #[test]
    fn parses_two_triangle_square() {
        let m = parse(SQUARE).unwrap();
        assert_eq!(m.elements().len(), 2);
        assert_eq!(m.internal_faces().len(), 1);
        assert_eq!(m.boundary_faces().len(), 4);
        assert_eq!(m.region_ids(), vec![1, 2]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = SQUARE.replace("1 1\n0 1", "1 x\n0 1");
        match parse(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("FKMESH 2 2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn polytopal_round_trip_is_textually_stable() {
        let text = "FKMESH 1 2
VERTICES 6
0 0
0.5 0
1 0
1 1
0.5 1
0 1
ELEMENTS 2
4 0 1 4 5 1 0.6 0.8
4 1 2 3 4 2 1 0
SUBTESS 2
2 0 0 0.5 0 0.5 1 0 0 0.5 1 0 1
2 0.5 0 1 0 1 1 0.5 0 1 1 0.5 1
";
        let m = parse(text).unwrap();
        assert_eq!(m.internal_faces().len(), 1);
        assert_eq!(m.boundary_faces().len(), 6);
        let once = write_mesh(&m);
        let again = write_mesh(&parse(&once).unwrap());
        assert_eq!(once, again);
        assert_eq!(parse(&once).unwrap(), m);
    }
}
