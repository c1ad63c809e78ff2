//! Line-oriented native format for meshes of any dimension.
//!
//! ```text
//! dsimp 3
//! vertices 4
//! 0 0 0
//! ...
//! elements 1
//! 0 1 2 3 t=0 g=0
//! bisections 0
//! ```
//!
//! `t=` and `g=` default to 0 and the `bisections` section, one
//! `a b midpoint` line per registry entry, is optional. Blank lines and
//! lines starting with `#` are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{IoError, Result};
use crate::mesh::{EdgeKey, Mesh, Simplex, VertexId};

pub fn to_native_string(mesh: &Mesh) -> String {
    let d = mesh.dim();
    let mut out = String::new();
    writeln!(out, "dsimp {d}").unwrap();
    writeln!(out, "vertices {}", mesh.num_vertices()).unwrap();
    for p in mesh.coords().chunks(d) {
        let line: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    writeln!(out, "elements {}", mesh.num_elements()).unwrap();
    for (s, g) in mesh.elements().iter().zip(mesh.generations()) {
        for v in &s.vertices {
            write!(out, "{} ", v.0).unwrap();
        }
        writeln!(out, "t={} g={}", s.type_tag, g).unwrap();
    }
    let registry = mesh.sorted_registry();
    if !registry.is_empty() {
        writeln!(out, "bisections {}", registry.len()).unwrap();
        for (e, m) in registry {
            writeln!(out, "{} {} {}", e.low().0, e.high().0, m.0).unwrap();
        }
    }
    out
}

pub fn write_native(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_native_string(mesh))?;
    Ok(())
}

pub fn read_native(path: impl AsRef<Path>) -> Result<Mesh> {
    parse_native(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Some((i + 1, l));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line().ok_or_else(|| IoError::ParseError {
            line: self.last + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    /// A `keyword <count>` header line.
    fn header(&mut self, keyword: &str) -> Result<usize> {
        let (ln, l) = self.expect(keyword)?;
        parse_header(ln, l, keyword)
    }
}

fn parse_header(ln: usize, l: &str, keyword: &str) -> Result<usize> {
    let mut it = l.split_whitespace();
    if it.next() != Some(keyword) {
        return Err(err(ln, format!("expected `{keyword} <count>`")));
    }
    let n = it.next().ok_or_else(|| err(ln, format!("missing count after `{keyword}`")))?;
    if it.next().is_some() {
        return Err(err(ln, "trailing tokens".into()));
    }
    num(ln, n)
}

fn err(line: usize, message: String) -> IoError {
    IoError::ParseError { line, message }
}

fn num<T: std::str::FromStr>(ln: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| err(ln, format!("invalid number `{tok}`")))
}

pub fn parse_native(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let d = lines.header("dsimp")?;
    let nv = lines.header("vertices")?;
    let mut coords = Vec::with_capacity(nv * d);
    for _ in 0..nv {
        let (ln, l) = lines.expect("vertex coordinates")?;
        let before = coords.len();
        for tok in l.split_whitespace() {
            coords.push(num::<f64>(ln, tok)?);
        }
        if coords.len() - before != d {
            return Err(err(ln, format!("expected {d} coordinates")));
        }
    }
    let ne = lines.header("elements")?;
    let mut elements = Vec::with_capacity(ne);
    let mut generations = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = lines.expect("element")?;
        let (mut ids, mut t, mut g) = (Vec::with_capacity(d + 1), 0u8, 0u32);
        for tok in l.split_whitespace() {
            if let Some(v) = tok.strip_prefix("t=") {
                t = num(ln, v)?;
            } else if let Some(v) = tok.strip_prefix("g=") {
                g = num(ln, v)?;
            } else {
                ids.push(num::<u32>(ln, tok)?);
            }
        }
        if ids.len() != d + 1 {
            return Err(err(ln, format!("expected {} vertex ids, found {}", d + 1, ids.len())));
        }
        elements.push(Simplex::from_ids(&ids, t));
        generations.push(g);
    }
    let mut registry = HashMap::new();
    if let Some((ln, l)) = lines.next_line() {
        let nb = parse_header(ln, l, "bisections")?;
        for _ in 0..nb {
            let (ln, l) = lines.expect("bisection")?;
            let ids: Vec<u32> = l.split_whitespace().map(|t| num(ln, t)).collect::<Result<_>>()?;
            if ids.len() != 3 {
                return Err(err(ln, "expected `a b midpoint`".into()));
            }
            registry.insert(EdgeKey::new(VertexId(ids[0]), VertexId(ids[1])), VertexId(ids[2]));
        }
        if let Some((ln, _)) = lines.next_line() {
            return Err(err(ln, "unexpected content after bisections".into()));
        }
    }
    Ok(Mesh::from_parts(d, coords, elements, generations, registry)?)
}
