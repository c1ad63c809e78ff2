//! Gmsh MSH 2.2 ASCII, tetrahedra only.
//!
//! Node tags are remapped densely in file order; the original tags are kept
//! in [`MshData::node_tags`]. Elements other than 4-node tetrahedra are
//! skipped and counted per Gmsh type. Unknown sections are skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{IoError, Result};
use crate::mesh::{Mesh, Simplex, VertexId};

const TETRAHEDRON: u32 = 4;

#[derive(Clone, Debug)]
pub struct MshData {
    pub mesh: Mesh,
    /// Original tag of each dense vertex id.
    pub node_tags: Vec<u64>,
    /// Skipped elements per Gmsh element type.
    pub ignored: BTreeMap<u32, usize>,
}

pub fn read_msh(path: impl AsRef<Path>) -> Result<Mesh> {
    Ok(read_msh_detailed(path)?.mesh)
}

pub fn read_msh_detailed(path: impl AsRef<Path>) -> Result<MshData> {
    parse_msh(&std::fs::read_to_string(path)?)
}

fn malformed(section: &str, message: impl Into<String>) -> IoError {
    IoError::MalformedSection {
        section: section.to_string(),
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(section: &str, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| malformed(section, format!("invalid number `{tok}`")))
}

/// Lines of one `$Name ... $EndName` block.
fn section<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<Vec<&'a str>> {
    let end = format!("$End{name}");
    let mut body = Vec::new();
    for l in lines {
        if l == end {
            return Ok(body);
        }
        body.push(l);
    }
    Err(malformed(name, format!("missing {end}")))
}

/// Coordinates, node tags in file order, and tag to vertex index.
type NodeBlock = (Vec<f64>, Vec<u64>, HashMap<u64, u32>);

pub fn parse_msh(text: &str) -> Result<MshData> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut version_seen = false;
    let mut nodes: Option<NodeBlock> = None;
    let mut elements = Vec::new();
    let mut ignored = BTreeMap::new();
    while let Some(l) = lines.next() {
        let name = l
            .strip_prefix('$')
            .ok_or_else(|| malformed("file", format!("expected a section header, found `{l}`")))?;
        let body = section(&mut lines, name)?;
        match name {
            "MeshFormat" => {
                let tokens: Vec<&str> = body.first().map(|l| l.split_whitespace().collect()).unwrap_or_default();
                let version = *tokens.first().ok_or_else(|| malformed(name, "empty"))?;
                if !version.starts_with("2.") {
                    return Err(IoError::UnsupportedVersion(version.to_string()));
                }
                if tokens.get(1) != Some(&"0") {
                    return Err(IoError::UnsupportedVersion(format!("{version} binary")));
                }
                version_seen = true;
            }
            "Nodes" => nodes = Some(parse_nodes(&body)?),
            "Elements" => {
                let map = &nodes.as_ref().ok_or_else(|| malformed(name, "appears before $Nodes"))?.2;
                parse_elements(&body, map, &mut elements, &mut ignored)?;
            }
            _ => {}
        }
    }
    if !version_seen {
        return Err(malformed("MeshFormat", "missing"));
    }
    let (coords, node_tags, _) = nodes.ok_or_else(|| malformed("Nodes", "missing"))?;
    if elements.is_empty() {
        return Err(IoError::NoVolumeElements);
    }
    let n = elements.len();
    let mesh = Mesh::from_parts(3, coords, elements, vec![0; n], HashMap::new())?;
    Ok(MshData {
        mesh,
        node_tags,
        ignored,
    })
}

type Nodes = (Vec<f64>, Vec<u64>, HashMap<u64, u32>);

fn parse_nodes(body: &[&str]) -> Result<Nodes> {
    let s = "Nodes";
    let (count, rest) = body.split_first().ok_or_else(|| malformed(s, "missing node count"))?;
    let count: usize = num(s, count)?;
    if rest.len() != count {
        return Err(malformed(s, format!("expected {count} nodes, found {}", rest.len())));
    }
    let mut coords = Vec::with_capacity(3 * count);
    let mut tags = Vec::with_capacity(count);
    let mut map = HashMap::with_capacity(count);
    for l in rest {
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(malformed(s, format!("node line `{l}` needs a tag and 3 coordinates")));
        }
        let tag: u64 = num(s, tok[0])?;
        if map.insert(tag, tags.len() as u32).is_some() {
            return Err(malformed(s, format!("duplicate node tag {tag}")));
        }
        tags.push(tag);
        for t in &tok[1..] {
            coords.push(num(s, t)?);
        }
    }
    Ok((coords, tags, map))
}

fn parse_elements(
    body: &[&str],
    nodes: &HashMap<u64, u32>,
    out: &mut Vec<Simplex>,
    ignored: &mut BTreeMap<u32, usize>,
) -> Result<()> {
    let s = "Elements";
    let (count, rest) = body.split_first().ok_or_else(|| malformed(s, "missing element count"))?;
    let count: usize = num(s, count)?;
    if rest.len() != count {
        return Err(malformed(s, format!("expected {count} elements, found {}", rest.len())));
    }
    for l in rest {
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() < 3 {
            return Err(malformed(s, format!("short element line `{l}`")));
        }
        let kind: u32 = num(s, tok[1])?;
        let ntags: usize = num(s, tok[2])?;
        let node_tok = tok
            .get(3 + ntags..)
            .ok_or_else(|| malformed(s, format!("element line `{l}` has too few tags")))?;
        if kind != TETRAHEDRON {
            *ignored.entry(kind).or_insert(0) += 1;
            continue;
        }
        if node_tok.len() != 4 {
            return Err(malformed(s, format!("tetrahedron `{l}` needs 4 nodes")));
        }
        let mut ids = [VertexId(0); 4];
        for (slot, t) in ids.iter_mut().zip(node_tok) {
            let tag: u64 = num(s, t)?;
            *slot = VertexId(*nodes.get(&tag).ok_or_else(|| malformed(s, format!("unknown node tag {tag}")))?);
        }
        out.push(Simplex::new(ids, 0));
    }
    Ok(())
}

/// MSH text with node tags `1..=n` and tetrahedra tagged `0 0`.
pub fn to_msh_string(mesh: &Mesh) -> Result<String> {
    if mesh.dim() != 3 {
        return Err(IoError::UnsupportedDimension(mesh.dim()));
    }
    let mut out = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    writeln!(out, "{}", mesh.num_vertices()).unwrap();
    for (i, p) in mesh.coords().chunks(3).enumerate() {
        writeln!(out, "{} {} {} {}", i + 1, p[0], p[1], p[2]).unwrap();
    }
    writeln!(out, "$EndNodes\n$Elements\n{}", mesh.num_elements()).unwrap();
    for (i, s) in mesh.elements().iter().enumerate() {
        write!(out, "{} {TETRAHEDRON} 2 0 0", i + 1).unwrap();
        for v in &s.vertices {
            write!(out, " {}", v.0 + 1).unwrap();
        }
        out.push('\n');
    }
    out.push_str("$EndElements\n");
    Ok(out)
}

pub fn write_msh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_msh_string(mesh)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TET: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n$Elements\n2\n1 15 2 0 1 1\n2 4 2 0 1 1 2 3 4\n$EndElements\n";

    #[test]
    fn minimal_file() {
        let data = parse_msh(ONE_TET).unwrap();
        assert_eq!(data.mesh.num_elements(), 1);
        assert_eq!(data.ignored.get(&15), Some(&1));
        assert_eq!(data.node_tags, vec![1, 2, 3, 4]);
    }

    #[test]
    fn triangles_only() {
        let text = ONE_TET.replace("2 4 2 0 1 1 2 3 4", "2 2 2 0 1 1 2 3");
        assert!(matches!(parse_msh(&text), Err(IoError::NoVolumeElements)));
    }

    #[test]
    fn version_four_is_rejected() {
        let text = ONE_TET.replace("2.2 0 8", "4.1 0 8");
        assert!(matches!(parse_msh(&text), Err(IoError::UnsupportedVersion(v)) if v == "4.1"));
    }

    #[test]
    fn non_contiguous_tags_are_remapped() {
        let text = ONE_TET
            .replace("1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1", "10 0 0 0\n7 1 0 0\n30 0 1 0\n2 0 0 1")
            .replace("2 4 2 0 1 1 2 3 4", "2 4 2 0 1 10 7 30 2");
        let data = parse_msh(&text).unwrap();
        assert_eq!(data.node_tags, vec![10, 7, 30, 2]);
        assert_eq!(data.mesh.element(0).vertices.as_slice(), &[VertexId(0), VertexId(1), VertexId(2), VertexId(3)]);
    }

    #[test]
    fn count_mismatch_is_malformed() {
        let text = ONE_TET.replace("$Nodes\n4", "$Nodes\n5");
        assert!(matches!(parse_msh(&text), Err(IoError::MalformedSection { .. })));
    }

    #[test]
    fn write_rejects_two_dimensions() {
        let m = crate::generate_kuhn_grid(2, 1).unwrap();
        assert!(matches!(to_msh_string(&m), Err(IoError::UnsupportedDimension(2))));
    }
}
