//! Legacy VTK ASCII unstructured grids for 2d and 3d meshes.
//!
//! Cell data: `type_tag`, `generation` and `face_class`, which is 0 when
//! every interior face of the cell is strongly or quasi-strongly compatible,
//! 1 otherwise, and -1 for all cells if the mesh is not conforming.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{IoError, Result};
use crate::compat::classify_all;
use crate::mesh::Mesh;

fn face_flags(mesh: &Mesh) -> Vec<i32> {
    let Ok(classes) = classify_all(mesh) else {
        return vec![-1; mesh.num_elements()];
    };
    let classes: HashMap<_, _> = classes.into_iter().collect();
    mesh.elements()
        .iter()
        .map(|s| {
            let bad = (0..s.vertices.len()).any(|l| classes.get(&s.face_key(l)).is_some_and(|c| !c.is_compatible()));
            bad as i32
        })
        .collect()
}

pub fn to_vtk_string(mesh: &Mesh) -> Result<String> {
    let d = mesh.dim();
    let cell_type = match d {
        2 => 5,
        3 => 10,
        _ => return Err(IoError::UnsupportedDimension(d)),
    };
    let n = mesh.num_elements();
    let mut out = String::from("# vtk DataFile Version 3.0\nnvb mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", mesh.num_vertices()).unwrap();
    for p in mesh.coords().chunks(d) {
        let z = if d == 3 { p[2] } else { 0.0 };
        writeln!(out, "{} {} {}", p[0], p[1], z).unwrap();
    }
    writeln!(out, "CELLS {n} {}", n * (d + 2)).unwrap();
    for s in mesh.elements() {
        write!(out, "{}", d + 1).unwrap();
        for v in &s.vertices {
            write!(out, " {}", v.0).unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "CELL_TYPES {n}").unwrap();
    for _ in 0..n {
        writeln!(out, "{cell_type}").unwrap();
    }
    writeln!(out, "CELL_DATA {n}").unwrap();
    let arrays: [(&str, Vec<i64>); 3] = [
        ("type_tag", mesh.elements().iter().map(|s| s.type_tag as i64).collect()),
        ("generation", mesh.generations().iter().map(|&g| g as i64).collect()),
        ("face_class", face_flags(mesh).into_iter().map(i64::from).collect()),
    ];
    for (name, values) in arrays {
        writeln!(out, "SCALARS {name} int 1\nLOOKUP_TABLE default").unwrap();
        for v in values {
            writeln!(out, "{v}").unwrap();
        }
    }
    Ok(out)
}

pub fn write_vtk(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_vtk_string(mesh)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_kuhn_grid, Simplex};

    fn cell_types(text: &str) -> Vec<&str> {
        let mut lines = text.lines().skip_while(|l| !l.starts_with("CELL_TYPES"));
        let n: usize = lines.next().unwrap()[11..].parse().unwrap();
        lines.take(n).collect()
    }

    #[test]
    fn single_tetra() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = Mesh::build(3, &pts, vec![Simplex::from_ids(&[0, 1, 2, 3], 0)]).unwrap();
        assert_eq!(cell_types(&to_vtk_string(&m).unwrap()), vec!["10"]);
    }

    #[test]
    fn planar_grid_uses_triangles() {
        let m = generate_kuhn_grid(2, 2).unwrap();
        let text = to_vtk_string(&m).unwrap();
        let types = cell_types(&text);
        assert_eq!(types.len(), 8);
        assert!(types.iter().all(|&t| t == "5"));
        assert!(text.contains("SCALARS face_class int 1"));
    }

    #[test]
    fn four_dimensions_rejected() {
        let m = generate_kuhn_grid(4, 1).unwrap();
        assert!(matches!(to_vtk_string(&m), Err(IoError::UnsupportedDimension(4))));
    }
}
