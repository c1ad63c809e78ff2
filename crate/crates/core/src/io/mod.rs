//! Mesh file formats: Gmsh MSH 2.2, a native text format and legacy VTK.
//!
//! [`read_mesh`] and [`write_mesh`] dispatch on the file extension:
//! `.msh`, `.dsimp` and (write only) `.vtk`.

use std::path::Path;

use thiserror::Error;

use crate::mesh::MeshError;
use crate::Mesh;

pub mod msh;
pub mod native;
pub mod vtk;

pub use msh::{parse_msh, read_msh, read_msh_detailed, to_msh_string, write_msh, MshData};
pub use native::{parse_native, read_native, to_native_string, write_native};
pub use vtk::{to_vtk_string, write_vtk};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure")]
    IoFailure(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("unsupported MSH version {0}, only ASCII 2.x is read")]
    UnsupportedVersion(String),
    #[error("malformed {section} section: {message}")]
    MalformedSection { section: String, message: String },
    #[error("no tetrahedra in MSH file")]
    NoVolumeElements,
    #[error("format does not support dimension {0}")]
    UnsupportedDimension(usize),
    #[error("unknown mesh file extension for {0}")]
    UnknownExtension(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

fn extension(path: &Path) -> Result<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .ok_or_else(|| IoError::UnknownExtension(path.display().to_string()))
}

/// Reads a `.msh` or `.dsimp` file.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    match extension(path)?.as_str() {
        "msh" => read_msh(path),
        "dsimp" => read_native(path),
        _ => Err(IoError::UnknownExtension(path.display().to_string())),
    }
}

/// Writes a `.msh`, `.dsimp` or `.vtk` file.
pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path)?.as_str() {
        "msh" => write_msh(mesh, path),
        "dsimp" => write_native(mesh, path),
        "vtk" => write_vtk(mesh, path),
        _ => Err(IoError::UnknownExtension(path.display().to_string())),
    }
}
