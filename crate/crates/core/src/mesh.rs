//! Dimension-generic simplicial meshes.
//!
//! A [`Mesh`] stores a flat coordinate table, the list of leaf simplices and
//! the registry of bisected edges. All topology is id based: two faces are the
//! same face iff their sorted vertex ids agree, and a bisection midpoint is
//! looked up through the registry rather than by comparing coordinates.
//!
//! Meshes that went through partial refinement are allowed to be
//! non-conforming; conformity is checked on demand by
//! [`is_conforming`](crate::nvb::is_conforming).

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use itertools::Itertools;
use smallvec::SmallVec;
use thiserror::Error;

/// Inline storage for the `d + 1` vertices of a simplex.
pub type VertexList = SmallVec<[VertexId; 5]>;

/// Dense vertex handle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for VertexId {
    fn from(v: u32) -> Self {
        VertexId(v)
    }
}

/// Canonical (ascending) key of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey(VertexId, VertexId);

impl EdgeKey {
    /// Builds the key of the edge `{a, b}`. `a` and `b` must differ.
    pub fn new(a: VertexId, b: VertexId) -> Self {
        debug_assert_ne!(a, b, "degenerate edge");
        if a < b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }

    pub fn low(self) -> VertexId {
        self.0
    }

    pub fn high(self) -> VertexId {
        self.1
    }

    pub fn contains(self, v: VertexId) -> bool {
        self.0 == v || self.1 == v
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.0, self.1)
    }
}

/// Canonical (ascending) key of a `(d-1)`-face.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceKey(SmallVec<[VertexId; 4]>);

impl FaceKey {
    pub fn new(vertices: impl IntoIterator<Item = VertexId>) -> Self {
        let mut v: SmallVec<[VertexId; 4]> = vertices.into_iter().collect();
        v.sort_unstable();
        FaceKey(v)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.0
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for FaceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.iter().join(", "))
    }
}

/// An ordered simplex `[z_0, ..., z_d]` together with its NVB type tag.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Simplex {
    pub vertices: VertexList,
    /// Type in `0..d`; selects the child ordering of the bisection rule.
    pub type_tag: u8,
}

impl Simplex {
    pub fn new(vertices: impl IntoIterator<Item = VertexId>, type_tag: u8) -> Self {
        Simplex {
            vertices: vertices.into_iter().collect(),
            type_tag,
        }
    }

    /// Convenience constructor from raw ids.
    pub fn from_ids(ids: &[u32], type_tag: u8) -> Self {
        Simplex::new(ids.iter().copied().map(VertexId), type_tag)
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// The edge `{z_0, z_d}` that the next bisection splits.
    pub fn refinement_edge(&self) -> EdgeKey {
        EdgeKey::new(self.vertices[0], self.vertices[self.dim()])
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn position(&self, v: VertexId) -> Option<usize> {
        self.vertices.iter().position(|&w| w == v)
    }

    /// Key of the face opposite to the vertex at `local`.
    pub fn face_key(&self, local: usize) -> FaceKey {
        FaceKey::new(
            self.vertices
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != local)
                .map(|(_, &v)| v),
        )
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.vertices
            .iter()
            .tuple_combinations()
            .map(|(&a, &b)| EdgeKey::new(a, b))
    }

    pub fn sorted_vertices(&self) -> VertexList {
        let mut v = self.vertices.clone();
        v.sort_unstable();
        v
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]_{}", self.vertices.iter().join(", "), self.type_tag)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("mesh has no elements")]
    EmptyMesh,
    #[error("vertex {vertex} has {found} coordinates, expected {expected}")]
    DimensionMismatch {
        vertex: usize,
        expected: usize,
        found: usize,
    },
    #[error("element {element} has {found} vertices, expected {expected}")]
    WrongArity {
        element: usize,
        expected: usize,
        found: usize,
    },
    #[error("element {element} references missing vertex {vertex}")]
    InvalidVertex { element: usize, vertex: u32 },
    #[error("element {element} repeats a vertex")]
    DuplicateVertexInElement { element: usize },
    #[error("element {element} has type tag {tag}, must be below {dim}")]
    InvalidTypeTag { element: usize, tag: u8, dim: usize },
    #[error("face {face} is shared by {count} elements")]
    NonManifoldFace { face: FaceKey, count: usize },
    #[error("mesh is not conforming: {0}")]
    NonConformingMesh(String),
    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("element {0} is not a leaf of the mesh")]
    NotALeaf(usize),
    #[error("face {face} is not a face of {simplex}")]
    FaceNotInSimplex { face: FaceKey, simplex: Simplex },
    #[error("simplices {0} and {1} do not span the same vertex set")]
    VertexSetMismatch(Simplex, Simplex),
    #[error("simplices {0} and {1} do not share exactly one face")]
    NotNeighbors(Simplex, Simplex),
    #[error("face {0} lies on the boundary")]
    BoundaryFace(FaceKey),
    #[error("face {0} is not a face of the mesh")]
    UnknownFace(FaceKey),
    #[error("closure exceeded generation {limit} (reached {generation}); input is likely not weakly compatible")]
    NonTermination { generation: u32, limit: u32 },
    #[error("closure stopped without hanging vertices but the result is not conforming: {0}")]
    ClosureNotConforming(String),
    #[error("partition covers {found} vertices, mesh has {expected}")]
    PartitionIncomplete { expected: usize, found: usize },
    #[error("announced edge list has {found} entries, mesh has {expected} elements")]
    AnnouncedEdgesMismatch { expected: usize, found: usize },
    #[error("announced edge {edge} is not an edge of element {element}")]
    AnnouncedEdgeNotInElement { element: usize, edge: EdgeKey },
    #[error("element {element} is degenerate (zero volume)")]
    DegenerateElement { element: usize },
}

pub type Result<T, E = MeshError> = std::result::Result<T, E>;

/// Leaf simplices, vertex coordinates and the bisection registry.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    elements: Vec<Simplex>,
    generations: Vec<u32>,
    registry: HashMap<EdgeKey, VertexId>,
}

impl Mesh {
    /// Validates and builds a macro mesh: empty registry, generation 0.
    pub fn build<P: AsRef<[f64]>>(dim: usize, points: &[P], elements: Vec<Simplex>) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(MeshError::DimensionMismatch {
                    vertex: i,
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        let n = elements.len();
        Mesh::from_parts(dim, coords, elements, vec![0; n], HashMap::new())
    }

    /// Builds a mesh from raw parts, e.g. a refined mesh read back from disk.
    pub fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        elements: Vec<Simplex>,
        generations: Vec<u32>,
        registry: HashMap<EdgeKey, VertexId>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(MeshError::InvalidDimension(dim));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(MeshError::DimensionMismatch {
                vertex: coords.len() / dim,
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if elements.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        assert_eq!(elements.len(), generations.len(), "one generation per element");
        let nv = coords.len() / dim;
        for (i, el) in elements.iter().enumerate() {
            if el.vertices.len() != dim + 1 {
                return Err(MeshError::WrongArity {
                    element: i,
                    expected: dim + 1,
                    found: el.vertices.len(),
                });
            }
            if let Some(v) = el.vertices.iter().find(|v| v.index() >= nv) {
                return Err(MeshError::InvalidVertex {
                    element: i,
                    vertex: v.0,
                });
            }
            if el.sorted_vertices().windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::DuplicateVertexInElement { element: i });
            }
            if el.type_tag as usize >= dim {
                return Err(MeshError::InvalidTypeTag {
                    element: i,
                    tag: el.type_tag,
                    dim,
                });
            }
        }
        for (e, m) in &registry {
            for v in [e.low(), e.high(), *m] {
                if v.index() >= nv {
                    return Err(MeshError::InvalidVertex {
                        element: usize::MAX,
                        vertex: v.0,
                    });
                }
            }
        }
        let mesh = Mesh {
            dim,
            coords,
            elements,
            generations,
            registry,
        };
        // Rejects faces shared by more than two elements.
        mesh.face_adjacency()?;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn point(&self, v: VertexId) -> &[f64] {
        let i = v.index() * self.dim;
        &self.coords[i..i + self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn elements(&self) -> &[Simplex] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Simplex {
        &self.elements[i]
    }

    pub fn generation(&self, i: usize) -> u32 {
        self.generations[i]
    }

    pub fn generations(&self) -> &[u32] {
        &self.generations
    }

    /// Edge -> midpoint for every edge that has ever been bisected.
    pub fn registry(&self) -> &HashMap<EdgeKey, VertexId> {
        &self.registry
    }

    /// Registry entries sorted by edge, for deterministic output.
    pub fn sorted_registry(&self) -> Vec<(EdgeKey, VertexId)> {
        let mut r: Vec<_> = self.registry.iter().map(|(&e, &m)| (e, m)).collect();
        r.sort_unstable();
        r
    }

    pub fn midpoint_of(&self, edge: EdgeKey) -> Option<VertexId> {
        self.registry.get(&edge).copied()
    }

    pub(crate) fn add_vertex(&mut self, p: &[f64]) -> VertexId {
        debug_assert_eq!(p.len(), self.dim);
        let id = VertexId(self.num_vertices() as u32);
        self.coords.extend_from_slice(p);
        id
    }

    /// Returns the registered midpoint of `edge`, creating it if needed.
    pub(crate) fn midpoint(&mut self, edge: EdgeKey) -> VertexId {
        if let Some(&m) = self.registry.get(&edge) {
            return m;
        }
        let d = self.dim;
        let (a, b) = (edge.low().index() * d, edge.high().index() * d);
        let p: SmallVec<[f64; 4]> = (0..d)
            .map(|k| 0.5 * (self.coords[a + k] + self.coords[b + k]))
            .collect();
        let m = self.add_vertex(&p);
        self.registry.insert(edge, m);
        m
    }

    pub(crate) fn set_leaves(&mut self, elements: Vec<Simplex>, generations: Vec<u32>) {
        debug_assert_eq!(elements.len(), generations.len());
        self.elements = elements;
        self.generations = generations;
    }

    pub(crate) fn elements_mut(&mut self) -> &mut [Simplex] {
        &mut self.elements
    }

    pub(crate) fn take_leaves(&mut self) -> (Vec<Simplex>, Vec<u32>) {
        (
            std::mem::take(&mut self.elements),
            std::mem::take(&mut self.generations),
        )
    }

    /// The set of `i`-dimensional subsimplices of the leaves, as sorted id tuples.
    pub fn skeleton(&self, i: usize) -> Result<BTreeSet<VertexList>> {
        if i > self.dim {
            return Err(MeshError::IndexOutOfRange {
                index: i,
                max: self.dim,
            });
        }
        let mut out = BTreeSet::new();
        for el in &self.elements {
            let sorted = el.sorted_vertices();
            for combo in sorted.iter().copied().combinations(i + 1) {
                out.insert(combo.into_iter().collect());
            }
        }
        Ok(out)
    }

    /// Face-to-element incidences of the leaves.
    pub fn face_adjacency(&self) -> Result<FaceAdjacency> {
        FaceAdjacency::new(self)
    }

    /// Interior faces with their two incident leaves. Boundary faces are omitted.
    pub fn interior_faces(&self) -> Result<HashMap<FaceKey, (usize, usize)>> {
        let adj = self.face_adjacency()?;
        Ok(adj
            .faces()
            .iter()
            .filter_map(|f| f.second.map(|s| (f.key.clone(), (f.first.0 as usize, s.0 as usize))))
            .collect())
    }

    /// Number of leaves containing each vertex, indexed by vertex id.
    pub fn vertex_element_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.num_vertices()];
        for el in &self.elements {
            for v in &el.vertices {
                counts[v.index()] += 1;
            }
        }
        counts
    }

    /// Number of leaves containing each edge.
    pub fn edge_element_counts(&self) -> HashMap<EdgeKey, u32> {
        let mut counts = HashMap::new();
        for el in &self.elements {
            for e in el.edges() {
                *counts.entry(e).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// One entry per distinct leaf face: `(element, local face)` of each side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaceRecord {
    pub key: FaceKey,
    pub first: (u32, u8),
    pub second: Option<(u32, u8)>,
}

impl FaceRecord {
    pub fn is_interior(&self) -> bool {
        self.second.is_some()
    }
}

const NO_NEIGHBOR: u32 = u32::MAX;

/// Neighbor table: local face `i` of an element is the face opposite its
/// `i`-th vertex.
#[derive(Clone, Debug)]
pub struct FaceAdjacency {
    stride: usize,
    neighbors: Vec<u32>,
    face_of: Vec<u32>,
    faces: Vec<FaceRecord>,
}

impl FaceAdjacency {
    fn new(mesh: &Mesh) -> Result<Self> {
        let stride = mesh.dim + 1;
        let n = mesh.elements.len();
        let mut index: HashMap<FaceKey, u32> = HashMap::with_capacity(n * stride / 2 + 8);
        let mut faces: Vec<FaceRecord> = Vec::with_capacity(n * stride / 2 + 8);
        let mut face_of = vec![0u32; n * stride];
        let mut over_full: Option<FaceKey> = None;
        for (e, el) in mesh.elements.iter().enumerate() {
            for local in 0..stride {
                let key = el.face_key(local);
                let slot = (e as u32, local as u8);
                match index.get(&key) {
                    Some(&fi) => {
                        let rec = &mut faces[fi as usize];
                        if rec.second.is_some() {
                            over_full.get_or_insert(key);
                        } else {
                            rec.second = Some(slot);
                        }
                        face_of[e * stride + local] = fi;
                    }
                    None => {
                        let fi = faces.len() as u32;
                        index.insert(key.clone(), fi);
                        faces.push(FaceRecord {
                            key,
                            first: slot,
                            second: None,
                        });
                        face_of[e * stride + local] = fi;
                    }
                }
            }
        }
        if let Some(face) = over_full {
            let count = mesh
                .elements
                .iter()
                .filter(|el| face.vertices().iter().all(|&v| el.contains(v)))
                .count();
            return Err(MeshError::NonManifoldFace { face, count });
        }
        let mut neighbors = vec![NO_NEIGHBOR; n * stride];
        for rec in &faces {
            if let Some(s) = rec.second {
                let f = rec.first;
                neighbors[f.0 as usize * stride + f.1 as usize] = s.0;
                neighbors[s.0 as usize * stride + s.1 as usize] = f.0;
            }
        }
        Ok(FaceAdjacency {
            stride,
            neighbors,
            face_of,
            faces,
        })
    }

    /// The element across local face `local` of `element`, if any.
    pub fn neighbor(&self, element: usize, local: usize) -> Option<usize> {
        let n = self.neighbors[element * self.stride + local];
        (n != NO_NEIGHBOR).then_some(n as usize)
    }

    /// Index into [`faces`](Self::faces) of local face `local` of `element`.
    pub fn face_index(&self, element: usize, local: usize) -> usize {
        self.face_of[element * self.stride + local] as usize
    }

    /// Distinct faces in first-seen order.
    pub fn faces(&self) -> &[FaceRecord] {
        &self.faces
    }

    pub fn interior(&self) -> impl Iterator<Item = &FaceRecord> {
        self.faces.iter().filter(|f| f.is_interior())
    }

    pub fn boundary(&self) -> impl Iterator<Item = &FaceRecord> {
        self.faces.iter().filter(|f| !f.is_interior())
    }

    pub fn num_interior(&self) -> usize {
        self.interior().count()
    }
}

/// Structured Kuhn triangulation of the unit cube `[0, 1]^d`.
///
/// Each of the `cells^d` subcubes is split into `d!` simplices
/// `[c, c + e_p0, c + e_p0 + e_p1, ..., c + 1]`, one per axis permutation `p`,
/// so every vertex list runs monotonically along the cell diagonal. All
/// simplices get type 0.
pub fn generate_kuhn_grid(dim: usize, cells: usize) -> Result<Mesh> {
    if dim < 2 {
        return Err(MeshError::InvalidDimension(dim));
    }
    if cells == 0 {
        return Err(MeshError::EmptyMesh);
    }
    let side = cells + 1;
    let nv = side.pow(dim as u32);
    let h = 1.0 / cells as f64;
    let mut coords = Vec::with_capacity(nv * dim);
    for idx in 0..nv {
        let mut r = idx;
        for _ in 0..dim {
            coords.push((r % side) as f64 * h);
            r /= side;
        }
    }
    let strides: Vec<usize> = (0..dim).map(|k| side.pow(k as u32)).collect();
    let perms: Vec<Vec<usize>> = (0..dim).permutations(dim).collect();
    let mut elements = Vec::with_capacity(cells.pow(dim as u32) * perms.len());
    for cell in 0..cells.pow(dim as u32) {
        let mut r = cell;
        let mut base = 0;
        for s in &strides {
            base += (r % cells) * s;
            r /= cells;
        }
        for p in &perms {
            let mut v = base;
            let mut verts = VertexList::new();
            verts.push(VertexId(v as u32));
            for &axis in p {
                v += strides[axis];
                verts.push(VertexId(v as u32));
            }
            elements.push(Simplex {
                vertices: verts,
                type_tag: 0,
            });
        }
    }
    let n = elements.len();
    Ok(Mesh {
        dim,
        coords,
        elements,
        generations: vec![0; n],
        registry: HashMap::new(),
    })
}
