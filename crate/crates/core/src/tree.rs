//! Symbolic refinement trees.
//!
//! Midpoints created by repeated bisection are represented exactly as dyadic
//! barycentric combinations of the original vertices ([`Label`]), so two
//! refinement histories can be compared without any geometry.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use itertools::Itertools;
use smallvec::SmallVec;

use crate::mesh::{EdgeKey, FaceKey, MeshError, Result, Simplex, VertexId};

/// Applies one bisection to an ordered vertex list of type `t`.
///
/// Returns the two children and their common type `(t + 1) mod d`.
pub fn bisect_ordered<V: Clone>(vertices: &[V], t: usize, midpoint: V) -> ([SmallVec<[V; 5]>; 2], usize) {
    let d = vertices.len() - 1;
    let mut c0 = SmallVec::with_capacity(d + 1);
    c0.push(vertices[0].clone());
    c0.push(midpoint.clone());
    c0.extend(vertices[1..d].iter().cloned());

    let mut c1 = SmallVec::with_capacity(d + 1);
    c1.push(vertices[d].clone());
    c1.push(midpoint);
    c1.extend(vertices[1..=t].iter().cloned());
    c1.extend(vertices[t + 1..d].iter().rev().cloned());
    ([c0, c1], (t + 1) % d)
}

/// A point `sum(n_i * v_i) / 2^scale` with the `v_i` original vertices.
///
/// Kept in lowest terms, so equal points have equal labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    scale: u8,
    terms: SmallVec<[(VertexId, u32); 4]>,
}

impl Label {
    pub fn vertex(v: VertexId) -> Self {
        let mut terms = SmallVec::new();
        terms.push((v, 1));
        Label { scale: 0, terms }
    }

    pub fn midpoint(a: &Label, b: &Label) -> Label {
        let top = a.scale.max(b.scale);
        let scale = top + 1;
        let (sa, sb) = (top - a.scale, top - b.scale);
        let mut terms: SmallVec<[(VertexId, u32); 4]> = SmallVec::new();
        for item in a
            .terms
            .iter()
            .map(|&(v, n)| (v, n << sa))
            .merge_join_by(b.terms.iter().map(|&(v, n)| (v, n << sb)), |x, y| x.0.cmp(&y.0))
        {
            terms.push(match item {
                itertools::EitherOrBoth::Both(x, y) => (x.0, x.1 + y.1),
                itertools::EitherOrBoth::Left(x) | itertools::EitherOrBoth::Right(x) => x,
            });
        }
        let mut label = Label { scale, terms };
        while label.scale > 0 && label.terms.iter().all(|&(_, n)| n % 2 == 0) {
            label.scale -= 1;
            label.terms.iter_mut().for_each(|t| t.1 /= 2);
        }
        label
    }

    /// The original vertex this label denotes, if it is not a midpoint.
    pub fn as_vertex(&self) -> Option<VertexId> {
        (self.scale == 0).then(|| self.terms[0].0)
    }

    /// Original vertices with nonzero weight.
    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.terms.iter().map(|t| t.0)
    }

    pub fn map_vertices(&self, f: impl Fn(VertexId) -> VertexId) -> Label {
        let mut terms: SmallVec<[(VertexId, u32); 4]> =
            self.terms.iter().map(|&(v, n)| (f(v), n)).collect();
        terms.sort_unstable();
        Label {
            scale: self.scale,
            terms,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = self.as_vertex() {
            return write!(f, "{v}");
        }
        let sum = self
            .terms
            .iter()
            .map(|&(v, n)| if n == 1 { format!("{v}") } else { format!("{n}*{v}") })
            .join("+");
        write!(f, "({sum})/{}", 1u64 << self.scale)
    }
}

/// An unordered pair of labels in canonical (ascending) order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelEdge(Label, Label);

impl LabelEdge {
    pub fn new(a: Label, b: Label) -> Self {
        if a <= b {
            LabelEdge(a, b)
        } else {
            LabelEdge(b, a)
        }
    }

    pub fn endpoints(&self) -> (&Label, &Label) {
        (&self.0, &self.1)
    }

    /// The plain edge key if both endpoints are original vertices.
    pub fn as_edge_key(&self) -> Option<EdgeKey> {
        Some(EdgeKey::new(self.0.as_vertex()?, self.1.as_vertex()?))
    }

    fn map_vertices(&self, f: &impl Fn(VertexId) -> VertexId) -> LabelEdge {
        LabelEdge::new(self.0.map_vertices(f), self.1.map_vertices(f))
    }
}

impl From<EdgeKey> for LabelEdge {
    fn from(e: EdgeKey) -> Self {
        LabelEdge(Label::vertex(e.low()), Label::vertex(e.high()))
    }
}

impl fmt::Display for LabelEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// Binary tree of refinement edges.
///
/// The two children of a node are the subtrees of the two children of the
/// bisected simplex. Their order carries no meaning, see [`EdgeTree::equivalent`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeTree {
    pub edge: LabelEdge,
    pub children: Option<Box<[EdgeTree; 2]>>,
}

impl EdgeTree {
    pub fn leaf(edge: LabelEdge) -> Self {
        EdgeTree { edge, children: None }
    }

    /// Number of levels; a single node has depth 1.
    pub fn depth(&self) -> usize {
        1 + self
            .children
            .as_ref()
            .map_or(0, |c| c[0].depth().max(c[1].depth()))
    }

    /// Edges level by level, left to right.
    pub fn levels(&self) -> Vec<Vec<LabelEdge>> {
        let mut out = Vec::new();
        let mut current = vec![self];
        while !current.is_empty() {
            out.push(current.iter().map(|n| n.edge.clone()).collect());
            current = current
                .iter()
                .filter_map(|n| n.children.as_deref())
                .flat_map(|c| c.iter())
                .collect();
        }
        out
    }

    /// All edges in preorder.
    pub fn edges(&self) -> Vec<&LabelEdge> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(&n.edge);
            if let Some(c) = &n.children {
                stack.push(&c[1]);
                stack.push(&c[0]);
            }
        }
        out
    }

    /// Equality as unordered trees: the children of each node may be swapped.
    pub fn equivalent(&self, other: &EdgeTree) -> bool {
        if self.edge != other.edge {
            return false;
        }
        match (&self.children, &other.children) {
            (None, None) => true,
            (Some(a), Some(b)) => {
                (a[0].equivalent(&b[0]) && a[1].equivalent(&b[1]))
                    || (a[0].equivalent(&b[1]) && a[1].equivalent(&b[0]))
            }
            _ => false,
        }
    }

    pub fn map_vertices(&self, f: &impl Fn(VertexId) -> VertexId) -> EdgeTree {
        EdgeTree {
            edge: self.edge.map_vertices(f),
            children: self
                .children
                .as_ref()
                .map(|c| Box::new([c[0].map_vertices(f), c[1].map_vertices(f)])),
        }
    }
}

/// Refinement tree of an ordered label list of type `t`, `depth` levels deep.
pub fn label_tree(vertices: &[Label], t: usize, depth: usize) -> EdgeTree {
    let d = vertices.len() - 1;
    let (z0, zd) = (&vertices[0], &vertices[d]);
    let edge = LabelEdge::new(z0.clone(), zd.clone());
    if depth <= 1 {
        return EdgeTree::leaf(edge);
    }
    let m = Label::midpoint(z0, zd);
    let ([c0, c1], tc) = bisect_ordered(vertices, t, m);
    EdgeTree {
        edge,
        children: Some(Box::new([
            label_tree(&c0, tc, depth - 1),
            label_tree(&c1, tc, depth - 1),
        ])),
    }
}

fn labels_of(simplex: &Simplex) -> SmallVec<[Label; 5]> {
    simplex.vertices.iter().map(|&v| Label::vertex(v)).collect()
}

/// Refinement tree of `depth` uniform bisections of a single simplex.
/// A depth of 0 is treated as 1.
pub fn refinement_tree(simplex: &Simplex, depth: usize) -> EdgeTree {
    label_tree(&labels_of(simplex), simplex.type_tag as usize, depth)
}

/// NVB-equivalence: equal refinement trees over `d` levels.
pub fn nvb_equivalent(a: &Simplex, b: &Simplex) -> Result<bool> {
    if a.sorted_vertices() != b.sorted_vertices() {
        return Err(MeshError::VertexSetMismatch(a.clone(), b.clone()));
    }
    let d = a.dim();
    Ok(refinement_tree(a, d).equivalent(&refinement_tree(b, d)))
}

fn check_face(simplex: &Simplex, face: &FaceKey) -> Result<usize> {
    let omitted: SmallVec<[usize; 2]> = (0..simplex.vertices.len())
        .filter(|&i| !face.contains(simplex.vertices[i]))
        .collect();
    let all_in = face.vertices().iter().all(|&v| simplex.contains(v));
    if face.len() != simplex.dim() || omitted.len() != 1 || !all_in {
        return Err(MeshError::FaceNotInSimplex {
            face: face.clone(),
            simplex: simplex.clone(),
        });
    }
    Ok(omitted[0])
}

// Parent bisections allowed between two face bisections before giving up.
fn parent_level_cap(d: usize) -> usize {
    4 * d + 4
}

fn face_tree_rec(vertices: &[Label], t: usize, piece: &[Label], levels: usize) -> EdgeTree {
    let d = vertices.len() - 1;
    let mut verts: SmallVec<[Label; 5]> = vertices.iter().cloned().collect();
    let mut t = t;
    for _ in 0..parent_level_cap(d) {
        let (z0, zd) = (&verts[0], &verts[d]);
        let m = Label::midpoint(z0, zd);
        let has0 = piece.contains(z0);
        let hasd = piece.contains(zd);
        if has0 && hasd {
            let edge = LabelEdge::new(z0.clone(), zd.clone());
            if levels <= 1 {
                return EdgeTree::leaf(edge);
            }
            let p0: SmallVec<[Label; 4]> =
                piece.iter().map(|l| if l == zd { m.clone() } else { l.clone() }).collect();
            let p1: SmallVec<[Label; 4]> =
                piece.iter().map(|l| if l == z0 { m.clone() } else { l.clone() }).collect();
            let ([c0, c1], tc) = bisect_ordered(&verts, t, m);
            return EdgeTree {
                edge,
                children: Some(Box::new([
                    face_tree_rec(&c0, tc, &p0, levels - 1),
                    face_tree_rec(&c1, tc, &p1, levels - 1),
                ])),
            };
        }
        // The piece survives whole in the child that keeps the endpoint it owns.
        let ([c0, c1], tc) = bisect_ordered(&verts, t, m);
        verts = if hasd { c1 } else { c0 };
        t = tc;
    }
    panic!("face refinement did not split within {} parent levels", parent_level_cap(d));
}

/// Refinement induced on a face of `simplex` by uniform refinement of the
/// simplex, as a tree of `d - 1` levels of face bisections.
pub fn induced_face_tree(simplex: &Simplex, face: &FaceKey) -> Result<EdgeTree> {
    check_face(simplex, face)?;
    let labels = labels_of(simplex);
    let piece: SmallVec<[Label; 4]> = face.vertices().iter().map(|&v| Label::vertex(v)).collect();
    Ok(face_tree_rec(
        &labels,
        simplex.type_tag as usize,
        &piece,
        simplex.dim() - 1,
    ))
}

/// Induced type of a face: how many of the positions `1..=t` it contains.
pub fn face_trace_type(simplex: &Simplex, face: &FaceKey) -> Result<usize> {
    check_face(simplex, face)?;
    let t = simplex.type_tag as usize;
    Ok(simplex.vertices[1..=t].iter().filter(|&&v| face.contains(v)).count())
}

type TemplateKey = (usize, usize, usize);

fn template_cache() -> &'static RwLock<HashMap<TemplateKey, Arc<EdgeTree>>> {
    static CACHE: OnceLock<RwLock<HashMap<TemplateKey, Arc<EdgeTree>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Induced face tree for the face opposite position `omitted`, with vertex
/// ids standing for positions. Cached per `(d, t, omitted)`.
pub(crate) fn face_template(d: usize, t: usize, omitted: usize) -> Arc<EdgeTree> {
    let key = (d, t, omitted);
    if let Some(tree) = template_cache().read().unwrap().get(&key) {
        return tree.clone();
    }
    let labels: SmallVec<[Label; 5]> = (0..=d).map(|i| Label::vertex(VertexId(i as u32))).collect();
    let piece: SmallVec<[Label; 4]> = (0..=d)
        .filter(|&i| i != omitted)
        .map(|i| Label::vertex(VertexId(i as u32)))
        .collect();
    let tree = Arc::new(face_tree_rec(&labels, t, &piece, d - 1));
    template_cache().write().unwrap().insert(key, tree.clone());
    tree
}

/// Same result as [`induced_face_tree`], through the position template cache.
pub(crate) fn induced_face_tree_at(simplex: &Simplex, omitted: usize) -> EdgeTree {
    let template = face_template(simplex.dim(), simplex.type_tag as usize, omitted);
    template.map_vertices(&|p: VertexId| simplex.vertices[p.index()])
}

pub(crate) type Perm = SmallVec<[u8; 8]>;

/// Reorderings `p` of `[0, ..., d]` whose type-`t` refinement tree is
/// equivalent to the identity ordering's. They form a group.
pub(crate) struct PermTable {
    pub(crate) perms: Vec<Perm>,
}

impl PermTable {
    pub(crate) fn contains(&self, p: &[u8]) -> bool {
        self.perms.iter().any(|q| q.as_slice() == p)
    }
}

type PermCache = RwLock<HashMap<(usize, usize), Arc<PermTable>>>;

fn perm_cache() -> &'static PermCache {
    static CACHE: OnceLock<PermCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

pub(crate) fn equivalent_orderings(d: usize, t: usize) -> Arc<PermTable> {
    if let Some(tab) = perm_cache().read().unwrap().get(&(d, t)) {
        return tab.clone();
    }
    let ids: SmallVec<[Label; 5]> = (0..=d).map(|i| Label::vertex(VertexId(i as u32))).collect();
    let reference = label_tree(&ids, t, d);
    let mut perms = Vec::new();
    // An equivalent ordering keeps the root edge {0, d}.
    for (first, last) in [(0, d), (d, 0)] {
        for middle in (1..d).permutations(d - 1) {
            let mut p = Perm::new();
            p.push(first as u8);
            p.extend(middle.iter().map(|&i| i as u8));
            p.push(last as u8);
            let labels: SmallVec<[Label; 5]> = p.iter().map(|&i| ids[i as usize].clone()).collect();
            if label_tree(&labels, t, d).equivalent(&reference) {
                perms.push(p);
            }
        }
    }
    let table = Arc::new(PermTable {
        perms,
    });
    perm_cache().write().unwrap().insert((d, t), table.clone());
    table
}

/// Reflected-neighbor test on ordered lists of any vertex type.
///
/// Returns `None` unless the lists differ in exactly one vertex.
pub(crate) fn reflected_lists<V: PartialEq>(a: &[V], ta: usize, b: &[V], tb: usize) -> Option<bool> {
    if a.len() != b.len() {
        return None;
    }
    let only_a: SmallVec<[usize; 2]> = (0..a.len()).filter(|&i| !b.contains(&a[i])).collect();
    let only_b: SmallVec<[usize; 2]> = (0..b.len()).filter(|&i| !a.contains(&b[i])).collect();
    if only_a.len() != 1 || only_b.len() != 1 {
        return None;
    }
    if ta != tb {
        return Some(false);
    }
    // a with u replaced by v is b reordered by some p; reflected iff p keeps
    // the refinement tree, since equivalent orderings form a group.
    let (iu, iv) = (only_a[0], only_b[0]);
    let p: Option<Perm> = (0..a.len())
        .map(|i| {
            let x = if i == iu { &b[iv] } else { &a[i] };
            b.iter().position(|y| y == x).map(|j| j as u8)
        })
        .collect();
    let table = equivalent_orderings(a.len() - 1, ta);
    Some(table.contains(&p?))
}
