//! Vertex relabeling that turns an arbitrary conforming mesh into a weakly
//! compatible one.
//!
//! The vertices are split into two classes `V0` and `V1` and put into one
//! global order. Each element is then reordered as
//! `[z_0, z_1..z_t, z_{t+1}..z_d]` with `z_1..z_t` its `V1` vertices and the
//! rest its `V0` vertices, both ascending, and gets type `t`.

use std::collections::VecDeque;

use smallvec::SmallVec;

use crate::mesh::{EdgeKey, FaceAdjacency, Mesh, MeshError, Result, Simplex, VertexId, VertexList};
use crate::order_list::OrderList;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexClass {
    V0,
    V1,
}

/// Class of every vertex, indexed by vertex id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Membership(Vec<VertexClass>);

impl Membership {
    pub fn new(classes: Vec<VertexClass>) -> Self {
        Membership(classes)
    }

    pub fn all_v0(num_vertices: usize) -> Self {
        Membership(vec![VertexClass::V0; num_vertices])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn class(&self, v: VertexId) -> VertexClass {
        self.0[v.index()]
    }

    pub fn is_v1(&self, v: VertexId) -> bool {
        self.0[v.index()] == VertexClass::V1
    }

    pub fn classes(&self) -> &[VertexClass] {
        &self.0
    }

    pub fn v0_count(&self) -> usize {
        self.0.iter().filter(|&&c| c == VertexClass::V0).count()
    }

    pub fn v1_count(&self) -> usize {
        self.0.len() - self.v0_count()
    }

    fn demote(&mut self, v: VertexId) {
        self.0[v.index()] = VertexClass::V0;
    }
}

/// Membership plus one global order of all vertices. The orders on `V0` and
/// `V1` are its restrictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexPartition {
    membership: Membership,
    position: Vec<u32>,
}

impl VertexPartition {
    /// `order` must list every vertex exactly once.
    pub fn new(membership: Membership, order: &[VertexId]) -> Result<Self> {
        let n = membership.len();
        let mut position = vec![u32::MAX; n];
        for (i, v) in order.iter().enumerate() {
            if v.index() >= n || position[v.index()] != u32::MAX {
                return Err(MeshError::PartitionIncomplete {
                    expected: n,
                    found: order.len(),
                });
            }
            position[v.index()] = i as u32;
        }
        if order.len() != n {
            return Err(MeshError::PartitionIncomplete {
                expected: n,
                found: order.len(),
            });
        }
        Ok(VertexPartition { membership, position })
    }

    pub fn membership(&self) -> &Membership {
        &self.membership
    }

    /// Position of `v` in the global order.
    pub fn position(&self, v: VertexId) -> u32 {
        self.position[v.index()]
    }

    pub fn global_order(&self) -> Vec<VertexId> {
        let mut order = vec![VertexId(0); self.position.len()];
        for (v, &p) in self.position.iter().enumerate() {
            order[p as usize] = VertexId(v as u32);
        }
        order
    }

    fn class_ranks(&self, class: VertexClass) -> Vec<Option<u32>> {
        let mut ranks = vec![None; self.position.len()];
        let mut next = 0;
        for v in self.global_order() {
            if self.membership.class(v) == class {
                ranks[v.index()] = Some(next);
                next += 1;
            }
        }
        ranks
    }

    /// Rank among `V0` vertices, `None` for `V1`.
    pub fn rank0(&self) -> Vec<Option<u32>> {
        self.class_ranks(VertexClass::V0)
    }

    /// Rank among `V1` vertices, `None` for `V0`.
    pub fn rank1(&self) -> Vec<Option<u32>> {
        self.class_ranks(VertexClass::V1)
    }
}

/// Reorders one element by class and key. Returns the ordering, its type and
/// whether the element is degenerate (`d` or `d + 1` vertices in `V1`).
fn labeled_order(
    vertices: &[VertexId],
    is_v1: impl Fn(VertexId) -> bool,
    key: impl Fn(VertexId) -> u64,
) -> (VertexList, u8, bool) {
    let d = vertices.len() - 1;
    let mut v0: VertexList = vertices.iter().copied().filter(|&v| !is_v1(v)).collect();
    let mut v1: VertexList = vertices.iter().copied().filter(|&v| is_v1(v)).collect();
    v0.sort_by_key(|&v| key(v));
    v1.sort_by_key(|&v| key(v));
    if v0.is_empty() {
        return (v1, 0, true);
    }
    let mut out = VertexList::new();
    out.push(v0[0]);
    out.extend(v1.iter().copied());
    out.extend(v0[1..].iter().copied());
    if v1.len() >= d {
        (out, 0, true)
    } else {
        (out, v1.len() as u8, false)
    }
}

fn labeled_edge(vertices: &[VertexId], is_v1: impl Fn(VertexId) -> bool, key: impl Fn(VertexId) -> u64) -> EdgeKey {
    let (order, _, _) = labeled_order(vertices, is_v1, key);
    EdgeKey::new(order[0], order[order.len() - 1])
}

/// Result of [`apply_labeling`].
#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    pub mesh: Mesh,
    /// Elements with `d` or `d + 1` vertices in `V1`; they fall back to type 0.
    pub degenerate: Vec<usize>,
}

/// Reorders and retypes every element from the partition.
pub fn apply_labeling(mesh: &Mesh, partition: &VertexPartition) -> Result<Labeling> {
    if partition.membership.len() != mesh.num_vertices() {
        return Err(MeshError::PartitionIncomplete {
            expected: mesh.num_vertices(),
            found: partition.membership.len(),
        });
    }
    let mut out = mesh.clone();
    let mut degenerate = Vec::new();
    for (i, el) in out.elements_mut().iter_mut().enumerate() {
        let (vertices, t, bad) = labeled_order(
            &el.vertices,
            |v| partition.membership.is_v1(v),
            |v| partition.position(v) as u64,
        );
        if bad {
            degenerate.push(i);
        }
        *el = Simplex { vertices, type_tag: t };
    }
    Ok(Labeling { mesh: out, degenerate })
}

/// All vertices in `V0`: every element becomes type 0.
pub fn partition_ot0(mesh: &Mesh) -> Membership {
    Membership::all_v0(mesh.num_vertices())
}

fn squared_length(mesh: &Mesh, e: EdgeKey) -> f64 {
    let (a, b) = (mesh.point(e.low()), mesh.point(e.high()));
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Longest edge of an element; exact ties go to the smallest key.
pub fn longest_edge(mesh: &Mesh, element: usize) -> EdgeKey {
    let mut best: Option<(f64, EdgeKey)> = None;
    for e in mesh.element(element).edges() {
        let l = squared_length(mesh, e);
        best = match best {
            Some((bl, be)) if bl > l || (bl == l && be < e) => Some((bl, be)),
            _ => Some((l, e)),
        };
    }
    best.expect("element has edges").1
}

/// `V0` = vertices on at least `threshold` per-element longest edges.
pub fn partition_ile(mesh: &Mesh, threshold: u32) -> Membership {
    let mut counts = vec![0u32; mesh.num_vertices()];
    for i in 0..mesh.num_elements() {
        let e = longest_edge(mesh, i);
        counts[e.low().index()] += 1;
        counts[e.high().index()] += 1;
    }
    Membership(
        counts
            .into_iter()
            .map(|c| if c >= threshold { VertexClass::V0 } else { VertexClass::V1 })
            .collect(),
    )
}

/// `V1` = vertices in at most `threshold` elements.
pub fn partition_lae(mesh: &Mesh, threshold: u32) -> Membership {
    Membership(
        mesh.vertex_element_counts()
            .into_iter()
            .map(|c| if c <= threshold { VertexClass::V1 } else { VertexClass::V0 })
            .collect(),
    )
}

/// The edge each element asks to be bisected first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnouncedEdges(Vec<EdgeKey>);

impl AnnouncedEdges {
    pub fn new(mesh: &Mesh, edges: Vec<EdgeKey>) -> Result<Self> {
        if edges.len() != mesh.num_elements() {
            return Err(MeshError::AnnouncedEdgesMismatch {
                expected: mesh.num_elements(),
                found: edges.len(),
            });
        }
        for (i, e) in edges.iter().enumerate() {
            let el = mesh.element(i);
            if !el.contains(e.low()) || !el.contains(e.high()) {
                return Err(MeshError::AnnouncedEdgeNotInElement {
                    element: i,
                    edge: *e,
                });
            }
        }
        Ok(AnnouncedEdges(edges))
    }

    /// Longest edge of every element.
    pub fn longest_edges(mesh: &Mesh) -> Self {
        AnnouncedEdges((0..mesh.num_elements()).map(|i| longest_edge(mesh, i)).collect())
    }

    pub fn get(&self, element: usize) -> EdgeKey {
        self.0[element]
    }

    pub fn edges(&self) -> &[EdgeKey] {
        &self.0
    }
}

struct Traversal<'a> {
    mesh: &'a Mesh,
    adj: FaceAdjacency,
    membership: &'a Membership,
    announced: Option<&'a AnnouncedEdges>,
    list: OrderList,
    treated: Vec<bool>,
    queue: VecDeque<(u32, u8, bool)>,
}

impl Traversal<'_> {
    fn edge_of(&self, element: usize) -> EdgeKey {
        labeled_edge(
            &self.mesh.element(element).vertices,
            |v| self.membership.is_v1(v),
            |v| self.list.key(v.index()),
        )
    }

    fn place_seed(&mut self, element: usize) {
        let el = self.mesh.element(element);
        let mut order: VertexList = el.vertices.clone();
        if let Some(ann) = self.announced {
            // Reverse stored order with the announced edge moved to the ends.
            // On Kuhn grids, whose elements are stored along the cell
            // diagonal, this seed reproduces the standard ordering.
            let e = ann.get(element);
            let (pa, pb) = (el.position(e.low()).unwrap(), el.position(e.high()).unwrap());
            let (a, b) = if pa > pb { (e.low(), e.high()) } else { (e.high(), e.low()) };
            order.clear();
            order.push(a);
            order.extend(el.vertices.iter().rev().copied().filter(|&v| v != a && v != b));
            order.push(b);
        }
        for v in order {
            if !self.list.is_placed(v.index()) {
                self.list.push_back(v.index());
            }
        }
        self.treated[element] = true;
        self.push_faces(element);
    }

    fn push_faces(&mut self, element: usize) {
        let d = self.mesh.dim();
        let refedge = self.announced.map(|_| self.edge_of(element));
        for local in 0..=d {
            let Some(nb) = self.adj.neighbor(element, local) else { continue };
            if self.treated[nb] {
                continue;
            }
            let item = (element as u32, local as u8, false);
            match refedge {
                None => self.queue.push_back(item),
                Some(e) => {
                    // the face opposite `local` contains e iff that vertex is not on e
                    if e.contains(self.mesh.element(element).vertices[local]) {
                        self.queue.push_back((item.0, item.1, true));
                    } else {
                        self.queue.push_front(item);
                    }
                }
            }
        }
    }

    fn expand(&mut self, element: usize, local: usize, no_ref_edge: bool) {
        let Some(nb) = self.adj.neighbor(element, local) else { return };
        if self.treated[nb] {
            return;
        }
        let mesh = self.mesh;
        let el = mesh.element(element);
        let v = el.vertices[local];
        let other = mesh.element(nb);
        let vp = *other
            .vertices
            .iter()
            .find(|&&w| !el.contains(w))
            .expect("neighbors differ in one vertex");
        if !self.list.is_placed(vp.index()) {
            if no_ref_edge {
                let want = self.announced.expect("flag only set with announcements").get(nb);
                let realizes = |hyp: u64| {
                    labeled_edge(
                        &other.vertices,
                        |w| self.membership.is_v1(w),
                        |w| if w == vp { hyp } else { self.list.key(w.index()) },
                    ) == want
                };
                let first = *el.vertices.iter().min_by_key(|w| self.list.key(w.index())).unwrap();
                let last = *el.vertices.iter().max_by_key(|w| self.list.key(w.index())).unwrap();
                if !realizes(u64::MAX) && realizes(0) {
                    self.list.insert_before(first.index(), vp.index());
                } else {
                    self.list.insert_after(last.index(), vp.index());
                }
            } else {
                self.list.insert_after(v.index(), vp.index());
            }
        }
        self.treated[nb] = true;
        self.push_faces(nb);
    }

    fn run(mut self) -> Vec<VertexId> {
        for seed in 0..self.mesh.num_elements() {
            if self.treated[seed] {
                continue;
            }
            self.place_seed(seed);
            while let Some((e, local, flag)) = self.queue.pop_front() {
                self.expand(e as usize, local as usize, flag);
            }
        }
        for v in 0..self.mesh.num_vertices() {
            if !self.list.is_placed(v) {
                self.list.push_back(v);
            }
        }
        debug_assert_eq!(self.list.len(), self.mesh.num_vertices());
        self.list.to_vec().into_iter().map(|v| VertexId(v as u32)).collect()
    }
}

fn traverse(mesh: &Mesh, membership: &Membership, announced: Option<&AnnouncedEdges>) -> Result<VertexPartition> {
    if membership.len() != mesh.num_vertices() {
        return Err(MeshError::PartitionIncomplete {
            expected: mesh.num_vertices(),
            found: membership.len(),
        });
    }
    let t = Traversal {
        mesh,
        adj: mesh.face_adjacency()?,
        membership,
        announced,
        list: OrderList::new(mesh.num_vertices()),
        treated: vec![false; mesh.num_elements()],
        queue: VecDeque::new(),
    };
    let order = t.run();
    VertexPartition::new(membership.clone(), &order)
}

/// Successive reflected neighbors: breadth first from element 0, each new
/// vertex goes directly after the vertex it replaces. Disconnected parts are
/// seeded from their lowest element; unused vertices go last by id.
pub fn order_srn(mesh: &Mesh, membership: &Membership) -> Result<VertexPartition> {
    traverse(mesh, membership, None)
}

/// Like [`order_srn`], but faces containing the current element's refinement
/// edge are expanded first, and across the other faces the new vertex goes
/// before the element's first or after its last vertex, whichever yields the
/// neighbor's announced edge.
pub fn order_srn2(mesh: &Mesh, membership: &Membership, announced: &AnnouncedEdges) -> Result<VertexPartition> {
    if announced.edges().len() != mesh.num_elements() {
        return Err(MeshError::AnnouncedEdgesMismatch {
            expected: mesh.num_elements(),
            found: announced.edges().len(),
        });
    }
    traverse(mesh, membership, Some(announced))
}

/// Moves `V1` vertices of degenerate elements to `V0`, lowest position
/// first, until every element has at most `d - 1` vertices in `V1`.
/// Returns the moved vertices.
pub fn repair_degenerate(mesh: &Mesh, partition: &mut VertexPartition) -> Vec<VertexId> {
    let d = mesh.dim();
    let mut moved = Vec::new();
    for el in mesh.elements() {
        let mut v1: SmallVec<[VertexId; 5]> = el
            .vertices
            .iter()
            .copied()
            .filter(|&v| partition.membership.is_v1(v))
            .collect();
        if v1.len() < d {
            continue;
        }
        v1.sort_by_key(|&v| partition.position(v));
        for &v in &v1[..v1.len() - (d - 1)] {
            partition.membership.demote(v);
            moved.push(v);
        }
    }
    moved
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetStrategy {
    Ot0,
    Ile(u32),
    Lae(u32),
}

impl SetStrategy {
    pub fn membership(self, mesh: &Mesh) -> Membership {
        match self {
            SetStrategy::Ot0 => partition_ot0(mesh),
            SetStrategy::Ile(c) => partition_ile(mesh, c),
            SetStrategy::Lae(c) => partition_lae(mesh, c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderStrategy {
    Srn,
    Srn2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelabelOutcome {
    pub mesh: Mesh,
    pub partition: VertexPartition,
    /// Vertices moved from `V1` to `V0` by the degenerate-element repair.
    pub demoted: Vec<VertexId>,
}

/// Full pipeline: partition, order, repair degenerate elements, relabel.
/// `announced` defaults to the longest edges for SRN2.
pub fn relabel(
    mesh: &Mesh,
    sets: SetStrategy,
    order: OrderStrategy,
    announced: Option<&AnnouncedEdges>,
) -> Result<RelabelOutcome> {
    let mut membership = sets.membership(mesh);
    let default_edges;
    let announced = match (order, announced) {
        (OrderStrategy::Srn, _) => None,
        (OrderStrategy::Srn2, Some(a)) => Some(a),
        (OrderStrategy::Srn2, None) => {
            default_edges = AnnouncedEdges::longest_edges(mesh);
            Some(&default_edges)
        }
    };
    let mut demoted = Vec::new();
    loop {
        let mut partition = match announced {
            None => order_srn(mesh, &membership)?,
            Some(a) => order_srn2(mesh, &membership, a)?,
        };
        let moved = repair_degenerate(mesh, &mut partition);
        if moved.is_empty() {
            let labeled = apply_labeling(mesh, &partition)?;
            debug_assert!(labeled.degenerate.is_empty());
            return Ok(RelabelOutcome {
                mesh: labeled.mesh,
                partition,
                demoted,
            });
        }
        demoted.extend(moved);
        membership = partition.membership;
    }
}
