//! Mesh-level bisection: single elements, uniform passes, the iterative
//! conforming closure and the type-0 completion.

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::mesh::{EdgeKey, FaceAdjacency, Mesh, MeshError, Result, Simplex, VertexId};
use crate::tree::bisect_ordered;

fn split(mesh: &mut Mesh, s: &Simplex) -> [Simplex; 2] {
    let m = mesh.midpoint(s.refinement_edge());
    let ([c0, c1], t) = bisect_ordered(&s.vertices, s.type_tag as usize, m);
    [
        Simplex {
            vertices: c0,
            type_tag: t as u8,
        },
        Simplex {
            vertices: c1,
            type_tag: t as u8,
        },
    ]
}

/// Bisects leaf `element` in place: the parent is replaced by its two
/// children at positions `element` and `element + 1`.
pub fn bisect(mesh: &mut Mesh, element: usize) -> Result<(Simplex, Simplex)> {
    if element >= mesh.num_elements() {
        return Err(MeshError::NotALeaf(element));
    }
    let parent = mesh.element(element).clone();
    let g = mesh.generation(element) + 1;
    let [c0, c1] = split(mesh, &parent);
    let (mut els, mut gens) = mesh.take_leaves();
    els[element] = c0.clone();
    els.insert(element + 1, c1.clone());
    gens[element] = g;
    gens.insert(element + 1, g);
    mesh.set_leaves(els, gens);
    Ok((c0, c1))
}

/// Bisects every leaf once, `k` times over.
pub fn uniform_refine(mesh: &Mesh, k: usize) -> Mesh {
    let mut out = mesh.clone();
    for _ in 0..k {
        let (els, gens) = out.take_leaves();
        let mut new_els = Vec::with_capacity(2 * els.len());
        let mut new_gens = Vec::with_capacity(2 * els.len());
        for (s, g) in els.iter().zip(gens) {
            new_els.extend(split(&mut out, s));
            new_gens.extend([g + 1, g + 1]);
        }
        out.set_leaves(new_els, new_gens);
    }
    out
}

/// First reason the mesh is not conforming, if any.
pub fn conformity_violation(mesh: &Mesh) -> Option<String> {
    let adj = match mesh.face_adjacency() {
        Ok(adj) => adj,
        Err(e) => return Some(e.to_string()),
    };
    if mesh.registry().is_empty() {
        return None;
    }
    for (i, el) in mesh.elements().iter().enumerate() {
        for e in el.edges() {
            if let Some(m) = mesh.midpoint_of(e) {
                return Some(format!("element {i} has hanging vertex {m} on edge {e}"));
            }
        }
    }
    unmatched_face(mesh, &adj)
}

type Support = SmallVec<[VertexId; 5]>;

fn union(a: &[VertexId], b: &[VertexId]) -> Support {
    let mut u: Support = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

/// Finds an unshared face that does not lie on the boundary of the initial
/// mesh. Two leaves can cover a face with different triangulations that
/// create no hanging vertex; such faces show up as unshared faces whose
/// carrier in the initial mesh is interior.
fn unmatched_face(mesh: &Mesh, adj: &FaceAdjacency) -> Option<String> {
    let d = mesh.dim();
    // carrier of each vertex: vertices of the smallest initial subsimplex
    // containing it
    let mut carrier: Vec<Support> = (0..mesh.num_vertices() as u32)
        .map(|v| SmallVec::from_slice(&[VertexId(v)]))
        .collect();
    let mut entries = mesh.sorted_registry();
    entries.sort_by_key(|&(_, m)| m);
    for (e, m) in entries {
        carrier[m.index()] = union(&carrier[e.low().index()], &carrier[e.high().index()]);
    }
    let mut owner: HashMap<Support, Support> = HashMap::new();
    for rec in adj.boundary() {
        let face_carrier = rec
            .key
            .vertices()
            .iter()
            .fold(Support::new(), |acc, v| union(&acc, &carrier[v.index()]));
        if face_carrier.len() > d {
            return Some(format!("face {} is unshared inside the initial mesh", rec.key));
        }
        let el = mesh.element(rec.first.0 as usize);
        let el_carrier = el
            .vertices
            .iter()
            .fold(Support::new(), |acc, v| union(&acc, &carrier[v.index()]));
        match owner.get(&face_carrier) {
            Some(prev) if *prev != el_carrier => {
                return Some(format!("face {} does not match its neighbors", rec.key));
            }
            Some(_) => {}
            None => {
                owner.insert(face_carrier, el_carrier);
            }
        }
    }
    None
}

/// True iff every face is shared by at most two leaves, no leaf edge has
/// been bisected, and every unshared face lies on the boundary.
pub fn is_conforming(mesh: &Mesh) -> bool {
    conformity_violation(mesh).is_none()
}

#[derive(Clone, Debug)]
pub struct ClosureOptions {
    /// Abort once an element exceeds this generation. `None` uses
    /// [`default_generation_limit`].
    pub generation_limit: Option<u32>,
    /// Check conformity before and after the closure.
    pub verify: bool,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions {
            generation_limit: None,
            verify: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosureStats {
    /// Total number of bisections performed.
    pub bisections: usize,
    pub passes: usize,
    /// Input leaf indices that were bisected at least once, ascending.
    pub bisected_elements: Vec<usize>,
}

/// `d * (max generation + marks + 2d * edges)`, saturating.
pub fn default_generation_limit(mesh: &Mesh, num_marks: usize, num_edges: usize) -> u32 {
    let g = mesh.generations().iter().copied().max().unwrap_or(0);
    generation_bound(mesh.dim(), g, num_marks, num_edges)
}

fn generation_bound(d: usize, max_generation: u32, num_marks: usize, num_edges: usize) -> u32 {
    let d = d as u64;
    let bound = d * (max_generation as u64 + num_marks as u64 + 2 * d * num_edges as u64);
    bound.min(u32::MAX as u64) as u32
}

/// [`refine_closure_with`] using default options.
pub fn refine_closure(mesh: &mut Mesh, marks: &[usize]) -> Result<ClosureStats> {
    refine_closure_with(mesh, marks, &ClosureOptions::default())
}

struct Node {
    simplex: Simplex,
    generation: u32,
    origin: u32,
}

/// Iterative NVB closure, in place.
///
/// Each pass bisects all marked leaves in leaf order, then marks every leaf
/// with a bisected edge. Stops when no leaf is marked. Only leaves touching
/// an edge bisected in the last pass, or created in it, are rescanned.
pub fn refine_closure_with(mesh: &mut Mesh, marks: &[usize], opts: &ClosureOptions) -> Result<ClosureStats> {
    let n = mesh.num_elements();
    if let Some(&bad) = marks.iter().find(|&&m| m >= n) {
        return Err(MeshError::NotALeaf(bad));
    }
    if marks.is_empty() {
        return Ok(ClosureStats::default());
    }
    if opts.verify {
        if let Some(why) = conformity_violation(mesh) {
            return Err(MeshError::NonConformingMesh(why));
        }
    }

    let (elements, gens) = mesh.take_leaves();
    let mut nodes: Vec<Node> = elements
        .into_iter()
        .zip(gens)
        .enumerate()
        .map(|(i, (simplex, generation))| Node {
            simplex,
            generation,
            origin: i as u32,
        })
        .collect();
    let mut edge_map: HashMap<EdgeKey, SmallVec<[u32; 8]>> = HashMap::new();
    for (h, node) in nodes.iter().enumerate() {
        for e in node.simplex.edges() {
            edge_map.entry(e).or_default().push(h as u32);
        }
    }
    let limit = opts.generation_limit.unwrap_or_else(|| {
        let g = nodes.iter().map(|x| x.generation).max().unwrap_or(0);
        generation_bound(mesh.dim(), g, marks.len(), edge_map.len())
    });

    let mut marked = vec![false; n];
    for &m in marks {
        marked[m] = true;
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut bisected_origin = vec![false; n];
    let mut stats = ClosureStats::default();
    let mut failure = None;

    'passes: loop {
        let mut next = Vec::with_capacity(order.len() + 16);
        let mut created = Vec::new();
        let mut new_edges = Vec::new();
        for &h in &order {
            if !marked[h as usize] {
                next.push(h);
                continue;
            }
            marked[h as usize] = false;
            let parent = nodes[h as usize].simplex.clone();
            let e = parent.refinement_edge();
            if mesh.midpoint_of(e).is_none() {
                new_edges.push(e);
            }
            let children = split(mesh, &parent);
            for pe in parent.edges() {
                if let Some(list) = edge_map.get_mut(&pe) {
                    list.retain(|x| *x != h);
                }
            }
            let generation = nodes[h as usize].generation + 1;
            let origin = nodes[h as usize].origin;
            bisected_origin[origin as usize] = true;
            stats.bisections += 1;
            for child in children {
                let ch = nodes.len() as u32;
                for ce in child.edges() {
                    edge_map.entry(ce).or_default().push(ch);
                }
                nodes.push(Node {
                    simplex: child,
                    generation,
                    origin,
                });
                marked.push(false);
                next.push(ch);
                created.push(ch);
            }
            if generation > limit && failure.is_none() {
                failure = Some(MeshError::NonTermination { generation, limit });
            }
        }
        order = next;
        stats.passes += 1;
        if failure.is_some() {
            break 'passes;
        }

        let mut any = false;
        let touched = new_edges
            .iter()
            .filter_map(|e| edge_map.get(e))
            .flat_map(|l| l.iter().copied());
        let candidates: Vec<u32> = created.iter().copied().chain(touched).collect();
        for c in candidates {
            if marked[c as usize] {
                continue;
            }
            if nodes[c as usize].simplex.edges().any(|e| mesh.midpoint_of(e).is_some()) {
                marked[c as usize] = true;
                any = true;
            }
        }
        if !any {
            break;
        }
    }

    let mut els = Vec::with_capacity(order.len());
    let mut gens = Vec::with_capacity(order.len());
    for &h in &order {
        let node = &nodes[h as usize];
        els.push(node.simplex.clone());
        gens.push(node.generation);
    }
    mesh.set_leaves(els, gens);
    if let Some(err) = failure {
        return Err(err);
    }
    stats.bisected_elements = (0..n).filter(|&i| bisected_origin[i]).collect();
    if opts.verify {
        if let Some(why) = conformity_violation(mesh) {
            return Err(MeshError::ClosureNotConforming(why));
        }
    }
    Ok(stats)
}

/// Refines every leaf on its own, without closure, until it is type 0 again.
///
/// A leaf of type `t > 0` is bisected `d - t` times. If some leaf has a
/// nonzero type, type-0 leaves are bisected `d` times, a full cycle; on a
/// relabeled mesh this bisects exactly the edges with both ends in `V0` in
/// every leaf. A mesh of type-0 leaves only is returned unchanged.
/// Midpoints are shared through the registry.
pub fn type0_completion(mesh: &Mesh) -> Mesh {
    let mut out = mesh.clone();
    let d = mesh.dim();
    if mesh.elements().iter().all(|s| s.type_tag == 0) {
        return out;
    }
    let (els, gens) = out.take_leaves();
    let mut new_els = Vec::with_capacity(els.len());
    let mut new_gens = Vec::with_capacity(els.len());
    for (s, g) in els.into_iter().zip(gens) {
        let steps = d - s.type_tag as usize;
        // depth-first, child 0 before child 1
        let mut stack = vec![(s, g, steps)];
        while let Some((s, g, k)) = stack.pop() {
            if k == 0 {
                new_els.push(s);
                new_gens.push(g);
                continue;
            }
            let [c0, c1] = split(&mut out, &s);
            stack.push((c1, g + 1, k - 1));
            stack.push((c0, g + 1, k - 1));
        }
    }
    out.set_leaves(new_els, new_gens);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_kuhn_grid, VertexId};

    fn square() -> Mesh {
        // a=0 (0,0), b=1 (1,0), c=2 (1,1), d=3 (0,1)
        Mesh::build(
            2,
            &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![Simplex::from_ids(&[0, 1, 2], 0), Simplex::from_ids(&[0, 3, 2], 0)],
        )
        .unwrap()
    }

    fn tet() -> Mesh {
        Mesh::build(
            3,
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![Simplex::from_ids(&[0, 1, 2, 3], 0)],
        )
        .unwrap()
    }

    #[test]
    fn bisect_replaces_in_place() {
        let mut m = square();
        let (c0, c1) = bisect(&mut m, 0).unwrap();
        assert_eq!(c0, Simplex::from_ids(&[0, 4, 1], 1));
        assert_eq!(c1, Simplex::from_ids(&[2, 4, 1], 1));
        assert_eq!(m.elements()[..2], [c0, c1]);
        assert_eq!(m.element(2), &Simplex::from_ids(&[0, 3, 2], 0));
        assert_eq!(m.generations(), &[1, 1, 0]);
        assert_eq!(m.point(VertexId(4)), &[0.5, 0.5]);
        assert!(!is_conforming(&m));
        // the neighbor reuses the registered midpoint
        bisect(&mut m, 2).unwrap();
        assert_eq!(m.num_vertices(), 5);
        assert!(is_conforming(&m));
        assert!(matches!(bisect(&mut m, 9), Err(MeshError::NotALeaf(9))));
    }

    #[test]
    fn uniform_counts() {
        let m = generate_kuhn_grid(3, 1).unwrap();
        assert_eq!(uniform_refine(&m, 0), m);
        let r = uniform_refine(&m, 3);
        assert_eq!(r.num_elements(), 48);
        assert!(is_conforming(&r));
        assert!(is_conforming(&uniform_refine(&m, 1)));
        assert!(r.generations().iter().all(|&g| g == 3));
    }

    #[test]
    fn closure_single_element() {
        let mut m = tet();
        let stats = refine_closure(&mut m, &[0]).unwrap();
        assert_eq!(m.num_elements(), 2);
        assert_eq!(stats.bisections, 1);
        assert_eq!(stats.bisected_elements, vec![0]);
        assert!(is_conforming(&m));
    }

    #[test]
    fn closure_on_square() {
        let mut m = square();
        let stats = refine_closure(&mut m, &[0]).unwrap();
        assert_eq!(m.num_elements(), 4);
        assert_eq!(stats.bisections, 2);
        assert_eq!(stats.passes, 2);
        let before = m.clone();
        assert_eq!(refine_closure(&mut m, &[]).unwrap(), ClosureStats::default());
        assert_eq!(m, before);
    }

    #[test]
    fn closure_guard_trips() {
        let mut m = square();
        let opts = ClosureOptions {
            generation_limit: Some(0),
            verify: true,
        };
        let err = refine_closure_with(&mut m, &[0], &opts).unwrap_err();
        assert_eq!(err, MeshError::NonTermination { generation: 1, limit: 0 });
    }

    #[test]
    fn closure_rejects_nonconforming_input() {
        let mut m = square();
        bisect(&mut m, 0).unwrap();
        assert!(matches!(refine_closure(&mut m, &[0]), Err(MeshError::NonConformingMesh(_))));
    }

    #[test]
    fn type0_completion_counts() {
        let m = generate_kuhn_grid(3, 1).unwrap();
        assert_eq!(type0_completion(&m), m);
        let one = Mesh::build(
            3,
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![Simplex::from_ids(&[0, 1, 2, 3], 1)],
        )
        .unwrap();
        let c = type0_completion(&one);
        assert_eq!(c.num_elements(), 4);
        assert!(c.elements().iter().all(|s| s.type_tag == 0));
        assert!(is_conforming(&c));
    }

    #[test]
    fn mismatched_face_triangulations_are_not_conforming() {
        // Both sides of face {a, b, c} bisect ab and ac, in opposite order,
        // so neither side has a hanging vertex but the triangulations differ.
        let pts = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
            [0.5, 0.0, 0.0],
            [0.0, 0.5, 0.0],
        ];
        let leaves = [
            [5, 1, 2, 3],
            [0, 6, 5, 3],
            [6, 2, 5, 3],
            [6, 1, 2, 4],
            [0, 5, 6, 4],
            [5, 1, 6, 4],
        ];
        let registry = [
            (EdgeKey::new(VertexId(0), VertexId(1)), VertexId(5)),
            (EdgeKey::new(VertexId(0), VertexId(2)), VertexId(6)),
        ];
        let m = Mesh::from_parts(
            3,
            pts.iter().flatten().copied().collect(),
            leaves.iter().map(|l| Simplex::from_ids(l, 0)).collect(),
            vec![2; 6],
            registry.into_iter().collect(),
        )
        .unwrap();
        let why = conformity_violation(&m).unwrap();
        assert!(why.contains("does not match"), "{why}");
    }

    #[test]
    fn default_limit_formula() {
        let m = square();
        // d = 2, generation 0, one mark, 5 edges
        assert_eq!(default_generation_limit(&m, 1, 5), 2 * (1 + 20));
    }
}
