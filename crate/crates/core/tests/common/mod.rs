#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use nvb_core::nvb::bisect;
use nvb_core::{generate_kuhn_grid, EdgeKey, Label, Mesh, Simplex, VertexId};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Kuhn grid with jittered coordinates, permuted vertex ids and rotated
/// element vertex lists. Jitter stays below a tenth of the cell width, which
/// keeps every simplex positively oriented.
pub fn scrambled_kuhn(d: usize, cells: usize, rng: &mut ChaCha8Rng) -> Mesh {
    let base = generate_kuhn_grid(d, cells).unwrap();
    let h = 1.0 / cells as f64;
    let n = base.num_vertices();
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(rng);
    let mut coords = vec![0.0; n * d];
    for (v, &new) in perm.iter().enumerate() {
        let new = new as usize;
        for k in 0..d {
            let jitter = rng.random_range(-0.1..0.1) * h;
            coords[new * d + k] = base.coords()[v * d + k] + jitter;
        }
    }
    let points: Vec<&[f64]> = coords.chunks(d).collect();
    let elements = base
        .elements()
        .iter()
        .map(|s| {
            let mut ids: Vec<u32> = s.vertices.iter().map(|v| perm[v.index()]).collect();
            let r = rng.random_range(0..ids.len());
            ids.rotate_left(r);
            Simplex::from_ids(&ids, 0)
        })
        .collect();
    Mesh::build(d, &points, elements).unwrap()
}

fn has_hanging_edge(mesh: &Mesh, s: &Simplex) -> bool {
    s.edges().any(|e| mesh.midpoint_of(e).is_some())
}

/// Marks `element`, then bisects any leaf with a bisected edge, scanning the
/// whole mesh after every single bisection. Returns the number of bisections.
pub fn brute_force_closure(mesh: &Mesh, element: usize) -> usize {
    let mut m = mesh.clone();
    bisect(&mut m, element).unwrap();
    let mut count = 1;
    while let Some(i) = (0..m.num_elements()).find(|&i| has_hanging_edge(&m, m.element(i))) {
        bisect(&mut m, i).unwrap();
        count += 1;
        assert!(count < 100_000, "oracle closure does not terminate");
    }
    count
}

/// Barycentric label of every vertex, in terms of the macro vertices.
pub fn vertex_labels(mesh: &Mesh) -> Vec<Label> {
    let mut parents: HashMap<VertexId, EdgeKey> = HashMap::new();
    for (e, m) in mesh.registry() {
        parents.insert(*m, *e);
    }
    let mut memo: Vec<Option<Label>> = vec![None; mesh.num_vertices()];
    fn label(v: VertexId, parents: &HashMap<VertexId, EdgeKey>, memo: &mut Vec<Option<Label>>) -> Label {
        if let Some(l) = &memo[v.index()] {
            return l.clone();
        }
        let l = match parents.get(&v) {
            None => Label::vertex(v),
            Some(e) => {
                let a = label(e.low(), parents, memo);
                let b = label(e.high(), parents, memo);
                Label::midpoint(&a, &b)
            }
        };
        memo[v.index()] = Some(l.clone());
        l
    }
    (0..mesh.num_vertices())
        .map(|v| label(VertexId(v as u32), &parents, &mut memo))
        .collect()
}

/// Leaf cells as sets of labels.
pub fn labeled_cells(mesh: &Mesh) -> BTreeSet<BTreeSet<Label>> {
    let labels = vertex_labels(mesh);
    mesh.elements()
        .iter()
        .map(|s| s.vertices.iter().map(|v| labels[v.index()].clone()).collect())
        .collect()
}

/// Faces of leaves whose labels only involve macro vertices in `support`.
pub fn labeled_faces_within(mesh: &Mesh, support: &[VertexId]) -> BTreeSet<BTreeSet<Label>> {
    let labels = vertex_labels(mesh);
    let mut out = BTreeSet::new();
    for s in mesh.elements() {
        for omit in 0..s.vertices.len() {
            let face: BTreeSet<Label> = s
                .vertices
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != omit)
                .map(|(_, v)| labels[v.index()].clone())
                .collect();
            if face.iter().all(|l| l.support().all(|v| support.contains(&v))) {
                out.insert(face);
            }
        }
    }
    out
}

/// Unit simplex in `R^d` with the vertex ids listed in `order` (a permutation
/// of `0..=d`) and the given type.
pub fn single_simplex(order: &[u32], type_tag: u8) -> Mesh {
    let d = order.len() - 1;
    let points: Vec<Vec<f64>> = (0..=d)
        .map(|i| (0..d).map(|k| if k + 1 == i { 1.0 } else { 0.0 }).collect())
        .collect();
    Mesh::build(d, &points, vec![Simplex::from_ids(order, type_tag)]).unwrap()
}

pub fn random_order(d: usize, rng: &mut impl Rng) -> Vec<u32> {
    let mut order: Vec<u32> = (0..=d as u32).collect();
    order.shuffle(rng);
    order
}

/// `n x n` unit squares, each split by both diagonals into four triangles
/// around a center vertex. Corner ids run row by row, centers come after.
pub fn criss_cross(n: usize) -> Mesh {
    let side = n + 1;
    let id = |x: usize, y: usize| (y * side + x) as u32;
    let mut points: Vec<[f64; 2]> = (0..side * side).map(|i| [(i % side) as f64, (i / side) as f64]).collect();
    let mut elements = Vec::with_capacity(4 * n * n);
    for y in 0..n {
        for x in 0..n {
            let center = points.len() as u32;
            points.push([x as f64 + 0.5, y as f64 + 0.5]);
            let corners = [id(x, y), id(x + 1, y), id(x + 1, y + 1), id(x, y + 1)];
            for k in 0..4 {
                elements.push(Simplex::from_ids(&[corners[k], center, corners[(k + 1) % 4]], 0));
            }
        }
    }
    Mesh::build(2, &points, elements).unwrap()
}
