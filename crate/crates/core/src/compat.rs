//! Face compatibility: weakest, weak, strong and quasi-strong conditions and
//! the distance-1 count of faces that are neither strong nor quasi-strong.

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::mesh::{FaceKey, Mesh, MeshError, Result, Simplex};
use crate::nvb::{conformity_violation, type0_completion};
use crate::tree::{bisect_ordered, induced_face_tree_at, reflected_lists, Label};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FaceClass {
    Strong,
    QuasiStrong,
    /// Only the weakest condition holds.
    WeaklyOnly,
    /// The two sides induce different face refinements.
    Incompatible,
}

impl FaceClass {
    /// Strong or quasi-strong.
    pub fn is_compatible(self) -> bool {
        matches!(self, FaceClass::Strong | FaceClass::QuasiStrong)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompatReport {
    pub strong: usize,
    pub quasi_strong: usize,
    pub weakly_only: usize,
    pub incompatible: usize,
    /// Boundary faces, counted as compatible. Zero unless included.
    pub boundary: usize,
    pub interior_faces: usize,
    /// All classified faces: interior plus boundary when included.
    pub total_faces: usize,
    /// Faces that are neither strong, quasi-strong nor boundary.
    pub d1: usize,
    pub boundary_included: bool,
    /// Quasi-strong faces whose pair of types wraps from `d - 1` to 0.
    pub wrapped_quasi_strong: usize,
}

impl CompatReport {
    /// `d1` over the number of interior faces; 0 without interior faces.
    pub fn d1_fraction(&self) -> f64 {
        if self.interior_faces == 0 {
            0.0
        } else {
            self.d1 as f64 / self.interior_faces as f64
        }
    }
}

/// Outcome of [`check_weak`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakCertificate {
    /// Interior faces failing the weakest condition.
    pub weakest_failures: Vec<FaceKey>,
    /// Why the type-0 completion is not conforming, if it is not.
    pub certificate_failure: Option<String>,
}

impl WeakCertificate {
    pub fn is_weakly_compatible(&self) -> bool {
        self.weakest_failures.is_empty() && self.certificate_failure.is_none()
    }
}

fn require_conforming(mesh: &Mesh) -> Result<()> {
    match conformity_violation(mesh) {
        Some(why) => Err(MeshError::NonConformingMesh(why)),
        None => Ok(()),
    }
}

fn weakest_holds(a: &Simplex, la: usize, b: &Simplex, lb: usize) -> bool {
    induced_face_tree_at(a, la).equivalent(&induced_face_tree_at(b, lb))
}

/// Interior faces whose two sides induce different refinements.
pub fn check_weakest(mesh: &Mesh) -> Result<Vec<FaceKey>> {
    require_conforming(mesh)?;
    let adj = mesh.face_adjacency()?;
    let interior: Vec<_> = adj.interior().collect();
    let mut failures: Vec<FaceKey> = interior
        .par_iter()
        .filter(|f| {
            let ((ea, la), (eb, lb)) = (f.first, f.second.unwrap());
            !weakest_holds(
                mesh.element(ea as usize),
                la as usize,
                mesh.element(eb as usize),
                lb as usize,
            )
        })
        .map(|f| f.key.clone())
        .collect();
    failures.sort();
    Ok(failures)
}

/// Sufficient test for weak compatibility: the weakest condition plus a
/// conforming type-0 completion.
pub fn check_weak(mesh: &Mesh) -> Result<WeakCertificate> {
    let weakest_failures = check_weakest(mesh)?;
    let completed = type0_completion(mesh);
    let mut certificate_failure = conformity_violation(&completed);
    if certificate_failure.is_none() {
        if let Some(i) = completed.elements().iter().position(|s| s.type_tag != 0) {
            certificate_failure = Some(format!("completed element {i} is not type 0"));
        }
    }
    Ok(WeakCertificate {
        weakest_failures,
        certificate_failure,
    })
}

/// Reflected neighbors: equal types, and the first simplex with its private
/// vertex swapped for the second's is NVB-equivalent to the second.
pub fn reflected_neighbors(t1: &Simplex, t2: &Simplex) -> Result<bool> {
    reflected_lists(&t1.vertices, t1.type_tag as usize, &t2.vertices, t2.type_tag as usize)
        .ok_or_else(|| MeshError::NotNeighbors(t1.clone(), t2.clone()))
}

type Labels = SmallVec<[Label; 5]>;

struct Child {
    vertices: Labels,
    type_tag: usize,
    piece: Labels,
}

/// Children of `s` that touch the face opposite `local`, each with the part
/// of the face it owns.
fn adjacent_children(s: &Simplex, local: usize) -> SmallVec<[Child; 2]> {
    let d = s.dim();
    let labels: Labels = s.vertices.iter().map(|&v| Label::vertex(v)).collect();
    let m = Label::midpoint(&labels[0], &labels[d]);
    let ([c0, c1], t) = bisect_ordered(&labels, s.type_tag as usize, m.clone());
    let away = &labels[local];
    let piece_of = |c: &Labels| -> Labels {
        let mut p: Labels = c.iter().filter(|&l| l != away).cloned().collect();
        p.sort();
        p
    };
    let mut out = SmallVec::new();
    if local != 0 && local != d {
        out.push(Child {
            piece: piece_of(&c0),
            vertices: c0,
            type_tag: t,
        });
        out.push(Child {
            piece: piece_of(&c1),
            vertices: c1,
            type_tag: t,
        });
    } else {
        // the child missing the omitted endpoint holds the whole face
        let c = if local == d { c0 } else { c1 };
        let mut piece: Labels = c.iter().filter(|&l| *l != m).cloned().collect();
        piece.sort();
        out.push(Child {
            vertices: c,
            type_tag: t,
            piece,
        });
    }
    out
}

fn labels(s: &Simplex) -> Labels {
    s.vertices.iter().map(|&v| Label::vertex(v)).collect()
}

fn children_reflected(a: &Simplex, la: usize, b: &Simplex, lb: usize) -> bool {
    let ka = adjacent_children(a, la);
    let kb = adjacent_children(b, lb);
    if ka.len() != kb.len() {
        return false;
    }
    ka.iter().all(|x| {
        kb.iter().any(|y| {
            x.piece == y.piece
                && reflected_lists(&x.vertices, x.type_tag, &y.vertices, y.type_tag) == Some(true)
        })
    })
}

/// The face-containing child of `a` (type `t`) reflected with `b` (type `t + 1`).
fn quasi_strong_from(a: &Simplex, la: usize, b: &Simplex) -> bool {
    let d = a.dim();
    if b.type_tag as usize != (a.type_tag as usize + 1) % d {
        return false;
    }
    let kids = adjacent_children(a, la);
    if kids.len() != 1 {
        return false;
    }
    let kid = &kids[0];
    reflected_lists(&kid.vertices, kid.type_tag, &labels(b), b.type_tag as usize) == Some(true)
}

/// Classification plus whether a quasi-strong match wrapped the type.
fn classify_pair(a: &Simplex, la: usize, b: &Simplex, lb: usize) -> (FaceClass, bool) {
    let d = a.dim();
    if reflected_lists(&a.vertices, a.type_tag as usize, &b.vertices, b.type_tag as usize) == Some(true)
        || (a.type_tag == b.type_tag && children_reflected(a, la, b, lb))
    {
        return (FaceClass::Strong, false);
    }
    if quasi_strong_from(a, la, b) {
        return (FaceClass::QuasiStrong, a.type_tag as usize == d - 1);
    }
    if quasi_strong_from(b, lb, a) {
        return (FaceClass::QuasiStrong, b.type_tag as usize == d - 1);
    }
    if weakest_holds(a, la, b, lb) {
        (FaceClass::WeaklyOnly, false)
    } else {
        (FaceClass::Incompatible, false)
    }
}

/// Classifies one interior face of a conforming mesh.
pub fn classify_face(mesh: &Mesh, face: &FaceKey) -> Result<FaceClass> {
    require_conforming(mesh)?;
    let adj = mesh.face_adjacency()?;
    let rec = adj
        .faces()
        .iter()
        .find(|f| &f.key == face)
        .ok_or_else(|| MeshError::UnknownFace(face.clone()))?;
    let ((ea, la), (eb, lb)) = match rec.second {
        Some(s) => (rec.first, s),
        None => return Err(MeshError::BoundaryFace(face.clone())),
    };
    Ok(classify_pair(mesh.element(ea as usize), la as usize, mesh.element(eb as usize), lb as usize).0)
}

/// Per-face classes of all interior faces, in face-adjacency order.
pub fn classify_all(mesh: &Mesh) -> Result<Vec<(FaceKey, FaceClass)>> {
    require_conforming(mesh)?;
    let adj = mesh.face_adjacency()?;
    let interior: Vec<_> = adj.interior().collect();
    Ok(interior
        .par_iter()
        .map(|f| {
            let ((ea, la), (eb, lb)) = (f.first, f.second.unwrap());
            let (class, _) =
                classify_pair(mesh.element(ea as usize), la as usize, mesh.element(eb as usize), lb as usize);
            (f.key.clone(), class)
        })
        .collect())
}

/// Counts faces that are neither strongly nor quasi-strongly compatible.
pub fn distance1(mesh: &Mesh, include_boundary: bool) -> Result<CompatReport> {
    require_conforming(mesh)?;
    let adj = mesh.face_adjacency()?;
    let interior: Vec<_> = adj.interior().collect();
    let classes: Vec<(FaceClass, bool)> = interior
        .par_iter()
        .map(|f| {
            let ((ea, la), (eb, lb)) = (f.first, f.second.unwrap());
            classify_pair(mesh.element(ea as usize), la as usize, mesh.element(eb as usize), lb as usize)
        })
        .collect();
    let mut r = CompatReport {
        interior_faces: interior.len(),
        boundary_included: include_boundary,
        ..Default::default()
    };
    for (class, wrapped) in classes {
        match class {
            FaceClass::Strong => r.strong += 1,
            FaceClass::QuasiStrong => r.quasi_strong += 1,
            FaceClass::WeaklyOnly => r.weakly_only += 1,
            FaceClass::Incompatible => r.incompatible += 1,
        }
        r.wrapped_quasi_strong += wrapped as usize;
    }
    if include_boundary {
        r.boundary = adj.boundary().count();
    }
    r.total_faces = r.interior_faces + r.boundary;
    r.d1 = r.total_faces - r.strong - r.quasi_strong - r.boundary;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_kuhn_grid, VertexId};
    use crate::nvb::uniform_refine;

    fn pts() -> Vec<[f64; 3]> {
        // a, b, c, u, v
        vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]
    }

    fn pair(first: [u32; 4], second: [u32; 4], t: [u8; 2]) -> Mesh {
        Mesh::build(
            3,
            &pts(),
            vec![Simplex::from_ids(&first, t[0]), Simplex::from_ids(&second, t[1])],
        )
        .unwrap()
    }

    fn abc() -> FaceKey {
        FaceKey::new([0, 1, 2].map(VertexId))
    }

    #[test]
    fn weakest_examples() {
        let good = pair([0, 1, 2, 3], [0, 1, 2, 4], [0, 0]);
        assert!(check_weakest(&good).unwrap().is_empty());
        let bad = pair([0, 1, 2, 3], [1, 0, 2, 4], [0, 0]);
        assert_eq!(check_weakest(&bad).unwrap(), vec![abc()]);
        let single = Mesh::build(3, &pts()[..4], vec![Simplex::from_ids(&[0, 1, 2, 3], 0)]).unwrap();
        assert!(check_weakest(&single).unwrap().is_empty());
    }

    #[test]
    fn weak_examples() {
        let bad = pair([0, 1, 2, 3], [1, 0, 2, 4], [0, 0]);
        let cert = check_weak(&bad).unwrap();
        assert!(!cert.is_weakly_compatible());
        assert_eq!(cert.weakest_failures.len(), 1);
        let good = pair([0, 1, 2, 3], [0, 1, 2, 4], [0, 0]);
        assert!(check_weak(&good).unwrap().is_weakly_compatible());
    }

    #[test]
    fn reflected_examples() {
        let s = |ids: [u32; 4], t| Simplex::from_ids(&ids, t);
        assert!(reflected_neighbors(&s([0, 1, 2, 3], 0), &s([0, 1, 2, 4], 0)).unwrap());
        assert!(!reflected_neighbors(&s([0, 1, 2, 3], 0), &s([0, 1, 2, 4], 1)).unwrap());
        assert!(reflected_neighbors(&s([0, 1, 2, 3], 0), &s([4, 2, 1, 0], 0)).unwrap());
        assert!(matches!(
            reflected_neighbors(&s([0, 1, 2, 3], 0), &s([0, 5, 6, 4], 0)),
            Err(MeshError::NotNeighbors(..))
        ));
    }

    #[test]
    fn classify_examples() {
        let good = pair([0, 1, 2, 3], [0, 1, 2, 4], [0, 0]);
        assert_eq!(classify_face(&good, &abc()).unwrap(), FaceClass::Strong);
        let bad = pair([0, 1, 2, 3], [1, 0, 2, 4], [0, 0]);
        assert_eq!(classify_face(&bad, &abc()).unwrap(), FaceClass::Incompatible);
        let boundary = FaceKey::new([0, 1, 3].map(VertexId));
        assert!(matches!(classify_face(&good, &boundary), Err(MeshError::BoundaryFace(_))));
    }

    #[test]
    fn classification_is_symmetric() {
        let cases = [
            ([0, 1, 2, 3], [0, 1, 2, 4], [0, 0]),
            ([0, 1, 2, 3], [1, 0, 2, 4], [0, 0]),
            ([0, 1, 2, 3], [0, 2, 1, 4], [1, 2]),
            ([3, 1, 2, 0], [0, 1, 4, 2], [2, 0]),
        ];
        for (a, b, t) in cases {
            let m1 = pair(a, b, t);
            let m2 = pair(b, a, [t[1], t[0]]);
            assert_eq!(
                classify_face(&m1, &abc()).unwrap(),
                classify_face(&m2, &abc()).unwrap()
            );
        }
    }

    #[test]
    fn quasi_strong_pair() {
        // child of [0,1,2,3]_0 containing {0,1,2} is [0,m,1,2]_1;
        // [0,4,1,2]_1 is its reflected neighbor
        let m = pair([0, 1, 2, 3], [0, 4, 1, 2], [0, 1]);
        assert_eq!(classify_face(&m, &abc()).unwrap(), FaceClass::QuasiStrong);
        let r = distance1(&m, false).unwrap();
        assert_eq!((r.quasi_strong, r.d1, r.wrapped_quasi_strong), (1, 0, 0));
    }

    #[test]
    fn kuhn_grid_is_strong() {
        let m = generate_kuhn_grid(3, 2).unwrap();
        let r = distance1(&m, false).unwrap();
        assert_eq!(r.strong, r.interior_faces);
        assert_eq!(r.d1, 0);
        let rb = distance1(&m, true).unwrap();
        assert_eq!(rb.d1, 0);
        assert_eq!(rb.total_faces, rb.strong + rb.boundary);
        assert_eq!(
            rb.strong + rb.quasi_strong + rb.weakly_only + rb.incompatible + rb.boundary,
            rb.total_faces
        );
    }

    #[test]
    fn refined_kuhn_grid_stays_compatible() {
        let m = uniform_refine(&generate_kuhn_grid(3, 1).unwrap(), 1);
        let r = distance1(&m, false).unwrap();
        assert_eq!(r.d1, 0);
        assert!(check_weak(&m).unwrap().is_weakly_compatible());
    }

    #[test]
    fn incompatible_pair_distance() {
        let bad = pair([0, 1, 2, 3], [1, 0, 2, 4], [0, 0]);
        let r = distance1(&bad, false).unwrap();
        assert_eq!((r.d1, r.incompatible, r.interior_faces), (1, 1, 1));
        let single = Mesh::build(3, &pts()[..4], vec![Simplex::from_ids(&[0, 1, 2, 3], 0)]).unwrap();
        assert_eq!(distance1(&single, false).unwrap().d1, 0);
    }
}
