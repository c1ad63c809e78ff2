//! Geometric quality indicators and conforming-closure cost.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::mesh::{Mesh, MeshError, Result, VertexId};
use crate::nvb::{refine_closure_with, uniform_refine, ClosureOptions};

/// Polar sines below this count as zero volume.
const DEGENERATE_SINE: f64 = 1e-13;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn diff(mesh: &Mesh, a: VertexId, b: VertexId) -> Vec<f64> {
    mesh.point(a).iter().zip(mesh.point(b)).map(|(x, y)| x - y).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|det|` of the edge vectors leaving corner `pos`, i.e. `d!` times the volume.
fn scaled_volume(mesh: &Mesh, element: usize, pos: usize) -> (f64, Vec<f64>) {
    let s = mesh.element(element);
    let d = mesh.dim();
    let z = s.vertices[pos];
    let mut m = DMatrix::<f64>::zeros(d, d);
    let mut lengths = Vec::with_capacity(d);
    for (col, &w) in s.vertices.iter().filter(|&&w| w != z).enumerate() {
        let e = diff(mesh, w, z);
        lengths.push(norm(&e));
        for (row, x) in e.into_iter().enumerate() {
            m[(row, col)] = x;
        }
    }
    (m.determinant().abs(), lengths)
}

/// Corner polar sine `d! * V / prod |z_i - z_pos|` at vertex position `pos`.
pub fn polar_sine(mesh: &Mesh, element: usize, pos: usize) -> Result<f64> {
    let d = mesh.dim();
    if element >= mesh.num_elements() {
        return Err(MeshError::IndexOutOfRange {
            index: element,
            max: mesh.num_elements().saturating_sub(1),
        });
    }
    if pos > d {
        return Err(MeshError::IndexOutOfRange { index: pos, max: d });
    }
    let (det, lengths) = scaled_volume(mesh, element, pos);
    let sine = det / lengths.iter().product::<f64>();
    if !sine.is_finite() || sine < DEGENERATE_SINE {
        return Err(MeshError::DegenerateElement { element });
    }
    Ok(sine)
}

/// `(d-1)`-measure of the face opposite position `omit`, from the Gram determinant.
fn face_measure(mesh: &Mesh, element: usize, omit: usize) -> f64 {
    let s = mesh.element(element);
    let d = mesh.dim();
    let face: Vec<VertexId> = s
        .vertices
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != omit)
        .map(|(_, &v)| v)
        .collect();
    let a = DMatrix::from_fn(d, d - 1, |row, col| {
        mesh.point(face[col + 1])[row] - mesh.point(face[0])[row]
    });
    let gram = a.transpose() * &a;
    gram.determinant().max(0.0).sqrt() / factorial(d - 1)
}

/// Shape indicators of one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementQuality {
    /// Average of the corner polar sines.
    pub polar_sine: f64,
    pub volume: f64,
    /// `V / LE^d`
    pub v_le: f64,
    /// `V / SE^d`
    pub v_se: f64,
    /// `V / LF^(d/(d-1))`
    pub v_lf: f64,
    /// `V / SF^(d/(d-1))`
    pub v_sf: f64,
    /// `LF / LE^(d-1)`, largest face against longest edge.
    pub f_le: f64,
    /// `SF / SE^(d-1)`, smallest face against shortest edge.
    pub f_se: f64,
}

pub fn element_quality(mesh: &Mesh, element: usize) -> Result<ElementQuality> {
    let d = mesh.dim();
    let mut sine_sum = 0.0;
    for pos in 0..=d {
        sine_sum += polar_sine(mesh, element, pos)?;
    }
    let (det, _) = scaled_volume(mesh, element, 0);
    let volume = det / factorial(d);

    let s = mesh.element(element);
    let (mut le, mut se) = (0.0f64, f64::INFINITY);
    for e in s.edges() {
        let l = norm(&diff(mesh, e.low(), e.high()));
        le = le.max(l);
        se = se.min(l);
    }
    let (mut lf, mut sf) = (0.0f64, f64::INFINITY);
    for omit in 0..=d {
        let f = face_measure(mesh, element, omit);
        lf = lf.max(f);
        sf = sf.min(f);
    }
    let df = d as f64;
    let fe = df / (df - 1.0);
    Ok(ElementQuality {
        polar_sine: sine_sum / (df + 1.0),
        volume,
        v_le: volume / le.powi(d as i32),
        v_se: volume / se.powi(d as i32),
        v_lf: volume / lf.powf(fe),
        v_sf: volume / sf.powf(fe),
        f_le: lf / le.powi(d as i32 - 1),
        f_se: sf / se.powi(d as i32 - 1),
    })
}

/// Minimum, average and maximum of an indicator over the leaves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64>) -> Stat {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        // rounding can push the mean just outside [min, max]
        let avg = (sum / n as f64).clamp(min, max);
        Stat { min, avg, max }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub polar_sine: Stat,
    pub v_le: Stat,
    pub v_se: Stat,
    pub v_lf: Stat,
    pub v_sf: Stat,
    pub f_le: Stat,
    pub f_se: Stat,
    pub max_elements_per_vertex: u32,
    pub max_elements_per_edge: u32,
}

impl QualityReport {
    /// Indicator names in report order, matching [`QualityReport::stats`].
    pub const NAMES: [&'static str; 7] = ["polar_sine", "v_le", "v_se", "v_lf", "v_sf", "f_le", "f_se"];

    pub fn stats(&self) -> [Stat; 7] {
        [self.polar_sine, self.v_le, self.v_se, self.v_lf, self.v_sf, self.f_le, self.f_se]
    }
}

pub fn quality_report(mesh: &Mesh) -> Result<QualityReport> {
    let q: Vec<ElementQuality> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|i| element_quality(mesh, i))
        .collect::<Result<_>>()?;
    let stat = |f: fn(&ElementQuality) -> f64| Stat::of(q.iter().map(f));
    Ok(QualityReport {
        polar_sine: stat(|e| e.polar_sine),
        v_le: stat(|e| e.v_le),
        v_se: stat(|e| e.v_se),
        v_lf: stat(|e| e.v_lf),
        v_sf: stat(|e| e.v_sf),
        f_le: stat(|e| e.f_le),
        f_se: stat(|e| e.f_se),
        max_elements_per_vertex: mesh.vertex_element_counts().into_iter().max().unwrap_or(0),
        max_elements_per_edge: mesh.edge_element_counts().into_values().max().unwrap_or(0),
    })
}

/// Per-element conforming-closure sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureReport {
    /// Largest closure, always exact.
    pub d2_max: usize,
    /// Sum of `per_element`; an upper bound on the exact sum unless
    /// `exact_average` is set.
    pub closure_sum: u64,
    /// Number of uniform refinements applied before measuring.
    pub level: usize,
    /// Bisections forced by marking each element alone. Entries that were
    /// skipped by the shortcut hold the bound they inherited.
    pub per_element: Vec<usize>,
    /// Closures actually run.
    pub closures_run: usize,
    pub exact_average: bool,
}

impl ClosureReport {
    pub fn average(&self) -> f64 {
        self.closure_sum as f64 / self.per_element.len() as f64
    }
}

fn closure_of(mesh: &Mesh, element: usize) -> Result<(usize, Vec<usize>)> {
    let mut copy = mesh.clone();
    let opts = ClosureOptions {
        generation_limit: None,
        verify: false,
    };
    let stats = refine_closure_with(&mut copy, &[element], &opts)?;
    Ok((stats.bisections, stats.bisected_elements))
}

/// Closure size of every element, each marked alone on a private copy.
///
/// With `exact_average` unset, an element bisected inside an earlier
/// element's closure is not run and inherits that closure's size, since its
/// own closure is contained in it. `d2_max` is exact either way.
pub fn distance2(mesh: &Mesh, exact_average: bool) -> Result<ClosureReport> {
    if let Some(v) = crate::nvb::conformity_violation(mesh) {
        return Err(MeshError::NonConformingMesh(v));
    }
    let n = mesh.num_elements();
    let (per_element, closures_run) = if exact_average {
        let sizes = (0..n)
            .into_par_iter()
            .map(|i| closure_of(mesh, i).map(|(c, _)| c))
            .collect::<Result<Vec<_>>>()?;
        (sizes, n)
    } else {
        let mut sizes: Vec<Option<usize>> = vec![None; n];
        let mut run = 0;
        for i in 0..n {
            if sizes[i].is_some() {
                continue;
            }
            let (c, touched) = closure_of(mesh, i)?;
            run += 1;
            sizes[i] = Some(c);
            for j in touched {
                if sizes[j].is_none() {
                    sizes[j] = Some(c);
                }
            }
        }
        (sizes.into_iter().map(|s| s.unwrap_or(0)).collect(), run)
    };
    Ok(ClosureReport {
        d2_max: per_element.iter().copied().max().unwrap_or(0),
        closure_sum: per_element.iter().map(|&c| c as u64).sum(),
        level: 0,
        per_element,
        closures_run,
        exact_average,
    })
}

/// [`distance2`] after `level` uniform refinements.
pub fn distance2_at_level(mesh: &Mesh, level: usize, exact_average: bool) -> Result<ClosureReport> {
    let refined = uniform_refine(mesh, level);
    let mut report = distance2(&refined, exact_average)?;
    report.level = level;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_kuhn_grid, Simplex};

    fn regular_tet() -> Mesh {
        let pts = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ];
        Mesh::build(3, &pts, vec![Simplex::from_ids(&[0, 1, 2, 3], 0)]).unwrap()
    }

    #[test]
    fn regular_tetra_corners() {
        let m = regular_tet();
        for pos in 0..4 {
            let s = polar_sine(&m, 0, pos).unwrap();
            assert!((s - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn kuhn_tetra_origin_corner() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]];
        let m = Mesh::build(3, &pts, vec![Simplex::from_ids(&[0, 1, 2, 3], 0)]).unwrap();
        let s = polar_sine(&m, 0, 0).unwrap();
        assert!((s - 1.0 / 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn right_triangle_measures() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        let m = Mesh::build(2, &pts, vec![Simplex::from_ids(&[0, 1, 2], 0)]).unwrap();
        let q = element_quality(&m, 0).unwrap();
        assert!((q.volume - 2.0).abs() < 1e-14);
        // faces are edges in 2d: F/LE = 1 and F/SE = 1
        assert!((q.f_le - 1.0).abs() < 1e-14 && (q.f_se - 1.0).abs() < 1e-14);
        assert!((q.v_le - 2.0 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_element_is_reported() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        let m = Mesh::build(2, &pts, vec![Simplex::from_ids(&[0, 1, 2], 0)]).unwrap();
        assert_eq!(polar_sine(&m, 0, 0), Err(MeshError::DegenerateElement { element: 0 }));
        assert!(quality_report(&m).is_err());
    }

    #[test]
    fn kuhn_cube_adjacency() {
        let m = generate_kuhn_grid(3, 1).unwrap();
        let r = quality_report(&m).unwrap();
        assert_eq!(r.max_elements_per_vertex, 6);
        assert_eq!(r.max_elements_per_edge, 6);
        for s in r.stats() {
            assert!(s.min <= s.avg && s.avg <= s.max && s.min > 0.0);
        }
        // all Kuhn simplices are congruent
        assert!((r.v_le.max - r.v_le.min).abs() < 1e-14);
        assert_eq!(quality_report(&regular_tet()).unwrap().max_elements_per_vertex, 1);
    }

    #[test]
    fn single_element_closure() {
        let r = distance2(&regular_tet(), true).unwrap();
        assert_eq!(r.d2_max, 1);
        assert_eq!(r.per_element, vec![1]);
    }

    #[test]
    fn two_triangles_sharing_refinement_edge() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let els = vec![Simplex::from_ids(&[0, 1, 2], 0), Simplex::from_ids(&[0, 3, 2], 0)];
        let m = Mesh::build(2, &pts, els).unwrap();
        for exact in [true, false] {
            let r = distance2(&m, exact).unwrap();
            assert_eq!(r.d2_max, 2);
        }
        assert_eq!(distance2(&m, false).unwrap().closures_run, 1);
    }

    #[test]
    fn shortcut_bounds_exact_average() {
        let m = generate_kuhn_grid(3, 2).unwrap();
        let exact = distance2(&m, true).unwrap();
        let fast = distance2(&m, false).unwrap();
        assert_eq!(exact.d2_max, fast.d2_max);
        assert!(fast.closure_sum >= exact.closure_sum);
        for (f, e) in fast.per_element.iter().zip(&exact.per_element) {
            assert!(f >= e);
        }
        assert!(exact.per_element.iter().all(|&c| c >= 1));
    }

    #[test]
    fn level_is_recorded() {
        let m = generate_kuhn_grid(2, 1).unwrap();
        let r = distance2_at_level(&m, 2, false).unwrap();
        assert_eq!(r.level, 2);
        assert_eq!(r.per_element.len(), 8);
    }
}
