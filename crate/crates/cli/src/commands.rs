use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nvb_core::io::{read_mesh, write_mesh};
use nvb_core::{
    check_weak, distance1, distance2_at_level, generate_kuhn_grid, quality_report, refine_closure, relabel as run_relabel,
    uniform_refine, AnnouncedEdges, EdgeKey, Mesh, OrderStrategy, QualityReport, SetStrategy, VertexId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Order, Sets};

pub fn load(path: &Path) -> Result<Mesh> {
    read_mesh(path).with_context(|| format!("reading {}", path.display()))
}

pub fn save(mesh: &Mesh, path: &Path) -> Result<()> {
    write_mesh(mesh, path).with_context(|| format!("writing {}", path.display()))
}

pub fn set_strategy(sets: Sets, threshold: u32) -> SetStrategy {
    match sets {
        Sets::Ot0 => SetStrategy::Ot0,
        Sets::Ile => SetStrategy::Ile(threshold),
        Sets::Lae => SetStrategy::Lae(threshold),
    }
}

pub fn order_strategy(order: Order) -> OrderStrategy {
    match order {
        Order::Srn => OrderStrategy::Srn,
        Order::Srn2 => OrderStrategy::Srn2,
    }
}

pub fn check(path: &Path, boundary: bool, csv: bool) -> Result<u8> {
    let mesh = load(path)?;
    let cert = check_weak(&mesh)?;
    let report = distance1(&mesh, boundary)?;
    let weak = cert.is_weakly_compatible();
    if csv {
        println!("weakly_compatible,weakest_failures,strong,quasi_strong,weakly_only,incompatible,boundary,interior_faces,d1,d1_fraction");
        println!(
            "{weak},{},{},{},{},{},{},{},{},{}",
            cert.weakest_failures.len(),
            report.strong,
            report.quasi_strong,
            report.weakly_only,
            report.incompatible,
            report.boundary,
            report.interior_faces,
            report.d1,
            report.d1_fraction()
        );
    } else {
        println!("elements: {}", mesh.num_elements());
        println!("interior faces: {}", report.interior_faces);
        if report.boundary_included {
            println!("boundary faces: {}", report.boundary);
        }
        println!("strong: {}", report.strong);
        println!("quasi-strong: {} ({} wrapping)", report.quasi_strong, report.wrapped_quasi_strong);
        println!("weakly only: {}", report.weakly_only);
        println!("incompatible: {}", report.incompatible);
        println!("d1: {} ({:.4})", report.d1, report.d1_fraction());
        println!("weakest compatible: {}", cert.weakest_failures.is_empty());
        for face in &cert.weakest_failures {
            println!("  incompatible face {face}");
        }
        if let Some(why) = &cert.certificate_failure {
            println!("type-0 completion not conforming: {why}");
        }
        println!("weakly compatible: {weak}");
    }
    Ok(if weak { 0 } else { 1 })
}

fn read_announcements(mesh: &Mesh, path: &Path) -> Result<AnnouncedEdges> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut edges = AnnouncedEdges::longest_edges(mesh).edges().to_vec();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<u32> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}:{}: expected `element v_a v_b`", path.display(), i + 1))?;
        let [e, a, b] = nums[..] else {
            bail!("{}:{}: expected `element v_a v_b`", path.display(), i + 1);
        };
        let slot = edges
            .get_mut(e as usize)
            .with_context(|| format!("{}:{}: no element {e}", path.display(), i + 1))?;
        *slot = EdgeKey::new(VertexId(a), VertexId(b));
    }
    Ok(AnnouncedEdges::new(mesh, edges)?)
}

pub fn relabel(input: &Path, output: &Path, sets: Sets, threshold: u32, order: Order, announce: Option<&Path>) -> Result<u8> {
    let mesh = load(input)?;
    let announced = announce.map(|p| read_announcements(&mesh, p)).transpose()?;
    let out = run_relabel(&mesh, set_strategy(sets, threshold), order_strategy(order), announced.as_ref())?;
    let m = out.partition.membership();
    println!("V0: {}  V1: {}", m.v0_count(), m.v1_count());
    if !out.demoted.is_empty() {
        eprintln!(
            "warning: moved {} vertices to V0 to repair elements without a V0 refinement edge",
            out.demoted.len()
        );
    }
    save(&out.mesh, output)?;
    Ok(0)
}

pub enum Refinement {
    Uniform(usize),
    MarkFile(PathBuf),
    Random { p: f64, seed: u64 },
}

fn read_marks(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut marks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let m: usize = tok
                .parse()
                .with_context(|| format!("{}:{}: invalid element index `{tok}`", path.display(), i + 1))?;
            if m >= n {
                bail!("{}:{}: element {m} out of range, mesh has {n}", path.display(), i + 1);
            }
            marks.push(m);
        }
    }
    Ok(marks)
}

pub fn refine(input: &Path, output: &Path, how: Refinement) -> Result<u8> {
    let mut mesh = load(input)?;
    let n = mesh.num_elements();
    let marks = match how {
        Refinement::Uniform(k) => {
            mesh = uniform_refine(&mesh, k);
            println!("elements: {n} -> {}", mesh.num_elements());
            save(&mesh, output)?;
            return Ok(0);
        }
        Refinement::MarkFile(path) => read_marks(&path, n)?,
        Refinement::Random { p, seed } => {
            if !(0.0..=1.0).contains(&p) {
                bail!("--mark-random must lie in [0, 1], got {p}");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).filter(|_| rng.random_bool(p)).collect()
        }
    };
    let stats = refine_closure(&mut mesh, &marks)?;
    println!(
        "marked: {}  bisections: {}  passes: {}  elements: {n} -> {}",
        marks.len(),
        stats.bisections,
        stats.passes,
        mesh.num_elements()
    );
    save(&mesh, output)?;
    Ok(0)
}

pub fn quality_columns(prefix: &str) -> Vec<String> {
    let mut cols = Vec::new();
    for name in QualityReport::NAMES {
        for stat in ["min", "avg", "max"] {
            cols.push(format!("{prefix}{name}_{stat}"));
        }
    }
    cols.push(format!("{prefix}max_elements_per_vertex"));
    cols.push(format!("{prefix}max_elements_per_edge"));
    cols
}

pub fn quality_values(q: &QualityReport) -> Vec<String> {
    let mut vals = Vec::new();
    for s in q.stats() {
        vals.extend([s.min, s.avg, s.max].map(|x| x.to_string()));
    }
    vals.push(q.max_elements_per_vertex.to_string());
    vals.push(q.max_elements_per_edge.to_string());
    vals
}

pub fn metrics(path: &Path, k: usize, csv: bool) -> Result<u8> {
    let mesh = uniform_refine(&load(path)?, k);
    let q = quality_report(&mesh)?;
    if csv {
        println!("{}", quality_columns("").join(","));
        println!("{}", quality_values(&q).join(","));
    } else {
        let mut out = String::new();
        writeln!(out, "elements: {} (after {k} uniform refinements)", mesh.num_elements())?;
        writeln!(out, "{:<12} {:>12} {:>12} {:>12}", "indicator", "min", "avg", "max")?;
        for (name, s) in QualityReport::NAMES.iter().zip(q.stats()) {
            writeln!(out, "{name:<12} {:>12.6} {:>12.6} {:>12.6}", s.min, s.avg, s.max)?;
        }
        writeln!(out, "max elements per vertex: {}", q.max_elements_per_vertex)?;
        write!(out, "max elements per edge: {}", q.max_elements_per_edge)?;
        println!("{out}");
    }
    Ok(0)
}

pub fn closure(path: &Path, level: usize, exact: bool) -> Result<u8> {
    let mesh = load(path)?;
    let r = distance2_at_level(&mesh, level, exact)?;
    println!("level: {}", r.level);
    println!("elements: {}", r.per_element.len());
    println!("d2 max: {}", r.d2_max);
    let kind = if r.exact_average { "exact" } else { "upper bound" };
    println!("closure average ({kind}): {:.4}", r.average());
    println!("closures run: {}", r.closures_run);
    Ok(0)
}

pub fn gen_kuhn(dim: usize, cells: usize, output: &Path) -> Result<u8> {
    let mesh = generate_kuhn_grid(dim, cells)?;
    println!("vertices: {}  elements: {}", mesh.num_vertices(), mesh.num_elements());
    save(&mesh, output)?;
    Ok(0)
}

pub fn convert(input: &Path, output: &Path) -> Result<u8> {
    save(&load(input)?, output)?;
    Ok(0)
}
