use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use nvb_core::{
    check_weak, distance1, distance2, generate_kuhn_grid, quality_report, relabel, uniform_refine, Mesh, OrderStrategy,
    SetStrategy,
};
use rayon::prelude::*;

use crate::commands::{load, order_strategy, quality_columns, quality_values, set_strategy};
use crate::{Order, Sets};

#[derive(Args, Debug)]
pub struct SweepArgs {
    mesh: PathBuf,
    /// Directory receiving one `<sets>_<order>.csv` per combination.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ile,lae")]
    sets: Vec<Sets>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "srn,srn2")]
    order: Vec<Order>,
    /// Inclusive threshold range `a..b`.
    #[arg(long, default_value = "0..10", value_parser = parse_range)]
    thresholds: (u32, u32),
    /// Add closure-size columns (expensive).
    #[arg(long)]
    with_d2: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Cells per axis of the 3d Kuhn grids to time.
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,12")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    dim: usize,
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected `a..b`, got `{s}`"))?;
    let a: u32 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: u32 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

fn header(d: usize, with_d2: bool) -> Vec<String> {
    let mut cols: Vec<String> =
        ["threshold", "v0_fraction", "demoted", "d1", "interior_faces", "d1_fraction"].map(String::from).into();
    cols.extend(quality_columns("l0_"));
    cols.extend(quality_columns(&format!("l{d}_")));
    if with_d2 {
        cols.extend(["d2_max", "closure_avg"].map(String::from));
    }
    cols.push("error".into());
    cols
}

/// One row; failures go in the error column so a sweep never aborts halfway.
fn row(mesh: &Mesh, threshold: Option<u32>, sets: SetStrategy, order: OrderStrategy, with_d2: bool) -> Vec<String> {
    let width = header(mesh.dim(), with_d2).len();
    let label = threshold.map_or("-1".to_string(), |t| t.to_string());
    let fill = |mut cells: Vec<String>, err: String| {
        cells.resize(width - 1, String::new());
        cells.push(err);
        cells
    };
    let mut cells = vec![label];
    let relabeled;
    let target = match threshold {
        None => {
            cells.extend([String::new(), String::new()]);
            mesh
        }
        Some(_) => match relabel(mesh, sets, order, None) {
            Ok(out) => {
                let m = out.partition.membership();
                cells.push((m.v0_count() as f64 / mesh.num_vertices() as f64).to_string());
                cells.push(out.demoted.len().to_string());
                relabeled = out.mesh;
                &relabeled
            }
            Err(e) => return fill(cells, e.to_string()),
        },
    };
    let d1 = match distance1(target, false) {
        Ok(r) => r,
        Err(e) => return fill(cells, e.to_string()),
    };
    cells.extend([d1.d1.to_string(), d1.interior_faces.to_string(), d1.d1_fraction().to_string()]);
    for level in [0, mesh.dim()] {
        match quality_report(&uniform_refine(target, level)) {
            Ok(q) => cells.extend(quality_values(&q)),
            Err(e) => return fill(cells, e.to_string()),
        }
    }
    if with_d2 {
        match distance2(target, false) {
            Ok(r) => cells.extend([r.d2_max.to_string(), r.average().to_string()]),
            Err(e) => return fill(cells, e.to_string()),
        }
    }
    fill(cells, String::new())
}

fn sets_name(s: Sets) -> &'static str {
    match s {
        Sets::Ot0 => "ot0",
        Sets::Ile => "ile",
        Sets::Lae => "lae",
    }
}

fn order_name(o: Order) -> &'static str {
    match o {
        Order::Srn => "srn",
        Order::Srn2 => "srn2",
    }
}

pub fn sweep(args: &SweepArgs) -> Result<u8> {
    let mesh = load(&args.mesh)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (lo, hi) = args.thresholds;
    for &sets in &args.sets {
        for &order in &args.order {
            let thresholds: Vec<Option<u32>> = if sets == Sets::Ot0 {
                // No threshold to vary.
                vec![None, Some(0)]
            } else {
                std::iter::once(None).chain((lo..=hi).map(Some)).collect()
            };
            let rows: Vec<Vec<String>> = thresholds
                .par_iter()
                .map(|&t| row(&mesh, t, set_strategy(sets, t.unwrap_or(0)), order_strategy(order), args.with_d2))
                .collect();
            let path = args.out.join(format!("{}_{}.csv", sets_name(sets), order_name(order)));
            let mut file =
                std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            writeln!(file, "# nvb-sweep v1 sets={} order={}", sets_name(sets), order_name(order))?;
            let mut w = csv::Writer::from_writer(file);
            w.write_record(header(mesh.dim(), args.with_d2))?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
            println!("wrote {}", path.display());
        }
    }
    Ok(0)
}

pub fn bench(args: &BenchArgs) -> Result<u8> {
    if args.sizes.is_empty() {
        bail!("--sizes is empty");
    }
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(["cells", "n", "seconds"])?;
    for &cells in &args.sizes {
        let mesh = generate_kuhn_grid(args.dim, cells)?;
        let start = Instant::now();
        let out = relabel(&mesh, SetStrategy::Lae(5), OrderStrategy::Srn2, None)?;
        check_weak(&out.mesh)?;
        let secs = start.elapsed().as_secs_f64();
        w.write_record([cells.to_string(), mesh.num_elements().to_string(), format!("{secs:.6}")])?;
        w.flush()?;
    }
    Ok(0)
}
