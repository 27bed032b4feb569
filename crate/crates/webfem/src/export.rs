//! Field exports (CSV lattice samples, VTK legacy structured points) and
//! atomic file writes.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::ExportFormat;
use crate::error::Result;
use crate::post::Solution;

/// Sample the solution on a `res^m` lattice over the bounding box
/// (endpoints included) and render it in the requested format. Points
/// outside the domain carry `inside = 0` and zero values.
pub fn render_field(sol: &Solution, res: usize, format: ExportFormat) -> Result<String> {
    assert!(res >= 2, "field export needs at least 2 samples per dimension");
    match format {
        ExportFormat::Csv => render_csv(sol, res),
        ExportFormat::Vtk => render_vtk(sol, res),
    }
}

fn lattice(range: (f64, f64), res: usize, i: usize) -> f64 {
    range.0 + (range.1 - range.0) * i as f64 / (res - 1) as f64
}

fn samples(sol: &Solution, res: usize) -> Result<Vec<(f64, f64, bool, f64, f64)>> {
    let m = sol.basis.grid.m;
    let bb = &sol.basis.dom.bounding_box;
    let mut rows = Vec::new();
    // y varies fastest in CSV order; VTK needs x fastest and re-sorts
    if m == 1 {
        for i in 0..res {
            let x = lattice(bb[0], res, i);
            let v = sol.eval(&[x])?;
            rows.push((x, 0.0, v.inside, v.u1, v.u2));
        }
    } else {
        for i in 0..res {
            for j in 0..res {
                let x = lattice(bb[0], res, i);
                let y = lattice(bb[1], res, j);
                let v = sol.eval(&[x, y])?;
                rows.push((x, y, v.inside, v.u1, v.u2));
            }
        }
    }
    Ok(rows)
}

fn render_csv(sol: &Solution, res: usize) -> Result<String> {
    let mut out = String::from("x,y,inside,u1,u2\n");
    for (x, y, inside, u1, u2) in samples(sol, res)? {
        writeln!(out, "{x},{y},{},{u1:.12e},{u2:.12e}", if inside { 1 } else { 0 }).unwrap();
    }
    Ok(out)
}

fn render_vtk(sol: &Solution, res: usize) -> Result<String> {
    let m = sol.basis.grid.m;
    let bb = &sol.basis.dom.bounding_box;
    let rows = samples(sol, res)?;
    let (nx, ny) = if m == 1 { (res, 1) } else { (res, res) };
    let dy = if m == 1 { 1.0 } else { (bb[1].1 - bb[1].0) / (res - 1) as f64 };
    let oy = if m == 1 { 0.0 } else { bb[1].0 };

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("webfem solution field\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    writeln!(out, "DIMENSIONS {nx} {ny} 1").unwrap();
    writeln!(out, "ORIGIN {} {oy} 0", bb[0].0).unwrap();
    writeln!(out, "SPACING {} {dy} 1", (bb[0].1 - bb[0].0) / (res - 1) as f64).unwrap();
    writeln!(out, "POINT_DATA {}", nx * ny).unwrap();

    // VTK structured points iterate x fastest; rows are (i, j) with j
    // fastest, so index arithmetic transposes
    let at = |i: usize, j: usize| &rows[if m == 1 { i } else { i * res + j }];
    let mut scalar = |name: &str, kind: &str, f: &dyn Fn(&(f64, f64, bool, f64, f64)) -> String| {
        writeln!(out, "SCALARS {name} {kind} 1").unwrap();
        out.push_str("LOOKUP_TABLE default\n");
        for j in 0..ny {
            for i in 0..nx {
                out.push_str(&f(at(i, j)));
                out.push('\n');
            }
        }
    };
    scalar("u1", "double", &|r| format!("{:.12e}", r.3));
    scalar("u2", "double", &|r| format!("{:.12e}", r.4));
    scalar("inside", "int", &|r| if r.2 { "1".into() } else { "0".into() });
    Ok(out)
}

/// Write via a temporary sibling file and rename, so readers never observe
/// a partial file.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
