//! Exact Dirichlet enforcement for non-polynomial data on a straight,
//! coordinate-aligned boundary segment.
//!
//! The data on the line `x_axis = c` is extended linearly in the normal
//! direction across the band between `c` and the closest mesh line
//! `x_axis = t` that cuts no element. On band elements the nodal interpolant
//! of the extension is replaced by the extension itself.

use std::collections::BTreeMap;

use super::potential::{interpolate, ContinuousPotential, Extension};
use crate::data::DataFn;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// A boundary portion lying on `x = value` (`axis = 0`) or `y = value` (`axis = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisLine {
    pub axis: usize,
    pub value: f64,
}

const TOL: f64 = 1e-12;

/// Groups facets by the coordinate line they lie on.
pub fn axis_lines(mesh: &Mesh, facets: &[usize]) -> Result<Vec<AxisLine>> {
    let mut lines: BTreeMap<(usize, u64), AxisLine> = BTreeMap::new();
    for &f in facets {
        let (a, b) = mesh.facet_points(f);
        let scale = mesh.facets[f].length;
        let axis = if (a[0] - b[0]).abs() <= TOL * scale {
            0
        } else if (a[1] - b[1]).abs() <= TOL * scale {
            1
        } else {
            return Err(Error::Unsupported(format!(
                "Dirichlet data is not a polynomial of the potential degree on the facet \
                 {a:?} → {b:?}, which is not aligned with a coordinate axis"
            )));
        };
        let value = 0.5 * (a[axis] + b[axis]);
        let key = lines
            .values()
            .find(|l| l.axis == axis && (l.value - value).abs() <= 1e-10 * (1.0 + value.abs()))
            .map(|l| (l.axis, l.value.to_bits()));
        if key.is_none() {
            lines.insert((axis, value.to_bits()), AxisLine { axis, value });
        }
    }
    Ok(lines.into_values().collect())
}

/// Band coordinate: the closest vertex coordinate to `line` whose level line
/// separates the mesh without cutting any element.
pub fn band_coordinate(mesh: &Mesh, line: AxisLine) -> Result<(f64, f64)> {
    let ax = line.axis;
    let c = line.value;
    let lo = mesh.vertices.iter().map(|v| v[ax]).fold(f64::INFINITY, f64::min);
    let hi = mesh.vertices.iter().map(|v| v[ax]).fold(f64::NEG_INFINITY, f64::max);
    let extent = hi - lo;
    // `dir` points from the boundary line into the domain.
    let dir = if (c - hi).abs() <= TOL * extent {
        -1.0
    } else if (c - lo).abs() <= TOL * extent {
        1.0
    } else {
        return Err(Error::Band(format!(
            "the line {}={c} is not an extreme coordinate of the domain",
            ["x", "y"][ax]
        )));
    };
    let ranges: Vec<(f64, f64)> = mesh
        .elements
        .iter()
        .map(|el| {
            let v = el.map(|i| mesh.vertices[i][ax]);
            (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    let mut cands: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|v| v[ax])
        .filter(|t| dir * (t - c) > TOL * extent)
        .collect();
    cands.sort_by(|a, b| (dir * (a - c)).total_cmp(&(dir * (b - c))));
    cands.dedup_by(|a, b| (*a - *b).abs() <= TOL * extent);
    let tol = 1e-10 * extent;
    for t in cands {
        if ranges.iter().all(|(a, b)| *a >= t - tol || *b <= t + tol) {
            return Ok((t, dir));
        }
    }
    Err(Error::Band(format!(
        "no mesh line parallel to {}={c} separates the elements; refine the mesh near this boundary",
        ["x", "y"][ax]
    )))
}

/// Adds the extension correction for `line` to `pot` in place.
pub fn enforce_dirichlet_band(
    pot: &mut ContinuousPotential,
    mesh: &Mesh,
    g_d: &DataFn,
    line: AxisLine,
) -> Result<()> {
    if !g_d.has_grad() {
        return Err(Error::Unsupported(
            "band extension needs the gradient of the Dirichlet data".into(),
        ));
    }
    let (t, dir) = band_coordinate(mesh, line)?;
    let ax = line.axis;
    let c = line.value;
    let width = (c - t).abs();
    let g = g_d.clone();
    let ext = move |x: [f64; 2]| -> (f64, [f64; 2]) {
        let s = dir * (t - x[ax]) / width;
        if s <= 0.0 {
            return (0.0, [0.0, 0.0]);
        }
        let mut y = x;
        y[ax] = c;
        let gv = g.eval(y);
        let gg = g.grad(y).unwrap_or([0.0, 0.0]);
        let mut grad = [0.0; 2];
        grad[ax] = -dir * gv / width;
        grad[1 - ax] = gg[1 - ax] * s;
        (gv * s, grad)
    };
    let band: Vec<usize> = (0..mesh.num_elements())
        .filter(|&k| {
            mesh.elements[k]
                .iter()
                .all(|&i| dir * (t - mesh.vertices[i][ax]) >= -1e-10 * width)
        })
        .collect();
    if let Some(&k) = band.iter().find(|&&k| pot.element_extension[k].is_some()) {
        return Err(Error::Unsupported(format!(
            "element {k} lies in two extension bands; non-polynomial Dirichlet data on \
             intersecting boundary lines is not supported"
        )));
    }
    let id = pot.extensions.len();
    pot.extensions.push(Extension::new(ext.clone()));
    for k in band {
        let interp = interpolate(mesh, k, pot.degree, |x| ext(x).0);
        for (c, i) in pot.coeffs[k].iter_mut().zip(interp) {
            *c -= i;
        }
        pot.element_extension[k] = Some(id);
    }
    pot.pending_facets.retain(|&f| {
        let (a, b) = mesh.facet_points(f);
        !((a[ax] - c).abs() <= 1e-10 * width && (b[ax] - c).abs() <= 1e-10 * width)
    });
    Ok(())
}

/// Applies band extensions for every pending Dirichlet facet.
pub fn enforce_all_bands(pot: &mut ContinuousPotential, mesh: &Mesh, g_d: &DataFn) -> Result<()> {
    let lines = axis_lines(mesh, &pot.pending_facets)?;
    for line in lines {
        enforce_dirichlet_band(pot, mesh, g_d, line)?;
    }
    Ok(())
}
