//! Element-local minimization of `‖q̃ + ν∇ũ‖_K` over corrections that keep the
//! divergence, the normal trace and the boundary trace fixed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::flux::EquilibratedFlux;
use super::potential::ContinuousPotential;
use crate::error::{Error, Result};
use crate::fem::basis::{dim_p, BasisEval};
use crate::fem::eval::{eval_basis, ElementQuad, FacetQuad};
use crate::fem::lagrange::lagrange_ref;
use crate::fem::projection::VectorPoly;
use crate::mesh::Mesh;

/// Orthonormal basis of the null space of `c` as columns.
fn null_space(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.ncols();
    let ctc = c.transpose() * c;
    let eig = SymmetricEigen::new(ctc);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max).max(1e-300);
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-12 * max).collect();
    let mut out = DMatrix::zeros(n, cols.len());
    for (j, &i) in cols.iter().enumerate() {
        out.set_column(j, &eig.eigenvectors.column(i));
    }
    out
}

/// Returns the optimized pair together with the squared objective per element
/// before and after.
pub fn local_optimize(
    mesh: &Mesh,
    flux: &EquilibratedFlux,
    pot: &ContinuousPotential,
    quad_degree: usize,
) -> Result<(EquilibratedFlux, ContinuousPotential, Vec<(f64, f64)>)> {
    let results: Vec<(VectorPoly, Vec<f64>, (f64, f64))> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| optimize_element(mesh, flux, pot, k, quad_degree))
        .collect::<Result<_>>()?;
    let mut new_flux = flux.clone();
    let mut new_pot = pot.clone();
    let mut objective = Vec::with_capacity(results.len());
    for (k, (q, u, obj)) in results.into_iter().enumerate() {
        new_flux.fields[k] = q;
        new_pot.set_element(mesh, k, u);
        objective.push(obj);
    }
    Ok((new_flux, new_pot, objective))
}

fn optimize_element(
    mesh: &Mesh,
    flux: &EquilibratedFlux,
    pot: &ContinuousPotential,
    k: usize,
    quad_degree: usize,
) -> Result<(VectorPoly, Vec<f64>, (f64, f64))> {
    let geo = mesh.geometry(k);
    let nu = mesh.element_nu(k);
    let d = pot.degree.max(flux.fields[k].degree);
    let n = dim_p(d);
    let np = dim_p(d - 1);

    // Divergence-free corrections with vanishing normal trace.
    let mut cq = DMatrix::zeros(np + 3 * (d + 1), 2 * n);
    let eq = ElementQuad::new(geo, d, quad_degree.max(2 * d + 2));
    for q in 0..eq.len() {
        let b = eq.at(q);
        for i in 0..np {
            for j in 0..n {
                cq[(i, j)] += eq.weights[q] * b[j].grad[0] * b[i].value;
                cq[(i, n + j)] += eq.weights[q] * b[j].grad[1] * b[i].value;
            }
        }
    }
    for f in 0..3 {
        let (a, bb) = mesh.facet_points(mesh.element_facets[k][f]);
        let fq = FacetQuad::new(geo, a, bb, d, d, 2 * d + 2);
        let [nx, ny] = geo.normal[f];
        for q in 0..fq.len() {
            let eb = fq.elem_at(q);
            let mu = fq.facet_at(q);
            for m in 0..=d {
                let row = np + f * (d + 1) + m;
                for j in 0..n {
                    let v = fq.weights[q] * eb[j].value * mu[m];
                    cq[(row, j)] += nx * v;
                    cq[(row, n + j)] += ny * v;
                }
            }
        }
    }
    let nq = null_space(&cq);

    // Potential corrections vanishing on the element boundary.
    let lag = lagrange_ref(pot.degree);
    let nb = 3 * pot.degree;
    let nu_pot = dim_p(pot.degree);
    let mut cu = DMatrix::zeros(nb, nu_pot);
    let mut buf = vec![BasisEval::default(); nu_pot];
    for i in 0..nb {
        eval_basis(geo, pot.degree, geo.map.to_physical(lag.nodes[i]), &mut buf);
        for j in 0..nu_pot {
            cu[(i, j)] = buf[j].value;
        }
    }
    let nuu = null_space(&cu);

    let fl = &flux.fields[k];
    let vals = pot.at_quad(k, &eq);
    let m = nq.ncols() + nuu.ncols();
    let rows = 2 * eq.len();
    let mut a = DMatrix::zeros(rows, m);
    let mut r = DVector::zeros(rows);
    for q in 0..eq.len() {
        let s = (eq.weights[q] / nu).sqrt();
        let b = eq.at(q);
        let g = vals[q].1;
        r[2 * q] = s * (eq.value(q, &fl.x) + nu * g[0]);
        r[2 * q + 1] = s * (eq.value(q, &fl.y) + nu * g[1]);
        for c in 0..nq.ncols() {
            let mut vx = 0.0;
            let mut vy = 0.0;
            for j in 0..n {
                vx += b[j].value * nq[(j, c)];
                vy += b[j].value * nq[(n + j, c)];
            }
            a[(2 * q, c)] = s * vx;
            a[(2 * q + 1, c)] = s * vy;
        }
        for c in 0..nuu.ncols() {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for j in 0..nu_pot {
                gx += b[j].grad[0] * nuu[(j, c)];
                gy += b[j].grad[1] * nuu[(j, c)];
            }
            a[(2 * q, nq.ncols() + c)] = s * nu * gx;
            a[(2 * q + 1, nq.ncols() + c)] = s * nu * gy;
        }
    }
    let before = r.norm_squared();
    let mut qx: Vec<f64> = fl.x.clone();
    let mut qy: Vec<f64> = fl.y.clone();
    qx.resize(n, 0.0);
    qy.resize(n, 0.0);
    let mut u = pot.coeffs[k].clone();
    if m == 0 {
        return Ok((VectorPoly { degree: d, x: qx, y: qy }, u, (before, before)));
    }
    let z = a
        .clone()
        .svd(true, true)
        .solve(&(-&r), 1e-13)
        .map_err(|e| Error::SingularLocal {
            element: k,
            detail: format!("local optimization least-squares solve failed: {e}"),
        })?;
    let after = (&r + &a * &z).norm_squared();
    if after > before {
        return Ok((VectorPoly { degree: d, x: qx, y: qy }, u, (before, before)));
    }
    let dq = &nq * z.rows(0, nq.ncols());
    let du = &nuu * z.rows(nq.ncols(), nuu.ncols());
    for j in 0..n {
        qx[j] += dq[j];
        qy[j] += dq[n + j];
    }
    for j in 0..nu_pot {
        u[j] += du[j];
    }
    Ok((VectorPoly { degree: d, x: qx, y: qy }, u, (before, after)))
}
