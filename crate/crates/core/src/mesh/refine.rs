//! Red refinement with green closure, and longest-edge bisection.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{edge_key, Mesh};
use crate::error::{Error, Result};
use crate::fem::element::LOCAL_FACETS;

type Edge = (usize, usize);

fn validate_marks(mesh: &Mesh, marks: &[usize]) -> Result<()> {
    for &m in marks {
        if m >= mesh.num_elements() {
            return Err(Error::BadMark {
                index: m,
                count: mesh.num_elements(),
            });
        }
    }
    Ok(())
}

fn element_edges(el: &[usize; 3]) -> [Edge; 3] {
    LOCAL_FACETS.map(|[a, b]| edge_key(el[a], el[b]))
}

/// Shared bookkeeping for building a refined mesh.
struct Builder<'a> {
    mesh: &'a Mesh,
    vertices: Vec<[f64; 2]>,
    midpoints: BTreeMap<Edge, usize>,
    elements: Vec<[usize; 3]>,
    regions: Vec<u32>,
}

impl<'a> Builder<'a> {
    fn new(mesh: &'a Mesh, split: &BTreeSet<Edge>) -> Self {
        let mut vertices = mesh.vertices.clone();
        let mut midpoints = BTreeMap::new();
        for &(a, b) in split {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            midpoints.insert((a, b), vertices.len());
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        Self {
            mesh,
            vertices,
            midpoints,
            elements: Vec::new(),
            regions: Vec::new(),
        }
    }

    fn mid(&self, a: usize, b: usize) -> Option<usize> {
        self.midpoints.get(&edge_key(a, b)).copied()
    }

    fn push(&mut self, el: [usize; 3], region: u32) {
        self.elements.push(el);
        self.regions.push(region);
    }

    fn finish(self) -> Result<Mesh> {
        let mut boundary = Vec::new();
        for (v, tag) in self.mesh.boundary_edges() {
            match self.mid(v[0], v[1]) {
                Some(m) => {
                    boundary.push(([v[0], m], tag));
                    boundary.push(([m, v[1]], tag));
                }
                None => boundary.push((v, tag)),
            }
        }
        let mesh = Mesh::new(
            self.vertices,
            self.elements,
            self.regions,
            self.mesh.nu.clone(),
            &boundary,
        )?;
        Ok(mesh)
    }
}

/// Red refinement of the marked elements; neighbours are closed by promotion to
/// red (two or more split edges) or green bisection (one split edge).
pub fn refine_red(mesh: &Mesh, marks: &[usize]) -> Result<Mesh> {
    validate_marks(mesh, marks)?;
    if marks.is_empty() {
        return Ok(mesh.clone());
    }
    let mut red = vec![false; mesh.num_elements()];
    let mut split: BTreeSet<Edge> = BTreeSet::new();
    for &m in marks {
        red[m] = true;
        split.extend(element_edges(&mesh.elements[m]));
    }
    loop {
        let mut changed = false;
        for (k, el) in mesh.elements.iter().enumerate() {
            if red[k] {
                continue;
            }
            let n = element_edges(el).iter().filter(|e| split.contains(e)).count();
            if n >= 2 {
                red[k] = true;
                split.extend(element_edges(el));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut b = Builder::new(mesh, &split);
    for (k, &[v0, v1, v2]) in mesh.elements.iter().enumerate() {
        let region = mesh.regions[k];
        if red[k] {
            let m01 = b.mid(v0, v1).expect("red edge split");
            let m12 = b.mid(v1, v2).expect("red edge split");
            let m20 = b.mid(v2, v0).expect("red edge split");
            b.push([v0, m01, m20], region);
            b.push([m01, v1, m12], region);
            b.push([m20, m12, v2], region);
            b.push([m01, m12, m20], region);
            continue;
        }
        let el = [v0, v1, v2];
        match (0..3).find(|&i| b.mid(el[(i + 1) % 3], el[(i + 2) % 3]).is_some()) {
            Some(i) => {
                let (a, c, d) = (el[i], el[(i + 1) % 3], el[(i + 2) % 3]);
                let m = b.mid(c, d).expect("green edge split");
                b.push([a, c, m], region);
                b.push([a, m, d], region);
            }
            None => b.push(el, region),
        }
    }
    b.finish()
}

/// Longest edge of an element with a deterministic tie-break: equal lengths
/// (to relative 1e-12) go to the lexicographically smallest vertex pair.
fn longest_edge(mesh: &Mesh, el: &[usize; 3]) -> Edge {
    let len2 = |(a, b): Edge| {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)
    };
    let edges = element_edges(el);
    let max = edges.iter().map(|&e| len2(e)).fold(0.0, f64::max);
    edges
        .iter()
        .copied()
        .filter(|&e| len2(e) >= max * (1.0 - 1e-12))
        .min()
        .expect("triangle has edges")
}

/// Longest-edge bisection of the marked elements with conforming closure.
pub fn refine_bisection(mesh: &Mesh, marks: &[usize]) -> Result<Mesh> {
    validate_marks(mesh, marks)?;
    if marks.is_empty() {
        return Ok(mesh.clone());
    }
    let longest: Vec<Edge> = mesh.elements.iter().map(|el| longest_edge(mesh, el)).collect();
    let mut split: BTreeSet<Edge> = marks.iter().map(|&m| longest[m]).collect();
    // Any element touching a split edge must also split its own longest edge.
    let mut edge_elems: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, el) in mesh.elements.iter().enumerate() {
        for e in element_edges(el) {
            edge_elems.entry(e).or_default().push(k);
        }
    }
    let mut stack: Vec<Edge> = split.iter().copied().collect();
    while let Some(e) = stack.pop() {
        for &k in &edge_elems[&e] {
            if split.insert(longest[k]) {
                stack.push(longest[k]);
            }
        }
    }
    let mut b = Builder::new(mesh, &split);
    for (k, el) in mesh.elements.iter().enumerate() {
        let region = mesh.regions[k];
        let (la, lb) = longest[k];
        let Some(m) = b.mid(la, lb) else {
            b.push(*el, region);
            continue;
        };
        // Rotate so the longest edge is (el[1], el[2]) and el[0] is its opposite vertex.
        let i = (0..3)
            .find(|&i| edge_key(el[(i + 1) % 3], el[(i + 2) % 3]) == (la, lb))
            .expect("longest edge belongs to element");
        let (a, c, d) = (el[i], el[(i + 1) % 3], el[(i + 2) % 3]);
        for child in [[a, c, m], [a, m, d]] {
            // The only possibly split edge left in a child is the one it keeps
            // from its parent, opposite the new midpoint vertex `m`.
            let j = child.iter().position(|&v| v == m).expect("child contains midpoint");
            let (p, q) = (child[(j + 1) % 3], child[(j + 2) % 3]);
            match b.mid(p, q) {
                Some(mm) => {
                    b.push([m, p, mm], region);
                    b.push([m, mm, q], region);
                }
                None => b.push(child, region),
            }
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{lshape_initial, unit_nu, unit_square_crisscross, BoundaryTag};

    fn two_triangles() -> Mesh {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let b: Vec<_> = [[0, 1], [1, 2], [2, 3], [3, 0]]
            .iter()
            .map(|&e| (e, BoundaryTag::Dirichlet))
            .collect();
        Mesh::new(v, vec![[0, 1, 2], [0, 2, 3]], vec![0, 0], unit_nu(), &b).unwrap()
    }

    #[test]
    fn empty_marks_return_same_mesh() {
        let m = lshape_initial();
        assert_eq!(refine_red(&m, &[]).unwrap().elements, m.elements);
        assert_eq!(refine_bisection(&m, &[]).unwrap().elements, m.elements);
    }

    #[test]
    fn bad_marks_rejected() {
        let m = lshape_initial();
        assert!(matches!(refine_red(&m, &[6]), Err(Error::BadMark { .. })));
        assert!(matches!(refine_bisection(&m, &[17]), Err(Error::BadMark { .. })));
    }

    #[test]
    fn single_red_mark_is_closed_by_green() {
        let m = two_triangles();
        let r = refine_red(&m, &[0]).unwrap();
        r.check().unwrap();
        assert_eq!(r.num_elements(), 6);
        assert!((r.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_bisection_of_lshape_doubles() {
        let m = lshape_initial();
        let all: Vec<usize> = (0..6).collect();
        let r = refine_bisection(&m, &all).unwrap();
        assert_eq!(r.num_elements(), 12);
        r.check().unwrap();
        let r2 = refine_bisection(&r, &(0..12).collect::<Vec<_>>()).unwrap();
        assert_eq!(r2.num_elements(), 24);
    }

    #[test]
    fn single_interior_bisection_is_conforming() {
        let m = unit_square_crisscross(1);
        let r = refine_bisection(&m, &[21]).unwrap();
        r.check().unwrap();
        assert!((r.total_area() - 1.0).abs() < 1e-12);
        assert!(r.num_elements() > m.num_elements());
    }

    #[test]
    fn boundary_tags_inherited() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let b = vec![
            ([0, 1], BoundaryTag::Dirichlet),
            ([1, 2], BoundaryTag::Neumann),
            ([2, 3], BoundaryTag::Dirichlet),
            ([3, 0], BoundaryTag::Neumann),
        ];
        let m = Mesh::new(v, vec![[0, 1, 2], [0, 2, 3]], vec![0, 0], unit_nu(), &b).unwrap();
        let r = refine_red(&m, &[0, 1]).unwrap();
        for f in r.facets.iter().filter(|f| f.boundary) {
            let (a, b) = r.facet_points(r.facets.iter().position(|g| std::ptr::eq(g, f)).unwrap());
            let on_neumann = (a[0] == 1.0 && b[0] == 1.0) || (a[0] == 0.0 && b[0] == 0.0);
            let expect = if on_neumann {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            };
            assert_eq!(f.tag, Some(expect));
        }
    }
}
