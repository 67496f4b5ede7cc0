//! Conforming triangular meshes with tagged boundary facets and per-region diffusivity.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::fem::element::{ElementGeometry, LOCAL_FACETS};

mod builders;
mod io;
mod refine;

pub use builders::{crisscross, lshape_initial, unit_square_crisscross};
pub use io::{read_mesh, write_mesh};
pub use refine::{refine_bisection, refine_red};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone)]
pub struct Facet {
    /// Sorted global vertex indices; the facet parameter runs from `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent elements, lower index first.
    pub elements: [usize; 2],
    /// Local facet index inside each adjacent element.
    pub local: [usize; 2],
    pub boundary: bool,
    pub tag: Option<BoundaryTag>,
    /// Unit normal pointing from `elements[0]` into `elements[1]` (outward on the boundary).
    pub normal: [f64; 2],
    pub length: f64,
}

impl Facet {
    /// Adjacent elements that exist (one on the boundary, two inside).
    pub fn neighbors(&self) -> &[usize] {
        if self.boundary {
            &self.elements[..1]
        } else {
            &self.elements[..]
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub regions: Vec<u32>,
    pub nu: BTreeMap<u32, f64>,
    pub facets: Vec<Facet>,
    /// `element_facets[k][i]` is the global facet of local facet `i` of element `k`.
    pub element_facets: Vec<[usize; 3]>,
    geometry: Vec<ElementGeometry>,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds facets and geometry, then validates every mesh invariant.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        regions: Vec<u32>,
        nu: BTreeMap<u32, f64>,
        boundary: &[([usize; 2], BoundaryTag)],
    ) -> Result<Self> {
        if regions.len() != elements.len() {
            return Err(Error::Mesh(format!(
                "{} region ids for {} elements",
                regions.len(),
                elements.len()
            )));
        }
        for (&r, &v) in &nu {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Mesh(format!("diffusivity of region {r} is {v}, must be > 0")));
            }
        }
        let mut geometry = Vec::with_capacity(elements.len());
        for (k, el) in elements.iter().enumerate() {
            if el.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("element {k} references a missing vertex")));
            }
            if !nu.contains_key(&regions[k]) {
                return Err(Error::Mesh(format!(
                    "element {k} has region {} with no diffusivity",
                    regions[k]
                )));
            }
            let geo = ElementGeometry::new([vertices[el[0]], vertices[el[1]], vertices[el[2]]])
                .map_err(|e| Error::Mesh(format!("element {k}: {e}")))?;
            geometry.push(geo);
        }

        let tags: HashMap<(usize, usize), BoundaryTag> =
            boundary.iter().map(|(v, t)| (edge_key(v[0], v[1]), *t)).collect();

        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut element_facets = vec![[usize::MAX; 3]; elements.len()];
        for (k, el) in elements.iter().enumerate() {
            for (i, [a, b]) in LOCAL_FACETS.iter().enumerate() {
                let key = edge_key(el[*a], el[*b]);
                match index.get(&key) {
                    Some(&f) => {
                        let facet = &mut facets[f];
                        if !facet.boundary {
                            return Err(Error::Mesh(format!(
                                "edge {key:?} is shared by more than two elements"
                            )));
                        }
                        facet.elements[1] = k;
                        facet.local[1] = i;
                        facet.boundary = false;
                        element_facets[k][i] = f;
                    }
                    None => {
                        index.insert(key, facets.len());
                        element_facets[k][i] = facets.len();
                        facets.push(Facet {
                            vertices: [key.0, key.1],
                            elements: [k, usize::MAX],
                            local: [i, usize::MAX],
                            boundary: true,
                            tag: None,
                            normal: geometry[k].normal[i],
                            length: geometry[k].facet_length[i],
                        });
                    }
                }
            }
        }
        for facet in facets.iter_mut() {
            let key = (facet.vertices[0], facet.vertices[1]);
            match (facet.boundary, tags.get(&key)) {
                (true, Some(t)) => facet.tag = Some(*t),
                (true, None) => {
                    return Err(Error::Mesh(format!(
                        "boundary edge {key:?} has no tag (hanging node or missing tag)"
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::Mesh(format!("interior edge {key:?} carries a boundary tag")))
                }
                (false, None) => {}
            }
        }
        if tags.len() != facets.iter().filter(|f| f.boundary).count() {
            return Err(Error::Mesh("boundary tag list names edges that are not mesh edges".into()));
        }
        if !facets.iter().any(|f| f.tag == Some(BoundaryTag::Dirichlet)) {
            return Err(Error::Mesh("the Dirichlet boundary is empty".into()));
        }
        let mesh = Self {
            vertices,
            elements,
            regions,
            nu,
            facets,
            element_facets,
            geometry,
        };
        Ok(mesh)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn geometry(&self, k: usize) -> &ElementGeometry {
        &self.geometry[k]
    }

    pub fn element_nu(&self, k: usize) -> f64 {
        self.nu[&self.regions[k]]
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// `+1` when the stored facet normal is outward for element `k`, `-1` otherwise.
    pub fn facet_sign(&self, k: usize, local: usize) -> f64 {
        let f = &self.facets[self.element_facets[k][local]];
        if f.elements[0] == k {
            1.0
        } else {
            -1.0
        }
    }

    /// Endpoints of a facet in parameter order.
    pub fn facet_points(&self, f: usize) -> ([f64; 2], [f64; 2]) {
        let v = self.facets[f].vertices;
        (self.vertices[v[0]], self.vertices[v[1]])
    }

    /// Boundary edges with their tags, in facet order.
    pub fn boundary_edges(&self) -> Vec<([usize; 2], BoundaryTag)> {
        self.facets
            .iter()
            .filter_map(|f| f.tag.map(|t| (f.vertices, t)))
            .collect()
    }

    /// Re-checks all invariants; used after refinement and in tests.
    pub fn check(&self) -> Result<()> {
        let rebuilt = Mesh::new(
            self.vertices.clone(),
            self.elements.clone(),
            self.regions.clone(),
            self.nu.clone(),
            &self.boundary_edges(),
        )?;
        for (a, b) in rebuilt.facets.iter().zip(&self.facets) {
            if a.vertices != b.vertices || a.elements != b.elements {
                return Err(Error::Mesh("facet table is stale".into()));
            }
        }
        // A vertex inside an edge of another element is a hanging node even when
        // tags hide it, so test every edge against its nearby vertices.
        for f in &self.facets {
            let (a, b) = self.facet_points_of(f);
            for &k in f.neighbors() {
                for n in self.facet_neighbors_vertices(k) {
                    if f.vertices.contains(&n) {
                        continue;
                    }
                    if point_inside_segment(self.vertices[n], a, b) {
                        return Err(Error::Mesh(format!(
                            "hanging node {n} on edge {:?}",
                            f.vertices
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn facet_points_of(&self, f: &Facet) -> ([f64; 2], [f64; 2]) {
        (self.vertices[f.vertices[0]], self.vertices[f.vertices[1]])
    }

    /// Vertices of the elements across the facets of element `k`.
    fn facet_neighbors_vertices(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &f in &self.element_facets[k] {
            for &e in self.facets[f].neighbors() {
                out.extend_from_slice(&self.elements[e]);
            }
        }
        out
    }
}

fn point_inside_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2;
    if t <= 1e-12 || t >= 1.0 - 1e-12 {
        return false;
    }
    let cross = (p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0];
    cross.abs() <= 1e-12 * len2
}

/// Unit diffusivity on region 0.
pub fn unit_nu() -> BTreeMap<u32, f64> {
    BTreeMap::from([(0, 1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Mesh {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let e = vec![[0, 1, 2], [0, 2, 3]];
        let b = vec![
            ([0, 1], BoundaryTag::Dirichlet),
            ([1, 2], BoundaryTag::Neumann),
            ([2, 3], BoundaryTag::Dirichlet),
            ([3, 0], BoundaryTag::Neumann),
        ];
        Mesh::new(v, e, vec![0, 0], unit_nu(), &b).unwrap()
    }

    #[test]
    fn facets_and_normals() {
        let m = two_triangles();
        assert_eq!(m.num_facets(), 5);
        let diag = m.facets.iter().find(|f| !f.boundary).unwrap();
        assert_eq!(diag.elements, [0, 1]);
        // Normal from element 0 (below the diagonal) into element 1.
        assert!(diag.normal[0] < 0.0 && diag.normal[1] > 0.0);
        assert_eq!(m.facet_sign(1, diag.local[1]), -1.0);
        m.check().unwrap();
    }

    #[test]
    fn rejects_untagged_boundary_and_missing_dirichlet() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let e = vec![[0, 1, 2]];
        let partial = vec![([0, 1], BoundaryTag::Dirichlet)];
        assert!(Mesh::new(v.clone(), e.clone(), vec![0], unit_nu(), &partial).is_err());
        let neumann = vec![
            ([0, 1], BoundaryTag::Neumann),
            ([1, 2], BoundaryTag::Neumann),
            ([2, 0], BoundaryTag::Neumann),
        ];
        assert!(Mesh::new(v, e, vec![0], unit_nu(), &neumann).is_err());
    }

    #[test]
    fn rejects_non_positive_diffusivity() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let b = vec![
            ([0, 1], BoundaryTag::Dirichlet),
            ([1, 2], BoundaryTag::Dirichlet),
            ([2, 0], BoundaryTag::Dirichlet),
        ];
        let nu = BTreeMap::from([(0, 0.0)]);
        assert!(Mesh::new(v, vec![[0, 1, 2]], vec![0], nu, &b).is_err());
    }
}
