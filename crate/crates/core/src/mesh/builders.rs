use super::{refine_red, unit_nu, BoundaryTag, Mesh};

/// 2×2 criss-cross mesh of the unit square (16 triangles), red-refined `levels` times.
pub fn unit_square_crisscross(levels: usize) -> Mesh {
    let mut mesh = crisscross(2);
    for _ in 0..levels {
        let all: Vec<usize> = (0..mesh.num_elements()).collect();
        mesh = refine_red(&mesh, &all).expect("uniform red refinement");
    }
    mesh
}

/// `n×n` squares of the unit square, each cut into four triangles by both diagonals.
pub fn crisscross(n: usize) -> Mesh {
    let h = 1.0 / n as f64;
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([h * i as f64, h * j as f64]);
        }
    }
    let corner = |i: usize, j: usize| j * (n + 1) + i;
    let mut elements = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let c = vertices.len();
            vertices.push([h * (i as f64 + 0.5), h * (j as f64 + 0.5)]);
            let (bl, br, tr, tl) = (
                corner(i, j),
                corner(i + 1, j),
                corner(i + 1, j + 1),
                corner(i, j + 1),
            );
            elements.extend([[bl, br, c], [br, tr, c], [tr, tl, c], [tl, bl, c]]);
        }
    }
    let mut boundary = Vec::new();
    for i in 0..n {
        boundary.push(([corner(i, 0), corner(i + 1, 0)], BoundaryTag::Dirichlet));
        boundary.push(([corner(i, n), corner(i + 1, n)], BoundaryTag::Dirichlet));
        boundary.push(([corner(0, i), corner(0, i + 1)], BoundaryTag::Dirichlet));
        boundary.push(([corner(n, i), corner(n, i + 1)], BoundaryTag::Dirichlet));
    }
    let ne = elements.len();
    Mesh::new(vertices, elements, vec![0; ne], unit_nu(), &boundary).expect("criss-cross mesh is valid")
}

/// L-shaped domain `[-1,1]² \ (0,1)×(-1,0)`: three unit squares, each cut by
/// its lower-left to upper-right diagonal.
pub fn lshape_initial() -> Mesh {
    let vertices = vec![
        [-1.0, -1.0], // 0
        [0.0, -1.0],  // 1
        [-1.0, 0.0],  // 2
        [0.0, 0.0],   // 3
        [1.0, 0.0],   // 4
        [-1.0, 1.0],  // 5
        [0.0, 1.0],   // 6
        [1.0, 1.0],   // 7
    ];
    let elements = vec![
        [0, 1, 3],
        [0, 3, 2],
        [2, 3, 6],
        [2, 6, 5],
        [3, 4, 7],
        [3, 7, 6],
    ];
    let d = BoundaryTag::Dirichlet;
    let boundary = vec![
        ([0, 1], d),
        ([1, 3], d),
        ([3, 4], d),
        ([4, 7], d),
        ([7, 6], d),
        ([6, 5], d),
        ([5, 2], d),
        ([2, 0], d),
    ];
    Mesh::new(vertices, elements, vec![0; 6], unit_nu(), &boundary).expect("L-shape mesh is valid")
}
