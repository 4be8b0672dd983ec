//! Structured triangulation of a rectangle and the mass-lumped P1 operators.

use crate::error::{check_len, Error, Result};

/// Axis-aligned rectangle `(xmin, xmax) x (ymin, ymax)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub const fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    /// Square `(-half, half)²`.
    pub const fn centered_square(half: f64) -> Self {
        Self::new(-half, half, -half, half)
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.xmin..=self.xmax).contains(&p[0]) && (self.ymin..=self.ymax).contains(&p[1])
    }
}

/// Which diagonal splits every square cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Diagonal {
    /// Bottom-left to top-right.
    #[default]
    Forward,
    /// Bottom-right to top-left; the x-mirror image of `Forward`.
    Backward,
}

impl Diagonal {
    pub fn mirrored(self) -> Self {
        match self {
            Diagonal::Forward => Diagonal::Backward,
            Diagonal::Backward => Diagonal::Forward,
        }
    }
}

/// Compressed-row layout shared by every stiffness matrix on a mesh.
#[derive(Clone, Debug)]
struct Pattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    diag: Vec<usize>,
    /// For each triangle, the value slots of its local 3x3 block (row-major).
    tri_slots: Vec<[usize; 9]>,
}

#[derive(Clone, Debug)]
pub struct StructuredTriMesh {
    bounds: Bounds,
    n_sub: usize,
    diagonal: Diagonal,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    lumped_weights: Vec<f64>,
    /// Element stiffness for unit diffusivity, row-major.
    unit_stiffness: Vec<[f64; 9]>,
    pattern: Pattern,
}

impl StructuredTriMesh {
    pub fn new(bounds: Bounds, n_sub: usize) -> Result<Self> {
        Self::with_diagonal(bounds, n_sub, Diagonal::Forward)
    }

    pub fn with_diagonal(bounds: Bounds, n_sub: usize, diagonal: Diagonal) -> Result<Self> {
        if n_sub == 0 {
            return Err(Error::InvalidMesh("n_sub must be at least 1".into()));
        }
        let finite = [bounds.xmin, bounds.xmax, bounds.ymin, bounds.ymax]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bounds.xmax <= bounds.xmin || bounds.ymax <= bounds.ymin {
            return Err(Error::InvalidMesh(format!("degenerate bounds {bounds:?}")));
        }

        let n = n_sub;
        let hx = (bounds.xmax - bounds.xmin) / n as f64;
        let hy = (bounds.ymax - bounds.ymin) / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            // pin the far edge exactly to the bound
            let y = if j == n {
                bounds.ymax
            } else {
                bounds.ymin + j as f64 * hy
            };
            for i in 0..=n {
                let x = if i == n {
                    bounds.xmax
                } else {
                    bounds.xmin + i as f64 * hx
                };
                vertices.push([x, y]);
            }
        }

        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) =
                    (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                match diagonal {
                    Diagonal::Forward => {
                        triangles.push([v00, v10, v11]);
                        triangles.push([v00, v11, v01]);
                    }
                    Diagonal::Backward => {
                        triangles.push([v00, v10, v01]);
                        triangles.push([v10, v11, v01]);
                    }
                }
            }
        }

        // All triangles are congruent; use the exact cell area rather than
        // the rounded coordinate cross product so the weights sum to the domain area.
        let area = 0.5 * hx * hy;
        let mut incidence = vec![0u32; vertices.len()];
        let mut unit_stiffness = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let p = tri.map(|v| vertices[v]);
            let signed = signed_area(p);
            if signed <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {tri:?} has area {signed}"
                )));
            }
            for &v in tri {
                incidence[v] += 1;
            }
            unit_stiffness.push(p1_stiffness(p, signed));
        }
        let lumped_weights = incidence.iter().map(|&k| k as f64 * (area / 3.0)).collect();

        let pattern = build_pattern(vertices.len(), &triangles);
        Ok(Self {
            bounds,
            n_sub,
            diagonal,
            vertices,
            triangles,
            lumped_weights,
            unit_stiffness,
            pattern,
        })
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    pub fn diagonal(&self) -> Diagonal {
        self.diagonal
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Lumped (diagonal) mass: a third of the area of every adjacent triangle.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped_weights
    }

    /// Sum of the lumped weights, i.e. the discrete domain area.
    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.lumped_weights.iter().copied())
    }

    /// Longest cell edge along an axis.
    pub fn cell_edge(&self) -> f64 {
        let b = self.bounds;
        ((b.xmax - b.xmin) / self.n_sub as f64).max((b.ymax - b.ymin) / self.n_sub as f64)
    }

    /// Index of the grid vertex in column `i`, row `j`.
    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.n_sub && j <= self.n_sub);
        j * (self.n_sub + 1) + i
    }

    /// Index of the vertex at the x-mirrored grid position.
    pub fn mirror_x_index(&self, v: usize) -> usize {
        let (i, j) = (v % (self.n_sub + 1), v / (self.n_sub + 1));
        self.vertex_index(self.n_sub - i, j)
    }

    /// Index of the vertex at the y-mirrored grid position.
    pub fn mirror_y_index(&self, v: usize) -> usize {
        let (i, j) = (v % (self.n_sub + 1), v / (self.n_sub + 1));
        self.vertex_index(i, self.n_sub - j)
    }

    /// Zero matrix carrying this mesh's stiffness sparsity pattern.
    pub fn zero_matrix(&self) -> SparseSymmetricMatrix {
        SparseSymmetricMatrix {
            row_ptr: self.pattern.row_ptr.clone(),
            col_idx: self.pattern.col_idx.clone(),
            diag: self.pattern.diag.clone(),
            values: vec![0.0; self.pattern.col_idx.len()],
        }
    }

    /// Overwrite `matrix` with the stiffness for a per-vertex diffusivity.
    ///
    /// `matrix` must come from [`Self::zero_matrix`] on this mesh.
    pub fn assemble_stiffness_into(
        &self,
        diffusivity: &[f64],
        matrix: &mut SparseSymmetricMatrix,
    ) -> Result<()> {
        check_len(self.n_vertices(), diffusivity.len())?;
        check_len(self.pattern.col_idx.len(), matrix.values.len())?;
        matrix.values.iter_mut().for_each(|v| *v = 0.0);
        for ((tri, local), slots) in self
            .triangles
            .iter()
            .zip(&self.unit_stiffness)
            .zip(&self.pattern.tri_slots)
        {
            let d = (diffusivity[tri[0]] + diffusivity[tri[1]] + diffusivity[tri[2]]) / 3.0;
            for k in 0..9 {
                matrix.values[slots[k]] += d * local[k];
            }
        }
        Ok(())
    }
}

pub fn build_mesh(bounds: Bounds, n_sub: usize) -> Result<StructuredTriMesh> {
    StructuredTriMesh::new(bounds, n_sub)
}

pub fn lumped_mass(mesh: &StructuredTriMesh) -> &[f64] {
    mesh.lumped_weights()
}

/// `A[i][j] = sum_K D_K ∫_K ∇φ_i·∇φ_j` with `D_K` the mean of the vertex diffusivities.
pub fn assemble_stiffness(
    mesh: &StructuredTriMesh,
    diffusivity: &[f64],
) -> Result<SparseSymmetricMatrix> {
    let mut m = mesh.zero_matrix();
    mesh.assemble_stiffness_into(diffusivity, &mut m)?;
    Ok(m)
}

/// Lumped quadrature `sum_v w_v f_v`.
pub fn lumped_integral(mesh: &StructuredTriMesh, field: &[f64]) -> Result<f64> {
    check_len(mesh.n_vertices(), field.len())?;
    Ok(weighted_sum(mesh.lumped_weights(), field))
}

pub(crate) fn weighted_sum(weights: &[f64], field: &[f64]) -> f64 {
    compensated_sum(weights.iter().zip(field).map(|(w, f)| w * f))
}

/// Neumaier summation; the lumped integrals feed ratios compared at 1e-12.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

fn signed_area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

fn p1_stiffness(p: [[f64; 2]; 3], area: f64) -> [f64; 9] {
    // gradient of barycentric i is (b_i, c_i) / (2 area)
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let mut k = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            k[3 * i + j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    k
}

fn build_pattern(n: usize, triangles: &[[usize; 3]]) -> Pattern {
    let mut neighbors: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    for tri in triangles {
        for &a in tri {
            for &b in tri {
                neighbors[a].push(b);
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut diag = Vec::with_capacity(n);
    row_ptr.push(0);
    for (row, cols) in neighbors.iter_mut().enumerate() {
        cols.sort_unstable();
        cols.dedup();
        let start = col_idx.len();
        diag.push(start + cols.binary_search(&row).expect("diagonal present"));
        col_idx.extend_from_slice(cols);
        row_ptr.push(col_idx.len());
    }
    let slot = |row: usize, col: usize| {
        let cols = &col_idx[row_ptr[row]..row_ptr[row + 1]];
        row_ptr[row] + cols.binary_search(&col).expect("entry in pattern")
    };
    let tri_slots = triangles
        .iter()
        .map(|tri| {
            let mut s = [0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    s[3 * i + j] = slot(tri[i], tri[j]);
                }
            }
            s
        })
        .collect();
    Pattern {
        row_ptr,
        col_idx,
        diag,
        tri_slots,
    }
}

/// Symmetric sparse matrix stored with both triangles in compressed rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetricMatrix {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    diag: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetricMatrix {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Build from a dense row-major symmetric matrix, keeping exact zeros off the diagonal out.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut diag = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            check_len(n, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != rows[j][i] {
                    return Err(Error::InvalidMesh(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
                if v != 0.0 || i == j {
                    if i == j {
                        diag.push(col_idx.len());
                    }
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            row_ptr,
            col_idx,
            diag,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            diag: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col)
            .map(|k| self.values[self.row_ptr[row] + k])
            .unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.diag.iter().map(|&k| self.values[k])
    }

    pub fn add_to_diagonal(&mut self, shift: &[f64]) -> Result<()> {
        check_len(self.dim(), shift.len())?;
        for (&k, s) in self.diag.iter().zip(shift) {
            self.values[k] += s;
        }
        Ok(())
    }

    /// `(row, col, value)` for every stored entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        for (r, out) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            *out = self.col_idx[a..b]
                .iter()
                .zip(&self.values[a..b])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim()]; self.dim()];
        for (r, c, v) in self.entries() {
            d[r][c] = v;
        }
        d
    }
}
