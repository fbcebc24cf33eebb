//! Structured triangulation of the unit square with P1 degree-of-freedom
//! bookkeeping.
//!
//! Vertices are numbered row by row (`index = j * (n + 1) + i` for the vertex
//! at `(i h, j h)`). Every cell is cut along its lower-left to upper-right
//! diagonal. Boundary vertices carry the homogeneous Dirichlet value and are
//! excluded from the unknown vector.

use std::io::Write;

use crate::error::{MpaError, Result};
use crate::fem::Field;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// vertex index -> DOF index, `None` on the boundary
    vertex_dof: Vec<Option<usize>>,
    /// DOF index -> vertex index
    dof_vertex: Vec<usize>,
}

impl Mesh {
    pub fn structured(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(MpaError::InvalidArgument(format!(
                "mesh needs at least 2 subdivisions per side to have an interior vertex, got {n}"
            )));
        }
        let side = n + 1;
        let mut vertices = Vec::with_capacity(side * side);
        let mut vertex_dof = Vec::with_capacity(side * side);
        let mut dof_vertex = Vec::with_capacity((n - 1) * (n - 1));
        for j in 0..side {
            for i in 0..side {
                // i * h rounds differently from i / n; use the latter so that
                // boundary coordinates are exactly 0 and 1
                vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
                if i == 0 || j == 0 || i == n || j == n {
                    vertex_dof.push(None);
                } else {
                    vertex_dof.push(Some(dof_vertex.len()));
                    dof_vertex.push(j * side + i);
                }
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * side + i;
                let v10 = v00 + 1;
                let v01 = v00 + side;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Ok(Self {
            n,
            vertices,
            triangles,
            vertex_dof,
            dof_vertex,
        })
    }

    pub fn subdivisions(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Number of interior degrees of freedom.
    pub fn dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn dof_of_vertex(&self, vertex: usize) -> Option<usize> {
        self.vertex_dof[vertex]
    }

    pub fn vertex_of_dof(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.vertex_dof[vertex].is_none()
    }

    /// Grid coordinates `(i, j)` of a vertex.
    pub fn grid_index(&self, vertex: usize) -> (usize, usize) {
        (vertex % (self.n + 1), vertex / (self.n + 1))
    }

    pub fn vertex_at(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    /// Signed area of a triangle (positive for counterclockwise orientation).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Undirected edges, each listed once as `(lo, hi)` in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Interpolates `f` at the interior vertices.
    pub fn interpolate<F>(&self, f: F) -> Result<Field>
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut values = Vec::with_capacity(self.dofs());
        for &v in &self.dof_vertex {
            let [x, y] = self.vertices[v];
            let value = f(x, y);
            if !value.is_finite() {
                return Err(MpaError::InvalidInput(format!(
                    "interpolated function is not finite at ({x}, {y})"
                )));
            }
            values.push(value);
        }
        Ok(Field::scalar(values))
    }

    /// Interpolates one function per component.
    pub fn interpolate_components<F>(&self, fs: &[F]) -> Result<Field>
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut comps = Vec::with_capacity(fs.len());
        for f in fs {
            comps.push(self.interpolate(f)?.into_components().remove(0));
        }
        Ok(Field::new(comps))
    }

    /// Nodal values over all vertices, boundary zeros included.
    pub fn vertex_values(&self, dof_values: &[f64]) -> Vec<f64> {
        self.vertex_dof
            .iter()
            .map(|d| d.map_or(0.0, |d| dof_values[d]))
            .collect()
    }

    /// Debug export: vertex rows `index,x,y,is_boundary` followed by triangle
    /// rows `v0,v1,v2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, [x, y]) in self.vertices.iter().enumerate() {
            writeln!(out, "{k},{x},{y},{}", u8::from(self.is_boundary(k)))?;
        }
        for [a, b, c] in &self.triangles {
            writeln!(out, "{a},{b},{c}")?;
        }
        Ok(())
    }
}
