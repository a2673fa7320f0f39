//! Analytic solution triple and derived source terms.
//!
//! The potential and the two concentrations are separable sine products that
//! vanish on the boundary of the unit square and at t = 0:
//!
//! ```text
//! phi = (1 - exp(-t)) sin(pi x) sin(pi y)
//! p1  = sin(t)   sin(2 pi x) sin(2 pi y)
//! p2  = sin(2 t) sin(3 pi x) sin(3 pi y)
//! ```
//!
//! Sources are hand-derived so that the triple solves the coupled system
//! exactly; a finite-difference residual test gates the formulas. The
//! [`SourceTable`] caches the spatial trigonometric factors at a fixed point
//! set so the time loop pays only a few flops per point per step.

use crate::geom::{Point, Vec2};
use crate::mesh::PolygonalMesh;
use crate::quadrature::{
    data_volume_order, edge_quadrature, polygon_quadrature, ScaledMonomialBasis,
};
use crate::system::build_dof_map;
use crate::Result;
use std::f64::consts::PI;

/// Default species charges (positive and negative unit charge).
pub const DEFAULT_CHARGES: [f64; 2] = [1.0, -1.0];

/// The analytic benchmark case.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub charges: [f64; 2],
}

impl Default for ManufacturedCase {
    fn default() -> Self {
        Self {
            charges: DEFAULT_CHARGES,
        }
    }
}

impl ManufacturedCase {
    pub fn new() -> Self {
        Self::default()
    }

    fn phi_time(t: f64) -> f64 {
        1.0 - (-t).exp()
    }

    fn p_time(i: usize, t: f64) -> f64 {
        match i {
            0 => t.sin(),
            _ => (2.0 * t).sin(),
        }
    }

    fn p_time_dt(i: usize, t: f64) -> f64 {
        match i {
            0 => t.cos(),
            _ => 2.0 * (2.0 * t).cos(),
        }
    }

    fn p_wave(i: usize) -> f64 {
        match i {
            0 => 2.0 * PI,
            _ => 3.0 * PI,
        }
    }

    pub fn phi(&self, t: f64, x: f64, y: f64) -> f64 {
        Self::phi_time(t) * (PI * x).sin() * (PI * y).sin()
    }

    pub fn p(&self, i: usize, t: f64, x: f64, y: f64) -> f64 {
        let w = Self::p_wave(i);
        Self::p_time(i, t) * (w * x).sin() * (w * y).sin()
    }

    /// The solution triple (phi, p1, p2).
    pub fn exact(&self, t: f64, x: f64, y: f64) -> (f64, f64, f64) {
        (self.phi(t, x, y), self.p(0, t, x, y), self.p(1, t, x, y))
    }

    pub fn grad_phi(&self, t: f64, x: f64, y: f64) -> Vec2 {
        let a = Self::phi_time(t) * PI;
        Vec2::new(
            a * (PI * x).cos() * (PI * y).sin(),
            a * (PI * x).sin() * (PI * y).cos(),
        )
    }

    pub fn lap_phi(&self, t: f64, x: f64, y: f64) -> f64 {
        -2.0 * PI * PI * self.phi(t, x, y)
    }

    pub fn grad_p(&self, i: usize, t: f64, x: f64, y: f64) -> Vec2 {
        let w = Self::p_wave(i);
        let a = Self::p_time(i, t) * w;
        Vec2::new(
            a * (w * x).cos() * (w * y).sin(),
            a * (w * x).sin() * (w * y).cos(),
        )
    }

    pub fn lap_p(&self, i: usize, t: f64, x: f64, y: f64) -> f64 {
        let w = Self::p_wave(i);
        -2.0 * w * w * self.p(i, t, x, y)
    }

    pub fn p_dt(&self, i: usize, t: f64, x: f64, y: f64) -> f64 {
        let w = Self::p_wave(i);
        Self::p_time_dt(i, t) * (w * x).sin() * (w * y).sin()
    }

    /// Poisson source: -lap(phi) - sum_i q_i p_i.
    pub fn source_f(&self, t: f64, x: f64, y: f64) -> f64 {
        -self.lap_phi(t, x, y)
            - self.charges[0] * self.p(0, t, x, y)
            - self.charges[1] * self.p(1, t, x, y)
    }

    /// Species source: p_t - lap(p) - q (grad p . grad phi + p lap phi).
    pub fn source_big_f(&self, i: usize, t: f64, x: f64, y: f64) -> f64 {
        let q = self.charges[i];
        self.p_dt(i, t, x, y)
            - self.lap_p(i, t, x, y)
            - q * (self.grad_p(i, t, x, y).dot(&self.grad_phi(t, x, y))
                + self.p(i, t, x, y) * self.lap_phi(t, x, y))
    }

    /// Precomputes the spatial factors of the sources at a fixed point set.
    pub fn table(&self, points: &[Point]) -> SourceTable {
        let n = points.len();
        let mut t = SourceTable {
            charges: self.charges,
            sxsy: Vec::with_capacity(n),
            s1: Vec::with_capacity(n),
            s2: Vec::with_capacity(n),
            g1: Vec::with_capacity(n),
            g2: Vec::with_capacity(n),
        };
        for p in points {
            let (x, y) = (p.x, p.y);
            let (s1x, c1x) = (PI * x).sin_cos();
            let (s1y, c1y) = (PI * y).sin_cos();
            let (s2x, c2x) = (2.0 * PI * x).sin_cos();
            let (s2y, c2y) = (2.0 * PI * y).sin_cos();
            let (s3x, c3x) = (3.0 * PI * x).sin_cos();
            let (s3y, c3y) = (3.0 * PI * y).sin_cos();
            t.sxsy.push(s1x * s1y);
            t.s1.push(s2x * s2y);
            t.s2.push(s3x * s3y);
            t.g1.push(c2x * s2y * c1x * s1y + s2x * c2y * s1x * c1y);
            t.g2.push(c3x * s3y * c1x * s1y + s3x * c3y * s1x * c1y);
        }
        t
    }
}

/// Cached spatial factors for fast source evaluation along the time loop.
#[derive(Debug, Clone)]
pub struct SourceTable {
    charges: [f64; 2],
    sxsy: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

impl SourceTable {
    pub fn len(&self) -> usize {
        self.sxsy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sxsy.is_empty()
    }

    /// Fills `out` with the Poisson source at time `t`.
    pub fn poisson_source(&self, t: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        let a = 2.0 * PI * PI * (1.0 - (-t).exp());
        let b1 = self.charges[0] * t.sin();
        let b2 = self.charges[1] * (2.0 * t).sin();
        for (i, o) in out.iter_mut().enumerate() {
            *o = a * self.sxsy[i] - b1 * self.s1[i] - b2 * self.s2[i];
        }
    }

    /// Fills `out` with the species source F_i at time `t`.
    pub fn species_source(&self, i: usize, t: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        let q = self.charges[i];
        let tp = ManufacturedCase::p_time(i, t);
        let tp_dt = ManufacturedCase::p_time_dt(i, t);
        let tphi = 1.0 - (-t).exp();
        let w = ManufacturedCase::p_wave(i);
        let diff = 2.0 * w * w;
        let (spatial, gdot): (&[f64], &[f64]) = match i {
            0 => (&self.s1, &self.g1),
            _ => (&self.s2, &self.g2),
        };
        // grad p . grad phi carries w * pi; p lap phi carries -2 pi^2.
        let drift = q * tp * tphi * w * PI;
        let compress = q * tp * tphi * 2.0 * PI * PI;
        for (j, o) in out.iter_mut().enumerate() {
            *o = (tp_dt + diff * tp) * spatial[j] - drift * gdot[j]
                + compress * spatial[j] * self.sxsy[j];
        }
    }
}

/// Interpolates a smooth field onto the global dof vector: point values at
/// vertices, edge-mean moments, and internal scaled-monomial moments.
pub fn dof_interpolate(
    mesh: &PolygonalMesh,
    k: usize,
    f: impl Fn(Point) -> f64,
) -> Result<Vec<f64>> {
    let map = build_dof_map(mesh, k)?;
    let order = data_volume_order(k);
    let mut dofs = vec![0.0; map.n_global];
    for (v, &p) in mesh.vertices.iter().enumerate() {
        dofs[v] = f(p);
    }
    let per_edge = k - 1;
    if per_edge > 0 {
        for (id, edge) in mesh.edges().iter().enumerate() {
            let a = mesh.vertices[edge.v.0];
            let b = mesh.vertices[edge.v.1];
            let rule = edge_quadrature(a, b, order);
            let len = (b - a).norm();
            // Only the orientation-free mean moment exists for k <= 2.
            let mut acc = 0.0;
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                acc += w * f(p);
            }
            dofs[mesh.n_vertices() + id * per_edge] = acc / len;
        }
    }
    if k >= 2 {
        let n_int = crate::quadrature::monomial_count(k - 2);
        let int_offset = map.n_global - mesh.n_elements() * n_int;
        for e in 0..mesh.n_elements() {
            let verts = mesh.element_vertices(e);
            let area = crate::geom::signed_area(&verts);
            let basis = ScaledMonomialBasis::new(
                crate::geom::centroid(&verts),
                crate::geom::diameter(&verts),
                k,
            );
            let rule = polygon_quadrature(&verts, order)?;
            for m in 0..n_int {
                let mut acc = 0.0;
                for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                    acc += w * f(p) * basis.eval_one(m, p);
                }
                dofs[int_offset + e * n_int + m] = acc / area;
            }
        }
    }
    Ok(dofs)
}
