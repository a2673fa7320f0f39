//! Per-element virtual element machinery for orders k = 1, 2.
//!
//! A virtual function on a polygon is known only through its degrees of
//! freedom: vertex values, per-edge moments against scaled Legendre
//! polynomials (k > 1), and internal moments against scaled monomials up to
//! degree k-2 (k > 1). From those dofs alone this module computes
//!
//! * the elliptic projector onto P_k (gradient orthogonality plus a
//!   boundary-mean constraint, assembled by integration by parts),
//! * L2 projectors of the function onto P_k and P_{k-1}, using the enhanced
//!   space property to recover the moments of degree k-1 and k,
//! * L2 projections of the gradient components onto P_{k-1} and P_k,
//! * the stabilized local stiffness and mass matrices, the drift coupling
//!   matrix, the charge coupling matrices, and projected load vectors.
//!
//! Stabilization is the plain dof-euclidean inner product on the projector
//! complement (scaled by the area for the mass form).

use crate::geom::{self, Point, Vec2};
use crate::quadrature::{
    default_volume_order, edge_quadrature, gauss_legendre, monomial_count, polygon_quadrature,
    QuadratureRule, ScaledMonomialBasis,
};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Ordering of the local degrees of freedom: vertex values first, then
/// per-edge moments, then internal moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub k: usize,
    pub n_vertices: usize,
    /// Moments per edge (k - 1).
    pub per_edge: usize,
    /// Internal moments (dim P_{k-2}).
    pub n_internal: usize,
}

impl DofLayout {
    pub fn total(&self) -> usize {
        self.n_vertices * self.k + self.n_internal
    }

    pub fn vertex_dof(&self, v: usize) -> usize {
        v
    }

    pub fn edge_dof(&self, edge: usize, j: usize) -> usize {
        debug_assert!(j < self.per_edge);
        self.n_vertices + edge * self.per_edge + j
    }

    pub fn internal_dof(&self, m: usize) -> usize {
        debug_assert!(m < self.n_internal);
        self.n_vertices * self.k + m
    }
}

/// Dof layout of an `n_vertices`-gon at order `k`.
pub fn build_dof_layout(n_vertices: usize, k: usize) -> Result<DofLayout> {
    if !(1..=2).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    Ok(DofLayout {
        k,
        n_vertices,
        per_edge: k - 1,
        n_internal: if k >= 2 { monomial_count(k - 2) } else { 0 },
    })
}

/// Shifted Legendre polynomial P_j(2t - 1) on [0, 1].
fn shifted_legendre(j: usize, t: f64) -> f64 {
    let s = 2.0 * t - 1.0;
    match j {
        0 => 1.0,
        1 => s,
        _ => {
            let mut p0 = 1.0;
            let mut p1 = s;
            let mut p2 = 0.0;
            for m in 1..j {
                let mf = m as f64;
                p2 = ((2.0 * mf + 1.0) * s * p1 - mf * p0) / (mf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p2
        }
    }
}

/// All projector matrices and local form ingredients of one element.
#[derive(Debug, Clone)]
pub struct LocalSpace {
    pub verts: Vec<Point>,
    pub k: usize,
    pub layout: DofLayout,
    pub area: f64,
    pub basis: ScaledMonomialBasis,
    /// Monomial mass matrix H with H[a][b] = (m_a, m_b)_E.
    pub mass_monomials: DMatrix<f64>,
    /// D with D[j][b] = dof_j(m_b).
    pub dof_of_monomial: DMatrix<f64>,
    /// Elliptic projector in monomial coordinates (n_k x N).
    pub elliptic_proj: DMatrix<f64>,
    /// Elliptic projector in dof coordinates (N x N).
    pub elliptic_proj_dof: DMatrix<f64>,
    /// L2 projector onto P_k in monomial coordinates (n_k x N).
    pub l2_proj: DMatrix<f64>,
    /// L2 projector onto P_{k-1} (n_{k-1} x N).
    pub l2_proj_lower: DMatrix<f64>,
    /// L2 projection of each gradient component onto P_{k-1}.
    pub grad_proj_lower: [DMatrix<f64>; 2],
    /// L2 projection of each gradient component onto P_k.
    pub grad_proj: [DMatrix<f64>; 2],
    /// Moments (phi_j, m_g)_E recovered through the enhancement property.
    pub moments: DMatrix<f64>,
    /// Volume rule exact for the local form integrands.
    pub volume_rule: QuadratureRule,
    /// Monomial values at the volume rule points (n_q x n_k).
    pub mon_at_quad: DMatrix<f64>,
}

/// Per-edge trace bookkeeping: the dof columns feeding the edge and the
/// t-monomial coefficients of each of their traces.
struct EdgeTrace {
    /// Element-local dof indices: start vertex, end vertex, edge moments.
    cols: Vec<usize>,
    /// (k+1) x (k+1): column j holds the t-coefficients of dof j's trace.
    coeffs: DMatrix<f64>,
    /// Parametric Gauss nodes and weights on [0,1] (weights sum to 1).
    nodes: Vec<f64>,
    weights: Vec<f64>,
    a: Point,
    b: Point,
    len: f64,
    normal: Vec2,
}

impl EdgeTrace {
    fn point(&self, t: f64) -> Point {
        self.a + t * (self.b - self.a)
    }

    /// Trace value of local dof column `jj` at parameter `t`.
    fn trace(&self, jj: usize, t: f64) -> f64 {
        let mut v = 0.0;
        let mut tm = 1.0;
        for m in 0..self.coeffs.nrows() {
            v += self.coeffs[(m, jj)] * tm;
            tm *= t;
        }
        v
    }

    /// Integral over [0,1] of the trace of dof column `jj`.
    fn trace_mean(&self, jj: usize) -> f64 {
        (0..self.coeffs.nrows())
            .map(|m| self.coeffs[(m, jj)] / (m as f64 + 1.0))
            .sum()
    }
}

type Lu = nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// Dense factorization with the pivot-based singularity guard.
fn factor(m: &DMatrix<f64>, what: &str) -> Result<Lu> {
    let row_scale = m
        .row_iter()
        .map(|r| r.amax())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let lu = m.clone().lu();
    let u = lu.u();
    let min_pivot = (0..u.nrows().min(u.ncols()))
        .map(|i| u[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-13 * row_scale {
        return Err(Error::SingularProjector(format!(
            "{what}: pivot {min_pivot:.3e} below threshold"
        )));
    }
    Ok(lu)
}

impl LocalSpace {
    /// Builds every projector and cached evaluation for a counterclockwise
    /// polygon at order `k`.
    pub fn build(verts: &[Point], k: usize) -> Result<LocalSpace> {
        let layout = build_dof_layout(verts.len(), k)?;
        let n_dofs = layout.total();
        let area = geom::signed_area(verts);
        if !(area > 0.0) {
            return Err(Error::InvalidElement {
                element: usize::MAX,
                reason: format!("signed area {area:.3e} not positive"),
            });
        }
        let centroid = geom::centroid(verts);
        let diameter = geom::diameter(verts);
        let basis = ScaledMonomialBasis::new(centroid, diameter, k);
        let n_k = basis.len();
        let n_km1 = monomial_count(k - 1);

        let volume_rule = polygon_quadrature(verts, default_volume_order(k))?;
        let mon_at_quad = basis.eval(&volume_rule.points);

        let mut mass_monomials = DMatrix::zeros(n_k, n_k);
        for (q, &w) in volume_rule.weights.iter().enumerate() {
            for a in 0..n_k {
                let va = w * mon_at_quad[(q, a)];
                for b in a..n_k {
                    mass_monomials[(a, b)] += va * mon_at_quad[(q, b)];
                }
            }
        }
        for a in 0..n_k {
            for b in 0..a {
                mass_monomials[(a, b)] = mass_monomials[(b, a)];
            }
        }

        let edges = Self::edge_traces(verts, &layout)?;
        let perimeter: f64 = edges.iter().map(|e| e.len).sum();

        // D: dof values of every monomial.
        let mut dof_of_monomial = DMatrix::zeros(n_dofs, n_k);
        for (v, &p) in verts.iter().enumerate() {
            for b in 0..n_k {
                dof_of_monomial[(layout.vertex_dof(v), b)] = basis.eval_one(b, p);
            }
        }
        for (e, edge) in edges.iter().enumerate() {
            for j in 0..layout.per_edge {
                let row = layout.edge_dof(e, j);
                for b in 0..n_k {
                    let mut acc = 0.0;
                    for (&t, &w) in edge.nodes.iter().zip(&edge.weights) {
                        acc += w * basis.eval_one(b, edge.point(t)) * shifted_legendre(j, t);
                    }
                    dof_of_monomial[(row, b)] = acc;
                }
            }
        }
        for m in 0..layout.n_internal {
            let row = layout.internal_dof(m);
            for b in 0..n_k {
                dof_of_monomial[(row, b)] = mass_monomials[(m, b)] / area;
            }
        }

        // B: right-hand sides of the elliptic projector system. Row 0 is the
        // boundary-mean functional; the remaining rows are
        // (grad m_a, grad phi_j)_E assembled by integration by parts.
        let mut b_mat = DMatrix::zeros(n_k, n_dofs);
        for edge in &edges {
            for (jj, &col) in edge.cols.iter().enumerate() {
                b_mat[(0, col)] += edge.len * edge.trace_mean(jj) / perimeter;
            }
        }
        for a in 1..n_k {
            for edge in &edges {
                for (&t, &w) in edge.nodes.iter().zip(&edge.weights) {
                    let gn = basis.grad_one(a, edge.point(t)).dot(&edge.normal);
                    for (jj, &col) in edge.cols.iter().enumerate() {
                        b_mat[(a, col)] += edge.len * w * edge.trace(jj, t) * gn;
                    }
                }
            }
            for (g, c) in basis.laplacian_coeffs(a) {
                // Laplacians of degree <= k monomials lie in P_{k-2}, whose
                // moments are internal dofs (scaled by the area).
                b_mat[(a, layout.internal_dof(g))] -= c * area;
            }
        }

        // G: the same functionals applied to the monomials.
        let mut g_mat = DMatrix::zeros(n_k, n_k);
        for b in 0..n_k {
            let mut mean = 0.0;
            for edge in &edges {
                for (&t, &w) in edge.nodes.iter().zip(&edge.weights) {
                    mean += edge.len * w * basis.eval_one(b, edge.point(t));
                }
            }
            g_mat[(0, b)] = mean / perimeter;
        }
        let grad_at_quad = basis.grad(&volume_rule.points);
        for a in 1..n_k {
            for b in 0..n_k {
                let mut acc = 0.0;
                for (q, &w) in volume_rule.weights.iter().enumerate() {
                    acc += w
                        * (grad_at_quad[0][(q, a)] * grad_at_quad[0][(q, b)]
                            + grad_at_quad[1][(q, a)] * grad_at_quad[1][(q, b)]);
                }
                g_mat[(a, b)] = acc;
            }
        }

        let g_lu = factor(&g_mat, "elliptic projector")?;
        let elliptic_proj = g_lu
            .solve(&b_mat)
            .ok_or_else(|| Error::SingularProjector("elliptic projector solve failed".into()))?;
        let elliptic_proj_dof = &dof_of_monomial * &elliptic_proj;

        // Moments (phi_j, m_g)_E for |g| <= k. Up to degree k-2 they are
        // dofs; above that the enhanced-space property substitutes moments
        // of the elliptic projection, corrected by the P_{k-2} component.
        let n_low = layout.n_internal;
        let h_pi = &mass_monomials * &elliptic_proj;
        let mut moments = DMatrix::zeros(n_k, n_dofs);
        for g in 0..n_low {
            moments[(g, layout.internal_dof(g))] = area;
        }
        let low_lu = if n_low > 0 {
            Some(factor(
                &mass_monomials.view((0, 0), (n_low, n_low)).into_owned(),
                "P_{k-2} mass block",
            )?)
        } else {
            None
        };
        for g in n_low..n_k {
            for j in 0..n_dofs {
                moments[(g, j)] = h_pi[(g, j)];
            }
            if let Some(lu) = &low_lu {
                let rhs = mass_monomials.view((0, g), (n_low, 1)).into_owned();
                let lam = lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::SingularProjector("mass block solve".into()))?;
                for d in 0..n_low {
                    let ld = lam[(d, 0)];
                    if ld == 0.0 {
                        continue;
                    }
                    for j in 0..n_dofs {
                        let exact = if j == layout.internal_dof(d) { area } else { 0.0 };
                        moments[(g, j)] += ld * (exact - h_pi[(d, j)]);
                    }
                }
            }
        }

        let h_lu = factor(&mass_monomials, "monomial mass matrix")?;
        let l2_proj = h_lu
            .solve(&moments)
            .ok_or_else(|| Error::SingularProjector("L2 projector solve".into()))?;
        let h_km1_lu = factor(
            &mass_monomials.view((0, 0), (n_km1, n_km1)).into_owned(),
            "P_{k-1} mass block",
        )?;
        let l2_proj_lower = h_km1_lu
            .solve(&moments.view((0, 0), (n_km1, n_dofs)).into_owned())
            .ok_or_else(|| Error::SingularProjector("lower L2 projector solve".into()))?;

        // Gradient projections by integration by parts: component d of the
        // gradient tested against m_g equals -(phi_j, d_d m_g)_E plus the
        // boundary integral of trace(phi_j) m_g n_d.
        let build_grad_rhs = |rows: usize| -> [DMatrix<f64>; 2] {
            let mut out = [DMatrix::zeros(rows, n_dofs), DMatrix::zeros(rows, n_dofs)];
            for (d, mat) in out.iter_mut().enumerate() {
                for g in 0..rows {
                    for (dm, c) in basis.derivative_coeffs(g, d) {
                        for j in 0..n_dofs {
                            mat[(g, j)] -= c * moments[(dm, j)];
                        }
                    }
                    for edge in &edges {
                        let nd = edge.normal[d];
                        if nd == 0.0 {
                            continue;
                        }
                        for (&t, &w) in edge.nodes.iter().zip(&edge.weights) {
                            let mv = basis.eval_one(g, edge.point(t));
                            for (jj, &col) in edge.cols.iter().enumerate() {
                                mat[(g, col)] += edge.len * w * edge.trace(jj, t) * mv * nd;
                            }
                        }
                    }
                }
            }
            out
        };
        let rhs_lower = build_grad_rhs(n_km1);
        let rhs_full = build_grad_rhs(n_k);
        let solve_pair = |lu: &Lu, rhs: &[DMatrix<f64>; 2]| -> Result<[DMatrix<f64>; 2]> {
            Ok([
                lu.solve(&rhs[0])
                    .ok_or_else(|| Error::SingularProjector("gradient projection".into()))?,
                lu.solve(&rhs[1])
                    .ok_or_else(|| Error::SingularProjector("gradient projection".into()))?,
            ])
        };
        let grad_proj_lower = solve_pair(&h_km1_lu, &rhs_lower)?;
        let grad_proj = solve_pair(&h_lu, &rhs_full)?;

        Ok(LocalSpace {
            verts: verts.to_vec(),
            k,
            layout,
            area,
            basis,
            mass_monomials,
            dof_of_monomial,
            elliptic_proj,
            elliptic_proj_dof,
            l2_proj,
            l2_proj_lower,
            grad_proj_lower,
            grad_proj,
            moments,
            volume_rule,
            mon_at_quad,
        })
    }

    fn edge_traces(verts: &[Point], layout: &DofLayout) -> Result<Vec<EdgeTrace>> {
        let k = layout.k;
        let n_v = verts.len();
        // Constraint matrix in the t-monomial basis: trace value at t=0,
        // value at t=1, then moments against shifted Legendre polynomials.
        let mut t_mat = DMatrix::zeros(k + 1, k + 1);
        for m in 0..=k {
            t_mat[(0, m)] = if m == 0 { 1.0 } else { 0.0 };
            t_mat[(1, m)] = 1.0;
        }
        let (gn, gw) = gauss_legendre(k + 2);
        let nodes: Vec<f64> = gn.iter().map(|&t| 0.5 * (t + 1.0)).collect();
        let weights: Vec<f64> = gw.iter().map(|&w| 0.5 * w).collect();
        for j in 0..k.saturating_sub(1) {
            for m in 0..=k {
                t_mat[(2 + j, m)] = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&t, &w)| w * t.powi(m as i32) * shifted_legendre(j, t))
                    .sum();
            }
        }
        let t_inv = t_mat
            .try_inverse()
            .ok_or_else(|| Error::SingularProjector("edge trace basis".into()))?;

        let mut out = Vec::with_capacity(n_v);
        for e in 0..n_v {
            let a = verts[e];
            let b = verts[(e + 1) % n_v];
            let d = b - a;
            let len = d.norm();
            if !(len > 0.0) {
                return Err(Error::InvalidElement {
                    element: usize::MAX,
                    reason: format!("zero-length edge {e}"),
                });
            }
            let mut cols = vec![layout.vertex_dof(e), layout.vertex_dof((e + 1) % n_v)];
            for j in 0..layout.per_edge {
                cols.push(layout.edge_dof(e, j));
            }
            out.push(EdgeTrace {
                cols,
                coeffs: t_inv.clone(),
                nodes: nodes.clone(),
                weights: weights.clone(),
                a,
                b,
                len,
                normal: Vec2::new(d.y, -d.x) / len,
            });
        }
        Ok(out)
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.total()
    }

    /// Stabilized local stiffness matrix: the P_{k-1} gradient-projection
    /// consistency term plus the dof inner product on the elliptic projector
    /// complement.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let n_km1 = monomial_count(self.k - 1);
        let h_low = self
            .mass_monomials
            .view((0, 0), (n_km1, n_km1))
            .into_owned();
        let mut a = DMatrix::zeros(self.n_dofs(), self.n_dofs());
        for d in 0..2 {
            let g = &self.grad_proj_lower[d];
            a += g.transpose() * &h_low * g;
        }
        let residual = DMatrix::identity(self.n_dofs(), self.n_dofs()) - &self.elliptic_proj_dof;
        a + residual.transpose() * residual
    }

    /// Stabilized local mass matrix: L2-projection consistency term plus the
    /// area-scaled dof inner product on the L2 projector complement.
    pub fn mass(&self) -> DMatrix<f64> {
        let consistency = self.l2_proj.transpose() * &self.mass_monomials * &self.l2_proj;
        let l2_dof = &self.dof_of_monomial * &self.l2_proj;
        let residual = DMatrix::identity(self.n_dofs(), self.n_dofs()) - l2_dof;
        consistency + self.area * residual.transpose() * residual
    }

    /// Drift coupling matrix for a frozen potential: entry (r, c) integrates
    /// charge * [P_{k-1} projection of dof c] * [P_k gradient projection of
    /// psi] . [P_{k-1} gradient projection of dof r]. Projector-only, no
    /// stabilization.
    pub fn coupling(&self, psi_dofs: &DVector<f64>, charge: f64) -> DMatrix<f64> {
        let n = self.n_dofs();
        let n_km1 = monomial_count(self.k - 1);
        let psi_grad = [&self.grad_proj[0] * psi_dofs, &self.grad_proj[1] * psi_dofs];
        let mut out = DMatrix::zeros(n, n);
        for (q, &w) in self.volume_rule.weights.iter().enumerate() {
            let mut wx = 0.0;
            let mut wy = 0.0;
            for g in 0..self.basis.len() {
                wx += psi_grad[0][g] * self.mon_at_quad[(q, g)];
                wy += psi_grad[1][g] * self.mon_at_quad[(q, g)];
            }
            for r in 0..n {
                let mut gr_dot = 0.0;
                for g in 0..n_km1 {
                    gr_dot += self.mon_at_quad[(q, g)]
                        * (wx * self.grad_proj_lower[0][(g, r)]
                            + wy * self.grad_proj_lower[1][(g, r)]);
                }
                let wr = charge * w * gr_dot;
                if wr == 0.0 {
                    continue;
                }
                for c in 0..n {
                    let mut uc = 0.0;
                    for g in 0..n_km1 {
                        uc += self.mon_at_quad[(q, g)] * self.l2_proj_lower[(g, c)];
                    }
                    out[(r, c)] += wr * uc;
                }
            }
        }
        out
    }

    /// Charge coupling matrices, one per species: entry (r, c) of matrix i is
    /// -q_i (P_{k-1} dof c, P_{k-1} dof r)_E.
    pub fn charge_coupling(&self, charges: [f64; 2]) -> [DMatrix<f64>; 2] {
        let n_km1 = monomial_count(self.k - 1);
        let h_low = self
            .mass_monomials
            .view((0, 0), (n_km1, n_km1))
            .into_owned();
        let base = self.l2_proj_lower.transpose() * h_low * &self.l2_proj_lower;
        [-charges[0] * &base, -charges[1] * base]
    }

    /// Load vector (g, P_k projection of dof r)_E with a rule exact to
    /// `order` for the polynomial factor.
    pub fn load(&self, g: impl Fn(Point) -> f64, order: usize) -> Result<DVector<f64>> {
        let mut raw_moments = DVector::zeros(self.basis.len());
        if order <= self.volume_rule.order {
            for ((&p, &w), q) in self
                .volume_rule
                .points
                .iter()
                .zip(&self.volume_rule.weights)
                .zip(0..)
            {
                let gv = w * g(p);
                for b in 0..self.basis.len() {
                    raw_moments[b] += gv * self.mon_at_quad[(q, b)];
                }
            }
        } else {
            let rule = polygon_quadrature(&self.verts, order)?;
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                let gv = w * g(p);
                for b in 0..self.basis.len() {
                    raw_moments[b] += gv * self.basis.eval_one(b, p);
                }
            }
        }
        Ok(self.l2_proj.transpose() * raw_moments)
    }

    /// Dof vector of a smooth function: point values at vertices, Legendre
    /// moments on edges, scaled monomial moments inside, with rules exact to
    /// `order` for the polynomial factors.
    pub fn dofs_of(&self, f: impl Fn(Point) -> f64, order: usize) -> Result<DVector<f64>> {
        let mut dofs = DVector::zeros(self.n_dofs());
        for (v, &p) in self.verts.iter().enumerate() {
            dofs[self.layout.vertex_dof(v)] = f(p);
        }
        let n_v = self.verts.len();
        for e in 0..n_v {
            let a = self.verts[e];
            let b = self.verts[(e + 1) % n_v];
            let rule = edge_quadrature(a, b, order);
            let len = (b - a).norm();
            for j in 0..self.layout.per_edge {
                let mut acc = 0.0;
                for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                    let t = (p - a).norm() / len;
                    acc += w * f(p) * shifted_legendre(j, t);
                }
                dofs[self.layout.edge_dof(e, j)] = acc / len;
            }
        }
        if self.layout.n_internal > 0 {
            let rule = polygon_quadrature(&self.verts, order)?;
            let mon = self.basis.eval(&rule.points);
            for m in 0..self.layout.n_internal {
                let mut acc = 0.0;
                for ((&p, &w), q) in rule.points.iter().zip(&rule.weights).zip(0..) {
                    acc += w * f(p) * mon[(q, m)];
                }
                dofs[self.layout.internal_dof(m)] = acc / self.area;
            }
        }
        Ok(dofs)
    }

    /// Dof vector of the polynomial with the given monomial coefficients.
    pub fn polynomial_dofs(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.dof_of_monomial * coeffs
    }

    /// Value of a polynomial given in monomial coordinates.
    pub fn eval_poly(&self, coeffs: &DVector<f64>, p: Point) -> f64 {
        (0..self.basis.len())
            .map(|b| coeffs[b] * self.basis.eval_one(b, p))
            .sum()
    }

    /// Gradient of a polynomial given in monomial coordinates.
    pub fn eval_poly_grad(&self, coeffs: &DVector<f64>, p: Point) -> Vec2 {
        let mut g = Vec2::zeros();
        for b in 0..self.basis.len() {
            g += coeffs[b] * self.basis.grad_one(b, p);
        }
        g
    }
}
