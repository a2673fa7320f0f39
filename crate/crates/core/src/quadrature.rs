//! Scaled monomial bases and quadrature rules on polygons and edges.
//!
//! Every integral in the discretization is evaluated through the rules built
//! here. Polygon rules fan-triangulate from a star center and place a tensor
//! Gauss rule (collapsed onto the triangle) on each fan triangle, so they are
//! exact for polynomials up to the requested total degree with positive
//! weights. Edge rules are mapped Gauss-Legendre points.

use crate::geom::{self, Point, Vec2};
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Default polynomial exactness used for the local forms of order-`k` spaces.
/// Covers products of two projected functions and the drift trilinear form.
pub fn default_volume_order(k: usize) -> usize {
    2 * k + 2
}

/// Quadrature order used for integrands that are not polynomial (source
/// loads, error norms): high enough that the quadrature error of smooth data
/// sits far below the discretization error on any element of the unit square.
pub fn data_volume_order(k: usize) -> usize {
    2 * k + 6
}

/// Nodes and weights of an `n`-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = if n == 1 {
                1.0
            } else {
                n as f64 * (x * p1 - p0) / (x * x - 1.0)
            };
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Points, weights and declared polynomial exactness of a rule.
///
/// For polygon rules the weights sum to the polygon area; for edge rules to
/// the edge length.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, mut f: impl FnMut(Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss-Legendre rule mapped to the segment `[a, b]`, exact for 1D
/// polynomials of degree `order` along the segment.
pub fn edge_quadrature(a: Point, b: Point, order: usize) -> QuadratureRule {
    let n = order / 2 + 1;
    let (nodes, weights) = gauss_legendre(n);
    let mid = Point::from((a.coords + b.coords) * 0.5);
    let half = (b - a) * 0.5;
    let len = (b - a).norm();
    let points = nodes.iter().map(|&t| mid + t * half).collect();
    let weights = weights.iter().map(|&w| 0.5 * w * len).collect();
    QuadratureRule {
        points,
        weights,
        order,
    }
}

/// Rule on a single triangle (a, b, c) via the collapsed tensor Gauss rule.
/// Exact for total degree `order`; all weights positive.
fn triangle_rule(a: Point, b: Point, c: Point, order: usize) -> (Vec<Point>, Vec<f64>) {
    // On the reference triangle x,y>=0, x+y<=1 use x = u(1-v), y = uv with
    // Jacobian u; the integrand gains one degree in u.
    let n = (order + 2).div_ceil(2);
    let (nodes, weights) = gauss_legendre(n);
    let to01 = |t: f64| 0.5 * (t + 1.0);
    let ab = b - a;
    let ac = c - a;
    let jac2 = ab.x * ac.y - ab.y * ac.x; // = 2 * signed area
    let mut pts = Vec::with_capacity(n * n);
    let mut wts = Vec::with_capacity(n * n);
    for (iu, &tu) in nodes.iter().enumerate() {
        let u = to01(tu);
        for (iv, &tv) in nodes.iter().enumerate() {
            let v = to01(tv);
            let x = u * (1.0 - v);
            let y = u * v;
            pts.push(a + x * ab + y * ac);
            wts.push(0.25 * weights[iu] * weights[iv] * u * jac2);
        }
    }
    (pts, wts)
}

/// Volume rule on a star-shaped polygon: fan triangulation from the centroid
/// when it sees the whole boundary, otherwise from a kernel point. Exact for
/// polynomials of total degree `order`.
pub fn polygon_quadrature(verts: &[Point], order: usize) -> Result<QuadratureRule> {
    let center = geom::star_center(verts).ok_or_else(|| Error::InvalidElement {
        element: usize::MAX,
        reason: "no interior fan point: polygon is not star-shaped".into(),
    })?;
    let n = verts.len();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        let (pts, wts) = triangle_rule(center, verts[i], verts[(i + 1) % n], order);
        points.extend(pts);
        weights.extend(wts);
    }
    Ok(QuadratureRule {
        points,
        weights,
        order,
    })
}

/// Monomials `((x - x_E)/h_E)^alpha` for |alpha| <= k in graded
/// lexicographic order: 1, x, y, x^2, xy, y^2, ...
#[derive(Debug, Clone)]
pub struct ScaledMonomialBasis {
    pub center: Point,
    pub h: f64,
    pub k: usize,
    exps: Vec<(u32, u32)>,
}

/// Number of monomials of total degree <= k in two variables.
pub fn monomial_count(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

impl ScaledMonomialBasis {
    pub fn new(center: Point, h: f64, k: usize) -> Self {
        let mut exps = Vec::with_capacity(monomial_count(k));
        for deg in 0..=k as u32 {
            for ay in 0..=deg {
                exps.push((deg - ay, ay));
            }
        }
        Self { center, h, k, exps }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exps
    }

    fn local(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.center.x) / self.h,
            (p.y - self.center.y) / self.h,
        )
    }

    /// Value of monomial `i` at `p`.
    pub fn eval_one(&self, i: usize, p: Point) -> f64 {
        let (xi, eta) = self.local(p);
        let (ax, ay) = self.exps[i];
        xi.powi(ax as i32) * eta.powi(ay as i32)
    }

    /// Gradient of monomial `i` at `p`.
    pub fn grad_one(&self, i: usize, p: Point) -> Vec2 {
        let (xi, eta) = self.local(p);
        let (ax, ay) = self.exps[i];
        let gx = if ax == 0 {
            0.0
        } else {
            ax as f64 * xi.powi(ax as i32 - 1) * eta.powi(ay as i32) / self.h
        };
        let gy = if ay == 0 {
            0.0
        } else {
            ay as f64 * xi.powi(ax as i32) * eta.powi(ay as i32 - 1) / self.h
        };
        Vec2::new(gx, gy)
    }

    /// Matrix of values, one row per point and one column per monomial.
    pub fn eval(&self, points: &[Point]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(points.len(), self.len());
        for (r, &p) in points.iter().enumerate() {
            for c in 0..self.len() {
                m[(r, c)] = self.eval_one(c, p);
            }
        }
        m
    }

    /// Pair of matrices with the x- and y-derivatives of every monomial.
    pub fn grad(&self, points: &[Point]) -> [DMatrix<f64>; 2] {
        let mut gx = DMatrix::zeros(points.len(), self.len());
        let mut gy = DMatrix::zeros(points.len(), self.len());
        for (r, &p) in points.iter().enumerate() {
            for c in 0..self.len() {
                let g = self.grad_one(c, p);
                gx[(r, c)] = g.x;
                gy[(r, c)] = g.y;
            }
        }
        [gx, gy]
    }

    /// Coefficients of the Laplacian of monomial `i` expanded in this basis
    /// (the Laplacian of a degree-d monomial has degree d-2).
    pub fn laplacian_coeffs(&self, i: usize) -> Vec<(usize, f64)> {
        let (ax, ay) = self.exps[i];
        let scale = 1.0 / (self.h * self.h);
        let mut out = Vec::new();
        if ax >= 2 {
            let j = self.index_of(ax - 2, ay);
            out.push((j, (ax * (ax - 1)) as f64 * scale));
        }
        if ay >= 2 {
            let j = self.index_of(ax, ay - 2);
            out.push((j, (ay * (ay - 1)) as f64 * scale));
        }
        out
    }

    /// Coefficients of d/dx_c of monomial `i` expanded in this basis.
    pub fn derivative_coeffs(&self, i: usize, comp: usize) -> Vec<(usize, f64)> {
        let (ax, ay) = self.exps[i];
        let mut out = Vec::new();
        match comp {
            0 if ax >= 1 => out.push((self.index_of(ax - 1, ay), ax as f64 / self.h)),
            1 if ay >= 1 => out.push((self.index_of(ax, ay - 1), ay as f64 / self.h)),
            _ => {}
        }
        out
    }

    fn index_of(&self, ax: u32, ay: u32) -> usize {
        let deg = ax + ay;
        (deg * (deg + 1) / 2 + ay) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..=(2 * n - 1) {
                let num: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| wi * xi.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 0 {
                    2.0 / (deg as f64 + 1.0)
                } else {
                    0.0
                };
                assert_relative_eq!(num, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn edge_rule_length_and_moment() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(1.0, 0.0);
        let rule = edge_quadrature(a, b, 4);
        assert_relative_eq!(rule.total_weight(), 1.0, epsilon = 1e-14);
        // t^2 along the edge integrates to 1/3 with 2+ points.
        let rule2 = edge_quadrature(a, b, 2);
        assert_eq!(rule2.points.len(), 2);
        let v = rule2.integrate(|p| p.x * p.x);
        assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn polygon_rule_constant_and_xy() {
        let sq = unit_square();
        let rule = polygon_quadrature(&sq, 2).unwrap();
        assert_relative_eq!(rule.total_weight(), 1.0, epsilon = 1e-13);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        let v = rule.integrate(|p| p.x * p.y);
        assert_relative_eq!(v, 0.25, epsilon = 1e-13);
    }

    #[test]
    fn polygon_rule_on_nonconvex_has_positive_weights() {
        let poly = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(2.0 / 3.0, 0.25),
            Point::new(1.0 / 3.0, 0.75),
            Point::new(0.0, 0.5),
        ];
        let rule = polygon_quadrature(&poly, 4).unwrap();
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert_relative_eq!(
            rule.total_weight(),
            crate::geom::signed_area(&poly),
            epsilon = 1e-13
        );
    }

    #[test]
    fn monomial_basis_values_and_gradients() {
        let basis = ScaledMonomialBasis::new(Point::new(0.5, 0.5), 2.0, 2);
        assert_eq!(basis.len(), 6);
        let p = Point::new(1.3, 0.1);
        assert_relative_eq!(basis.eval_one(0, p), 1.0);
        // Gradient of the linear-in-x monomial is (1/h, 0) everywhere.
        let g = basis.grad_one(1, p);
        assert_relative_eq!(g.x, 0.5);
        assert_relative_eq!(g.y, 0.0);
        assert_relative_eq!(basis.grad_one(0, p).norm(), 0.0);
    }

    #[test]
    fn gradients_match_central_differences() {
        let basis = ScaledMonomialBasis::new(Point::new(0.3, 0.7), 0.5, 2);
        let step = 1e-6 * basis.h;
        let pts = [Point::new(0.41, 0.62), Point::new(0.05, 0.93)];
        for &p in &pts {
            for i in 0..basis.len() {
                let g = basis.grad_one(i, p);
                let fd_x = (basis.eval_one(i, Point::new(p.x + step, p.y))
                    - basis.eval_one(i, Point::new(p.x - step, p.y)))
                    / (2.0 * step);
                let fd_y = (basis.eval_one(i, Point::new(p.x, p.y + step))
                    - basis.eval_one(i, Point::new(p.x, p.y - step)))
                    / (2.0 * step);
                let scale = g.norm().max(1.0);
                assert!((g.x - fd_x).abs() / scale < 1e-7);
                assert!((g.y - fd_y).abs() / scale < 1e-7);
            }
        }
    }

    #[test]
    fn laplacian_coefficients() {
        let basis = ScaledMonomialBasis::new(Point::new(0.0, 0.0), 2.0, 2);
        // Monomial 3 is x^2 (scaled); its Laplacian is 2/h^2 times monomial 0.
        let lap = basis.laplacian_coeffs(3);
        assert_eq!(lap, vec![(0, 0.5)]);
        assert!(basis.laplacian_coeffs(4).is_empty());
    }
}
