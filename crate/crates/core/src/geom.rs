//! Planar polygon primitives shared by the mesh and quadrature modules.
//!
//! Polygons are vertex lists in counterclockwise order. Functions here make
//! no mesh assumptions and work on bare vertex slices.

use nalgebra::{Point2, Vector2};

pub type Point = Point2<f64>;
pub type Vec2 = Vector2<f64>;

/// Signed area by the shoelace formula; positive for counterclockwise cycles.
pub fn signed_area(verts: &[Point]) -> f64 {
    let n = verts.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// Area-weighted centroid of a simple polygon.
pub fn centroid(verts: &[Point]) -> Point {
    let n = verts.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut area = 0.0;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let w = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
        area += w;
    }
    let area = 0.5 * area;
    Point::new(cx / (6.0 * area), cy / (6.0 * area))
}

/// Maximum inter-vertex distance.
pub fn diameter(verts: &[Point]) -> f64 {
    let mut d2: f64 = 0.0;
    for i in 0..verts.len() {
        for j in (i + 1)..verts.len() {
            d2 = d2.max((verts[i] - verts[j]).norm_squared());
        }
    }
    d2.sqrt()
}

/// Minimum inter-vertex distance.
pub fn min_vertex_distance(verts: &[Point]) -> f64 {
    let mut d2 = f64::INFINITY;
    for i in 0..verts.len() {
        for j in (i + 1)..verts.len() {
            d2 = d2.min((verts[i] - verts[j]).norm_squared());
        }
    }
    d2.sqrt()
}

/// Even-odd point-in-polygon test (boundary points unspecified).
pub fn point_in_polygon(p: Point, verts: &[Point]) -> bool {
    let n = verts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (verts[i], verts[j]);
        if (vi.y > p.y) != (vj.y > p.y) {
            let x_cross = vi.x + (p.y - vi.y) / (vj.y - vi.y) * (vj.x - vi.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Clip a convex polygon by the half-plane `n · x <= c` (Sutherland-Hodgman).
/// Returns an empty vector when nothing survives.
pub fn clip_half_plane(poly: &[Point], normal: Vec2, c: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    if n == 0 {
        return out;
    }
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let da = normal.dot(&a.coords) - c;
        let db = normal.dot(&b.coords) - c;
        if da <= 0.0 {
            out.push(a);
            if db > 0.0 {
                let t = da / (da - db);
                out.push(a + t * (b - a));
            }
        } else if db <= 0.0 {
            let t = da / (da - db);
            out.push(a + t * (b - a));
        }
    }
    out
}

/// Kernel of a polygon: the set of points that see the whole boundary,
/// computed by clipping the bounding box against every edge half-plane.
/// Empty result means the polygon is not star-shaped.
pub fn kernel(verts: &[Point]) -> Vec<Point> {
    let (mut lo_x, mut lo_y) = (f64::INFINITY, f64::INFINITY);
    let (mut hi_x, mut hi_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in verts {
        lo_x = lo_x.min(v.x);
        lo_y = lo_y.min(v.y);
        hi_x = hi_x.max(v.x);
        hi_y = hi_y.max(v.y);
    }
    let mut region = vec![
        Point::new(lo_x, lo_y),
        Point::new(hi_x, lo_y),
        Point::new(hi_x, hi_y),
        Point::new(lo_x, hi_y),
    ];
    let n = verts.len();
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        // Interior of a CCW polygon lies left of a->b: cross(b-a, x-a) >= 0,
        // rewritten as n·x <= c with n the right-pointing edge normal.
        let e = b - a;
        let normal = Vec2::new(e.y, -e.x);
        let c = normal.dot(&a.coords);
        region = clip_half_plane(&region, normal, c);
        if region.is_empty() {
            return region;
        }
    }
    region
}

/// Radius of the largest disc whose center set (the kernel shrunk by the
/// radius) stays nonempty, found by bisection on the inward offset.
pub fn kernel_inradius(verts: &[Point]) -> f64 {
    let ker = kernel(verts);
    if ker.is_empty() {
        return 0.0;
    }
    let shrink_nonempty = |r: f64| -> bool {
        let n = verts.len();
        let mut region = ker.clone();
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let e = b - a;
            let len = e.norm();
            if len == 0.0 {
                continue;
            }
            let normal = Vec2::new(e.y, -e.x) / len;
            let c = normal.dot(&a.coords) - r;
            region = clip_half_plane(&region, normal, c);
            if region.is_empty() {
                return false;
            }
        }
        signed_area(&region).abs() >= 0.0
    };
    let mut lo = 0.0;
    let mut hi = 0.5 * diameter(verts);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if shrink_nonempty(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// A point from which every boundary point is visible, or `None` when the
/// polygon is not star-shaped. Prefers the centroid when it lies in the
/// kernel so that fan triangulations on convex cells use the natural center.
pub fn star_center(verts: &[Point]) -> Option<Point> {
    let ker = kernel(verts);
    if ker.is_empty() {
        return None;
    }
    let c = centroid(verts);
    if point_in_kernel(c, verts) {
        return Some(c);
    }
    if signed_area(&ker).abs() > 0.0 {
        Some(centroid(&ker))
    } else {
        // Degenerate (segment-like) kernel: fall back to the vertex average.
        let n = ker.len() as f64;
        let sum = ker.iter().fold(Vec2::zeros(), |acc, p| acc + p.coords);
        Some(Point::from(sum / n))
    }
}

/// Whether `p` lies on the interior side (within a small slack) of every edge.
pub fn point_in_kernel(p: Point, verts: &[Point]) -> bool {
    let n = verts.len();
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let e = b - a;
        let cross = e.x * (p.y - a.y) - e.y * (p.x - a.x);
        if cross < -1e-14 * e.norm() * diameter(verts) {
            return false;
        }
    }
    true
}

fn segments_properly_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// True when no two non-adjacent edges cross.
pub fn is_simple(verts: &[Point]) -> bool {
    let n = verts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (verts[i], verts[(i + 1) % n]);
        for j in (i + 1)..n {
            // Skip adjacent edges (they share a vertex).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (verts[j], verts[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
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
    fn square_area_centroid_diameter() {
        let sq = unit_square();
        assert_relative_eq!(signed_area(&sq), 1.0);
        let c = centroid(&sq);
        assert_relative_eq!(c.x, 0.5);
        assert_relative_eq!(c.y, 0.5);
        assert_relative_eq!(diameter(&sq), 2f64.sqrt());
    }

    #[test]
    fn kernel_of_convex_polygon_is_polygon() {
        let sq = unit_square();
        let ker = kernel(&sq);
        assert_relative_eq!(signed_area(&ker), 1.0, epsilon = 1e-12);
        assert_relative_eq!(kernel_inradius(&sq), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nonconvex_polygon_has_smaller_kernel() {
        // L-shaped hexagon.
        let poly = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert!(is_simple(&poly));
        let ker = kernel(&poly);
        assert!(!ker.is_empty());
        let ker_area = signed_area(&ker);
        assert!(ker_area > 0.0 && ker_area < signed_area(&poly));
        // Kernel of the L-shape is the lower-left unit square.
        assert_relative_eq!(ker_area, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn self_intersecting_polygon_detected() {
        let bowtie = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(!is_simple(&bowtie));
    }

    #[test]
    fn star_center_inside_nonconvex() {
        let poly = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(2.0 / 3.0, 0.25),
            Point::new(1.0 / 3.0, 0.75),
            Point::new(0.0, 0.5),
        ];
        let c = star_center(&poly).expect("star-shaped");
        assert!(point_in_kernel(c, &poly));
    }
}
