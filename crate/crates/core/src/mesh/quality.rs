//! Structural and shape-quality validation.
//!
//! Validation never panics on a bad mesh: structural defects (orientation,
//! self-intersection, broken edge pairing, coverage gaps) are collected as
//! diagnostics, and shape quality is reported per element so callers can
//! apply their own thresholds. Poor but legal shapes produce warnings only,
//! since the regularity constants of the underlying assumption are free.

use super::{mesh_size, PolygonalMesh, BOUNDARY_TOL};
use crate::geom;

/// Warn when the largest kernel-inscribed ball is below this fraction of the
/// element diameter.
pub const INRADIUS_WARN: f64 = 0.05;
/// Warn when the closest vertex pair is below this fraction of the diameter.
pub const MIN_EDGE_WARN: f64 = 0.02;

/// Shape quality of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementQuality {
    /// Nonempty half-plane kernel.
    pub star_shaped: bool,
    /// Radius of the largest ball inscribed in the kernel over the diameter.
    pub inradius_ratio: f64,
    /// Minimum inter-vertex distance over the diameter.
    pub min_edge_ratio: f64,
}

/// Mesh-wide validation result.
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub per_element: Vec<ElementQuality>,
    /// Mesh-size parameter (|domain|/N_E)^(1/2).
    pub h: f64,
    pub n_elements: usize,
    /// Structural problems; empty for a well-formed mesh.
    pub defects: Vec<String>,
    /// Soft quality warnings (small inradius or edge ratios).
    pub warnings: Vec<String>,
}

impl QualityReport {
    pub fn min_inradius_ratio(&self) -> f64 {
        self.per_element
            .iter()
            .map(|q| q.inradius_ratio)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_edge_ratio(&self) -> f64 {
        self.per_element
            .iter()
            .map(|q| q.min_edge_ratio)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_star_shaped(&self) -> bool {
        self.per_element.iter().all(|q| q.star_shaped)
    }
}

fn on_unit_square_boundary(p: geom::Point) -> bool {
    p.x.abs() < BOUNDARY_TOL
        || (p.x - 1.0).abs() < BOUNDARY_TOL
        || p.y.abs() < BOUNDARY_TOL
        || (p.y - 1.0).abs() < BOUNDARY_TOL
}

/// Checks structure (orientation, simplicity, edge pairing, coverage, Euler
/// relation, boundary flags) and computes per-element shape quality.
pub fn validate(mesh: &PolygonalMesh) -> QualityReport {
    let mut defects = Vec::new();
    let mut warnings = Vec::new();
    let mut per_element = Vec::with_capacity(mesh.n_elements());
    let mut total_area = 0.0;

    for e in 0..mesh.n_elements() {
        let verts = mesh.element_vertices(e);
        let area = geom::signed_area(&verts);
        if !(area > 0.0) {
            defects.push(format!(
                "element {e}: signed area {area:.3e} (wrong orientation or degenerate)"
            ));
        } else {
            total_area += area;
        }
        if !geom::is_simple(&verts) {
            defects.push(format!("element {e}: self-intersecting polygon"));
        }
        let diam = geom::diameter(&verts);
        let inradius = geom::kernel_inradius(&verts);
        let q = ElementQuality {
            star_shaped: inradius > 0.0,
            inradius_ratio: inradius / diam,
            min_edge_ratio: geom::min_vertex_distance(&verts) / diam,
        };
        if !q.star_shaped {
            defects.push(format!("element {e}: empty kernel (not star-shaped)"));
        } else {
            if q.inradius_ratio < INRADIUS_WARN {
                warnings.push(format!(
                    "element {e}: inradius ratio {:.4} below {INRADIUS_WARN}",
                    q.inradius_ratio
                ));
            }
            if q.min_edge_ratio < MIN_EDGE_WARN {
                warnings.push(format!(
                    "element {e}: min edge ratio {:.4} below {MIN_EDGE_WARN}",
                    q.min_edge_ratio
                ));
            }
        }
        per_element.push(q);
    }

    if (total_area - 1.0).abs() > 1e-12 {
        defects.push(format!(
            "element areas sum to {total_area:.15} instead of 1 (gap or overlap)"
        ));
    }

    let edges = mesh.edges();
    for edge in &edges {
        match edge.users.len() {
            1 => {
                let (a, b) = edge.v;
                if !on_unit_square_boundary(mesh.vertices[a])
                    || !on_unit_square_boundary(mesh.vertices[b])
                {
                    defects.push(format!(
                        "edge ({a},{b}) used once but not on the domain boundary (dangling edge)"
                    ));
                }
            }
            2 => {
                if edge.users[0].2 == edge.users[1].2 {
                    defects.push(format!(
                        "edge ({},{}) traversed in the same direction by elements {} and {}",
                        edge.v.0, edge.v.1, edge.users[0].0, edge.users[1].0
                    ));
                }
            }
            n => defects.push(format!(
                "edge ({},{}) shared by {n} elements",
                edge.v.0, edge.v.1
            )),
        }
    }

    for (v, &flag) in mesh.boundary_vertex.iter().enumerate() {
        if flag != on_unit_square_boundary(mesh.vertices[v]) {
            defects.push(format!(
                "vertex {v} boundary flag {flag} contradicts its position"
            ));
        }
    }

    let euler = mesh.n_vertices() as i64 - edges.len() as i64 + mesh.n_elements() as i64;
    if euler != 1 {
        defects.push(format!("Euler relation V - E + F = {euler}, expected 1"));
    }

    QualityReport {
        per_element,
        h: mesh_size(mesh),
        n_elements: mesh.n_elements(),
        defects,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::mesh::{generate_structured, generate_voronoi, StructuredKind};
    use approx::assert_relative_eq;

    #[test]
    fn square_grid_quality() {
        let mesh = generate_structured(StructuredKind::Square, 4);
        let report = validate(&mesh);
        assert!(report.defects.is_empty());
        assert!(report.all_star_shaped());
        assert_relative_eq!(report.h, 0.25);
        for q in &report.per_element {
            // Inscribed ball radius s/2 over the diagonal s*sqrt(2).
            assert_relative_eq!(q.inradius_ratio, 0.5 / 2f64.sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn self_intersecting_polygon_reported() {
        let mesh = PolygonalMesh::from_parts(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap();
        let report = validate(&mesh);
        assert!(report
            .defects
            .iter()
            .any(|d| d.contains("self-intersecting")));
    }

    #[test]
    fn random_voronoi_all_star_shaped() {
        let mesh = generate_voronoi(64, 0, 7).unwrap();
        let report = validate(&mesh);
        assert!(report.defects.is_empty(), "{:?}", report.defects);
        assert!(report.min_inradius_ratio() > 0.0);
    }
}
