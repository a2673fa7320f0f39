//! Polygonal meshes of the unit square.
//!
//! A mesh is a list of vertices plus counterclockwise vertex cycles, one per
//! element. Edge topology and boundary flags are derived on construction;
//! shape quality (star-shapedness, inradius and edge-length ratios) is
//! checked by [`validate`].

mod generators;
mod io;
mod quality;

pub use generators::{generate_structured, generate_voronoi, generate_voronoi_with_info, StructuredKind, VoronoiInfo};
pub use io::{read_mesh, write_mesh};
pub use quality::{validate, ElementQuality, QualityReport};

use crate::geom::{self, Point};
use crate::{Error, Result};
use std::collections::HashMap;

/// Distance below which a vertex counts as lying on the domain boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// A polygonal decomposition of the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalMesh {
    /// Vertex coordinates.
    pub vertices: Vec<Point>,
    /// Vertex-index cycles, counterclockwise.
    pub elements: Vec<Vec<usize>>,
    /// Per-vertex flag: true when the vertex lies on the domain boundary.
    pub boundary_vertex: Vec<bool>,
    /// (element, local edge) pairs of edges used by exactly one element.
    pub boundary_edges: Vec<(usize, usize)>,
}

/// An undirected mesh edge with the elements using it.
#[derive(Debug, Clone)]
pub struct MeshEdge {
    /// Endpoints with `v.0 < v.1`.
    pub v: (usize, usize),
    /// Elements referencing the edge as (element, local edge, runs v0->v1).
    pub users: Vec<(usize, usize, bool)>,
}

/// Area, centroid and diameter of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    pub centroid: Point,
    pub diameter: f64,
}

impl PolygonalMesh {
    /// Assembles a mesh from raw vertex and cycle data, deriving boundary
    /// information from edge incidence. Only structural impossibilities
    /// (bad indices, cycles shorter than 3) are rejected here; geometric
    /// defects are reported by [`validate`].
    pub fn from_parts(vertices: Vec<Point>, elements: Vec<Vec<usize>>) -> Result<Self> {
        for (e, cycle) in elements.iter().enumerate() {
            if cycle.len() < 3 {
                return Err(Error::InvalidElement {
                    element: e,
                    reason: format!("cycle has {} vertices", cycle.len()),
                });
            }
            for &v in cycle {
                if v >= vertices.len() {
                    return Err(Error::InvalidElement {
                        element: e,
                        reason: format!("vertex index {v} out of range"),
                    });
                }
            }
        }
        let mut mesh = Self {
            vertices,
            elements,
            boundary_vertex: Vec::new(),
            boundary_edges: Vec::new(),
        };
        mesh.rebuild_boundary();
        Ok(mesh)
    }

    fn rebuild_boundary(&mut self) {
        let edges = self.edges();
        let mut flags = vec![false; self.vertices.len()];
        let mut bedges = Vec::new();
        for edge in &edges {
            if edge.users.len() == 1 {
                let (e, le, _) = edge.users[0];
                bedges.push((e, le));
                flags[edge.v.0] = true;
                flags[edge.v.1] = true;
            }
        }
        self.boundary_vertex = flags;
        self.boundary_edges = bedges;
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Vertex coordinates of element `e` in cycle order.
    pub fn element_vertices(&self, e: usize) -> Vec<Point> {
        self.elements[e].iter().map(|&v| self.vertices[v]).collect()
    }

    /// Undirected edges in first-encounter order (element order, then local
    /// edge order), so the numbering is deterministic.
    pub fn edges(&self) -> Vec<MeshEdge> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<MeshEdge> = Vec::new();
        for (e, cycle) in self.elements.iter().enumerate() {
            let n = cycle.len();
            for le in 0..n {
                let a = cycle[le];
                let b = cycle[(le + 1) % n];
                let key = (a.min(b), a.max(b));
                let forward = a < b;
                match index.get(&key) {
                    Some(&id) => edges[id].users.push((e, le, forward)),
                    None => {
                        index.insert(key, edges.len());
                        edges.push(MeshEdge {
                            v: key,
                            users: vec![(e, le, forward)],
                        });
                    }
                }
            }
        }
        edges
    }
}

/// Shoelace area, area-weighted centroid and diameter of element `e`.
pub fn element_geometry(mesh: &PolygonalMesh, e: usize) -> Result<ElementGeometry> {
    let verts = mesh.element_vertices(e);
    let area = geom::signed_area(&verts);
    if !(area > 0.0) {
        return Err(Error::InvalidElement {
            element: e,
            reason: format!("signed area {area:.3e} is not positive"),
        });
    }
    Ok(ElementGeometry {
        area,
        centroid: geom::centroid(&verts),
        diameter: geom::diameter(&verts),
    })
}

/// Mesh-size parameter `(|domain| / N_E)^(1/2)` for the unit square.
pub fn mesh_size(mesh: &PolygonalMesh) -> f64 {
    (1.0 / mesh.n_elements() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_geometry() {
        let mesh = PolygonalMesh::from_parts(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap();
        let g = element_geometry(&mesh, 0).unwrap();
        assert_relative_eq!(g.area, 1.0);
        assert_relative_eq!(g.centroid.x, 0.5);
        assert_relative_eq!(g.centroid.y, 0.5);
        assert_relative_eq!(g.diameter, 2f64.sqrt());
        assert_eq!(mesh.boundary_edges.len(), 4);
        assert!(mesh.boundary_vertex.iter().all(|&b| b));
    }

    #[test]
    fn triangle_geometry() {
        let mesh = PolygonalMesh::from_parts(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let g = element_geometry(&mesh, 0).unwrap();
        assert_relative_eq!(g.area, 0.5);
        assert_relative_eq!(g.diameter, 2f64.sqrt());
    }

    #[test]
    fn hexagon_geometry_matches_fan_triangulation() {
        // Regular hexagon, circumradius 1, centered at the origin.
        let verts: Vec<Point> = (0..6)
            .map(|i| {
                let a = std::f64::consts::PI / 3.0 * i as f64;
                Point::new(a.cos(), a.sin())
            })
            .collect();
        let mesh = PolygonalMesh::from_parts(verts.clone(), vec![(0..6).collect()]).unwrap();
        let g = element_geometry(&mesh, 0).unwrap();

        // Brute-force oracle: fan-triangulate from the first vertex and sum
        // triangle areas / first moments.
        let mut area = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 1..5 {
            let (a, b, c) = (verts[0], verts[i], verts[i + 1]);
            let t = 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
            area += t;
            cx += t * (a.x + b.x + c.x) / 3.0;
            cy += t * (a.y + b.y + c.y) / 3.0;
        }
        assert_relative_eq!(g.area, area, epsilon = 1e-13);
        assert_relative_eq!(g.centroid.x, cx / area, epsilon = 1e-13);
        assert_relative_eq!(g.centroid.y, cy / area, epsilon = 1e-13);
    }

    #[test]
    fn degenerate_element_rejected() {
        let mesh = PolygonalMesh::from_parts(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
            ],
            vec![vec![0, 2, 1]], // clockwise: negative area
        )
        .unwrap();
        assert!(element_geometry(&mesh, 0).is_err());
    }

    #[test]
    fn mesh_size_formula() {
        let mesh = generate_structured(StructuredKind::Square, 10);
        assert_eq!(mesh.n_elements(), 100);
        assert_relative_eq!(mesh_size(&mesh), 0.1);
        let one = generate_structured(StructuredKind::Square, 1);
        assert_relative_eq!(mesh_size(&one), 1.0);
        // 2 * 16^2 = 512 elements.
        let m512 = generate_structured(StructuredKind::Triangle, 16);
        assert_eq!(m512.n_elements(), 512);
        assert_relative_eq!(mesh_size(&m512), 1.0 / 512f64.sqrt());
    }
}
