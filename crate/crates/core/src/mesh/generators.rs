//! Deterministic mesh generators for the unit square.
//!
//! Four structured families (triangles, squares, non-convex hexagon pairs,
//! mixed polygons) and clipped Voronoi diagrams with optional Lloyd
//! smoothing. All generators are pure functions of their parameters: equal
//! inputs produce bit-identical meshes.

use super::PolygonalMesh;
use crate::geom::{self, Point, Vec2};
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// The structured mesh families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuredKind {
    /// Each grid cell split along the main diagonal.
    Triangle,
    /// Plain n-by-n grid.
    Square,
    /// Each grid cell split by a three-segment zig-zag through the cell
    /// midline into two point-symmetric non-convex hexagons.
    Nonconvex,
    /// 2x2-cell macro tiles of one pentagon, one triangle and two
    /// quadrilaterals; leftover cells of odd grids stay squares.
    Mixed,
}

impl StructuredKind {
    pub fn name(self) -> &'static str {
        match self {
            StructuredKind::Triangle => "triangle",
            StructuredKind::Square => "square",
            StructuredKind::Nonconvex => "nonconvex",
            StructuredKind::Mixed => "mixed",
        }
    }
}

/// Builds vertices on the fly from exact integer lattice keys so shared
/// vertices dedupe without floating-point comparisons.
struct LatticeBuilder {
    /// Lattice subdivisions per grid cell.
    res: i64,
    n: i64,
    map: HashMap<(i64, i64), usize>,
    vertices: Vec<Point>,
    elements: Vec<Vec<usize>>,
}

impl LatticeBuilder {
    fn new(n: usize, res: i64) -> Self {
        Self {
            res,
            n: n as i64,
            map: HashMap::new(),
            vertices: Vec::new(),
            elements: Vec::new(),
        }
    }

    /// Vertex id for lattice coordinates given in units of 1/(res*n).
    fn vertex(&mut self, ix: i64, iy: i64) -> usize {
        let scale = (self.res * self.n) as f64;
        match self.map.get(&(ix, iy)) {
            Some(&id) => id,
            None => {
                let id = self.vertices.len();
                self.map.insert((ix, iy), id);
                self.vertices
                    .push(Point::new(ix as f64 / scale, iy as f64 / scale));
                id
            }
        }
    }

    fn polygon(&mut self, lattice: &[(i64, i64)]) {
        let cycle = lattice.iter().map(|&(x, y)| self.vertex(x, y)).collect();
        self.elements.push(cycle);
    }

    fn finish(self) -> PolygonalMesh {
        PolygonalMesh::from_parts(self.vertices, self.elements)
            .expect("structured generator produced a malformed mesh")
    }
}

/// Generates one of the structured families with `n` grid cells per side.
pub fn generate_structured(kind: StructuredKind, n: usize) -> PolygonalMesh {
    assert!(n >= 1, "need at least one cell per side");
    match kind {
        StructuredKind::Triangle => {
            let mut b = LatticeBuilder::new(n, 1);
            for j in 0..n as i64 {
                for i in 0..n as i64 {
                    b.polygon(&[(i, j), (i + 1, j), (i + 1, j + 1)]);
                    b.polygon(&[(i, j), (i + 1, j + 1), (i, j + 1)]);
                }
            }
            b.finish()
        }
        StructuredKind::Square => {
            let mut b = LatticeBuilder::new(n, 1);
            for j in 0..n as i64 {
                for i in 0..n as i64 {
                    b.polygon(&[(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]);
                }
            }
            b.finish()
        }
        StructuredKind::Nonconvex => {
            // Zig-zag through the midline: (0,1/2) -> (1/3,3/4) -> (2/3,1/4)
            // -> (1,1/2) in cell coordinates, lattice resolution 12.
            let mut b = LatticeBuilder::new(n, 12);
            for j in 0..n as i64 {
                for i in 0..n as i64 {
                    let (x0, y0) = (12 * i, 12 * j);
                    // Lower hexagon (reflex vertex at (2/3, 1/4)).
                    b.polygon(&[
                        (x0, y0),
                        (x0 + 12, y0),
                        (x0 + 12, y0 + 6),
                        (x0 + 8, y0 + 3),
                        (x0 + 4, y0 + 9),
                        (x0, y0 + 6),
                    ]);
                    // Upper hexagon, the lower one rotated by half a turn.
                    b.polygon(&[
                        (x0, y0 + 6),
                        (x0 + 4, y0 + 9),
                        (x0 + 8, y0 + 3),
                        (x0 + 12, y0 + 6),
                        (x0 + 12, y0 + 12),
                        (x0, y0 + 12),
                    ]);
                }
            }
            b.finish()
        }
        StructuredKind::Mixed => {
            let mut b = LatticeBuilder::new(n, 1);
            let n = n as i64;
            let tiles = n / 2;
            for tj in 0..tiles {
                for ti in 0..tiles {
                    let (x0, y0) = (2 * ti, 2 * tj);
                    // Triangle in the lower-left cell.
                    b.polygon(&[(x0, y0), (x0 + 1, y0), (x0 + 1, y0 + 1)]);
                    // Pentagon: remainder of the lower-left cell merged with
                    // the upper-left cell (flat vertex halfway up the left
                    // side keeps the tile conforming with its neighbor).
                    b.polygon(&[
                        (x0, y0),
                        (x0 + 1, y0 + 1),
                        (x0 + 1, y0 + 2),
                        (x0, y0 + 2),
                        (x0, y0 + 1),
                    ]);
                    // Two quadrilaterals in the right column.
                    b.polygon(&[(x0 + 1, y0), (x0 + 2, y0), (x0 + 2, y0 + 1), (x0 + 1, y0 + 1)]);
                    b.polygon(&[
                        (x0 + 1, y0 + 1),
                        (x0 + 2, y0 + 1),
                        (x0 + 2, y0 + 2),
                        (x0 + 1, y0 + 2),
                    ]);
                }
            }
            // Odd grids: fill the last row/column with plain squares.
            for j in 0..n {
                for i in 0..n {
                    if i < 2 * tiles && j < 2 * tiles {
                        continue;
                    }
                    b.polygon(&[(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]);
                }
            }
            b.finish()
        }
    }
}

/// Extra information from the Voronoi generator.
#[derive(Debug, Clone, Default)]
pub struct VoronoiInfo {
    /// Seed indices that had to be jittered to break exact duplicates.
    pub jittered_seeds: Vec<usize>,
}

/// Voronoi diagram of `n_seeds` uniform points in the unit square, clipped to
/// the square, after `lloyd_iters` centroidal relaxation sweeps.
/// Deterministic for a fixed `rng_seed`.
pub fn generate_voronoi(n_seeds: usize, lloyd_iters: usize, rng_seed: u64) -> Result<PolygonalMesh> {
    generate_voronoi_with_info(n_seeds, lloyd_iters, rng_seed).map(|(mesh, _)| mesh)
}

/// Same as [`generate_voronoi`] but also reports seed-jitter events.
pub fn generate_voronoi_with_info(
    n_seeds: usize,
    lloyd_iters: usize,
    rng_seed: u64,
) -> Result<(PolygonalMesh, VoronoiInfo)> {
    assert!(n_seeds >= 1, "need at least one seed");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seeds: Vec<Point> = (0..n_seeds)
        .map(|_| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            Point::new(x, y)
        })
        .collect();
    let mut info = VoronoiInfo::default();
    dedupe_seeds(&mut seeds, &mut info);

    for _ in 0..lloyd_iters {
        let cells = voronoi_cells(&seeds);
        for (s, cell) in seeds.iter_mut().zip(&cells) {
            *s = geom::centroid(cell);
        }
        dedupe_seeds(&mut seeds, &mut info);
    }

    let cells = voronoi_cells(&seeds);
    let mesh = assemble_cells(&cells)?;
    Ok((mesh, info))
}

/// Minimum seed separation; closer pairs are jittered apart.
const SEED_DUP_TOL: f64 = 1e-12;

fn dedupe_seeds(seeds: &mut [Point], info: &mut VoronoiInfo) {
    for i in 0..seeds.len() {
        let mut attempts = 0u32;
        loop {
            let clash = (0..i).any(|j| (seeds[i] - seeds[j]).norm() < SEED_DUP_TOL);
            if !clash {
                break;
            }
            attempts += 1;
            // Deterministic spiral jitter, kept inside the square.
            let angle = 2.399963229728653 * (i as f64 + attempts as f64);
            let r = 1e-9 * attempts as f64;
            let p = seeds[i] + r * Vec2::new(angle.cos(), angle.sin());
            seeds[i] = Point::new(p.x.clamp(0.0, 1.0), p.y.clamp(0.0, 1.0));
            if attempts == 1 {
                info.jittered_seeds.push(i);
            }
            assert!(attempts < 1000, "could not separate duplicate seeds");
        }
    }
}

/// Clipped Voronoi cell of every seed, counterclockwise.
fn voronoi_cells(seeds: &[Point]) -> Vec<Vec<Point>> {
    let square = [
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
    ];
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    let mut cells = Vec::with_capacity(seeds.len());
    for (i, &si) in seeds.iter().enumerate() {
        let mut cell: Vec<Point> = square.to_vec();
        // Clip by bisectors nearest-first so the remaining seeds can be
        // skipped once they are too far to cut the current cell.
        order.sort_by(|&a, &b| {
            let da = (seeds[a] - si).norm_squared();
            let db = (seeds[b] - si).norm_squared();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        for &j in order.iter() {
            if j == i {
                continue;
            }
            let d = seeds[j] - si;
            let dist = d.norm();
            let max_r = cell
                .iter()
                .map(|p| (p - si).norm())
                .fold(0.0f64, f64::max);
            if dist * 0.5 > max_r {
                break;
            }
            let c = d.dot(&(si.coords + seeds[j].coords)) * 0.5;
            cell = geom::clip_half_plane(&cell, d, c);
            if cell.is_empty() {
                break;
            }
        }
        cells.push(cell);
    }
    cells
}

/// Vertices closer than this are fused into one mesh vertex.
const MERGE_TOL: f64 = 1e-9;

/// Fuses per-cell polygons into a conforming mesh: snaps coordinates to the
/// square boundary, merges coincident vertices with a spatial hash, and drops
/// consecutive duplicates inside each cycle.
fn assemble_cells(cells: &[Vec<Point>]) -> Result<PolygonalMesh> {
    let snap = |v: f64| -> f64 {
        if v.abs() < MERGE_TOL {
            0.0
        } else if (v - 1.0).abs() < MERGE_TOL {
            1.0
        } else {
            v
        }
    };
    let cell_size = 4.0 * MERGE_TOL;
    let key = |p: Point| -> (i64, i64) {
        (
            (p.x / cell_size).floor() as i64,
            (p.y / cell_size).floor() as i64,
        )
    };

    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut elements: Vec<Vec<usize>> = Vec::new();

    for (ci, cell) in cells.iter().enumerate() {
        if cell.len() < 3 {
            return Err(crate::Error::InvalidElement {
                element: ci,
                reason: "Voronoi cell degenerated while clipping".into(),
            });
        }
        let mut cycle: Vec<usize> = Vec::with_capacity(cell.len());
        for &raw in cell {
            let p = Point::new(snap(raw.x), snap(raw.y));
            let (kx, ky) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(ids) = grid.get(&(kx + dx, ky + dy)) {
                        for &id in ids {
                            if (vertices[id] - p).norm() < MERGE_TOL {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                let id = vertices.len();
                vertices.push(p);
                grid.entry((kx, ky)).or_default().push(id);
                id
            });
            if cycle.last() != Some(&id) {
                cycle.push(id);
            }
        }
        while cycle.len() > 1 && cycle.first() == cycle.last() {
            cycle.pop();
        }
        if cycle.len() < 3 {
            return Err(crate::Error::InvalidElement {
                element: ci,
                reason: "Voronoi cell collapsed after vertex merging".into(),
            });
        }
        elements.push(cycle);
    }
    PolygonalMesh::from_parts(vertices, elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{element_geometry, validate};
    use approx::assert_relative_eq;

    fn total_area(mesh: &PolygonalMesh) -> f64 {
        (0..mesh.n_elements())
            .map(|e| element_geometry(mesh, e).unwrap().area)
            .sum()
    }

    #[test]
    fn square_2x2_counts() {
        let mesh = generate_structured(StructuredKind::Square, 2);
        assert_eq!(mesh.n_elements(), 4);
        assert_eq!(mesh.n_vertices(), 9);
        assert_relative_eq!(total_area(&mesh), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn triangle_1x1_quality() {
        let mesh = generate_structured(StructuredKind::Triangle, 1);
        assert_eq!(mesh.n_elements(), 2);
        let report = validate(&mesh);
        assert!(report.defects.is_empty());
        assert!(report.per_element.iter().all(|q| q.star_shaped));
    }

    #[test]
    fn nonconvex_4x4_star_shaped_but_not_convex() {
        let mesh = generate_structured(StructuredKind::Nonconvex, 4);
        assert_eq!(mesh.n_elements(), 32);
        assert_relative_eq!(total_area(&mesh), 1.0, epsilon = 1e-12);
        let mut any_nonconvex = false;
        for e in 0..mesh.n_elements() {
            let verts = mesh.element_vertices(e);
            // Convexity check: all turns counterclockwise.
            let n = verts.len();
            let convex = (0..n).all(|i| {
                let a = verts[i];
                let b = verts[(i + 1) % n];
                let c = verts[(i + 2) % n];
                (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) >= -1e-14
            });
            if !convex {
                any_nonconvex = true;
                // Half-plane kernel must still be nonempty.
                assert!(crate::geom::star_center(&verts).is_some());
            }
        }
        assert!(any_nonconvex);
        let report = validate(&mesh);
        assert!(report.defects.is_empty());
        assert!(report.per_element.iter().all(|q| q.star_shaped));
    }

    #[test]
    fn mixed_tiles_cover_and_conform() {
        for n in [2usize, 4, 5] {
            let mesh = generate_structured(StructuredKind::Mixed, n);
            assert_relative_eq!(total_area(&mesh), 1.0, epsilon = 1e-12);
            let report = validate(&mesh);
            assert!(report.defects.is_empty(), "n={n}: {:?}", report.defects);
        }
        let mesh = generate_structured(StructuredKind::Mixed, 4);
        let sides: Vec<usize> = mesh.elements.iter().map(|c| c.len()).collect();
        assert!(sides.contains(&3));
        assert!(sides.contains(&4));
        assert!(sides.contains(&5));
    }

    #[test]
    fn voronoi_single_seed_is_whole_square() {
        let mesh = generate_voronoi(1, 0, 42).unwrap();
        assert_eq!(mesh.n_elements(), 1);
        assert_relative_eq!(total_area(&mesh), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn voronoi_cells_cover_and_are_convex() {
        let mesh = generate_voronoi(64, 0, 7).unwrap();
        assert_eq!(mesh.n_elements(), 64);
        assert_relative_eq!(total_area(&mesh), 1.0, epsilon = 1e-10);
        for e in 0..mesh.n_elements() {
            let verts = mesh.element_vertices(e);
            let n = verts.len();
            for i in 0..n {
                let a = verts[i];
                let b = verts[(i + 1) % n];
                let c = verts[(i + 2) % n];
                let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
                assert!(cross >= -1e-12, "clipped Voronoi cell must be convex");
            }
        }
    }

    #[test]
    fn lloyd_improves_mean_inradius_ratio() {
        let rough = generate_voronoi(64, 0, 7).unwrap();
        let smooth = generate_voronoi(64, 20, 7).unwrap();
        let mean = |mesh: &PolygonalMesh| {
            let rep = validate(mesh);
            rep.per_element
                .iter()
                .map(|q| q.inradius_ratio)
                .sum::<f64>()
                / rep.per_element.len() as f64
        };
        assert!(mean(&smooth) >= mean(&rough));
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate_voronoi(40, 3, 123).unwrap();
        let b = generate_voronoi(40, 3, 123).unwrap();
        assert_eq!(a, b);
        let c = generate_structured(StructuredKind::Nonconvex, 5);
        let d = generate_structured(StructuredKind::Nonconvex, 5);
        assert_eq!(c, d);
    }

    #[test]
    fn edge_pairing_and_euler() {
        for mesh in [
            generate_structured(StructuredKind::Triangle, 3),
            generate_structured(StructuredKind::Mixed, 4),
            generate_voronoi(30, 2, 9).unwrap(),
        ] {
            let edges = mesh.edges();
            let n_sides: usize = mesh.elements.iter().map(|c| c.len()).sum();
            let interior = edges.iter().filter(|e| e.users.len() == 2).count();
            let boundary = edges.iter().filter(|e| e.users.len() == 1).count();
            assert_eq!(2 * interior + boundary, n_sides);
            // Euler relation for a planar subdivision of the square.
            let v = mesh.n_vertices() as i64;
            let e = edges.len() as i64;
            let f = mesh.n_elements() as i64;
            assert_eq!(v - e + f, 1);
        }
    }
}
