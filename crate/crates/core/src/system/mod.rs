//! Global discretization: dof numbering with homogeneous Dirichlet
//! elimination, sparse assembly of the local forms, linear solvers, and the
//! backward Euler / Gummel time loop.

mod pnp;
mod sparse;
mod solver;

pub use pnp::{write_step_log, GummelRecord, PnpState, PnpSystem, SolverConfig, StepRecord};
pub use sparse::{dot, norm, norm_inf, CsrMatrix};
pub use solver::{
    bicgstab, conjugate_gradient, dense_solve, solve_linear, EnvelopeLdl, SolveStats,
    DENSE_FALLBACK_LIMIT,
};

use crate::mesh::PolygonalMesh;
use crate::quadrature::monomial_count;
use crate::vem::build_dof_layout;
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// Global dof numbering: vertex dofs first, then one block per mesh edge,
/// then per-element internal moments. The Dirichlet mask covers every vertex
/// and edge dof on the domain boundary; internal moments are never masked.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub n_global: usize,
    /// Element -> global dof ids, in the local dof-layout order.
    pub element_dofs: Vec<Vec<usize>>,
    pub dirichlet: Vec<bool>,
    /// Global -> free index (usize::MAX for Dirichlet dofs).
    pub free_index: Vec<usize>,
    /// Free index -> global.
    pub free_dofs: Vec<usize>,
}

impl DofMap {
    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Restriction of a full dof vector to the free dofs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&g| full[g]).collect()
    }

    /// Zero-extension of a free vector to all dofs.
    pub fn prolong(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_global];
        for (f, &g) in self.free_dofs.iter().enumerate() {
            full[g] = free[f];
        }
        full
    }
}

/// Shares vertex and edge dofs across elements by mesh incidence and marks
/// the boundary dofs as Dirichlet.
pub fn build_dof_map(mesh: &PolygonalMesh, k: usize) -> Result<DofMap> {
    build_dof_layout(3, k)?; // validates k
    let n_v = mesh.n_vertices();
    let per_edge = k - 1;
    let n_int = if k >= 2 { monomial_count(k - 2) } else { 0 };
    let edges = mesh.edges();
    let edge_offset = n_v;
    let int_offset = n_v + edges.len() * per_edge;
    let n_global = int_offset + mesh.n_elements() * n_int;

    // Edge id lookup by canonical endpoints.
    let mut edge_id = std::collections::HashMap::new();
    for (id, e) in edges.iter().enumerate() {
        edge_id.insert(e.v, id);
    }

    let mut dirichlet = vec![false; n_global];
    for (v, &flag) in mesh.boundary_vertex.iter().enumerate() {
        dirichlet[v] = flag;
    }
    for (id, e) in edges.iter().enumerate() {
        if e.users.len() == 1 {
            for j in 0..per_edge {
                dirichlet[edge_offset + id * per_edge + j] = true;
            }
        }
    }

    let mut element_dofs = Vec::with_capacity(mesh.n_elements());
    for (e, cycle) in mesh.elements.iter().enumerate() {
        let n = cycle.len();
        let mut dofs = Vec::with_capacity(n * k + n_int);
        dofs.extend(cycle.iter().copied());
        for le in 0..n {
            let a = cycle[le];
            let b = cycle[(le + 1) % n];
            let id = edge_id[&(a.min(b), a.max(b))];
            for j in 0..per_edge {
                // Orders 1 and 2 only carry the edge mean, which reads the
                // same from both sides; higher odd moments would need an
                // orientation sign here.
                dofs.push(edge_offset + id * per_edge + j);
            }
        }
        for m in 0..n_int {
            dofs.push(int_offset + e * n_int + m);
        }
        element_dofs.push(dofs);
    }

    let mut free_index = vec![usize::MAX; n_global];
    let mut free_dofs = Vec::new();
    for g in 0..n_global {
        if !dirichlet[g] {
            free_index[g] = free_dofs.len();
            free_dofs.push(g);
        }
    }

    Ok(DofMap {
        k,
        n_global,
        element_dofs,
        dirichlet,
        free_index,
        free_dofs,
    })
}

/// Scatter-add of per-element matrices into a free-dof CSR matrix. Rows and
/// columns attached to Dirichlet dofs are dropped (homogeneous data, so the
/// elimination needs no right-hand-side lift).
pub fn assemble_matrix(
    map: &DofMap,
    mut local: impl FnMut(usize) -> DMatrix<f64>,
) -> CsrMatrix {
    let n_free = map.n_free();
    let mut triplets = Vec::new();
    for (e, dofs) in map.element_dofs.iter().enumerate() {
        let m = local(e);
        debug_assert_eq!(m.nrows(), dofs.len());
        for (lr, &gr) in dofs.iter().enumerate() {
            let fr = map.free_index[gr];
            if fr == usize::MAX {
                continue;
            }
            for (lc, &gc) in dofs.iter().enumerate() {
                let fc = map.free_index[gc];
                if fc == usize::MAX {
                    continue;
                }
                triplets.push((fr, fc, m[(lr, lc)]));
            }
        }
    }
    CsrMatrix::from_triplets(n_free, n_free, triplets)
}

/// Scatter-add of per-element vectors into a free-dof vector.
pub fn assemble_vector(map: &DofMap, mut local: impl FnMut(usize) -> DVector<f64>) -> Vec<f64> {
    let mut out = vec![0.0; map.n_free()];
    for (e, dofs) in map.element_dofs.iter().enumerate() {
        let v = local(e);
        debug_assert_eq!(v.len(), dofs.len());
        for (lr, &gr) in dofs.iter().enumerate() {
            let fr = map.free_index[gr];
            if fr != usize::MAX {
                out[fr] += v[lr];
            }
        }
    }
    out
}
