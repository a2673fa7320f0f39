use pnp_vem::manufactured::ManufacturedCase;
use pnp_vem::mesh::{generate_structured, mesh_size, StructuredKind};
use pnp_vem::system::{PnpSystem, SolverConfig};
use pnp_vem::quadrature::{polygon_quadrature, data_volume_order};
use nalgebra::DVector;

fn errors(sys: &PnpSystem, state: &pnp_vem::system::PnpState, case: &ManufacturedCase) -> [(f64, f64); 3] {
    let t = state.t;
    let mut out = [(0.0f64, 0.0f64); 3];
    for (e, space) in sys.spaces.iter().enumerate() {
        let rule = polygon_quadrature(&space.verts, data_volume_order(sys.k)).unwrap();
        for (f, vecd) in [&state.phi, &state.p[0], &state.p[1]].iter().enumerate() {
            let local = DVector::from_iterator(sys.map.element_dofs[e].len(),
                sys.map.element_dofs[e].iter().map(|&g| vecd[g]));
            let coeffs = &space.elliptic_proj * &local;
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                let exact = match f { 0 => case.phi(t, p.x, p.y), 1 => case.p(0, t, p.x, p.y), _ => case.p(1, t, p.x, p.y) };
                let gexact = match f { 0 => case.grad_phi(t, p.x, p.y), 1 => case.grad_p(0, t, p.x, p.y), _ => case.grad_p(1, t, p.x, p.y) };
                let v = space.eval_poly(&coeffs, p);
                let g = space.eval_poly_grad(&coeffs, p);
                out[f].0 += w * (exact - v) * (exact - v);
                out[f].1 += w * (gexact - g).norm_squared();
            }
        }
    }
    out.map(|(a, b)| (a.sqrt(), b.sqrt()))
}

fn main() {
    let case = ManufacturedCase::new();
    let mut prev: Option<(f64, [(f64,f64);3])> = None;
    for n in [8usize, 16, 32] {
        let start = std::time::Instant::now();
        let mesh = generate_structured(StructuredKind::Square, n);
        let h = mesh_size(&mesh);
        let mut config = SolverConfig::new(SolverConfig::tau_from_mesh_size(h, 1.0));
        config.t_final = 1.0;
        let sys = PnpSystem::build(&mesh, 1, config).unwrap();
        let (state, records) = sys.run(&case).unwrap();
        let max_it = records.iter().map(|r| r.gummel_iters).max().unwrap();
        let max_res = records.iter().map(|r| r.poisson_residual.max(r.np_residual[0]).max(r.np_residual[1])).fold(0.0f64, f64::max);
        let e = errors(&sys, &state, &case);
        print!("n={n:3} h={h:.4} steps={} max_gummel={max_it} max_res={max_res:.2e} ", records.len());
        print!("| eL2: {:.3e} {:.3e} {:.3e} | eH1: {:.3e} {:.3e} {:.3e}", e[0].0, e[1].0, e[2].0, e[0].1, e[1].1, e[2].1);
        if let Some((hp, ep)) = prev {
            let r = h / hp;
            print!(" | ordL2: {:.2} {:.2} {:.2} ordH1: {:.2} {:.2} {:.2}",
                (e[0].0/ep[0].0).ln()/r.ln(), (e[1].0/ep[1].0).ln()/r.ln(), (e[2].0/ep[2].0).ln()/r.ln(),
                (e[0].1/ep[0].1).ln()/r.ln(), (e[1].1/ep[1].1).ln()/r.ln(), (e[2].1/ep[2].1).ln()/r.ln());
        }
        println!("  [{:.1}s]", start.elapsed().as_secs_f64());
        prev = Some((h, e));
    }
}
