use pnp_vem::manufactured::ManufacturedCase;
use pnp_vem::mesh::{generate_structured, mesh_size, StructuredKind};
use pnp_vem::system::{PnpSystem, PnpState, SolverConfig};
use std::time::Instant;

fn main() {
    let mesh = generate_structured(StructuredKind::Square, 32);
    let h = mesh_size(&mesh);
    let config = SolverConfig::new(SolverConfig::tau_from_mesh_size(h, 1.0));
    let t0 = Instant::now();
    let sys = PnpSystem::build(&mesh, 1, config).unwrap();
    println!("build: {:.3}s", t0.elapsed().as_secs_f64());
    let case = ManufacturedCase::new();
    let table = case.table(sys.quad_points());
    let nq = sys.quad_points().len();
    let mut f = vec![0.0; nq];
    let mut b1 = vec![0.0; nq];
    let mut b2 = vec![0.0; nq];

    let t0 = Instant::now();
    for s in 0..200 { table.poisson_source(s as f64 * 0.001, &mut f); table.species_source(0, s as f64*0.001, &mut b1); table.species_source(1, s as f64*0.001, &mut b2); }
    println!("source eval x200 steps: {:.3}s", t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    for _ in 0..200 { let _ = sys.load_from_values(&f); let _ = sys.load_from_values(&b1); let _ = sys.load_from_values(&b2); }
    println!("load assembly x200 steps(x3): {:.3}s", t0.elapsed().as_secs_f64());

    // one real step to get a realistic state
    table.poisson_source(config.tau, &mut f);
    table.species_source(0, config.tau, &mut b1);
    table.species_source(1, config.tau, &mut b2);
    let init = PnpState { phi: vec![0.0; sys.map.n_global], p: [vec![0.0; sys.map.n_global], vec![0.0; sys.map.n_global]], t: 0.0 };
    let (state, _) = sys.gummel_step(&init, config.tau, config.tau, &f, [&b1, &b2]).unwrap();

    let t0 = Instant::now();
    for _ in 0..200 { let _ = sys.poisson_solve([&state.p[0], &state.p[1]], |p| (p.x*p.y).sin() ); }
    println!("poisson_solve(full incl eval) x200: {:.3}s", t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    for _ in 0..200 { let _ = sys.np_solve(0, &state.p[0], &state.phi, |_| 0.1, config.tau); }
    println!("np_solve(full incl drift) x200: {:.3}s", t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let mut st = state.clone();
    for s in 1..=50 {
        let t = config.tau * (s+1) as f64;
        table.poisson_source(t, &mut f);
        table.species_source(0, t, &mut b1);
        table.species_source(1, t, &mut b2);
        let (n, _) = sys.gummel_step(&st, t, config.tau, &f, [&b1, &b2]).unwrap();
        st = n;
    }
    println!("gummel_step x50: {:.3}s => per step {:.4}s", t0.elapsed().as_secs_f64(), t0.elapsed().as_secs_f64()/50.0);
}
