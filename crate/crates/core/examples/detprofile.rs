use aknsut::algebra::C64;
use aknsut::experiments::*;
use aknsut::rh::*;
use aknsut::scattering::compute_s_line;
use aknsut::akns::embed_redundant_line;

fn main() {
    let cfg = RoundTripConfig::standard(0.1, 240);
    let lp = sample_line_potential(&cfg.pulse, cfg.partner, cfg.l, cfg.n_space).unwrap();
    let rp = embed_redundant_line(&lp).unwrap();
    let (contour, grid) = Contour::line(RaySpec { k_max: cfg.k_max, puncture: cfg.puncture, n: cfg.n_ray });
    let s_line = compute_s_line(&rp, &grid).unwrap();
    let ing = line_only_ingredients(&grid, &s_line).unwrap();
    let kernel = CauchyKernel::build(&contour);
    for x in [0.0, 8.0] {
        let jump = build_j_line(&ing, &contour, x, 0.0).unwrap();
        let sol = solve_rh(&contour, &kernel, &jump, SolveMethod::Neumann { max_iters: 400 }).unwrap();
        let mut scored: Vec<(f64, f64)> = (0..contour.len())
            .map(|i| ((sol.m_plus[i].det() - C64::new(1.0, 0.0)).norm(), contour.nodes[i].re))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        print!("x={x}: ");
        for (d, k) in scored.iter().take(6) {
            print!("({k:+.4}: {d:.2e}) ");
        }
        println!();
    }
}
