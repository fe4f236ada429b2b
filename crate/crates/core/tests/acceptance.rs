//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line with the measured residuals (run with `--nocapture` to see them
//! for passing tests). Tolerances are pinned in code next to each check.
//!
//! The initial-boundary scenarios use a traveling chirped pulse that
//! crosses x = 0 and leaves the half-line before the data horizon: the
//! truncated t-integration is exact for such data, which is what makes
//! the global-relation and equivalence tolerances attainable.

use std::sync::OnceLock;
use std::time::Instant;

use aknsut::akns::{embed_halfline_ut, embed_redundant_line, extract_boundary_data, BoundaryTrace};
use aknsut::algebra::{CMat4, C64};
use aknsut::experiments::{
    boundary_from_oracle, global_relation_violation, run_equivalence, run_line_roundtrip,
    run_reduction_audit, sample_line_potential, EquivalenceConfig, PartnerField, PulseSpec,
    ReductionAuditConfig, RoundTripConfig,
};
use aknsut::oracle::{reduction_persistence, specialize, EvolutionConfig, Evolver, ReductionKind};
use aknsut::reductions::{classify_b, verify_candidate, BlockPattern, ReductionCandidate};
use aknsut::rh::{
    build_j_quadrants, reconstruct_potential, solve_rh, CauchyKernel, Contour, RaySpec,
    SolveMethod,
};
use aknsut::scattering::{compute_s, compute_s_line, compute_t, SpectralGrid};
use aknsut::symmetries::{
    check_global_relation, check_relation_ssline, check_relation_t, check_reduction_symmetry_s,
    check_reduction_symmetry_t, jump_ingredients, project_scalar_scattering,
};

fn report(criterion: &str, passed: bool, detail: &str, started: Instant) {
    println!(
        "acceptance {criterion}: {} ({detail}; {:.1}s)",
        if passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(passed, "{criterion}: {detail}");
}

fn zero_boundary(t_final: f64, steps: usize) -> aknsut::akns::BoundaryData {
    let zero = C64::new(0.0, 0.0);
    let traces: Vec<BoundaryTrace> = (0..=steps)
        .map(|j| BoundaryTrace {
            t: t_final * j as f64 / steps as f64,
            q0: zero,
            qx0: zero,
            r0: zero,
            rx0: zero,
        })
        .collect();
    extract_boundary_data(&traces).unwrap()
}

/// Criterion 1: zero data gives exact identities throughout the pipeline.
#[test]
fn criterion_01_zero_data_sanity() {
    let started = Instant::now();
    let lp = sample_line_potential(
        &PulseSpec { amplitude: 0.0, center: 0.0, velocity: 0.0 },
        PartnerField::Zero,
        20.0,
        256,
    )
    .unwrap();
    let hp = embed_halfline_ut(&lp).unwrap();
    let rp = embed_redundant_line(&lp).unwrap();
    let bd = zero_boundary(0.5, 64);

    let (contour, grid) = Contour::cross(
        RaySpec { k_max: 6.0, puncture: 1e-4, n: 60 },
        RaySpec { k_max: 6.0, puncture: 1e-4, n: 40 },
    );
    let s = compute_s(&hp, &grid).unwrap();
    let t = compute_t(&bd, &grid).unwrap();
    let s_line = compute_s_line(&rp, &grid).unwrap();

    let id = CMat4::identity();
    let mut worst: f64 = 0.0;
    for b in s.real.iter().chain(t.real.iter()).chain(s_line.real.iter()) {
        worst = worst.max((b.assemble() - id).max_abs());
    }
    for b in t.imag_pos.iter().chain(t.imag_neg.iter()) {
        worst = worst.max((b.assemble() - id).max_abs());
    }

    let ing = jump_ingredients(&s, &t, Some(&s_line), &grid).unwrap();
    let jump = build_j_quadrants(&ing, &contour, 0.7, 0.3).unwrap();
    let kernel = CauchyKernel::build(&contour);
    let sol = solve_rh(&contour, &kernel, &jump, SolveMethod::Auto).unwrap();
    let m_dev = sol
        .m_plus
        .iter()
        .chain(sol.m_minus.iter())
        .map(|m| (*m - id).max_abs())
        .fold(0.0f64, f64::max);
    let w = reconstruct_potential(&sol);

    let passed = worst <= 1e-12 && m_dev <= 1e-12 && w.max_abs() <= 1e-12;
    report(
        "C1 zero-data sanity",
        passed,
        &format!("scattering dev {worst:.2e}, M dev {m_dev:.2e}, W {:.2e}", w.max_abs()),
        started,
    );
}

/// Criterion 2: unimodularity of S, T and S_line at amplitude 0.3.
#[test]
fn criterion_02_determinants() {
    let started = Instant::now();
    let pulse = PulseSpec { amplitude: 0.3, center: 0.0, velocity: 0.0 };
    let lp = sample_line_potential(&pulse, PartnerField::Local { eps: -1 }, 20.0, 16384).unwrap();
    let hp = embed_halfline_ut(&lp).unwrap();
    let rp = embed_redundant_line(&lp).unwrap();
    let grid = SpectralGrid::symmetric(8.0, 1e-3, 120, 30);

    let s = compute_s(&hp, &grid).unwrap();
    let s_line = compute_s_line(&rp, &grid).unwrap();

    // Boundary data from the oracle; determinants are structural, but the
    // t-integration must still resolve the fastest phase on the grid.
    let (bd, _) = boundary_from_oracle(
        &pulse,
        PartnerField::Local { eps: -1 },
        25.0,
        1024,
        1e-4,
        0.5,
    )
    .unwrap();
    let t = compute_t(&bd, &grid).unwrap();

    let worst = s
        .audit
        .max_det_residual
        .max(t.audit.max_det_residual)
        .max(s_line.audit.max_det_residual);
    let off_diag = s
        .audit
        .max_off_diagonal
        .max(t.audit.max_off_diagonal)
        .max(s_line.audit.max_off_diagonal);
    report(
        "C2 determinants",
        worst <= 1e-8 && off_diag <= 1e-10,
        &format!(
            "det residuals: S {:.2e}, T {:.2e}, S_line {:.2e}; off-diagonal {:.2e}",
            s.audit.max_det_residual, t.audit.max_det_residual, s_line.audit.max_det_residual,
            off_diag
        ),
        started,
    );
}

// Shared setup for criteria 3 and 4: the A = 0.2, T = 1 crossing pulse.
struct GrSetup {
    gr_d1: f64,
    gr_d4: f64,
    relation_ssline: f64,
    relation_t: f64,
    perturbed_gr: f64,
}

fn gr_setup() -> &'static GrSetup {
    static SETUP: OnceLock<GrSetup> = OnceLock::new();
    SETUP.get_or_init(|| {
        let cfg = EquivalenceConfig {
            l: 40.0,
            n_space: 32768,
            pulse: PulseSpec { amplitude: 0.2, center: 9.0, velocity: -12.5 },
            partner: PartnerField::Local { eps: -1 },
            n_fft: 2048,
            dt: 2.5e-4,
            t_data: 1.0,
            k_max: 8.0,
            puncture: 1e-3,
            n_ray_real: 150,
            n_ray_imag: 60,
            ts: vec![],
            xs: vec![],
            probes: vec![],
            direct_solver: false,
            direct_crosscheck: false,
        };

        let (bd, _) = boundary_from_oracle(
            &cfg.pulse, cfg.partner, cfg.l, cfg.n_fft, cfg.dt, cfg.t_data,
        )
        .unwrap();
        let lp = sample_line_potential(&cfg.pulse, cfg.partner, cfg.l, cfg.n_space).unwrap();
        let hp = embed_halfline_ut(&lp).unwrap();
        let rp = embed_redundant_line(&lp).unwrap();
        let grid = SpectralGrid::symmetric(cfg.k_max, cfg.puncture, cfg.n_ray_real, cfg.n_ray_imag);

        let s = compute_s(&hp, &grid).unwrap();
        let t = compute_t(&bd, &grid).unwrap();
        let s_line = compute_s_line(&rp, &grid).unwrap();

        let gr = check_global_relation(&s, &t, &grid);
        let rt = check_relation_t(&t, &grid);
        let rs = check_relation_ssline(&s, &s_line, &grid);
        let perturbed = global_relation_violation(&cfg, 2.0).unwrap();

        GrSetup {
            gr_d1: gr.get("global_relation_d1").unwrap(),
            gr_d4: gr.get("global_relation_d4").unwrap(),
            relation_ssline: rs.get("relation_s_sline").unwrap(),
            relation_t: rt.get("relation_t").unwrap(),
            perturbed_gr: perturbed
                .get("global_relation_d1")
                .unwrap()
                .max(perturbed.get("global_relation_d4").unwrap()),
        }
    })
}

/// Criterion 3: the global relation holds for compatible data and detects
/// incompatible boundary data.
#[test]
fn criterion_03_global_relation() {
    let started = Instant::now();
    let s = gr_setup();
    let passed = s.gr_d1 < 5e-6 && s.gr_d4 < 5e-6 && s.perturbed_gr > 1e-2;
    report(
        "C3 global relation",
        passed,
        &format!(
            "D1 {:.2e}, D4 {:.2e} (tol 5e-6); 2x G0 raises to {:.2e} (> 1e-2)",
            s.gr_d1, s.gr_d4, s.perturbed_gr
        ),
        started,
    );
}

/// Criterion 4: embedding symmetry relations for linearizable data.
#[test]
fn criterion_04_embedding_relations() {
    let started = Instant::now();
    let s = gr_setup();
    let passed = s.relation_ssline < 5e-6 && s.relation_t < 5e-6;
    report(
        "C4 embedding relations",
        passed,
        &format!(
            "S/S_line {:.2e}, T mirror {:.2e} (tol 5e-6)",
            s.relation_ssline, s.relation_t
        ),
        started,
    );
}

/// Criterion 5: the deformed half-line solution equals the conjugated line
/// solution, node-wise and at the reconstruction level, at 1000 nodes.
#[test]
fn criterion_05_equivalence() {
    let started = Instant::now();
    let mut xs: Vec<f64> = Vec::new();
    let mut x = 0.0;
    while x <= 32.0 + 1e-9 {
        xs.push(x);
        x += if x < 6.0 { 0.5 } else { 2.0 };
    }
    let cfg = EquivalenceConfig {
        l: 32.0,
        n_space: 16384,
        pulse: PulseSpec { amplitude: 0.1, center: 9.0, velocity: -13.5 },
        partner: PartnerField::Local { eps: -1 },
        n_fft: 1024,
        dt: 2.5e-4,
        t_data: 0.8,
        k_max: 11.0,
        puncture: 1e-5,
        n_ray_real: 380,
        n_ray_imag: 120,
        ts: vec![0.0, 0.5],
        xs,
        probes: vec![(0.0, 0.0), (1.0, 0.0), (0.5, 0.5), (2.0, 0.5)],
        direct_solver: false,
        direct_crosscheck: false,
    };
    let rep = run_equivalence(&cfg).unwrap();
    assert_eq!(rep.nodes, 1000, "criterion pins 1000 contour nodes");
    let passed = rep.m_node_residual < 1e-5 && rep.q_comparison < 1e-4 && rep.r_comparison < 1e-4;
    report(
        "C5 equivalence",
        passed,
        &format!(
            "M-node {:.2e} (tol 1e-5), Q {:.2e}, R {:.2e} (tol 1e-4, x in [0,32], t in {{0, 0.5}})",
            rep.m_node_residual, rep.q_comparison, rep.r_comparison
        ),
        started,
    );
}

/// Criterion 6: inverse-scattering round trip at t = 0 with second-order
/// convergence under node doubling.
#[test]
fn criterion_06_ism_roundtrip() {
    let started = Instant::now();
    let sup_at = |n_ray: usize, xs_max: f64| {
        let mut cfg = RoundTripConfig::standard(0.1, n_ray);
        cfg.xs = aknsut::experiments::default_x_grid(xs_max);
        run_line_roundtrip(&cfg).unwrap().sup_error
    };
    let production = sup_at(240, 12.0);
    let coarse = sup_at(60, 5.0);
    let fine = sup_at(120, 5.0);
    let order_gain = coarse / fine;
    let passed = production < 1e-4 && order_gain >= 4.0;
    report(
        "C6 ISM round trip",
        passed,
        &format!(
            "sup error {production:.2e} (tol 1e-4); doubling gain {order_gain:.1}x (>= 4)"
        ),
        started,
    );
}

/// Criterion 7: exactly two reduction families, fully constrained.
#[test]
fn criterion_07_reduction_classification() {
    let started = Instant::now();
    let families = classify_b();
    let two = families.len() == 2
        && families[0].pattern == BlockPattern::Diagonal
        && families[1].pattern == BlockPattern::Antidiagonal;

    // Every sampled candidate in both families verifies the constraints.
    let mut worst: f64 = 0.0;
    for theta in [0.0, 0.6, 2.4] {
        for mu in [1.0, -1.0] {
            for (p, m) in [(1.0, 1.0), (0.4, -1.7), (2.0, 0.3)] {
                for cand in [
                    ReductionCandidate::diagonal(-1.0, theta, mu, p, m),
                    ReductionCandidate::antidiagonal(-1.0, theta, mu, p, m),
                    ReductionCandidate::diagonal(1.0, theta, mu, p, m),
                ] {
                    worst = worst.max(
                        cand.constraint_residuals().into_iter().fold(0.0f64, f64::max),
                    );
                }
            }
        }
    }

    // No third family: for each sign the commutation constraint leaves
    // exactly the stated two-entry pattern, and a block outside it fails.
    let dense = aknsut::algebra::CMat2([
        C64::new(0.8, 0.2),
        C64::new(0.5, -0.1),
        C64::new(-0.4, 0.6),
        C64::new(1.1, 0.3),
    ]);
    let rejected = verify_candidate(dense, dense, -1.0).is_err();
    let entries_ok = families[0].free_entries == vec![(0, 0), (1, 1)]
        && families[1].free_entries == vec![(0, 1), (1, 0)];

    let passed = two && worst <= 1e-12 && rejected && entries_ok;
    report(
        "C7 reduction classification",
        passed,
        &format!(
            "families {}, worst constraint residual {worst:.2e}, dense block rejected {rejected}",
            families.len()
        ),
        started,
    );
}

/// Criterion 8: the scalar scattering dichotomy: NLS structure for the
/// local reduction, nonlocal structure plus the extra symmetry for the
/// mirror reduction.
#[test]
fn criterion_08_scattering_dichotomy() {
    let started = Instant::now();
    let base = ReductionAuditConfig {
        l: 20.0,
        n_space: 16384,
        pulse: PulseSpec { amplitude: 0.2, center: 0.4, velocity: 0.6 },
        nonlocal: false,
        eps: -1,
        k_max: 6.0,
        puncture: 1e-3,
        n_grid: 96,
        n_imag: 24,
    };

    let local = run_reduction_audit(&base).unwrap();
    let nls = local.symmetry.get("scalar_structure_nls").unwrap();

    let mut nl_cfg = base;
    nl_cfg.nonlocal = true;
    nl_cfg.eps = 1; // r(x) = +conj(q(-x))
    let nonlocal = run_reduction_audit(&nl_cfg).unwrap();
    let nnls = nonlocal.symmetry.get("scalar_structure_nonlocal").unwrap();
    let add_sym = nonlocal.symmetry.get("scalar_add_sym").unwrap();

    let passed = nls < 5e-7 && nnls < 5e-7 && add_sym < 5e-7;
    report(
        "C8 scattering dichotomy",
        passed,
        &format!("NLS {nls:.2e}; nonlocal {nnls:.2e}, extra symmetry {add_sym:.2e} (tol 5e-7)"),
        started,
    );
}

/// Criterion 9: the lemma symmetry S^{-1}(k) = B S^+(k*) B^{-1} (and the
/// same for T) for both families at eps_B = -1.
#[test]
fn criterion_09_lemma_symmetry() {
    let started = Instant::now();
    let grid = SpectralGrid::symmetric(6.0, 1e-3, 96, 24);
    let pulse = PulseSpec { amplitude: 0.2, center: 0.0, velocity: 0.4 };
    let mut worst_s: f64 = 0.0;
    let mut worst_t: f64 = 0.0;

    for (partner, cand) in [
        (
            PartnerField::Local { eps: -1 },
            ReductionCandidate::diagonal(-1.0, 0.0, 1.0, 1.0, 1.0),
        ),
        (
            PartnerField::Nonlocal { eps: -1 },
            ReductionCandidate::antidiagonal(-1.0, 0.0, 1.0, 1.0, 1.0),
        ),
    ] {
        let lp = sample_line_potential(&pulse, partner, 25.0, 16384).unwrap();
        let hp = embed_halfline_ut(&lp).unwrap();
        let s = compute_s(&hp, &grid).unwrap();
        let rep = check_reduction_symmetry_s(&s, &grid, &cand).unwrap();
        worst_s = worst_s
            .max(rep.get("lemma_s_real").unwrap())
            .max(rep.get("lemma_s_imag").unwrap());

        let (bd, _) = boundary_from_oracle(&pulse, partner, 25.0, 1024, 2.5e-4, 1.0).unwrap();
        let t = compute_t(&bd, &grid).unwrap();
        let rep = check_reduction_symmetry_t(&t, &grid, &cand).unwrap();
        worst_t = worst_t.max(rep.get("lemma_t").unwrap());
    }

    let passed = worst_s < 5e-7 && worst_t < 5e-7;
    report(
        "C9 lemma symmetry",
        passed,
        &format!("S residual {worst_s:.2e}, T residual {worst_t:.2e} (tol 5e-7)"),
        started,
    );
}

/// Criterion 10: oracle integrity: conservation and dynamical persistence
/// of both reductions.
#[test]
fn criterion_10_oracle_integrity() {
    let started = Instant::now();
    let l = 25.0;
    let n = 1024;
    let dx = 2.0 * l / n as f64;
    let pulse = PulseSpec { amplitude: 0.3, center: 0.0, velocity: 0.5 };
    let qf = pulse.q();
    let q0: Vec<C64> = (0..n).map(|j| qf(-l + j as f64 * dx)).collect();

    let mut drift: f64 = 0.0;
    let mut persistence: f64 = 0.0;
    for kind in [ReductionKind::Local, ReductionKind::Nonlocal] {
        let r0 = specialize(kind, -1.0, &q0);
        let mut cfg = EvolutionConfig::new(l, n, 5e-4, 1.0);
        cfg.snapshot_every = 250;
        let ev = Evolver::new(cfg).unwrap();
        let traj = ev.evolve(&q0, &r0).unwrap();
        drift = drift.max(traj.qr_integral_drift);
        persistence = persistence.max(reduction_persistence(&traj, kind, -1.0));
    }

    let passed = drift < 1e-8 && persistence < 1e-6;
    report(
        "C10 oracle integrity",
        passed,
        &format!("qr drift {drift:.2e} (tol 1e-8); reduction persistence {persistence:.2e} (tol 1e-6)"),
        started,
    );
}
