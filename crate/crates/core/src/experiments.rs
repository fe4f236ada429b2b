//! End-to-end experiment pipelines: the full-line inverse-scattering
//! round trip, the half-line/line equivalence run, and the reduction
//! audits. The CLI and the acceptance suite both drive these.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::akns::{
    embed_halfline_ut, embed_redundant_line, extract_boundary_data, sech_pulse, BoundaryData,
    HalfLinePotential, LinePotential, RedundantLinePotential,
};
use crate::algebra::{CMat2, C64};
use crate::error::Result;
use crate::oracle::{specialize, EvolutionConfig, Evolver, ReductionKind};
use crate::rh::{
    build_j_line, build_j_quadrants, check_equivalence, deform_reduced, reconstruct_qr,
    solve_rh, CauchyKernel, Contour, RaySpec, SolveMethod,
};
use crate::scattering::{compute_s, compute_s_line, compute_t, SpectralGrid};
use crate::symmetries::{
    check_deformed_jump_identity, check_global_relation, check_relation_ssline, check_relation_t,
    jump_ingredients, project_scalar_scattering, JumpIngredients, SymmetryReport,
};

/// Initial data: A sech(x - x0) e^{i v (x - x0)} with the partner field
/// given by one of the two reductions (or zero).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PulseSpec {
    pub amplitude: f64,
    pub center: f64,
    pub velocity: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum PartnerField {
    /// r(x) = eps conj(q(x))
    Local { eps: i8 },
    /// r(x) = eps conj(q(-x))
    Nonlocal { eps: i8 },
    Zero,
}

impl PulseSpec {
    pub fn q(&self) -> impl Fn(f64) -> C64 {
        sech_pulse(self.amplitude, self.center, self.velocity)
    }
}

pub fn sample_line_potential(
    pulse: &PulseSpec,
    partner: PartnerField,
    l: f64,
    n: usize,
) -> Result<LinePotential> {
    let q = pulse.q();
    let qr = pulse.q();
    match partner {
        PartnerField::Local { eps } => {
            LinePotential::sample(l, n, q, move |x| qr(x).conj() * eps as f64)
        }
        PartnerField::Nonlocal { eps } => {
            LinePotential::sample(l, n, q, move |x| qr(-x).conj() * eps as f64)
        }
        PartnerField::Zero => LinePotential::sample(l, n, q, |_| C64::new(0.0, 0.0)),
    }
}

// ---------------------------------------------------------------------------
// Full-line ISM round trip
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundTripConfig {
    pub l: f64,
    /// Potential sample count (power of two).
    pub n_space: usize,
    pub pulse: PulseSpec,
    pub partner: PartnerField,
    pub k_max: f64,
    pub puncture: f64,
    /// Real-axis nodes per ray.
    pub n_ray: usize,
    /// Reconstruction points, x >= 0 (the redundant form recovers x < 0).
    pub xs: Vec<f64>,
    pub direct_solver: bool,
}

impl RoundTripConfig {
    pub fn standard(amplitude: f64, n_ray: usize) -> Self {
        RoundTripConfig {
            l: 20.0,
            n_space: 8192,
            pulse: PulseSpec { amplitude, center: 0.0, velocity: 0.0 },
            partner: PartnerField::Local { eps: -1 },
            k_max: 9.0,
            puncture: 1e-5,
            n_ray,
            xs: default_x_grid(12.0),
            direct_solver: false,
        }
    }
}

pub fn default_x_grid(x_max: f64) -> Vec<f64> {
    let mut xs = Vec::new();
    let mut x = 0.0;
    while x <= x_max + 1e-12 {
        xs.push(x);
        x += if x < 4.0 { 0.25 } else { 1.0 };
    }
    xs
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport {
    pub sup_error: f64,
    pub max_rh_residual: f64,
    pub max_det_residual: f64,
    /// Determinant residual excluding the puncture-facing cells.
    pub max_det_residual_interior: f64,
    pub scattering_det_residual: f64,
    pub nodes: usize,
}

/// Scatter -> line RH at t = 0 -> reconstruct, compared against the input.
pub fn run_line_roundtrip(cfg: &RoundTripConfig) -> Result<RoundTripReport> {
    let lp = sample_line_potential(&cfg.pulse, cfg.partner, cfg.l, cfg.n_space)?;
    let rp = embed_redundant_line(&lp)?;

    let (contour, grid) = Contour::line(RaySpec {
        k_max: cfg.k_max,
        puncture: cfg.puncture,
        n: cfg.n_ray,
    });
    let s_line = compute_s_line(&rp, &grid)?;

    // Only the line reflection coefficients are needed here.
    let ing = line_only_ingredients(&grid, &s_line)?;
    let kernel = CauchyKernel::build(&contour);

    let method = if cfg.direct_solver {
        SolveMethod::Direct
    } else {
        SolveMethod::Neumann { max_iters: 400 }
    };

    let q_exact = cfg.pulse.q();
    let r_exact = move |x: f64| -> C64 {
        let qr = cfg.pulse.q();
        match cfg.partner {
            PartnerField::Local { eps } => qr(x).conj() * eps as f64,
            PartnerField::Nonlocal { eps } => qr(-x).conj() * eps as f64,
            PartnerField::Zero => C64::new(0.0, 0.0),
        }
    };
    let exclude = 8.0 * (cfg.k_max - cfg.puncture) / cfg.n_ray as f64;
    let results: Vec<Result<(f64, f64, f64, f64)>> = cfg
        .xs
        .par_iter()
        .map(|&x| {
            let jump = build_j_line(&ing, &contour, x, 0.0)?;
            let sol = solve_rh(&contour, &kernel, &jump, method)?;
            let (q_rec, r_rec) = reconstruct_qr(&sol);
            let expected_q = CMat2::diag(q_exact(x), -q_exact(-x));
            let expected_r = CMat2::diag(r_exact(x), -r_exact(-x));
            let err = (q_rec - expected_q).max_abs().max((r_rec - expected_r).max_abs());
            Ok((
                err,
                sol.residual,
                sol.det_residual(),
                sol.det_residual_interior(&contour, exclude),
            ))
        })
        .collect();

    let mut report = RoundTripReport {
        sup_error: 0.0,
        max_rh_residual: 0.0,
        max_det_residual: 0.0,
        max_det_residual_interior: 0.0,
        scattering_det_residual: s_line.audit.max_det_residual,
        nodes: contour.len(),
    };
    for r in results {
        let (err, res, det, det_int) = r?;
        report.sup_error = report.sup_error.max(err);
        report.max_rh_residual = report.max_rh_residual.max(res);
        report.max_det_residual = report.max_det_residual.max(det);
        report.max_det_residual_interior = report.max_det_residual_interior.max(det_int);
    }
    Ok(report)
}

/// Ingredient table holding only the line reflections (the half-line parts
/// stay empty); sufficient for line jumps.
pub fn line_only_ingredients(
    grid: &SpectralGrid,
    s_line: &crate::scattering::ScatteringLine,
) -> Result<JumpIngredients> {
    let n = grid.real.len();
    let mut rho = Vec::with_capacity(n);
    let mut rho_t = Vec::with_capacity(n);
    for lb in &s_line.real {
        rho.push(lb.tr * lb.tl.inverse()?);
        rho_t.push(lb.bl * lb.br.inverse()?);
    }
    Ok(JumpIngredients {
        real_k: grid.real.clone(),
        gamma: Vec::new(),
        gamma_tilde: Vec::new(),
        gamma_cap: Vec::new(),
        gamma_cap_tilde: Vec::new(),
        d: Vec::new(),
        d_tilde: Vec::new(),
        gamma_cap_cont: Vec::new(),
        gamma_cap_tilde_cont: Vec::new(),
        rho_line: rho,
        rho_tilde_line: rho_t,
        imag_s: Vec::new(),
        gamma_cap_upper: Vec::new(),
        gamma_cap_tilde_lower: Vec::new(),
        min_abs_det_d: f64::INFINITY,
    })
}

// ---------------------------------------------------------------------------
// Equivalence pipeline (half-line UT vs full-line ISM)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    pub l: f64,
    pub n_space: usize,
    pub pulse: PulseSpec,
    pub partner: PartnerField,
    /// Oracle grid and step.
    pub n_fft: usize,
    pub dt: f64,
    /// Boundary-data horizon; must exceed every reconstruction time.
    pub t_data: f64,
    pub k_max: f64,
    pub puncture: f64,
    pub n_ray_real: usize,
    pub n_ray_imag: usize,
    /// Reconstruction/comparison times.
    pub ts: Vec<f64>,
    /// x grid for the potential comparison.
    pub xs: Vec<f64>,
    /// (x, t) probes for the node-wise deformed-solution comparison.
    pub probes: Vec<(f64, f64)>,
    pub direct_solver: bool,
    /// Also run a direct-solver spot check at the first probe.
    pub direct_crosscheck: bool,
}

/// Reconstructed diagonal components at one sweep point.
#[derive(Clone, Copy, Debug)]
pub struct FieldRow {
    pub x: f64,
    pub t: f64,
    pub q_line: [C64; 2],
    pub r_line: [C64; 2],
    pub q_red: [C64; 2],
    pub r_red: [C64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub symmetry: SymmetryReport,
    pub boundary_tail: f64,
    pub qr_integral_drift: f64,
    /// sup-node || M~red - I3 M_line I3 || over the probes.
    pub m_node_residual: f64,
    /// sup continuity defect of the deformed solution across iR.
    pub imag_axis_mismatch: f64,
    /// sup_x || Q_line - sigma_3 Q_red || over the comparison grid.
    pub q_comparison: f64,
    pub r_comparison: f64,
    pub max_rh_residual: f64,
    pub direct_vs_neumann: Option<f64>,
    pub nodes: usize,
    /// Per-point reconstructions for CSV export (not serialized to JSON).
    #[serde(skip)]
    pub field_rows: Vec<FieldRow>,
}

pub fn run_equivalence(cfg: &EquivalenceConfig) -> Result<EquivalenceReport> {
    // Stage 1: oracle evolution of the full-line problem.
    let eps = match cfg.partner {
        PartnerField::Local { eps } => eps as f64,
        PartnerField::Nonlocal { eps } => eps as f64,
        PartnerField::Zero => 0.0,
    };
    let kind = match cfg.partner {
        PartnerField::Nonlocal { .. } => ReductionKind::Nonlocal,
        _ => ReductionKind::Local,
    };
    let evo_cfg = EvolutionConfig::new(cfg.l, cfg.n_fft, cfg.dt, cfg.t_data);
    let evolver = Evolver::new(evo_cfg)?;
    let dx = 2.0 * cfg.l / cfg.n_fft as f64;
    let qf = cfg.pulse.q();
    let q0: Vec<C64> = (0..cfg.n_fft).map(|j| qf(-cfg.l + j as f64 * dx)).collect();
    let r0 = if cfg.partner == PartnerField::Zero {
        vec![C64::new(0.0, 0.0); cfg.n_fft]
    } else {
        specialize(kind, eps, &q0)
    };
    let traj = evolver.evolve(&q0, &r0)?;
    let bd = extract_boundary_data(&traj.traces)?;

    // Stage 2: embeddings of the initial data.
    let lp = sample_line_potential(&cfg.pulse, cfg.partner, cfg.l, cfg.n_space)?;
    let hp = embed_halfline_ut(&lp)?;
    let rp = embed_redundant_line(&lp)?;

    // Stage 3: contours and scattering on the shared node set.
    let real_spec = RaySpec { k_max: cfg.k_max, puncture: cfg.puncture, n: cfg.n_ray_real };
    let imag_spec = RaySpec { k_max: cfg.k_max, puncture: cfg.puncture, n: cfg.n_ray_imag };
    let (cross, grid) = Contour::cross(real_spec, imag_spec);
    let (line, line_grid) = Contour::line(real_spec);
    debug_assert!(line_grid
        .real
        .iter()
        .zip(grid.real.iter())
        .all(|(a, b)| (a - b).abs() < 1e-14));

    let s = compute_s(&hp, &grid)?;
    let t = compute_t(&bd, &grid)?;
    let s_line = compute_s_line(&rp, &grid)?;
    let ing = jump_ingredients(&s, &t, Some(&s_line), &grid)?;

    // Stage 4: symmetry and consistency audits.
    let mut symmetry = SymmetryReport::default();
    symmetry.merge(check_global_relation(&s, &t, &grid));
    symmetry.merge(check_relation_t(&t, &grid));
    symmetry.merge(check_relation_ssline(&s, &s_line, &grid));
    symmetry.merge(check_deformed_jump_identity(&ing));

    // Stage 5: Riemann-Hilbert solves.
    let cross_kernel = CauchyKernel::build(&cross);
    let line_kernel = CauchyKernel::build(&line);
    let method = if cfg.direct_solver {
        SolveMethod::Direct
    } else {
        SolveMethod::Neumann { max_iters: 400 }
    };

    let mut report = EquivalenceReport {
        symmetry,
        boundary_tail: bd.tail_magnitude(),
        qr_integral_drift: traj.qr_integral_drift,
        m_node_residual: 0.0,
        imag_axis_mismatch: 0.0,
        q_comparison: 0.0,
        r_comparison: 0.0,
        max_rh_residual: 0.0,
        direct_vs_neumann: None,
        nodes: cross.len(),
        field_rows: Vec::new(),
    };

    // Node-wise comparison of the deformed solution at the probes.
    let probe_results: Vec<Result<(f64, f64, f64)>> = cfg
        .probes
        .par_iter()
        .map(|&(x, t_probe)| {
            let cross_jump = build_j_quadrants(&ing, &cross, x, t_probe)?;
            let cross_sol = solve_rh(&cross, &cross_kernel, &cross_jump, method)?;
            let deformed = deform_reduced(&cross_sol, &cross, &ing, x, t_probe)?;
            let line_jump = build_j_line(&ing, &line, x, t_probe)?;
            let line_sol = solve_rh(&line, &line_kernel, &line_jump, method)?;
            let node_res = check_equivalence(&deformed, &line_sol, &line)?;
            let rh_res = cross_sol.residual.max(line_sol.residual);
            Ok((node_res, deformed.imag_axis_mismatch, rh_res))
        })
        .collect();
    for r in probe_results {
        let (node_res, mism, rh_res) = r?;
        report.m_node_residual = report.m_node_residual.max(node_res);
        report.imag_axis_mismatch = report.imag_axis_mismatch.max(mism);
        report.max_rh_residual = report.max_rh_residual.max(rh_res);
    }

    // Potential comparison sweep: Q_line vs sigma_3 Q_red over (x, t).
    let sweep: Vec<(f64, f64)> = cfg
        .ts
        .iter()
        .flat_map(|&t| cfg.xs.iter().map(move |&x| (x, t)))
        .collect();
    let sweep_results: Vec<Result<(FieldRow, f64)>> = sweep
        .par_iter()
        .map(|&(x, t_val)| {
            let cross_jump = build_j_quadrants(&ing, &cross, x, t_val)?;
            let cross_sol = solve_rh(&cross, &cross_kernel, &cross_jump, method)?;
            let (q_red, r_red) = reconstruct_qr(&cross_sol);

            let line_jump = build_j_line(&ing, &line, x, t_val)?;
            let line_sol = solve_rh(&line, &line_kernel, &line_jump, method)?;
            let (q_line, r_line) = reconstruct_qr(&line_sol);

            let row = FieldRow {
                x,
                t: t_val,
                q_line: [q_line.at(0, 0), q_line.at(1, 1)],
                r_line: [r_line.at(0, 0), r_line.at(1, 1)],
                q_red: [q_red.at(0, 0), q_red.at(1, 1)],
                r_red: [r_red.at(0, 0), r_red.at(1, 1)],
            };
            Ok((row, cross_sol.residual.max(line_sol.residual)))
        })
        .collect();
    let s3 = CMat2::pauli_z();
    for r in sweep_results {
        let (row, rh_res) = r?;
        let q_line = CMat2::diag(row.q_line[0], row.q_line[1]);
        let q_red = CMat2::diag(row.q_red[0], row.q_red[1]);
        let r_line = CMat2::diag(row.r_line[0], row.r_line[1]);
        let r_red = CMat2::diag(row.r_red[0], row.r_red[1]);
        report.q_comparison = report.q_comparison.max((q_line - s3 * q_red).max_abs());
        report.r_comparison = report.r_comparison.max((r_line - s3 * r_red).max_abs());
        report.max_rh_residual = report.max_rh_residual.max(rh_res);
        report.field_rows.push(row);
    }

    // Optional direct-solver cross check at the first probe.
    if cfg.direct_crosscheck {
        if let Some(&(x, t_probe)) = cfg.probes.first() {
            let jump = build_j_quadrants(&ing, &cross, x, t_probe)?;
            let direct = solve_rh(&cross, &cross_kernel, &jump, SolveMethod::Direct)?;
            let neumann =
                solve_rh(&cross, &cross_kernel, &jump, SolveMethod::Neumann { max_iters: 400 })?;
            let diff = direct
                .u
                .iter()
                .zip(neumann.u.iter())
                .map(|(a, b)| (*a - *b).max_abs())
                .fold(0.0, f64::max);
            report.direct_vs_neumann = Some(diff);
        }
    }

    Ok(report)
}

/// Build a GR-violating variant: T recomputed from boundary data with G0
/// doubled; reports the resulting global-relation residual.
pub fn global_relation_violation(
    cfg: &EquivalenceConfig,
    factor: f64,
) -> Result<SymmetryReport> {
    let eps = match cfg.partner {
        PartnerField::Local { eps } => eps as f64,
        PartnerField::Nonlocal { eps } => eps as f64,
        PartnerField::Zero => 0.0,
    };
    let kind = match cfg.partner {
        PartnerField::Nonlocal { .. } => ReductionKind::Nonlocal,
        _ => ReductionKind::Local,
    };
    let evo_cfg = EvolutionConfig::new(cfg.l, cfg.n_fft, cfg.dt, cfg.t_data);
    let evolver = Evolver::new(evo_cfg)?;
    let dx = 2.0 * cfg.l / cfg.n_fft as f64;
    let qf = cfg.pulse.q();
    let q0: Vec<C64> = (0..cfg.n_fft).map(|j| qf(-cfg.l + j as f64 * dx)).collect();
    let r0 = specialize(kind, eps, &q0);
    let traj = evolver.evolve(&q0, &r0)?;
    let bd = extract_boundary_data(&traj.traces)?.with_scaled_g0(factor);

    let lp = sample_line_potential(&cfg.pulse, cfg.partner, cfg.l, cfg.n_space)?;
    let hp = embed_halfline_ut(&lp)?;
    let real_spec = RaySpec { k_max: cfg.k_max, puncture: cfg.puncture, n: cfg.n_ray_real };
    let imag_spec = RaySpec { k_max: cfg.k_max, puncture: cfg.puncture, n: cfg.n_ray_imag };
    let (_, grid) = Contour::cross(real_spec, imag_spec);
    let s = compute_s(&hp, &grid)?;
    let t = compute_t(&bd, &grid)?;
    Ok(check_global_relation(&s, &t, &grid))
}

// ---------------------------------------------------------------------------
// Reduction audit pipeline
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionAuditConfig {
    pub l: f64,
    pub n_space: usize,
    pub pulse: PulseSpec,
    /// Which reduction family to audit.
    pub nonlocal: bool,
    /// eps in r = eps conj(q(...)) for the data.
    pub eps: i8,
    pub k_max: f64,
    pub puncture: f64,
    pub n_grid: usize,
    pub n_imag: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionAuditReport {
    pub symmetry: SymmetryReport,
    pub kind: String,
    pub coupling: f64,
}

pub fn run_reduction_audit(cfg: &ReductionAuditConfig) -> Result<ReductionAuditReport> {
    use crate::reductions::ReductionCandidate;

    let partner = if cfg.nonlocal {
        PartnerField::Nonlocal { eps: cfg.eps }
    } else {
        PartnerField::Local { eps: cfg.eps }
    };
    let lp = sample_line_potential(&cfg.pulse, partner, cfg.l, cfg.n_space)?;
    let rp = embed_redundant_line(&lp)?;
    let grid = SpectralGrid::symmetric(cfg.k_max, cfg.puncture, cfg.n_grid, cfg.n_imag);
    let s_line = compute_s_line(&rp, &grid)?;

    // eps_B = -1 (the lemma's sign); the family ratio reproduces the data.
    let ratio = -(cfg.eps as f64);
    let cand = if cfg.nonlocal {
        ReductionCandidate::antidiagonal(-1.0, 0.0, 1.0, 1.0, ratio)
    } else {
        ReductionCandidate::diagonal(-1.0, 0.0, 1.0, 1.0, ratio)
    };

    let (_scalar, mut symmetry) = project_scalar_scattering(&s_line, &grid, &cand);

    // Lemma symmetry on the half-line S for the same data.
    let hp = embed_halfline_ut(&lp)?;
    let s = compute_s(&hp, &grid)?;
    symmetry.merge(crate::symmetries::check_reduction_symmetry_s(&s, &grid, &cand)?);

    let (kind, coupling) = cand.induced_equation();
    Ok(ReductionAuditReport {
        symmetry,
        kind: format!("{kind:?}"),
        coupling,
    })
}

// ---------------------------------------------------------------------------
// helpers shared by tests
// ---------------------------------------------------------------------------

pub fn boundary_from_oracle(
    pulse: &PulseSpec,
    partner: PartnerField,
    l: f64,
    n_fft: usize,
    dt: f64,
    t_data: f64,
) -> Result<(BoundaryData, f64)> {
    let eps = match partner {
        PartnerField::Local { eps } | PartnerField::Nonlocal { eps } => eps as f64,
        PartnerField::Zero => 0.0,
    };
    let kind = match partner {
        PartnerField::Nonlocal { .. } => ReductionKind::Nonlocal,
        _ => ReductionKind::Local,
    };
    let evolver = Evolver::new(EvolutionConfig::new(l, n_fft, dt, t_data))?;
    let dx = 2.0 * l / n_fft as f64;
    let qf = pulse.q();
    let q0: Vec<C64> = (0..n_fft).map(|j| qf(-l + j as f64 * dx)).collect();
    let r0 = specialize(kind, eps, &q0);
    let traj = evolver.evolve(&q0, &r0)?;
    let bd = extract_boundary_data(&traj.traces)?;
    let drift = traj.qr_integral_drift;
    Ok((bd, drift))
}

pub fn halfline_and_redundant(
    pulse: &PulseSpec,
    partner: PartnerField,
    l: f64,
    n_space: usize,
) -> Result<(HalfLinePotential, RedundantLinePotential)> {
    let lp = sample_line_potential(pulse, partner, l, n_space)?;
    Ok((embed_halfline_ut(&lp)?, embed_redundant_line(&lp)?))
}

pub fn zero_complex() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_small_amplitude() {
        let mut cfg = RoundTripConfig::standard(0.1, 240);
        cfg.xs = default_x_grid(8.0);
        let report = run_line_roundtrip(&cfg).unwrap();
        assert!(
            report.sup_error < 1e-4,
            "round-trip error {:.3e}",
            report.sup_error
        );
        assert!(report.max_rh_residual < 1e-10);
        assert!(
            report.max_det_residual_interior < 1e-6,
            "interior det residual {:.3e}",
            report.max_det_residual_interior
        );
    }

    #[test]
    fn roundtrip_error_drops_with_node_doubling() {
        let error_at = |n_ray: usize| {
            let mut cfg = RoundTripConfig::standard(0.1, n_ray);
            cfg.xs = vec![0.0, 0.5, 1.0, 2.0, 3.5, 5.0];
            run_line_roundtrip(&cfg).unwrap().sup_error
        };
        let coarse = error_at(60);
        let fine = error_at(120);
        assert!(
            coarse / fine >= 4.0,
            "expected order >= 2 under node doubling: {coarse:.3e} -> {fine:.3e}"
        );
    }
}
