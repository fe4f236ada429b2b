//! Experiment runner: reproducible command-line drivers over the library
//! pipelines. Commands compose library calls, write JSON/CSV artifacts and
//! render a pass/fail table; no numerics live here.
//!
//! Exit codes: 0 all residuals within tolerance; 1 tolerance failure
//! (report still written); 2 usage or configuration error; 10..18
//! stage-tagged pipeline failures (see `stage_exit_code`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use aknsut::akns::{embed_halfline_ut, embed_redundant_line};
use aknsut::algebra::{CMat2, C64};
use aknsut::error::Error;
use aknsut::experiments::{
    self, boundary_from_oracle, run_equivalence, run_reduction_audit, sample_line_potential,
    EquivalenceConfig, PartnerField, PulseSpec, ReductionAuditConfig,
};
use aknsut::io::{
    boundary_to_doc, line_potential_from_doc, line_potential_to_doc, scattering_records,
    to_json_pretty, traces_csv, FieldsDoc,
};
use aknsut::oracle::{reduction_persistence, specialize, EvolutionConfig, Evolver, ReductionKind};
use aknsut::reductions::{classify_b, verify_candidate, ReductionCandidate};
use aknsut::scattering::{compute_s, compute_s_line, compute_t, SpectralGrid};
use aknsut::symmetries::{check_global_relation_interior, check_relation_t, SymmetryReport};

#[derive(Parser)]
#[command(name = "aknsut", about = "AKNS scattering and unified-transform experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports and data files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for sampled verifications.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Direct scattering of initial data: S and S_line with audits.
    Scatter(Common),
    /// Boundary-data scattering T with the global-relation audit.
    UtHalfline(Common),
    /// Full half-line/full-line equivalence pipeline.
    Equivalence(Common),
    /// Scalar scattering structure audit for a reduced potential.
    ReductionAudit(Common),
    /// Enumerate the Z2 representation families.
    Classify(Common),
    /// Reference evolution with boundary traces.
    Oracle(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scatter(c) => cmd_scatter(c),
        Command::UtHalfline(c) => cmd_ut_halfline(c),
        Command::Equivalence(c) => cmd_equivalence(c),
        Command::ReductionAudit(c) => cmd_reduction_audit(c),
        Command::Classify(c) => cmd_classify(c),
        Command::Oracle(c) => cmd_oracle(c),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<Error>()
                .map(stage_exit_code)
                .unwrap_or(2);
            ExitCode::from(code)
        }
    }
}

/// Stage-tagged exit codes by failure kind.
fn stage_exit_code(e: &Error) -> u8 {
    match e {
        Error::EvolutionUnstable { .. } => 10,
        Error::GridNotSymmetric { .. }
        | Error::BadGridSize { .. }
        | Error::InsufficientDecay { .. }
        | Error::BoundarySymmetry { .. } => 11,
        Error::DiscreteSpectrumSuspected { .. } => 12,
        Error::OutsideDomain { .. } | Error::NonFinite { .. } => 13,
        Error::SingularMatrix { .. } | Error::LengthMismatch { .. } => 15,
        Error::RhNonConvergence { .. } => 16,
        Error::DeformationMismatch { .. } => 17,
        Error::InvalidConfig(_) => 2,
    }
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| anyhow::anyhow!("cannot parse config {}: {e}", p.display()))
        }
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn print_report(title: &str, report: &SymmetryReport) {
    println!("{title}");
    println!("{:<34} {:>12} {:>12} {:>6}", "check", "residual", "tolerance", "ok");
    for (name, value) in &report.residuals {
        let tol = report.tolerances.get(name).copied().unwrap_or(f64::INFINITY);
        println!(
            "{:<34} {:>12.3e} {:>12.3e} {:>6}",
            name,
            value,
            tol,
            if *value <= tol { "pass" } else { "FAIL" }
        );
    }
}

fn pass_exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

// ---------------------------------------------------------------------------
// scatter
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ScatterConfig {
    l: f64,
    n_space: usize,
    pulse: PulseSpec,
    partner: PartnerField,
    /// Optional potential file ({grid, fields} JSON); overrides the pulse.
    potential_file: Option<String>,
    k_max: f64,
    puncture: f64,
    n_grid: usize,
    n_imag: usize,
    det_tolerance: f64,
    decay_threshold: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig {
            l: 20.0,
            n_space: 16384,
            pulse: PulseSpec { amplitude: 0.3, center: 0.0, velocity: 0.0 },
            partner: PartnerField::Local { eps: -1 },
            potential_file: None,
            k_max: 8.0,
            puncture: 1e-3,
            n_grid: 120,
            n_imag: 30,
            det_tolerance: 1e-8,
            decay_threshold: 1e-6,
        }
    }
}

#[derive(Serialize)]
struct ScatterReport {
    config: ScatterConfig,
    s_det_residual: f64,
    s_line_det_residual: f64,
    max_off_diagonal: f64,
    min_abs_det_a: f64,
    grid_points: usize,
    passed: bool,
}

fn cmd_scatter(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg: ScatterConfig = load_config(&c.config)?;
    let lp = match &cfg.potential_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("cannot read potential {path}: {e}"))?;
            let doc: FieldsDoc = serde_json::from_str(&text)?;
            line_potential_from_doc(&doc, cfg.decay_threshold)?
        }
        None => sample_line_potential(&cfg.pulse, cfg.partner, cfg.l, cfg.n_space)?,
    };
    let hp = embed_halfline_ut(&lp)?;
    let rp = embed_redundant_line(&lp)?;
    let grid = SpectralGrid::symmetric(cfg.k_max, cfg.puncture, cfg.n_grid, cfg.n_imag);

    let s = compute_s(&hp, &grid)?;
    let s_line = compute_s_line(&rp, &grid)?;

    let ks: Vec<C64> = grid.real.iter().map(|&k| C64::new(k, 0.0)).collect();
    let s_mats: Vec<_> = s.real.iter().map(|b| b.assemble()).collect();
    let line_mats: Vec<_> = s_line.real.iter().map(|b| b.assemble()).collect();
    write_out(&c.out, "s.json", &to_json_pretty(&scattering_records(&ks, &s_mats)))?;
    write_out(&c.out, "s_line.json", &to_json_pretty(&scattering_records(&ks, &line_mats)))?;

    let passed = s.audit.max_det_residual <= cfg.det_tolerance
        && s_line.audit.max_det_residual <= cfg.det_tolerance;
    let report = ScatterReport {
        s_det_residual: s.audit.max_det_residual,
        s_line_det_residual: s_line.audit.max_det_residual,
        max_off_diagonal: s.audit.max_off_diagonal.max(s_line.audit.max_off_diagonal),
        min_abs_det_a: s.audit.min_abs_det_a.min(s_line.audit.min_abs_det_a),
        grid_points: grid.real.len() + 2 * grid.imag_pos.len(),
        passed,
        config: cfg,
    };
    write_out(&c.out, "report.json", &to_json_pretty(&report))?;
    println!(
        "scatter: det(S) residual {:.3e}, det(S_line) residual {:.3e} -> {}",
        report.s_det_residual,
        report.s_line_det_residual,
        if passed { "pass" } else { "FAIL" }
    );
    Ok(pass_exit(passed))
}

// ---------------------------------------------------------------------------
// ut-halfline
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct UtHalflineConfig {
    l: f64,
    n_space: usize,
    n_fft: usize,
    dt: f64,
    t_data: f64,
    pulse: PulseSpec,
    partner: PartnerField,
    k_max: f64,
    puncture: f64,
    n_grid: usize,
    n_imag: usize,
    fan_radii: Vec<f64>,
    fan_angles: Vec<f64>,
    gr_tolerance: f64,
}

impl Default for UtHalflineConfig {
    fn default() -> Self {
        UtHalflineConfig {
            l: 32.0,
            n_space: 16384,
            n_fft: 1024,
            dt: 2.5e-4,
            t_data: 1.0,
            pulse: PulseSpec { amplitude: 0.2, center: 9.0, velocity: -13.5 },
            partner: PartnerField::Local { eps: -1 },
            k_max: 8.0,
            puncture: 1e-3,
            n_grid: 120,
            n_imag: 40,
            fan_radii: vec![1.0, 2.5, 5.0],
            fan_angles: vec![0.45, 0.9, 1.25],
            gr_tolerance: 5e-6,
        }
    }
}

#[derive(Serialize)]
struct UtHalflineReport {
    config: UtHalflineConfig,
    symmetry: SymmetryReport,
    boundary_tail: f64,
    t_det_residual: f64,
    passed: bool,
}

fn cmd_ut_halfline(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg: UtHalflineConfig = load_config(&c.config)?;
    let (bd, _) = boundary_from_oracle(
        &cfg.pulse, cfg.partner, cfg.l, cfg.n_fft, cfg.dt, cfg.t_data,
    )?;
    let lp = sample_line_potential(&cfg.pulse, cfg.partner, cfg.l, cfg.n_space)?;
    let hp = embed_halfline_ut(&lp)?;
    let grid = SpectralGrid::symmetric(cfg.k_max, cfg.puncture, cfg.n_grid, cfg.n_imag);

    let s = compute_s(&hp, &grid)?;
    let t = compute_t(&bd, &grid)?;

    let mut symmetry = aknsut::symmetries::check_global_relation(&s, &t, &grid);
    symmetry.merge(check_relation_t(&t, &grid));
    let fan: Vec<C64> = cfg
        .fan_radii
        .iter()
        .flat_map(|&r| cfg.fan_angles.iter().map(move |&a| C64::from_polar(r, a)))
        .collect();
    symmetry.merge(check_global_relation_interior(&hp, &bd, &fan)?);

    let ks: Vec<C64> = grid.real.iter().map(|&k| C64::new(k, 0.0)).collect();
    let t_mats: Vec<_> = t.real.iter().map(|b| b.assemble()).collect();
    write_out(&c.out, "t.json", &to_json_pretty(&scattering_records(&ks, &t_mats)))?;
    write_out(&c.out, "boundary.json", &to_json_pretty(&boundary_to_doc(&bd)))?;

    let passed = symmetry.passed();
    let report = UtHalflineReport {
        symmetry,
        boundary_tail: bd.tail_magnitude(),
        t_det_residual: t.audit.max_det_residual,
        passed,
        config: cfg,
    };
    write_out(&c.out, "report.json", &to_json_pretty(&report))?;
    print_report("ut-halfline", &report.symmetry);
    Ok(pass_exit(passed))
}

// ---------------------------------------------------------------------------
// equivalence
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct EquivalenceCliConfig {
    pipeline: EquivalenceConfig,
    tol_m_node: f64,
    tol_q: f64,
    tol_symmetry: f64,
}

impl Default for EquivalenceCliConfig {
    fn default() -> Self {
        EquivalenceCliConfig {
            pipeline: default_equivalence_pipeline(),
            tol_m_node: 1e-5,
            tol_q: 1e-4,
            tol_symmetry: 5e-6,
        }
    }
}

pub fn default_equivalence_pipeline() -> EquivalenceConfig {
    EquivalenceConfig {
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
        xs: equivalence_x_grid(32.0),
        probes: vec![(0.0, 0.0), (1.0, 0.0), (0.5, 0.5), (2.0, 0.5)],
        direct_solver: false,
        direct_crosscheck: false,
    }
}

pub fn equivalence_x_grid(l: f64) -> Vec<f64> {
    let mut xs = Vec::new();
    let mut x = 0.0;
    while x <= l + 1e-9 {
        xs.push(x);
        x += if x < 6.0 { 0.5 } else { 2.0 };
    }
    xs
}

#[derive(Serialize)]
struct EquivalenceCliReport {
    config: EquivalenceCliConfig,
    report: experiments::EquivalenceReport,
    passed: bool,
}

fn cmd_equivalence(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg: EquivalenceCliConfig = load_config(&c.config)?;
    let report = run_equivalence(&cfg.pipeline)?;

    let mut csv = String::from("x,t,re_q_line1,im_q_line1,re_q_line2,im_q_line2,re_q_red1,im_q_red1,re_q_red2,im_q_red2\n");
    for row in &report.field_rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.x,
            row.t,
            row.q_line[0].re,
            row.q_line[0].im,
            row.q_line[1].re,
            row.q_line[1].im,
            row.q_red[0].re,
            row.q_red[0].im,
            row.q_red[1].re,
            row.q_red[1].im,
        ));
    }
    write_out(&c.out, "fields.csv", &csv)?;

    let passed = report.symmetry.passed()
        && report.m_node_residual <= cfg.tol_m_node
        && report.q_comparison <= cfg.tol_q
        && report.r_comparison <= cfg.tol_q;
    let cli_report = EquivalenceCliReport { config: cfg, report, passed };
    write_out(&c.out, "report.json", &to_json_pretty(&cli_report))?;

    print_report("equivalence: scattering relations", &cli_report.report.symmetry);
    println!(
        "M-node residual      {:.3e} (tol {:.1e})",
        cli_report.report.m_node_residual, cli_report.config.tol_m_node
    );
    println!(
        "Q comparison         {:.3e} (tol {:.1e})",
        cli_report.report.q_comparison, cli_report.config.tol_q
    );
    println!("-> {}", if passed { "pass" } else { "FAIL" });
    Ok(pass_exit(passed))
}

// ---------------------------------------------------------------------------
// reduction-audit
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ReductionAuditCliConfig {
    audit: ReductionAuditConfig,
}

impl Default for ReductionAuditCliConfig {
    fn default() -> Self {
        ReductionAuditCliConfig {
            audit: ReductionAuditConfig {
                l: 20.0,
                n_space: 16384,
                pulse: PulseSpec { amplitude: 0.2, center: 0.4, velocity: 0.6 },
                nonlocal: false,
                eps: -1,
                k_max: 6.0,
                puncture: 1e-3,
                n_grid: 96,
                n_imag: 24,
            },
        }
    }
}

fn cmd_reduction_audit(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg: ReductionAuditCliConfig = load_config(&c.config)?;
    let report = run_reduction_audit(&cfg.audit)?;
    let passed = report.symmetry.passed();
    #[derive(Serialize)]
    struct Doc {
        config: ReductionAuditCliConfig,
        report: experiments::ReductionAuditReport,
        passed: bool,
    }
    let doc = Doc { config: cfg, report, passed };
    write_out(&c.out, "report.json", &to_json_pretty(&doc))?;
    print_report("reduction-audit", &doc.report.symmetry);
    println!("kind {} coupling {:+.1}", doc.report.kind, doc.report.coupling);
    Ok(pass_exit(passed))
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ClassifyConfig {
    samples: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { samples: 6 }
    }
}

#[derive(Serialize)]
struct FamilyDoc {
    gamma: f64,
    pattern: String,
    free_entries: Vec<(usize, usize)>,
    b_plus: Vec<[f64; 2]>,
    b_minus: Vec<[f64; 2]>,
    max_constraint_residual: f64,
}

fn mat_pairs(m: &CMat2) -> Vec<[f64; 2]> {
    m.0.iter().map(|v| [v.re, v.im]).collect()
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

fn cmd_classify(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg: ClassifyConfig = load_config(&c.config)?;
    let mut rng = SplitMix64(c.seed.wrapping_mul(2862933555777941757).wrapping_add(1));

    let families = classify_b();
    let mut docs = Vec::new();
    let mut worst = 0.0f64;
    for fam in &families {
        let mut fam_worst = fam
            .representative
            .constraint_residuals()
            .into_iter()
            .fold(0.0f64, f64::max);
        // Sampled parameter sweep over (theta, mu, scale pair).
        for _ in 0..cfg.samples {
            let theta = rng.in_range(0.0, 2.0 * std::f64::consts::PI);
            let mu = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
            let p = rng.in_range(0.2, 2.0);
            let m = rng.in_range(-2.0, 2.0).abs().max(0.1) * p.signum();
            let cand = if fam.gamma > 0.0 {
                ReductionCandidate::diagonal(-1.0, theta, mu, p, m)
            } else {
                ReductionCandidate::antidiagonal(-1.0, theta, mu, p, m)
            };
            fam_worst = fam_worst.max(
                cand.constraint_residuals().into_iter().fold(0.0f64, f64::max),
            );
        }
        worst = worst.max(fam_worst);
        docs.push(FamilyDoc {
            gamma: fam.gamma,
            pattern: format!("{:?}", fam.pattern),
            free_entries: fam.free_entries.clone(),
            b_plus: mat_pairs(&fam.representative.b_plus),
            b_minus: mat_pairs(&fam.representative.b_minus),
            max_constraint_residual: fam_worst,
        });
    }

    // A dense block must be rejected.
    let dense = CMat2([
        C64::new(rng.in_range(0.2, 1.0), rng.in_range(0.1, 0.9)),
        C64::new(rng.in_range(0.2, 1.0), -rng.in_range(0.1, 0.9)),
        C64::new(-rng.in_range(0.2, 1.0), rng.in_range(0.1, 0.9)),
        C64::new(rng.in_range(0.2, 1.0), rng.in_range(0.1, 0.9)),
    ]);
    let rejected = verify_candidate(dense, dense, -1.0).is_err();

    #[derive(Serialize)]
    struct Doc {
        seed: u64,
        families: Vec<FamilyDoc>,
        family_count: usize,
        dense_block_rejected: bool,
    }
    let doc = Doc {
        seed: c.seed,
        family_count: docs.len(),
        families: docs,
        dense_block_rejected: rejected,
    };
    write_out(&c.out, "families.json", &to_json_pretty(&doc))?;
    println!(
        "classify: {} families, worst residual {:.2e}, dense block rejected: {}",
        doc.family_count, worst, rejected
    );
    let passed = doc.family_count == 2 && worst <= 1e-12 && rejected;
    Ok(pass_exit(passed))
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct OracleCliConfig {
    l: f64,
    n: usize,
    dt: f64,
    t_final: f64,
    dealias: bool,
    snapshot_every: usize,
    pulse: PulseSpec,
    partner: PartnerField,
}

impl Default for OracleCliConfig {
    fn default() -> Self {
        OracleCliConfig {
            l: 25.0,
            n: 1024,
            dt: 5e-4,
            t_final: 1.0,
            dealias: false,
            snapshot_every: 400,
            pulse: PulseSpec { amplitude: 0.3, center: 0.0, velocity: 0.0 },
            partner: PartnerField::Local { eps: -1 },
        }
    }
}

fn cmd_oracle(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg: OracleCliConfig = load_config(&c.config)?;
    let mut evo = EvolutionConfig::new(cfg.l, cfg.n, cfg.dt, cfg.t_final);
    evo.dealias = cfg.dealias;
    evo.snapshot_every = cfg.snapshot_every;
    let evolver = Evolver::new(evo)?;
    let dx = 2.0 * cfg.l / cfg.n as f64;
    let qf = cfg.pulse.q();
    let q0: Vec<C64> = (0..cfg.n).map(|j| qf(-cfg.l + j as f64 * dx)).collect();
    let (kind, eps) = match cfg.partner {
        PartnerField::Local { eps } => (ReductionKind::Local, eps as f64),
        PartnerField::Nonlocal { eps } => (ReductionKind::Nonlocal, eps as f64),
        PartnerField::Zero => (ReductionKind::Local, 0.0),
    };
    let r0 = if eps == 0.0 {
        vec![C64::new(0.0, 0.0); cfg.n]
    } else {
        specialize(kind, eps, &q0)
    };
    let traj = evolver.evolve(&q0, &r0)?;

    write_out(&c.out, "traces.csv", &traces_csv(&traj.traces))?;
    let final_pot = traj.potential_at(traj.final_snapshot())?;
    write_out(&c.out, "final_state.json", &to_json_pretty(&line_potential_to_doc(&final_pot)))?;

    let persistence = if eps != 0.0 {
        Some(reduction_persistence(&traj, kind, eps))
    } else {
        None
    };
    #[derive(Serialize)]
    struct Doc {
        config: OracleCliConfig,
        qr_integral_drift: f64,
        reduction_persistence: Option<f64>,
        snapshots: usize,
        passed: bool,
    }
    let passed = traj.qr_integral_drift <= 1e-8
        && persistence.map_or(true, |p| p <= 1e-6);
    let doc = Doc {
        qr_integral_drift: traj.qr_integral_drift,
        reduction_persistence: persistence,
        snapshots: traj.snapshots.len(),
        passed,
        config: cfg,
    };
    write_out(&c.out, "report.json", &to_json_pretty(&doc))?;
    println!(
        "oracle: qr drift {:.3e}, persistence {:?} -> {}",
        doc.qr_integral_drift,
        doc.reduction_persistence,
        if passed { "pass" } else { "FAIL" }
    );
    Ok(pass_exit(passed))
}
