//! Potential and boundary-data containers, Lax-matrix assembly and the
//! embeddings between the full-line problem and the half-line problem.
//!
//! Grid convention: a `LinePotential` samples `[-L, L]` inclusively on
//! `n + 1` uniform points with `n` a power of two, so `x = 0` is a sample
//! and the mirror map `x -> -x` is an exact index flip.

use num_complex::Complex64;

use crate::algebra::{Block4, CMat2, CMat4, C64, ZERO};
use crate::error::{Error, Result};

/// Default endpoint decay threshold (Schwartz-class truncation proxy).
pub const DEFAULT_DECAY_THRESHOLD: f64 = 1e-8;

/// Tolerance for the mirror-symmetry residual of linearizable boundary data.
pub const BOUNDARY_SYMMETRY_TOL: f64 = 1e-10;

fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Sampled potential pair (q, r) on the symmetric inclusive grid over [-L, L].
#[derive(Clone, Debug)]
pub struct LinePotential {
    pub l: f64,
    pub q: Vec<C64>,
    pub r: Vec<C64>,
}

impl LinePotential {
    /// Sample analytic fields on n+1 points; n must be an even power of two.
    pub fn sample(
        l: f64,
        n: usize,
        mut q: impl FnMut(f64) -> C64,
        mut r: impl FnMut(f64) -> C64,
    ) -> Result<Self> {
        if !is_power_of_two(n) {
            return Err(Error::BadGridSize { n });
        }
        let dx = 2.0 * l / n as f64;
        let xs = (0..=n).map(|j| -l + j as f64 * dx);
        let q: Vec<C64> = xs.clone().map(&mut q).collect();
        let r: Vec<C64> = xs.map(&mut r).collect();
        let pot = LinePotential { l, q, r };
        pot.check_decay(DEFAULT_DECAY_THRESHOLD)?;
        Ok(pot)
    }

    pub fn from_samples(l: f64, q: Vec<C64>, r: Vec<C64>, decay_threshold: f64) -> Result<Self> {
        if q.len() != r.len() || q.len() < 3 {
            return Err(Error::LengthMismatch {
                what: "line potential",
                got: r.len(),
                expected: q.len(),
            });
        }
        if !is_power_of_two(q.len() - 1) {
            return Err(Error::BadGridSize { n: q.len() - 1 });
        }
        let pot = LinePotential { l, q, r };
        pot.check_decay(decay_threshold)?;
        Ok(pot)
    }

    pub fn n(&self) -> usize {
        self.q.len() - 1
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.l + j as f64 * self.dx()
    }

    fn check_decay(&self, limit: f64) -> Result<()> {
        let ends = [
            self.q[0], self.q[self.n()], self.r[0], self.r[self.n()],
        ];
        let worst = ends.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if worst > limit {
            return Err(Error::InsufficientDecay {
                name: "q/r at +-L",
                value: worst,
                limit,
            });
        }
        Ok(())
    }
}

/// Diagonal half-line potential: the entries of Q = diag(q1, q2) and
/// R = diag(r1, r2) sampled on [0, L].
#[derive(Clone, Debug)]
pub struct HalfLinePotential {
    pub l: f64,
    pub q1: Vec<C64>,
    pub q2: Vec<C64>,
    pub r1: Vec<C64>,
    pub r2: Vec<C64>,
}

impl HalfLinePotential {
    pub fn m(&self) -> usize {
        self.q1.len() - 1
    }

    pub fn dx(&self) -> f64 {
        self.l / self.m() as f64
    }

    pub fn q_at(&self, j: usize) -> CMat2 {
        CMat2::diag(self.q1[j], self.q2[j])
    }

    pub fn r_at(&self, j: usize) -> CMat2 {
        CMat2::diag(self.r1[j], self.r2[j])
    }

    pub fn endpoint_decay(&self) -> f64 {
        let m = self.m();
        [self.q1[m], self.q2[m], self.r1[m], self.r2[m]]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

/// The redundant doubled form of a full-line potential:
/// Q = diag(q(x), -q(-x)), R = diag(r(x), -r(-x)) on [-L, L].
#[derive(Clone, Debug)]
pub struct RedundantLinePotential {
    pub l: f64,
    pub q_plus: Vec<C64>,
    pub q_minus: Vec<C64>,
    pub r_plus: Vec<C64>,
    pub r_minus: Vec<C64>,
}

impl RedundantLinePotential {
    pub fn n(&self) -> usize {
        self.q_plus.len() - 1
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n() as f64
    }

    pub fn q_at(&self, j: usize) -> CMat2 {
        CMat2::diag(self.q_plus[j], self.q_minus[j])
    }

    pub fn r_at(&self, j: usize) -> CMat2 {
        CMat2::diag(self.r_plus[j], self.r_minus[j])
    }
}

/// Dirichlet/Neumann traces on a uniform time grid over [0, T].
/// Each entry stores the two diagonal components of the 2x2 matrix trace.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub t_final: f64,
    pub g0: [Vec<C64>; 2],
    pub g1: [Vec<C64>; 2],
    pub h0: [Vec<C64>; 2],
    pub h1: [Vec<C64>; 2],
    pub linearizable: bool,
}

impl BoundaryData {
    pub fn steps(&self) -> usize {
        self.g0[0].len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    pub fn g0_at(&self, j: usize) -> CMat2 {
        CMat2::diag(self.g0[0][j], self.g0[1][j])
    }

    pub fn g1_at(&self, j: usize) -> CMat2 {
        CMat2::diag(self.g1[0][j], self.g1[1][j])
    }

    pub fn h0_at(&self, j: usize) -> CMat2 {
        CMat2::diag(self.h0[0][j], self.h0[1][j])
    }

    pub fn h1_at(&self, j: usize) -> CMat2 {
        CMat2::diag(self.h1[0][j], self.h1[1][j])
    }

    /// Sup over the grid of the mirror-symmetry residuals
    /// ||G0 - s G0 s||, ||G1 + s G1 s|| (and the H analogues).
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let swap = CMat2::swap();
        for j in 0..=self.steps() {
            let r0 = (self.g0_at(j) - swap * self.g0_at(j) * swap).max_abs();
            let r1 = (self.g1_at(j) + swap * self.g1_at(j) * swap).max_abs();
            let s0 = (self.h0_at(j) - swap * self.h0_at(j) * swap).max_abs();
            let s1 = (self.h1_at(j) + swap * self.h1_at(j) * swap).max_abs();
            worst = worst.max(r0).max(r1).max(s0).max(s1);
        }
        worst
    }

    /// Magnitude of the data at t = T (truncation tail of the t-integration).
    pub fn tail_magnitude(&self) -> f64 {
        let j = self.steps();
        [
            self.g0_at(j).max_abs(),
            self.g1_at(j).max_abs(),
            self.h0_at(j).max_abs(),
            self.h1_at(j).max_abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Boundary data with G0 scaled, used to probe global-relation violation.
    pub fn with_scaled_g0(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for comp in out.g0.iter_mut() {
            for v in comp.iter_mut() {
                *v *= factor;
            }
        }
        out.linearizable = out.symmetry_residual() < BOUNDARY_SYMMETRY_TOL;
        out
    }

    /// Boundary data with the second component of G0 perturbed, breaking the
    /// mirror symmetry while leaving the first component intact.
    pub fn with_broken_symmetry(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in out.g0[1].iter_mut() {
            *v *= factor;
        }
        out.linearizable = out.symmetry_residual() < BOUNDARY_SYMMETRY_TOL;
        out
    }
}

/// W = [[0, Q], [R, 0]] at one sample of a half-line potential.
pub fn assemble_w(p: &HalfLinePotential, j: usize) -> CMat4 {
    w_from_blocks(p.q_at(j), p.r_at(j))
}

pub fn w_from_blocks(q: CMat2, r: CMat2) -> CMat4 {
    Block4 {
        tl: CMat2::zero(),
        tr: q,
        bl: r,
        br: CMat2::zero(),
    }
    .assemble()
}

/// P = 2k W - i W_x Sigma_3 - i W^2 Sigma_3 (the t-part coefficient).
pub fn assemble_p(w: &CMat4, wx: &CMat4, k: C64) -> CMat4 {
    let s3 = CMat4::block_signature();
    let i = Complex64::new(0.0, 1.0);
    w.scale(2.0 * k) - (*wx * s3).scale(i) - (*w * *w * s3).scale(i)
}

/// P(0, t, k) directly from boundary traces; all blocks are diagonal.
pub fn assemble_p_boundary(bd: &BoundaryData, j: usize, k: C64) -> CMat4 {
    let i = Complex64::new(0.0, 1.0);
    let g0 = bd.g0_at(j);
    let g1 = bd.g1_at(j);
    let h0 = bd.h0_at(j);
    let h1 = bd.h1_at(j);
    Block4 {
        tl: (g0 * h0).scale(-i),
        tr: g0.scale(2.0 * k) + g1.scale(i),
        bl: h0.scale(2.0 * k) - h1.scale(i),
        br: (h0 * g0).scale(i),
    }
    .assemble()
}

/// x-part Lax matrix U = -ik Sigma_3 + W.
pub fn lax_u(w: &CMat4, k: C64) -> CMat4 {
    let i = Complex64::new(0.0, 1.0);
    CMat4::block_signature().scale(-i * k) + *w
}

/// t-part Lax matrix V = -2ik^2 Sigma_3 + P.
pub fn lax_v(p: &CMat4, k: C64) -> CMat4 {
    let i = Complex64::new(0.0, 1.0);
    CMat4::block_signature().scale(-2.0 * i * k * k) + *p
}

/// Fold a full-line potential onto the half-line:
/// q1(x) = q(x), q2(x) = q(-x) for x >= 0 (and the same for r).
pub fn embed_halfline_ut(lp: &LinePotential) -> Result<HalfLinePotential> {
    let n = lp.n();
    if n % 2 != 0 {
        return Err(Error::GridNotSymmetric { n });
    }
    let mid = n / 2;
    let m = n / 2;
    let mut q1 = Vec::with_capacity(m + 1);
    let mut q2 = Vec::with_capacity(m + 1);
    let mut r1 = Vec::with_capacity(m + 1);
    let mut r2 = Vec::with_capacity(m + 1);
    for j in 0..=m {
        q1.push(lp.q[mid + j]);
        q2.push(lp.q[mid - j]);
        r1.push(lp.r[mid + j]);
        r2.push(lp.r[mid - j]);
    }
    Ok(HalfLinePotential { l: lp.l, q1, q2, r1, r2 })
}

/// The redundant doubled full-line potential
/// Q = diag(q(x), -q(-x)), R = diag(r(x), -r(-x)).
pub fn embed_redundant_line(lp: &LinePotential) -> Result<RedundantLinePotential> {
    let n = lp.n();
    if n % 2 != 0 {
        return Err(Error::GridNotSymmetric { n });
    }
    let q_plus = lp.q.clone();
    let r_plus = lp.r.clone();
    let q_minus: Vec<C64> = (0..=n).map(|j| -lp.q[n - j]).collect();
    let r_minus: Vec<C64> = (0..=n).map(|j| -lp.r[n - j]).collect();
    Ok(RedundantLinePotential { l: lp.l, q_plus, q_minus, r_plus, r_minus })
}

/// Boundary trace of the evolved full-line field at one instant.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryTrace {
    pub t: f64,
    pub q0: C64,
    pub qx0: C64,
    pub r0: C64,
    pub rx0: C64,
}

/// Assemble linearizable boundary data from trace samples of a full-line
/// evolution: G0 = diag(q(0,t), q(0,t)), G1 = diag(q_x(0,t), -q_x(0,t)),
/// and similarly for H from r.
pub fn extract_boundary_data(traces: &[BoundaryTrace]) -> Result<BoundaryData> {
    if traces.len() < 2 {
        return Err(Error::LengthMismatch {
            what: "boundary traces",
            got: traces.len(),
            expected: 2,
        });
    }
    let t_final = traces.last().unwrap().t;
    let mut bd = BoundaryData {
        t_final,
        g0: [Vec::new(), Vec::new()],
        g1: [Vec::new(), Vec::new()],
        h0: [Vec::new(), Vec::new()],
        h1: [Vec::new(), Vec::new()],
        linearizable: false,
    };
    for tr in traces {
        bd.g0[0].push(tr.q0);
        bd.g0[1].push(tr.q0);
        bd.g1[0].push(tr.qx0);
        bd.g1[1].push(-tr.qx0);
        bd.h0[0].push(tr.r0);
        bd.h0[1].push(tr.r0);
        bd.h1[0].push(tr.rx0);
        bd.h1[1].push(-tr.rx0);
    }
    let residual = bd.symmetry_residual();
    if residual > BOUNDARY_SYMMETRY_TOL {
        return Err(Error::BoundarySymmetry {
            residual,
            limit: BOUNDARY_SYMMETRY_TOL,
        });
    }
    bd.linearizable = true;
    Ok(bd)
}

/// Restriction of the redundant line potential to x >= 0, for comparison
/// against sigma_3 times the half-line embedding.
pub fn restrict_redundant(rp: &RedundantLinePotential) -> (Vec<CMat2>, Vec<CMat2>) {
    let n = rp.n();
    let mid = n / 2;
    let q = (mid..=n).map(|j| rp.q_at(j)).collect();
    let r = (mid..=n).map(|j| rp.r_at(j)).collect();
    (q, r)
}

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// A sech(x - x0) exp(i v (x - x0)) pulse, the workhorse initial condition.
pub fn sech_pulse(amplitude: f64, center: f64, velocity: f64) -> impl Fn(f64) -> C64 {
    move |x: f64| {
        let envelope = amplitude * sech(x - center);
        let phase = velocity * (x - center);
        C64::new(envelope * phase.cos(), envelope * phase.sin())
    }
}

pub fn zero_field() -> impl Fn(f64) -> C64 {
    |_| ZERO
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{commutator, ONE};
    use crate::oracle::{specialize, EvolutionConfig, Evolver, ReductionKind};
    use num_complex::Complex64;

    #[test]
    fn w_assembly_examples() {
        let zero = HalfLinePotential {
            l: 1.0,
            q1: vec![ZERO; 3],
            q2: vec![ZERO; 3],
            r1: vec![ZERO; 3],
            r2: vec![ZERO; 3],
        };
        assert_eq!(assemble_w(&zero, 1), CMat4::zero());

        let mut single = zero.clone();
        single.q1[1] = ONE;
        assert_eq!(assemble_w(&single, 1), CMat4::unit(0, 2));

        // W^2 is block diagonal with blocks QR and RQ.
        let q = CMat2::diag(C64::new(0.3, 0.1), C64::new(-0.2, 0.4));
        let r = CMat2::diag(C64::new(0.1, -0.5), C64::new(0.7, 0.2));
        let w = w_from_blocks(q, r);
        let w2 = w * w;
        let blocks = w2.blocks();
        assert_eq!(blocks.tl, q * r);
        assert_eq!(blocks.br, r * q);
        assert_eq!(blocks.tr.max_abs(), 0.0);
        assert_eq!(blocks.bl.max_abs(), 0.0);
    }

    #[test]
    fn p_assembly_term_isolation() {
        assert_eq!(
            assemble_p(&CMat4::zero(), &CMat4::zero(), C64::new(1.3, 0.2)),
            CMat4::zero()
        );
        // k = 0, W_x = 0: P = -i W^2 Sigma_3.
        let q = CMat2::diag(C64::new(0.3, 0.1), C64::new(-0.2, 0.4));
        let r = CMat2::diag(C64::new(0.1, -0.5), C64::new(0.7, 0.2));
        let w = w_from_blocks(q, r);
        let p = assemble_p(&w, &CMat4::zero(), ZERO);
        let expected = (w * w * CMat4::block_signature()).scale(-Complex64::new(0.0, 1.0));
        assert!((p - expected).max_abs() < 1e-15);
    }

    /// Zero-curvature check on oracle data: dU/dt - dV/dx + [U, V] must
    /// vanish when (q, r) solve the evolution equations. Time derivative
    /// by centered differences of snapshots, space derivatives by
    /// fourth-order centered differences.
    #[test]
    fn lax_pair_compatibility_on_oracle_data() {
        let l = 25.0;
        let n = 1024;
        let mut cfg = EvolutionConfig::new(l, n, 5e-4, 0.404);
        cfg.snapshot_every = 4; // snapshots every 0.002
        let ev = Evolver::new(cfg).unwrap();
        let dx = 2.0 * l / n as f64;
        let pulse = sech_pulse(0.2, 0.0, 0.0);
        let q0: Vec<C64> = (0..n).map(|j| pulse(-l + j as f64 * dx)).collect();
        let r0 = specialize(ReductionKind::Local, -1.0, &q0);
        let traj = ev.evolve(&q0, &r0).unwrap();

        // three consecutive snapshots around t = 0.4
        let idx = traj
            .snapshot_times
            .iter()
            .position(|&t| (t - 0.4).abs() < 1e-9)
            .unwrap();
        let dt_s = traj.snapshot_times[idx + 1] - traj.snapshot_times[idx];
        let (qm, rm) = &traj.snapshots[idx - 1];
        let (qc, rc) = &traj.snapshots[idx];
        let (qp, rp) = &traj.snapshots[idx + 1];

        let w_at = |q: &[C64], r: &[C64], j: usize| {
            w_from_blocks(CMat2::diag(q[j], q[j]), CMat2::diag(r[j], r[j]))
        };
        // fourth-order centered first derivative
        let dx4 = |f: &dyn Fn(usize) -> CMat4, j: usize| -> CMat4 {
            (f(j - 2) - f(j + 2) + (f(j + 1) - f(j - 1)).scale(C64::new(8.0, 0.0)))
                .scale(C64::new(1.0 / (12.0 * dx), 0.0))
        };

        let k = C64::new(0.7, 0.0);
        let mut worst = 0.0f64;
        for j in [n / 2 - 40, n / 2, n / 2 + 25] {
            let w = |jj: usize| w_at(qc, rc, jj);
            let wx = |jj: usize| dx4(&w, jj);
            let u = |jj: usize| lax_u(&w(jj), k);
            let v = |jj: usize| lax_v(&assemble_p(&w(jj), &wx(jj), k), k);

            let du_dt = (w_at(qp, rp, j) - w_at(qm, rm, j))
                .scale(C64::new(1.0 / (2.0 * dt_s), 0.0));
            let dv_dx = dx4(&v, j);
            let residual = du_dt - dv_dx + commutator(&u(j), &v(j));
            worst = worst.max(residual.max_abs());
        }
        assert!(worst < 1e-6, "compatibility residual {worst:.3e}");
    }

    #[test]
    fn embedding_parity() {
        let n = 64;
        let even = LinePotential::sample(24.0, n, sech_pulse(0.3, 0.0, 0.0), |_| ZERO).unwrap();
        let hp = embed_halfline_ut(&even).unwrap();
        for j in 0..=hp.m() {
            assert_eq!(hp.q1[j], hp.q2[j]);
        }

        let odd = LinePotential::sample(
            24.0,
            n,
            |x| C64::new(x * sech(x), 0.0),
            |_| ZERO,
        )
        .unwrap();
        let hp = embed_halfline_ut(&odd).unwrap();
        for j in 0..=hp.m() {
            assert!((hp.q1[j] + hp.q2[j]).norm() < 1e-15);
        }

        // q(x) = sech(x) e^{ix}: the mirrored component conjugates the phase.
        let chirped = LinePotential::sample(24.0, 256, sech_pulse(1.0, 0.0, 1.0), |_| ZERO).unwrap();
        let hp = embed_halfline_ut(&chirped).unwrap();
        for j in (0..=hp.m()).step_by(17) {
            let x = j as f64 * hp.dx();
            let expected = C64::new(sech(x) * x.cos(), -sech(x) * x.sin());
            assert!((hp.q2[j] - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn redundant_embedding_matches_sigma3_halfline() {
        let lp = LinePotential::sample(
            24.0,
            128,
            sech_pulse(0.4, 0.3, 0.8),
            sech_pulse(0.2, -0.5, -0.3),
        )
        .unwrap();
        let rp = embed_redundant_line(&lp).unwrap();
        let hp = embed_halfline_ut(&lp).unwrap();
        let (qres, rres) = restrict_redundant(&rp);
        let s3 = CMat2::pauli_z();
        for j in 0..=hp.m() {
            assert!((qres[j] - s3 * hp.q_at(j)).max_abs() < 1e-15);
            assert!((rres[j] - s3 * hp.r_at(j)).max_abs() < 1e-15);
        }
        // Q_line(0) = diag(q(0), -q(0)).
        let mid = lp.n() / 2;
        assert_eq!(rp.q_at(mid), CMat2::diag(lp.q[mid], -lp.q[mid]));
        // zero potential embeds to zero
        let zp = LinePotential::sample(24.0, 64, |_| ZERO, |_| ZERO).unwrap();
        let zr = embed_redundant_line(&zp).unwrap();
        assert!(zr.q_plus.iter().all(|v| v.norm() == 0.0));
    }

    /// The spectral boundary derivative must agree with a fourth-order
    /// centered difference of the sampled field at x = 0.
    #[test]
    fn boundary_traces_match_finite_differences() {
        let l = 25.0;
        let n = 2048;
        let mut cfg = EvolutionConfig::new(l, n, 1e-4, 0.02);
        cfg.snapshot_every = 50;
        let ev = Evolver::new(cfg).unwrap();
        let dx = 2.0 * l / n as f64;
        let pulse = sech_pulse(0.3, 0.0, 0.0);
        let q0: Vec<C64> = (0..n).map(|j| pulse(-l + j as f64 * dx)).collect();
        let r0 = specialize(ReductionKind::Local, -1.0, &q0);
        let traj = ev.evolve(&q0, &r0).unwrap();

        let fd4 = |f: &[C64], j: usize| {
            (f[j - 2] - f[j + 2] + (f[j + 1] - f[j - 1]) * 8.0) / (12.0 * dx)
        };
        // initial and final snapshots both have cached spectral traces
        let last_snap = traj.snapshots.len() - 1;
        for (snap, trace_idx) in [(0usize, 0usize), (last_snap, traj.traces.len() - 1)] {
            let (q, r) = &traj.snapshots[snap];
            let tr = &traj.traces[trace_idx];
            let mid = n / 2;
            assert!((tr.q0 - q[mid]).norm() < 1e-12);
            assert!(
                (tr.qx0 - fd4(q, mid)).norm() < 1e-8,
                "qx trace vs FD: {:.3e}",
                (tr.qx0 - fd4(q, mid)).norm()
            );
            assert!((tr.rx0 - fd4(r, mid)).norm() < 1e-8);
        }

        let bd = extract_boundary_data(&traj.traces).unwrap();
        assert!(bd.linearizable);
        assert_eq!(bd.symmetry_residual(), 0.0);
        // G1 = diag(qx, -qx) by construction
        let j = bd.steps() / 2;
        assert_eq!(bd.g1[0][j], -bd.g1[1][j]);
    }
}
