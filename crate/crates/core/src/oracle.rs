//! Reference evolution of the coupled AKNS system
//! `i q_t + q_xx = 2 q r q`, `-i r_t + r_xx = 2 r q r`
//! by Strang splitting on a periodic Fourier grid. The nonlinear substep is
//! exact: the product m = q r is pointwise invariant under the nonlinear
//! flow (i q_t = 2 m q, -i r_t = 2 m r), so each substep is a pure phase
//! rotation by exp(-2 i m dt) / exp(+2 i m dt).
//!
//! The trajectory records spectral boundary traces q(0,t), q_x(0,t),
//! r(0,t), r_x(0,t) at every step; these feed the t-part scattering.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::akns::{BoundaryTrace, LinePotential};
use crate::algebra::C64;
use crate::error::{Error, Result};

/// Phase advance per step at the Nyquist mode must stay below this bound.
pub const DEFAULT_STABILITY_BOUND: f64 = 8.0;

/// Endpoint field magnitude treated as wrap-around contamination.
pub const DEFAULT_BOUNDARY_GUARD: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    pub l: f64,
    /// Periodic grid size (power of two).
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Zero the top third of the spectrum after each nonlinear substep.
    pub dealias: bool,
    /// Store full (q, r) snapshots every this many steps (0: ends only).
    pub snapshot_every: usize,
    pub stability_bound: f64,
    pub boundary_guard: f64,
}

impl EvolutionConfig {
    pub fn new(l: f64, n: usize, dt: f64, t_final: f64) -> Self {
        EvolutionConfig {
            l,
            n,
            dt,
            t_final,
            dealias: false,
            snapshot_every: 0,
            stability_bound: DEFAULT_STABILITY_BOUND,
            boundary_guard: DEFAULT_BOUNDARY_GUARD,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n & (self.n - 1) != 0 {
            return Err(Error::BadGridSize { n: self.n });
        }
        let xi_max = std::f64::consts::PI * self.n as f64 / (2.0 * self.l);
        if self.dt * xi_max * xi_max > self.stability_bound {
            return Err(Error::InvalidConfig(format!(
                "dt * xi_max^2 = {:.3} exceeds the stability bound {:.3}",
                self.dt * xi_max * xi_max,
                self.stability_bound
            )));
        }
        if self.dt <= 0.0 || self.t_final < 0.0 || self.l <= 0.0 {
            return Err(Error::InvalidConfig("l, dt, t_final must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReductionKind {
    /// r(x) = eps * conj(q(x))
    Local,
    /// r(x) = eps * conj(q(-x))
    Nonlocal,
}

/// Build r0 from q0 per the chosen reduction.
pub fn specialize(kind: ReductionKind, eps: f64, q0: &[C64]) -> Vec<C64> {
    let n = q0.len();
    match kind {
        ReductionKind::Local => q0.iter().map(|v| eps * v.conj()).collect(),
        ReductionKind::Nonlocal => (0..n).map(|j| eps * q0[(n - j) % n].conj()).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: EvolutionConfig,
    pub traces: Vec<BoundaryTrace>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<(Vec<C64>, Vec<C64>)>,
    /// Max drift of the conserved quantity int q r dx over the run.
    pub qr_integral_drift: f64,
}

impl Trajectory {
    /// Snapshot as an inclusive-grid potential (periodic wrap supplies +L).
    pub fn potential_at(&self, snapshot: usize) -> Result<LinePotential> {
        let (q, r) = &self.snapshots[snapshot];
        let mut qi = q.clone();
        let mut ri = r.clone();
        qi.push(q[0]);
        ri.push(r[0]);
        LinePotential::from_samples(self.config.l, qi, ri, self.config.boundary_guard * 10.0)
    }

    pub fn final_snapshot(&self) -> usize {
        self.snapshots.len() - 1
    }
}

pub struct Evolver {
    config: EvolutionConfig,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// Signed wavenumbers xi_m in FFT ordering.
    xi: Vec<f64>,
    /// exp(-i xi^2 dt/2) for q (conjugate applies to r).
    half_linear_q: Vec<C64>,
}

impl Evolver {
    pub fn new(config: EvolutionConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let xi: Vec<f64> = (0..n)
            .map(|m| {
                let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                std::f64::consts::PI * signed / config.l
            })
            .collect();
        let half_linear_q: Vec<C64> = xi
            .iter()
            .map(|&x| (-Complex64::new(0.0, 1.0) * x * x * (config.dt / 2.0)).exp())
            .collect();
        Ok(Evolver { config, fft, ifft, xi, half_linear_q })
    }

    fn to_spectrum(&self, field: &mut [C64]) {
        self.fft.process(field);
    }

    fn to_physical(&self, field: &mut [C64]) {
        self.ifft.process(field);
        let scale = 1.0 / self.config.n as f64;
        for v in field.iter_mut() {
            *v *= scale;
        }
    }

    fn apply_half_linear(&self, q_hat: &mut [C64], r_hat: &mut [C64]) {
        for ((qv, rv), mult) in q_hat.iter_mut().zip(r_hat.iter_mut()).zip(&self.half_linear_q) {
            *qv *= mult;
            *rv *= mult.conj();
        }
    }

    fn apply_dealias(&self, q_hat: &mut [C64], r_hat: &mut [C64]) {
        let n = self.config.n;
        let cut = n / 3;
        for m in 0..n {
            let signed = if m <= n / 2 { m } else { n - m };
            if signed > cut {
                q_hat[m] = C64::new(0.0, 0.0);
                r_hat[m] = C64::new(0.0, 0.0);
            }
        }
    }

    /// Exact nonlinear substep: q *= exp(-2 i q r dt), r *= exp(+2 i q r dt).
    fn apply_nonlinear(&self, q: &mut [C64], r: &mut [C64], dt: f64) {
        for (qv, rv) in q.iter_mut().zip(r.iter_mut()) {
            let m = *qv * *rv;
            let rot = (-2.0 * Complex64::new(0.0, 1.0) * m * dt).exp();
            *qv *= rot;
            *rv /= rot;
        }
    }

    /// Trace values at x = 0 (grid index n/2) from the spectrum:
    /// f(0) = (1/N) sum f_hat_m (-1)^m, f'(0) = (1/N) sum i xi_m f_hat_m (-1)^m.
    fn trace_from_spectrum(&self, f_hat: &[C64]) -> (C64, C64) {
        let n = self.config.n as f64;
        let mut value = C64::new(0.0, 0.0);
        let mut deriv = C64::new(0.0, 0.0);
        for (m, (v, &xi)) in f_hat.iter().zip(self.xi.iter()).enumerate() {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            value += v * sign;
            deriv += Complex64::new(0.0, xi) * v * sign;
        }
        (value / n, deriv / n)
    }

    /// One Strang step in place; fields enter and leave in physical space.
    pub fn step(&self, q: &mut Vec<C64>, r: &mut Vec<C64>) {
        self.to_spectrum(q);
        self.to_spectrum(r);
        self.apply_half_linear(q, r);
        self.to_physical(q);
        self.to_physical(r);
        self.apply_nonlinear(q, r, self.config.dt);
        self.to_spectrum(q);
        self.to_spectrum(r);
        if self.config.dealias {
            self.apply_dealias(q, r);
        }
        self.apply_half_linear(q, r);
        self.to_physical(q);
        self.to_physical(r);
    }

    pub fn evolve(&self, q0: &[C64], r0: &[C64]) -> Result<Trajectory> {
        let n = self.config.n;
        if q0.len() != n || r0.len() != n {
            return Err(Error::LengthMismatch {
                what: "oracle initial data",
                got: q0.len().min(r0.len()),
                expected: n,
            });
        }
        let dx = 2.0 * self.config.l / n as f64;
        let steps = self.config.steps();
        let mut q = q0.to_vec();
        let mut r = r0.to_vec();

        let qr0: C64 = q.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<C64>() * dx;
        let initial_sup = sup_norm(&q).max(sup_norm(&r)).max(1e-300);

        let mut traj = Trajectory {
            config: self.config.clone(),
            traces: Vec::with_capacity(steps + 1),
            snapshot_times: Vec::new(),
            snapshots: Vec::new(),
            qr_integral_drift: 0.0,
        };

        let record_snapshot = |traj: &mut Trajectory, t: f64, q: &[C64], r: &[C64]| {
            traj.snapshot_times.push(t);
            traj.snapshots.push((q.to_vec(), r.to_vec()));
        };

        self.record_trace(&mut traj, 0.0, &q, &r);
        record_snapshot(&mut traj, 0.0, &q, &r);

        for step in 1..=steps {
            self.step(&mut q, &mut r);
            let t = step as f64 * self.config.dt;

            let sup = sup_norm(&q).max(sup_norm(&r));
            if !sup.is_finite() || sup > 50.0 * initial_sup {
                return Err(Error::EvolutionUnstable {
                    t,
                    reason: format!("sup norm grew to {:.3e}", sup),
                });
            }
            let edge = q[0].norm().max(r[0].norm());
            if edge > self.config.boundary_guard {
                return Err(Error::EvolutionUnstable {
                    t,
                    reason: format!(
                        "field magnitude {:.3e} at x = -L exceeds the boundary guard {:.3e}",
                        edge, self.config.boundary_guard
                    ),
                });
            }

            self.record_trace(&mut traj, t, &q, &r);
            let qr: C64 = q.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<C64>() * dx;
            traj.qr_integral_drift = traj.qr_integral_drift.max((qr - qr0).norm());

            let want_snapshot = (self.config.snapshot_every != 0
                && step % self.config.snapshot_every == 0)
                || step == steps;
            if want_snapshot {
                record_snapshot(&mut traj, t, &q, &r);
            }
        }
        Ok(traj)
    }

    fn record_trace(&self, traj: &mut Trajectory, t: f64, q: &[C64], r: &[C64]) {
        let mut q_hat = q.to_vec();
        let mut r_hat = r.to_vec();
        self.to_spectrum(&mut q_hat);
        self.to_spectrum(&mut r_hat);
        let (q0, qx0) = self.trace_from_spectrum(&q_hat);
        let (r0, rx0) = self.trace_from_spectrum(&r_hat);
        traj.traces.push(BoundaryTrace { t, q0, qx0, r0, rx0 });
    }

    /// Periodic grid points x_j = -L + j dx.
    pub fn grid(&self) -> Vec<f64> {
        let dx = 2.0 * self.config.l / self.config.n as f64;
        (0..self.config.n).map(|j| -self.config.l + j as f64 * dx).collect()
    }
}

fn sup_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Sup-norm of the reduction residual r(x) - eps * conj(q(.)) along a
/// trajectory (dynamical persistence of the reduction).
pub fn reduction_persistence(traj: &Trajectory, kind: ReductionKind, eps: f64) -> f64 {
    let mut worst = 0.0f64;
    for (q, r) in &traj.snapshots {
        let expected = specialize(kind, eps, q);
        for (rv, ev) in r.iter().zip(expected.iter()) {
            worst = worst.max((rv - ev).norm());
        }
    }
    worst
}
