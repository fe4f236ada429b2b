//! Fixed-size complex matrix kernels (2x2 and 4x4) and the constant
//! matrices shared by every other module.
//!
//! All quantities in this crate live in these two sizes, so the kernels are
//! closed-form and allocation-free. Inversion is guarded by a condition
//! estimate: near-singular scattering coefficients must surface as errors,
//! never as silently amplified noise.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Condition-number threshold above which inversion is refused.
pub const INVERSION_COND_LIMIT: f64 = 1e12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// 2x2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat2(pub [C64; 4]);

/// 4x4 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat4(pub [C64; 16]);

/// The four 2x2 blocks of a 4x4 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block4 {
    pub tl: CMat2,
    pub tr: CMat2,
    pub bl: CMat2,
    pub br: CMat2,
}

impl CMat2 {
    pub const fn zero() -> Self {
        CMat2([ZERO; 4])
    }

    pub const fn identity() -> Self {
        CMat2([ONE, ZERO, ZERO, ONE])
    }

    pub fn diag(a: C64, b: C64) -> Self {
        CMat2([a, ZERO, ZERO, b])
    }

    /// Pauli matrix sigma_z = diag(1, -1).
    pub fn pauli_z() -> Self {
        Self::diag(ONE, -ONE)
    }

    /// The swap matrix [[0,1],[1,0]].
    pub fn swap() -> Self {
        CMat2([ZERO, ONE, ONE, ZERO])
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> C64 {
        self.0[2 * r + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.0[2 * r + c] = v;
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for v in out.0.iter_mut() {
            *v *= s;
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        CMat2([
            self.0[0].conj(),
            self.0[2].conj(),
            self.0[1].conj(),
            self.0[3].conj(),
        ])
    }

    pub fn det(&self) -> C64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn trace(&self) -> C64 {
        self.0[0] + self.0[3]
    }

    /// Largest/smallest singular value via the closed form for 2x2.
    pub fn cond(&self) -> f64 {
        // Singular values from the eigenvalues of A^H A.
        let a = self.dagger() * *self;
        let t = a.trace().re;
        let d = a.det().re.max(0.0);
        let disc = (t * t / 4.0 - d).max(0.0).sqrt();
        let s_max = (t / 2.0 + disc).max(0.0).sqrt();
        let s_min = (t / 2.0 - disc).max(0.0).sqrt();
        if s_min == 0.0 {
            f64::INFINITY
        } else {
            s_max / s_min
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        let cond = self.cond();
        if !cond.is_finite() || cond > INVERSION_COND_LIMIT {
            return Err(Error::SingularMatrix { cond });
        }
        let det = self.det();
        Ok(CMat2([
            self.0[3] / det,
            -self.0[1] / det,
            -self.0[2] / det,
            self.0[0] / det,
        ]))
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest off-diagonal magnitude; zero for diagonal matrices.
    pub fn off_diagonal_max(&self) -> f64 {
        self.0[1].norm().max(self.0[2].norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl CMat4 {
    pub const fn zero() -> Self {
        CMat4([ZERO; 16])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.set(i, i, ONE);
        }
        m
    }

    pub fn diag(d: [C64; 4]) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.set(i, i, d[i]);
        }
        m
    }

    /// Sigma_3 = diag(1, 1, -1, -1): the block signature of the Lax pair.
    pub fn block_signature() -> Self {
        Self::diag([ONE, ONE, -ONE, -ONE])
    }

    /// 1 (x) sigma_3 = diag(1, -1, 1, -1): signature within each block.
    pub fn component_signature() -> Self {
        Self::diag([ONE, -ONE, ONE, -ONE])
    }

    /// Sigma = 1 (x) sigma: swaps the two components inside each block.
    pub fn component_swap() -> Self {
        Block4 {
            tl: CMat2::swap(),
            tr: CMat2::zero(),
            bl: CMat2::zero(),
            br: CMat2::swap(),
        }
        .assemble()
    }

    /// I_3 = diag(sigma_3, 1) = diag(1, -1, 1, 1).
    pub fn flip_second() -> Self {
        Self::diag([ONE, -ONE, ONE, ONE])
    }

    /// Unit matrix E_{rc} with a single 1 at (r, c).
    pub fn unit(r: usize, c: usize) -> Self {
        let mut m = Self::zero();
        m.set(r, c, ONE);
        m
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> C64 {
        self.0[4 * r + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.0[4 * r + c] = v;
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for v in out.0.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zero();
        for r in 0..4 {
            for c in 0..4 {
                out.set(r, c, self.at(c, r).conj());
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zero();
        for r in 0..4 {
            for c in 0..4 {
                out.set(r, c, self.at(c, r));
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        self.at(0, 0) + self.at(1, 1) + self.at(2, 2) + self.at(3, 3)
    }

    /// Determinant by cofactor expansion over the first row.
    pub fn det(&self) -> C64 {
        let m = |r: usize, c: usize| self.at(r, c);
        let minor = |rows: [usize; 3], cols: [usize; 3]| -> C64 {
            m(rows[0], cols[0]) * (m(rows[1], cols[1]) * m(rows[2], cols[2])
                - m(rows[1], cols[2]) * m(rows[2], cols[1]))
                - m(rows[0], cols[1])
                    * (m(rows[1], cols[0]) * m(rows[2], cols[2])
                        - m(rows[1], cols[2]) * m(rows[2], cols[0]))
                + m(rows[0], cols[2])
                    * (m(rows[1], cols[0]) * m(rows[2], cols[1])
                        - m(rows[1], cols[1]) * m(rows[2], cols[0]))
        };
        let r = [1, 2, 3];
        m(0, 0) * minor(r, [1, 2, 3]) - m(0, 1) * minor(r, [0, 2, 3])
            + m(0, 2) * minor(r, [0, 1, 3])
            - m(0, 3) * minor(r, [0, 1, 2])
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Gauss-Jordan inverse with partial pivoting, guarded by a condition
    /// estimate (power iteration on A^H A and its inverse).
    pub fn inverse(&self) -> Result<Self> {
        let cond = self.cond_estimate();
        if !cond.is_finite() || cond > INVERSION_COND_LIMIT {
            return Err(Error::SingularMatrix { cond });
        }
        self.inverse_unguarded()
    }

    fn inverse_unguarded(&self) -> Result<Self> {
        let mut a = *self;
        let mut inv = Self::identity();
        for col in 0..4 {
            let mut pivot = col;
            let mut best = a.at(col, col).norm();
            for r in (col + 1)..4 {
                let v = a.at(r, col).norm();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix { cond: f64::INFINITY });
            }
            if pivot != col {
                for c in 0..4 {
                    let (x, y) = (a.at(col, c), a.at(pivot, c));
                    a.set(col, c, y);
                    a.set(pivot, c, x);
                    let (x, y) = (inv.at(col, c), inv.at(pivot, c));
                    inv.set(col, c, y);
                    inv.set(pivot, c, x);
                }
            }
            let p = a.at(col, col);
            for c in 0..4 {
                a.set(col, c, a.at(col, c) / p);
                inv.set(col, c, inv.at(col, c) / p);
            }
            for r in 0..4 {
                if r == col {
                    continue;
                }
                let f = a.at(r, col);
                if f == ZERO {
                    continue;
                }
                for c in 0..4 {
                    let av = a.at(r, c) - f * a.at(col, c);
                    a.set(r, c, av);
                    let iv = inv.at(r, c) - f * inv.at(col, c);
                    inv.set(r, c, iv);
                }
            }
        }
        Ok(inv)
    }

    /// Condition estimate sigma_max/sigma_min via power iteration on A^H A.
    pub fn cond_estimate(&self) -> f64 {
        let h = self.dagger() * *self;
        let smax_sq = h.dominant_eigen_estimate();
        if smax_sq <= 0.0 {
            return f64::INFINITY;
        }
        // Smallest singular value from the inverse when it exists.
        match self.inverse_unguarded() {
            Ok(inv) => {
                let hi = inv.dagger() * inv;
                let inv_smin_sq = hi.dominant_eigen_estimate();
                if inv_smin_sq <= 0.0 {
                    return f64::INFINITY;
                }
                (smax_sq * inv_smin_sq).sqrt()
            }
            Err(_) => f64::INFINITY,
        }
    }

    /// Power iteration for the dominant eigenvalue of a Hermitian PSD matrix.
    fn dominant_eigen_estimate(&self) -> f64 {
        let mut v = [ONE, C64::new(0.7, 0.3), C64::new(-0.4, 0.9), C64::new(0.2, -0.6)];
        let mut lambda = 0.0;
        for _ in 0..40 {
            let mut w = [ZERO; 4];
            for (r, wr) in w.iter_mut().enumerate() {
                for (c, vc) in v.iter().enumerate() {
                    *wr += self.at(r, c) * vc;
                }
            }
            let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for x in w.iter_mut() {
                *x /= norm;
            }
            lambda = norm;
            v = w;
        }
        lambda
    }

    /// Split into 2x2 blocks.
    pub fn blocks(&self) -> Block4 {
        let sub = |r0: usize, c0: usize| {
            CMat2([
                self.at(r0, c0),
                self.at(r0, c0 + 1),
                self.at(r0 + 1, c0),
                self.at(r0 + 1, c0 + 1),
            ])
        };
        Block4 {
            tl: sub(0, 0),
            tr: sub(0, 2),
            bl: sub(2, 0),
            br: sub(2, 2),
        }
    }
}

impl Block4 {
    pub fn assemble(&self) -> CMat4 {
        let mut m = CMat4::zero();
        let put = |m: &mut CMat4, b: &CMat2, r0: usize, c0: usize| {
            m.set(r0, c0, b.at(0, 0));
            m.set(r0, c0 + 1, b.at(0, 1));
            m.set(r0 + 1, c0, b.at(1, 0));
            m.set(r0 + 1, c0 + 1, b.at(1, 1));
        };
        put(&mut m, &self.tl, 0, 0);
        put(&mut m, &self.tr, 0, 2);
        put(&mut m, &self.bl, 2, 0);
        put(&mut m, &self.br, 2, 2);
        m
    }

    /// Largest off-diagonal magnitude over all four blocks.
    pub fn off_diagonal_max(&self) -> f64 {
        self.tl
            .off_diagonal_max()
            .max(self.tr.off_diagonal_max())
            .max(self.bl.off_diagonal_max())
            .max(self.br.off_diagonal_max())
    }
}

/// Commutator AB - BA.
pub fn commutator(a: &CMat4, b: &CMat4) -> CMat4 {
    *a * *b - *b * *a
}

macro_rules! impl_matrix_ops {
    ($ty:ty, $n:expr, $len:expr) => {
        impl std::ops::Add for $ty {
            type Output = $ty;
            fn add(self, rhs: $ty) -> $ty {
                let mut out = self;
                for (o, r) in out.0.iter_mut().zip(rhs.0.iter()) {
                    *o += *r;
                }
                out
            }
        }

        impl std::ops::Sub for $ty {
            type Output = $ty;
            fn sub(self, rhs: $ty) -> $ty {
                let mut out = self;
                for (o, r) in out.0.iter_mut().zip(rhs.0.iter()) {
                    *o -= *r;
                }
                out
            }
        }

        impl std::ops::Neg for $ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                let mut out = self;
                for o in out.0.iter_mut() {
                    *o = -*o;
                }
                out
            }
        }

        impl std::ops::Mul for $ty {
            type Output = $ty;
            fn mul(self, rhs: $ty) -> $ty {
                let mut out = <$ty>::zero();
                for r in 0..$n {
                    for k in 0..$n {
                        let a = self.0[$n * r + k];
                        if a == ZERO {
                            continue;
                        }
                        for c in 0..$n {
                            out.0[$n * r + c] += a * rhs.0[$n * k + c];
                        }
                    }
                }
                out
            }
        }
    };
}

impl_matrix_ops!(CMat2, 2, 4);
impl_matrix_ops!(CMat4, 4, 16);
