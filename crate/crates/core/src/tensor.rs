//! Dense 3×3 and 3×3×3×3 tensor algebra.
//!
//! Second-order tensors are row-major `[[f64; 3]; 3]`. Fourth-order tensors are
//! flat 81-component arrays addressed through [`Tensor4::index`], with no
//! symmetry compression. The double contraction `:` always contracts the last
//! two indices of the left operand with the first two of the right operand.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor2(pub [[f64; 3]; 3]);

impl Default for Tensor2 {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Tensor2 {
    pub const fn zeros() -> Self {
        Tensor2([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Tensor2([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Tensor2([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    /// Dyadic product `u ⊗ v`.
    pub fn outer(u: [f64; 3], v: [f64; 3]) -> Self {
        Self(u.map(|ui| v.map(|vj| ui * vj)))
    }

    /// Rotation by `angle` (radians) about the z axis.
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Tensor2([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if !d.is_finite() || d.abs() < 1e-300 {
            return Err(Error::kinematics(format!("singular tensor (det = {d:e})")));
        }
        let m = &self.0;
        let mut inv = Self::zeros();
        inv.0[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        inv.0[0][1] = m[0][2] * m[2][1] - m[0][1] * m[2][2];
        inv.0[0][2] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
        inv.0[1][0] = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        inv.0[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
        inv.0[1][2] = m[0][2] * m[1][0] - m[0][0] * m[1][2];
        inv.0[2][0] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        inv.0[2][1] = m[0][1] * m[2][0] - m[0][0] * m[2][1];
        inv.0[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        Ok(inv * (1.0 / d))
    }

    /// `A : B = A_ij B_ij`.
    pub fn ddot(&self, other: &Tensor2) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    /// `A : 𝔹`, i.e. `(A : 𝔹)_kl = A_ij 𝔹_ijkl`.
    pub fn ddot4(&self, b: &Tensor4) -> Tensor2 {
        let mut out = Tensor2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let a = self.0[i][j];
                if a == 0.0 {
                    continue;
                }
                for k in 0..3 {
                    for l in 0..3 {
                        out.0[k][l] += a * b[(i, j, k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i][0] * v[0] + self.0[i][1] * v[1] + self.0[i][2] * v[2];
        }
        out
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn sym(&self) -> Self {
        (*self + self.transpose()) * 0.5
    }

    /// Max-norm of the entries.
    pub fn norm_inf(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flat_map(|r| r.iter()).all(|v| v.is_finite())
    }

    /// `A · B · Aᵀ`.
    pub fn congruence(&self, b: &Tensor2) -> Tensor2 {
        *self * *b * self.transpose()
    }

    fn to_matrix(self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.0[i][j])
    }

    fn from_matrix(m: &Matrix3<f64>) -> Self {
        let mut t = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = m[(i, j)];
            }
        }
        t
    }
}

impl Index<(usize, usize)> for Tensor2 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Tensor2 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(mut self, rhs: Tensor2) -> Tensor2 {
        self += rhs;
        self
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, rhs: Tensor2) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(mut self, rhs: Tensor2) -> Tensor2 {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self * -1.0
    }
}

impl Mul for Tensor2 {
    type Output = Tensor2;
    fn mul(self, rhs: Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[i][0] * rhs.0[0][j]
                    + self.0[i][1] * rhs.0[1][j]
                    + self.0[i][2] * rhs.0[2][j];
            }
        }
        out
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(mut self, rhs: f64) -> Tensor2 {
        for row in self.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= rhs;
            }
        }
        self
    }
}

impl Mul<Tensor2> for f64 {
    type Output = Tensor2;
    fn mul(self, rhs: Tensor2) -> Tensor2 {
        rhs * self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4(pub [f64; 81]);

impl Default for Tensor4 {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Tensor4 {
    pub const fn zeros() -> Self {
        Tensor4([0.0; 81])
    }

    #[inline]
    pub const fn index(i: usize, j: usize, k: usize, l: usize) -> usize {
        27 * i + 9 * j + 3 * k + l
    }

    /// Mixed dyadic product `(A ⊙ B)_ijkl = A_ik B_jl`.
    pub fn mixed_dyadic(a: &Tensor2, b: &Tensor2) -> Self {
        let mut t = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        t.0[Self::index(i, j, k, l)] = a.0[i][k] * b.0[j][l];
                    }
                }
            }
        }
        t
    }

    /// Dyadic product `(A ⊗ B)_ijkl = A_ij B_kl`.
    pub fn dyad(a: &Tensor2, b: &Tensor2) -> Self {
        let mut t = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        t.0[Self::index(i, j, k, l)] = a.0[i][j] * b.0[k][l];
                    }
                }
            }
        }
        t
    }

    /// `𝔸 : B`, i.e. `(𝔸 : B)_ij = 𝔸_ijkl B_kl`.
    pub fn ddot2(&self, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.0[Self::index(i, j, k, l)] * b.0[k][l];
                    }
                }
                out.0[i][j] = s;
            }
        }
        out
    }

    /// `(𝔸 : 𝔹)_ijkl = 𝔸_ijmn 𝔹_mnkl`.
    pub fn ddot4(&self, b: &Tensor4) -> Tensor4 {
        let mut out = Tensor4::zeros();
        for ij in 0..9 {
            for mn in 0..9 {
                let a = self.0[9 * ij + mn];
                if a == 0.0 {
                    continue;
                }
                for kl in 0..9 {
                    out.0[9 * ij + kl] += a * b.0[9 * mn + kl];
                }
            }
        }
        out
    }

    /// Adds `w · (A ⊗ A)` in place.
    pub fn add_scaled_dyad(&mut self, w: f64, a: &Tensor2) {
        for ij in 0..9 {
            let aij = a.0[ij / 3][ij % 3] * w;
            if aij == 0.0 {
                continue;
            }
            for kl in 0..9 {
                self.0[9 * ij + kl] += aij * a.0[kl / 3][kl % 3];
            }
        }
    }

    pub fn scale(&mut self, w: f64) {
        for v in self.0.iter_mut() {
            *v *= w;
        }
    }

    pub fn add_scaled(&mut self, w: f64, other: &Tensor4) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += w * b;
        }
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest violation of the minor symmetries, relative to the max entry.
    pub fn minor_symmetry_defect(&self) -> f64 {
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = self[(i, j, k, l)];
                        worst = worst
                            .max((v - self[(j, i, k, l)]).abs())
                            .max((v - self[(i, j, l, k)]).abs());
                    }
                }
            }
        }
        worst / scale
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &f64 {
        &self.0[Tensor4::index(i, j, k, l)]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.0[Tensor4::index(i, j, k, l)]
    }
}

/// Rotation factor `R` of the polar decomposition `F = R·U`.
///
/// `U = √(FᵀF)` comes from the eigendecomposition of `FᵀF`, then `R = F·U⁻¹`.
pub fn polar_rotation(f: &Tensor2) -> Result<Tensor2> {
    let det = f.det();
    if !(det.is_finite() && det > 0.0) {
        return Err(Error::kinematics(format!(
            "deformation gradient must have det > 0 (det = {det:e})"
        )));
    }
    let c = (f.transpose() * *f).to_matrix();
    let eig = SymmetricEigen::new(c);
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::kinematics("FᵀF is not positive definite"));
    }
    let q = eig.eigenvectors;
    let inv_sqrt = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let u_inv = q * inv_sqrt * q.transpose();
    let mut r = Tensor2::from_matrix(&(f.to_matrix() * u_inv));
    // Eigenvectors lose orthogonality when two stretches nearly coincide;
    // Newton steps R ← ½(R + R⁻ᵀ) restore it to round-off.
    for _ in 0..3 {
        let next = (r + r.inverse()?.transpose()) * 0.5;
        let change = (next - r).norm_inf();
        r = next;
        if change < 1e-15 {
            break;
        }
    }
    Ok(r)
}

/// Cauchy stress `σ = (1/J)·F·S·Fᵀ` from a second Piola–Kirchhoff stress.
pub fn pushforward_stress(f: &Tensor2, s: &Tensor2, j: f64) -> Result<Tensor2> {
    if !(j > 0.0) {
        return Err(Error::kinematics(format!("J must be positive (J = {j:e})")));
    }
    Ok(f.congruence(s) * (1.0 / j))
}

/// Inverse of [`pushforward_stress`]: `S = J·F⁻¹·σ·F⁻ᵀ`.
pub fn pullback_stress(f: &Tensor2, sigma: &Tensor2, j: f64) -> Result<Tensor2> {
    if !(j > 0.0) {
        return Err(Error::kinematics(format!("J must be positive (J = {j:e})")));
    }
    let finv = f.inverse()?;
    Ok(finv.congruence(sigma) * j)
}

/// Spatial elasticity `𝐜 = (1/J)(F⊙F) : 𝐂 : (Fᵀ⊙Fᵀ)`.
///
/// Evaluated as `c_ijkl = F_iI F_jJ F_kK F_lL C_IJKL / J` in four passes
/// of 3×81 work each instead of two dense 81×81 products.
pub fn pushforward_elasticity(f: &Tensor2, c4: &Tensor4, j: f64) -> Result<Tensor4> {
    if !(j > 0.0) {
        return Err(Error::kinematics(format!("J must be positive (J = {j:e})")));
    }
    let mut a = c4.clone();
    for slot in 0..4 {
        let mut b = Tensor4::zeros();
        for i in 0..3 {
            for j2 in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut s = 0.0;
                        for m in 0..3 {
                            let (src, fv) = match slot {
                                0 => (Tensor4::index(m, j2, k, l), f.0[i][m]),
                                1 => (Tensor4::index(i, m, k, l), f.0[j2][m]),
                                2 => (Tensor4::index(i, j2, m, l), f.0[k][m]),
                                _ => (Tensor4::index(i, j2, k, m), f.0[l][m]),
                            };
                            s += fv * a.0[src];
                        }
                        b.0[Tensor4::index(i, j2, k, l)] = s;
                    }
                }
            }
        }
        a = b;
    }
    a.scale(1.0 / j);
    Ok(a)
}
