//! Square integer matrices and elements of `SL(n, Z)`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Mul;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::exact::{dot, ProjHyperplane, ProjPoint};
use crate::{Error, Result};

/// Row-major `n × n` integer matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    n: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zero(n: usize) -> Self {
        IntMatrix {
            n,
            data: vec![BigInt::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<BigInt>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            data.extend(r.iter().cloned());
        }
        Ok(IntMatrix { n, data })
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Result<Self> {
        let rows: Vec<Vec<BigInt>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// `v · fᵀ` scaled by `c`.
    pub fn outer(v: &[BigInt], f: &[BigInt], c: &BigInt) -> Self {
        let n = v.len();
        let mut data = Vec::with_capacity(n * n);
        for a in v {
            let ca = c * a;
            for b in f {
                data.push(&ca * b);
            }
        }
        IntMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: BigInt) {
        self.data[i * self.n + j] = x;
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.n).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| *self.get(i, j) == BigInt::from((i == j) as u8)))
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        IntMatrix { n: self.n, data }
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        IntMatrix { n: self.n, data }
    }

    pub fn minus_identity(&self) -> IntMatrix {
        self.sub(&IntMatrix::identity(self.n))
    }

    pub fn mul_mat(&self, other: &IntMatrix) -> IntMatrix {
        let n = self.n;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = BigInt::zero();
                for k in 0..n {
                    let a = self.get(i, k);
                    if a.is_zero() {
                        continue;
                    }
                    acc += a * other.get(k, j);
                }
                data.push(acc);
            }
        }
        IntMatrix { n, data }
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, f: &[BigInt]) -> Vec<BigInt> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| &f[i] * self.get(i, j)).sum())
            .collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let n = self.n;
        let mut m = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                m.set(j, i, self.get(i, j).clone());
            }
        }
        m
    }

    pub fn pow_u(&self, mut e: u64) -> IntMatrix {
        let mut base = self.clone();
        let mut acc = IntMatrix::identity(self.n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_mat(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_mat(&base);
            }
        }
        acc
    }

    /// Fraction-free (Bareiss) determinant.
    pub fn det(&self) -> BigInt {
        let n = self.n;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.data.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k * n + k].is_zero() {
                let Some(r) = (k + 1..n).find(|&r| !a[r * n + k].is_zero()) else {
                    return BigInt::zero();
                };
                for j in 0..n {
                    a.swap(k * n + j, r * n + j);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j]) / &prev;
                    a[i * n + j] = v;
                }
            }
            prev = a[k * n + k].clone();
        }
        sign * &a[n * n - 1]
    }

    /// Rank over `Q`.
    pub fn rank(&self) -> usize {
        let n = self.n;
        let mut a: Vec<BigRational> = self
            .data
            .iter()
            .map(|x| BigRational::from_integer(x.clone()))
            .collect();
        let mut rank = 0;
        for col in 0..n {
            let Some(p) = (rank..n).find(|&r| !a[r * n + col].is_zero()) else {
                continue;
            };
            for j in 0..n {
                a.swap(rank * n + j, p * n + j);
            }
            for r in 0..n {
                if r != rank && !a[r * n + col].is_zero() {
                    let factor = &a[r * n + col] / &a[rank * n + col];
                    for j in col..n {
                        let t = &factor * &a[rank * n + j];
                        a[r * n + j] -= t;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Exact inverse over `Q`; `None` when singular.
    pub fn inverse_rational(&self) -> Option<Vec<BigRational>> {
        let n = self.n;
        let w = 2 * n;
        let mut a: Vec<BigRational> = vec![BigRational::zero(); n * w];
        for i in 0..n {
            for j in 0..n {
                a[i * w + j] = BigRational::from_integer(self.get(i, j).clone());
            }
            a[i * w + n + i] = BigRational::one();
        }
        for col in 0..n {
            let p = (col..n).find(|&r| !a[r * w + col].is_zero())?;
            for j in 0..w {
                a.swap(col * w + j, p * w + j);
            }
            let piv = a[col * w + col].clone();
            for j in 0..w {
                a[col * w + j] = &a[col * w + j] / &piv;
            }
            for r in 0..n {
                if r != col && !a[r * w + col].is_zero() {
                    let factor = a[r * w + col].clone();
                    for j in 0..w {
                        let t = &factor * &a[col * w + j];
                        a[r * w + j] -= t;
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(a[i * w + n + j].clone());
            }
        }
        Some(out)
    }

    /// Squared Frobenius norm.
    pub fn frobenius2(&self) -> BigInt {
        self.data.iter().map(|x| x * x).sum()
    }

    /// The matrix is a rational multiple `c · other`; returns `c`.
    pub fn proportional_to(&self, other: &IntMatrix) -> Option<BigRational> {
        let pivot = other.data.iter().position(|x| !x.is_zero())?;
        let c = BigRational::new(self.data[pivot].clone(), other.data[pivot].clone());
        let ok = self.data.iter().zip(&other.data).all(|(a, b)| {
            BigRational::from_integer(a.clone()) == &c * BigRational::from_integer(b.clone())
        });
        ok.then_some(c)
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, ";")?;
            }
            for j in 0..self.n {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        write!(f, ")")
    }
}

/// An element of `SL(n, Z)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement(IntMatrix);

impl GroupElement {
    pub fn new(m: IntMatrix) -> Result<Self> {
        if m.det() != BigInt::one() {
            return Err(Error::NotUnimodular);
        }
        Ok(GroupElement(m))
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Result<Self> {
        Self::new(IntMatrix::from_i64_rows(rows)?)
    }

    pub(crate) fn new_unchecked(m: IntMatrix) -> Self {
        debug_assert_eq!(m.det(), BigInt::one());
        GroupElement(m)
    }

    pub fn identity(n: usize) -> Self {
        GroupElement(IntMatrix::identity(n))
    }

    /// `I + c·E_{ij}` (0-based indices, `i ≠ j`).
    pub fn elementary(n: usize, i: usize, j: usize, c: BigInt) -> Self {
        assert!(i != j && i < n && j < n);
        let mut m = IntMatrix::identity(n);
        m.set(i, j, c);
        GroupElement(m)
    }

    /// All `n² - n` elementary matrices `e_{i,j}` in row-major order of `(i, j)`.
    pub fn all_elementary(n: usize) -> Vec<(usize, usize, GroupElement)> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out.push((i, j, Self::elementary(n, i, j, BigInt::one())));
                }
            }
        }
        out
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> IntMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_identity()
    }

    pub fn inverse(&self) -> GroupElement {
        let inv = self
            .0
            .inverse_rational()
            .expect("unimodular matrices are invertible");
        let data: Vec<BigInt> = inv
            .into_iter()
            .map(|x| {
                debug_assert!(x.is_integer());
                x.to_integer()
            })
            .collect();
        GroupElement(IntMatrix {
            n: self.dim(),
            data,
        })
    }

    pub fn pow(&self, e: i64) -> GroupElement {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        GroupElement(base.0.pow_u(e.unsigned_abs()))
    }

    pub fn pow_big(&self, e: &BigInt) -> GroupElement {
        let base = if e.is_negative() {
            self.inverse()
        } else {
            self.clone()
        };
        let mut acc = IntMatrix::identity(self.dim());
        let mut b = base.0;
        let mut k = e.abs();
        while !k.is_zero() {
            if k.is_odd() {
                acc = acc.mul_mat(&b);
            }
            k >>= 1usize;
            if !k.is_zero() {
                b = b.mul_mat(&b);
            }
        }
        GroupElement(acc)
    }

    pub fn conj(&self, x: &GroupElement) -> GroupElement {
        self * &(x * &self.inverse())
    }

    pub fn apply_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        self.0.mul_vec(v)
    }

    pub fn apply_point(&self, p: &ProjPoint) -> ProjPoint {
        ProjPoint::new(&self.0.mul_vec(p.coords())).expect("invertible image of a nonzero vector")
    }

    /// `g · P(ker f) = P(ker(f g⁻¹))`.
    pub fn apply_hyperplane(&self, l: &ProjHyperplane) -> ProjHyperplane {
        self.apply_hyperplane_with(&self.inverse(), l)
    }

    pub fn apply_hyperplane_with(&self, inv: &GroupElement, l: &ProjHyperplane) -> ProjHyperplane {
        ProjHyperplane::new(&inv.0.vec_mul(l.covector()))
            .expect("invertible image of a nonzero covector")
    }

    /// Squared Lipschitz bound of the projective action in the sine metric:
    /// `sin∠(gx, gy) ≤ ‖g‖²‖g⁻¹‖² sin∠(x, y)`, with Frobenius norms bounding
    /// the operator norms.
    pub fn lipschitz2_bound(&self) -> BigInt {
        let a = self.0.frobenius2();
        let b = self.inverse().0.frobenius2();
        &a * &a * &b * &b
    }

    pub fn is_signed_permutation(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            let row = self.0.row(i);
            row.iter().filter(|x| !x.is_zero()).count() == 1
                && row.iter().all(|x| x.abs() <= BigInt::one())
        }) && (0..n).all(|j| (0..n).filter(|&i| !self.0.get(i, j).is_zero()).count() == 1)
    }
}

impl<'a> Mul<&'a GroupElement> for &'a GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &'a GroupElement) -> GroupElement {
        GroupElement(self.0.mul_mat(&rhs.0))
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
