//! Rank-1 unipotent elements `u = I + m·v·fᵀ` with `f·v = 0`.
//!
//! `p_u = [v]` is the point of attraction and `L_u = P(ker f)` the fixed
//! hyperplane. Powers only change `m`, so attraction data is preserved.

use alloc::format;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::exact::{dot, norm2, primitive_part, ProjHyperplane, ProjPoint};
use crate::matrix::{GroupElement, IntMatrix};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rank1Unipotent {
    v: alloc::vec::Vec<BigInt>,
    f: alloc::vec::Vec<BigInt>,
    m: BigInt,
}

impl Rank1Unipotent {
    /// Builds `I + m·v·fᵀ` from arbitrary nonzero integer vectors, folding
    /// their contents and signs into the exponent.
    pub fn from_parts(v: &[BigInt], f: &[BigInt], m: &BigInt) -> Result<Self> {
        if v.len() != f.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                found: f.len(),
            });
        }
        if m.is_zero() {
            return Err(Error::PreconditionViolated("zero exponent".into()));
        }
        if !dot(f, v).is_zero() {
            return Err(Error::PointNotOnHyperplane);
        }
        let (pv, cv) = primitive_part(v)?;
        let (pf, cf) = primitive_part(f)?;
        Ok(Rank1Unipotent {
            v: pv,
            f: pf,
            m: m * cv * cf,
        })
    }

    /// The primitive representative of the class attached to `(p, L)`.
    pub fn from_pair(p: &ProjPoint, l: &ProjHyperplane) -> Result<Self> {
        if p.dim() != l.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: l.dim(),
            });
        }
        if !l.contains(p) {
            return Err(Error::PointNotOnHyperplane);
        }
        Ok(Rank1Unipotent {
            v: p.coords().to_vec(),
            f: l.covector().to_vec(),
            m: BigInt::one(),
        })
    }

    /// Recovers `(v, f, m)` from a matrix, if it is a rank-1 unipotent.
    pub fn from_matrix(g: &IntMatrix) -> Option<Self> {
        let n = g.minus_identity();
        if n.is_zero() || n.rank() != 1 || !n.mul_mat(&n).is_zero() {
            return None;
        }
        let i = (0..g.dim()).find(|&i| n.row(i).iter().any(|x| !x.is_zero()))?;
        let j = (0..g.dim()).find(|&j| !n.get(i, j).is_zero())?;
        let v = n.column(j);
        let f = n.row(i).to_vec();
        let (pv, cv) = primitive_part(&v).ok()?;
        let (pf, cf) = primitive_part(&f).ok()?;
        // n = m · pv · pfᵀ, so n_ij = m · pv_i · pf_j
        let denom = &pv[i] * &pf[j];
        let _ = (cv, cf);
        let m = n.get(i, j) / &denom;
        let u = Rank1Unipotent { v: pv, f: pf, m };
        (u.log() == n).then_some(u)
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn v(&self) -> &[BigInt] {
        &self.v
    }

    pub fn f(&self) -> &[BigInt] {
        &self.f
    }

    pub fn exponent(&self) -> &BigInt {
        &self.m
    }

    pub fn point(&self) -> ProjPoint {
        ProjPoint::new(&self.v).expect("primitive")
    }

    pub fn hyperplane(&self) -> ProjHyperplane {
        ProjHyperplane::new(&self.f).expect("primitive")
    }

    /// `u - I = m·v·fᵀ`.
    pub fn log(&self) -> IntMatrix {
        IntMatrix::outer(&self.v, &self.f, &self.m)
    }

    pub fn matrix(&self) -> GroupElement {
        GroupElement::new_unchecked(IntMatrix::identity(self.dim()).add(&self.log()))
    }

    /// `u^k`; `None` stands for the identity.
    pub fn power(&self, k: &BigInt) -> Option<Self> {
        if k.is_zero() {
            return None;
        }
        Some(Rank1Unipotent {
            v: self.v.clone(),
            f: self.f.clone(),
            m: &self.m * k,
        })
    }

    /// Matrix of `u^k` without repeated multiplication.
    pub fn power_matrix(&self, k: &BigInt) -> GroupElement {
        match self.power(k) {
            Some(u) => u.matrix(),
            None => GroupElement::identity(self.dim()),
        }
    }

    /// `g u g⁻¹`, with `v ↦ g v` and `f ↦ f g⁻¹`.
    pub fn conjugate(&self, g: &GroupElement) -> Self {
        let inv = g.inverse();
        let v = g.apply_vec(&self.v);
        let f = inv.matrix().vec_mul(&self.f);
        Self::from_parts(&v, &f, &self.m).expect("conjugation preserves f·v = 0")
    }

    /// `u^k x = x + k·m·(f·x)·v`.
    pub fn apply_power(&self, k: &BigInt, x: &ProjPoint) -> ProjPoint {
        let c = k * &self.m * dot(&self.f, x.coords());
        let y: alloc::vec::Vec<BigInt> = x
            .coords()
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a + &c * b)
            .collect();
        ProjPoint::new(&y).expect("u^k is invertible")
    }

    /// `⌊‖f‖·‖v‖⌋`.
    pub fn norm_floor(&self) -> BigInt {
        (norm2(&self.f) * norm2(&self.v)).sqrt()
    }
}

fn check_radii(eps2: &BigRational, del2: &BigRational) -> Result<()> {
    if !eps2.is_positive() || !del2.is_positive() {
        return Err(Error::InvalidRadii(format!(
            "radii must be positive, got ε² = {eps2}, δ² = {del2}"
        )));
    }
    if eps2 > del2 {
        return Err(Error::InvalidRadii(format!(
            "need δ ≥ ε, got ε² = {eps2} > δ² = {del2}"
        )));
    }
    Ok(())
}

/// Certificate inequality for the exponent `m`: with `s = ⌊‖f‖‖v‖⌋`,
/// every `x` with `d(x, L_u) ≥ δ` and every `k ≠ 0` satisfy
/// `d(u^{km} x, p_u) ≤ 1/(|k|·m·δ·s − 1)`, and the certificate asks for
/// `1/(m·δ·s − 1) ≤ ε`, i.e. `m·s·√δ² ≥ 1 + 1/√ε²`. The bound itself is
/// never attained, so certified points land strictly inside the ε-ball.
pub fn contraction_inequality_holds(
    m: &BigInt,
    s: &BigInt,
    eps2: &BigRational,
    del2: &BigRational,
) -> bool {
    if !eps2.is_positive() || !del2.is_positive() || !m.is_positive() {
        return false;
    }
    let ms = BigRational::from_integer(m * s);
    let inv_eps2 = eps2.recip();
    let x = &ms * &ms * del2 - BigRational::one() - &inv_eps2;
    if x.is_negative() {
        return false;
    }
    &x * &x >= BigRational::from_integer(4.into()) * inv_eps2
}

/// Smallest exponent `m ≥ 1` such that `u^m` passes [`certify_contraction`]
/// for the given squared radii. Only the class of `u` matters.
pub fn contraction_power(
    u: &Rank1Unipotent,
    eps2: &BigRational,
    del2: &BigRational,
) -> Result<BigInt> {
    check_radii(eps2, del2)?;
    let s = u.norm_floor();
    let ok = |m: &BigInt| contraction_inequality_holds(m, &s, eps2, del2);
    let one = BigInt::one();
    if ok(&one) {
        return Ok(one);
    }
    let mut lo = one;
    let mut hi = BigInt::from(2);
    while !ok(&hi) {
        lo = hi.clone();
        hi <<= 1usize;
    }
    while &hi - &lo > BigInt::one() {
        let mid: BigInt = (&lo + &hi) >> 1usize;
        if ok(&mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Sound check that `u^k(x) ∈ [p_u]_ε` for all `x ∉ (L_u)_δ`, `k ≠ 0`, using
/// the element's own exponent.
pub fn certify_contraction(u: &Rank1Unipotent, eps2: &BigRational, del2: &BigRational) -> bool {
    contraction_inequality_holds(&u.exponent().abs(), &u.norm_floor(), eps2, del2)
}
