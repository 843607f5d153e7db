//! Integer lattice tools: unimodular completion, exact transporters of
//! (point, hyperplane) pairs and lifts of residue matrices to `SL(n, Z)`.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exact::{dot, primitive_part};
use crate::matrix::{GroupElement, IntMatrix};
use crate::{Error, Result};

/// `U ∈ SL(n, Z)` with `U·v = e_0` for a primitive `v`.
pub fn reducer_of(v: &[BigInt]) -> Result<IntMatrix> {
    let n = v.len();
    let (_, c) = primitive_part(v)?;
    if !c.abs().is_one() {
        return Err(Error::PreconditionViolated(
            "vector is not primitive".into(),
        ));
    }
    let mut u = IntMatrix::identity(n);
    let mut w = v.to_vec();
    for i in (1..n).rev() {
        if w[i].is_zero() {
            continue;
        }
        let (x, y) = (w[i - 1].clone(), w[i].clone());
        let e = x.extended_gcd(&y);
        let (g, s, t) = (e.gcd, e.x, e.y);
        let (p, q) = (-(&y / &g), &x / &g);
        for j in 0..n {
            let (r0, r1) = (u.get(i - 1, j).clone(), u.get(i, j).clone());
            u.set(i - 1, j, &s * &r0 + &t * &r1);
            u.set(i, j, &p * &r0 + &q * &r1);
        }
        w[i - 1] = g;
        w[i] = BigInt::zero();
    }
    if w[0].is_negative() {
        for j in 0..n {
            let a = -u.get(0, j);
            u.set(0, j, a);
            if n > 1 {
                let b = -u.get(1, j);
                u.set(1, j, b);
            }
        }
        if n == 1 {
            return Err(Error::PreconditionViolated(
                "cannot fix the sign in dimension 1".into(),
            ));
        }
    }
    Ok(u)
}

/// `W ∈ SL(n, Z)` whose first column is the primitive vector `v`.
pub fn complete_column(v: &[BigInt]) -> Result<GroupElement> {
    let u = GroupElement::new(reducer_of(v)?)?;
    Ok(u.inverse())
}

/// `g ∈ SL(n, Z)` with `g·e_a = v` and `f·g = e_bᵀ`, so that
/// `g·e_{ab}^s·g⁻¹ = I + s·v·fᵀ`. Needs `n ≥ 3`, `a ≠ b`, primitive `v`, `f`
/// and `f·v = 0`.
pub fn transporter(v: &[BigInt], f: &[BigInt], a: usize, b: usize) -> Result<GroupElement> {
    let n = v.len();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.len(),
        });
    }
    if n < 3 || a == b || a >= n || b >= n {
        return Err(Error::PreconditionViolated(
            "transporter needs n ≥ 3 and distinct indices".into(),
        ));
    }
    if !dot(f, v).is_zero() {
        return Err(Error::PointNotOnHyperplane);
    }
    // f·W = e_0ᵀ
    let w = GroupElement::new(reducer_of(f)?.transpose())?;
    let v1 = w.inverse().apply_vec(v);
    debug_assert!(v1[0].is_zero());
    let tail = complete_column(&v1[1..])?;
    let mut h = IntMatrix::identity(n);
    for i in 1..n {
        for j in 1..n {
            h.set(i, j, tail.matrix().get(i - 1, j - 1).clone());
        }
    }
    // g0·e_1 = v and f·g0 = e_0ᵀ
    let g0 = w.matrix().mul_mat(&h);

    // permutation q with q·e_a = e_1 and q·e_b = e_0
    let mut target = alloc::vec![usize::MAX; n];
    target[a] = 1;
    target[b] = 0;
    let mut next = 2;
    for (k, t) in target.iter_mut().enumerate() {
        if k != a && k != b {
            *t = next;
            next += 1;
        }
    }
    let mut q = IntMatrix::zero(n);
    for (k, &t) in target.iter().enumerate() {
        q.set(t, k, BigInt::one());
    }
    let mut g = g0.mul_mat(&q);
    if q.det().is_negative() {
        let c = (0..n).find(|&c| c != a && c != b).expect("n ≥ 3");
        for i in 0..n {
            let x = -g.get(i, c);
            g.set(i, c, x);
        }
    }
    GroupElement::new(g)
}

fn mod_inverse(x: i128, d: i128) -> Option<i128> {
    let e = x.rem_euclid(d).extended_gcd(&d);
    (e.gcd == 1).then(|| e.x.rem_euclid(d))
}

pub(crate) fn prime_power_base(d: u64) -> Option<u64> {
    let p = (2..=d).find(|k| d.is_multiple_of(*k))?;
    let mut r = d;
    while r.is_multiple_of(p) {
        r /= p;
    }
    (r == 1).then_some(p)
}

/// Lift of `D ∈ SL(m, Z/d)` (entries as residues) to `SL(m, Z)`, for a
/// prime power `d`. The residue matrix is reduced to the identity by
/// elementary row operations over the local ring `Z/d`; the inverse
/// operations, read as integer matrices, give the lift.
pub fn lift_sl(residues: &[Vec<i64>], d: u64) -> Result<IntMatrix> {
    let m = residues.len();
    if prime_power_base(d).is_none() {
        return Err(Error::BadModulus(d));
    }
    let dd = i128::from(d);
    let mut a: Vec<Vec<i128>> = residues
        .iter()
        .map(|r| r.iter().map(|&x| i128::from(x).rem_euclid(dd)).collect())
        .collect();
    let mut ops: Vec<(usize, usize, i128)> = Vec::new();
    let row_add = |a: &mut Vec<Vec<i128>>,
                   ops: &mut Vec<(usize, usize, i128)>,
                   i: usize,
                   j: usize,
                   c: i128| {
        let c = c.rem_euclid(dd);
        if c == 0 {
            return;
        }
        for k in 0..m {
            a[i][k] = (a[i][k] + c * a[j][k]).rem_euclid(dd);
        }
        ops.push((i, j, c));
    };
    for j in 0..m {
        if mod_inverse(a[j][j], dd).is_none() {
            let i = (j + 1..m)
                .find(|&i| mod_inverse(a[i][j], dd).is_some())
                .ok_or_else(|| {
                    Error::PreconditionViolated("residue matrix is not invertible".into())
                })?;
            row_add(&mut a, &mut ops, j, i, 1);
        }
        let inv = mod_inverse(a[j][j], dd).expect("unit pivot");
        for i in 0..m {
            if i != j {
                let c = -a[i][j] * inv;
                row_add(&mut a, &mut ops, i, j, c);
            }
        }
    }
    for j in 0..m.saturating_sub(1) {
        let u = a[j][j];
        let x = mod_inverse(u, dd).expect("unit diagonal");
        let xinv = u;
        // diag(x, x⁻¹) = e12(x)·e21(−x⁻¹)·e12(x)·e12(−1)·e21(1)·e12(−1)
        for (up, c) in [
            (true, -1),
            (false, 1),
            (true, -1),
            (true, x),
            (false, -xinv),
            (true, x),
        ] {
            if up {
                row_add(&mut a, &mut ops, j, j + 1, c);
            } else {
                row_add(&mut a, &mut ops, j + 1, j, c);
            }
        }
    }
    if m > 0 && a[m - 1][m - 1] != 1 % dd {
        return Err(Error::PreconditionViolated(
            "residue matrix does not have determinant 1".into(),
        ));
    }
    let mut lift = IntMatrix::identity(m);
    for &(i, j, c) in &ops {
        let e = GroupElement::elementary(m, i, j, BigInt::from(-c));
        lift = lift.mul_mat(e.matrix());
    }
    Ok(lift)
}

/// `s ∈ SL(n, Z)` with `s ≡ target (mod d)`, `s·e_a = e_a` and
/// `e_bᵀ·s = e_bᵀ`. The residue `target` must already have these two
/// properties modulo `d`.
pub fn stabilizer_lift(target: &IntMatrix, a: usize, b: usize, d: u64) -> Result<GroupElement> {
    let n = target.dim();
    let md = BigInt::from(d);
    let res = |i: usize, j: usize| target.get(i, j).mod_floor(&md);
    for i in 0..n {
        let want = BigInt::from(u8::from(i == a));
        if res(i, a) != want.mod_floor(&md) {
            return Err(Error::PreconditionViolated(
                "residue does not fix e_a".into(),
            ));
        }
        let want = BigInt::from(u8::from(i == b));
        if res(b, i) != want.mod_floor(&md) {
            return Err(Error::PreconditionViolated(
                "residue does not fix e_b".into(),
            ));
        }
    }
    let others: Vec<usize> = (0..n).filter(|&k| k != a && k != b).collect();
    let block: Vec<Vec<i64>> = others
        .iter()
        .map(|&i| {
            others
                .iter()
                .map(|&j| res(i, j).to_i64().expect("residue"))
                .collect()
        })
        .collect();
    let lifted = lift_sl(&block, d)?;
    let mut s = IntMatrix::identity(n);
    for j in 0..n {
        if j != a {
            s.set(a, j, res(a, j));
        }
    }
    for &i in &others {
        s.set(i, b, res(i, b));
    }
    for (x, &i) in others.iter().enumerate() {
        for (y, &j) in others.iter().enumerate() {
            s.set(i, j, lifted.get(x, y).clone());
        }
    }
    GroupElement::new(s)
}

/// `g ≡ base (mod d)` with `g·e_a = v` and `f·g = e_bᵀ`, provided
/// `v ≡ base·e_a` and `f ≡ e_bᵀ·base⁻¹` modulo `d`.
pub fn congruent_transporter(
    v: &[BigInt],
    f: &[BigInt],
    a: usize,
    b: usize,
    base: &GroupElement,
    d: u64,
) -> Result<GroupElement> {
    let g0 = transporter(v, f, a, b)?;
    let correction = g0.inverse().matrix().mul_mat(base.matrix());
    let s = stabilizer_lift(&correction, a, b, d)?;
    Ok(&g0 * &s)
}
