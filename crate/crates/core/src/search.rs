//! Bounded search for group elements moving one (point, hyperplane) pair
//! close to another, optionally inside a principal congruence subgroup.

use alloc::format;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::congruence::in_kernel;
use crate::exact::{
    dist2_hyperplanes, dist2_points, dot, primitive_part, ProjHyperplane, ProjPoint,
};
use crate::lattice::{congruent_transporter, transporter};
use crate::matrix::{GroupElement, IntMatrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    /// Refinement levels; level 0 only tries the identity.
    pub depth: u32,
    /// Random words tried after the structured attempts.
    pub words: u32,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            depth: 32,
            words: 256,
            seed: 0,
        }
    }
}

/// Integer pair `(v, f)` with `f·v = 0`, `v ≡ α` and `f ≡ β (mod d)`, whose
/// directions approach `p` and `L` as `k` grows.
///
/// `v = d·k·P + α` and `f = d·(μ·F + Z) + β`, where `Z` is a short integer
/// solution of the one linear condition forced by `f·v = 0`.
pub fn congruent_approximation(
    p: &ProjPoint,
    l: &ProjHyperplane,
    alpha: &[BigInt],
    beta: &[BigInt],
    d: u64,
    k: &BigInt,
) -> Option<(Vec<BigInt>, Vec<BigInt>)> {
    let n = p.dim();
    let big_p = p.coords();
    let big_f = l.covector();
    let dd = BigInt::from(d);
    let pmax = big_p.iter().map(|x| x.abs()).max()?;
    let mu = &dd * k * k * (BigInt::one() + pmax);
    let v: Vec<BigInt> = big_p
        .iter()
        .zip(alpha)
        .map(|(x, a)| &dd * k * x + a)
        .collect();
    // Z·v = −k(β·P) − μ(F·α)
    let c = -(k * dot(beta, big_p)) - &mu * dot(big_f, alpha);
    let kk = (0..n).max_by_key(|&i| v[i].abs())?;
    if v[kk].is_zero() {
        return None;
    }
    let primitive = |x: &[BigInt]| {
        primitive_part(x)
            .map(|(_, c)| c.abs().is_one())
            .unwrap_or(false)
    };
    if !primitive(&v) {
        return None;
    }
    // a small free entry in a third coordinate avoids forced common factors
    for tau in [0i64, 1, -1, 2, -2, 3, -3] {
        for j in (0..n).filter(|&j| j != kk) {
            let r = (0..n).find(|&r| r != j && r != kk)?;
            let mut z = alloc::vec![BigInt::zero(); n];
            z[r] = BigInt::from(tau);
            let c = &c - &z[r] * &v[r];
            let e = v[j].extended_gcd(&v[kk]);
            if e.gcd.is_zero() || !(&c % &e.gcd).is_zero() {
                continue;
            }
            let mut zj = &e.x * (&c / &e.gcd);
            // shorten z_j modulo v_k / g
            let step = (&v[kk] / &e.gcd).abs();
            let t = (BigInt::from(2) * &zj + &step).div_floor(&(BigInt::from(2) * &step));
            zj -= &t * &step;
            let rest = &c - &zj * &v[j];
            z[j] = zj;
            z[kk] = rest / &v[kk];
            let f: Vec<BigInt> = (0..n)
                .map(|i| &dd * (&mu * &big_f[i] + &z[i]) + &beta[i])
                .collect();
            if dot(&f, &v).is_zero() && primitive(&f) {
                return Some((v, f));
            }
        }
    }
    None
}

fn signed_permutations(n: usize) -> Vec<GroupElement> {
    let mut perms: Vec<Vec<usize>> = alloc::vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &perms {
            for k in 0..n {
                if !p.contains(&k) {
                    let mut q = p.clone();
                    q.push(k);
                    next.push(q);
                }
            }
        }
        perms = next;
    }
    let mut out = Vec::new();
    for p in perms {
        for signs in 0u32..(1 << n) {
            let mut m = IntMatrix::zero(n);
            for (col, &row) in p.iter().enumerate() {
                let s = if signs & (1 << col) != 0 { -1 } else { 1 };
                m.set(row, col, BigInt::from(s));
            }
            if let Ok(g) = GroupElement::new(m) {
                out.push(g);
            }
        }
    }
    out
}

/// Search for `g` (in `K_d` when `modulus` is given) with
/// `d²(g·p₁, p₂) < ε²` and `d²(g·L₁, L₂) < δ²`.
///
/// Level 0 tries the identity. Level 1 tries signed permutations and the
/// exact transporter (unconstrained), or the first congruent approximation
/// (constrained). Each further level doubles the approximation scale.
/// Random words in elementary matrices (or their `d`-th powers) follow.
/// Failure is reported as [`Error::SearchExhausted`], never as a proof of
/// non-existence.
pub fn conjugator_search(
    src: (&ProjPoint, &ProjHyperplane),
    dst: (&ProjPoint, &ProjHyperplane),
    eps2: &BigRational,
    del2: &BigRational,
    modulus: Option<u64>,
    budget: &SearchBudget,
) -> Result<GroupElement> {
    let (p1, l1) = src;
    let (p2, l2) = dst;
    let n = p1.dim();
    for d in [p2.dim(), l1.dim(), l2.dim()] {
        if d != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d,
            });
        }
    }
    if !l1.contains(p1) || !l2.contains(p2) {
        return Err(Error::PointNotOnHyperplane);
    }
    let close = |g: &GroupElement| {
        dist2_points(&g.apply_point(p1), p2).value() < eps2
            && dist2_hyperplanes(&g.apply_hyperplane(l1), l2).value() < del2
    };
    let identity = GroupElement::identity(n);
    if close(&identity) {
        return Ok(identity);
    }
    if budget.depth >= 1 {
        match modulus {
            None => {
                if n <= 5 {
                    if let Some(g) = signed_permutations(n).into_iter().find(|g| close(g)) {
                        return Ok(g);
                    }
                }
                let h1 = transporter(p1.coords(), l1.covector(), 0, 1)?;
                let h2 = transporter(p2.coords(), l2.covector(), 0, 1)?;
                let g = &h2 * &h1.inverse();
                if close(&g) {
                    return Ok(g);
                }
            }
            Some(d) => {
                let h1 = transporter(p1.coords(), l1.covector(), 0, 1)?;
                let h1_inv = h1.inverse();
                for level in 1..=budget.depth {
                    let k = BigInt::one() << (level - 1) as usize;
                    let Some((v, f)) =
                        congruent_approximation(p2, l2, p1.coords(), l1.covector(), d, &k)
                    else {
                        continue;
                    };
                    let Ok(gp) = congruent_transporter(&v, &f, 0, 1, &h1, d) else {
                        continue;
                    };
                    let g = &gp * &h1_inv;
                    debug_assert!(in_kernel(&g, d));
                    if close(&g) {
                        return Ok(g);
                    }
                }
            }
        }
    }
    if budget.depth >= 1 {
        let step = BigInt::from(modulus.unwrap_or(1));
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        let max_len = budget.depth.min(12) as usize;
        for _ in 0..budget.words {
            let len = rng.gen_range(1..=max_len);
            let mut g = GroupElement::identity(n);
            for _ in 0..len {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let c = if rng.gen_bool(0.5) {
                    step.clone()
                } else {
                    -&step
                };
                g = &g * &GroupElement::elementary(n, i, j, c);
            }
            if close(&g) {
                return Ok(g);
            }
        }
    }
    Err(Error::SearchExhausted(format!(
        "no {} element within d² < {eps2}, {del2} after {} levels and {} random words",
        match modulus {
            Some(d) => format!("K_{d}"),
            None => "SL(n,Z)".into(),
        },
        budget.depth,
        budget.words
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use proptest::prelude::*;

    fn pt(x: &[i64]) -> ProjPoint {
        ProjPoint::from_i64(x).unwrap()
    }

    fn hp(x: &[i64]) -> ProjHyperplane {
        ProjHyperplane::from_i64(x).unwrap()
    }

    #[test]
    fn identity_when_source_equals_target() {
        let (p, l) = (pt(&[1, 2, 0]), hp(&[2, -1, 5]));
        let g = conjugator_search(
            (&p, &l),
            (&p, &l),
            &rat(1, 10_000),
            &rat(1, 10_000),
            None,
            &SearchBudget::default(),
        );
        assert!(g.unwrap().is_identity());
        let g = conjugator_search(
            (&p, &l),
            (&p, &l),
            &rat(1, 10_000),
            &rat(1, 10_000),
            Some(3),
            &SearchBudget::default(),
        );
        assert!(g.unwrap().is_identity());
    }

    #[test]
    fn signed_permutation_at_depth_one() {
        let budget = SearchBudget {
            depth: 1,
            words: 0,
            seed: 0,
        };
        let src = (pt(&[1, 0, 0]), hp(&[0, 1, 0]));
        let dst = (pt(&[0, 1, 0]), hp(&[1, 0, 0]));
        let g = conjugator_search(
            (&src.0, &src.1),
            (&dst.0, &dst.1),
            &rat(1, 4),
            &rat(1, 4),
            None,
            &budget,
        )
        .unwrap();
        assert!(g.is_signed_permutation());
        assert_eq!(g.apply_point(&src.0), dst.0);
        assert_eq!(g.apply_hyperplane(&src.1), dst.1);
    }

    #[test]
    fn exhausted_budget() {
        let src = (pt(&[1, 0, 0]), hp(&[0, 1, 0]));
        let dst = (pt(&[3, 5, 0]), hp(&[5, -3, 7]));
        let budget = SearchBudget {
            depth: 0,
            words: 0,
            seed: 0,
        };
        let r = conjugator_search(
            (&src.0, &src.1),
            (&dst.0, &dst.1),
            &rat(1, 1_000_000),
            &rat(1, 1_000_000),
            None,
            &budget,
        );
        assert!(matches!(r, Err(Error::SearchExhausted(_))));
        let r = conjugator_search(
            (&src.0, &src.1),
            (&dst.0, &dst.1),
            &rat(1, 10),
            &rat(1, 10),
            Some(3),
            &budget,
        );
        assert!(matches!(r, Err(Error::SearchExhausted(_))));
    }

    #[test]
    fn kernel_constrained_search() {
        let src = (pt(&[1, 0, 0]), hp(&[0, 1, 0]));
        let dst = (pt(&[3, 5, 1]), hp(&[5, -3, 0]));
        let eps2 = rat(1, 1_000_000);
        for d in [3u64, 4, 9] {
            let g = conjugator_search(
                (&src.0, &src.1),
                (&dst.0, &dst.1),
                &eps2,
                &eps2,
                Some(d),
                &SearchBudget::default(),
            )
            .unwrap();
            assert!(in_kernel(&g, d));
            assert!(dist2_points(&g.apply_point(&src.0), &dst.0).value() < &eps2);
            assert!(dist2_hyperplanes(&g.apply_hyperplane(&src.1), &dst.1).value() < &eps2);
        }
    }

    #[test]
    fn kernel_constrained_search_in_dimension_four() {
        // the stabilizer correction lifts a 2×2 block here
        let src = (pt(&[1, 2, 0, 1]), hp(&[0, 1, 3, -2]));
        let dst = (pt(&[1, 0, 0, 0]), hp(&[0, 0, 1, 1]));
        let eps2 = rat(1, 10_000);
        let g = conjugator_search(
            (&src.0, &src.1),
            (&dst.0, &dst.1),
            &eps2,
            &eps2,
            Some(4),
            &SearchBudget::default(),
        )
        .unwrap();
        assert!(in_kernel(&g, 4));
        assert!(dist2_points(&g.apply_point(&src.0), &dst.0).value() < &eps2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn approximations_are_congruent_and_converge(
            p in prop::collection::vec(-9i64..=9, 3),
            w in prop::collection::vec(-9i64..=9, 3),
            d in prop::sample::select(vec![3u64, 4, 5]),
        ) {
            let Ok(pp) = ProjPoint::from_i64(&p) else { return Ok(()); };
            let pv = pp.coords().to_vec();
            let w: Vec<BigInt> = w.iter().map(|&x| BigInt::from(x)).collect();
            let vv = crate::exact::norm2(&pv);
            let wv = dot(&w, &pv);
            let f: Vec<BigInt> = w.iter().zip(&pv).map(|(a, b)| &vv * a - &wv * b).collect();
            let Ok(l) = ProjHyperplane::new(&f) else { return Ok(()); };
            let alpha = [1i64, 0, 0].map(BigInt::from);
            let beta = [0i64, 1, 0].map(BigInt::from);
            let mut last = None;
            for level in [4usize, 8, 12] {
                let k = BigInt::one() << level;
                let Some((v, f)) = congruent_approximation(&pp, &l, &alpha, &beta, d, &k) else { continue };
                prop_assert!(dot(&f, &v).is_zero());
                let md = BigInt::from(d);
                for i in 0..3 {
                    prop_assert_eq!((&v[i] - &alpha[i]).mod_floor(&md), BigInt::zero());
                    prop_assert_eq!((&f[i] - &beta[i]).mod_floor(&md), BigInt::zero());
                }
                let err = dist2_points(&ProjPoint::new(&v).unwrap(), &pp).into_inner()
                    + dist2_hyperplanes(&ProjHyperplane::new(&f).unwrap(), &l).into_inner();
                last = Some(err);
            }
            if let Some(err) = last {
                prop_assert!(err < rat(1, 100));
            }
        }
    }
}
