//! Congruence quotients `SL(n, Z) → SL(n, Z/d)`.
//!
//! Residue matrices are packed into a single `u64` key (base-`d` digits,
//! row-major), so closures are hash sets of integers.

use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashSet;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::matrix::GroupElement;
use crate::{Error, Result};

pub const DEFAULT_BFS_CAP: usize = 10_000_000;

const MAX_ENTRIES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModMatrix {
    n: usize,
    d: u64,
    entries: Vec<u64>,
}

fn check_modulus(d: u64) -> Result<()> {
    if d < 2 || d > u64::from(u32::MAX) {
        return Err(Error::BadModulus(d));
    }
    Ok(())
}

fn check_packable(n: usize, d: u64) -> Result<()> {
    let mut acc: u128 = 1;
    for _ in 0..n * n {
        acc = acc.saturating_mul(u128::from(d));
    }
    if n * n > MAX_ENTRIES || acc > u128::from(u64::MAX) + 1 {
        return Err(Error::ModulusTooLarge { n, modulus: d });
    }
    Ok(())
}

impl ModMatrix {
    pub fn identity(n: usize, d: u64) -> Result<Self> {
        check_modulus(d)?;
        let mut entries = alloc::vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        Ok(ModMatrix { n, d, entries })
    }

    pub fn from_rows(rows: &[Vec<i64>], d: u64) -> Result<Self> {
        check_modulus(d)?;
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            entries.extend(r.iter().map(|&x| x.rem_euclid(d as i64) as u64));
        }
        Ok(ModMatrix { n, d, entries })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == u64::from(i == j)))
    }

    pub fn mul(&self, other: &ModMatrix) -> ModMatrix {
        assert_eq!(
            (self.n, self.d),
            (other.n, other.d),
            "incompatible residue matrices"
        );
        let mut out = alloc::vec![0; self.n * self.n];
        mul_into(self.n, self.d, &self.entries, &other.entries, &mut out);
        ModMatrix {
            n: self.n,
            d: self.d,
            entries: out,
        }
    }

    pub fn det(&self) -> u64 {
        let m: Vec<BigInt> = self.entries.iter().map(|&x| BigInt::from(x)).collect();
        let im = crate::matrix::IntMatrix::from_rows(
            &m.chunks(self.n).map(|c| c.to_vec()).collect::<Vec<_>>(),
        )
        .expect("square");
        im.det()
            .mod_floor(&BigInt::from(self.d))
            .to_u64()
            .expect("residue")
    }

    /// Multiplicative order, by repeated multiplication.
    pub fn order(&self) -> u64 {
        let mut acc = self.clone();
        let mut k = 1;
        while !acc.is_identity() {
            acc = acc.mul(self);
            k += 1;
        }
        k
    }

    pub fn key(&self) -> Result<u64> {
        check_packable(self.n, self.d)?;
        Ok(pack(self.d, &self.entries))
    }
}

impl fmt::Display for ModMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "(")?;
            for j in 0..self.n {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            write!(f, ")")?;
        }
        write!(f, ") mod {}", self.d)
    }
}

fn mul_into(n: usize, d: u64, a: &[u64], b: &[u64], out: &mut [u64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s: u128 = 0;
            for k in 0..n {
                s += u128::from(a[i * n + k]) * u128::from(b[k * n + j]);
            }
            out[i * n + j] = (s % u128::from(d)) as u64;
        }
    }
}

fn pack(d: u64, entries: &[u64]) -> u64 {
    entries
        .iter()
        .fold(0u64, |acc, &x| acc.wrapping_mul(d).wrapping_add(x))
}

fn unpack(d: u64, mut key: u64, out: &mut [u64]) {
    for slot in out.iter_mut().rev() {
        *slot = key % d;
        key /= d;
    }
}

/// `π_d(g)`.
pub fn reduce_mod(g: &GroupElement, d: u64) -> Result<ModMatrix> {
    check_modulus(d)?;
    let m = BigInt::from(d);
    let entries = g
        .matrix()
        .entries()
        .iter()
        .map(|x| x.mod_floor(&m).to_u64().expect("residue fits"))
        .collect();
    Ok(ModMatrix {
        n: g.dim(),
        d,
        entries,
    })
}

/// `g ∈ K_d`, i.e. `g ≡ I (mod d)`.
pub fn in_kernel(g: &GroupElement, d: u64) -> bool {
    let m = BigInt::from(d);
    let n = g.dim();
    (0..n).all(|i| {
        (0..n).all(|j| {
            let x = g.matrix().get(i, j) - BigInt::from(u8::from(i == j));
            (x % &m).is_zero()
        })
    })
}

/// Every element of the subgroup generated by `gens`, as packed keys in BFS
/// order starting from the identity.
pub fn enumerate_closure(gens: &[ModMatrix], cap: usize) -> Result<Vec<u64>> {
    let first = gens
        .first()
        .ok_or_else(|| Error::PreconditionViolated("no generators".into()))?;
    let (n, d) = (first.n, first.d);
    for g in gens {
        if g.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.n,
            });
        }
        if g.d != d {
            return Err(Error::BadModulus(g.d));
        }
    }
    check_packable(n, d)?;
    let mut gen_entries: Vec<&[u64]> = Vec::new();
    let mut seen_gens = HashSet::new();
    for g in gens {
        if !g.is_identity() && seen_gens.insert(pack(d, &g.entries)) {
            gen_entries.push(&g.entries);
        }
    }

    let id = ModMatrix::identity(n, d)?;
    let id_key = pack(d, &id.entries);
    let mut seen: HashSet<u64> = HashSet::new();
    seen.insert(id_key);
    let mut order = alloc::vec![id_key];
    let mut cur = [0u64; MAX_ENTRIES];
    let mut next = [0u64; MAX_ENTRIES];
    let nn = n * n;
    let mut head = 0;
    while head < order.len() {
        unpack(d, order[head], &mut cur[..nn]);
        head += 1;
        for g in &gen_entries {
            mul_into(n, d, &cur[..nn], g, &mut next[..nn]);
            let k = pack(d, &next[..nn]);
            if seen.insert(k) {
                if seen.len() > cap {
                    return Err(Error::CapExceeded { cap });
                }
                order.push(k);
            }
        }
    }
    Ok(order)
}

/// Order of the subgroup generated by `gens` inside `SL(n, Z/d)`.
pub fn closure_order(gens: &[ModMatrix], cap: usize) -> Result<u64> {
    Ok(enumerate_closure(gens, cap)?.len() as u64)
}

pub fn is_prime(d: u64) -> bool {
    d >= 2
        && (2..)
            .take_while(|k| k * k <= d)
            .all(|k| !d.is_multiple_of(k))
}

/// `|SL(n, F_p)| = p^{n(n-1)/2} · ∏_{i=2}^{n} (p^i − 1)`.
pub fn sl_order_prime(n: usize, p: u64) -> BigInt {
    let p = BigInt::from(p);
    let mut acc = num_traits::pow(p.clone(), n * (n - 1) / 2);
    for i in 2..=n {
        acc *= num_traits::pow(p.clone(), i) - 1;
    }
    acc
}

fn elementary_mod(n: usize, d: u64) -> Result<Vec<ModMatrix>> {
    GroupElement::all_elementary(n)
        .iter()
        .map(|(_, _, g)| reduce_mod(g, d))
        .collect()
}

/// `|SL(n, Z/d)|`: closed formula for prime `d`, enumeration from the
/// elementary matrices otherwise.
pub fn group_order(n: usize, d: u64, cap: usize) -> Result<BigInt> {
    check_modulus(d)?;
    if is_prime(d) {
        return Ok(sl_order_prime(n, d));
    }
    Ok(BigInt::from(closure_order(&elementary_mod(n, d)?, cap)?))
}

/// Whether `π_d` maps `⟨gens⟩` onto `SL(n, Z/d)`.
pub fn is_surjective(gens: &[GroupElement], d: u64, cap: usize) -> Result<bool> {
    let first = gens
        .first()
        .ok_or_else(|| Error::PreconditionViolated("no generators".into()))?;
    let n = first.dim();
    let reduced: Vec<ModMatrix> = gens
        .iter()
        .map(|g| reduce_mod(g, d))
        .collect::<Result<_>>()?;
    let target = group_order(n, d, cap)?;
    Ok(BigInt::from(closure_order(&reduced, cap)?) == target)
}

/// Exponent of `SL(n, Z/d)`: the lcm of all element orders.
pub fn exponent_of(n: usize, d: u64, cap: usize) -> Result<u64> {
    let gens = elementary_mod(n, d)?;
    let keys = enumerate_closure(&gens, cap)?;
    let mut buf = alloc::vec![0u64; n * n];
    let mut e = 1u64;
    for k in keys {
        unpack(d, k, &mut buf);
        let g = ModMatrix {
            n,
            d,
            entries: buf.clone(),
        };
        e = e.lcm(&g.order());
    }
    Ok(e)
}

/// Record of surjectivity checks supporting profinite density.
///
/// Zariski density follows from surjectivity modulo an odd prime, and the
/// checks at 4 and the odd primes are the hypotheses of the density
/// criterion. Passage to every modulus relies on strong approximation,
/// which is cited rather than checked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityWitness {
    pub moduli: Vec<u64>,
    pub surjective: Vec<bool>,
    pub recipe_conformant: bool,
    /// Assumed value of the strong-approximation constant `q`, if any.
    pub assumed_q: Option<u64>,
}

impl DensityWitness {
    pub const FULL_DENSITY_BASIS: &'static str = "CITED: strong approximation";

    pub fn is_valid(&self) -> bool {
        self.moduli.contains(&4)
            && self.moduli.iter().any(|&d| d % 2 == 1 && is_prime(d))
            && self.surjective.len() == self.moduli.len()
            && self.surjective.iter().all(|&s| s)
    }

    /// Same moduli, recomputed for another generating set.
    pub fn recheck(&self, gens: &[GroupElement], cap: usize) -> Result<bool> {
        let fresh = density_witness(gens, &self.moduli, cap)?;
        Ok(fresh.surjective == self.surjective)
    }
}

pub fn density_witness(
    gens: &[GroupElement],
    moduli: &[u64],
    cap: usize,
) -> Result<DensityWitness> {
    if moduli.is_empty() {
        return Err(Error::EmptyModuli);
    }
    let surjective = moduli
        .iter()
        .map(|&d| is_surjective(gens, d, cap))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityWitness {
        moduli: moduli.to_vec(),
        surjective,
        recipe_conformant: false,
        assumed_q: None,
    })
}
