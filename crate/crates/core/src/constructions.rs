//! Procedures that build profinitely dense Schottky systems and grow them
//! one step at a time while certifying that a given element together with
//! the system generates `SL(n, Z)`.
//!
//! Steps that the underlying arguments perform by compactness or by "small
//! deformation" are replaced here by bounded deterministic searches over
//! small integer combinations and dyadic radii `4^{-j}`. Every output is
//! re-verified exactly before it is returned.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::congruence::{
    density_witness, exponent_of, in_kernel, is_prime, sl_order_prime, DensityWitness,
    DEFAULT_BFS_CAP,
};
use crate::exact::{
    disjoint_ball_tube, disjoint_balls, dist2_hyperplanes, dist2_point_hyperplane, dist2_points,
    dot, norm2, sqrt_floor_dyadic, tube_inside_tube, ProjHyperplane, ProjPoint, Region,
};
use crate::lattice::prime_power_base;
use crate::matrix::GroupElement;
use crate::schottky::{
    add_generator, throw, verify_quadruple, verify_system, z2_pair_cert, FullGroupCert, Generator,
    Letter, SchottkyQuadruple, SchottkySystem,
};
use crate::search::{conjugator_search, SearchBudget};
use crate::unipotent::{contraction_power, Rank1Unipotent};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionConfig {
    pub budget: SearchBudget,
    /// The second batch of generators lives in `K_{q²}`.
    pub q: u64,
    /// Moduli recorded in density witnesses, on top of `3` and `q²`.
    pub moduli: Vec<u64>,
    pub bfs_cap: usize,
    /// Put the exact generator at `(p, L)` in front of the two batches.
    pub center: bool,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        ConstructionConfig {
            budget: SearchBudget::default(),
            q: 2,
            moduli: vec![3, 4],
            bfs_cap: DEFAULT_BFS_CAP,
            center: false,
        }
    }
}

impl ConstructionConfig {
    pub fn density_moduli(&self) -> Vec<u64> {
        let mut m = vec![3, self.q.saturating_mul(self.q)];
        m.extend(self.moduli.iter().copied());
        m.sort_unstable();
        m.dedup();
        m
    }

    fn seeded(&self, salt: u64) -> SearchBudget {
        SearchBudget {
            seed: self.budget.seed.wrapping_add(salt),
            ..self.budget
        }
    }

    fn witness(&self, sys: &SchottkySystem) -> Result<DensityWitness> {
        density_witness(&sys.matrices(), &self.density_moduli(), self.bfs_cap)
    }
}

fn require(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::PreconditionViolated(what()))
    }
}

fn exhausted(what: &str) -> Error {
    Error::SearchExhausted(String::from(what))
}

fn check_radii(eps2: &BigRational, del2: &BigRational) -> Result<()> {
    if !eps2.is_positive() || eps2 > del2 {
        return Err(Error::InvalidRadii(format!(
            "need 0 < ε ≤ δ, got ε² = {eps2}, δ² = {del2}"
        )));
    }
    Ok(())
}

fn check_dims(n: usize, dims: &[usize]) -> Result<()> {
    if n < 3 {
        return Err(Error::PreconditionViolated(format!(
            "dimension must be at least 3, got {n}"
        )));
    }
    for &d in dims {
        if d != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d,
            });
        }
    }
    Ok(())
}

fn reverify(sys: SchottkySystem) -> Result<SchottkySystem> {
    match verify_system(&sys) {
        Ok(_) => Ok(sys),
        Err(report) => Err(Error::PreconditionViolated(format!(
            "system fails verification:\n{report}"
        ))),
    }
}

fn unit(n: usize, i: usize) -> Vec<BigInt> {
    let mut v = vec![BigInt::zero(); n];
    v[i] = BigInt::one();
    v
}

fn pow2(j: u32) -> BigInt {
    BigInt::one() << j as usize
}

/// `4^{-j}` for `j = 1..=depth`, the candidate squared radii.
fn radii(depth: u32) -> impl Iterator<Item = BigRational> {
    (1..=depth).map(|j| BigRational::new(BigInt::one(), pow2(2 * j)))
}

/// All integer vectors of length `len` with entries in `[-bound, bound]`,
/// nonzero, ordered by their largest entry.
fn tuples(len: usize, bound: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for b in 1..=bound {
        let mut cur = vec![-b; len];
        'odometer: loop {
            if cur.iter().any(|x| x.abs() == b) {
                out.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == len {
                    break 'odometer;
                }
                cur[i] += 1;
                if cur[i] > b {
                    cur[i] = -b;
                    i += 1;
                } else {
                    break;
                }
            }
        }
    }
    out
}

fn combo_bound(n: usize) -> i64 {
    if n <= 4 {
        2
    } else {
        1
    }
}

/// Integer spanning set of `x^⊥`.
fn kernel_basis(x: &[BigInt]) -> Vec<Vec<BigInt>> {
    let n = x.len();
    let Some(a) = x.iter().position(|c| !c.is_zero()) else {
        return Vec::new();
    };
    (0..n)
        .filter(|&k| k != a)
        .map(|k| {
            let mut b = vec![BigInt::zero(); n];
            b[k] = x[a].clone();
            b[a] = -&x[k];
            b
        })
        .collect()
}

fn combinations(basis: &[Vec<BigInt>], bound: i64) -> Vec<Vec<BigInt>> {
    let Some(first) = basis.first() else {
        return Vec::new();
    };
    let n = first.len();
    tuples(basis.len(), bound)
        .into_iter()
        .map(|c| {
            let mut v = vec![BigInt::zero(); n];
            for (ci, b) in c.iter().zip(basis) {
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi += bi * *ci;
                }
            }
            v
        })
        .filter(|v| v.iter().any(|x| !x.is_zero()))
        .collect()
}

fn points_on(l: &ProjHyperplane, bound: i64) -> Vec<ProjPoint> {
    let mut out: Vec<ProjPoint> = Vec::new();
    for v in combinations(&kernel_basis(l.covector()), bound) {
        let p = ProjPoint::new(&v).expect("nonzero");
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

fn hyperplanes_through(x: &ProjPoint, bound: i64) -> Vec<ProjHyperplane> {
    let mut out: Vec<ProjHyperplane> = Vec::new();
    for v in combinations(&kernel_basis(x.coords()), bound) {
        let l = ProjHyperplane::new(&v).expect("nonzero");
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

/// The hyperplane through `x` whose covector is the orthogonal projection of
/// `near` onto `x^⊥`, i.e. the hyperplane through `x` closest to `ker near`
/// among those sharing its normal direction up to a multiple of `x`.
fn through(x: &ProjPoint, near: &[BigInt]) -> Option<ProjHyperplane> {
    let xs = x.coords();
    let nx = norm2(xs);
    let fx = dot(near, xs);
    let c: Vec<BigInt> = near
        .iter()
        .zip(xs)
        .map(|(f, xi)| &nx * f - &fx * xi)
        .collect();
    ProjHyperplane::new(&c).ok()
}

/// `2^j·x + z` for nonzero `z ∈ {-1, 0, 1}^n`.
fn near_points(x: &ProjPoint, j: u32) -> Vec<ProjPoint> {
    let scale = pow2(j);
    tuples(x.dim(), 1)
        .into_iter()
        .filter_map(|z| {
            let v: Vec<BigInt> = x
                .coords()
                .iter()
                .zip(&z)
                .map(|(a, b)| &scale * a + b)
                .collect();
            ProjPoint::new(&v).ok()
        })
        .collect()
}

/// A multiple of the exponent of `SL(n, Z/d)`: the exponent itself when the
/// group fits under the cap, its order otherwise.
pub fn exponent_multiple(n: usize, d: u64, cap: usize) -> Result<BigInt> {
    let p = prime_power_base(d).ok_or(Error::BadModulus(d))?;
    let mut k = 0u32;
    let mut r = d;
    while r > 1 {
        r /= p;
        k += 1;
    }
    let order =
        sl_order_prime(n, p) * num_traits::pow(BigInt::from(p), ((k - 1) as usize) * (n * n - 1));
    if order <= BigInt::from(cap) {
        Ok(BigInt::from(exponent_of(n, d, cap)?))
    } else {
        debug_assert!(is_prime(p));
        Ok(order)
    }
}

/// One generator of a batch: `u = g·e_{ab}^s·g⁻¹` with `g ∈ K_d` and
/// `s ≡ 1 (mod t)`, where `t` is a multiple of the exponent of
/// `SL(n, Z/d)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseRecord {
    /// Position of the generator in the system.
    pub index: usize,
    pub g: GroupElement,
    pub a: usize,
    pub b: usize,
    pub s: BigInt,
    pub modulus: u64,
    pub exponent: BigInt,
}

impl DenseRecord {
    pub fn generator(&self) -> GroupElement {
        let e = GroupElement::elementary(self.g.dim(), self.a, self.b, self.s.clone());
        self.g.conj(&e)
    }

    /// `g ∈ K_d`, `s > 1` and `s ≡ 1 (mod t)`.
    pub fn is_conformant(&self) -> bool {
        in_kernel(&self.g, self.modulus)
            && self.s > BigInt::one()
            && self.exponent.is_positive()
            && (&self.s - 1u32).is_multiple_of(&self.exponent)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseBuild {
    pub system: SchottkySystem,
    pub density: DensityWitness,
    pub records: Vec<DenseRecord>,
}

impl DenseBuild {
    /// Every record matches its generator and is conformant.
    pub fn records_consistent(&self) -> bool {
        self.records.iter().all(|r| {
            r.is_conformant()
                && self
                    .system
                    .generators()
                    .get(r.index)
                    .is_some_and(|g| g.u.matrix() == r.generator())
        })
    }
}

fn slot_coefficients(slots: usize, center: bool) -> Vec<i64> {
    let mut out = Vec::with_capacity(slots);
    if center {
        out.push(0);
    }
    let mut k = 1;
    while out.len() < slots {
        out.push(k);
        if out.len() < slots {
            out.push(-k);
        }
        k += 1;
    }
    out
}

/// The pair `(P + tF, F − t·(|F|²/|P|²)·P)`: a point leaving `L` orthogonally
/// and a hyperplane through it, tilted within the pencil spanned by `P`, `F`.
fn pencil_anchor(
    big_p: &[BigInt],
    big_f: &[BigInt],
    t: &BigRational,
) -> Result<(ProjPoint, ProjHyperplane)> {
    let ratio = BigRational::new(norm2(big_f), norm2(big_p));
    let pt: Vec<BigRational> = big_p
        .iter()
        .zip(big_f)
        .map(|(p, f)| {
            BigRational::from_integer(p.clone()) + t * BigRational::from_integer(f.clone())
        })
        .collect();
    let cov: Vec<BigRational> = big_p
        .iter()
        .zip(big_f)
        .map(|(p, f)| {
            BigRational::from_integer(f.clone()) - t * &ratio * BigRational::from_integer(p.clone())
        })
        .collect();
    Ok((
        ProjPoint::from_rational(&pt)?,
        ProjHyperplane::from_rational(&cov)?,
    ))
}

/// Builds a profinitely dense Schottky system with `A = [p]_ε` and
/// `R = [L]_δ` out of `2n² − 2n` conjugated powers of elementary matrices.
///
/// Anchors `(p_i, L_i)` are spread along the pencil through `p` in the
/// direction normal to `L`. The first `n² − n` generators are
/// `g_i·e_i^{tk_i+1}·g_i⁻¹` with `g_i ∈ K_3`, the rest use `K_{q²}` and a
/// multiple of the exponent of `SL(n, Z/q²)`, so the images modulo `3` and
/// `q²` contain every elementary matrix.
pub fn build_profinitely_dense(
    p: &ProjPoint,
    l: &ProjHyperplane,
    eps2: &BigRational,
    del2: &BigRational,
    config: &ConstructionConfig,
) -> Result<DenseBuild> {
    let n = p.dim();
    check_dims(n, &[l.dim()])?;
    require(l.contains(p), || {
        format!("p ∈ L fails for p = {p}, L = {l}")
    })?;
    check_radii(eps2, del2)?;
    let q = config.q;
    let second = q
        .checked_mul(q)
        .filter(|_| q >= 2)
        .ok_or(Error::BadModulus(q))?;
    let t = exponent_multiple(n, 3, config.bfs_cap)?;
    let r = exponent_multiple(n, second, config.bfs_cap)?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let offset = usize::from(config.center);
    let slots = 2 * pairs.len() + offset;
    let coeffs = slot_coefficients(slots, config.center);
    let spread = coeffs.iter().map(|c| c.abs()).max().unwrap_or(0) + 1;

    let big_p = p.coords();
    let big_f = l.covector();
    let bits = 32 + eps2.denom().bits() as u32 + norm2(big_f).bits() as u32;
    let eps_lo = sqrt_floor_dyadic(eps2, bits);
    if !eps_lo.is_positive() {
        return Err(Error::InvalidRadii(format!("ε² = {eps2} is too small")));
    }
    // ≈ |P|/|F|, so that t·|F|/|P| ≈ c·h
    let scale = sqrt_floor_dyadic(&BigRational::new(norm2(big_p), norm2(big_f)), bits);

    let mut last = String::new();
    for attempt in 0..4u32 {
        let h = &eps_lo / BigRational::from_integer(BigInt::from(spread) * pow2(attempt));
        let rho = &h / BigRational::from_integer(12.into());
        let r2 = &rho * &rho;
        let mut gens = Vec::with_capacity(slots);
        let mut records = Vec::new();
        if config.center {
            let u = Rank1Unipotent::from_pair(p, l)?;
            let m = contraction_power(&u, &r2, &r2)?;
            gens.push(Generator::new(
                u.power(&m).expect("m ≥ 1"),
                r2.clone(),
                r2.clone(),
            ));
        }
        for (batch, (d, expo)) in [(3u64, &t), (second, &r)].into_iter().enumerate() {
            for (i, &(a, b)) in pairs.iter().enumerate() {
                let slot = offset + batch * pairs.len() + i;
                let tc = BigRational::from_integer(coeffs[slot].into()) * &h * &scale;
                let (pa, la) = pencil_anchor(big_p, big_f, &tc)?;
                let src = (
                    ProjPoint::new(&unit(n, a))?,
                    ProjHyperplane::new(&unit(n, b))?,
                );
                let g = conjugator_search(
                    (&src.0, &src.1),
                    (&pa, &la),
                    &r2,
                    &r2,
                    Some(d),
                    &config.seeded(slot as u64),
                )
                .map_err(|e| match e {
                    Error::SearchExhausted(s) => {
                        Error::SearchExhausted(format!("generator {slot} (e_{a}{b} in K_{d}): {s}"))
                    }
                    other => other,
                })?;
                let v = g.apply_vec(&unit(n, a));
                let f = g.inverse().matrix().row(b).to_vec();
                let base = Rank1Unipotent::from_parts(&v, &f, &BigInt::one())?;
                let need = contraction_power(&base, &r2, &r2)?;
                let k = Integer::div_ceil(&(need - 1u32), expo).max(BigInt::one());
                let s = expo * k + 1u32;
                let u = Rank1Unipotent::from_parts(&v, &f, &s)?;
                records.push(DenseRecord {
                    index: gens.len(),
                    g,
                    a,
                    b,
                    s,
                    modulus: d,
                    exponent: expo.clone(),
                });
                gens.push(Generator::new(u, r2.clone(), r2.clone()));
            }
        }
        let sys = SchottkySystem::new(
            gens,
            Region::ball(p.clone(), eps2.clone()),
            Region::tube(l.clone(), del2.clone()),
        )?;
        match verify_system(&sys) {
            Ok(_) => {
                let mut density = config.witness(&sys)?;
                density.recipe_conformant = records.iter().all(DenseRecord::is_conformant);
                density.assumed_q = Some(q);
                return Ok(DenseBuild {
                    system: sys,
                    density,
                    records,
                });
            }
            Err(report) => last = format!("{report}"),
        }
    }
    Err(Error::PreconditionViolated(format!(
        "no verified system after shrinking the anchor spacing:\n{last}"
    )))
}

/// `w₂ = k·u₁^m·k⁻¹` written both as a generator of `S` and as a conjugate of
/// a word in `S`, together with the certificate for `⟨S, k⟩`. Expressions
/// are evaluated against `full`, whose adjoined element is `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StartCert {
    pub w2: GroupElement,
    pub in_group: Vec<Letter>,
    pub in_conjugate: Vec<Letter>,
    pub full: FullGroupCert,
}

impl StartCert {
    pub fn revalidate(&self) -> bool {
        let only_gens = |e: &[Letter]| e.iter().all(|l| matches!(l, Letter::Gen(..)));
        let conj_shape = matches!(self.in_conjugate.as_slice(), [Letter::Extra(1), mid @ .., Letter::Extra(-1)] if only_gens(mid));
        !self.w2.is_identity()
            && only_gens(&self.in_group)
            && conj_shape
            && self
                .full
                .evaluate(&self.in_group)
                .is_ok_and(|g| g == self.w2)
            && self
                .full
                .evaluate(&self.in_conjugate)
                .is_ok_and(|g| g == self.w2)
            && self.full.revalidate()
    }
}

fn to_i64(m: &BigInt) -> Result<i64> {
    m.to_i64().ok_or_else(|| {
        Error::PreconditionViolated(format!("exponent {m} does not fit in a word letter"))
    })
}

/// A dense system around `(p₁, L₁)` enlarged by `w₂^m` and `w₃^m`, where
/// `w₂ = k·u₁·k⁻¹` for the exact generator `u₁` at `(p₁, L₁)` and `w₃` sits
/// at `(p₃, L₃)`. Then `w₂^m ∈ ⟨S⟩ ∩ k⟨S⟩k⁻¹`, and `u₁` with `k⁻²·w₃^m·k²`
/// is a `Z²` pair in `⟨S, k⟩`.
pub fn starting_system(
    k: &GroupElement,
    anchors: &[(ProjPoint, ProjHyperplane); 3],
    eps2: &BigRational,
    del2: &BigRational,
    config: &ConstructionConfig,
) -> Result<(SchottkySystem, StartCert)> {
    let n = k.dim();
    check_dims(
        n,
        &[anchors[0].0.dim(), anchors[1].0.dim(), anchors[2].0.dim()],
    )?;
    check_dims(
        n,
        &[anchors[0].1.dim(), anchors[1].1.dim(), anchors[2].1.dim()],
    )?;
    check_radii(eps2, del2)?;
    let [(p1, l1), (p2, l2), (p3, l3)] = anchors;
    for (i, (p, l)) in anchors.iter().enumerate() {
        require(l.contains(p), || {
            format!("bullet 1: p_{} ∈ L_{} fails", i + 1, i + 1)
        })?;
    }
    for (i, (p, _)) in anchors.iter().enumerate() {
        for (j, (_, l)) in anchors.iter().enumerate() {
            if i != j {
                require(disjoint_ball_tube(p, eps2, l, del2), || {
                    format!(
                        "bullet 1: [p_{}]_ε ∩ [L_{}]_δ = ∅ fails, d² = {}, ε² = {eps2}, δ² = {del2}",
                        i + 1,
                        j + 1,
                        dist2_point_hyperplane(p, l).value()
                    )
                })?;
            }
        }
    }
    let k2 = k * k;
    require(&k.apply_point(p1) == p2, || {
        format!("bullet 2: p₂ = k·p₁ fails, k·p₁ = {}", k.apply_point(p1))
    })?;
    require(&k2.apply_point(p1) == p3, || {
        format!("bullet 2: p₃ = k²·p₁ fails, k²·p₁ = {}", k2.apply_point(p1))
    })?;
    require(&k.apply_hyperplane(l1) == l2, || {
        format!(
            "bullet 2: L₂ = k·L₁ fails, k·L₁ = {}",
            k.apply_hyperplane(l1)
        )
    })?;
    require(&k2.apply_hyperplane(l1) != l3, || {
        format!("bullet 2: L₃ ≠ k²·L₁ fails, both are {l3}")
    })?;

    let cfg = ConstructionConfig {
        center: true,
        ..config.clone()
    };
    let dense = build_profinitely_dense(p1, l1, eps2, del2, &cfg)?;
    let s0 = dense.system;
    let u1 = s0.generators()[0].u.clone();
    let w2 = u1.conjugate(k);
    let w3 = Rank1Unipotent::from_pair(p3, l3)?;
    let m0 = u1.exponent().abs();
    let m = Integer::div_ceil(&contraction_power(&w2, eps2, del2)?, &m0)
        .max(contraction_power(&w3, eps2, del2)?);
    let w2m = w2.power(&m).expect("m ≥ 1");
    let w3m = w3.power(&m).expect("m ≥ 1");
    let i2 = s0.len();
    let sys = reverify(s0.extended(
        vec![
            Generator::new(w2m.clone(), eps2.clone(), del2.clone()),
            Generator::new(w3m.clone(), eps2.clone(), del2.clone()),
        ],
        &Region::ball(p2.clone(), eps2.clone()).with_ball(p3.clone(), eps2.clone()),
        &Region::tube(l2.clone(), del2.clone()).with_tube(l3.clone(), del2.clone()),
    ))?;
    let back = k2.inverse();
    let pair = z2_pair_cert(&u1, &back.conj(&w3m.matrix()))
        .map_err(|r| Error::PreconditionViolated(format!("pair check failed: {r}")))?;
    let full = FullGroupCert {
        generators: sys.matrices(),
        extra: Some(k.clone()),
        u_expr: vec![Letter::Gen(0, 1)],
        w_expr: vec![Letter::Extra(-2), Letter::Gen(i2 + 1, 1), Letter::Extra(2)],
        pair,
        density: config.witness(&sys)?,
    };
    let cert = StartCert {
        w2: w2m.matrix(),
        in_group: vec![Letter::Gen(i2, 1)],
        in_conjugate: vec![
            Letter::Extra(1),
            Letter::Gen(0, to_i64(&m)?),
            Letter::Extra(-1),
        ],
        full,
    };
    Ok((sys, cert))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub p: ProjPoint,
    pub l: ProjHyperplane,
    pub eps2: BigRational,
    pub del2: BigRational,
}

/// A base system and a finite list of anchors, each carrying two unipotents
/// with the same attracting point and different hyperplanes. Choosing one
/// per anchor gives a family member; two different choices always contain
/// a `Z²` pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilySpec {
    anchors: Vec<Anchor>,
    base: SchottkySystem,
    slots: Vec<[Generator; 2]>,
}

/// A hyperplane through `p`, different from `l`, whose `r`-tube lies in the
/// `outer`-tube of `l`.
fn tilted_through(
    p: &ProjPoint,
    l: &ProjHyperplane,
    r2: &BigRational,
    outer2: &BigRational,
) -> Option<ProjHyperplane> {
    let e = kernel_basis(p.coords())
        .into_iter()
        .find(|e| ProjHyperplane::new(e).is_ok_and(|h| &h != l))?;
    (1..=256u32).find_map(|j| {
        let s = pow2(j);
        let c: Vec<BigInt> = l
            .covector()
            .iter()
            .zip(&e)
            .map(|(f, x)| &s * f + x)
            .collect();
        let h = ProjHyperplane::new(&c).ok()?;
        (&h != l && tube_inside_tube(&h, r2, l, outer2)).then_some(h)
    })
}

impl FamilySpec {
    pub fn new(anchors: Vec<Anchor>, base: SchottkySystem) -> Result<Self> {
        let n = base.dim();
        let dims: Vec<usize> = anchors
            .iter()
            .flat_map(|a| [a.p.dim(), a.l.dim()])
            .collect();
        check_dims(n, &dims)?;
        if let Err(report) = verify_system(&base) {
            return Err(Error::PreconditionViolated(format!(
                "base system fails verification:\n{report}"
            )));
        }
        for (i, a) in anchors.iter().enumerate() {
            require(a.l.contains(&a.p), || format!("anchor {i}: p ∈ L fails"))?;
            check_radii(&a.eps2, &a.del2)?;
            require(base.repelling().disjoint_from_ball(&a.p, &a.eps2), || {
                format!("anchor {i}: [p]_ε meets the base repelling region")
            })?;
            require(base.attracting().disjoint_from_tube(&a.l, &a.del2), || {
                format!("anchor {i}: [L]_δ meets the base attracting region")
            })?;
            for (j, b) in anchors.iter().enumerate() {
                if i != j {
                    require(disjoint_ball_tube(&a.p, &a.eps2, &b.l, &b.del2), || {
                        format!(
                            "[p_{i}]_ε ∩ [L_{j}]_δ = ∅ fails, d² = {}",
                            dist2_point_hyperplane(&a.p, &b.l).value()
                        )
                    })?;
                }
            }
        }
        let four = BigRational::from_integer(4.into());
        let mut slots = Vec::with_capacity(anchors.len());
        for (i, a) in anchors.iter().enumerate() {
            let gd2 = &a.del2 / &four;
            let ge2 = a.eps2.clone().min(gd2.clone());
            let tilted = tilted_through(&a.p, &a.l, &gd2, &a.del2).ok_or_else(|| {
                Error::PreconditionViolated(format!("anchor {i}: no second hyperplane found"))
            })?;
            let mut pair = Vec::with_capacity(2);
            for l in [&a.l, &tilted] {
                let u = Rank1Unipotent::from_pair(&a.p, l)?;
                let m = contraction_power(&u, &ge2, &gd2)?;
                pair.push(Generator::new(
                    u.power(&m).expect("m ≥ 1"),
                    ge2.clone(),
                    gd2.clone(),
                ));
            }
            let second = pair.pop().expect("two");
            let first = pair.pop().expect("two");
            slots.push([first, second]);
        }
        Ok(FamilySpec {
            anchors,
            base,
            slots,
        })
    }

    /// `len` anchors on the pencil `[M : k : 0 : …]`, `ker(−k, M, 0, …)` with
    /// `k = ±1, ±2, …`, radius `1/(5M)`, around a dense base system at
    /// `([1:0:…], ker e₂)`.
    pub fn standard(n: usize, len: usize, config: &ConstructionConfig) -> Result<Self> {
        check_dims(n, &[])?;
        let m = len.div_ceil(2).max(1) as i64;
        let r2 = BigRational::new(BigInt::one(), BigInt::from(25 * m * m));
        let base = build_profinitely_dense(
            &ProjPoint::new(&unit(n, 0))?,
            &ProjHyperplane::new(&unit(n, 1))?,
            &r2,
            &r2,
            config,
        )?
        .system;
        let anchors = slot_coefficients(len, false)
            .into_iter()
            .map(|k| {
                let mut p = vec![BigInt::zero(); n];
                p[0] = m.into();
                p[1] = k.into();
                let mut f = vec![BigInt::zero(); n];
                f[0] = (-k).into();
                f[1] = m.into();
                Ok(Anchor {
                    p: ProjPoint::new(&p)?,
                    l: ProjHyperplane::new(&f)?,
                    eps2: r2.clone(),
                    del2: r2.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(anchors, base)
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn base(&self) -> &SchottkySystem {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// The two candidate generators at slot `i`.
    pub fn candidates(&self, i: usize) -> Option<&[Generator; 2]> {
        self.slots.get(i)
    }

    fn check_bits(&self, bits: &[bool]) -> Result<()> {
        require(bits.len() == self.len(), || {
            format!("expected {} bits, got {}", self.len(), bits.len())
        })
    }
}

pub fn family_member(spec: &FamilySpec, bits: &[bool]) -> Result<SchottkySystem> {
    spec.check_bits(bits)?;
    let chosen: Vec<Generator> = spec
        .slots
        .iter()
        .zip(bits)
        .map(|(s, &b)| s[usize::from(b)].clone())
        .collect();
    let mut balls = Region::new();
    let mut tubes = Region::new();
    for a in &spec.anchors {
        balls = balls.with_ball(a.p.clone(), a.eps2.clone());
        tubes = tubes.with_tube(a.l.clone(), a.del2.clone());
    }
    reverify(spec.base.extended(chosen, &balls, &tubes))
}

/// Certificate for `⟨S_f ∪ S_g⟩`: at the first slot where `f` and `g`
/// differ, both candidates are present and form a `Z²` pair.
pub fn family_union_cert(
    spec: &FamilySpec,
    f: &[bool],
    g: &[bool],
    config: &ConstructionConfig,
) -> Result<FullGroupCert> {
    spec.check_bits(f)?;
    spec.check_bits(g)?;
    let i = f
        .iter()
        .zip(g)
        .position(|(a, b)| a != b)
        .ok_or(Error::EqualFunctions)?;
    let mut gens = spec.base.matrices();
    let mut at = [0usize; 2];
    for (j, slot) in spec.slots.iter().enumerate() {
        let mut push = |b: bool, gens: &mut Vec<GroupElement>| {
            if j == i {
                at[usize::from(b)] = gens.len();
            }
            gens.push(slot[usize::from(b)].u.matrix());
        };
        push(f[j], &mut gens);
        if f[j] != g[j] {
            push(g[j], &mut gens);
        }
    }
    let [s1, s2] = &spec.slots[i];
    let pair = z2_pair_cert(&s1.u, &s2.u.matrix())
        .map_err(|r| Error::PreconditionViolated(format!("slot {i}: {r}")))?;
    let density = density_witness(&gens, &config.density_moduli(), config.bfs_cap)?;
    Ok(FullGroupCert {
        generators: gens,
        extra: None,
        u_expr: vec![Letter::Gen(at[0], 1)],
        w_expr: vec![Letter::Gen(at[1], 1)],
        pair,
        density,
    })
}

/// The fixed data of the avoidance construction: target hyperplanes `L₁`,
/// `L₂` with tube radius `ρ`, and the anchor `p₀ ∈ L₀` of the initial system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AvoidanceInstance {
    pub l1: ProjHyperplane,
    pub l2: ProjHyperplane,
    pub rho2: BigRational,
    pub p0: ProjPoint,
    pub l0: ProjHyperplane,
}

impl AvoidanceInstance {
    pub fn new(
        l1: ProjHyperplane,
        l2: ProjHyperplane,
        rho2: BigRational,
        p0: ProjPoint,
        l0: ProjHyperplane,
    ) -> Result<Self> {
        let inst = AvoidanceInstance {
            l1,
            l2,
            rho2,
            p0,
            l0,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p0.dim();
        check_dims(n, &[self.l0.dim(), self.l1.dim(), self.l2.dim()])?;
        require(self.rho2.is_positive(), || "ρ must be positive".into())?;
        require(
            self.l0 != self.l1 && self.l0 != self.l2 && self.l1 != self.l2,
            || "L₀, L₁, L₂ must be pairwise distinct".into(),
        )?;
        require(self.l0.contains(&self.p0), || "p₀ ∈ L₀ fails".into())?;
        require(
            !self.l1.contains(&self.p0) && !self.l2.contains(&self.p0),
            || "p₀ ∉ L₁ ∪ L₂ fails".into(),
        )?;
        require(
            disjoint_ball_tube(&self.p0, &self.rho2, &self.l1, &self.rho2),
            || {
                format!(
                    "[p₀]_ρ ∩ [L₁]_ρ = ∅ fails, d² = {}",
                    dist2_point_hyperplane(&self.p0, &self.l1).value()
                )
            },
        )
    }

    /// `[p₀]_ρ ⊆ A` and `[L₀]_ρ ∪ [L₁]_ρ ⊆ R`.
    pub fn hypotheses_hold(&self, sys: &SchottkySystem) -> bool {
        sys.attracting().contains_ball(&self.p0, &self.rho2)
            && sys.repelling().contains_tube(&self.l0, &self.rho2)
            && sys.repelling().contains_tube(&self.l1, &self.rho2)
    }

    /// Dense system with `A = [p₀]_ρ` and `R = [L₀]_ρ ∪ [L₁]_ρ`.
    pub fn initial_system(
        &self,
        config: &ConstructionConfig,
    ) -> Result<(SchottkySystem, DensityWitness)> {
        self.validate()?;
        let dense = build_profinitely_dense(&self.p0, &self.l0, &self.rho2, &self.rho2, config)?;
        let s = dense.system;
        let sys = reverify(SchottkySystem::new(
            s.generators().to_vec(),
            s.attracting().clone(),
            s.repelling()
                .clone()
                .with_tube(self.l1.clone(), self.rho2.clone()),
        )?)?;
        Ok((sys, dense.density))
    }
}

fn throw_fits(
    sys: &SchottkySystem,
    pa: &ProjPoint,
    pb: &ProjPoint,
    la: &ProjHyperplane,
    lb: &ProjHyperplane,
    ball2: &BigRational,
    tube2: &BigRational,
) -> bool {
    sys.repelling().disjoint_from_ball(pa, ball2)
        && sys.repelling().disjoint_from_ball(pb, ball2)
        && sys.attracting().disjoint_from_tube(la, tube2)
        && sys.attracting().disjoint_from_tube(lb, tube2)
        && disjoint_ball_tube(pa, ball2, lb, tube2)
        && disjoint_ball_tube(pb, ball2, la, tube2)
}

/// Rewrites the adjoined letter `x^e` of `cert` as `c⁻¹·u^{me}·c`, where
/// `x = c⁻¹·u^m·c` and `u` is generator `iu`.
fn through_conjugate(
    cert: FullGroupCert,
    c: &GroupElement,
    iu: usize,
    m: i64,
) -> Result<FullGroupCert> {
    let rewrite = |expr: &[Letter]| -> Result<Vec<Letter>> {
        let mut out = Vec::new();
        for &l in expr {
            match l {
                Letter::Gen(..) => out.push(l),
                Letter::Extra(e) => {
                    let me = m
                        .checked_mul(e)
                        .ok_or_else(|| Error::PreconditionViolated("exponent overflow".into()))?;
                    out.extend([Letter::Extra(-1), Letter::Gen(iu, me), Letter::Extra(1)]);
                }
            }
        }
        Ok(out)
    };
    Ok(FullGroupCert {
        u_expr: rewrite(&cert.u_expr)?,
        w_expr: rewrite(&cert.w_expr)?,
        extra: Some(c.clone()),
        ..cert
    })
}

/// One extension step against `g`, where `L ⊆ [L₂]_ρ` and `g·L ⊆ [L₁]_ρ`.
///
/// A point `w ∈ L` outside `A ∪ R` and a hyperplane `L_w ∋ w` missing `A`
/// are found first; a helper unipotent `u` is added with hyperplane through
/// `g·w`, so that `h = g⁻¹·u·g` fixes `w`; finally a pair `p₃ = h·p₂` near
/// `w` is thrown against `h`. The certificate is rewritten in terms of `g`.
pub fn avoid_step(
    sys: &SchottkySystem,
    inst: &AvoidanceInstance,
    g: &GroupElement,
    l: &ProjHyperplane,
    config: &ConstructionConfig,
) -> Result<(SchottkySystem, FullGroupCert)> {
    let n = sys.dim();
    inst.validate()?;
    check_dims(n, &[inst.p0.dim(), g.dim(), l.dim()])?;
    require(!g.is_identity(), || "g must not be the identity".into())?;
    require(dist2_hyperplanes(l, &inst.l2).value() <= &inst.rho2, || {
        format!(
            "L ⊆ [L₂]_ρ fails, d² = {}",
            dist2_hyperplanes(l, &inst.l2).value()
        )
    })?;
    let gl = g.apply_hyperplane(l);
    require(
        dist2_hyperplanes(&gl, &inst.l1).value() <= &inst.rho2,
        || {
            format!(
                "g·L ⊆ [L₁]_ρ fails, g·L = {gl}, d² = {}",
                dist2_hyperplanes(&gl, &inst.l1).value()
            )
        },
    )?;
    require(inst.hypotheses_hold(sys), || {
        "[p₀]_ρ ⊆ A and [L₀ ∪ L₁]_ρ ⊆ R must hold".into()
    })?;
    if let Err(report) = verify_system(sys) {
        return Err(Error::PreconditionViolated(format!(
            "input system fails verification:\n{report}"
        )));
    }
    let depth = config.budget.depth;
    if depth == 0 {
        return Err(exhausted("waypoint w: search budget is zero"));
    }
    let bound = combo_bound(n);
    let (a, r) = (sys.attracting(), sys.repelling());

    let (w, lw) = points_on(l, bound)
        .into_iter()
        .filter(|w| a.excludes(w) && r.excludes(w))
        .find_map(|w| {
            hyperplanes_through(&w, bound)
                .into_iter()
                .find(|c| {
                    dist2_hyperplanes(c, &inst.l2).value() > &inst.rho2
                        && a.disjoint_from_hyperplane(c)
                })
                .map(|c| (w, c))
        })
        .ok_or_else(|| exhausted("waypoint w ∈ L outside A ∪ R with L_w ∌ A"))?;

    let w1 = g.apply_point(&w);
    let (lw1, p1) = hyperplanes_through(&w1, bound)
        .into_iter()
        .filter(|c| a.disjoint_from_hyperplane(c) && !c.contains(&w))
        .find_map(|c| {
            points_on(&c, bound)
                .into_iter()
                .find(|q| {
                    r.excludes(q)
                        && dist2_point_hyperplane(q, &inst.l2).value() > &inst.rho2
                        && !lw.contains(q)
                        && q != &w
                })
                .map(|q| (c, q))
        })
        .ok_or_else(|| exhausted("waypoint L_{w₁} ∋ g·w with a point p₁ outside R ∪ [L₂]_ρ"))?;

    let reach = dist2_point_hyperplane(&w, &lw1)
        .into_inner()
        .min(dist2_point_hyperplane(&p1, &lw).into_inner());
    let d1 = radii(depth)
        .find(|r2| {
            r2 < &reach
                && r.disjoint_from_ball(&p1, r2)
                && a.disjoint_from_tube(&lw1, r2)
                && dist2_points(&w, &p1).value() > r2
        })
        .ok_or_else(|| exhausted("radius δ₁ for the helper generator"))?;
    let star = add_generator(sys, &p1, &lw1, &d1, &d1)?;
    let iu = star.len() - 1;
    let u = star.generators()[iu].u.matrix();
    let h = &(&g.inverse() * &u) * g;

    let (a2, r2) = (star.attracting(), star.repelling());
    let mut found = None;
    'outer: for j in 1..=depth {
        for p2 in near_points(&w, j) {
            let p3 = h.apply_point(&p2);
            if p2 == p3
                || !a2.excludes(&p2)
                || !a2.excludes(&p3)
                || !r2.excludes(&p2)
                || !r2.excludes(&p3)
            {
                continue;
            }
            let (Some(lp2), Some(lp3)) = (through(&p2, lw.covector()), through(&p3, lw.covector()))
            else {
                continue;
            };
            if !a2.disjoint_from_hyperplane(&lp2)
                || !a2.disjoint_from_hyperplane(&lp3)
                || lp3 == h.apply_hyperplane(&lp2)
                || lp3.contains(&p2)
                || lp2.contains(&p3)
            {
                continue;
            }
            if let Some(rad) = radii(depth).find(|x| throw_fits(&star, &p3, &p2, &lp3, &lp2, x, x))
            {
                found = Some((p2, p3, lp2, lp3, rad));
                break 'outer;
            }
        }
    }
    let (p2, p3, lp2, lp3, rad) =
        found.ok_or_else(|| exhausted("waypoint p₂ near w with p₃ = h·p₂"))?;
    let density = config.witness(&star)?;
    let (out, cert) = throw(&star, &h, &p3, &p2, &lp3, &lp2, &rad, &rad, &density)?;
    let cert = through_conjugate(cert, g, iu, 1)?;
    require(inst.hypotheses_hold(&out) && cert.revalidate(), || {
        "extension lost the step hypotheses".into()
    })?;
    Ok((out, cert))
}

/// Runs [`avoid_step`] over a finite list of `(g, L)` inputs.
pub fn avoid_steps(
    sys: &SchottkySystem,
    inst: &AvoidanceInstance,
    steps: &[(GroupElement, ProjHyperplane)],
    config: &ConstructionConfig,
) -> Result<(SchottkySystem, Vec<FullGroupCert>)> {
    let mut cur = sys.clone();
    let mut certs = Vec::with_capacity(steps.len());
    for (g, l) in steps {
        let (next, cert) = avoid_step(&cur, inst, g, l, config)?;
        cur = next;
        certs.push(cert);
    }
    Ok((cur, certs))
}

fn closed_nbhd(nbhd: &Region, x: &ProjPoint) -> bool {
    nbhd.balls
        .iter()
        .any(|b| dist2_points(x, &b.center).value() <= &b.r2)
}

/// `N̄ ∩ g·N̄ = ∅`. A pair of balls `B`, `g·C` is separated when
/// `[g·c]_{λs}` misses `B` or `[g⁻¹·b]_{λr}` misses `C`, where `λ` bounds
/// the Lipschitz constants of `g` and `g⁻¹`.
fn separated_by(nbhd: &Region, g: &GroupElement) -> bool {
    let lip2 = BigRational::from_integer(g.lipschitz2_bound());
    let inv = g.inverse();
    let fwd: Vec<(ProjPoint, BigRational)> = nbhd
        .balls
        .iter()
        .map(|b| (g.apply_point(&b.center), &b.r2 * &lip2))
        .collect();
    let back: Vec<(ProjPoint, BigRational)> = nbhd
        .balls
        .iter()
        .map(|b| (inv.apply_point(&b.center), &b.r2 * &lip2))
        .collect();
    nbhd.balls.iter().zip(&back).all(|(b, (bc, br2))| {
        nbhd.balls.iter().zip(&fwd).all(|(c, (gc, gr2))| {
            disjoint_balls(&b.center, &b.r2, gc, gr2) || disjoint_balls(bc, br2, &c.center, &c.r2)
        })
    })
}

/// Assumption 1 of the quadruple step: `p ∉ N̄ ∪ R` (hence also
/// `p ∉ gN̄ ∪ gR` since `g·p = p`) and `N̄ ∩ g·N̄ = ∅`.
pub fn quad_assumption_one(
    quad: &SchottkyQuadruple,
    g: &GroupElement,
    p: &ProjPoint,
) -> Result<()> {
    require(&g.apply_point(p) == p, || "g·p = p fails".into())?;
    require(!closed_nbhd(&quad.open_nbhd, p), || {
        format!("p ∉ N̄ fails for p = {p}")
    })?;
    require(quad.base.repelling().excludes(p), || {
        format!("p ∉ R fails for p = {p}")
    })?;
    require(separated_by(&quad.open_nbhd, g), || {
        "N̄ ∩ g·N̄ = ∅ fails".into()
    })
}

fn reverify_quad(quad: SchottkyQuadruple) -> Result<SchottkyQuadruple> {
    match verify_quadruple(&quad) {
        Ok(_) => Ok(quad),
        Err(report) => Err(Error::PreconditionViolated(format!(
            "quadruple fails verification:\n{report}"
        ))),
    }
}

/// Starting quadruple for the non-2-transitivity construction: the system of
/// [`starting_system`] at anchors `p₁, k·p₁, k²·p₁` chosen away from the
/// fixed point `p` of `g`, with `N` the open `δ`-balls around the anchors.
pub fn quad_start(
    g: &GroupElement,
    p: &ProjPoint,
    k: &GroupElement,
    config: &ConstructionConfig,
) -> Result<(SchottkyQuadruple, StartCert)> {
    let n = g.dim();
    check_dims(n, &[p.dim(), k.dim()])?;
    require(!g.is_identity(), || "g must not be the identity".into())?;
    require(&g.apply_point(p) == p, || {
        format!("g·p = p fails, g·p = {}", g.apply_point(p))
    })?;
    let k2 = k * k;
    let elems = [
        GroupElement::identity(n),
        k.clone(),
        k2.clone(),
        g.clone(),
        g * k,
        g * &k2,
    ];
    for i in 0..elems.len() {
        for j in i + 1..elems.len() {
            require(elems[i] != elems[j], || {
                "id, k, k², g, gk, gk² must be pairwise distinct".into()
            })?;
        }
    }
    let depth = config.budget.depth;
    if depth == 0 {
        return Err(exhausted("anchor search: search budget is zero"));
    }
    let bound = combo_bound(n);
    let candidates = combinations(&(0..n).map(|i| unit(n, i)).collect::<Vec<_>>(), 2);
    let mut anchors = None;
    'search: for c in candidates {
        let p1 = ProjPoint::new(&c)?;
        let p2 = k.apply_point(&p1);
        let p3 = k2.apply_point(&p1);
        let pts = [
            p1.clone(),
            p2.clone(),
            p3.clone(),
            g.apply_point(&p1),
            g.apply_point(&p2),
            g.apply_point(&p3),
        ];
        if (0..6).any(|i| (i + 1..6).any(|j| pts[i] == pts[j])) {
            continue;
        }
        for l1 in hyperplanes_through(&p1, bound) {
            let l2 = k.apply_hyperplane(&l1);
            if l1.contains(p)
                || l2.contains(p)
                || l1.contains(&p2)
                || l1.contains(&p3)
                || l2.contains(&p1)
                || l2.contains(&p3)
            {
                continue;
            }
            let bad = [k2.apply_hyperplane(&l1), l2.clone()];
            for l3 in hyperplanes_through(&p3, bound) {
                if bad.contains(&l3) || l3.contains(p) || l3.contains(&p1) || l3.contains(&p2) {
                    continue;
                }
                anchors = Some([(p1, l1), (p2, l2), (p3, l3)]);
                break 'search;
            }
        }
    }
    let anchors = anchors.ok_or_else(|| exhausted("anchor search for p₁, L₁, L₃"))?;
    let del2 = radii(depth)
        .find(|r2| {
            let cross = anchors.iter().enumerate().all(|(i, (pi, _))| {
                anchors
                    .iter()
                    .enumerate()
                    .all(|(j, (_, lj))| i == j || disjoint_ball_tube(pi, r2, lj, r2))
            });
            let mut nbhd = Region::new();
            for (pi, _) in &anchors {
                nbhd = nbhd.with_ball(pi.clone(), r2.clone());
            }
            let away = anchors.iter().all(|(pi, li)| {
                dist2_points(p, pi).value() > r2 && dist2_point_hyperplane(p, li).value() > r2
            });
            cross && away && separated_by(&nbhd, g)
        })
        .ok_or_else(|| exhausted("radius δ for the starting quadruple"))?;
    let eps2 = &del2 / BigRational::from_integer(4.into());
    let (sys, cert) = starting_system(k, &anchors, &eps2, &del2, config)?;
    let mut nbhd = Region::new();
    for (pi, _) in &anchors {
        nbhd = nbhd.with_ball(pi.clone(), del2.clone());
    }
    let quad = reverify_quad(SchottkyQuadruple {
        base: sys,
        open_nbhd: nbhd,
    })?;
    quad_assumption_one(&quad, g, p)?;
    Ok((quad, cert))
}

/// Which element the extension step certified against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    H,
    Conjugate,
}

/// Extends `quad` so that `⟨S₊, h⟩` or `⟨S₊, g⁻¹hg⟩` is all of `SL(n, Z)`:
/// the branch is the one whose image of `p` lies outside `N`.
pub fn quad_extend(
    quad: &SchottkyQuadruple,
    g: &GroupElement,
    p: &ProjPoint,
    h: &GroupElement,
    config: &ConstructionConfig,
) -> Result<(SchottkyQuadruple, FullGroupCert, Branch)> {
    let n = quad.base.dim();
    check_dims(n, &[g.dim(), p.dim(), h.dim()])?;
    require(!h.is_identity(), || "h must not be the identity".into())?;
    require(!g.is_identity(), || "g must not be the identity".into())?;
    quad_assumption_one(quad, g, p)?;
    if let Err(report) = verify_quadruple(quad) {
        return Err(Error::PreconditionViolated(format!(
            "input quadruple fails verification:\n{report}"
        )));
    }
    let (hb, branch) = if quad.nbhd_contains(&h.apply_point(p)) {
        (&(&g.inverse() * h) * g, Branch::Conjugate)
    } else {
        (h.clone(), Branch::H)
    };
    let y = hb.apply_point(p);
    require(!quad.nbhd_contains(&y), || {
        "both h·p and g⁻¹hg·p lie in N".into()
    })?;
    let depth = config.budget.depth;
    if depth == 0 {
        return Err(exhausted("waypoint L_y: search budget is zero"));
    }
    let bound = combo_bound(n);
    let (a, r, nbhd) = (
        quad.base.attracting(),
        quad.base.repelling(),
        &quad.open_nbhd,
    );

    let (ly, py) = hyperplanes_through(&y, bound)
        .into_iter()
        .filter(|c| a.disjoint_from_hyperplane(c) && !c.contains(p))
        .find_map(|c| {
            points_on(&c, bound)
                .into_iter()
                .find(|q| {
                    let gq = g.apply_point(q);
                    !closed_nbhd(nbhd, q) && r.excludes(q) && !closed_nbhd(nbhd, &gq) && &gq != q
                })
                .map(|q| (c, q))
        })
        .ok_or_else(|| exhausted("waypoint L_y ∋ h·p missing A with p_y outside N̄ ∪ R"))?;
    let dy = radii(depth)
        .find(|r2| {
            r.disjoint_from_ball(&py, r2)
                && a.disjoint_from_tube(&ly, r2)
                && dist2_points(p, &py).value() > r2
                && dist2_point_hyperplane(p, &ly).value() > r2
                && separated_by(&nbhd.clone().with_ball(py.clone(), r2.clone()), g)
        })
        .ok_or_else(|| exhausted("radius δ for p_y"))?;
    let four = BigRational::from_integer(4.into());
    let s0 = add_generator(&quad.base, &py, &ly, &(&dy / &four), &dy)?;
    let n0 = nbhd.clone().with_ball(py.clone(), dy.clone());
    let iu = s0.len() - 1;
    let u = s0.generators()[iu].u.clone();

    let hb_inv = hb.inverse();
    let g_inv = g.inverse();
    let (m, f) = (1..=i64::from(depth.max(1)))
        .map(|m| (m, hb_inv.conj(&u.power_matrix(&m.into()))))
        .find(|(_, f)| f != g && f != &g_inv)
        .ok_or_else(|| exhausted("power m with id, f, g, gf distinct"))?;
    // hb_inv.conj(x) = hb⁻¹·x·hb

    let (a0, r0) = (s0.attracting(), s0.repelling());
    let near_p: Vec<Vec<BigInt>> = combinations(&kernel_basis(p.coords()), bound);
    let through_candidates = |x: &ProjPoint| -> Vec<ProjHyperplane> {
        let mut out: Vec<ProjHyperplane> = near_p.iter().filter_map(|c| through(x, c)).collect();
        out.extend(hyperplanes_through(x, bound));
        out
    };
    let mut found = None;
    'outer: for j in 1..=depth {
        for p1 in near_points(p, j) {
            let p2 = f.apply_point(&p1);
            let p3 = g.apply_point(&p1);
            let p4 = g.apply_point(&p2);
            let pts = [&p1, &p2, &p3, &p4];
            if (0..4).any(|i| (i + 1..4).any(|k| pts[i] == pts[k])) {
                continue;
            }
            if [&p1, &p2]
                .iter()
                .any(|q| closed_nbhd(&n0, q) || !r0.excludes(q))
            {
                continue;
            }
            let fits = |l: &ProjHyperplane, own: &ProjPoint| {
                a0.disjoint_from_hyperplane(l)
                    && !l.contains(p)
                    && pts.iter().all(|q| *q == own || !l.contains(q))
            };
            let Some(l1) = through_candidates(&p1).into_iter().find(|l| fits(l, &p1)) else {
                continue;
            };
            let fl1 = f.apply_hyperplane(&l1);
            let Some(l2) = through_candidates(&p2)
                .into_iter()
                .find(|l| fits(l, &p2) && l != &fl1)
            else {
                continue;
            };
            let rad = radii(depth).find(|r2| {
                let e2 = r2 / &four;
                throw_fits(&s0, &p2, &p1, &l2, &l1, r2, r2)
                    && throw_fits(&s0, &p2, &p1, &l2, &l1, &e2, r2)
                    && [(&p1, &l1), (&p2, &l2)].iter().all(|(q, l)| {
                        dist2_points(p, q).value() > r2 && dist2_point_hyperplane(p, l).value() > r2
                    })
                    && separated_by(
                        &n0.clone()
                            .with_ball(p1.clone(), r2.clone())
                            .with_ball(p2.clone(), r2.clone()),
                        g,
                    )
            });
            if let Some(rad) = rad {
                found = Some((p1, p2, l1, l2, rad));
                break 'outer;
            }
        }
    }
    let (p1, p2, l1, l2, rad) =
        found.ok_or_else(|| exhausted("waypoint p₁ near p with p₂ = f·p₁"))?;
    let density = config.witness(&s0)?;
    let (out, cert) = throw(&s0, &f, &p2, &p1, &l2, &l1, &(&rad / &four), &rad, &density)?;
    let cert = through_conjugate(cert, &hb, iu, m)?;
    let quad = reverify_quad(SchottkyQuadruple {
        base: out,
        open_nbhd: n0.with_ball(p1, rad.clone()).with_ball(p2, rad),
    })?;
    quad_assumption_one(&quad, g, p)?;
    require(cert.revalidate(), || {
        "certificate does not revalidate".into()
    })?;
    Ok((quad, cert, branch))
}

/// Runs [`quad_extend`] over a finite list of nontrivial elements.
pub fn quad_extend_all(
    quad: &SchottkyQuadruple,
    g: &GroupElement,
    p: &ProjPoint,
    hs: &[GroupElement],
    config: &ConstructionConfig,
) -> Result<(SchottkyQuadruple, Vec<(FullGroupCert, Branch)>)> {
    let mut cur = quad.clone();
    let mut out = Vec::with_capacity(hs.len());
    for h in hs {
        let (next, cert, branch) = quad_extend(&cur, g, p, h, config)?;
        cur = next;
        out.push((cert, branch));
    }
    Ok((cur, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congruence::{closure_order, reduce_mod};
    use crate::exact::{ints, rat};

    fn pt(v: &[i64]) -> ProjPoint {
        ProjPoint::from_i64(v).unwrap()
    }

    fn hp(v: &[i64]) -> ProjHyperplane {
        ProjHyperplane::from_i64(v).unwrap()
    }

    fn el(rows: &[&[i64]]) -> GroupElement {
        GroupElement::from_i64_rows(rows).unwrap()
    }

    fn cycle() -> GroupElement {
        el(&[&[0, 0, 1], &[1, 0, 0], &[0, 1, 0]])
    }

    fn cfg() -> ConstructionConfig {
        ConstructionConfig::default()
    }

    #[test]
    fn tuples_are_ordered_by_size() {
        let t = tuples(2, 2);
        assert_eq!(t.len(), 24);
        assert!(t[..8].iter().all(|v| v.iter().all(|x| x.abs() <= 1)));
        assert!(t[8..].iter().all(|v| v.iter().any(|x| x.abs() == 2)));
    }

    #[test]
    fn kernel_basis_is_orthogonal_and_spans() {
        let x = ints(&[2, -3, 5, 0]);
        let b = kernel_basis(&x);
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|v| dot(v, &x).is_zero()));
    }

    #[test]
    fn through_contains_point() {
        let x = pt(&[3, 1, -2]);
        let l = through(&x, &ints(&[0, 0, 1])).unwrap();
        assert!(l.contains(&x));
    }

    #[test]
    fn exponent_multiple_small_and_fallback() {
        assert_eq!(
            exponent_multiple(3, 3, DEFAULT_BFS_CAP).unwrap(),
            BigInt::from(312)
        );
        assert_eq!(
            exponent_multiple(3, 4, DEFAULT_BFS_CAP).unwrap(),
            BigInt::from(168)
        );
        assert_eq!(
            exponent_multiple(3, 9, 1000).unwrap(),
            BigInt::from(5616u64 * 3u64.pow(8))
        );
        assert_eq!(exponent_multiple(3, 6, 1000), Err(Error::BadModulus(6)));
    }

    #[test]
    fn dense_example_n3() {
        let p = pt(&[1, 0, 0]);
        let l = hp(&[0, 1, 0]);
        let b = build_profinitely_dense(&p, &l, &rat(1, 10000), &rat(1, 2500), &cfg()).unwrap();
        assert_eq!(b.system.len(), 12);
        assert!(verify_system(&b.system).is_ok());
        assert!(b.density.is_valid());
        assert!(b.records_consistent());
        let mats = b.system.matrices();
        let mod3: Vec<_> = mats.iter().map(|g| reduce_mod(g, 3).unwrap()).collect();
        assert_eq!(closure_order(&mod3, DEFAULT_BFS_CAP).unwrap(), 5616);
        let mod4: Vec<_> = mats.iter().map(|g| reduce_mod(g, 4).unwrap()).collect();
        assert_eq!(closure_order(&mod4, DEFAULT_BFS_CAP).unwrap(), 43008);
        // first batch reduces to the elementary matrices modulo 3
        for r in b.records.iter().filter(|r| r.modulus == 3) {
            let e = GroupElement::elementary(3, r.a, r.b, BigInt::one());
            assert_eq!(
                reduce_mod(&r.generator(), 3).unwrap(),
                reduce_mod(&e, 3).unwrap()
            );
        }
    }

    #[test]
    fn dense_rejects_point_off_hyperplane() {
        let err = build_profinitely_dense(
            &pt(&[1, 0, 0]),
            &hp(&[1, 1, 0]),
            &rat(1, 100),
            &rat(1, 100),
            &cfg(),
        );
        assert!(matches!(err, Err(Error::PreconditionViolated(_))));
    }

    fn start_anchors() -> [(ProjPoint, ProjHyperplane); 3] {
        [
            (pt(&[1, 0, 0]), hp(&[0, 1, 1])),
            (pt(&[0, 1, 0]), hp(&[1, 0, 1])),
            (pt(&[0, 0, 1]), hp(&[1, -1, 0])),
        ]
    }

    #[test]
    fn starting_example() {
        let (sys, cert) =
            starting_system(&cycle(), &start_anchors(), &rat(1, 16), &rat(1, 16), &cfg()).unwrap();
        assert!(verify_system(&sys).is_ok());
        assert!(cert.revalidate());
        assert_eq!(sys.len(), 12 + 1 + 2);
    }

    #[test]
    fn starting_rejects_l3_equal_k2_l1() {
        let mut a = start_anchors();
        a[2].1 = cycle().pow(2).apply_hyperplane(&a[0].1);
        let err = starting_system(&cycle(), &a, &rat(1, 16), &rat(1, 16), &cfg()).unwrap_err();
        assert!(
            matches!(err, Error::PreconditionViolated(ref s) if s.contains("bullet 2")),
            "{err:?}"
        );
    }

    #[test]
    fn starting_rejects_bad_l1() {
        let mut a = start_anchors();
        a[0].1 = hp(&[0, 1, 0]);
        let err = starting_system(&cycle(), &a, &rat(1, 16), &rat(1, 16), &cfg()).unwrap_err();
        assert!(
            matches!(err, Error::PreconditionViolated(ref s) if s.contains("bullet")),
            "{err:?}"
        );
    }

    #[test]
    fn family_example() {
        let spec = FamilySpec::standard(3, 3, &cfg()).unwrap();
        let f = [false, false, false];
        let g = [true, true, true];
        let sf = family_member(&spec, &f).unwrap();
        let sg = family_member(&spec, &g).unwrap();
        let base = spec.base().len();
        assert_eq!(sf.generators()[..base], sg.generators()[..base]);
        assert!((0..3).all(|i| sf.generators()[base + i] != sg.generators()[base + i]));
        assert!(matches!(
            family_member(&spec, &[true, false]),
            Err(Error::PreconditionViolated(_))
        ));
        let cert = family_union_cert(&spec, &[false, true, false], &[false, false, false], &cfg())
            .unwrap();
        assert!(cert.revalidate());
        assert_eq!(cert.u_expr, vec![Letter::Gen(base + 2, 1)]);
        assert_eq!(cert.w_expr, vec![Letter::Gen(base + 1, 1)]);
        assert_eq!(
            family_union_cert(&spec, &f, &f, &cfg()),
            Err(Error::EqualFunctions)
        );
    }

    fn avoidance() -> AvoidanceInstance {
        AvoidanceInstance::new(
            hp(&[1, 0, 0]),
            hp(&[0, 1, 0]),
            rat(1, 100),
            pt(&[1, 1, 0]),
            hp(&[0, 0, 1]),
        )
        .unwrap()
    }

    #[test]
    fn avoid_example() {
        let inst = avoidance();
        let (sys, _) = inst.initial_system(&cfg()).unwrap();
        let g = el(&[&[0, -1, 0], &[1, 0, 0], &[0, 0, 1]]);
        let (out, cert) = avoid_step(&sys, &inst, &g, &inst.l2, &cfg()).unwrap();
        assert!(verify_system(&out).is_ok());
        assert!(inst.hypotheses_hold(&out));
        assert_eq!(cert.extra.as_ref(), Some(&g));
        assert!(cert.revalidate());
        assert_eq!(out.generators()[..sys.len()], sys.generators()[..]);
    }

    #[test]
    fn avoid_rejects_and_exhausts() {
        let inst = avoidance();
        let (sys, _) = inst.initial_system(&cfg()).unwrap();
        let bad = el(&[&[1, 0, 0], &[0, 1, 0], &[1, 0, 1]]);
        assert!(matches!(
            avoid_step(&sys, &inst, &bad, &inst.l2, &cfg()),
            Err(Error::PreconditionViolated(_))
        ));
        let g = el(&[&[0, -1, 0], &[1, 0, 0], &[0, 0, 1]]);
        let mut zero = cfg();
        zero.budget.depth = 0;
        assert!(matches!(
            avoid_step(&sys, &inst, &g, &inst.l2, &zero),
            Err(Error::SearchExhausted(_))
        ));
    }

    fn shear() -> GroupElement {
        el(&[&[1, 1, 0], &[0, 1, 0], &[0, 0, 1]])
    }

    #[test]
    fn quad_example() {
        let p = pt(&[1, 0, 0]);
        let (quad, cert) = quad_start(&shear(), &p, &cycle(), &cfg()).unwrap();
        assert!(cert.revalidate());
        assert!(verify_quadruple(&quad).is_ok());
        assert!(quad_assumption_one(&quad, &shear(), &p).is_ok());

        let far = el(&[&[1, 0, 0], &[0, 1, 0], &[1, 0, 1]]);
        let (next, cert, branch) = quad_extend(&quad, &shear(), &p, &far, &cfg()).unwrap();
        assert_eq!(branch, Branch::H);
        assert!(cert.revalidate());
        assert!(verify_quadruple(&next).is_ok());
        assert!(quad_assumption_one(&next, &shear(), &p).is_ok());

        let into_n =
            crate::lattice::complete_column(quad.open_nbhd.balls[0].center.coords()).unwrap();
        assert!(quad.nbhd_contains(&into_n.apply_point(&p)));
        let (_, cert, branch) = quad_extend(&next, &shear(), &p, &into_n, &cfg()).unwrap();
        assert_eq!(branch, Branch::Conjugate);
        assert!(cert.revalidate());

        assert!(quad_extend(&quad, &shear(), &p, &GroupElement::identity(3), &cfg()).is_err());
    }

    #[test]
    fn quad_rejects_degenerate_input() {
        let p = pt(&[1, 0, 0]);
        assert!(quad_start(&GroupElement::identity(3), &p, &cycle(), &cfg()).is_err());
        assert!(quad_start(&shear(), &p, &shear(), &cfg()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::sync::OnceLock;

        fn spec() -> &'static FamilySpec {
            static SPEC: OnceLock<FamilySpec> = OnceLock::new();
            SPEC.get_or_init(|| FamilySpec::standard(3, 4, &ConstructionConfig::default()).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn members_agreeing_on_a_prefix_share_those_generators(
                f in prop::collection::vec(any::<bool>(), 4),
                g in prop::collection::vec(any::<bool>(), 4),
                k in 0usize..=4,
            ) {
                let g: Vec<bool> = f[..k].iter().chain(&g[k..]).copied().collect();
                let sf = family_member(spec(), &f).unwrap();
                let sg = family_member(spec(), &g).unwrap();
                let shared = spec().base().len() + k;
                prop_assert_eq!(&sf.generators()[..shared], &sg.generators()[..shared]);
            }

            #[test]
            fn candidates_share_point_and_split_hyperplanes(i in 0usize..4) {
                let [a, b] = spec().candidates(i).unwrap();
                let anchor = &spec().anchors()[i];
                prop_assert_eq!(a.u.point(), anchor.p.clone());
                prop_assert_eq!(b.u.point(), anchor.p.clone());
                prop_assert_ne!(a.u.hyperplane(), b.u.hyperplane());
                prop_assert!(tube_inside_tube(&b.u.hyperplane(), &b.del2, &anchor.l, &anchor.del2));
            }

            #[test]
            fn kernel_basis_spans_the_complement(x in prop::collection::vec(-9i64..=9, 3..6)) {
                prop_assume!(x.iter().any(|&c| c != 0));
                let x = ints(&x);
                let basis = kernel_basis(&x);
                prop_assert_eq!(basis.len(), x.len() - 1);
                prop_assert!(basis.iter().all(|v| dot(v, &x).is_zero()));
                let m = crate::matrix::IntMatrix::from_rows(&basis.iter().cloned().chain([x.clone()]).collect::<Vec<_>>()).unwrap();
                prop_assert_eq!(m.rank(), x.len());
            }

            #[test]
            fn through_passes_through_the_point(
                x in prop::collection::vec(-9i64..=9, 3),
                f in prop::collection::vec(-9i64..=9, 3),
            ) {
                prop_assume!(x.iter().any(|&c| c != 0));
                let x = ProjPoint::from_i64(&x).unwrap();
                if let Some(l) = through(&x, &ints(&f)) {
                    prop_assert!(l.contains(&x));
                }
            }
        }
    }
}
