//! Schottky systems `(S, A, R)` of rank-1 unipotents, their ping-pong
//! verification, and the certificates built on top of them.
//!
//! A system passes [`verify_system`] when
//!
//! 1. every generator contracts `P \ (L_u)_δ` into `(p_u)_ε` (certified),
//! 2. `(p_u)_ε ∩ (L_v)_δ = ∅` for `u ≠ v`,
//! 3. each ball `(p_u)_ε` lies in `A`,
//! 4. each tube `(L_u)_δ` lies in `R`,
//!
//! together with `δ_u ≥ ε_u > 0` and `A ⊆ R`. Nonempty reduced words in the
//! generators are then never the identity.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rand::Rng;

use crate::congruence::{density_witness, DensityWitness};
use crate::exact::{
    ball_inside_open_ball, disjoint_ball_tube, dist2_point_hyperplane, dist2_points,
    ProjHyperplane, ProjPoint, Region,
};
use crate::matrix::GroupElement;
use crate::unipotent::{certify_contraction, contraction_power, Rank1Unipotent};
use crate::{Error, Result};

pub use crate::search::{conjugator_search, SearchBudget};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub u: Rank1Unipotent,
    pub eps2: BigRational,
    pub del2: BigRational,
}

impl Generator {
    pub fn new(u: Rank1Unipotent, eps2: BigRational, del2: BigRational) -> Self {
        Generator { u, eps2, del2 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchottkySystem {
    n: usize,
    generators: Vec<Generator>,
    attracting: Region,
    repelling: Region,
}

impl SchottkySystem {
    pub fn new(generators: Vec<Generator>, attracting: Region, repelling: Region) -> Result<Self> {
        let n = generators
            .first()
            .ok_or_else(|| Error::PreconditionViolated("a system needs a generator".into()))?
            .u
            .dim();
        let dims = generators
            .iter()
            .map(|g| g.u.dim())
            .chain(attracting.balls.iter().map(|b| b.center.dim()))
            .chain(attracting.tubes.iter().map(|t| t.plane.dim()))
            .chain(repelling.balls.iter().map(|b| b.center.dim()))
            .chain(repelling.tubes.iter().map(|t| t.plane.dim()));
        for d in dims {
            if d != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: d,
                });
            }
        }
        Ok(SchottkySystem {
            n,
            generators,
            attracting,
            repelling,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn attracting(&self) -> &Region {
        &self.attracting
    }

    pub fn repelling(&self) -> &Region {
        &self.repelling
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn matrices(&self) -> Vec<GroupElement> {
        self.generators.iter().map(|g| g.u.matrix()).collect()
    }

    /// Structural extension order: generators, `A` and `R` of `other` all
    /// appear in `self`.
    pub fn contains_system(&self, other: &SchottkySystem) -> bool {
        other.generators.iter().all(|g| self.generators.contains(g))
            && other.attracting.is_structural_subset_of(&self.attracting)
            && other.repelling.is_structural_subset_of(&self.repelling)
    }

    pub(crate) fn extended(
        &self,
        new: Vec<Generator>,
        balls: &Region,
        tubes: &Region,
    ) -> SchottkySystem {
        let mut out = self.clone();
        out.generators.extend(new);
        out.attracting = out.attracting.union(balls);
        out.repelling = out.repelling.union(tubes);
        out
    }

    /// Index of the generator whose matrix is `g`, if any.
    pub fn position(&self, u: &Rank1Unipotent) -> Option<usize> {
        self.generators.iter().position(|g| &g.u == u)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// 0 for well-formedness (radii, `A ⊆ R`), 1–4 for the four conditions.
    pub condition: u8,
    pub generator: Option<usize>,
    pub other: Option<usize>,
    pub inequality: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn conditions(&self) -> Vec<u8> {
        let mut c: Vec<u8> = self.violations.iter().map(|v| v.condition).collect();
        c.dedup();
        c
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "condition {}: {}", v.condition, v.inequality)?;
        }
        Ok(())
    }
}

/// Record of the inequalities a passing system satisfied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PingPongCert {
    pub generators: usize,
    pub checks: Vec<String>,
}

/// Checks the four Schottky conditions exactly and either lists every
/// inequality that held or every one that failed.
pub fn verify_system(sys: &SchottkySystem) -> core::result::Result<PingPongCert, ViolationReport> {
    let mut bad = Vec::new();
    let mut good = Vec::new();
    let mut record = |ok: bool,
                      condition: u8,
                      generator: Option<usize>,
                      other: Option<usize>,
                      inequality: String| {
        if ok {
            good.push(format!("condition {condition}: {inequality}"));
        } else {
            bad.push(Violation {
                condition,
                generator,
                other,
                inequality,
            });
        }
    };
    let gens = &sys.generators;
    for (i, g) in gens.iter().enumerate() {
        let ok = g.eps2.is_positive() && g.del2 >= g.eps2;
        record(
            ok,
            0,
            Some(i),
            None,
            format!("generator {i}: 0 < ε² = {} ≤ δ² = {}", g.eps2, g.del2),
        );
    }
    let radii_ok = sys.attracting.radii_positive() && sys.repelling.radii_positive();
    record(
        radii_ok,
        0,
        None,
        None,
        "all region radii are positive".into(),
    );
    for (k, b) in sys.attracting.balls.iter().enumerate() {
        let ok = sys.repelling.contains_ball(&b.center, &b.r2);
        record(
            ok,
            0,
            None,
            None,
            format!(
                "A-ball {k} at {} with r² = {} lies in a component of R",
                b.center, b.r2
            ),
        );
    }
    for (k, t) in sys.attracting.tubes.iter().enumerate() {
        let ok = sys.repelling.contains_tube(&t.plane, &t.r2);
        record(
            ok,
            0,
            None,
            None,
            format!(
                "A-tube {k} at {} with r² = {} lies in a tube of R",
                t.plane, t.r2
            ),
        );
    }
    for (i, g) in gens.iter().enumerate() {
        let ok = certify_contraction(&g.u, &g.eps2, &g.del2);
        record(
            ok,
            1,
            Some(i),
            None,
            format!(
                "generator {i}: |m|·s·δ ≥ 1 + 1/ε with m = {}, s = {}, ε² = {}, δ² = {}",
                g.u.exponent(),
                g.u.norm_floor(),
                g.eps2,
                g.del2
            ),
        );
    }
    for (i, g) in gens.iter().enumerate() {
        let p = g.u.point();
        for (j, h) in gens.iter().enumerate() {
            if i == j {
                continue;
            }
            let l = h.u.hyperplane();
            let ok = disjoint_ball_tube(&p, &g.eps2, &l, &h.del2);
            record(
                ok,
                2,
                Some(i),
                Some(j),
                format!(
                    "d(p_{i}, L_{j}) > ε_{i} + δ_{j} with d² = {}, ε² = {}, δ² = {}",
                    dist2_point_hyperplane(&p, &l).value(),
                    g.eps2,
                    h.del2
                ),
            );
        }
    }
    for (i, g) in gens.iter().enumerate() {
        let p = g.u.point();
        let ok = sys.attracting.contains_ball(&p, &g.eps2);
        record(
            ok,
            3,
            Some(i),
            None,
            format!("[p_{i}]_ε ⊆ A with p = {p}, ε² = {}", g.eps2),
        );
    }
    for (i, g) in gens.iter().enumerate() {
        let l = g.u.hyperplane();
        let ok = sys.repelling.contains_tube(&l, &g.del2);
        record(
            ok,
            4,
            Some(i),
            None,
            format!("[L_{i}]_δ ⊆ R with L = {l}, δ² = {}", g.del2),
        );
    }
    if bad.is_empty() {
        Ok(PingPongCert {
            generators: gens.len(),
            checks: good,
        })
    } else {
        Err(ViolationReport { violations: bad })
    }
}

/// Reduced word in the free product of the cyclic groups `⟨u_i⟩`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<(usize, i64)>);

impl Word {
    /// Freely reduces: merges adjacent equal indices and drops zero exponents.
    pub fn reduced(letters: &[(usize, i64)]) -> Word {
        let mut out: Vec<(usize, i64)> = Vec::new();
        for &(i, e) in letters {
            if e == 0 {
                continue;
            }
            match out.last_mut() {
                Some((j, f)) if *j == i => {
                    *f += e;
                    if *f == 0 {
                        out.pop();
                    }
                }
                _ => out.push((i, e)),
            }
        }
        Word(out)
    }

    pub fn letters(&self) -> &[(usize, i64)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&(i, e)| (i, -e)).collect())
    }

    /// `self · other⁻¹`, reduced.
    pub fn quotient(&self, other: &Word) -> Word {
        let mut letters = self.0.clone();
        letters.extend(other.inverse().0);
        Word::reduced(&letters)
    }

    /// Random nonempty reduced word with at most `max_len` letters and
    /// exponents in `[-max_exp, max_exp] \ {0}`.
    pub fn random<R: Rng>(rng: &mut R, generators: usize, max_len: usize, max_exp: i64) -> Word {
        assert!(generators > 0 && max_len > 0 && max_exp > 0);
        let len = rng.gen_range(1..=max_len);
        let mut letters: Vec<(usize, i64)> = Vec::with_capacity(len);
        while letters.len() < len {
            let i = rng.gen_range(0..generators);
            if generators > 1 && letters.last().is_some_and(|&(j, _)| j == i) {
                continue;
            }
            if generators == 1 && !letters.is_empty() {
                break;
            }
            let mut e = rng.gen_range(1..=max_exp);
            if rng.gen_bool(0.5) {
                e = -e;
            }
            letters.push((i, e));
        }
        Word(letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, (i, e)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "·")?;
            }
            write!(f, "u{i}^{e}")?;
        }
        Ok(())
    }
}

pub fn evaluate_word(sys: &SchottkySystem, w: &Word) -> Result<GroupElement> {
    let mut acc = GroupElement::identity(sys.n);
    for &(i, e) in &w.0 {
        let g = sys.generators.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: sys.len(),
        })?;
        acc = &acc * &g.u.power_matrix(&BigInt::from(e));
    }
    Ok(acc)
}

fn check_radii(eps2: &BigRational, del2: &BigRational) -> Result<()> {
    if !eps2.is_positive() || eps2 > del2 {
        return Err(Error::InvalidRadii(format!(
            "need 0 < ε ≤ δ, got ε² = {eps2}, δ² = {del2}"
        )));
    }
    Ok(())
}

fn require(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::PreconditionViolated(what()))
    }
}

fn reverify(sys: SchottkySystem) -> Result<SchottkySystem> {
    match verify_system(&sys) {
        Ok(_) => Ok(sys),
        Err(report) => Err(Error::PreconditionViolated(format!(
            "extended system fails verification:\n{report}"
        ))),
    }
}

/// Adjoins a power of the unipotent attached to `(p, L)`, with `A` grown by
/// `[p]_ε` and `R` by `[L]_δ`.
///
/// Requires `[p]_ε ∩ R = ∅` and `[L]_δ ∩ A = ∅`. The tube `[L]_δ` always
/// meets the tubes of `R` in dimension at least 3, which is why the ball is
/// tested against `R` and the tube against `A`.
pub fn add_generator(
    sys: &SchottkySystem,
    p: &ProjPoint,
    l: &ProjHyperplane,
    eps2: &BigRational,
    del2: &BigRational,
) -> Result<SchottkySystem> {
    let u = Rank1Unipotent::from_pair(p, l)?;
    check_radii(eps2, del2)?;
    require(sys.repelling.disjoint_from_ball(p, eps2), || {
        format!("[p]_ε ∩ R = ∅ fails for p = {p}, ε² = {eps2}")
    })?;
    require(sys.attracting.disjoint_from_tube(l, del2), || {
        format!("[L]_δ ∩ A = ∅ fails for L = {l}, δ² = {del2}")
    })?;
    let m = contraction_power(&u, eps2, del2)?;
    let v = u.power(&m).expect("m ≥ 1");
    let out = sys.extended(
        alloc::vec![Generator::new(v, eps2.clone(), del2.clone())],
        &Region::ball(p.clone(), eps2.clone()),
        &Region::tube(l.clone(), del2.clone()),
    );
    reverify(out)
}

/// Rejection reasons for a candidate `Z²` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Z2Rejection {
    DimensionMismatch,
    NotUnipotent,
    NotCommuting,
    Dependent,
}

impl fmt::Display for Z2Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Z2Rejection::DimensionMismatch => "dimension mismatch",
            Z2Rejection::NotUnipotent => "w is not unipotent",
            Z2Rejection::NotCommuting => "u and w do not commute",
            Z2Rejection::Dependent => "u − I and w − I are proportional",
        };
        f.write_str(s)
    }
}

/// A rank-1 unipotent `u` and a unipotent `w` with `uw = wu` and `u − I`,
/// `w − I` linearly independent, so that `⟨u, w⟩ ≅ Z²`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Z2PairCert {
    pub u: Rank1Unipotent,
    pub w: GroupElement,
}

impl Z2PairCert {
    /// Recomputes all three checks from the raw matrices.
    pub fn revalidate(&self) -> bool {
        let u = self.u.matrix();
        check_pair(u.matrix(), &self.w).is_ok()
    }
}

fn check_pair(
    u: &crate::matrix::IntMatrix,
    w: &GroupElement,
) -> core::result::Result<(), Z2Rejection> {
    let n = u.dim();
    if w.dim() != n {
        return Err(Z2Rejection::DimensionMismatch);
    }
    let nu = u.minus_identity();
    let nw = w.matrix().minus_identity();
    if !nw.pow_u(n as u64).is_zero() {
        return Err(Z2Rejection::NotUnipotent);
    }
    if u.mul_mat(w.matrix()) != w.matrix().mul_mat(u) {
        return Err(Z2Rejection::NotCommuting);
    }
    if nu.is_zero() || nw.is_zero() || nu.proportional_to(&nw).is_some() {
        return Err(Z2Rejection::Dependent);
    }
    Ok(())
}

pub fn z2_pair_cert(
    u: &Rank1Unipotent,
    w: &GroupElement,
) -> core::result::Result<Z2PairCert, Z2Rejection> {
    check_pair(u.matrix().matrix(), w)?;
    Ok(Z2PairCert {
        u: u.clone(),
        w: w.clone(),
    })
}

/// A letter of a certificate expression: a power of a listed generator or
/// of the adjoined element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Letter {
    Gen(usize, i64),
    Extra(i64),
}

/// Hypotheses of the finite-index criterion for `⟨generators, extra⟩`:
/// a `Z²` pair of unipotents, each written explicitly in the generators,
/// and a density witness. The conclusion that the group is all of
/// `SL(n, Z)` is cited, not checked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FullGroupCert {
    pub generators: Vec<GroupElement>,
    pub extra: Option<GroupElement>,
    pub u_expr: Vec<Letter>,
    pub w_expr: Vec<Letter>,
    pub pair: Z2PairCert,
    pub density: DensityWitness,
}

impl FullGroupCert {
    pub const CONCLUSION_BASIS: &'static str =
        "CITED: a profinitely dense subgroup containing a Z² pair of unipotents with a rank-1 member is SL(n,Z)";

    pub fn evaluate(&self, expr: &[Letter]) -> Result<GroupElement> {
        let n = self.pair.w.dim();
        let mut acc = GroupElement::identity(n);
        for &letter in expr {
            let g = match letter {
                Letter::Gen(i, e) => {
                    let g = self.generators.get(i).ok_or(Error::IndexOutOfRange {
                        index: i,
                        len: self.generators.len(),
                    })?;
                    g.pow(e)
                }
                Letter::Extra(e) => {
                    let g = self
                        .extra
                        .as_ref()
                        .ok_or_else(|| Error::Malformed("no adjoined element".into()))?;
                    g.pow(e)
                }
            };
            acc = &acc * &g;
        }
        Ok(acc)
    }

    /// Pair checks, the expressions and the density flags, without
    /// recomputing the congruence closures.
    pub fn revalidate(&self) -> bool {
        self.pair.revalidate()
            && self
                .evaluate(&self.u_expr)
                .is_ok_and(|g| g == self.pair.u.matrix())
            && self.evaluate(&self.w_expr).is_ok_and(|g| g == self.pair.w)
            && self.density.is_valid()
    }

    /// [`Self::revalidate`] plus fresh surjectivity checks at every recorded
    /// modulus for the full generating set.
    pub fn revalidate_with_density(&self, cap: usize) -> Result<bool> {
        if !self.revalidate() {
            return Ok(false);
        }
        let mut all = self.generators.clone();
        all.extend(self.extra.iter().cloned());
        let fresh = density_witness(&all, &self.density.moduli, cap)?;
        Ok(fresh.surjective.iter().all(|&s| s))
    }
}

/// Adjoins unipotents at `(p₁, L₁)` and `(p₂, L₂)` with `p₁ = g·p₂` and
/// `L₁ ≠ g·L₂`; then `v₂` and `g⁻¹·v₁·g` share their attracting point and
/// form a `Z²` pair in `⟨S₊, g⟩`.
#[allow(clippy::too_many_arguments)]
pub fn throw(
    sys: &SchottkySystem,
    g: &GroupElement,
    p1: &ProjPoint,
    p2: &ProjPoint,
    l1: &ProjHyperplane,
    l2: &ProjHyperplane,
    eps2: &BigRational,
    del2: &BigRational,
    density: &DensityWitness,
) -> Result<(SchottkySystem, FullGroupCert)> {
    check_radii(eps2, del2)?;
    require(l1.contains(p1) && l2.contains(p2), || {
        "p_i ∈ L_i fails".into()
    })?;
    for (name, p) in [("p₁", p1), ("p₂", p2)] {
        require(sys.repelling.disjoint_from_ball(p, eps2), || {
            format!("condition 1: [{name}]_ε ∩ R = ∅ fails for {name} = {p}, ε² = {eps2}")
        })?;
    }
    for (name, l) in [("L₁", l1), ("L₂", l2)] {
        require(sys.attracting.disjoint_from_tube(l, del2), || {
            format!("condition 2: [{name}]_δ ∩ A = ∅ fails for {name} = {l}, δ² = {del2}")
        })?;
    }
    require(disjoint_ball_tube(p1, eps2, l2, del2), || {
        format!(
            "condition 3: [p₁]_ε ∩ [L₂]_δ = ∅ fails, d² = {}",
            dist2_point_hyperplane(p1, l2).value()
        )
    })?;
    require(disjoint_ball_tube(p2, eps2, l1, del2), || {
        format!(
            "condition 3: [p₂]_ε ∩ [L₁]_δ = ∅ fails, d² = {}",
            dist2_point_hyperplane(p2, l1).value()
        )
    })?;
    require(&g.apply_point(p2) == p1, || {
        format!("condition 3: p₁ = g·p₂ fails, g·p₂ = {}", g.apply_point(p2))
    })?;
    let gl2 = g.apply_hyperplane(l2);
    require(&gl2 != l1, || {
        format!("condition 3: L₁ ≠ g·L₂ fails, both are {gl2}")
    })?;

    let u1 = Rank1Unipotent::from_pair(p1, l1)?;
    let u2 = Rank1Unipotent::from_pair(p2, l2)?;
    let m = contraction_power(&u1, eps2, del2)?.max(contraction_power(&u2, eps2, del2)?);
    let v1 = u1.power(&m).expect("m ≥ 1");
    let v2 = u2.power(&m).expect("m ≥ 1");
    let base = sys.len();
    let out = reverify(sys.extended(
        alloc::vec![
            Generator::new(v1.clone(), eps2.clone(), del2.clone()),
            Generator::new(v2.clone(), eps2.clone(), del2.clone())
        ],
        &Region::ball(p1.clone(), eps2.clone()).with_ball(p2.clone(), eps2.clone()),
        &Region::tube(l1.clone(), del2.clone()).with_tube(l2.clone(), del2.clone()),
    ))?;
    let w = g.inverse().conj(&v1.matrix());
    let pair = z2_pair_cert(&v2, &w)
        .map_err(|r| Error::PreconditionViolated(format!("pair check failed: {r}")))?;
    let cert = FullGroupCert {
        generators: out.matrices(),
        extra: Some(g.clone()),
        u_expr: alloc::vec![Letter::Gen(base + 1, 1)],
        w_expr: alloc::vec![Letter::Extra(-1), Letter::Gen(base, 1), Letter::Extra(1)],
        pair,
        density: density.clone(),
    };
    Ok((out, cert))
}

/// A Schottky system together with an open region `N ⊇ A`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchottkyQuadruple {
    pub base: SchottkySystem,
    pub open_nbhd: Region,
}

impl SchottkyQuadruple {
    /// Every ball of `A` sits strictly inside some open ball of `N`.
    pub fn nbhd_contains_attracting(&self) -> bool {
        self.base.attracting.tubes.is_empty()
            && self.base.attracting.balls.iter().all(|b| {
                self.open_nbhd
                    .balls
                    .iter()
                    .any(|c| ball_inside_open_ball(&b.center, &b.r2, &c.center, &c.r2))
            })
    }

    /// `x` lies in the open region `N` (balls only).
    pub fn nbhd_contains(&self, x: &ProjPoint) -> bool {
        self.open_nbhd
            .balls
            .iter()
            .any(|c| dist2_points(x, &c.center).value() < &c.r2)
    }
}

pub fn verify_quadruple(
    q: &SchottkyQuadruple,
) -> core::result::Result<PingPongCert, ViolationReport> {
    let mut cert = verify_system(&q.base)?;
    if !q.nbhd_contains_attracting() {
        return Err(ViolationReport {
            violations: alloc::vec![Violation {
                condition: 0,
                generator: None,
                other: None,
                inequality: "every ball of A lies strictly inside an open ball of N".into(),
            }],
        });
    }
    cert.checks.push("A ⊆ N".into());
    Ok(cert)
}
