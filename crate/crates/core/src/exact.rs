//! Points, hyperplanes and neighborhoods of real projective space with exact
//! rational distances.
//!
//! The metric is `d([x],[y]) = sin∠(x, y)`. Only its square is ever stored;
//! on integer representatives it is the rational number
//! `1 - (x·y)² / ((x·x)(y·y))`. Radii are likewise carried squared, and a
//! comparison between sums of square roots is decided by repeated squaring.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::{Error, Result};

pub fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[BigInt]) -> BigInt {
    a.iter().map(|x| x * x).sum()
}

pub fn ints(raw: &[i64]) -> Vec<BigInt> {
    raw.iter().map(|&x| BigInt::from(x)).collect()
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Divides by the gcd of the entries and flips the sign so that the first
/// nonzero entry is positive. Returns the primitive vector together with the
/// signed scalar `c` such that `raw = c * primitive`.
pub fn primitive_part(raw: &[BigInt]) -> Result<(Vec<BigInt>, BigInt)> {
    let mut g = BigInt::zero();
    for x in raw {
        g = g.gcd(x);
    }
    if g.is_zero() {
        return Err(Error::ZeroVector);
    }
    let lead = raw.iter().find(|x| !x.is_zero()).expect("nonzero");
    if lead.is_negative() {
        g = -g;
    }
    Ok((raw.iter().map(|x| x / &g).collect(), g))
}

/// Clears denominators of a rational vector, returning a primitive integer
/// vector on the same line.
pub fn clear_denominators(raw: &[BigRational]) -> Result<Vec<BigInt>> {
    let mut l = BigInt::one();
    for x in raw {
        l = l.lcm(x.denom());
    }
    let scaled: Vec<BigInt> = raw.iter().map(|x| (x * &l).to_integer()).collect();
    Ok(primitive_part(&scaled)?.0)
}

/// A rational point of `P^{n-1}`, stored as its canonical primitive
/// representative. Structural equality is projective equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjPoint {
    coords: Vec<BigInt>,
}

impl ProjPoint {
    pub fn new(raw: &[BigInt]) -> Result<Self> {
        Ok(ProjPoint {
            coords: primitive_part(raw)?.0,
        })
    }

    pub fn from_i64(raw: &[i64]) -> Result<Self> {
        Self::new(&ints(raw))
    }

    pub fn from_rational(raw: &[BigRational]) -> Result<Self> {
        Ok(ProjPoint {
            coords: clear_denominators(raw)?,
        })
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// The `(n-2)`-dimensional projective subspace `P(ker f)` for a primitive
/// covector `f`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjHyperplane {
    covector: Vec<BigInt>,
}

impl ProjHyperplane {
    pub fn new(raw: &[BigInt]) -> Result<Self> {
        Ok(ProjHyperplane {
            covector: primitive_part(raw)?.0,
        })
    }

    pub fn from_i64(raw: &[i64]) -> Result<Self> {
        Self::new(&ints(raw))
    }

    pub fn from_rational(raw: &[BigRational]) -> Result<Self> {
        Ok(ProjHyperplane {
            covector: clear_denominators(raw)?,
        })
    }

    pub fn covector(&self) -> &[BigInt] {
        &self.covector
    }

    pub fn dim(&self) -> usize {
        self.covector.len()
    }

    pub fn contains(&self, p: &ProjPoint) -> bool {
        dot(&self.covector, p.coords()).is_zero()
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, x) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ":")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for ProjHyperplane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ker(")?;
        for (i, x) in self.covector.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Squared sine distance, an exact rational in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SqDist(BigRational);

impl SqDist {
    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_inner(self) -> BigRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

fn gram_sq_dist(x: &[BigInt], y: &[BigInt]) -> SqDist {
    let xy = dot(x, y);
    let den = norm2(x) * norm2(y);
    SqDist(BigRational::one() - BigRational::new(&xy * &xy, den))
}

pub fn dist2_points(x: &ProjPoint, y: &ProjPoint) -> SqDist {
    gram_sq_dist(x.coords(), y.coords())
}

/// Squared sine of the angle from `x` to the linear hyperplane `ker f`.
pub fn dist2_point_hyperplane(x: &ProjPoint, l: &ProjHyperplane) -> SqDist {
    let fx = dot(l.covector(), x.coords());
    SqDist(BigRational::new(
        &fx * &fx,
        norm2(l.covector()) * norm2(x.coords()),
    ))
}

/// Hausdorff distance between two hyperplanes in the sine metric. The largest
/// distance from a unit vector of `ker a` to `ker b` is the norm of the
/// projection of `b/|b|` onto `ker a`, i.e. the sine of the angle between the
/// normals, so the distance is computed on the covectors.
pub fn dist2_hyperplanes(a: &ProjHyperplane, b: &ProjHyperplane) -> SqDist {
    gram_sq_dist(a.covector(), b.covector())
}

/// Decides `√a + √b < √c` for nonnegative rationals.
pub fn sqrt_sum_lt(a: &BigRational, b: &BigRational, c: &BigRational) -> bool {
    let rest = c - a - b;
    if !rest.is_positive() {
        return false;
    }
    BigRational::from_integer(4.into()) * a * b < &rest * &rest
}

/// Decides `√a + √b ≤ √c` for nonnegative rationals.
pub fn sqrt_sum_le(a: &BigRational, b: &BigRational, c: &BigRational) -> bool {
    let rest = c - a - b;
    if rest.is_negative() {
        return false;
    }
    BigRational::from_integer(4.into()) * a * b <= &rest * &rest
}

/// Largest dyadic `k / 2^bits` not exceeding `√x`.
pub fn sqrt_floor_dyadic(x: &BigRational, bits: u32) -> BigRational {
    let scale = BigInt::one() << (2 * bits) as usize;
    let scaled = (x * BigRational::from_integer(scale)).floor().to_integer();
    BigRational::new(scaled.sqrt(), BigInt::one() << bits as usize)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    pub center: ProjPoint,
    pub r2: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tube {
    pub plane: ProjHyperplane,
    pub r2: BigRational,
}

impl Ball {
    pub fn new(center: ProjPoint, r2: BigRational) -> Self {
        Ball { center, r2 }
    }
}

impl Tube {
    pub fn new(plane: ProjHyperplane, r2: BigRational) -> Self {
        Tube { plane, r2 }
    }
}

/// A finite union of closed balls around points and closed tubes around
/// hyperplanes. Radii are stored squared and must be positive.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Region {
    pub balls: Vec<Ball>,
    pub tubes: Vec<Tube>,
}

impl Region {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ball(center: ProjPoint, r2: BigRational) -> Self {
        Region {
            balls: alloc::vec![Ball::new(center, r2)],
            tubes: Vec::new(),
        }
    }

    pub fn tube(plane: ProjHyperplane, r2: BigRational) -> Self {
        Region {
            balls: Vec::new(),
            tubes: alloc::vec![Tube::new(plane, r2)],
        }
    }

    pub fn with_ball(mut self, center: ProjPoint, r2: BigRational) -> Self {
        self.balls.push(Ball::new(center, r2));
        self
    }

    pub fn with_tube(mut self, plane: ProjHyperplane, r2: BigRational) -> Self {
        self.tubes.push(Tube::new(plane, r2));
        self
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut out = self.clone();
        out.balls.extend(other.balls.iter().cloned());
        out.tubes.extend(other.tubes.iter().cloned());
        out
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty() && self.tubes.is_empty()
    }

    /// Every component of `self` also appears in `other`.
    pub fn is_structural_subset_of(&self, other: &Region) -> bool {
        self.balls.iter().all(|b| other.balls.contains(b))
            && self.tubes.iter().all(|t| other.tubes.contains(t))
    }

    pub fn radii_positive(&self) -> bool {
        self.balls.iter().all(|b| b.r2.is_positive())
            && self.tubes.iter().all(|t| t.r2.is_positive())
    }

    /// Closed ball `[p]_r` lies inside some single component.
    pub fn contains_ball(&self, p: &ProjPoint, r2: &BigRational) -> bool {
        self.balls
            .iter()
            .any(|b| ball_inside_ball(p, r2, &b.center, &b.r2))
            || self
                .tubes
                .iter()
                .any(|t| ball_inside_tube(p, r2, &t.plane, &t.r2))
    }

    /// Closed tube `[L]_r` lies inside some tube component.
    pub fn contains_tube(&self, l: &ProjHyperplane, r2: &BigRational) -> bool {
        self.tubes
            .iter()
            .any(|t| tube_inside_tube(l, r2, &t.plane, &t.r2))
    }

    /// The closed ball `[p]_r` misses every component (sound test).
    pub fn disjoint_from_ball(&self, p: &ProjPoint, r2: &BigRational) -> bool {
        self.balls
            .iter()
            .all(|b| disjoint_balls(p, r2, &b.center, &b.r2))
            && self
                .tubes
                .iter()
                .all(|t| disjoint_ball_tube(p, r2, &t.plane, &t.r2))
    }

    /// The closed tube `[L]_r` misses every component. Two tubes always meet
    /// (hyperplanes of `P^{n-1}` intersect for `n ≥ 3`), so any tube
    /// component makes this false.
    pub fn disjoint_from_tube(&self, l: &ProjHyperplane, r2: &BigRational) -> bool {
        self.tubes.is_empty()
            && self
                .balls
                .iter()
                .all(|b| disjoint_ball_tube(&b.center, &b.r2, l, r2))
    }

    /// The hyperplane itself misses every closed component.
    pub fn disjoint_from_hyperplane(&self, l: &ProjHyperplane) -> bool {
        self.tubes.is_empty()
            && self
                .balls
                .iter()
                .all(|b| dist2_point_hyperplane(&b.center, l).value() > &b.r2)
    }

    /// `x` lies outside every closed component.
    pub fn excludes(&self, x: &ProjPoint) -> bool {
        !region_contains(self, x)
    }

    /// Smallest squared distance from `x` to a component center set, i.e. the
    /// squared distance to the nearest ball center or tube hyperplane.
    pub fn min_center_dist2(&self, x: &ProjPoint) -> Option<BigRational> {
        let balls = self
            .balls
            .iter()
            .map(|b| dist2_points(x, &b.center).into_inner());
        let tubes = self
            .tubes
            .iter()
            .map(|t| dist2_point_hyperplane(x, &t.plane).into_inner());
        balls.chain(tubes).min()
    }
}

pub fn region_contains(r: &Region, x: &ProjPoint) -> bool {
    r.balls
        .iter()
        .any(|b| dist2_points(x, &b.center).value() <= &b.r2)
        || r.tubes
            .iter()
            .any(|t| dist2_point_hyperplane(x, &t.plane).value() <= &t.r2)
}

/// Sound disjointness of `[p]_ε` and `[L]_δ`: `d(p, L) > ε + δ`.
pub fn disjoint_ball_tube(
    p: &ProjPoint,
    eps2: &BigRational,
    l: &ProjHyperplane,
    del2: &BigRational,
) -> bool {
    sqrt_sum_lt(eps2, del2, dist2_point_hyperplane(p, l).value())
}

/// Sound containment `[p]_ε ⊆ [L]_δ`: `d(p, L) + ε ≤ δ`.
pub fn ball_inside_tube(
    p: &ProjPoint,
    eps2: &BigRational,
    l: &ProjHyperplane,
    del2: &BigRational,
) -> bool {
    sqrt_sum_le(dist2_point_hyperplane(p, l).value(), eps2, del2)
}

pub fn ball_inside_ball(p: &ProjPoint, r2: &BigRational, c: &ProjPoint, s2: &BigRational) -> bool {
    sqrt_sum_le(dist2_points(p, c).value(), r2, s2)
}

/// Strict containment `[p]_r ⊆ (c)_s`: `d(p, c) + r < s`.
pub fn ball_inside_open_ball(
    p: &ProjPoint,
    r2: &BigRational,
    c: &ProjPoint,
    s2: &BigRational,
) -> bool {
    sqrt_sum_lt(dist2_points(p, c).value(), r2, s2)
}

pub fn tube_inside_tube(
    l: &ProjHyperplane,
    r2: &BigRational,
    m: &ProjHyperplane,
    s2: &BigRational,
) -> bool {
    sqrt_sum_le(dist2_hyperplanes(l, m).value(), r2, s2)
}

pub fn disjoint_balls(p: &ProjPoint, r2: &BigRational, q: &ProjPoint, s2: &BigRational) -> bool {
    sqrt_sum_lt(r2, s2, dist2_points(p, q).value())
}

/// Compares `√a` with the rational `b ≥ 0`.
pub fn cmp_sqrt(a: &BigRational, b: &BigRational) -> Ordering {
    a.cmp(&(b * b))
}
