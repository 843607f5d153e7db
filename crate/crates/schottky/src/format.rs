//! JSON file formats for systems, quadruples and certificates.
//!
//! Every file is a [`Document`]: a schema version, a `kind` tag and the
//! payload. Integers and rationals are written as decimal strings, matrices
//! as lists of rows. Writing a parsed document reproduces the input bytes.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use schottky_core::congruence::DensityWitness;
use schottky_core::constructions::StartCert;
use schottky_core::constructions::{AvoidanceInstance, Branch, DenseRecord};
use schottky_core::exact::{Ball, ProjHyperplane, ProjPoint, Region, Tube};
use schottky_core::matrix::{GroupElement, IntMatrix};
use schottky_core::schottky::{
    FullGroupCert, Generator, Letter, SchottkyQuadruple, SchottkySystem, Violation,
    ViolationReport, Z2PairCert,
};
use schottky_core::unipotent::Rank1Unipotent;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}, expected {SCHEMA_VERSION}")]
    Schema(u32),
    #[error("{0}")]
    Core(#[from] schottky_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type FormatResult<T> = Result<T, FormatError>;

/// An arbitrary-precision integer stored as a decimal string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dec(pub BigInt);

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map(Dec)
            .map_err(|_| serde::de::Error::custom(format!("not an integer: {s:?}")))
    }
}

/// A rational stored as `"a/b"`, or `"a"` when integral.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Q(pub BigRational);

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map(Q).map_err(serde::de::Error::custom)
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let bad = || format!("not a rational: {s:?}");
    let (num, den) = match s.trim().split_once('/') {
        Some((a, b)) => (
            a.trim().parse::<BigInt>().map_err(|_| bad())?,
            b.trim().parse::<BigInt>().map_err(|_| bad())?,
        ),
        None => (
            s.trim().parse::<BigInt>().map_err(|_| bad())?,
            BigInt::from(1),
        ),
    };
    if den == BigInt::from(0) {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(BigRational::new(num, den))
}

fn dec(v: &[BigInt]) -> Vec<Dec> {
    v.iter().cloned().map(Dec).collect()
}

fn ints(v: &[Dec]) -> Vec<BigInt> {
    v.iter().map(|d| d.0.clone()).collect()
}

pub type MatrixDto = Vec<Vec<Dec>>;

pub fn matrix_to_dto(g: &GroupElement) -> MatrixDto {
    g.matrix().rows().iter().map(|r| dec(r)).collect()
}

pub fn matrix_from_dto(m: &MatrixDto) -> FormatResult<GroupElement> {
    let rows: Vec<Vec<BigInt>> = m.iter().map(|r| ints(r)).collect();
    Ok(GroupElement::new(IntMatrix::from_rows(&rows)?)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnipotentDto {
    pub v: Vec<Dec>,
    pub f: Vec<Dec>,
    pub m: Dec,
}

impl UnipotentDto {
    pub fn from_core(u: &Rank1Unipotent) -> Self {
        UnipotentDto {
            v: dec(u.v()),
            f: dec(u.f()),
            m: Dec(u.exponent().clone()),
        }
    }

    pub fn to_core(&self) -> FormatResult<Rank1Unipotent> {
        Ok(Rank1Unipotent::from_parts(
            &ints(&self.v),
            &ints(&self.f),
            &self.m.0,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorDto {
    pub v: Vec<Dec>,
    pub f: Vec<Dec>,
    pub m: Dec,
    pub eps2: Q,
    pub del2: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallDto {
    pub center: Vec<Dec>,
    pub r2: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TubeDto {
    pub plane: Vec<Dec>,
    pub r2: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionDto {
    pub balls: Vec<BallDto>,
    pub tubes: Vec<TubeDto>,
}

fn ball_to_dto(b: &Ball) -> BallDto {
    BallDto {
        center: dec(b.center.coords()),
        r2: Q(b.r2.clone()),
    }
}

fn ball_from_dto(b: &BallDto) -> FormatResult<Ball> {
    Ok(Ball::new(ProjPoint::new(&ints(&b.center))?, b.r2.0.clone()))
}

impl RegionDto {
    pub fn from_core(r: &Region) -> Self {
        RegionDto {
            balls: r.balls.iter().map(ball_to_dto).collect(),
            tubes: r
                .tubes
                .iter()
                .map(|t| TubeDto {
                    plane: dec(t.plane.covector()),
                    r2: Q(t.r2.clone()),
                })
                .collect(),
        }
    }

    pub fn to_core(&self) -> FormatResult<Region> {
        Ok(Region {
            balls: self
                .balls
                .iter()
                .map(ball_from_dto)
                .collect::<FormatResult<_>>()?,
            tubes: self
                .tubes
                .iter()
                .map(|t| {
                    Ok(Tube::new(
                        ProjHyperplane::new(&ints(&t.plane))?,
                        t.r2.0.clone(),
                    ))
                })
                .collect::<FormatResult<_>>()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDto {
    pub n: usize,
    pub generators: Vec<GeneratorDto>,
    pub attracting: RegionDto,
    pub repelling: RegionDto,
}

impl SystemDto {
    pub fn from_core(s: &SchottkySystem) -> Self {
        SystemDto {
            n: s.dim(),
            generators: s
                .generators()
                .iter()
                .map(|g| GeneratorDto {
                    v: dec(g.u.v()),
                    f: dec(g.u.f()),
                    m: Dec(g.u.exponent().clone()),
                    eps2: Q(g.eps2.clone()),
                    del2: Q(g.del2.clone()),
                })
                .collect(),
            attracting: RegionDto::from_core(s.attracting()),
            repelling: RegionDto::from_core(s.repelling()),
        }
    }

    pub fn to_core(&self) -> FormatResult<SchottkySystem> {
        let gens = self
            .generators
            .iter()
            .map(|g| {
                let u = Rank1Unipotent::from_parts(&ints(&g.v), &ints(&g.f), &g.m.0)?;
                Ok(Generator::new(u, g.eps2.0.clone(), g.del2.0.clone()))
            })
            .collect::<FormatResult<Vec<_>>>()?;
        let sys = SchottkySystem::new(gens, self.attracting.to_core()?, self.repelling.to_core()?)?;
        if sys.dim() != self.n {
            return Err(FormatError::Invalid(format!(
                "declared n = {} but data has n = {}",
                self.n,
                sys.dim()
            )));
        }
        Ok(sys)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrupleDto {
    pub system: SystemDto,
    pub open_nbhd: Vec<BallDto>,
}

impl QuadrupleDto {
    pub fn from_core(q: &SchottkyQuadruple) -> Self {
        QuadrupleDto {
            system: SystemDto::from_core(&q.base),
            open_nbhd: q.open_nbhd.balls.iter().map(ball_to_dto).collect(),
        }
    }

    pub fn to_core(&self) -> FormatResult<SchottkyQuadruple> {
        let balls = self
            .open_nbhd
            .iter()
            .map(ball_from_dto)
            .collect::<FormatResult<_>>()?;
        Ok(SchottkyQuadruple {
            base: self.system.to_core()?,
            open_nbhd: Region {
                balls,
                tubes: Vec::new(),
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LetterDto {
    Gen(usize, i64),
    Extra(i64),
}

fn letters_to_dto(e: &[Letter]) -> Vec<LetterDto> {
    e.iter()
        .map(|l| match *l {
            Letter::Gen(i, k) => LetterDto::Gen(i, k),
            Letter::Extra(k) => LetterDto::Extra(k),
        })
        .collect()
}

fn letters_from_dto(e: &[LetterDto]) -> Vec<Letter> {
    e.iter()
        .map(|l| match *l {
            LetterDto::Gen(i, k) => Letter::Gen(i, k),
            LetterDto::Extra(k) => Letter::Extra(k),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityDto {
    pub moduli: Vec<u64>,
    pub surjective: Vec<bool>,
    pub recipe_conformant: bool,
    pub assumed_q: Option<u64>,
    pub full_density: String,
}

impl DensityDto {
    pub fn from_core(d: &DensityWitness) -> Self {
        DensityDto {
            moduli: d.moduli.clone(),
            surjective: d.surjective.clone(),
            recipe_conformant: d.recipe_conformant,
            assumed_q: d.assumed_q,
            full_density: DensityWitness::FULL_DENSITY_BASIS.into(),
        }
    }

    pub fn to_core(&self) -> DensityWitness {
        DensityWitness {
            moduli: self.moduli.clone(),
            surjective: self.surjective.clone(),
            recipe_conformant: self.recipe_conformant,
            assumed_q: self.assumed_q,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDto {
    pub u: UnipotentDto,
    pub w: MatrixDto,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullCertDto {
    pub generators: Vec<MatrixDto>,
    pub extra: Option<MatrixDto>,
    pub u_expr: Vec<LetterDto>,
    pub w_expr: Vec<LetterDto>,
    pub pair: PairDto,
    pub density: DensityDto,
    pub conclusion: String,
}

impl FullCertDto {
    pub fn from_core(c: &FullGroupCert) -> Self {
        FullCertDto {
            generators: c.generators.iter().map(matrix_to_dto).collect(),
            extra: c.extra.as_ref().map(matrix_to_dto),
            u_expr: letters_to_dto(&c.u_expr),
            w_expr: letters_to_dto(&c.w_expr),
            pair: PairDto {
                u: UnipotentDto::from_core(&c.pair.u),
                w: matrix_to_dto(&c.pair.w),
            },
            density: DensityDto::from_core(&c.density),
            conclusion: FullGroupCert::CONCLUSION_BASIS.into(),
        }
    }

    pub fn to_core(&self) -> FormatResult<FullGroupCert> {
        Ok(FullGroupCert {
            generators: self
                .generators
                .iter()
                .map(matrix_from_dto)
                .collect::<FormatResult<_>>()?,
            extra: self.extra.as_ref().map(matrix_from_dto).transpose()?,
            u_expr: letters_from_dto(&self.u_expr),
            w_expr: letters_from_dto(&self.w_expr),
            pair: Z2PairCert {
                u: self.pair.u.to_core()?,
                w: matrix_from_dto(&self.pair.w)?,
            },
            density: self.density.to_core(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartCertDto {
    pub w2: MatrixDto,
    pub in_group: Vec<LetterDto>,
    pub in_conjugate: Vec<LetterDto>,
    pub full: FullCertDto,
}

impl StartCertDto {
    pub fn from_core(c: &StartCert) -> Self {
        StartCertDto {
            w2: matrix_to_dto(&c.w2),
            in_group: letters_to_dto(&c.in_group),
            in_conjugate: letters_to_dto(&c.in_conjugate),
            full: FullCertDto::from_core(&c.full),
        }
    }

    pub fn to_core(&self) -> FormatResult<StartCert> {
        Ok(StartCert {
            w2: matrix_from_dto(&self.w2)?,
            in_group: letters_from_dto(&self.in_group),
            in_conjugate: letters_from_dto(&self.in_conjugate),
            full: self.full.to_core()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordDto {
    pub index: usize,
    pub g: MatrixDto,
    pub a: usize,
    pub b: usize,
    pub s: Dec,
    pub modulus: u64,
    pub exponent: Dec,
}

impl RecordDto {
    pub fn from_core(r: &DenseRecord) -> Self {
        RecordDto {
            index: r.index,
            g: matrix_to_dto(&r.g),
            a: r.a,
            b: r.b,
            s: Dec(r.s.clone()),
            modulus: r.modulus,
            exponent: Dec(r.exponent.clone()),
        }
    }

    pub fn to_core(&self) -> FormatResult<DenseRecord> {
        Ok(DenseRecord {
            index: self.index,
            g: matrix_from_dto(&self.g)?,
            a: self.a,
            b: self.b,
            s: self.s.0.clone(),
            modulus: self.modulus,
            exponent: self.exponent.0.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDto {
    pub l1: Vec<Dec>,
    pub l2: Vec<Dec>,
    pub rho2: Q,
    pub p0: Vec<Dec>,
    pub l0: Vec<Dec>,
}

impl InstanceDto {
    pub fn from_core(i: &AvoidanceInstance) -> Self {
        InstanceDto {
            l1: dec(i.l1.covector()),
            l2: dec(i.l2.covector()),
            rho2: Q(i.rho2.clone()),
            p0: dec(i.p0.coords()),
            l0: dec(i.l0.covector()),
        }
    }

    pub fn to_core(&self) -> FormatResult<AvoidanceInstance> {
        Ok(AvoidanceInstance::new(
            ProjHyperplane::new(&ints(&self.l1))?,
            ProjHyperplane::new(&ints(&self.l2))?,
            self.rho2.0.clone(),
            ProjPoint::new(&ints(&self.p0))?,
            ProjHyperplane::new(&ints(&self.l0))?,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationDto {
    pub condition: u8,
    pub generator: Option<usize>,
    pub other: Option<usize>,
    pub inequality: String,
}

pub fn violations_to_dto(r: &ViolationReport) -> Vec<ViolationDto> {
    r.violations
        .iter()
        .map(|v: &Violation| ViolationDto {
            condition: v.condition,
            generator: v.generator,
            other: v.other,
            inequality: v.inequality.clone(),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchDto {
    H,
    Conjugate,
}

impl From<Branch> for BranchDto {
    fn from(b: Branch) -> Self {
        match b {
            Branch::H => BranchDto::H,
            Branch::Conjugate => BranchDto::Conjugate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDto {
    pub h: MatrixDto,
    pub branch: BranchDto,
    pub cert: FullCertDto,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceRow {
    pub modulus: u64,
    pub closure_order: Option<u64>,
    pub group_order: Dec,
    pub surjective: Option<bool>,
    pub exponent: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Body {
    System {
        system: SystemDto,
    },
    Quadruple {
        quadruple: QuadrupleDto,
        g: MatrixDto,
        p: Vec<Dec>,
        start: Option<StartCertDto>,
        steps: Vec<StepDto>,
    },
    PingPongCert {
        system: SystemDto,
        open_nbhd: Option<Vec<BallDto>>,
        checks: Vec<String>,
    },
    Violations {
        violations: Vec<ViolationDto>,
    },
    DenseBuild {
        system: SystemDto,
        density: DensityDto,
        records: Vec<RecordDto>,
    },
    Extension {
        system: SystemDto,
        cert: FullCertDto,
    },
    Start {
        system: SystemDto,
        cert: StartCertDto,
    },
    FamilyMember {
        len: usize,
        bits: String,
        system: SystemDto,
    },
    FullGroupCert {
        cert: FullCertDto,
    },
    Avoidance {
        instance: InstanceDto,
        system: SystemDto,
        certs: Vec<FullCertDto>,
    },
    Congruence {
        n: usize,
        generators: Option<usize>,
        rows: Vec<CongruenceRow>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub schema: u32,
    #[serde(flatten)]
    pub body: Body,
}

impl Document {
    pub fn new(body: Body) -> Self {
        Document {
            schema: SCHEMA_VERSION,
            body,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.body {
            Body::System { .. } => "system",
            Body::Quadruple { .. } => "quadruple",
            Body::PingPongCert { .. } => "ping-pong-cert",
            Body::Violations { .. } => "violations",
            Body::DenseBuild { .. } => "dense-build",
            Body::Extension { .. } => "extension",
            Body::Start { .. } => "start",
            Body::FamilyMember { .. } => "family-member",
            Body::FullGroupCert { .. } => "full-group-cert",
            Body::Avoidance { .. } => "avoidance",
            Body::Congruence { .. } => "congruence",
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> FormatResult<Self> {
        #[derive(Deserialize)]
        struct Header {
            schema: u32,
        }
        let header: Header = serde_json::from_str(s)?;
        if header.schema != SCHEMA_VERSION {
            return Err(FormatError::Schema(header.schema));
        }
        Ok(serde_json::from_str(s)?)
    }

    /// The system carried by the document, if any.
    pub fn system(&self) -> Option<&SystemDto> {
        match &self.body {
            Body::System { system }
            | Body::PingPongCert { system, .. }
            | Body::DenseBuild { system, .. }
            | Body::Extension { system, .. }
            | Body::Start { system, .. }
            | Body::FamilyMember { system, .. }
            | Body::Avoidance { system, .. } => Some(system),
            Body::Quadruple { quadruple, .. } => Some(&quadruple.system),
            _ => None,
        }
    }
}
