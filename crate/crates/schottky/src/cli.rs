//! Command-line front end. [`run`] dispatches one subcommand and returns the
//! bytes to write together with the exit status; `main` only does IO.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;

use schottky_core::congruence::{
    closure_order, density_witness, exponent_of, group_order, reduce_mod, DEFAULT_BFS_CAP,
};
use schottky_core::constructions::{
    avoid_steps, build_profinitely_dense, family_member, family_union_cert, quad_assumption_one,
    quad_extend_all, quad_start, starting_system, AvoidanceInstance, ConstructionConfig,
    FamilySpec,
};
use schottky_core::exact::{ProjHyperplane, ProjPoint};
use schottky_core::matrix::{GroupElement, IntMatrix};
use schottky_core::schottky::{
    add_generator, throw, verify_quadruple, verify_system, PingPongCert, SchottkyQuadruple,
    SchottkySystem, SearchBudget, ViolationReport,
};
use schottky_core::Error;

use crate::format::{
    matrix_from_dto, matrix_to_dto, parse_rational, violations_to_dto, Body, CongruenceRow, Dec,
    DensityDto, Document, FormatError, FullCertDto, InstanceDto, QuadrupleDto, RecordDto,
    StartCertDto, StepDto, SystemDto,
};
use crate::orbit::{orbit_trace, write_csv, WordSource};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_EXHAUSTED: u8 = 2;
pub const EXIT_MALFORMED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "schottky",
    version,
    about = "Build and verify Schottky systems of unipotents in SL(n, Z)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Clone, Debug, Args)]
pub struct Manifest {
    /// Dimension; inferred from the inputs when omitted.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Refinement depth for searches and radius halvings.
    #[arg(long, default_value_t = 32)]
    pub depth: u32,
    /// Random words tried by the conjugator search.
    #[arg(long, default_value_t = 256)]
    pub words: u32,
    #[arg(long = "bfs-cap", default_value_t = DEFAULT_BFS_CAP)]
    pub bfs_cap: usize,
    /// Comma-separated moduli for density witnesses.
    #[arg(long, default_value = "3,4")]
    pub moduli: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Re-verify a system, quadruple or certificate file.
    Verify {
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long)]
        cert: Option<PathBuf>,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Build a profinitely dense system around `[p]_ε` and `[L]_δ`.
    BuildDense {
        #[arg(long)]
        p: String,
        #[arg(long = "L")]
        l: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        delta: String,
        /// The second batch lives in the kernel mod q².
        #[arg(long, default_value_t = 2)]
        q: u64,
        /// Put the exact generator at (p, L) first.
        #[arg(long)]
        center: bool,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Add the generator at (p, L) to a system.
    Add {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long = "L")]
        l: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Add generators at (p1, L1) and (p2, L2) with p1 = g·p2 and certify ⟨S, g⟩.
    Throw {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        g: String,
        #[arg(long)]
        p1: String,
        #[arg(long)]
        p2: String,
        #[arg(long = "L1")]
        l1: String,
        #[arg(long = "L2")]
        l2: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Starting system with ⟨S⟩ ∩ k⟨S⟩k⁻¹ nontrivial and ⟨S, k⟩ = SL(n, Z).
    Start {
        #[arg(long)]
        k: String,
        #[arg(long)]
        p1: String,
        #[arg(long = "L1")]
        l1: String,
        #[arg(long)]
        p2: String,
        #[arg(long = "L2")]
        l2: String,
        #[arg(long)]
        p3: String,
        #[arg(long = "L3")]
        l3: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Member of the standard family for a bit string.
    Family {
        #[arg(long)]
        len: usize,
        #[arg(long)]
        bits: String,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Certificate that the union of two family members generates SL(n, Z).
    FamilyCert {
        #[arg(long)]
        len: usize,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Avoidance extension steps against (g, L) pairs, in order.
    AvoidStep {
        /// Previous avoidance output; a fresh initial system when omitted.
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long = "L0")]
        l0: String,
        #[arg(long = "L1")]
        l1: String,
        #[arg(long = "L2")]
        l2: String,
        #[arg(long)]
        p0: String,
        #[arg(long)]
        rho: String,
        #[arg(long)]
        g: Vec<String>,
        #[arg(long = "L")]
        l: Vec<String>,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Starting quadruple for an element g fixing p.
    QuadStart {
        #[arg(long)]
        g: String,
        #[arg(long)]
        p: String,
        #[arg(long)]
        k: String,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Quadruple extension steps against the given elements, in order.
    QuadExtend {
        #[arg(long)]
        quad: PathBuf,
        #[arg(long)]
        h: Vec<String>,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// Closure orders and surjectivity modulo each modulus.
    Congruence {
        /// Generators of a system; all elementary matrices when omitted.
        #[arg(long)]
        system: Option<PathBuf>,
        #[command(flatten)]
        manifest: Manifest,
    },
    /// CSV trace of a start point under sampled words.
    OrbitTrace {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        start: String,
        #[arg(long, default_value_t = 8)]
        length: usize,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long = "max-exp", default_value_t = 3)]
        max_exp: i64,
        /// Trace u^k for k = 1..=K instead of sampled words.
        #[arg(long)]
        powers: Option<usize>,
        #[arg(long, default_value_t = 0)]
        generator: usize,
        #[command(flatten)]
        manifest: Manifest,
    },
}

impl Command {
    pub fn manifest(&self) -> &Manifest {
        match self {
            Command::Verify { manifest, .. }
            | Command::BuildDense { manifest, .. }
            | Command::Add { manifest, .. }
            | Command::Throw { manifest, .. }
            | Command::Start { manifest, .. }
            | Command::Family { manifest, .. }
            | Command::FamilyCert { manifest, .. }
            | Command::AvoidStep { manifest, .. }
            | Command::QuadStart { manifest, .. }
            | Command::QuadExtend { manifest, .. }
            | Command::Congruence { manifest, .. }
            | Command::OrbitTrace { manifest, .. } => manifest,
        }
    }
}

/// A finished command: bytes for `--out` (or stdout) and the exit status.
#[derive(Debug)]
pub struct Outcome {
    pub code: u8,
    pub output: Vec<u8>,
    pub message: Option<String>,
}

impl Outcome {
    fn ok(doc: Document) -> Self {
        Outcome {
            code: EXIT_OK,
            output: doc.to_json().into_bytes(),
            message: None,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn malformed(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_MALFORMED,
            message: message.into(),
        }
    }

    fn violation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VIOLATION,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SearchExhausted(_) | Error::CapExceeded { .. } => EXIT_EXHAUSTED,
            Error::PreconditionViolated(_)
            | Error::EqualFunctions
            | Error::InvalidRadii(_)
            | Error::PointNotOnHyperplane => EXIT_VIOLATION,
            _ => EXIT_MALFORMED,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Core(e) => Failure {
                code: EXIT_MALFORMED,
                message: e.to_string(),
            },
            other => Failure::malformed(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

pub fn parse_vector(s: &str) -> CliResult<Vec<BigInt>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<BigInt>()
                .map_err(|_| Failure::malformed(format!("not an integer vector: {s:?}")))
        })
        .collect()
}

pub fn parse_point(s: &str) -> CliResult<ProjPoint> {
    ProjPoint::new(&parse_vector(s)?).map_err(|e| Failure::malformed(format!("point {s:?}: {e}")))
}

pub fn parse_hyperplane(s: &str) -> CliResult<ProjHyperplane> {
    ProjHyperplane::new(&parse_vector(s)?)
        .map_err(|e| Failure::malformed(format!("hyperplane {s:?}: {e}")))
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_matrix(s: &str) -> CliResult<GroupElement> {
    let rows = s
        .split(';')
        .map(parse_vector)
        .collect::<CliResult<Vec<_>>>()?;
    let m = IntMatrix::from_rows(&rows)
        .map_err(|e| Failure::malformed(format!("matrix {s:?}: {e}")))?;
    GroupElement::new(m).map_err(|e| Failure::malformed(format!("matrix {s:?}: {e}")))
}

pub fn parse_radius2(s: &str) -> CliResult<BigRational> {
    let r = parse_rational(s).map_err(Failure::malformed)?;
    Ok(&r * &r)
}

pub fn parse_bits(s: &str) -> CliResult<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Failure::malformed(format!("not a bit string: {s:?}"))),
        })
        .collect()
}

fn parse_moduli(s: &str) -> CliResult<Vec<u64>> {
    let m = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .map_err(|_| Failure::malformed(format!("bad moduli list {s:?}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if m.is_empty() || m.iter().any(|&d| d < 2) {
        return Err(Failure::malformed(format!("bad moduli list {s:?}")));
    }
    Ok(m)
}

fn read_document(path: &Path) -> CliResult<Document> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::malformed(format!("{}: {e}", path.display())))?;
    Document::from_json(&text).map_err(|e| Failure::malformed(format!("{}: {e}", path.display())))
}

fn read_system(path: &Path) -> CliResult<SchottkySystem> {
    let doc = read_document(path)?;
    let dto = doc
        .system()
        .ok_or_else(|| Failure::malformed(format!("{} has no system", path.display())))?;
    Ok(dto.to_core()?)
}

impl Manifest {
    fn config(&self, q: u64, center: bool) -> CliResult<ConstructionConfig> {
        Ok(ConstructionConfig {
            budget: SearchBudget {
                depth: self.depth,
                words: self.words,
                seed: self.seed,
            },
            q,
            moduli: parse_moduli(&self.moduli)?,
            bfs_cap: self.bfs_cap,
            center,
        })
    }

    /// Checks `--n` against the dimension found in the inputs.
    fn dim(&self, found: usize) -> CliResult<usize> {
        let n = self.n.unwrap_or(found);
        if n < 3 {
            return Err(Failure::malformed(format!("n must be at least 3, got {n}")));
        }
        if n != found {
            return Err(Failure::malformed(format!(
                "--n {n} does not match input dimension {found}"
            )));
        }
        Ok(n)
    }

    fn dim_or_default(&self) -> CliResult<usize> {
        self.dim(self.n.unwrap_or(3))
    }
}

fn ping_pong_doc(
    sys: &SchottkySystem,
    nbhd: Option<&SchottkyQuadruple>,
    cert: PingPongCert,
) -> Document {
    Document::new(Body::PingPongCert {
        system: SystemDto::from_core(sys),
        open_nbhd: nbhd.map(|q| QuadrupleDto::from_core(q).open_nbhd),
        checks: cert.checks,
    })
}

fn violation_outcome(report: &ViolationReport) -> Outcome {
    let doc = Document::new(Body::Violations {
        violations: violations_to_dto(report),
    });
    Outcome {
        code: EXIT_VIOLATION,
        output: doc.to_json().into_bytes(),
        message: Some(report.to_string()),
    }
}

fn check(ok: bool, what: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(Failure::violation(format!("check failed: {what}")))
    }
}

fn recheck_cert(dto: &FullCertDto, m: &Manifest) -> CliResult<()> {
    let cert = dto.to_core()?;
    check(cert.revalidate(), "certificate pair and expressions")?;
    check(
        cert.revalidate_with_density(m.bfs_cap)?,
        "certificate density witness",
    )
}

fn system_ok(dto: &SystemDto) -> CliResult<SchottkySystem> {
    let sys = dto.to_core()?;
    if let Err(report) = verify_system(&sys) {
        return Err(Failure::violation(format!(
            "system fails verification:\n{report}"
        )));
    }
    Ok(sys)
}

fn verify(doc: Document, m: &Manifest) -> CliResult<Outcome> {
    match &doc.body {
        Body::System { system } => {
            let sys = system.to_core()?;
            Ok(match verify_system(&sys) {
                Ok(cert) => Outcome::ok(ping_pong_doc(&sys, None, cert)),
                Err(report) => violation_outcome(&report),
            })
        }
        Body::PingPongCert {
            system,
            open_nbhd,
            checks,
        } => {
            let sys = system.to_core()?;
            let result = match open_nbhd {
                Some(balls) => {
                    let q = QuadrupleDto {
                        system: system.clone(),
                        open_nbhd: balls.clone(),
                    }
                    .to_core()?;
                    verify_quadruple(&q)
                }
                None => verify_system(&sys),
            };
            match result {
                Ok(cert) => {
                    check(
                        &cert.checks == checks,
                        "recorded checks match a fresh verification",
                    )?;
                    Ok(Outcome::ok(doc))
                }
                Err(report) => Ok(violation_outcome(&report)),
            }
        }
        Body::Quadruple {
            quadruple,
            g,
            p,
            start,
            steps,
        } => {
            let q = quadruple.to_core()?;
            let cert = match verify_quadruple(&q) {
                Ok(cert) => cert,
                Err(report) => return Ok(violation_outcome(&report)),
            };
            let g = matrix_from_dto(g)?;
            let p = ProjPoint::new(&p.iter().map(|d| d.0.clone()).collect::<Vec<_>>())?;
            quad_assumption_one(&q, &g, &p)?;
            if let Some(s) = start {
                check(s.to_core()?.revalidate(), "start certificate")?;
            }
            for s in steps {
                recheck_cert(&s.cert, m)?;
            }
            Ok(Outcome::ok(ping_pong_doc(&q.base, Some(&q), cert)))
        }
        Body::Violations { violations } => Err(Failure::violation(format!(
            "file is a violation report with {} entries",
            violations.len()
        ))),
        Body::DenseBuild {
            system,
            density,
            records,
        } => {
            let sys = system_ok(system)?;
            let recs = records
                .iter()
                .map(RecordDto::to_core)
                .collect::<Result<Vec<_>, _>>()?;
            for r in &recs {
                let u = sys.generators().get(r.index).map(|g| g.u.matrix());
                check(
                    u == Some(r.generator()) && r.is_conformant(),
                    "dense build record",
                )?;
            }
            let w = density.to_core();
            check(w.is_valid(), "density witness")?;
            check(
                w.recheck(&sys.matrices(), m.bfs_cap)?,
                "density witness recomputation",
            )?;
            Ok(Outcome::ok(doc))
        }
        Body::Extension { system, cert } => {
            let sys = system_ok(system)?;
            check(
                cert.to_core()?.generators == sys.matrices(),
                "certificate generators match the system",
            )?;
            recheck_cert(cert, m)?;
            Ok(Outcome::ok(doc))
        }
        Body::Start { system, cert } => {
            system_ok(system)?;
            let c = cert.to_core()?;
            check(c.revalidate(), "start certificate")?;
            recheck_cert(&cert.full, m)?;
            Ok(Outcome::ok(doc))
        }
        Body::FamilyMember { system, .. } => {
            system_ok(system)?;
            Ok(Outcome::ok(doc))
        }
        Body::FullGroupCert { cert } => {
            recheck_cert(cert, m)?;
            Ok(Outcome::ok(doc))
        }
        Body::Avoidance {
            instance,
            system,
            certs,
        } => {
            let sys = system_ok(system)?;
            check(
                instance.to_core()?.hypotheses_hold(&sys),
                "avoidance hypotheses",
            )?;
            for c in certs {
                recheck_cert(c, m)?;
            }
            Ok(Outcome::ok(doc))
        }
        Body::Congruence { .. } => Err(Failure::malformed(
            "congruence reports carry no certificate",
        )),
    }
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let m = cli.command.manifest();
    match &cli.command {
        Command::Verify { system, cert, .. } => {
            let path = match (system, cert) {
                (Some(p), None) | (None, Some(p)) => p,
                _ => return Err(Failure::malformed("pass exactly one of --system or --cert")),
            };
            let doc = read_document(path)?;
            if let Some(s) = doc.system() {
                m.dim(s.n)?;
            }
            verify(doc, m)
        }
        Command::BuildDense {
            p,
            l,
            eps,
            delta,
            q,
            center,
            ..
        } => {
            let (p, l) = (parse_point(p)?, parse_hyperplane(l)?);
            m.dim(p.dim())?;
            let build = build_profinitely_dense(
                &p,
                &l,
                &parse_radius2(eps)?,
                &parse_radius2(delta)?,
                &m.config(*q, *center)?,
            )?;
            Ok(Outcome::ok(Document::new(Body::DenseBuild {
                system: SystemDto::from_core(&build.system),
                density: DensityDto::from_core(&build.density),
                records: build.records.iter().map(RecordDto::from_core).collect(),
            })))
        }
        Command::Add {
            system,
            p,
            l,
            eps,
            delta,
            ..
        } => {
            let sys = read_system(system)?;
            m.dim(sys.dim())?;
            let out = add_generator(
                &sys,
                &parse_point(p)?,
                &parse_hyperplane(l)?,
                &parse_radius2(eps)?,
                &parse_radius2(delta)?,
            )?;
            Ok(Outcome::ok(Document::new(Body::System {
                system: SystemDto::from_core(&out),
            })))
        }
        Command::Throw {
            system,
            g,
            p1,
            p2,
            l1,
            l2,
            eps,
            delta,
            ..
        } => {
            let sys = read_system(system)?;
            m.dim(sys.dim())?;
            let density = density_witness(&sys.matrices(), &parse_moduli(&m.moduli)?, m.bfs_cap)?;
            let (out, cert) = throw(
                &sys,
                &parse_matrix(g)?,
                &parse_point(p1)?,
                &parse_point(p2)?,
                &parse_hyperplane(l1)?,
                &parse_hyperplane(l2)?,
                &parse_radius2(eps)?,
                &parse_radius2(delta)?,
                &density,
            )?;
            Ok(Outcome::ok(Document::new(Body::Extension {
                system: SystemDto::from_core(&out),
                cert: FullCertDto::from_core(&cert),
            })))
        }
        Command::Start {
            k,
            p1,
            l1,
            p2,
            l2,
            p3,
            l3,
            eps,
            delta,
            ..
        } => {
            let k = parse_matrix(k)?;
            m.dim(k.dim())?;
            let anchors = [
                (parse_point(p1)?, parse_hyperplane(l1)?),
                (parse_point(p2)?, parse_hyperplane(l2)?),
                (parse_point(p3)?, parse_hyperplane(l3)?),
            ];
            let (sys, cert) = starting_system(
                &k,
                &anchors,
                &parse_radius2(eps)?,
                &parse_radius2(delta)?,
                &m.config(2, false)?,
            )?;
            Ok(Outcome::ok(Document::new(Body::Start {
                system: SystemDto::from_core(&sys),
                cert: StartCertDto::from_core(&cert),
            })))
        }
        Command::Family { len, bits, .. } => {
            let n = m.dim_or_default()?;
            let spec = FamilySpec::standard(n, *len, &m.config(2, false)?)?;
            let sys = family_member(&spec, &parse_bits(bits)?)?;
            Ok(Outcome::ok(Document::new(Body::FamilyMember {
                len: *len,
                bits: bits.clone(),
                system: SystemDto::from_core(&sys),
            })))
        }
        Command::FamilyCert { len, f, g, .. } => {
            let n = m.dim_or_default()?;
            let cfg = m.config(2, false)?;
            let spec = FamilySpec::standard(n, *len, &cfg)?;
            let cert = family_union_cert(&spec, &parse_bits(f)?, &parse_bits(g)?, &cfg)?;
            Ok(Outcome::ok(Document::new(Body::FullGroupCert {
                cert: FullCertDto::from_core(&cert),
            })))
        }
        Command::AvoidStep {
            system,
            l0,
            l1,
            l2,
            p0,
            rho,
            g,
            l,
            ..
        } => {
            let inst = AvoidanceInstance::new(
                parse_hyperplane(l1)?,
                parse_hyperplane(l2)?,
                parse_radius2(rho)?,
                parse_point(p0)?,
                parse_hyperplane(l0)?,
            )?;
            m.dim(inst.p0.dim())?;
            if g.len() != l.len() {
                return Err(Failure::malformed(
                    "--g and --L must be given the same number of times",
                ));
            }
            let cfg = m.config(2, false)?;
            let (sys, mut certs) = match system {
                Some(path) => match read_document(path)?.body {
                    Body::Avoidance {
                        instance,
                        system,
                        certs,
                    } => {
                        if instance != InstanceDto::from_core(&inst) {
                            return Err(Failure::malformed(
                                "avoidance instance differs from the input file",
                            ));
                        }
                        (system.to_core()?, certs)
                    }
                    Body::System { system } => (system.to_core()?, Vec::new()),
                    _ => return Err(Failure::malformed("expected an avoidance or system file")),
                },
                None => (inst.initial_system(&cfg)?.0, Vec::new()),
            };
            let steps = g
                .iter()
                .zip(l)
                .map(|(g, l)| Ok((parse_matrix(g)?, parse_hyperplane(l)?)))
                .collect::<CliResult<Vec<_>>>()?;
            let (out, new) = avoid_steps(&sys, &inst, &steps, &cfg)?;
            certs.extend(new.iter().map(FullCertDto::from_core));
            Ok(Outcome::ok(Document::new(Body::Avoidance {
                instance: InstanceDto::from_core(&inst),
                system: SystemDto::from_core(&out),
                certs,
            })))
        }
        Command::QuadStart { g, p, k, .. } => {
            let (g, p, k) = (parse_matrix(g)?, parse_point(p)?, parse_matrix(k)?);
            m.dim(g.dim())?;
            let (quad, cert) = quad_start(&g, &p, &k, &m.config(2, false)?)?;
            Ok(Outcome::ok(Document::new(Body::Quadruple {
                quadruple: QuadrupleDto::from_core(&quad),
                g: matrix_to_dto(&g),
                p: p.coords().iter().cloned().map(Dec).collect(),
                start: Some(StartCertDto::from_core(&cert)),
                steps: Vec::new(),
            })))
        }
        Command::QuadExtend { quad, h, .. } => {
            let Body::Quadruple {
                quadruple,
                g,
                p,
                start,
                mut steps,
            } = read_document(quad)?.body
            else {
                return Err(Failure::malformed("expected a quadruple file"));
            };
            let q = quadruple.to_core()?;
            m.dim(q.base.dim())?;
            let ge = matrix_from_dto(&g)?;
            let pp = ProjPoint::new(&p.iter().map(|d| d.0.clone()).collect::<Vec<_>>())?;
            let hs = h
                .iter()
                .map(|s| parse_matrix(s))
                .collect::<CliResult<Vec<_>>>()?;
            let (next, out) = quad_extend_all(&q, &ge, &pp, &hs, &m.config(2, false)?)?;
            steps.extend(hs.iter().zip(&out).map(|(h, (cert, branch))| StepDto {
                h: matrix_to_dto(h),
                branch: (*branch).into(),
                cert: FullCertDto::from_core(cert),
            }));
            Ok(Outcome::ok(Document::new(Body::Quadruple {
                quadruple: QuadrupleDto::from_core(&next),
                g,
                p,
                start,
                steps,
            })))
        }
        Command::Congruence { system, .. } => {
            let (n, gens, count) = match system {
                Some(path) => {
                    let sys = read_system(path)?;
                    let n = m.dim(sys.dim())?;
                    (n, sys.matrices(), Some(sys.len()))
                }
                None => {
                    let n = m.dim_or_default()?;
                    (
                        n,
                        GroupElement::all_elementary(n)
                            .into_iter()
                            .map(|(_, _, g)| g)
                            .collect(),
                        None,
                    )
                }
            };
            let mut rows = Vec::new();
            for d in parse_moduli(&m.moduli)? {
                let order = group_order(n, d, m.bfs_cap)?;
                let reduced = gens
                    .iter()
                    .map(|g| reduce_mod(g, d))
                    .collect::<Result<Vec<_>, _>>()?;
                let closure = closure_order(&reduced, m.bfs_cap).ok();
                rows.push(CongruenceRow {
                    modulus: d,
                    closure_order: closure,
                    surjective: closure.map(|c| BigInt::from(c) == order),
                    group_order: Dec(order),
                    exponent: exponent_of(n, d, m.bfs_cap).ok(),
                });
            }
            Ok(Outcome::ok(Document::new(Body::Congruence {
                n,
                generators: count,
                rows,
            })))
        }
        Command::OrbitTrace {
            system,
            start,
            length,
            samples,
            max_exp,
            powers,
            generator,
            ..
        } => {
            let sys = read_system(system)?;
            m.dim(sys.dim())?;
            let start = parse_point(start)?;
            if start.dim() != sys.dim() {
                return Err(Failure::malformed("start point has the wrong dimension"));
            }
            let source = match powers {
                Some(count) => {
                    if *generator >= sys.len() {
                        return Err(Failure::malformed(format!("no generator {generator}")));
                    }
                    WordSource::Powers {
                        generator: *generator,
                        count: *count,
                    }
                }
                None => WordSource::Sampled {
                    samples: *samples,
                    max_len: *length,
                    max_exp: *max_exp,
                    seed: m.seed,
                },
            };
            let rows = orbit_trace(&sys, &source.words(sys.len()), &start)?;
            let mut output = Vec::new();
            write_csv(&mut output, sys.dim(), &rows)
                .map_err(|e| Failure::malformed(e.to_string()))?;
            Ok(Outcome {
                code: EXIT_OK,
                output,
                message: None,
            })
        }
    }
}

/// Parses arguments as `main` does, mapping usage errors to exit status 3.
pub fn parse_args<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args)
}
