//! One line per acceptance criterion; exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schottky::core::congruence::{
    closure_order, density_witness, reduce_mod, ModMatrix, DEFAULT_BFS_CAP,
};
use schottky::core::constructions::{
    build_profinitely_dense, family_member, family_union_cert, starting_system, ConstructionConfig,
    FamilySpec,
};
use schottky::core::exact::{
    dist2_hyperplanes, dist2_point_hyperplane, dist2_points, rat, ProjHyperplane, ProjPoint, Region,
};
use schottky::core::matrix::GroupElement;
use schottky::core::schottky::{
    add_generator, evaluate_word, throw, verify_system, FullGroupCert, Generator, Letter,
    SchottkySystem, Word,
};
use schottky::core::unipotent::{contraction_power, Rank1Unipotent};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn pt(v: &[i64]) -> ProjPoint {
    ProjPoint::from_i64(v).unwrap()
}

fn hp(v: &[i64]) -> ProjHyperplane {
    ProjHyperplane::from_i64(v).unwrap()
}

fn el(rows: &[&[i64]]) -> GroupElement {
    GroupElement::from_i64_rows(rows).unwrap()
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    if t.elapsed() > limit {
        Err(format!("took {:.1?}, limit {limit:?}", t.elapsed()))
    } else {
        Ok(())
    }
}

fn cross(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    vec![
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

fn random_vec(rng: &mut ChaCha8Rng, bound: i64) -> Vec<BigInt> {
    loop {
        let v: Vec<BigInt> = (0..3)
            .map(|_| BigInt::from(rng.gen_range(-bound..=bound)))
            .collect();
        if v.iter().any(|x| !x.is_zero()) {
            return v;
        }
    }
}

fn contraction_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0usize;
    for case in 0..20 {
        let f = random_vec(&mut rng, 3);
        let v = loop {
            let w = cross(&f, &random_vec(&mut rng, 3));
            if w.iter().any(|x| !x.is_zero()) {
                break w;
            }
        };
        let u = Rank1Unipotent::from_parts(&v, &f, &BigInt::one())
            .map_err(|e| format!("case {case}: {e}"))?;
        let del2 = rat(1, rng.gen_range(2..50));
        let eps2 = del2.clone() * rat(1, rng.gen_range(1..20));
        let m = contraction_power(&u, &eps2, &del2).map_err(|e| e.to_string())?;
        let l = u.hyperplane();
        let p = u.point();
        let mut taken = 0;
        while taken < 1000 {
            // points near the tube boundary are the hardest: mix a point of L with a normal offset
            let x = if rng.gen_bool(0.5) {
                random_vec(&mut rng, 50)
            } else {
                let on_l = cross(&f, &random_vec(&mut rng, 20));
                let c = BigInt::from(rng.gen_range(-30..=30));
                on_l.iter().zip(&f).map(|(a, b)| a * 7 + &c * b).collect()
            };
            let Ok(x) = ProjPoint::new(&x) else { continue };
            if dist2_point_hyperplane(&x, &l).value() < &del2 {
                continue;
            }
            taken += 1;
            let k = BigInt::from(rng.gen_range(1..=4) * if rng.gen_bool(0.5) { 1 } else { -1 });
            let y = u.apply_power(&(&k * &m), &x);
            if dist2_points(&y, &p).value() > &eps2 {
                return Err(format!(
                    "case {case}: u^{{{k}·{m}}} sends {x} outside the ε-ball"
                ));
            }
        }
        checked += taken;
    }
    within(t, Duration::from_secs(10))?;
    Ok(format!(
        "{checked} sampled points, 0 violations, {:.1?}",
        t.elapsed()
    ))
}

fn base_single() -> SchottkySystem {
    let (p, l) = (pt(&[1, 0, 0]), hp(&[0, 1, 0]));
    let u = Rank1Unipotent::from_pair(&p, &l).unwrap();
    let m = contraction_power(&u, &rat(1, 100), &rat(1, 4)).unwrap();
    SchottkySystem::new(
        vec![Generator::new(u.power(&m).unwrap(), rat(1, 100), rat(1, 4))],
        Region::ball(p, rat(1, 100)),
        Region::tube(l, rat(1, 4)),
    )
    .unwrap()
}

fn cycle() -> GroupElement {
    el(&[&[0, 0, 1], &[1, 0, 0], &[0, 1, 0]])
}

fn start_anchors() -> [(ProjPoint, ProjHyperplane); 3] {
    [
        (pt(&[1, 0, 0]), hp(&[0, 1, 1])),
        (pt(&[0, 1, 0]), hp(&[1, 0, 1])),
        (pt(&[0, 0, 1]), hp(&[1, -1, 0])),
    ]
}

fn freeness() -> Outcome {
    let cfg = ConstructionConfig::default();
    let mut systems: Vec<(&str, SchottkySystem)> = Vec::new();
    let dense = build_profinitely_dense(
        &pt(&[1, 0, 0]),
        &hp(&[0, 1, 0]),
        &rat(1, 10_000),
        &rat(1, 2_500),
        &cfg,
    )
    .map_err(|e| format!("build_profinitely_dense: {e}"))?;
    systems.push(("dense", dense.system.clone()));
    let added = add_generator(
        &base_single(),
        &pt(&[0, 1, 0]),
        &hp(&[1, 0, 0]),
        &rat(1, 100),
        &rat(1, 100),
    )
    .map_err(|e| format!("add_generator: {e}"))?;
    systems.push(("add", added));
    let g = el(&[&[0, -1, 0], &[1, 0, 0], &[0, 0, 1]]);
    let throw_base = {
        let (p, l) = (pt(&[0, 0, 1]), hp(&[1, 1, 0]));
        let u = Rank1Unipotent::from_pair(&p, &l).unwrap();
        let m = contraction_power(&u, &rat(1, 10_000), &rat(1, 2_500)).unwrap();
        SchottkySystem::new(
            vec![Generator::new(
                u.power(&m).unwrap(),
                rat(1, 10_000),
                rat(1, 2_500),
            )],
            Region::ball(p, rat(1, 10_000)),
            Region::tube(l, rat(1, 2_500)),
        )
        .unwrap()
    };
    let elementary: Vec<_> = GroupElement::all_elementary(3)
        .into_iter()
        .map(|(_, _, g)| g)
        .collect();
    let density =
        density_witness(&elementary, &[3, 4], DEFAULT_BFS_CAP).map_err(|e| e.to_string())?;
    let (thrown, _) = throw(
        &throw_base,
        &g,
        &pt(&[0, 1, 0]),
        &pt(&[1, 0, 0]),
        &hp(&[1, 0, 1]),
        &hp(&[0, 1, 1]),
        &rat(1, 16),
        &rat(1, 16),
        &density,
    )
    .map_err(|e| format!("throw: {e}"))?;
    systems.push(("throw", thrown));
    let (start, _) = starting_system(&cycle(), &start_anchors(), &rat(1, 16), &rat(1, 16), &cfg)
        .map_err(|e| format!("starting_system: {e}"))?;
    systems.push(("start", start));
    let spec = FamilySpec::standard(3, 4, &cfg).map_err(|e| e.to_string())?;
    systems.push((
        "family",
        family_member(&spec, &[true, false, true, true]).map_err(|e| e.to_string())?,
    ));

    let mut report = Vec::new();
    for (name, sys) in &systems {
        let t = Instant::now();
        verify_system(sys).map_err(|r| format!("{name}: {r}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let w = Word::random(&mut rng, sys.len(), 8, 3);
            if evaluate_word(sys, &w)
                .map_err(|e| e.to_string())?
                .is_identity()
            {
                return Err(format!("{name}: word {w} is the identity"));
            }
        }
        within(t, Duration::from_secs(30)).map_err(|e| format!("{name}: {e}"))?;
        report.push(format!("{name} {:.1?}", t.elapsed()));
    }
    Ok(format!(
        "1000 words each, 0 identities ({})",
        report.join(", ")
    ))
}

/// `|SL(3, Z/p^k)| = p^{8(k-1)}·p³(p²−1)(p³−1)` for a prime power `d`.
fn sl3_order(d: u64) -> u64 {
    let p = (2..=d).find(|q| d.is_multiple_of(*q)).unwrap();
    let k = (1..).find(|&k| p.pow(k) == d).unwrap();
    p.pow(8 * (k - 1)) * p.pow(3) * (p * p - 1) * (p * p * p - 1)
}

fn congruence_oracles() -> Outcome {
    let t = Instant::now();
    let elementary: Vec<_> = GroupElement::all_elementary(3)
        .into_iter()
        .map(|(_, _, g)| g)
        .collect();
    for (d, expected) in [(3u64, 5616u64), (4, 43008)] {
        let gens: Vec<ModMatrix> = elementary
            .iter()
            .map(|g| reduce_mod(g, d).unwrap())
            .collect();
        let bfs = closure_order(&gens, DEFAULT_BFS_CAP).map_err(|e| e.to_string())?;
        let formula = sl3_order(d);
        if bfs != expected || formula != expected {
            return Err(format!(
                "mod {d}: BFS {bfs}, formula {formula}, expected {expected}"
            ));
        }
    }
    let e12 = reduce_mod(&GroupElement::elementary(3, 0, 1, BigInt::one()), 3).unwrap();
    let o = closure_order(&[e12], DEFAULT_BFS_CAP).map_err(|e| e.to_string())?;
    if o != 3 {
        return Err(format!("<e12> mod 3 has order {o}"));
    }
    within(t, Duration::from_secs(5))?;
    Ok(format!(
        "5616, 43008, 3 by BFS and formula, {:.1?}",
        t.elapsed()
    ))
}

fn in_k(g: &GroupElement, d: u64) -> bool {
    let n = g.dim();
    (0..n).all(|i| {
        (0..n)
            .all(|j| (g.matrix().get(i, j) - BigInt::from(u8::from(i == j))) % d == BigInt::zero())
    })
}

fn dense_end_to_end() -> Outcome {
    let t = Instant::now();
    let cfg = ConstructionConfig::default();
    let build = build_profinitely_dense(
        &pt(&[1, 0, 0]),
        &hp(&[0, 1, 0]),
        &rat(1, 10_000),
        &rat(1, 2_500),
        &cfg,
    )
    .map_err(|e| format!("search failed: {e}"))?;
    let sys = &build.system;
    if sys.len() != 12 {
        return Err(format!("{} generators", sys.len()));
    }
    verify_system(sys).map_err(|r| format!("(a) {r}"))?;
    for d in [3u64, 4] {
        let gens: Vec<ModMatrix> = sys
            .matrices()
            .iter()
            .map(|g| reduce_mod(g, d).unwrap())
            .collect();
        let full = sl3_order(d);
        let got = closure_order(&gens, DEFAULT_BFS_CAP).map_err(|e| e.to_string())?;
        if got != full {
            return Err(format!("(b) mod {d}: closure {got} of {full}"));
        }
    }
    let first: Vec<_> = build.records.iter().filter(|r| r.modulus == 3).collect();
    if first.is_empty() {
        return Err("(c) no first-batch records".into());
    }
    for r in &first {
        let e = GroupElement::elementary(3, r.a, r.b, r.s.clone());
        let rebuilt =
            r.g.matrix()
                .mul_mat(e.matrix())
                .mul_mat(r.g.inverse().matrix());
        let t_exp = schottky::core::constructions::exponent_multiple(3, 3, DEFAULT_BFS_CAP)
            .map_err(|e| e.to_string())?;
        let ok = &rebuilt == sys.matrices()[r.index].matrix()
            && in_k(&r.g, 3)
            && ((&r.s - BigInt::one()) % &t_exp).is_zero();
        if !ok {
            return Err(format!(
                "(c) generator {} is not g·e^s·g⁻¹ with g ∈ K_3, s ≡ 1 mod {t_exp}",
                r.index
            ));
        }
    }
    within(t, Duration::from_secs(600))?;
    Ok(format!(
        "12 generators, verified, onto mod 3 and 4, {} conformant records, {:.1?}",
        first.len(),
        t.elapsed()
    ))
}

fn minus_identity(g: &GroupElement) -> Vec<BigInt> {
    let n = g.dim();
    (0..n * n)
        .map(|k| g.matrix().get(k / n, k % n) - BigInt::from(u8::from(k / n == k % n)))
        .collect()
}

fn raw_pair_ok(cert: &FullGroupCert, expected_gens: &[GroupElement]) -> Result<(), String> {
    if cert.generators != expected_gens || cert.extra.is_some() {
        return Err("certificate generators differ from the union".into());
    }
    let eval = |expr: &[Letter]| -> Result<GroupElement, String> {
        let mut acc = GroupElement::identity(3);
        for l in expr {
            let Letter::Gen(i, k) = *l else {
                return Err("unexpected extra letter".into());
            };
            acc = GroupElement::new(acc.matrix().mul_mat(cert.generators[i].pow(k).matrix()))
                .unwrap();
        }
        Ok(acc)
    };
    let (u, w) = (eval(&cert.u_expr)?, eval(&cert.w_expr)?);
    let (nu, nw) = (u.matrix().minus_identity(), w.matrix().minus_identity());
    let commute = u.matrix().mul_mat(w.matrix()) == w.matrix().mul_mat(u.matrix());
    let unipotent = nu.mul_mat(&nu).is_zero() && nw.mul_mat(&nw).mul_mat(&nw).is_zero();
    let (a, b) = (minus_identity(&u), minus_identity(&w));
    // independent iff every 2×2 minor of the 2×9 matrix [a; b] vanishes is false
    let independent = (0..9).any(|i| (0..9).any(|j| &a[i] * &b[j] != &a[j] * &b[i]));
    if nu.rank() != 1 || !commute || !unipotent || !independent || !cert.density.is_valid() {
        return Err(format!(
            "rank {}, commute {commute}, unipotent {unipotent}, independent {independent}",
            nu.rank()
        ));
    }
    Ok(())
}

fn family() -> Outcome {
    let t = Instant::now();
    let cfg = ConstructionConfig::default();
    let spec = FamilySpec::standard(3, 8, &cfg).map_err(|e| format!("spec: {e}"))?;
    let bits = |x: u32| -> Vec<bool> { (0..8).map(|i| x >> i & 1 == 1).collect() };
    for x in 0..256u32 {
        let sys = family_member(&spec, &bits(x)).map_err(|e| format!("member {x}: {e}"))?;
        verify_system(&sys).map_err(|r| format!("member {x}: {r}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (x, y) = loop {
            let (x, y) = (rng.gen_range(0..256u32), rng.gen_range(0..256u32));
            if x != y {
                break (x, y);
            }
        };
        let cert = family_union_cert(&spec, &bits(x), &bits(y), &cfg)
            .map_err(|e| format!("{x} ∪ {y}: {e}"))?;
        let mut union = family_member(&spec, &bits(x)).unwrap().matrices();
        for g in family_member(&spec, &bits(y)).unwrap().matrices() {
            if !union.contains(&g) {
                union.push(g);
            }
        }
        let mut sorted_cert = cert.generators.clone();
        let mut sorted_union = union.clone();
        let key = |g: &GroupElement| format!("{:?}", g.matrix().entries());
        sorted_cert.sort_by_key(key);
        sorted_union.sort_by_key(key);
        if sorted_cert != sorted_union {
            return Err(format!("{x} ∪ {y}: generators are not the union"));
        }
        raw_pair_ok(&cert, &cert.generators).map_err(|e| format!("{x} ∪ {y}: {e}"))?;
        if !cert.revalidate() {
            return Err(format!("{x} ∪ {y}: revalidate"));
        }
    }
    within(t, Duration::from_secs(300))?;
    Ok(format!(
        "256 members verified, 50 union certificates, {:.1?}",
        t.elapsed()
    ))
}

fn starting_instance() -> Outcome {
    let t = Instant::now();
    let k = cycle();
    let (sys, cert) = starting_system(
        &k,
        &start_anchors(),
        &rat(1, 16),
        &rat(1, 16),
        &ConstructionConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    verify_system(&sys).map_err(|r| r.to_string())?;
    let gens = sys.matrices();
    let word = |expr: &[Letter]| -> GroupElement {
        let mut acc = GroupElement::identity(3);
        for l in expr {
            let step = match *l {
                Letter::Gen(i, e) => gens[i].pow(e),
                Letter::Extra(e) => k.pow(e),
            };
            acc = GroupElement::new(acc.matrix().mul_mat(step.matrix())).unwrap();
        }
        acc
    };
    let direct = word(&cert.in_group);
    let conj = word(&cert.in_conjugate);
    let only_gens = cert.in_group.iter().all(|l| matches!(l, Letter::Gen(..)));
    let conj_shape = matches!(cert.in_conjugate.as_slice(), [Letter::Extra(1), mid @ .., Letter::Extra(-1)]
        if mid.iter().all(|l| matches!(l, Letter::Gen(..))));
    if cert.w2.is_identity() || direct != cert.w2 || conj != cert.w2 || !only_gens || !conj_shape {
        return Err("w₂ is not exhibited in ⟨S⟩ ∩ k⟨S⟩k⁻¹".into());
    }
    if !cert.full.revalidate() {
        return Err("full-group certificate does not revalidate".into());
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!(
        "w₂ ≠ id in both words, {} generators, {:.1?}",
        sys.len(),
        t.elapsed()
    ))
}

fn kernel_basis(c: &[BigInt]) -> [Vec<f64>; 2] {
    let f: Vec<f64> = c.iter().map(|x| x.to_f64().unwrap()).collect();
    let seed = if f[0].abs() <= f[1].abs() && f[0].abs() <= f[2].abs() {
        [1.0, 0.0, 0.0]
    } else if f[1].abs() <= f[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let cr = |a: &[f64], b: &[f64]| {
        vec![
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let b1 = unit(cr(&f, &seed));
    let b2 = unit(cr(&f, &b1));
    [b1, b2]
}

/// Largest squared sine distance from sampled unit vectors of `ker a` to `ker b`.
fn sampled_sup(a: &[BigInt], b: &[BigInt], samples: usize) -> f64 {
    let [b1, b2] = kernel_basis(a);
    let g: Vec<f64> = b.iter().map(|x| x.to_f64().unwrap()).collect();
    let g2 = g.iter().map(|x| x * x).sum::<f64>();
    (0..samples)
        .map(|i| {
            let th = std::f64::consts::PI * i as f64 / samples as f64;
            let x: Vec<f64> = (0..3)
                .map(|j| th.cos() * b1[j] + th.sin() * b2[j])
                .collect();
            let dot = x.iter().zip(&g).map(|(p, q)| p * q).sum::<f64>();
            dot * dot / g2
        })
        .fold(0.0, f64::max)
}

fn duality() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (a, b) = (random_vec(&mut rng, 20), random_vec(&mut rng, 20));
        let exact = dist2_hyperplanes(
            &ProjHyperplane::new(&a).unwrap(),
            &ProjHyperplane::new(&b).unwrap(),
        );
        let exact = exact.value().to_f64().unwrap();
        let sampled = sampled_sup(&a, &b, 1000).max(sampled_sup(&b, &a, 1000));
        if sampled > exact + 1e-12 {
            return Err(format!(
                "sampled {sampled} exceeds exact {exact} for {a:?}, {b:?}"
            ));
        }
        worst = worst.max(exact - sampled);
    }
    // the sampled angle is within π/2000 of the maximizer, so sin² drops by at most (π/2000)²
    let resolution = (std::f64::consts::PI / 2000.0).powi(2);
    if worst > resolution {
        return Err(format!(
            "gap {worst:e} above sampling resolution {resolution:e}"
        ));
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!(
        "1000 pairs, max gap {worst:.2e} ≤ {resolution:.2e}, {:.1?}",
        t.elapsed()
    ))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<i32, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_schottky"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok(o.status.code().unwrap_or(-1))
}

fn determinism() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "dense",
            vec![
                "build-dense",
                "--n",
                "3",
                "--p",
                "1,0,0",
                "--L",
                "0,1,0",
                "--eps",
                "1/100",
                "--delta",
                "1/50",
            ],
        ),
        (
            "start",
            vec![
                "start",
                "--k",
                "0,0,1;1,0,0;0,1,0",
                "--p1",
                "1,0,0",
                "--L1",
                "0,1,1",
                "--p2",
                "0,1,0",
                "--L2",
                "1,0,1",
                "--p3",
                "0,0,1",
                "--L3",
                "1,-1,0",
                "--eps",
                "1/4",
                "--delta",
                "1/4",
            ],
        ),
        ("family", vec!["family", "--len", "4", "--bits", "1011"]),
        (
            "family-cert",
            vec!["family-cert", "--len", "4", "--f", "1011", "--g", "1001"],
        ),
        (
            "avoid",
            vec![
                "avoid-step",
                "--L0",
                "0,0,1",
                "--L1",
                "1,0,0",
                "--L2",
                "0,1,0",
                "--p0",
                "1,1,0",
                "--rho",
                "1/10",
                "--g",
                "0,-1,0;1,0,0;0,0,1",
                "--L",
                "0,1,0",
            ],
        ),
        (
            "quad",
            vec![
                "quad-start",
                "--g",
                "1,1,0;0,1,0;0,0,1",
                "--p",
                "1,0,0",
                "--k",
                "0,0,1;1,0,0;0,1,0",
            ],
        ),
        ("congruence", vec!["congruence", "--n", "3"]),
    ];
    let mut files = Vec::new();
    for (name, args) in &runs {
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let out = format!("{name}-{rep}.json");
            let mut a: Vec<&str> = args.clone();
            a.extend(["--seed", "11", "--out", &out]);
            let code = run_cli(d, &a)?;
            if code != 0 {
                return Err(format!("{name}: exit {code}"));
            }
            bytes.push(std::fs::read(d.join(&out)).map_err(|e| e.to_string())?);
            files.push(out);
        }
        if bytes[0] != bytes[1] {
            return Err(format!("{name}: outputs differ between runs"));
        }
    }
    let mut args = vec![
        "quad-extend",
        "--quad",
        "quad-0.json",
        "--h",
        "1,0,0;0,1,0;1,0,1",
        "--out",
        "quad-ext.json",
    ];
    if run_cli(d, &args)? != 0 {
        return Err("quad-extend failed".into());
    }
    files.push("quad-ext.json".into());
    *args.last_mut().unwrap() = "quad-ext2.json";
    if run_cli(d, &args)? != 0
        || std::fs::read(d.join("quad-ext.json")).ok()
            != std::fs::read(d.join("quad-ext2.json")).ok()
    {
        return Err("quad-extend is not deterministic".into());
    }
    let mut checked = 0;
    for f in &files {
        if f.starts_with("congruence") {
            continue;
        }
        let code = run_cli(d, &["verify", "--cert", f])?;
        if code != 0 {
            return Err(format!("verify {f}: exit {code}"));
        }
        checked += 1;
    }
    Ok(format!(
        "{} runs byte-identical, {checked} files re-verify with exit 0, {:.1?}",
        runs.len() + 1,
        t.elapsed()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("contraction-bound soundness", contraction_oracle),
        ("ping-pong freeness", freeness),
        ("congruence oracles", congruence_oracles),
        ("profinitely dense build at n=3", dense_end_to_end),
        ("family of 2^8 systems", family),
        ("starting instance", starting_instance),
        ("hyperplane-distance duality", duality),
        ("determinism and round trip", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1)
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
