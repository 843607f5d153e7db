//! Orbit traces: images of a start point under sampled words, with their
//! distances to the attracting region, written as CSV for plotting.
//!
//! Points are computed exactly and only converted to floats for output.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use schottky_core::exact::{dist2_point_hyperplane, dist2_points, ProjPoint, Region};
use schottky_core::schottky::{evaluate_word, SchottkySystem, Word};

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitRow {
    pub id: usize,
    pub word: String,
    pub point: Vec<f64>,
    /// Distance to the nearest center of `A` (ball center or tube hyperplane).
    pub center_distance: f64,
    /// Distance to `A` itself, zero inside.
    pub region_distance: f64,
    /// The start point lies outside the repelling tube of the first letter,
    /// so the contraction estimate applies to that letter.
    pub guaranteed: bool,
}

/// Which words to apply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WordSource {
    /// `u_i^k` for `k = 1..=count`.
    Powers { generator: usize, count: usize },
    /// Random reduced words of length at most `max_len`.
    Sampled {
        samples: usize,
        max_len: usize,
        max_exp: i64,
        seed: u64,
    },
}

impl WordSource {
    pub fn words(&self, generators: usize) -> Vec<Word> {
        match *self {
            WordSource::Powers { generator, count } => (1..=count as i64)
                .map(|k| Word::reduced(&[(generator, k)]))
                .collect(),
            WordSource::Sampled {
                samples,
                max_len,
                max_exp,
                seed,
            } => {
                if samples == 0 || max_len == 0 {
                    return Vec::new();
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..samples)
                    .map(|_| Word::random(&mut rng, generators, max_len, max_exp.max(1)))
                    .collect()
            }
        }
    }
}

fn sqrt_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN).max(0.0).sqrt()
}

fn unit_vector(p: &ProjPoint) -> Vec<f64> {
    // scale down huge coordinates before converting
    let max = p
        .coords()
        .iter()
        .map(|c| c.abs())
        .max()
        .unwrap_or_else(BigInt::zero);
    let shift = max.bits().saturating_sub(60);
    let v: Vec<f64> = p
        .coords()
        .iter()
        .map(|c| (c >> shift).to_f64().unwrap_or(0.0))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    v.iter().map(|x| x / norm).collect()
}

fn distances(a: &Region, x: &ProjPoint) -> (f64, f64) {
    let mut center = f64::INFINITY;
    let mut region = f64::INFINITY;
    for b in &a.balls {
        let d = sqrt_f64(dist2_points(x, &b.center).value());
        center = center.min(d);
        region = region.min((d - sqrt_f64(&b.r2)).max(0.0));
    }
    for t in &a.tubes {
        let d = sqrt_f64(dist2_point_hyperplane(x, &t.plane).value());
        center = center.min(d);
        region = region.min((d - sqrt_f64(&t.r2)).max(0.0));
    }
    (center, region)
}

pub fn orbit_trace(
    sys: &SchottkySystem,
    words: &[Word],
    start: &ProjPoint,
) -> schottky_core::Result<Vec<OrbitRow>> {
    let mut rows = Vec::with_capacity(words.len());
    for (id, w) in words.iter().enumerate() {
        let g = evaluate_word(sys, w)?;
        let x = g.apply_point(start);
        let (center_distance, region_distance) = distances(sys.attracting(), &x);
        let guaranteed = w.letters().last().is_some_and(|&(i, _)| {
            let gen = &sys.generators()[i];
            dist2_point_hyperplane(start, &gen.u.hyperplane()).value() > &gen.del2
        });
        rows.push(OrbitRow {
            id,
            word: w.to_string(),
            point: unit_vector(&x),
            center_distance,
            region_distance,
            guaranteed,
        });
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, n: usize, rows: &[OrbitRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["word_id".to_string(), "word".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend([
        "dist_center".into(),
        "dist_region".into(),
        "guaranteed".into(),
    ]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.id.to_string(), r.word.clone()];
        rec.extend(r.point.iter().map(|x| format!("{x:.16e}")));
        rec.push(format!("{:.16e}", r.center_distance));
        rec.push(format!("{:.16e}", r.region_distance));
        rec.push(r.guaranteed.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
