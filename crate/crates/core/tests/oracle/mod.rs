//! Brute-force reference implementations of the metrics, written straight
//! from their definitions and sharing no code with the library, plus a
//! randomized sweep comparing the two.

#![allow(dead_code)]

use std::collections::BTreeSet;

use hcmon::metrics::{self, GroupTally};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tolerance for metrics computed from exact counts.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for the smoothed divergences.
pub const SMOOTHED_TOL: f64 = 1e-9;

fn group_rates(outcomes: &[(String, bool)], min_per_group: u64) -> Vec<f64> {
    let groups: BTreeSet<&String> = outcomes.iter().map(|(g, _)| g).collect();
    groups
        .into_iter()
        .filter_map(|g| {
            let n = outcomes.iter().filter(|(h, _)| h == g).count();
            let pos = outcomes.iter().filter(|(h, p)| h == g && *p).count();
            (n > 0 && n as u64 >= min_per_group).then(|| pos as f64 / n as f64)
        })
        .collect()
}

/// Largest pairwise gap, by enumerating every pair of eligible groups.
pub fn dpd(outcomes: &[(String, bool)], min_per_group: u64) -> Option<f64> {
    let rates = group_rates(outcomes, min_per_group);
    if rates.len() < 2 {
        return None;
    }
    let mut best = 0.0f64;
    for a in &rates {
        for b in &rates {
            best = best.max((a - b).abs());
        }
    }
    Some(best)
}

/// Smallest pairwise ratio min/max over every pair of eligible groups.
pub fn dir(outcomes: &[(String, bool)], min_per_group: u64) -> Option<f64> {
    let rates = group_rates(outcomes, min_per_group);
    if rates.len() < 2 || rates.iter().all(|&r| r == 0.0) {
        return None;
    }
    let mut best = f64::INFINITY;
    for (i, a) in rates.iter().enumerate() {
        for b in &rates[i + 1..] {
            let (lo, hi) = if a < b { (*a, *b) } else { (*b, *a) };
            best = best.min(if hi == 0.0 { 1.0 } else { lo / hi });
        }
    }
    Some(best)
}

fn ecdf(sample: &[f64], x: f64) -> f64 {
    sample.iter().filter(|&&v| v <= x).count() as f64 / sample.len() as f64
}

/// Supremum of the ECDF difference, checked at every sample point.
pub fn ks(reference: &[f64], window: &[f64]) -> Option<f64> {
    if reference.is_empty() || window.is_empty() {
        return None;
    }
    reference
        .iter()
        .chain(window)
        .map(|&x| (ecdf(reference, x) - ecdf(window, x)).abs())
        .reduce(f64::max)
}

/// PSI with bins found by scanning the interior edges.
pub fn psi(reference: &[f64], window: &[f64], bins: u32, eps: f64) -> Option<f64> {
    if bins < 2 || reference.is_empty() || window.is_empty() {
        return None;
    }
    let lo = reference.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return None;
    }
    let bin = |x: f64| {
        (1..bins)
            .filter(|&k| x >= lo + (hi - lo) * k as f64 / bins as f64)
            .count()
    };
    let share = |sample: &[f64], b: usize| {
        sample.iter().filter(|&&x| bin(x) == b).count() as f64 / sample.len() as f64
    };
    let mut total = 0.0;
    for b in 0..bins as usize {
        let r = share(reference, b) + eps;
        let w = share(window, b) + eps;
        total += (w - r) * (w / r).ln();
    }
    Some(total)
}

fn kl2(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).log2()).sum()
}

/// Jensen-Shannon divergence in bits, each distribution smoothed by adding
/// `eps` to every category probability and renormalising.
pub fn jsd(reference: &[String], window: &[String], eps: f64) -> Option<f64> {
    if reference.is_empty() || window.is_empty() {
        return None;
    }
    let cats: BTreeSet<&String> = reference.iter().chain(window).collect();
    let dist = |s: &[String]| {
        let raw: Vec<f64> = cats
            .iter()
            .map(|c| s.iter().filter(|x| x == c).count() as f64 / s.len() as f64 + eps)
            .collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / z).collect::<Vec<f64>>()
    };
    let (p, q) = (dist(reference), dist(window));
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    Some(0.5 * kl2(&p, &m) + 0.5 * kl2(&q, &m))
}

pub fn accuracy(pairs: &[(u8, u8)]) -> Option<f64> {
    (!pairs.is_empty())
        .then(|| pairs.iter().filter(|(p, l)| p == l).count() as f64 / pairs.len() as f64)
}

/// Mean by compensated summation.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for &v in values {
        let t = sum + v;
        c += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    Some((sum + c) / values.len() as f64)
}

pub fn range_rate(values: &[Option<f64>], low: f64, high: f64) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| {
        present
            .iter()
            .filter(|&&v| !(low..=high).contains(&v))
            .count() as f64
            / present.len() as f64
    })
}

pub fn flag_rate(flags: &[Option<bool>]) -> Option<f64> {
    let present: Vec<bool> = flags.iter().flatten().copied().collect();
    (!present.is_empty())
        .then(|| present.iter().filter(|&&f| f).count() as f64 / present.len() as f64)
}

/// Worst disagreement seen for one metric across a sweep.
#[derive(Debug, Clone, Default)]
pub struct MetricCheck {
    pub name: &'static str,
    pub tolerance: f64,
    pub cases: usize,
    pub max_error: f64,
    /// Cases where exactly one side failed.
    pub outcome_mismatches: usize,
}

impl MetricCheck {
    pub fn passed(&self) -> bool {
        self.outcome_mismatches == 0 && self.max_error <= self.tolerance
    }

    fn record<E>(&mut self, lib: Result<f64, E>, oracle: Option<f64>) {
        self.cases += 1;
        match (lib.ok(), oracle) {
            (Some(a), Some(b)) => self.max_error = self.max_error.max((a - b).abs()),
            (None, None) => {}
            _ => self.outcome_mismatches += 1,
        }
    }
}

fn numeric_sample(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
    // Half the samples are coarse so ties are common.
    let coarse = rng.gen_bool(0.5);
    (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(-3.0..3.0) + shift;
            if coarse {
                (x * 2.0).round() / 2.0
            } else {
                x
            }
        })
        .collect()
}

fn size(rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(1..=200)
}

/// Compares every library metric with its oracle on `cases` random samples
/// of at most 200 observations each.
pub fn equivalence_sweep(seed: u64, cases: usize) -> Vec<MetricCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = [
        ("demographic_parity", EXACT_TOL),
        ("disparate_impact", EXACT_TOL),
        ("ks", EXACT_TOL),
        ("accuracy", EXACT_TOL),
        ("mean_confidence", EXACT_TOL),
        ("range_rate", EXACT_TOL),
        ("flag_rate", EXACT_TOL),
        ("psi", SMOOTHED_TOL),
        ("jsd", SMOOTHED_TOL),
    ];
    let mut checks: Vec<MetricCheck> = names
        .iter()
        .map(|&(name, tolerance)| MetricCheck {
            name,
            tolerance,
            ..MetricCheck::default()
        })
        .collect();
    let groups = ["a", "b", "c", "d"];
    let cats = ["front", "back", "roof", "balcony", "porch", "garage"];
    for _ in 0..cases {
        // Fairness.
        let n = size(&mut rng);
        let k = rng.gen_range(1..=groups.len());
        let rates: Vec<f64> = (0..k)
            .map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen() })
            .collect();
        let outcomes: Vec<(String, bool)> = (0..n)
            .map(|_| {
                let g = rng.gen_range(0..k);
                (groups[g].to_string(), rng.gen_bool(rates[g]))
            })
            .collect();
        let min = rng.gen_range(0..20);
        let tally: GroupTally =
            metrics::tally_outcomes(outcomes.iter().map(|(g, p)| (g.as_str(), *p)));
        checks[0].record(
            metrics::demographic_parity_difference(&tally, min),
            dpd(&outcomes, min),
        );
        checks[1].record(
            metrics::disparate_impact_ratio(&tally, min),
            dir(&outcomes, min),
        );

        // Distribution drift.
        let n_ref = size(&mut rng);
        let reference = numeric_sample(&mut rng, n_ref, 0.0);
        let shift = rng.gen_range(-2.0..2.0);
        let n_win = size(&mut rng);
        let window = numeric_sample(&mut rng, n_win, shift);
        checks[2].record(
            metrics::ks_statistic(&reference, &window),
            ks(&reference, &window),
        );
        let bins = rng.gen_range(2..=20);
        checks[7].record(
            metrics::psi(&reference, &window, bins),
            psi(&reference, &window, bins, metrics::PSI_EPSILON),
        );

        let support = rng.gen_range(1..=cats.len());
        let draw = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let n = size(rng);
            let skew: f64 = rng.gen();
            (0..n)
                .map(|_| {
                    let i = if rng.gen_bool(skew) {
                        0
                    } else {
                        rng.gen_range(0..support)
                    };
                    cats[i].to_string()
                })
                .collect()
        };
        let (p, q) = (draw(&mut rng), draw(&mut rng));
        checks[8].record(
            metrics::prediction_drift_jsd(&p, &q),
            jsd(&p, &q, metrics::JSD_EPSILON),
        );

        // Performance, safety and privacy rates.
        let pairs: Vec<(u8, u8)> = (0..size(&mut rng))
            .map(|_| (rng.gen_range(0..4), rng.gen_range(0..4)))
            .collect();
        checks[3].record(metrics::accuracy_on_feedback(&pairs), accuracy(&pairs));
        let conf: Vec<f64> = (0..size(&mut rng)).map(|_| rng.gen()).collect();
        checks[4].record(metrics::mean_confidence(&conf), mean(&conf));
        let absent = rng.gen_bool(0.05);
        let speeds: Vec<Option<f64>> = (0..size(&mut rng))
            .map(|_| (!absent && rng.gen_bool(0.9)).then(|| rng.gen_range(-5.0..25.0)))
            .collect();
        checks[5].record(
            metrics::range_violation_rate(&speeds, "speed", 0.0, 15.0),
            range_rate(&speeds, 0.0, 15.0),
        );
        let flags: Vec<Option<bool>> = (0..size(&mut rng))
            .map(|_| (!absent && rng.gen_bool(0.9)).then(|| rng.gen_bool(0.1)))
            .collect();
        checks[6].record(
            metrics::flag_rate(&flags, "image_stored"),
            flag_rate(&flags),
        );
    }
    checks
}

/// A shuffled copy, for permutation checks.
pub fn shuffled<T: Clone>(v: &[T], seed: u64) -> Vec<T> {
    let mut out = v.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}
