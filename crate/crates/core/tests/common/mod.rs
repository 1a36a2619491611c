//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use parabolica::circle::{circle_distance, validate_marked_set, CharacteristicPair, MarkedSet};
use rand::seq::SliceRandom;
use rand::Rng;

/// Distinct points of the lattice `Z / lattice`, sorted.
pub fn lattice_points<R: Rng>(rng: &mut R, count: usize, lattice: u32) -> Vec<f64> {
    let mut all: Vec<u32> = (0..lattice).collect();
    all.shuffle(rng);
    let mut picked: Vec<f64> = all[..count].iter().map(|&k| k as f64 / lattice as f64).collect();
    picked.sort_by(f64::total_cmp);
    picked
}

/// Distinct uniform points at least `min_sep` apart on the circle, sorted.
pub fn uniform_points<R: Rng>(rng: &mut R, count: usize, min_sep: f64) -> Vec<f64> {
    loop {
        let mut pts: Vec<f64> = (0..count).map(|_| rng.gen::<f64>()).collect();
        pts.sort_by(f64::total_cmp);
        let ok = (0..count).all(|i| circle_distance(pts[i], pts[(i + 1) % count]) >= min_sep) || count < 2;
        if ok {
            return pts;
        }
    }
}

/// A random non-crossing partition of `0..count` into classes of size at
/// most two, built by a stack pass over the points in circular order.
pub fn random_partition<R: Rng>(rng: &mut R, count: usize) -> Vec<Vec<usize>> {
    let mut stack: Vec<usize> = Vec::new();
    let mut classes = Vec::new();
    for i in 0..count {
        match rng.gen_range(0..3) {
            0 => classes.push(vec![i]),
            1 if !stack.is_empty() => {
                let j = stack.pop().unwrap();
                classes.push(vec![j, i]);
            }
            _ => stack.push(i),
        }
    }
    classes.extend(stack.into_iter().map(|i| vec![i]));
    classes
}

pub fn random_proper_set<R: Rng>(rng: &mut R, max_size: usize) -> MarkedSet<f64> {
    let count = rng.gen_range(0..=max_size);
    let points = uniform_points(rng, count, 1e-3);
    let classes = random_partition(rng, count);
    validate_marked_set(&points, &classes, 1e-12).expect("generator yields proper sets")
}

/// Brute-force non-synchronization for pairs on the lattice `Z / lattice`:
/// every collision shift is a lattice point, so scanning those shifts and
/// counting coincidences decides `#((A+ + alpha) & A-) <= 1` for all alpha.
pub fn grid_non_synchronized(pair: &CharacteristicPair<f64>, lattice: u32) -> bool {
    let plus = pair.plus.coordinates();
    let minus = pair.minus.coordinates();
    let half_step = 0.25 / lattice as f64;
    (0..lattice).all(|j| {
        let alpha = j as f64 / lattice as f64;
        let hits = plus
            .iter()
            .flat_map(|&p| minus.iter().map(move |&m| circle_distance(p + alpha, m)))
            .filter(|&d| d < half_step)
            .count();
        hits <= 1
    })
}

fn differences(pair: &CharacteristicPair<f64>) -> Vec<f64> {
    let plus = pair.plus.coordinates();
    let minus = pair.minus.coordinates();
    plus.iter()
        .flat_map(|&p| minus.iter().map(move |&m| (p - m).rem_euclid(1.0)))
        .collect()
}

/// Brute-force equivalence: scans shifts on a grid finer than half the
/// shortest arc between the breakpoints `-lambda mod 1` and compares the
/// sorting permutation of `A`'s differences with that of `B`'s shifted ones.
pub fn grid_equivalent(a: &CharacteristicPair<f64>, b: &CharacteristicPair<f64>) -> bool {
    if a.sizes() != b.sizes() {
        return false;
    }
    let tau = differences(a);
    let lambda = differences(b);
    if tau.len() <= 1 {
        return true;
    }
    let mut order: Vec<usize> = (0..tau.len()).collect();
    order.sort_by(|&i, &j| tau[i].total_cmp(&tau[j]));
    let mut breaks: Vec<f64> = lambda.iter().map(|l| (-l).rem_euclid(1.0)).collect();
    breaks.sort_by(f64::total_cmp);
    let min_arc = (0..breaks.len())
        .map(|i| (breaks[(i + 1) % breaks.len()] - breaks[i]).rem_euclid(1.0))
        .filter(|&d| d > 1e-12)
        .fold(1.0, f64::min);
    let steps = ((2.0 / min_arc).ceil() as usize + 1).min(20_000_000);
    (0..steps).any(|j| {
        let alpha = (j as f64 + 0.5) / steps as f64;
        order
            .windows(2)
            .all(|w| (lambda[w[0]] + alpha).rem_euclid(1.0) < (lambda[w[1]] + alpha).rem_euclid(1.0))
    })
}

pub fn singletons(plus: &[f64], minus: &[f64]) -> CharacteristicPair<f64> {
    CharacteristicPair::new(
        MarkedSet::singletons(plus).unwrap(),
        MarkedSet::singletons(minus).unwrap(),
    )
}

/// Random pair of singleton sets with `1 <= K, M <= max` and all differences
/// at least `min_gap` apart.
pub fn random_non_synchronized<R: Rng>(rng: &mut R, max: usize, min_gap: f64) -> CharacteristicPair<f64> {
    loop {
        let k = rng.gen_range(1..=max);
        let m = rng.gen_range(1..=max);
        let pair = singletons(&uniform_points(rng, k, 1e-3), &uniform_points(rng, m, 1e-3));
        let tau = differences(&pair);
        let ok = tau
            .iter()
            .enumerate()
            .all(|(i, &x)| tau[i + 1..].iter().all(|&y| circle_distance(x, y) >= min_gap));
        if ok {
            return pair;
        }
    }
}
