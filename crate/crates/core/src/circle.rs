//! Marked finite sets on the coordinate circle `R/Z`.
//!
//! A marked set is a finite set of points with a proper partition: every class
//! has one or two points, and no two 2-point classes interleave. A
//! characteristic pair is two such sets, `plus` and `minus`, whose pairwise
//! differences `tau_km = {a_k^+ - a_m^-}` carry the bifurcation scenario.
//!
//! All types are generic over [`Coordinate`], implemented for `f64`
//! (tolerance-aware, default `1e-12`) and for `Rational64` (exact).

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, Sub};

use num_rational::Rational64;
use num_traits::{One, Zero};
use thiserror::Error;

/// Scalar type usable as a circle coordinate.
pub trait Coordinate:
    Copy + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> + Send + Sync + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Fractional part, always in `[0, 1)`.
    fn frac(self) -> Self;
    fn half(self) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;
    /// Distinctness tolerance used when the caller does not pick one.
    fn default_tolerance() -> Self;
}

impl Coordinate for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn frac(self) -> Self {
        let r = self.rem_euclid(1.0);
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    }
    fn half(self) -> Self {
        0.5 * self
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn default_tolerance() -> Self {
        1e-12
    }
}

impl Coordinate for Rational64 {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn frac(self) -> Self {
        self - self.floor()
    }
    fn half(self) -> Self {
        self / Rational64::from_integer(2)
    }
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
    fn is_finite(self) -> bool {
        true
    }
    fn default_tolerance() -> Self {
        Zero::zero()
    }
}

/// Length of the shorter arc between two points of `R/Z`.
pub fn circle_distance<C: Coordinate>(a: C, b: C) -> C {
    let d = (a - b).frac();
    let e = C::one() - d;
    if d < e {
        d
    } else {
        e
    }
}

fn cmp<C: Coordinate>(a: &C, b: &C) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircleError {
    #[error("point {index} is not finite")]
    NonFinite { index: usize },
    #[error("points {first} and {second} coincide on the circle")]
    DuplicatePoint { first: usize, second: usize },
    #[error("class {class} has {size} points; proper classes have one or two")]
    ClassTooLarge { class: usize, size: usize },
    #[error("classes {first:?} and {second:?} are intermingled")]
    Intermingled {
        first: (usize, usize),
        second: (usize, usize),
    },
    #[error("classes do not form a partition: {0}")]
    InvalidPartition(String),
    #[error("size mismatch: |A+|={plus_a}, |B+|={plus_b}, |A-|={minus_a}, |B-|={minus_b}")]
    SizeMismatch {
        plus_a: usize,
        plus_b: usize,
        minus_a: usize,
        minus_b: usize,
    },
    #[error("{which} is synchronized: tau{first:?} and tau{second:?} collide")]
    SynchronizedInput {
        which: &'static str,
        first: (usize, usize),
        second: (usize, usize),
    },
}

/// A point of `R/Z`, stored normalized to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CirclePoint<C = f64>(C);

impl<C: Coordinate> CirclePoint<C> {
    pub fn new(value: C) -> Self {
        Self(value.frac())
    }

    pub fn value(self) -> C {
        self.0
    }
}

/// One class of a proper partition, by index into the sorted points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MarkClass {
    Single(usize),
    /// Indices in increasing order.
    Pair(usize, usize),
}

impl MarkClass {
    pub fn members(&self) -> Vec<usize> {
        match *self {
            MarkClass::Single(i) => vec![i],
            MarkClass::Pair(i, j) => vec![i, j],
        }
    }

    fn remap(&self, map: &[usize]) -> MarkClass {
        match *self {
            MarkClass::Single(i) => MarkClass::Single(map[i]),
            MarkClass::Pair(i, j) => {
                let (a, b) = (map[i], map[j]);
                MarkClass::Pair(a.min(b), a.max(b))
            }
        }
    }
}

/// Finite set on the circle with a proper equivalence relation.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSet<C = f64> {
    points: Vec<CirclePoint<C>>,
    classes: Vec<MarkClass>,
}

impl<C: Coordinate> Default for MarkedSet<C> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<C: Coordinate> MarkedSet<C> {
    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            classes: Vec::new(),
        }
    }

    /// All points in singleton classes.
    pub fn singletons(points: &[C]) -> Result<Self, CircleError> {
        validate_marked_set(points, &[], C::default_tolerance())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[CirclePoint<C>] {
        &self.points
    }

    pub fn coordinates(&self) -> Vec<C> {
        self.points.iter().map(|p| p.value()).collect()
    }

    /// Classes ordered by their smallest member.
    pub fn classes(&self) -> &[MarkClass] {
        &self.classes
    }

    pub fn class_of(&self, index: usize) -> Option<MarkClass> {
        self.classes
            .iter()
            .copied()
            .find(|c| c.members().contains(&index))
    }

    pub fn pair_count(&self) -> usize {
        self.classes
            .iter()
            .filter(|c| matches!(c, MarkClass::Pair(..)))
            .count()
    }

    pub fn singleton_count(&self) -> usize {
        self.classes.len() - self.pair_count()
    }

    /// Rotates every point by `alpha`, keeping classes attached to their points.
    pub fn shifted(&self, alpha: C) -> Self {
        shift_set(self, alpha)
    }

    /// Same set with coordinates converted to `f64`.
    pub fn to_f64(&self) -> MarkedSet<f64> {
        MarkedSet {
            points: self.points.iter().map(|p| CirclePoint(p.value().to_f64())).collect(),
            classes: self.classes.clone(),
        }
    }
}

/// Builds a validated marked set from raw coordinates and a partition of
/// their indices (0-based, into `points` as given). Indices that appear in no
/// class become singletons. Points are normalized mod 1 and sorted; the class
/// indices of the result refer to the sorted order.
pub fn validate_marked_set<C: Coordinate>(
    points: &[C],
    classes: &[Vec<usize>],
    tolerance: C,
) -> Result<MarkedSet<C>, CircleError> {
    let n = points.len();
    for (i, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(CircleError::NonFinite { index: i });
        }
    }
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (ci, class) in classes.iter().enumerate() {
        if class.is_empty() {
            return Err(CircleError::InvalidPartition(format!("class {ci} is empty")));
        }
        for &i in class {
            if i >= n {
                return Err(CircleError::InvalidPartition(format!(
                    "class {ci} references point {i}, but there are {n} points"
                )));
            }
            if let Some(prev) = owner[i] {
                return Err(CircleError::InvalidPartition(format!(
                    "point {i} belongs to classes {prev} and {ci}"
                )));
            }
            owner[i] = Some(ci);
        }
        if class.len() > 2 {
            return Err(CircleError::ClassTooLarge {
                class: ci,
                size: class.len(),
            });
        }
    }

    let normalized: Vec<C> = points.iter().map(|p| p.frac()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(&normalized[a], &normalized[b]).then(a.cmp(&b)));
    if n >= 2 {
        for w in 0..n {
            let (a, b) = (order[w], order[(w + 1) % n]);
            if w + 1 == n && n == 2 {
                break;
            }
            if circle_distance(normalized[a], normalized[b]) <= tolerance {
                return Err(CircleError::DuplicatePoint {
                    first: a.min(b),
                    second: a.max(b),
                });
            }
        }
    }

    // rank[input index] = position in sorted order
    let mut rank = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos;
    }

    let mut out_classes: Vec<MarkClass> = Vec::with_capacity(n);
    for class in classes {
        out_classes.push(match class.as_slice() {
            [i] => MarkClass::Single(rank[*i]),
            [i, j] => {
                let (a, b) = (rank[*i], rank[*j]);
                MarkClass::Pair(a.min(b), a.max(b))
            }
            _ => unreachable!("class sizes checked above"),
        });
    }
    for i in 0..n {
        if owner[i].is_none() {
            out_classes.push(MarkClass::Single(rank[i]));
        }
    }

    if let Some((p, q)) = first_crossing(n, &out_classes) {
        let input = |pos: usize| order[pos];
        let sorted_pair = |c: (usize, usize)| {
            let (a, b) = (input(c.0), input(c.1));
            (a.min(b), a.max(b))
        };
        let (first, second) = (sorted_pair(p), sorted_pair(q));
        return Err(CircleError::Intermingled {
            first: first.min(second),
            second: first.max(second),
        });
    }

    out_classes.sort_by_key(|c| c.members()[0]);
    Ok(MarkedSet {
        points: order.iter().map(|&i| CirclePoint(normalized[i])).collect(),
        classes: out_classes,
    })
}

/// Stack pass over the sorted positions: a 2-class must close while it is on
/// top of the stack, otherwise it crosses the class above it.
fn first_crossing(n: usize, classes: &[MarkClass]) -> Option<((usize, usize), (usize, usize))> {
    let mut partner: Vec<Option<usize>> = vec![None; n];
    for c in classes {
        if let MarkClass::Pair(i, j) = *c {
            partner[i] = Some(j);
            partner[j] = Some(i);
        }
    }
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for pos in 0..n {
        let Some(other) = partner[pos] else { continue };
        if other > pos {
            stack.push((pos, other));
        } else {
            let top = stack.pop().expect("opening endpoint pushed earlier");
            if top != (other, pos) {
                return Some(((other, pos), top));
            }
        }
    }
    None
}

/// Rotates a marked set by `alpha` and re-sorts, keeping classes attached.
pub fn shift_set<C: Coordinate>(set: &MarkedSet<C>, alpha: C) -> MarkedSet<C> {
    let n = set.len();
    let moved: Vec<C> = set.points.iter().map(|p| (p.value() + alpha).frac()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(&moved[a], &moved[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos;
    }
    let mut classes: Vec<MarkClass> = set.classes.iter().map(|c| c.remap(&rank)).collect();
    classes.sort_by_key(|c| c.members()[0]);
    MarkedSet {
        points: order.iter().map(|&i| CirclePoint(moved[i])).collect(),
        classes,
    }
}

/// The two marked sets `A^+` (on `S^1_+`) and `A^-` (on `S^1_-`).
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPair<C = f64> {
    pub plus: MarkedSet<C>,
    pub minus: MarkedSet<C>,
}

impl<C: Coordinate> CharacteristicPair<C> {
    pub fn new(plus: MarkedSet<C>, minus: MarkedSet<C>) -> Self {
        Self { plus, minus }
    }

    /// `(K, M)`.
    pub fn sizes(&self) -> (usize, usize) {
        (self.plus.len(), self.minus.len())
    }

    pub fn to_f64(&self) -> CharacteristicPair<f64> {
        CharacteristicPair {
            plus: self.plus.to_f64(),
            minus: self.minus.to_f64(),
        }
    }
}

/// Two table entries closest on the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision<C = f64> {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub gap: C,
}

/// `tau_km = {a_k^+ - a_m^-}` for all `k < K`, `m < M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceTable<C = f64> {
    k: usize,
    m: usize,
    entries: Vec<C>,
    closest: Option<Collision<C>>,
}

impl<C: Coordinate> DifferenceTable<C> {
    pub fn dims(&self) -> (usize, usize) {
        (self.k, self.m)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, k: usize, m: usize) -> C {
        self.entries[k * self.m + m]
    }

    /// `((k, m), tau_km)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), C)> + '_ {
        let m = self.m;
        self.entries
            .iter()
            .enumerate()
            .map(move |(i, &v)| ((i / m, i % m), v))
    }

    /// Smallest circle distance between two distinct entries; `None` with fewer
    /// than two entries.
    pub fn min_gap(&self) -> Option<C> {
        self.closest.map(|c| c.gap)
    }

    pub fn closest(&self) -> Option<Collision<C>> {
        self.closest
    }

    /// Table indices sorted by increasing `tau_km`.
    pub fn sorted_indices(&self) -> Vec<(usize, usize)> {
        let mut idx: Vec<((usize, usize), C)> = self.iter().collect();
        idx.sort_by(|a, b| cmp(&a.1, &b.1).then(a.0.cmp(&b.0)));
        idx.into_iter().map(|(i, _)| i).collect()
    }
}

pub fn difference_table<C: Coordinate>(pair: &CharacteristicPair<C>) -> DifferenceTable<C> {
    let (k, m) = pair.sizes();
    let mut entries = Vec::with_capacity(k * m);
    for a in pair.plus.points() {
        for b in pair.minus.points() {
            entries.push((a.value() - b.value()).frac());
        }
    }
    let closest = closest_entries(&entries, m);
    DifferenceTable {
        k,
        m,
        entries,
        closest,
    }
}

fn closest_entries<C: Coordinate>(entries: &[C], m: usize) -> Option<Collision<C>> {
    let n = entries.len();
    if n < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(&entries[a], &entries[b]).then(a.cmp(&b)));
    let mut best: Option<(C, usize, usize)> = None;
    for w in 0..n {
        let (a, b) = (order[w], order[(w + 1) % n]);
        if a == b {
            continue;
        }
        let gap = circle_distance(entries[a], entries[b]);
        if best.is_none_or(|(g, _, _)| gap < g) {
            best = Some((gap, a.min(b), a.max(b)));
        }
    }
    best.map(|(gap, a, b)| Collision {
        first: (a / m, a % m),
        second: (b / m, b % m),
        gap,
    })
}

/// Outcome of the non-synchronization test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncVerdict {
    pub non_synchronized: bool,
    /// Colliding index pairs when synchronized.
    pub witness: Option<((usize, usize), (usize, usize))>,
}

/// True iff all differences `tau_km` are pairwise farther apart than
/// `tolerance` on the circle. Pairs with `K * M <= 1` are non-synchronized.
pub fn is_non_synchronized<C: Coordinate>(pair: &CharacteristicPair<C>, tolerance: C) -> SyncVerdict {
    match difference_table(pair).closest() {
        Some(c) if c.gap <= tolerance => SyncVerdict {
            non_synchronized: false,
            witness: Some((c.first, c.second)),
        },
        _ => SyncVerdict {
            non_synchronized: true,
            witness: None,
        },
    }
}

/// Index correspondence used to compare two pairs: entry `k` of `A^+` is
/// matched with entry `plus[k]` of `B^+`, and likewise for the minus side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

impl Alignment {
    pub fn identity(k: usize, m: usize) -> Self {
        Self {
            plus: (0..k).collect(),
            minus: (0..m).collect(),
        }
    }
}

fn check_sizes<C: Coordinate>(a: &CharacteristicPair<C>, b: &CharacteristicPair<C>) -> Result<(), CircleError> {
    if a.sizes() != b.sizes() {
        return Err(CircleError::SizeMismatch {
            plus_a: a.plus.len(),
            plus_b: b.plus.len(),
            minus_a: a.minus.len(),
            minus_b: b.minus.len(),
        });
    }
    Ok(())
}

fn require_non_synchronized<C: Coordinate>(
    pair: &CharacteristicPair<C>,
    tolerance: C,
    which: &'static str,
) -> Result<(), CircleError> {
    let v = is_non_synchronized(pair, tolerance);
    match v.witness {
        Some((first, second)) => Err(CircleError::SynchronizedInput { which, first, second }),
        None => Ok(()),
    }
}

/// Decides whether the difference sets of `a` and `b` are ordered the same
/// way on `[0, 1)` after some shift of `b`'s differences, using the identity
/// index alignment. Returns the witness shift.
pub fn are_equivalent<C: Coordinate>(
    a: &CharacteristicPair<C>,
    b: &CharacteristicPair<C>,
    tolerance: C,
) -> Result<Option<C>, CircleError> {
    check_sizes(a, b)?;
    let (k, m) = a.sizes();
    are_equivalent_aligned(a, b, &Alignment::identity(k, m), tolerance)
}

/// [`are_equivalent`] with a caller-supplied index alignment.
pub fn are_equivalent_aligned<C: Coordinate>(
    a: &CharacteristicPair<C>,
    b: &CharacteristicPair<C>,
    alignment: &Alignment,
    tolerance: C,
) -> Result<Option<C>, CircleError> {
    check_sizes(a, b)?;
    require_non_synchronized(a, tolerance, "pair A")?;
    require_non_synchronized(b, tolerance, "pair B")?;
    let (k, m) = a.sizes();
    if alignment.plus.len() != k || alignment.minus.len() != m {
        return Err(CircleError::InvalidPartition(
            "alignment does not match the pair sizes".into(),
        ));
    }
    if k * m == 0 {
        return Ok(Some(C::zero()));
    }
    let tau = difference_table(a);
    let lambda = difference_table(b);
    let lambda_aligned: Vec<C> = (0..k * m)
        .map(|i| lambda.get(alignment.plus[i / m], alignment.minus[i % m]))
        .collect();
    let order: Vec<usize> = tau.sorted_indices().iter().map(|&(p, q)| p * m + q).collect();

    let same_order = |alpha: C| {
        order
            .windows(2)
            .all(|w| (lambda_aligned[w[0]] + alpha).frac() < (lambda_aligned[w[1]] + alpha).frac())
    };

    if same_order(C::zero()) {
        return Ok(Some(C::zero()));
    }
    let mut breaks: Vec<C> = lambda_aligned
        .iter()
        .map(|&l| (C::zero() - l).frac())
        .collect();
    breaks.sort_by(cmp);
    let n = breaks.len();
    for i in 0..n {
        let start = breaks[i];
        let end = if i + 1 < n {
            breaks[i + 1]
        } else {
            breaks[0] + C::one()
        };
        let len = end - start;
        if len <= tolerance {
            continue;
        }
        let alpha = (start + len.half()).frac();
        if same_order(alpha) {
            return Ok(Some(alpha));
        }
    }
    Ok(None)
}

/// Experimental: searches over cyclic relabelings of `b` (rotations of the
/// counterclockwise numbering on each circle that carry `a`'s classes onto
/// `b`'s) for one under which the pairs are equivalent. Returns the alignment
/// and shift of the first success.
pub fn search_equivalence<C: Coordinate>(
    a: &CharacteristicPair<C>,
    b: &CharacteristicPair<C>,
    tolerance: C,
) -> Result<Option<(Alignment, C)>, CircleError> {
    check_sizes(a, b)?;
    let (k, m) = a.sizes();
    let rotations = |n: usize| -> Vec<Vec<usize>> {
        if n == 0 {
            vec![Vec::new()]
        } else {
            (0..n).map(|r| (0..n).map(|i| (i + r) % n).collect()).collect()
        }
    };
    for plus in rotations(k) {
        if !carries_classes(&a.plus, &b.plus, &plus) {
            continue;
        }
        for minus in rotations(m) {
            if !carries_classes(&a.minus, &b.minus, &minus) {
                continue;
            }
            let alignment = Alignment {
                plus: plus.clone(),
                minus,
            };
            if let Some(alpha) = are_equivalent_aligned(a, b, &alignment, tolerance)? {
                return Ok(Some((alignment, alpha)));
            }
        }
    }
    Ok(None)
}

fn carries_classes<C: Coordinate>(a: &MarkedSet<C>, b: &MarkedSet<C>, map: &[usize]) -> bool {
    let mut mapped: Vec<MarkClass> = a.classes().iter().map(|c| c.remap(map)).collect();
    mapped.sort();
    let mut target: Vec<MarkClass> = b.classes().to_vec();
    target.sort();
    mapped == target
}
