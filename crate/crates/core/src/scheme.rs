//! Finite-field point counts of the special-fiber matrix scheme around the
//! distinguished singular point, and of its fibers.
//!
//! The scheme N consists of pairs (X1, X3) with X1 square of size 2m and X3 a
//! row, subject to
//!
//! ```text
//!   -J X3^t X3 = X1 + sigma(X1),   X1^2 = 0,   X3 X1 = 0,
//!   rank [X1; X3] <= s.
//! ```
//!
//! Censuses pre-solve the linear conditions (the sigma-anti-fixed space) and
//! stratify by rank; dimensions are recovered from the leading exponent of
//! the counts in q.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{j2_mat, sigma};
use crate::mat::{Mat, MatError};
use crate::ring::{Ring, RingElem, RingError};

pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Error)]
pub enum SchemeError {
    #[error("enumeration needs {required} points, over the budget of {budget}")]
    TooLarge { required: u128, budget: u64 },
    #[error("dimension estimation requires counts at two or more distinct field sizes, all nonzero")]
    InsufficientData,
    #[error("dimension estimates disagree across field-size pairs: {0}")]
    Inconsistent(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("matrix does not square to zero")]
    NotNilpotentOrder2,
    #[error("unsupported field size: {0}")]
    UnsupportedField(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// The coefficient field F_q for an odd prime power q.
pub fn field_for_q(q: u64) -> Result<Ring, SchemeError> {
    if q < 3 {
        return Err(SchemeError::UnsupportedField(format!("q = {q}")));
    }
    let mut p = q;
    let mut small = 2;
    while small * small <= q {
        if q % small == 0 {
            p = small;
            break;
        }
        small += 1;
    }
    let mut k = 0u32;
    let mut rest = q;
    while rest % p == 0 {
        rest /= p;
        k += 1;
    }
    if rest != 1 {
        return Err(SchemeError::UnsupportedField(format!("{q} is not a prime power")));
    }
    if k == 1 {
        Ring::prime_field(p).map_err(SchemeError::Ring)
    } else {
        Ring::ext_field_search(p, k).map_err(SchemeError::Ring)
    }
}

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

/// A candidate point of the scheme N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NPoint {
    pub x1: Mat,
    pub x3: Mat,
}

impl NPoint {
    pub fn is_valid(&self, s: usize) -> Result<bool, SchemeError> {
        let two_m = self.x1.rows();
        assert_eq!(self.x1.cols(), two_m);
        assert_eq!((self.x3.rows(), self.x3.cols()), (1, two_m));
        let ring = self.x1.ring();
        let j = j2_mat(ring, two_m);
        let lhs = (&(&j * &self.x3.transpose()) * &self.x3).neg();
        if lhs != self.x1.add_checked(&sigma(&self.x1))? {
            return Ok(false);
        }
        if !(&self.x1 * &self.x1).is_zero() {
            return Ok(false);
        }
        if !(&self.x3 * &self.x1).is_zero() {
            return Ok(false);
        }
        Ok(self.x1.vstack(&self.x3).rank()? <= s)
    }
}

/// A candidate point of the fiber scheme N' (over the marked vector).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NPrimePoint {
    pub y1: Mat,
    pub y2: Mat,
}

impl NPrimePoint {
    pub fn is_valid(&self, s: usize) -> Result<bool, SchemeError> {
        let k = self.y1.rows();
        assert_eq!(self.y1.cols(), k);
        assert_eq!((self.y2.rows(), self.y2.cols()), (1, k));
        if !(&self.y1 * &self.y1).is_zero() {
            return Ok(false);
        }
        if !self.y1.add_checked(&sigma(&self.y1))?.is_zero() {
            return Ok(false);
        }
        if s == 0 {
            return Ok(false);
        }
        if self.y1.vstack(&self.y2).rank()? > s - 1 {
            return Ok(false);
        }
        Ok((&self.y2 * &self.y1).is_zero())
    }
}

/// Embed an N'-point into the fiber of N over the marked vector: the bordered
/// matrix with sigma(Y2) on the left, 1/2 in the corner, and zero last column.
pub fn fiber_point(y1: &Mat, y2: &Mat) -> Result<NPoint, SchemeError> {
    let ring = y1.ring().clone();
    let k = y1.rows();
    let two_m = k + 2;
    let half = ring.one().halve()?;
    let mut x1 = Mat::zeros(&ring, two_m, two_m);
    for i in 0..k {
        for j in 0..k {
            x1.set(i + 1, j + 1, y1.at(i, j).clone());
        }
    }
    let sy2 = sigma(y2); // column of size k
    for i in 0..k {
        x1.set(i + 1, 0, sy2.at(i, 0).clone());
        x1.set(two_m - 1, i + 1, y2.at(0, i).clone());
    }
    x1.set(two_m - 1, 0, half);
    let mut x3 = Mat::zeros(&ring, 1, two_m);
    x3.set(0, 0, ring.one());
    Ok(NPoint { x1, x3 })
}

// ---------------------------------------------------------------------------
// Anti-fixed space and orbits
// ---------------------------------------------------------------------------

/// Basis of the linear space {X : X + sigma(X) = 0} of size 2m; equivalently
/// J X is antisymmetric. The dimension is m(2m - 1).
pub fn anti_fixed_basis(ring: &Ring, two_m: usize) -> Vec<Mat> {
    let j = j2_mat(ring, two_m);
    let mut basis = Vec::new();
    for i in 0..two_m {
        for k in i + 1..two_m {
            // X = -J (E_ik - E_ki)
            let mut e = Mat::zeros(ring, two_m, two_m);
            e.set(i, k, ring.one());
            e.set(k, i, ring.one().neg());
            basis.push((&j * &e).neg());
        }
    }
    basis
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitGroup {
    GeneralLinear,
    Symplectic,
}

/// A nilpotent conjugation orbit of square-zero matrices, labeled by the
/// number of size-two Jordan blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrbitLabel {
    pub two_blocks: usize,
    pub ambient: usize,
    pub group: OrbitGroup,
}

/// Classify a square-zero matrix: the Jordan type is 2^i 1^(2m-2i) with
/// i = rank, and the orbit is symplectic exactly when the matrix is
/// sigma-anti-fixed.
pub fn classify_orbit(x1: &Mat) -> Result<OrbitLabel, SchemeError> {
    if !(x1 * x1).is_zero() {
        return Err(SchemeError::NotNilpotentOrder2);
    }
    let rank = x1.rank()?;
    let group = if x1.add_checked(&sigma(x1))?.is_zero() {
        OrbitGroup::Symplectic
    } else {
        OrbitGroup::GeneralLinear
    };
    // Anti-fixed square-zero matrices have even rank: J X1 is antisymmetric.
    debug_assert!(group != OrbitGroup::Symplectic || rank % 2 == 0);
    Ok(OrbitLabel { two_blocks: rank, ambient: x1.rows(), group })
}

pub fn orbit_dimension(label: &OrbitLabel) -> usize {
    let (i, n) = (label.two_blocks, label.ambient);
    match label.group {
        OrbitGroup::GeneralLinear => 2 * (n - i) * i,
        OrbitGroup::Symplectic => (n - i) * i,
    }
}

// ---------------------------------------------------------------------------
// Rank-stratified censuses
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    Auto,
    Naive,
    Stratified,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankCensus {
    pub q: u64,
    pub per_rank: BTreeMap<usize, u64>,
    pub total: u64,
    pub max_rank: usize,
    pub all_ranks_even: bool,
    pub strategy: &'static str,
}

fn pow_u128(b: u64, e: u32) -> u128 {
    (b as u128).checked_pow(e).unwrap_or(u128::MAX)
}

/// Count sigma-anti-fixed square-zero matrices of size `two_m` with rank at
/// most `max_rank`, stratified by rank.
///
/// The naive strategy filters the whole anti-fixed space (q^(m(2m-1))
/// points). The stratified strategy generates ranks 0 and 2 directly: a
/// nonzero X corresponds to the antisymmetric S = J X of the same rank, with
/// X^2 = 0 exactly when the row plane of a rank-2 S is isotropic, so the
/// rank-2 stratum is (q - 1) matrices per isotropic plane. Ranks >= 4 (only
/// reachable when max_rank >= 4) fall back to the naive strategy.
fn square_zero_census(
    ring: &Ring,
    two_m: usize,
    max_rank: usize,
    budget: u64,
    strategy: Strategy,
) -> Result<(BTreeMap<usize, u64>, &'static str), SchemeError> {
    let q = ring.element_count().expect("finite field");
    let dim = two_m * two_m.saturating_sub(1) / 2;
    let naive_required = pow_u128(q, dim as u32);
    let pick = match strategy {
        Strategy::Naive => Strategy::Naive,
        Strategy::Stratified => Strategy::Stratified,
        Strategy::Auto => {
            if naive_required <= budget.min(2_000_000) as u128 {
                Strategy::Naive
            } else {
                Strategy::Stratified
            }
        }
    };
    match pick {
        Strategy::Naive => {
            if naive_required > budget as u128 {
                return Err(SchemeError::TooLarge { required: naive_required, budget });
            }
            Ok((square_zero_census_naive(ring, two_m, max_rank, naive_required as u64)?, "naive"))
        }
        Strategy::Stratified => {
            let mut per_rank = BTreeMap::new();
            per_rank.insert(0usize, 1u64);
            if max_rank >= 2 && two_m >= 2 {
                per_rank.insert(2, rank_two_stratum_count(ring, two_m, budget)?);
            }
            if max_rank >= 4 && two_m >= 4 {
                // No direct generator for the higher strata; the naive filter
                // is the only exact route.
                if naive_required > budget as u128 {
                    return Err(SchemeError::TooLarge { required: naive_required, budget });
                }
                return Ok((
                    square_zero_census_naive(ring, two_m, max_rank, naive_required as u64)?,
                    "naive",
                ));
            }
            per_rank.retain(|_, v| *v > 0);
            Ok((per_rank, "stratified"))
        }
        Strategy::Auto => unreachable!(),
    }
}

fn square_zero_census_naive(
    ring: &Ring,
    two_m: usize,
    max_rank: usize,
    total: u64,
) -> Result<BTreeMap<usize, u64>, SchemeError> {
    let basis = anti_fixed_basis(ring, two_m);
    let dim = basis.len();
    let q = ring.element_count().unwrap();
    // Sparse view of each basis element (two entries, +-1 signed positions).
    let sparse: Vec<Vec<(usize, usize, RingElem)>> = basis
        .iter()
        .map(|b| {
            let mut v = Vec::new();
            for i in 0..two_m {
                for j in 0..two_m {
                    if !b.at(i, j).is_zero() {
                        v.push((i, j, b.at(i, j).clone()));
                    }
                }
            }
            v
        })
        .collect();

    let per_rank = (0..total)
        .into_par_iter()
        .fold(BTreeMap::<usize, u64>::new, |mut acc, idx| {
            let mut x = Mat::zeros(ring, two_m, two_m);
            let mut rem = idx;
            for entries in sparse.iter().take(dim) {
                let digit = rem % q;
                rem /= q;
                if digit == 0 {
                    continue;
                }
                let t = ring.element_at(digit);
                for (i, j, sign) in entries {
                    let v = x.at(*i, *j).add(&t.mul(sign));
                    x.set(*i, *j, v);
                }
            }
            let rank = x.rank().expect("field rank");
            if rank <= max_rank && (&x * &x).is_zero() {
                *acc.entry(rank).or_insert(0) += 1;
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    Ok(per_rank)
}

/// Count the rank-2 stratum by enumerating isotropic 2-planes in reduced
/// echelon form; each plane carries q - 1 antisymmetric matrices.
fn rank_two_stratum_count(ring: &Ring, two_m: usize, budget: u64) -> Result<u64, SchemeError> {
    let q = ring.element_count().unwrap();
    // Budget: sum over pivot pairs of q^(free entries).
    let mut required: u128 = 0;
    for p1 in 0..two_m {
        for p2 in p1 + 1..two_m {
            let free = (two_m - p1 - 2) + (two_m - p2 - 1);
            required = required.saturating_add(pow_u128(q, free as u32));
        }
    }
    if required > budget as u128 {
        return Err(SchemeError::TooLarge { required, budget });
    }
    let j = j2_mat(ring, two_m);
    let mut planes = 0u64;
    let mut checked_sample = false;
    for p1 in 0..two_m {
        for p2 in p1 + 1..two_m {
            let u_free: Vec<usize> = (p1 + 1..two_m).filter(|&c| c != p2).collect();
            let v_free: Vec<usize> = (p2 + 1..two_m).collect();
            let nfree = u_free.len() + v_free.len();
            let mut counter = vec![0u64; nfree];
            loop {
                let mut u = Mat::zeros(ring, 1, two_m);
                u.set(0, p1, ring.one());
                let mut v = Mat::zeros(ring, 1, two_m);
                v.set(0, p2, ring.one());
                for (t, &col) in u_free.iter().enumerate() {
                    u.set(0, col, ring.element_at(counter[t]));
                }
                for (t, &col) in v_free.iter().enumerate() {
                    v.set(0, col, ring.element_at(counter[u_free.len() + t]));
                }
                let pairing = (&(&u * &j) * &v.transpose()).at(0, 0).clone();
                if pairing.is_zero() {
                    planes += 1;
                    if !checked_sample {
                        // One full validity check per census: the generated
                        // matrix is anti-fixed, square-zero, rank 2.
                        let s_mat = &(&u.transpose() * &v) - &(&v.transpose() * &u);
                        let x = (&j * &s_mat).neg();
                        assert!((&x * &x).is_zero());
                        assert!(x.add_checked(&sigma(&x)).unwrap().is_zero());
                        assert_eq!(x.rank().unwrap(), 2);
                        checked_sample = true;
                    }
                }
                if !increment(&mut counter, q) {
                    break;
                }
            }
        }
    }
    Ok(planes * (q - 1))
}

fn increment(counter: &mut [u64], base: u64) -> bool {
    for d in counter.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Census of the fiber over X3 = 0: sigma-anti-fixed square-zero X1 of size
/// 2m with rank at most s.
pub fn zero_fiber_census(
    m: usize,
    s: usize,
    q: u64,
    budget: u64,
    strategy: Strategy,
) -> Result<RankCensus, SchemeError> {
    assert!(s >= 1 && s <= m, "signature requires 1 <= s <= m");
    let ring = field_for_q(q)?;
    let (per_rank, strat) = square_zero_census(&ring, 2 * m, s, budget, strategy)?;
    Ok(rank_census(q, per_rank, strat))
}

fn rank_census(q: u64, per_rank: BTreeMap<usize, u64>, strategy: &'static str) -> RankCensus {
    let total = per_rank.values().sum();
    let max_rank = per_rank.keys().max().copied().unwrap_or(0);
    let all_ranks_even = per_rank.keys().all(|r| r % 2 == 0);
    RankCensus { q, per_rank, total, max_rank, all_ranks_even, strategy }
}

/// The closed-form dimension of the zero fiber.
pub fn zero_fiber_expected_dim(m: usize, s: usize) -> usize {
    if s % 2 == 0 {
        (2 * m - s) * s
    } else {
        (2 * m - s + 1) * (s - 1)
    }
}

/// Zero-fiber censuses over several field sizes plus the leading-exponent
/// dimension estimate.
pub fn zero_fiber_dimension(
    m: usize,
    s: usize,
    qs: &[u64],
    budget: u64,
    strategy: Strategy,
) -> Result<(Vec<RankCensus>, i64), SchemeError> {
    let censuses: Vec<RankCensus> = qs
        .iter()
        .map(|&q| zero_fiber_census(m, s, q, budget, strategy))
        .collect::<Result<_, _>>()?;
    let counts: Vec<(u64, u64)> = censuses.iter().map(|c| (c.q, c.total)).collect();
    let dim = estimate_dimension(&counts)?;
    Ok((censuses, dim))
}

// ---------------------------------------------------------------------------
// The full scheme census
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Stratum {
    pub label: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NCensus {
    pub q: u64,
    pub strata: Vec<Stratum>,
    pub total: u64,
}

/// Dimension of the space of valid Y2 rows over a fixed Y1 of the given rank:
/// the row space when the rank is maximal (s - 1), the left kernel otherwise.
/// Both identifications are elementary consequences of rank arithmetic and
/// Y1^2 = 0, and `nprime_fiber_analyze` certifies them by brute force.
fn y2_space_dim(rank: usize, s: usize, size: usize) -> usize {
    if rank == s - 1 {
        rank
    } else {
        size - rank
    }
}

/// Stratified census of the scheme N over F_q. The X3 = 0 stratum is the
/// zero-fiber census; each X3 != 0 stratum is fibered over the (q^2m - 1)
/// nonzero rows via the transitive symplectic action, with fiber N' counted
/// through its Y1-rank strata.
pub fn n_census(
    m: usize,
    s: usize,
    q: u64,
    budget: u64,
    strategy: Strategy,
) -> Result<NCensus, SchemeError> {
    assert!(s >= 1 && s <= m);
    let ring = field_for_q(q)?;
    let zero = zero_fiber_census(m, s, q, budget, strategy)?;
    let mut strata = vec![Stratum { label: "x3 = 0".into(), count: zero.total }];
    // N' lives in size 2m - 2 with ranks <= s - 1.
    let size = 2 * m - 2;
    let (y1_counts, _) = square_zero_census(&ring, size, s - 1, budget, strategy)?;
    let orbit = q.pow(2 * m as u32) - 1;
    for (rank, count) in &y1_counts {
        let fiber = q.pow(y2_space_dim(*rank, s, size) as u32);
        strata.push(Stratum {
            label: format!("x3 != 0, y1 rank {rank}"),
            count: orbit * count * fiber,
        });
    }
    let total = strata.iter().map(|st| st.count).sum();
    Ok(NCensus { q, strata, total })
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionSummary {
    pub per_q: Vec<NCensus>,
    /// Leading-exponent estimate per stratum label.
    pub stratum_dims: Vec<(String, i64)>,
    pub largest_stratum: String,
    pub largest_dim: i64,
    pub zero_stratum_dim: i64,
    pub rs: usize,
}

/// Estimate stratum dimensions of N from censuses at several field sizes.
pub fn n_scheme_dimension(
    m: usize,
    s: usize,
    qs: &[u64],
    budget: u64,
    strategy: Strategy,
) -> Result<DimensionSummary, SchemeError> {
    let per_q: Vec<NCensus> = qs
        .iter()
        .map(|&q| n_census(m, s, q, budget, strategy))
        .collect::<Result<_, _>>()?;
    if per_q.len() < 2 {
        return Err(SchemeError::InsufficientData);
    }
    let labels: Vec<String> = per_q[0].strata.iter().map(|st| st.label.clone()).collect();
    for c in &per_q {
        let theirs: Vec<String> = c.strata.iter().map(|st| st.label.clone()).collect();
        if theirs != labels {
            return Err(SchemeError::Inconsistent("stratum sets differ across q".into()));
        }
    }
    let mut stratum_dims = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let counts: Vec<(u64, u64)> = per_q.iter().map(|c| (c.q, c.strata[i].count)).collect();
        let dim = estimate_dimension(&counts)?;
        stratum_dims.push((label.clone(), dim));
    }
    // Largest stratum at the largest field size.
    let last = per_q.last().unwrap();
    let (largest_idx, _) = last
        .strata
        .iter()
        .enumerate()
        .max_by_key(|(_, st)| st.count)
        .unwrap();
    let zero_idx = labels.iter().position(|l| l == "x3 = 0").unwrap();
    Ok(DimensionSummary {
        largest_stratum: labels[largest_idx].clone(),
        largest_dim: stratum_dims[largest_idx].1,
        zero_stratum_dim: stratum_dims[zero_idx].1,
        stratum_dims,
        per_q,
        rs: (2 * m + 1 - s) * s,
    })
}

// ---------------------------------------------------------------------------
// Fiber analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FiberPrediction {
    RowSpace,
    LeftKernel,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberAnalysis {
    pub rank: usize,
    pub prediction: FiberPrediction,
    pub predicted_dim: usize,
    pub valid_count: u64,
    pub matches: bool,
}

/// Brute-force the set of rows Y2 completing a fixed Y1 to a fiber point and
/// compare with the predicted linear space: the row space of Y1 when
/// rank(Y1) = s - 1, its left kernel when rank(Y1) < s - 1.
pub fn nprime_fiber_analyze(
    y1: &Mat,
    s: usize,
    budget: u64,
) -> Result<FiberAnalysis, SchemeError> {
    let ring = y1.ring().clone();
    let size = y1.rows();
    if !(y1 * y1).is_zero() || !y1.add_checked(&sigma(y1))?.is_zero() {
        return Err(SchemeError::PreconditionViolated(
            "Y1 must be sigma-anti-fixed with square zero".into(),
        ));
    }
    let rank = y1.rank()?;
    if s == 0 || rank > s - 1 {
        return Err(SchemeError::PreconditionViolated(format!(
            "rank(Y1) = {rank} exceeds s - 1 = {}",
            s as i64 - 1
        )));
    }
    let q = ring.element_count().expect("finite field");
    let required = pow_u128(q, size as u32);
    if required > budget as u128 {
        return Err(SchemeError::TooLarge { required, budget });
    }

    let mut valid: BTreeSet<Vec<RingElem>> = BTreeSet::new();
    let mut counter = vec![0u64; size];
    loop {
        let y2 = Mat::from_fn(&ring, 1, size, |_, j| ring.element_at(counter[j]));
        let p = NPrimePoint { y1: y1.clone(), y2: y2.clone() };
        if p.is_valid(s)? {
            valid.insert((0..size).map(|j| y2.at(0, j).clone()).collect());
        }
        if size == 0 || !increment(&mut counter, q) {
            break;
        }
    }

    let (prediction, basis) = if rank == s - 1 {
        (FiberPrediction::RowSpace, y1.row_space_basis()?)
    } else {
        (FiberPrediction::LeftKernel, y1.left_kernel_basis()?)
    };
    let mut predicted: BTreeSet<Vec<RingElem>> = BTreeSet::new();
    let dim = basis.len();
    let mut counter = vec![0u64; dim];
    loop {
        let mut y2 = Mat::zeros(&ring, 1, size);
        for (t, b) in basis.iter().enumerate() {
            y2 = y2.add_checked(&b.scale(&ring.element_at(counter[t])))?;
        }
        predicted.insert((0..size).map(|j| y2.at(0, j).clone()).collect());
        if dim == 0 || !increment(&mut counter, q) {
            break;
        }
    }

    Ok(FiberAnalysis {
        rank,
        prediction,
        predicted_dim: dim,
        valid_count: valid.len() as u64,
        matches: valid == predicted,
    })
}

// ---------------------------------------------------------------------------
// Dimension estimation
// ---------------------------------------------------------------------------

/// Leading-exponent fit: counts growing like c * q^d give
/// d = log(count ratio) / log(q ratio). All pairs must agree after rounding;
/// the value from the two largest field sizes is returned.
pub fn estimate_dimension(counts: &[(u64, u64)]) -> Result<i64, SchemeError> {
    let mut pts: Vec<(u64, u64)> = counts.to_vec();
    pts.sort_unstable();
    pts.dedup();
    let qs: BTreeSet<u64> = pts.iter().map(|&(q, _)| q).collect();
    if qs.len() < 2 || pts.iter().any(|&(_, c)| c == 0) || qs.len() != pts.len() {
        return Err(SchemeError::InsufficientData);
    }
    let mut estimates = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (qa, ca) = pts[i];
            let (qb, cb) = pts[j];
            let d = ((cb as f64 / ca as f64).ln() / (qb as f64 / qa as f64).ln()).round() as i64;
            estimates.push(((qa, qb), d));
        }
    }
    let last = estimates.last().unwrap().1;
    if estimates.iter().any(|&(_, d)| d != last) {
        return Err(SchemeError::Inconsistent(format!("{estimates:?}")));
    }
    Ok(last)
}
