//! Cross-checks between the raw chart conditions around the distinguished
//! singular point and the stratified scheme censuses.

use localmodel::lattice::{case_matrices, case_bases, BasisConvention, CaseId};
use localmodel::mat::Mat;
use localmodel::ring::Ring;
use localmodel::scheme::{
    n_census, zero_fiber_census, NPoint, Strategy, DEFAULT_BUDGET,
};

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

/// Enumerate every raw chart point F = [X; I] over F_3 for n = 3 on the
/// special fiber, checking the inclusion, pi-stability, and wedge conditions
/// directly against the case matrices in the rearranged basis. Every solution
/// must have vanishing last column blocks (X2 = 0, X4 = 0), its (X1, X3) pair
/// must satisfy the scheme conditions, and the total must match the
/// stratified census.
#[test]
fn raw_chart_points_match_scheme_description_n3() {
    let q = 3u64;
    let ring = Ring::prime_field(q).unwrap();
    let case = CaseId::odd_middle(3, 1).unwrap();
    let (n, s) = (case.n, case.s);
    let two_m = n - 1;
    let cm = case_matrices(&case, &ring, &ring.zero(), BasisConvention::Rearranged).unwrap();
    let abar = cm.inclusion_in.as_ref().unwrap();
    let atm = &abar.transpose() * &cm.pairing;

    let mut count = 0u64;
    let mut counter = vec![0u64; n * n];
    loop {
        let x = Mat::from_fn(&ring, n, n, |i, j| ring.element_at(counter[i * n + j]));
        let f = x.vstack(&Mat::identity(&ring, n));
        // N2: F^t Abar^t M' F = 0.
        let inclusion_ok = (&(&f.transpose() * &atm) * &f).is_zero();
        // Pi-stability forces R = X and X^2 = 0.
        let pi_ok = (&x * &x).is_zero();
        // Wedge: all (s+1)-minors of X vanish (pi = 0 on the special fiber).
        let wedge_ok = x.rank().unwrap() <= s;
        if inclusion_ok && pi_ok && wedge_ok {
            count += 1;
            // The last column blocks vanish automatically.
            assert!(x.block(0, two_m, two_m, 1).is_zero(), "X2 != 0 for a raw solution");
            assert!(x.at(two_m, two_m).is_zero(), "X4 != 0 for a raw solution");
            let p = NPoint {
                x1: x.block(0, 0, two_m, two_m),
                x3: x.block(two_m, 0, 1, two_m),
            };
            assert!(p.is_valid(s).unwrap(), "raw solution fails the scheme conditions");
        }
        if !increment(&mut counter, q) {
            break;
        }
    }
    let census = n_census(1, s, q, DEFAULT_BUDGET, Strategy::Auto).unwrap();
    assert_eq!(count, census.total);
    assert_eq!(count, q * q);
}

/// The rearranged bases only relabel the lattice: sanity-check their shape.
#[test]
fn rearranged_bases_are_permuted_standard_bases() {
    let case = CaseId::odd_middle(7, 2).unwrap();
    let (f, g) = case_bases(&case, BasisConvention::Rearranged);
    let (fs, gs) = case_bases(&case, BasisConvention::Standard);
    let sort = |v: &[(i64, usize)]| {
        let mut v = v.to_vec();
        v.sort_unstable();
        v
    };
    assert_eq!(sort(&f), sort(&fs));
    assert_eq!(sort(&g), sort(&gs));
    assert_ne!(f, fs);
}

/// Independent u64 brute force of the zero fiber at 2m = 6 over F_3: all
/// 3^15 anti-fixed matrices, filtered by square-zero, stratified by rank.
/// This certifies the isotropic-plane generation strategy at a size where the
/// production census no longer enumerates naively.
#[test]
fn stratified_census_matches_u64_brute_force_m3() {
    const TWO_M: usize = 6;
    const Q: u64 = 3;
    let ring = Ring::prime_field(Q).unwrap();
    let basis = localmodel::scheme::anti_fixed_basis(&ring, TWO_M);
    assert_eq!(basis.len(), 15);
    // Sparse signed positions of each basis element, in u64 arithmetic.
    let sparse: Vec<Vec<(usize, u64)>> = basis
        .iter()
        .map(|b| {
            let mut v = Vec::new();
            for i in 0..TWO_M {
                for j in 0..TWO_M {
                    let e = b.at(i, j);
                    if !e.is_zero() {
                        let val = if *e == ring.one() { 1u64 } else { 2 };
                        v.push((i * TWO_M + j, val));
                    }
                }
            }
            v
        })
        .collect();

    fn rank_mod3(x: &[u64; 36]) -> usize {
        let mut m = *x;
        let mut rank = 0;
        for col in 0..6 {
            let mut pivot = None;
            for row in rank..6 {
                if m[row * 6 + col] % 3 != 0 {
                    pivot = Some(row);
                    break;
                }
            }
            let Some(p) = pivot else { continue };
            for k in 0..6 {
                m.swap(p * 6 + k, rank * 6 + k);
            }
            let inv = if m[rank * 6 + col] % 3 == 1 { 1 } else { 2 };
            for row in 0..6 {
                if row != rank && m[row * 6 + col] % 3 != 0 {
                    let f = m[row * 6 + col] % 3 * inv % 3;
                    for k in 0..6 {
                        m[row * 6 + k] = (m[row * 6 + k] + (3 - f) * m[rank * 6 + k]) % 3;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    let total: u64 = Q.pow(15);
    let mut per_rank = std::collections::BTreeMap::<usize, u64>::new();
    for idx in 0..total {
        let mut x = [0u64; 36];
        let mut rem = idx;
        for entries in &sparse {
            let digit = rem % Q;
            rem /= Q;
            if digit == 0 {
                continue;
            }
            for &(pos, sign) in entries {
                x[pos] = (x[pos] + digit * sign) % 3;
            }
        }
        // X^2 = 0 with early exit.
        let mut square_zero = true;
        'sq: for i in 0..6 {
            for j in 0..6 {
                let mut acc = 0u64;
                for k in 0..6 {
                    acc += x[i * 6 + k] * x[k * 6 + j];
                }
                if acc % 3 != 0 {
                    square_zero = false;
                    break 'sq;
                }
            }
        }
        if square_zero {
            *per_rank.entry(rank_mod3(&x)).or_insert(0) += 1;
        }
    }

    // Only even ranks <= 3 can occur.
    assert!(per_rank.keys().all(|r| r % 2 == 0 && *r <= 3));
    for s in 1..=3usize {
        let census = zero_fiber_census(3, s, Q, DEFAULT_BUDGET, Strategy::Stratified).unwrap();
        let expected: std::collections::BTreeMap<usize, u64> = per_rank
            .iter()
            .filter(|(r, _)| **r <= s)
            .map(|(r, c)| (*r, *c))
            .collect();
        assert_eq!(census.per_rank, expected, "s = {s}");
    }
}
