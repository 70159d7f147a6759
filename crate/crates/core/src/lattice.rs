//! Standard lattices, their duals, the pairing and inclusion matrices of the
//! three supported chart cases, and the involutions `iota` and `sigma`.
//!
//! Lattices are diagonal in the fixed split basis e_1, ..., e_n, so a lattice
//! is just a vector of pi-valuations. The pairing and inclusion matrices are
//! computed mechanically from the split hermitian form; the hard-coded block
//! displays used in the chart construction are checked against this machinery
//! in the tests.

use serde::Serialize;
use thiserror::Error;

use crate::mat::Mat;
use crate::ring::{Ring, RingElem};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),
    #[error("pairing value is not integral over O_F0")]
    NonIntegralPairing,
    #[error("construction invariant violated: {0}")]
    InvariantViolated(String),
}

// ---------------------------------------------------------------------------
// Case descriptors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    Odd,
    Even,
}

/// Which standard lattice the chart is centered on: Lambda_0 or Lambda_m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IndexSet {
    Zero,
    Middle,
}

/// Descriptor of one of the three supported chart cases, together with the
/// signature (r, s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CaseId {
    pub parity: Parity,
    pub index_set: IndexSet,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub r: usize,
}

impl CaseId {
    pub fn new(parity: Parity, index_set: IndexSet, n: usize, s: usize) -> Result<CaseId, LatticeError> {
        if n < 3 {
            return Err(LatticeError::UnsupportedCase(format!("n = {n} < 3")));
        }
        let m = match parity {
            Parity::Odd => {
                if n % 2 == 0 {
                    return Err(LatticeError::UnsupportedCase(format!(
                        "odd case requires odd n, got {n}"
                    )));
                }
                (n - 1) / 2
            }
            Parity::Even => {
                if n % 2 == 1 {
                    return Err(LatticeError::UnsupportedCase(format!(
                        "even case requires even n, got {n}"
                    )));
                }
                n / 2
            }
        };
        if parity == Parity::Even && index_set == IndexSet::Zero {
            return Err(LatticeError::UnsupportedCase(
                "even case supports only the middle lattice".into(),
            ));
        }
        let r = n - s;
        if s == 0 || s > r {
            return Err(LatticeError::UnsupportedCase(format!(
                "signature requires 0 < s <= r, got (r, s) = ({r}, {s})"
            )));
        }
        Ok(CaseId { parity, index_set, n, m, s, r })
    }

    pub fn odd_middle(n: usize, s: usize) -> Result<CaseId, LatticeError> {
        CaseId::new(Parity::Odd, IndexSet::Middle, n, s)
    }

    pub fn odd_zero(n: usize, s: usize) -> Result<CaseId, LatticeError> {
        CaseId::new(Parity::Odd, IndexSet::Zero, n, s)
    }

    pub fn even_middle(n: usize, s: usize) -> Result<CaseId, LatticeError> {
        CaseId::new(Parity::Even, IndexSet::Middle, n, s)
    }

    pub fn label(&self) -> &'static str {
        match (self.parity, self.index_set) {
            (Parity::Odd, IndexSet::Middle) => "odd-m",
            (Parity::Odd, IndexSet::Zero) => "odd-0",
            (Parity::Even, IndexSet::Middle) => "even-m",
            (Parity::Even, IndexSet::Zero) => unreachable!(),
        }
    }
}

// ---------------------------------------------------------------------------
// Constant matrices
// ---------------------------------------------------------------------------

/// Unit antidiagonal matrix H_l.
pub fn h_mat(ring: &Ring, l: usize) -> Mat {
    Mat::from_fn(ring, l, l, |i, j| {
        if i + j == l.wrapping_sub(1) {
            ring.one()
        } else {
            ring.zero()
        }
    })
}

/// The antidiagonal matrix J_{k,l} = [[0, H_l], [-H_k, 0]] of size k + l.
pub fn j_mat(ring: &Ring, k: usize, l: usize) -> Mat {
    let n = k + l;
    Mat::from_fn(ring, n, n, |i, j| {
        if i < l && j >= k && i + j == k + l - 1 {
            ring.one()
        } else if i >= l && j < k && i + j == k + l - 1 {
            ring.one().neg()
        } else {
            ring.zero()
        }
    })
}

/// J_{2k} = J_{k,k}.
pub fn j2_mat(ring: &Ring, two_k: usize) -> Mat {
    assert!(two_k % 2 == 0);
    j_mat(ring, two_k / 2, two_k / 2)
}

/// D_i is J_i for even i and H_i for odd i.
pub fn d_mat(ring: &Ring, i: usize) -> Mat {
    if i % 2 == 0 {
        j2_mat(ring, i)
    } else {
        h_mat(ring, i)
    }
}

/// The n x n matrix with a single 1 in the lower-right corner.
pub fn k_mat(ring: &Ring, n: usize) -> Mat {
    Mat::from_fn(ring, n, n, |i, j| {
        if i == n - 1 && j == n - 1 {
            ring.one()
        } else {
            ring.zero()
        }
    })
}

/// J'_{2m}: the square matrix of size 2m + 1 with J_{2m} in the upper-left
/// corner and zeros elsewhere.
pub fn jprime_mat(ring: &Ring, two_m: usize) -> Mat {
    let j = j2_mat(ring, two_m);
    Mat::from_fn(ring, two_m + 1, two_m + 1, |i, j_| {
        if i < two_m && j_ < two_m {
            j.at(i, j_).clone()
        } else {
            ring.zero()
        }
    })
}

/// The matrix of multiplication by pi on Lambda (x) A in a basis
/// (v_1, ..., v_n, pi v_1, ..., pi v_n).
pub fn pi_matrix(ring: &Ring, n: usize, pi0: &RingElem) -> Mat {
    Mat::from_fn(ring, 2 * n, 2 * n, |i, j| {
        if i + n == j {
            pi0.clone()
        } else if i == j + n {
            ring.one()
        } else {
            ring.zero()
        }
    })
}

// ---------------------------------------------------------------------------
// Involutions
// ---------------------------------------------------------------------------

/// Reflection at the anti-bisector: iota(B) = H_l B^t H_k for B of shape k x l.
pub fn iota(b: &Mat) -> Mat {
    let (k, l) = (b.rows(), b.cols());
    Mat::from_fn(b.ring(), l, k, |i, j| b.at(k - 1 - j, l - 1 - i).clone())
}

/// Signed reflection: sigma(B) = D_l B^t D_k.
pub fn sigma(b: &Mat) -> Mat {
    let (k, l) = (b.rows(), b.cols());
    let dl = d_mat(b.ring(), l);
    let dk = d_mat(b.ring(), k);
    &(&dl * &b.transpose()) * &dk
}

// ---------------------------------------------------------------------------
// Lattices
// ---------------------------------------------------------------------------

/// Which of the two O_F0-bilinear forms a dual is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualForm {
    Alternating,
    Symmetric,
}

/// A lattice diagonal in the split basis: span of pi^{a_i} e_i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    pub exponents: Vec<i64>,
}

impl LatticeSpec {
    /// Lambda_i = span(pi^-1 e_1, ..., pi^-1 e_i, e_{i+1}, ..., e_n).
    pub fn standard(i: usize, n: usize) -> LatticeSpec {
        assert!(i <= n);
        LatticeSpec {
            exponents: (0..n).map(|k| if k < i { -1 } else { 0 }).collect(),
        }
    }

    /// Lambda_j for arbitrary j via the periodic rule Lambda_{kn+i} = pi^-k Lambda_i.
    pub fn periodic(j: i64, n: usize) -> LatticeSpec {
        let nn = n as i64;
        let k = j.div_euclid(nn);
        let i = j.rem_euclid(nn) as usize;
        let base = LatticeSpec::standard(i, n);
        LatticeSpec {
            exponents: base.exponents.iter().map(|e| e - k).collect(),
        }
    }

    /// Dual lattice. The hermitian form is split: phi(e_i, e_{n+1-j}) =
    /// delta_{ij}, so the alternating dual of span(pi^{a_i} e_i) has
    /// exponents b_i = -a_{n+1-i}, and the symmetric dual is its pi^{-1}
    /// multiple.
    pub fn dual(&self, form: DualForm) -> LatticeSpec {
        let n = self.exponents.len();
        let mut b: Vec<i64> = (0..n).map(|i| -self.exponents[n - 1 - i]).collect();
        if form == DualForm::Symmetric {
            for e in b.iter_mut() {
                *e -= 1;
            }
        }
        LatticeSpec { exponents: b }
    }

    /// Scale by pi^k.
    pub fn shift(&self, k: i64) -> LatticeSpec {
        LatticeSpec {
            exponents: self.exponents.iter().map(|e| e + k).collect(),
        }
    }

    /// Ordered O_F-basis (pi-valuation, basis index), in the standard order.
    pub fn basis(&self) -> Vec<(i64, usize)> {
        self.exponents.iter().copied().enumerate().map(|(i, e)| (e, i)).collect()
    }
}

fn basis_label(v: (i64, usize)) -> String {
    let (k, i) = v;
    match k {
        0 => format!("e{}", i + 1),
        1 => format!("pi*e{}", i + 1),
        -1 => format!("pi^-1*e{}", i + 1),
        k => format!("pi^{}*e{}", k, i + 1),
    }
}

/// Matrix of the O_F0-linear map induced by a lattice inclusion, with respect
/// to the bases (v_1..v_n, pi v_1..pi v_n) of both sides. Entries are powers
/// of pi0 placed by re-expressing each pi^k e_i of the source in the target
/// basis.
pub fn inclusion_matrix(
    from: &[(i64, usize)],
    to: &[(i64, usize)],
    ring: &Ring,
    pi0: &RingElem,
) -> Result<Mat, LatticeError> {
    let n = from.len();
    assert_eq!(to.len(), n);
    let mut out = Mat::zeros(ring, 2 * n, 2 * n);
    for c in 0..2 * n {
        let (mut k, i) = from[c % n];
        if c >= n {
            k += 1;
        }
        let t = to
            .iter()
            .position(|&(_, ti)| ti == i)
            .expect("bases must address the same split basis");
        let d = k - to[t].0;
        if d < 0 {
            return Err(LatticeError::InvariantViolated(
                "source lattice is not contained in target".into(),
            ));
        }
        let (row, pow) = if d % 2 == 0 {
            (t, d / 2)
        } else {
            (t + n, (d - 1) / 2)
        };
        out.set(row, c, pi0.pow(pow as u64));
    }
    Ok(out)
}

/// Matrix of an O_F0-bilinear form between two lattices with respect to their
/// bases (v_1..v_n, pi v_1..pi v_n): entry (R, C) = form(row_basis_R, col_basis_C).
///
/// Both forms come from the split hermitian form phi with the half-trace
/// construction; a value of pi^k contributes pi0^{k/2} for even k >= 0 and 0
/// for odd k.
pub fn pairing_matrix(
    row_basis: &[(i64, usize)],
    col_basis: &[(i64, usize)],
    form: DualForm,
    ring: &Ring,
    pi0: &RingElem,
) -> Result<Mat, LatticeError> {
    let n = row_basis.len();
    assert_eq!(col_basis.len(), n);
    let mut out = Mat::zeros(ring, 2 * n, 2 * n);
    for rr in 0..2 * n {
        let (mut a, i) = row_basis[rr % n];
        if rr >= n {
            a += 1;
        }
        for cc in 0..2 * n {
            let (mut b, j) = col_basis[cc % n];
            if cc >= n {
                b += 1;
            }
            // phi(pi^a e_i, pi^b e_j) = (-1)^b pi^(a+b) [i + j = n - 1] (0-based)
            if i + j != n - 1 {
                continue;
            }
            let mut k = a + b;
            if form == DualForm::Alternating {
                k -= 1;
            }
            if k.rem_euclid(2) == 1 {
                continue; // trace of an odd pi-power vanishes
            }
            if k < 0 {
                return Err(LatticeError::NonIntegralPairing);
            }
            let val = pi0.pow((k / 2) as u64);
            let val = if b.rem_euclid(2) == 1 { val.neg() } else { val };
            out.set(rr, cc, val);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Case matrices
// ---------------------------------------------------------------------------

/// Basis convention for the middle-lattice odd case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisConvention {
    /// The f/g bases used by the affine chart around the smooth center.
    Standard,
    /// The rearranged bases used around the distinguished singular point.
    Rearranged,
}

/// The concrete matrices of one case: the pairing between the two lattices,
/// the inclusion maps (middle odd case only), and the pi-action.
#[derive(Debug, Clone)]
pub struct CaseMatrices {
    pub pairing: Mat,
    /// Lambda_m -> Lambda_{m+1} (odd middle case).
    pub inclusion_in: Option<Mat>,
    /// Lambda_{m+1} -> pi^-1 Lambda_m (odd middle case).
    pub inclusion_out: Option<Mat>,
    pub pi_action: Mat,
    pub basis_labels: Vec<String>,
}

/// Bases of the source lattice (carrying F) and target lattice (carrying the
/// orthogonal complement) for a case.
pub fn case_bases(case: &CaseId, convention: BasisConvention) -> (Vec<(i64, usize)>, Vec<(i64, usize)>) {
    let n = case.n;
    let m = case.m;
    match (case.parity, case.index_set, convention) {
        (Parity::Odd, IndexSet::Middle, BasisConvention::Standard) => (
            LatticeSpec::standard(m, n).basis(),
            LatticeSpec::standard(m + 1, n).basis(),
        ),
        (Parity::Odd, IndexSet::Middle, BasisConvention::Rearranged) => {
            // Lambda_m:   e_{m+2}, ..., e_n, pi^-1 e_1, ..., pi^-1 e_m, e_{m+1}
            // Lambda_{m+1}: same, but pi^-1 e_{m+1} last.
            let mut f: Vec<(i64, usize)> = (m + 1..n).map(|i| (0, i)).collect();
            f.extend((0..m).map(|i| (-1i64, i)));
            let mut g = f.clone();
            f.push((0, m));
            g.push((-1, m));
            (f, g)
        }
        (Parity::Odd, IndexSet::Zero, _) => {
            let e = LatticeSpec::standard(0, n).basis();
            (e.clone(), e)
        }
        (Parity::Even, IndexSet::Middle, _) => {
            let f = LatticeSpec::standard(m, n).basis();
            (f.clone(), f)
        }
        (Parity::Even, IndexSet::Zero, _) => unreachable!(),
    }
}

/// Build the matrices of the selected case over `ring`, with `pi0` the image
/// of pi^2 (a unit, a symbolic variable, or zero on the special fiber).
pub fn case_matrices(
    case: &CaseId,
    ring: &Ring,
    pi0: &RingElem,
    convention: BasisConvention,
) -> Result<CaseMatrices, LatticeError> {
    let n = case.n;
    let (f_basis, g_basis) = case_bases(case, convention);
    let (pairing, inclusion_in, inclusion_out, form) = match (case.parity, case.index_set) {
        (Parity::Odd, IndexSet::Middle) => {
            let pairing = pairing_matrix(&g_basis, &f_basis, DualForm::Symmetric, ring, pi0)?;
            let a_in = inclusion_matrix(&f_basis, &g_basis, ring, pi0)?;
            let pinv_f: Vec<(i64, usize)> = f_basis.iter().map(|&(k, i)| (k - 1, i)).collect();
            let a_out = inclusion_matrix(&g_basis, &pinv_f, ring, pi0)?;
            (pairing, Some(a_in), Some(a_out), DualForm::Symmetric)
        }
        (Parity::Odd, IndexSet::Zero) => {
            let pairing = pairing_matrix(&f_basis, &f_basis, DualForm::Alternating, ring, pi0)?;
            (pairing, None, None, DualForm::Alternating)
        }
        (Parity::Even, IndexSet::Middle) => {
            let pairing = pairing_matrix(&f_basis, &f_basis, DualForm::Symmetric, ring, pi0)?;
            (pairing, None, None, DualForm::Symmetric)
        }
        (Parity::Even, IndexSet::Zero) => unreachable!(),
    };
    let pi_action = pi_matrix(ring, n, pi0);

    // Construction invariants.
    if inclusion_in.is_none() {
        let pt = pairing.transpose();
        let ok = match form {
            DualForm::Alternating => pt == (&pairing).neg(),
            DualForm::Symmetric => pt == pairing,
        };
        if !ok {
            return Err(LatticeError::InvariantViolated(
                "pairing does not have the declared symmetry".into(),
            ));
        }
    }
    // Adjointness of the pi-action: Pi^t * pairing = -pairing * Pi.
    let lhs = &pi_action.transpose() * &pairing;
    let rhs = (&(&pairing * &pi_action)).neg();
    if lhs != rhs {
        return Err(LatticeError::InvariantViolated(
            "pi-action is not anti-selfadjoint for the pairing".into(),
        ));
    }

    let mut basis_labels: Vec<String> = f_basis.iter().map(|&v| basis_label(v)).collect();
    basis_labels.extend(f_basis.iter().map(|&(k, i)| basis_label((k + 1, i))));

    Ok(CaseMatrices {
        pairing,
        inclusion_in,
        inclusion_out,
        pi_action,
        basis_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};

    fn f7() -> Ring {
        Ring::prime_field(7).unwrap()
    }

    fn sym_ring() -> (Ring, RingElem) {
        let q = Ring::rationals();
        let p = Ring::poly(&q, &["pi0"]).unwrap();
        let r = Ring::quotient_pi(&p, p.var("pi0").unwrap()).unwrap();
        let pi0 = r.pi0().unwrap();
        (r, pi0)
    }

    #[test]
    fn constant_matrices_match_definitions() {
        let r = f7();
        assert_eq!(h_mat(&r, 2), Mat::from_i64(&r, &[&[0, 1], &[1, 0]]));
        assert_eq!(
            j_mat(&r, 1, 2),
            Mat::from_i64(&r, &[&[0, 0, 1], &[0, 1, 0], &[-1, 0, 0]])
        );
        assert_eq!(d_mat(&r, 3), h_mat(&r, 3));
        assert_eq!(d_mat(&r, 4), j2_mat(&r, 4));
        assert_eq!(
            k_mat(&r, 3),
            Mat::from_i64(&r, &[&[0, 0, 0], &[0, 0, 0], &[0, 0, 1]])
        );
        let jp = jprime_mat(&r, 2);
        assert_eq!(
            jp,
            Mat::from_i64(&r, &[&[0, 1, 0], &[-1, 0, 0], &[0, 0, 0]])
        );
    }

    #[test]
    fn j_squares_to_minus_identity() {
        let r = f7();
        for m in 1..5 {
            let j = j2_mat(&r, 2 * m);
            assert_eq!(&j * &j, (&Mat::identity(&r, 2 * m)).neg());
        }
        // det J_2 = 1
        assert!(j2_mat(&r, 2).det().unwrap().is_one());
    }

    #[test]
    fn iota_examples_and_involution() {
        let r = f7();
        assert_eq!(iota(&Mat::identity(&r, 4)), Mat::identity(&r, 4));
        let b = Mat::from_i64(&r, &[&[1, 2], &[3, 4]]);
        assert_eq!(iota(&b), Mat::from_i64(&r, &[&[4, 2], &[3, 1]]));
        // Row vector: reversed and transposed.
        let row = Mat::from_i64(&r, &[&[1, 2, 3]]);
        let hl = h_mat(&r, 3);
        let hk = h_mat(&r, 1);
        assert_eq!(iota(&row), &(&hl * &row.transpose()) * &hk);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let k = 1 + (rng.next_u32() % 4) as usize;
            let l = 1 + (rng.next_u32() % 4) as usize;
            let b = Mat::from_fn(&r, k, l, |_, _| r.random(&mut rng));
            assert_eq!(iota(&iota(&b)), b);
            // iota against its defining formula
            assert_eq!(iota(&b), &(&h_mat(&r, l) * &b.transpose()) * &h_mat(&r, k));
            let c = Mat::from_fn(&r, l, 2, |_, _| r.random(&mut rng));
            assert_eq!(iota(&(&b * &c)), &iota(&c) * &iota(&b));
        }
    }

    #[test]
    fn sigma_involution_and_block_formula() {
        let r = f7();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        assert!(sigma(&Mat::zeros(&r, 3, 5)).is_zero());
        for _ in 0..20 {
            let k = 1 + (rng.next_u32() % 5) as usize;
            let l = 1 + (rng.next_u32() % 5) as usize;
            let b = Mat::from_fn(&r, k, l, |_, _| r.random(&mut rng));
            assert_eq!(sigma(&sigma(&b)), b);
        }
        // Square even size: the displayed 2x2-block form of sigma(X).
        for m in 1..4usize {
            let x = Mat::from_fn(&r, 2 * m, 2 * m, |_, _| r.random(&mut rng));
            let tl = x.block(0, 0, m, m);
            let tr = x.block(0, m, m, m);
            let bl = x.block(m, 0, m, m);
            let br = x.block(m, m, m, m);
            let expect = Mat::from_blocks(
                &r,
                &[
                    vec![(&iota(&br)).neg(), iota(&tr)],
                    vec![iota(&bl), (&iota(&tl)).neg()],
                ],
            );
            assert_eq!(sigma(&x), expect);
        }
    }

    #[test]
    fn standard_lattices_and_duals() {
        // Lambda_i exponents.
        let l2 = LatticeSpec::standard(2, 5);
        assert_eq!(l2.exponents, vec![-1, -1, 0, 0, 0]);
        // dual(Lambda_0, alternating) = Lambda_0
        let l0 = LatticeSpec::standard(0, 5);
        assert_eq!(l0.dual(DualForm::Alternating), l0);
        // dual(L, symmetric) = pi^-1 dual(L, alternating)
        for i in 0..5 {
            let l = LatticeSpec::standard(i, 5);
            assert_eq!(l.dual(DualForm::Symmetric), l.dual(DualForm::Alternating).shift(-1));
        }
        // dual(Lambda_m, symmetric) = Lambda_{m+1} for n = 2m+1
        for m in 1..4 {
            let n = 2 * m + 1;
            let lm = LatticeSpec::standard(m, n);
            assert_eq!(lm.dual(DualForm::Symmetric), LatticeSpec::standard(m + 1, n));
        }
        // hat(Lambda_j) = Lambda_{-j} under the periodic identification
        for n in [4usize, 5, 7] {
            for j in -9i64..9 {
                let lj = LatticeSpec::periodic(j, n);
                assert_eq!(lj.dual(DualForm::Alternating), LatticeSpec::periodic(-j, n));
            }
        }
        // and the alternating dual is an involution
        for i in 0..5 {
            let l = LatticeSpec::standard(i, 5);
            assert_eq!(l.dual(DualForm::Alternating).dual(DualForm::Alternating), l);
        }
    }

    #[test]
    fn odd_middle_pairing_matches_display() {
        // M = [[0, -J_{m,m+1}], [J_{m,m+1}, 0]]
        let (ring, pi0) = sym_ring();
        for n in [3usize, 5, 7] {
            let m = (n - 1) / 2;
            let case = CaseId::odd_middle(n, 1).unwrap();
            let cm = case_matrices(&case, &ring, &pi0, BasisConvention::Standard).unwrap();
            let j = j_mat(&ring, m, m + 1);
            let display = Mat::from_blocks(
                &ring,
                &[
                    vec![Mat::zeros(&ring, n, n), (&j).neg()],
                    vec![j.clone(), Mat::zeros(&ring, n, n)],
                ],
            );
            assert_eq!(cm.pairing, display, "pairing display mismatch at n = {n}");
        }
    }

    #[test]
    fn odd_middle_inclusions_match_displays() {
        let (ring, pi0) = sym_ring();
        for n in [3usize, 5, 7, 9] {
            let m = (n - 1) / 2;
            let case = CaseId::odd_middle(n, 1).unwrap();
            let cm = case_matrices(&case, &ring, &pi0, BasisConvention::Standard).unwrap();
            // A: block rows/cols (m, 1, m | m, 1, m)
            let sizes = [m, 1, m, m, 1, m];
            let mut a = Mat::zeros(&ring, 2 * n, 2 * n);
            let offset = |g: usize| -> usize { sizes[..g].iter().sum() };
            for (bi, bj, val) in [
                (0usize, 0usize, 1i64),
                (2, 2, 1),
                (3, 3, 1),
                (5, 5, 1),
            ] {
                for t in 0..sizes[bi] {
                    a.set(offset(bi) + t, offset(bj) + t, ring.from_i64(val));
                }
            }
            // row 2 (the single f_{m+1} slot): pi0 at column group 5
            a.set(offset(1), offset(4), pi0.clone());
            // row 5: 1 at column group 2
            a.set(offset(4), offset(1), ring.one());
            assert_eq!(cm.inclusion_in.as_ref().unwrap(), &a, "A display mismatch at n = {n}");

            // A': maps g-basis into the pi^-1 f-basis
            let mut ap = Mat::zeros(&ring, 2 * n, 2 * n);
            for (bi, bj, pi0_entry) in [
                (0usize, 3usize, true),
                (2, 5, true),
                (3, 0, false),
                (5, 2, false),
            ] {
                for t in 0..sizes[bi] {
                    let v = if pi0_entry { pi0.clone() } else { ring.one() };
                    ap.set(offset(bi) + t, offset(bj) + t, v);
                }
            }
            ap.set(offset(1), offset(1), ring.one());
            ap.set(offset(4), offset(4), ring.one());
            assert_eq!(cm.inclusion_out.as_ref().unwrap(), &ap, "A' display mismatch at n = {n}");
        }
    }

    #[test]
    fn rearranged_basis_matrices_match_displays() {
        // On the special fiber (pi0 = 0): Abar = [[I-K, 0], [K, I-K]] and
        // M' = [[0, J' - K], [-J' + K, 0]], with Abar^t M' = [[K, J'], [-J', 0]].
        let f7 = f7();
        let zero = f7.zero();
        for n in [3usize, 5, 7] {
            let m = (n - 1) / 2;
            let case = CaseId::odd_middle(n, 1).unwrap();
            let cm = case_matrices(&case, &f7, &zero, BasisConvention::Rearranged).unwrap();
            let k = k_mat(&f7, n);
            let i_n = Mat::identity(&f7, n);
            let imk = &i_n - &k;
            let abar = Mat::from_blocks(
                &f7,
                &[
                    vec![imk.clone(), Mat::zeros(&f7, n, n)],
                    vec![k.clone(), imk.clone()],
                ],
            );
            assert_eq!(cm.inclusion_in.as_ref().unwrap(), &abar, "Abar mismatch at n = {n}");

            let jp = jprime_mat(&f7, 2 * m);
            let jpk = &jp - &k;
            let mprime = Mat::from_blocks(
                &f7,
                &[
                    vec![Mat::zeros(&f7, n, n), jpk.clone()],
                    vec![(&jpk).neg(), Mat::zeros(&f7, n, n)],
                ],
            );
            assert_eq!(cm.pairing, mprime, "M' mismatch at n = {n}");

            let lhs = &cm.inclusion_in.as_ref().unwrap().transpose() * &cm.pairing;
            let expect = Mat::from_blocks(
                &f7,
                &[
                    vec![k.clone(), jp.clone()],
                    vec![(&jp).neg(), Mat::zeros(&f7, n, n)],
                ],
            );
            assert_eq!(lhs, expect, "Abar^t M' mismatch at n = {n}");

            // Pi on the special fiber: [[0, 0], [I, 0]]
            let pibar = Mat::from_blocks(
                &f7,
                &[
                    vec![Mat::zeros(&f7, n, n), Mat::zeros(&f7, n, n)],
                    vec![i_n.clone(), Mat::zeros(&f7, n, n)],
                ],
            );
            assert_eq!(cm.pi_action, pibar);
        }
    }

    #[test]
    fn other_case_pairings_match_displays() {
        let (ring, pi0) = sym_ring();
        // odd, I = {0}: the alternating form is -J_{2n}
        for n in [3usize, 5] {
            let case = CaseId::odd_zero(n, 1).unwrap();
            let cm = case_matrices(&case, &ring, &pi0, BasisConvention::Standard).unwrap();
            assert_eq!(cm.pairing, (&j2_mat(&ring, 2 * n)).neg());
        }
        // even, I = {m}: M'' = [[0, -J_{2m}], [J_{2m}, 0]], symmetric
        for n in [4usize, 6] {
            let case = CaseId::even_middle(n, 1).unwrap();
            let cm = case_matrices(&case, &ring, &pi0, BasisConvention::Standard).unwrap();
            let j = j2_mat(&ring, n);
            let display = Mat::from_blocks(
                &ring,
                &[
                    vec![Mat::zeros(&ring, n, n), (&j).neg()],
                    vec![j.clone(), Mat::zeros(&ring, n, n)],
                ],
            );
            assert_eq!(cm.pairing, display);
            assert_eq!(cm.pairing.transpose(), cm.pairing);
        }
    }

    #[test]
    fn case_id_validation() {
        assert!(CaseId::odd_middle(4, 1).is_err());
        assert!(CaseId::even_middle(5, 1).is_err());
        assert!(CaseId::odd_middle(5, 0).is_err());
        assert!(CaseId::odd_middle(5, 3).is_err()); // s > r
        assert!(CaseId::even_middle(4, 2).is_ok()); // r = s allowed in the even case
        let c = CaseId::odd_middle(7, 2).unwrap();
        assert_eq!((c.m, c.r, c.s), (3, 5, 2));
    }

    #[test]
    fn adjointness_for_every_case() {
        let (ring, pi0) = sym_ring();
        let cases = [
            CaseId::odd_middle(5, 2).unwrap(),
            CaseId::odd_zero(5, 2).unwrap(),
            CaseId::even_middle(6, 2).unwrap(),
        ];
        for case in cases {
            for conv in [BasisConvention::Standard, BasisConvention::Rearranged] {
                if conv == BasisConvention::Rearranged && case.label() != "odd-m" {
                    continue;
                }
                let cm = case_matrices(&case, &ring, &pi0, conv).unwrap();
                let lhs = &cm.pi_action.transpose() * &cm.pairing;
                let rhs = (&(&cm.pairing * &cm.pi_action)).neg();
                assert_eq!(lhs, rhs, "adjointness fails for {}", case.label());
                // pairing invertible over the generic base
                assert!(!cm.pairing.det().unwrap().is_zero());
            }
        }
    }
}
