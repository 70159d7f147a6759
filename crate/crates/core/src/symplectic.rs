//! Symplectic linear algebra over finite fields: basis completion with a
//! prescribed first row, stabilizer decompositions of the marked vector, and
//! the induced action on pairs of fiber coordinates.
//!
//! The symplectic group here is always taken with respect to the antidiagonal
//! form J_{2m} = [[0, H_m], [-H_m, 0]].

use thiserror::Error;

use crate::lattice::{j2_mat, sigma};
use crate::mat::{Mat, MatError};
use crate::ring::{Ring, RingElem, RingError};

#[derive(Debug, Clone, Error)]
pub enum SymplecticError {
    #[error("the zero vector cannot be completed to a symplectic basis")]
    ZeroVector,
    #[error("vector completion requires a field of odd characteristic")]
    UnsupportedField,
    #[error("matrix is not in the stabilizer of the marked vector")]
    NotInStabilizer,
    #[error("matrix is not symplectic")]
    NotSymplectic,
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// The row vector (1, 0, ..., 0).
pub fn marked_vector(ring: &Ring, two_m: usize) -> Mat {
    let mut c = Mat::zeros(ring, 1, two_m);
    c.set(0, 0, ring.one());
    c
}

/// Symplectic pairing of two row vectors: u J v^t.
pub fn pair(u: &Mat, v: &Mat, j: &Mat) -> RingElem {
    let p = &(u * j) * &v.transpose();
    p.at(0, 0).clone()
}

pub fn is_symplectic(g: &Mat) -> bool {
    let j = j2_mat(g.ring(), g.rows());
    (&(&g.transpose() * &j) * g) == j
}

/// Complete a nonzero row vector to a symplectic matrix having it as first
/// row: pick a partner with unit pairing, split off the hyperbolic plane,
/// recurse on the orthogonal complement, and assemble the pairs as columns
/// (c_1^t ... c_m^t d_m^t ... d_1^t). The returned matrix is the transpose of
/// that column assembly, hence symplectic with first row `c`.
pub fn symplectic_complete(c: &Mat) -> Result<Mat, SymplecticError> {
    let ring = c.ring().clone();
    let two_m = c.cols();
    assert_eq!(c.rows(), 1, "expected a row vector");
    assert!(two_m % 2 == 0 && two_m > 0, "expected even positive size");
    if !ring.is_field() || ring.characteristic_is_two() {
        return Err(SymplecticError::UnsupportedField);
    }
    if c.is_zero() {
        return Err(SymplecticError::ZeroVector);
    }
    let m = two_m / 2;
    let j = j2_mat(&ring, two_m);

    let mut cs: Vec<Mat> = Vec::with_capacity(m);
    let mut ds: Vec<Mat> = Vec::with_capacity(m);
    // Basis of the current orthogonal complement.
    let mut basis: Vec<Mat> = (0..two_m)
        .map(|i| {
            let mut e = Mat::zeros(&ring, 1, two_m);
            e.set(0, i, ring.one());
            e
        })
        .collect();
    let mut current = c.clone();
    loop {
        // First basis vector pairing nontrivially with `current`; the form
        // stays nondegenerate on the complement, so one exists.
        let pos = basis
            .iter()
            .position(|b| !pair(&current, b, &j).is_zero())
            .expect("nondegenerate restriction");
        let lambda = pair(&current, &basis[pos], &j);
        let partner = basis[pos].scale(&lambda.inv()?);
        cs.push(current.clone());
        ds.push(partner.clone());
        if cs.len() == m {
            break;
        }
        // Project the basis into the complement of the new hyperbolic plane:
        // v' = v + <d, v> c - <c, v> d.
        let stacked = basis
            .iter()
            .map(|v| {
                let alpha = pair(&partner, v, &j);
                let beta = pair(&current, v, &j);
                v.add_checked(&current.scale(&alpha))
                    .unwrap()
                    .add_checked(&partner.scale(&beta.neg()))
                    .unwrap()
            })
            .reduce(|acc, row| acc.vstack(&row))
            .unwrap();
        basis = stacked.row_space_basis()?;
        debug_assert_eq!(basis.len(), two_m - 2 * cs.len());
        current = basis[0].clone();
    }

    let mut g = cs[0].transpose();
    for v in cs.iter().skip(1) {
        g = g.hstack(&v.transpose());
    }
    for v in ds.iter().rev() {
        g = g.hstack(&v.transpose());
    }
    debug_assert!(is_symplectic(&g), "completion must be symplectic");
    let gt = g.transpose();
    debug_assert_eq!(gt.row_mat(0), *c);
    Ok(gt)
}

/// A random symplectic matrix as a product of symplectic transvections
/// x -> x + lambda <x, v> v.
pub fn random_symplectic(ring: &Ring, two_m: usize, rng: &mut dyn rand::RngCore) -> Mat {
    let j = j2_mat(ring, two_m);
    let mut g = Mat::identity(ring, two_m);
    let steps = 4 * two_m;
    for _ in 0..steps {
        let v = Mat::from_fn(ring, 1, two_m, |_, _| ring.random(rng));
        if v.is_zero() {
            continue;
        }
        let lambda = ring.random(rng);
        // T = I + lambda (J v^t) v
        let t = Mat::identity(ring, two_m)
            .add_checked(&(&(&j * &v.transpose()).scale(&lambda) * &v))
            .unwrap();
        debug_assert!(is_symplectic(&t));
        g = &g * &t;
    }
    g
}

/// Stabilizer element of the marked vector, presented by its essential data:
/// a symplectic block of size 2m-2, a row vector, and a scalar.
#[derive(Debug, Clone)]
pub struct StabilizerTriple {
    pub g1: Mat,
    pub g2: Mat,
    pub g3: RingElem,
}

impl StabilizerTriple {
    /// The full (2m) x (2m) stabilizer matrix
    /// [[1, 0, 0], [-g1 sigma(g2), g1, 0], [g3, g2, 1]].
    pub fn assemble(&self) -> Mat {
        let ring = self.g1.ring();
        let k = self.g1.rows();
        let corner = (&self.g1 * &sigma(&self.g2)).neg();
        let mut g3m = Mat::zeros(ring, 1, 1);
        g3m.set(0, 0, self.g3.clone());
        Mat::from_blocks(
            ring,
            &[
                vec![Mat::identity(ring, 1), Mat::zeros(ring, 1, k), Mat::zeros(ring, 1, 1)],
                vec![corner, self.g1.clone(), Mat::zeros(ring, k, 1)],
                vec![g3m, self.g2.clone(), Mat::identity(ring, 1)],
            ],
        )
    }

    /// Inverse triple: (g1^-1, -g2 g1^-1, -g3).
    pub fn inverse(&self) -> Result<StabilizerTriple, SymplecticError> {
        let g1_inv = self.g1.inverse()?;
        Ok(StabilizerTriple {
            g2: (&self.g2 * &g1_inv).neg(),
            g1: g1_inv,
            g3: self.g3.neg(),
        })
    }
}

/// Extract the essential data of a stabilizer element. Fails with
/// `NotInStabilizer` when the first row is not the marked vector, and with
/// `NotSymplectic` when the block constraints of a symplectic stabilizer
/// element are violated.
pub fn stabilizer_decompose(g: &Mat) -> Result<StabilizerTriple, SymplecticError> {
    let ring = g.ring();
    let two_m = g.rows();
    assert!(two_m >= 2 && two_m % 2 == 0);
    let k = two_m - 2;
    if !is_symplectic(g) {
        return Err(SymplecticError::NotSymplectic);
    }
    if g.row_mat(0) != marked_vector(ring, two_m) {
        return Err(SymplecticError::NotInStabilizer);
    }
    let g1 = g.block(1, 1, k, k);
    let g2 = g.block(two_m - 1, 1, 1, k);
    let g3 = g.at(two_m - 1, 0).clone();
    let g4 = g.block(1, 0, k, 1);
    let g5 = g.block(1, two_m - 1, k, 1);
    let g6 = g.at(two_m - 1, two_m - 1).clone();
    // Symplectic + first row fixed forces g5 = 0, g6 = 1, g4 = -g1 sigma(g2).
    if !g5.is_zero() || !g6.is_one() || g4 != (&g1 * &sigma(&g2)).neg() {
        return Err(SymplecticError::NotSymplectic);
    }
    Ok(StabilizerTriple { g1, g2, g3 })
}

/// Action of a stabilizer triple on a fiber pair:
/// (Y1, Y2) -> (g1^-1 Y1 g1, Y2 g1 - g2 g1^-1 Y1 g1).
pub fn fiber_pair_action(
    y1: &Mat,
    y2: &Mat,
    t: &StabilizerTriple,
) -> Result<(Mat, Mat), SymplecticError> {
    let g1_inv = t.g1.inverse()?;
    let conj = &(&g1_inv * y1) * &t.g1;
    let moved = &(y2 * &t.g1) - &(&t.g2 * &conj);
    Ok((conj, moved))
}
