//! Finite-dimensional C*-algebras `M_{n_1} ⊕ … ⊕ M_{n_k}` and their elements.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, C64, ONE, ZERO};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Shape of a direct sum of full matrix blocks.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Algebra {
    blocks: Vec<usize>,
}

pub fn make_algebra(block_dims: &[usize]) -> Result<Algebra> {
    Algebra::new(block_dims.to_vec())
}

impl Algebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("algebra needs at least one block".into()));
        }
        if blocks.contains(&0) {
            return Err(Error::InvalidArgument("block dimensions must be positive".into()));
        }
        Ok(Self { blocks })
    }

    /// The commutative algebra of functions on `n` points.
    pub fn diagonal(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dim(&self, j: usize) -> usize {
        self.blocks[j]
    }

    /// Linear dimension `Σ n_i²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    pub fn zero(&self) -> AlgElem {
        AlgElem {
            alg: self.clone(),
            blocks: self.blocks.iter().map(|&n| CMat::zeros(n, n)).collect(),
        }
    }

    pub fn one(&self) -> AlgElem {
        AlgElem {
            alg: self.clone(),
            blocks: self.blocks.iter().map(|&n| CMat::identity(n, n)).collect(),
        }
    }

    /// Matrix unit `E^j_{kl}`.
    pub fn unit(&self, j: usize, k: usize, l: usize) -> AlgElem {
        let mut e = self.zero();
        e.blocks[j][(k, l)] = ONE;
        e
    }

    /// Central projection onto block `j`.
    pub fn block_projection(&self, j: usize) -> AlgElem {
        let mut e = self.zero();
        e.blocks[j] = CMat::identity(self.blocks[j], self.blocks[j]);
        e
    }

    /// Flat index of the matrix unit `E^j_{kl}` in the standard basis.
    pub fn basis_index(&self, j: usize, k: usize, l: usize) -> usize {
        let off: usize = self.blocks[..j].iter().map(|n| n * n).sum();
        off + k * self.blocks[j] + l
    }

    pub fn basis_triple(&self, mut idx: usize) -> (usize, usize, usize) {
        for (j, &n) in self.blocks.iter().enumerate() {
            if idx < n * n {
                return (j, idx / n, idx % n);
            }
            idx -= n * n;
        }
        panic!("basis index out of range");
    }

    pub fn basis(&self) -> Vec<AlgElem> {
        (0..self.dim())
            .map(|i| {
                let (j, k, l) = self.basis_triple(i);
                self.unit(j, k, l)
            })
            .collect()
    }

    pub fn from_coords(&self, coords: &[C64]) -> AlgElem {
        let mut e = self.zero();
        for (i, &c) in coords.iter().enumerate() {
            let (j, k, l) = self.basis_triple(i);
            e.blocks[j][(k, l)] = c;
        }
        e
    }

    pub fn random<R: Rng>(&self, rng: &mut R) -> AlgElem {
        AlgElem {
            alg: self.clone(),
            blocks: self.blocks.iter().map(|&n| linalg::random_cmat(rng, n, n)).collect(),
        }
    }

    pub fn random_hermitian<R: Rng>(&self, rng: &mut R) -> AlgElem {
        let a = self.random(rng);
        (&a + &a.adjoint()).scale(cr(0.5))
    }

    pub fn random_positive<R: Rng>(&self, rng: &mut R) -> AlgElem {
        let a = self.random(rng);
        &a.adjoint() * &a
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("algebra serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Algebra = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("algebra json: {e}")))?;
        Self::new(raw.blocks)
    }
}

/// An element of a finite-dimensional C*-algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgElem {
    alg: Algebra,
    blocks: Vec<CMat>,
}

pub fn elem_product(a: &AlgElem, b: &AlgElem) -> Result<AlgElem> {
    a.product(b)
}

pub fn is_positive(a: &AlgElem, tol: f64) -> bool {
    a.is_positive(tol)
}

impl AlgElem {
    pub fn new(alg: &Algebra, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != alg.num_blocks() {
            return Err(Error::IncompatibleOperands("block count mismatch".into()));
        }
        for (m, &n) in blocks.iter().zip(alg.block_dims()) {
            if m.shape() != (n, n) {
                return Err(Error::IncompatibleOperands(format!(
                    "block of shape {:?} in a block of size {n}",
                    m.shape()
                )));
            }
        }
        Ok(Self { alg: alg.clone(), blocks })
    }

    pub fn algebra(&self) -> &Algebra {
        &self.alg
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> &CMat {
        &self.blocks[j]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut CMat {
        &mut self.blocks[j]
    }

    pub fn coords(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|m| m.transpose().iter().copied().collect::<Vec<_>>()).collect()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.alg != other.alg {
            return Err(Error::IncompatibleOperands(format!(
                "elements of {:?} and {:?}",
                self.alg.block_dims(),
                other.alg.block_dims()
            )));
        }
        Ok(())
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a * b))
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    fn zip(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        Self {
            alg: self.alg.clone(),
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn map_blocks(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self { alg: self.alg.clone(), blocks: self.blocks.iter().map(f).collect() }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map_blocks(|m| m * c)
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(|m| m.adjoint())
    }

    /// Operator norm: the maximum blockwise operator norm.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    pub fn hermitian_residual(&self) -> f64 {
        (self - &self.adjoint()).norm()
    }

    /// Smallest eigenvalue over all blocks of the Hermitian part, with its block.
    pub fn min_eigenvalue(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (j, m) in self.blocks.iter().enumerate() {
            let v = linalg::min_eigenvalue(m);
            if v < best.0 {
                best = (v, j);
            }
        }
        best
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        let scale = self.norm().max(1.0);
        self.hermitian_residual() <= tol * scale && self.min_eigenvalue().0 >= -tol * scale
    }

    /// Continuous functional calculus on the Hermitian part.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        self.map_blocks(|m| linalg::herm_fn(m, f))
    }

    pub fn is_invertible(&self, tol: f64) -> bool {
        self.blocks.iter().all(|m| {
            let sv = m.clone().svd(false, false).singular_values;
            sv.min() > tol
        })
    }

    pub fn inverse(&self) -> Option<Self> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for m in &self.blocks {
            blocks.push(m.clone().try_inverse()?);
        }
        Some(Self { alg: self.alg.clone(), blocks })
    }

    /// Largest commutator norm against the matrix units.
    pub fn centrality_residual(&self) -> f64 {
        self.alg
            .basis()
            .iter()
            .map(|u| (&(self * u) - &(u * self)).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let data: Vec<Vec<Vec<[f64; 2]>>> = self
            .blocks
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                    .collect()
            })
            .collect();
        serde_json::json!({ "blocks": self.alg.block_dims(), "data": data })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            blocks: Vec<usize>,
            data: Vec<Vec<Vec<[f64; 2]>>>,
        }
        let raw: Raw = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidArgument(format!("element json: {e}")))?;
        let alg = Algebra::new(raw.blocks)?;
        let mut blocks = Vec::new();
        for (rows, &n) in raw.data.iter().zip(alg.block_dims()) {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidArgument("element block has the wrong shape".into()));
            }
            blocks.push(CMat::from_fn(n, n, |r, c| C64::new(rows[r][c][0], rows[r][c][1])));
        }
        Self::new(&alg, blocks)
    }
}

impl<'a> Add<&'a AlgElem> for &'a AlgElem {
    type Output = AlgElem;
    fn add(self, rhs: &AlgElem) -> AlgElem {
        self.sum(rhs).expect("adding elements of different algebras")
    }
}

impl<'a> Sub<&'a AlgElem> for &'a AlgElem {
    type Output = AlgElem;
    fn sub(self, rhs: &AlgElem) -> AlgElem {
        assert_eq!(self.alg, rhs.alg, "subtracting elements of different algebras");
        self.zip(rhs, |a, b| a - b)
    }
}

impl<'a> Mul<&'a AlgElem> for &'a AlgElem {
    type Output = AlgElem;
    fn mul(self, rhs: &AlgElem) -> AlgElem {
        self.product(rhs).expect("multiplying elements of different algebras")
    }
}

impl Neg for &AlgElem {
    type Output = AlgElem;
    fn neg(self) -> AlgElem {
        self.scale(cr(-1.0))
    }
}

/// A two-sided ideal, determined by the blocks it contains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ideal {
    alg: Algebra,
    mask: Vec<bool>,
}

impl Ideal {
    pub fn new(alg: &Algebra, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != alg.num_blocks() {
            return Err(Error::InvalidArgument("mask length differs from block count".into()));
        }
        Ok(Self { alg: alg.clone(), mask })
    }

    pub fn zero(alg: &Algebra) -> Self {
        Self { alg: alg.clone(), mask: vec![false; alg.num_blocks()] }
    }

    pub fn full(alg: &Algebra) -> Self {
        Self { alg: alg.clone(), mask: vec![true; alg.num_blocks()] }
    }

    pub fn algebra(&self) -> &Algebra {
        &self.alg
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains_block(&self, j: usize) -> bool {
        self.mask[j]
    }

    pub fn complement(&self) -> Self {
        Self { alg: self.alg.clone(), mask: self.mask.iter().map(|b| !b).collect() }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            alg: self.alg.clone(),
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mask.iter().all(|b| !b)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|b| *b)
    }

    /// Component of `a` lying in the ideal.
    pub fn project(&self, a: &AlgElem) -> AlgElem {
        let mut out = a.clone();
        for (j, keep) in self.mask.iter().enumerate() {
            if !keep {
                out.blocks[j].fill(ZERO);
            }
        }
        out
    }

    /// Norm of the component of `a` outside the ideal.
    pub fn distance(&self, a: &AlgElem) -> f64 {
        (a - &self.project(a)).norm()
    }

    /// The quotient algebra, i.e. the blocks not in the ideal.
    pub fn quotient_algebra(&self) -> Option<Algebra> {
        let dims: Vec<usize> = self
            .alg
            .block_dims()
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| !**m)
            .map(|(n, _)| *n)
            .collect();
        Algebra::new(dims).ok()
    }

    pub fn surviving_blocks(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&j| !self.mask[j]).collect()
    }
}

/// Minimal *-algebra interface used for homomorphism checks on arbitrary targets.
pub trait StarOps: Sized {
    fn compose(&self, other: &Self) -> Self;
    fn star(&self) -> Self;
    fn distance_to(&self, other: &Self) -> f64;
    fn magnitude(&self) -> f64;
}

impl StarOps for AlgElem {
    fn compose(&self, other: &Self) -> Self {
        self * other
    }
    fn star(&self) -> Self {
        self.adjoint()
    }
    fn distance_to(&self, other: &Self) -> f64 {
        self.dist(other)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Largest violation of multiplicativity or *-preservation over matrix units.
pub fn homomorphism_residual<T: StarOps>(alg: &Algebra, phi: &impl Fn(&AlgElem) -> T) -> f64 {
    let basis = alg.basis();
    let images: Vec<T> = basis.iter().map(phi).collect();
    let mut res: f64 = 0.0;
    for (i, u) in basis.iter().enumerate() {
        res = res.max(phi(&u.adjoint()).distance_to(&images[i].star()));
        let (ju, ku, lu) = alg.basis_triple(i);
        for k in 0..basis.len() {
            let (jv, kv, lv) = alg.basis_triple(k);
            let prod = images[i].compose(&images[k]);
            let err = if ju == jv && lu == kv {
                prod.distance_to(&images[alg.basis_index(ju, ku, lv)])
            } else {
                prod.magnitude()
            };
            res = res.max(err);
        }
    }
    res
}

/// Kernel of a *-homomorphism and its annihilator, as complementary block masks.
pub fn ideal_from_kernel<T: StarOps>(
    alg: &Algebra,
    phi: impl Fn(&AlgElem) -> T,
    tol: f64,
) -> Result<(Ideal, Ideal)> {
    let residual = homomorphism_residual(alg, &phi);
    if residual > tol {
        return Err(Error::NotAHomomorphism { residual });
    }
    let mask: Vec<bool> = (0..alg.num_blocks())
        .map(|j| phi(&alg.unit(j, 0, 0)).magnitude() <= tol)
        .collect();
    let ker = Ideal::new(alg, mask)?;
    let perp = ker.complement();
    Ok((ker, perp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn make_algebra_shapes() {
        assert_eq!(make_algebra(&[2]).unwrap().dim(), 4);
        assert_eq!(make_algebra(&[1, 1, 1]).unwrap().dim(), 3);
        let a = make_algebra(&[2, 3]).unwrap();
        assert!((a.one().norm() - 1.0).abs() < 1e-14);
        assert!(make_algebra(&[]).is_err());
        assert!(make_algebra(&[2, 0]).is_err());
    }

    #[test]
    fn matrix_unit_product() {
        let a = make_algebra(&[2]).unwrap();
        let p = elem_product(&a.unit(0, 0, 1), &a.unit(0, 1, 0)).unwrap();
        assert_eq!(p, a.unit(0, 0, 0));
        let b = make_algebra(&[3]).unwrap();
        assert!(elem_product(&a.one(), &b.one()).is_err());
    }

    #[test]
    fn identity_and_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alg = make_algebra(&[2, 1, 3]).unwrap();
        let a = alg.random(&mut rng);
        let b = alg.random(&mut rng);
        assert!(alg.one().product(&a).unwrap().dist(&a) < 1e-15);
        let lhs = (&a * &b).adjoint();
        let rhs = &b.adjoint() * &a.adjoint();
        assert!(lhs.dist(&rhs) < 1e-12);
    }

    #[test]
    fn positivity_examples() {
        let alg = make_algebra(&[2]).unwrap();
        assert!(is_positive(&alg.one(), DEFAULT_TOL));
        let d = AlgElem::new(&alg, vec![CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(1.0), cr(-1.0)]))])
            .unwrap();
        assert!(!is_positive(&d, DEFAULT_TOL));
        assert!((d.min_eigenvalue().0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn squares_positive_and_c_star_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dims in [vec![1], vec![2, 3], vec![1, 1, 2], vec![3]] {
            let alg = Algebra::new(dims).unwrap();
            for _ in 0..1000 {
                let a = alg.random(&mut rng);
                let sq = &a.adjoint() * &a;
                assert!(sq.is_positive(DEFAULT_TOL));
                assert!((sq.norm() - a.norm().powi(2)).abs() < 1e-12 * sq.norm().max(1.0));
            }
        }
    }

    #[test]
    fn kernel_of_injective_and_projection() {
        let alg = Algebra::diagonal(2).unwrap();
        let (ker, perp) = ideal_from_kernel(&alg, |a: &AlgElem| a.clone(), DEFAULT_TOL).unwrap();
        assert!(ker.is_zero() && perp.is_full());

        let proj = |a: &AlgElem| {
            let mut b = a.clone();
            b.block_mut(1).fill(ZERO);
            b
        };
        let (ker, perp) = ideal_from_kernel(&alg, proj, DEFAULT_TOL).unwrap();
        assert_eq!(ker.mask(), &[false, true]);
        assert_eq!(perp.mask(), &[true, false]);
        assert!(ker.intersect(&perp).is_zero());
    }

    #[test]
    fn transpose_is_not_a_homomorphism() {
        let alg = make_algebra(&[2]).unwrap();
        let t = |a: &AlgElem| a.map_blocks(|m| m.transpose());
        assert!(matches!(
            ideal_from_kernel(&alg, t, DEFAULT_TOL),
            Err(Error::NotAHomomorphism { .. })
        ));
    }

    #[test]
    fn json_roundtrip() {
        let alg = make_algebra(&[2, 1]).unwrap();
        let back = Algebra::from_json(&alg.to_json()).unwrap();
        assert_eq!(alg, back);
        assert_eq!(alg.to_json(), r#"{"blocks":[2,1]}"#);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = alg.random(&mut rng);
        let b = AlgElem::from_json(&a.to_json()).unwrap();
        assert!(a.dist(&b) == 0.0);
    }

    #[test]
    fn functional_calculus_sqrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alg = make_algebra(&[3, 2]).unwrap();
        let p = alg.random_positive(&mut rng);
        let r = p.apply_fn(|x| x.max(0.0).sqrt());
        assert!((&r * &r).dist(&p) < 1e-10);
    }
}
