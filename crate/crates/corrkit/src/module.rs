//! Right Hilbert modules over finite-dimensional C*-algebras in canonical form.
//!
//! A module over `⊕ M_{n_l}` with multiplicities `m_l` stores a vector as a tuple of
//! `m_l × n_l` matrices; `⟨x|y⟩_l = x_l^* y_l` and `b` acts by right multiplication.
//! Adjointable operators are tuples of `m'_l × m_l` matrices acting on the left.

use std::ops::{Add, Mul, Sub};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgElem, Algebra, StarOps};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ModuleShape", into = "ModuleShape")]
pub struct HilbertModule {
    coeff: Algebra,
    mults: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModuleShape {
    coeff: Vec<usize>,
    mults: Vec<usize>,
}

impl TryFrom<ModuleShape> for HilbertModule {
    type Error = Error;
    fn try_from(s: ModuleShape) -> Result<Self> {
        HilbertModule::new(&Algebra::new(s.coeff)?, s.mults)
    }
}

impl From<HilbertModule> for ModuleShape {
    fn from(m: HilbertModule) -> Self {
        ModuleShape { coeff: m.coeff.block_dims().to_vec(), mults: m.mults }
    }
}

impl HilbertModule {
    pub fn new(coeff: &Algebra, mults: Vec<usize>) -> Result<Self> {
        if mults.len() != coeff.num_blocks() {
            return Err(Error::InvalidArgument(format!(
                "{} multiplicities for {} blocks",
                mults.len(),
                coeff.num_blocks()
            )));
        }
        Ok(Self { coeff: coeff.clone(), mults })
    }

    /// The algebra as a module over itself.
    pub fn trivial(alg: &Algebra) -> Self {
        Self { coeff: alg.clone(), mults: alg.block_dims().to_vec() }
    }

    pub fn zero_module(alg: &Algebra) -> Self {
        Self { coeff: alg.clone(), mults: vec![0; alg.num_blocks()] }
    }

    pub fn coeff(&self) -> &Algebra {
        &self.coeff
    }

    pub fn mults(&self) -> &[usize] {
        &self.mults
    }

    pub fn mult(&self, l: usize) -> usize {
        self.mults[l]
    }

    pub fn block_shape(&self, l: usize) -> (usize, usize) {
        (self.mults[l], self.coeff.block_dim(l))
    }

    /// Complex linear dimension `Σ m_l n_l`.
    pub fn dim(&self) -> usize {
        self.mults.iter().zip(self.coeff.block_dims()).map(|(m, n)| m * n).sum()
    }

    /// Number of elements in the standard frame.
    pub fn frame_len(&self) -> usize {
        self.mults.iter().sum()
    }

    pub fn is_full(&self) -> bool {
        self.mults.iter().all(|&m| m > 0)
    }

    pub fn zero(&self) -> ModVec {
        ModVec {
            module: self.clone(),
            blocks: (0..self.mults.len())
                .map(|l| {
                    let (m, n) = self.block_shape(l);
                    CMat::zeros(m, n)
                })
                .collect(),
        }
    }

    /// Canonical generator `E^l_{t1}`: a single one in row `t`, column 0 of block `l`.
    pub fn canonical(&self, l: usize, t: usize) -> ModVec {
        let mut v = self.zero();
        v.blocks[l][(t, 0)] = ONE;
        v
    }

    /// Frame of canonical generators; `Σ u_j⟨u_j|x⟩ = x` for every `x`.
    pub fn standard_frame(&self) -> Vec<ModVec> {
        let mut out = Vec::with_capacity(self.frame_len());
        for l in 0..self.mults.len() {
            for t in 0..self.mults[l] {
                out.push(self.canonical(l, t));
            }
        }
        out
    }

    pub fn random<R: Rng>(&self, rng: &mut R) -> ModVec {
        ModVec {
            module: self.clone(),
            blocks: (0..self.mults.len())
                .map(|l| {
                    let (m, n) = self.block_shape(l);
                    linalg::random_cmat(rng, m, n)
                })
                .collect(),
        }
    }

    pub fn from_blocks(&self, blocks: Vec<CMat>) -> Result<ModVec> {
        if blocks.len() != self.mults.len() {
            return Err(Error::IncompatibleOperands("block count mismatch".into()));
        }
        for (l, b) in blocks.iter().enumerate() {
            if b.shape() != self.block_shape(l) {
                return Err(Error::IncompatibleOperands(format!(
                    "vector block {l} has shape {:?}, expected {:?}",
                    b.shape(),
                    self.block_shape(l)
                )));
            }
        }
        Ok(ModVec { module: self.clone(), blocks })
    }

    /// Complex coordinates, block by block, row-major.
    pub fn flatten(&self, x: &ModVec) -> DVector<C64> {
        DVector::from_iterator(
            self.dim(),
            x.blocks.iter().flat_map(|b| b.transpose().iter().copied().collect::<Vec<_>>()),
        )
    }

    pub fn unflatten(&self, v: &DVector<C64>) -> ModVec {
        let mut x = self.zero();
        let mut i = 0;
        for l in 0..self.mults.len() {
            let (m, n) = self.block_shape(l);
            for r in 0..m {
                for c in 0..n {
                    x.blocks[l][(r, c)] = v[i];
                    i += 1;
                }
            }
        }
        x
    }

    /// `(l, row, col)` for a flat coordinate index.
    pub fn flat_position(&self, mut i: usize) -> (usize, usize, usize) {
        for l in 0..self.mults.len() {
            let (m, n) = self.block_shape(l);
            if i < m * n {
                return (l, i / n, i % n);
            }
            i -= m * n;
        }
        panic!("flat index out of range");
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.coeff != other.coeff {
            return Err(Error::IncompatibleOperands("direct sum over different algebras".into()));
        }
        Ok(Self {
            coeff: self.coeff.clone(),
            mults: self.mults.iter().zip(&other.mults).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("module serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("module json: {e}")))
    }
}

/// A vector of a [`HilbertModule`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModVec {
    module: HilbertModule,
    blocks: Vec<CMat>,
}

pub fn inner_product(x: &ModVec, y: &ModVec) -> Result<AlgElem> {
    x.inner(y)
}

pub fn standard_frame(x: &HilbertModule) -> Vec<ModVec> {
    x.standard_frame()
}

pub fn rank_one(x: &ModVec, y: &ModVec) -> Result<AdjOp> {
    AdjOp::rank_one(x, y)
}

impl ModVec {
    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> &CMat {
        &self.blocks[l]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut CMat {
        &mut self.blocks[l]
    }

    pub fn inner(&self, other: &Self) -> Result<AlgElem> {
        if self.module != other.module {
            return Err(Error::IncompatibleOperands("inner product across modules".into()));
        }
        AlgElem::new(
            self.module.coeff(),
            self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.adjoint() * b).collect(),
        )
    }

    /// `⟨x|y⟩`; panics on a module mismatch.
    pub fn ip(&self, other: &Self) -> AlgElem {
        self.inner(other).expect("inner product across modules")
    }

    pub fn right_mul(&self, b: &AlgElem) -> Self {
        assert_eq!(b.algebra(), self.module.coeff(), "right action by a foreign algebra");
        Self {
            module: self.module.clone(),
            blocks: self.blocks.iter().zip(b.blocks()).map(|(x, b)| x * b).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { module: self.module.clone(), blocks: self.blocks.iter().map(|b| b * c).collect() }
    }

    /// `‖⟨x|x⟩‖^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.ip(self).norm().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
}

impl<'a> Add<&'a ModVec> for &'a ModVec {
    type Output = ModVec;
    fn add(self, rhs: &ModVec) -> ModVec {
        assert_eq!(self.module, rhs.module, "adding vectors of different modules");
        ModVec {
            module: self.module.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a ModVec> for &'a ModVec {
    type Output = ModVec;
    fn sub(self, rhs: &ModVec) -> ModVec {
        assert_eq!(self.module, rhs.module, "subtracting vectors of different modules");
        ModVec {
            module: self.module.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect(),
        }
    }
}

/// An adjointable operator between modules over the same coefficient algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjOp {
    source: HilbertModule,
    target: HilbertModule,
    blocks: Vec<CMat>,
}

impl AdjOp {
    pub fn new(source: &HilbertModule, target: &HilbertModule, blocks: Vec<CMat>) -> Result<Self> {
        if source.coeff() != target.coeff() {
            return Err(Error::IncompatibleOperands("operator between different algebras".into()));
        }
        if blocks.len() != source.mults().len() {
            return Err(Error::IncompatibleOperands("operator block count".into()));
        }
        for (l, b) in blocks.iter().enumerate() {
            if b.shape() != (target.mult(l), source.mult(l)) {
                return Err(Error::IncompatibleOperands(format!(
                    "operator block {l} has shape {:?}, expected {:?}",
                    b.shape(),
                    (target.mult(l), source.mult(l))
                )));
            }
        }
        Ok(Self { source: source.clone(), target: target.clone(), blocks })
    }

    pub fn identity(x: &HilbertModule) -> Self {
        Self {
            source: x.clone(),
            target: x.clone(),
            blocks: x.mults().iter().map(|&m| CMat::identity(m, m)).collect(),
        }
    }

    pub fn zero(source: &HilbertModule, target: &HilbertModule) -> Self {
        Self {
            source: source.clone(),
            target: target.clone(),
            blocks: (0..source.mults().len())
                .map(|l| CMat::zeros(target.mult(l), source.mult(l)))
                .collect(),
        }
    }

    /// `Θ_{x,y}: z ↦ x⟨y|z⟩`.
    pub fn rank_one(x: &ModVec, y: &ModVec) -> Result<Self> {
        if x.module.coeff() != y.module.coeff() {
            return Err(Error::IncompatibleOperands("rank-one over different algebras".into()));
        }
        Ok(Self {
            source: y.module.clone(),
            target: x.module.clone(),
            blocks: x.blocks.iter().zip(&y.blocks).map(|(a, b)| a * b.adjoint()).collect(),
        })
    }

    /// The right-module map determined by its values on canonical generators.
    pub fn from_fn(
        source: &HilbertModule,
        target: &HilbertModule,
        f: impl Fn(&ModVec) -> ModVec,
    ) -> Self {
        let mut op = Self::zero(source, target);
        for l in 0..source.mults().len() {
            for t in 0..source.mult(l) {
                let img = f(&source.canonical(l, t));
                debug_assert_eq!(img.module(), target);
                op.blocks[l].set_column(t, &img.block(l).column(0));
            }
        }
        op
    }

    pub fn source(&self) -> &HilbertModule {
        &self.source
    }

    pub fn target(&self) -> &HilbertModule {
        &self.target
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> &CMat {
        &self.blocks[l]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut CMat {
        &mut self.blocks[l]
    }

    pub fn apply(&self, x: &ModVec) -> ModVec {
        assert_eq!(x.module(), &self.source, "operator applied to a foreign vector");
        ModVec {
            module: self.target.clone(),
            blocks: self.blocks.iter().zip(&x.blocks).map(|(t, v)| t * v).collect(),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if other.target != self.source {
            return Err(Error::IncompatibleOperands("composition of mismatched operators".into()));
        }
        Ok(Self {
            source: other.source.clone(),
            target: self.target.clone(),
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            source: self.source.clone(),
            target: self.target.clone(),
            blocks: self.blocks.iter().map(|b| b * c).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }

    /// `‖P² − P‖ + ‖P − P*‖`.
    pub fn projection_residual(&self) -> f64 {
        let sq = self * self;
        (&sq - self).norm() + (self - &self.adjoint()).norm()
    }

    /// Complex rank of the operator (sum of blockwise ranks weighted by block size).
    pub fn linear_rank(&self, tol: f64) -> usize {
        self.blocks
            .iter()
            .enumerate()
            .map(|(l, b)| linalg::rank(b, tol) * self.source.coeff().block_dim(l))
            .sum()
    }

    /// Rank as a module map, per block.
    pub fn block_ranks(&self, tol: f64) -> Vec<usize> {
        self.blocks.iter().map(|b| linalg::rank(b, tol)).collect()
    }

    /// The complex-linear matrix on flattened coordinates.
    pub fn to_linear_matrix(&self) -> CMat {
        let mut out = CMat::zeros(self.target.dim(), self.source.dim());
        for j in 0..self.source.dim() {
            let mut e = DVector::zeros(self.source.dim());
            e[j] = ONE;
            let img = self.target.flatten(&self.apply(&self.source.unflatten(&e)));
            out.set_column(j, &img);
        }
        out
    }

    /// Left multiplication by `a` on the module `A_A`.
    pub fn from_elem(a: &AlgElem) -> Self {
        let m = HilbertModule::trivial(a.algebra());
        Self { source: m.clone(), target: m, blocks: a.blocks().to_vec() }
    }

    /// The element of `A` whose left multiplication on `A_A` this is.
    pub fn to_elem(&self) -> AlgElem {
        let alg = self.source.coeff();
        assert!(
            self.source == HilbertModule::trivial(alg) && self.target == self.source,
            "operator does not act on the algebra as a module over itself"
        );
        AlgElem::new(alg, self.blocks.clone()).expect("square blocks of the algebra shape")
    }

    /// The operator mapping each `z_i` to `w_i`, by least squares over the column spaces.
    ///
    /// Returns the operator and the residual `max_i ‖T z_i − w_i‖`; the residual is
    /// nonzero when no right-linear map has the prescribed values.
    pub fn from_images(
        source: &HilbertModule,
        target: &HilbertModule,
        zs: &[ModVec],
        ws: &[ModVec],
    ) -> (Self, f64) {
        let blocks = (0..source.mults().len())
            .map(|l| {
                let n = source.coeff().block_dim(l);
                let mut z = CMat::zeros(source.mult(l), zs.len() * n);
                let mut w = CMat::zeros(target.mult(l), ws.len() * n);
                for (i, (zi, wi)) in zs.iter().zip(ws).enumerate() {
                    z.view_mut((0, i * n), (source.mult(l), n)).copy_from(zi.block(l));
                    w.view_mut((0, i * n), (target.mult(l), n)).copy_from(wi.block(l));
                }
                if z.ncols() == 0 || z.nrows() == 0 || w.nrows() == 0 {
                    return CMat::zeros(target.mult(l), source.mult(l));
                }
                let pinv = z.clone().pseudo_inverse(1e-10).expect("nonnegative epsilon");
                w * pinv
            })
            .collect();
        let op = Self { source: source.clone(), target: target.clone(), blocks };
        let residual = zs
            .iter()
            .zip(ws)
            .map(|(z, w)| (&op.apply(z) - w).max_abs())
            .fold(0.0, f64::max);
        (op, residual)
    }

    /// Block-diagonal operator `self ⊕ other` on the direct sums.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        let source = self.source.direct_sum(&other.source)?;
        let target = self.target.direct_sum(&other.target)?;
        Self::new(
            &source,
            &target,
            self.blocks.iter().zip(&other.blocks).map(|(a, b)| linalg::direct_sum(a, b)).collect(),
        )
    }
}

impl<'a> Add<&'a AdjOp> for &'a AdjOp {
    type Output = AdjOp;
    fn add(self, rhs: &AdjOp) -> AdjOp {
        assert!(self.source == rhs.source && self.target == rhs.target, "adding mismatched operators");
        AdjOp {
            source: self.source.clone(),
            target: self.target.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a AdjOp> for &'a AdjOp {
    type Output = AdjOp;
    fn sub(self, rhs: &AdjOp) -> AdjOp {
        assert!(self.source == rhs.source && self.target == rhs.target, "subtracting mismatched operators");
        AdjOp {
            source: self.source.clone(),
            target: self.target.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a AdjOp> for &'a AdjOp {
    type Output = AdjOp;
    fn mul(self, rhs: &AdjOp) -> AdjOp {
        self.compose(rhs).expect("composing mismatched operators")
    }
}

impl StarOps for AdjOp {
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

/// A linear map `A → End_B(X)`, stored through the images of matrix units.
#[derive(Clone, Debug, PartialEq)]
pub struct OpMap {
    dom: Algebra,
    module: HilbertModule,
    units: Vec<AdjOp>,
}

impl OpMap {
    pub fn from_fn(dom: &Algebra, module: &HilbertModule, f: impl Fn(&AlgElem) -> AdjOp) -> Self {
        let units = dom.basis().iter().map(f).collect();
        Self { dom: dom.clone(), module: module.clone(), units }
    }

    pub fn from_units(dom: &Algebra, module: &HilbertModule, units: Vec<AdjOp>) -> Result<Self> {
        if units.len() != dom.dim() {
            return Err(Error::InvalidArgument("one image per matrix unit is required".into()));
        }
        if units.iter().any(|u| u.source() != module || u.target() != module) {
            return Err(Error::IncompatibleOperands("unit image acts on another module".into()));
        }
        Ok(Self { dom: dom.clone(), module: module.clone(), units })
    }

    /// Left multiplication of `A` on `A_A`.
    pub fn left_multiplication(alg: &Algebra) -> Self {
        let module = HilbertModule::trivial(alg);
        Self::from_fn(alg, &module, |a| AdjOp::new(&module, &module, a.blocks().to_vec()).unwrap())
    }

    /// The zero map.
    pub fn zero(dom: &Algebra, module: &HilbertModule) -> Self {
        Self::from_fn(dom, module, |_| AdjOp::zero(module, module))
    }

    pub fn domain(&self) -> &Algebra {
        &self.dom
    }

    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn units(&self) -> &[AdjOp] {
        &self.units
    }

    pub fn unit(&self, j: usize, k: usize, l: usize) -> &AdjOp {
        &self.units[self.dom.basis_index(j, k, l)]
    }

    pub fn apply(&self, a: &AlgElem) -> AdjOp {
        assert_eq!(a.algebra(), &self.dom, "map applied to a foreign element");
        let mut out = AdjOp::zero(&self.module, &self.module);
        for (i, c) in a.coords().into_iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for (o, u) in out.blocks.iter_mut().zip(&self.units[i].blocks) {
                *o += u * c;
            }
        }
        out
    }

    pub fn homomorphism_residual(&self) -> f64 {
        crate::algebra::homomorphism_residual(&self.dom, &|a: &AlgElem| self.apply(a))
    }

    pub fn is_star_homomorphism(&self, tol: f64) -> bool {
        self.homomorphism_residual() <= tol
    }

    /// `‖ρ(1) − Id‖`, the finite-dimensional nondegeneracy defect.
    pub fn unitality_residual(&self) -> f64 {
        self.apply(&self.dom.one()).dist(&AdjOp::identity(&self.module))
    }

    /// `a ↦ U ρ(a) U*` for an operator `U` out of this module.
    pub fn conjugate_by(&self, u: &AdjOp) -> Self {
        let module = u.target().clone();
        let ustar = u.adjoint();
        Self {
            dom: self.dom.clone(),
            module,
            units: self.units.iter().map(|t| &(u * t) * &ustar).collect(),
        }
    }

    /// `a ↦ ρ(π(a))` for a linear map `π: C → A` given by images of matrix units.
    pub fn precompose(&self, dom: &Algebra, pi: impl Fn(&AlgElem) -> AlgElem) -> Self {
        Self::from_fn(dom, &self.module, |c| self.apply(&pi(c)))
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.dom != other.dom {
            return Err(Error::IncompatibleOperands("direct sum of maps on different domains".into()));
        }
        let units = self
            .units
            .iter()
            .zip(&other.units)
            .map(|(a, b)| a.direct_sum(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dom: self.dom.clone(), module: self.module.direct_sum(&other.module)?, units })
    }

    pub fn max_dist(&self, other: &Self) -> f64 {
        self.units.iter().zip(&other.units).map(|(a, b)| a.dist(b)).fold(0.0, f64::max)
    }
}

/// The conjugate left module `X*` with `a·x* = (x a*)*` and `_A⟨x*|y*⟩ = ⟨x|y⟩_A`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugateModule {
    base: HilbertModule,
}

impl ConjugateModule {
    pub fn base(&self) -> &HilbertModule {
        &self.base
    }

    /// Left inner product of `x*` and `y*`.
    pub fn left_inner(&self, x: &ModVec, y: &ModVec) -> AlgElem {
        x.ip(y)
    }

    /// Left action `a·x*`, returned as the vector `x a*` whose conjugate it is.
    pub fn left_act(&self, a: &AlgElem, x: &ModVec) -> ModVec {
        x.right_mul(&a.adjoint())
    }
}

/// The identification `Θ_{x,y} ↔ x ⊗ y*` of compacts with `X ⊗ X*`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactsIndex {
    module: HilbertModule,
}

/// A formal elementary tensor `f1 ⊗ c ⊗ f2*` in `X ⊗ C ⊗ X*`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactTriple {
    pub left: ModVec,
    pub middle: AlgElem,
    pub right: ModVec,
}

pub fn conjugate_and_compacts(x: &HilbertModule) -> (ConjugateModule, CompactsIndex) {
    (ConjugateModule { base: x.clone() }, CompactsIndex { module: x.clone() })
}

impl CompactsIndex {
    /// `dim(X ⊗ X*) = dim End(X) = Σ m_l²`.
    pub fn dim(&self) -> usize {
        self.module.mults().iter().map(|m| m * m).sum()
    }

    pub fn to_operator(&self, t: &CompactTriple) -> AdjOp {
        AdjOp::rank_one(&t.left.right_mul(&t.middle), &t.right).expect("same coefficients")
    }

    pub fn adjoint(&self, t: &CompactTriple) -> CompactTriple {
        CompactTriple { left: t.right.clone(), middle: t.middle.adjoint(), right: t.left.clone() }
    }

    /// `(f1⊗c1⊗f2*)(f3⊗c2⊗f4*) = f1 ⊗ c1⟨f2|f3⟩c2 ⊗ f4*`.
    pub fn product(&self, s: &CompactTriple, t: &CompactTriple) -> CompactTriple {
        let mid = &(&s.middle * &s.right.ip(&t.left)) * &t.middle;
        CompactTriple { left: s.left.clone(), middle: mid, right: t.right.clone() }
    }

    /// Expansion `T = Σ_j Θ_{T u_j, u_j}` over the standard frame.
    pub fn decompose(&self, t: &AdjOp) -> Vec<CompactTriple> {
        let one = self.module.coeff().one();
        self.module
            .standard_frame()
            .into_iter()
            .map(|u| CompactTriple { left: t.apply(&u), middle: one.clone(), right: u })
            .collect()
    }
}

/// Per-block rank of the right submodule generated by `vectors`.
///
/// Block `l` of the generated submodule is determined by the column space of the
/// concatenated blocks, so the submodule is everything exactly when every rank
/// equals the multiplicity.
pub fn module_span_ranks(x: &HilbertModule, vectors: &[ModVec], tol: f64) -> Vec<usize> {
    (0..x.mults().len())
        .map(|l| {
            let n = x.coeff().block_dim(l);
            let mut cols = CMat::zeros(x.mult(l), vectors.len() * n);
            for (i, v) in vectors.iter().enumerate() {
                cols.view_mut((0, i * n), (x.mult(l), n)).copy_from(v.block(l));
            }
            linalg::rank(&cols, tol)
        })
        .collect()
}

/// Random unitary on a module, block by block.
pub fn random_unitary<R: Rng>(rng: &mut R, x: &HilbertModule) -> AdjOp {
    AdjOp::new(x, x, x.mults().iter().map(|&m| linalg::random_unitary(rng, m)).collect()).unwrap()
}

/// Random operator between two modules.
pub fn random_op<R: Rng>(rng: &mut R, source: &HilbertModule, target: &HilbertModule) -> AdjOp {
    AdjOp::new(
        source,
        target,
        (0..source.mults().len())
            .map(|l| linalg::random_cmat(rng, target.mult(l), source.mult(l)))
            .collect(),
    )
    .unwrap()
}

/// Sum of `Θ_{u,u}` over a frame.
pub fn frame_operator(frame: &[ModVec], x: &HilbertModule) -> AdjOp {
    frame.iter().fold(AdjOp::zero(x, x), |acc, u| &acc + &AdjOp::rank_one(u, u).unwrap())
}

/// A finite direct sum of modules over one algebra, with level-by-level placement.
#[derive(Clone, Debug, PartialEq)]
pub struct Graded {
    levels: Vec<HilbertModule>,
    total: HilbertModule,
    offsets: Vec<Vec<usize>>,
}

impl Graded {
    pub fn new(coeff: &Algebra, levels: Vec<HilbertModule>) -> Result<Self> {
        if levels.iter().any(|l| l.coeff() != coeff) {
            return Err(Error::IncompatibleOperands("graded levels over different algebras".into()));
        }
        let k = coeff.num_blocks();
        let mut offsets = Vec::with_capacity(levels.len());
        let mut acc = vec![0usize; k];
        for lev in &levels {
            offsets.push(acc.clone());
            for (l, a) in acc.iter_mut().enumerate() {
                *a += lev.mult(l);
            }
        }
        let total = HilbertModule::new(coeff, acc)?;
        Ok(Self { levels, total, offsets })
    }

    pub fn total(&self) -> &HilbertModule {
        &self.total
    }

    pub fn level(&self, n: usize) -> &HilbertModule {
        &self.levels[n]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn inject(&self, n: usize, v: &ModVec) -> ModVec {
        let mut out = self.total.zero();
        for l in 0..self.total.mults().len() {
            let b = v.block(l);
            out.block_mut(l).view_mut((self.offsets[n][l], 0), b.shape()).copy_from(b);
        }
        out
    }

    pub fn extract(&self, n: usize, v: &ModVec) -> ModVec {
        let blocks = (0..self.total.mults().len())
            .map(|l| v.block(l).rows(self.offsets[n][l], self.levels[n].mult(l)).into_owned())
            .collect();
        self.levels[n].from_blocks(blocks).expect("level shape")
    }

    /// Writes `op` (from level `src` of `self` to level `dst` of `target`) into `out`.
    pub fn place_into(&self, target: &Graded, out: &mut AdjOp, src: usize, dst: usize, op: &AdjOp) {
        for l in 0..self.total.mults().len() {
            let b = op.block(l);
            out.block_mut(l)
                .view_mut((target.offsets[dst][l], self.offsets[src][l]), b.shape())
                .copy_from(b);
        }
    }

    /// The block of `op` from level `src` of `self` to level `dst` of `target`.
    pub fn block_of(&self, target: &Graded, op: &AdjOp, src: usize, dst: usize) -> AdjOp {
        let blocks = (0..self.total.mults().len())
            .map(|l| {
                op.block(l)
                    .view(
                        (target.offsets[dst][l], self.offsets[src][l]),
                        (target.levels[dst].mult(l), self.levels[src].mult(l)),
                    )
                    .into_owned()
            })
            .collect();
        AdjOp::new(&self.levels[src], &target.levels[dst], blocks).expect("level shapes")
    }

    /// Projection onto the levels `0..=w`.
    pub fn levels_up_to(&self, w: usize) -> AdjOp {
        let mut out = AdjOp::zero(&self.total, &self.total);
        for n in 0..self.levels.len().min(w + 1) {
            self.place_into(self, &mut out, n, n, &AdjOp::identity(&self.levels[n]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::make_algebra;
    use crate::linalg::cr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_module(rng: &mut ChaCha8Rng) -> HilbertModule {
        let k = rng.gen_range(1..4);
        let dims: Vec<usize> = (0..k).map(|_| rng.gen_range(1..4)).collect();
        let mults: Vec<usize> = (0..k).map(|_| rng.gen_range(0..4)).collect();
        HilbertModule::new(&Algebra::new(dims).unwrap(), mults).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let c = make_algebra(&[1]).unwrap();
        let x2 = HilbertModule::new(&c, vec![2]).unwrap();
        let x = x2.from_blocks(vec![CMat::from_row_slice(2, 1, &[cr(1.0), cr(2.0)])]).unwrap();
        assert_eq!(inner_product(&x, &x).unwrap().block(0)[(0, 0)], cr(5.0));

        let m2 = make_algebra(&[2]).unwrap();
        let row = HilbertModule::new(&m2, vec![1]).unwrap();
        let r = row.from_blocks(vec![CMat::from_row_slice(1, 2, &[cr(1.0), cr(0.0)])]).unwrap();
        assert_eq!(r.ip(&r), m2.unit(0, 0, 0));
    }

    #[test]
    fn inner_product_is_right_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_module(&mut rng);
            let (x, y) = (m.random(&mut rng), m.random(&mut rng));
            let b = m.coeff().random(&mut rng);
            assert!(x.ip(&y.right_mul(&b)).dist(&(&x.ip(&y) * &b)) < 1e-12);
            assert!(x.ip(&x).is_positive(1e-12));
        }
    }

    #[test]
    fn standard_frame_reconstructs() {
        let c = make_algebra(&[1]).unwrap();
        let cn = HilbertModule::new(&c, vec![3]).unwrap();
        let frame = standard_frame(&cn);
        assert_eq!(frame.len(), 3);
        assert!(frame_operator(&frame, &cn).dist(&AdjOp::identity(&cn)) < 1e-15);

        let m2 = make_algebra(&[2]).unwrap();
        let row = HilbertModule::new(&m2, vec![1]).unwrap();
        let frame = standard_frame(&row);
        assert_eq!(frame.len(), 1);
        assert_eq!(frame[0].block(0)[(0, 0)], ONE);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = HilbertModule::new(&make_algebra(&[2, 3, 1]).unwrap(), vec![2, 1, 3]).unwrap();
        let frame = m.standard_frame();
        for _ in 0..100 {
            let x = m.random(&mut rng);
            let rec = frame.iter().fold(m.zero(), |acc, u| &acc + &u.right_mul(&u.ip(&x)));
            assert!(rec.dist(&x) < 1e-12);
        }
    }

    #[test]
    fn rank_one_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = make_algebra(&[1]).unwrap();
        let cn = HilbertModule::new(&c, vec![3]).unwrap();
        let x = cn.random(&mut rng);
        let x = x.scale(cr(1.0 / x.norm()));
        let p = rank_one(&x, &x).unwrap();
        assert!(p.projection_residual() < 1e-12);

        for _ in 0..50 {
            let m = random_module(&mut rng);
            let (x, y, z) = (m.random(&mut rng), m.random(&mut rng), m.random(&mut rng));
            let lhs = &AdjOp::rank_one(&x, &y).unwrap() * &AdjOp::rank_one(&y, &z).unwrap();
            let rhs = AdjOp::rank_one(&x.right_mul(&y.ip(&y)), &z).unwrap();
            assert!(lhs.dist(&rhs) < 1e-11);
            assert!(AdjOp::rank_one(&x, &y).unwrap().adjoint().dist(&AdjOp::rank_one(&y, &x).unwrap()) < 1e-14);
            let t = AdjOp::rank_one(&x, &y).unwrap();
            assert!(x.ip(&t.apply(&z)).dist(&t.adjoint().apply(&x).ip(&z)) < 1e-11);
        }
    }

    #[test]
    fn cauchy_schwarz_and_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let m = random_module(&mut rng);
            let (x, y) = (m.random(&mut rng), m.random(&mut rng));
            assert!(x.ip(&y).norm() <= x.norm() * y.norm() + 1e-12);
            let t = random_op(&mut rng, &m, &m);
            assert_eq!(t.adjoint().adjoint(), t);
        }
    }

    #[test]
    fn operators_are_sums_of_rank_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let m = random_module(&mut rng);
            let t = random_op(&mut rng, &m, &m);
            let (_, k) = conjugate_and_compacts(&m);
            let rebuilt = k
                .decompose(&t)
                .iter()
                .fold(AdjOp::zero(&m, &m), |acc, tr| &acc + &k.to_operator(tr));
            assert!(rebuilt.dist(&t) < 1e-12);
        }
    }

    #[test]
    fn compacts_dimension_adjoint_and_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = HilbertModule::new(&make_algebra(&[2, 1]).unwrap(), vec![3, 2]).unwrap();
        let (conj, k) = conjugate_and_compacts(&m);
        assert_eq!(k.dim(), 13);
        let e = |rng: &mut ChaCha8Rng| CompactTriple {
            left: m.random(rng),
            middle: m.coeff().random(rng),
            right: m.random(rng),
        };
        for _ in 0..100 {
            let (s, t) = (e(&mut rng), e(&mut rng));
            let lhs = k.to_operator(&k.product(&s, &t));
            let rhs = &k.to_operator(&s) * &k.to_operator(&t);
            assert!(lhs.dist(&rhs) < 1e-12 * rhs.norm().max(1.0));
            assert!(k.to_operator(&k.adjoint(&s)).dist(&k.to_operator(&s).adjoint()) < 1e-12);
        }
        let (x, y) = (m.random(&mut rng), m.random(&mut rng));
        let a = m.coeff().random(&mut rng);
        let lhs = conj.left_inner(&conj.left_act(&a, &x), &y);
        assert!(lhs.dist(&(&a * &conj.left_inner(&x, &y))) < 1e-12);
    }

    #[test]
    fn module_json_roundtrip() {
        let m = HilbertModule::new(&make_algebra(&[2, 1]).unwrap(), vec![0, 3]).unwrap();
        assert_eq!(m.to_json(), r#"{"coeff":[2,1],"mults":[0,3]}"#);
        assert_eq!(HilbertModule::from_json(&m.to_json()).unwrap(), m);
        assert!(HilbertModule::from_json(r#"{"coeff":[2],"mults":[1,1]}"#).is_err());
    }

    #[test]
    fn left_multiplication_is_a_homomorphism() {
        let alg = make_algebra(&[2, 1]).unwrap();
        let l = OpMap::left_multiplication(&alg);
        assert!(l.homomorphism_residual() < 1e-14);
        assert!(l.unitality_residual() < 1e-14);
    }
}
