//! Truncated Fock modules, creation operators, covariance, Fock projections and
//! subproduct systems.
//!
//! Level `0` is `A_A`, level `1` is `X` and level `n+1` is `X ⊗_A (level n)`.
//! Creation operators annihilate the top level, so identities involving a word with
//! `k` creations are only meaningful on levels `≤ N − k`; [`TruncFock::window_residual`]
//! measures residuals there.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::algebra::{ideal_from_kernel, AlgElem, Algebra, Ideal};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::module::{AdjOp, HilbertModule, ModVec, OpMap};
use crate::tensor::{Correspondence, TensorProduct};

/// `F_X` truncated at depth `N`.
#[derive(Clone, Debug)]
pub struct TruncFock {
    corr: Correspondence,
    depth: usize,
    levels: Vec<HilbertModule>,
    left: Vec<OpMap>,
    tensors: Vec<Option<TensorProduct>>,
    total: HilbertModule,
    offsets: Vec<Vec<usize>>,
}

/// An operator on a truncated Fock module with its creation/annihilation count.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOp {
    pub op: AdjOp,
    pub creations: usize,
    pub annihilations: usize,
}

impl FockOp {
    pub fn new(op: AdjOp, creations: usize, annihilations: usize) -> Self {
        Self { op, creations, annihilations }
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.op.adjoint(), self.annihilations, self.creations)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(
            &self.op * &other.op,
            self.creations + other.creations,
            self.annihilations + other.annihilations,
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(
            &self.op - &other.op,
            self.creations.max(other.creations),
            self.annihilations.max(other.annihilations),
        )
    }

    /// `P T P`.
    pub fn compress(&self, p: &FockOp) -> Self {
        Self::new(&(&p.op * &self.op) * &p.op, self.creations, self.annihilations)
    }
}

pub fn truncated_fock(x: &Correspondence, depth: usize, tol: f64) -> Result<TruncFock> {
    TruncFock::new(x, depth, tol)
}

impl TruncFock {
    pub fn new(x: &Correspondence, depth: usize, tol: f64) -> Result<Self> {
        if x.left_alg() != x.coeff() {
            return Err(Error::IncompatibleOperands("Fock modules need an A–A correspondence".into()));
        }
        let alg = x.coeff().clone();
        let mut levels = vec![HilbertModule::trivial(&alg)];
        let mut left = vec![OpMap::left_multiplication(&alg)];
        let mut tensors = vec![None];
        if depth >= 1 {
            levels.push(x.module().clone());
            left.push(x.phi().clone());
            tensors.push(None);
        }
        for n in 2..=depth {
            let t = TensorProduct::new(x.module(), &left[n - 1], tol)?;
            left.push(t.lift_map(x.phi()));
            levels.push(t.module().clone());
            tensors.push(Some(t));
        }
        let k = alg.num_blocks();
        let mut offsets = Vec::with_capacity(levels.len());
        let mut acc = vec![0usize; k];
        for lev in &levels {
            offsets.push(acc.clone());
            for l in 0..k {
                acc[l] += lev.mult(l);
            }
        }
        let total = HilbertModule::new(&alg, acc)?;
        Ok(Self { corr: x.clone(), depth, levels, left, tensors, total, offsets })
    }

    pub fn corr(&self) -> &Correspondence {
        &self.corr
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, n: usize) -> &HilbertModule {
        &self.levels[n]
    }

    pub fn total(&self) -> &HilbertModule {
        &self.total
    }

    /// Complex dimension of each level.
    pub fn level_dims(&self) -> Vec<usize> {
        self.levels.iter().map(HilbertModule::dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    /// Left action of `A` on level `n`.
    pub fn left_action_level(&self, n: usize) -> &OpMap {
        &self.left[n]
    }

    /// The tensor realization of level `n ≥ 2` as `X ⊗ (level n−1)`.
    pub fn tensor(&self, n: usize) -> Option<&TensorProduct> {
        self.tensors.get(n).and_then(|t| t.as_ref())
    }

    pub fn inject(&self, n: usize, v: &ModVec) -> ModVec {
        let mut out = self.total.zero();
        for l in 0..self.levels[n].mults().len() {
            let rows = self.levels[n].mult(l);
            out.block_mut(l).view_mut((self.offsets[n][l], 0), (rows, v.block(l).ncols())).copy_from(v.block(l));
        }
        out
    }

    pub fn extract(&self, n: usize, v: &ModVec) -> ModVec {
        let blocks = (0..self.levels[n].mults().len())
            .map(|l| {
                let rows = self.levels[n].mult(l);
                v.block(l).rows(self.offsets[n][l], rows).into_owned()
            })
            .collect();
        self.levels[n].from_blocks(blocks).expect("level shape")
    }

    /// Places an operator from level `src` to level `dst` inside the total module.
    pub fn place(&self, src: usize, dst: usize, op: &AdjOp) -> AdjOp {
        let mut out = AdjOp::zero(&self.total, &self.total);
        self.place_into(&mut out, src, dst, op);
        out
    }

    fn place_into(&self, out: &mut AdjOp, src: usize, dst: usize, op: &AdjOp) {
        for l in 0..self.total.mults().len() {
            let b = op.block(l);
            out.block_mut(l)
                .view_mut((self.offsets[dst][l], self.offsets[src][l]), b.shape())
                .copy_from(b);
        }
    }

    /// The operator from level `n` to `n+1` sending `v` to `x ⊗ v`.
    pub fn creation_level(&self, x: &ModVec, n: usize) -> AdjOp {
        assert!(n < self.depth, "no level above the top");
        if n == 0 {
            let blocks = x.blocks().to_vec();
            AdjOp::new(&self.levels[0], &self.levels[1], blocks).expect("x has the shape of X")
        } else {
            self.tensors[n + 1].as_ref().expect("tensor level").creation(x)
        }
    }

    /// `T_x`, annihilating the top level.
    pub fn creation(&self, x: &ModVec) -> FockOp {
        let mut out = AdjOp::zero(&self.total, &self.total);
        for n in 0..self.depth {
            self.place_into(&mut out, n, n + 1, &self.creation_level(x, n));
        }
        FockOp::new(out, 1, 0)
    }

    /// `T_{x_1} ⋯ T_{x_k}`.
    pub fn word(&self, xs: &[ModVec]) -> FockOp {
        xs.iter().fold(self.identity(), |acc, x| acc.mul(&self.creation(x)))
    }

    pub fn identity(&self) -> FockOp {
        FockOp::new(AdjOp::identity(&self.total), 0, 0)
    }

    /// The diagonal left action of `a`.
    pub fn left_action(&self, a: &AlgElem) -> FockOp {
        let mut out = AdjOp::zero(&self.total, &self.total);
        for n in 0..=self.depth {
            self.place_into(&mut out, n, n, &self.left[n].apply(a));
        }
        FockOp::new(out, 0, 0)
    }

    /// `x_1 ⊗ ⋯ ⊗ x_k` in level `k ≥ 1`.
    pub fn elementary(&self, xs: &[ModVec]) -> ModVec {
        assert!(!xs.is_empty() && xs.len() <= self.depth);
        let mut v = xs[xs.len() - 1].clone();
        for (i, x) in xs.iter().rev().skip(1).enumerate() {
            let lvl = i + 1;
            v = self.tensors[lvl + 1].as_ref().expect("tensor level").embed(x, &v);
        }
        v
    }

    /// Projection onto the levels `0..=w`.
    pub fn levels_up_to(&self, w: usize) -> AdjOp {
        let mut out = AdjOp::zero(&self.total, &self.total);
        for n in 0..=w.min(self.depth) {
            self.place_into(&mut out, n, n, &AdjOp::identity(&self.levels[n]));
        }
        out
    }

    /// The diagonal block of `op` at level `n`.
    pub fn extract_op(&self, n: usize, op: &AdjOp) -> AdjOp {
        let lev = &self.levels[n];
        let blocks = (0..lev.mults().len())
            .map(|l| {
                let (o, m) = (self.offsets[n][l], lev.mult(l));
                op.block(l).view((o, o), (m, m)).into_owned()
            })
            .collect();
        AdjOp::new(lev, lev, blocks).expect("level shape")
    }

    /// Norm of `D` restricted to the levels where a word of its degree is exact.
    pub fn window_residual(&self, d: &FockOp) -> f64 {
        if d.creations > self.depth {
            return 0.0;
        }
        (&d.op * &self.levels_up_to(self.depth - d.creations)).norm()
    }

    /// The levelwise extension `t ⊗ ⋯ ⊗ t` of a left-linear `t: X → X'` to a map of
    /// truncated Fock modules of equal depth.
    pub fn levelwise(&self, target: &TruncFock, t: &AdjOp) -> AdjOp {
        assert_eq!(self.depth, target.depth);
        let mut out = AdjOp::zero(&self.total, &target.total);
        let id0 = AdjOp::identity(&self.levels[0]);
        place_between(self, target, &mut out, 0, &id0);
        if self.depth == 0 {
            return out;
        }
        place_between(self, target, &mut out, 1, t);
        let mut prev = t.clone();
        for n in 2..=self.depth {
            let src = self.tensors[n].as_ref().expect("tensor level");
            let dst = target.tensors[n].as_ref().expect("tensor level");
            let cur = src.lift_to(dst, t, &prev);
            place_between(self, target, &mut out, n, &cur);
            prev = cur;
        }
        out
    }
}

fn place_between(src: &TruncFock, dst: &TruncFock, out: &mut AdjOp, n: usize, op: &AdjOp) {
    for l in 0..src.total.mults().len() {
        let b = op.block(l);
        out.block_mut(l)
            .view_mut((dst.offsets[n][l], src.offsets[n][l]), b.shape())
            .copy_from(b);
    }
}

/// `J_X = φ^{-1}(End⁰) ∩ ker(φ)^⊥`, which is `ker(φ)^⊥` in finite dimensions.
pub fn covariance_ideal(x: &Correspondence, tol: f64) -> Result<Ideal> {
    let (_, perp) = ideal_from_kernel(x.left_alg(), |a| x.act(a), tol)?;
    Ok(perp)
}

/// A morphism `(π, ψ)` from a correspondence over `A_Y` to one over `A_X`.
///
/// `pi` lists the images of the matrix units of `A_Y`; `psi` is the complex matrix
/// of `ψ` on flattened coordinates.
#[derive(Clone, Debug)]
pub struct CorrMorphism {
    pub pi: Vec<AlgElem>,
    pub psi: CMat,
}

impl CorrMorphism {
    pub fn identity(x: &Correspondence) -> Self {
        let d = x.dim();
        Self { pi: x.coeff().basis(), psi: CMat::identity(d, d) }
    }

    /// `(Id_A, ι)` for an inclusion operator `ι: Y → X` of modules over one algebra.
    pub fn inclusion(iota: &AdjOp) -> Self {
        Self { pi: iota.source().coeff().basis(), psi: iota.to_linear_matrix() }
    }

    pub fn apply_pi(&self, target_alg: &Algebra, a: &AlgElem) -> AlgElem {
        let mut out = target_alg.zero();
        for (c, img) in a.coords().into_iter().zip(&self.pi) {
            if c.norm_sqr() != 0.0 {
                out = &out + &img.scale(c);
            }
        }
        out
    }

    pub fn apply_psi(&self, y: &HilbertModule, x: &HilbertModule, v: &ModVec) -> ModVec {
        debug_assert_eq!(v.module(), y);
        x.unflatten(&(&self.psi * y.flatten(v)))
    }
}

/// Checks the three morphism axioms: inner products, left actions, right actions.
pub fn check_morphism(m: &CorrMorphism, y: &Correspondence, x: &Correspondence, tol: f64) -> Result<()> {
    let (ya, xa) = (y.coeff(), x.coeff());
    if m.pi.len() != ya.dim() || m.psi.shape() != (x.dim(), y.dim()) {
        return Err(Error::IncompatibleOperands("morphism data has the wrong shape".into()));
    }
    let basis: Vec<ModVec> = (0..y.dim())
        .map(|i| {
            let mut e = DVector::<C64>::zeros(y.dim());
            e[i] = linalg::ONE;
            y.module().unflatten(&e)
        })
        .collect();
    let images: Vec<ModVec> = basis.iter().map(|v| m.apply_psi(y.module(), x.module(), v)).collect();
    let mut inner: f64 = 0.0;
    for (v1, w1) in basis.iter().zip(&images) {
        for (v2, w2) in basis.iter().zip(&images) {
            inner = inner.max(w1.ip(w2).dist(&m.apply_pi(xa, &v1.ip(v2))));
        }
    }
    if inner > tol {
        return Err(Error::NotAMorphism { axiom: "inner product", residual: inner });
    }
    let mut left: f64 = 0.0;
    let mut right: f64 = 0.0;
    for u in ya.basis() {
        let pu = m.apply_pi(xa, &u);
        let phi_x = x.act(&pu);
        let phi_y = y.act(&u);
        for (v, w) in basis.iter().zip(&images) {
            let lhs = m.apply_psi(y.module(), x.module(), &phi_y.apply(v));
            left = left.max((&lhs - &phi_x.apply(w)).max_abs());
            let lhs = m.apply_psi(y.module(), x.module(), &v.right_mul(&u));
            right = right.max((&lhs - &w.right_mul(&pu)).max_abs());
        }
    }
    if left > tol {
        return Err(Error::NotAMorphism { axiom: "left action", residual: left });
    }
    if right > tol {
        return Err(Error::NotAMorphism { axiom: "right action", residual: right });
    }
    Ok(())
}

/// `ψ^{(1)}(T) = Σ_j Θ_{ψ(T u_j), ψ(u_j)}` over the standard frame of `Y`.
pub fn induced_on_compacts(m: &CorrMorphism, y: &Correspondence, x: &Correspondence, t: &AdjOp) -> AdjOp {
    let mut out = AdjOp::zero(x.module(), x.module());
    for u in y.module().standard_frame() {
        let a = m.apply_psi(y.module(), x.module(), &t.apply(&u));
        let b = m.apply_psi(y.module(), x.module(), &u);
        out = &out + &AdjOp::rank_one(&a, &b).expect("same coefficients");
    }
    out
}

/// Evaluates `ψ^{(1)}(φ_Y(a)) = φ_X(π(a))` on the matrix units of `J_Y`.
///
/// Returns whether the morphism is covariant and the largest residual.
pub fn check_covariance(
    m: &CorrMorphism,
    y: &Correspondence,
    x: &Correspondence,
    tol: f64,
) -> Result<(bool, f64)> {
    check_morphism(m, y, x, tol)?;
    let j = covariance_ideal(y, tol)?;
    let ya = y.coeff();
    let mut residual: f64 = 0.0;
    for (idx, u) in ya.basis().iter().enumerate() {
        if !j.contains_block(ya.basis_triple(idx).0) {
            continue;
        }
        let lhs = induced_on_compacts(m, y, x, &y.act(u));
        let rhs = x.act(&m.apply_pi(x.coeff(), u));
        residual = residual.max(lhs.dist(&rhs));
    }
    Ok((residual <= tol, residual))
}

/// Residual of `P² = P = P*` plus the commutator with the left action.
pub fn correspondence_projection_residual(x: &Correspondence, p0: &AdjOp) -> f64 {
    let mut res = p0.projection_residual();
    for u in x.phi().units() {
        res = res.max((&(p0 * u) - &(u * p0)).norm());
    }
    res
}

/// `P = Id_A ⊕ P_0 ⊕ (P_0 ⊗ P_0) ⊕ ⋯`.
pub fn induced_fock_projection(p0: &AdjOp, f: &TruncFock, tol: f64) -> Result<FockOp> {
    let res = correspondence_projection_residual(f.corr(), p0);
    if res > tol {
        return Err(Error::PreconditionViolated(format!(
            "not a correspondence projection (residual {res:.3e})"
        )));
    }
    Ok(FockOp::new(f.levelwise(f, p0), 0, 0))
}

/// `Ψ_P(T) = P T P`, after checking that `P` is a level-preserving projection commuting with `A`.
pub fn fock_expectation(f: &TruncFock, p: &FockOp, t: &FockOp, tol: f64) -> Result<FockOp> {
    let mut res = p.op.projection_residual();
    for n in 0..=f.depth() {
        let q = f.levels_up_to(n);
        res = res.max((&(&p.op * &q) - &(&q * &p.op)).norm());
    }
    for u in f.corr().coeff().basis() {
        let a = f.left_action(&u).op;
        res = res.max((&(&p.op * &a) - &(&a * &p.op)).norm());
    }
    if res > tol {
        return Err(Error::PreconditionViolated(format!("not a Fock projection (residual {res:.3e})")));
    }
    Ok(t.compress(p))
}

/// An orthonormal basis (as an isometry `Y → X`) of the range of a projection on `X`.
pub fn range_isometry(p0: &AdjOp, tol: f64) -> AdjOp {
    let x = p0.source();
    let mut blocks = Vec::new();
    let mut mults = Vec::new();
    for l in 0..x.mults().len() {
        let (vals, vecs) = linalg::herm_eig(p0.block(l));
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5 + tol).collect();
        let mut b = CMat::zeros(x.mult(l), keep.len());
        for (c, &i) in keep.iter().enumerate() {
            b.set_column(c, &vecs.column(i));
        }
        mults.push(keep.len());
        blocks.push(b);
    }
    let y = HilbertModule::new(x.coeff(), mults).expect("same algebra");
    AdjOp::new(&y, x, blocks).expect("conforming blocks")
}

/// The sub-correspondence `P_0 X` and its inclusion.
pub fn sub_correspondence(x: &Correspondence, p0: &AdjOp, tol: f64) -> Result<(Correspondence, AdjOp)> {
    let res = correspondence_projection_residual(x, p0);
    if res > tol {
        return Err(Error::PreconditionViolated(format!(
            "not a correspondence projection (residual {res:.3e})"
        )));
    }
    let iota = range_isometry(p0, tol);
    let phi = x.phi().conjugate_by(&iota.adjoint());
    Ok((Correspondence::from_hom_unchecked(phi), iota))
}

/// Fibres `X_0 = A, X_1, …, X_N` with isometric inclusions `ι_{n,m}: X_{n+m} → X_n ⊗ X_m`.
///
/// The inclusions `ι_{1,m}` are required; further ones are checked for isometry only.
#[derive(Clone, Debug)]
pub struct SubproductSystem {
    coeff: Algebra,
    fibers: Vec<Correspondence>,
    products: BTreeMap<(usize, usize), TensorProduct>,
    inclusions: BTreeMap<(usize, usize), AdjOp>,
}

impl SubproductSystem {
    pub fn new(
        fibers: Vec<Correspondence>,
        inclusions: BTreeMap<(usize, usize), AdjOp>,
        tol: f64,
    ) -> Result<Self> {
        let coeff = fibers
            .first()
            .map(|f| f.coeff().clone())
            .ok_or_else(|| Error::InconsistentSubproduct("no fibres".into()))?;
        let mut products = BTreeMap::new();
        for (&(n, m), iota) in &inclusions {
            if n + m >= fibers.len() || n == 0 || m == 0 {
                return Err(Error::InconsistentSubproduct(format!("inclusion ({n},{m}) out of range")));
            }
            let t = TensorProduct::new(fibers[n].module(), fibers[m].phi(), tol)?;
            if iota.source() != fibers[n + m].module() || iota.target() != t.module() {
                return Err(Error::InconsistentSubproduct(format!("inclusion ({n},{m}) has the wrong shape")));
            }
            let iso = (&iota.adjoint() * iota).dist(&AdjOp::identity(iota.source()));
            if iso > tol {
                return Err(Error::InconsistentSubproduct(format!(
                    "inclusion ({n},{m}) is not isometric (residual {iso:.3e})"
                )));
            }
            products.insert((n, m), t);
        }
        for m in 1..fibers.len().saturating_sub(1) {
            if !inclusions.contains_key(&(1, m)) {
                return Err(Error::InconsistentSubproduct(format!("missing inclusion (1,{m})")));
            }
        }
        Ok(Self { coeff, fibers, products, inclusions })
    }

    pub fn coeff(&self) -> &Algebra {
        &self.coeff
    }

    pub fn fibers(&self) -> &[Correspondence] {
        &self.fibers
    }

    pub fn inclusion(&self, n: usize, m: usize) -> Option<&AdjOp> {
        self.inclusions.get(&(n, m))
    }

    pub fn product(&self, n: usize, m: usize) -> Option<&TensorProduct> {
        self.products.get(&(n, m))
    }

    /// The symmetric subproduct system of `X_1 = ℂ^d` over `ℂ`: `X_n` is the range of
    /// the symmetrizer in `X_1^{⊗n}`, spanned by the powers `v ⊗ ⋯ ⊗ v`.
    pub fn symmetric(d: usize, depth: usize, tol: f64) -> Result<Self> {
        use rand::SeedableRng;
        let c = Algebra::new(vec![1])?;
        let x1 = HilbertModule::new(&c, vec![d])?;
        let scalar = |m: &HilbertModule| {
            let m = m.clone();
            Correspondence::from_hom_unchecked(OpMap::from_fn(&c, &m, |a| {
                AdjOp::identity(&m).scale(a.block(0)[(0, 0)])
            }))
        };
        let x = scalar(&x1);
        let fock = TruncFock::new(&x, depth, tol)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut embeddings: Vec<AdjOp> = vec![AdjOp::identity(fock.level(0))];
        let mut fibers = vec![Correspondence::identity(&c)];
        if depth >= 1 {
            embeddings.push(AdjOp::identity(&x1));
            fibers.push(x.clone());
        }
        for n in 2..=depth {
            let powers: Vec<ModVec> = (0..2 * (n + 1) + 2)
                .map(|_| {
                    let v = x1.random(&mut rng);
                    fock.elementary(&vec![v; n])
                })
                .collect();
            let lev = fock.level(n);
            let mut cols = CMat::zeros(lev.mult(0), powers.len());
            for (i, p) in powers.iter().enumerate() {
                cols.set_column(i, &p.block(0).column(0));
            }
            let svd = cols.svd(true, false);
            let u = svd.u.expect("left singular vectors");
            let top = svd.singular_values.max();
            let r = svd.singular_values.iter().filter(|&&s| s > 1e-8 * top).count();
            let xn = HilbertModule::new(&c, vec![r])?;
            let j = AdjOp::new(&xn, lev, vec![u.columns(0, r).into_owned()])?;
            embeddings.push(j);
            fibers.push(scalar(&xn));
        }
        // ι_{1,m} = (Id ⊗ J_m)* J_{1+m}
        let mut inclusions = BTreeMap::new();
        for m in 1..depth {
            let t = TensorProduct::new(fibers[1].module(), fibers[m].phi(), tol)?;
            let dst = fock.tensor(m + 1).expect("tensor level");
            let lifted = t.lift_to(dst, &AdjOp::identity(&x1), &embeddings[m]);
            inclusions.insert((1, m), &lifted.adjoint() * &embeddings[m + 1]);
        }
        Self::new(fibers, inclusions, tol)
    }
}

/// The projections `P_k` onto the images of `X_k` in `X_1^{⊗k}`, assembled from `ι_{1,k−1}`.
///
/// Checks the subproduct compatibility `P_k ≤ Id ⊗ P_{k−1}` on every level.
pub fn subproduct_projection(s: &SubproductSystem, f: &TruncFock, tol: f64) -> Result<FockOp> {
    if f.depth() + 1 > s.fibers.len() {
        return Err(Error::InconsistentSubproduct("the system has fewer fibres than the Fock depth".into()));
    }
    if f.level(1) != s.fibers[1].module() {
        return Err(Error::InconsistentSubproduct("X_1 differs from the Fock generator".into()));
    }
    let mut out = AdjOp::zero(f.total(), f.total());
    let mut embeddings = vec![AdjOp::identity(f.level(0))];
    if f.depth() >= 1 {
        embeddings.push(AdjOp::identity(f.level(1)));
    }
    let id1 = AdjOp::identity(f.level(1));
    for k in 2..=f.depth() {
        let t = s.product(1, k - 1).expect("required inclusion");
        let lifted = t.lift_to(f.tensor(k).expect("tensor level"), &id1, &embeddings[k - 1]);
        embeddings.push(&lifted * s.inclusion(1, k - 1).expect("required inclusion"));
    }
    let mut prev = AdjOp::identity(f.level(0));
    for (k, j) in embeddings.iter().enumerate() {
        let pk = j * &j.adjoint();
        if k >= 2 {
            let below = f.tensor(k).expect("tensor level").lift(&id1, &prev);
            let res = (&(&pk * &below) - &pk).norm();
            if res > tol {
                return Err(Error::InconsistentSubproduct(format!(
                    "P_{k} is not below Id ⊗ P_{} (residual {res:.3e})",
                    k - 1
                )));
            }
        }
        out = &out + &f.place(k, k, &pk);
        prev = pk;
    }
    Ok(FockOp::new(out, 0, 0))
}

/// `T^P_ξ = P T_ξ`.
pub fn projected_creation(f: &TruncFock, p: &FockOp, x: &ModVec) -> FockOp {
    p.mul(&f.creation(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::make_algebra;
    use crate::linalg::cr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_corr(n: usize) -> Correspondence {
        let c = make_algebra(&[1]).unwrap();
        let m = HilbertModule::new(&c, vec![n]).unwrap();
        Correspondence::new(OpMap::from_fn(&c, &m, |a| AdjOp::identity(&m).scale(a.block(0)[(0, 0)])), 1e-12)
            .unwrap()
    }

    #[test]
    fn fock_dimensions() {
        let x = scalar_corr(3);
        assert_eq!(truncated_fock(&x, 0, 1e-9).unwrap().dim(), 1);
        let f = truncated_fock(&x, 3, 1e-9).unwrap();
        assert_eq!(f.level_dims(), vec![1, 3, 9, 27]);
        assert_eq!(f.dim(), 1 + 3 + 9 + 27);
    }

    #[test]
    fn creation_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = make_algebra(&[1, 2]).unwrap();
        let xm = HilbertModule::new(&a, vec![3, 1]).unwrap();
        let phi = OpMap::from_fn(&a, &xm, |e| {
            let b0 = linalg::direct_sum(e.block(0), e.block(1));
            AdjOp::new(&xm, &xm, vec![b0, e.block(0).clone()]).unwrap()
        });
        let x = Correspondence::new(phi, 1e-12).unwrap();
        let f = truncated_fock(&x, 3, 1e-9).unwrap();
        let (v, w) = (xm.random(&mut rng), xm.random(&mut rng));
        let tv = f.creation(&v);
        let tw = f.creation(&w);
        // T_x on the vacuum
        let aa = a.random(&mut rng);
        let vac = f.inject(0, &HilbertModule::trivial(&a).from_blocks(aa.blocks().to_vec()).unwrap());
        let out = f.extract(1, &tv.op.apply(&vac));
        assert!(out.dist(&v.right_mul(&aa)) < 1e-12);
        // top level is annihilated
        let top = f.inject(3, &f.level(3).random(&mut rng));
        assert!(tv.op.apply(&top).max_abs() < 1e-14);
        // T_v* T_w = left multiplication by ⟨v|w⟩ below the top
        let lhs = tv.adjoint().mul(&tw);
        let rhs = f.left_action(&v.ip(&w));
        assert!(f.window_residual(&lhs.sub(&rhs)) < 1e-12);
        // T_v* on elementary tensors
        let z = xm.random(&mut rng);
        let el = f.inject(2, &f.elementary(&[z.clone(), w.clone()]));
        let down = f.extract(1, &tv.adjoint().op.apply(&el));
        assert!(down.dist(&x.act(&v.ip(&z)).apply(&w)) < 1e-12);
    }

    #[test]
    fn example_covariance_failure() {
        let x = scalar_corr(2);
        let mut p0 = AdjOp::zero(x.module(), x.module());
        p0.block_mut(0)[(0, 0)] = cr(1.0);
        let (y, iota) = sub_correspondence(&x, &p0, 1e-12).unwrap();
        assert_eq!(y.dim(), 1);
        let ideal = covariance_ideal(&y, 1e-9).unwrap();
        assert!(ideal.is_full());
        let (ok, res) = check_covariance(&CorrMorphism::inclusion(&iota), &y, &x, 1e-9).unwrap();
        assert!(!ok);
        assert!((res - 1.0).abs() < 1e-12);
        let (ok, res) = check_covariance(&CorrMorphism::identity(&x), &x, &x, 1e-9).unwrap();
        assert!(ok && res < 1e-14);
        let f = truncated_fock(&x, 4, 1e-9).unwrap();
        let p = induced_fock_projection(&p0, &f, 1e-12).unwrap();
        let ranks: Vec<usize> = (0..=4).map(|n| linalg::rank(f.extract_op(n, &p.op).block(0), 1e-9)).collect();
        assert_eq!(ranks, vec![1, 1, 1, 1, 1]);
    }

    #[test]
    fn non_morphisms_are_rejected() {
        let x = scalar_corr(2);
        let mut bad = CorrMorphism::identity(&x);
        bad.psi *= cr(2.0);
        assert!(matches!(
            check_covariance(&bad, &x, &x, 1e-9),
            Err(Error::NotAMorphism { axiom: "inner product", .. })
        ));
    }

    #[test]
    fn projection_extremes() {
        let x = scalar_corr(2);
        let f = truncated_fock(&x, 3, 1e-9).unwrap();
        let id = induced_fock_projection(&AdjOp::identity(x.module()), &f, 1e-12).unwrap();
        assert!(id.op.dist(&AdjOp::identity(f.total())) < 1e-12);
        let zero = induced_fock_projection(&AdjOp::zero(x.module(), x.module()), &f, 1e-12).unwrap();
        assert!(zero.op.dist(&f.levels_up_to(0)) < 1e-12);
        let mut not_proj = AdjOp::identity(x.module());
        not_proj.block_mut(0)[(0, 1)] = cr(1.0);
        assert!(induced_fock_projection(&not_proj, &f, 1e-9).is_err());
    }

    #[test]
    fn expectation_is_idempotent_and_restricts_to_sub_fock() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = scalar_corr(3);
        let mut p0 = AdjOp::zero(x.module(), x.module());
        let u = linalg::random_unitary(&mut rng, 3);
        *p0.block_mut(0) = u.columns(0, 2) * u.columns(0, 2).adjoint();
        let f = truncated_fock(&x, 3, 1e-9).unwrap();
        let p = induced_fock_projection(&p0, &f, 1e-10).unwrap();
        let t = f.word(&[x.module().random(&mut rng), x.module().random(&mut rng)]).mul(&f.creation(&x.module().random(&mut rng)).adjoint());
        let once = fock_expectation(&f, &p, &t, 1e-9).unwrap();
        let twice = fock_expectation(&f, &p, &once, 1e-9).unwrap();
        assert!(once.op.dist(&twice.op) < 1e-12);

        // Ψ_P ∘ α = Id through the sub-Fock module of Y
        let (y, iota) = sub_correspondence(&x, &p0, 1e-10).unwrap();
        let fy = truncated_fock(&y, 3, 1e-9).unwrap();
        let w = fy.levelwise(&f, &iota);
        assert!((&w.adjoint() * &w).dist(&AdjOp::identity(fy.total())) < 1e-12);
        assert!((&w * &w.adjoint()).dist(&p.op) < 1e-12);
        let yv = y.module().random(&mut rng);
        let lhs = &(&w.adjoint() * &fock_expectation(&f, &p, &f.creation(&iota.apply(&yv)), 1e-9).unwrap().op) * &w;
        assert!(lhs.dist(&fy.creation(&yv).op) < 1e-12);
    }

    #[test]
    fn symmetric_subproduct_dimensions() {
        let s = SubproductSystem::symmetric(2, 5, 1e-9).unwrap();
        let dims: Vec<usize> = s.fibers().iter().map(Correspondence::dim).collect();
        assert_eq!(dims, vec![1, 2, 3, 4, 5, 6]);
        let f = truncated_fock(&s.fibers()[1], 5, 1e-9).unwrap();
        let p = subproduct_projection(&s, &f, 1e-9).unwrap();
        let ranks: Vec<usize> = (0..=5).map(|n| linalg::rank(f.extract_op(n, &p.op).block(0), 1e-9)).collect();
        assert_eq!(ranks, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn trivial_subproduct_is_identity() {
        let x = scalar_corr(2);
        let f = truncated_fock(&x, 3, 1e-9).unwrap();
        let fibers: Vec<Correspondence> = (0..=3)
            .map(|n| Correspondence::from_hom_unchecked(f.left_action_level(n).clone()))
            .collect();
        let mut inclusions = BTreeMap::new();
        for m in 1..3 {
            let t = TensorProduct::new(fibers[1].module(), fibers[m].phi(), 1e-9).unwrap();
            let dst = f.tensor(m + 1).unwrap();
            let lift = t.lift_to(dst, &AdjOp::identity(x.module()), &AdjOp::identity(f.level(m)));
            inclusions.insert((1, m), lift.adjoint());
        }
        let s = SubproductSystem::new(fibers, inclusions, 1e-9).unwrap();
        let p = subproduct_projection(&s, &f, 1e-9).unwrap();
        assert!(p.op.dist(&AdjOp::identity(f.total())) < 1e-10);
    }
}
