//! Gram-quotient engine: correspondences, balanced tensor products, the KSGNS
//! construction and unitary isomorphism testing.
//!
//! Every construction here starts from a family of generators `g` with
//! `g = g·e_{11}` in one coefficient block. The scalar form `⟨g_p|g_q⟩[0,0]`
//! determines the module-valued form, so the quotient by null vectors is a single
//! Hermitian eigenproblem per block and lands directly in canonical form.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgElem, Algebra};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, C64};
use crate::module::{self, AdjOp, HilbertModule, ModVec, OpMap};

/// A module with a left action by a *-homomorphism.
#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence {
    phi: OpMap,
}

impl Correspondence {
    /// Checks the *-homomorphism axioms within `tol`.
    pub fn new(phi: OpMap, tol: f64) -> Result<Self> {
        let residual = phi.homomorphism_residual();
        if residual > tol {
            return Err(Error::NotAHomomorphism { residual });
        }
        Ok(Self { phi })
    }

    /// Wraps a map whose multiplicativity is guaranteed by construction.
    pub fn from_hom_unchecked(phi: OpMap) -> Self {
        Self { phi }
    }

    /// `(Id, A_A)`.
    pub fn identity(alg: &Algebra) -> Self {
        Self { phi: OpMap::left_multiplication(alg) }
    }

    pub fn left_alg(&self) -> &Algebra {
        self.phi.domain()
    }

    pub fn module(&self) -> &HilbertModule {
        self.phi.module()
    }

    pub fn coeff(&self) -> &Algebra {
        self.phi.module().coeff()
    }

    pub fn phi(&self) -> &OpMap {
        &self.phi
    }

    pub fn act(&self, a: &AlgElem) -> AdjOp {
        self.phi.apply(a)
    }

    /// `φ(A)X = X`, which in finite dimensions means `φ(1) = Id`.
    pub fn is_nondegenerate(&self, tol: f64) -> bool {
        self.phi.unitality_residual() <= tol
    }

    pub fn dim(&self) -> usize {
        self.module().dim()
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        Ok(Self { phi: self.phi.direct_sum(&other.phi)? })
    }
}

/// A semi-inner-product space presented by generators `g` with `g = g·e^l_{11}`.
///
/// Generators living in block `l` are split into mutually orthogonal groups; each
/// group carries the scalar Gram matrix `[⟨g_p|g_q⟩_l[0,0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiInnerSpace {
    coeff: Algebra,
    groups: Vec<Vec<CMat>>,
}

impl SemiInnerSpace {
    pub fn new(coeff: &Algebra, groups: Vec<Vec<CMat>>) -> Result<Self> {
        if groups.len() != coeff.num_blocks() {
            return Err(Error::InvalidArgument("one group list per coefficient block".into()));
        }
        if groups.iter().flatten().any(|g| !g.is_square()) {
            return Err(Error::InvalidArgument("group grams must be square".into()));
        }
        Ok(Self { coeff: coeff.clone(), groups })
    }

    /// A single Gram matrix for each coefficient block.
    pub fn from_grams(coeff: &Algebra, grams: Vec<CMat>) -> Result<Self> {
        Self::new(coeff, grams.into_iter().map(|g| vec![g]).collect())
    }

    pub fn coeff(&self) -> &Algebra {
        &self.coeff
    }

    pub fn generator_count(&self, l: usize) -> usize {
        self.groups[l].iter().map(|g| g.nrows()).sum()
    }

    /// Full Gram matrix of block `l` (block diagonal over groups).
    pub fn gram(&self, l: usize) -> CMat {
        self.groups[l].iter().fold(CMat::zeros(0, 0), |acc, g| linalg::direct_sum(&acc, g))
    }
}

/// The quotient of a [`SemiInnerSpace`] by its null vectors.
///
/// Column `r` of `coords(l)` expresses the `r`-th orthonormal generator of block `l`
/// of the quotient module in terms of the raw generators.
#[derive(Clone, Debug, PartialEq)]
pub struct Quotient {
    module: HilbertModule,
    coords: Vec<CMat>,
    generators: Vec<usize>,
}

/// Quotient by null vectors, rank decided by `λ > tol·λ_max` in each block.
pub fn gram_quotient(space: &SemiInnerSpace, tol: f64) -> Result<Quotient> {
    let k = space.coeff.num_blocks();
    let mut mults = Vec::with_capacity(k);
    let mut coords = Vec::with_capacity(k);
    let mut generators = Vec::with_capacity(k);
    for l in 0..k {
        let eigs: Vec<(Vec<f64>, CMat)> = space.groups[l].iter().map(linalg::herm_eig).collect();
        let top = eigs
            .iter()
            .flat_map(|(v, _)| v.last().copied())
            .fold(0.0, f64::max);
        let bottom = eigs.iter().flat_map(|(v, _)| v.first().copied()).fold(0.0, f64::min);
        if bottom < -tol * top.max(1.0) {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: bottom });
        }
        let cutoff = tol * top;
        let total = space.generator_count(l);
        let kept: usize = eigs.iter().map(|(v, _)| v.iter().filter(|&&x| x > cutoff).count()).sum();
        let mut q = CMat::zeros(total, kept);
        let (mut row, mut col) = (0, 0);
        for (vals, vecs) in &eigs {
            for (i, &lam) in vals.iter().enumerate() {
                if lam > cutoff {
                    let scaled = vecs.column(i) * cr(lam.sqrt().recip());
                    q.view_mut((row, col), (vals.len(), 1)).copy_from(&scaled);
                    col += 1;
                }
            }
            row += vals.len();
        }
        mults.push(kept);
        coords.push(q);
        generators.push(total);
    }
    Ok(Quotient { module: HilbertModule::new(&space.coeff, mults)?, coords, generators })
}

impl Quotient {
    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn coords(&self, l: usize) -> &CMat {
        &self.coords[l]
    }

    /// The quotient of `z` from the values `S_l[p,c] = ⟨g_p|z⟩_l[0,c]`.
    pub fn embed(&self, pairings: Vec<CMat>) -> ModVec {
        let blocks = pairings
            .iter()
            .zip(&self.coords)
            .map(|(s, q)| q.adjoint() * s)
            .collect();
        self.module.from_blocks(blocks).expect("pairings conform to the generators")
    }

    /// The operator with kernels `K_l[p,q] = ⟨g'_p|T g_q⟩_l[0,0]` between two quotients.
    pub fn operator_to(&self, target: &Quotient, kernels: Vec<CMat>) -> AdjOp {
        let blocks = kernels
            .iter()
            .enumerate()
            .map(|(l, k)| target.coords[l].adjoint() * k * &self.coords[l])
            .collect();
        AdjOp::new(&self.module, &target.module, blocks).expect("kernels conform to the generators")
    }

    pub fn generator_count(&self, l: usize) -> usize {
        self.generators[l]
    }
}

/// A right module presented on a concrete space `V = ℂ^d`.
///
/// The inner product is `⟨v|w⟩_α = v* K_α w` for each basis coordinate `α` of the
/// coefficient algebra and the right action of the matrix unit `u_α` is the matrix
/// `R_α` acting on columns. Generators `R(E^l_{k1}) e_p` feed the Gram quotient, which
/// yields a canonical module `M` and a right-linear isometric map `V/null → M`.
#[derive(Clone, Debug)]
pub struct Realization {
    coeff: Algebra,
    kernel: Vec<CMat>,
    right: Vec<CMat>,
    gens: Vec<CMat>,
    quotient: Quotient,
}

impl Realization {
    pub fn new(coeff: &Algebra, kernel: Vec<CMat>, right: Vec<CMat>, tol: f64) -> Result<Self> {
        if kernel.len() != coeff.dim() || right.len() != coeff.dim() {
            return Err(Error::InvalidArgument("one kernel and one action matrix per basis unit".into()));
        }
        let d = kernel.first().map_or(0, CMat::nrows);
        if kernel.iter().chain(&right).any(|k| k.shape() != (d, d)) {
            return Err(Error::InvalidArgument("kernels and actions must be square of one size".into()));
        }
        let gens: Vec<CMat> = (0..coeff.num_blocks())
            .map(|l| {
                let n = coeff.block_dim(l);
                let mut g = CMat::zeros(d, n * d);
                for k in 0..n {
                    g.view_mut((0, k * d), (d, d)).copy_from(&right[coeff.basis_index(l, k, 0)]);
                }
                g
            })
            .collect();
        let grams = gens
            .iter()
            .enumerate()
            .map(|(l, g)| {
                let gram = g.adjoint() * &kernel[coeff.basis_index(l, 0, 0)] * g;
                linalg::hermitian_part(&gram)
            })
            .collect();
        let quotient = gram_quotient(&SemiInnerSpace::from_grams(coeff, grams)?, tol)?;
        Ok(Self { coeff: coeff.clone(), kernel, right, gens, quotient })
    }

    pub fn module(&self) -> &HilbertModule {
        self.quotient.module()
    }

    pub fn space_dim(&self) -> usize {
        self.kernel.first().map_or(0, CMat::nrows)
    }

    /// `⟨v|w⟩` computed in `V`.
    pub fn inner(&self, v: &DVector<C64>, w: &DVector<C64>) -> AlgElem {
        let coords: Vec<C64> = self.kernel.iter().map(|k| (v.adjoint() * k * w)[(0, 0)]).collect();
        self.coeff.from_coords(&coords)
    }

    /// `v·c` computed in `V`.
    pub fn right_act(&self, v: &DVector<C64>, c: &AlgElem) -> DVector<C64> {
        self.action_matrix(c) * v
    }

    /// The matrix of `v ↦ v·c`.
    pub fn action_matrix(&self, c: &AlgElem) -> CMat {
        let d = self.space_dim();
        c.coords()
            .iter()
            .zip(&self.right)
            .filter(|(z, _)| z.norm_sqr() != 0.0)
            .fold(CMat::zeros(d, d), |acc, (z, r)| acc + r * *z)
    }

    /// The image of `v` in the canonical module.
    pub fn embed(&self, v: &DVector<C64>) -> ModVec {
        let pairings = (0..self.coeff.num_blocks())
            .map(|l| {
                let n = self.coeff.block_dim(l);
                let mut cols = CMat::zeros(self.space_dim(), n);
                for c in 0..n {
                    cols.set_column(c, &(&self.kernel[self.coeff.basis_index(l, 0, c)] * v));
                }
                self.gens[l].adjoint() * cols
            })
            .collect();
        self.quotient.embed(pairings)
    }

    /// A vector of `V` whose image is `m`.
    pub fn lift(&self, m: &ModVec) -> DVector<C64> {
        let mut out = DVector::zeros(self.space_dim());
        for l in 0..self.coeff.num_blocks() {
            let canon = &self.gens[l] * self.quotient.coords(l);
            for t in 0..canon.ncols() {
                for c in 0..self.coeff.block_dim(l) {
                    let z = m.block(l)[(t, c)];
                    if z.norm_sqr() != 0.0 {
                        out += &self.right[self.coeff.basis_index(l, 0, c)] * canon.column(t) * z;
                    }
                }
            }
        }
        out
    }

    /// The operator induced by a right-linear `L: V → V'`.
    pub fn operator_to(&self, target: &Realization, l: &CMat) -> AdjOp {
        let kernels = (0..self.coeff.num_blocks())
            .map(|b| {
                target.gens[b].adjoint() * &target.kernel[self.coeff.basis_index(b, 0, 0)] * l * &self.gens[b]
            })
            .collect();
        self.quotient.operator_to(&target.quotient, kernels)
    }

    pub fn operator(&self, l: &CMat) -> AdjOp {
        self.operator_to(self, l)
    }
}

/// The interior tensor product `X ⊗_B Y` of a right `B`-module with a left `B`-action `ψ`.
#[derive(Clone, Debug)]
pub struct TensorProduct {
    x: HilbertModule,
    psi: OpMap,
    quotient: Quotient,
}

impl TensorProduct {
    /// Generators `x_{b,t} ⊗ e_{l,s}`; the `(b,t)` group of block `l` has Gram `ψ(E^b_{11})_l`.
    pub fn new(x: &HilbertModule, psi: &OpMap, tol: f64) -> Result<Self> {
        if x.coeff() != psi.domain() {
            return Err(Error::IncompatibleOperands(
                "the right coefficients of the first factor must act on the second".into(),
            ));
        }
        let y = psi.module();
        let b_alg = x.coeff();
        let groups = (0..y.mults().len())
            .map(|l| {
                let mut g = Vec::new();
                for b in 0..b_alg.num_blocks() {
                    let p = psi.unit(b, 0, 0).block(l).clone();
                    for _ in 0..x.mult(b) {
                        g.push(p.clone());
                    }
                }
                g
            })
            .collect();
        let space = SemiInnerSpace::new(y.coeff(), groups)?;
        let quotient = gram_quotient(&space, tol)?;
        Ok(Self { x: x.clone(), psi: psi.clone(), quotient })
    }

    pub fn module(&self) -> &HilbertModule {
        self.quotient.module()
    }

    pub fn left(&self) -> &HilbertModule {
        &self.x
    }

    pub fn right(&self) -> &HilbertModule {
        self.psi.module()
    }

    pub fn psi(&self) -> &OpMap {
        &self.psi
    }

    pub fn quotient(&self) -> &Quotient {
        &self.quotient
    }

    /// `x ⊗ y`.
    pub fn embed(&self, x: &ModVec, y: &ModVec) -> ModVec {
        assert_eq!(x.module(), &self.x, "left factor from a foreign module");
        assert_eq!(y.module(), self.psi.module(), "right factor from a foreign module");
        let ym = self.psi.module();
        let b_alg = self.x.coeff();
        let pairings = (0..ym.mults().len())
            .map(|l| {
                let ml = ym.mult(l);
                let nl = ym.coeff().block_dim(l);
                let mut s = CMat::zeros(self.quotient.generator_count(l), nl);
                let mut row = 0;
                for b in 0..b_alg.num_blocks() {
                    let nb = b_alg.block_dim(b);
                    let acted: Vec<CMat> =
                        (0..nb).map(|c| self.psi.unit(b, 0, c).block(l) * y.block(l)).collect();
                    for t in 0..self.x.mult(b) {
                        let mut rows = CMat::zeros(ml, nl);
                        for (c, a) in acted.iter().enumerate() {
                            let coef = x.block(b)[(t, c)];
                            if coef.norm_sqr() != 0.0 {
                                rows += a * coef;
                            }
                        }
                        s.view_mut((row, 0), (ml, nl)).copy_from(&rows);
                        row += ml;
                    }
                }
                s
            })
            .collect();
        self.quotient.embed(pairings)
    }

    /// The operator `y ↦ x ⊗ y` from the right factor into the tensor product.
    pub fn creation(&self, x: &ModVec) -> AdjOp {
        AdjOp::from_fn(self.psi.module(), self.module(), |y| self.embed(x, y))
    }

    /// `T ⊗ S` into `target`; `T` is right-linear and `S` intertwines the left actions.
    pub fn lift_to(&self, target: &TensorProduct, t: &AdjOp, s: &AdjOp) -> AdjOp {
        assert_eq!(t.source(), &self.x);
        assert_eq!(t.target(), &target.x);
        assert_eq!(s.source(), self.psi.module());
        assert_eq!(s.target(), target.psi.module());
        let b_alg = self.x.coeff();
        let kernels = (0..self.psi.module().mults().len())
            .map(|l| {
                let mut k = CMat::zeros(
                    target.quotient.generator_count(l),
                    self.quotient.generator_count(l),
                );
                let (mut r0, mut c0) = (0, 0);
                for b in 0..b_alg.num_blocks() {
                    let mid = target.psi.unit(b, 0, 0).block(l) * s.block(l);
                    let kb = linalg::kron(t.block(b), &mid);
                    k.view_mut((r0, c0), kb.shape()).copy_from(&kb);
                    r0 += kb.nrows();
                    c0 += kb.ncols();
                }
                k
            })
            .collect();
        self.quotient.operator_to(&target.quotient, kernels)
    }

    /// `T ⊗ S` on this tensor product.
    pub fn lift(&self, t: &AdjOp, s: &AdjOp) -> AdjOp {
        self.lift_to(self, t, s)
    }

    /// `a ↦ ρ(a) ⊗ Id` for a linear map `ρ` into the right-linear operators on the left factor.
    pub fn lift_map(&self, rho: &OpMap) -> OpMap {
        let id = AdjOp::identity(self.psi.module());
        let units = rho.units().iter().map(|u| self.lift(u, &id)).collect();
        OpMap::from_units(rho.domain(), self.module(), units).expect("lifted units conform")
    }
}

/// A balanced tensor product together with its correspondence structure.
#[derive(Clone, Debug)]
pub struct BalancedTensor {
    pub corr: Correspondence,
    pub product: TensorProduct,
}

/// `X ⊗_B Y` with left action `φ_X ⊗ Id`.
pub fn balanced_tensor(x: &Correspondence, y: &Correspondence, tol: f64) -> Result<BalancedTensor> {
    if x.coeff() != y.left_alg() {
        return Err(Error::IncompatibleOperands(format!(
            "middle algebras differ: {:?} vs {:?}",
            x.coeff().block_dims(),
            y.left_alg().block_dims()
        )));
    }
    let product = TensorProduct::new(x.module(), y.phi(), tol)?;
    let corr = Correspondence::from_hom_unchecked(product.lift_map(x.phi()));
    Ok(BalancedTensor { corr, product })
}

/// The KSGNS dilation `(π_ρ, A ⊗_ρ X)` of a completely positive `ρ: A → End_B(X)`.
#[derive(Clone, Debug)]
pub struct KSGNSResult {
    pub corr: Correspondence,
    pub v: AdjOp,
    rho: OpMap,
    quotient: Quotient,
}

/// Builds `A ⊗_ρ X` from generators `E^j_{ab} ⊗ e_{l,s}`; the `(j,a)` group of block `l`
/// has the Choi matrix `[ρ(E^j_{bd})_l]` as Gram matrix.
pub fn ksgns(rho: &OpMap, tol: f64) -> Result<KSGNSResult> {
    let a_alg = rho.domain();
    let x = rho.module();
    let choi: Vec<Vec<CMat>> = (0..x.mults().len())
        .map(|l| (0..a_alg.num_blocks()).map(|j| choi_block(rho, j, l)).collect())
        .collect();
    let groups: Vec<Vec<CMat>> = choi
        .iter()
        .map(|per_j| {
            let mut g = Vec::new();
            for (j, c) in per_j.iter().enumerate() {
                for _ in 0..a_alg.block_dim(j) {
                    g.push(c.clone());
                }
            }
            g
        })
        .collect();
    let space = SemiInnerSpace::new(x.coeff(), groups)?;
    let quotient = match gram_quotient(&space, tol) {
        Ok(q) => q,
        Err(Error::NotPositiveSemidefinite { min_eigenvalue }) => {
            let block = (0..a_alg.num_blocks())
                .find(|&j| {
                    choi.iter().any(|per_j| {
                        linalg::min_eigenvalue(&per_j[j]) <= min_eigenvalue + tol
                    })
                })
                .unwrap_or(0);
            return Err(Error::NotCompletelyPositive { block, min_eigenvalue });
        }
        Err(e) => return Err(e),
    };
    let m = quotient.module().clone();
    let units = a_alg
        .basis()
        .iter()
        .map(|u| {
            let kernels = (0..x.mults().len())
                .map(|l| {
                    let mut k = CMat::zeros(0, 0);
                    for j in 0..a_alg.num_blocks() {
                        k = linalg::direct_sum(&k, &linalg::kron(u.block(j), &choi[l][j]));
                    }
                    k
                })
                .collect();
            quotient.operator_to(&quotient, kernels)
        })
        .collect();
    let pi = OpMap::from_units(a_alg, &m, units)?;
    let mut out = KSGNSResult {
        corr: Correspondence::from_hom_unchecked(pi),
        v: AdjOp::zero(x, &m),
        rho: rho.clone(),
        quotient,
    };
    let one = a_alg.one();
    out.v = AdjOp::from_fn(x, &m, |xv| out.embed(&one, xv));
    Ok(out)
}

/// `[ρ(E^j_{bd})_l[s,s']]` indexed by `(b,s), (d,s')`.
pub fn choi_block(rho: &OpMap, j: usize, l: usize) -> CMat {
    let n = rho.domain().block_dim(j);
    let m = rho.module().mult(l);
    let mut c = CMat::zeros(n * m, n * m);
    for b in 0..n {
        for d in 0..n {
            c.view_mut((b * m, d * m), (m, m)).copy_from(rho.unit(j, b, d).block(l));
        }
    }
    c
}

impl KSGNSResult {
    pub fn module(&self) -> &HilbertModule {
        self.quotient.module()
    }

    pub fn quotient(&self) -> &Quotient {
        &self.quotient
    }

    /// `a ⊗ x` in `A ⊗_ρ X`.
    pub fn embed(&self, a: &AlgElem, x: &ModVec) -> ModVec {
        let a_alg = self.rho.domain();
        let xm = self.rho.module();
        let pairings = (0..xm.mults().len())
            .map(|l| {
                let ml = xm.mult(l);
                let nl = xm.coeff().block_dim(l);
                let mut s = CMat::zeros(self.quotient.generator_count(l), nl);
                let mut row = 0;
                for j in 0..a_alg.num_blocks() {
                    let n = a_alg.block_dim(j);
                    for p in 0..n {
                        for b in 0..n {
                            // ρ(E_{bp} a) x, with E_{bp} a = Σ_c a[p,c] E_{bc}
                            let mut acc = CMat::zeros(ml, nl);
                            for c in 0..n {
                                let coef = a.block(j)[(p, c)];
                                if coef.norm_sqr() != 0.0 {
                                    acc += self.rho.unit(j, b, c).block(l) * x.block(l) * coef;
                                }
                            }
                            s.view_mut((row, 0), (ml, nl)).copy_from(&acc);
                            row += ml;
                        }
                    }
                }
                s
            })
            .collect();
        self.quotient.embed(pairings)
    }

    /// `max_u ‖ρ(u) − V*π(u)V‖` over matrix units.
    pub fn dilation_residual(&self) -> f64 {
        let vs = self.v.adjoint();
        self.rho
            .units()
            .iter()
            .zip(self.corr.phi().units())
            .map(|(r, p)| r.dist(&(&(&vs * p) * &self.v)))
            .fold(0.0, f64::max)
    }

    /// Whether `π(A)V(X)` generates the whole module, by exact rank per block.
    pub fn is_dense(&self, tol: f64) -> bool {
        let xm = self.rho.module();
        let frame = xm.standard_frame();
        let mut vectors = Vec::new();
        for p in self.corr.phi().units() {
            for u in &frame {
                vectors.push(p.apply(&self.v.apply(u)));
            }
        }
        let ranks = module::module_span_ranks(self.module(), &vectors, tol);
        ranks == self.module().mults()
    }
}

/// Searches for a unitary `U: X → Y` with `U φ_X(a) U* = φ_Y(a)`.
///
/// When both left actions are *-homomorphisms the decision is made by comparing
/// multiplicities of irreducible summands and `U` is assembled from matrix units.
/// For completely positive actions a generic intertwiner is found by a null-space
/// computation and replaced by its polar part.
pub fn find_unitary_iso(x: &OpMap, y: &OpMap, tol: f64) -> Option<AdjOp> {
    if x.domain() != y.domain() || x.module() != y.module() {
        return None;
    }
    let hom_tol = tol.max(1e-9);
    let u = if x.homomorphism_residual() <= hom_tol && y.homomorphism_residual() <= hom_tol {
        hom_iso(x, y, tol)?
    } else {
        cp_iso(x, y, tol)?
    };
    let unitary = (&u.adjoint() * &u).dist(&AdjOp::identity(x.module()))
        + (&u * &u.adjoint()).dist(&AdjOp::identity(y.module()));
    let scale = x.units().iter().map(AdjOp::norm).fold(1.0, f64::max);
    let intertwines = x
        .units()
        .iter()
        .zip(y.units())
        .map(|(a, b)| (&(&u * a) * &u.adjoint()).dist(b))
        .fold(0.0, f64::max);
    let check = 1e3 * tol.max(1e-12);
    (unitary <= check && intertwines <= check * scale).then_some(u)
}

/// Convenience wrapper for correspondences.
pub fn find_correspondence_iso(x: &Correspondence, y: &Correspondence, tol: f64) -> Option<AdjOp> {
    find_unitary_iso(x.phi(), y.phi(), tol)
}

/// Orthonormal basis adapted to a *-representation on block `l`: columns ordered by
/// (algebra block, copy, row index) followed by the degenerate part.
pub(crate) fn adapted_basis(phi: &OpMap, l: usize, tol: f64) -> Option<(Vec<usize>, CMat)> {
    let alg = phi.domain();
    let m = phi.module().mult(l);
    let mut signature = Vec::new();
    let mut cols: Vec<DVector<C64>> = Vec::new();
    for j in 0..alg.num_blocks() {
        let p = phi.unit(j, 0, 0).block(l);
        let (vals, vecs) = linalg::herm_eig(p);
        let range: Vec<usize> = (0..m).filter(|&i| vals[i] > 0.5).collect();
        if vals.iter().any(|&v| v > tol.sqrt() && v < 0.5) {
            return None;
        }
        signature.push(range.len());
        for &i in &range {
            let v = vecs.column(i).into_owned();
            for a in 0..alg.block_dim(j) {
                cols.push(phi.unit(j, a, 0).block(l) * &v);
            }
        }
    }
    let mut w = CMat::zeros(m, m);
    for (i, c) in cols.iter().enumerate() {
        if i >= m {
            return None;
        }
        w.set_column(i, c);
    }
    let used = cols.len();
    let one_perp = CMat::identity(m, m) - phi.apply(&alg.one()).block(l);
    let (vals, vecs) = linalg::herm_eig(&one_perp);
    let degenerate: Vec<usize> = (0..m).filter(|&i| vals[i] > 0.5).collect();
    if used + degenerate.len() != m {
        return None;
    }
    for (k, &i) in degenerate.iter().enumerate() {
        w.set_column(used + k, &vecs.column(i));
    }
    signature.push(degenerate.len());
    Some((signature, w))
}

fn hom_iso(x: &OpMap, y: &OpMap, tol: f64) -> Option<AdjOp> {
    let mut blocks = Vec::new();
    for l in 0..x.module().mults().len() {
        let (sx, wx) = adapted_basis(x, l, tol)?;
        let (sy, wy) = adapted_basis(y, l, tol)?;
        if sx != sy {
            return None;
        }
        blocks.push(wy * wx.adjoint());
    }
    AdjOp::new(x.module(), y.module(), blocks).ok()
}

fn cp_iso(x: &OpMap, y: &OpMap, tol: f64) -> Option<AdjOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut blocks = Vec::new();
    for l in 0..x.module().mults().len() {
        let m = x.module().mult(l);
        if m == 0 {
            blocks.push(CMat::zeros(0, 0));
            continue;
        }
        let id = CMat::identity(m, m);
        let mut gram = CMat::zeros(m * m, m * m);
        for (a, b) in x.units().iter().zip(y.units()) {
            let r = a.block(l);
            let s = b.block(l);
            let op = linalg::kron(&r.transpose(), &id) - linalg::kron(&id, s);
            gram += op.adjoint() * &op;
        }
        let scale = linalg::op_norm(&gram).max(1.0);
        let null = linalg::null_space(&gram, tol.max(1e-12) * 1e2 * scale);
        if null.ncols() == 0 {
            return None;
        }
        let coeffs = linalg::random_cmat(&mut rng, null.ncols(), 1);
        let v = null * coeffs;
        let t = CMat::from_column_slice(m, m, v.as_slice());
        if linalg::rank(&t, 1e-8) < m {
            return None;
        }
        blocks.push(linalg::polar_unitary(&t));
    }
    AdjOp::new(x.module(), y.module(), blocks).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::make_algebra;

    fn scalar_module(n: usize) -> HilbertModule {
        HilbertModule::new(&make_algebra(&[1]).unwrap(), vec![n]).unwrap()
    }

    #[test]
    fn quotient_of_identity_and_zero() {
        let c = make_algebra(&[1]).unwrap();
        let s = SemiInnerSpace::from_grams(&c, vec![CMat::identity(3, 3)]).unwrap();
        let q = gram_quotient(&s, 1e-9).unwrap();
        assert_eq!(q.module().mults(), &[3]);
        assert!(linalg::op_norm(&(q.coords(0).adjoint() * q.coords(0) - CMat::identity(3, 3))) < 1e-12);

        let z = SemiInnerSpace::from_grams(&c, vec![CMat::zeros(4, 4)]).unwrap();
        assert_eq!(gram_quotient(&z, 1e-9).unwrap().module().dim(), 0);

        let bad = SemiInnerSpace::from_grams(&c, vec![CMat::from_diagonal_element(1, 1, cr(-1.0))]);
        assert!(matches!(
            gram_quotient(&bad.unwrap(), 1e-9),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn gns_of_point_evaluation_is_one_dimensional() {
        let a = make_algebra(&[1, 1]).unwrap();
        let c1 = scalar_module(1);
        let rho = OpMap::from_fn(&a, &c1, |x| {
            AdjOp::new(&c1, &c1, vec![x.block(0).clone()]).unwrap()
        });
        let k = ksgns(&rho, 1e-9).unwrap();
        assert_eq!(k.module().dim(), 1);
        assert!(k.dilation_residual() < 1e-12);
    }

    #[test]
    fn gns_of_trace_state_on_m2_has_dimension_four() {
        let a = make_algebra(&[2]).unwrap();
        let c1 = scalar_module(1);
        let rho = OpMap::from_fn(&a, &c1, |x| {
            let tr = x.block(0).trace() * cr(0.5);
            AdjOp::new(&c1, &c1, vec![CMat::from_element(1, 1, tr)]).unwrap()
        });
        let k = ksgns(&rho, 1e-9).unwrap();
        assert_eq!(k.module().dim(), 4);
        assert!(k.dilation_residual() < 1e-12);
        assert!(k.is_dense(1e-9));
    }

    #[test]
    fn ksgns_of_zero_map_is_zero() {
        let a = make_algebra(&[2, 1]).unwrap();
        let x = HilbertModule::new(&make_algebra(&[1, 2]).unwrap(), vec![2, 1]).unwrap();
        let k = ksgns(&OpMap::zero(&a, &x), 1e-9).unwrap();
        assert_eq!(k.module().dim(), 0);
    }

    #[test]
    fn transpose_is_rejected_by_ksgns() {
        let a = make_algebra(&[2]).unwrap();
        let x = HilbertModule::new(&make_algebra(&[1]).unwrap(), vec![2]).unwrap();
        let rho = OpMap::from_fn(&a, &x, |e| AdjOp::new(&x, &x, vec![e.block(0).transpose()]).unwrap());
        assert!(matches!(ksgns(&rho, 1e-9), Err(Error::NotCompletelyPositive { .. })));
    }

    #[test]
    fn ksgns_of_homomorphism_is_isometric_and_identity() {
        let a = make_algebra(&[2, 1]).unwrap();
        let b = make_algebra(&[1, 2]).unwrap();
        let x = HilbertModule::new(&b, vec![3, 4]).unwrap();
        // a ↦ diag(a_0, a_1) on block 0 and diag(a_0, a_1, a_1) on block 1
        let phi = OpMap::from_fn(&a, &x, |e| {
            let d0 = linalg::direct_sum(e.block(0), e.block(1));
            let d1 = linalg::direct_sum(&d0, e.block(1));
            AdjOp::new(&x, &x, vec![d0, d1]).unwrap()
        });
        let corr = Correspondence::new(phi.clone(), 1e-12).unwrap();
        let k = ksgns(&phi, 1e-9).unwrap();
        assert!((&k.v.adjoint() * &k.v).dist(&AdjOp::identity(&x)) < 1e-12);
        assert!(find_correspondence_iso(&k.corr, &corr, 1e-9).is_some());
    }

    #[test]
    fn scalar_tensor_dimensions() {
        let c = make_algebra(&[1]).unwrap();
        for (n, m) in [(1, 1), (2, 3), (4, 2)] {
            let xn = Correspondence::new(
                OpMap::from_fn(&c, &scalar_module(n), |e| AdjOp::identity(&scalar_module(n)).scale(e.block(0)[(0, 0)])),
                1e-12,
            )
            .unwrap();
            let ym = Correspondence::new(
                OpMap::from_fn(&c, &scalar_module(m), |e| AdjOp::identity(&scalar_module(m)).scale(e.block(0)[(0, 0)])),
                1e-12,
            )
            .unwrap();
            assert_eq!(balanced_tensor(&xn, &ym, 1e-9).unwrap().corr.dim(), n * m);
        }
    }

    #[test]
    fn tensor_with_identity_is_isomorphic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = make_algebra(&[2, 1]).unwrap();
        let x = HilbertModule::new(&make_algebra(&[1, 2]).unwrap(), vec![3, 2]).unwrap();
        let phi = OpMap::from_fn(&a, &x, |e| {
            AdjOp::new(&x, &x, vec![linalg::direct_sum(e.block(0), e.block(1)), e.block(0).clone()]).unwrap()
        });
        let u = module::random_unitary(&mut rng, &x);
        let corr = Correspondence::new(phi.conjugate_by(&u), 1e-10).unwrap();
        let t = balanced_tensor(&corr, &Correspondence::identity(corr.coeff()), 1e-9).unwrap();
        assert_eq!(t.corr.module(), corr.module());
        assert!(find_correspondence_iso(&t.corr, &corr, 1e-9).is_some());
        let left = balanced_tensor(&Correspondence::identity(&a), &corr, 1e-9).unwrap();
        assert!(find_correspondence_iso(&left.corr, &corr, 1e-9).is_some());

        // the tensor inner product formula on random pairs
        for _ in 0..20 {
            let (x1, x2) = (corr.module().random(&mut rng), corr.module().random(&mut rng));
            let b = corr.coeff();
            let id = Correspondence::identity(b);
            let (y1, y2) = (id.module().random(&mut rng), id.module().random(&mut rng));
            let lhs = t.product.embed(&x1, &y1).ip(&t.product.embed(&x2, &y2));
            let rhs = y1.ip(&id.act(&x1.ip(&x2)).apply(&y2));
            assert!(lhs.dist(&rhs) < 1e-10);
        }
    }

    #[test]
    fn iso_rejects_different_signatures() {
        let a = make_algebra(&[1, 1]).unwrap();
        let x = scalar_module(2);
        let diag = |p: usize, q: usize| {
            let x = x.clone();
            OpMap::from_fn(&a, &x.clone(), move |e| {
                let mut d = CMat::zeros(2, 2);
                d[(0, 0)] = e.block(p)[(0, 0)];
                d[(1, 1)] = e.block(q)[(0, 0)];
                AdjOp::new(&x, &x, vec![d]).unwrap()
            })
        };
        assert!(find_unitary_iso(&diag(0, 1), &diag(1, 0), 1e-9).is_some());
        assert!(find_unitary_iso(&diag(0, 0), &diag(0, 1), 1e-9).is_none());
        let c3 = scalar_module(3);
        let other = OpMap::zero(&a, &c3);
        assert!(find_unitary_iso(&diag(0, 1), &other, 1e-9).is_none());
        assert!(find_unitary_iso(&diag(0, 1), &diag(0, 1), 1e-9)
            .unwrap()
            .dist(&AdjOp::identity(&x))
            < 1e-9);
    }

    #[test]
    fn cp_iso_search_finds_conjugated_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = make_algebra(&[2]).unwrap();
        let x = scalar_module(3);
        let v = linalg::random_cmat(&mut rng, 2, 3);
        let rho = OpMap::from_fn(&a, &x, |e| AdjOp::new(&x, &x, vec![v.adjoint() * e.block(0) * &v]).unwrap());
        let u = module::random_unitary(&mut rng, &x);
        let sigma = rho.conjugate_by(&u);
        assert!(find_unitary_iso(&rho, &sigma, 1e-9).is_some());
        let w = linalg::random_cmat(&mut rng, 2, 3);
        let tau = OpMap::from_fn(&a, &x, |e| AdjOp::new(&x, &x, vec![w.adjoint() * e.block(0) * &w]).unwrap());
        assert!(find_unitary_iso(&rho, &tau, 1e-9).is_none());
    }
}
