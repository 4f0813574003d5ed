//! Bi-Hilbertian bimodules of finite index and conjugation of correspondences.
//!
//! A left inner product on `F` is stored as matrices `L_α` on flat coordinates with
//! `_A⟨f|g⟩_α = g* L_α f`. The compacts `F ⊗_B F*` are realized as `End_B(F)` with
//! `⟨S|T⟩_A = Υ(S*T)`, and `F*` as the complex conjugate space of `F`.
//!
//! The ambient module `F ⊗ F_{F*XF} ⊗ F*` is assembled in the re-associated form
//! `K_0 = E`, `K_n = E ⊗_A (X ⊗_A K_{n−1})` with `E = F ⊗_B F*`; level one is
//! compared with `F ⊗_B ((F*XF) ⊗_B F*)` by an explicit unitary.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgElem, Algebra};
use crate::error::{Error, Result};
use crate::fock::{FockOp, TruncFock};
use crate::linalg::{self, cr, CMat, C64, ONE};
use crate::module::{self, AdjOp, Graded, HilbertModule, ModVec, OpMap};
use crate::tensor::{adapted_basis, Correspondence, Realization, TensorProduct};

/// Residuals of the bi-Hilbertian axioms and the trace-norm equivalence constants
/// `c·Tr⟨f|f⟩_B ≤ Tr _A⟨f|f⟩ ≤ C·Tr⟨f|f⟩_B`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AxiomResiduals {
    pub homomorphism: f64,
    pub sesquilinearity: f64,
    pub hermitian: f64,
    pub left_linearity: f64,
    pub right_adjointability: f64,
    pub min_weight: f64,
    pub norm_lower: f64,
    pub norm_upper: f64,
}

/// A correspondence `_A F_B` with a checked left `A`-valued inner product.
#[derive(Clone, Debug)]
pub struct BiHilbModule {
    corr: Correspondence,
    left: Vec<CMat>,
    axioms: AxiomResiduals,
    tol: f64,
}

/// Right Watatani index data.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexData {
    pub ebeta: AlgElem,
    pub ebeta_inv_sqrt: Option<AlgElem>,
    pub regular: bool,
    /// `‖e^β − e^β'‖` for a second, randomized frame.
    pub frame_residual: f64,
    pub centrality_residual: f64,
    pub min_eigenvalue: f64,
    /// `Σ_k ⟨ũ_k|ũ_k⟩_B` over a left frame.
    pub left_index: Option<AlgElem>,
}

fn unit_vector(d: usize, p: usize) -> DVector<C64> {
    let mut e = DVector::zeros(d);
    e[p] = ONE;
    e
}

/// The matrix of a complex-linear map on flat coordinates.
pub fn flat_matrix(x: &HilbertModule, f: impl Fn(&ModVec) -> ModVec) -> CMat {
    let d = x.dim();
    let mut out = CMat::zeros(d, d);
    for p in 0..d {
        out.set_column(p, &x.flatten(&f(&x.unflatten(&unit_vector(d, p)))));
    }
    out
}

/// `Σ_l m_l²`, the dimension of `End_B(X)`.
pub fn end_dim(x: &HilbertModule) -> usize {
    x.mults().iter().map(|m| m * m).sum()
}

pub fn end_flatten(t: &AdjOp) -> DVector<C64> {
    let x = t.source();
    DVector::from_iterator(
        end_dim(x),
        t.blocks().iter().flat_map(|b| b.transpose().iter().copied().collect::<Vec<_>>()),
    )
}

pub fn end_unflatten(x: &HilbertModule, v: &DVector<C64>) -> AdjOp {
    let mut i = 0;
    let blocks = x
        .mults()
        .iter()
        .map(|&m| {
            let b = CMat::from_fn(m, m, |r, c| v[i + r * m + c]);
            i += m * m;
            b
        })
        .collect();
    AdjOp::new(x, x, blocks).expect("square blocks")
}

fn end_basis(x: &HilbertModule) -> Vec<AdjOp> {
    let d = end_dim(x);
    (0..d).map(|p| end_unflatten(x, &unit_vector(d, p))).collect()
}

/// The matrix of `T ↦ f(T)` on flattened `End_B(X)`.
fn end_matrix(x: &HilbertModule, f: impl Fn(&AdjOp) -> AdjOp) -> CMat {
    let basis = end_basis(x);
    let mut out = CMat::zeros(basis.len(), basis.len());
    for (p, t) in basis.iter().enumerate() {
        out.set_column(p, &end_flatten(&f(t)));
    }
    out
}

fn conj_vec(v: &DVector<C64>) -> DVector<C64> {
    v.map(|z| z.conj())
}

/// Builds a bi-Hilbertian bimodule from a left inner product and checks the axioms.
///
/// The form is sampled on the standard basis; the sampled form must agree with
/// `left_inner` on random pairs (sesquilinearity). Positivity is decided exactly:
/// an `A`-bilinear `Υ` is `Υ(T)_j = Σ_l Tr_copies(T_{jj}(ω_{jl} ⊗ 1))` in a basis
/// adapted to `φ`, and it is positive iff every weight `ω_{jl}` is.
pub fn make_bihilb(
    corr: &Correspondence,
    left_inner: impl Fn(&ModVec, &ModVec) -> AlgElem,
    tol: f64,
) -> Result<BiHilbModule> {
    let x = corr.module();
    let a = corr.left_alg();
    let d = x.dim();
    let basis: Vec<ModVec> = (0..d).map(|p| x.unflatten(&unit_vector(d, p))).collect();
    let mut left = vec![CMat::zeros(d, d); a.dim()];
    for (p, f) in basis.iter().enumerate() {
        for (q, g) in basis.iter().enumerate() {
            for (alpha, c) in left_inner(f, g).coords().into_iter().enumerate() {
                left[alpha][(q, p)] = c;
            }
        }
    }
    let mut out = BiHilbModule { corr: corr.clone(), left, axioms: AxiomResiduals::default(), tol };
    let scale = out.left.iter().map(linalg::op_norm).fold(1.0, f64::max);
    let fail = |axiom: &'static str, residual: f64| Error::NotBihilbertian { axiom, residual };

    let hom = corr.phi().homomorphism_residual();
    out.axioms.homomorphism = hom;
    if hom > tol {
        return Err(fail("left action is a *-homomorphism", hom));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xb1);
    let mut ses: f64 = 0.0;
    for _ in 0..3 {
        let f = x.random(&mut rng);
        let g = x.random(&mut rng);
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let fg = &f.scale(c) + &g;
        ses = ses.max(left_inner(&f, &g).dist(&out.left_inner(&f, &g)));
        ses = ses.max(left_inner(&fg, &g).dist(&out.left_inner(&fg, &g)));
    }
    out.axioms.sesquilinearity = ses;
    if ses > tol * scale {
        return Err(fail("sesquilinearity", ses));
    }

    let mut herm: f64 = 0.0;
    for alpha in 0..a.dim() {
        let (j, k, l) = a.basis_triple(alpha);
        let mirror = &out.left[a.basis_index(j, l, k)];
        herm = herm.max(linalg::max_abs(&(&out.left[alpha] - mirror.adjoint())));
    }
    out.axioms.hermitian = herm;
    if herm > tol * scale {
        return Err(fail("hermitian symmetry", herm));
    }

    let mut lin: f64 = 0.0;
    for u in 0..a.dim() {
        let (j, k, l) = a.basis_triple(u);
        let phi_u = corr.phi().units()[u].to_linear_matrix();
        for alpha in 0..a.dim() {
            let (j2, k2, l2) = a.basis_triple(alpha);
            let lhs = &out.left[alpha] * &phi_u;
            let rhs = if j2 == j && k2 == k {
                out.left[a.basis_index(j, l, l2)].clone()
            } else {
                CMat::zeros(d, d)
            };
            lin = lin.max(linalg::max_abs(&(lhs - rhs)));
        }
    }
    out.axioms.left_linearity = lin;
    if lin > tol * scale {
        return Err(fail("left A-linearity", lin));
    }

    let b = corr.coeff();
    let mut adj: f64 = 0.0;
    for v in b.basis() {
        let r = flat_matrix(x, |f| f.right_mul(&v));
        let rs = flat_matrix(x, |f| f.right_mul(&v.adjoint()));
        for l in &out.left {
            adj = adj.max(linalg::max_abs(&(l * &r - rs.adjoint() * l)));
        }
    }
    out.axioms.right_adjointability = adj;
    if adj > tol * scale {
        return Err(fail("right action adjointable for the left inner product", adj));
    }

    let weights = out.weights().ok_or(fail("left action has a representable decomposition", f64::NAN))?;
    let min_weight = weights
        .iter()
        .flatten()
        .filter(|w| w.nrows() > 0)
        .map(|w| linalg::min_eigenvalue(&linalg::hermitian_part(w)))
        .fold(f64::INFINITY, f64::min);
    out.axioms.min_weight = if min_weight.is_finite() { min_weight } else { 0.0 };
    if min_weight < -tol * scale {
        return Err(fail("positivity", -min_weight));
    }

    let mut q = CMat::zeros(d, d);
    for j in 0..a.num_blocks() {
        for k in 0..a.block_dim(j) {
            q += &out.left[a.basis_index(j, k, k)];
        }
    }
    let (vals, _) = linalg::herm_eig(&linalg::hermitian_part(&q));
    let (lo, hi) = (vals.first().copied().unwrap_or(0.0), vals.last().copied().unwrap_or(0.0));
    out.axioms.norm_lower = lo;
    out.axioms.norm_upper = hi;
    if d > 0 && lo <= tol * hi.max(1.0) {
        return Err(fail("left and right norms equivalent", lo));
    }
    Ok(out)
}

impl BiHilbModule {
    /// The left inner product `Υ_ω(Θ_{f,g})` given by weights `ω[j][l]` of size
    /// (copies of `M_{n_j}` in block `l`).
    pub fn from_weights(corr: &Correspondence, weights: &[Vec<CMat>], tol: f64) -> Result<Self> {
        let a = corr.left_alg().clone();
        let x = corr.module();
        let bases = adapted_bases(corr, tol)?;
        for (j, row) in weights.iter().enumerate() {
            for (l, w) in row.iter().enumerate() {
                if w.nrows() != bases[l].0[j] || !w.is_square() {
                    return Err(Error::InvalidArgument(format!(
                        "weight ({j},{l}) must be {0}x{0}",
                        bases[l].0[j]
                    )));
                }
            }
        }
        if weights.len() != a.num_blocks() || weights.iter().any(|r| r.len() != x.mults().len()) {
            return Err(Error::InvalidArgument("one weight per (algebra block, module block)".into()));
        }
        let ups = move |blocks: &[CMat]| weighted_trace(&a, &bases, weights, blocks);
        make_bihilb(
            corr,
            |f, g| {
                let theta: Vec<CMat> = f.blocks().iter().zip(g.blocks()).map(|(p, q)| p * q.adjoint()).collect();
                ups(&theta)
            },
            tol,
        )
    }

    /// Unit weights: the left inner product induced by the trace on each multiplicity space.
    pub fn standard(corr: &Correspondence, tol: f64) -> Result<Self> {
        let bases = adapted_bases(corr, tol)?;
        let weights: Vec<Vec<CMat>> = (0..corr.left_alg().num_blocks())
            .map(|j| bases.iter().map(|(sig, _)| CMat::identity(sig[j], sig[j])).collect())
            .collect();
        Self::from_weights(corr, &weights, tol)
    }

    pub fn corr(&self) -> &Correspondence {
        &self.corr
    }

    pub fn module(&self) -> &HilbertModule {
        self.corr.module()
    }

    pub fn left_alg(&self) -> &Algebra {
        self.corr.left_alg()
    }

    pub fn coeff(&self) -> &Algebra {
        self.corr.coeff()
    }

    pub fn axioms(&self) -> &AxiomResiduals {
        &self.axioms
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The matrices `L_α` with `_A⟨f|g⟩_α = g* L_α f`.
    pub fn left_kernel(&self) -> &[CMat] {
        &self.left
    }

    /// `_A⟨f|g⟩`.
    pub fn left_inner(&self, f: &ModVec, g: &ModVec) -> AlgElem {
        let x = self.module();
        let (fv, gv) = (x.flatten(f), x.flatten(g));
        let coords: Vec<C64> = self.left.iter().map(|l| (gv.adjoint() * l * &fv)[(0, 0)]).collect();
        self.left_alg().from_coords(&coords)
    }

    /// `Υ(T) = Σ_i _A⟨T u_i|u_i⟩` over the standard frame.
    pub fn upsilon(&self, t: &AdjOp) -> AlgElem {
        self.module()
            .standard_frame()
            .iter()
            .fold(self.left_alg().zero(), |acc, u| &acc + &self.left_inner(&t.apply(u), u))
    }

    /// The weights `ω_{jl}` of `Υ`, read off in a basis adapted to the left action.
    pub fn weights(&self) -> Option<Vec<Vec<CMat>>> {
        let a = self.left_alg();
        let x = self.module();
        let bases = adapted_bases(&self.corr, self.tol).ok()?;
        let mut out = vec![Vec::with_capacity(x.mults().len()); a.num_blocks()];
        for (l, (sig, w)) in bases.iter().enumerate() {
            let mut off = 0;
            for j in 0..a.num_blocks() {
                let (k, n) = (sig[j], a.block_dim(j));
                let mut om = CMat::zeros(k, k);
                for c in 0..k {
                    for c2 in 0..k {
                        let mut t = AdjOp::zero(x, x);
                        let wc = w.column(off + c * n);
                        let wc2 = w.column(off + c2 * n);
                        *t.block_mut(l) = wc * wc2.adjoint();
                        om[(c2, c)] = self.upsilon(&t).block(j)[(0, 0)];
                    }
                }
                out[j].push(om);
                off += k * n;
            }
        }
        Some(out)
    }

    /// The conjugate module `F*` over `A` with its left `B`-action.
    pub fn conjugate(&self) -> Result<ConjugateBimodule> {
        let x = self.module();
        let a = self.left_alg();
        let kernel = self.left.iter().map(|l| l.transpose()).collect();
        let right = a
            .basis()
            .iter()
            .map(|u| self.corr.act(&u.adjoint()).to_linear_matrix().map(|z| z.conj()))
            .collect();
        let real = Realization::new(a, kernel, right, self.tol)?;
        let b = self.coeff();
        let units = b
            .basis()
            .iter()
            .map(|v| {
                let r = flat_matrix(x, |f| f.right_mul(&v.adjoint())).map(|z| z.conj());
                real.operator(&r)
            })
            .collect();
        let left = OpMap::from_units(b, real.module(), units)?;
        Ok(ConjugateBimodule { real, left, base: x.clone() })
    }

    /// Regularity witnesses: index invertible, left action injective, left inner product full.
    pub fn regularity_witnesses(&self) -> [bool; 3] {
        let idx = watatani_index(self);
        let injective = self.corr.phi().units().iter().all(|u| u.norm() > 0.5);
        let d = self.module().dim();
        let a = self.left_alg();
        let mut span = CMat::zeros(a.dim(), d * d);
        for (alpha, l) in self.left.iter().enumerate() {
            for (i, z) in l.iter().enumerate() {
                span[(alpha, i)] = *z;
            }
        }
        let full = linalg::rank(&span, self.tol.max(1e-12)) == a.dim();
        [idx.regular, injective, full]
    }
}

fn adapted_bases(corr: &Correspondence, tol: f64) -> Result<Vec<(Vec<usize>, CMat)>> {
    (0..corr.module().mults().len())
        .map(|l| {
            adapted_basis(corr.phi(), l, tol).ok_or(Error::NotAHomomorphism {
                residual: corr.phi().homomorphism_residual(),
            })
        })
        .collect()
}

/// `Υ_ω(T)_j = Σ_l Σ_{c,c'} S_l[(c,a),(c',a')] ω_{jl}[c',c]` with `S_l = W_l* T_l W_l`.
fn weighted_trace(a: &Algebra, bases: &[(Vec<usize>, CMat)], weights: &[Vec<CMat>], t: &[CMat]) -> AlgElem {
    let mut blocks: Vec<CMat> = (0..a.num_blocks()).map(|j| CMat::zeros(a.block_dim(j), a.block_dim(j))).collect();
    for (l, (sig, w)) in bases.iter().enumerate() {
        let s = w.adjoint() * &t[l] * w;
        let mut off = 0;
        for j in 0..a.num_blocks() {
            let (k, n) = (sig[j], a.block_dim(j));
            for c in 0..k {
                for c2 in 0..k {
                    let om = weights[j][l][(c2, c)];
                    if om.norm_sqr() == 0.0 {
                        continue;
                    }
                    let sub = s.view((off + c * n, off + c2 * n), (n, n));
                    blocks[j] += sub * om;
                }
            }
            off += k * n;
        }
    }
    AlgElem::new(a, blocks).expect("algebra block shapes")
}

/// `F*` realized on the conjugate of `F`: the vector `v = conj(f)` stands for `f*`.
#[derive(Clone, Debug)]
pub struct ConjugateBimodule {
    pub real: Realization,
    /// `b·f* = (f b*)*`.
    pub left: OpMap,
    base: HilbertModule,
}

impl ConjugateBimodule {
    pub fn module(&self) -> &HilbertModule {
        self.real.module()
    }

    /// `f*`.
    pub fn star(&self, f: &ModVec) -> ModVec {
        self.real.embed(&conj_vec(&self.base.flatten(f)))
    }

    /// The vector `f` with `f* = m`.
    pub fn unstar(&self, m: &ModVec) -> ModVec {
        self.base.unflatten(&conj_vec(&self.real.lift(m)))
    }

    /// `(F*, B-action)` as a `B–A` correspondence.
    pub fn correspondence(&self) -> Correspondence {
        Correspondence::from_hom_unchecked(self.left.clone())
    }
}

/// `e^β = Σ_i _A⟨u_i|u_i⟩` with frame independence, centrality and regularity data.
pub fn watatani_index(f: &BiHilbModule) -> IndexData {
    let x = f.module();
    let a = f.left_alg();
    let frame = x.standard_frame();
    let ebeta = frame.iter().fold(a.zero(), |acc, u| &acc + &f.left_inner(u, u));
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d);
    let u = module::random_unitary(&mut rng, x);
    let half = cr(std::f64::consts::FRAC_1_SQRT_2);
    let second: Vec<ModVec> = frame
        .iter()
        .map(|v| v.scale(half))
        .chain(frame.iter().map(|v| u.apply(v).scale(half)))
        .collect();
    let ebeta2 = second.iter().fold(a.zero(), |acc, v| &acc + &f.left_inner(v, v));
    let (min_eigenvalue, _) = ebeta.min_eigenvalue();
    let top = ebeta.norm().max(1.0);
    let regular = ebeta.hermitian_residual() <= f.tol * top && min_eigenvalue > f.tol * top;
    let ebeta_inv_sqrt = regular.then(|| linalg_fn(&ebeta, |t| t.powf(-0.5)));
    let left_index = f.conjugate().ok().map(|c| {
        c.module()
            .standard_frame()
            .iter()
            .map(|m| c.unstar(m))
            .fold(f.coeff().zero(), |acc, v| &acc + &v.ip(&v))
    });
    IndexData {
        frame_residual: ebeta.dist(&ebeta2),
        centrality_residual: ebeta.centrality_residual(),
        ebeta,
        ebeta_inv_sqrt,
        regular,
        min_eigenvalue,
        left_index,
    }
}

fn linalg_fn(a: &AlgElem, f: impl Fn(f64) -> f64 + Copy) -> AlgElem {
    a.map_blocks(|b| linalg::herm_fn(&linalg::hermitian_part(b), f))
}

/// `Υ(T)` (frame-sum formula).
pub fn upsilon(f: &BiHilbModule, t: &AdjOp) -> AlgElem {
    f.upsilon(t)
}

/// The compacts `E = F ⊗_B F* ≅ End_B(F)` of a regular bimodule, with `Z` and `P_0`.
#[derive(Clone, Debug)]
pub struct IndexedBimodule {
    f: BiHilbModule,
    index: IndexData,
    inv: AlgElem,
    inv_sqrt: AlgElem,
    e: Realization,
    e_left: OpMap,
    z: ModVec,
    p0: AdjOp,
}

impl IndexedBimodule {
    pub fn new(f: &BiHilbModule) -> Result<Self> {
        let index = watatani_index(f);
        let inv_sqrt = index.ebeta_inv_sqrt.clone().ok_or(Error::IndexNotInvertible)?;
        let inv = &inv_sqrt * &inv_sqrt;
        let x = f.module();
        let a = f.left_alg();
        let basis = end_basis(x);
        let ups: Vec<Vec<C64>> = basis.iter().map(|t| f.upsilon(t).coords()).collect();
        // ⟨E_{ab}|E_{cd}⟩ = δ_{ac} Υ(E_{bd}) within a block.
        let de = basis.len();
        let mut kernel = vec![CMat::zeros(de, de); a.dim()];
        let mut start = 0;
        for &m in x.mults() {
            for r in 0..m {
                for b in 0..m {
                    for dcol in 0..m {
                        let (p, q) = (start + r * m + b, start + r * m + dcol);
                        let u = &ups[start + b * m + dcol];
                        for (alpha, k) in kernel.iter_mut().enumerate() {
                            k[(p, q)] = u[alpha];
                        }
                    }
                }
            }
            start += m * m;
        }
        let right = a
            .basis()
            .iter()
            .map(|u| {
                let phi = f.corr.act(u);
                end_matrix(x, |t| t * &phi)
            })
            .collect();
        let e = Realization::new(a, kernel, right, f.tol)?;
        let units = a
            .basis()
            .iter()
            .map(|u| {
                let phi = f.corr.act(u);
                e.operator(&end_matrix(x, |t| &phi * t))
            })
            .collect();
        let e_left = OpMap::from_units(a, e.module(), units)?;
        let z_op = f.corr.act(&inv_sqrt);
        let z = e.embed(&end_flatten(&z_op));
        let p0_matrix = end_matrix(x, |t| f.corr.act(&(&inv * &f.upsilon(t))));
        let p0 = e.operator(&p0_matrix);
        Ok(Self { f: f.clone(), index, inv, inv_sqrt, e, e_left, z, p0 })
    }

    pub fn bimodule(&self) -> &BiHilbModule {
        &self.f
    }

    pub fn index(&self) -> &IndexData {
        &self.index
    }

    /// `e^{−β}`.
    pub fn ebeta_inv(&self) -> &AlgElem {
        &self.inv
    }

    /// `e^{−β/2}`.
    pub fn ebeta_inv_sqrt(&self) -> &AlgElem {
        &self.inv_sqrt
    }

    pub fn compacts(&self) -> &HilbertModule {
        self.e.module()
    }

    pub fn realization(&self) -> &Realization {
        &self.e
    }

    /// Left action of `A` on `E`.
    pub fn compacts_left(&self) -> &OpMap {
        &self.e_left
    }

    /// `Z = e^{−β/2}·Id_F` as a vector of `E`.
    pub fn z(&self) -> &ModVec {
        &self.z
    }

    pub fn p0(&self) -> &AdjOp {
        &self.p0
    }

    /// The vector of `E` representing `T ∈ End_B(F)`.
    pub fn end_vector(&self, t: &AdjOp) -> ModVec {
        self.e.embed(&end_flatten(t))
    }

    /// `f ⊗ g* ↔ Θ_{f,g}`.
    pub fn theta(&self, f: &ModVec, g: &ModVec) -> ModVec {
        self.end_vector(&AdjOp::rank_one(f, g).expect("same module"))
    }

    /// `T ↦ S∘T` on `E`, right `A`-linear.
    pub fn left_mult(&self, s: &AdjOp) -> AdjOp {
        self.e.operator(&end_matrix(self.f.module(), |t| s * t))
    }

    /// `‖⟨Θ_{f1,f2}|aZ⟩ − e^{−β/2}·_A⟨f2|f1⟩·a‖` and the same with `_A⟨f1|f2⟩`.
    pub fn z_pairing_residuals(&self, f1: &ModVec, f2: &ModVec, a: &AlgElem) -> (f64, f64) {
        let az = self.e_left.apply(a).apply(&self.z);
        let lhs = self.theta(f1, f2).ip(&az);
        let proof = &(&self.inv_sqrt * &self.f.left_inner(f2, f1)) * a;
        let statement = &(&self.inv_sqrt * &self.f.left_inner(f1, f2)) * a;
        (lhs.dist(&proof), lhs.dist(&statement))
    }
}

/// `P_0(T) = e^{−β}·Υ(T)·Id_F` on `F ⊗_B F*`.
pub fn index_projection(f: &BiHilbModule) -> Result<AdjOp> {
    Ok(IndexedBimodule::new(f)?.p0)
}

/// `F* ⊗_A X ⊗_A F` with the tensor factors kept for evaluation.
#[derive(Clone, Debug)]
pub struct Conjugated {
    pub corr: Correspondence,
    pub xf: TensorProduct,
    pub outer: TensorProduct,
    pub fstar: ConjugateBimodule,
}

impl Conjugated {
    /// `f1* ⊗ h ⊗ f2`.
    pub fn embed(&self, f1: &ModVec, h: &ModVec, f2: &ModVec) -> ModVec {
        self.outer.embed(&self.fstar.star(f1), &self.xf.embed(h, f2))
    }
}

/// `F*XF` as a `B–B` correspondence.
pub fn conjugate_correspondence(x: &Correspondence, f: &BiHilbModule, tol: f64) -> Result<Conjugated> {
    if x.left_alg() != f.left_alg() || x.coeff() != f.left_alg() {
        return Err(Error::IncompatibleOperands("X must be a correspondence over the left algebra of F".into()));
    }
    let xf = TensorProduct::new(x.module(), f.corr().phi(), tol)?;
    let xf_left = xf.lift_map(x.phi());
    let fstar = f.conjugate()?;
    let outer = TensorProduct::new(fstar.module(), &xf_left, tol)?;
    let corr = Correspondence::from_hom_unchecked(outer.lift_map(&fstar.left));
    Ok(Conjugated { corr, xf, outer, fstar })
}

/// The truncated ambient module `⊕_{n ≤ N} K_n` with `W`, `P`, `ψ` and `Φ_P`.
#[derive(Clone, Debug)]
pub struct Ambient {
    x: Correspondence,
    ib: IndexedBimodule,
    fock: TruncFock,
    fock_graded: Graded,
    xk: Vec<TensorProduct>,
    kt: Vec<TensorProduct>,
    pi: Vec<OpMap>,
    graded: Graded,
    w: Vec<AdjOp>,
    p: Vec<AdjOp>,
}

impl Ambient {
    pub fn new(x: &Correspondence, f: &BiHilbModule, depth: usize, tol: f64) -> Result<Self> {
        Self::bounded(x, f, depth, tol, usize::MAX)?
            .ok_or_else(|| Error::InvalidArgument("unbounded construction returned nothing".into()))
    }

    /// As [`Ambient::new`], giving up (returning `None`) once a level exceeds `max_dim`.
    pub fn bounded(
        x: &Correspondence,
        f: &BiHilbModule,
        depth: usize,
        tol: f64,
        max_dim: usize,
    ) -> Result<Option<Self>> {
        if x.left_alg() != f.left_alg() || x.coeff() != f.left_alg() {
            return Err(Error::IncompatibleOperands("X must be a correspondence over the left algebra of F".into()));
        }
        let ib = IndexedBimodule::new(f)?;
        let a = f.left_alg().clone();
        let mut levels = vec![ib.compacts().clone()];
        let mut pi = vec![ib.compacts_left().clone()];
        let mut xk = Vec::new();
        let mut kt: Vec<TensorProduct> = Vec::new();
        for n in 1..=depth {
            let t = TensorProduct::new(x.module(), &pi[n - 1], tol)?;
            let lam = t.lift_map(x.phi());
            let k = TensorProduct::new(ib.compacts(), &lam, tol)?;
            if k.module().dim() > max_dim {
                return Ok(None);
            }
            pi.push(k.lift_map(ib.compacts_left()));
            levels.push(k.module().clone());
            xk.push(t);
            kt.push(k);
        }
        let graded = Graded::new(&a, levels)?;
        let fock = TruncFock::new(x, depth, tol)?;
        let fock_graded = Graded::new(&a, (0..=depth).map(|n| fock.level(n).clone()).collect())?;

        let z = ib.z().clone();
        let trivial = HilbertModule::trivial(&a);
        let mut w = vec![AdjOp::from_fn(&trivial, ib.compacts(), |v| {
            z.right_mul(&AlgElem::new(&a, v.blocks().to_vec()).expect("trivial module shape"))
        })];
        let mut p = vec![ib.p0().clone()];
        for n in 1..=depth {
            let mid = if n == 1 {
                AdjOp::from_fn(x.module(), xk[0].module(), |v| xk[0].embed(v, &z))
            } else {
                let src = fock.tensor(n).expect("tensor level");
                src.lift_to(&xk[n - 1], &AdjOp::identity(x.module()), &w[n - 1])
            };
            w.push(&kt[n - 1].creation(&z) * &mid);
            let inner = xk[n - 1].lift(&AdjOp::identity(x.module()), &p[n - 1]);
            p.push(kt[n - 1].lift(ib.p0(), &inner));
        }
        Ok(Some(Self { x: x.clone(), ib, fock, fock_graded, xk, kt, pi, graded, w, p }))
    }

    pub fn depth(&self) -> usize {
        self.kt.len()
    }

    pub fn indexed(&self) -> &IndexedBimodule {
        &self.ib
    }

    pub fn fock(&self) -> &TruncFock {
        &self.fock
    }

    pub fn level(&self, n: usize) -> &HilbertModule {
        self.graded.level(n)
    }

    pub fn total(&self) -> &HilbertModule {
        self.graded.total()
    }

    pub fn level_dims(&self) -> Vec<usize> {
        (0..=self.depth()).map(|n| self.level(n).dim()).collect()
    }

    /// `W_n: X^{⊗n} → K_n`.
    pub fn wn(&self, n: usize) -> &AdjOp {
        &self.w[n]
    }

    /// `P_n = P_0 ⊗ Id_X ⊗ ⋯ ⊗ P_0` on `K_n`.
    pub fn pn(&self, n: usize) -> &AdjOp {
        &self.p[n]
    }

    /// `W = ⊕ W_n` from the truncated `F_X` to the ambient module.
    pub fn w_total(&self) -> AdjOp {
        let mut out = AdjOp::zero(self.fock.total(), self.total());
        for (n, wn) in self.w.iter().enumerate() {
            self.fock_graded.place_into(&self.graded, &mut out, n, n, wn);
        }
        out
    }

    pub fn p_total(&self) -> FockOp {
        let mut out = AdjOp::zero(self.total(), self.total());
        for (n, pn) in self.p.iter().enumerate() {
            self.graded.place_into(&self.graded, &mut out, n, n, pn);
        }
        FockOp::new(out, 0, 0)
    }

    /// `π(a)`, acting on the leftmost factor of every level.
    pub fn pi(&self, a: &AlgElem) -> FockOp {
        let mut out = AdjOp::zero(self.total(), self.total());
        for (n, p) in self.pi.iter().enumerate() {
            self.graded.place_into(&self.graded, &mut out, n, n, &p.apply(a));
        }
        FockOp::new(out, 0, 0)
    }

    /// `C(S, x): κ ↦ S ⊗ x ⊗ κ`, annihilating the top level.
    pub fn c_op(&self, s: &ModVec, x: &ModVec) -> FockOp {
        let mut out = AdjOp::zero(self.total(), self.total());
        for n in 0..self.depth() {
            let op = &self.kt[n].creation(s) * &self.xk[n].creation(x);
            self.graded.place_into(&self.graded, &mut out, n, n + 1, &op);
        }
        FockOp::new(out, 1, 0)
    }

    /// `ψ(x) = Σ_{i,j} u_i ⊗ T_{u_i*⊗e^{−β/2}x⊗u_j} ⊗ u_j*`, which is `C(Z, x)`.
    pub fn psi(&self, x: &ModVec) -> FockOp {
        self.c_op(self.ib.z(), x)
    }

    /// `L(S)`: composition with `S ∈ End_B(F)` on the leftmost factor.
    pub fn l_op(&self, s: &AdjOp) -> FockOp {
        let l0 = self.ib.left_mult(s);
        let mut out = AdjOp::zero(self.total(), self.total());
        self.graded.place_into(&self.graded, &mut out, 0, 0, &l0);
        for n in 1..=self.depth() {
            let lifted = self.kt[n - 1].lift(&l0, &AdjOp::identity(self.xk[n - 1].module()));
            self.graded.place_into(&self.graded, &mut out, n, n, &lifted);
        }
        FockOp::new(out, 0, 0)
    }

    /// Projection onto level `0`.
    pub fn q0(&self) -> FockOp {
        FockOp::new(self.graded.levels_up_to(0), 0, 0)
    }

    /// Norm of `D` on the ambient levels where a word of its degree is exact.
    pub fn window_residual(&self, d: &FockOp) -> f64 {
        let n = self.depth();
        if d.creations > n {
            return 0.0;
        }
        (&d.op * &self.graded.levels_up_to(n - d.creations)).norm()
    }

    /// `Φ_P(T) = W* P T P W`.
    pub fn phi_expectation(&self, t: &FockOp) -> FockOp {
        let w = self.w_total();
        let p = self.p_total();
        let inner = &(&p.op * &t.op) * &p.op;
        FockOp::new(&(&w.adjoint() * &inner) * &w, t.creations, t.annihilations)
    }

    /// `Θ_{f_0,f_1} ⊗ x_1 ⊗ Θ_{f_2,f_3} ⊗ ⋯ ⊗ x_n ⊗ Θ_{f_{2n},f_{2n+1}}` in `K_n`.
    pub fn nested(&self, fs: &[ModVec], xs: &[ModVec]) -> ModVec {
        let n = xs.len();
        assert_eq!(fs.len(), 2 * n + 2, "need 2n+2 vectors of F");
        let mut v = self.ib.theta(&fs[2 * n], &fs[2 * n + 1]);
        for k in 1..=n {
            let i = n - k;
            let th = self.ib.theta(&fs[2 * i], &fs[2 * i + 1]);
            v = self.kt[k - 1].embed(&th, &self.xk[k - 1].embed(&xs[i], &v));
        }
        v
    }

    /// The closed form of `W_n*` on [`Ambient::nested`] vectors.
    pub fn wn_adjoint_formula(&self, fs: &[ModVec], xs: &[ModVec]) -> ModVec {
        let f = self.ib.bimodule();
        let c = |i: usize| &(self.ib.ebeta_inv_sqrt().clone()) * &f.left_inner(&fs[2 * i], &fs[2 * i + 1]);
        let n = xs.len();
        if n == 0 {
            let e = c(0);
            return HilbertModule::trivial(f.left_alg()).from_blocks(e.blocks().to_vec()).expect("shape");
        }
        let mut ys: Vec<ModVec> = (0..n).map(|i| self.x.act(&c(i)).apply(&xs[i])).collect();
        ys[n - 1] = ys[n - 1].right_mul(&c(n));
        if n == 1 {
            ys.pop().expect("one factor")
        } else {
            self.fock.elementary(&ys)
        }
    }

    /// `T_ξ · e^{−β}_A⟨g_m|g'_n⟩ · T_η*` with `ξ_i = e^{−β/2}_A⟨g_{i−1}|f_i⟩·x_i`,
    /// `g_0 = f`, and `η` built the same way from `g'_0 = g`.
    pub fn phi_closed_form(&self, f: &ModVec, g: &ModVec, z: &[Triple], w: &[Triple]) -> FockOp {
        let fb = self.ib.bimodule();
        let h = self.ib.ebeta_inv_sqrt();
        let chain = |start: &ModVec, ts: &[Triple]| -> (Vec<ModVec>, ModVec) {
            let mut prev = start.clone();
            let mut out = Vec::new();
            for t in ts {
                let c = h * &fb.left_inner(&prev, &t.f);
                out.push(self.x.act(&c).apply(&t.x));
                prev = t.g.clone();
            }
            (out, prev)
        };
        let (xi, gm) = chain(f, z);
        let (eta, gn) = chain(g, w);
        let mid = self.ib.ebeta_inv() * &fb.left_inner(&gm, &gn);
        self.fock
            .word(&xi)
            .mul(&self.fock.left_action(&mid))
            .mul(&self.fock.word(&eta).adjoint())
    }

    /// The ambient operator `f ⊗ T_z T_w* ⊗ g*`.
    pub fn generator(&self, f: &ModVec, g: &ModVec, z: &[Triple], w: &[Triple]) -> FockOp {
        let chain = |start: &ModVec, ts: &[Triple]| -> (FockOp, ModVec) {
            let mut prev = start.clone();
            let mut acc = FockOp::new(AdjOp::identity(self.total()), 0, 0);
            for t in ts {
                acc = acc.mul(&self.c_op(&self.ib.theta(&prev, &t.f), &t.x));
                prev = t.g.clone();
            }
            (acc, prev)
        };
        let (cz, gm) = chain(f, z);
        let (cw, gn) = chain(g, w);
        let l = self.l_op(&AdjOp::rank_one(&gm, &gn).expect("same module"));
        cz.mul(&l).mul(&cw.adjoint())
    }

    /// Compares `F ⊗_B ((F*XF) ⊗_B F*)` with `K_1` through
    /// `f ⊗ (g* ⊗ x ⊗ h) ⊗ k* ↦ Θ_{f,g} ⊗ x ⊗ Θ_{h,k}`.
    pub fn reassociate_level_one(&self, conj: &Conjugated, tol: f64) -> Result<Reassociation> {
        if self.depth() == 0 {
            return Err(Error::InvalidArgument("level one needs depth ≥ 1".into()));
        }
        let f = self.ib.bimodule();
        let right = TensorProduct::new(conj.corr.module(), &conj.fstar.left, tol)?;
        let right_left = right.lift_map(conj.corr.phi());
        let g1 = TensorProduct::new(f.module(), &right_left, tol)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x1e7e1);
        let samples = 2 * g1.module().dim() + 8;
        let (mut zs, mut ws) = (Vec::new(), Vec::new());
        for _ in 0..samples {
            let fm = f.module();
            let (a, b, c, d) = (fm.random(&mut rng), fm.random(&mut rng), fm.random(&mut rng), fm.random(&mut rng));
            let xv = self.x.module().random(&mut rng);
            let mid = right.embed(&conj.embed(&b, &xv, &c), &conj.fstar.star(&d));
            zs.push(g1.embed(&a, &mid));
            ws.push(self.kt[0].embed(&self.ib.theta(&a, &b), &self.xk[0].embed(&xv, &self.ib.theta(&c, &d))));
        }
        let (u, well_defined) = AdjOp::from_images(g1.module(), self.level(1), &zs, &ws);
        let unitarity = if g1.module() == self.level(1) || g1.module().mults() == self.level(1).mults() {
            (&u.adjoint() * &u).dist(&AdjOp::identity(g1.module()))
                + (&u * &u.adjoint()).dist(&AdjOp::identity(self.level(1)))
        } else {
            f64::INFINITY
        };
        let g1_left = g1.lift_map(f.corr().phi());
        let intertwining = g1_left
            .units()
            .iter()
            .zip(self.pi[1].units())
            .map(|(s, t)| (&u * s).dist(&(t * &u)))
            .fold(0.0, f64::max);
        Ok(Reassociation { unitary: u, well_defined, unitarity, intertwining })
    }
}

/// `f* ⊗ x ⊗ g` inside `F*XF`.
#[derive(Clone, Debug)]
pub struct Triple {
    pub f: ModVec,
    pub x: ModVec,
    pub g: ModVec,
}

/// An explicit re-association unitary with its residuals.
#[derive(Clone, Debug)]
pub struct Reassociation {
    pub unitary: AdjOp,
    pub well_defined: f64,
    pub unitarity: f64,
    pub intertwining: f64,
}

/// `W_n` for a single level.
pub fn wn_isometry(x: &Correspondence, f: &BiHilbModule, n: usize, tol: f64) -> Result<AdjOp> {
    Ok(Ambient::new(x, f, n, tol)?.wn(n).clone())
}

/// `Φ_P(T)` on the truncated `F_X`.
pub fn phi_expectation(ambient: &Ambient, t: &FockOp) -> FockOp {
    ambient.phi_expectation(t)
}

/// `ψ(x)` on the truncated ambient module.
pub fn psi_representation(ambient: &Ambient, x: &ModVec) -> FockOp {
    ambient.psi(x)
}

/// Covering data: `π: M̃ → M` and a permutation `γ` of `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    #[serde(rename = "M")]
    pub m: usize,
    pub gamma: Vec<usize>,
    #[serde(rename = "Mtilde")]
    pub mtilde: usize,
    pub pi: Vec<usize>,
}

impl Cover {
    pub fn validate(&self) -> Result<()> {
        if self.pi.len() != self.mtilde || self.pi.iter().any(|&p| p >= self.m) {
            return Err(Error::NotACover("pi must map every point of Mtilde into M".into()));
        }
        if (0..self.m).any(|x| !self.pi.contains(&x)) {
            return Err(Error::NotACover("pi is not surjective".into()));
        }
        let mut seen = vec![false; self.m];
        if self.gamma.len() != self.m || self.gamma.iter().any(|&g| g >= self.m || std::mem::replace(&mut seen[g], true)) {
            return Err(Error::NotACover("gamma must be a permutation of M".into()));
        }
        Ok(())
    }

    pub fn fibre(&self, x: usize) -> Vec<usize> {
        (0..self.mtilde).filter(|&t| self.pi[t] == x).collect()
    }

    /// `|{(x̃, ỹ) : π(x̃) = γ(π(ỹ))}|`.
    pub fn fibre_product_size(&self) -> usize {
        let mut n = 0;
        for xt in 0..self.mtilde {
            for yt in 0..self.mtilde {
                if self.pi[xt] == self.gamma[self.pi[yt]] {
                    n += 1;
                }
            }
        }
        n
    }
}

/// `C(M̃)` over a finite cover, the twisted correspondence `γ*C(M)` and their conjugate.
#[derive(Clone, Debug)]
pub struct CoveringExample {
    pub cover: Cover,
    pub f: BiHilbModule,
    pub x: Correspondence,
    pub conjugated: Conjugated,
}

pub fn covering_bimodule(cover: &Cover, tol: f64) -> Result<CoveringExample> {
    cover.validate()?;
    let a = Algebra::diagonal(cover.m)?;
    let b = Algebra::diagonal(cover.mtilde)?;
    let fm = HilbertModule::new(&b, vec![1; cover.mtilde])?;
    let phi = OpMap::from_fn(&a, &fm, |g| {
        let blocks = (0..cover.mtilde).map(|t| g.block(cover.pi[t]).clone()).collect();
        AdjOp::new(&fm, &fm, blocks).expect("1x1 blocks")
    });
    let fcorr = Correspondence::new(phi, tol)?;
    let pi = cover.pi.clone();
    let m = cover.m;
    let f = make_bihilb(
        &fcorr,
        |f1, f2| {
            let mut coords = vec![C64::new(0.0, 0.0); m];
            for (t, &x) in pi.iter().enumerate() {
                coords[x] += f1.block(t)[(0, 0)] * f2.block(t)[(0, 0)].conj();
            }
            a.from_coords(&coords)
        },
        tol,
    )?;
    let am = HilbertModule::trivial(&a);
    let gamma = cover.gamma.clone();
    let xphi = OpMap::from_fn(&a, &am, |g| {
        let blocks = (0..m).map(|x| g.block(gamma[x]).clone()).collect();
        AdjOp::new(&am, &am, blocks).expect("1x1 blocks")
    });
    let x = Correspondence::new(xphi, tol)?;
    let conjugated = conjugate_correspondence(&x, &f, tol)?;
    Ok(CoveringExample { cover: cover.clone(), f, x, conjugated })
}

impl CoveringExample {
    /// `⟨f1*⊗h⊗f2|g1*⊗k⊗g2⟩(x̃)` by the fibre-sum formula.
    pub fn inner_formula(&self, v: [&ModVec; 3], w: [&ModVec; 3]) -> AlgElem {
        let c = &self.cover;
        let val = |m: &ModVec, i: usize| m.block(i)[(0, 0)];
        let coords: Vec<C64> = (0..c.mtilde)
            .map(|xt| {
                let x = c.pi[xt];
                let fib: C64 = c.fibre(c.gamma[x]).iter().map(|&y| val(v[0], y) * val(w[0], y).conj()).sum();
                val(v[2], xt).conj() * val(v[1], x).conj() * fib * val(w[1], x) * val(w[2], xt)
            })
            .collect();
        self.f.coeff().from_coords(&coords)
    }

    /// Largest deviation between the Gram construction and the formula on random triples.
    pub fn inner_formula_residual<R: Rng>(&self, rng: &mut R, samples: usize) -> f64 {
        let fm = self.f.module();
        let xm = self.x.module();
        (0..samples)
            .map(|_| {
                let v = [fm.random(rng), xm.random(rng), fm.random(rng)];
                let w = [fm.random(rng), xm.random(rng), fm.random(rng)];
                let lhs = self.conjugated.embed(&v[0], &v[1], &v[2]).ip(&self.conjugated.embed(&w[0], &w[1], &w[2]));
                lhs.dist(&self.inner_formula([&v[0], &v[1], &v[2]], [&w[0], &w[1], &w[2]]))
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::make_algebra;

    fn morita(n: usize) -> BiHilbModule {
        let a = make_algebra(&[n]).unwrap();
        let c = make_algebra(&[1]).unwrap();
        let x = HilbertModule::new(&c, vec![n]).unwrap();
        let phi = OpMap::from_fn(&a, &x, |e| AdjOp::new(&x, &x, vec![e.block(0).clone()]).unwrap());
        let corr = Correspondence::new(phi, 1e-10).unwrap();
        make_bihilb(
            &corr,
            |f, g| AlgElem::new(&a, vec![f.block(0) * g.block(0).adjoint()]).unwrap(),
            1e-10,
        )
        .unwrap()
    }

    fn scalars(n: usize) -> BiHilbModule {
        let c = make_algebra(&[1]).unwrap();
        let x = HilbertModule::new(&c, vec![n]).unwrap();
        let phi = OpMap::from_fn(&c, &x, |e| AdjOp::identity(&x).scale(e.block(0)[(0, 0)]));
        BiHilbModule::standard(&Correspondence::new(phi, 1e-10).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn morita_index_is_one_and_p0_is_identity() {
        let f = morita(3);
        let idx = watatani_index(&f);
        assert!(idx.ebeta.dist(&f.left_alg().one()) < 1e-12);
        assert!(idx.frame_residual < 1e-10);
        let ib = IndexedBimodule::new(&f).unwrap();
        assert!(ib.p0().dist(&AdjOp::identity(ib.compacts())) < 1e-10);
        assert_eq!(ib.compacts().dim(), f.left_alg().dim());
    }

    #[test]
    fn scalar_index_counts_dimension() {
        let f = scalars(4);
        let idx = watatani_index(&f);
        assert!((idx.ebeta.block(0)[(0, 0)] - cr(4.0)).norm() < 1e-12);
        let left = idx.left_index.unwrap();
        assert!((left.block(0)[(0, 0)] - cr(4.0)).norm() < 1e-10);
    }

    #[test]
    fn upsilon_of_rank_one_is_left_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = make_algebra(&[1, 2]).unwrap();
        let b = make_algebra(&[2, 1]).unwrap();
        let corr = crate::instances::random_hom_correspondence(&mut rng, &a, &b, 4, true).unwrap();
        let copies: Vec<Vec<usize>> = adapted_bases(&corr, 1e-10)
            .unwrap()
            .iter()
            .map(|(s, _)| s[..a.num_blocks()].to_vec())
            .collect();
        let w = crate::instances::random_weights(&mut rng, &copies);
        let f = BiHilbModule::from_weights(&corr, &w, 1e-10).unwrap();
        for _ in 0..5 {
            let e = f.module().random(&mut rng);
            let g = f.module().random(&mut rng);
            let t = AdjOp::rank_one(&e, &g).unwrap();
            assert!(f.upsilon(&t).dist(&f.left_inner(&e, &g)) < 1e-10);
        }
        let recovered = f.weights().unwrap();
        for j in 0..w.len() {
            for l in 0..w[j].len() {
                assert!(linalg::max_abs(&(&recovered[j][l] - &w[j][l])) < 1e-10);
            }
        }
    }

    #[test]
    fn non_adjointable_left_form_is_rejected() {
        let a = make_algebra(&[1]).unwrap();
        let b = make_algebra(&[1, 1]).unwrap();
        let x = HilbertModule::new(&b, vec![1, 1]).unwrap();
        let phi = OpMap::from_fn(&a, &x, |e| AdjOp::identity(&x).scale(e.block(0)[(0, 0)]));
        let corr = Correspondence::new(phi, 1e-10).unwrap();
        let m = CMat::from_row_slice(2, 2, &[cr(2.0), cr(1.0), cr(1.0), cr(2.0)]);
        let res = make_bihilb(
            &corr,
            |f, g| {
                let fv = x.flatten(f);
                let gv = x.flatten(g);
                AlgElem::new(&a, vec![CMat::from_element(1, 1, (gv.adjoint() * &m * fv)[(0, 0)])]).unwrap()
            },
            1e-10,
        );
        match res {
            Err(Error::NotBihilbertian { axiom, residual }) => {
                assert!(axiom.contains("adjointable"));
                assert!(residual > 0.5);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn covering_index_and_dimension() {
        let cover = Cover { m: 3, gamma: vec![1, 2, 0], mtilde: 6, pi: vec![0, 0, 1, 1, 2, 2] };
        let ex = covering_bimodule(&cover, 1e-10).unwrap();
        let idx = watatani_index(&ex.f);
        assert!(idx.ebeta.dist(&ex.f.left_alg().one().scale(cr(2.0))) < 1e-12);
        assert_eq!(ex.conjugated.corr.dim(), 12);
        assert_eq!(cover.fibre_product_size(), 12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(ex.inner_formula_residual(&mut rng, 10) < 1e-10);
    }

    #[test]
    fn non_surjective_cover_is_rejected() {
        let cover = Cover { m: 2, gamma: vec![0, 1], mtilde: 2, pi: vec![0, 0] };
        assert!(matches!(covering_bimodule(&cover, 1e-10), Err(Error::NotACover(_))));
    }

    fn small_instance(seed: u64) -> (Correspondence, BiHilbModule) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = make_algebra(&[1, 1]).unwrap();
        let b = make_algebra(&[2]).unwrap();
        let copies = vec![vec![1, 1]];
        let corr = crate::instances::hom_from_copies(&mut rng, &a, &b, &copies, &[0]).unwrap();
        let w = crate::instances::random_weights(&mut rng, &copies);
        let f = BiHilbModule::from_weights(&corr, &w, 1e-10).unwrap();
        let x = crate::instances::hom_from_copies(&mut rng, &a, &a, &vec![vec![1, 1], vec![0, 1]], &[0, 0]).unwrap();
        (x, f)
    }

    #[test]
    fn wn_are_isometries_onto_pn() {
        let (x, f) = small_instance(11);
        let amb = Ambient::new(&x, &f, 2, 1e-10).unwrap();
        for n in 0..=2 {
            let w = amb.wn(n);
            assert!((&w.adjoint() * w).dist(&AdjOp::identity(w.source())) < 1e-9, "W_{n}*W_{n}");
            assert!((w * &w.adjoint()).dist(amb.pn(n)) < 1e-9, "W_{n}W_{n}* = P_{n}");
        }
    }

    #[test]
    fn psi_intertwines_creations() {
        let (x, f) = small_instance(12);
        let amb = Ambient::new(&x, &f, 2, 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = x.module().random(&mut rng);
        let w = FockOp::new(amb.w_total(), 0, 0);
        let d = &(&amb.psi(&v).op * &w.op) - &(&w.op * &amb.fock().creation(&v).op);
        assert!(d.norm() < 1e-9);
        let a = x.left_alg().random(&mut rng);
        let d = &(&amb.pi(&a).op * &w.op) - &(&w.op * &amb.fock().left_action(&a).op);
        assert!(d.norm() < 1e-9);
    }

    #[test]
    fn wn_adjoint_on_nested_tensors() {
        let (x, f) = small_instance(13);
        let amb = Ambient::new(&x, &f, 2, 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 0..=2 {
            let fs: Vec<ModVec> = (0..2 * n + 2).map(|_| f.module().random(&mut rng)).collect();
            let xs: Vec<ModVec> = (0..n).map(|_| x.module().random(&mut rng)).collect();
            let got = amb.wn(n).adjoint().apply(&amb.nested(&fs, &xs));
            assert!(got.dist(&amb.wn_adjoint_formula(&fs, &xs)) < 1e-9, "level {n}");
        }
    }

    #[test]
    fn expectation_closed_form() {
        let (x, f) = small_instance(14);
        let amb = Ambient::new(&x, &f, 2, 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut triple = || Triple {
            f: f.module().random(&mut rng),
            x: x.module().random(&mut rng),
            g: f.module().random(&mut rng),
        };
        let shapes: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (2, 1)];
        for (m, n) in shapes {
            let z: Vec<Triple> = (0..m).map(|_| triple()).collect();
            let w: Vec<Triple> = (0..n).map(|_| triple()).collect();
            let (g0, h0) = (triple().f, triple().g);
            let lhs = amb.phi_expectation(&amb.generator(&g0, &h0, &z, &w));
            let rhs = amb.phi_closed_form(&g0, &h0, &z, &w);
            assert!(amb.fock().window_residual(&lhs.sub(&rhs)) < 1e-9, "shape ({m},{n})");
        }
    }

    #[test]
    fn z_pairing_and_reassociation() {
        let (x, f) = small_instance(15);
        let amb = Ambient::new(&x, &f, 1, 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (f1, f2) = (f.module().random(&mut rng), f.module().random(&mut rng));
        let a = f.left_alg().random(&mut rng);
        let (proof, _) = amb.indexed().z_pairing_residuals(&f1, &f2, &a);
        assert!(proof < 1e-10);
        let conj = conjugate_correspondence(&x, &f, 1e-10).unwrap();
        let r = amb.reassociate_level_one(&conj, 1e-10).unwrap();
        assert!(r.well_defined < 1e-8 && r.unitarity < 1e-8 && r.intertwining < 1e-8, "{r:?}");
    }
}
