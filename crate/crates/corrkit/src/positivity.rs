//! Completely positive maps, positive correspondences and their composition.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgElem, Algebra, Ideal};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::module::{AdjOp, HilbertModule, ModVec, OpMap};
use crate::tensor::{self, Correspondence, KSGNSResult, TensorProduct};

/// Most negative Choi eigenvalue and where it occurs.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiWitness {
    pub min_eigenvalue: f64,
    pub domain_block: usize,
    pub module_block: usize,
    pub vector: DVector<C64>,
}

/// Certifies complete positivity through the blockwise Choi matrices `[ρ(E^j_{bd})]`.
pub fn is_completely_positive(rho: &OpMap, tol: f64) -> (bool, ChoiWitness) {
    let mut witness = ChoiWitness {
        min_eigenvalue: f64::INFINITY,
        domain_block: 0,
        module_block: 0,
        vector: DVector::zeros(0),
    };
    let mut scale: f64 = 1.0;
    for j in 0..rho.domain().num_blocks() {
        for l in 0..rho.module().mults().len() {
            let c = tensor::choi_block(rho, j, l);
            if c.nrows() == 0 {
                continue;
            }
            scale = scale.max(linalg::op_norm(&c));
            let herm = linalg::max_abs(&(&c - c.adjoint()));
            let (vals, vecs) = linalg::herm_eig(&c);
            let low = vals[0] - herm;
            if low < witness.min_eigenvalue {
                witness = ChoiWitness {
                    min_eigenvalue: low,
                    domain_block: j,
                    module_block: l,
                    vector: vecs.column(0).into_owned(),
                };
            }
        }
    }
    if witness.min_eigenvalue == f64::INFINITY {
        witness.min_eigenvalue = 0.0;
    }
    (witness.min_eigenvalue >= -tol * scale, witness)
}

/// A certified completely positive map `A → End_B(X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CPMap {
    map: OpMap,
    witness: ChoiWitness,
}

impl CPMap {
    pub fn new(map: OpMap, tol: f64) -> Result<Self> {
        let (ok, witness) = is_completely_positive(&map, tol);
        if !ok {
            return Err(Error::NotCompletelyPositive {
                block: witness.domain_block,
                min_eigenvalue: witness.min_eigenvalue,
            });
        }
        Ok(Self { map, witness })
    }

    /// Builds the map from a closure, rejecting closures that are not linear.
    pub fn from_fn(
        dom: &Algebra,
        module: &HilbertModule,
        f: impl Fn(&AlgElem) -> AdjOp,
        tol: f64,
    ) -> Result<Self> {
        let map = OpMap::from_fn(dom, module, &f);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut residual: f64 = 0.0;
        for _ in 0..3 {
            let a = dom.random(&mut rng);
            let d = f(&a).dist(&map.apply(&a));
            residual = residual.max(d / a.norm().max(1.0));
        }
        if residual > tol {
            return Err(Error::NotLinear { residual });
        }
        Self::new(map, tol)
    }

    /// A map between algebras, realized on `B_B`.
    pub fn between_algebras(
        dom: &Algebra,
        cod: &Algebra,
        f: impl Fn(&AlgElem) -> AlgElem,
        tol: f64,
    ) -> Result<Self> {
        let module = HilbertModule::trivial(cod);
        Self::from_fn(dom, &module, |a| AdjOp::from_elem(&f(a)), tol)
    }

    pub fn map(&self) -> &OpMap {
        &self.map
    }

    pub fn witness(&self) -> &ChoiWitness {
        &self.witness
    }

    pub fn domain(&self) -> &Algebra {
        self.map.domain()
    }

    pub fn module(&self) -> &HilbertModule {
        self.map.module()
    }

    pub fn apply(&self, a: &AlgElem) -> AdjOp {
        self.map.apply(a)
    }

    /// `ρ(a)` as an algebra element, for maps into `B_B`.
    pub fn apply_elem(&self, a: &AlgElem) -> AlgElem {
        self.map.apply(a).to_elem()
    }

    /// `σ ∘ ρ` for `ρ: A → B` realized on `B_B` and `σ: B → End_C(Y)`.
    pub fn then(&self, sigma: &CPMap, tol: f64) -> Result<CPMap> {
        if self.module() != &HilbertModule::trivial(sigma.domain()) {
            return Err(Error::IncompatibleOperands("composition needs a map into the algebra".into()));
        }
        CPMap::new(OpMap::from_fn(self.domain(), sigma.module(), |a| sigma.apply(&self.apply_elem(a))), tol)
    }
}

/// A pair `(ρ, X)` with `ρ` completely positive.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveCorrespondence {
    rho: CPMap,
}

impl PositiveCorrespondence {
    pub fn new(rho: CPMap) -> Self {
        Self { rho }
    }

    /// `(Id, A_A)`.
    pub fn identity(alg: &Algebra) -> Self {
        let map = OpMap::left_multiplication(alg);
        Self { rho: CPMap { map, witness: trivial_witness() } }
    }

    pub fn from_correspondence(c: &Correspondence) -> Self {
        Self { rho: CPMap { map: c.phi().clone(), witness: trivial_witness() } }
    }

    pub fn rho(&self) -> &CPMap {
        &self.rho
    }

    pub fn map(&self) -> &OpMap {
        self.rho.map()
    }

    pub fn module(&self) -> &HilbertModule {
        self.rho.module()
    }

    pub fn left_alg(&self) -> &Algebra {
        self.rho.domain()
    }

    pub fn coeff(&self) -> &Algebra {
        self.module().coeff()
    }

    pub fn ksgns(&self, tol: f64) -> Result<KSGNSResult> {
        tensor::ksgns(self.map(), tol)
    }
}

fn trivial_witness() -> ChoiWitness {
    ChoiWitness { min_eigenvalue: 0.0, domain_block: 0, module_block: 0, vector: DVector::zeros(0) }
}

/// The composite `(ρ ⊗ Id, X ⊗_σ Y)` with `X ⊗_σ Y := X ⊗_B (B ⊗_σ Y)`.
#[derive(Clone, Debug)]
pub struct Composite {
    pub corr: PositiveCorrespondence,
    pub dilation: KSGNSResult,
    pub product: TensorProduct,
}

pub fn compose_pos(p: &PositiveCorrespondence, q: &PositiveCorrespondence, tol: f64) -> Result<Composite> {
    if p.coeff() != q.left_alg() {
        return Err(Error::IncompatibleOperands(format!(
            "middle algebras differ: {:?} vs {:?}",
            p.coeff().block_dims(),
            q.left_alg().block_dims()
        )));
    }
    let dilation = q.ksgns(tol)?;
    let product = TensorProduct::new(p.module(), dilation.corr.phi(), tol)?;
    let map = product.lift_map(p.map());
    let corr = PositiveCorrespondence::new(CPMap::new(map, tol.max(1e-9))?);
    Ok(Composite { corr, dilation, product })
}

/// Whether `ρ: A → A` is a conditional expectation onto the image of `ι: B → A`.
pub fn is_conditional_expectation(rho: &CPMap, iota: &OpMap, tol: f64) -> bool {
    conditional_expectation_residual(rho, iota) <= tol
}

/// The largest defect among `ρ∘ι = ι`, `‖ρ‖ ≤ 1`, the bimodule property and `ρ(A) ⊆ ι(B)`.
pub fn conditional_expectation_residual(rho: &CPMap, iota: &OpMap) -> f64 {
    let a_alg = rho.domain();
    let a_mod = HilbertModule::trivial(a_alg);
    if rho.module() != &a_mod || iota.module() != &a_mod {
        return f64::INFINITY;
    }
    let mut res: f64 = 0.0;
    let iota_units: Vec<AlgElem> = iota.units().iter().map(AdjOp::to_elem).collect();
    for u in &iota_units {
        res = res.max(rho.apply_elem(u).dist(u));
    }
    // ‖ρ‖ = ‖ρ(1)‖ for completely positive maps
    res = res.max(rho.apply_elem(&a_alg.one()).norm() - 1.0);
    let basis = a_alg.basis();
    for a in &basis {
        let ra = rho.apply_elem(a);
        res = res.max(range_distance(&ra, &iota_units));
        for b1 in &iota_units {
            for b2 in &iota_units {
                let lhs = rho.apply_elem(&(&(b1 * a) * b2));
                let rhs = &(b1 * &ra) * b2;
                res = res.max(lhs.dist(&rhs));
            }
        }
    }
    res
}

/// Distance from `a` to the linear span of `span`, in coordinates.
fn range_distance(a: &AlgElem, span: &[AlgElem]) -> f64 {
    if span.is_empty() {
        return a.max_abs();
    }
    let n = a.coords().len();
    let mut m = linalg::CMat::zeros(n, span.len());
    for (i, s) in span.iter().enumerate() {
        m.set_column(i, &DVector::from_vec(s.coords()));
    }
    let v = DVector::from_vec(a.coords());
    let pinv = m.clone().pseudo_inverse(1e-12).expect("nonnegative epsilon");
    let proj = &m * (pinv * &v);
    (v - proj).iter().fold(0.0, |acc: f64, z| acc.max(z.norm()))
}

/// The comparison map `(A ⊗_ρ B) ⊗_B (B ⊗_σ C) → A ⊗_{σ∘ρ} C`.
#[derive(Clone, Debug)]
pub struct ExpectationIso {
    pub psi: AdjOp,
    pub well_defined_residual: f64,
    pub isometry_residual: f64,
    pub surjective: bool,
}

/// Builds `(a⊗b₁)⊗(b₂⊗c) ↦ a·ι(b₁b₂)⊗c` for a conditional expectation `ρ` and checks it.
///
/// `rho` maps `A` into `B_B`; `iota` embeds `B` in `A`.
pub fn expectation_compose_iso(
    rho: &CPMap,
    iota: &OpMap,
    sigma: &CPMap,
    tol: f64,
) -> Result<ExpectationIso> {
    let a_alg = rho.domain().clone();
    let b_alg = iota.domain().clone();
    let iota_alg = |b: &AlgElem| iota.apply(b).to_elem();
    let rho_in_a = CPMap::new(
        OpMap::from_fn(&a_alg, &HilbertModule::trivial(&a_alg), |a| iota.apply(&rho.apply_elem(a))),
        tol.max(1e-9),
    )?;
    let residual = conditional_expectation_residual(&rho_in_a, iota);
    if residual > tol.max(1e-9) {
        return Err(Error::PreconditionViolated(format!(
            "not a conditional expectation (residual {residual:.3e})"
        )));
    }
    let left = tensor::ksgns(rho.map(), tol)?;
    let right = tensor::ksgns(sigma.map(), tol)?;
    let product = TensorProduct::new(left.module(), right.corr.phi(), tol)?;
    let composite = rho.then(sigma, tol.max(1e-9))?;
    let target = tensor::ksgns(composite.map(), tol)?;

    let b_frame = HilbertModule::trivial(&b_alg).standard_frame();
    let c_frame = sigma.module().standard_frame();
    let (mut zs, mut ws) = (Vec::new(), Vec::new());
    for a in a_alg.basis() {
        for b1 in &b_frame {
            let ab1 = left.embed(&a, b1);
            let b1e = AlgElem::new(&b_alg, b1.blocks().to_vec()).expect("frame vectors are elements");
            for b2 in b_alg.basis() {
                for c in &c_frame {
                    zs.push(product.embed(&ab1, &right.embed(&b2, c)));
                    ws.push(target.embed(&(&a * &iota_alg(&(&b1e * &b2))), c));
                }
            }
        }
    }
    let (psi, well_defined_residual) = AdjOp::from_images(product.module(), target.module(), &zs, &ws);
    let isometry_residual = (&psi.adjoint() * &psi).dist(&AdjOp::identity(product.module()));
    let surjective = psi.block_ranks(1e-8) == target.module().mults();
    Ok(ExpectationIso { psi, well_defined_residual, isometry_residual, surjective })
}

/// The map `a + I ↦ ρ(a) + J` between quotient algebras.
pub fn quotient_cp(rho: &CPMap, i: &Ideal, j: &Ideal, tol: f64) -> Result<CPMap> {
    let a_alg = rho.domain();
    let b_alg = rho.module().coeff();
    if rho.module() != &HilbertModule::trivial(b_alg) || i.algebra() != a_alg || j.algebra() != b_alg {
        return Err(Error::IncompatibleOperands("quotient needs a map between the ideals' algebras".into()));
    }
    let mut residual: f64 = 0.0;
    for (idx, u) in a_alg.basis().iter().enumerate() {
        let (blk, _, _) = a_alg.basis_triple(idx);
        if i.contains_block(blk) {
            residual = residual.max(j.distance(&rho.apply_elem(u)));
        }
    }
    if residual > tol {
        return Err(Error::IdealNotRespected { residual });
    }
    let qa = i.quotient_algebra().ok_or_else(|| {
        Error::InvalidArgument("the quotient by the full ideal is the zero algebra".into())
    })?;
    let qb = j.quotient_algebra().ok_or_else(|| {
        Error::InvalidArgument("the quotient by the full ideal is the zero algebra".into())
    })?;
    let keep_a = i.surviving_blocks();
    let keep_b = j.surviving_blocks();
    let lift = |x: &AlgElem| {
        let mut full = a_alg.zero();
        for (k, &blk) in keep_a.iter().enumerate() {
            *full.block_mut(blk) = x.block(k).clone();
        }
        full
    };
    let reduce = |y: &AlgElem| {
        AlgElem::new(&qb, keep_b.iter().map(|&blk| y.block(blk).clone()).collect())
            .expect("surviving blocks match the quotient shape")
    };
    CPMap::between_algebras(&qa, &qb, |x| reduce(&rho.apply_elem(&lift(x))), tol.max(1e-9))
}

/// The quotient map `A → A/I` applied to an element.
pub fn reduce_mod(i: &Ideal, a: &AlgElem) -> Option<AlgElem> {
    let q = i.quotient_algebra()?;
    AlgElem::new(&q, i.surviving_blocks().iter().map(|&b| a.block(b).clone()).collect()).ok()
}

/// `a ⊗ x` as a vector of the KSGNS module; re-exported for callers holding a [`Composite`].
pub fn dilation_vector(k: &KSGNSResult, a: &AlgElem, x: &ModVec) -> ModVec {
    k.embed(a, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::make_algebra;
    use crate::linalg::{cr, CMat};
    use crate::tensor::find_unitary_iso;

    fn compression(dom: &Algebra, x: &HilbertModule, v: &[CMat]) -> OpMap {
        // a ↦ Σ_j V_j* a_j V_j, block by block of the module
        OpMap::from_fn(dom, x, |a| {
            let blocks = (0..x.mults().len())
                .map(|l| {
                    let mut acc = CMat::zeros(x.mult(l), x.mult(l));
                    for j in 0..dom.num_blocks() {
                        let vj = &v[l * dom.num_blocks() + j];
                        acc += vj.adjoint() * a.block(j) * vj;
                    }
                    acc
                })
                .collect();
            AdjOp::new(x, x, blocks).unwrap()
        })
    }

    #[test]
    fn homomorphisms_and_compressions_are_cp() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = make_algebra(&[2, 1]).unwrap();
        assert!(is_completely_positive(&OpMap::left_multiplication(&a), 1e-12).0);
        let x = HilbertModule::new(&make_algebra(&[1, 2]).unwrap(), vec![3, 2]).unwrap();
        let v: Vec<CMat> = (0..2)
            .flat_map(|l| (0..2).map(move |j| (l, j)))
            .map(|(l, j)| linalg::random_cmat(&mut rng, a.block_dim(j), x.mult(l)))
            .collect();
        assert!(is_completely_positive(&compression(&a, &x, &v), 1e-12).0);
    }

    #[test]
    fn transpose_fails_with_negative_choi_eigenvalue() {
        let a = make_algebra(&[2]).unwrap();
        let t = CPMap::between_algebras(&a, &a, |x| AlgElem::new(&a, vec![x.block(0).transpose()]).unwrap(), 1e-9);
        match t {
            Err(Error::NotCompletelyPositive { min_eigenvalue, .. }) => {
                // the Choi matrix of the transpose is the swap, with spectrum {1,1,1,-1}
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("transpose accepted: {other:?}"),
        }
    }

    #[test]
    fn nonlinear_closure_is_rejected() {
        let a = make_algebra(&[1]).unwrap();
        let r = CPMap::between_algebras(&a, &a, |x| &(x * x) + &a.one(), 1e-9);
        assert!(matches!(r, Err(Error::NotLinear { .. })));
    }

    #[test]
    fn cp_is_closed_under_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = make_algebra(&[2]).unwrap();
        let b = make_algebra(&[3]).unwrap();
        let c = make_algebra(&[2, 1]).unwrap();
        let v = linalg::random_cmat(&mut rng, 2, 3);
        let rho = CPMap::between_algebras(&a, &b, |x| AlgElem::new(&b, vec![v.adjoint() * x.block(0) * &v]).unwrap(), 1e-9).unwrap();
        let w0 = linalg::random_cmat(&mut rng, 3, 2);
        let w1 = linalg::random_cmat(&mut rng, 3, 1);
        let sigma = CPMap::between_algebras(
            &b,
            &c,
            |x| AlgElem::new(&c, vec![w0.adjoint() * x.block(0) * &w0, w1.adjoint() * x.block(0) * &w1]).unwrap(),
            1e-9,
        )
        .unwrap();
        let comp = rho.then(&sigma, 1e-9).unwrap();
        assert!(is_completely_positive(comp.map(), 1e-9).0);
    }

    #[test]
    fn diagonal_compression_is_an_expectation() {
        let a = make_algebra(&[5]).unwrap();
        let b = make_algebra(&[2, 3]).unwrap();
        let am = HilbertModule::trivial(&a);
        let iota = OpMap::from_fn(&b, &am, |x| {
            AdjOp::from_elem(&AlgElem::new(&a, vec![linalg::direct_sum(x.block(0), x.block(1))]).unwrap())
        });
        let mut p1 = CMat::zeros(5, 5);
        for i in 0..2 {
            p1[(i, i)] = cr(1.0);
        }
        let p2 = CMat::identity(5, 5) - &p1;
        let rho = CPMap::between_algebras(
            &a,
            &a,
            |x| AlgElem::new(&a, vec![&p1 * x.block(0) * &p1 + &p2 * x.block(0) * &p2]).unwrap(),
            1e-9,
        )
        .unwrap();
        assert!(is_conditional_expectation(&rho, &iota, 1e-10));
        let id = CPMap::between_algebras(&a, &a, |x| x.clone(), 1e-9).unwrap();
        assert!(is_conditional_expectation(&id, &OpMap::left_multiplication(&a), 1e-10));
        let tr = CPMap::new(
            OpMap::from_fn(&a, &am, |x| AdjOp::from_elem(&AlgElem::new(&a, vec![x.block(0).transpose()]).unwrap())),
            f64::INFINITY,
        )
        .unwrap();
        assert!(conditional_expectation_residual(&tr, &OpMap::left_multiplication(&a)) > 0.5);
    }

    #[test]
    fn right_identity_and_failure_of_left_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = make_algebra(&[2]).unwrap();
        let x = HilbertModule::new(&make_algebra(&[1]).unwrap(), vec![3]).unwrap();
        let v = linalg::random_cmat(&mut rng, 2, 3);
        let rho = CPMap::new(compression(&a, &x, &[v]), 1e-9).unwrap();
        let p = PositiveCorrespondence::new(rho);
        let right = compose_pos(&p, &PositiveCorrespondence::identity(p.coeff()), 1e-9).unwrap();
        assert!(find_unitary_iso(right.corr.map(), p.map(), 1e-9).is_some());
        let left = compose_pos(&PositiveCorrespondence::identity(&a), &p, 1e-9).unwrap();
        let k = p.ksgns(1e-9).unwrap();
        assert!(find_unitary_iso(left.corr.map(), k.corr.phi(), 1e-9).is_some());
        // a compression of rank 2 is not multiplicative: the dilation is larger than X
        assert_ne!(k.module().dim(), p.module().dim());
    }

    #[test]
    fn quotient_of_identity() {
        let a = make_algebra(&[2, 1, 1]).unwrap();
        let id = CPMap::between_algebras(&a, &a, |x| x.clone(), 1e-9).unwrap();
        let i = Ideal::new(&a, vec![false, true, false]).unwrap();
        let q = quotient_cp(&id, &i, &i, 1e-9).unwrap();
        let qa = i.quotient_algebra().unwrap();
        for u in qa.basis() {
            assert!(q.apply_elem(&u).dist(&u) < 1e-14);
        }
        let zero = Ideal::zero(&a);
        let same = quotient_cp(&id, &zero, &zero, 1e-9).unwrap();
        assert_eq!(same.map(), id.map());
        let wrong = Ideal::new(&a, vec![false, false, true]).unwrap();
        assert!(matches!(quotient_cp(&id, &i, &wrong, 1e-9), Err(Error::IdealNotRespected { .. })));
    }
}
