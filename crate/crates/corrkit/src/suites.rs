//! Property suites behind `corrkit verify` and the acceptance harness.
//!
//! Every suite draws its instances from `ChaCha8Rng::seed_from_u64(seed)` and reports
//! one [`Check`] per property. A check carries either the largest residual over all
//! instances or, for properties decided exactly, the number of failing instances.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::Algebra;
use crate::bihilb::{covering_bimodule, watatani_index, Ambient, BiHilbModule, Cover, IndexedBimodule, Triple};
use crate::error::Result;
use crate::fock::{
    check_covariance, covariance_ideal, fock_expectation, induced_fock_projection, projected_creation,
    sub_correspondence, subproduct_projection, CorrMorphism, FockOp, SubproductSystem, TruncFock,
};
use crate::graphalg::{kappa_check, random_regular_split, GraphSpec, KappaReport, Subgraph};
use crate::instances;
use crate::linalg::cr;
use crate::module::{AdjOp, ModVec};
use crate::positivity::{compose_pos, PositiveCorrespondence};
use crate::tensor::{find_unitary_iso, ksgns, Correspondence};

/// Tolerance for identities the toolkit treats as exact.
pub const EXACT_TOL: f64 = 1e-10;
/// Tolerance for index values.
pub const INDEX_TOL: f64 = 1e-12;

/// One verified property.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub paper_ref: String,
    pub residual: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when the residual is finite and at most `tol`.
    pub fn within(name: impl Into<String>, paper_ref: &str, residual: f64, tol: f64) -> Self {
        Self::flag(name, paper_ref, residual, residual <= tol)
    }

    /// A count of failing instances; passes when it is zero.
    pub fn count(name: impl Into<String>, paper_ref: &str, failures: usize) -> Self {
        Self::flag(name, paper_ref, failures as f64, failures == 0)
    }

    pub fn flag(name: impl Into<String>, paper_ref: &str, residual: f64, pass: bool) -> Self {
        let finite = residual.is_finite();
        Self {
            name: name.into(),
            paper_ref: paper_ref.to_string(),
            residual: if finite { residual } else { f64::MAX },
            pass: pass && finite,
        }
    }

    fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}{}", self.name);
        self
    }
}

/// Checks accumulated over many instances, merged by name.
#[derive(Default)]
struct Tally {
    order: Vec<String>,
    checks: BTreeMap<String, Check>,
}

impl Tally {
    fn push(&mut self, c: Check) {
        match self.checks.get_mut(&c.name) {
            Some(old) => {
                old.residual = old.residual.max(c.residual);
                old.pass &= c.pass;
            }
            None => {
                self.order.push(c.name.clone());
                self.checks.insert(c.name.clone(), c);
            }
        }
    }

    fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        for c in cs {
            self.push(c);
        }
    }

    /// Records an instance whose construction failed.
    fn error(&mut self, what: &str, e: &crate::error::Error) {
        self.push(Check::flag(format!("{what}: {e}"), "construction", 1.0, false));
    }

    fn finish(mut self) -> Vec<Check> {
        self.order.iter().filter_map(|n| self.checks.remove(n)).collect()
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const REF_DILATION: &str = "KSGNS dilation rho(a) = V* pi(a) V";
const REF_DENSITY: &str = "KSGNS minimality: span pi(A) V X";
const REF_RIGHT_ID: &str = "right identity of the Quesadilla semi-category";
const REF_LEFT_ID: &str = "left identity yields the KSGNS correspondence";
const REF_ASSOC: &str = "associativity of composition of positive correspondences";
const REF_RETRACT: &str = "KSGNS o U = Id on the Enchilada category";
const REF_IDEMPOTENT: &str = "U o KSGNS is idempotent";

/// Criterion-level check of the KSGNS construction on `count` random CP maps with at
/// most three blocks of size at most three on each side.
pub fn ksgns_dilation_checks(seed: u64, count: usize, tol: f64) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let mut t = Tally::default();
    for _ in 0..count {
        let a = instances::random_algebra(&mut rng, 3, 3);
        let b = instances::random_algebra(&mut rng, 3, 3);
        let x = instances::random_module(&mut rng, &b, 3);
        let rank = rng.gen_range(1..=2);
        let rho = instances::random_cp(&mut rng, &a, &x, rank);
        match ksgns(&rho, tol) {
            Ok(k) => {
                t.push(Check::within("dilation identity", REF_DILATION, k.dilation_residual(), tol));
                t.push(Check::count("dilation density by rank", REF_DENSITY, usize::from(!k.is_dense(tol))));
            }
            Err(e) => t.error("KSGNS construction", &e),
        }
    }
    t.finish()
}

/// `KSGNS ∘ U = Id` on nondegenerate *-homomorphism correspondences and idempotence of
/// `U ∘ KSGNS` on CP maps.
pub fn retract_checks(seed: u64, count: usize, tol: f64) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let mut t = Tally::default();
    let mut done = 0;
    while done < count {
        let a = instances::random_algebra(&mut rng, 3, 2);
        let b = instances::random_algebra(&mut rng, 3, 2);
        let injective = rng.gen_bool(0.5);
        let Some(x) = instances::random_hom_correspondence(&mut rng, &a, &b, 4, injective) else {
            continue;
        };
        done += 1;
        match ksgns(x.phi(), tol) {
            Ok(k) => {
                let found = find_unitary_iso(k.corr.phi(), x.phi(), tol).is_some();
                t.push(Check::count("KSGNS of a homomorphism is unitarily the original", REF_RETRACT, usize::from(!found)));
            }
            Err(e) => t.error("KSGNS construction", &e),
        }
    }
    for _ in 0..count {
        let a = instances::random_algebra(&mut rng, 2, 2);
        let b = instances::random_algebra(&mut rng, 2, 2);
        let x = instances::random_module(&mut rng, &b, 2);
        let rho = instances::random_cp(&mut rng, &a, &x, 2);
        let twice = ksgns(&rho, tol).and_then(|k| Ok((ksgns(k.corr.phi(), tol)?, k)));
        match twice {
            Ok((k2, k)) => {
                let found = find_unitary_iso(k2.corr.phi(), k.corr.phi(), tol).is_some();
                t.push(Check::count("KSGNS applied twice agrees up to unitary", REF_IDEMPOTENT, usize::from(!found)));
            }
            Err(e) => t.error("KSGNS construction", &e),
        }
    }
    t.finish()
}

fn small_positive<R: Rng>(rng: &mut R, a: &Algebra, b: &Algebra, tol: f64) -> Result<PositiveCorrespondence> {
    instances::random_positive(rng, a, b, 2, 2, tol)
}

/// Right identity and left identity on `count` positive correspondences, associativity
/// on `triples` composable triples.
pub fn semicategory_checks(seed: u64, count: usize, triples: usize, tol: f64) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let mut t = Tally::default();
    for _ in 0..count {
        let a = instances::random_algebra(&mut rng, 2, 2);
        let b = instances::random_algebra(&mut rng, 2, 2);
        let run = |p: &PositiveCorrespondence| -> Result<(bool, bool)> {
            let right = compose_pos(p, &PositiveCorrespondence::identity(p.coeff()), tol)?;
            let right_ok = find_unitary_iso(right.corr.map(), p.map(), tol).is_some();
            let left = compose_pos(&PositiveCorrespondence::identity(p.left_alg()), p, tol)?;
            let k = p.ksgns(tol)?;
            let left_ok = left.corr.module() == k.module() && find_unitary_iso(left.corr.map(), k.corr.phi(), tol).is_some();
            Ok((right_ok, left_ok))
        };
        match small_positive(&mut rng, &a, &b, tol).and_then(|p| run(&p)) {
            Ok((r, l)) => {
                t.push(Check::count("right identity isomorphism", REF_RIGHT_ID, usize::from(!r)));
                t.push(Check::count("left identity is the KSGNS module", REF_LEFT_ID, usize::from(!l)));
            }
            Err(e) => t.error("identity composition", &e),
        }
    }
    for _ in 0..triples {
        let algs: Vec<Algebra> = (0..4).map(|_| instances::random_algebra(&mut rng, 2, 2)).collect();
        let mut run = || -> Result<bool> {
            let p = small_positive(&mut rng, &algs[0], &algs[1], tol)?;
            let q = small_positive(&mut rng, &algs[1], &algs[2], tol)?;
            let r = small_positive(&mut rng, &algs[2], &algs[3], tol)?;
            let left = compose_pos(&compose_pos(&p, &q, tol)?.corr, &r, tol)?;
            let right = compose_pos(&p, &compose_pos(&q, &r, tol)?.corr, tol)?;
            Ok(find_unitary_iso(left.corr.map(), right.corr.map(), tol).is_some())
        };
        match run() {
            Ok(ok) => t.push(Check::count("associativity unitary", REF_ASSOC, usize::from(!ok))),
            Err(e) => t.error("triple composition", &e),
        }
    }
    t.finish()
}

const REF_J: &str = "J_X = J_Y for a complemented sub-correspondence with regular complement";
const REF_BIMODULE: &str = "Psi_P(alpha(b1) a alpha(b2)) = b1 Psi_P(a) b2";
const REF_GENERATORS: &str = "Psi_P(T_xi T_eta*) = T_{P xi} T_{P eta}*";
const REF_COMPACTS: &str = "Psi_P(Theta_{xi,eta}) = Theta_{P xi, P eta}";
const REF_COVARIANCE: &str = "alpha cannot descend to a *-homomorphism (rank-one gap)";

fn randoms<R: Rng>(rng: &mut R, x: &Correspondence, k: usize) -> Vec<ModVec> {
    (0..k).map(|_| x.module().random(rng)).collect()
}

/// The Fock expectation identities for one split `X = P_0X ⊕ (1 − P_0)X` at depth `N`.
pub fn expectation_instance<R: Rng>(
    rng: &mut R,
    x: &Correspondence,
    p0: &AdjOp,
    depth: usize,
    tol: f64,
) -> Result<Vec<Check>> {
    let f = TruncFock::new(x, depth, tol)?;
    let p = induced_fock_projection(p0, &f, tol)?;
    let (y, iota) = sub_correspondence(x, p0, tol)?;
    let fy = TruncFock::new(&y, depth, tol)?;
    let w = fy.levelwise(&f, &iota);
    let wa = w.adjoint();
    let to_y = |t: &FockOp| FockOp::new(&(&wa * &t.op) * &w, t.creations, t.annihilations);
    let alpha = |t: &FockOp| FockOp::new(&(&w * &t.op) * &wa, t.creations, t.annihilations);
    let down = |xs: &[ModVec]| -> Vec<ModVec> { xs.iter().map(|v| iota.adjoint().apply(v)).collect() };

    let jx = covariance_ideal(x, tol)?;
    let jy = covariance_ideal(&y, tol)?;
    let mut out = vec![Check::count("J_X = J_Y as block masks", REF_J, usize::from(jx.mask() != jy.mask()))];

    let mut gen: f64 = 0.0;
    for k in 0..depth {
        for l in 0..depth {
            let (xs, ys) = (randoms(rng, x, k), randoms(rng, x, l));
            let t = f.word(&xs).mul(&f.word(&ys).adjoint());
            let lhs = to_y(&fock_expectation(&f, &p, &t, tol)?);
            let rhs = fy.word(&down(&xs)).mul(&fy.word(&down(&ys)).adjoint());
            gen = gen.max(fy.window_residual(&lhs.sub(&rhs)));
        }
    }
    out.push(Check::within("expectation of T_xi T_eta* on the interior window", REF_GENERATORS, gen, tol));

    let mut bim: f64 = 0.0;
    for _ in 0..3 {
        let r = y.left_alg().random(rng);
        let b1 = fy.left_action(&r).mul(&fy.word(&randoms(rng, &y, 1)));
        let b2 = fy.word(&randoms(rng, &y, 1)).adjoint();
        let a = f.word(&randoms(rng, x, 1)).mul(&f.word(&randoms(rng, x, 1)).adjoint());
        let lhs = to_y(&fock_expectation(&f, &p, &alpha(&b1).mul(&a).mul(&alpha(&b2)), tol)?);
        let rhs = b1.mul(&to_y(&fock_expectation(&f, &p, &a, tol)?)).mul(&b2);
        bim = bim.max(fy.window_residual(&lhs.sub(&rhs)));
    }
    out.push(Check::within("bimodule property on the interior window", REF_BIMODULE, bim, tol));

    let mut theta: f64 = 0.0;
    for n in 0..=depth {
        for m in 0..=depth {
            let xi = f.inject(n, &f.level(n).random(rng));
            let eta = f.inject(m, &f.level(m).random(rng));
            let t = FockOp::new(AdjOp::rank_one(&xi, &eta)?, 0, 0);
            let lhs = fock_expectation(&f, &p, &t, tol)?;
            let rhs = AdjOp::rank_one(&p.op.apply(&xi), &p.op.apply(&eta))?;
            theta = theta.max(lhs.op.dist(&rhs));
        }
    }
    out.push(Check::within("compacts map to compacts", REF_COMPACTS, theta, tol.min(EXACT_TOL)));
    Ok(out)
}

/// Random splits with `dim X ≤ max_dim` over at most three blocks.
pub fn fock_expectation_checks(seed: u64, count: usize, depth: usize, max_dim: usize, tol: f64) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let mut t = Tally::default();
    let mut done = 0;
    let mut attempts = 0;
    while done < count && attempts < 100 * count.max(1) {
        attempts += 1;
        let a = instances::random_algebra(&mut rng, 3, 2);
        let Some(s) = instances::random_split(&mut rng, &a, max_dim) else { continue };
        done += 1;
        match expectation_instance(&mut rng, &s.x, &s.p0, depth, tol) {
            Ok(cs) => t.extend(cs),
            Err(e) => t.error("split instance", &e),
        }
    }
    t.push(Check::count("random splits generated", "instance generation", count - done));
    t.finish()
}

/// `X = ℂ²`, `Y = ℂe₁` over `ℂ`: covariance fails by the rank-one gap while the
/// expectation identities hold on the same instance.
pub fn covariance_example_checks(seed: u64, depth: usize, tol: f64) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let x = instances::scalar_correspondence(2);
    let mut p0 = AdjOp::zero(x.module(), x.module());
    p0.block_mut(0)[(0, 0)] = cr(1.0);
    let mut t = Tally::default();
    let cov = sub_correspondence(&x, &p0, tol)
        .and_then(|(y, iota)| check_covariance(&CorrMorphism::inclusion(&iota), &y, &x, tol));
    match cov {
        Ok((covariant, res)) => t.push(Check::flag(
            "example inclusion fails covariance with residual >= 1",
            REF_COVARIANCE,
            res,
            !covariant && res >= 1.0 - EXACT_TOL,
        )),
        Err(e) => t.error("example covariance", &e),
    }
    match expectation_instance(&mut rng, &x, &p0, depth, tol) {
        Ok(cs) => t.extend(cs.into_iter().map(|c| c.prefixed("example: "))),
        Err(e) => t.error("example expectation", &e),
    }
    t.finish()
}

const REF_SUBPRODUCT: &str = "projected creation operators T^P_xi := P T_xi";
const REF_SYMMETRIC: &str = "symmetric subproduct system: P_k onto symmetric tensors";

/// Symmetric subproduct system of `ℂ^d` at depth `N`.
pub fn subproduct_checks(seed: u64, d: usize, depth: usize, tol: f64) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let mut t = Tally::default();
    let run = |rng: &mut ChaCha8Rng| -> Result<Vec<Check>> {
        let s = SubproductSystem::symmetric(d, depth, tol)?;
        let dims: Vec<usize> = s.fibers().iter().map(Correspondence::dim).collect();
        let expected: Vec<usize> = (0..=depth).map(|n| binomial(n + d - 1, d - 1)).collect();
        let bad = dims.iter().zip(&expected).filter(|(a, b)| a != b).count() + dims.len().abs_diff(expected.len());
        let x1 = &s.fibers()[1];
        let f = TruncFock::new(x1, depth, tol)?;
        let p = subproduct_projection(&s, &f, tol)?;
        let ranks: Vec<usize> = (0..=depth).map(|n| f.extract_op(n, &p.op).linear_rank(EXACT_TOL)).collect();
        let bad_ranks = ranks.iter().zip(&expected).filter(|(a, b)| a != b).count();
        let comp = FockOp::new(&AdjOp::identity(f.total()) - &p.op, 0, 0);
        let mut absorb: f64 = 0.0;
        let mut mult: f64 = 0.0;
        for _ in 0..4 {
            let v = randoms(rng, x1, 3);
            absorb = absorb.max(f.window_residual(&projected_creation(&f, &p, &v[0]).mul(&comp)));
            let ambient = f.word(&v[..2]).mul(&f.creation(&v[2]).adjoint());
            let lhs = fock_expectation(&f, &p, &ambient, tol)?;
            let tp: Vec<FockOp> = v.iter().map(|u| fock_expectation(&f, &p, &f.creation(u), tol)).collect::<Result<_>>()?;
            let rhs = tp[0].mul(&tp[1]).mul(&tp[2].adjoint());
            mult = mult.max(f.window_residual(&lhs.sub(&rhs)));
        }
        Ok(vec![
            Check::count("fibre dimensions", REF_SYMMETRIC, bad),
            Check::count("Fock projection ranks", REF_SYMMETRIC, bad_ranks),
            Check::within("P T_xi (1 - P) = 0 on the interior window", REF_SUBPRODUCT, absorb, tol),
            Check::within("compression is multiplicative on Wick-ordered words", REF_SUBPRODUCT, mult, tol),
        ])
    };
    match run(&mut rng) {
        Ok(cs) => t.extend(cs),
        Err(e) => t.error("subproduct system", &e),
    }
    t.finish()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

const REF_INDEX: &str = "Watatani index e^beta = sum of left inner products over a right frame";
const REF_MORITA: &str = "Morita equivalence bimodules have index 1";
const REF_W: &str = "W_n isometric with range P_n";
const REF_PSI: &str = "psi(x)* psi(y) = pi(<x|y>)";
const REF_PHI_ALPHA: &str = "Phi_P o alpha = Id";
const REF_CLOSED: &str = "closed form of Phi_P on generators";
const REF_Z: &str = "<Theta_{f1,f2} | a Z> = e^{-beta/2} _A<f2|f1> a";

/// Morita instances, `ℂⁿ`, `k`-fold covers and frame independence.
pub fn index_checks(seed: u64, count: usize, tol: f64) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let mut t = Tally::default();
    let frame = |t: &mut Tally, f: &BiHilbModule| {
        t.push(Check::within("frame independence", REF_INDEX, watatani_index(f).frame_residual, EXACT_TOL));
    };
    for _ in 0..count {
        let a = instances::random_algebra(&mut rng, 3, 3);
        match instances::morita_instance(&mut rng, &a, tol) {
            Ok(f) => {
                let idx = watatani_index(&f);
                t.push(Check::within("Morita index is 1", REF_MORITA, idx.ebeta.dist(&a.one()), INDEX_TOL));
                frame(&mut t, &f);
            }
            Err(e) => t.error("Morita instance", &e),
        }
    }
    for n in 1..=6 {
        match BiHilbModule::standard(&instances::scalar_correspondence(n), tol) {
            Ok(f) => {
                let idx = watatani_index(&f);
                let res = idx.ebeta.dist(&f.left_alg().one().scale(cr(n as f64)));
                t.push(Check::within("C^n has index n", REF_INDEX, res, INDEX_TOL));
                frame(&mut t, &f);
            }
            Err(e) => t.error("scalar instance", &e),
        }
    }
    for k in 1..=4 {
        for m in 1..=3 {
            let cover = instances::random_cover(&mut rng, m, k);
            match covering_bimodule(&cover, tol) {
                Ok(ex) => {
                    let idx = watatani_index(&ex.f);
                    let res = idx.ebeta.dist(&ex.f.left_alg().one().scale(cr(k as f64)));
                    t.push(Check::within("k-fold cover has index k", REF_INDEX, res, INDEX_TOL));
                    frame(&mut t, &ex.f);
                }
                Err(e) => t.error("cover instance", &e),
            }
        }
    }
    for _ in 0..count {
        if let Some((_, f)) = instances::random_regular_pair(&mut rng, 4, 6, tol) {
            frame(&mut t, &f);
        }
    }
    t.finish()
}

/// The conjugate-Fock apparatus for one pair `(X, F)` at depth `N`.
pub fn ambient_instance<R: Rng>(rng: &mut R, amb: &Ambient, tol: f64) -> Result<Vec<Check>> {
    let x = amb.fock().corr().clone();
    let fm = amb.indexed().bimodule().module().clone();
    let depth = amb.depth();
    let mut iso: f64 = 0.0;
    let mut range: f64 = 0.0;
    for n in 0..=depth {
        let w = amb.wn(n);
        iso = iso.max((&w.adjoint() * w).dist(&AdjOp::identity(w.source())));
        range = range.max((w * &w.adjoint()).dist(amb.pn(n)));
    }
    let mut psi: f64 = 0.0;
    let mut alpha: f64 = 0.0;
    let fock = amb.fock();
    for _ in 0..2 {
        let v = randoms(rng, &x, 3);
        let (p0, p1) = (amb.psi(&v[0]), amb.psi(&v[1]));
        let lhs = p0.adjoint().mul(&p1);
        psi = psi.max(amb.window_residual(&lhs.sub(&amb.pi(&v[0].ip(&v[1])))));

        let a = x.left_alg().random(rng);
        let words: Vec<(FockOp, FockOp)> = vec![
            (amb.pi(&a), fock.left_action(&a)),
            (p0.clone(), fock.creation(&v[0])),
            (p0.adjoint(), fock.creation(&v[0]).adjoint()),
            (p0.mul(&p1), fock.word(&v[..2])),
            (p0.mul(&p1.adjoint()), fock.creation(&v[0]).mul(&fock.creation(&v[1]).adjoint())),
            (p0.adjoint().mul(&p1), fock.creation(&v[0]).adjoint().mul(&fock.creation(&v[1]))),
            (p0.adjoint().mul(&p1.adjoint()), fock.creation(&v[0]).adjoint().mul(&fock.creation(&v[1]).adjoint())),
            (amb.pi(&a).mul(&p0), fock.left_action(&a).mul(&fock.creation(&v[0]))),
        ];
        for (ambient, word) in words {
            alpha = alpha.max(fock.window_residual(&amb.phi_expectation(&ambient).sub(&word)));
        }
    }
    let mut closed: f64 = 0.0;
    let triple = |rng: &mut R| Triple { f: fm.random(rng), x: x.module().random(rng), g: fm.random(rng) };
    for (m, n) in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2)] {
        if m.max(n) > depth {
            continue;
        }
        let z: Vec<Triple> = (0..m).map(|_| triple(rng)).collect();
        let w: Vec<Triple> = (0..n).map(|_| triple(rng)).collect();
        let (g0, h0) = (fm.random(rng), fm.random(rng));
        let lhs = amb.phi_expectation(&amb.generator(&g0, &h0, &z, &w));
        let rhs = amb.phi_closed_form(&g0, &h0, &z, &w);
        closed = closed.max(fock.window_residual(&lhs.sub(&rhs)));
    }
    let ib: &IndexedBimodule = amb.indexed();
    let (zp, _) = ib.z_pairing_residuals(&fm.random(rng), &fm.random(rng), &ib.bimodule().left_alg().random(rng));
    Ok(vec![
        Check::within("W_n isometries", REF_W, iso, tol),
        Check::within("P_n = W_n W_n*", REF_W, range, tol),
        Check::within("psi(x)* psi(y) = pi(<x|y>) on the interior window", REF_PSI, psi, tol),
        Check::within("Phi_P o alpha = Id on words of length <= 2", REF_PHI_ALPHA, alpha, tol),
        Check::within("closed form matches direct compression", REF_CLOSED, closed, tol),
        Check::within("Z pairing with the left inner product", REF_Z, zp, tol),
    ])
}

/// Random regular `X` (`dim ≤ max_x`) and `F` (`dim ≤ max_f`) at depth `N`; pairs whose
/// ambient levels exceed `max_level` are redrawn.
pub fn ambient_checks(seed: u64, count: usize, depth: usize, max_x: usize, max_f: usize, tol: f64) -> Vec<Check> {
    const MAX_LEVEL: usize = 160;
    let mut rng = rng_for(seed);
    let mut t = Tally::default();
    let mut done = 0;
    let mut attempts = 0;
    while done < count && attempts < 200 * count.max(1) {
        attempts += 1;
        let Some((x, f)) = instances::random_regular_pair(&mut rng, max_x, max_f, tol) else { continue };
        match Ambient::bounded(&x, &f, depth, tol, MAX_LEVEL) {
            Ok(Some(amb)) => {
                done += 1;
                match ambient_instance(&mut rng, &amb, tol) {
                    Ok(cs) => t.extend(cs),
                    Err(e) => t.error("ambient instance", &e),
                }
            }
            Ok(None) => {}
            Err(e) => {
                done += 1;
                t.error("ambient construction", &e);
            }
        }
    }
    t.push(Check::count("random pairs generated", "instance generation", count - done));
    t.finish()
}

const REF_KAPPA: &str = "kappa: KSGNS module of the projected expectation onto the Fock module of F";

/// The checks of a [`KappaReport`], one per identity family.
pub fn kappa_report_checks(r: &KappaReport) -> Vec<Check> {
    vec![
        Check::count("null generators map to zero", REF_KAPPA, r.null_failures),
        Check::count("inner products preserved within a level", REF_KAPPA, r.same_level_mismatches),
        Check::count("inner products preserved across levels", REF_KAPPA, r.cross_level_mismatches),
        Check::count("cross-validation through polynomial routines", REF_KAPPA, r.cross_validation_failures),
        Check::count("surjectivity on Fock generators", REF_KAPPA, r.surjectivity_failures),
        Check::count("left action case formula", REF_KAPPA, r.left_action_failures),
    ]
}

pub fn kappa_checks(f: &Subgraph, depth: usize) -> Vec<Check> {
    match kappa_check(f, depth) {
        Ok(r) => kappa_report_checks(&r),
        Err(e) => {
            let mut t = Tally::default();
            t.error("kappa", &e);
            t.finish()
        }
    }
}

/// Two loops with `F` one loop at depth `N`, then a random 4-vertex graph with a
/// regular-complement subgraph at depth `N − 1`.
pub fn graph_kappa_checks(seed: u64, depth: usize) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let e = GraphSpec::bouquet(2);
    let mut out: Vec<Check> = match Subgraph::from_edges(&e, &["e1"]) {
        Ok(f) => kappa_checks(&f, depth).into_iter().map(|c| c.prefixed("two loops: ")).collect(),
        Err(e) => vec![Check::flag(format!("two loops: {e}"), "construction", 1.0, false)],
    };
    let (_, f) = random_regular_split(&mut rng, 4, 0);
    out.extend(kappa_checks(&f, depth.saturating_sub(1).max(1)).into_iter().map(|c| c.prefixed("random graph: ")));
    out
}

const REF_COVER_DIM: &str = "conjugated correspondence of a cover: fibre product dimension";
const REF_COVER_FORMULA: &str = "fibre-sum formula for the conjugated inner product";
const REF_COVER_INDEX: &str = "index of a cover is the fibre cardinality";

/// The covering example for any valid cover.
pub fn covering_checks(seed: u64, cover: &Cover, tol: f64) -> Vec<Check> {
    let mut rng = rng_for(seed);
    let ex = match covering_bimodule(cover, tol) {
        Ok(ex) => ex,
        Err(e) => {
            let mut t = Tally::default();
            t.error("cover", &e);
            return t.finish();
        }
    };
    let dim = ex.conjugated.corr.dim();
    let expected = cover.fibre_product_size();
    let ebeta = watatani_index(&ex.f).ebeta;
    let fibres: Vec<usize> = (0..cover.m).map(|x| cover.fibre(x).len()).collect();
    let index_res = fibres
        .iter()
        .enumerate()
        .map(|(x, &k)| (ebeta.block(x)[(0, 0)] - cr(k as f64)).norm())
        .fold(0.0, f64::max);
    let label = match fibres.first() {
        Some(&k) if fibres.iter().all(|&j| j == k) => format!("index e^beta = {k}"),
        _ => "index e^beta = fibre cardinality".to_string(),
    };
    vec![
        Check::count(format!("dimension {dim} = fibre product size {expected}"), REF_COVER_DIM, dim.abs_diff(expected)),
        Check::within("inner product formula", REF_COVER_FORMULA, ex.inner_formula_residual(&mut rng, 20), tol.min(EXACT_TOL)),
        Check::within(label, REF_COVER_INDEX, index_res, INDEX_TOL),
    ]
}

/// The 2-fold cover of three points with the 3-cycle.
pub fn double_cover() -> Cover {
    Cover { m: 3, gamma: vec![1, 2, 0], mtilde: 6, pi: vec![0, 0, 1, 1, 2, 2] }
}
