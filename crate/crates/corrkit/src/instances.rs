//! Seeded random instances.
//!
//! Every generator draws from a caller-supplied RNG; the CLI and the test harness
//! seed a `ChaCha8Rng` so a failing instance is replayed by its seed alone.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::algebra::{AlgElem, Algebra};
use crate::bihilb::{BiHilbModule, Cover};
use crate::error::Result;
use crate::linalg::{self, CMat};
use crate::module::{AdjOp, HilbertModule, OpMap};
use crate::positivity::{CPMap, PositiveCorrespondence};
use crate::tensor::Correspondence;

/// `⊕ M_{n_i}` with `1..=max_blocks` blocks of size `1..=max_dim`.
pub fn random_algebra<R: Rng>(rng: &mut R, max_blocks: usize, max_dim: usize) -> Algebra {
    let k = rng.gen_range(1..=max_blocks);
    Algebra::new((0..k).map(|_| rng.gen_range(1..=max_dim)).collect()).expect("positive block sizes")
}

/// Multiplicities `0..=max_mult`, at least one of them positive.
pub fn random_module<R: Rng>(rng: &mut R, coeff: &Algebra, max_mult: usize) -> HilbertModule {
    let mut mults: Vec<usize> = (0..coeff.num_blocks()).map(|_| rng.gen_range(0..=max_mult)).collect();
    if mults.iter().all(|&m| m == 0) {
        let l = rng.gen_range(0..mults.len());
        mults[l] = 1.max(max_mult);
    }
    HilbertModule::new(coeff, mults).expect("one multiplicity per block")
}

/// Multiplicity table `k[l][j]` of the summand `M_{n_j}` in block `l` of a representation.
pub type Copies = Vec<Vec<usize>>;

/// Copies with `Σ_j k[l][j]·n_j ≤ max_mult` in each block. When `injective`, every
/// `j` occurs somewhere (so the representation is faithful).
pub fn random_copies<R: Rng>(
    rng: &mut R,
    a: &Algebra,
    b: &Algebra,
    max_mult: usize,
    injective: bool,
) -> Option<Copies> {
    let nb = b.num_blocks();
    let mut copies = vec![vec![0usize; a.num_blocks()]; nb];
    let mut room = vec![max_mult; nb];
    if injective {
        for j in 0..a.num_blocks() {
            let n = a.block_dim(j);
            let fits: Vec<usize> = (0..nb).filter(|&l| room[l] >= n).collect();
            if fits.is_empty() {
                return None;
            }
            let l = fits[rng.gen_range(0..fits.len())];
            copies[l][j] += 1;
            room[l] -= n;
        }
    }
    for l in 0..nb {
        for j in 0..a.num_blocks() {
            let n = a.block_dim(j);
            let extra = rng.gen_range(0..=room[l] / n);
            let extra = if extra > 0 { rng.gen_range(0..=extra) } else { 0 };
            copies[l][j] += extra;
            room[l] -= extra * n;
        }
    }
    if copies.iter().flatten().all(|&k| k == 0) {
        return None;
    }
    Some(copies)
}

/// `φ(a)_l = U_l (⊕_j I_{k_{lj}} ⊗ a_j ⊕ 0_{d_l}) U_l*` with random unitaries `U_l`.
pub fn hom_from_copies<R: Rng>(
    rng: &mut R,
    a: &Algebra,
    b: &Algebra,
    copies: &Copies,
    degenerate: &[usize],
) -> Result<Correspondence> {
    let mults: Vec<usize> = (0..b.num_blocks())
        .map(|l| degenerate[l] + (0..a.num_blocks()).map(|j| copies[l][j] * a.block_dim(j)).sum::<usize>())
        .collect();
    let x = HilbertModule::new(b, mults.clone())?;
    let us: Vec<CMat> = mults.iter().map(|&m| linalg::random_unitary(rng, m)).collect();
    let phi = OpMap::from_fn(a, &x, |e| {
        let blocks = (0..b.num_blocks())
            .map(|l| {
                let mut d = CMat::zeros(0, 0);
                for j in 0..a.num_blocks() {
                    let id = CMat::identity(copies[l][j], copies[l][j]);
                    d = linalg::direct_sum(&d, &linalg::kron(&id, e.block(j)));
                }
                d = linalg::direct_sum(&d, &CMat::zeros(degenerate[l], degenerate[l]));
                &us[l] * d * us[l].adjoint()
            })
            .collect();
        AdjOp::new(&x, &x, blocks).expect("block sizes match the multiplicities")
    });
    Ok(Correspondence::from_hom_unchecked(phi))
}

/// A nondegenerate `A–B` correspondence with at most `max_mult` rows per block.
pub fn random_hom_correspondence<R: Rng>(
    rng: &mut R,
    a: &Algebra,
    b: &Algebra,
    max_mult: usize,
    injective: bool,
) -> Option<Correspondence> {
    let copies = (0..32).find_map(|_| random_copies(rng, a, b, max_mult, injective))?;
    hom_from_copies(rng, a, b, &copies, &vec![0; b.num_blocks()]).ok()
}

/// `ρ(a)_l = Σ_j V_{jl}* (I_r ⊗ a_j) V_{jl}`, scaled so that `‖ρ(1)‖ = 1`.
pub fn random_cp<R: Rng>(rng: &mut R, a: &Algebra, x: &HilbertModule, rank: usize) -> OpMap {
    let vs: Vec<Vec<CMat>> = (0..x.mults().len())
        .map(|l| {
            (0..a.num_blocks())
                .map(|j| linalg::random_cmat(rng, rank * a.block_dim(j), x.mult(l)))
                .collect()
        })
        .collect();
    let raw = |e: &AlgElem| -> Vec<CMat> {
        (0..x.mults().len())
            .map(|l| {
                let m = x.mult(l);
                (0..a.num_blocks()).fold(CMat::zeros(m, m), |acc, j| {
                    let big = linalg::kron(&CMat::identity(rank, rank), e.block(j));
                    acc + vs[l][j].adjoint() * big * &vs[l][j]
                })
            })
            .collect()
    };
    let scale = raw(&a.one()).iter().map(linalg::op_norm).fold(0.0, f64::max);
    let s = if scale > 0.0 { scale.recip() } else { 1.0 };
    OpMap::from_fn(a, x, |e| {
        AdjOp::new(x, x, raw(e).into_iter().map(|m| m * linalg::cr(s)).collect()).expect("block shapes")
    })
}

/// Random positive definite weights `ω_{jl}` sized by the copies of a representation.
pub fn random_weights<R: Rng>(rng: &mut R, copies: &Copies) -> Vec<Vec<CMat>> {
    let nj = copies.first().map_or(0, Vec::len);
    (0..nj)
        .map(|j| {
            copies
                .iter()
                .map(|row| {
                    let k = row[j];
                    let g = linalg::random_cmat(rng, k, k);
                    &g * g.adjoint() + CMat::identity(k, k) * linalg::cr(0.5)
                })
                .collect()
        })
        .collect()
}

/// A correspondence `X = Y ⊕ Y^⊥` in a randomly rotated basis, with the projection onto `Y`.
#[derive(Clone, Debug)]
pub struct SplitInstance {
    pub x: Correspondence,
    pub p0: AdjOp,
    pub y_injective: bool,
}

/// `Y` is any nondegenerate correspondence (possibly with non-injective left action);
/// `Y^⊥` is injective, so the complement is regular. The total dimension is at most `max_dim`.
pub fn random_split<R: Rng>(rng: &mut R, a: &Algebra, max_dim: usize) -> Option<SplitInstance> {
    let half = max_dim / 2;
    let mult_cap = |rng: &mut R| -> usize { rng.gen_range(1..=half.max(1)) };
    let cy = mult_cap(rng);
    let y_inj = rng.gen_bool(0.5);
    let y = random_hom_correspondence(rng, a, a, cy, y_inj)?;
    let cp = mult_cap(rng);
    let perp = random_hom_correspondence(rng, a, a, cp, true)?;
    if y.dim() + perp.dim() > max_dim {
        return None;
    }
    let y_injective = y.phi().units().iter().all(|u| u.norm() > 0.5);
    let sum = y.direct_sum(&perp).ok()?;
    let module = sum.module().clone();
    let u = crate::module::random_unitary(rng, &module);
    let phi = sum.phi().conjugate_by(&u);
    let p_raw = AdjOp::identity(y.module()).direct_sum(&AdjOp::zero(perp.module(), perp.module())).ok()?;
    let p0 = &(&u * &p_raw) * &u.adjoint();
    Some(SplitInstance { x: Correspondence::from_hom_unchecked(phi), p0, y_injective })
}

/// `ℂⁿ` over `ℂ` with scalar left action.
pub fn scalar_correspondence(n: usize) -> Correspondence {
    let c = Algebra::diagonal(1).expect("one block");
    let m = HilbertModule::new(&c, vec![n]).expect("one multiplicity");
    Correspondence::from_hom_unchecked(OpMap::from_fn(&c, &m, |a| AdjOp::identity(&m).scale(a.block(0)[(0, 0)])))
}

/// A random strict CP map `ρ: A → End_B(X)` wrapped as a positive correspondence.
pub fn random_positive<R: Rng>(
    rng: &mut R,
    a: &Algebra,
    b: &Algebra,
    max_mult: usize,
    max_rank: usize,
    tol: f64,
) -> Result<PositiveCorrespondence> {
    let x = random_module(rng, b, max_mult);
    let rank = rng.gen_range(1..=max_rank.max(1));
    let rho = random_cp(rng, a, &x, rank);
    Ok(PositiveCorrespondence::new(CPMap::new(rho, tol)?))
}

/// `⊕_j ℂ^{n_j}` as an `A`–`ℂ^k` bimodule with the trace left inner product: a Morita
/// equivalence, presented in a random basis.
pub fn morita_instance<R: Rng>(rng: &mut R, a: &Algebra, tol: f64) -> Result<BiHilbModule> {
    let k = a.num_blocks();
    let b = Algebra::diagonal(k)?;
    let copies: Copies = (0..k).map(|l| (0..k).map(|j| usize::from(j == l)).collect()).collect();
    let corr = hom_from_copies(rng, a, &b, &copies, &vec![0; k])?;
    BiHilbModule::standard(&corr, tol)
}

/// An injective `X` over `A` with `dim X ≤ max_x` and a bi-Hilbertian `A`–`B` module `F`
/// with random weights and `dim F ≤ max_f`.
pub fn random_regular_pair<R: Rng>(
    rng: &mut R,
    max_x: usize,
    max_f: usize,
    tol: f64,
) -> Option<(Correspondence, BiHilbModule)> {
    let a = random_algebra(rng, 2, 2);
    let b = random_algebra(rng, 2, 2);
    let copies = random_copies(rng, &a, &b, max_f, true)?;
    let fcorr = hom_from_copies(rng, &a, &b, &copies, &vec![0; b.num_blocks()]).ok()?;
    if fcorr.dim() > max_f {
        return None;
    }
    let w = random_weights(rng, &copies);
    let f = BiHilbModule::from_weights(&fcorr, &w, tol).ok()?;
    let x = random_hom_correspondence(rng, &a, &a, max_x, true)?;
    (x.dim() <= max_x).then_some((x, f))
}

/// A `k`-fold cover of `m` points (`x̃ ↦ x̃ / k`) with a random permutation `γ`.
pub fn random_cover<R: Rng>(rng: &mut R, m: usize, k: usize) -> Cover {
    let mut gamma: Vec<usize> = (0..m).collect();
    gamma.shuffle(rng);
    Cover { m, gamma, mtilde: m * k, pi: (0..m * k).map(|t| t / k).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_homomorphisms_are_homomorphisms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_algebra(&mut rng, 3, 2);
            let b = random_algebra(&mut rng, 2, 2);
            if let Some(c) = random_hom_correspondence(&mut rng, &a, &b, 4, true) {
                assert!(c.phi().homomorphism_residual() < 1e-12);
                assert!(c.is_nondegenerate(1e-12));
                assert!(c.phi().units().iter().all(|u| u.norm() > 0.5));
            }
        }
    }

    #[test]
    fn generated_cp_maps_are_unital_in_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Algebra::new(vec![2, 1]).unwrap();
        let x = HilbertModule::new(&Algebra::new(vec![1, 2]).unwrap(), vec![2, 1]).unwrap();
        let rho = random_cp(&mut rng, &a, &x, 2);
        assert!((rho.apply(&a.one()).norm() - 1.0).abs() < 1e-12);
        let (cp, _) = crate::positivity::is_completely_positive(&rho, 1e-10);
        assert!(cp);
    }

    #[test]
    fn split_projection_is_bimodular() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Algebra::new(vec![1, 1]).unwrap();
        let mut found = 0;
        for _ in 0..20 {
            if let Some(s) = random_split(&mut rng, &a, 6) {
                found += 1;
                assert!(s.p0.projection_residual() < 1e-12);
                assert!(crate::fock::correspondence_projection_residual(&s.x, &s.p0) < 1e-12);
            }
        }
        assert!(found > 0);
    }
}
