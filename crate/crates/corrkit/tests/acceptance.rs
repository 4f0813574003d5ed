//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Tolerances and instance sizes are pinned below. Criteria whose statement is false
//! as written are listed in `KNOWN_FAILURES` together with the checks expected to fail;
//! the run still fails if any other check fails or if a known failure starts passing.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use corrkit::fock::{truncated_fock, SubproductSystem};
use corrkit::graphalg::{graph_correspondence, GraphSpec};
use corrkit::suites::{self, Check};
use corrkit::tensor::Correspondence;

const SEED: u64 = 20_240_601;
const TOL: f64 = 1e-9;
const EXACT: f64 = 1e-10;
const INDEX: f64 = 1e-12;

/// `(criterion, substring of the failing check names)`.
const KNOWN_FAILURES: &[(usize, &str)] = &[(4, "J_X = J_Y"), (9, "across levels")];

struct Outcome {
    checks: Vec<Check>,
    extra: Vec<(String, bool)>,
    elapsed: Duration,
    budget: Option<Duration>,
}

impl Outcome {
    fn failing(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        out.extend(self.extra.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.clone()));
        if self.budget.is_some_and(|b| self.elapsed > b) {
            out.push(format!("runtime {:.1} s over budget", self.elapsed.as_secs_f64()));
        }
        out
    }
}

fn timed(budget: Option<u64>, f: impl FnOnce() -> (Vec<Check>, Vec<(String, bool)>)) -> Outcome {
    let start = Instant::now();
    let (checks, extra) = f();
    Outcome { checks, extra, elapsed: start.elapsed(), budget: budget.map(Duration::from_secs) }
}

fn max_residual(cs: &[Check], pat: &str) -> f64 {
    cs.iter().filter(|c| c.name.contains(pat)).map(|c| c.residual).fold(0.0, f64::max)
}

/// Re-checks suite residuals against the pinned tolerance for that property.
fn pinned(cs: &[Check], pat: &str, tol: f64) -> (String, bool) {
    let r = max_residual(cs, pat);
    (format!("{pat}: residual {r:.2e} <= {tol:.0e}"), cs.iter().any(|c| c.name.contains(pat)) && r <= tol)
}

fn criterion_1() -> Outcome {
    timed(Some(30), || {
        let cs = suites::ksgns_dilation_checks(SEED, 200, TOL);
        let extra = vec![pinned(&cs, "dilation identity", TOL)];
        (cs, extra)
    })
}

fn criterion_2() -> Outcome {
    timed(None, || (suites::semicategory_checks(SEED, 100, 50, TOL), vec![]))
}

fn criterion_3() -> Outcome {
    timed(None, || (suites::retract_checks(SEED, 100, TOL), vec![]))
}

fn criterion_4() -> Outcome {
    timed(None, || {
        let cs = suites::fock_expectation_checks(SEED, 20, 4, 6, TOL);
        let extra = vec![
            pinned(&cs, "expectation of T_xi T_eta*", TOL),
            pinned(&cs, "bimodule property", TOL),
            pinned(&cs, "compacts map to compacts", EXACT),
        ];
        (cs, extra)
    })
}

fn criterion_5() -> Outcome {
    timed(None, || {
        let cs = suites::covariance_example_checks(SEED, 4, TOL);
        // The gap is φ_X(1) − ψ⁽¹⁾(φ_Y(1)) = Id_{ℂ²} − e₁e₁*, a rank-one projection of norm 1.
        let gap = max_residual(&cs, "fails covariance");
        let extra = vec![(format!("covariance residual {gap} equals the rank-one gap 1"), (gap - 1.0).abs() <= EXACT)];
        (cs, extra)
    })
}

fn criterion_6() -> Outcome {
    timed(None, || {
        let cs = suites::subproduct_checks(SEED, 2, 5, TOL);
        let dims: Vec<usize> = SubproductSystem::symmetric(2, 5, TOL)
            .map(|s| s.fibers().iter().map(Correspondence::dim).collect())
            .unwrap_or_default();
        let extra = vec![
            (format!("symmetric fibre dimensions {dims:?}"), dims == [1, 2, 3, 4, 5, 6]),
            pinned(&cs, "P T_xi (1 - P)", TOL),
            pinned(&cs, "multiplicative", TOL),
        ];
        (cs, extra)
    })
}

fn criterion_7() -> Outcome {
    timed(None, || {
        let cs = suites::index_checks(SEED, 20, TOL);
        let extra = vec![
            pinned(&cs, "Morita index is 1", INDEX),
            pinned(&cs, "C^n has index n", INDEX),
            pinned(&cs, "k-fold cover has index k", INDEX),
            pinned(&cs, "frame independence", EXACT),
        ];
        (cs, extra)
    })
}

fn criterion_8() -> Outcome {
    timed(Some(120), || {
        let cs = suites::ambient_checks(SEED, 10, 3, 4, 6, TOL);
        let extra = ["W_n isometries", "P_n = W_n W_n*", "psi(x)* psi(y)", "Phi_P o alpha", "closed form"]
            .iter()
            .map(|p| pinned(&cs, p, TOL))
            .collect();
        (cs, extra)
    })
}

fn criterion_9() -> Outcome {
    timed(Some(60), || {
        let cs = suites::graph_kappa_checks(SEED, 4);
        // Level n of the Fock module of two loops has dimension 2^n.
        let e = GraphSpec::bouquet(2);
        let dims = truncated_fock(&graph_correspondence(&e), 4, TOL).map(|f| f.level_dims()).unwrap_or_default();
        let extra = vec![(format!("two-loop Fock levels {dims:?}"), dims == [1, 2, 4, 8, 16])];
        (cs, extra)
    })
}

fn criterion_10() -> Outcome {
    timed(None, || {
        let cs = suites::covering_checks(SEED, &suites::double_cover(), TOL);
        // Pairs (x̃, ỹ) with π(x̃) = γ(π(ỹ)): 6 choices of ỹ, then the 2 points over γ(π(ỹ)).
        let extra = vec![
            ("dimension 12".to_string(), cs.iter().any(|c| c.name == "dimension 12 = fibre product size 12" && c.pass)),
            ("index e^beta = 2".to_string(), cs.iter().any(|c| c.name == "index e^beta = 2" && c.pass)),
            pinned(&cs, "inner product formula", EXACT),
        ];
        (cs, extra)
    })
}

const TITLES: [&str; 10] = [
    "KSGNS dilation identity and density",
    "semi-category laws",
    "semi-functor retract",
    "Fock expectation",
    "covariance failure reproduced",
    "subproduct systems",
    "Watatani index",
    "conjugate Fock apparatus",
    "graph example, exact",
    "covering example",
];

fn main() -> ExitCode {
    let runs: [fn() -> Outcome; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let mut unexpected = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let n = i + 1;
        let outcome = run();
        let failing = outcome.failing();
        let status = if failing.is_empty() { "PASS" } else { "FAIL" };
        let detail = if failing.is_empty() { String::new() } else { format!(" [{}]", failing.join("; ")) };
        println!("criterion {n:>2}: {status} {} ({:.1} s){detail}", TITLES[i], outcome.elapsed.as_secs_f64());
        let known: Vec<&str> = KNOWN_FAILURES.iter().filter(|(k, _)| *k == n).map(|(_, p)| *p).collect();
        let explained = |name: &String| known.iter().any(|p| name.contains(p));
        if failing.iter().any(|f| !explained(f)) || (!known.is_empty() && failing.is_empty()) {
            unexpected.push(n);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all results as recorded ({} known failures)", KNOWN_FAILURES.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected results for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
