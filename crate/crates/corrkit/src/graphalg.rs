//! Finite directed graphs, graph correspondences and exact Cuntz–Krieger arithmetic.
//!
//! Conventions: a path `μ = μ_1 ⋯ μ_n` has `s(μ_i) = r(μ_{i+1})`, `r(μ) = r(μ_1)` and
//! `s(μ) = s(μ_n)`. The relations are `S_e* S_e = P_{s(e)}` and
//! `P_v = Σ_{r(e)=v} S_e S_e*` for every vertex receiving an edge. The correspondence
//! `X(E)` acts on the left through `r` and on the right through `s`.
//!
//! Coefficients are Gaussian rationals, so every identity here is decided exactly.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_complex::Complex;
use num_rational::Rational64;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::algebra::Algebra;
use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE};
use crate::module::{AdjOp, HilbertModule, ModVec, OpMap};
use crate::tensor::Correspondence;

pub type Coeff = Complex<Rational64>;

fn coeff(n: i64) -> Coeff {
    Complex::new(Rational64::from_integer(n), Rational64::zero())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub name: String,
    pub source: usize,
    pub range: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
}

/// A path; vertices are the paths of length zero.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    range: usize,
    source: usize,
    edges: Vec<usize>,
}

impl Path {
    pub fn vertex(v: usize) -> Self {
        Path { range: v, source: v, edges: Vec::new() }
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_vertex(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_vertex()
    }

    /// `μν`, defined when `s(μ) = r(ν)`.
    pub fn concat(&self, other: &Path) -> Option<Path> {
        if self.source != other.range {
            return None;
        }
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        Some(Path { range: self.range, source: other.source, edges })
    }

    /// `μ'` with `self = prefix·μ'`.
    pub fn strip_prefix(&self, prefix: &Path) -> Option<Path> {
        if prefix.range != self.range || !self.edges.starts_with(&prefix.edges) {
            return None;
        }
        if prefix.edges.is_empty() {
            return Some(self.clone());
        }
        Some(Path { range: prefix.source, source: self.source, edges: self.edges[prefix.len()..].to_vec() })
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses `vertex <name>` / `edge <name> <source> <range>` lines; `#` starts a comment.
/// Edges may name vertices declared later in the file.
pub fn parse_graph(text: &str) -> Result<GraphSpec> {
    let mut vertices: Vec<String> = Vec::new();
    let mut raw_edges: Vec<(usize, String, String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let words: Vec<&str> = body.split_whitespace().collect();
        match words.as_slice() {
            ["vertex", name] => {
                if vertices.iter().any(|v| v == name) {
                    return Err(parse_error(line_no, format!("vertex {name} declared twice")));
                }
                vertices.push(name.to_string());
            }
            ["edge", name, s, r] => raw_edges.push((line_no, name.to_string(), s.to_string(), r.to_string())),
            _ => return Err(parse_error(line_no, format!("expected `vertex <name>` or `edge <name> <source> <range>`, got `{body}`"))),
        }
    }
    let mut edges = Vec::new();
    for (line_no, name, s, r) in raw_edges {
        let find = |v: &str| {
            vertices
                .iter()
                .position(|w| w == v)
                .ok_or_else(|| parse_error(line_no, format!("edge {name} refers to undeclared vertex {v}")))
        };
        if edges.iter().any(|e: &Edge| e.name == name) {
            return Err(parse_error(line_no, format!("edge {name} declared twice")));
        }
        edges.push(Edge { source: find(&s)?, range: find(&r)?, name });
    }
    Ok(GraphSpec { vertices, edges })
}

impl GraphSpec {
    /// One vertex `v` with `n` loops `e1..en`.
    pub fn bouquet(n: usize) -> Self {
        GraphSpec {
            vertices: vec!["v".into()],
            edges: (1..=n).map(|i| Edge { name: format!("e{i}"), source: 0, range: 0 }).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "vertex {v}");
        }
        for e in &self.edges {
            let _ = writeln!(out, "edge {} {} {}", e.name, self.vertices[e.source], self.vertices[e.range]);
        }
        out
    }

    /// Vertices receiving no edge.
    pub fn sources(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.edges.iter().all(|e| e.range != v)).collect()
    }

    /// Vertices emitting no edge.
    pub fn sinks(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.edges.iter().all(|e| e.source != v)).collect()
    }

    pub fn edge_path(&self, e: usize) -> Path {
        Path { range: self.edges[e].range, source: self.edges[e].source, edges: vec![e] }
    }

    /// The path through the named edges; a single vertex name gives a vertex path.
    pub fn path(&self, names: &[&str]) -> Result<Path> {
        if let [single] = names {
            if let Some(v) = self.vertices.iter().position(|w| w == single) {
                return Ok(Path::vertex(v));
            }
        }
        let mut out: Option<Path> = None;
        for name in names {
            let e = self
                .edges
                .iter()
                .position(|e| &e.name == name)
                .ok_or_else(|| Error::InvalidArgument(format!("no edge named {name}")))?;
            let p = self.edge_path(e);
            out = Some(match out {
                None => p,
                Some(q) => q.concat(&p).ok_or_else(|| Error::InvalidArgument(format!("{name} does not continue the path")))?,
            });
        }
        out.ok_or_else(|| Error::InvalidArgument("empty path".into()))
    }

    pub fn path_name(&self, p: &Path) -> String {
        if p.is_vertex() {
            self.vertices[p.range].clone()
        } else {
            p.edges.iter().map(|&e| self.edges[e].name.as_str()).collect::<Vec<_>>().join("·")
        }
    }

    /// Paths of length `n` with range `v`.
    pub fn paths_into(&self, v: usize, n: usize) -> Vec<Path> {
        let mut out = vec![Path::vertex(v)];
        for _ in 0..n {
            let mut next = Vec::new();
            for p in &out {
                for (i, e) in self.edges.iter().enumerate() {
                    if e.range == p.source {
                        next.push(p.concat(&self.edge_path(i)).expect("endpoints match"));
                    }
                }
            }
            out = next;
        }
        out
    }

    pub fn paths(&self, n: usize) -> Vec<Path> {
        (0..self.vertices.len()).flat_map(|v| self.paths_into(v, n)).collect()
    }

    pub fn paths_up_to(&self, d: usize) -> Vec<Path> {
        (0..=d).flat_map(|n| self.paths(n)).collect()
    }

    fn check_no_sources(&self) -> Result<()> {
        match self.sources().first() {
            Some(&v) => Err(Error::EqualityUndecidable { source_vertex: self.vertices[v].clone() }),
            None => Ok(()),
        }
    }

    /// `∪_v {edges with source v}` in block order, as used by [`graph_correspondence`].
    fn edges_by_source(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.source].push(i);
        }
        out
    }
}

/// `F ⊆ E` with `F^0 = E^0`; edges keep their indices in `E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgraph {
    pub parent: GraphSpec,
    pub graph: GraphSpec,
    to_parent: Vec<usize>,
    from_parent: Vec<Option<usize>>,
}

impl Subgraph {
    pub fn from_edges(parent: &GraphSpec, names: &[&str]) -> Result<Self> {
        let mut mask = vec![false; parent.edges.len()];
        for name in names {
            let e = parent
                .edges
                .iter()
                .position(|e| &e.name == name)
                .ok_or_else(|| Error::InvalidArgument(format!("subgraph edge {name} is not an edge of the graph")))?;
            mask[e] = true;
        }
        Ok(Self::from_mask(parent, &mask))
    }

    pub fn from_mask(parent: &GraphSpec, mask: &[bool]) -> Self {
        let to_parent: Vec<usize> = (0..parent.edges.len()).filter(|&i| mask[i]).collect();
        let mut from_parent = vec![None; parent.edges.len()];
        for (k, &i) in to_parent.iter().enumerate() {
            from_parent[i] = Some(k);
        }
        let graph = GraphSpec {
            vertices: parent.vertices.clone(),
            edges: to_parent.iter().map(|&i| parent.edges[i].clone()).collect(),
        };
        Subgraph { parent: parent.clone(), graph, to_parent, from_parent }
    }

    /// Parses a subgraph file; its edges must be edges of `parent` with the same endpoints.
    pub fn parse(parent: &GraphSpec, text: &str) -> Result<Self> {
        let g = parse_graph(text)?;
        for v in &g.vertices {
            if !parent.vertices.contains(v) {
                return Err(Error::InvalidArgument(format!("subgraph vertex {v} is not a vertex of the graph")));
            }
        }
        let mut mask = vec![false; parent.edges.len()];
        for e in &g.edges {
            let i = parent
                .edges
                .iter()
                .position(|p| p.name == e.name)
                .ok_or_else(|| Error::InvalidArgument(format!("subgraph edge {} is not an edge of the graph", e.name)))?;
            let p = &parent.edges[i];
            if parent.vertices[p.source] != g.vertices[e.source] || parent.vertices[p.range] != g.vertices[e.range] {
                return Err(Error::InvalidArgument(format!("subgraph edge {} has different endpoints", e.name)));
            }
            mask[i] = true;
        }
        Ok(Self::from_mask(parent, &mask))
    }

    /// `E \ F`.
    pub fn complement(&self) -> Subgraph {
        let mask: Vec<bool> = self.from_parent.iter().map(Option::is_none).collect();
        Self::from_mask(&self.parent, &mask)
    }

    /// Sources of `E \ F`; the splitting needs this to be empty.
    pub fn complement_sources(&self) -> Vec<usize> {
        self.complement().graph.sources()
    }

    pub fn check_regular_complement(&self) -> Result<()> {
        match self.complement_sources().first() {
            Some(&v) => Err(Error::PreconditionViolated(format!(
                "E\\F is not regular: vertex {} receives no edge of E\\F",
                self.parent.vertices[v]
            ))),
            None => Ok(()),
        }
    }

    /// The path of `F` corresponding to a path of `E`, if every edge lies in `F`.
    pub fn restrict(&self, p: &Path) -> Option<Path> {
        let edges = p.edges.iter().map(|&e| self.from_parent[e]).collect::<Option<Vec<_>>>()?;
        Some(Path { range: p.range, source: p.source, edges })
    }

    pub fn lift(&self, p: &Path) -> Path {
        Path { range: p.range, source: p.source, edges: p.edges.iter().map(|&e| self.to_parent[e]).collect() }
    }

    pub fn contains_edge(&self, e: usize) -> bool {
        self.from_parent[e].is_some()
    }
}

/// `X(E)` over `C(E^0)`: one basis vector per edge, right action at `s`, left action at `r`.
pub fn graph_correspondence(g: &GraphSpec) -> Correspondence {
    let a = Algebra::diagonal(g.vertices.len()).expect("at least one vertex");
    let by_source = g.edges_by_source();
    let x = HilbertModule::new(&a, by_source.iter().map(Vec::len).collect()).expect("one block per vertex");
    let phi = OpMap::from_fn(&a, &x, |f| {
        let blocks = by_source
            .iter()
            .map(|es| CMat::from_diagonal(&nalgebra::DVector::from_iterator(es.len(), es.iter().map(|&e| f.block(g.edges[e].range)[(0, 0)]))))
            .collect();
        AdjOp::new(&x, &x, blocks).expect("diagonal blocks")
    });
    Correspondence::from_hom_unchecked(phi)
}

/// The point mass `δ_e` in `X(E)`.
pub fn edge_vector(g: &GraphSpec, x: &Correspondence, e: usize) -> ModVec {
    let s = g.edges[e].source;
    let pos = g.edges_by_source()[s].iter().position(|&f| f == e).expect("edge in its source block");
    let mut v = x.module().zero();
    v.block_mut(s)[(pos, 0)] = ONE;
    v
}

type Mono = (Path, Path);

/// `S_μS_ν* · S_αS_β*` reduced by `S_ν*S_α = S_{α'}`, `S_{ν'}*` or `0`.
pub fn mono_mul(a: &Mono, b: &Mono) -> Option<Mono> {
    let (mu, nu) = a;
    let (alpha, beta) = b;
    if let Some(rest) = alpha.strip_prefix(nu) {
        Some((mu.concat(&rest)?, beta.clone()))
    } else {
        nu.strip_prefix(alpha).and_then(|rest| Some((mu.clone(), beta.concat(&rest)?)))
    }
}

/// A finite linear combination of monomials `S_μS_ν*` with `s(μ) = s(ν)`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NFPoly {
    terms: BTreeMap<Mono, Coeff>,
}

impl NFPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `S_μS_ν*`, which is `0` unless `s(μ) = s(ν)`.
    pub fn monomial(mu: &Path, nu: &Path) -> Self {
        let mut p = Self::zero();
        if mu.source == nu.source {
            p.terms.insert((mu.clone(), nu.clone()), coeff(1));
        }
        p
    }

    pub fn vertex(v: usize) -> Self {
        Self::monomial(&Path::vertex(v), &Path::vertex(v))
    }

    pub fn one(g: &GraphSpec) -> Self {
        (0..g.vertices.len()).fold(Self::zero(), |acc, v| acc.add(&Self::vertex(v)))
    }

    fn from_terms(terms: impl IntoIterator<Item = (Mono, Coeff)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Mono, c: Coeff) {
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Path, &Path, &Coeff)> {
        self.terms.iter().map(|((m, n), c)| (m, n, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True when no term survives; equality in the algebra needs [`nf_equal`].
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.terms.clone().into_iter().chain(other.terms.clone()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(coeff(-1)))
    }

    pub fn scale(&self, c: Coeff) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, v)| (m.clone(), *v * c)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|((m, n), c)| ((n.clone(), m.clone()), c.conj())))
    }

    /// Gauge degrees `|μ| − |ν|` occurring in the polynomial.
    pub fn degrees(&self) -> BTreeSet<i64> {
        self.terms.keys().map(|(m, n)| m.len() as i64 - n.len() as i64).collect()
    }

    pub fn display(&self, g: &GraphSpec) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|((m, n), c)| {
                let c = if c.im.is_zero() { c.re.to_string() } else { format!("({}+{}i)", c.re, c.im) };
                format!("{c}·S[{}]S[{}]*", g.path_name(m), g.path_name(n))
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

pub fn nf_multiply(p: &NFPoly, q: &NFPoly) -> NFPoly {
    let mut out = NFPoly::zero();
    for (a, ca) in &p.terms {
        for (b, cb) in &q.terms {
            if let Some(m) = mono_mul(a, b) {
                out.add_term(m, *ca * *cb);
            }
        }
    }
    out
}

/// Rewrites every term to the largest `|ν|` of its gauge degree.
fn expand(g: &GraphSpec, p: &NFPoly) -> BTreeMap<Mono, Coeff> {
    let mut depth: BTreeMap<i64, usize> = BTreeMap::new();
    for (m, n) in p.terms.keys() {
        let d = depth.entry(m.len() as i64 - n.len() as i64).or_insert(0);
        *d = (*d).max(n.len());
    }
    let mut out: BTreeMap<Mono, Coeff> = BTreeMap::new();
    for ((m, n), c) in &p.terms {
        let d = depth[&(m.len() as i64 - n.len() as i64)];
        for lam in g.paths_into(n.source, d - n.len()) {
            let key = (m.concat(&lam).expect("s(μ)=r(λ)"), n.concat(&lam).expect("s(ν)=r(λ)"));
            *out.entry(key).or_insert_with(Coeff::zero) += *c;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Exact equality in `C*(E)` by expansion to a common depth per gauge degree.
pub fn nf_equal(g: &GraphSpec, p: &NFPoly, q: &NFPoly) -> Result<bool> {
    g.check_no_sources()?;
    if p == q {
        return Ok(true);
    }
    Ok(expand(g, &p.sub(q)).is_empty())
}

/// `Ψ̃(S_μS_ν*) = W_μW_ν*` when `μ, ν ∈ F*`, else `0`. The result lives over `F`.
pub fn projected_expectation(p: &NFPoly, f: &Subgraph) -> Result<NFPoly> {
    f.check_regular_complement()?;
    Ok(project_unchecked(p, f))
}

fn project_unchecked(p: &NFPoly, f: &Subgraph) -> NFPoly {
    NFPoly::from_terms(
        p.terms
            .iter()
            .filter_map(|((m, n), c)| Some(((f.restrict(m)?, f.restrict(n)?), *c))),
    )
}

/// A formal sum `Σ a_i ⊗ b_i` in `C*(E) ⊗_{Ψ̃} C*(F)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KSGNSGraphVec {
    pub terms: Vec<(NFPoly, NFPoly)>,
}

impl KSGNSGraphVec {
    pub fn simple(left: NFPoly, right: NFPoly) -> Self {
        KSGNSGraphVec { terms: vec![(left, right)] }
    }

    pub fn add(&self, other: &Self) -> Self {
        KSGNSGraphVec { terms: self.terms.iter().chain(&other.terms).cloned().collect() }
    }
}

/// `Σ_{i,j} b_i* Ψ̃(a_i* c_j) d_j`.
pub fn ksgns_graph_inner(f: &Subgraph, v: &KSGNSGraphVec, w: &KSGNSGraphVec) -> Result<NFPoly> {
    f.check_regular_complement()?;
    let mut out = NFPoly::zero();
    for (a, b) in &v.terms {
        for (c, d) in &w.terms {
            let mid = project_unchecked(&nf_multiply(&a.adjoint(), c), f);
            out = out.add(&nf_multiply(&nf_multiply(&b.adjoint(), &mid), d));
        }
    }
    Ok(out)
}

/// `Σ_μ δ_μ ⊗ c_μ` in `F_{X(E)} ⊗_{C(E^0)} C*(F)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FockGraphVec {
    pub terms: BTreeMap<Path, NFPoly>,
}

impl FockGraphVec {
    pub fn delta(mu: &Path, c: NFPoly) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_empty() {
            terms.insert(mu.clone(), c);
        }
        FockGraphVec { terms }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (mu, c) in &other.terms {
            let sum = terms.get(mu).map_or_else(|| c.clone(), |d| d.add(c));
            terms.insert(mu.clone(), sum);
        }
        terms.retain(|_, c| !c.is_empty());
        FockGraphVec { terms }
    }
}

/// `Σ_μ c_μ* Q_{s(μ)} d_μ`.
pub fn fock_graph_inner(v: &FockGraphVec, w: &FockGraphVec) -> NFPoly {
    v.terms.iter().fold(NFPoly::zero(), |acc, (mu, c)| match w.terms.get(mu) {
        Some(d) => acc.add(&nf_multiply(&nf_multiply(&c.adjoint(), &NFPoly::vertex(mu.source)), d)),
        None => acc,
    })
}

/// Equality of Fock-side vectors coefficientwise in `C*(F)`.
pub fn fock_equal(f: &Subgraph, v: &FockGraphVec, w: &FockGraphVec) -> Result<bool> {
    let keys: BTreeSet<&Path> = v.terms.keys().chain(w.terms.keys()).collect();
    for mu in keys {
        let zero = NFPoly::zero();
        if !nf_equal(&f.graph, v.terms.get(mu).unwrap_or(&zero), w.terms.get(mu).unwrap_or(&zero))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `κ(S_μS_ν* ⊗ b) = δ_μ ⊗ W_ν* b`; elements with `ν ∉ F*` have norm zero and map to `0`.
pub fn kappa(f: &Subgraph, mu: &Path, nu: &Path, right: &NFPoly) -> FockGraphVec {
    if mu.source != nu.source {
        return FockGraphVec::default();
    }
    match f.restrict(nu) {
        Some(nu_f) => {
            let wstar = NFPoly::monomial(&Path::vertex(nu_f.source), &nu_f);
            FockGraphVec::delta(mu, nf_multiply(&wstar, right))
        }
        None => FockGraphVec::default(),
    }
}

/// The case formula for `ρ(S_αS_β*)(δ_μ ⊗ W_ν* b)`.
pub fn rho_case(f: &Subgraph, alpha: &Path, beta: &Path, mu: &Path, nu: &Path, right: &NFPoly) -> FockGraphVec {
    if alpha.source != beta.source {
        return FockGraphVec::default();
    }
    let Some(nu_f) = f.restrict(nu) else {
        return FockGraphVec::default();
    };
    if let Some(rest) = mu.strip_prefix(beta) {
        let wstar = NFPoly::monomial(&Path::vertex(nu_f.source), &nu_f);
        return FockGraphVec::delta(&alpha.concat(&rest).expect("s(α)=s(β)=r(μ')"), nf_multiply(&wstar, right));
    }
    if let Some(rest) = beta.strip_prefix(mu) {
        if let Some(rest_f) = f.restrict(&rest) {
            let long = nu_f.concat(&rest_f).expect("s(ν)=s(μ)=r(β')");
            let wstar = NFPoly::monomial(&Path::vertex(long.source), &long);
            return FockGraphVec::delta(alpha, nf_multiply(&wstar, right));
        }
    }
    FockGraphVec::default()
}

/// A generator `S_μS_ν* ⊗ W_ξW_η*` (`ν, ξ, η` as paths of `E` lying in `F`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub mu: Path,
    pub nu: Path,
    pub xi: Path,
    pub eta: Path,
}

impl Generator {
    fn right(&self, f: &Subgraph) -> NFPoly {
        NFPoly::monomial(&f.restrict(&self.xi).expect("ξ ∈ F*"), &f.restrict(&self.eta).expect("η ∈ F*"))
    }

    pub fn ksgns(&self, f: &Subgraph) -> KSGNSGraphVec {
        KSGNSGraphVec::simple(NFPoly::monomial(&self.mu, &self.nu), self.right(f))
    }

    pub fn kappa(&self, f: &Subgraph) -> FockGraphVec {
        kappa(f, &self.mu, &self.nu, &self.right(f))
    }

    pub fn display(&self, g: &GraphSpec) -> String {
        format!(
            "S[{}]S[{}]*⊗W[{}]W[{}]*",
            g.path_name(&self.mu),
            g.path_name(&self.nu),
            g.path_name(&self.xi),
            g.path_name(&self.eta)
        )
    }
}

/// Outcome of [`kappa_check`].
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct KappaReport {
    pub depth: usize,
    pub generators: usize,
    /// Generators with `ν`, `ξ` incomparable: zero on both sides.
    pub null_generators: usize,
    pub null_failures: usize,
    pub same_level_pairs: usize,
    pub same_level_mismatches: usize,
    pub cross_level_pairs: usize,
    pub cross_level_mismatches: usize,
    pub first_mismatch: Option<String>,
    /// Pairs recomputed through the general polynomial routines.
    pub cross_validated: usize,
    pub cross_validation_failures: usize,
    pub surjectivity_checked: usize,
    pub surjectivity_failures: usize,
    pub left_action_checked: usize,
    pub left_action_failures: usize,
    pub pass: bool,
}

fn comparable(a: &Path, b: &Path) -> bool {
    a.strip_prefix(b).is_some() || b.strip_prefix(a).is_some()
}

fn chain(ms: &[Mono]) -> Option<Mono> {
    let mut acc = ms[0].clone();
    for m in &ms[1..] {
        acc = mono_mul(&acc, m)?;
    }
    Some(acc)
}

fn restrict_mono(f: &Subgraph, m: &Mono) -> Option<Mono> {
    Some((f.restrict(&m.0)?, f.restrict(&m.1)?))
}

/// Equality of two single monomials of `C*(F)` (or zero), falling back to expansion.
fn mono_equal(f: &Subgraph, a: &Option<Mono>, b: &Option<Mono>) -> Result<bool> {
    match (a, b) {
        (None, None) => Ok(true),
        (Some(x), Some(y)) if x == y => Ok(true),
        _ => {
            let to_poly = |m: &Option<Mono>| m.as_ref().map_or_else(NFPoly::zero, |(p, q)| NFPoly::monomial(p, q));
            nf_equal(&f.graph, &to_poly(a), &to_poly(b))
        }
    }
}

/// Verifies the map `κ` on all generators with path lengths `≤ d`.
///
/// Inner products are compared on every pair of generators with nonzero norm
/// (Hermitian symmetry lets each unordered pair be checked once); a fixed stride of
/// pairs is recomputed through [`ksgns_graph_inner`] and [`fock_graph_inner`].
pub fn kappa_check(f: &Subgraph, d: usize) -> Result<KappaReport> {
    f.check_regular_complement()?;
    f.graph.check_no_sources()?;
    let e = &f.parent;
    let e_paths = e.paths_up_to(d);
    let f_paths: Vec<Path> = f.graph.paths_up_to(d).iter().map(|p| f.lift(p)).collect();
    let mut gens = Vec::new();
    let mut null = 0;
    let mut null_failures = 0;
    for mu in &e_paths {
        for nu in f_paths.iter().filter(|nu| nu.source == mu.source) {
            for xi in &f_paths {
                for eta in f_paths.iter().filter(|eta| eta.source == xi.source) {
                    let g = Generator { mu: mu.clone(), nu: nu.clone(), xi: xi.clone(), eta: eta.clone() };
                    if comparable(nu, xi) {
                        gens.push(g);
                    } else {
                        null += 1;
                        if null <= 64 {
                            let lhs = ksgns_graph_inner(f, &g.ksgns(f), &g.ksgns(f))?;
                            let rhs = g.kappa(f);
                            if !nf_equal(&f.graph, &lhs, &NFPoly::zero())? || !rhs.terms.is_empty() {
                                null_failures += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut report = KappaReport {
        depth: d,
        generators: gens.len() + null,
        null_generators: null,
        null_failures,
        same_level_pairs: 0,
        same_level_mismatches: 0,
        cross_level_pairs: 0,
        cross_level_mismatches: 0,
        first_mismatch: None,
        cross_validated: 0,
        cross_validation_failures: 0,
        surjectivity_checked: 0,
        surjectivity_failures: 0,
        left_action_checked: 0,
        left_action_failures: 0,
        pass: false,
    };
    let stride = (gens.len() * gens.len() / 2000).max(1);
    let mut counter = 0usize;
    for (i, g) in gens.iter().enumerate() {
        let adj_left = (g.nu.clone(), g.mu.clone());
        let adj_right = (g.eta.clone(), g.xi.clone());
        let adj_right_f = restrict_mono(f, &adj_right).expect("ξ, η ∈ F*");
        let nu_f = f.restrict(&g.nu).expect("ν ∈ F*");
        for h in &gens[i..] {
            let mid = chain(&[adj_left.clone(), (h.mu.clone(), h.nu.clone())]).and_then(|m| restrict_mono(f, &m));
            let h_right = restrict_mono(f, &(h.xi.clone(), h.eta.clone())).expect("ρ, σ ∈ F*");
            let lhs = mid.and_then(|m| chain(&[adj_right_f.clone(), m, h_right.clone()]));
            let rhs = if g.mu == h.mu {
                let beta_f = f.restrict(&h.nu).expect("β ∈ F*");
                let v = Path::vertex(g.mu.source);
                chain(&[
                    adj_right_f.clone(),
                    (nu_f.clone(), v.clone()),
                    (v.clone(), v.clone()),
                    (v, beta_f),
                    h_right.clone(),
                ])
            } else {
                None
            };
            let same = g.mu.len() == h.mu.len();
            if same {
                report.same_level_pairs += 1;
            } else {
                report.cross_level_pairs += 1;
            }
            if !mono_equal(f, &lhs, &rhs)? {
                if same {
                    report.same_level_mismatches += 1;
                } else {
                    report.cross_level_mismatches += 1;
                }
                if report.first_mismatch.is_none() {
                    let show = |m: &Option<Mono>| {
                        m.as_ref().map_or("0".to_string(), |(p, q)| NFPoly::monomial(p, q).display(&f.graph))
                    };
                    report.first_mismatch = Some(format!(
                        "<{} | {}>: KSGNS side {}, Fock side {}",
                        g.display(e),
                        h.display(e),
                        show(&lhs),
                        show(&rhs)
                    ));
                }
            }
            counter += 1;
            if counter.is_multiple_of(stride) {
                report.cross_validated += 1;
                let slow_l = ksgns_graph_inner(f, &g.ksgns(f), &h.ksgns(f))?;
                let slow_r = fock_graph_inner(&g.kappa(f), &h.kappa(f));
                let fast = |m: &Option<Mono>| m.as_ref().map_or_else(NFPoly::zero, |(p, q)| NFPoly::monomial(p, q));
                if !nf_equal(&f.graph, &slow_l, &fast(&lhs))? || !nf_equal(&f.graph, &slow_r, &fast(&rhs))? {
                    report.cross_validation_failures += 1;
                }
            }
        }
    }

    for mu in &e_paths {
        for xi in f_paths.iter().filter(|xi| xi.range == mu.source) {
            for eta in f_paths.iter().filter(|eta| eta.source == xi.source) {
                report.surjectivity_checked += 1;
                let right = NFPoly::monomial(&f.restrict(xi).expect("ξ ∈ F*"), &f.restrict(eta).expect("η ∈ F*"));
                let image = kappa(f, mu, &Path::vertex(mu.source), &right);
                if !fock_equal(f, &image, &FockGraphVec::delta(mu, right))? {
                    report.surjectivity_failures += 1;
                }
            }
        }
    }

    let short: Vec<&Generator> = gens.iter().filter(|g| g.xi.len() <= 1 && g.eta.len() <= 1).collect();
    for alpha in &e_paths {
        for beta in e_paths.iter().filter(|b| b.source == alpha.source) {
            let a = NFPoly::monomial(alpha, beta);
            for g in &short {
                report.left_action_checked += 1;
                let right = g.right(f);
                let product = nf_multiply(&a, &NFPoly::monomial(&g.mu, &g.nu));
                let via_kappa = product
                    .terms()
                    .fold(FockGraphVec::default(), |acc, (m, n, c)| acc.add(&kappa(f, m, n, &right.scale(*c))));
                let formula = rho_case(f, alpha, beta, &g.mu, &g.nu, &right);
                if !fock_equal(f, &via_kappa, &formula)? {
                    report.left_action_failures += 1;
                }
            }
        }
    }

    report.pass = report.null_failures == 0
        && report.same_level_mismatches == 0
        && report.cross_level_mismatches == 0
        && report.cross_validation_failures == 0
        && report.surjectivity_failures == 0
        && report.left_action_failures == 0;
    Ok(report)
}

/// A graph on `n` vertices and a subgraph `F` such that both `F` and `E \ F` have no sources.
pub fn random_regular_split<R: Rng>(rng: &mut R, n: usize, extra: usize) -> (GraphSpec, Subgraph) {
    let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    let mut mask = Vec::new();
    for v in 0..n {
        for in_f in [true, false] {
            let name = format!("{}{}", if in_f { 'f' } else { 'g' }, edges.len());
            edges.push(Edge { name, source: rng.gen_range(0..n), range: v });
            mask.push(in_f);
        }
    }
    for _ in 0..extra {
        let in_f = *[true, false].choose(rng).expect("nonempty");
        let name = format!("{}{}", if in_f { 'f' } else { 'g' }, edges.len());
        edges.push(Edge { name, source: rng.gen_range(0..n), range: rng.gen_range(0..n) });
        mask.push(in_f);
    }
    let g = GraphSpec { vertices, edges };
    let f = Subgraph::from_mask(&g, &mask);
    (g, f)
}
