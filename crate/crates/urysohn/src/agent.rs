//! Lazily completed isometries of towers, grown by back-and-forth.
//!
//! An agent stores orbit representatives `(x, y)` meaning `α(ι(σ)x) = κ(σ)y`
//! for every `σ ∈ Σ`, where `ι` and `κ` depend on the constraint. Values
//! outside the stored orbits are produced on demand by realizing the
//! pulled-back distance function.

use crate::group::{Elem, Group};
use crate::scalar::{self, Scalar};
use crate::tower::{PointId, Tower, TowerError, TowerKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("not a partial isometry: {0}")]
    IsometryViolation(String),
    #[error("equivariant extension needs mixing certificates")]
    CertificateMissing,
    #[error(transparent)]
    Tower(#[from] TowerError),
}

/// The relation `α ι(σ) = κ(σ) α` an agent must satisfy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// No equivariance.
    #[default]
    None,
    /// Commutes with the whole acting group.
    Whole,
    /// Commutes with the edge group of an amalgam.
    AmalgamSigma,
    /// `α ι_Σ(σ) = θ(σ) α` in an HNN extension.
    HnnTwist,
}

impl Constraint {
    /// `σ` with `ι(σ) = e` (`src`) or `κ(σ) = e` (otherwise).
    pub fn member(&self, g: &Group, e: &Elem, src: bool) -> Option<Elem> {
        match self {
            Constraint::None => g.is_identity(e).then(|| e.clone()),
            Constraint::Whole => Some(e.clone()),
            Constraint::AmalgamSigma => match e {
                Elem::Amal { syl, sigma } if syl.is_empty() => Some((**sigma).clone()),
                _ => None,
            },
            Constraint::HnnTwist => g.hnn_project(e).and_then(|h| g.hnn_member(src, &h)),
        }
    }

    /// `ι(σ)` (`src`) or `κ(σ)` as an element of the acting group.
    pub fn image(&self, g: &Group, s: &Elem, src: bool) -> Elem {
        match self {
            Constraint::None => g.identity(),
            Constraint::Whole => s.clone(),
            Constraint::AmalgamSigma => g.lift_sigma(s),
            Constraint::HnnTwist => g.lift_base(&g.hnn_embed(src, s)),
        }
    }
}

/// The spaces an agent maps between: one tower to itself, or one tower to another.
pub enum Spaces<'a> {
    One(&'a mut Tower),
    Two(&'a mut Tower, &'a mut Tower),
}

impl<'a> Spaces<'a> {
    pub fn side(&mut self, src: bool) -> &mut Tower {
        match self {
            Spaces::One(t) => t,
            Spaces::Two(a, b) => {
                if src {
                    a
                } else {
                    b
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsometryAgent {
    pub constraint: Constraint,
    reps: Vec<(PointId, PointId)>,
    #[serde(skip)]
    fwd: HashMap<PointId, PointId>,
    #[serde(skip)]
    bwd: HashMap<PointId, PointId>,
}

impl IsometryAgent {
    pub fn new(constraint: Constraint) -> Self {
        IsometryAgent { constraint, ..Default::default() }
    }

    /// Orbit representatives in insertion order.
    pub fn reps(&self) -> &[(PointId, PointId)] {
        &self.reps
    }

    /// Every pair computed so far, sorted by source point.
    pub fn graph(&self) -> Vec<(PointId, PointId)> {
        let mut g: Vec<_> = self.fwd.iter().map(|(a, b)| (*a, *b)).collect();
        g.sort_unstable();
        g
    }

    /// Source and target points of every computed pair.
    pub fn touched(&self) -> BTreeSet<PointId> {
        self.fwd.iter().flat_map(|(a, b)| [*a, *b]).collect()
    }

    /// Adds an orbit pair without checking it.
    pub fn insert_rep(&mut self, x: PointId, y: PointId) {
        self.reps.push((x, y));
        self.fwd.insert(x, y);
        self.bwd.insert(y, x);
    }

    fn cached(&self, p: PointId, fwd: bool) -> Option<PointId> {
        if fwd {
            self.fwd.get(&p).copied()
        } else {
            self.bwd.get(&p).copied()
        }
    }

    fn remember(&mut self, a: PointId, b: PointId, fwd: bool) {
        let (x, y) = if fwd { (a, b) } else { (b, a) };
        self.fwd.insert(x, y);
        self.bwd.insert(y, x);
    }

    /// `α(p)` (`fwd`) or `α⁻¹(p)` if determined by the stored orbits.
    pub fn lookup(&mut self, sp: &mut Spaces, p: PointId, fwd: bool) -> Result<Option<PointId>, AgentError> {
        if let Some(q) = self.cached(p, fwd) {
            return Ok(Some(q));
        }
        if self.constraint == Constraint::None {
            return Ok(None);
        }
        let g = sp.side(fwd).group().ok_or(TowerError::NotEquivariant)?.clone();
        let Some(pp) = sp.side(fwd).param(p).cloned() else { return Ok(None) };
        for i in 0..self.reps.len() {
            let (x, y) = if fwd { self.reps[i] } else { (self.reps[i].1, self.reps[i].0) };
            let px = sp.side(fwd).param(x).cloned().ok_or(TowerError::NotEquivariant)?;
            let e = g.mul(&pp, &g.inv(&px));
            let Some(s) = self.constraint.member(&g, &e, fwd) else { continue };
            if sp.side(fwd).act(&e, x)? != p {
                continue;
            }
            let img = self.constraint.image(&g, &s, !fwd);
            let q = sp.side(!fwd).act(&img, y)?;
            self.remember(p, q, fwd);
            return Ok(Some(q));
        }
        Ok(None)
    }

    /// The distance function that a new image of `p` must realize on the other side.
    fn pullback(&mut self, sp: &mut Spaces, p: PointId, fwd: bool) -> Result<Vec<(PointId, Scalar)>, AgentError> {
        let mut f: Vec<(PointId, Scalar)> = Vec::new();
        let reps = self.reps.clone();
        for (x0, y0) in reps {
            let (x, y) = if fwd { (x0, y0) } else { (y0, x0) };
            if self.constraint == Constraint::None {
                let v = sp.side(fwd).distance(x, p);
                f.push((y, v));
                continue;
            }
            if !matches!(sp.side(fwd).kind, TowerKind::Equivariant(_)) {
                return Err(AgentError::CertificateMissing);
            }
            let g = sp.side(fwd).group().unwrap().clone();
            // Only σ in the mixing exception set can bring the orbit closer than M.
            for e in sp.side(fwd).eset(x, p)? {
                let Some(s) = self.constraint.member(&g, &e, fwd) else { continue };
                let ex = sp.side(fwd).act(&e, x)?;
                let v = sp.side(fwd).distance(ex, p);
                let img = self.constraint.image(&g, &s, !fwd);
                let target = sp.side(!fwd).act(&img, y)?;
                f.push((target, v));
            }
        }
        f.sort_by(|a, b| a.0.cmp(&b.0));
        f.dedup_by(|a, b| a.0 == b.0);
        Ok(f)
    }

    /// `α(p)`, extending the agent if needed.
    pub fn apply(&mut self, sp: &mut Spaces, p: PointId) -> Result<PointId, AgentError> {
        self.resolve(sp, p, true)
    }

    /// `α⁻¹(q)`, extending the agent if needed.
    pub fn apply_inv(&mut self, sp: &mut Spaces, q: PointId) -> Result<PointId, AgentError> {
        self.resolve(sp, q, false)
    }

    fn resolve(&mut self, sp: &mut Spaces, p: PointId, fwd: bool) -> Result<PointId, AgentError> {
        if let Some(q) = self.lookup(sp, p, fwd)? {
            return Ok(q);
        }
        let f = self.pullback(sp, p, fwd)?;
        // Above every range orbit, so values left at M are exact and z is new.
        let floor = self
            .reps
            .iter()
            .map(|r| sp.side(!fwd).level(if fwd { r.1 } else { r.0 }))
            .max()
            .unwrap_or(0);
        let z = sp.side(!fwd).realize_above(&f, floor)?;
        if fwd {
            self.insert_rep(p, z);
        } else {
            self.insert_rep(z, p);
        }
        Ok(z)
    }

    /// Exact check that the stored orbits define an equivariant partial isometry.
    pub fn check(&mut self, sp: &mut Spaces) -> Result<(), AgentError> {
        let reps = self.reps.clone();
        for (i, &(x1, y1)) in reps.iter().enumerate() {
            for &(x2, y2) in &reps[i..] {
                let pairs = self.orbit_pairs(sp, (x1, y1), (x2, y2))?;
                for (a, b, c, d) in pairs {
                    let l = sp.side(true).distance(a, c);
                    let r = sp.side(false).distance(b, d);
                    if l != r {
                        return Err(AgentError::IsometryViolation(format!(
                            "d({a},{c}) = {} but d({b},{d}) = {}",
                            scalar::fmt(&l),
                            scalar::fmt(&r)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Source/target pairs `(σx₁, κσ y₁)` and `(x₂, y₂)` that can be closer than `M`.
    #[allow(clippy::type_complexity)]
    fn orbit_pairs(
        &mut self,
        sp: &mut Spaces,
        (x1, y1): (PointId, PointId),
        (x2, y2): (PointId, PointId),
    ) -> Result<Vec<(PointId, PointId, PointId, PointId)>, AgentError> {
        if self.constraint == Constraint::None {
            return Ok(vec![(x1, y1, x2, y2)]);
        }
        let g = sp.side(true).group().ok_or(TowerError::NotEquivariant)?.clone();
        let mut sigmas: BTreeSet<Elem> = BTreeSet::new();
        for src in [true, false] {
            let (a, b) = if src { (x1, x2) } else { (y1, y2) };
            if !matches!(sp.side(src).kind, TowerKind::Equivariant(_)) {
                return Err(AgentError::CertificateMissing);
            }
            for e in sp.side(src).eset(a, b)? {
                if let Some(s) = self.constraint.member(&g, &e, src) {
                    sigmas.insert(s);
                }
            }
        }
        let mut out = Vec::new();
        for s in sigmas {
            let a = sp.side(true).act(&self.constraint.image(&g, &s, true), x1)?;
            let b = sp.side(false).act(&self.constraint.image(&g, &s, false), y1)?;
            out.push((a, b, x2, y2));
        }
        // The identity pair is always compared, whatever the certificates say.
        out.push((x1, y1, x2, y2));
        Ok(out)
    }
}

/// Extends `phi` to an agent defined on `agenda` (forward) and `back` (backward).
pub fn extend_isometry(
    sp: &mut Spaces,
    constraint: Constraint,
    phi: &[(PointId, PointId)],
    agenda: &[PointId],
    back: &[PointId],
) -> Result<IsometryAgent, AgentError> {
    let mut a = IsometryAgent::new(constraint);
    for &(x, y) in phi {
        if let Some(prev) = a.lookup(sp, x, true)? {
            if prev != y {
                return Err(AgentError::IsometryViolation(format!("{x} has two images")));
            }
            continue;
        }
        a.insert_rep(x, y);
    }
    a.check(sp)?;
    let n = agenda.len().max(back.len());
    for i in 0..n {
        if let Some(&p) = agenda.get(i) {
            a.apply(sp, p)?;
        }
        if let Some(&q) = back.get(i) {
            a.apply_inv(sp, q)?;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomogeneityCertificate {
    pub graph: Vec<(PointId, PointId)>,
    pub pairs_checked: usize,
    pub ok: bool,
}

/// Runs `extend_isometry` over the first `n` window points and verifies every pair of the graph.
pub fn homogeneity_certificate(
    t: &mut Tower,
    phi: &[(PointId, PointId)],
    n: usize,
) -> Result<HomogeneityCertificate, AgentError> {
    let win = t.window(n, 4);
    let mut sp = Spaces::One(t);
    let a = extend_isometry(&mut sp, Constraint::None, phi, &win, &win)?;
    let graph = a.graph();
    let (pairs_checked, ok) = verify_graph(sp.side(true), &graph);
    Ok(HomogeneityCertificate { graph, pairs_checked, ok })
}

/// Checks all unordered pairs of a finite map inside one tower.
pub fn verify_graph(t: &mut Tower, graph: &[(PointId, PointId)]) -> (usize, bool) {
    let mut n = 0;
    let mut ok = true;
    for i in 0..graph.len() {
        for j in (i + 1)..graph.len() {
            let (a, b) = graph[i];
            let (c, d) = graph[j];
            n += 1;
            ok &= t.distance(a, c) == t.distance(b, d) && b != d;
        }
    }
    (n, ok)
}
