//! One-step witnesses making `π_α` homogeneous and faithful on a single requirement,
//! and a round-robin scheduler chaining them into one agent.
//!
//! Every step returns a new agent containing all orbit representatives of the old one,
//! so values computed by earlier steps never change.

use crate::agent::{AgentError, Constraint, IsometryAgent, Spaces};
use crate::distance_set::DistanceSet;
use crate::group::{Elem, GraphOfGroups, Group, GroupError, GroupSpec};
use crate::scalar::{self, Scalar};
use crate::tower::{PointId, TermRecord, Tower, TowerError};
use crate::unbounded::{self, UnboundedError};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenericityError {
    #[error("witness search exhausted after {0} candidates")]
    SearchExhausted(usize),
    #[error("the graph of groups has no edge")]
    TrivialTree,
    #[error("invalid setup: {0}")]
    Invalid(String),
    #[error("invalid requirement: {0}")]
    Requirement(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Unbounded(#[from] UnboundedError),
}

type Result<T> = std::result::Result<T, GenericityError>;

/// Ball radii tried, in order, when searching a factor for a witness.
const RADII: [usize; 6] = [1, 2, 4, 8, 16, 32];
const BALL_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetupKind {
    /// `Γ₁ *_Σ Γ₂` with both factors infinite.
    Amalgam,
    /// `Γ₁ *_Σ Γ₂` with `Γ₂` finite and `[Γ₂:Σ] ≥ 2`.
    FiniteFactor,
    /// `HNN(H, Σ, θ)`.
    Hnn,
    /// `Γ * Λ` acting on the rational Urysohn space.
    FreeProductUnbounded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetupSpec {
    pub kind: SetupKind,
    pub group: GroupSpec,
    /// Diameter `M` of the bounded space; 1 when omitted.
    #[serde(default, with = "scalar::serde_opt", skip_serializing_if = "Option::is_none")]
    pub cap: Option<Scalar>,
    /// The scheduler runs `b` homogeneity requirements, then `2b` faithfulness ones, and repeats.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub batch: usize,
}

fn one() -> usize {
    1
}

fn is_one(b: &usize) -> bool {
    *b == 1
}

impl SetupSpec {
    pub fn new(kind: SetupKind, group: GroupSpec) -> Self {
        SetupSpec { kind, group, cap: None, batch: 1 }
    }

    /// Named setups over the group presets.
    pub fn preset(name: &str) -> Option<Self> {
        use crate::group::presets;
        let (kind, group) = match name {
            "free-product-ZZ" | "Z*Z" => (SetupKind::Amalgam, presets::z_amalgam_z()),
            "free-product-Z-Z2" | "Z*Z2" => (SetupKind::FiniteFactor, presets::z_amalgam_z2()),
            "HNN-F2" | "hnn-f2" => (SetupKind::Hnn, presets::hnn_f2_trivial()),
            "surface" | "surface-genus2" => (SetupKind::Amalgam, presets::surface_genus2()),
            "unbounded-Z*Z" | "unbounded-ZZ" => (SetupKind::FreeProductUnbounded, presets::z_star_z()),
            _ => return None,
        };
        let mut spec = SetupSpec::new(kind, group);
        if kind == SetupKind::FreeProductUnbounded {
            // disconnection witnesses grow like 2^level, and faithfulness steps add levels
            spec.batch = 5;
        }
        Some(spec)
    }
}

/// A group, the tower it acts on, and the constraint the agents must satisfy.
#[derive(Debug, Clone)]
pub struct Setup {
    pub spec: SetupSpec,
    pub group: Group,
    pub tower: Tower,
}

fn same_shape(a: &GroupSpec, b: &GroupSpec) -> bool {
    match (a, b) {
        (GroupSpec::Free { names: x }, GroupSpec::Free { names: y }) => x.len() == y.len(),
        _ => a == b,
    }
}

impl Setup {
    pub fn new(spec: SetupSpec) -> Result<Self> {
        let group = Group::new(spec.group.clone())?;
        let bad = |m: &str| Err(GenericityError::Invalid(m.into()));
        if spec.batch == 0 {
            return bad("batch must be positive");
        }
        match (spec.kind, &spec.group) {
            (SetupKind::Amalgam, GroupSpec::Amalgam { .. }) => {
                if group.amalgam_factor(1).is_finite() || group.amalgam_factor(2).is_finite() {
                    return bad("both factors must be infinite");
                }
            }
            (SetupKind::FiniteFactor, GroupSpec::Amalgam { .. }) => {
                let (g1, g2, s) = (group.amalgam_factor(1), group.amalgam_factor(2), group.amalgam_sigma());
                if g1.is_finite() || !g2.is_finite() {
                    return bad("the first factor must be infinite and the second finite");
                }
                match (g2.order(), s.order()) {
                    (Some(a), Some(b)) if a >= 2 * b => {}
                    _ => return bad("[Γ₂:Σ] must be at least 2"),
                }
            }
            (SetupKind::Hnn, GroupSpec::Hnn { .. }) => {}
            (SetupKind::FreeProductUnbounded, GroupSpec::FreeProduct { factors }) => {
                if factors.len() != 2 {
                    return bad("exactly two free factors are supported");
                }
                if !same_shape(&factors[0], &factors[1]) {
                    return bad("both factors must be copies of one group acting through one tower");
                }
                if Group::new(factors[0].clone())?.is_finite() {
                    return bad("the factors must be infinite");
                }
                if spec.cap.is_some() {
                    return bad("unbounded setups take no cap");
                }
            }
            _ => return bad("setup kind does not match the group"),
        }
        let tower = match spec.kind {
            SetupKind::FreeProductUnbounded => {
                let GroupSpec::FreeProduct { factors } = &spec.group else { unreachable!() };
                Tower::unbounded(Group::new(factors[0].clone())?)
            }
            _ => {
                let cap = spec.cap.clone().unwrap_or_else(scalar::one);
                Tower::equivariant(DistanceSet::RationalBounded(cap), group.clone())?
            }
        };
        Ok(Setup { spec, group, tower })
    }

    pub fn kind(&self) -> SetupKind {
        self.spec.kind
    }

    pub fn constraint(&self) -> Constraint {
        match self.spec.kind {
            SetupKind::Amalgam | SetupKind::FiniteFactor => Constraint::AmalgamSigma,
            SetupKind::Hnn => Constraint::HnnTwist,
            SetupKind::FreeProductUnbounded => Constraint::None,
        }
    }

    /// The point of the tower at the identity element.
    pub fn base_point(&mut self) -> PointId {
        let id = self.tower.group().unwrap().identity();
        self.tower.group_point(&id)
    }

    /// The agent before any step. Unbounded agents start as the identity at the base point,
    /// since an unbounded tower cannot realize the empty function.
    pub fn initial_agent(&mut self) -> IsometryAgent {
        let mut a = IsometryAgent::new(self.constraint());
        if self.spec.kind == SetupKind::FreeProductUnbounded {
            let x0 = self.base_point();
            a.insert_rep(x0, x0);
        }
        a
    }

    /// `w` as a free-product element lying in one factor.
    fn prod_lift(&self, j: u32, h: &Elem) -> Elem {
        let GroupSpec::FreeProduct { factors } = &self.spec.group else { panic!("not a free product") };
        let f = Group::new(factors[j as usize].clone()).unwrap();
        if f.is_identity(h) {
            self.group.identity()
        } else {
            Elem::Prod(vec![(j, h.clone())])
        }
    }
}

/// `π_α(w)p`: factor-one (or base) syllables act directly, the others through `α`.
pub fn evaluate_pi_alpha(s: &mut Setup, alpha: &mut IsometryAgent, w: &Elem, p: PointId) -> Result<PointId> {
    let g = s.group.clone();
    let t = &mut s.tower;
    let mut p = p;
    match s.spec.kind {
        SetupKind::Amalgam | SetupKind::FiniteFactor => {
            for (j, h) in g.amalgam_syllables(w).into_iter().rev() {
                let e = g.lift_factor(j, &h);
                if j == 1 {
                    p = t.act(&e, p)?;
                } else {
                    p = alpha.apply(&mut Spaces::One(t), p)?;
                    p = t.act(&e, p)?;
                    p = alpha.apply_inv(&mut Spaces::One(t), p)?;
                }
            }
        }
        SetupKind::Hnn => {
            let Elem::Hnn { h, t: ts } = w else { return Err(GenericityError::Requirement("not an HNN element".into())) };
            p = t.act(&g.lift_base(&h[ts.len()]), p)?;
            for i in (0..ts.len()).rev() {
                p = if ts[i] == 1 {
                    alpha.apply(&mut Spaces::One(t), p)?
                } else {
                    alpha.apply_inv(&mut Spaces::One(t), p)?
                };
                p = t.act(&g.lift_base(&h[i]), p)?;
            }
        }
        SetupKind::FreeProductUnbounded => {
            let syl = match w {
                Elem::Prod(v) => v.clone(),
                _ if g.is_identity(w) => vec![],
                _ => return Err(GenericityError::Requirement("not a free-product element".into())),
            };
            for (j, h) in syl.into_iter().rev() {
                if j == 0 {
                    p = t.act(&h, p)?;
                } else {
                    p = alpha.apply(&mut Spaces::One(t), p)?;
                    p = t.act(&h, p)?;
                    p = alpha.apply_inv(&mut Spaces::One(t), p)?;
                }
            }
        }
    }
    Ok(p)
}

/// Result of one step: the new agent and the data it was built from.
#[derive(Debug, Clone)]
pub struct Step {
    pub agent: IsometryAgent,
    /// The element realizing `φ` (homogeneity) or the word itself (faithfulness).
    pub g: Elem,
    /// Named group elements the construction used.
    pub elements: Vec<(String, Elem)>,
    /// A point moved by `π(w)` (faithfulness only).
    pub point: Option<PointId>,
    /// Orbit representatives added to the old agent.
    pub added: Vec<(PointId, PointId)>,
}

impl Step {
    fn finish(old: &IsometryAgent, agent: IsometryAgent, g: Elem, elements: Vec<(String, Elem)>, point: Option<PointId>) -> Self {
        let before: HashSet<(PointId, PointId)> = old.reps().iter().copied().collect();
        let added = agent.reps().iter().copied().filter(|r| !before.contains(r)).collect();
        Step { agent, g, elements, point, added }
    }
}

/// Conditions on a witness `g`: `d(gm, σa) = M` for `σ` in `avoid_group`, and
/// `d(σgm, gm') = M` for `σ ≠ 1` in `inj_group`, over `m, m' ∈ moving` and `a ∈ avoid`.
struct Query<'a> {
    moving: &'a [PointId],
    avoid: &'a [PointId],
    avoid_group: &'a dyn Fn(&Elem) -> bool,
    inj_group: &'a dyn Fn(&Elem) -> bool,
}

/// First candidate meeting the query, scanning growing balls of one factor.
///
/// `d(gm, σa) = d(e m, a)` with `e = σ⁻¹g`, so the elements `e` that bring `m` close to `a`
/// are computed once and each candidate is screened with group arithmetic only.
fn search_witness(t: &mut Tower, g: &Group, balls: &dyn Fn(usize) -> Vec<Elem>, q: &Query) -> Result<Elem> {
    let m = t.cap().ok_or(TowerError::Invalid("witness search needs a bounded tower".into()))?;
    let mut close = |x: PointId, y: PointId, skip_id: bool| -> Result<Vec<Elem>> {
        let mut out = Vec::new();
        for e in t.eset(x, y)? {
            if skip_id && g.is_identity(&e) {
                continue;
            }
            let ex = t.act(&e, x)?;
            if t.distance(ex, y) < m {
                out.push(e);
            }
        }
        Ok(out)
    };
    let mut near_avoid = BTreeSet::new();
    let mut near_self = BTreeSet::new();
    for &x in q.moving {
        for &a in q.avoid {
            near_avoid.extend(close(x, a, false)?);
        }
        for &y in q.moving {
            near_self.extend(close(x, y, true)?);
        }
    }
    let mut tried = HashSet::new();
    for r in RADII {
        for cand in balls(r) {
            if !tried.insert(cand.clone()) {
                continue;
            }
            let ci = g.inv(&cand);
            let ok = near_avoid.iter().all(|e| !(q.avoid_group)(&g.mul(&cand, &g.inv(e))))
                && near_self.iter().all(|e| !(q.inj_group)(&g.mul(&g.mul(&cand, e), &ci)));
            if ok {
                return Ok(cand);
            }
        }
    }
    Err(GenericityError::SearchExhausted(tried.len()))
}

fn amalgam_factor_ball(g: &Group, j: u8) -> impl Fn(usize) -> Vec<Elem> + '_ {
    move |r| g.amalgam_factor(j).ball(r, BALL_LIMIT).iter().map(|h| g.lift_factor(j, h)).collect()
}

fn hnn_base_ball(g: &Group) -> impl Fn(usize) -> Vec<Elem> + '_ {
    move |r| g.hnn_base().ball(r, BALL_LIMIT).iter().map(|h| g.lift_base(h)).collect()
}

fn max_level(t: &Tower) -> u32 {
    (0..t.len()).map(|p| t.level(p)).max().unwrap_or(0)
}

fn check_phi(t: &mut Tower, phi: &[(PointId, PointId)]) -> Result<()> {
    for (i, &(a, b)) in phi.iter().enumerate() {
        for &(c, d) in &phi[i + 1..] {
            if a == c || t.distance(a, c) != t.distance(b, d) {
                return Err(GenericityError::Requirement(format!("not a partial isometry at {a}, {c}")));
            }
        }
    }
    Ok(())
}

/// Extends the agent over the frozen points so the new agent agrees with it there.
fn freeze(s: &mut Setup, a: &mut IsometryAgent, frozen: &[PointId]) -> Result<()> {
    for &u in frozen {
        a.apply(&mut Spaces::One(&mut s.tower), u)?;
    }
    Ok(())
}

fn touched(a: &IsometryAgent, extra: &[PointId]) -> Vec<PointId> {
    let mut out = a.touched();
    out.extend(extra.iter().copied());
    out.into_iter().collect()
}

fn act_all(t: &mut Tower, e: &Elem, pts: &[PointId]) -> Result<Vec<PointId>> {
    pts.iter().map(|&p| Ok(t.act(e, p)?)).collect()
}

fn verify_homogeneity(s: &mut Setup, b: &mut IsometryAgent, g: &Elem, phi: &[(PointId, PointId)]) -> Result<()> {
    for &(x, y) in phi {
        let z = evaluate_pi_alpha(s, b, g, x)?;
        if !s.tower.canonical_eq(z, y) {
            return Err(GenericityError::Verification(format!("π(g) sends {x} to {z}, not {y}")));
        }
    }
    Ok(())
}

fn split_phi(phi: &[(PointId, PointId)]) -> (Vec<PointId>, Vec<PointId>) {
    (phi.iter().map(|p| p.0).collect(), phi.iter().map(|p| p.1).collect())
}

fn expect_kind(s: &Setup, kinds: &[SetupKind]) -> Result<()> {
    if kinds.contains(&s.spec.kind) {
        Ok(())
    } else {
        Err(GenericityError::Invalid(format!("step does not apply to a {:?} setup", s.spec.kind)))
    }
}

/// Homogeneity for `Γ₁ *_Σ Γ₂`: `g = h₁⁻¹g₂g₁`.
pub fn homogeneity_step_amalgam(
    s: &mut Setup,
    alpha: &IsometryAgent,
    frozen: &[PointId],
    phi: &[(PointId, PointId)],
) -> Result<Step> {
    expect_kind(s, &[SetupKind::Amalgam])?;
    check_phi(&mut s.tower, phi)?;
    let g = s.group.clone();
    if phi.is_empty() {
        return Ok(Step::finish(alpha, alpha.clone(), g.identity(), vec![], None));
    }
    let (dom, rng) = split_phi(phi);
    let in_sigma = |e: &Elem| matches!(e, Elem::Amal { syl, .. } if syl.is_empty());
    let mut a = alpha.clone();
    freeze(s, &mut a, frozen)?;

    let avoid = touched(&a, frozen);
    let q = Query { moving: &dom, avoid: &avoid, avoid_group: &in_sigma, inj_group: &in_sigma };
    let g1 = search_witness(&mut s.tower, &g, &amalgam_factor_ball(&g, 1), &q)?;
    let g1x = act_all(&mut s.tower, &g1, &dom)?;
    let mut ag1x = Vec::new();
    for &p in &g1x {
        ag1x.push(a.apply(&mut Spaces::One(&mut s.tower), p)?);
    }

    let avoid = touched(&a, frozen);
    let q = Query { moving: &rng, avoid: &avoid, avoid_group: &in_sigma, inj_group: &in_sigma };
    let h1 = search_witness(&mut s.tower, &g, &amalgam_factor_ball(&g, 1), &q)?;
    let q = Query { moving: &ag1x, avoid: &avoid, avoid_group: &in_sigma, inj_group: &in_sigma };
    let g2 = search_witness(&mut s.tower, &g, &amalgam_factor_ball(&g, 2), &q)?;

    let src = act_all(&mut s.tower, &h1, &rng)?;
    let dst = act_all(&mut s.tower, &g2, &ag1x)?;
    for (x, y) in src.into_iter().zip(dst) {
        a.insert_rep(x, y);
    }
    a.check(&mut Spaces::One(&mut s.tower))?;
    let elem = g.mul(&g.inv(&h1), &g.mul(&g2, &g1));
    verify_homogeneity(s, &mut a, &elem, phi)?;
    let named = vec![("g1".into(), g1), ("h1".into(), h1), ("g2".into(), g2)];
    Ok(Step::finish(alpha, a, elem, named, None))
}

/// Homogeneity for `Γ₁ *_Σ Γ₂` with `Γ₂` finite: `g = h₁⁻¹g₂g₁` with `g₂ ∈ Γ₂∖Σ`
/// and a far-apart set `A = ψ(dom φ)` realized point by point.
pub fn homogeneity_step_finite_factor(
    s: &mut Setup,
    alpha: &IsometryAgent,
    frozen: &[PointId],
    phi: &[(PointId, PointId)],
) -> Result<Step> {
    expect_kind(s, &[SetupKind::FiniteFactor])?;
    check_phi(&mut s.tower, phi)?;
    let g = s.group.clone();
    if phi.is_empty() {
        return Ok(Step::finish(alpha, alpha.clone(), g.identity(), vec![], None));
    }
    let (dom, rng) = split_phi(phi);
    let in_sigma = |e: &Elem| matches!(e, Elem::Amal { syl, .. } if syl.is_empty());
    let in_g2 = |e: &Elem| matches!(e, Elem::Amal { syl, .. } if syl.is_empty() || (syl.len() == 1 && syl[0].0 == 2));
    let mut a = alpha.clone();
    freeze(s, &mut a, frozen)?;

    let mut avoid = touched(&a, frozen);
    avoid.extend(&dom);
    let q = Query { moving: &dom, avoid: &avoid, avoid_group: &in_g2, inj_group: &in_sigma };
    let g1 = search_witness(&mut s.tower, &g, &amalgam_factor_ball(&g, 1), &q)?;
    let g1x = act_all(&mut s.tower, &g1, &dom)?;

    let mut avoid = touched(&a, frozen);
    avoid.extend(&g1x);
    let q = Query { moving: &rng, avoid: &avoid, avoid_group: &in_g2, inj_group: &in_sigma };
    let h1 = search_witness(&mut s.tower, &g, &amalgam_factor_ball(&g, 1), &q)?;

    // ψ(x_i) realizes d(x_i, x_j) on earlier ψ(x_j), above every existing level, so every
    // other distance is M.
    let mut psi: Vec<PointId> = Vec::new();
    for i in 0..dom.len() {
        let f: Vec<(PointId, Scalar)> = (0..i).map(|j| (psi[j], s.tower.distance(dom[i], dom[j]))).collect();
        let floor = max_level(&s.tower);
        psi.push(s.tower.realize_above(&f, floor)?);
    }
    let g2 = g
        .amalgam_factor(2)
        .elements()
        .unwrap()
        .iter()
        .map(|h| g.lift_factor(2, h))
        .find(|e| !in_sigma(e))
        .ok_or_else(|| GenericityError::Invalid("Γ₂ = Σ".into()))?;

    let h1y = act_all(&mut s.tower, &h1, &rng)?;
    let g2psi = act_all(&mut s.tower, &g2, &psi)?;
    for i in 0..dom.len() {
        a.insert_rep(g1x[i], psi[i]);
        a.insert_rep(h1y[i], g2psi[i]);
    }
    a.check(&mut Spaces::One(&mut s.tower))?;
    let elem = g.mul(&g.inv(&h1), &g.mul(&g2, &g1));
    verify_homogeneity(s, &mut a, &elem, phi)?;
    let named = vec![("g1".into(), g1), ("h1".into(), h1), ("g2".into(), g2)];
    Ok(Step::finish(alpha, a, elem, named, None))
}

/// Homogeneity for `HNN(H, Σ, θ)`: `g = h₂⁻¹ t h₁`.
pub fn homogeneity_step_hnn(
    s: &mut Setup,
    alpha: &IsometryAgent,
    frozen: &[PointId],
    phi: &[(PointId, PointId)],
) -> Result<Step> {
    expect_kind(s, &[SetupKind::Hnn])?;
    check_phi(&mut s.tower, phi)?;
    let g = s.group.clone();
    if phi.is_empty() {
        return Ok(Step::finish(alpha, alpha.clone(), g.identity(), vec![], None));
    }
    let (dom, rng) = split_phi(phi);
    let gp = g.clone();
    let in_sigma = |e: &Elem| gp.hnn_project(e).and_then(|h| gp.hnn_member(true, &h)).is_some();
    let in_theta = |e: &Elem| gp.hnn_project(e).and_then(|h| gp.hnn_member(false, &h)).is_some();
    let mut a = alpha.clone();
    freeze(s, &mut a, frozen)?;

    let avoid = touched(&a, frozen);
    let q = Query { moving: &dom, avoid: &avoid, avoid_group: &in_sigma, inj_group: &in_sigma };
    let h1 = search_witness(&mut s.tower, &g, &hnn_base_ball(&g), &q)?;
    let h1x = act_all(&mut s.tower, &h1, &dom)?;

    // α(h₁x) and α⁻¹(h₂φ(x)) are read off an extension of α; the new agent swaps them.
    let mut b = a.clone();
    let mut ah1x = Vec::new();
    for &p in &h1x {
        ah1x.push(b.apply(&mut Spaces::One(&mut s.tower), p)?);
    }
    let avoid = touched(&b, frozen);
    let q = Query { moving: &rng, avoid: &avoid, avoid_group: &in_theta, inj_group: &in_theta };
    let h2 = search_witness(&mut s.tower, &g, &hnn_base_ball(&g), &q)?;
    let h2y = act_all(&mut s.tower, &h2, &rng)?;
    let mut pre = Vec::new();
    for &p in &h2y {
        pre.push(b.apply_inv(&mut Spaces::One(&mut s.tower), p)?);
    }
    for i in 0..dom.len() {
        a.insert_rep(h1x[i], h2y[i]);
        a.insert_rep(pre[i], ah1x[i]);
    }
    a.check(&mut Spaces::One(&mut s.tower))?;
    let elem = g.mul(&g.inv(&h2), &g.mul(&g.stable_letter(), &h1));
    verify_homogeneity(s, &mut a, &elem, phi)?;
    let named = vec![("h1".into(), h1), ("h2".into(), h2)];
    Ok(Step::finish(alpha, a, elem, named, None))
}

/// Homogeneity for `Γ * Λ` on the rational Urysohn space: `g = γ₂λγ₁` from three
/// strong-disconnection witnesses.
pub fn homogeneity_step_unbounded(
    s: &mut Setup,
    alpha: &IsometryAgent,
    frozen: &[PointId],
    phi: &[(PointId, PointId)],
) -> Result<Step> {
    expect_kind(s, &[SetupKind::FreeProductUnbounded])?;
    check_phi(&mut s.tower, phi)?;
    let g = s.group.clone();
    if phi.is_empty() {
        return Ok(Step::finish(alpha, alpha.clone(), g.identity(), vec![], None));
    }
    let (dom, rng) = split_phi(phi);
    let mut a = alpha.clone();
    freeze(s, &mut a, frozen)?;
    let tg = s.tower.group().unwrap().clone();
    let t = &mut s.tower;

    let mut f0 = touched(&a, frozen);
    f0.extend(&dom);
    let k = unbounded::threshold(t, &f0)?;
    let gamma1 = unbounded::disconnection_witness(t, &f0, &k)?.gamma;
    let g1x = act_all(t, &gamma1, &dom)?;

    let mut fp = touched(&a, frozen);
    fp.extend(&g1x);
    let mut fpr = fp.clone();
    fpr.extend(&rng);
    let k2 = unbounded::threshold(t, &fpr)?.max(unbounded::threshold(t, &fp)?);
    let gamma2_inv = unbounded::disconnection_witness(t, &fpr, &k2)?.gamma;
    let lambda = unbounded::disconnection_witness(t, &fp, &k2)?.gamma;

    let src = act_all(t, &gamma2_inv, &rng)?;
    let dst = act_all(t, &lambda, &g1x)?;
    for &p in &g1x {
        a.insert_rep(p, p);
    }
    for (x, y) in src.into_iter().zip(dst) {
        a.insert_rep(x, y);
    }
    a.check(&mut Spaces::One(t))?;
    let gamma2 = tg.inv(&gamma2_inv);
    let elem = g.mul(&s.prod_lift(0, &gamma2), &g.mul(&s.prod_lift(1, &lambda), &s.prod_lift(0, &gamma1)));
    verify_homogeneity(s, &mut a, &elem, phi)?;
    let named = vec![("gamma1".into(), gamma1), ("gamma2".into(), gamma2), ("lambda".into(), lambda)];
    Ok(Step::finish(alpha, a, elem, named, None))
}

/// Dispatches to the homogeneity step of the setup.
pub fn homogeneity_step(s: &mut Setup, alpha: &IsometryAgent, frozen: &[PointId], phi: &[(PointId, PointId)]) -> Result<Step> {
    match s.spec.kind {
        SetupKind::Amalgam => homogeneity_step_amalgam(s, alpha, frozen, phi),
        SetupKind::FiniteFactor => homogeneity_step_finite_factor(s, alpha, frozen, phi),
        SetupKind::Hnn => homogeneity_step_hnn(s, alpha, frozen, phi),
        SetupKind::FreeProductUnbounded => homogeneity_step_unbounded(s, alpha, frozen, phi),
    }
}

/// Makes `π(w)` move some point while keeping the agent on `frozen`.
///
/// Words whose image is conjugate into one factor move every point already, and the
/// agent is returned unchanged together with the base point as witness.
pub fn faithfulness_step(s: &mut Setup, alpha: &IsometryAgent, frozen: &[PointId], w: &Elem) -> Result<Step> {
    let g = s.group.clone();
    if g.is_identity(w) {
        return Err(GenericityError::Requirement("the identity cannot act nontrivially".into()));
    }
    match s.spec.kind {
        SetupKind::Amalgam | SetupKind::FiniteFactor => {
            let syl = g.amalgam_syllables(w);
            if syl.len() < 2 {
                return factor_word(s, alpha, w);
            }
            let mut a = alpha.clone();
            freeze(s, &mut a, frozen)?;
            let floor = max_level(&s.tower);
            let x = s.tower.realize_above(&[], floor)?;
            // γ is the identity on the orbits of the prefixes g_{i_l}⋯g_{i_1}x.
            let mut pts = vec![x];
            let mut p = x;
            for (j, h) in syl.iter().rev() {
                p = s.tower.act(&g.lift_factor(*j, h), p)?;
                pts.push(p);
            }
            for p in pts {
                fix_point(s, &mut a, p, p)?;
            }
            finish_faithful(s, alpha, a, w, x, vec![])
        }
        SetupKind::Hnn => {
            let Elem::Hnn { h, t } = w else { return Err(GenericityError::Requirement("not an HNN element".into())) };
            if t.is_empty() {
                return factor_word(s, alpha, w);
            }
            let mut a = alpha.clone();
            freeze(s, &mut a, frozen)?;
            let floor = max_level(&s.tower);
            let x = s.tower.realize_above(&[], floor)?;
            let tl = g.stable_letter();
            let ti = g.inv(&tl);
            // γ agrees with t on the points where the word applies a stable letter.
            let mut p = s.tower.act(&g.lift_base(&h[t.len()]), x)?;
            for i in (0..t.len()).rev() {
                if t[i] == 1 {
                    let q = s.tower.act(&tl, p)?;
                    fix_point(s, &mut a, p, q)?;
                    p = q;
                } else {
                    let q = s.tower.act(&ti, p)?;
                    fix_point(s, &mut a, q, p)?;
                    p = q;
                }
                p = s.tower.act(&g.lift_base(&h[i]), p)?;
            }
            finish_faithful(s, alpha, a, w, x, vec![])
        }
        SetupKind::FreeProductUnbounded => faithfulness_unbounded(s, alpha, frozen, w),
    }
}

/// Adds `(x, y)` unless the agent already sends `x` to `y`.
fn fix_point(s: &mut Setup, a: &mut IsometryAgent, x: PointId, y: PointId) -> Result<()> {
    match a.lookup(&mut Spaces::One(&mut s.tower), x, true)? {
        Some(z) if z == y => Ok(()),
        Some(z) => Err(GenericityError::Verification(format!("{x} is already sent to {z}"))),
        None => {
            a.insert_rep(x, y);
            Ok(())
        }
    }
}

fn factor_word(s: &mut Setup, alpha: &IsometryAgent, w: &Elem) -> Result<Step> {
    let mut a = alpha.clone();
    let x0 = s.base_point();
    let y = evaluate_pi_alpha(s, &mut a, w, x0)?;
    if s.tower.distance(x0, y).is_zero() {
        return Err(GenericityError::Verification("a factor element fixed the base point".into()));
    }
    Ok(Step::finish(alpha, a, w.clone(), vec![], Some(x0)))
}

fn finish_faithful(
    s: &mut Setup,
    alpha: &IsometryAgent,
    mut a: IsometryAgent,
    w: &Elem,
    x: PointId,
    named: Vec<(String, Elem)>,
) -> Result<Step> {
    a.check(&mut Spaces::One(&mut s.tower))?;
    let y = evaluate_pi_alpha(s, &mut a, w, x)?;
    if s.tower.distance(x, y).is_zero() {
        return Err(GenericityError::Verification(format!("π(w) fixes the witness {x}")));
    }
    if s.spec.kind != SetupKind::FreeProductUnbounded {
        let direct = s.tower.act(w, x)?;
        if !s.tower.canonical_eq(direct, y) {
            return Err(GenericityError::Verification("π(w)x differs from wx".into()));
        }
    }
    Ok(Step::finish(alpha, a, w.clone(), named, Some(x)))
}

#[derive(Debug, Clone)]
enum Op {
    Beta,
    /// `λ' = α̂⁻¹λα̂` for a factor-two letter.
    Lam(Elem),
    /// A factor-one letter.
    Gam(Elem),
}

/// Faithfulness on the rational Urysohn space.
///
/// `w` is conjugated to `v = T λ₁ γ₂ λ₂ ⋯ γₙ λₙ` and the new agent is `α̂β`, where `α̂`
/// extends `α` and `β` is an involution fixing the frozen points, built along the orbit
/// of a fresh point so that every application of `β` meets a point outside its domain.
fn faithfulness_unbounded(s: &mut Setup, alpha: &IsometryAgent, frozen: &[PointId], w: &Elem) -> Result<Step> {
    let g = s.group.clone();
    let syl_of = |e: &Elem| match e {
        Elem::Prod(v) => v.clone(),
        _ => vec![],
    };
    let mut v = w.clone();
    let mut c = g.identity();
    loop {
        let sy = syl_of(&v);
        if sy.len() >= 2 && sy[0].0 == sy[sy.len() - 1].0 {
            let (j, h) = sy[sy.len() - 1].clone();
            let last = s.prod_lift(j, &h);
            v = g.mul(&g.mul(&last, &v), &g.inv(&last));
            c = g.mul(&last, &c);
        } else {
            break;
        }
    }
    let sy = syl_of(&v);
    if sy.len() < 2 {
        return factor_word(s, alpha, w);
    }
    if sy[sy.len() - 1].0 == 0 {
        let (j, h) = sy[sy.len() - 1].clone();
        let last = s.prod_lift(j, &h);
        v = g.mul(&g.mul(&last, &v), &g.inv(&last));
        c = g.mul(&last, &c);
    }
    let sy = syl_of(&v);
    let tg = s.tower.group().unwrap().clone();
    let (front, rest) = if sy[0].0 == 0 { (sy[0].1.clone(), &sy[1..]) } else { (tg.identity(), &sy[..]) };
    let mut ops = Vec::new();
    for (j, h) in rest.iter().rev() {
        if *j == 1 {
            ops.extend([Op::Beta, Op::Lam(h.clone()), Op::Beta]);
        } else {
            ops.push(Op::Gam(h.clone()));
        }
    }

    let mut a = alpha.clone();
    freeze(s, &mut a, frozen)?;
    let mut hat = a.clone();
    let t = &mut s.tower;
    let mut beta: BTreeMap<PointId, PointId> = a.reps().iter().map(|r| (r.0, r.0)).collect();
    let x0 = a.reps()[0].0;
    let floor = max_level(t);
    let x = t.realize_above(&[(x0, scalar::one())], floor)?;
    let front_inv = tg.inv(&front);
    let tinv_x = t.act(&front_inv, x)?;

    let mut cur = x;
    for (i, op) in ops.iter().enumerate() {
        match op {
            Op::Lam(h) => {
                let p = hat.apply(&mut Spaces::One(t), cur)?;
                let p = t.act(h, p)?;
                cur = hat.apply_inv(&mut Spaces::One(t), p)?;
            }
            Op::Gam(h) => cur = t.act(h, cur)?,
            Op::Beta => {
                if let Some(&z) = beta.get(&cur) {
                    cur = z;
                    continue;
                }
                // Preimages under the next letter exist before z does, so the next point is new.
                let mut marks: Vec<PointId> = beta.keys().copied().collect();
                marks.extend([cur, x, tinv_x]);
                for b in marks {
                    match ops.get(i + 1) {
                        Some(Op::Lam(h)) => {
                            let p = hat.apply(&mut Spaces::One(t), b)?;
                            let p = t.act(&tg.inv(h), p)?;
                            hat.apply_inv(&mut Spaces::One(t), p)?;
                        }
                        Some(Op::Gam(h)) => {
                            t.act(&tg.inv(h), b)?;
                        }
                        _ => {
                            t.act(&front_inv, b)?;
                        }
                    }
                }
                // z sits at d(c, β(b)) from each b and at min_b d(c, βb) + d(c, b) from c.
                let mut f: Vec<(PointId, Scalar)> = Vec::new();
                let mut vz: Option<Scalar> = None;
                for (&b, &bb) in &beta {
                    let d1 = t.distance(cur, bb);
                    let cand = &d1 + t.distance(cur, b);
                    vz = Some(vz.map_or(cand.clone(), |m| scalar::min(m, cand)));
                    f.push((b, d1));
                }
                f.push((cur, vz.expect("β fixes the frozen points")));
                let floor = max_level(t);
                let z = t.realize_above(&f, floor)?;
                beta.insert(cur, z);
                beta.insert(z, cur);
                cur = z;
            }
        }
    }
    let last = t.act(&front, cur)?;
    if t.distance(last, x).is_zero() {
        return Err(GenericityError::Verification("the involution chain closed up".into()));
    }
    let fixed: BTreeSet<PointId> = a.reps().iter().map(|r| r.0).collect();
    for (&u, &bu) in &beta {
        if fixed.contains(&u) {
            continue;
        }
        let img = hat.apply(&mut Spaces::One(t), bu)?;
        a.insert_rep(u, img);
    }
    // π(w) = π(c)⁻¹ π(v) π(c), so π(c)⁻¹x is moved exactly when x is moved by π(v).
    let ci = g.inv(&c);
    let y = evaluate_pi_alpha(s, &mut a, &ci, x)?;
    finish_faithful(s, alpha, a, w, y, vec![("conjugator".into(), c), ("cyclic".into(), v)])
}

// ---- scheduler ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Requirement {
    Homogeneity { phi: Vec<(PointId, PointId)> },
    Faithfulness { word: Elem },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub step: usize,
    pub requirement: Requirement,
    /// Domain of the agent when the step started.
    pub frozen: Vec<PointId>,
    pub elements: Vec<(String, Elem)>,
    pub g: Elem,
    pub point: Option<PointId>,
    pub added: Vec<(PointId, PointId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub setup: SetupSpec,
    pub seed: u64,
    pub steps: usize,
    pub entries: Vec<TranscriptEntry>,
    /// Orbit representatives of the final agent.
    pub reps: Vec<(PointId, PointId)>,
    /// Every tower point, so the transcript can be checked in a fresh tower.
    pub points: Vec<TermRecord>,
}

/// The requirement enumeration: partial isometries of size at most 2 on a point pool,
/// and nontrivial words by length.
pub struct Enumeration {
    pub pool: Vec<PointId>,
    phis: Vec<Vec<(PointId, PointId)>>,
    stage: usize,
    words: Vec<Elem>,
    next_phi: usize,
    next_word: usize,
}

const POOL_WINDOW: usize = 6;
const POOL_RANDOM: usize = 2;
const WORD_RADIUS: usize = 3;

impl Enumeration {
    pub fn new(s: &mut Setup, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool = s.tower.window(POOL_WINDOW, 4);
        let top = s.tower.cap().unwrap_or_else(|| scalar::int(2));
        for _ in 0..POOL_RANDOM {
            let k = rng.gen_range(1..=2usize);
            let mut base: Vec<PointId> = (0..k).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
            base.sort_unstable();
            base.dedup();
            let f = s.tower.random_katetov(&mut rng, &base, &top);
            if let Ok(z) = s.tower.realize(&f) {
                if !pool.contains(&z) {
                    pool.push(z);
                }
            }
        }
        let mut words = Vec::new();
        let mut seen = HashSet::new();
        for r in 0..=WORD_RADIUS {
            let mut layer: Vec<Elem> =
                s.group.ball(r, 400).into_iter().filter(|e| !s.group.is_identity(e) && seen.insert(e.clone())).collect();
            layer.sort_by_key(|e| s.group.format(e));
            words.extend(layer);
        }
        Enumeration { pool, phis: Vec::new(), stage: 0, words, next_phi: 0, next_word: 0 }
    }

    /// Partial isometries inside `pool[..w]` that use the point `pool[w-1]`.
    fn stage(t: &mut Tower, pool: &[PointId], w: usize) -> Vec<Vec<(PointId, PointId)>> {
        let mut out = Vec::new();
        let idx: Vec<usize> = (0..w).collect();
        let new = w - 1;
        for &i in &idx {
            for &j in &idx {
                if i == new || j == new {
                    out.push(vec![(pool[i], pool[j])]);
                }
            }
        }
        for i1 in 0..w {
            for i2 in (i1 + 1)..w {
                for j1 in 0..w {
                    for j2 in 0..w {
                        if j1 == j2 || ![i1, i2, j1, j2].contains(&new) {
                            continue;
                        }
                        if t.distance(pool[i1], pool[i2]) == t.distance(pool[j1], pool[j2]) {
                            out.push(vec![(pool[i1], pool[j1]), (pool[i2], pool[j2])]);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn next_phi(&mut self, t: &mut Tower) -> Option<Vec<(PointId, PointId)>> {
        while self.next_phi >= self.phis.len() {
            if self.stage >= self.pool.len() {
                return None;
            }
            self.stage += 1;
            let more = Self::stage(t, &self.pool, self.stage);
            self.phis.extend(more);
        }
        self.next_phi += 1;
        Some(self.phis[self.next_phi - 1].clone())
    }

    pub fn next_word(&mut self) -> Option<Elem> {
        let w = self.words.get(self.next_word).cloned();
        self.next_word += 1;
        w
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct Run {
    pub setup: Setup,
    pub agent: IsometryAgent,
    pub transcript: Transcript,
}

/// A run aborted by a failing step, with the transcript up to that step.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: GenericityError,
    pub transcript: Transcript,
}

fn transcript_of(s: &Setup, seed: u64, steps: usize, entries: Vec<TranscriptEntry>, a: &IsometryAgent) -> Transcript {
    let all: Vec<PointId> = (0..s.tower.len()).collect();
    Transcript {
        setup: s.spec.clone(),
        seed,
        steps,
        entries,
        reps: a.reps().to_vec(),
        points: s.tower.export(&all),
    }
}

/// Runs `steps` rounds: `batch` homogeneity requirements, then twice as many faithfulness ones, repeated.
pub fn run_scheduler(spec: &SetupSpec, steps: usize, seed: u64) -> std::result::Result<Run, RunFailure> {
    let fail = |error: GenericityError| RunFailure {
        error,
        transcript: Transcript { setup: spec.clone(), seed, steps, entries: vec![], reps: vec![], points: vec![] },
    };
    let mut s = Setup::new(spec.clone()).map_err(fail)?;
    let mut a = s.initial_agent();
    let mut en = Enumeration::new(&mut s, seed);
    let b = spec.batch;
    let mut entries = Vec::new();
    for step in 0..steps {
        let frozen: Vec<PointId> = a.graph().iter().map(|p| p.0).collect();
        let req = if step % (3 * b) < b {
            en.next_phi(&mut s.tower).map(|phi| Requirement::Homogeneity { phi })
        } else {
            en.next_word().map(|word| Requirement::Faithfulness { word })
        };
        let Some(req) = req else { break };
        let out = match &req {
            Requirement::Homogeneity { phi } => homogeneity_step(&mut s, &a, &frozen, phi),
            Requirement::Faithfulness { word } => faithfulness_step(&mut s, &a, &frozen, word),
        };
        match out {
            Ok(st) => {
                entries.push(TranscriptEntry {
                    step,
                    requirement: req,
                    frozen,
                    elements: st.elements,
                    g: st.g,
                    point: st.point,
                    added: st.added,
                });
                a = st.agent;
            }
            Err(error) => {
                let transcript = transcript_of(&s, seed, steps, entries, &a);
                return Err(RunFailure { error, transcript });
            }
        }
    }
    let transcript = transcript_of(&s, seed, steps, entries, &a);
    Ok(Run { setup: s, agent: a, transcript })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub entries: usize,
    pub homogeneity: usize,
    pub faithfulness: usize,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Rebuilds the final agent in a fresh tower and re-checks every requirement with it.
pub fn verify_transcript(tr: &Transcript) -> Result<VerifyReport> {
    let mut s = Setup::new(tr.setup.clone())?;
    let map = s.tower.import(&tr.points)?;
    let mut a = IsometryAgent::new(s.constraint());
    for (x, y) in &tr.reps {
        a.insert_rep(lookup(&map, x)?, lookup(&map, y)?);
    }
    check_entries(&mut s, &mut a, &tr.entries, &map)
}

/// For each `k`, the agent after step `k` (the initial agent plus every `added` list up to `k`)
/// re-checked against requirements `0..=k`.
pub fn verify_prefixes(tr: &Transcript) -> Result<Vec<VerifyReport>> {
    let mut s = Setup::new(tr.setup.clone())?;
    let map = s.tower.import(&tr.points)?;
    let mut reps = s.initial_agent().reps().to_vec();
    let mut out = Vec::new();
    for (k, e) in tr.entries.iter().enumerate() {
        for (x, y) in &e.added {
            reps.push((lookup(&map, x)?, lookup(&map, y)?));
        }
        let mut a = IsometryAgent::new(s.constraint());
        for &(x, y) in &reps {
            a.insert_rep(x, y);
        }
        out.push(check_entries(&mut s, &mut a, &tr.entries[..=k], &map)?);
    }
    Ok(out)
}

fn lookup(map: &HashMap<usize, PointId>, p: &PointId) -> Result<PointId> {
    map.get(p).copied().ok_or(GenericityError::Tower(TowerError::UnknownPoint(*p)))
}

fn check_entries(
    s: &mut Setup,
    a: &mut IsometryAgent,
    entries: &[TranscriptEntry],
    map: &HashMap<usize, PointId>,
) -> Result<VerifyReport> {
    let m = |p: &PointId| lookup(map, p);
    let mut report = VerifyReport { entries: entries.len(), homogeneity: 0, faithfulness: 0, failures: vec![] };
    if let Err(e) = a.check(&mut Spaces::One(&mut s.tower)) {
        report.failures.push(format!("agent: {e}"));
        return Ok(report);
    }
    for e in entries {
        match &e.requirement {
            Requirement::Homogeneity { phi } => {
                report.homogeneity += 1;
                for (x, y) in phi {
                    let z = evaluate_pi_alpha(s, a, &e.g, m(x)?)?;
                    if !s.tower.canonical_eq(z, m(y)?) {
                        report.failures.push(format!("step {}: π(g) misses φ at {x}", e.step));
                    }
                }
            }
            Requirement::Faithfulness { word } => {
                report.faithfulness += 1;
                let Some(p) = e.point else {
                    report.failures.push(format!("step {}: no witness point", e.step));
                    continue;
                };
                let p = m(&p)?;
                let q = evaluate_pi_alpha(s, a, word, p)?;
                if s.tower.distance(p, q).is_zero() {
                    report.failures.push(format!("step {}: π(w) fixes the witness", e.step));
                }
            }
        }
    }
    if let Err(e) = a.check(&mut Spaces::One(&mut s.tower)) {
        report.failures.push(format!("agent after evaluation: {e}"));
    }
    Ok(report)
}

/// Reruns the scheduler and compares the transcripts.
pub fn replay(tr: &Transcript) -> std::result::Result<bool, GenericityError> {
    match run_scheduler(&tr.setup, tr.steps, tr.seed) {
        Ok(run) => Ok(run.transcript == *tr),
        Err(f) => Ok(f.transcript == *tr),
    }
}

/// Splits a graph of groups at `e0`: an HNN extension when the rest stays connected,
/// an amalgam otherwise.
pub fn tree_to_setup(graph: &GraphOfGroups, e0: usize) -> Result<SetupSpec> {
    if graph.edges.is_empty() {
        return Err(GenericityError::TrivialTree);
    }
    if e0 >= graph.edges.len() {
        return Err(GenericityError::Invalid(format!("no edge {e0}")));
    }
    let verts: Vec<usize> = (0..graph.vertices.len()).collect();
    let mut edges: Vec<usize> = (0..graph.edges.len()).filter(|&e| e != e0).collect();
    edges.push(e0);
    let (spec, _) = graph.fundamental(&verts, &edges)?;
    let kind = match &spec {
        GroupSpec::Hnn { .. } => SetupKind::Hnn,
        GroupSpec::Amalgam { g2, .. } if Group::new((**g2).clone())?.is_finite() => SetupKind::FiniteFactor,
        _ => SetupKind::Amalgam,
    };
    Ok(SetupSpec::new(kind, spec))
}


#[cfg(test)]
mod run_tests {
    use super::*;

    fn run_preset(name: &str, steps: usize) {
        let run = run_scheduler(&SetupSpec::preset(name).unwrap(), steps, 11)
            .unwrap_or_else(|f| panic!("{name}: {}", f.error));
        let report = verify_transcript(&run.transcript).unwrap();
        assert!(report.ok(), "{name}: {:?}", report.failures);
        assert_eq!((report.homogeneity, report.faithfulness), (5, 10), "{name}");
    }

    #[test]
    fn z_z2_preset() {
        run_preset("free-product-Z-Z2", 15);
    }

    #[test]
    fn hnn_preset() {
        run_preset("HNN-F2", 15);
    }

    #[test]
    fn unbounded_preset() {
        run_preset("unbounded-ZZ", 15);
    }

    #[test]
    fn surface_preset() {
        run_preset("surface", 15);
    }
}
