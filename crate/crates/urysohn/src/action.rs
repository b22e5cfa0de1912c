//! Group actions by isometries: induced actions on towers and small permutation
//! actions, with the freeness, mixing and highly core-free predicates.

use crate::agent::{AgentError, IsometryAgent, Spaces};
use crate::distance_set::DistanceSet;
use crate::group::{Elem, Group};
use crate::metric::FiniteMetricSpace;
use crate::scalar::{self, Scalar};
use crate::tower::{PointId, Tower, TowerError};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionError {
    #[error("the identity element cannot witness freeness")]
    IdentityElement,
    #[error("this action carries no mixing certificates")]
    NoCertificate,
    #[error("search exhausted after {0} candidates")]
    SearchExhausted(usize),
    #[error("invalid action: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// A finite group permuting the points of a finite metric space.
#[derive(Debug, Clone)]
pub struct FiniteAction {
    pub group: Group,
    pub space: FiniteMetricSpace,
    perms: BTreeMap<Elem, Vec<usize>>,
}

impl FiniteAction {
    /// Closes the generator permutations under composition and checks that each is an isometry.
    pub fn new(group: Group, space: FiniteMetricSpace, gens: Vec<(Elem, Vec<usize>)>) -> Result<Self, ActionError> {
        let n = space.len();
        let mut perms = BTreeMap::from([(group.identity(), (0..n).collect::<Vec<_>>())]);
        let mut todo = vec![group.identity()];
        while let Some(a) = todo.pop() {
            for (g, p) in &gens {
                if p.len() != n {
                    return Err(ActionError::Invalid("permutation of the wrong size".into()));
                }
                let ga = group.mul(g, &a);
                let composed: Vec<usize> = perms[&a].iter().map(|&i| p[i]).collect();
                match perms.get(&ga) {
                    Some(old) if *old != composed => {
                        return Err(ActionError::Invalid("generators do not define an action".into()))
                    }
                    Some(_) => {}
                    None => {
                        perms.insert(ga.clone(), composed);
                        todo.push(ga);
                    }
                }
            }
        }
        for p in perms.values() {
            for i in 0..n {
                for j in 0..n {
                    if space.d(p[i], p[j]) != space.d(i, j) {
                        return Err(ActionError::Invalid("a generator is not an isometry".into()));
                    }
                }
            }
        }
        Ok(FiniteAction { group, space, perms })
    }
}

/// `Γ ↷ X` for the two kinds of spaces we build.
#[derive(Debug, Clone)]
pub enum GroupAction {
    Induced(Tower),
    Finite(FiniteAction),
}

/// The induced action of `Γ` on the tower over `Γ` with the discrete metric at `M`.
pub fn induced_action(group: Group, set: DistanceSet) -> Result<GroupAction, ActionError> {
    Ok(GroupAction::Induced(Tower::equivariant(set, group)?))
}

impl GroupAction {
    pub fn group(&self) -> &Group {
        match self {
            GroupAction::Induced(t) => t.group().expect("induced actions carry a group"),
            GroupAction::Finite(a) => &a.group,
        }
    }

    pub fn tower(&mut self) -> Option<&mut Tower> {
        match self {
            GroupAction::Induced(t) => Some(t),
            GroupAction::Finite(_) => None,
        }
    }

    pub fn cap(&self) -> Option<Scalar> {
        match self {
            GroupAction::Induced(t) => t.cap(),
            GroupAction::Finite(a) => a.space.set.cap().cloned(),
        }
    }

    pub fn act(&mut self, g: &Elem, p: PointId) -> Result<PointId, ActionError> {
        match self {
            GroupAction::Induced(t) => Ok(t.act(g, p)?),
            GroupAction::Finite(a) => {
                let perm = a.perms.get(g).ok_or_else(|| ActionError::Invalid("element not in the group".into()))?;
                perm.get(p).copied().ok_or_else(|| ActionError::Invalid(format!("no point {p}")))
            }
        }
    }

    pub fn distance(&mut self, p: PointId, q: PointId) -> Scalar {
        match self {
            GroupAction::Induced(t) => t.distance(p, q),
            GroupAction::Finite(a) => a.space.d(p, q).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FreenessReport {
    pub ok: bool,
    /// `(γ, p, d(γp, p))` for every failing sample.
    pub witnesses: Vec<(Elem, PointId, String)>,
}

/// `d(γp, p) = M` on every sample (`≥ 1` for unbounded towers).
pub fn strong_freeness_check(a: &mut GroupAction, sample: &[(Elem, PointId)]) -> Result<FreenessReport, ActionError> {
    let g = a.group().clone();
    let cap = a.cap();
    let mut witnesses = Vec::new();
    for (gamma, p) in sample {
        if g.is_identity(gamma) {
            return Err(ActionError::IdentityElement);
        }
        let q = a.act(gamma, *p)?;
        let d = a.distance(q, *p);
        let ok = match &cap {
            Some(m) => d == *m,
            None => d >= scalar::one(),
        };
        if !ok {
            witnesses.push((gamma.clone(), *p, scalar::fmt(&d)));
        }
    }
    Ok(FreenessReport { ok: witnesses.is_empty(), witnesses })
}

/// A finite `E_F ⊆ Γ` outside which `d(γx, y) = M` for all `x, y ∈ F`.
pub fn mixing_witness(a: &mut GroupAction, f: &[PointId]) -> Result<BTreeSet<Elem>, ActionError> {
    let GroupAction::Induced(t) = a else { return Err(ActionError::NoCertificate) };
    let mut out = BTreeSet::new();
    for &x in f {
        for &y in f {
            out.extend(t.eset(x, y)?);
        }
    }
    Ok(out)
}

/// Elements of the ball that bring two points of `F` closer than `M` but are missing from `E_F`.
pub fn mixing_counterexamples(
    a: &mut GroupAction,
    f: &[PointId],
    exceptions: &BTreeSet<Elem>,
    radius: usize,
    limit: usize,
) -> Result<Vec<Elem>, ActionError> {
    let cap = a.cap().ok_or(ActionError::NoCertificate)?;
    let ball = a.group().ball(radius, limit);
    let mut bad = Vec::new();
    for g in ball {
        if exceptions.contains(&g) {
            continue;
        }
        'pairs: for &x in f {
            let gx = a.act(&g, x)?;
            for &y in f {
                if a.distance(gx, y) < cap {
                    bad.push(g.clone());
                    break 'pairs;
                }
            }
        }
    }
    Ok(bad)
}

/// Searches `Λ` for `g` with `d(gx, u) = M` for `u ∈ ΣF` and `d(σgx, gy) = M` for `σ ≠ 1`.
///
/// Candidates are screened with exception sets and then confirmed on real distances.
pub fn hcf_action_witness(
    a: &mut GroupAction,
    in_sigma: &dyn Fn(&Elem) -> bool,
    in_lambda: &dyn Fn(&Elem) -> bool,
    f: &[PointId],
    radius: usize,
    limit: usize,
) -> Result<Elem, ActionError> {
    let GroupAction::Induced(t) = a else { return Err(ActionError::NoCertificate) };
    let g = t.group().unwrap().clone();
    let mut e_sets = Vec::new();
    for &x in f {
        for &y in f {
            e_sets.push(t.eset(x, y)?);
        }
    }
    let ball = g.ball(radius, limit);
    for cand in &ball {
        if !in_lambda(cand) {
            continue;
        }
        let ci = g.inv(cand);
        let disjoint = e_sets.iter().flatten().all(|e| !in_sigma(&g.mul(cand, &g.inv(e))));
        let injective = e_sets
            .iter()
            .flatten()
            .filter(|e| !g.is_identity(e))
            .all(|e| !in_sigma(&g.mul(&g.mul(cand, e), &ci)));
        if disjoint && injective && hcf_holds(t, &g, in_sigma, cand, f)? {
            return Ok(cand.clone());
        }
    }
    Err(ActionError::SearchExhausted(ball.len()))
}

/// Checks the defining equalities for `g` on `F` with the distances of the tower.
pub fn hcf_holds(
    t: &mut Tower,
    g: &Group,
    in_sigma: &dyn Fn(&Elem) -> bool,
    cand: &Elem,
    f: &[PointId],
) -> Result<bool, ActionError> {
    let m = t.cap().ok_or(ActionError::NoCertificate)?;
    let moved: Vec<PointId> = f.iter().map(|&x| t.act(cand, x)).collect::<Result<_, _>>()?;
    for &gx in &moved {
        for &y in f {
            // Every σ with d(gx, σy) < M is in the exception set of (gx, y), inverted.
            for s in t.eset(gx, y)? {
                if in_sigma(&g.inv(&s)) {
                    let sy = t.act(&g.inv(&s), y)?;
                    if t.distance(gx, sy) < m {
                        return Ok(false);
                    }
                }
            }
        }
        for &gy in &moved {
            for s in t.eset(gx, gy)? {
                if !g.is_identity(&s) && in_sigma(&s) {
                    let sgx = t.act(&s, gx)?;
                    if t.distance(sgx, gy) < m {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// One step of equivariant back-and-forth: puts the orbit of `x` into the domain of `agent`.
pub fn equivariant_extend(sp: &mut Spaces, agent: &mut IsometryAgent, x: PointId) -> Result<PointId, ActionError> {
    if let Some(z) = agent.lookup(sp, x, true)? {
        return Ok(z);
    }
    let z = agent.apply(sp, x)?;
    agent.check(sp)?;
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{extend_isometry, Constraint};
    use crate::group::{presets, GroupSpec, Subgroup};
    use crate::scalar::{int, ratio};
    use crate::tower::Term;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m1() -> DistanceSet {
        DistanceSet::RationalBounded(int(1))
    }

    fn free2() -> Group {
        Group::new(GroupSpec::free(&["a", "b"])).unwrap()
    }

    /// Random points up to level 3 over the first group seeds.
    fn sample_points(t: &mut Tower, rng: &mut ChaCha8Rng, n: usize) -> Vec<PointId> {
        let mut pts = t.window(6, 6);
        while pts.len() < n {
            let k = rng.gen_range(1..=3usize).min(pts.len());
            let mut base = Vec::new();
            for _ in 0..k {
                base.push(pts[rng.gen_range(0..pts.len())]);
            }
            base.sort_unstable();
            base.dedup();
            let f = t.random_katetov(rng, &base, &int(1));
            let z = t.realize(&f).unwrap();
            if t.level(z) <= 3 {
                pts.push(z);
            }
        }
        pts
    }

    #[test]
    fn induced_base_level() {
        let g = free2();
        let mut a = induced_action(g.clone(), m1()).unwrap();
        let t = a.tower().unwrap();
        let e = t.group_point(&g.identity());
        let x = g.parse("a b^-1").unwrap();
        let gx = t.act(&x, e).unwrap();
        assert_eq!(gx, t.group_point(&x));
        assert_eq!(t.distance(gx, e), int(1));
        assert_eq!(t.act(&g.identity(), gx).unwrap(), gx);
    }

    #[test]
    fn action_on_extensions_is_diagonal_and_isometric() {
        let g = free2();
        let mut a = induced_action(g.clone(), m1()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = a.tower().unwrap();
        let pts = sample_points(t, &mut rng, 30);
        let ball = g.ball(2, 17);
        for i in 0..50 {
            let (p, q) = (pts[i % pts.len()], pts[(i * 7 + 3) % pts.len()]);
            let s = &ball[i % ball.len()];
            let (sp, sq) = (t.act(s, p).unwrap(), t.act(s, q).unwrap());
            assert_eq!(t.distance(sp, sq), t.distance(p, q));
        }
        // act(γ, Ext(supp, a)) = Ext(γ supp, γ a)
        let z = *pts.iter().find(|&&p| t.level(p) >= 1).unwrap();
        let s = g.parse("a^2 b").unwrap();
        let sz = t.act(&s, z).unwrap();
        let (Term::Ext { support, param, .. }, Term::Ext { support: s2, param: p2, .. }) =
            (t.term(z).clone(), t.term(sz).clone())
        else {
            panic!()
        };
        assert_eq!(p2, Some(g.mul(&s, param.as_ref().unwrap())));
        let mut moved: Vec<_> = support.iter().map(|(x, v)| (t.act(&s, *x).unwrap(), v.clone())).collect();
        moved.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(s2, moved);
        // Associativity.
        for i in 0..10 {
            let (x, y) = (&ball[i], &ball[(i * 5 + 2) % ball.len()]);
            let p = pts[(i * 3) % pts.len()];
            let yp = t.act(y, p).unwrap();
            assert_eq!(t.act(x, yp).unwrap(), t.act(&g.mul(x, y), p).unwrap());
        }
    }

    #[test]
    fn induced_action_is_strongly_free() {
        let g = free2();
        let mut a = induced_action(g.clone(), m1()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = sample_points(a.tower().unwrap(), &mut rng, 40);
        let ball = g.ball(2, 17);
        let sample: Vec<_> = (0..100).map(|i| (ball[1 + i % (ball.len() - 1)].clone(), pts[(i * 13) % pts.len()])).collect();
        let r = strong_freeness_check(&mut a, &sample).unwrap();
        assert!(r.ok, "{:?}", r.witnesses);
        assert_eq!(
            strong_freeness_check(&mut a, &[(g.identity(), pts[0])]),
            Err(ActionError::IdentityElement)
        );
    }

    fn swap_action() -> GroupAction {
        let z2 = Group::new(GroupSpec::cyclic("s", 2)).unwrap();
        let s = z2.parse("s").unwrap();
        let space = FiniteMetricSpace::uniform(m1(), 3, int(1));
        GroupAction::Finite(FiniteAction::new(z2, space, vec![(s, vec![1, 0, 2])]).unwrap())
    }

    #[test]
    fn finite_counterexample() {
        let mut a = swap_action();
        let s = a.group().parse("s").unwrap();
        let r = strong_freeness_check(&mut a, &[(s.clone(), 0), (s.clone(), 2)]).unwrap();
        assert!(!r.ok);
        assert_eq!(r.witnesses, vec![(s, 2, "0".to_string())]);
        assert_eq!(mixing_witness(&mut a, &[0, 1]), Err(ActionError::NoCertificate));
        let z2 = Group::new(GroupSpec::cyclic("s", 2)).unwrap();
        let s = z2.parse("s").unwrap();
        let bad = FiniteAction::new(z2, FiniteMetricSpace::uniform(m1(), 2, int(1)), vec![(s, vec![0, 0])]);
        assert!(bad.is_err());
    }

    #[test]
    fn mixing_exceptions() {
        let g = free2();
        let mut a = induced_action(g.clone(), m1()).unwrap();
        let (x, y) = (g.parse("a").unwrap(), g.parse("b a").unwrap());
        let t = a.tower().unwrap();
        let (px, py) = (t.group_point(&x), t.group_point(&y));
        let e0 = mixing_witness(&mut a, &[px, py]).unwrap();
        let e = e0.clone();
        let expect = BTreeSet::from([g.identity(), g.mul(&y, &g.inv(&x)), g.mul(&x, &g.inv(&y))]);
        assert_eq!(e, expect);
        assert!(mixing_counterexamples(&mut a, &[px, py], &e, 3, 200).unwrap().is_empty());

        let t = a.tower().unwrap();
        let far = t.realize(&[]).unwrap();
        // Only the identity brings an empty-support point closer than M to itself.
        assert_eq!(mixing_witness(&mut a, &[far]).unwrap(), BTreeSet::from([g.identity()]));
        assert!(mixing_counterexamples(&mut a, &[far], &BTreeSet::from([g.identity()]), 3, 200).unwrap().is_empty());

        let t = a.tower().unwrap();
        let z1 = t.realize(&[(px, ratio(1, 2)), (py, ratio(2, 3))]).unwrap();
        let z2 = t.realize(&[(px, ratio(1, 3))]).unwrap();
        let w = t.realize(&[(z1, ratio(1, 3)), (z2, ratio(1, 2))]).unwrap();
        assert_eq!(t.level(w), 2);
        let e = mixing_witness(&mut a, &[w, z1]).unwrap();
        assert!(mixing_counterexamples(&mut a, &[w, z1], &e, 3, 300).unwrap().is_empty());
        // Removing an exception exposes a close pair.
        let mut trimmed = e0;
        trimmed.remove(&g.mul(&y, &g.inv(&x)));
        assert!(!mixing_counterexamples(&mut a, &[px, py], &trimmed, 3, 300).unwrap().is_empty());
    }

    #[test]
    fn hcf_trivial_sigma() {
        let g = free2();
        let mut a = induced_action(g.clone(), m1()).unwrap();
        let t = a.tower().unwrap();
        let e = t.group_point(&g.identity());
        let z = t.realize(&[(e, ratio(1, 2))]).unwrap();
        let gi = g.clone();
        let w = hcf_action_witness(&mut a, &|s| gi.is_identity(s), &|_| true, &[e, z], 2, 50).unwrap();
        let t = a.tower().unwrap();
        for p in [e, z] {
            let gp = t.act(&w, p).unwrap();
            for q in [e, z] {
                assert_eq!(t.distance(gp, q), int(1));
            }
        }
    }

    #[test]
    fn hcf_commutator_in_f2() {
        let g = free2();
        let c = g.parse("a b a^-1 b^-1").unwrap();
        let sub = Subgroup::Cyclic { generator: c };
        let mut a = induced_action(g.clone(), m1()).unwrap();
        let t = a.tower().unwrap();
        let e = t.group_point(&g.identity());
        let pa = t.group_point(&g.parse("a").unwrap());
        let z = t.realize(&[(e, ratio(1, 3)), (pa, ratio(2, 3))]).unwrap();
        let f = [e, pa, z];
        let gc = g.clone();
        let w = hcf_action_witness(&mut a, &|s| sub.contains(&gc, s), &|_| true, &f, 3, 400).unwrap();
        // Independent check over Σ-elements of a ball.
        let t = a.tower().unwrap();
        let sigmas: Vec<Elem> = (-3..=3).map(|k| g.pow(&g.parse("a b a^-1 b^-1").unwrap(), &k.into())).collect();
        for &x in &f {
            let gx = t.act(&w, x).unwrap();
            for &y in &f {
                let gy = t.act(&w, y).unwrap();
                for s in &sigmas {
                    let sy = t.act(s, y).unwrap();
                    assert_eq!(t.distance(gx, sy), int(1));
                    if !g.is_identity(s) {
                        let sgx = t.act(s, gx).unwrap();
                        assert_eq!(t.distance(sgx, gy), int(1));
                    }
                }
            }
        }
    }

    #[test]
    fn hcf_finite_sigma_in_amalgam() {
        let g = Group::new(presets::z_amalgam_z2()).unwrap();
        let s = g.lift_factor(2, &g.amalgam_factor(2).parse("s").unwrap());
        let sub = Subgroup::Elements { elems: vec![s.clone()] };
        let mut a = induced_action(g.clone(), m1()).unwrap();
        let t = a.tower().unwrap();
        let e = t.group_point(&g.identity());
        let ps = t.group_point(&s);
        let z = t.realize(&[(e, ratio(1, 2)), (ps, ratio(1, 2))]).unwrap();
        let gc = g.clone();
        let w = hcf_action_witness(&mut a, &|x| sub.contains(&gc, x), &|_| true, &[e, z], 3, 200).unwrap();
        let t = a.tower().unwrap();
        for x in [e, z] {
            let gx = t.act(&w, x).unwrap();
            for y in [e, z] {
                let gy = t.act(&w, y).unwrap();
                let sy = t.act(&s, y).unwrap();
                assert_eq!(t.distance(gx, y), int(1));
                assert_eq!(t.distance(gx, sy), int(1));
                let sgx = t.act(&s, gx).unwrap();
                assert_eq!(t.distance(sgx, gy), int(1));
            }
        }
    }

    #[test]
    fn hcf_finite_group_exhausts() {
        let g = Group::new(GroupSpec::cyclic("s", 3)).unwrap();
        let mut a = induced_action(g.clone(), m1()).unwrap();
        let t = a.tower().unwrap();
        let f: Vec<_> = g.elements().unwrap().iter().map(|x| t.group_point(x)).collect();
        let r = hcf_action_witness(&mut a, &|_| true, &|_| true, &f, 3, 50);
        assert!(matches!(r, Err(ActionError::SearchExhausted(_))));
    }

    #[test]
    fn equivariant_extend_steps() {
        // Σ = {1}: a plain step.
        let g = Group::new(GroupSpec::integers("a")).unwrap();
        let mut t = Tower::equivariant(m1(), g.clone()).unwrap();
        let e = t.group_point(&g.identity());
        let x = t.realize(&[(e, ratio(1, 2))]).unwrap();
        let mut sp = Spaces::One(&mut t);
        let mut ag = extend_isometry(&mut sp, Constraint::None, &[(e, e)], &[], &[]).unwrap();
        let z = equivariant_extend(&mut sp, &mut ag, x).unwrap();
        assert_eq!(sp.side(true).distance(z, e), ratio(1, 2));
        assert_eq!(equivariant_extend(&mut sp, &mut ag, x).unwrap(), z);
        assert_eq!(ag.reps().len(), 2);

        // Σ = ℤ acting by the induced action; one orbit pair added.
        let mut ag = IsometryAgent::new(Constraint::Whole);
        ag.insert_rep(e, e);
        let z = equivariant_extend(&mut sp, &mut ag, x).unwrap();
        let win = sp.side(true).window(12, 5);
        let a1 = g.parse("a").unwrap();
        for k in -3..=3i64 {
            let s = g.pow(&a1, &k.into());
            let sx = sp.side(true).act(&s, x).unwrap();
            let sz = sp.side(true).act(&s, z).unwrap();
            assert_eq!(ag.apply(&mut sp, sx).unwrap(), sz);
            for &w in &win[..5] {
                let lhs = sp.side(true).distance(sx, w);
                let aw = ag.apply(&mut sp, w).unwrap();
                assert_eq!(lhs, sp.side(true).distance(sz, aw));
            }
        }
    }

    #[test]
    fn finite_group_actions_are_conjugate() {
        let g = Group::new(GroupSpec::cyclic("s", 3)).unwrap();
        let mut t1 = Tower::equivariant(m1(), g.clone()).unwrap();
        let mut t2 = Tower::equivariant(m1(), g.clone()).unwrap();
        // Grow the two towers along different random paths.
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let p1 = sample_points(&mut t1, &mut r1, 12);
        let p2 = sample_points(&mut t2, &mut r2, 12);
        let mut sp = Spaces::Two(&mut t1, &mut t2);
        let mut ag = extend_isometry(&mut sp, Constraint::Whole, &[], &p1, &p2).unwrap();
        ag.check(&mut sp).unwrap();
        let s = g.parse("s").unwrap();
        for &p in &p1 {
            let ap = ag.apply(&mut sp, p).unwrap();
            let spp = sp.side(true).act(&s, p).unwrap();
            let lhs = ag.apply(&mut sp, spp).unwrap();
            assert_eq!(lhs, sp.side(false).act(&s, ap).unwrap());
            for &q in &p1 {
                let aq = ag.apply(&mut sp, q).unwrap();
                let d1 = sp.side(true).distance(p, q);
                assert_eq!(d1, sp.side(false).distance(ap, aq));
            }
        }
        for &q in &p2 {
            let p = ag.apply_inv(&mut sp, q).unwrap();
            assert_eq!(ag.apply(&mut sp, p).unwrap(), q);
        }
    }
}
