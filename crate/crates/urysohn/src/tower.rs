//! Lazy Katětov towers `X_{n+1} = E_S(X_n)`, plain or with group parameters.
//!
//! Points are hash-consed terms. An extension term stores its minimal support,
//! which is unique, so two terms at the same level and with the same parameter
//! are equal as points iff they are equal as terms.

use crate::distance_set::DistanceSet;
use crate::group::{Elem, Group};
use crate::metric::FiniteMetricSpace;
use crate::scalar::{self, Scalar};
use crate::unbounded::{factorial, reparam_level};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

pub type PointId = usize;

/// Bound on BFS word length when the seed metric needs a search.
const LENGTH_BOUND: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    /// A point of a finite seed space.
    Seed(usize),
    /// A group element as a seed point.
    Group(Elem),
    /// A one-point extension; `support` is sorted by id.
    Ext { level: u32, support: Vec<(PointId, Scalar)>, param: Option<Elem> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TowerError {
    #[error("Katětov violation: {0}")]
    KatetovViolation(String),
    #[error("level error: {0}")]
    LevelError(String),
    #[error("unknown point {0}")]
    UnknownPoint(usize),
    #[error("tower has no group action")]
    NotEquivariant,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub enum TowerKind {
    /// `X_{n+1} = E_S(X_n)` over a finite seed.
    Plain(FiniteMetricSpace),
    /// `X_{n+1} = E_S(X_n) ×_{X_n} Γ` over `Γ` with the discrete metric at `M`.
    Equivariant(Group),
    /// `ℚ⁺`-valued variant over `Γ` with its left-invariant metric, reparametrized per level.
    Unbounded(Group),
}

#[derive(Debug, Clone)]
pub struct Tower {
    pub set: DistanceSet,
    pub kind: TowerKind,
    terms: Vec<Term>,
    levels: Vec<u32>,
    index: HashMap<Term, PointId>,
    /// `d_m(p,q)` at the pair's own level `m` (the raw distance for bounded towers).
    own: HashMap<(PointId, PointId), Scalar>,
    limits: HashMap<(PointId, PointId), Scalar>,
    at: HashMap<(PointId, PointId, u32), Scalar>,
    acts: HashMap<(Elem, PointId), PointId>,
    esets: HashMap<(PointId, PointId), BTreeSet<Elem>>,
}

impl Tower {
    fn empty(set: DistanceSet, kind: TowerKind) -> Self {
        Tower {
            set,
            kind,
            terms: Vec::new(),
            levels: Vec::new(),
            index: HashMap::new(),
            own: HashMap::new(),
            limits: HashMap::new(),
            at: HashMap::new(),
            acts: HashMap::new(),
            esets: HashMap::new(),
        }
    }

    pub fn plain(seed: FiniteMetricSpace) -> Self {
        let mut t = Tower::empty(seed.set.clone(), TowerKind::Plain(seed.clone()));
        for i in 0..seed.len() {
            t.intern(Term::Seed(i));
        }
        t
    }

    /// Bounded tower with group parameters; the seed is `Γ` with all distances `M`.
    pub fn equivariant(set: DistanceSet, group: Group) -> Result<Self, TowerError> {
        if !set.is_bounded() {
            return Err(TowerError::Invalid("equivariant towers need a bounded distance set".into()));
        }
        let id = group.identity();
        let mut t = Tower::empty(set, TowerKind::Equivariant(group));
        t.intern(Term::Group(id));
        Ok(t)
    }

    pub fn unbounded(group: Group) -> Self {
        let id = group.identity();
        let mut t = Tower::empty(DistanceSet::RationalUnbounded, TowerKind::Unbounded(group));
        t.intern(Term::Group(id));
        t
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, p: PointId) -> &Term {
        &self.terms[p]
    }

    pub fn level(&self, p: PointId) -> u32 {
        self.levels[p]
    }

    pub fn support(&self, p: PointId) -> &[(PointId, Scalar)] {
        match &self.terms[p] {
            Term::Ext { support, .. } => support,
            _ => &[],
        }
    }

    pub fn param(&self, p: PointId) -> Option<&Elem> {
        match &self.terms[p] {
            Term::Ext { param, .. } => param.as_ref(),
            Term::Group(a) => Some(a),
            Term::Seed(_) => None,
        }
    }

    pub fn group(&self) -> Option<&Group> {
        match &self.kind {
            TowerKind::Plain(_) => None,
            TowerKind::Equivariant(g) | TowerKind::Unbounded(g) => Some(g),
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self.kind, TowerKind::Unbounded(_))
    }

    pub fn cap(&self) -> Option<Scalar> {
        self.set.cap().cloned()
    }

    pub fn lookup(&self, t: &Term) -> Option<PointId> {
        self.index.get(t).copied()
    }

    fn intern(&mut self, t: Term) -> PointId {
        if let Some(&p) = self.index.get(&t) {
            return p;
        }
        let level = match &t {
            Term::Ext { level, .. } => *level,
            _ => 0,
        };
        self.terms.push(t.clone());
        self.levels.push(level);
        self.index.insert(t, self.terms.len() - 1);
        self.terms.len() - 1
    }

    /// The seed point of a group element.
    pub fn group_point(&mut self, a: &Elem) -> PointId {
        self.intern(Term::Group(a.clone()))
    }

    pub fn seed_point(&self, i: usize) -> Option<PointId> {
        self.lookup(&Term::Seed(i))
    }

    pub fn label(&self, p: PointId) -> String {
        match &self.terms[p] {
            Term::Seed(i) => match &self.kind {
                TowerKind::Plain(s) => s.points[*i].clone(),
                _ => format!("s{i}"),
            },
            Term::Group(a) => format!("[{}]", self.group().map(|g| g.format(a)).unwrap_or_default()),
            Term::Ext { .. } => format!("p{p}"),
        }
    }

    // ---- distances ----

    fn seed_distance(&self, p: PointId, q: PointId) -> Scalar {
        match (&self.kind, &self.terms[p], &self.terms[q]) {
            (TowerKind::Plain(s), Term::Seed(i), Term::Seed(j)) => s.d(*i, *j).clone(),
            (TowerKind::Equivariant(_), Term::Group(a), Term::Group(b)) => {
                if a == b {
                    Scalar::zero()
                } else {
                    self.cap().unwrap()
                }
            }
            (TowerKind::Unbounded(g), Term::Group(a), Term::Group(b)) => {
                let d = g.distance(a, b, LENGTH_BOUND).expect("seed distance beyond search bound");
                Scalar::from_integer(d)
            }
            _ => unreachable!("seed pair of the wrong kind"),
        }
    }

    fn clamp(&self, v: Scalar) -> Scalar {
        self.set.clamp(v)
    }

    /// `d_n(p,q)` for `n` at least both levels. Bounded towers ignore `n`.
    pub fn distance_at(&mut self, p: PointId, q: PointId, n: u32) -> Scalar {
        let mut v = self.own_distance(p, q);
        if !self.is_unbounded() {
            return v;
        }
        let m = self.levels[p].max(self.levels[q]);
        assert!(n >= m, "level {n} below the pair's level {m}");
        if n == m || v <= pow2(m + 1) {
            return v;
        }
        let key = (p.min(q), p.max(q), n);
        if let Some(v) = self.at.get(&key) {
            return v.clone();
        }
        for k in (m + 1)..=n {
            if v <= pow2(k) {
                break;
            }
            v = reparam_level(k, &v).expect("tower values lie on the level grid");
        }
        self.at.insert(key, v.clone());
        v
    }

    /// The metric of the tower (the stationary limit for unbounded towers).
    pub fn distance(&mut self, p: PointId, q: PointId) -> Scalar {
        let mut v = self.own_distance(p, q);
        if !self.is_unbounded() {
            return v;
        }
        let mut k = self.levels[p].max(self.levels[q]) + 1;
        if v <= pow2(k) {
            return v;
        }
        let key = (p.min(q), p.max(q));
        if let Some(v) = self.limits.get(&key) {
            return v.clone();
        }
        while v > pow2(k) {
            v = reparam_level(k, &v).expect("tower values lie on the level grid");
            k += 1;
        }
        self.limits.insert(key, v.clone());
        v
    }

    /// `d_m(p,q)` with `m` the larger of the two levels.
    fn own_distance(&mut self, p: PointId, q: PointId) -> Scalar {
        if p == q {
            return Scalar::zero();
        }
        let key = (p.min(q), p.max(q));
        if let Some(v) = self.own.get(&key) {
            return v.clone();
        }
        let (lp, lq) = (self.levels[p], self.levels[q]);
        let raw = if lp == 0 && lq == 0 {
            self.seed_distance(p, q)
        } else if lp != lq {
            let (hi, lo) = if lp > lq { (p, q) } else { (q, p) };
            self.ext_value(hi, lo)
        } else {
            let mut xs: Vec<PointId> = self.support(p).iter().chain(self.support(q)).map(|(x, _)| *x).collect();
            xs.sort_unstable();
            xs.dedup();
            let mut best: Option<Scalar> = None;
            for x in xs {
                let s = self.ext_value(p, x) + self.ext_value(q, x);
                if best.as_ref().map(|b| &s < b).unwrap_or(true) {
                    best = Some(s);
                }
            }
            match best {
                Some(b) => self.clamp(b),
                None => self.cap().expect("empty support in an unbounded tower"),
            }
        };
        let m = lp.max(lq);
        let v = if self.is_unbounded() && m > 0 {
            reparam_level(m, &raw).expect("tower values lie on the level grid")
        } else {
            raw
        };
        self.own.insert(key, v.clone());
        v
    }

    /// `f_p(x)` for `x` strictly below `p`: `min(M, min_y f_p(y) + d_{L-1}(y,x))`.
    fn ext_value(&mut self, p: PointId, x: PointId) -> Scalar {
        let l = self.levels[p];
        debug_assert!(self.levels[x] < l);
        let sup = self.support(p).to_vec();
        let mut best: Option<Scalar> = None;
        for (y, v) in &sup {
            let s = v + self.distance_at(*y, x, l - 1);
            if best.as_ref().map(|b| &s < b).unwrap_or(true) {
                best = Some(s);
            }
        }
        match best {
            Some(b) => self.clamp(b),
            None => self.cap().expect("empty support in an unbounded tower"),
        }
    }

    pub fn canonical_eq(&mut self, p: PointId, q: PointId) -> bool {
        p == q || self.distance(p, q).is_zero()
    }

    /// Distance matrix of the given points as a standalone finite space.
    pub fn snapshot(&mut self, pts: &[PointId]) -> FiniteMetricSpace {
        let dist = pts.iter().map(|&p| pts.iter().map(|&q| self.distance(p, q)).collect()).collect();
        let labels = pts.iter().map(|&p| self.label(p)).collect();
        FiniteMetricSpace::new(self.set.clone(), labels, dist)
    }

    // ---- realization ----

    fn normalize(&self, f: &[(PointId, Scalar)]) -> Result<Vec<(PointId, Scalar)>, TowerError> {
        let mut f = f.to_vec();
        f.sort_by(|a, b| a.0.cmp(&b.0));
        for w in f.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(TowerError::KatetovViolation(format!("point {} listed twice", w[0].0)));
            }
        }
        for (x, v) in &f {
            if *x >= self.len() {
                return Err(TowerError::UnknownPoint(*x));
            }
            if !self.set.contains(v) {
                return Err(TowerError::KatetovViolation(format!("value {} not in {}", scalar::fmt(v), self.set.describe())));
            }
        }
        Ok(f)
    }

    /// Checks both Katětov inequalities on the support against the tower metric.
    pub fn check_katetov(&mut self, f: &[(PointId, Scalar)]) -> Result<(), TowerError> {
        let f = self.normalize(f)?;
        for i in 0..f.len() {
            for j in (i + 1)..f.len() {
                let d = self.distance(f[i].0, f[j].0);
                let (a, b) = (&f[i].1, &f[j].1);
                if scalar::abs_diff(a, b) > d || d > a + b {
                    return Err(TowerError::KatetovViolation(format!(
                        "values {} at {} and {} at {} against distance {}",
                        scalar::fmt(a),
                        self.label(f[i].0),
                        scalar::fmt(b),
                        self.label(f[j].0),
                        scalar::fmt(&d)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Keeps the essential entries: `f(x) < M` and `f(x) < f(y) + d(y,x)` for all other `y`.
    fn essential(&mut self, f: &[(PointId, Scalar)], below: u32) -> Vec<(PointId, Scalar)> {
        let cap = self.cap();
        let mut out = Vec::new();
        for (i, (x, v)) in f.iter().enumerate() {
            if cap.as_ref() == Some(v) {
                continue;
            }
            let redundant = f.iter().enumerate().any(|(j, (y, w))| {
                j != i && {
                    let d = self.distance_at(*y, *x, below);
                    w + d <= *v
                }
            });
            if !redundant {
                out.push((*x, v.clone()));
            }
        }
        out
    }

    /// The level at which an unbounded tower realizes `f`.
    fn unbounded_level(&mut self, f: &[(PointId, Scalar)], floor: u32) -> u32 {
        let mut n = f.iter().map(|(x, _)| self.levels[*x]).max().unwrap_or(0).max(floor);
        let mut top = f.iter().map(|(_, v)| v.clone()).max().unwrap_or_else(Scalar::zero);
        for (x, _) in f {
            for (y, _) in f {
                top = scalar::max(top, self.distance(*x, *y));
            }
        }
        loop {
            let fact = Scalar::from_integer(factorial(n + 1));
            if top <= pow2(n + 1) && f.iter().all(|(_, v)| (v * &fact).is_integer()) {
                return n + 1;
            }
            n += 1;
        }
    }

    /// A point `z` with `d(z,x) = f(x)` for every `x` in the support of `f`.
    pub fn realize(&mut self, f: &[(PointId, Scalar)]) -> Result<PointId, TowerError> {
        self.realize_with(f, None)
    }

    /// As `realize`, with the group parameter of the new point (identity by default).
    pub fn realize_with(&mut self, f: &[(PointId, Scalar)], param: Option<Elem>) -> Result<PointId, TowerError> {
        self.realize_inner(f, param, 0)
    }

    /// As `realize`, but the new point lives strictly above level `floor`.
    /// Its distance to every point of level `≤ floor` is then the Katětov extension of `f`.
    pub fn realize_above(&mut self, f: &[(PointId, Scalar)], floor: u32) -> Result<PointId, TowerError> {
        self.realize_inner(f, None, floor)
    }

    fn realize_inner(&mut self, f: &[(PointId, Scalar)], param: Option<Elem>, floor: u32) -> Result<PointId, TowerError> {
        let f = self.normalize(f)?;
        self.check_katetov(&f)?;
        if let Some((x, _)) = f.iter().find(|(_, v)| v.is_zero()) {
            return Ok(*x);
        }
        let level = if self.is_unbounded() {
            if f.is_empty() {
                return Err(TowerError::KatetovViolation("unbounded extensions need a nonempty support".into()));
            }
            self.unbounded_level(&f, floor)
        } else {
            f.iter().map(|(x, _)| self.levels[*x]).max().unwrap_or(0).max(floor) + 1
        };
        let param = self.resolve_param(param)?;
        let support = self.essential(&f, level - 1);
        Ok(self.intern(Term::Ext { level, support, param }))
    }

    fn resolve_param(&self, param: Option<Elem>) -> Result<Option<Elem>, TowerError> {
        match (self.group(), param) {
            (None, None) => Ok(None),
            (None, Some(_)) => Err(TowerError::NotEquivariant),
            (Some(g), p) => Ok(Some(p.unwrap_or_else(|| g.identity()))),
        }
    }

    /// Builds an extension term at an explicit level from a function on lower points.
    /// Returns `None` unless the function is Katětov for `d_{level-1}` and already minimal.
    pub fn ext_at_level(&mut self, level: u32, f: &[(PointId, Scalar)], param: Option<Elem>) -> Result<Option<PointId>, TowerError> {
        let f = self.normalize(f)?;
        if level == 0 || f.iter().any(|(x, _)| self.levels[*x] >= level) {
            return Err(TowerError::LevelError(format!("support must lie strictly below level {level}")));
        }
        if self.is_unbounded() {
            if f.is_empty() {
                return Err(TowerError::LevelError("unbounded extensions need a nonempty support".into()));
            }
            let fact = Scalar::from_integer(factorial(level));
            if f.iter().any(|(_, v)| !(v * &fact).is_integer()) {
                return Err(TowerError::LevelError(format!("values must be multiples of 1/{level}!")));
            }
        }
        if f.iter().any(|(_, v)| v.is_zero()) {
            return Ok(None);
        }
        for i in 0..f.len() {
            for j in (i + 1)..f.len() {
                let d = self.distance_at(f[i].0, f[j].0, level - 1);
                let (a, b) = (&f[i].1, &f[j].1);
                if scalar::abs_diff(a, b) > d || d > a + b {
                    return Ok(None);
                }
            }
        }
        let ess = self.essential(&f, level - 1);
        if ess.len() != f.len() {
            return Ok(None);
        }
        let param = self.resolve_param(param)?;
        Ok(Some(self.intern(Term::Ext { level, support: ess, param })))
    }

    // ---- group action ----

    /// `γ·p`: seeds by left translation, extensions diagonally on support and parameter.
    pub fn act(&mut self, gamma: &Elem, p: PointId) -> Result<PointId, TowerError> {
        let g = self.group().ok_or(TowerError::NotEquivariant)?.clone();
        if g.is_identity(gamma) {
            return Ok(p);
        }
        Ok(self.act_in(&g, gamma, p))
    }

    fn act_in(&mut self, g: &Group, gamma: &Elem, p: PointId) -> PointId {
        if let Some(&q) = self.acts.get(&(gamma.clone(), p)) {
            return q;
        }
        let q = match self.terms[p].clone() {
            Term::Group(a) => self.intern(Term::Group(g.mul(gamma, &a))),
            Term::Ext { level, support, param } => {
                let mut moved: Vec<(PointId, Scalar)> =
                    support.iter().map(|(x, v)| (self.act_in(g, gamma, *x), v.clone())).collect();
                moved.sort_by(|a, b| a.0.cmp(&b.0));
                let param = param.map(|a| g.mul(gamma, &a));
                self.intern(Term::Ext { level, support: moved, param })
            }
            Term::Seed(_) => unreachable!("plain seeds carry no action"),
        };
        self.acts.insert((gamma.clone(), p), q);
        q
    }

    /// A finite set containing every `γ` with `d(γp, q) < M`.
    pub fn eset(&mut self, p: PointId, q: PointId) -> Result<BTreeSet<Elem>, TowerError> {
        if !matches!(self.kind, TowerKind::Equivariant(_)) {
            return Err(TowerError::NotEquivariant);
        }
        let g = self.group().unwrap().clone();
        Ok(self.eset_in(&g, p, q))
    }

    fn eset_in(&mut self, g: &Group, p: PointId, q: PointId) -> BTreeSet<Elem> {
        if let Some(s) = self.esets.get(&(p, q)) {
            return s.clone();
        }
        let (lp, lq) = (self.levels[p], self.levels[q]);
        let out: BTreeSet<Elem> = if lp > lq {
            let sup = self.support(p).to_vec();
            sup.iter().flat_map(|(y, _)| self.eset_in(g, *y, q)).collect()
        } else if lp < lq {
            self.eset_in(g, q, p).iter().map(|x| g.inv(x)).collect()
        } else {
            let (a, b) = (self.param(p).unwrap().clone(), self.param(q).unwrap().clone());
            let mut s = BTreeSet::from([g.mul(&b, &g.inv(&a))]);
            let (sp, sq) = (self.support(p).to_vec(), self.support(q).to_vec());
            for (y, _) in &sp {
                for (z, _) in &sq {
                    s.extend(self.eset_in(g, *y, *z));
                }
            }
            s
        };
        self.esets.insert((p, q), out.clone());
        out
    }

    // ---- enumeration ----

    /// Value grid used by the window enumeration at a given level.
    fn grid(&self, level: u32) -> Vec<Scalar> {
        match &self.set {
            DistanceSet::ExplicitBounded(v) => v[1..v.len() - 1].to_vec(),
            DistanceSet::RationalBounded(m) => {
                (1..24).map(|k| m * Scalar::new(BigInt::from(k), BigInt::from(24))).collect()
            }
            DistanceSet::GridUnbounded(step) => (1..=4).map(|k| step * Scalar::from_integer(BigInt::from(k))).collect(),
            DistanceSet::RationalUnbounded => (1..=(1i64 << level.min(4))).map(scalar::int).collect(),
        }
    }

    /// The first `n` points: seeds (`group_seeds` ball elements for group towers),
    /// then extensions by level, support size, support in id order, values in grid order.
    pub fn window(&mut self, n: usize, group_seeds: usize) -> Vec<PointId> {
        let mut out: Vec<PointId> = match &self.kind {
            TowerKind::Plain(s) => (0..s.len()).map(|i| self.seed_point(i).unwrap()).collect(),
            TowerKind::Equivariant(g) | TowerKind::Unbounded(g) => {
                let ball = g.ball(8, group_seeds.max(1));
                ball.iter().map(|a| self.intern(Term::Group(a.clone()))).collect()
            }
        };
        out.truncate(n);
        let min_k = if self.is_unbounded() { 1 } else { 0 };
        let mut level = 1;
        while out.len() < n {
            let lower: Vec<PointId> = out.clone();
            let grid = self.grid(level);
            let before = out.len();
            'sizes: for k in min_k..=lower.len() {
                for subset in combinations(lower.len(), k) {
                    let pts: Vec<PointId> = subset.iter().map(|&i| lower[i]).collect();
                    let mut idx = vec![0usize; k];
                    loop {
                        let f: Vec<(PointId, Scalar)> =
                            pts.iter().zip(&idx).map(|(p, &i)| (*p, grid[i].clone())).collect();
                        if let Ok(Some(p)) = self.ext_at_level(level, &f, None) {
                            if !out.contains(&p) {
                                out.push(p);
                                if out.len() >= n {
                                    break 'sizes;
                                }
                            }
                        }
                        if !odometer(&mut idx, grid.len()) {
                            break;
                        }
                    }
                }
            }
            if out.len() == before {
                break;
            }
            level += 1;
        }
        out
    }

    /// A random Katětov function on the given distinct points, values on a coarse grid
    /// where possible and at most `top` in unbounded towers.
    pub fn random_katetov<R: Rng>(&mut self, rng: &mut R, pts: &[PointId], top: &Scalar) -> Vec<(PointId, Scalar)> {
        let mut vals: Vec<Scalar> = Vec::new();
        let cap = self.cap().unwrap_or_else(|| top.clone());
        for (i, &x) in pts.iter().enumerate() {
            let mut lo = Scalar::zero();
            let mut ext: Option<Scalar> = None;
            for (j, &y) in pts[..i].iter().enumerate() {
                let d = self.distance(x, y);
                lo = scalar::max(lo, scalar::abs_diff(&vals[j], &d));
                let v = &vals[j] + &d;
                ext = Some(ext.map_or(v.clone(), |e| scalar::min(e, v)));
            }
            // `top` only caps the choice when it stays admissible.
            let hi = match ext {
                Some(e) if cap < lo => e,
                Some(e) => scalar::min(cap.clone(), e),
                None => cap.clone(),
            };
            // The Katětov extension value `hi` is always admissible.
            let mut cands: Vec<Scalar> = self
                .grid(3)
                .into_iter()
                .chain(self.cap())
                .filter(|v| *v >= lo && *v <= hi && self.set.contains(v))
                .collect();
            cands.push(hi.clone());
            let nonzero: Vec<Scalar> = cands.iter().filter(|v| v.is_positive()).cloned().collect();
            let pick = if nonzero.is_empty() { hi } else { nonzero.choose(rng).unwrap().clone() };
            vals.push(pick);
        }
        pts.iter().copied().zip(vals).collect()
    }

    // ---- serialization ----

    /// Records for the given points and everything their supports reference, in id order.
    pub fn export(&self, pts: &[PointId]) -> Vec<TermRecord> {
        let mut need = BTreeSet::new();
        let mut stack: Vec<PointId> = pts.to_vec();
        while let Some(p) = stack.pop() {
            if need.insert(p) {
                stack.extend(self.support(p).iter().map(|(x, _)| *x));
            }
        }
        let fmt_elem = |a: &Elem| self.group().map(|g| g.format(a)).unwrap_or_default();
        need.into_iter()
            .map(|p| match &self.terms[p] {
                Term::Seed(i) => TermRecord::Seed { id: p, seed: *i },
                Term::Group(a) => TermRecord::Group { id: p, elem: fmt_elem(a) },
                Term::Ext { level, support, param } => TermRecord::Ext {
                    id: p,
                    level: *level,
                    support: support.iter().map(|(x, v)| (*x, scalar::fmt(v))).collect(),
                    param: param.as_ref().map(fmt_elem),
                },
            })
            .collect()
    }

    /// Interns exported records; returns the map from record ids to tower ids.
    pub fn import(&mut self, records: &[TermRecord]) -> Result<HashMap<usize, PointId>, TowerError> {
        let mut map = HashMap::new();
        for r in records {
            let (rid, p) = match r {
                TermRecord::Seed { id, seed } => {
                    let p = self.seed_point(*seed).ok_or(TowerError::UnknownPoint(*seed))?;
                    (*id, p)
                }
                TermRecord::Group { id, elem } => {
                    let g = self.group().ok_or(TowerError::NotEquivariant)?;
                    let a = g.parse(elem).map_err(|e| TowerError::Invalid(e.to_string()))?;
                    (*id, self.group_point(&a))
                }
                TermRecord::Ext { id, level, support, param } => {
                    let mut f = Vec::new();
                    for (x, v) in support {
                        let px = *map.get(x).ok_or(TowerError::UnknownPoint(*x))?;
                        let v = scalar::parse(v).map_err(|e| TowerError::Invalid(e.to_string()))?;
                        f.push((px, v));
                    }
                    let param = match (param, self.group()) {
                        (Some(s), Some(g)) => Some(g.parse(s).map_err(|e| TowerError::Invalid(e.to_string()))?),
                        (Some(_), None) => return Err(TowerError::NotEquivariant),
                        (None, _) => None,
                    };
                    let p = self.ext_at_level(*level, &f, param)?.ok_or_else(|| {
                        TowerError::KatetovViolation(format!("record {id} is not a minimal Katětov function"))
                    })?;
                    (*id, p)
                }
            };
            map.insert(rid, p);
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TermRecord {
    Seed { id: usize, seed: usize },
    Group { id: usize, elem: String },
    Ext {
        id: usize,
        level: u32,
        support: Vec<(usize, String)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        param: Option<String>,
    },
}

pub fn pow2(k: u32) -> Scalar {
    Scalar::from_integer(BigInt::one() << k as usize)
}

/// k-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Advances a base-`b` counter; false on wrap-around.
fn odometer(idx: &mut [usize], b: usize) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < b {
            return true;
        }
        idx[i] = 0;
    }
    false
}
