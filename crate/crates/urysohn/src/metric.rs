//! Finite S-metric spaces, Katětov functions, amalgams and partial isometries.

use crate::distance_set::DistanceSet;
use crate::scalar::{self, Scalar};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("Katětov condition fails: {0}")]
    KatetovViolation(String),
    #[error("factors overlap outside the base: {0}")]
    OverlapError(String),
    #[error("metrics disagree on the base: {0}")]
    MetricMismatchError(String),
    #[error("amalgamation over the empty set needs a bounded distance set")]
    EmptyAmalgamBase,
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("malformed space: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    #[serde(rename = "S")]
    pub set: DistanceSet,
    pub points: Vec<String>,
    #[serde(with = "matrix_serde")]
    pub dist: Vec<Vec<Scalar>>,
}

mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Scalar>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(scalar::fmt).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Scalar>>, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(d)?;
        rows.iter()
            .map(|r| r.iter().map(|x| scalar::parse(x).map_err(serde::de::Error::custom)).collect())
            .collect()
    }
}

impl FiniteMetricSpace {
    pub fn new(set: DistanceSet, points: Vec<String>, dist: Vec<Vec<Scalar>>) -> Self {
        FiniteMetricSpace { set, points, dist }
    }

    /// Every pair of distinct points at distance `value`.
    pub fn uniform(set: DistanceSet, n: usize, value: Scalar) -> Self {
        let points = (0..n).map(|i| format!("p{i}")).collect();
        let dist = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Scalar::zero() } else { value.clone() }).collect())
            .collect();
        FiniteMetricSpace { set, points, dist }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p == label)
    }

    pub fn d(&self, i: usize, j: usize) -> &Scalar {
        &self.dist[i][j]
    }
}

/// Lists every violated axiom; empty means `X` is an S-metric space.
pub fn check_metric(x: &FiniteMetricSpace) -> Vec<String> {
    let n = x.len();
    let mut out = Vec::new();
    if x.dist.len() != n || x.dist.iter().any(|r| r.len() != n) {
        out.push("distance matrix has wrong shape".into());
        return out;
    }
    let name = |i: usize| x.points[i].as_str();
    for i in 0..n {
        if !x.dist[i][i].is_zero() {
            out.push(format!("d({},{}) != 0", name(i), name(i)));
        }
        for j in 0..n {
            let v = &x.dist[i][j];
            if !x.set.contains(v) {
                out.push(format!("d({},{}) = {} not in S", name(i), name(j), scalar::fmt(v)));
            }
            if x.dist[j][i] != *v {
                out.push(format!("asymmetric at ({},{})", name(i), name(j)));
            }
            if i != j && v.is_zero() {
                out.push(format!("d({},{}) = 0 for distinct points", name(i), name(j)));
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                if x.dist[i][j] > &x.dist[i][k] + &x.dist[k][j] {
                    out.push(format!("triangle violation at ({},{},{})", name(i), name(k), name(j)));
                }
            }
        }
    }
    out
}

/// Both Katětov inequalities for a total function on `X`.
pub fn is_katetov(x: &FiniteMetricSpace, f: &[Scalar]) -> bool {
    if f.len() != x.len() || f.iter().any(|v| !x.set.contains(v)) {
        return false;
    }
    katetov_pairs_ok(f.len(), |i| &f[i], |i, j| x.d(i, j).clone())
}

/// Katětov inequalities over an abstract index set.
pub fn katetov_pairs_ok<'a, F, D>(n: usize, f: F, d: D) -> bool
where
    F: Fn(usize) -> &'a Scalar,
    D: Fn(usize, usize) -> Scalar,
{
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = d(i, j);
            if scalar::abs_diff(f(i), f(j)) > dij || dij > f(i) + f(j) {
                return false;
            }
        }
    }
    true
}

/// A finitely supported one-point extension of a finite host, as (index, value) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KatetovFunction {
    #[serde(with = "support_serde")]
    pub support: Vec<(usize, Scalar)>,
}

mod support_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[(usize, Scalar)], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<(usize, String)> = v.iter().map(|(i, x)| (*i, scalar::fmt(x))).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(usize, Scalar)>, D::Error> {
        let rows = Vec::<(usize, String)>::deserialize(d)?;
        rows.into_iter()
            .map(|(i, x)| scalar::parse(&x).map(|v| (i, v)).map_err(serde::de::Error::custom))
            .collect()
    }
}

impl KatetovFunction {
    pub fn new(support: Vec<(usize, Scalar)>) -> Self {
        KatetovFunction { support }
    }

    /// Value of the Katětov extension at host point `y`.
    pub fn eval(&self, x: &FiniteMetricSpace, y: usize) -> Scalar {
        extension_value(&x.set, self.support.iter().map(|(p, v)| (v, x.d(*p, y).clone())))
    }

    pub fn total(&self, x: &FiniteMetricSpace) -> Vec<Scalar> {
        (0..x.len()).map(|y| self.eval(x, y)).collect()
    }

    /// Checks the Katětov condition on the support.
    pub fn check(&self, x: &FiniteMetricSpace) -> Result<(), MetricError> {
        for (p, v) in &self.support {
            if *p >= x.len() {
                return Err(MetricError::UnknownPoint(p.to_string()));
            }
            if !x.set.contains(v) {
                return Err(MetricError::KatetovViolation(format!("value {} not in S", scalar::fmt(v))));
            }
        }
        if !x.set.is_bounded() && self.support.is_empty() {
            return Err(MetricError::KatetovViolation("empty support in an unbounded space".into()));
        }
        let s = &self.support;
        for a in 0..s.len() {
            for b in (a + 1)..s.len() {
                let d = x.d(s[a].0, s[b].0);
                if s[a].0 == s[b].0 && s[a].1 != s[b].1 {
                    return Err(MetricError::KatetovViolation(format!("two values at {}", x.points[s[a].0])));
                }
                if &scalar::abs_diff(&s[a].1, &s[b].1) > d || d > &(&s[a].1 + &s[b].1) {
                    return Err(MetricError::KatetovViolation(format!(
                        "at ({},{})",
                        x.points[s[a].0], x.points[s[b].0]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `min(M, min_i (v_i + d_i))` over (value, distance) pairs; `M` alone for no pairs.
pub fn extension_value<'a, I>(set: &DistanceSet, terms: I) -> Scalar
where
    I: IntoIterator<Item = (&'a Scalar, Scalar)>,
{
    let mut best: Option<Scalar> = None;
    for (v, d) in terms {
        let s = v + d;
        if best.as_ref().map(|b| &s < b).unwrap_or(true) {
            best = Some(s);
        }
    }
    match (best, set.cap()) {
        (Some(b), Some(m)) => scalar::min(b, m.clone()),
        (Some(b), None) => b,
        (None, Some(m)) => m.clone(),
        (None, None) => panic!("empty support in an unbounded distance set"),
    }
}

/// Extends `f` from its support to the whole host.
pub fn katetov_extend(f: &KatetovFunction, x: &FiniteMetricSpace) -> Result<Vec<Scalar>, MetricError> {
    f.check(x)?;
    Ok(f.total(x))
}

/// Deterministic minimal support: essential points first, then greedy removal in host order.
pub fn minimal_support(x: &FiniteMetricSpace, f: &[Scalar]) -> Vec<usize> {
    let n = x.len();
    let all: Vec<usize> = (0..n).collect();
    let values_from = |supp: &[usize], y: usize| -> Scalar {
        if supp.is_empty() && !x.set.is_bounded() {
            return Scalar::from_integer((-1).into());
        }
        extension_value(&x.set, supp.iter().map(|&p| (&f[p], x.d(p, y).clone())))
    };
    let is_support = |supp: &[usize]| (0..n).all(|y| values_from(supp, y) == f[y]);
    let essential: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&p| {
            let others: Vec<usize> = all.iter().copied().filter(|&q| q != p).collect();
            let bound = if others.is_empty() {
                x.set.cap().cloned()
            } else {
                Some(values_from(&others, p))
            };
            match bound {
                Some(b) => f[p] < b,
                None => true,
            }
        })
        .collect();
    let mut current = all;
    for p in 0..n {
        if essential.contains(&p) {
            continue;
        }
        let trial: Vec<usize> = current.iter().copied().filter(|&q| q != p).collect();
        if (trial.is_empty() && !x.set.is_bounded()) || !is_support(&trial) {
            continue;
        }
        current = trial;
    }
    current
}

/// Distance between two extensions of the same host (amalgam metric on `E_S(X)`).
pub fn ext_distance(x: &FiniteMetricSpace, f: &KatetovFunction, g: &KatetovFunction) -> Scalar {
    let mut union: Vec<usize> = f.support.iter().chain(g.support.iter()).map(|(p, _)| *p).collect();
    union.sort_unstable();
    union.dedup();
    if union.iter().all(|&p| f.eval(x, p) == g.eval(x, p)) {
        return Scalar::zero();
    }
    let best = union.iter().map(|&p| f.eval(x, p) + g.eval(x, p)).min();
    match (best, x.set.cap()) {
        (Some(b), Some(m)) => scalar::min(b, m.clone()),
        (Some(b), None) => b,
        (None, Some(m)) => m.clone(),
        (None, None) => unreachable!("unbounded extensions have nonempty supports"),
    }
}

/// Metric amalgam of several spaces sharing exactly the labels in `base`.
pub fn amalgam(spaces: &[FiniteMetricSpace], base: &[String]) -> Result<FiniteMetricSpace, MetricError> {
    let first = spaces.first().ok_or_else(|| MetricError::Malformed("no factors".into()))?;
    let set = first.set.clone();
    if base.is_empty() && !set.is_bounded() && spaces.len() > 1 {
        return Err(MetricError::EmptyAmalgamBase);
    }
    for s in spaces {
        if s.set != set {
            return Err(MetricError::Malformed("factors use different distance sets".into()));
        }
        for b in base {
            if s.index(b).is_none() {
                return Err(MetricError::UnknownPoint(b.clone()));
            }
        }
    }
    for (i, a) in spaces.iter().enumerate() {
        for b in spaces.iter().skip(i + 1) {
            for p in &a.points {
                if b.index(p).is_some() && !base.contains(p) {
                    return Err(MetricError::OverlapError(p.clone()));
                }
            }
        }
    }
    for s in spaces.iter().skip(1) {
        for u in base {
            for v in base {
                let d1 = first.d(first.index(u).unwrap(), first.index(v).unwrap());
                let d2 = s.d(s.index(u).unwrap(), s.index(v).unwrap());
                if d1 != d2 {
                    return Err(MetricError::MetricMismatchError(format!("({u},{v})")));
                }
            }
        }
    }
    // (factor, local index) for each output point; base points are taken from the first factor.
    let mut owner: Vec<(usize, usize)> = Vec::new();
    let mut points = Vec::new();
    for (fi, s) in spaces.iter().enumerate() {
        for (li, p) in s.points.iter().enumerate() {
            if fi > 0 && base.contains(p) {
                continue;
            }
            owner.push((fi, li));
            points.push(p.clone());
        }
    }
    let n = points.len();
    let mut dist = vec![vec![Scalar::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let (fi, li) = owner[i];
            let (fj, lj) = owner[j];
            let (pi, pj) = (&points[i], &points[j]);
            let same = fi == fj || base.contains(pi) || base.contains(pj);
            dist[i][j] = if same {
                let f = if base.contains(pi) { fj } else { fi };
                let s = &spaces[f];
                s.d(s.index(pi).unwrap(), s.index(pj).unwrap()).clone()
            } else {
                let (a, b) = (&spaces[fi], &spaces[fj]);
                let terms = base.iter().map(|u| {
                    let da = a.d(li, a.index(u).unwrap());
                    let db = b.d(b.index(u).unwrap(), lj);
                    da + db
                });
                let best = terms.min();
                match (best, set.cap()) {
                    (Some(v), Some(m)) => scalar::min(v, m.clone()),
                    (Some(v), None) => v,
                    (None, Some(m)) => m.clone(),
                    (None, None) => return Err(MetricError::EmptyAmalgamBase),
                }
            };
        }
    }
    Ok(FiniteMetricSpace { set, points, dist })
}

/// Points of `x` whose distance profile is not induced through `base`.
pub fn unsupported_over(x: &FiniteMetricSpace, base: &[usize]) -> Vec<usize> {
    (0..x.len())
        .filter(|&p| {
            !base.contains(&p)
                && (0..x.len()).any(|y| {
                    let through = extension_value(&x.set, base.iter().map(|&a| (x.d(p, a), x.d(a, y).clone())));
                    through != *x.d(p, y)
                })
        })
        .collect()
}

/// A finite partial map given as index pairs between two finite spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialIsometry {
    pub pairs: Vec<(usize, usize)>,
}

/// True iff the map is injective and preserves all distances.
pub fn check_partial_isometry(src: &FiniteMetricSpace, dst: &FiniteMetricSpace, phi: &PartialIsometry) -> bool {
    let mut seen_src = BTreeMap::new();
    let mut seen_dst = BTreeMap::new();
    for (a, b) in &phi.pairs {
        if *a >= src.len() || *b >= dst.len() {
            return false;
        }
        if seen_src.insert(*a, *b).map(|old| old != *b).unwrap_or(false) {
            return false;
        }
        if seen_dst.insert(*b, *a).map(|old| old != *a).unwrap_or(false) {
            return false;
        }
    }
    phi.pairs.iter().all(|(x, x2)| phi.pairs.iter().all(|(y, y2)| src.d(*x, *y) == dst.d(*x2, *y2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};
    use proptest::prelude::*;

    fn q1() -> DistanceSet {
        DistanceSet::RationalBounded(int(1))
    }

    fn two(d: Scalar) -> FiniteMetricSpace {
        FiniteMetricSpace::new(q1(), vec!["a".into(), "b".into()], vec![vec![int(0), d.clone()], vec![d, int(0)]])
    }

    fn space(labels: &[&str], d: Vec<Vec<Scalar>>) -> FiniteMetricSpace {
        FiniteMetricSpace::new(q1(), labels.iter().map(|s| s.to_string()).collect(), d)
    }

    #[test]
    fn metric_checks() {
        let bad = space(
            &["a", "b", "c"],
            vec![
                vec![int(0), ratio(1, 4), int(1)],
                vec![ratio(1, 4), int(0), ratio(1, 4)],
                vec![int(1), ratio(1, 4), int(0)],
            ],
        );
        assert!(check_metric(&bad).iter().any(|m| m.contains("triangle") && m.contains("(a,b,c)")));
        assert!(check_metric(&FiniteMetricSpace::uniform(q1(), 3, int(1))).is_empty());
        let half = DistanceSet::explicit(vec![int(0), ratio(1, 2), int(1)]);
        let mut x = FiniteMetricSpace::uniform(half, 2, int(1));
        x.dist[0][1] = ratio(1, 3);
        x.dist[1][0] = ratio(1, 3);
        assert!(check_metric(&x).iter().any(|m| m.contains("not in S")));
    }

    #[test]
    fn katetov_predicate() {
        let x = two(ratio(1, 2));
        assert!(is_katetov(&x, &[ratio(1, 2), int(1)]));
        assert!(!is_katetov(&x, &[int(0), int(0)]));
        assert!(is_katetov(&x, &[int(0), ratio(1, 2)]));
    }

    #[test]
    fn extension_examples() {
        let x = two(ratio(1, 2));
        let f = KatetovFunction::new(vec![(0, ratio(1, 4))]);
        assert_eq!(katetov_extend(&f, &x).unwrap(), vec![ratio(1, 4), ratio(3, 4)]);
        let g = KatetovFunction::new(vec![(0, ratio(3, 4))]);
        assert_eq!(katetov_extend(&g, &x).unwrap()[1], int(1));
        let full = KatetovFunction::new(vec![(0, ratio(1, 2)), (1, int(1))]);
        assert_eq!(katetov_extend(&full, &x).unwrap(), vec![ratio(1, 2), int(1)]);
        let bad = KatetovFunction::new(vec![(0, int(0)), (1, int(0))]);
        assert!(matches!(katetov_extend(&bad, &x), Err(MetricError::KatetovViolation(_))));
    }

    #[test]
    fn minimal_support_examples() {
        let x = two(ratio(1, 2));
        assert_eq!(minimal_support(&x, &[ratio(1, 2), int(1)]), vec![0]);
        assert_eq!(minimal_support(&x, &[int(0), ratio(1, 2)]), vec![0]);
        assert_eq!(minimal_support(&x, &[int(1), int(1)]), Vec::<usize>::new());
    }

    #[test]
    fn minimal_support_matches_brute_force_size() {
        // Oracle: smallest subset whose extension reproduces f, by exhaustive search.
        let x = space(
            &["a", "b", "c"],
            vec![
                vec![int(0), ratio(1, 2), ratio(3, 4)],
                vec![ratio(1, 2), int(0), ratio(1, 2)],
                vec![ratio(3, 4), ratio(1, 2), int(0)],
            ],
        );
        let f = vec![ratio(1, 4), ratio(3, 4), int(1)];
        let got = minimal_support(&x, &f);
        let mut best = usize::MAX;
        for mask in 0u32..8 {
            let s: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let ok = (0..3).all(|y| extension_value(&x.set, s.iter().map(|&p| (&f[p], x.d(p, y).clone()))) == f[y]);
            if ok {
                best = best.min(s.len());
            }
        }
        assert_eq!(got, vec![0]);
        assert_eq!(best, 1);
    }

    #[test]
    fn amalgam_examples() {
        let x1 = space(&["a", "x1"], vec![vec![int(0), ratio(1, 4)], vec![ratio(1, 4), int(0)]]);
        let x2 = space(&["a", "x2"], vec![vec![int(0), ratio(1, 2)], vec![ratio(1, 2), int(0)]]);
        let m = amalgam(&[x1.clone(), x2.clone()], &["a".into()]).unwrap();
        let (i, j) = (m.index("x1").unwrap(), m.index("x2").unwrap());
        assert_eq!(m.dist[i][j], ratio(3, 4));
        assert!(check_metric(&m).is_empty());

        let y1 = space(&["u"], vec![vec![int(0)]]);
        let y2 = space(&["v"], vec![vec![int(0)]]);
        let e = amalgam(&[y1.clone(), y2.clone()], &[]).unwrap();
        assert_eq!(e.dist[0][1], int(1));

        assert_eq!(amalgam(&[x1.clone()], &x1.points.clone()).unwrap(), x1);

        let mut y1u = y1.clone();
        y1u.set = DistanceSet::RationalUnbounded;
        let mut y2u = y2.clone();
        y2u.set = DistanceSet::RationalUnbounded;
        assert_eq!(amalgam(&[y1u, y2u], &[]), Err(MetricError::EmptyAmalgamBase));

        let clash = space(&["a", "x1"], vec![vec![int(0), ratio(1, 4)], vec![ratio(1, 4), int(0)]]);
        assert!(matches!(amalgam(&[x1.clone(), clash], &["a".into()]), Err(MetricError::OverlapError(_))));

        let base1 = space(&["a", "b", "p"], vec![
            vec![int(0), ratio(1, 2), int(1)],
            vec![ratio(1, 2), int(0), int(1)],
            vec![int(1), int(1), int(0)],
        ]);
        let base2 = space(&["a", "b", "q"], vec![
            vec![int(0), ratio(1, 4), int(1)],
            vec![ratio(1, 4), int(0), int(1)],
            vec![int(1), int(1), int(0)],
        ]);
        assert!(matches!(
            amalgam(&[base1, base2], &["a".into(), "b".into()]),
            Err(MetricError::MetricMismatchError(_))
        ));
    }

    #[test]
    fn ext_distance_examples() {
        let x = two(ratio(1, 2));
        let f = KatetovFunction::new(vec![(0, ratio(1, 4))]);
        assert_eq!(ext_distance(&x, &f, &f), int(0));
        let hat_b = KatetovFunction::new(vec![(1, int(0))]);
        assert_eq!(ext_distance(&x, &f, &hat_b), f.eval(&x, 1));
        let hat_a = KatetovFunction::new(vec![(0, int(0))]);
        assert_eq!(ext_distance(&x, &hat_a, &hat_b), ratio(1, 2));
        let top = KatetovFunction::new(vec![]);
        assert_eq!(ext_distance(&x, &top, &hat_b), int(1));
    }

    #[test]
    fn partial_isometry_examples() {
        let x = FiniteMetricSpace::uniform(q1(), 3, ratio(1, 2));
        assert!(check_partial_isometry(&x, &x, &PartialIsometry { pairs: vec![(0, 0), (1, 1)] }));
        assert!(check_partial_isometry(&x, &x, &PartialIsometry { pairs: vec![(2, 0)] }));
        let y = space(&["a", "b", "c"], vec![
            vec![int(0), ratio(1, 2), int(1)],
            vec![ratio(1, 2), int(0), ratio(1, 2)],
            vec![int(1), ratio(1, 2), int(0)],
        ]);
        assert!(!check_partial_isometry(&y, &y, &PartialIsometry { pairs: vec![(0, 0), (1, 2)] }));
    }

    fn grid_space() -> impl Strategy<Value = (FiniteMetricSpace, Vec<Vec<(usize, Scalar)>>)> {
        // A random graph metric in {0,1/2,1} (always a metric), with three candidate supports.
        (proptest::collection::vec(any::<bool>(), 10), proptest::collection::vec((0usize..5, 0i64..=2), 1..4), proptest::collection::vec((0usize..5, 0i64..=2), 1..4), proptest::collection::vec((0usize..5, 0i64..=2), 1..4))
            .prop_map(|(edges, s1, s2, s3)| {
                let n = 5;
                let mut d = vec![vec![int(0); n]; n];
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = if edges[k] { ratio(1, 2) } else { int(1) };
                        d[i][j] = v.clone();
                        d[j][i] = v;
                        k += 1;
                    }
                }
                let x = FiniteMetricSpace::new(q1(), (0..n).map(|i| format!("p{i}")).collect(), d);
                let to = |s: Vec<(usize, i64)>| {
                    let mut s: Vec<(usize, Scalar)> = s.into_iter().map(|(p, v)| (p, ratio(v, 2))).collect();
                    s.sort_by_key(|(p, _)| *p);
                    s.dedup_by_key(|(p, _)| *p);
                    s
                };
                (x, vec![to(s1), to(s2), to(s3)])
            })
    }

    proptest! {
        #[test]
        fn support_growth_keeps_extension((x, supps) in grid_space()) {
            let f = KatetovFunction::new(supps[0].clone());
            prop_assume!(f.check(&x).is_ok());
            let total = f.total(&x);
            let bigger: Vec<(usize, Scalar)> = (0..x.len()).map(|i| (i, total[i].clone())).collect();
            prop_assert_eq!(KatetovFunction::new(bigger).total(&x), total.clone());
            let m = minimal_support(&x, &total);
            let reduced = KatetovFunction::new(m.iter().map(|&i| (i, total[i].clone())).collect());
            prop_assert_eq!(reduced.total(&x), total);
        }

        #[test]
        fn ext_distance_triangle((x, supps) in grid_space()) {
            let fs: Vec<KatetovFunction> = supps.into_iter().map(KatetovFunction::new).collect();
            prop_assume!(fs.iter().all(|f| f.check(&x).is_ok()));
            let d = |a: usize, b: usize| ext_distance(&x, &fs[a], &fs[b]);
            for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                prop_assert!(d(a, c) <= d(a, b) + d(b, c));
            }
            let ha = KatetovFunction::new(vec![(0, int(0))]);
            prop_assert_eq!(ext_distance(&x, &fs[0], &ha), fs[0].eval(&x, 0));
        }

        #[test]
        fn far_supports_give_cap(a in 0i64..2, b in 0i64..2) {
            // Supports at pairwise distance M force distance M.
            let x = FiniteMetricSpace::uniform(q1(), 4, int(1));
            let f = KatetovFunction::new(vec![(0, ratio(a, 2)), (1, int(1))]);
            let g = KatetovFunction::new(vec![(2, ratio(b, 2)), (3, int(1))]);
            prop_assume!(f.check(&x).is_ok() && g.check(&x).is_ok());
            prop_assert_eq!(ext_distance(&x, &f, &g), int(1));
        }

        #[test]
        fn amalgam_factors_embed((x, _s) in grid_space(), (y, _t) in grid_space()) {
            let mut y = y;
            y.points = vec!["p0".into(), "q1".into(), "q2".into(), "q3".into(), "q4".into()];
            for j in 0..5 { y.dist[0][j] = x.dist[0][j].clone(); y.dist[j][0] = x.dist[j][0].clone(); }
            prop_assume!(check_metric(&y).is_empty());
            let m = amalgam(&[x.clone(), y.clone()], &["p0".into()]).unwrap();
            prop_assert!(check_metric(&m).is_empty());
            for i in 0..5 { for j in 0..5 {
                let (a, b) = (m.index(&x.points[i]).unwrap(), m.index(&x.points[j]).unwrap());
                prop_assert_eq!(&m.dist[a][b], &x.dist[i][j]);
                let (a, b) = (m.index(&y.points[i]).unwrap(), m.index(&y.points[j]).unwrap());
                prop_assert_eq!(&m.dist[a][b], &y.dist[i][j]);
            }}
        }
    }
}
