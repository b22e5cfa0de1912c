//! Metric reparametrization `f_φ`, per-level scales of the unbounded tower,
//! and strong disconnection witnesses.

use crate::action::GroupAction;
use crate::group::{Elem, Group};
use crate::scalar::{self, Scalar};
use crate::tower::{pow2, PointId, Tower};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnboundedError {
    #[error("value {0} is not an integer multiple of the grid step")]
    NonIntegerValues(String),
    #[error("K = {k} is below the threshold N(F) = {n}")]
    BelowThreshold { k: String, n: String },
    #[error("invalid scale function: {0}")]
    InvalidScale(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{0}")]
    Tower(String),
}

/// A non-decreasing `φ: ℕ∖{0} → ℕ∖{0}` and its partial-sum inverse `f_φ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScaleFunction {
    Identity,
    /// `φ(i) = 1` for `i ≤ n` and `φ(i) = 2i` beyond.
    Doubling {
        #[serde(with = "bigint_str")]
        n: BigInt,
    },
    /// Explicit `φ(1), …, φ(k)`, then constant at `φ(k)`.
    Table { phi: Vec<u64> },
}

mod bigint_str {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl ScaleFunction {
    pub fn validate(&self) -> Result<(), UnboundedError> {
        match self {
            ScaleFunction::Table { phi } => {
                if phi.is_empty() || phi.iter().any(|&x| x == 0) || phi.windows(2).any(|w| w[0] > w[1]) {
                    return Err(UnboundedError::InvalidScale("φ must be positive and non-decreasing".into()));
                }
                Ok(())
            }
            ScaleFunction::Doubling { n } if n.is_negative() => {
                Err(UnboundedError::InvalidScale("threshold must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn phi(&self, i: u64) -> BigInt {
        match self {
            ScaleFunction::Identity => BigInt::one(),
            ScaleFunction::Doubling { n } => {
                if BigInt::from(i) <= *n {
                    BigInt::one()
                } else {
                    BigInt::from(2 * i)
                }
            }
            ScaleFunction::Table { phi } => BigInt::from(phi[(i as usize - 1).min(phi.len() - 1)]),
        }
    }

    /// `f_φ(m) = min{k : m ≤ φ(1)+…+φ(k)}`.
    pub fn apply(&self, m: &BigInt) -> BigInt {
        if !m.is_positive() {
            return BigInt::zero();
        }
        match self {
            ScaleFunction::Identity => m.clone(),
            ScaleFunction::Doubling { n } => {
                if m <= n {
                    return m.clone();
                }
                // Partial sums past n are n + k(k+1) − n(n+1).
                let t = m - n + n * (n + 1u32);
                let s = (4u32 * &t + 1u32).sqrt();
                let mut k: BigInt = (s - 1u32) / 2u32;
                while &k * (&k + 1u32) < t {
                    k += 1u32;
                }
                while k > BigInt::zero() && (&k - 1u32) * &k >= t {
                    k -= 1u32;
                }
                k
            }
            ScaleFunction::Table { phi } => {
                let last = BigInt::from(*phi.last().unwrap());
                let mut sum = BigInt::zero();
                for (i, p) in phi.iter().enumerate() {
                    sum += *p;
                    if *m <= sum {
                        return BigInt::from(i + 1);
                    }
                }
                // Constant tail: ceil((m − sum)/last) more steps.
                let rest = m - &sum;
                BigInt::from(phi.len()) + (rest + &last - 1u32) / last
            }
        }
    }

    /// `φ(1)+…+φ(k)`.
    pub fn partial_sum(&self, k: &BigInt) -> BigInt {
        if !k.is_positive() {
            return BigInt::zero();
        }
        match self {
            ScaleFunction::Identity => k.clone(),
            ScaleFunction::Doubling { n } => {
                if k <= n {
                    k.clone()
                } else {
                    n + k * (k + 1u32) - n * (n + 1u32)
                }
            }
            ScaleFunction::Table { phi } => {
                let kk = k.to_usize().unwrap_or(usize::MAX);
                let head: u64 = phi.iter().take(kk).sum();
                if kk <= phi.len() {
                    BigInt::from(head)
                } else {
                    BigInt::from(head) + BigInt::from(*phi.last().unwrap()) * (k - phi.len())
                }
            }
        }
    }
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * i)
}

/// Grid step `1/L!` of level `L`.
pub fn level_step(level: u32) -> Scalar {
    Scalar::new(BigInt::one(), factorial(level))
}

/// The scale function of level `L`: identity up to `2^L` (in units of `1/L!`), doubling beyond.
pub fn level_scale(level: u32) -> ScaleFunction {
    ScaleFunction::Doubling { n: (BigInt::one() << level as usize) * factorial(level) }
}

/// `r_L(v) = α f_φ(v/α)` with `α = 1/L!`.
pub fn reparam_level(level: u32, v: &Scalar) -> Result<Scalar, UnboundedError> {
    if level == 0 {
        return Ok(v.clone());
    }
    let fact = factorial(level);
    // Integer arithmetic throughout: reducing against `L!` keeps gcds small.
    let scaled = v.numer() * &fact;
    if !(&scaled % v.denom()).is_zero() {
        return Err(UnboundedError::NonIntegerValues(crate::scalar::fmt(v)));
    }
    let m = scaled / v.denom();
    if m <= (BigInt::one() << level as usize) * &fact {
        return Ok(v.clone());
    }
    let out = level_scale(level).apply(&m);
    let g = fact.gcd(&(&out % &fact));
    Ok(Scalar::new_raw(out / &g, fact / g))
}

/// Applies `f_φ` to integer-valued metric data given as a matrix.
pub fn reparametrize(d: &[Vec<Scalar>], phi: &ScaleFunction) -> Result<Vec<Vec<Scalar>>, UnboundedError> {
    phi.validate()?;
    d.iter()
        .map(|row| {
            row.iter()
                .map(|v| {
                    if !v.is_integer() || v.is_negative() {
                        return Err(UnboundedError::NonIntegerValues(crate::scalar::fmt(v)));
                    }
                    Ok(Scalar::from_integer(phi.apply(&v.to_integer())))
                })
                .collect()
        })
        .collect()
}

/// `d₁(x,y)=l ⇔ d₂(x,y)=l` for all pairs and all `l ≤ K`.
pub fn coincide_at_scale(d1: &[Vec<Scalar>], d2: &[Vec<Scalar>], k: &Scalar) -> bool {
    d1.iter().zip(d2).all(|(r1, r2)| {
        r1.iter().zip(r2).all(|(a, b)| {
            let small_a = a <= k && a.is_integer();
            let small_b = b <= k && b.is_integer();
            match (small_a, small_b) {
                (false, false) => true,
                _ => a == b,
            }
        })
    })
}

/// Per-level data of the unbounded tower.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDescriptor {
    pub level: u32,
    #[serde(with = "crate::scalar::serde_str")]
    pub step: Scalar,
    pub scale: ScaleFunction,
    /// `d_level` and `d_{level-1}` agree on values up to this bound.
    #[serde(with = "crate::scalar::serde_str")]
    pub scale_guarantee: Scalar,
}

pub fn level_descriptors(levels: u32) -> Vec<LevelDescriptor> {
    (1..=levels)
        .map(|l| LevelDescriptor { level: l, step: level_step(l), scale: level_scale(l), scale_guarantee: pow2(l) })
        .collect()
}

/// `Γ` acting on the ℚ⁺ tower grown over its word metric.
pub fn strongly_disconnecting_action(group: Group) -> Result<GroupAction, UnboundedError> {
    if group.is_finite() {
        return Err(UnboundedError::Unsupported("the group must be infinite".into()));
    }
    Ok(GroupAction::Induced(Tower::unbounded(group)))
}

/// Applies `r_j` for `j = from..=to` while the value exceeds `2^j`.
pub fn level_chain(v: &Scalar, from: u32, to: u32) -> Scalar {
    let mut v = v.clone();
    for j in from..=to {
        if v <= pow2(j) {
            break;
        }
        v = reparam_level(j, &v).expect("values stay on the level grid");
    }
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DisconnectionWitness {
    pub gamma: Elem,
    /// `γ` is the ray element at word distance `ray` from the identity.
    #[serde(with = "bigint_str")]
    pub ray: BigInt,
    /// Level at which `d(x, γy)` is squeezed onto `K`.
    pub level: u32,
    #[serde(with = "bigint_str")]
    pub threshold: BigInt,
    /// `max_{x ∈ F} d_n(x, x₀)`.
    #[serde(with = "crate::scalar::serde_str")]
    pub radius: Scalar,
}

fn base_point(t: &mut Tower) -> Result<PointId, UnboundedError> {
    if !t.is_unbounded() {
        return Err(UnboundedError::Tower("not an unbounded tower".into()));
    }
    let e = t.group().unwrap().identity();
    Ok(t.group_point(&e))
}

/// `(n, ρ)` with `ρ = max_{x∈F} d_n(x, x₀)`, for the level `n` at or above the top level of
/// `F ∪ {x₀}` that makes `N(F)` smallest.
fn level_data(t: &mut Tower, f: &[PointId]) -> Result<(u32, Scalar), UnboundedError> {
    let x0 = base_point(t)?;
    let top = f.iter().map(|&x| t.level(x)).max().unwrap_or(0);
    let mut best: Option<(BigInt, u32, Scalar)> = None;
    let mut n = top;
    loop {
        let floor = (BigInt::one() << (n + 1) as usize) + 1u32;
        if best.as_ref().is_some_and(|b| floor > b.0) {
            break;
        }
        let rho = f.iter().map(|&x| t.distance_at(x, x0, n)).max().unwrap_or_else(Scalar::zero);
        let nf = bound(n, &rho);
        if best.as_ref().map_or(true, |b| nf < b.0) {
            best = Some((nf, n, rho));
        }
        n += 1;
    }
    let (_, n, rho) = best.unwrap();
    Ok((n, rho))
}

fn bound(n: u32, rho: &Scalar) -> BigInt {
    let a = (BigInt::one() << (n + 1) as usize) + 1u32;
    let b = (rho * scalar::int(2) + scalar::ratio(1, 2)).ceil().to_integer();
    a.max(b)
}

/// `N(F) = max(2^{n+1} + 1, ⌈2ρ + 1/2⌉)`.
pub fn threshold(t: &mut Tower, f: &[PointId]) -> Result<BigInt, UnboundedError> {
    let (n, rho) = level_data(t, f)?;
    Ok(bound(n, &rho))
}

/// Smallest `m ≥ 1` with `r_{L-1}(⋯r_1(m)) > lo`, inverting one level at a time.
///
/// The input of `r_j` lies on the grid `1/(j-1)!`, and `r_j(x) ≥ y` iff `x·j! > S_j(y·j! − 1)`.
pub fn least_ray_above(level: u32, lo: &Scalar) -> BigInt {
    let top = level.saturating_sub(1);
    let f = Scalar::from_integer(factorial(top));
    // least grid point of level `top` strictly above `lo`
    let mut y = Scalar::from_integer((lo * &f).floor().to_integer() + 1u32) / f;
    for j in (1..=top).rev() {
        let c = (&y * Scalar::from_integer(factorial(j))).ceil().to_integer();
        let s = level_scale(j).partial_sum(&(c - 1u32));
        y = Scalar::new(s / j + 1u32, factorial(j - 1));
    }
    y.ceil().to_integer().max(BigInt::one())
}

/// `γ` with `d(x, γy) = K` for all `x, y ∈ F`.
pub fn disconnection_witness(t: &mut Tower, f: &[PointId], k: &BigInt) -> Result<DisconnectionWitness, UnboundedError> {
    let x0 = base_point(t)?;
    let (n, rho) = level_data(t, f)?;
    let nf = threshold(t, f)?;
    if *k < nf {
        return Err(UnboundedError::BelowThreshold { k: k.to_string(), n: nf.to_string() });
    }
    // 2^{lk} < K ≤ 2^{lk+1}
    let mut lk = 0u32;
    while (BigInt::one() << (lk + 1) as usize) < *k {
        lk += 1;
    }
    let level = lk.max(n + 1);
    let fact = Scalar::from_integer(factorial(level));
    let np = k * factorial(level);
    let phi = level_scale(level);
    let two_rho = &rho * scalar::int(2);
    let lo = Scalar::from_integer(phi.partial_sum(&(&np - 1u32))) / &fact + &two_rho;
    let hi = Scalar::from_integer(phi.partial_sum(&np)) / &fact - &two_rho;
    let r = |m: &BigInt| level_chain(&Scalar::from_integer(m.clone()), 1, level - 1);
    let top = least_ray_above(level, &lo);
    if r(&top) <= lo || r(&(&top - 1u32)) > lo && top > BigInt::one() {
        return Err(UnboundedError::Tower("ray inversion out of step".into()));
    }
    if r(&top) > hi {
        return Err(UnboundedError::Tower("ray skipped the admissible window".into()));
    }
    let g = t.group().unwrap().clone();
    let gamma = g.ray(&top).ok_or_else(|| UnboundedError::Unsupported("no geodesic ray of that length".into()))?;
    let target = Scalar::from_integer(k.clone());
    for &x in f.iter().chain([&x0]) {
        for &y in f.iter().chain([&x0]) {
            let gy = t.act(&gamma, y).map_err(|e| UnboundedError::Tower(e.to_string()))?;
            let d = t.distance(x, gy);
            if d != target {
                return Err(UnboundedError::Tower(format!("d({x}, γ{y}) = {} instead of {k}", scalar::fmt(&d))));
            }
        }
    }
    Ok(DisconnectionWitness { gamma, ray: top, level, threshold: nf, radius: rho })
}

#[cfg(test)]
mod scale_tests {
    use super::*;
    use crate::scalar::int;
    use proptest::prelude::*;

    fn b(n: i64) -> BigInt {
        BigInt::from(n)
    }

    /// Oracle: walk partial sums one step at a time.
    fn f_oracle(phi: &ScaleFunction, m: i64) -> i64 {
        if m <= 0 {
            return 0;
        }
        let mut sum = b(0);
        let mut k = 0u64;
        while sum < b(m) {
            k += 1;
            sum += phi.phi(k);
        }
        k as i64
    }

    #[test]
    fn doubling_example() {
        let phi = ScaleFunction::Doubling { n: b(2) };
        let got: Vec<i64> = (0..=9).map(|m| phi.apply(&b(m)).to_i64().unwrap()).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 3, 3, 3, 3, 3, 4]);
        assert_eq!(ScaleFunction::Identity.apply(&b(17)), b(17));
        assert_eq!(phi.apply(&b(0)), b(0));
    }

    #[test]
    fn least_ray_matches_scan() {
        for level in 1..=6u32 {
            let chain = |m: &BigInt| level_chain(&Scalar::from_integer(m.clone()), 1, level - 1);
            let mut lo = scalar::ratio(1, 3);
            while lo < int(60) {
                // doubling then bisection on the monotone chain
                let mut hi = b(1);
                while chain(&hi) <= lo {
                    hi *= 2;
                }
                let mut bot = b(0);
                while &hi - &bot > b(1) {
                    let mid: BigInt = (&hi + &bot) / 2;
                    if chain(&mid) > lo {
                        hi = mid;
                    } else {
                        bot = mid;
                    }
                }
                assert_eq!(least_ray_above(level, &lo), hi, "level {level} lo {lo}");
                lo += scalar::ratio(7, 5);
            }
        }
    }

    #[test]
    fn closed_form_matches_oracle() {
        for n in [0i64, 1, 2, 5, 13] {
            let phi = ScaleFunction::Doubling { n: b(n) };
            for m in 0..400 {
                assert_eq!(phi.apply(&b(m)).to_i64().unwrap(), f_oracle(&phi, m), "n={n} m={m}");
            }
        }
        let t = ScaleFunction::Table { phi: vec![1, 1, 3, 4] };
        for m in 0..200 {
            assert_eq!(t.apply(&b(m)).to_i64().unwrap(), f_oracle(&t, m));
        }
    }

    #[test]
    fn fibres_have_size_phi() {
        for phi in [ScaleFunction::Doubling { n: b(3) }, ScaleFunction::Table { phi: vec![1, 2, 2, 5] }] {
            let vals: Vec<i64> = (0..2000).map(|m| phi.apply(&b(m)).to_i64().unwrap()).collect();
            for n in 1..=30u64 {
                let count = vals.iter().filter(|&&v| v == n as i64).count();
                assert_eq!(BigInt::from(count), phi.phi(n), "n={n}");
            }
        }
    }

    #[test]
    fn level_reparam_is_identity_below_scale() {
        for l in 1..6u32 {
            let top = Scalar::from_integer(BigInt::one() << l as usize);
            assert_eq!(reparam_level(l, &top).unwrap(), top);
            let above = &top + level_step(l);
            assert!(reparam_level(l, &above).unwrap() > top);
            assert!(reparam_level(l, &above).unwrap() <= above);
        }
        assert!(matches!(
            reparam_level(2, &crate::scalar::ratio(1, 3)),
            Err(UnboundedError::NonIntegerValues(_))
        ));
    }

    #[test]
    fn scale_coincidence() {
        let d: Vec<Vec<Scalar>> = vec![vec![int(0), int(2), int(5)], vec![int(2), int(0), int(3)], vec![int(5), int(3), int(0)]];
        assert!(coincide_at_scale(&d, &d, &int(100)));
        let phi = ScaleFunction::Doubling { n: b(2) };
        let r = reparametrize(&d, &phi).unwrap();
        assert!(coincide_at_scale(&d, &r, &int(2)));
        assert!(!coincide_at_scale(&d, &r, &int(3)));
        assert!(matches!(
            reparametrize(&[vec![crate::scalar::ratio(1, 2)]], &phi),
            Err(UnboundedError::NonIntegerValues(_))
        ));
    }

    proptest! {
        #[test]
        fn subadditive(a in 0i64..400, c in 0i64..400, n in 0i64..20) {
            let phi = ScaleFunction::Doubling { n: b(n) };
            prop_assert!(phi.apply(&b(a + c)) <= phi.apply(&b(a)) + phi.apply(&b(c)));
            prop_assert!(phi.apply(&b(a)) <= phi.apply(&b(a + 1)));
        }
    }
}

#[cfg(test)]
mod witness_tests {
    use super::*;
    use crate::action::strong_freeness_check;
    use crate::group::GroupSpec;
    use crate::scalar::{int, ratio};
    use crate::tower::Term;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z_tower() -> Tower {
        Tower::unbounded(Group::new(GroupSpec::integers("a")).unwrap())
    }

    fn b(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn seeds_carry_word_metric() {
        let g = Group::new(GroupSpec::integers("a")).unwrap();
        let mut a = strongly_disconnecting_action(g.clone()).unwrap();
        let t = a.tower().unwrap();
        let x0 = t.group_point(&g.identity());
        for k in 1..=6 {
            let y = t.group_point(&g.ray(&b(k)).unwrap());
            assert_eq!(t.distance_at(x0, y, 0), int(k));
            // Level 1 squeezes with φ = Doubling{2}; nothing larger than 2^2 survives it.
            assert_eq!(t.distance(x0, y), int([1, 2, 3, 3, 3, 3][k as usize - 1]));
        }
        let z = t.realize(&[(x0, ratio(3, 2))]).unwrap();
        let sample: Vec<_> = (1..=20).map(|k| (g.ray(&b(k)).unwrap(), if k % 2 == 0 { x0 } else { z })).collect();
        assert!(strong_freeness_check(&mut a, &sample).unwrap().ok);
        assert!(strongly_disconnecting_action(Group::new(GroupSpec::cyclic("s", 3)).unwrap()).is_err());
    }

    #[test]
    fn rational_extension_realized() {
        let mut t = z_tower();
        let g = t.group().unwrap().clone();
        let pts: Vec<_> = (0..3).map(|k| t.group_point(&g.ray(&b(k)).unwrap())).collect();
        let f = vec![(pts[0], ratio(7, 3)), (pts[1], ratio(4, 3)), (pts[2], ratio(5, 3))];
        let z = t.realize(&f).unwrap();
        // 2^n must cover the diameter and the values; 1/n! must divide them.
        assert_eq!(t.level(z), 3);
        for (x, v) in &f {
            assert_eq!(t.distance(z, *x), *v);
        }
    }

    #[test]
    fn limit_is_stationary() {
        let mut t = z_tower();
        let g = t.group().unwrap().clone();
        let x0 = t.group_point(&g.identity());
        let far = t.group_point(&g.ray(&b(40)).unwrap());
        let vals: Vec<Scalar> = (0..8).map(|n| t.distance_at(x0, far, n)).collect();
        let lim = t.distance(x0, far);
        // Once the value drops under 2^{n+1} it never moves again.
        let settle = (0..8).find(|&n| vals[n as usize] <= pow2(n + 1)).unwrap();
        for n in settle..8 {
            assert_eq!(vals[n as usize], lim);
        }
        assert!(lim < int(40));
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn singleton_witness() {
        let mut t = z_tower();
        let x0 = base_point(&mut t).unwrap();
        let n = threshold(&mut t, &[x0]).unwrap();
        assert_eq!(n, b(3));
        for k in [3i64, 4, 5, 9, 17, 40] {
            let w = disconnection_witness(&mut t, &[x0], &b(k)).unwrap();
            let gx = t.act(&w.gamma, x0).unwrap();
            assert_eq!(t.distance(x0, gx), int(k));
        }
        assert!(matches!(
            disconnection_witness(&mut t, &[x0], &b(2)),
            Err(UnboundedError::BelowThreshold { .. })
        ));
    }

    #[test]
    fn two_point_witness() {
        let mut t = z_tower();
        let x0 = base_point(&mut t).unwrap();
        let g = t.group().unwrap().clone();
        let y = t.group_point(&g.ray(&b(2)).unwrap());
        let z = t.realize(&[(x0, ratio(3, 2)), (y, ratio(1, 2))]).unwrap();
        let f = [z, y];
        let nf = threshold(&mut t, &f).unwrap();
        assert!(matches!(
            disconnection_witness(&mut t, &f, &(&nf - 1u32)),
            Err(UnboundedError::BelowThreshold { .. })
        ));
        for k in [nf.clone(), b(30), b(64)] {
            let w = disconnection_witness(&mut t, &f, &k).unwrap();
            let target = Scalar::from_integer(k.clone());
            let pre = level_chain(&Scalar::from_integer(w.ray.clone()), 1, w.level - 1);
            for &p in &f {
                for &q in &f {
                    let gq = t.act(&w.gamma, q).unwrap();
                    assert_eq!(t.distance(p, gq), target);
                    // Before squeezing, every pair sits within 2ρ of the base pair.
                    let dl = t.distance_at(p, gq, w.level - 1);
                    assert!(scalar::abs_diff(&dl, &pre) <= &w.radius * int(2));
                }
            }
        }
    }

    #[test]
    fn direct_sum_witness() {
        let g = Group::new(GroupSpec::DirectSumZ2).unwrap();
        let mut t = Tower::unbounded(g);
        let x0 = base_point(&mut t).unwrap();
        for k in [3i64, 4, 6, 12] {
            let w = disconnection_witness(&mut t, &[x0], &b(k)).unwrap();
            let gx = t.act(&w.gamma, x0).unwrap();
            assert_eq!(t.distance(x0, gx), int(k));
        }
    }

    #[test]
    fn parameters_only_dilate() {
        let mut t = z_tower();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = t.group().unwrap().clone();
        let mut pts: Vec<_> = (0..4).map(|k| t.group_point(&g.ray(&b(k)).unwrap())).collect();
        for _ in 0..12 {
            let i = rng.gen_range(0..pts.len());
            let j = rng.gen_range(0..pts.len());
            let mut base = vec![pts[i], pts[j]];
            base.dedup();
            let f = t.random_katetov(&mut rng, &base, &int(4));
            let z = t.realize(&f).unwrap();
            let s = g.ray(&b(rng.gen_range(1..4))).unwrap();
            pts.push(z);
            pts.push(t.act(&s, z).unwrap());
        }
        let mut checked = 0;
        for &p in &pts {
            for &q in &pts {
                let (Term::Ext { level: lp, param: Some(a), .. }, Term::Ext { level: lq, support, .. }) =
                    (t.term(p).clone(), t.term(q).clone())
                else {
                    continue;
                };
                if lp != lq || p == q {
                    continue;
                }
                if let Some(q2) = t.ext_at_level(lq, &support, Some(a)).unwrap() {
                    if q2 != p {
                        assert!(t.distance(p, q) >= t.distance(p, q2));
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 10);
    }
}
