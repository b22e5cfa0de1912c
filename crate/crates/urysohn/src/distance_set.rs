//! Distance sets `S` and their truncated addition.

use crate::scalar::{self, Scalar};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DistanceSet {
    /// Finite sorted set whose maximum is the cap.
    ExplicitBounded(Vec<Scalar>),
    /// All rationals in `[0, cap]`.
    RationalBounded(Scalar),
    /// The multiples of `step`.
    GridUnbounded(Scalar),
    /// All nonnegative rationals.
    RationalUnbounded,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DistanceSetError {
    #[error("{0} is not in the distance set")]
    Membership(String),
    #[error("invalid distance set: {0}")]
    Invalid(String),
}

impl DistanceSet {
    pub fn explicit(mut values: Vec<Scalar>) -> Self {
        values.sort();
        values.dedup();
        DistanceSet::ExplicitBounded(values)
    }

    /// Parses a comma separated list such as `"0,1/2,1"`.
    pub fn parse_explicit(text: &str) -> Result<Self, DistanceSetError> {
        let mut vals = Vec::new();
        for part in text.split(',') {
            vals.push(scalar::parse(part).map_err(|e| DistanceSetError::Invalid(e.to_string()))?);
        }
        let s = DistanceSet::explicit(vals);
        let report = s.validate();
        if report.is_empty() {
            Ok(s)
        } else {
            Err(DistanceSetError::Invalid(report.join("; ")))
        }
    }

    pub fn cap(&self) -> Option<&Scalar> {
        match self {
            DistanceSet::ExplicitBounded(v) => v.last(),
            DistanceSet::RationalBounded(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.cap().is_some()
    }

    pub fn contains(&self, s: &Scalar) -> bool {
        if s.is_negative() {
            return false;
        }
        match self {
            DistanceSet::ExplicitBounded(v) => v.binary_search(s).is_ok(),
            DistanceSet::RationalBounded(m) => s <= m,
            DistanceSet::GridUnbounded(step) => (s / step).is_integer(),
            DistanceSet::RationalUnbounded => true,
        }
    }

    /// `min(s+t, M)` for bounded sets, `s+t` otherwise.
    pub fn add_truncated(&self, s: &Scalar, t: &Scalar) -> Result<Scalar, DistanceSetError> {
        for v in [s, t] {
            if !self.contains(v) {
                return Err(DistanceSetError::Membership(scalar::fmt(v)));
            }
        }
        Ok(self.add_unchecked(s, t))
    }

    pub fn add_unchecked(&self, s: &Scalar, t: &Scalar) -> Scalar {
        let sum = s + t;
        match self.cap() {
            Some(m) if &sum > m => m.clone(),
            _ => sum,
        }
    }

    /// Truncates a value at the cap if there is one.
    pub fn clamp(&self, s: Scalar) -> Scalar {
        match self.cap() {
            Some(m) if &s > m => m.clone(),
            _ => s,
        }
    }

    /// Lists axiom violations; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            DistanceSet::ExplicitBounded(v) => {
                if v.len() < 2 {
                    out.push("needs at least two values".into());
                }
                if v.first().map(|x| !x.is_zero()).unwrap_or(true) {
                    out.push("0 must belong to S".into());
                }
                if v.iter().any(|x| x.is_negative()) {
                    out.push("negative value".into());
                }
                if let Some(m) = v.last() {
                    for a in v {
                        for b in v {
                            let s = scalar::min(a + b, m.clone());
                            if v.binary_search(&s).is_err() {
                                out.push(format!(
                                    "min({}+{},{}) = {} not in S",
                                    scalar::fmt(a),
                                    scalar::fmt(b),
                                    scalar::fmt(m),
                                    scalar::fmt(&s)
                                ));
                            }
                        }
                    }
                }
            }
            DistanceSet::RationalBounded(m) | DistanceSet::GridUnbounded(m) => {
                if !m.is_positive() {
                    out.push("parameter must be positive".into());
                }
            }
            DistanceSet::RationalUnbounded => {}
        }
        out
    }

    pub fn describe(&self) -> String {
        match self {
            DistanceSet::ExplicitBounded(v) => {
                format!("{{{}}}", v.iter().map(scalar::fmt).collect::<Vec<_>>().join(","))
            }
            DistanceSet::RationalBounded(m) => format!("Q∩[0,{}]", scalar::fmt(m)),
            DistanceSet::GridUnbounded(a) => format!("{}N", scalar::fmt(a)),
            DistanceSet::RationalUnbounded => "Q+".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct DistanceSetJson {
    pub kind: String,
    #[serde(default, with = "scalar::serde_vec")]
    pub values: Vec<Scalar>,
    #[serde(default, with = "scalar::serde_opt")]
    pub cap: Option<Scalar>,
    #[serde(default, with = "scalar::serde_opt")]
    pub step: Option<Scalar>,
}

impl From<&DistanceSet> for DistanceSetJson {
    fn from(s: &DistanceSet) -> Self {
        match s {
            DistanceSet::ExplicitBounded(v) => DistanceSetJson {
                kind: "explicit".into(),
                values: v.clone(),
                cap: v.last().cloned(),
                step: None,
            },
            DistanceSet::RationalBounded(m) => DistanceSetJson {
                kind: "rational-bounded".into(),
                values: vec![],
                cap: Some(m.clone()),
                step: None,
            },
            DistanceSet::GridUnbounded(a) => DistanceSetJson {
                kind: "grid-unbounded".into(),
                values: vec![],
                cap: None,
                step: Some(a.clone()),
            },
            DistanceSet::RationalUnbounded => DistanceSetJson {
                kind: "rational-unbounded".into(),
                values: vec![],
                cap: None,
                step: None,
            },
        }
    }
}

impl TryFrom<DistanceSetJson> for DistanceSet {
    type Error = DistanceSetError;
    fn try_from(j: DistanceSetJson) -> Result<Self, Self::Error> {
        let missing = |f: &str| DistanceSetError::Invalid(format!("missing field {f}"));
        let s = match j.kind.as_str() {
            "explicit" => DistanceSet::explicit(j.values),
            "rational-bounded" => DistanceSet::RationalBounded(j.cap.ok_or_else(|| missing("cap"))?),
            "grid-unbounded" => DistanceSet::GridUnbounded(j.step.ok_or_else(|| missing("step"))?),
            "rational-unbounded" => DistanceSet::RationalUnbounded,
            other => return Err(DistanceSetError::Invalid(format!("unknown kind {other}"))),
        };
        let report = s.validate();
        if report.is_empty() {
            Ok(s)
        } else {
            Err(DistanceSetError::Invalid(report.join("; ")))
        }
    }
}

impl Serialize for DistanceSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DistanceSetJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DistanceSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = DistanceSetJson::deserialize(d)?;
        DistanceSet::try_from(j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};
    use proptest::prelude::*;

    fn half() -> DistanceSet {
        DistanceSet::explicit(vec![int(0), ratio(1, 2), int(1)])
    }

    #[test]
    fn membership() {
        assert!(half().contains(&ratio(1, 2)));
        assert!(half().contains(&int(0)));
        assert!(!half().contains(&ratio(1, 3)));
        assert!(DistanceSet::RationalUnbounded.contains(&int(0)));
        assert!(DistanceSet::GridUnbounded(ratio(1, 2)).contains(&ratio(3, 2)));
        assert!(!DistanceSet::GridUnbounded(ratio(1, 2)).contains(&ratio(1, 3)));
    }

    #[test]
    fn truncated_sums() {
        let q = DistanceSet::RationalBounded(int(1));
        assert_eq!(q.add_truncated(&ratio(1, 2), &ratio(3, 4)).unwrap(), int(1));
        assert_eq!(q.add_truncated(&ratio(1, 3), &int(0)).unwrap(), ratio(1, 3));
        let u = DistanceSet::RationalUnbounded;
        assert_eq!(u.add_truncated(&ratio(3, 2), &ratio(2, 3)).unwrap(), ratio(13, 6));
        assert!(half().add_truncated(&ratio(1, 3), &int(0)).is_err());
    }

    #[test]
    fn validation() {
        assert!(half().validate().is_empty());
        assert!(DistanceSet::explicit(vec![int(0), int(1)]).validate().is_empty());
        let bad = DistanceSet::explicit(vec![int(0), ratio(1, 4), int(1)]);
        let r = bad.validate();
        assert!(r.iter().any(|m| m.contains("1/2")), "{r:?}");
    }

    #[test]
    fn json_round_trip() {
        for s in [half(), DistanceSet::RationalBounded(int(1)), DistanceSet::GridUnbounded(ratio(1, 6)), DistanceSet::RationalUnbounded] {
            let j = serde_json::to_string(&s).unwrap();
            let back: DistanceSet = serde_json::from_str(&j).unwrap();
            assert_eq!(back, s);
        }
    }

    fn grid24() -> DistanceSet {
        DistanceSet::RationalBounded(int(1))
    }

    proptest! {
        #[test]
        fn truncated_addition_laws(a in 0i64..=24, b in 0i64..=24, c in 0i64..=24) {
            let s = grid24();
            let (a, b, c) = (ratio(a, 24), ratio(b, 24), ratio(c, 24));
            let ab = s.add_truncated(&a, &b).unwrap();
            prop_assert!(s.contains(&ab));
            prop_assert_eq!(ab.clone(), s.add_truncated(&b, &a).unwrap());
            if b <= c {
                prop_assert!(ab <= s.add_truncated(&a, &c).unwrap());
            }
            prop_assert_eq!(s.add_truncated(&a, &int(1)).unwrap(), int(1));
        }

        #[test]
        fn explicit_closure(i in 0usize..3, j in 0usize..3) {
            let s = DistanceSet::explicit(vec![int(0), int(1), int(2)]);
            let vals = [int(0), int(1), int(2)];
            let r = s.add_truncated(&vals[i], &vals[j]).unwrap();
            prop_assert!(s.contains(&r));
        }
    }
}
