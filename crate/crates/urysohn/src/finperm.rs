//! Permutations of ℕ that are finitary or eventually piecewise translations, blocks and
//! primitivity of finite actions, biindex, the transfer character, and windows of the
//! canonical actions of Schlichting completions of 𝔖_(∞).
//!
//! Infinite objects are kept in a normal form "finite head + periodic tail", so every
//! answer below is computed on a region past which nothing can change.

use num_integer::Integer;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FinpermError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("not a bijection of ℕ: {0}")]
    NotBijective(String),
    #[error("the action is not transitive")]
    NotTransitive,
    #[error("X must be a nonempty proper subset of the window")]
    TrivialX,
    #[error("σ does not commensurate X")]
    NotCommensurating,
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("generator {0} does not preserve the finite set")]
    LeavesDomain(usize),
    #[error("σ must have finite support")]
    NotFinitary,
    #[error("unknown stabilizer type {0}")]
    UnknownStabilizerType(String),
}

pub type Result<T> = std::result::Result<T, FinpermError>;

fn parse_err<T>(m: impl Into<String>) -> Result<T> {
    Err(FinpermError::Parse(m.into()))
}

fn num(s: &str) -> Result<u64> {
    s.trim().parse().map_err(|_| FinpermError::Parse(format!("bad number {s:?}")))
}

/// One arithmetic-progression piece `n ↦ n + shift` for `n ≡ residue (mod modulus)`, `n ≥ start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub residue: u64,
    pub modulus: u64,
    pub start: u64,
    pub shift: i64,
}

/// Splits `"[r mod m, n>=a: +c]"` bodies; the `: c` part is optional.
fn parse_piece(body: &str) -> Result<(u64, u64, u64, Option<i64>)> {
    let (cond, shift) = match body.split_once(':') {
        Some((c, s)) => {
            let s = s.trim().trim_start_matches('+');
            (c, Some(s.parse::<i64>().map_err(|_| FinpermError::Parse(format!("bad shift {s:?}")))?))
        }
        None => (body, None),
    };
    let mut parts = cond.split(',');
    let rm = parts.next().ok_or_else(|| FinpermError::Parse("empty piece".into()))?;
    let (r, m) = rm.split_once("mod").ok_or_else(|| FinpermError::Parse(format!("expected `r mod m` in {rm:?}")))?;
    let (r, m) = (num(r)?, num(m)?);
    if m == 0 || r >= m {
        return parse_err(format!("residue {r} mod {m}"));
    }
    let start = match parts.next() {
        Some(p) => {
            let p = p.trim();
            let a = p.strip_prefix("n>=").ok_or_else(|| FinpermError::Parse(format!("expected `n>=a`, got {p:?}")))?;
            num(a)?
        }
        None => 0,
    };
    if parts.next().is_some() {
        return parse_err("too many conditions in a piece");
    }
    Ok((r, m, start, shift))
}

/// Top-level items of the text syntax: `(cycle)`, `[piece]`, or a bare token.
fn items(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let first = rest.chars().next().unwrap();
        if first.is_whitespace() || first == ',' {
            rest = &rest[first.len_utf8()..];
            continue;
        }
        let close = match first {
            '(' => Some(')'),
            '[' => Some(']'),
            _ => None,
        };
        let end = match close {
            Some(c) => rest.find(c).ok_or_else(|| FinpermError::Parse(format!("unclosed {first}")))? + 1,
            None => rest.find(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == '[').unwrap_or(rest.len()),
        };
        out.push(rest[..end].to_string());
        rest = &rest[end..];
    }
    Ok(out)
}

fn lcm_all(it: impl Iterator<Item = u64>) -> u64 {
    it.fold(1, |a, b| a.lcm(&b))
}

fn minimal_period<T: PartialEq>(v: &[T]) -> usize {
    let l = v.len();
    (1..=l).find(|d| l % d == 0 && (0..l).all(|i| v[i] == v[i % d])).unwrap_or(l)
}

/// A bijection of ℕ: an explicit table below `from`, and `n ↦ n + shifts[n mod L]` from `from` on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FinPermutation {
    table: BTreeMap<u64, u64>,
    from: u64,
    shifts: Vec<i64>,
}

impl Default for FinPermutation {
    fn default() -> Self {
        Self::identity()
    }
}

impl FinPermutation {
    pub fn identity() -> Self {
        FinPermutation { table: BTreeMap::new(), from: 0, shifts: vec![0] }
    }

    /// The finitary permutation moving exactly the listed points.
    pub fn from_map(pairs: &[(u64, u64)]) -> Result<Self> {
        let mut table = BTreeMap::new();
        for &(a, b) in pairs {
            if table.insert(a, b).is_some_and(|old| old != b) {
                return Err(FinpermError::NotBijective(format!("{a} has two images")));
            }
        }
        table.retain(|a, b| a != b);
        let from = table.keys().next_back().map_or(0, |k| k + 1);
        Self::build(table, from, vec![0])
    }

    /// Disjoint cycles.
    pub fn from_cycles(cycles: &[Vec<u64>]) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut pairs = Vec::new();
        for c in cycles {
            for (i, &a) in c.iter().enumerate() {
                if !seen.insert(a) {
                    return parse_err(format!("{a} occurs in two cycles"));
                }
                pairs.push((a, c[(i + 1) % c.len()]));
            }
        }
        Self::from_map(&pairs)
    }

    pub fn transposition(a: u64, b: u64) -> Self {
        Self::from_cycles(&[vec![a, b]]).expect("a transposition is a bijection")
    }

    /// Table entries plus arithmetic-progression pieces with disjoint residue classes.
    pub fn from_pieces(pairs: &[(u64, u64)], pieces: &[Piece]) -> Result<Self> {
        let l = lcm_all(pieces.iter().map(|p| p.modulus));
        let from = pieces.iter().map(|p| p.start).chain(pairs.iter().map(|p| p.0 + 1)).max().unwrap_or(0);
        let mut shifts = vec![0i64; l as usize];
        let mut owner: Vec<Option<usize>> = vec![None; l as usize];
        for (i, p) in pieces.iter().enumerate() {
            if p.modulus == 0 || p.residue >= p.modulus {
                return parse_err(format!("residue {} mod {}", p.residue, p.modulus));
            }
            for r in (p.residue..l).step_by(p.modulus as usize) {
                if owner[r as usize].replace(i).is_some() {
                    return parse_err(format!("pieces overlap on residue {r} mod {l}"));
                }
                shifts[r as usize] = p.shift;
            }
        }
        let mut table: BTreeMap<u64, u64> = BTreeMap::new();
        for &(a, b) in pairs {
            if table.insert(a, b).is_some_and(|old| old != b) {
                return Err(FinpermError::NotBijective(format!("{a} has two images")));
            }
        }
        for n in 0..from {
            if table.contains_key(&n) {
                continue;
            }
            if let Some(p) = pieces.iter().find(|p| n >= p.start && n % p.modulus == p.residue) {
                let v = n as i64 + p.shift;
                if v < 0 {
                    return Err(FinpermError::NotBijective(format!("{n} is sent below 0")));
                }
                table.insert(n, v as u64);
            }
        }
        table.retain(|a, b| a != b);
        Self::build(table, from, shifts)
    }

    fn build(table: BTreeMap<u64, u64>, from: u64, shifts: Vec<i64>) -> Result<Self> {
        let p = FinPermutation { table, from, shifts };
        p.validate()?;
        Ok(p.canonical())
    }

    fn period(&self) -> u64 {
        self.shifts.len() as u64
    }

    fn max_shift(&self) -> u64 {
        self.shifts.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    fn tail(&self, n: u64) -> i64 {
        n as i64 + self.shifts[(n % self.period()) as usize]
    }

    /// Every `y ≥ y0` has its unique preimage in the tail.
    fn tail_bound(&self) -> u64 {
        let top = self.table.values().map(|v| v + 1).max().unwrap_or(0);
        (self.from + self.max_shift()).max(top)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FinpermError::NotBijective(m));
        let l = self.period();
        if l == 0 {
            return bad("empty period".into());
        }
        if let Some(k) = self.table.keys().find(|&&k| k >= self.from) {
            return bad(format!("table entry {k} lies in the tail"));
        }
        let mut hit = vec![false; l as usize];
        for r in 0..l {
            let s = (r as i64 + self.shifts[r as usize]).rem_euclid(l as i64) as usize;
            if std::mem::replace(&mut hit[s], true) {
                return bad(format!("two residue classes mod {l} land on {s}"));
            }
        }
        for n in self.from..self.from + l {
            if self.tail(n) < 0 {
                return bad(format!("{n} is sent below 0"));
            }
        }
        let y0 = self.tail_bound();
        let w = y0 + self.max_shift() + 1;
        let mut images = HashSet::new();
        for n in 0..w {
            if !images.insert(self.apply(n)) {
                return bad(format!("{} has two preimages", self.apply(n)));
            }
        }
        if let Some(y) = (0..y0).find(|y| !images.contains(y)) {
            return bad(format!("{y} has no preimage"));
        }
        Ok(())
    }

    fn canonical(mut self) -> Self {
        let d = minimal_period(&self.shifts);
        self.shifts.truncate(d);
        while self.from > 0 {
            let n = self.from - 1;
            let t = self.tail(n);
            if t < 0 || self.apply(n) != t as u64 {
                break;
            }
            self.table.remove(&n);
            self.from = n;
        }
        self
    }

    pub fn apply(&self, n: u64) -> u64 {
        if n < self.from {
            self.table.get(&n).copied().unwrap_or(n)
        } else {
            self.tail(n) as u64
        }
    }

    pub fn is_finitely_supported(&self) -> bool {
        self.shifts.iter().all(|&c| c == 0)
    }

    /// The moved points, when there are finitely many.
    pub fn support(&self) -> Option<BTreeSet<u64>> {
        self.is_finitely_supported().then(|| self.table.keys().copied().collect())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &FinPermutation) -> FinPermutation {
        let l = self.period().lcm(&other.period());
        let from = other.from.max(self.from + other.max_shift());
        let shifts: Vec<i64> = (0..l)
            .map(|r| {
                let c2 = other.shifts[(r % other.period()) as usize];
                let r1 = (r as i64 + c2).rem_euclid(self.period() as i64) as usize;
                c2 + self.shifts[r1]
            })
            .collect();
        let table = (0..from).map(|n| (n, self.apply(other.apply(n)))).filter(|(a, b)| a != b).collect();
        FinPermutation { table, from, shifts }.canonical()
    }

    pub fn inverse(&self) -> FinPermutation {
        let l = self.period();
        let mut shifts = vec![0i64; l as usize];
        for r in 0..l {
            let c = self.shifts[r as usize];
            shifts[(r as i64 + c).rem_euclid(l as i64) as usize] = -c;
        }
        let from = self.tail_bound();
        let mut table = BTreeMap::new();
        for n in 0..from + self.max_shift() + 1 {
            let y = self.apply(n);
            if y < from && y != n {
                table.insert(y, n);
            }
        }
        FinPermutation { table, from, shifts }.canonical()
    }

    /// `σᵏ` for any integer `k`.
    pub fn pow(&self, k: i64) -> FinPermutation {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        (0..k.unsigned_abs()).fold(FinPermutation::identity(), |acc, _| acc.compose(&base))
    }

    /// The action on `{0, …, n−1}`, if that set is invariant.
    pub fn restrict(&self, n: usize) -> Option<Vec<usize>> {
        let v: Vec<usize> = (0..n as u64).map(|i| self.apply(i) as usize).collect();
        v.iter().all(|&x| x < n).then_some(v)
    }

    pub fn from_vec(v: &[usize]) -> Result<Self> {
        let pairs: Vec<(u64, u64)> = v.iter().enumerate().map(|(i, &x)| (i as u64, x as u64)).collect();
        Self::from_map(&pairs)
    }

    /// `2k ↦ 2k+2`, `1 ↦ 0`, `2k+1 ↦ 2k−1`.
    pub fn paired_shift() -> Self {
        Self::from_pieces(
            &[(1, 0)],
            &[
                Piece { residue: 0, modulus: 2, start: 0, shift: 2 },
                Piece { residue: 1, modulus: 2, start: 3, shift: -2 },
            ],
        )
        .expect("the paired shift is a bijection")
    }

    /// A uniformly shuffled permutation of `{0, …, window−1}`.
    pub fn random_finitary<R: Rng + ?Sized>(rng: &mut R, window: u64) -> Self {
        let mut v: Vec<usize> = (0..window as usize).collect();
        for i in (1..v.len()).rev() {
            let j = rng.gen_range(0..=i);
            v.swap(i, j);
        }
        Self::from_vec(&v).expect("a shuffle is a bijection")
    }

    fn cycles(&self) -> Vec<Vec<u64>> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &a in self.table.keys() {
            if seen.contains(&a) {
                continue;
            }
            let mut c = vec![a];
            seen.insert(a);
            let mut b = self.apply(a);
            while b != a {
                seen.insert(b);
                c.push(b);
                b = self.apply(b);
            }
            out.push(c);
        }
        out
    }
}

impl fmt::Display for FinPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_finitely_supported() {
            if self.table.is_empty() {
                return write!(f, "()");
            }
            for c in self.cycles() {
                let s: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", s.join(" "))?;
            }
            return Ok(());
        }
        let mut parts: Vec<String> = self.table.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        let l = self.period();
        for (r, &c) in self.shifts.iter().enumerate() {
            if c != 0 {
                parts.push(format!("[{r} mod {l}, n>={}: {c:+}]", self.from));
            }
        }
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for FinPermutation {
    type Err = FinpermError;

    /// `(0 1)(2 3 4)`, `1->0`, and pieces `[0 mod 2, n>=0: +2]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut cycles = Vec::new();
        let mut pairs = Vec::new();
        let mut pieces = Vec::new();
        for it in items(s)? {
            if let Some(body) = it.strip_prefix('(') {
                let body = body.trim_end_matches(')');
                let c: Vec<u64> = body.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(num).collect::<Result<_>>()?;
                if !c.is_empty() {
                    cycles.push(c);
                }
            } else if let Some(body) = it.strip_prefix('[') {
                let (residue, modulus, start, shift) = parse_piece(body.trim_end_matches(']'))?;
                let shift = shift.ok_or_else(|| FinpermError::Parse(format!("piece {it} has no shift")))?;
                pieces.push(Piece { residue, modulus, start, shift });
            } else if let Some((a, b)) = it.split_once("->") {
                pairs.push((num(a)?, num(b)?));
            } else {
                return parse_err(format!("unexpected {it:?}"));
            }
        }
        let mut seen: HashSet<u64> = pairs.iter().map(|p| p.0).collect();
        for c in &cycles {
            for (i, &a) in c.iter().enumerate() {
                if !seen.insert(a) {
                    return parse_err(format!("{a} is given two images"));
                }
                pairs.push((a, c[(i + 1) % c.len()]));
            }
        }
        Self::from_pieces(&pairs, &pieces)
    }
}

impl Serialize for FinPermutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FinPermutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A subset of ℕ: explicit below `from`, periodic residues from `from` on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventualSet {
    head: BTreeSet<u64>,
    from: u64,
    residues: Vec<bool>,
}

impl EventualSet {
    pub fn finite(set: impl IntoIterator<Item = u64>) -> Self {
        let head: BTreeSet<u64> = set.into_iter().collect();
        let from = head.iter().next_back().map_or(0, |m| m + 1);
        EventualSet { head, from, residues: vec![false] }.canonical()
    }

    /// `{n ≡ r (mod m)}`.
    pub fn residue_class(r: u64, m: u64) -> Self {
        let residues = (0..m).map(|i| i == r % m).collect();
        EventualSet { head: BTreeSet::new(), from: 0, residues }.canonical()
    }

    pub fn evens() -> Self {
        Self::residue_class(0, 2)
    }

    pub fn odds() -> Self {
        Self::residue_class(1, 2)
    }

    pub fn contains(&self, n: u64) -> bool {
        if n < self.from {
            self.head.contains(&n)
        } else {
            self.residues[(n % self.residues.len() as u64) as usize]
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.residues.iter().any(|&b| b)
    }

    pub fn is_coinfinite(&self) -> bool {
        self.residues.iter().any(|&b| !b)
    }

    /// Past this bound membership is periodic.
    pub fn window(&self) -> u64 {
        self.from + self.residues.len() as u64
    }

    fn canonical(mut self) -> Self {
        let d = minimal_period(&self.residues);
        self.residues.truncate(d);
        while self.from > 0 {
            let n = self.from - 1;
            if self.head.contains(&n) != self.residues[(n % d as u64) as usize] {
                break;
            }
            self.head.remove(&n);
            self.from = n;
        }
        self
    }

    /// The elements below `n`.
    pub fn below(&self, n: u64) -> BTreeSet<u64> {
        (0..n).filter(|&i| self.contains(i)).collect()
    }

    /// `self △ other` when finite.
    pub fn symmetric_difference(&self, other: &EventualSet) -> Option<BTreeSet<u64>> {
        let t = self.from.max(other.from);
        let p = (self.residues.len() as u64).lcm(&(other.residues.len() as u64));
        if (t..t + p).any(|y| self.contains(y) != other.contains(y)) {
            return None;
        }
        Some((0..t).filter(|&y| self.contains(y) != other.contains(y)).collect())
    }

    /// `(self ∖ remove) ∪ add` for finite `remove`, `add`.
    pub fn with_changes(&self, remove: &BTreeSet<u64>, add: &BTreeSet<u64>) -> Self {
        let top = remove.iter().chain(add).map(|x| x + 1).max().unwrap_or(0);
        let l = self.residues.len() as u64;
        // extend `from` to a multiple of the period past every change
        let from = self.from.max(top).div_ceil(l) * l;
        let head = (0..from).filter(|&n| (self.contains(n) && !remove.contains(&n)) || add.contains(&n)).collect();
        EventualSet { head, from, residues: self.residues.clone() }.canonical()
    }

    /// `σ(self)`.
    pub fn image(&self, sigma: &FinPermutation) -> Self {
        let inv = sigma.inverse();
        let t = inv.from.max(self.from + inv.max_shift());
        let p = inv.period().lcm(&(self.residues.len() as u64));
        let head = (0..t).filter(|&y| self.contains(inv.apply(y))).collect();
        let residues = (0..p)
            .map(|r| {
                let y = t + (r + p - t % p) % p;
                self.contains(inv.apply(y))
            })
            .collect();
        EventualSet { head, from: t, residues }.canonical()
    }
}

impl fmt::Display for EventualSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.head.iter().map(|x| x.to_string()).collect();
        let l = self.residues.len();
        for (r, &b) in self.residues.iter().enumerate() {
            if b {
                parts.push(format!("[{r} mod {l}, n>={}]", self.from));
            }
        }
        if parts.is_empty() {
            return write!(f, "{{}}");
        }
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for EventualSet {
    type Err = FinpermError;

    /// `evens`, `odds`, `{}`, or numbers and pieces `[r mod m, n>=a]`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "evens" => return Ok(Self::evens()),
            "odds" => return Ok(Self::odds()),
            "{}" | "" => return Ok(Self::finite([])),
            _ => {}
        }
        let mut pts = BTreeSet::new();
        let mut pieces = Vec::new();
        for it in items(s.trim().trim_start_matches('{').trim_end_matches('}'))? {
            if let Some(body) = it.strip_prefix('[') {
                let (r, m, a, shift) = parse_piece(body.trim_end_matches(']'))?;
                if shift.is_some() {
                    return parse_err("set pieces take no shift");
                }
                pieces.push((r, m, a));
            } else {
                pts.insert(num(&it)?);
            }
        }
        let l = lcm_all(pieces.iter().map(|p| p.1));
        let from = pieces.iter().map(|p| p.2).chain(pts.iter().map(|x| x + 1)).max().unwrap_or(0);
        let hit = |n: u64| pieces.iter().any(|&(r, m, a)| n >= a && n % m == r);
        let head = (0..from).filter(|&n| pts.contains(&n) || hit(n)).collect();
        let residues = (0..l).map(|r| pieces.iter().any(|&(pr, m, _)| r % m == pr)).collect();
        Ok(EventualSet { head, from, residues }.canonical())
    }
}

impl Serialize for EventualSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for EventualSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// An infinite, coinfinite `X ⊆ ℕ`, the setting of `𝔖(ℕ,X)`, `Comm_X(ℕ)` and `tr`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommensurationContext {
    pub x: EventualSet,
}

impl CommensurationContext {
    pub fn new(x: EventualSet) -> Result<Self> {
        if !x.is_infinite() || !x.is_coinfinite() {
            return Err(FinpermError::InvalidSet(format!("{x} must be infinite and coinfinite")));
        }
        Ok(CommensurationContext { x })
    }

    pub fn evens() -> Self {
        Self::new(EventualSet::evens()).unwrap()
    }

    pub fn window(&self) -> u64 {
        self.x.window()
    }

    /// `(|X∖Y|, |Y∖X|)` for `Y` commensurated to `X`.
    pub fn defect(&self, y: &EventualSet) -> Result<(usize, usize)> {
        let d = y.symmetric_difference(&self.x).ok_or(FinpermError::NotCommensurating)?;
        let out = d.iter().filter(|&&n| self.x.contains(n)).count();
        Ok((out, d.len() - out))
    }

    /// `Y ∈ Comm⁰_X(ℕ)`.
    pub fn in_comm0(&self, y: &EventualSet) -> bool {
        self.defect(y).is_ok_and(|(a, b)| a == b)
    }
}

/// `σX △ X` when finite.
pub fn commensurated(sigma: &FinPermutation, c: &CommensurationContext) -> Option<BTreeSet<u64>> {
    c.x.image(sigma).symmetric_difference(&c.x)
}

/// `tr(σ) = |σX∖X| − |X∖σX|`.
pub fn transfer_character(sigma: &FinPermutation, c: &CommensurationContext) -> Result<i64> {
    let d = commensurated(sigma, c).ok_or(FinpermError::NotCommensurating)?;
    Ok(d.iter().map(|&y| if c.x.contains(y) { -1 } else { 1 }).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Union,
    Intersection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comm0Decomposition {
    pub y1: EventualSet,
    pub y2: EventualSet,
    pub mode: Mode,
}

fn smallest(count: usize, pred: impl Fn(u64) -> bool) -> BTreeSet<u64> {
    (0..).filter(|&n| pred(n)).take(count).collect()
}

/// Writes `Y = (X∖F₁) ⊔ F₂` as a union or intersection of two members of `Comm⁰_X`.
pub fn comm0_decompose(y: &EventualSet, c: &CommensurationContext) -> Result<Comm0Decomposition> {
    let x = &c.x;
    let d = y.symmetric_difference(x).ok_or(FinpermError::NotCommensurating)?;
    let f1: BTreeSet<u64> = d.iter().copied().filter(|&n| x.contains(n)).collect();
    let f2: BTreeSet<u64> = d.iter().copied().filter(|&n| !x.contains(n)).collect();
    let out = if f1.len() > f2.len() {
        let f3 = smallest(f1.len() - f2.len(), |n| !x.contains(n) && !f2.contains(&n));
        let f4: BTreeSet<u64> = f1.iter().copied().take(f2.len()).collect();
        let add: BTreeSet<u64> = f2.union(&f3).copied().collect();
        Comm0Decomposition { y1: x.with_changes(&f1, &add), y2: x.with_changes(&f4, &f2), mode: Mode::Intersection }
    } else {
        let f3 = smallest(f2.len() - f1.len(), |n| x.contains(n) && !f1.contains(&n));
        let f4: BTreeSet<u64> = f2.iter().copied().take(f1.len()).collect();
        let rem: BTreeSet<u64> = f1.union(&f3).copied().collect();
        Comm0Decomposition { y1: x.with_changes(&rem, &f2), y2: x.with_changes(&f1, &f4), mode: Mode::Union }
    };
    debug_assert!(c.in_comm0(&out.y1) && c.in_comm0(&out.y2));
    Ok(out)
}

/// A partition of ℕ into classes of size `k`: explicit classes covering `[0, from)`, then
/// consecutive runs `[from + jk, from + (j+1)k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    pub k: usize,
    pub head: Vec<Vec<u64>>,
    pub from: u64,
}

impl Partition {
    /// `𝒫_k = {{0..k−1}, {k..2k−1}, …}`.
    pub fn standard(k: usize) -> Result<Self> {
        Self::new(k, vec![])
    }

    pub fn new(k: usize, head: Vec<Vec<u64>>) -> Result<Self> {
        let bad = |m: String| Err(FinpermError::InvalidPartition(m));
        if k < 2 {
            return bad(format!("class size {k} < 2"));
        }
        let mut seen = BTreeSet::new();
        for c in &head {
            if c.len() != k {
                return bad(format!("class {c:?} has size {}", c.len()));
            }
            for &x in c {
                if !seen.insert(x) {
                    return bad(format!("{x} lies in two classes"));
                }
            }
        }
        let from = seen.len() as u64;
        if seen.iter().next_back().is_some_and(|&m| m + 1 != from) {
            return bad("explicit classes must cover an initial segment".into());
        }
        Ok(Partition { k, head, from }.canonical())
    }

    fn canonical(mut self) -> Self {
        for c in &mut self.head {
            c.sort_unstable();
        }
        self.head.sort();
        let k = self.k as u64;
        loop {
            let run: Vec<u64> = (self.from.saturating_sub(k)..self.from).collect();
            match self.head.iter().position(|c| *c == run) {
                Some(i) if self.from >= k => {
                    self.head.remove(i);
                    self.from -= k;
                }
                _ => break,
            }
        }
        self
    }

    /// Index of the class of `n`: explicit classes first, then runs.
    pub fn class_of(&self, n: u64) -> usize {
        if n < self.from {
            self.head.iter().position(|c| c.contains(&n)).expect("the head covers [0, from)")
        } else {
            self.head.len() + ((n - self.from) / self.k as u64) as usize
        }
    }

    pub fn class(&self, i: usize) -> Vec<u64> {
        if i < self.head.len() {
            self.head[i].clone()
        } else {
            let a = self.from + ((i - self.head.len()) * self.k) as u64;
            (a..a + self.k as u64).collect()
        }
    }

    /// `σ(P)` for finitary `σ`.
    pub fn image(&self, sigma: &FinPermutation) -> Result<Self> {
        let sup = sigma.support().ok_or(FinpermError::NotFinitary)?;
        let k = self.k as u64;
        let top = sup.iter().map(|x| x + 1).max().unwrap_or(0).max(self.from);
        let from = self.from + (top - self.from).div_ceil(k) * k;
        let mut classes: Vec<Vec<u64>> = self.head.clone();
        classes.extend((self.from..from).step_by(self.k).map(|a| (a..a + k).collect()));
        let head = classes.iter().map(|c| c.iter().map(|&x| sigma.apply(x)).collect()).collect();
        Ok(Partition { k: self.k, head, from }.canonical())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "exceptions")]
pub enum Membership {
    /// `σ(A_i) = A_i` for all `i`.
    Full,
    /// `σ(A_i) = A_i` except for the listed class indices.
    Almost(Vec<usize>),
    Neither,
}

/// Classifies `σ` against the full group of `P` and its almost full group `A[P]`.
pub fn partition_membership(sigma: &FinPermutation, p: &Partition) -> Membership {
    let fixes = |i: usize| {
        let c = p.class(i);
        let img: BTreeSet<u64> = c.iter().map(|&x| sigma.apply(x)).collect();
        img == c.into_iter().collect()
    };
    let k = p.k as u64;
    let start = sigma.from.max(p.from);
    let j0 = p.head.len() + (start - p.from).div_ceil(k) as usize;
    // run classes past `start` repeat with period `L`
    if (j0..j0 + sigma.period() as usize).any(|i| !fixes(i)) {
        return Membership::Neither;
    }
    let bad: Vec<usize> = (0..j0).filter(|&i| !fixes(i)).collect();
    if bad.is_empty() {
        Membership::Full
    } else {
        Membership::Almost(bad)
    }
}

// ---- finite actions ----

type Perm = Vec<usize>;

fn restrict_all(gens: &[FinPermutation], n: usize) -> Result<Vec<Perm>> {
    gens.iter().enumerate().map(|(i, g)| g.restrict(n).ok_or(FinpermError::LeavesDomain(i))).collect()
}

fn orbit(gens: &[Perm], start: usize) -> Vec<usize> {
    let mut seen = vec![start];
    let mut set = HashSet::from([start]);
    let mut i = 0;
    while i < seen.len() {
        let x = seen[i];
        for g in gens {
            if set.insert(g[x]) {
                seen.push(g[x]);
            }
        }
        i += 1;
    }
    seen
}

pub fn is_transitive(gens: &[FinPermutation], n: usize) -> Result<bool> {
    let g = restrict_all(gens, n)?;
    Ok(n == 0 || orbit(&g, 0).len() == n)
}

/// `gB = B` or `gB ∩ B = ∅` for every generator.
pub fn is_block(gens: &[FinPermutation], n: usize, block: &BTreeSet<usize>) -> Result<bool> {
    let g = restrict_all(gens, n)?;
    Ok(g.iter().all(|p| {
        let img: BTreeSet<usize> = block.iter().map(|&x| p[x]).collect();
        img == *block || img.is_disjoint(block)
    }))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let p = self.0[x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.0[x] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// The smallest block containing `a` and `b`, by merging `(ga, gb)` until stable.
pub fn minimal_block(gens: &[FinPermutation], n: usize, a: usize, b: usize) -> Result<BTreeSet<usize>> {
    let g = restrict_all(gens, n)?;
    if a >= n || b >= n || orbit(&g, 0).len() != n {
        return Err(FinpermError::NotTransitive);
    }
    let mut uf = UnionFind((0..n).collect());
    let mut queue = VecDeque::new();
    if uf.union(a, b) {
        queue.push_back((a, b));
    }
    while let Some((x, y)) = queue.pop_front() {
        for p in &g {
            if uf.union(p[x], p[y]) {
                queue.push_back((p[x], p[y]));
            }
        }
    }
    let r = uf.find(a);
    let block: BTreeSet<usize> = (0..n).filter(|&i| uf.find(i) == r).collect();
    assert!(is_block(gens, n, &block)?, "refinement left a non-block");
    Ok(block)
}

pub fn is_primitive(gens: &[FinPermutation], n: usize) -> Result<bool> {
    if !is_transitive(gens, n)? {
        return Err(FinpermError::NotTransitive);
    }
    for b in 1..n {
        if minimal_block(gens, n, 0, b)?.len() < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Adjacent transpositions inside `X` and inside its complement in `{0, …, n−1}`.
pub fn setwise_stabilizer_gens(n: usize, x: &BTreeSet<usize>) -> Result<Vec<FinPermutation>> {
    if x.is_empty() || x.len() >= n || x.iter().any(|&i| i >= n) {
        return Err(FinpermError::TrivialX);
    }
    let rest: Vec<usize> = (0..n).filter(|i| !x.contains(i)).collect();
    let inside: Vec<usize> = x.iter().copied().collect();
    let mut out = Vec::new();
    for part in [inside, rest] {
        for w in part.windows(2) {
            out.push(FinPermutation::transposition(w[0] as u64, w[1] as u64));
        }
    }
    Ok(out)
}

/// Components of the transposition graph of `⟨Stab(X), g⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaximalityCertificate {
    pub components: Vec<Vec<usize>>,
    /// One component: `⟨Stab(X), g⟩` contains every transposition, so it is `S_n`.
    pub connected: bool,
}

/// Starts from the cliques on `X` and its complement; `g Sym(C) g⁻¹ = Sym(gC)` merges `gC`.
pub fn maximality_certificate(n: usize, x: &BTreeSet<usize>, g: &FinPermutation) -> Result<MaximalityCertificate> {
    setwise_stabilizer_gens(n, x)?;
    let gv = g.restrict(n).ok_or(FinpermError::LeavesDomain(0))?;
    let mut gi = vec![0; n];
    for (i, &v) in gv.iter().enumerate() {
        gi[v] = i;
    }
    let mut uf = UnionFind((0..n).collect());
    for part in [x.iter().copied().collect::<Vec<_>>(), (0..n).filter(|i| !x.contains(i)).collect()] {
        for w in part.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            let r = uf.find(i);
            for h in [&gv, &gi] {
                changed |= uf.union(h[i], h[r]);
            }
        }
        if !changed {
            break;
        }
    }
    let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        comps.entry(r).or_default().push(i);
    }
    let components: Vec<Vec<usize>> = comps.into_values().collect();
    Ok(MaximalityCertificate { connected: components.len() == 1, components })
}

fn compose_vec(a: &Perm, b: &Perm) -> Perm {
    b.iter().map(|&x| a[x]).collect()
}

fn invert_vec(a: &Perm) -> Perm {
    let mut out = vec![0; a.len()];
    for (i, &v) in a.iter().enumerate() {
        out[v] = i;
    }
    out
}

/// All elements of `⟨gens⟩ ≤ S_n`, by breadth-first closure.
pub fn group_elements(gens: &[FinPermutation], n: usize) -> Result<Vec<Vec<usize>>> {
    let g = restrict_all(gens, n)?;
    let id: Perm = (0..n).collect();
    let mut seen = HashSet::from([id.clone()]);
    let mut out = vec![id];
    let mut i = 0;
    while i < out.len() {
        let x = out[i].clone();
        for p in &g {
            let y = compose_vec(p, &x);
            if seen.insert(y.clone()) {
                out.push(y);
            }
        }
        i += 1;
    }
    Ok(out)
}

/// Number of orbits of `Stab(base)` on the orbit of `base`, i.e. on `G/H`.
pub fn biindex(gens: &[FinPermutation], n: usize, base: usize) -> Result<usize> {
    let g = restrict_all(gens, n)?;
    if base >= n {
        return Err(FinpermError::NotTransitive);
    }
    // transversal: u[ω](base) = ω
    let mut u: HashMap<usize, Perm> = HashMap::from([(base, (0..n).collect())]);
    let mut order = vec![base];
    let mut i = 0;
    while i < order.len() {
        let w = order[i];
        for p in &g {
            let t = p[w];
            if !u.contains_key(&t) {
                let v = compose_vec(p, &u[&w]);
                u.insert(t, v);
                order.push(t);
            }
        }
        i += 1;
    }
    let mut schreier = Vec::new();
    for &w in &order {
        for p in &g {
            let s = compose_vec(&invert_vec(&u[&p[w]]), &compose_vec(p, &u[&w]));
            if s.iter().enumerate().any(|(i, &v)| i != v) {
                schreier.push(s);
            }
        }
    }
    let mut uf = UnionFind((0..n).collect());
    for s in &schreier {
        for &w in &order {
            uf.union(w, s[w]);
        }
    }
    let roots: HashSet<usize> = order.iter().map(|&w| uf.find(w)).collect();
    Ok(roots.len())
}

/// `G` acts transitively on ordered pairs of distinct points.
pub fn is_two_transitive(gens: &[FinPermutation], n: usize) -> Result<bool> {
    if n < 2 {
        return is_transitive(gens, n);
    }
    let g = restrict_all(gens, n)?;
    let code = |a: usize, b: usize| a * n + b;
    let pair_gens: Vec<Perm> = g
        .iter()
        .map(|p| (0..n * n).map(|c| code(p[c / n], p[c % n])).collect())
        .collect();
    Ok(orbit(&pair_gens, code(0, 1)).len() == n * (n - 1))
}

/// `(0 1)` and `(0 1 … n−1)`.
pub fn symmetric_group_gens(n: usize) -> Vec<FinPermutation> {
    match n {
        0 | 1 => vec![],
        2 => vec![FinPermutation::transposition(0, 1)],
        _ => vec![
            FinPermutation::transposition(0, 1),
            FinPermutation::from_cycles(&[(0..n as u64).collect()]).unwrap(),
        ],
    }
}

/// Generators of the automorphisms of `{{0..k−1}, {k..2k−1}, …}` on `k·m` points.
pub fn partition_automorphism_gens(k: usize, m: usize) -> Vec<FinPermutation> {
    let mut out = symmetric_group_gens(k);
    let shift = |blocks: &[usize]| -> FinPermutation {
        let mut v: Vec<usize> = (0..k * m).collect();
        for (i, &b) in blocks.iter().enumerate() {
            let to = blocks[(i + 1) % blocks.len()];
            for j in 0..k {
                v[b * k + j] = to * k + j;
            }
        }
        FinPermutation::from_vec(&v).unwrap()
    };
    if m >= 2 {
        out.push(shift(&[0, 1]));
    }
    if m >= 3 {
        out.push(shift(&(0..m).collect::<Vec<_>>()));
    }
    out
}

/// The `k`-subsets of `{0, …, n−1}` in lexicographic order, with the induced permutations.
pub fn subset_action(gens: &[FinPermutation], n: usize, k: usize) -> Result<(Vec<BTreeSet<usize>>, Vec<FinPermutation>)> {
    let g = restrict_all(gens, n)?;
    let mut subsets = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k <= n {
        loop {
            subsets.push(idx.iter().copied().collect::<BTreeSet<usize>>());
            let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { break };
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    let pos: HashMap<BTreeSet<usize>, usize> = subsets.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let induced = g
        .iter()
        .map(|p| {
            let v: Vec<usize> = subsets.iter().map(|s| pos[&s.iter().map(|&x| p[x]).collect::<BTreeSet<_>>()]).collect();
            FinPermutation::from_vec(&v).unwrap()
        })
        .collect();
    Ok((subsets, induced))
}

// ---- Schlichting windows ----

/// The base object whose stabilizer is `Δ`; `𝔖_(∞)/Δ` is its orbit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", content = "value")]
pub enum BaseObject {
    /// `Δ = Stab(A)` with `|A| = k`; the completion acts on `[ℕ]_k`.
    KSet(BTreeSet<u64>),
    /// `Δ = Stab(X)` for infinite coinfinite `X`; the completion acts on `Comm⁰_X(ℕ)`.
    Commensurated(EventualSet),
    /// `Δ` = automorphisms of `𝒫_k`; the completion acts on partitions almost equal to it.
    Partition(Partition),
}

impl BaseObject {
    pub fn parse(kind: &str, value: &str) -> Result<Self> {
        match kind {
            "k-set" => {
                let body = value.trim().trim_start_matches('{').trim_end_matches('}');
                let s = body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(num).collect::<Result<_>>()?;
                Ok(BaseObject::KSet(s))
            }
            "commensurated" => {
                let x: EventualSet = value.parse()?;
                CommensurationContext::new(x.clone())?;
                Ok(BaseObject::Commensurated(x))
            }
            "partition" => {
                let k = num(value)? as usize;
                Ok(BaseObject::Partition(Partition::standard(k)?))
            }
            other => Err(FinpermError::UnknownStabilizerType(other.into())),
        }
    }

    pub fn act(&self, sigma: &FinPermutation) -> Result<Self> {
        Ok(match self {
            BaseObject::KSet(a) => BaseObject::KSet(a.iter().map(|&x| sigma.apply(x)).collect()),
            BaseObject::Commensurated(y) => BaseObject::Commensurated(y.image(sigma)),
            BaseObject::Partition(p) => BaseObject::Partition(p.image(sigma)?),
        })
    }
}

impl fmt::Display for BaseObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseObject::KSet(a) => {
                let s: Vec<String> = a.iter().map(|x| x.to_string()).collect();
                write!(f, "{{{}}}", s.join(","))
            }
            BaseObject::Commensurated(y) => write!(f, "{y}"),
            BaseObject::Partition(p) => {
                let s: Vec<String> = p.head.iter().map(|c| format!("{c:?}")).collect();
                write!(f, "P{} {} runs from {}", p.k, s.join(" "), p.from)
            }
        }
    }
}

/// The orbit of the base object under words of length `≤ depth`, edges labelled by generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetGraph {
    pub objects: Vec<BaseObject>,
    /// `(source, generator, target)` for every object within distance `< depth`.
    pub edges: Vec<(usize, usize, usize)>,
}

pub fn schlichting_orbit(gens: &[FinPermutation], base: &BaseObject, depth: usize) -> Result<CosetGraph> {
    if gens.iter().any(|g| !g.is_finitely_supported()) {
        return Err(FinpermError::NotFinitary);
    }
    let mut objects = vec![base.clone()];
    let mut index: HashMap<BaseObject, usize> = HashMap::from([(base.clone(), 0)]);
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &i in &frontier {
            for (j, g) in gens.iter().enumerate() {
                let img = objects[i].act(g)?;
                let t = match index.get(&img) {
                    Some(&t) => t,
                    None => {
                        objects.push(img.clone());
                        index.insert(img, objects.len() - 1);
                        next.push(objects.len() - 1);
                        objects.len() - 1
                    }
                };
                edges.push((i, j, t));
            }
        }
        frontier = next;
    }
    Ok(CosetGraph { objects, edges })
}
