//! Group presentations with normal forms: finite tables, free groups, free products,
//! amalgamated products, HNN extensions and the direct sum of countably many ℤ/2.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupError {
    #[error("invalid letter `{0}`")]
    InvalidLetter(String),
    #[error("invalid group: {0}")]
    Invalid(String),
    #[error("unsupported subgroup: {0}")]
    Unsupported(String),
    #[error("search exhausted after {0} candidates")]
    SearchExhausted(usize),
}

/// Images of the generators of `Σ` in a host group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub images: Vec<Elem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GroupSpec {
    /// Multiplication table over `0..n`; element 0 is the identity.
    Finite { names: Vec<String>, gens: Vec<u32>, table: Vec<Vec<u32>> },
    Free { names: Vec<String> },
    FreeProduct { factors: Vec<GroupSpec> },
    Amalgam { g1: Box<GroupSpec>, g2: Box<GroupSpec>, sigma: Box<GroupSpec>, emb1: Embedding, emb2: Embedding },
    /// `t ι_Σ(σ) t⁻¹ = ι_θ(σ)`.
    Hnn { h: Box<GroupSpec>, sigma: Box<GroupSpec>, emb_sigma: Embedding, emb_theta: Embedding, letter: String },
    /// ⊕ℕ ℤ/2 with generators `e0, e1, …`.
    DirectSumZ2,
}

impl GroupSpec {
    pub fn free(names: &[&str]) -> Self {
        GroupSpec::Free { names: names.iter().map(|s| s.to_string()).collect() }
    }

    pub fn integers(name: &str) -> Self {
        GroupSpec::free(&[name])
    }

    pub fn trivial() -> Self {
        GroupSpec::Free { names: vec![] }
    }

    /// ℤ/n generated by `name`.
    pub fn cyclic(name: &str, n: u32) -> Self {
        let table = (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect();
        GroupSpec::Finite { names: vec![name.into()], gens: vec![1 % n], table }
    }
}

/// Group elements in normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Elem {
    Fin(u32),
    /// Syllables `(generator, nonzero exponent)`, adjacent generators distinct.
    Free(#[serde(with = "syllables_serde")] Vec<(u32, BigInt)>),
    /// Sorted set of nonzero coordinates.
    Bits(Vec<u64>),
    /// Alternating nontrivial syllables `(factor, element)`.
    Prod(Vec<(u32, Elem)>),
    /// `r_1 ⋯ r_n ι_1(σ)` with alternating left coset representatives `r_i ∉ Σ`, factors 1 or 2.
    Amal { syl: Vec<(u8, Elem)>, sigma: Box<Elem> },
    /// `h_0 t^{ε_1} h_1 ⋯ t^{ε_n} h_n`.
    Hnn { h: Vec<Elem>, t: Vec<i8> },
}

mod syllables_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[(u32, BigInt)], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<(u32, String)> = v.iter().map(|(g, e)| (*g, e.to_string())).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(u32, BigInt)>, D::Error> {
        let rows = Vec::<(u32, String)>::deserialize(d)?;
        rows.into_iter()
            .map(|(g, e)| e.parse::<BigInt>().map(|e| (g, e)).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone)]
enum SigmaKind {
    Trivial,
    /// All `(σ, ι(σ))` pairs.
    Finite(Vec<(Elem, Elem)>),
    /// `ι(c)` and its cyclically reduced length.
    Cyclic(Elem, usize),
}

#[derive(Debug, Clone)]
struct Emb {
    kind: SigmaKind,
}

#[derive(Debug, Clone)]
enum Kind {
    Finite { inv: Vec<u32>, words: Vec<Vec<(usize, i64)>> },
    Free,
    FreeProduct(Vec<Group>),
    Amalgam { f: [Box<Group>; 2], sigma: Box<Group>, emb: [Emb; 2] },
    Hnn { h: Box<Group>, sigma: Box<Group>, es: Emb, et: Emb },
    DirectSumZ2,
}

/// A validated group with precomputed normal-form data.
#[derive(Debug, Clone)]
pub struct Group {
    pub spec: GroupSpec,
    names: Vec<String>,
    kind: Kind,
}

impl Group {
    pub fn new(spec: GroupSpec) -> Result<Self, GroupError> {
        let invalid = |m: String| GroupError::Invalid(m);
        let (names, kind) = match &spec {
            GroupSpec::Finite { names, gens, table } => {
                let n = table.len();
                if n == 0 || table.iter().any(|r| r.len() != n || r.iter().any(|&x| x as usize >= n)) {
                    return Err(invalid("table is not square over its elements".into()));
                }
                if names.len() != gens.len() || gens.iter().any(|&g| g as usize >= n) {
                    return Err(invalid("generator list mismatch".into()));
                }
                for x in 0..n {
                    if table[0][x] as usize != x || table[x][0] as usize != x {
                        return Err(invalid("element 0 is not the identity".into()));
                    }
                }
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let l = table[table[a][b] as usize][c];
                            let r = table[a][table[b][c] as usize];
                            if l != r {
                                return Err(invalid(format!("not associative at ({a},{b},{c})")));
                            }
                        }
                    }
                }
                let mut inv = vec![u32::MAX; n];
                for a in 0..n {
                    match (0..n).find(|&b| table[a][b] == 0) {
                        Some(b) => inv[a] = b as u32,
                        None => return Err(invalid(format!("{a} has no inverse"))),
                    }
                }
                // Shortlex words over generators and their inverses.
                let mut words: Vec<Option<Vec<(usize, i64)>>> = vec![None; n];
                words[0] = Some(vec![]);
                let mut queue = VecDeque::from([0usize]);
                while let Some(x) = queue.pop_front() {
                    for (gi, &g) in gens.iter().enumerate() {
                        for (e, y) in [(1i64, g), (-1, inv[g as usize])] {
                            let z = table[x][y as usize] as usize;
                            if words[z].is_none() {
                                let mut w = words[x].clone().unwrap();
                                w.push((gi, e));
                                words[z] = Some(w);
                                queue.push_back(z);
                            }
                        }
                    }
                }
                if words.iter().any(|w| w.is_none()) {
                    return Err(invalid("generators do not generate the table".into()));
                }
                (names.clone(), Kind::Finite { inv, words: words.into_iter().map(|w| w.unwrap()).collect() })
            }
            GroupSpec::Free { names } => (names.clone(), Kind::Free),
            GroupSpec::FreeProduct { factors } => {
                let gs: Vec<Group> = factors.iter().cloned().map(Group::new).collect::<Result<_, _>>()?;
                let names: Vec<String> = gs.iter().flat_map(|g| g.names.clone()).collect();
                (names, Kind::FreeProduct(gs))
            }
            GroupSpec::Amalgam { g1, g2, sigma, emb1, emb2 } => {
                let g1 = Group::new((**g1).clone())?;
                let g2 = Group::new((**g2).clone())?;
                let s = Group::new((**sigma).clone())?;
                let e1 = Emb::new(&s, &g1, emb1)?;
                let e2 = Emb::new(&s, &g2, emb2)?;
                let names = g1.names.iter().chain(g2.names.iter()).cloned().collect();
                (names, Kind::Amalgam { f: [Box::new(g1), Box::new(g2)], sigma: Box::new(s), emb: [e1, e2] })
            }
            GroupSpec::Hnn { h, sigma, emb_sigma, emb_theta, letter } => {
                let hg = Group::new((**h).clone())?;
                let s = Group::new((**sigma).clone())?;
                let es = Emb::new(&s, &hg, emb_sigma)?;
                let et = Emb::new(&s, &hg, emb_theta)?;
                let mut names = hg.names.clone();
                names.push(letter.clone());
                (names, Kind::Hnn { h: Box::new(hg), sigma: Box::new(s), es, et })
            }
            GroupSpec::DirectSumZ2 => (vec![], Kind::DirectSumZ2),
        };
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n) || n.is_empty() || n == "1" {
                return Err(invalid(format!("bad or duplicate generator name `{n}`")));
            }
        }
        Ok(Group { spec, names, kind })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn identity(&self) -> Elem {
        match &self.kind {
            Kind::Finite { .. } => Elem::Fin(0),
            Kind::Free => Elem::Free(vec![]),
            Kind::FreeProduct(_) => Elem::Prod(vec![]),
            Kind::Amalgam { sigma, .. } => Elem::Amal { syl: vec![], sigma: Box::new(sigma.identity()) },
            Kind::Hnn { h, .. } => Elem::Hnn { h: vec![h.identity()], t: vec![] },
            Kind::DirectSumZ2 => Elem::Bits(vec![]),
        }
    }

    pub fn is_identity(&self, e: &Elem) -> bool {
        *e == self.identity()
    }

    pub fn is_finite(&self) -> bool {
        match &self.kind {
            Kind::Finite { .. } => true,
            Kind::Free => self.names.is_empty(),
            _ => false,
        }
    }

    /// All elements of a finite group.
    pub fn elements(&self) -> Option<Vec<Elem>> {
        match &self.kind {
            Kind::Finite { inv, .. } => Some((0..inv.len() as u32).map(Elem::Fin).collect()),
            Kind::Free if self.names.is_empty() => Some(vec![self.identity()]),
            _ => None,
        }
    }

    pub fn order(&self) -> Option<usize> {
        self.elements().map(|v| v.len())
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        match (&self.kind, a, b) {
            (Kind::Finite { .. }, Elem::Fin(x), Elem::Fin(y)) => {
                let GroupSpec::Finite { table, .. } = &self.spec else { unreachable!() };
                Elem::Fin(table[*x as usize][*y as usize])
            }
            (Kind::Free, Elem::Free(x), Elem::Free(y)) => {
                let mut out = x.clone();
                for (g, e) in y {
                    push_syllable(&mut out, *g, e.clone());
                }
                Elem::Free(out)
            }
            (Kind::DirectSumZ2, Elem::Bits(x), Elem::Bits(y)) => {
                let sx: HashSet<u64> = x.iter().copied().collect();
                let sy: HashSet<u64> = y.iter().copied().collect();
                let mut v: Vec<u64> = sx.symmetric_difference(&sy).copied().collect();
                v.sort_unstable();
                Elem::Bits(v)
            }
            (Kind::FreeProduct(fs), Elem::Prod(x), Elem::Prod(y)) => {
                let mut out: Vec<(u32, Elem)> = x.clone();
                for (i, h) in y {
                    let f = &fs[*i as usize];
                    match out.last_mut() {
                        Some((j, top)) if j == i => {
                            let m = f.mul(top, h);
                            if f.is_identity(&m) {
                                out.pop();
                            } else {
                                *top = m;
                            }
                        }
                        _ => {
                            if !f.is_identity(h) {
                                out.push((*i, h.clone()));
                            }
                        }
                    }
                }
                Elem::Prod(out)
            }
            (Kind::Amalgam { .. }, Elem::Amal { .. }, Elem::Amal { .. }) => {
                let mut letters = self.amal_letters(a);
                letters.extend(self.amal_letters(b));
                self.amal_normalize(letters)
            }
            (Kind::Hnn { .. }, Elem::Hnn { .. }, Elem::Hnn { .. }) => {
                let mut toks = hnn_tokens(a);
                toks.extend(hnn_tokens(b));
                self.hnn_normalize(toks)
            }
            _ => panic!("element does not belong to this group"),
        }
    }

    pub fn inv(&self, a: &Elem) -> Elem {
        match (&self.kind, a) {
            (Kind::Finite { inv, .. }, Elem::Fin(x)) => Elem::Fin(inv[*x as usize]),
            (Kind::Free, Elem::Free(x)) => Elem::Free(x.iter().rev().map(|(g, e)| (*g, -e)).collect()),
            (Kind::DirectSumZ2, Elem::Bits(_)) => a.clone(),
            (Kind::FreeProduct(fs), Elem::Prod(x)) => {
                Elem::Prod(x.iter().rev().map(|(i, h)| (*i, fs[*i as usize].inv(h))).collect())
            }
            (Kind::Amalgam { f, sigma, emb }, Elem::Amal { syl, sigma: s }) => {
                let mut letters = vec![(1u8, emb[0].embed(&f[0], sigma, &sigma.inv(s)))];
                for (j, r) in syl.iter().rev() {
                    letters.push((*j, f[*j as usize - 1].inv(r)));
                }
                self.amal_normalize(letters)
            }
            (Kind::Hnn { h, .. }, Elem::Hnn { h: hs, t }) => {
                let mut toks = Vec::new();
                for i in (0..hs.len()).rev() {
                    toks.push(Tok::H(h.inv(&hs[i])));
                    if i > 0 {
                        toks.push(Tok::T(-t[i - 1]));
                    }
                }
                self.hnn_normalize(toks)
            }
            _ => panic!("element does not belong to this group"),
        }
    }

    /// `g^k`; single-syllable free elements take the exponent directly.
    pub fn pow(&self, g: &Elem, k: &BigInt) -> Elem {
        if let Elem::Free(s) = g {
            if s.len() == 1 {
                let e = &s[0].1 * k;
                return if e.is_zero() { self.identity() } else { Elem::Free(vec![(s[0].0, e)]) };
            }
        }
        let (mut base, mut n) = if k.is_negative() { (self.inv(g), -k) } else { (g.clone(), k.clone()) };
        let mut acc = self.identity();
        let two = BigInt::from(2);
        while !n.is_zero() {
            if (&n % &two).is_one() {
                acc = self.mul(&acc, &base);
            }
            n /= &two;
            if !n.is_zero() {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    /// An element at distance exactly `k` from the identity along a fixed geodesic ray,
    /// when the metric makes one available.
    pub fn ray(&self, k: &BigInt) -> Option<Elem> {
        if k.is_negative() {
            return None;
        }
        if k.is_zero() {
            return Some(self.identity());
        }
        match &self.kind {
            Kind::Free if !self.names.is_empty() => Some(Elem::Free(vec![(0, k.clone())])),
            Kind::FreeProduct(fs) => Some(Elem::Prod(vec![(0, fs.first()?.ray(k)?)])),
            Kind::DirectSumZ2 => Some(Elem::Bits(vec![(k - 1u32).to_u64()?])),
            _ => None,
        }
    }

    pub fn conj(&self, g: &Elem, x: &Elem) -> Elem {
        self.mul(&self.mul(g, x), &self.inv(g))
    }

    /// The element named by a generator.
    pub fn generator(&self, name: &str) -> Option<Elem> {
        match &self.kind {
            Kind::DirectSumZ2 => {
                let k: u64 = name.strip_prefix('e')?.parse().ok()?;
                Some(Elem::Bits(vec![k]))
            }
            _ => self.names.iter().position(|n| n == name).map(|i| self.generator_at(i)),
        }
    }

    fn generator_at(&self, i: usize) -> Elem {
        match &self.kind {
            Kind::Finite { .. } => {
                let GroupSpec::Finite { gens, .. } = &self.spec else { unreachable!() };
                Elem::Fin(gens[i])
            }
            Kind::Free => Elem::Free(vec![(i as u32, BigInt::one())]),
            Kind::FreeProduct(fs) => {
                let mut i = i;
                for (k, f) in fs.iter().enumerate() {
                    if i < f.names.len() {
                        let g = f.generator_at(i);
                        return self.mul(&self.identity(), &Elem::Prod(vec![(k as u32, g)]));
                    }
                    i -= f.names.len();
                }
                unreachable!()
            }
            Kind::Amalgam { f, .. } => {
                if i < f[0].names.len() {
                    self.lift_factor(1, &f[0].generator_at(i))
                } else {
                    self.lift_factor(2, &f[1].generator_at(i - f[0].names.len()))
                }
            }
            Kind::Hnn { h, .. } => {
                if i < h.names.len() {
                    self.lift_base(&h.generator_at(i))
                } else {
                    self.stable_letter()
                }
            }
            Kind::DirectSumZ2 => Elem::Bits(vec![i as u64]),
        }
    }

    /// Generators and their inverses, in a fixed order.
    pub fn symmetric_generators(&self) -> Vec<Elem> {
        let mut out = Vec::new();
        for i in 0..self.names.len() {
            let g = self.generator_at(i);
            let gi = self.inv(&g);
            let both = gi != g;
            out.push(g);
            if both {
                out.push(gi);
            }
        }
        out
    }

    /// Multiplies out a raw word of `(name, exponent)` letters.
    pub fn reduce(&self, word: &[(String, BigInt)]) -> Result<Elem, GroupError> {
        let mut acc = self.identity();
        for (name, e) in word {
            let g = self.generator(name).ok_or_else(|| GroupError::InvalidLetter(name.clone()))?;
            acc = self.mul(&acc, &self.pow(&g, e));
        }
        Ok(acc)
    }

    /// Parses and reduces a word such as `"a^2 b^-1 a"`, `"a⁰b²a¹"` or `"aB"`.
    pub fn parse(&self, text: &str) -> Result<Elem, GroupError> {
        self.reduce(&self.tokenize(text)?)
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<(String, BigInt)>, GroupError> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() || c == '*' || c == '·' || c == '.' {
                i += 1;
                continue;
            }
            if c == '1' && (i + 1 == chars.len() || !chars[i + 1].is_ascii_digit()) {
                i += 1;
                continue;
            }
            let rest: String = chars[i..].iter().collect();
            let (name, len, inverse) = self.match_name(&rest).ok_or_else(|| {
                let tail: String = chars[i..].iter().take_while(|c| !c.is_whitespace()).collect();
                GroupError::InvalidLetter(tail)
            })?;
            i += len;
            let mut exp = BigInt::one();
            if i < chars.len() && chars[i] == '^' {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let s: String = chars[i + 1..j].iter().collect();
                exp = s.parse().map_err(|_| GroupError::InvalidLetter(format!("{name}^{s}")))?;
                i = j;
            } else if i < chars.len() && (superscript(chars[i]).is_some() || chars[i] == '⁻') {
                let neg = chars[i] == '⁻';
                if neg {
                    i += 1;
                }
                let mut s = String::new();
                while i < chars.len() {
                    match superscript(chars[i]) {
                        Some(d) => s.push(d),
                        None => break,
                    }
                    i += 1;
                }
                exp = s.parse().map_err(|_| GroupError::InvalidLetter(name.clone()))?;
                if neg {
                    exp = -exp;
                }
            }
            if inverse {
                exp = -exp;
            }
            out.push((name, exp));
        }
        Ok(out)
    }

    fn match_name(&self, rest: &str) -> Option<(String, usize, bool)> {
        if let Kind::DirectSumZ2 = self.kind {
            let digits: String = rest.chars().skip(1).take_while(|c| c.is_ascii_digit()).collect();
            if rest.starts_with('e') && !digits.is_empty() {
                return Some((format!("e{digits}"), 1 + digits.len(), false));
            }
            return None;
        }
        let best = self
            .names
            .iter()
            .filter(|n| rest.starts_with(n.as_str()))
            .max_by_key(|n| n.chars().count());
        if let Some(n) = best {
            return Some((n.clone(), n.chars().count(), false));
        }
        // Upper-case shorthand for inverses of lower-case names.
        let mut cs = rest.chars();
        let first = cs.next()?;
        if first.is_uppercase() {
            let lowered: String = first.to_lowercase().chain(cs).collect();
            let best = self
                .names
                .iter()
                .filter(|n| lowered.starts_with(n.as_str()) && n.chars().next().map(|c| c.is_lowercase()).unwrap_or(false))
                .max_by_key(|n| n.chars().count());
            if let Some(n) = best {
                return Some((n.clone(), n.chars().count(), true));
            }
        }
        None
    }

    /// Text form that `parse` reads back.
    pub fn format(&self, e: &Elem) -> String {
        let parts = self.format_parts(e);
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join(" ")
        }
    }

    fn format_parts(&self, e: &Elem) -> Vec<String> {
        let pw = |n: &str, k: &BigInt| if k.is_one() { n.to_string() } else { format!("{n}^{k}") };
        match (&self.kind, e) {
            (Kind::Finite { words, .. }, Elem::Fin(x)) => {
                words[*x as usize].iter().map(|(g, k)| pw(&self.names[*g], &BigInt::from(*k))).collect()
            }
            (Kind::Free, Elem::Free(s)) => s.iter().map(|(g, k)| pw(&self.names[*g as usize], k)).collect(),
            (Kind::DirectSumZ2, Elem::Bits(b)) => b.iter().map(|k| format!("e{k}")).collect(),
            (Kind::FreeProduct(fs), Elem::Prod(s)) => {
                s.iter().flat_map(|(i, h)| fs[*i as usize].format_parts(h)).collect()
            }
            (Kind::Amalgam { f, sigma, emb }, Elem::Amal { syl, sigma: s }) => {
                let mut out: Vec<String> = syl.iter().flat_map(|(j, h)| f[*j as usize - 1].format_parts(h)).collect();
                out.extend(f[0].format_parts(&emb[0].embed(&f[0], sigma, s)));
                out
            }
            (Kind::Hnn { h, .. }, Elem::Hnn { h: hs, t }) => {
                let letter = self.names.last().unwrap();
                let mut out = Vec::new();
                for (i, x) in hs.iter().enumerate() {
                    out.extend(h.format_parts(x));
                    if i < t.len() {
                        out.push(pw(letter, &BigInt::from(t[i])));
                    }
                }
                out
            }
            _ => panic!("element does not belong to this group"),
        }
    }

    /// Elements in shortlex order of their first word, up to word length `radius`.
    pub fn ball(&self, radius: usize, limit: usize) -> Vec<Elem> {
        if let Kind::DirectSumZ2 = self.kind {
            // Chain ball: all subsets of the first `radius` coordinates.
            let r = radius.min(20) as u64;
            let mut out = Vec::new();
            for mask in 0u64..(1 << r) {
                out.push(Elem::Bits((0..r).filter(|i| mask & (1 << i) != 0).collect()));
                if out.len() >= limit {
                    break;
                }
            }
            out.sort_by_key(|e| match e {
                Elem::Bits(b) => (b.last().map(|x| x + 1).unwrap_or(0), b.clone()),
                _ => unreachable!(),
            });
            return out;
        }
        let gens = self.symmetric_generators();
        let mut seen = HashSet::new();
        let mut out = vec![self.identity()];
        seen.insert(self.identity());
        let mut frontier = vec![self.identity()];
        for _ in 0..radius {
            let mut next = Vec::new();
            for x in &frontier {
                for g in &gens {
                    let y = self.mul(x, g);
                    if seen.insert(y.clone()) {
                        out.push(y.clone());
                        next.push(y);
                        if out.len() >= limit {
                            return out;
                        }
                    }
                }
            }
            frontier = next;
        }
        out
    }

    /// Word length for the Cayley metric (the chain metric on ⊕ℤ/2); `None` past `bound`.
    pub fn length(&self, e: &Elem, bound: usize) -> Option<BigInt> {
        match (&self.kind, e) {
            (Kind::Free, Elem::Free(s)) => Some(s.iter().map(|(_, k)| k.abs()).sum()),
            (Kind::Finite { words, .. }, Elem::Fin(x)) => Some(BigInt::from(words[*x as usize].len())),
            (Kind::DirectSumZ2, Elem::Bits(b)) => Some(BigInt::from(b.last().map(|x| x + 1).unwrap_or(0))),
            (Kind::FreeProduct(fs), Elem::Prod(s)) => {
                let mut total = BigInt::zero();
                for (i, h) in s {
                    total += fs[*i as usize].length(h, bound)?;
                }
                Some(total)
            }
            _ => {
                if self.is_identity(e) {
                    return Some(BigInt::zero());
                }
                let gens = self.symmetric_generators();
                let mut seen = HashSet::from([self.identity()]);
                let mut frontier = vec![self.identity()];
                for r in 1..=bound {
                    let mut next = Vec::new();
                    for x in &frontier {
                        for g in &gens {
                            let y = self.mul(x, g);
                            if y == *e {
                                return Some(BigInt::from(r));
                            }
                            if seen.insert(y.clone()) {
                                next.push(y);
                            }
                        }
                    }
                    frontier = next;
                }
                None
            }
        }
    }

    /// Left-invariant metric `|g⁻¹h|`.
    pub fn distance(&self, g: &Elem, h: &Elem, bound: usize) -> Option<BigInt> {
        self.length(&self.mul(&self.inv(g), h), bound)
    }

    // ---- amalgams ----

    fn amal_parts(&self) -> (&[Box<Group>; 2], &Group, &[Emb; 2]) {
        match &self.kind {
            Kind::Amalgam { f, sigma, emb } => (f, sigma, emb),
            _ => panic!("not an amalgam"),
        }
    }

    /// The factor group `Γ_j`, `j ∈ {1,2}`.
    pub fn amalgam_factor(&self, j: u8) -> &Group {
        &self.amal_parts().0[j as usize - 1]
    }

    pub fn amalgam_sigma(&self) -> &Group {
        self.amal_parts().1
    }

    /// `ι_j(σ)` inside `Γ_j`.
    pub fn amalgam_embed(&self, j: u8, s: &Elem) -> Elem {
        let (f, sigma, emb) = self.amal_parts();
        emb[j as usize - 1].embed(&f[j as usize - 1], sigma, s)
    }

    /// `h = r·ι_j(σ)` with `r` the canonical representative of `h ι_j(Σ)`.
    pub fn amalgam_split(&self, j: u8, h: &Elem) -> (Elem, Elem) {
        let (f, sigma, emb) = self.amal_parts();
        emb[j as usize - 1].split(&f[j as usize - 1], sigma, h)
    }

    pub fn lift_factor(&self, j: u8, h: &Elem) -> Elem {
        self.amal_normalize(vec![(j, h.clone())])
    }

    pub fn lift_sigma(&self, s: &Elem) -> Elem {
        match &self.kind {
            Kind::Amalgam { .. } => Elem::Amal { syl: vec![], sigma: Box::new(s.clone()) },
            Kind::Hnn { .. } => self.lift_base(&self.hnn_embed(true, s)),
            _ => panic!("no edge group"),
        }
    }

    /// Which factor an amalgam element lies in (1 for `Σ` itself).
    pub fn amalgam_factor_of(&self, e: &Elem) -> Option<u8> {
        match e {
            Elem::Amal { syl, .. } if syl.is_empty() => Some(1),
            Elem::Amal { syl, .. } if syl.len() == 1 => Some(syl[0].0),
            _ => None,
        }
    }

    /// The element of `Γ_j` represented by an amalgam element lying in that factor.
    pub fn amalgam_project(&self, j: u8, e: &Elem) -> Option<Elem> {
        let Elem::Amal { syl, sigma } = e else { return None };
        let tail = self.amalgam_embed(j, sigma);
        match syl.as_slice() {
            [] => Some(tail),
            [(k, r)] if *k == j => Some(self.amalgam_factor(j).mul(r, &tail)),
            _ => None,
        }
    }

    fn amal_letters(&self, a: &Elem) -> Vec<(u8, Elem)> {
        let Elem::Amal { syl, sigma } = a else { panic!("not an amalgam element") };
        let mut v = syl.clone();
        v.push((1, self.amalgam_embed(1, sigma)));
        v
    }

    fn sigma_of(&self, j: u8, h: &Elem) -> Option<Elem> {
        let (r, s) = self.amalgam_split(j, h);
        if self.amalgam_factor(j).is_identity(&r) {
            Some(s)
        } else {
            None
        }
    }

    fn amal_normalize(&self, letters: Vec<(u8, Elem)>) -> Elem {
        let mut stack: Vec<(u8, Elem)> = Vec::new();
        for (j, h) in letters {
            let mut cur = (j, h);
            loop {
                let host = self.amalgam_factor(cur.0);
                if host.is_identity(&cur.1) {
                    break;
                }
                let Some(top) = stack.last() else {
                    stack.push(cur);
                    break;
                };
                if top.0 == cur.0 {
                    let top = stack.pop().unwrap();
                    cur = (cur.0, host.mul(&top.1, &cur.1));
                    continue;
                }
                if let Some(s) = self.sigma_of(cur.0, &cur.1) {
                    let top = stack.pop().unwrap();
                    let img = self.amalgam_embed(top.0, &s);
                    cur = (top.0, self.amalgam_factor(top.0).mul(&top.1, &img));
                    continue;
                }
                if stack.len() == 1 {
                    if let Some(s) = self.sigma_of(top.0, &top.1) {
                        stack.pop();
                        let img = self.amalgam_embed(cur.0, &s);
                        cur = (cur.0, host.mul(&img, &cur.1));
                        continue;
                    }
                }
                stack.push(cur);
                break;
            }
        }
        let sigma_group = self.amalgam_sigma();
        if stack.len() == 1 {
            if let Some(s) = self.sigma_of(stack[0].0, &stack[0].1) {
                return Elem::Amal { syl: vec![], sigma: Box::new(s) };
            }
        }
        let mut carry = sigma_group.identity();
        let mut out = Vec::with_capacity(stack.len());
        for (j, h) in stack {
            let g = self.amalgam_factor(j).mul(&self.amalgam_embed(j, &carry), &h);
            let (r, s) = self.amalgam_split(j, &g);
            out.push((j, r));
            carry = s;
        }
        Elem::Amal { syl: out, sigma: Box::new(carry) }
    }

    // ---- HNN extensions ----

    fn hnn_parts(&self) -> (&Group, &Group, &Emb, &Emb) {
        match &self.kind {
            Kind::Hnn { h, sigma, es, et } => (h, sigma, es, et),
            _ => panic!("not an HNN extension"),
        }
    }

    pub fn hnn_base(&self) -> &Group {
        self.hnn_parts().0
    }

    pub fn hnn_sigma(&self) -> &Group {
        self.hnn_parts().1
    }

    /// `ι_Σ(σ)` when `plain`, else `θ(σ)`, inside `H`.
    pub fn hnn_embed(&self, plain: bool, s: &Elem) -> Elem {
        let (h, sigma, es, et) = self.hnn_parts();
        if plain {
            es.embed(h, sigma, s)
        } else {
            et.embed(h, sigma, s)
        }
    }

    pub fn hnn_split(&self, plain: bool, x: &Elem) -> (Elem, Elem) {
        let (h, sigma, es, et) = self.hnn_parts();
        if plain {
            es.split(h, sigma, x)
        } else {
            et.split(h, sigma, x)
        }
    }

    /// `σ` with `x = ι_Σ(σ)` when `plain`, else with `x = θ(σ)`.
    pub fn hnn_member(&self, plain: bool, x: &Elem) -> Option<Elem> {
        let (r, s) = self.hnn_split(plain, x);
        if self.hnn_base().is_identity(&r) {
            Some(s)
        } else {
            None
        }
    }

    pub fn lift_base(&self, x: &Elem) -> Elem {
        Elem::Hnn { h: vec![x.clone()], t: vec![] }
    }

    pub fn stable_letter(&self) -> Elem {
        let id = self.hnn_base().identity();
        Elem::Hnn { h: vec![id.clone(), id], t: vec![1] }
    }

    /// `Some(h)` when the HNN element lies in the base group.
    pub fn hnn_project(&self, e: &Elem) -> Option<Elem> {
        match e {
            Elem::Hnn { h, t } if t.is_empty() => Some(h[0].clone()),
            _ => None,
        }
    }

    fn hnn_normalize(&self, toks: Vec<Tok>) -> Elem {
        let h = self.hnn_base();
        let mut stack: Vec<Tok> = Vec::new();
        for tok in toks {
            match tok {
                Tok::H(x) => push_h(h, &mut stack, x),
                Tok::T(e) => {
                    let n = stack.len();
                    if let Some(Tok::T(prev)) = stack.last() {
                        if *prev == -e {
                            stack.pop();
                            continue;
                        }
                    }
                    if n >= 2 {
                        if let (Tok::T(prev), Tok::H(x)) = (&stack[n - 2], &stack[n - 1]) {
                            if *prev == -e {
                                // t x t⁻¹ with x ∈ Σ, or t⁻¹ x t with x ∈ θ(Σ).
                                let plain = *prev == 1;
                                if let Some(s) = self.hnn_member(plain, x) {
                                    let y = self.hnn_embed(!plain, &s);
                                    stack.pop();
                                    stack.pop();
                                    push_h(h, &mut stack, y);
                                    continue;
                                }
                            }
                        }
                    }
                    stack.push(Tok::T(e));
                }
            }
        }
        let mut hs = vec![h.identity()];
        let mut ts = Vec::new();
        for tok in stack {
            match tok {
                Tok::H(x) => *hs.last_mut().unwrap() = x,
                Tok::T(e) => {
                    ts.push(e);
                    hs.push(h.identity());
                }
            }
        }
        let mut carry = h.identity();
        for i in 0..ts.len() {
            let g = h.mul(&carry, &hs[i]);
            // θ(σ) t = t σ and σ t⁻¹ = t⁻¹ θ(σ).
            let plain = ts[i] == -1;
            let (r, s) = self.hnn_split(plain, &g);
            hs[i] = r;
            carry = self.hnn_embed(!plain, &s);
        }
        let last = hs.len() - 1;
        hs[last] = h.mul(&carry, &hs[last]);
        Elem::Hnn { h: hs, t: ts }
    }

    /// Amalgam syllables `(factor, element of Γ_j)` left to right, with the `Σ` tail folded into the last one.
    pub fn amalgam_syllables(&self, e: &Elem) -> Vec<(u8, Elem)> {
        let Elem::Amal { syl, sigma } = e else { panic!("not an amalgam element") };
        let s_id = self.amalgam_sigma().is_identity(sigma);
        let mut out = syl.clone();
        if !s_id {
            match out.last_mut() {
                Some((j, r)) => {
                    let img = self.amalgam_embed(*j, sigma);
                    *r = self.amalgam_factor(*j).mul(r, &img);
                }
                None => out.push((1, self.amalgam_embed(1, sigma))),
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Tok {
    H(Elem),
    T(i8),
}

fn hnn_tokens(a: &Elem) -> Vec<Tok> {
    let Elem::Hnn { h, t } = a else { panic!("not an HNN element") };
    let mut out = Vec::new();
    for (i, x) in h.iter().enumerate() {
        out.push(Tok::H(x.clone()));
        if i < t.len() {
            out.push(Tok::T(t[i]));
        }
    }
    out
}

fn push_h(h: &Group, stack: &mut Vec<Tok>, x: Elem) {
    if let Some(Tok::H(top)) = stack.last_mut() {
        let m = h.mul(top, &x);
        if h.is_identity(&m) {
            stack.pop();
        } else {
            *top = m;
        }
    } else if !h.is_identity(&x) {
        stack.push(Tok::H(x));
    }
}

fn push_syllable(out: &mut Vec<(u32, BigInt)>, g: u32, e: BigInt) {
    if e.is_zero() {
        return;
    }
    match out.last_mut() {
        Some((h, f)) if *h == g => {
            *f += e;
            if f.is_zero() {
                out.pop();
            }
        }
        _ => out.push((g, e)),
    }
}

fn superscript(c: char) -> Option<char> {
    "⁰¹²³⁴⁵⁶⁷⁸⁹".chars().position(|d| d == c).map(|i| char::from(b'0' + i as u8))
}

/// Length of the cyclic reduction of a free word.
fn cyclic_length(s: &[(u32, BigInt)]) -> usize {
    let mut letters: Vec<(u32, i8)> = Vec::new();
    for (g, e) in s {
        let n = e.abs().to_usize().unwrap_or(usize::MAX);
        let sign = if e.is_positive() { 1 } else { -1 };
        letters.extend(std::iter::repeat((*g, sign)).take(n));
    }
    let (mut i, mut j) = (0, letters.len());
    while j > i + 1 && letters[i].0 == letters[j - 1].0 && letters[i].1 == -letters[j - 1].1 {
        i += 1;
        j -= 1;
    }
    j - i
}

impl Emb {
    fn new(sigma: &Group, host: &Group, e: &Embedding) -> Result<Emb, GroupError> {
        if e.images.len() != sigma.names.len() {
            return Err(GroupError::Invalid("embedding needs one image per generator".into()));
        }
        for img in &e.images {
            check_member(host, img)?;
        }
        if let Some(elems) = sigma.elements() {
            if elems.len() == 1 {
                return Ok(Emb { kind: SigmaKind::Trivial });
            }
            let Kind::Finite { words, .. } = &sigma.kind else { unreachable!() };
            let mut pairs = Vec::new();
            for (x, w) in elems.iter().zip(words) {
                let mut img = host.identity();
                for (g, k) in w {
                    img = host.mul(&img, &host.pow(&e.images[*g], &BigInt::from(*k)));
                }
                pairs.push((x.clone(), img));
            }
            let images: HashSet<&Elem> = pairs.iter().map(|(_, i)| i).collect();
            if images.len() != pairs.len() {
                return Err(GroupError::Invalid("embedding is not injective".into()));
            }
            for (a, ia) in &pairs {
                for (b, ib) in &pairs {
                    let ab = sigma.mul(a, b);
                    let iab = &pairs.iter().find(|(x, _)| *x == ab).unwrap().1;
                    if *iab != host.mul(ia, ib) {
                        return Err(GroupError::Invalid("embedding is not a homomorphism".into()));
                    }
                }
            }
            return Ok(Emb { kind: SigmaKind::Finite(pairs) });
        }
        match (&sigma.kind, &host.kind) {
            (Kind::Free, Kind::Free) if sigma.names.len() == 1 => {
                let c = e.images[0].clone();
                let Elem::Free(s) = &c else { unreachable!() };
                if s.is_empty() {
                    return Err(GroupError::Invalid("embedding is not injective".into()));
                }
                let cl = cyclic_length(s);
                Ok(Emb { kind: SigmaKind::Cyclic(c, cl) })
            }
            _ => Err(GroupError::Unsupported(
                "edge groups must be trivial, finite, or infinite cyclic inside a free group".into(),
            )),
        }
    }

    fn embed(&self, host: &Group, sigma: &Group, s: &Elem) -> Elem {
        match &self.kind {
            SigmaKind::Trivial => host.identity(),
            SigmaKind::Finite(pairs) => pairs.iter().find(|(x, _)| x == s).map(|(_, i)| i.clone()).expect("Σ element"),
            SigmaKind::Cyclic(c, _) => {
                let k = match s {
                    Elem::Free(v) if v.is_empty() => BigInt::zero(),
                    Elem::Free(v) => v[0].1.clone(),
                    _ => panic!("Σ element"),
                };
                let _ = sigma;
                host.pow(c, &k)
            }
        }
    }

    fn split(&self, host: &Group, sigma: &Group, h: &Elem) -> (Elem, Elem) {
        match &self.kind {
            SigmaKind::Trivial => (h.clone(), sigma.identity()),
            SigmaKind::Finite(pairs) => pairs
                .iter()
                .map(|(s, i)| (host.mul(h, &host.inv(i)), s.clone()))
                .min_by(|a, b| a.0.cmp(&b.0))
                .unwrap(),
            SigmaKind::Cyclic(c, cl) => {
                let len = |x: &Elem| host.length(x, 0).unwrap();
                let hl = len(h).to_usize().unwrap_or(usize::MAX / 4);
                let cln = len(c).to_usize().unwrap();
                let b = ((2 * hl + 2 * cln) / (*cl).max(1) + 2) as i64;
                let ci = host.inv(c);
                // r_k = h c^{-k}, walked outward from k = 0.
                let mut best: Option<(BigInt, Elem, i64)> = None;
                let mut consider = |r: Elem, k: i64| {
                    let key = len(&r);
                    let better = match &best {
                        None => true,
                        Some((bl, br, _)) => key < *bl || (key == *bl && r < *br),
                    };
                    if better {
                        best = Some((key, r, k));
                    }
                };
                consider(h.clone(), 0);
                let (mut up, mut down) = (h.clone(), h.clone());
                for k in 1..=b {
                    up = host.mul(&up, &ci);
                    down = host.mul(&down, c);
                    consider(up.clone(), k);
                    consider(down.clone(), -k);
                }
                let (_, r, k) = best.unwrap();
                let s = if k == 0 { sigma.identity() } else { Elem::Free(vec![(0, BigInt::from(k))]) };
                (r, s)
            }
        }
    }
}

fn check_member(g: &Group, e: &Elem) -> Result<(), GroupError> {
    let ok = match (&g.kind, e) {
        (Kind::Finite { inv, .. }, Elem::Fin(x)) => (*x as usize) < inv.len(),
        (Kind::Free, Elem::Free(s)) => {
            s.iter().all(|(x, k)| (*x as usize) < g.names.len() && !k.is_zero())
                && s.windows(2).all(|w| w[0].0 != w[1].0)
        }
        (Kind::DirectSumZ2, Elem::Bits(_)) => true,
        (Kind::FreeProduct(_), Elem::Prod(_)) => true,
        (Kind::Amalgam { .. }, Elem::Amal { .. }) => true,
        (Kind::Hnn { .. }, Elem::Hnn { h, t }) => h.len() == t.len() + 1,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(GroupError::Invalid("element does not belong to its group".into()))
    }
}

/// A subgroup given by a membership procedure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Subgroup {
    Trivial,
    Elements { elems: Vec<Elem> },
    /// `⟨c⟩` inside a free group.
    Cyclic { generator: Elem },
}

impl Subgroup {
    pub fn contains(&self, g: &Group, x: &Elem) -> bool {
        match self {
            Subgroup::Trivial => g.is_identity(x),
            Subgroup::Elements { elems } => g.is_identity(x) || elems.contains(x),
            Subgroup::Cyclic { generator } => {
                if g.is_identity(x) {
                    return true;
                }
                let (Elem::Free(c), Some(xl)) = (generator, g.length(x, 0)) else { return false };
                let cl = cyclic_length(c).max(1);
                let b = xl.to_i64().unwrap_or(i64::MAX / 2) / cl as i64 + 1;
                (1..=b).any(|k| {
                    let p = g.pow(generator, &BigInt::from(k));
                    p == *x || g.inv(&p) == *x
                })
            }
        }
    }
}

/// Searches the ball of `Γ` for `γ` with `ΣγF ∩ F = ∅` and `(σ,f) ↦ σγf` injective.
pub fn hcf_group_witness(
    g: &Group,
    in_sigma: &dyn Fn(&Elem) -> bool,
    f: &[Elem],
    radius: usize,
    limit: usize,
) -> Result<Elem, GroupError> {
    let ball = g.ball(radius, limit);
    let diffs: Vec<(Elem, bool)> = f
        .iter()
        .flat_map(|a| f.iter().map(move |b| (a, b)))
        .map(|(a, b)| (g.mul(b, &g.inv(a)), a == b))
        .collect();
    for gamma in &ball {
        let gi = g.inv(gamma);
        let disjoint = diffs.iter().all(|(d, _)| !in_sigma(&g.mul(d, &gi)));
        let injective = diffs.iter().filter(|(_, same)| !same).all(|(d, _)| !in_sigma(&g.conj(gamma, d)));
        if disjoint && injective {
            return Ok(gamma.clone());
        }
    }
    Err(GroupError::SearchExhausted(ball.len()))
}

/// Graph of groups with a chosen edge orientation per geometric edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOfGroups {
    pub vertices: Vec<GroupSpec>,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: usize,
    pub range: usize,
    pub group: GroupSpec,
    /// `s_e : Σ_e → Γ_{s(e)}`.
    pub s: Embedding,
    /// `r_e : Σ_e → Γ_{r(e)}`.
    pub r: Embedding,
}

/// How vertex groups sit inside a fundamental group built edge by edge.
#[derive(Debug, Clone)]
pub enum Built {
    Vertex(usize),
    Amalgam(Box<Built>, Box<Built>),
    Hnn(Box<Built>),
}

impl Built {
    pub fn contains(&self, v: usize) -> bool {
        match self {
            Built::Vertex(w) => *w == v,
            Built::Amalgam(a, b) => a.contains(v) || b.contains(v),
            Built::Hnn(a) => a.contains(v),
        }
    }

    /// Image of an element of vertex group `v` in the fundamental group `g`.
    pub fn lift(&self, g: &Group, v: usize, x: &Elem) -> Elem {
        match self {
            Built::Vertex(_) => x.clone(),
            Built::Amalgam(a, b) => {
                if a.contains(v) {
                    g.lift_factor(1, &a.lift(g.amalgam_factor(1), v, x))
                } else {
                    g.lift_factor(2, &b.lift(g.amalgam_factor(2), v, x))
                }
            }
            Built::Hnn(a) => g.lift_base(&a.lift(g.hnn_base(), v, x)),
        }
    }
}

impl GraphOfGroups {
    fn component(&self, start: usize, edges: &[usize]) -> Vec<usize> {
        let mut seen = vec![start];
        let mut i = 0;
        while i < seen.len() {
            let v = seen[i];
            for &e in edges {
                let ed = &self.edges[e];
                for (a, b) in [(ed.source, ed.range), (ed.range, ed.source)] {
                    if a == v && !seen.contains(&b) {
                        seen.push(b);
                    }
                }
            }
            i += 1;
        }
        seen.sort_unstable();
        seen
    }

    /// Fundamental group of the sub-graph on `verts` using `edges`, removing edges from the end.
    pub fn fundamental(&self, verts: &[usize], edges: &[usize]) -> Result<(GroupSpec, Built), GroupError> {
        let Some((&e0, rest)) = edges.split_last() else {
            if verts.len() != 1 {
                return Err(GroupError::Invalid("disconnected graph of groups".into()));
            }
            return Ok((self.vertices[verts[0]].clone(), Built::Vertex(verts[0])));
        };
        let ed = &self.edges[e0];
        let comp = self.component(ed.source, rest);
        let lift_emb = |spec: &GroupSpec, built: &Built, v: usize, emb: &Embedding| -> Result<Embedding, GroupError> {
            let host = Group::new(spec.clone())?;
            let vg = Group::new(self.vertices[v].clone())?;
            let images = emb
                .images
                .iter()
                .map(|x| {
                    check_member(&vg, x)?;
                    Ok(built.lift(&host, v, x))
                })
                .collect::<Result<_, GroupError>>()?;
            Ok(Embedding { images })
        };
        if comp.len() == verts.len() {
            let (h, built) = self.fundamental(verts, rest)?;
            // Σ = r(Σ_e), θ = s ∘ r⁻¹.
            let emb_sigma = lift_emb(&h, &built, ed.range, &ed.r)?;
            let emb_theta = lift_emb(&h, &built, ed.source, &ed.s)?;
            let letter = format!("t{e0}");
            let spec = GroupSpec::Hnn { h: Box::new(h), sigma: Box::new(ed.group.clone()), emb_sigma, emb_theta, letter };
            Ok((spec, Built::Hnn(Box::new(built))))
        } else {
            let other: Vec<usize> = verts.iter().copied().filter(|v| !comp.contains(v)).collect();
            let in_comp = |e: &usize| comp.contains(&self.edges[*e].source);
            let e1: Vec<usize> = rest.iter().copied().filter(in_comp).collect();
            let e2: Vec<usize> = rest.iter().copied().filter(|e| !in_comp(e)).collect();
            let (g1, b1) = self.fundamental(&comp, &e1)?;
            let (g2, b2) = self.fundamental(&other, &e2)?;
            let emb1 = lift_emb(&g1, &b1, ed.source, &ed.s)?;
            let emb2 = lift_emb(&g2, &b2, ed.range, &ed.r)?;
            let spec = GroupSpec::Amalgam { g1: Box::new(g1), g2: Box::new(g2), sigma: Box::new(ed.group.clone()), emb1, emb2 };
            Ok((spec, Built::Amalgam(Box::new(b1), Box::new(b2))))
        }
    }
}

/// Named presets.
pub mod presets {
    use super::*;

    fn free_elem(g: &GroupSpec, w: &str) -> Elem {
        Group::new(g.clone()).unwrap().parse(w).unwrap()
    }

    pub fn z_star_z() -> GroupSpec {
        GroupSpec::FreeProduct { factors: vec![GroupSpec::integers("a"), GroupSpec::integers("b")] }
    }

    /// ℤ *_{1} ℤ as an amalgam over the trivial group.
    pub fn z_amalgam_z() -> GroupSpec {
        GroupSpec::Amalgam {
            g1: Box::new(GroupSpec::integers("a")),
            g2: Box::new(GroupSpec::integers("b")),
            sigma: Box::new(GroupSpec::trivial()),
            emb1: Embedding { images: vec![] },
            emb2: Embedding { images: vec![] },
        }
    }

    /// ℤ * ℤ/2 as an amalgam over the trivial group.
    pub fn z_amalgam_z2() -> GroupSpec {
        GroupSpec::Amalgam {
            g1: Box::new(GroupSpec::integers("a")),
            g2: Box::new(GroupSpec::cyclic("s", 2)),
            sigma: Box::new(GroupSpec::trivial()),
            emb1: Embedding { images: vec![] },
            emb2: Embedding { images: vec![] },
        }
    }

    pub fn hnn_f2_trivial() -> GroupSpec {
        GroupSpec::Hnn {
            h: Box::new(GroupSpec::free(&["a", "b"])),
            sigma: Box::new(GroupSpec::trivial()),
            emb_sigma: Embedding { images: vec![] },
            emb_theta: Embedding { images: vec![] },
            letter: "t".into(),
        }
    }

    /// F(a1,b1) *_{c} F(a2,b2) with c ↦ [a1,b1] and c ↦ [a2,b2]⁻¹.
    pub fn surface_genus2() -> GroupSpec {
        let f1 = GroupSpec::free(&["a1", "b1"]);
        let f2 = GroupSpec::free(&["a2", "b2"]);
        let c1 = free_elem(&f1, "a1 b1 a1^-1 b1^-1");
        let c2 = free_elem(&f2, "b2 a2 b2^-1 a2^-1");
        GroupSpec::Amalgam {
            g1: Box::new(f1),
            g2: Box::new(f2),
            sigma: Box::new(GroupSpec::integers("c")),
            emb1: Embedding { images: vec![c1] },
            emb2: Embedding { images: vec![c2] },
        }
    }

    pub fn by_name(name: &str) -> Option<GroupSpec> {
        Some(match name {
            "Z" => GroupSpec::integers("a"),
            "F2" => GroupSpec::free(&["a", "b"]),
            "Z*Z" | "free-product-ZZ" => z_amalgam_z(),
            "Z*Z2" | "free-product-Z-Z2" => z_amalgam_z2(),
            "HNN-F2" | "hnn-f2" => hnn_f2_trivial(),
            "surface" | "surface-genus2" => surface_genus2(),
            "sum-Z2" => GroupSpec::DirectSumZ2,
            _ => return None,
        })
    }
}

/// Maps group elements to small ids for compact transcripts.
#[derive(Debug, Default, Clone)]
pub struct ElemTable {
    pub elems: Vec<Elem>,
    index: HashMap<Elem, usize>,
}

impl ElemTable {
    pub fn id(&mut self, e: &Elem) -> usize {
        if let Some(&i) = self.index.get(e) {
            return i;
        }
        self.elems.push(e.clone());
        self.index.insert(e.clone(), self.elems.len() - 1);
        self.elems.len() - 1
    }
}
