//! Normal forms in `Z^{d₁} ⋆ Z^{d₂}`.
//!
//! A word is an alternating sequence of nonzero letters `(i, v)` with
//! `v ∈ Z^{d_i}`. Its length is `|g| = Σ ‖v‖₁`, its size `s(g)` the number
//! of letters, and the word metric is `d(g, h) = |g⁻¹h|`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    /// 1 or 2.
    pub factor: u8,
    pub v: Vec<i64>,
}

impl Letter {
    pub fn new(factor: u8, v: Vec<i64>) -> Self {
        Self { factor, v }
    }

    pub fn norm(&self) -> u64 {
        self.v.iter().map(|x| x.unsigned_abs()).sum()
    }

    fn is_zero(&self) -> bool {
        self.v.iter().all(|x| *x == 0)
    }
}

/// A group element in normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FreeWord {
    letters: Vec<Letter>,
}

impl FreeWord {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Normalizes an arbitrary letter sequence: merges neighbors from the
    /// same factor and drops zero letters.
    pub fn from_letters(letters: Vec<Letter>) -> Result<Self> {
        let mut w = Self::identity();
        for l in letters {
            if l.factor != 1 && l.factor != 2 {
                return Err(Error::Schema(format!("factor tag must be 1 or 2, got {}", l.factor)));
            }
            if !w.letters.is_empty() && w.letters.last().is_some_and(|t| t.factor == l.factor && t.v.len() != l.v.len()) {
                return Err(Error::Schema("letters of one factor must have equal rank".into()));
            }
            w.push_letter(&l);
        }
        Ok(w)
    }

    /// Single letter `(factor, v)`; the identity when `v = 0`.
    pub fn letter(factor: u8, v: Vec<i64>) -> Self {
        let l = Letter::new(factor, v);
        if l.is_zero() {
            Self::identity()
        } else {
            Self { letters: vec![l] }
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn length(&self) -> u64 {
        self.letters.iter().map(Letter::norm).sum()
    }

    pub fn size(&self) -> usize {
        self.letters.len()
    }

    pub fn first_factor(&self) -> Option<u8> {
        self.letters.first().map(|l| l.factor)
    }

    pub fn last_factor(&self) -> Option<u8> {
        self.letters.last().map(|l| l.factor)
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self
                .letters
                .iter()
                .rev()
                .map(|l| Letter::new(l.factor, l.v.iter().map(|x| -x).collect()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &FreeWord) -> Self {
        let mut w = self.clone();
        w.mul_assign(other);
        w
    }

    /// `self ← self · other`; returns the change in length.
    pub fn mul_assign(&mut self, other: &FreeWord) -> i64 {
        other.letters.iter().map(|l| self.push_letter(l)).sum()
    }

    fn push_letter(&mut self, l: &Letter) -> i64 {
        if l.is_zero() {
            return 0;
        }
        match self.letters.last_mut() {
            Some(top) if top.factor == l.factor => {
                let old = top.norm() as i64;
                for (a, b) in top.v.iter_mut().zip(&l.v) {
                    *a += b;
                }
                let new = top.norm() as i64;
                if new == 0 {
                    self.letters.pop();
                }
                new - old
            }
            _ => {
                self.letters.push(l.clone());
                l.norm() as i64
            }
        }
    }

    /// The first `p` letters.
    pub fn prefix(&self, p: usize) -> Result<Self> {
        if p > self.size() {
            return Err(Error::Range(format!("prefix of size {p} requested from a word of size {}", self.size())));
        }
        Ok(Self { letters: self.letters[..p].to_vec() })
    }

    /// Whether `self` is a prefix of `other` in the sense of [`FreeWord::prefix`].
    pub fn is_prefix_of(&self, other: &FreeWord) -> bool {
        self.size() <= other.size() && self.letters[..] == other.letters[..self.size()]
    }

    /// `d(self, other) = |self⁻¹ other|`.
    pub fn distance(&self, other: &FreeWord) -> u64 {
        let common = self
            .letters
            .iter()
            .zip(&other.letters)
            .take_while(|(a, b)| a == b)
            .count();
        let tail = |w: &FreeWord, from: usize| w.letters[from..].iter().map(Letter::norm).sum::<u64>();
        match (self.letters.get(common), other.letters.get(common)) {
            (Some(a), Some(b)) if a.factor == b.factor => {
                let mid: u64 = a.v.iter().zip(&b.v).map(|(x, y)| (y - x).unsigned_abs()).sum();
                tail(self, common + 1) + mid + tail(other, common + 1)
            }
            _ => tail(self, common) + tail(other, common),
        }
    }

    /// Every letter belongs to a factor of the stated rank.
    pub fn check_ranks(&self, d1: usize, d2: usize) -> Result<()> {
        for l in &self.letters {
            let want = if l.factor == 1 { d1 } else { d2 };
            if l.v.len() != want {
                return Err(Error::Schema(format!(
                    "letter of factor {} has {} coordinates, expected {want}",
                    l.factor,
                    l.v.len()
                )));
            }
        }
        Ok(())
    }
}

/// Canonical order: by length, then lexicographically by letters.
impl Ord for FreeWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.length()
            .cmp(&other.length())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for FreeWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FreeWord {
    /// `e`, or letters such as `a^2 b[1,-1] a` separated by spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("e");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            let name = if l.factor == 1 { 'a' } else { 'b' };
            match l.v.as_slice() {
                [1] => write!(f, "{name}")?,
                [x] => write!(f, "{name}^{x}")?,
                v => {
                    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    write!(f, "{name}[{}]", parts.join(","))?
                }
            }
        }
        Ok(())
    }
}

impl FromStr for FreeWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "e" || s.is_empty() {
            return Ok(Self::identity());
        }
        let bad = |t: &str| Error::Schema(format!("cannot parse letter `{t}`"));
        let mut letters = Vec::new();
        for tok in s.split(|c: char| c.is_whitespace() || c == '·' || c == '*').filter(|t| !t.is_empty()) {
            let factor = match tok.chars().next() {
                Some('a') => 1,
                Some('b') => 2,
                _ => return Err(bad(tok)),
            };
            let rest = &tok[1..];
            let v = if rest.is_empty() {
                vec![1]
            } else if let Some(e) = rest.strip_prefix('^') {
                vec![e.parse::<i64>().map_err(|_| bad(tok))?]
            } else if let Some(inner) = rest.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                inner
                    .split(',')
                    .map(|x| x.trim().parse::<i64>().map_err(|_| bad(tok)))
                    .collect::<Result<Vec<_>>>()?
            } else {
                return Err(bad(tok));
            };
            letters.push(Letter::new(factor, v));
        }
        Self::from_letters(letters)
    }
}

impl Serialize for FreeWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<(u8, &Vec<i64>)> = self.letters.iter().map(|l| (l.factor, &l.v)).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FreeWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<(u8, Vec<i64>)> = Vec::deserialize(d)?;
        FreeWord::from_letters(raw.into_iter().map(|(f, v)| Letter::new(f, v)).collect())
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> FreeWord {
        s.parse().unwrap()
    }

    #[test]
    fn cancellation_and_merging() {
        assert!(w("a^2").mul(&w("a^-2")).is_identity());
        assert_eq!(w("a b").mul(&w("b^-1 a")), w("a^2"));
        let g = w("a^3 b^-1");
        assert_eq!((g.length(), g.size()), (4, 2));
        assert!(g.mul(&g.inverse()).is_identity());
    }

    #[test]
    fn mul_assign_tracks_length() {
        let mut g = w("a^2 b a[1]");
        let h = w("a^-1 b^-1 a^3");
        let before = g.length() as i64;
        let delta = g.mul_assign(&h);
        assert_eq!(g, w("a^2 a^3"));
        assert_eq!(before + delta, g.length() as i64);
    }

    #[test]
    fn prefixes_and_distance() {
        let g = w("a^3 b^3 a^3");
        assert_eq!(g.prefix(2).unwrap(), w("a^3 b^3"));
        assert_eq!(g.prefix(3).unwrap(), g);
        assert!(matches!(g.prefix(4), Err(Error::Range(_))));
        assert!(w("a^3").is_prefix_of(&g));
        assert!(!w("a^2").is_prefix_of(&g));
        for (x, y) in [("a^3 b", "a^3 b^-2 a"), ("a b", "b a"), ("e", "a b"), ("a[2,1]", "a[-1,1] b")] {
            let (x, y) = (w(x), w(y));
            assert_eq!(x.distance(&y), x.inverse().mul(&y).length());
        }
    }

    #[test]
    fn display_round_trip() {
        for s in ["e", "a", "a^-2 b^3", "b[1,-2] a[0,3] b[4,0]"] {
            assert_eq!(w(s).to_string(), s);
        }
        let j = serde_json::to_string(&w("a^2 b^-1")).unwrap();
        assert_eq!(j, "[[1,[2]],[2,[-1]]]");
        assert_eq!(serde_json::from_str::<FreeWord>(&j).unwrap(), w("a^2 b^-1"));
    }
}
