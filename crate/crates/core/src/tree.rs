//! Alphabets, vertices of the rooted k-ary tree and permutations of the alphabet.
//!
//! Letters are the integers `0..k`. A vertex is a finite word over the
//! alphabet; the empty word is the root. Permutations compose right factor
//! first: `p * q` maps `x` to `p(q(x))`.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DIGITS: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// A finite alphabet `{0, .., k-1}` with `2 <= k <= 36`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(u8);

impl Alphabet {
    pub fn new(k: usize) -> Result<Self> {
        if (2..=DIGITS.len()).contains(&k) {
            Ok(Alphabet(k as u8))
        } else {
            Err(Error::AlphabetSize(k))
        }
    }

    pub fn binary() -> Self {
        Alphabet(2)
    }

    #[inline]
    pub fn size(self) -> usize {
        self.0 as usize
    }

    pub fn letters(self) -> impl Iterator<Item = u8> {
        0..self.0
    }

    /// `k^n`, the number of vertices on level `n`.
    pub fn level_size(self, n: usize) -> usize {
        self.size().pow(n as u32)
    }

    /// Number of vertices of the finite tree `X^[s]` (levels `0..s`).
    pub fn tree_size(self, s: usize) -> usize {
        (self.level_size(s) - 1) / (self.size() - 1)
    }

    pub fn check_letter(self, x: usize) -> Result<u8> {
        if x < self.size() {
            Ok(x as u8)
        } else {
            Err(Error::LetterOutOfRange { letter: x, k: self.size() })
        }
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = Error;
    fn try_from(k: usize) -> Result<Self> {
        Alphabet::new(k)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.size()
    }
}

/// A vertex of the tree: a word over the alphabet.
///
/// Vertices do not carry their alphabet; operations that take a vertex check
/// the letters against the alphabet they work over.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex(Vec<u8>);

impl Vertex {
    pub fn root() -> Self {
        Vertex(Vec::new())
    }

    pub fn new(k: Alphabet, letters: &[usize]) -> Result<Self> {
        letters
            .iter()
            .map(|&x| k.check_letter(x))
            .collect::<Result<Vec<_>>>()
            .map(Vertex)
    }

    pub(crate) fn from_raw(letters: Vec<u8>) -> Self {
        Vertex(letters)
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, x: u8) -> Vertex {
        let mut v = self.0.clone();
        v.push(x);
        Vertex(v)
    }

    pub fn concat(&self, other: &Vertex) -> Vertex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Vertex(v)
    }

    pub fn is_prefix_of(&self, other: &Vertex) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn check(&self, k: Alphabet) -> Result<()> {
        match self.0.iter().find(|&&x| x as usize >= k.size()) {
            Some(&x) => Err(Error::LetterOutOfRange { letter: x as usize, k: k.size() }),
            None => Ok(()),
        }
    }

    /// Position of this vertex in the lexicographic order of its level.
    pub fn rank(&self, k: Alphabet) -> usize {
        self.0.iter().fold(0, |acc, &x| acc * k.size() + x as usize)
    }

    pub fn from_rank(k: Alphabet, len: usize, mut rank: usize) -> Vertex {
        let mut letters = vec![0u8; len];
        for slot in letters.iter_mut().rev() {
            *slot = (rank % k.size()) as u8;
            rank /= k.size();
        }
        Vertex(letters)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &x in &self.0 {
            write!(f, "{}", DIGITS[x as usize] as char)?;
        }
        Ok(())
    }
}

impl FromStr for Vertex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Vertex> {
        s.chars()
            .map(|c| {
                c.to_digit(36)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::Invalid(format!("bad vertex `{s}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Vertex)
    }
}

impl Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All `k^n` words of length `n`, in lexicographic order.
pub fn level(k: Alphabet, n: usize) -> Vec<Vertex> {
    (0..k.level_size(n)).map(|r| Vertex::from_rank(k, n, r)).collect()
}

/// A permutation of the alphabet, stored as its image array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Perm(Vec<u8>);

impl Perm {
    pub fn identity(k: Alphabet) -> Perm {
        Perm(k.letters().collect())
    }

    pub fn from_images(images: Vec<usize>) -> Result<Perm> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &y in &images {
            if y >= n || std::mem::replace(&mut seen[y], true) {
                return Err(Error::InvalidPerm(images));
            }
        }
        Alphabet::new(n)?;
        Ok(Perm(images.into_iter().map(|y| y as u8).collect()))
    }

    pub(crate) fn from_raw(images: Vec<u8>) -> Perm {
        Perm(images)
    }

    /// The standard cycle `(0 1 .. k-1)`.
    pub fn cycle(k: Alphabet) -> Perm {
        let n = k.size() as u8;
        Perm((0..n).map(|x| (x + 1) % n).collect())
    }

    pub fn transposition(k: Alphabet, x: u8, y: u8) -> Perm {
        let mut p = Perm::identity(k);
        p.0.swap(x as usize, y as usize);
        p
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet(self.0.len() as u8)
    }

    pub fn images(&self) -> &[u8] {
        &self.0
    }

    #[inline]
    pub fn apply(&self, x: u8) -> u8 {
        self.0[x as usize]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &y)| i == y as usize)
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u8; self.0.len()];
        for (x, &y) in self.0.iter().enumerate() {
            inv[y as usize] = x as u8;
        }
        Perm(inv)
    }

    /// `self * q`, applying `q` first.
    pub fn compose(&self, q: &Perm) -> Result<Perm> {
        if self.0.len() != q.0.len() {
            return Err(Error::AlphabetMismatch { left: self.0.len(), right: q.0.len() });
        }
        Ok(Perm(q.0.iter().map(|&y| self.0[y as usize]).collect()))
    }

    pub fn pow(&self, e: i64) -> Perm {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut acc = Perm::identity(self.alphabet());
        for _ in 0..e.unsigned_abs() {
            acc = &acc * &base;
        }
        acc
    }

    /// Parity as an element of `Z/2` (0 for even).
    pub fn parity(&self) -> u8 {
        let mut seen = vec![false; self.0.len()];
        let mut transpositions = 0usize;
        for start in 0..self.0.len() {
            let mut len = 0usize;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.0[x] as usize;
                len += 1;
            }
            transpositions += len.saturating_sub(1);
        }
        (transpositions % 2) as u8
    }

    /// Every permutation of the alphabet, in lexicographic order of images.
    pub fn all(k: Alphabet) -> Vec<Perm> {
        fn rec(prefix: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Perm>) {
            if prefix.len() == used.len() {
                out.push(Perm(prefix.clone()));
                return;
            }
            for y in 0..used.len() {
                if !used[y] {
                    used[y] = true;
                    prefix.push(y as u8);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[y] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; k.size()], &mut out);
        out
    }
}

/// Composition `p * q` with `q` applied first.
pub fn compose_perm(p: &Perm, q: &Perm) -> Result<Perm> {
    p.compose(q)
}

impl Mul for &Perm {
    type Output = Perm;
    fn mul(self, q: &Perm) -> Perm {
        self.compose(q).expect("permutations over different alphabets")
    }
}

impl TryFrom<Vec<usize>> for Perm {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Perm> {
        Perm::from_images(v)
    }
}

impl From<Perm> for Vec<usize> {
    fn from(p: Perm) -> Vec<usize> {
        p.0.into_iter().map(usize::from).collect()
    }
}

/// Cycle notation, `()` for the identity.
impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("()");
        }
        let mut seen = vec![false; self.0.len()];
        for start in 0..self.0.len() {
            if seen[start] || self.0[start] as usize == start {
                continue;
            }
            f.write_str("(")?;
            let mut x = start;
            let mut first = true;
            while !seen[x] {
                seen[x] = true;
                if !first {
                    f.write_str(" ")?;
                }
                write!(f, "{x}")?;
                first = false;
                x = self.0[x] as usize;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}
