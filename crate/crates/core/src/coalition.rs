//! Coalitions of players stored as a dynamic bitset.
//!
//! Player `i` is a member iff bit `i` is set. The width `n` is carried with
//! the bits so that complements and equality are always taken relative to
//! the same player set. Bits at positions `>= n` are kept clear.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Coalition {
    n: usize,
    words: Box<[u64]>,
}

fn word_count(n: usize) -> usize {
    n.div_ceil(WORD)
}

impl Coalition {
    /// The empty coalition over `n` players.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            words: vec![0; word_count(n)].into_boxed_slice(),
        }
    }

    /// The grand coalition `N`.
    pub fn full(n: usize) -> Self {
        let mut c = Self::empty(n);
        for w in c.words.iter_mut() {
            *w = u64::MAX;
        }
        c.clear_tail();
        c
    }

    /// Builds a coalition from player indices.
    ///
    /// Panics if a player index is `>= n`.
    pub fn from_players<I: IntoIterator<Item = usize>>(n: usize, players: I) -> Self {
        let mut c = Self::empty(n);
        for p in players {
            c.insert(p);
        }
        c
    }

    /// Builds a coalition from the low `n` bits of `mask` (`n <= 64`).
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= WORD, "from_mask needs n <= 64, got {n}");
        let mut c = Self::empty(n);
        if n > 0 {
            c.words[0] = mask;
            c.clear_tail();
        }
        c
    }

    /// The coalition as a `u64` mask, if it fits.
    pub fn to_mask(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    /// Parses the 0/1 string encoding: character `i` is player `i`'s membership.
    pub fn parse_bits(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut c = Self::empty(s.chars().count());
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '1' => c.insert(i),
                '0' => {}
                other => {
                    return Err(Error::Parse(format!(
                        "coalition string {s:?} contains {other:?}, expected 0 or 1"
                    )))
                }
            }
        }
        Ok(c)
    }

    /// Encodes as an `n`-character 0/1 string.
    pub fn to_bits(&self) -> String {
        (0..self.n).map(|i| if self.contains(i) { '1' } else { '0' }).collect()
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn contains(&self, player: usize) -> bool {
        player < self.n && (self.words[player / WORD] >> (player % WORD)) & 1 == 1
    }

    pub fn insert(&mut self, player: usize) {
        assert!(player < self.n, "player {player} out of range for width {}", self.n);
        self.words[player / WORD] |= 1 << (player % WORD);
    }

    pub fn remove(&mut self, player: usize) {
        if player < self.n {
            self.words[player / WORD] &= !(1 << (player % WORD));
        }
    }

    pub fn with(&self, player: usize) -> Self {
        let mut c = self.clone();
        c.insert(player);
        c
    }

    fn check_width(&self, other: &Self) {
        assert_eq!(self.n, other.n, "coalition widths differ");
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        self.check_width(other);
        let words = self
            .words
            .iter()
            .zip(other.words.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self { n: self.n, words }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & !b)
    }

    /// `N \ self`.
    pub fn complement(&self) -> Self {
        let mut c = Self {
            n: self.n,
            words: self.words.iter().map(|w| !w).collect(),
        };
        c.clear_tail();
        c
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.check_width(other);
        self.words.iter().zip(other.words.iter()).all(|(&a, &b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.check_width(other);
        self.words.iter().zip(other.words.iter()).all(|(&a, &b)| a & b == 0)
    }

    /// `|self ∩ other|` without allocating.
    pub fn intersection_len(&self, other: &Self) -> usize {
        self.check_width(other);
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(&a, &b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// `self ⊆ a ∪ b` without allocating.
    pub fn is_subset_of_union(&self, a: &Self, b: &Self) -> bool {
        self.check_width(a);
        self.check_width(b);
        self.words
            .iter()
            .zip(a.words.iter().zip(b.words.iter()))
            .all(|(&s, (&x, &y))| s & !(x | y) == 0)
    }

    /// Member indices in increasing order.
    pub fn players(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD + tz)
                }
            })
        })
    }

    /// All subsets of this coalition, `2^|self|` of them, starting with `∅`.
    ///
    /// Panics if the coalition has more than 63 members.
    pub fn subsets(&self) -> impl Iterator<Item = Coalition> + '_ {
        let members: Vec<usize> = self.players().collect();
        assert!(members.len() < 64, "too many members to enumerate subsets");
        let n = self.n;
        (0u64..(1u64 << members.len())).map(move |m| {
            let mut c = Coalition::empty(n);
            let mut bits = m;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                c.insert(members[j]);
                bits &= bits - 1;
            }
            c
        })
    }

    fn clear_tail(&mut self) {
        let rem = self.n % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

/// Orders by width, then size, then lexicographically by member indices.
impl Ord for Coalition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.len().cmp(&other.len()))
            .then_with(|| self.players().cmp(other.players()))
    }
}

impl PartialOrd for Coalition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bits())
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, p) in self.players().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}/{}", self.n)
    }
}

/// All coalitions of sizes `1..=max_order` over `n` players, in canonical order.
pub fn subsets_up_to_order(n: usize, max_order: usize) -> Vec<Coalition> {
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for size in 1..=max_order.min(n) {
        combinations(n, size, 0, &mut stack, &mut out);
    }
    out
}

fn combinations(n: usize, size: usize, start: usize, stack: &mut Vec<usize>, out: &mut Vec<Coalition>) {
    if stack.len() == size {
        out.push(Coalition::from_players(n, stack.iter().copied()));
        return;
    }
    let need = size - stack.len();
    for i in start..=(n - need) {
        stack.push(i);
        combinations(n, size, i + 1, stack, out);
        stack.pop();
    }
}
