//! Words in the chain Dehn-twist generators of a closed genus-`g` surface.
//!
//! The chain consists of `2g + 1` simple closed curves `c_1, ..., c_{2g+1}`
//! with consecutive curves meeting once. Letter `a` is the positive twist
//! along `c_1`, `b` along `c_2`, and so on; upper case denotes the inverse
//! twist. The surface involution sends `c_i` to `c_{2g+2-i}`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("genus must be at least 2, got {0}")]
    Genus(usize),
    #[error("letter '{letter}' at position {position} is outside the generators a..{last} for genus {genus}")]
    OutOfRange {
        letter: char,
        position: usize,
        genus: usize,
        last: char,
    },
    #[error("character '{ch}' at position {position} is not a generator letter")]
    NotALetter { ch: char, position: usize },
    #[error("generator index {index} is outside 1..={max}")]
    Index { index: usize, max: usize },
}

/// Sign of a Dehn twist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Twist {
    Positive,
    Negative,
}

impl Twist {
    pub fn as_i64(self) -> i64 {
        match self {
            Twist::Positive => 1,
            Twist::Negative => -1,
        }
    }

    pub fn inverse(self) -> Twist {
        match self {
            Twist::Positive => Twist::Negative,
            Twist::Negative => Twist::Positive,
        }
    }
}

/// One letter of a twist word: a generator index in `1..=2g+1` and a sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub index: usize,
    pub twist: Twist,
}

impl Letter {
    pub fn new(index: usize, twist: Twist) -> Self {
        Letter { index, twist }
    }

    pub fn to_char(self) -> char {
        let base = if self.twist == Twist::Positive { b'a' } else { b'A' };
        (base + (self.index as u8 - 1)) as char
    }
}

/// A signed word in the chain generators of a genus-`g` surface.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TwistWord {
    genus: usize,
    letters: Vec<Letter>,
}

/// Number of chain generators for a given genus.
pub fn generator_count(genus: usize) -> usize {
    2 * genus + 1
}

impl TwistWord {
    pub fn new(genus: usize, letters: Vec<Letter>) -> Result<Self, WordError> {
        if genus < 2 {
            return Err(WordError::Genus(genus));
        }
        let max = generator_count(genus);
        if let Some(bad) = letters.iter().find(|l| l.index == 0 || l.index > max) {
            return Err(WordError::Index { index: bad.index, max });
        }
        Ok(TwistWord { genus, letters })
    }

    pub fn identity(genus: usize) -> Result<Self, WordError> {
        Self::new(genus, Vec::new())
    }

    /// Parses a word written with lower case for positive twists and upper
    /// case for their inverses.
    pub fn parse(text: &str, genus: usize) -> Result<Self, WordError> {
        if genus < 2 {
            return Err(WordError::Genus(genus));
        }
        let max = generator_count(genus);
        let last = (b'a' + max as u8 - 1) as char;
        let mut letters = Vec::with_capacity(text.len());
        for (position, ch) in text.chars().enumerate() {
            if !ch.is_ascii_alphabetic() {
                return Err(WordError::NotALetter { ch, position });
            }
            let index = (ch.to_ascii_lowercase() as u8 - b'a') as usize + 1;
            if index > max {
                return Err(WordError::OutOfRange { letter: ch, position, genus, last });
            }
            let twist = if ch.is_ascii_lowercase() { Twist::Positive } else { Twist::Negative };
            letters.push(Letter { index, twist });
        }
        Ok(TwistWord { genus, letters })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Index of the curve paired with `index` under the surface involution.
    pub fn mirror_index(&self, index: usize) -> usize {
        mirror_index(self.genus, index)
    }

    /// Reverses the word and maps every index `i` to `2g + 2 - i`, keeping signs.
    pub fn reverse_mirror(&self) -> TwistWord {
        let letters = self
            .letters
            .iter()
            .rev()
            .map(|l| Letter::new(self.mirror_index(l.index), l.twist))
            .collect();
        TwistWord { genus: self.genus, letters }
    }

    /// The inverse mapping class: reversed word with every sign flipped.
    pub fn inverse(&self) -> TwistWord {
        let letters = self
            .letters
            .iter()
            .rev()
            .map(|l| Letter::new(l.index, l.twist.inverse()))
            .collect();
        TwistWord { genus: self.genus, letters }
    }

    /// The same word with every twist sign flipped (not reversed).
    pub fn flip_signs(&self) -> TwistWord {
        let letters = self
            .letters
            .iter()
            .map(|l| Letter::new(l.index, l.twist.inverse()))
            .collect();
        TwistWord { genus: self.genus, letters }
    }

    pub fn is_reverse_palindromic(&self) -> bool {
        let k = self.letters.len();
        (0..k).all(|j| {
            let (l, r) = (self.letters[j], self.letters[k - 1 - j]);
            l.index == self.mirror_index(r.index) && l.twist == r.twist
        })
    }

    /// Draws a uniformly random reverse-palindromic word of the given length.
    ///
    /// The first half is free; the second half is the mirrored reversal. For
    /// odd lengths the middle letter must be its own mirror, which forces the
    /// middle generator `g + 1`.
    pub fn random_reverse_palindromic(
        genus: usize,
        length: usize,
        seed: u64,
    ) -> Result<Self, WordError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_reverse_palindromic_with(genus, length, &mut rng)
    }

    pub fn random_reverse_palindromic_with<R: Rng + ?Sized>(
        genus: usize,
        length: usize,
        rng: &mut R,
    ) -> Result<Self, WordError> {
        if genus < 2 {
            return Err(WordError::Genus(genus));
        }
        let max = generator_count(genus);
        let random_twist = |rng: &mut R| {
            if rng.gen_bool(0.5) { Twist::Positive } else { Twist::Negative }
        };
        let half: Vec<Letter> = (0..length / 2)
            .map(|_| Letter::new(rng.gen_range(1..=max), random_twist(rng)))
            .collect();
        let mut letters = half.clone();
        if length % 2 == 1 {
            letters.push(Letter::new(genus + 1, random_twist(rng)));
        }
        letters.extend(
            half.iter()
                .rev()
                .map(|l| Letter::new(mirror_index(genus, l.index), l.twist)),
        );
        Ok(TwistWord { genus, letters })
    }
}

pub fn mirror_index(genus: usize, index: usize) -> usize {
    2 * genus + 2 - index
}

impl fmt::Display for TwistWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

/// Parses at genus 2; use [`TwistWord::parse`] for other genera.
impl FromStr for TwistWord {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TwistWord::parse(s, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_case_convention() {
        let w = TwistWord::parse("aBcDe", 2).unwrap();
        let got: Vec<(usize, i64)> = w.letters().iter().map(|l| (l.index, l.twist.as_i64())).collect();
        assert_eq!(got, vec![(1, 1), (2, -1), (3, 1), (4, -1), (5, 1)]);
        assert!(TwistWord::parse("", 2).unwrap().is_empty());
    }

    #[test]
    fn parses_genus_three_table_word() {
        let w = TwistWord::parse("EEBCFDfGCEAbDBEFCC", 3).unwrap();
        assert_eq!(w.len(), 18);
        assert!(w.letters().iter().all(|l| (1..=7).contains(&l.index)));
        assert_eq!(w.letters()[6], Letter::new(6, Twist::Positive));
    }

    #[test]
    fn rejects_bad_letters() {
        assert!(matches!(
            TwistWord::parse("abf", 2),
            Err(WordError::OutOfRange { letter: 'f', position: 2, .. })
        ));
        assert!(matches!(
            TwistWord::parse("ab1", 2),
            Err(WordError::NotALetter { ch: '1', .. })
        ));
        assert!(matches!(TwistWord::parse("a", 1), Err(WordError::Genus(1))));
    }

    #[test]
    fn classifies_reverse_palindromes() {
        assert!(TwistWord::parse("aBcDe", 2).unwrap().is_reverse_palindromic());
        assert!(!TwistWord::parse("abcDe", 2).unwrap().is_reverse_palindromic());
        assert!(!TwistWord::parse("aBcAe", 2).unwrap().is_reverse_palindromic());
        assert!(TwistWord::parse("EEBCFDfGCEAbDBEFCC", 3).unwrap().is_reverse_palindromic());
        assert!(TwistWord::identity(2).unwrap().is_reverse_palindromic());
    }

    #[test]
    fn odd_length_middle_letter() {
        for seed in 0..50 {
            let w = TwistWord::random_reverse_palindromic(2, 5, seed).unwrap();
            assert_eq!(w.letters()[2].index, 3);
        }
    }

    #[test]
    fn length_two_pairs_mirror_letters() {
        let w = TwistWord::random_reverse_palindromic(2, 2, 7).unwrap();
        let (l, r) = (w.letters()[0], w.letters()[1]);
        assert_eq!(r.index, 6 - l.index);
        assert_eq!(l.twist, r.twist);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = TwistWord::random_reverse_palindromic(3, 18, 42).unwrap();
        let b = TwistWord::random_reverse_palindromic(3, 18, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.is_reverse_palindromic());
    }

    fn word_strategy() -> impl Strategy<Value = (usize, String)> {
        (2usize..=4).prop_flat_map(|g| {
            let n = generator_count(g) as u8;
            let letter = (0..n, any::<bool>()).prop_map(|(i, up)| {
                let c = (b'a' + i) as char;
                if up { c.to_ascii_uppercase() } else { c }
            });
            (Just(g), proptest::collection::vec(letter, 0..24).prop_map(|v| v.into_iter().collect()))
        })
    }

    proptest! {
        #[test]
        fn render_round_trips((g, s) in word_strategy()) {
            let w = TwistWord::parse(&s, g).unwrap();
            prop_assert_eq!(w.to_string(), s);
        }

        #[test]
        fn predicate_is_fixed_point_of_involution((g, s) in word_strategy()) {
            let w = TwistWord::parse(&s, g).unwrap();
            prop_assert_eq!(w.is_reverse_palindromic(), w.reverse_mirror() == w);
            prop_assert_eq!(w.reverse_mirror().reverse_mirror(), w);
        }

        #[test]
        fn random_words_are_reverse_palindromic(g in 2usize..=4, len in 1usize..40, seed: u64) {
            let w = TwistWord::random_reverse_palindromic(g, len, seed).unwrap();
            prop_assert_eq!(w.len(), len);
            prop_assert!(w.is_reverse_palindromic());
        }
    }
}
