//! Amino-acid sequences, site-restricted variant spaces, and the default
//! random mutation and crossover operators.
//!
//! Site positions are 1-indexed at every public boundary that takes user
//! input (configs, prompts) and stored 0-indexed inside [`VariantSpace`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The 20 canonical amino acids in their conventional order.
pub const CANONICAL_RESIDUES: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeqError {
    #[error("empty sequence")]
    Empty,
    #[error("invalid residue {letter:?} at position {position}")]
    InvalidResidue { letter: char, position: usize },
    #[error("sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid site list: {0}")]
    InvalidSites(String),
    #[error("invalid residue set: {0}")]
    InvalidResidueSet(String),
}

/// Index of a canonical residue letter in [`CANONICAL_RESIDUES`].
#[inline]
pub fn residue_index(letter: u8) -> Option<usize> {
    CANONICAL_RESIDUES.iter().position(|&r| r == letter)
}

/// The canonical amino-acid alphabet.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Alphabet;

impl Alphabet {
    pub const LEN: usize = 20;

    pub fn residues(&self) -> &'static [u8; 20] {
        CANONICAL_RESIDUES
    }

    pub fn index(&self, letter: u8) -> Option<usize> {
        residue_index(letter)
    }

    pub fn letter(&self, index: usize) -> Option<u8> {
        CANONICAL_RESIDUES.get(index).copied()
    }

    pub fn contains(&self, letter: u8) -> bool {
        residue_index(letter).is_some()
    }
}

/// An ordered subset of the canonical alphabet that mutation operators draw
/// from. Defaults to all 20 residues; reduced sets exist for small synthetic
/// landscapes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResidueSet {
    letters: Vec<u8>,
}

impl ResidueSet {
    pub fn canonical() -> Self {
        Self {
            letters: CANONICAL_RESIDUES.to_vec(),
        }
    }

    pub fn new(letters: &str) -> Result<Self, SeqError> {
        let bytes = letters.as_bytes().to_vec();
        if bytes.len() < 2 {
            return Err(SeqError::InvalidResidueSet(format!(
                "need at least 2 residues, got {:?}",
                letters
            )));
        }
        for (position, &b) in bytes.iter().enumerate() {
            if residue_index(b).is_none() {
                return Err(SeqError::InvalidResidue {
                    letter: b as char,
                    position,
                });
            }
            if bytes[..position].contains(&b) {
                return Err(SeqError::InvalidResidueSet(format!(
                    "duplicate residue {:?}",
                    b as char
                )));
            }
        }
        Ok(Self { letters: bytes })
    }

    /// The first `q` canonical residues.
    pub fn first(q: usize) -> Result<Self, SeqError> {
        if !(2..=20).contains(&q) {
            return Err(SeqError::InvalidResidueSet(format!(
                "q must be in 2..=20, got {q}"
            )));
        }
        Ok(Self {
            letters: CANONICAL_RESIDUES[..q].to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn contains(&self, letter: u8) -> bool {
        self.letters.contains(&letter)
    }

    pub fn index_of(&self, letter: u8) -> Option<usize> {
        self.letters.iter().position(|&r| r == letter)
    }

    pub fn as_str(&self) -> &str {
        // letters are validated ASCII
        std::str::from_utf8(&self.letters).expect("ascii residues")
    }
}

impl Default for ResidueSet {
    fn default() -> Self {
        Self::canonical()
    }
}

/// A non-empty string of canonical amino-acid letters.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Box<[u8]>);

impl Sequence {
    pub fn new(text: &str) -> Result<Self, SeqError> {
        Self::from_bytes(text.as_bytes().to_vec())
    }

    fn from_bytes(bytes: Vec<u8>) -> Result<Self, SeqError> {
        if bytes.is_empty() {
            return Err(SeqError::Empty);
        }
        if let Some(position) = bytes.iter().position(|&b| residue_index(b).is_none()) {
            let letter = String::from_utf8_lossy(&bytes[position..])
                .chars()
                .next()
                .unwrap_or('?');
            return Err(SeqError::InvalidResidue { letter, position });
        }
        Ok(Self(bytes.into_boxed_slice()))
    }

    /// Caller guarantees every byte is canonical.
    pub(crate) fn from_valid(bytes: Vec<u8>) -> Self {
        debug_assert!(!bytes.is_empty() && bytes.iter().all(|&b| residue_index(b).is_some()));
        Self(bytes.into_boxed_slice())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("ascii residues")
    }

    pub fn residue(&self, index: usize) -> u8 {
        self.0[index]
    }

    /// Letters separated by single spaces, the rendering used in prompts.
    pub fn spaced(&self) -> String {
        let mut out = String::with_capacity(self.len() * 2);
        for (i, &b) in self.0.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push(b as char);
        }
        out
    }

    /// Copy with the residue at `index` replaced.
    pub fn with_residue(&self, index: usize, letter: u8) -> Result<Self, SeqError> {
        if residue_index(letter).is_none() {
            return Err(SeqError::InvalidResidue {
                letter: letter as char,
                position: index,
            });
        }
        let mut bytes = self.0.to_vec();
        bytes[index] = letter;
        Ok(Self(bytes.into_boxed_slice()))
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence({})", self.as_str())
    }
}

impl FromStr for Sequence {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for Sequence {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Sequence::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Number of positions at which `a` and `b` differ.
pub fn hamming(a: &Sequence, b: &Sequence) -> Result<usize, SeqError> {
    if a.len() != b.len() {
        return Err(SeqError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(hamming_unchecked(a.as_bytes(), b.as_bytes()))
}

#[inline]
pub(crate) fn hamming_unchecked(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// A wild-type sequence together with the positions that may be mutated.
///
/// Variants are the `arity()`-length strings of residues at those sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantSpace {
    name: String,
    wild_type: Sequence,
    sites: Vec<usize>,
    residues: ResidueSet,
}

impl VariantSpace {
    /// `sites` are 1-indexed and must be strictly increasing.
    pub fn new(
        name: impl Into<String>,
        wild_type: Sequence,
        sites: &[usize],
    ) -> Result<Self, SeqError> {
        if sites.is_empty() {
            return Err(SeqError::InvalidSites("no sites".into()));
        }
        for w in sites.windows(2) {
            if w[0] >= w[1] {
                return Err(SeqError::InvalidSites(format!(
                    "sites must be strictly increasing, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if sites[0] < 1 || *sites.last().unwrap() > wild_type.len() {
            return Err(SeqError::InvalidSites(format!(
                "sites must lie in 1..={}",
                wild_type.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            sites: sites.iter().map(|s| s - 1).collect(),
            wild_type,
            residues: ResidueSet::canonical(),
        })
    }

    /// Every position of the wild type is mutable.
    pub fn all_sites(name: impl Into<String>, wild_type: Sequence) -> Self {
        Self {
            name: name.into(),
            sites: (0..wild_type.len()).collect(),
            wild_type,
            residues: ResidueSet::canonical(),
        }
    }

    pub fn with_residues(mut self, residues: ResidueSet) -> Result<Self, SeqError> {
        let wt = self.wild_variant();
        if let Some(position) = wt.as_bytes().iter().position(|&b| !residues.contains(b)) {
            return Err(SeqError::InvalidResidueSet(format!(
                "wild-type residue {:?} at site {} is outside {}",
                wt.residue(position) as char,
                self.sites[position] + 1,
                residues.as_str()
            )));
        }
        self.residues = residues;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn wild_type(&self) -> &Sequence {
        &self.wild_type
    }

    /// 0-indexed site positions.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn one_based_sites(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s + 1).collect()
    }

    pub fn residues(&self) -> &ResidueSet {
        &self.residues
    }

    pub fn arity(&self) -> usize {
        self.sites.len()
    }

    pub fn covers_all_positions(&self) -> bool {
        self.sites.len() == self.wild_type.len()
    }

    /// |residues|^arity, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        (self.residues.len() as u128)
            .checked_pow(self.arity() as u32)
            .unwrap_or(u128::MAX)
    }

    pub fn wild_variant(&self) -> Sequence {
        Sequence::from_valid(self.sites.iter().map(|&i| self.wild_type.residue(i)).collect())
    }

    pub fn extract_sites(&self, full: &Sequence) -> Result<Sequence, SeqError> {
        if full.len() != self.wild_type.len() {
            return Err(SeqError::LengthMismatch {
                left: full.len(),
                right: self.wild_type.len(),
            });
        }
        Ok(Sequence::from_valid(
            self.sites.iter().map(|&i| full.residue(i)).collect(),
        ))
    }

    pub fn apply_variant(&self, variant: &Sequence) -> Result<Sequence, SeqError> {
        if variant.len() != self.arity() {
            return Err(SeqError::LengthMismatch {
                left: variant.len(),
                right: self.arity(),
            });
        }
        let mut bytes = self.wild_type.as_bytes().to_vec();
        for (&site, &r) in self.sites.iter().zip(variant.as_bytes()) {
            bytes[site] = r;
        }
        Ok(Sequence::from_valid(bytes))
    }

    /// Uniform draw from the residue set at every site.
    pub fn random_variant<R: Rng + ?Sized>(&self, rng: &mut R) -> Sequence {
        let letters = self.residues.letters();
        Sequence::from_valid(
            (0..self.arity())
                .map(|_| letters[rng.random_range(0..letters.len())])
                .collect(),
        )
    }
}

pub fn extract_sites(full: &Sequence, space: &VariantSpace) -> Result<Sequence, SeqError> {
    space.extract_sites(full)
}

pub fn apply_variant(space: &VariantSpace, variant: &Sequence) -> Result<Sequence, SeqError> {
    space.apply_variant(variant)
}

/// Substitutes one uniformly chosen position with one of the other 19
/// canonical residues.
pub fn random_mutation<R: Rng + ?Sized>(s: &Sequence, rng: &mut R) -> Sequence {
    mutate_within(s, &ResidueSet::canonical(), rng)
}

/// Like [`random_mutation`] but draws the replacement from `residues`
/// (excluding the current residue).
pub fn mutate_within<R: Rng + ?Sized>(s: &Sequence, residues: &ResidueSet, rng: &mut R) -> Sequence {
    let position = rng.random_range(0..s.len());
    let current = s.residue(position);
    let letters = residues.letters();
    let replacement = match residues.index_of(current) {
        Some(cur) => {
            let mut pick = rng.random_range(0..letters.len() - 1);
            if pick >= cur {
                pick += 1;
            }
            letters[pick]
        }
        None => letters[rng.random_range(0..letters.len())],
    };
    let mut bytes = s.as_bytes().to_vec();
    bytes[position] = replacement;
    Sequence::from_valid(bytes)
}

/// Default crossover: uniform or one-point with equal probability.
pub fn crossover<R: Rng + ?Sized>(
    s0: &Sequence,
    s1: &Sequence,
    rng: &mut R,
) -> Result<Sequence, SeqError> {
    crossover_with(s0, s1, 0.5, rng)
}

/// Uniform crossover with probability `uniform_prob`, otherwise one-point
/// crossover (prefix from `s0`, suffix from `s1`) at a split drawn from
/// `1..len`.
pub fn crossover_with<R: Rng + ?Sized>(
    s0: &Sequence,
    s1: &Sequence,
    uniform_prob: f64,
    rng: &mut R,
) -> Result<Sequence, SeqError> {
    if s0.len() != s1.len() {
        return Err(SeqError::LengthMismatch {
            left: s0.len(),
            right: s1.len(),
        });
    }
    let a = s0.as_bytes();
    let b = s1.as_bytes();
    let bytes: Vec<u8> = if rng.random::<f64>() < uniform_prob {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| if rng.random::<bool>() { x } else { y })
            .collect()
    } else if a.len() < 2 {
        a.to_vec()
    } else {
        let split = rng.random_range(1..a.len());
        a[..split].iter().chain(&b[split..]).copied().collect()
    };
    Ok(Sequence::from_valid(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) const GB1_WT: &str = "MTYKLILNGKTLKGETTTEAVDAATAEKVFKQYANDNGVDGEWTYDDATKTFTVTE";

    fn seq(s: &str) -> Sequence {
        Sequence::new(s).unwrap()
    }

    fn gb1() -> VariantSpace {
        VariantSpace::new("GB1", seq(GB1_WT), &[39, 40, 41, 54]).unwrap()
    }

    #[test]
    fn alphabet_is_a_bijection() {
        assert_eq!(CANONICAL_RESIDUES.len(), 20);
        for (i, &r) in CANONICAL_RESIDUES.iter().enumerate() {
            assert!(r.is_ascii_uppercase());
            assert_eq!(residue_index(r), Some(i));
            assert_eq!(Alphabet.letter(i), Some(r));
        }
    }

    #[test]
    fn rejects_noncanonical_letters() {
        for bad in ["VDGB", "XAAA", "vdgv", "AJ", "O", "U", "Z"] {
            assert!(matches!(
                Sequence::new(bad),
                Err(SeqError::InvalidResidue { .. })
            ));
        }
        assert_eq!(Sequence::new(""), Err(SeqError::Empty));
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&seq("VDGV"), &seq("VDGV")).unwrap(), 0);
        assert_eq!(hamming(&seq("VDGV"), &seq("VDGA")).unwrap(), 1);
        assert_eq!(hamming(&seq("QHVR"), &seq("RLIV")).unwrap(), 4);
        let err = hamming(&seq("VDG"), &seq("VDGV")).unwrap_err();
        assert_eq!(err, SeqError::LengthMismatch { left: 3, right: 4 });
    }

    #[test]
    fn gb1_sites_extract_to_vdgv() {
        assert_eq!(GB1_WT.len(), 56);
        let space = gb1();
        assert_eq!(space.wild_variant().as_str(), "VDGV");
        assert_eq!(space.extract_sites(&seq(GB1_WT)).unwrap().as_str(), "VDGV");
        // position 1 is not a site
        let off = seq(GB1_WT).with_residue(0, b'A').unwrap();
        assert_eq!(space.extract_sites(&off).unwrap().as_str(), "VDGV");
    }

    #[test]
    fn all_sites_extract_is_identity() {
        let wt = seq(GB1_WT);
        let space = VariantSpace::all_sites("full", wt.clone());
        assert_eq!(space.extract_sites(&wt).unwrap(), wt);
    }

    #[test]
    fn apply_variant_examples() {
        let space = gb1();
        assert_eq!(space.apply_variant(&seq("VDGV")).unwrap().as_str(), GB1_WT);
        let full = space.apply_variant(&seq("ADGV")).unwrap();
        assert_eq!(hamming(&full, &seq(GB1_WT)).unwrap(), 1);
        assert_eq!(full.residue(38), b'A');
        assert!(space.apply_variant(&seq("VDG")).is_err());
        assert!(space.extract_sites(&seq("VDGV")).is_err());
    }

    #[test]
    fn apply_extract_round_trip() {
        let space = gb1();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v = space.random_variant(&mut rng);
            assert_eq!(space.extract_sites(&space.apply_variant(&v).unwrap()).unwrap(), v);
        }
    }

    #[test]
    fn site_validation() {
        let wt = seq("ACDE");
        assert!(VariantSpace::new("x", wt.clone(), &[]).is_err());
        assert!(VariantSpace::new("x", wt.clone(), &[0]).is_err());
        assert!(VariantSpace::new("x", wt.clone(), &[5]).is_err());
        assert!(VariantSpace::new("x", wt.clone(), &[2, 2]).is_err());
        assert!(VariantSpace::new("x", wt, &[3, 1]).is_err());
    }

    #[test]
    fn mutation_changes_exactly_one_position() {
        let s = seq("VDGV");
        for seed in 0..500 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_mutation(&s, &mut rng);
            assert_eq!(hamming(&s, &m).unwrap(), 1);
        }
    }

    #[test]
    fn mutation_position_frequencies() {
        let s = seq("VDGV");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 4];
        let mut residue_counts = [0usize; 20];
        let draws = 10_000;
        for _ in 0..draws {
            let m = random_mutation(&s, &mut rng);
            let pos = (0..4).find(|&i| m.residue(i) != s.residue(i)).unwrap();
            counts[pos] += 1;
            if pos == 0 {
                residue_counts[residue_index(m.residue(0)).unwrap()] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 0.25).abs() <= 0.02, "frequency {f}");
        }
        // the original residue is never drawn
        assert_eq!(residue_counts[residue_index(b'V').unwrap()], 0);
    }

    #[test]
    fn mutation_is_seed_deterministic() {
        let s = seq(GB1_WT);
        let a = random_mutation(&s, &mut ChaCha8Rng::seed_from_u64(42));
        let b = random_mutation(&s, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn mutation_within_reduced_set() {
        let set = ResidueSet::first(4).unwrap();
        let s = seq("ACDE");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m = mutate_within(&s, &set, &mut rng);
            assert!(m.as_bytes().iter().all(|&b| set.contains(b) || b == b'E'));
            assert_eq!(hamming(&s, &m).unwrap(), 1);
        }
    }

    #[test]
    fn crossover_identical_parents() {
        let s = seq(GB1_WT);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert_eq!(crossover(&s, &s, &mut rng).unwrap(), s);
        }
    }

    #[test]
    fn crossover_closure_and_length_check() {
        let a = seq("AAAA");
        let c = seq("CCCC");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = crossover(&a, &c, &mut rng).unwrap();
            assert!(x.as_bytes().iter().all(|&b| b == b'A' || b == b'C'));
        }
        assert!(crossover(&a, &seq("CCC"), &mut rng).is_err());
    }

    #[test]
    fn uniform_crossover_frequencies() {
        let a = seq("AAAA");
        let c = seq("CCCC");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let x = crossover_with(&a, &c, 1.0, &mut rng).unwrap();
            for (i, &b) in x.as_bytes().iter().enumerate() {
                if b == b'A' {
                    counts[i] += 1;
                }
            }
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 0.5).abs() <= 0.02, "frequency {f}");
        }
    }

    #[test]
    fn one_point_crossover_is_prefix_suffix() {
        let a = seq("AAAAAA");
        let c = seq("CCCCCC");
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let x = crossover_with(&a, &c, 0.0, &mut rng).unwrap();
            let s = x.as_str();
            let split = s.find('C').expect("suffix from s1");
            assert!(split >= 1);
            assert!(s[split..].bytes().all(|b| b == b'C'));
        }
    }

    #[test]
    fn sequence_serde_round_trip() {
        let s = seq("VDGV");
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "\"VDGV\"");
        let back: Sequence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<Sequence>("\"VDGX\"").is_err());
    }
}
