//! Pairwise Potts energy `E(x) = sum_i h_i(x_i) + sum_{i<j} J_ij(x_i, x_j)`
//! and the signed energy-difference fitness built on it.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Arity, Landscape, LandscapeError};
use crate::candidate::ObjectiveVector;
use crate::seq::{ResidueSet, SeqError, Sequence};

/// Orientation of fitness relative to energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be 1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// Coupling matrix for one position pair `i < j` (0-indexed), stored
/// row-major as `matrix[a * q + b]` for residue indices `a` at `i`, `b` at `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub i: usize,
    pub j: usize,
    pub matrix: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PottsParams {
    length: usize,
    alphabet: ResidueSet,
    fields: Vec<f64>,
    couplings: Vec<CouplingBlock>,
}

impl PottsParams {
    /// `fields` is `length x q` row-major. Blocks must satisfy `i < j <
    /// length`, appear at most once per pair, and hold `q x q` entries.
    pub fn new(
        length: usize,
        alphabet: ResidueSet,
        fields: Vec<f64>,
        mut couplings: Vec<CouplingBlock>,
    ) -> Result<Self, LandscapeError> {
        let q = alphabet.len();
        if length == 0 {
            return Err(LandscapeError::Invalid("Potts length must be positive".into()));
        }
        if fields.len() != length * q {
            return Err(LandscapeError::Invalid(format!(
                "fields have {} entries, expected {length}x{q}",
                fields.len()
            )));
        }
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(LandscapeError::Invalid("non-finite field entry".into()));
        }
        couplings.sort_by_key(|b| (b.i, b.j));
        for (n, block) in couplings.iter().enumerate() {
            if block.i >= block.j || block.j >= length {
                return Err(LandscapeError::Invalid(format!(
                    "coupling ({}, {}) must satisfy i < j < {length}",
                    block.i, block.j
                )));
            }
            if n > 0 && (couplings[n - 1].i, couplings[n - 1].j) == (block.i, block.j) {
                return Err(LandscapeError::Invalid(format!(
                    "coupling ({}, {}) given twice",
                    block.i, block.j
                )));
            }
            if block.matrix.len() != q * q {
                return Err(LandscapeError::Invalid(format!(
                    "coupling ({}, {}) has {} entries, expected {q}x{q}",
                    block.i,
                    block.j,
                    block.matrix.len()
                )));
            }
            if block.matrix.iter().any(|v| !v.is_finite()) {
                return Err(LandscapeError::Invalid(format!(
                    "coupling ({}, {}) has a non-finite entry",
                    block.i, block.j
                )));
            }
        }
        Ok(Self {
            length,
            alphabet,
            fields,
            couplings,
        })
    }

    pub fn zeros(length: usize, alphabet: ResidueSet) -> Self {
        let q = alphabet.len();
        Self {
            length,
            fields: vec![0.0; length * q],
            alphabet,
            couplings: Vec::new(),
        }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn q(&self) -> usize {
        self.alphabet.len()
    }

    pub fn alphabet(&self) -> &ResidueSet {
        &self.alphabet
    }

    pub fn field(&self, position: usize, residue: usize) -> f64 {
        self.fields[position * self.q() + residue]
    }

    pub fn couplings(&self) -> &[CouplingBlock] {
        &self.couplings
    }

    /// Residue indices of `seq` in this model's alphabet.
    pub fn encode(&self, seq: &Sequence) -> Result<Vec<usize>, LandscapeError> {
        if seq.len() != self.length {
            return Err(SeqError::LengthMismatch {
                left: seq.len(),
                right: self.length,
            }
            .into());
        }
        seq.as_bytes()
            .iter()
            .enumerate()
            .map(|(position, &b)| {
                self.alphabet.index_of(b).ok_or_else(|| {
                    LandscapeError::Invalid(format!(
                        "residue {:?} at position {} is outside the Potts alphabet {}",
                        b as char,
                        position + 1,
                        self.alphabet.as_str()
                    ))
                })
            })
            .collect()
    }

    pub fn energy_encoded(&self, x: &[usize]) -> f64 {
        let q = self.q();
        let mut e: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &a)| self.fields[i * q + a])
            .sum();
        for block in &self.couplings {
            e += block.matrix[x[block.i] * q + x[block.j]];
        }
        e
    }

    pub fn from_json_str(text: &str) -> Result<(Self, Sign), LandscapeError> {
        let file: PottsFile = serde_json::from_str(text)
            .map_err(|e| LandscapeError::Invalid(format!("Potts parameter file: {e}")))?;
        file.into_params()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Sign), LandscapeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LandscapeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self, sign: Sign) -> String {
        serde_json::to_string_pretty(&PottsFile::from_params(self, sign))
            .expect("Potts parameters serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>, sign: Sign) -> Result<(), LandscapeError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string(sign)).map_err(|source| LandscapeError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Draws a wild type from `P(x) ~ exp(beta * sign * E(x))` with a Gibbs
    /// sampler, giving a sequence in a favourable but not optimal region.
    pub fn sample_wild_type<R: Rng + ?Sized>(
        &self,
        sign: Sign,
        beta: f64,
        sweeps: usize,
        rng: &mut R,
    ) -> Sequence {
        let q = self.q();
        let mut neighbours: Vec<Vec<(usize, &[f64], bool)>> = vec![Vec::new(); self.length];
        for b in &self.couplings {
            neighbours[b.i].push((b.j, &b.matrix, true));
            neighbours[b.j].push((b.i, &b.matrix, false));
        }
        let mut x: Vec<usize> = (0..self.length).map(|_| rng.random_range(0..q)).collect();
        let mut weights = vec![0.0; q];
        for _ in 0..sweeps {
            for i in 0..self.length {
                for (a, w) in weights.iter_mut().enumerate() {
                    let mut local = self.field(i, a);
                    for &(other, m, i_first) in &neighbours[i] {
                        local += if i_first {
                            m[a * q + x[other]]
                        } else {
                            m[x[other] * q + a]
                        };
                    }
                    *w = beta * sign.factor() * local;
                }
                let top = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = weights.iter().map(|w| (w - top).exp()).sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = q - 1;
                for (a, w) in weights.iter().enumerate() {
                    u -= (w - top).exp();
                    if u <= 0.0 {
                        pick = a;
                        break;
                    }
                }
                x[i] = pick;
            }
        }
        let letters = self.alphabet.letters();
        Sequence::from_valid(x.into_iter().map(|a| letters[a]).collect())
    }
}

pub fn potts_energy(params: &PottsParams, seq: &Sequence) -> Result<f64, LandscapeError> {
    Ok(params.energy_encoded(&params.encode(seq)?))
}

/// `sign * (E(seq) - E(wild_type))`; exactly 0 for the wild type.
pub fn potts_fitness(
    params: &PottsParams,
    seq: &Sequence,
    wild_type: &Sequence,
    sign: Sign,
) -> Result<f64, LandscapeError> {
    if seq == wild_type {
        params.encode(seq)?;
        return Ok(0.0);
    }
    Ok(sign.factor() * (potts_energy(params, seq)? - potts_energy(params, wild_type)?))
}

/// The sign under which single mutants of `wild_type` have non-positive mean
/// fitness, matching the convention that natural sequences sit near a local
/// optimum.
pub fn calibrate_sign(params: &PottsParams, wild_type: &Sequence) -> Result<Sign, LandscapeError> {
    let x = params.encode(wild_type)?;
    let base = params.energy_encoded(&x);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut y = x.clone();
    for i in 0..x.len() {
        for a in 0..params.q() {
            if a == x[i] {
                continue;
            }
            y[i] = a;
            total += params.energy_encoded(&y) - base;
            count += 1;
        }
        y[i] = x[i];
    }
    Ok(if count > 0 && total / count as f64 > 0.0 {
        Sign::Minus
    } else {
        Sign::Plus
    })
}

/// Random parameters: fields ~ N(0, field_scale^2); each pair carries a
/// coupling block with probability `coupling_density`, entries
/// N(0, coupling_scale^2). The first `q` canonical residues form the
/// alphabet.
pub fn generate_potts_params(
    length: usize,
    q: usize,
    field_scale: f64,
    coupling_scale: f64,
    coupling_density: f64,
    seed: u64,
) -> Result<PottsParams, LandscapeError> {
    if length < 2 {
        return Err(LandscapeError::Invalid(format!("L must be at least 2, got {length}")));
    }
    if !(field_scale >= 0.0 && field_scale.is_finite())
        || !(coupling_scale >= 0.0 && coupling_scale.is_finite())
    {
        return Err(LandscapeError::Invalid("scales must be finite and nonnegative".into()));
    }
    if !(0.0..=1.0).contains(&coupling_density) {
        return Err(LandscapeError::Invalid(format!(
            "coupling density must lie in [0, 1], got {coupling_density}"
        )));
    }
    let alphabet = ResidueSet::first(q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field_dist = Normal::new(0.0, field_scale).expect("valid scale");
    let coupling_dist = Normal::new(0.0, coupling_scale).expect("valid scale");
    let fields: Vec<f64> = (0..length * q).map(|_| field_dist.sample(&mut rng)).collect();
    let mut couplings = Vec::new();
    for i in 0..length {
        for j in (i + 1)..length {
            if rng.random::<f64>() < coupling_density {
                couplings.push(CouplingBlock {
                    i,
                    j,
                    matrix: (0..q * q).map(|_| coupling_dist.sample(&mut rng)).collect(),
                });
            }
        }
    }
    PottsParams::new(length, alphabet, fields, couplings)
}

/// Serialized parameter file. `J` indices are 0-based positions.
#[derive(Debug, Serialize, Deserialize)]
struct PottsFile {
    #[serde(rename = "L")]
    length: usize,
    alphabet: String,
    h: Vec<Vec<f64>>,
    #[serde(rename = "J", default)]
    couplings: Vec<CouplingRecord>,
    #[serde(default = "default_sign")]
    sign: Sign,
}

fn default_sign() -> Sign {
    Sign::Plus
}

#[derive(Debug, Serialize, Deserialize)]
struct CouplingRecord {
    i: usize,
    j: usize,
    matrix: Vec<Vec<f64>>,
}

impl PottsFile {
    fn into_params(self) -> Result<(PottsParams, Sign), LandscapeError> {
        let alphabet = ResidueSet::new(&self.alphabet)?;
        let q = alphabet.len();
        if self.h.len() != self.length || self.h.iter().any(|row| row.len() != q) {
            return Err(LandscapeError::Invalid(format!(
                "h must be {}x{q}",
                self.length
            )));
        }
        let mut blocks = Vec::with_capacity(self.couplings.len());
        for rec in self.couplings {
            if rec.matrix.len() != q || rec.matrix.iter().any(|row| row.len() != q) {
                return Err(LandscapeError::Invalid(format!(
                    "J({}, {}) must be {q}x{q}",
                    rec.i, rec.j
                )));
            }
            blocks.push(CouplingBlock {
                i: rec.i,
                j: rec.j,
                matrix: rec.matrix.into_iter().flatten().collect(),
            });
        }
        let params = PottsParams::new(
            self.length,
            alphabet,
            self.h.into_iter().flatten().collect(),
            blocks,
        )?;
        Ok((params, self.sign))
    }

    fn from_params(p: &PottsParams, sign: Sign) -> Self {
        let q = p.q();
        Self {
            length: p.length,
            alphabet: p.alphabet.as_str().to_string(),
            h: p.fields.chunks(q).map(|c| c.to_vec()).collect(),
            couplings: p
                .couplings
                .iter()
                .map(|b| CouplingRecord {
                    i: b.i,
                    j: b.j,
                    matrix: b.matrix.chunks(q).map(|c| c.to_vec()).collect(),
                })
                .collect(),
            sign,
        }
    }
}

/// Full-length Potts landscape scored relative to a wild type.
#[derive(Debug, Clone)]
pub struct PottsLandscape {
    name: String,
    params: PottsParams,
    wild_type: Sequence,
    sign: Sign,
    wild_energy: f64,
}

impl PottsLandscape {
    pub fn new(
        name: impl Into<String>,
        params: PottsParams,
        wild_type: Sequence,
        sign: Sign,
    ) -> Result<Self, LandscapeError> {
        let wild_energy = potts_energy(&params, &wild_type)?;
        Ok(Self {
            name: name.into(),
            params,
            wild_type,
            sign,
            wild_energy,
        })
    }

    pub fn params(&self) -> &PottsParams {
        &self.params
    }

    pub fn wild_type(&self) -> &Sequence {
        &self.wild_type
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn fitness(&self, seq: &Sequence) -> Result<f64, LandscapeError> {
        if seq == &self.wild_type {
            return Ok(0.0);
        }
        Ok(self.sign.factor() * (potts_energy(&self.params, seq)? - self.wild_energy))
    }
}

impl Landscape for PottsLandscape {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> Arity {
        Arity::Full(self.params.length)
    }

    fn evaluate(&self, seq: &Sequence) -> Result<ObjectiveVector, LandscapeError> {
        Ok(ObjectiveVector::scalar(self.fitness(seq)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> Sequence {
        Sequence::new(s).unwrap()
    }

    /// L=2 over {A, C}: h1(A)=1, h2(C)=-0.5, J12(A,C)=2.
    fn hand_params() -> PottsParams {
        let alphabet = ResidueSet::new("AC").unwrap();
        let fields = vec![1.0, 0.0, 0.0, -0.5];
        let couplings = vec![CouplingBlock {
            i: 0,
            j: 1,
            matrix: vec![0.0, 2.0, 0.0, 0.0],
        }];
        PottsParams::new(2, alphabet, fields, couplings).unwrap()
    }

    #[test]
    fn zero_params_give_zero_energy() {
        let p = PottsParams::zeros(4, ResidueSet::canonical());
        for s in ["ACDE", "WWWW", "VDGV"] {
            assert_eq!(potts_energy(&p, &seq(s)).unwrap(), 0.0);
        }
    }

    #[test]
    fn hand_summed_energy() {
        let e = potts_energy(&hand_params(), &seq("AC")).unwrap();
        assert!((e - 2.5).abs() < 1e-12);
        assert!((potts_energy(&hand_params(), &seq("CA")).unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_order_does_not_matter() {
        let p = generate_potts_params(8, 5, 1.0, 1.0, 0.7, 3).unwrap();
        let mut reversed = p.couplings().to_vec();
        reversed.reverse();
        let p2 = PottsParams::new(8, p.alphabet().clone(), p.fields.clone(), reversed).unwrap();
        let s = seq("ACDEFACD");
        let a = potts_energy(&p, &s).unwrap();
        let b = potts_energy(&p2, &s).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn energy_rejects_bad_input() {
        let p = hand_params();
        assert!(potts_energy(&p, &seq("ACA")).is_err());
        assert!(potts_energy(&p, &seq("AD")).is_err());
    }

    #[test]
    fn invalid_blocks_rejected() {
        let a = ResidueSet::new("AC").unwrap();
        let f = vec![0.0; 4];
        let blk = |i, j| CouplingBlock { i, j, matrix: vec![0.0; 4] };
        assert!(PottsParams::new(2, a.clone(), f.clone(), vec![blk(1, 0)]).is_err());
        assert!(PottsParams::new(2, a.clone(), f.clone(), vec![blk(0, 2)]).is_err());
        assert!(PottsParams::new(2, a.clone(), f.clone(), vec![blk(0, 1), blk(0, 1)]).is_err());
        assert!(PottsParams::new(2, a, vec![0.0; 3], vec![]).is_err());
    }

    #[test]
    fn wild_type_fitness_is_zero_and_sign_flips() {
        let p = generate_potts_params(10, 20, 1.0, 0.5, 0.3, 11).unwrap();
        let wt = seq("ACDEFGHIKL");
        let other = seq("ACDEFGHIKW");
        assert_eq!(potts_fitness(&p, &wt, &wt, Sign::Plus).unwrap(), 0.0);
        let plus = potts_fitness(&p, &other, &wt, Sign::Plus).unwrap();
        let minus = potts_fitness(&p, &other, &wt, Sign::Minus).unwrap();
        assert_eq!(minus, -plus);
    }

    #[test]
    fn calibrated_sign_makes_single_mutants_negative_on_average() {
        let p = generate_potts_params(30, 20, 1.0, 0.3, 0.2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wt = p.sample_wild_type(Sign::Plus, 1.0, 20, &mut rng);
        let sign = calibrate_sign(&p, &wt).unwrap();
        let mut total = 0.0;
        let mut n = 0;
        for i in 0..wt.len() {
            for &r in p.alphabet().letters() {
                if r == wt.residue(i) {
                    continue;
                }
                let m = wt.with_residue(i, r).unwrap();
                total += potts_fitness(&p, &m, &wt, sign).unwrap();
                n += 1;
            }
        }
        assert!(total / (n as f64) < 0.0);
    }

    #[test]
    fn gibbs_wild_type_beats_random_sequences() {
        let p = generate_potts_params(20, 20, 1.0, 0.3, 0.3, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let wt = p.sample_wild_type(Sign::Plus, 2.0, 30, &mut rng);
        let e_wt = potts_energy(&p, &wt).unwrap();
        let space = crate::seq::VariantSpace::all_sites("x", wt.clone());
        let below = (0..200)
            .filter(|_| potts_energy(&p, &space.random_variant(&mut rng)).unwrap() < e_wt)
            .count();
        assert!(below > 190, "{below}");
    }

    #[test]
    fn generation_is_deterministic_and_counts_blocks() {
        let a = generate_potts_params(5, 20, 1.0, 1.0, 1.0, 42).unwrap();
        let b = generate_potts_params(5, 20, 1.0, 1.0, 1.0, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.couplings().len(), 10);
        assert!(generate_potts_params(5, 20, 1.0, 1.0, 0.0, 42).unwrap().couplings().is_empty());
    }

    #[test]
    fn generation_validates_ranges() {
        assert!(generate_potts_params(1, 20, 1.0, 1.0, 0.5, 0).is_err());
        assert!(generate_potts_params(5, 20, -1.0, 1.0, 0.5, 0).is_err());
        assert!(generate_potts_params(5, 20, 1.0, 1.0, 1.5, 0).is_err());
        assert!(generate_potts_params(5, 21, 1.0, 1.0, 0.5, 0).is_err());
    }

    #[test]
    fn coupling_free_landscape_is_additive() {
        let p = generate_potts_params(6, 8, 1.0, 0.0, 1.0, 9).unwrap();
        let wt = seq("AAAAAA");
        let s = seq("CDEFGH");
        let f = potts_fitness(&p, &s, &wt, Sign::Plus).unwrap();
        let per_site: f64 = (0..6)
            .map(|i| {
                let single = wt.with_residue(i, s.residue(i)).unwrap();
                potts_fitness(&p, &single, &wt, Sign::Plus).unwrap()
            })
            .sum();
        assert!((f - per_site).abs() < 1e-12);
    }

    #[test]
    fn file_round_trip() {
        let p = generate_potts_params(4, 3, 1.0, 1.0, 0.5, 8).unwrap();
        let text = p.to_json_string(Sign::Minus);
        let (back, sign) = PottsParams::from_json_str(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(sign, Sign::Minus);
        let bad = text.replace("\"sign\": -1", "\"sign\": 2");
        assert!(PottsParams::from_json_str(&bad).is_err());
    }

    #[test]
    fn landscape_reports_full_arity() {
        let p = generate_potts_params(4, 20, 1.0, 1.0, 0.5, 8).unwrap();
        let l = PottsLandscape::new("syn", p, seq("ACDE"), Sign::Plus).unwrap();
        assert_eq!(l.arity(), Arity::Full(4));
        assert_eq!(l.evaluate(&seq("ACDE")).unwrap().primary(), 0.0);
        assert!(l.evaluate(&seq("ACD")).is_err());
    }
}
