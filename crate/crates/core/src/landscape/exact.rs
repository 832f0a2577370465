use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{Arity, Landscape, LandscapeError};
use crate::candidate::ObjectiveVector;
use crate::seq::{SeqError, Sequence, VariantSpace};

/// What to do when a queried variant has no measurement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Error,
    Zero,
}

/// A measured fitness table over a site-restricted variant space.
#[derive(Debug)]
pub struct ExactLandscape {
    name: String,
    space: VariantSpace,
    entries: Vec<(Sequence, f64)>,
    index: HashMap<Sequence, usize>,
    missing_policy: MissingPolicy,
    missing_hits: AtomicU64,
    duplicates: usize,
}

const SEQUENCE_COLUMNS: &[&str] = &["sequence", "variant", "variants"];

impl ExactLandscape {
    /// Builds a table from in-memory records. Duplicate variants keep their
    /// first value.
    pub fn from_records(
        space: VariantSpace,
        records: impl IntoIterator<Item = (Sequence, f64)>,
    ) -> Result<Self, LandscapeError> {
        let mut entries = Vec::new();
        let mut index = HashMap::new();
        let mut duplicates = 0;
        for (seq, fitness) in records {
            if seq.len() != space.arity() {
                return Err(LandscapeError::Arity {
                    expected: space.arity(),
                    got: seq.len(),
                });
            }
            if !fitness.is_finite() {
                return Err(LandscapeError::NonFiniteScore(seq.to_string()));
            }
            if index.contains_key(&seq) {
                duplicates += 1;
                continue;
            }
            index.insert(seq.clone(), entries.len());
            entries.push((seq, fitness));
        }
        Ok(Self {
            name: space.name().to_string(),
            space,
            entries,
            index,
            missing_policy: MissingPolicy::default(),
            missing_hits: AtomicU64::new(0),
            duplicates,
        })
    }

    pub fn with_missing_policy(mut self, policy: MissingPolicy) -> Self {
        self.missing_policy = policy;
        self
    }

    pub fn space(&self) -> &VariantSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records in file order.
    pub fn entries(&self) -> &[(Sequence, f64)] {
        &self.entries
    }

    pub fn get(&self, variant: &Sequence) -> Option<f64> {
        self.index.get(variant).map(|&i| self.entries[i].1)
    }

    /// Rows dropped because their variant had already appeared.
    pub fn duplicate_rows(&self) -> usize {
        self.duplicates
    }

    /// Lookups of unmeasured variants answered with 0.0.
    pub fn missing_hits(&self) -> u64 {
        self.missing_hits.load(Ordering::Relaxed)
    }

    /// The best measured variant; ties go to the earliest row.
    pub fn argmax(&self) -> Option<&(Sequence, f64)> {
        self.entries
            .iter()
            .reduce(|best, e| if e.1 > best.1 { e } else { best })
    }
}

impl Landscape for ExactLandscape {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> Arity {
        Arity::Variant(self.space.arity())
    }

    fn evaluate(&self, seq: &Sequence) -> Result<ObjectiveVector, LandscapeError> {
        self.arity().check(seq)?;
        let value = match (self.get(seq), self.missing_policy) {
            (Some(v), _) => v,
            (None, MissingPolicy::Error) => {
                return Err(LandscapeError::UnknownVariant(seq.to_string()))
            }
            (None, MissingPolicy::Zero) => {
                self.missing_hits.fetch_add(1, Ordering::Relaxed);
                log::warn!("{}: unmeasured variant {seq} scored as 0.0", self.name);
                0.0
            }
        };
        Ok(ObjectiveVector::scalar(value)?)
    }
}

/// Loads a `sequence,fitness` CSV (extra columns are ignored; `variant` or
/// `variants` are accepted as the sequence column name).
pub fn load_exact_landscape(
    path: impl AsRef<Path>,
    space: VariantSpace,
) -> Result<ExactLandscape, LandscapeError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let parse_err = |line: u64, message: String| LandscapeError::Parse {
        path: shown.clone(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => LandscapeError::Io {
                path: shown.clone(),
                source,
            },
            other => parse_err(1, format!("{other:?}")),
        })?;
    let headers = match reader.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        Ok(_) => return Err(LandscapeError::NoRecords { path: shown }),
        Err(e) => return Err(parse_err(1, e.to_string())),
    };
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
    };
    let seq_col = find(SEQUENCE_COLUMNS)
        .ok_or_else(|| parse_err(1, "missing `sequence` column".into()))?;
    let fit_col =
        find(&["fitness"]).ok_or_else(|| parse_err(1, "missing `fitness` column".into()))?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let text = row.get(seq_col).unwrap_or("");
        let seq = Sequence::new(text).map_err(|e| parse_err(line, format!("{text:?}: {e}")))?;
        if seq.len() != space.arity() {
            return Err(parse_err(
                line,
                format!(
                    "variant {text:?} has length {}, expected {}",
                    seq.len(),
                    space.arity()
                ),
            ));
        }
        let raw = row.get(fit_col).unwrap_or("");
        let fitness: f64 = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(line, format!("non-numeric fitness {raw:?}")))?;
        records.push((seq, fitness));
    }
    if records.is_empty() {
        return Err(LandscapeError::NoRecords { path: shown });
    }
    let landscape = ExactLandscape::from_records(space, records)?;
    if landscape.duplicate_rows() > 0 {
        log::warn!(
            "{shown}: {} duplicate variant rows ignored (first occurrence kept)",
            landscape.duplicate_rows()
        );
    }
    Ok(landscape)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinationStat {
    pub mean: f64,
    pub count: usize,
}

/// Mean fitness for every residue combination observed at `positions`
/// (1-indexed sequence positions, each of which must be a mutable site).
pub fn position_combination_stats(
    landscape: &ExactLandscape,
    positions: &[usize],
) -> Result<BTreeMap<String, CombinationStat>, LandscapeError> {
    if positions.is_empty() {
        return Err(LandscapeError::Invalid("positions must be nonempty".into()));
    }
    let sites = landscape.space().one_based_sites();
    let mut ordinals = Vec::with_capacity(positions.len());
    for &p in positions {
        let ordinal = sites.iter().position(|&s| s == p).ok_or_else(|| {
            LandscapeError::Seq(SeqError::InvalidSites(format!(
                "position {p} is not one of the landscape sites {sites:?}"
            )))
        })?;
        if ordinals.contains(&ordinal) {
            return Err(LandscapeError::Invalid(format!("position {p} repeated")));
        }
        ordinals.push(ordinal);
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (seq, fitness) in landscape.entries() {
        let key: String = ordinals.iter().map(|&o| seq.residue(o) as char).collect();
        let slot = sums.entry(key).or_insert((0.0, 0));
        slot.0 += fitness;
        slot.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(k, (sum, count))| {
            (
                k,
                CombinationStat {
                    mean: sum / count as f64,
                    count,
                },
            )
        })
        .collect())
}

/// Writes `combination,mean_fitness,count`, sorted by combination.
pub fn write_stats_csv<W: Write>(
    out: W,
    stats: &BTreeMap<String, CombinationStat>,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["combination", "mean_fitness", "count"])?;
    for (combo, stat) in stats {
        w.write_record([combo.clone(), stat.mean.to_string(), stat.count.to_string()])?;
    }
    w.flush()
}
