//! The length spectrum: a deduplicated, sorted multiset of closed-geodesic
//! records with determinant weights, counting functions, and CSV persistence.

use crate::error::{Error, Result};
use crate::schottky::Word;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// One (orbit, iterate) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub word: Word,
    pub primitive_length: f64,
    /// Iterate index; k = 1 is the primitive orbit itself.
    pub k: usize,
    pub total_length: f64,
    /// sqrt(|det(I - P^k)|).
    pub weight: f64,
    pub residual: f64,
}

impl SpectrumEntry {
    pub fn new(word: Word, primitive_length: f64, k: usize, weight: f64, residual: f64) -> Self {
        SpectrumEntry {
            word,
            primitive_length,
            k,
            total_length: k as f64 * primitive_length,
            weight,
            residual,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Data("iterate index k must be at least 1".into()));
        }
        if !(self.primitive_length > 0.0) || !self.primitive_length.is_finite() {
            return Err(Error::Data(format!(
                "primitive length {} must be positive",
                self.primitive_length
            )));
        }
        if (self.total_length - self.k as f64 * self.primitive_length).abs()
            > 1e-12 * self.total_length.max(1.0)
        {
            return Err(Error::Data(
                "total_length differs from k * primitive_length".into(),
            ));
        }
        if !(self.weight > 0.0) || !self.weight.is_finite() {
            return Err(Error::Data(format!("weight {} must be positive", self.weight)));
        }
        Ok(())
    }
}

/// Iterate-counting convention of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterateMode {
    PrimitiveOnly,
    WithIterates,
}

/// Orientation convention: whether w and w^-1 are counted separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationMode {
    Oriented,
    Unoriented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingConvention {
    pub iterates: IterateMode,
    pub orientation: OrientationMode,
}

impl CountingConvention {
    pub fn parse(s: &str) -> Result<Self> {
        let (it, or) = s
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("bad counting convention '{s}'")))?;
        let iterates = match it {
            "primitive-only" => IterateMode::PrimitiveOnly,
            "with-iterates" => IterateMode::WithIterates,
            _ => return Err(Error::Config(format!("bad iterate mode '{it}'"))),
        };
        let orientation = match or {
            "oriented" => OrientationMode::Oriented,
            "unoriented" => OrientationMode::Unoriented,
            _ => return Err(Error::Config(format!("bad orientation mode '{or}'"))),
        };
        Ok(CountingConvention { iterates, orientation })
    }
}

impl std::fmt::Display for CountingConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let it = match self.iterates {
            IterateMode::PrimitiveOnly => "primitive-only",
            IterateMode::WithIterates => "with-iterates",
        };
        let or = match self.orientation {
            OrientationMode::Oriented => "oriented",
            OrientationMode::Unoriented => "unoriented",
        };
        write!(f, "{it}/{or}")
    }
}

pub const CSV_HEADER: &str = "word,primitive_length,k,total_length,weight,residual";

/// Sorted, deduplicated length spectrum, complete below `max_length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSpectrum {
    entries: Vec<SpectrumEntry>,
    pub dedupe_tolerance: f64,
    /// Completeness horizon T_max.
    pub max_length: f64,
    pub convention: CountingConvention,
    /// Seed recorded for provenance in the file header.
    pub seed: u64,
    /// Configuration hash recorded in the file header (empty when ad hoc).
    pub config_hash: String,
}

impl LengthSpectrum {
    pub fn new(convention: CountingConvention, max_length: f64) -> Self {
        LengthSpectrum {
            entries: Vec::new(),
            dedupe_tolerance: 1e-6,
            max_length,
            convention,
            seed: 0,
            config_hash: String::new(),
        }
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn primitive_count(&self) -> usize {
        self.entries.iter().filter(|e| e.k == 1).count()
    }

    /// Sorted insert with word-identity dedupe: an entry with the same
    /// (word, k) replaces the stored one only if its residual improves.
    pub fn insert(&mut self, entry: SpectrumEntry) -> Result<()> {
        entry.validate()?;
        if let Some(pos) = self
            .entries
            .iter()
            .position(|e| e.word == entry.word && e.k == entry.k)
        {
            if entry.residual < self.entries[pos].residual {
                self.entries.remove(pos);
            } else {
                return Ok(());
            }
        }
        let at = self
            .entries
            .partition_point(|e| e.total_length <= entry.total_length);
        self.entries.insert(at, entry);
        Ok(())
    }

    /// N(T) under the spectrum's counting convention; right-continuous.
    pub fn count(&self, t: f64) -> Result<usize> {
        if t > self.max_length {
            return Err(Error::IncompleteHorizon {
                requested: t,
                horizon: self.max_length,
            });
        }
        Ok(self
            .entries
            .iter()
            .take_while(|e| e.total_length <= t)
            .filter(|e| self.convention.iterates == IterateMode::WithIterates || e.k == 1)
            .count())
    }

    /// Entries visible under the convention (k = 1 only for primitive-only).
    pub fn counted_entries(&self) -> impl Iterator<Item = &SpectrumEntry> {
        let with_iterates = self.convention.iterates == IterateMode::WithIterates;
        self.entries.iter().filter(move |e| with_iterates || e.k == 1)
    }

    /// Synthesize iterate entries (k >= 2) for every primitive, up to the
    /// horizon (or `k_cap`), with weights extended through the eigenvalue
    /// recovered from the k = 1 weight.
    pub fn extend_iterates(&mut self, k_cap: Option<usize>) -> Result<()> {
        let primitives: Vec<SpectrumEntry> =
            self.entries.iter().filter(|e| e.k == 1).cloned().collect();
        for p in primitives {
            let lambda = crate::orbits::expanding_from_weight(p.weight, 1)?;
            let mut k = 2usize;
            loop {
                if let Some(cap) = k_cap {
                    if k > cap {
                        break;
                    }
                } else if k as f64 * p.primitive_length > self.max_length {
                    break;
                }
                let w = crate::orbits::det_weight_from_expanding(lambda, k);
                self.insert(SpectrumEntry::new(
                    p.word.clone(),
                    p.primitive_length,
                    k,
                    w,
                    p.residual,
                ))?;
                k += 1;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv(true))?;
        Ok(())
    }

    /// CSV body; lengths as decimal text with 17 significant digits. The
    /// timestamp line is the only non-deterministic part and can be omitted.
    pub fn to_csv(&self, with_timestamp: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# geodlab spectrum v1");
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# config_hash={}", self.config_hash);
        let _ = writeln!(s, "# convention={}", self.convention);
        let _ = writeln!(s, "# max_length={}", fmt_f64(self.max_length));
        let _ = writeln!(s, "# dedupe_tolerance={}", fmt_f64(self.dedupe_tolerance));
        if with_timestamp {
            let _ = writeln!(s, "# generated_at={}", timestamp());
        }
        let _ = writeln!(s, "{CSV_HEADER}");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                e.word,
                fmt_f64(e.primitive_length),
                e.k,
                fmt_f64(e.total_length),
                fmt_f64(e.weight),
                fmt_f64(e.residual)
            );
        }
        s
    }

    pub fn load(path: &Path) -> Result<LengthSpectrum> {
        let text = std::fs::read_to_string(path)?;
        LengthSpectrum::from_csv(&text)
    }

    pub fn from_csv(text: &str) -> Result<LengthSpectrum> {
        let mut spec = LengthSpectrum::new(
            CountingConvention {
                iterates: IterateMode::WithIterates,
                orientation: OrientationMode::Unoriented,
            },
            f64::INFINITY,
        );
        let mut saw_header = false;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let parse_err = |message: String| Error::Parse {
                line: lineno,
                message,
            };
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some((key, value)) = meta.split_once('=') {
                    match key {
                        "seed" => {
                            spec.seed = value
                                .parse()
                                .map_err(|_| parse_err(format!("bad seed '{value}'")))?
                        }
                        "config_hash" => spec.config_hash = value.to_string(),
                        "convention" => spec.convention = CountingConvention::parse(value)?,
                        "max_length" => {
                            spec.max_length = value
                                .parse()
                                .map_err(|_| parse_err(format!("bad max_length '{value}'")))?
                        }
                        "dedupe_tolerance" => {
                            spec.dedupe_tolerance = value
                                .parse()
                                .map_err(|_| parse_err(format!("bad dedupe_tolerance '{value}'")))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if line != CSV_HEADER {
                    return Err(parse_err(format!(
                        "expected header '{CSV_HEADER}', got '{line}'"
                    )));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(parse_err(format!("expected 6 fields, got {}", fields.len())));
            }
            let word = Word::parse(fields[0]).map_err(|e| parse_err(e.to_string()))?;
            let primitive_length: f64 = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad primitive_length '{}'", fields[1])))?;
            let k: usize = fields[2]
                .parse()
                .map_err(|_| parse_err(format!("bad k '{}'", fields[2])))?;
            let total_length: f64 = fields[3]
                .parse()
                .map_err(|_| parse_err(format!("bad total_length '{}'", fields[3])))?;
            let weight: f64 = fields[4]
                .parse()
                .map_err(|_| parse_err(format!("bad weight '{}'", fields[4])))?;
            let residual: f64 = fields[5]
                .parse()
                .map_err(|_| parse_err(format!("bad residual '{}'", fields[5])))?;
            let entry = SpectrumEntry {
                word,
                primitive_length,
                k,
                total_length,
                weight,
                residual,
            };
            entry.validate().map_err(|e| parse_err(e.to_string()))?;
            spec.insert(entry).map_err(|e| parse_err(e.to_string()))?;
        }
        if !saw_header {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: "missing column header".into(),
            });
        }
        Ok(spec)
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn timestamp() -> String {
    use std::time::{SystemTime, UNIX_EPOCH};
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

/// Synthetic spectrum whose counting function tracks
/// N(T) = round(e^{hT} / (hT)) on the increasing branch T >= 2/h: entry n is
/// placed where e^{hT}/(hT) crosses n - 1/2. Weights are the constant
/// curvature values 2 sinh(l/2). Intended for estimator verification.
pub fn synthetic_pot_spectrum(h: f64, t_max: f64) -> Result<LengthSpectrum> {
    if !(h > 0.0) {
        return Err(Error::Config("synthetic entropy must be positive".into()));
    }
    let t_start = 2.0 / h;
    let f = |t: f64| (h * t).exp() / (h * t);
    let mut spec = LengthSpectrum::new(
        CountingConvention {
            iterates: IterateMode::PrimitiveOnly,
            orientation: OrientationMode::Unoriented,
        },
        t_max,
    );
    let mut counter = 0usize;
    let n0 = f(t_start).round() as usize;
    let place = |spec: &mut LengthSpectrum, length: f64, id: usize| -> Result<()> {
        // Distinct synthetic words: the binary expansion of the id over
        // letters a/b is reduced and unique per id.
        let bits = (usize::BITS - id.leading_zeros()).max(1);
        let letters: Vec<i32> = (0..bits)
            .map(|b| if (id >> b) & 1 == 1 { 2 } else { 1 })
            .collect();
        spec.insert(SpectrumEntry::new(
            Word::new(letters),
            length,
            1,
            2.0 * (length / 2.0).sinh(),
            0.0,
        ))
    };
    for _ in 0..n0 {
        counter += 1;
        place(&mut spec, t_start, counter)?;
    }
    let mut n = n0;
    let mut t_lo = t_start;
    loop {
        let target = n as f64 + 0.5;
        // Bisection for f(T) = target on the increasing branch.
        let mut lo = t_lo;
        let mut hi = t_max;
        if f(hi) < target {
            break;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_n = 0.5 * (lo + hi);
        if t_n > t_max {
            break;
        }
        counter += 1;
        place(&mut spec, t_n, counter)?;
        n += 1;
        t_lo = t_n;
    }
    Ok(spec)
}
