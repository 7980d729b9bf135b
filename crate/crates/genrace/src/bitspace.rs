//! The generative-modeling task: fixed-length bitstrings, the even-parity
//! ("Evens") solution space, the negative separation cost, and reweighted
//! training sets.
//!
//! A bitstring is valid when its number of ones is even; the solution space
//! `S` for `n_var` bits therefore has exactly `2^(n_var-1)` members. Training
//! sets are drawn uniformly from `S` without replacement and carry a softmax
//! weighting at inverse temperature `beta = beta_hat / 2`, where `beta_hat`
//! is the population standard deviation of the entry costs. The weighting
//! biases training mass toward low-cost entries.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Longest bitstring representable by the packed [`Bitstring`] word.
pub const MAX_BITS: usize = 63;

/// Default cap on `n_var` for operations that materialize all of `S`.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Resample attempts allowed when a target minimum cost is requested.
pub const MAX_RESAMPLE_ATTEMPTS: u64 = 1000;

#[derive(Debug, Error)]
pub enum BitspaceError {
    #[error("bitstring length {0} out of range 1..={MAX_BITS}")]
    LengthOutOfRange(usize),
    #[error("invalid symbol {symbol:?} at position {position} (expected '0' or '1')")]
    InvalidSymbol { symbol: char, position: usize },
    #[error("enumerating 2^{} even-parity strings exceeds the cap n_var <= {cap}", n_var - 1)]
    EnumerationCapExceeded { n_var: usize, cap: usize },
    #[error("epsilon must lie in (0, 1], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("training-set size floor({epsilon} * {space_size}) is zero")]
    EmptyTrainingSet { epsilon: f64, space_size: u64 },
    #[error(
        "no draw realized minimum cost {target} after {attempts} attempts \
         (n_var={n_var}, epsilon={epsilon}, seed={seed})"
    )]
    MinCostUnsatisfied {
        target: i64,
        attempts: u64,
        n_var: usize,
        epsilon: f64,
        seed: u64,
    },
    #[error("dataset file: {0}")]
    MalformedDataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A fixed-length binary configuration, packed into a `u64`.
///
/// The canonical text form writes the most significant symbol first, so
/// `Bitstring::from_text("110")` has integer value 6. Text position `j`
/// (0-based from the left) maps to word bit `len - 1 - j`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring {
    word: u64,
    len: u8,
}

impl Bitstring {
    /// Packs `word` as a bitstring of `len` symbols. Bits above `len` must be clear.
    pub fn from_word(word: u64, len: usize) -> Result<Self, BitspaceError> {
        if len == 0 || len > MAX_BITS {
            return Err(BitspaceError::LengthOutOfRange(len));
        }
        debug_assert!(word >> len == 0, "word has bits above the declared length");
        Ok(Self {
            word: word & ((1u64 << len) - 1),
            len: len as u8,
        })
    }

    /// Parses the canonical text form, e.g. `"11100011"`.
    pub fn from_text(text: &str) -> Result<Self, BitspaceError> {
        if text.is_empty() || text.len() > MAX_BITS {
            return Err(BitspaceError::LengthOutOfRange(text.len()));
        }
        let mut word = 0u64;
        for (position, symbol) in text.chars().enumerate() {
            word <<= 1;
            match symbol {
                '0' => {}
                '1' => word |= 1,
                _ => return Err(BitspaceError::InvalidSymbol { symbol, position }),
            }
        }
        Ok(Self {
            word,
            len: text.len() as u8,
        })
    }

    /// Builds a bitstring from per-position symbols, most significant first.
    pub fn from_bits(bits: &[u8]) -> Result<Self, BitspaceError> {
        if bits.is_empty() || bits.len() > MAX_BITS {
            return Err(BitspaceError::LengthOutOfRange(bits.len()));
        }
        let mut word = 0u64;
        for &b in bits {
            word = (word << 1) | u64::from(b & 1);
        }
        Ok(Self {
            word,
            len: bits.len() as u8,
        })
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        false // length 1..=MAX_BITS by construction
    }

    /// Packed integer value (text read as a base-2 number).
    pub fn word(&self) -> u64 {
        self.word
    }

    /// Symbol at text position `pos` (0 = leftmost / most significant).
    pub fn bit(&self, pos: usize) -> u8 {
        debug_assert!(pos < self.len());
        ((self.word >> (self.len() - 1 - pos)) & 1) as u8
    }

    /// Number of ones.
    pub fn ones(&self) -> u32 {
        self.word.count_ones()
    }

    /// Per-position symbols, most significant first.
    pub fn bits(&self) -> Vec<u8> {
        (0..self.len()).map(|p| self.bit(p)).collect()
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for pos in 0..self.len() {
            write!(f, "{}", self.bit(pos))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

/// True iff the number of ones is even (the string belongs to `S`).
pub fn is_valid(x: &Bitstring) -> bool {
    x.ones() % 2 == 0
}

/// Negative separation cost `c(x) = -(z + 1)`, where `z` is the longest run
/// of zeros flanked by a one on both sides. Strings with fewer than two ones
/// have no flanked run, so `z = 0` and `c = -1`. Lower is better.
pub fn separation_cost(x: &Bitstring) -> i64 {
    if x.ones() < 2 {
        return -1;
    }
    let word = x.word();
    let lo = word.trailing_zeros() as usize;
    let hi = 63 - word.leading_zeros() as usize;
    let mut longest_gap = 0usize;
    let mut gap = 0usize;
    for bit_index in lo..=hi {
        if (word >> bit_index) & 1 == 1 {
            longest_gap = longest_gap.max(gap);
            gap = 0;
        } else {
            gap += 1;
        }
    }
    -(longest_gap as i64 + 1)
}

/// The even-parity solution space for `n_var` binary variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolutionSpace {
    n_var: usize,
}

impl SolutionSpace {
    pub fn new(n_var: usize) -> Result<Self, BitspaceError> {
        if n_var == 0 || n_var > MAX_BITS {
            return Err(BitspaceError::LengthOutOfRange(n_var));
        }
        Ok(Self { n_var })
    }

    pub fn n_var(&self) -> usize {
        self.n_var
    }

    /// `|S| = 2^(n_var - 1)`.
    pub fn size(&self) -> u64 {
        1u64 << (self.n_var - 1)
    }

    /// Membership: right length and an even count of ones.
    pub fn contains(&self, x: &Bitstring) -> bool {
        x.len() == self.n_var && is_valid(x)
    }

    /// Member with the given rank in ascending word order.
    ///
    /// Every even-parity word factors uniquely as prefix plus parity-completion
    /// bit, so rank `k` maps to word `2k + parity(k)`.
    pub fn member(&self, rank: u64) -> Bitstring {
        debug_assert!(rank < self.size());
        let word = (rank << 1) | u64::from(rank.count_ones() % 2);
        Bitstring {
            word,
            len: self.n_var as u8,
        }
    }

    /// Uniform draw from `S`.
    pub fn draw_uniform<R: Rng>(&self, rng: &mut R) -> Bitstring {
        self.member(rng.gen_range(0..self.size()))
    }
}

/// Yields every even-parity bitstring of length `n_var` exactly once, in
/// ascending word order. Refuses above the enumeration cap.
pub fn enumerate_solution_space(
    n_var: usize,
    cap: usize,
) -> Result<impl Iterator<Item = Bitstring>, BitspaceError> {
    let space = SolutionSpace::new(n_var)?;
    if n_var > cap {
        return Err(BitspaceError::EnumerationCapExceeded { n_var, cap });
    }
    Ok((0..space.size()).map(move |rank| space.member(rank)))
}

/// Softmax reweighting of a cost list.
///
/// `beta_hat` is the population standard deviation of the costs, `beta` is
/// `beta_hat / 2`, and entry `i` gets weight proportional to
/// `exp(-beta * cost_i)`, normalized over the list. All-equal costs give
/// `beta = 0` and uniform weights.
pub fn reweight(costs: &[i64]) -> (f64, f64, Vec<f64>) {
    assert!(!costs.is_empty(), "reweight requires a non-empty cost list");
    let n = costs.len() as f64;
    let mean = costs.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = costs
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let beta_hat = var.sqrt();
    let beta = beta_hat / 2.0;
    // Shift by the largest exponent before exponentiating; normalization
    // cancels the shift, which also makes the weights exactly invariant
    // under a constant added to every cost.
    let exponents: Vec<f64> = costs.iter().map(|&c| -beta * (c as f64 - mean)).collect();
    let max_exp = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnormalized: Vec<f64> = exponents.iter().map(|&e| (e - max_exp).exp()).collect();
    let total: f64 = unnormalized.iter().sum();
    let weights = unnormalized.iter().map(|&w| w / total).collect();
    (beta_hat, beta, weights)
}

/// A training set: distinct valid bitstrings with costs and softmax weights.
///
/// Entries keep draw order. `probability(x)` is zero for any string outside
/// the set. Immutable after construction.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    n_var: usize,
    epsilon: f64,
    seed: u64,
    entries: Vec<(Bitstring, i64)>,
    weights: Vec<f64>,
    members: HashSet<u64>,
    beta_hat: f64,
    beta: f64,
    min_cost: i64,
}

impl TrainingSet {
    /// Draws `T = floor(epsilon * |S|)` distinct uniform members of `S`.
    ///
    /// When `target_min_cost` is set, the whole set is redrawn with successor
    /// seeds until the realized minimum cost equals the target exactly, up to
    /// [`MAX_RESAMPLE_ATTEMPTS`] attempts. Redrawing keeps the draws
    /// exchangeable; entries are never edited individually.
    pub fn build(
        n_var: usize,
        epsilon: f64,
        seed: u64,
        target_min_cost: Option<i64>,
    ) -> Result<Self, BitspaceError> {
        let space = SolutionSpace::new(n_var)?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(BitspaceError::EpsilonOutOfRange(epsilon));
        }
        let size = (epsilon * space.size() as f64).floor() as u64;
        if size == 0 {
            return Err(BitspaceError::EmptyTrainingSet {
                epsilon,
                space_size: space.size(),
            });
        }

        let attempts_allowed = if target_min_cost.is_some() {
            MAX_RESAMPLE_ATTEMPTS
        } else {
            1
        };
        for attempt in 0..attempts_allowed {
            let draw_seed = seed.wrapping_add(attempt);
            let entries = Self::draw_distinct(&space, size, draw_seed);
            let min_cost = entries.iter().map(|&(_, c)| c).min().expect("non-empty");
            if let Some(target) = target_min_cost {
                if min_cost != target {
                    continue;
                }
            }
            return Ok(Self::from_entries_unchecked(
                n_var, epsilon, seed, entries, min_cost,
            ));
        }
        Err(BitspaceError::MinCostUnsatisfied {
            target: target_min_cost.expect("only the constrained path can exhaust attempts"),
            attempts: attempts_allowed,
            n_var,
            epsilon,
            seed,
        })
    }

    fn draw_distinct(space: &SolutionSpace, size: u64, seed: u64) -> Vec<(Bitstring, i64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::with_capacity(size as usize);
        let mut entries = Vec::with_capacity(size as usize);
        if size == space.size() {
            // epsilon = 1: the draw is the whole space.
            for rank in 0..space.size() {
                let x = space.member(rank);
                entries.push((x, separation_cost(&x)));
            }
            return entries;
        }
        while entries.len() < size as usize {
            let x = space.draw_uniform(&mut rng);
            if seen.insert(x.word()) {
                entries.push((x, separation_cost(&x)));
            }
        }
        entries
    }

    fn from_entries_unchecked(
        n_var: usize,
        epsilon: f64,
        seed: u64,
        entries: Vec<(Bitstring, i64)>,
        min_cost: i64,
    ) -> Self {
        let costs: Vec<i64> = entries.iter().map(|&(_, c)| c).collect();
        let (beta_hat, beta, weights) = reweight(&costs);
        let members = entries.iter().map(|(x, _)| x.word()).collect();
        Self {
            n_var,
            epsilon,
            seed,
            entries,
            weights,
            members,
            beta_hat,
            beta,
            min_cost,
        }
    }

    pub fn n_var(&self) -> usize {
        self.n_var
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of entries `T`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Bitstring, i64)] {
        &self.entries
    }

    /// Softmax weights, aligned with `entries()`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn min_cost(&self) -> i64 {
        self.min_cost
    }

    pub fn contains(&self, x: &Bitstring) -> bool {
        x.len() == self.n_var && self.members.contains(&x.word())
    }

    /// Training probability of `x`: its weight inside the set, zero outside.
    pub fn probability(&self, x: &Bitstring) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        self.entries
            .iter()
            .position(|(e, _)| e.word() == x.word())
            .map(|i| self.weights[i])
            .unwrap_or(0.0)
    }

    /// Shannon entropy of the weights, in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| w * w.ln())
            .sum::<f64>()
    }

    /// Writes the canonical dataset file: a header line carrying
    /// `n_var`, `epsilon`, `seed` and `beta_hat`, then one
    /// `bitstring<TAB>cost` record per line.
    pub fn write_to(&self, path: &Path) -> Result<(), BitspaceError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "n_var={}\tepsilon={}\tseed={}\tbeta_hat={:.16e}",
            self.n_var, self.epsilon, self.seed, self.beta_hat
        )?;
        for (x, c) in &self.entries {
            writeln!(out, "{x}\t{c}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a canonical dataset file and rebuilds weights from the stored
    /// costs. The recomputed `beta_hat` must agree with the header.
    pub fn read_from(path: &Path) -> Result<Self, BitspaceError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| BitspaceError::MalformedDataset("empty file".into()))??;
        let mut n_var = None;
        let mut epsilon = None;
        let mut seed = None;
        let mut header_beta_hat = None;
        for field in header.split('\t') {
            let (key, value) = field.split_once('=').ok_or_else(|| {
                BitspaceError::MalformedDataset(format!("bad header field {field:?}"))
            })?;
            let parse_err =
                |k: &str| BitspaceError::MalformedDataset(format!("unparseable header {k}"));
            match key {
                "n_var" => n_var = Some(value.parse::<usize>().map_err(|_| parse_err(key))?),
                "epsilon" => epsilon = Some(value.parse::<f64>().map_err(|_| parse_err(key))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| parse_err(key))?),
                "beta_hat" => {
                    header_beta_hat = Some(value.parse::<f64>().map_err(|_| parse_err(key))?)
                }
                other => {
                    return Err(BitspaceError::MalformedDataset(format!(
                        "unknown header key {other:?}"
                    )))
                }
            }
        }
        let (n_var, epsilon, seed, header_beta_hat) =
            match (n_var, epsilon, seed, header_beta_hat) {
                (Some(n), Some(e), Some(s), Some(b)) => (n, e, s, b),
                _ => {
                    return Err(BitspaceError::MalformedDataset(
                        "header must carry n_var, epsilon, seed, beta_hat".into(),
                    ))
                }
            };

        let mut entries = Vec::new();
        let mut members = HashSet::new();
        for (line_no, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (text, cost) = line.split_once('\t').ok_or_else(|| {
                BitspaceError::MalformedDataset(format!("line {}: missing tab", line_no + 2))
            })?;
            let x = Bitstring::from_text(text)?;
            let c: i64 = cost.parse().map_err(|_| {
                BitspaceError::MalformedDataset(format!("line {}: bad cost {cost:?}", line_no + 2))
            })?;
            if x.len() != n_var {
                return Err(BitspaceError::MalformedDataset(format!(
                    "line {}: length {} != n_var {}",
                    line_no + 2,
                    x.len(),
                    n_var
                )));
            }
            if !members.insert(x.word()) {
                return Err(BitspaceError::MalformedDataset(format!(
                    "line {}: duplicate entry {x}",
                    line_no + 2
                )));
            }
            entries.push((x, c));
        }
        if entries.is_empty() {
            return Err(BitspaceError::MalformedDataset("no entries".into()));
        }
        let min_cost = entries.iter().map(|&(_, c)| c).min().expect("non-empty");
        let set = Self::from_entries_unchecked(n_var, epsilon, seed, entries, min_cost);
        if (set.beta_hat - header_beta_hat).abs() > 1e-9 {
            return Err(BitspaceError::MalformedDataset(format!(
                "beta_hat mismatch: header {header_beta_hat}, recomputed {}",
                set.beta_hat
            )));
        }
        Ok(set)
    }
}
