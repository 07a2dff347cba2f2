//! Sparse labeled datasets, LIBSVM text I/O and client partitioning.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{sample_without_replacement, seeded_rng, shuffle};

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }
}

/// One labeled example with sparse features. Indices are 1-based and
/// strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub label: Label,
    pub features: Vec<(u32, f64)>,
}

impl Example {
    pub fn new(label: Label, features: Vec<(u32, f64)>) -> Result<Self> {
        if features.iter().any(|&(i, _)| i == 0) {
            return Err(Error::InvalidConfig("feature index 0 (indices are 1-based)".into()));
        }
        if features.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidConfig("feature indices not strictly increasing".into()));
        }
        Ok(Self { label, features })
    }

    /// Largest feature index, 0 for an empty feature list.
    pub fn max_index(&self) -> usize {
        self.features.last().map_or(0, |&(i, _)| i as usize)
    }

    /// `x·w` with the 1-based sparse indices mapped onto `w[i-1]`.
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.features.iter().map(|&(i, v)| v * w[i as usize - 1]).sum()
    }

    /// `out += scale * x`.
    #[inline]
    pub fn add_scaled_to(&self, scale: f64, out: &mut [f64]) {
        for &(i, v) in &self.features {
            out[i as usize - 1] += scale * v;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.features.iter().map(|&(_, v)| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset of dimension `dim`, or the largest feature index when
    /// `dim` is `None`. An explicit dimension may only raise the inferred one.
    pub fn new(examples: Vec<Example>, dim: Option<usize>) -> Result<Self> {
        let max_index = examples.iter().map(Example::max_index).max().unwrap_or(0);
        let dim = match dim {
            Some(d) if d < max_index => {
                return Err(Error::InvalidConfig(format!(
                    "dimension override {d} below largest feature index {max_index}"
                )))
            }
            Some(d) => d,
            None => max_index,
        };
        Ok(Self { examples, dim })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Seeded random subset of `count` examples, kept in original order.
    pub fn subsample(&self, count: usize, seed: u64) -> Result<Self> {
        if count > self.len() {
            return Err(Error::InvalidConfig(format!(
                "subsample of {count} from {} examples",
                self.len()
            )));
        }
        let mut picked = sample_without_replacement(&mut seeded_rng(seed, 0), self.len(), count);
        picked.sort_unstable();
        let examples = picked.into_iter().map(|i| self.examples[i].clone()).collect();
        Ok(Self { examples, dim: self.dim })
    }

    /// LIBSVM text; labels as `+1`/`-1`, values in shortest round-trip form.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(match ex.label {
                Label::Positive => "+1",
                Label::Negative => "-1",
            });
            for &(i, v) in &ex.features {
                let _ = write!(out, " {i}:{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Maps raw file labels onto {−1, +1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    entries: Vec<(f64, Label)>,
    /// When set, any label not listed maps here instead of failing.
    fallback: Option<Label>,
}

impl Default for LabelMap {
    /// `+1 → +1`, everything else `→ −1`.
    fn default() -> Self {
        Self { entries: vec![(1.0, Label::Positive)], fallback: Some(Label::Negative) }
    }
}

impl LabelMap {
    /// Strict map: unlisted labels are a parse error.
    pub fn new(entries: Vec<(f64, Label)>) -> Self {
        Self { entries, fallback: None }
    }

    pub fn with_fallback(mut self, label: Label) -> Self {
        self.fallback = Some(label);
        self
    }

    pub fn map(&self, raw: f64) -> Option<Label> {
        self.entries
            .iter()
            .find(|&&(k, _)| k == raw)
            .map(|&(_, l)| l)
            .or(self.fallback)
    }
}

fn parse_line(line: &str, lineno: usize, labels: &LabelMap) -> Result<Option<Example>> {
    let content = line.split('#').next().unwrap_or("");
    let mut tokens = content.split_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let err = |msg: String| Error::Parse { line: lineno, msg };
    let raw: f64 = label_tok
        .parse()
        .map_err(|_| err(format!("malformed label {label_tok:?}")))?;
    let label = labels.map(raw).ok_or_else(|| err(format!("unmapped label {label_tok}")))?;

    let mut features: Vec<(u32, f64)> = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("malformed token {tok:?}")))?;
        let idx: u32 = idx
            .parse()
            .map_err(|_| err(format!("malformed index in {tok:?}")))?;
        if idx == 0 {
            return Err(err(format!("index 0 in {tok:?} (indices are 1-based)")));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| err(format!("malformed value in {tok:?}")))?;
        if let Some(&(prev, _)) = features.last() {
            if idx <= prev {
                return Err(err(format!("index {idx} not greater than previous {prev}")));
            }
        }
        features.push((idx, val));
    }
    Ok(Some(Example { label, features }))
}

/// Parses LIBSVM text. Blank lines and `#` comments are skipped.
pub fn parse_libsvm(text: &str, labels: &LabelMap, dim: Option<usize>) -> Result<Dataset> {
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(ex) = parse_line(line, i + 1, labels)? {
            examples.push(ex);
        }
    }
    Dataset::new(examples, dim)
}

pub fn read_libsvm<R: BufRead>(reader: R, labels: &LabelMap, dim: Option<usize>) -> Result<Dataset> {
    let mut examples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if let Some(ex) = parse_line(&line?, i + 1, labels)? {
            examples.push(ex);
        }
    }
    Dataset::new(examples, dim)
}

pub fn load_libsvm(path: &Path, labels: &LabelMap, dim: Option<usize>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_libsvm(std::io::BufReader::new(file), labels, dim)
}

/// Disjoint assignment of dataset indices to `K` clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignments: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(assignments: Vec<Vec<usize>>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::InvalidConfig("partition with no clients".into()));
        }
        if assignments.iter().any(Vec::is_empty) {
            return Err(Error::InvalidConfig("partition with an empty client".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !assignments.iter().flatten().all(|&i| seen.insert(i)) {
            return Err(Error::InvalidConfig("partition lists are not disjoint".into()));
        }
        Ok(Self { assignments })
    }

    pub fn num_clients(&self) -> usize {
        self.assignments.len()
    }

    pub fn client(&self, k: usize) -> &[usize] {
        &self.assignments[k]
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn client_sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.assignments.iter().map(Vec::len).sum()
    }
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut seeded_rng(seed, 0), &mut idx);
    idx
}

/// Equal-size IID split; the `N mod K` leftover examples are dropped.
pub fn partition_iid(dataset: &Dataset, clients: usize, seed: u64) -> Result<Partition> {
    let n = dataset.len();
    if clients == 0 || clients > n {
        return Err(Error::InvalidConfig(format!("{clients} clients for {n} examples")));
    }
    let per = n / clients;
    let idx = shuffled_indices(n, seed);
    Partition::new(idx.chunks_exact(per).take(clients).map(<[usize]>::to_vec).collect())
}

/// Contiguous blocks of a shuffled index list with sizes proportional to
/// `proportions`. Block sizes are `⌊p_k N⌋`, and the leftover examples go one
/// at a time to the blocks with the largest fractional parts.
pub fn partition_imbalanced(dataset: &Dataset, proportions: &[f64], seed: u64) -> Result<Partition> {
    let n = dataset.len();
    if proportions.is_empty() || proportions.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidConfig("proportions must be positive".into()));
    }
    let total: f64 = proportions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("proportions sum to {total}, not 1")));
    }
    let quotas: Vec<f64> = proportions.iter().map(|&p| p * n as f64).collect();
    // The small slack keeps exact products like 0.002·10000 from flooring low.
    let mut sizes: Vec<usize> = quotas.iter().map(|&q| (q + 1e-9).floor() as usize).collect();
    if sizes.contains(&0) {
        return Err(Error::InvalidConfig("a proportion yields an empty client".into()));
    }
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - sizes[a] as f64;
        let fb = quotas[b] - sizes[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }

    let idx = shuffled_indices(n, seed);
    let mut start = 0;
    let assignments = sizes
        .iter()
        .map(|&s| {
            let block = idx[start..start + s].to_vec();
            start += s;
            block
        })
        .collect();
    Partition::new(assignments)
}

/// Proportions for the standard imbalance scenario: one client with half the
/// data, one with 0.2%, the rest sharing the remainder equally.
pub fn standard_imbalance(clients: usize) -> Result<Vec<f64>> {
    if clients < 3 {
        return Err(Error::InvalidConfig("imbalance scenario needs at least 3 clients".into()));
    }
    let rest = (1.0 - 0.5 - 0.002) / (clients - 2) as f64;
    let mut p = vec![0.5, 0.002];
    p.extend(std::iter::repeat_n(rest, clients - 2));
    Ok(p)
}

/// Every client holds a single label. Clients are allotted to labels in
/// proportion to class size (at least one each); within a label the shuffled
/// examples are split into near-equal blocks. Clients are ordered by label.
pub fn partition_label_skew(dataset: &Dataset, clients: usize, seed: u64) -> Result<Partition> {
    let mut groups: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, ex) in dataset.examples().iter().enumerate() {
        groups.entry(ex.label).or_default().push(i);
    }
    let labels = groups.len();
    if labels == 0 || clients < labels {
        return Err(Error::InvalidConfig(format!(
            "{clients} clients for {labels} distinct labels"
        )));
    }
    let n = dataset.len() as f64;
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let quotas: Vec<f64> = sizes.iter().map(|&s| clients as f64 * s as f64 / n).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|&q| (q.floor() as usize).max(1)).collect();
    let frac = |alloc: &[usize], c: usize| quotas[c] - alloc[c] as f64;
    while alloc.iter().sum::<usize>() < clients {
        let c = (0..labels)
            .max_by(|&a, &b| frac(&alloc, a).total_cmp(&frac(&alloc, b)).then(b.cmp(&a)))
            .unwrap();
        alloc[c] += 1;
    }
    while alloc.iter().sum::<usize>() > clients {
        let c = (0..labels)
            .filter(|&c| alloc[c] > 1)
            .min_by(|&a, &b| frac(&alloc, a).total_cmp(&frac(&alloc, b)).then(a.cmp(&b)))
            .unwrap();
        alloc[c] -= 1;
    }
    for (c, (&a, &s)) in alloc.iter().zip(&sizes).enumerate() {
        if a > s {
            return Err(Error::InvalidConfig(format!(
                "label group {c} has {s} examples for {a} clients"
            )));
        }
    }

    let mut rng = seeded_rng(seed, 0);
    let mut assignments = Vec::with_capacity(clients);
    for (mut members, &parts) in groups.into_values().zip(&alloc) {
        shuffle(&mut rng, &mut members);
        let base = members.len() / parts;
        let extra = members.len() % parts;
        let mut start = 0;
        for p in 0..parts {
            let len = base + usize::from(p < extra);
            assignments.push(members[start..start + len].to_vec());
            start += len;
        }
    }
    Partition::new(assignments)
}
