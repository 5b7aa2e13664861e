//! Excursion-based index-set exchange and key extraction.
//!
//! Each node quantizes its unfolded real samples, finds the start positions
//! of runs of `e` identical non-erased symbols, and the nodes intersect
//! their index sets over the public channel (node-2 to node-1 to node-3 for
//! the three-party exchange). Keys are read at the retained positions.
//!
//! Run windows may overlap; overlapping windows would correlate adjacent key
//! symbols, so key extraction keeps only greedy-left non-overlapping starts.

use std::io::{self, Write};

use crate::quantizer::{MultiLevelQuantizer, QuantizedSymbol, QuantizerError};

/// Quantized view of one node's real sample sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedSequence {
    symbols: Vec<QuantizedSymbol>,
}

impl QuantizedSequence {
    pub fn from_samples(samples: &[f64], q: &MultiLevelQuantizer) -> Self {
        Self {
            symbols: samples.iter().map(|&y| q.evaluate(y)).collect(),
        }
    }

    pub fn from_symbols(symbols: Vec<QuantizedSymbol>) -> Self {
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[QuantizedSymbol] {
        &self.symbols
    }
}

/// Sorted, duplicate-free set of run start positions (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Sorted-merge intersection.
    pub fn intersect(&self, other: &Self) -> Self {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.indices[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Self { indices: out }
    }

    /// Greedy-left selection of non-overlapping windows of length `e`.
    pub fn prune_overlaps(&self, e: usize) -> Self {
        let mut out = Vec::new();
        let mut next_free = 0usize;
        for &r in &self.indices {
            if r >= next_free {
                out.push(r);
                next_free = r + e;
            }
        }
        Self { indices: out }
    }
}

/// Start positions of runs of `e` identical non-erased symbols.
pub fn excursion_indices(s: &QuantizedSequence, e: usize) -> IndexSet {
    assert!(e >= 1, "excursion length must be at least 1");
    let symbols = s.symbols();
    let mut indices = Vec::new();
    if symbols.len() + 1 <= e {
        return IndexSet::default();
    }
    // run_len[r] counting backwards would be O(n) extra; a simple scan of
    // current run suffices.
    let mut run_start = 0usize;
    for r in 0..symbols.len() {
        if r > 0 && symbols[r] != symbols[r - 1] {
            run_start = r;
        }
        let run_len = r - run_start + 1;
        if run_len >= e && !symbols[r].is_erased() {
            indices.push(r + 1 - e);
        }
    }
    IndexSet::from_sorted(indices)
}

/// Key symbols over the retained alphabet; never contains erasures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySequence {
    symbols: Vec<u16>,
}

impl KeySequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    fn read(seq: &QuantizedSequence, positions: &IndexSet) -> Self {
        let symbols = positions
            .indices()
            .iter()
            .map(|&r| {
                seq.symbols()[r]
                    .level()
                    .expect("retained positions are non-erased by construction")
            })
            .collect();
        Self { symbols }
    }

    /// Packed big-endian `b`-bit symbols as a hex string.
    pub fn to_hex(&self, bits: u32) -> String {
        let mut out = String::new();
        let mut acc: u32 = 0;
        let mut acc_bits: u32 = 0;
        for &s in &self.symbols {
            acc = (acc << bits) | u32::from(s);
            acc_bits += bits;
            while acc_bits >= 4 {
                let nibble = (acc >> (acc_bits - 4)) & 0xF;
                out.push(char::from_digit(nibble, 16).expect("nibble"));
                acc_bits -= 4;
            }
        }
        if acc_bits > 0 {
            let nibble = (acc << (4 - acc_bits)) & 0xF;
            out.push(char::from_digit(nibble, 16).expect("nibble"));
        }
        out
    }
}

/// Outcome of the three-party staged exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupConsensus {
    /// Non-overlapping retained windows (what the keys are read at).
    pub indices: IndexSet,
    pub key_node1: KeySequence,
    pub key_node2: KeySequence,
    pub key_node3: KeySequence,
    /// Sizes of the exchanged sets, in protocol order: node-2's set, the
    /// two-party intersection, the full intersection before overlap pruning.
    pub exchange_sizes: [usize; 3],
}

/// Outcome of the two-party exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseConsensus {
    pub indices: IndexSet,
    pub key_node2: KeySequence,
    pub key_node3: KeySequence,
    pub exchange_sizes: [usize; 2],
}

/// Staged three-party exchange: node-2 shares its set with node-1, node-1
/// intersects and shares with node-3, node-3 intersects and publishes.
pub fn staged_group_intersection(ia: &IndexSet, ib: &IndexSet, ic: &IndexSet) -> IndexSet {
    let iba = ib.intersect(ia);
    ic.intersect(&iba)
}

/// Three-party consensus over unfolded real samples.
pub fn group_consensus(
    ya: &[f64],
    yb: &[f64],
    yc: &[f64],
    q: &MultiLevelQuantizer,
    e: usize,
) -> Result<GroupConsensus, QuantizerError> {
    if ya.len() != yb.len() || yb.len() != yc.len() {
        return Err(QuantizerError::LengthMismatch(ya.len(), yc.len()));
    }
    let sa = QuantizedSequence::from_samples(ya, q);
    let sb = QuantizedSequence::from_samples(yb, q);
    let sc = QuantizedSequence::from_samples(yc, q);
    let ia = excursion_indices(&sa, e);
    let ib = excursion_indices(&sb, e);
    let ic = excursion_indices(&sc, e);
    let intersection = staged_group_intersection(&ia, &ib, &ic);
    let retained = intersection.prune_overlaps(e);
    Ok(GroupConsensus {
        key_node1: KeySequence::read(&sa, &retained),
        key_node2: KeySequence::read(&sb, &retained),
        key_node3: KeySequence::read(&sc, &retained),
        exchange_sizes: [ib.len(), ib.intersect(&ia).len(), intersection.len()],
        indices: retained,
    })
}

/// Two-party consensus between node-2 and node-3.
pub fn pairwise_consensus(
    yb: &[f64],
    yc: &[f64],
    q: &MultiLevelQuantizer,
    e: usize,
) -> Result<PairwiseConsensus, QuantizerError> {
    if yb.len() != yc.len() {
        return Err(QuantizerError::LengthMismatch(yb.len(), yc.len()));
    }
    let sb = QuantizedSequence::from_samples(yb, q);
    let sc = QuantizedSequence::from_samples(yc, q);
    let ib = excursion_indices(&sb, e);
    let ic = excursion_indices(&sc, e);
    let intersection = ic.intersect(&ib);
    let retained = intersection.prune_overlaps(e);
    Ok(PairwiseConsensus {
        key_node2: KeySequence::read(&sb, &retained),
        key_node3: KeySequence::read(&sc, &retained),
        exchange_sizes: [ib.len(), intersection.len()],
        indices: retained,
    })
}

/// Secret bits per raw real sample: `b` bits per retained window over the
/// `2L` samples that entered consensus.
pub fn key_rate(bits: u32, retained_windows: usize, total_samples: usize) -> f64 {
    if total_samples == 0 {
        return 0.0;
    }
    bits as f64 * retained_windows as f64 / total_samples as f64
}

/// Fraction of positions where two keys disagree.
pub fn mismatch_rate(k1: &KeySequence, k2: &KeySequence) -> Result<f64, QuantizerError> {
    if k1.len() != k2.len() {
        return Err(QuantizerError::LengthMismatch(k1.len(), k2.len()));
    }
    if k1.is_empty() {
        return Ok(0.0);
    }
    let disagreements = k1
        .symbols()
        .iter()
        .zip(k2.symbols())
        .filter(|(a, b)| a != b)
        .count();
    Ok(disagreements as f64 / k1.len() as f64)
}

/// Fraction of positions where the three keys do not all agree.
pub fn group_mismatch_rate(
    ka: &KeySequence,
    kb: &KeySequence,
    kc: &KeySequence,
) -> Result<f64, QuantizerError> {
    if ka.len() != kb.len() || kb.len() != kc.len() {
        return Err(QuantizerError::LengthMismatch(ka.len(), kc.len()));
    }
    if ka.is_empty() {
        return Ok(0.0);
    }
    let disagreements = (0..ka.len())
        .filter(|&i| {
            let (a, b, c) = (ka.symbols()[i], kb.symbols()[i], kc.symbols()[i]);
            !(a == b && b == c)
        })
        .count();
    Ok(disagreements as f64 / ka.len() as f64)
}

/// Plug-in entropy of the key's symbol distribution, in bits per symbol.
pub fn empirical_entropy_bits(k: &KeySequence) -> f64 {
    if k.is_empty() {
        return 0.0;
    }
    let mut counts: std::collections::BTreeMap<u16, u64> = std::collections::BTreeMap::new();
    for &s in k.symbols() {
        *counts.entry(s).or_insert(0) += 1;
    }
    let weights: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    crate::math::entropy_bits(&weights)
}

/// Key-material file: `#`-prefixed header, then the hex-packed key.
pub fn write_key_material<W: Write>(
    w: &mut W,
    key: &KeySequence,
    bits: u32,
    e: u32,
    quantizer_hash: &str,
    seed: u64,
) -> io::Result<()> {
    writeln!(w, "# b={bits} e={e} quantizer={quantizer_hash} seed={seed} symbols={}", key.len())?;
    writeln!(w, "{}", key.to_hex(bits))
}

/// Public-channel transcript: one JSON line per exchanged index set.
pub fn write_index_exchange_log<W: Write>(
    w: &mut W,
    stage_names: &[&str],
    sets: &[&IndexSet],
) -> io::Result<()> {
    for (name, set) in stage_names.iter().zip(sets) {
        let indices = serde_json::to_string(set.indices()).expect("index vec serializes");
        writeln!(w, "{{\"stage\":\"{name}\",\"count\":{},\"indices\":{indices}}}", set.len())?;
    }
    Ok(())
}
