//! Byte-pair merge training over prose segments.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use super::vocab::{ReservedTables, Vocabulary};
use super::{Document, Segment};
use crate::error::{Error, Result};

/// Splits prose into merge units: each unit is a whitespace run followed by
/// the next non-whitespace run. Merges never cross unit boundaries.
pub(crate) fn pretokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut prev_ws = true;
    for (i, c) in text.char_indices() {
        let ws = c.is_whitespace();
        if ws && !prev_ws && i > start {
            out.push(&text[start..i]);
            start = i;
        }
        prev_ws = ws;
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

/// Learns merges from the prose of `corpus` until the vocabulary holds
/// exactly `target_size` tokens.
///
/// Reserved tokens (identifiers, byte fallbacks, atoms, molecule symbols and
/// amino acids) occupy the first ids and take no part in merging; entity
/// span contents are excluded from training. The prose alphabet comes next,
/// most frequent characters first when the budget cannot hold all of them.
/// Among equally frequent pairs the lexicographically smallest
/// `(left, right)` string pair is merged first.
pub fn train_bpe(corpus: &[Document], target_size: usize) -> Result<Vocabulary> {
    train_bpe_with(corpus, target_size, ReservedTables::default())
}

pub(crate) fn train_bpe_with(
    corpus: &[Document],
    target_size: usize,
    tables: ReservedTables,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Invalid("empty training corpus".into()));
    }
    let reserved = tables.count();
    if target_size < reserved {
        return Err(Error::Invalid(format!(
            "target size {target_size} is below the {reserved} reserved tokens"
        )));
    }

    let mut unit_freq: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in corpus {
        doc.validate()?;
        for seg in doc.segments() {
            if let Segment::Prose(p) = seg {
                for unit in pretokenize(p) {
                    *unit_freq.entry(unit).or_default() += 1;
                }
            }
        }
    }

    let mut char_freq: BTreeMap<char, u64> = BTreeMap::new();
    for (unit, f) in &unit_freq {
        for c in unit.chars() {
            *char_freq.entry(c).or_default() += f;
        }
    }
    let budget = target_size - reserved;
    let mut alphabet: Vec<(char, u64)> = char_freq.into_iter().collect();
    if alphabet.len() > budget {
        alphabet.sort_by_key(|&(c, f)| (Reverse(f), c));
        alphabet.truncate(budget);
        alphabet.sort_by_key(|&(c, _)| c);
    }
    let alphabet: Vec<char> = alphabet.into_iter().map(|(c, _)| c).collect();
    let mut vocab = Vocabulary::assemble(tables, &alphabet, Vec::new())?;
    if vocab.size() == target_size {
        return Ok(vocab);
    }

    // Words are runs of known characters; unknown characters fall back to
    // bytes at encode time and split a unit into independent words.
    let mut word_freq: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    for (unit, f) in &unit_freq {
        let mut cur = Vec::new();
        for c in unit.chars() {
            match vocab.piece_id(c.encode_utf8(&mut [0; 4])) {
                Some(id) => cur.push(id),
                None => {
                    if cur.len() > 1 {
                        *word_freq.entry(std::mem::take(&mut cur)).or_default() += f;
                    }
                    cur.clear();
                }
            }
        }
        if cur.len() > 1 {
            *word_freq.entry(cur).or_default() += f;
        }
    }
    let (mut words, freqs): (Vec<Vec<u32>>, Vec<u64>) = word_freq.into_iter().unzip();

    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut locations: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, w) in words.iter().enumerate() {
        for p in w.windows(2) {
            let pair = (p[0], p[1]);
            *counts.entry(pair).or_default() += freqs[wi];
            locations.entry(pair).or_default().insert(wi);
        }
    }

    let text_of = |v: &Vocabulary, id: u32| v.token(id).map(|t| t.surface()).unwrap_or_default();
    let mut heap: BinaryHeap<(u64, Reverse<(String, String)>, (u32, u32))> = counts
        .iter()
        .map(|(&pair, &c)| (c, Reverse((text_of(&vocab, pair.0), text_of(&vocab, pair.1))), pair))
        .collect();

    while vocab.size() < target_size {
        let Some((count, _, pair)) = heap.pop() else {
            break;
        };
        if count == 0 || counts.get(&pair) != Some(&count) {
            continue;
        }
        let new_id = vocab.push_merge(pair.0, pair.1)?;
        let affected: Vec<usize> = {
            let mut v: Vec<usize> = locations.remove(&pair).unwrap_or_default().into_iter().collect();
            v.sort_unstable();
            v
        };
        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        for wi in affected {
            let f = freqs[wi];
            let old = &words[wi];
            for p in old.windows(2) {
                let q = (p[0], p[1]);
                if let Some(c) = counts.get_mut(&q) {
                    *c -= f;
                }
                touched.insert(q);
            }
            let merged = apply_merge(old, pair, new_id);
            for p in merged.windows(2) {
                let q = (p[0], p[1]);
                *counts.entry(q).or_default() += f;
                locations.entry(q).or_default().insert(wi);
                touched.insert(q);
            }
            words[wi] = merged;
        }
        let mut touched: Vec<_> = touched.into_iter().collect();
        touched.sort_unstable();
        for q in touched {
            let c = counts[&q];
            if c == 0 {
                counts.remove(&q);
                locations.remove(&q);
            } else if q != pair {
                heap.push((c, Reverse((text_of(&vocab, q.0), text_of(&vocab, q.1))), q));
            }
        }
        counts.remove(&pair);
    }

    if vocab.size() < target_size {
        return Err(Error::CorpusTooSmall {
            requested: target_size,
            achievable: vocab.size(),
        });
    }
    Ok(vocab)
}

/// Replaces non-overlapping occurrences of `pair`, scanning left to right.
pub(crate) fn apply_merge(word: &[u32], pair: (u32, u32), new_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(word.len());
    let mut i = 0;
    while i < word.len() {
        if i + 1 < word.len() && (word[i], word[i + 1]) == pair {
            out.push(new_id);
            i += 2;
        } else {
            out.push(word[i]);
            i += 1;
        }
    }
    out
}

/// Encodes one merge unit by repeatedly applying the lowest-ranked merge.
pub(crate) fn encode_unit(vocab: &Vocabulary, unit: &str, out: &mut Vec<u32>) {
    let mut pending: Vec<u32> = Vec::new();
    for c in unit.chars() {
        match vocab.piece_id(c.encode_utf8(&mut [0; 4])) {
            Some(id) => pending.push(id),
            None => {
                merge_word(vocab, &mut pending);
                out.append(&mut pending);
                let mut buf = [0u8; 4];
                out.extend(c.encode_utf8(&mut buf).bytes().map(|b| vocab.byte_id(b)));
            }
        }
    }
    merge_word(vocab, &mut pending);
    out.append(&mut pending);
}

fn merge_word(vocab: &Vocabulary, word: &mut Vec<u32>) {
    while word.len() > 1 {
        let best = word
            .windows(2)
            .filter_map(|p| vocab.merge(p[0], p[1]).map(|(rank, id)| (rank, (p[0], p[1]), id)))
            .min_by_key(|&(rank, _, _)| rank);
        match best {
            Some((_, pair, id)) => *word = apply_merge(word, pair, id),
            None => break,
        }
    }
}
