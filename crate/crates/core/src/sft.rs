//! Shifts of finite type: alphabets, admissible words, the sequence metric
//! and linear-time prefix-match arrays.
//!
//! Symbols are `1..=K` at every public boundary (constructors taking `&[u32]`,
//! CSV and config files) and `0..K` internally.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default cap on the number of words `enumerate_words` may produce.
pub const ENUMERATION_LIMIT: u128 = 1 << 22;

/// Largest alphabet accepted (symbols are stored as `u16`).
pub const MAX_ALPHABET: usize = 4096;

/// Alphabet size and 0/1 adjacency matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftSpec {
    k: usize,
    /// row-major `k * k`
    adjacency: Vec<u8>,
    mixing: Option<usize>,
}

impl SftSpec {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(domain(format!("alphabet size must be at least 2, got {k}")));
        }
        if k > MAX_ALPHABET {
            return Err(Error::Resource(format!(
                "alphabet size {k} exceeds {MAX_ALPHABET}"
            )));
        }
        let mut adjacency = Vec::with_capacity(k * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(domain(format!("row {} has {} entries, expected {k}", i + 1, row.len())));
            }
            for &v in row {
                if v > 1 {
                    return Err(domain(format!("adjacency entry {v} is not 0 or 1")));
                }
                adjacency.push(v);
            }
        }
        let sft = SftSpec {
            k,
            adjacency,
            mixing: None,
        };
        for i in 0..k {
            if !(0..k).any(|j| sft.allowed(i, j)) {
                return Err(domain(format!("symbol {} has no successor", i + 1)));
            }
            if !(0..k).any(|j| sft.allowed(j, i)) {
                return Err(domain(format!("symbol {} has no predecessor", i + 1)));
            }
        }
        Ok(sft)
    }

    pub fn full_shift(k: usize) -> Result<Self> {
        Self::new(vec![vec![1; k]; k])
    }

    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("valid")
    }

    /// Returns the shift with its mixing exponent computed and cached.
    pub fn with_mixing(mut self, cap: usize) -> Result<Self> {
        self.mixing = Some(mixing_exponent(&self, cap)?);
        Ok(self)
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn mixing(&self) -> Option<usize> {
        self.mixing
    }

    /// Allowed transition between 0-based symbols.
    #[inline]
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.k + j] == 1
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.adjacency.chunks(self.k).map(|c| c.to_vec()).collect()
    }

    pub fn is_full_shift(&self) -> bool {
        self.adjacency.iter().all(|&v| v == 1)
    }

    /// Number of admissible words of length `n`, `1^T A^(n-1) 1`, saturating.
    pub fn word_count(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let mut v = vec![1u128; self.k];
        for _ in 1..n {
            let mut w = vec![0u128; self.k];
            for (i, wi) in w.iter_mut().enumerate() {
                for (j, vj) in v.iter().enumerate() {
                    if self.allowed(i, j) {
                        *wi = wi.saturating_add(*vj);
                    }
                }
            }
            v = w;
        }
        v.iter().fold(0u128, |a, b| a.saturating_add(*b))
    }
}

/// A finite admissible word, validated against an [`SftSpec`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Word {
    sft: Arc<SftSpec>,
    symbols: Vec<u16>,
}

impl Word {
    /// Validate 1-based symbols against `sft`.
    pub fn new(sft: Arc<SftSpec>, symbols: &[u32]) -> Result<Self> {
        if !is_admissible(symbols, &sft)? {
            return Err(domain(format!("word {symbols:?} is not admissible")));
        }
        let symbols = symbols.iter().map(|&s| (s - 1) as u16).collect();
        Ok(Word { sft, symbols })
    }

    /// Wrap 0-based symbols already known to be admissible.
    pub(crate) fn from_internal(sft: Arc<SftSpec>, symbols: Vec<u16>) -> Self {
        debug_assert!(symbols.windows(2).all(|p| sft.allowed(p[0] as usize, p[1] as usize)));
        Word { sft, symbols }
    }

    /// Validate 0-based symbols.
    pub fn from_zero_based(sft: Arc<SftSpec>, symbols: Vec<u16>) -> Result<Self> {
        let k = sft.alphabet_size();
        if let Some(&s) = symbols.iter().find(|&&s| s as usize >= k) {
            return Err(domain(format!("symbol index {s} out of range for K={k}")));
        }
        if !symbols.windows(2).all(|p| sft.allowed(p[0] as usize, p[1] as usize)) {
            return Err(domain("word is not admissible"));
        }
        Ok(Word { sft, symbols })
    }

    pub fn sft(&self) -> &Arc<SftSpec> {
        &self.sft
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// 0-based symbols.
    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    /// 1-based symbols, as written in files.
    pub fn to_one_based(&self) -> Vec<u32> {
        self.symbols.iter().map(|&s| s as u32 + 1).collect()
    }

    /// Prefix of length `n` (clamped to the word length).
    pub fn prefix(&self, n: usize) -> Word {
        Word {
            sft: self.sft.clone(),
            symbols: self.symbols[..n.min(self.len())].to_vec(),
        }
    }

    /// The word with its first `p` symbols removed.
    pub fn shifted(&self, p: usize) -> Word {
        Word {
            sft: self.sft.clone(),
            symbols: self.symbols[p.min(self.len())..].to_vec(),
        }
    }
}

/// True iff every adjacent pair of the 1-based `symbols` is allowed.
pub fn is_admissible(symbols: &[u32], sft: &SftSpec) -> Result<bool> {
    let k = sft.alphabet_size() as u32;
    if let Some(&s) = symbols.iter().find(|&&s| s == 0 || s > k) {
        return Err(domain(format!("symbol {s} outside 1..={k}")));
    }
    Ok(symbols
        .windows(2)
        .all(|p| sft.allowed(p[0] as usize - 1, p[1] as usize - 1)))
}

/// Smallest `M <= cap` with `A^M` entrywise positive, by boolean matrix powers.
pub fn mixing_exponent(sft: &SftSpec, cap: usize) -> Result<usize> {
    if cap == 0 {
        return Err(domain("mixing exponent cap must be at least 1"));
    }
    let k = sft.alphabet_size();
    let a: Vec<bool> = (0..k * k).map(|x| sft.allowed(x / k, x % k)).collect();
    let mut cur = a.clone();
    for m in 1..=cap {
        if cur.iter().all(|&b| b) {
            return Ok(m);
        }
        let mut next = vec![false; k * k];
        for i in 0..k {
            for l in 0..k {
                if !cur[i * k + l] {
                    continue;
                }
                for j in 0..k {
                    if a[l * k + j] {
                        next[i * k + j] = true;
                    }
                }
            }
        }
        cur = next;
    }
    Err(Error::NotMixing { cap })
}

/// `|a ^ b|`, the length of the longest common prefix.
pub fn common_prefix_length(a: &Word, b: &Word) -> usize {
    lcp(&a.symbols, &b.symbols)
}

#[inline]
pub(crate) fn lcp(a: &[u16], b: &[u16]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// `d(a, b) = K^(-|a ^ b|)`.
///
/// Pass `same_point = true` when the two finite words stand for the same
/// infinite sequence; the distance is then 0.
pub fn metric(a: &Word, b: &Word, same_point: bool) -> f64 {
    if same_point && a == b {
        return 0.0;
    }
    let k = a.sft.alphabet_size() as f64;
    k.powi(-(common_prefix_length(a, b) as i32))
}

/// `z[p]` = length of the longest common prefix of a word and its suffix
/// starting after `p` symbols, for `1 <= p < len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixMatchArray {
    /// Full Z-array; index 0 holds the word length.
    z: Vec<u32>,
}

impl PrefixMatchArray {
    pub fn new(symbols: &[u16]) -> Self {
        PrefixMatchArray {
            z: z_array(symbols),
        }
    }

    /// `z[p]`; `p = 0` gives the word length and `p >= len` gives 0.
    #[inline]
    pub fn at(&self, p: usize) -> usize {
        self.z.get(p).copied().unwrap_or(0) as usize
    }

    pub fn word_len(&self) -> usize {
        self.z.len()
    }

    /// `[z[1], ..., z[len-1]]`.
    pub fn values(&self) -> &[u32] {
        if self.z.is_empty() {
            &self.z
        } else {
            &self.z[1..]
        }
    }
}

pub fn prefix_match_array(w: &Word) -> PrefixMatchArray {
    PrefixMatchArray::new(&w.symbols)
}

/// Z-algorithm. `z[i]` is the length of the longest common prefix of `s`
/// and `s[i..]`; linear time.
pub fn z_array(s: &[u16]) -> Vec<u32> {
    let n = s.len();
    let mut z = vec![0u32; n];
    if n == 0 {
        return z;
    }
    z[0] = n as u32;
    // [l, r) is the rightmost window known to match a prefix
    let (mut l, mut r) = (0usize, 0usize);
    for i in 1..n {
        let mut k = 0usize;
        if i < r {
            k = (z[i - l] as usize).min(r - i);
        }
        while i + k < n && s[k] == s[i + k] {
            k += 1;
        }
        z[i] = k as u32;
        if i + k > r {
            l = i;
            r = i + k;
        }
    }
    z
}

/// All admissible words of length `n` in lexicographic order.
pub fn enumerate_words(sft: &Arc<SftSpec>, n: usize) -> Result<Vec<Word>> {
    enumerate_words_limited(sft, n, ENUMERATION_LIMIT)
}

pub fn enumerate_words_limited(sft: &Arc<SftSpec>, n: usize, limit: u128) -> Result<Vec<Word>> {
    let count = sft.word_count(n);
    if count > limit {
        return Err(Error::Resource(format!(
            "{count} admissible words of length {n} exceed the enumeration limit {limit}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    if n == 0 {
        out.push(Word::from_internal(sft.clone(), Vec::new()));
        return Ok(out);
    }
    let k = sft.alphabet_size();
    let mut buf: Vec<u16> = Vec::with_capacity(n);
    fn rec(sft: &Arc<SftSpec>, k: usize, n: usize, buf: &mut Vec<u16>, out: &mut Vec<Word>) {
        if buf.len() == n {
            out.push(Word::from_internal(sft.clone(), buf.clone()));
            return;
        }
        for s in 0..k {
            if let Some(&last) = buf.last() {
                if !sft.allowed(last as usize, s) {
                    continue;
                }
            }
            buf.push(s as u16);
            rec(sft, k, n, buf, out);
            buf.pop();
        }
    }
    rec(sft, k, n, &mut buf, &mut out);
    Ok(out)
}

/// Read comma-separated 1-based words, one per line.
pub fn read_words_csv(sft: &Arc<SftSpec>, reader: impl std::io::Read) -> Result<Vec<Word>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut words = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let syms = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<u32>()
                    .map_err(|e| domain(format!("bad symbol {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        words.push(Word::new(sft.clone(), &syms)?);
    }
    Ok(words)
}

pub fn write_words_csv(words: &[Word], writer: impl std::io::Write) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_writer(writer);
    for w in words {
        wtr.write_record(w.to_one_based().iter().map(|s| s.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> Arc<SftSpec> {
        Arc::new(SftSpec::golden_mean())
    }

    fn full2() -> Arc<SftSpec> {
        Arc::new(SftSpec::full_shift(2).unwrap())
    }

    fn z_brute(s: &[u16]) -> Vec<u32> {
        (0..s.len()).map(|i| lcp(s, &s[i..]) as u32).collect()
    }

    #[test]
    fn admissibility() {
        assert!(is_admissible(&[1, 2, 2, 1], &full2()).unwrap());
        assert!(!is_admissible(&[2, 2], &golden()).unwrap());
        assert!(is_admissible(&[1, 2, 1, 2], &golden()).unwrap());
        assert!(matches!(is_admissible(&[1, 3], &golden()), Err(Error::Domain(_))));
        assert!(matches!(is_admissible(&[0], &golden()), Err(Error::Domain(_))));
    }

    #[test]
    fn mixing_exponents() {
        assert_eq!(mixing_exponent(&full2(), 8).unwrap(), 1);
        assert_eq!(mixing_exponent(&golden(), 8).unwrap(), 2);
        let period2 = SftSpec::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert!(matches!(
            mixing_exponent(&period2, 16),
            Err(Error::NotMixing { cap: 16 })
        ));
    }

    #[test]
    fn rejects_dead_symbols_and_bad_entries() {
        assert!(SftSpec::new(vec![vec![1, 0], vec![1, 0]]).is_err());
        assert!(SftSpec::new(vec![vec![1, 2], vec![1, 1]]).is_err());
        assert!(SftSpec::new(vec![vec![1]]).is_err());
    }

    #[test]
    fn prefix_lengths_and_metric() {
        let f = full2();
        let w = |s: &[u32]| Word::new(f.clone(), s).unwrap();
        assert_eq!(common_prefix_length(&w(&[1, 2, 1]), &w(&[1, 2, 2])), 2);
        assert_eq!(common_prefix_length(&w(&[1, 1]), &w(&[2, 1])), 0);
        assert_eq!(common_prefix_length(&w(&[1, 2, 1, 1, 2]), &w(&[1, 2, 1, 1, 2])), 5);
        assert_eq!(metric(&w(&[1, 2, 1, 1]), &w(&[1, 2, 1, 2]), false), 0.125);
        assert_eq!(metric(&w(&[1, 2]), &w(&[1, 2]), true), 0.0);
        let f3 = Arc::new(SftSpec::full_shift(3).unwrap());
        let a = Word::new(f3.clone(), &[1]).unwrap();
        let b = Word::new(f3, &[3]).unwrap();
        assert_eq!(metric(&a, &b, false), 1.0);
    }

    #[test]
    fn prefix_match_examples() {
        let f = full2();
        let pm = |s: &[u32]| prefix_match_array(&Word::new(f.clone(), s).unwrap()).values().to_vec();
        assert_eq!(pm(&[1, 1, 1, 1]), vec![3, 2, 1]);
        assert_eq!(pm(&[1, 2, 1, 2, 1]), vec![0, 3, 0, 1]);
        assert_eq!(pm(&[1, 2, 2]), vec![0, 0]);
        assert_eq!(pm(&[2]), Vec::<u32>::new());
    }

    #[test]
    fn z_array_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..200);
            let k = rng.random_range(1..4);
            let s: Vec<u16> = (0..n).map(|_| rng.random_range(0..k)).collect();
            assert_eq!(z_array(&s), z_brute(&s));
        }
    }

    #[test]
    fn enumeration_examples() {
        let g = golden();
        let w2: Vec<Vec<u32>> = enumerate_words(&g, 2)
            .unwrap()
            .iter()
            .map(|w| w.to_one_based())
            .collect();
        assert_eq!(w2, vec![vec![1, 1], vec![1, 2], vec![2, 1]]);
        assert_eq!(enumerate_words(&full2(), 3).unwrap().len(), 8);
        assert_eq!(enumerate_words(&g, 4).unwrap().len(), 8);
        assert!(matches!(
            enumerate_words_limited(&full2(), 10, 1000),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn enumeration_count_matches_transfer_count() {
        let g = golden();
        for n in 1..=14 {
            assert_eq!(enumerate_words(&g, n).unwrap().len() as u128, g.word_count(n));
        }
    }

    #[test]
    fn metric_is_an_ultrametric_on_enumerated_words() {
        let g = golden();
        let words = enumerate_words(&g, 5).unwrap();
        for a in &words {
            for b in &words {
                assert_eq!(metric(a, b, false), metric(b, a, false));
                for c in &words {
                    let (ab, bc, ac) = (metric(a, b, false), metric(b, c, false), metric(a, c, false));
                    assert!(ac <= ab.max(bc));
                }
            }
        }
    }

    #[test]
    fn words_csv_round_trip() {
        let g = golden();
        let words = enumerate_words(&g, 3).unwrap();
        let mut buf = Vec::new();
        write_words_csv(&words, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().next(), Some("1,1,1"));
        let back = read_words_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back, words);
    }
}
