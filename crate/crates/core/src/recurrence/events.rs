use std::collections::HashMap;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::sft::{PrefixMatchArray, Word};

use super::rate::RateFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStatus {
    Satisfied,
    NotSatisfied,
    /// `n + psi(n)` runs past the end of the word
    Undecidable,
}

/// The recurrence condition `d(sigma^n w, w) <= K^-psi(n)` at one time `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RecurrenceEvent {
    pub n: u64,
    pub required: u64,
    pub achieved: u64,
    pub status: EventStatus,
}

impl RecurrenceEvent {
    pub fn satisfied(&self) -> bool {
        self.status == EventStatus::Satisfied
    }
}

/// Classify time `n` from `z[n]` and the required match length.
#[inline]
pub fn classify(n: u64, required: u64, z: &PrefixMatchArray) -> RecurrenceEvent {
    let len = z.word_len() as u64;
    let achieved = if n < len { z.at(n as usize) as u64 } else { 0 };
    let status = if n.saturating_add(required) > len {
        EventStatus::Undecidable
    } else if achieved >= required {
        EventStatus::Satisfied
    } else {
        EventStatus::NotSatisfied
    };
    RecurrenceEvent {
        n,
        required,
        achieved,
        status,
    }
}

/// Events for every `n` in `[n_lo, n_hi]`.
pub fn detect_events(w: &Word, psi: &RateFunction, n_lo: u64, n_hi: u64) -> Result<Vec<RecurrenceEvent>> {
    if n_lo == 0 || n_lo > n_hi {
        return Err(domain(format!("bad event range [{n_lo}, {n_hi}]")));
    }
    let z = PrefixMatchArray::new(w.symbols());
    let req = psi.values(n_lo, n_hi)?;
    Ok((n_lo..=n_hi)
        .zip(req)
        .map(|(n, r)| classify(n, r, &z))
        .collect())
}

/// One level `n_k` of the subsequence detector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubsequenceEvent {
    pub k: usize,
    pub n_k: u64,
    /// smallest `p` with `psi(p) = n_k` and `z[p] >= n_k`
    pub witness: Option<u64>,
    /// preimages `p <= |w|` examined
    pub preimages: u64,
    pub status: EventStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubsequenceReport {
    pub events: Vec<SubsequenceEvent>,
    pub warnings: Vec<String>,
}

/// For each `n_k`: is there `p` with `psi(p) = n_k`, `p + n_k <= |w|` and
/// `z[p] >= n_k`? Preimages are searched among `p <= |w|`.
pub fn detect_subsequence_events(w: &Word, psi: &RateFunction, nk: &[u64]) -> Result<SubsequenceReport> {
    if !nk.windows(2).all(|p| p[0] < p[1]) {
        return Err(domain("n_k must be strictly increasing"));
    }
    let len = w.len() as u64;
    let z = PrefixMatchArray::new(w.symbols());
    let index: HashMap<u64, usize> = nk.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut events: Vec<SubsequenceEvent> = nk
        .iter()
        .enumerate()
        .map(|(k, &n_k)| SubsequenceEvent {
            k: k + 1,
            n_k,
            witness: None,
            preimages: 0,
            status: EventStatus::NotSatisfied,
        })
        .collect();
    let mut pending_undecidable = vec![false; nk.len()];
    if len >= 1 {
        let hi = psi.domain_limit().map_or(len, |l| l.min(len));
        for (off, v) in psi.values(1, hi)?.into_iter().enumerate() {
            let p = off as u64 + 1;
            let Some(&i) = index.get(&v) else { continue };
            let ev = &mut events[i];
            ev.preimages += 1;
            if ev.witness.is_some() {
                continue;
            }
            let e = classify(p, v, &z);
            match e.status {
                EventStatus::Satisfied => {
                    ev.witness = Some(p);
                    ev.status = EventStatus::Satisfied;
                }
                EventStatus::Undecidable => pending_undecidable[i] = true,
                EventStatus::NotSatisfied => {}
            }
        }
    }
    for (ev, und) in events.iter_mut().zip(pending_undecidable) {
        if ev.witness.is_none() && und {
            ev.status = EventStatus::Undecidable;
        }
    }
    let mut warnings = Vec::new();
    if !events.is_empty() && events.iter().all(|e| e.preimages == 0) {
        warnings.push("psi^-1(n_k) is empty for every k in range".to_string());
    }
    Ok(SubsequenceReport { events, warnings })
}

/// Quadratic reference detector straight from the definition:
/// `w[n+1..n+psi(n)] == w[1..psi(n)]`.
pub fn brute_force_events(symbols: &[u16], required: &[u64], n_lo: u64) -> Vec<EventStatus> {
    let len = symbols.len() as u64;
    required
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let n = n_lo + i as u64;
            if n + r > len {
                EventStatus::Undecidable
            } else if (0..r as usize).all(|t| symbols[n as usize + t] == symbols[t]) {
                EventStatus::Satisfied
            } else {
                EventStatus::NotSatisfied
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::SftSpec;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn full2() -> Arc<SftSpec> {
        Arc::new(SftSpec::full_shift(2).unwrap())
    }

    #[test]
    fn constant_word_always_recurs() {
        let w = Word::new(full2(), &[1; 50]).unwrap();
        let ev = detect_events(&w, &RateFunction::constant(3), 1, 47).unwrap();
        assert!(ev.iter().all(|e| e.satisfied()));
        let ev = detect_events(&w, &RateFunction::constant(3), 48, 49).unwrap();
        assert!(ev.iter().all(|e| e.status == EventStatus::Undecidable));
    }

    #[test]
    fn alternating_word_recurs_at_even_times() {
        let syms: Vec<u32> = (0..40).map(|i| 1 + (i % 2)).collect();
        let w = Word::new(full2(), &syms).unwrap();
        let ev = detect_events(&w, &RateFunction::constant(2), 1, 38).unwrap();
        for e in ev {
            assert_eq!(e.satisfied(), e.n % 2 == 0, "n={}", e.n);
        }
    }

    #[test]
    fn detector_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let sft = full2();
        for _ in 0..200 {
            let len = rng.random_range(1..300usize);
            let k = rng.random_range(1..=2u16);
            let syms: Vec<u16> = (0..len).map(|_| rng.random_range(0..k)).collect();
            let w = Word::from_zero_based(sft.clone(), syms.clone()).unwrap();
            let table: Vec<u64> = (0..len + 5).map(|_| rng.random_range(0..8)).collect();
            let psi = RateFunction::table(table.clone()).unwrap();
            let hi = len as u64 + 3;
            let ev = detect_events(&w, &psi, 1, hi).unwrap();
            let oracle = brute_force_events(&syms, &table[..hi as usize], 1);
            let got: Vec<EventStatus> = ev.iter().map(|e| e.status).collect();
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn subsequence_events() {
        let w = Word::new(full2(), &[1; 40]).unwrap();
        let psi = RateFunction::identity().with_clamp(false);
        // psi(p) = p, so the preimage of n_k is {n_k}; decidable iff 2 n_k <= 40
        let rep = detect_subsequence_events(&w, &psi, &[3, 10, 20, 25]).unwrap();
        let st: Vec<EventStatus> = rep.events.iter().map(|e| e.status).collect();
        assert_eq!(
            st,
            vec![
                EventStatus::Satisfied,
                EventStatus::Satisfied,
                EventStatus::Satisfied,
                EventStatus::Undecidable
            ]
        );
        assert_eq!(rep.events[1].witness, Some(10));
        let rep = detect_subsequence_events(&w, &RateFunction::constant(4), &[7]).unwrap();
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn subsequence_witness_is_an_ordinary_event() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let sft = full2();
        for _ in 0..100 {
            let len = rng.random_range(10..200usize);
            let syms: Vec<u16> = (0..len).map(|_| u16::from(rng.random_bool(0.7))).collect();
            let w = Word::from_zero_based(sft.clone(), syms).unwrap();
            let table: Vec<u64> = (0..len).map(|_| rng.random_range(0..5)).collect();
            let psi = RateFunction::table(table).unwrap();
            let rep = detect_subsequence_events(&w, &psi, &[0, 1, 2, 3, 4]).unwrap();
            let ev = detect_events(&w, &psi, 1, len as u64).unwrap();
            for s in &rep.events {
                if let Some(p) = s.witness {
                    assert!(ev[p as usize - 1].satisfied());
                    assert_eq!(ev[p as usize - 1].required, s.n_k);
                }
            }
        }
    }
}
