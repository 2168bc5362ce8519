use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numeric::Mat;
use crate::sampling::{par_trials, trial_rng, SamplePlan, Sampler};
use crate::sft::z_array;
use crate::thermo::GibbsModel;

use super::rate::RateFunction;

/// Closed range of times `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: u64,
    pub hi: u64,
}

impl Window {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(domain(format!("bad window [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowStats {
    pub lo: u64,
    pub hi: u64,
    /// trials with at least one satisfied event in the window
    pub trials_with_hit: u64,
    pub hit_fraction: f64,
    pub mean_events: f64,
    pub undecidable: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// satisfied events over `[1, L]`
    pub events: u64,
    pub undecidable: u64,
    pub last_event: Option<u64>,
    pub window_events: Vec<u64>,
    pub window_undecidable: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub rate: String,
    pub length: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub windows: Vec<WindowStats>,
    /// total event count per trial -> number of trials
    pub histogram: BTreeMap<u64, u64>,
    pub per_trial: Vec<TrialRecord>,
}

impl ExperimentSummary {
    pub fn last_event_times(&self) -> Vec<Option<u64>> {
        self.per_trial.iter().map(|t| t.last_event).collect()
    }

    pub fn mean_events(&self) -> f64 {
        if self.per_trial.is_empty() {
            return 0.0;
        }
        self.per_trial.iter().map(|t| t.events as f64).sum::<f64>() / self.per_trial.len() as f64
    }
}

/// Sample `plan.trials` words and record the events `z[n] >= psi(n)` for
/// `n` in `[1, L]`. Times with `n + psi(n) > L` are counted as undecidable
/// and excluded from hits.
pub fn run_experiment(
    psi: &RateFunction,
    plan: &SamplePlan,
    windows: &[Window],
    workers: usize,
) -> Result<ExperimentSummary> {
    let model = &plan.model;
    model.require_positive_variance()?;
    let len = plan.length as u64;
    for w in windows {
        if w.hi > len {
            return Err(domain(format!("window [{}, {}] exceeds the word length {len}", w.lo, w.hi)));
        }
    }
    let req = psi.values(1, len)?;
    let sampler = Sampler::new(model);
    let records = par_trials(workers, plan.trials, |t| {
        let mut rng = trial_rng(plan.master_seed, t as u64);
        let mut syms = Vec::with_capacity(plan.length);
        sampler.fill(&mut rng, plan.length, &mut syms);
        let z = z_array(&syms);
        let mut rec = TrialRecord {
            trial: t as u64,
            events: 0,
            undecidable: 0,
            last_event: None,
            window_events: vec![0; windows.len()],
            window_undecidable: vec![0; windows.len()],
        };
        for n in 1..=len {
            let r = req[n as usize - 1];
            let decidable = n + r <= len;
            let hit = decidable && z[n as usize] as u64 >= r;
            if !decidable {
                rec.undecidable += 1;
            } else if hit {
                rec.events += 1;
                rec.last_event = Some(n);
            }
            if !decidable || hit {
                for (i, w) in windows.iter().enumerate() {
                    if (w.lo..=w.hi).contains(&n) {
                        if hit {
                            rec.window_events[i] += 1;
                        } else {
                            rec.window_undecidable[i] += 1;
                        }
                    }
                }
            }
        }
        Ok(rec)
    })?;
    let trials = records.len().max(1) as f64;
    let windows = windows
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let hits = records.iter().filter(|r| r.window_events[i] > 0).count() as u64;
            WindowStats {
                lo: w.lo,
                hi: w.hi,
                trials_with_hit: hits,
                hit_fraction: hits as f64 / trials,
                mean_events: records.iter().map(|r| r.window_events[i] as f64).sum::<f64>() / trials,
                undecidable: records.iter().map(|r| r.window_undecidable[i]).sum(),
            }
        })
        .collect();
    let mut histogram = BTreeMap::new();
    for r in &records {
        *histogram.entry(r.events).or_insert(0) += 1;
    }
    Ok(ExperimentSummary {
        rate: psi.describe(),
        length: plan.length,
        trials: plan.trials,
        master_seed: plan.master_seed,
        windows,
        histogram,
        per_trial: records,
    })
}

/// Expected number of `n` in `[lo, hi]` with `n + psi(n) <= length` and
/// `w[n+1..n+psi(n)] = w[1..psi(n)]` under the stationary chain.
pub fn expected_event_count(model: &GibbsModel, psi: &RateFunction, lo: u64, hi: u64, length: u64) -> Result<f64> {
    if lo == 0 || lo > hi {
        return Err(domain(format!("bad range [{lo}, {hi}]")));
    }
    let p = &model.transition;
    let k = model.k();
    // Q_ab = P_ab^2: probability that two copies both step a -> b
    let mut q = Mat::zeros(k);
    for a in 0..k {
        for b in 0..k {
            q[(a, b)] = p[(a, b)] * p[(a, b)];
        }
    }
    let req = psi.values(lo, hi)?;
    let mut total = 0.0;
    let mut q_cache: BTreeMap<u64, Mat> = BTreeMap::new();
    for (n, r) in (lo..=hi).zip(req) {
        if n + r > length {
            continue;
        }
        if r == 0 {
            total += 1.0;
            continue;
        }
        total += match_probability(model, &q, p, n, r, &mut q_cache)?;
    }
    Ok(total)
}

/// `P(w[n+1..n+r] = w[1..r])` for the stationary chain.
fn match_probability(
    model: &GibbsModel,
    q: &Mat,
    p: &Mat,
    n: u64,
    r: u64,
    q_cache: &mut BTreeMap<u64, Mat>,
) -> Result<f64> {
    let k = model.k();
    let pi = &model.pi;
    Ok(if n >= r {
        // disjoint blocks: w1..wr, gap, w_{n+1}..w_{n+r}
        let qr = q_cache.entry(r - 1).or_insert_with(|| q.pow(r - 1)).clone();
        let gap = p.pow(n - r + 1);
        let mut s = 0.0;
        for a in 0..k {
            for b in 0..k {
                if qr[(a, b)] > 0.0 {
                    // w1 = a, wr = b, then b -> a in n - r + 1 steps
                    s += pi[a] * qr[(a, b)] * gap[(b, a)];
                }
            }
        }
        s
    } else {
        // overlapping: w[1..n+r] must have period n
        periodic_probability(model, n as usize, (n + r) as usize)?
    })
}

/// Probability that `w[1..len]` has period `n`, by enumerating blocks of
/// length `n` for small `n`.
fn periodic_probability(model: &GibbsModel, n: usize, len: usize) -> Result<f64> {
    let k = model.k();
    let p = &model.transition;
    let pi = &model.pi;
    let blocks = (k as f64).powi(n as i32);
    if blocks > 1e6 {
        return Err(crate::Error::Resource(format!("psi(n) > n at n={n}: too many blocks to enumerate")));
    }
    let mut total = 0.0;
    let mut u = vec![0usize; n];
    loop {
        let mut pr = pi[u[0]];
        for t in 1..len {
            pr *= p[(u[(t - 1) % n], u[t % n])];
            if pr == 0.0 {
                break;
            }
        }
        total += pr;
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(total);
            }
            i -= 1;
            u[i] += 1;
            if u[i] < k {
                break;
            }
            u[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::{build_bernoulli, BernoulliSpec};
    use std::sync::Arc;

    fn model() -> Arc<GibbsModel> {
        Arc::new(build_bernoulli(&BernoulliSpec::new(vec![0.8, 0.2]).unwrap()).unwrap())
    }

    #[test]
    fn first_moment_against_bernoulli_closed_form() {
        let m = model();
        // disjoint blocks of an i.i.d. word: (p^2 + q^2)^r
        let c = 0.8f64 * 0.8 + 0.2 * 0.2;
        let e = expected_event_count(&m, &RateFunction::constant(3), 5, 20, 1000).unwrap();
        assert!((e - 16.0 * c.powi(3)).abs() < 1e-12);
        // n = 1, r = 2: w1 = w2 = w3
        let e = expected_event_count(&m, &RateFunction::constant(2), 1, 1, 100).unwrap();
        assert!((e - (0.8f64.powi(3) + 0.2f64.powi(3))).abs() < 1e-12);
        // n = 2, r = 3: period 2 over 5 symbols, a b a b a
        let e = expected_event_count(&m, &RateFunction::constant(3), 2, 2, 100).unwrap();
        let oracle: f64 = [(0.8, 0.8), (0.8, 0.2), (0.2, 0.8), (0.2, 0.2)]
            .iter()
            .map(|(a, b): &(f64, f64)| a.powi(3) * b.powi(2))
            .sum();
        assert!((e - oracle).abs() < 1e-12);
    }

    #[test]
    fn experiment_counts_match_mean() {
        let m = model();
        let plan = SamplePlan::new(m.clone(), 400, 300, 11).unwrap();
        let psi = RateFunction::constant(4);
        let w = [Window::new(10, 100).unwrap()];
        let s = run_experiment(&psi, &plan, &w, 2).unwrap();
        let e = expected_event_count(&m, &psi, 10, 100, 400).unwrap();
        assert!((s.windows[0].mean_events - e).abs() < 0.1 * e);
        assert_eq!(s.histogram.values().sum::<u64>(), 300);
        let again = run_experiment(&psi, &plan, &w, 5).unwrap();
        assert_eq!(s.per_trial, again.per_trial);
    }

    #[test]
    fn undecidable_tail_is_excluded() {
        let plan = SamplePlan::new(model(), 50, 4, 1).unwrap();
        let s = run_experiment(&RateFunction::constant(10), &plan, &[Window::new(41, 50).unwrap()], 1).unwrap();
        assert_eq!(s.windows[0].undecidable, 4 * 10);
        assert_eq!(s.windows[0].trials_with_hit, 0);
    }
}
