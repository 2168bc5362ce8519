//! Seeded sampling of admissible sequences from a Gibbs model and the
//! normalized log-cylinder statistics of the central limit theorem and the
//! law of the iterated logarithm.

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::numeric::glog2;
use crate::sft::Word;
use crate::thermo::{log_measure_symbols, GibbsModel};

/// Default first checkpoint of the geometric grid.
pub const FIRST_CHECKPOINT: usize = 16;

#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub length: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub model: Arc<GibbsModel>,
}

impl SamplePlan {
    pub fn new(model: Arc<GibbsModel>, length: usize, trials: usize, master_seed: u64) -> Result<Self> {
        if length == 0 || trials == 0 {
            return Err(domain("sample plan needs length >= 1 and trials >= 1"));
        }
        Ok(SamplePlan {
            length,
            trials,
            master_seed,
            model,
        })
    }
}

/// Random stream for one trial: ChaCha8 keyed by the master seed, with the
/// trial index as stream id. The step is the position within the stream.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Integer inverse-CDF tables for `pi` and each transition row.
#[derive(Clone, Debug)]
pub struct Sampler {
    k: usize,
    initial: Vec<u64>,
    /// row-major cumulative thresholds
    rows: Vec<u64>,
}

fn thresholds(p: &[f64]) -> Vec<u64> {
    let total: f64 = p.iter().sum();
    let last = p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1);
    let mut acc = 0.0;
    p.iter()
        .enumerate()
        .map(|(j, &x)| {
            acc += x;
            if j >= last {
                u64::MAX
            } else {
                // 2^64 * cumulative probability, saturating
                ((acc / total) * 18_446_744_073_709_551_616.0).min(u64::MAX as f64) as u64
            }
        })
        .collect()
}

impl Sampler {
    pub fn new(model: &GibbsModel) -> Self {
        let k = model.k();
        let mut rows = Vec::with_capacity(k * k);
        for i in 0..k {
            rows.extend(thresholds(model.transition.row(i)));
        }
        Sampler {
            k,
            initial: thresholds(&model.pi),
            rows,
        }
    }

    #[inline]
    fn pick(table: &[u64], x: u64) -> u16 {
        // the last positive entry has threshold u64::MAX, so this always lands
        table.iter().position(|&t| x < t).unwrap_or(table.len() - 1) as u16
    }

    /// Fill `out` with `length` symbols (0-based).
    pub fn fill(&self, rng: &mut impl RngCore, length: usize, out: &mut Vec<u16>) {
        out.clear();
        if length == 0 {
            return;
        }
        out.reserve(length);
        let mut s = Self::pick(&self.initial, rng.next_u64());
        out.push(s);
        for _ in 1..length {
            let row = &self.rows[s as usize * self.k..(s as usize + 1) * self.k];
            s = Self::pick(row, rng.next_u64());
            out.push(s);
        }
    }
}

/// `length` symbols from the model: first from `pi`, then along transition rows.
pub fn sample_sequence(model: &GibbsModel, length: usize, seed: u64) -> Result<Word> {
    sample_trial(model, length, seed, 0)
}

/// The sequence of trial `trial` under `master_seed`.
pub fn sample_trial(model: &GibbsModel, length: usize, master_seed: u64, trial: u64) -> Result<Word> {
    if length == 0 {
        return Err(domain("sample length must be at least 1"));
    }
    let mut rng = trial_rng(master_seed, trial);
    let mut buf = Vec::new();
    Sampler::new(model).fill(&mut rng, length, &mut buf);
    Ok(Word::from_internal(model.sft.clone(), buf))
}

/// Running `log mu([w_1..w_n])` for `n = 1..=|w|`.
pub fn log_prefix_measure_stream(model: &GibbsModel, w: &Word) -> Vec<f64> {
    log_prefix_stream_symbols(model, w.symbols())
}

pub(crate) fn log_prefix_stream_symbols(model: &GibbsModel, s: &[u16]) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    let Some(&first) = s.first() else {
        return out;
    };
    let mut acc = model.pi[first as usize].ln();
    out.push(acc);
    for p in s.windows(2) {
        acc += model.transition[(p[0] as usize, p[1] as usize)].ln();
        out.push(acc);
    }
    out
}

fn require_variance(model: &GibbsModel) -> Result<()> {
    model.require_positive_variance()
}

/// `(log mu([w|n]) + h n) / sqrt(rho n)`.
pub fn clt_statistic(model: &GibbsModel, w: &Word, n: usize) -> Result<f64> {
    require_variance(model)?;
    if n == 0 || n > w.len() {
        return Err(domain(format!("n={n} outside 1..={}", w.len())));
    }
    let lm = log_measure_symbols(model, &w.symbols()[..n]);
    Ok(clt_value(model, lm, n))
}

#[inline]
fn clt_value(model: &GibbsModel, log_measure: f64, n: usize) -> f64 {
    let n = n as f64;
    (log_measure + model.h_mu * n) / (model.rho_mu * n).sqrt()
}

/// `log log n` must be positive for the LIL normalization.
pub fn lil_admissible(n: usize) -> bool {
    glog2(n as f64) > 0.0
}

#[inline]
fn lil_value(model: &GibbsModel, log_measure: f64, n: usize) -> f64 {
    let nf = n as f64;
    (log_measure + model.h_mu * nf) / (2.0 * model.rho_mu * nf * glog2(nf)).sqrt()
}

/// `(log mu([w|n]) + h n) / sqrt(2 rho n log log n)`.
pub fn lil_statistic(model: &GibbsModel, w: &Word, n: usize) -> Result<f64> {
    require_variance(model)?;
    if n > w.len() {
        return Err(domain(format!("n={n} exceeds the word length {}", w.len())));
    }
    if !lil_admissible(n) {
        return Err(domain(format!("log log {n} is not positive")));
    }
    let lm = log_measure_symbols(model, &w.symbols()[..n]);
    Ok(lil_value(model, lm, n))
}

/// `{2^4, 2^5, ...}` up to `length`, with `length` itself appended.
pub fn geometric_checkpoints(length: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = FIRST_CHECKPOINT;
    while n < length {
        out.push(n);
        n *= 2;
    }
    if length >= 1 {
        out.push(length);
    }
    out
}

/// Normalized statistics of one sampled sequence at each checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatSeries {
    pub trial: usize,
    pub checkpoints: Vec<usize>,
    pub clt: Vec<f64>,
    /// NaN where `log log n` is not positive
    pub lil: Vec<f64>,
    pub log_measure: Vec<f64>,
}

pub fn stat_series(model: &GibbsModel, w: &Word, trial: usize, checkpoints: &[usize]) -> Result<StatSeries> {
    require_variance(model)?;
    if !checkpoints.windows(2).all(|p| p[0] < p[1]) {
        return Err(domain("checkpoints must be strictly increasing"));
    }
    if let Some(&last) = checkpoints.last() {
        if last > w.len() || checkpoints[0] == 0 {
            return Err(domain("checkpoints must lie in 1..=|w|"));
        }
    }
    let stream = log_prefix_measure_stream(model, w);
    let mut s = StatSeries {
        trial,
        checkpoints: checkpoints.to_vec(),
        clt: Vec::with_capacity(checkpoints.len()),
        lil: Vec::with_capacity(checkpoints.len()),
        log_measure: Vec::with_capacity(checkpoints.len()),
    };
    for &n in checkpoints {
        let lm = stream[n - 1];
        s.log_measure.push(lm);
        s.clt.push(clt_value(model, lm, n));
        s.lil.push(if lil_admissible(n) {
            lil_value(model, lm, n)
        } else {
            f64::NAN
        });
    }
    Ok(s)
}

/// Running maximum; NaN entries are skipped.
pub fn running_max(values: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    values
        .iter()
        .map(|&v| {
            if v > m {
                m = v;
            }
            m
        })
        .collect()
}

/// `max_{n_lo <= n <= n_hi} lil_statistic(w, n)`, evaluated at every n.
pub fn lil_running_max(model: &GibbsModel, w: &Word, n_lo: usize, n_hi: usize) -> Result<f64> {
    require_variance(model)?;
    if n_hi > w.len() || n_lo > n_hi || !lil_admissible(n_lo) {
        return Err(domain(format!("invalid LIL range [{n_lo}, {n_hi}]")));
    }
    let stream = log_prefix_measure_stream(model, w);
    Ok((n_lo..=n_hi)
        .map(|n| lil_value(model, stream[n - 1], n))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// the standard normal.
pub fn ks_distance_normal(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() || samples.iter().any(|x| !x.is_finite()) {
        return Err(domain("KS distance needs finite samples"));
    }
    let normal = Normal::standard();
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = normal.cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

/// Run `f(trial)` for every trial on a pool of `workers` threads; results
/// come back in trial order whatever the scheduling.
pub fn par_trials<T: Send>(workers: usize, trials: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    pool.install(|| (0..trials).into_par_iter().map(&f).collect())
}

/// Statistic series for every trial of a plan.
pub fn stat_batch(plan: &SamplePlan, checkpoints: &[usize], workers: usize) -> Result<Vec<StatSeries>> {
    let model = &plan.model;
    require_variance(model)?;
    let sampler = Sampler::new(model);
    par_trials(workers, plan.trials, |t| {
        let mut rng = trial_rng(plan.master_seed, t as u64);
        let mut buf = Vec::new();
        sampler.fill(&mut rng, plan.length, &mut buf);
        let w = Word::from_internal(model.sft.clone(), buf);
        stat_series(model, &w, t, checkpoints)
    })
}

/// CSV with columns `trial,n,clt_stat,lil_stat,log_measure`.
pub fn write_stat_csv(series: &[StatSeries], writer: impl std::io::Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["trial", "n", "clt_stat", "lil_stat", "log_measure"])?;
    for s in series {
        for i in 0..s.checkpoints.len() {
            wtr.write_record([
                s.trial.to_string(),
                s.checkpoints[i].to_string(),
                s.clt[i].to_string(),
                s.lil[i].to_string(),
                s.log_measure[i].to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::SftSpec;
    use crate::thermo::{build_bernoulli, build_gibbs, cylinder_measure, BernoulliSpec, Potential};

    fn bern82() -> GibbsModel {
        build_bernoulli(&BernoulliSpec::new(vec![0.8, 0.2]).unwrap()).unwrap()
    }

    fn golden() -> GibbsModel {
        let sft = Arc::new(SftSpec::golden_mean());
        build_gibbs(&sft, &Potential::zero(&sft, 2).unwrap()).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_admissible() {
        let m = golden();
        let a = sample_sequence(&m, 5000, 42).unwrap();
        let b = sample_sequence(&m, 5000, 42).unwrap();
        assert_eq!(a, b);
        assert!(!a.symbols().windows(2).any(|p| p == [1, 1]));
        let c = sample_trial(&m, 5000, 42, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn symbol_frequencies_match_pi() {
        let m = golden();
        let n = 1_000_000;
        let w = sample_sequence(&m, n, 7).unwrap();
        let ones = w.symbols().iter().filter(|&&s| s == 0).count() as f64;
        let p = m.pi[0];
        // Markov dependence inflates the iid standard error; 4 sigma with
        // the asymptotic variance factor (1 + lambda2)/(1 - lambda2)
        let l2 = -1.0 / (1.618_033_988_749_895f64).powi(2);
        let se = (p * (1.0 - p) / n as f64 * (1.0 + l2) / (1.0 - l2)).sqrt();
        assert!((ones / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn pair_frequencies_match() {
        let m = bern82();
        let n = 400_000;
        let w = sample_sequence(&m, n, 3).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for p in w.symbols().windows(2) {
            counts[p[0] as usize][p[1] as usize] += 1;
        }
        for i in 0..2 {
            for j in 0..2 {
                let q = m.pi[i] * m.transition[(i, j)];
                let f = counts[i][j] as f64 / (n - 1) as f64;
                // overlapping pairs: variance at most 3x the iid value
                let se = (3.0 * q * (1.0 - q) / n as f64).sqrt();
                assert!((f - q).abs() < 4.0 * se, "{i}{j}: {f} vs {q}");
            }
        }
    }

    #[test]
    fn prefix_stream_matches_products() {
        let m = bern82();
        let w = Word::new(m.sft.clone(), &[1, 1]).unwrap();
        let s = log_prefix_measure_stream(&m, &w);
        assert!((s[0] - 0.8f64.ln()).abs() < 1e-15 && (s[1] - 2.0 * 0.8f64.ln()).abs() < 1e-15);
        let g = golden();
        let w = sample_sequence(&g, 200, 1).unwrap();
        let s = log_prefix_measure_stream(&g, &w);
        for n in [1, 17, 200] {
            let direct = cylinder_measure(&g, &w.prefix(n)).unwrap().ln();
            assert!((s[n - 1] - direct).abs() < 1e-12);
        }
        assert!(s.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn clt_of_constant_word() {
        let m = bern82();
        let n = 100;
        let w = Word::new(m.sft.clone(), &vec![1; n]).unwrap();
        let expected = (n as f64 / m.rho_mu).sqrt() * (m.h_mu + 0.8f64.ln());
        assert!((clt_statistic(&m, &w, n).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn degenerate_model_refused() {
        let m = build_bernoulli(&BernoulliSpec::new(vec![0.5, 0.5]).unwrap()).unwrap();
        let w = sample_sequence(&m, 20, 0).unwrap();
        assert!(matches!(clt_statistic(&m, &w, 10), Err(Error::Cohomologous { .. })));
    }

    #[test]
    fn lil_guard() {
        let m = bern82();
        let w = sample_sequence(&m, 20, 0).unwrap();
        assert!(lil_statistic(&m, &w, 10).is_ok());
        assert!(matches!(lil_statistic(&m, &w, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn running_max_nondecreasing() {
        let m = bern82();
        let w = sample_sequence(&m, 4096, 9).unwrap();
        let cps = geometric_checkpoints(4096);
        assert_eq!(cps.first(), Some(&16));
        assert_eq!(cps.last(), Some(&4096));
        let s = stat_series(&m, &w, 0, &cps).unwrap();
        let rm = running_max(&s.lil);
        assert!(rm.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn ks_distance_sanity() {
        assert!((ks_distance_normal(&[0.0]).unwrap() - 0.5).abs() < 1e-15);
        let normal = Normal::standard();
        let q: Vec<f64> = (0..1000).map(|i| normal.inverse_cdf((i as f64 + 0.5) / 1000.0)).collect();
        let d = ks_distance_normal(&q).unwrap();
        assert!((d - 0.0005).abs() < 1e-6, "{d}");
    }

    #[test]
    fn batch_independent_of_workers() {
        let m = Arc::new(bern82());
        let plan = SamplePlan::new(m, 512, 6, 99).unwrap();
        let cps = geometric_checkpoints(512);
        let a = stat_batch(&plan, &cps, 1).unwrap();
        let b = stat_batch(&plan, &cps, 4).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_stat_csv(&a, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("trial,n,clt_stat,lil_stat,log_measure\n0,16,"));
    }
}
