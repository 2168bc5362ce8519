//! Gibbs measures of locally constant potentials, realized as finite Markov
//! measures through the Perron-Frobenius data of the transfer matrix
//! `L_ij = A_ij exp(phi(i, j))`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{perron_vector, second_eigen_modulus, stationary, Mat};
use crate::sft::{enumerate_words_limited, SftSpec, Word, MAX_ALPHABET};

/// Below this variance the potential is treated as cohomologous to a constant.
pub const COHOMOLOGY_TOL: f64 = 1e-10;
/// Target for the certified tail of the Green-Kubo series.
pub const VARIANCE_TAIL_TOL: f64 = 1e-12;
const VARIANCE_MAX_TERMS: usize = 1_000_000;
/// Dobrushin coefficient above which a slow-mixing warning is raised.
const SLOW_MIXING_DELTA: f64 = 0.999;
pub const GAMMA_MARGIN: f64 = 1.05;
pub const GAMMA_CAP: f64 = 0.999;
pub const GAMMA_FLOOR: f64 = 0.01;
pub const D_FACTOR: f64 = 2.0;
/// Largest gap scanned when fitting D.
pub const DECAY_SCAN_GAP: usize = 64;
/// Correlation deviations below this are rounding noise and ignored when fitting D.
pub const DECAY_NOISE: f64 = 1e-12;
/// Relative guard applied to the exact Gibbs ratio extremes.
pub const GIBBS_GUARD: f64 = 1024.0 * f64::EPSILON;

/// Locally constant potential: one value per admissible word of length `depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    depth: usize,
    k: usize,
    /// indexed by the base-K code of the word; NaN for inadmissible words
    values: Vec<f64>,
}

fn code(word: &[u16], k: usize) -> usize {
    word.iter().fold(0usize, |c, &s| c * k + s as usize)
}

impl Potential {
    pub fn from_fn(sft: &Arc<SftSpec>, depth: usize, f: impl Fn(&[u16]) -> f64) -> Result<Self> {
        if depth == 0 {
            return Err(domain("potential depth must be at least 1"));
        }
        let k = sft.alphabet_size();
        let size = (k as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
        if size > crate::sft::ENUMERATION_LIMIT {
            return Err(Error::Resource(format!("potential table of K^{depth} entries is too large")));
        }
        let mut values = vec![f64::NAN; size as usize];
        for w in enumerate_words_limited(sft, depth, crate::sft::ENUMERATION_LIMIT)? {
            let v = f(w.symbols());
            if !v.is_finite() {
                return Err(domain(format!("potential value {v} on {:?} is not finite", w.to_one_based())));
            }
            values[code(w.symbols(), k)] = v;
        }
        Ok(Potential { depth, k, values })
    }

    pub fn zero(sft: &Arc<SftSpec>, depth: usize) -> Result<Self> {
        Self::from_fn(sft, depth, |_| 0.0)
    }

    /// Build from 1-based `(word, value)` pairs; every admissible word of the
    /// given depth must appear exactly once.
    pub fn from_entries(sft: &Arc<SftSpec>, depth: usize, entries: &[(Vec<u32>, f64)]) -> Result<Self> {
        let k = sft.alphabet_size();
        let mut table = std::collections::HashMap::new();
        for (w, v) in entries {
            if w.len() != depth {
                return Err(domain(format!("potential word {w:?} has length {}, expected {depth}", w.len())));
            }
            let word = Word::new(sft.clone(), w)?;
            if table.insert(code(word.symbols(), k), *v).is_some() {
                return Err(domain(format!("potential word {w:?} listed twice")));
            }
        }
        let pot = Self::from_fn(sft, depth, |w| table.get(&code(w, k)).copied().unwrap_or(f64::NAN));
        match pot {
            Err(Error::Domain(_)) => Err(domain(format!(
                "potential table must cover all {} admissible words of length {depth}",
                sft.word_count(depth)
            ))),
            other => other,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Value on a 0-based admissible word of length `depth`.
    pub fn value(&self, word: &[u16]) -> f64 {
        self.values[code(word, self.k)]
    }

    /// 1-based `(word, value)` pairs in lexicographic order.
    pub fn entries(&self) -> Vec<(Vec<u32>, f64)> {
        let mut out = Vec::new();
        for (c, &v) in self.values.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            let mut w = vec![0u32; self.depth];
            let mut x = c;
            for slot in w.iter_mut().rev() {
                *slot = (x % self.k) as u32 + 1;
                x /= self.k;
            }
            out.push((w, v));
        }
        out
    }

    /// Depth-2 view: `phi(i, j)` on allowed transitions. Depth 1 is read as
    /// `phi(i, j) = phi(i)`.
    fn pair_table(&self, sft: &SftSpec) -> Result<Mat> {
        let k = sft.alphabet_size();
        let mut m = Mat::zeros(k);
        for i in 0..k {
            for j in 0..k {
                if !sft.allowed(i, j) {
                    continue;
                }
                m[(i, j)] = match self.depth {
                    1 => self.value(&[i as u16]),
                    2 => self.value(&[i as u16, j as u16]),
                    r => return Err(domain(format!("depth {r} potential must be recoded first"))),
                };
            }
        }
        Ok(m)
    }
}

/// Probability vector for a Bernoulli measure on the full shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliSpec {
    pub p: Vec<f64>,
}

impl BernoulliSpec {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(domain("Bernoulli vector needs at least 2 entries"));
        }
        if p.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(domain(format!("Bernoulli entries must be positive, got {p:?}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(domain(format!("Bernoulli entries sum to {s}, not 1")));
        }
        Ok(BernoulliSpec { p })
    }

    /// Full shift and depth-1 potential `log p_i`.
    pub fn to_potential(&self) -> Result<(Arc<SftSpec>, Potential)> {
        let sft = Arc::new(SftSpec::full_shift(self.p.len())?);
        let pot = Potential::from_fn(&sft, 1, |w| self.p[w[0] as usize].ln())?;
        Ok((sft, pot))
    }

    /// `-sum p log p`
    pub fn entropy(&self) -> f64 {
        -self.p.iter().map(|p| p * p.ln()).sum::<f64>()
    }

    /// `sum p (log p)^2 - (sum p log p)^2`
    pub fn variance(&self) -> f64 {
        let m: f64 = self.p.iter().map(|p| p * p.ln()).sum();
        self.p.iter().map(|p| p * p.ln() * p.ln()).sum::<f64>() - m * m
    }
}

/// Result of block recoding: the depth-2 system plus the block of each new symbol.
#[derive(Clone, Debug)]
pub struct Recoded {
    pub sft: Arc<SftSpec>,
    pub potential: Potential,
    /// 0-based original blocks, one per new symbol; empty when no recoding happened
    pub blocks: Vec<Vec<u16>>,
}

impl Recoded {
    /// Image of an original word (length >= r-1) under the block map.
    pub fn encode(&self, w: &Word) -> Result<Word> {
        if self.blocks.is_empty() {
            return Ok(w.clone());
        }
        let b = self.blocks[0].len();
        if w.len() < b {
            return Err(domain(format!("word shorter than the block length {b}")));
        }
        let syms = (0..=w.len() - b)
            .map(|s| {
                let blk = &w.symbols()[s..s + b];
                self.blocks.iter().position(|x| x == blk).map(|p| p as u16)
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| domain("word contains a block outside the recoded alphabet"))?;
        Word::from_zero_based(self.sft.clone(), syms)
    }
}

/// Recode a depth-`r >= 3` potential to depth 2 over the alphabet of
/// admissible `(r-1)`-blocks. Depth 1 and 2 inputs are returned unchanged.
pub fn recode_depth(sft: &Arc<SftSpec>, pot: &Potential, alphabet_cap: usize) -> Result<Recoded> {
    let r = pot.depth();
    if r <= 2 {
        return Ok(Recoded {
            sft: sft.clone(),
            potential: pot.clone(),
            blocks: Vec::new(),
        });
    }
    let cap = alphabet_cap.min(MAX_ALPHABET);
    let count = sft.word_count(r - 1);
    if count > cap as u128 {
        return Err(Error::Resource(format!(
            "recoded alphabet of {count} blocks exceeds the cap {cap}"
        )));
    }
    let blocks: Vec<Vec<u16>> = enumerate_words_limited(sft, r - 1, cap as u128)?
        .into_iter()
        .map(|w| w.symbols().to_vec())
        .collect();
    let n = blocks.len();
    let rows: Vec<Vec<u8>> = blocks
        .iter()
        .map(|b| {
            blocks
                .iter()
                .map(|c| {
                    let overlap = b[1..] == c[..c.len() - 1];
                    let joins = sft.allowed(*b.last().unwrap() as usize, *c.last().unwrap() as usize);
                    u8::from(overlap && joins)
                })
                .collect()
        })
        .collect();
    let new_sft = Arc::new(SftSpec::new(rows)?);
    let potential = Potential::from_fn(&new_sft, 2, |pair| {
        let mut w = blocks[pair[0] as usize].clone();
        w.push(*blocks[pair[1] as usize].last().unwrap());
        pot.value(&w)
    })?;
    debug_assert_eq!(potential.entries().len(), (0..n).map(|i| (0..n).filter(|&j| new_sft.allowed(i, j)).count()).sum::<usize>());
    Ok(Recoded {
        sft: new_sft,
        potential,
        blocks,
    })
}

/// Green-Kubo variance with its truncation certificate.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceReport {
    pub value: f64,
    /// number of covariance terms summed
    pub terms: usize,
    /// certified bound on the omitted tail
    pub tail_bound: f64,
    /// smallest power `s` with Dobrushin coefficient below 1
    pub block: usize,
    pub dobrushin: f64,
    pub slow_mixing: bool,
}

/// Gibbs measure of a depth <= 2 potential as a Markov measure.
#[derive(Clone, Debug)]
pub struct GibbsModel {
    pub sft: Arc<SftSpec>,
    pub potential: Potential,
    /// depth-2 table `phi(i, j)`, zero on forbidden transitions
    pub phi: Mat,
    pub lambda: f64,
    pub h_vec: Vec<f64>,
    pub l_vec: Vec<f64>,
    pub pressure: f64,
    pub transition: Mat,
    pub pi: Vec<f64>,
    pub h_mu: f64,
    pub rho_mu: f64,
    pub variance_report: VarianceReport,
    pub gibbs_c: f64,
    pub second_modulus: f64,
    pub decay_d: f64,
    pub gamma: f64,
}

/// Build the Gibbs model of `pot` (depth at most 2) on a mixing `sft`.
pub fn build_gibbs(sft: &Arc<SftSpec>, pot: &Potential) -> Result<GibbsModel> {
    let k = sft.alphabet_size();
    // Wielandt: a primitive K x K matrix has exponent at most (K-1)^2 + 1
    crate::sft::mixing_exponent(sft, (k - 1) * (k - 1) + 1)?;
    let phi = pot.pair_table(sft)?;
    let mut l = Mat::zeros(k);
    for i in 0..k {
        for j in 0..k {
            if sft.allowed(i, j) {
                l[(i, j)] = phi[(i, j)].exp();
            }
        }
    }
    let (lambda, h_vec) = perron_vector(&l)?;
    let (_, l_vec) = perron_vector(&l.transpose())?;
    let mut p = Mat::zeros(k);
    for i in 0..k {
        for j in 0..k {
            if sft.allowed(i, j) {
                p[(i, j)] = l[(i, j)] * h_vec[j] / (lambda * h_vec[i]);
            }
        }
        // absorb the eigenvector residual so rows are stochastic to rounding
        let s: f64 = p.row(i).iter().sum();
        for j in 0..k {
            p[(i, j)] /= s;
        }
    }
    let pi = stationary(&p)?;
    let pressure = lambda.ln();
    let mean: f64 = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| pi[i] * p[(i, j)] * phi[(i, j)])
        .sum();
    let h_mu = pressure - mean;
    let mut model = GibbsModel {
        sft: sft.clone(),
        potential: pot.clone(),
        phi,
        lambda,
        h_vec,
        l_vec,
        pressure,
        transition: p,
        pi,
        h_mu,
        rho_mu: 0.0,
        variance_report: VarianceReport {
            value: 0.0,
            terms: 0,
            tail_bound: 0.0,
            block: 1,
            dobrushin: 0.0,
            slow_mixing: false,
        },
        gibbs_c: 1.0,
        second_modulus: 0.0,
        decay_d: 1.0,
        gamma: GAMMA_FLOOR,
    };
    model.variance_report = green_kubo(&model);
    model.rho_mu = model.variance_report.value.max(0.0);
    model.gibbs_c = gibbs_constant(&model);
    model.second_modulus = second_eigen_modulus(&model.transition, &model.pi);
    let (d, gamma) = decay_constants(&model)?;
    model.decay_d = d;
    model.gamma = gamma;
    Ok(model)
}

/// Convenience: recode if needed, then build.
pub fn build_gibbs_any(sft: &Arc<SftSpec>, pot: &Potential, alphabet_cap: usize) -> Result<(GibbsModel, Recoded)> {
    let rec = recode_depth(sft, pot, alphabet_cap)?;
    let model = build_gibbs(&rec.sft, &rec.potential)?;
    Ok((model, rec))
}

pub fn build_bernoulli(spec: &BernoulliSpec) -> Result<GibbsModel> {
    let (sft, pot) = spec.to_potential()?;
    build_gibbs(&sft, &pot)
}

impl GibbsModel {
    pub fn k(&self) -> usize {
        self.sft.alphabet_size()
    }

    /// `integral f dmu`
    pub fn mean_potential(&self) -> f64 {
        self.pressure - self.h_mu
    }

    pub fn is_cohomologous(&self) -> bool {
        self.rho_mu < COHOMOLOGY_TOL
    }

    /// Refuse degenerate (zero-variance) models.
    pub fn require_positive_variance(&self) -> Result<()> {
        if self.is_cohomologous() {
            Err(Error::Cohomologous {
                variance: self.rho_mu,
            })
        } else {
            Ok(())
        }
    }

    /// `S_n f` on the cylinder of 0-based `w`, continued by symbol `c`.
    pub fn birkhoff_sum(&self, w: &[u16], c: u16) -> f64 {
        let mut s = 0.0;
        for t in 0..w.len() {
            let next = if t + 1 < w.len() { w[t + 1] } else { c };
            s += self.phi[(w[t] as usize, next as usize)];
        }
        s
    }

    pub fn report(&self) -> GibbsReport {
        GibbsReport {
            alphabet_size: self.k(),
            adjacency: self.sft.rows(),
            potential_depth: self.potential.depth(),
            potential: self.potential.entries(),
            lambda: self.lambda,
            pressure: self.pressure,
            h_mu: self.h_mu,
            rho_mu: self.rho_mu,
            cohomologous: self.is_cohomologous(),
            gibbs_c: self.gibbs_c,
            decay_d: self.decay_d,
            gamma: self.gamma,
            second_modulus: self.second_modulus,
            h_vec: self.h_vec.clone(),
            l_vec: self.l_vec.clone(),
            pi: self.pi.clone(),
            transition: self.transition.rows(),
            variance: self.variance_report.clone(),
        }
    }
}

/// Scalars and matrices of a model, for JSON export.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsReport {
    pub alphabet_size: usize,
    pub adjacency: Vec<Vec<u8>>,
    pub potential_depth: usize,
    pub potential: Vec<(Vec<u32>, f64)>,
    pub lambda: f64,
    pub pressure: f64,
    pub h_mu: f64,
    pub rho_mu: f64,
    pub cohomologous: bool,
    pub gibbs_c: f64,
    pub decay_d: f64,
    pub gamma: f64,
    pub second_modulus: f64,
    pub h_vec: Vec<f64>,
    pub l_vec: Vec<f64>,
    pub pi: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub variance: VarianceReport,
}

/// `mu([w])`; the empty word has measure 1.
pub fn cylinder_measure(m: &GibbsModel, w: &Word) -> Result<f64> {
    Ok(log_cylinder_measure(m, w)?.exp())
}

/// `log mu([w])`, accumulated in log space.
pub fn log_cylinder_measure(m: &GibbsModel, w: &Word) -> Result<f64> {
    check_same_sft(m, w)?;
    Ok(log_measure_symbols(m, w.symbols()))
}

pub(crate) fn log_measure_symbols(m: &GibbsModel, s: &[u16]) -> f64 {
    let Some(&first) = s.first() else {
        return 0.0;
    };
    let mut acc = m.pi[first as usize].ln();
    for p in s.windows(2) {
        acc += m.transition[(p[0] as usize, p[1] as usize)].ln();
    }
    acc
}

fn check_same_sft(m: &GibbsModel, w: &Word) -> Result<()> {
    if **w.sft() != *m.sft {
        return Err(domain("word was validated against a different shift"));
    }
    Ok(())
}

pub fn entropy(m: &GibbsModel) -> f64 {
    m.h_mu
}

pub fn variance(m: &GibbsModel) -> &VarianceReport {
    &m.variance_report
}

fn centered(m: &GibbsModel) -> Mat {
    let k = m.k();
    let mean = m.mean_potential();
    let mut f = Mat::zeros(k);
    for i in 0..k {
        for j in 0..k {
            if m.sft.allowed(i, j) {
                f[(i, j)] = m.phi[(i, j)] - mean;
            }
        }
    }
    f
}

fn oscillation(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo
}

/// `rho = Var(f) + 2 sum_k Cov(f, f o sigma^k)` with covariances from powers
/// of the transition matrix, stopped when the certified tail drops below
/// `VARIANCE_TAIL_TOL`.
fn green_kubo(m: &GibbsModel) -> VarianceReport {
    let k = m.k();
    let p = &m.transition;
    let f = centered(m);
    let g: Vec<f64> = (0..k).map(|j| (0..k).map(|l| p[(j, l)] * f[(j, l)]).sum()).collect();
    let w: Vec<f64> = (0..k)
        .map(|j| (0..k).map(|i| m.pi[i] * p[(i, j)] * f[(i, j)]).sum())
        .collect();
    let var0: f64 = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| m.pi[i] * p[(i, j)] * f[(i, j)] * f[(i, j)])
        .sum();
    let w1: f64 = w.iter().map(|x| x.abs()).sum();

    let (block, dobrushin) = contraction_block(p);
    let tail = |r: &[f64]| {
        if dobrushin < 1.0 {
            w1 * block as f64 * oscillation(r) / (1.0 - dobrushin)
        } else {
            f64::INFINITY
        }
    };

    let mut sum = 0.0;
    let mut r = g;
    let mut terms = 0;
    let mut bound = tail(&r);
    while bound >= VARIANCE_TAIL_TOL && terms < VARIANCE_MAX_TERMS {
        let cov: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
        sum += cov;
        terms += 1;
        r = p.apply(&r);
        bound = tail(&r);
    }
    VarianceReport {
        value: var0 + 2.0 * sum,
        terms,
        tail_bound: bound,
        block,
        dobrushin,
        slow_mixing: dobrushin > SLOW_MIXING_DELTA,
    }
}

/// Smallest `s` (up to 64) with `delta(P^s) < 1`, and that coefficient.
fn contraction_block(p: &Mat) -> (usize, f64) {
    let mut q = p.clone();
    for s in 1..=64 {
        let d = q.dobrushin();
        if d < 1.0 {
            return (s, d);
        }
        q = q.mul(p);
    }
    (64, 1.0)
}

/// Variance through the fundamental matrix `(I - P + 1 pi)^-1`; used as an
/// independent cross-check of the Green-Kubo sum.
pub fn variance_fundamental(m: &GibbsModel) -> Result<f64> {
    let k = m.k();
    let p = &m.transition;
    let f = centered(m);
    let g: Vec<f64> = (0..k).map(|j| (0..k).map(|l| p[(j, l)] * f[(j, l)]).sum()).collect();
    let w: Vec<f64> = (0..k)
        .map(|j| (0..k).map(|i| m.pi[i] * p[(i, j)] * f[(i, j)]).sum())
        .collect();
    let var0: f64 = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| m.pi[i] * p[(i, j)] * f[(i, j)] * f[(i, j)])
        .sum();
    let mut z = Mat::identity(k);
    for i in 0..k {
        for j in 0..k {
            z[(i, j)] += m.pi[j] - p[(i, j)];
        }
    }
    let x = crate::numeric::solve(&z, &g)?;
    Ok(var0 + 2.0 * w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
}

/// Gibbs constant `C`.
///
/// For a word `w = a...b` continued by `c`,
/// `mu([w]) exp(nP - S_n f) = pi_a lambda h_b / h_a * exp(-phi(b, c))`,
/// independent of the interior of `w`. `C` is the largest such ratio (or its
/// inverse), also covering the quasi-Bernoulli ratios `p_bc / pi_c`.
pub fn gibbs_constant(m: &GibbsModel) -> f64 {
    let k = m.k();
    let mut c: f64 = 1.0;
    for a in 0..k {
        for b in 0..k {
            for cc in 0..k {
                if !m.sft.allowed(b, cc) {
                    continue;
                }
                let r = m.pi[a] * m.lambda * m.h_vec[b] / m.h_vec[a] * (-m.phi[(b, cc)]).exp();
                c = c.max(r).max(1.0 / r);
            }
        }
    }
    for b in 0..k {
        for cc in 0..k {
            if m.sft.allowed(b, cc) {
                let q = m.transition[(b, cc)] / m.pi[cc];
                c = c.max(q).max(1.0 / q);
            }
        }
    }
    c * (1.0 + GIBBS_GUARD)
}

/// `mu([u] cap sigma^-n [v])` for `n >= |u|`; zero when `u` or `v` is inadmissible.
pub fn correlation(m: &GibbsModel, u: &[u32], v: &[u32], n: usize) -> Result<f64> {
    if n < u.len() {
        return Err(domain(format!("gap n={n} is shorter than |u|={}", u.len())));
    }
    let ok_u = crate::sft::is_admissible(u, &m.sft)?;
    let ok_v = crate::sft::is_admissible(v, &m.sft)?;
    if !ok_u || !ok_v {
        return Ok(0.0);
    }
    let u0: Vec<u16> = u.iter().map(|&s| (s - 1) as u16).collect();
    let v0: Vec<u16> = v.iter().map(|&s| (s - 1) as u16).collect();
    if u0.is_empty() || v0.is_empty() {
        let a = log_measure_symbols(m, &u0).exp();
        let b = log_measure_symbols(m, &v0).exp();
        return Ok(a * b);
    }
    let steps = (n - u0.len() + 1) as u64;
    let bridge = m.transition.pow(steps)[(*u0.last().unwrap() as usize, v0[0] as usize)];
    let mu_u = log_measure_symbols(m, &u0).exp();
    let along_v: f64 = v0
        .windows(2)
        .map(|p| m.transition[(p[0] as usize, p[1] as usize)])
        .product();
    Ok(mu_u * bridge * along_v)
}

/// Largest `|P^g_ab / pi_b - 1| / gamma^(g-1)` over endpoints and
/// `1 <= g <= max_gap + 1`, ignoring rounding-level deviations.
pub fn decay_scan(m: &GibbsModel, gamma: f64, max_gap: usize) -> f64 {
    let k = m.k();
    let mut q = m.transition.clone();
    let mut worst: f64 = 0.0;
    for g in 1..=max_gap + 1 {
        let scale = gamma.powi(g as i32 - 1);
        for a in 0..k {
            for b in 0..k {
                let dev = (q[(a, b)] / m.pi[b] - 1.0).abs();
                if dev > DECAY_NOISE {
                    worst = worst.max(dev / scale);
                }
            }
        }
        q = q.mul(&m.transition);
    }
    worst
}

/// `(D, gamma)` with
/// `|mu([u] cap sigma^-n [v]) - mu([u]) mu([v])| <= D gamma^(n-|u|) mu([u]) mu([v])`.
pub fn decay_constants(m: &GibbsModel) -> Result<(f64, f64)> {
    let lam2 = second_eigen_modulus(&m.transition, &m.pi);
    let gamma = (GAMMA_MARGIN * lam2).max(GAMMA_FLOOR).min(GAMMA_CAP);
    if !(gamma < 1.0) || lam2 >= 1.0 {
        return Err(Error::Numeric {
            what: "second eigenvalue modulus is not below 1".into(),
            residual: lam2,
        });
    }
    let d = (D_FACTOR * decay_scan(m, gamma, DECAY_SCAN_GAP)).max(1.0);
    Ok((d, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::enumerate_words;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn bern(p: &[f64]) -> GibbsModel {
        build_bernoulli(&BernoulliSpec::new(p.to_vec()).unwrap()).unwrap()
    }

    fn golden_zero() -> GibbsModel {
        let sft = Arc::new(SftSpec::golden_mean());
        let pot = Potential::zero(&sft, 2).unwrap();
        build_gibbs(&sft, &pot).unwrap()
    }

    fn golden_tilted() -> GibbsModel {
        let sft = Arc::new(SftSpec::golden_mean());
        let pot = Potential::from_entries(
            &sft,
            2,
            &[(vec![1, 1], 0.3), (vec![1, 2], -0.1), (vec![2, 1], 0.2)],
        )
        .unwrap();
        build_gibbs(&sft, &pot).unwrap()
    }

    #[test]
    fn bernoulli_closed_forms() {
        let m = bern(&[0.8, 0.2]);
        assert!(m.pressure.abs() < 1e-14);
        assert!((m.h_mu - 0.500_402_423_538_187_9).abs() < 1e-12);
        assert!((m.rho_mu - 0.307_489_928_907_648_9).abs() < 1e-12, "{}", m.rho_mu);
        for i in 0..2 {
            assert!((m.transition[(i, 0)] - 0.8).abs() < 1e-14);
            assert!((m.pi[i] - [0.8, 0.2][i]).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_bernoulli_is_degenerate() {
        let m = bern(&[0.25; 4]);
        assert!((m.h_mu - 4f64.ln()).abs() < 1e-14);
        assert!(m.rho_mu < 1e-15);
        assert!(m.is_cohomologous());
        assert!(matches!(m.require_positive_variance(), Err(Error::Cohomologous { .. })));
    }

    #[test]
    fn three_symbol_bernoulli_variance_two_ways() {
        let spec = BernoulliSpec::new(vec![0.5, 0.25, 0.25]).unwrap();
        let m = build_bernoulli(&spec).unwrap();
        assert!((m.rho_mu - spec.variance()).abs() < 1e-12);
        assert!((variance_fundamental(&m).unwrap() - spec.variance()).abs() < 1e-12);
    }

    #[test]
    fn golden_mean_maximal_entropy() {
        let m = golden_zero();
        assert!((m.pressure - GOLDEN.ln()).abs() < 1e-13);
        assert!((m.h_mu - GOLDEN.ln()).abs() < 1e-13);
        assert!((m.second_modulus - 1.0 / (GOLDEN * GOLDEN)).abs() < 1e-10);
    }

    #[test]
    fn tilted_model_variance_agrees_with_fundamental_matrix() {
        let m = golden_tilted();
        let z = variance_fundamental(&m).unwrap();
        assert!((m.rho_mu - z).abs() < 1e-11, "{} vs {z}", m.rho_mu);
        assert!(m.rho_mu > 0.0);
    }

    #[test]
    fn stationarity_and_rows() {
        for m in [golden_zero(), golden_tilted(), bern(&[0.5, 0.3, 0.2])] {
            let pp = m.transition.apply_left(&m.pi);
            for i in 0..m.k() {
                assert!((pp[i] - m.pi[i]).abs() < 1e-12);
                assert!((m.transition.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let m = golden_tilted();
        for n in [0, 1, 6, 12] {
            let s: f64 = enumerate_words(&m.sft, n)
                .unwrap()
                .iter()
                .map(|w| cylinder_measure(&m, w).unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-10, "n={n} sum={s}");
        }
    }

    #[test]
    fn bernoulli_cylinder_and_constant() {
        let m = bern(&[0.8, 0.2]);
        let w = Word::new(m.sft.clone(), &[1, 1, 2]).unwrap();
        assert!((cylinder_measure(&m, &w).unwrap() - 0.128).abs() < 1e-15);
        assert!(m.gibbs_c > 1.0 && m.gibbs_c < 1.0 + 1e-12);
        assert_eq!(m.decay_d, 1.0);
    }

    #[test]
    fn gibbs_inequality_exhaustive_short() {
        let m = golden_tilted();
        for n in 1..=8 {
            for w in enumerate_words(&m.sft, n).unwrap() {
                let mu = log_cylinder_measure(&m, &w).unwrap();
                for c in 0..2u16 {
                    if !m.sft.allowed(*w.symbols().last().unwrap() as usize, c as usize) {
                        continue;
                    }
                    let r = (mu + n as f64 * m.pressure - m.birkhoff_sum(w.symbols(), c)).exp();
                    assert!(r <= m.gibbs_c && 1.0 / r <= m.gibbs_c);
                }
            }
        }
    }

    #[test]
    fn one_step_correlation() {
        let m = golden_zero();
        let c = correlation(&m, &[1], &[1], 1).unwrap();
        assert!((c - m.pi[0] * m.transition[(0, 0)]).abs() < 1e-15);
        assert_eq!(correlation(&m, &[2, 2], &[1], 3).unwrap(), 0.0);
    }

    #[test]
    fn recode_golden_depth_three() {
        let sft = Arc::new(SftSpec::golden_mean());
        let pot = Potential::from_fn(&sft, 3, |w| 0.1 * w.iter().map(|&s| s as f64).sum::<f64>()).unwrap();
        let rec = recode_depth(&sft, &pot, 64).unwrap();
        assert_eq!(rec.sft.alphabet_size(), 3);
        let one_based: Vec<Vec<u32>> = rec.blocks.iter().map(|b| b.iter().map(|&s| s as u32 + 1).collect()).collect();
        assert_eq!(one_based, vec![vec![1, 1], vec![1, 2], vec![2, 1]]);
        // (1,1)->(1,1),(1,2); (1,2)->(2,1); (2,1)->(1,1),(1,2)
        assert_eq!(rec.sft.rows(), vec![vec![1, 1, 0], vec![0, 0, 1], vec![1, 1, 0]]);
        let w = Word::new(sft.clone(), &[1, 2, 1, 1]).unwrap();
        assert_eq!(rec.encode(&w).unwrap().to_one_based(), vec![2, 3, 1]);

        // Birkhoff sums agree: block potential on encoded word equals original
        let (m, _) = build_gibbs_any(&sft, &pot, 64).unwrap();
        assert!(m.h_mu > 0.0);
        let unchanged = recode_depth(&sft, &Potential::zero(&sft, 2).unwrap(), 64).unwrap();
        assert!(unchanged.blocks.is_empty());
    }

    #[test]
    fn refuses_non_mixing() {
        let sft = Arc::new(SftSpec::new(vec![vec![0, 1], vec![1, 0]]).unwrap());
        let pot = Potential::zero(&sft, 1).unwrap();
        assert!(matches!(build_gibbs(&sft, &pot), Err(Error::NotMixing { .. })));
    }

    #[test]
    fn potential_table_must_be_complete() {
        let sft = Arc::new(SftSpec::golden_mean());
        assert!(Potential::from_entries(&sft, 2, &[(vec![1, 1], 0.0)]).is_err());
        assert!(Potential::from_entries(&sft, 2, &[(vec![2, 2], 0.0)]).is_err());
    }
}
