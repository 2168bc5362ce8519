//! A nondecreasing rate whose series diverges while recurrence fails almost
//! surely: prescribed preimage counts `a_n`, inverted through partial sums.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::glog;
use crate::xprec::{self, Dd};

use super::rate::{preimage_counts, RateFunction, RateKind};
use super::series::phi_inverse;

/// Counts at or above this are not stored as integers.
pub const MAX_EXACT_COUNT: u64 = 1 << 62;
/// Prefix sums must stay below this.
pub const MAX_EXACT_SUM: u64 = 1 << 63;

/// The auxiliary function `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GFunction {
    /// `scale * sqrt(log log n)`
    SqrtLogLog { scale: f64 },
    Constant { value: f64 },
}

impl GFunction {
    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            GFunction::SqrtLogLog { scale } => scale * glog(glog(n)).sqrt(),
            GFunction::Constant { value } => value,
        }
    }

    pub fn eval_dd(&self, n: Dd) -> Dd {
        match *self {
            GFunction::SqrtLogLog { scale } => Dd::new(scale) * xprec::glog(xprec::glog(n)).sqrt(),
            GFunction::Constant { value } => Dd::new(value),
        }
    }

    /// Largest `|g(n)/g(n+1) - 1|` over `n = 10^j`, `j = 1..=max_exp`.
    pub fn ratio_spot_check(&self, max_exp: i32) -> f64 {
        (1..=max_exp)
            .map(|j| {
                let n = 10f64.powi(j);
                let (a, b) = (self.eval(n), self.eval(n + 1.0));
                if b == 0.0 {
                    if a == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (a / b - 1.0).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// One element `n_k` of the sequence `n_k = max{n : g(n)^2 < k} + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GElement {
    pub k: u64,
    /// exact value when it fits in 53 bits
    pub n: Option<u64>,
    pub log_n: f64,
}

/// Elements of the sequence with `log n_k <= max_log_n`.
pub fn g_sequence(g: &GFunction, max_log_n: f64) -> Result<Vec<GElement>> {
    let GFunction::SqrtLogLog { scale } = *g else {
        return Err(domain("the sequence n_k needs g to grow without bound"));
    };
    if !(scale > 0.0) {
        return Err(domain("g scale must be positive"));
    }
    let mut out = Vec::new();
    for k in 1u64.. {
        // g(n)^2 < k  <=>  n < exp(exp(k / scale^2))
        let t = k as f64 / (scale * scale);
        let log_x = t.exp();
        if log_x > max_log_n {
            break;
        }
        let n = if log_x < 36.0 {
            let x = Dd::new(t).exp().exp();
            let c = x.ceil().to_f64();
            // n_k = ceil(X) when X is not an integer, X + 1 otherwise
            let n = if (x - Dd::new(c)).to_f64() == 0.0 { c + 1.0 } else { c };
            Some(n as u64)
        } else {
            None
        };
        out.push(GElement { k, n, log_n: log_x });
    }
    Ok(out)
}

/// Preimage count of one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Count {
    Exact(u64),
    /// natural log of the count, beyond the integer horizon
    Log(f64),
}

impl Count {
    pub fn ln(&self) -> f64 {
        match *self {
            Count::Exact(0) => f64::NEG_INFINITY,
            Count::Exact(a) => (a as f64).ln(),
            Count::Log(l) => l,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstructedRate {
    pub h: f64,
    pub rho: f64,
    pub g: GFunction,
    /// elements of the sequence up to `horizon`
    pub g_set: Vec<GElement>,
    /// levels requested
    pub horizon: u64,
    /// `a_n` for `n = 1..=a.len()`
    a: Vec<u64>,
    /// `S_k = a_1 + ... + a_{k-1}`, `k = 1..=a.len()+1`
    prefix: Vec<u64>,
    /// per stored level: floor/ceil certified by the fractional distance
    certified: Vec<bool>,
}

fn in_g(g_set: &[GElement], n: u64) -> bool {
    g_set.iter().any(|e| e.n == Some(n))
}

/// `log` of the real number whose ceiling (on the sequence) or floor (off it)
/// is `a_n`.
fn log_target_dd(h: f64, rho: f64, g: &GFunction, n: u64, on_g: bool) -> Dd {
    let nd = Dd::from_u64(n);
    let two_rho_n = Dd::new(2.0) * Dd::new(rho) * nd;
    if on_g {
        Dd::new(h) * nd - two_rho_n.sqrt() * g.eval_dd(nd)
    } else {
        let ll = xprec::glog(xprec::glog(nd));
        Dd::new(h) * nd - Dd::new(1.25) * (two_rho_n * ll).sqrt() - Dd::new(2.0) * nd.ln()
    }
}

fn log_target(h: f64, rho: f64, g: &GFunction, n: f64, on_g: bool) -> f64 {
    if on_g {
        h * n - (2.0 * rho * n).sqrt() * g.eval(n)
    } else {
        h * n - 1.25 * (2.0 * rho * n * glog(glog(n))).sqrt() - 2.0 * n.ln()
    }
}

/// Build the construction for levels `1..=horizon` with the given entropy
/// and variance.
pub fn counterexample_rate(g: GFunction, h: f64, rho: f64, horizon: u64) -> Result<RateFunction> {
    Ok(RateFunction::constructed(Arc::new(ConstructedRate::build(g, h, rho, horizon)?)))
}

impl ConstructedRate {
    pub fn build(g: GFunction, h: f64, rho: f64, horizon: u64) -> Result<Self> {
        if !(h > 0.0) || !(rho > 0.0) {
            return Err(domain("construction needs h > 0 and rho > 0"));
        }
        if horizon == 0 {
            return Err(domain("construction horizon must be at least 1"));
        }
        let g_set = g_sequence(&g, (horizon as f64).ln().max(1.0) + 1.0)?
            .into_iter()
            .filter(|e| e.log_n <= (horizon as f64).ln() + 1e-12 && e.n.is_none_or(|n| n <= horizon))
            .collect::<Vec<_>>();
        let mut a = Vec::new();
        let mut prefix = vec![0u64];
        let mut certified = Vec::new();
        for n in 1..=horizon {
            let on_g = in_g(&g_set, n);
            let v = log_target_dd(h, rho, &g, n, on_g).exp();
            if !v.is_finite() || v.hi >= MAX_EXACT_COUNT as f64 {
                break;
            }
            let r = if on_g { v.ceil() } else { v.floor() };
            let an = r.hi as i128 + r.lo as i128;
            let an = an.max(0) as u64;
            let total = prefix.last().unwrap().checked_add(an);
            let Some(total) = total.filter(|&t| t < MAX_EXACT_SUM) else {
                break;
            };
            // dd relative accuracy is far below 1e-25
            certified.push(v.frac_distance() > 1e-25 * v.hi.max(1.0));
            a.push(an);
            prefix.push(total);
        }
        Ok(ConstructedRate {
            h,
            rho,
            g,
            g_set,
            horizon,
            a,
            prefix,
            certified,
        })
    }

    /// Levels with exact integer counts.
    pub fn exact_levels(&self) -> u64 {
        self.a.len() as u64
    }

    /// Largest `m` at which `psi(m)` is known: the sum of the exact counts.
    pub fn max_argument(&self) -> u64 {
        *self.prefix.last().unwrap()
    }

    pub fn all_certified(&self) -> bool {
        self.certified.iter().all(|&c| c)
    }

    /// Whether the floor or ceiling at level `n` is certified; `None` beyond
    /// the integer horizon.
    pub fn level_certified(&self, n: u64) -> Option<bool> {
        self.certified.get((n as usize).checked_sub(1)?).copied()
    }

    pub fn is_in_g(&self, n: u64) -> bool {
        in_g(&self.g_set, n)
    }

    /// `S_n`, the number of `m` with `psi(m) < n`.
    pub fn prefix_sum(&self, n: u64) -> Option<u64> {
        self.prefix.get(n as usize - 1).copied()
    }

    /// `a_n`; exact on the integer horizon, as a logarithm beyond it.
    pub fn count(&self, n: u64) -> Result<Count> {
        if n == 0 || n > self.horizon {
            return Err(domain(format!("level {n} outside 1..={}", self.horizon)));
        }
        if let Some(&an) = self.a.get(n as usize - 1) {
            return Ok(Count::Exact(an));
        }
        Ok(Count::Log(log_target(self.h, self.rho, &self.g, n as f64, self.is_in_g(n))))
    }

    /// `psi(m) = max{k >= 1 : a_1 + ... + a_{k-1} <= m - 1}`.
    pub fn psi(&self, m: u64) -> Result<u64> {
        if m == 0 {
            return Err(domain("rate functions are defined for n >= 1"));
        }
        if m > self.max_argument() {
            return Err(Error::Resource(format!(
                "psi({m}) lies beyond the exact horizon (sum of counts {})",
                self.max_argument()
            )));
        }
        Ok(self.prefix.partition_point(|&s| s <= m - 1) as u64)
    }

    /// Check `#psi^-1(n) = a_n` on every exact level through the level
    /// boundaries: `psi` is `n` at `S_n + 1` and `S_{n+1}`, and `psi(S_n) < n`.
    /// Together with monotonicity of `psi` this pins the preimage count.
    /// Returns the number of levels verified, or the first failing level.
    pub fn verify_inversion(&self) -> std::result::Result<u64, u64> {
        let mut prev = 0;
        for n in 1..=self.exact_levels() {
            let (s0, s1) = (self.prefix[n as usize - 1], self.prefix[n as usize]);
            let an = self.a[n as usize - 1];
            let ok = s1 - s0 == an
                && (s0 == 0 || self.psi(s0).is_ok_and(|v| v < n))
                && (an == 0 || (self.psi(s0 + 1).ok() == Some(n) && self.psi(s1).ok() == Some(n)));
            if !ok {
                return Err(n);
            }
            prev = n;
        }
        Ok(prev)
    }

    /// First `m0` with `psi(m) <= m` for every `m0 <= m <= max_argument`.
    pub fn initial_segment_end(&self) -> u64 {
        let mut m0 = 1;
        for (i, &an) in self.a.iter().enumerate() {
            let n = i as u64 + 1;
            if an == 0 {
                continue;
            }
            let first = self.prefix[i] + 1;
            let last = self.prefix[i + 1];
            // psi = n on [first, last]; fails where m < n
            if first < n {
                m0 = m0.max(n.min(last + 1));
            }
        }
        m0
    }

    /// Terms `#psi^-1(n_k) exp(-h n_k + sqrt(2 rho n_k) g(n_k))` along the
    /// sequence, with their running sum.
    pub fn divergence_trace(&self) -> Vec<TraceEntry> {
        let mut running = 0.0;
        self.g_set
            .iter()
            .filter_map(|e| {
                let n = e.n?;
                let term = match self.count(n).ok()? {
                    Count::Exact(an) => {
                        let x = log_target_dd(self.h, self.rho, &self.g, n, true).exp();
                        (Dd::from_u64(an) / x).to_f64()
                    }
                    // a_n = ceil(e^x) >= e^x, so the term is at least 1
                    Count::Log(_) => 1.0,
                };
                running += term;
                Some(TraceEntry {
                    k: e.k,
                    n_k: n,
                    term,
                    running_sum: running,
                    exact: (n as usize) <= self.a.len(),
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub k: u64,
    pub n_k: u64,
    pub term: f64,
    pub running_sum: f64,
    pub exact: bool,
}

/// One point of the growth trace along `n_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cond2Entry {
    pub k: u64,
    pub n_k: u64,
    pub log_count: f64,
    /// `log #psi^-1(n_k) - h n_k + sqrt(2 rho n_k) g(n_k)`
    pub log_value: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Cond2Report {
    pub trace: Vec<Cond2Entry>,
    /// largest `|g(n)/g(n+1) - 1|` at `n = 10, 100, ...`
    pub g_ratio_deviation: f64,
    pub escape: f64,
    pub holds: bool,
}

/// Smallest `m` with `psi(m) >= y` for a nondecreasing closed-form rate.
fn first_reaching(psi: &RateFunction, y: u64, guess: f64) -> Result<u64> {
    let mut lo = 1u64;
    let mut hi = (guess.max(2.0) as u64).max(2);
    while psi.eval(hi)? < y {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::Resource("level beyond u64".into()))?;
    }
    if psi.eval(lo)? >= y {
        return Ok(lo);
    }
    // psi(lo) < y <= psi(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if psi.eval(mid)? >= y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `#psi^-1(n)`, exactly when it fits and as a logarithm otherwise.
pub fn level_count(psi: &RateFunction, n: u64, horizon: u64) -> Result<Count> {
    match psi.kind() {
        RateKind::Identity => Ok(Count::Exact(1)),
        RateKind::Constructed => psi.constructed_data().unwrap().count(n),
        RateKind::Plus | RateKind::Minus => {
            let p = *psi.params().unwrap();
            let sign = if psi.kind() == RateKind::Plus { 1.0 } else { -1.0 };
            let a = p.coefficient(sign);
            let (lo0, hi0) = phi_inverse(n as f64, p.h, p.rho, a);
            let (lo1, hi1) = phi_inverse(n as f64 + 1.0, p.h, p.rho, a);
            if hi1 < 42.0 && !psi.clamped() {
                let m0 = first_reaching(psi, n, lo0.exp())?;
                let m1 = first_reaching(psi, n + 1, lo1.exp())?;
                return Ok(Count::Exact(m1 - m0));
            }
            let (l0, l1) = (0.5 * (lo0 + hi0), 0.5 * (lo1 + hi1));
            Ok(Count::Log(l1 + (-(l0 - l1).exp()).ln_1p()))
        }
        RateKind::Constant | RateKind::Table => {
            let top = psi.domain_limit().map_or(horizon, |l| l.min(horizon));
            if top == 0 {
                return Ok(Count::Exact(0));
            }
            Ok(Count::Exact(preimage_counts(psi, top)?.get(&n).copied().unwrap_or(0)))
        }
    }
}

/// Trace `log #psi^-1(n_k) - h n_k + sqrt(2 rho n_k) g(n_k)` along `n_k`.
/// The condition is reported to hold when the trace ends above `escape` and
/// is nondecreasing over its last third.
pub fn cond2_check(
    psi: &RateFunction,
    nk: &[u64],
    g: &GFunction,
    h: f64,
    rho: f64,
    escape: f64,
    horizon: u64,
) -> Result<Cond2Report> {
    if !nk.windows(2).all(|w| w[0] < w[1]) || nk.first() == Some(&0) {
        return Err(domain("n_k must be positive and strictly increasing"));
    }
    let mut trace = Vec::with_capacity(nk.len());
    for (i, &n) in nk.iter().enumerate() {
        let c = level_count(psi, n, horizon)?;
        let nf = n as f64;
        let log_count = c.ln();
        trace.push(Cond2Entry {
            k: i as u64 + 1,
            n_k: n,
            log_count,
            log_value: log_count - h * nf + (2.0 * rho * nf).sqrt() * g.eval(nf),
            exact: matches!(c, Count::Exact(_)),
        });
    }
    let tail_start = trace.len() - trace.len().div_ceil(3).max(2).min(trace.len());
    let holds = trace.len() >= 2
        && trace.last().is_some_and(|e| e.log_value > escape)
        && trace[tail_start..].windows(2).all(|w| w[1].log_value >= w[0].log_value);
    Ok(Cond2Report {
        trace,
        g_ratio_deviation: g.ratio_spot_check(12),
        escape,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 0.500_402_423_538_187_9;
    const RHO: f64 = 0.307_489_928_907_648_9;
    const G: GFunction = GFunction::SqrtLogLog { scale: 1.0 };

    #[test]
    fn sequence_from_loglog() {
        let s = g_sequence(&G, 30.0).unwrap();
        let ns: Vec<Option<u64>> = s.iter().map(|e| e.n).collect();
        // e^e = 15.15..., e^(e^2) = 1618.17..., e^(e^3) = 528491311.48...
        assert_eq!(ns, vec![Some(16), Some(1619), Some(528_491_312)]);
    }

    #[test]
    fn counts_are_exact_and_inverted() {
        let c = ConstructedRate::build(G, H, RHO, 2000).unwrap();
        assert!(c.exact_levels() > 100);
        assert!(c.all_certified());
        // direct count of psi over its exact range
        let total = c.max_argument();
        let m_max = total.min(2_000_000);
        let mut counts = std::collections::HashMap::new();
        for m in 1..=m_max {
            *counts.entry(c.psi(m).unwrap()).or_insert(0u64) += 1;
        }
        for n in 1..=c.exact_levels() {
            let s_next = c.prefix_sum(n + 1).unwrap();
            if s_next <= m_max {
                let Count::Exact(an) = c.count(n).unwrap() else { panic!() };
                assert_eq!(counts.get(&n).copied().unwrap_or(0), an, "level {n}");
            }
        }
        // ceiling on the sequence
        // e^(16 h - sqrt(32 rho log log 16)) = 126.3099...
        assert_eq!(c.count(16).unwrap(), Count::Exact(127));
        assert!(matches!(c.count(1619).unwrap(), Count::Log(_)));
        assert_eq!(c.verify_inversion(), Ok(c.exact_levels()));
    }

    #[test]
    fn nondecreasing_and_eventually_below_identity() {
        let c = ConstructedRate::build(G, H, RHO, 200).unwrap();
        let m0 = c.initial_segment_end();
        let top = c.max_argument().min(500_000);
        let mut prev = 0;
        for m in 1..=top {
            let v = c.psi(m).unwrap();
            assert!(v >= prev);
            prev = v;
            if m >= m0 {
                assert!(v <= m);
            }
        }
    }

    #[test]
    fn divergence_terms_at_least_one() {
        let c = ConstructedRate::build(G, H, RHO, 1_000_000_000).unwrap();
        let t = c.divergence_trace();
        assert_eq!(t.len(), 3);
        for (i, e) in t.iter().enumerate() {
            assert!(e.term >= 1.0);
            assert!(e.running_sum >= (i + 1) as f64);
        }
        assert!(t[0].exact && !t[1].exact);
    }

    #[test]
    fn cond2_for_threshold_minus() {
        let psi = RateFunction::minus(H, RHO, 0.5).unwrap();
        let nk: Vec<u64> = (1..=80).collect();
        let g = GFunction::SqrtLogLog { scale: 1.0 - 0.5 / 2.0 };
        let r = cond2_check(&psi, &nk, &g, H, RHO, 0.0, 0).unwrap();
        assert!(r.holds);
        assert!(r.trace.iter().all(|e| e.exact));
        // growth like exp((eps/2) sqrt(2 rho k log log k))
        for e in &r.trace[19..] {
            let k = e.n_k as f64;
            let model = 0.25 * (2.0 * RHO * k * glog(glog(k))).sqrt();
            assert!((e.log_value - model).abs() < 0.25, "k={k}");
        }
        let c = ConstructedRate::build(G, H, RHO, 2000).unwrap();
        let psi = RateFunction::constructed(Arc::new(c));
        let r = cond2_check(&psi, &[16, 1619], &G, H, RHO, 0.0, 0).unwrap();
        // ceilings keep the trace at or just above zero
        assert!(r.trace.iter().all(|e| e.log_value > -1e-9 && e.log_value < 0.01));
    }
}
