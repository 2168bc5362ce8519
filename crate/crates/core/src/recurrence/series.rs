//! Diagnostics for the series
//! `sum_n exp(-h psi(n) + (1+eps) sqrt(2 rho psi(n) log log psi(n)))`.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::numeric::glog;

use super::rate::{threshold_real, RateFunction, RateKind, ThresholdParams};

/// Default tolerance for the tail certificate.
pub const SERIES_TOL: f64 = 1e-3;
/// Largest number of levels scanned in the level-space tail.
pub const LEVEL_CAP: u64 = 200_000;
const BISECTION_STEPS: usize = 200;
/// The scan gives up once terms exceed the first one by this factor (log scale).
const GROWTH_ABORT: f64 = 50.0;
/// Levels over which `l(k) + 2 log k` must already be nonincreasing.
const MONOTONE_WINDOW: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverging,
    Inconclusive,
}

/// `log` of the series term at level `k = psi(n)`.
#[inline]
pub fn log_term(k: u64, h: f64, rho: f64, eps: f64) -> f64 {
    let kf = k as f64;
    -h * kf + (1.0 + eps) * (2.0 * rho * kf * glog(glog(kf))).sqrt()
}

/// Series exponent used against `psi_plus` with parameter `eps`:
/// `(1 + eps/2)^(1/3) - 1`.
pub fn series_eps_for_threshold(eps: f64) -> f64 {
    (1.0 + eps / 2.0).cbrt() - 1.0
}

/// Bound on the tail beyond `N`, computed level by level.
#[derive(Clone, Debug, Serialize)]
pub struct TailCertificate {
    /// first level reached by some `n > N`
    pub first_level: u64,
    /// certified bound on `sum_{n > N}`
    pub tail_from_n: f64,
    /// smallest level whose tail is below the tolerance
    pub cut_level: u64,
    /// `log N*`: every `n >= N*` has `psi(n) >= cut_level`
    pub log_cut_n: f64,
    pub tail_at_cut: f64,
    pub levels_scanned: u64,
    /// bound on the levels beyond the scan
    pub remainder: f64,
    /// `l(k) + 2 log k` checked nonincreasing from this level on
    pub monotone_from: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockIncrement {
    pub lo: u64,
    pub hi: u64,
    pub increment: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesReport {
    pub rate: String,
    pub h: f64,
    pub rho: f64,
    pub eps: f64,
    pub n: u64,
    /// `(m, S_m)` on the grid `1, 2, 5, 10, 20, ...` plus `N`
    pub partial_sums: Vec<(u64, f64)>,
    pub blocks: Vec<BlockIncrement>,
    /// trailing decade blocks with nondecreasing positive increments
    pub growing_blocks: usize,
    pub tail: Option<TailCertificate>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Neumaier compensated sum.
#[derive(Default, Clone, Copy)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }
    fn value(&self) -> f64 {
        self.s + self.c
    }
}

fn grid_points(n: u64) -> Vec<u64> {
    let mut g = Vec::new();
    let mut d = 1u64;
    'outer: loop {
        for m in [1u64, 2, 5] {
            match d.checked_mul(m) {
                Some(v) if v < n => g.push(v),
                _ => break 'outer,
            }
        }
        d = match d.checked_mul(10) {
            Some(v) => v,
            None => break,
        };
    }
    g.push(n);
    g
}

/// Partial sums up to `N`, a tail certificate for closed-form rates, and a
/// three-valued verdict.
pub fn convergence_series(psi: &RateFunction, h: f64, rho: f64, eps: f64, n: u64) -> Result<SeriesReport> {
    convergence_series_with(psi, h, rho, eps, n, SERIES_TOL, LEVEL_CAP)
}

pub fn convergence_series_with(
    psi: &RateFunction,
    h: f64,
    rho: f64,
    eps: f64,
    n: u64,
    tol: f64,
    level_cap: u64,
) -> Result<SeriesReport> {
    if n == 0 {
        return Err(domain("series horizon must be at least 1"));
    }
    ThresholdParams::new(h, rho, eps)?;
    if let Some(lim) = psi.domain_limit() {
        if n > lim {
            return Err(domain(format!("series horizon {n} exceeds the rate domain {lim}")));
        }
    }

    // direct summation, caching terms of small levels
    const CACHE: usize = 4096;
    let mut cache = vec![f64::NAN; CACHE];
    let mut term = |k: u64| -> f64 {
        if (k as usize) < CACHE {
            let c = &mut cache[k as usize];
            if c.is_nan() {
                *c = log_term(k, h, rho, eps).exp();
            }
            *c
        } else {
            log_term(k, h, rho, eps).exp()
        }
    };
    let grid = grid_points(n);
    let mut partial_sums = Vec::with_capacity(grid.len());
    let mut gi = 0;
    let mut sum = Sum::default();
    for m in 1..=n {
        sum.add(term(psi.eval(m)?));
        if grid[gi] == m {
            partial_sums.push((m, sum.value()));
            gi += 1;
        }
    }

    // decade blocks
    let decade: Vec<(u64, f64)> = partial_sums
        .iter()
        .copied()
        .filter(|(m, _)| is_power_of_ten(*m))
        .collect();
    let blocks: Vec<BlockIncrement> = decade
        .windows(2)
        .map(|p| BlockIncrement {
            lo: p[0].0,
            hi: p[1].0,
            increment: p[1].1 - p[0].1,
        })
        .collect();
    let mut growing_blocks = 0;
    for i in (0..blocks.len()).rev() {
        let ok = blocks[i].increment > 0.0 && (i + 1 == blocks.len() || blocks[i].increment <= blocks[i + 1].increment);
        if !ok {
            break;
        }
        growing_blocks += 1;
    }

    let tail = tail_certificate(psi, h, rho, eps, n, tol, level_cap)?;
    let verdict = match &tail {
        Some(t) if t.tail_at_cut < tol => Verdict::Converged,
        _ if growing_blocks >= 3 => Verdict::Diverging,
        _ => Verdict::Inconclusive,
    };
    Ok(SeriesReport {
        rate: psi.describe(),
        h,
        rho,
        eps,
        n,
        partial_sums,
        blocks,
        growing_blocks,
        tail,
        tolerance: tol,
        verdict,
    })
}

fn is_power_of_ten(mut m: u64) -> bool {
    while m >= 10 && m % 10 == 0 {
        m /= 10;
    }
    m == 1
}

/// `phi(L) = L/h + a sqrt(2 rho L log log L)`: the threshold expression as a
/// function of `L = log n`.
fn phi_of_log(l: f64, h: f64, rho: f64, a: f64) -> f64 {
    l / h + a * (2.0 * rho * l * glog(glog(l))).sqrt()
}

/// Bracket `[lo, hi]` of the solution `L` of `phi(L) = y`.
pub(crate) fn phi_inverse(y: f64, h: f64, rho: f64, a: f64) -> (f64, f64) {
    if y <= 0.0 {
        return (0.0, 0.0);
    }
    // phi(L) >= L/h, so L = h y is an upper bracket
    let (mut lo, mut hi) = (0.0f64, h * y);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi_of_log(mid, h, rho, a) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// `log` of an upper bound on the number of `n` at level `k`.
fn level_count_fn(psi: &RateFunction) -> Option<Box<dyn Fn(u64) -> f64 + '_>> {
    match psi.kind() {
        RateKind::Identity => Some(Box::new(|_| 0.0)),
        RateKind::Plus | RateKind::Minus => {
            let p = *psi.params().unwrap();
            let sign = if psi.kind() == RateKind::Plus { 1.0 } else { -1.0 };
            let a = p.coefficient(sign);
            Some(Box::new(move |k: u64| {
                // n with k <= x(n) < k+1 lie in [e^L_k, e^L_{k+1})
                let (lo_k, _) = phi_inverse(k as f64, p.h, p.rho, a);
                let (_, hi_k1) = phi_inverse(k as f64 + 1.0, p.h, p.rho, a);
                // log(e^hi - e^lo + 1)
                let width = hi_k1 + (-(lo_k - hi_k1).exp()).ln_1p();
                crate::numeric::log_add_exp(width, 0.0)
            }))
        }
        _ => None,
    }
}

fn tail_certificate(
    psi: &RateFunction,
    h: f64,
    rho: f64,
    eps: f64,
    n: u64,
    tol: f64,
    level_cap: u64,
) -> Result<Option<TailCertificate>> {
    let Some(log_count) = level_count_fn(psi) else {
        return Ok(None);
    };
    let first_level = psi.eval(n + 1)?;
    if psi.clamped() && first_level > n + 1 {
        return Ok(None);
    }
    let ell = |k: u64| log_count(k) + log_term(k, h, rho, eps);
    let mut logs: Vec<f64> = Vec::new();
    let ell0 = ell(first_level);
    let mut monotone_run = 0u64;
    let mut prev_g = f64::INFINITY;
    let mut end = None;
    let mut k = first_level;
    while k - first_level < level_cap {
        let l = ell(k);
        if l > ell0 + GROWTH_ABORT {
            return Ok(None);
        }
        logs.push(l);
        let g = l + 2.0 * (k.max(1) as f64).ln();
        if g <= prev_g {
            monotone_run += 1;
        } else {
            monotone_run = 0;
        }
        prev_g = g;
        if monotone_run >= MONOTONE_WINDOW && l.exp() * (k as f64) < tol * 1e-6 && far_scan_monotone(&ell, k) {
            end = Some(k);
            break;
        }
        k += 1;
    }
    let Some(k_end) = end else {
        return Ok(None);
    };
    let remainder = logs.last().unwrap().exp() * k_end as f64;
    // tails from each level, summed from the top
    let mut tails = vec![0.0; logs.len()];
    let mut acc = Sum::default();
    acc.add(remainder);
    for i in (0..logs.len()).rev() {
        acc.add(logs[i].exp());
        tails[i] = acc.value();
    }
    let tail_from_n = tails[0];
    let cut = tails.iter().position(|&t| t < tol).unwrap_or(tails.len() - 1);
    let cut_level = first_level + cut as u64;
    let log_cut_n = if cut == 0 {
        (n as f64).ln()
    } else {
        match psi.kind() {
            RateKind::Identity => (cut_level as f64).ln(),
            _ => {
                let p = psi.params().unwrap();
                let sign = if psi.kind() == RateKind::Plus { 1.0 } else { -1.0 };
                phi_inverse(cut_level as f64, p.h, p.rho, p.coefficient(sign)).1
            }
        }
    };
    Ok(Some(TailCertificate {
        first_level,
        tail_from_n,
        cut_level,
        log_cut_n,
        tail_at_cut: tails[cut],
        levels_scanned: logs.len() as u64,
        remainder,
        monotone_from: k_end,
    }))
}

/// `l(k) + 2 log k` nonincreasing along a geometric sample of levels past `k`.
fn far_scan_monotone(ell: &dyn Fn(u64) -> f64, k: u64) -> bool {
    let mut prev = ell(k) + 2.0 * (k as f64).ln();
    let mut x = k as f64;
    while x < 1e12 {
        x *= 1.05;
        let kk = x.ceil() as u64;
        let g = ell(kk) + 2.0 * (kk as f64).ln();
        if g > prev {
            return false;
        }
        prev = g;
    }
    true
}

/// Where the two comparison inequalities used for `psi_plus` start to hold.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonDiagnostic {
    /// `(1 + eps/2)^(2/3)`
    pub factor: f64,
    /// `psi_plus(n) <= factor * log n / h` holds on the scanned grid for `log n` at least this
    pub bound1_from_log_n: Option<f64>,
    /// `log log(factor * log n / h) <= factor * log log log n` from this `log n` on
    pub bound2_from_log_n: Option<f64>,
    pub grid_max_log_n: f64,
    pub series_eps: f64,
}

/// Scan `L = log n` on a geometric grid up to `max_log_n` and report from
/// which grid point on each inequality holds throughout.
pub fn comparison_diagnostic(h: f64, rho: f64, eps: f64, max_log_n: f64) -> Result<ComparisonDiagnostic> {
    let p = ThresholdParams::new(h, rho, eps)?;
    let factor = (1.0 + eps / 2.0).powf(2.0 / 3.0);
    let a = p.coefficient(1.0);
    let mut from1: Option<f64> = None;
    let mut from2: Option<f64> = None;
    let mut l = 1.0f64;
    while l <= max_log_n {
        let b1 = phi_of_log(l, h, rho, a) <= factor * l / h;
        let b2 = glog(glog(factor * l / h)) <= factor * glog(glog(l));
        from1 = if b1 { from1.or(Some(l)) } else { None };
        from2 = if b2 { from2.or(Some(l)) } else { None };
        l *= 1.01;
    }
    Ok(ComparisonDiagnostic {
        factor,
        bound1_from_log_n: from1,
        bound2_from_log_n: from2,
        grid_max_log_n: max_log_n,
        series_eps: series_eps_for_threshold(eps),
    })
}

/// The real threshold expression at `n` (without the floor).
pub fn threshold_value(psi: &RateFunction, n: u64) -> Option<f64> {
    let p = psi.params()?;
    let sign = if psi.kind() == RateKind::Plus { 1.0 } else { -1.0 };
    Some(threshold_real(n, p, sign))
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 0.500_402_423_538_187_9;
    const RHO: f64 = 0.307_489_928_907_648_9;

    #[test]
    fn identity_rate_converges() {
        let r = convergence_series(&RateFunction::identity(), H, RHO, 0.5, 10_000).unwrap();
        assert_eq!(r.verdict, Verdict::Converged);
        let t = r.tail.unwrap();
        assert!(t.tail_from_n < 1e-100);
    }

    #[test]
    fn constant_rate_diverges() {
        let r = convergence_series(&RateFunction::constant(3), H, RHO, 0.5, 100_000).unwrap();
        assert_eq!(r.verdict, Verdict::Diverging);
        assert!(r.tail.is_none());
        let (_, s) = r.partial_sums.last().unwrap();
        assert!((s - 100_000.0 * log_term(3, H, RHO, 0.5).exp()).abs() < 1e-6 * s);
    }

    #[test]
    fn table_rate_is_inconclusive_without_growth() {
        let t = RateFunction::table((1..=1000).collect()).unwrap();
        let r = convergence_series(&t, H, RHO, 0.5, 1000).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn grid_and_decades() {
        assert_eq!(grid_points(120), vec![1, 2, 5, 10, 20, 50, 100, 120]);
        assert!(is_power_of_ten(1000) && !is_power_of_ten(20));
    }

    #[test]
    fn phi_inverse_brackets() {
        let a = 1.5 / H.powf(1.5);
        for y in [1.0, 10.0, 45.0, 700.0] {
            let (lo, hi) = phi_inverse(y, H, RHO, a);
            assert!(phi_of_log(lo, H, RHO, a) <= y && phi_of_log(hi, H, RHO, a) >= y);
            assert!(hi - lo < 1e-12 * hi.max(1.0));
        }
    }

    #[test]
    fn comparison_steps_eventually_hold() {
        let d = comparison_diagnostic(H, RHO, 0.5, 1e6).unwrap();
        assert!(d.bound1_from_log_n.is_some());
        assert!(d.bound2_from_log_n.is_some());
        assert!((d.series_eps - (1.25f64.cbrt() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn threshold_rates_at_ten_million() {
        let se = series_eps_for_threshold(0.5);
        let plus = convergence_series(&RateFunction::plus(H, RHO, 0.5).unwrap(), H, RHO, se, 10_000_000).unwrap();
        assert_eq!(plus.verdict, Verdict::Converged);
        let minus = convergence_series(&RateFunction::minus(H, RHO, 0.5).unwrap(), H, RHO, 0.5, 10_000_000).unwrap();
        assert_eq!(minus.verdict, Verdict::Diverging);
    }
}
