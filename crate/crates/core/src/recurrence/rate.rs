use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::glog;
use crate::xprec::{self, Dd};

use super::counterexample::ConstructedRate;

/// Fractional distance below which a closed-form value is re-evaluated in
/// double-double before taking the floor.
pub const NEAR_INTEGER: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub h: f64,
    pub rho: f64,
    pub eps: f64,
}

impl ThresholdParams {
    pub fn new(h: f64, rho: f64, eps: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || !(rho > 0.0 && rho.is_finite()) || !(eps > 0.0 && eps.is_finite()) {
            return Err(domain(format!("threshold parameters need h, rho, eps > 0 (got {h}, {rho}, {eps})")));
        }
        Ok(ThresholdParams { h, rho, eps })
    }

    /// Coefficient of the correction term: `(1 +- eps) / h^(3/2)`.
    pub fn coefficient(&self, sign: f64) -> f64 {
        (1.0 + sign * self.eps) / self.h.powf(1.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Plus,
    Minus,
    Identity,
    Constant,
    Table,
    Constructed,
}

/// A rate function `psi: N -> N`.
#[derive(Clone, Debug)]
pub struct RateFunction {
    kind: RateKind,
    params: Option<ThresholdParams>,
    constant: u64,
    /// `psi(1..=len)` for tables
    table: Arc<Vec<u64>>,
    constructed: Option<Arc<ConstructedRate>>,
    clamp: bool,
}

/// The real expression inside the floor of the threshold functions, in f64.
pub fn threshold_real(n: u64, params: &ThresholdParams, sign: f64) -> f64 {
    let l = glog(n as f64);
    let lll = glog(glog(l));
    l / params.h + params.coefficient(sign) * (2.0 * params.rho * l * lll).sqrt()
}

/// The same expression in double-double.
pub fn threshold_real_dd(n: u64, params: &ThresholdParams, sign: f64) -> Dd {
    let l = xprec::glog(Dd::from_u64(n));
    let lll = xprec::glog(xprec::glog(l));
    let h = Dd::new(params.h);
    let coef = (Dd::ONE + Dd::new(sign) * Dd::new(params.eps)) / (h * h.sqrt());
    l / h + coef * (Dd::new(2.0) * Dd::new(params.rho) * l * lll).sqrt()
}

fn threshold_floor(n: u64, params: &ThresholdParams, sign: f64) -> u64 {
    let x = threshold_real(n, params, sign);
    let fl = x.floor();
    if (x - fl).min(fl + 1.0 - x) < NEAR_INTEGER {
        return threshold_real_dd(n, params, sign).floor().to_f64() as u64;
    }
    fl as u64
}

/// `floor(log n / h + (1+eps) / h^(3/2) sqrt(2 rho log n log log log n))`.
pub fn psi_plus(n: u64, h: f64, rho: f64, eps: f64) -> Result<u64> {
    if n == 0 {
        return Err(domain("rate functions are defined for n >= 1"));
    }
    Ok(threshold_floor(n, &ThresholdParams::new(h, rho, eps)?, 1.0))
}

/// As [`psi_plus`] with `1 - eps`; requires `eps < 1`.
pub fn psi_minus(n: u64, h: f64, rho: f64, eps: f64) -> Result<u64> {
    if n == 0 {
        return Err(domain("rate functions are defined for n >= 1"));
    }
    if eps >= 1.0 {
        return Err(domain(format!("psi_minus needs eps < 1, got {eps}")));
    }
    Ok(threshold_floor(n, &ThresholdParams::new(h, rho, eps)?, -1.0))
}

impl RateFunction {
    fn base(kind: RateKind) -> Self {
        RateFunction {
            kind,
            params: None,
            constant: 0,
            table: Arc::new(Vec::new()),
            constructed: None,
            clamp: false,
        }
    }

    pub fn plus(h: f64, rho: f64, eps: f64) -> Result<Self> {
        let mut r = Self::base(RateKind::Plus);
        r.params = Some(ThresholdParams::new(h, rho, eps)?);
        Ok(r)
    }

    pub fn minus(h: f64, rho: f64, eps: f64) -> Result<Self> {
        if eps >= 1.0 {
            return Err(domain(format!("psi_minus needs eps < 1, got {eps}")));
        }
        let mut r = Self::base(RateKind::Minus);
        r.params = Some(ThresholdParams::new(h, rho, eps)?);
        Ok(r)
    }

    /// `psi(n) = n`
    pub fn identity() -> Self {
        Self::base(RateKind::Identity)
    }

    pub fn constant(c: u64) -> Self {
        let mut r = Self::base(RateKind::Constant);
        r.constant = c;
        r
    }

    /// Explicit values `psi(1), psi(2), ...`.
    pub fn table(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("rate table is empty"));
        }
        let mut r = Self::base(RateKind::Table);
        r.table = Arc::new(values);
        Ok(r)
    }

    pub(crate) fn constructed(c: Arc<ConstructedRate>) -> Self {
        let mut r = Self::base(RateKind::Constructed);
        r.constructed = Some(c);
        r
    }

    /// Replace `psi(n)` by `min(psi(n), n)`.
    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn kind(&self) -> RateKind {
        self.kind
    }

    pub fn params(&self) -> Option<&ThresholdParams> {
        self.params.as_ref()
    }

    pub fn clamped(&self) -> bool {
        self.clamp
    }

    pub fn constructed_data(&self) -> Option<&Arc<ConstructedRate>> {
        self.constructed.as_ref()
    }

    /// Closed forms with a known monotone real extension.
    pub fn is_closed_form(&self) -> bool {
        matches!(self.kind, RateKind::Plus | RateKind::Minus | RateKind::Identity | RateKind::Constant)
    }

    /// Largest `n` at which the function can be evaluated, if bounded.
    pub fn domain_limit(&self) -> Option<u64> {
        match self.kind {
            RateKind::Table => Some(self.table.len() as u64),
            RateKind::Constructed => self.constructed.as_ref().map(|c| c.max_argument()),
            _ => None,
        }
    }

    fn raw(&self, n: u64) -> Result<u64> {
        match self.kind {
            RateKind::Plus => Ok(threshold_floor(n, self.params.as_ref().unwrap(), 1.0)),
            RateKind::Minus => Ok(threshold_floor(n, self.params.as_ref().unwrap(), -1.0)),
            RateKind::Identity => Ok(n),
            RateKind::Constant => Ok(self.constant),
            RateKind::Table => self
                .table
                .get(n as usize - 1)
                .copied()
                .ok_or_else(|| domain(format!("n={n} beyond the rate table of length {}", self.table.len()))),
            RateKind::Constructed => self.constructed.as_ref().unwrap().psi(n),
        }
    }

    /// `psi(n)` for `n >= 1`.
    pub fn eval(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(domain("rate functions are defined for n >= 1"));
        }
        let v = self.raw(n)?;
        Ok(if self.clamp { v.min(n) } else { v })
    }

    /// `[psi(lo), ..., psi(hi)]`.
    pub fn values(&self, lo: u64, hi: u64) -> Result<Vec<u64>> {
        if lo == 0 || lo > hi {
            return Err(domain(format!("bad range [{lo}, {hi}]")));
        }
        if let Some(lim) = self.domain_limit() {
            if hi > lim {
                return Err(Error::Resource(format!("rate is only available up to n={lim}, asked for {hi}")));
            }
        }
        (lo..=hi).map(|n| self.eval(n)).collect()
    }

    /// High-precision re-evaluation of a closed-form threshold at `n`.
    pub fn eval_dd(&self, n: u64) -> Option<u64> {
        let p = self.params.as_ref()?;
        let sign = if self.kind == RateKind::Plus { 1.0 } else { -1.0 };
        let v = threshold_real_dd(n, p, sign).floor().to_f64() as u64;
        Some(if self.clamp { v.min(n) } else { v })
    }

    /// Short description for reports.
    pub fn describe(&self) -> String {
        let base = match self.kind {
            RateKind::Plus | RateKind::Minus => {
                let p = self.params.unwrap();
                format!("{:?}(h={}, rho={}, eps={})", self.kind, p.h, p.rho, p.eps).to_lowercase()
            }
            RateKind::Identity => "identity".into(),
            RateKind::Constant => format!("constant({})", self.constant),
            RateKind::Table => format!("table(len={})", self.table.len()),
            RateKind::Constructed => "constructed".into(),
        };
        if self.clamp {
            format!("{base}, clamped")
        } else {
            base
        }
    }
}

/// `n -> #{m <= horizon : psi(m) = n}`, by direct counting.
pub fn preimage_counts(psi: &RateFunction, horizon: u64) -> Result<BTreeMap<u64, u64>> {
    let mut counts = BTreeMap::new();
    if horizon == 0 {
        return Ok(counts);
    }
    for v in psi.values(1, horizon)? {
        *counts.entry(v).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 0.500_402_4;
    const RHO: f64 = 0.307_489_8;

    #[test]
    fn small_arguments() {
        assert_eq!(psi_plus(1, H, RHO, 0.5).unwrap(), 0);
        assert_eq!(psi_minus(1, H, RHO, 0.5).unwrap(), 0);
        // log log log n <= 0 for n <= 15: plain log n / h
        for n in 2..=15u64 {
            let plain = ((n as f64).ln() / H).floor() as u64;
            assert_eq!(psi_plus(n, H, RHO, 0.5).unwrap(), plain);
            assert_eq!(psi_minus(n, H, RHO, 0.5).unwrap(), plain);
        }
    }

    #[test]
    fn values_against_reference() {
        // floors of a 50-digit evaluation of the threshold expressions
        let cases = [
            (1_000_000u64, 39u64, 31u64),
            (16, 6, 5),
            (1000, 20, 16),
            (10_000_000, 45, 36),
            (1_234_567, 40, 32),
        ];
        for (n, plus, minus) in cases {
            assert_eq!(psi_plus(n, H, RHO, 0.5).unwrap(), plus, "n={n}");
            assert_eq!(psi_minus(n, H, RHO, 0.5).unwrap(), minus, "n={n}");
        }
        let x = threshold_real_dd(1_000_000, &ThresholdParams::new(H, RHO, 0.5).unwrap(), 1.0);
        assert!((x.to_f64() - 39.744_805_964_744_28).abs() < 1e-13);
    }

    #[test]
    fn dd_agrees_with_f64_on_a_grid() {
        let p = RateFunction::plus(H, RHO, 0.5).unwrap();
        let m = RateFunction::minus(H, RHO, 0.5).unwrap();
        for n in (1..200_000u64).step_by(37) {
            assert_eq!(p.eval(n).unwrap(), p.eval_dd(n).unwrap());
            assert_eq!(m.eval(n).unwrap(), m.eval_dd(n).unwrap());
            assert!(m.eval(n).unwrap() <= p.eval(n).unwrap());
        }
    }

    #[test]
    fn minus_tends_to_plain_log_as_eps_to_one() {
        for n in [100u64, 5000, 1 << 20] {
            let plain = ((n as f64).ln() / H).floor() as u64;
            assert_eq!(psi_minus(n, H, RHO, 1.0 - 1e-12).unwrap(), plain);
        }
    }

    #[test]
    fn preimage_examples() {
        let c = preimage_counts(&RateFunction::identity(), 50).unwrap();
        assert!(c.values().all(|&v| v == 1) && c.len() == 50);
        let c = preimage_counts(&RateFunction::constant(5), 100).unwrap();
        assert_eq!(c.get(&5), Some(&100));
        assert_eq!(c.len(), 1);
        let p = RateFunction::minus(H, RHO, 0.5).unwrap();
        let c = preimage_counts(&p, 100_000).unwrap();
        assert_eq!(c.values().sum::<u64>(), 100_000);
    }

    #[test]
    fn clamp_and_table() {
        let r = RateFunction::constant(7).with_clamp(true);
        assert_eq!(r.eval(3).unwrap(), 3);
        assert_eq!(r.eval(9).unwrap(), 7);
        let t = RateFunction::table(vec![1, 2, 2]).unwrap();
        assert_eq!(t.values(1, 3).unwrap(), vec![1, 2, 2]);
        assert!(t.eval(4).is_err());
        assert!(matches!(RateFunction::minus(H, RHO, 1.0), Err(Error::Domain(_))));
    }
}
