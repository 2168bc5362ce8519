//! Homogeneous iterated function systems `phi_i(x) = r O_i x + t_i` in one or
//! two dimensions, with certified geometry and the transfer of symbolic
//! recurrence to the attractor.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::recurrence::events::{classify, EventStatus};
use crate::recurrence::rate::RateFunction;
use crate::sft::{PrefixMatchArray, Word};

/// Default refinement depth for diameter and separation bounds.
pub const DEFAULT_DEPTH: u32 = 20;
/// Bounds closer than this are considered converged.
pub const BOUND_TOL: f64 = 1e-10;
/// Largest number of cylinder pairs expanded by one search.
pub const PAIR_BUDGET: usize = 200_000;
/// Floating-point allowance in numeric corroboration.
pub const NUMERIC_SLACK: f64 = 1e-12;

/// One similarity in config form. `o` is `+1` or `-1` in one dimension and a
/// rotation angle in radians in two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    #[serde(default)]
    pub o: Option<f64>,
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfsSpec {
    pub dimension: usize,
    pub r: f64,
    pub maps: Vec<MapSpec>,
}

type P2 = [f64; 2];

/// `x -> s M x + t` with `M` orthogonal, stored with the scale folded in.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Affine {
    m: [[f64; 2]; 2],
    t: P2,
}

impl Affine {
    const IDENTITY: Affine = Affine {
        m: [[1.0, 0.0], [0.0, 1.0]],
        t: [0.0, 0.0],
    };

    fn apply(&self, x: P2) -> P2 {
        [
            self.m[0][0] * x[0] + self.m[0][1] * x[1] + self.t[0],
            self.m[1][0] * x[0] + self.m[1][1] * x[1] + self.t[1],
        ]
    }

    /// `self ∘ other`
    fn compose(&self, other: &Affine) -> Affine {
        let mut m = [[0.0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * other.m[0][j] + self.m[i][1] * other.m[1][j];
            }
        }
        Affine { m, t: self.apply(other.t) }
    }
}

fn dist(a: P2, b: P2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn norm(a: P2) -> f64 {
    a[0].hypot(a[1])
}

/// Outer ball `B(c, R)` of the attractor and bounds on its diameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttractorBounds {
    pub center: Vec<f64>,
    pub radius: f64,
    pub diam_lower: f64,
    pub diam_upper: f64,
    pub depth: u32,
    /// the search stopped before the bounds met
    pub loose: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationBound {
    pub sep_lower: f64,
    pub sep_upper: f64,
    pub depth: u32,
    /// the search stopped before the bounds met
    pub loose: bool,
}

/// A system whose diameter, separation and sandwich constant are certified.
#[derive(Clone, Debug, Serialize)]
pub struct CertifiedIfs {
    pub spec: IfsSpec,
    pub bounds: AttractorBounds,
    pub separation: SeparationBound,
    pub n: u32,
    #[serde(skip)]
    maps: Vec<Affine>,
    #[serde(skip)]
    fixed: Vec<P2>,
}

impl IfsSpec {
    pub fn k(&self) -> usize {
        self.maps.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 1 && self.dimension != 2 {
            return Err(domain(format!("dimension must be 1 or 2, got {}", self.dimension)));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(domain(format!("contraction ratio must lie in (0, 1), got {}", self.r)));
        }
        if self.maps.len() < 2 {
            return Err(domain("an IFS needs at least two maps"));
        }
        if self.maps.len() > u16::MAX as usize {
            return Err(domain("too many maps"));
        }
        for (i, m) in self.maps.iter().enumerate() {
            if m.t.len() != self.dimension {
                return Err(domain(format!("map {}: translation has {} entries", i + 1, m.t.len())));
            }
            if m.t.iter().any(|v| !v.is_finite()) {
                return Err(domain(format!("map {}: translation is not finite", i + 1)));
            }
            if let Some(o) = m.o {
                if self.dimension == 1 && o != 1.0 && o != -1.0 {
                    return Err(domain(format!("map {}: orientation must be +1 or -1", i + 1)));
                }
                if !o.is_finite() {
                    return Err(domain(format!("map {}: angle is not finite", i + 1)));
                }
            }
        }
        Ok(())
    }

    fn affines(&self) -> Vec<Affine> {
        self.maps
            .iter()
            .map(|m| {
                let r = self.r;
                if self.dimension == 1 {
                    let o = m.o.unwrap_or(1.0);
                    Affine {
                        m: [[r * o, 0.0], [0.0, 0.0]],
                        t: [m.t[0], 0.0],
                    }
                } else {
                    let (s, c) = m.o.unwrap_or(0.0).sin_cos();
                    Affine {
                        m: [[r * c, -r * s], [r * s, r * c]],
                        t: [m.t[0], m.t[1]],
                    }
                }
            })
            .collect()
    }

    pub fn middle_thirds() -> Self {
        IfsSpec {
            dimension: 1,
            r: 1.0 / 3.0,
            maps: vec![
                MapSpec { o: None, t: vec![0.0] },
                MapSpec {
                    o: None,
                    t: vec![2.0 / 3.0],
                },
            ],
        }
    }

    /// Four maps of ratio 1/4 onto the corners of the unit square.
    pub fn four_corner() -> Self {
        let corners = [[0.0, 0.0], [0.75, 0.0], [0.0, 0.75], [0.75, 0.75]];
        IfsSpec {
            dimension: 2,
            r: 0.25,
            maps: corners.iter().map(|t| MapSpec { o: None, t: t.to_vec() }).collect(),
        }
    }
}

fn fixed_point(a: &Affine) -> P2 {
    // (I - M) x = t
    let (p, q, r, s) = (1.0 - a.m[0][0], -a.m[0][1], -a.m[1][0], 1.0 - a.m[1][1]);
    let det = p * s - q * r;
    [(s * a.t[0] - q * a.t[1]) / det, (p * a.t[1] - r * a.t[0]) / det]
}

/// Fixed point of the averaged map and the radius of an invariant ball.
fn outer_ball(maps: &[Affine], r: f64) -> (P2, f64) {
    let k = maps.len() as f64;
    let mut avg = Affine {
        m: [[0.0; 2]; 2],
        t: [0.0, 0.0],
    };
    for a in maps {
        for i in 0..2 {
            for j in 0..2 {
                avg.m[i][j] += a.m[i][j] / k;
            }
            avg.t[i] += a.t[i] / k;
        }
    }
    let c = fixed_point(&avg);
    let rad = maps.iter().map(|a| dist(a.apply(c), c)).fold(0.0, f64::max) / (1.0 - r);
    // cover rounding in the fixed point and the maps
    (c, rad * (1.0 + 1e-12) + 1e-15)
}

#[derive(Clone, Debug)]
struct PairNode {
    key: f64,
    a: Affine,
    b: Affine,
    same: bool,
    depth: u32,
}

impl PartialEq for PairNode {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for PairNode {}
impl PartialOrd for PairNode {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for PairNode {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.total_cmp(&o.key)
    }
}

struct Geometry<'a> {
    maps: &'a [Affine],
    fixed: &'a [P2],
    c: P2,
    radius: f64,
    r: f64,
}

impl Geometry<'_> {
    /// Distance bounds between the attractor pieces of two cylinders of the
    /// given depth: `(lower, upper)` for the minimum and `(upper, lower)` for
    /// the maximum distance.
    fn pair_bounds(&self, a: &Affine, b: &Affine, depth: u32) -> (f64, f64, f64, f64) {
        let slack = 2.0 * self.r.powi(depth as i32) * self.radius;
        let d = dist(a.apply(self.c), b.apply(self.c));
        let (mut near, mut far) = (f64::INFINITY, 0.0f64);
        for &p in self.fixed {
            let pa = a.apply(p);
            for &q in self.fixed {
                let e = dist(pa, b.apply(q));
                near = near.min(e);
                far = far.max(e);
            }
        }
        ((d - slack).max(0.0), near, d + slack, far)
    }

    fn children(&self, n: &PairNode) -> Vec<(Affine, Affine, bool)> {
        let mut out = Vec::new();
        for (i, fi) in self.maps.iter().enumerate() {
            for (j, fj) in self.maps.iter().enumerate() {
                if n.same && j < i {
                    continue;
                }
                out.push((n.a.compose(fi), n.b.compose(fj), n.same && i == j));
            }
        }
        out
    }
}

enum Goal {
    Min,
    Max,
}

/// Best-first search over pairs of cylinders. Returns `(certified, witness,
/// depth reached, stopped early)`; for `Min` the certified value is a lower
/// bound, for `Max` an upper bound.
fn pair_search(geo: &Geometry, roots: Vec<(Affine, Affine, bool, u32)>, goal: Goal, max_depth: u32, tol: f64) -> (f64, f64, u32, bool) {
    let sign = match goal {
        Goal::Min => -1.0,
        Goal::Max => 1.0,
    };
    let mut heap = BinaryHeap::new();
    let mut witness = match goal {
        Goal::Min => f64::INFINITY,
        Goal::Max => 0.0,
    };
    let push = |heap: &mut BinaryHeap<PairNode>, witness: &mut f64, a: Affine, b: Affine, same: bool, depth: u32| {
        let (lo, near, hi, far) = geo.pair_bounds(&a, &b, depth);
        let (bound, w) = match goal {
            Goal::Min => (lo, near),
            Goal::Max => (hi, far),
        };
        let better = |x: f64, y: f64| if sign < 0.0 { x < y } else { x > y };
        if better(w, *witness) {
            *witness = w;
        }
        // a pair that cannot beat the witness is dropped
        if !better(*witness, bound) || (bound - *witness).abs() <= tol {
            heap.push(PairNode {
                key: sign * bound,
                a,
                b,
                same,
                depth,
            });
        }
    };
    for (a, b, same, d) in roots {
        push(&mut heap, &mut witness, a, b, same, d);
    }
    let mut expanded = 0usize;
    let mut reached = 0;
    loop {
        let Some(top) = heap.pop() else {
            return (witness, witness, reached, false);
        };
        let bound = sign * top.key;
        reached = reached.max(top.depth);
        if (bound - witness).abs() <= tol || top.depth >= max_depth || expanded >= PAIR_BUDGET {
            let early = (bound - witness).abs() > tol;
            return (bound, witness, reached, early);
        }
        expanded += 1;
        for (a, b, same) in geo.children(&top) {
            push(&mut heap, &mut witness, a, b, same, top.depth + 1);
        }
    }
}

impl CertifiedIfs {
    /// Bound the attractor, certify strong separation and choose `N`.
    pub fn certify(spec: IfsSpec, depth: u32) -> Result<Self> {
        spec.validate()?;
        let maps = spec.affines();
        let fixed: Vec<P2> = maps.iter().map(fixed_point).collect();
        let bounds = bound_attractor_with(&spec, &maps, &fixed, depth);
        let separation = separation_with(&spec, &maps, &fixed, &bounds, depth)?;
        let n = prop_n_value(spec.r, separation.sep_lower, bounds.diam_upper);
        Ok(CertifiedIfs {
            spec,
            bounds,
            separation,
            n,
            maps,
            fixed,
        })
    }

    pub fn r(&self) -> f64 {
        self.spec.r
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    /// Both defining inequalities of `N`, evaluated directly.
    pub fn n_is_valid(&self) -> bool {
        let r = self.r();
        r.powi(self.n as i32) <= self.separation.sep_lower && r.powi(self.n as i32 - 1) * self.bounds.diam_upper < 1.0
    }

    fn geometry(&self) -> Geometry<'_> {
        Geometry {
            maps: &self.maps,
            fixed: &self.fixed,
            c: [self.bounds.center[0], *self.bounds.center.get(1).unwrap_or(&0.0)],
            radius: self.bounds.radius,
            r: self.spec.r,
        }
    }

    /// `phi_{w_1} ∘ ... ∘ phi_{w_n}(0)` and a radius bounding its distance to
    /// the projection of any continuation.
    pub fn project(&self, w: &Word, n: usize) -> Result<(Vec<f64>, f64)> {
        if n > w.len() {
            return Err(domain(format!("projection depth {n} exceeds the word length {}", w.len())));
        }
        if w.sft().alphabet_size() != self.k() {
            return Err(domain("word alphabet does not match the number of maps"));
        }
        self.project_symbols(&w.symbols()[..n])
    }

    fn project_symbols(&self, syms: &[u16]) -> Result<(Vec<f64>, f64)> {
        let mut x = [0.0, 0.0];
        for &s in syms.iter().rev() {
            x = self.maps[s as usize].apply(x);
        }
        let g = self.geometry();
        let err = self.r().powi(syms.len() as i32) * (norm(g.c) + g.radius);
        Ok((x[..self.spec.dimension].to_vec(), err))
    }

    /// Index of the piece nearest to `x` and its preimage, for display only.
    pub fn numeric_t(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let p = [x[0], *x.get(1).unwrap_or(&0.0)];
        let g = self.geometry();
        let (i, a) = self
            .maps
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| dist(a.apply(g.c), p).total_cmp(&dist(b.apply(g.c), p)))
            .unwrap();
        let r = self.r();
        let q = [p[0] - a.t[0], p[1] - a.t[1]];
        // inverse of r O is O^T / r
        let y = if self.spec.dimension == 1 {
            [q[0] / a.m[0][0], 0.0]
        } else {
            [(a.m[0][0] * q[0] + a.m[1][0] * q[1]) / (r * r), (a.m[0][1] * q[0] + a.m[1][1] * q[1]) / (r * r)]
        };
        (i, y[..self.spec.dimension].to_vec())
    }
}

fn bound_attractor_with(spec: &IfsSpec, maps: &[Affine], fixed: &[P2], depth: u32) -> AttractorBounds {
    let (c, radius) = outer_ball(maps, spec.r);
    let geo = Geometry {
        maps,
        fixed,
        c,
        radius,
        r: spec.r,
    };
    let root = vec![(Affine::IDENTITY, Affine::IDENTITY, true, 0)];
    let (upper, lower, reached, early) = pair_search(&geo, root, Goal::Max, depth, BOUND_TOL);
    AttractorBounds {
        center: c[..spec.dimension].to_vec(),
        radius,
        diam_lower: lower.min(upper),
        diam_upper: upper.min(2.0 * radius),
        depth: reached,
        loose: early,
    }
}

fn separation_with(spec: &IfsSpec, maps: &[Affine], fixed: &[P2], bounds: &AttractorBounds, depth: u32) -> Result<SeparationBound> {
    let c = [bounds.center[0], *bounds.center.get(1).unwrap_or(&0.0)];
    let geo = Geometry {
        maps,
        fixed,
        c,
        radius: bounds.radius,
        r: spec.r,
    };
    let mut roots = Vec::new();
    for i in 0..maps.len() {
        for j in i + 1..maps.len() {
            roots.push((maps[i], maps[j], false, 1));
        }
    }
    let (lower, upper, reached, early) = pair_search(&geo, roots, Goal::Min, depth.max(1), BOUND_TOL);
    if !(lower > 0.0) {
        return Err(Error::CannotCertify {
            bound: upper,
            depth: reached as usize,
        });
    }
    Ok(SeparationBound {
        sep_lower: lower,
        sep_upper: upper,
        depth: reached,
        loose: early,
    })
}

/// Outer ball and diameter bounds from cylinders of depth up to `depth`.
pub fn bound_attractor(spec: &IfsSpec, depth: u32) -> Result<AttractorBounds> {
    spec.validate()?;
    let maps = spec.affines();
    let fixed: Vec<P2> = maps.iter().map(fixed_point).collect();
    Ok(bound_attractor_with(spec, &maps, &fixed, depth))
}

/// Certified lower bound on `min_{i != j} d(phi_i(X), phi_j(X))`.
pub fn separation(spec: &IfsSpec, depth: u32) -> Result<SeparationBound> {
    spec.validate()?;
    let maps = spec.affines();
    let fixed: Vec<P2> = maps.iter().map(fixed_point).collect();
    let b = bound_attractor_with(spec, &maps, &fixed, depth);
    separation_with(spec, &maps, &fixed, &b, depth)
}

/// Smallest `N >= 1` with `r^N <= sep` and `r^(N-1) diam < 1`.
pub fn prop_n_value(r: f64, sep: f64, diam_upper: f64) -> u32 {
    let mut n = 1u32;
    while !(r.powi(n as i32) <= sep && r.powi(n as i32 - 1) * diam_upper < 1.0) {
        n += 1;
    }
    n
}

pub fn prop_n(ifs: &CertifiedIfs) -> u32 {
    ifs.n
}

pub fn project(w: &Word, ifs: &CertifiedIfs, n: usize) -> Result<(Vec<f64>, f64)> {
    ifs.project(w, n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRow {
    pub n: u64,
    /// `floor(psi(n))`
    pub required: u64,
    pub certified: EventStatus,
    pub possible: EventStatus,
    /// `|T^n x - x|` from finite projections, for certified events
    pub distance: Option<f64>,
    /// bound the distance must respect, including projection error
    pub allowance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub n_constant: u32,
    pub rows: Vec<SandwichRow>,
    /// certified events are all possible events
    pub included: bool,
    /// every certified event's numeric distance is within its allowance
    pub numeric_ok: bool,
}

impl SandwichReport {
    pub fn certified_events(&self) -> Vec<u64> {
        self.rows.iter().filter(|r| r.certified == EventStatus::Satisfied).map(|r| r.n).collect()
    }

    pub fn possible_events(&self) -> Vec<u64> {
        self.rows.iter().filter(|r| r.possible == EventStatus::Satisfied).map(|r| r.n).collect()
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(writer);
        wr.write_record(["n", "required", "certified", "possible"])?;
        let s = |e: EventStatus| match e {
            EventStatus::Satisfied => "1",
            EventStatus::NotSatisfied => "0",
            EventStatus::Undecidable => "undecidable",
        };
        for r in &self.rows {
            wr.write_record([r.n.to_string(), r.required.to_string(), s(r.certified).into(), s(r.possible).into()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Symbolic events at `floor(psi) + N` (which certify `|T^n x - x| <=
/// r^psi(n)`) and at `floor(psi) - N` (which contain every such event), for
/// `n` in `[lo, hi]`.
pub fn tilde_recurrence_sandwich(w: &Word, psi: &RateFunction, ifs: &CertifiedIfs, lo: u64, hi: u64) -> Result<SandwichReport> {
    if w.sft().alphabet_size() != ifs.k() {
        return Err(domain("word alphabet does not match the number of maps"));
    }
    if !w.sft().is_full_shift() {
        return Err(domain("IFS codings live on the full shift"));
    }
    let z = PrefixMatchArray::new(w.symbols());
    let req = psi.values(lo, hi)?;
    let big_n = ifs.n as u64;
    let len = w.len();
    let (x, ex) = ifs.project_symbols(w.symbols())?;
    let r = ifs.r();
    let mut rows = Vec::with_capacity(req.len());
    let (mut included, mut numeric_ok) = (true, true);
    for (n, k) in (lo..=hi).zip(req) {
        let certified = classify(n, k + big_n, &z).status;
        let possible = classify(n, k.saturating_sub(big_n), &z).status;
        if certified == EventStatus::Satisfied && possible != EventStatus::Satisfied {
            included = false;
        }
        let (mut distance, mut allowance) = (None, None);
        if certified == EventStatus::Satisfied && (n as usize) < len {
            let (y, ey) = ifs.project_symbols(&w.symbols()[n as usize..])?;
            let d = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let bound = r.powi((k + big_n) as i32) * ifs.bounds.diam_upper;
            let allow = bound.min(r.powi(k as i32)) + ex + ey + NUMERIC_SLACK;
            numeric_ok &= d <= allow;
            distance = Some(d);
            allowance = Some(allow);
        }
        rows.push(SandwichRow {
            n,
            required: k,
            certified,
            possible,
            distance,
            allowance,
        });
    }
    Ok(SandwichReport {
        n_constant: ifs.n,
        rows,
        included,
        numeric_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::SftSpec;
    use std::sync::Arc;

    #[test]
    fn middle_thirds_geometry() {
        let c = CertifiedIfs::certify(IfsSpec::middle_thirds(), DEFAULT_DEPTH).unwrap();
        assert!((c.separation.sep_lower - 1.0 / 3.0).abs() < 1e-9);
        assert!((c.bounds.diam_upper - 1.0).abs() < 1e-9);
        assert!((c.bounds.diam_lower - 1.0).abs() < 1e-9);
        assert_eq!(c.n, 2);
        assert!(c.n_is_valid());
    }

    #[test]
    fn touching_pieces_cannot_be_certified() {
        let s = IfsSpec {
            dimension: 1,
            r: 0.5,
            maps: vec![MapSpec { o: None, t: vec![0.0] }, MapSpec { o: None, t: vec![0.5] }],
        };
        assert!(matches!(CertifiedIfs::certify(s, 12), Err(Error::CannotCertify { .. })));
    }

    #[test]
    fn single_map_rejected() {
        let s = IfsSpec {
            dimension: 1,
            r: 0.5,
            maps: vec![MapSpec { o: None, t: vec![0.0] }],
        };
        assert!(matches!(bound_attractor(&s, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn four_corner_geometry() {
        let c = CertifiedIfs::certify(IfsSpec::four_corner(), DEFAULT_DEPTH).unwrap();
        // facing pieces [0, 1/4] and [3/4, 1] along an axis
        assert!((c.separation.sep_lower - 0.5).abs() < 1e-6, "{:?}", c.separation);
        assert!((c.bounds.diam_upper - 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(c.n, 2);
        assert!(c.n_is_valid());
    }

    #[test]
    fn diam_upper_nonincreasing_in_depth() {
        let spec = IfsSpec {
            dimension: 2,
            r: 0.3,
            maps: vec![
                MapSpec { o: Some(0.4), t: vec![0.0, 0.0] },
                MapSpec { o: Some(-1.1), t: vec![1.0, 0.2] },
                MapSpec { o: Some(2.0), t: vec![0.3, 1.0] },
            ],
        };
        let mut prev = f64::INFINITY;
        for d in 0..10 {
            let b = bound_attractor(&spec, d).unwrap();
            assert!(b.diam_upper <= prev + 1e-15);
            assert!(b.diam_lower <= b.diam_upper);
            prev = b.diam_upper;
        }
    }

    #[test]
    fn projection_of_constant_codings() {
        let c = CertifiedIfs::certify(IfsSpec::middle_thirds(), 10).unwrap();
        let sft = Arc::new(SftSpec::full_shift(2).unwrap());
        let ones = Word::new(sft.clone(), &[2; 60]).unwrap();
        let (x, e) = c.project(&ones, 60).unwrap();
        assert!((x[0] - 1.0).abs() <= e + 1e-15);
        let zeros = Word::new(sft, &[1; 60]).unwrap();
        let (x, e1) = c.project(&zeros, 10).unwrap();
        let (_, e2) = c.project(&zeros, 11).unwrap();
        assert!(x[0].abs() <= e1);
        assert!((e2 / e1 - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.numeric_t(&[0.9]).0, 1);
    }

    #[test]
    fn constant_word_sandwich() {
        let c = CertifiedIfs::certify(IfsSpec::middle_thirds(), 10).unwrap();
        let sft = Arc::new(SftSpec::full_shift(2).unwrap());
        let w = Word::new(sft, &[1; 100]).unwrap();
        let rep = tilde_recurrence_sandwich(&w, &RateFunction::constant(5), &c, 1, 100).unwrap();
        for r in &rep.rows {
            if r.n + 5 + 2 <= 100 {
                assert_eq!(r.certified, EventStatus::Satisfied);
            }
        }
        assert!(rep.included && rep.numeric_ok);
    }
}
