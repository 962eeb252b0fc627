//! Lipschitz envelopes of drivers.
//!
//! ```text
//! inf_full:   f_n(t,y,z) = inf_{u,v} { f(t,u,v) + n(|y−u| + |z−v|) }
//! sup_full:   f^n(t,y,z) = sup_{u,v} { f(t,u,v) − n(|y−u| + |z−v|) }
//! inf_z_only: f_n(t,y,z) = inf_v     { f(t,y,v) + n|z−v| }
//! ```
//!
//! The infimum is taken over a regular lattice of spacing `r` centred at the
//! query point. The growth bound `|f| ≤ C(K_t + |y| + |z|)` (and the declared
//! range or Lipschitz constant of `f`, when present) bounds the objective from
//! below at distance `ρ`, which certifies a finite search radius and lets the search stop at
//! the first lattice shell that cannot beat the incumbent. Because bases may
//! be discontinuous, no derivative information is used.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AssumptionReport, ScalarFunction, TimeFunction};
use crate::rng::KeyedStream;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    InfFull,
    SupFull,
    InfZOnly,
}

impl EnvelopeKind {
    fn sign(self) -> f64 {
        match self {
            EnvelopeKind::SupFull => -1.0,
            _ => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvelopeKind::InfFull => "inf_full",
            EnvelopeKind::SupFull => "sup_full",
            EnvelopeKind::InfZOnly => "inf_z_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [EnvelopeKind::InfFull, EnvelopeKind::SupFull, EnvelopeKind::InfZOnly]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

/// Centre and half-width (ℓ∞) of a certified search region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchBox {
    pub center_y: f64,
    pub center_z: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct EnvelopeSpec {
    base: ScalarFunction,
    n: f64,
    kind: EnvelopeKind,
    c: f64,
    k: Option<TimeFunction>,
}

/// Default lattice spacing `min(0.01, 1/(10n))`.
pub fn default_resolution(n: f64) -> f64 {
    0.01f64.min(1.0 / (10.0 * n))
}

/// Radius beyond which no point can improve on the value at the centre.
///
/// At ℓ¹ distance `ρ` the objective is at least
/// `−C(K_t + |y| + |z|) + (n − C)ρ`, which exceeds `f(t,y,z)` once
/// `ρ > (f(t,y,z) + C(K_t + |y| + |z|)) / (n − C)`. One unit of penalty
/// (`1/n`) is added as padding.
pub fn certified_radius(c: f64, n: f64, k_t: f64, y: f64, z_norm: f64, f_value: f64) -> Result<f64> {
    if !(n > c) {
        return Err(Error::EnvelopeIndex { n, c });
    }
    let reach = (f_value + c * (k_t + y.abs() + z_norm)) / (n - c);
    Ok(reach.max(0.0) + 1.0 / n)
}

#[derive(Debug, Clone, Copy)]
enum Coord {
    Y,
    Z(usize),
}

impl EnvelopeSpec {
    /// Uses the base's growth constant and `K_t = 1`.
    pub fn new(base: ScalarFunction, n: f64, kind: EnvelopeKind) -> Result<Self> {
        let c = base.growth_constant;
        if !(n > c) || !n.is_finite() {
            return Err(Error::EnvelopeIndex { n, c });
        }
        Ok(Self { base, n, kind, c, k: None })
    }

    /// Growth bound with a time-dependent `K_t` in place of 1.
    pub fn with_k(mut self, k: TimeFunction) -> Self {
        self.k = Some(k);
        self
    }

    pub fn base(&self) -> &ScalarFunction {
        &self.base
    }
    pub fn n(&self) -> f64 {
        self.n
    }
    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }
    pub fn growth_constant(&self) -> f64 {
        self.c
    }

    /// Same base and kind with another index.
    pub fn reindexed(&self, n: f64) -> Result<Self> {
        if !(n > self.c) {
            return Err(Error::EnvelopeIndex { n, c: self.c });
        }
        Ok(Self { n, ..self.clone() })
    }

    pub fn k_at(&self, t: f64) -> f64 {
        self.k.as_ref().map_or(1.0, |k| k.eval(t))
    }

    /// Worst-case lattice error `(n + C)·r`.
    pub fn error_bound(&self, resolution: f64) -> f64 {
        (self.n + self.c) * resolution
    }

    fn coords(&self, d: usize) -> Vec<Coord> {
        let mut out = Vec::new();
        if self.kind != EnvelopeKind::InfZOnly && self.base.depends_on_y {
            out.push(Coord::Y);
        }
        if self.base.depends_on_z {
            out.extend((0..d).map(Coord::Z));
        }
        out
    }

    /// Lower bound of the signed objective at distance `rho` from a centre
    /// where the signed base equals `centre`.
    fn objective_floor(&self, t: f64, y: f64, z_norm: f64, centre: f64, rho: f64) -> f64 {
        let sign = self.kind.sign();
        let mut floor = -self.c * (self.k_at(t) + y.abs() + z_norm) + (self.n - self.c) * rho;
        if let Some((lo, hi)) = self.base.range {
            floor = floor.max(if sign > 0.0 { lo } else { -hi } + self.n * rho);
        }
        if let Some(l) = self.base.lipschitz.filter(|&l| l <= self.n) {
            floor = floor.max(centre + (self.n - l) * rho);
        }
        floor
    }

    /// Certified ℓ∞ radius around `(y, z)`.
    pub fn certified_radius(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        let sign = self.kind.sign();
        let z_norm = norm(z);
        let centre = sign * self.base.eval(t, y, z);
        let growth_reach = (centre + self.c * (self.k_at(t) + y.abs() + z_norm)) / (self.n - self.c);
        let declared_reach = self
            .base
            .range
            .map(|(lo, hi)| (centre - if sign > 0.0 { lo } else { -hi }) / self.n);
        let mut reach = match declared_reach {
            Some(r) => growth_reach.min(r),
            None => growth_reach,
        };
        if self.base.lipschitz.is_some_and(|l| l < self.n) {
            reach = 0.0;
        }
        reach.max(0.0) + 1.0 / self.n
    }

    pub fn search_box(&self, t: f64, y: f64, z: &[f64]) -> SearchBox {
        SearchBox {
            center_y: y,
            center_z: z.to_vec(),
            radius: self.certified_radius(t, y, z),
        }
    }

    /// Envelope value; infallible once the spec is valid and `resolution > 0`.
    fn evaluate(&self, t: f64, y: f64, z: &[f64], resolution: f64) -> f64 {
        let sign = self.kind.sign();
        let coords = self.coords(z.len());
        let centre = sign * self.base.eval(t, y, z);
        if coords.is_empty() {
            return sign * centre;
        }
        let max_index = (self.certified_radius(t, y, z) / resolution).ceil() as i64;
        let z_norm = norm(z);
        let mut best = centre;
        let mut u = y;
        let mut v = z.to_vec();
        let mut idx = vec![0i64; coords.len()];
        for ring in 1..=max_index {
            let floor = self.objective_floor(t, y, z_norm, centre, ring as f64 * resolution);
            if floor > best + 1e-12 * (1.0 + best.abs()) {
                break;
            }
            for_each_shell_point(ring, &mut idx, 0, false, &mut |idx| {
                place(&coords, idx, y, z, resolution, &mut u, &mut v);
                let value = sign * self.base.eval(t, u, &v) + self.n * ((y - u).abs() + dist(z, &v));
                if value < best {
                    best = value;
                }
            });
        }
        sign * best
    }
}

#[inline]
fn place(coords: &[Coord], idx: &[i64], y: f64, z: &[f64], r: f64, u: &mut f64, v: &mut [f64]) {
    for (c, &i) in coords.iter().zip(idx) {
        match *c {
            Coord::Y => *u = y + i as f64 * r,
            Coord::Z(k) => v[k] = z[k] + i as f64 * r,
        }
    }
}

/// Visits every index vector with ℓ∞ norm exactly `ring`.
fn for_each_shell_point(ring: i64, idx: &mut [i64], pos: usize, on_shell: bool, visit: &mut dyn FnMut(&[i64])) {
    if pos == idx.len() {
        if on_shell {
            visit(idx);
        }
        return;
    }
    if pos + 1 == idx.len() && !on_shell {
        // the last coordinate must close the shell when nothing else did
        for i in [-ring, ring] {
            idx[pos] = i;
            visit(idx);
        }
        return;
    }
    for i in -ring..=ring {
        idx[pos] = i;
        for_each_shell_point(ring, idx, pos + 1, on_shell || i.abs() == ring, visit);
    }
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_resolution(resolution: f64) -> Result<()> {
    if resolution > 0.0 && resolution.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("regularize", "resolution", alloc::format!("{resolution}")))
    }
}

/// Envelope of `spec.base` at `(t, y, z)` on a lattice of spacing `resolution`.
pub fn envelope(spec: &EnvelopeSpec, t: f64, y: f64, z: &[f64], resolution: f64) -> Result<f64> {
    check_resolution(resolution)?;
    Ok(spec.evaluate(t, y, z, resolution))
}

/// Exhaustive oracle: evaluates the objective at every lattice point of the
/// certified box and takes the extremum, without pruning.
pub fn brute_force_envelope(spec: &EnvelopeSpec, t: f64, y: f64, z: &[f64], resolution: f64) -> Result<f64> {
    check_resolution(resolution)?;
    let n = spec.n();
    let coords = spec.coords(z.len());
    let k_max = (spec.certified_radius(t, y, z) / resolution).ceil() as i64;
    let side = (2 * k_max + 1) as usize;
    let total = side.pow(coords.len() as u32);
    let mut values = Vec::with_capacity(total);
    let mut v = z.to_vec();
    for flat in 0..total {
        let mut rest = flat;
        let mut u = y;
        for c in &coords {
            let i = (rest % side) as i64 - k_max;
            rest /= side;
            match *c {
                Coord::Y => u = y + i as f64 * resolution,
                Coord::Z(k) => v[k] = z[k] + i as f64 * resolution,
            }
        }
        let penalty = n * ((y - u).abs() + dist(z, &v));
        let value = match spec.kind() {
            EnvelopeKind::SupFull => spec.base().eval(t, u, &v) - penalty,
            _ => spec.base().eval(t, u, &v) + penalty,
        };
        values.push(value);
    }
    Ok(match spec.kind() {
        EnvelopeKind::SupFull => values.into_iter().fold(f64::NEG_INFINITY, f64::max),
        _ => values.into_iter().fold(f64::INFINITY, f64::min),
    })
}

/// The envelope as a driver, evaluated lazily at each query.
pub fn envelope_driver(spec: &EnvelopeSpec, resolution: f64) -> Result<ScalarFunction> {
    check_resolution(resolution)?;
    let inner = spec.clone();
    let base = spec.base();
    let mut f = ScalarFunction::new(
        spec.growth_constant(),
        alloc::format!("{}[n={}]({})", spec.kind().as_str(), spec.n(), base.description),
        move |t, y, z| inner.evaluate(t, y, z, resolution),
    );
    f.depends_on_y = base.depends_on_y;
    f.depends_on_z = base.depends_on_z;
    f.range = base.range;
    f.lipschitz = Some(base.lipschitz.map_or(spec.n(), |l| l.min(spec.n())));
    Ok(f)
}

/// A query point `(t, y, z)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryPoint {
    pub t: f64,
    pub y: f64,
    pub z: Vec<f64>,
}

impl QueryPoint {
    pub fn new(t: f64, y: f64, z: Vec<f64>) -> Self {
        Self { t, y, z }
    }

    fn flat(&self) -> Vec<f64> {
        let mut p = vec![self.t, self.y];
        p.extend_from_slice(&self.z);
        p
    }
}

/// Envelope values along the convergence schedule at a flagged discontinuity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscontinuityRecord {
    pub point: QueryPoint,
    pub base_value: f64,
    /// `(n, envelope value)`
    pub values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub kind: EnvelopeKind,
    pub n: f64,
    pub ordering: AssumptionReport,
    pub monotonicity: AssumptionReport,
    pub lipschitz: AssumptionReport,
    pub convergence: AssumptionReport,
    pub discontinuities: Vec<DiscontinuityRecord>,
    pub passed: bool,
}

/// Indices `{2, 4, 8, 16}·C` (with `C` floored at 1/2 so every index exceeds it).
pub fn convergence_schedule(c: f64) -> [f64; 4] {
    let base = c.max(0.5);
    [2.0 * base, 4.0 * base, 8.0 * base, 16.0 * base]
}

/// Checks the envelope laws at the given points, each up to the lattice
/// error of the envelopes involved:
///
/// 1. ordering `−C(K_t+|y|+|z|) ≤ f_n ≤ f` (resp. `f ≤ f^n ≤ C(K_t+|y|+|z|)`),
/// 2. monotonicity between `n` and `n + 1`,
/// 3. the `n`-Lipschitz bound on `pair_budget` pairs at equal `t`,
/// 4. `|f_n − f|` non-increasing along [`convergence_schedule`], reported
///    without judgement at declared discontinuities.
pub fn envelope_properties_check(spec: &EnvelopeSpec, points: &[QueryPoint], pair_budget: usize) -> Result<EnvelopeReport> {
    if pair_budget == 0 {
        return Err(Error::invalid("regularize", "pair budget", "at least one pair is required"));
    }
    if points.is_empty() {
        return Err(Error::invalid("regularize", "sample points", "no points given"));
    }
    let kind = spec.kind();
    let c = spec.growth_constant();
    let n = spec.n();
    let r = default_resolution(n);
    let err = spec.error_bound(r);
    let next = spec.reindexed(n + 1.0)?;
    let err_next = next.error_bound(default_resolution(n + 1.0));
    let schedule = convergence_schedule(c);
    let ladder: Vec<EnvelopeSpec> = schedule.iter().map(|&m| spec.reindexed(m)).collect::<Result<_>>()?;

    let mut ordering = AssumptionReport::new("ordering");
    let mut monotonicity = AssumptionReport::new("monotonicity_in_n");
    let mut lipschitz = AssumptionReport::new("n_lipschitz");
    let mut convergence = AssumptionReport::new("convergence");
    let mut discontinuities = Vec::new();

    for p in points {
        let flat = p.flat();
        let base = spec.base().eval(p.t, p.y, &p.z);
        let value = spec.evaluate(p.t, p.y, &p.z, r);
        let bound = c * (spec.k_at(p.t) + p.y.abs() + norm(&p.z));
        match kind {
            EnvelopeKind::SupFull => {
                ordering.test(&flat, base, value, err);
                ordering.test(&flat, value, bound, err);
            }
            _ => {
                ordering.test(&flat, -bound, value, err);
                ordering.test(&flat, value, base, err);
            }
        }

        let value_next = next.evaluate(p.t, p.y, &p.z, default_resolution(n + 1.0));
        match kind {
            EnvelopeKind::SupFull => monotonicity.test(&flat, value_next, value, err + err_next),
            _ => monotonicity.test(&flat, value, value_next, err + err_next),
        }

        let along: Vec<(f64, f64)> = ladder
            .iter()
            .map(|s| (s.n(), s.evaluate(p.t, p.y, &p.z, default_resolution(s.n()))))
            .collect();
        if spec.base().is_jump(p.t, p.y, &p.z) {
            discontinuities.push(DiscontinuityRecord {
                point: p.clone(),
                base_value: base,
                values: along,
            });
        } else {
            for (w, s) in along.windows(2).zip(&ladder) {
                let slack = s.error_bound(default_resolution(w[0].0))
                    + s.reindexed(w[1].0)?.error_bound(default_resolution(w[1].0));
                convergence.test(&flat, (w[1].1 - base).abs(), (w[0].1 - base).abs(), slack);
            }
        }
    }

    let mut rng = KeyedStream::new(0, 0x11f);
    for _ in 0..pair_budget {
        let a = &points[rng.index(points.len())];
        let b = &points[rng.index(points.len())];
        let q = match kind {
            EnvelopeKind::InfZOnly => QueryPoint::new(a.t, a.y, b.z.clone()),
            _ => QueryPoint::new(a.t, b.y, b.z.clone()),
        };
        let va = spec.evaluate(a.t, a.y, &a.z, r);
        let vq = spec.evaluate(q.t, q.y, &q.z, r);
        let distance = (a.y - q.y).abs() + dist(&a.z, &q.z);
        let mut flat = a.flat();
        flat.extend(q.flat());
        lipschitz.test(&flat, (va - vq).abs(), n * distance, 2.0 * err);
    }

    let passed = ordering.passed && monotonicity.passed && lipschitz.passed && convergence.passed;
    Ok(EnvelopeReport {
        kind,
        n,
        ordering,
        monotonicity,
        lipschitz,
        convergence,
        discontinuities,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heaviside() -> ScalarFunction {
        ScalarFunction::new(1.0, "1{y>=0}", |_, y, _| if y >= 0.0 { 1.0 } else { 0.0 })
            .independent_of_z()
            .with_range(0.0, 1.0)
            .with_jumps(|_, y, _| y == 0.0)
    }

    fn abs_y() -> ScalarFunction {
        ScalarFunction::new(1.0, "|y|", |_, y, _| y.abs()).independent_of_z()
    }

    #[test]
    fn radius_examples() {
        let r = certified_radius(1.0, 2.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(r <= 5.0 && r > 0.0);
        let big = certified_radius(1.0, 1e9, 1.0, 0.3, 0.2, 0.5).unwrap();
        assert!(big > 0.0 && big < 1e-8);
        assert!(matches!(certified_radius(1.0, 1.0, 1.0, 0.0, 0.0, 0.0), Err(Error::EnvelopeIndex { .. })));
        assert!(EnvelopeSpec::new(abs_y(), 1.0, EnvelopeKind::InfFull).is_err());
    }

    /// Widening the certified box (as brute force over a 3× larger box) never
    /// lowers the infimum.
    #[test]
    fn certified_radius_is_sufficient() {
        let f = ScalarFunction::new(1.0, "wiggle", |_, y, z| (3.0 * y).sin() * (1.0 + y.abs()).min(2.0) - 0.5 * z[0].abs());
        let spec = EnvelopeSpec::new(f.clone(), 2.0, EnvelopeKind::InfFull).unwrap();
        let r = 0.02;
        for &(y, z) in &[(0.0, 0.0), (1.5, -0.5), (-2.0, 1.0)] {
            let value = envelope(&spec, 0.0, y, &[z], r).unwrap();
            let k = (3.0 * spec.certified_radius(0.0, y, &[z]) / r).ceil() as i64;
            let mut wide = f64::INFINITY;
            for i in -k..=k {
                for j in -k..=k {
                    let u = y + i as f64 * r;
                    let v = z + j as f64 * r;
                    wide = wide.min(f.eval(0.0, u, &[v]) + 2.0 * ((y - u).abs() + (z - v).abs()));
                }
            }
            assert_eq!(value, wide, "at ({y}, {z})");
        }
    }

    #[test]
    fn lipschitz_base_is_a_fixed_point() {
        let spec = EnvelopeSpec::new(abs_y(), 2.0, EnvelopeKind::InfFull).unwrap();
        let sup = EnvelopeSpec::new(abs_y(), 2.0, EnvelopeKind::SupFull).unwrap();
        for i in -20..=20 {
            let y = i as f64 * 0.137;
            assert_eq!(envelope(&spec, 0.5, y, &[0.3], 0.01).unwrap(), y.abs());
            assert_eq!(envelope(&sup, 0.5, y, &[0.3], 0.01).unwrap(), y.abs());
        }
    }

    #[test]
    fn heaviside_envelope_values() {
        let spec = EnvelopeSpec::new(heaviside(), 4.0, EnvelopeKind::InfFull).unwrap();
        let r = 1e-4;
        let v = envelope(&spec, 0.0, 0.1, &[0.0], r).unwrap();
        assert!((v - 0.4).abs() <= spec.error_bound(r), "{v}");
        assert_eq!(envelope(&spec, 0.0, -1.0, &[0.0], r).unwrap(), 0.0);
        let at_jump = envelope(&spec, 0.0, 0.0, &[0.0], r).unwrap();
        assert!(at_jump <= spec.error_bound(r) && at_jump > 0.0);
    }

    /// Analytic form `min(1, max(0, n·y))` checked against a fine 1-D scan.
    #[test]
    fn heaviside_matches_fine_scan() {
        let n = 4.0;
        let spec = EnvelopeSpec::new(heaviside(), n, EnvelopeKind::InfFull).unwrap();
        for i in -30..=30 {
            let y = i as f64 / 40.0 + 0.003;
            let scan = (-40_000..=40_000)
                .map(|k| {
                    let u = y + k as f64 * 1e-4;
                    (if u >= 0.0 { 1.0 } else { 0.0 }) + n * (y - u).abs()
                })
                .fold(f64::INFINITY, f64::min);
            let analytic = (n * y).clamp(0.0, 1.0);
            assert!((scan - analytic).abs() <= n * 1e-4 + 1e-12);
            let value = envelope(&spec, 0.0, y, &[0.0], 0.01).unwrap();
            assert!((value - analytic).abs() <= spec.error_bound(0.01), "y={y}: {value} vs {analytic}");
        }
    }

    #[test]
    fn pruned_search_equals_brute_force() {
        let bases = [
            heaviside(),
            abs_y(),
            ScalarFunction::new(2.5, "sqrt", |t, y, z| {
                4.0 * t * if y >= 0.0 { 1.0 } else { -1.0 } * y.abs().sqrt() + z[0].max(0.0).sqrt()
            }),
        ];
        for base in bases {
            for kind in [EnvelopeKind::InfFull, EnvelopeKind::SupFull, EnvelopeKind::InfZOnly] {
                let spec = EnvelopeSpec::new(base.clone(), 8.0, kind).unwrap();
                for &(t, y, z) in &[(0.5, 0.25, 0.0), (0.1, -0.7, 0.4), (0.9, 1.3, -1.1)] {
                    let a = envelope(&spec, t, y, &[z], 0.02).unwrap();
                    let b = brute_force_envelope(&spec, t, y, &[z], 0.02).unwrap();
                    assert_eq!(a.to_bits(), b.to_bits(), "{} {:?} at ({t},{y},{z})", base.description, kind);
                }
            }
        }
    }

    #[test]
    fn duality_is_exact() {
        let f = ScalarFunction::new(1.0, "mixed", |t, y, z| (y - t).abs().sqrt().min(1.0 + y.abs()) - 0.3 * z[0]);
        let inf = EnvelopeSpec::new(f.negated(), 3.0, EnvelopeKind::InfFull).unwrap();
        let sup = EnvelopeSpec::new(f, 3.0, EnvelopeKind::SupFull).unwrap();
        for i in 0..25 {
            let (t, y, z) = (i as f64 / 25.0, -1.0 + i as f64 * 0.09, 0.5 - i as f64 * 0.04);
            let a = envelope(&sup, t, y, &[z], 0.01).unwrap();
            let b = envelope(&inf, t, y, &[z], 0.01).unwrap();
            assert_eq!(a.to_bits(), (-b).to_bits());
        }
    }

    #[test]
    fn nonunique_driver_envelope_sits_below() {
        let f = ScalarFunction::new(2.5, "sqrt", |t, y, z| {
            4.0 * t * if y >= 0.0 { 1.0 } else { -1.0 } * y.abs().sqrt() + z[0].max(0.0).sqrt()
        });
        let spec = EnvelopeSpec::new(f, 8.0, EnvelopeKind::InfFull).unwrap();
        let v = envelope(&spec, 0.5, 0.25, &[0.0], default_resolution(8.0)).unwrap();
        let brute = brute_force_envelope(&spec, 0.5, 0.25, &[0.0], default_resolution(8.0)).unwrap();
        assert_eq!(v, brute);
        assert!(v <= 1.0);
    }

    #[test]
    fn two_dimensional_z() {
        let f = ScalarFunction::new(1.0, "|z1| - |z2|", |_, _, z| z[0].abs() - z[1].abs()).independent_of_y();
        let spec = EnvelopeSpec::new(f, 2.0, EnvelopeKind::InfFull).unwrap();
        let a = envelope(&spec, 0.0, 0.0, &[0.2, -0.3], 0.05).unwrap();
        let b = brute_force_envelope(&spec, 0.0, 0.0, &[0.2, -0.3], 0.05).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn properties_hold_for_lipschitz_and_heaviside() {
        let mut pts = Vec::new();
        let mut rng = KeyedStream::new(5, 0);
        for _ in 0..40 {
            pts.push(QueryPoint::new(rng.uniform(0.0, 1.0), rng.uniform(-2.0, 2.0), vec![rng.uniform(-2.0, 2.0)]));
        }
        pts.push(QueryPoint::new(0.3, 0.0, vec![0.0]));
        for base in [abs_y(), heaviside()] {
            for kind in [EnvelopeKind::InfFull, EnvelopeKind::SupFull] {
                let spec = EnvelopeSpec::new(base.clone(), 2.0, kind).unwrap();
                let report = envelope_properties_check(&spec, &pts, 40).unwrap();
                assert!(report.passed, "{} {:?}: {:?}", base.description, kind, report);
            }
        }
        let spec = EnvelopeSpec::new(heaviside(), 2.0, EnvelopeKind::InfFull).unwrap();
        let report = envelope_properties_check(&spec, &pts, 10).unwrap();
        assert_eq!(report.discontinuities.len(), 1);
        for &(n, v) in &report.discontinuities[0].values {
            assert!(v <= (n + 1.0) * default_resolution(n));
        }
    }

    #[test]
    fn shell_enumeration_counts() {
        for dims in 1..=3usize {
            for ring in 1..=4i64 {
                let mut idx = vec![0; dims];
                let mut count = 0usize;
                for_each_shell_point(ring, &mut idx, 0, false, &mut |p| {
                    assert_eq!(p.iter().map(|x| x.abs()).max().unwrap(), ring);
                    count += 1;
                });
                let side = (2 * ring + 1) as usize;
                let inner = (2 * ring - 1) as usize;
                assert_eq!(count, side.pow(dims as u32) - inner.pow(dims as u32));
            }
        }
    }
}
