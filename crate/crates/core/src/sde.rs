//! Euler-Maruyama simulation of the interacting Brownian systems.
//!
//! Eleven drift laws are covered: the pinned (finite-horizon) models of
//! types A (with coupling parameter beta), B, C, D built from the
//! logarithmic derivative of theta_1,
//!
//! ```text
//! b^B_j = A(x_j)            + sum_{k != j} [A(x_j - x_k) + A(x_j + x_k)],
//! b^C_j = 2 A_C(2 x_j)      + sum_{k != j} [...],
//! b^D_j =                     sum_{k != j} [...],
//! ```
//!
//! their temporally homogeneous limits with cotangent interactions, and
//! the scale-free limits with reciprocal interactions (the classical
//! interacting Brownian motions on the line and half line).
//!
//! The integrator is fixed-step Euler-Maruyama with three safeguards:
//! reflecting walls are enforced by folding the proposed position back
//! into the domain; a step that breaks the strict ordering or leaves an
//! open domain is treated as overshoot and retried with half the step
//! (fresh noise, at most 20 halvings, then the path is flagged and
//! frozen); and near a finite pinning horizon the step is capped at a
//! fraction of the time remaining, since the drift there grows like
//! (v - x)/(t* - t). Noise comes from one counter-RNG stream per path,
//! so an ensemble is byte-identical for any number of worker threads.

use crate::error::{Error, Result};
use crate::family::Family;
use crate::modular::ProcessClock;
use crate::rng::CounterRng;
use crate::theta;

use std::f64::consts::PI;

/// Fraction of min pairwise gap^2 that `dt` must stay below.
const DT_GUARD_FRACTION: f64 = 0.01;
/// Near a finite horizon the step is capped at this fraction of t* - t.
const HORIZON_STEP_FRACTION: f64 = 0.05;
/// Maximum halvings of a rejected step before the path is flagged.
const MAX_HALVINGS: u32 = 20;
/// Ensemble error threshold: more than this fraction flagged.
const MAX_FLAGGED_FRACTION: f64 = 0.01;
/// Pole guard for cotangent / reciprocal drifts, in argument units.
const DRIFT_POLE_GUARD: f64 = 1e-12;

/// Drift law of the simulated system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// Pinned type-A system on the line with coupling beta.
    EllipticA {
        beta: f64,
    },
    EllipticB,
    EllipticC,
    EllipticD,
    TrigA,
    TrigB,
    TrigC,
    TrigD,
    RationalA,
    RationalC,
    RationalD,
}

/// Wall treatment applied to a proposed position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WallRule {
    /// Whole line: ordering is the only constraint.
    Free,
    /// Reflect at pi r; reject at or below 0 (drift repels from 0).
    FoldUpper,
    /// Open interval (0, pi r): reject outside, no folding.
    OpenInterval,
    /// Reflect at 0 and pi r.
    FoldBoth,
    /// Half line, repelling origin: reject at or below 0.
    OpenHalfLine,
    /// Half line with reflection at 0.
    FoldOrigin,
}

impl Model {
    pub fn is_elliptic(&self) -> bool {
        matches!(
            self,
            Model::EllipticA { .. } | Model::EllipticB | Model::EllipticC | Model::EllipticD
        )
    }

    /// Family whose constants the drift uses.
    pub fn family(&self) -> Family {
        match self {
            Model::EllipticA { .. } | Model::TrigA | Model::RationalA => Family::A,
            Model::EllipticB | Model::TrigB => Family::B,
            Model::EllipticC | Model::TrigC | Model::RationalC => Family::C,
            Model::EllipticD | Model::TrigD | Model::RationalD => Family::D,
        }
    }

    fn wall_rule(&self) -> WallRule {
        match self {
            Model::EllipticA { .. } | Model::TrigA | Model::RationalA => WallRule::Free,
            Model::EllipticB | Model::TrigB => WallRule::FoldUpper,
            Model::EllipticC | Model::TrigC => WallRule::OpenInterval,
            Model::EllipticD | Model::TrigD => WallRule::FoldBoth,
            Model::RationalC => WallRule::OpenHalfLine,
            Model::RationalD => WallRule::FoldOrigin,
        }
    }
}

/// cot with a pole guard: the argument must stay away from multiples
/// of pi by more than `DRIFT_POLE_GUARD`.
fn cot_guarded(theta: f64) -> Result<f64> {
    let dist = (theta - (theta / PI).round() * PI).abs();
    if dist < DRIFT_POLE_GUARD {
        return Err(Error::PoleProximity {
            distance: dist,
            guard: DRIFT_POLE_GUARD,
        });
    }
    Ok(theta.cos() / theta.sin())
}

/// tan with the same guard against its poles at pi/2 + k pi.
fn tan_guarded(theta: f64) -> Result<f64> {
    let shifted = theta - PI / 2.0;
    let dist = (shifted - (shifted / PI).round() * PI).abs();
    if dist < DRIFT_POLE_GUARD {
        return Err(Error::PoleProximity {
            distance: dist,
            guard: DRIFT_POLE_GUARD,
        });
    }
    Ok(theta.tan())
}

/// 1/x with a pole guard at the origin.
fn recip_guarded(x: f64) -> Result<f64> {
    if x.abs() < DRIFT_POLE_GUARD {
        return Err(Error::PoleProximity {
            distance: x.abs(),
            guard: DRIFT_POLE_GUARD,
        });
    }
    Ok(1.0 / x)
}

/// Drift vector of the given model at time t and configuration x.
///
/// The clock supplies the horizon t* (finite models) and the length
/// scale r; finite-horizon drifts read the time remaining t* - t,
/// the homogeneous ones ignore t entirely.
pub fn drift(model: Model, clock: &ProcessClock, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let r = clock.r();
    let mut b = vec![0.0; n];
    match model {
        Model::EllipticA { beta } => {
            let cal_n = Family::A.cal_n(n) as f64;
            clock.validate_time(t)?;
            let t_rem = clock.t_star() - t;
            let total: f64 = x.iter().sum();
            let collective =
                0.5 * beta * theta::a_func(cal_n, t_rem, total - Family::kappa(n, r), r)?;
            b.fill(collective);
            // The interaction is odd in x_j - x_k, so one evaluation per
            // unordered pair serves both particles with opposite signs.
            for j in 0..n {
                for k in (j + 1)..n {
                    let d = 0.5 * beta * theta::a_func(cal_n, t_rem, x[j] - x[k], r)?;
                    b[j] += d;
                    b[k] -= d;
                }
            }
        }
        Model::EllipticB | Model::EllipticC | Model::EllipticD => {
            let family = model.family();
            let cal_n = family.cal_n(n) as f64;
            clock.validate_time(t)?;
            let t_rem = clock.t_star() - t;
            for j in 0..n {
                b[j] = match family {
                    Family::B => theta::a_func(cal_n, t_rem, x[j], r)?,
                    Family::C => 2.0 * theta::a_func(cal_n, t_rem, 2.0 * x[j], r)?,
                    _ => 0.0,
                };
            }
            for j in 0..n {
                for k in (j + 1)..n {
                    let d = theta::a_func(cal_n, t_rem, x[j] - x[k], r)?;
                    let s = theta::a_func(cal_n, t_rem, x[j] + x[k], r)?;
                    b[j] += d + s;
                    b[k] += s - d;
                }
            }
        }
        Model::TrigA => {
            let total: f64 = x.iter().sum();
            let collective = -tan_guarded(total / (2.0 * r))? / (2.0 * r);
            b.fill(collective);
            for j in 0..n {
                for k in (j + 1)..n {
                    let d = cot_guarded((x[j] - x[k]) / (2.0 * r))? / (2.0 * r);
                    b[j] += d;
                    b[k] -= d;
                }
            }
        }
        Model::TrigB | Model::TrigC | Model::TrigD => {
            for j in 0..n {
                b[j] = match model {
                    Model::TrigB => cot_guarded(x[j] / (2.0 * r))? / (2.0 * r),
                    Model::TrigC => cot_guarded(x[j] / r)? / r,
                    _ => 0.0,
                };
            }
            for j in 0..n {
                for k in (j + 1)..n {
                    let d = cot_guarded((x[j] - x[k]) / (2.0 * r))? / (2.0 * r);
                    let s = cot_guarded((x[j] + x[k]) / (2.0 * r))? / (2.0 * r);
                    b[j] += d + s;
                    b[k] += s - d;
                }
            }
        }
        Model::RationalA | Model::RationalC | Model::RationalD => {
            for j in 0..n {
                b[j] = match model {
                    Model::RationalC => recip_guarded(x[j])?,
                    _ => 0.0,
                };
            }
            for j in 0..n {
                for k in (j + 1)..n {
                    let d = recip_guarded(x[j] - x[k])?;
                    b[j] += d;
                    b[k] -= d;
                    if model != Model::RationalA {
                        let s = recip_guarded(x[j] + x[k])?;
                        b[j] += s;
                        b[k] += s;
                    }
                }
            }
        }
    }
    Ok(b)
}

/// Full simulation request: drift law, initial data, grid, and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeSpec {
    pub model: Model,
    pub u: Vec<f64>,
    pub clock: ProcessClock,
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Record every k-th grid time (the final time is always kept).
    pub record_stride: usize,
    /// Set to accept a dt above the pairwise-gap guard.
    pub relax_dt_guard: bool,
}

impl SdeSpec {
    pub fn new(
        model: Model,
        u: Vec<f64>,
        clock: ProcessClock,
        dt: f64,
        t_end: f64,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            model,
            u,
            clock,
            dt,
            t_end,
            n_paths,
            seed,
            record_stride: 1,
            relax_dt_guard: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride.max(1);
        self
    }

    pub fn with_relaxed_dt_guard(mut self) -> Self {
        self.relax_dt_guard = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.u.len();
        if n == 0 || self.n_paths == 0 {
            return Err(Error::InvalidArgument(
                "need at least one particle and one path".into(),
            ));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dt = {} must be > 0",
                self.dt
            )));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_end = {} must be finite and > 0",
                self.t_end
            )));
        }
        for w in self.u.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::DomainViolation(format!(
                    "initial configuration must be strictly increasing, got {:?}",
                    self.u
                )));
            }
        }
        let r = self.clock.r();
        let in_domain = match self.model.wall_rule() {
            WallRule::Free => true,
            WallRule::FoldUpper | WallRule::OpenInterval | WallRule::FoldBoth => {
                self.u.iter().all(|&v| v > 0.0 && v < PI * r)
            }
            WallRule::OpenHalfLine | WallRule::FoldOrigin => self.u.iter().all(|&v| v > 0.0),
        };
        if !in_domain {
            return Err(Error::DomainViolation(format!(
                "initial configuration {:?} outside the model domain",
                self.u
            )));
        }
        if self.model.is_elliptic() {
            if !self.clock.is_elliptic() {
                return Err(Error::DomainViolation(
                    "finite-horizon model needs a finite t*".into(),
                ));
            }
            if self.t_end >= self.clock.t_star() {
                return Err(Error::DomainViolation(format!(
                    "t_end = {} must stay below t* = {}",
                    self.t_end,
                    self.clock.t_star()
                )));
            }
        }
        if !self.relax_dt_guard && n > 1 {
            let min_gap = self
                .u
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            let guard = DT_GUARD_FRACTION * min_gap * min_gap;
            if self.dt >= guard {
                return Err(Error::InvalidArgument(format!(
                    "dt = {} exceeds the step guard {guard:.3e} (0.01 x min gap^2); \
                     lower dt or relax the guard explicitly",
                    self.dt
                )));
            }
        }
        Ok(())
    }

    /// Deterministic 64-bit digest of all spec fields (FNV-1a over a
    /// canonical byte encoding); stored in binary frame headers.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        let model_tag: u64 = match self.model {
            Model::EllipticA { .. } => 0,
            Model::EllipticB => 1,
            Model::EllipticC => 2,
            Model::EllipticD => 3,
            Model::TrigA => 4,
            Model::TrigB => 5,
            Model::TrigC => 6,
            Model::TrigD => 7,
            Model::RationalA => 8,
            Model::RationalC => 9,
            Model::RationalD => 10,
        };
        eat(&model_tag.to_le_bytes());
        if let Model::EllipticA { beta } = self.model {
            eat(&beta.to_le_bytes());
        }
        for &v in &self.u {
            eat(&v.to_le_bytes());
        }
        eat(&self.clock.t_star().to_le_bytes());
        eat(&self.clock.r().to_le_bytes());
        eat(&self.dt.to_le_bytes());
        eat(&self.t_end.to_le_bytes());
        eat(&(self.n_paths as u64).to_le_bytes());
        eat(&self.seed.to_le_bytes());
        eat(&(self.record_stride as u64).to_le_bytes());
        h
    }
}

/// Why a path was flagged or an event logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// 20 halvings did not produce an admissible step.
    StepCollapse,
    /// The drift could not be evaluated at the current state.
    DriftSingularity,
}

/// One logged incident on one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    pub path: usize,
    /// Grid index of the step being attempted.
    pub step: usize,
    pub t: f64,
    pub kind: EventKind,
}

/// Simulated ensemble: recorded positions plus the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    /// Recorded times, ascending, ending at t_end.
    pub times: Vec<f64>,
    /// Row-major positions: [path][record][coordinate].
    pub paths: Vec<f64>,
    pub n_paths: usize,
    pub n: usize,
    pub events: Vec<PathEvent>,
    /// Paths frozen after an unrecoverable step (ascending indices).
    pub flagged: Vec<usize>,
    pub seed: u64,
}

impl PathEnsemble {
    /// Positions of one path at one recorded time.
    pub fn positions(&self, path: usize, record: usize) -> &[f64] {
        let base = (path * self.times.len() + record) * self.n;
        &self.paths[base..base + self.n]
    }

    /// Index of a recorded time, within absolute tolerance 1e-12.
    pub fn record_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&g| (g - t).abs() < 1e-12)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("t = {t} is not one of the recorded times"))
            })
    }

    /// Binary frame: magic, version, spec digest, seed, dimensions,
    /// then times, positions, flags, and events, all little-endian.
    pub fn to_binary_frame(&self, spec: &SdeSpec) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.paths.len());
        out.extend_from_slice(b"EDYN");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&spec.digest().to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.n_paths as u64).to_le_bytes());
        out.extend_from_slice(&(self.times.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&(self.flagged.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.events.len() as u64).to_le_bytes());
        for &t in &self.times {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for &x in &self.paths {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for &p in &self.flagged {
            out.extend_from_slice(&(p as u64).to_le_bytes());
        }
        for e in &self.events {
            out.extend_from_slice(&(e.path as u64).to_le_bytes());
            out.extend_from_slice(&(e.step as u64).to_le_bytes());
            out.extend_from_slice(&e.t.to_le_bytes());
            let kind: u8 = match e.kind {
                EventKind::StepCollapse => 0,
                EventKind::DriftSingularity => 1,
            };
            out.push(kind);
        }
        out
    }

    /// CSV rows `path,t,x_1,...,x_N`; intended for small ensembles.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("path,t");
        for j in 1..=self.n {
            s.push_str(&format!(",x{j}"));
        }
        s.push('\n');
        for p in 0..self.n_paths {
            for (i, &t) in self.times.iter().enumerate() {
                s.push_str(&format!("{p},{t}"));
                for &x in self.positions(p, i) {
                    s.push_str(&format!(",{x}"));
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Histogram of particle positions with per-bin MC standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Bin edges, length bins + 1.
    pub edges: Vec<f64>,
    /// Density estimate per bin; integrates to the particle number.
    pub density: Vec<f64>,
    /// Standard error of each density value.
    pub se: Vec<f64>,
}

/// Histograms all coordinates of all paths at a recorded time; the
/// density integrates to N exactly (counting normalization).
pub fn empirical_density(
    ens: &PathEnsemble,
    t: f64,
    bins: usize,
    range: (f64, f64),
) -> Result<Histogram> {
    if bins == 0 || !(range.1 > range.0) {
        return Err(Error::InvalidArgument(
            "need at least one bin and a nonempty range".into(),
        ));
    }
    let record = ens.record_index(t)?;
    let width = (range.1 - range.0) / bins as f64;
    let mut count = vec![0.0f64; bins];
    let mut count_sq = vec![0.0f64; bins];
    let mut per_path = vec![0.0f64; bins];
    for p in 0..ens.n_paths {
        per_path.fill(0.0);
        for &x in ens.positions(p, record) {
            if x >= range.0 && x < range.1 {
                let b = ((x - range.0) / width) as usize;
                per_path[b.min(bins - 1)] += 1.0;
            } else if x == range.1 {
                per_path[bins - 1] += 1.0;
            }
        }
        for (b, &c) in per_path.iter().enumerate() {
            count[b] += c;
            count_sq[b] += c * c;
        }
    }
    let m = ens.n_paths as f64;
    let mut edges = Vec::with_capacity(bins + 1);
    for b in 0..=bins {
        edges.push(range.0 + width * b as f64);
    }
    let mut density = Vec::with_capacity(bins);
    let mut se = Vec::with_capacity(bins);
    for b in 0..bins {
        let mean = count[b] / m;
        let var = (count_sq[b] / m - mean * mean).max(0.0) / (m - 1.0).max(1.0);
        density.push(mean / width);
        se.push(var.sqrt() / width);
    }
    Ok(Histogram { edges, density, se })
}

/// Folds a proposed position back into the domain by reflection.
/// Returns None when the rule rejects instead of folding.
fn apply_walls(rule: WallRule, x: f64, r: f64) -> Option<f64> {
    let top = PI * r;
    match rule {
        WallRule::Free => Some(x),
        WallRule::FoldUpper => {
            let mut y = x;
            if y > top {
                y = 2.0 * top - y;
            }
            // A double overshoot cannot be fixed by one mirror.
            (y > 0.0 && y <= top).then_some(y)
        }
        WallRule::OpenInterval => (x > 0.0 && x < top).then_some(x),
        WallRule::FoldBoth => {
            // Reflect into [0, pi r]: triangular fold of period 2 pi r.
            let period = 2.0 * top;
            let mut y = x.rem_euclid(period);
            if y > top {
                y = period - y;
            }
            Some(y)
        }
        WallRule::OpenHalfLine => (x > 0.0).then_some(x),
        WallRule::FoldOrigin => Some(x.abs()),
    }
}

/// Strictly increasing, all finite.
fn is_ordered(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite()) && x.windows(2).all(|w| w[0] < w[1])
}

pub(crate) fn default_workers() -> usize {
    if let Ok(v) = std::env::var("ELLIPTIC_DYSON_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Simulates the ensemble with the default worker count (the
/// `ELLIPTIC_DYSON_THREADS` variable caps it). Output is identical
/// for every worker count.
pub fn simulate(spec: &SdeSpec) -> Result<PathEnsemble> {
    simulate_with_workers(spec, default_workers())
}

/// One path's outcome: recorded positions, events, flagged status.
struct PathRun {
    records: Vec<f64>,
    events: Vec<PathEvent>,
    flagged: bool,
}

/// Simulates with an explicit worker count; the partitioning never
/// affects the result because each path owns RNG stream `path index`.
pub fn simulate_with_workers(spec: &SdeSpec, workers: usize) -> Result<PathEnsemble> {
    spec.validate()?;
    let n = spec.u.len();
    let n_steps = (spec.t_end / spec.dt - 1e-9).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n_steps)
        .map(|i| (i as f64 * spec.dt).min(spec.t_end))
        .collect();
    let mut record_idx: Vec<usize> = (0..=n_steps).step_by(spec.record_stride.max(1)).collect();
    if *record_idx.last().unwrap() != n_steps {
        record_idx.push(n_steps);
    }
    let times: Vec<f64> = record_idx.iter().map(|&i| grid[i]).collect();

    let workers = workers.clamp(1, spec.n_paths.max(1));
    let chunk = spec.n_paths.div_ceil(workers);
    let mut runs: Vec<Option<PathRun>> = Vec::with_capacity(spec.n_paths);
    runs.resize_with(spec.n_paths, || None);

    std::thread::scope(|scope| {
        let grid = &grid;
        let record_idx = &record_idx;
        let mut rest: &mut [Option<PathRun>] = &mut runs;
        for w in 0..workers {
            let lo = w * chunk;
            if lo >= spec.n_paths {
                break;
            }
            let hi = (lo + chunk).min(spec.n_paths);
            let (mine, tail) = rest.split_at_mut(hi - lo);
            rest = tail;
            scope.spawn(move || {
                for (slot, path) in mine.iter_mut().zip(lo..hi) {
                    *slot = Some(run_path(spec, path, grid, record_idx));
                }
            });
        }
    });

    let mut paths = Vec::with_capacity(spec.n_paths * times.len() * n);
    let mut events = Vec::new();
    let mut flagged = Vec::new();
    for (p, run) in runs.into_iter().enumerate() {
        let run = run.expect("every path slot is filled by a worker");
        paths.extend_from_slice(&run.records);
        events.extend_from_slice(&run.events);
        if run.flagged {
            flagged.push(p);
        }
    }
    if flagged.len() as f64 > MAX_FLAGGED_FRACTION * spec.n_paths as f64 {
        return Err(Error::EnsembleDegraded {
            flagged: flagged.len(),
            total: spec.n_paths,
        });
    }
    Ok(PathEnsemble {
        times,
        paths,
        n_paths: spec.n_paths,
        n,
        events,
        flagged,
        seed: spec.seed,
    })
}

fn run_path(spec: &SdeSpec, path: usize, grid: &[f64], record_idx: &[usize]) -> PathRun {
    let n = spec.u.len();
    let rule = spec.model.wall_rule();
    let r = spec.clock.r();
    let mut rng = CounterRng::stream(spec.seed, path as u64);
    let mut x = spec.u.clone();
    let mut proposal = vec![0.0; n];
    let mut records = Vec::with_capacity(record_idx.len() * n);
    let mut events = Vec::new();
    let mut flagged = false;
    let mut next_record = 0;

    if record_idx.first() == Some(&0) {
        records.extend_from_slice(&x);
        next_record = 1;
    }

    for step in 1..grid.len() {
        let (t0, t1) = (grid[step - 1], grid[step]);
        if !flagged {
            let mut t = t0;
            'advance: while t < t1 - 1e-15 * t1.max(1.0) {
                let mut h = t1 - t;
                if spec.model.is_elliptic() {
                    h = h.min(HORIZON_STEP_FRACTION * (spec.clock.t_star() - t));
                }
                let b = match drift(spec.model, &spec.clock, t, &x) {
                    Ok(b) => b,
                    Err(_) => {
                        events.push(PathEvent {
                            path,
                            step,
                            t,
                            kind: EventKind::DriftSingularity,
                        });
                        flagged = true;
                        break 'advance;
                    }
                };
                let mut halvings = 0;
                loop {
                    let sqrt_h = h.sqrt();
                    let mut ok = true;
                    for j in 0..n {
                        let got = x[j] + b[j] * h + sqrt_h * rng.normal();
                        match apply_walls(rule, got, r) {
                            Some(y) => proposal[j] = y,
                            None => {
                                ok = false;
                                // Keep drawing so the noise usage per
                                // attempt stays at N words.
                                proposal[j] = f64::NAN;
                            }
                        }
                    }
                    if ok && is_ordered(&proposal) {
                        x.copy_from_slice(&proposal);
                        t += h;
                        break;
                    }
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        events.push(PathEvent {
                            path,
                            step,
                            t,
                            kind: EventKind::StepCollapse,
                        });
                        flagged = true;
                        break 'advance;
                    }
                    h *= 0.5;
                }
            }
        }
        // A flagged path stays frozen at its last admissible state, so
        // the records array keeps its shape.
        if next_record < record_idx.len() && record_idx[next_record] == step {
            records.extend_from_slice(&x);
            next_record += 1;
        }
    }

    PathRun {
        records,
        events,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn clock(t_star: f64) -> ProcessClock {
        ProcessClock::new(t_star, 1.0).unwrap()
    }

    #[test]
    fn trig_c_single_particle_drift_is_scaled_cotangent() {
        let c = clock(f64::INFINITY);
        for x in [0.4, 1.1, 2.9] {
            let b = drift(Model::TrigC, &c, 0.0, &[x]).unwrap();
            assert_relative_eq!(b[0], (x).cos() / (x).sin(), max_relative = 1e-14);
        }
        // With r != 1 the prefactor is 1/r.
        let c2 = ProcessClock::new(f64::INFINITY, 2.5).unwrap();
        let b = drift(Model::TrigC, &c2, 0.0, &[1.3]).unwrap();
        let theta: f64 = 1.3 / 2.5;
        assert_relative_eq!(b[0], theta.cos() / theta.sin() / 2.5);
    }

    #[test]
    fn pinned_pair_drift_is_antisymmetric_under_reversal() {
        let c = clock(1.0);
        let x = [0.7, 1.4, 2.2];
        let rev: Vec<f64> = x.iter().rev().map(|&v| PI - v).collect();
        let b = drift(Model::EllipticD, &c, 0.2, &x).unwrap();
        let b_rev = drift(Model::EllipticD, &c, 0.2, &rev).unwrap();
        for j in 0..3 {
            assert_relative_eq!(b_rev[j], -b[2 - j], max_relative = 1e-11, epsilon = 1e-13);
        }
    }

    #[test]
    fn pinned_drifts_approach_homogeneous_drifts_at_long_horizon() {
        let c = clock(1e6);
        let c_inf = clock(f64::INFINITY);
        let x = [0.6, 1.3, 2.3];
        for (ell, trig) in [
            (Model::EllipticA { beta: 2.0 }, Model::TrigA),
            (Model::EllipticB, Model::TrigB),
            (Model::EllipticC, Model::TrigC),
            (Model::EllipticD, Model::TrigD),
        ] {
            let be = drift(ell, &c, 0.0, &x).unwrap();
            let bt = drift(trig, &c_inf, 0.0, &x).unwrap();
            for j in 0..3 {
                assert!(
                    (be[j] - bt[j]).abs() < 1e-6,
                    "{ell:?} vs {trig:?} at j={j}: {} vs {}",
                    be[j],
                    bt[j]
                );
            }
        }
    }

    #[test]
    fn homogeneous_drifts_approach_reciprocal_drifts_at_large_radius() {
        let big = ProcessClock::new(f64::INFINITY, 1e4).unwrap();
        let x = [0.6, 1.3, 2.3];
        for (trig, rat) in [
            (Model::TrigA, Model::RationalA),
            (Model::TrigB, Model::RationalC),
            (Model::TrigC, Model::RationalC),
            (Model::TrigD, Model::RationalD),
        ] {
            let bt = drift(trig, &big, 0.0, &x).unwrap();
            let br = drift(rat, &big, 0.0, &x).unwrap();
            for j in 0..3 {
                assert!(
                    (bt[j] - br[j]).abs() < 1e-6,
                    "{trig:?} vs {rat:?} at j={j}: {} vs {}",
                    bt[j],
                    br[j]
                );
            }
        }
    }

    #[test]
    fn drift_reports_pole_proximity() {
        let c = clock(f64::INFINITY);
        assert!(matches!(
            drift(Model::TrigD, &c, 0.0, &[1.0, 1.0 + 1e-14]),
            Err(Error::PoleProximity { .. })
        ));
        assert!(matches!(
            drift(Model::RationalC, &c, 0.0, &[1e-14]),
            Err(Error::PoleProximity { .. })
        ));
    }

    #[test]
    fn spec_guard_rejects_coarse_steps_unless_relaxed() {
        let c = clock(f64::INFINITY);
        let err = SdeSpec::new(Model::TrigD, vec![1.0, 1.05], c, 1e-3, 0.5, 10, 1);
        assert!(err.is_err());
        let ok = SdeSpec::new(Model::TrigD, vec![1.0, 1.05], c, 2e-5, 0.5, 10, 1);
        assert!(ok.is_ok());
        let relaxed = SdeSpec {
            model: Model::TrigD,
            u: vec![1.0, 1.05],
            clock: c,
            dt: 1e-3,
            t_end: 0.5,
            n_paths: 10,
            seed: 1,
            record_stride: 1,
            relax_dt_guard: true,
        };
        assert!(relaxed.validate().is_ok());
    }

    #[test]
    fn reflected_single_particle_matches_folded_normal_mean() {
        // One particle, reflecting wall at the origin, no interaction:
        // |u + W(t)| in law, so the mean is that of a folded normal,
        // obtained here by direct quadrature of |x| against the heat
        // kernel.
        let c = clock(f64::INFINITY);
        let (u, t) = (0.6, 0.5);
        let spec = SdeSpec::new(Model::RationalD, vec![u], c, 1e-3, t, 20_000, 7)
            .unwrap()
            .with_record_stride(100);
        let ens = simulate(&spec).unwrap();
        let record = ens.record_index(t).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for p in 0..ens.n_paths {
            let v = ens.positions(p, record)[0];
            sum += v;
            sum_sq += v * v;
        }
        let m = ens.n_paths as f64;
        let mean = sum / m;
        let se = ((sum_sq / m - mean * mean) / (m - 1.0)).sqrt();
        // E|N(u, t)| split at the kink so each piece is smooth.
        let gauss = |x: f64| (-(x - u) * (x - u) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
        let want = crate::quad::integrate(|x| x * gauss(x), 0.0, u + 12.0 * t.sqrt(), 128)
            - crate::quad::integrate(|x| x * gauss(x), u - 12.0 * t.sqrt(), 0.0, 128);
        assert!(
            (mean - want).abs() < 4.0 * se,
            "mean {mean} vs folded-normal {want} (se {se})"
        );
        assert!(ens.flagged.is_empty());
    }

    #[test]
    fn absorbing_wall_model_never_touches_the_walls() {
        let c = clock(1.0);
        let spec = SdeSpec::new(Model::EllipticC, vec![1.0, 2.0], c, 5e-4, 0.25, 300, 11)
            .unwrap()
            .with_record_stride(100);
        let ens = simulate(&spec).unwrap();
        assert!(ens.events.is_empty());
        assert!(ens.flagged.is_empty());
        assert!(ens.paths.iter().all(|&x| x > 0.0 && x < PI));
    }

    #[test]
    fn pinned_pair_concentrates_near_target_configuration() {
        // Reflecting-wall pair pinned at (0, pi r): by 99% of the
        // horizon the sample means sit near the targets.
        let c = clock(1.0);
        let spec = SdeSpec::new(Model::EllipticD, vec![1.0, 2.0], c, 5e-4, 0.99, 150, 3)
            .unwrap()
            .with_record_stride(5000);
        let ens = simulate(&spec).unwrap();
        let record = ens.record_index(0.99).unwrap();
        let (mut m1, mut m2) = (0.0, 0.0);
        for p in 0..ens.n_paths {
            let pos = ens.positions(p, record);
            m1 += pos[0];
            m2 += pos[1];
        }
        m1 /= ens.n_paths as f64;
        m2 /= ens.n_paths as f64;
        // Remaining spread at t = 0.99 t* is about sqrt(0.01) = 0.1;
        // with 150 paths the mean is pinned down to a few hundredths.
        assert!(m1 < 0.35, "lower particle mean {m1} should approach 0");
        assert!(
            m2 > PI - 0.35,
            "upper particle mean {m2} should approach pi"
        );
    }

    #[test]
    fn ensembles_are_identical_for_any_worker_count() {
        let c = clock(f64::INFINITY);
        let spec = SdeSpec::new(Model::TrigD, vec![0.9, 2.0], c, 1e-3, 0.2, 64, 123)
            .unwrap()
            .with_record_stride(10);
        let one = simulate_with_workers(&spec, 1).unwrap();
        let eight = simulate_with_workers(&spec, 8).unwrap();
        assert_eq!(one, eight);
        let frame_a = one.to_binary_frame(&spec);
        let frame_b = eight.to_binary_frame(&spec);
        assert_eq!(frame_a, frame_b);
        // And a rerun of the same spec is byte-identical too.
        let again = simulate_with_workers(&spec, 3).unwrap();
        assert_eq!(again.to_binary_frame(&spec), frame_a);
    }

    #[test]
    fn histogram_mass_is_the_particle_number() {
        let c = clock(f64::INFINITY);
        let spec = SdeSpec::new(Model::TrigD, vec![0.9, 2.0], c, 1e-3, 0.2, 500, 5)
            .unwrap()
            .with_record_stride(50);
        let ens = simulate(&spec).unwrap();
        let hist = empirical_density(&ens, 0.2, 20, (0.0, PI)).unwrap();
        let mass: f64 = hist
            .density
            .iter()
            .zip(hist.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum();
        assert_relative_eq!(mass, 2.0, max_relative = 1e-12);
        assert!(empirical_density(&ens, 0.123, 20, (0.0, PI)).is_err());
    }

    #[test]
    fn csv_export_has_one_row_per_path_and_time() {
        let c = clock(f64::INFINITY);
        let spec = SdeSpec::new(Model::RationalA, vec![0.0, 1.0], c, 1e-3, 0.01, 3, 9).unwrap();
        let ens = simulate(&spec).unwrap();
        let csv = ens.to_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "path,t,x1,x2");
        assert_eq!(rows.len(), 1 + 3 * ens.times.len());
    }
}
