//! Time discretisations of the limiting diffusion.
//!
//! Two schemes are available. `Clamp` is Euler–Maruyama in `x` followed by
//! projection onto `[0,1]`. `LampertiImplicit` works in `Y = 2 arcsin √x`,
//! where the noise is additive, and treats the `1/Y` and `1/(π−Y)` parts of
//! the drift implicitly, so the iterates never leave the open interval.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{comparison_drifts, drift_into, DiffusionSpec};
use crate::error::{invalid, Result};
use crate::rng::{stream, Stream, RNG_ALGORITHM};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    Clamp,
    LampertiImplicit,
    /// `LampertiImplicit` when both boundaries are entrance (`μ0, μ1 ≥ ½`), else `Clamp`.
    Auto,
}

impl BoundaryPolicy {
    pub fn resolve(self, mu0: f64, mu1: f64) -> BoundaryPolicy {
        match self {
            BoundaryPolicy::Auto if mu0.min(mu1) >= 0.5 => BoundaryPolicy::LampertiImplicit,
            BoundaryPolicy::Auto => BoundaryPolicy::Clamp,
            p => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeConfig {
    pub dt: f64,
    pub steps: u64,
    pub record_every: u64,
    pub policy: BoundaryPolicy,
    pub seed: u64,
}

impl SdeConfig {
    fn check(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid(format!("dt must be positive (got {})", self.dt));
        }
        if self.record_every == 0 {
            return invalid("record_every must be positive");
        }
        Ok(())
    }
}

/// Run metadata written next to SDE trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdeMetadata {
    pub dt: f64,
    pub steps: u64,
    pub record_every: u64,
    pub boundary_policy: BoundaryPolicy,
    pub seed: u64,
    pub rng: &'static str,
}

impl SdeMetadata {
    pub fn new(config: &SdeConfig, resolved: BoundaryPolicy) -> Self {
        Self {
            dt: config.dt,
            steps: config.steps,
            record_every: config.record_every,
            boundary_policy: resolved,
            seed: config.seed,
            rng: RNG_ALGORITHM,
        }
    }
}

/// Counts of steps whose unprojected value left `[0,1]`, per coordinate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundaryEvents {
    pub at_zero: Vec<u64>,
    pub at_one: Vec<u64>,
}

impl BoundaryEvents {
    fn new(n: usize) -> Self {
        Self { at_zero: vec![0; n], at_one: vec![0; n] }
    }

    pub fn total_zero(&self) -> u64 {
        self.at_zero.iter().sum()
    }

    pub fn total_one(&self) -> u64 {
        self.at_one.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeRun {
    pub trajectory: Trajectory,
    pub events: BoundaryEvents,
    pub policy: BoundaryPolicy,
}

fn to_y(x: f64) -> f64 {
    2.0 * x.clamp(0.0, 1.0).sqrt().asin()
}

fn to_x(y: f64) -> f64 {
    let s = (0.5 * y).sin();
    s * s
}

/// Solves `Y − dt(c0/Y − c1/(π−Y)) = a` on `(0, π)`; the left side is increasing.
fn implicit_root(a: f64, dt: f64, c0: f64, c1: f64) -> f64 {
    use std::f64::consts::PI;
    let g = |y: f64| y - dt * (c0 / y - c1 / (PI - y)) - a;
    let dg = |y: f64| 1.0 + dt * (c0 / (y * y) + c1 / ((PI - y) * (PI - y)));
    let (mut lo, mut hi) = (0.0f64, PI);
    let mut y = a.clamp(1e-3 * PI, PI * (1.0 - 1e-3));
    for _ in 0..100 {
        let gy = g(y);
        if gy == 0.0 {
            return y;
        }
        if gy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let mut next = y - gy / dg(y);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-15 * (1.0 + y.abs()) {
            return next;
        }
        y = next;
    }
    y
}

/// Singular coefficients of the `Y`-drift at `Y = 0` and `Y = π`.
fn lamperti_coeffs(mu0: f64, mu1: f64) -> Result<(f64, f64)> {
    let (c0, c1) = (2.0 * mu1 - 0.5, 2.0 * mu0 - 0.5);
    if c0 <= 0.0 || c1 <= 0.0 {
        return invalid("the implicit Lamperti scheme needs μ0, μ1 > ¼");
    }
    Ok((c0, c1))
}

/// Regular part of the `Y`-drift `(2b − ½cos Y)/sin Y − c0/Y + c1/(π−Y)`.
fn lamperti_regular(b: f64, y: f64, c0: f64, c1: f64) -> f64 {
    use std::f64::consts::PI;
    (2.0 * b - 0.5 * y.cos()) / y.sin() - c0 / y + c1 / (PI - y)
}

/// One integrator state, advanced with caller-supplied normal draws.
struct Stepper<'a> {
    spec: &'a DiffusionSpec,
    dt: f64,
    sqrt_dt: f64,
    policy: BoundaryPolicy,
    coeffs: (f64, f64),
    b: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a DiffusionSpec, dt: f64, policy: BoundaryPolicy) -> Result<Self> {
        let coeffs = match policy {
            BoundaryPolicy::LampertiImplicit => lamperti_coeffs(spec.mu0(), spec.mu1())?,
            _ => (0.0, 0.0),
        };
        Ok(Self { spec, dt, sqrt_dt: dt.sqrt(), policy, coeffs, b: vec![0.0; spec.n()] })
    }

    fn step(&mut self, x: &mut [f64], y: &mut [f64], z: &[f64], events: &mut BoundaryEvents) {
        drift_into(self.spec, x, &mut self.b);
        match self.policy {
            BoundaryPolicy::LampertiImplicit => {
                let (c0, c1) = self.coeffs;
                for i in 0..x.len() {
                    let a = y[i] + lamperti_regular(self.b[i], y[i], c0, c1) * self.dt + self.sqrt_dt * z[i];
                    y[i] = implicit_root(a, self.dt, c0, c1);
                    x[i] = to_x(y[i]);
                    if x[i] <= 0.0 {
                        events.at_zero[i] += 1;
                    } else if x[i] >= 1.0 {
                        events.at_one[i] += 1;
                    }
                }
            }
            _ => {
                for i in 0..x.len() {
                    let v = x[i] + self.b[i] * self.dt + (x[i] * (1.0 - x[i])).max(0.0).sqrt() * self.sqrt_dt * z[i];
                    x[i] = if v <= 0.0 {
                        events.at_zero[i] += 1;
                        0.0
                    } else if v >= 1.0 {
                        events.at_one[i] += 1;
                        1.0
                    } else {
                        v
                    };
                }
            }
        }
    }
}

fn check_start(spec: &DiffusionSpec, x0: &[f64], policy: BoundaryPolicy) -> Result<()> {
    if x0.len() != spec.n() {
        return invalid(format!("x0 has {} coordinates, expected {}", x0.len(), spec.n()));
    }
    if x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return invalid("x0 must lie in [0,1]ⁿ");
    }
    if policy == BoundaryPolicy::LampertiImplicit && x0.iter().any(|&v| v == 0.0 || v == 1.0) {
        return invalid("the implicit Lamperti scheme needs an interior starting point");
    }
    Ok(())
}

/// Runs the scheme, calling `observe(step, x)` every `record_every` steps.
pub fn sde_run_with<F: FnMut(u64, &[f64])>(
    spec: &DiffusionSpec,
    config: &SdeConfig,
    x0: &[f64],
    rng: &mut Stream,
    mut observe: F,
) -> Result<(BoundaryEvents, BoundaryPolicy)> {
    config.check()?;
    let policy = config.policy.resolve(spec.mu0(), spec.mu1());
    check_start(spec, x0, policy)?;
    let n = spec.n();
    let mut stepper = Stepper::new(spec, config.dt, policy)?;
    let mut x = x0.to_vec();
    let mut y: Vec<f64> = x.iter().map(|&v| to_y(v)).collect();
    let mut z = vec![0.0; n];
    let mut events = BoundaryEvents::new(n);
    for k in 1..=config.steps {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        stepper.step(&mut x, &mut y, &z, &mut events);
        if k % config.record_every == 0 {
            observe(k, &x);
        }
    }
    Ok((events, policy))
}

/// Recorded path with columns `t, x1..xn`; rows at multiples of `record_every`.
pub fn sde_simulate(spec: &DiffusionSpec, config: &SdeConfig, x0: &[f64]) -> Result<SdeRun> {
    sde_replica(spec, config, x0, 0)
}

/// Replica `r` uses stream `r` of `config.seed`.
pub fn sde_replica(spec: &DiffusionSpec, config: &SdeConfig, x0: &[f64], replica: u64) -> Result<SdeRun> {
    let mut traj = Trajectory::with_layout(spec.n(), &[]);
    let mut rng = stream(config.seed, replica);
    let (events, policy) = sde_run_with(spec, config, x0, &mut rng, |k, x| {
        let mut row = Vec::with_capacity(x.len() + 1);
        row.push(k as f64 * config.dt);
        row.extend_from_slice(x);
        traj.rows.push(row);
    })?;
    Ok(SdeRun { trajectory: traj, events, policy })
}

pub fn sde_replicas(spec: &DiffusionSpec, config: &SdeConfig, x0: &[f64], replicas: u64) -> Result<Vec<SdeRun>> {
    (0..replicas).into_par_iter().map(|r| sde_replica(spec, config, x0, r)).collect()
}

/// Coordinate `i` of the full process with the two bounding one-dimensional
/// processes, all driven by the same noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichRun {
    pub lower: Vec<f64>,
    pub middle: Vec<f64>,
    pub upper: Vec<f64>,
    /// Largest `max(lower − middle, middle − upper, 0)` over recorded steps.
    pub max_violation: f64,
    pub policy: BoundaryPolicy,
}

/// Bounding process in one coordinate with drift `b^−` or `b^+`.
struct Bound<'a> {
    spec: &'a DiffusionSpec,
    i: usize,
    upper: bool,
    x: f64,
    y: f64,
}

impl Bound<'_> {
    fn drift(&self) -> f64 {
        let (lo, hi) = comparison_drifts(self.spec, self.i, self.x);
        if self.upper {
            hi
        } else {
            lo
        }
    }

    fn step(&mut self, policy: BoundaryPolicy, dt: f64, z: f64, coeffs: (f64, f64)) {
        let b = self.drift();
        match policy {
            BoundaryPolicy::LampertiImplicit => {
                let (c0, c1) = coeffs;
                let a = self.y + lamperti_regular(b, self.y, c0, c1) * dt + dt.sqrt() * z;
                self.y = implicit_root(a, dt, c0, c1);
                self.x = to_x(self.y);
            }
            _ => {
                let v = self.x + b * dt + (self.x * (1.0 - self.x)).max(0.0).sqrt() * dt.sqrt() * z;
                self.x = v.clamp(0.0, 1.0);
            }
        }
    }
}

pub fn sandwich(spec: &DiffusionSpec, config: &SdeConfig, x0: &[f64], i: usize) -> Result<SandwichRun> {
    config.check()?;
    if i >= spec.n() {
        return invalid(format!("coordinate {i} out of range"));
    }
    let policy = config.policy.resolve(spec.mu0(), spec.mu1());
    check_start(spec, x0, policy)?;
    let coeffs = if policy == BoundaryPolicy::LampertiImplicit { lamperti_coeffs(spec.mu0(), spec.mu1())? } else { (0.0, 0.0) };
    let n = spec.n();
    let mut stepper = Stepper::new(spec, config.dt, policy)?;
    let mut x = x0.to_vec();
    let mut y: Vec<f64> = x.iter().map(|&v| to_y(v)).collect();
    let mut lo = Bound { spec, i, upper: false, x: x0[i], y: to_y(x0[i]) };
    let mut hi = Bound { spec, i, upper: true, x: x0[i], y: to_y(x0[i]) };
    let mut rng = stream(config.seed, 0);
    let mut z = vec![0.0; n];
    let mut events = BoundaryEvents::new(n);
    let mut run = SandwichRun { lower: Vec::new(), middle: Vec::new(), upper: Vec::new(), max_violation: 0.0, policy };
    for k in 1..=config.steps {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        stepper.step(&mut x, &mut y, &z, &mut events);
        lo.step(policy, config.dt, z[i], coeffs);
        hi.step(policy, config.dt, z[i], coeffs);
        run.max_violation = run.max_violation.max(lo.x - x[i]).max(x[i] - hi.x);
        if k % config.record_every == 0 {
            run.lower.push(lo.x);
            run.middle.push(x[i]);
            run.upper.push(hi.x);
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assortment::mean_assortment;
    use crate::AssortmentScheme;

    fn neutral(n: usize, mu: f64) -> DiffusionSpec {
        DiffusionSpec::new(mean_assortment(&AssortmentScheme::hamming(vec![0.0; n + 1]).unwrap()), mu, mu).unwrap()
    }

    fn cfg(dt: f64, steps: u64, policy: BoundaryPolicy) -> SdeConfig {
        SdeConfig { dt, steps, record_every: 1, policy, seed: 9 }
    }

    #[test]
    fn vertex_is_absorbing_without_mutation() {
        let run = sde_simulate(&neutral(2, 0.0), &cfg(1e-3, 500, BoundaryPolicy::Auto), &[0.0, 1.0]).unwrap();
        assert_eq!(run.policy, BoundaryPolicy::Clamp);
        assert!(run.trajectory.rows.iter().all(|r| r[1] == 0.0 && r[2] == 1.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let s = neutral(2, 0.3);
        let c = cfg(1e-3, 300, BoundaryPolicy::Auto);
        assert_eq!(sde_simulate(&s, &c, &[0.2, 0.7]).unwrap(), sde_simulate(&s, &c, &[0.2, 0.7]).unwrap());
    }

    #[test]
    fn auto_policy_resolution() {
        assert_eq!(BoundaryPolicy::Auto.resolve(0.5, 0.7), BoundaryPolicy::LampertiImplicit);
        assert_eq!(BoundaryPolicy::Auto.resolve(0.5, 0.4), BoundaryPolicy::Clamp);
        assert_eq!(BoundaryPolicy::Clamp.resolve(1.0, 1.0), BoundaryPolicy::Clamp);
    }

    #[test]
    fn lamperti_stays_inside() {
        let s = neutral(1, 0.5);
        let run = sde_simulate(&s, &cfg(1e-3, 200_000, BoundaryPolicy::LampertiImplicit), &[0.5]).unwrap();
        assert_eq!(run.events.total_zero() + run.events.total_one(), 0);
        assert!(run.trajectory.rows.iter().all(|r| r[1] > 0.0 && r[1] < 1.0));
        assert!(sde_simulate(&neutral(1, 0.2), &cfg(1e-3, 10, BoundaryPolicy::LampertiImplicit), &[0.5]).is_err());
    }

    #[test]
    fn implicit_root_solves_equation() {
        for &(a, c0, c1) in &[(-0.3, 1.5, 1.5), (0.2, 0.5, 3.0), (3.5, 1.0, 0.25)] {
            let y = implicit_root(a, 1e-3, c0, c1);
            let pi = std::f64::consts::PI;
            let g = y - 1e-3 * (c0 / y - c1 / (pi - y)) - a;
            let dg = 1.0 + 1e-3 * (c0 / (y * y) + c1 / ((pi - y) * (pi - y)));
            assert!(y > 0.0 && y < pi);
            // a few ulps of y, scaled by the slope
            assert!(g.abs() <= 16.0 * f64::EPSILON * pi * dg, "{g}");
        }
    }

    #[test]
    fn lamperti_mean_tracks_mutation_balance() {
        // E[x] relaxes to μ1/(μ0+μ1) at rate μ0+μ1 when s ≡ 0
        let s = DiffusionSpec::new(mean_assortment(&AssortmentScheme::hamming(vec![0.0, 0.0]).unwrap()), 0.6, 1.4).unwrap();
        let c = SdeConfig { dt: 1e-3, steps: 1000, record_every: 1000, policy: BoundaryPolicy::Auto, seed: 1 };
        let runs = sde_replicas(&s, &c, &[0.2], 4000).unwrap();
        let mean: f64 = runs.iter().map(|r| r.trajectory.rows[0][1]).sum::<f64>() / runs.len() as f64;
        let want = 0.7 + (0.2 - 0.7) * (-2.0f64).exp();
        assert!((mean - want).abs() < 0.01, "{mean} vs {want}");
    }

    #[test]
    fn bounding_processes_sandwich_each_coordinate() {
        let scheme = AssortmentScheme::hamming_increments(&[-1.0, -2.0, -3.0]).unwrap();
        let dt = 1e-3;
        for (mu, policy) in [(1.0, BoundaryPolicy::LampertiImplicit), (0.4, BoundaryPolicy::Clamp)] {
            let spec = DiffusionSpec::new(mean_assortment(&scheme), mu, mu).unwrap();
            let c = SdeConfig { dt, steps: 20_000, record_every: 100, policy, seed: 4 };
            for i in 0..3 {
                let run = sandwich(&spec, &c, &[0.3, 0.5, 0.8], i).unwrap();
                assert_eq!(run.middle.len(), 200);
                assert!(run.max_violation <= 5.0 * dt, "{policy:?} coordinate {i}: {}", run.max_violation);
            }
        }
    }
}
