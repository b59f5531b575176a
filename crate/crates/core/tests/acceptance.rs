//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use moran_assort::assortment::{drift_polynomial, independence_check, mean_assortment};
use moran_assort::asymptotics::{quadratic_asymptotics, quadratic_spec};
use moran_assort::combinatorics::{binomial, leading_diffs};
use moran_assort::critical::{critical_points, solve_lambda};
use moran_assort::diffusion::DiffusionSpec;
use moran_assort::moran::{simulate, ModelParams, PopulationState, RunPlan};
use moran_assort::recombination::{make_recombination, RecombinationKind};
use moran_assort::rng::stream;
use moran_assort::sde::{sde_run_with, BoundaryPolicy, SdeConfig};
use moran_assort::verify::{self, SuiteReport};
use moran_assort::{AssortmentScheme, MeanAssortTable, PolyForm, SubsetFn};
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<Verdict, String>;

struct Verdict {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into(), notes: Vec::new() }
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    /// Also fails when `elapsed` exceeds `budget`.
    fn timed(mut self, elapsed: Duration, budget: Duration) -> Self {
        if elapsed > budget {
            self.passed = false;
            self.detail = format!("{}; runtime {:.2?} over budget {:.0?}", self.detail, elapsed, budget);
        }
        self
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn hamming_spec(increments: &[f64], mu: f64) -> Result<DiffusionSpec, String> {
    let scheme = AssortmentScheme::hamming_increments(increments).map_err(e)?;
    DiffusionSpec::new(mean_assortment(&scheme), mu, mu).map_err(e)
}

fn suite_verdict(report: &SuiteReport) -> Verdict {
    let failing: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}={:.3e} ({})", c.name, c.value, c.condition))
        .collect();
    let worst = if failing.is_empty() { format!("{} checks", report.checks.len()) } else { failing.join(", ") };
    Verdict::new(report.passed, format!("{}: {worst}", report.suite))
}

struct Figure {
    name: &'static str,
    increments: &'static [f64],
    mu: f64,
    lambdas: &'static [(f64, f64)],
}

const FIGURES: [Figure; 4] = [
    Figure { name: "fig2", increments: &[-2.0, -6.0], mu: 0.6, lambdas: &[(0.0766, 1e-4)] },
    Figure { name: "fig5", increments: &[-15.0, -210.0], mu: 1.0, lambdas: &[(0.034, 1e-3), (0.008, 1e-3)] },
    Figure {
        name: "fig6a",
        increments: &[-20.0, -40.0, -60.0],
        mu: 1.0,
        lambdas: &[(0.043, 1e-3), (0.031, 1e-3), (0.025, 1e-3)],
    },
    Figure {
        name: "fig6b",
        increments: &[-30.0, -60.0, -90.0],
        mu: 1.0,
        lambdas: &[(0.030, 1e-3), (0.021, 1e-3), (0.017, 1e-3)],
    },
];

fn lambda_roots() -> Outcome {
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for fig in &FIGURES {
        let spec = hamming_spec(fig.increments, fig.mu)?;
        for (l, &(want, tol)) in fig.lambdas.iter().enumerate() {
            let got = solve_lambda(&spec, l).map_err(e)?.map(|r| r.lambda);
            let ok = got.is_some_and(|g| (g - want).abs() <= tol + 1e-12);
            passed &= ok;
            parts.push(format!("{}:λ{l}={}", fig.name, got.map_or("none".into(), |g| format!("{g:.5}"))));
        }
    }
    Ok(Verdict::new(passed, parts.join(" ")).timed(start.elapsed(), Duration::from_secs(1)))
}

/// Means `m'` with `δ_L[m'](∅) = 2^{|L|} δ_L[m](∅)`, i.e. `H` evaluated at `2ρ` instead of `ρ`.
fn doubled_rho_spec(spec: &DiffusionSpec) -> Result<DiffusionSpec, String> {
    let profile = spec.table().cardinality_profile().ok_or("not cardinality-only")?;
    let d = leading_diffs(&profile);
    let n = spec.n();
    let scaled: Vec<f64> = (0..=n).map(|k| (0..=k).map(|j| binomial(k, j) * 2f64.powi(j as i32) * d[j]).sum()).collect();
    let means = SubsetFn::from_fn(n, |m| scaled[m.count_ones() as usize]);
    DiffusionSpec::new(MeanAssortTable::from_means(means), spec.mu0(), spec.mu1()).map_err(e)
}

fn h_gaps() -> Outcome {
    let start = Instant::now();
    let printed: [(&str, [f64; 3]); 2] = [("fig6a", [7.9, 24.3, 49.8]), ("fig6b", [12.6, 38.6, 78.7])];
    let mut passed = true;
    let mut parts = Vec::new();
    let mut notes = Vec::new();
    for (fig, (name, want)) in FIGURES[2..].iter().zip(printed) {
        let spec = hamming_spec(fig.increments, fig.mu)?;
        let gaps: Vec<f64> = critical_points(&spec).map_err(e)?.h_gaps().into_iter().map(|g| g.unwrap_or(f64::NAN)).collect();
        for (g, w) in gaps.iter().zip(want) {
            passed &= (g - w).abs() <= 0.15;
        }
        parts.push(format!("{name}: ({:.2}, {:.2}, {:.2}) vs ({}, {}, {})", gaps[0], gaps[1], gaps[2], want[0], want[1], want[2]));
        let variant = critical_points(&doubled_rho_spec(&spec)?).map_err(e)?;
        let vg: Vec<f64> = variant.h_gaps().into_iter().map(|g| g.unwrap_or(f64::NAN)).collect();
        let vl: Vec<f64> = variant.lambdas.iter().map(|l| l.unwrap_or(f64::NAN)).collect();
        notes.push(format!(
            "{name}: with ρ replaced by 2ρ in H the gaps are ({:.2}, {:.2}, {:.2}) at λ = ({:.4}, {:.4}, {:.4})",
            vg[0], vg[1], vg[2], vl[0], vl[1], vl[2]
        ));
    }
    let mut v = Verdict::new(passed, parts.join("; ")).timed(start.elapsed(), Duration::from_secs(1));
    for n in notes {
        v = v.note(n);
    }
    Ok(v)
}

fn drift_order() -> Outcome {
    let start = Instant::now();
    let report = verify::drift_oracle_suite(11).map_err(e)?;
    Ok(suite_verdict(&report).timed(start.elapsed(), Duration::from_secs(60)))
}

fn moments() -> Outcome {
    let start = Instant::now();
    let report = verify::moments_suite(12).map_err(e)?;
    Ok(suite_verdict(&report).timed(start.elapsed(), Duration::from_secs(60)))
}

fn dual_forms() -> Outcome {
    let start = Instant::now();
    let report = verify::dual_form_suite(13, 100).map_err(e)?;
    Ok(suite_verdict(&report).timed(start.elapsed(), Duration::from_secs(10)))
}

fn wf_equivalence() -> Outcome {
    Ok(suite_verdict(&verify::wf_comparison_suite(14).map_err(e)?))
}

fn reversibility() -> Outcome {
    Ok(suite_verdict(&verify::reversibility_suite(15).map_err(e)?))
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Endpoints of `samples` independent SDE paths, one vector per coordinate.
fn sde_endpoints(spec: &DiffusionSpec, config: &SdeConfig, x0: &[f64], samples: u64) -> Result<Vec<Vec<f64>>, String> {
    let ends: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(config.seed, r);
            let mut last = x0.to_vec();
            sde_run_with(spec, config, x0, &mut rng, |_, x| last.copy_from_slice(x)).map_err(e)?;
            Ok(last)
        })
        .collect::<Result<_, String>>()?;
    Ok((0..x0.len()).map(|i| ends.iter().map(|x| x[i]).collect()).collect())
}

fn independence() -> Outcome {
    let d = -2.0;
    let (mu0, mu1) = (0.8, 0.6);
    let n = 3;
    let scheme = AssortmentScheme::hamming_increments(&[d; 3]).map_err(e)?;
    let table = mean_assortment(&scheme);
    let mut rng = stream(16, 0);
    let mut p_err = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        for i in 0..n {
            p_err = p_err.max((drift_polynomial(&table, i, &x, PolyForm::Factorised) - d).abs());
        }
    }
    let rep = independence_check(&table);
    let c = 0.7;
    let additive: Vec<f64> = (0..=4).map(|l| c * (l * l) as f64).collect();
    let additive_rep = independence_check(&mean_assortment(&AssortmentScheme::additive(additive).map_err(e)?));

    let samples = 100_000;
    let config = SdeConfig { dt: 1e-3, steps: 1000, record_every: 1000, policy: BoundaryPolicy::Auto, seed: 16 };
    let x0 = [0.3, 0.5, 0.8];
    let spec = DiffusionSpec::new(table, mu0, mu1).map_err(e)?;
    let joint = sde_endpoints(&spec, &config, &x0, samples)?;
    let one_spec = DiffusionSpec::new(mean_assortment(&AssortmentScheme::hamming_increments(&[d]).map_err(e)?), mu0, mu1).map_err(e)?;
    let mut ks = Vec::new();
    for i in 0..n {
        let cfg = SdeConfig { seed: 17 + i as u64, ..config.clone() };
        let single = sde_endpoints(&one_spec, &cfg, &[x0[i]], samples)?.remove(0);
        ks.push(ks_statistic(joint[i].clone(), single));
    }
    let ks_max = ks.iter().copied().fold(0.0, f64::max);
    let passed = p_err <= 1e-12 && rep.independent && additive_rep.independent && ks_max < 0.02;
    Ok(Verdict::new(
        passed,
        format!(
            "max|P_i − d| = {p_err:.1e}; hamming independent = {}; additive independent = {}; KS = [{}]",
            rep.independent,
            additive_rep.independent,
            ks.iter().map(|k| format!("{k:.4}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

/// Bin masses of `x (1−x) exp(3((1−x)² + x²))`, Wright's density for this configuration.
fn wright_bins(bins: usize) -> Vec<f64> {
    let g = |x: f64| x * (1.0 - x) * (3.0 * ((1.0 - x).powi(2) + x * x)).exp();
    let sub = 2000;
    let h = 1.0 / (bins * sub) as f64;
    let mut mass: Vec<f64> =
        (0..bins).map(|b| (0..sub).map(|k| g(((b * sub + k) as f64 + 0.5) * h) * h).sum()).collect();
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);
    mass
}

fn one_locus_stationary() -> Outcome {
    let start = Instant::now();
    let pop = 200u64;
    let scheme = AssortmentScheme::hamming_increments(&[-6.0]).map_err(e)?;
    let params = ModelParams::new(scheme, make_recombination(1, &RecombinationKind::Free).map_err(e)?, 1.0, 1.0, pop).map_err(e)?;
    let init = PopulationState::new(1, vec![pop / 2, pop / 2]).map_err(e)?;
    let every = 10 * pop;
    let burn = 100usize;
    let (replicas, per_replica) = (8u64, 20_000u64);
    let plan = RunPlan { steps: every * per_replica, record_every: every, y_masks: vec![] };
    let trajs = simulate(&params, &init, &plan, 18, replicas).map_err(e)?;
    let bins = 10;
    let mut counts = vec![0.0; bins];
    let mut total = 0.0;
    for t in &trajs {
        for row in t.rows.iter().skip(burn) {
            counts[((row[1] * bins as f64) as usize).min(bins - 1)] += 1.0;
            total += 1.0;
        }
    }
    let want = wright_bins(bins);
    let l1: f64 = counts.iter().zip(&want).map(|(c, w)| (c / total - w).abs()).sum();
    Ok(Verdict::new(
        l1 < 0.05,
        format!(
            "binned L1 = {l1:.4} over {} samples ({} steps, {bins} bins) in {:.1?}",
            total,
            replicas * plan.steps,
            start.elapsed()
        ),
    ))
}

fn y_decay() -> Outcome {
    let neutral = AssortmentScheme::hamming(vec![0.0; 3]).map_err(e)?;
    let free = make_recombination(2, &RecombinationKind::Free).map_err(e)?;
    let mut means = Vec::new();
    for pop in [100u64, 300] {
        let params = ModelParams::new(neutral.clone(), free.clone(), 0.0, 0.0, pop).map_err(e)?;
        let init = PopulationState::new(2, vec![pop / 2, 0, 0, pop / 2]).map_err(e)?;
        let steps = (pop as f64 * (pop as f64).ln()).ceil() as u64;
        let plan = RunPlan { steps, record_every: steps, y_masks: vec![0b11] };
        let trajs = simulate(&params, &init, &plan, 19, 200).map_err(e)?;
        let mean = trajs.iter().map(|t| t.rows[0][3].abs()).sum::<f64>() / trajs.len() as f64;
        means.push(mean);
    }
    let linkage = verify::linkage_decay_suite(19).map_err(e)?;
    let passed = means[1] < means[0] && means[1] < 0.05 && linkage.passed;
    let ode = suite_verdict(&linkage);
    Ok(Verdict::new(
        passed,
        format!("mean |Y| = {:.4} (N=100), {:.4} (N=300); {}", means[0], means[1], ode.detail),
    ))
}

fn boundary_events(mu1: f64, policy: BoundaryPolicy) -> Result<(u64, BoundaryPolicy), String> {
    let spec = DiffusionSpec::new(mean_assortment(&AssortmentScheme::hamming(vec![0.0, 0.0]).map_err(e)?), 1.0, mu1).map_err(e)?;
    let config = SdeConfig { dt: 1e-3, steps: 10_000_000, record_every: 10_000_000, policy, seed: 20 };
    let (events, used) = sde_run_with(&spec, &config, &[0.5], &mut stream(20, 0), |_, _| {}).map_err(e)?;
    Ok((events.total_zero(), used))
}

fn boundary_probes() -> Outcome {
    let (low, low_policy) = boundary_events(0.1, BoundaryPolicy::Auto)?;
    let (half, half_policy) = boundary_events(0.5, BoundaryPolicy::Auto)?;
    let (clamped, _) = boundary_events(0.5, BoundaryPolicy::Clamp)?;
    Ok(Verdict::new(
        low > 0 && half == 0,
        format!("μ1=0.1: {low} hits at 0 ({low_policy:?}); μ1=0.5: {half} hits ({half_policy:?})"),
    )
    .note(format!("μ1=0.5 with plain Euler–Maruyama plus clamping records {clamped} hits at 0")))
}

fn combinatorial_identities() -> Outcome {
    Ok(suite_verdict(&verify::combinatorics_suite(21).map_err(e)?))
}

fn quadratic() -> Outcome {
    let q = quadratic_asymptotics(5, 1.0, 2.0, 1.0).map_err(e)?;
    let spec = quadratic_spec(5, 1.0, 2.0, 1.0).map_err(e)?;
    let l0 = solve_lambda(&spec, 0).map_err(e)?.ok_or("no λ0 root")?.lambda;
    let l1 = solve_lambda(&spec, 1).map_err(e)?.ok_or("no λ1 root")?.lambda;
    let root_err = (q.lambda0 - l0).abs().max((q.lambda1.unwrap_or(f64::NAN) - l1).abs());

    let big = quadratic_asymptotics(400, 0.0, 1.0, 1.0).map_err(e)?;
    let gap_ratio = big.gap_n_ratio.unwrap_or(f64::NAN);

    // 8μ − 4 = 4 at μ = 1, n = 3
    let mut threshold_ok = true;
    for (b, full) in [(1.1, true), (0.9, false)] {
        let q = quadratic_asymptotics(3, b, 1.0, 1.0).map_err(e)?;
        let count = critical_points(&quadratic_spec(3, b, 1.0, 1.0).map_err(e)?).map_err(e)?.points.len();
        threshold_ok &= q.full_structure == full && count == if full { 27 } else { 1 };
    }
    let passed = root_err <= 1e-10
        && (big.lambda0_ratio - 1.0).abs() <= 0.10
        && (gap_ratio - 1.0).abs() <= 0.15
        && threshold_ok;
    Ok(Verdict::new(
        passed,
        format!(
            "root error {root_err:.1e}; n=400: λ0 ratio {:.4}, gap ratio {gap_ratio:.4}; threshold both sides {threshold_ok}",
            big.lambda0_ratio
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("lambda-roots", lambda_roots),
        ("h-gaps", h_gaps),
        ("drift-order", drift_order),
        ("moments", moments),
        ("dual-forms", dual_forms),
        ("wf-equivalence", wf_equivalence),
        ("reversibility", reversibility),
        ("independence", independence),
        ("one-locus-stationary", one_locus_stationary),
        ("y-decay", y_decay),
        ("boundary-probes", boundary_probes),
        ("combinatorial-identities", combinatorial_identities),
        ("quadratic-asymptotics", quadratic),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        match outcome {
            Ok(v) => {
                failed += usize::from(!v.passed);
                println!("{} {name}: {} [{elapsed:.2?}]", if v.passed { "PASS" } else { "FAIL" }, v.detail);
                for n in v.notes {
                    println!("     note: {n}");
                }
            }
            Err(err) => {
                failed += 1;
                println!("FAIL {name}: error: {err} [{elapsed:.2?}]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
