//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Built with `harness = false` so the lines reach stdout under a plain
//! `cargo test`. Exits non-zero if any criterion fails other than those in
//! `KNOWN_RED`; the README explains why each of those stays red.

use std::time::Instant;

use compare_kit::binary::{
    composite_effect, composite_probabilities, conditionals_from_correlation, correlation_bounds, design_input,
    joint_prob_from_correlation, sizing_binary, BinaryDesignInput, BinaryMarginals,
};
use compare_kit::design::{Arm, Endpoint};
use compare_kit::scenario::{evaluate_spec, ScenarioSpec};
use compare_kit::simulation::{
    binomial_se, kendall_tau, sample_correlated_binary, sample_gumbel_uniforms, sample_law_times,
    simulate_power_binary, simulate_power_law, stream_rng, SimConfig,
};
use compare_kit::survival::{
    analyze, are_survival, build_composite_law, effective_hr, ph_diagnostic, CopulaOrientation, GumbelCopula,
    SurvivalScenario,
};
use compare_kit::{TestDesign, VarianceVariant};
use rand::Rng;

const KNOWN_RED: [&str; 3] = ["binary-case-probabilities", "oracle-equivalence", "low-frequency-approximation"];

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: Vec<String>, summary: String) -> Self {
        let pass = failures.is_empty();
        let detail = if pass { summary } else { format!("{summary}; failed: {}", failures.join(", ")) };
        Outcome { pass, detail }
    }
}

fn tuxedo(rho: f64) -> BinaryDesignInput {
    design_input(0.059, 0.032, 0.0196, 0.0098, rho, TestDesign::default(), VarianceVariant::Pooled).unwrap()
}

const TUXEDO_RHO: [f64; 3] = [0.1, 0.4, 0.7];

fn binary_case_probabilities() -> Outcome {
    let expect_p = ["0.08", "0.07", "0.06"];
    let expect_d = ["2.7", "2.3", "2.0"];
    let expect_c12 = ["0.19", "0.58", "0.97"];
    let expect_c21 = ["0.10", "0.31", "0.52"];
    let mut failures = Vec::new();
    let mut got = Vec::new();
    for (i, &rho) in TUXEDO_RHO.iter().enumerate() {
        let input = tuxedo(rho);
        let (pc, _) = composite_probabilities(&input);
        let d = 100.0 * composite_effect(&input).unwrap();
        let (c12, c21) = conditionals_from_correlation(&input.marginals, rho).unwrap();
        let row = [
            ("P(e*|c)", format!("{pc:.2}"), expect_p[i]),
            ("reduction", format!("{d:.1}"), expect_d[i]),
            ("P(e1|e2)", format!("{c12:.2}"), expect_c12[i]),
            ("P(e2|e1)", format!("{c21:.2}"), expect_c21[i]),
        ];
        for (name, value, want) in row {
            if value != want {
                failures.push(format!("{name} at rho={rho} is {value} (exact {}), reference says {want}", {
                    if name == "reduction" { format!("{d:.3}") } else { value.clone() }
                }));
            }
        }
        got.push(format!("{pc:.2}/{d:.1}/{c12:.2}/{c21:.2}"));
    }
    Outcome::new(failures, format!("rho 0.1, 0.4, 0.7 -> {}", got.join(", ")))
}

fn binary_case_sample_sizes() -> Outcome {
    let published = [2187u64, 2561, 3076];
    let mut failures = Vec::new();
    let mut got = Vec::new();
    for (i, &rho) in TUXEDO_RHO.iter().enumerate() {
        let input = tuxedo(rho);
        let n = sizing_binary(&input).unwrap().composite.n_total;
        let rel = n as f64 / published[i] as f64 - 1.0;
        if rel.abs() > 0.05 {
            failures.push(format!("n={n} vs {} ({:+.1}%)", published[i], 100.0 * rel));
        }
        let config = SimConfig::new(published[i], 10_000, SEED + i as u64).unwrap();
        let power = simulate_power_binary(&input, Endpoint::Composite, published[i], &config).unwrap();
        if !(0.75..=0.85).contains(&power.power_hat) {
            failures.push(format!("power {:.4} at n={}", power.power_hat, published[i]));
        }
        got.push(format!("n={n} ({:+.1}%) power={:.3}", 100.0 * rel, power.power_hat));
    }
    Outcome::new(failures, got.join(", "))
}

/// Survival reference rows as (shape of ε₁, shape of ε₂).
const SURVIVAL_SHAPES: [(f64, f64); 5] = [(2.0, 0.5), (1.0, 0.5), (1.0, 1.0), (1.0, 2.0), (0.5, 2.0)];

fn oasis_with(shape1: f64, shape2: f64, hr2: f64, rho: f64) -> SurvivalScenario {
    SurvivalScenario::new(
        0.125,
        0.05,
        shape1,
        shape2,
        0.83,
        hr2,
        rho,
        1.0,
        true,
        CopulaOrientation::Distribution,
        TestDesign::default(),
    )
    .unwrap()
}

fn oasis(shape1: f64, shape2: f64) -> SurvivalScenario {
    oasis_with(shape1, shape2, 0.66, 0.7)
}

fn survival_case_are() -> Outcome {
    let published = [1.84, 1.90, 2.02, 2.18, 2.32];
    let mut failures = Vec::new();
    let mut got = Vec::new();
    for (i, &(k1, k2)) in SURVIVAL_SHAPES.iter().enumerate() {
        let are = are_survival(&oasis(k1, k2)).unwrap();
        if (are - published[i]).abs() > 0.05 {
            failures.push(format!("row {}: {are:.3} vs {}", i + 1, published[i]));
        }
        got.push(format!("{are:.3}"));
    }
    Outcome::new(failures, format!("ARE {}", got.join(", ")))
}

fn survival_case_sample_sizes() -> Outcome {
    let published = [3381u64, 3278, 3084, 2857, 2682];
    let mut failures = Vec::new();
    let mut got = Vec::new();
    for (i, &(k1, k2)) in SURVIVAL_SHAPES.iter().enumerate() {
        let scenario = oasis(k1, k2);
        let n = analyze(&scenario).unwrap().composite.sample_size.n_total;
        let rel = n as f64 / published[i] as f64 - 1.0;
        if rel.abs() > 0.10 {
            failures.push(format!("row {}: n={n} vs {} ({:+.1}%)", i + 1, published[i], 100.0 * rel));
        }
        let law = build_composite_law(&scenario).unwrap();
        let config = SimConfig::new(published[i], 5_000, SEED + 10 + i as u64).unwrap();
        let power = simulate_power_law(&law, true, &scenario.design, Endpoint::Composite, published[i], &config).unwrap();
        if !(0.72..=0.88).contains(&power.power_hat) {
            failures.push(format!("row {}: logrank power {:.4}", i + 1, power.power_hat));
        }
        got.push(format!("n={n} ({:+.1}%) power={:.3}", 100.0 * rel, power.power_hat));
    }
    Outcome::new(failures, got.join(", "))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn strictly(values: &[f64], decreasing: bool) -> bool {
    values.windows(2).all(|w| if decreasing { w[1] < w[0] } else { w[1] > w[0] })
}

fn monotonicity() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut check = |name: String, values: Vec<f64>, decreasing: bool| {
        checked += 1;
        if !strictly(&values, decreasing) {
            failures.push(name);
        }
    };

    // TUXEDO: the largest correlation feasible in both arms.
    let (_, hi_c) = correlation_bounds(&BinaryMarginals::new(0.059, 0.032).unwrap());
    let (_, hi_t) = correlation_bounds(&BinaryMarginals::new(0.059 - 0.0196, 0.032 - 0.0098).unwrap());
    let rhos = linspace(0.0, 0.99 * hi_c.min(hi_t), 16);
    let inputs: Vec<_> = rhos.iter().map(|&r| tuxedo(r)).collect();
    check("tuxedo ARE in rho".into(), inputs.iter().map(|i| sizing_binary(i).unwrap().are()).collect(), true);
    check("tuxedo p* in rho".into(), inputs.iter().map(|i| composite_probabilities(i).0).collect(), true);
    check("tuxedo delta* in rho".into(), inputs.iter().map(|i| composite_effect(i).unwrap()).collect(), true);
    for rho in [0.1, 0.3, 0.5] {
        let ares = linspace(0.001, 0.0196, 16)
            .iter()
            .map(|&d2| {
                let input =
                    design_input(0.059, 0.032, 0.0196, d2, rho, TestDesign::default(), VarianceVariant::Pooled).unwrap();
                sizing_binary(&input).unwrap().are()
            })
            .collect();
        check(format!("tuxedo ARE in delta2 at rho={rho}"), ares, false);
    }

    // OASIS-6 as shipped (constant hazards), at the Figure 4 hr2 levels.
    let rhos = linspace(0.05, 0.8, 16);
    for hr2 in [0.65, 0.75, 0.85, 0.90] {
        let reports: Vec<_> = rhos.iter().map(|&r| analyze(&oasis_with(1.0, 1.0, hr2, r)).unwrap()).collect();
        check(format!("oasis ARE in rho at hr2={hr2}"), reports.iter().map(|a| a.are).collect(), true);
        check(format!("oasis p* in rho at hr2={hr2}"), reports.iter().map(|a| a.p_star_control).collect(), true);
        check(
            format!("oasis -ln HR* in rho at hr2={hr2}"),
            reports.iter().map(|a| -a.effective_hr.ln()).collect(),
            true,
        );
    }
    // Larger ε₂ effect means smaller hr2.
    for rho in [0.1, 0.4, 0.7] {
        let ares = linspace(0.6, 0.95, 16)
            .iter()
            .rev()
            .map(|&h| are_survival(&oasis_with(1.0, 1.0, h, rho)).unwrap())
            .collect();
        check(format!("oasis ARE in ε2 effect at rho={rho}"), ares, false);
    }
    let n = checked;
    Outcome::new(failures, format!("{n} strict 16-point sequences over both case studies"))
}

/// Not part of the criterion: the other reference hazard patterns over rho.
fn monotonicity_other_shapes() -> String {
    let rhos = linspace(0.05, 0.8, 16);
    let mut notes = Vec::new();
    for &(k1, k2) in &SURVIVAL_SHAPES[..] {
        if (k1, k2) == (1.0, 1.0) {
            continue;
        }
        let ares: Vec<f64> = rhos.iter().map(|&r| are_survival(&oasis_with(k1, k2, 0.66, r)).unwrap()).collect();
        if strictly(&ares, true) {
            notes.push(format!("shapes {k1}/{k2} decreasing"));
        } else {
            let (i, min) = ares.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &a)| if a < b.1 { (i, a) } else { b });
            notes.push(format!("shapes {k1}/{k2} minimum {min:.3} at rho={:.2}", rhos[i]));
        }
    }
    notes.join(", ")
}

fn oracle_equivalence() -> Outcome {
    const DRAWS: u64 = 1_000_000;
    const SCENARIOS: u64 = 50;
    let mut rng = stream_rng(SEED, 999);
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut worst: f64 = 0.0;
    let mut record = |name: String, empirical: f64, exact: f64, se: f64| {
        checks += 1;
        let z = (empirical - exact) / se;
        worst = worst.max(z.abs());
        if z.abs() > 3.0 {
            failures.push(format!("{name}: z={z:.2}"));
        }
    };

    for s in 0..SCENARIOS {
        // Binary scenario with a correlation feasible in both arms.
        let p1 = rng.random_range(0.02..0.4);
        let p2 = rng.random_range(0.02..0.4);
        let d1 = p1 * rng.random_range(0.05..0.6);
        let d2 = p2 * rng.random_range(0.05..0.6);
        let mc = BinaryMarginals::new(p1, p2).unwrap();
        let mt = BinaryMarginals::new(p1 - d1, p2 - d2).unwrap();
        let (lo_c, hi_c) = correlation_bounds(&mc);
        let (lo_t, hi_t) = correlation_bounds(&mt);
        let rho = rng.random_range(0.98 * lo_c.max(lo_t)..0.98 * hi_c.min(hi_t));
        let input = design_input(p1, p2, d1, d2, rho, TestDesign::default(), VarianceVariant::Pooled).unwrap();
        let p12 = joint_prob_from_correlation(&mc, rho).unwrap();
        let (pc, pt) = composite_probabilities(&input);
        let cc = sample_correlated_binary(&mc, rho, &SimConfig::new(DRAWS, 1, SEED + 2 * s).unwrap()).unwrap();
        let ct = sample_correlated_binary(&mt, rho, &SimConfig::new(DRAWS, 1, SEED + 2 * s + 1).unwrap()).unwrap();
        let n = DRAWS as f64;
        record(format!("binary#{s} p12"), cc.both as f64 / n, p12, binomial_se(p12, DRAWS));
        record(format!("binary#{s} p*"), cc.composite() as f64 / n, pc, binomial_se(pc, DRAWS));
        let se_d = (binomial_se(pc, DRAWS).powi(2) + binomial_se(pt, DRAWS).powi(2)).sqrt();
        record(
            format!("binary#{s} delta*"),
            (cc.composite() as f64 - ct.composite() as f64) / n,
            composite_effect(&input).unwrap(),
            se_d,
        );

        // Survival scenario.
        let shapes = [0.5, 1.0, 2.0];
        let scenario = SurvivalScenario::new(
            rng.random_range(0.05..0.3),
            rng.random_range(0.03..0.2),
            shapes[rng.random_range(0..3)],
            shapes[rng.random_range(0..3)],
            rng.random_range(0.6..0.95),
            rng.random_range(0.6..0.95),
            rng.random_range(0.0..0.9),
            1.0,
            rng.random_bool(0.5),
            if rng.random_bool(0.5) { CopulaOrientation::Distribution } else { CopulaOrientation::Survival },
            TestDesign::default(),
        )
        .unwrap();
        let law = build_composite_law(&scenario).unwrap();
        for (k, arm) in [Arm::Control, Arm::Treatment].into_iter().enumerate() {
            let config = SimConfig::new(DRAWS, 1, SEED + 1000 + 2 * s + k as u64).unwrap();
            let pairs = sample_law_times(&law, arm, scenario.eps1_terminal, &config).unwrap();
            let surv = pairs.iter().filter(|p| p.composite_time > scenario.tau).count() as f64 / n;
            let exact = law.survival(arm, scenario.tau);
            record(format!("survival#{s} S*({arm})"), surv, exact, binomial_se(exact, DRAWS));
        }
    }

    let mut taus = Vec::new();
    for (i, theta) in [1.25, 1.5, 2.0, 3.0, 5.0].into_iter().enumerate() {
        let pairs = sample_gumbel_uniforms(theta, 20_000, SEED + 5000 + i as u64).unwrap();
        let est = kendall_tau(&pairs);
        let exact = GumbelCopula::new(theta).unwrap().kendall_tau();
        record(format!("kendall theta={theta}"), est.estimate, exact, est.standard_error);
        taus.push(format!("{:.3}", est.estimate));
    }
    let n = checks;
    // Under a correct sampler each comparison exceeds 3 SE with probability 0.0027.
    let p_out = 0.0027;
    Outcome::new(
        failures,
        format!(
            "{n} comparisons at 1e6 draws, max |z| = {worst:.2}, {:.2} beyond 3 SE expected by chance (P(none) = {:.2}); Kendall tau {}",
            n as f64 * p_out,
            (1.0 - p_out).powi(n),
            taus.join("/")
        ),
    )
}

fn low_frequency() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut count = 0;
    for p in [0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05] {
        for rho in linspace(0.1, 0.6, 11) {
            let m = BinaryMarginals::new(p, p).unwrap();
            let (c12, _) = conditionals_from_correlation(&m, rho).unwrap();
            let rel = (rho - c12).abs() / c12;
            count += 1;
            if rel > worst.0 {
                worst = (rel, p, rho);
            }
            if rel > 0.05 {
                failures.push(format!("p={p} rho={rho:.2}"));
            }
        }
    }
    let summary = format!(
        "{} of {count} grid points within 5%; worst relative gap {:.1}% at p={}, rho={:.2}",
        count - failures.len(),
        100.0 * worst.0,
        worst.1,
        worst.2
    );
    // Keep the line readable: report how many failed, not each point.
    let failures = if failures.is_empty() {
        failures
    } else {
        vec![format!("{} points (exact gap is p(1-rho), not proportional to P(e1|e2))", failures.len())]
    };
    Outcome::new(failures, summary)
}

fn degenerate() -> Outcome {
    let mut failures = Vec::new();

    for p1 in [0.01, 0.1, 0.3, 0.7] {
        for p2 in [0.02, 0.2, 0.5] {
            let m = BinaryMarginals::new(p1, p2).unwrap();
            let p12 = joint_prob_from_correlation(&m, 0.0).unwrap();
            if (p12 - p1 * p2).abs() > 1e-15 {
                failures.push(format!("rho=0 p12 {p1},{p2}"));
            }
        }
    }

    let mut are_dup = Vec::new();
    for (p, d) in [(0.05, 0.01), (0.2, 0.05), (0.4, 0.1)] {
        let input = design_input(p, p, d, d, 1.0, TestDesign::default(), VarianceVariant::Pooled).unwrap();
        let are = sizing_binary(&input).unwrap().are();
        are_dup.push(are);
        if (are - 1.0).abs() > 1e-6 {
            failures.push(format!("duplicate ARE {are}"));
        }
    }

    let indep = GumbelCopula::new(1.0).unwrap();
    let grid = linspace(0.01, 0.99, 25);
    let max_gap = grid
        .iter()
        .flat_map(|&u| grid.iter().map(move |&v| (indep.cdf(u, v) - u * v).abs()))
        .fold(0.0, f64::max);
    if max_gap > 1e-12 {
        failures.push(format!("theta=1 gap {max_gap:e}"));
    }

    // Identical margins and effects coupled on the survival scale.
    let mut diag_gap: f64 = 0.0;
    for (p, k, hr, rho) in [(0.1, 1.0, 0.7, 0.5), (0.2, 2.0, 0.8, 0.3), (0.05, 0.5, 0.6, 0.8)] {
        let s = SurvivalScenario::new(p, p, k, k, hr, hr, rho, 1.0, false, CopulaOrientation::Survival, TestDesign::default())
            .unwrap();
        let law = build_composite_law(&s).unwrap();
        let ph = ph_diagnostic(&law, 1.0, 50).unwrap();
        let hr_eff = effective_hr(&law).unwrap();
        let p_star = 1.0 - (1.0 - p).powf(2f64.powf(1.0 / law.theta()));
        let are = are_survival(&s).unwrap();
        diag_gap = diag_gap.max((are - p_star / p).abs());
        if ph.non_proportionality_index > 1e-9 || (hr_eff - hr).abs() > 1e-9 {
            failures.push(format!("diagonal HR* not constant at p={p}"));
        }
        if (are - p_star / p).abs() > 1e-6 {
            failures.push(format!("diagonal ARE {are} vs p*/p1 {}", p_star / p));
        }
    }

    Outcome::new(
        failures,
        format!(
            "rho=0 exact; duplicate ARE {}; theta=1 gap {max_gap:.1e}; diagonal ARE-p*/p1 gap {diag_gap:.1e}",
            are_dup.iter().map(|a| format!("{a:.9}")).collect::<Vec<_>>().join("/")
        ),
    )
}

fn library_only() -> Outcome {
    // This target links the core library alone; the shipped scenario files
    // must evaluate through it.
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    let mut failures = Vec::new();
    let mut n = 0;
    for name in ["tuxedo.json", "tuxedo_weak.json", "tuxedo_moderate.json", "tuxedo_strong.json", "oasis6.json"] {
        n += 1;
        let ok = std::fs::read_to_string(format!("{dir}/{name}"))
            .ok()
            .and_then(|t| ScenarioSpec::from_json(&t).ok())
            .and_then(|s| evaluate_spec(&s).ok())
            .is_some();
        if !ok {
            failures.push(name.to_string());
        }
    }
    Outcome::new(failures, format!("{n} bundled scenarios evaluated with the core library only"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("binary-case-probabilities", binary_case_probabilities),
        ("binary-case-sample-sizes", binary_case_sample_sizes),
        ("survival-case-are", survival_case_are),
        ("survival-case-sample-sizes", survival_case_sample_sizes),
        ("monotonicity", monotonicity),
        ("oracle-equivalence", oracle_equivalence),
        ("low-frequency-approximation", low_frequency),
        ("degenerate-identities", degenerate),
        ("library-only", library_only),
    ];
    let mut unexpected = Vec::new();
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name} [{:.1}s]: {}", start.elapsed().as_secs_f64(), outcome.detail);
        if !outcome.pass && !KNOWN_RED.contains(&name) {
            unexpected.push(name);
        }
        if outcome.pass && KNOWN_RED.contains(&name) {
            println!("note: {name} is listed as known red but passed");
        }
        if name == "monotonicity" {
            println!("note: ARE over rho for the other reference hazard patterns: {}", monotonicity_other_shapes());
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
