//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails. Positional arguments filter the
//! criteria by substring.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use critflow::analysis::{brezis_lieb_check, spectral_gap_slack, talenti_bubble};
use critflow::flow::{extract_ps, FlowTrace, Terminal};
use critflow::functionals::{eval_i, eval_quotient, grad_i, grad_quotient, ProblemData};
use critflow::mesh::{inner_h1, integrate_power, norm_h1, Coefficient, DomainMesh, Field};
use critflow::scalar::sobolev_constant;
use critflow::scenario::{run_scenario, RunOptions, Scenario, ScenarioOutcome};
use critflow::spectral::{compute_eigenbasis, spectral_gap_constant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PI: f64 = std::f64::consts::PI;

type Verdict = Result<String, String>;

fn outcome(name: &str) -> ScenarioOutcome {
    let scenario = Scenario::load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
    run_scenario(&scenario, &RunOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn supercritical() -> &'static ScenarioOutcome {
    static CELL: OnceLock<ScenarioOutcome> = OnceLock::new();
    CELL.get_or_init(|| outcome("bn-ball-supercritical-mu"))
}

fn supercritical_data() -> &'static ProblemData<f64> {
    static CELL: OnceLock<ProblemData<f64>> = OnceLock::new();
    CELL.get_or_init(|| {
        Scenario::load("bn-ball-supercritical-mu").unwrap().prepare().unwrap().data
    })
}

/// Σ c_k cos((k − ½)πr) with c_k uniform in [−1, 1], zero at r = 1.
fn random_radial(mesh: &Arc<DomainMesh<f64>>, rng: &mut ChaCha8Rng, modes: usize) -> Field<f64> {
    let c: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::radial_profile(mesh, &[0.0; 3], |r| {
        c.iter().enumerate().map(|(k, ck)| ck * ((k as f64 + 0.5) * PI * r).cos()).sum()
    })
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trace_invariants(trace: &FlowTrace<f64>, l_est: f64) -> (bool, String) {
    let s = trace.summary();
    let min_j = trace.records.iter().map(|r| r.j).fold(f64::INFINITY, f64::min);
    let ok = s.max_norm_error <= 1e-12 && s.max_tangency <= 1e-9 && s.monotone && min_j >= l_est;
    let detail = format!(
        "{} iterates, max |‖η‖−1| {:.1e}, max tangency {:.1e}, monotone {}, min J − L_est {:.1e}",
        trace.records.len(),
        s.max_norm_error,
        s.max_tangency,
        s.monotone,
        min_j - l_est
    );
    (ok, detail)
}

fn flow_line_invariants() -> Verdict {
    let out = supercritical();
    let (ok, detail) = trace_invariants(&out.trace, out.report.constants.l_est);
    check(ok, detail)
}

fn rescaling_identities() -> Verdict {
    let data = supercritical_data();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
        let u = random_radial(data.mesh(), &mut rng, 6).scaled(scale);
        let c = extract_ps(data, &u).map_err(|e| format!("random field: {e}"))?;
        worst = worst.max(c.gradient_identity_error).max(c.energy_identity_error);
    }
    let candidates = &supercritical().report.candidates;
    let mut worst_candidate: f64 = 0.0;
    for c in candidates {
        worst_candidate = worst_candidate.max(c.gradient_identity_error).max(c.energy_identity_error);
    }
    check(
        worst <= 1e-10 && worst_candidate <= 1e-10 && !candidates.is_empty(),
        format!(
            "worst relative error {worst:.1e} over 20 random fields, {worst_candidate:.1e} over {} candidates",
            candidates.len()
        ),
    )
}

fn solution_recovery() -> Verdict {
    let out = supercritical();
    let r = &out.report;
    let u = &out.solution;
    let mesh = u.mesh();
    let oracle = common::ShootingSolution::solve(3, r.constants.mu, 1.0, 40_000);
    let profile = oracle.profile();
    let err = (0..mesh.len())
        .map(|i| (u.values()[i] - oracle.at(&profile, mesh.node_point(i)[0])).abs())
        .fold(0.0, f64::max)
        / oracle.peak;
    let i = r.solution.i_value;
    let c = &r.constants;
    let in_window = c.varpi <= i && i < c.c_sup;
    check(
        r.flow.summary.terminal == Terminal::PsConverged && r.solution.verified && err <= 1e-2 && in_window,
        format!(
            "terminal {}, verified {}, max-norm error {err:.2e} against u(0) = {:.6}, ϖ = {:.6} ≤ I = {i:.6} < c^∞ = {:.6}",
            r.flow.summary.terminal, r.solution.verified, oracle.peak, c.varpi, c.c_sup
        ),
    )
}

fn concentration_below_threshold() -> Verdict {
    let out = outcome("bn-ball-subcritical-mu");
    let h = out.solution.mesh().spacing();
    let last = out.trace.last();
    let s = sobolev_constant::<f64>(3);
    let rel = (last.j / s - 1.0).abs();
    let radius = last.half_energy_radius;
    check(
        out.trace.terminal == Terminal::Concentrated && rel <= 1e-2 && radius < 4.0 * h,
        format!(
            "terminal {}, J = {:.6} (|J/S − 1| = {rel:.1e}), half-energy radius {radius:.3e} = {:.2}h (needs < 4h)",
            out.trace.terminal,
            last.j,
            radius / h
        ),
    )
}

fn eigenvalues() -> Verdict {
    let ball = Arc::new(DomainMesh::<f64>::unit_ball(3, 2000).unwrap());
    let radial = compute_eigenbasis(&ball, 2).map_err(|e| e.to_string())?;
    let mu1 = radial.mu1() / (PI * PI) - 1.0;
    let gap = spectral_gap_constant(&radial).unwrap() / 0.75 - 1.0;
    let cube = Arc::new(DomainMesh::<f64>::unit_cube(48).unwrap());
    let full = compute_eigenbasis(&cube, 1).map_err(|e| e.to_string())?;
    let box_mu1 = full.mu1() / (3.0 * PI * PI) - 1.0;
    check(
        mu1.abs() <= 1e-3 && gap.abs() <= 1e-3 && box_mu1.abs() <= 1e-2,
        format!("ball μ₁/π² − 1 = {mu1:.1e}, gap/0.75 − 1 = {gap:.1e}, cube μ₁/3π² − 1 = {box_mu1:.1e}"),
    )
}

fn spectral_gap_inequality() -> Verdict {
    let ball = Arc::new(DomainMesh::<f64>::unit_ball(3, 2000).unwrap());
    let basis = compute_eigenbasis(&ball, 8).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let mut v = Field::zeros(&ball);
        for pair in &basis.pairs()[1..] {
            v = v.add_scaled(rng.gen_range(-1.0..1.0), &pair.vector).unwrap();
        }
        let v = v.scaled(1.0 / norm_h1(&v));
        worst = worst.min(spectral_gap_slack(&basis, &v).unwrap());
    }
    check(worst >= -1e-8, format!("smallest slack {worst:.3e} over 100 unit fields in span{{e₂..e₈}}"))
}

fn gradient_correctness() -> Verdict {
    let ball = Arc::new(DomainMesh::<f64>::unit_ball(3, 400).unwrap());
    let basis = compute_eigenbasis(&ball, 1).unwrap();
    let data = ProblemData::with_mu_fraction(Coefficient::Constant(1.0), 0.5, &basis, false).unwrap();
    let profiles: [fn(f64) -> f64; 5] = [
        |r| 1.0 - r * r,
        |r| 2.0 * (0.5 * PI * r).cos(),
        |r| (1.0 - r).powi(2) * (1.0 + 2.0 * r),
        |r| 1.0 / (0.1 + r * r) - 1.0 / 1.1,
        |r| 0.3 * (1.0 - r * r) * (1.0 + (3.0 * r).sin()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for profile in profiles {
        let u = Field::radial_profile(&ball, &[0.0; 3], profile);
        let gi = grad_i(&data, &u).unwrap();
        let gj = grad_quotient(&data, &u).unwrap();
        for _ in 0..20 {
            let v = random_radial(&ball, &mut rng, 6);
            let t = 1e-4 * norm_h1(&u) / norm_h1(&v);
            let plus = u.add_scaled(t, &v).unwrap();
            let minus = u.add_scaled(-t, &v).unwrap();
            let fd_i = (eval_i(&data, &plus).unwrap() - eval_i(&data, &minus).unwrap()) / (2.0 * t);
            let fd_j = (eval_quotient(&data, &plus).unwrap() - eval_quotient(&data, &minus).unwrap()) / (2.0 * t);
            let an_i = inner_h1(&gi, &v).unwrap();
            let an_j = inner_h1(&gj, &v).unwrap();
            worst = worst.max((fd_i - an_i).abs() / an_i.abs()).max((fd_j - an_j).abs() / an_j.abs());
        }
    }
    check(worst <= 1e-5, format!("worst relative mismatch {worst:.2e} over 5 bases × 20 directions"))
}

fn brezis_lieb_splitting() -> Verdict {
    let data = supercritical_data();
    let u = Field::radial_profile(data.mesh(), &[0.0; 3], |r| 1.0 - r * r);
    let errs = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&eps| brezis_lieb_check(data, &u, eps, &[0.0; 3]))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    check(
        errs.windows(2).all(|w| w[1] < w[0]),
        format!("errors {}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")),
    )
}

fn sobolev_cross_check() -> Verdict {
    let ball = Arc::new(DomainMesh::<f64>::unit_ball(3, 2000).unwrap());
    let s = sobolev_constant::<f64>(3);
    let smallest = 4.0 * ball.spacing();
    let mut eps = 0.2;
    let mut quotients = Vec::new();
    while eps >= smallest {
        let b = talenti_bubble(&ball, &[0.0; 3], eps).unwrap();
        let n = norm_h1(&b).powi(2);
        let d = integrate_power(&Coefficient::Constant(1.0), &b, 6.0).unwrap();
        quotients.push((eps, n / d.cbrt()));
        eps *= 0.5;
    }
    let (eps_last, q_last) = *quotients.last().unwrap();
    let rel = q_last / s - 1.0;
    check(
        quotients.windows(2).all(|w| w[1].1 < w[0].1) && rel.abs() <= 2e-2,
        format!(
            "{} scales from 0.2 to {eps_last:.2e}, quotient {:.4} → {q_last:.4}, S = {s:.6}, relative gap {rel:.2e}",
            quotients.len(),
            quotients[0].1
        ),
    )
}

fn example1_scenario() -> Verdict {
    let out = outcome("example1-theorem12");
    let r = &out.report;
    let t12 = r.theorem12.as_ref().ok_or("no first-eigenvalue report")?;
    let (invariants, detail) = trace_invariants(&out.trace, r.constants.l_est);
    let diagnosed = !r.flow.diagnostic.is_empty();
    check(
        t12.integral < 0.0 && t12.applicable && (r.solution.verified || diagnosed) && invariants,
        format!(
            "∫K e₁^(q+1) = {:.4}, applicable {}, terminal {}, verified {}; {detail}",
            t12.integral, t12.applicable, r.flow.summary.terminal, r.solution.verified
        ),
    )
}

fn determinism() -> Verdict {
    let mut differing = Vec::new();
    for name in ["bn-ball-supercritical-mu", "bn-ball-subcritical-mu", "example1-theorem12"] {
        let scenario = Scenario::load(name).unwrap();
        let a = run_scenario(&scenario, &RunOptions::default()).unwrap();
        let b = run_scenario(&scenario, &RunOptions { jobs: 3 }).unwrap();
        let csv = |o: &ScenarioOutcome| {
            let mut buf = Vec::new();
            o.trace.write_csv(&mut buf).unwrap();
            buf
        };
        if csv(&a) != csv(&b) || a.solution.values() != b.solution.values() {
            differing.push(name);
        }
    }
    check(
        differing.is_empty(),
        if differing.is_empty() {
            "3 scenarios, byte-identical traces across repeated runs".into()
        } else {
            format!("traces differ for {differing:?}")
        },
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("flow-line invariants", flow_line_invariants),
        ("rescaling identities", rescaling_identities),
        ("solution recovery", solution_recovery),
        ("concentration below the threshold", concentration_below_threshold),
        ("eigenvalues", eigenvalues),
        ("spectral gap inequality", spectral_gap_inequality),
        ("gradient correctness", gradient_correctness),
        ("Brezis-Lieb splitting", brezis_lieb_splitting),
        ("Sobolev constant", sobolev_cross_check),
        ("sign-changing coefficient at the first eigenvalue", example1_scenario),
        ("determinism", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}: {name}", k + 1);
        if !filters.is_empty() && !filters.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {label} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
