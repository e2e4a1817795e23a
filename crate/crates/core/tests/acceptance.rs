//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use kwprep::cellulation::Cellulation;
use kwprep::groups::catalog;
use kwprep::groups::{
    derived_series, extension_from_factor_system, factor_system_of, is_isomorphic, normal_subgroups, FiniteGroup,
};
use kwprep::kwmaps::{kw_exact_g, random_symmetric_vertices, KwMode};
use kwprep::protocols::{gauge_input_state, prepare_abelian_double, prepare_nil2_double, prepare_solvable_double};
use kwprep::verify::{
    commuting_pair_orbits, ground_state_degeneracy, nil2_syndrome_deviation, oracle_double_state, run_identity_suite,
    stabilizer_report, IDENTITY_TOL,
};

const STAB_TOL: f64 = 1e-9;
const FID_TOL: f64 = 1e-9;
const FID_TOL_S4: f64 = 1e-8;

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn group(name: &str) -> Arc<FiniteGroup> {
    catalog::by_name(name).unwrap().group
}

fn within(elapsed: Duration, secs: f64) -> bool {
    elapsed.as_secs_f64() < secs
}

fn toric_code_one_shot() -> Outcome {
    let t0 = Instant::now();
    let z2 = group("Z2");
    let cell = Cellulation::square_torus(2, 2).unwrap();
    let oracle = oracle_double_state(&z2, &cell).unwrap();
    let (mut worst_stab, mut worst_fid, mut shots_ok) = (0.0f64, 0.0f64, true);
    for seed in 0..20 {
        let t = prepare_abelian_double(&z2, &cell, &KwMode::Sample(seed)).unwrap();
        shots_ok &= t.shots == 1;
        let r = stabilizer_report(&t.register, &z2, &cell, false, false).unwrap();
        shots_ok &= r.vertex.len() + r.plaquette.len() == 8;
        for x in r.vertex.iter().chain(&r.plaquette) {
            worst_stab = worst_stab.max((1.0 - x).abs());
        }
        worst_fid = worst_fid.max(1.0 - t.register.fidelity(&oracle).unwrap());
    }
    let dt = t0.elapsed();
    check(
        shots_ok && worst_stab <= STAB_TOL && worst_fid <= FID_TOL && within(dt, 1.0),
        format!("20 seeds, max |1-<S>| {worst_stab:.1e}, max 1-F {worst_fid:.1e}, {:.2}s", dt.as_secs_f64()),
    )
}

fn one_shot_nonabelian() -> Outcome {
    let t0 = Instant::now();
    let cell = Cellulation::hexagon_torus();
    let mut parts = Vec::new();
    let mut passed = true;
    for fs in [catalog::d4_factor_system(), catalog::q8_factor_system()] {
        let g = fs.parent().clone();
        let oracle = oracle_double_state(&g, &cell).unwrap();
        let (mut worst_fid, mut worst_syn, mut shots_ok) = (0.0f64, 0.0f64, true);
        for seed in 0..20 {
            let t = prepare_nil2_double(&fs, &cell, &KwMode::Sample(seed)).unwrap();
            shots_ok &= t.shots == 1;
            let pre = t.pre_correction.as_ref().unwrap();
            worst_syn = worst_syn.max(nil2_syndrome_deviation(pre, &fs, &cell, &t.rounds[0].outcomes).unwrap());
            worst_fid = worst_fid.max(1.0 - t.register.fidelity(&oracle).unwrap());
        }
        passed &= shots_ok && worst_fid <= FID_TOL && worst_syn <= STAB_TOL;
        // same protocol on a sphere, where the ground state is unique; reported only
        let sphere = Cellulation::polygon_sphere(3).unwrap();
        let sphere_oracle = oracle_double_state(&g, &sphere).unwrap();
        let mut sphere_fid = 0.0f64;
        for seed in 0..20 {
            let t = prepare_nil2_double(&fs, &sphere, &KwMode::Sample(seed)).unwrap();
            sphere_fid = sphere_fid.max(1.0 - t.register.fidelity(&sphere_oracle).unwrap());
        }
        parts.push(format!(
            "{}: max 1-F {worst_fid:.3e}, syndrome dev {worst_syn:.1e} (sphere control 1-F {sphere_fid:.1e})",
            g.name()
        ));
    }
    let dt = t0.elapsed();
    passed &= within(dt, 5.0);
    check(passed, format!("{}, {:.2}s", parts.join("; "), dt.as_secs_f64()))
}

fn solvable_shots() -> Outcome {
    let cell = Cellulation::hexagon_torus();
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, want_shots, tol, budget) in [("S3", 2, FID_TOL, f64::INFINITY), ("S4", 3, FID_TOL_S4, 60.0)] {
        let t0 = Instant::now();
        let g = group(name);
        let oracle = oracle_double_state(&g, &cell).unwrap();
        let (mut worst_fid, mut shots_ok) = (0.0f64, true);
        for seed in 0..5 {
            let t = prepare_solvable_double(&g, &cell, &KwMode::Sample(seed)).unwrap();
            shots_ok &= t.shots == want_shots;
            worst_fid = worst_fid.max(1.0 - t.register.fidelity(&oracle).unwrap());
        }
        let dt = t0.elapsed();
        passed &= shots_ok && worst_fid <= tol && within(dt, budget);
        parts.push(format!("{name}: shots {want_shots}, max 1-F {worst_fid:.1e}, {:.2}s", dt.as_secs_f64()));
    }
    check(passed, parts.join("; "))
}

fn identity_suite() -> Outcome {
    let t0 = Instant::now();
    let rows = run_identity_suite(
        &catalog::identity_suite_groups(),
        &[Cellulation::single_edge(), Cellulation::hexagon_torus()],
    )
    .unwrap();
    let dt = t0.elapsed();
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{} {} {} {:.3e}", r.id, r.group, r.graph, r.deviation))
        .collect();
    let worst_passing = rows.iter().filter(|r| r.passed()).map(|r| r.deviation).fold(0.0, f64::max);
    let mut detail = format!(
        "{} rows, {} over {IDENTITY_TOL:e}, worst passing {worst_passing:.1e}, {:.2}s",
        rows.len(),
        failed.len(),
        dt.as_secs_f64()
    );
    if !failed.is_empty() {
        detail += &format!(" [{}]", failed.join("; "));
    }
    check(failed.is_empty() && within(dt, 30.0), detail)
}

fn symmetric_inputs() -> Outcome {
    let t0 = Instant::now();
    let cell = Cellulation::hexagon_torus();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let groups = catalog::identity_suite_groups();
    for g in &groups {
        for seed in 0..50u64 {
            let input = random_symmetric_vertices(&cell, g, 0, seed).unwrap();
            let want = kw_exact_g(&input, &cell, g, 0).unwrap();
            let t = gauge_input_state(input, g, None, &cell, &KwMode::Sample(1000 + seed)).unwrap();
            let d = 1.0 - t.register.fidelity(&want).unwrap();
            if d > worst {
                worst = d;
                worst_at = format!(" at {} seed {seed}", g.name());
            }
        }
    }
    check(
        worst <= FID_TOL,
        format!(
            "{} groups x 50 states, max 1-F {worst:.1e}{worst_at}, {:.2}s",
            groups.len(),
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn gsd_integers() -> Outcome {
    let cell = Cellulation::hexagon_torus();
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, want) in [("Z2", 4), ("Z3", 9), ("S3", 8), ("D4", 22)] {
        let g = group(name);
        let rank = ground_state_degeneracy(&g, &cell).unwrap();
        let orbits = commuting_pair_orbits(&g);
        passed &= rank == orbits && orbits == want;
        parts.push(format!("{name} {rank}/{orbits}"));
    }
    check(passed, format!("projector rank / pair orbits: {}", parts.join(", ")))
}

fn group_theory() -> Outcome {
    let mut passed = true;
    let mut pairs = 0;
    let names = ["Z2", "Z3", "Z6", "Z2xZ2", "S3", "D4", "Q8", "A4", "S4", "A5"];
    for name in &names {
        let g = group(name);
        for n in normal_subgroups(&g) {
            let fs = factor_system_of(&g, &n).unwrap();
            let rebuilt = extension_from_factor_system(&fs).unwrap();
            passed &= is_isomorphic(&rebuilt, &g);
            let (nn, q) = (fs.n_group(), fs.q_group());
            for q1 in q.elements() {
                for q2 in q.elements() {
                    for q3 in q.elements() {
                        let lhs = nn.mul(fs.omega(q1, q2), fs.omega(q.mul(q1, q2), q3));
                        let rhs = nn.mul(fs.sigma(q1, fs.omega(q2, q3)), fs.omega(q1, q.mul(q2, q3)));
                        passed &= lhs == rhs;
                    }
                }
            }
            pairs += 1;
        }
    }
    let want = [("Z2", 1), ("Z6", 1), ("Z2xZ2", 1), ("S3", 2), ("D4", 2), ("Q8", 2), ("A4", 2), ("S4", 3)];
    for (name, l) in want {
        passed &= derived_series(&group(name)).derived_length == Some(l);
    }
    let a5 = group("A5");
    let ds = derived_series(&a5);
    passed &= !ds.is_solvable() && ds.perfect_core().is_whole();
    let err = prepare_solvable_double(&a5, &Cellulation::hexagon_torus(), &KwMode::PostselectPlus).unwrap_err();
    let msg = err.to_string();
    passed &= msg.contains("perfect core A5");
    check(passed, format!("{pairs} (G,N) round trips with cocycle check; A5 rejected: \"{msg}\""))
}

fn cli_determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_kwprep");
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 2] = [
        &["prepare", "--group", "D4", "--cell", "hexagon", "--protocol", "nil2", "--mode", "sample:42", "--runs", "6"],
        &[
            "prepare",
            "--group",
            "S3",
            "--cell",
            "hexagon",
            "--protocol",
            "solvable",
            "--mode",
            "sample:7",
            "--runs",
            "6",
            "--oracle",
        ],
    ];
    let mut passed = true;
    let mut runs = 0;
    for (c, args) in cases.iter().enumerate() {
        let mut reference: Option<Vec<u8>> = None;
        for (k, workers) in ["1", "2", "4", "1", "3"].iter().enumerate() {
            let out = dir.path().join(format!("case{c}_{k}.json"));
            let status =
                Command::new(exe).args(*args).args(["--workers", workers, "--out"]).arg(&out).status().unwrap();
            passed &= status.code() == Some(0);
            let bytes = std::fs::read(&out).unwrap();
            match &reference {
                None => reference = Some(bytes),
                Some(r) => passed &= *r == bytes,
            }
            runs += 1;
        }
    }
    check(passed, format!("{runs} CLI runs over 1-4 worker threads, reports byte-identical per config"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("toric code in one shot", toric_code_one_shot),
        ("one-shot D4 and Q8 doubles", one_shot_nonabelian),
        ("two-shot S3 and three-shot S4", solvable_shots),
        ("operator identity suite", identity_suite),
        ("gauging symmetric inputs", symmetric_inputs),
        ("ground-state degeneracy", gsd_integers),
        ("group theory", group_theory),
        ("CLI determinism", cli_determinism),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.passed {
            failures += 1;
        }
        println!("criterion {} {:<32} {} | {}", k + 1, name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
