//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use restoration_core::*;
use restoration_harness::cli;
use restoration_harness::generate::random_instance;
use restoration_harness::oracle::enumerate_oracle;
use restoration_harness::report::ScheduleReport;
use restoration_harness::validate::{check_radiality, validate_schedule};
use serde_json::json;

type Outcome = Result<String, String>;

struct Solved {
    name: String,
    inst: Instance,
    report: ScheduleReport,
    elapsed: Duration,
}

fn solved(name: impl Into<String>, inst: Instance) -> Solved {
    let start = Instant::now();
    let report = solve(&inst);
    Solved { name: name.into(), inst, report, elapsed: start.elapsed() }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn with_res(name: &str, f: impl Fn(&mut serde_json::Value)) -> Instance {
    let mut d = doc(name);
    for r in d["uncertainty"]["res"].as_array_mut().unwrap() {
        f(r);
    }
    load(&d)
}

fn oracle_equivalence(random: &[Solved]) -> Outcome {
    for s in random {
        let start = Instant::now();
        let oracle = enumerate_oracle(&s.inst, &HighsBackend).map_err(|e| format!("{}: {e}", s.name))?;
        let total = s.elapsed + start.elapsed();
        let gap = relative_gap(s.report.objective, oracle.objective);
        ensure(gap <= 1e-3 + 1e-6, || {
            format!("{}: ccg {} vs oracle {} ({:.4}%)", s.name, s.report.objective, oracle.objective, gap * 100.0)
        })?;
        ensure(total < Duration::from_secs(60), || format!("{}: {total:?}", s.name))?;
    }
    Ok(format!("{} fixtures within 0.1%", random.len()))
}

fn deterministic_collapse() -> Outcome {
    for name in ["desk", "res-budget"] {
        let r = solve(&with_res(name, |r| r["max_error"] = json!(0.0)));
        ensure(r.converged && r.iterations <= 2 && r.gap <= 1e-3, || {
            format!("{name}: converged {} after {} iterations, gap {}", r.converged, r.iterations, r.gap)
        })?;
    }
    Ok("omega = 0 converges in at most 2 iterations".into())
}

fn bound_monotonicity(all: &[Solved]) -> Outcome {
    for s in all {
        let mut lb = f64::NEG_INFINITY;
        let mut ub = f64::INFINITY;
        for r in &s.report.trace {
            ensure(r.lower_bound >= lb - 1e-9, || format!("{}: LB decreased at iteration {}", s.name, r.iteration))?;
            lb = r.lower_bound;
            if let Some(u) = r.upper_bound {
                ensure(u <= ub + 1e-9, || format!("{}: UB increased at iteration {}", s.name, r.iteration))?;
                ub = u;
            }
            ensure(lb <= ub + 1e-6 * ub.abs().max(1.0), || format!("{}: LB above UB at iteration {}", s.name, r.iteration))?;
        }
    }
    Ok(format!("{} traces monotone", all.len()))
}

fn spot_checks(spot: &Solved) -> Outcome {
    let inst = &spot.inst;
    let d = &spot.report.decision;
    let ftu = inst.cyber.routers.iter().position(|r| r.id == "ftu25").unwrap();
    let ups: Vec<u8> = (1..=inst.slots()).map(|t| u8::from(t <= 10)).collect();
    ensure(d.ups_alive[ftu] == ups, || format!("UPS timeline {:?}", d.ups_alive[ftu]))?;

    let check = validate_schedule(inst, d, &spot.report.worst, &HighsBackend).map_err(|e| e.to_string())?;
    let ev = &check.events;
    let rcs = line_switch(inst, "l25");
    ensure(ev.switch_clear[rcs] == Some(182.0), || format!("l25 clearing {:?}", ev.switch_clear[rcs]))?;
    ensure(ev.remote_close[rcs] == Some(184.0), || format!("l25 remote close {:?}", ev.remote_close[rcs]))?;
    ensure(inst.horizon.first_slot(184.0) == Some(8), || "first remote slot".into())?;
    let mut early = d.clone();
    for t in 1..=inst.slots() {
        early.closed_remotely[rcs][t - 1] = u8::from(t >= 7);
        early.closed[rcs][t - 1] = u8::from(t >= 7) | early.closed_manually[rcs][t - 1];
    }
    let flagged = validate_schedule(inst, &early, &spot.report.worst, &HighsBackend).map_err(|e| e.to_string())?;
    ensure(flagged.violations.iter().any(|v| v.family == "remote-close" && v.slot == Some(7)), || {
        "remote close in slot 7 not flagged".into()
    })?;

    let ms = line_switch(inst, "l23");
    let oc = inst.oc_depot_travel(0, ms);
    ensure((oc - 11.0).abs() < 0.5, || format!("OC depot travel to l23 {oc}"))?;
    ensure(ev.switch_clear[ms] == Some(232.0), || format!("l23 clearing {:?}", ev.switch_clear[ms]))?;
    let visit = ev.operating_itineraries.iter().flatten().find(|v| v.task == ms).ok_or("l23 not visited")?;
    ensure(visit.start == visit.arrival.max(232.0) && visit.start == 232.0 && visit.finish == 242.0, || {
        format!("l23 visit {visit:?}")
    })?;
    ensure(d.closed_manually[ms].iter().position(|&b| b == 1) == Some(9), || "l23 not closed from slot 10".into())?;
    Ok("UPS slots 1-10, remote close 184 (slot 8), MS 232-242 (slot 10)".into())
}

fn budget_enforcement(all: &[Solved], res_budget: &Solved) -> Outcome {
    for s in all {
        for (i, r) in s.inst.uncertainty.res.iter().enumerate() {
            let spent = s.report.worst.spent(i);
            ensure(spent <= r.budget + 1e-9, || format!("{}: spent {spent} > {}", s.name, r.budget))?;
        }
    }
    let spent = res_budget.report.worst.spent(0);
    ensure((spent - 5.0).abs() <= 1e-6, || format!("res-budget spent {spent} of 5"))?;
    Ok(format!("all within budget; res-budget spends {spent:.6} of 5"))
}

fn validator_equivalence(all: &[Solved]) -> Outcome {
    for s in all {
        let check = validate_schedule(&s.inst, &s.report.decision, &s.report.worst, &HighsBackend).map_err(|e| e.to_string())?;
        ensure(check.violations.is_empty(), || format!("{}: {:?}", s.name, check.violations))?;
        let obj = check.objective().ok_or_else(|| format!("{}: no operation", s.name))?;
        let gap = relative_gap(obj, s.report.upper_bound);
        ensure(gap <= 1e-6, || format!("{}: validated {obj} vs UB {}", s.name, s.report.upper_bound))?;
    }
    Ok(format!("{} schedules reproduce UB within 1e-6", all.len()))
}

fn radiality(all: &[Solved]) -> Outcome {
    for s in all {
        let d = &s.report.decision;
        let v = check_radiality(&s.inst, d);
        ensure(v.is_empty(), || format!("{}: {v:?}", s.name))?;
        for t in 0..s.inst.slots() {
            let closed: usize = d.closed.iter().map(|w| usize::from(w[t])).sum();
            let roots: usize = d.root.iter().map(|r| usize::from(r[t])).sum();
            ensure(closed + roots == s.inst.cells.len(), || format!("{}: slot {} count", s.name, t + 1))?;
        }
    }
    Ok(format!("{} schedules radial in every slot", all.len()))
}

fn cyber_delayed(inst: &Instance, until: usize) -> Result<f64, String> {
    let mut cm = assemble_compact(inst).map_err(|e| e.to_string())?;
    for slots in cm.layout.cyber.avail.clone().into_iter().flatten() {
        for (k, v) in slots.into_iter().enumerate() {
            if k + 1 < until {
                cm.builder.vars[v.0].ub = 0.0;
            }
        }
    }
    let r = ccg_solve(inst, &cm, &CcgParams::default(), &HighsBackend).map_err(|e| e.to_string())?;
    ensure(r.converged, || "delayed-cyber solve did not converge".into())?;
    Ok(r.objective)
}

fn directional(desk: &Solved) -> Outcome {
    let full = desk.report.objective;
    let mut d = doc("desk");
    d["network"]["sources"].as_array_mut().unwrap().retain(|s| s["kind"] == "substation");
    d["uncertainty"]["res"] = json!([]);
    let no_der = solve(&load(&d)).objective;
    let no_cyber = cyber_delayed(&desk.inst, 10)?;
    ensure(no_der > full, || format!("no DERs {no_der} vs full {full}"))?;
    ensure(no_cyber > full, || format!("cyber from slot 10 {no_cyber} vs full {full}"))?;
    Ok(format!("full {full:.0} < no DERs {no_der:.0}, cyber from slot 10 {no_cyber:.0}"))
}

fn robust_dominance(all: &[Solved]) -> Outcome {
    for s in all {
        let mut nominal = s.inst.clone();
        for r in &mut nominal.uncertainty.res {
            r.max_error = 0.0;
        }
        let det = solve(&nominal).objective;
        ensure(s.report.objective >= det * (1.0 - 1e-3) - 1e-6, || {
            format!("{}: robust {} < deterministic {det}", s.name, s.report.objective)
        })?;
    }
    for (name, budgets) in [("desk", vec![0.0, 1.0, 2.0, 3.0]), ("res-budget", vec![0.0, 2.0, 5.0])] {
        let mut last = f64::NEG_INFINITY;
        for b in budgets {
            let obj = solve(&with_res(name, |r| r["budget"] = json!(b))).objective;
            ensure(obj >= last * (1.0 - 1e-3) - 1e-6, || format!("{name}: B = {b} gives {obj} < {last}"))?;
            last = obj;
        }
    }
    Ok("robust >= deterministic; objective nondecreasing in B".into())
}

fn run_solve(dir: &std::path::Path) -> Result<Vec<u8>, String> {
    let args = ["restore", "--out", dir.to_str().unwrap(), "solve", &fixture_path("desk")];
    let code = cli::run(args, &mut Vec::new(), &mut Vec::new());
    ensure(code == 0, || format!("exit {code}"))?;
    std::fs::read(dir.join("report.json")).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_solve(a.path())?;
    let second = run_solve(b.path())?;
    ensure(first == second, || "report.json differs between runs".into())?;
    Ok(format!("{} identical bytes", first.len()))
}

fn main() {
    let desk = solved("desk", fixture("desk"));
    let spot = solved("spot", fixture("spot"));
    let res_budget = solved("res-budget", fixture("res-budget"));
    let random: Vec<Solved> = (0..6).map(|s| solved(format!("seed{s}"), load(&random_instance(s)))).collect();

    let mut all: Vec<&Solved> = vec![&desk, &spot, &res_budget];
    all.extend(random.iter());
    let all: Vec<Solved> = all
        .into_iter()
        .map(|s| Solved { name: s.name.clone(), inst: s.inst.clone(), report: s.report.clone(), elapsed: s.elapsed })
        .collect();
    let oracle_set: Vec<Solved> = std::iter::once(&desk)
        .chain(random.iter())
        .map(|s| Solved { name: s.name.clone(), inst: s.inst.clone(), report: s.report.clone(), elapsed: s.elapsed })
        .collect();

    let results: Vec<(&str, Outcome)> = vec![
        ("oracle equivalence", oracle_equivalence(&oracle_set)),
        ("deterministic collapse", deterministic_collapse()),
        ("bound monotonicity", bound_monotonicity(&all)),
        ("spot checks", spot_checks(&spot)),
        ("budget enforcement", budget_enforcement(&all, &res_budget)),
        ("validator equivalence", validator_equivalence(&all)),
        ("radiality", radiality(&all)),
        ("directional benchmarks", directional(&desk)),
        ("robust dominance", robust_dominance(&all)),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (k, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", k + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
