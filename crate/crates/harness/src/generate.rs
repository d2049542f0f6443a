//! Seeded random desk-scale instances within the oracle caps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// A chain of 2 or 3 cells joined by switches, 1 to 3 faults inside the
/// cells, a substation in the first cell, optional DERs, one router per
/// remote switch with a direct link to the control centre, and up to two
/// RES with an integer budget.
pub fn random_instance(seed: u64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = rng.gen_range(2..=3usize);
    let per_cell = 2usize;
    let spacing = 600.0;

    let mut nodes = Vec::new();
    let mut lines = Vec::new();
    let mut internal = Vec::new();
    for c in 0..cells {
        for k in 0..per_cell {
            let i = c * per_cell + k;
            let load = if i == 0 { 0.0 } else { f64::from(rng.gen_range(2..=8u32)) * 10.0 };
            nodes.push(json!({
                "id": format!("n{i}"),
                "x": i as f64 * spacing,
                "y": 0.0,
                "load": load,
                "critical": i > 0 && rng.gen_bool(0.4),
            }));
            if k > 0 {
                internal.push(lines.len());
                lines.push(json!({
                    "id": format!("l{}_{i}", i - 1),
                    "from": format!("n{}", i - 1), "to": format!("n{i}"),
                    "r": 0.3, "x": 0.3, "p_max": 400, "q_max": 400,
                }));
            }
        }
        if c + 1 < cells {
            let a = c * per_cell + per_cell - 1;
            let kind = if rng.gen_bool(0.5) { "RCS" } else { "MS" };
            lines.push(json!({
                "id": format!("s{a}_{}", a + 1),
                "from": format!("n{a}"), "to": format!("n{}", a + 1),
                "r": 0.3, "x": 0.3, "p_max": 400, "q_max": 400,
                "switch": kind,
            }));
        }
    }
    // faults on internal lines of the non-substation cells first
    let mut fault_lines: Vec<usize> = internal.iter().copied().skip(1).collect();
    let faults = rng.gen_range(1..=fault_lines.len().min(3));
    while fault_lines.len() > faults {
        let k = rng.gen_range(0..fault_lines.len());
        fault_lines.remove(k);
    }
    for &l in &fault_lines {
        lines[l]["damaged"] = json!(true);
    }

    let last = cells * per_cell - 1;
    let mut sources = vec![json!({"id": "sub", "kind": "substation", "node": "n0", "p_max": 600, "q_max": 600})];
    if rng.gen_bool(0.6) {
        sources.push(json!({
            "id": "gt", "kind": "gt", "node": format!("n{last}"),
            "p_max": rng.gen_range(4..=8u32) * 10, "q_max": 40, "ramp_up": 40, "ramp_down": 40, "frr": 0.5,
        }));
    }
    let slots = rng.gen_range(6..=8usize);
    let res_count = rng.gen_range(0..=2usize);
    let mut res = Vec::new();
    for k in 0..res_count {
        let node = rng.gen_range(1..=last);
        let id = format!("pv{k}");
        sources.push(json!({"id": id, "kind": "res", "node": format!("n{node}"), "p_max": 60, "q_max": 20, "frr": 0.2}));
        let forecast: Vec<f64> = (0..slots).map(|_| f64::from(rng.gen_range(1..=6u32)) * 10.0).collect();
        let budget = if res_count == 2 { 1 } else { rng.gen_range(0..=2u32) };
        res.push(json!({"source": id, "forecast": forecast, "max_error": 0.3, "budget": budget}));
    }

    let mut repair_minutes = serde_json::Map::new();
    for &l in &fault_lines {
        repair_minutes.insert(lines[l]["id"].as_str().unwrap().to_string(), json!(rng.gen_range(2..=6u32) * 10));
    }
    let switch_ids: Vec<String> =
        lines.iter().filter(|l| l.get("switch").is_some()).map(|l| l["id"].as_str().unwrap().to_string()).collect();
    let operate: serde_json::Map<String, Value> =
        switch_ids.iter().map(|s| (s.clone(), json!(rng.gen_range(1..=3u32) * 5))).collect();
    let remote: serde_json::Map<String, Value> = lines
        .iter()
        .filter(|l| l.get("switch").and_then(Value::as_str) == Some("RCS"))
        .map(|l| (l["id"].as_str().unwrap().to_string(), json!(2)))
        .collect();

    let mut routers = vec![json!({"id": "cc", "role": "control-centre", "x": 900.0, "y": 400.0})];
    let mut links = serde_json::Map::new();
    for l in &lines {
        if l.get("switch").and_then(Value::as_str) == Some("RCS") {
            let id = format!("ftu-{}", l["id"].as_str().unwrap());
            routers.push(json!({
                "id": id, "role": "rcs-ftu", "x": 900.0, "y": 0.0,
                "node": l["to"], "switch": l["id"], "ups": rng.gen_range(2..=8u32) * 30,
            }));
            links.insert(id.clone(), json!([[id, "cc"]]));
        }
    }

    json!({
        "network": {
            "nominal_voltage": 4160, "v_min": 3952, "v_max": 4368,
            "nodes": nodes, "lines": lines, "sources": sources, "initially_energized": ["n0"],
        },
        "crews": {
            "speed_kmh": 30,
            "repair": [{"id": "RC1", "depot": [0.0, 0.0], "repair_minutes": repair_minutes}],
            "operating": [{"id": "OC1", "depot": [0.0, 0.0], "operate_minutes": operate}],
            "remote_minutes": remote,
        },
        "cyber": {"radius": 0, "routers": routers, "links": links},
        "uncertainty": {"bits": 3, "res": res},
        "horizon": {"slot_length": 30, "slots": slots},
    })
}
