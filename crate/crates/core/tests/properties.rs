mod common;

use common::*;
use proptest::prelude::*;
use restoration_core::instance::UncertaintySpec;
use restoration_core::*;
use serde_json::json;

fn spec(forecast: Vec<f64>, omega: f64, budget: f64) -> UncertaintySpec {
    let inst = load(&json!({
        "network": {
            "nominal_voltage": 4160, "v_min": 3952, "v_max": 4368,
            "nodes": [{"id": "n1", "x": 0, "y": 0}],
            "sources": [{"id": "pv", "kind": "res", "node": "n1", "p_max": 1000, "q_max": 100}]
        },
        "crews": {"speed_kmh": 30},
        "uncertainty": {"res": [{"source": "pv", "forecast": forecast.clone(), "max_error": omega, "budget": budget}]},
        "horizon": {"slot_length": 30, "slots": forecast.len()}
    }));
    inst.uncertainty
}

fn desk_variant(budget: f64, omega: f64) -> Instance {
    let mut d = doc("desk");
    d["uncertainty"]["res"][0]["budget"] = json!(budget);
    d["uncertainty"]["res"][0]["max_error"] = json!(omega);
    load(&d)
}

proptest! {
    #[test]
    fn deviation_scales_the_forecast(
        forecast in prop::collection::vec(0.0f64..500.0, 4),
        omega in 0.0f64..0.5,
        dev in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 4),
    ) {
        let spec = spec(forecast.clone(), omega, 8.0);
        let sigma = ScenarioRealization {
            up: vec![dev.iter().map(|d| d.0).collect()],
            down: vec![dev.iter().map(|d| d.1).collect()],
        };
        let avail = materialize_uncertainty(&spec, 4, &sigma).unwrap();
        for t in 0..4 {
            let expected = forecast[t] + omega * forecast[t] * (dev[t].0 - dev[t].1);
            prop_assert!((avail[0][t] - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn spending_beyond_the_budget_is_rejected(extra in 0.01f64..2.0, budget in 0.0f64..3.0) {
        let spec = spec(vec![100.0; 4], 0.3, budget);
        let mut sigma = ScenarioRealization::zero(1, 4);
        let total = (budget + extra).min(4.0);
        prop_assume!(total > budget + 1e-6);
        for t in 0..4 {
            sigma.down[0][t] = (total / 4.0).min(1.0);
        }
        prop_assert!(matches!(materialize_uncertainty(&spec, 4, &sigma), Err(SolveError::InvalidScenario(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn robust_solves_respect_budget_and_dominate_the_forecast(budget in 0u32..=3, omega in prop::sample::select(vec![0.1, 0.3, 0.5])) {
        let inst = desk_variant(f64::from(budget), omega);
        let (_, robust) = solve(&inst);
        prop_assert!(robust.converged);
        prop_assert!(robust.worst.spent(0) <= f64::from(budget) + 1e-9);
        for v in robust.worst.up.iter().chain(&robust.worst.down).flatten() {
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(v));
        }
        let (_, nominal) = solve(&desk_variant(f64::from(budget), 0.0));
        prop_assert!(robust.objective >= nominal.objective * (1.0 - 1e-3) - 1e-6);
        let mut lb = f64::NEG_INFINITY;
        for r in &robust.trace {
            prop_assert!(r.lower_bound >= lb - 1e-9);
            lb = r.lower_bound;
        }
    }
}
