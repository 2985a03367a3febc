//! Shared helpers for the integration suites: fixture loading and a seeded
//! generator of small random networks together with valid runs and observed
//! effects.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use rtcause::dsl::{parse_formula, parse_model, parse_run};
use rtcause::mitl::MitlFormula;
use rtcause::model::{action_successors, delay_successor, State};
use rtcause::rational::Rational;
use rtcause::runs::{
    evaluate_mitl_on_lasso, events_of_run, validate_run, LassoRun, ParsedRun, ParsedTail,
    RunStep,
};
use rtcause::Network;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks").join(name)
}

pub fn load_fixture(model: &str, run: &str) -> (Network, LassoRun) {
    let net = parse_model(&std::fs::read_to_string(fixture_path(model)).unwrap()).unwrap();
    let parsed = parse_run(&std::fs::read_to_string(fixture_path(run)).unwrap(), &net).unwrap();
    let lasso = validate_run(&net, &parsed).unwrap();
    (net, lasso)
}

/// A generated problem: a network, a maximal run of it, and an effect
/// observed on the run.
pub struct Instance {
    pub network: Network,
    pub run: LassoRun,
    pub effect: MitlFormula,
}

/// Draws `count` random instances; deterministic in the seed. Networks have
/// at most three components with closed integer difference-free constraints,
/// and runs carry between one and eight events.
pub fn random_instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        assert!(attempts < count * 500, "instance generator exhausted its attempt budget");
        if let Some(inst) = try_instance(&mut rng) {
            out.push(inst);
        }
    }
    out
}

fn random_model(rng: &mut ChaCha8Rng) -> String {
    let comps = rng.gen_range(1..=3usize);
    let mut src = String::new();
    let clocks: Vec<String> = (0..comps).map(|k| format!("c{k}")).collect();
    let _ = writeln!(src, "clock {};", clocks.join(", "));
    for k in 0..comps {
        let locs = rng.gen_range(2..=3usize);
        let _ = writeln!(src, "\nautomaton A{k} {{");
        for q in 0..locs {
            let init = if q == 0 { "init " } else { "" };
            let invariant = if q > 0 && rng.gen_bool(0.4) {
                format!(" invariant c{k} <= {};", rng.gen_range(1..=3))
            } else {
                String::new()
            };
            let _ = writeln!(src, "  {init}location q{q} {{{invariant} label p{k}q{q}; }}");
        }
        for _ in 0..rng.gen_range(2..=4usize) {
            let from = rng.gen_range(0..locs);
            let to = rng.gen_range(0..locs);
            let action = ["a", "b"].choose(rng).unwrap();
            let guard = if rng.gen_bool(0.5) {
                if rng.gen_bool(0.5) {
                    format!(" when c{k} >= {}", rng.gen_range(0..=2))
                } else {
                    format!(" when c{k} <= {}", rng.gen_range(1..=3))
                }
            } else {
                String::new()
            };
            let update = if rng.gen_bool(0.6) { format!(" do c{k} := 0") } else { String::new() };
            let _ = writeln!(src, "  edge q{from} -> q{to} on {action}{guard}{update};");
        }
        let _ = writeln!(src, "}}");
    }
    let names: Vec<String> = (0..comps).map(|k| format!("A{k}")).collect();
    let _ = writeln!(src, "\nsystem {};", names.join(", "));
    src
}

fn try_instance(rng: &mut ChaCha8Rng) -> Option<Instance> {
    let network = parse_model(&random_model(rng)).ok()?;
    let mut state = network.initial_state();
    // Reject initial deadlocks on the invariant.
    delay_successor(&state, &Rational::from_integer(0), &network).ok()?;

    let mut steps: Vec<RunStep> = Vec::new();
    let mut history: Vec<State> = vec![state.clone()];
    let mut parsed: Option<ParsedRun> = None;
    for _ in 0..10 {
        let mut delays = vec![0i64, 1, 2];
        delays.shuffle(rng);
        let mut fired = false;
        for d in delays {
            let delta = Rational::from_integer(d);
            let Ok(delayed) = delay_successor(&state, &delta, &network) else { continue };
            let succs = action_successors(&delayed, &network).ok()?;
            if succs.is_empty() {
                continue;
            }
            let (action, next) = succs.choose(rng).unwrap().clone();
            steps.push(RunStep { delay: delta, action });
            state = next;
            history.push(state.clone());
            fired = true;
            break;
        }
        if !fired {
            break;
        }
        // A revisited state closes a lasso, provided the loop takes time.
        if let Some(j) = history[..history.len() - 1].iter().position(|s| s == &state) {
            let period: Rational = steps[j..].iter().map(|s| s.delay).sum();
            if period > Rational::from_integer(0) {
                parsed = Some(ParsedRun {
                    prefix: steps[..j].to_vec(),
                    tail: ParsedTail::Loop(steps[j..].to_vec()),
                });
                break;
            }
        }
    }
    // No lasso: fall back to the longest validating finite run.
    let parsed = parsed.or_else(|| {
        for len in (0..=steps.len()).rev() {
            for tail in [ParsedTail::Idle, ParsedTail::Stuck] {
                let candidate = ParsedRun { prefix: steps[..len].to_vec(), tail };
                if validate_run(&network, &candidate).is_ok() {
                    return Some(candidate);
                }
            }
        }
        None
    })?;
    let run = validate_run(&network, &parsed).ok()?;
    let events = events_of_run(&run, &network);
    if events.is_empty() || events.len() > 8 {
        return None;
    }
    // The effect: eventually some label that the run visits.
    let mut seen: Vec<String> = run.states.iter().flat_map(|s| network.labels_of(&s.locs)).collect();
    seen.sort();
    seen.dedup();
    let label = seen.choose(rng)?.clone();
    let effect = parse_formula(&format!("F {label}"), Some(&network)).ok()?;
    if evaluate_mitl_on_lasso(&run, &network, &effect) != Ok(true) {
        return None;
    }
    Some(Instance { network, run, effect })
}
