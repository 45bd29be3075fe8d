//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line.
//!
//! Timed sections hold a global lock so that budgets are measured without
//! contention from the other criteria.

use std::collections::BTreeSet;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use tamp::commit::{
    self, Behavior, CommitConfig, CommitStatus, CommitTemplate, StrategyProfile, UnveilError, Variant, ViewPhase,
};
use tamp::harness;
use tamp::mpc::{self, BooleanCircuit, Bb84Ot, IdealOt};
use tamp::quantum::{self, Bb84Attack, Bb84Params, Bb84Verdict, Certificate, ToyProtocol};
use tamp::rng::{seeded, trial_seed, TapeRng};
use tamp::sharing::{self, ChallengeSource, DealerBehavior, SecretValue, VssVerdict};
use tamp::structures::{self, MonotoneFamily, PlayerId, PlayerSet};

static SERIAL: Mutex<()> = Mutex::new(());

struct Outcome {
    number: u32,
    failures: Vec<String>,
    notes: Vec<String>,
    started: Instant,
    budget: Option<Duration>,
}

impl Outcome {
    fn new(number: u32, budget: Option<Duration>) -> Outcome {
        Outcome { number, failures: Vec::new(), notes: Vec::new(), started: Instant::now(), budget }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    fn finish(mut self) {
        let elapsed = self.started.elapsed();
        if let Some(budget) = self.budget {
            self.check(elapsed < budget, || format!("runtime {elapsed:.2?} over budget {budget:?}"));
        }
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!("criterion {}: {status} ({elapsed:.2?})", self.number);
        for n in &self.notes {
            line.push_str(&format!("; {n}"));
        }
        if let Some(first) = self.failures.first() {
            line.push_str(&format!("; first failure: {first}; {} failure(s) total", self.failures.len()));
        }
        println!("{line}");
        assert!(self.failures.is_empty(), "{line}");
    }
}

fn lit(s: &str) -> MonotoneFamily {
    s.parse().expect("valid literal")
}

/// Oracle: two members of the family (not only extremal sets) whose union
/// contains `target`, by scanning all subsets.
fn brute_two_cover(a: &MonotoneFamily, target: PlayerSet) -> bool {
    let n = a.n();
    let members: Vec<PlayerSet> = PlayerSet::all(n).filter(|s| a.contains(*s)).collect();
    members.iter().any(|x| members.iter().any(|y| x.union(*y).is_superset(target)))
}

fn brute_partial(a: &MonotoneFamily) -> bool {
    !brute_two_cover(a, PlayerSet::full(a.n()))
}

fn brute_robust(a: &MonotoneFamily) -> bool {
    let full = PlayerSet::full(a.n());
    full.members().all(|i| !brute_two_cover(a, full.remove(i)))
}

#[test]
fn criterion_1_structure_conditions() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(1, Some(Duration::from_secs(5)));
    let mut checked = 0;
    for n in 1..=5 {
        for t in 0..=n {
            let a = structures::threshold_structure(n, t).unwrap();
            let partial = structures::partially_robust_admissible(&a);
            let robust = structures::robust_admissible(&a);
            out.check(partial == (2 * t < n), || format!("threshold({n},{t}) partial={partial}"));
            out.check(robust == (2 * t + 1 < n), || format!("threshold({n},{t}) robust={robust}"));
            out.check(partial == brute_partial(&a), || format!("threshold({n},{t}) partial disagrees with enumeration"));
            out.check(robust == brute_robust(&a), || format!("threshold({n},{t}) robust disagrees with enumeration"));
            checked += 1;
        }
    }
    // Every structure on up to four players, against the same enumeration.
    let mut general = 0;
    for n in 1..=4 {
        for a in structures::all_adversary_structures(n).unwrap() {
            out.check(structures::partially_robust_admissible(&a) == brute_partial(&a), || format!("{} partial", a.literal()));
            out.check(structures::robust_admissible(&a) == brute_robust(&a), || format!("{} robust", a.literal()));
            general += 1;
        }
    }
    out.note(format!("{checked} threshold structures, {general} general structures"));
    out.finish();
}

fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[test]
fn criterion_2_vss_soundness() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(2, Some(Duration::from_secs(30)));
    let access = structures::dual_access(&structures::threshold_structure(3, 1).unwrap()).unwrap();
    let k = 8;
    let trials: u64 = 100_000;
    let secret = SecretValue::bit_value(true);
    let source = ChallengeSource::DesignatedVerifier { verifier: PlayerId(2), colluding: false };
    let bound = 0.5f64.powi(k as i32);
    let limit = bound + 3.0 * binomial_sigma(bound, trials);
    for (label, behavior) in [
        ("misdeal", DealerBehavior::Misdeal { player: PlayerId(1), tag: 0 }),
        ("adaptive", DealerBehavior::AdaptiveMisdeal { player: PlayerId(1), tag: 0 }),
    ] {
        let mut passed = 0u64;
        for i in 0..trials {
            let seed = trial_seed(2, i);
            let (_, _, verdict) = sharing::vss_deal(&secret, &access, k, behavior, source, &mut seeded(seed), &mut seeded(seed ^ u64::MAX)).unwrap();
            passed += (verdict == VssVerdict::Accept) as u64;
        }
        let freq = passed as f64 / trials as f64;
        out.check(freq <= limit, || format!("{label} dealer passed with frequency {freq}, limit {limit}"));
        out.note(format!("{label} pass frequency {freq:.5} (limit {limit:.5})"));
    }
    let mut honest = 0u64;
    for i in 0..trials {
        let seed = trial_seed(3, i);
        let (_, _, verdict) = sharing::vss_deal(&secret, &access, k, DealerBehavior::Honest, ChallengeSource::PublicCoin, &mut seeded(seed), &mut seeded(!seed)).unwrap();
        honest += (verdict == VssVerdict::Accept) as u64;
    }
    out.check(honest == trials, || format!("honest dealer passed {honest}/{trials}"));
    out.note(format!("honest {honest}/{trials}"));
    out.finish();
}

/// Structures with enumeration-sized instances on three and four players.
fn partial_suite() -> Vec<MonotoneFamily> {
    let mut suite: Vec<MonotoneFamily> = structures::all_adversary_structures(3)
        .unwrap()
        .into_iter()
        .filter(structures::partially_robust_admissible)
        .collect();
    for s in ["threshold(4,0)", "threshold(4,1)", "sets(4; 0 1)", "sets(4; 0 1, 2)", "sets(4; 0 1, 0 2, 0 3)", "sets(4; 0 1, 0 2, 1 2)", "sets(4; 0 1, 2, 3)"] {
        let a = lit(s);
        assert!(structures::partially_robust_admissible(&a), "{s}");
        suite.push(a);
    }
    suite
}

/// For one structure: every sender/receiver pair as oriented against each
/// maximal collusion, with the coalitions whose views must not depend on
/// the payload.
type Queries = Vec<(PlayerSet, ViewPhase)>;

fn concealing_queries(a: &MonotoneFamily) -> Vec<((PlayerId, PlayerId), Queries)> {
    let n = a.n();
    let mut per_pair: std::collections::BTreeMap<(u8, u8), BTreeSet<(u16, u8)>> = Default::default();
    for &m in a.extremal() {
        let post = structures::post_termination_secure(a, m).unwrap();
        for x in 0..n {
            for y in x + 1..n {
                let (s, r) = structures::choose_direction((PlayerId(x as u8), PlayerId(y as u8)), m);
                let entry = per_pair.entry((s.0, r.0)).or_default();
                for c in PlayerSet::all(n) {
                    if !c.is_empty() && a.contains(c) && !c.contains(s) {
                        entry.insert((c.bits(), 0));
                    }
                    if !c.is_empty() && post.contains(c) && !c.contains(s) {
                        entry.insert((c.bits(), 1));
                    }
                }
            }
        }
    }
    per_pair
        .into_iter()
        .map(|((s, r), qs)| {
            let qs = qs.into_iter().map(|(c, ph)| (PlayerSet(c), if ph == 0 { ViewPhase::DuringCommit } else { ViewPhase::AfterCommit })).collect();
            ((PlayerId(s), PlayerId(r)), qs)
        })
        .collect()
}

#[test]
fn criterion_3_concealing_exact() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(3, Some(Duration::from_secs(60)));
    let mut compared = 0;
    let mut templates = 0;
    for a in partial_suite() {
        for ((s, r), queries) in concealing_queries(&a) {
            let template = CommitTemplate {
                variant: Variant::Partial,
                config: CommitConfig::new(s, r, a.clone(), 1),
                strategies: StrategyProfile::honest(a.n()),
            };
            templates += 1;
            match commit::view_distributions(&template, &queries) {
                Ok(dists) => {
                    for d in dists {
                        compared += 1;
                        out.check(d.identical(), || format!("{} sender {s} receiver {r}: coalition {} {:?} sees the payload", a.literal(), d.coalition, d.phase));
                    }
                }
                Err(e) => out.check(false, || format!("{} ({s},{r}): {e}", a.literal())),
            }
        }
    }
    out.note(format!("{templates} instances, {compared} exact comparisons"));
    out.finish();
}

#[test]
fn criterion_4_binding() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(4, None);
    let mut attempts = 0u64;
    let mut rejected = 0u64;
    for a in partial_suite() {
        let n = a.n();
        for s in 0..n {
            let r = (s + 1) % n;
            let (s, r) = (PlayerId(s as u8), PlayerId(r as u8));
            for coalition in PlayerSet::all(n).filter(|c| c.contains(s) && a.contains(*c)) {
                let mut strategies = StrategyProfile::honest(n);
                for p in coalition.members().filter(|p| *p != s) {
                    strategies.set(p, Behavior::Colluder);
                }
                // The flip target is irrelevant to the engine; it only marks the sender as cheating.
                strategies.set(s, Behavior::UnveilFlipper(SecretValue::bit_value(false)));
                let config = CommitConfig::new(s, r, a.clone(), 1);
                let template = CommitTemplate { variant: Variant::Partial, config: config.clone(), strategies: strategies.clone() };
                let bits = commit::random_bits(&template).unwrap();
                for payload in [false, true] {
                    let m = SecretValue::bit_value(payload);
                    for tape in 0..1u64 << bits {
                        let session = commit::commit(Variant::Partial, &m, &config, &strategies, &mut TapeRng::new(tape, bits), false).unwrap();
                        assert_eq!(session.status, CommitStatus::Committed);
                        let tags = session.bundle.tags().len();
                        // Every announcement that opens to the other bit.
                        for announced in 0..1u64 << tags {
                            let values: Vec<SecretValue> = (0..tags).map(|t| SecretValue::bit_value((announced >> t) & 1 == 1)).collect();
                            let opened = values.iter().fold(session.mask.clone(), |acc, v| &acc ^ v);
                            if opened == m {
                                continue;
                            }
                            attempts += 1;
                            let mut attempt = session.clone();
                            match commit::unveil(&mut attempt, &values, &strategies) {
                                Err(UnveilError::Rejected { .. }) => rejected += 1,
                                other => out.check(false, || format!("{} coalition {coalition} opened {:?}", a.literal(), other)),
                            }
                        }
                    }
                }
            }
        }
    }
    out.check(attempts > 0 && attempts == rejected, || format!("{rejected}/{attempts} rejected"));
    out.note(format!("{rejected}/{attempts} flip attempts rejected"));
    out.finish();
}

fn robust_suite() -> Vec<MonotoneFamily> {
    let mut suite: Vec<MonotoneFamily> = Vec::new();
    for n in 3..=4 {
        for a in structures::all_adversary_structures(n).unwrap() {
            if structures::robust_admissible(&a) && a.extremal() != [PlayerSet::EMPTY] {
                suite.push(a);
            }
        }
    }
    suite
}

/// Threshold structures are symmetric under relabeling, so one
/// representative per orbit of (sender, receiver, complainers) suffices.
fn is_threshold(a: &MonotoneFamily) -> bool {
    let sizes: BTreeSet<usize> = a.extremal().iter().map(|s| s.len()).collect();
    sizes.len() == 1 && {
        let t = *sizes.iter().next().unwrap();
        structures::threshold_structure(a.n(), t).unwrap() == *a
    }
}

#[test]
fn criterion_5_robust_complaint_loop() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(5, None);
    let mut instances = 0;
    let mut compared = 0;
    let mut leaks = Vec::new();
    for a in robust_suite() {
        let n = a.n();
        for ((s, r), queries) in concealing_queries(&a) {
            if is_threshold(&a) && (s, r) != (PlayerId(0), PlayerId(1)) {
                continue;
            }
            let mut seen_orbit = BTreeSet::new();
            for complainers in PlayerSet::all(n) {
                if complainers.is_empty() || complainers.contains(s) || complainers.contains(r) || !a.contains(complainers) {
                    continue;
                }
                if is_threshold(&a) && !seen_orbit.insert(complainers.len()) {
                    continue;
                }
                let mut strategies = StrategyProfile::honest(n);
                for p in complainers.members() {
                    strategies.set(p, Behavior::FalseComplainer);
                }
                let config = CommitConfig::new(s, r, a.clone(), 1);
                let template = CommitTemplate { variant: Variant::Robust, config: config.clone(), strategies: strategies.clone() };
                instances += 1;
                // Termination and structural leak check on every execution.
                let bits = commit::random_bits(&template).unwrap();
                for payload in [false, true] {
                    for tape in 0..1u64 << bits {
                        let session = commit::commit(Variant::Robust, &SecretValue::bit_value(payload), &config, &strategies, &mut TapeRng::new(tape, bits), false).unwrap();
                        out.check(session.status == CommitStatus::Committed && session.iterations <= n + 1, || {
                            format!("{} complainers {complainers}: {:?} after {} iterations", a.literal(), session.status, session.iterations)
                        });
                    }
                }
                match commit::view_distributions(&template, &queries) {
                    Ok(dists) => {
                        for d in dists {
                            compared += 1;
                            if !d.identical() {
                                leaks.push(format!(
                                    "{} sender {s} receiver {r} complainers {complainers}: coalition {} {:?} sees the payload",
                                    a.literal(),
                                    d.coalition,
                                    d.phase
                                ));
                            }
                        }
                    }
                    Err(e) => out.check(false, || format!("{} ({s},{r}) complainers {complainers}: {e}", a.literal())),
                }
            }
        }
    }
    let leak_count = leaks.len();
    for l in leaks {
        out.check(false, || l);
    }
    out.note(format!("{instances} instances, {compared} exact comparisons, {leak_count} leaking"));
    out.finish();
}

#[test]
fn criterion_6_purification_dichotomy() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(6, Some(Duration::from_secs(5)));
    let ent = quantum::mayers_attack_demo(ToyProtocol::Entangling).unwrap();
    out.check(ent.trace_distance < 1e-10, || format!("entangling trace distance {}", ent.trace_distance));
    out.check(ent.flip_fidelity.is_some_and(|f| f > 1.0 - 1e-8), || format!("entangling fidelity {:?}", ent.flip_fidelity));
    out.check(ent.certified == Certificate::Flippable, || format!("entangling certified {:?}", ent.certified));
    let rev = quantum::mayers_attack_demo(ToyProtocol::Revealing).unwrap();
    out.check((rev.trace_distance - 1.0).abs() < 1e-10, || format!("revealing trace distance {}", rev.trace_distance));
    out.check(rev.certified == Certificate::Distinguishable, || format!("revealing certified {:?}", rev.certified));
    let s0 = ToyProtocol::Revealing.commit_state(false);
    let s1 = ToyProtocol::Revealing.commit_state(true);
    out.check(matches!(quantum::hjw_unitary(&s0, &s1), Err(quantum::QuantumError::NotSameReduction(_))), || "revealing flip did not raise NotSameReduction".into());
    let mtf = quantum::mayers_attack_demo(ToyProtocol::MeasureThenFlip).unwrap();
    out.check(mtf.flip_fidelity.is_some_and(|f| f > 1.0 - 1e-8), || format!("measure-then-flip fidelity {:?}", mtf.flip_fidelity));
    out.check(mtf.outcome_probabilities.iter().all(|(p0, p1)| (p0 - p1).abs() < 1e-12), || "ancilla outcome depends on the bit".into());
    out.note(format!(
        "entangling d={:.1e} F={:.12}; revealing d={:.12}; measure-then-flip F={:.12}",
        ent.trace_distance,
        ent.flip_fidelity.unwrap_or(0.0),
        rev.trace_distance,
        mtf.flip_fidelity.unwrap_or(0.0)
    ));
    out.finish();
}

#[test]
fn criterion_7_bb84_ot() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(7, Some(Duration::from_secs(120)));
    let honest = Bb84Params::default();
    let mut correct = 0;
    for i in 0..1000u64 {
        let mut rng = seeded(trial_seed(7, i));
        let (b0, b1, c) = (i & 1 == 1, i & 2 == 2, i & 4 == 4);
        let s = quantum::bb84_ot(b0, b1, c, &honest, &mut rng).unwrap();
        correct += (s.verdict == Bb84Verdict::Accept { output: if c { b1 } else { b0 } }) as u32;
    }
    out.check(correct == 1000, || format!("honest completeness {correct}/1000"));
    out.note(format!("honest {correct}/1000"));
    let trials = 10_000u64;
    for (alpha, size) in [(1.0 / 16.0, 8), (1.0 / 8.0, 16), (1.0 / 4.0, 32)] {
        let params = Bb84Params { alpha, attack: Bb84Attack::DelayedMeasurement, ..Bb84Params::default() };
        assert_eq!(params.test_size(), size);
        let mut detected = 0u64;
        for i in 0..trials {
            let s = quantum::bb84_ot(true, false, false, &params, &mut seeded(trial_seed(70 + size as u64, i))).unwrap();
            detected += matches!(s.verdict, Bb84Verdict::AbortCheatDetected { .. }) as u64;
        }
        let expected = 1.0 - 0.75f64.powi(size as i32);
        let freq = detected as f64 / trials as f64;
        let sigma = binomial_sigma(expected, trials);
        out.check((freq - expected).abs() <= 3.0 * sigma, || format!("|R|={size}: detected {freq}, expected {expected} ± {}", 3.0 * sigma));
        out.note(format!("|R|={size} detected {freq:.4} vs {expected:.4}"));
    }
    let unforced = Bb84Params { attack: Bb84Attack::DelayedMeasurement, forcing: false, ..Bb84Params::default() };
    let mut both = 0;
    for i in 0..1000u64 {
        let (b0, b1) = (i & 1 == 1, i & 2 == 2);
        let s = quantum::bb84_ot(b0, b1, false, &unforced, &mut seeded(trial_seed(77, i))).unwrap();
        both += s.recovered_both(b0, b1) as u32;
    }
    out.check(both == 1000, || format!("unforced attacker recovered both in {both}/1000"));
    out.note(format!("unforced both bits {both}/1000"));
    out.finish();
}

fn all_inputs(bits: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1usize << bits).map(move |v| (0..bits).map(|i| (v >> i) & 1 == 1).collect())
}

#[test]
fn criterion_8_composition() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(8, None);
    let mut ot = IdealOt::default();
    let mut rng = seeded(8);
    let mut evaluations = 0;
    for (name, circuit) in [("majority3", BooleanCircuit::majority3()), ("and2", BooleanCircuit::and2()), ("adder1", BooleanCircuit::adder1())] {
        let players = circuit.players();
        for inputs in all_inputs(circuit.inputs.len()) {
            let got = mpc::gmw_eval(&circuit, players, &inputs, &mut ot, &mut rng).unwrap().outputs;
            let want = mpc::eval_plain(&circuit, &inputs).unwrap();
            out.check(got == want, || format!("{name} on {inputs:?}: {got:?} vs {want:?}"));
            evaluations += 1;
        }
    }
    let mut gen = seeded(88);
    for i in 0..50 {
        let circuit = BooleanCircuit::random(3, 4, 5, 2, &mut gen);
        for inputs in all_inputs(circuit.inputs.len()) {
            let got = mpc::gmw_eval(&circuit, 3, &inputs, &mut ot, &mut rng).unwrap().outputs;
            let want = mpc::eval_plain(&circuit, &inputs).unwrap();
            out.check(got == want, || format!("random circuit {i} on {inputs:?}"));
            evaluations += 1;
        }
    }
    let adversary = structures::threshold_structure(3, 1).unwrap();
    // Bob's measurement records are committed with secret sharing among the three players.
    let backend = quantum::CommitBackend::SecretSharing { adversary: adversary.clone(), bob: PlayerId(0), alice: PlayerId(1), rounds: 2 };
    let mut bb84 = Bb84Ot::new(adversary, PlayerSet::singleton(PlayerId(2)), Bb84Params { backend, ..Bb84Params::default() });
    let inputs = [true, false, true];
    match mpc::gmw_eval(&BooleanCircuit::majority3(), 3, &inputs, &mut bb84, &mut rng) {
        Ok(o) => {
            out.check(o.outputs == vec![true], || format!("bb84 majority gave {:?}", o.outputs));
            out.note(format!("bb84 majority: {} transfers, {} reversed", o.transfers, bb84.reversed()));
        }
        Err(e) => out.check(false, || format!("bb84 majority failed: {e}")),
    }
    out.note(format!("{evaluations} ideal evaluations"));
    out.finish();
}

#[test]
fn criterion_9_determinism() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut out = Outcome::new(9, None);
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    let mut files: Vec<_> = std::fs::read_dir(dir).expect("scenario directory").map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut count = 0;
    for path in files.iter().filter(|p| p.extension().is_some_and(|e| e == "scn")) {
        let scenario = match harness::load_scenario_file(path) {
            Ok(s) => s,
            Err(e) => {
                out.check(false, || format!("{}: {e}", path.display()));
                continue;
            }
        };
        let first = harness::report(&harness::run_scenario(&scenario), harness::ReportFormat::Structured);
        let second = harness::report(&harness::run_scenario(&scenario), harness::ReportFormat::Structured);
        let sequential = harness::report(&harness::run_scenario_sequential(&scenario), harness::ReportFormat::Structured);
        out.check(first == second, || format!("{} differs between runs", path.display()));
        out.check(first == sequential, || format!("{} differs between parallel and sequential runs", path.display()));
        count += 1;
    }
    out.check(count > 0, || "no scenarios found".into());
    out.note(format!("{count} scenarios re-run byte-identically"));
    out.finish();
}
