use tamp::harness::{self, HarnessError, ReportFormat};

#[test]
fn admissibility_is_checked_before_running() {
    let err = harness::load_scenario("structure threshold(3,1)\nprotocol commit-robust\n").unwrap_err();
    assert!(matches!(&err, HarnessError::InadmissibleStructure { condition, .. } if condition.contains("robust")));
    let err = harness::load_scenario("structure threshold(4,2)\nprotocol commit-partial\n").unwrap_err();
    assert!(matches!(err, HarnessError::InadmissibleStructure { .. }));
}

#[test]
fn view_checks_need_small_instances() {
    assert!(harness::load_scenario("structure threshold(5,1)\nprotocol commit-partial\nphase after-commit coalition 2 3\n").is_err());
    let s = harness::load_scenario("structure threshold(5,1)\nprotocol commit-partial\ntrials 2\n").unwrap();
    let t = harness::run_scenario(&s);
    assert_eq!(t.verdicts.len(), 2);
    assert!(t.all_pass());
}

#[test]
fn seeds_change_transcripts() {
    let text = "protocol gmw\ncircuit adder1\ntrials 6\nseed 1\n";
    let a = harness::run_scenario(&harness::load_scenario(text).unwrap());
    let b = harness::run_scenario(&harness::load_scenario(&text.replace("seed 1", "seed 2")).unwrap());
    assert_ne!(a.events, b.events);
    assert!(a.all_pass() && b.all_pass());
}

#[test]
fn text_report_counts() {
    let s = harness::load_scenario("structure sets(4; 0 1)\nprotocol commit-partial\nstrategy 1 false-complainer\ntrials 5\n").unwrap();
    let out = harness::report(&harness::run_scenario(&s), ReportFormat::Text);
    assert!(out.contains("verdicts pass 5 fail 0"), "{out}");
    assert!(out.contains("aborted complaint: 5"));
}
