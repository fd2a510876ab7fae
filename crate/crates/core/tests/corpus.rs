//! End-to-end scenarios over the bundled corpus: parsing round-trips,
//! compilation of both protocols, the reflection and man-in-the-middle
//! attack stories, and the monitor guarantees on honest runs.

use std::fs;
use std::path::PathBuf;
use vigil_core::compiler::{compile, compile_protocol, evaluate, is_implementation};
use vigil_core::monitor::{
    apply_verdict, attack_presentation, default_order, detectable,
    detectable_via_static_equivalence, execution_log, synthesize_test, validate_monitor, Monitor,
    Verdict, VerdictPolarity,
};
use vigil_core::narration::{parse_narration, print_narration, NarrationFile};
use vigil_core::{refines, DeductionSystem, Trace};

fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn read(name: &str) -> String {
    fs::read_to_string(corpus_path(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

fn parse(name: &str, d: &DeductionSystem) -> NarrationFile {
    parse_narration(&read(name), d).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

const CORPUS: &[&str] = &[
    "nspk.pnar",
    "nspk.monitor",
    "nspk-lowe.attack",
    "nspk-honest.exec",
    "iso9797.pnar",
    "iso9797.attack",
    "iso9797.monitor",
    "iso9797-robust.monitor",
    "refine-demo-a.trace",
    "refine-demo-b.trace",
];

#[test]
fn every_corpus_file_round_trips() {
    let d = DeductionSystem::classic();
    for name in CORPUS {
        let parsed = parse(name, &d);
        let printed = print_narration(&parsed);
        let reparsed = parse_narration(&printed, &d)
            .unwrap_or_else(|e| panic!("reparsing printed {name}: {e}"));
        assert_eq!(parsed, reparsed, "round-trip of {name}");
    }
}

#[test]
fn both_protocols_compile_and_round_trip() {
    let d = DeductionSystem::classic();
    for file in ["nspk.pnar", "iso9797.pnar"] {
        let NarrationFile::Protocol(p) = parse(file, &d) else {
            panic!("{file} is a protocol");
        };
        for prudent in [false, true] {
            let imp = compile_protocol(&p, &d, prudent).unwrap();
            for (strand, trace) in &p.traces {
                assert!(
                    is_implementation(&imp.frames[strand], trace, &d),
                    "{file}: {strand} (prudent = {prudent})"
                );
            }
        }
    }
}

#[test]
fn bundled_monitors_validate() {
    let d = DeductionSystem::classic();
    let cases = [
        ("nspk.pnar", "nspk.monitor"),
        ("iso9797.pnar", "iso9797.monitor"),
        ("iso9797.pnar", "iso9797-robust.monitor"),
    ];
    for (proto_file, monitor_file) in cases {
        let NarrationFile::Protocol(p) = parse(proto_file, &d) else {
            panic!("protocol expected");
        };
        let NarrationFile::Monitor(spec) = parse(monitor_file, &d) else {
            panic!("monitor expected");
        };
        let m = Monitor::materialize(&spec, &p);
        let v = validate_monitor(&m, &p, &d);
        assert!(v.ok, "{monitor_file}: {:?}", v.issues);
    }
}

#[test]
fn iso_presentation_logs_and_rule() {
    let d = DeductionSystem::classic();
    let NarrationFile::Protocol(p) = parse("iso9797.pnar", &d) else {
        panic!()
    };
    let NarrationFile::Monitor(spec) = parse("iso9797.monitor", &d) else {
        panic!()
    };
    let NarrationFile::Attack(a) = parse("iso9797.attack", &d) else {
        panic!()
    };
    let imp = compile_protocol(&p, &d, true).unwrap();
    let m = Monitor::materialize(&spec, &p);
    let order = default_order(&a.attack_execution());
    let pres = attack_presentation(&imp, &m, &a, &d, &order).unwrap();
    let show = |log: &vigil_core::monitor::ExecutionLog| {
        log.as_trace()
            .payloads()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(show(&pres.attack_log), ["h(A,D,kA,R)", "h(A,D,kA,R)"]);
    assert_eq!(show(&pres.normal_log), ["h(A,D,kA,R)", "h(B,D,kB,R)"]);
    assert!(detectable(&pres, &d));
    assert!(detectable_via_static_equivalence(&pres, &d));
    let rule = synthesize_test(&pres, &d).unwrap();
    assert_eq!(
        (rule.lhs.to_string().as_str(), rule.rhs.to_string().as_str()),
        ("v1", "v2")
    );
    assert_eq!(rule.polarity, VerdictPolarity::BlockIfSatisfied);
    assert_eq!(apply_verdict(&rule, &pres.attack_log, &d), Verdict::Block);
    assert_eq!(apply_verdict(&rule, &pres.normal_log, &d), Verdict::Allow);
}

#[test]
fn lowe_attack_defeats_prudence_but_not_the_monitor() {
    let d = DeductionSystem::classic();
    let NarrationFile::Protocol(p) = parse("nspk.pnar", &d) else {
        panic!()
    };
    let NarrationFile::Monitor(spec) = parse("nspk.monitor", &d) else {
        panic!()
    };
    let NarrationFile::Attack(a) = parse("nspk-lowe.attack", &d) else {
        panic!()
    };
    let imp = compile_protocol(&p, &d, true).unwrap();
    let m = Monitor::materialize(&spec, &p);

    // Every honest participant's attack trace passes its prudent frame: the
    // run is a legitimate execution, which is exactly why a monitor is
    // needed.
    let attack_exec = a.attack_execution();
    for participant in attack_exec.honest_participants() {
        let vigil_core::narration::RoleRef::Role(role) = &attack_exec.role_map[participant] else {
            unreachable!()
        };
        let trace = &attack_exec.traces[participant];
        let run = evaluate(&imp.frames[role], &trace.input(), &d)
            .unwrap_or_else(|e| panic!("{participant} rejected: {e}"));
        assert_eq!(run.len(), trace.len());
    }

    let order = default_order(&attack_exec);
    let pres = attack_presentation(&imp, &m, &a, &d, &order).unwrap();
    let show = |log: &vigil_core::monitor::ExecutionLog| {
        log.as_trace()
            .payloads()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(show(&pres.attack_log), ["enc(~NB,KI)", "enc(~NB,KB)"]);
    assert_eq!(show(&pres.normal_log), ["enc(~NB,KB)", "enc(~NB,KB)"]);
    assert!(detectable(&pres, &d));
    assert!(detectable_via_static_equivalence(&pres, &d));

    // The synthesized check equates the two disclosed third messages and
    // blocks runs violating it.
    let rule = synthesize_test(&pres, &d).unwrap();
    assert_eq!(rule.polarity, VerdictPolarity::BlockIfViolated);
    assert_eq!(
        (rule.lhs.to_string().as_str(), rule.rhs.to_string().as_str()),
        ("v1", "v2")
    );
    assert_eq!(apply_verdict(&rule, &pres.attack_log, &d), Verdict::Block);
    assert_eq!(apply_verdict(&rule, &pres.normal_log, &d), Verdict::Allow);

    // The honest bundled execution is allowed by the same rule.
    let NarrationFile::Execution(honest) = parse("nspk-honest.exec", &d) else {
        panic!()
    };
    let honest_order = default_order(&honest);
    let honest_log = execution_log(&imp, &m, &honest, &d, &honest_order).unwrap();
    assert_eq!(apply_verdict(&rule, &honest_log, &d), Verdict::Allow);
}

#[test]
fn honest_runs_satisfy_the_monitor_refinement_guarantee() {
    let d = DeductionSystem::classic();
    let NarrationFile::Protocol(p) = parse("nspk.pnar", &d) else {
        panic!()
    };
    let NarrationFile::Monitor(spec) = parse("nspk.monitor", &d) else {
        panic!()
    };
    let NarrationFile::Execution(honest) = parse("nspk-honest.exec", &d) else {
        panic!()
    };
    let m = Monitor::materialize(&spec, &p);
    for participant in honest.honest_participants() {
        let vigil_core::narration::RoleRef::Role(role) = &honest.role_map[participant] else {
            unreachable!()
        };
        let monitor_frame = compile(&m.disclosure_traces[role], &d, false).unwrap();
        let exec_inputs = honest.traces[participant].input();
        assert!(evaluate(&monitor_frame, &exec_inputs, &d).is_ok());
        // The inputs the participant actually saw refine the inputs the
        // monitor was specified for.
        assert!(refines(&exec_inputs, &m.disclosure_traces[role].input(), &d));
    }
}

#[test]
fn refine_demo_traces_are_one_directional() {
    let d = DeductionSystem::classic();
    let NarrationFile::Trace(a) = parse("refine-demo-a.trace", &d) else {
        panic!()
    };
    let NarrationFile::Trace(b) = parse("refine-demo-b.trace", &d) else {
        panic!()
    };
    assert!(refines(&a.trace, &b.trace, &d));
    assert!(!refines(&b.trace, &a.trace, &d));
}

#[test]
fn empty_protocol_compiles_to_an_empty_implementation() {
    let d = DeductionSystem::classic();
    let NarrationFile::Protocol(p) = parse_narration("", &d).unwrap() else {
        panic!()
    };
    let imp = compile_protocol(&p, &d, true).unwrap();
    assert!(imp.frames.is_empty());
    let _ = Trace::empty();
}
