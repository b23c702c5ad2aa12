//! Replaying a journal, after a round trip through its JSON-lines form,
//! rebuilds the live session state field for field.

use aida_session::event::parse_line;
use aida_session::*;
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Op {
    Next,
    Appraise(Option<bool>),
    Optimize,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => Just(Op::Next),
        4 => prop::option::of(any::<bool>()).prop_map(Op::Appraise),
        1 => Just(Op::Optimize),
    ]
}

fn env() -> impl Strategy<Value = EnvironmentKind> {
    prop_oneof![Just(EnvironmentKind::Synthetic), Just(EnvironmentKind::Table1)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn replay_reconstructs_state(kind in env(), seed in any::<u64>(), frame_len in 8usize..16, ops in prop::collection::vec(op(), 1..12)) {
        let mut cfg = SessionConfig::new(kind, seed);
        cfg.frame_len = frame_len;
        cfg.schedule.max_iterations = 5;
        let mut session = Session::for_environment(cfg, None).unwrap();
        for op in ops {
            // Rejected commands (no frame yet, single class) leave no trace.
            let _ = match op {
                Op::Next => session.next_frame().map(|_| ()),
                Op::Appraise(r) => session.handle_appraisal(r).map(|_| ()),
                Op::Optimize => session.optimize().map(|_| ()),
            };
        }
        let lines: Vec<String> = session.events().iter().map(|e| serde_json::to_string(e).unwrap()).collect();
        let parsed: Vec<Event> = lines.iter().map(|l| parse_line(l).unwrap()).collect();
        prop_assert_eq!(&parsed[..], session.events());
        let rebuilt = replay(&parsed).unwrap();
        prop_assert_eq!(&rebuilt, session.state());
    }
}
