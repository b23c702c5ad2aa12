//! A session answered by the simulated user reproduces the standalone
//! agent run with the same seed, trial for trial.

use aida_core::agent::{run_agent, user_stream, AgentConfig};
use aida_core::context::{weak_noise_model, ContextBank, ContextModel};
use aida_core::infer::CoupledModelSpec;
use aida_core::simuser::{sample_appraisal, UserPrefs};
use aida_session::*;

#[test]
fn scripted_session_matches_agent_run() {
    let bank = ContextBank::new(vec![ContextModel { name: "AR(1)".into(), spec: CoupledModelSpec::noise_only(weak_noise_model(1).unwrap()), label: None }]).unwrap();
    let prefs = UserPrefs::default();
    let trials = 30;
    for seed in [0_u64, 17] {
        let mut cfg = SessionConfig::new(EnvironmentKind::External, seed);
        cfg.frame_len = 10;
        let mut session = Session::new(cfg, bank.clone(), None).unwrap();
        let mut user = user_stream(seed, 0);
        for i in 0..trials {
            session.process_frame((0..10).map(|t| ((i * 10 + t) as f64 * 0.37).sin()).collect()).unwrap();
            let u = session.state().gains()[0];
            let r = sample_appraisal(&u, &prefs, &mut user);
            session.handle_appraisal(Some(r)).unwrap();
        }

        let reference = run_agent(0, trials, &prefs, &AgentConfig::default(), seed);
        assert!(reference.error.is_none());
        let history = &session.state().history;
        assert_eq!(history.len(), reference.trials.len());
        for (h, t) in history.iter().zip(&reference.trials) {
            assert_eq!((h.trial, h.u, h.r), (t.trial, t.u, t.r));
            assert_eq!((h.utility_drive, h.info_gain, h.efe_min), (t.utility_drive, t.info_gain, t.efe_min));
            assert_eq!((h.sigma, h.length), (t.sigma, t.length));
        }
    }
}
