use super::*;

fn unit_prior(d: usize) -> Gaussian<f64> {
    Gaussian::isotropic(vec![0.0; d], 1.0).unwrap()
}

fn small_spec(walk: f64) -> CoupledModelSpec<f64> {
    CoupledModelSpec::coupled(
        SourceModel::tvar(unit_prior(2), walk, PrecisionPrior::Gamma(Gamma::new(1.0, 1.0).unwrap()), StateInit::Prior(unit_prior(2))),
        SourceModel::ar(
            Gaussian::isotropic(vec![0.5], 0.1).unwrap(),
            PrecisionPrior::Gamma(Gamma::new(2.0, 2.0).unwrap()),
            StateInit::Prior(unit_prior(1)),
        ),
    )
}

fn signal(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 * 0.7).sin() + 0.3 * (i as f64 * 2.3).cos()).collect()
}

#[test]
fn rejects_short_frames_and_bad_schedules() {
    let spec = small_spec(1e-3);
    assert!(infer_frame(&signal(2), &spec, &VmpSchedule::default()).is_err());
    let bad = VmpSchedule { max_iterations: 0, ..VmpSchedule::default() };
    assert!(infer_frame(&signal(20), &spec, &bad).is_err());
    let mut x = signal(20);
    x[3] = f64::NAN;
    assert!(matches!(infer_frame(&x, &spec, &VmpSchedule::default()), Err(Error::NonFinite(_))));
}

#[test]
fn trace_is_monotone_for_static_and_walking_coefficients() {
    for walk in [0.0, 1e-3] {
        let post = infer_frame(&signal(40), &small_spec(walk), &VmpSchedule { max_iterations: 40, ..Default::default() }).unwrap();
        for w in post.bfe_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "walk {walk}: {:?}", post.bfe_trace);
        }
    }
}

#[test]
fn stored_posteriors_reproduce_final_energy() {
    let x = signal(30);
    for walk in [0.0, 1e-2] {
        let spec = small_spec(walk);
        let post = infer_frame(&x, &spec, &VmpSchedule::default()).unwrap();
        let f = bethe_free_energy(&post, &spec, &x).unwrap();
        assert!((f - post.bfe()).abs() < 1e-9 * f.abs().max(1.0), "{f} vs {}", post.bfe());
    }
}

#[test]
fn deterministic_given_inputs() {
    let x = signal(30);
    let spec = small_spec(1e-3);
    let a = infer_frame(&x, &spec, &VmpSchedule::default()).unwrap();
    let b = infer_frame(&x, &spec, &VmpSchedule::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn observation_identity_holds_for_posterior_means() {
    let x = signal(30);
    let post = infer_frame(&x, &small_spec(1e-3), &VmpSchedule::default()).unwrap();
    let s = post.speech.as_ref().unwrap();
    for t in 0..x.len() {
        assert!((s.mean[t] + post.noise.mean[t] - x[t]).abs() < 1e-12);
        assert!((s.var[t] - post.noise.var[t]).abs() < 1e-12);
    }
}

#[test]
fn carried_spec_continues_the_chain() {
    let x = signal(60);
    let spec = small_spec(1e-3);
    let post = infer_frame(&x[..30], &spec, &VmpSchedule::default()).unwrap();
    let next = post.next_spec(&spec, &x[..30], CarryPolicy::default()).unwrap();
    assert_eq!(next.noise.init, StateInit::Observed(vec![x[29]]));
    let post2 = infer_frame(&x[30..], &next, &VmpSchedule::default()).unwrap();
    assert!(post2.bfe().is_finite());
}

#[test]
fn noise_only_white_model_has_exact_evidence() {
    // Known precision, no latent variables: F = −ln N(x; 0, I/τ).
    let x = signal(10);
    let tau = 2.0;
    let spec = CoupledModelSpec::noise_only(SourceModel::white(PrecisionPrior::Known(tau)));
    let post = infer_frame(&x, &spec, &VmpSchedule::default()).unwrap();
    let expected: f64 = x.iter().map(|&v| 0.5 * (LN_2PI - tau.ln()) + 0.5 * tau * v * v).sum();
    assert!((post.bfe() - expected).abs() < 1e-12);
}
