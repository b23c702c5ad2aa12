//! Context switches reported by the session against the generator's labels.

use aida_session::*;

/// Fraction of true context changes that the journal reports as a switch
/// into the right context on the very frame where the change happens.
fn detected_fraction(seed: u64, frames: usize) -> (usize, usize) {
    let mut s = Session::for_environment(SessionConfig::new(EnvironmentKind::Synthetic, seed), None).unwrap();
    let labels: Vec<usize> = (0..frames).map(|_| s.next_frame().unwrap().label.unwrap()).collect();
    let switches: Vec<(usize, usize)> = s
        .events()
        .iter()
        .filter_map(|e| match e.body {
            EventBody::ContextSwitch { k, to, .. } => Some((k, to)),
            _ => None,
        })
        .collect();
    let mut total = 0;
    let mut hits = 0;
    for k in 1..frames {
        if labels[k] != labels[k - 1] {
            total += 1;
            // Segment indices are one based.
            if switches.contains(&(k + 1, labels[k])) {
                hits += 1;
            }
        }
    }
    (hits, total)
}

#[test]
fn alternating_contexts_are_detected_at_the_boundary() {
    for seed in 0..3 {
        let (hits, total) = detected_fraction(seed, 60);
        assert!(total >= 10);
        assert!(hits as f64 >= 0.85 * total as f64, "seed {seed}: {hits}/{total}");
    }
}
