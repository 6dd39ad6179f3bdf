use temporal_advantage::optimize::{
    adam_maximize, adam_maximize_with, classical_maximize, AdamConfig, GradientMethod, ParamLayout,
    ParamMode,
};
use temporal_advantage::{quantum_sequence_prob, validate_quantum, Sequence};

#[test]
fn iterates_stay_probabilities_and_envelopes_rise() {
    let cfg = AdamConfig::ci().with_trials(4).with_seed(3);
    let seq = Sequence::one_tick(4).unwrap();
    let best = adam_maximize(&cfg, &seq, 3, 4).unwrap();
    for t in &best.trials {
        assert!(t.max_objective <= 1.0 + 1e-9);
        assert!(t.envelope.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(t.envelope.len(), cfg.iterations / cfg.envelope_stride + 1);
        assert!(!t.aborted);
    }
    assert!(validate_quantum(&best.model, 1e-6).is_valid());
    assert_eq!(quantum_sequence_prob(&best.model, &seq, true), best.prob);
}

#[test]
fn commuting_states_cannot_beat_the_classical_bound() {
    let cfg = AdamConfig::default().with_trials(8).with_seed(5);
    let seq = Sequence::one_tick(4).unwrap();
    let layout = ParamLayout::new(3, 4).with_mode(ParamMode::CommutingStates);
    let best = adam_maximize_with(&cfg, &seq, &layout).unwrap();
    assert!(best.prob <= 0.31640625 + 1e-4, "{}", best.prob);
}

#[test]
fn quantum_short_run_beats_classical_search() {
    let cfg = AdamConfig::ci();
    for (len, d) in [(4usize, 3usize), (5, 4)] {
        let seq = Sequence::one_tick(len).unwrap();
        let quantum = adam_maximize(&cfg, &seq, d, d + 1).unwrap();
        let classical = classical_maximize(&cfg, &seq, d).unwrap();
        assert!(quantum.prob > classical.prob, "L={len}: {} vs {}", quantum.prob, classical.prob);
    }
}

#[test]
fn classical_search_stays_below_the_bound() {
    let cfg = AdamConfig::ci();
    for (seq, d, bound) in [("001", 2, 8.0 / 27.0), ("0001", 3, 0.31640625)] {
        let best = classical_maximize(&cfg, &seq.parse().unwrap(), d).unwrap();
        assert!(best.prob <= bound + 1e-9);
        assert!((best.prob - bound).abs() < 1e-6, "{seq}: {}", best.prob);
    }
}

#[test]
fn runs_do_not_depend_on_the_thread_count() {
    let cfg = AdamConfig::ci().with_iterations(200).with_trials(6).with_seed(17);
    let seq = Sequence::one_tick(3).unwrap();
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| adam_maximize(&cfg, &seq, 2, 3).unwrap());
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| adam_maximize(&cfg, &seq, 2, 3).unwrap());
    assert_eq!(serial.params, parallel.params);
    assert_eq!(serial.trials, parallel.trials);
}

#[test]
fn finite_difference_mode_returns_valid_models() {
    let cfg = AdamConfig::ci()
        .with_iterations(300)
        .with_trials(2)
        .with_gradient(GradientMethod::FiniteDifference);
    let seq = Sequence::one_tick(3).unwrap();
    let best = adam_maximize(&cfg, &seq, 2, 3).unwrap();
    assert!(validate_quantum(&best.model, 1e-6).is_valid());
    assert!(best.prob >= best.raw_prob && best.prob <= 1.0);
    assert!(best.trials.iter().all(|t| !t.aborted));
}
