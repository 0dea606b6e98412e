//! Training-run measurements at the default configuration.

use std::sync::OnceLock;

use mimo_ce::cnn::{train, TrainConfig, TrainInit, TrainOutcome};
use mimo_ce::harness::presets;
use mimo_ce::pilots::PilotSet;

/// One default-configuration run on the single-cluster scenario, shared by
/// the tests below.
fn default_run() -> &'static TrainOutcome {
    static RUN: OnceLock<TrainOutcome> = OnceLock::new();
    RUN.get_or_init(|| {
        let scenario = presets::desk_scenario(1);
        let pilots = PilotSet::dft(scenario.s, scenario.u, scenario.n).unwrap();
        let cfg = TrainConfig { seed: 21, ..Default::default() };
        train(&cfg, &scenario, &pilots, TrainInit::Random).unwrap()
    })
}

#[test]
fn training_halves_the_error() {
    let h = &default_run().loss_history;
    assert_eq!(h.len(), 250);
    let (first, last) = (h[0], *h.last().unwrap());
    println!("training NMSE first epoch {first:.4e}, last epoch {last:.4e}");
    assert!(last <= 0.5 * first, "{first} -> {last}");
}

#[test]
fn moving_average_mostly_non_increasing() {
    let h = &default_run().loss_history;
    let ma: Vec<f64> = h.windows(20).map(|w| w.iter().sum::<f64>() / 20.0).collect();
    let steps = ma.len() - 1;
    let down = ma.windows(2).filter(|w| w[1] <= w[0]).count();
    let frac = down as f64 / steps as f64;
    let late_ma = &ma[ma.len() / 2..];
    let late = late_ma.windows(2).filter(|w| w[1] <= w[0]).count() as f64 / (late_ma.len() - 1) as f64;
    println!("20-epoch moving average non-increasing in {down}/{steps} windows ({frac:.3}); second half {late:.3}");
    assert!(frac >= 0.9, "{frac}");
}
