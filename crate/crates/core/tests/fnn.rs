use std::f64::consts::TAU;

use tsperf::synthetic::simulate_trial;
use tsperf::{estimate_embedding_dimension, DgpKind, DgpSpec, FnnConfig, TimeSeries};

fn sine(period: f64, n: usize) -> TimeSeries {
    TimeSeries::new("sine", (0..n).map(|t| (TAU * t as f64 / period).sin()).collect()).unwrap()
}

// Reference values from an independent numpy implementation of the same
// criteria (ratio 10, loneliness 2 sd, tolerance 0.01).

#[test]
fn sine_with_irrational_period_needs_two_lags() {
    let cfg = FnnConfig {
        max_dimension: 10,
        ..FnnConfig::default()
    };
    let o = estimate_embedding_dimension(&sine(20.0 * 1.01f64.sqrt(), 400), &cfg).unwrap();
    assert_eq!(o.dimension, 2);
    assert!(o.reached_tolerance);
    assert_eq!(o.fractions.len(), 2);
    assert!((o.fractions[0] - 0.02756892230576441).abs() < 1e-15);
    assert_eq!(o.fractions[1], 0.0);
}

#[test]
fn sine_with_integer_period_repeats_exactly() {
    // every delay vector has an exact copy one period away, so there are no
    // false neighbours even in one dimension
    let o = estimate_embedding_dimension(&sine(20.0, 400), &FnnConfig::default()).unwrap();
    assert_eq!(o.dimension, 1);
    assert_eq!(o.fractions, vec![0.0]);
}

#[test]
fn constant_series() {
    let s = TimeSeries::new("flat", vec![4.0; 50]).unwrap();
    let o = estimate_embedding_dimension(&s, &FnnConfig::default()).unwrap();
    assert_eq!(o.dimension, 1);
}

#[test]
fn fractions_are_reported_up_to_the_choice() {
    let cfg = FnnConfig {
        max_dimension: 3,
        tolerance: 1e-9,
        ..FnnConfig::default()
    };
    let noise: Vec<f64> = (0..120).map(|t| ((t * 7919 % 101) as f64 * 0.37).sin()).collect();
    let o = estimate_embedding_dimension(&TimeSeries::new("n", noise).unwrap(), &cfg).unwrap();
    assert!(o.fractions.len() <= 3);
    assert_eq!(o.dimension, o.fractions.len());
    assert!(o.fractions.iter().all(|f| (0.0..=1.0).contains(f)));
    if !o.reached_tolerance {
        assert_eq!(o.dimension, 3);
    }
}

fn s1_dimensions(loneliness: Option<f64>) -> Vec<usize> {
    let spec = DgpSpec::new(DgpKind::S1);
    let cfg = FnnConfig {
        loneliness_threshold: loneliness,
        ..FnnConfig::default()
    };
    (0..100)
        .map(|i| {
            let s = simulate_trial(&spec, i, 42).unwrap().series;
            estimate_embedding_dimension(&s, &cfg).unwrap().dimension
        })
        .collect()
}

#[test]
fn s1_low_dimension_with_ratio_criterion() {
    let dims = s1_dimensions(None);
    let low = dims.iter().filter(|&&d| d <= 5).count();
    println!("ratio only: {low}/100 at most 5");
    assert!(low >= 90, "{dims:?}");
}

#[test]
fn s1_loneliness_inflates_dimension() {
    // with both criteria most AR(3) series never reach the tolerance
    let both = s1_dimensions(Some(2.0));
    let ratio = s1_dimensions(None);
    let low = both.iter().filter(|&&d| d <= 5).count();
    println!("both criteria: {low}/100 at most 5");
    assert!(both.iter().zip(&ratio).all(|(a, b)| a >= b));
    assert!(low < 50);
}
