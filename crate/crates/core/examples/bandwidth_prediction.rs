//! Train the six regressors on two synthetic wireless bandwidth traces,
//! compare test RMSE, then forecast ahead with the winner.
//!
//! ```text
//! cargo run --release --example bandwidth_prediction [seed]
//! ```

use polka_te::predictor::{evaluate, split_train_test, Forecaster, Hyperparams, ModelKind};
use polka_te::telemetry::generate_synthetic_wireless;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let data = generate_synthetic_wireless(seed);
    let hp = Hyperparams::default();
    let paths = [("path 1", data.path1.as_slice()), ("path 2", data.path2.as_slice())];
    let report = evaluate(&paths, &ModelKind::ALL, &hp, 10, seed)?;

    println!("test RMSE (Mbps), {} train / {} test samples per path", report.train_len[0], report.test_len[0]);
    println!("{:<12} {:>8} {:>8} {:>8}", "model", "path 1", "path 2", "norm");
    for row in &report.models {
        let norm = row.rmse.iter().map(|e| e * e).sum::<f64>().sqrt();
        println!("{:<12} {:>8.4} {:>8.4} {:>8.4}", row.model, row.rmse[0], row.rmse[1], norm);
    }
    let p = &report.persistence;
    println!("{:<12} {:>8.4} {:>8.4}", "persistence", p[0], p[1]);
    println!("chosen: {}", report.chosen_model.name());

    // ten-step recursive forecast for path 2 from the end of its history
    let (train, _) = split_train_test(&data.path2)?;
    let f = Forecaster::train(report.chosen_model, train, 10, &hp, seed)?;
    let ahead = f.forecast(&data.path2[data.path2.len() - 10..], 10)?;
    let last = data.path2[data.path2.len() - 1];
    let shown: Vec<String> = ahead.iter().map(|v| format!("{v:.1}")).collect();
    println!("\npath 2 last sample {last:.1} Mbps, next 10 s: {}", shown.join(" "));
    Ok(())
}
