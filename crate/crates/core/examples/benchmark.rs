//! Fixed-seed end-to-end benchmark: synthesize, train with and without the
//! directional term, and report ordering recovery.
//!
//! `cargo run --release -p aespace --example benchmark [steps]`

use std::time::Instant;

use aespace::ranker::{embed_scores, kendall_tau, pairwise_agreement, RankedList};
use aespace::synth::{generate, SynthConfig};
use aespace::trainer::{train, TrainConfig};
use aespace::LossConfig;

fn main() -> aespace::Result<()> {
    let steps: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("steps must be an integer"))
        .unwrap_or(30_000);
    let synth = SynthConfig {
        n: 2000,
        d_in: 16,
        noise_sigma: 0.05,
        seed: 7,
        ..Default::default()
    };
    let ds = generate(&synth)?.dataset;
    let latent = ds
        .latent_scores()
        .expect("synthetic data has latent scores");
    let thresholds = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let truth_order = RankedList::from_scores(
        ds.records()
            .iter()
            .map(|r| r.id.clone())
            .zip(latent.iter().copied())
            .collect(),
    );

    for directional in [true, false] {
        let cfg = TrainConfig {
            max_steps: steps,
            seed: 7,
            loss: LossConfig {
                directional_enabled: directional,
                ..Default::default()
            },
            ..Default::default()
        };
        let start = Instant::now();
        let (params, log) = train(&ds, &cfg)?;
        let secs = start.elapsed().as_secs_f64();
        let proj = embed_scores(&params, &ds)?;
        let order = RankedList::from_scores(
            ds.records()
                .iter()
                .map(|r| r.id.clone())
                .zip(proj.iter().copied())
                .collect(),
        );
        let tau = kendall_tau(&order.ids(), &truth_order.ids())?;
        let table = pairwise_agreement(&proj, &latent, &thresholds)?;
        let first = log.windows.first().map(|w| w.mean_loss).unwrap_or(f64::NAN);
        let last = log.windows.last().map(|w| w.mean_loss).unwrap_or(f64::NAN);
        println!(
            "directional={directional} steps={} {secs:.1}s loss {first:.4} -> {last:.4} final lr {:e} tau {tau:.4}",
            log.steps_run, log.final_lr
        );
        for r in &table.rows {
            println!(
                "  delta>{} pairs {} agreement {:?}",
                r.delta, r.pairs, r.agreement
            );
        }
    }
    Ok(())
}
