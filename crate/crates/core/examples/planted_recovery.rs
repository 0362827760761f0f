//! Fine-tune from all-ones weights on planted-model data and compare the
//! held-out agreement of the trained head with the starting head.
//!
//! ```bash
//! cargo run --release -p rankalign --example planted_recovery -- [noise_swaps]
//! ```

use rankalign::dataset::split_sets;
use rankalign::model::WeightHead;
use rankalign::stats::{evaluate, EvalOptions};
use rankalign::synth::{generate, SynthConfig};
use rankalign::train::{fit, TrainConfig};

fn main() -> rankalign::Result<()> {
    let noise_swaps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = SynthConfig {
        noise_swaps,
        ..SynthConfig::new(200, &[8, 16, 32], 7)?
    };
    let data = generate(&config)?;
    let split = split_sets(&data.sets, 0.7, 7)?;
    let val = split.select(&data.sets, &split.val_set_ids)?.into_iter().cloned().collect::<Vec<_>>();

    let init = WeightHead::ones(data.archive.schema().clone());
    let started = std::time::Instant::now();
    let trace = fit(&data.archive, &data.sets, &split, &TrainConfig { seed: 7, ..Default::default() }, &init)?;
    println!(
        "{} epochs in {:.2?}, best epoch {:?}",
        trace.epochs.len(),
        started.elapsed(),
        trace.best_epoch
    );

    let options = EvalOptions::default();
    for (name, head) in [("all-ones", &init), ("trained", trace.head()), ("hidden", &data.hidden)] {
        let r = evaluate(head, &data.archive, &val, &options)?;
        println!(
            "{name:>9}: held-out rho = {:.4}, pooled ICC(2,k) = {:.4} ({} / {})",
            r.spearman_rho, r.icc2k, r.koo_li_band, r.cicchetti_band
        );
    }
    Ok(())
}
