//! Spearman's rho and ICC(2,k) for a baseline ranking against two raters,
//! with the two-way ANOVA behind each ICC and its qualitative bands.
//!
//! ```bash
//! cargo run -p rankalign --example agreement_example_one
//! ```

use rankalign::stats::{anova_two_raters, icc2k, icc2k_interval, interpret_icc, spearman_rho, Guideline};

fn main() -> rankalign::Result<()> {
    let baseline = [1.0, 2.0, 3.0, 4.0];
    for (name, rater) in [("R1", [1.0, 3.0, 4.0, 2.0]), ("R2", [3.0, 2.0, 4.0, 1.0])] {
        let rho = spearman_rho(&baseline, &rater)?;
        let table = anova_two_raters(&baseline, &rater)?;
        let icc = icc2k(&table)?;
        println!("{name}: rho = {rho:+.3}");
        println!(
            "    MS_R = {:.4}, MS_C = {:.4}, MS_E = {:.4} -> ICC(2,k) = {icc:+.3}",
            table.ms_r, table.ms_c, table.ms_e
        );
        let (lo, hi) = icc2k_interval(&table, 0.95)?;
        println!("    95% CI [{lo:.3}, {hi:.3}]");
        println!(
            "    Koo-Li: {}, Cicchetti: {}",
            interpret_icc(icc, Guideline::KooLi),
            interpret_icc(icc, Guideline::Cicchetti)
        );
    }
    Ok(())
}
