//! The closed-form signal curriculum: weights as a function of loss, the
//! grid-search oracle, and the geometric threshold schedule.
//!
//! ```sh
//! cargo run --example curriculum_weights
//! ```

use graft::curriculum::{
    closed_form_weight, oracle_weight, schedule_step, weight_batch, CurriculumState,
};

fn main() -> graft::Result<()> {
    let (l1, l2) = (0.2, 1.0);
    println!("weights at lambda1={l1}, lambda2={l2}:");
    for loss in [0.0, 0.1, 0.2, 0.5, 0.7, 1.0, 1.2, 2.0] {
        let w = closed_form_weight(loss, l1, l2);
        let oracle = oracle_weight(loss, l1, l2, 1e-4)?;
        println!("  loss {loss:>4}: closed form {w:.4}, grid oracle {oracle:.4}");
    }

    let mut state = CurriculumState::new(l1, l2, 1.1)?;
    let losses: Vec<f64> = (0..20).map(|i| i as f64 * 0.15).collect();
    println!("\nactive signals as the thresholds grow (xi = {}):", state.xi);
    for pass in 0..6 {
        let w = weight_batch(&losses, &state)?;
        println!(
            "  pass {pass}: lambda1 {:.3}, lambda2 {:.3}, active {:>4.0}%, mean weight {:.3}",
            state.lambda1,
            state.lambda2,
            100.0 * w.active_fraction(),
            w.mean()
        );
        state = schedule_step(&state);
    }
    Ok(())
}
