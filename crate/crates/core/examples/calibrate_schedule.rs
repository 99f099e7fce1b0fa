//! Prints the noise schedule for a privacy target and checks that it spends
//! the budget exactly.
//!
//! cargo run --example calibrate_schedule -- 1.0 1e-7 6 0.9

use dpne::{allocate_schedule, PrivacyTarget};

fn main() -> dpne::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_owned());
    let epsilon: f64 = arg(0, "4").parse().expect("epsilon");
    let delta: f64 = arg(1, "1e-7").parse().expect("delta");
    let max_len: usize = arg(2, "9").parse().expect("max_len");
    let decay: f64 = arg(3, "1.0").parse().expect("decay");

    let target = PrivacyTarget::new(epsilon, delta)?;
    let schedule = allocate_schedule(target, max_len, decay, &[300], 0.01, None)?;
    println!("sigma* = {:.6}", schedule.sigma_star);
    for k in 1..=max_len {
        println!(
            "  k={k:<2} sigma={:.6} cap={}",
            schedule.sigma(k),
            schedule.cap(k)
        );
    }
    println!("rho_1 = {:.6}", schedule.rho1);
    println!(
        "composition residual = {:.2e}",
        schedule.composition_residual()
    );
    Ok(())
}
