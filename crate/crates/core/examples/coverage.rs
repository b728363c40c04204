//! Coverage of three CIs on design 1: `cargo run --release --example coverage -- 2000`.

use honestci::montecarlo::{simulate_many, Design, Method, MethodConfig, Smoothness};

fn main() -> honestci::Result<()> {
    let draws = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let cfgs = [
        MethodConfig::new(Method::Flci { m: Smoothness::Fixed(2.0) }),
        MethodConfig::new(Method::Rbc { m: 2.0 }),
        MethodConfig::new(Method::Flci { m: Smoothness::RuleOfThumb }),
    ];
    for m in [2.0, 6.0] {
        for r in simulate_many(&Design::new(1, m)?, &cfgs, draws, 7)? {
            println!(
                "M={m} {:<24} cov={:.3} bias={:+.4} se={:.4} h={:.3} rl={:.3}",
                r.label, r.coverage, r.mean_bias, r.mean_se, r.mean_h, r.relative_length
            );
        }
    }
    Ok(())
}
