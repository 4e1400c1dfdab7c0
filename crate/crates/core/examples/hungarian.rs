//! Minimum-cost matching on random matrices, checked against brute force.
//!
//! `cargo run --example hungarian -- [size] [trials]`

use itertools::Itertools;
use rand::Rng as _;

use lagr::align::hungarian;
use lagr::rng::seeded;

fn main() -> lagr::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);
    let trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let mut rng = seeded(1);
    let total = |c: &[f64], a: &[usize]| a.iter().enumerate().map(|(j, &i)| c[j * m + i]).sum::<f64>();

    let mut agree = 0;
    for _ in 0..trials {
        let cost: Vec<f64> = (0..m * m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let a = hungarian(&cost, m)?;
        let best = (0..m)
            .permutations(m)
            .map(|p| total(&cost, &p))
            .fold(f64::INFINITY, f64::min);
        if (total(&cost, &a) - best).abs() < 1e-9 {
            agree += 1;
        }
    }
    println!("{m}x{m}: optimal on {agree}/{trials} random matrices");

    let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
    let a = hungarian(&cost, 3)?;
    println!("row j -> column a[j] for the classic 3x3 instance: {a:?}, cost {}", a.iter().enumerate().map(|(j, &i)| cost[j * 3 + i]).sum::<f64>());
    Ok(())
}
