//! Times full minors runs over a grid of sizes, precisions and worker counts
//! and prints the doubling ratios.
//!
//! `cargo run --release --example bench_scaling [SIZES] [PRECS] [WORKERS]`
//! with comma-separated lists, e.g. `64,128 1024,2048 1,2`.

use mpdet::bench::run_grid;

fn list<T: std::str::FromStr + Clone>(arg: Option<String>, default: &[T]) -> Result<Vec<T>, T::Err> {
    match arg {
        Some(s) => s.split(',').map(str::parse).collect(),
        None => Ok(default.to_vec()),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let sizes = list(args.next(), &[64usize, 128]).map_err(|e| format!("sizes: {e}"))?;
    let precs = list(args.next(), &[1024u32, 2048]).map_err(|e| format!("precisions: {e}"))?;
    let workers = list(args.next(), &[1usize]).map_err(|e| format!("workers: {e}"))?;
    let report = run_grid(&sizes, &precs, &workers, 0, 1)?;
    print!("{}", report.render());
    Ok(())
}
