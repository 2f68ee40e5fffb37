//! Runs the memorization grid and prints the best test accuracy per split type.

use era_gbdt::experiment::{best_by, grid_search, GridSpec};
use era_gbdt::synth::{gen_memorization, MemorizationSpec};
use era_gbdt::SplitType;

fn main() -> era_gbdt::Result<()> {
    let mut args = std::env::args().skip(1);
    let data_seed: u64 = args.next().map_or(0, |s| s.parse().unwrap());
    let grid_seed: u64 = args.next().map_or(0, |s| s.parse().unwrap());
    let data = gen_memorization(&MemorizationSpec { seed: data_seed, ..Default::default() })?;
    let grid = GridSpec { seed: grid_seed, ..GridSpec::standard() };
    let records = grid_search(&data.train, &data.test, &grid, |r| {
        let acc = |m: &Option<era_gbdt::MetricReport>| m.as_ref().and_then(|m| m.accuracy).unwrap_or(f64::NAN);
        eprintln!(
            "{:>2} {:<16} train {:.3} test {:.3} ({:.1}s) {:?}",
            r.config_id,
            r.split_type.as_str(),
            acc(&r.train_metrics),
            acc(&r.test_metrics),
            r.wall_time_seconds,
            r.config
        );
        Ok(())
    })?;
    for st in SplitType::ALL {
        let best = best_by(&records, st, |r| r.test_metrics.as_ref()?.accuracy).unwrap();
        println!("{:<16} best test accuracy {:.4}", st.as_str(), best.test_metrics.as_ref().unwrap().accuracy.unwrap());
    }
    Ok(())
}
