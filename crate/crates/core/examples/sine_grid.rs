//! Runs the shifted sine wave grid and prints best test MSE and mean train
//! MSE per split type.

use era_gbdt::experiment::{best_by, grid_search, GridSpec};
use era_gbdt::synth::{gen_sine_wave, SineWaveSpec};
use era_gbdt::SplitType;

fn main() -> era_gbdt::Result<()> {
    let mut args = std::env::args().skip(1);
    let data_seed: u64 = args.next().map_or(0, |s| s.parse().unwrap());
    let grid_seed: u64 = args.next().map_or(0, |s| s.parse().unwrap());
    let data = gen_sine_wave(&SineWaveSpec { seed: data_seed, ..Default::default() })?;
    let grid = GridSpec { seed: grid_seed, ..GridSpec::standard() };
    let records = grid_search(&data.train, &data.test, &grid, |_| Ok(()))?;
    for st in SplitType::ALL {
        let best = best_by(&records, st, |r| Some(-r.test_metrics.as_ref()?.mse)).unwrap();
        let train: Vec<f64> = records
            .iter()
            .filter(|r| r.split_type == st)
            .filter_map(|r| Some(r.train_metrics.as_ref()?.mse))
            .collect();
        println!(
            "{:<16} best test mse {:.4}  mean train mse {:.4}",
            st.as_str(),
            best.test_metrics.as_ref().unwrap().mse,
            train.iter().sum::<f64>() / train.len() as f64
        );
    }
    Ok(())
}
