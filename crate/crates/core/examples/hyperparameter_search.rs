//! Pick regularization, step size and epoch count by the held-out objective.

use videostory::corpus::split_corpus;
use videostory::embedding::{grid_search, Hyperparams, StepSchedule};
use videostory::oracle::{synth_corpus, SynthSpec};

fn main() -> videostory::Result<()> {
    let synth = synth_corpus(&SynthSpec { n: 300, m: 40, dims: vec![16], k_true: 8, seed: 2, ..SynthSpec::default() })?;
    let (train, val) = split_corpus(&synth.corpus, 0.8, 0)?;

    let mut grid = Vec::new();
    for lambda in [1e-3, 1e-2, 1e-1] {
        for eta in [0.005, 0.02] {
            for epochs in [5, 20] {
                grid.push(Hyperparams {
                    k: 8,
                    lambda_a: lambda,
                    lambda_s: lambda,
                    lambda_w: lambda,
                    eta,
                    epochs,
                    schedule: StepSchedule::InverseDecay { rate: 1e-4 },
                    seed: 1,
                    ..Hyperparams::default()
                });
            }
        }
    }
    let search = grid_search(&train, &val, &grid, 0)?;
    for (hp, score) in grid.iter().zip(&search.scores) {
        println!("lambda {:<6} eta {:<6} epochs {:<3} -> {score:.4}", hp.lambda_a, hp.eta, hp.epochs);
    }
    let best = &grid[search.best];
    println!("best: lambda {} eta {} epochs {}", best.lambda_a, best.eta, best.epochs);
    Ok(())
}
