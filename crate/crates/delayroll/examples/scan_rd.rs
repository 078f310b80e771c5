// scratch: seed/J/epoch scan for the reaction-diffusion TD-TF
use delayroll::data::{sample_bursts, Normalizer};
use delayroll::generators::{compute_pod, solve_reaction_diffusion, ReactionDiffusionConfig};
use delayroll::metrics::oscillation_amplitude;
use delayroll::tdtf::{rollout_tdtf, train, Activation, TdtfConfig, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = ReactionDiffusionConfig::default();
    let series = solve_reaction_diffusion(&cfg).unwrap();
    let (basis, coeffs) = compute_pod(&series.snapshots, 3, series.snapshot_dt, series.times[0]).unwrap();
    let traj = coeffs.subsample(5).unwrap();
    let norm = Normalizer::fit(std::slice::from_ref(&traj)).unwrap();
    let norm_traj = norm.normalize_trajectory(&traj).unwrap();
    let n = 10usize;
    let steps = traj.len() - n;
    let tail_amp = |t: &delayroll::Trajectory, mode: usize| {
        let s = t.component(mode).unwrap();
        let start = t.len() - t.len() / 3;
        oscillation_amplitude(&s[start..])
    };
    let field_rmse = |pred: &delayroll::Trajectory| {
        let mut err2 = 0.0;
        let mut count = 0usize;
        for (k, state) in pred.states().iter().enumerate() {
            let col = k * 5;
            if col >= series.snapshots.ncols() { break; }
            let rec = basis.reconstruct(state);
            err2 += (rec - series.snapshots.column(col)).norm_squared();
            count += series.snapshots.nrows();
        }
        (err2 / count as f64).sqrt()
    };

    for (j, epochs, init_seed, shuffle_seed) in [
        (2000usize, 500usize, 2u64, 3u64),
        (2000, 500, 3, 4),
        (2000, 500, 4, 5),
        (2000, 500, 5, 6),
        (8000, 500, 7, 8),
        (8000, 500, 1, 2),
        (2000, 1500, 7, 8),
        (2000, 1500, 1, 2),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let data = sample_bursts(std::slice::from_ref(&norm_traj), n, j, &mut rng).unwrap();
        let mcfg = TdtfConfig { n, d: 3, h: 100, pos_enc: true, activation: Activation::Tanh, seed: init_seed };
        let tc = TrainConfig { epochs, batch_size: 100, lr: 1e-2, weight_decay: 1e-5, seed: shuffle_seed, ..TrainConfig::default() };
        let (params, hist) = train(&mcfg, &tc, &data).unwrap();
        match rollout_tdtf(&mcfg, &params, &norm, &traj.head(n).unwrap(), steps) {
            Ok(pred) => {
                print!("J={j:5} ep={epochs:4} seeds({init_seed},{shuffle_seed}): loss {:.1e} ratios", hist.last().unwrap());
                for mode in 0..3 {
                    print!(" {:.3}", tail_amp(&pred, mode) / tail_amp(&traj, mode));
                }
                println!(" field_rmse {:.4}", field_rmse(&pred));
            }
            Err(e) => println!("J={j:5} ep={epochs:4} seeds({init_seed},{shuffle_seed}): rollout failed: {e}"),
        }
    }
}
