//! Temporary calibration probe (removed before ship).

use fdfnet_core::data::{si_sdr, synth_eval_pairs, synth_in_memory, SynthConfig};
use fdfnet_core::pipeline::{
    full_forward, stage1_enhance, train_stage1, train_stage2, FdfNet, TrainSchedule,
};

#[test]
#[ignore]
fn calibrate_training() {
    let synth = SynthConfig {
        train_items: 16,
        val_items: 4,
        test_items: 6,
        clip_seconds: 1.0,
        snr_range: (0.0, 10.0),
        seed: 7,
    };
    let data = synth_in_memory(&synth).unwrap();
    let mut model = FdfNet::<f32>::with_defaults(1008).unwrap();

    let t0 = std::time::Instant::now();
    let sched1 = TrainSchedule { learning_rate: 2e-4, halve_patience: 5, batch_size: 1, max_epochs: 18 };
    let out1 = train_stage1(&mut model, &data, &sched1, 1008).unwrap();
    println!(
        "stage1 took {:.1}s: epochs {:?}",
        t0.elapsed().as_secs_f64(),
        out1.logs.iter().map(|l| (l.train_loss * 1e4).round() / 1e4).collect::<Vec<_>>()
    );

    let pairs = synth_eval_pairs(&synth).unwrap();
    let stage1_gain: Vec<f64> = pairs
        .iter()
        .map(|(clean, mixture)| {
            let (_, inter) = stage1_enhance(&model, mixture).unwrap();
            si_sdr(&inter, clean) - si_sdr(mixture, clean)
        })
        .collect();
    println!(
        "stage-1-only gains: {:?} (mean {:.2})",
        stage1_gain.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
        stage1_gain.iter().sum::<f64>() / stage1_gain.len() as f64
    );

    for epochs in [5usize, 8] {
        let mut m2 = FdfNet::<f32>::with_defaults(1008).unwrap();
        m2.params = model.params.clone();
        let t1 = std::time::Instant::now();
        let sched2 =
            TrainSchedule { learning_rate: 2e-4, halve_patience: 5, batch_size: 1, max_epochs: epochs };
        let out2 = train_stage2(&mut m2, &data, &sched2, 1008, 2.0).unwrap();
        println!(
            "stage2 ({epochs} ep) took {:.1}s: {:?} best {:.4}@{}",
            t1.elapsed().as_secs_f64(),
            out2.logs.iter().map(|l| (l.train_loss * 1e3).round() / 1e3).collect::<Vec<_>>(),
            out2.best_val,
            out2.best_epoch
        );
        for (label, params) in [("final", m2.params.clone()), ("best", out2.best_params.clone())] {
            let mut m = FdfNet::<f32>::with_defaults(1).unwrap();
            m.params = params;
            let gains: Vec<f64> = pairs
                .iter()
                .map(|(clean, mixture)| {
                    let enhanced = full_forward(&m, mixture).unwrap();
                    si_sdr(&enhanced, clean) - si_sdr(mixture, clean)
                })
                .collect();
            println!(
                "  {label}: {:?} mean {:.2} dB",
                gains.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
                gains.iter().sum::<f64>() / gains.len() as f64
            );
        }
    }
}
