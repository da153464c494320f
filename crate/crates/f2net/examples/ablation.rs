//! Ablation experiment driver: trains the matching/fusion variants on the
//! same synthetic suite and prints the resulting validation J values.
//!
//!     cargo run --example ablation -- [epochs] [count] [lr] [seed] [scenarios] [sigma_match]

use f2net::center::CenterConfig;
use f2net::data::{DataConfig, Scenario, gen_synthetic};
use f2net::fusion::FusionMode;
use f2net::model::{MatchingMode, ModelConfig, TrainConfig, init_params, train, validate_j};
use f2net::tensor::Precision;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let count: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(7);
    let sigma_match: Option<f64> = args.get(6).and_then(|s| s.parse().ok());
    let scenarios: Vec<Scenario> = args
        .get(5)
        .map(|s| s.split(',').map(|t| Scenario::parse(t).expect("scenario")).collect())
        .unwrap_or_else(|| {
            vec![
                Scenario::Similarity,
                Scenario::Plain,
                Scenario::Similarity,
                Scenario::Occlusion,
                Scenario::Similarity,
                Scenario::AppearanceChange,
            ]
        });

    let dcfg = DataConfig {
        width: 64,
        height: 64,
        frames: 8,
        count,
        scenarios,
        motion_scale: 1.0,
    };
    let videos = gen_synthetic(&dcfg, 77).expect("dataset");
    let held_out = gen_synthetic(
        &DataConfig {
            count: 12,
            ..dcfg.clone()
        },
        770,
    )
    .expect("held-out dataset");

    let variants: [(&str, MatchingMode, FusionMode); 5] = [
        ("baseline off+concat", MatchingMode::Off, FusionMode::ConcatBaseline),
        ("AD uniform+csa", MatchingMode::Uniform, FusionMode::Csa),
        ("CGAD center+csa", MatchingMode::CenterGuided, FusionMode::Csa),
        ("CGAD center+ca", MatchingMode::CenterGuided, FusionMode::Ca),
        ("CGAD center+concat", MatchingMode::CenterGuided, FusionMode::ConcatBaseline),
    ];
    for (name, matching, fusion) in variants {
        let start = std::time::Instant::now();
        let cfg = ModelConfig {
            width: 64,
            height: 64,
            c2: 8,
            c4: 12,
            c_embed: 16,
            d_center: 16,
            dec_mid: 8,
            fusion,
            matching,
            sigma_match,
            center: CenterConfig {
                sigma_gt: 2.0,
                ..CenterConfig::default()
            },
            ..ModelConfig::default()
        };
        let tcfg = TrainConfig {
            lr,
            epochs,
            gt_center_epochs: epochs,
            seed,
            precision: Precision::Double,
            ..TrainConfig::default()
        };
        let mut params = init_params(&cfg, seed).expect("params");
        let mut trace: Vec<f64> = Vec::new();
        let logs = train(&cfg, &tcfg, &mut params, &videos, 0, |log, p| {
            if (log.epoch + 1) % 5 == 0 {
                trace.push(validate_j(&cfg, p, &held_out)?);
            }
            Ok(())
        })
        .expect("train");
        let j = validate_j(&cfg, &params, &held_out).expect("validate");
        let best = trace.iter().copied().fold(j, f64::max);
        let tail: Vec<f64> = trace.iter().rev().take(4).copied().collect();
        let tail_mean = if tail.is_empty() {
            j
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        };
        let last = logs.last().unwrap();
        let mut per: std::collections::BTreeMap<&str, (f64, usize)> = Default::default();
        for v in &held_out {
            let jv = validate_j(&cfg, &params, std::slice::from_ref(v)).unwrap();
            let e = per.entry(v.scenario.name()).or_insert((0.0, 0));
            e.0 += jv;
            e.1 += 1;
        }
        let detail: Vec<String> = per
            .iter()
            .map(|(k, (s, n))| format!("{k}={:.3}", s / *n as f64))
            .collect();
        let trace_str: Vec<String> = trace.iter().map(|v| format!("{v:.4}")).collect();
        println!("trace {name}: {}", trace_str.join(" "));
        println!(
            "{name:22} J={j:.4} best={best:.4} tail={tail_mean:.4}  L_f={:.2} L_b={:.2}  ({:.1}s)  [{}]",
            last.dynamic_f,
            last.dynamic_b,
            start.elapsed().as_secs_f64(),
            detail.join(" ")
        );
    }
}
