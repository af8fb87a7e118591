use pas_core::bench::{default_time_scale, delta_scan, sampling_scan, SyntheticTask};
use pas_core::rope::FrequencyLineSet;
use pas_core::stats;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let jitter: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.35);
    let tasks: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let trials: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(100);
    let alpha: Option<f64> = args.get(4).and_then(|s| s.parse().ok());

    let ls = FrequencyLineSet::geometric(64, 10_000.0).unwrap();
    let ts = match alpha {
        Some(a) => pas_core::rope::TimeScale::bins_scaled(a).unwrap(),
        None => default_time_scale(),
    };
    let template = SyntheticTask::new(0);

    let deltas: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let t0 = std::time::Instant::now();
    let rep = delta_scan(&template, &ls, &ts, &deltas, tasks, trials, jitter, 7).unwrap();
    println!("delta scan in {:?}", t0.elapsed());
    let pas = rep.metric("pas_hit_rate").unwrap();
    let gap = rep.metric("gap").unwrap();
    let se = rep.metric("gap_std_err").unwrap();
    println!("baseline {}", rep.metric("baseline_hit_rate").unwrap()[0]);
    for (i, d) in deltas.iter().enumerate() {
        let sig = if i > 0 && gap[i] > 2.0 * se[i] { "SIG" } else { "---" };
        println!("  d={d:.1} pas={:.3} gap={:+.3} 2se={:.3} {sig}", pas[i], gap[i], 2.0 * se[i]);
    }
    let plateau: Vec<f64> = deltas
        .iter()
        .zip(pas.iter())
        .filter(|(d, _)| (0.3..=0.8).contains(*d))
        .map(|(_, p)| *p)
        .collect();
    let pmax = plateau.iter().cloned().fold(f64::MIN, f64::max);
    let pmin = plateau.iter().cloned().fold(f64::MAX, f64::min);
    println!("plateau spread {:.3} (need < 0.05)", pmax - pmin);

    // Sampling scan over 20 seeds.
    let ratios = [0.1, 0.15, 0.25, 0.4, 0.6, 0.8, 1.0];
    let t0 = std::time::Instant::now();
    let mut all_r = Vec::new();
    let mut all_gap = Vec::new();
    let mut r1_gaps = Vec::new();
    let mut base_by_r = vec![0.0; ratios.len()];
    for seed in 0..20u64 {
        let rep = sampling_scan(&template, &ls, &ts, &ratios, 10, 40, jitter, 1000 + seed).unwrap();
        let gap = rep.metric("gap").unwrap();
        let base = rep.metric("baseline_hit_rate").unwrap();
        for (i, r) in ratios.iter().enumerate() {
            all_r.push(*r);
            all_gap.push(gap[i]);
            base_by_r[i] += base[i] / 20.0;
            if *r == 1.0 {
                r1_gaps.push(gap[i]);
            }
        }
    }
    println!("baselines by r: {:?}", base_by_r.iter().map(|b| (b * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    println!("sampling scans in {:?}", t0.elapsed());
    for r in ratios {
        let g: Vec<f64> = all_r
            .iter()
            .zip(all_gap.iter())
            .filter(|(rr, _)| **rr == r)
            .map(|(_, g)| *g)
            .collect();
        println!("  r={r}: mean gap {:+.3} (se {:.3})", stats::mean(&g), stats::std_err(&g));
    }
    let rho = stats::spearman(&all_r, &all_gap);
    let n = all_r.len() as f64;
    let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
    println!("spearman rho {rho:+.3} (n={n}, t={t:+.2})");
    println!(
        "r=1 gap mean {:+.4}, 2se {:.4}",
        stats::mean(&r1_gaps),
        2.0 * stats::std_err(&r1_gaps)
    );
}
