use owc_aloha::montecarlo::{conditioned_sinr, empirical_cdf, estimate_metrics, ks_distance, simulate, slot_rng};
use owc_aloha::{FblParams, ProtocolConfig, SimConfig, SystemConfig};
use rand::Rng;

#[test]
fn identical_output_for_any_thread_count() {
    let c = SystemConfig::reference().derive().unwrap();
    let p = ProtocolConfig::new(50, 0.05);
    let sim = SimConfig::new(50_000, 99);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&sim, &c, &p).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one, four);
    let fbl = FblParams::new(128, 0.5);
    assert_eq!(estimate_metrics(&one, &fbl, 1.0, true), estimate_metrics(&four, &fbl, 1.0, true));
    assert_ne!(one, simulate(&SimConfig::new(50_000, 100), &c, &p).unwrap());
}

#[test]
fn reference_snr_mean_matches_closed_form() {
    let c = SystemConfig::reference().derive().unwrap();
    let samples = simulate(&SimConfig::new(1_000_000, 4), &c, &ProtocolConfig::new(50, 0.05)).unwrap();
    let g: Vec<f64> = samples.iter().flatten().map(|s| s.reference_gamma).collect();
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let se = (g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - c.snr_mean()).abs() <= 3.0 * se, "{mean} vs {} +- {se}", c.snr_mean());
    assert!(samples.iter().flatten().all(|s| s.sinr <= s.reference_gamma && s.u_a >= 1));
}

#[test]
fn standard_errors_scale_with_sample_size() {
    let c = SystemConfig::reference().derive().unwrap();
    let p = ProtocolConfig::new(50, 0.05);
    let fbl = FblParams::new(64, 0.5).allowing_short_blocklength();
    let se: Vec<f64> = [10_000u64, 100_000, 1_000_000]
        .iter()
        .map(|&n| estimate_metrics(&simulate(&SimConfig::new(n, 17), &c, &p).unwrap(), &fbl, 1.1, true).se_epsilon)
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1] / 10f64.sqrt();
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "{se:?}");
    }
}

#[test]
fn empirical_cdf_of_uniforms() {
    let u: Vec<f64> = (0..1_000_000u64).map(|i| slot_rng(5, i).random::<f64>()).collect();
    assert!(ks_distance(&u, |x| x) <= 2e-3);
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let f = empirical_cdf(&u, &grid);
    assert!(f.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(f[100], 1.0);
}

#[test]
fn lone_user_draws_follow_closed_form() {
    let c = SystemConfig::reference().derive().unwrap();
    let draws = conditioned_sinr(1_000_000, 6, 1, &c).unwrap();
    assert!(ks_distance(&draws, |x| c.snr_cdf(x)) <= 0.01);
}

#[test]
fn sample_dump_format() {
    let c = SystemConfig::reference().derive().unwrap();
    let samples = simulate(&SimConfig::new(100, 1), &c, &ProtocolConfig::new(10, 0.3)).unwrap();
    let mut out = Vec::new();
    owc_aloha::montecarlo::write_samples(&mut out, &samples).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 1 + samples.iter().flatten().count());
    for line in text.lines().skip(1) {
        let mut cols = line.split(' ');
        assert!(cols.next().unwrap().parse::<usize>().unwrap() >= 1);
        assert!(cols.next().unwrap().parse::<f64>().unwrap() > 0.0);
    }
}
