use std::sync::OnceLock;

use owc_aloha::fbl::error_prob_conditional;
use owc_aloha::montecarlo::{conditioned_sinr, estimate_metrics, simulate};
use owc_aloha::protocol::{active_prob, outage_conditional, outage_unconditional, single_user_error};
use owc_aloha::{
    evaluate, AnalysisOptions, ConditionalMetrics, ConditionalStats, FblParams, ProtocolConfig, SimConfig, SystemConfig,
};

fn stats() -> &'static ConditionalStats {
    static STATS: OnceLock<ConditionalStats> = OnceLock::new();
    STATS.get_or_init(|| {
        let c = SystemConfig::reference().derive().unwrap();
        ConditionalStats::build(&c, 32, &AnalysisOptions::default()).unwrap()
    })
}

fn code() -> FblParams {
    FblParams::new(64, 0.5).allowing_short_blocklength()
}

#[test]
fn idle_cell_reports_nothing() {
    let r = evaluate(stats(), &ProtocolConfig::new(50, 0.0), &code()).unwrap();
    assert_eq!((r.epsilon, r.throughput, r.p_out, r.reliability), (0.0, 0.0, 0.0, 1.0));
    let nc = evaluate(stats(), &ProtocolConfig::new(50, 0.0).without_capture(), &code()).unwrap();
    assert_eq!(nc.throughput, 0.0);
}

#[test]
fn single_device_reduces_to_bernoulli() {
    let p_a = 0.3;
    let r = evaluate(stats(), &ProtocolConfig::new(1, p_a), &code()).unwrap();
    let eps1 = error_prob_conditional(stats().distribution(1).unwrap(), &code());
    assert!((r.epsilon - eps1 * p_a).abs() < 1e-15);
    let c = stats().constants();
    assert!((r.p_out - c.snr_cdf(r.gamma_th) * p_a).abs() < 1e-15);
    let direct = outage_unconditional(stats(), &ProtocolConfig::new(1, p_a), r.gamma_th).unwrap();
    assert!((direct - r.p_out).abs() < 1e-15);
}

#[test]
fn interference_free_routes_agree() {
    let c = stats().constants();
    let ratio_route = error_prob_conditional(stats().distribution(1).unwrap(), &code());
    let closed = single_user_error(c, &code());
    assert!((ratio_route - closed).abs() < 1e-9, "{ratio_route} vs {closed}");
}

#[test]
fn report_invariants_over_activation_grid() {
    let m = ConditionalMetrics::compute(stats(), &code()).unwrap();
    for i in 0..=50 {
        let p = ProtocolConfig::new(50, i as f64 / 100.0);
        let r = m.report(&p, 0.5).unwrap();
        for v in [r.epsilon, r.p_out, r.reliability] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert_eq!(r.reliability, 1.0 - r.p_out);
        assert!(r.throughput >= 0.0 && r.throughput <= 0.5 * p.activity() + 1e-15);
        let w0 = active_prob(0, 50, p.access_prob).unwrap();
        let total = w0 + r.per_k.iter().map(|k| k.weight).sum::<f64>();
        assert!((total - 1.0).abs() < 1e-9);
        let nc = m.report(&p.without_capture(), 0.5).unwrap();
        assert!(r.throughput >= nc.throughput - 1e-12);
    }
}

#[test]
fn no_capture_only_credits_lone_users() {
    let m = ConditionalMetrics::compute(stats(), &code()).unwrap();
    let p = ProtocolConfig::new(50, 0.05).without_capture();
    let r = m.report(&p, 0.5).unwrap();
    let w1 = active_prob(1, 50, 0.05).unwrap();
    assert!((r.epsilon - m.single_user.0 * w1).abs() < 1e-15);
    assert!((r.throughput_raw - 0.5 * (w1 - r.epsilon)).abs() < 1e-15);
    assert!(r.per_k.iter().filter(|k| k.k > 1).all(|k| k.epsilon == 0.0 && k.p_out == 0.0));
}

#[test]
fn outage_outside_support() {
    let d = stats().distribution(3).unwrap();
    let (lo, hi) = d.support();
    assert_eq!(outage_conditional(3, lo * 0.5, stats()).unwrap(), 0.0);
    assert!((outage_conditional(3, hi * 2.0, stats()).unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn two_user_outage_matches_monte_carlo() {
    let c = stats().constants();
    let r = evaluate(stats(), &ProtocolConfig::new(50, 0.05), &code()).unwrap();
    let draws = conditioned_sinr(1_000_000, 21, 2, c).unwrap();
    let n = draws.len() as f64;
    let frac = draws.iter().filter(|&&s| s < r.gamma_th).count() as f64 / n;
    let se = (frac * (1.0 - frac) / n).sqrt();
    let analytic = outage_conditional(2, r.gamma_th, stats()).unwrap();
    assert!((analytic - frac).abs() <= 3.0 * se, "{analytic} vs {frac} +- {se}");
}

#[test]
fn no_capture_matches_monte_carlo() {
    let c = stats().constants();
    let p = ProtocolConfig::new(20, 0.05).without_capture();
    let r = evaluate(stats(), &p, &code()).unwrap();
    let samples = simulate(&SimConfig::new(400_000, 8), c, &p).unwrap();
    let mc = estimate_metrics(&samples, &code(), r.gamma_th, false);
    assert!((r.epsilon - mc.epsilon).abs() <= 3.0 * mc.se_epsilon);
    assert!((r.throughput - mc.throughput).abs() <= 3.0 * mc.se_throughput);
    assert!((r.p_out - mc.p_out).abs() <= 3.0 * mc.se_p_out);
}

#[test]
fn optimal_activation_moves_down_with_more_devices() {
    let m = ConditionalMetrics::compute(stats(), &code()).unwrap();
    let grid: Vec<f64> = (1..=50).map(|i| i as f64 / 100.0).collect();
    let best = |users: usize| {
        let t: Vec<f64> = grid.iter().map(|&pa| m.report(&ProtocolConfig::new(users, pa), 0.5).unwrap().throughput).collect();
        let i = (0..t.len()).max_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap()).unwrap();
        assert!(i > 0 && i + 1 < t.len(), "boundary maximum for U = {users}");
        grid[i]
    };
    let opt: Vec<f64> = [30, 50, 80].iter().map(|&u| best(u)).collect();
    assert!(opt.windows(2).all(|w| w[1] <= w[0]), "{opt:?}");
}

#[test]
fn rejects_invalid_protocols() {
    assert!(evaluate(stats(), &ProtocolConfig::new(0, 0.1), &code()).is_err());
    assert!(evaluate(stats(), &ProtocolConfig::new(5, 1.5), &code()).is_err());
    assert!(evaluate(stats(), &ProtocolConfig::new(5, 0.1), &FblParams::new(64, 0.5)).is_err());
}
