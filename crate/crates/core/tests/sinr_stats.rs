use owc_aloha::montecarlo::conditioned_sinr;
use owc_aloha::sinr::{cf_single, invert_cf, sinr_pdf_conditional, CfGrid, SinrDistribution, SinrTables};
use owc_aloha::{DerivedConstants, InversionMethod, InversionOptions, SystemConfig};

fn reference() -> DerivedConstants {
    SystemConfig::reference().derive().unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let inner: f64 = (1..panels).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn cf_slope_at_origin_is_the_mean() {
    let c = reference();
    let h = 1e-5;
    let slope = (cf_single(h, &c) - cf_single(-h, &c)) / (2.0 * h);
    let mean = simpson(|g| g * c.snr_pdf(g), c.gamma_min, c.gamma_max, 20_000);
    assert!(((slope.im - mean) / mean).abs() < 1e-4, "{} vs {mean}", slope.im);
    assert!(slope.re.abs() < 1e-6);
}

#[test]
fn three_user_interference_matches_direct_convolution() {
    let c = reference();
    let (a, b) = (c.gamma_min, c.gamma_max);
    let grid = CfGrid::for_interference(3, &c, &InversionOptions::default()).unwrap();
    let inter = invert_cf(3, &grid, &c).unwrap();
    assert_eq!(inter.support, (2.0 * a, 2.0 * b));
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for i in (1..inter.gamma_grid.len() - 1).step_by(101) {
        let g = inter.gamma_grid[i];
        let (lo, hi) = ((g - b).max(a), (g - a).min(b));
        let want = if hi > lo { simpson(|s| c.snr_pdf(s) * c.snr_pdf(g - s), lo, hi, 2000) } else { 0.0 };
        peak = peak.max(want);
        worst = worst.max((inter.pdf_values[i] - want).abs());
    }
    assert!(worst <= 5e-3 * peak, "sup error {worst} vs peak {peak}");
}

#[test]
fn four_user_interference_matches_triple_convolution() {
    let c = reference();
    let (a, b) = (c.gamma_min, c.gamma_max);
    let pair = |g: f64| {
        let (lo, hi) = ((g - b).max(a), (g - a).min(b));
        if hi > lo { simpson(|s| c.snr_pdf(s) * c.snr_pdf(g - s), lo, hi, 400) } else { 0.0 }
    };
    let grid = CfGrid::for_interference(4, &c, &InversionOptions::default()).unwrap();
    let inter = invert_cf(4, &grid, &c).unwrap();
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for &g in &[2.0, 5.0, 10.0, 20.0, 35.0, 60.0] {
        let (lo, hi) = ((g - 2.0 * b).max(a), (g - 2.0 * a).min(b));
        let want = simpson(|s| c.snr_pdf(s) * pair(g - s), lo, hi, 400);
        peak = peak.max(want);
        worst = worst.max((inter.pdf(g) - want).abs());
    }
    assert!(worst <= 5e-3 * peak, "sup error {worst} vs peak {peak}");
}

#[test]
fn conditional_pdf_integrates_to_one_and_dominance_holds() {
    let c = reference();
    let tables = SinrTables::build(&c, 16, &InversionOptions::default()).unwrap();
    for d in tables.iter() {
        assert!((d.mass() - 1.0).abs() < 1e-3, "U_a = {}: mass {}", d.u_a, d.mass());
        assert!(d.cdf_values.windows(2).all(|w| w[1] >= w[0]));
        assert!(d.pdf_values.iter().all(|&v| v >= 0.0));
    }
    let probes: Vec<f64> = (0..200).map(|i| 10f64.powf(-3.0 + 4.5 * i as f64 / 199.0)).collect();
    for u in 1..16 {
        let (lo, hi) = (tables.get(u).unwrap(), tables.get(u + 1).unwrap());
        for &g in &probes {
            assert!(lo.cdf(g) <= hi.cdf(g) + 1e-7, "U_a = {u}, gamma = {g}");
        }
    }
}

#[test]
fn conditional_pdf_matches_monte_carlo_histogram() {
    let c = reference();
    let dist = SinrDistribution::build(4, &c, &InversionOptions::default()).unwrap();
    let samples = conditioned_sinr(1_000_000, 11, 4, &c).unwrap();
    // bin width keeps the sampling noise of the density (about sqrt(f / (n w)))
    // a few times below the tolerance where the density peaks
    let (lo, hi) = (0.0, 5.0);
    let bins = 20;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &samples {
        if s >= lo && s < hi {
            counts[((s - lo) / width) as usize] += 1;
        }
    }
    let n = samples.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, &k) in counts.iter().enumerate() {
        let (x0, x1) = (lo + i as f64 * width, lo + (i + 1) as f64 * width);
        let analytic = (dist.cdf(x1) - dist.cdf(x0)) / width;
        worst = worst.max((k as f64 / n / width - analytic).abs());
    }
    assert!(worst <= 1e-2, "binned sup-norm {worst}");
}

#[test]
fn ratio_integral_matches_tabulated_density_for_several_users() {
    let c = reference();
    for u in [2usize, 5] {
        let grid = CfGrid::for_interference(u, &c, &InversionOptions::default()).unwrap();
        let inter = invert_cf(u, &grid, &c).unwrap();
        let d = SinrDistribution::from_interference(&inter, &c, 1024).unwrap();
        let (lo, hi) = d.support();
        assert_eq!(sinr_pdf_conditional(lo * 0.5, u, &c, Some(&inter)).unwrap(), 0.0);
        for i in 1..20 {
            let x = lo * (hi / lo).powf(i as f64 / 20.0);
            let direct = sinr_pdf_conditional(x, u, &c, Some(&inter)).unwrap();
            assert!((direct - d.pdf(x)).abs() <= 1e-6 * (1.0 + direct), "U_a = {u}, x = {x}");
        }
    }
}

#[test]
fn dumps_are_two_column_text() {
    let c = reference();
    let d = SinrDistribution::build(2, &c, &InversionOptions::default()).unwrap();
    let mut out = Vec::new();
    d.write_pdf(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# gamma pdf"));
    for line in lines {
        let cols: Vec<f64> = line.split(' ').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
    }
}

fn with_method(method: InversionMethod) -> InversionOptions {
    InversionOptions { method, ..InversionOptions::default() }
}

#[test]
fn convolution_and_fourier_routes_agree() {
    let c = reference();
    let fourier = SinrTables::build(&c, 8, &with_method(InversionMethod::Fourier)).unwrap();
    let convolved = SinrTables::build(&c, 8, &with_method(InversionMethod::Convolution)).unwrap();
    let probes: Vec<f64> = (0..300).map(|i| 10f64.powf(-3.0 + 4.5 * i as f64 / 299.0)).collect();
    for u in [2usize, 4, 8] {
        let (x, y) = (fourier.get(u).unwrap(), convolved.get(u).unwrap());
        let worst = probes.iter().map(|&g| (x.cdf(g) - y.cdf(g)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "U_a = {u}: sup cdf gap {worst}");
    }
}

#[test]
fn convolution_route_matches_monte_carlo_in_a_wide_cell() {
    // low ceiling and narrow beam: gamma_max / gamma_min is about 4e9
    let mut cfg = SystemConfig::reference();
    cfg.frontend.semi_angle = 30f64.to_radians();
    cfg.geometry.height = 1.0;
    let c = cfg.derive().unwrap();
    assert!(c.gamma_max / c.gamma_min > 1e9);
    let tables = SinrTables::build(&c, 4, &InversionOptions::default()).unwrap();
    for u in [2usize, 4] {
        let d = tables.get(u).unwrap();
        let draws = conditioned_sinr(1_000_000, 40 + u as u64, u, &c).unwrap();
        let ks = owc_aloha::montecarlo::ks_distance(&draws, |x| d.cdf(x));
        assert!(ks <= 5e-3, "U_a = {u}: KS distance {ks}");
    }
}
