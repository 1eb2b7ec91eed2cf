//! Conditional SINR statistics of the reference user.
//!
//! The interference `gamma_I` is a sum of `U_a - 1` i.i.d. single-user SNRs.
//! Its density is recovered from the characteristic function by a discrete
//! Fourier inversion; the SINR `gamma_1 / (gamma_I + 1)` then follows from the
//! ratio-distribution integral over `lambda = gamma_I + 1`.
//!
//! Characteristic functions are computed by quadrature of their defining
//! integral. Point evaluations ([`cf_single`]) use adaptive Gauss–Kronrod; the
//! inversion lattice uses a Filon (piecewise-linear) rule whose frequency sums
//! are done with one FFT.
//!
//! When `gamma_max / gamma_min` spans too many decades for a uniform lattice,
//! the interference density is instead built by repeated convolution on
//! log-spaced grids ([`convolve_interference`]).

use std::io::{self, Write};

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::optics::DerivedConstants;
use crate::quadrature::{gauss_kronrod, Quadrature};
use crate::scalar::{lit, to_f64, Real};

/// How the interference density is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InversionMethod {
    /// Fourier inversion, falling back to convolution where the lattice cannot
    /// resolve the density.
    #[default]
    Auto,
    /// Fourier inversion only.
    Fourier,
    /// Log-grid convolution only.
    Convolution,
}

/// Discretisation controls for the interference density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions<T> {
    pub method: InversionMethod,
    /// Smallest inversion grid (power of two, at least 2^12).
    pub min_points: usize,
    /// Largest inversion grid the adaptive `t_max` doubling may reach.
    pub max_points: usize,
    /// Target for `|cf_interference(t_max)|`.
    pub cf_tolerance: T,
    /// Relative padding of the inversion window around the interference support.
    pub margin: T,
    /// Target relative error of the piecewise-linear density used by the Filon rule.
    pub filon_tolerance: T,
    /// Upper bound on the Filon FFT length.
    pub max_filon_points: usize,
    /// Points of the log-spaced SINR tabulation.
    pub sinr_grid_points: usize,
    /// Grid density of the convolution route.
    pub convolution_points_per_decade: usize,
    /// Smallest nonzero offset of the convolution grids, relative to `min(gamma_min, 1)`.
    pub convolution_floor: T,
}

impl<T: Real> Default for InversionOptions<T> {
    fn default() -> Self {
        Self {
            min_points: 1 << 15,
            max_points: 1 << 18,
            cf_tolerance: lit(1e-8),
            margin: lit(0.05),
            filon_tolerance: lit(1e-6),
            max_filon_points: 1 << 22,
            sinr_grid_points: 1024,
            method: InversionMethod::Auto,
            convolution_points_per_decade: 64,
            convolution_floor: lit(1e-6),
        }
    }
}

impl<T: Real> InversionOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.min_points.is_power_of_two() || self.min_points < 1 << 12 {
            return Err(Error::invalid("min_points", "must be a power of two >= 4096"));
        }
        if !self.max_points.is_power_of_two() || self.max_points < self.min_points {
            return Err(Error::invalid("max_points", "must be a power of two >= min_points"));
        }
        if !self.max_filon_points.is_power_of_two() || self.max_filon_points < 4 * self.max_points {
            return Err(Error::invalid("max_filon_points", "must be a power of two >= 4 * max_points"));
        }
        if !(self.cf_tolerance > T::zero() && self.margin > T::zero() && self.filon_tolerance > T::zero()) {
            return Err(Error::invalid("cf_tolerance", "tolerances and margin must be positive"));
        }
        if self.sinr_grid_points < 16 {
            return Err(Error::invalid("sinr_grid_points", "must be at least 16"));
        }
        if self.convolution_points_per_decade < 8 {
            return Err(Error::invalid("convolution_points_per_decade", "must be at least 8"));
        }
        if !(self.convolution_floor > T::zero() && self.convolution_floor < T::one()) {
            return Err(Error::invalid("convolution_floor", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Frequency/density lattice pair of one inversion.
///
/// The density grid is `origin + i * span / n_points`; the frequency samples
/// are `t_n = n * delta_t` with `delta_t = 2 t_max / n_points = 2 pi / span`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfGrid<T> {
    pub t_max: T,
    pub n_points: usize,
    pub delta_t: T,
    pub origin: T,
    pub span: T,
    /// FFT length of the Filon sums (multiple of `n_points`).
    pub filon_points: usize,
    /// Number of Filon panels across `[gamma_min, gamma_max]`.
    pub filon_panels: usize,
    /// Whether `max_points` stopped the `t_max` doubling short of `cf_tolerance`.
    pub truncated: bool,
    /// Whether the Filon panels reach the interpolation accuracy `filon_tolerance`.
    pub filon_resolved: bool,
}

impl<T: Real> CfGrid<T> {
    /// Sizes the lattice for the interference of `u_a - 1` users.
    ///
    /// `t_max` doubles until the envelope `(2 f(gamma_min) / t)^{U_a - 1}`, an
    /// upper bound on `|cf_interference(t)|` for a decreasing density, drops
    /// below `cf_tolerance`, or the grid reaches `max_points`.
    pub fn for_interference(u_a: usize, constants: &DerivedConstants<T>, opts: &InversionOptions<T>) -> Result<Self> {
        opts.validate()?;
        if u_a < 2 {
            return Err(Error::invalid("u_a", "interference needs at least two active users"));
        }
        let k = lit::<T>((u_a - 1) as f64);
        let (a, b) = (constants.gamma_min, constants.gamma_max);
        let width = b - a;
        let span_req = (T::one() + opts.margin) * k * width;

        let peak = constants.snr_pdf(a);
        let envelope_at = |t: T| (lit::<T>(2.0) * peak / t).powf(k);
        let mut n_points = opts.min_points;
        while n_points < opts.max_points && envelope_at(T::PI() * lit((n_points) as f64) / span_req) > opts.cf_tolerance {
            n_points *= 2;
        }
        let truncated = envelope_at(T::PI() * lit(n_points as f64) / span_req) > opts.cf_tolerance;

        // interpolation error of the density ~ h^2 p (p + 1) / (8 gamma^2), worst at gamma_min
        let p = constants.pdf_exponent();
        let h_req = a * (lit::<T>(8.0) * opts.filon_tolerance / (p * (p + T::one()))).sqrt();
        let panels_req = (width / h_req).ceil();
        let m_req = (panels_req * span_req / width).to_f64().unwrap_or(f64::MAX);
        let mut filon_points = 4 * n_points;
        while (filon_points as f64) < m_req && filon_points < opts.max_filon_points {
            filon_points *= 2;
        }
        let filon_points_t = lit::<T>(filon_points as f64);
        let filon_panels = (filon_points_t * width / span_req).floor().to_usize().unwrap_or(2).max(2);
        let h = width / lit(filon_panels as f64);
        let span = filon_points_t * h;
        let origin = k * a - (span - k * width) * lit(0.5);
        let delta_t = T::TAU() / span;
        Ok(Self {
            t_max: delta_t * lit((n_points / 2) as f64),
            n_points,
            delta_t,
            origin,
            span,
            filon_points,
            filon_panels,
            truncated,
            filon_resolved: (filon_points as f64) >= m_req,
        })
    }

    pub fn spacing(&self) -> T {
        self.span / lit(self.n_points as f64)
    }
}

/// Density of the aggregate interference SNR `gamma_I` for a given `U_a`.
///
/// Nodes are the uniform inversion grid points strictly inside the support,
/// bracketed by the exact support endpoints.
#[derive(Debug, Clone)]
pub struct InterferenceDistribution<T> {
    pub u_a: usize,
    pub support: (T, T),
    pub gamma_grid: Vec<T>,
    pub pdf_values: Vec<T>,
    /// Trapezoid mass of the raw inversion before clamping.
    pub raw_mass: T,
    /// Factor applied after clamping negative ripple.
    pub renormalisation: T,
    /// Fourier lattice, `None` for the convolution route.
    pub grid: Option<CfGrid<T>>,
}

impl<T: Real> InterferenceDistribution<T> {
    pub fn pdf(&self, gamma: T) -> T {
        interpolate(&self.gamma_grid, &self.pdf_values, gamma)
    }

    pub fn mass(&self) -> T {
        trapezoid(&self.gamma_grid, &self.pdf_values)
    }

    pub fn mean(&self) -> T {
        let weighted: Vec<T> = self.gamma_grid.iter().zip(&self.pdf_values).map(|(&g, &f)| g * f).collect();
        trapezoid(&self.gamma_grid, &weighted)
    }

    /// Two-column dump: `# gamma pdf` header then one pair per line.
    pub fn write_pdf<W: Write>(&self, w: W) -> io::Result<()> {
        write_two_column(w, "# gamma pdf", &self.gamma_grid, &self.pdf_values)
    }
}

/// CF of a single user's SNR at frequency `t`, by adaptive quadrature.
pub fn cf_single<T: Real>(t: T, constants: &DerivedConstants<T>) -> Complex<T> {
    let (a, b) = (constants.gamma_min, constants.gamma_max);
    if t == T::zero() {
        // exact total probability
        return Complex::new(T::one(), T::zero());
    }
    let periods = (t.abs() * (b - a) / T::TAU()).ceil().to_usize().unwrap_or(1).clamp(1, 100_000);
    let breaks: Vec<T> = (0..=periods).map(|i| a + (b - a) * lit(i as f64) / lit(periods as f64)).collect();
    let q = Quadrature { abs_tol: lit(1e-13), rel_tol: lit(1e-13), max_segments: 4 * periods + 2000 };
    q.integrate_with_breaks(|g: T| Complex::new(T::zero(), t * g).exp() * constants.snr_pdf(g), &breaks)
        .value
}

/// CF of the interference sum, `cf_single(t)^{U_a - 1}`.
pub fn cf_interference<T: Real>(t: T, u_a: usize, constants: &DerivedConstants<T>) -> Complex<T> {
    if u_a <= 1 {
        return Complex::new(T::one(), T::zero());
    }
    cf_single(t, constants).powi((u_a - 1) as i32)
}

/// Filon characteristic function of the piecewise-linear interpolant of
/// `samples` on `a + j h`, `j = 0..=panels`, at `t_n = n delta_t`, `n = 0..=n_points/2`.
fn filon_lattice<T: Real>(samples: &[T], a: T, grid: &CfGrid<T>) -> Vec<Complex<T>> {
    let m = grid.filon_points;
    let panels = samples.len() - 1;
    let h = grid.span / lit(m as f64);
    let mut buf: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); m];
    for (slot, &y) in buf.iter_mut().zip(samples) {
        slot.re = y;
    }
    FftPlanner::<T>::new().plan_fft_inverse(m).process(&mut buf);

    let (first, last) = (samples[0], samples[panels]);
    (0..=grid.n_points / 2)
        .map(|n| {
            let t = grid.delta_t * lit(n as f64);
            let theta = t * h;
            let w = hat_transform(theta);
            let half = half_hat_transform(theta);
            let end_phase = Complex::new(T::zero(), theta * lit(panels as f64)).exp();
            let inner = buf[n] * w
                + (half - w) * first
                + (half.conj() - w) * last * end_phase;
            Complex::new(T::zero(), t * a).exp() * inner * h
        })
        .collect()
}

/// `int_{-1}^{1} (1 - |u|) e^{i theta u} du = (sin(theta/2) / (theta/2))^2`.
fn hat_transform<T: Real>(theta: T) -> T {
    let x = theta * lit(0.5);
    if x.abs() < lit(1e-4) {
        T::one() - x * x / lit(3.0)
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// `int_0^1 (1 - u) e^{i theta u} du`.
fn half_hat_transform<T: Real>(theta: T) -> Complex<T> {
    if theta.abs() < lit(0.1) {
        // sum (i theta)^n / (n + 2)!
        let it = Complex::new(T::zero(), theta);
        let mut term = Complex::new(lit::<T>(0.5), T::zero());
        let mut sum = term;
        for n in 1..12 {
            term = term * it / lit::<T>((n + 2) as f64);
            sum = sum + term;
        }
        sum
    } else {
        let e = Complex::new(T::zero(), theta).exp();
        Complex::new(T::zero(), theta.recip()) - (e - T::one()) / (theta * theta)
    }
}

/// Recovers the interference density by discrete Fourier inversion of
/// `cf_interference` on `grid`.
///
/// With a single interferer the density jumps at both support ends; the
/// linear ramp joining the two endpoint values is taken out of the transform
/// and added back afterwards, so only a continuous residual is inverted.
/// Negative ripple is clamped to zero and the result renormalised.
pub fn invert_cf<T: Real>(u_a: usize, grid: &CfGrid<T>, constants: &DerivedConstants<T>) -> Result<InterferenceDistribution<T>> {
    if u_a < 2 {
        return Err(Error::invalid("u_a", "interference needs at least two active users"));
    }
    let k = u_a - 1;
    let (a, b) = (constants.gamma_min, constants.gamma_max);
    let panels = grid.filon_panels;
    let h = (b - a) / lit(panels as f64);
    let mut samples: Vec<T> = (0..=panels)
        .map(|j| if j == panels { constants.snr_pdf(b) } else { constants.snr_pdf(a + h * lit(j as f64)) })
        .collect();
    let (fa, fb) = (samples[0], samples[panels]);
    let ramp = |g: T| fa + (fb - fa) * (g - a) / (b - a);
    if k == 1 {
        for (j, s) in samples.iter_mut().enumerate() {
            *s = *s - ramp(a + h * lit(j as f64));
        }
        samples[0] = T::zero();
        samples[panels] = T::zero();
    }
    let cf = filon_lattice(&samples, a, grid);

    let n = grid.n_points;
    let zero = Complex::new(T::zero(), T::zero());
    let mut spectrum = vec![zero; n];
    for (idx, phi) in cf.iter().enumerate() {
        let t = grid.delta_t * lit(idx as f64);
        let psi = if k == 1 { *phi } else { phi.powi(k as i32) };
        let z = psi * Complex::new(T::zero(), -t * grid.origin).exp();
        if idx == 0 {
            spectrum[0] = z;
        } else if idx == n / 2 {
            spectrum[idx] = Complex::new(z.re, T::zero());
        } else {
            spectrum[idx] = z;
            spectrum[n - idx] = z.conj();
        }
    }
    FftPlanner::<T>::new().plan_fft_forward(n).process(&mut spectrum);

    let dx = grid.spacing();
    let mut raw: Vec<T> = spectrum.iter().map(|c| c.re / grid.span).collect();
    if k == 1 {
        for (i, v) in raw.iter_mut().enumerate() {
            let g = grid.origin + dx * lit(i as f64);
            if g >= a && g <= b {
                *v = *v + ramp(g);
            }
        }
    }
    let raw_mass = raw.iter().fold(T::zero(), |s, &v| s + v) * dx;

    let kf = lit::<T>(k as f64);
    let (lo, hi) = (kf * a, kf * b);
    // a continuous sum density vanishes at its support ends
    let (edge_lo, edge_hi) = if k == 1 { (fa, fb) } else { (T::zero(), T::zero()) };
    let mut gamma_grid = vec![lo];
    let mut pdf_values = vec![edge_lo];
    for (i, &v) in raw.iter().enumerate() {
        let g = grid.origin + dx * lit(i as f64);
        if g > lo && g < hi {
            gamma_grid.push(g);
            pdf_values.push(v.max(T::zero()));
        }
    }
    gamma_grid.push(hi);
    pdf_values.push(edge_hi);

    let mass = trapezoid(&gamma_grid, &pdf_values);
    let factor = mass.recip();
    log::debug!(
        "invert_cf: U_a = {u_a}, N = {n}, t_max = {:.4e}, raw mass = {:.6e}, renormalisation = {:.6e}",
        to_f64(grid.t_max),
        to_f64(raw_mass),
        to_f64(factor)
    );
    if !factor.is_finite() || (factor - T::one()).abs() > lit(1e-2) {
        return Err(Error::Resolution { u_a, factor: to_f64(factor) });
    }
    for v in &mut pdf_values {
        *v = *v * factor;
    }
    Ok(InterferenceDistribution { u_a, support: (lo, hi), gamma_grid, pdf_values, raw_mass, renormalisation: factor, grid: Some(*grid) })
}

/// Interference densities for `U_a = 2..=max_u_a` by repeated convolution with
/// the single-user density.
///
/// The density of `j` interferers is tabulated over offsets `y` from its lower
/// support end `j gamma_min`, on a grid that is geometric in `y`, so it stays
/// resolved in relative terms however wide `[gamma_min, gamma_max]` is. Each
/// step evaluates `g_{j+1}(y) = int f(gamma_min + u) g_j(y - u) du` with
/// Gauss–Kronrod panels that shrink geometrically towards both ends of the
/// integration window.
pub fn convolve_interference<T: Real>(
    max_u_a: usize,
    constants: &DerivedConstants<T>,
    opts: &InversionOptions<T>,
) -> Result<Vec<InterferenceDistribution<T>>> {
    opts.validate()?;
    let (a, b) = (constants.gamma_min, constants.gamma_max);
    let width = b - a;
    let floor = opts.convolution_floor * a.min(T::one());
    let f = |u: T| constants.snr_pdf((a + u).min(b));

    let mut out: Vec<InterferenceDistribution<T>> = Vec::with_capacity(max_u_a.saturating_sub(1));
    let mut offsets = offset_grid(1, width, floor, opts.convolution_points_per_decade);
    let mut density: Vec<T> = offsets.iter().map(|&y| f(y)).collect();
    for j in 1..max_u_a {
        if j > 1 {
            let prev_span = lit::<T>((j - 1) as f64) * width;
            let next = offset_grid(j, width, floor, opts.convolution_points_per_decade);
            let g = |z: T| if j == 2 { f(z) } else { interpolate(&offsets, &density, z) };
            let values: Vec<T> = next
                .par_iter()
                .map(|&y| {
                    let lo = (y - prev_span).max(T::zero());
                    let hi = y.min(width);
                    if hi <= lo {
                        return T::zero();
                    }
                    let (yl, yr) = (y - lo, y - hi);
                    two_sided(hi - lo, floor, |d| f(lo + d) * g(yl - d), |d| f(hi - d) * g(yr + d))
                })
                .collect();
            offsets = next;
            density = values;
        }
        let raw_mass = trapezoid(&offsets, &density);
        let factor = raw_mass.recip();
        let u_a = j + 1;
        log::debug!("convolve_interference: U_a = {u_a}, {} nodes, renormalisation = {:.6e}", offsets.len(), to_f64(factor));
        if !factor.is_finite() || (factor - T::one()).abs() > lit(1e-2) {
            return Err(Error::Resolution { u_a, factor: to_f64(factor) });
        }
        density.iter_mut().for_each(|v| *v = *v * factor);

        let kf = lit::<T>(j as f64);
        let (lo, hi) = (kf * a, kf * b);
        let mut gamma_grid = Vec::with_capacity(offsets.len());
        let mut pdf_values = Vec::with_capacity(offsets.len());
        for (i, (&y, &v)) in offsets.iter().zip(&density).enumerate() {
            let g = if i + 1 == offsets.len() { hi } else { lo + y };
            // offsets below the resolution of j gamma_min collapse onto one node
            if gamma_grid.last().is_some_and(|&last| g <= last) {
                continue;
            }
            gamma_grid.push(g);
            pdf_values.push(v);
        }
        out.push(InterferenceDistribution {
            u_a,
            support: (lo, hi),
            gamma_grid,
            pdf_values,
            raw_mass,
            renormalisation: factor,
            grid: None,
        });
    }
    Ok(out)
}

/// `0`, then geometric offsets from `floor` to `j width`, plus the kinks `i width`.
fn offset_grid<T: Real>(j: usize, width: T, floor: T, per_decade: usize) -> Vec<T> {
    let span = lit::<T>(j as f64) * width;
    let decades = (span / floor).log10().max(T::one());
    let n = (decades * lit(per_decade as f64)).ceil().to_usize().unwrap_or(per_decade).max(2);
    let mut grid: Vec<T> = std::iter::once(T::zero())
        .chain((0..=n).map(|i| floor * (span / floor).powf(lit::<T>(i as f64) / lit(n as f64))))
        .chain((1..j).map(|i| lit::<T>(i as f64) * width))
        .collect();
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup();
    *grid.last_mut().expect("nonempty grid") = span;
    grid
}

/// `int_0^L left(d) dd` split at `L / 2`: the first half integrates `left` at
/// distance `d` from the lower end, the second `right` at distance `d` from the
/// upper end. Panels halve towards each end down to about `floor`.
fn two_sided<T: Real>(length: T, floor: T, left: impl Fn(T) -> T, right: impl Fn(T) -> T) -> T {
    let half = length * lit(0.5);
    let levels = (half / floor).log2().ceil().to_usize().unwrap_or(1).clamp(1, 120);
    let mut total = T::zero();
    let mut upper = half;
    for i in 0..=levels {
        let lower = if i == levels { T::zero() } else { upper * lit(0.5) };
        total = total + gauss_kronrod(&left, lower, upper).0 + gauss_kronrod(&right, lower, upper).0;
        upper = lower;
    }
    total
}

/// Fourier inversion of `u_a`'s interference, or `None` where `Auto` defers to convolution.
fn fourier_interference<T: Real>(
    u_a: usize,
    constants: &DerivedConstants<T>,
    opts: &InversionOptions<T>,
) -> Result<Option<InterferenceDistribution<T>>> {
    if opts.method == InversionMethod::Convolution {
        return Ok(None);
    }
    let auto = opts.method == InversionMethod::Auto;
    let grid = CfGrid::for_interference(u_a, constants, opts)?;
    if auto && !grid.filon_resolved {
        log::debug!("U_a = {u_a}: Filon lattice cannot resolve the density, using convolution");
        return Ok(None);
    }
    if grid.truncated {
        log::debug!("U_a = {u_a}: CF tolerance not reached within {} points", grid.n_points);
    }
    match invert_cf(u_a, &grid, constants) {
        Err(Error::Resolution { .. }) if auto => {
            log::debug!("U_a = {u_a}: Fourier inversion lost mass, using convolution");
            Ok(None)
        }
        other => other.map(Some),
    }
}

/// Cumulative tables of the interference density over its own grid, used for
/// O(log n) SINR evaluation. Nodes stay in `gamma_I` rather than
/// `lambda = gamma_I + 1` so tiny interference values keep full precision.
#[derive(Debug, Clone)]
struct LambdaTable<T> {
    gamma: Vec<T>,
    /// `f_lambda(lambda)`.
    density: Vec<T>,
    /// `lambda^{-1/(m+3)} f_lambda(lambda)`.
    weighted: Vec<T>,
    density_cum: Vec<T>,
    weighted_cum: Vec<T>,
}

impl<T: Real> LambdaTable<T> {
    fn new(interference: &InterferenceDistribution<T>, constants: &DerivedConstants<T>) -> Self {
        let q = -(constants.lambertian_order + lit(3.0)).recip();
        let gamma = interference.gamma_grid.clone();
        let density = interference.pdf_values.clone();
        let weighted: Vec<T> = gamma.iter().zip(&density).map(|(&g, &f)| (g + T::one()).powf(q) * f).collect();
        let density_cum = cumulative_trapezoid(&gamma, &density);
        let weighted_cum = cumulative_trapezoid(&gamma, &weighted);
        Self { gamma, density, weighted, density_cum, weighted_cum }
    }

    /// Support of `gamma_I`.
    fn range(&self) -> (T, T) {
        (self.gamma[0], self.gamma[self.gamma.len() - 1])
    }

    /// `[lambda_min, lambda_max]`.
    fn lambda_range(&self) -> (T, T) {
        let (g0, g1) = self.range();
        (g0 + T::one(), g1 + T::one())
    }

    /// Integral of the piecewise-linear `values` from the first node to `x`.
    fn cumulative(&self, values: &[T], cum: &[T], x: T) -> T {
        let (lo, hi) = self.range();
        if x <= lo {
            return T::zero();
        }
        if x >= hi {
            return cum[cum.len() - 1];
        }
        let i = self.gamma.partition_point(|&g| g <= x) - 1;
        let width = self.gamma[i + 1] - self.gamma[i];
        let d = x - self.gamma[i];
        cum[i] + d * values[i] + d * d * (values[i + 1] - values[i]) / (lit::<T>(2.0) * width)
    }

    fn weighted_between(&self, l: T, u: T) -> T {
        self.cumulative(&self.weighted, &self.weighted_cum, u) - self.cumulative(&self.weighted, &self.weighted_cum, l)
    }

    fn density_between(&self, l: T, u: T) -> T {
        self.cumulative(&self.density, &self.density_cum, u) - self.cumulative(&self.density, &self.density_cum, l)
    }

    /// Interference interval `{gamma_I : lo <= x (gamma_I + 1) <= hi}` clipped to the support.
    fn window(&self, x: T, lo: T, hi: T) -> (T, T) {
        let (g0, g1) = self.range();
        ((lo / x - T::one()).max(g0), (hi / x - T::one()).min(g1))
    }
}

/// SINR distribution of the reference user conditioned on `U_a`.
///
/// Holds a log-spaced tabulation (`sinr_grid`, `pdf_values`, `cdf_values`) and
/// evaluates the density and CDF anywhere on the support.
#[derive(Debug, Clone)]
pub struct SinrDistribution<T> {
    pub u_a: usize,
    pub constants: DerivedConstants<T>,
    pub sinr_grid: Vec<T>,
    pub pdf_values: Vec<T>,
    pub cdf_values: Vec<T>,
    table: Option<LambdaTable<T>>,
    kinks: Vec<T>,
}

impl<T: Real> SinrDistribution<T> {
    /// Builds the distribution for `u_a` active users (inverting the CF when `u_a >= 2`).
    pub fn build(u_a: usize, constants: &DerivedConstants<T>, opts: &InversionOptions<T>) -> Result<Self> {
        if u_a == 0 {
            return Err(Error::invalid("u_a", "must be at least 1"));
        }
        if u_a == 1 {
            return Self::assemble(1, constants, None, opts.sinr_grid_points);
        }
        let interference = match fourier_interference(u_a, constants, opts)? {
            Some(i) => i,
            None => convolve_interference(u_a, constants, opts)?.pop().expect("one distribution per U_a"),
        };
        Self::from_interference(&interference, constants, opts.sinr_grid_points)
    }

    pub fn from_interference(interference: &InterferenceDistribution<T>, constants: &DerivedConstants<T>, grid_points: usize) -> Result<Self> {
        Self::assemble(interference.u_a, constants, Some(LambdaTable::new(interference, constants)), grid_points)
    }

    fn assemble(u_a: usize, constants: &DerivedConstants<T>, table: Option<LambdaTable<T>>, grid_points: usize) -> Result<Self> {
        let (a, b) = (constants.gamma_min, constants.gamma_max);
        let mut kinks = vec![];
        if let Some(t) = &table {
            let (l0, l1) = t.lambda_range();
            kinks.extend([a / l1, a / l0, b / l1, b / l0]);
            kinks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        } else {
            kinks.extend([a, b]);
        }
        let mut dist = Self {
            u_a,
            constants: *constants,
            sinr_grid: vec![],
            pdf_values: vec![],
            cdf_values: vec![],
            table,
            kinks,
        };
        let (lo, hi) = dist.support();
        let mut grid: Vec<T> = (0..grid_points)
            .map(|i| lo * (hi / lo).powf(lit::<T>(i as f64) / lit::<T>((grid_points - 1) as f64)))
            .collect();
        grid[0] = lo;
        grid[grid_points - 1] = hi;
        grid.extend(dist.kinks.iter().copied().filter(|&x| x > lo && x < hi));
        grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
        grid.dedup();

        let pdf_values: Vec<T> = grid.iter().map(|&x| dist.pdf(x)).collect();
        let cdf_values = if dist.table.is_none() {
            grid.iter().map(|&x| constants.snr_cdf(x)).collect()
        } else {
            let q = Quadrature { abs_tol: lit(1e-13), rel_tol: lit(1e-12), max_segments: 200 };
            let mut acc = T::zero();
            let mut out = Vec::with_capacity(grid.len());
            out.push(T::zero());
            for w in grid.windows(2) {
                acc = acc + q.integrate(|x| dist.pdf(x), w[0], w[1]).value;
                out.push(acc);
            }
            out
        };
        dist.sinr_grid = grid;
        dist.pdf_values = pdf_values;
        dist.cdf_values = cdf_values;
        let total = dist.cdf_values[dist.cdf_values.len() - 1];
        if (total - T::one()).abs() > lit(1e-3) {
            log::warn!("SINR distribution for U_a = {u_a} integrates to {}", to_f64(total));
        }
        Ok(dist)
    }

    /// Support of the conditional SINR.
    pub fn support(&self) -> (T, T) {
        let (a, b) = (self.constants.gamma_min, self.constants.gamma_max);
        match &self.table {
            None => (a, b),
            Some(t) => {
                let (l0, l1) = t.lambda_range();
                (a / l1, b / l0)
            }
        }
    }

    /// Points where the density is not smooth (support ends and interior kinks).
    pub fn kinks(&self) -> &[T] {
        &self.kinks
    }

    pub fn pdf(&self, x: T) -> T {
        let c = &self.constants;
        match &self.table {
            None => c.snr_pdf(x),
            Some(t) => {
                if !(x > T::zero()) {
                    return T::zero();
                }
                let (lo, hi) = t.window(x, c.gamma_min, c.gamma_max);
                if hi <= lo {
                    return T::zero();
                }
                (c.pdf_prefactor() * x.powf(-c.pdf_exponent()) * t.weighted_between(lo, hi)).max(T::zero())
            }
        }
    }

    /// `P[SINR <= x | U_a]`, the integral of [`Self::pdf`] from the support start.
    pub fn cdf(&self, x: T) -> T {
        if self.table.is_none() {
            return self.constants.snr_cdf(x);
        }
        let (lo, hi) = self.support();
        if x <= lo {
            return T::zero();
        }
        if x >= hi {
            return self.cdf_values[self.cdf_values.len() - 1].min(T::one());
        }
        let i = self.sinr_grid.partition_point(|&g| g <= x) - 1;
        let (partial, _) = gauss_kronrod(&|s| self.pdf(s), self.sinr_grid[i], x);
        (self.cdf_values[i] + partial).max(T::zero()).min(T::one())
    }

    /// `P[SINR <= x | U_a]` as `E[F_{gamma_1}(x lambda)]`, an independent route to [`Self::cdf`].
    pub fn cdf_by_mixture(&self, x: T) -> T {
        let c = &self.constants;
        let t = match &self.table {
            None => return c.snr_cdf(x),
            Some(t) => t,
        };
        if !(x > T::zero()) {
            return T::zero();
        }
        let (g0, g1) = t.range();
        let (l, u) = t.window(x, c.gamma_min, c.gamma_max);
        let (l, u) = (l.min(g1), u.max(g0));
        let order = c.lambertian_order + lit(3.0);
        let c0 = T::one() + c.height * c.height / (c.radius * c.radius);
        let c1 = c.snr_numerator().powf(order.recip()) / (c.radius * c.radius);
        let captured = t.density_between(u, g1);
        let partial = if u > l {
            c0 * t.density_between(l, u) - c1 * x.powf(-order.recip()) * t.weighted_between(l, u)
        } else {
            T::zero()
        };
        (captured + partial).max(T::zero()).min(T::one())
    }

    /// Total mass of the tabulated density.
    pub fn mass(&self) -> T {
        self.cdf_values[self.cdf_values.len() - 1]
    }

    pub fn write_pdf<W: Write>(&self, w: W) -> io::Result<()> {
        write_two_column(w, "# gamma pdf", &self.sinr_grid, &self.pdf_values)
    }

    pub fn write_cdf<W: Write>(&self, w: W) -> io::Result<()> {
        write_two_column(w, "# gamma cdf", &self.sinr_grid, &self.cdf_values)
    }
}

/// Direct evaluation of the conditional SINR density by quadrature over `lambda`.
///
/// `interference` is required when `u_a >= 2` and ignored otherwise.
pub fn sinr_pdf_conditional<T: Real>(
    x: T,
    u_a: usize,
    constants: &DerivedConstants<T>,
    interference: Option<&InterferenceDistribution<T>>,
) -> Result<T> {
    if u_a <= 1 {
        return Ok(constants.snr_pdf(x));
    }
    let inter = interference_for(u_a, interference)?;
    if !(x > T::zero()) {
        return Ok(T::zero());
    }
    let (s0, s1) = inter.support;
    let lo = (constants.gamma_min / x).max(s0 + T::one());
    let hi = (constants.gamma_max / x).min(s1 + T::one());
    if hi <= lo {
        return Ok(T::zero());
    }
    let breaks: Vec<T> = (0..=32).map(|i| lo + (hi - lo) * lit(i as f64) / lit(32.0)).collect();
    let q = Quadrature { abs_tol: lit(1e-11), rel_tol: lit(1e-10), max_segments: 20_000 };
    let est = q.integrate_with_breaks(
        |lambda: T| {
            // keep the support of f_{gamma_1} exact inside the integrand
            let y = (x * lambda).max(constants.gamma_min).min(constants.gamma_max);
            lambda * constants.snr_pdf(y) * inter.pdf(lambda - T::one())
        },
        &breaks,
    );
    Ok(est.value.max(T::zero()))
}

/// Conditional SINR CDF as the integral of [`sinr_pdf_conditional`], clipped to `[0, 1]`.
pub fn sinr_cdf_conditional<T: Real>(
    gamma: T,
    u_a: usize,
    constants: &DerivedConstants<T>,
    interference: Option<&InterferenceDistribution<T>>,
) -> Result<T> {
    if u_a <= 1 {
        return Ok(constants.snr_cdf(gamma));
    }
    let inter = interference_for(u_a, interference)?;
    let (s0, s1) = inter.support;
    let (l0, l1) = (s0 + T::one(), s1 + T::one());
    let (a, b) = (constants.gamma_min, constants.gamma_max);
    let lo = a / l1;
    let hi = gamma.min(b / l0);
    if hi <= lo {
        return Ok(T::zero());
    }
    let mut breaks = vec![lo, hi];
    breaks.extend([a / l0, b / l1].into_iter().filter(|&k| k > lo && k < hi));
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let q = Quadrature { abs_tol: lit(1e-9), rel_tol: lit(1e-9), max_segments: 2000 };
    let est = q.integrate_with_breaks(
        |x: T| sinr_pdf_conditional(x, u_a, constants, Some(inter)).unwrap_or(T::zero()),
        &breaks,
    );
    Ok(est.value.max(T::zero()).min(T::one()))
}

fn interference_for<T: Real>(u_a: usize, interference: Option<&InterferenceDistribution<T>>) -> Result<&InterferenceDistribution<T>> {
    match interference {
        Some(i) if i.u_a == u_a => Ok(i),
        Some(i) => Err(Error::invalid("interference", format!("built for U_a = {}, requested U_a = {u_a}", i.u_a))),
        None => Err(Error::invalid("interference", format!("required for U_a = {u_a} >= 2"))),
    }
}

/// Conditional SINR distributions for `U_a = 1..=max_u_a` over one cell.
#[derive(Debug, Clone)]
pub struct SinrTables<T> {
    pub constants: DerivedConstants<T>,
    distributions: Vec<SinrDistribution<T>>,
}

impl<T: Real> SinrTables<T> {
    /// Builds all distributions in parallel; the result does not depend on the thread count.
    ///
    /// Counts the Fourier lattice cannot resolve share one convolution pass.
    pub fn build(constants: &DerivedConstants<T>, max_u_a: usize, opts: &InversionOptions<T>) -> Result<Self> {
        opts.validate()?;
        let grid_points = opts.sinr_grid_points;
        let fourier = (1..=max_u_a.max(1))
            .into_par_iter()
            .map(|u| match u {
                1 => SinrDistribution::assemble(1, constants, None, grid_points).map(Some),
                _ => fourier_interference(u, constants, opts)?
                    .map(|i| SinrDistribution::from_interference(&i, constants, grid_points))
                    .transpose(),
            })
            .collect::<Result<Vec<_>>>()?;
        let deferred = fourier.iter().rposition(Option::is_none).map_or(0, |i| i + 1);
        let convolved = if deferred > 0 { convolve_interference(deferred, constants, opts)? } else { vec![] };
        let distributions = fourier
            .into_par_iter()
            .enumerate()
            .map(|(i, d)| match d {
                Some(d) => Ok(d),
                None => SinrDistribution::from_interference(&convolved[i - 1], constants, grid_points),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { constants: *constants, distributions })
    }

    pub fn max_u_a(&self) -> usize {
        self.distributions.len()
    }

    /// Distribution for `u_a` (1-based), `None` beyond the tabulated range.
    pub fn get(&self, u_a: usize) -> Option<&SinrDistribution<T>> {
        u_a.checked_sub(1).and_then(|i| self.distributions.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &SinrDistribution<T>> {
        self.distributions.iter()
    }
}

/// Writes a `header` line followed by space-separated `(x, y)` pairs.
pub fn write_two_column<T: Real, W: Write>(mut w: W, header: &str, xs: &[T], ys: &[T]) -> io::Result<()> {
    writeln!(w, "{header}")?;
    for (x, y) in xs.iter().zip(ys) {
        writeln!(w, "{} {}", to_f64(*x), to_f64(*y))?;
    }
    Ok(())
}

pub(crate) fn interpolate<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return T::zero();
    }
    let i = xs.partition_point(|&v| v <= x).min(n - 1).max(1) - 1;
    let w = xs[i + 1] - xs[i];
    if w <= T::zero() {
        return ys[i];
    }
    ys[i] + (ys[i + 1] - ys[i]) * (x - xs[i]) / w
}

pub(crate) fn trapezoid<T: Real>(xs: &[T], ys: &[T]) -> T {
    xs.windows(2)
        .zip(ys.windows(2))
        .fold(T::zero(), |s, (x, y)| s + (x[1] - x[0]) * (y[0] + y[1]) * lit(0.5))
}

fn cumulative_trapezoid<T: Real>(xs: &[T], ys: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = T::zero();
    out.push(acc);
    for (x, y) in xs.windows(2).zip(ys.windows(2)) {
        acc = acc + (x[1] - x[0]) * (y[0] + y[1]) * lit(0.5);
        out.push(acc);
    }
    out
}
