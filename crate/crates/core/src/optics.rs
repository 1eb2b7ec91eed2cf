//! Line-of-sight Lambertian channel and single-user SNR statistics.
//!
//! Devices are uniform on a disk of radius `D` in a plane `L` below the access
//! point, with receiver and transmitters facing each other (irradiance angle
//! equals incidence angle). Under the field-of-view condition every gain is
//! `h = X / (r^2 + L^2)^{(m+3)/2}` with a placement-independent constant `X`.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Transmitter and receiver front-end parameters. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalFrontend<T> {
    /// Transmitted optical power `P_t` (W).
    pub tx_power: T,
    /// Optical-to-electrical conversion efficiency `eta`.
    pub conversion_efficiency: T,
    /// Photodetector area `A_r` (m^2).
    pub detector_area: T,
    /// Responsivity `R_r` (A/W).
    pub responsivity: T,
    /// Optical filter gain `T_s`.
    pub filter_gain: T,
    /// Concentrator lens refractive index `zeta`.
    pub lens_index: T,
    /// Receiver field of view `Psi` (rad).
    pub field_of_view: T,
    /// LED semi-angle at half illuminance `Phi_1/2` (rad).
    pub semi_angle: T,
    /// Noise power spectral density `N0` (W/Hz).
    pub noise_psd: T,
    /// Noise bandwidth `B` (Hz).
    pub bandwidth: T,
}

impl<T: Real> OpticalFrontend<T> {
    /// Reference indoor IoT front end: 30 mW, 1 cm^2, 0.4 A/W, T_s = 1,
    /// zeta = 1.5, Psi = 90 deg, eta = 0.8, N0 = 1e-21 W/Hz, B = 200 kHz,
    /// with a 60 deg LED semi-angle.
    pub fn reference() -> Self {
        Self {
            tx_power: lit(30e-3),
            conversion_efficiency: lit(0.8),
            detector_area: lit(1e-4),
            responsivity: lit(0.4),
            filter_gain: lit(1.0),
            lens_index: lit(1.5),
            field_of_view: T::FRAC_PI_2(),
            semi_angle: lit::<T>(60.0).to_radians(),
            noise_psd: lit(1e-21),
            bandwidth: lit(200e3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tx_power", self.tx_power),
            ("conversion_efficiency", self.conversion_efficiency),
            ("detector_area", self.detector_area),
            ("responsivity", self.responsivity),
            ("filter_gain", self.filter_gain),
            ("lens_index", self.lens_index),
            ("field_of_view", self.field_of_view),
            ("semi_angle", self.semi_angle),
            ("noise_psd", self.noise_psd),
            ("bandwidth", self.bandwidth),
        ];
        for (field, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {}", to_f64(v))));
            }
        }
        if self.field_of_view > T::FRAC_PI_2() {
            return Err(Error::invalid("field_of_view", "must not exceed 90 degrees"));
        }
        if self.semi_angle >= T::FRAC_PI_2() {
            return Err(Error::invalid("semi_angle", "must be below 90 degrees"));
        }
        Ok(())
    }

    /// Receiver noise power `sigma_n^2 = N0 B`.
    pub fn noise_power(&self) -> T {
        self.noise_psd * self.bandwidth
    }

    /// `mu = P_t^2 eta^2 / sigma_n^2`, the factor turning `h^2` into SNR.
    pub fn snr_scale(&self) -> T {
        let a = self.tx_power * self.conversion_efficiency;
        a * a / self.noise_power()
    }
}

/// Coverage disk radius `D` and access-point height `L` (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry<T> {
    pub radius: T,
    pub height: T,
}

impl<T: Real> CellGeometry<T> {
    pub fn new(radius: T, height: T) -> Self {
        Self { radius, height }
    }

    /// Incidence angle at the disk edge, `atan(D / L)`.
    pub fn edge_incidence(&self) -> T {
        (self.radius / self.height).atan()
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("radius", self.radius), ("height", self.height)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {}", to_f64(v))));
            }
        }
        Ok(())
    }
}

/// Everything the channel model needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig<T> {
    pub frontend: OpticalFrontend<T>,
    pub geometry: CellGeometry<T>,
}

impl<T: Real> SystemConfig<T> {
    /// Reference front end over a `D = 4 m`, `L = 3 m` cell.
    pub fn reference() -> Self {
        Self { frontend: OpticalFrontend::reference(), geometry: CellGeometry::new(lit(4.0), lit(3.0)) }
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        self.geometry.validate()?;
        let incidence = self.geometry.edge_incidence();
        if incidence > self.frontend.field_of_view {
            return Err(Error::FieldOfView {
                incidence_deg: to_f64(incidence).to_degrees(),
                fov_deg: to_f64(self.frontend.field_of_view).to_degrees(),
            });
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedConstants<T>> {
        DerivedConstants::new(self)
    }
}

/// Placement-independent constants of the cell, computed once per configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants<T> {
    /// Lambertian order `m`.
    pub lambertian_order: T,
    /// `X`, the gain numerator shared by all placements.
    pub geometry_constant: T,
    pub noise_power: T,
    /// `mu = P_t^2 eta^2 / sigma_n^2`.
    pub snr_scale: T,
    pub gamma_min: T,
    pub gamma_max: T,
    pub h_min: T,
    pub h_max: T,
    pub radius: T,
    pub height: T,
}

impl<T: Real> DerivedConstants<T> {
    pub fn new(config: &SystemConfig<T>) -> Result<Self> {
        config.validate()?;
        let fe = &config.frontend;
        let geo = &config.geometry;
        let m = lambertian_order(fe.semi_angle)?;
        let x = geometry_constant(fe, geo, m)?;
        let mu = fe.snr_scale();
        let three = lit::<T>(3.0);
        let (d2, l2) = (geo.radius * geo.radius, geo.height * geo.height);
        let h_max = x / geo.height.powf(m + three);
        let h_min = x / (d2 + l2).powf((m + three) * lit(0.5));
        Ok(Self {
            lambertian_order: m,
            geometry_constant: x,
            noise_power: fe.noise_power(),
            snr_scale: mu,
            gamma_min: mu * h_min * h_min,
            gamma_max: mu * h_max * h_max,
            h_min,
            h_max,
            radius: geo.radius,
            height: geo.height,
        })
    }

    /// `m + 3`, the exponent that appears everywhere.
    #[inline]
    fn order3(&self) -> T {
        self.lambertian_order + lit(3.0)
    }

    /// `mu X^2`, so that `gamma = mu X^2 / (r^2 + L^2)^{m+3}`.
    #[inline]
    pub fn snr_numerator(&self) -> T {
        self.snr_scale * self.geometry_constant * self.geometry_constant
    }

    /// Optical channel gain of a device at radial distance `r`.
    pub fn channel_gain(&self, r: T) -> Result<T> {
        if !(r >= T::zero() && r <= self.radius) {
            return Err(Error::Range { r: to_f64(r), radius: to_f64(self.radius) });
        }
        Ok(self.gain_unchecked(r))
    }

    #[inline]
    pub(crate) fn gain_unchecked(&self, r: T) -> T {
        self.geometry_constant / (r * r + self.height * self.height).powf(self.order3() * lit(0.5))
    }

    /// `gamma = mu h(r)^2`.
    pub fn snr_at(&self, r: T) -> Result<T> {
        self.channel_gain(r).map(|h| self.snr_scale * h * h)
    }

    #[inline]
    pub(crate) fn snr_unchecked(&self, r: T) -> T {
        self.snr_numerator() / (r * r + self.height * self.height).powf(self.order3())
    }

    /// Prefactor `(mu X^2)^{1/(m+3)} / (D^2 (m+3))` of the SNR density.
    pub fn pdf_prefactor(&self) -> T {
        let q = self.order3().recip();
        self.snr_numerator().powf(q) / (self.radius * self.radius * self.order3())
    }

    /// Exponent `p = (m+4)/(m+3)` with `f(gamma) ~ gamma^{-p}`.
    pub fn pdf_exponent(&self) -> T {
        (self.lambertian_order + lit(4.0)) / self.order3()
    }

    /// Density of the single-user SNR; zero outside `[gamma_min, gamma_max]`.
    pub fn snr_pdf(&self, gamma: T) -> T {
        if gamma < self.gamma_min || gamma > self.gamma_max {
            return T::zero();
        }
        self.pdf_prefactor() * gamma.powf(-self.pdf_exponent())
    }

    /// CDF of the single-user SNR, `1 + (L^2 - (mu X^2 / gamma)^{1/(m+3)}) / D^2` on the support.
    pub fn snr_cdf(&self, gamma: T) -> T {
        if gamma <= self.gamma_min {
            return T::zero();
        }
        if gamma >= self.gamma_max {
            return T::one();
        }
        let r2_plus_l2 = (self.snr_numerator() / gamma).powf(self.order3().recip());
        let v = T::one() + (self.height * self.height - r2_plus_l2) / (self.radius * self.radius);
        v.max(T::zero()).min(T::one())
    }

    /// `E[gamma]` in closed form.
    pub fn snr_mean(&self) -> T {
        // int C g^{1-p} dg with 2 - p = (m+2)/(m+3)
        let e = lit::<T>(2.0) - self.pdf_exponent();
        self.pdf_prefactor() * (self.gamma_max.powf(e) - self.gamma_min.powf(e)) / e
    }
}

/// `m = -ln 2 / ln cos(Phi_1/2)`.
pub fn lambertian_order<T: Real>(semi_angle: T) -> Result<T> {
    let c = semi_angle.cos();
    if !(semi_angle > T::zero() && semi_angle < T::FRAC_PI_2() && c > T::zero() && c < T::one()) {
        return Err(Error::Domain {
            op: "lambertian_order",
            reason: format!("semi-angle {} rad must lie in (0, pi/2)", to_f64(semi_angle)),
        });
    }
    Ok(-T::LN_2() / c.ln())
}

/// Optical concentrator gain `zeta^2 / sin^2(Psi)` inside the field of view, 0 outside.
pub fn concentrator_gain<T: Real>(incidence: T, lens_index: T, field_of_view: T) -> T {
    if incidence >= T::zero() && incidence <= field_of_view {
        let s = field_of_view.sin();
        lens_index * lens_index / (s * s)
    } else {
        T::zero()
    }
}

/// `X = A_r (m+1) R_r / (2 pi) * T_s * g * L^{m+1}`.
pub fn geometry_constant<T: Real>(frontend: &OpticalFrontend<T>, geometry: &CellGeometry<T>, m: T) -> Result<T> {
    let incidence = geometry.edge_incidence();
    if incidence > frontend.field_of_view {
        return Err(Error::FieldOfView {
            incidence_deg: to_f64(incidence).to_degrees(),
            fov_deg: to_f64(frontend.field_of_view).to_degrees(),
        });
    }
    // every device sees the same in-FoV concentrator gain
    let g = concentrator_gain(T::zero(), frontend.lens_index, frontend.field_of_view);
    Ok(frontend.detector_area * (m + T::one()) * frontend.responsivity / T::TAU()
        * frontend.filter_gain
        * g
        * geometry.height.powf(m + T::one()))
}

/// Inverse-transform sample of the radial distance: `r = D sqrt(u)` for `u ~ U(0, 1)`.
pub fn sample_radius<T: Real>(u: T, radius: T) -> T {
    radius * u.sqrt()
}
