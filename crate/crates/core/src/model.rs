//! System parameters and Hamiltonian for two counter-propagating
//! whispering-gallery modes with Kerr nonlinearity, intrinsic backscattering
//! and a movable nanotip.
//!
//! The tip contributes exponentially decaying backscattering with a
//! position-dependent phase,
//!
//! ```text
//! J_tip(r, phi) = a_t exp(-r / l_t) exp(-i Theta),
//! Theta = 2 k_opt phi + theta + theta_t r,
//! ```
//!
//! and extra dissipation `gamma_tip(r) = a_gamma exp(-r / l_gamma)`. Both
//! decay lengths are quoted directly as `1/(2 beta)` in nm. The gap `r`
//! stays in nm and the azimuthal offset `phi` in um everywhere; `Theta` is
//! the only place where `r` is converted to um.
//!
//! All rates are measured in units of the intrinsic CW linewidth
//! `gamma_1 = 1`. Physical-unit conversions live in [`PhysicalConstants`]
//! and nowhere else.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{OperatorMatrix, TwoModeBasis};

/// Intrinsic CW linewidth; the unit of every rate in the crate.
pub const GAMMA1: f64 = 1.0;

/// Reduced Planck constant, J s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON0: f64 = 8.854_187_812_8e-12;

/// Nanotip scattering and loss law, rates in gamma_1 units, lengths in nm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TipModel {
    /// Backscattering amplitude at contact.
    #[serde(rename = "a_t_over_gamma1")]
    pub a_t: f64,
    /// Backscattering decay length `1/(2 beta_t)`, nm.
    pub inv_2beta_t_nm: f64,
    /// Phase winding rate with gap, rad/um.
    #[serde(rename = "theta_t_rad_per_um")]
    pub theta_t: f64,
    /// Constant phase offset, rad.
    #[serde(rename = "theta_rad")]
    pub theta: f64,
    /// Tip-induced loss at contact.
    #[serde(rename = "a_gamma_over_gamma1")]
    pub a_gamma: f64,
    /// Loss decay length `1/(2 beta_gamma)`, nm.
    pub inv_2beta_gamma_nm: f64,
}

impl Default for TipModel {
    /// Silica-tip values fitted for a 1550 nm silicon nitride microring.
    fn default() -> Self {
        Self {
            a_t: 64.35,
            inv_2beta_t_nm: 99.0,
            theta_t: 1.5 * std::f64::consts::PI,
            theta: -0.5 * std::f64::consts::PI,
            a_gamma: 10.935,
            inv_2beta_gamma_nm: 92.0,
        }
    }
}

/// Tip placement: surface gap in nm, azimuthal offset in um.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TipGeometry {
    pub r_nm: f64,
    pub phi_um: f64,
}

/// Complex tip backscattering amplitude `J_tip` in gamma_1 units.
///
/// `k_opt` is the optical wavenumber `2 pi n0 / lambda` in rad/um.
pub fn tip_coupling(model: &TipModel, geom: &TipGeometry, k_opt: f64) -> Complex64 {
    let magnitude = model.a_t * (-geom.r_nm / model.inv_2beta_t_nm).exp();
    let theta_total =
        2.0 * k_opt * geom.phi_um + model.theta + model.theta_t * (geom.r_nm * 1e-3);
    magnitude * Complex64::new(0.0, -theta_total).exp()
}

/// Tip-induced loss rate at gap `r_nm`, in gamma_1 units.
pub fn tip_loss(model: &TipModel, r_nm: f64) -> f64 {
    model.a_gamma * (-r_nm / model.inv_2beta_gamma_nm).exp()
}

/// Tip model plus placement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TipAttachment {
    pub model: TipModel,
    pub geom: TipGeometry,
}

/// Complete dimensionless parameter set for one operating point.
///
/// The derived quantities `j_total` and `gamma_total` are methods rather
/// than fields so they can never drift out of sync with the inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Pump detuning from the (split) resonance, gamma_1 units.
    #[serde(rename = "delta_over_gamma1")]
    pub delta: f64,
    /// Kerr shift per photon pair, gamma_1 units.
    #[serde(rename = "chi_over_gamma1")]
    pub chi: f64,
    /// Coherent drive amplitude on the CW mode, gamma_1 units.
    #[serde(rename = "xi_over_gamma1")]
    pub xi: f64,
    /// Intrinsic (tip-free) backscattering, real and non-negative.
    #[serde(rename = "j0_over_gamma1")]
    pub j0: f64,
    /// Optical wavenumber `2 pi n0 / lambda`, rad/um.
    pub k_opt_rad_per_um: f64,
    /// Nanotip, if deployed.
    pub tip: Option<TipAttachment>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            delta: 0.0,
            chi: 5.3,
            xi: 0.01,
            j0: 1.8,
            k_opt_rad_per_um: default_k_opt(),
            tip: None,
        }
    }
}

/// `2 pi * 1.4 / 1.55` rad/um: wavenumber for n0 = 1.4 at 1550 nm.
pub fn default_k_opt() -> f64 {
    2.0 * std::f64::consts::PI * 1.4 / 1.55
}

impl SystemParams {
    /// Total mode coupling `J0 + J_tip`.
    pub fn j_total(&self) -> Complex64 {
        let mut j = Complex64::new(self.j0, 0.0);
        if let Some(tip) = &self.tip {
            j += tip_coupling(&tip.model, &tip.geom, self.k_opt_rad_per_um);
        }
        j
    }

    /// Total per-mode linewidth `gamma_1 + gamma_tip`.
    pub fn gamma_total(&self) -> f64 {
        let mut gamma = GAMMA1;
        if let Some(tip) = &self.tip {
            gamma += tip_loss(&tip.model, tip.geom.r_nm);
        }
        gamma
    }

    /// Rejects non-finite or unphysical inputs.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta_over_gamma1", self.delta),
            ("chi_over_gamma1", self.chi),
            ("xi_over_gamma1", self.xi),
            ("j0_over_gamma1", self.j0),
            ("k_opt_rad_per_um", self.k_opt_rad_per_um),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.chi < 0.0 || self.xi < 0.0 || self.j0 < 0.0 {
            return Err(Error::InvalidParameter(
                "chi, xi and j0 must be non-negative".into(),
            ));
        }
        if self.k_opt_rad_per_um <= 0.0 {
            return Err(Error::InvalidParameter("k_opt must be positive".into()));
        }
        if let Some(tip) = &self.tip {
            if tip.geom.r_nm < 0.0 {
                return Err(Error::InvalidParameter("tip gap r_nm must be >= 0".into()));
            }
            if tip.model.a_t < 0.0
                || tip.model.a_gamma < 0.0
                || tip.model.inv_2beta_t_nm <= 0.0
                || tip.model.inv_2beta_gamma_nm <= 0.0
            {
                return Err(Error::InvalidParameter("tip model out of range".into()));
            }
        }
        Ok(())
    }

    /// Convenience: same parameters with the tip removed and `j0 = 0`.
    pub fn ideal_cavity(&self) -> Self {
        Self { j0: 0.0, tip: None, ..*self }
    }
}

/// Rotating-frame Hamiltonian on the truncated two-mode basis:
///
/// ```text
/// H = Delta (n1 + n2) + (J a1+ a2 + J* a2+ a1)
///   + chi (a1+ a1+ a1 a1 + a2+ a2+ a2 a2) + 2 chi n1 n2
///   + xi (a1+ + a1)
/// ```
///
/// Diagonal terms are assembled directly from occupation numbers; only the
/// mode-exchange and drive terms have off-diagonal elements.
pub fn build_hamiltonian(params: &SystemParams, basis: &TwoModeBasis) -> OperatorMatrix {
    let dim = basis.dim();
    let j = params.j_total();
    let mut entries = ndarray::Array2::<Complex64>::zeros((dim, dim));
    for (k, (m, n)) in basis.states().enumerate() {
        let (mf, nf) = (m as f64, n as f64);
        let diag = params.delta * (mf + nf)
            + params.chi * (mf * (mf - 1.0) + nf * (nf - 1.0))
            + 2.0 * params.chi * mf * nf;
        entries[(k, k)] = Complex64::new(diag, 0.0);
        // J a1+ a2 |m, n> = J sqrt((m+1) n) |m+1, n-1>
        if m < basis.n_max() && n > 0 {
            let row = basis.index_of(m + 1, n - 1).expect("in range");
            let amp = ((mf + 1.0) * nf).sqrt();
            entries[(row, k)] += j * amp;
            entries[(k, row)] += j.conj() * amp;
        }
        // xi a1+ |m, n> = xi sqrt(m+1) |m+1, n>
        if m < basis.n_max() {
            let row = basis.index_of(m + 1, n).expect("in range");
            let amp = (mf + 1.0).sqrt();
            entries[(row, k)] += Complex64::new(params.xi * amp, 0.0);
            entries[(k, row)] += Complex64::new(params.xi * amp, 0.0);
        }
    }
    OperatorMatrix::from_entries(entries).expect("square by construction")
}

/// Laboratory parameters. Everything dimensionless upstream is derived from
/// ratios; this struct is the only place raw SI values appear.
///
/// `gamma1_phys_rad_per_s` anchors the dimensionless rate unit. The source
/// measurements quote linewidths in MHz without stating whether the values
/// are angular; the default takes them as ordinary frequencies
/// (`rad/s = 2 pi * 1e6 * MHz`). Use [`PhysicalConstants::with_angular_mhz`]
/// for the other reading; the dimensionless core is unaffected either way.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    pub lambda_nm: f64,
    pub n0: f64,
    pub q_factor: f64,
    pub v_eff_um3: f64,
    /// Third-order susceptibility over relative permittivity squared, m^2/V^2.
    pub chi3_over_eps_r2_m2_per_v2: f64,
    /// Pump power, W.
    pub p_in_w: f64,
    /// Physical value of gamma_1, rad/s.
    pub gamma1_phys_rad_per_s: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            lambda_nm: 1550.0,
            n0: 1.4,
            q_factor: 1e10,
            v_eff_um3: 150.0,
            chi3_over_eps_r2_m2_per_v2: 1.8e-17,
            p_in_w: 4e-15,
            // J0 = 1.8 gamma_1 corresponds to 0.4 MHz, read as ordinary MHz
            gamma1_phys_rad_per_s: 2.0 * std::f64::consts::PI * 1e6 * (0.4 / 1.8),
        }
    }
}

impl PhysicalConstants {
    /// Same table with MHz figures read as angular frequencies
    /// (`rad/s = 1e6 * MHz`).
    pub fn with_angular_mhz() -> Self {
        Self {
            gamma1_phys_rad_per_s: 1e6 * (0.4 / 1.8),
            ..Self::default()
        }
    }

    /// Optical angular frequency `2 pi c / lambda`, rad/s.
    pub fn omega_rad_per_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (self.lambda_nm * 1e-9)
    }

    /// In-medium wavenumber `2 pi n0 / lambda`, rad/um.
    pub fn k_opt_rad_per_um(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.n0 / (self.lambda_nm * 1e-3)
    }

    /// Single-photon Kerr shift `3 hbar omega^2 chi3 / (4 eps0 eps_r^2 V)`,
    /// returned as `(rad/s, units of gamma_1)`.
    pub fn kerr_strength(&self) -> (f64, f64) {
        let omega = self.omega_rad_per_s();
        let v_eff_m3 = self.v_eff_um3 * 1e-18;
        let chi = 3.0 * HBAR * omega * omega * self.chi3_over_eps_r2_m2_per_v2
            / (4.0 * EPSILON0 * v_eff_m3);
        (chi, chi / self.gamma1_phys_rad_per_s)
    }

    /// Intrinsic absorption-limited linewidth `omega / Q`, rad/s.
    pub fn gamma0_rad_per_s(&self) -> f64 {
        self.omega_rad_per_s() / self.q_factor
    }

    /// External (coupling) linewidth `gamma_1 - gamma_0`, clamped at zero:
    /// the quoted gamma_1 is a total, so the coupling part cannot go
    /// negative.
    pub fn gamma_ex_rad_per_s(&self) -> f64 {
        (self.gamma1_phys_rad_per_s - self.gamma0_rad_per_s()).max(0.0)
    }

    /// Drive amplitude `sqrt(gamma_ex P_in / (hbar omega))`, returned as
    /// `(rad/s, units of gamma_1)`.
    pub fn drive_amplitude(&self) -> (f64, f64) {
        let xi = (self.gamma_ex_rad_per_s() * self.p_in_w
            / (HBAR * self.omega_rad_per_s()))
        .sqrt();
        (xi, xi / self.gamma1_phys_rad_per_s)
    }

    /// Converts a rate quoted in MHz (ordinary frequency) to gamma_1 units.
    pub fn mhz_to_gamma1(&self, mhz: f64) -> f64 {
        2.0 * std::f64::consts::PI * 1e6 * mhz / self.gamma1_phys_rad_per_s
    }
}
