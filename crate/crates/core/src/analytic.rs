//! Weak-drive closed forms and tip-placement condition solvers.
//!
//! Under weak driving the no-jump effective Hamiltonian
//! `H_eff = H - i (gamma/2) (n1 + n2)` admits a steady amplitude hierarchy
//! on the triangular space `m + n <= 3`: with `c00 = 1`, each excitation
//! level N solves a small linear system driven by level N-1, because the
//! drive feeds amplitudes upward one photon at a time and the feedback from
//! level N+1 is higher order in `xi / gamma`.
//!
//! The level-1 and level-2 solutions reduce to closed forms in
//!
//! ```text
//! Delta1 = 2 Delta - i gamma,      Delta2 = Delta1 + 2 chi,
//! eta1   = 4|J|^2 - Delta1^2,      eta2   = 4|J|^2 - Delta2^2,
//! ```
//!
//! giving `C10 = 2 xi Delta1 / eta1`, `C01 = -4 xi conj(J) / eta1`,
//! `C20 = 2 sqrt(2) xi^2 (Delta1 Delta2 + 4|J|^2 chi / Delta2)/(eta1 eta2)`
//! and `g2(0) = |eta1 (Delta1 Delta2 + 4|J|^2 chi / Delta2) / (Delta1^2 eta2)|^2`.
//!
//! Setting `C20 = 0` at `Delta = 0` requires `chi/gamma = 1/2` and
//! `|J|/gamma = 1`; setting the total coupling `J0 + J_tip` itself to zero
//! decouples the modes. Both placement problems are solved here from the
//! tip laws.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{tip_coupling, tip_loss, SystemParams, TipGeometry, TipModel};

/// Denominator magnitudes below this raise [`Error::ResonantPole`].
const POLE_TOL: f64 = 1e-12;

/// Condition-solver residuals must close to this accuracy.
const RESIDUAL_TOL: f64 = 1e-9;

/// Bisection convergence width for azimuthal roots, in um.
const BISECTION_TOL_UM: f64 = 1e-12;

/// Points of the coarse scan that brackets azimuthal roots.
const SCAN_POINTS: usize = 1000;

/// Inputs of the weak-drive solution: one detuning, one Kerr shift, one
/// complex total coupling, one total linewidth, one drive amplitude.
#[derive(Clone, Copy, Debug)]
pub struct WeakDriveInputs {
    pub delta: f64,
    pub chi: f64,
    /// Total coupling `J0 + J_tip`.
    pub j: Complex64,
    /// Total linewidth `gamma_1 + gamma_tip`.
    pub gamma: f64,
    pub xi: f64,
}

impl WeakDriveInputs {
    pub fn from_params(p: &SystemParams) -> Self {
        Self {
            delta: p.delta,
            chi: p.chi,
            j: p.j_total(),
            gamma: p.gamma_total(),
            xi: p.xi,
        }
    }
}

/// The recurring complex building blocks of the closed forms.
#[derive(Clone, Copy, Debug)]
pub struct WeakDriveParts {
    pub delta1: Complex64,
    pub delta2: Complex64,
    pub eta1: Complex64,
    pub eta2: Complex64,
    /// `Delta1 Delta2 + 4 |J|^2 chi / Delta2`; its zeros are the two-photon
    /// blockade condition.
    pub numerator: Complex64,
}

/// Assembles the closed-form building blocks; fails on the `Delta2 = 0`
/// pole where the numerator itself is undefined.
pub fn weak_drive_parts(inp: &WeakDriveInputs) -> Result<WeakDriveParts> {
    let delta1 = Complex64::new(2.0 * inp.delta, -inp.gamma);
    let delta2 = delta1 + 2.0 * inp.chi;
    let j_sq = inp.j.norm_sqr();
    if delta2.norm() < POLE_TOL {
        return Err(Error::ResonantPole(delta2.norm()));
    }
    let eta1 = 4.0 * j_sq - delta1 * delta1;
    let eta2 = 4.0 * j_sq - delta2 * delta2;
    let numerator = delta1 * delta2 + 4.0 * j_sq * inp.chi / delta2;
    Ok(WeakDriveParts { delta1, delta2, eta1, eta2, numerator })
}

/// One-photon CW probability `P10 = 4 xi^2 |Delta1 / eta1|^2`.
pub fn p10_closed_form(inp: &WeakDriveInputs) -> Result<f64> {
    let parts = weak_drive_parts(inp)?;
    if parts.eta1.norm() < POLE_TOL {
        return Err(Error::ResonantPole(parts.eta1.norm()));
    }
    Ok(4.0 * inp.xi.powi(2) * (parts.delta1 / parts.eta1).norm_sqr())
}

/// One-photon CCW probability `P01 = 16 xi^2 |J / eta1|^2`.
pub fn p01_closed_form(inp: &WeakDriveInputs) -> Result<f64> {
    let parts = weak_drive_parts(inp)?;
    if parts.eta1.norm() < POLE_TOL {
        return Err(Error::ResonantPole(parts.eta1.norm()));
    }
    Ok(16.0 * inp.xi.powi(2) * (inp.j / parts.eta1).norm_sqr())
}

/// Two-photon CW amplitude
/// `C20 = 2 sqrt(2) xi^2 (Delta1 Delta2 + 4|J|^2 chi/Delta2) / (eta1 eta2)`.
pub fn c20_closed_form(inp: &WeakDriveInputs) -> Result<Complex64> {
    let parts = weak_drive_parts(inp)?;
    let denom = parts.eta1 * parts.eta2;
    if denom.norm() < POLE_TOL {
        return Err(Error::ResonantPole(denom.norm()));
    }
    Ok(2.0 * 2.0_f64.sqrt() * inp.xi.powi(2) * parts.numerator / denom)
}

/// Equal-time second-order correlation of the CW mode,
/// `g2(0) = 2 P20 / P10^2 = |eta1 numerator / (Delta1^2 eta2)|^2`.
///
/// Depends on the coupling only through `|J|`.
pub fn g2_closed_form(inp: &WeakDriveInputs) -> Result<f64> {
    let parts = weak_drive_parts(inp)?;
    let denom = parts.delta1 * parts.delta1 * parts.eta2;
    if denom.norm() < POLE_TOL || parts.eta1.norm() < POLE_TOL {
        return Err(Error::ResonantPole(denom.norm().min(parts.eta1.norm())));
    }
    Ok((parts.eta1 * parts.numerator / denom).norm_sqr())
}

/// Steady amplitudes on the triangular space `m + n <= 3`, keyed `(m, n)`,
/// with `c00 = 1`. Probabilities are `P_mn = |c_mn|^2` (normalization
/// corrections are higher order in the drive).
#[derive(Clone, Debug)]
pub struct AmplitudeSet {
    amplitudes: BTreeMap<(usize, usize), Complex64>,
}

impl AmplitudeSet {
    pub fn amplitude(&self, m: usize, n: usize) -> Option<Complex64> {
        self.amplitudes.get(&(m, n)).copied()
    }

    pub fn probability(&self, m: usize, n: usize) -> Option<f64> {
        self.amplitude(m, n).map(|c| c.norm_sqr())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Complex64)> {
        self.amplitudes.iter()
    }
}

/// Solves the weak-drive hierarchy level by level.
///
/// Level N couples states `|N-k, k>`; its matrix holds the effective
/// detunings on the diagonal and `J sqrt((m+1) n)` mode-exchange elements
/// off it, and its right-hand side is the drive acting on level N-1. The
/// three systems have sizes 2, 3 and 4.
pub fn effective_amplitudes(inp: &WeakDriveInputs) -> Result<AmplitudeSet> {
    let mut amplitudes = BTreeMap::new();
    amplitudes.insert((0, 0), Complex64::new(1.0, 0.0));

    let mut below: Vec<Complex64> = vec![Complex64::new(1.0, 0.0)];
    for level in 1..=3usize {
        let size = level + 1;
        // states |level - k, k> for k = 0..=level
        let mut matrix = Array2::<Complex64>::zeros((size, size));
        let mut rhs = Array1::<Complex64>::zeros(size);
        for k in 0..size {
            let m = level - k;
            let n = k;
            let (mf, nf) = (m as f64, n as f64);
            let diag = inp.delta * (mf + nf)
                + inp.chi * (mf * (mf - 1.0) + nf * (nf - 1.0))
                + 2.0 * inp.chi * mf * nf;
            matrix[(k, k)] = Complex64::new(diag, -0.5 * inp.gamma * (mf + nf));
            // <m, n| J a1+ a2 |m-1, n+1> = J sqrt(m (n+1))
            if k + 1 < size {
                let amp = (mf * (nf + 1.0)).sqrt();
                matrix[(k, k + 1)] = inp.j * amp;
                matrix[(k + 1, k)] = inp.j.conj() * amp;
            }
            // drive from |m-1, n>: xi sqrt(m)
            if m >= 1 && n < level {
                rhs[k] = -inp.xi * mf.sqrt() * below[n];
            }
        }
        let solution = matrix
            .solve_into(rhs)
            .map_err(|_| Error::SingularHierarchy { level })?;
        for k in 0..size {
            amplitudes.insert((level - k, k), solution[k]);
        }
        below = solution.to_vec();
    }
    Ok(AmplitudeSet { amplitudes })
}

/// One placement satisfying a tip condition.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConditionPoint {
    pub r_nm: f64,
    pub phi_um: f64,
    /// Phase-branch or root index.
    pub branch: usize,
    /// Absolute defining-equation residual at the returned point.
    pub residual: f64,
}

/// All placements found for one condition.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionSolution {
    pub points: Vec<ConditionPoint>,
}

/// Tip placements that cancel the total coupling, `J0 + J_tip = 0`.
///
/// The gap follows from the magnitude match `a_t e^(-r/l_t) = J0`, the
/// azimuth from the phase condition `Theta = (2l + 1) pi`:
///
/// ```text
/// r* = l_t ln(a_t / J0),
/// phi_l = [(2l + 1) pi - theta - theta_t r*] / (2 k_opt).
/// ```
pub fn decoupling_positions(
    j0: f64,
    tip: &TipModel,
    k_opt: f64,
    l_max: usize,
) -> Result<ConditionSolution> {
    if j0 <= 0.0 {
        return Err(Error::NoSolution(
            "decoupling needs a nonzero intrinsic coupling to cancel".into(),
        ));
    }
    if tip.a_t < j0 {
        return Err(Error::NoSolution(format!(
            "tip amplitude {} cannot cancel J0 = {}",
            tip.a_t, j0
        )));
    }
    let r_nm = tip.inv_2beta_t_nm * (tip.a_t / j0).ln();
    let r_um = r_nm * 1e-3;
    let mut points = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        let phi_um = ((2 * l + 1) as f64 * std::f64::consts::PI - tip.theta - tip.theta_t * r_um)
            / (2.0 * k_opt);
        let geom = TipGeometry { r_nm, phi_um };
        let residual = (Complex64::new(j0, 0.0) + tip_coupling(tip, &geom, k_opt)).norm();
        if residual > RESIDUAL_TOL {
            return Err(Error::NoConvergence(format!(
                "decoupling residual {residual:.3e} at branch {l}"
            )));
        }
        points.push(ConditionPoint { r_nm, phi_um, branch: l, residual });
    }
    Ok(ConditionSolution { points })
}

/// Tip azimuths where the coupling matches the linewidth, `|J| = gamma`,
/// at a fixed gap: the weak-drive blockade condition once `chi / gamma`
/// is held at 1/2.
///
/// The residual `|J0 + J_tip(r, phi)| - gamma(r)` is scanned over the
/// window, sign changes are bracketed and bisected to 1e-12 um.
pub fn blockade_positions_weak(
    j0: f64,
    tip: &TipModel,
    k_opt: f64,
    r_nm: f64,
    phi_window_um: (f64, f64),
) -> Result<ConditionSolution> {
    let (lo, hi) = phi_window_um;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(
            "phi window must have positive width".into(),
        ));
    }
    let gamma = 1.0 + tip_loss(tip, r_nm);
    let objective = |phi_um: f64| -> f64 {
        let geom = TipGeometry { r_nm, phi_um };
        (Complex64::new(j0, 0.0) + tip_coupling(tip, &geom, k_opt)).norm() - gamma
    };

    let step = (hi - lo) / (SCAN_POINTS as f64 - 1.0);
    let mut points = Vec::new();
    let mut prev_phi = lo;
    let mut prev_val = objective(lo);
    for i in 1..SCAN_POINTS {
        let phi = lo + step * i as f64;
        let val = objective(phi);
        if prev_val == 0.0 || prev_val * val < 0.0 {
            let root = if prev_val == 0.0 {
                prev_phi
            } else {
                bisect(&objective, prev_phi, phi)
            };
            let residual = objective(root).abs();
            if residual <= RESIDUAL_TOL {
                points.push(ConditionPoint {
                    r_nm,
                    phi_um: root,
                    branch: points.len(),
                    residual,
                });
            }
        }
        prev_phi = phi;
        prev_val = val;
    }
    if points.is_empty() {
        return Err(Error::NoSolution(format!(
            "|J| never crosses gamma = {gamma:.6} for phi in [{lo}, {hi}] um"
        )));
    }
    Ok(ConditionSolution { points })
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    while hi - lo > BISECTION_TOL_UM {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    0.5 * (lo + hi)
}
