//! Reference experiment tables.
//!
//! Four canonical studies of the tip-controlled blockade, emitted as
//! deterministic [`SweepResult`] tables:
//!
//! 1. `fig1` — detuning scans of occupation and g2(0) for the
//!    backscattering-free cavity, the bare backscattering-coupled cavity,
//!    and the cavity with the tip parked at its decoupling position.
//! 2. `fig2` — g2(0) over tip azimuth and Kerr shift at the decoupling
//!    gap, showing where blockade and decoupling coexist.
//! 3. `fig3` — the decoupling mechanism: the |J|^2 landscape over tip
//!    position, transmission restoration (P10 up, P01 down) across the
//!    decoupling gap, and g2(0) versus gap for a decoupled versus a
//!    detuned azimuth.
//! 4. `fig4` — robustness: the efficiency ratio over tip position and
//!    versus backscattering strength, with and without the tip.
//!
//! All tables share the weak drive and Kerr shift of the single-point
//! studies. The default truncation (`n_max = 3`) keeps full-figure runs in
//! seconds; at the tabulated drive the g2(0) shift against `n_max = 5` is
//! below the cutoff-convergence criterion tested elsewhere.

use rayon::prelude::*;
use serde_json::json;

use crate::analytic::{self, WeakDriveInputs};
use crate::error::{Error, Result};
use crate::liouville::{steady_correlations, CorrelationOptions};
use crate::model::{default_k_opt, SystemParams, TipAttachment, TipGeometry, TipModel};
use crate::sweep::{min_g2_master_equation, ratio_from_minima, Cell, DeltaGrid, SweepResult, Table};

/// Kerr shift shared by the reference tables, in intrinsic-rate units.
pub const FIGURE_CHI: f64 = 5.3;
/// Weak drive amplitude shared by the reference tables.
pub const FIGURE_XI: f64 = 0.01;
/// Intrinsic backscattering strength of the tip studies.
pub const FIGURE_J0: f64 = 1.8;
/// Contrast azimuth for the mechanism scan: close to, but off, both the
/// decoupling and blockade azimuths.
pub const PHI_CONTRAST_UM: f64 = 0.21;

/// Options shared by every figure builder.
#[derive(Clone, Copy, Debug)]
pub struct FigureOptions {
    /// Per-mode Fock cutoff for the master-equation columns.
    pub n_max: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { n_max: 3 }
    }
}

fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| min + (max - min) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Backscattering-free reference cavity.
fn ideal_params() -> SystemParams {
    SystemParams {
        chi: FIGURE_CHI,
        xi: FIGURE_XI,
        j0: 0.0,
        ..SystemParams::default()
    }
}

/// Backscattering-coupled cavity without a tip.
fn bare_params() -> SystemParams {
    SystemParams { j0: FIGURE_J0, ..ideal_params() }
}

/// Backscattering-coupled cavity with the tip at position `(r, phi)`.
fn tip_params(r_nm: f64, phi_um: f64) -> SystemParams {
    SystemParams {
        tip: Some(TipAttachment {
            model: TipModel::default(),
            geom: TipGeometry { r_nm, phi_um },
        }),
        ..bare_params()
    }
}

/// First decoupling position `(r*, phi_0)` of the default tip against the
/// figure backscattering strength.
fn decoupling_point() -> Result<(f64, f64)> {
    let solution =
        analytic::decoupling_positions(FIGURE_J0, &TipModel::default(), default_k_opt(), 0)?;
    let point = &solution.points[0];
    Ok((point.r_nm, point.phi_um))
}

/// `(n_cw, g2)` columns from the master equation, or a recorded failure.
fn me_pair(params: &SystemParams, n_max: usize) -> (Cell, Cell, Option<String>) {
    match steady_correlations(params, &CorrelationOptions { n_max, higher_order: false }) {
        Ok(res) => (Cell::Num(res.n_cw), Cell::from_option(res.g2_0), None),
        Err(e) => (Cell::Empty, Cell::Empty, Some(format!("master-equation: {e}"))),
    }
}

/// `(n_cw, g2)` columns from the weak-drive closed forms. The analytic
/// occupation is the one-photon probability, which is exactly independent
/// of the Kerr shift.
fn analytic_pair(params: &SystemParams) -> (Cell, Cell, Option<String>) {
    let inputs = WeakDriveInputs::from_params(params);
    let pair = analytic::p10_closed_form(&inputs)
        .and_then(|p10| Ok((p10, analytic::g2_closed_form(&inputs)?)));
    match pair {
        Ok((p10, g2)) => (Cell::Num(p10), Cell::Num(g2), None),
        Err(e) => (Cell::Empty, Cell::Empty, Some(format!("analytic: {e}"))),
    }
}

fn status_cell(problems: Vec<String>) -> Cell {
    Cell::Text(if problems.is_empty() { "ok".to_string() } else { problems.join("; ") })
}

/// Detuning scans for the three canonical cavities: backscattering-free
/// (`ideal`), backscattering without a tip (`bare`), and backscattering
/// with the tip at its decoupling position (`tip`).
pub fn fig1_detuning_scan(opts: &FigureOptions) -> Result<SweepResult> {
    const DELTA_POINTS: usize = 241;
    let (r_star, phi0) = decoupling_point()?;
    let deltas = linspace(-6.0, 6.0, DELTA_POINTS);
    let families: Vec<(&str, SystemParams)> = vec![
        ("ideal", ideal_params()),
        ("bare", bare_params()),
        ("tip", tip_params(r_star, phi0)),
    ];

    let jobs: Vec<(usize, f64)> = (0..families.len())
        .flat_map(|f| deltas.iter().map(move |&d| (f, d)))
        .collect();
    let rows: Vec<Vec<Cell>> = jobs
        .into_par_iter()
        .map(|(f, delta)| {
            let (label, base) = &families[f];
            let params = SystemParams { delta, ..*base };
            let mut problems = Vec::new();
            let (me_n, me_g2, me_err) = me_pair(&params, opts.n_max);
            problems.extend(me_err);
            let (an_n, an_g2, an_err) = analytic_pair(&params);
            problems.extend(an_err);
            vec![
                Cell::Text((*label).to_string()),
                Cell::Num(delta),
                Cell::Num(params.j_total().norm()),
                Cell::Num(params.gamma_total()),
                me_n,
                me_g2,
                an_n,
                an_g2,
                status_cell(problems),
            ]
        })
        .collect();

    let columns = vec![
        "family".into(),
        "delta_over_gamma1".into(),
        "abs_j_over_gamma1".into(),
        "gamma_total_over_gamma1".into(),
        "n_cw_me".into(),
        "g2_me".into(),
        "n_cw_analytic".into(),
        "g2_analytic".into(),
        "status".into(),
    ];
    let spec = json!({
        "figure": "fig1",
        "families": ["ideal", "bare", "tip"],
        "delta_over_gamma1": {"min": -6.0, "max": 6.0, "points": DELTA_POINTS},
        "chi_over_gamma1": FIGURE_CHI,
        "xi_over_gamma1": FIGURE_XI,
        "j0_over_gamma1": FIGURE_J0,
        "tip_position": {"r_nm": r_star, "phi_um": phi0},
        "n_max": opts.n_max,
        "engine": "both",
    });
    Ok(SweepResult::new("fig1", spec, Table::from_rows(columns, rows)?))
}

/// g2(0) over tip azimuth and Kerr shift with the gap held at the
/// decoupling value. A coarse block scans azimuth at four Kerr shifts; a
/// fine block scans the Kerr shift at the decoupling azimuth and at the
/// two blockade azimuths. Kerr shifts are stated in units of the total
/// linewidth at the decoupling gap.
pub fn fig2_phi_chi_map(opts: &FigureOptions) -> Result<SweepResult> {
    const PHI_WINDOW: (f64, f64) = (0.10, 0.45);
    const PHI_POINTS: usize = 141;
    const CHI_COARSE: [f64; 4] = [0.1, 0.5, 3.0, 5.3];
    const CHI_FINE: (f64, f64, usize) = (0.1, 6.0, 60);

    let (r_star, phi0) = decoupling_point()?;
    let gamma_total = tip_params(r_star, phi0).gamma_total();

    let blockade = analytic::blockade_positions_weak(
        FIGURE_J0,
        &TipModel::default(),
        default_k_opt(),
        r_star,
        PHI_WINDOW,
    )?;
    let mut fine_phis: Vec<f64> = blockade.points.iter().map(|p| p.phi_um).collect();
    fine_phis.push(phi0);
    fine_phis.sort_by(|a, b| a.partial_cmp(b).expect("finite azimuths"));

    let phis = linspace(PHI_WINDOW.0, PHI_WINDOW.1, PHI_POINTS);
    let chis_fine = linspace(CHI_FINE.0, CHI_FINE.1, CHI_FINE.2);

    // (block label, phi, chi in total-linewidth units)
    let mut jobs: Vec<(&str, f64, f64)> = Vec::new();
    for &chi_rel in &CHI_COARSE {
        for &phi in &phis {
            jobs.push(("phi-scan", phi, chi_rel));
        }
    }
    for &phi in &fine_phis {
        for &chi_rel in &chis_fine {
            jobs.push(("chi-scan", phi, chi_rel));
        }
    }

    let rows: Vec<Vec<Cell>> = jobs
        .into_par_iter()
        .map(|(block, phi, chi_rel)| {
            let params = SystemParams {
                chi: chi_rel * gamma_total,
                ..tip_params(r_star, phi)
            };
            let mut problems = Vec::new();
            let (me_n, me_g2, me_err) = me_pair(&params, opts.n_max);
            problems.extend(me_err);
            let (an_n, an_g2, an_err) = analytic_pair(&params);
            problems.extend(an_err);
            vec![
                Cell::Text(block.to_string()),
                Cell::Num(phi),
                Cell::Num(chi_rel),
                Cell::Num(params.chi),
                Cell::Num(params.j_total().norm()),
                Cell::Num(params.gamma_total()),
                me_n,
                me_g2,
                an_n,
                an_g2,
                status_cell(problems),
            ]
        })
        .collect();

    let columns = vec![
        "block".into(),
        "phi_um".into(),
        "chi_over_gamma_total".into(),
        "chi_over_gamma1".into(),
        "abs_j_over_gamma1".into(),
        "gamma_total_over_gamma1".into(),
        "n_cw_me".into(),
        "g2_me".into(),
        "n_cw_analytic".into(),
        "g2_analytic".into(),
        "status".into(),
    ];
    let spec = json!({
        "figure": "fig2",
        "r_nm": r_star,
        "gamma_total_over_gamma1": gamma_total,
        "phi_um": {"min": PHI_WINDOW.0, "max": PHI_WINDOW.1, "points": PHI_POINTS},
        "chi_over_gamma_total_coarse": CHI_COARSE,
        "chi_over_gamma_total_fine": {"min": CHI_FINE.0, "max": CHI_FINE.1, "points": CHI_FINE.2},
        "fine_phi_um": fine_phis,
        "xi_over_gamma1": FIGURE_XI,
        "j0_over_gamma1": FIGURE_J0,
        "n_max": opts.n_max,
        "engine": "both",
    });
    Ok(SweepResult::new("fig2", spec, Table::from_rows(columns, rows)?))
}

/// The decoupling mechanism in three panels: `b` maps the effective
/// backscattering |J|^2 over tip position (no solves), `c` tracks the
/// mode populations across the decoupling gap at the decoupling azimuth,
/// and `d` compares g2(0) versus gap at the decoupling azimuth against a
/// contrast azimuth where the tip never cancels the backscattering.
pub fn fig3_mechanism_scan(opts: &FigureOptions) -> Result<SweepResult> {
    const MAP_R: (f64, f64, usize) = (0.0, 600.0, 61);
    const MAP_PHI: (f64, f64, usize) = (0.0, 1.0, 51);
    const CUT_R: (f64, f64, usize) = (0.0, 1000.0, 201);

    let (_, phi0) = decoupling_point()?;
    let map_rs = linspace(MAP_R.0, MAP_R.1, MAP_R.2);
    let map_phis = linspace(MAP_PHI.0, MAP_PHI.1, MAP_PHI.2);
    let cut_rs = linspace(CUT_R.0, CUT_R.1, CUT_R.2);

    // (panel, r, phi, needs solves)
    let mut jobs: Vec<(&str, f64, f64, bool)> = Vec::new();
    for &r in &map_rs {
        for &phi in &map_phis {
            jobs.push(("b", r, phi, false));
        }
    }
    for &r in &cut_rs {
        jobs.push(("c", r, phi0, true));
    }
    for &phi in &[phi0, PHI_CONTRAST_UM] {
        for &r in &cut_rs {
            jobs.push(("d", r, phi, true));
        }
    }

    let rows: Vec<Vec<Cell>> = jobs
        .into_par_iter()
        .map(|(panel, r, phi, solve)| {
            let params = tip_params(r, phi);
            let abs_j = params.j_total().norm();
            let mut cells = vec![
                Cell::Text(panel.to_string()),
                Cell::Num(r),
                Cell::Num(phi),
                Cell::Num(abs_j),
                Cell::Num(abs_j * abs_j),
                Cell::Num(params.gamma_total()),
            ];
            if !solve {
                cells.extend(std::iter::repeat(Cell::Empty).take(6));
                cells.push(status_cell(Vec::new()));
                return cells;
            }
            let mut problems = Vec::new();
            let opts_me = CorrelationOptions { n_max: opts.n_max, higher_order: false };
            let (p10_me, p01_me, g2_me) = match steady_correlations(&params, &opts_me) {
                Ok(res) => (
                    Cell::from_option(res.p_mn.get(&(1, 0)).copied()),
                    Cell::from_option(res.p_mn.get(&(0, 1)).copied()),
                    Cell::from_option(res.g2_0),
                ),
                Err(e) => {
                    problems.push(format!("master-equation: {e}"));
                    (Cell::Empty, Cell::Empty, Cell::Empty)
                }
            };
            let inputs = WeakDriveInputs::from_params(&params);
            let analytic_triplet = analytic::p10_closed_form(&inputs).and_then(|p10| {
                let p01 = analytic::p01_closed_form(&inputs)?;
                let g2 = analytic::g2_closed_form(&inputs)?;
                Ok((p10, p01, g2))
            });
            let (p10_an, p01_an, g2_an) = match analytic_triplet {
                Ok((p10, p01, g2)) => (Cell::Num(p10), Cell::Num(p01), Cell::Num(g2)),
                Err(e) => {
                    problems.push(format!("analytic: {e}"));
                    (Cell::Empty, Cell::Empty, Cell::Empty)
                }
            };
            cells.extend([p10_me, p01_me, g2_me, p10_an, p01_an, g2_an]);
            cells.push(status_cell(problems));
            cells
        })
        .collect();

    let columns = vec![
        "panel".into(),
        "r_nm".into(),
        "phi_um".into(),
        "abs_j_over_gamma1".into(),
        "abs_j_sq_over_gamma1_sq".into(),
        "gamma_total_over_gamma1".into(),
        "p10_me".into(),
        "p01_me".into(),
        "g2_me".into(),
        "p10_analytic".into(),
        "p01_analytic".into(),
        "g2_analytic".into(),
        "status".into(),
    ];
    let spec = json!({
        "figure": "fig3",
        "map_r_nm": {"min": MAP_R.0, "max": MAP_R.1, "points": MAP_R.2},
        "map_phi_um": {"min": MAP_PHI.0, "max": MAP_PHI.1, "points": MAP_PHI.2},
        "cut_r_nm": {"min": CUT_R.0, "max": CUT_R.1, "points": CUT_R.2},
        "cut_phi_um": [phi0, PHI_CONTRAST_UM],
        "chi_over_gamma1": FIGURE_CHI,
        "xi_over_gamma1": FIGURE_XI,
        "j0_over_gamma1": FIGURE_J0,
        "n_max": opts.n_max,
        "engine": "both",
    });
    Ok(SweepResult::new("fig3", spec, Table::from_rows(columns, rows)?))
}

/// Robustness of the restored blockade. Panel `a` maps the efficiency
/// ratio over tip position at the reference backscattering strength;
/// panel `b` scans the backscattering strength with the tip re-optimized
/// to its decoupling position for each value, next to the tip-free ratio.
/// Blockade depths are compared on resonance.
pub fn fig4_robustness(opts: &FigureOptions) -> Result<SweepResult> {
    const MAP_R: (f64, f64, usize) = (200.0, 500.0, 31);
    const MAP_PHI: (f64, f64, usize) = (0.15, 0.40, 26);
    const J0_SCAN: (f64, f64, usize) = (0.0, 2.5, 51);

    let grid = DeltaGrid::Points(vec![0.0]);
    let (min_ideal, _) = min_g2_master_equation(&ideal_params(), &grid, opts.n_max)?;

    let map_rs = linspace(MAP_R.0, MAP_R.1, MAP_R.2);
    let map_phis = linspace(MAP_PHI.0, MAP_PHI.1, MAP_PHI.2);

    let ratio_for = |params: &SystemParams| -> Result<f64> {
        let (min_with, _) = min_g2_master_equation(params, &grid, opts.n_max)?;
        ratio_from_minima(min_with, min_ideal)
    };

    let mut position_jobs: Vec<(f64, f64)> = Vec::new();
    for &r in &map_rs {
        for &phi in &map_phis {
            position_jobs.push((r, phi));
        }
    }
    let mut rows: Vec<Vec<Cell>> = position_jobs
        .into_par_iter()
        .map(|(r, phi)| {
            let (ratio, status) = match ratio_for(&tip_params(r, phi)) {
                Ok(v) => (Cell::Num(v), status_cell(Vec::new())),
                Err(e) => (Cell::Empty, status_cell(vec![e.to_string()])),
            };
            vec![
                Cell::Text("a".to_string()),
                Cell::Num(r),
                Cell::Num(phi),
                Cell::Num(FIGURE_J0),
                ratio,
                Cell::Empty,
                status,
            ]
        })
        .collect();

    let j0s = linspace(J0_SCAN.0, J0_SCAN.1, J0_SCAN.2);
    let strength_rows: Vec<Vec<Cell>> = j0s
        .into_par_iter()
        .map(|j0| {
            if j0 == 0.0 {
                // no backscattering: with or without the tip this is the
                // reference cavity itself
                return vec![
                    Cell::Text("b".to_string()),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Num(0.0),
                    Cell::Num(1.0),
                    Cell::Num(1.0),
                    status_cell(Vec::new()),
                ];
            }
            let mut problems = Vec::new();
            let bare = SystemParams { j0, ..ideal_params() };
            let ratio_bare = match ratio_for(&bare) {
                Ok(v) => Cell::Num(v),
                Err(e) => {
                    problems.push(format!("no-tip: {e}"));
                    Cell::Empty
                }
            };
            let optimized = analytic::decoupling_positions(
                j0,
                &TipModel::default(),
                default_k_opt(),
                0,
            );
            let (r_cell, phi_cell, ratio_tip) = match optimized {
                Ok(solution) => {
                    let point = &solution.points[0];
                    let params = SystemParams { j0, ..tip_params(point.r_nm, point.phi_um) };
                    let ratio = match ratio_for(&params) {
                        Ok(v) => Cell::Num(v),
                        Err(e) => {
                            problems.push(format!("with-tip: {e}"));
                            Cell::Empty
                        }
                    };
                    (Cell::Num(point.r_nm), Cell::Num(point.phi_um), ratio)
                }
                Err(e) => {
                    problems.push(format!("decoupling: {e}"));
                    (Cell::Empty, Cell::Empty, Cell::Empty)
                }
            };
            vec![
                Cell::Text("b".to_string()),
                r_cell,
                phi_cell,
                Cell::Num(j0),
                ratio_tip,
                ratio_bare,
                status_cell(problems),
            ]
        })
        .collect();
    rows.extend(strength_rows);

    let columns = vec![
        "panel".into(),
        "r_nm".into(),
        "phi_um".into(),
        "j0_over_gamma1".into(),
        "efficiency_ratio".into(),
        "efficiency_ratio_no_tip".into(),
        "status".into(),
    ];
    let spec = json!({
        "figure": "fig4",
        "map_r_nm": {"min": MAP_R.0, "max": MAP_R.1, "points": MAP_R.2},
        "map_phi_um": {"min": MAP_PHI.0, "max": MAP_PHI.1, "points": MAP_PHI.2},
        "j0_over_gamma1": {"min": J0_SCAN.0, "max": J0_SCAN.1, "points": J0_SCAN.2},
        "map_j0_over_gamma1": FIGURE_J0,
        "delta_grid": [0.0],
        "chi_over_gamma1": FIGURE_CHI,
        "xi_over_gamma1": FIGURE_XI,
        "n_max": opts.n_max,
        "engine": "master-equation",
    });
    Ok(SweepResult::new("fig4", spec, Table::from_rows(columns, rows)?))
}

/// Dispatches a figure builder by its table number (1 through 4).
pub fn figure_by_id(id: u8, opts: &FigureOptions) -> Result<SweepResult> {
    match id {
        1 => fig1_detuning_scan(opts),
        2 => fig2_phi_chi_map(opts),
        3 => fig3_mechanism_scan(opts),
        4 => fig4_robustness(opts),
        other => Err(Error::InvalidParameter(format!(
            "unknown figure id {other}; expected 1..=4"
        ))),
    }
}
