//! Deterministic parameter sweeps, tabular emission and the
//! backscattering-immunity efficiency ratio.
//!
//! A sweep is a row-major cartesian product over declared axes; every grid
//! point is evaluated independently (in parallel, gathered back in declared
//! order) and failures are recorded in a status column instead of aborting
//! the run. Identical specs produce byte-identical CSV: floats are written
//! with Rust's shortest round-trip formatting, rows carry no timestamps,
//! and the sidecar metadata is limited to the resolved spec, a SHA-256 of
//! it, and the crate version.
//!
//! The efficiency ratio compares the depth of the g2(0) blockade dip with
//! and without intrinsic backscattering,
//!
//! ```text
//! zeta = (1 - min_Delta g2 | J0 != 0) / (1 - min_Delta g2 | J0 = 0),
//! R = max(0, zeta),
//! ```
//!
//! with the minimum taken either on explicit detunings or on a scan with
//! golden-section refinement (fixed iteration count, so results are
//! reproducible bit for bit).

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{self, WeakDriveInputs};
use crate::error::{Error, Result};
use crate::liouville::{steady_correlations, CorrelationOptions};
use crate::model::SystemParams;

/// Probability columns emitted per engine: all `(m, n)` with `m + n <= 3`,
/// in lexicographic order.
pub const PROB_KEYS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 0),
    (1, 1),
    (1, 2),
    (2, 0),
    (2, 1),
    (3, 0),
];

/// Hard cap on grid size to catch runaway specs.
const MAX_GRID_POINTS: usize = 200_000;

/// Efficiency ratios above `1 + this` indicate an inconsistent comparison.
const RATIO_HEADROOM: f64 = 0.01;

/// One value of a table; `Empty` renders as an empty CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Empty,
    Text(String),
    Num(f64),
}

impl Cell {
    pub fn from_option(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    /// Numeric view, when the cell holds a number.
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    fn push_csv(&self, out: &mut String) {
        match self {
            Cell::Empty => {}
            Cell::Num(v) => {
                // shortest round-trip decimal; deterministic for equal bits
                out.push_str(&format!("{v}"));
            }
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    out.push('"');
                    out.push_str(&s.replace('"', "\"\""));
                    out.push('"');
                } else {
                    out.push_str(s);
                }
            }
        }
    }
}

/// Rectangular results table.
#[derive(Clone, Debug)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn from_rows(columns: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        for row in &rows {
            if row.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: columns.len(),
                    got: row.len(),
                });
            }
        }
        Ok(Self { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// UTF-8 CSV with a header row and LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                cell.push_csv(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

/// Which solver(s) fill the observable columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    MasterEquation,
    Analytic,
    #[default]
    Both,
}

impl EngineKind {
    fn wants_master_equation(self) -> bool {
        self != EngineKind::Analytic
    }

    fn wants_analytic(self) -> bool {
        self != EngineKind::MasterEquation
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisScale {
    #[default]
    Linear,
    Log,
}

/// One sweep dimension. Axis names address [`SystemParams`] fields
/// (`delta`, `chi`, `xi`, `j0`) or tip placement (`r_nm`, `phi_um`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: AxisScale,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.scale {
                    AxisScale::Linear => self.min + (self.max - self.min) * t,
                    AxisScale::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * t).exp(),
                }
            })
            .collect()
    }
}

const AXIS_NAMES: [&str; 6] = ["delta", "chi", "xi", "j0", "r_nm", "phi_um"];

fn apply_axis(params: &mut SystemParams, name: &str, value: f64) -> Result<()> {
    match name {
        "delta" => params.delta = value,
        "chi" => params.chi = value,
        "xi" => params.xi = value,
        "j0" => params.j0 = value,
        "r_nm" | "phi_um" => {
            let tip = params.tip.as_mut().ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "axis '{name}' requires a tip attachment on the base parameters"
                ))
            })?;
            if name == "r_nm" {
                tip.geom.r_nm = value;
            } else {
                tip.geom.phi_um = value;
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!("unknown sweep axis '{other}'")));
        }
    }
    Ok(())
}

/// Declarative sweep description; serializable as a JSON config document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub base: SystemParams,
    pub engine: EngineKind,
    pub n_max: usize,
    /// Also emit g3(0) / g4(0) master-equation columns.
    pub higher_order: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            axes: Vec::new(),
            base: SystemParams::default(),
            engine: EngineKind::Both,
            n_max: 5,
            higher_order: false,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_max == 0 || self.n_max > 10 {
            return Err(Error::InvalidParameter(format!(
                "n_max must lie in 1..=10, got {}",
                self.n_max
            )));
        }
        let mut total = 1usize;
        for (i, axis) in self.axes.iter().enumerate() {
            if !AXIS_NAMES.contains(&axis.name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "unknown sweep axis '{}'",
                    axis.name
                )));
            }
            if self.axes[..i].iter().any(|a| a.name == axis.name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate sweep axis '{}'",
                    axis.name
                )));
            }
            if axis.points < 2 {
                return Err(Error::InvalidParameter(format!(
                    "axis '{}' needs at least 2 points",
                    axis.name
                )));
            }
            if !axis.min.is_finite() || !axis.max.is_finite() || axis.max <= axis.min {
                return Err(Error::InvalidParameter(format!(
                    "axis '{}' needs finite bounds with max > min",
                    axis.name
                )));
            }
            if axis.scale == AxisScale::Log && axis.min <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "log axis '{}' needs positive bounds",
                    axis.name
                )));
            }
            if (axis.name == "r_nm" || axis.name == "phi_um") && self.base.tip.is_none() {
                return Err(Error::InvalidParameter(format!(
                    "axis '{}' requires a tip attachment on the base parameters",
                    axis.name
                )));
            }
            total = total.saturating_mul(axis.points);
        }
        if total > MAX_GRID_POINTS {
            return Err(Error::InvalidParameter(format!(
                "sweep grid has {total} points, above the safety cap {MAX_GRID_POINTS}"
            )));
        }
        Ok(())
    }
}

/// Run provenance pinned into every sidecar.
#[derive(Clone, Debug, Serialize)]
pub struct SweepMeta {
    pub code_version: String,
    pub spec_sha256: String,
}

/// A named table plus the resolved spec it came from.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub name: String,
    pub spec_json: serde_json::Value,
    pub meta: SweepMeta,
    pub table: Table,
}

impl SweepResult {
    pub fn new(name: impl Into<String>, spec_json: serde_json::Value, table: Table) -> Self {
        let compact = spec_json.to_string();
        let mut hasher = Sha256::new();
        hasher.update(compact.as_bytes());
        let meta = SweepMeta {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            spec_sha256: format!("{:x}", hasher.finalize()),
        };
        Self { name: name.into(), spec_json, meta, table }
    }

    pub fn csv(&self) -> String {
        self.table.to_csv()
    }

    /// Sidecar document: resolved spec plus provenance, pretty-printed.
    /// Deliberately contains no timestamp so reruns are byte-identical.
    pub fn sidecar(&self) -> String {
        let doc = serde_json::json!({
            "name": self.name,
            "code_version": self.meta.code_version,
            "spec_sha256": self.meta.spec_sha256,
            "spec": self.spec_json,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("static document serializes");
        text.push('\n');
        text
    }

    /// Writes `{name}.csv` and `{name}.spec.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        let json_path = dir.join(format!("{}.spec.json", self.name));
        std::fs::write(&csv_path, self.csv())?;
        std::fs::write(&json_path, self.sidecar())?;
        Ok((csv_path, json_path))
    }
}

/// Master-equation observable cells:
/// `n_cw, g2 [, g3, g4], P_mn x 10`.
pub(crate) fn master_equation_cells(
    params: &SystemParams,
    n_max: usize,
    higher_order: bool,
) -> (Vec<Cell>, Option<String>) {
    let width = if higher_order { 14 } else { 12 };
    match steady_correlations(params, &CorrelationOptions { n_max, higher_order }) {
        Ok(res) => {
            let mut cells = Vec::with_capacity(width);
            cells.push(Cell::Num(res.n_cw));
            cells.push(Cell::from_option(res.g2_0));
            if higher_order {
                cells.push(Cell::from_option(res.g3_0));
                cells.push(Cell::from_option(res.g4_0));
            }
            for key in PROB_KEYS {
                cells.push(Cell::from_option(res.p_mn.get(&key).copied()));
            }
            (cells, None)
        }
        Err(e) => (vec![Cell::Empty; width], Some(format!("master-equation: {e}"))),
    }
}

/// Weak-drive observable cells: `n_cw, g2, P_mn x 10`.
///
/// The analytic occupation is the one-photon probability `P10`, which is
/// exactly independent of the Kerr shift (the level-1 hierarchy never sees
/// `chi`).
pub(crate) fn analytic_cells(params: &SystemParams) -> (Vec<Cell>, Option<String>) {
    let inputs = WeakDriveInputs::from_params(params);
    let evaluated = analytic::effective_amplitudes(&inputs).and_then(|amps| {
        let g2 = analytic::g2_closed_form(&inputs)?;
        Ok((amps, g2))
    });
    match evaluated {
        Ok((amps, g2)) => {
            let mut cells = Vec::with_capacity(12);
            cells.push(Cell::from_option(amps.probability(1, 0)));
            cells.push(Cell::Num(g2));
            for (m, n) in PROB_KEYS {
                cells.push(Cell::from_option(amps.probability(m, n)));
            }
            (cells, None)
        }
        Err(e) => (vec![Cell::Empty; 12], Some(format!("analytic: {e}"))),
    }
}

/// Executes a sweep; grid points run in parallel, rows come back in
/// row-major declared-axis order, and per-point failures land in the
/// status column.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;

    let axis_values: Vec<Vec<f64>> = spec.axes.iter().map(Axis::values).collect();
    let total: usize = axis_values.iter().map(Vec::len).product::<usize>().max(1);
    // stride of axis k = product of the point counts of all later axes
    let strides: Vec<usize> = (0..spec.axes.len())
        .map(|k| axis_values[k + 1..].iter().map(Vec::len).product())
        .collect();

    let mut columns: Vec<String> = spec.axes.iter().map(|a| a.name.clone()).collect();
    columns.push("abs_j_over_gamma1".into());
    columns.push("gamma_total_over_gamma1".into());
    if spec.engine.wants_master_equation() {
        columns.push("n_cw_me".into());
        columns.push("g2_me".into());
        if spec.higher_order {
            columns.push("g3_me".into());
            columns.push("g4_me".into());
        }
        for (m, n) in PROB_KEYS {
            columns.push(format!("p{m}{n}_me"));
        }
    }
    if spec.engine.wants_analytic() {
        columns.push("n_cw_analytic".into());
        columns.push("g2_analytic".into());
        for (m, n) in PROB_KEYS {
            columns.push(format!("p{m}{n}_analytic"));
        }
    }
    columns.push("status".into());

    let rows: Vec<Vec<Cell>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut params = spec.base;
            let mut cells = Vec::with_capacity(columns.len());
            for (k, axis) in spec.axes.iter().enumerate() {
                let value = axis_values[k][(flat / strides[k]) % axis_values[k].len()];
                // axis names and tip presence were validated with the spec
                apply_axis(&mut params, &axis.name, value).expect("validated axis");
                cells.push(Cell::Num(value));
            }
            cells.push(Cell::Num(params.j_total().norm()));
            cells.push(Cell::Num(params.gamma_total()));

            let mut problems = Vec::new();
            if spec.engine.wants_master_equation() {
                let (c, err) = master_equation_cells(&params, spec.n_max, spec.higher_order);
                cells.extend(c);
                problems.extend(err);
            }
            if spec.engine.wants_analytic() {
                let (c, err) = analytic_cells(&params);
                cells.extend(c);
                problems.extend(err);
            }
            cells.push(Cell::Text(if problems.is_empty() {
                "ok".to_string()
            } else {
                problems.join("; ")
            }));
            cells
        })
        .collect();

    let spec_json = serde_json::to_value(spec)?;
    let table = Table::from_rows(columns, rows)?;
    Ok(SweepResult::new("sweep", spec_json, table))
}

/// Detuning set over which blockade depth is minimized.
#[derive(Clone, Debug)]
pub enum DeltaGrid {
    /// Explicit detunings (e.g. just `[0]` for on-resonance comparison).
    Points(Vec<f64>),
    /// Scan plus golden-section refinement around the best bracket.
    Scan { min: f64, max: f64, points: usize },
}

const GOLDEN_ITERATIONS: usize = 60;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_refine<F: Fn(f64) -> Result<f64>>(eval: &F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    for _ in 0..GOLDEN_ITERATIONS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    Ok(if fc < fd { (fc, c) } else { (fd, d) })
}

/// Minimizes `eval` over the detuning grid; returns `(min value, argmin)`.
///
/// The scan variant refines with a fixed golden-section iteration count so
/// repeated runs agree to the bit.
pub fn minimize_g2<F: Fn(f64) -> Result<f64>>(eval: F, grid: &DeltaGrid) -> Result<(f64, f64)> {
    match grid {
        DeltaGrid::Points(points) => {
            if points.is_empty() {
                return Err(Error::InvalidParameter("empty detuning grid".into()));
            }
            let mut best = (f64::INFINITY, points[0]);
            for &delta in points {
                let value = eval(delta)?;
                if value < best.0 {
                    best = (value, delta);
                }
            }
            Ok(best)
        }
        DeltaGrid::Scan { min, max, points } => {
            if *points < 3 || !(max > min) {
                return Err(Error::InvalidParameter(
                    "scan grid needs max > min and at least 3 points".into(),
                ));
            }
            let step = (max - min) / (*points - 1) as f64;
            let mut best_idx = 0usize;
            let mut best_val = f64::INFINITY;
            let mut xs = Vec::with_capacity(*points);
            for i in 0..*points {
                let x = min + step * i as f64;
                let value = eval(x)?;
                if value < best_val {
                    best_val = value;
                    best_idx = i;
                }
                xs.push(x);
            }
            let lo = xs[best_idx.saturating_sub(1)];
            let hi = xs[(best_idx + 1).min(xs.len() - 1)];
            let (refined_val, refined_x) = golden_refine(&eval, lo, hi)?;
            Ok(if refined_val < best_val {
                (refined_val, refined_x)
            } else {
                (best_val, xs[best_idx])
            })
        }
    }
}

/// Master-equation `g2(0)` minimum over a detuning grid.
pub fn min_g2_master_equation(
    params: &SystemParams,
    grid: &DeltaGrid,
    n_max: usize,
) -> Result<(f64, f64)> {
    let eval = |delta: f64| -> Result<f64> {
        let point = SystemParams { delta, ..*params };
        steady_correlations(&point, &CorrelationOptions { n_max, higher_order: false })?
            .g2_0
            .ok_or(Error::ZeroPhotonNumber)
    };
    minimize_g2(eval, grid)
}

/// Combines the two blockade-depth minima into `R = max(0, zeta)`.
pub fn ratio_from_minima(min_with_coupling: f64, min_ideal: f64) -> Result<f64> {
    let denominator = 1.0 - min_ideal;
    if denominator <= 0.0 {
        return Err(Error::IdealNotBlockading);
    }
    let zeta = (1.0 - min_with_coupling) / denominator;
    let ratio = zeta.max(0.0);
    if ratio > 1.0 + RATIO_HEADROOM {
        return Err(Error::RatioOutOfRange(ratio));
    }
    Ok(ratio)
}

/// Backscattering-immunity efficiency: blockade depth with coupling
/// (numerator) against the backscattering-free reference (denominator),
/// both minimized over the same detuning grid. The two parameter sets must
/// share the Kerr shift and drive amplitude for the comparison to be
/// meaningful.
pub fn efficiency_ratio(
    with_coupling: &SystemParams,
    ideal: &SystemParams,
    grid: &DeltaGrid,
    n_max: usize,
) -> Result<f64> {
    if (with_coupling.chi - ideal.chi).abs() > 1e-12 || (with_coupling.xi - ideal.xi).abs() > 1e-12
    {
        return Err(Error::InvalidParameter(
            "efficiency comparison requires identical chi and xi".into(),
        ));
    }
    let (min_ideal, _) = min_g2_master_equation(ideal, grid, n_max)?;
    let (min_with, _) = min_g2_master_equation(with_coupling, grid, n_max)?;
    ratio_from_minima(min_with, min_ideal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{g2_closed_form, WeakDriveInputs};
    use crate::model::{TipAttachment, TipGeometry, TipModel};
    use approx::assert_relative_eq;

    fn ideal_blockade_base() -> SystemParams {
        SystemParams { chi: 5.3, xi: 0.01, j0: 0.0, ..SystemParams::default() }
    }

    #[test]
    fn test_axis_values_linear_and_log() {
        let lin = Axis { name: "delta".into(), min: -2.0, max: 2.0, points: 5, scale: AxisScale::Linear };
        assert_eq!(lin.values(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let log = Axis { name: "xi".into(), min: 0.01, max: 1.0, points: 3, scale: AxisScale::Log };
        let vals = log.values();
        assert_relative_eq!(vals[0], 0.01, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 0.1, max_relative = 1e-12);
        assert_relative_eq!(vals[2], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn test_spec_validation_rejects_bad_axes() {
        let mut spec = SweepSpec {
            axes: vec![Axis { name: "delta".into(), min: 0.0, max: 1.0, points: 2, scale: AxisScale::Linear }],
            ..SweepSpec::default()
        };
        spec.validate().unwrap();

        spec.axes[0].points = 1;
        assert!(spec.validate().is_err());
        spec.axes[0].points = 2;

        spec.axes[0].name = "coupling".into();
        assert!(spec.validate().is_err());
        spec.axes[0].name = "r_nm".into();
        // r axis without a tip on the base parameters
        assert!(spec.validate().is_err());

        spec.axes[0].name = "xi".into();
        spec.axes[0].scale = AxisScale::Log;
        spec.axes[0].min = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn test_spec_serde_round_trip_rejects_unknown_keys() {
        let spec = SweepSpec {
            axes: vec![Axis { name: "chi".into(), min: 0.1, max: 2.0, points: 4, scale: AxisScale::Linear }],
            engine: EngineKind::Analytic,
            ..SweepSpec::default()
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"engine\":\"analytic\""));
        let back: SweepSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.axes.len(), 1);
        assert_eq!(back.engine, EngineKind::Analytic);

        let bad = r#"{"engine": "both", "grid": 3}"#;
        assert!(serde_json::from_str::<SweepSpec>(bad).is_err());
    }

    #[test]
    fn test_two_by_two_grid_order() {
        let spec = SweepSpec {
            axes: vec![
                Axis { name: "delta".into(), min: -1.0, max: 1.0, points: 2, scale: AxisScale::Linear },
                Axis { name: "xi".into(), min: 0.01, max: 0.02, points: 2, scale: AxisScale::Linear },
            ],
            engine: EngineKind::Analytic,
            ..SweepSpec::default()
        };
        let result = run_sweep(&spec).unwrap();
        assert_eq!(result.table.rows().len(), 4);
        let deltas: Vec<f64> = result
            .table
            .rows()
            .iter()
            .map(|r| r[0].as_num().unwrap())
            .collect();
        let xis: Vec<f64> = result
            .table
            .rows()
            .iter()
            .map(|r| r[1].as_num().unwrap())
            .collect();
        // row-major in declared order: delta outer, xi inner
        assert_eq!(deltas, vec![-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(xis, vec![0.01, 0.02, 0.01, 0.02]);
        let status = result.table.column_index("status").unwrap();
        assert!(result.table.rows().iter().all(|r| r[status] == Cell::Text("ok".into())));
    }

    #[test]
    fn test_single_point_sweep_reproduces_ideal_blockade() {
        let spec = SweepSpec {
            base: ideal_blockade_base(),
            engine: EngineKind::Both,
            n_max: 5,
            ..SweepSpec::default()
        };
        let result = run_sweep(&spec).unwrap();
        assert_eq!(result.table.rows().len(), 1);
        let row = &result.table.rows()[0];
        let g2_me = row[result.table.column_index("g2_me").unwrap()].as_num().unwrap();
        let g2_an = row[result.table.column_index("g2_analytic").unwrap()].as_num().unwrap();
        assert!((0.008..=0.010).contains(&g2_me), "g2 = {g2_me}");
        assert_relative_eq!(g2_me, g2_an, max_relative = 0.02);
    }

    #[test]
    fn test_sweep_flags_failing_points_without_aborting() {
        // negative drive amplitudes are rejected by the solver per point
        let spec = SweepSpec {
            axes: vec![Axis { name: "xi".into(), min: -0.02, max: 0.02, points: 2, scale: AxisScale::Linear }],
            base: ideal_blockade_base(),
            engine: EngineKind::MasterEquation,
            n_max: 2,
            ..SweepSpec::default()
        };
        let result = run_sweep(&spec).unwrap();
        assert_eq!(result.table.rows().len(), 2);
        let status = result.table.column_index("status").unwrap();
        let first = &result.table.rows()[0][status];
        let second = &result.table.rows()[1][status];
        assert!(matches!(first, Cell::Text(s) if s.contains("master-equation")));
        assert_eq!(second, &Cell::Text("ok".into()));
    }

    #[test]
    fn test_csv_rendering_and_escaping() {
        let table = Table::from_rows(
            vec!["x".into(), "note".into(), "y".into()],
            vec![
                vec![Cell::Num(0.1), Cell::Text("plain".into()), Cell::Empty],
                vec![
                    Cell::Num(354.078),
                    Cell::Text("needs, quoting \"here\"".into()),
                    Cell::Num(1e-10),
                ],
            ],
        )
        .unwrap();
        let csv = table.to_csv();
        assert_eq!(
            csv,
            "x,note,y\n0.1,plain,\n354.078,\"needs, quoting \"\"here\"\"\",0.0000000001\n"
        );
        assert_eq!(csv, table.to_csv());
    }

    #[test]
    fn test_result_metadata_is_deterministic() {
        let spec = SweepSpec { engine: EngineKind::Analytic, ..SweepSpec::default() };
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.meta.spec_sha256, b.meta.spec_sha256);
        assert_eq!(a.csv(), b.csv());
        assert_eq!(a.sidecar(), b.sidecar());
        assert!(!a.sidecar().to_lowercase().contains("time"));

        let other = SweepSpec { n_max: 4, engine: EngineKind::Analytic, ..SweepSpec::default() };
        let c = run_sweep(&other).unwrap();
        assert_ne!(a.meta.spec_sha256, c.meta.spec_sha256);
    }

    #[test]
    fn test_scan_minimizer_finds_the_calculus_minimum() {
        // For J = 0 the closed form is (4 D^2 + 1) / ((2 D + 2 chi)^2 + 1)
        // whose minimum at chi = 5.3 sits at D = (-10.6 + sqrt(116.36)) / 4.
        let eval = |delta: f64| -> Result<f64> {
            g2_closed_form(&WeakDriveInputs {
                delta,
                chi: 5.3,
                j: num_complex::Complex64::new(0.0, 0.0),
                gamma: 1.0,
                xi: 0.01,
            })
        };
        let (value, argmin) =
            minimize_g2(eval, &DeltaGrid::Scan { min: -6.0, max: 6.0, points: 241 }).unwrap();
        let exact_arg = (-10.6 + 116.36_f64.sqrt()) / 4.0;
        assert_relative_eq!(argmin, exact_arg, epsilon = 1e-8);
        assert_relative_eq!(value, 0.0087450, epsilon = 1e-6);
        // repeated runs agree exactly (fixed iteration budget)
        let again = minimize_g2(eval, &DeltaGrid::Scan { min: -6.0, max: 6.0, points: 241 }).unwrap();
        assert_eq!(value.to_bits(), again.0.to_bits());
        assert_eq!(argmin.to_bits(), again.1.to_bits());
    }

    #[test]
    fn test_efficiency_ratio_identity_and_clamp() {
        let ideal = ideal_blockade_base();
        let r = efficiency_ratio(&ideal, &ideal, &DeltaGrid::Points(vec![0.0]), 3).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);

        // strong bare backscattering pushes g2 above 1: clamped to zero
        let bare = SystemParams { j0: 1.8, ..ideal };
        let r0 = efficiency_ratio(&bare, &ideal, &DeltaGrid::Points(vec![0.0]), 3).unwrap();
        assert_eq!(r0, 0.0);
    }

    #[test]
    fn test_efficiency_ratio_with_optimized_tip() {
        let ideal = ideal_blockade_base();
        let tip = TipModel::default();
        let sol = crate::analytic::decoupling_positions(1.8, &tip, ideal.k_opt_rad_per_um, 0)
            .unwrap();
        let with_tip = SystemParams {
            j0: 1.8,
            tip: Some(TipAttachment {
                model: tip,
                geom: TipGeometry { r_nm: sol.points[0].r_nm, phi_um: sol.points[0].phi_um },
            }),
            ..ideal
        };
        let r = efficiency_ratio(&with_tip, &ideal, &DeltaGrid::Points(vec![0.0]), 5).unwrap();
        assert!((0.99..=1.0).contains(&r), "R = {r}");
    }

    #[test]
    fn test_efficiency_ratio_error_paths() {
        let ideal = ideal_blockade_base();
        let different_chi = SystemParams { chi: 3.0, ..ideal };
        assert!(matches!(
            efficiency_ratio(&different_chi, &ideal, &DeltaGrid::Points(vec![0.0]), 3),
            Err(Error::InvalidParameter(_))
        ));

        // reference that is not blockading at all: g2(0) > 1
        let bunched = SystemParams { j0: 1.8, ..ideal };
        assert!(matches!(
            efficiency_ratio(&bunched, &bunched, &DeltaGrid::Points(vec![0.0]), 3),
            Err(Error::IdealNotBlockading)
        ));

        assert!(matches!(
            ratio_from_minima(-0.5, 0.009),
            Err(Error::RatioOutOfRange(_))
        ));
    }
}
