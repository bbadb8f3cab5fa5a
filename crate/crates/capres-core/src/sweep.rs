//! Experiment harness: multi-seed sweeps over energy prices and capacitor
//! price scales, per-type installation censuses, Welch tests against the
//! reference algorithm, and plot-ready CSV output.
//!
//! Every (algorithm, grid point, run) cell is independent: run r always uses
//! seed base_seed + r, so any cell can be reproduced in isolation. Cells are
//! executed in parallel and merged by key before anything is written, which
//! keeps the CSV output byte-stable across runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cost::{annual_savings, CapacitorCatalog, EconomicParams};
use crate::eo::{run_eo, EoConfig};
use crate::error::{Error, Result};
use crate::memetic::{repair, run_ma, MaConfig, RepairStrategy};
use crate::network::{load_network_file, Network};
use crate::placement::Placement;
use crate::resonance::{placement_feasible, ResonancePolicy};
use crate::stats::{mean, sample_std, welch_t_test};

/// A competitor in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Eo,
    MaStrtg1,
    MaStrtg2,
    MaStrtg3,
}

impl Algorithm {
    pub fn all() -> Vec<Algorithm> {
        vec![
            Algorithm::Eo,
            Algorithm::MaStrtg1,
            Algorithm::MaStrtg2,
            Algorithm::MaStrtg3,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Eo => "eo",
            Algorithm::MaStrtg1 => "ma+strtg1",
            Algorithm::MaStrtg2 => "ma+strtg2",
            Algorithm::MaStrtg3 => "ma+strtg3",
        }
    }

    fn order(&self) -> usize {
        match self {
            Algorithm::Eo => 0,
            Algorithm::MaStrtg1 => 1,
            Algorithm::MaStrtg2 => 2,
            Algorithm::MaStrtg3 => 3,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eo" => Ok(Algorithm::Eo),
            "ma+strtg1" => Ok(Algorithm::MaStrtg1),
            "ma+strtg2" => Ok(Algorithm::MaStrtg2),
            "ma+strtg3" => Ok(Algorithm::MaStrtg3),
            other => Err(Error::InvalidConfig(format!(
                "algorithm must be eo|ma+strtg1|ma+strtg2|ma+strtg3, got {other:?}"
            ))),
        }
    }
}

/// Which quantity a grid point varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GridParam {
    EnergyPrice,
    PriceScale,
}

impl GridParam {
    pub fn label(&self) -> &'static str {
        match self {
            GridParam::EnergyPrice => "energy_price",
            GridParam::PriceScale => "price_scale",
        }
    }
}

/// Full description of a sweep experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub network_path: PathBuf,
    pub algorithms: Vec<Algorithm>,
    /// Energy prices in U$/MWh swept at price scale 1.
    pub energy_prices: Vec<f64>,
    /// Capacitor price multipliers swept at `scale_sweep_price`.
    pub price_scales: Vec<f64>,
    pub scale_sweep_price: f64,
    pub runs: u32,
    pub fe_budget: u64,
    pub base_seed: u64,
    pub resonance: ResonancePolicy,
    pub allow_root: bool,
    pub interest_rate: f64,
    pub horizon_years: u32,
    pub catalog_path: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(network_path: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            network_path: network_path.into(),
            algorithms: Algorithm::all(),
            energy_prices: (0..=10).map(|i| 50.0 + 10.0 * i as f64).collect(),
            price_scales: (0..=4).map(|i| 0.8 + 0.1 * i as f64).collect(),
            scale_sweep_price: 100.0,
            runs: 30,
            fe_budget: 50_000,
            base_seed: 1,
            resonance: ResonancePolicy::default(),
            allow_root: false,
            interest_rate: 0.12,
            horizon_years: 5,
            catalog_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("algorithms must be non-empty".into()));
        }
        if self.energy_prices.is_empty() && self.price_scales.is_empty() {
            return Err(Error::InvalidConfig("both grids are empty".into()));
        }
        self.resonance.validate()
    }

    /// Parse the `key = value` spec file format. Unknown keys are rejected.
    pub fn from_str_spec(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec::new("");
        let mut network_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                reason: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |reason: String| Error::Parse { line: line_no, reason };
            match key {
                "network" => {
                    spec.network_path = PathBuf::from(value);
                    network_seen = true;
                }
                "algorithms" => {
                    spec.algorithms = value
                        .split(',')
                        .map(|s| s.trim().parse())
                        .collect::<Result<Vec<_>>>()?;
                }
                "energy_prices" => spec.energy_prices = parse_grid(value).map_err(bad)?,
                "price_scales" => spec.price_scales = parse_grid(value).map_err(bad)?,
                "scale_sweep_price" => {
                    spec.scale_sweep_price =
                        value.parse().map_err(|_| bad(format!("bad number {value:?}")))?
                }
                "runs" => spec.runs = value.parse().map_err(|_| bad(format!("bad count {value:?}")))?,
                "fe_budget" => {
                    spec.fe_budget = value.parse().map_err(|_| bad(format!("bad count {value:?}")))?
                }
                "base_seed" => {
                    spec.base_seed = value.parse().map_err(|_| bad(format!("bad seed {value:?}")))?
                }
                "resonance_mode" => spec.resonance.mode = value.parse()?,
                "fundamental_hz" => {
                    spec.resonance.fundamental_hz =
                        value.parse().map_err(|_| bad(format!("bad number {value:?}")))?
                }
                "band_hz" => {
                    spec.resonance.band_hz =
                        value.parse().map_err(|_| bad(format!("bad number {value:?}")))?
                }
                "allow_root" => {
                    spec.allow_root = match value {
                        "true" => true,
                        "false" => false,
                        other => return Err(bad(format!("allow_root must be true|false, got {other:?}"))),
                    }
                }
                "interest_rate" => {
                    spec.interest_rate =
                        value.parse().map_err(|_| bad(format!("bad number {value:?}")))?
                }
                "horizon_years" => {
                    spec.horizon_years =
                        value.parse().map_err(|_| bad(format!("bad count {value:?}")))?
                }
                "catalog" => spec.catalog_path = Some(PathBuf::from(value)),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        if !network_seen {
            return Err(Error::Parse {
                line: 0,
                reason: "spec file must set `network`".into(),
            });
        }
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        ExperimentSpec::from_str_spec(&std::fs::read_to_string(path)?)
    }
}

/// Grids accept either a comma list (`50,60,70`) or `start:stop:step`.
fn parse_grid(value: &str) -> std::result::Result<Vec<f64>, String> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be start:stop:step, got {value:?}"));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?}")))
            .collect::<std::result::Result<_, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if step <= 0.0 || stop < start {
            return Err(format!("bad range {value:?}"));
        }
        let mut out = Vec::new();
        let count = ((stop - start) / step).round() as usize;
        for i in 0..=count {
            let v = start + step * i as f64;
            if v <= stop + step * 1e-9 {
                out.push(v);
            }
        }
        Ok(out)
    } else {
        value
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?}")))
            .collect()
    }
}

/// One solver run inside a sweep.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub grid_param: GridParam,
    pub grid_value: f64,
    pub run: u32,
    pub seed: u64,
    pub savings: f64,
    pub feasible: bool,
    pub fe_used: u64,
    pub placement: Placement,
}

/// Aggregate of one (algorithm, grid point) cell. Statistics cover feasible
/// runs only; a cell with no feasible run reports absent (None) statistics.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub grid_param: GridParam,
    pub grid_value: f64,
    pub runs: u32,
    pub feasible_runs: u32,
    pub mean_savings: Option<f64>,
    pub std_savings: Option<f64>,
    pub mean_total_caps: Option<f64>,
    /// Per catalog type: (mean, std) of installed count across feasible runs.
    pub census: Vec<(f64, f64)>,
    /// Welch p-value of this cell's savings against the EO cell at the same
    /// grid point; absent on EO rows and when either side is degenerate.
    pub p_vs_eo: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
    pub max_type: u8,
}

/// Per-type mean and sample standard deviation of installed capacitor counts.
pub fn census(placements: &[Placement], catalog: &CapacitorCatalog) -> Result<Vec<(f64, f64)>> {
    if placements.is_empty() {
        return Err(Error::InvalidConfig("census of an empty placement list".into()));
    }
    let mut out = Vec::new();
    for t in 1..=catalog.max_type() {
        let counts: Vec<f64> = placements
            .iter()
            .map(|p| p.installed().filter(|&(_, ty)| ty == t).count() as f64)
            .collect();
        out.push((mean(&counts), sample_std(&counts)));
    }
    Ok(out)
}

fn load_catalog(spec: &ExperimentSpec) -> Result<CapacitorCatalog> {
    match &spec.catalog_path {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            CapacitorCatalog::from_csv(std::io::BufReader::new(file))
        }
        None => Ok(CapacitorCatalog::table_i()),
    }
}

fn run_cell_once(
    net: &Network,
    catalog: &CapacitorCatalog,
    spec: &ExperimentSpec,
    algorithm: Algorithm,
    econ: &EconomicParams,
    seed: u64,
) -> Result<(f64, bool, u64, Placement)> {
    match algorithm {
        Algorithm::Eo => {
            let config = EoConfig {
                tau: 2.0,
                mu: 0.5,
                fe_budget: spec.fe_budget,
                seed,
                allow_root_placement: spec.allow_root,
                policy: spec.resonance.clone(),
                econ: econ.clone(),
            };
            let result = run_eo(net, catalog, &config)?;
            let feasible = placement_feasible(
                net,
                &result.best_placement,
                catalog,
                &spec.resonance,
                spec.allow_root,
            )?
            .is_feasible();
            Ok((result.best_savings, feasible, result.fe_used, result.best_placement))
        }
        Algorithm::MaStrtg1 | Algorithm::MaStrtg2 | Algorithm::MaStrtg3 => {
            let strategy = match algorithm {
                Algorithm::MaStrtg1 => RepairStrategy::Strtg1,
                Algorithm::MaStrtg2 => RepairStrategy::Strtg2,
                _ => RepairStrategy::Strtg3,
            };
            let config = MaConfig {
                fe_budget: spec.fe_budget,
                seed,
                allow_root_placement: spec.allow_root,
                econ: econ.clone(),
                ..MaConfig::new(econ.clone(), seed)
            };
            let result = run_ma(net, catalog, &config)?;
            let outcome = repair(
                net,
                &result.best_placement,
                strategy,
                catalog,
                &spec.resonance,
                spec.allow_root,
            )?;
            let savings = annual_savings(net, &outcome.placement, catalog, econ)?;
            Ok((savings, outcome.feasible, result.fe_used, outcome.placement))
        }
    }
}

/// Execute the whole sweep. When `out_dir` is given, `sweep.csv` (one row per
/// run) and `summary.csv` (one row per cell) are written there.
pub fn run_sweep(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<SweepReport> {
    spec.validate()?;
    let net = load_network_file(&spec.network_path)?;
    let base_catalog = load_catalog(spec)?;

    let mut grid: Vec<(GridParam, f64)> = Vec::new();
    for &price in &spec.energy_prices {
        grid.push((GridParam::EnergyPrice, price));
    }
    for &scale in &spec.price_scales {
        grid.push((GridParam::PriceScale, scale));
    }

    let mut cells: Vec<(GridParam, f64, Algorithm)> = Vec::new();
    for &(param, value) in &grid {
        for &algorithm in &spec.algorithms {
            cells.push((param, value, algorithm));
        }
    }

    let records: Vec<Vec<RunRecord>> = cells
        .par_iter()
        .map(|&(param, value, algorithm)| {
            let (price, scale) = match param {
                GridParam::EnergyPrice => (value, 1.0),
                GridParam::PriceScale => (spec.scale_sweep_price, value),
            };
            let catalog = base_catalog.clone().with_price_scale(scale);
            let econ = EconomicParams {
                interest_rate: spec.interest_rate,
                horizon_years: spec.horizon_years,
                energy_price: price,
            };
            let mut out = Vec::with_capacity(spec.runs as usize);
            for run in 0..spec.runs {
                let seed = spec.base_seed + run as u64;
                let (savings, feasible, fe_used, placement) =
                    run_cell_once(&net, &catalog, spec, algorithm, &econ, seed)?;
                out.push(RunRecord {
                    algorithm,
                    grid_param: param,
                    grid_value: value,
                    run,
                    seed,
                    savings,
                    feasible,
                    fe_used,
                    placement,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<RunRecord> = records.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        a.grid_param
            .cmp(&b.grid_param)
            .then(a.grid_value.partial_cmp(&b.grid_value).unwrap())
            .then(a.algorithm.order().cmp(&b.algorithm.order()))
            .then(a.run.cmp(&b.run))
    });

    // Cell summaries, with EO at the same grid point as the t-test partner.
    let mut summaries: Vec<CellSummary> = Vec::new();
    for &(param, value, algorithm) in &cells {
        let in_cell: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.grid_param == param && r.grid_value == value && r.algorithm == algorithm)
            .collect();
        let feasible: Vec<&RunRecord> = in_cell.iter().filter(|r| r.feasible).copied().collect();
        let savings: Vec<f64> = feasible.iter().map(|r| r.savings).collect();
        let placements: Vec<Placement> = feasible.iter().map(|r| r.placement.clone()).collect();
        let eo_savings: Vec<f64> = records
            .iter()
            .filter(|r| {
                r.grid_param == param
                    && r.grid_value == value
                    && r.algorithm == Algorithm::Eo
                    && r.feasible
            })
            .map(|r| r.savings)
            .collect();
        let p_vs_eo = if algorithm != Algorithm::Eo && savings.len() >= 2 && eo_savings.len() >= 2 {
            Some(welch_t_test(&savings, &eo_savings))
        } else {
            None
        };
        let (mean_savings, std_savings, mean_total_caps, cell_census) = if savings.is_empty() {
            (None, None, None, Vec::new())
        } else {
            let totals: Vec<f64> = placements.iter().map(|p| p.installed_count() as f64).collect();
            (
                Some(mean(&savings)),
                Some(sample_std(&savings)),
                Some(mean(&totals)),
                census(&placements, &base_catalog)?,
            )
        };
        summaries.push(CellSummary {
            algorithm,
            grid_param: param,
            grid_value: value,
            runs: spec.runs,
            feasible_runs: feasible.len() as u32,
            mean_savings,
            std_savings,
            mean_total_caps,
            census: cell_census,
            p_vs_eo,
        });
    }
    summaries.sort_by(|a, b| {
        a.grid_param
            .cmp(&b.grid_param)
            .then(a.grid_value.partial_cmp(&b.grid_value).unwrap())
            .then(a.algorithm.order().cmp(&b.algorithm.order()))
    });

    let report = SweepReport {
        records,
        cells: summaries,
        max_type: base_catalog.max_type(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), render_sweep_csv(&report))?;
        std::fs::write(dir.join("summary.csv"), render_summary_csv(&report))?;
    }
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("algorithm,grid_param,grid_value,run,seed,savings,feasible,fe_used\n");
    for r in &report.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.algorithm.label(),
            r.grid_param.label(),
            r.grid_value,
            r.run,
            r.seed,
            r.savings,
            u8::from(r.feasible),
            r.fe_used
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn render_summary_csv(report: &SweepReport) -> String {
    let mut out = String::from("algorithm,grid_param,grid_value,runs,feasible_runs,mean_savings,std_savings,mean_total_caps");
    for t in 1..=report.max_type {
        write!(out, ",t{t}_mean,t{t}_std").expect("writing to a String cannot fail");
    }
    out.push_str(",p_vs_eo\n");
    for c in &report.cells {
        write!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.algorithm.label(),
            c.grid_param.label(),
            c.grid_value,
            c.runs,
            c.feasible_runs,
            fmt_opt(c.mean_savings),
            fmt_opt(c.std_savings),
            fmt_opt(c.mean_total_caps),
        )
        .expect("writing to a String cannot fail");
        for t in 0..report.max_type as usize {
            let (m, s) = c.census.get(t).copied().map_or((None, None), |(m, s)| (Some(m), Some(s)));
            write!(out, ",{},{}", fmt_opt(m), fmt_opt(s)).expect("writing to a String cannot fail");
        }
        writeln!(out, ",{}", fmt_opt(c.p_vs_eo)).expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_accepts_lists_and_ranges() {
        assert_eq!(parse_grid("50,60, 70").unwrap(), vec![50.0, 60.0, 70.0]);
        assert_eq!(
            parse_grid("50:80:10").unwrap(),
            vec![50.0, 60.0, 70.0, 80.0]
        );
        assert_eq!(parse_grid("0.8:1.2:0.1").unwrap().len(), 5);
        assert!(parse_grid("50:40:10").is_err());
    }

    #[test]
    fn spec_file_round_trip() {
        let text = "\n# comment\nnetwork = data/bw33.csv\nalgorithms = eo, ma+strtg2\nenergy_prices = 100\nprice_scales = 1.0\nruns = 3\nfe_budget = 500\nbase_seed = 7\nresonance_mode = band\nband_hz = 12\n";
        let spec = ExperimentSpec::from_str_spec(text).unwrap();
        assert_eq!(spec.algorithms, vec![Algorithm::Eo, Algorithm::MaStrtg2]);
        assert_eq!(spec.runs, 3);
        assert_eq!(spec.fe_budget, 500);
        assert_eq!(spec.base_seed, 7);
        assert_eq!(spec.resonance.mode, ResonanceMode::BandCheck);
        assert_eq!(spec.resonance.band_hz, 12.0);
        assert!(ExperimentSpec::from_str_spec("runs = 3\n").is_err());
        assert!(ExperimentSpec::from_str_spec("network = x\nbogus = 1\n").is_err());
    }

    #[test]
    fn census_means_and_sample_stds() {
        let net = crate::network::load_network(
            "# v_nom_kv=12.66\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open\n0,1,0.5,0.3,100,60,0\n1,2,0.4,0.2,50,30,0\n2,3,0.4,0.2,50,30,0\n3,4,0.4,0.2,50,30,0\n"
                .as_bytes(),
        )
        .unwrap();
        let catalog = CapacitorCatalog::table_i();
        let all_zero = Placement::empty(&net);
        let rows = census(&[all_zero.clone()], &catalog).unwrap();
        assert!(rows.iter().all(|&(m, s)| m == 0.0 && s == 0.0));

        // One placement with a single type 3, one with three of them:
        // mean 2, sample std sqrt(2).
        let mut one = Placement::empty(&net);
        one.set(1, 3);
        let mut three = Placement::empty(&net);
        three.set(1, 3);
        three.set(2, 3);
        three.set(3, 3);
        let rows = census(&[one, three], &catalog).unwrap();
        assert_eq!(rows[2].0, 2.0);
        assert!((rows[2].1 - 2f64.sqrt()).abs() < 1e-12);
        assert!(census(&[], &catalog).is_err());
    }
}
