//! Parameter sweeps over (value, mode, seed) and their CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, Dbm, Db, Mode, ScenarioConfig};
use super::run::{run, RunOutcome};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown sweep parameter `{0}` (expected one of: {names})", names = SweepParam::NAMES.join(", "))]
    UnknownParam(String),
    #[error("value {value} is not valid for {param}: {reason}")]
    InvalidValue {
        param: SweepParam,
        value: f64,
        reason: String,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Config field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    GammaDb,
    /// Total power `P` split as `P_b = P_k = P / (N_Tx + 1)`.
    TotalPowerDbm,
    /// Total power `P` with `P_b` kept, `P_k = (P - P_b) / N_Tx`.
    TotalPowerFixedBsDbm,
    UavPowerDbm,
    BsPowerDbm,
    /// Side of the square area; pinned positions, target and receiver scale with it.
    AreaM,
    NUe,
    NTx,
    BlockLen,
}

impl SweepParam {
    pub const NAMES: [&'static str; 9] = [
        "gamma_db",
        "total_power_dbm",
        "total_power_fixed_bs_dbm",
        "uav_power_dbm",
        "bs_power_dbm",
        "area_m",
        "n_ue",
        "n_tx",
        "block_len",
    ];
    const ALL: [SweepParam; 9] = [
        SweepParam::GammaDb,
        SweepParam::TotalPowerDbm,
        SweepParam::TotalPowerFixedBsDbm,
        SweepParam::UavPowerDbm,
        SweepParam::BsPowerDbm,
        SweepParam::AreaM,
        SweepParam::NUe,
        SweepParam::NTx,
        SweepParam::BlockLen,
    ];

    pub fn name(self) -> &'static str {
        let i = Self::ALL.iter().position(|p| *p == self).expect("listed");
        Self::NAMES[i]
    }

    /// `cfg` with this parameter set to `value`, validated.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, SweepError> {
        let invalid = |reason: &str| SweepError::InvalidValue {
            param: self,
            value,
            reason: reason.to_string(),
        };
        let count = |min: usize| -> Result<usize, SweepError> {
            if value.fract() == 0.0 && value >= min as f64 {
                Ok(value as usize)
            } else {
                Err(invalid(&format!("expected an integer of at least {min}")))
            }
        };
        let mut c = cfg.clone();
        let net = &mut c.network;
        match self {
            SweepParam::GammaDb => net.gamma_db = Db(value),
            SweepParam::TotalPowerDbm => {
                let share = 10.0 * ((net.n_tx + 1) as f64).log10();
                net.uav_power = Dbm(value - share);
                net.bs_power = Dbm(value - share);
            }
            SweepParam::TotalPowerFixedBsDbm => {
                let p = 10f64.powf(value / 10.0);
                let pb = 10f64.powf(net.bs_power.0 / 10.0);
                if p <= pb {
                    return Err(invalid("total power must exceed the BS power"));
                }
                net.uav_power = Dbm(10.0 * ((p - pb) / net.n_tx as f64).log10());
            }
            SweepParam::UavPowerDbm => net.uav_power = Dbm(value),
            SweepParam::BsPowerDbm => net.bs_power = Dbm(value),
            SweepParam::AreaM => {
                if !(value > 0.0) {
                    return Err(invalid("area must be positive"));
                }
                c.area.dx = value;
                c.area.dy = value;
            }
            SweepParam::NUe => net.n_ue = count(0)?,
            SweepParam::NTx => net.n_tx = count(1)?,
            SweepParam::BlockLen => net.block_len = count(2)?,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::NAMES
            .iter()
            .position(|n| *n == s.trim())
            .map(|i| Self::ALL[i])
            .ok_or_else(|| SweepError::UnknownParam(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
}

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub mode: Mode,
    pub seed: u64,
    pub gamma_t_linear: f64,
    pub gamma_t_db: f64,
    /// NaN without UEs or without a design.
    pub min_ue_sinr_db: f64,
    /// NaN for the tethered mode or without a design.
    pub min_backhaul_sinr_db: f64,
    pub power_used_w: f64,
    pub feasible: bool,
    pub outer_rounds: usize,
    pub cccp_iters: usize,
    pub pso_iters: usize,
    pub wall_ms: f64,
}

impl SweepRow {
    pub fn from_outcome(param: &str, value: f64, o: &RunOutcome) -> Self {
        let report = o.design.report.as_ref();
        let g = o.gamma_t();
        Self {
            param: param.to_string(),
            value,
            mode: o.mode,
            seed: o.seed,
            gamma_t_linear: g,
            gamma_t_db: 10.0 * g.log10(),
            min_ue_sinr_db: report.map_or(f64::NAN, |r| r.min_ue_db()),
            min_backhaul_sinr_db: report.map_or(f64::NAN, |r| r.min_backhaul_db()),
            power_used_w: report.map_or(0.0, |r| r.power_used),
            feasible: o.feasible(),
            outer_rounds: o.outer_rounds,
            cccp_iters: o.cccp_iters,
            pso_iters: o.pso_iters,
            wall_ms: o.wall_ms,
        }
    }

    /// The row without its wall-time column, for determinism comparisons.
    pub fn without_time(&self) -> Self {
        Self {
            wall_ms: 0.0,
            ..self.clone()
        }
    }
}

/// Median and mean of one (value, mode) cell over its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub param: String,
    pub value: f64,
    pub mode: Mode,
    pub n: usize,
    pub n_feasible: usize,
    pub median_gamma_t: f64,
    pub mean_gamma_t: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl SweepResult {
    /// Rows sorted by (value, mode, seed).
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then(a.mode.cmp(&b.mode))
                .then(a.seed.cmp(&b.seed))
        });
    }

    /// Per-cell aggregates of `gamma_t_linear` over every row, infeasible
    /// rows included with their reported value.
    pub fn aggregates(&self) -> Vec<CellAggregate> {
        let mut keys: Vec<(f64, Mode, String)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|(v, m, p)| v.to_bits() == r.value.to_bits() && *m == r.mode && *p == r.param) {
                keys.push((r.value, r.mode, r.param.clone()));
            }
        }
        keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keys.into_iter()
            .map(|(value, mode, param)| {
                let cell: Vec<&SweepRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.value.to_bits() == value.to_bits() && r.mode == mode && r.param == param)
                    .collect();
                let g: Vec<f64> = cell.iter().map(|r| r.gamma_t_linear).collect();
                CellAggregate {
                    param,
                    value,
                    mode,
                    n: cell.len(),
                    n_feasible: cell.iter().filter(|r| r.feasible).count(),
                    median_gamma_t: median(&g),
                    mean_gamma_t: g.iter().sum::<f64>() / g.len() as f64,
                }
            })
            .collect()
    }

    /// Aggregate of one cell, if present.
    pub fn cell(&self, value: f64, mode: Mode) -> Option<CellAggregate> {
        self.aggregates()
            .into_iter()
            .find(|a| a.value.to_bits() == value.to_bits() && a.mode == mode)
    }
}

/// Runs every (value, mode, seed) cell. Invalid grid values are rejected
/// before anything runs; infeasible drops become marked rows.
pub fn run_sweep(cfg: &ScenarioConfig, spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    let configs: Vec<(f64, ScenarioConfig)> = spec
        .values
        .iter()
        .map(|&v| spec.param.apply(cfg, v).map(|c| (v, c)))
        .collect::<Result<_, _>>()?;
    let mut cells = Vec::new();
    for (v, c) in &configs {
        for &m in &spec.modes {
            for &s in &spec.seeds {
                cells.push((*v, c, m, s));
            }
        }
    }
    let name = spec.param.name();
    let rows = cells
        .par_iter()
        .map(|&(v, c, m, s)| SweepRow::from_outcome(name, v, &run(c, m, s)))
        .collect();
    let mut result = SweepResult { rows };
    result.sort();
    Ok(result)
}

pub const CSV_COLUMNS: [&str; 14] = [
    "param",
    "value",
    "mode",
    "seed",
    "gamma_t_linear",
    "gamma_t_db",
    "min_ue_sinr_db",
    "min_backhaul_sinr_db",
    "power_used_w",
    "feasible",
    "outer_rounds",
    "cccp_iters",
    "pso_iters",
    "wall_ms",
];

pub const AGGREGATE_COLUMNS: [&str; 7] = [
    "param",
    "value",
    "mode",
    "n",
    "n_feasible",
    "median_gamma_t_linear",
    "mean_gamma_t_linear",
];

/// Shortest round-trip scientific notation.
fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn csv_err(e: csv::Error) -> SweepError {
    SweepError::Csv(e.to_string())
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            sci(r.value),
            r.mode.to_string(),
            r.seed.to_string(),
            sci(r.gamma_t_linear),
            sci(r.gamma_t_db),
            sci(r.min_ue_sinr_db),
            sci(r.min_backhaul_sinr_db),
            sci(r.power_used_w),
            r.feasible.to_string(),
            r.outer_rounds.to_string(),
            r.cccp_iters.to_string(),
            r.pso_iters.to_string(),
            sci(r.wall_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, SweepError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(SweepError::Csv(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| -> Result<f64, SweepError> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| SweepError::Csv(format!("column {}: {e}", CSV_COLUMNS[i])))
        };
        let u = |i: usize| -> Result<u64, SweepError> {
            rec[i]
                .parse::<u64>()
                .map_err(|e| SweepError::Csv(format!("column {}: {e}", CSV_COLUMNS[i])))
        };
        rows.push(SweepRow {
            param: rec[0].to_string(),
            value: f(1)?,
            mode: rec[2].parse().map_err(SweepError::Csv)?,
            seed: u(3)?,
            gamma_t_linear: f(4)?,
            gamma_t_db: f(5)?,
            min_ue_sinr_db: f(6)?,
            min_backhaul_sinr_db: f(7)?,
            power_used_w: f(8)?,
            feasible: rec[9]
                .parse::<bool>()
                .map_err(|e| SweepError::Csv(format!("column feasible: {e}")))?,
            outer_rounds: u(10)? as usize,
            cccp_iters: u(11)? as usize,
            pso_iters: u(12)? as usize,
            wall_ms: f(13)?,
        });
    }
    Ok(rows)
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<(), SweepError> {
    let file = std::fs::File::create(path)?;
    write_csv(&result.rows, std::io::BufWriter::new(file))
}

pub fn write_aggregate_csv<W: Write>(aggs: &[CellAggregate], out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_COLUMNS).map_err(csv_err)?;
    for a in aggs {
        w.write_record([
            a.param.clone(),
            sci(a.value),
            a.mode.to_string(),
            a.n.to_string(),
            a.n_feasible.to_string(),
            sci(a.median_gamma_t),
            sci(a.mean_gamma_t),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn sci_round_trips() {
        for x in [0.0, 1.0, -0.1, 1e-300, 123456.789, f64::MAX, f64::NEG_INFINITY] {
            assert_eq!(sci(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert!(sci(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn param_names_round_trip() {
        for n in SweepParam::NAMES {
            assert_eq!(n.parse::<SweepParam>().unwrap().name(), n);
        }
        assert!("nope".parse::<SweepParam>().is_err());
    }

    #[test]
    fn total_power_split() {
        let cfg = ScenarioConfig::default();
        let c = SweepParam::TotalPowerDbm.apply(&cfg, 40.0).unwrap();
        // 10 W over four equal shares
        assert!((c.uav_power_w() - 2.5).abs() < 1e-12);
        assert!((c.bs_power_w() - 2.5).abs() < 1e-12);
        let c = SweepParam::TotalPowerFixedBsDbm.apply(&cfg, 40.0).unwrap();
        assert!((c.bs_power_w() - 1.0).abs() < 1e-12);
        assert!((c.total_power_w() - 10.0).abs() < 1e-9);
    }
}
