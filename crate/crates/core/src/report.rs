//! Experiment drivers: pev-vs-λ curve tables and ε-distinguishable ranking
//! agreement, with their CSV and JSON encodings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expvar::{report, Definition};
use crate::simulate::{generate_matrix, sparsify_loadings, SchemeName, SimScheme, SparsityGrid, GENERATOR};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_RANKING_TRIALS: usize = 20;
pub const DEFAULT_GRID_POINTS: usize = 101;
pub const DEFAULT_MAX_PAIRS: u64 = 10_000_000;
pub const DEFAULT_EPSILONS: [f64; 3] = [0.0, 1e-3, 1e-2];

/// Significant digits of every number written to CSV or JSON.
pub const OUTPUT_DIGITS: usize = 12;

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Shortest decimal representation of `x` rounded to [`OUTPUT_DIGITS`].
pub fn format_sig(x: f64) -> String {
    let r = round_sig(x, OUTPUT_DIGITS);
    if r == 0.0 {
        "0".to_string()
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn default_n() -> usize {
    30
}
fn default_p() -> usize {
    20
}
fn default_m() -> usize {
    4
}
fn default_decay() -> f64 {
    0.5
}

/// JSON experiment configuration. Only `name` is required; named schemes
/// fill in their default spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: SchemeName,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub sigma_head: Option<Vec<f64>>,
    #[serde(default = "default_decay")]
    pub tail_decay: f64,
    #[serde(default)]
    pub seed: u64,
    /// Explicit sparsity grid; defaults to 101 equally spaced points.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    /// Number of leading grid points used by the ranking experiment
    /// (default: first half of the grid).
    #[serde(default)]
    pub ranking_lambda_count: Option<usize>,
    #[serde(default)]
    pub max_pairs: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn named(name: SchemeName, seed: u64) -> Self {
        Self {
            name,
            n: default_n(),
            p: default_p(),
            m: default_m(),
            sigma_head: None,
            tail_decay: default_decay(),
            seed,
            lambdas: None,
            trials: None,
            epsilons: None,
            ranking_lambda_count: None,
            max_pairs: None,
        }
    }

    pub fn scheme(&self) -> Result<SimScheme> {
        let sigma_head = match (&self.sigma_head, self.name.default_sigma_head()) {
            (Some(s), _) => s.clone(),
            (None, Some(s)) => s,
            (None, None) => return Err(Error::invalid("custom scheme requires sigma_head")),
        };
        let scheme = SimScheme {
            name: self.name,
            n: self.n,
            p: self.p,
            m: self.m,
            sigma_head,
            tail_decay: self.tail_decay,
            seed: self.seed,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn grid(&self) -> Result<SparsityGrid> {
        match &self.lambdas {
            Some(l) => SparsityGrid::new(l.clone()),
            None => SparsityGrid::uniform(DEFAULT_GRID_POINTS),
        }
    }

    pub fn ranking_grid(&self) -> Result<SparsityGrid> {
        let grid = self.grid()?;
        let count = self.ranking_lambda_count.unwrap_or(grid.len().div_ceil(2));
        if count == 0 || count > grid.len() {
            return Err(Error::invalid(format!(
                "ranking_lambda_count = {count} must lie in 1..={}",
                grid.len()
            )));
        }
        grid.head(count)
    }

    pub fn curve_trials(&self) -> usize {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn ranking_trials(&self) -> usize {
        self.trials.unwrap_or(DEFAULT_RANKING_TRIALS)
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.epsilons.clone().unwrap_or_else(|| DEFAULT_EPSILONS.to_vec())
    }

    pub fn max_pairs(&self) -> u64 {
        self.max_pairs.unwrap_or(DEFAULT_MAX_PAIRS)
    }
}

/// Provenance written next to every experiment output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub seed: u64,
    pub scheme: SimScheme,
    pub lambdas: Vec<f64>,
    pub trials: usize,
    pub generator: &'static str,
    pub code_version: &'static str,
    /// Number of failed (trial, λ) cells per λ, in grid order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing: Option<Vec<usize>>,
}

impl Metadata {
    pub fn new(scheme: &SimScheme, grid: &SparsityGrid, trials: usize) -> Self {
        Self {
            seed: scheme.seed,
            scheme: scheme.clone(),
            lambdas: grid.lambdas().to_vec(),
            trials,
            generator: GENERATOR,
            code_version: CODE_VERSION,
            missing: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("metadata serializes");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub scheme: SchemeName,
    pub lambda: f64,
    pub definition: Definition,
    pub mean_pev: f64,
    pub sd_pev: f64,
    /// Trials contributing to this row.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
    /// Failed trials per λ, in grid order. A failed trial is dropped from all
    /// six definitions at that λ.
    pub missing: Vec<usize>,
}

impl CurveTable {
    pub fn row(&self, lambda_index: usize, def: Definition) -> &CurveRow {
        &self.rows[lambda_index * Definition::ALL.len() + def.index()]
    }

    pub fn lambda_count(&self) -> usize {
        self.rows.len() / Definition::ALL.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,lambda,definition,mean_pev,sd_pev,trials\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.scheme.as_str(),
                format_sig(r.lambda),
                r.definition.short_name(),
                format_sig(r.mean_pev),
                format_sig(r.sd_pev),
                r.trials
            ));
        }
        out
    }
}

/// pev vectors of every (trial, λ) cell, `cells[trial][lambda]`.
fn pev_cells(scheme: &SimScheme, grid: &SparsityGrid, trials: usize) -> Result<Vec<Vec<Option<[f64; 6]>>>> {
    scheme.validate()?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let a = generate_matrix(scheme, t)?;
            Ok(grid
                .lambdas()
                .iter()
                .map(|&lambda| {
                    sparsify_loadings(&a, scheme.m, lambda)
                        .and_then(|z| report(&a, &z))
                        .ok()
                        .map(|r| r.pevs())
                })
                .collect())
        })
        .collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Mean and sample standard deviation of each definition's pev per λ.
pub fn run_pev_curves(scheme: &SimScheme, grid: &SparsityGrid, trials: usize) -> Result<CurveTable> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let cells = pev_cells(scheme, grid, trials)?;
    let mut rows = Vec::with_capacity(grid.len() * 6);
    let mut missing = Vec::with_capacity(grid.len());
    for (k, &lambda) in grid.lambdas().iter().enumerate() {
        let ok: Vec<[f64; 6]> = cells.iter().filter_map(|t| t[k]).collect();
        missing.push(trials - ok.len());
        for def in Definition::ALL {
            let vals: Vec<f64> = ok.iter().map(|p| p[def.index()]).collect();
            let (mean_pev, sd_pev) = mean_sd(&vals);
            rows.push(CurveRow {
                scheme: scheme.name,
                lambda,
                definition: def,
                mean_pev,
                sd_pev,
                trials: ok.len(),
            });
        }
    }
    Ok(CurveTable { rows, missing })
}

/// Pairwise ranking agreement among the six definitions for one ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingReport {
    pub epsilon: f64,
    pub definitions: [Definition; 6],
    /// Row-major 6x6 percentages; absent when no pair is ε-distinguishable.
    pub agreement: Option<Vec<f64>>,
    pub n_pairs_considered: u64,
}

impl RankingReport {
    pub fn get(&self, i: Definition, j: Definition) -> Option<f64> {
        self.agreement.as_ref().map(|a| a[i.index() * 6 + j.index()])
    }

    fn rounded(&self) -> Self {
        Self {
            epsilon: round_sig(self.epsilon, OUTPUT_DIGITS),
            definitions: self.definitions,
            agreement: self
                .agreement
                .as_ref()
                .map(|a| a.iter().map(|v| round_sig(*v, OUTPUT_DIGITS)).collect()),
            n_pairs_considered: self.n_pairs_considered,
        }
    }
}

#[derive(Serialize)]
struct RankingDocument<'a> {
    metadata: &'a Metadata,
    reports: Vec<RankingReport>,
}

pub fn ranking_to_json(reports: &[RankingReport], metadata: &Metadata) -> String {
    let doc = RankingDocument {
        metadata,
        reports: reports.iter().map(RankingReport::rounded).collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("ranking serializes");
    text.push('\n');
    text
}

/// Agreement percentages from pooled pev vectors, one report per ε.
pub fn ranking_from_pevs(pevs: &[[f64; 6]], epsilons: &[f64], max_pairs: u64) -> Result<Vec<RankingReport>> {
    let t = pevs.len() as u64;
    let pairs = t * t.saturating_sub(1) / 2;
    if pairs > max_pairs {
        return Err(Error::invalid(format!(
            "{pairs} pairs exceed the cap of {max_pairs}; reduce trials or ranking_lambda_count, or raise max_pairs"
        )));
    }
    if let Some(e) = epsilons.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::invalid(format!("epsilon = {e} must be a non-negative number")));
    }
    let mut counts = vec![[0u64; 36]; epsilons.len()];
    let mut considered = vec![0u64; epsilons.len()];
    let mut deltas = [0.0f64; 6];
    for (a, pa) in pevs.iter().enumerate() {
        for pb in &pevs[a + 1..] {
            let mut min_gap = f64::INFINITY;
            for i in 0..6 {
                deltas[i] = pa[i] - pb[i];
                min_gap = min_gap.min(deltas[i].abs());
            }
            for (k, &eps) in epsilons.iter().enumerate() {
                if min_gap < eps {
                    continue;
                }
                considered[k] += 1;
                for i in 0..6 {
                    for j in 0..6 {
                        if deltas[i].signum() == deltas[j].signum() && (deltas[i] == 0.0) == (deltas[j] == 0.0) {
                            counts[k][i * 6 + j] += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(epsilons
        .iter()
        .enumerate()
        .map(|(k, &epsilon)| RankingReport {
            epsilon,
            definitions: Definition::ALL,
            agreement: (considered[k] > 0)
                .then(|| counts[k].iter().map(|&c| 100.0 * c as f64 / considered[k] as f64).collect()),
            n_pairs_considered: considered[k],
        })
        .collect())
}

/// Reports of one ranking run, with the number of (trial, λ) cells that
/// failed and were left out of the pool, per λ.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingRun {
    pub reports: Vec<RankingReport>,
    pub missing: Vec<usize>,
}

/// Ranking agreement over all `trials x |grid|` component sets of a scheme.
pub fn run_ranking(
    scheme: &SimScheme,
    grid: &SparsityGrid,
    trials: usize,
    epsilons: &[f64],
    max_pairs: u64,
) -> Result<RankingRun> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let total = (trials * grid.len()) as u64;
    if total * total.saturating_sub(1) / 2 > max_pairs {
        return Err(Error::invalid(format!(
            "{} pairs exceed the cap of {max_pairs}; reduce trials or ranking_lambda_count, or raise max_pairs",
            total * (total - 1) / 2
        )));
    }
    let cells = pev_cells(scheme, grid, trials)?;
    let missing = (0..grid.len())
        .map(|k| cells.iter().filter(|t| t[k].is_none()).count())
        .collect();
    let pooled: Vec<[f64; 6]> = cells.into_iter().flatten().flatten().collect();
    Ok(RankingRun {
        reports: ranking_from_pevs(&pooled, epsilons, max_pairs)?,
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_rounding() {
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(13.0 / 14.0), "0.928571428571");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(-0.0), "0");
        assert_eq!(format_sig(2.5), "2.5");
        assert_eq!(format_sig(123456789012345.0), "123456789012000");
    }

    #[test]
    fn config_defaults_and_overrides() {
        let c = ExperimentConfig::from_json(r#"{"name": "close_eigenvalues", "seed": 5}"#).unwrap();
        let s = c.scheme().unwrap();
        assert_eq!(s.sigma_head, vec![4.0, 3.8, 3.6, 3.4]);
        assert_eq!(c.grid().unwrap().len(), 101);
        assert_eq!(c.ranking_grid().unwrap().len(), 51);
        assert_eq!(c.curve_trials(), 100);
        assert_eq!(c.ranking_trials(), 20);

        let c = ExperimentConfig::from_json(r#"{"name": "custom", "m": 2, "sigma_head": [2, 1], "lambdas": [0, 0.5, 1]}"#)
            .unwrap();
        assert_eq!(c.scheme().unwrap().m, 2);
        assert_eq!(c.grid().unwrap().len(), 3);

        assert!(ExperimentConfig::from_json(r#"{"name": "custom"}"#).unwrap().scheme().is_err());
        assert!(ExperimentConfig::from_json(r#"{"name": "close_eigenvalues", "bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"name": "close_eigenvalues", "lambdas": [0.2, 1]}"#)
            .unwrap()
            .grid()
            .is_err());
    }

    #[test]
    fn curves_coincide_at_zero_lambda() {
        let scheme = SimScheme::close(3);
        let grid = SparsityGrid::new(vec![0.0, 0.5]).unwrap();
        let table = run_pev_curves(&scheme, &grid, 4).unwrap();
        assert_eq!(table.rows.len(), 12);
        assert_eq!(table.missing, vec![0, 0]);
        let base = table.row(0, Definition::Subspace).mean_pev;
        for def in Definition::ALL {
            assert!((table.row(0, def).mean_pev - base).abs() < 1e-10);
            assert!(table.row(1, Definition::Subspace).mean_pev >= table.row(1, def).mean_pev - 1e-12);
        }
        let csv = table.to_csv();
        assert!(csv.starts_with("scheme,lambda,definition,mean_pev,sd_pev,trials\nclose_eigenvalues,0,subspVar,"));
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn ranking_on_hand_made_pevs() {
        let pevs = [
            [0.9, 0.8, 0.7, 0.6, 0.5, 0.4],
            [0.8, 0.7, 0.6, 0.5, 0.6, 0.3],
            [0.7, 0.6, 0.5, 0.4, 0.3, 0.2],
        ];
        let reps = ranking_from_pevs(&pevs, &[0.0, 0.05, 0.5], 100).unwrap();
        assert_eq!(reps[0].n_pairs_considered, 3);
        assert_eq!(reps[1].n_pairs_considered, 3);
        assert_eq!(reps[2].n_pairs_considered, 0);
        assert!(reps[2].agreement.is_none());
        let r = &reps[0];
        for i in Definition::ALL {
            assert_eq!(r.get(i, i), Some(100.0));
            for j in Definition::ALL {
                assert_eq!(r.get(i, j), r.get(j, i));
            }
        }
        // Pair (0, 1) is ranked oppositely by qrNorm.
        let q = r.get(Definition::Subspace, Definition::QrNorm).unwrap();
        assert!((q - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ties_agree_only_with_ties() {
        let pevs = [[0.5, 0.5, 0.4, 0.4, 0.4, 0.4], [0.5, 0.4, 0.4, 0.3, 0.3, 0.3]];
        let r = &ranking_from_pevs(&pevs, &[0.0], 10).unwrap()[0];
        assert_eq!(r.get(Definition::Subspace, Definition::UpProj), Some(100.0));
        assert_eq!(r.get(Definition::Subspace, Definition::OptProj), Some(0.0));
    }

    #[test]
    fn pair_cap_is_enforced() {
        let pevs = vec![[0.0; 6]; 5];
        let err = ranking_from_pevs(&pevs, &[0.0], 9).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(m) if m.contains("reduce trials")));
        assert!(run_ranking(&SimScheme::close(1), &SparsityGrid::uniform(101).unwrap(), 100, &[0.0], DEFAULT_MAX_PAIRS).is_err());
    }

    #[test]
    fn ranking_json_shape() {
        let pevs = [[0.9, 0.8, 0.7, 0.6, 0.5, 0.4], [0.8, 0.7, 0.6, 0.5, 0.4, 0.3]];
        let reps = ranking_from_pevs(&pevs, &[0.0, 1.0], 10).unwrap();
        let scheme = SimScheme::close(1);
        let meta = Metadata::new(&scheme, &SparsityGrid::uniform(3).unwrap(), 2);
        let v: serde_json::Value = serde_json::from_str(&ranking_to_json(&reps, &meta)).unwrap();
        assert_eq!(v["metadata"]["seed"], 1);
        let r0 = &v["reports"][0];
        assert_eq!(r0["definitions"][0], "subspVar");
        assert_eq!(r0["definitions"][5], "UPnormVar");
        assert_eq!(r0["agreement"].as_array().unwrap().len(), 36);
        assert!(v["reports"][1]["agreement"].is_null());
    }
}
