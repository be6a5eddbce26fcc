//! Flags shared by all subcommands, and the optional JSON config file.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

pub const THREADS_ENV: &str = "ECF_TOOLKIT_THREADS";

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// Input file; standard input when omitted.
    #[arg(long, short = 'i')]
    pub input: Option<PathBuf>,

    /// Second ECF table, for convex combination.
    #[arg(long)]
    pub input2: Option<PathBuf>,

    /// Output file; standard output when omitted.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,

    /// JSON file of option values; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of replicates or Monte Carlo draws.
    #[arg(long)]
    pub n: Option<usize>,

    /// Model name (independent, identical, sqrt, m3box, br, random) or a
    /// JSON model object.
    #[arg(long)]
    pub model: Option<String>,

    /// Number of sites for models without coordinates.
    #[arg(long)]
    pub m: Option<usize>,

    /// Number of spectral atoms of the random model.
    #[arg(long)]
    pub q: Option<usize>,

    /// CSV of site labels and coordinates.
    #[arg(long)]
    pub coords: Option<PathBuf>,

    /// Variogram value of the bivariate Brown-Resnick model.
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Variogram scale.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Variogram exponent.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Bernstein function, e.g. log1p, pow:0.5, negpow:-1.
    #[arg(long)]
    pub bernstein: Option<String>,

    /// Weight of the first table in a convex combination.
    #[arg(long)]
    pub alpha_combine: Option<f64>,

    /// Validation tolerance.
    #[arg(long)]
    pub tol: Option<f64>,

    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Largest subset size to estimate.
    #[arg(long)]
    pub max_subset_size: Option<usize>,

    /// Sites to keep, e.g. a,b.
    #[arg(long)]
    pub marginal: Option<String>,

    /// Evaluation point, comma separated.
    #[arg(long)]
    pub x: Option<String>,

    /// Bivariate coefficients eta_rs,eta_st,eta_rt.
    #[arg(long)]
    pub eta: Option<String>,

    /// Resolution of the support-function grid.
    #[arg(long)]
    pub grid: Option<usize>,

    /// Also write the polytope vertices as CSV to this file.
    #[arg(long)]
    pub vertices_csv: Option<PathBuf>,

    /// Sample metadata file; defaults to OUTPUT.meta.json.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

macro_rules! fill {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $(if $dst.$f.is_none() {
            $dst.$f = $src.$f;
        })*
    };
}

impl Options {
    /// Fills unset options from the config file, if any.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let file = parse_config(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        fill!(
            self, file, input, input2, output, seed, n, model, m, q, coords, gamma, lambda, alpha, bernstein,
            alpha_combine, tol, threads, max_subset_size, marginal, x, eta, grid, vertices_csv, meta
        );
        Ok(self)
    }

    /// Thread cap from the flag or config, then the environment.
    pub fn thread_count(&self) -> Result<Option<usize>, CliError> {
        if let Some(t) = self.threads {
            return Ok(Some(t));
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| CliError::Input(format!("{THREADS_ENV}={v:?} is not a thread count"))),
            _ => Ok(None),
        }
    }
}

/// Keys may use `-` or `_`; a JSON model object may be given inline.
fn parse_config(text: &str) -> Result<Options, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let Value::Object(obj) = v else {
        return Err("config must be a JSON object".into());
    };
    let obj: serde_json::Map<String, Value> = obj
        .into_iter()
        .map(|(k, v)| {
            let v = match (k.as_str(), v) {
                ("model" | "bernstein", v @ Value::Object(_)) => Value::String(v.to_string()),
                (_, v) => v,
            };
            (k.replace('_', "-"), v)
        })
        .collect();
    serde_json::from_value(Value::Object(obj)).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_fills_unset_flags_only() {
        let file = parse_config(r#"{"seed": 4, "max_subset_size": 2, "model": {"model": "sqrt"}}"#).unwrap();
        let mut cli = Options {
            seed: Some(9),
            ..Options::default()
        };
        fill!(cli, file, seed, max_subset_size, model);
        assert_eq!(cli.seed, Some(9));
        assert_eq!(cli.max_subset_size, Some(2));
        assert_eq!(cli.model.as_deref(), Some(r#"{"model":"sqrt"}"#));
        assert!(parse_config(r#"{"sed": 1}"#).is_err());
        assert!(parse_config("[1]").is_err());
    }
}
