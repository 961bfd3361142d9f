//! Pinned Monte Carlo reference values.
//!
//! One scenario per line:
//!
//! ```text
//! <key> kind=<delta|eta> seed=<u64> draws=<count> lambda=<v,...> estimate=<v,...> se=<v,...>
//! ```
//!
//! `eta` estimates are `p x p` tables flattened row by row. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::spectrum::Spectrum;

use super::{mc_delta, mc_eta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Delta,
    Eta,
}

impl FixtureKind {
    fn as_str(self) -> &'static str {
        match self {
            FixtureKind::Delta => "delta",
            FixtureKind::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub key: String,
    pub kind: FixtureKind,
    pub seed: u64,
    pub draws: usize,
    pub lambda: Vec<f64>,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
}

/// Scenarios regenerated by `signshape pin-fixtures`.
const SCENARIOS: &[(&str, FixtureKind, u64, &[f64])] = &[
    ("delta-p2-0.9-0.1", FixtureKind::Delta, 20_170_001, &[0.9, 0.1]),
    ("delta-p3-0.5-0.3-0.2", FixtureKind::Delta, 20_170_002, &[0.5, 0.3, 0.2]),
    (
        "delta-p5-mixed",
        FixtureKind::Delta,
        20_170_003,
        &[0.4, 0.25, 0.15, 0.12, 0.08],
    ),
    ("eta-p2-0.9-0.1", FixtureKind::Eta, 20_170_004, &[0.9, 0.1]),
    ("eta-p3-0.5-0.3-0.2", FixtureKind::Eta, 20_170_005, &[0.5, 0.3, 0.2]),
    (
        "eta-p3-uniform",
        FixtureKind::Eta,
        20_170_006,
        &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    ),
];

/// Runs every scenario with `draws` Monte Carlo draws.
pub fn pin_fixtures(draws: usize) -> Result<Vec<Fixture>> {
    SCENARIOS
        .iter()
        .map(|&(key, kind, seed, lambda)| {
            let spectrum = Spectrum::new(lambda.to_vec())?;
            let (estimate, se) = match kind {
                FixtureKind::Delta => {
                    let r = mc_delta(&spectrum, draws, seed)?;
                    (r.mean, r.se)
                }
                FixtureKind::Eta => {
                    let (m, s) = mc_eta(&spectrum, draws, seed)?;
                    (m.transpose().as_slice().to_vec(), s.transpose().as_slice().to_vec())
                }
            };
            Ok(Fixture {
                key: key.to_string(),
                kind,
                seed,
                draws,
                lambda: spectrum.into_vec(),
                estimate,
                se,
            })
        })
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

pub fn render_fixtures(fixtures: &[Fixture]) -> String {
    let mut out =
        String::from("# Monte Carlo reference values (Y standard normal); regenerate with `signshape pin-fixtures`\n");
    for f in fixtures {
        let _ = writeln!(
            out,
            "{} kind={} seed={} draws={} lambda={} estimate={} se={}",
            f.key,
            f.kind.as_str(),
            f.seed,
            f.draws,
            join(&f.lambda),
            join(&f.estimate),
            join(&f.se)
        );
    }
    out
}

fn parse_list(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.parse::<f64>()
                .or_else(|_| invalid(format!("line {line}: bad number {v:?}")))
        })
        .collect()
}

pub fn parse_fixtures(text: &str) -> Result<Vec<Fixture>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_string();
        let (mut kind, mut seed, mut draws) = (None, None, None);
        let (mut lambda, mut estimate, mut se) = (None, None, None);
        for field in parts {
            let Some((name, value)) = field.split_once('=') else {
                return invalid(format!("line {lineno}: expected name=value, got {field:?}"));
            };
            match name {
                "kind" => {
                    kind = Some(match value {
                        "delta" => FixtureKind::Delta,
                        "eta" => FixtureKind::Eta,
                        other => return invalid(format!("line {lineno}: unknown kind {other:?}")),
                    })
                }
                "seed" => seed = value.parse().ok(),
                "draws" => draws = value.parse().ok(),
                "lambda" => lambda = Some(parse_list(value, lineno)?),
                "estimate" => estimate = Some(parse_list(value, lineno)?),
                "se" => se = Some(parse_list(value, lineno)?),
                other => return invalid(format!("line {lineno}: unknown field {other:?}")),
            }
        }
        match (kind, seed, draws, lambda, estimate, se) {
            (Some(kind), Some(seed), Some(draws), Some(lambda), Some(estimate), Some(se)) => {
                let p = lambda.len();
                let want = if kind == FixtureKind::Eta { p * p } else { p };
                if estimate.len() != want || se.len() != want {
                    return invalid(format!("line {lineno}: expected {want} estimates and standard errors"));
                }
                out.push(Fixture {
                    key,
                    kind,
                    seed,
                    draws,
                    lambda,
                    estimate,
                    se,
                });
            }
            _ => return invalid(format!("line {lineno}: missing or malformed field")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let fx = pin_fixtures(2000).unwrap();
        assert_eq!(fx.len(), SCENARIOS.len());
        let text = render_fixtures(&fx);
        assert_eq!(parse_fixtures(&text).unwrap(), fx);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_fixtures("a kind=delta seed=1 draws=5 lambda=1 estimate=1").is_err());
        assert!(parse_fixtures("a kind=zeta seed=1 draws=5 lambda=1 estimate=1 se=0").is_err());
        assert!(parse_fixtures("a kind=eta seed=1 draws=5 lambda=0.5,0.5 estimate=1,0 se=0,0").is_err());
        assert!(parse_fixtures("# only a comment\n\n").unwrap().is_empty());
    }
}
