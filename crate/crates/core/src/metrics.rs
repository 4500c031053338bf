//! Episode-level metrics and cross-run comparison.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::math::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Mean per-step gain over the episode.
    pub avg_gain: f64,
    /// Threshold at the end of the episode.
    pub beta: f64,
    /// Relevant-selected over relevant, in percent; absent without a selector.
    pub tpr: Option<f64>,
    /// Selected over relevant count, in percent; may exceed 100.
    pub tpr_literal: Option<f64>,
    /// Mean number of selected action dimensions per step.
    pub selected_count: Option<f64>,
}

pub fn episodic_gain(trace: &[f64]) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Empty("gain trace"));
    }
    Ok(mean(trace))
}

fn count(bits: &[bool]) -> usize {
    bits.iter().filter(|&&b| b).count()
}

/// Percentage of the relevant dimensions that the mask keeps.
pub fn tpr(mask: &[bool], relevant: &[bool]) -> Result<f64> {
    check_len("mask", relevant.len(), mask.len())?;
    let total = count(relevant);
    if total == 0 {
        return Err(Error::InvalidArgument("no relevant dimensions".into()));
    }
    let hit = mask.iter().zip(relevant).filter(|(&m, &r)| m && r).count();
    Ok(100.0 * hit as f64 / total as f64)
}

/// Selected count over relevant count, in percent.
pub fn tpr_literal(mask: &[bool], relevant: &[bool]) -> Result<f64> {
    check_len("mask", relevant.len(), mask.len())?;
    let total = count(relevant);
    if total == 0 {
        return Err(Error::InvalidArgument("no relevant dimensions".into()));
    }
    Ok(100.0 * count(mask) as f64 / total as f64)
}

/// Episode records of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Grouping key, usually the agent kind.
    pub label: String,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
}

impl RunRecord {
    pub fn gains(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.avg_gain).collect()
    }
}

/// Sum of the episodic gains.
pub fn area_under_curve(gains: &[f64]) -> f64 {
    gains.iter().sum()
}

/// First episode index whose gain reaches `threshold`.
pub fn episodes_to_threshold(gains: &[f64], threshold: f64) -> Option<usize> {
    gains.iter().position(|&g| g >= threshold)
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile input"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("quantile input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    Ok(v[lo] + frac * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub label: String,
    pub seeds: Vec<u64>,
    pub median_curve: Vec<f64>,
    pub iqr_curve: Vec<f64>,
    /// Per run, in input order.
    pub auc: Vec<f64>,
    pub median_auc: f64,
    /// Per run; `None` if the run never reached the threshold.
    pub episodes_to_threshold: Vec<Option<usize>>,
    pub median_final_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub episodes: usize,
    pub threshold: f64,
    /// Agents in order of first appearance.
    pub agents: Vec<AgentSummary>,
}

impl ComparisonSummary {
    pub fn agent(&self, label: &str) -> Option<&AgentSummary> {
        self.agents.iter().find(|a| a.label == label)
    }
}

/// Groups runs by label and summarizes each group per episode index.
pub fn compare_runs(runs: &[RunRecord], threshold: f64) -> Result<ComparisonSummary> {
    let first = runs.first().ok_or(Error::Empty("run list"))?;
    let episodes = first.episodes.len();
    if episodes == 0 {
        return Err(Error::Empty("episode list"));
    }
    for r in runs {
        check_len("episode count", episodes, r.episodes.len())?;
    }
    let mut labels: Vec<&str> = Vec::new();
    for r in runs {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let agents = labels
        .into_iter()
        .map(|label| {
            let group: Vec<&RunRecord> = runs.iter().filter(|r| r.label == label).collect();
            let curves: Vec<Vec<f64>> = group.iter().map(|r| r.gains()).collect();
            let mut median_curve = Vec::with_capacity(episodes);
            let mut iqr_curve = Vec::with_capacity(episodes);
            for e in 0..episodes {
                let column: Vec<f64> = curves.iter().map(|c| c[e]).collect();
                median_curve.push(median(&column)?);
                iqr_curve.push(quantile(&column, 0.75)? - quantile(&column, 0.25)?);
            }
            let auc: Vec<f64> = curves.iter().map(|c| area_under_curve(c)).collect();
            let finals: Vec<f64> = curves.iter().map(|c| c[episodes - 1]).collect();
            Ok(AgentSummary {
                label: label.into(),
                seeds: group.iter().map(|r| r.seed).collect(),
                median_auc: median(&auc)?,
                auc,
                episodes_to_threshold: curves
                    .iter()
                    .map(|c| episodes_to_threshold(c, threshold))
                    .collect(),
                median_final_gain: median(&finals)?,
                median_curve,
                iqr_curve,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonSummary {
        episodes,
        threshold,
        agents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn run(label: &str, gains: &[f64]) -> RunRecord {
        RunRecord {
            label: label.into(),
            seed: 0,
            episodes: gains
                .iter()
                .enumerate()
                .map(|(i, &g)| EpisodeRecord {
                    episode: i,
                    avg_gain: g,
                    beta: g,
                    tpr: None,
                    tpr_literal: None,
                    selected_count: None,
                })
                .collect(),
        }
    }

    #[test]
    fn episodic_gain_examples() {
        assert_eq!(episodic_gain(&[2.5; 4]).unwrap(), 2.5);
        assert_eq!(episodic_gain(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(episodic_gain(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert!(episodic_gain(&[]).is_err());
    }

    #[test]
    fn tpr_examples() {
        let rel = [true, true, true, true, false, false];
        assert_eq!(tpr(&rel, &rel).unwrap(), 100.0);
        assert_eq!(tpr(&[true, true, false, false, false, false], &rel).unwrap(), 50.0);
        assert_eq!(tpr(&[false, false, false, false, true, true], &rel).unwrap(), 0.0);
        assert_eq!(tpr_literal(&[true; 6], &rel).unwrap(), 150.0);
        assert!(tpr(&[true], &[false]).is_err());
        assert!(tpr(&[true], &rel).is_err());
    }

    #[test]
    fn compare_examples() {
        let one = compare_runs(&[run("a", &[1.0, 2.0])], 1.5).unwrap();
        assert_eq!(one.agents[0].median_curve, vec![1.0, 2.0]);
        assert_eq!(one.agents[0].episodes_to_threshold, vec![Some(1)]);

        let same = compare_runs(&[run("a", &[1.0, 2.0]), run("a", &[1.0, 2.0])], 9.0).unwrap();
        assert_eq!(same.agents[0].iqr_curve, vec![0.0, 0.0]);
        assert_eq!(same.agents[0].episodes_to_threshold, vec![None, None]);

        let ab = compare_runs(&[run("a", &[2.0, 3.0]), run("b", &[1.0, 3.0])], 0.0).unwrap();
        assert!(ab.agent("a").unwrap().median_auc >= ab.agent("b").unwrap().median_auc);

        assert!(compare_runs(&[run("a", &[1.0]), run("b", &[1.0, 2.0])], 0.0).is_err());
        assert!(compare_runs(&[], 0.0).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25).unwrap(), 2.0);
    }
}
