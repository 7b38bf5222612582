//! Reviewer statistics, group ratios and comment prioritization.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::predictions::PredictionRow;
use super::AnalyticsError;
use crate::corpus::Group;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerStats {
    pub reviewer_id: String,
    /// Counts in group order.
    pub counts: [usize; Group::COUNT],
    pub total: usize,
    pub functional_ratio: f64,
}

impl ReviewerStats {
    pub fn count(&self, g: Group) -> usize {
        self.counts[g.index()]
    }
}

/// Per-reviewer group counts over rows with a prediction. Rows whose
/// comment has no known author are skipped. Sorted by Functional count,
/// then total, both descending, then by reviewer id.
pub fn reviewer_report(predictions: &[PredictionRow], authors: &HashMap<String, String>) -> Vec<ReviewerStats> {
    let mut by_reviewer: BTreeMap<&str, [usize; Group::COUNT]> = BTreeMap::new();
    for row in predictions {
        let (Some(g), Some(author)) = (row.predicted_group(), authors.get(&row.comment_id)) else { continue };
        by_reviewer.entry(author.as_str()).or_default()[g.index()] += 1;
    }
    let mut out: Vec<ReviewerStats> = by_reviewer
        .into_iter()
        .map(|(id, counts)| {
            let total = counts.iter().sum::<usize>();
            ReviewerStats {
                reviewer_id: id.to_string(),
                counts,
                total,
                functional_ratio: counts[Group::Functional.index()] as f64 / total as f64,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.count(Group::Functional)
            .cmp(&a.count(Group::Functional))
            .then(b.total.cmp(&a.total))
            .then_with(|| a.reviewer_id.cmp(&b.reviewer_id))
    });
    out
}

pub fn write_reviewer_csv<W: Write>(out: W, stats: &[ReviewerStats]) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["reviewer_id".to_string()];
    header.extend(Group::ALL.iter().map(|g| g.to_string()));
    header.extend(["total".into(), "functional_ratio".into()]);
    w.write_record(&header)?;
    for s in stats {
        let mut rec = vec![s.reviewer_id.clone()];
        rec.extend(s.counts.iter().map(usize::to_string));
        rec.push(s.total.to_string());
        rec.push(format!("{:.4}", s.functional_ratio));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRatio {
    pub group: Group,
    pub count: usize,
    /// Share of classified rows, in percent.
    pub percentage: f64,
}

/// Share of each group among rows with a prediction, in group order.
pub fn group_ratios(predictions: &[PredictionRow]) -> Vec<GroupRatio> {
    let mut counts = [0usize; Group::COUNT];
    for g in predictions.iter().filter_map(PredictionRow::predicted_group) {
        counts[g.index()] += 1;
    }
    let total = counts.iter().sum::<usize>();
    Group::ALL
        .iter()
        .map(|&g| GroupRatio {
            group: g,
            count: counts[g.index()],
            percentage: if total == 0 { 0.0 } else { 100.0 * counts[g.index()] as f64 / total as f64 },
        })
        .collect()
}

pub fn write_ratios_csv<W: Write>(out: W, ratios: &[GroupRatio]) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "count", "percentage"])?;
    for r in ratios {
        w.write_record([r.group.to_string(), r.count.to_string(), format!("{:.2}", r.percentage)])?;
    }
    w.flush()?;
    Ok(())
}

/// Total order of groups, most urgent first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupPriority([Group; Group::COUNT]);

impl Default for GroupPriority {
    fn default() -> Self {
        Self([Group::Functional, Group::Refactoring, Group::Documentation, Group::Discussion, Group::FalsePositive])
    }
}

impl GroupPriority {
    pub fn new(order: [Group; Group::COUNT]) -> Result<Self, AnalyticsError> {
        let mut seen = [false; Group::COUNT];
        for g in order {
            if std::mem::replace(&mut seen[g.index()], true) {
                return Err(AnalyticsError::Format(format!("{g} listed twice in the priority order")));
            }
        }
        Ok(Self(order))
    }

    pub fn rank(&self, g: Group) -> usize {
        self.0.iter().position(|&x| x == g).expect("every group is ranked")
    }

    pub fn order(&self) -> &[Group; Group::COUNT] {
        &self.0
    }
}

impl FromStr for GroupPriority {
    type Err = AnalyticsError;

    /// Comma-separated list naming all five groups.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let groups = s
            .split(',')
            .map(|p| Group::from_str(p.trim()).map_err(|e| AnalyticsError::Format(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let order: [Group; Group::COUNT] = groups
            .try_into()
            .map_err(|v: Vec<Group>| AnalyticsError::Format(format!("priority needs {} groups, got {}", Group::COUNT, v.len())))?;
        Self::new(order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedComment {
    pub rank: usize,
    pub comment_id: String,
    pub group: Group,
    pub probability: f64,
}

/// Orders classified rows by group priority, then by descending
/// probability of the predicted group. The sort is stable, so exact ties
/// keep input order. Rows without a prediction are left out.
pub fn prioritize(predictions: &[PredictionRow], priority: &GroupPriority) -> Vec<RankedComment> {
    let mut rows: Vec<(Group, f64, &str)> = predictions
        .iter()
        .filter_map(|r| Some((r.predicted_group()?, r.confidence()?, r.comment_id.as_str())))
        .collect();
    rows.sort_by(|a, b| priority.rank(a.0).cmp(&priority.rank(b.0)).then(b.1.total_cmp(&a.1)));
    rows.into_iter()
        .enumerate()
        .map(|(i, (group, probability, id))| RankedComment { rank: i + 1, comment_id: id.to_string(), group, probability })
        .collect()
}

pub fn write_priority_csv<W: Write>(out: W, ranking: &[RankedComment]) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "comment_id", "predicted_group", "probability"])?;
    for r in ranking {
        w.write_record([r.rank.to_string(), r.comment_id.clone(), r.group.to_string(), format!("{:.6}", r.probability)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClassProbabilities;

    fn row(id: &str, p: [f64; 5]) -> PredictionRow {
        PredictionRow { comment_id: id.into(), probabilities: Some(ClassProbabilities(p)), error: None }
    }

    #[test]
    fn single_reviewer_all_discussion() {
        let rows: Vec<_> = (0..3).map(|i| PredictionRow::gold(format!("c{i}"), Group::Discussion)).collect();
        let authors = (0..3).map(|i| (format!("c{i}"), "alice".to_string())).collect();
        let r = reviewer_report(&rows, &authors);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].functional_ratio, 0.0);
        assert_eq!(r[0].total, 3);
    }

    #[test]
    fn reviewer_ties_broken_by_total() {
        let rows = vec![
            PredictionRow::gold("1", Group::Functional),
            PredictionRow::gold("2", Group::Functional),
            PredictionRow::gold("3", Group::Discussion),
            PredictionRow::gold("4", Group::Functional),
            PredictionRow::gold("5", Group::Functional),
            PredictionRow::gold("6", Group::Refactoring),
            PredictionRow::gold("7", Group::Refactoring),
        ];
        let authors: HashMap<String, String> =
            [("1", "b"), ("2", "b"), ("3", "b"), ("4", "a"), ("5", "a"), ("6", "a"), ("7", "a")]
                .into_iter()
                .map(|(c, r)| (c.to_string(), r.to_string()))
                .collect();
        let r = reviewer_report(&rows, &authors);
        assert_eq!(r.iter().map(|s| s.reviewer_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        let mut csv = Vec::new();
        write_reviewer_csv(&mut csv, &r).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "reviewer_id,Discussion,Documentation,FalsePositive,Functional,Refactoring,total,functional_ratio\n\
             a,0,0,0,2,2,4,0.5000\nb,1,0,0,2,0,3,0.6667\n"
        );
    }

    #[test]
    fn priority_orders_groups_then_probability() {
        let rows = vec![
            row("r", [0.0, 0.0, 0.0, 0.1, 0.9]),
            row("f1", [0.0, 0.0, 0.0, 0.6, 0.4]),
            row("f2", [0.0, 0.0, 0.0, 0.8, 0.2]),
            row("f3", [0.0, 0.0, 0.0, 0.6, 0.4]),
            PredictionRow { comment_id: "e".into(), probabilities: None, error: Some("x".into()) },
        ];
        let ranked = prioritize(&rows, &GroupPriority::default());
        assert_eq!(ranked.iter().map(|r| r.comment_id.as_str()).collect::<Vec<_>>(), ["f2", "f1", "f3", "r"]);
        let custom: GroupPriority = "Refactoring, Functional, Documentation, Discussion, FalsePositive".parse().unwrap();
        assert_eq!(prioritize(&rows, &custom)[0].comment_id, "r");
        assert!("Functional,Functional,Documentation,Discussion,FalsePositive".parse::<GroupPriority>().is_err());
        assert!("Functional".parse::<GroupPriority>().is_err());
    }

    #[test]
    fn ratios_sum_to_hundred() {
        let rows = vec![PredictionRow::gold("a", Group::Functional), PredictionRow::gold("b", Group::Discussion)];
        let r = group_ratios(&rows);
        assert_eq!(r[Group::Functional.index()].percentage, 50.0);
        assert!((r.iter().map(|x| x.percentage).sum::<f64>() - 100.0).abs() < 1e-9);
    }
}
