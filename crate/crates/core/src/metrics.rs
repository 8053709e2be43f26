//! Quality measures of an instance against its quality version(s).
//!
//! Ratios are exact; [`render`] gives the four-place decimal form.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::extsrc::Registry;
use crate::lci::{answers_on, minimal_lci_with, LciSpec};
use crate::relmodel::{symmetric_difference, Instance, Tuple};
use crate::unfold::relation_queries;

pub type Rational = Ratio<u64>;

/// Decimal rendering rounded half up to four places.
pub fn render(r: &Rational) -> String {
    let scaled = (*r * Rational::from_integer(10_000)).round().to_integer();
    format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
}

fn relation_names<'a>(instances: impl IntoIterator<Item = &'a Instance>) -> BTreeSet<String> {
    instances
        .into_iter()
        .flat_map(|i| i.relation_names().map(str::to_string))
        .collect()
}

fn size(d: &Instance) -> Result<u64> {
    match d.len() {
        0 => Err(Error::EmptyBase),
        n => Ok(n as u64),
    }
}

/// Sum over relations of `|R(d) △ R(quality)|`.
pub fn qm0(d: &Instance, quality: &Instance) -> Result<usize> {
    relation_names([d, quality])
        .iter()
        .map(|r| symmetric_difference(d, quality, r))
        .sum()
}

/// `(|d| - max |Q_i|) / |d|` over quality instances contained in `d`.
pub fn qm1(d: &Instance, quality_instances: &[Instance]) -> Result<Rational> {
    let n = size(d)?;
    if quality_instances.is_empty() {
        return Err(Error::ContainmentViolation("no quality instance given".into()));
    }
    for (i, q) in quality_instances.iter().enumerate() {
        if !q.is_subset_of(d) {
            return Err(Error::ContainmentViolation(format!(
                "quality instance {} is not contained in the instance under assessment",
                i + 1
            )));
        }
    }
    let max = quality_instances.iter().map(Instance::len).max().unwrap_or(0) as u64;
    Ok(Rational::new(n - max, n))
}

/// `|d ∩ Q_1 ∩ ... ∩ Q_k| / |d|`.
pub fn jaccard_r(d: &Instance, quality_instances: &[Instance]) -> Result<Rational> {
    let n = size(d)?;
    let mut common = 0u64;
    for rel in relation_names([d]) {
        let mut inter: BTreeSet<&Tuple> = d.tuples(&rel).iter().collect();
        for q in quality_instances {
            inter.retain(|t| q.contains(&rel, t));
        }
        common += inter.len() as u64;
    }
    Ok(Rational::new(common, n))
}

/// `|d \ ∪_R QAns(Ans_R(x̄) :- R(x̄))| / |d|` with certain quality answers.
pub fn qm2(d: &Instance, spec: &LciSpec, registry: &mut Registry) -> Result<Rational> {
    let n = size(d)?;
    let imin = minimal_lci_with(spec, d, registry)?;
    let mut missing = 0u64;
    for (rel, query) in relation_queries(&spec.system)? {
        let answers = answers_on(&query, spec, &imin)?;
        missing += d.tuples(&rel).iter().filter(|t| !answers.contains(*t)).count() as u64;
    }
    Ok(Rational::new(missing, n))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationMetrics {
    pub size: usize,
    pub quality_size: usize,
    pub symmetric_difference: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricReport {
    pub qm0: usize,
    pub qm1: Rational,
    pub jaccard_r: Rational,
    pub qm2: Rational,
    pub per_relation: BTreeMap<String, RelationMetrics>,
}

impl MetricReport {
    /// `quality` is the quality instance; `alternatives` are the quality
    /// instances qm1 and r range over (`quality` alone when empty).
    pub fn compute(d: &Instance, quality: &Instance, alternatives: &[Instance], qm2: Rational) -> Result<Self> {
        let single = [quality.clone()];
        let alts = if alternatives.is_empty() { &single[..] } else { alternatives };
        let mut per_relation = BTreeMap::new();
        for rel in relation_names([d, quality]) {
            per_relation.insert(
                rel.clone(),
                RelationMetrics {
                    size: d.relation_len(&rel),
                    quality_size: quality.relation_len(&rel),
                    symmetric_difference: symmetric_difference(d, quality, &rel)?,
                },
            );
        }
        Ok(MetricReport {
            qm0: qm0(d, quality)?,
            qm1: qm1(d, alts)?,
            jaccard_r: jaccard_r(d, alts)?,
            qm2,
            per_relation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::tests::{row, table1, temp_noon_sig};

    fn table2() -> Instance {
        let mut q = Instance::with_schema([&temp_noon_sig()]);
        q.insert("TempNoon", row("Tom Waits", "38.5", "11:45", "Sep/5"));
        q.insert("TempNoon", row("Tom Waits", "38.0", "12:15", "Sep/6"));
        q.insert("TempNoon", row("Tom Waits", "37.9", "12:15", "Sep/7"));
        q
    }

    #[test]
    fn running_example_values() {
        let (d, q) = (table1(), table2());
        assert_eq!(qm0(&d, &q).unwrap(), 2);
        assert_eq!(qm1(&d, &[q.clone()]).unwrap(), Rational::new(2, 5));
        assert_eq!(jaccard_r(&d, &[q.clone()]).unwrap(), Rational::new(3, 5));
        assert_eq!(render(&Rational::new(2, 5)), "0.4000");
    }

    #[test]
    fn identical_and_empty() {
        let d = table1();
        assert_eq!(qm0(&d, &d).unwrap(), 0);
        assert_eq!(qm1(&d, &[d.clone()]).unwrap(), Rational::from_integer(0));
        assert_eq!(jaccard_r(&d, &[d.clone()]).unwrap(), Rational::from_integer(1));
        assert_eq!(qm0(&d, &Instance::new()).unwrap(), 5);
        assert!(matches!(qm1(&Instance::new(), &[Instance::new()]), Err(Error::EmptyBase)));
    }

    #[test]
    fn max_over_quality_instances() {
        let d = table1();
        let three = table2();
        let two = table2();
        let first = two.tuples("TempNoon").iter().next().unwrap().clone();
        let mut smaller = Instance::with_schema([&temp_noon_sig()]);
        for t in two.tuples("TempNoon").iter().filter(|t| **t != first) {
            smaller.insert("TempNoon", t.clone());
        }
        assert_eq!(qm1(&d, &[smaller.clone(), three.clone()]).unwrap(), Rational::new(2, 5));
        let mut disjoint = Instance::new();
        disjoint.insert("TempNoon", first);
        assert_eq!(jaccard_r(&d, &[smaller, disjoint]).unwrap(), Rational::from_integer(0));
    }

    #[test]
    fn containment_is_checked() {
        let mut q = table2();
        q.insert("TempNoon", row("Ann", "1", "00:00", "Sep/1"));
        assert!(matches!(qm1(&table1(), &[q]), Err(Error::ContainmentViolation(_))));
    }

    #[test]
    fn rendering_rounds() {
        assert_eq!(render(&Rational::new(1, 3)), "0.3333");
        assert_eq!(render(&Rational::new(2, 3)), "0.6667");
        assert_eq!(render(&Rational::from_integer(1)), "1.0000");
    }

    #[test]
    fn report_identities() {
        let (d, q) = (table1(), table2());
        let rep = MetricReport::compute(&d, &q, &[], Rational::new(2, 5)).unwrap();
        assert_eq!(rep.qm1, Rational::from_integer(1) - rep.jaccard_r);
        assert_eq!(rep.qm0, rep.per_relation.values().map(|m| m.symmetric_difference).sum::<usize>());
        assert_eq!(rep.per_relation["TempNoon"].quality_size, 3);
    }
}
