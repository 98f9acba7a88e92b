use std::path::Path;

use serde::Deserialize;

use crate::dataset::{Label, Manifest, Modality, SampleRecord};
use crate::error::{Error, Result};

/// One test on a manifest column. Exactly one of the predicate fields is set.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub column: String,
    pub equals: Option<String>,
    pub not_equals: Option<String>,
    pub one_of: Option<Vec<String>>,
    /// Matches when the `,`/`;` separated list in the cell contains the token.
    pub has: Option<String>,
    pub lacks: Option<String>,
    pub empty: Option<bool>,
}

fn tokens(cell: &str) -> impl Iterator<Item = String> + '_ {
    cell.split([',', ';'])
        .map(|t| t.trim().to_ascii_lowercase())
        .filter(|t| !t.is_empty())
}

impl Condition {
    fn validate(&self) -> Result<()> {
        let set = [
            self.equals.is_some(),
            self.not_equals.is_some(),
            self.one_of.is_some(),
            self.has.is_some(),
            self.lacks.is_some(),
            self.empty.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if set != 1 {
            return Err(Error::Config(format!(
                "condition on {:?} must set exactly one predicate, found {set}",
                self.column
            )));
        }
        Ok(())
    }

    pub fn matches(&self, record: &SampleRecord) -> bool {
        let cell = record.column(&self.column);
        if let Some(want) = self.empty {
            return cell.map_or(true, |c| c.trim().is_empty()) == want;
        }
        let Some(cell) = cell.map(str::trim) else {
            return false;
        };
        if let Some(v) = &self.equals {
            return cell == v;
        }
        if let Some(v) = &self.not_equals {
            return cell != v;
        }
        if let Some(vs) = &self.one_of {
            return vs.iter().any(|v| v == cell);
        }
        if let Some(v) = &self.has {
            let v = v.to_ascii_lowercase();
            return tokens(cell).any(|t| t == v);
        }
        if let Some(v) = &self.lacks {
            let v = v.to_ascii_lowercase();
            return !tokens(cell).any(|t| t == v);
        }
        false
    }
}

/// A screening task as a query: records matching every `positive` condition
/// become covid, those matching every `negative` condition become healthy,
/// the rest are dropped.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFilter {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub datasets: Vec<String>,
    #[serde(default)]
    pub modalities: Vec<Modality>,
    pub positive: Vec<Condition>,
    pub negative: Vec<Condition>,
}

impl TaskFilter {
    pub fn from_toml(text: &str) -> Result<Self> {
        let task: TaskFilter = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for c in task.positive.iter().chain(&task.negative) {
            c.validate()?;
        }
        if task.positive.is_empty() || task.negative.is_empty() {
            return Err(Error::Config(format!(
                "task {:?} needs both positive and negative conditions",
                task.name
            )));
        }
        Ok(task)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn apply(&self, manifest: &Manifest) -> Result<Manifest> {
        let mut out = Vec::new();
        for r in &manifest.records {
            if !self.datasets.is_empty() && !self.datasets.contains(&r.dataset) {
                continue;
            }
            if !self.modalities.is_empty() && !self.modalities.contains(&r.modality) {
                continue;
            }
            let pos = self.positive.iter().all(|c| c.matches(r));
            let neg = self.negative.iter().all(|c| c.matches(r));
            let label = match (pos, neg) {
                (true, true) => {
                    return Err(Error::Config(format!(
                        "task {:?}: sample {:?} matches both classes",
                        self.name, r.sample_id
                    )))
                }
                (true, false) => Label::Covid,
                (false, true) => Label::Healthy,
                (false, false) => continue,
            };
            out.push(SampleRecord {
                label,
                ..r.clone()
            });
        }
        Manifest::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::read_manifest;

    const TASKS: [(&str, &str); 4] = [
        ("cambridge_task1", include_str!("../../config/tasks/cambridge_task1.toml")),
        ("cambridge_task2", include_str!("../../config/tasks/cambridge_task2.toml")),
        ("cambridge_task3", include_str!("../../config/tasks/cambridge_task3.toml")),
        ("coswara_virufy", include_str!("../../config/tasks/coswara_virufy.toml")),
    ];

    fn task(name: &str) -> TaskFilter {
        TaskFilter::from_toml(TASKS.iter().find(|t| t.0 == name).unwrap().1).unwrap()
    }

    fn corpus() -> Manifest {
        let csv = "\
sample_id,subject_id,session_id,label,modality,path,dataset,symptoms,smoking,asthma,prevalent_area
p1,a,1,covid,cough,x,cambridge,,never,no,no
p2,b,1,covid,cough,x,cambridge,cough;fever,never,no,no
n1,c,1,healthy,cough,x,cambridge,,never,no,no
n2,d,1,healthy,cough,x,cambridge,,current,no,no
n3,e,1,healthy,cough,x,cambridge,cough,never,yes,no
n4,f,1,healthy,cough,x,cambridge,,never,no,yes
v1,g,1,covid,cough,x,virufy,,,,
c1,h,1,healthy,breath,x,coswara,,,,
";
        read_manifest(csv.as_bytes()).unwrap()
    }

    fn ids(m: &Manifest) -> Vec<(&str, Label)> {
        m.records.iter().map(|r| (r.sample_id.as_str(), r.label)).collect()
    }

    #[test]
    fn shipped_tasks_parse() {
        for (name, text) in TASKS {
            let t = TaskFilter::from_toml(text).unwrap();
            assert_eq!(t.name.replace('-', "_"), name);
        }
    }

    #[test]
    fn task_one_keeps_clean_negatives() {
        let m = task("cambridge_task1").apply(&corpus()).unwrap();
        assert_eq!(ids(&m), vec![("p1", Label::Covid), ("p2", Label::Covid), ("n1", Label::Healthy)]);
    }

    #[test]
    fn task_two_needs_cough_positives() {
        let m = task("cambridge_task2").apply(&corpus()).unwrap();
        assert_eq!(ids(&m), vec![("p2", Label::Covid), ("n1", Label::Healthy)]);
    }

    #[test]
    fn task_three_uses_asthmatic_coughers() {
        let m = task("cambridge_task3").apply(&corpus()).unwrap();
        assert_eq!(ids(&m), vec![("p2", Label::Covid), ("n3", Label::Healthy)]);
    }

    #[test]
    fn pooled_cough_task() {
        let m = task("coswara_virufy").apply(&corpus()).unwrap();
        assert_eq!(ids(&m), vec![("v1", Label::Covid)]);
    }

    #[test]
    fn conditions_need_one_predicate() {
        let bad = "name = \"x\"\n[[positive]]\ncolumn = \"label\"\n[[negative]]\ncolumn = \"label\"\nequals = \"healthy\"\n";
        assert!(TaskFilter::from_toml(bad).is_err());
    }

    #[test]
    fn overlapping_classes_are_an_error() {
        let t = "name = \"x\"\n[[positive]]\ncolumn = \"dataset\"\nequals = \"virufy\"\n[[negative]]\ncolumn = \"label\"\nequals = \"covid\"\n";
        assert!(TaskFilter::from_toml(t).unwrap().apply(&corpus()).is_err());
    }
}
