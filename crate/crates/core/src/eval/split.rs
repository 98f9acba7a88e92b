use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Label, Manifest, SampleRecord};
use crate::error::{Error, Result};

/// One label per subject; a subject recorded under both labels is an error.
pub fn subject_labels(manifest: &Manifest) -> Result<BTreeMap<String, Label>> {
    let mut out: BTreeMap<String, Label> = BTreeMap::new();
    for r in &manifest.records {
        match out.get(&r.subject_id) {
            Some(l) if *l != r.label => {
                return Err(Error::Evaluation(format!("subject {:?} carries both labels", r.subject_id)))
            }
            _ => {
                out.insert(r.subject_id.clone(), r.label);
            }
        }
    }
    Ok(out)
}

fn by_class(subjects: &BTreeMap<String, Label>) -> [Vec<&str>; 2] {
    let mut classes = [Vec::new(), Vec::new()];
    for (s, l) in subjects {
        classes[(*l == Label::Covid) as usize].push(s.as_str());
    }
    classes
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSplit {
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl SubjectSplit {
    pub fn dev_records<'a>(&self, manifest: &'a Manifest) -> Vec<&'a SampleRecord> {
        manifest.records.iter().filter(|r| self.dev.contains(&r.subject_id)).collect()
    }

    pub fn test_records<'a>(&self, manifest: &'a Manifest) -> Vec<&'a SampleRecord> {
        manifest.records.iter().filter(|r| self.test.contains(&r.subject_id)).collect()
    }
}

/// Shuffles subjects within each class and sends `round(n * dev_fraction)`
/// of them (at least one, leaving at least one) to the dev side.
pub fn subject_split(subjects: &BTreeMap<String, Label>, seed: u64, dev_fraction: f64) -> Result<SubjectSplit> {
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(Error::invalid(format!("dev_fraction {dev_fraction} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SubjectSplit {
        dev: BTreeSet::new(),
        test: BTreeSet::new(),
    };
    for (label, mut members) in Label::ALL.into_iter().zip(by_class(subjects)) {
        if members.len() < 2 {
            return Err(Error::Evaluation(format!(
                "need at least 2 {label} subjects to split, found {}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_dev = ((members.len() as f64 * dev_fraction).round() as usize).clamp(1, members.len() - 1);
        for (i, s) in members.into_iter().enumerate() {
            if i < n_dev {
                split.dev.insert(s.to_string());
            } else {
                split.test.insert(s.to_string());
            }
        }
    }
    Ok(split)
}

/// Randomly drops majority-class items until both classes are equally
/// frequent. Returns the kept indices in ascending order.
pub fn undersample_balance(labels: &[Label], seed: u64) -> Result<Vec<usize>> {
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        classes[(*l == Label::Covid) as usize].push(i);
    }
    let keep = classes[0].len().min(classes[1].len());
    if keep == 0 {
        return Err(Error::Evaluation("cannot balance: a class is absent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * keep);
    for mut c in classes {
        if c.len() > keep {
            c.shuffle(&mut rng);
            c.truncate(keep);
        }
        out.extend(c);
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
}

/// Deals class-shuffled subjects round-robin into `k` validation folds, so
/// fold sizes differ by at most one and each class is spread evenly.
pub fn kfold_by_subject(subjects: &BTreeMap<String, Label>, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if subjects.len() < k {
        return Err(Error::Evaluation(format!("{} subjects cannot fill {k} folds", subjects.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(subjects.len());
    for mut members in by_class(subjects) {
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut validation = vec![BTreeSet::new(); k];
    for (i, s) in order.into_iter().enumerate() {
        validation[i % k].insert(s.to_string());
    }
    Ok(validation
        .into_iter()
        .map(|v| Fold {
            train: subjects.keys().filter(|s| !v.contains(*s)).cloned().collect(),
            validation: v,
        })
        .collect())
}

/// Number of subjects present on both sides.
pub fn check_disjoint<'a>(a: impl IntoIterator<Item = &'a str>, b: impl IntoIterator<Item = &'a str>) -> usize {
    let a: BTreeSet<&str> = a.into_iter().collect();
    b.into_iter().collect::<BTreeSet<&str>>().intersection(&a).count()
}

/// Shuffles labels across subjects (every record of a subject keeps the
/// same new label). Used for null-distribution runs.
pub fn permute_subject_labels(manifest: &Manifest, seed: u64) -> Result<Manifest> {
    let subjects = subject_labels(manifest)?;
    let mut labels: Vec<Label> = subjects.values().copied().collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let new: BTreeMap<&str, Label> = subjects.keys().map(String::as_str).zip(labels).collect();
    Manifest::new(
        manifest
            .records
            .iter()
            .map(|r| SampleRecord {
                label: new[r.subject_id.as_str()],
                ..r.clone()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subjects(pos: usize, neg: usize) -> BTreeMap<String, Label> {
        (0..pos)
            .map(|i| (format!("p{i:02}"), Label::Covid))
            .chain((0..neg).map(|i| (format!("n{i:02}"), Label::Healthy)))
            .collect()
    }

    #[test]
    fn ten_subjects_split_eight_two() {
        let s = subject_split(&subjects(5, 5), 1, 0.8).unwrap();
        assert_eq!((s.dev.len(), s.test.len()), (8, 2));
        assert_eq!(check_disjoint(s.dev.iter().map(String::as_str), s.test.iter().map(String::as_str)), 0);
        assert_eq!(s, subject_split(&subjects(5, 5), 1, 0.8).unwrap());
        assert!(subject_split(&subjects(1, 5), 1, 0.8).is_err());
    }

    #[test]
    fn balance_examples() {
        let mut labels = vec![Label::Healthy; 100];
        labels.extend(vec![Label::Covid; 40]);
        let a = undersample_balance(&labels, 1).unwrap();
        assert_eq!(a.len(), 80);
        assert_eq!(a.iter().filter(|&&i| labels[i] == Label::Covid).count(), 40);
        let b = undersample_balance(&labels, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(b.len(), 80);
        let even = [Label::Covid, Label::Healthy, Label::Healthy, Label::Covid];
        assert_eq!(undersample_balance(&even, 3).unwrap(), vec![0, 1, 2, 3]);
        assert!(undersample_balance(&[Label::Covid], 0).is_err());
    }

    #[test]
    fn folds_of_two() {
        let subs = subjects(5, 5);
        let folds = kfold_by_subject(&subs, 5, 4).unwrap();
        assert!(folds.iter().all(|f| f.validation.len() == 2 && f.train.len() == 8));
        let union: BTreeSet<String> = folds.iter().flat_map(|f| f.validation.iter().cloned()).collect();
        assert_eq!(union.len(), 10);
        assert!(kfold_by_subject(&subjects(2, 2), 5, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_subjects(pos in 3usize..30, neg in 3usize..30, k in 2usize..6, seed in any::<u64>()) {
            let subs = subjects(pos, neg);
            let folds = kfold_by_subject(&subs, k, seed).unwrap();
            let mut seen = BTreeSet::new();
            for f in &folds {
                prop_assert_eq!(check_disjoint(f.train.iter().map(String::as_str), f.validation.iter().map(String::as_str)), 0);
                prop_assert_eq!(f.train.len() + f.validation.len(), subs.len());
                for v in &f.validation {
                    prop_assert!(seen.insert(v.clone()));
                }
            }
            prop_assert_eq!(seen.len(), subs.len());
            let sizes: Vec<usize> = folds.iter().map(|f| f.validation.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn split_keeps_both_classes_on_both_sides(pos in 2usize..40, neg in 2usize..40, seed in any::<u64>()) {
            let subs = subjects(pos, neg);
            let s = subject_split(&subs, seed, 0.8).unwrap();
            prop_assert_eq!(s.dev.len() + s.test.len(), pos + neg);
            for side in [&s.dev, &s.test] {
                prop_assert!(side.iter().any(|x| subs[x] == Label::Covid));
                prop_assert!(side.iter().any(|x| subs[x] == Label::Healthy));
            }
        }
    }
}
