//! Built-in benchmark experiments.

use super::experiment::ExperimentSpec;
use crate::error::{Error, Result};

const SOURCES: [(&str, &str); 13] = [
    ("mon-exp1", include_str!("../../data/experiments/mon-exp1.json")),
    ("mon-exp2", include_str!("../../data/experiments/mon-exp2.json")),
    ("mon-exp3", include_str!("../../data/experiments/mon-exp3.json")),
    ("mon-exp4", include_str!("../../data/experiments/mon-exp4.json")),
    ("mon-exp5", include_str!("../../data/experiments/mon-exp5.json")),
    ("mon-exp6", include_str!("../../data/experiments/mon-exp6.json")),
    ("mon-exp7", include_str!("../../data/experiments/mon-exp7.json")),
    ("bin-exp1", include_str!("../../data/experiments/bin-exp1.json")),
    ("bin-exp2", include_str!("../../data/experiments/bin-exp2.json")),
    ("bin-exp3", include_str!("../../data/experiments/bin-exp3.json")),
    ("bin-exp4", include_str!("../../data/experiments/bin-exp4.json")),
    ("bin-exp5", include_str!("../../data/experiments/bin-exp5.json")),
    ("bin-exp6", include_str!("../../data/experiments/bin-exp6.json")),
];

/// Identifiers of all built-in experiments in canonical order.
pub fn ids() -> Vec<&'static str> {
    SOURCES.iter().map(|(id, _)| *id).collect()
}

pub fn parse(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
        what: "experiment definition".into(),
        detail: e.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn get(id: &str) -> Result<ExperimentSpec> {
    let (_, text) = SOURCES
        .iter()
        .find(|(k, _)| *k == id)
        .ok_or_else(|| Error::UnknownExperiment(id.to_string()))?;
    parse(text)
}

pub fn all() -> Result<Vec<ExperimentSpec>> {
    ids().into_iter().map(get).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_experiments_parse_and_match_ids() {
        let specs = all().unwrap();
        assert_eq!(specs.len(), 13);
        for (spec, id) in specs.iter().zip(ids()) {
            assert_eq!(spec.id, id);
            assert!(!spec.assumptions.is_empty(), "{id} records no assumptions");
            let labels: Vec<_> = spec.conditions().into_iter().map(|c| c.label).collect();
            for r in &spec.references {
                assert!(
                    labels.contains(&r.condition) || spec.id == "bin-exp6",
                    "{id}: reference {} matches no condition",
                    r.condition
                );
            }
        }
    }

    #[test]
    fn unknown_id_is_an_error() {
        assert!(matches!(get("mon-exp9"), Err(Error::UnknownExperiment(_))));
    }
}
