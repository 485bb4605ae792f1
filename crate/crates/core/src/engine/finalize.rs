//! Reducing repeated samples of the same question to one answer.

use super::EngineError;

/// Most frequent value. Ties go to the tied value that appeared first.
pub fn finalize_categorical_vote<S: AsRef<str>>(samples: &[S]) -> Result<String, EngineError> {
    // (value, count, first index)
    let mut tally: Vec<(&str, usize, usize)> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let s = s.as_ref();
        match tally.iter_mut().find(|(v, _, _)| *v == s) {
            Some(entry) => entry.1 += 1,
            None => tally.push((s, 1, i)),
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map(|(v, _, _)| v.to_string())
        .ok_or_else(|| EngineError::Aggregation("no samples to vote on".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericMode {
    Average,
    Sum,
}

pub fn finalize_numeric(samples: &[f64], mode: NumericMode) -> Result<f64, EngineError> {
    if samples.is_empty() {
        return Err(EngineError::Aggregation("no samples to aggregate".into()));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(EngineError::Aggregation(format!("non-finite sample {bad}")));
    }
    let sum: f64 = samples.iter().sum();
    Ok(match mode {
        NumericMode::Sum => sum,
        NumericMode::Average => sum / samples.len() as f64,
    })
}

/// Majority of 0/1 samples; an exact tie gives 0.
pub fn finalize_boolean(samples: &[f64]) -> Result<u8, EngineError> {
    if samples.is_empty() {
        return Err(EngineError::Aggregation("no samples to vote on".into()));
    }
    let mut ones = 0usize;
    for s in samples {
        match *s {
            v if v == 1.0 => ones += 1,
            v if v == 0.0 => {}
            v => return Err(EngineError::Aggregation(format!("boolean sample {v} is not 0 or 1"))),
        }
    }
    Ok(u8::from(ones * 2 > samples.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    #[test]
    fn vote_examples() {
        assert_eq!(finalize_categorical_vote(&["a", "a", "b"]).unwrap(), "a");
        assert_eq!(finalize_categorical_vote(&["a", "b"]).unwrap(), "a");
        assert_eq!(finalize_categorical_vote(&["b", "a", "a", "b"]).unwrap(), "b");
        assert_eq!(finalize_categorical_vote(&["x"]).unwrap(), "x");
        assert!(finalize_categorical_vote::<&str>(&[]).is_err());
    }

    #[test]
    fn numeric_examples() {
        assert_eq!(finalize_numeric(&[10.0, 20.0, 30.0], NumericMode::Average).unwrap(), 20.0);
        assert_eq!(finalize_numeric(&[10.0, 20.0, 30.0], NumericMode::Sum).unwrap(), 60.0);
        assert_eq!(finalize_numeric(&[4.5], NumericMode::Average).unwrap(), 4.5);
        assert_eq!(finalize_numeric(&[1.0, f64::NAN], NumericMode::Sum).unwrap_err().kind(), "AggregationError");
    }

    #[test]
    fn boolean_examples() {
        assert_eq!(finalize_boolean(&[1.0, 1.0, 0.0]).unwrap(), 1);
        assert_eq!(finalize_boolean(&[0.0, 1.0]).unwrap(), 0);
        assert_eq!(finalize_boolean(&[1.0, 0.0]).unwrap(), 0);
        assert_eq!(finalize_boolean(&[0.0]).unwrap(), 0);
        assert!(finalize_boolean(&[2.0]).is_err());
    }

    proptest! {
        #[test]
        fn vote_equals_unique_mode(samples in prop::collection::vec(0u8..4, 1..30)) {
            let mut counts: HashMap<u8, usize> = HashMap::new();
            for s in &samples {
                *counts.entry(*s).or_default() += 1;
            }
            let top = *counts.values().max().unwrap();
            let modes: Vec<u8> = counts.iter().filter(|(_, c)| **c == top).map(|(v, _)| *v).collect();
            prop_assume!(modes.len() == 1);
            let labels: Vec<String> = samples.iter().map(|s| format!("v{s}")).collect();
            prop_assert_eq!(finalize_categorical_vote(&labels).unwrap(), format!("v{}", modes[0]));
        }

        #[test]
        fn sum_is_n_times_average_for_constant_lists(v in -1e6f64..1e6, n in 1usize..50) {
            let samples = vec![v; n];
            let sum = finalize_numeric(&samples, NumericMode::Sum).unwrap();
            let avg = finalize_numeric(&samples, NumericMode::Average).unwrap();
            prop_assert!((sum - n as f64 * avg).abs() <= 1e-9 * sum.abs().max(1.0));
        }
    }
}
