use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::dynamics::PlatoonSpec;

/// A consecutive group of vehicles synthesized on its own. Its head treats
/// the true predecessor as a perfect `v*` tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubPlatoon {
    /// Platoon indices covered, `[start, end)`.
    pub range: Range<usize>,
    pub spec: PlatoonSpec,
}

/// Partitions the platoon into groups of at most `max_size`, each headed by
/// an automated vehicle. A cut that would place a human driver at a head is
/// moved backward.
pub fn split_subplatoons(
    spec: &PlatoonSpec,
    max_size: usize,
) -> Result<Vec<SubPlatoon>, SynthesisError> {
    if max_size == 0 {
        return Err(SynthesisError::InvalidSettings(
            "sub-platoon size must be at least 1".into(),
        ));
    }
    let n = spec.n();
    let automated = |i: usize| spec.vehicles()[i].is_automated();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = (start + max_size).min(n);
        while end < n && !automated(end) {
            end -= 1;
            if end == start {
                return Err(SynthesisError::Split(format!(
                    "no automated vehicle can head the group after vehicle {} within size {max_size}",
                    start + 1
                )));
            }
        }
        out.push(SubPlatoon {
            range: start..end,
            spec: spec.subrange(start, end)?,
        });
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{HvParams, Vehicle, VehicleParams};

    fn kinds(s: &str) -> PlatoonSpec {
        let v = s
            .chars()
            .map(|c| match c {
                'A' => Vehicle::Automated(VehicleParams::nominal()),
                _ => Vehicle::Human(HvParams::reference()),
            })
            .collect();
        PlatoonSpec::new(v, 20.0, 20.0, 0.05).unwrap()
    }

    fn ranges(s: &str, m: usize) -> Vec<Range<usize>> {
        split_subplatoons(&kinds(s), m)
            .unwrap()
            .into_iter()
            .map(|p| p.range)
            .collect()
    }

    #[test]
    fn pairs_of_four() {
        assert_eq!(ranges("AAAA", 2), vec![0..2, 2..4]);
    }

    #[test]
    fn identity_split() {
        assert_eq!(ranges("AAAA", 4), vec![0..4]);
        assert_eq!(ranges("AHA", 10), vec![0..3]);
    }

    #[test]
    fn head_legality_shift() {
        assert_eq!(ranges("AHA", 2), vec![0..2, 2..3]);
        assert_eq!(ranges("AAHA", 2), vec![0..1, 1..3, 3..4]);
    }

    #[test]
    fn impossible_split() {
        assert!(matches!(
            split_subplatoons(&kinds("AHHA"), 2),
            Err(SynthesisError::Split(_))
        ));
        assert!(split_subplatoons(&kinds("A"), 0).is_err());
    }
}
