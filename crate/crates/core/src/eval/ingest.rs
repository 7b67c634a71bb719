use std::collections::BTreeMap;

use crate::detector::Label;

/// Labels each line anomalous when it mentions one of `anomalous_ids`
/// (e.g. the instance ids listed with a public log dataset).
pub fn label_by_identifiers<S: AsRef<str>, T: AsRef<str>>(
    lines: &[S],
    anomalous_ids: &[T],
) -> BTreeMap<u64, Label> {
    let ids: Vec<&str> = anomalous_ids
        .iter()
        .map(|s| s.as_ref().trim())
        .filter(|s| !s.is_empty())
        .collect();
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let hit = ids.iter().any(|id| line.as_ref().contains(id));
            (
                i as u64 + 1,
                if hit { Label::Anomaly } else { Label::Normal },
            )
        })
        .collect()
}
