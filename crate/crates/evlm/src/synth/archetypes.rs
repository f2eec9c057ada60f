//! Bundled archetype sets.

use std::collections::BTreeMap;

use super::{Archetype, ArchetypeMix};

fn weights(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Seven segments spanning play frequency, session length, purchase, and
/// collection propensities. The qualitative shape of each segment comes from
/// known player populations; the rate values are repo-chosen.
pub fn default_seven() -> Vec<ArchetypeMix> {
    let archetypes = vec![
        (
            Archetype {
                name: "competitive_devoted".into(),
                class_weights: weights(&[
                    ("round_start", 3.0),
                    ("level_up", 0.5),
                    ("purchase", 0.6),
                    ("reward_claim", 0.8),
                    ("social_activity", 0.3),
                    ("quest_start", 0.4),
                    ("popup", 0.3),
                    ("notification", 0.2),
                ]),
                p_len: 0.05,
                p_act: 0.75,
                purchase_propensity: 0.5,
                social_propensity: 0.3,
            },
            0.18,
        ),
        (
            Archetype {
                name: "casual_devoted".into(),
                class_weights: weights(&[
                    ("round_start", 1.5),
                    ("quest_start", 1.6),
                    ("reward_claim", 1.4),
                    ("social_activity", 0.6),
                    ("level_up", 0.4),
                    ("purchase", 0.3),
                    ("popup", 0.3),
                    ("notification", 0.3),
                ]),
                p_len: 0.07,
                p_act: 0.75,
                purchase_propensity: 0.05,
                social_propensity: 0.6,
            },
            0.16,
        ),
        (
            Archetype {
                name: "persistent_devoted".into(),
                class_weights: weights(&[
                    ("round_start", 2.2),
                    ("quest_start", 1.0),
                    ("reward_claim", 1.0),
                    ("social_activity", 0.5),
                    ("level_up", 0.5),
                    ("purchase", 0.2),
                    ("popup", 0.4),
                    ("notification", 0.3),
                ]),
                p_len: 0.06,
                p_act: 0.3,
                purchase_propensity: 0.05,
                social_propensity: 0.4,
            },
            0.15,
        ),
        (
            Archetype {
                name: "leanin_economy_aware".into(),
                class_weights: weights(&[
                    ("round_start", 1.6),
                    ("purchase", 1.2),
                    ("reward_claim", 1.3),
                    ("popup", 0.6),
                    ("level_up", 0.4),
                    ("quest_start", 0.5),
                    ("social_activity", 0.3),
                    ("notification", 0.2),
                ]),
                p_len: 0.08,
                p_act: 0.7,
                purchase_propensity: 0.75,
                social_propensity: 0.3,
            },
            0.13,
        ),
        (
            Archetype {
                name: "leanin_casual".into(),
                class_weights: weights(&[
                    ("round_start", 2.0),
                    ("popup", 0.5),
                    ("reward_claim", 0.6),
                    ("quest_start", 0.4),
                    ("level_up", 0.3),
                    ("purchase", 0.15),
                    ("social_activity", 0.2),
                    ("notification", 0.3),
                ]),
                p_len: 0.1,
                p_act: 0.7,
                purchase_propensity: 0.2,
                social_propensity: 0.2,
            },
            0.14,
        ),
        (
            Archetype {
                name: "persistent_casual".into(),
                class_weights: weights(&[
                    ("round_start", 2.0),
                    ("popup", 0.6),
                    ("notification", 0.5),
                    ("level_up", 0.3),
                    ("reward_claim", 0.3),
                    ("quest_start", 0.2),
                    ("purchase", 0.1),
                    ("social_activity", 0.1),
                ]),
                p_len: 0.4,
                p_act: 0.3,
                purchase_propensity: 0.05,
                social_propensity: 0.05,
            },
            0.14,
        ),
        (
            Archetype {
                name: "persistent_collector".into(),
                class_weights: weights(&[
                    ("reward_claim", 3.0),
                    ("round_start", 1.0),
                    ("quest_start", 0.9),
                    ("social_activity", 0.4),
                    ("level_up", 0.3),
                    ("popup", 0.3),
                    ("purchase", 0.15),
                    ("notification", 0.2),
                ]),
                p_len: 0.35,
                p_act: 0.25,
                purchase_propensity: 0.1,
                social_propensity: 0.4,
            },
            0.10,
        ),
    ];
    archetypes
        .into_iter()
        .map(|(archetype, weight)| ArchetypeMix { archetype, weight })
        .collect()
}

/// Four archetypes with near-disjoint dominant event classes; used by the
/// end-to-end recovery checks where the clustering must find them again.
pub fn separated_four() -> Vec<ArchetypeMix> {
    let archetypes = vec![
        Archetype {
            name: "grinder".into(),
            class_weights: weights(&[
                ("round_start", 6.0),
                ("level_up", 1.0),
                ("reward_claim", 0.3),
                ("popup", 0.15),
                ("notification", 0.1),
            ]),
            p_len: 0.05,
            p_act: 0.3,
            purchase_propensity: 0.05,
            social_propensity: 0.05,
        },
        Archetype {
            name: "socialite".into(),
            class_weights: weights(&[
                ("social_activity", 6.0),
                ("quest_start", 1.5),
                ("notification", 0.8),
                ("round_start", 0.5),
                ("popup", 0.2),
            ]),
            p_len: 0.25,
            p_act: 0.4,
            purchase_propensity: 0.05,
            social_propensity: 0.95,
        },
        Archetype {
            name: "collector".into(),
            class_weights: weights(&[
                ("reward_claim", 6.0),
                ("quest_start", 1.2),
                ("round_start", 0.6),
                ("popup", 0.4),
                ("level_up", 0.3),
            ]),
            p_len: 0.3,
            p_act: 0.35,
            purchase_propensity: 0.1,
            social_propensity: 0.4,
        },
        Archetype {
            name: "whale".into(),
            class_weights: weights(&[
                ("purchase", 5.0),
                ("round_start", 1.2),
                ("popup", 1.0),
                ("reward_claim", 0.3),
                ("level_up", 0.2),
            ]),
            p_len: 0.15,
            p_act: 0.5,
            purchase_propensity: 0.95,
            social_propensity: 0.1,
        },
    ];
    archetypes
        .into_iter()
        .map(|archetype| ArchetypeMix { archetype, weight: 0.25 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sets_validate() {
        for mix in default_seven().iter().chain(separated_four().iter()) {
            mix.archetype.validate().unwrap();
        }
        let total: f64 = default_seven().iter().map(|m| m.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let total4: f64 = separated_four().iter().map(|m| m.weight).sum();
        assert!((total4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seven_segments_have_distinct_names() {
        let names: std::collections::BTreeSet<String> =
            default_seven().into_iter().map(|m| m.archetype.name).collect();
        assert_eq!(names.len(), 7);
    }
}
