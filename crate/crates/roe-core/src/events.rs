//! Event taxonomy and per-step/per-episode count vectors.
//!
//! Every other module speaks in these types: environments emit an
//! [`EventVector`] per step, episodes accumulate them, and the rarity reward
//! is a function of count vectors and their windowed means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of weapon slots tracked by the Doom-analog taxonomy.
pub const WEAPON_SLOTS: usize = 10;

/// An ordered list of unique event names. Indices are stable for the
/// lifetime of a run and are what buffers, logs, and checkpoints key on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct EventTaxonomy {
    names: Vec<String>,
}

impl EventTaxonomy {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::config("taxonomy must contain at least one event"));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::config(format!("duplicate event name `{name}`")));
            }
        }
        Ok(EventTaxonomy { names })
    }

    /// The 26-event Doom-analog taxonomy in its documented fixed order:
    /// movement, shoot, pickup_medkit, pickup_armor, pickup_ammo,
    /// pickup_weapon_0..9, kill_weapon_0..9, kill_any.
    pub fn doom26() -> Self {
        let mut names = vec![
            "movement".to_string(),
            "shoot".to_string(),
            "pickup_medkit".to_string(),
            "pickup_armor".to_string(),
            "pickup_ammo".to_string(),
        ];
        for slot in 0..WEAPON_SLOTS {
            names.push(format!("pickup_weapon_{slot}"));
        }
        for slot in 0..WEAPON_SLOTS {
            names.push(format!("kill_weapon_{slot}"));
        }
        names.push("kill_any".to_string());
        EventTaxonomy { names }
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    /// Index of `name`, if present. Taxonomies are small; a scan is fine.
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn zeros(&self) -> EventVector {
        EventVector::zeros(self.size())
    }
}

impl TryFrom<Vec<String>> for EventTaxonomy {
    type Error = Error;
    fn try_from(names: Vec<String>) -> Result<Self> {
        EventTaxonomy::new(names)
    }
}

impl From<EventTaxonomy> for Vec<String> {
    fn from(t: EventTaxonomy) -> Vec<String> {
        t.names
    }
}

/// Dense count vector over a taxonomy for one step or one episode.
/// Counts are unsigned, so no operation can produce a negative count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventVector {
    counts: Vec<u32>,
}

impl EventVector {
    pub fn zeros(len: usize) -> Self {
        EventVector {
            counts: vec![0; len],
        }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        EventVector { counts }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, index: usize) -> u32 {
        self.counts[index]
    }

    pub fn increment(&mut self, index: usize, by: u32) {
        self.counts[index] += by;
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Elementwise sum; accumulates per-step vectors into an episode vector.
    pub fn add(&self, other: &EventVector) -> Result<EventVector> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    /// In-place elementwise sum.
    pub fn add_assign(&mut self, other: &EventVector) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::contract(format!(
                "event vector length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn doom26_has_26_entries_in_documented_order() {
        let t = EventTaxonomy::doom26();
        assert_eq!(t.size(), 26);
        assert_eq!(t.index("movement"), Some(0));
        assert_eq!(t.index("shoot"), Some(1));
        assert_eq!(t.index("pickup_medkit"), Some(2));
        assert_eq!(t.index("pickup_armor"), Some(3));
        assert_eq!(t.index("pickup_ammo"), Some(4));
        assert_eq!(t.index("pickup_weapon_0"), Some(5));
        assert_eq!(t.index("pickup_weapon_9"), Some(14));
        assert_eq!(t.index("kill_weapon_0"), Some(15));
        assert_eq!(t.index("kill_weapon_9"), Some(24));
        assert_eq!(t.index("kill_any"), Some(25));
    }

    #[test]
    fn doom26_category_counts_total_26() {
        // movement + shoot + three item pickups + ten weapon pickups
        // + ten per-weapon kills + kill_any.
        assert_eq!(1 + 1 + 3 + 10 + 10 + 1, EventTaxonomy::doom26().size());
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = EventTaxonomy::new(vec!["a".into(), "a".into()]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn add_matches_elementwise_sum() {
        let a = EventVector::from_counts(vec![1, 2]);
        let b = EventVector::from_counts(vec![3, 0]);
        assert_eq!(a.add(&b).unwrap().counts(), &[4, 2]);
    }

    #[test]
    fn zero_is_additive_identity() {
        let v = EventVector::from_counts(vec![5, 0, 7]);
        let z = EventVector::zeros(3);
        assert_eq!(z.add(&v).unwrap(), v);
        assert_eq!(v.add(&z).unwrap(), v);
    }

    #[test]
    fn length_mismatch_is_contract_violation() {
        let a = EventVector::zeros(2);
        let b = EventVector::zeros(3);
        assert!(matches!(a.add(&b), Err(Error::Contract(_))));
    }

    #[test]
    fn taxonomy_serializes_as_array_of_names() {
        let t = EventTaxonomy::doom26();
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.starts_with("[\"movement\""));
        let back: EventTaxonomy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn add_is_commutative_and_associative(
            a in proptest::collection::vec(0u32..1000, 1..32),
            b in proptest::collection::vec(0u32..1000, 1..32),
            c in proptest::collection::vec(0u32..1000, 1..32),
        ) {
            let n = a.len().min(b.len()).min(c.len());
            let a = EventVector::from_counts(a[..n].to_vec());
            let b = EventVector::from_counts(b[..n].to_vec());
            let c = EventVector::from_counts(c[..n].to_vec());
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            prop_assert_eq!(
                a.add(&b).unwrap().add(&c).unwrap(),
                a.add(&b.add(&c).unwrap()).unwrap()
            );
        }
    }
}
