use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;

pub const NUM_ACTIONS: usize = 6;

/// Which target-lane gap the ego steers toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapChoice {
    Front = 0,
    Adjacent = 1,
    Rear = 2,
}

/// Whether the ego moves laterally this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lateral {
    Commit = 0,
    Hold = 1,
}

impl GapChoice {
    pub const ALL: [GapChoice; 3] = [GapChoice::Front, GapChoice::Adjacent, GapChoice::Rear];
}

/// Joint longitudinal x lateral decision, encoded as `gap * 2 + lateral`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(u8);

impl ActionId {
    pub fn new(index: usize) -> Result<Self, SimError> {
        if index < NUM_ACTIONS {
            Ok(Self(index as u8))
        } else {
            Err(SimError::InvalidAction(index))
        }
    }

    pub fn encode(gap: GapChoice, lateral: Lateral) -> Self {
        Self(gap as u8 * 2 + lateral as u8)
    }

    pub fn decode(self) -> (GapChoice, Lateral) {
        let gap = GapChoice::ALL[(self.0 / 2) as usize];
        let lateral = if self.0 % 2 == 0 {
            Lateral::Commit
        } else {
            Lateral::Hold
        };
        (gap, lateral)
    }

    pub fn gap(self) -> GapChoice {
        self.decode().0
    }

    pub fn lateral(self) -> Lateral {
        self.decode().1
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ActionId> {
        (0..NUM_ACTIONS as u8).map(ActionId)
    }

    pub fn one_hot(self) -> [f64; NUM_ACTIONS] {
        let mut v = [0.0; NUM_ACTIONS];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (gap, lateral) = self.decode();
        write!(f, "{gap:?}/{lateral:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_round_trips_all_six() {
        let mut seen = Vec::new();
        for gap in GapChoice::ALL {
            for lateral in [Lateral::Commit, Lateral::Hold] {
                let a = ActionId::encode(gap, lateral);
                assert_eq!(a.decode(), (gap, lateral));
                seen.push(a.index());
            }
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..NUM_ACTIONS).collect::<Vec<_>>());
        assert!(ActionId::new(6).is_err());
    }
}
