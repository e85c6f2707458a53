//! Semantic class taxonomy.
//!
//! Ids `0..=17` are the eighteen fine-grained classes produced by scene
//! generation. `Ground` (id 18) is the coarse aggregate used by legacy data
//! and as a mapping target; the generator never emits it. Id 255 marks an
//! unlabeled point.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Label value for points that carry no semantic class.
pub const UNLABELED: u8 = 255;

/// Number of fine-grained classes emitted by the generator.
pub const FINE_CLASS_COUNT: usize = 18;

/// Total number of class ids including the `Ground` aggregate.
pub const CLASS_COUNT: usize = 19;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum SemanticClass {
    Building = 0,
    LowVegetation = 1,
    MediumVegetation = 2,
    HighVegetation = 3,
    Vehicle = 4,
    Truck = 5,
    Aircraft = 6,
    MilitaryVehicle = 7,
    Bike = 8,
    Motorcycle = 9,
    LightPole = 10,
    StreetSign = 11,
    Clutter = 12,
    Fence = 13,
    Road = 14,
    Window = 15,
    Dirt = 16,
    Grass = 17,
    Ground = 18,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; CLASS_COUNT] = [
        SemanticClass::Building,
        SemanticClass::LowVegetation,
        SemanticClass::MediumVegetation,
        SemanticClass::HighVegetation,
        SemanticClass::Vehicle,
        SemanticClass::Truck,
        SemanticClass::Aircraft,
        SemanticClass::MilitaryVehicle,
        SemanticClass::Bike,
        SemanticClass::Motorcycle,
        SemanticClass::LightPole,
        SemanticClass::StreetSign,
        SemanticClass::Clutter,
        SemanticClass::Fence,
        SemanticClass::Road,
        SemanticClass::Window,
        SemanticClass::Dirt,
        SemanticClass::Grass,
        SemanticClass::Ground,
    ];

    /// The classes that carry per-object instance ids, in instance-table order.
    pub const INSTANCE_CAPABLE: [SemanticClass; 14] = [
        SemanticClass::Building,
        SemanticClass::LowVegetation,
        SemanticClass::MediumVegetation,
        SemanticClass::HighVegetation,
        SemanticClass::Vehicle,
        SemanticClass::Truck,
        SemanticClass::Aircraft,
        SemanticClass::MilitaryVehicle,
        SemanticClass::Bike,
        SemanticClass::Motorcycle,
        SemanticClass::LightPole,
        SemanticClass::StreetSign,
        SemanticClass::Clutter,
        SemanticClass::Fence,
    ];

    pub const GROUND_FAMILY: [SemanticClass; 4] = [
        SemanticClass::Ground,
        SemanticClass::Road,
        SemanticClass::Dirt,
        SemanticClass::Grass,
    ];

    #[inline]
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Building => "building",
            SemanticClass::LowVegetation => "low_vegetation",
            SemanticClass::MediumVegetation => "medium_vegetation",
            SemanticClass::HighVegetation => "high_vegetation",
            SemanticClass::Vehicle => "vehicle",
            SemanticClass::Truck => "truck",
            SemanticClass::Aircraft => "aircraft",
            SemanticClass::MilitaryVehicle => "military_vehicle",
            SemanticClass::Bike => "bike",
            SemanticClass::Motorcycle => "motorcycle",
            SemanticClass::LightPole => "light_pole",
            SemanticClass::StreetSign => "street_sign",
            SemanticClass::Clutter => "clutter",
            SemanticClass::Fence => "fence",
            SemanticClass::Road => "road",
            SemanticClass::Window => "window",
            SemanticClass::Dirt => "dirt",
            SemanticClass::Grass => "grass",
            SemanticClass::Ground => "ground",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }

    pub fn is_instance_capable(self) -> bool {
        self.id() <= SemanticClass::Fence.id()
    }

    pub fn is_ground_family(self) -> bool {
        matches!(
            self,
            SemanticClass::Ground | SemanticClass::Road | SemanticClass::Dirt | SemanticClass::Grass
        )
    }

    pub fn is_vegetation(self) -> bool {
        matches!(
            self,
            SemanticClass::LowVegetation
                | SemanticClass::MediumVegetation
                | SemanticClass::HighVegetation
        )
    }

    /// Vegetation class from object height. Boundary heights go to the lower
    /// class: `h <= 2.0` is low, `2.0 < h <= 5.0` is medium, above is high.
    pub fn vegetation_for_height(height: f64) -> Self {
        if height <= 2.0 {
            SemanticClass::LowVegetation
        } else if height <= 5.0 {
            SemanticClass::MediumVegetation
        } else {
            SemanticClass::HighVegetation
        }
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `true` if the raw label id belongs to the ground family.
pub fn is_ground_family_id(id: u8) -> bool {
    SemanticClass::from_id(id).is_some_and(SemanticClass::is_ground_family)
}

/// `true` if the raw label id is instance-capable.
pub fn is_instance_capable_id(id: u8) -> bool {
    SemanticClass::from_id(id).is_some_and(SemanticClass::is_instance_capable)
}

/// Human-readable name for a raw label id.
pub fn class_name(id: u8) -> String {
    match SemanticClass::from_id(id) {
        Some(c) => c.name().to_string(),
        None if id == UNLABELED => "unlabeled".to_string(),
        None => format!("class_{id}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_names_are_a_bijection() {
        for (i, c) in SemanticClass::ALL.iter().enumerate() {
            assert_eq!(c.id() as usize, i);
            assert_eq!(SemanticClass::from_id(c.id()), Some(*c));
            assert_eq!(SemanticClass::from_name(c.name()), Some(*c));
        }
        assert_eq!(SemanticClass::from_id(19), None);
        assert_eq!(SemanticClass::from_id(UNLABELED), None);
    }

    #[test]
    fn instance_capable_subset_has_fourteen_members() {
        let n = SemanticClass::ALL
            .iter()
            .filter(|c| c.is_instance_capable())
            .count();
        assert_eq!(n, 14);
        for c in SemanticClass::INSTANCE_CAPABLE {
            assert!(c.is_instance_capable());
        }
        assert!(!SemanticClass::Window.is_instance_capable());
        assert!(!SemanticClass::Road.is_instance_capable());
    }

    #[test]
    fn vegetation_thresholds() {
        use SemanticClass::*;
        assert_eq!(SemanticClass::vegetation_for_height(1.0), LowVegetation);
        assert_eq!(SemanticClass::vegetation_for_height(2.0), LowVegetation);
        assert_eq!(SemanticClass::vegetation_for_height(2.0001), MediumVegetation);
        assert_eq!(SemanticClass::vegetation_for_height(3.0), MediumVegetation);
        assert_eq!(SemanticClass::vegetation_for_height(5.0), MediumVegetation);
        assert_eq!(SemanticClass::vegetation_for_height(10.0), HighVegetation);
    }
}
