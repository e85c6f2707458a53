//! Class mappings between taxonomies.
//!
//! Text form: `#` comment lines, a `# target:` line listing target names in
//! id order, then one `source_id target_id` pair per line (a trailing `#`
//! comment is allowed).

use std::collections::BTreeMap;

use super::PcError;
use crate::class::{class_name, SemanticClass, UNLABELED};
use crate::cloud::LabeledPointCloud;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMapping {
    pub name: String,
    pub table: BTreeMap<u8, u8>,
    pub target_names: Vec<String>,
    /// Free-form notes written into the file header.
    pub notes: Vec<String>,
}

/// Target ids of the six-class real-world taxonomy, in report column order.
pub const REAL6_NAMES: [&str; 6] = ["Ground", "Building", "Tree", "Car", "Light pole", "Fence"];

/// Target ids of the reduced nine-class instance taxonomy.
pub const REDUCED9_NAMES: [&str; 9] =
    ["Building", "Vegetation", "Vehicle", "Large vehicle", "Aircraft", "Bike", "Poles&Signs", "Clutter", "Fence"];

impl ClassMapping {
    pub fn identity(classes: &[SemanticClass]) -> Self {
        ClassMapping {
            name: "identity".into(),
            table: classes.iter().map(|c| (c.id(), c.id())).collect(),
            target_names: SemanticClass::ALL.iter().map(|c| c.name().to_string()).collect(),
            notes: Vec::new(),
        }
    }

    /// Fine synthetic classes (plus the ground aggregate) to the six
    /// real-world classes. Windows are building surface, so they map to
    /// building with the other man-made structures.
    pub fn synthetic_to_real6() -> Self {
        use SemanticClass::*;
        let target = |c: SemanticClass| -> u8 {
            match c {
                Road | Dirt | Grass | Ground => 0,
                LowVegetation | MediumVegetation | HighVegetation => 2,
                Vehicle | Truck | MilitaryVehicle => 3,
                LightPole | StreetSign => 4,
                Fence => 5,
                Building | Window | Aircraft | Bike | Motorcycle | Clutter => 1,
            }
        };
        ClassMapping {
            name: "synthetic-18 to real-6".into(),
            table: SemanticClass::ALL.iter().map(|&c| (c.id(), target(c))).collect(),
            target_names: REAL6_NAMES.iter().map(|s| s.to_string()).collect(),
            notes: vec!["window maps to building: windows are part of the building surface".into()],
        }
    }

    /// The fourteen instance classes to the reduced nine.
    pub fn instance14_to_9() -> Self {
        use SemanticClass::*;
        let target = |c: SemanticClass| -> u8 {
            match c {
                Building => 0,
                LowVegetation | MediumVegetation | HighVegetation => 1,
                Vehicle => 2,
                Truck | MilitaryVehicle => 3,
                Aircraft => 4,
                Bike | Motorcycle => 5,
                LightPole | StreetSign => 6,
                Clutter => 7,
                Fence => 8,
                _ => unreachable!("not an instance class"),
            }
        };
        ClassMapping {
            name: "instance-14 to 9".into(),
            table: SemanticClass::INSTANCE_CAPABLE.iter().map(|&c| (c.id(), target(c))).collect(),
            target_names: REDUCED9_NAMES.iter().map(|s| s.to_string()).collect(),
            notes: vec!["only the fourteen instance classes are mapped".into()],
        }
    }

    pub fn get(&self, source: u8) -> Option<u8> {
        self.table.get(&source).copied()
    }

    /// Target ids no source maps to.
    pub fn unreached_targets(&self) -> Vec<u8> {
        (0..self.target_names.len() as u8).filter(|t| !self.table.values().any(|v| v == t)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# mapping: {}\n", self.name);
        for n in &self.notes {
            s.push_str(&format!("# note: {n}\n"));
        }
        s.push_str(&format!("# target: {}\n", self.target_names.join(", ")));
        for (src, dst) in &self.table {
            let dst_name = self.target_names.get(*dst as usize).map_or("?", String::as_str);
            s.push_str(&format!("{src} {dst}  # {} -> {dst_name}\n", class_name(*src)));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, PcError> {
        let bad = |line: usize, m: &str| PcError::Format(format!("mapping line {}: {m}", line + 1));
        let mut m = ClassMapping { name: String::new(), table: BTreeMap::new(), target_names: Vec::new(), notes: Vec::new() };
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("mapping:") {
                    m.name = v.trim().to_string();
                } else if let Some(v) = comment.strip_prefix("target:") {
                    m.target_names = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                } else if let Some(v) = comment.strip_prefix("note:") {
                    m.notes.push(v.trim().to_string());
                }
                continue;
            }
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let cols: Vec<&str> = body.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(bad(ln, "expected two columns"));
            }
            let src: u8 = cols[0].parse().map_err(|_| bad(ln, "bad source id"))?;
            let dst: u8 = cols[1].parse().map_err(|_| bad(ln, "bad target id"))?;
            if m.table.insert(src, dst).is_some() {
                return Err(bad(ln, "duplicate source id"));
            }
        }
        if let Some(&dst) = m.table.values().find(|&&d| d as usize >= m.target_names.len()) {
            return Err(PcError::Format(format!("target id {dst} has no name")));
        }
        Ok(m)
    }
}

/// Relabels every point; unlabeled points stay unlabeled. Positions,
/// colors and instances are untouched.
pub fn map_classes(cloud: &LabeledPointCloud, mapping: &ClassMapping) -> Result<LabeledPointCloud, PcError> {
    let mut out = cloud.clone();
    for s in &mut out.semantic {
        if *s == UNLABELED {
            continue;
        }
        *s = mapping
            .get(*s)
            .ok_or_else(|| PcError::UnmappedClass(class_name(*s), mapping.name.clone()))?;
    }
    Ok(out)
}
