//! Dataset statistics: class counts and volume density profiles.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::PcError;
use crate::class::class_name;
use crate::cloud::LabeledPointCloud;
use crate::geom::Vec3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub counts: BTreeMap<u8, usize>,
}

impl ClassHistogram {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("class_id,class_name,count\n");
        for (id, n) in &self.counts {
            s.push_str(&format!("{id},{},{n}\n", class_name(*id)));
        }
        s
    }

    /// Whitespace columns `name count log10(count)` for a log-scale bar
    /// plot.
    pub fn to_plot_data(&self) -> String {
        let mut s = String::from("# class count log10_count\n");
        for (id, n) in &self.counts {
            s.push_str(&format!("{} {n} {:.6}\n", class_name(*id), (*n as f64).log10()));
        }
        s
    }
}

pub fn class_histogram(cloud: &LabeledPointCloud) -> ClassHistogram {
    let mut h = ClassHistogram::default();
    for &s in &cloud.semantic {
        *h.counts.entry(s).or_default() += 1;
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityRegion {
    /// Concentric shells of equal volume.
    Sphere { center: [f64; 3], radius: f64 },
    /// Slabs of equal thickness along `axis` (0, 1 or 2).
    Box { min: [f64; 3], max: [f64; 3], axis: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    /// `bins + 1` bin edges: radii for spheres, coordinates for boxes.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub volumes: Vec<f64>,
    pub densities: Vec<f64>,
}

impl DensityHistogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,lower,upper,count,volume,density\n");
        for i in 0..self.counts.len() {
            s.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                self.edges[i], self.edges[i + 1], self.counts[i], self.volumes[i], self.densities[i]
            ));
        }
        s
    }
}

pub fn volume_density_histogram(cloud: &LabeledPointCloud, region: &DensityRegion, bins: usize) -> Result<DensityHistogram, PcError> {
    if bins == 0 {
        return Err(PcError::InvalidParameter("bins must be positive".into()));
    }
    let b = bins as f64;
    let (edges, volumes, bin_of): (Vec<f64>, Vec<f64>, Box<dyn Fn(&Vec3) -> Option<usize>>) = match *region {
        DensityRegion::Sphere { center, radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(PcError::InvalidParameter(format!("sphere radius {radius}")));
            }
            let c = Vec3::from(center);
            let edges: Vec<f64> = (0..=bins).map(|k| radius * (k as f64 / b).cbrt()).collect();
            let vol = 4.0 / 3.0 * PI * radius.powi(3) / b;
            let e = edges.clone();
            let f = move |p: &Vec3| {
                let r = (p - c).norm();
                if r > radius {
                    return None;
                }
                // Shell k holds radii in [e[k], e[k+1]); the outer edge
                // belongs to the last shell.
                let k = ((r / radius).powi(3) * b).floor() as usize;
                let mut k = k.min(bins - 1);
                while k > 0 && r < e[k] {
                    k -= 1;
                }
                while k + 1 < bins && r >= e[k + 1] {
                    k += 1;
                }
                Some(k)
            };
            (edges, vec![vol; bins], Box::new(f))
        }
        DensityRegion::Box { min, max, axis } => {
            if axis > 2 || (0..3).any(|a| !(max[a] > min[a])) {
                return Err(PcError::InvalidParameter("degenerate box or bad axis".into()));
            }
            let lo = min[axis];
            let t = (max[axis] - lo) / b;
            let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * t).collect();
            let area: f64 = (0..3).filter(|&a| a != axis).map(|a| max[a] - min[a]).product();
            let f = move |p: &Vec3| {
                if (0..3).any(|a| p[a] < min[a] || p[a] > max[a]) {
                    return None;
                }
                Some((((p[axis] - lo) / t).floor() as usize).min(bins - 1))
            };
            (edges, vec![area * t; bins], Box::new(f))
        }
    };
    let mut counts = vec![0usize; bins];
    for p in &cloud.positions {
        if let Some(k) = bin_of(p) {
            counts[k] += 1;
        }
    }
    let densities = counts.iter().zip(&volumes).map(|(&n, &v)| n as f64 / v).collect();
    Ok(DensityHistogram { edges, counts, volumes, densities })
}
