//! Point colors. Colors are payload only; no labeling logic reads them.

use crate::class::SemanticClass;

/// Base RGB per class, roughly what an aerial photo would show.
pub fn base_color(class: SemanticClass) -> [u8; 3] {
    use SemanticClass::*;
    match class {
        Building => [170, 160, 150],
        LowVegetation => [120, 160, 70],
        MediumVegetation => [80, 130, 50],
        HighVegetation => [40, 100, 40],
        Vehicle => [60, 80, 150],
        Truck => [200, 200, 200],
        Aircraft => [220, 220, 230],
        MilitaryVehicle => [90, 100, 60],
        Bike => [30, 30, 30],
        Motorcycle => [150, 30, 30],
        LightPole => [110, 110, 115],
        StreetSign => [200, 180, 40],
        Clutter => [130, 100, 80],
        Fence => [140, 110, 80],
        Road => [70, 70, 72],
        Window => [90, 120, 140],
        Dirt => [150, 120, 90],
        Grass => [100, 150, 60],
        Ground => [120, 120, 100],
    }
}

fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / d).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m).clamp(0.0, 1.0) * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

fn hash3(a: u64, b: u64, c: u64) -> u64 {
    let mut h = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.rotate_left(21) ^ c.rotate_left(42);
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

/// Class base color with a small seeded hue/saturation/value shift per
/// instance. Instance 0 keeps the base color.
pub fn instance_color(class: SemanticClass, instance: u32, seed: u64) -> [u8; 3] {
    let base = base_color(class);
    if instance == 0 {
        return base;
    }
    let h = hash3(seed, class.id() as u64, instance as u64);
    let unit = |shift: u32| ((h >> shift) & 0xFFFF) as f64 / 65535.0 - 0.5;
    let (hue, sat, val) = rgb_to_hsv(base);
    hsv_to_rgb(
        hue + 24.0 * unit(0),
        (sat + 0.2 * unit(16)).clamp(0.0, 1.0),
        (val + 0.2 * unit(32)).clamp(0.0, 1.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_round_trip_is_close() {
        for class in SemanticClass::ALL {
            let c = base_color(class);
            let (h, s, v) = rgb_to_hsv(c);
            let back = hsv_to_rgb(h, s, v);
            for k in 0..3 {
                assert!((c[k] as i32 - back[k] as i32).abs() <= 1, "{class}: {c:?} vs {back:?}");
            }
        }
    }

    #[test]
    fn jitter_is_seeded() {
        let a = instance_color(SemanticClass::Vehicle, 5, 1);
        assert_eq!(a, instance_color(SemanticClass::Vehicle, 5, 1));
        assert_eq!(instance_color(SemanticClass::Road, 0, 9), base_color(SemanticClass::Road));
    }
}
